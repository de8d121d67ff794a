//! Static kd-tree over points of any dimension.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const LEAF: usize = 16;

enum Node {
    Leaf { start: usize, end: usize },
    Split { axis: usize, value: f64, left: Box<Node>, right: Box<Node> },
}

pub struct KdTree {
    dim: usize,
    coords: Vec<f64>,
    index: Vec<usize>,
    root: Node,
}

#[derive(PartialEq)]
struct Cand(f64, usize);

impl Eq for Cand {}

impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

impl KdTree {
    pub fn new<P: AsRef<[f64]>>(points: &[P], dim: usize) -> KdTree {
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            coords.extend_from_slice(&p.as_ref()[..dim]);
        }
        let mut index: Vec<usize> = (0..points.len()).collect();
        let root = build(&coords, dim, &mut index, 0, points.len());
        KdTree { dim, coords, index, root }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    fn d2(&self, i: usize, q: &[f64]) -> f64 {
        self.point(i).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Index and squared distance of the nearest point.
    pub fn nearest(&self, q: &[f64]) -> Option<(usize, f64)> {
        let mut best = (usize::MAX, f64::INFINITY);
        self.nearest_rec(&self.root, q, &mut best);
        (best.0 != usize::MAX).then_some(best)
    }

    fn nearest_rec(&self, node: &Node, q: &[f64], best: &mut (usize, f64)) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.index[*start..*end] {
                    let d = self.d2(i, q);
                    if d < best.1 || (d == best.1 && i < best.0) {
                        *best = (i, d);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.nearest_rec(near, q, best);
                if diff * diff <= best.1 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// Indices of all points within distance `r` of `q`, sorted ascending.
    pub fn within(&self, q: &[f64], r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.within_rec(&self.root, q, r * r, &mut out);
        out.sort_unstable();
        out
    }

    /// True when some point lies within distance `r` of `q`.
    pub fn any_within(&self, q: &[f64], r: f64) -> bool {
        self.nearest(q).is_some_and(|(_, d)| d <= r * r)
    }

    fn within_rec(&self, node: &Node, q: &[f64], r2: f64, out: &mut Vec<usize>) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.index[*start..*end] {
                    if self.d2(i, q) <= r2 {
                        out.push(i);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[*axis] - value;
                if diff <= 0.0 || diff * diff <= r2 {
                    self.within_rec(left, q, r2, out);
                }
                if diff >= 0.0 || diff * diff <= r2 {
                    self.within_rec(right, q, r2, out);
                }
            }
        }
    }

    /// The `k` nearest points as (index, squared distance), closest first.
    pub fn k_nearest(&self, q: &[f64], k: usize) -> Vec<(usize, f64)> {
        let mut heap = BinaryHeap::new();
        if k > 0 {
            self.knn_rec(&self.root, q, k, &mut heap);
        }
        let mut v: Vec<(usize, f64)> = heap.into_iter().map(|Cand(d, i)| (i, d)).collect();
        v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        v
    }

    fn knn_rec(&self, node: &Node, q: &[f64], k: usize, heap: &mut BinaryHeap<Cand>) {
        match node {
            Node::Leaf { start, end } => {
                for &i in &self.index[*start..*end] {
                    let c = Cand(self.d2(i, q), i);
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap is full") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split { axis, value, left, right } => {
                let diff = q[*axis] - value;
                let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                self.knn_rec(near, q, k, heap);
                if heap.len() < k || diff * diff <= heap.peek().expect("nonempty").0 {
                    self.knn_rec(far, q, k, heap);
                }
            }
        }
    }
}

fn build(coords: &[f64], dim: usize, index: &mut [usize], start: usize, end: usize) -> Node {
    let len = end - start;
    if len <= LEAF || dim == 0 {
        return Node::Leaf { start, end };
    }
    let slice = &mut index[start..end];
    let mut axis = 0;
    let mut spread = -1.0;
    for a in 0..dim {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in slice.iter() {
            let v = coords[i * dim + a];
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if hi - lo > spread {
            spread = hi - lo;
            axis = a;
        }
    }
    if spread <= 0.0 {
        return Node::Leaf { start, end };
    }
    let mid = len / 2;
    slice.select_nth_unstable_by(mid, |&a, &b| {
        coords[a * dim + axis].total_cmp(&coords[b * dim + axis]).then(a.cmp(&b))
    });
    let value = coords[slice[mid] * dim + axis];
    let left = build(coords, dim, index, start, start + mid);
    let right = build(coords, dim, index, start + mid, end);
    Node::Split { axis, value, left: Box::new(left), right: Box::new(right) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts: Vec<Vec<f64>> =
            (0..700).map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let tree = KdTree::new(&pts, 4);
        for _ in 0..50 {
            let q: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let d2 = |p: &Vec<f64>| p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let mut brute: Vec<(usize, f64)> = pts.iter().enumerate().map(|(i, p)| (i, d2(p))).collect();
            brute.sort_by(|a, b| a.1.total_cmp(&b.1));
            assert_eq!(tree.nearest(&q).unwrap().0, brute[0].0);
            let knn: Vec<usize> = tree.k_nearest(&q, 9).iter().map(|x| x.0).collect();
            let want: Vec<usize> = brute.iter().take(9).map(|x| x.0).collect();
            assert_eq!(knn, want);
            let mut within: Vec<usize> = brute.iter().filter(|x| x.1 <= 0.25).map(|x| x.0).collect();
            within.sort_unstable();
            assert_eq!(tree.within(&q, 0.5), within);
        }
    }
}
