//! Direction sets on `S^{n-1}` stored as angular nets.

use std::collections::HashMap;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{GdError, Result};
use crate::linalg::{angle_deg, chord_of_deg, norm};
use crate::spatial::KdTree;

const UNIT_TOL: f64 = 1e-9;
const FULL_SPHERE_MAX: usize = 2_000_000;

/// Finite set of unit vectors standing for the union of closed caps of
/// radius `theta_net` around them. Directions are kept in lexicographic order.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    n: usize,
    theta_net: f64,
    dirs: Vec<Vec<f64>>,
}

/// Half-cone `{t·a : a ∈ base, t ≥ 0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConeRep {
    pub base: DirectionSet,
}

impl ConeRep {
    pub fn new(base: DirectionSet) -> ConeRep {
        ConeRep { base }
    }

    pub fn is_empty(&self) -> bool {
        self.base.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.base.ambient_dim()
    }
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let c = x.total_cmp(y);
        if c.is_ne() {
            return c;
        }
    }
    std::cmp::Ordering::Equal
}

fn check_unit(a: &[f64]) -> Result<()> {
    let r = norm(a);
    if (r - 1.0).abs() > UNIT_TOL || !r.is_finite() {
        return Err(GdError::NonUnit(r));
    }
    Ok(())
}

/// Greedy net construction over a uniform grid of cells.
struct NetBuilder {
    n: usize,
    min_chord: f64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
    dirs: Vec<Vec<f64>>,
}

impl NetBuilder {
    fn new(n: usize, separation_deg: f64) -> NetBuilder {
        NetBuilder { n, min_chord: chord_of_deg(separation_deg), cells: HashMap::new(), dirs: Vec::new() }
    }

    fn cell_of(&self, a: &[f64]) -> Vec<i64> {
        a.iter().map(|x| (x / self.min_chord).floor() as i64).collect()
    }

    fn too_close(&self, a: &[f64]) -> bool {
        if self.min_chord <= 0.0 {
            return self.dirs.iter().any(|d| d.as_slice() == a);
        }
        let r = self.min_chord;
        let ranges: Vec<(i64, i64)> = a
            .iter()
            .map(|x| (((x - r) / r).floor() as i64, ((x + r) / r).floor() as i64))
            .collect();
        let mut key: Vec<i64> = ranges.iter().map(|r| r.0).collect();
        loop {
            if let Some(ids) = self.cells.get(&key) {
                for &i in ids {
                    let d = &self.dirs[i];
                    let c2: f64 = d.iter().zip(a).map(|(x, y)| (x - y) * (x - y)).sum();
                    if c2 < r * r {
                        return true;
                    }
                }
            }
            let mut axis = 0;
            loop {
                if axis == self.n {
                    return false;
                }
                if key[axis] < ranges[axis].1 {
                    key[axis] += 1;
                    break;
                }
                key[axis] = ranges[axis].0;
                axis += 1;
            }
        }
    }

    fn insert(&mut self, a: Vec<f64>) -> bool {
        if self.too_close(&a) {
            return false;
        }
        let key = if self.min_chord > 0.0 { self.cell_of(&a) } else { Vec::new() };
        self.cells.entry(key).or_default().push(self.dirs.len());
        self.dirs.push(a);
        true
    }
}

impl DirectionSet {
    pub fn empty(n: usize, theta_net: f64) -> DirectionSet {
        DirectionSet { n, theta_net, dirs: Vec::new() }
    }

    /// Net of the candidates with minimum separation `theta_net / 2`,
    /// built by sorting and greedy insertion.
    pub fn from_candidates(n: usize, theta_net: f64, cands: Vec<Vec<f64>>) -> Result<DirectionSet> {
        DirectionSet::with_separation(n, theta_net, theta_net / 2.0, cands)
    }

    /// Like [`DirectionSet::from_candidates`] with separation `theta_net`:
    /// every candidate is still within `theta_net` of the result.
    pub fn from_candidates_sparse(n: usize, theta_net: f64, cands: Vec<Vec<f64>>) -> Result<DirectionSet> {
        DirectionSet::with_separation(n, theta_net, theta_net, cands)
    }

    fn with_separation(n: usize, theta_net: f64, sep: f64, mut cands: Vec<Vec<f64>>) -> Result<DirectionSet> {
        if !(theta_net > 0.0 && theta_net.is_finite()) {
            return Err(GdError::InvalidParameter(format!("theta_net = {theta_net}")));
        }
        for c in &cands {
            if c.len() != n {
                return Err(GdError::DimensionMismatch(format!(
                    "direction of length {} on S^{}",
                    c.len(),
                    n - 1
                )));
            }
            check_unit(c)?;
        }
        cands.par_sort_unstable_by(|a, b| lex_cmp(a, b));
        cands.dedup();
        let mut b = NetBuilder::new(n, sep);
        for c in cands {
            b.insert(c);
        }
        let mut dirs = b.dirs;
        dirs.sort_by(|a, b| lex_cmp(a, b));
        Ok(DirectionSet { n, theta_net, dirs })
    }

    /// Adds `a` when it is at least `theta_net / 2` from every direction present.
    pub fn net_insert(&self, a: &[f64]) -> Result<DirectionSet> {
        check_unit(a)?;
        if a.len() != self.n {
            return Err(GdError::DimensionMismatch(format!("direction of length {}", a.len())));
        }
        let half = self.theta_net / 2.0;
        if self.dirs.iter().any(|d| angle_deg(d, a) < half) {
            return Ok(self.clone());
        }
        let mut dirs = self.dirs.clone();
        let pos = dirs.partition_point(|d| lex_cmp(d, a).is_lt());
        dirs.insert(pos, a.to_vec());
        Ok(DirectionSet { n: self.n, theta_net: self.theta_net, dirs })
    }

    /// Net of the whole sphere whose caps cover `S^{n-1}`.
    pub fn full_sphere(n: usize, theta_net: f64, seed: u64) -> DirectionSet {
        DirectionSet::from_candidates(n, theta_net, sphere_candidates(n, theta_net / 2.0, FULL_SPHERE_MAX, seed))
            .expect("generated candidates are unit vectors")
    }

    pub fn ambient_dim(&self) -> usize {
        self.n
    }

    pub fn theta_net(&self) -> f64 {
        self.theta_net
    }

    pub fn dirs(&self) -> &[Vec<f64>] {
        &self.dirs
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn tree(&self) -> KdTree {
        KdTree::new(&self.dirs, self.n)
    }

    /// Same directions reinterpreted at another resolution.
    pub fn with_theta(&self, theta_net: f64) -> DirectionSet {
        DirectionSet { n: self.n, theta_net, dirs: self.dirs.clone() }
    }

    /// Subset selected by a mask (order preserved, so still canonical).
    pub fn select(&self, keep: &[bool]) -> DirectionSet {
        let dirs = self.dirs.iter().zip(keep).filter(|(_, k)| **k).map(|(d, _)| d.clone()).collect();
        DirectionSet { n: self.n, theta_net: self.theta_net, dirs }
    }

    /// Net file: `GDNT`, version, n, theta_net, count, then coordinates (little-endian).
    pub fn write_net<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"GDNT")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        w.write_all(&self.theta_net.to_le_bytes())?;
        w.write_all(&(self.dirs.len() as u64).to_le_bytes())?;
        for d in &self.dirs {
            for x in d {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_net<R: Read>(mut r: R) -> Result<DirectionSet> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != b"GDNT" {
            return Err(GdError::Format("missing GDNT magic".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let version = u32::from_le_bytes(b4);
        if version != 1 {
            return Err(GdError::Format(format!("unsupported net version {version}")));
        }
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let theta_net = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        let mut dirs = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            let mut d = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut b8)?;
                d.push(f64::from_le_bytes(b8));
            }
            dirs.push(d);
        }
        Ok(DirectionSet { n, theta_net, dirs })
    }

    /// CSV with columns `x1..xn`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.n).map(|i| format!("x{i}")).collect();
        writeln!(w, "{}", header.join(","))?;
        for d in &self.dirs {
            let row: Vec<String> = d.iter().map(|x| format!("{x:.17e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Candidate directions at most `spacing` degrees from every point of the
/// sphere: a cube-surface grid when it has at most `max_count` points,
/// otherwise `max_count` uniform random directions.
pub fn sphere_candidates(n: usize, spacing: f64, max_count: usize, seed: u64) -> Vec<Vec<f64>> {
    if n == 1 {
        return vec![vec![1.0], vec![-1.0]];
    }
    let h = spacing.to_radians() * 2.0 / ((n - 1) as f64).sqrt();
    let m = (2.0 / h).ceil().max(1.0) as usize;
    let total = 2.0 * n as f64 * (m as f64).powi(n as i32 - 1);
    if total <= max_count as f64 {
        let mut out = Vec::with_capacity(total as usize);
        let mut idx = vec![0usize; n - 1];
        for face in 0..n {
            for sign in [-1.0, 1.0] {
                idx.iter_mut().for_each(|i| *i = 0);
                loop {
                    let mut v = Vec::with_capacity(n);
                    let mut k = 0;
                    for axis in 0..n {
                        if axis == face {
                            v.push(sign);
                        } else {
                            v.push(-1.0 + (idx[k] as f64 + 0.5) * 2.0 / m as f64);
                            k += 1;
                        }
                    }
                    let r = norm(&v);
                    out.push(v.iter().map(|x| x / r).collect());
                    let mut a = 0;
                    while a < n - 1 {
                        idx[a] += 1;
                        if idx[a] < m {
                            break;
                        }
                        idx[a] = 0;
                        a += 1;
                    }
                    if a == n - 1 {
                        break;
                    }
                }
            }
        }
        out
    } else {
        uniform_directions(n, max_count, seed)
    }
}

/// `count` independent uniform directions on `S^{n-1}`.
pub fn uniform_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let r = norm(&v);
        if r > 1e-12 {
            out.push(v.iter().map(|x| x / r).collect());
        }
    }
    out
}

/// Near-uniform probe directions with the given spacing: a Fibonacci lattice
/// on `S^2`, and uniform random draws (at most `max_random`) in other dimensions.
pub fn probe_grid(n: usize, spacing_deg: f64, max_random: usize, seed: u64) -> Vec<Vec<f64>> {
    if n == 3 {
        let s = spacing_deg.to_radians();
        let count = (4.0 * std::f64::consts::PI / (s * s)).ceil() as usize;
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        return (0..count)
            .map(|i| {
                let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
                let rho = (1.0 - z * z).max(0.0).sqrt();
                let phi = golden * i as f64;
                vec![rho * phi.cos(), rho * phi.sin(), z]
            })
            .collect();
    }
    if n == 2 {
        let count = (360.0 / spacing_deg).ceil() as usize;
        return (0..count)
            .map(|i| {
                let a = (i as f64 + 0.5) / count as f64 * std::f64::consts::TAU;
                vec![a.cos(), a.sin()]
            })
            .collect();
    }
    let h = spacing_deg.to_radians() / ((n - 1) as f64).sqrt();
    let grid = 2.0 * n as f64 * (2.0 / h).ceil().powi(n as i32 - 1);
    uniform_directions(n, (grid as usize).min(max_random), seed)
}

/// Fraction of probes lying within `theta` degrees of the direction set.
pub fn coverage(d: &DirectionSet, probes: &[Vec<f64>], theta: f64) -> f64 {
    if probes.is_empty() {
        return 1.0;
    }
    if d.is_empty() {
        return 0.0;
    }
    let tree = d.tree();
    let chord = chord_of_deg(theta);
    let hit = probes.par_iter().filter(|p| tree.any_within(p, chord)).count();
    hit as f64 / probes.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HausdorffMode {
    Symmetric,
    D1IntoD2,
}

fn one_sided(d1: &DirectionSet, d2: &DirectionSet) -> f64 {
    let tree = d2.tree();
    d1.dirs
        .par_iter()
        .map(|a| {
            let (i, _) = tree.nearest(a).expect("nonempty");
            angle_deg(a, tree.point(i))
        })
        .reduce(|| 0.0, f64::max)
}

/// Hausdorff angle in degrees; 0 when both are empty, +∞ when exactly one is.
pub fn hausdorff_angle(d1: &DirectionSet, d2: &DirectionSet, mode: HausdorffMode) -> f64 {
    match (d1.is_empty(), d2.is_empty()) {
        (true, true) => return 0.0,
        (true, false) | (false, true) => return f64::INFINITY,
        _ => {}
    }
    match mode {
        HausdorffMode::D1IntoD2 => one_sided(d1, d2),
        HausdorffMode::Symmetric => one_sided(d1, d2).max(one_sided(d2, d1)),
    }
}

/// Net of `D1 ∪ D2` at their common resolution.
pub fn union_dirsets(d1: &DirectionSet, d2: &DirectionSet) -> Result<DirectionSet> {
    if d1.n != d2.n {
        return Err(GdError::DimensionMismatch(format!("S^{} vs S^{}", d1.n - 1, d2.n - 1)));
    }
    if d1.theta_net != d2.theta_net {
        return Err(GdError::ResolutionMismatch(d1.theta_net, d2.theta_net));
    }
    let cands: Vec<Vec<f64>> = d1.dirs.iter().chain(&d2.dirs).cloned().collect();
    DirectionSet::from_candidates(d1.n, d1.theta_net, cands)
}

/// Every direction of `d2` is within `theta` degrees of `d1`.
pub fn covers(d1: &DirectionSet, d2: &DirectionSet, theta: f64) -> bool {
    if d2.is_empty() {
        return true;
    }
    if d1.is_empty() {
        return false;
    }
    one_sided(d2, d1) <= theta
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize) -> Vec<f64> {
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        v
    }

    #[test]
    fn insert_basics() {
        let d = DirectionSet::empty(3, 1.5);
        let d1 = d.net_insert(&e(3, 0)).unwrap();
        assert_eq!(d1.len(), 1);
        assert_eq!(d1.net_insert(&e(3, 0)).unwrap(), d1);
        assert!(matches!(d.net_insert(&[1.0, 1.0, 0.0]), Err(GdError::NonUnit(_))));
    }

    #[test]
    fn hausdorff_basics() {
        let a = DirectionSet::from_candidates(3, 1.5, vec![e(3, 0)]).unwrap();
        let b = DirectionSet::from_candidates(3, 1.5, vec![e(3, 1)]).unwrap();
        let empty = DirectionSet::empty(3, 1.5);
        assert_eq!(hausdorff_angle(&a, &a, HausdorffMode::Symmetric), 0.0);
        assert!((hausdorff_angle(&a, &b, HausdorffMode::Symmetric) - 90.0).abs() < 1e-9);
        assert_eq!(hausdorff_angle(&empty, &empty, HausdorffMode::Symmetric), 0.0);
        assert!(hausdorff_angle(&a, &empty, HausdorffMode::Symmetric).is_infinite());
        assert!(covers(&a, &a, 0.1));
        assert!(!covers(&a, &b, 10.0));
        assert!(covers(&a, &empty, 0.0));
    }

    #[test]
    fn union_rules() {
        let a = DirectionSet::from_candidates(3, 1.5, vec![e(3, 0)]).unwrap();
        let empty = DirectionSet::empty(3, 1.5);
        assert_eq!(union_dirsets(&a, &empty).unwrap(), a);
        assert_eq!(union_dirsets(&a, &a).unwrap(), a);
        let coarse = DirectionSet::empty(3, 3.0);
        assert!(matches!(union_dirsets(&a, &coarse), Err(GdError::ResolutionMismatch(..))));
    }

    #[test]
    fn full_sphere_is_dense() {
        let full = DirectionSet::full_sphere(3, 6.0, 1);
        let probes = uniform_directions(3, 5000, 9);
        assert_eq!(coverage(&full, &probes, 6.0), 1.0);
        for (i, a) in full.dirs().iter().enumerate().take(200) {
            for b in &full.dirs()[i + 1..] {
                assert!(angle_deg(a, b) >= 3.0 - 1e-9);
            }
        }
    }

    #[test]
    fn net_file_round_trip() {
        let full = DirectionSet::full_sphere(4, 20.0, 1);
        let mut buf = Vec::new();
        full.write_net(&mut buf).unwrap();
        assert_eq!(DirectionSet::read_net(buf.as_slice()).unwrap(), full);
    }
}
