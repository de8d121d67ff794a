//! Small dense vector helpers and principal-component fits.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let r = norm(a);
    if r > 0.0 && r.is_finite() {
        Some(a.iter().map(|x| x / r).collect())
    } else {
        None
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Angle in degrees between unit vectors, accurate for small angles.
pub fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
    let chord = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    (2.0 * (chord / 2.0).min(1.0).asin()).to_degrees()
}

/// Chord length between unit vectors at angular distance `deg`.
pub fn chord_of_deg(deg: f64) -> f64 {
    2.0 * (deg.to_radians() / 2.0).sin()
}

/// Gram-Schmidt; drops vectors that are (numerically) dependent on earlier ones.
pub fn orthonormalize(vectors: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let scale = norm(v);
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &out {
                let c = dot(&w, q);
                for (wi, qi) in w.iter_mut().zip(q) {
                    *wi -= c * qi;
                }
            }
        }
        let r = norm(&w);
        if r > 1e-10 * scale.max(1e-300) {
            out.push(w.iter().map(|x| x / r).collect());
        }
    }
    out
}

/// Linear subspace given by an orthonormal basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subspace {
    pub basis: Vec<Vec<f64>>,
}

impl Subspace {
    pub fn from_spanning(vectors: &[Vec<f64>]) -> Subspace {
        Subspace { basis: orthonormalize(vectors) }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Coordinates of `a` in the basis.
    pub fn coords(&self, a: &[f64]) -> Vec<f64> {
        self.basis.iter().map(|b| dot(a, b)).collect()
    }

    /// Norm of the orthogonal projection of `a`.
    pub fn proj_norm(&self, a: &[f64]) -> f64 {
        norm(&self.coords(a))
    }

    /// Angle in degrees between a unit vector and the subspace's sphere trace.
    pub fn angle_to_deg(&self, a: &[f64]) -> f64 {
        if self.basis.is_empty() {
            return 180.0;
        }
        let c = self.proj_norm(a).min(1.0);
        let s = (1.0 - c * c).max(0.0).sqrt();
        s.atan2(c).to_degrees()
    }

    /// Orthogonal projection of `a`.
    pub fn project(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len()];
        for b in &self.basis {
            let c = dot(a, b);
            for (o, bi) in out.iter_mut().zip(b) {
                *o += c * bi;
            }
        }
        out
    }

    /// Largest principal angle (degrees) between two subspaces of equal dimension.
    /// Row-major orthogonal projector onto the subspace in `R^n`.
    pub fn projector(&self, n: usize) -> Vec<f64> {
        let mut p = vec![0.0; n * n];
        for b in &self.basis {
            for i in 0..n {
                for j in 0..n {
                    p[i * n + j] += b[i] * b[j];
                }
            }
        }
        p
    }

    pub fn max_principal_angle_deg(&self, other: &Subspace) -> f64 {
        self.basis
            .iter()
            .map(|b| other.angle_to_deg(b))
            .chain(other.basis.iter().map(|b| self.angle_to_deg(b)))
            .fold(0.0, f64::max)
    }
}

/// Principal directions and singular values of a point set.
#[derive(Debug, Clone)]
pub struct Pca {
    /// Singular values in decreasing order (square roots of scatter eigenvalues).
    pub singular: Vec<f64>,
    /// Matching unit directions.
    pub axes: Vec<Vec<f64>>,
}

impl Pca {
    /// Number of singular values at least `gap` times the largest.
    pub fn rank(&self, gap: f64) -> usize {
        let top = self.singular.first().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return 0;
        }
        self.singular.iter().filter(|s| **s >= gap * top).count()
    }

    pub fn subspace(&self, d: usize) -> Subspace {
        Subspace { basis: self.axes.iter().take(d).cloned().collect() }
    }
}

/// PCA of `points` relative to `center` (uncentered when `center` is the origin).
pub fn pca<'a>(points: impl IntoIterator<Item = &'a [f64]>, center: &[f64]) -> Pca {
    let n = center.len();
    let mut scatter = DMatrix::<f64>::zeros(n, n);
    let mut d = vec![0.0; n];
    for p in points {
        for i in 0..n {
            d[i] = p[i] - center[i];
        }
        for i in 0..n {
            for j in i..n {
                scatter[(i, j)] += d[i] * d[j];
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            scatter[(i, j)] = scatter[(j, i)];
        }
    }
    let eig = SymmetricEigen::new(scatter);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let singular = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    let axes = order
        .iter()
        .map(|&i| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    Pca { singular, axes }
}

/// Mean of a point set.
pub fn mean<'a>(points: impl IntoIterator<Item = &'a [f64]>, n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n];
    let mut k = 0usize;
    for p in points {
        for (mi, pi) in m.iter_mut().zip(p) {
            *mi += pi;
        }
        k += 1;
    }
    if k > 0 {
        m.iter_mut().for_each(|x| *x /= k as f64);
    }
    m
}

/// Null space of the `rows × n` matrix with the given rows, together with the
/// singular values of the matrix (decreasing).
pub fn null_space(rows: &[Vec<f64>], n: usize, rel_tol: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = rows.len();
    if m == 0 {
        let basis = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                e
            })
            .collect();
        return (basis, Vec::new());
    }
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for r in rows {
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] += r[i] * r[j];
            }
        }
    }
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let sv: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0).sqrt()).collect();
    let top = sv[0];
    let basis = order
        .iter()
        .zip(&sv)
        .enumerate()
        .filter(|(k, (_, s))| *k >= m || **s <= rel_tol * top)
        .map(|(_, (&i, _))| eig.eigenvectors.column(i).iter().copied().collect())
        .collect();
    (basis, sv.into_iter().take(m).collect())
}

/// Frobenius distance between two projectors.
pub fn projector_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert!((angle_deg(&[1.0, 0.0], &[0.0, 1.0]) - 90.0).abs() < 1e-12);
        assert!((angle_deg(&[1.0, 0.0], &[-1.0, 0.0]) - 180.0).abs() < 1e-9);
        let s = Subspace::from_spanning(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let a = [0.0, (0.5f64).sqrt(), (0.5f64).sqrt()];
        assert!((s.angle_to_deg(&a) - 45.0).abs() < 1e-9);
    }

    #[test]
    fn pca_of_plane() {
        let pts: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                let a = i as f64 * 0.37;
                vec![a.cos(), a.sin() * 2.0, 0.0]
            })
            .collect();
        let p = pca(pts.iter().map(|v| v.as_slice()), &[0.0; 3]);
        assert_eq!(p.rank(0.2), 2);
        assert!(p.singular[2] < 1e-12);
    }

    #[test]
    fn null_space_of_gradient() {
        let (ns, sv) = null_space(&[vec![0.0, 0.0, 2.0]], 3, 1e-9);
        assert_eq!(ns.len(), 2);
        assert!((sv[0] - 2.0).abs() < 1e-12);
        for v in ns {
            assert!(v[2].abs() < 1e-12);
        }
    }
}
