//! Per-node point generators used by the multiscale sampler.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GdError, Result};
use crate::expr::{Expr, Poly};
use crate::linalg::{dot, norm, null_space, Subspace};
use crate::spatial::KdTree;
use crate::setdesc::{Relation, SetDescription, SetNode};

use super::derive_seed;

/// Relative singular-value threshold below which a point is treated as singular.
const SINGULAR_REL: f64 = 1e-4;
const PROJECT_TOL: f64 = 1e-13;
const PROJECT_ITERS: usize = 50;
const SINGULAR_AFTER: usize = 8;
const SINGULAR_ITERS: usize = 30;
pub(crate) const RETRY_FACTOR: usize = 50;
/// Neighboring samples whose tangent spaces differ by more than this many
/// degrees get extra samples between them.
const REFINE_ANGLE: f64 = 20.0;
const REFINE_NEIGHBORS: usize = 6;
const REFINE_ROUNDS: usize = 4;
/// Share of the band quota set aside for refinement samples.
const REFINE_SHARE: f64 = 1.0 / 3.0;

pub(crate) type Sample = (Vec<f64>, Option<Subspace>);

pub(crate) fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let r = norm(&v);
        if r > 1e-12 {
            return v.iter().map(|x| x / r).collect();
        }
    }
}

/// Uniform radius in the half-open shell `(lo, hi]`.
pub(crate) fn shell_radius(lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> f64 {
    hi - rng.random::<f64>() * (hi - lo)
}

/// Compiled implicit system.
pub struct ImplicitSystem {
    n: usize,
    equations: Vec<Poly>,
    low_degrees: Vec<u32>,
    coef_scale: Vec<f64>,
    constraints: Vec<(Poly, Relation)>,
}

impl ImplicitSystem {
    pub fn new(n: usize, equations: &[Expr], constraints: &[(Expr, Relation)]) -> Result<ImplicitSystem> {
        let equations: Vec<Poly> = equations.iter().map(|e| e.to_poly(n)).collect::<Result<_>>()?;
        let equations: Vec<Poly> = equations.into_iter().filter(|p| !p.is_zero()).collect();
        let low_degrees = equations.iter().map(|p| p.low_degree()).collect();
        let coef_scale = equations
            .iter()
            .map(|p| p.terms().map(|(_, c)| c.abs()).fold(0.0, f64::max))
            .collect();
        let constraints = constraints
            .iter()
            .map(|(e, r)| Ok((e.to_poly(n)?, *r)))
            .collect::<Result<_>>()?;
        Ok(ImplicitSystem { n, equations, low_degrees, coef_scale, constraints })
    }

    fn from_node(n: usize, node: &SetNode) -> Result<ImplicitSystem> {
        match node {
            SetNode::Implicit { equations, constraints } => {
                let cs: Vec<(Expr, Relation)> = constraints.iter().map(|c| (c.expr.clone(), c.rel)).collect();
                ImplicitSystem::new(n, equations, &cs)
            }
            _ => Err(GdError::Unsupported("not an implicit node".into())),
        }
    }

    fn tolerance(&self, i: usize, r: f64) -> f64 {
        PROJECT_TOL * self.coef_scale[i] * r.powi(self.low_degrees[i] as i32)
    }

    fn residuals_and_jacobian(&self, q: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut f = Vec::with_capacity(self.equations.len());
        let mut jac = Vec::with_capacity(self.equations.len());
        for p in &self.equations {
            let mut g = vec![0.0; self.n];
            f.push(p.eval_grad(q, &mut g));
            jac.push(g);
        }
        (f, jac)
    }

    /// Gauss-Newton projection of `start` onto the zero set using minimum-norm steps.
    pub fn project(&self, start: &[f64], tol: Option<f64>, max_iter: usize) -> Result<Vec<f64>> {
        let mut q = start.to_vec();
        let m = self.equations.len();
        if m == 0 {
            return Ok(q);
        }
        for iter in 0..=max_iter {
            let r = norm(&q);
            let (f, jac) = self.residuals_and_jacobian(&q);
            let done = f.iter().enumerate().all(|(i, v)| v.abs() <= tol.unwrap_or_else(|| self.tolerance(i, r)));
            if done {
                return Ok(q);
            }
            // Near a piece of the zero set of higher codimension (a sum of squares
            // locally) Gauss-Newton on f alone zigzags; solving f = ∇f = 0 in the
            // least-squares sense converges there instead.
            if m == 1 && iter == SINGULAR_AFTER && tol.is_none() {
                if let Some(p) = self.singular_descent(&q, None) {
                    return Ok(p);
                }
            }
            let j = DMatrix::from_fn(m, self.n, |a, b| jac[a][b]);
            let jjt = &j * j.transpose();
            let Some(chol) = jjt.cholesky() else {
                return Err(GdError::SingularJacobian);
            };
            let y = chol.solve(&DVector::from_vec(f));
            let step = j.transpose() * y;
            let step_norm = step.norm();
            if !step_norm.is_finite() {
                return Err(GdError::SingularJacobian);
            }
            for (qi, si) in q.iter_mut().zip(step.iter()) {
                *qi -= si;
            }
            if step_norm <= 1e-17 * r.max(1e-300) {
                break;
            }
        }
        let r = norm(&q);
        let (f, _) = self.residuals_and_jacobian(&q);
        if f.iter().enumerate().all(|(i, v)| v.abs() <= tol.unwrap_or_else(|| self.tolerance(i, r))) {
            Ok(q)
        } else {
            Err(GdError::NoConvergence(max_iter))
        }
    }

    /// Newton iteration on `f = ∇f = 0`, used when Gauss-Newton on `f` alone
    /// zigzags towards a piece of the zero set of higher codimension (a sum of
    /// squares locally). Returns a converged point or `None`.
    fn singular_descent(&self, start: &[f64], rho: Option<f64>) -> Option<Vec<f64>> {
        let mut q = start.to_vec();
        for _ in 0..SINGULAR_ITERS {
            let (f, jac) = self.residuals_and_jacobian(&q);
            let r = rho.unwrap_or_else(|| norm(&q));
            let on_sphere = rho.is_none_or(|rho| (dot(&q, &q) - rho * rho).abs() <= 1e-13 * rho * rho);
            if f[0].abs() <= self.tolerance(0, r) && on_sphere {
                return Some(q);
            }
            q = self.singular_step(&q, f[0], &jac[0], rho)?;
        }
        None
    }

    /// Least-squares step towards `f = ∇f = 0` (and `|q|² = ρ²` when `rho` is given).
    fn singular_step(&self, q: &[f64], f: f64, grad: &[f64], rho: Option<f64>) -> Option<Vec<f64>> {
        let n = self.n;
        let hess = self.equations[0].eval_hessian(q);
        let rows = n + 1 + usize::from(rho.is_some());
        let j = DMatrix::from_fn(rows, n, |a, b| match a {
            0 => grad[b],
            a if a <= n => hess[(a - 1) * n + b],
            _ => 2.0 * q[b],
        });
        let mut resid = Vec::with_capacity(rows);
        resid.push(f);
        resid.extend_from_slice(grad);
        if let Some(rho) = rho {
            resid.push(dot(q, q) - rho * rho);
        }
        let svd = j.svd(true, true);
        let top = svd.singular_values.max();
        if !(top > 0.0) {
            return None;
        }
        let step = svd.solve(&DVector::from_vec(resid), 1e-12 * top).ok()?;
        let out: Vec<f64> = q.iter().zip(step.iter()).map(|(a, b)| a - b).collect();
        out.iter().all(|x| x.is_finite()).then_some(out)
    }

    /// Gauss-Newton projection onto the zero set intersected with the sphere of radius `rho`.
    pub fn project_on_sphere(&self, start: &[f64], rho: f64, max_iter: usize) -> Result<Vec<f64>> {
        let mut q = start.to_vec();
        let m = self.equations.len();
        let n = self.n;
        for iter in 0..=max_iter {
            let (f, jac) = self.residuals_and_jacobian(&q);
            let h = dot(&q, &q) - rho * rho;
            let done = f.iter().enumerate().all(|(i, v)| v.abs() <= self.tolerance(i, rho))
                && h.abs() <= 1e-13 * rho * rho;
            if done {
                return Ok(q);
            }
            if iter == max_iter {
                break;
            }
            if m == 1 && iter == SINGULAR_AFTER {
                if let Some(p) = self.singular_descent(&q, Some(rho)) {
                    return Ok(p);
                }
            }
            let j = DMatrix::from_fn(m + 1, n, |a, b| if a < m { jac[a][b] } else { 2.0 * q[b] });
            let jjt = &j * j.transpose();
            let Some(chol) = jjt.cholesky() else {
                return Err(GdError::SingularJacobian);
            };
            let mut resid = f;
            resid.push(h);
            let step = j.transpose() * chol.solve(&DVector::from_vec(resid));
            if !step.norm().is_finite() {
                return Err(GdError::SingularJacobian);
            }
            for (qi, si) in q.iter_mut().zip(step.iter()) {
                *qi -= si;
            }
        }
        Err(GdError::NoConvergence(max_iter))
    }

    /// Adds samples where the tangent space turns quickly: between neighbors
    /// whose tangents differ by more than `REFINE_ANGLE`, the jittered midpoint is
    /// projected back onto the set. Thin parts of the set that carry rare
    /// tangent planes are filled this way.
    fn refine(&self, out: &mut Vec<Sample>, lo: f64, hi: f64, budget: usize, rng: &mut ChaCha8Rng) {
        let mut added = 0;
        for _ in 0..REFINE_ROUNDS {
            if added >= budget || out.len() < 2 {
                return;
            }
            let tree = KdTree::new(&out.iter().map(|s| s.0.as_slice()).collect::<Vec<_>>(), self.n);
            let mut pairs = Vec::new();
            for (i, (p, t)) in out.iter().enumerate() {
                let Some(t) = t else { continue };
                for (j, _) in tree.k_nearest(p, REFINE_NEIGHBORS + 1) {
                    if j > i && out[j].1.as_ref().is_some_and(|u| t.max_principal_angle_deg(u) > REFINE_ANGLE) {
                        pairs.push((i, j));
                    }
                }
            }
            if pairs.is_empty() {
                return;
            }
            let mut fresh = Vec::new();
            for (i, j) in pairs {
                if added + fresh.len() >= budget {
                    break;
                }
                let (a, b) = (&out[i].0, &out[j].0);
                let w = 0.25 + 0.5 * rng.random::<f64>();
                let jitter = 0.1 * norm(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>());
                let scale = jitter / (self.n as f64).sqrt();
                let mid: Vec<f64> = a
                    .iter()
                    .zip(b)
                    .map(|(x, y)| {
                        let e: f64 = StandardNormal.sample(&mut *rng);
                        (1.0 - w) * x + w * y + scale * e
                    })
                    .collect();
                let r = norm(&mid).clamp(lo.max(f64::MIN_POSITIVE), hi);
                let Ok(q) = self.project_on_sphere(&mid, r, PROJECT_ITERS) else { continue };
                let rq = norm(&q);
                if rq > lo && rq <= hi && self.constraints_hold(&q) {
                    let t = self.tangent(&q).0;
                    fresh.push((q, Some(t)));
                }
            }
            if fresh.is_empty() {
                return;
            }
            added += fresh.len();
            out.extend(fresh);
        }
    }

    fn constraints_hold(&self, q: &[f64]) -> bool {
        self.constraints.iter().all(|(p, rel)| {
            let slack = 1e-12 * p.magnitude(q);
            rel.holds(p.eval(q), slack)
        })
    }

    /// Tangent space (null space of the Jacobian) and the smallest relevant singular value.
    fn tangent(&self, q: &[f64]) -> (Subspace, f64) {
        let (_, jac) = self.residuals_and_jacobian(q);
        let (basis, sv) = null_space(&jac, self.n, 1e-9);
        let strength = sv.last().copied().unwrap_or(f64::INFINITY);
        (Subspace { basis }, strength)
    }
}

/// Parametric curve with a precomputed parameter grid for shell targeting.
pub struct CurveMap {
    coords: Vec<Expr>,
    grid: Vec<(f64, f64)>,
}

impl CurveMap {
    fn new(coords: &[Expr], domain: (f64, f64)) -> Result<CurveMap> {
        const UNIFORM: usize = 4096;
        let (lo, hi) = domain;
        let h = (hi - lo) / UNIFORM as f64;
        let eval_norm = |t: f64| -> f64 {
            coords.iter().map(|c| c.eval(&[], t).unwrap_or(f64::NAN)).map(|x| x * x).sum::<f64>().sqrt()
        };
        let mut ts: Vec<f64> = (1..UNIFORM).map(|i| lo + i as f64 * h).collect();
        let norms: Vec<f64> = ts.iter().map(|&t| eval_norm(t)).collect();
        let mut extra = Vec::new();
        for i in 0..norms.len() {
            let left = if i > 0 { norms[i - 1] } else { f64::INFINITY };
            let right = if i + 1 < norms.len() { norms[i + 1] } else { f64::INFINITY };
            if norms[i] <= left && norms[i] <= right && norms[i] < 0.25 {
                let center = refine_min(&eval_norm, ts[i] - h, ts[i] + h);
                extra.push(center);
                let mut d = h;
                while d > 1e-15 {
                    for t in [center - d, center + d] {
                        if t > lo && t < hi {
                            extra.push(t);
                        }
                    }
                    d *= 0.5;
                }
            }
        }
        ts.extend(extra);
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let grid = ts.into_iter().map(|t| (t, eval_norm(t))).filter(|(_, r)| r.is_finite()).collect();
        Ok(CurveMap { coords: coords.to_vec(), grid })
    }

    fn point(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut p = Vec::with_capacity(self.coords.len());
        let mut d = Vec::with_capacity(self.coords.len());
        for c in &self.coords {
            let (v, dv) = c.eval_dt(t)?;
            p.push(v);
            d.push(dv);
        }
        Ok((p, d))
    }

    fn draw(&self, iv: &[(f64, f64)], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Option<Sample> {
        if iv.is_empty() {
            return None;
        }
        let total: f64 = iv.iter().map(|(a, b)| b - a).sum();
        let mut u = rng.random::<f64>() * total;
        let mut chosen = iv[iv.len() - 1];
        for &(a, b) in iv {
            if u <= b - a {
                chosen = (a, b);
                break;
            }
            u -= b - a;
        }
        let t = chosen.0 + rng.random::<f64>() * (chosen.1 - chosen.0);
        let (p, d) = self.point(t).ok()?;
        let rp = norm(&p);
        if !(rp > lo && rp <= hi) {
            return None;
        }
        let tangent = (norm(&d) > 0.0).then(|| Subspace::from_spanning(&[d]));
        Some((p, tangent))
    }

    /// Parameter intervals whose image norms meet `(lo, hi]`, with their lengths.
    fn intervals(&self, lo: f64, hi: f64) -> Vec<(f64, f64)> {
        self.grid
            .windows(2)
            .filter(|w| {
                let (a, b) = (w[0].1.min(w[1].1), w[0].1.max(w[1].1));
                b > lo && a <= hi
            })
            .map(|w| (w[0].0, w[1].0))
            .collect()
    }
}

fn refine_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - invphi * (b - a);
    let mut d = a + invphi * (b - a);
    for _ in 0..100 {
        if f(c) < f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - invphi * (b - a);
        d = a + invphi * (b - a);
    }
    0.5 * (a + b)
}

/// Sampler compiled from a set description.
pub enum NodeSampler {
    Implicit(ImplicitSystem),
    Curve(CurveMap),
    SphereCone { coords: Vec<Expr>, domain: (f64, f64) },
    Subspace(Subspace),
    Product(Box<NodeSampler>, Box<NodeSampler>, usize, usize),
    Union(Vec<NodeSampler>),
    Point,
}

impl NodeSampler {
    pub fn compile(desc: &SetDescription) -> Result<NodeSampler> {
        let n = desc.ambient_dim;
        Ok(match &desc.node {
            SetNode::Implicit { .. } => NodeSampler::Implicit(ImplicitSystem::from_node(n, &desc.node)?),
            SetNode::ParamCurve { coords, domain } => NodeSampler::Curve(CurveMap::new(coords, *domain)?),
            SetNode::SphereConeOverCurve { coords, domain } => {
                NodeSampler::SphereCone { coords: coords.clone(), domain: *domain }
            }
            SetNode::LinearSubspace { basis } => NodeSampler::Subspace(Subspace::from_spanning(basis)),
            SetNode::Product(a, b) => NodeSampler::Product(
                Box::new(NodeSampler::compile(a)?),
                Box::new(NodeSampler::compile(b)?),
                a.ambient_dim,
                b.ambient_dim,
            ),
            SetNode::Union(ms) => NodeSampler::Union(ms.iter().map(NodeSampler::compile).collect::<Result<_>>()?),
            SetNode::Point0 => NodeSampler::Point,
            SetNode::Catalog { expanded, .. } => NodeSampler::compile(expanded)?,
        })
    }

    /// Up to `quota` points with norms in `(lo, hi]`, using at most
    /// `RETRY_FACTOR · quota` attempts. Union members share the quota equally.
    pub fn sample_band(&self, n: usize, lo: f64, hi: f64, quota: usize, seed: u64) -> Vec<Sample> {
        if let NodeSampler::Union(ms) = self {
            let k = ms.len();
            return ms
                .iter()
                .enumerate()
                .flat_map(|(i, m)| {
                    let share = quota / k + usize::from(i < quota % k);
                    m.sample_band(n, lo, hi, share, derive_seed(seed, &[i as u64]))
                })
                .collect();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let intervals = match self {
            NodeSampler::Curve(map) => map.intervals(lo, hi),
            _ => Vec::new(),
        };
        let mut out = Vec::with_capacity(quota);
        let mut attempts = 0;
        let mut fill = |out: &mut Vec<Sample>, target: usize, rng: &mut ChaCha8Rng| {
            while out.len() < target && attempts < RETRY_FACTOR * quota {
                attempts += 1;
                let s = match self {
                    NodeSampler::Curve(map) => map.draw(&intervals, lo, hi, rng),
                    _ => self.try_one(n, lo, hi, rng),
                };
                if let Some(s) = s {
                    out.push(s);
                }
            }
        };
        let NodeSampler::Implicit(sys) = self else {
            fill(&mut out, quota, &mut rng);
            return out;
        };
        let reserve = (REFINE_SHARE * quota as f64) as usize;
        fill(&mut out, quota - reserve, &mut rng);
        sys.refine(&mut out, lo, hi, reserve, &mut rng);
        fill(&mut out, quota, &mut rng);
        let strengths: Vec<f64> = out.iter().map(|(p, _)| sys.tangent(p).1).collect();
        let mut sorted: Vec<f64> = strengths.iter().copied().filter(|s| s.is_finite()).collect();
        sorted.sort_by(f64::total_cmp);
        if let Some(&reference) = sorted.get(sorted.len() * 9 / 10) {
            for ((_, t), s) in out.iter_mut().zip(&strengths) {
                if *s < SINGULAR_REL * reference {
                    *t = None;
                }
            }
        }
        out
    }

    /// One attempt at a point with norm in `(lo, hi]`; `lo = hi = 0` asks for the origin.
    pub fn try_one(&self, n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Option<Sample> {
        if hi == 0.0 {
            return match self {
                NodeSampler::Implicit(sys) => {
                    let z = vec![0.0; n];
                    let ok = sys.equations.iter().all(|p| p.eval(&z) == 0.0) && sys.constraints_hold(&z);
                    ok.then(|| (z, None))
                }
                NodeSampler::Curve(_) => None,
                NodeSampler::Union(ms) => ms.iter().find_map(|m| m.try_one(n, 0.0, 0.0, rng)),
                NodeSampler::Product(..) => None,
                _ => Some((vec![0.0; n], None)),
            };
        }
        match self {
            NodeSampler::Implicit(sys) => {
                let r = shell_radius(lo, hi, rng);
                let start: Vec<f64> = random_unit(n, rng).iter().map(|x| x * r).collect();
                let q = sys.project_on_sphere(&start, r, PROJECT_ITERS).ok()?;
                let rq = norm(&q);
                if !(rq > lo && rq <= hi) || !sys.constraints_hold(&q) {
                    return None;
                }
                let t = sys.tangent(&q).0;
                Some((q, Some(t)))
            }
            NodeSampler::Curve(map) => map.draw(&map.intervals(lo, hi), lo, hi, rng),
            NodeSampler::SphereCone { coords, domain } => {
                let t = domain.0 + rng.random::<f64>() * (domain.1 - domain.0);
                if t <= domain.0 {
                    return None;
                }
                let s = shell_radius(lo, hi, rng);
                let mut g = Vec::with_capacity(n);
                let mut d = Vec::with_capacity(n);
                for c in coords {
                    let (v, dv) = c.eval_dt(t).ok()?;
                    g.push(v);
                    d.push(dv);
                }
                let p: Vec<f64> = g.iter().map(|x| x * s).collect();
                let rp = norm(&p);
                if !(rp > lo && rp <= hi) {
                    return None;
                }
                let sub = Subspace::from_spanning(&[g, d]);
                let tangent = (sub.dim() == 2).then_some(sub);
                Some((p, tangent))
            }
            NodeSampler::Subspace(sub) => {
                let c: Vec<f64> = random_unit(sub.dim(), rng);
                let r = shell_radius(lo, hi, rng);
                let mut p = vec![0.0; n];
                for (ci, b) in c.iter().zip(&sub.basis) {
                    for (pi, bi) in p.iter_mut().zip(b) {
                        *pi += r * ci * bi;
                    }
                }
                let rp = norm(&p);
                if !(rp > lo && rp <= hi) {
                    return None;
                }
                Some((p, Some(sub.clone())))
            }
            NodeSampler::Product(a, b, na, nb) => {
                let phi = rng.random::<f64>() * std::f64::consts::FRAC_PI_2;
                let (c, s) = (phi.cos(), phi.sin());
                let pa = factor_draw(a, *na, lo * c, hi * c, rng)?;
                let pb = factor_draw(b, *nb, lo * s, hi * s, rng)?;
                let mut p = pa.0.clone();
                p.extend_from_slice(&pb.0);
                let rp = norm(&p);
                if !(rp > lo && rp <= hi) {
                    return None;
                }
                let tangent = match (&pa.1, &pb.1, pa.0.iter().all(|x| *x == 0.0), pb.0.iter().all(|x| *x == 0.0)) {
                    (Some(ta), Some(tb), false, false) => Some(direct_sum(ta, tb, *na, *nb)),
                    _ => None,
                };
                Some((p, tangent))
            }
            NodeSampler::Union(ms) => {
                let i = rng.random_range(0..ms.len());
                ms[i].try_one(n, lo, hi, rng)
            }
            NodeSampler::Point => None,
        }
    }

}

fn factor_draw(s: &NodeSampler, n: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Option<Sample> {
    if hi <= 0.0 {
        return s.try_one(n, 0.0, 0.0, rng);
    }
    for _ in 0..8 {
        if let Some(p) = s.try_one(n, lo, hi, rng) {
            return Some(p);
        }
    }
    None
}

fn direct_sum(a: &Subspace, b: &Subspace, na: usize, nb: usize) -> Subspace {
    let mut basis = Vec::with_capacity(a.dim() + b.dim());
    for v in &a.basis {
        let mut w = v.clone();
        w.extend(std::iter::repeat_n(0.0, nb));
        basis.push(w);
    }
    for v in &b.basis {
        let mut w = vec![0.0; na];
        w.extend_from_slice(v);
        basis.push(w);
    }
    Subspace { basis }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setdesc::parse_set_description;

    fn system(text: &str) -> ImplicitSystem {
        let d = parse_set_description(text).unwrap();
        ImplicitSystem::from_node(d.ambient_dim, &d.node).unwrap()
    }

    #[test]
    fn projects_onto_cone() {
        let s = system("implicit(3; x1^2 + x2^2 - x3^2 = 0)");
        let q = s.project(&[1.0, 0.0, 0.9], Some(1e-12), 50).unwrap();
        assert!((q[0] * q[0] + q[1] * q[1] - q[2] * q[2]).abs() <= 1e-12);
    }

    #[test]
    fn fixed_point_on_surface() {
        let s = system("implicit(3; x1^2 + x2^2 - x3^4 = 0)");
        let z: f64 = 0.3;
        let start = [z * z, 0.0, z];
        let q = s.project(&start, Some(1e-12), 50).unwrap();
        assert_eq!(q, start.to_vec());
    }

    #[test]
    fn orthogonal_projection_onto_hyperplane() {
        let s = system("implicit(3; x1 = 0)");
        let q = s.project(&[0.3, 0.2, -0.1], Some(1e-12), 50).unwrap();
        assert_eq!(q, vec![0.0, 0.2, -0.1]);
    }
}
