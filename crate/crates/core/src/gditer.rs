//! The GD operator on descriptions and cones, its iteration and the
//! stabilization bookkeeping.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::conealg::{cone_dim, decompose_by_local_dimension, estimate_dim_upper, DimParams};
use crate::dircone::{direction_set_origin, gd_origin, DirParams};
use crate::error::{GdError, Result};
use crate::sampler::{derive_seed, resample_cone, sample_multiscale, PointCloud, ScaleSchedule};
use crate::setdesc::SetDescription;
use crate::sphere::{covers, hausdorff_angle, union_dirsets, ConeRep, DirectionSet, HausdorffMode};

/// Share of a cone's directions that must reach a local dimension for tangent
/// fits on its resampling to be allowed that many axes.
const TANGENT_DIM_SHARE: f64 = 0.1;

/// Parameters shared by every step of an iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GdConfig {
    pub schedule: ScaleSchedule,
    pub dir: DirParams,
    pub dim: DimParams,
    /// Gap (degrees) below which consecutive cones count as equal.
    pub theta_eq: f64,
}

impl GdConfig {
    pub fn default_for(n: usize) -> GdConfig {
        let dir = DirParams::default_for(n);
        GdConfig {
            schedule: ScaleSchedule::default_for(n),
            dir,
            dim: DimParams::default_for(n),
            theta_eq: 2.0 * dir.theta_lim,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.schedule.validate()?;
        self.dir.validate()?;
        self.dim.validate(n)?;
        if !(self.theta_eq > 0.0 && self.theta_eq < 180.0) {
            return Err(GdError::InvalidParameter(format!("theta_eq = {}", self.theta_eq)));
        }
        Ok(())
    }
}

/// Argument of [`apply_gd`].
#[derive(Debug, Clone, Copy)]
pub enum GdInput<'a> {
    Description(&'a SetDescription),
    Cone(&'a ConeRep),
}

/// Result of one application of GD.
#[derive(Debug, Clone)]
pub struct GdStep {
    pub cone: ConeRep,
    /// The input was `{0}` or an empty cone, so the output is empty.
    pub empty_input: bool,
    /// Cloud the directions were computed from (`None` for an empty input).
    pub cloud: Option<PointCloud>,
}

fn empty_step(n: usize, theta_net: f64) -> GdStep {
    GdStep { cone: ConeRep::new(DirectionSet::empty(n, theta_net)), empty_input: true, cloud: None }
}

/// One application of GD: samples a description, or resamples a cone, then
/// takes the bundle limits at the origin.
pub fn apply_gd(input: GdInput, config: &GdConfig, seed: u64) -> Result<GdStep> {
    match input {
        GdInput::Description(desc) => {
            config.validate(desc.ambient_dim)?;
            if desc.is_point_germ() {
                return Ok(empty_step(desc.ambient_dim, config.dir.theta_net));
            }
            let cloud = sample_multiscale(desc, &config.schedule, seed)?;
            let base = gd_origin(&cloud, &config.dir)?;
            Ok(GdStep { cone: ConeRep::new(base), empty_input: false, cloud: Some(cloud) })
        }
        GdInput::Cone(cone) => {
            config.validate(cone.ambient_dim())?;
            if cone.is_empty() {
                return Ok(empty_step(cone.ambient_dim(), config.dir.theta_net));
            }
            let cloud = resample_cone(cone, &config.schedule, seed)?;
            let cap = estimate_dim_upper(&cone.base, &config.dim, TANGENT_DIM_SHARE).map(|k| k + 1);
            let params = DirParams { conic: true, max_tangent_dim: cap, ..config.dir };
            let base = gd_origin(&cloud, &params)?;
            Ok(GdStep { cone: ConeRep::new(base), empty_input: false, cloud: Some(cloud) })
        }
    }
}

/// Seed used for step `m` of a chain started from `seed`.
pub fn step_seed(seed: u64, m: usize) -> u64 {
    if m <= 1 {
        seed
    } else {
        derive_seed(seed, &[m as u64])
    }
}

/// One cone of the chain. Degree 0 is the direction set `D(A)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub degree: usize,
    pub net_size: usize,
    pub cone_dim: usize,
    /// Symmetric Hausdorff angle to the previous cone (`None` at degree 0).
    pub hausdorff_gap_to_prev: Option<f64>,
    /// The previous cone lies within `theta_lim` of this one.
    pub covered_prev: bool,
    pub seed: u64,
}

/// Outcome of [`iterate_to_stabilization`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilizationReport {
    pub n: usize,
    pub max_degree: usize,
    pub chain: Vec<ChainRecord>,
    /// Least `m` with `C_m ≈ C_{m+1} ≈ C_{m+2}`; `None` if not seen within `max_degree`.
    pub stabilized_at: Option<usize>,
    pub m0: usize,
    pub theorem_bound: usize,
    pub refined_bound: usize,
    pub bound_satisfied: bool,
    pub params: GdConfig,
    pub seed: u64,
    /// Chain steps that failed to cover their predecessor.
    pub diagnostics: Vec<String>,
    #[serde(skip)]
    pub cones: Vec<ConeRep>,
    /// Wall time per chain entry in milliseconds.
    #[serde(skip)]
    pub step_ms: Vec<u128>,
}

impl StabilizationReport {
    /// Bound `n − (m0 − 1)` when `m0 ≥ 2`, else `n − 1`.
    pub fn bound_for(n: usize, m0: usize) -> usize {
        if m0 >= 2 {
            n + 1 - m0
        } else {
            n.saturating_sub(1)
        }
    }
}

fn gap(a: &DirectionSet, b: &DirectionSet) -> f64 {
    hausdorff_angle(a, b, HausdorffMode::Symmetric)
}

fn record(degree: usize, cone: &ConeRep, prev: Option<&ConeRep>, config: &GdConfig, seed: u64) -> ChainRecord {
    ChainRecord {
        degree,
        net_size: cone.base.len(),
        cone_dim: cone_dim(&cone.base, &config.dim),
        hausdorff_gap_to_prev: prev.map(|p| gap(&p.base, &cone.base)),
        covered_prev: prev.is_none_or(|p| covers(&cone.base, &p.base, config.dir.theta_lim)),
        seed,
    }
}

fn first_stable(chain: &[ChainRecord], theta_eq: f64) -> Option<usize> {
    let small = |r: &ChainRecord| r.hausdorff_gap_to_prev.is_some_and(|g| g <= theta_eq);
    (1..chain.len().saturating_sub(2)).find(|&m| small(&chain[m + 1]) && small(&chain[m + 2]))
}

/// Builds `C_1 = GD(A)`, `C_{m+1} = GD(C_m)` until two consecutive gaps fall
/// below `theta_eq` or `max_degree` is reached.
pub fn iterate_to_stabilization(
    desc: &SetDescription,
    max_degree: usize,
    config: &GdConfig,
    seed: u64,
) -> Result<StabilizationReport> {
    let n = desc.ambient_dim;
    config.validate(n)?;
    if max_degree == 0 {
        return Err(GdError::InvalidParameter("max_degree must be at least 1".into()));
    }
    let start = Instant::now();
    let first = apply_gd(GdInput::Description(desc), config, seed)?;
    let (base, m0) = match &first.cloud {
        Some(cloud) => (
            direction_set_origin(cloud, &config.dir)?,
            decompose_by_local_dimension(cloud, &config.dim)?.m0,
        ),
        None => (DirectionSet::empty(n, config.dir.theta_net), 0),
    };
    let d0 = ConeRep::new(base);
    let mut chain = vec![record(0, &d0, None, config, seed)];
    chain.push(record(1, &first.cone, Some(&d0), config, seed));
    let mut cones = vec![d0, first.cone];
    let mut step_ms = vec![0, start.elapsed().as_millis()];
    let mut stabilized_at = None;
    for m in 2..=max_degree {
        let t = Instant::now();
        let s = step_seed(seed, m);
        let next = apply_gd(GdInput::Cone(&cones[m - 1]), config, s)?;
        chain.push(record(m, &next.cone, Some(&cones[m - 1]), config, s));
        cones.push(next.cone);
        step_ms.push(t.elapsed().as_millis());
        stabilized_at = first_stable(&chain, config.theta_eq);
        if stabilized_at.is_some() {
            break;
        }
    }
    let diagnostics = chain
        .iter()
        .filter(|r| !r.covered_prev)
        .map(|r| format!("C{} does not cover C{} within {} degrees", r.degree, r.degree - 1, config.dir.theta_lim))
        .collect();
    let theorem_bound = n.saturating_sub(1).max(1);
    let refined_bound = StabilizationReport::bound_for(n, m0).max(1);
    let bound_satisfied = stabilized_at.is_some_and(|m| m <= theorem_bound.min(refined_bound));
    Ok(StabilizationReport {
        n,
        max_degree,
        chain,
        stabilized_at,
        m0,
        theorem_bound,
        refined_bound,
        bound_satisfied,
        params: *config,
        seed,
        diagnostics,
        cones,
        step_ms,
    })
}

/// Every cone of the chain covers its predecessor within `theta_lim`.
pub fn check_monotone_chain(report: &StabilizationReport) -> bool {
    let theta = report.params.dir.theta_lim;
    report.cones.windows(2).all(|w| covers(&w[1].base, &w[0].base, theta))
}

/// `GD^q` of a description, without stabilization checks.
pub fn gd_power(desc: &SetDescription, q: usize, config: &GdConfig, seed: u64) -> Result<ConeRep> {
    if q == 0 {
        return Err(GdError::InvalidParameter("q must be at least 1".into()));
    }
    let mut cone = apply_gd(GdInput::Description(desc), config, seed)?.cone;
    for m in 2..=q {
        cone = apply_gd(GdInput::Cone(&cone), config, step_seed(seed, m))?.cone;
    }
    Ok(cone)
}

/// Outcome of [`union_additivity_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnionReport {
    pub q: usize,
    pub gap: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Budget for a union of two members: union members share the sampling quota,
/// so doubling quota, basepoints and candidates gives each member the
/// resolution it has on its own.
fn doubled_budget(config: &GdConfig) -> GdConfig {
    let mut c = *config;
    c.schedule.per_band *= 2;
    c.dir.max_basepoints *= 2;
    c.dir.candidates_per_band *= 2;
    c
}

/// Compares `GD^q(A ∪ B)` with `GD^q(A) ∪ GD^q(B)`, the union at the same
/// per-member budget as its parts.
pub fn union_additivity_check(
    a: &SetDescription,
    b: &SetDescription,
    q: usize,
    config: &GdConfig,
    seed: u64,
) -> Result<UnionReport> {
    if a.ambient_dim != b.ambient_dim {
        return Err(GdError::DimensionMismatch(format!("R^{} vs R^{}", a.ambient_dim, b.ambient_dim)));
    }
    let joint = SetDescription::union(vec![a.clone(), b.clone()])?;
    let lhs = gd_power(&joint, q, &doubled_budget(config), seed)?;
    let ga = gd_power(a, q, config, derive_seed(seed, &[1]))?;
    let gb = gd_power(b, q, config, derive_seed(seed, &[2]))?;
    let rhs = union_dirsets(&ga.base, &gb.base)?;
    let gap = gap(&lhs.base, &rhs);
    let tolerance = 2.0 * config.dir.theta_lim * q as f64;
    Ok(UnionReport { q, gap, tolerance, pass: gap <= tolerance })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setdesc::{catalog_example, parse_set_description};

    #[test]
    fn point_germ_gives_empty_cone() {
        let d = SetDescription::point(3);
        let step = apply_gd(GdInput::Description(&d), &GdConfig::default_for(3), 7).unwrap();
        assert!(step.empty_input && step.cone.is_empty());
        let r = iterate_to_stabilization(&d, 3, &GdConfig::default_for(3), 7).unwrap();
        assert_eq!(r.stabilized_at, Some(1));
        assert_eq!(r.m0, 0);
    }

    #[test]
    fn full_sphere_is_a_fixed_point() {
        let config = GdConfig::default_for(3);
        let full = ConeRep::new(DirectionSet::full_sphere(3, config.dir.theta_net, 1));
        let next = apply_gd(GdInput::Cone(&full), &config, 7).unwrap().cone;
        assert!(gap(&full.base, &next.base) <= config.theta_eq);
    }

    #[test]
    fn double_cone_stabilizes_at_two() {
        let d = catalog_example("double_cone", None).unwrap();
        let r = iterate_to_stabilization(&d, 4, &GdConfig::default_for(3), 7).unwrap();
        assert_eq!(r.stabilized_at, Some(2));
        assert_eq!(r.chain[1].cone_dim, 3);
        assert!(r.bound_satisfied);
        assert!(check_monotone_chain(&r));
    }

    #[test]
    fn truncated_chain_is_not_monotone() {
        let d = parse_set_description("subspace(3; (1, 0, 0), (0, 1, 0))").unwrap();
        let mut r = iterate_to_stabilization(&d, 3, &GdConfig::default_for(3), 7).unwrap();
        assert!(check_monotone_chain(&r));
        let c = &r.cones[2].base;
        let keep: Vec<bool> = c.dirs().iter().map(|a| a[1] >= 0.0).collect();
        r.cones[2] = ConeRep::new(c.select(&keep));
        assert!(!check_monotone_chain(&r));
    }

    #[test]
    fn two_planes_are_additive() {
        let a = parse_set_description("subspace(3; (0, 1, 0), (0, 0, 1))").unwrap();
        let b = parse_set_description("subspace(3; (1, 0, 0), (0, 0, 1))").unwrap();
        let r = union_additivity_check(&a, &b, 1, &GdConfig::default_for(3), 7).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
