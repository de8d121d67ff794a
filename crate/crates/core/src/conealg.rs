//! Structure of clouds and cones: local dimension, decomposition by local
//! dimension, cone dimension, finite plane unions and the `B0`/`B+` split.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GdError, Result};
use crate::linalg::{chord_of_deg, dot, mean, norm, pca, projector_gap, Subspace};
use crate::dircone::TangentSource;
use crate::sampler::{derive_seed, PointCloud};
use crate::spatial::KdTree;
use crate::sphere::DirectionSet;

/// Fraction of points below which a dimension class is folded into a neighbor.
pub const NOISE_FRACTION: f64 = 0.01;
/// Residual fraction allowed for a direction set to count as a finite plane union.
pub const OUTLIER_BUDGET: f64 = 0.005;
/// RANSAC trials per plane.
pub const RANSAC_TRIALS: usize = 1000;
/// Directions scored per RANSAC trial.
const RANSAC_SCORE_SAMPLE: usize = 2000;
/// Directions used for the median in [`estimate_dim`].
pub const DIM_PROBES: usize = 200;
/// Neighborhood radius for point-cloud local dimension, relative to `‖p‖`.
const LOCAL_RADIUS: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimParams {
    pub k_neighbors: usize,
    pub pca_gap: f64,
    pub scale_votes: usize,
    /// Number of finest bands a dimension class must reach to enter `Λ0`.
    pub limit_bands: usize,
    /// Whether tangent data carried by the cloud decides the dimension at regular points.
    pub tangent_source: TangentSource,
}

impl DimParams {
    pub fn default_for(n: usize) -> DimParams {
        DimParams { k_neighbors: 40.max(2 * n), pca_gap: 0.2, scale_votes: 3, limit_bands: 3, tangent_source: TangentSource::Auto }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k_neighbors < 2 * n {
            return Err(GdError::InvalidParameter(format!("k_neighbors = {} < 2n = {}", self.k_neighbors, 2 * n)));
        }
        if !(self.pca_gap > 0.0 && self.pca_gap < 1.0) {
            return Err(GdError::InvalidParameter(format!("pca_gap = {}", self.pca_gap)));
        }
        if self.scale_votes == 0 || self.limit_bands == 0 {
            return Err(GdError::InvalidParameter("scale_votes and limit_bands must be positive".into()));
        }
        Ok(())
    }
}

fn lower_median(mut v: Vec<usize>) -> Option<usize> {
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    Some(v[(v.len() - 1) / 2])
}

fn centered_rank(points: &[&[f64]], n: usize, gap: f64) -> usize {
    let c = mean(points.iter().copied(), n);
    pca(points.iter().copied(), &c).rank(gap)
}

/// Local dimension at `p` using a prebuilt tree of the cloud points: the
/// median PCA rank over the nested neighborhoods of the `k`, `2k`, `4k`, ...
/// nearest points within `0.3·‖p‖`. `None` marks points with too few neighbors.
pub fn local_dimension_in(tree: &KdTree, p: &[f64], params: &DimParams) -> Option<usize> {
    let n = p.len();
    let r = norm(p);
    if r == 0.0 {
        return None;
    }
    let mut near: Vec<(f64, &[f64])> = tree
        .within(p, LOCAL_RADIUS * r)
        .into_iter()
        .map(|i| {
            let q = tree.point(i);
            (q.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), q)
        })
        .filter(|(d2, _)| *d2 > 0.0)
        .collect();
    if near.len() < params.k_neighbors {
        return None;
    }
    near.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut votes = Vec::new();
    for v in 0..params.scale_votes {
        let count = params.k_neighbors << v;
        if count > near.len() {
            break;
        }
        let pts: Vec<&[f64]> = near[..count].iter().map(|(_, q)| *q).collect();
        votes.push(centered_rank(&pts, n, params.pca_gap));
    }
    lower_median(votes)
}

fn point_dimension(cloud: &PointCloud, tree: &KdTree, flat: &[(usize, usize)], band: usize, i: usize, params: &DimParams) -> Option<usize> {
    if params.tangent_source == TangentSource::Estimated || !cloud.has_tangents() {
        return local_dimension_in(tree, &cloud.bands[band].points[i], params);
    }
    if let Some(t) = cloud.bands[band].tangent(i) {
        return Some(t.dim());
    }
    if params.tangent_source == TangentSource::Analytic {
        return None;
    }
    // Singular sample: the largest tangent dimension among nearby regular samples,
    // or the PCA estimate where regular samples are scarce.
    let p = &cloud.bands[band].points[i];
    let near: Vec<usize> = tree
        .k_nearest(p, params.k_neighbors + 1)
        .into_iter()
        .filter(|(_, d2)| *d2 > 0.0 && d2.sqrt() <= LOCAL_RADIUS * norm(p))
        .map(|(k, _)| k)
        .collect();
    let dims: Vec<usize> = near.iter().filter_map(|&k| cloud.bands[flat[k].0].tangent(flat[k].1).map(|t| t.dim())).collect();
    if 2 * dims.len() >= params.k_neighbors {
        dims.into_iter().max()
    } else {
        local_dimension_in(tree, p, params)
    }
}

/// Local dimension of the cloud at its point `p`: the tangent dimension when
/// the cloud carries tangent data there, otherwise the PCA estimate.
pub fn local_dimension_at(cloud: &PointCloud, p: &[f64], params: &DimParams) -> Result<Option<usize>> {
    params.validate(cloud.ambient_dim)?;
    if p.len() != cloud.ambient_dim {
        return Err(GdError::DimensionMismatch(format!("point of length {}", p.len())));
    }
    let pts = cloud.flat_points();
    let tree = KdTree::new(&pts, cloud.ambient_dim);
    let flat: Vec<(usize, usize)> = cloud.indices().collect();
    let member = flat.iter().copied().find(|&(j, i)| cloud.point(j, i) == p);
    Ok(match member {
        Some((j, i)) => point_dimension(cloud, &tree, &flat, j, i, params),
        None => local_dimension_in(&tree, p, params),
    })
}

/// Partition of a cloud by local dimension.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Sub-cloud for each dimension class, band structure preserved.
    pub classes: BTreeMap<usize, PointCloud>,
    /// Classes reaching the finest bands.
    pub lambda0: Vec<usize>,
    /// Least element of `lambda0`; 0 for an empty cloud.
    pub m0: usize,
    /// Per point (band order) class after folding, `None` when undetermined.
    pub labels: Vec<Vec<Option<usize>>>,
    pub undetermined: usize,
}

/// Splits the cloud into classes `A_i` of points with local dimension `i`.
pub fn decompose_by_local_dimension(cloud: &PointCloud, params: &DimParams) -> Result<Decomposition> {
    let n = cloud.ambient_dim;
    params.validate(n)?;
    if cloud.is_empty() {
        return Ok(Decomposition {
            classes: BTreeMap::new(),
            lambda0: Vec::new(),
            m0: 0,
            labels: cloud.bands.iter().map(|_| Vec::new()).collect(),
            undetermined: 0,
        });
    }
    let pts = cloud.flat_points();
    let tree = KdTree::new(&pts, n);
    let idx: Vec<(usize, usize)> = cloud.indices().collect();
    let flat: Vec<Option<usize>> =
        idx.par_iter().map(|&(j, i)| point_dimension(cloud, &tree, &idx, j, i, params)).collect();
    let undetermined = flat.iter().filter(|l| l.is_none()).count();
    if undetermined == flat.len() {
        return Err(GdError::AllUndetermined);
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for l in flat.iter().flatten() {
        *counts.entry(*l).or_default() += 1;
    }
    let total = (flat.len() - undetermined) as f64;
    let kept: Vec<usize> = counts.iter().filter(|(_, c)| **c as f64 >= NOISE_FRACTION * total).map(|(d, _)| *d).collect();
    let fold = |d: usize| -> usize {
        if kept.contains(&d) {
            d
        } else {
            kept.iter().copied().find(|&k| k > d).or_else(|| kept.iter().copied().rev().find(|&k| k < d)).unwrap_or(d)
        }
    };
    let mut labels = Vec::with_capacity(cloud.bands.len());
    let mut off = 0;
    for b in &cloud.bands {
        labels.push(flat[off..off + b.points.len()].iter().map(|l| l.map(fold)).collect::<Vec<_>>());
        off += b.points.len();
    }
    let mut classes = BTreeMap::new();
    for &d in &kept {
        classes.insert(d, cloud.filter(|j, i| labels[j][i] == Some(d)));
    }
    let finest: Vec<usize> =
        (0..cloud.bands.len()).rev().filter(|&j| !cloud.bands[j].points.is_empty()).take(params.limit_bands).collect();
    let lambda0: Vec<usize> = kept
        .iter()
        .copied()
        .filter(|&d| finest.iter().all(|&j| labels[j].iter().any(|l| *l == Some(d))))
        .collect();
    let m0 = lambda0.first().copied().unwrap_or(0);
    Ok(Decomposition { classes, lambda0, m0, labels, undetermined })
}

/// Radii (degrees) at which the local dimension of a direction set is polled.
fn sphere_radii(n: usize, theta_net: f64, votes: usize) -> Vec<f64> {
    let spread = if n <= 4 { 1.0 } else { (n as f64 - 2.0) / 2.0 };
    (0..votes).map(|v| theta_net * spread * 1.6 * 1.5f64.powi(v as i32)).collect()
}

/// Local dimension of a direction set at its member `a`, from PCA of the
/// neighbors in the tangent space `a^⊥`.
fn sphere_local_dim(d: &DirectionSet, tree: &KdTree, a: &[f64], params: &DimParams) -> usize {
    let n = d.ambient_dim();
    let mut votes = Vec::new();
    for radius in sphere_radii(n, d.theta_net(), params.scale_votes) {
        let near = tree.within(a, chord_of_deg(radius));
        if near.len() <= 1 {
            votes.push(0);
            continue;
        }
        let tangent: Vec<Vec<f64>> = near
            .iter()
            .map(|&i| {
                let b = tree.point(i);
                let t = dot(a, b);
                b.iter().zip(a).map(|(bi, ai)| bi - t * ai).collect()
            })
            .collect();
        let refs: Vec<&[f64]> = tangent.iter().map(|v| v.as_slice()).collect();
        votes.push(centered_rank(&refs, n, params.pca_gap).min(n - 1));
    }
    lower_median(votes).unwrap_or(0)
}

/// Pointwise local dimension of every direction of `d`.
pub fn direction_dims(d: &DirectionSet, params: &DimParams) -> Vec<usize> {
    let tree = d.tree();
    d.dirs().par_iter().map(|a| sphere_local_dim(d, &tree, a, params)).collect()
}

/// Intrinsic dimension of a direction set (median over probe directions),
/// `None` for an empty set.
pub fn estimate_dim(d: &DirectionSet, params: &DimParams) -> Option<usize> {
    if d.is_empty() {
        return None;
    }
    let tree = d.tree();
    let count = d.len().min(DIM_PROBES);
    let dims: Vec<usize> = (0..count)
        .into_par_iter()
        .map(|i| sphere_local_dim(d, &tree, &d.dirs()[i * d.len() / count], params))
        .collect();
    lower_median(dims)
}

/// Largest local dimension of `d` held by at least `share` of the probes; unlike
/// [`estimate_dim`] it sees a part of higher dimension that is not the majority.
pub fn estimate_dim_upper(d: &DirectionSet, params: &DimParams, share: f64) -> Option<usize> {
    if d.is_empty() {
        return None;
    }
    let tree = d.tree();
    let count = d.len().min(DIM_PROBES);
    let mut dims: Vec<usize> = (0..count)
        .into_par_iter()
        .map(|i| sphere_local_dim(d, &tree, &d.dirs()[i * d.len() / count], params))
        .collect();
    dims.sort_unstable();
    let skip = ((share * count as f64).ceil() as usize).clamp(1, count);
    Some(dims[count - skip])
}

/// Dimension of the half-cone over `d` (0 for the empty cone).
pub fn cone_dim(d: &DirectionSet, params: &DimParams) -> usize {
    estimate_dim(d, params).map_or(0, |k| k + 1)
}

/// Outcome of [`finite_plane_union_test`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaneUnionDecision {
    pub contained: bool,
    pub m: usize,
    pub planes: Vec<Subspace>,
    pub residual_fraction: f64,
    pub max_planes_used: usize,
}

fn canonical_basis(s: &Subspace) -> Vec<f64> {
    s.basis
        .iter()
        .flat_map(|b| {
            let sign = b.iter().find(|x| x.abs() > 1e-12).map_or(1.0, |x| x.signum());
            b.iter().map(move |x| x * sign)
        })
        .collect()
}

fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

/// Greedy RANSAC test of whether `d` lies in a union of at most `max_planes`
/// `m`-dimensional linear subspaces, up to `angular_tol` degrees.
pub fn finite_plane_union_test(
    d: &DirectionSet,
    m: usize,
    max_planes: usize,
    angular_tol: f64,
    seed: u64,
) -> Result<PlaneUnionDecision> {
    let n = d.ambient_dim();
    if m == 0 || m >= n {
        return Err(GdError::InvalidParameter(format!("plane dimension {m} must lie in 1..{n}")));
    }
    if max_planes == 0 {
        return Err(GdError::InvalidParameter("max_planes must be positive".into()));
    }
    let total = d.len();
    let mut remaining: Vec<&[f64]> = d.dirs().iter().map(|a| a.as_slice()).collect();
    let mut planes = Vec::new();
    let inliers = |s: &Subspace, set: &[&[f64]]| set.iter().filter(|a| s.angle_to_deg(a) <= angular_tol).count();
    for round in 0..max_planes {
        if remaining.len() as f64 <= OUTLIER_BUDGET * total as f64 || remaining.len() < m {
            break;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[round as u64]));
        let scored: Vec<&[f64]> = if remaining.len() > RANSAC_SCORE_SAMPLE {
            let mut ix = sample(&mut rng, remaining.len(), RANSAC_SCORE_SAMPLE).into_vec();
            ix.sort_unstable();
            ix.into_iter().map(|i| remaining[i]).collect()
        } else {
            remaining.clone()
        };
        let trials: Vec<Vec<usize>> =
            (0..RANSAC_TRIALS).map(|_| sample(&mut rng, remaining.len(), m).into_vec()).collect();
        let best = trials
            .par_iter()
            .filter_map(|ix| {
                let span: Vec<Vec<f64>> = ix.iter().map(|&i| remaining[i].to_vec()).collect();
                let s = Subspace::from_spanning(&span);
                (s.dim() == m).then(|| (inliers(&s, &scored), canonical_basis(&s), s))
            })
            .reduce_with(|a, b| {
                if b.0 > a.0 || (b.0 == a.0 && lex_less(&b.1, &a.1)) {
                    b
                } else {
                    a
                }
            });
        let Some((_, _, mut plane)) = best else { break };
        let mut count = inliers(&plane, &remaining);
        let members: Vec<&[f64]> =
            remaining.iter().copied().filter(|a| plane.angle_to_deg(a) <= angular_tol).collect();
        if members.len() >= m {
            let refined = pca(members.iter().copied(), &vec![0.0; n]).subspace(m);
            let c = inliers(&refined, &remaining);
            if c >= count {
                plane = refined;
                count = c;
            }
        }
        if count == 0 {
            break;
        }
        remaining.retain(|a| plane.angle_to_deg(a) > angular_tol);
        planes.push(plane);
    }
    let residual_fraction = if total == 0 { 0.0 } else { remaining.len() as f64 / total as f64 };
    Ok(PlaneUnionDecision {
        contained: residual_fraction <= OUTLIER_BUDGET,
        m,
        max_planes_used: planes.len(),
        planes,
        residual_fraction,
    })
}

/// Splits a union-of-`k`-planes direction set into the part where the set is
/// locally `(k-1)`-dimensional (`B0`) and the part where it is thicker (`B+`).
pub fn split_b0_bplus(d: &DirectionSet, k: usize, params: &DimParams) -> (DirectionSet, DirectionSet) {
    let dims = direction_dims(d, params);
    let plus: Vec<bool> = dims.iter().map(|&x| x + 1 > k).collect();
    let zero: Vec<bool> = plus.iter().map(|p| !p).collect();
    (d.select(&zero), d.select(&plus))
}

/// Orthogonal projector of a subspace, row-major.
/// Planes pairwise farther apart than `sep_deg` (largest principal angle),
/// chosen greedily in input order.
pub fn distinct_planes(planes: &[Subspace], sep_deg: f64) -> Vec<Subspace> {
    let Some(n) = planes.iter().find_map(|p| p.basis.first().map(|b| b.len())) else {
        return Vec::new();
    };
    let min_gap = std::f64::consts::SQRT_2 * sep_deg.to_radians().sin();
    let mut kept: Vec<(Vec<f64>, &Subspace)> = Vec::new();
    for p in planes {
        let proj = p.projector(n);
        if kept.iter().all(|(q, _)| projector_gap(q, &proj) > min_gap) {
            kept.push((proj, p));
        }
    }
    kept.into_iter().map(|(_, p)| p.clone()).collect()
}

/// Default number of distinct nearby planes marking a point of `B+`.
pub const SPLIT_MIN_PLANES: usize = 3;

/// `k`-dimensional tangent spaces carried by the finest `bands` bands of a cloud.
pub fn carried_planes(cloud: &PointCloud, k: usize, bands: usize) -> Vec<Subspace> {
    let first = cloud.bands.len().saturating_sub(bands);
    cloud.bands[first..]
        .iter()
        .flat_map(|b| (0..b.points.len()).filter_map(move |i| b.tangent(i)))
        .filter(|t| t.dim() == k)
        .cloned()
        .collect()
}

/// Splits the base of a union of `k`-planes by counting the planes of `planes`
/// passing within `tol` degrees of each direction (measured beyond the nearest
/// plane, so slightly displaced directions are judged like their neighbors),
/// planes closer than `sep` degrees counting once: directions met by at least `min_planes` of them go
/// to `B+`, the rest to `B0`.
pub fn split_by_planes(
    d: &DirectionSet,
    planes: &[Subspace],
    k: usize,
    tol: f64,
    sep: f64,
    min_planes: usize,
) -> (DirectionSet, DirectionSet) {
    let n = d.ambient_dim();
    let candidates: Vec<Subspace> = planes.iter().filter(|p| p.dim() == k).cloned().collect();
    let unique = distinct_planes(&candidates, sep / 10.0);
    let projs: Vec<Vec<f64>> = unique.iter().map(|p| p.projector(n)).collect();
    let min_gap = std::f64::consts::SQRT_2 * sep.to_radians().sin();
    let plus: Vec<bool> = d
        .dirs()
        .par_iter()
        .map(|a| {
            let angles: Vec<f64> = unique.iter().map(|p| p.angle_to_deg(a)).collect();
            let reach = angles.iter().copied().fold(f64::INFINITY, f64::min) + tol;
            let mut met: Vec<&Vec<f64>> = Vec::new();
            for (g, proj) in angles.iter().zip(&projs) {
                if *g <= reach && met.iter().all(|q| projector_gap(q, proj) > min_gap) {
                    met.push(proj);
                    if met.len() >= min_planes {
                        return true;
                    }
                }
            }
            false
        })
        .collect();
    let zero: Vec<bool> = plus.iter().map(|p| !p).collect();
    (d.select(&zero), d.select(&plus))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_multiscale, ScaleSchedule};
    use crate::setdesc::{catalog_example, parse_set_description};

    fn circle(n: usize, theta: f64, f: impl Fn(f64) -> Vec<f64>) -> DirectionSet {
        let cands = (0..3600).map(|i| f(i as f64 * std::f64::consts::TAU / 3600.0)).collect();
        DirectionSet::from_candidates_sparse(n, theta, cands).unwrap()
    }

    #[test]
    fn upper_dimension_sees_a_minority_patch() {
        let mut cands: Vec<Vec<f64>> = (0..3600)
            .map(|i| {
                let t = i as f64 * std::f64::consts::TAU / 3600.0;
                vec![t.cos(), t.sin(), 0.0]
            })
            .collect();
        let cap = 8f64.to_radians().cos();
        cands.extend(crate::sphere::uniform_directions(3, 200_000, 5).into_iter().filter(|a| a[2] >= cap));
        let d = DirectionSet::from_candidates_sparse(3, 1.5, cands).unwrap();
        let p = DimParams::default_for(3);
        assert_eq!(estimate_dim(&d, &p), Some(1));
        assert_eq!(estimate_dim_upper(&d, &p, 0.1), Some(2));
        assert_eq!(estimate_dim_upper(&DirectionSet::empty(3, 1.5), &p, 0.1), None);
    }

    #[test]
    fn plane_cloud_has_dimension_two() {
        let d = parse_set_description("subspace(3; (1, 0, 0), (0, 1, 0))").unwrap();
        let c = sample_multiscale(&d, &ScaleSchedule::default_for(3), 3).unwrap();
        let p = DimParams::default_for(3);
        let q = c.bands[5].points[17].clone();
        assert_eq!(local_dimension_at(&c, &q, &p).unwrap(), Some(2));
        let est = DimParams { tangent_source: TangentSource::Estimated, ..p };
        assert_eq!(local_dimension_at(&c, &q, &est).unwrap(), Some(2));
    }

    #[test]
    fn moment_curve_cloud_has_dimension_one() {
        let d = catalog_example("moment_curve", Some(3)).unwrap();
        let c = sample_multiscale(&d, &ScaleSchedule::default_for(3), 3).unwrap();
        let p = DimParams { tangent_source: TangentSource::Estimated, ..DimParams::default_for(3) };
        for i in [0, 100, 900] {
            let q = c.bands[6].points[i].clone();
            assert_eq!(local_dimension_at(&c, &q, &p).unwrap(), Some(1));
        }
    }

    #[test]
    fn double_cone_decomposes_to_two() {
        let d = catalog_example("double_cone", None).unwrap();
        let c = sample_multiscale(&d, &ScaleSchedule::default_for(3), 3).unwrap();
        let dec = decompose_by_local_dimension(&c, &DimParams::default_for(3)).unwrap();
        assert_eq!(dec.lambda0, vec![2]);
        assert_eq!(dec.m0, 2);
        let sum: usize = dec.classes.values().map(|c| c.len()).sum();
        assert_eq!(sum + dec.undetermined, c.len());
    }

    #[test]
    fn whitney_umbrella_has_handle_and_sheet() {
        let d = catalog_example("whitney_umbrella", None).unwrap();
        let c = sample_multiscale(&d, &ScaleSchedule::default_for(3), 3).unwrap();
        let p = DimParams::default_for(3);
        let dec = decompose_by_local_dimension(&c, &p).unwrap();
        assert_eq!(dec.lambda0, vec![1, 2]);
        assert_eq!(dec.m0, 1);
        let handle = c.bands[6].points.iter().find(|q| q[2] < -0.5 * norm(q)).unwrap().clone();
        assert_eq!(local_dimension_at(&c, &handle, &p).unwrap(), Some(1));
        let est = DimParams { tangent_source: TangentSource::Estimated, ..p };
        assert_eq!(local_dimension_at(&c, &handle, &est).unwrap(), Some(1));
        assert_eq!(decompose_by_local_dimension(&c, &est).unwrap().lambda0, vec![1, 2]);
    }

    #[test]
    fn reversal_has_two_classes() {
        let d = catalog_example("reversal", None).unwrap();
        let s = ScaleSchedule { per_band: 1000, ..ScaleSchedule::default_for(6) };
        let c = sample_multiscale(&d, &s, 3).unwrap();
        let dec = decompose_by_local_dimension(&c, &DimParams::default_for(6)).unwrap();
        assert_eq!(dec.lambda0, vec![4, 5]);
        assert_eq!(dec.m0, 4);
        // singular samples on the cusp axis sit within a fraction of a degree of x1 = 0
        for q in dec.classes[&5].flat_points() {
            assert!(q[0].abs() <= 1e-2 * norm(q));
        }
        for q in dec.classes[&4].flat_points() {
            let f = q[0] * q[0] + q[1] * q[1] - q[2].powi(4);
            let g = q[3] * q[3] + q[4] * q[4] - q[5].powi(4);
            assert!(f.abs() < 1e-12 && g.abs() < 1e-12);
        }
    }

    #[test]
    fn empty_cloud_has_m0_zero() {
        let c = PointCloud { ambient_dim: 2, bands: Vec::new(), seed: 0, desc_hash: 0 };
        assert_eq!(decompose_by_local_dimension(&c, &DimParams::default_for(2)).unwrap().m0, 0);
    }

    #[test]
    fn dimension_of_simple_sets() {
        let p = DimParams::default_for(3);
        let one = DirectionSet::from_candidates(3, 1.5, vec![vec![1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(estimate_dim(&one, &p), Some(0));
        assert_eq!(cone_dim(&one, &p), 1);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c45 = circle(3, 1.5, |t| vec![s * t.cos(), s * t.sin(), s]);
        assert_eq!(estimate_dim(&c45, &p), Some(1));
        assert_eq!(cone_dim(&DirectionSet::full_sphere(3, 1.5, 1), &p), 3);
        assert_eq!(estimate_dim(&DirectionSet::empty(3, 1.5), &p), None);
        assert_eq!(cone_dim(&DirectionSet::empty(3, 1.5), &p), 0);
    }

    #[test]
    fn two_planes_are_a_plane_union() {
        let mut cands = Vec::new();
        for i in 0..720 {
            let t = i as f64 * std::f64::consts::TAU / 720.0;
            cands.push(vec![0.0, t.cos(), t.sin()]);
            cands.push(vec![t.cos(), 0.0, t.sin()]);
        }
        let d = DirectionSet::from_candidates(3, 1.5, cands).unwrap();
        let r = finite_plane_union_test(&d, 2, 16, 3.0, 7).unwrap();
        assert!(r.contained);
        assert_eq!(r.max_planes_used, 2);
        assert!(finite_plane_union_test(&d, 3, 16, 3.0, 7).is_err());
    }

    #[test]
    fn band_is_not_a_plane_union() {
        let full = DirectionSet::full_sphere(3, 1.5, 2);
        let keep: Vec<bool> = full.dirs().iter().map(|a| a[2] * a[2] <= a[0] * a[0] + a[1] * a[1]).collect();
        let band = full.select(&keep);
        let r = finite_plane_union_test(&band, 2, 16, 3.0, 7).unwrap();
        assert!(!r.contained);
        assert!(r.residual_fraction > 0.1);
    }

    #[test]
    fn split_of_single_circle_is_all_b0() {
        let c = circle(3, 1.5, |t| vec![t.cos(), t.sin(), 0.0]);
        let (b0, bplus) = split_b0_bplus(&c, 2, &DimParams::default_for(3));
        assert_eq!(b0.len(), c.len());
        assert!(bplus.is_empty());
        let full = DirectionSet::full_sphere(3, 1.5, 2);
        let (b0, bplus) = split_b0_bplus(&full, 2, &DimParams::default_for(3));
        assert!(b0.is_empty());
        assert_eq!(bplus.len(), full.len());
    }

    #[test]
    fn repeated_planes_collapse() {
        let xy = Subspace::from_spanning(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]]);
        let tilted = Subspace::from_spanning(&[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 1e-9]]);
        let xz = Subspace::from_spanning(&[vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]);
        assert_eq!(distinct_planes(&[xy, tilted, xz], 0.1).len(), 2);
    }

    #[test]
    fn plane_count_separates_circle_from_cone() {
        let mut planes = vec![Subspace::from_spanning(&[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]); 50];
        for i in 0..720 {
            let t = i as f64 * std::f64::consts::TAU / 720.0;
            let ruling = vec![t.cos(), t.sin(), 1.0];
            planes.push(Subspace::from_spanning(&[ruling, vec![-t.sin(), t.cos(), 0.0]]));
        }
        let d = circle(3, 1.5, |t| vec![0.0, t.cos(), t.sin()]);
        let (b0, bplus) = split_by_planes(&d, &planes, 2, 0.75, 0.1, 3);
        assert_eq!(b0.len() + bplus.len(), d.len());
        assert!(b0.dirs().iter().all(|a| a[2].abs() > 0.68));
        assert!(bplus.dirs().iter().all(|a| a[2].abs() < 0.74));
        assert!(!b0.is_empty() && !bplus.is_empty());
    }
}
