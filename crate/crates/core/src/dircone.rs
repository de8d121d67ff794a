//! Direction sets `D_p(A)`, `D(A)`, the bundle `D_W(A)` and the geometric
//! directional bundle `GD(A)` estimated from multiscale clouds.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GdError, Result};
use crate::linalg::{angle_deg, dot, chord_of_deg, norm, normalized, pca, projector_gap, sub, Subspace};
use crate::sampler::{derive_seed, Band, PointCloud};
use crate::spatial::KdTree;
use crate::sphere::{sphere_candidates, union_dirsets, DirectionSet};

/// Minimum number of points in each band used for limits.
pub const MIN_BAND_POINTS: usize = 50;

/// Where tangent spaces at basepoints come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TangentSource {
    /// Tangent data carried by the cloud when present, local fits otherwise.
    Auto,
    /// Only tangent data carried by the cloud.
    Analytic,
    /// Local fits only.
    Estimated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirParams {
    /// Neighbor radius as a fraction of `‖p‖`.
    pub rho: f64,
    pub theta_net: f64,
    /// Number of finest bands intersected when taking limits.
    pub limit_bands: usize,
    pub theta_lim: f64,
    pub include_base_directions: bool,
    pub tangent_source: TangentSource,
    /// Basepoints used per band.
    pub max_basepoints: usize,
    /// Candidate directions generated per band.
    pub candidates_per_band: usize,
    /// Singular-value ratio deciding the rank of a local fit.
    pub pca_gap: f64,
    /// Angle (degrees) within which neighbors count as inliers of the seed fit.
    pub inlier_angle: f64,
    /// Treat the cloud as a cone: every tangent space contains the radial direction.
    pub conic: bool,
    /// Upper bound on fitted tangent dimension, set when resampling a cone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tangent_dim: Option<usize>,
}

/// Net resolution used by default in `R^n`.
pub fn default_theta_net(n: usize) -> f64 {
    match n {
        0..=3 => 1.5,
        4 => 3.0,
        5 => 6.0,
        6 => 10.0,
        _ => 15.0,
    }
}

impl DirParams {
    pub fn default_for(n: usize) -> DirParams {
        let theta_net = default_theta_net(n);
        DirParams {
            rho: match n {
                0..=3 => 0.1,
                4 => 0.2,
                _ => 0.4,
            },
            theta_net,
            limit_bands: 3,
            theta_lim: 2.0 * theta_net,
            include_base_directions: true,
            tangent_source: TangentSource::Auto,
            max_basepoints: if n <= 3 { 400 } else { 300 },
            candidates_per_band: if n <= 3 { 120_000 } else { 300_000 },
            pca_gap: 0.2,
            inlier_angle: 20.0,
            conic: false,
            max_tangent_dim: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GdError::InvalidParameter(m));
        if !(self.rho > 0.0 && self.rho < 0.5) {
            return bad(format!("rho = {} outside (0, 0.5)", self.rho));
        }
        if self.limit_bands < 2 {
            return bad(format!("limit_bands = {} < 2", self.limit_bands));
        }
        if !(self.theta_net > 0.0 && self.theta_net < 90.0) {
            return bad(format!("theta_net = {}", self.theta_net));
        }
        if self.theta_lim < self.theta_net {
            return bad(format!("theta_lim = {} < theta_net = {}", self.theta_lim, self.theta_net));
        }
        if self.max_basepoints == 0 || self.candidates_per_band == 0 {
            return bad("basepoint and candidate budgets must be positive".into());
        }
        if !(self.pca_gap > 0.0 && self.pca_gap < 1.0) {
            return bad(format!("pca_gap = {}", self.pca_gap));
        }
        Ok(())
    }
}

/// Net of the secant directions `(q − p)/‖q − p‖` over cloud points within `rho·‖p‖` of `p`.
pub fn direction_set_at(cloud: &PointCloud, p: &[f64], params: &DirParams) -> Result<DirectionSet> {
    params.validate()?;
    let r = norm(p);
    if r == 0.0 {
        return Err(GdError::OriginBasepoint);
    }
    if p.len() != cloud.ambient_dim {
        return Err(GdError::DimensionMismatch(format!("basepoint of length {}", p.len())));
    }
    let radius = params.rho * r;
    let dirs = cloud
        .flat_points()
        .into_iter()
        .filter_map(|q| {
            let d = sub(q, p);
            let dn = norm(&d);
            (dn > 0.0 && dn <= radius).then(|| d.iter().map(|x| x / dn).collect())
        })
        .collect();
    DirectionSet::from_candidates(cloud.ambient_dim, params.theta_net, dirs)
}

/// Indices of the `limit_bands` finest nonempty bands, finest first.
fn limit_band_indices(cloud: &PointCloud, params: &DirParams, min_points: usize) -> Result<Vec<usize>> {
    let nonempty: Vec<usize> = (0..cloud.bands.len()).rev().filter(|&j| !cloud.bands[j].points.is_empty()).collect();
    if nonempty.len() < params.limit_bands {
        return Err(GdError::NotEnoughBands { have: nonempty.len(), need: params.limit_bands });
    }
    let chosen: Vec<usize> = nonempty[..params.limit_bands].to_vec();
    for &j in &chosen {
        let b = &cloud.bands[j];
        if b.points.len() < min_points {
            return Err(GdError::Starvation { band: j, scale: b.scale, accepted: b.points.len(), quota: min_points });
        }
    }
    Ok(chosen)
}

/// Net of limit directions of `q/‖q‖` as `q → 0`: directions present (within
/// `theta_lim`) in each of the finest bands.
pub fn direction_set_origin(cloud: &PointCloud, params: &DirParams) -> Result<DirectionSet> {
    params.validate()?;
    let bands = limit_band_indices(cloud, params, 1)?;
    let n = cloud.ambient_dim;
    let nets: Vec<DirectionSet> = bands
        .par_iter()
        .map(|&j| {
            let dirs = cloud.bands[j].points.iter().filter_map(|p| normalized(p)).collect();
            DirectionSet::from_candidates_sparse(n, params.theta_net, dirs)
        })
        .collect::<Result<_>>()?;
    intersect_dilated(&nets, n, params)
}

/// Directions of the union of `nets` lying within `theta_lim` of every net.
fn intersect_dilated(nets: &[DirectionSet], n: usize, params: &DirParams) -> Result<DirectionSet> {
    let trees: Vec<KdTree> = nets.iter().map(|d| d.tree()).collect();
    let chord = chord_of_deg(params.theta_lim);
    let kept: Vec<Vec<f64>> = nets
        .iter()
        .flat_map(|d| d.dirs().iter())
        .filter(|a| trees.iter().all(|t| t.any_within(a, chord)))
        .cloned()
        .collect();
    DirectionSet::from_candidates_sparse(n, params.theta_net, kept)
}

/// One basepoint of the bundle with its tangent space and the directions drawn from it.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleEntry {
    pub band: usize,
    pub basepoint: Vec<f64>,
    pub tangent: Subspace,
    pub directions: Vec<Vec<f64>>,
}

/// Sample of `D_W(A)`: basepoint/direction pairs tagged by band.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub ambient_dim: usize,
    pub theta_net: f64,
    pub bands: Vec<usize>,
    pub entries: Vec<BundleEntry>,
}

impl Bundle {
    pub fn pairs(&self) -> impl Iterator<Item = (usize, &[f64], &[f64])> + '_ {
        self.entries
            .iter()
            .flat_map(|e| e.directions.iter().map(move |a| (e.band, e.basepoint.as_slice(), a.as_slice())))
    }

    pub fn pair_count(&self) -> usize {
        self.entries.iter().map(|e| e.directions.len()).sum()
    }

    /// CSV with columns `band, p1..pn, a1..an`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let n = self.ambient_dim;
        let ps: Vec<String> = (1..=n).map(|i| format!("p{i}")).collect();
        let as_: Vec<String> = (1..=n).map(|i| format!("a{i}")).collect();
        writeln!(w, "band,{},{}", ps.join(","), as_.join(","))?;
        for (band, p, a) in self.pairs() {
            let row: Vec<String> = p.iter().chain(a).map(|x| format!("{x:.17e}")).collect();
            writeln!(w, "{band},{}", row.join(","))?;
        }
        Ok(())
    }
}

fn point_key(p: &[f64]) -> u64 {
    let bits: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
    derive_seed(0x5eed, &bits)
}

/// Tangent space at `q` from a local fit: a seed fit on the neighbors within
/// `rho·‖q‖/2` (or the nearest few when that ball is sparse), then a refit on the neighbors within `rho·‖q‖` that lie close to the seed subspace.
pub fn estimate_tangent(tree: &KdTree, q: &[f64], params: &DirParams) -> Option<Subspace> {
    fit_tangent(tree, q, params).map(|f| f.0)
}

/// Final fit at `q` with the neighbors it was fitted to.
fn fit_tangent<'a>(tree: &'a KdTree, q: &[f64], params: &DirParams) -> Option<(Subspace, Vec<&'a [f64]>)> {
    let n = q.len();
    let r = norm(q);
    let k_seed = (2 * n).max(8);
    let mut seed_pts: Vec<&[f64]> =
        tree.within(q, 0.5 * params.rho * r).into_iter().map(|i| tree.point(i)).filter(|p| *p != q).collect();
    if seed_pts.len() < k_seed {
        seed_pts = tree
            .k_nearest(q, k_seed + 1)
            .into_iter()
            .filter(|(_, d2)| *d2 > 0.0 && d2.sqrt() <= 0.5 * r)
            .map(|(i, _)| tree.point(i))
            .collect();
    }
    if seed_pts.len() < n.min(3) {
        return None;
    }
    let fit = |pts: &[&[f64]]| {
        let cap = params.max_tangent_dim.unwrap_or(n).max(1);
        if params.conic {
            conic_fit(pts, q, params.pca_gap, cap)
        } else {
            let f = pca(pts.iter().copied(), q);
            f.subspace(f.rank(params.pca_gap).clamp(1, cap))
        }
    };
    let seed_sub = fit(&seed_pts);
    let seed_dim = seed_sub.dim();
    let mut near: Vec<&[f64]> = tree
        .within(q, params.rho * r)
        .into_iter()
        .map(|i| tree.point(i))
        .filter(|p| *p != q)
        .collect();
    if near.len() < seed_pts.len() {
        near = seed_pts.clone();
    }
    let inliers: Vec<&[f64]> = near
        .into_iter()
        .filter(|p| {
            let d = sub(p, q);
            match normalized(&d) {
                Some(u) => seed_sub.angle_to_deg(&u) <= params.inlier_angle,
                None => false,
            }
        })
        .collect();
    if inliers.len() < seed_dim + 1 {
        return Some((seed_sub, seed_pts));
    }
    let refit = fit(&inliers);
    Some((refit, inliers))
}

/// Local fit for cones: the radial direction is always tangent, and the
/// remaining axes come from the displacements orthogonal to it, ranked against
/// the larger of the radial and leading orthogonal spreads.
fn conic_fit(pts: &[&[f64]], q: &[f64], gap: f64, cap: usize) -> Subspace {
    let u = normalized(q).expect("basepoint is nonzero");
    let mut radial = 0.0;
    let perp: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| {
            let d = sub(p, q);
            let t = dot(&d, &u);
            radial += t * t;
            d.iter().zip(&u).map(|(di, ui)| di - t * ui).collect()
        })
        .collect();
    let f = pca(perp.iter().map(|v| v.as_slice()), &vec![0.0; q.len()]);
    let top = radial.sqrt().max(f.singular.first().copied().unwrap_or(0.0));
    let extra = f.singular.iter().filter(|s| **s >= gap * top && **s > 0.0).count().min(cap - 1);
    let mut span = vec![u];
    span.extend(f.axes.iter().take(extra).cloned());
    Subspace::from_spanning(&span)
}

/// True when most of the nearest samples around a singular sample carry tangent
/// data; their tangent spaces then stand in for the sample's own directions.
fn mostly_regular(tree: &KdTree, flat: &[(usize, usize)], cloud: &PointCloud, q: &[f64]) -> bool {
    let k = (2 * q.len()).max(8);
    let near = tree.k_nearest(q, k + 1);
    let regular = near.iter().filter(|(m, d2)| *d2 > 0.0 && cloud.bands[flat[*m].0].tangent(flat[*m].1).is_some()).count();
    2 * regular >= k
}

/// Basepoints of one band: the first half of the budget in hash order, the rest
/// by farthest-point selection on the carried tangent spaces (so rare tangent
/// planes from thin parts of the set are not missed), then hash order again
/// once every tangent lies within `theta_net` of a chosen one.
fn pick_basepoints(band: &Band, params: &DirParams, use_analytic: bool) -> Vec<usize> {
    let mut order: Vec<(u64, usize)> = band.points.iter().enumerate().map(|(i, p)| (point_key(p), i)).collect();
    order.sort_unstable();
    let order: Vec<usize> = order.into_iter().map(|(_, i)| i).collect();
    let max = params.max_basepoints;
    if order.len() <= max || !use_analytic || band.tangents.is_empty() {
        let mut sel: Vec<usize> = order.into_iter().take(max).collect();
        sel.sort_unstable();
        return sel;
    }
    let n = band.points[0].len();
    let projs: Vec<Option<Vec<f64>>> = order.iter().map(|&i| band.tangent(i).map(|t| t.projector(n))).collect();
    let mut taken = vec![false; order.len()];
    let mut nearest = vec![f64::INFINITY; order.len()];
    let take = |k: usize, taken: &mut [bool], nearest: &mut [f64]| {
        taken[k] = true;
        if let Some(pk) = &projs[k] {
            for (m, pm) in projs.iter().enumerate() {
                if let Some(pm) = pm {
                    nearest[m] = nearest[m].min(projector_gap(pk, pm));
                }
            }
        }
    };
    for k in 0..max / 2 {
        take(k, &mut taken, &mut nearest);
    }
    let min_gap = std::f64::consts::SQRT_2 * params.theta_net.to_radians().sin();
    let mut count = max / 2;
    while count < max {
        let best = (0..order.len())
            .filter(|&k| !taken[k] && projs[k].is_some())
            .max_by(|&a, &b| nearest[a].total_cmp(&nearest[b]).then(b.cmp(&a)));
        match best {
            Some(k) if nearest[k] > min_gap => {
                take(k, &mut taken, &mut nearest);
                count += 1;
            }
            _ => break,
        }
    }
    for k in 0..order.len() {
        if count >= max {
            break;
        }
        if !taken[k] {
            taken[k] = true;
            count += 1;
        }
    }
    let mut sel: Vec<usize> = (0..order.len()).filter(|&k| taken[k]).map(|k| order[k]).collect();
    sel.sort_unstable();
    sel
}

/// Candidate directions covering `S^{d-1}`, shared by all basepoints of dimension `d`.
struct CanonicalSpheres {
    spacing: f64,
    cache: HashMap<usize, Vec<Vec<f64>>>,
}

const CANONICAL_MAX: usize = 200_000;

impl CanonicalSpheres {
    fn get(&mut self, d: usize) -> &Vec<Vec<f64>> {
        let spacing = self.spacing;
        self.cache.entry(d).or_insert_with(|| sphere_candidates(d, spacing, CANONICAL_MAX, d as u64))
    }
}

/// Tangent-space samples at the basepoints of the finest bands, with the
/// directions of their great spheres (the unit tangent directions at each basepoint).
pub fn sample_bundle(cloud: &PointCloud, params: &DirParams) -> Result<Bundle> {
    params.validate()?;
    let n = cloud.ambient_dim;
    let bands = limit_band_indices(cloud, params, MIN_BAND_POINTS)?;
    let use_analytic = match params.tangent_source {
        TangentSource::Estimated => false,
        TangentSource::Analytic => {
            if !cloud.has_tangents() {
                return Err(GdError::InvalidParameter("cloud carries no tangent data".into()));
            }
            true
        }
        TangentSource::Auto => cloud.has_tangents(),
    };
    let all_points = cloud.flat_points();
    let tree = KdTree::new(&all_points, n);
    let flat: Vec<(usize, usize)> = cloud.indices().collect();

    let mut chosen: Vec<(usize, usize)> = Vec::new();
    for &j in &bands {
        let sel = pick_basepoints(&cloud.bands[j], params, use_analytic);
        chosen.extend(sel.into_iter().map(|i| (j, i)));
    }

    let tangents: Vec<Option<Subspace>> = chosen
        .par_iter()
        .map(|&(j, i)| {
            let q = &cloud.bands[j].points[i];
            if !use_analytic {
                return estimate_tangent(&tree, q, params);
            }
            if let Some(t) = cloud.bands[j].tangent(i) {
                return Some(t.clone());
            }
            if params.tangent_source == TangentSource::Analytic || mostly_regular(&tree, &flat, cloud, q) {
                return None;
            }
            estimate_tangent(&tree, q, params)
        })
        .collect();

    let mut spheres = CanonicalSpheres { spacing: params.theta_net / 2.0, cache: HashMap::new() };
    let per_band_bp: HashMap<usize, usize> = bands
        .iter()
        .map(|&j| (j, chosen.iter().zip(&tangents).filter(|((b, _), t)| *b == j && t.is_some()).count()))
        .collect();
    for t in tangents.iter().flatten() {
        spheres.get(t.dim());
    }
    let spheres = spheres.cache;

    let entries: Vec<BundleEntry> = chosen
        .par_iter()
        .zip(tangents.par_iter())
        .filter_map(|(&(j, i), t)| {
            let t = t.as_ref()?;
            let q = &cloud.bands[j].points[i];
            let canon = &spheres[&t.dim()];
            let cap = (params.candidates_per_band / per_band_bp[&j].max(1)).max(16);
            let coeffs: Vec<&Vec<f64>> = if canon.len() <= cap {
                canon.iter().collect()
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(point_key(q));
                let mut ix = sample(&mut rng, canon.len(), cap).into_vec();
                ix.sort_unstable();
                ix.into_iter().map(|k| &canon[k]).collect()
            };
            let directions = coeffs
                .into_iter()
                .filter_map(|c| {
                    let mut a = vec![0.0; n];
                    for (ci, b) in c.iter().zip(&t.basis) {
                        for (ai, bi) in a.iter_mut().zip(b) {
                            *ai += ci * bi;
                        }
                    }
                    normalized(&a)
                })
                .collect();
            Some(BundleEntry { band: j, basepoint: q.clone(), tangent: t.clone(), directions })
        })
        .collect();
    Ok(Bundle { ambient_dim: n, theta_net: params.theta_net, bands, entries })
}

/// Applies the band-intersection limit rule to a bundle sample.
pub fn gd_from_bundle(bundle: &Bundle, params: &DirParams) -> Result<DirectionSet> {
    let n = bundle.ambient_dim;
    let nets: Vec<DirectionSet> = bundle
        .bands
        .par_iter()
        .map(|&j| {
            let cands: Vec<Vec<f64>> = bundle
                .entries
                .iter()
                .filter(|e| e.band == j)
                .flat_map(|e| e.directions.iter().cloned())
                .collect();
            DirectionSet::from_candidates_sparse(n, params.theta_net, cands)
        })
        .collect::<Result<_>>()?;
    if nets.iter().any(|d| d.is_empty()) {
        return Ok(DirectionSet::empty(n, params.theta_net));
    }
    intersect_dilated(&nets, n, params)
}

/// Estimate of `GD(A)`: limits over the finest bands of the tangent directions at
/// basepoints, together with `D(A)` when `include_base_directions` is set.
pub fn gd_origin(cloud: &PointCloud, params: &DirParams) -> Result<DirectionSet> {
    let bundle = sample_bundle(cloud, params)?;
    let gd = gd_from_bundle(&bundle, params)?;
    if params.include_base_directions {
        let base = direction_set_origin(cloud, params)?;
        union_dirsets(&gd, &base)
    } else {
        Ok(gd)
    }
}

/// Largest angle between a direction of `d` and the nearest of `targets`.
pub fn max_angle_to(d: &DirectionSet, targets: &[Vec<f64>]) -> f64 {
    d.dirs()
        .iter()
        .map(|a| targets.iter().map(|t| angle_deg(a, t)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::{sample_multiscale, Band, ScaleSchedule};
    use crate::setdesc::{catalog_example, parse_set_description};

    fn line_cloud() -> PointCloud {
        let bands = (0..6)
            .map(|j| {
                let s = 0.2 * 0.5f64.powi(j);
                let points = (0..100)
                    .map(|i| {
                        let t = s * (0.5 + 0.5 * (i as f64 + 0.5) / 100.0);
                        vec![if i % 2 == 0 { t } else { -t }, 0.0]
                    })
                    .collect();
                Band { scale: s, points, tangents: Vec::new() }
            })
            .collect();
        PointCloud { ambient_dim: 2, bands, seed: 0, desc_hash: 0 }
    }

    #[test]
    fn secants_on_a_line() {
        let c = line_cloud();
        let p = DirParams::default_for(2);
        let d = direction_set_at(&c, &[0.1, 0.0], &p).unwrap();
        assert_eq!(d.dirs(), &[vec![-1.0, 0.0], vec![1.0, 0.0]]);
        assert!(matches!(direction_set_at(&c, &[0.0, 0.0], &p), Err(GdError::OriginBasepoint)));
    }

    #[test]
    fn line_bundle_is_axis() {
        let c = line_cloud();
        let p = DirParams::default_for(2);
        let b = sample_bundle(&c, &p).unwrap();
        for (_, _, a) in b.pairs() {
            assert!(a[1].abs() < 1e-9 && (a[0].abs() - 1.0).abs() < 1e-9);
        }
        let gd = gd_origin(&c, &p).unwrap();
        assert_eq!(gd.len(), 2);
    }

    #[test]
    fn plane_gd_is_great_circle() {
        let d = parse_set_description("subspace(3; (1, 0, 0), (0, 1, 0))").unwrap();
        let s = ScaleSchedule { per_band: 300, ..ScaleSchedule::default_for(3) };
        let c = sample_multiscale(&d, &s, 5).unwrap();
        let p = DirParams::default_for(3);
        let gd = gd_origin(&c, &p).unwrap();
        assert!(gd.dirs().iter().all(|a| a[2].abs() < 1e-9));
        let est = gd_origin(&c.without_tangents(), &DirParams { tangent_source: TangentSource::Estimated, ..p }).unwrap();
        assert!(est.dirs().iter().all(|a| a[2].abs() < 1e-6));
        assert!(est.len() > 100);
    }

    #[test]
    fn moment_curve_origin_directions() {
        let d = catalog_example("moment_curve", Some(4)).unwrap();
        let s = ScaleSchedule { per_band: 400, ..ScaleSchedule::default_for(4) };
        let c = sample_multiscale(&d, &s, 7).unwrap();
        let p = DirParams::default_for(4);
        let base = direction_set_origin(&c, &p).unwrap();
        let e1 = vec![1.0, 0.0, 0.0, 0.0];
        let m1 = vec![-1.0, 0.0, 0.0, 0.0];
        assert!(max_angle_to(&base, &[e1.clone(), m1.clone()]) <= p.theta_lim);
        assert!(base.dirs().iter().any(|a| angle_deg(a, &m1) <= p.theta_lim));
        assert!(base.dirs().iter().any(|a| angle_deg(a, &e1) <= p.theta_lim));
    }
}
