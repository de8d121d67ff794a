//! Multiscale point clouds of germs at the origin, and resampling of cones.

mod nodes;

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{GdError, Result};
use crate::linalg::{dot, norm, Subspace};
use crate::setdesc::SetDescription;
use crate::sphere::ConeRep;

pub use nodes::ImplicitSystem;
use nodes::{random_unit, shell_radius, NodeSampler};

/// Minimum fraction of the quota a band must reach before sampling is declared starved.
const STARVATION_FRACTION: f64 = 0.05;

/// Dyadic radii `r_j = r0 · 2^{-j}` and per-band quotas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleSchedule {
    pub r0: f64,
    pub band_count: usize,
    pub per_band: usize,
}

impl ScaleSchedule {
    pub fn default_for(n: usize) -> ScaleSchedule {
        ScaleSchedule { r0: 1.0 / 16.0, band_count: 10, per_band: if n <= 3 { 2000 } else { 8000 } }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r0 > 0.0 && self.r0.is_finite()) {
            return Err(GdError::InvalidParameter(format!("r0 = {}", self.r0)));
        }
        if self.band_count < 4 {
            return Err(GdError::InvalidParameter(format!("band_count = {} < 4", self.band_count)));
        }
        if self.per_band < 100 {
            return Err(GdError::InvalidParameter(format!("per_band = {} < 100", self.per_band)));
        }
        Ok(())
    }

    pub fn scale(&self, band: usize) -> f64 {
        self.r0 * 0.5f64.powi(band as i32)
    }
}

/// Points with norms in `(scale/2, scale]`, optionally with their tangent spaces
/// (`None` marks a point where no tangent space is known).
#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub scale: f64,
    pub points: Vec<Vec<f64>>,
    /// Empty when the cloud carries no tangent data, else one entry per point.
    pub tangents: Vec<Option<Subspace>>,
}

impl Band {
    pub fn tangent(&self, i: usize) -> Option<&Subspace> {
        self.tangents.get(i).and_then(|t| t.as_ref())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub ambient_dim: usize,
    pub bands: Vec<Band>,
    pub seed: u64,
    pub desc_hash: u64,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.bands.iter().map(|b| b.points.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn has_tangents(&self) -> bool {
        self.bands.iter().any(|b| !b.tangents.is_empty())
    }

    /// `(band, index)` of every point in band order.
    pub fn indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bands.iter().enumerate().flat_map(|(j, b)| (0..b.points.len()).map(move |i| (j, i)))
    }

    pub fn point(&self, band: usize, i: usize) -> &[f64] {
        &self.bands[band].points[i]
    }

    /// All points, flattened in band order.
    pub fn flat_points(&self) -> Vec<&[f64]> {
        self.bands.iter().flat_map(|b| b.points.iter().map(|p| p.as_slice())).collect()
    }

    /// Sub-cloud keeping the points selected by `keep(band, index)`; band structure is preserved.
    pub fn filter(&self, mut keep: impl FnMut(usize, usize) -> bool) -> PointCloud {
        let bands = self
            .bands
            .iter()
            .enumerate()
            .map(|(j, b)| {
                let mut points = Vec::new();
                let mut tangents = Vec::new();
                for (i, p) in b.points.iter().enumerate() {
                    if keep(j, i) {
                        points.push(p.clone());
                        if !b.tangents.is_empty() {
                            tangents.push(b.tangents[i].clone());
                        }
                    }
                }
                Band { scale: b.scale, points, tangents }
            })
            .collect();
        PointCloud { ambient_dim: self.ambient_dim, bands, seed: self.seed, desc_hash: self.desc_hash }
    }

    pub fn without_tangents(&self) -> PointCloud {
        let mut c = self.clone();
        for b in &mut c.bands {
            b.tangents.clear();
        }
        c
    }

    /// Cache layout: header `GDCL`, version, n, band count, seed, then per band
    /// the scale, the count and the coordinates; an optional `TANG` block follows
    /// with per-point tangent dimension (255 for unknown) and basis vectors.
    pub fn write_cache<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(b"GDCL")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.ambient_dim as u32).to_le_bytes())?;
        w.write_all(&(self.bands.len() as u32).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        for b in &self.bands {
            w.write_all(&b.scale.to_le_bytes())?;
            w.write_all(&(b.points.len() as u64).to_le_bytes())?;
            for p in &b.points {
                for x in p {
                    w.write_all(&x.to_le_bytes())?;
                }
            }
        }
        if self.has_tangents() {
            w.write_all(b"TANG")?;
            w.write_all(&self.desc_hash.to_le_bytes())?;
            for b in &self.bands {
                for i in 0..b.points.len() {
                    match b.tangent(i) {
                        Some(t) => {
                            w.write_all(&[t.dim() as u8])?;
                            for v in &t.basis {
                                for x in v {
                                    w.write_all(&x.to_le_bytes())?;
                                }
                            }
                        }
                        None => w.write_all(&[255u8])?,
                    }
                }
            }
        }
        Ok(())
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<PointCloud> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(4)? != b"GDCL" {
            return Err(GdError::Format("missing GDCL magic".into()));
        }
        let version = cur.u32()?;
        if version != 1 {
            return Err(GdError::Format(format!("unsupported cloud version {version}")));
        }
        let n = cur.u32()? as usize;
        let band_count = cur.u32()? as usize;
        let seed = cur.u64()?;
        let mut bands = Vec::with_capacity(band_count);
        for _ in 0..band_count {
            let scale = cur.f64()?;
            let count = cur.u64()? as usize;
            let mut points = Vec::with_capacity(count.min(1 << 24));
            for _ in 0..count {
                points.push((0..n).map(|_| cur.f64()).collect::<Result<Vec<f64>>>()?);
            }
            bands.push(Band { scale, points, tangents: Vec::new() });
        }
        let mut desc_hash = 0;
        if cur.pos < bytes.len() {
            if cur.take(4)? != b"TANG" {
                return Err(GdError::Format("unexpected trailing data".into()));
            }
            desc_hash = cur.u64()?;
            for b in &mut bands {
                for _ in 0..b.points.len() {
                    let d = cur.take(1)?[0];
                    if d == 255 {
                        b.tangents.push(None);
                    } else {
                        let basis = (0..d)
                            .map(|_| (0..n).map(|_| cur.f64()).collect::<Result<Vec<f64>>>())
                            .collect::<Result<Vec<_>>>()?;
                        b.tangents.push(Some(Subspace { basis }));
                    }
                }
            }
            if cur.pos != bytes.len() {
                return Err(GdError::Format("unexpected trailing data".into()));
            }
        }
        Ok(PointCloud { ambient_dim: n, bands, seed, desc_hash })
    }

    /// CSV with columns `band, x1..xn`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> = (1..=self.ambient_dim).map(|i| format!("x{i}")).collect();
        writeln!(w, "band,{}", header.join(","))?;
        for (j, b) in self.bands.iter().enumerate() {
            for p in &b.points {
                let row: Vec<String> = p.iter().map(|x| format!("{x:.17e}")).collect();
                writeln!(w, "{j},{}", row.join(","))?;
            }
        }
        Ok(())
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.pos + k > self.bytes.len() {
            return Err(GdError::Format("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream seed for a path of tags below `seed`.
pub fn derive_seed(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix(seed), |acc, t| splitmix(acc ^ splitmix(t.wrapping_add(1))))
}

fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
}

fn sorted_band(scale: f64, mut samples: Vec<(Vec<f64>, Option<Subspace>)>, keep_tangents: bool) -> Band {
    samples.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    let tangents = if keep_tangents { samples.iter().map(|s| s.1.clone()).collect() } else { Vec::new() };
    let points = samples.into_iter().map(|s| s.0).collect();
    Band { scale, points, tangents }
}

fn check_starvation(bands: &[Band], sched: &ScaleSchedule) -> Result<()> {
    let need = (STARVATION_FRACTION * sched.per_band as f64).ceil() as usize;
    for (j, b) in bands.iter().enumerate() {
        if b.points.len() < need {
            return Err(GdError::Starvation {
                band: j,
                scale: b.scale,
                accepted: b.points.len(),
                quota: sched.per_band,
            });
        }
    }
    Ok(())
}

/// Samples the germ on each dyadic shell `(r_j/2, r_j]`.
pub fn sample_multiscale(desc: &SetDescription, sched: &ScaleSchedule, seed: u64) -> Result<PointCloud> {
    desc.validate()?;
    sched.validate()?;
    let n = desc.ambient_dim;
    let sampler = NodeSampler::compile(desc)?;
    let bands: Vec<Band> = (0..sched.band_count)
        .into_par_iter()
        .map(|j| {
            let hi = sched.scale(j);
            let samples = sampler.sample_band(n, hi / 2.0, hi, sched.per_band, derive_seed(seed, &[j as u64]));
            sorted_band(hi, samples, true)
        })
        .collect();
    check_starvation(&bands, sched)?;
    Ok(PointCloud { ambient_dim: n, bands, seed, desc_hash: desc.content_hash() })
}

/// Content hash of a cone's net.
pub fn cone_hash(cone: &ConeRep) -> u64 {
    let mut h = Sha256::new();
    h.update(cone.base.theta_net().to_le_bytes());
    for d in cone.base.dirs() {
        for x in d {
            h.update(x.to_le_bytes());
        }
    }
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("digest has 32 bytes"))
}

/// Default angular jitter as a fraction of the net resolution.
pub const DEFAULT_JITTER: f64 = 0.25;

/// Cloud of `t·a` with `a` drawn from the cone's net (jittered by at most
/// `jitter_frac · theta_net`) and `t` uniform in each shell.
pub fn resample_cone_with(cone: &ConeRep, sched: &ScaleSchedule, seed: u64, jitter_frac: f64) -> Result<PointCloud> {
    sched.validate()?;
    if cone.is_empty() {
        return Err(GdError::EmptyCone);
    }
    if !(0.0..=0.5).contains(&jitter_frac) {
        return Err(GdError::InvalidParameter(format!("jitter fraction {jitter_frac} outside [0, 0.5]")));
    }
    let n = cone.ambient_dim();
    let dirs = cone.base.dirs();
    let max_angle = (jitter_frac * cone.base.theta_net()).to_radians();
    let bands: Vec<Band> = (0..sched.band_count)
        .into_par_iter()
        .map(|j| {
            let hi = sched.scale(j);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[j as u64]));
            let samples = (0..sched.per_band)
                .map(|_| {
                    let a = &dirs[rng.random_range(0..dirs.len())];
                    let dir = jitter(a, max_angle, &mut rng);
                    let t = shell_radius(hi / 2.0, hi, &mut rng);
                    (dir.iter().map(|x| x * t).collect::<Vec<f64>>(), None)
                })
                .filter(|(p, _)| {
                    let r = norm(p);
                    r > hi / 2.0 && r <= hi
                })
                .collect();
            sorted_band(hi, samples, false)
        })
        .collect();
    Ok(PointCloud { ambient_dim: n, bands, seed, desc_hash: cone_hash(cone) })
}

pub fn resample_cone(cone: &ConeRep, sched: &ScaleSchedule, seed: u64) -> Result<PointCloud> {
    resample_cone_with(cone, sched, seed, DEFAULT_JITTER)
}

fn jitter(a: &[f64], max_angle: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let n = a.len();
    if max_angle <= 0.0 || n < 2 {
        return a.to_vec();
    }
    let mut w = random_unit(n, rng);
    let c = dot(&w, a);
    for (wi, ai) in w.iter_mut().zip(a) {
        *wi -= c * ai;
    }
    let wn = norm(&w);
    if wn < 1e-12 {
        return a.to_vec();
    }
    let alpha = max_angle * rng.random::<f64>().powf(1.0 / (n - 1) as f64);
    let v: Vec<f64> = a.iter().zip(&w).map(|(ai, wi)| alpha.cos() * ai + alpha.sin() * wi / wn).collect();
    let r = norm(&v);
    v.iter().map(|x| x / r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setdesc::{catalog_example, distance_to_curve, parse_set_description, SetNode};
    use crate::sphere::DirectionSet;

    fn small(n: usize) -> ScaleSchedule {
        ScaleSchedule { per_band: 200, ..ScaleSchedule::default_for(n) }
    }

    #[test]
    fn point_germ_starves() {
        let d = parse_set_description("union(point(1))").unwrap();
        match sample_multiscale(&d, &small(1), 1) {
            Err(GdError::Starvation { band: 0, accepted: 0, .. }) => {}
            other => panic!("expected starvation, got {other:?}"),
        }
    }

    #[test]
    fn double_cone_points_satisfy_equation() {
        let d = catalog_example("double_cone", None).unwrap();
        let c = sample_multiscale(&d, &small(3), 7).unwrap();
        for b in &c.bands {
            assert_eq!(b.points.len(), 200);
            for p in &b.points {
                let r = norm(p);
                assert!(r > b.scale / 2.0 && r <= b.scale);
                let f = p[0] * p[0] + p[1] * p[1] - p[2] * p[2];
                assert!(f.abs() <= 1e-9 * b.scale * b.scale);
                assert!(p[2] != 0.0);
            }
        }
    }

    #[test]
    fn moment_curve_points_on_curve() {
        let d = catalog_example("moment_curve", Some(3)).unwrap();
        let coords = match &d.resolved().node {
            SetNode::ParamCurve { coords, .. } => coords.clone(),
            _ => unreachable!(),
        };
        let c = sample_multiscale(&d, &small(3), 7).unwrap();
        for b in &c.bands {
            assert_eq!(b.points.len(), 200);
            for p in b.points.iter().step_by(17) {
                assert!(distance_to_curve(&coords, (-0.5, 0.5), p).unwrap() < 1e-6);
            }
        }
    }

    #[test]
    fn deterministic_and_cache_round_trip() {
        let d = catalog_example("whitney_umbrella", None).unwrap();
        let a = sample_multiscale(&d, &small(3), 11).unwrap();
        let b = sample_multiscale(&d, &small(3), 11).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_cache(&mut buf).unwrap();
        assert_eq!(PointCloud::read_cache(buf.as_slice()).unwrap(), a);
    }

    #[test]
    fn ray_cone_resamples_on_ray() {
        let base = DirectionSet::from_candidates(3, 1.5, vec![vec![1.0, 0.0, 0.0]]).unwrap();
        let c = resample_cone_with(&ConeRep::new(base), &small(3), 3, 0.0).unwrap();
        for b in &c.bands {
            for p in &b.points {
                assert!(p[0] > 0.0 && p[1] == 0.0 && p[2] == 0.0);
            }
        }
        let empty = ConeRep::new(DirectionSet::empty(3, 1.5));
        assert!(matches!(resample_cone(&empty, &small(3), 3), Err(GdError::EmptyCone)));
    }
}
