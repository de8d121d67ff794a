//! Closed-form answers for the catalog: cones given by polynomial sign
//! conditions on unit vectors.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GdError, Result};
use crate::expr::Expr;
use crate::linalg::{angle_deg, normalized};
use crate::sampler::{derive_seed, ImplicitSystem};
use crate::setdesc::{parse_set_description, Relation, SetNode};
use crate::sphere::{coverage, uniform_directions, DirectionSet};

const TABLE: &str = include_str!("../data/oracle_table.csv");
const PROJECT_ITERS: usize = 60;
const CLOSURE_SLACK: f64 = 1e-9;
const NUDGE: f64 = 1e-6;
/// Uniform draws tried per requested sample.
const DRAW_FACTOR: usize = 200;
/// Fraction both precision and recall must reach.
pub const PASS_FRACTION: f64 = 0.98;

/// `{a ∈ S^{n-1} : equations = 0, constraints hold}`.
#[derive(Debug, Clone)]
struct Piece {
    equations: Vec<Expr>,
    constraints: Vec<(Expr, Relation)>,
}

impl Piece {
    fn parse(n: usize, body: &str) -> Piece {
        let text = if body.is_empty() { format!("implicit({n})") } else { format!("implicit({n}; {body})") };
        let desc = parse_set_description(&text).expect("oracle pieces are well formed");
        match desc.node {
            SetNode::Implicit { equations, constraints } => {
                Piece { equations, constraints: constraints.into_iter().map(|c| (c.expr, c.rel)).collect() }
            }
            _ => unreachable!("implicit text parses to an implicit node"),
        }
    }

    fn value(e: &Expr, a: &[f64]) -> f64 {
        e.eval(a, 0.0).unwrap_or(f64::NAN)
    }

    /// Membership in the closure, equations checked to `tol`.
    fn holds(&self, a: &[f64], tol: f64) -> bool {
        self.equations.iter().all(|e| Piece::value(e, a).abs() <= tol)
            && self.constraints.iter().all(|(e, rel)| closure_holds(*rel, Piece::value(e, a)))
    }

    fn project(&self, n: usize, extra: Option<&Expr>, a: &[f64]) -> Option<Vec<f64>> {
        let mut eqs = self.equations.clone();
        eqs.extend(extra.cloned());
        if eqs.is_empty() {
            return Some(a.to_vec());
        }
        let sys = ImplicitSystem::new(n, &eqs, &[]).ok()?;
        // Points equidistant from several nearest points make the step singular;
        // a tiny nudge picks one of them.
        (0..=n).find_map(|i| {
            let mut start = a.to_vec();
            if i > 0 {
                start[i - 1] += NUDGE;
            }
            sys.project_on_sphere(&normalized(&start)?, 1.0, PROJECT_ITERS).ok().and_then(|q| normalized(&q))
        })
    }

    /// Angle from `a` to a nearby point of the piece's closure, found by projecting
    /// onto the equations and, if a sign condition fails, onto its boundary too.
    fn angle_to(&self, n: usize, a: &[f64]) -> f64 {
        let Some(b) = self.project(n, None, a) else {
            return f64::INFINITY;
        };
        if self.holds(&b, 1e-8) {
            return angle_deg(a, &b);
        }
        self.constraints
            .iter()
            .filter(|(e, rel)| !closure_holds(*rel, Piece::value(e, &b)))
            .filter_map(|(e, _)| self.project(n, Some(e), a))
            .filter(|c| self.holds(c, 1e-8))
            .map(|c| angle_deg(a, &c))
            .fold(f64::INFINITY, f64::min)
    }
}

fn closure_holds(rel: Relation, v: f64) -> bool {
    match rel {
        Relation::Lt | Relation::Le => v <= CLOSURE_SLACK,
        Relation::Gt | Relation::Ge => v >= -CLOSURE_SLACK,
        Relation::Ne => true,
    }
}

/// A cone of known directions, as a union of semialgebraic pieces of the sphere.
#[derive(Debug, Clone)]
pub struct ConePredicate {
    pub n: usize,
    pub id: String,
    pieces: Vec<Piece>,
}

impl ConePredicate {
    /// Predicate with the given id in `R^n`.
    pub fn by_id(id: &str, n: usize) -> Result<ConePredicate> {
        let need = |k: usize| {
            if n == k {
                Ok(())
            } else {
                Err(GdError::DimensionMismatch(format!("predicate `{id}` lives in R^{k}, not R^{n}")))
            }
        };
        let band = "x1^2 + x2^2 - x3^2 >= 0";
        let bodies: Vec<String> = match id {
            "sphere" => vec![String::new()],
            "empty" => vec![],
            "axis_e1" => vec![(2..=n).map(|i| format!("x{i} = 0")).collect::<Vec<_>>().join("; ")],
            "band_z" => {
                need(3)?;
                vec![band.into()]
            }
            "polar_arcs" => {
                need(3)?;
                vec!["x1 = 0; x3^2 - x1^2 - x2^2 > 0".into(), "x2 = 0; x3^2 - x1^2 - x2^2 > 0".into()]
            }
            "two_planes" => {
                need(3)?;
                vec!["x1 = 0".into(), "x2 = 0".into()]
            }
            "planes_and_band" => {
                need(3)?;
                vec![band.into(), "x1 = 0".into(), "x2 = 0".into()]
            }
            other => return Err(GdError::Validation(format!("unknown predicate `{other}`"))),
        };
        let pieces = bodies.iter().map(|b| Piece::parse(n, b)).collect();
        Ok(ConePredicate { n, id: id.to_string(), pieces })
    }

    /// Membership of the direction of `a` (any nonzero multiple gives the same answer).
    pub fn contains(&self, a: &[f64]) -> bool {
        let Some(u) = normalized(a) else {
            return false;
        };
        self.pieces.iter().any(|p| {
            p.equations.iter().all(|e| Piece::value(e, &u).abs() <= 1e-9)
                && p.constraints.iter().all(|(e, rel)| rel.holds(Piece::value(e, &u), 0.0))
        })
    }

    /// Angle in degrees from the direction of `a` to the closure of the cone's base
    /// (`+∞` for the empty cone).
    pub fn angle_to(&self, a: &[f64]) -> f64 {
        let Some(u) = normalized(a) else {
            return f64::INFINITY;
        };
        self.pieces.iter().map(|p| p.angle_to(self.n, &u)).fold(f64::INFINITY, f64::min)
    }

    /// Up to `count` directions of the closure, spread evenly over the pieces:
    /// rejection from uniform draws, projected first onto any equations.
    pub fn sample(&self, count: usize, seed: u64) -> Vec<Vec<f64>> {
        if self.pieces.is_empty() {
            return Vec::new();
        }
        let per = count.div_ceil(self.pieces.len());
        let mut out = Vec::with_capacity(count);
        for (k, p) in self.pieces.iter().enumerate() {
            let draws = uniform_directions(self.n, per * DRAW_FACTOR, derive_seed(seed, &[k as u64]));
            let mut taken = 0;
            for d in draws {
                if taken == per || out.len() == count {
                    break;
                }
                if let Some(b) = p.project(self.n, None, &d) {
                    if p.holds(&b, 1e-8) {
                        out.push(b);
                        taken += 1;
                    }
                }
            }
        }
        out
    }
}

/// Row of the table of known answers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleEntry {
    pub name: String,
    /// `None` when the answer holds for every admissible `n`.
    pub n: Option<usize>,
    pub min_power: usize,
    /// Whether the answer holds for every power from `min_power` on.
    pub and_above: bool,
    pub predicate: String,
}

impl OracleEntry {
    fn matches(&self, name: &str, n: usize, power: usize) -> bool {
        self.name == name
            && self.n.is_none_or(|m| m == n)
            && if self.and_above { power >= self.min_power } else { power == self.min_power }
    }
}

/// The table of known answers shipped with the library.
pub fn oracle_table() -> Vec<OracleEntry> {
    TABLE
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').map(str::trim).collect();
            let (power, and_above) = match f[2].strip_suffix('+') {
                Some(p) => (p, true),
                None => (f[2], false),
            };
            OracleEntry {
                name: f[0].to_string(),
                n: if f[1] == "*" { None } else { Some(f[1].parse().expect("table dimension")) },
                min_power: power.parse().expect("table power"),
                and_above,
                predicate: f[3].to_string(),
            }
        })
        .collect()
}

/// The exact `GD^power` of a catalog entry, when known.
pub fn oracle_gd_predicate(name: &str, n: usize, power: usize) -> Result<ConePredicate> {
    let unknown = || GdError::UnknownOracle { name: name.to_string(), n, power };
    let entry = oracle_table().into_iter().find(|e| e.matches(name, n, power)).ok_or_else(unknown)?;
    ConePredicate::by_id(&entry.predicate, n)
}

/// Outcome of [`compare_estimate_to_oracle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    /// Fraction of estimated directions within `theta` of the exact set.
    pub precision: f64,
    /// Fraction of exact directions within `theta` of the estimate.
    pub recall: f64,
    pub pass: bool,
}

pub fn compare_estimate_to_oracle(
    d: &DirectionSet,
    pred: &ConePredicate,
    theta: f64,
    n_probe: usize,
    seed: u64,
) -> Result<OracleComparison> {
    if d.ambient_dim() != pred.n {
        return Err(GdError::DimensionMismatch(format!("R^{} vs R^{}", d.ambient_dim(), pred.n)));
    }
    let precision = if d.is_empty() {
        1.0
    } else {
        let hits = d.dirs().par_iter().filter(|a| pred.angle_to(a) <= theta).count();
        hits as f64 / d.len() as f64
    };
    let probes = pred.sample(n_probe, seed);
    let recall = if probes.is_empty() { 1.0 } else { coverage(d, &probes, theta) };
    Ok(OracleComparison { precision, recall, pass: precision >= PASS_FRACTION && recall >= PASS_FRACTION })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_membership_and_distance() {
        let p = oracle_gd_predicate("double_cone", 3, 1).unwrap();
        assert!(p.contains(&[1.0, 0.0, 0.0]));
        assert!(p.contains(&[5.0, 0.0, 1.0]));
        assert!(!p.contains(&[0.0, 0.0, 1.0]));
        assert!((p.angle_to(&[0.0, 0.0, 1.0]) - 45.0).abs() < 1e-6);
        let lat60 = [0.5, 0.0, 0.75f64.sqrt()];
        assert!((p.angle_to(&lat60) - 15.0).abs() < 1e-6);
    }

    #[test]
    fn higher_powers_and_wildcards() {
        assert_eq!(oracle_gd_predicate("double_cone", 3, 2).unwrap().id, "sphere");
        assert_eq!(oracle_gd_predicate("double_cone", 3, 5).unwrap().id, "sphere");
        let axis = oracle_gd_predicate("moment_curve", 5, 3).unwrap();
        assert!(axis.contains(&[-2.0, 0.0, 0.0, 0.0, 0.0]));
        assert!((axis.angle_to(&[1.0, 1.0, 0.0, 0.0, 0.0]) - 45.0).abs() < 1e-6);
        assert!(matches!(oracle_gd_predicate("whitney_umbrella", 3, 1), Err(GdError::UnknownOracle { .. })));
        assert!(oracle_gd_predicate("double_cone", 4, 1).is_err());
    }

    #[test]
    fn polar_arcs_reach_their_endpoints() {
        let p = ConePredicate::by_id("polar_arcs", 3).unwrap();
        assert!(p.contains(&[0.0, 0.1, 1.0]));
        assert!(!p.contains(&[0.0, 1.0, 0.1]));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(p.angle_to(&[0.0, h, h]) < 1e-6);
        let v = p.angle_to(&[0.0, 1.0, 0.0]);
        assert!((v - 45.0).abs() < 1e-4, "{v}");
        let a = [0.05, 0.3, 1.0];
        let off = (0.05 / crate::linalg::norm(&a)).asin().to_degrees();
        assert!((p.angle_to(&a) - off).abs() < 1e-6);
    }

    #[test]
    fn samples_satisfy_membership() {
        for (id, n) in [("band_z", 3), ("polar_arcs", 3), ("axis_e1", 4), ("planes_and_band", 3), ("sphere", 6)] {
            let p = ConePredicate::by_id(id, n).unwrap();
            let s = p.sample(500, 3);
            assert!(s.len() >= 250, "{id}: {}", s.len());
            assert!(s.iter().all(|a| p.angle_to(a) < 1e-6), "{id}");
        }
        assert!(ConePredicate::by_id("empty", 3).unwrap().sample(10, 1).is_empty());
    }

    #[test]
    fn comparison_of_nets() {
        let band = ConePredicate::by_id("band_z", 3).unwrap();
        let full = DirectionSet::full_sphere(3, 1.5, 1);
        let keep: Vec<bool> = full.dirs().iter().map(|a| band.contains(a)).collect();
        let net = full.select(&keep);
        let r = compare_estimate_to_oracle(&net, &band, 3.0, 2000, 5).unwrap();
        assert_eq!(r.precision, 1.0);
        assert_eq!(r.recall, 1.0);
        assert!(r.pass);
        let sphere = ConePredicate::by_id("sphere", 3).unwrap();
        let r = compare_estimate_to_oracle(&DirectionSet::empty(3, 1.5), &sphere, 3.0, 500, 5).unwrap();
        assert_eq!(r.recall, 0.0);
        assert!(!r.pass);
    }

    #[test]
    fn table_is_well_formed() {
        let t = oracle_table();
        assert!(t.len() >= 10);
        for e in &t {
            let n = e.n.unwrap_or(4);
            ConePredicate::by_id(&e.predicate, n).unwrap();
        }
    }
}
