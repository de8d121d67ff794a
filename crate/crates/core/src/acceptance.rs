//! Acceptance suite: catalog examples run through the whole pipeline and
//! checked against their known answers.

use std::fmt;
use std::time::Instant;

use rayon::prelude::*;

use crate::conealg::{carried_planes, finite_plane_union_test, split_b0_bplus, split_by_planes, SPLIT_MIN_PLANES};
use crate::dircone::gd_origin;
use crate::error::Result;
use crate::gditer::{
    apply_gd, check_monotone_chain, iterate_to_stabilization, union_additivity_check, GdConfig, GdInput,
    StabilizationReport,
};
use crate::conealg::decompose_by_local_dimension;
use crate::linalg::{angle_deg, normalized};
use crate::oracle::{compare_estimate_to_oracle, oracle_gd_predicate, ConePredicate};
use crate::report::{canonical_json, stabilization_value};
use crate::sampler::sample_multiscale;
use crate::setdesc::{catalog_example, genuine_dimension, parse_set_description, SetDescription};
use crate::sphere::{coverage, hausdorff_angle, probe_grid, DirectionSet, HausdorffMode};

/// Random probes drawn when a grid would be too fine.
const MAX_PROBES: usize = 20_000;
/// Angular tolerance (degrees) for plane tests on exact analytic directions.
const EXACT_TOL: f64 = 0.01;
const MAX_PLANES: usize = 16;
/// Net resolution (degrees) of the exact chord directions.
const CHORD_NET: f64 = 0.1;

/// Identifier and short name of every criterion, in order.
pub const CRITERIA: [(usize, &str); 10] = [
    (1, "double cone"),
    (2, "crossed cones"),
    (3, "moment curve"),
    (4, "planes and cone split"),
    (5, "cone product"),
    (6, "reversal set"),
    (7, "sphere-curve cone"),
    (8, "catalog properties"),
    (9, "non-stabilization witness"),
    (10, "determinism"),
];

/// Criteria too slow for routine runs.
pub const SLOW: [usize; 1] = [9];

#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "criterion {:>2} {verdict} ({}, {:.1} s): {}", self.id, self.name, self.seconds, self.detail)
    }
}

/// Runs one criterion; pipeline errors count as failures.
pub fn run_criterion(id: usize, seed: u64) -> CriterionResult {
    let name = CRITERIA.iter().find(|c| c.0 == id).map_or("unknown", |c| c.1);
    let start = Instant::now();
    let outcome = match id {
        1 => double_cone(seed),
        2 => crossed_cones(seed),
        3 => moment_curve(seed),
        4 => planes_and_cone(seed),
        5 => cone_product(seed),
        6 => reversal(seed),
        7 => sphere_curve_cone(seed),
        8 => catalog_properties(seed),
        9 => non_stabilization(seed),
        10 => determinism(seed),
        _ => Ok((false, format!("no criterion {id}"))),
    };
    let (pass, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    CriterionResult { id, name, pass, detail, seconds: start.elapsed().as_secs_f64() }
}

type Outcome = Result<(bool, String)>;

fn catalog(name: &str, n: Option<usize>) -> Result<SetDescription> {
    catalog_example(name, n)
}

fn probes(n: usize, spacing: f64, seed: u64) -> Vec<Vec<f64>> {
    probe_grid(n, spacing, MAX_PROBES, seed)
}

fn stab(r: &StabilizationReport) -> String {
    r.stabilized_at.map_or("none".into(), |m| m.to_string())
}

/// Symmetric Hausdorff angle between a net and the closure of an exact cone,
/// the exact side represented by `n_probe` samples.
fn hausdorff_to_predicate(d: &DirectionSet, pred: &ConePredicate, n_probe: usize, seed: u64) -> (f64, f64) {
    if d.is_empty() {
        return (0.0, f64::INFINITY);
    }
    let into = d.dirs().par_iter().map(|a| pred.angle_to(a)).reduce(|| 0.0, f64::max);
    let tree = d.tree();
    let back = pred
        .sample(n_probe, seed)
        .par_iter()
        .map(|p| {
            let (i, _) = tree.nearest(p).expect("nonempty");
            angle_deg(p, tree.point(i))
        })
        .reduce(|| 0.0, f64::max);
    (into, back)
}

/// Iteration report of the double cone together with its canonical JSON.
pub fn double_cone_report(seed: u64) -> Result<(StabilizationReport, String)> {
    let desc = catalog("double_cone", None)?;
    let report = iterate_to_stabilization(&desc, 4, &GdConfig::default_for(3), seed)?;
    let json = canonical_json(&stabilization_value(&report, "catalog(double_cone)", false)?);
    Ok((report, json))
}

fn double_cone(seed: u64) -> Outcome {
    let (report, _) = double_cone_report(seed)?;
    let config = report.params;
    let pred = oracle_gd_predicate("double_cone", 3, 1)?;
    let cmp = compare_estimate_to_oracle(&report.cones[1].base, &pred, 2.0 * config.dir.theta_lim, 4000, seed)?;
    let pass = cmp.pass && report.stabilized_at == Some(2);
    Ok((pass, format!("precision {:.4}, recall {:.4}, stabilized_at {}", cmp.precision, cmp.recall, stab(&report))))
}

fn crossed_cones(seed: u64) -> Outcome {
    let desc = catalog("crossed_cones", None)?;
    let config = GdConfig::default_for(3);
    let report = iterate_to_stabilization(&desc, 4, &config, seed)?;
    let cov = coverage(&report.cones[1].base, &probes(3, 2.0, seed), config.dir.theta_lim);
    let pass = cov >= 0.99 && report.stabilized_at == Some(1);
    Ok((pass, format!("C1 coverage {cov:.4}, stabilized_at {}", stab(&report))))
}

/// Unit chord directions `(γ(s) − γ(t))/|γ(s) − γ(t)|` of the moment curve.
fn moment_chords(n: usize, steps: usize) -> Vec<Vec<f64>> {
    let gamma = |t: f64| (1..=n).map(|i| t.powi(i as i32)).collect::<Vec<f64>>();
    let ts: Vec<f64> = (0..steps).map(|i| -0.5 + (i as f64 + 0.5) / steps as f64).collect();
    let mut out = Vec::new();
    for (i, &s) in ts.iter().enumerate() {
        for &t in &ts[i + 1..] {
            let d: Vec<f64> = gamma(s).iter().zip(gamma(t)).map(|(a, b)| a - b).collect();
            out.extend(normalized(&d));
        }
    }
    out
}

fn moment_curve(seed: u64) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in 3..=5 {
        let desc = catalog("moment_curve", Some(n))?;
        let config = GdConfig::default_for(n);
        let report = iterate_to_stabilization(&desc, n, &config, seed)?;
        let mut axis = vec![vec![0.0; n], vec![0.0; n]];
        axis[0][0] = 1.0;
        axis[1][0] = -1.0;
        let axis = DirectionSet::from_candidates(n, config.dir.theta_net, axis)?;
        let gap = hausdorff_angle(&report.cones[1].base, &axis, HausdorffMode::Symmetric);
        let chords = DirectionSet::from_candidates(n, CHORD_NET, moment_chords(n, 400))?;
        let planes = finite_plane_union_test(&chords, n - 1, MAX_PLANES, EXACT_TOL, seed)?;
        let ok = gap <= 2.0 * config.dir.theta_lim && report.stabilized_at == Some(1) && !planes.contained;
        pass &= ok;
        parts.push(format!(
            "n={n}: gap {gap:.2}, stabilized_at {}, chords in {} {}-planes: {}",
            stab(&report),
            planes.max_planes_used,
            n - 1,
            planes.contained
        ));
    }
    Ok((pass, parts.join("; ")))
}

fn planes_and_cone(seed: u64) -> Outcome {
    let desc = catalog("planes_and_cone", None)?;
    let config = GdConfig::default_for(3);
    let step = apply_gd(GdInput::Description(&desc), &config, seed)?;
    let cloud = step.cloud.expect("nonempty input");
    let c1 = step.cone.base;
    let planes = carried_planes(&cloud, 2, config.dir.limit_bands);
    let (b0, bplus) = split_by_planes(&c1, &planes, 2, config.dir.theta_net / 2.0, config.dir.theta_net / 16.0, SPLIT_MIN_PLANES);
    let tol = 2.0 * config.dir.theta_net;
    let b0_pred = oracle_gd_predicate("planes_and_cone_b0", 3, 1)?;
    let bplus_pred = oracle_gd_predicate("planes_and_cone_bplus", 3, 1)?;
    let (b0_in, b0_back) = hausdorff_to_predicate(&b0, &b0_pred, MAX_PROBES, seed);
    let (bp_in, bp_back) = hausdorff_to_predicate(&bplus, &bplus_pred, MAX_PROBES, seed);
    let (pca_b0, pca_bplus) = split_b0_bplus(&c1, 2, &config.dim);
    let pca_b0_gap = hausdorff_to_predicate(&pca_b0, &b0_pred, MAX_PROBES, seed);
    let pca_bplus_gap = hausdorff_to_predicate(&pca_bplus, &bplus_pred, MAX_PROBES, seed);
    let pass = b0_in.max(b0_back) <= tol && bp_in.max(bp_back) <= tol;
    Ok((
        pass,
        format!(
            "B0 {} dirs, Hausdorff {:.2} ({b0_in:.2}/{b0_back:.2}); B+ {} dirs, Hausdorff {:.2} ({bp_in:.2}/{bp_back:.2}); \
             tolerance {tol:.2}; local-dimension proxy: B0 {:.2}, B+ {:.2}",
            b0.len(),
            b0_in.max(b0_back),
            bplus.len(),
            bp_in.max(bp_back),
            pca_b0_gap.0.max(pca_b0_gap.1),
            pca_bplus_gap.0.max(pca_bplus_gap.1),
        ),
    ))
}

fn cone_product(seed: u64) -> Outcome {
    let desc = catalog("cone_product", None)?;
    let config = GdConfig::default_for(6);
    let report = iterate_to_stabilization(&desc, 5, &config, seed)?;
    let cov = coverage(&report.cones[1].base, &probes(6, 4.0, seed), config.dir.theta_lim);
    let pass = cov >= 0.97 && report.stabilized_at == Some(1);
    Ok((pass, format!("C1 coverage {cov:.4}, stabilized_at {}", stab(&report))))
}

fn reversal(seed: u64) -> Outcome {
    let desc = catalog("reversal", None)?;
    let config = GdConfig::default_for(6);
    let cloud = sample_multiscale(&desc, &config.schedule, seed)?;
    let dec = decompose_by_local_dimension(&cloud, &config.dim)?;
    let cov = match dec.classes.get(&4) {
        Some(a4) => coverage(&gd_origin(a4, &config.dir)?, &probes(6, 4.0, seed), config.dir.theta_lim),
        None => 0.0,
    };
    let report = iterate_to_stabilization(&desc, 5, &config, seed)?;
    let pass = dec.lambda0 == [4, 5] && dec.m0 == 4 && cov >= 0.97 && report.stabilized_at == Some(1);
    Ok((
        pass,
        format!("lambda0 {:?}, m0 {}, A4 coverage {cov:.4}, stabilized_at {}", dec.lambda0, dec.m0, stab(&report)),
    ))
}

fn sphere_curve_cone(seed: u64) -> Outcome {
    let desc = catalog("sphere_curve_cone", Some(4))?;
    let config = GdConfig::default_for(4);
    let report = iterate_to_stabilization(&desc, 4, &config, seed)?;
    let k = genuine_dimension("sphere_curve_cone", Some(4));
    let planes = finite_plane_union_test(&report.cones[1].base, 3, MAX_PLANES, EXACT_TOL, seed)?;
    let d1 = report.chain[1].cone_dim;
    let d2 = report.chain.get(2).map_or(0, |r| r.cone_dim);
    let pass = k == Some(2) && report.m0 == 2 && d1 == 3 && !planes.contained && d2 == 4;
    Ok((
        pass,
        format!("input dim {k:?} (m0 {}), dim C1 {d1}, C1 in finite 3-planes {}, dim C2 {d2}", report.m0, planes.contained),
    ))
}

fn union_pairs() -> Result<Vec<(&'static str, SetDescription, SetDescription)>> {
    let p = parse_set_description;
    Ok(vec![
        ("planes x=0, y=0", p("subspace(3; (0, 1, 0), (0, 0, 1))")?, p("subspace(3; (1, 0, 0), (0, 0, 1))")?),
        (
            "half-cones",
            p("implicit(3; x1^2 + x2^2 - x3^2 = 0; x3 > 0)")?,
            p("implicit(3; x1^2 + x2^2 - x3^2 = 0; x3 < 0)")?,
        ),
        ("double cone, moment curve", catalog("double_cone", None)?, catalog("moment_curve", Some(3))?),
        ("crossed cones, planes and cone", catalog("crossed_cones", None)?, catalog("planes_and_cone", None)?),
        ("whitney umbrella, moment curve", catalog("whitney_umbrella", None)?, catalog("moment_curve", Some(3))?),
    ])
}

fn catalog_properties(seed: u64) -> Outcome {
    let entries: [(&str, Option<usize>); 9] = [
        ("double_cone", None),
        ("crossed_cones", None),
        ("moment_curve", Some(3)),
        ("planes_and_cone", None),
        ("whitney_umbrella", None),
        ("sphere_curve_cone", Some(4)),
        ("point", Some(3)),
        ("reversal", None),
        ("cone_product", None),
    ];
    let mut failures = Vec::new();
    for (name, n) in entries {
        let desc = catalog(name, n)?;
        let n = desc.ambient_dim;
        let report = iterate_to_stabilization(&desc, n + 1, &GdConfig::default_for(n), seed)?;
        if !check_monotone_chain(&report) {
            failures.push(format!("{name}: chain not monotone"));
        }
        if !report.bound_satisfied {
            failures.push(format!(
                "{name}: stabilized_at {} vs bounds {}/{}",
                stab(&report),
                report.theorem_bound,
                report.refined_bound
            ));
        }
        if let Some(k) = genuine_dimension(name, Some(n)).filter(|&k| k > 0) {
            let d1 = report.chain[1].cone_dim;
            if d1 < k || d1 > (2 * k).min(n) {
                failures.push(format!("{name}: dim C1 = {d1} outside [{k}, {}]", (2 * k).min(n)));
            }
            for r in report.chain.iter().skip(1) {
                let bound = (1i64 << r.degree) * k as i64 - (1i64 << (r.degree - 1)) + 1;
                if r.cone_dim as i64 > bound {
                    failures.push(format!("{name}: dim C{} = {} > {bound}", r.degree, r.cone_dim));
                }
            }
        }
    }
    let mut unions = 0;
    for (label, a, b) in union_pairs()? {
        for q in 1..=2 {
            let r = union_additivity_check(&a, &b, q, &GdConfig::default_for(a.ambient_dim), seed)?;
            unions += 1;
            if !r.pass {
                failures.push(format!("union {label}, q={q}: gap {:.2} > {:.2}", r.gap, r.tolerance));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{} catalog chains and {unions} union checks consistent", entries.len())
    } else {
        failures.join("; ")
    };
    Ok((failures.is_empty(), detail))
}

fn non_stabilization(seed: u64) -> Outcome {
    let desc = catalog("sphere_curve_cone", Some(7))?;
    let config = GdConfig::default_for(7);
    let report = iterate_to_stabilization(&desc, 4, &config, seed)?;
    let cov = report
        .cones
        .get(2)
        .map_or(0.0, |c| coverage(&c.base, &probes(7, 6.0, seed), config.dir.theta_lim));
    let pass = report.stabilized_at != Some(2) || cov >= 0.99;
    Ok((pass, format!("stabilized_at {}, C2 coverage {cov:.4}", stab(&report))))
}

fn determinism(seed: u64) -> Outcome {
    let (_, first) = double_cone_report(seed)?;
    let (_, second) = double_cone_report(seed)?;
    let same = first == second;
    Ok((same, format!("{} bytes, identical: {same}", first.len())))
}
