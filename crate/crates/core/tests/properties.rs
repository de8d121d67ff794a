use proptest::prelude::*;

use gdlab::conealg::{decompose_by_local_dimension, finite_plane_union_test, split_by_planes, DimParams};
use gdlab::linalg::{angle_deg, normalized, Subspace};
use gdlab::oracle::ConePredicate;
use gdlab::report::canonical_json;
use gdlab::sampler::{sample_multiscale, ScaleSchedule};
use gdlab::setdesc::{catalog_example, eval_membership, parse_set_description};
use gdlab::sphere::{hausdorff_angle, uniform_directions, DirectionSet, HausdorffMode};

fn unit3() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 3).prop_filter_map("nonzero", |v| normalized(&v))
}

fn net(seed: u64, count: usize, theta: f64) -> DirectionSet {
    DirectionSet::from_candidates(3, theta, uniform_directions(3, count, seed)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn net_covers_its_candidates(seed in any::<u64>(), theta in 2.0f64..20.0) {
        let cands = uniform_directions(3, 400, seed);
        let d = DirectionSet::from_candidates(3, theta, cands.clone()).unwrap();
        let tree = d.tree();
        for c in &cands {
            let (i, _) = tree.nearest(c).unwrap();
            prop_assert!(angle_deg(c, tree.point(i)) <= theta);
        }
        for (i, a) in d.dirs().iter().enumerate() {
            for b in &d.dirs()[i + 1..] {
                prop_assert!(angle_deg(a, b) >= theta / 2.0 - 1e-9);
            }
        }
    }

    #[test]
    fn hausdorff_is_symmetric_and_vanishes_on_self(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = net(s1, 200, 5.0);
        let b = net(s2, 200, 5.0);
        prop_assert_eq!(hausdorff_angle(&a, &a, HausdorffMode::Symmetric), 0.0);
        let ab = hausdorff_angle(&a, &b, HausdorffMode::Symmetric);
        prop_assert_eq!(ab, hausdorff_angle(&b, &a, HausdorffMode::Symmetric));
        prop_assert!(hausdorff_angle(&a, &b, HausdorffMode::D1IntoD2) <= ab);
    }

    #[test]
    fn split_is_a_partition(seed in any::<u64>(), normals in prop::collection::vec(unit3(), 1..6), tol in 0.5f64..5.0) {
        let d = net(seed, 600, 4.0);
        let planes: Vec<Subspace> = normals
            .iter()
            .map(|nv| {
                let basis = gdlab::linalg::null_space(&[nv.clone()], 3, 1e-9).0;
                Subspace::from_spanning(&basis)
            })
            .collect();
        let (b0, bplus) = split_by_planes(&d, &planes, 2, tol, tol / 8.0, 2);
        prop_assert_eq!(b0.len() + bplus.len(), d.len());
        let mut parts: Vec<Vec<f64>> = b0.dirs().iter().chain(bplus.dirs()).cloned().collect();
        parts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut all = d.dirs().to_vec();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert_eq!(parts, all);
    }

    #[test]
    fn directions_on_few_planes_are_contained(normals in prop::collection::vec(unit3(), 1..4), seed in any::<u64>()) {
        let mut cands = Vec::new();
        for nv in &normals {
            let basis = gdlab::linalg::null_space(&[nv.clone()], 3, 1e-9).0;
            for k in 0..90 {
                let t = k as f64 * std::f64::consts::PI / 45.0;
                let v: Vec<f64> = (0..3).map(|i| t.cos() * basis[0][i] + t.sin() * basis[1][i]).collect();
                cands.push(normalized(&v).unwrap());
            }
        }
        let d = DirectionSet::from_candidates(3, 1.0, cands).unwrap();
        let decision = finite_plane_union_test(&d, 2, 4, 0.5, seed).unwrap();
        prop_assert!(decision.contained);
        prop_assert!(decision.planes.len() <= normals.len());
    }

    #[test]
    fn predicates_are_scale_invariant(a in unit3(), t in 1e-3f64..1e3) {
        for id in ["band_z", "polar_arcs", "two_planes", "axis_e1"] {
            let p = ConePredicate::by_id(id, 3).unwrap();
            let scaled: Vec<f64> = a.iter().map(|x| x * t).collect();
            prop_assert_eq!(p.contains(&a), p.contains(&scaled));
            prop_assert!((p.angle_to(&a) - p.angle_to(&scaled)).abs() < 1e-6);
        }
    }

    #[test]
    fn double_cone_membership_is_conic(phi in 0.0f64..6.3, up in any::<bool>(), s in 1e-3f64..1e2, lift in 1.1f64..2.0) {
        let desc = catalog_example("double_cone", None).unwrap();
        let z = if up { 1.0 } else { -1.0 };
        let on = [phi.cos() * s, phi.sin() * s, z * s];
        let off = [phi.cos() * s, phi.sin() * s, z * s * lift];
        prop_assert!(eval_membership(&desc, &on, 1e-9).unwrap());
        prop_assert!(!eval_membership(&desc, &off, 1e-9).unwrap());
    }

    #[test]
    fn canonical_floats_round_trip(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let text = canonical_json(&serde_json::json!({"x": x}));
        let token = text.split("\"x\": ").nth(1).unwrap().trim().trim_end_matches('}').trim();
        prop_assert_eq!(token.parse::<f64>().unwrap(), x);
    }

    #[test]
    fn printed_descriptions_parse_back(a in unit3()) {
        let text = format!(
            "union(subspace(3; ({}, {}, {})), implicit(3; x1^2 - x2*x3 = 0; x3 >= 0))",
            a[0], a[1], a[2]
        );
        let desc = parse_set_description(&text).unwrap();
        prop_assert_eq!(parse_set_description(&desc.to_string()).unwrap(), desc);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn decompose_is_a_partition(seed in any::<u64>(), which in 0usize..3) {
        let name = ["double_cone", "planes_and_cone", "whitney_umbrella"][which];
        let desc = catalog_example(name, None).unwrap();
        let sched = ScaleSchedule { r0: 1.0 / 16.0, band_count: 5, per_band: 300 };
        let cloud = sample_multiscale(&desc, &sched, seed).unwrap();
        let dec = decompose_by_local_dimension(&cloud, &DimParams::default_for(3)).unwrap();
        let classified: usize = dec.classes.values().map(|c| c.len()).sum();
        prop_assert_eq!(classified + dec.undetermined, cloud.len());
        let labels: usize = dec.labels.iter().map(|b| b.len()).sum();
        prop_assert_eq!(labels, cloud.len());
        prop_assert!(dec.lambda0.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(dec.m0, dec.lambda0.first().copied().unwrap_or(0));
    }
}
