use gdlab::acceptance::run_criterion;

const SEED: u64 = 7;

fn check(id: usize) {
    let r = run_criterion(id, SEED);
    println!("{r}");
    assert!(r.pass, "{r}");
}

#[test]
fn criterion_01_double_cone() {
    check(1);
}

#[test]
fn criterion_02_crossed_cones() {
    check(2);
}

#[test]
fn criterion_03_moment_curve() {
    check(3);
}

#[test]
fn criterion_04_planes_and_cone_split() {
    check(4);
}

#[test]
fn criterion_05_cone_product() {
    check(5);
}

#[test]
fn criterion_06_reversal() {
    check(6);
}

#[test]
fn criterion_07_sphere_curve_cone() {
    check(7);
}

#[test]
fn criterion_08_catalog_properties() {
    check(8);
}

#[test]
#[ignore = "slow: iterates a cone in R^7"]
fn criterion_09_non_stabilization_witness() {
    check(9);
}

#[test]
fn criterion_10_determinism() {
    check(10);
}
