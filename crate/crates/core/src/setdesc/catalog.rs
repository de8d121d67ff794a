use super::{parse_set_description, SetDescription};
use crate::error::{GdError, Result};

const NAMES: [&str; 9] = [
    "double_cone",
    "crossed_cones",
    "moment_curve",
    "planes_and_cone",
    "reversal",
    "cone_product",
    "sphere_curve_cone",
    "whitney_umbrella",
    "point",
];

pub fn catalog_names() -> &'static [&'static str] {
    &NAMES
}

/// Default and admissible ambient dimension of a catalog family.
fn admissible(name: &str, n: Option<usize>) -> Result<usize> {
    let bad = |n| GdError::InadmissibleDimension { name: name.to_string(), n };
    let fixed = |k: usize| match n {
        None => Ok(k),
        Some(m) if m == k => Ok(k),
        Some(m) => Err(bad(m)),
    };
    match name {
        "double_cone" | "crossed_cones" | "planes_and_cone" | "whitney_umbrella" => fixed(3),
        "reversal" | "cone_product" => fixed(6),
        "moment_curve" => match n {
            None => Ok(3),
            Some(m) if m >= 2 => Ok(m),
            Some(m) => Err(bad(m)),
        },
        "sphere_curve_cone" => match n {
            None => Ok(4),
            Some(m) if m >= 3 => Ok(m),
            Some(m) => Err(bad(m)),
        },
        "point" => match n {
            None => Ok(1),
            Some(m) if m >= 1 => Ok(m),
            Some(m) => Err(bad(m)),
        },
        other => Err(GdError::UnknownCatalog(other.to_string())),
    }
}

fn text(name: &str, n: usize) -> String {
    match name {
        "double_cone" => "union(implicit(3; x1^2 + x2^2 - x3^2 = 0; x3 > 0), \
                          implicit(3; x1^2 + x2^2 - x3^2 = 0; x3 < 0))"
            .into(),
        "crossed_cones" => "union(implicit(3; 2*x1^2 + 2*x2^2 - x3^2 = 0; x3 > 0), \
                            implicit(3; 2*x1^2 + 2*x3^2 - x2^2 = 0; x2 > 0))"
            .into(),
        "moment_curve" => {
            let coords: Vec<String> =
                (1..=n).map(|i| if i == 1 { "t".into() } else { format!("t^{i}") }).collect();
            format!("curve({n}; {}; domain=(-0.5, 0.5))", coords.join(", "))
        }
        "planes_and_cone" => "implicit(3; x1*x2*(x1^2 + x2^2 - x3^2) = 0)".into(),
        // x·((x²+y²−z⁴)² + (u²+v²−w⁴)²) = 0, written as the union of its two
        // real branches so every component has a regular defining system.
        "reversal" => "union(implicit(6; x1 = 0), \
                       implicit(6; x1^2 + x2^2 - x3^4 = 0; x4^2 + x5^2 - x6^4 = 0))"
            .into(),
        "cone_product" => "product(implicit(3; x1^2 + x2^2 - x3^4 = 0), \
                           implicit(3; x1^2 + x2^2 - x3^4 = 0))"
            .into(),
        "sphere_curve_cone" => {
            let mut coords: Vec<String> =
                (1..n).map(|i| if i == 1 { "t".into() } else { format!("t^{i}") }).collect();
            let squares: Vec<String> = (1..n).map(|i| format!("t^{}", 2 * i)).collect();
            coords.push(format!("sqrt(1 - ({}))", squares.join(" + ")));
            format!("spherecone({n}; {}; domain=(-0.5, 0.5))", coords.join(", "))
        }
        "whitney_umbrella" => "implicit(3; x1^2 - x2^2*x3 = 0)".into(),
        "point" => format!("point({n})"),
        _ => unreachable!("checked by admissible"),
    }
}

/// Expands a catalog family into its explicit description.
pub fn catalog_example(name: &str, n: Option<usize>) -> Result<SetDescription> {
    let n = admissible(name, n)?;
    parse_set_description(&text(name, n))
}

/// Dimension `k` for families that are genuinely `k`-dimensional at every point,
/// `None` for mixed-dimensional ones.
pub fn genuine_dimension(name: &str, n: Option<usize>) -> Option<usize> {
    admissible(name, n).ok()?;
    match name {
        "double_cone" | "crossed_cones" | "planes_and_cone" | "sphere_curve_cone" => Some(2),
        "moment_curve" => Some(1),
        "cone_product" => Some(4),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setdesc::SetNode;

    #[test]
    fn every_entry_validates() {
        for name in catalog_names() {
            let d = catalog_example(name, None).unwrap();
            d.validate().unwrap();
        }
        for n in 2..8 {
            assert_eq!(catalog_example("moment_curve", Some(n)).unwrap().ambient_dim, n);
        }
        for n in 3..8 {
            catalog_example("sphere_curve_cone", Some(n)).unwrap().validate().unwrap();
        }
    }

    #[test]
    fn rejects_unknown_and_inadmissible() {
        assert!(matches!(catalog_example("torus", None), Err(GdError::UnknownCatalog(_))));
        assert!(matches!(
            catalog_example("double_cone", Some(4)),
            Err(GdError::InadmissibleDimension { .. })
        ));
        assert!(matches!(
            catalog_example("sphere_curve_cone", Some(2)),
            Err(GdError::InadmissibleDimension { .. })
        ));
    }

    #[test]
    fn moment_curve_shape() {
        let d = catalog_example("moment_curve", Some(4)).unwrap();
        assert_eq!(d.to_string(), "curve(4; t, t^2, t^3, t^4; domain=(-0.5, 0.5))");
        let d = catalog_example("double_cone", None).unwrap();
        assert!(matches!(d.node, SetNode::Union(ref m) if m.len() == 2));
    }
}
