use super::{SetDescription, SetNode};
use crate::error::{GdError, Result};
use crate::expr::Expr;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn curve_point(coords: &[Expr], t: f64, out: &mut [f64]) -> Result<()> {
    for (o, c) in out.iter_mut().zip(coords) {
        *o = c.eval(&[], t)?;
    }
    Ok(())
}

fn dist_at(coords: &[Expr], t: f64, p: &[f64], buf: &mut [f64]) -> f64 {
    match curve_point(coords, t, buf) {
        Ok(()) => buf.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        Err(_) => f64::INFINITY,
    }
}

/// Euclidean distance from `p` to the image of the curve over `domain`,
/// by a dense parameter grid refined with golden-section search.
pub fn distance_to_curve(coords: &[Expr], domain: (f64, f64), p: &[f64]) -> Result<f64> {
    if coords.len() != p.len() {
        return Err(GdError::DimensionMismatch(format!(
            "point of length {} for a curve in R^{}",
            p.len(),
            coords.len()
        )));
    }
    const GRID: usize = 2048;
    let (lo, hi) = domain;
    let h = (hi - lo) / GRID as f64;
    let mut buf = vec![0.0; p.len()];
    let vals: Vec<f64> = (0..=GRID).map(|i| dist_at(coords, lo + i as f64 * h, p, &mut buf)).collect();
    let mut order: Vec<usize> = (0..=GRID).collect();
    order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
    let mut best = vals[order[0]];
    let invphi = (5f64.sqrt() - 1.0) / 2.0;
    for &i in order.iter().take(4) {
        let mut a = lo + (i.saturating_sub(1)) as f64 * h;
        let mut b = lo + (i + 1).min(GRID) as f64 * h;
        let mut c = b - invphi * (b - a);
        let mut d = a + invphi * (b - a);
        let mut fc = dist_at(coords, c, p, &mut buf);
        let mut fd = dist_at(coords, d, p, &mut buf);
        for _ in 0..80 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - invphi * (b - a);
                fc = dist_at(coords, c, p, &mut buf);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + invphi * (b - a);
                fd = dist_at(coords, d, p, &mut buf);
            }
        }
        best = best.min(fc).min(fd);
    }
    Ok(best)
}

/// Membership of `point` in the described set up to the degree-weighted tolerance
/// `|f(p)| ≤ tol·(1 + ‖p‖^deg)`.
pub fn eval_membership(desc: &SetDescription, point: &[f64], tol: f64) -> Result<bool> {
    let n = desc.ambient_dim;
    if point.len() != n {
        return Err(GdError::DimensionMismatch(format!(
            "point of length {} in ambient dimension {n}",
            point.len()
        )));
    }
    let r = norm(point);
    match &desc.node {
        SetNode::Implicit { equations, constraints } => {
            for e in equations {
                let p = e.to_poly(n)?;
                let slack = tol * (1.0 + r.powi(p.degree() as i32));
                if p.eval(point).abs() > slack {
                    return Ok(false);
                }
            }
            for c in constraints {
                let p = c.expr.to_poly(n)?;
                let slack = tol * (1.0 + r.powi(p.degree() as i32));
                if !c.rel.holds(p.eval(point), slack) {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        SetNode::ParamCurve { .. } => Err(GdError::Unsupported(
            "membership of a parametric curve; use distance_to_curve".into(),
        )),
        SetNode::SphereConeOverCurve { coords, domain } => {
            if r == 0.0 {
                return Ok(true);
            }
            let unit: Vec<f64> = point.iter().map(|x| x / r).collect();
            Ok(r * distance_to_curve(coords, *domain, &unit)? <= tol * (1.0 + r))
        }
        SetNode::LinearSubspace { basis } => {
            let q = crate::linalg::orthonormalize(basis);
            let mut resid = point.to_vec();
            for b in &q {
                let c: f64 = b.iter().zip(point).map(|(x, y)| x * y).sum();
                for (ri, bi) in resid.iter_mut().zip(b) {
                    *ri -= c * bi;
                }
            }
            Ok(norm(&resid) <= tol * (1.0 + r))
        }
        SetNode::Product(a, b) => {
            let (pa, pb) = point.split_at(a.ambient_dim);
            Ok(eval_membership(a, pa, tol)? && eval_membership(b, pb, tol)?)
        }
        SetNode::Union(ms) => {
            for m in ms {
                if eval_membership(m, point, tol)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        SetNode::Point0 => Ok(r <= tol),
        SetNode::Catalog { expanded, .. } => eval_membership(expanded, point, tol),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setdesc::catalog_example;

    #[test]
    fn double_cone_membership() {
        let d = catalog_example("double_cone", None).unwrap();
        assert!(eval_membership(&d, &[1.0, 0.0, 1.0], 1e-9).unwrap());
        assert!(!eval_membership(&d, &[1.0, 0.0, 0.5], 1e-9).unwrap());
    }

    #[test]
    fn planes_and_cone_plane_branch() {
        let d = catalog_example("planes_and_cone", None).unwrap();
        assert!(eval_membership(&d, &[0.0, 0.1, 7.0], 1e-9).unwrap());
    }

    #[test]
    fn curve_distance() {
        let d = catalog_example("moment_curve", Some(3)).unwrap();
        let coords = match &d.node {
            SetNode::ParamCurve { coords, .. } => coords.clone(),
            _ => unreachable!(),
        };
        let t: f64 = 0.123;
        let on = [t, t * t, t * t * t];
        assert!(distance_to_curve(&coords, (-0.5, 0.5), &on).unwrap() < 1e-12);
        let off = [0.0, 0.0, 0.1];
        let dd = distance_to_curve(&coords, (-0.5, 0.5), &off).unwrap();
        assert!((dd - 0.1).abs() < 1e-3, "{dd}");
        assert!(eval_membership(&d, &on, 1e-9).is_err());
    }

    #[test]
    fn sphere_cone_membership() {
        let d = catalog_example("sphere_curve_cone", Some(3)).unwrap();
        let t: f64 = 0.2;
        let g = [t, t * t, (1.0 - t * t - t.powi(4)).sqrt()];
        let p: Vec<f64> = g.iter().map(|x| 0.03 * x).collect();
        assert!(eval_membership(&d, &p, 1e-9).unwrap());
        assert!(!eval_membership(&d, &[0.0, 0.0, -0.03], 1e-9).unwrap());
    }
}
