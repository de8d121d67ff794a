//! Polynomial expressions over the coordinates `x1..xn` or the curve
//! parameter `t`, with an optional `sqrt` for semianalytic curve coordinates.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{GdError, Result};

/// Expression tree. `Var(i)` is the coordinate `x{i+1}`; `Param` is `t`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(usize),
    Param,
    Num(f64),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
    Sqrt(Box<Expr>),
}

impl Expr {
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn pow(a: Expr, e: u32) -> Expr {
        Expr::Pow(Box::new(a), e)
    }

    pub fn sqrt(a: Expr) -> Expr {
        Expr::Sqrt(Box::new(a))
    }

    pub fn contains_sqrt(&self) -> bool {
        match self {
            Expr::Sqrt(_) => true,
            Expr::Var(_) | Expr::Param | Expr::Num(_) => false,
            Expr::Neg(a) | Expr::Pow(a, _) => a.contains_sqrt(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.contains_sqrt() || b.contains_sqrt()
            }
        }
    }

    pub fn uses_param(&self) -> bool {
        match self {
            Expr::Param => true,
            Expr::Var(_) | Expr::Num(_) => false,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sqrt(a) => a.uses_param(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => a.uses_param() || b.uses_param(),
        }
    }

    /// Largest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Var(i) => Some(*i),
            Expr::Param | Expr::Num(_) => None,
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Sqrt(a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    /// Evaluates at coordinates `x` and parameter `t`.
    pub fn eval(&self, x: &[f64], t: f64) -> Result<f64> {
        Ok(match self {
            Expr::Var(i) => *x
                .get(*i)
                .ok_or_else(|| GdError::Domain(format!("variable x{} out of range", i + 1)))?,
            Expr::Param => t,
            Expr::Num(v) => *v,
            Expr::Neg(a) => -a.eval(x, t)?,
            Expr::Add(a, b) => a.eval(x, t)? + b.eval(x, t)?,
            Expr::Sub(a, b) => a.eval(x, t)? - b.eval(x, t)?,
            Expr::Mul(a, b) => a.eval(x, t)? * b.eval(x, t)?,
            Expr::Pow(a, e) => a.eval(x, t)?.powi(*e as i32),
            Expr::Sqrt(a) => {
                let v = a.eval(x, t)?;
                if v < 0.0 {
                    return Err(GdError::Domain(format!("sqrt of negative radicand {v}")));
                }
                v.sqrt()
            }
        })
    }

    /// Value and derivative with respect to `t` (forward-mode dual numbers).
    pub fn eval_dt(&self, t: f64) -> Result<(f64, f64)> {
        Ok(match self {
            Expr::Var(i) => {
                return Err(GdError::Domain(format!(
                    "variable x{} in a parametric expression",
                    i + 1
                )))
            }
            Expr::Param => (t, 1.0),
            Expr::Num(v) => (*v, 0.0),
            Expr::Neg(a) => {
                let (v, d) = a.eval_dt(t)?;
                (-v, -d)
            }
            Expr::Add(a, b) => {
                let (va, da) = a.eval_dt(t)?;
                let (vb, db) = b.eval_dt(t)?;
                (va + vb, da + db)
            }
            Expr::Sub(a, b) => {
                let (va, da) = a.eval_dt(t)?;
                let (vb, db) = b.eval_dt(t)?;
                (va - vb, da - db)
            }
            Expr::Mul(a, b) => {
                let (va, da) = a.eval_dt(t)?;
                let (vb, db) = b.eval_dt(t)?;
                (va * vb, da * vb + va * db)
            }
            Expr::Pow(a, e) => {
                let (v, d) = a.eval_dt(t)?;
                match e {
                    0 => (1.0, 0.0),
                    _ => (v.powi(*e as i32), *e as f64 * v.powi(*e as i32 - 1) * d),
                }
            }
            Expr::Sqrt(a) => {
                let (v, d) = a.eval_dt(t)?;
                if v < 0.0 {
                    return Err(GdError::Domain(format!("sqrt of negative radicand {v}")));
                }
                let s = v.sqrt();
                let ds = if s > 0.0 { d / (2.0 * s) } else { 0.0 };
                (s, ds)
            }
        })
    }

    /// Expands into a sparse polynomial over `nvars` coordinates.
    pub fn to_poly(&self, nvars: usize) -> Result<Poly> {
        Ok(match self {
            Expr::Var(i) => {
                if *i >= nvars {
                    return Err(GdError::Validation(format!(
                        "variable x{} exceeds ambient dimension {nvars}",
                        i + 1
                    )));
                }
                let mut e = vec![0u32; nvars];
                e[*i] = 1;
                Poly::monomial(1.0, e)
            }
            Expr::Param => {
                return Err(GdError::Validation("parameter t in an implicit equation".into()))
            }
            Expr::Num(v) => Poly::constant(*v, nvars),
            Expr::Neg(a) => a.to_poly(nvars)?.scale(-1.0),
            Expr::Add(a, b) => a.to_poly(nvars)?.add(&b.to_poly(nvars)?),
            Expr::Sub(a, b) => a.to_poly(nvars)?.add(&b.to_poly(nvars)?.scale(-1.0)),
            Expr::Mul(a, b) => a.to_poly(nvars)?.mul(&b.to_poly(nvars)?),
            Expr::Pow(a, e) => {
                let base = a.to_poly(nvars)?;
                let mut acc = Poly::constant(1.0, nvars);
                for _ in 0..*e {
                    acc = acc.mul(&base);
                }
                acc
            }
            Expr::Sqrt(_) => {
                return Err(GdError::SqrtInImplicit)
            }
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(v) if is_negative(*v) => 3,
            Expr::Pow(..) => 4,
            _ => 5,
        }
    }
}

fn is_negative(v: f64) -> bool {
    v.is_sign_negative()
}

pub(crate) fn format_num(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        if v == 0.0 && v.is_sign_negative() {
            "-0".to_string()
        } else {
            format!("{}", v as i64)
        }
    } else {
        format!("{v:?}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
            if parens {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        }
        let p = self.precedence();
        match self {
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Param => write!(f, "t"),
            Expr::Num(v) => write!(f, "{}", format_num(*v)),
            Expr::Neg(a) => {
                write!(f, "-")?;
                child(f, a, a.precedence() <= p)
            }
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                let op = match self {
                    Expr::Add(..) => " + ",
                    Expr::Sub(..) => " - ",
                    _ => "*",
                };
                child(f, a, a.precedence() < p)?;
                write!(f, "{op}")?;
                child(f, b, b.precedence() <= p)
            }
            Expr::Pow(a, e) => {
                child(f, a, a.precedence() <= p)?;
                write!(f, "^{e}")
            }
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
        }
    }
}

/// Sparse multivariate polynomial: exponent vector -> coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Poly {
    pub fn constant(c: f64, nvars: usize) -> Poly {
        Poly::monomial(c, vec![0; nvars])
    }

    pub fn monomial(c: f64, exps: Vec<u32>) -> Poly {
        let nvars = exps.len();
        let mut terms = BTreeMap::new();
        if c != 0.0 {
            terms.insert(exps, c);
        }
        Poly { nvars, terms }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, c)| (e.as_slice(), *c))
    }

    fn scale(mut self, s: f64) -> Poly {
        for c in self.terms.values_mut() {
            *c *= s;
        }
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    fn add(mut self, other: &Poly) -> Poly {
        for (e, c) in &other.terms {
            *self.terms.entry(e.clone()).or_insert(0.0) += c;
        }
        self.terms.retain(|_, c| *c != 0.0);
        self
    }

    fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly { nvars: self.nvars, terms: BTreeMap::new() };
        for (ea, ca) in &self.terms {
            for (eb, cb) in &other.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *out.terms.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        out.terms.retain(|_, c| *c != 0.0);
        out
    }

    /// Highest total degree (0 for the zero polynomial).
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    /// Lowest total degree among the nonzero terms.
    pub fn low_degree(&self) -> u32 {
        self.terms.keys().map(|e| e.iter().sum()).min().unwrap_or(0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product::<f64>())
            .sum()
    }

    /// Value and gradient at `x`.
    pub fn eval_grad(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut value = 0.0;
        for (e, c) in &self.terms {
            let mut prod = *c;
            for (&k, &v) in e.iter().zip(x) {
                prod *= v.powi(k as i32);
            }
            value += prod;
            for i in 0..self.nvars {
                let k = e[i];
                if k == 0 {
                    continue;
                }
                let mut d = c * k as f64;
                for (j, (&kj, &v)) in e.iter().zip(x).enumerate() {
                    let p = if j == i { kj - 1 } else { kj };
                    d *= v.powi(p as i32);
                }
                grad[i] += d;
            }
        }
        value
    }

    /// Hessian at `x`, row-major `nvars × nvars`.
    pub fn eval_hessian(&self, x: &[f64]) -> Vec<f64> {
        let n = self.nvars;
        let mut h = vec![0.0; n * n];
        for (e, c) in &self.terms {
            for i in 0..n {
                for j in i..n {
                    let (ki, kj) = (e[i], e[j]);
                    let coef = if i == j {
                        if ki < 2 {
                            continue;
                        }
                        (ki * (ki - 1)) as f64
                    } else {
                        if ki == 0 || kj == 0 {
                            continue;
                        }
                        (ki * kj) as f64
                    };
                    let mut d = c * coef;
                    for (l, (&kl, &v)) in e.iter().zip(x).enumerate() {
                        let p = kl - u32::from(l == i) - u32::from(l == j);
                        d *= v.powi(p as i32);
                    }
                    h[i * n + j] += d;
                    if i != j {
                        h[j * n + i] += d;
                    }
                }
            }
        }
        h
    }

    /// Sum of absolute monomial values, the natural magnitude of `eval` at `x`.
    pub fn magnitude(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| (c * e.iter().zip(x).map(|(&k, &v)| v.powi(k as i32)).product::<f64>()).abs())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hessian_matches_finite_differences() {
        // x1^2 * x2 - 3 x2^3 + x1 x3
        let e = Expr::add(
            Expr::sub(Expr::mul(Expr::pow(Expr::var(0), 2), Expr::var(1)), Expr::mul(Expr::num(3.0), Expr::pow(Expr::var(1), 3))),
            Expr::mul(Expr::var(0), Expr::var(2)),
        );
        let p = e.to_poly(3).unwrap();
        let x = [0.3, -0.7, 1.1];
        let h = p.eval_hessian(&x);
        let eps = 1e-5;
        for i in 0..3 {
            let mut xp = x;
            let mut xm = x;
            xp[i] += eps;
            xm[i] -= eps;
            let (mut gp, mut gm) = ([0.0; 3], [0.0; 3]);
            p.eval_grad(&xp, &mut gp);
            p.eval_grad(&xm, &mut gm);
            for j in 0..3 {
                let fd = (gp[j] - gm[j]) / (2.0 * eps);
                assert!((h[i * 3 + j] - fd).abs() < 1e-6, "{i} {j}");
            }
        }
    }

    #[test]
    fn poly_expansion_and_gradient() {
        // (x1 + x2)^2 - x3
        let e = Expr::sub(Expr::pow(Expr::add(Expr::var(0), Expr::var(1)), 2), Expr::var(2));
        let p = e.to_poly(3).unwrap();
        assert_eq!(p.degree(), 2);
        assert_eq!(p.low_degree(), 1);
        let x = [1.0, 2.0, 3.0];
        let mut g = [0.0; 3];
        let v = p.eval_grad(&x, &mut g);
        assert_eq!(v, 6.0);
        assert_eq!(g, [6.0, 6.0, -1.0]);
        assert_eq!(p.eval(&x), e.eval(&x, 0.0).unwrap());
    }

    #[test]
    fn sqrt_is_rejected_in_polynomials() {
        let e = Expr::sqrt(Expr::var(0));
        assert!(matches!(e.to_poly(1), Err(GdError::SqrtInImplicit)));
    }

    #[test]
    fn sqrt_domain_error() {
        let e = Expr::sqrt(Expr::sub(Expr::num(0.0), Expr::Param));
        assert!(e.eval(&[], 1.0).is_err());
        assert_eq!(e.eval(&[], -4.0).unwrap(), 2.0);
    }

    #[test]
    fn dual_derivative_matches_finite_difference() {
        // sqrt(1 - t^2 - t^4) * t^3
        let e = Expr::mul(
            Expr::sqrt(Expr::sub(
                Expr::sub(Expr::num(1.0), Expr::pow(Expr::Param, 2)),
                Expr::pow(Expr::Param, 4),
            )),
            Expr::pow(Expr::Param, 3),
        );
        let t = 0.3;
        let (v, d) = e.eval_dt(t).unwrap();
        let h = 1e-6;
        let fd = (e.eval(&[], t + h).unwrap() - e.eval(&[], t - h).unwrap()) / (2.0 * h);
        assert!((v - e.eval(&[], t).unwrap()).abs() < 1e-15);
        assert!((d - fd).abs() < 1e-8);
    }

    #[test]
    fn display_parenthesizes_by_precedence() {
        let e = Expr::sub(Expr::var(0), Expr::sub(Expr::var(1), Expr::var(2)));
        assert_eq!(e.to_string(), "x1 - (x2 - x3)");
        let e = Expr::pow(Expr::num(-2.0), 2);
        assert_eq!(e.to_string(), "(-2)^2");
        let e = Expr::Neg(Box::new(Expr::mul(Expr::var(0), Expr::var(1))));
        assert_eq!(e.to_string(), "-(x1*x2)");
    }
}
