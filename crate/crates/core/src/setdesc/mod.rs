//! Set descriptions: germs `A ⊂ R^n` at the origin given by implicit
//! polynomial systems, parametric curves, cones over spherical curves,
//! linear subspaces and their products and unions.

mod catalog;
mod membership;
mod parse;

use std::fmt;

use sha2::{Digest, Sha256};

use crate::error::{GdError, Result};
use crate::expr::{format_num, Expr};

pub use catalog::{catalog_example, catalog_names, genuine_dimension};
pub use membership::{distance_to_curve, eval_membership};
pub use parse::parse_set_description;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Lt,
    Le,
    Gt,
    Ge,
    Ne,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
            Relation::Ne => "!=",
        }
    }

    /// Whether `value REL 0` holds, with nonstrict relations relaxed by `slack`.
    pub fn holds(self, value: f64, slack: f64) -> bool {
        match self {
            Relation::Lt => value < 0.0,
            Relation::Le => value <= slack,
            Relation::Gt => value > 0.0,
            Relation::Ge => value >= -slack,
            Relation::Ne => value != 0.0,
        }
    }
}

/// Sign condition `expr REL 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub expr: Expr,
    pub rel: Relation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SetNode {
    Implicit { equations: Vec<Expr>, constraints: Vec<Constraint> },
    ParamCurve { coords: Vec<Expr>, domain: (f64, f64) },
    /// Half-cone `{s·γ(t) : s ≥ 0}` over a curve `γ` on the unit sphere.
    SphereConeOverCurve { coords: Vec<Expr>, domain: (f64, f64) },
    LinearSubspace { basis: Vec<Vec<f64>> },
    Product(Box<SetDescription>, Box<SetDescription>),
    Union(Vec<SetDescription>),
    Point0,
    Catalog { name: String, n: Option<usize>, expanded: Box<SetDescription> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetDescription {
    pub ambient_dim: usize,
    pub node: SetNode,
}

impl SetDescription {
    pub fn new(ambient_dim: usize, node: SetNode) -> Result<SetDescription> {
        let d = SetDescription { ambient_dim, node };
        d.validate()?;
        Ok(d)
    }

    pub fn point(n: usize) -> SetDescription {
        SetDescription { ambient_dim: n, node: SetNode::Point0 }
    }

    pub fn union(members: Vec<SetDescription>) -> Result<SetDescription> {
        let n = members
            .first()
            .ok_or_else(|| GdError::Validation("empty union".into()))?
            .ambient_dim;
        SetDescription::new(n, SetNode::Union(members))
    }

    pub fn product(left: SetDescription, right: SetDescription) -> Result<SetDescription> {
        SetDescription::new(
            left.ambient_dim + right.ambient_dim,
            SetNode::Product(Box::new(left), Box::new(right)),
        )
    }

    /// Follows catalog indirections to the underlying node.
    pub fn resolved(&self) -> &SetDescription {
        match &self.node {
            SetNode::Catalog { expanded, .. } => expanded.resolved(),
            _ => self,
        }
    }

    /// True when the germ is `{0}` by construction.
    pub fn is_point_germ(&self) -> bool {
        match &self.resolved().node {
            SetNode::Point0 => true,
            SetNode::Union(ms) => ms.iter().all(|m| m.is_point_germ()),
            SetNode::Product(a, b) => a.is_point_germ() && b.is_point_germ(),
            _ => false,
        }
    }

    pub fn contains_param_curve(&self) -> bool {
        match &self.node {
            SetNode::ParamCurve { .. } => true,
            SetNode::Product(a, b) => a.contains_param_curve() || b.contains_param_curve(),
            SetNode::Union(ms) => ms.iter().any(|m| m.contains_param_curve()),
            SetNode::Catalog { expanded, .. } => expanded.contains_param_curve(),
            _ => false,
        }
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.ambient_dim;
        if n == 0 {
            return Err(GdError::Validation("ambient dimension must be positive".into()));
        }
        match &self.node {
            SetNode::Implicit { equations, constraints } => {
                for e in equations.iter().chain(constraints.iter().map(|c| &c.expr)) {
                    if e.contains_sqrt() {
                        return Err(GdError::SqrtInImplicit);
                    }
                    if e.uses_param() {
                        return Err(GdError::Validation(
                            "parameter t used in an implicit description".into(),
                        ));
                    }
                    if let Some(i) = e.max_var() {
                        if i >= n {
                            return Err(GdError::DimensionMismatch(format!(
                                "x{} used in ambient dimension {n}",
                                i + 1
                            )));
                        }
                    }
                }
            }
            SetNode::ParamCurve { coords, domain } | SetNode::SphereConeOverCurve { coords, domain } => {
                if coords.len() != n {
                    return Err(GdError::DimensionMismatch(format!(
                        "{} coordinates for ambient dimension {n}",
                        coords.len()
                    )));
                }
                if coords.iter().any(|c| c.max_var().is_some()) {
                    return Err(GdError::Validation("curve coordinates may only use t".into()));
                }
                if !(domain.0.is_finite() && domain.1.is_finite() && domain.0 < domain.1) {
                    return Err(GdError::Validation(format!("bad domain {domain:?}")));
                }
                if matches!(self.node, SetNode::SphereConeOverCurve { .. }) {
                    for i in 0..32 {
                        let t = domain.0 + (i as f64 + 0.5) / 32.0 * (domain.1 - domain.0);
                        let mut s = 0.0;
                        for c in coords {
                            let v = c.eval(&[], t)?;
                            s += v * v;
                        }
                        if (s - 1.0).abs() > 1e-9 {
                            return Err(GdError::Validation(format!(
                                "spherical curve leaves the unit sphere at t = {t} (|γ|² = {s})"
                            )));
                        }
                    }
                }
            }
            SetNode::LinearSubspace { basis } => {
                if basis.is_empty() {
                    return Err(GdError::Validation("subspace needs at least one vector".into()));
                }
                for v in basis {
                    if v.len() != n {
                        return Err(GdError::DimensionMismatch(format!(
                            "basis vector of length {} in ambient dimension {n}",
                            v.len()
                        )));
                    }
                    if v.iter().all(|x| *x == 0.0) || v.iter().any(|x| !x.is_finite()) {
                        return Err(GdError::Validation("degenerate basis vector".into()));
                    }
                }
            }
            SetNode::Product(a, b) => {
                if a.ambient_dim + b.ambient_dim != n {
                    return Err(GdError::DimensionMismatch(format!(
                        "product of dimensions {} and {} declared as {n}",
                        a.ambient_dim, b.ambient_dim
                    )));
                }
                a.validate()?;
                b.validate()?;
            }
            SetNode::Union(members) => {
                if members.is_empty() {
                    return Err(GdError::Validation("empty union".into()));
                }
                for m in members {
                    if m.ambient_dim != n {
                        return Err(GdError::DimensionMismatch(format!(
                            "union member of dimension {} in union of dimension {n}",
                            m.ambient_dim
                        )));
                    }
                    m.validate()?;
                }
            }
            SetNode::Point0 => {}
            SetNode::Catalog { expanded, .. } => {
                if expanded.ambient_dim != n {
                    return Err(GdError::DimensionMismatch("catalog expansion".into()));
                }
                expanded.validate()?;
            }
        }
        Ok(())
    }

    /// Content hash of the canonical printing.
    pub fn content_hash(&self) -> u64 {
        let digest = Sha256::digest(self.to_string().as_bytes());
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T], sep: &str) -> fmt::Result {
    for (i, it) in items.iter().enumerate() {
        if i > 0 {
            write!(f, "{sep}")?;
        }
        write!(f, "{it}")?;
    }
    Ok(())
}

impl fmt::Display for SetDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.ambient_dim;
        match &self.node {
            SetNode::Implicit { equations, constraints } => {
                write!(f, "implicit({n}")?;
                for e in equations {
                    write!(f, "; {e} = 0")?;
                }
                for c in constraints {
                    write!(f, "; {} {} 0", c.expr, c.rel.symbol())?;
                }
                write!(f, ")")
            }
            SetNode::ParamCurve { coords, domain } | SetNode::SphereConeOverCurve { coords, domain } => {
                let head = if matches!(self.node, SetNode::ParamCurve { .. }) {
                    "curve"
                } else {
                    "spherecone"
                };
                write!(f, "{head}({n}; ")?;
                write_list(f, coords, ", ")?;
                write!(f, "; domain=({}, {}))", format_num(domain.0), format_num(domain.1))
            }
            SetNode::LinearSubspace { basis } => {
                write!(f, "subspace({n}; ")?;
                for (i, v) in basis.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    let parts: Vec<String> = v.iter().map(|x| format_num(*x)).collect();
                    write!(f, "({})", parts.join(", "))?;
                }
                write!(f, ")")
            }
            SetNode::Product(a, b) => write!(f, "product({a}, {b})"),
            SetNode::Union(ms) => {
                write!(f, "union(")?;
                write_list(f, ms, ", ")?;
                write!(f, ")")
            }
            SetNode::Point0 => write!(f, "point({n})"),
            SetNode::Catalog { name, n: Some(k), .. } => write!(f, "catalog({name}, {k})"),
            SetNode::Catalog { name, n: None, .. } => write!(f, "catalog({name})"),
        }
    }
}
