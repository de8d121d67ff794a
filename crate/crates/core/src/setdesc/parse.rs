use super::{catalog_example, Constraint, Relation, SetDescription, SetNode};
use crate::error::{GdError, Result};
use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Num(f64),
    LParen,
    RParen,
    Comma,
    Semi,
    Eq,
    Lt,
    Le,
    Gt,
    Ge,
    Ne,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    End,
}

struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, column, message: String| GdError::Syntax { line, column, message };
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        let two = if i + 1 < chars.len() { Some(chars[i + 1]) } else { None };
        let (tok, len) = match c {
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            ',' => (Tok::Comma, 1),
            ';' => (Tok::Semi, 1),
            '+' => (Tok::Plus, 1),
            '-' => (Tok::Minus, 1),
            '*' => (Tok::Star, 1),
            '/' => (Tok::Slash, 1),
            '^' => (Tok::Caret, 1),
            '=' => (Tok::Eq, 1),
            '<' if two == Some('=') => (Tok::Le, 2),
            '<' => (Tok::Lt, 1),
            '>' if two == Some('=') => (Tok::Ge, 2),
            '>' => (Tok::Gt, 1),
            '!' if two == Some('=') => (Tok::Ne, 2),
            c if c.is_ascii_digit() || c == '.' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_digit() || chars[j] == '.') {
                    j += 1;
                }
                if j < chars.len() && (chars[j] == 'e' || chars[j] == 'E') {
                    let mut k = j + 1;
                    if k < chars.len() && (chars[k] == '+' || chars[k] == '-') {
                        k += 1;
                    }
                    if k < chars.len() && chars[k].is_ascii_digit() {
                        while k < chars.len() && chars[k].is_ascii_digit() {
                            k += 1;
                        }
                        j = k;
                    }
                }
                let s: String = chars[i..j].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| err(l0, c0, format!("malformed number `{s}`")))?;
                (Tok::Num(v), j - i)
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_ascii_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                (Tok::Ident(chars[i..j].iter().collect()), j - i)
            }
            other => return Err(err(l0, c0, format!("unexpected character `{other}`"))),
        };
        out.push(Token { tok, line: l0, column: c0 });
        i += len;
        col += len;
    }
    out.push(Token { tok: Tok::End, line, column: col });
    Ok(out)
}

/// Whether an expression is being read in implicit (`x1..xn`) or curve (`t`) context.
#[derive(Clone, Copy, PartialEq)]
enum Ctx {
    Implicit,
    Curve,
    Constant,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T> {
        let t = &self.toks[self.pos];
        Err(GdError::Syntax { line: t.line, column: t.column, message: message.into() })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected {what}, found {:?}", self.peek()))
        }
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => self.error(format!("expected identifier, found {other:?}")),
        }
    }

    fn uint(&mut self) -> Result<usize> {
        match *self.peek() {
            Tok::Num(v) if v >= 0.0 && v.fract() == 0.0 => {
                self.bump();
                Ok(v as usize)
            }
            ref other => self.error(format!("expected integer, found {other:?}")),
        }
    }

    fn set(&mut self) -> Result<SetDescription> {
        let head = self.ident()?;
        self.expect(Tok::LParen, "`(`")?;
        let desc = match head.as_str() {
            "implicit" => {
                let n = self.uint()?;
                let mut equations = Vec::new();
                let mut constraints = Vec::new();
                while *self.peek() == Tok::Semi {
                    self.bump();
                    let lhs = self.expr(Ctx::Implicit)?;
                    let rel = match self.bump() {
                        Tok::Eq => None,
                        Tok::Lt => Some(Relation::Lt),
                        Tok::Le => Some(Relation::Le),
                        Tok::Gt => Some(Relation::Gt),
                        Tok::Ge => Some(Relation::Ge),
                        Tok::Ne => Some(Relation::Ne),
                        other => {
                            self.pos -= 1;
                            return self.error(format!("expected relation, found {other:?}"));
                        }
                    };
                    let rhs = self.expr(Ctx::Implicit)?;
                    let e = if rhs == Expr::Num(0.0) { lhs } else { Expr::sub(lhs, rhs) };
                    match rel {
                        None => equations.push(e),
                        Some(rel) => constraints.push(Constraint { expr: e, rel }),
                    }
                }
                SetDescription { ambient_dim: n, node: SetNode::Implicit { equations, constraints } }
            }
            "curve" | "spherecone" => {
                let n = self.uint()?;
                self.expect(Tok::Semi, "`;`")?;
                let mut coords = vec![self.expr(Ctx::Curve)?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    coords.push(self.expr(Ctx::Curve)?);
                }
                self.expect(Tok::Semi, "`;`")?;
                if self.ident()? != "domain" {
                    self.pos -= 1;
                    return self.error("expected `domain`");
                }
                self.expect(Tok::Eq, "`=`")?;
                self.expect(Tok::LParen, "`(`")?;
                let lo = self.constant()?;
                self.expect(Tok::Comma, "`,`")?;
                let hi = self.constant()?;
                self.expect(Tok::RParen, "`)`")?;
                let domain = (lo, hi);
                let node = if head == "curve" {
                    SetNode::ParamCurve { coords, domain }
                } else {
                    SetNode::SphereConeOverCurve { coords, domain }
                };
                SetDescription { ambient_dim: n, node }
            }
            "subspace" => {
                let n = self.uint()?;
                self.expect(Tok::Semi, "`;`")?;
                let mut basis = vec![self.vector()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    basis.push(self.vector()?);
                }
                SetDescription { ambient_dim: n, node: SetNode::LinearSubspace { basis } }
            }
            "product" => {
                let a = self.set()?;
                self.expect(Tok::Comma, "`,`")?;
                let b = self.set()?;
                SetDescription {
                    ambient_dim: a.ambient_dim + b.ambient_dim,
                    node: SetNode::Product(Box::new(a), Box::new(b)),
                }
            }
            "union" => {
                let mut members = vec![self.set()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    members.push(self.set()?);
                }
                SetDescription { ambient_dim: members[0].ambient_dim, node: SetNode::Union(members) }
            }
            "point" => {
                let n = self.uint()?;
                SetDescription::point(n)
            }
            "catalog" => {
                let name = self.ident()?;
                let n = if *self.peek() == Tok::Comma {
                    self.bump();
                    Some(self.uint()?)
                } else {
                    None
                };
                let expanded = catalog_example(&name, n)?;
                SetDescription {
                    ambient_dim: expanded.ambient_dim,
                    node: SetNode::Catalog { name, n, expanded: Box::new(expanded) },
                }
            }
            other => {
                self.pos -= 2;
                return self.error(format!("unknown set constructor `{other}`"));
            }
        };
        self.expect(Tok::RParen, "`)`")?;
        Ok(desc)
    }

    fn vector(&mut self) -> Result<Vec<f64>> {
        self.expect(Tok::LParen, "`(`")?;
        let mut v = vec![self.constant()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            v.push(self.constant()?);
        }
        self.expect(Tok::RParen, "`)`")?;
        Ok(v)
    }

    fn constant(&mut self) -> Result<f64> {
        let e = self.expr(Ctx::Constant)?;
        e.eval(&[], 0.0)
    }

    fn expr(&mut self, ctx: Ctx) -> Result<Expr> {
        let mut acc = self.term(ctx)?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = Expr::add(acc, self.term(ctx)?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = Expr::sub(acc, self.term(ctx)?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self, ctx: Ctx) -> Result<Expr> {
        let mut acc = self.unary(ctx)?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    acc = Expr::mul(acc, self.unary(ctx)?);
                }
                Tok::Slash => {
                    self.bump();
                    let d = match self.unary(ctx)? {
                        Expr::Num(d) if d != 0.0 => d,
                        _ => {
                            self.pos -= 1;
                            return self.error("division is only allowed by a nonzero number");
                        }
                    };
                    acc = match acc {
                        Expr::Num(v) => Expr::Num(v / d),
                        other => Expr::mul(other, Expr::Num(1.0 / d)),
                    };
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self, ctx: Ctx) -> Result<Expr> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(match self.unary(ctx)? {
                Expr::Num(v) => Expr::Num(-v),
                e => Expr::Neg(Box::new(e)),
            });
        }
        self.power(ctx)
    }

    fn power(&mut self, ctx: Ctx) -> Result<Expr> {
        let base = self.atom(ctx)?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let e = self.uint()?;
            if e > u32::MAX as usize {
                return self.error("exponent too large");
            }
            return Ok(Expr::pow(base, e as u32));
        }
        Ok(base)
    }

    fn atom(&mut self, ctx: Ctx) -> Result<Expr> {
        match self.peek().clone() {
            Tok::Num(v) => {
                self.bump();
                Ok(Expr::Num(v))
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr(ctx)?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == "sqrt" {
                    self.bump();
                    if ctx == Ctx::Implicit {
                        return Err(GdError::SqrtInImplicit);
                    }
                    self.expect(Tok::LParen, "`(`")?;
                    let e = self.expr(ctx)?;
                    self.expect(Tok::RParen, "`)`")?;
                    return Ok(Expr::sqrt(e));
                }
                if name == "t" && ctx == Ctx::Curve {
                    self.bump();
                    return Ok(Expr::Param);
                }
                if ctx == Ctx::Implicit {
                    if let Some(idx) = name.strip_prefix('x').and_then(|d| d.parse::<usize>().ok()) {
                        if idx >= 1 {
                            self.bump();
                            return Ok(Expr::Var(idx - 1));
                        }
                    }
                }
                self.error(format!("unknown symbol `{name}` here"))
            }
            other => self.error(format!("unexpected {other:?} in expression")),
        }
    }
}

/// Parses and validates a set description.
pub fn parse_set_description(text: &str) -> Result<SetDescription> {
    let mut p = Parser { toks: lex(text)?, pos: 0 };
    let d = p.set()?;
    if *p.peek() != Tok::End {
        return p.error("trailing input after set description");
    }
    d.validate()?;
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_cone_with_constraint() {
        let d = parse_set_description("implicit(3; x1^2 + x2^2 - x3^2 = 0; x3 > 0)").unwrap();
        assert_eq!(d.ambient_dim, 3);
        match &d.node {
            SetNode::Implicit { equations, constraints } => {
                assert_eq!(equations.len(), 1);
                assert_eq!(constraints.len(), 1);
                assert_eq!(constraints[0].rel, Relation::Gt);
            }
            other => panic!("unexpected node {other:?}"),
        }
        assert_eq!(d.to_string(), "implicit(3; x1^2 + x2^2 - x3^2 = 0; x3 > 0)");
    }

    #[test]
    fn parses_point_and_product() {
        let d = parse_set_description("point(1)").unwrap();
        assert_eq!(d.node, SetNode::Point0);
        assert_eq!(d.ambient_dim, 1);
        let d = parse_set_description(
            "product(implicit(3; x1^2+x2^2-x3^4 = 0), implicit(3; x1^2+x2^2-x3^4 = 0))",
        )
        .unwrap();
        assert_eq!(d.ambient_dim, 6);
        assert!(matches!(d.node, SetNode::Product(..)));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_set_description("implicit(3;\n x1 + = 0)").unwrap_err();
        match err {
            GdError::Syntax { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 7);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn dimension_and_sqrt_errors() {
        assert!(matches!(
            parse_set_description("implicit(2; x3 = 0)"),
            Err(GdError::DimensionMismatch(_))
        ));
        assert!(matches!(
            parse_set_description("implicit(2; sqrt(x1) - x2 = 0)"),
            Err(GdError::SqrtInImplicit)
        ));
        assert!(matches!(
            parse_set_description("union(point(2), point(3))"),
            Err(GdError::DimensionMismatch(_))
        ));
        assert!(matches!(
            parse_set_description("curve(3; t, t^2; domain=(-1, 1))"),
            Err(GdError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn curves_and_subspaces() {
        let d = parse_set_description("curve(2; t, t^3/2; domain=(-1/2, 1/2))").unwrap();
        match &d.node {
            SetNode::ParamCurve { domain, .. } => assert_eq!(*domain, (-0.5, 0.5)),
            other => panic!("unexpected node {other:?}"),
        }
        let d = parse_set_description("subspace(3; (1, 0, 0), (0, 1, 0))").unwrap();
        assert_eq!(d.to_string(), "subspace(3; (1, 0, 0), (0, 1, 0))");
        assert!(parse_set_description("spherecone(2; t, t; domain=(0, 1))").is_err());
        assert!(parse_set_description("spherecone(2; t, sqrt(1 - t^2); domain=(-0.5, 0.5))").is_ok());
    }

    #[test]
    fn catalog_reference_round_trips() {
        let d = parse_set_description("catalog(moment_curve, 4)").unwrap();
        assert_eq!(d.ambient_dim, 4);
        assert_eq!(d.to_string(), "catalog(moment_curve, 4)");
        assert_eq!(parse_set_description(&d.to_string()).unwrap(), d);
    }
}
