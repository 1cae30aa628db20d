//! Expression trees for profiles and their text format.
//!
//! Grammar (whitespace is ignored):
//!
//! ```text
//! sum    := term (('+' | '-') term)*
//! term   := coef '*' atom | atom
//! coef   := NUMBER | NUMBER 'i' | '[' NUMBER ',' NUMBER ']'
//! atom   := 'zero' | 'psi' | 'd1(' sum ')' | 'd2(' sum ')'
//!         | 'affine(' sum ',' NUMBER ',' NUMBER ')'
//!         | 'lincomb(' sum ')' | 'box(' NUMBER ',' NUMBER ',' NUMBER ')'
//!         | 'antideriv(' sum ')' | '(' sum ')'
//! ```
//!
//! `affine(p, s, c)` is x ↦ p((x - s)/c); `box(h, a, w)` is h times the
//! indicator of [-a, a] mollified by a ψ-bump of half-width w.

use super::bump::{self, MAX_DERIVATIVE};
use crate::error::{Error, Result};
use crate::quadrature::{gl16, GaussLegendre};
use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

#[derive(Debug, Clone)]
pub enum Expr {
    Zero,
    /// k-th derivative of the standard bump.
    Psi(u8),
    Affine {
        inner: Box<Expr>,
        shift: f64,
        scale: f64,
    },
    LinComb(Vec<(Complex64, Expr)>),
    SmoothBox {
        height: Complex64,
        half_width: f64,
        width: f64,
    },
    /// Numerical antiderivative of a zero-mean expression.
    Cumulative(Arc<CumulativeRule>),
}

#[derive(Debug)]
pub struct CumulativeRule {
    pub integrand: Expr,
    edges: Vec<f64>,
    prefix: Vec<Complex64>,
}

const CUMULATIVE_PANELS: usize = 256;

impl CumulativeRule {
    pub fn new(integrand: Expr) -> Self {
        let (a, b) = integrand.support();
        let rule = GaussLegendre::new(24);
        let h = (b - a) / CUMULATIVE_PANELS as f64;
        let edges: Vec<f64> = (0..=CUMULATIVE_PANELS).map(|k| a + h * k as f64).collect();
        let mut prefix = vec![Complex64::new(0.0, 0.0); CUMULATIVE_PANELS + 1];
        for k in 0..CUMULATIVE_PANELS {
            prefix[k + 1] = prefix[k] + rule.integrate(edges[k], edges[k + 1], |x| integrand.eval(x));
        }
        CumulativeRule {
            integrand,
            edges,
            prefix,
        }
    }

    fn eval(&self, x: f64) -> Complex64 {
        let a = self.edges[0];
        let b = *self.edges.last().unwrap();
        if x <= a || x >= b {
            return Complex64::new(0.0, 0.0);
        }
        let h = (b - a) / CUMULATIVE_PANELS as f64;
        let k = (((x - a) / h).floor() as usize).min(CUMULATIVE_PANELS - 1);
        self.prefix[k] + gl16().integrate(self.edges[k], x, |t| self.integrand.eval(t))
    }
}

impl Expr {
    pub fn support(&self) -> (f64, f64) {
        match self {
            Expr::Zero => (0.0, 0.0),
            Expr::Psi(_) => (-1.0, 1.0),
            Expr::Affine {
                inner,
                shift,
                scale,
            } => {
                let (a, b) = inner.support();
                let (p, q) = (shift + scale * a, shift + scale * b);
                (p.min(q), p.max(q))
            }
            Expr::LinComb(terms) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for (_, t) in terms {
                    if matches!(t, Expr::Zero) {
                        continue;
                    }
                    let (a, b) = t.support();
                    lo = lo.min(a);
                    hi = hi.max(b);
                }
                if lo > hi {
                    (0.0, 0.0)
                } else {
                    (lo, hi)
                }
            }
            Expr::SmoothBox {
                half_width, width, ..
            } => (-half_width - width, half_width + width),
            Expr::Cumulative(rule) => rule.integrand.support(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Expr::Zero => true,
            Expr::LinComb(t) => t.iter().all(|(c, e)| *c == Complex64::new(0.0, 0.0) || e.is_zero()),
            Expr::Affine { inner, .. } => inner.is_zero(),
            Expr::SmoothBox { height, .. } => height.norm() == 0.0,
            _ => false,
        }
    }

    pub fn is_real(&self) -> bool {
        match self {
            Expr::Zero | Expr::Psi(_) => true,
            Expr::Affine { inner, .. } => inner.is_real(),
            Expr::LinComb(t) => t.iter().all(|(c, e)| c.im == 0.0 && e.is_real()),
            Expr::SmoothBox { height, .. } => height.im == 0.0,
            Expr::Cumulative(r) => r.integrand.is_real(),
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        match self {
            Expr::Zero => Complex64::new(0.0, 0.0),
            Expr::Psi(k) => Complex64::new(bump::psi_derivative(*k, x), 0.0),
            Expr::Affine {
                inner,
                shift,
                scale,
            } => inner.eval((x - shift) / scale),
            Expr::LinComb(terms) => terms.iter().map(|(c, e)| c * e.eval(x)).sum(),
            Expr::SmoothBox {
                height,
                half_width,
                width,
            } => {
                let lo = (x + half_width) / width;
                let hi = (x - half_width) / width;
                if lo <= -1.0 || hi >= 1.0 {
                    return Complex64::new(0.0, 0.0);
                }
                if lo >= 1.0 && hi <= -1.0 {
                    return *height;
                }
                height * (bump::smooth_step(lo) - bump::smooth_step(hi))
            }
            Expr::Cumulative(rule) => rule.eval(x),
        }
    }

    pub fn derivative(&self) -> Result<Expr> {
        Ok(match self {
            Expr::Zero => Expr::Zero,
            Expr::Psi(k) => {
                if *k >= MAX_DERIVATIVE {
                    return Err(Error::Capability(format!(
                        "derivatives of psi beyond order {MAX_DERIVATIVE}"
                    )));
                }
                Expr::Psi(k + 1)
            }
            Expr::Affine {
                inner,
                shift,
                scale,
            } => Expr::LinComb(vec![(
                Complex64::new(1.0 / scale, 0.0),
                Expr::Affine {
                    inner: Box::new(inner.derivative()?),
                    shift: *shift,
                    scale: *scale,
                },
            )]),
            Expr::LinComb(terms) => Expr::LinComb(
                terms
                    .iter()
                    .map(|(c, e)| Ok((*c, e.derivative()?)))
                    .collect::<Result<Vec<_>>>()?,
            ),
            Expr::SmoothBox {
                height,
                half_width,
                width,
            } => {
                let c = height / (width * bump::psi_mass());
                Expr::LinComb(vec![
                    (
                        c,
                        Expr::Affine {
                            inner: Box::new(Expr::Psi(0)),
                            shift: -half_width,
                            scale: *width,
                        },
                    ),
                    (
                        -c,
                        Expr::Affine {
                            inner: Box::new(Expr::Psi(0)),
                            shift: *half_width,
                            scale: *width,
                        },
                    ),
                ])
            }
            Expr::Cumulative(rule) => rule.integrand.clone(),
        })
    }

    /// Exact antiderivative when every summand is itself a derivative;
    /// `None` when a numerical rule is needed.
    pub fn exact_antiderivative(&self) -> Option<Expr> {
        match self {
            Expr::Zero => Some(Expr::Zero),
            Expr::Psi(0) => None,
            Expr::Psi(k) => Some(Expr::Psi(k - 1)),
            Expr::Affine {
                inner,
                shift,
                scale,
            } => inner.exact_antiderivative().map(|a| {
                Expr::LinComb(vec![(
                    Complex64::new(*scale, 0.0),
                    Expr::Affine {
                        inner: Box::new(a),
                        shift: *shift,
                        scale: *scale,
                    },
                )])
            }),
            Expr::LinComb(terms) => terms
                .iter()
                .map(|(c, e)| e.exact_antiderivative().map(|a| (*c, a)))
                .collect::<Option<Vec<_>>>()
                .map(Expr::LinComb),
            Expr::SmoothBox { .. } | Expr::Cumulative(_) => None,
        }
    }

    /// Fourier transform ∫ e^{-iξx} p(x) dx assembled from the closed-form
    /// rules for each node (ψ̂ itself by quadrature).
    pub fn fourier(&self, xi: f64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        match self {
            Expr::Zero => Complex64::new(0.0, 0.0),
            Expr::Psi(k) => (i * xi).powu(*k as u32) * bump::psi_hat(xi),
            Expr::Affine {
                inner,
                shift,
                scale,
            } => (-i * xi * shift).exp() * scale.abs() * inner.fourier(scale * xi),
            Expr::LinComb(terms) => terms.iter().map(|(c, e)| c * e.fourier(xi)).sum(),
            Expr::SmoothBox {
                height,
                half_width,
                width,
            } => {
                let box_hat = if xi.abs() < 1e-8 {
                    2.0 * half_width * (1.0 - (half_width * xi).powi(2) / 6.0)
                } else {
                    2.0 * (half_width * xi).sin() / xi
                };
                height * box_hat * bump::psi_hat(width * xi) / bump::psi_mass()
            }
            Expr::Cumulative(rule) => {
                // Q̂ = p̂/(iξ); near ξ = 0 fall back to direct quadrature.
                if xi.abs() < 1e-3 {
                    let (a, b) = rule.integrand.support();
                    crate::quadrature::adaptive(a, b, 1e-14, 16, |x| {
                        rule.eval(x) * (-i * xi * x).exp()
                    })
                } else {
                    rule.integrand.fourier(xi) / (i * xi)
                }
            }
        }
    }
}

fn fmt_num(x: f64) -> String {
    format!("{x:?}")
}

fn fmt_coef(c: &Complex64) -> String {
    if c.im == 0.0 {
        fmt_num(c.re)
    } else if c.re == 0.0 {
        format!("{}i", fmt_num(c.im))
    } else {
        format!("[{},{}]", fmt_num(c.re), fmt_num(c.im))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Zero => write!(f, "zero"),
            Expr::Psi(0) => write!(f, "psi"),
            Expr::Psi(k) => {
                // nested d1/d2 wrappers reproduce the order
                let mut s = String::from("psi");
                let mut k = *k;
                while k > 0 {
                    if k >= 2 {
                        s = format!("d2({s})");
                        k -= 2;
                    } else {
                        s = format!("d1({s})");
                        k -= 1;
                    }
                }
                write!(f, "{s}")
            }
            Expr::Affine {
                inner,
                shift,
                scale,
            } => write!(f, "affine({inner},{},{})", fmt_num(*shift), fmt_num(*scale)),
            Expr::LinComb(terms) => {
                write!(f, "lincomb(")?;
                for (n, (c, e)) in terms.iter().enumerate() {
                    if n > 0 {
                        write!(f, "+")?;
                    }
                    write!(f, "{}*{}", fmt_coef(c), e)?;
                }
                write!(f, ")")
            }
            Expr::SmoothBox {
                height,
                half_width,
                width,
            } => write!(
                f,
                "box({},{},{})",
                fmt_coef(height),
                fmt_num(*half_width),
                fmt_num(*width)
            ),
            Expr::Cumulative(rule) => write!(f, "antideriv({})", rule.integrand),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let end = self.pos + kw.len();
        if end <= self.src.len() && &self.src[self.pos..end] == kw.as_bytes() {
            let next = self.src.get(end).copied();
            if next.map_or(true, |c| !c.is_ascii_alphanumeric()) {
                self.pos = end;
                return true;
            }
        }
        false
    }

    fn number(&mut self) -> Result<f64> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let exp_sign = (c == b'-' || c == b'+')
                && self.pos > start
                && matches!(self.src[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else if (c == b'-' || c == b'+') && self.pos == start {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        text.parse::<f64>().or_else(|_| {
            self.pos = start;
            self.err(format!("invalid number '{text}'"))
        })
    }

    fn coefficient(&mut self) -> Result<Option<Complex64>> {
        match self.peek() {
            Some(b'[') => {
                self.pos += 1;
                let re = self.number()?;
                self.expect(b',')?;
                let im = self.number()?;
                self.expect(b']')?;
                Ok(Some(Complex64::new(re, im)))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let v = self.number()?;
                if self.src.get(self.pos) == Some(&b'i') {
                    self.pos += 1;
                    Ok(Some(Complex64::new(0.0, v)))
                } else {
                    Ok(Some(Complex64::new(v, 0.0)))
                }
            }
            _ => Ok(None),
        }
    }

    fn sum(&mut self) -> Result<Expr> {
        let mut terms = Vec::new();
        let mut sign = 1.0;
        if self.peek() == Some(b'-') {
            self.pos += 1;
            sign = -1.0;
        }
        loop {
            let (c, e) = self.term()?;
            terms.push((c * sign, e));
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    sign = 1.0;
                }
                Some(b'-') => {
                    self.pos += 1;
                    sign = -1.0;
                }
                _ => break,
            }
        }
        if terms.len() == 1 && terms[0].0 == Complex64::new(1.0, 0.0) {
            return Ok(terms.pop().unwrap().1);
        }
        Ok(Expr::LinComb(terms))
    }

    fn term(&mut self) -> Result<(Complex64, Expr)> {
        let save = self.pos;
        if let Some(c) = self.coefficient()? {
            if self.peek() == Some(b'*') {
                self.pos += 1;
                return Ok((c, self.atom()?));
            }
            self.pos = save;
            return self.err("coefficient must be followed by '*'");
        }
        Ok((Complex64::new(1.0, 0.0), self.atom()?))
    }

    fn atom(&mut self) -> Result<Expr> {
        if self.eat_keyword("zero") {
            return Ok(Expr::Zero);
        }
        if self.eat_keyword("psi") {
            return Ok(Expr::Psi(0));
        }
        for (kw, order) in [("d1", 1u8), ("d2", 2u8)] {
            if self.eat_keyword(kw) {
                self.expect(b'(')?;
                let mut e = self.sum()?;
                self.expect(b')')?;
                for _ in 0..order {
                    e = simplify(e.derivative()?);
                }
                return Ok(e);
            }
        }
        if self.eat_keyword("affine") {
            self.expect(b'(')?;
            let inner = self.sum()?;
            self.expect(b',')?;
            let shift = self.number()?;
            self.expect(b',')?;
            let scale = self.number()?;
            self.expect(b')')?;
            if scale == 0.0 {
                return Err(Error::InvalidParameter("affine scale must be nonzero".into()));
            }
            return Ok(Expr::Affine {
                inner: Box::new(inner),
                shift,
                scale,
            });
        }
        if self.eat_keyword("unit") {
            // normalized to unit mass
            self.expect(b'(')?;
            let e = self.sum()?;
            self.expect(b')')?;
            let mass = e.fourier(0.0);
            if mass.norm() < 1e-12 {
                return Err(Error::InvalidParameter("unit(...) needs a profile with nonzero integral".into()));
            }
            return Ok(Expr::LinComb(vec![(Complex64::new(1.0, 0.0) / mass, e)]));
        }
        if self.eat_keyword("lincomb") {
            self.expect(b'(')?;
            let e = self.sum()?;
            self.expect(b')')?;
            return Ok(match e {
                Expr::LinComb(t) => Expr::LinComb(t),
                other => Expr::LinComb(vec![(Complex64::new(1.0, 0.0), other)]),
            });
        }
        if self.eat_keyword("box") {
            self.expect(b'(')?;
            let height = self.coefficient()?.map_or_else(|| self.number().map(|v| Complex64::new(v, 0.0)), Ok)?;
            self.expect(b',')?;
            let half_width = self.number()?;
            self.expect(b',')?;
            let width = self.number()?;
            self.expect(b')')?;
            if width <= 0.0 || half_width <= 0.0 {
                return Err(Error::InvalidParameter("box widths must be positive".into()));
            }
            return Ok(Expr::SmoothBox {
                height,
                half_width,
                width,
            });
        }
        if self.eat_keyword("antideriv") {
            self.expect(b'(')?;
            let e = self.sum()?;
            self.expect(b')')?;
            return Ok(e
                .exact_antiderivative()
                .unwrap_or_else(|| Expr::Cumulative(Arc::new(CumulativeRule::new(e)))));
        }
        if self.peek() == Some(b'(') {
            self.pos += 1;
            let e = self.sum()?;
            self.expect(b')')?;
            return Ok(e);
        }
        self.err("expected a profile atom")
    }
}

/// Collapse `1*affine(psi^(k), 0, 1)`-style wrappers produced by
/// differentiation so that `d1(psi)` prints and evaluates as `Psi(1)`.
pub fn simplify(e: Expr) -> Expr {
    match e {
        Expr::LinComb(terms) => {
            let terms: Vec<_> = terms
                .into_iter()
                .map(|(c, e)| (c, simplify(e)))
                .filter(|(c, e)| *c != Complex64::new(0.0, 0.0) && !matches!(e, Expr::Zero))
                .collect();
            if terms.is_empty() {
                Expr::Zero
            } else if terms.len() == 1 && terms[0].0 == Complex64::new(1.0, 0.0) {
                terms.into_iter().next().unwrap().1
            } else {
                Expr::LinComb(terms)
            }
        }
        Expr::Affine {
            inner,
            shift,
            scale,
        } => {
            let inner = simplify(*inner);
            if shift == 0.0 && scale == 1.0 {
                inner
            } else {
                Expr::Affine {
                    inner: Box::new(inner),
                    shift,
                    scale,
                }
            }
        }
        other => other,
    }
}

pub fn parse(text: &str) -> Result<Expr> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
    };
    let e = p.sum()?;
    p.skip_ws();
    if p.pos != p.src.len() {
        return p.err("trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_grammar_examples() {
        for s in [
            "psi",
            "d1(psi)",
            "d2(psi)",
            "affine(psi, 0.5, 2)",
            "lincomb(2*psi + 0.5i*d1(psi))",
            "box(4, 1, 0.05)",
            "-1.5*affine(psi,0,1.5)",
            "unit(psi)",
        ] {
            let e = parse(s).unwrap();
            let again = parse(&e.to_string()).unwrap();
            for &x in &[-0.9, -0.2, 0.3, 0.77] {
                assert!((e.eval(x) - again.eval(x)).norm() < 1e-15, "{s}");
            }
        }
        assert!(matches!(parse("d1(psi)").unwrap(), Expr::Psi(1)));
        assert!(matches!(parse("d2(psi)").unwrap(), Expr::Psi(2)));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse("psy").is_err());
        assert!(parse("affine(psi, 0, 0)").is_err());
        assert!(parse("psi +").is_err());
        assert!(parse("2 psi").is_err());
    }
}
