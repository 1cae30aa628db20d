//! Smooth compactly supported building blocks q₀ and q.
//!
//! Every profile is an expression tree over the standard bump
//! ψ(x) = exp(-1/(1-x²)), so pointwise evaluation is exact and the Fourier
//! transform follows from closed-form node rules. Moments are computed once
//! at construction.

pub mod bump;
pub mod expr;

use crate::error::{Error, Result};
use crate::quadrature::adaptive;
use num_complex::Complex64;
use num_rational::Rational64;
use std::fmt;
use std::sync::Arc;

pub use expr::Expr;

/// Number of cached moments ∫ xᵏ p, k = 0..=MOMENT_CAP.
pub const MOMENT_CAP: usize = 8;
/// Default relative tolerance for moment tests.
pub const MOMENT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BumpKind {
    Psi,
    PsiPrime,
    PsiSecond,
}

#[derive(Clone)]
pub struct Profile {
    inner: Arc<ProfileData>,
}

struct ProfileData {
    expr: Expr,
    support: (f64, f64),
    moments: [Complex64; MOMENT_CAP + 1],
    abs_integral: f64,
    sup_norm: f64,
    real: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub integral: Complex64,
    pub first_moment: Complex64,
    pub vanishing_order: usize,
    pub gamma: Rational64,
}

/// Smallest length scale on which the profile varies; sets quadrature panels.
fn feature_scale(e: &Expr) -> f64 {
    match e {
        Expr::Zero => f64::INFINITY,
        Expr::Psi(_) => 1.0,
        Expr::Affine { inner, scale, .. } => scale.abs() * feature_scale(inner),
        Expr::LinComb(t) => t.iter().map(|(_, e)| feature_scale(e)).fold(f64::INFINITY, f64::min),
        Expr::SmoothBox { width, .. } => *width,
        Expr::Cumulative(r) => feature_scale(&r.integrand),
    }
}

impl Profile {
    pub fn new(expr: Expr) -> Profile {
        let expr = expr::simplify(expr);
        let support = expr.support();
        let (a, b) = support;
        let mut moments = [Complex64::new(0.0, 0.0); MOMENT_CAP + 1];
        let mut abs_integral = 0.0;
        let mut sup_norm: f64 = 0.0;
        if b > a && !expr.is_zero() {
            let panels = Self::panels_for(&expr, a, b);
            // one sweep over fixed nodes for all moments
            let rule = crate::quadrature::GaussLegendre::new(24);
            let h = (b - a) / panels as f64;
            for p in 0..panels {
                let lo = a + h * p as f64;
                for (x, w) in rule.mapped(lo, lo + h) {
                    let v = expr.eval(x);
                    abs_integral += w * v.norm();
                    sup_norm = sup_norm.max(v.norm());
                    let mut xk = 1.0;
                    for m in moments.iter_mut() {
                        *m += v * (w * xk);
                        xk *= x;
                    }
                }
            }
        }
        let real = expr.is_real();
        Profile {
            inner: Arc::new(ProfileData {
                expr,
                support,
                moments,
                abs_integral,
                sup_norm,
                real,
            }),
        }
    }

    fn panels_for(expr: &Expr, a: f64, b: f64) -> usize {
        let scale = feature_scale(expr).min(b - a);
        (((b - a) / scale) * 16.0).ceil().clamp(16.0, 20_000.0) as usize
    }

    pub fn zero() -> Profile {
        Profile::new(Expr::Zero)
    }

    pub fn bump(kind: BumpKind) -> Profile {
        Profile::new(Expr::Psi(match kind {
            BumpKind::Psi => 0,
            BumpKind::PsiPrime => 1,
            BumpKind::PsiSecond => 2,
        }))
    }

    /// x ↦ p((x - shift)/scale).
    pub fn affine(&self, shift: f64, scale: f64) -> Result<Profile> {
        if scale == 0.0 || !scale.is_finite() || !shift.is_finite() {
            return Err(Error::InvalidParameter("affine scale must be nonzero and finite".into()));
        }
        Ok(Profile::new(Expr::Affine {
            inner: Box::new(self.inner.expr.clone()),
            shift,
            scale,
        }))
    }

    pub fn lincomb(terms: &[(Complex64, Profile)]) -> Result<Profile> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter("empty linear combination".into()));
        }
        Ok(Profile::new(Expr::LinComb(
            terms.iter().map(|(c, p)| (*c, p.inner.expr.clone())).collect(),
        )))
    }

    pub fn scaled(&self, c: Complex64) -> Profile {
        Profile::new(Expr::LinComb(vec![(c, self.inner.expr.clone())]))
    }

    /// h times the indicator of [-a, a] mollified at width w.
    pub fn smooth_box(height: Complex64, half_width: f64, width: f64) -> Result<Profile> {
        if !(half_width > 0.0 && width > 0.0) {
            return Err(Error::InvalidParameter("box widths must be positive".into()));
        }
        Ok(Profile::new(Expr::SmoothBox {
            height,
            half_width,
            width,
        }))
    }

    pub fn parse(text: &str) -> Result<Profile> {
        Ok(Profile::new(expr::parse(text)?))
    }

    /// ψ divided by its mass.
    pub fn unit_mass_psi() -> Profile {
        Profile::bump(BumpKind::Psi).scaled(Complex64::new(1.0 / bump::psi_mass(), 0.0))
    }

    pub fn expr(&self) -> &Expr {
        &self.inner.expr
    }

    pub fn support(&self) -> (f64, f64) {
        self.inner.support
    }

    pub fn is_zero(&self) -> bool {
        self.inner.expr.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.inner.real
    }

    /// Smallest length scale on which the profile varies.
    pub fn feature_scale(&self) -> f64 {
        if self.is_zero() {
            return f64::INFINITY;
        }
        let (a, b) = self.inner.support;
        feature_scale(&self.inner.expr).min((b - a).max(f64::MIN_POSITIVE))
    }

    /// Three-dimensional Fourier transform of the radial function
    /// x ↦ p(|x|): 4π ∫_0^R r² p(r) sin(kr)/(kr) dr.
    pub fn radial_fourier_3d(&self, k: f64) -> Complex64 {
        let r_max = self.radius();
        if r_max == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let panels = ((k * r_max / 4.0).ceil() as usize)
            .max(((r_max / self.feature_scale()) * 8.0).ceil() as usize)
            .max(8);
        let s = crate::quadrature::composite(crate::quadrature::gl20(), 0.0, r_max, panels, |r| {
            let kr = k * r;
            let sinc = if kr.abs() < 1e-6 { 1.0 - kr * kr / 6.0 } else { kr.sin() / kr };
            self.eval(r) * (r * r * sinc)
        });
        s * (4.0 * std::f64::consts::PI)
    }

    /// max |x| over the support.
    pub fn radius(&self) -> f64 {
        let (a, b) = self.inner.support;
        a.abs().max(b.abs())
    }

    #[inline]
    pub fn eval(&self, x: f64) -> Complex64 {
        let (a, b) = self.inner.support;
        if x <= a || x >= b {
            return Complex64::new(0.0, 0.0);
        }
        self.inner.expr.eval(x)
    }

    pub fn derivative(&self) -> Result<Profile> {
        Ok(Profile::new(self.inner.expr.derivative()?))
    }

    /// ∫ xᵏ p for k ≤ MOMENT_CAP (cached), by quadrature beyond.
    pub fn moment(&self, k: usize) -> Complex64 {
        if k <= MOMENT_CAP {
            return self.inner.moments[k];
        }
        self.moment_quadrature(k)
    }

    /// Independent adaptive quadrature of ∫ xᵏ p.
    pub fn moment_quadrature(&self, k: usize) -> Complex64 {
        let (a, b) = self.inner.support;
        let panels = Self::panels_for(&self.inner.expr, a, b) / 4;
        adaptive(a, b, 1e-15, panels.max(4), |x| self.eval(x) * x.powi(k as i32))
    }

    pub fn integral(&self) -> Complex64 {
        self.inner.moments[0]
    }

    pub fn abs_integral(&self) -> f64 {
        self.inner.abs_integral
    }

    pub fn sup_norm(&self) -> f64 {
        self.inner.sup_norm
    }

    /// p̂(ξ) = ∫ e^{-iξx} p(x) dx from the tree's closed-form node rules.
    pub fn fourier(&self, xi: f64) -> Complex64 {
        self.inner.expr.fourier(xi)
    }

    /// p̂(ξ) by adaptive quadrature with panels no wider than π/|ξ|.
    pub fn fourier_quadrature(&self, xi: f64) -> Complex64 {
        let (a, b) = self.inner.support;
        if b <= a {
            return Complex64::new(0.0, 0.0);
        }
        let by_oscillation = ((b - a) * xi.abs() / std::f64::consts::PI).ceil() as usize;
        let panels = by_oscillation.max(Self::panels_for(&self.inner.expr, a, b) / 4).max(4);
        adaptive(a, b, 1e-13, panels, |x| {
            self.eval(x) * Complex64::new(0.0, -xi * x).exp()
        })
    }

    pub fn vanishing_order(&self, tol: f64) -> Result<usize> {
        let scale = self.inner.abs_integral;
        if scale <= tol {
            return Err(Error::DegenerateInput("profile is identically zero".into()));
        }
        for k in 0..=MOMENT_CAP {
            if self.moment(k).norm() > tol * scale {
                return Ok(k);
            }
        }
        Err(Error::OrderUndetermined(MOMENT_CAP))
    }

    pub fn summary(&self, d: u32) -> Result<MomentSummary> {
        let m = self.vanishing_order(MOMENT_TOL)?;
        Ok(MomentSummary {
            integral: self.integral(),
            first_moment: self.moment(1),
            vanishing_order: m,
            gamma: gamma_exponent(d, m)?,
        })
    }

    /// The compactly supported Q with Q′ = p. Exact when p is a combination
    /// of derivatives, otherwise a cumulative quadrature rule.
    pub fn antiderivative(&self) -> Result<Profile> {
        let mean = self.integral();
        if mean.norm() > MOMENT_TOL * self.inner.abs_integral.max(f64::MIN_POSITIVE) {
            return Err(Error::NoCompactAntiderivative(mean.norm()));
        }
        if self.is_zero() {
            return Ok(Profile::zero());
        }
        let e = &self.inner.expr;
        Ok(Profile::new(e.exact_antiderivative().unwrap_or_else(|| {
            Expr::Cumulative(Arc::new(expr::CumulativeRule::new(e.clone())))
        })))
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.inner.expr)
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Profile({})", self.inner.expr)
    }
}

/// γ = min(7/4, d/2 + m) for odd d.
pub fn gamma_exponent(d: u32, m: usize) -> Result<Rational64> {
    if d % 2 == 0 {
        return Err(Error::InvalidDimension(d));
    }
    let g = Rational64::new(d as i64, 2) + Rational64::from_integer(m as i64);
    Ok(g.min(Rational64::new(7, 4)))
}

pub fn rational_to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_bumps() {
        let p = Profile::bump(BumpKind::Psi);
        assert_eq!(p.support(), (-1.0, 1.0));
        assert!((p.integral().re - 0.443_993_816_168_089_3).abs() < 1e-12);
        let d1 = Profile::bump(BumpKind::PsiPrime);
        assert!(d1.integral().norm() < 1e-14);
        let d2 = Profile::bump(BumpKind::PsiSecond);
        assert!(d2.integral().norm() < 1e-13 && d2.moment(1).norm() < 1e-13);
        assert_eq!(p.vanishing_order(1e-10).unwrap(), 0);
        assert_eq!(d1.vanishing_order(1e-10).unwrap(), 1);
        assert_eq!(d2.vanishing_order(1e-10).unwrap(), 2);
    }

    #[test]
    fn gamma_values() {
        assert_eq!(gamma_exponent(1, 0).unwrap(), Rational64::new(1, 2));
        assert_eq!(gamma_exponent(3, 0).unwrap(), Rational64::new(3, 2));
        assert_eq!(gamma_exponent(1, 2).unwrap(), Rational64::new(7, 4));
        assert_eq!(gamma_exponent(2, 0), Err(Error::InvalidDimension(2)));
    }

    #[test]
    fn affine_support_and_zero_scale() {
        let p = Profile::bump(BumpKind::Psi);
        let q = p.affine(2.0, -0.5).unwrap();
        assert_eq!(q.support(), (1.5, 2.5));
        assert!(p.affine(0.0, 0.0).is_err());
    }

    #[test]
    fn antiderivatives() {
        let d1 = Profile::bump(BumpKind::PsiPrime);
        let q = d1.antiderivative().unwrap();
        assert!(matches!(q.expr(), Expr::Psi(0)));
        assert!(matches!(
            Profile::bump(BumpKind::Psi).antiderivative(),
            Err(Error::NoCompactAntiderivative(_))
        ));
    }
}
