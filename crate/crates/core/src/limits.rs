//! Closed-form limit objects: the covariance Σ[φ], the constant L, the
//! variances for real pairs on the imaginary axis, the case classifier and
//! the effective potential.
//!
//! d = 3 is supported for radial profiles q and constant couplings only
//! (fg ≡ 1/2 as for the free pair); q̂ is then radial and every ξ-integral
//! reduces to one radial quadrature.

use crate::error::{Error, Result};
use crate::profiles::{gamma_exponent, Profile, MOMENT_TOL};
use crate::quadrature::{adaptive, composite, gl20};
use crate::resonances::ResonantPair;
use crate::sobolev::truncation_bound;
use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

/// Smoothing width of the indicator in the effective potential.
pub const INDICATOR_SMOOTHING: f64 = 0.025;
/// Relative threshold for the "≢ 0" tests of the classifier.
pub const NONZERO_REL: f64 = 1e-8;
const CLASSIFIER_GRID: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    I,
    II,
    III,
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Case::I => "I",
            Case::II => "II",
            Case::III => "III",
        })
    }
}

impl std::str::FromStr for Case {
    type Err = Error;
    fn from_str(s: &str) -> Result<Case> {
        match s.trim() {
            "I" | "1" => Ok(Case::I),
            "II" | "2" => Ok(Case::II),
            "III" | "3" => Ok(Case::III),
            other => Err(Error::InvalidParameter(format!("unknown case '{other}'"))),
        }
    }
}

impl Case {
    /// Power p in the N^p rescaling of λ_N - λ₀.
    pub fn rate(&self, d: u32) -> f64 {
        match self {
            Case::I => d as f64 / 2.0,
            Case::II => 1.5,
            Case::III => 2.0,
        }
    }
}

/// Σ[φ] = ∫ (φ₁², φ₁φ₂; φ₁φ₂, φ₂²) with φ = φ₁ + iφ₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovMatrix2 {
    pub entries: [[f64; 2]; 2],
    pub degenerate: bool,
    /// α with φ₁ = α φ₂ when degenerate; `None` with `degenerate` set means
    /// φ₂ ≡ 0.
    pub degeneracy_direction: Option<f64>,
}

impl CovMatrix2 {
    fn from_sums(s11: f64, s12: f64, s22: f64) -> Self {
        let trace = s11 + s22;
        let det = s11 * s22 - s12 * s12;
        let degenerate = det < 1e-10 * trace * trace;
        let degeneracy_direction = if degenerate && s22 > 1e-14 * trace.max(f64::MIN_POSITIVE) {
            Some(s12 / s22)
        } else {
            None
        };
        CovMatrix2 {
            entries: [[s11, s12], [s12, s22]],
            degenerate,
            degeneracy_direction,
        }
    }

    pub fn trace(&self) -> f64 {
        self.entries[0][0] + self.entries[1][1]
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> [f64; 2] {
        let [[a, b], [_, c]] = self.entries;
        let m = 0.5 * (a + c);
        let r = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        [m - r, m + r]
    }
}

/// Tensor Gauss–Legendre nodes and weights on [-1, 1]^d.
fn cube_rule(d: u32, panels: usize) -> Result<Vec<(Vec<f64>, f64)>> {
    let line: Vec<(f64, f64)> = (0..panels)
        .flat_map(|p| {
            let a = -1.0 + 2.0 * p as f64 / panels as f64;
            gl20().mapped(a, a + 2.0 / panels as f64).collect::<Vec<_>>()
        })
        .collect();
    match d {
        1 => Ok(line.iter().map(|&(x, w)| (vec![x], w)).collect()),
        3 => {
            let mut out = Vec::with_capacity(line.len().pow(3));
            for &(x, wx) in &line {
                for &(y, wy) in &line {
                    for &(z, wz) in &line {
                        out.push((vec![x, y, z], wx * wy * wz));
                    }
                }
            }
            Ok(out)
        }
        d if d % 2 == 0 => Err(Error::InvalidDimension(d)),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

fn panels_for(d: u32) -> usize {
    if d == 1 {
        8
    } else {
        2
    }
}

/// Σ[φ] by tensor-product Gauss–Legendre quadrature.
pub fn sigma_matrix<F: Fn(&[f64]) -> Complex64>(phi: F, d: u32) -> Result<CovMatrix2> {
    let rule = cube_rule(d, panels_for(d))?;
    let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
    for (x, w) in &rule {
        let v = phi(x);
        s11 += w * v.re * v.re;
        s12 += w * v.re * v.im;
        s22 += w * v.im * v.im;
    }
    Ok(CovMatrix2::from_sums(s11, s12, s22))
}

fn check_coupling(pair: &ResonantPair, d: u32) -> Result<()> {
    match d {
        1 => Ok(()),
        3 if pair.is_free() => Ok(()),
        3 => Err(Error::Inapplicable("d = 3 supports the constant coupling fg = 1/2 only".into())),
        d if d % 2 == 0 => Err(Error::InvalidDimension(d)),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Values of f on the d = 1 rule (free pair: constant).
fn f_on_line(pair: &ResonantPair) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let rule = cube_rule(1, panels_for(1))?;
    let xs: Vec<f64> = rule.iter().map(|(x, _)| x[0]).collect();
    let ws: Vec<f64> = rule.iter().map(|(_, w)| *w).collect();
    let f = pair.f_at(&xs)?;
    Ok((ws, f))
}

/// Σ[fg] for a resonant pair.
pub fn sigma_of_pair(pair: &ResonantPair, d: u32) -> Result<CovMatrix2> {
    check_coupling(pair, d)?;
    if pair.is_free() {
        let c = pair.norm_const * pair.norm_const;
        return sigma_matrix(|_| c, d);
    }
    let (ws, f) = f_on_line(pair)?;
    let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
    for (w, fv) in ws.iter().zip(&f) {
        let v = fv * fv;
        s11 += w * v.re * v.re;
        s12 += w * v.re * v.im;
        s22 += w * v.im * v.im;
    }
    Ok(CovMatrix2::from_sums(s11, s12, s22))
}

/// Σ[(fg)′] on [-1, 1] (the Case II covariance).
pub fn sigma_of_fg_derivative(pair: &ResonantPair) -> Result<CovMatrix2> {
    let rule = cube_rule(1, panels_for(1))?;
    let xs: Vec<f64> = rule.iter().map(|(x, _)| x[0]).collect();
    let fd = pair.f_and_derivative(&xs)?;
    let (mut s11, mut s12, mut s22) = (0.0, 0.0, 0.0);
    for ((_, w), (f, df)) in rule.iter().zip(&fd) {
        let v = 2.0 * f * df;
        s11 += w * v.re * v.re;
        s12 += w * v.re * v.im;
        s22 += w * v.im * v.im;
    }
    Ok(CovMatrix2::from_sums(s11, s12, s22))
}

/// ∫_{[-1,1]^d} f g.
pub fn fg_integral(pair: &ResonantPair, d: u32) -> Result<Complex64> {
    check_coupling(pair, d)?;
    if pair.is_free() {
        return Ok(pair.norm_const * pair.norm_const * 2f64.powi(d as i32));
    }
    let (ws, f) = f_on_line(pair)?;
    Ok(ws.iter().zip(&f).map(|(w, v)| *w * v * v).sum())
}

/// q̂(ξ)/ξ from the moment series, for |ξ| · radius ≤ 0.05 and ∫q = 0.
fn fourier_over_xi_series(q: &Profile, xi: f64) -> Complex64 {
    let mi = Complex64::new(0.0, -1.0);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut pow = Complex64::new(1.0, 0.0); // (-i)^k ξ^{k-1}
    let mut fact = 1.0;
    for k in 1..=crate::profiles::MOMENT_CAP {
        fact *= k as f64;
        pow = if k == 1 { mi } else { pow * mi * xi };
        acc += pow * q.moment(k) / fact;
    }
    acc
}

fn check_profile_dim(q: &Profile, d: u32) -> Result<()> {
    if d == 3 {
        let (a, _) = q.support();
        if a < 0.0 && !q.is_zero() {
            return Err(Error::InvalidParameter(
                "d = 3 profiles are radial and must live on r ≥ 0".into(),
            ));
        }
    }
    Ok(())
}

/// (2π)^{-d} ∫ q̂(ξ) q̂(-ξ) / |ξ|² dξ.
pub fn q_energy(q: &Profile, d: u32) -> Result<Complex64> {
    check_profile_dim(q, d)?;
    if q.is_zero() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    match d {
        1 => q_energy_1d(q),
        3 => Ok(q_energy_3d(q)),
        d if d % 2 == 0 => Err(Error::InvalidDimension(d)),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

fn q_energy_1d(q: &Profile) -> Result<Complex64> {
    let m = q.vanishing_order(MOMENT_TOL)?;
    if m == 0 {
        return Err(Error::DivergentIntegral(
            "∫ q̂(ξ)q̂(-ξ)/ξ² diverges at ξ = 0 when ∫q ≠ 0".into(),
        ));
    }
    let fs = q.feature_scale();
    let radius = q.radius().max(1e-300);
    let xi_s = 0.05 / radius;
    let g_series = |xi: f64| -fourier_over_xi_series(q, xi) * fourier_over_xi_series(q, -xi);
    let g = |xi: f64| q.fourier(xi) * q.fourier(-xi) / (xi * xi);
    let density = |xi: f64| {
        if xi < xi_s {
            g_series(xi).norm()
        } else {
            g(xi).norm()
        }
    };
    let xi_max = truncation_bound(density, fs).max(2.0 * xi_s);
    let near = composite(gl20(), 0.0, xi_s, 4, g_series);
    let panels = ((xi_max - xi_s) * fs).ceil() as usize + 4;
    // tolerance relative to a coarse pass over the whole range
    let coarse = composite(gl20(), xi_s, xi_max, panels, |xi| Complex64::new(g(xi).norm(), 0.0)).re;
    let scale = near.norm() + coarse;
    let far = adaptive(xi_s, xi_max, 1e-13 * scale, panels, g);
    // integrand is even: (1/2π)·2·∫_0^∞
    Ok((near + far) / PI)
}

fn q_energy_3d(q: &Profile) -> Complex64 {
    let fs = q.feature_scale();
    let density = |k: f64| q.radial_fourier_3d(k).norm_sqr();
    let k_max = truncation_bound(density, fs);
    let g = |k: f64| {
        let v = q.radial_fourier_3d(k);
        v * v
    };
    let panels = (k_max * fs).ceil() as usize + 4;
    let coarse = composite(gl20(), 0.0, k_max, panels, |k| Complex64::new(g(k).norm(), 0.0)).re;
    let total = adaptive(0.0, k_max, 1e-13 * coarse.max(f64::MIN_POSITIVE), panels, g);
    // (2π)^{-3} · 4π ∫_0^∞ k² q̂(k)² / k² dk
    total * (4.0 * PI / (2.0 * PI).powi(3))
}

/// L = (2π)^{-d} ∫ q̂(ξ)q̂(-ξ)/|ξ|² dξ · ∫_{[-1,1]^d} f g.
pub fn constant_l(q: &Profile, pair: &ResonantPair, d: u32) -> Result<Complex64> {
    check_coupling(pair, d)?;
    Ok(q_energy(q, d)? * fg_integral(pair, d)?)
}

/// ∫ over R^d of q: the line integral for d = 1, 4π∫r²q for radial d = 3.
pub fn total_mass(q: &Profile, d: u32) -> Result<Complex64> {
    match d {
        1 => Ok(q.integral()),
        3 => Ok(q.radial_fourier_3d(0.0)),
        d if d % 2 == 0 => Err(Error::InvalidDimension(d)),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Vanishing order of q̂ at 0 in dimension d (radial profiles have no odd
/// moments, so m ∈ {0, 2} for d = 3).
pub fn vanishing_order_d(q: &Profile, d: u32) -> Result<usize> {
    if q.is_zero() {
        // every moment vanishes; γ saturates
        return Ok(crate::profiles::MOMENT_CAP + 1);
    }
    match d {
        1 => q.vanishing_order(MOMENT_TOL),
        3 => {
            check_profile_dim(q, 3)?;
            let scale = composite(gl20(), 0.0, q.radius().max(1e-300), 16, |r| {
                Complex64::new(q.eval(r).norm() * 4.0 * PI * r * r, 0.0)
            })
            .re;
            if total_mass(q, 3)?.norm() > MOMENT_TOL * scale {
                Ok(0)
            } else {
                Ok(2)
            }
        }
        d if d % 2 == 0 => Err(Error::InvalidDimension(d)),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

fn real_axis_pair(pair: &ResonantPair) -> Result<()> {
    let l0 = pair.lambda0;
    if !pair.q0.is_real() || l0.re.abs() > 1e-10 * (1.0 + l0.norm()) {
        return Err(Error::Inapplicable(format!(
            "needs a real base potential and a resonance on the imaginary axis, got {l0}"
        )));
    }
    Ok(())
}

/// Variance σ² for real pairs on the imaginary axis (g = conj f):
/// Case I ∫|f|⁴, Case II ∫((|f|²)′)², Case III i(2π)^{-d}∫|q̂|²/|ξ|² · ∫|f|².
pub fn sigma2_limit(case: Case, q: &Profile, pair: &ResonantPair, d: u32) -> Result<Complex64> {
    real_axis_pair(pair)?;
    check_coupling(pair, d)?;
    let vol = 2f64.powi(d as i32);
    let c = pair.norm_const.norm_sqr();
    match case {
        Case::I if pair.is_free() => Ok(Complex64::new(c * c * vol, 0.0)),
        Case::II if pair.is_free() => Ok(Complex64::new(0.0, 0.0)),
        Case::III if pair.is_free() => {
            let e = q_energy_abs(q, d)?;
            Ok(Complex64::new(0.0, e * c * vol))
        }
        _ if d != 1 => Err(Error::Inapplicable("d = 3 supports the constant coupling only".into())),
        Case::I => {
            let (ws, f) = f_on_line(pair)?;
            Ok(Complex64::new(ws.iter().zip(&f).map(|(w, v)| w * v.norm_sqr().powi(2)).sum(), 0.0))
        }
        Case::II => {
            let rule = cube_rule(1, panels_for(1))?;
            let xs: Vec<f64> = rule.iter().map(|(x, _)| x[0]).collect();
            let fd = pair.f_and_derivative(&xs)?;
            let s: f64 = rule
                .iter()
                .zip(&fd)
                .map(|((_, w), (f, df))| {
                    let d_abs2 = 2.0 * (f.conj() * df).re;
                    w * d_abs2 * d_abs2
                })
                .sum();
            Ok(Complex64::new(s, 0.0))
        }
        Case::III => {
            let e = q_energy_abs(q, d)?;
            let (ws, f) = f_on_line(pair)?;
            let norm2: f64 = ws.iter().zip(&f).map(|(w, v)| w * v.norm_sqr()).sum();
            Ok(Complex64::new(0.0, e * norm2))
        }
    }
}

/// (2π)^{-d} ∫ |q̂|²/|ξ|² dξ (equal to q_energy for real q).
fn q_energy_abs(q: &Profile, d: u32) -> Result<f64> {
    if q.is_real() {
        return Ok(q_energy(q, d)?.re);
    }
    Err(Error::Inapplicable("the variance formula needs a real profile q".into()))
}

/// Classifier following the decision tree: I if ∫q ≠ 0; II if d = 1,
/// ∫q = 0, ∫xq ≠ 0 and (fg)′ ≢ 0; III otherwise.
pub fn case_classifier(d: u32, q: &Profile, pair: &ResonantPair) -> Result<Case> {
    check_coupling(pair, d)?;
    check_profile_dim(q, d)?;
    if q.is_zero() {
        return Ok(Case::III);
    }
    let scale = match d {
        1 => q.abs_integral(),
        _ => composite(gl20(), 0.0, q.radius().max(1e-300), 16, |r| {
            Complex64::new(q.eval(r).norm() * 4.0 * PI * r * r, 0.0)
        })
        .re,
    };
    if total_mass(q, d)?.norm() > NONZERO_REL * scale {
        return Ok(Case::I);
    }
    if d != 1 {
        return Ok(Case::III);
    }
    let first = q.moment(1).norm();
    if first <= NONZERO_REL * scale * q.radius().max(1.0) {
        return Ok(Case::III);
    }
    if pair.is_free() {
        return Ok(Case::III);
    }
    let xs: Vec<f64> = (0..CLASSIFIER_GRID)
        .map(|k| -1.0 + 2.0 * (k as f64 + 0.5) / CLASSIFIER_GRID as f64)
        .collect();
    let fd = pair.f_and_derivative(&xs)?;
    let fg_scale = fd.iter().map(|(f, _)| (f * f).norm()).fold(0.0, f64::max);
    let dfg = fd.iter().map(|(f, df)| (2.0 * f * df).norm()).fold(0.0, f64::max);
    if dfg > NONZERO_REL * fg_scale.max(f64::MIN_POSITIVE) {
        Ok(Case::II)
    } else {
        Ok(Case::III)
    }
}

/// Which constant multiplies the indicator in V_eff.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VeffConvention {
    /// i/((2π)^d N²) ∫ q̂(ξ)q̂(-ξ)/|ξ|² dξ, as usually displayed.
    Displayed,
    /// -(1/((2π)^d N²)) ∫ q̂(ξ)q̂(-ξ)/|ξ|² dξ: the constant whose first-order
    /// resonance shift -i c ∫fg reproduces i L / N².
    Consistent,
}

#[derive(Debug, Clone)]
pub struct EffectivePotential {
    pub q0: Profile,
    pub constant: Complex64,
    pub convention: VeffConvention,
    pub n: usize,
    pub d: u32,
    /// q₀ plus the constant times a smoothed indicator (d = 1 only).
    pub profile: Option<Profile>,
    pub warning: Option<String>,
}

pub fn effective_potential(
    q0: &Profile,
    q: &Profile,
    n: usize,
    d: u32,
    convention: VeffConvention,
) -> Result<EffectivePotential> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be positive".into()));
    }
    let e = q_energy(q, d)?;
    let n2 = (n * n) as f64;
    let constant = match convention {
        VeffConvention::Displayed => Complex64::new(0.0, 1.0) * e / n2,
        VeffConvention::Consistent => -e / n2,
    };
    let m = vanishing_order_d(q, d)?;
    let warning = if (d as f64) / 2.0 + (m as f64) < 2.0 {
        Some(format!(
            "d/2 + m = {} < 2: fluctuations of V_# dominate the N^-2 correction",
            d as f64 / 2.0 + m as f64
        ))
    } else {
        None
    };
    let profile = if d == 1 {
        let step = Profile::smooth_box(constant, 1.0, INDICATOR_SMOOTHING)?;
        Some(Profile::lincomb(&[
            (Complex64::new(1.0, 0.0), q0.clone()),
            (Complex64::new(1.0, 0.0), step),
        ])?)
    } else {
        None
    };
    Ok(EffectivePotential {
        q0: q0.clone(),
        constant,
        convention,
        n,
        d,
        profile,
        warning,
    })
}

/// Constants report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LimitsReport {
    pub case: Case,
    pub gamma: String,
    pub gamma_value: f64,
    pub vanishing_order: usize,
    #[serde(rename = "Sigma")]
    pub sigma: CovMatrix2,
    #[serde(rename = "L")]
    pub l: Option<[f64; 2]>,
    pub sigma2: Option<[f64; 2]>,
    #[serde(rename = "V_eff_constant")]
    pub v_eff_constant: Option<[f64; 2]>,
    pub v_eff_constant_consistent: Option<[f64; 2]>,
    pub notes: Vec<String>,
}

/// All constants for (d, q, pair); `n` sets the V_eff scale.
pub fn limits_report(q: &Profile, pair: &ResonantPair, d: u32, n: usize) -> Result<LimitsReport> {
    let case = case_classifier(d, q, pair)?;
    let m = vanishing_order_d(q, d)?;
    let gamma: Rational64 = gamma_exponent(d, m)?;
    let sigma = sigma_of_pair(pair, d)?;
    let c2 = |z: Complex64| [z.re, z.im];
    let mut notes = Vec::new();
    let l = match constant_l(q, pair, d) {
        Ok(v) => Some(c2(v)),
        Err(Error::DivergentIntegral(msg)) => {
            notes.push(format!("L: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    let sigma2 = match sigma2_limit(case, q, pair, d) {
        Ok(v) => Some(c2(v)),
        Err(Error::Inapplicable(msg)) | Err(Error::DivergentIntegral(msg)) => {
            notes.push(format!("sigma2: {msg}"));
            None
        }
        Err(e) => return Err(e),
    };
    let v_eff_constant = {
        let r = effective_potential(&pair.q0, q, n, d, VeffConvention::Displayed);
        match r {
            Ok(v) => {
                if let Some(w) = v.warning {
                    notes.push(format!("V_eff: {w}"));
                }
                Some(c2(v.constant))
            }
            Err(Error::DivergentIntegral(_)) => None,
            Err(e) => return Err(e),
        }
    };
    let v_eff_constant_consistent = match effective_potential(&pair.q0, q, n, d, VeffConvention::Consistent) {
        Ok(v) => Some(c2(v.constant)),
        Err(Error::DivergentIntegral(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(LimitsReport {
        case,
        gamma: gamma.to_string(),
        gamma_value: crate::profiles::rational_to_f64(gamma),
        vanishing_order: m,
        sigma,
        l,
        sigma2,
        v_eff_constant,
        v_eff_constant_consistent,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn sigma_examples() {
        let s = sigma_matrix(|_| Complex64::new(0.5, 0.0), 1).unwrap();
        assert!(close(s.entries[0][0], 0.5, 1e-12) && s.entries[1][1] == 0.0 && s.degenerate);
        let s = sigma_matrix(|_| Complex64::new(0.0, 0.5), 1).unwrap();
        assert!(close(s.entries[1][1], 0.5, 1e-12) && s.entries[0][0] == 0.0);
        let s = sigma_matrix(|x| Complex64::new(x[0], x[0] * x[0]), 1).unwrap();
        assert!(close(s.entries[0][0], 2.0 / 3.0, 1e-12));
        assert!(close(s.entries[1][1], 2.0 / 5.0, 1e-12));
        assert!(s.entries[0][1].abs() < 1e-14 && !s.degenerate);
        // proportional components: φ = (2 + i)·x
        let s = sigma_matrix(|x| Complex64::new(2.0 * x[0], x[0]), 1).unwrap();
        assert!(s.degenerate);
        assert!(close(s.degeneracy_direction.unwrap(), 2.0, 1e-10));
    }

    #[test]
    fn parseval_for_derivative_profiles() {
        let psi = Profile::parse("psi").unwrap();
        let q = Profile::parse("d1(psi)").unwrap();
        let lhs = q_energy(&q, 1).unwrap();
        let rhs = composite(gl20(), -1.0, 1.0, 64, |x| psi.eval(x) * psi.eval(x));
        assert!((lhs - rhs).norm() < 1e-8 * rhs.norm(), "{lhs} vs {rhs}");
        let q2 = Profile::parse("2*d1(psi)").unwrap();
        let l2 = q_energy(&q2, 1).unwrap();
        assert!((l2 - 4.0 * lhs).norm() < 1e-10 * l2.norm());
    }

    #[test]
    fn divergent_when_mass_nonzero() {
        let q = Profile::parse("psi").unwrap();
        assert!(matches!(q_energy(&q, 1), Err(Error::DivergentIntegral(_))));
    }

    #[test]
    fn free_pair_constants() {
        let pair = ResonantPair::free();
        let q = Profile::parse("d1(psi)").unwrap();
        assert_eq!(case_classifier(1, &q, &pair).unwrap(), Case::III);
        assert_eq!(case_classifier(1, &Profile::parse("psi").unwrap(), &pair).unwrap(), Case::I);
        let l = constant_l(&q, &pair, 1).unwrap();
        let s3 = sigma2_limit(Case::III, &q, &pair, 1).unwrap();
        assert!((s3 - Complex64::new(0.0, 1.0) * l).norm() < 1e-12 * l.norm());
        let s1 = sigma2_limit(Case::I, &q, &pair, 1).unwrap();
        assert!(close(s1.re, 0.5, 1e-14));
        assert_eq!(sigma2_limit(Case::II, &q, &pair, 1).unwrap().re, 0.0);
    }

    #[test]
    fn radial_three_d() {
        let pair = ResonantPair::free();
        // psi on [-1, 1] is not a radial profile
        let q = Profile::parse("psi").unwrap();
        assert!(matches!(case_classifier(3, &q, &pair), Err(Error::InvalidParameter(_))));
        // ψ(2r - 1) on r ∈ [0, 1]: positive mass, Case I
        let q = q.affine(0.5, 0.5).unwrap();
        assert_eq!(case_classifier(3, &q, &pair).unwrap(), Case::I);
        assert_eq!(vanishing_order_d(&q, 3).unwrap(), 0);
    }

    #[test]
    fn effective_scaling() {
        let q0 = Profile::zero();
        let q = Profile::parse("d1(psi)").unwrap();
        let a = effective_potential(&q0, &q, 10, 1, VeffConvention::Displayed).unwrap();
        let b = effective_potential(&q0, &q, 20, 1, VeffConvention::Displayed).unwrap();
        assert!((a.constant - 4.0 * b.constant).norm() < 1e-14 * a.constant.norm());
        let c = effective_potential(&q0, &q, 10, 1, VeffConvention::Consistent).unwrap();
        assert!((c.constant * Complex64::new(0.0, 1.0) + a.constant).norm() < 1e-14 * a.constant.norm());
        assert!(a.warning.is_some());
    }
}
