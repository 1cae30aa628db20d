//! Negative-order Sobolev norms of the oscillating part V_#.
//!
//! Two independent routes are provided: the Toeplitz bilinear form
//! Σ α_{jℓ} u_j u_ℓ, and direct spectral quadrature of
//! (2π)^{-1} ∫ |V̂_#(ξ)|² (1+ξ²)^{-s} dξ. With the normalization used here the
//! two agree exactly (Parseval), so α's quadratic form *is* the squared
//! H^{-s} norm.
//!
//! The operator norm of ⟨D⟩^{-s} V ⟨D⟩^{-s} is never computed. For s > d/2 it
//! is bounded by a constant times the H^{-s} norm, and every experiment uses
//! the H^{-s} norm as its proxy.

use crate::ensemble::{CoefficientField, CoefficientLaw, RandomPotential};
use crate::error::{Error, Result};
use crate::profiles::Profile;
use crate::quadrature::{adaptive, composite, gl20};
use crate::stats::{linear_fit, wilson_interval};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt::Write as _;

/// Relative level below which the weighted spectral density is dropped.
const TRUNCATION_LEVEL: f64 = 1e-17;

fn weight(n: usize, s: f64, eta: f64) -> f64 {
    let t = n as f64 * eta;
    (1.0 + t * t).powf(-s)
}

/// Frequency beyond which |q̂(η)|² (1+N²η²)^{-s} stays below
/// TRUNCATION_LEVEL times its maximum.
pub(crate) fn truncation_bound<F: Fn(f64) -> f64>(density: F, feature_scale: f64) -> f64 {
    // frequencies scale inversely with the feature size
    let step = 0.05 / feature_scale;
    let limit = 0.99 * crate::profiles::bump::FOURIER_FAST_LIMIT / feature_scale;
    let count = (limit / step) as usize;
    let vals: Vec<f64> = (0..=count).map(|k| density(k as f64 * step)).collect();
    let peak = vals.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return step;
    }
    let last = vals
        .iter()
        .rposition(|&v| v > TRUNCATION_LEVEL * peak)
        .unwrap_or(0);
    ((last + 2) as f64 * step).min(limit)
}

/// Gauss–Legendre nodes on [lo, hi] with panel width at most `h`.
fn panel_nodes(lo: f64, hi: f64, h: f64) -> Vec<(f64, f64)> {
    let panels = ((hi - lo) / h).ceil().max(1.0) as usize;
    let width = (hi - lo) / panels as f64;
    (0..panels)
        .flat_map(|p| {
            let a = lo + width * p as f64;
            gl20().mapped(a, a + width).collect::<Vec<_>>()
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaMatrix {
    pub s: f64,
    pub n: usize,
    pub d: u32,
    /// Largest |Δ_i| materialized (2N in one dimension).
    pub cutoff: usize,
    /// d = 1: α_Δ for Δ = 0..=2N. d = 3: α on the cube [-cutoff, cutoff]³.
    diffs: Vec<Complex64>,
    pub trace: f64,
    pub hs_norm: f64,
    /// Spectral truncation used for the entries.
    pub xi_max: f64,
}

impl AlphaMatrix {
    /// α_{jℓ} for multi-indices j, ℓ.
    pub fn entry(&self, j: &[i64], l: &[i64]) -> Complex64 {
        let delta: Vec<i64> = j.iter().zip(l).map(|(a, b)| a - b).collect();
        self.entry_diff(&delta)
    }

    pub fn entry_diff(&self, delta: &[i64]) -> Complex64 {
        if self.d == 1 {
            let k = delta[0].unsigned_abs() as usize;
            if k > 2 * self.n {
                return Complex64::new(0.0, 0.0);
            }
            let v = self.diffs[k];
            if delta[0] >= 0 {
                v
            } else {
                v.conj()
            }
        } else {
            let c = self.cutoff as i64;
            if delta.iter().any(|x| x.abs() > c) {
                return Complex64::new(0.0, 0.0);
            }
            let side = 2 * c + 1;
            let idx = ((delta[0] + c) * side + (delta[1] + c)) * side + (delta[2] + c);
            self.diffs[idx as usize]
        }
    }

    /// Difference profile (Δ, Re α_Δ, Im α_Δ) for d = 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta,re,im\n");
        if self.d == 1 {
            for (k, v) in self.diffs.iter().enumerate() {
                let _ = writeln!(out, "{k},{:?},{:?}", v.re, v.im);
            }
        }
        out
    }
}

pub fn alpha_matrix(q: &Profile, n: usize, d: u32, s: f64) -> Result<AlphaMatrix> {
    alpha_matrix_with_cutoff(q, n, d, s, 2 * n)
}

/// As `alpha_matrix`; for d = 3 only |Δ_i| ≤ cutoff is materialized and the
/// Hilbert–Schmidt norm is truncated accordingly.
pub fn alpha_matrix_with_cutoff(q: &Profile, n: usize, d: u32, s: f64, cutoff: usize) -> Result<AlphaMatrix> {
    if !(s > 0.0) {
        return Err(Error::InvalidParameter("Sobolev order s must be positive".into()));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    match d {
        1 => Ok(alpha_1d(q, n, s)),
        3 => Ok(alpha_3d(q, n, s, cutoff.min(2 * n))),
        d if d % 2 == 0 => Err(Error::InvalidDimension(d)),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

/// Quadrature nodes and weighted density for the one-dimensional entries.
fn spectral_nodes_1d(q: &Profile, n: usize, s: f64) -> (f64, Vec<(f64, f64)>) {
    let fs = q.feature_scale();
    let density = |eta: f64| q.fourier(eta).norm_sqr().max(q.fourier(-eta).norm_sqr()) * weight(n, s, eta);
    let xi_max = truncation_bound(density, fs);
    // panel width resolves the weight (scale 1/N), the profile (scale 1/fs)
    // and the phase e^{-iηΔ} for |Δ| ≤ 2N
    let h = (0.25 / fs).min(1.0 / n as f64);
    let nodes: Vec<(f64, f64)> = panel_nodes(-xi_max, xi_max, h)
        .into_par_iter()
        .map(|(eta, w)| (eta, w * q.fourier(eta).norm_sqr() * weight(n, s, eta)))
        .collect();
    (xi_max, nodes)
}

fn alpha_1d(q: &Profile, n: usize, s: f64) -> AlphaMatrix {
    let (xi_max, nodes) = spectral_nodes_1d(q, n, s);
    let size = 2 * n + 1;
    let norm = 1.0 / (2.0 * PI * n as f64);
    // α_Δ = (1/2πN) ∫ e^{-iηΔ} |q̂(η)|² (1+N²η²)^{-s} dη; powers of e^{-iη}
    // are accumulated per node.
    let chunk = 4096;
    let diffs = nodes
        .par_chunks(chunk)
        .map(|block| {
            let mut acc = vec![Complex64::new(0.0, 0.0); size];
            for &(eta, wg) in block {
                let z = Complex64::new(0.0, -eta).exp();
                let mut p = Complex64::new(wg, 0.0);
                for a in acc.iter_mut() {
                    *a += p;
                    p *= z;
                }
            }
            acc
        })
        .reduce(
            || vec![Complex64::new(0.0, 0.0); size],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let diffs: Vec<Complex64> = diffs.into_iter().map(|v| v * norm).collect();
    let a0 = diffs[0].re;
    let mut hs2 = size as f64 * a0 * a0;
    for (k, v) in diffs.iter().enumerate().skip(1) {
        hs2 += 2.0 * (size - k) as f64 * v.norm_sqr();
    }
    AlphaMatrix {
        s,
        n,
        d: 1,
        cutoff: 2 * n,
        trace: size as f64 * a0,
        hs_norm: hs2.sqrt(),
        diffs,
        xi_max,
    }
}

fn alpha_3d(q: &Profile, n: usize, s: f64, cutoff: usize) -> AlphaMatrix {
    let fs = q.feature_scale();
    let density = |r: f64| r * r * q.radial_fourier_3d(r).norm_sqr() * weight(n, s, r);
    let xi_max = truncation_bound(density, fs);
    let c = cutoff as i64;
    let max_dist = (3.0f64).sqrt() * cutoff as f64;
    let h = (0.25 / fs).min(1.0 / n as f64).min(4.0 / max_dist.max(1.0));
    let nodes: Vec<(f64, f64)> = panel_nodes(0.0, xi_max, h)
        .into_par_iter()
        .map(|(r, w)| (r, w * r * r * q.radial_fourier_3d(r).norm_sqr() * weight(n, s, r)))
        .collect();
    let norm = 4.0 * PI / ((2.0 * PI).powi(3) * (n as f64).powi(3));
    // α depends on |Δ|² only; one radial integral per distinct value.
    let max_sq = 3 * (cutoff * cutoff);
    let radial: Vec<f64> = (0..=max_sq)
        .into_par_iter()
        .map(|m| {
            let dist = (m as f64).sqrt();
            nodes
                .iter()
                .map(|&(r, wg)| {
                    let x = r * dist;
                    let sinc = if x < 1e-8 { 1.0 } else { x.sin() / x };
                    wg * sinc
                })
                .sum::<f64>()
                * norm
        })
        .collect();
    let side = 2 * c + 1;
    let mut diffs = Vec::with_capacity((side * side * side) as usize);
    let mut hs2 = 0.0;
    let full = 2 * n as i64 + 1;
    for a in -c..=c {
        for b in -c..=c {
            for e in -c..=c {
                let v = radial[(a * a + b * b + e * e) as usize];
                diffs.push(Complex64::new(v, 0.0));
                let count = ((full - a.abs()) * (full - b.abs()) * (full - e.abs())) as f64;
                hs2 += count * v * v;
            }
        }
    }
    let a0 = radial[0];
    AlphaMatrix {
        s,
        n,
        d: 3,
        cutoff,
        trace: (full as f64).powi(3) * a0,
        hs_norm: hs2.sqrt(),
        diffs,
        xi_max,
    }
}

/// Σ_{j,ℓ} α_{jℓ} u_j u_ℓ through the Toeplitz structure.
pub fn quadratic_form(a: &AlphaMatrix, u: &CoefficientField) -> Result<f64> {
    if a.n != u.n || a.d != u.d {
        return Err(Error::InvalidParameter("alpha matrix and field disagree on (N, d)".into()));
    }
    let (value, scale) = if a.d == 1 {
        let size = u.side();
        let v = &u.values;
        let mut total = a.diffs[0] * v.iter().map(|x| x * x).sum::<f64>();
        for delta in 1..size {
            let c: f64 = (delta..size).map(|j| v[j] * v[j - delta]).sum();
            // α_Δ C_Δ + α_{-Δ} C_Δ
            total += (a.diffs[delta] + a.diffs[delta].conj()) * c;
        }
        (total, a.diffs[0].re * v.iter().map(|x| x * x).sum::<f64>())
    } else {
        let c = a.cutoff as i64;
        let n = u.n as i64;
        let mut total = Complex64::new(0.0, 0.0);
        for k in 0..u.len() {
            let uj = u.values[k];
            if uj == 0.0 {
                continue;
            }
            let j = u.multi_index(k);
            for d0 in -c..=c {
                for d1 in -c..=c {
                    for d2 in -c..=c {
                        let l = [j[0] - d0, j[1] - d1, j[2] - d2];
                        if l.iter().any(|x| x.abs() > n) {
                            continue;
                        }
                        total += a.entry_diff(&[d0, d1, d2]) * (uj * u.get(&l));
                    }
                }
            }
        }
        (total, a.diffs[a.diffs.len() / 2].re * u.values.iter().map(|x| x * x).sum::<f64>())
    };
    if value.im.abs() > 1e-9 * (value.re.abs() + scale).max(f64::MIN_POSITIVE) {
        return Err(Error::NumericalInconsistency(format!(
            "quadratic form has imaginary residue {:e}",
            value.im
        )));
    }
    Ok(value.re)
}

/// Σ_j u_j e^{-iηj} by Horner's rule.
fn trig_sum(u: &CoefficientField, eta: f64) -> Complex64 {
    let z = Complex64::new(0.0, -eta).exp();
    let mut acc = Complex64::new(0.0, 0.0);
    for &v in u.values.iter().rev() {
        acc = acc * z + v;
    }
    // values start at j = -N
    acc * Complex64::new(0.0, eta * u.n as f64).exp()
}

/// H^{-s} norm of V_# by direct spectral quadrature, with V̂_# assembled
/// from q̂: V̂_#(ξ) = N⁻¹ q̂(ξ/N) Σ_j u_j e^{-iξj/N}. The base profile q₀ is
/// ignored.
pub fn hnorm_spectral(v: &RandomPotential, s: f64) -> Result<f64> {
    hnorm_sharp_minus(v, s, |_| Complex64::new(0.0, 0.0))
}

/// H^{-s} norm of V_# - g, with ĝ given as a function of ξ.
pub fn hnorm_sharp_minus<G: Fn(f64) -> Complex64 + Sync>(v: &RandomPotential, s: f64, g_hat: G) -> Result<f64> {
    if v.d() != 1 {
        return Err(Error::UnsupportedDimension(v.d()));
    }
    if !(s > 0.0) {
        return Err(Error::InvalidParameter("Sobolev order s must be positive".into()));
    }
    let n = v.n;
    let nf = n as f64;
    let q = &v.q;
    let fs = q.feature_scale();
    let density = |eta: f64| q.fourier(eta).norm_sqr().max(q.fourier(-eta).norm_sqr()) * weight(n, s, eta);
    let xi_max = truncation_bound(density, fs);
    // in η = ξ/N: (1/2π) ∫ |V̂(Nη) - ĝ(Nη)|² (1+N²η²)^{-s} N dη
    let integrand = |eta: f64| {
        let vh = q.fourier(eta) * trig_sum(&v.coeffs, eta) / nf;
        let diff = vh - g_hat(nf * eta);
        Complex64::new(diff.norm_sqr() * weight(n, s, eta) * nf / (2.0 * PI), 0.0)
    };
    let h = (0.5 / fs).min(2.0 / nf);
    let panels = ((2.0 * xi_max / h).ceil() as usize).max(8);
    // split the range into blocks integrated in parallel
    let blocks = 64usize;
    let width = 2.0 * xi_max / blocks as f64;
    let per_block = (panels / blocks).max(1);
    // Tolerance relative to a coarse pass over |V̂|² + |ĝ|²: the density
    // near η = 0 vanishes for mean-zero q, and the difference itself can
    // cancel far below the roundoff of its terms. Either stalls the bisection.
    let magnitude = |eta: f64| {
        let vh = q.fourier(eta) * trig_sum(&v.coeffs, eta) / nf;
        let m = vh.norm_sqr() + g_hat(nf * eta).norm_sqr();
        Complex64::new(m * weight(n, s, eta) * nf / (2.0 * PI), 0.0)
    };
    let rough: f64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = -xi_max + width * b as f64;
            composite(gl20(), lo, lo + width, per_block, magnitude).re
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let tol = (1e-12 * rough.abs()).clamp(1e-300, 1e-10);
    let total: f64 = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = -xi_max + width * b as f64;
            adaptive(lo, lo + width, tol / blocks as f64, per_block, integrand).re
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total.max(0.0).sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailPoint {
    pub t: f64,
    pub t2: f64,
    pub exceed: usize,
    pub p: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailExperiment {
    pub samples: usize,
    pub trace: f64,
    pub hs_norm: f64,
    pub mean: f64,
    pub std_err: f64,
    pub points: Vec<TailPoint>,
    /// Thresholds dropped because t² < 2|trace(α)|.
    pub filtered: Vec<f64>,
    pub warnings: Vec<String>,
    /// Slope of ln P against t²/|α|_HS over points with P > 0.
    pub decay_rate: Option<f64>,
    pub decay_rate_stderr: Option<f64>,
    pub monotone: bool,
}

impl TailExperiment {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,t2,empirical_p,wilson_lo,wilson_hi\n");
        for p in &self.points {
            let _ = writeln!(out, "{:?},{:?},{:?},{:?},{:?}", p.t, p.t2, p.p, p.wilson_lo, p.wilson_hi);
        }
        out
    }
}

/// Monte Carlo samples of the quadratic form Σ α_{jℓ} u_j u_ℓ for fields
/// drawn from `law`, sample m using seed `derive_seed(seed, m)`.
pub fn quadratic_form_samples(a: &AlphaMatrix, law: &CoefficientLaw, m: usize, seed: u64) -> Result<Vec<f64>> {
    (0..m)
        .into_par_iter()
        .map(|k| {
            let u = crate::ensemble::sample_coefficients(law, a.n, a.d, crate::ensemble::derive_seed(seed, k as u64))?;
            quadratic_form(a, &u)
        })
        .collect()
}

pub fn hw_tail_experiment(
    a: &AlphaMatrix,
    law: &CoefficientLaw,
    t_grid: &[f64],
    m: usize,
    seed: u64,
) -> Result<TailExperiment> {
    if m < 100 {
        return Err(Error::InvalidParameter("tail experiments need at least 100 samples".into()));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter("t grid must be increasing".into()));
    }
    let samples = quadratic_form_samples(a, law, m, seed)?;
    let (mean, var) = crate::stats::mean_and_variance(&samples);
    let mut filtered = Vec::new();
    let mut warnings = Vec::new();
    let mut points = Vec::new();
    for &t in t_grid {
        let t2 = t * t;
        if t2 < 2.0 * a.trace.abs() {
            filtered.push(t);
            warnings.push(format!("t = {t} violates t² ≥ 2|trace(α)|; dropped"));
            continue;
        }
        let exceed = samples.iter().filter(|q| q.abs() >= t2).count();
        let (lo, hi) = wilson_interval(exceed, m);
        points.push(TailPoint {
            t,
            t2,
            exceed,
            p: exceed as f64 / m as f64,
            wilson_lo: lo,
            wilson_hi: hi,
        });
    }
    let monotone = points.windows(2).all(|w| w[1].p <= w[0].p);
    let fit_pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.exceed > 0)
        .map(|p| (p.t2 / a.hs_norm, p.p.ln()))
        .collect();
    let fit = if fit_pts.len() >= 2 {
        let x: Vec<f64> = fit_pts.iter().map(|p| p.0).collect();
        let y: Vec<f64> = fit_pts.iter().map(|p| p.1).collect();
        linear_fit(&x, &y).ok()
    } else {
        None
    };
    Ok(TailExperiment {
        samples: m,
        trace: a.trace,
        hs_norm: a.hs_norm,
        mean,
        std_err: (var / m as f64).sqrt(),
        points,
        filtered,
        warnings,
        decay_rate: fit.map(|f| f.slope),
        decay_rate_stderr: fit.map(|f| f.slope_stderr),
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::deterministic_coefficients;
    use crate::ensemble::Pattern;
    use crate::profiles::BumpKind;

    #[test]
    fn hermitian_and_bounded() {
        let q = Profile::parse("lincomb(psi + 0.5i*d1(psi))").unwrap();
        let a = alpha_matrix(&q, 4, 1, 2.0).unwrap();
        assert!((a.entry(&[2], &[5]) - a.entry(&[5], &[2]).conj()).norm() < 1e-15);
        let a00 = a.entry(&[0], &[0]);
        assert!(a00.re > 0.0 && a00.im.abs() < 1e-15);
        for k in 0..=8 {
            assert!(a.entry_diff(&[k]).norm() <= a00.re * (1.0 + 1e-12));
        }
    }

    #[test]
    fn unit_field_gives_diagonal_entry() {
        let q = Profile::bump(BumpKind::Psi);
        let a = alpha_matrix(&q, 3, 1, 2.0).unwrap();
        let mut v = vec![0.0; 7];
        v[3] = 1.0;
        let u = CoefficientField::from_values(1, 3, v).unwrap();
        assert!((quadratic_form(&a, &u).unwrap() - a.entry_diff(&[0]).re).abs() < 1e-18);
        let z = CoefficientField::zeros(1, 3).unwrap();
        assert_eq!(quadratic_form(&a, &z).unwrap(), 0.0);
    }

    #[test]
    fn parseval_on_alternating_field() {
        let q = Profile::bump(BumpKind::PsiPrime);
        let u = deterministic_coefficients(Pattern::Alternating, 6, 1).unwrap();
        let a = alpha_matrix(&q, 6, 1, 1.0).unwrap();
        let v = RandomPotential::new(Profile::zero(), q, u.clone());
        let qf = quadratic_form(&a, &u).unwrap();
        let h = hnorm_spectral(&v, 1.0).unwrap();
        assert!((qf - h * h).abs() < 1e-8 * qf, "{qf} vs {}", h * h);
    }

    #[test]
    fn three_dimensional_trace() {
        let q = Profile::bump(BumpKind::Psi);
        let a = alpha_matrix_with_cutoff(&q, 2, 3, 2.0, 2).unwrap();
        assert!(a.trace > 0.0);
        assert!(a.hs_norm <= 125.0 * a.entry_diff(&[0, 0, 0]).re * (1.0 + 1e-12));
    }
}
