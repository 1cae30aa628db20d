//! Resonant and coresonant states at a simple resonance λ₀.
//!
//! Near λ₀ the resolvent kernel is R(λ; x, y) = -u₋(x_<) u₊(x_>) / W(λ) with
//! W = 2F. At λ₀ the two outgoing solutions are proportional, u₊ = c·u₋, so
//! the residue is -c u₋(x) u₋(y) / (2F′(λ₀)). Writing it as i f(x) g(y) gives
//! f = g = κ u₋ with κ² = i c / (2F′(λ₀)).

use super::contour::{newton, winding_circle, CachedFn};
use super::defect::{defect, left_solution, right_solution, DefectFn};
use crate::error::{Error, Result};
use crate::profiles::Profile;
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct ResonantPair {
    pub lambda0: Complex64,
    pub q0: Profile,
    /// Half-width of the sampling interval [-L, L].
    pub l: f64,
    pub grid: Vec<f64>,
    pub f: Vec<Complex64>,
    pub g: Vec<Complex64>,
    /// κ in f = g = κ u₋.
    pub norm_const: Complex64,
    /// Radius of a disk around λ₀ containing no other resonance.
    pub isolation_radius: f64,
}

const GRID_POINTS: usize = 201;
/// Number of nodes of the trapezoid rule for residue checks.
pub const RESIDUE_NODES: usize = 32;

impl ResonantPair {
    /// The free pair at λ₀ = 0: f = g = 1/√2.
    pub fn free() -> ResonantPair {
        let l = 1.0;
        let grid: Vec<f64> = (0..GRID_POINTS)
            .map(|k| -l + 2.0 * l * k as f64 / (GRID_POINTS - 1) as f64)
            .collect();
        let c = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        ResonantPair {
            lambda0: Complex64::new(0.0, 0.0),
            q0: Profile::zero(),
            l,
            f: vec![c; GRID_POINTS],
            g: vec![c; GRID_POINTS],
            grid,
            norm_const: c,
            isolation_radius: f64::INFINITY,
        }
    }

    pub fn is_free(&self) -> bool {
        self.q0.is_zero()
    }

    /// f at arbitrary points (g = f in the bilinear convention used here).
    pub fn f_at(&self, xs: &[f64]) -> Result<Vec<Complex64>> {
        if self.is_free() {
            return Ok(vec![self.norm_const; xs.len()]);
        }
        let u = left_solution(&self.q0, self.lambda0, xs)?;
        Ok(u.iter().map(|s| s[0] * self.norm_const).collect())
    }

    /// f and f′ at arbitrary points.
    pub fn f_and_derivative(&self, xs: &[f64]) -> Result<Vec<(Complex64, Complex64)>> {
        if self.is_free() {
            return Ok(vec![(self.norm_const, Complex64::new(0.0, 0.0)); xs.len()]);
        }
        let u = left_solution(&self.q0, self.lambda0, xs)?;
        Ok(u.iter().map(|s| (s[0] * self.norm_const, s[1] * self.norm_const)).collect())
    }

    /// The product f·g at arbitrary points.
    pub fn fg_at(&self, xs: &[f64]) -> Result<Vec<Complex64>> {
        Ok(self.f_at(xs)?.into_iter().map(|v| v * v).collect())
    }

    /// (1/2πi)∮ R(μ; x, y) dμ over a circle around λ₀, trapezoid rule with
    /// RESIDUE_NODES nodes, for every pair (x, y).
    pub fn contour_residue(&self, radius: f64, xs: &[f64], ys: &[f64]) -> Result<Vec<Vec<Complex64>>> {
        let mut pts: Vec<f64> = xs.iter().chain(ys).copied().collect();
        pts.sort_by(|a, b| a.total_cmp(b));
        pts.dedup();
        let idx = |x: f64| pts.iter().position(|&p| p == x).unwrap();
        let mut acc = vec![vec![Complex64::new(0.0, 0.0); ys.len()]; xs.len()];
        for k in 0..RESIDUE_NODES {
            let e = Complex64::from_polar(1.0, 2.0 * PI * k as f64 / RESIDUE_NODES as f64);
            let mu = self.lambda0 + radius * e;
            let um = left_solution(&self.q0, mu, &pts)?;
            let up = right_solution(&self.q0, mu, &pts)?;
            let w = 2.0 * defect(&self.q0, mu)?;
            for (a, &x) in xs.iter().enumerate() {
                for (b, &y) in ys.iter().enumerate() {
                    let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
                    let r = -um[idx(lo)][0] * up[idx(hi)][0] / w;
                    acc[a][b] += r * e * (radius / RESIDUE_NODES as f64);
                }
            }
        }
        Ok(acc)
    }

    /// max |residue - i f(x) g(y)| / max |i f(x) g(y)| over the sample grid
    /// (relative to the peak, so nodes of f do not inflate it).
    pub fn residue_check(&self, xs: &[f64], ys: &[f64]) -> Result<f64> {
        let radius = if self.isolation_radius.is_finite() {
            0.25 * self.isolation_radius
        } else {
            0.25
        };
        let res = self.contour_residue(radius, xs, ys)?;
        let fx = self.f_at(xs)?;
        let gy = self.f_at(ys)?;
        let i = Complex64::new(0.0, 1.0);
        let mut worst: f64 = 0.0;
        let mut peak: f64 = 0.0;
        for a in 0..xs.len() {
            for b in 0..ys.len() {
                let expect = i * fx[a] * gy[b];
                worst = worst.max((res[a][b] - expect).norm());
                peak = peak.max(expect.norm());
            }
        }
        Ok(worst / peak)
    }
}

/// Resonant pair of q₀ at the simple resonance near `lambda0`.
pub fn resonant_pair(q0: &Profile, lambda0: Complex64) -> Result<ResonantPair> {
    if q0.is_zero() {
        if lambda0.norm() < 1e-12 {
            return Ok(ResonantPair::free());
        }
        return Err(Error::InvalidParameter("the zero potential has its only resonance at 0".into()));
    }
    let reach = 0.5f64.min(0.25 * (1.0 + lambda0.norm()));
    let df = DefectFn::for_rect(
        q0,
        lambda0.re - reach,
        lambda0.re + reach,
        lambda0.im - reach,
        lambda0.im + reach,
    )?;
    let f = |z: Complex64| df.eval(z);
    let cf = CachedFn::new(&f);
    let (lam, res) = newton(&cf, lambda0, 1.0, 1e-14)?;
    // isolation radius: shrink until the circle winds exactly once
    let mut r = 0.5f64.min(0.25 * (1.0 + lam.norm()));
    let mut w = winding_circle(&cf, lam, r, 64)?;
    let mut tries = 0;
    while w.count != 1 && tries < 12 {
        if w.count == 0 {
            return Err(Error::NumericalInconsistency(format!("no zero of F near {lam}")));
        }
        r *= 0.5;
        w = winding_circle(&cf, lam, r, 64)?;
        tries += 1;
    }
    if w.count != 1 {
        return Err(Error::NotSimple(w.count));
    }
    if res > (1e-9 * w.max_abs).max(super::DEFECT_NOISE) {
        return Err(Error::Accuracy(format!("resonance residual {res:e} too large")));
    }
    let h = 1e-6 * r.min(1.0);
    let dfd = (cf.eval(lam + h)? - cf.eval(lam - h)?) / (2.0 * h);
    let (a, b) = q0.support();
    let um = left_solution(q0, lam, &[b])?[0];
    let up = right_solution(q0, lam, &[b])?[0];
    // u₊ = c u₋ in the least-squares sense over (u, u′)
    let denom = um[0].norm_sqr() + um[1].norm_sqr();
    let c = (up[0] * um[0].conj() + up[1] * um[1].conj()) / denom;
    let i = Complex64::new(0.0, 1.0);
    let kappa = (i * c / (2.0 * dfd)).sqrt();
    let l = a.abs().max(b.abs());
    let grid: Vec<f64> = (0..GRID_POINTS)
        .map(|k| -l + 2.0 * l * k as f64 / (GRID_POINTS - 1) as f64)
        .collect();
    let u = left_solution(q0, lam, &grid)?;
    let fv: Vec<Complex64> = u.iter().map(|s| s[0] * kappa).collect();
    Ok(ResonantPair {
        lambda0: lam,
        q0: q0.clone(),
        l,
        grid,
        g: fv.clone(),
        f: fv,
        norm_const: kappa,
        isolation_radius: r,
    })
}
