//! Characteristic series φ(λ) = λ - λ₀ + i Σ_k (-1)^k a_k(λ) with
//! a_k = ⟨(V_# L)^k V_# f, g⟩, L the regular part of the resolvent at λ₀.
//!
//! For q₀ ≡ 0 (λ₀ = 0, f = g = 1/√2) the regular part has the explicit
//! kernel K(λ, |x - y|), K(λ, r) = i(e^{iλr} - 1)/(2λ) = -½ ∫₀^r e^{iλs} ds.
//! The integral form makes L h a pair of running integrals,
//!
//!   (L h)(x) = -½ [∫_{t<x} B(t) dt + ∫_{t>x} B̃(t) dt],
//!   B(t) = ∫_{y<t} h(y) e^{iλ(t-y)} dy,  B̃(t) = ∫_{y>t} h(y) e^{iλ(y-t)} dy,
//!
//! which costs O(#nodes) per application and never divides by λ.

use crate::ensemble::RandomPotential;
use crate::error::{Error, Result};
use crate::quadrature::GaussLegendre;
use crate::resonances::contour::{newton, winding_circle, CachedFn};
use crate::resonances::ResonantPair;
use crate::sobolev::hnorm_spectral;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::sync::OnceLock;

/// Highest series order available with the explicit free kernel.
pub const MAX_ORDER_FREE: usize = 2;
/// Highest order when q₀ ≠ 0 (no closed-form kernel for L).
pub const MAX_ORDER_GENERAL: usize = 0;

const PANEL_ORDER: usize = 24;
const SERIES_CUTOFF: f64 = 1e-4;
/// Bumps are flat to all orders at their edges, which slows GL convergence
/// on panels ending there; four panels per feature scale restore ~1e-11.
const PANELS_PER_SCALE: f64 = 4.0;

/// K(λ, r) = i(e^{iλr} - 1)/(2λ), with the series -r/2 - iλr²/4 - … near λr = 0.
pub fn regularized_kernel(lambda: Complex64, r: f64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let z = i * lambda * r;
    if z.norm() < SERIES_CUTOFF {
        // -r/2 · (1 + z/2 + z²/6 + z³/24)
        return -0.5 * r * (1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0)));
    }
    i * (z.exp() - 1.0) / (2.0 * lambda)
}

fn rule() -> &'static (GaussLegendre, Vec<Vec<f64>>) {
    static R: OnceLock<(GaussLegendre, Vec<Vec<f64>>)> = OnceLock::new();
    R.get_or_init(|| {
        let g = GaussLegendre::new(PANEL_ORDER);
        let s = g.cumulative_matrix();
        (g, s)
    })
}

/// Panels aligned with the bump edges of V_#, each carrying a GL rule.
#[derive(Debug, Clone)]
struct SeriesGrid {
    edges: Vec<f64>,
    x: Vec<f64>,
    w: Vec<f64>,
    v: Vec<Complex64>,
}

impl SeriesGrid {
    fn new(v: &RandomPotential) -> Result<Self> {
        if v.d() != 1 {
            return Err(Error::UnsupportedDimension(v.d()));
        }
        let nf = v.n as f64;
        let n = v.n as i64;
        let (a, b) = v.q.support();
        let mut cuts: Vec<f64> = (-n..=n)
            .flat_map(|j| [(j as f64 + a) / nf, (j as f64 + b) / nf])
            .collect();
        cuts.sort_by(|p, q| p.total_cmp(q));
        cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-14);
        let max_width = v.q.feature_scale().min(1.0) / (PANELS_PER_SCALE * nf);
        let mut edges = vec![cuts[0]];
        for win in cuts.windows(2) {
            let pieces = ((win[1] - win[0]) / max_width).ceil().max(1.0) as usize;
            for k in 1..=pieces {
                edges.push(win[0] + (win[1] - win[0]) * k as f64 / pieces as f64);
            }
        }
        let (g, _) = rule();
        let mut x = Vec::with_capacity((edges.len() - 1) * PANEL_ORDER);
        let mut w = Vec::with_capacity(x.capacity());
        for p in edges.windows(2) {
            for (t, wt) in g.mapped(p[0], p[1]) {
                x.push(t);
                w.push(wt);
            }
        }
        let v = x.iter().map(|&t| v.eval_sharp(t)).collect();
        Ok(SeriesGrid { edges, x, w, v })
    }

    fn panels(&self) -> usize {
        self.edges.len() - 1
    }

    fn mirrored(&self) -> SeriesGrid {
        SeriesGrid {
            edges: self.edges.iter().rev().map(|e| -e).collect(),
            x: self.x.iter().rev().map(|t| -t).collect(),
            w: self.w.iter().rev().copied().collect(),
            v: self.v.iter().rev().copied().collect(),
        }
    }

    /// ∫_{t<x_i} B(t) dt at every node, B(t) = ∫_{y<t} h(y) e^{iλ(t-y)} dy.
    fn left_sweep(&self, h: &[Complex64], lambda: Complex64) -> Vec<Complex64> {
        let (g, s) = rule();
        let i = Complex64::new(0.0, 1.0);
        let p = PANEL_ORDER;
        let mut b_edge = Complex64::new(0.0, 0.0);
        let mut int_edge = Complex64::new(0.0, 0.0);
        let mut out = vec![Complex64::new(0.0, 0.0); h.len()];
        let mut b_nodes = vec![Complex64::new(0.0, 0.0); p];
        for k in 0..self.panels() {
            let (lo, hi) = (self.edges[k], self.edges[k + 1]);
            let half = 0.5 * (hi - lo);
            let xs = &self.x[k * p..(k + 1) * p];
            let hs = &h[k * p..(k + 1) * p];
            // e^{iλ(t-y)} = e^{iλ(t-c)} e^{-iλ(y-c)} about the panel center
            let c = 0.5 * (lo + hi);
            let ein: Vec<Complex64> = xs.iter().map(|&t| (i * lambda * (t - c)).exp()).collect();
            let hy: Vec<Complex64> = (0..p).map(|q| hs[q] / ein[q]).collect();
            for m in 0..p {
                let acc: Complex64 = (0..p).map(|q| s[m][q] * hy[q]).sum();
                b_nodes[m] = (i * lambda * (xs[m] - lo)).exp() * b_edge + half * ein[m] * acc;
            }
            for m in 0..p {
                let acc: Complex64 = (0..p).map(|q| s[m][q] * b_nodes[q]).sum();
                out[k * p + m] = int_edge + half * acc;
            }
            let tail: Complex64 = (i * lambda * (hi - c)).exp()
                * (0..p).map(|q| g.weights[q] * hy[q]).sum::<Complex64>();
            int_edge += half * (0..p).map(|q| g.weights[q] * b_nodes[q]).sum::<Complex64>();
            b_edge = (i * lambda * (hi - lo)).exp() * b_edge + half * tail;
        }
        out
    }

    /// (L h)(x_i) with the free regular kernel.
    fn apply_free_regular(&self, h: &[Complex64], lambda: Complex64) -> Vec<Complex64> {
        let left = self.left_sweep(h, lambda);
        let mirror = self.mirrored();
        let hr: Vec<Complex64> = h.iter().rev().copied().collect();
        let right = mirror.left_sweep(&hr, lambda);
        let n = h.len();
        (0..n).map(|k| -0.5 * (left[k] + right[n - 1 - k])).collect()
    }

    fn pair_with(&self, a: &[Complex64], b: &[Complex64]) -> Complex64 {
        self.w.iter().zip(a).zip(b).map(|((w, x), y)| *w * x * y).sum()
    }
}

fn check_order(k: usize, pair: &ResonantPair) -> Result<()> {
    let cap = if pair.is_free() { MAX_ORDER_FREE } else { MAX_ORDER_GENERAL };
    if k > cap {
        return Err(Error::Capability(format!(
            "series term of order {k} needs an explicit regular kernel; available up to {cap} for this base potential"
        )));
    }
    Ok(())
}

/// Series terms a_0..=a_K at λ, evaluated on a shared grid.
struct TermEvaluator {
    grid: SeriesGrid,
    fv: Vec<Complex64>,
    a0: Complex64,
    free: bool,
}

impl TermEvaluator {
    fn new(v: &RandomPotential, pair: &ResonantPair) -> Result<Self> {
        let grid = SeriesGrid::new(v)?;
        let fv = pair.f_at(&grid.x)?;
        let vf: Vec<Complex64> = grid.v.iter().zip(&fv).map(|(a, b)| a * b).collect();
        let a0 = grid.pair_with(&vf, &fv);
        Ok(TermEvaluator {
            grid,
            fv,
            a0,
            free: pair.is_free(),
        })
    }

    fn terms(&self, k_max: usize, lambda: Complex64) -> Vec<Complex64> {
        let mut out = vec![self.a0];
        if k_max == 0 {
            return out;
        }
        debug_assert!(self.free);
        let mut h: Vec<Complex64> = self.grid.v.iter().zip(&self.fv).map(|(a, b)| a * b).collect();
        for _ in 1..=k_max {
            let lh = self.grid.apply_free_regular(&h, lambda);
            h = self.grid.v.iter().zip(&lh).map(|(a, b)| a * b).collect();
            out.push(self.grid.pair_with(&h, &self.fv));
        }
        out
    }
}

/// a_k(λ) = ⟨(V_# L)^k V_# f, g⟩ for the oscillating part of `v`.
pub fn term_a(k: usize, v: &RandomPotential, pair: &ResonantPair, lambda: Complex64) -> Result<Complex64> {
    check_order(k, pair)?;
    let ev = TermEvaluator::new(v, pair)?;
    Ok(ev.terms(k, lambda)[k])
}

/// Truncated characteristic series for one realization.
pub struct CharacteristicSeries {
    pub pair: ResonantPair,
    pub truncation: usize,
    /// H^{-1} norm of V_#.
    pub h: f64,
    /// Decay constant with |a_k| ≤ (C h)^{k+1}.
    pub decay_constant: f64,
    pub tail_estimate: f64,
    eval: TermEvaluator,
}

impl CharacteristicSeries {
    pub fn new(v: &RandomPotential, pair: &ResonantPair, truncation: usize, decay_constant: f64) -> Result<Self> {
        check_order(truncation, pair)?;
        let eval = TermEvaluator::new(v, pair)?;
        let h = if v.q.is_zero() || v.coeffs.values.iter().all(|&u| u == 0.0) {
            0.0
        } else {
            hnorm_spectral(v, 1.0)?
        };
        let tail_estimate = tail_estimate(decay_constant, h, truncation);
        Ok(CharacteristicSeries {
            pair: pair.clone(),
            truncation,
            h,
            decay_constant,
            tail_estimate,
            eval,
        })
    }

    /// Series without the H^{-1} norm (h and the tail are NaN); for bulk
    /// k = 0 campaigns where only the root is needed.
    pub fn without_tail(v: &RandomPotential, pair: &ResonantPair, truncation: usize) -> Result<Self> {
        check_order(truncation, pair)?;
        Ok(CharacteristicSeries {
            pair: pair.clone(),
            truncation,
            h: f64::NAN,
            decay_constant: f64::NAN,
            tail_estimate: f64::NAN,
            eval: TermEvaluator::new(v, pair)?,
        })
    }

    pub fn terms(&self, lambda: Complex64) -> Vec<Complex64> {
        self.eval.terms(self.truncation, lambda)
    }

    pub fn phi(&self, lambda: Complex64) -> Complex64 {
        let i = Complex64::new(0.0, 1.0);
        let sum: Complex64 = self
            .terms(lambda)
            .iter()
            .enumerate()
            .map(|(k, a)| if k % 2 == 0 { *a } else { -*a })
            .sum();
        lambda - self.pair.lambda0 + i * sum
    }

    /// Default disk radius: the pair's isolation radius, capped at 0.5.
    pub fn default_radius(&self) -> f64 {
        self.pair.isolation_radius.min(0.5)
    }
}

/// Σ_{k>K} (C h)^{k+1} = (C h)^{K+2}/(1 - C h); infinite once C h ≥ 1.
pub fn tail_estimate(c: f64, h: f64, truncation: usize) -> f64 {
    let r = c * h;
    if r >= 1.0 {
        f64::INFINITY
    } else {
        r.powi(truncation as i32 + 2) / (1.0 - r)
    }
}

/// Smallest C with |a_k| ≤ (C h)^{k+1} on every calibration record
/// (h, [a_0, a_1, …]).
pub fn fit_decay_constant(records: &[(f64, Vec<Complex64>)]) -> Result<f64> {
    let mut c: f64 = 0.0;
    for (h, terms) in records {
        if *h <= 0.0 {
            continue;
        }
        for (k, a) in terms.iter().enumerate() {
            c = c.max(a.norm().powf(1.0 / (k as f64 + 1.0)) / h);
        }
    }
    if c == 0.0 {
        return Err(Error::DegenerateInput("no nonzero calibration terms".into()));
    }
    Ok(c)
}

/// Zero of φ in the disk D(center, radius), certified unique by winding.
pub fn phi_root(series: &CharacteristicSeries, center: Complex64, radius: f64, tol: f64) -> Result<Complex64> {
    if series.eval.grid.v.iter().all(|v| *v == Complex64::new(0.0, 0.0)) {
        return Ok(series.pair.lambda0);
    }
    let f = |z: Complex64| -> Result<Complex64> { Ok(series.phi(z)) };
    let cf = CachedFn::new(&f);
    let w = winding_circle(&cf, center, radius, 64)?;
    if w.count != 1 {
        return Err(Error::NotInRegime(format!(
            "characteristic function winds {} times on the disk of radius {radius:e}",
            w.count
        )));
    }
    let (root, res) = newton(&cf, center, radius.min(1.0), tol)?;
    if (root - center).norm() > radius {
        return Err(Error::NotInRegime(format!("Newton left the disk, landing at {root}")));
    }
    if res > tol.max(1e-13) {
        return Err(Error::Accuracy(format!("|phi| = {res:e} at the root")));
    }
    Ok(root)
}

/// Per-sample diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SeriesDiagnostics {
    pub a0: [f64; 2],
    pub a1: Option<[f64; 2]>,
    pub tail_estimate: f64,
    pub root: [f64; 2],
    pub solver_resonance: Option<[f64; 2]>,
    pub gap: Option<f64>,
}

impl SeriesDiagnostics {
    pub fn new(series: &CharacteristicSeries, root: Complex64, solver: Option<Complex64>) -> Self {
        let terms = series.terms(root);
        let c2 = |z: Complex64| [z.re, z.im];
        SeriesDiagnostics {
            a0: c2(terms[0]),
            a1: terms.get(1).copied().map(c2),
            tail_estimate: series.tail_estimate,
            root: c2(root),
            solver_resonance: solver.map(c2),
            gap: solver.map(|s| (s - root).norm()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{sample_coefficients, CoefficientLaw};
    use crate::profiles::Profile;
    use crate::quadrature::{composite, gl20};

    fn potential(q: &str, n: usize, seed: u64) -> RandomPotential {
        let u = sample_coefficients(&CoefficientLaw::Rademacher, n, 1, seed).unwrap();
        RandomPotential::new(Profile::zero(), Profile::parse(q).unwrap(), u)
    }

    #[test]
    fn kernel_limits() {
        let lam = Complex64::new(0.7, -0.3);
        assert_eq!(regularized_kernel(lam, 0.0), Complex64::new(0.0, 0.0));
        let h = 1e-6;
        let d = (regularized_kernel(lam, h) - regularized_kernel(lam, 0.0)) / h;
        assert!((d + 0.5).norm() < 1e-6);
        let z = regularized_kernel(Complex64::new(0.0, 0.0), 1.3);
        assert!((z + 0.65).norm() < 1e-15);
        // both branches agree across the switch
        let lam = Complex64::new(0.99e-4, 0.0);
        let series = regularized_kernel(lam, 1.0);
        let direct = Complex64::new(0.0, 1.0) * ((Complex64::new(0.0, 1.0) * lam).exp() - 1.0) / (2.0 * lam);
        assert!((series - direct).norm() < 1e-9);
    }

    #[test]
    fn first_term_brute_force() {
        let v = potential("d1(psi)", 3, 5);
        let pair = ResonantPair::free();
        let lam = Complex64::new(0.4, -0.2);
        let a1 = term_a(1, &v, &pair, lam).unwrap();
        // ½ ∫∫ V(x) K(λ,|x-y|) V(y) dy dx, split at y = x
        let (lo, hi) = v.support();
        let inner = |x: f64| {
            let f = |y: f64| regularized_kernel(lam, (x - y).abs()) * v.eval_sharp(y);
            composite(gl20(), lo, x, 60, f) + composite(gl20(), x, hi, 60, f)
        };
        let brute = 0.5 * composite(gl20(), lo, hi, 120, |x| v.eval_sharp(x) * inner(x));
        assert!((a1 - brute).norm() < 1e-9 * brute.norm(), "{a1} vs {brute}");
    }

    #[test]
    fn multilinear() {
        let v = potential("psi", 8, 2);
        let v2 = v.with_q(Profile::parse("2*psi").unwrap());
        let pair = ResonantPair::free();
        let lam = Complex64::new(0.1, -0.05);
        for k in 0..=2 {
            let a = term_a(k, &v, &pair, lam).unwrap();
            let b = term_a(k, &v2, &pair, lam).unwrap();
            let c = 2f64.powi(k as i32 + 1);
            assert!((b - c * a).norm() <= 1e-12 * b.norm(), "k={k}");
        }
    }

    #[test]
    fn zero_potential_root() {
        let v = potential("zero", 5, 1);
        let s = CharacteristicSeries::new(&v, &ResonantPair::free(), 1, 1.0).unwrap();
        let z = Complex64::new(0.3, 0.1);
        assert_eq!(s.phi(z), z);
        assert_eq!(phi_root(&s, Complex64::new(0.0, 0.0), 0.5, 1e-14).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn capability_error() {
        let mut pair = ResonantPair::free();
        pair.q0 = Profile::parse("psi").unwrap();
        let v = potential("psi", 4, 1);
        assert!(matches!(term_a(1, &v, &pair, pair.lambda0), Err(Error::Capability(_))));
    }
}
