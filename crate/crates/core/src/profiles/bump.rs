//! The standard bump ψ(x) = exp(-1/(1-x²)) on (-1, 1): derivatives in closed
//! form, its cumulative integral and its Fourier transform.

use crate::quadrature::{gl16, GaussLegendre};
use std::sync::OnceLock;

pub const MAX_DERIVATIVE: u8 = 4;

/// Coefficients (ascending powers) of the polynomials P_k with
/// ψ^(k)(x) = ψ(x) P_k(x) / (1 - x²)^(2k).
fn derivative_polys() -> &'static Vec<Vec<f64>> {
    static POLYS: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    POLYS.get_or_init(|| {
        let mut out: Vec<Vec<f64>> = vec![vec![1.0]];
        for k in 0..MAX_DERIVATIVE as usize {
            let p = &out[k];
            // P_{k+1} = -2x P + (1-x²)² P' + 4k x (1-x²) P
            let deg = p.len() + 4;
            let mut next = vec![0.0; deg];
            for (n, &c) in p.iter().enumerate() {
                next[n + 1] += -2.0 * c;
                next[n + 1] += 4.0 * k as f64 * c;
                next[n + 3] -= 4.0 * k as f64 * c;
                if n >= 1 {
                    let d = c * n as f64;
                    next[n - 1] += d;
                    next[n + 1] -= 2.0 * d;
                    next[n + 3] += d;
                }
            }
            while next.len() > 1 && *next.last().unwrap() == 0.0 {
                next.pop();
            }
            out.push(next);
        }
        out
    })
}

pub fn psi(x: f64) -> f64 {
    let s = 1.0 - x * x;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

/// k-th derivative of ψ, `k <= MAX_DERIVATIVE`.
pub fn psi_derivative(k: u8, x: f64) -> f64 {
    let s = 1.0 - x * x;
    if s <= 0.0 {
        return 0.0;
    }
    let base = (-1.0 / s).exp();
    if k == 0 || base == 0.0 {
        return if k == 0 { base } else { 0.0 };
    }
    let poly = &derivative_polys()[k as usize];
    let mut p = 0.0;
    for &c in poly.iter().rev() {
        p = p * x + c;
    }
    base * p / s.powi(2 * k as i32)
}

struct CumulativeTable {
    edges: Vec<f64>,
    prefix: Vec<f64>,
    total: f64,
}

const CUMULATIVE_PANELS: usize = 128;

fn cumulative_table() -> &'static CumulativeTable {
    static TABLE: OnceLock<CumulativeTable> = OnceLock::new();
    TABLE.get_or_init(|| {
        let rule = GaussLegendre::new(24);
        let h = 2.0 / CUMULATIVE_PANELS as f64;
        let edges: Vec<f64> = (0..=CUMULATIVE_PANELS).map(|k| -1.0 + h * k as f64).collect();
        let mut prefix = vec![0.0; CUMULATIVE_PANELS + 1];
        for k in 0..CUMULATIVE_PANELS {
            prefix[k + 1] = prefix[k] + rule.integrate_real(edges[k], edges[k + 1], psi);
        }
        let total = prefix[CUMULATIVE_PANELS];
        CumulativeTable { edges, prefix, total }
    })
}

/// ∫ψ over the real line.
pub fn psi_mass() -> f64 {
    cumulative_table().total
}

/// Ψ(t) = ∫_{-1}^{t} ψ.
pub fn psi_cumulative(t: f64) -> f64 {
    let table = cumulative_table();
    if t <= -1.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return table.total;
    }
    let h = 2.0 / CUMULATIVE_PANELS as f64;
    let k = (((t + 1.0) / h).floor() as usize).min(CUMULATIVE_PANELS - 1);
    let lo = table.edges[k];
    if t == lo {
        return table.prefix[k];
    }
    table.prefix[k] + gl16().integrate_real(lo, t, psi)
}

/// Smooth step S(t) = Ψ(t)/∫ψ, equal to 0 for t ≤ -1 and 1 for t ≥ 1.
pub fn smooth_step(t: f64) -> f64 {
    psi_cumulative(t) / psi_mass()
}

struct FourierNodes {
    x: Vec<f64>,
    wpsi: Vec<f64>,
}

const FOURIER_PANELS: usize = 64;
/// Beyond this frequency the fixed rule is replaced by adaptive quadrature.
pub const FOURIER_FAST_LIMIT: f64 = 400.0;

fn fourier_nodes() -> &'static FourierNodes {
    static NODES: OnceLock<FourierNodes> = OnceLock::new();
    NODES.get_or_init(|| {
        let rule = gl16();
        let h = 1.0 / FOURIER_PANELS as f64;
        let mut x = Vec::new();
        let mut wpsi = Vec::new();
        for p in 0..FOURIER_PANELS {
            let lo = h * p as f64;
            for (xi, wi) in rule.mapped(lo, lo + h) {
                x.push(xi);
                wpsi.push(wi * psi(xi));
            }
        }
        FourierNodes { x, wpsi }
    })
}

/// ψ̂(ξ) by the fixed 1024-node rule (used to build the interpolation table).
pub fn psi_hat_quadrature(xi: f64) -> f64 {
    if xi.abs() > FOURIER_FAST_LIMIT {
        let panels = ((xi.abs() / std::f64::consts::PI).ceil() as usize).max(8);
        return 2.0
            * crate::quadrature::adaptive_real(0.0, 1.0, 1e-14, panels, |x| psi(x) * (xi * x).cos());
    }
    let nodes = fourier_nodes();
    let s: f64 = nodes
        .x
        .iter()
        .zip(&nodes.wpsi)
        .map(|(&x, &w)| w * (xi * x).cos())
        .sum();
    2.0 * s
}

const CHEB_DEGREE: usize = 16;
const CHEB_PANEL: f64 = 1.0;

/// Chebyshev coefficients of ψ̂ on unit panels of [0, FOURIER_FAST_LIMIT].
/// ψ̂ is entire of exponential type 1, so degree 16 per unit panel reaches
/// double precision.
fn cheb_table() -> &'static Vec<[f64; CHEB_DEGREE + 1]> {
    static TABLE: OnceLock<Vec<[f64; CHEB_DEGREE + 1]>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let n = CHEB_DEGREE + 1;
        let panels = (FOURIER_FAST_LIMIT / CHEB_PANEL).ceil() as usize;
        let theta: Vec<f64> = (0..n)
            .map(|k| std::f64::consts::PI * (k as f64 + 0.5) / n as f64)
            .collect();
        (0..panels)
            .map(|p| {
                let lo = p as f64 * CHEB_PANEL;
                let vals: Vec<f64> = theta
                    .iter()
                    .map(|t| psi_hat_quadrature(lo + 0.5 * CHEB_PANEL * (1.0 + t.cos())))
                    .collect();
                let mut c = [0.0; CHEB_DEGREE + 1];
                for (m, cm) in c.iter_mut().enumerate() {
                    let s: f64 = vals
                        .iter()
                        .zip(&theta)
                        .map(|(v, t)| v * (m as f64 * t).cos())
                        .sum();
                    *cm = 2.0 * s / n as f64;
                }
                c[0] *= 0.5;
                c
            })
            .collect()
    })
}

/// ψ̂(ξ) = ∫ e^{-iξx} ψ(x) dx = 2 ∫_0^1 ψ(x) cos(ξx) dx (real and even).
pub fn psi_hat(xi: f64) -> f64 {
    let a = xi.abs();
    if a >= FOURIER_FAST_LIMIT {
        return psi_hat_quadrature(a);
    }
    let table = cheb_table();
    let p = ((a / CHEB_PANEL) as usize).min(table.len() - 1);
    let lo = p as f64 * CHEB_PANEL;
    let t = 2.0 * (a - lo) / CHEB_PANEL - 1.0;
    // Clenshaw
    let c = &table[p];
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = 2.0 * t * b1 - b2 + ck;
        b2 = b1;
        b1 = b0;
    }
    t * b1 - b2 + c[0]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::adaptive_real;

    #[test]
    fn closed_form_derivatives_match_finite_differences() {
        for k in 0..MAX_DERIVATIVE {
            for &x in &[-0.8, -0.3, 0.0, 0.25, 0.7] {
                let h = 1e-5;
                let fd = (psi_derivative(k, x + h) - psi_derivative(k, x - h)) / (2.0 * h);
                let exact = psi_derivative(k + 1, x);
                assert!((fd - exact).abs() < 1e-6 * (1.0 + exact.abs()), "k={k} x={x}");
            }
        }
    }

    #[test]
    fn second_derivative_closed_form() {
        let x: f64 = 0.4;
        let s = 1.0 - x * x;
        let expect = psi(x) * (6.0 * x.powi(4) - 2.0) / s.powi(4);
        assert!((psi_derivative(2, x) - expect).abs() < 1e-14);
    }

    #[test]
    fn mass_matches_adaptive_quadrature() {
        let m = adaptive_real(-1.0, 1.0, 1e-15, 8, psi);
        assert!((psi_mass() - m).abs() < 1e-14);
        assert!((m - 0.443_993_816_168_08).abs() < 1e-12);
    }

    #[test]
    fn fast_fourier_matches_adaptive() {
        for &xi in &[0.0, 0.5, 3.7, 20.0, 150.0, 390.0] {
            let panels = ((xi / std::f64::consts::PI).ceil() as usize).max(8);
            let slow = adaptive_real(-1.0, 1.0, 1e-15, panels, |x| psi(x) * (xi * x).cos());
            assert!((psi_hat(xi) - slow).abs() < 1e-13, "xi={xi}");
        }
    }

    #[test]
    fn table_matches_quadrature() {
        for k in 0..4000 {
            let xi = 0.0997 * k as f64;
            let a = psi_hat(xi);
            let b = psi_hat_quadrature(xi);
            assert!((a - b).abs() < 2e-15, "xi={xi}: {a} vs {b}");
        }
    }

    #[test]
    fn step_limits() {
        assert_eq!(smooth_step(-2.0), 0.0);
        assert_eq!(smooth_step(1.5), 1.0);
        assert!((smooth_step(0.0) - 0.5).abs() < 1e-14);
    }
}
