//! Gauss–Legendre rules: fixed, composite, adaptive, and spectral
//! integration matrices for cumulative integrals on a panel.

use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Nodes and weights of an `n`-point Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Legendre polynomials P_0..=P_n at `x` (three-term recurrence).
pub fn legendre_all(n: usize, x: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(x);
    }
    for k in 2..=n {
        let kf = k as f64;
        let v = ((2.0 * kf - 1.0) * x * p[k - 1] - (kf - 1.0) * p[k - 2]) / kf;
        p.push(v);
    }
    p
}

impl GaussLegendre {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..(n + 1) / 2 {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussLegendre { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to [a, b].
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let c = 0.5 * (a + b);
        let h = 0.5 * (b - a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (c + h * t, h * w))
    }

    pub fn integrate<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, mut f: F) -> Complex64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }

    pub fn integrate_real<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| f(x) * w).sum()
    }

    /// Matrix `S` with `S[i][k]` = ∫_{-1}^{t_i} ℓ_k(t) dt, where ℓ_k are the
    /// Lagrange basis polynomials on the nodes. Applying `S` to samples gives
    /// the running integral from the left panel edge to every node.
    pub fn cumulative_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let p_nodes: Vec<Vec<f64>> = self.nodes.iter().map(|&t| legendre_all(n, t)).collect();
        let mut s = vec![vec![0.0; n]; n];
        for i in 0..n {
            let pi = &p_nodes[i];
            let ti = self.nodes[i];
            for k in 0..n {
                let pk = &p_nodes[k];
                // ℓ_k(t) = w_k Σ_m (2m+1)/2 P_m(t_k) P_m(t), exact for m < n.
                let mut acc = 0.5 * (ti + 1.0);
                for m in 1..n {
                    acc += 0.5 * pk[m] * (pi[m + 1] - pi[m - 1]);
                }
                s[i][k] = self.weights[k] * acc;
            }
        }
        s
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let d = nf * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Shared 20-point rule used by the adaptive integrator and most panels.
pub fn gl20() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(20))
}

pub fn gl16() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(16))
}

/// Composite rule: `panels` equal panels of the given rule on [a, b].
pub fn composite<F: FnMut(f64) -> Complex64>(
    rule: &GaussLegendre,
    a: f64,
    b: f64,
    panels: usize,
    mut f: F,
) -> Complex64 {
    let h = (b - a) / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..panels {
        let lo = a + h * p as f64;
        acc += rule.integrate(lo, lo + h, &mut f);
    }
    acc
}

/// Adaptive bisection with a 20-point rule: a panel is accepted when the
/// rule on the whole panel and on its two halves agree to within the local
/// share of `abs_tol`. The initial partition uses `initial_panels` equal
/// panels so that oscillatory integrands start resolved.
pub fn adaptive<F: FnMut(f64) -> Complex64>(
    a: f64,
    b: f64,
    abs_tol: f64,
    initial_panels: usize,
    mut f: F,
) -> Complex64 {
    if a == b {
        return Complex64::new(0.0, 0.0);
    }
    let rule = gl20();
    let panels = initial_panels.max(1);
    let h = (b - a) / panels as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut stack: Vec<(f64, f64, Complex64, u32)> = Vec::new();
    for p in 0..panels {
        let lo = a + h * p as f64;
        let hi = if p + 1 == panels { b } else { lo + h };
        let whole = rule.integrate(lo, hi, &mut f);
        stack.push((lo, hi, whole, 0));
    }
    let total = (b - a).abs();
    while let Some((lo, hi, whole, depth)) = stack.pop() {
        let mid = 0.5 * (lo + hi);
        let left = rule.integrate(lo, mid, &mut f);
        let right = rule.integrate(mid, hi, &mut f);
        let refined = left + right;
        let local_tol = (abs_tol * (hi - lo).abs() / total).max(1e-300);
        if (refined - whole).norm() <= local_tol || depth >= 40 {
            acc += refined;
        } else {
            stack.push((lo, mid, left, depth + 1));
            stack.push((mid, hi, right, depth + 1));
        }
    }
    acc
}

pub fn adaptive_real<F: FnMut(f64) -> f64>(
    a: f64,
    b: f64,
    abs_tol: f64,
    initial_panels: usize,
    mut f: F,
) -> f64 {
    adaptive(a, b, abs_tol, initial_panels, |x| Complex64::new(f(x), 0.0)).re
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rule_integrates_polynomials_exactly() {
        let rule = GaussLegendre::new(10);
        let s: f64 = rule.weights.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
        let v = rule.integrate_real(0.0, 1.0, |x| x.powi(19));
        assert!((v - 1.0 / 20.0).abs() < 1e-15);
    }

    #[test]
    fn cumulative_matrix_matches_antiderivative() {
        let rule = GaussLegendre::new(16);
        let s = rule.cumulative_matrix();
        let f: Vec<f64> = rule.nodes.iter().map(|&t| t.cos()).collect();
        for (i, &t) in rule.nodes.iter().enumerate() {
            let approx: f64 = s[i].iter().zip(&f).map(|(a, b)| a * b).sum();
            let exact = t.sin() - (-1.0f64).sin();
            assert!((approx - exact).abs() < 1e-13, "{approx} vs {exact}");
        }
    }

    #[test]
    fn adaptive_handles_oscillation() {
        let v = adaptive(0.0, 10.0, 1e-13, 8, |x| Complex64::new(0.0, 40.0 * x).exp());
        let exact = (Complex64::new(0.0, 400.0).exp() - 1.0) / Complex64::new(0.0, 40.0);
        assert!((v - exact).norm() < 1e-12);
    }
}
