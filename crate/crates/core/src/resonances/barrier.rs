//! Closed-form matching function of the sharp barrier V0·1_{[-a,a]}.
//!
//! Inside the barrier the left-outgoing solution is
//! e^{iλa}(cos(k(x+a)) - iλ sin(k(x+a))/k) with k² = λ² - V0, so
//! F(λ) = ½ e^{2iλa} (2iλ cos(2ka) + (λ² + k²) sin(2ka)/k).
//! Both cos(2ka) and sin(2ka)/k are even in k, hence entire in λ and free
//! of branch choices.

use super::contour::{find_zeros, Rect, SearchOptions};
use crate::error::{Error, Result};
use crate::profiles::Profile;
use num_complex::Complex64;

/// Default smoothing widths for barrier comparisons.
pub const SMOOTHING_WIDTHS: [f64; 3] = [0.1, 0.05, 0.025];
/// The smoothing profile is symmetric, so root offsets expand in even
/// powers of the width.
pub const RICHARDSON_EXPONENTS: [f64; 2] = [2.0, 4.0];

/// (cos(2ka), sin(2ka)/k) as functions of k².
fn even_parts(k2: Complex64, a: f64) -> (Complex64, Complex64) {
    let h = 2.0 * a;
    if (k2 * h * h).norm() < 1e-6 {
        // Taylor in z = k²h²
        let z = k2 * h * h;
        let c = 1.0 - z / 2.0 + z * z / 24.0;
        let s = h * (1.0 - z / 6.0 + z * z / 120.0);
        return (c, s);
    }
    let k = k2.sqrt();
    ((k * h).cos(), (k * h).sin() / k)
}

pub fn square_barrier_matching(v0: Complex64, half_width: f64, lambda: Complex64) -> Complex64 {
    let i = Complex64::new(0.0, 1.0);
    let k2 = lambda * lambda - v0;
    let (c, s) = even_parts(k2, half_width);
    0.5 * (2.0 * i * lambda * half_width).exp() * (2.0 * i * lambda * c + (lambda * lambda + k2) * s)
}

/// Zeros of the sharp-barrier matching function in `rect`.
pub fn square_barrier_resonances(v0: Complex64, half_width: f64, rect: Rect) -> Result<Vec<Complex64>> {
    if v0 == Complex64::new(0.0, 0.0) {
        return Err(Error::InvalidParameter("barrier height must be nonzero".into()));
    }
    let f = move |z: Complex64| -> Result<Complex64> { Ok(square_barrier_matching(v0, half_width, z)) };
    let roots = find_zeros(&f, rect, SearchOptions { tol: 1e-14, residual_rel: 1e-12, abs_floor: 0.0 })?;
    Ok(roots.iter().map(|r| r.lambda).collect())
}

/// Extrapolate values v(w_k) = v* + Σ_m c_m w_k^{p_m} to w = 0. Needs one
/// more width than exponents.
pub fn richardson(widths: &[f64], values: &[Complex64], exponents: &[f64]) -> Result<Complex64> {
    let n = exponents.len() + 1;
    if widths.len() != n || values.len() != n {
        return Err(Error::InvalidParameter(format!(
            "Richardson with {} exponents needs {n} widths and values",
            exponents.len()
        )));
    }
    // Gaussian elimination with partial pivoting on the small real system
    let mut a: Vec<Vec<f64>> = widths
        .iter()
        .map(|&w| std::iter::once(1.0).chain(exponents.iter().map(|&p| w.powf(p))).collect())
        .collect();
    let mut b: Vec<Complex64> = values.to_vec();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() < 1e-300 {
            return Err(Error::DegenerateInput("coincident smoothing widths".into()));
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            let bc = b[col];
            b[row] -= bc * f;
        }
    }
    let mut x = vec![Complex64::new(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= x[k] * a[row][k];
        }
        x[row] = acc / a[row][row];
    }
    Ok(x[0])
}

/// Resonances of V0·1_{[-a,a]} from smooth approximations: roots at each
/// width (finest first decides which roots are tracked), matched by
/// nearest neighbour and extrapolated to zero width.
pub fn smoothed_barrier_resonances(v0: Complex64, half_width: f64, widths: &[f64], rect: Rect) -> Result<Vec<Complex64>> {
    let mut order: Vec<f64> = widths.to_vec();
    order.sort_by(|a, b| a.total_cmp(b));
    let mut per_width = Vec::with_capacity(order.len());
    for &w in &order {
        let p = Profile::smooth_box(v0, half_width, w)?;
        // search a slightly larger box so roots drifting across the edge stay matched
        let roots = super::find_resonances(&p, rect.grown(0.05 * rect.diameter()), 1e-12)?;
        per_width.push(roots.into_iter().map(|r| r.lambda).collect::<Vec<_>>());
    }
    let exps: Vec<f64> = RICHARDSON_EXPONENTS[..order.len() - 1].to_vec();
    let mut out = Vec::new();
    for &z in per_width[0].iter().filter(|z| rect.contains(**z)) {
        let mut vals = vec![z];
        for roots in &per_width[1..] {
            let near = roots
                .iter()
                .min_by(|a, b| (*a - z).norm().total_cmp(&(*b - z).norm()))
                .ok_or_else(|| Error::NumericalInconsistency(format!("root near {z} lost at a coarser width")))?;
            vals.push(*near);
        }
        out.push(richardson(&order, &vals, &exps)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_limit_is_i_lambda() {
        let lam = Complex64::new(1.3, -0.4);
        let f = square_barrier_matching(Complex64::new(0.0, 0.0), 1.0, lam);
        assert!((f - Complex64::new(0.0, 1.0) * lam).norm() < 1e-14);
    }

    #[test]
    fn height_four_roots() {
        let rect = Rect::new(0.0, 7.0, -3.0, 0.0).unwrap();
        let roots = square_barrier_resonances(Complex64::new(4.0, 0.0), 1.0, rect).unwrap();
        let expected = [
            Complex64::new(2.33003644, -0.35477237),
            Complex64::new(3.37971884, -0.98466905),
            Complex64::new(4.78753263, -1.44615748),
            Complex64::new(6.2956323, -1.76920457),
        ];
        assert_eq!(roots.len(), 4);
        for (r, e) in roots.iter().zip(expected) {
            assert!((r - e).norm() < 1e-7, "{r} vs {e}");
            assert!(square_barrier_matching(Complex64::new(4.0, 0.0), 1.0, *r).norm() < 1e-10);
        }
    }

    #[test]
    fn richardson_exact_on_model() {
        let ws = [0.1, 0.05, 0.025];
        let truth = Complex64::new(1.5, -0.25);
        let vals: Vec<Complex64> = ws
            .iter()
            .map(|w| truth + Complex64::new(0.3, 0.1) * w * w - 2.0 * w.powi(4))
            .collect();
        let x = richardson(&ws, &vals, &RICHARDSON_EXPONENTS).unwrap();
        assert!((x - truth).norm() < 1e-12);
    }
}
