//! Finite-difference eigenvalues of -d²/dx² + V with Dirichlet walls, used
//! to identify resonances on the positive imaginary axis with eigenvalues.

use crate::error::{Error, Result};
use crate::ode::Potential1d;

/// Symmetric tridiagonal discretization on (-wall, wall) with mesh `h`.
struct Tridiagonal {
    diag: Vec<f64>,
    off: f64,
}

impl Tridiagonal {
    fn new(v: &dyn Potential1d, wall: f64, h: f64) -> Result<Self> {
        let n = (2.0 * wall / h).round() as usize - 1;
        let mut diag = Vec::with_capacity(n);
        for k in 1..=n {
            let x = -wall + h * k as f64;
            let val = v.value(x);
            if val.im.abs() > 1e-14 * (1.0 + val.re.abs()) {
                return Err(Error::Inapplicable("eigenvalue check needs a real potential".into()));
            }
            diag.push(2.0 / (h * h) + val.re);
        }
        Ok(Tridiagonal {
            diag,
            off: -1.0 / (h * h),
        })
    }

    /// Number of eigenvalues strictly below `mu` (Sturm sequence).
    fn count_below(&self, mu: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        let o2 = self.off * self.off;
        for (k, &a) in self.diag.iter().enumerate() {
            d = if k == 0 { a - mu } else { a - mu - o2 / d };
            if d == 0.0 {
                d = -1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn eigenvalue(&self, index: usize, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > index {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }
}

/// All discrete eigenvalues below `upper` (ascending).
pub fn fd_eigenvalues_below(v: &dyn Potential1d, wall: f64, h: f64, upper: f64) -> Result<Vec<f64>> {
    let t = Tridiagonal::new(v, wall, h)?;
    let bound = t
        .diag
        .iter()
        .fold(0.0f64, |m, d| m.max(d.abs()))
        + 2.0 * t.off.abs();
    let n = t.count_below(upper);
    Ok((0..n).map(|k| t.eigenvalue(k, -bound, upper)).collect())
}

/// Eigenvalue closest to `target` on the default mesh 2⁻¹⁰ with walls at
/// ±10L, L the support half-width.
pub fn nearest_fd_eigenvalue(v: &dyn Potential1d, target: f64) -> Result<f64> {
    let (a, b) = v.support();
    let l = a.abs().max(b.abs()).max(1.0);
    let eigs = fd_eigenvalues_below(v, 10.0 * l, 2f64.powi(-10), target.max(0.0) + 1.0)?;
    eigs.into_iter()
        .min_by(|x, y| (x - target).abs().total_cmp(&(y - target).abs()))
        .ok_or_else(|| Error::DegenerateInput("no eigenvalue below the threshold".into()))
}
