//! The outgoing-matching function
//! F(λ) = ½ e^{iλL} (iλ u(L) - u′(L)), u = e^{-iλx} left of the support.
//!
//! F is entire, equals iλ for the zero potential and vanishes exactly at the
//! resonances. Right of the support u = A e^{iλx} + B e^{-iλx} and
//! F = iλB, so F does not depend on L.

use crate::error::{Error, Result};
use crate::ode::{adaptive_mesh, integrate, integrate_on_mesh, merge_meshes, OdeStats, Potential1d};
use num_complex::Complex64;

/// Validated range of the integrator.
pub const MAX_ABS_LAMBDA: f64 = 30.0;
pub const MAX_ABS_IM_LAMBDA: f64 = 15.0;

#[derive(Debug, Clone, Copy)]
pub struct OutgoingSolution {
    pub lambda: Complex64,
    pub l: f64,
    pub u_at_l: Complex64,
    pub du_at_l: Complex64,
    pub defect: Complex64,
    pub stats: OdeStats,
}

pub fn check_working_box(lambda: Complex64) -> Result<()> {
    if !(lambda.norm() <= MAX_ABS_LAMBDA && lambda.im.abs() <= MAX_ABS_IM_LAMBDA) {
        return Err(Error::OutsideWorkingBox(format!("{lambda}")));
    }
    Ok(())
}

fn check_domain(v: &dyn Potential1d, l: f64) -> Result<(f64, f64)> {
    let (a, b) = v.support();
    if a < b && (a < -l || b > l) {
        return Err(Error::InvalidDomain {
            lo: a,
            hi: b,
            half_width: l,
        });
    }
    Ok((a, b))
}

/// Propagate (u, u′) through a free region of length `dx` (entire in λ).
pub fn free_propagate(u: Complex64, du: Complex64, lambda: Complex64, dx: f64) -> (Complex64, Complex64) {
    let t = lambda * dx;
    let c = t.cos();
    let s = t.sin();
    let sinc_dx = if t.norm() < 1e-8 {
        Complex64::new(dx, 0.0) * (1.0 - t * t / 6.0)
    } else {
        s / lambda
    };
    (u * c + du * sinc_dx, -u * lambda * s + du * c)
}

pub fn outgoing_solution(v: &dyn Potential1d, lambda: Complex64, l: f64) -> Result<OutgoingSolution> {
    check_working_box(lambda)?;
    let (a, b) = check_domain(v, l)?;
    let i = Complex64::new(0.0, 1.0);
    if a >= b {
        let u = (-i * lambda * l).exp();
        return Ok(OutgoingSolution {
            lambda,
            l,
            u_at_l: u,
            du_at_l: -i * lambda * u,
            defect: i * lambda,
            stats: OdeStats::default(),
        });
    }
    let u0 = (-i * lambda * a).exp();
    let (ys, stats) = integrate(v, lambda, a, [u0, -i * lambda * u0], &[b])?;
    let [ub, dub] = ys[0];
    let defect = 0.5 * (i * lambda * b).exp() * (i * lambda * ub - dub);
    let (u_at_l, du_at_l) = free_propagate(ub, dub, lambda, l - b);
    Ok(OutgoingSolution {
        lambda,
        l,
        u_at_l,
        du_at_l,
        defect,
        stats,
    })
}

/// F(λ) for a potential supported in [-L, L].
pub fn outgoing_defect(v: &dyn Potential1d, lambda: Complex64, l: f64) -> Result<Complex64> {
    Ok(outgoing_solution(v, lambda, l)?.defect)
}

/// F(λ) with L taken from the potential's own support.
pub fn defect(v: &dyn Potential1d, lambda: Complex64) -> Result<Complex64> {
    let (a, b) = v.support();
    outgoing_defect(v, lambda, a.abs().max(b.abs()).max(1e-300))
}

/// F on a frozen integration mesh. The mesh merges adaptive step sequences
/// taken at a few reference values of λ; reusing it for every evaluation
/// makes F analytic in λ, free of the step-selection jitter (~1e-9) that
/// adaptive runs show between neighbouring λ.
pub struct DefectFn<'a> {
    v: &'a dyn Potential1d,
    support: (f64, f64),
    mesh: Vec<f64>,
}

impl<'a> DefectFn<'a> {
    pub fn new(v: &'a dyn Potential1d, refs: &[Complex64]) -> Result<Self> {
        let (a, b) = v.support();
        let i = Complex64::new(0.0, 1.0);
        let mut meshes = Vec::with_capacity(refs.len());
        if a < b {
            for &lam in refs {
                check_working_box(lam)?;
                let u0 = (-i * lam * a).exp();
                meshes.push(adaptive_mesh(v, lam, a, [u0, -i * lam * u0], b)?);
            }
        }
        let mesh = if meshes.is_empty() { Vec::new() } else { merge_meshes(&meshes) };
        Ok(DefectFn {
            v,
            support: (a, b),
            mesh,
        })
    }

    /// Mesh valid on a rectangle (its corners and center as references).
    pub fn for_rect(v: &'a dyn Potential1d, re0: f64, re1: f64, im0: f64, im1: f64) -> Result<Self> {
        let refs = [
            Complex64::new(re0, im0),
            Complex64::new(re1, im0),
            Complex64::new(re1, im1),
            Complex64::new(re0, im1),
            Complex64::new(0.5 * (re0 + re1), 0.5 * (im0 + im1)),
        ];
        Self::new(v, &refs)
    }

    pub fn mesh_len(&self) -> usize {
        self.mesh.len()
    }

    pub fn eval(&self, lambda: Complex64) -> Result<Complex64> {
        check_working_box(lambda)?;
        let i = Complex64::new(0.0, 1.0);
        let (a, b) = self.support;
        if a >= b || self.mesh.is_empty() {
            return Ok(i * lambda);
        }
        let u0 = (-i * lambda * a).exp();
        let [ub, dub] = integrate_on_mesh(self.v, lambda, &self.mesh, [u0, -i * lambda * u0]);
        if !(ub.is_finite() && dub.is_finite()) {
            return Err(Error::Accuracy(format!("non-finite solution at {lambda}")));
        }
        Ok(0.5 * (i * lambda * b).exp() * (i * lambda * ub - dub))
    }
}

/// Left-outgoing solution (u = e^{-iλx} left of the support) at sorted points.
pub fn left_solution(v: &dyn Potential1d, lambda: Complex64, xs: &[f64]) -> Result<Vec<[Complex64; 2]>> {
    solution_at(v, lambda, xs, true)
}

/// Right-outgoing solution (u = e^{iλx} right of the support) at points.
pub fn right_solution(v: &dyn Potential1d, lambda: Complex64, xs: &[f64]) -> Result<Vec<[Complex64; 2]>> {
    solution_at(v, lambda, xs, false)
}

fn solution_at(v: &dyn Potential1d, lambda: Complex64, xs: &[f64], left: bool) -> Result<Vec<[Complex64; 2]>> {
    let i = Complex64::new(0.0, 1.0);
    let (a, b) = v.support();
    let sign = if left { -1.0 } else { 1.0 };
    let exact = |x: f64| {
        let u = (i * sign * lambda * x).exp();
        [u, i * sign * lambda * u]
    };
    if a >= b {
        return Ok(xs.iter().map(|&x| exact(x)).collect());
    }
    let mut out = vec![[Complex64::new(0.0, 0.0); 2]; xs.len()];
    // points on the exact side are closed form; the rest are integrated
    // from the support edge and continued freely past the far edge
    let start = if left { a } else { b };
    let end = if left { b } else { a };
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&p, &q| {
        let c = xs[p].total_cmp(&xs[q]);
        if left {
            c
        } else {
            c.reverse()
        }
    });
    let inside: Vec<usize> = order
        .iter()
        .copied()
        .filter(|&k| if left { xs[k] > a } else { xs[k] < b })
        .collect();
    for &k in &order {
        if (left && xs[k] <= a) || (!left && xs[k] >= b) {
            out[k] = exact(xs[k]);
        }
    }
    if inside.is_empty() {
        return Ok(out);
    }
    let mut targets: Vec<f64> = inside
        .iter()
        .map(|&k| if left { xs[k].min(b) } else { xs[k].max(a) })
        .collect();
    targets.push(end);
    let y0 = exact(start);
    let (ys, _) = integrate(v, lambda, start, y0, &targets)?;
    let [ue, due] = *ys.last().unwrap();
    for (slot, &k) in inside.iter().enumerate() {
        let x = xs[k];
        let beyond = if left { x > b } else { x < a };
        out[k] = if beyond {
            let (u, du) = free_propagate(ue, due, lambda, x - end);
            [u, du]
        } else {
            ys[slot]
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::Profile;

    #[test]
    fn free_line_is_i_lambda() {
        let z = Profile::zero();
        for lam in [Complex64::new(0.3, -0.2), Complex64::new(-4.0, 1.0)] {
            let f = outgoing_defect(&z, lam, 1.0).unwrap();
            assert!((f - Complex64::new(0.0, 1.0) * lam).norm() < 1e-15);
        }
    }

    #[test]
    fn independent_of_l() {
        let q = Profile::parse("2*psi").unwrap();
        let lam = Complex64::new(1.1, -0.4);
        let f1 = outgoing_defect(&q, lam, 1.0).unwrap();
        let f2 = outgoing_defect(&q, lam, 3.0).unwrap();
        assert!((f1 - f2).norm() < 1e-13 * f1.norm());
        assert!(matches!(outgoing_defect(&q, lam, 0.5), Err(Error::InvalidDomain { .. })));
        assert!(matches!(
            outgoing_defect(&q, Complex64::new(0.0, -20.0), 1.0),
            Err(Error::OutsideWorkingBox(_))
        ));
    }

    #[test]
    fn wronskian_is_twice_defect() {
        let q = Profile::parse("lincomb(3*psi + 1i*d1(psi))").unwrap();
        let lam = Complex64::new(0.7, -0.3);
        let xs = [-0.4, 0.2, 0.9];
        let l = left_solution(&q, lam, &xs).unwrap();
        let r = right_solution(&q, lam, &xs).unwrap();
        let f = defect(&q, lam).unwrap();
        for k in 0..3 {
            let w = l[k][0] * r[k][1] - l[k][1] * r[k][0];
            assert!((w - 2.0 * f).norm() < 1e-10 * (1.0 + f.norm()), "{w} vs {}", 2.0 * f);
        }
    }
}
