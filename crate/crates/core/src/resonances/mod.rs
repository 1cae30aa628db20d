//! Scattering resonances of compactly supported one-dimensional potentials,
//! located as zeros of the outgoing-matching function.

pub mod barrier;
pub mod contour;
pub mod defect;
pub mod eigen;
pub mod pair;

pub use barrier::{richardson, smoothed_barrier_resonances, square_barrier_matching, square_barrier_resonances};
pub use contour::{find_zeros, Rect, Resonance, ResonanceRecord, SearchOptions};
pub use defect::{defect, outgoing_defect, outgoing_solution, DefectFn, OutgoingSolution};
pub use pair::{resonant_pair, ResonantPair};

use crate::error::{Error, Result};
use crate::ode::Potential1d;
use num_complex::Complex64;

/// Absolute accuracy of F on a frozen mesh (solutions are O(1) on the
/// working range near the real axis).
pub const DEFECT_NOISE: f64 = 1e-11;

fn check_box(rect: &Rect) -> Result<()> {
    for z in [
        Complex64::new(rect.re0, rect.im0),
        Complex64::new(rect.re1, rect.im0),
        Complex64::new(rect.re1, rect.im1),
        Complex64::new(rect.re0, rect.im1),
    ] {
        defect::check_working_box(z)?;
    }
    Ok(())
}

/// All resonances of `v` in `rect` with multiplicities.
pub fn find_resonances(v: &dyn Potential1d, rect: Rect, tol: f64) -> Result<Vec<Resonance>> {
    check_box(&rect)?;
    let df = DefectFn::for_rect(v, rect.re0, rect.re1, rect.im0, rect.im1)?;
    let f = |z: Complex64| df.eval(z);
    find_zeros(
        &f,
        rect,
        SearchOptions {
            tol,
            abs_floor: DEFECT_NOISE,
            ..SearchOptions::default()
        },
    )
    .map_err(|e| match e {
        Error::OutsideWorkingBox(s) => Error::ContourAccuracy(format!("box nudged outside the working range at {s}")),
        other => other,
    })
}

/// Winding number of F around `rect`.
pub fn winding(v: &dyn Potential1d, rect: Rect) -> Result<i64> {
    check_box(&rect)?;
    let df = DefectFn::for_rect(v, rect.re0, rect.re1, rect.im0, rect.im1)?;
    let f = |z: Complex64| df.eval(z);
    let cf = contour::CachedFn::new(&f);
    Ok(contour::winding_rect(&cf, &rect)?.count)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::Profile;

    #[test]
    fn free_line_single_root() {
        let z = Profile::zero();
        let roots = find_resonances(&z, Rect::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 1e-12).unwrap();
        assert_eq!(roots.len(), 1);
        assert!(roots[0].lambda.norm() < 1e-10);
        assert_eq!(roots[0].multiplicity, 1);
    }

    #[test]
    fn free_pair_residue() {
        let p = ResonantPair::free();
        let err = p.residue_check(&[0.3, -0.1], &[-0.7, 0.5]).unwrap();
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn real_potential_symmetry() {
        let v = crate::profiles::Profile::smooth_box(Complex64::new(-2.0, 0.0), 1.0, 0.2).unwrap();
        let z = Complex64::new(1.0, 0.5);
        let f1 = defect(&v, -z.conj()).unwrap();
        let f2 = defect(&v, z).unwrap().conj();
        assert!((f1 - f2).norm() < 1e-10);
        let roots = find_resonances(&v, Rect::new(-3.0, 3.0, -2.5, 1.5).unwrap(), 1e-12).unwrap();
        for r in &roots {
            let mirror = -r.lambda.conj();
            assert!(roots.iter().any(|s| (s.lambda - mirror).norm() < 2e-12), "{}", r.lambda);
        }
    }
}
