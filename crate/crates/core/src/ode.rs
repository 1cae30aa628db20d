//! Dormand–Prince 8(5,3) integration of the complex Schrödinger system
//! u′ = w, w′ = (V(x) - λ²) u.

use crate::ensemble::RandomPotential;
use crate::error::{Error, Result};
use crate::profiles::Profile;
use num_complex::Complex64;

/// A one-dimensional compactly supported potential the integrator can
/// traverse: pointwise values, a support interval and the largest step
/// allowed inside the support.
pub trait Potential1d: Sync {
    fn value(&self, x: f64) -> Complex64;
    fn support(&self) -> (f64, f64);
    fn max_step(&self) -> f64;
}

impl Potential1d for RandomPotential {
    fn value(&self, x: f64) -> Complex64 {
        self.eval(x)
    }

    fn support(&self) -> (f64, f64) {
        RandomPotential::support(self)
    }

    fn max_step(&self) -> f64 {
        // each bump is resolved by at least ten steps per unit of N⁻¹
        let mut h = f64::INFINITY;
        if !self.q0.is_zero() {
            h = self.q0.feature_scale() / 10.0;
        }
        if !self.q.is_zero() {
            h = h.min(self.q.feature_scale() / (10.0 * self.n as f64));
        }
        h
    }
}

impl Potential1d for Profile {
    fn value(&self, x: f64) -> Complex64 {
        self.eval(x)
    }

    fn support(&self) -> (f64, f64) {
        if self.is_zero() {
            (0.0, 0.0)
        } else {
            Profile::support(self)
        }
    }

    fn max_step(&self) -> f64 {
        self.feature_scale() / 10.0
    }
}

pub const RTOL: f64 = 1e-12;
pub const ATOL: f64 = 1e-12;
const MAX_STEPS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
    /// Largest accepted normalized error estimate.
    pub max_error: f64,
}

impl OdeStats {
    fn merge(&mut self, o: &OdeStats) {
        self.steps += o.steps;
        self.rejected += o.rejected;
        self.evaluations += o.evaluations;
        self.max_error = self.max_error.max(o.max_error);
    }
}

type State = [Complex64; 2];

const C: [f64; 12] = [
    0.0,
    5.260_015_195_876_773e-2,
    7.890_022_793_815_16e-2,
    1.183_503_419_072_274e-1,
    2.816_496_580_927_726e-1,
    3.333_333_333_333_333e-1,
    0.25,
    3.076_923_076_923_077e-1,
    6.512_820_512_820_513e-1,
    0.6,
    8.571_428_571_428_571e-1,
    1.0,
];

const A: [[f64; 11]; 12] = [
    [0.0; 11],
    [5.260_015_195_876_773e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.972_505_698_453_79e-2, 5.917_517_095_361_37e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [2.958_758_547_680_685e-2, 0.0, 8.876_275_643_042_054e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [
        2.413_651_341_592_667e-1,
        0.0,
        -8.845_494_793_282_861e-1,
        9.248_340_032_617_92e-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.703_703_703_703_703_5e-2,
        0.0,
        0.0,
        1.708_286_087_294_738_6e-1,
        1.254_676_875_668_224_2e-1,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.710_937_5e-2,
        0.0,
        0.0,
        1.702_522_110_195_440_5e-1,
        6.021_653_898_045_596e-2,
        -1.757_812_5e-2,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        3.709_200_011_850_479e-2,
        0.0,
        0.0,
        1.703_839_257_122_399_8e-1,
        1.072_620_304_463_732_8e-1,
        -1.531_943_774_862_440_2e-2,
        8.273_789_163_814_023e-3,
        0.0,
        0.0,
        0.0,
        0.0,
    ],
    [
        6.241_109_587_160_757e-1,
        0.0,
        0.0,
        -3.360_892_629_446_941_4,
        -8.682_193_468_417_26e-1,
        2.759_209_969_944_671e1,
        2.015_406_755_047_789_4e1,
        -4.348_988_418_106_996e1,
        0.0,
        0.0,
        0.0,
    ],
    [
        4.776_625_364_382_643_4e-1,
        0.0,
        0.0,
        -2.488_114_619_971_667_7,
        -5.902_908_268_368_43e-1,
        2.123_005_144_818_119_3e1,
        1.527_923_363_288_242_3e1,
        -3.328_821_096_898_486e1,
        -2.033_120_170_850_862_7e-2,
        0.0,
        0.0,
    ],
    [
        -9.371_424_300_859_873e-1,
        0.0,
        0.0,
        5.186_372_428_844_064,
        1.091_437_348_996_729_5,
        -8.149_787_010_746_927,
        -1.852_006_565_999_696e1,
        2.273_948_709_935_050_5e1,
        2.493_605_552_679_652_3,
        -3.046_764_471_898_219_6,
        0.0,
    ],
    [
        2.273_310_147_516_538,
        0.0,
        0.0,
        -1.053_449_546_673_725e1,
        -2.000_872_058_224_862_5,
        -1.795_893_186_311_88e1,
        2.794_888_452_941_996e1,
        -2.858_998_277_135_023_5,
        -8.872_856_933_530_63,
        1.236_056_717_579_430_3e1,
        6.433_927_460_157_636e-1,
    ],
];

const B: [f64; 12] = [
    5.429_373_411_656_876_5e-2,
    0.0,
    0.0,
    0.0,
    0.0,
    4.450_312_892_752_409,
    1.891_517_899_314_500_3,
    -5.801_203_960_010_585,
    3.111_643_669_578_199e-1,
    -1.521_609_496_625_161e-1,
    2.013_654_008_040_303_4e-1,
    4.471_061_572_777_259e-2,
];

const ER: [f64; 12] = [
    1.312_004_499_419_488e-2,
    0.0,
    0.0,
    0.0,
    0.0,
    -1.225_156_446_376_204_4,
    -4.957_589_496_572_502e-1,
    1.664_377_182_454_986_4,
    -3.503_288_487_499_736_6e-1,
    3.341_791_187_130_175e-1,
    8.192_320_648_511_571e-2,
    -2.235_530_786_388_629_4e-2,
];

const BHH: [f64; 3] = [
    2.440_944_881_889_764e-1,
    7.338_466_882_816_118e-1,
    2.205_882_352_941_176_6e-2,
];

struct System<'a> {
    v: &'a dyn Potential1d,
    lambda2: Complex64,
}

impl System<'_> {
    #[inline]
    fn rhs(&self, x: f64, y: &State) -> State {
        [y[1], (self.v.value(x) - self.lambda2) * y[0]]
    }
}

/// Integrate from `x0` through the increasing (or decreasing) sequence of
/// output abscissae, returning the state at each.
pub fn integrate(
    v: &dyn Potential1d,
    lambda: Complex64,
    x0: f64,
    y0: State,
    outputs: &[f64],
) -> Result<(Vec<State>, OdeStats)> {
    let sys = System {
        v,
        lambda2: lambda * lambda,
    };
    let (sa, sb) = v.support();
    let h_cap_inside = v.max_step();
    // outside the support the solution is a pair of exponentials; a step of
    // a fraction of the wavelength keeps the error estimate honest
    let h_cap_outside = (0.5 / lambda.norm().max(1.0)).max(h_cap_inside);
    let mut stats = OdeStats::default();
    let mut x = x0;
    let mut y = y0;
    let mut out = Vec::with_capacity(outputs.len());
    let mut h_guess = h_cap_inside.min(0.01);
    for &target in outputs {
        let (states, st, h_last) = advance(&sys, x, y, target, h_guess, (sa, sb), (h_cap_inside, h_cap_outside), None)?;
        stats.merge(&st);
        y = states;
        x = target;
        h_guess = h_last;
        out.push(y);
    }
    Ok((out, stats))
}

#[allow(clippy::too_many_arguments)]
fn advance(
    sys: &System,
    mut x: f64,
    mut y: State,
    target: f64,
    h_init: f64,
    support: (f64, f64),
    (cap_in, cap_out): (f64, f64),
    mut record: Option<&mut Vec<f64>>,
) -> Result<(State, OdeStats, f64)> {
    let mut stats = OdeStats::default();
    if x == target {
        return Ok((y, stats, h_init));
    }
    let dir = if target > x { 1.0 } else { -1.0 };
    let mut h = h_init.abs();
    let mut k1 = sys.rhs(x, &y);
    stats.evaluations += 1;
    let span = (target - x).abs();
    loop {
        let remaining = (target - x) * dir;
        if remaining <= 1e-15 * span.max(1.0) {
            break;
        }
        // step cap depends on whether the step touches the support
        let x_next_probe = x + dir * h.min(remaining);
        let lo = x.min(x_next_probe);
        let hi = x.max(x_next_probe);
        let touches = hi > support.0 && lo < support.1;
        let cap = if touches { cap_in } else { cap_out };
        h = h.min(cap);
        let mut last = false;
        if h >= remaining {
            h = remaining;
            last = true;
        } else if !touches {
            // do not jump over the support edge
            let edge = if dir > 0.0 { support.0 } else { support.1 };
            let dist = (edge - x) * dir;
            if dist > 0.0 && h > dist {
                h = dist;
            }
        }
        if h < 1e-14 * span.max(1.0) {
            return Err(Error::Accuracy(format!("step size underflow at x = {x}")));
        }
        if stats.steps + stats.rejected > MAX_STEPS {
            return Err(Error::Accuracy("step budget exhausted".into()));
        }
        let hs = dir * h;
        let (y_new, err) = rk_step(sys, x, &y, &k1, hs);
        stats.evaluations += 11;
        let err = h * err;
        if !err.is_finite() {
            return Err(Error::Accuracy(format!("non-finite error estimate at x = {x}")));
        }
        let fac11 = err.powf(0.125);
        let fac = (fac11 / 0.9).clamp(1.0 / 6.0, 3.0);
        let h_new = h / fac;
        if err <= 1.0 {
            stats.steps += 1;
            stats.max_error = stats.max_error.max(err);
            x = if last { target } else { x + hs };
            y = y_new;
            if let Some(r) = record.as_deref_mut() {
                r.push(x);
            }
            k1 = sys.rhs(x, &y);
            stats.evaluations += 1;
            if last {
                return Ok((y, stats, h_new));
            }
            h = h_new;
        } else {
            stats.rejected += 1;
            h /= (fac11 / 0.9).min(3.0);
        }
    }
    Ok((y, stats, h))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Constant(f64);

    impl Potential1d for Constant {
        fn value(&self, x: f64) -> Complex64 {
            if (-1.0..=1.0).contains(&x) {
                Complex64::new(self.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        }
        fn support(&self) -> (f64, f64) {
            (-1.0, 1.0)
        }
        fn max_step(&self) -> f64 {
            0.05
        }
    }

    #[test]
    fn harmonic_solution_is_reproduced() {
        // inside the constant region u = cos(k(x+1)), k² = λ² - V0
        let lam = Complex64::new(2.0, -0.3);
        let v0 = 1.5;
        let k = (lam * lam - v0).sqrt();
        let y0 = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        let (ys, stats) = integrate(&Constant(v0), lam, -1.0, y0, &[0.0, 1.0]).unwrap();
        for (y, x) in ys.iter().zip([0.0, 1.0]) {
            let exact = (k * (x + 1.0)).cos();
            assert!((y[0] - exact).norm() < 1e-10 * exact.norm().max(1.0), "{} vs {}", y[0], exact);
        }
        assert!(stats.steps > 0);
    }
}

/// One DOP853 step of signed size `hs`; returns the new state and the
/// Hairer error norm without the |h| factor.
fn rk_step(sys: &System, x: f64, y: &State, k1: &State, hs: f64) -> (State, f64) {
    let mut k: [State; 12] = [[Complex64::new(0.0, 0.0); 2]; 12];
    k[0] = *k1;
    for s in 1..12 {
        let mut ys = *y;
        for (m, km) in k.iter().enumerate().take(s) {
            let a = A[s][m];
            if a != 0.0 {
                ys[0] += km[0] * (hs * a);
                ys[1] += km[1] * (hs * a);
            }
        }
        k[s] = sys.rhs(x + C[s] * hs, &ys);
    }
    let mut incr: State = [Complex64::new(0.0, 0.0); 2];
    let mut er: State = [Complex64::new(0.0, 0.0); 2];
    for s in 0..12 {
        for c in 0..2 {
            incr[c] += k[s][c] * B[s];
            er[c] += k[s][c] * ER[s];
        }
    }
    let y_new: State = [y[0] + incr[0] * hs, y[1] + incr[1] * hs];
    let mut err = 0.0;
    let mut err2 = 0.0;
    for c in 0..2 {
        let sk = ATOL + RTOL * y[c].norm().max(y_new[c].norm());
        let e2 = incr[c] - k[0][c] * BHH[0] - k[8][c] * BHH[1] - k[11][c] * BHH[2];
        err2 += (e2.norm() / sk).powi(2);
        err += (er[c].norm() / sk).powi(2);
    }
    let mut deno = err + 0.01 * err2;
    if deno <= 0.0 {
        deno = 1.0;
    }
    (y_new, err * (1.0 / (2.0 * deno)).sqrt())
}

/// Accepted step endpoints (starting with `x0`, ending with `x1`) of an
/// adaptive run at `lambda`.
pub fn adaptive_mesh(v: &dyn Potential1d, lambda: Complex64, x0: f64, y0: State, x1: f64) -> Result<Vec<f64>> {
    let sys = System {
        v,
        lambda2: lambda * lambda,
    };
    let cap = v.max_step();
    let mut mesh = vec![x0];
    advance(&sys, x0, y0, x1, cap.min(0.01), v.support(), (cap, cap), Some(&mut mesh))?;
    Ok(mesh)
}

/// Pointwise finest merge of several meshes over the same interval: walk
/// from the left end taking the smallest local step of any mesh.
pub fn merge_meshes(meshes: &[Vec<f64>]) -> Vec<f64> {
    if meshes.len() == 1 {
        return meshes[0].clone();
    }
    let x0 = meshes[0][0];
    let x1 = *meshes[0].last().unwrap();
    let local = |m: &Vec<f64>, x: f64| {
        let k = m.partition_point(|&p| p <= x).clamp(1, m.len() - 1);
        m[k] - m[k - 1]
    };
    let mut out = vec![x0];
    let mut x = x0;
    while x < x1 {
        let h = meshes.iter().map(|m| local(m, x)).fold(f64::INFINITY, f64::min);
        x = if x + h >= x1 - 1e-12 * h { x1 } else { x + h };
        out.push(x);
    }
    out
}

/// Fixed-step DOP853 along `mesh`; with the mesh frozen the result is an
/// entire function of λ.
pub fn integrate_on_mesh(v: &dyn Potential1d, lambda: Complex64, mesh: &[f64], y0: State) -> State {
    let sys = System {
        v,
        lambda2: lambda * lambda,
    };
    let mut y = y0;
    for w in mesh.windows(2) {
        let k1 = sys.rhs(w[0], &y);
        y = rk_step(&sys, w[0], &y, &k1, w[1] - w[0]).0;
    }
    y
}
