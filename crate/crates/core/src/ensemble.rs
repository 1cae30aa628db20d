//! Coefficient fields {u_j} and the realized potential
//! V_N(x) = q₀(x) + Σ_j u_j q(Nx - j).
//!
//! Random values come from a counter-based construction: the value at a
//! flattened index is drawn from a ChaCha stream selected by that index, so
//! any entry can be produced without generating its predecessors and the
//! result never depends on the number of worker threads.

use crate::error::{Error, Result};
use crate::profiles::Profile;
use crate::quadrature::GaussLegendre;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CoefficientLaw {
    Rademacher,
    /// Uniform on [-√3, √3].
    UniformScaled,
    DiscreteSymmetric { values: Vec<f64>, probs: Vec<f64> },
}

impl CoefficientLaw {
    /// Validated discrete law: probabilities sum to one, mean 0, variance 1.
    pub fn discrete(values: Vec<f64>, probs: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.len() != probs.len() {
            return Err(Error::InvalidParameter("values and probabilities must match".into()));
        }
        if probs.iter().any(|&p| !(p >= 0.0)) || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("invalid discrete law entries".into()));
        }
        let total: f64 = probs.iter().sum();
        let mean: f64 = values.iter().zip(&probs).map(|(v, p)| v * p).sum();
        let var: f64 = values.iter().zip(&probs).map(|(v, p)| v * v * p).sum();
        if (total - 1.0).abs() > 1e-12 || mean.abs() > 1e-12 || (var - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParameter(format!(
                "discrete law must have total 1, mean 0, variance 1 (got {total}, {mean}, {var})"
            )));
        }
        Ok(CoefficientLaw::DiscreteSymmetric { values, probs })
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "rademacher" => Ok(CoefficientLaw::Rademacher),
            "uniform_scaled" | "uniform" => Ok(CoefficientLaw::UniformScaled),
            other => Err(Error::Config(format!("unknown law '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            CoefficientLaw::Rademacher => "rademacher",
            CoefficientLaw::UniformScaled => "uniform_scaled",
            CoefficientLaw::DiscreteSymmetric { .. } => "discrete_symmetric",
        }
    }

    /// Almost-sure bound on |u_j|.
    pub fn bound(&self) -> f64 {
        match self {
            CoefficientLaw::Rademacher => 1.0,
            CoefficientLaw::UniformScaled => 3f64.sqrt(),
            CoefficientLaw::DiscreteSymmetric { values, .. } => {
                values.iter().fold(0.0, |m, v| m.max(v.abs()))
            }
        }
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            CoefficientLaw::Rademacher => {
                if rng.gen::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            CoefficientLaw::UniformScaled => {
                let s = 3f64.sqrt();
                rng.gen_range(-s..s)
            }
            CoefficientLaw::DiscreteSymmetric { values, probs } => {
                let r: f64 = rng.gen();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if r < acc {
                        return *v;
                    }
                }
                *values.last().unwrap()
            }
        }
    }

    /// The value at a flattened index; independent of every other index.
    pub fn value_at(&self, seed: u64, index: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        self.draw(&mut rng)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of the m-th sample of a campaign with base seed `base`.
pub fn derive_seed(base: u64, m: u64) -> u64 {
    splitmix64(base ^ splitmix64(m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pattern {
    Alternating,
    AllOnes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum FieldSource {
    Law { law: CoefficientLaw, seed: u64 },
    Pattern { pattern: Pattern },
    Explicit,
}

/// Coefficients u_j for j ∈ [-N, N]^d, stored flattened with j₁ slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub d: u32,
    pub n: usize,
    pub values: Vec<f64>,
    pub source: FieldSource,
}

fn check_dim(d: u32) -> Result<()> {
    match d {
        1 | 3 => Ok(()),
        d if d % 2 == 0 => Err(Error::InvalidDimension(d)),
        d => Err(Error::UnsupportedDimension(d)),
    }
}

impl CoefficientField {
    pub fn side(&self) -> usize {
        2 * self.n + 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn flatten(n: usize, j: &[i64]) -> Option<usize> {
        let side = 2 * n as i64 + 1;
        let mut k = 0i64;
        for &ji in j {
            if ji.abs() > n as i64 {
                return None;
            }
            k = k * side + ji + n as i64;
        }
        Some(k as usize)
    }

    pub fn multi_index(&self, mut k: usize) -> Vec<i64> {
        let side = self.side();
        let mut j = vec![0i64; self.d as usize];
        for slot in j.iter_mut().rev() {
            *slot = (k % side) as i64 - self.n as i64;
            k /= side;
        }
        j
    }

    pub fn get(&self, j: &[i64]) -> f64 {
        Self::flatten(self.n, j).map_or(0.0, |k| self.values[k])
    }

    pub fn from_values(d: u32, n: usize, values: Vec<f64>) -> Result<Self> {
        check_dim(d)?;
        if values.len() != (2 * n + 1).pow(d) {
            return Err(Error::InvalidParameter(format!(
                "expected {} coefficients, got {}",
                (2 * n + 1).pow(d),
                values.len()
            )));
        }
        Ok(CoefficientField {
            d,
            n,
            values,
            source: FieldSource::Explicit,
        })
    }

    pub fn zeros(d: u32, n: usize) -> Result<Self> {
        Self::from_values(d, n, vec![0.0; (2 * n + 1).pow(d)])
    }

    pub fn scaled(&self, c: f64) -> Self {
        CoefficientField {
            d: self.d,
            n: self.n,
            values: self.values.iter().map(|v| c * v).collect(),
            source: FieldSource::Explicit,
        }
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 1..=self.d {
            let _ = write!(out, "j{i},");
        }
        out.push_str("u\n");
        for (k, v) in self.values.iter().enumerate() {
            for j in self.multi_index(k) {
                let _ = write!(out, "{j},");
            }
            let _ = writeln!(out, "{v:?}");
        }
        out
    }
}

pub fn sample_coefficients(law: &CoefficientLaw, n: usize, d: u32, seed: u64) -> Result<CoefficientField> {
    check_dim(d)?;
    if n == 0 {
        return Err(Error::InvalidParameter("N must be at least 1".into()));
    }
    let count = (2 * n + 1).pow(d);
    let values: Vec<f64> = (0..count as u64)
        .into_par_iter()
        .map(|k| law.value_at(seed, k))
        .collect();
    Ok(CoefficientField {
        d,
        n,
        values,
        source: FieldSource::Law {
            law: law.clone(),
            seed,
        },
    })
}

pub fn deterministic_coefficients(pattern: Pattern, n: usize, d: u32) -> Result<CoefficientField> {
    check_dim(d)?;
    let count = (2 * n + 1).pow(d);
    let mut field = CoefficientField {
        d,
        n,
        values: vec![1.0; count],
        source: FieldSource::Pattern { pattern },
    };
    if pattern == Pattern::Alternating {
        for k in 0..count {
            let parity: i64 = field.multi_index(k).iter().sum();
            field.values[k] = if parity.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        }
    }
    Ok(field)
}

/// A realized potential. For d = 3 the profiles are read as radial
/// functions of |x|.
#[derive(Debug, Clone)]
pub struct RandomPotential {
    pub q0: Profile,
    pub q: Profile,
    pub n: usize,
    pub coeffs: Arc<CoefficientField>,
}

impl RandomPotential {
    pub fn new(q0: Profile, q: Profile, coeffs: CoefficientField) -> Self {
        RandomPotential {
            q0,
            q,
            n: coeffs.n,
            coeffs: Arc::new(coeffs),
        }
    }

    pub fn d(&self) -> u32 {
        self.coeffs.d
    }

    /// The oscillating part V_# (q₀ dropped).
    pub fn sharp(&self) -> RandomPotential {
        RandomPotential {
            q0: Profile::zero(),
            q: self.q.clone(),
            n: self.n,
            coeffs: self.coeffs.clone(),
        }
    }

    pub fn with_coeffs(&self, coeffs: CoefficientField) -> RandomPotential {
        RandomPotential::new(self.q0.clone(), self.q.clone(), coeffs)
    }

    pub fn with_q(&self, q: Profile) -> RandomPotential {
        RandomPotential {
            q,
            ..self.clone()
        }
    }

    /// Interval containing the support (d = 1).
    pub fn support(&self) -> (f64, f64) {
        let nf = self.n as f64;
        let (a, b) = self.q.support();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        if !self.q.is_zero() && self.coeffs.values.iter().any(|&u| u != 0.0) {
            lo = (-nf + a) / nf;
            hi = (nf + b) / nf;
        }
        if !self.q0.is_zero() {
            let (c, e) = self.q0.support();
            lo = lo.min(c);
            hi = hi.max(e);
        }
        if lo > hi {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// Uniform bound |q₀|_∞ + C^d |q|_∞ · max|u| with C the number of
    /// bump positions overlapping a point along each axis.
    pub fn sup_bound(&self) -> f64 {
        let (a, b) = self.q.support();
        let overlap = ((b - a).ceil() + 1.0).max(1.0);
        let umax = self.coeffs.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        self.q0.sup_norm() + overlap.powi(self.d() as i32) * self.q.sup_norm() * umax
    }

    /// V_N(x) in one dimension, visiting only bumps whose support covers x.
    pub fn eval(&self, x: f64) -> Complex64 {
        self.q0.eval(x) + self.eval_sharp(x)
    }

    pub fn eval_sharp(&self, x: f64) -> Complex64 {
        let nf = self.n as f64;
        let (a, b) = self.q.support();
        let y = nf * x;
        let n = self.n as i64;
        // Nx - j ∈ (a, b)  ⇔  j ∈ (Nx - b, Nx - a)
        let j_lo = ((y - b).floor() as i64 + 1).max(-n);
        let j_hi = ((y - a).ceil() as i64 - 1).min(n);
        let mut acc = Complex64::new(0.0, 0.0);
        for j in j_lo..=j_hi {
            let u = self.coeffs.values[(j + n) as usize];
            if u != 0.0 {
                acc += u * self.q.eval(y - j as f64);
            }
        }
        acc
    }

    /// V_N at a point of R^d (d = 3: radial profiles in |x| and |Nx - j|).
    pub fn eval_point(&self, x: &[f64]) -> Result<Complex64> {
        if x.len() != self.d() as usize {
            return Err(Error::InvalidParameter("point dimension mismatch".into()));
        }
        if self.d() == 1 {
            return Ok(self.eval(x[0]));
        }
        let nf = self.n as f64;
        let r = self.q.radius();
        let n = self.n as i64;
        let norm = |v: &[f64]| v.iter().map(|t| t * t).sum::<f64>().sqrt();
        let mut acc = self.q0.eval(norm(x));
        let ranges: Vec<(i64, i64)> = x
            .iter()
            .map(|&xi| {
                (
                    ((nf * xi - r).floor() as i64).max(-n),
                    ((nf * xi + r).ceil() as i64).min(n),
                )
            })
            .collect();
        for j1 in ranges[0].0..=ranges[0].1 {
            for j2 in ranges[1].0..=ranges[1].1 {
                for j3 in ranges[2].0..=ranges[2].1 {
                    let j = [j1, j2, j3];
                    let y: Vec<f64> = (0..3).map(|i| nf * x[i] - j[i] as f64).collect();
                    let u = self.coeffs.get(&j);
                    if u != 0.0 {
                        acc += u * self.q.eval(norm(&y));
                    }
                }
            }
        }
        Ok(acc)
    }

    /// ∫ V_#(x) φ(x) dx = N⁻¹ Σ_j u_j ∫ q(x) φ((x + j)/N) dx.
    pub fn weak_pairing<F: Fn(f64) -> Complex64 + Sync>(&self, phi: F) -> Result<Complex64> {
        if self.d() != 1 {
            return Err(Error::UnsupportedDimension(self.d()));
        }
        let (a, b) = self.q.support();
        let rule = GaussLegendre::new(32);
        let panels = 8;
        let h = (b - a) / panels as f64;
        let nodes: Vec<(f64, f64, Complex64)> = (0..panels)
            .flat_map(|p| {
                let lo = a + h * p as f64;
                rule.mapped(lo, lo + h).collect::<Vec<_>>()
            })
            .map(|(x, w)| (x, w, self.q.eval(x)))
            .collect();
        let nf = self.n as f64;
        let n = self.n as i64;
        let total: Complex64 = self
            .coeffs
            .values
            .iter()
            .enumerate()
            .filter(|(_, &u)| u != 0.0)
            .map(|(k, &u)| {
                let j = k as i64 - n;
                let inner: Complex64 = nodes
                    .iter()
                    .map(|&(x, w, qx)| qx * phi((x + j as f64) / nf) * w)
                    .sum();
                u * inner
            })
            .sum();
        Ok(total / nf)
    }

    /// (x, Re V, Im V) on a uniform grid.
    pub fn grid_csv(&self, lo: f64, hi: f64, points: usize) -> String {
        let mut out = String::from("x,re,im\n");
        let points = points.max(2);
        for k in 0..points {
            let x = lo + (hi - lo) * k as f64 / (points - 1) as f64;
            let v = self.eval(x);
            let _ = writeln!(out, "{x:?},{:?},{:?}", v.re, v.im);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::BumpKind;

    #[test]
    fn patterns() {
        let f = deterministic_coefficients(Pattern::Alternating, 5, 1).unwrap();
        assert_eq!(f.get(&[3]), -1.0);
        assert_eq!(f.get(&[-2]), 1.0);
        let g = deterministic_coefficients(Pattern::Alternating, 2, 3).unwrap();
        assert_eq!(g.get(&[1, 1, 1]), -1.0);
        let h = deterministic_coefficients(Pattern::AllOnes, 2, 3).unwrap();
        assert!(h.values.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn multi_index_round_trip() {
        let f = CoefficientField::zeros(3, 2).unwrap();
        for k in [0, 17, 124] {
            let j = f.multi_index(k);
            assert_eq!(CoefficientField::flatten(2, &j), Some(k));
        }
    }

    #[test]
    fn discrete_law_validation() {
        assert!(CoefficientLaw::discrete(vec![-1.0, 1.0], vec![0.5, 0.5]).is_ok());
        assert!(CoefficientLaw::discrete(vec![-1.0, 2.0], vec![0.5, 0.5]).is_err());
        let s = 2f64.sqrt();
        let law = CoefficientLaw::discrete(vec![-s, 0.0, s], vec![0.25, 0.5, 0.25]).unwrap();
        assert!((law.bound() - s).abs() < 1e-15);
    }

    #[test]
    fn all_ones_at_origin() {
        let f = deterministic_coefficients(Pattern::AllOnes, 1, 1).unwrap();
        let v = RandomPotential::new(Profile::zero(), Profile::bump(BumpKind::Psi), f);
        assert!((v.eval(0.0).re - (-1f64).exp()).abs() < 1e-15);
    }
}
