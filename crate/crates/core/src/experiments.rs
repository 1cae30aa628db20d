//! Monte Carlo campaigns over realizations of V_N and the statistics that
//! summarize them.
//!
//! Every campaign is a pure function of its parameters: sample m uses the
//! seed `derive_seed(seed, m)`, samples run in parallel, and records are
//! reduced in (N, m) order, so reports are bit-identical across reruns and
//! worker counts.

use crate::config::json_digest;
use crate::ensemble::{
    derive_seed, deterministic_coefficients, sample_coefficients, CoefficientField, CoefficientLaw, Pattern,
    RandomPotential,
};
use crate::error::{Error, Result};
use crate::limits::{case_classifier, limits_report, sigma_of_fg_derivative, sigma_of_pair, Case, CovMatrix2, LimitsReport};
use crate::ode::Potential1d;
use crate::perturbation::{fit_decay_constant, phi_root, CharacteristicSeries};
use crate::profiles::{gamma_exponent, rational_to_f64, Profile, MOMENT_TOL};
use crate::resonances::{find_resonances, resonant_pair, square_barrier_resonances, winding, Rect, ResonantPair};
use crate::sobolev::hnorm_sharp_minus;
use crate::stats::{ks_centered_gaussian, linear_fit, median, LinearFit};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub use crate::stats::rate_fit;

pub const SCHEMA: u32 = 1;
/// Relative window for matching a fitted variance to a convention.
pub const GAUSSIAN_MATCH_REL: f64 = 0.10;
/// Relative window for matching an almost-sure limit to a convention.
pub const LIMIT_MATCH_REL: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Campaign {
    CaseStudy,
    Localization,
    ResonanceFree,
    Counterexample,
    Deterministic,
    SeriesCheck,
}

/// One realization. `seed` is `None` for deterministic coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub n: usize,
    pub index: usize,
    pub seed: Option<u64>,
    pub lambda: Option<Complex64>,
    pub rejected: bool,
    pub reason: Option<String>,
    pub rescaled: Option<Complex64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub resonances: Vec<Complex64>,
}

impl SampleRecord {
    fn accepted(n: usize, index: usize, seed: Option<u64>, lambda: Complex64) -> Self {
        SampleRecord {
            n,
            index,
            seed,
            lambda: Some(lambda),
            rejected: false,
            reason: None,
            rescaled: None,
            resonances: Vec::new(),
        }
    }

    fn rejected(n: usize, index: usize, seed: Option<u64>, reason: String) -> Self {
        SampleRecord {
            n,
            index,
            seed,
            lambda: None,
            rejected: true,
            reason: Some(reason),
            rescaled: None,
            resonances: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema: u32,
    pub campaign: Campaign,
    pub params: serde_json::Value,
    pub params_digest: String,
    pub n_list: Vec<usize>,
    pub m: usize,
    pub records: Vec<SampleRecord>,
    pub accepted: usize,
    pub rejected: usize,
    pub rejection_rate: f64,
    pub tolerances: BTreeMap<String, f64>,
    pub statistics: Statistics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistics {
    CaseStudy(CaseStudyStats),
    Localization(LocalizationStats),
    ResonanceFree(ResonanceFreeStats),
    Counterexample(CounterexampleStats),
    Deterministic(DeterministicStats),
    SeriesCheck(SeriesCheckStats),
}

fn build_report<P: Serialize>(
    campaign: Campaign,
    params: &P,
    n_list: Vec<usize>,
    m: usize,
    records: Vec<SampleRecord>,
    tolerances: &[(&str, f64)],
    statistics: Statistics,
) -> Result<ExperimentReport> {
    let accepted = records.iter().filter(|r| !r.rejected).count();
    let rejected = records.len() - accepted;
    Ok(ExperimentReport {
        schema: SCHEMA,
        campaign,
        params: serde_json::to_value(params).map_err(|e| Error::Io(e.to_string()))?,
        params_digest: json_digest(params)?,
        n_list,
        m,
        rejection_rate: if records.is_empty() {
            0.0
        } else {
            rejected as f64 / records.len() as f64
        },
        records,
        accepted,
        rejected,
        tolerances: tolerances.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        statistics,
    })
}

/// Errors that mark an exceptional sample rather than a broken run.
fn rejectable(e: &Error) -> bool {
    matches!(
        e,
        Error::NotInRegime(_)
            | Error::ContourAccuracy(_)
            | Error::Accuracy(_)
            | Error::NotSimple(_)
            | Error::ContourConflict(_)
            | Error::NumericalInconsistency(_)
    )
}

type Outcome = std::result::Result<Complex64, String>;

fn check_lists(n_list: &[usize], m: usize) -> Result<()> {
    if n_list.is_empty() || n_list.iter().any(|&n| n == 0) {
        return Err(Error::Config("N list must be nonempty with positive entries".into()));
    }
    if m == 0 {
        return Err(Error::Config("M must be positive".into()));
    }
    Ok(())
}

fn parse_rect(r: [f64; 4]) -> Result<Rect> {
    Rect::new(r[0], r[1], r[2], r[3]).map_err(|e| Error::Config(e.to_string()))
}

/// The resonant pair at λ₀ (the free pair when q₀ ≡ 0).
pub fn make_pair(q0: &Profile, lambda0: Complex64) -> Result<ResonantPair> {
    if q0.is_zero() {
        if lambda0.norm() > 1e-12 {
            return Err(Error::Config("with q0 = zero the only resonance is λ0 = 0".into()));
        }
        return Ok(ResonantPair::free());
    }
    resonant_pair(q0, lambda0)
}

/// Radius of the disk around λ₀ in which λ_N is sought.
pub fn search_radius(pair: &ResonantPair) -> f64 {
    if pair.isolation_radius.is_finite() {
        (0.5 * pair.isolation_radius).min(1.0)
    } else {
        1.0
    }
}

/// The unique resonance of `v` in D(center, radius), or a rejection reason.
pub fn locate_by_solver(v: &dyn Potential1d, center: Complex64, radius: f64, tol: f64) -> Result<Outcome> {
    let found = match find_resonances(v, Rect::around(center, radius), tol) {
        Ok(f) => f,
        Err(e) if rejectable(&e) => return Ok(Err(e.to_string())),
        Err(e) => return Err(e),
    };
    let inside: Vec<_> = found.iter().filter(|r| (r.lambda - center).norm() < radius).collect();
    let count: usize = inside.iter().map(|r| r.multiplicity).sum();
    Ok(match count {
        0 => Err("no resonance in the search disk".to_string()),
        1 => Ok(inside[0].lambda),
        k => Err(format!("ambiguous: {k} resonances in the search disk")),
    })
}

/// How λ_N is obtained per sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShiftMethod {
    /// Contour solver in the search disk; falls back to the φ-root when the
    /// solver fails but the disk still winds once.
    Solver,
    /// Root of the series truncated at `order`.
    Series { order: usize },
}

fn series_cap(pair: &ResonantPair) -> usize {
    if pair.is_free() {
        crate::perturbation::MAX_ORDER_FREE
    } else {
        crate::perturbation::MAX_ORDER_GENERAL
    }
}

fn series_root(v: &RandomPotential, pair: &ResonantPair, order: usize, radius: f64, tol: f64) -> Result<Outcome> {
    let series = CharacteristicSeries::without_tail(v, pair, order)?;
    match phi_root(&series, pair.lambda0, radius, tol) {
        Ok(z) => Ok(Ok(z)),
        Err(e) if rejectable(&e) => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

fn locate(v: &RandomPotential, pair: &ResonantPair, method: ShiftMethod, radius: f64, tol: f64) -> Result<Outcome> {
    match method {
        ShiftMethod::Series { order } => series_root(v, pair, order, radius, tol),
        ShiftMethod::Solver => {
            let out = locate_by_solver(v, pair.lambda0, radius, tol)?;
            if out.is_ok() {
                return Ok(out);
            }
            let rect = Rect::around(pair.lambda0, radius);
            match winding(v, rect) {
                Ok(1) => series_root(v, pair, series_cap(pair), radius, tol),
                _ => Ok(out),
            }
        }
    }
}

fn degenerate_field(q: &Profile, u: &CoefficientField) -> bool {
    q.is_zero() || u.values.iter().all(|&x| x == 0.0)
}

// ---------------------------------------------------------------- case study

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyParams {
    pub case: Case,
    pub d: u32,
    pub q0: String,
    pub q: String,
    pub lambda0: Complex64,
    pub law: CoefficientLaw,
    pub n_list: Vec<usize>,
    pub m: usize,
    pub seed: u64,
    pub method: ShiftMethod,
    /// Solver-backed checks of series roots at the largest N.
    pub spot_checks: usize,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConventionCheck {
    pub name: String,
    pub value: f64,
    pub relative_gap: f64,
    pub ks: Option<f64>,
}

fn matched(checks: &[ConventionCheck], window: f64) -> Option<String> {
    let hits: Vec<_> = checks.iter().filter(|c| c.relative_gap < window).collect();
    if hits.len() == 1 {
        Some(hits[0].name.clone())
    } else {
        None
    }
}

/// Case I/II: rescaled shifts against the Gaussian limit, per N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSummary {
    pub n: usize,
    pub accepted: usize,
    /// Component carrying the limit variance ("re" or "im").
    pub component: String,
    pub mean: [f64; 2],
    pub covariance: [[f64; 2]; 2],
    pub fitted_variance: f64,
    /// KS distance to the centered Gaussian with the fitted variance.
    pub ks_best_fit: Option<f64>,
    pub conventions: Vec<ConventionCheck>,
    pub matched_convention: Option<String>,
}

/// Case III: N²(λ_N - λ₀) against i·L, per N.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitSummary {
    pub n: usize,
    pub accepted: usize,
    pub value: Complex64,
    pub ratio: Complex64,
    pub conventions: Vec<ConventionCheck>,
    pub matched_convention: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpotCheck {
    pub n: usize,
    pub index: usize,
    pub seed: u64,
    pub series: Complex64,
    pub solver: Option<Complex64>,
    pub gap: Option<f64>,
    pub rescaled_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseStudyStats {
    pub case: Case,
    pub constants: LimitsReport,
    /// Covariance of the Gaussian limit (Σ[fg] or Σ[(fg)′]).
    pub limit_covariance: Option<CovMatrix2>,
    pub normalizer: Complex64,
    pub rate_power: f64,
    pub degenerate: bool,
    pub gaussian: Vec<GaussianSummary>,
    pub limit: Vec<LimitSummary>,
    /// |x_{k+1} - x_k| / |x_{k+1}| for consecutive N (Case III).
    pub cauchy_gaps: Vec<f64>,
    /// max over accepted samples of |Re(λ_N - λ₀)|.
    pub max_abs_re_shift: f64,
    pub all_positive_imag: bool,
    /// log-log fit of median |λ_N - λ₀| against N.
    pub rate: Option<LinearFit>,
    pub spot_checks: Vec<SpotCheck>,
}

pub fn run_case_study(p: &CaseStudyParams) -> Result<ExperimentReport> {
    check_lists(&p.n_list, p.m)?;
    if p.d != 1 {
        return Err(Error::Config(
            "sampling campaigns are one-dimensional; d = 3 is available for constants only".into(),
        ));
    }
    let q0 = Profile::parse(&p.q0)?;
    let q = Profile::parse(&p.q)?;
    let pair = make_pair(&q0, p.lambda0)?;
    let case = case_classifier(1, &q, &pair)?;
    if case != p.case {
        return Err(Error::Config(format!("requested Case {} but the classifier gives Case {case}", p.case)));
    }
    let n_max = *p.n_list.iter().max().unwrap();
    let constants = limits_report(&q, &pair, 1, n_max)?;
    let radius = search_radius(&pair);
    let l0 = pair.lambda0;
    let power = case.rate(1);
    let i = Complex64::new(0.0, 1.0);
    let normalizer = match case {
        Case::I => q.integral(),
        Case::II => q.moment(1),
        Case::III => constants.l.map(|l| Complex64::new(l[0], l[1])).unwrap_or_default(),
    };
    let jobs: Vec<(usize, usize)> = p.n_list.iter().flat_map(|&n| (0..p.m).map(move |k| (n, k))).collect();
    let sample = |n: usize, k: usize| -> Result<(RandomPotential, u64)> {
        let seed = derive_seed(p.seed, k as u64);
        let u = sample_coefficients(&p.law, n, 1, seed)?;
        Ok((RandomPotential::new(q0.clone(), q.clone(), u), seed))
    };
    let mut degenerate = q.is_zero();
    let records: Vec<(SampleRecord, bool)> = jobs
        .par_iter()
        .map(|&(n, k)| {
            let (v, seed) = sample(n, k)?;
            let deg = degenerate_field(&q, &v.coeffs);
            let out = if deg { Ok(l0) } else { locate(&v, &pair, p.method, radius, p.tol)? };
            Ok((
                match out {
                    Ok(z) => {
                        let mut r = SampleRecord::accepted(n, k, Some(seed), z);
                        let scaled = (z - l0) * (n as f64).powf(power);
                        r.rescaled = Some(match case {
                            Case::III => scaled,
                            _ => scaled / (i * normalizer),
                        });
                        r
                    }
                    Err(reason) => SampleRecord::rejected(n, k, Some(seed), reason),
                },
                deg,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    degenerate |= records.iter().all(|(_, d)| *d);
    let records: Vec<SampleRecord> = records.into_iter().map(|(r, _)| r).collect();

    let limit_covariance = match case {
        Case::I => Some(sigma_of_pair(&pair, 1)?),
        Case::II => Some(sigma_of_fg_derivative(&pair)?),
        Case::III => None,
    };
    let mut gaussian = Vec::new();
    let mut limit = Vec::new();
    let mut medians = Vec::new();
    for &n in &p.n_list {
        let acc: Vec<&SampleRecord> = records.iter().filter(|r| r.n == n && !r.rejected).collect();
        let z: Vec<Complex64> = acc.iter().filter_map(|r| r.rescaled).collect();
        let shifts: Vec<f64> = acc.iter().filter_map(|r| r.lambda).map(|l| (l - l0).norm()).collect();
        if !shifts.is_empty() {
            medians.push((n as f64, median(&shifts)));
        }
        if z.is_empty() {
            continue;
        }
        match (&limit_covariance, case) {
            (Some(sigma), Case::I | Case::II) => gaussian.push(gaussian_summary(n, &z, sigma, degenerate)?),
            _ => {
                let value = z.iter().sum::<Complex64>() / z.len() as f64;
                let target = i * normalizer;
                let ratio = if target.norm() > 0.0 { value / target } else { Complex64::new(f64::NAN, 0.0) };
                let conventions: Vec<ConventionCheck> = [("unit", 1.0), ("half", 0.5)]
                    .iter()
                    .map(|&(name, c)| ConventionCheck {
                        name: name.into(),
                        value: c,
                        relative_gap: finite_or((ratio - c).norm() / c, f64::MAX),
                        ks: None,
                    })
                    .collect();
                limit.push(LimitSummary {
                    n,
                    accepted: z.len(),
                    value,
                    ratio: if ratio.is_finite() { ratio } else { Complex64::new(0.0, 0.0) },
                    matched_convention: matched(&conventions, LIMIT_MATCH_REL),
                    conventions,
                });
            }
        }
    }
    let cauchy_gaps = limit
        .windows(2)
        .map(|w| (w[1].value - w[0].value).norm() / w[1].value.norm().max(f64::MIN_POSITIVE))
        .collect();
    let accepted: Vec<Complex64> = records.iter().filter_map(|r| r.lambda).collect();
    let max_abs_re_shift = accepted.iter().map(|l| (l - l0).re.abs()).fold(0.0, f64::max);
    let all_positive_imag = !accepted.is_empty() && accepted.iter().all(|l| (l - l0).im > 0.0);
    let rate = if medians.len() >= 3 && medians.iter().all(|m| m.1 > 0.0) {
        Some(rate_fit(&medians)?)
    } else {
        None
    };

    let spot_checks = match p.method {
        ShiftMethod::Series { .. } if p.spot_checks > 0 && !degenerate => {
            let picks: Vec<&SampleRecord> = records
                .iter()
                .filter(|r| r.n == n_max && !r.rejected)
                .take(p.spot_checks)
                .collect();
            picks
                .par_iter()
                .map(|r| {
                    let (v, seed) = sample(r.n, r.index)?;
                    let series = r.lambda.unwrap();
                    let solver = locate_by_solver(&v, l0, radius, p.tol)?.ok();
                    let gap = solver.map(|s| (s - series).norm());
                    Ok(SpotCheck {
                        n: r.n,
                        index: r.index,
                        seed,
                        series,
                        solver,
                        gap,
                        rescaled_gap: gap.map(|g| g * (r.n as f64).powf(power)),
                    })
                })
                .collect::<Result<Vec<_>>>()?
        }
        _ => Vec::new(),
    };

    let stats = CaseStudyStats {
        case,
        constants,
        limit_covariance,
        normalizer,
        rate_power: power,
        degenerate,
        gaussian,
        limit,
        cauchy_gaps,
        max_abs_re_shift,
        all_positive_imag,
        rate,
        spot_checks,
    };
    build_report(
        Campaign::CaseStudy,
        p,
        p.n_list.clone(),
        p.m,
        records,
        &[
            ("solver_tol", p.tol),
            ("search_radius", radius),
            ("gaussian_match_rel", GAUSSIAN_MATCH_REL),
            ("limit_match_rel", LIMIT_MATCH_REL),
        ],
        Statistics::CaseStudy(stats),
    )
}

fn finite_or(x: f64, fallback: f64) -> f64 {
    if x.is_finite() {
        x
    } else {
        fallback
    }
}

fn gaussian_summary(n: usize, z: &[Complex64], sigma: &CovMatrix2, degenerate: bool) -> Result<GaussianSummary> {
    let k = z.len() as f64;
    let mr = z.iter().map(|v| v.re).sum::<f64>() / k;
    let mi = z.iter().map(|v| v.im).sum::<f64>() / k;
    let denom = (k - 1.0).max(1.0);
    let crr = z.iter().map(|v| (v.re - mr).powi(2)).sum::<f64>() / denom;
    let cri = z.iter().map(|v| (v.re - mr) * (v.im - mi)).sum::<f64>() / denom;
    let cii = z.iter().map(|v| (v.im - mi).powi(2)).sum::<f64>() / denom;
    let use_re = sigma.entries[0][0] >= sigma.entries[1][1];
    let (component, target, xs): (&str, f64, Vec<f64>) = if use_re {
        ("re", sigma.entries[0][0], z.iter().map(|v| v.re).collect())
    } else {
        ("im", sigma.entries[1][1], z.iter().map(|v| v.im).collect())
    };
    let fitted = if use_re { crr } else { cii };
    let ks = |var: f64| -> Option<f64> {
        if degenerate || !(var > 0.0) {
            None
        } else {
            ks_centered_gaussian(&xs, var).ok()
        }
    };
    let conventions: Vec<ConventionCheck> = [("sigma", target), ("half_sigma", 0.5 * target)]
        .iter()
        .map(|&(name, value)| ConventionCheck {
            name: name.into(),
            value,
            relative_gap: if value > 0.0 { (fitted / value - 1.0).abs() } else { f64::MAX },
            ks: ks(value),
        })
        .collect();
    Ok(GaussianSummary {
        n,
        accepted: z.len(),
        component: component.into(),
        mean: [mr, mi],
        covariance: [[crr, cri], [cri, cii]],
        fitted_variance: fitted,
        ks_best_fit: ks(fitted),
        matched_convention: if degenerate { None } else { matched(&conventions, GAUSSIAN_MATCH_REL) },
        conventions,
    })
}

// -------------------------------------------------------------- localization

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationParams {
    pub q0: String,
    pub q: String,
    pub law: CoefficientLaw,
    /// Radius R of the disk D(0, R).
    pub radius: f64,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub tol: f64,
    /// Multiples of the disk radius N^{-γ/(2m_λ)} to test.
    pub scales: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseResonance {
    pub lambda: Complex64,
    pub multiplicity: usize,
    /// N^{-γ/(2m)}.
    pub disk_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleOutcome {
    pub scale: f64,
    pub satisfied: usize,
    pub violated: usize,
    pub rejected: usize,
    pub fraction_satisfied: f64,
    pub fraction_violated: f64,
    pub fraction_rejected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offender {
    pub index: usize,
    pub seed: u64,
    pub lambda: Complex64,
    /// Distance to the nearest base resonance over its disk radius.
    pub distance_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationStats {
    pub gamma: f64,
    pub base: Vec<BaseResonance>,
    pub outcomes: Vec<ScaleOutcome>,
    pub worst_offender: Option<Offender>,
    /// Violations at the smallest scale strictly exceed those at the largest.
    pub radius_monotone: bool,
}

/// Inclusion of Res(V_N) ∩ D(0, R) in the disks, and multiplicity counts per
/// connected component of their union.
pub fn localization_holds(found: &[(Complex64, usize)], base: &[BaseResonance], big_r: f64, scale: f64) -> bool {
    let r: Vec<f64> = base.iter().map(|b| b.disk_radius * scale).collect();
    let in_disk = |z: Complex64, k: usize| (z - base[k].lambda).norm() < r[k];
    for &(z, _) in found {
        if z.norm() < big_r && !(0..base.len()).any(|k| in_disk(z, k)) {
            return false;
        }
    }
    // union-find over overlapping disks
    let mut parent: Vec<usize> = (0..base.len()).collect();
    fn root(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    for a in 0..base.len() {
        for b in a + 1..base.len() {
            if (base[a].lambda - base[b].lambda).norm() < r[a] + r[b] {
                let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
                parent[ra] = rb;
            }
        }
    }
    let mut expected: BTreeMap<usize, usize> = BTreeMap::new();
    for k in 0..base.len() {
        *expected.entry(root(&mut parent, k)).or_default() += base[k].multiplicity;
    }
    let mut counted: BTreeMap<usize, usize> = BTreeMap::new();
    for &(z, mult) in found {
        if let Some(k) = (0..base.len()).find(|&k| in_disk(z, k)) {
            *counted.entry(root(&mut parent, k)).or_default() += mult;
        }
    }
    expected.iter().all(|(c, e)| counted.get(c).copied().unwrap_or(0) == *e)
}

pub fn localization_check(p: &LocalizationParams) -> Result<ExperimentReport> {
    check_lists(&[p.n], p.m)?;
    if !(p.radius > 0.0) || p.scales.is_empty() || p.scales.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::Config("radius and scales must be positive".into()));
    }
    let q0 = Profile::parse(&p.q0)?;
    let q = Profile::parse(&p.q)?;
    let rect = parse_rect([-p.radius, p.radius, -p.radius, p.radius])?;
    let base_found = find_resonances(&q0, rect, p.tol)?;
    for r in &base_found {
        if (r.lambda.norm() - p.radius).abs() <= 2.0 * p.tol {
            return Err(Error::InvalidParameter(format!(
                "q0 has a resonance at {} on the circle |λ| = {}",
                r.lambda, p.radius
            )));
        }
    }
    let gamma = if q.is_zero() {
        rational_to_f64(gamma_exponent(1, 0)?)
    } else {
        rational_to_f64(gamma_exponent(1, q.vanishing_order(MOMENT_TOL)?)?)
    };
    let nf = p.n as f64;
    let base: Vec<BaseResonance> = base_found
        .iter()
        .filter(|r| r.lambda.norm() < p.radius)
        .map(|r| BaseResonance {
            lambda: r.lambda,
            multiplicity: r.multiplicity,
            disk_radius: nf.powf(-gamma / (2.0 * r.multiplicity as f64)),
        })
        .collect();
    let results: Vec<(SampleRecord, Vec<(Complex64, usize)>)> = (0..p.m)
        .into_par_iter()
        .map(|k| {
            let seed = derive_seed(p.seed, k as u64);
            let u = sample_coefficients(&p.law, p.n, 1, seed)?;
            let v = RandomPotential::new(q0.clone(), q.clone(), u);
            let found: Vec<(Complex64, usize)> = if degenerate_field(&q, &v.coeffs) {
                base_found.iter().map(|r| (r.lambda, r.multiplicity)).collect()
            } else {
                match find_resonances(&v, rect, p.tol) {
                    Ok(f) => f.iter().map(|r| (r.lambda, r.multiplicity)).collect(),
                    Err(e) if rejectable(&e) => {
                        return Ok((SampleRecord::rejected(p.n, k, Some(seed), e.to_string()), Vec::new()))
                    }
                    Err(e) => return Err(e),
                }
            };
            let mut rec = SampleRecord::accepted(p.n, k, Some(seed), Complex64::new(0.0, 0.0));
            rec.lambda = None;
            rec.resonances = found.iter().map(|f| f.0).collect();
            Ok((rec, found))
        })
        .collect::<Result<Vec<_>>>()?;
    let outcomes: Vec<ScaleOutcome> = p
        .scales
        .iter()
        .map(|&s| {
            let rejected = results.iter().filter(|(r, _)| r.rejected).count();
            let satisfied = results
                .iter()
                .filter(|(r, f)| !r.rejected && localization_holds(f, &base, p.radius, s))
                .count();
            let violated = p.m - rejected - satisfied;
            let mf = p.m as f64;
            ScaleOutcome {
                scale: s,
                satisfied,
                violated,
                rejected,
                fraction_satisfied: satisfied as f64 / mf,
                fraction_violated: violated as f64 / mf,
                fraction_rejected: rejected as f64 / mf,
            }
        })
        .collect();
    let mut worst: Option<Offender> = None;
    for (rec, found) in &results {
        for &(z, _) in found {
            if z.norm() >= p.radius || base.is_empty() {
                continue;
            }
            let ratio = base
                .iter()
                .map(|b| (z - b.lambda).norm() / b.disk_radius)
                .fold(f64::INFINITY, f64::min);
            if worst.as_ref().map_or(true, |w| ratio > w.distance_ratio) {
                worst = Some(Offender {
                    index: rec.index,
                    seed: rec.seed.unwrap_or(0),
                    lambda: z,
                    distance_ratio: ratio,
                });
            }
        }
    }
    let (lo, hi) = (
        outcomes.iter().min_by(|a, b| a.scale.total_cmp(&b.scale)).unwrap(),
        outcomes.iter().max_by(|a, b| a.scale.total_cmp(&b.scale)).unwrap(),
    );
    let radius_monotone = lo.violated > hi.violated;
    let stats = LocalizationStats {
        gamma,
        base,
        radius_monotone,
        outcomes,
        worst_offender: worst,
    };
    build_report(
        Campaign::Localization,
        p,
        vec![p.n],
        p.m,
        results.into_iter().map(|(r, _)| r).collect(),
        &[("solver_tol", p.tol), ("circle_margin", 2.0 * p.tol)],
        Statistics::Localization(stats),
    )
}

// ------------------------------------------------------------ resonance-free

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFreeParams {
    pub q: String,
    pub law: CoefficientLaw,
    pub n_list: Vec<usize>,
    pub m: usize,
    pub seed: u64,
    pub rect: [f64; 4],
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeRow {
    pub n: usize,
    /// 4 N^{-γ/2}.
    pub exclusion_radius: f64,
    /// Largest Im over samples after excluding the near-0 root.
    pub highest_im: Option<f64>,
    /// -highest_im: min over samples of the depth of the highest root.
    pub depth: Option<f64>,
    pub accepted: usize,
    pub rejected: usize,
    pub near_zero_in_disk: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceFreeStats {
    pub gamma: f64,
    pub rows: Vec<FreeRow>,
    /// highest_im against ln N.
    pub fit: Option<LinearFit>,
    pub a_fit: Option<f64>,
    pub strictly_decreasing: bool,
    pub near_zero_fraction: f64,
}

pub fn resonance_free_scan(p: &ResonanceFreeParams) -> Result<ExperimentReport> {
    check_lists(&p.n_list, p.m)?;
    let q = Profile::parse(&p.q)?;
    let rect = parse_rect(p.rect)?;
    if !rect.contains(Complex64::new(0.0, 0.0)) {
        return Err(Error::Config("the scan box must contain λ = 0".into()));
    }
    let gamma = if q.is_zero() {
        rational_to_f64(gamma_exponent(1, 0)?)
    } else {
        rational_to_f64(gamma_exponent(1, q.vanishing_order(MOMENT_TOL)?)?)
    };
    let jobs: Vec<(usize, usize)> = p.n_list.iter().flat_map(|&n| (0..p.m).map(move |k| (n, k))).collect();
    let records: Vec<SampleRecord> = jobs
        .par_iter()
        .map(|&(n, k)| {
            let seed = derive_seed(p.seed, k as u64);
            let u = sample_coefficients(&p.law, n, 1, seed)?;
            let v = RandomPotential::new(Profile::zero(), q.clone(), u);
            let found: Vec<Complex64> = if degenerate_field(&q, &v.coeffs) {
                vec![Complex64::new(0.0, 0.0)]
            } else {
                match find_resonances(&v, rect, p.tol) {
                    Ok(f) => f
                        .iter()
                        .flat_map(|r| std::iter::repeat(r.lambda).take(r.multiplicity))
                        .collect(),
                    Err(e) if rejectable(&e) => return Ok(SampleRecord::rejected(n, k, Some(seed), e.to_string())),
                    Err(e) => return Err(e),
                }
            };
            let near = found.iter().copied().min_by(|a, b| a.norm().total_cmp(&b.norm()));
            let mut rec = match near {
                Some(z) => SampleRecord::accepted(n, k, Some(seed), z),
                None => SampleRecord::rejected(n, k, Some(seed), "no resonance near 0".into()),
            };
            rec.resonances = found;
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    let mut in_disk_total = 0;
    let mut accepted_total = 0;
    for &n in &p.n_list {
        let excl = 4.0 * (n as f64).powf(-gamma / 2.0);
        let rs: Vec<&SampleRecord> = records.iter().filter(|r| r.n == n).collect();
        let acc: Vec<&&SampleRecord> = rs.iter().filter(|r| !r.rejected).collect();
        let mut highest: Option<f64> = None;
        let mut near_in = 0;
        for r in &acc {
            let near = r.lambda.unwrap();
            if near.norm() < excl {
                near_in += 1;
            }
            // drop exactly one copy of the near-0 root
            let mut dropped = false;
            for z in &r.resonances {
                if !dropped && *z == near {
                    dropped = true;
                    continue;
                }
                highest = Some(highest.map_or(z.im, |h: f64| h.max(z.im)));
            }
        }
        in_disk_total += near_in;
        accepted_total += acc.len();
        rows.push(FreeRow {
            n,
            exclusion_radius: excl,
            highest_im: highest,
            depth: highest.map(|h| -h),
            accepted: acc.len(),
            rejected: rs.len() - acc.len(),
            near_zero_in_disk: near_in,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.highest_im.map(|h| ((r.n as f64).ln(), h)))
        .collect();
    let fit = if pts.len() >= 2 {
        let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
        Some(linear_fit(&x, &y)?)
    } else {
        None
    };
    let strictly_decreasing = rows.iter().all(|r| r.highest_im.is_some())
        && rows.windows(2).all(|w| w[1].highest_im.unwrap() < w[0].highest_im.unwrap());
    let stats = ResonanceFreeStats {
        gamma,
        a_fit: fit.map(|f| -f.slope),
        fit,
        strictly_decreasing,
        near_zero_fraction: if accepted_total == 0 {
            0.0
        } else {
            in_disk_total as f64 / accepted_total as f64
        },
        rows,
    };
    build_report(
        Campaign::ResonanceFree,
        p,
        p.n_list.clone(),
        p.m,
        records,
        &[("solver_tol", p.tol)],
        Statistics::ResonanceFree(stats),
    )
}

// ------------------------------------------------------------ counterexample

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleParams {
    /// Unit-mass profile.
    pub q: String,
    pub n_list: Vec<usize>,
    pub rect: [f64; 4],
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackedRoot {
    pub barrier_root: Complex64,
    pub matched: Vec<Option<Complex64>>,
    pub distances: Vec<Option<f64>>,
    pub decreasing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleStats {
    pub barrier_roots: Vec<Complex64>,
    pub tracked: Vec<TrackedRoot>,
    /// Resonances of Ṽ_N in the box, per N.
    pub counts: Vec<usize>,
    /// |Ṽ_N - 1_{[-1,1]}|_{H^{-2}} per N.
    pub h2_distances: Vec<f64>,
    pub h2_fit: Option<LinearFit>,
    pub roots_with_decreasing_distance: usize,
}

pub fn counterexample_study(p: &CounterexampleParams) -> Result<ExperimentReport> {
    check_lists(&p.n_list, 1)?;
    let q = Profile::parse(&p.q)?;
    let mass = q.integral();
    if (mass - 1.0).norm() > 1e-8 {
        return Err(Error::Config(format!("the counterexample needs ∫q = 1, got {mass}")));
    }
    let rect = parse_rect(p.rect)?;
    let barrier = square_barrier_resonances(Complex64::new(1.0, 0.0), 1.0, rect)?;
    let per_n: Vec<(SampleRecord, f64)> = p
        .n_list
        .par_iter()
        .map(|&n| {
            let u = deterministic_coefficients(Pattern::AllOnes, n, 1)?;
            let v = RandomPotential::new(Profile::zero(), q.clone(), u);
            let h2 = hnorm_sharp_minus(&v, 2.0, |xi| {
                let s = if xi.abs() < 1e-8 { 2.0 - xi * xi / 3.0 } else { 2.0 * xi.sin() / xi };
                Complex64::new(s, 0.0)
            })?;
            let rec = match find_resonances(&v, rect, p.tol) {
                Ok(f) => {
                    let mut r = SampleRecord::accepted(n, 0, None, Complex64::new(0.0, 0.0));
                    r.lambda = None;
                    r.resonances = f.iter().map(|x| x.lambda).collect();
                    r
                }
                Err(e) if rejectable(&e) => SampleRecord::rejected(n, 0, None, e.to_string()),
                Err(e) => return Err(e),
            };
            Ok((rec, h2))
        })
        .collect::<Result<Vec<_>>>()?;
    let tracked: Vec<TrackedRoot> = barrier
        .iter()
        .map(|&b| {
            let matched: Vec<Option<Complex64>> = per_n
                .iter()
                .map(|(r, _)| {
                    r.resonances
                        .iter()
                        .copied()
                        .min_by(|x, y| (x - b).norm().total_cmp(&(y - b).norm()))
                })
                .collect();
            let distances: Vec<Option<f64>> = matched.iter().map(|m| m.map(|z| (z - b).norm())).collect();
            let decreasing = distances.iter().all(|d| d.is_some())
                && distances.windows(2).all(|w| w[1].unwrap() < w[0].unwrap());
            TrackedRoot {
                barrier_root: b,
                matched,
                distances,
                decreasing,
            }
        })
        .collect();
    let h2_distances: Vec<f64> = per_n.iter().map(|x| x.1).collect();
    let h2_fit = if p.n_list.len() >= 3 {
        Some(rate_fit(
            &p.n_list.iter().zip(&h2_distances).map(|(&n, &d)| (n as f64, d)).collect::<Vec<_>>(),
        )?)
    } else {
        None
    };
    let stats = CounterexampleStats {
        roots_with_decreasing_distance: tracked.iter().filter(|t| t.decreasing).count(),
        counts: per_n.iter().map(|(r, _)| r.resonances.len()).collect(),
        barrier_roots: barrier,
        tracked,
        h2_distances,
        h2_fit,
    };
    build_report(
        Campaign::Counterexample,
        p,
        p.n_list.clone(),
        1,
        per_n.into_iter().map(|x| x.0).collect(),
        &[("solver_tol", p.tol)],
        Statistics::Counterexample(stats),
    )
}

// ------------------------------------------------------------- deterministic

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicParams {
    pub q0: String,
    pub q: String,
    pub lambda0: Complex64,
    pub pattern: Pattern,
    pub n_list: Vec<usize>,
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicStats {
    pub shifts: Vec<Option<Complex64>>,
    /// N² (λ_N - λ₀).
    pub scaled: Vec<Option<Complex64>>,
    pub fit: Option<LinearFit>,
}

pub fn deterministic_study(p: &DeterministicParams) -> Result<ExperimentReport> {
    check_lists(&p.n_list, 1)?;
    let q0 = Profile::parse(&p.q0)?;
    let q = Profile::parse(&p.q)?;
    let pair = make_pair(&q0, p.lambda0)?;
    let radius = search_radius(&pair);
    let records: Vec<SampleRecord> = p
        .n_list
        .par_iter()
        .map(|&n| {
            let u = deterministic_coefficients(p.pattern, n, 1)?;
            let v = RandomPotential::new(q0.clone(), q.clone(), u);
            let out = if degenerate_field(&q, &v.coeffs) {
                Ok(pair.lambda0)
            } else {
                locate(&v, &pair, ShiftMethod::Solver, radius, p.tol)?
            };
            Ok(match out {
                Ok(z) => {
                    let mut r = SampleRecord::accepted(n, 0, None, z);
                    r.rescaled = Some((z - pair.lambda0) * (n * n) as f64);
                    r
                }
                Err(reason) => SampleRecord::rejected(n, 0, None, reason),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let shifts: Vec<Option<Complex64>> = records.iter().map(|r| r.lambda.map(|z| z - pair.lambda0)).collect();
    let pts: Vec<(f64, f64)> = records
        .iter()
        .zip(&shifts)
        .filter_map(|(r, s)| s.map(|s| (r.n as f64, s.norm())))
        .filter(|p| p.1 > 0.0)
        .collect();
    let fit = if pts.len() >= 3 { Some(rate_fit(&pts)?) } else { None };
    let stats = DeterministicStats {
        scaled: records.iter().map(|r| r.rescaled).collect(),
        shifts,
        fit,
    };
    build_report(
        Campaign::Deterministic,
        p,
        p.n_list.clone(),
        1,
        records,
        &[("solver_tol", p.tol), ("search_radius", radius)],
        Statistics::Deterministic(stats),
    )
}

// -------------------------------------------------------------- series check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCheckParams {
    pub q: String,
    pub law: CoefficientLaw,
    pub n: usize,
    /// Number of non-rejected samples wanted.
    pub m: usize,
    pub seed: u64,
    /// Samples used to fit the decay constant C (separate seed stream).
    pub calibration: usize,
    pub calibration_seed: u64,
    pub truncation: usize,
    pub tol: f64,
    /// Absolute floor of the admissible gap.
    pub gap_floor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesSample {
    pub index: usize,
    pub seed: u64,
    pub h: f64,
    pub a0: Complex64,
    pub phi_root: Complex64,
    pub solver: Complex64,
    pub gap: f64,
    /// None when C·h ≥ 1.
    pub tail_estimate: Option<f64>,
    pub within: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesCheckStats {
    pub decay_constant: f64,
    pub samples: Vec<SeriesSample>,
    pub max_gap: f64,
    pub all_within: bool,
}

/// φ-root against the solver resonance on non-rejected free-pair samples.
pub fn series_check(p: &SeriesCheckParams) -> Result<ExperimentReport> {
    check_lists(&[p.n], p.m)?;
    if p.calibration == 0 {
        return Err(Error::Config("calibration needs at least one sample".into()));
    }
    let q = Profile::parse(&p.q)?;
    let pair = ResonantPair::free();
    let radius = search_radius(&pair).min(0.5);
    let make = |seed: u64| -> Result<RandomPotential> {
        Ok(RandomPotential::new(Profile::zero(), q.clone(), sample_coefficients(&p.law, p.n, 1, seed)?))
    };
    let calib: Vec<(f64, Vec<Complex64>)> = (0..p.calibration)
        .into_par_iter()
        .map(|k| {
            let v = make(derive_seed(p.calibration_seed, k as u64))?;
            let s = CharacteristicSeries::new(&v, &pair, p.truncation, 0.0)?;
            Ok((s.h, s.terms(pair.lambda0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let c = fit_decay_constant(&calib)?;
    let mut records = Vec::new();
    let mut samples = Vec::new();
    let mut next = 0usize;
    // batches of m in index order until m samples are accepted (cap 4m)
    while samples.len() < p.m && next < 4 * p.m {
        let batch: Vec<usize> = (next..next + p.m).collect();
        next += p.m;
        let out: Vec<(SampleRecord, Option<SeriesSample>)> = batch
            .par_iter()
            .map(|&k| {
                let seed = derive_seed(p.seed, k as u64);
                let v = make(seed)?;
                let series = CharacteristicSeries::new(&v, &pair, p.truncation, c)?;
                let root = match phi_root(&series, pair.lambda0, radius, p.tol) {
                    Ok(z) => z,
                    Err(e) if rejectable(&e) => return Ok((SampleRecord::rejected(p.n, k, Some(seed), e.to_string()), None)),
                    Err(e) => return Err(e),
                };
                let solver = match locate_by_solver(&v, pair.lambda0, radius, p.tol)? {
                    Ok(z) => z,
                    Err(reason) => return Ok((SampleRecord::rejected(p.n, k, Some(seed), reason), None)),
                };
                let gap = (solver - root).norm();
                let tail = series.tail_estimate.is_finite().then_some(series.tail_estimate);
                let bound = tail.unwrap_or(f64::INFINITY).max(p.gap_floor);
                let mut rec = SampleRecord::accepted(p.n, k, Some(seed), solver);
                rec.rescaled = Some(root);
                Ok((
                    rec,
                    Some(SeriesSample {
                        index: k,
                        seed,
                        h: series.h,
                        a0: series.terms(pair.lambda0)[0],
                        phi_root: root,
                        solver,
                        gap,
                        tail_estimate: tail,
                        within: gap <= bound,
                    }),
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        for (r, s) in out {
            if samples.len() >= p.m {
                break;
            }
            records.push(r);
            if let Some(s) = s {
                samples.push(s);
            }
        }
    }
    let stats = SeriesCheckStats {
        decay_constant: c,
        max_gap: samples.iter().map(|s| s.gap).fold(0.0, f64::max),
        all_within: samples.len() == p.m && samples.iter().all(|s| s.within),
        samples,
    };
    build_report(
        Campaign::SeriesCheck,
        p,
        vec![p.n],
        p.m,
        records,
        &[("solver_tol", p.tol), ("gap_floor", p.gap_floor), ("search_radius", radius)],
        Statistics::SeriesCheck(stats),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rate_fit_examples() {
        let exact: Vec<(f64, f64)> = [10.0f64, 20.0, 40.0].iter().map(|&n| (n, n.powi(-2))).collect();
        assert!((rate_fit(&exact).unwrap().slope + 2.0).abs() < 1e-12);
        let flat: Vec<(f64, f64)> = [10.0, 20.0, 40.0].iter().map(|&n| (n, 3.0)).collect();
        assert!(rate_fit(&flat).unwrap().slope.abs() < 1e-12);
        assert!(rate_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0)]).is_err());
    }

    #[test]
    fn localization_union_counts() {
        let base = vec![
            BaseResonance {
                lambda: Complex64::new(0.0, 1.0),
                multiplicity: 1,
                disk_radius: 0.1,
            },
            BaseResonance {
                lambda: Complex64::new(0.0, -0.2),
                multiplicity: 1,
                disk_radius: 0.1,
            },
        ];
        let found = vec![(Complex64::new(0.0, 1.05), 1), (Complex64::new(0.0, -0.17), 1)];
        assert!(localization_holds(&found, &base, 2.0, 1.0));
        assert!(!localization_holds(&found, &base, 2.0, 0.25));
        // overlapping disks: two roots in one component still count 2
        let both_low = vec![(Complex64::new(0.0, 0.5), 1), (Complex64::new(0.0, 0.2), 1)];
        assert!(localization_holds(&both_low, &base, 2.0, 10.0));
        assert!(!localization_holds(&both_low, &base, 2.0, 1.0));
    }

    #[test]
    fn degenerate_case_study() {
        let p = CaseStudyParams {
            case: Case::III,
            d: 1,
            q0: "zero".into(),
            q: "zero".into(),
            lambda0: Complex64::new(0.0, 0.0),
            law: CoefficientLaw::Rademacher,
            n_list: vec![10],
            m: 3,
            seed: 1,
            method: ShiftMethod::Solver,
            spot_checks: 0,
            tol: 1e-10,
        };
        let r = run_case_study(&p);
        // q ≡ 0 has no finite L, but the shift is exactly zero
        match r {
            Ok(rep) => assert!(rep.records.iter().all(|x| x.lambda == Some(Complex64::new(0.0, 0.0)))),
            Err(e) => panic!("{e}"),
        }
    }

    #[test]
    fn classifier_mismatch_is_config_error() {
        let p = CaseStudyParams {
            case: Case::III,
            d: 1,
            q0: "zero".into(),
            q: "psi".into(),
            lambda0: Complex64::new(0.0, 0.0),
            law: CoefficientLaw::Rademacher,
            n_list: vec![10],
            m: 1,
            seed: 1,
            method: ShiftMethod::Series { order: 0 },
            spot_checks: 0,
            tol: 1e-10,
        };
        assert!(matches!(run_case_study(&p), Err(Error::Config(_))));
    }
}
