//! Subcommand dispatch behind the `hopres` binary. Every subcommand is a pure
//! function of its [`RunConfig`]; the binary only parses flags, writes files
//! and maps errors to exit codes.

use crate::config::RunConfig;
use crate::ensemble::{sample_coefficients, CoefficientLaw, RandomPotential};
use crate::error::{Error, Result};
use crate::experiments::{
    self, make_pair, CaseStudyParams, CounterexampleParams, ExperimentReport, LocalizationParams,
    ResonanceFreeParams, ShiftMethod,
};
use crate::limits::{case_classifier, limits_report, vanishing_order_d, Case};
use crate::profiles::{gamma_exponent, Profile};
use crate::resonances::{find_resonances, Rect, ResonanceRecord};
use crate::sobolev::{alpha_matrix, hnorm_spectral, hw_tail_experiment, quadratic_form};
use num_complex::Complex64;
use serde_json::{json, Value};
use std::fmt::Write as _;

pub const SCHEMA: u32 = 1;

pub const SUBCOMMANDS: [&str; 11] = [
    "profile-info",
    "potential-dump",
    "resonances",
    "hnorm",
    "hw-tail",
    "limits",
    "case-study",
    "localize",
    "free-region",
    "counterexample",
    "replay",
];

/// What a subcommand produces before it is written anywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub result: Value,
    pub csv: String,
    pub summary: String,
}

/// Accepts `re,im`, a plain real, `bi` or `a+bi` / `a-bi`.
pub fn parse_complex(text: &str) -> Result<Complex64> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || Error::Config(format!("cannot parse complex number '{text}'"));
    if let Some((a, b)) = t.split_once(',') {
        return Ok(Complex64::new(a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?));
    }
    if let Some(body) = t.strip_suffix('i') {
        // Split at the last sign that is not the leading one or an exponent sign.
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        let (re, im) = match split {
            Some(k) => (&body[..k], &body[k..]),
            None => ("0", body),
        };
        let im = match im {
            "" | "+" => "1",
            "-" => "-1",
            s => s,
        };
        return Ok(Complex64::new(re.parse().map_err(|_| bad())?, im.parse().map_err(|_| bad())?));
    }
    Ok(Complex64::new(t.parse().map_err(|_| bad())?, 0.0))
}

fn profile(cfg: &RunConfig, key: &str, default: Option<&str>) -> Result<Profile> {
    let text = match (cfg.get(key), default) {
        (Some(t), _) => t,
        (None, Some(d)) => d,
        (None, None) => return Err(Error::Config(format!("missing required key '{key}'"))),
    };
    Profile::parse(text).map_err(|e| Error::Config(format!("{key}: {e}")))
}

fn law(cfg: &RunConfig) -> Result<CoefficientLaw> {
    CoefficientLaw::parse(cfg.get("law").unwrap_or("rademacher"))
}

fn rect4(cfg: &RunConfig, key: &str, default: [f64; 4]) -> Result<[f64; 4]> {
    match cfg.list::<f64>(key)? {
        None => Ok(default),
        Some(v) if v.len() == 4 => Ok([v[0], v[1], v[2], v[3]]),
        Some(_) => Err(Error::Config(format!("'{key}' needs re0,re1,im0,im1"))),
    }
}

fn lambda0(cfg: &RunConfig) -> Result<Complex64> {
    cfg.get("lambda0").map(parse_complex).unwrap_or(Ok(Complex64::new(0.0, 0.0)))
}

fn n_list(cfg: &RunConfig) -> Result<Vec<usize>> {
    cfg.list::<usize>("N")?
        .ok_or_else(|| Error::Config("missing required key 'N'".into()))
}

fn single_n(cfg: &RunConfig) -> Result<usize> {
    match n_list(cfg)?.as_slice() {
        [n] => Ok(*n),
        _ => Err(Error::Config("'N' must be a single value here".into())),
    }
}

fn c2(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

/// Runs one subcommand (anything but `replay`).
pub fn execute(cfg: &RunConfig) -> Result<Output> {
    match cfg.subcommand.as_str() {
        "profile-info" => profile_info(cfg),
        "potential-dump" => potential_dump(cfg),
        "resonances" => resonances(cfg),
        "hnorm" => hnorm(cfg),
        "hw-tail" => hw_tail(cfg),
        "limits" => limits(cfg),
        "case-study" => case_study(cfg),
        "localize" => localize(cfg),
        "free-region" => free_region(cfg),
        "counterexample" => counterexample(cfg),
        "replay" => Err(Error::Config("replay takes a report file, not a config".into())),
        other => Err(Error::Config(format!("unknown subcommand '{other}'"))),
    }
}

/// The versioned JSON artifact written for every run.
pub fn envelope(cfg: &RunConfig, result: &Value) -> Value {
    json!({
        "schema": SCHEMA,
        "subcommand": cfg.subcommand,
        "config": cfg.entries,
        "config_digest": cfg.digest(),
        "result": result,
    })
}

pub fn render(cfg: &RunConfig, result: &Value) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&envelope(cfg, result))?;
    s.push('\n');
    Ok(s)
}

/// Recovers the run configuration stored in a report.
pub fn config_from_report(report: &Value) -> Result<RunConfig> {
    let bad = |m: &str| Error::Config(format!("not a report: {m}"));
    if report.get("schema").and_then(Value::as_u64) != Some(SCHEMA as u64) {
        return Err(bad("missing or unsupported schema"));
    }
    let sub = report.get("subcommand").and_then(Value::as_str).ok_or_else(|| bad("no subcommand"))?;
    let mut cfg = RunConfig::new(sub);
    let entries = report.get("config").and_then(Value::as_object).ok_or_else(|| bad("no config"))?;
    for (k, v) in entries {
        cfg.set(k, v.as_str().ok_or_else(|| bad("config values must be strings"))?);
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub config: RunConfig,
    pub identical: bool,
    /// JSON paths whose values differ.
    pub diff: Vec<String>,
    pub rendered: String,
}

/// Reruns the configuration stored in `text` and compares byte for byte.
pub fn replay(text: &str) -> Result<Replay> {
    let old: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("report is not JSON: {e}")))?;
    let cfg = config_from_report(&old)?;
    let out = execute(&cfg)?;
    let rendered = render(&cfg, &out.result)?;
    let identical = rendered == text;
    let mut diff = Vec::new();
    if !identical {
        let new: Value = serde_json::from_str(&rendered)?;
        json_diff("$", &old, &new, &mut diff);
        if diff.is_empty() {
            diff.push("$: formatting differs".into());
        }
    }
    Ok(Replay {
        config: cfg,
        identical,
        diff,
        rendered,
    })
}

fn json_diff(path: &str, a: &Value, b: &Value, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for (k, va) in x {
                match y.get(k) {
                    Some(vb) => json_diff(&format!("{path}.{k}"), va, vb, out),
                    None => out.push(format!("{path}.{k}: removed")),
                }
            }
            for k in y.keys().filter(|k| !x.contains_key(*k)) {
                out.push(format!("{path}.{k}: added"));
            }
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => {
            for (i, (va, vb)) in x.iter().zip(y).enumerate() {
                json_diff(&format!("{path}[{i}]"), va, vb, out);
            }
        }
        _ if a == b => {}
        _ => out.push(format!("{path}: {a} -> {b}")),
    }
}

fn profile_info(cfg: &RunConfig) -> Result<Output> {
    let q = profile(cfg, "q", None)?;
    let d: u32 = cfg.parsed_or("d", 1)?;
    let points: usize = cfg.parsed_or("points", 201)?;
    let m = vanishing_order_d(&q, d)?;
    let gamma = gamma_exponent(d, m)?;
    let (lo, hi) = q.support();
    let result = json!({
        "profile": q.to_string(),
        "d": d,
        "support": [lo, hi],
        "integral": c2(q.integral()),
        "first_moment": c2(q.moment(1)),
        "abs_integral": q.abs_integral(),
        "sup_norm": q.sup_norm(),
        "real": q.is_real(),
        "vanishing_order": m,
        "gamma": gamma.to_string(),
    });
    let mut csv = String::from("x,re,im\n");
    let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (-1.0, 1.0) };
    for k in 0..points.max(2) {
        let x = lo + (hi - lo) * k as f64 / (points.max(2) - 1) as f64;
        let v = q.eval(x);
        let _ = writeln!(csv, "{x:?},{:?},{:?}", v.re, v.im);
    }
    let summary = format!("profile-info: {q} m={m} gamma={gamma}");
    Ok(Output { result, csv, summary })
}

fn realization(cfg: &RunConfig) -> Result<(RandomPotential, u64)> {
    let d: u32 = cfg.parsed_or("d", 1)?;
    if d != 1 {
        return Err(Error::UnsupportedDimension(d));
    }
    let seed: u64 = cfg.required("seed")?;
    let n = single_n(cfg)?;
    let u = sample_coefficients(&law(cfg)?, n, 1, seed)?;
    Ok((RandomPotential::new(profile(cfg, "q0", Some("zero"))?, profile(cfg, "q", None)?, u), seed))
}

fn potential_dump(cfg: &RunConfig) -> Result<Output> {
    let (v, seed) = realization(cfg)?;
    let points: usize = cfg.parsed_or("points", 2001)?;
    let (lo, hi) = v.support();
    let csv = v.grid_csv(lo, hi, points);
    let result = json!({
        "N": v.n,
        "seed": seed,
        "support": [lo, hi],
        "sup_bound": v.sup_bound(),
        "coefficients": v.coeffs.values,
    });
    let summary = format!("potential-dump: N={} support=[{lo}, {hi}] points={points}", v.n);
    Ok(Output { result, csv, summary })
}

fn resonances(cfg: &RunConfig) -> Result<Output> {
    let (v, _) = realization(cfg)?;
    let b = rect4(cfg, "box", [-3.0, 3.0, -3.0, 0.5])?;
    let tol: f64 = cfg.parsed_or("tol", 1e-10)?;
    let rect = Rect::new(b[0], b[1], b[2], b[3]).map_err(|e| Error::Config(e.to_string()))?;
    let roots = find_resonances(&v, rect, tol)?;
    let records: Vec<ResonanceRecord> = roots.iter().map(ResonanceRecord::from).collect();
    let mut csv = String::from("re,im,multiplicity,residual\n");
    for r in &records {
        let _ = writeln!(csv, "{:?},{:?},{},{:?}", r.re, r.im, r.multiplicity, r.residual);
    }
    let count: usize = records.iter().map(|r| r.multiplicity).sum();
    let summary = format!("resonances: {count} (with multiplicity) in box {b:?}");
    Ok(Output {
        result: json!({ "box": b, "resonances": records }),
        csv,
        summary,
    })
}

fn hnorm(cfg: &RunConfig) -> Result<Output> {
    let q = profile(cfg, "q", None)?;
    let d: u32 = cfg.parsed_or("d", 1)?;
    let s: f64 = cfg.parsed_or("s", 2.0)?;
    let seed: u64 = cfg.required("seed")?;
    let law = law(cfg)?;
    let mut rows = Vec::new();
    let mut csv = String::from("N,hnorm_spectral,hnorm_alpha,rel_gap\n");
    for n in n_list(cfg)? {
        let u = sample_coefficients(&law, n, d, seed)?;
        let a = alpha_matrix(&q, n, d, s)?;
        let qf = quadratic_form(&a, &u)?;
        let spectral = if d == 1 {
            Some(hnorm_spectral(&RandomPotential::new(Profile::zero(), q.clone(), u), s)?)
        } else {
            None
        };
        let alpha_norm = qf.max(0.0).sqrt();
        let gap = spectral.map(|h| (h * h - qf).abs() / qf.abs().max(f64::MIN_POSITIVE));
        let _ = writeln!(
            csv,
            "{n},{},{alpha_norm:?},{}",
            spectral.map_or("".into(), |h| format!("{h:?}")),
            gap.map_or("".into(), |g| format!("{g:?}"))
        );
        rows.push(json!({
            "N": n,
            "hnorm_spectral": spectral,
            "hnorm_alpha": alpha_norm,
            "rel_gap": gap,
            "trace": a.trace,
            "hs_norm": a.hs_norm,
        }));
    }
    let summary = format!("hnorm: s={s} d={d} rows={}", rows.len());
    Ok(Output {
        result: json!({ "s": s, "d": d, "rows": rows }),
        csv,
        summary,
    })
}

fn hw_tail(cfg: &RunConfig) -> Result<Output> {
    let q = profile(cfg, "q", None)?;
    let d: u32 = cfg.parsed_or("d", 1)?;
    let s: f64 = cfg.parsed_or("s", 2.0)?;
    let n = single_n(cfg)?;
    let m: usize = cfg.required("M")?;
    let seed: u64 = cfg.required("seed")?;
    let a = alpha_matrix(&q, n, d, s)?;
    let t_grid = match cfg.list::<f64>("t_grid")? {
        Some(t) => t,
        // Default: t² from 2|trace| to 8|trace| in 16 steps.
        None => (0..16)
            .map(|k| (2.0 * a.trace.abs() * (1.0 + 3.0 * k as f64 / 15.0)).sqrt())
            .collect(),
    };
    let exp = hw_tail_experiment(&a, &law(cfg)?, &t_grid, m, seed)?;
    let summary = format!(
        "hw-tail: N={n} M={m} mean={:.6e} trace={:.6e} decay_rate={}",
        exp.mean,
        exp.trace,
        exp.decay_rate.map_or("n/a".into(), |r| format!("{r:.4}"))
    );
    Ok(Output {
        csv: exp.to_csv(),
        result: serde_json::to_value(&exp)?,
        summary,
    })
}

fn limits(cfg: &RunConfig) -> Result<Output> {
    let q = profile(cfg, "q", None)?;
    let q0 = profile(cfg, "q0", Some("zero"))?;
    let d: u32 = cfg.parsed_or("d", 1)?;
    let n: usize = match cfg.list::<usize>("N")? {
        Some(v) if v.len() == 1 => v[0],
        Some(_) => return Err(Error::Config("'N' must be a single value here".into())),
        None => 20,
    };
    let pair = make_pair(&q0, lambda0(cfg)?)?;
    let rep = limits_report(&q, &pair, d, n)?;
    let mut csv = String::from("quantity,re,im\n");
    for (name, v) in [
        ("L", rep.l),
        ("sigma2", rep.sigma2),
        ("V_eff_constant", rep.v_eff_constant),
        ("V_eff_constant_consistent", rep.v_eff_constant_consistent),
    ] {
        if let Some([re, im]) = v {
            let _ = writeln!(csv, "{name},{re:?},{im:?}");
        }
    }
    let summary = format!("limits: case={} gamma={} m={}", rep.case, rep.gamma, rep.vanishing_order);
    Ok(Output {
        result: serde_json::to_value(&rep)?,
        csv,
        summary,
    })
}

/// Per-sample CSV of a campaign report.
pub fn records_csv(rep: &ExperimentReport) -> String {
    let mut csv = String::from("N,index,seed,re,im,rescaled_re,rescaled_im,rejected,reason\n");
    let opt = |z: Option<Complex64>| z.map_or((String::new(), String::new()), |z| (format!("{:?}", z.re), format!("{:?}", z.im)));
    for r in &rep.records {
        let (re, im) = opt(r.lambda);
        let (sre, sim) = opt(r.rescaled);
        let reason = r.reason.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(
            csv,
            "{},{},{},{re},{im},{sre},{sim},{},{reason}",
            r.n,
            r.index,
            r.seed.map_or(String::new(), |s| s.to_string()),
            r.rejected
        );
    }
    csv
}

fn campaign_output(name: &str, rep: ExperimentReport) -> Result<Output> {
    let summary = format!(
        "{name}: accepted={} rejected={} params_digest={}",
        rep.accepted,
        rep.rejected,
        &rep.params_digest[..12]
    );
    Ok(Output {
        csv: records_csv(&rep),
        result: serde_json::to_value(&rep)?,
        summary,
    })
}

fn case_study(cfg: &RunConfig) -> Result<Output> {
    let d: u32 = cfg.parsed_or("d", 1)?;
    let q0_text = cfg.get("q0").unwrap_or("zero").to_string();
    let q_text = cfg.required::<String>("q")?;
    let lambda0 = lambda0(cfg)?;
    let case: Case = match cfg.get("case") {
        Some(c) => c.parse()?,
        None => {
            let pair = make_pair(&Profile::parse(&q0_text)?, lambda0)?;
            case_classifier(d, &Profile::parse(&q_text)?, &pair)?
        }
    };
    let method = match cfg.get("method").unwrap_or("series") {
        "solver" => ShiftMethod::Solver,
        "series" => ShiftMethod::Series {
            order: cfg.parsed_or("order", 0)?,
        },
        other => return Err(Error::Config(format!("unknown method '{other}'"))),
    };
    let p = CaseStudyParams {
        case,
        d,
        q0: q0_text,
        q: q_text,
        lambda0,
        law: law(cfg)?,
        n_list: n_list(cfg)?,
        m: cfg.required("M")?,
        seed: cfg.required("seed")?,
        method,
        spot_checks: cfg.parsed_or("spot_checks", 0)?,
        tol: cfg.parsed_or("tol", 1e-10)?,
    };
    campaign_output("case-study", experiments::run_case_study(&p)?)
}

fn localize(cfg: &RunConfig) -> Result<Output> {
    let p = LocalizationParams {
        q0: cfg.required("q0")?,
        q: cfg.required("q")?,
        law: law(cfg)?,
        radius: cfg.parsed_or("radius", 2.0)?,
        n: single_n(cfg)?,
        m: cfg.required("M")?,
        seed: cfg.required("seed")?,
        tol: cfg.parsed_or("tol", 1e-10)?,
        scales: cfg.list("scales")?.unwrap_or_else(|| vec![0.25, 1.0, 4.0]),
    };
    campaign_output("localize", experiments::localization_check(&p)?)
}

fn free_region(cfg: &RunConfig) -> Result<Output> {
    let p = ResonanceFreeParams {
        q: cfg.required("q")?,
        law: law(cfg)?,
        n_list: n_list(cfg)?,
        m: cfg.required("M")?,
        seed: cfg.required("seed")?,
        rect: rect4(cfg, "box", [-6.0, 6.0, -5.0, 0.5])?,
        tol: cfg.parsed_or("tol", 1e-10)?,
    };
    campaign_output("free-region", experiments::resonance_free_scan(&p)?)
}

fn counterexample(cfg: &RunConfig) -> Result<Output> {
    let p = CounterexampleParams {
        q: cfg.get("q").unwrap_or("unit(psi)").to_string(),
        n_list: n_list(cfg)?,
        rect: rect4(cfg, "box", [0.0, 8.0, -3.0, 0.5])?,
        tol: cfg.parsed_or("tol", 1e-10)?,
    };
    campaign_output("counterexample", experiments::counterexample_study(&p)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_forms() {
        let z = Complex64::new(0.3, -0.7);
        for t in ["0.3,-0.7", "0.3-0.7i", " 0.3 - 0.7i "] {
            assert_eq!(parse_complex(t).unwrap(), z);
        }
        assert_eq!(parse_complex("1.0965i").unwrap(), Complex64::new(0.0, 1.0965));
        assert_eq!(parse_complex("-i").unwrap(), Complex64::new(0.0, -1.0));
        assert_eq!(parse_complex("2").unwrap(), Complex64::new(2.0, 0.0));
        assert_eq!(parse_complex("1e-3+2e-3i").unwrap(), Complex64::new(1e-3, 2e-3));
        assert!(parse_complex("x").is_err());
    }

    #[test]
    fn limits_dispatch_and_replay() {
        let mut cfg = RunConfig::new("limits");
        cfg.set("d", 1).set("q", "d1(psi)").set("q0", "zero");
        let out = execute(&cfg).unwrap();
        assert_eq!(out.result["case"], "III");
        assert_eq!(out.result["gamma"], "3/2");
        let text = render(&cfg, &out.result).unwrap();
        let r = replay(&text).unwrap();
        assert!(r.identical, "{:?}", r.diff);
        let tampered = text.replace("\"III\"", "\"II\"");
        let r = replay(&tampered).unwrap();
        assert!(!r.identical);
        assert!(r.diff.iter().any(|d| d.contains("case")), "{:?}", r.diff);
    }

    #[test]
    fn unknown_subcommand_is_config_error() {
        let e = execute(&RunConfig::new("nope")).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }
}
