use clap::{Args, Parser, Subcommand};
use hopres::cli::{self, Output};
use hopres::config::RunConfig;
use hopres::{Error, Result};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "hopres", version, about = "Resonances of random highly oscillatory potentials")]
struct Cli {
    /// Worker threads (default: logical cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output path prefix; `<out>.json` and `<out>.csv` are written.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Moments, vanishing order and γ of a profile.
    ProfileInfo(Flags),
    /// One realization of V_N on a grid.
    PotentialDump(Flags),
    /// All resonances of one realization in a box.
    Resonances(Flags),
    /// H^{-s} norm of V_# by the α-matrix and by spectral quadrature.
    Hnorm(Flags),
    /// Tail of the quadratic form against t².
    HwTail(Flags),
    /// Case, γ, Σ, L and effective-potential constants.
    Limits(Flags),
    /// Monte Carlo study of λ_N − λ₀.
    CaseStudy(Flags),
    /// Disk inclusion and counting around the resonances of q₀.
    Localize(Flags),
    /// Highest resonance below the real axis as N grows.
    FreeRegion(Flags),
    /// All-ones coefficients against the square barrier.
    Counterexample(Flags),
    /// Rerun a report and diff it against the original.
    Replay {
        report: PathBuf,
    },
}

/// Every flag maps to the config key of the same name (dashes become
/// underscores); flags override values read from `--config`.
#[derive(Args, Default)]
struct Flags {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    q: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    q0: Option<String>,
    #[arg(long)]
    d: Option<String>,
    #[arg(long)]
    law: Option<String>,
    /// Scale N, or a comma-separated list.
    #[arg(long = "N")]
    n: Option<String>,
    /// Sample count.
    #[arg(long = "M")]
    m: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// re0,re1,im0,im1
    #[arg(long = "box", allow_hyphen_values = true)]
    rect: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    s: Option<String>,
    /// `re,im`, `a+bi` or `bi`.
    #[arg(long, allow_hyphen_values = true)]
    lambda0: Option<String>,
    #[arg(long)]
    case: Option<String>,
    /// `series` or `solver`.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    order: Option<String>,
    #[arg(long)]
    spot_checks: Option<String>,
    #[arg(long)]
    t_grid: Option<String>,
    #[arg(long)]
    radius: Option<String>,
    #[arg(long)]
    scales: Option<String>,
    #[arg(long)]
    points: Option<String>,
}

impl Flags {
    fn into_config(self, sub: &str) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let cfg = RunConfig::parse_text(&std::fs::read_to_string(path)?)?;
                if cfg.subcommand != sub {
                    return Err(Error::Config(format!(
                        "config is for '{}', not '{sub}'",
                        cfg.subcommand
                    )));
                }
                cfg
            }
            None => RunConfig::new(sub),
        };
        let pairs = [
            ("q", self.q),
            ("q0", self.q0),
            ("d", self.d),
            ("law", self.law),
            ("N", self.n),
            ("M", self.m),
            ("seed", self.seed),
            ("box", self.rect),
            ("tol", self.tol),
            ("s", self.s),
            ("lambda0", self.lambda0),
            ("case", self.case),
            ("method", self.method),
            ("order", self.order),
            ("spot_checks", self.spot_checks),
            ("t_grid", self.t_grid),
            ("radius", self.radius),
            ("scales", self.scales),
            ("points", self.points),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                cfg.set(k, v.trim());
            }
        }
        Ok(cfg)
    }
}

fn write_outputs(out: &Path, cfg: &RunConfig, o: &Output) -> Result<()> {
    if let Some(dir) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(out.with_extension("json"), cli::render(cfg, &o.result)?)?;
    std::fs::write(out.with_extension("csv"), &o.csv)?;
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let (sub, flags) = match cli.cmd {
        Cmd::Replay { report } => {
            let text = std::fs::read_to_string(&report)?;
            let r = cli::replay(&text)?;
            if let Some(out) = &cli.out {
                std::fs::write(out.with_extension("json"), &r.rendered)?;
            }
            if r.identical {
                println!("replay: {} identical (config_digest {})", r.config.subcommand, &r.config.digest()[..12]);
                return Ok(ExitCode::SUCCESS);
            }
            for line in &r.diff {
                println!("{line}");
            }
            println!("replay: {} differs at {} paths", r.config.subcommand, r.diff.len());
            return Ok(ExitCode::from(1));
        }
        Cmd::ProfileInfo(f) => ("profile-info", f),
        Cmd::PotentialDump(f) => ("potential-dump", f),
        Cmd::Resonances(f) => ("resonances", f),
        Cmd::Hnorm(f) => ("hnorm", f),
        Cmd::HwTail(f) => ("hw-tail", f),
        Cmd::Limits(f) => ("limits", f),
        Cmd::CaseStudy(f) => ("case-study", f),
        Cmd::Localize(f) => ("localize", f),
        Cmd::FreeRegion(f) => ("free-region", f),
        Cmd::Counterexample(f) => ("counterexample", f),
    };
    let cfg = flags.into_config(sub)?;
    let o = cli::execute(&cfg)?;
    let out = cli.out.unwrap_or_else(|| PathBuf::from(format!("hopres-{sub}")));
    write_outputs(&out, &cfg, &o)?;
    println!("{} -> {}", o.summary, out.with_extension("json").display());
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
