use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};

use gapflow::harness::{
    init_threads, parse_config, run_diag, run_gap, run_spacing, Format, Method, RunConfig, RunResult,
    SpacingConfig, DEFAULT_WINDOW,
};
use gapflow::verify::{run_suite, VerifyOptions};
use gapflow::{EnsembleSpec, Kind};

const EXIT_VERIFY: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

/// Gap probabilities of the Gaussian, Laguerre and Jacobi unitary ensembles.
#[derive(Parser, Debug)]
#[command(name = "gapflow", version)]
struct Cli {
    /// key=value file supplying defaults for any long flag
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// E₂(0; I(s)) over a grid of endpoints
    Gap(Common),
    /// s, q, p, u, v, w, R, σ over a grid of endpoints
    Diag(Common),
    /// Structural and cross-route checks; human report on stdout, JSON to --output
    Verify {
        #[command(flatten)]
        common: Common,
        /// add this to σ in the Tracy–Widom initial state
        #[arg(long)]
        perturb_sigma: Option<f64>,
    },
    /// Nearest-neighbour spacing density
    Spacing {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a1: Option<f64>,
        #[arg(long)]
        a2_from: Option<f64>,
        #[arg(long)]
        a2_to: Option<f64>,
        #[arg(long)]
        bins: Option<usize>,
        /// conditioning half-width around a1 (mc)
        #[arg(long)]
        window: Option<f64>,
        /// difference step (fredholm)
        #[arg(long)]
        h: Option<f64>,
    },
}

#[derive(Args, Debug, Default)]
struct Common {
    #[arg(long)]
    ensemble: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    a: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long, allow_hyphen_values = true)]
    s_from: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    s_to: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    samples: Option<usize>,
    /// offset from the anchored endpoint
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

/// Flag value, else config-file value, else nothing.
struct Resolver {
    file: BTreeMap<String, String>,
}

impl Resolver {
    fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> anyhow::Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.file.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| anyhow!("config key {key}='{v}': {e}")),
        }
    }
}

fn resolve(c: Common, r: &Resolver, default_method: Method) -> anyhow::Result<RunConfig> {
    let kind: Kind = r
        .get(c.ensemble, "ensemble")?
        .ok_or_else(|| anyhow!("--ensemble is required (gaussian, laguerre or jacobi)"))?
        .parse()
        .map_err(|e| anyhow!("{e}"))?;
    let n = r.get(c.n, "n")?.ok_or_else(|| anyhow!("--n is required"))?;
    let a = r.get(c.a, "a")?.unwrap_or(0.0);
    let b = r.get(c.b, "b")?.unwrap_or(0.0);
    let spec = EnsembleSpec::new(kind, n, a, b)?;
    let method = r.get(c.method.map(|m| m.to_string()), "method")?.map(|m| m.parse::<Method>()).transpose()?;
    let mut cfg = RunConfig::new(spec, method.unwrap_or(default_method));
    let s_from = r.get(c.s_from, "s-from")?;
    let s_to = r.get(c.s_to, "s-to")?;
    cfg.s_range = match (s_from, s_to) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => return Err(anyhow!("--s-from and --s-to go together")),
    };
    if let Some(v) = r.get(c.points, "points")? {
        cfg.points = v;
    }
    if let Some(v) = r.get(c.order, "order")? {
        cfg.order = v;
    }
    if let Some(v) = r.get(c.tol, "tol")? {
        cfg.tol = v;
    }
    if let Some(v) = r.get(c.seed, "seed")? {
        cfg.seed = v;
    }
    if let Some(v) = r.get(c.samples, "samples")? {
        cfg.samples = v;
    }
    if let Some(v) = r.get(c.delta, "delta")? {
        cfg.delta = v;
    }
    cfg.output = r.get(c.output.map(|p| p.display().to_string()), "output")?.map(PathBuf::from);
    if let Some(v) = r.get(c.format.map(|f| format!("{f:?}")), "format")? {
        cfg.format = v.parse::<Format>()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn default_path(cmd: &str, format: Format) -> PathBuf {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    PathBuf::from(format!("{cmd}.{ext}"))
}

fn finish(result: RunResult, path: &Path, format: Format) -> ExitCode {
    let (curve, err) = match result {
        Ok(c) => (c, None),
        Err(f) => (f.partial, Some(f.error)),
    };
    if let Err(e) = curve.write(path, format) {
        eprintln!("error: writing {}: {e}", path.display());
        return ExitCode::from(EXIT_NUMERIC);
    }
    match err {
        None => {
            eprintln!("wrote {} rows to {}", curve.rows.len(), path.display());
            ExitCode::SUCCESS
        }
        Some(e) => {
            eprintln!("error: {e}; {} rows written to {}", curve.rows.len(), path.display());
            ExitCode::from(EXIT_NUMERIC)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let file = match &cli.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            parse_config(&text)?
        }
        None => BTreeMap::new(),
    };
    let r = Resolver { file };
    Ok(match cli.command {
        Command::Gap(c) => {
            let cfg = resolve(c, &r, Method::Fredholm)?;
            let path = cfg.output.clone().unwrap_or_else(|| default_path("gap", cfg.format));
            finish(run_gap(&cfg), &path, cfg.format)
        }
        Command::Diag(c) => {
            let cfg = resolve(c, &r, Method::Fredholm)?;
            if !matches!(cfg.method, Method::Fredholm | Method::TwOde) {
                return Err(anyhow!("diag supports --method fredholm or tw-ode"));
            }
            let path = cfg.output.clone().unwrap_or_else(|| default_path("diag", cfg.format));
            finish(run_diag(&cfg), &path, cfg.format)
        }
        Command::Spacing { common, a1, a2_from, a2_to, bins, window, h } => {
            let cfg = resolve(common, &r, Method::Fredholm)?;
            if !matches!(cfg.method, Method::Fredholm | Method::Mc) {
                return Err(anyhow!("spacing supports --method fredholm or mc"));
            }
            let a1 = r.get(a1, "a1")?.ok_or_else(|| anyhow!("--a1 is required"))?;
            let lo = r.get(a2_from, "a2-from")?.unwrap_or(a1);
            let hi = r.get(a2_to, "a2-to")?.ok_or_else(|| anyhow!("--a2-to is required"))?;
            let sp = SpacingConfig {
                a1,
                a2_range: (lo, hi),
                bins: r.get(bins, "bins")?.unwrap_or(20),
                window: r.get(window, "window")?.unwrap_or(DEFAULT_WINDOW),
                h: r.get(h, "h")?.unwrap_or(1e-3),
            };
            if !(sp.window > 0.0) || !(sp.h > 0.0) || sp.bins == 0 || !(hi > lo) {
                return Err(anyhow!("need window > 0, h > 0, bins ≥ 1 and a2-to > a2-from"));
            }
            let path = cfg.output.clone().unwrap_or_else(|| default_path("spacing", cfg.format));
            finish(run_spacing(&cfg, &sp), &path, cfg.format)
        }
        Command::Verify { common, perturb_sigma } => {
            let points = r.get(common.points, "points")?;
            let cfg = resolve(common, &r, Method::Fredholm)?;
            let opts = VerifyOptions {
                order: cfg.order,
                tol: cfg.tol,
                points: points.unwrap_or(VerifyOptions::default().points),
                delta: cfg.delta,
                perturb_sigma: r.get(perturb_sigma, "perturb-sigma")?.unwrap_or(0.0),
                range: cfg.s_range,
            };
            let report = match run_suite(&cfg.spec, &opts) {
                Ok(rep) => rep,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Ok(ExitCode::from(EXIT_NUMERIC));
                }
            };
            print!("{}", report.human());
            let path = cfg.output.clone().unwrap_or_else(|| PathBuf::from("verify.json"));
            let json = serde_json::to_string_pretty(&report)?;
            std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFY)
            }
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
