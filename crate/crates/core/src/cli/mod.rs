//! Command-line front end: one TOML config per run, CSV results.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 mathematical
//! rejection or non-convergence.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::asymptotics::{zero_data, TruncationWindow};
use crate::bifurcation::{continue_branch, ContinuationOptions, CorrectorOptions};
use crate::error::Error;
use crate::model::{classify_zero_endpoint, validate_hypotheses, CoefficientFamily, SampleGrid};
use crate::spectrum::{
    compute_spectrum, detect_accumulation, eigenfunction, find_eigenvalue, scan_spectrum, EigenvalueRecord, Endpoint,
};

use config::{ConfigErrors, EndpointConfig, RunConfig};
use output::{num, Header, OutputDir};

pub const OUT_ENV: &str = "RADIAL_DIRAC_OUT";

#[derive(Parser, Debug)]
#[command(name = "radial-dirac", version, about = "Gap spectra and bifurcation branches of radial Dirac systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; overrides the environment and the config file.
    #[arg(long, global = true, env = OUT_ENV)]
    pub out: Option<PathBuf>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Check the admissibility hypotheses.
    Check,
    /// Eigenvalues in the gap with rotation numbers and nodal indices.
    Spectrum,
    /// Normalised eigenfunction of one level.
    Eigenfunction,
    /// Angle growth at a gap edge.
    Accumulation,
    /// Nonlinear branch continued from one level.
    Branch,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Check => "check",
            Command::Spectrum => "spectrum",
            Command::Eigenfunction => "eigenfunction",
            Command::Accumulation => "accumulation",
            Command::Branch => "branch",
        }
    }
}

/// Failure with its exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Math(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Math(_) => 2,
        }
    }
}

impl From<ConfigErrors> for Failure {
    fn from(e: ConfigErrors) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::ZeroK | Error::InvalidParameter(_) | Error::Table(_) => Failure::Config(e.to_string()),
            _ => Failure::Math(e.to_string()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast::<Error>() {
            Ok(err) => err.into(),
            Err(e) => Failure::Config(format!("{e:#}")),
        }
    }
}

struct Context {
    cfg: RunConfig,
    out: OutputDir,
    quiet: bool,
    hash: String,
    stdout: Vec<String>,
}

impl Context {
    fn say(&mut self, line: impl Into<String>) {
        if !self.quiet {
            self.stdout.push(line.into());
        }
    }

    fn header(&self, cmd: Command) -> Header {
        Header::new(cmd.name(), &self.hash)
    }

    fn window_header(&self, h: Header, w: &TruncationWindow<f64>) -> Header {
        let n = &self.cfg.numerics;
        h.line(format!("window: x0={} x_inf={} delta={} epsilon={}", num(w.x0), num(w.x_inf), num(w.delta), num(w.epsilon)))
            .line(format!("tolerances: rtol={} atol={} tol={}", num(n.rtol), num(n.atol), num(n.tol)))
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok((code, lines)) => {
            let mut so = std::io::stdout().lock();
            for l in lines {
                let _ = writeln!(so, "{l}");
            }
            code
        }
        Err(f) => {
            let (Failure::Config(m) | Failure::Math(m)) = &f;
            eprintln!("error: {m}");
            f.code()
        }
    }
}

/// Runs a parsed command; `Ok` carries the exit code and summary lines.
pub fn execute(cli: &Cli) -> Result<(i32, Vec<String>), Failure> {
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config PATH is required".into()))?;
    let cfg = RunConfig::from_path(path)?;
    let out_dir = cli.out.clone().or_else(|| cfg.output.dir.as_ref().map(|d| cfg.base_dir.join(d))).unwrap_or_else(|| "out".into());
    let out = OutputDir::create(&out_dir).map_err(|e| Failure::Config(format!("{e:#}")))?;
    let hash = cfg.hash();
    let mut ctx = Context { cfg, out, quiet: cli.quiet, hash, stdout: Vec::new() };
    let code = match cli.command {
        Command::Check => cmd_check(&mut ctx)?,
        Command::Spectrum => cmd_spectrum(&mut ctx)?,
        Command::Eigenfunction => cmd_eigenfunction(&mut ctx)?,
        Command::Accumulation => cmd_accumulation(&mut ctx)?,
        Command::Branch => cmd_branch(&mut ctx)?,
    };
    Ok((code, ctx.stdout))
}

fn io(e: anyhow::Error) -> Failure {
    Failure::Config(format!("{e:#}"))
}

fn cmd_check(ctx: &mut Context) -> Result<i32, Failure> {
    let family = ctx.cfg.family()?;
    let cls = classify_zero_endpoint(&family);
    let report = validate_hypotheses(&family, &SampleGrid::default())?;
    let mut rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| vec![c.name.to_string(), c.passed.to_string(), num(c.measured), c.detail.clone()])
        .collect();
    rows.push(vec![
        "admissible at zero".into(),
        cls.admissible.to_string(),
        num(cls.det_p_star),
        cls.statement.clone(),
    ]);
    let coupling_ok = match ctx.cfg.coupling() {
        None => true,
        Some(Ok(_)) => {
            rows.push(vec!["coupling".into(), "true".into(), num(0.0), "envelope bounded and decaying".into()]);
            true
        }
        Some(Err(e)) => {
            rows.push(vec!["coupling".into(), "false".into(), num(f64::NAN), e.to_string()]);
            false
        }
    };
    let passed = report.all_passed() && cls.admissible && coupling_ok;
    let h = ctx.header(Command::Check).line(format!("verdict: {}", if passed { "pass" } else { "fail" }));
    ctx.out.write_table("check.csv", &h, &["check", "passed", "measured", "detail"], rows.clone()).map_err(io)?;
    for r in &rows {
        ctx.say(format!("{:<44} {:<5} {}", r[0], if r[1] == "true" { "ok" } else { "FAIL" }, r[3]));
    }
    ctx.say(format!("beta = {}, det P* = {}, Delta* = {}", cls.beta, cls.det_p_star, cls.delta_star));
    Ok(if passed { 0 } else { 2 })
}

fn admissible_family(ctx: &Context) -> Result<(CoefficientFamily<f64>, TruncationWindow<f64>), Failure> {
    let family = ctx.cfg.family()?;
    zero_data(&family)?;
    let window = ctx.cfg.window(&family)?;
    Ok((family, window))
}

fn cmd_spectrum(ctx: &mut Context) -> Result<i32, Failure> {
    let (family, window) = admissible_family(ctx)?;
    let opts = ctx.cfg.solve_options();
    let (scan, records) = compute_spectrum(&family, &ctx.cfg.lambda_grid(), &window, &opts)?;
    let h = ctx.window_header(ctx.header(Command::Spectrum), &window).line(format!(
        "monotone: {} (max drop {})",
        scan.is_monotone(),
        num(scan.max_drop)
    ));
    let rows = records.iter().map(|r| {
        let d = r.decay_fit.expect("decay fit is filled by find_eigenvalue");
        vec![
            r.k.to_string(),
            num(r.lambda),
            num(r.rot),
            r.nodal_index.to_string(),
            num(r.residual),
            num(d.exponent_at_inf),
            num(d.exponent_at_zero),
        ]
    });
    ctx.out
        .write_table("spectrum.csv", &h, &["k", "lambda", "rot", "nodal_index", "residual", "decay_inf", "decay_zero"], rows)
        .map_err(io)?;
    ctx.say(format!("{} eigenvalue(s) in [{}, {}]", records.len(), ctx.cfg.numerics.lambda_min, ctx.cfg.numerics.lambda_max));
    for r in &records {
        ctx.say(format!("k = {:>3}  lambda = {:.10}  rot = {:.6}  nodal = {}", r.k, r.lambda, r.rot, r.nodal_index));
    }
    Ok(0)
}

fn seed_record(ctx: &Context, family: &CoefficientFamily<f64>, window: &TruncationWindow<f64>) -> Result<EigenvalueRecord<f64>, Failure> {
    let opts = ctx.cfg.solve_options();
    let scan = scan_spectrum(family, &ctx.cfg.lambda_grid(), window, &opts)?;
    let bracket = match ctx.cfg.task.level {
        Some(k) => scan.brackets.iter().find(|b| b.k == k),
        None => scan.brackets.first(),
    };
    let Some(b) = bracket else {
        let which = ctx.cfg.task.level.map_or("any level".to_string(), |k| format!("level {k}"));
        return Err(Failure::Math(format!("no eigenvalue found for {which} on the lambda grid")));
    };
    Ok(find_eigenvalue(family, b.k, (b.lo, b.hi), window, &opts)?)
}

fn cmd_eigenfunction(ctx: &mut Context) -> Result<i32, Failure> {
    let (family, window) = admissible_family(ctx)?;
    let rec = seed_record(ctx, &family, &window)?;
    let ef = eigenfunction(&family, &rec, ctx.cfg.task.samples, &ctx.cfg.solve_options())?;
    let d = ef.decay;
    let h = ctx
        .window_header(ctx.header(Command::Eigenfunction), &window)
        .line(format!("k={} lambda={} rot={} nodal_index={}", rec.k, num(rec.lambda), num(rec.rot), rec.nodal_index))
        .line(format!("decay_inf={} expected={}", num(d.exponent_at_inf), num(d.expected_at_inf)))
        .line(format!("decay_zero={} expected={}", num(d.exponent_at_zero), num(d.expected_at_zero)))
        .line(format!("norm_check={}", num(ef.norm_check)));
    let rows = ef.samples.iter().map(|s| vec![num(s.x), num(s.u), num(s.v), num(s.theta), num(s.logrho)]);
    ctx.out.write_table("eigenfunction.csv", &h, &["x", "u", "v", "theta", "logrho"], rows).map_err(io)?;
    ctx.say(format!("k = {}  lambda = {:.10}", rec.k, rec.lambda));
    ctx.say(format!(
        "decay at infinity {:.6} (expected {:.6}), at zero {:.6} (expected {:.6})",
        d.exponent_at_inf, d.expected_at_inf, d.exponent_at_zero, d.expected_at_zero
    ));
    ctx.say(format!("norm check {:.9}", ef.norm_check));
    Ok(0)
}

fn cmd_accumulation(ctx: &mut Context) -> Result<i32, Failure> {
    let (family, window) = admissible_family(ctx)?;
    let endpoint = match ctx.cfg.task.endpoint {
        EndpointConfig::Lower => Endpoint::Lower,
        EndpointConfig::Upper => Endpoint::Upper,
    };
    let v = detect_accumulation(&family, endpoint, &ctx.cfg.task.schedule, window.x0, window.epsilon, &ctx.cfg.ode_options())?;
    let h = ctx
        .window_header(ctx.header(Command::Accumulation), &window)
        .line(format!("endpoint: {}", endpoint.as_str()))
        .line(format!("verdict: {}", v.verdict.as_str()))
        .line(format!("monotonicity_check: {}", v.monotonicity_check));
    let rows = v.theta_growth.iter().map(|&(x, t)| vec![num(x), num(t)]);
    ctx.out.write_table("accumulation.csv", &h, &["X", "theta"], rows).map_err(io)?;
    ctx.say(format!("{} edge: {}", endpoint.as_str(), v.verdict.as_str()));
    for &(x, t) in &v.theta_growth {
        ctx.say(format!("  X = {x:>10.3e}  theta = {t:.6}"));
    }
    Ok(0)
}

fn cmd_branch(ctx: &mut Context) -> Result<i32, Failure> {
    let coupling = match ctx.cfg.coupling() {
        None => return Err(Failure::Config("branch needs a [coupling] section".into())),
        Some(c) => c?,
    };
    let (family, window) = admissible_family(ctx)?;
    let seed = seed_record(ctx, &family, &window)?;
    let t = &ctx.cfg.task;
    let opts = ContinuationOptions {
        ds: t.ds,
        max_steps: t.max_steps,
        a_max: t.a_max.unwrap_or(f64::INFINITY),
        corrector: CorrectorOptions { n_samples: t.samples, ..CorrectorOptions::default() },
        ..ContinuationOptions::default()
    };
    let branch = continue_branch(&family, &coupling, &seed, &ctx.cfg.ode_options(), &opts)?;
    let extrap = branch.extrapolate_to_zero();
    let h = ctx
        .window_header(ctx.header(Command::Branch), &window)
        .line(format!("seed: k={} lambda={} nodal_index={}", seed.k, num(seed.lambda), seed.nodal_index))
        .line(format!("termination: {}", branch.termination.as_str()))
        .line(format!("index_constant: {}", branch.index_constant()))
        .line(format!("lambda_at_zero: {}", extrap.map_or("n/a".to_string(), num)));
    let rows = branch.points.iter().enumerate().map(|(n, p)| {
        vec![(n + 1).to_string(), num(p.lambda), num(p.amplitude), num(p.l2_norm), num(p.j), p.i.to_string(), num(p.bvp_residual)]
    });
    ctx.out
        .write_table("branch.csv", &h, &["step", "lambda", "amplitude", "l2norm", "j", "i", "residual"], rows)
        .map_err(io)?;
    let steps = t.sample_steps.clone().unwrap_or_else(|| {
        let n = branch.points.len();
        if n > 1 {
            vec![1, n]
        } else {
            vec![1]
        }
    });
    for s in steps {
        let Some(p) = s.checked_sub(1).and_then(|i| branch.points.get(i)) else { continue };
        let h = ctx.header(Command::Branch).line(format!("step={s} lambda={} amplitude={}", num(p.lambda), num(p.amplitude)));
        let rows = p.samples.iter().map(|&(x, u, v)| vec![num(x), num(u), num(v)]);
        ctx.out.write_table(&format!("branch_step_{s:03}.csv"), &h, &["x", "u", "v"], rows).map_err(io)?;
    }
    ctx.say(format!(
        "{} point(s), termination {}, index {}",
        branch.points.len(),
        branch.termination.as_str(),
        if branch.index_constant() { "constant" } else { "VIOLATED" }
    ));
    if let Some(l) = extrap {
        ctx.say(format!("lambda(a -> 0) = {l:.10} (seed {:.10})", seed.lambda));
    }
    Ok(if branch.index_constant() { 0 } else { 2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn failure_codes() {
        assert_eq!(Failure::from(Error::ZeroK).code(), 1);
        assert_eq!(Failure::from(Error::Inadmissible("x".into())).code(), 2);
        assert_eq!(Failure::from(anyhow::anyhow!("io")).code(), 1);
        assert_eq!(Failure::from(anyhow::Error::from(Error::Overflow { x: 1.0 })).code(), 2);
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["radial-dirac", "nonsense"]), 1);
        assert_eq!(run(["radial-dirac", "check"]), 1);
    }
}
