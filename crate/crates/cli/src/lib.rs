//! Command-line front end of `stratmoi`: argument parsing, subcommands and output files.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod files;

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use stratmoi::config::RunConfig;
use stratmoi::field::Grid2D;
use stratmoi::functionals::Functionals;
use stratmoi::kdv::compute_coefficients;
use stratmoi::modes::{genericity_integral, mode_residual, solve_fundamental_mode, Stencil};
use stratmoi::output::{
    branch_csv, json_document, mode_csv, parse_wave_csv, wave_csv, WaveSidecar,
};
use stratmoi::stratification::StratificationProfile;
use stratmoi::verify::{self, Suite};
use stratmoi::wavefields::WaveField;
use stratmoi::Error;

use files::{Outputs, RunMeta};

macro_rules! say {
    ($quiet:expr, $($arg:tt)*) => {
        if !$quiet {
            println!($($arg)*);
        }
    };
}

const SEED_ENV: &str = "STRATMOI_SEED";
const PROFILE_SAMPLES: usize = 1001;

#[derive(Parser, Debug)]
#[command(
    name = "stratmoi",
    version,
    about = "Internal solitary waves and the moment of instability"
)]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.directory`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Treat domain truncation warnings as errors.
    #[arg(long, global = true)]
    strict: bool,
    /// No summary on stdout; files, warnings and errors are unaffected.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the stratification invariants.
    ValidateProfile,
    /// Fundamental vertical mode.
    Modes,
    /// Weakly nonlinear coefficients and the instability constant K.
    Coeffs,
    /// Leading-order wave fields at one amplitude.
    Wave {
        #[arg(long)]
        eps: f64,
    },
    /// Functional values, either of a fresh wave or of a stored wave CSV.
    Functionals {
        #[arg(long, required_unless_present = "wave")]
        eps: Option<f64>,
        /// Wave CSV written by `wave`; its JSON sidecar must sit next to it.
        #[arg(long, conflicts_with = "eps")]
        wave: Option<PathBuf>,
    },
    /// Criticality residuals over the direction dictionary.
    Residuals,
    /// Speed branch with I(c), m(c) and m''(c).
    Branch,
    /// Jordan chain and Fredholm checks.
    ChainCheck,
    /// Full acceptance suite.
    Verify,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::ValidateProfile => "validate-profile",
            Command::Modes => "modes",
            Command::Coeffs => "coeffs",
            Command::Wave { .. } => "wave",
            Command::Functionals { .. } => "functionals",
            Command::Residuals => "residuals",
            Command::Branch => "branch",
            Command::ChainCheck => "chain-check",
            Command::Verify => "verify",
        }
    }
}

/// Failure classes mapped to exit statuses.
#[derive(Debug)]
enum Failure {
    /// Configuration or input problem: status 2.
    Usage(String),
    /// Numerical invariant violated: status 1.
    Invariant(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Invariant(_) => 1,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::Parameter { .. }
            | Error::Profile { .. }
            | Error::Step { .. } => Failure::Usage(e.to_string()),
            other => Failure::Invariant(other.to_string()),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// 1-based line of the first occurrence of `"key"` in the document.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let quoted = format!("\"{key}\"");
    text.lines()
        .position(|l| l.contains(&quoted))
        .map(|n| n + 1)
}

fn load_config(path: Option<&Path>) -> CliResult<(RunConfig, Vec<String>)> {
    let (mut config, text, label) = match path {
        Some(p) => {
            let label = p.display().to_string();
            let text =
                std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{label}: {e}")))?;
            let config =
                RunConfig::from_json(&text).map_err(|e| Failure::Usage(format!("{label}: {e}")))?;
            (config, text, label)
        }
        None => (
            RunConfig::default(),
            String::new(),
            "<default config>".to_string(),
        ),
    };
    if let Ok(seed) = std::env::var(SEED_ENV) {
        config.probes.seed = seed
            .trim()
            .parse()
            .map_err(|e| Failure::Usage(format!("{SEED_ENV}={seed}: {e}")))?;
    }
    let warnings = config.validate().map_err(|e| {
        let Error::Config(msg) = &e else {
            return Failure::Usage(e.to_string());
        };
        let field = msg.split(':').next().unwrap_or_default();
        let key = field.rsplit('.').next().unwrap_or(field);
        match key_line(&text, key) {
            Some(line) => Failure::Usage(format!("{label}: line {line}: {e}")),
            None => Failure::Usage(format!("{label}: {e}")),
        }
    })?;
    Ok((config, warnings))
}

fn run(cli: &Cli, args: Vec<String>, started: Instant) -> CliResult<()> {
    let (config, mut warnings) = load_config(cli.config.as_deref())?;
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(Failure::Usage("--jobs must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Usage(format!("--jobs: {e}")))?;
    }
    let dir = cli
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&config.output.directory));
    let mut out =
        Outputs::new(&dir, &config.output.formats).map_err(|e| Failure::Usage(e.to_string()))?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let c = &config;
    let result = match &cli.command {
        Command::ValidateProfile => {
            let report = c.profile.validate(PROFILE_SAMPLES)?;
            out.write(
                "profile.json",
                &json_document("validate-profile", c, &warnings, &report)?,
            )?;
            say!(
                cli.quiet,
                "profile {} valid: min density {:.6}, max slope {:.6}",
                c.profile.name(),
                report.min_density,
                report.max_slope
            );
            Ok(())
        }
        Command::Modes => {
            let mode = solve_fundamental_mode(&c.profile, c.grid.ny)?;
            let data = json!({
                "c0": mode.c0,
                "lambda": mode.lambda,
                "ny": mode.ny,
                "genericity_integral": genericity_integral(&mode, &c.profile),
                "residual_flux": mode_residual(&mode, &c.profile, Stencil::Flux),
                "residual_expanded": mode_residual(&mode, &c.profile, Stencil::Expanded),
            });
            out.write("modes.json", &json_document("modes", c, &warnings, &data)?)?;
            out.write("modes.csv", &mode_csv(&mode))?;
            say!(cli.quiet, "c0 = {:.10}", mode.c0);
            Ok(())
        }
        Command::Coeffs => {
            let mode = solve_fundamental_mode(&c.profile, c.grid.ny)?;
            let k = compute_coefficients(&mode, &c.profile, c.thresholds.genericity)?;
            let data = json!({
                "c0": mode.c0,
                "r": k.r,
                "s": k.s,
                "a": k.a,
                "k": k.k,
                "I1": k.i1,
                "I2": k.i2,
                "I3": k.i3,
                "K": k.instability,
                "genericity_integral": k.genericity,
                "nonlinearity_ratio": k.i3.abs() / k.i1,
            });
            out.write(
                "coeffs.json",
                &json_document("coeffs", c, &warnings, &data)?,
            )?;
            say!(cli.quiet, "c0 = {:.10}, K = {:.6}", mode.c0, k.instability);
            Ok(())
        }
        Command::Wave { eps } => {
            let wave = fresh_wave(c, *eps, cli.strict, &mut warnings)?;
            let sidecar = sidecar(&wave, &c.profile);
            out.write("wave.csv", &wave_csv(&wave))?;
            out.write("wave.json", &json_document("wave", c, &warnings, &sidecar)?)?;
            say!(
                cli.quiet,
                "wave eps = {eps}, c = {:.10}, L = {:.4}, {}x{}",
                wave.c,
                wave.grid.half_width,
                wave.grid.nx,
                wave.grid.ny
            );
            Ok(())
        }
        Command::Functionals { eps, wave } => {
            let (wave, profile) = match (eps, wave) {
                (_, Some(path)) => stored_wave(path)?,
                (Some(e), None) => (fresh_wave(c, *e, cli.strict, &mut warnings)?, c.profile),
                (None, None) => {
                    return Err(Failure::Usage("either --eps or --wave is required".into()))
                }
            };
            let f = Functionals::new(&profile, &wave.grid, c.casimir_form);
            let values = f.evaluate(&wave)?;
            let data = json!({
                "eps": wave.eps,
                "c": wave.c,
                "values": values,
                "i_kinetic": f.momentum_kinetic_form(&wave)?,
            });
            out.write(
                "functionals.json",
                &json_document("functionals", c, &warnings, &data)?,
            )?;
            say!(
                cli.quiet,
                "H = {:.10e}, I = {:.10e}, m = {:.10e}",
                values.h,
                values.i,
                values.m
            );
            Ok(())
        }
        Command::Residuals => {
            let builder = verify::builder_for(c, c.grid.ny, cli.strict)?;
            let study = verify::residual_study(c, &builder)?;
            out.write("residuals.csv", &verify::residuals_csv(&study))?;
            out.write(
                "residuals.json",
                &json_document("residuals", c, &warnings, &study)?,
            )?;
            for (d, (free, weighted)) in study
                .orders_sigma_free
                .iter()
                .zip(&study.orders_sigma_weighted)
                .enumerate()
            {
                say!(
                    cli.quiet,
                    "direction {d}: order {} (sigma-free), {} (sigma-weighted)",
                    order_text(*free),
                    order_text(*weighted)
                );
            }
            Ok(())
        }
        Command::Branch => {
            let builder = verify::builder_for(c, c.grid.ny, cli.strict)?;
            let table = verify::branch_table(c, &builder)?;
            for p in &table.points {
                if let Some(e) = &p.error {
                    warnings.push(format!("branch point eps = {}: {e}", p.eps));
                }
            }
            out.write("branch.csv", &branch_csv(&table))?;
            out.write(
                "branch.json",
                &json_document("branch", c, &warnings, &table)?,
            )?;
            if let Some(fit) = table.fits.momentum {
                say!(
                    cli.quiet,
                    "I fit: exponent {:.4}, prefactor {:.4} (K = {:.4})",
                    fit.exponent,
                    fit.prefactor,
                    table.k
                );
            }
            for w in warnings.iter().filter(|w| w.starts_with("branch point")) {
                eprintln!("warning: {w}");
            }
            Ok(())
        }
        Command::ChainCheck => {
            let builder = verify::builder_for(c, c.grid.ny, cli.strict)?;
            let reports = verify::chain_reports(c, &builder)?;
            out.write(
                "chain.json",
                &json_document("chain-check", c, &warnings, &reports)?,
            )?;
            let mut failed = Vec::new();
            for r in &reports {
                say!(
                    cli.quiet,
                    "eps = {}: fredholm {:.6}, gap {:.3e}, terminates {}",
                    r.eps,
                    r.fredholm_scalar,
                    r.fredholm.relative_gap,
                    r.chain_terminates
                );
                if !r.chain_terminates {
                    failed.push(format!("chain termination at eps = {}", r.eps));
                }
                if !(r.fredholm_scalar > 0.0) {
                    failed.push(format!("positive Fredholm scalar at eps = {}", r.eps));
                }
            }
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Invariant(format!(
                    "invariant failed: {}",
                    failed.join("; ")
                )))
            }
        }
        Command::Verify => {
            let suite = Suite::run(c, cli.strict)?;
            for (name, body) in suite.render(c, &warnings)? {
                out.write(&name, &body)?;
            }
            let report = verify::evaluate(c, &suite);
            out.write(
                "verify.json",
                &json_document("verify", c, &warnings, &report)?,
            )?;
            for r in &report.criteria {
                say!(cli.quiet, "{}", r.line());
            }
            if report.all_passed {
                Ok(())
            } else {
                let failing: Vec<String> = report
                    .criteria
                    .iter()
                    .filter(|r| !r.passed)
                    .map(|r| format!("[{}] {}", r.id, r.name))
                    .collect();
                Err(Failure::Invariant(format!(
                    "acceptance failed: {}",
                    failing.join(", ")
                )))
            }
        }
    };
    let meta = RunMeta {
        subcommand: cli.command.name(),
        args,
        seed: c.probes.seed,
        jobs: rayon::current_num_threads(),
        strict: cli.strict,
        status: result.as_ref().map_or_else(|f| f.code(), |_| 0),
        elapsed_seconds: started.elapsed().as_secs_f64(),
    };
    out.finish(&meta)
        .map_err(|e| Failure::Invariant(e.to_string()))?;
    result
}

fn order_text(o: Option<f64>) -> String {
    o.map_or("undefined".into(), |v| format!("{v:.3}"))
}

fn fresh_wave(
    c: &RunConfig,
    eps: f64,
    strict: bool,
    warnings: &mut Vec<String>,
) -> CliResult<WaveField> {
    let mut probe = c.clone();
    probe.sweep.eps_list = Some(vec![eps]);
    warnings.extend(
        probe
            .validate()?
            .into_iter()
            .filter(|w| !warnings.contains(w))
            .collect::<Vec<_>>(),
    );
    let builder = verify::builder_for(c, c.grid.ny, strict)?;
    let grid = builder.grid_for(eps, c.grid.nx)?;
    let wave = builder.build(eps, &grid)?;
    warnings.extend(wave.warnings.iter().cloned());
    Ok(wave)
}

fn sidecar<'a>(wave: &WaveField, profile: &'a StratificationProfile) -> WaveSidecar<'a> {
    WaveSidecar {
        c0: wave.c0,
        c: wave.c,
        eps: wave.eps,
        half_width: wave.grid.half_width,
        nx: wave.grid.nx,
        ny: wave.grid.ny,
        profile,
    }
}

/// Reads a wave CSV and its `.json` sidecar.
fn stored_wave(path: &Path) -> CliResult<(WaveField, StratificationProfile)> {
    let usage = |m: String| Failure::Usage(format!("{}: {m}", path.display()));
    let side_path = path.with_extension("json");
    let side_text = std::fs::read_to_string(&side_path)
        .map_err(|e| Failure::Usage(format!("{}: {e}", side_path.display())))?;
    let side: serde_json::Value = serde_json::from_str(&side_text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", side_path.display())))?;
    let data = &side["data"];
    let num = |k: &str| {
        data[k]
            .as_f64()
            .ok_or_else(|| Failure::Usage(format!("{}: missing `{k}`", side_path.display())))
    };
    let size = |k: &str| num(k).map(|v| v as usize);
    let profile: StratificationProfile = serde_json::from_value(data["profile"].clone())
        .map_err(|e| Failure::Usage(format!("{}: profile: {e}", side_path.display())))?;
    let grid = Grid2D::new(size("nx")?, size("ny")?, num("L")?)?;
    let text = std::fs::read_to_string(path).map_err(|e| usage(e.to_string()))?;
    let (rho, psi, sigma) = parse_wave_csv(&text, &grid)?;
    let wave = WaveField {
        grid,
        c0: num("c0")?,
        c: num("c")?,
        eps: num("eps")?,
        rho,
        psi,
        sigma,
        warnings: Vec::new(),
    };
    Ok((wave, profile))
}

/// Parses `args` (program name first), runs the subcommand and returns the exit status.
pub fn run_from<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let started = Instant::now();
    let args: Vec<std::ffi::OsString> = args.into_iter().map(Into::into).collect();
    let recorded = args
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(&cli, recorded, started) {
        Ok(()) => 0,
        Err(f) => {
            match &f {
                Failure::Usage(m) | Failure::Invariant(m) => eprintln!("error: {m}"),
            }
            f.code()
        }
    }
}
