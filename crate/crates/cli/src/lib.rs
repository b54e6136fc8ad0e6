//! Command-line front end: `solve`, `verify`, `gen` and `sweep`.
//!
//! Exit codes: `0` certified (or verified), `1` finished without a perfect
//! certificate (or outside the verification tolerance), `2` any error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ratiodual::io::{
    generate, landscape_csv, parse_instance, serialize_instance, sweep_csv, to_canonical_json,
    GenOptions, LandscapeSpec, ResultFile,
};
use ratiodual::oracle::{grid_minimize_p0, OracleError, MAX_ORACLE_DIM};
use ratiodual::solver::{solve, CertificateKind, SolveResult, SolverOptions};
use ratiodual::FractionalProgram;

pub const EXIT_OK: i32 = 0;
pub const EXIT_UNCERTIFIED: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "ratiodual",
    version,
    about = "Certified global minimization of quartic-over-elliptic fractional programs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an instance and write a result file.
    Solve {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        /// Result file; standard output when omitted.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Solve and compare against the brute-force oracle (n <= 3).
    Verify {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        /// Oracle grid spacing; defaults to 1e-5 for n = 1, 1e-3 for n = 2
        /// and 1e-2 for n = 3.
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Write a random valid instance.
    Gen {
        #[arg(long, default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scale of the random factor in H = -(c² AᵀA + I).
        #[arg(long, default_value_t = 1.0)]
        conditioning: f64,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Dump the mu profile, or a dual landscape at one mu, as CSV.
    Sweep {
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
        /// Sample the dual on a (varsigma, sigma) grid at this mu instead.
        #[arg(long)]
        at_mu: Option<f64>,
        /// Landscape size as `<varsigma steps>x<sigma steps>`.
        #[arg(long, default_value = "20x20")]
        landscape: String,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    /// Number of uniform mu grid points.
    #[arg(long, default_value_t = 64)]
    pub grid: usize,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol_gap: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol_grad: f64,
    #[arg(long, default_value_t = 3)]
    pub refine_rounds: usize,
    /// Seed of the oracle multistart jitter.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl Default for SolverFlags {
    fn default() -> Self {
        let o = SolverOptions::default();
        Self {
            grid: o.grid_points,
            max_iter: o.max_iter,
            tol_gap: o.tol_gap,
            tol_grad: o.tol_grad,
            refine_rounds: o.refine_rounds,
            seed: 0,
        }
    }
}

impl SolverFlags {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            grid_points: self.grid,
            max_iter: self.max_iter,
            tol_gap: self.tol_gap,
            tol_grad: self.tol_grad,
            refine_rounds: self.refine_rounds,
            ..SolverOptions::default()
        }
    }
}

/// Runs a parsed command, writing reports to `out` and diagnostics to `err`.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = match cli.command {
        Command::Solve {
            instance,
            solver,
            output,
        } => cmd_solve(&instance, &solver, output.as_deref(), out),
        Command::Verify {
            instance,
            solver,
            resolution,
        } => cmd_verify(&instance, &solver, resolution, out),
        Command::Gen {
            n,
            m,
            seed,
            conditioning,
            output,
        } => cmd_gen(
            &GenOptions {
                n,
                m,
                seed,
                conditioning,
            },
            output.as_deref(),
            out,
        ),
        Command::Sweep {
            instance,
            solver,
            at_mu,
            landscape,
            output,
        } => cmd_sweep(
            &instance,
            &solver,
            at_mu,
            &landscape,
            output.as_deref(),
            out,
        ),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn load(path: &Path) -> Result<FractionalProgram> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_instance(&text).with_context(|| format!("loading {}", path.display()))
}

fn emit(text: &str, output: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => out
            .write_all(text.as_bytes())
            .context("writing to standard output"),
    }
}

fn exit_for(kind: CertificateKind) -> i32 {
    match kind {
        CertificateKind::Perfect => EXIT_OK,
        CertificateKind::WeakOnly | CertificateKind::None => EXIT_UNCERTIFIED,
    }
}

fn timed_solve(p: &FractionalProgram, opts: &SolverOptions) -> Result<(SolveResult, f64)> {
    let start = Instant::now();
    let r = solve(p, opts)?;
    Ok((r, start.elapsed().as_secs_f64()))
}

pub fn cmd_solve(
    instance: &Path,
    flags: &SolverFlags,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32> {
    let p = load(instance)?;
    let opts = flags.options();
    let (r, seconds) = timed_solve(&p, &opts)?;
    let file = ResultFile::from_solve(&r, &opts, seconds);
    emit(&file.to_text()?, output, out)?;
    Ok(exit_for(r.certificate.kind))
}

/// Solver-versus-oracle comparison printed by `verify`.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub solver_value: f64,
    pub oracle_value: f64,
    pub discrepancy: f64,
    pub tolerance: f64,
    pub argmin_distance: f64,
    pub certificate_kind: CertificateKind,
    pub oracle_resolution: f64,
    pub within_tolerance: bool,
}

pub fn default_resolution(n: usize) -> f64 {
    match n {
        1 => 1e-5,
        2 => 1e-3,
        _ => 1e-2,
    }
}

/// Agreement threshold `max(1e-4, 1e-3 |oracle|)`.
pub fn verify_tolerance(oracle_value: f64) -> f64 {
    (1e-3 * oracle_value.abs()).max(1e-4)
}

pub fn verify_program(
    p: &FractionalProgram,
    flags: &SolverFlags,
    resolution: Option<f64>,
) -> Result<VerifyReport> {
    if p.dim() > MAX_ORACLE_DIM {
        bail!(OracleError::DimensionTooLarge(p.dim()));
    }
    let (r, _) = timed_solve(p, &flags.options())?;
    let resolution = resolution.unwrap_or_else(|| default_resolution(p.dim()));
    let o = grid_minimize_p0(p, resolution, flags.seed)?;
    let discrepancy = (r.p0_value - o.min_value).abs();
    let tolerance = verify_tolerance(o.min_value);
    let argmin_distance = r
        .x_star
        .as_slice()
        .iter()
        .zip(&o.argmin)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(VerifyReport {
        solver_value: r.p0_value,
        oracle_value: o.min_value,
        discrepancy,
        tolerance,
        argmin_distance,
        certificate_kind: r.certificate.kind,
        oracle_resolution: resolution,
        within_tolerance: discrepancy <= tolerance,
    })
}

pub fn cmd_verify(
    instance: &Path,
    flags: &SolverFlags,
    resolution: Option<f64>,
    out: &mut dyn Write,
) -> Result<i32> {
    let p = load(instance)?;
    let report = verify_program(&p, flags, resolution)?;
    out.write_all(to_canonical_json(&report)?.as_bytes())?;
    Ok(if report.within_tolerance {
        EXIT_OK
    } else {
        EXIT_UNCERTIFIED
    })
}

pub fn cmd_gen(opts: &GenOptions, output: Option<&Path>, out: &mut dyn Write) -> Result<i32> {
    let data = generate(opts)?;
    emit(&serialize_instance(&data)?, output, out)?;
    Ok(EXIT_OK)
}

fn parse_landscape(spec: &str) -> Result<(usize, usize)> {
    let (a, b) = spec
        .split_once(['x', 'X'])
        .with_context(|| format!("landscape size `{spec}` is not of the form AxB"))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

pub fn cmd_sweep(
    instance: &Path,
    flags: &SolverFlags,
    at_mu: Option<f64>,
    landscape: &str,
    output: Option<&Path>,
    out: &mut dyn Write,
) -> Result<i32> {
    let p = load(instance)?;
    let text = match at_mu {
        Some(mu) => {
            p.check_mu(mu)?;
            let steps = parse_landscape(landscape)?;
            landscape_csv(&p, &LandscapeSpec::around_optimum(&p, mu, steps))
        }
        None => sweep_csv(&p, flags.grid, &flags.options()),
    };
    emit(&text, output, out)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landscape_sizes() {
        assert_eq!(parse_landscape("20x20").unwrap(), (20, 20));
        assert_eq!(parse_landscape("3X7").unwrap(), (3, 7));
        assert!(parse_landscape("20").is_err());
    }

    #[test]
    fn tolerance_floor() {
        assert_eq!(verify_tolerance(0.01), 1e-4);
        assert_eq!(verify_tolerance(-2.0), 2e-3);
    }

    #[test]
    fn cli_parses() {
        let cli = Cli::try_parse_from([
            "ratiodual",
            "solve",
            "a.json",
            "--grid",
            "8",
            "--tol-gap",
            "1e-7",
            "-o",
            "r.json",
        ])
        .unwrap();
        match cli.command {
            Command::Solve { solver, output, .. } => {
                assert_eq!(solver.grid, 8);
                assert_eq!(solver.options().tol_gap, 1e-7);
                assert_eq!(output.unwrap(), PathBuf::from("r.json"));
            }
            other => panic!("{other:?}"),
        }
    }
}
