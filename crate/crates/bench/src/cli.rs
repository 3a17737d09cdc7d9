//! Command-line front end.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::metrics::{Aggregate, Metric};
use crate::output::emit_csv;
use crate::runner::{
    check_invariants, run_classification, run_precond_only, run_simulation, InvariantSweepResult,
};
use crate::timing::{time_compare, TimingReport};

/// Default output directory when `--out` is not given.
pub const OUT_DIR_ENV: &str = "FULLADAGRAD_OUT_DIR";

macro_rules! overrides {
    ($($(#[doc = $doc:literal])* $field:ident),* $(,)?) => {
        /// Settings shared by every subcommand. Each flag overrides the key of
        /// the same name in `--config`.
        #[derive(Debug, Clone, Default, clap::Args)]
        pub struct Overrides {
            /// Flat `key = value` config file.
            #[arg(long)]
            pub config: Option<PathBuf>,
            $($(#[doc = $doc])* #[arg(long)] pub $field: Option<String>,)*
        }

        impl Overrides {
            fn pairs(&self) -> Vec<(&'static str, &str)> {
                let mut v = Vec::new();
                $(if let Some(x) = &self.$field { v.push((stringify!($field), x.as_str())); })*
                v
            }
        }
    };
}

overrides! {
    /// Comma-separated list: sgd, adagrad_diag, waa, full_adagrad, wafa, swafa[:n|:sqrt|:d]
    optimizer,
    /// Base seed; replication r uses stream r
    seed,
    /// Output CSV path
    out,
    d,
    n_samples,
    replications,
    /// identity or toeplitz
    cov,
    rho,
    noise_std,
    theta0_scale,
    milestone_factor,
    /// SWAFA block size: integer, sqrt or d
    block_size,
    c_nu,
    nu,
    c_gamma,
    gamma,
    c_beta,
    beta,
    tau,
    tau_prime,
    a0_scale,
    /// current or averaged
    precond_mode,
    grad_reuse,
    eps,
    train,
    test,
    data,
    split,
    epochs,
    record_time,
    grid_dims,
    timing_runs,
}

#[derive(Debug, Parser)]
#[command(
    name = "fulladagrad",
    version,
    about = "Streaming full-matrix AdaGrad experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Linear regression on simulated Gaussian data
    Simulate(Overrides),
    /// Logistic regression on LIBSVM files
    Classify(Overrides),
    /// Preconditioner recursion alone, gradients taken at the true parameter
    PrecondOnly(Overrides),
    /// Check eigenvalue bounds after every step over a grid of dimensions
    CheckInvariants(Overrides),
    /// Median wall time of full runs per optimizer
    TimeCompare(Overrides),
}

impl Overrides {
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        for (k, v) in self.pairs() {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }
}

fn output_path(cfg: &ExperimentConfig, name: &str) -> Option<PathBuf> {
    cfg.out.clone().or_else(|| {
        std::env::var_os(OUT_DIR_ENV).map(|dir| Path::new(&dir).join(format!("{name}.csv")))
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into())
}

fn print_final(out: &mut impl Write, aggs: &[Aggregate], metrics: &[Metric]) -> io::Result<()> {
    write!(out, "{:<16} {:>10}", "optimizer", "samples")?;
    for m in metrics {
        write!(out, " {:>16}", m.name())?;
    }
    writeln!(out)?;
    for a in aggs {
        if let Some(r) = a.last() {
            write!(out, "{:<16} {:>10}", a.label, r.samples_seen)?;
            for &m in metrics {
                write!(out, " {:>16}", fmt_opt(r.mean(m)))?;
            }
            writeln!(out)?;
        }
    }
    Ok(())
}

fn write_aggregates(
    cfg: &ExperimentConfig,
    name: &str,
    aggs: &[Aggregate],
    out: &mut impl Write,
) -> Result<()> {
    if let Some(path) = output_path(cfg, name) {
        emit_csv(aggs, &path, cfg.record_time)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn write_invariants(path: &Path, res: &[InvariantSweepResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "optimizer",
        "d",
        "cov",
        "steps",
        "checks",
        "violations",
        "worst_lower_margin",
        "worst_upper_margin",
        "skipped",
    ])?;
    for r in res {
        w.write_record([
            r.label.clone(),
            r.d.to_string(),
            r.cov.to_string(),
            r.steps.to_string(),
            r.checks.to_string(),
            r.violations.to_string(),
            crate::output::format_float(r.worst_lower_margin),
            crate::output::format_float(r.worst_upper_margin),
            r.skipped.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn write_timings(path: &Path, res: &[TimingReport]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["optimizer", "median_ns", "runs_ns"])?;
    for r in res {
        let runs: Vec<String> = r.runs_ns.iter().map(|n| n.to_string()).collect();
        w.write_record([
            r.label.clone(),
            format!("{:.0}", r.median_ns),
            runs.join(" "),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Executes a parsed command, writing the summary to `out`.
pub fn execute(command: &Command, out: &mut impl Write) -> Result<()> {
    match command {
        Command::Simulate(o) => {
            let cfg = o.resolve()?;
            let aggs = run_simulation(&cfg)?;
            print_final(
                out,
                &aggs,
                &[Metric::MseTheta, Metric::MseThetaAvg, Metric::PrecondErr],
            )?;
            write_aggregates(&cfg, "simulate", &aggs, out)
        }
        Command::Classify(o) => {
            let cfg = o.resolve()?;
            let aggs = run_classification(&cfg)?;
            print_final(out, &aggs, &[Metric::TrainAcc, Metric::TestAcc])?;
            write_aggregates(&cfg, "classify", &aggs, out)
        }
        Command::PrecondOnly(o) => {
            let cfg = o.resolve()?;
            let agg = run_precond_only(&cfg)?;
            print_final(
                out,
                std::slice::from_ref(&agg),
                &[
                    Metric::PrecondErr,
                    Metric::PrecondErrCurrent,
                    Metric::Skipped,
                ],
            )?;
            write_aggregates(&cfg, "precond-only", std::slice::from_ref(&agg), out)
        }
        Command::CheckInvariants(o) => {
            let cfg = o.resolve()?;
            let res = check_invariants(&cfg)?;
            writeln!(
                out,
                "{:<12} {:>4} {:<16} {:>8} {:>10} {:>12} {:>12}",
                "optimizer", "d", "cov", "steps", "violations", "lower_margin", "upper_margin"
            )?;
            for r in &res {
                writeln!(
                    out,
                    "{:<12} {:>4} {:<16} {:>8} {:>10} {:>12.4e} {:>12.4e}",
                    r.label,
                    r.d,
                    r.cov.to_string(),
                    r.steps,
                    r.violations,
                    r.worst_lower_margin,
                    r.worst_upper_margin
                )?;
            }
            if let Some(path) = output_path(&cfg, "check-invariants") {
                write_invariants(&path, &res)?;
                writeln!(out, "wrote {}", path.display())?;
            }
            let failed = res.iter().filter(|r| !r.holds()).count();
            if failed > 0 {
                return Err(BenchError::InvariantFailure(failed));
            }
            Ok(())
        }
        Command::TimeCompare(o) => {
            let cfg = o.resolve()?;
            let res = time_compare(&cfg)?;
            let base = res.first().map(|r| r.median_ns).unwrap_or(1.0);
            for r in &res {
                writeln!(
                    out,
                    "{:<16} median {:>12.3} ms  ratio {:.3}",
                    r.label,
                    r.median_ns / 1e6,
                    r.median_ns / base
                )?;
            }
            if let Some(path) = output_path(&cfg, "time-compare") {
                write_timings(&path, &res)?;
                writeln!(out, "wrote {}", path.display())?;
            }
            Ok(())
        }
    }
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code: 0 on success, 2 on usage errors, 1 otherwise.
pub fn cli_main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let stdout = io::stdout();
    match execute(&cli.command, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e @ BenchError::Config(_)) => {
            eprintln!("error: {e}");
            eprintln!("run with --help for usage");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
