//! Scenario runners and their CSV output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use pcs_core::capacity::{avg_secrecy_capacity_mc, secrecy_capacity};
use pcs_core::constellation::Distribution;
use pcs_core::error_rate::{ber_approx, ber_upper_bound};
use pcs_core::montecarlo::{sample_eve_positions, simulate_error_rates, EvePositionMode, SimConfig};
use pcs_core::solver::{solve, solve_all_starts, SolveError, SolveResult, Variant};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Scenario, Scene};
use crate::validate::{self, Check};
use crate::CliError;

/// Entries below this count as inactive symbols.
pub const INACTIVE_THRESHOLD: f64 = 1e-6;

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

fn mc_ber(cfg: &ExperimentConfig, s: &Scene, link: pcs_core::channel::LinkBudget<f64>, p: &[f64], salt: u64) -> Result<f64, CliError> {
    let stats = simulate_error_rates(&SimConfig {
        n_symbols: cfg.monte_carlo.n_symbols,
        seed: cfg.monte_carlo.seed ^ salt.rotate_left(32),
        link,
        constellation: s.constellation.clone(),
        distribution: Distribution::new(p.to_vec()).map_err(numeric)?,
    })
    .map_err(numeric)?;
    Ok(stats.ber.estimate)
}

fn salt(power_dbm: f64, tag: u64) -> u64 {
    power_dbm.to_bits() ^ tag
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub power_dbm: f64,
    pub scheme: &'static str,
    pub secrecy_bits: f64,
    pub ber_analytic: f64,
    pub ber_montecarlo: f64,
    pub feasible: bool,
    /// Empty when no design was found.
    pub distribution: Vec<f64>,
}

fn sweep_point(cfg: &ExperimentConfig, power: f64) -> Result<[SweepRow; 2], CliError> {
    let s = cfg.scene(power)?;
    let c = &s.constellation;
    let thr = cfg.constraints.pre_fec_threshold;
    let uniform = vec![1.0 / cfg.order as f64; cfg.order];
    let ber_u = ber_upper_bound(c, &uniform, &s.bob).map_err(numeric)?;
    let uni = SweepRow {
        power_dbm: power,
        scheme: "uniform",
        secrecy_bits: secrecy_capacity(&uniform, &s.bob, &s.eve, c).map_err(numeric)?,
        ber_analytic: ber_u,
        ber_montecarlo: mc_ber(cfg, &s, s.bob, &uniform, salt(power, 1))?,
        feasible: ber_u <= thr,
        distribution: uniform,
    };
    let prob = cfg.problem(Variant::KnownCsi, power)?;
    let pcs = match usable(solve(&prob, &cfg.solver))? {
        Some(r) => {
            let p = r.p_opt.probs().to_vec();
            SweepRow {
                power_dbm: power,
                scheme: "pcs",
                secrecy_bits: r.objective,
                ber_analytic: r.feasibility.ber_upper,
                ber_montecarlo: mc_ber(cfg, &s, s.bob, &p, salt(power, 2))?,
                feasible: r.feasibility.is_feasible(1e-9),
                distribution: p,
            }
        }
        None => SweepRow {
            power_dbm: power,
            scheme: "pcs",
            secrecy_bits: f64::NAN,
            ber_analytic: f64::NAN,
            ber_montecarlo: f64::NAN,
            feasible: false,
            distribution: Vec::new(),
        },
    };
    Ok([uni, pcs])
}

/// The best start's result, also when it ran out of iterations; `None` when
/// no start reached the reliability constraint.
fn usable(outcome: Result<SolveResult<f64>, SolveError<f64>>) -> Result<Option<SolveResult<f64>>, CliError> {
    match outcome {
        Ok(r) => Ok(Some(r)),
        Err(SolveError::MaxIters(r)) => Ok(Some(*r)),
        Err(SolveError::Infeasible(_)) => Ok(None),
        Err(SolveError::Numeric(e)) => Err(numeric(e)),
    }
}

/// Uniform and shaped signaling with known eavesdropper CSI at every power.
pub fn sweep_power(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    let points = cfg
        .power_dbm
        .par_iter()
        .map(|&p| sweep_point(cfg, p))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(points.into_iter().flatten().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignRow {
    pub power_dbm: f64,
    pub variant: Variant,
    pub found: bool,
    pub converged: bool,
    pub objective: f64,
    /// Exact `C_B - C_E` for a known eavesdropper; the average over sampled
    /// eavesdropper positions otherwise.
    pub secrecy_bits: f64,
    pub bob_ber_analytic: f64,
    pub bob_ber_montecarlo: f64,
    pub eve_ber_approx: f64,
    pub eve_ber_montecarlo: f64,
    pub mean_amplitude: f64,
    pub feasible: bool,
    pub iterations: usize,
    pub start_index: usize,
    pub inactive: usize,
    pub distribution: Vec<f64>,
}

pub fn design(cfg: &ExperimentConfig, variant: Variant, power: f64) -> Result<DesignRow, CliError> {
    let s = cfg.scene(power)?;
    let prob = cfg.problem(variant, power)?;
    let Some(r) = usable(solve(&prob, &cfg.solver))? else {
        return Ok(DesignRow {
            power_dbm: power,
            variant,
            found: false,
            converged: false,
            objective: f64::NAN,
            secrecy_bits: f64::NAN,
            bob_ber_analytic: f64::NAN,
            bob_ber_montecarlo: f64::NAN,
            eve_ber_approx: f64::NAN,
            eve_ber_montecarlo: f64::NAN,
            mean_amplitude: f64::NAN,
            feasible: false,
            iterations: 0,
            start_index: 0,
            inactive: 0,
            distribution: Vec::new(),
        });
    };
    let c = &s.constellation;
    let p = r.p_opt.probs().to_vec();
    let eve = prob.eve.link();
    let secrecy_bits = match variant {
        Variant::KnownCsi | Variant::QosMaxEveBer => secrecy_capacity(&p, &s.bob, &eve, c).map_err(numeric)?,
        Variant::UnknownCsi | Variant::UnknownCsiSymmetric => {
            let eves = sample_eve_positions(
                cfg.monte_carlo.eve_samples,
                EvePositionMode::RadialUniform,
                &s.led,
                &s.pd,
                &s.noise,
                cfg.monte_carlo.seed,
            )
            .map_err(numeric)?;
            avg_secrecy_capacity_mc(&p, &s.bob, &eves, c).map_err(numeric)?.mean
        }
    };
    Ok(DesignRow {
        power_dbm: power,
        variant,
        found: true,
        converged: r.converged,
        objective: r.objective,
        secrecy_bits,
        bob_ber_analytic: r.feasibility.ber_upper,
        bob_ber_montecarlo: mc_ber(cfg, &s, s.bob, &p, salt(power, 3))?,
        eve_ber_approx: ber_approx(c, &p, &eve).map_err(numeric)?,
        eve_ber_montecarlo: mc_ber(cfg, &s, eve, &p, salt(power, 4))?,
        mean_amplitude: c.mean_amplitude(&p),
        feasible: r.feasibility.is_feasible(1e-9),
        iterations: r.iterations,
        start_index: r.start_index,
        inactive: r.p_opt.inactive_count(INACTIVE_THRESHOLD),
        distribution: p,
    })
}

pub fn design_sweep(cfg: &ExperimentConfig, variants: &[Variant]) -> Result<Vec<DesignRow>, CliError> {
    let jobs: Vec<(f64, Variant)> = cfg
        .power_dbm
        .iter()
        .flat_map(|&p| variants.iter().map(move |&v| (p, v)))
        .collect();
    jobs.par_iter().map(|&(p, v)| design(cfg, v, p)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StartTrace {
    pub start: usize,
    pub feasible: bool,
    pub converged: bool,
    pub iterations: usize,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub power_dbm: f64,
    pub starts: Vec<StartTrace>,
    /// Mean outer iterations over the starts that reached the constraint.
    pub mean_iterations: f64,
    pub monotone: bool,
}

/// Per-start CCCP traces for the known-CSI design at the first power.
pub fn convergence_trace(cfg: &ExperimentConfig) -> Result<ConvergenceReport, CliError> {
    let power = cfg.power_dbm[0];
    let prob = cfg.problem(Variant::KnownCsi, power)?;
    cfg.solver.validate().map_err(|e| CliError::Config(e.to_string()))?;
    let mut starts = Vec::with_capacity(cfg.solver.n_starts);
    for (i, outcome) in solve_all_starts(&prob, &cfg.solver).into_iter().enumerate() {
        let r = match outcome {
            Ok(r) => r,
            Err(SolveError::MaxIters(r)) => *r,
            Err(SolveError::Infeasible(_)) => {
                starts.push(StartTrace {
                    start: i,
                    feasible: false,
                    converged: false,
                    iterations: 0,
                    trace: Vec::new(),
                });
                continue;
            }
            Err(SolveError::Numeric(e)) => return Err(numeric(e)),
        };
        starts.push(StartTrace {
            start: i,
            feasible: true,
            converged: r.converged,
            iterations: r.iterations,
            trace: r.objective_trace,
        });
    }
    let ran: Vec<&StartTrace> = starts.iter().filter(|s| s.feasible).collect();
    let mean_iterations = ran.iter().map(|s| s.iterations as f64).sum::<f64>() / ran.len().max(1) as f64;
    let monotone = ran
        .iter()
        .all(|s| s.trace.windows(2).all(|w| w[1] >= w[0] - 1e-10 * (1.0 + w[0].abs())));
    Ok(ConvergenceReport {
        power_dbm: power,
        starts,
        mean_iterations,
        monotone,
    })
}

fn list(v: &[f64]) -> String {
    serde_json::to_string(v).expect("finite list")
}

/// Writes `rows` under `header`, preceded by the resolved configuration as
/// `# ` comment lines.
pub fn write_csv(path: &Path, cfg: &ExperimentConfig, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    for line in cfg.to_json().lines() {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(std::io::Error::from)?;
    for r in rows {
        w.write_record(r).map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

fn variant_name(v: Variant) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|x| x.as_str().map(str::to_owned))
        .unwrap_or_default()
}

fn design_csv(path: &Path, cfg: &ExperimentConfig, rows: &[DesignRow]) -> Result<(), CliError> {
    let header = [
        "power_dbm",
        "variant",
        "found",
        "converged",
        "objective",
        "secrecy_bits",
        "bob_ber_analytic",
        "bob_ber_montecarlo",
        "eve_ber_approx",
        "eve_ber_montecarlo",
        "mean_amplitude",
        "feasible",
        "iterations",
        "start_index",
        "inactive",
        "distribution",
    ];
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.power_dbm.to_string(),
                variant_name(r.variant),
                r.found.to_string(),
                r.converged.to_string(),
                r.objective.to_string(),
                r.secrecy_bits.to_string(),
                r.bob_ber_analytic.to_string(),
                r.bob_ber_montecarlo.to_string(),
                r.eve_ber_approx.to_string(),
                r.eve_ber_montecarlo.to_string(),
                r.mean_amplitude.to_string(),
                r.feasible.to_string(),
                r.iterations.to_string(),
                r.start_index.to_string(),
                r.inactive.to_string(),
                list(&r.distribution),
            ]
        })
        .collect();
    write_csv(path, cfg, &header, &body)
}

fn print_design(rows: &[DesignRow]) {
    println!(
        "{:>9}  {:<22} {:>10} {:>10} {:>11} {:>11} {:>5} {:>8}",
        "power_dbm", "variant", "objective", "secrecy", "bob_ber", "eve_ber_mc", "iters", "feasible"
    );
    for r in rows {
        println!(
            "{:>9.2}  {:<22} {:>10.5} {:>10.5} {:>11.3e} {:>11.3e} {:>5} {:>8}",
            r.power_dbm,
            variant_name(r.variant),
            r.objective,
            r.secrecy_bits,
            r.bob_ber_analytic,
            r.eve_ber_montecarlo,
            r.iterations,
            r.feasible
        );
    }
}

/// Runs the configured scenario, writing its CSV files into `cfg.output_dir`.
///
/// The files are written before an infeasible design or a failed validation
/// is reported as an error.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    cfg.validate()?;
    let dir = PathBuf::from(&cfg.output_dir);
    std::fs::create_dir_all(&dir)?;
    let mut written = Vec::new();
    match cfg.scenario {
        Scenario::SweepPower => {
            let rows = sweep_power(cfg)?;
            let header = ["power_dbm", "scheme", "secrecy_bits", "ber_analytic", "ber_montecarlo", "feasible"];
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.power_dbm.to_string(),
                        r.scheme.to_string(),
                        r.secrecy_bits.to_string(),
                        r.ber_analytic.to_string(),
                        r.ber_montecarlo.to_string(),
                        r.feasible.to_string(),
                    ]
                })
                .collect();
            let path = dir.join("sweep_power.csv");
            write_csv(&path, cfg, &header, &body)?;
            written.push(path);
            let dist: Vec<Vec<String>> = rows
                .iter()
                .map(|r| vec![r.power_dbm.to_string(), r.scheme.to_string(), list(&r.distribution)])
                .collect();
            let path = dir.join("sweep_power_distributions.csv");
            write_csv(&path, cfg, &["power_dbm", "scheme", "distribution"], &dist)?;
            written.push(path);
            println!(
                "{:>9}  {:<8} {:>10} {:>11} {:>11} {:>8}",
                "power_dbm", "scheme", "secrecy", "ber", "ber_mc", "feasible"
            );
            for r in &rows {
                println!(
                    "{:>9.2}  {:<8} {:>10.5} {:>11.3e} {:>11.3e} {:>8}",
                    r.power_dbm, r.scheme, r.secrecy_bits, r.ber_analytic, r.ber_montecarlo, r.feasible
                );
            }
            let missing: Vec<String> = rows
                .iter()
                .filter(|r| r.scheme == "pcs" && !r.feasible)
                .map(|r| r.power_dbm.to_string())
                .collect();
            if !missing.is_empty() {
                return Err(CliError::Infeasible(format!(
                    "no feasible shaped design at {} dBm",
                    missing.join(", ")
                )));
            }
        }
        Scenario::DesignKnown | Scenario::DesignUnknown | Scenario::DesignQos => {
            let (variants, name): (&[Variant], &str) = match cfg.scenario {
                Scenario::DesignKnown => (&[Variant::KnownCsi], "design_known.csv"),
                Scenario::DesignUnknown => (&[Variant::UnknownCsi, Variant::UnknownCsiSymmetric], "design_unknown.csv"),
                _ => (&[Variant::QosMaxEveBer], "design_qos.csv"),
            };
            let rows = design_sweep(cfg, variants)?;
            let path = dir.join(name);
            design_csv(&path, cfg, &rows)?;
            written.push(path);
            print_design(&rows);
            if let Some(r) = rows.iter().find(|r| !r.found) {
                return Err(CliError::Infeasible(format!(
                    "{} has no feasible design at {} dBm",
                    variant_name(r.variant),
                    r.power_dbm
                )));
            }
        }
        Scenario::ConvergenceTrace => {
            let report = convergence_trace(cfg)?;
            let mut trace = Vec::new();
            for s in &report.starts {
                for (k, v) in s.trace.iter().enumerate() {
                    trace.push(vec![s.start.to_string(), k.to_string(), v.to_string()]);
                }
            }
            let path = dir.join("convergence_trace.csv");
            write_csv(&path, cfg, &["start", "iteration", "objective"], &trace)?;
            written.push(path);
            let summary: Vec<Vec<String>> = report
                .starts
                .iter()
                .map(|s| {
                    vec![
                        s.start.to_string(),
                        s.feasible.to_string(),
                        s.converged.to_string(),
                        s.iterations.to_string(),
                        s.trace.last().copied().unwrap_or(f64::NAN).to_string(),
                    ]
                })
                .collect();
            let path = dir.join("convergence_summary.csv");
            write_csv(&path, cfg, &["start", "feasible", "converged", "iterations", "objective"], &summary)?;
            written.push(path);
            println!(
                "{} starts at {} dBm: mean iterations {:.2}, monotone traces {}",
                report.starts.len(),
                report.power_dbm,
                report.mean_iterations,
                report.monotone
            );
            if report.starts.iter().all(|s| !s.feasible) {
                return Err(CliError::Infeasible("no start reaches the BER threshold".into()));
            }
        }
        Scenario::ValidateBer => {
            let checks = validate::run_all(&cfg.validation);
            let path = dir.join("validate_ber.csv");
            write_checks(&path, cfg, &checks)?;
            written.push(path);
            report_checks(&checks)?;
        }
    }
    Ok(written)
}

pub fn write_checks(path: &Path, cfg: &ExperimentConfig, checks: &[Check]) -> Result<(), CliError> {
    let body: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.name.to_string(), c.passed.to_string(), c.detail.clone()])
        .collect();
    write_csv(path, cfg, &["check", "passed", "detail"], &body)
}

/// Prints one line per check; an error naming the failures if any failed.
pub fn report_checks(checks: &[Check]) -> Result<(), CliError> {
    for c in checks {
        println!("{:<16} {}  {}", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validation(format!("failed: {}", failed.join(", "))))
    }
}
