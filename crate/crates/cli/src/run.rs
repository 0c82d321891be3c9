//! Execution of a configured sweep over wavenumbers.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use stratshear::evolution::{
    couette_energy_envelope, evolve, CouetteDynamics, Dynamics, EnergyReport, Integration, NearCouetteDynamics,
    RawState,
};
use stratshear::observables::{fit_envelope_power_law, series_norms, ObservableSeries, PowerLawFit};
use stratshear::weights::WeightSet;
use stratshear::{
    build_profile, sample_spectrum, Error, FrequencyGrid, NeumannStats, ProfileKind, ShearProfile, SolverSettings,
    SpectralOperators,
};

use crate::config::{AssertConfig, Mode, ProfileKindConfig, RunConfig};
use crate::CliError;

/// Relative per-step tolerance behind the `Es_monotone` verdict.
pub const ES_MONOTONE_TOL: f64 = 1e-6;

/// One row of the per-wavenumber time series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Row {
    pub t: f64,
    pub energy: f64,
    pub energy_lower: f64,
    pub energy_upper: f64,
    pub q_norm: f64,
    pub vx_norm: f64,
    pub vy_norm: f64,
    pub growth_norm: f64,
    pub es: f64,
}

pub const CSV_HEADER: &str = "t,E,E_lower,E_upper,q_norm,vx_norm,vy_norm,growth_norm,Es";

impl Row {
    pub fn to_csv(&self) -> String {
        [
            self.t,
            self.energy,
            self.energy_lower,
            self.energy_upper,
            self.q_norm,
            self.vx_norm,
            self.vy_norm,
            self.growth_norm,
            self.es,
        ]
        .iter()
        .map(|v| format!("{v:.16e}"))
        .collect::<Vec<_>>()
        .join(",")
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SolverDiagnostics {
    pub solves: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
    pub max_contraction: f64,
}

impl From<NeumannStats> for SolverDiagnostics {
    fn from(s: NeumannStats) -> Self {
        Self {
            solves: s.solves,
            max_iterations: s.max_iterations,
            max_residual: s.max_residual,
            max_contraction: s.max_contraction,
        }
    }
}

impl SolverDiagnostics {
    fn merge(&mut self, other: &Self) {
        self.solves += other.solves;
        self.max_iterations = self.max_iterations.max(other.max_iterations);
        self.max_residual = self.max_residual.max(other.max_residual);
        self.max_contraction = self.max_contraction.max(other.max_contraction);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitSummary {
    pub exponent: f64,
    pub r_squared: f64,
    pub samples: usize,
}

impl From<PowerLawFit> for FitSummary {
    fn from(f: PowerLawFit) -> Self {
        Self {
            exponent: f.exponent,
            r_squared: f.r_squared,
            samples: f.samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct KSummary {
    pub k: i64,
    pub csv: String,
    pub exponent_q: f64,
    pub exponent_vx: f64,
    pub exponent_vy: f64,
    pub exponent_growth: f64,
    pub fits: Fits,
    pub energy_ratio_max: f64,
    pub energy_ratio_min: f64,
    /// `Gamma` for Couette runs, absent otherwise.
    pub energy_envelope: Option<f64>,
    pub coercivity_holds: bool,
    pub Es_monotone: bool,
    pub Es_max_relative_increase: f64,
    pub solver: SolverDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Fits {
    pub q: FitSummary,
    pub vx: FitSummary,
    pub vy: FitSummary,
    pub growth: FitSummary,
}

/// Result of one wavenumber.
#[derive(Debug, Clone, PartialEq)]
pub struct KRun {
    pub rows: Vec<Row>,
    pub summary: KSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionCheck {
    pub name: String,
    pub k: i64,
    pub value: f64,
    pub expected: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssertionReport {
    pub enabled: bool,
    pub passed: bool,
    pub checks: Vec<AssertionCheck>,
}

/// The run-level summary. Top-level exponents are the largest over `k_list`,
/// the energy ratios are the extrema over `k_list` and `Es_monotone` holds
/// only if it holds for every wavenumber.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct Summary {
    pub config: RunConfig,
    pub fit_window: [f64; 2],
    pub exponent_q: f64,
    pub exponent_vx: f64,
    pub exponent_vy: f64,
    pub exponent_growth: f64,
    pub energy_ratio_max: f64,
    pub energy_ratio_min: f64,
    pub Es_monotone: bool,
    pub epsilon_measured: f64,
    pub epsilon_physical: f64,
    pub delta_used: f64,
    pub solver: SolverDiagnostics,
    pub runs: Vec<KSummary>,
    pub assertions: AssertionReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Artifacts {
    pub summary: Summary,
    /// Per-wavenumber rows, in `k_list` order.
    pub series: Vec<(i64, Vec<Row>)>,
}

fn setup_error(e: Error) -> CliError {
    CliError::Config(e.to_string())
}

fn run_error(k: i64, e: Error) -> CliError {
    match e {
        Error::InvalidParameter { .. } | Error::UnderResolved(_) | Error::InsufficientWindow { .. } => {
            CliError::Config(format!("k = {k}: {e}"))
        }
        _ => CliError::Solver(format!("k = {k}: {e}")),
    }
}

pub fn csv_name(prefix: &str, k: i64) -> String {
    format!("{prefix}_k{k}.csv")
}

pub fn summary_name(prefix: &str) -> String {
    format!("{prefix}_summary.json")
}

fn profile_of(config: &RunConfig) -> Result<ShearProfile, CliError> {
    let p = &config.profile;
    let kind = match p.kind {
        ProfileKindConfig::Couette => ProfileKind::Couette,
        ProfileKindConfig::Perturbed => ProfileKind::Perturbed,
    };
    build_profile(kind, p.amplitude, p.sigma, p.center).map_err(setup_error)
}

/// Snapshot times of a schedule, as produced by `evolve`.
fn snapshot_times(schedule: &Integration) -> Vec<f64> {
    let steps = schedule.steps();
    let mut times: Vec<f64> = (0..=steps)
        .step_by(schedule.record_every)
        .map(|n| n as f64 * schedule.dt)
        .collect();
    if !steps.is_multiple_of(schedule.record_every) {
        times.push(steps as f64 * schedule.dt);
    }
    times
}

/// Runs every wavenumber of `config`, in parallel on `jobs` workers
/// (all cores when `None`).
pub fn execute(config: &RunConfig, jobs: Option<usize>) -> Result<Artifacts, CliError> {
    config.validate()?;
    let profile = profile_of(config)?;
    let epsilon = if config.s == 0.0 {
        profile.epsilon()
    } else {
        profile.measure_epsilon(config.s)
    };
    let weights = if config.r > 0.25 {
        Some(WeightSet::new(config.beta, config.r, config.weights.c0, epsilon).map_err(setup_error)?)
    } else {
        None
    };
    let schedule = Integration {
        t_max: config.time.t_max,
        dt: config.time.dt,
        record_every: config.time.record_every,
    };
    let (t_lo, t_hi) = config.fit_window();
    let in_window = snapshot_times(&schedule)
        .iter()
        .filter(|&&t| t >= t_lo && t <= t_hi)
        .count();
    if in_window < stratshear::observables::MIN_FIT_SAMPLES {
        return Err(CliError::Config(format!(
            "`fit`: window [{t_lo}, {t_hi}] holds {in_window} snapshots, at least {} are needed",
            stratshear::observables::MIN_FIT_SAMPLES
        )));
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| CliError::Io(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<KRun, CliError>> = pool.install(|| {
        config
            .k_list
            .par_iter()
            .map(|&k| run_k(config, k, &profile, weights.as_ref(), schedule))
            .collect()
    });
    let runs = results.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut solver = SolverDiagnostics::default();
    for run in &runs {
        solver.merge(&run.summary.solver);
    }
    let fold_max = |f: fn(&KSummary) -> f64| runs.iter().map(|r| f(&r.summary)).fold(f64::NEG_INFINITY, f64::max);
    let fold_min = |f: fn(&KSummary) -> f64| runs.iter().map(|r| f(&r.summary)).fold(f64::INFINITY, f64::min);
    let assertions = check_assertions(&config.assertions, &runs);
    let summary = Summary {
        config: config.clone(),
        fit_window: [t_lo, t_hi],
        exponent_q: fold_max(|s| s.exponent_q),
        exponent_vx: fold_max(|s| s.exponent_vx),
        exponent_vy: fold_max(|s| s.exponent_vy),
        exponent_growth: fold_max(|s| s.exponent_growth),
        energy_ratio_max: fold_max(|s| s.energy_ratio_max),
        energy_ratio_min: fold_min(|s| s.energy_ratio_min),
        Es_monotone: runs.iter().all(|r| r.summary.Es_monotone),
        epsilon_measured: epsilon,
        epsilon_physical: profile.epsilon_physical(),
        delta_used: weights.as_ref().map_or(f64::NAN, |w| w.delta),
        solver,
        assertions,
        runs: runs.iter().map(|r| r.summary.clone()).collect(),
    };
    let series = config
        .k_list
        .iter()
        .copied()
        .zip(runs.into_iter().map(|r| r.rows))
        .collect();
    Ok(Artifacts { summary, series })
}

fn initial_state(config: &RunConfig, grid: &FrequencyGrid) -> RawState {
    let (th, q) = (config.init.theta(), config.init.q());
    RawState::new(
        0.0,
        grid.field_from(|e| Complex64::new(th.eval(e), 0.0)),
        grid.field_from(|e| Complex64::new(q.eval(e), 0.0)),
    )
}

fn run_k(
    config: &RunConfig,
    k: i64,
    profile: &ShearProfile,
    weights: Option<&WeightSet>,
    schedule: Integration,
) -> Result<KRun, CliError> {
    let grid = FrequencyGrid::new(k, config.grid.eta_max, config.grid.n).map_err(|e| run_error(k, e))?;
    let settings = SolverSettings {
        tol: config.solver.tol,
        max_iter: config.solver.max_iter,
    };
    let ops = if config.mode == Mode::Couette || profile.is_trivial() {
        SpectralOperators::couette(grid.clone(), config.beta)
    } else {
        let spec = sample_spectrum(profile, &grid).map_err(|e| run_error(k, e))?;
        SpectralOperators::new(grid.clone(), &spec, config.beta, settings)
    };
    let initial = initial_state(config, &grid);
    let mut stats = NeumannStats::default();
    let history = if ops.is_couette() {
        let mut dynamics = CouetteDynamics {
            k,
            etas: grid.etas().to_vec(),
            beta: config.beta,
            r: config.r,
        };
        evolve(initial, &mut dynamics as &mut dyn Dynamics, schedule)
    } else {
        let mut dynamics = NearCouetteDynamics::new(&ops, config.r);
        let out = evolve(initial, &mut dynamics, schedule);
        stats.merge(&dynamics.stats);
        out
    }
    .map_err(|e| run_error(k, e))?;

    let (series, obs_stats) = series_norms(&ops, &history).map_err(|e| run_error(k, e))?;
    stats.merge(&obs_stats);
    let energy = EnergyReport::from_history(&grid, &history, config.r, weights, config.s);
    let rows = rows_of(&series, &energy);

    let (t_lo, t_hi) = config.fit_window();
    let fit = |values: &[f64]| -> Result<FitSummary, CliError> {
        fit_envelope_power_law(&series.times, values, t_lo, t_hi)
            .map(FitSummary::from)
            .map_err(|e| run_error(k, e))
    };
    let fits = Fits {
        q: fit(&series.q_norm)?,
        vx: fit(&series.vx_norm)?,
        vy: fit(&series.vy_norm)?,
        growth: fit(&series.growth_norm)?,
    };
    let summary = KSummary {
        k,
        csv: csv_name(&config.output.prefix, k),
        exponent_q: fits.q.exponent,
        exponent_vx: fits.vx.exponent,
        exponent_vy: fits.vy.exponent,
        exponent_growth: fits.growth.exponent,
        fits,
        energy_ratio_max: energy.ratio_max,
        energy_ratio_min: energy.ratio_min,
        energy_envelope: (ops.is_couette() && config.r > 0.25).then(|| couette_energy_envelope(config.r, config.beta)),
        coercivity_holds: energy.coercivity_holds(),
        Es_monotone: energy.es_monotone(ES_MONOTONE_TOL),
        Es_max_relative_increase: energy.es_max_relative_increase(),
        solver: stats.into(),
    };
    Ok(KRun { rows, summary })
}

fn rows_of(series: &ObservableSeries, energy: &EnergyReport) -> Vec<Row> {
    (0..series.times.len())
        .map(|i| Row {
            t: series.times[i],
            energy: energy.energy[i],
            energy_lower: energy.lower[i],
            energy_upper: energy.upper[i],
            q_norm: series.q_norm[i],
            vx_norm: series.vx_norm[i],
            vy_norm: series.vy_norm[i],
            growth_norm: series.growth_norm[i],
            es: energy.es[i],
        })
        .collect()
}

fn check_assertions(config: &AssertConfig, runs: &[KRun]) -> AssertionReport {
    let mut checks = Vec::new();
    for run in runs {
        let s = &run.summary;
        let ranges = [
            ("exponent_q", config.exponent_q, s.exponent_q),
            ("exponent_vx", config.exponent_vx, s.exponent_vx),
            ("exponent_vy", config.exponent_vy, s.exponent_vy),
            ("exponent_growth", config.exponent_growth, s.exponent_growth),
        ];
        for (name, range, value) in ranges {
            if let Some([lo, hi]) = range {
                checks.push(AssertionCheck {
                    name: name.into(),
                    k: s.k,
                    value,
                    expected: format!("[{lo}, {hi}]"),
                    passed: value >= lo && value <= hi,
                });
            }
        }
        if let Some(tol) = config.es_monotone_tol {
            let value = s.Es_max_relative_increase;
            checks.push(AssertionCheck {
                name: "Es_monotone".into(),
                k: s.k,
                value,
                expected: format!("per-step relative increase <= {tol}"),
                passed: value <= tol,
            });
        }
        if config.energy_within_envelope == Some(true) {
            let (passed, value) = match s.energy_envelope {
                Some(gamma) => (
                    s.energy_ratio_max <= gamma && s.energy_ratio_min >= 1.0 / gamma,
                    s.energy_ratio_max.max(1.0 / s.energy_ratio_min),
                ),
                None => (false, f64::NAN),
            };
            checks.push(AssertionCheck {
                name: "energy_within_envelope".into(),
                k: s.k,
                value,
                expected: match s.energy_envelope {
                    Some(gamma) => format!("ratios within [1/{gamma}, {gamma}]"),
                    None => "Couette envelope (not defined for this run)".into(),
                },
                passed,
            });
        }
    }
    AssertionReport {
        enabled: config.enabled,
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}
