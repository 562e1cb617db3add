//! Parameter sweeps, peak extraction and arrival-time analysis.
//!
//! Every sweep point is an independent run over the observation window
//! `[0, 4N / max(J0, J1)]`; points are distributed with
//! [`crate::parallel::map_points`] and merged in grid order. A point whose
//! run fails is kept with its error message and `NaN` values so the rest of
//! the sweep survives.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{propagate, propagate_with_freeze, Freeze, PropagationSettings, TimeSeries};
use crate::fermion::{arrival_estimate, fermion_dynamics};
use crate::model::{initial_state, lab_frame, rwa_hamiltonian, ChainConfig};
use crate::parallel::{map_points, with_workers, Execution};

/// Share of the global maximum a local maximum must reach to count as the
/// arrival peak.
pub const ARRIVAL_THRESHOLD: f64 = 0.95;

/// Default frequency grid: 201 points on `[0.2 B, 3 B]`.
pub fn default_omega_grid(b: f64) -> Vec<f64> {
    linspace(0.2 * b, 3.0 * b, 201)
}

/// `count` evenly spaced values from `start` to `stop` inclusive.
pub fn linspace(start: f64, stop: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (count - 1) as f64;
            (0..count).map(|k| if k == count - 1 { stop } else { start + k as f64 * step }).collect()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Engine {
    /// Lab-frame driven Hamiltonian, state vector.
    Dense,
    /// Static RWA Hamiltonian, state vector.
    RwaDense,
    /// Free fermions, `J0 = 0` only.
    Fermion,
}

impl Engine {
    pub fn label(self) -> &'static str {
        match self {
            Engine::Dense => "dense",
            Engine::RwaDense => "rwa-dense",
            Engine::Fermion => "fermion",
        }
    }

    /// Driven runs go to the dense engine; RWA runs at `J0 = 0` go to the
    /// fermion engine at any length.
    pub fn auto(config: &ChainConfig, driven: bool, settings: &PropagationSettings) -> Result<Engine> {
        if driven {
            if config.n > settings.max_n_dense {
                return Err(Error::Capacity { n: config.n, max: settings.max_n_dense });
            }
            Ok(Engine::Dense)
        } else if config.j0 == 0.0 && config.is_resonant(config.omega_d) {
            Ok(Engine::Fermion)
        } else {
            Ok(Engine::RwaDense)
        }
    }
}

impl std::fmt::Display for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

impl std::str::FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Engine> {
        match s {
            "dense" => Ok(Engine::Dense),
            "rwa" | "rwa-dense" => Ok(Engine::RwaDense),
            "fermion" => Ok(Engine::Fermion),
            other => Err(Error::Config(format!("unknown engine '{other}'"))),
        }
    }
}

/// Runs one engine from `|00…0⟩` to `t_end`.
pub fn run_engine(config: &ChainConfig, engine: Engine, settings: &PropagationSettings, t_end: f64) -> Result<TimeSeries> {
    config.validate_dynamic()?;
    let dense = |spec| {
        if config.n > settings.max_n_dense {
            return Err(Error::Capacity { n: config.n, max: settings.max_n_dense });
        }
        propagate(&spec, &initial_state(config), settings, t_end)
    };
    match engine {
        Engine::Dense => dense(lab_frame(config)),
        Engine::RwaDense => dense(rwa_hamiltonian(config)),
        Engine::Fermion => {
            if !config.is_resonant(config.omega_d) {
                return Err(Error::Config("fermion engine models the resonant drive ω_d = 2B only".into()));
            }
            fermion_dynamics(config, t_end, settings.sample_dt)
        }
    }
}

/// Runs `engine` over the observation window of `config`.
pub fn run_window(config: &ChainConfig, engine: Engine, settings: &PropagationSettings) -> Result<TimeSeries> {
    run_engine(config, engine, settings, config.window()?)
}

/// Which parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Omega,
    J0,
    Length,
}

impl Axis {
    pub fn name(self) -> &'static str {
        match self {
            Axis::Omega => "omega_d",
            Axis::J0 => "j0",
            Axis::Length => "n",
        }
    }

    /// The template with this axis set to `value`.
    pub fn apply(self, template: &ChainConfig, value: f64) -> Result<ChainConfig> {
        Ok(match self {
            Axis::Omega => template.clone().with_omega(value),
            Axis::J0 => template.clone().with_j0(value),
            Axis::Length => {
                if value < 2.0 || value.fract() != 0.0 {
                    return Err(Error::Config(format!("chain length must be an integer ≥ 2, got {value}")));
                }
                template.clone().with_n(value as usize)
            }
        })
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Axis> {
        match s {
            "omega" | "omega_d" => Ok(Axis::Omega),
            "j0" => Ok(Axis::J0),
            "length" | "n" => Ok(Axis::Length),
            other => Err(Error::Config(format!("unknown sweep axis '{other}'"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub max_concurrence: f64,
    pub t_of_max: f64,
    pub max_fef: f64,
    pub engine: Engine,
    /// Failure message of a flagged point.
    pub error: Option<Error>,
    pub series: Option<TimeSeries>,
}

impl SweepPoint {
    fn from_series(axis_value: f64, engine: Engine, series: TimeSeries, keep: bool) -> Self {
        let (imax, cmax) = series.max_concurrence().unwrap_or((0, f64::NAN));
        SweepPoint {
            axis_value,
            max_concurrence: cmax,
            t_of_max: series.times.get(imax).copied().unwrap_or(f64::NAN),
            max_fef: series.max_fef(),
            engine,
            error: None,
            series: keep.then_some(series),
        }
    }

    fn failed(axis_value: f64, engine: Engine, error: Error) -> Self {
        SweepPoint {
            axis_value,
            max_concurrence: f64::NAN,
            t_of_max: f64::NAN,
            max_fef: f64::NAN,
            engine,
            error: Some(error),
            series: None,
        }
    }

    pub fn is_flagged(&self) -> bool {
        self.error.is_some()
    }
}

#[derive(Clone, Debug)]
pub struct SweepResult {
    pub axis: Axis,
    pub grid: Vec<f64>,
    pub points: Vec<SweepPoint>,
    pub config: ChainConfig,
}

impl SweepResult {
    pub fn max_concurrences(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.max_concurrence).collect()
    }

    /// Point with the largest max concurrence among unflagged points.
    pub fn argmax(&self) -> Option<&SweepPoint> {
        self.points
            .iter()
            .filter(|p| !p.is_flagged())
            .fold(None, |best: Option<&SweepPoint>, p| match best {
                Some(b) if b.max_concurrence >= p.max_concurrence => best,
                _ => Some(p),
            })
    }

    pub fn flagged(&self) -> Vec<&SweepPoint> {
        self.points.iter().filter(|p| p.is_flagged()).collect()
    }

    /// Point whose axis value is closest to `value`.
    pub fn nearest(&self, value: f64) -> Option<&SweepPoint> {
        self.points.iter().min_by(|a, b| {
            (a.axis_value - value).abs().partial_cmp(&(b.axis_value - value).abs()).unwrap()
        })
    }
}

/// Execution options shared by all sweeps.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub settings: PropagationSettings,
    /// Distribution of sweep points.
    pub execution: Execution,
    /// Worker threads, 0 for the default pool.
    pub workers: usize,
    /// Keep the full time series of every point.
    pub keep_series: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        let settings = PropagationSettings {
            // points already run concurrently
            execution: Execution::Sequential,
            ..PropagationSettings::default()
        };
        SweepOptions { settings, execution: Execution::default(), workers: 0, keep_series: false }
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("sweep grid is empty".into()));
    }
    if grid.iter().any(|v| !v.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("sweep grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

/// Generic sweep. `engine = None` selects per point with [`Engine::auto`],
/// treating every run as driven unless the axis is `Length` at `J0 = 0`.
pub fn sweep(template: &ChainConfig, axis: Axis, grid: &[f64], engine: Option<Engine>, options: &SweepOptions) -> Result<SweepResult> {
    check_grid(grid)?;
    template.validate()?;
    let run_point = |&value: &f64| -> SweepPoint {
        let fallback = engine.unwrap_or(Engine::Dense);
        let config = match axis.apply(template, value) {
            Ok(c) => c,
            Err(e) => return SweepPoint::failed(value, fallback, e),
        };
        let chosen = match engine {
            Some(e) => Ok(e),
            None => {
                let driven = !(axis == Axis::Length && config.j0 == 0.0);
                Engine::auto(&config, driven, &options.settings)
            }
        };
        let chosen = match chosen {
            Ok(e) => e,
            Err(e) => return SweepPoint::failed(value, fallback, e),
        };
        match run_window(&config, chosen, &options.settings) {
            Ok(series) => SweepPoint::from_series(value, chosen, series, options.keep_series),
            Err(e) => SweepPoint::failed(value, chosen, e),
        }
    };
    let points = with_workers(options.workers, || map_points(options.execution, grid, run_point));
    Ok(SweepResult { axis, grid: grid.to_vec(), points, config: template.clone() })
}

/// Max concurrence over the window against the drive frequency, lab-frame
/// dense engine.
pub fn frequency_sweep(template: &ChainConfig, omega_grid: &[f64], options: &SweepOptions) -> Result<SweepResult> {
    sweep(template, Axis::Omega, omega_grid, Some(Engine::Dense), options)
}

/// Exact and RWA curves against `J0` at `ω_d = 2B`.
#[derive(Clone, Debug)]
pub struct J0Sweep {
    pub exact: SweepResult,
    pub rwa: SweepResult,
    /// `|C_exact − C_RWA|` of the window maxima, per grid point.
    pub gap: Vec<f64>,
}

pub fn j0_sweep(template: &ChainConfig, j0_grid: &[f64], options: &SweepOptions) -> Result<J0Sweep> {
    let resonant = template.clone().with_omega(2.0 * template.b);
    let exact = sweep(&resonant, Axis::J0, j0_grid, Some(Engine::Dense), options)?;
    let rwa = sweep(&resonant, Axis::J0, j0_grid, Some(Engine::RwaDense), options)?;
    let gap = exact
        .points
        .iter()
        .zip(&rwa.points)
        .map(|(a, b)| (a.max_concurrence - b.max_concurrence).abs())
        .collect();
    Ok(J0Sweep { exact, rwa, gap })
}

/// Outcome of arrival detection on one series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub n: usize,
    /// Time of the first qualifying maximum; `None` when nothing qualifies.
    pub t_arrival: Option<f64>,
    pub concurrence: f64,
    pub fef: f64,
    /// `(1.7 + N) / (γ J1)`.
    pub predicted: f64,
    /// The series was still rising at its last sample.
    pub window_truncated: bool,
}

impl ArrivalRecord {
    pub fn found(&self) -> bool {
        self.t_arrival.is_some()
    }
}

/// Indices of local maxima of `values`; on a plateau the earliest index is
/// reported. End points never count.
pub fn local_maxima(values: &[f64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < values.len() {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < values.len() && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < values.len() && values[j + 1] < values[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Local maxima that rise at least `prominence` above the lowest value since
/// the previous counted maximum.
pub fn prominent_maxima(values: &[f64], prominence: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut floor = values.first().copied().unwrap_or(0.0);
    let mut last = 0;
    for i in local_maxima(values) {
        floor = values[last..=i].iter().cloned().fold(floor, f64::min);
        if values[i] - floor >= prominence {
            out.push(i);
            last = i;
            floor = values[i];
        }
    }
    out
}

/// Arrival with the default threshold.
pub fn detect_arrival(series: &TimeSeries) -> ArrivalRecord {
    detect_arrival_with(series, ARRIVAL_THRESHOLD)
}

/// First local maximum of `C(t)` reaching `threshold` times the global
/// maximum. A series still rising at its end reports its last sample and
/// sets `window_truncated`.
pub fn detect_arrival_with(series: &TimeSeries, threshold: f64) -> ArrivalRecord {
    let config = &series.config;
    let predicted = arrival_estimate(config).t_arrival;
    let c = &series.concurrence;
    let mut record = ArrivalRecord {
        n: config.n,
        t_arrival: None,
        concurrence: f64::NAN,
        fef: f64::NAN,
        predicted,
        window_truncated: false,
    };
    let Some(gmax) = c.iter().cloned().reduce(f64::max) else {
        return record;
    };
    let pick = local_maxima(c).into_iter().find(|&i| c[i] >= threshold * gmax);
    let pick = pick.or_else(|| {
        let last = c.len() - 1;
        let rising = last > 0 && c[last] > c[last - 1] && c[last] >= threshold * gmax;
        record.window_truncated = rising;
        rising.then_some(last)
    });
    if let Some(i) = pick {
        record.t_arrival = Some(series.times[i]);
        record.concurrence = c[i];
        record.fef = series.fef[i];
    }
    record
}

/// Trace for one engine, optionally frozen at the arrival detected in a
/// first pass over the same interval.
pub fn dynamics_trace(
    config: &ChainConfig,
    engine: Engine,
    freeze: Option<Freeze>,
    settings: &PropagationSettings,
    t_end: f64,
) -> Result<TimeSeries> {
    if engine == Engine::Fermion && config.j0 != 0.0 {
        return Err(Error::Config("fermion engine requires J0=0".into()));
    }
    let base = run_engine(config, engine, settings, t_end)?;
    let Some(freeze) = freeze else {
        return Ok(base);
    };
    let arrival = detect_arrival(&base);
    let Some(t_a) = arrival.t_arrival.filter(|&t| t > 0.0 && t < t_end) else {
        return Err(Error::Numerical("no arrival peak to freeze at".into()));
    };
    match engine {
        Engine::Dense => propagate_with_freeze(&lab_frame(config), &initial_state(config), settings, freeze, t_a, t_end),
        Engine::RwaDense => {
            propagate_with_freeze(&rwa_hamiltonian(config), &initial_state(config), settings, freeze, t_a, t_end)
        }
        Engine::Fermion => match freeze {
            Freeze::SwitchOff => Ok(hold_after(base, t_a)),
            Freeze::ShiftFrequency { .. } => {
                Err(Error::Config("the fermion engine cannot follow a frequency shift; use a dense engine".into()))
            }
        },
    }
}

/// With the coupling off only Zeeman phases act, which leave the end pair
/// unchanged in the rotating frame; every later sample repeats `t_a`.
fn hold_after(mut series: TimeSeries, t_a: f64) -> TimeSeries {
    let Some(ia) = series.times.iter().position(|&t| t >= t_a) else {
        return series;
    };
    for i in ia + 1..series.len() {
        series.concurrence[i] = series.concurrence[ia];
        series.fef[i] = series.fef[ia];
        series.norm[i] = series.norm[ia];
        series.parity[i] = series.parity[ia];
        series.coupling[i] = 0.0;
        series.end_pairs[i] = series.end_pairs[ia].clone();
    }
    series
}

/// Arrival records against chain length with a least-squares line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LengthScaling {
    pub records: Vec<ArrivalRecord>,
    /// Fitted `t_arrival = slope · N + intercept` over found records.
    pub slope: f64,
    pub intercept: f64,
}

/// Fermion-engine arrival scan at `γ = 1`, `J1 = gamma_j1`, `J0 = 0`.
pub fn length_scaling(n_grid: &[usize], gamma_j1: f64, options: &SweepOptions) -> Result<LengthScaling> {
    if n_grid.is_empty() || n_grid.iter().any(|&n| n < 2) {
        return Err(Error::Config("length grid needs chain lengths ≥ 2".into()));
    }
    let template = ChainConfig::new(2).with_gamma(1.0).with_j0(0.0).with_j1(gamma_j1);
    template.validate_dynamic()?;
    let runs: Vec<Result<ArrivalRecord>> = with_workers(options.workers, || {
        map_points(options.execution, n_grid, |&n| {
            let config = template.clone().with_n(n);
            run_window(&config, Engine::Fermion, &options.settings).map(|s| detect_arrival(&s))
        })
    });
    let records = runs.into_iter().collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = records.iter().filter_map(|r| r.t_arrival.map(|t| (r.n as f64, t))).collect();
    let (slope, intercept) = linear_fit(&pts).unwrap_or((f64::NAN, f64::NAN));
    Ok(LengthScaling { records, slope, intercept })
}

/// Ordinary least squares `y = a x + b`; `None` with fewer than two
/// distinct abscissae.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let m = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let a = sxy / sxx;
    Some((a, my - a * mx))
}
