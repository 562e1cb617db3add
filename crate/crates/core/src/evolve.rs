//! Time evolution of state vectors under a [`HamiltonianSpec`].
//!
//! Integration uses the Dormand–Prince 5(4) embedded pair with standard
//! step-size control. Steps never cross a drive-segment boundary, and
//! segments in which the Hamiltonian is purely diagonal are advanced with
//! exact phases.

use serde::{Deserialize, Serialize};

use crate::entangle::{concurrence, fully_entangled_fraction, partial_trace_ends, TwoQubitDensity};
use crate::error::{Error, Result};
use crate::model::{apply_with_coefficients, DriveSegment, HamiltonianSpec, PureState, Variant, C64};
use crate::parallel::Execution;

const ZERO: C64 = C64::new(0.0, 0.0);

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PropagationSettings {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Upper bound on the step; further capped to a twentieth of the drive
    /// period while an ac segment is active.
    pub max_step: f64,
    pub sample_dt: f64,
    pub renormalize_every: usize,
    pub max_n_dense: usize,
    /// Keep full state vectors at every sample (memory heavy).
    pub keep_states: bool,
    pub execution: Execution,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        PropagationSettings {
            // 1e-9 lets the norm wander by ~1e-7 between renormalizations
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            max_step: f64::INFINITY,
            sample_dt: 0.25,
            renormalize_every: 1000,
            max_n_dense: 14,
            keep_states: false,
            execution: Execution::default(),
        }
    }
}

impl PropagationSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::Config("integrator tolerances must be positive".into()));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Config("max_step must be positive".into()));
        }
        if !(self.sample_dt > 0.0) || !self.sample_dt.is_finite() {
            return Err(Error::Config("sample_dt must be positive and finite".into()));
        }
        if self.renormalize_every == 0 {
            return Err(Error::Config("renormalize_every must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_sample_dt(mut self, dt: f64) -> Self {
        self.sample_dt = dt;
        self
    }

    pub fn with_rel_tol(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self
    }
}

/// Observables sampled along a trajectory.
#[derive(Clone, Debug)]
pub struct TimeSeries {
    pub config: crate::model::ChainConfig,
    pub engine: String,
    pub times: Vec<f64>,
    pub concurrence: Vec<f64>,
    pub fef: Vec<f64>,
    pub norm: Vec<f64>,
    pub parity: Vec<f64>,
    pub coupling: Vec<f64>,
    /// End-pair density matrix at every sample.
    pub end_pairs: Vec<TwoQubitDensity>,
    pub states: Vec<PureState>,
    /// Largest `|‖ψ‖ − 1|` seen at samples and before each renormalization.
    pub max_norm_drift: f64,
    pub steps: usize,
}

impl TimeSeries {
    pub(crate) fn new(config: &crate::model::ChainConfig, engine: &str) -> Self {
        TimeSeries {
            config: config.clone(),
            engine: engine.to_string(),
            times: Vec::new(),
            concurrence: Vec::new(),
            fef: Vec::new(),
            norm: Vec::new(),
            parity: Vec::new(),
            coupling: Vec::new(),
            end_pairs: Vec::new(),
            states: Vec::new(),
            max_norm_drift: 0.0,
            steps: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub(crate) fn push_sample(&mut self, t: f64, rho: TwoQubitDensity, norm: f64, parity: f64) -> Result<()> {
        self.times.push(t);
        self.concurrence.push(concurrence(&rho)?);
        self.fef.push(fully_entangled_fraction(&rho));
        self.norm.push(norm);
        self.parity.push(parity);
        self.coupling.push(self.config.drive.coupling(t));
        self.end_pairs.push(rho);
        self.max_norm_drift = self.max_norm_drift.max((norm - 1.0).abs());
        Ok(())
    }

    /// Index and value of the largest concurrence (earliest on ties).
    pub fn max_concurrence(&self) -> Option<(usize, f64)> {
        self.concurrence
            .iter()
            .enumerate()
            .fold(None, |best: Option<(usize, f64)>, (i, &c)| match best {
                Some((_, b)) if b >= c => best,
                _ => Some((i, c)),
            })
    }

    pub fn max_fef(&self) -> f64 {
        self.fef.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Sample times `0, dt, 2dt, …` up to and including `t_end`.
pub fn sample_times(t_end: f64, dt: f64) -> Vec<f64> {
    let count = (t_end / dt).floor() as usize;
    let mut ts: Vec<f64> = (0..=count).map(|k| k as f64 * dt).collect();
    if t_end - ts[ts.len() - 1] > 1e-9 * dt {
        ts.push(t_end);
    } else {
        let last = ts.len() - 1;
        ts[last] = t_end;
    }
    ts
}

/// Solves `i dψ/dt = H(t) ψ` from `t = 0` to `t_end` with the drive stored in
/// the spec's configuration.
pub fn propagate(
    spec: &HamiltonianSpec,
    psi0: &PureState,
    settings: &PropagationSettings,
    t_end: f64,
) -> Result<TimeSeries> {
    settings.validate()?;
    spec.config.validate()?;
    let n = spec.n();
    if n > settings.max_n_dense {
        return Err(Error::Capacity { n, max: settings.max_n_dense });
    }
    if psi0.n() != n {
        return Err(Error::Config(format!("initial state has {} spins, Hamiltonian {n}", psi0.n())));
    }
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::Config(format!("t_end must be positive, got {t_end}")));
    }

    let mut series = TimeSeries::new(&spec.config, engine_label(spec.variant));
    let mut stepper = Stepper::new(spec, settings, psi0.clone());
    let times = sample_times(t_end, settings.sample_dt);
    for &ts in &times {
        stepper.advance_to(ts)?;
        let psi = &stepper.state;
        let norm = psi.norm();
        series.push_sample(ts, partial_trace_ends(psi)?, norm, psi.parity() / (norm * norm))?;
        if settings.keep_states {
            series.states.push(psi.clone());
        }
    }
    series.max_norm_drift = series.max_norm_drift.max(stepper.max_prenorm_drift);
    series.steps = stepper.steps;
    Ok(series)
}

fn engine_label(variant: Variant) -> &'static str {
    match variant {
        Variant::LabFrame | Variant::InteractionPicture => "dense",
        Variant::Rwa(_) => "rwa-dense",
        Variant::DualXx => "dual-dense",
    }
}

/// How to hold the entanglement once it has been created.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Freeze {
    /// `J(t) = 0` from the arrival time on.
    SwitchOff,
    /// Keep the amplitudes but move the drive to `omega`. With
    /// `continuous_phase` the sinusoid continues smoothly, otherwise its
    /// phase restarts at zero.
    ShiftFrequency { omega: f64, continuous_phase: bool },
}

impl Freeze {
    pub fn shift(omega: f64) -> Self {
        Freeze::ShiftFrequency { omega, continuous_phase: false }
    }

    /// The segment that implements this freeze after `last`.
    pub fn segment(&self, last: &DriveSegment, t_arrival: f64) -> DriveSegment {
        match *self {
            Freeze::SwitchOff => DriveSegment::new(t_arrival, 0.0, 0.0, last.omega_d),
            Freeze::ShiftFrequency { omega, continuous_phase } => {
                let phase = if continuous_phase {
                    last.argument(t_arrival).rem_euclid(std::f64::consts::TAU)
                } else {
                    0.0
                };
                DriveSegment::new(t_arrival, last.j0, last.j1, omega).with_phase(phase)
            }
        }
    }
}

/// Runs the spec's protocol up to `t_arrival`, then applies `freeze` until
/// `t_end`.
pub fn propagate_with_freeze(
    spec: &HamiltonianSpec,
    psi0: &PureState,
    settings: &PropagationSettings,
    freeze: Freeze,
    t_arrival: f64,
    t_end: f64,
) -> Result<TimeSeries> {
    if !(t_arrival < t_end) || !(t_arrival > 0.0) {
        return Err(Error::Config(format!("freeze time {t_arrival} must lie in (0, {t_end})")));
    }
    let mut frozen = spec.clone();
    let last = *frozen.config.drive.segment_at(t_arrival);
    frozen.config.drive.push(freeze.segment(&last, t_arrival))?;
    propagate(&frozen, psi0, settings, t_end)
}

// Dormand–Prince 5(4) tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

struct Stepper<'a> {
    spec: &'a HamiltonianSpec,
    settings: &'a PropagationSettings,
    state: PureState,
    t: f64,
    h: f64,
    k: [Vec<C64>; 7],
    /// k[0] holds f(t, y) for the current segment.
    fsal_valid: bool,
    tmp: Vec<C64>,
    ynew: Vec<C64>,
    steps: usize,
    since_renorm: usize,
    max_prenorm_drift: f64,
}

impl<'a> Stepper<'a> {
    fn new(spec: &'a HamiltonianSpec, settings: &'a PropagationSettings, state: PureState) -> Self {
        let dim = state.dim();
        Stepper {
            spec,
            settings,
            state,
            t: 0.0,
            h: 0.0,
            k: std::array::from_fn(|_| vec![ZERO; dim]),
            fsal_valid: false,
            tmp: vec![ZERO; dim],
            ynew: vec![ZERO; dim],
            steps: 0,
            since_renorm: 0,
            max_prenorm_drift: 0.0,
        }
    }

    fn advance_to(&mut self, t1: f64) -> Result<()> {
        let stops: Vec<f64> = self.spec.config.drive.boundaries_between(self.t, t1).chain([t1]).collect();
        for stop in stops {
            if stop > self.t {
                let seg = *self.spec.config.drive.segment_at(self.t);
                self.integrate_segment(&seg, stop)?;
            }
        }
        Ok(())
    }

    /// `out = −i H(t) y` with coefficients from `seg`.
    fn rhs(&self, seg: &DriveSegment, t: f64, y: &[C64], out: &mut [C64]) {
        let c = self.spec.coefficients_in(seg, t);
        apply_with_coefficients(self.settings.execution, self.spec.n(), &c, y, out);
        for v in out.iter_mut() {
            *v = C64::new(v.im, -v.re);
        }
    }

    fn integrate_segment(&mut self, seg: &DriveSegment, t1: f64) -> Result<()> {
        if self.spec.is_diagonal_in(seg) {
            let dt = t1 - self.t;
            let spec = self.spec;
            let n = spec.n() as f64;
            let zeeman = spec.coefficients_in(seg, self.t).zeeman;
            for (i, a) in self.state.amplitudes_mut().iter_mut().enumerate() {
                let e = zeeman * (2.0 * i.count_ones() as f64 - n);
                *a *= C64::from_polar(1.0, -e * dt);
            }
            self.t = t1;
            self.fsal_valid = false;
            return Ok(());
        }

        let omega = self.spec.drive_frequency_in(seg);
        let mut hmax = self.settings.max_step;
        if omega > 0.0 {
            hmax = hmax.min(std::f64::consts::TAU / omega / 20.0);
        }
        if self.h <= 0.0 {
            self.h = hmax.min(0.01).min(t1 - self.t);
        }
        self.fsal_valid = false;

        while self.t < t1 {
            let remaining = t1 - self.t;
            let mut h = self.h.min(hmax);
            let truncated = h >= remaining;
            if truncated {
                h = remaining;
            }
            let err = self.try_step(seg, h);
            if err <= 1.0 {
                self.t = if truncated { t1 } else { self.t + h };
                self.state.amplitudes_mut().swap_with_slice(&mut self.ynew);
                self.k.swap(0, 6);
                self.fsal_valid = true;
                self.steps += 1;
                self.since_renorm += 1;
                if self.since_renorm >= self.settings.renormalize_every {
                    let nrm = self.state.normalize();
                    self.max_prenorm_drift = self.max_prenorm_drift.max((nrm - 1.0).abs());
                    self.since_renorm = 0;
                }
            }
            let factor = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            let proposed = h * factor;
            self.h = if truncated && err <= 1.0 { proposed.max(self.h) } else { proposed };
            if self.h < 1e-13 * self.t.abs().max(1.0) {
                return Err(Error::Integration {
                    time: self.t,
                    reason: format!("step size underflow (h = {:e})", self.h),
                });
            }
            if !err.is_finite() {
                return Err(Error::Integration { time: self.t, reason: "non-finite error estimate".into() });
            }
        }
        Ok(())
    }

    /// One trial step of size `h`; leaves the 5th-order solution in `ynew`
    /// and `f(t + h, ynew)` in `k[6]`. Returns the scaled error norm.
    fn try_step(&mut self, seg: &DriveSegment, h: f64) -> f64 {
        let t = self.t;
        let y = self.state.amplitudes().to_vec();
        let mut k = std::mem::take(&mut self.k);
        if !self.fsal_valid {
            self.rhs(seg, t, &y, &mut k[0]);
        }
        let hc = |x: f64| C64::new(h * x, 0.0);

        combine(&mut self.tmp, &y, &[(hc(A21), &k[0])]);
        self.rhs(seg, t + C2 * h, &self.tmp, &mut k[1]);
        combine(&mut self.tmp, &y, &[(hc(A31), &k[0]), (hc(A32), &k[1])]);
        self.rhs(seg, t + C3 * h, &self.tmp, &mut k[2]);
        combine(&mut self.tmp, &y, &[(hc(A41), &k[0]), (hc(A42), &k[1]), (hc(A43), &k[2])]);
        self.rhs(seg, t + C4 * h, &self.tmp, &mut k[3]);
        combine(&mut self.tmp, &y, &[(hc(A51), &k[0]), (hc(A52), &k[1]), (hc(A53), &k[2]), (hc(A54), &k[3])]);
        self.rhs(seg, t + C5 * h, &self.tmp, &mut k[4]);
        combine(
            &mut self.tmp,
            &y,
            &[(hc(A61), &k[0]), (hc(A62), &k[1]), (hc(A63), &k[2]), (hc(A64), &k[3]), (hc(A65), &k[4])],
        );
        self.rhs(seg, t + h, &self.tmp, &mut k[5]);
        combine(
            &mut self.ynew,
            &y,
            &[(hc(B1), &k[0]), (hc(B3), &k[2]), (hc(B4), &k[3]), (hc(B5), &k[4]), (hc(B6), &k[5])],
        );
        let ynew = std::mem::take(&mut self.ynew);
        self.rhs(seg, t + h, &ynew, &mut k[6]);
        self.ynew = ynew;

        let (rtol, atol) = (self.settings.rel_tol, self.settings.abs_tol);
        let mut acc = 0.0;
        for i in 0..y.len() {
            let e = (k[0][i] * E1 + k[2][i] * E3 + k[3][i] * E4 + k[4][i] * E5 + k[5][i] * E6 + k[6][i] * E7) * h;
            let sc = atol + rtol * y[i].norm().max(self.ynew[i].norm());
            acc += (e.norm() / sc).powi(2);
        }
        self.k = k;
        // a rejected step must recompute nothing for k[0]; it still equals f(t, y)
        self.fsal_valid = true;
        (acc / y.len() as f64).sqrt()
    }
}

fn combine(out: &mut [C64], y: &[C64], terms: &[(C64, &Vec<C64>)]) {
    for i in 0..y.len() {
        let mut v = y[i];
        for (c, k) in terms {
            v += *c * k[i];
        }
        out[i] = v;
    }
}
