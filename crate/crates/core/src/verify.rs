//! Self-checks comparing independent routes to the same quantities.
//!
//! [`run_checks`] runs dense-versus-fermion equivalence, the duality map,
//! the RWA time average, the end-pair parity structure and the three-spin
//! law, and returns a table of pass/fail rows plus informational rows.

use nalgebra::DMatrix;

use crate::entangle::{concurrence, end_spin_structure, fully_entangled_fraction, partial_trace_ends};
use crate::error::Result;
use crate::evolve::{propagate, PropagationSettings};
use crate::experiments::{detect_arrival, run_window, Engine};
use crate::fermion::{end_spin_density, end_spin_density_pfaffian, neel_correlation, propagate_correlation, SingleParticleHamiltonian};
use crate::model::{
    dual_spec, duality_transform, initial_state, interaction_picture, rwa_hamiltonian, rwa_time_average, ChainConfig,
    HamiltonianSpec, PureState, C64,
};

/// A map standing in for the odd-site flip, injectable for mutation tests.
pub type DualityMap = fn(&PureState) -> PureState;

#[derive(Clone, Debug)]
pub struct VerifyOptions {
    /// Smaller chains and fewer sample times.
    pub quick: bool,
    pub duality_map: DualityMap,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { quick: false, duality_map: duality_transform }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
    /// Measured but never gated.
    pub info: Vec<(String, String)>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    fn push(&mut self, name: &str, outcome: Result<(bool, String)>) {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        self.checks.push(Check { name: name.to_string(), passed, detail });
    }

    /// Fixed-width PASS/FAIL table.
    pub fn table(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).chain(self.info.iter().map(|i| i.0.len())).max().unwrap_or(0);
        let mut out = String::new();
        for c in &self.checks {
            out += &format!("{:<4}  {:<width$}  {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        for (name, detail) in &self.info {
            out += &format!("{:<4}  {:<width$}  {}\n", "INFO", name, detail);
        }
        out
    }
}

pub fn run_checks(options: &VerifyOptions) -> VerifyReport {
    let mut report = VerifyReport::default();
    let n_max = if options.quick { 6 } else { 10 };
    let samples = if options.quick { 5 } else { 20 };

    report.push("dense-fermion equivalence", fermion_equivalence(n_max, samples));
    report.push("pfaffian-determinant agreement", pfaffian_route(n_max.min(8)));
    report.push("duality matrix identity", duality_identity(n_max.min(if options.quick { 6 } else { 8 }), options.duality_map));
    report.push("duality spectrum", duality_spectrum(n_max.min(8), options.duality_map));
    report.push("duality concurrence trace", duality_trace(if options.quick { 5 } else { 7 }, options.duality_map));
    report.push("rwa time average", rwa_average(if options.quick { 3 } else { 4 }));
    report.push("end-pair parity structure", appendix_structure());
    report.push("three-spin law", three_spin_law());

    match three_spin_deviations() {
        Ok((abs_sin, _)) => report.info.push((
            "three-spin |sin| form".into(),
            format!("max |C - |sin(x)|| = {abs_sin:.3e}; the exact law is sin^2(x)"),
        )),
        Err(e) => report.info.push(("three-spin |sin| form".into(), format!("error: {e}"))),
    }
    match n7_gap() {
        Ok((c, f, t)) => report.info.push((
            "N=7 concurrence vs FEF".into(),
            format!("first max at t = {t}: C = {c:.6}, f = {f:.6}, |C - f| = {:.3e}", (c - f).abs()),
        )),
        Err(e) => report.info.push(("N=7 concurrence vs FEF".into(), format!("error: {e}"))),
    }
    report
}

/// Deterministic well-spread times in `(0, t_max)`.
pub fn probe_times(t_max: f64, count: usize) -> Vec<f64> {
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    (1..=count).map(|k| t_max * (k as f64 * phi).fract()).collect()
}

/// `exp(−iHt) ψ₀` for a static spec, by dense diagonalization.
pub fn spectral_evolve(spec: &HamiltonianSpec, psi0: &PureState, times: &[f64]) -> Vec<PureState> {
    let eig = nalgebra::SymmetricEigen::new(spec.dense(0.0));
    let v = eig.eigenvectors;
    let psi = nalgebra::DVector::from_column_slice(psi0.amplitudes());
    let coeff = v.adjoint() * psi;
    times
        .iter()
        .map(|&t| {
            let phased = nalgebra::DVector::from_fn(coeff.len(), |k, _| coeff[k] * C64::from_polar(1.0, -eig.eigenvalues[k] * t));
            let out = &v * phased;
            PureState::from_amplitudes(psi0.n(), out.as_slice().to_vec()).expect("dimension preserved")
        })
        .collect()
}

fn max_entry_diff(a: &nalgebra::Matrix4<C64>, b: &nalgebra::Matrix4<C64>) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn fermion_equivalence(n_max: usize, samples: usize) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 2..=n_max {
        let cfg = ChainConfig::new(n);
        let times = probe_times(cfg.window()?, samples);
        let dense = spectral_evolve(&rwa_hamiltonian(&cfg), &initial_state(&cfg), &times);
        let h = SingleParticleHamiltonian::from_config(&cfg);
        let g0 = neel_correlation(n)?;
        for (t, psi) in times.iter().zip(&dense) {
            let rho_f = end_spin_density(&propagate_correlation(&h, &g0, *t)?)?;
            let rho_d = partial_trace_ends(psi)?;
            worst = worst.max(max_entry_diff(rho_f.matrix(), rho_d.matrix()));
        }
    }
    Ok((worst < 1e-7, format!("N = 2..{n_max}, {samples} times: max |Δρ| = {worst:.2e}")))
}

fn pfaffian_route(n_max: usize) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 2..=n_max {
        let cfg = ChainConfig::new(n);
        let h = SingleParticleHamiltonian::from_config(&cfg);
        let g0 = neel_correlation(n)?;
        for t in probe_times(cfg.window()?, 3) {
            let g = propagate_correlation(&h, &g0, t)?;
            worst = worst.max(max_entry_diff(end_spin_density(&g)?.matrix(), end_spin_density_pfaffian(&g)?.matrix()));
        }
    }
    Ok((worst < 1e-10, format!("N = 2..{n_max}: max |Δρ| = {worst:.2e}")))
}

/// Matrix of `map` on the computational basis.
fn map_matrix(n: usize, map: DualityMap) -> DMatrix<C64> {
    let dim = 1usize << n;
    let mut m = DMatrix::<C64>::zeros(dim, dim);
    for j in 0..dim {
        let col = map(&PureState::basis(n, j));
        for (i, a) in col.amplitudes().iter().enumerate() {
            m[(i, j)] = *a;
        }
    }
    m
}

fn duality_identity(n_max: usize, map: DualityMap) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 2..=n_max {
        let cfg = ChainConfig::new(n);
        let s = map_matrix(n, map);
        let lhs = &s * rwa_hamiltonian(&cfg).dense(0.0) * s.adjoint();
        let rhs = dual_spec(&cfg).dense(0.0);
        worst = worst.max((lhs - rhs).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    Ok((worst < 1e-10, format!("N = 2..{n_max}: max |S H S† - H_XX| = {worst:.2e}")))
}

fn sorted_eigenvalues(m: DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(m).eigenvalues.iter().cloned().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

fn duality_spectrum(n_max: usize, map: DualityMap) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 2..=n_max {
        let cfg = ChainConfig::new(n);
        let s = map_matrix(n, map);
        let lhs = sorted_eigenvalues(&s * rwa_hamiltonian(&cfg).dense(0.0) * s.adjoint());
        let rhs = sorted_eigenvalues(dual_spec(&cfg).dense(0.0));
        worst = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    Ok((worst < 1e-10, format!("N = 2..{n_max}: max |Δε| = {worst:.2e}")))
}

fn duality_trace(n: usize, map: DualityMap) -> Result<(bool, String)> {
    let cfg = ChainConfig::new(n);
    let psi0 = initial_state(&cfg);
    let settings = PropagationSettings::default().with_sample_dt(1.0);
    let t_end = cfg.window()?;
    let direct = propagate(&rwa_hamiltonian(&cfg), &psi0, &settings, t_end)?;
    let dual = propagate(&dual_spec(&cfg), &map(&psi0), &settings, t_end)?;
    let worst = direct.concurrence.iter().zip(&dual.concurrence).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // the states themselves must correspond through the map as well
    let s = map_matrix(n, map);
    let mut state_gap: f64 = 0.0;
    let times = probe_times(t_end, 4);
    let a = spectral_evolve(&rwa_hamiltonian(&cfg), &psi0, &times);
    let b = spectral_evolve(&dual_spec(&cfg), &map(&psi0), &times);
    for (x, y) in a.iter().zip(&b) {
        let mapped = &s * nalgebra::DVector::from_column_slice(x.amplitudes());
        let ov = y.amplitudes().iter().zip(mapped.iter()).map(|(p, q)| p.conj() * q).sum::<C64>();
        state_gap = state_gap.max(1.0 - ov.norm());
    }
    Ok((
        worst < 1e-8 && state_gap < 1e-8,
        format!("N = {n}: max |ΔC| = {worst:.2e}, max state infidelity = {state_gap:.2e}"),
    ))
}

/// Trapezoidal period average of the interaction-picture Hamiltonian.
pub fn period_average(config: &ChainConfig, points: usize) -> DMatrix<C64> {
    let spec = interaction_picture(config);
    let period = std::f64::consts::TAU / config.omega_d;
    let mut acc = DMatrix::<C64>::zeros(config.dim(), config.dim());
    for k in 0..points {
        acc += spec.dense(period * k as f64 / points as f64);
    }
    acc / C64::new(points as f64, 0.0)
}

fn rwa_average(n_max: usize) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for n in 2..=n_max {
        for j0 in [0.0, 0.01, 0.1] {
            let cfg = ChainConfig::new(n).with_j0(j0).with_gamma(0.7);
            let avg = period_average(&cfg, 1024);
            let rwa = rwa_time_average(&cfg).dense(0.0);
            worst = worst.max((avg - rwa).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    Ok((worst < 1e-8, format!("N = 2..{n_max}, 1024 nodes: max |ΔH| = {worst:.2e}")))
}

fn appendix_structure() -> Result<(bool, String)> {
    let mut worst_res: f64 = 0.0;
    let mut worst_null: f64 = 0.0;
    let mut worst_c: f64 = 0.0;
    let settings = PropagationSettings::default().with_sample_dt(1.0);
    for n in [4usize, 5] {
        let cfg = ChainConfig::new(n);
        let run = propagate(&rwa_hamiltonian(&cfg), &initial_state(&cfg), &settings, cfg.window()?)?;
        for (rho, c) in run.end_pairs.iter().zip(&run.concurrence) {
            let s = end_spin_structure(rho);
            worst_res = worst_res.max(s.residual);
            worst_null = worst_null.max(if n % 2 == 0 { s.beta_abs() } else { s.alpha_abs() });
            if s.residual < 1e-10 {
                worst_c = worst_c.max((s.concurrence() - c).abs());
            }
        }
    }
    Ok((
        worst_res < 1e-9 && worst_null < 1e-9 && worst_c < 1e-10,
        format!("residual {worst_res:.2e}, nullity {worst_null:.2e}, closed form vs Wootters {worst_c:.2e}"),
    ))
}

/// Largest deviation of the RWA three-spin concurrence from `|sin x|` and
/// from `sin² x`, `x = γ J1 t / (2√2)`, over one period of the law.
pub fn three_spin_deviations() -> Result<(f64, f64)> {
    let cfg = ChainConfig::new(3);
    let rate = cfg.gamma * cfg.j1 / (2.0 * 2f64.sqrt());
    let t_end = std::f64::consts::PI / rate;
    let run = propagate(&rwa_hamiltonian(&cfg), &initial_state(&cfg), &PropagationSettings::default(), t_end)?;
    let mut abs_sin: f64 = 0.0;
    let mut sin_sq: f64 = 0.0;
    for (t, c) in run.times.iter().zip(&run.concurrence) {
        let x = rate * t;
        abs_sin = abs_sin.max((c - x.sin().abs()).abs());
        sin_sq = sin_sq.max((c - x.sin().powi(2)).abs());
    }
    Ok((abs_sin, sin_sq))
}

fn three_spin_law() -> Result<(bool, String)> {
    let (_, sin_sq) = three_spin_deviations()?;
    Ok((sin_sq < 1e-6, format!("max |C - sin^2(γJ1 t / 2√2)| = {sin_sq:.2e}")))
}

/// Concurrence, FEF and time at the first maximum for `N = 7`.
fn n7_gap() -> Result<(f64, f64, f64)> {
    let cfg = ChainConfig::new(7);
    let run = run_window(&cfg, Engine::Fermion, &PropagationSettings::default())?;
    let arrival = detect_arrival(&run);
    let t = arrival.t_arrival.unwrap_or(f64::NAN);
    let idx = run.times.iter().position(|&s| s == t);
    match idx {
        Some(i) => {
            let rho = &run.end_pairs[i];
            Ok((concurrence(rho)?, fully_entangled_fraction(rho), t))
        }
        None => Ok((f64::NAN, f64::NAN, t)),
    }
}
