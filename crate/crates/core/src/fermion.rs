//! Free-fermion engine for the infinitely anisotropic RWA chain.
//!
//! Flipping every odd spin maps the `J0 = 0` RWA Hamiltonian onto an
//! isotropic XX chain with hopping `a = γ J1 / 4`, and `|00…0⟩` onto the Néel
//! state `|1010…⟩`. A Jordan–Wigner transformation (occupied site = spin up,
//! `c_j = Π_{m<j}(−σᶻ_m) σ⁻_j`) turns the XX chain into free fermions with the
//! tridiagonal single-particle matrix `h`, so the state stays Gaussian and
//! is fully described by `G_jk = ⟨c†_j c_k⟩`. Chains of hundreds of sites
//! cost `O(N³)` per time point.
//!
//! Spin correlators are evaluated two ways:
//!
//! * the number-conserving fast path ([`end_spin_density`]) reduces every
//!   needed expectation to a determinant;
//! * [`pauli_string_expectation`] handles arbitrary strings through the
//!   Majorana covariance and a Pfaffian, and also accepts anomalous
//!   correlators `⟨c_j c_k⟩`.
//!
//! Only the `J0 = 0` RWA dynamics is modelled here; the driven lab-frame
//! chain and finite `γ̃` need the dense engine.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix4};
use serde::{Deserialize, Serialize};

use crate::entangle::{concurrence, fully_entangled_fraction, TwoQubitDensity};
use crate::error::{Error, Result};
use crate::evolve::{sample_times, TimeSeries};
use crate::model::{ChainConfig, PauliOp, C64};
use crate::pfaffian::{determinant, pfaffian};

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);
const I: C64 = C64::new(0.0, 1.0);

/// Open tight-binding chain `h[n][n+1] = h[n+1][n] = hopping`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleParticleHamiltonian {
    pub n: usize,
    pub hopping: f64,
}

impl SingleParticleHamiltonian {
    pub fn new(n: usize, hopping: f64) -> Self {
        SingleParticleHamiltonian { n, hopping }
    }

    /// Dual XX chain of a configuration: hopping `γ J1 / 4`.
    pub fn from_config(config: &ChainConfig) -> Self {
        Self::new(config.n, config.gamma * config.j1 / 4.0)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| if i.abs_diff(j) == 1 { self.hopping } else { 0.0 })
    }

    /// `2a cos(πm/(N+1))`, `m = 1..N`.
    pub fn spectrum(&self) -> Vec<f64> {
        (1..=self.n).map(|m| 2.0 * self.hopping * (PI * m as f64 / (self.n + 1) as f64).cos()).collect()
    }

    /// Orthonormal sine modes, column `m−1` is mode `m`.
    pub fn modes(&self) -> DMatrix<f64> {
        let l = (self.n + 1) as f64;
        let norm = (2.0 / l).sqrt();
        DMatrix::from_fn(self.n, self.n, |j, m| norm * (PI * ((m + 1) * (j + 1)) as f64 / l).sin())
    }

    /// `U(t) = exp(−i h t)`.
    pub fn propagator(&self, t: f64) -> DMatrix<C64> {
        let v = self.modes();
        let eps = self.spectrum();
        let mut vd = DMatrix::<C64>::zeros(self.n, self.n);
        for j in 0..self.n {
            for m in 0..self.n {
                vd[(j, m)] = C64::from_polar(v[(j, m)], -eps[m] * t);
            }
        }
        vd * v.map(|x| C64::new(x, 0.0)).transpose()
    }
}

/// Two-point correlations of a fermionic Gaussian state:
/// `G_jk = ⟨c†_j c_k⟩` and the anomalous `F_jk = ⟨c_j c_k⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianState {
    pub g: DMatrix<C64>,
    pub f: Option<DMatrix<C64>>,
}

impl GaussianState {
    pub fn new(g: DMatrix<C64>) -> Result<Self> {
        if g.nrows() != g.ncols() || g.nrows() < 2 {
            return Err(Error::Config(format!("correlation matrix must be square with N ≥ 2, got {}x{}", g.nrows(), g.ncols())));
        }
        Ok(GaussianState { g, f: None })
    }

    pub fn with_anomalous(g: DMatrix<C64>, f: DMatrix<C64>) -> Result<Self> {
        let mut s = Self::new(g)?;
        if f.shape() != s.g.shape() {
            return Err(Error::Config("anomalous correlator shape mismatch".into()));
        }
        s.f = Some(f);
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.g.trace().re
    }

    pub fn is_number_conserving(&self, tol: f64) -> bool {
        self.f.as_ref().is_none_or(|f| f.iter().all(|v| v.norm() <= tol))
    }

    /// Eigenvalues of `G` (Hermitian), ascending.
    pub fn occupations(&self) -> Vec<f64> {
        let h = (&self.g + self.g.adjoint()) * C64::new(0.5, 0.0);
        let mut ev: Vec<f64> = nalgebra::SymmetricEigen::new(h).eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// Majorana two-point function `⟨γ_p γ_q⟩` with `γ_{2j} = c†_j + c_j`
    /// and `γ_{2j+1} = i(c_j − c†_j)` (0-based `j`).
    pub fn majorana(&self, p: usize, q: usize) -> C64 {
        let (j, k) = (p / 2, q / 2);
        let d = if j == k { ONE } else { ZERO };
        let g = |x: usize, y: usize| self.g[(x, y)];
        let f = |x: usize, y: usize| self.f.as_ref().map_or(ZERO, |f| f[(x, y)]);
        // ⟨c†_j c†_k⟩ = conj ⟨c_k c_j⟩
        let fd = f(k, j).conj();
        match (p % 2, q % 2) {
            (0, 0) => fd + g(j, k) + d - g(k, j) + f(j, k),
            (1, 1) => -f(j, k) + d - g(k, j) + g(j, k) - fd,
            (0, 1) => I * (g(j, k) - fd + f(j, k) - d + g(k, j)),
            _ => I * (d - g(k, j) + f(j, k) - fd - g(j, k)),
        }
    }

    /// Skew-symmetric restriction of the Majorana covariance to a sorted
    /// word of distinct Majorana indices.
    pub fn majorana_restriction(&self, word: &[usize]) -> DMatrix<C64> {
        let m = word.len();
        let mut a = DMatrix::<C64>::zeros(m, m);
        for x in 0..m {
            for y in x + 1..m {
                let v = self.majorana(word[x], word[y]);
                a[(x, y)] = v;
                a[(y, x)] = -v;
            }
        }
        a
    }
}

/// Correlations of the Néel state `|1010…⟩`: sites 1, 3, 5, … occupied.
pub fn neel_correlation(n: usize) -> Result<GaussianState> {
    let g = DMatrix::from_fn(n, n, |i, j| if i == j && i % 2 == 0 { ONE } else { ZERO });
    GaussianState::new(g)
}

/// `G(t) = U* G₀ Uᵀ` and `F(t) = U F₀ Uᵀ` with `U = exp(−i h t)`, from the
/// Heisenberg evolution `c_k(t) = Σ_l U_kl c_l`.
pub fn propagate_correlation(h: &SingleParticleHamiltonian, g0: &GaussianState, t: f64) -> Result<GaussianState> {
    Ok(CorrelationEvolver::new(h, g0)?.at(t))
}

/// Evolves one initial state to many times.
///
/// `h` is real with sine eigenmodes `V`, so `U = V e^{−iεt} Vᵀ` and
/// `G(t) = V [M_mn e^{i(ε_m − ε_n)t}] Vᵀ` with `M = Vᵀ G₀ V` fixed. Each time
/// then costs an O(N²) phase factor and real matrix products.
#[derive(Clone, Debug)]
pub struct CorrelationEvolver {
    v: DMatrix<f64>,
    eps: Vec<f64>,
    g0: GaussianState,
    g_modes: DMatrix<C64>,
    f_modes: Option<DMatrix<C64>>,
}

impl CorrelationEvolver {
    pub fn new(h: &SingleParticleHamiltonian, g0: &GaussianState) -> Result<Self> {
        if h.n != g0.n() {
            return Err(Error::Config(format!("hopping matrix has {} sites, state {}", h.n, g0.n())));
        }
        let v = h.modes();
        let vt = v.transpose();
        let g_modes = real_sandwich(&vt, &g0.g, &v);
        let f_modes = g0.f.as_ref().map(|f| real_sandwich(&vt, f, &v));
        Ok(CorrelationEvolver { eps: h.spectrum(), g0: g0.clone(), g_modes, f_modes, v })
    }

    pub fn at(&self, t: f64) -> GaussianState {
        if t == 0.0 {
            return self.g0.clone();
        }
        let phases: Vec<C64> = self.eps.iter().map(|e| C64::from_polar(1.0, -e * t)).collect();
        let vt = self.v.transpose();
        let rotate = |m: &DMatrix<C64>, conj_left: bool| {
            let w = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
                let left = if conj_left { phases[i].conj() } else { phases[i] };
                m[(i, j)] * left * phases[j]
            });
            real_sandwich(&self.v, &w, &vt)
        };
        GaussianState { g: rotate(&self.g_modes, true), f: self.f_modes.as_ref().map(|f| rotate(f, false)) }
    }
}

/// `a x b` for real `a`, `b`, done as two real products per side.
fn real_sandwich(a: &DMatrix<f64>, x: &DMatrix<C64>, b: &DMatrix<f64>) -> DMatrix<C64> {
    let re = a * x.map(|z| z.re) * b;
    let im = a * x.map(|z| z.im) * b;
    re.zip_map(&im, C64::new)
}

/// Expands σ⁺/σ⁻ into X/Y and converts each product of Pauli operators into
/// a coefficient times an ordered Majorana word.
fn majorana_terms(n: usize, string: &[(usize, PauliOp)]) -> Result<Vec<(C64, Vec<usize>)>> {
    let mut sorted: Vec<(usize, PauliOp)> = string.to_vec();
    for &(site, _) in &sorted {
        if site == 0 || site > n {
            return Err(Error::Input(format!("site {site} outside chain of length {n}")));
        }
    }
    // operators on different sites commute; keep the given order within a site
    sorted.sort_by_key(|&(s, _)| s);

    let mut terms: Vec<(C64, Vec<usize>)> = vec![(ONE, Vec::new())];
    for &(site, op) in &sorted {
        let j = site - 1;
        let choices: Vec<(C64, PauliOp)> = match op {
            PauliOp::Plus => vec![(C64::new(0.5, 0.0), PauliOp::X), (C64::new(0.0, 0.5), PauliOp::Y)],
            PauliOp::Minus => vec![(C64::new(0.5, 0.0), PauliOp::X), (C64::new(0.0, -0.5), PauliOp::Y)],
            other => vec![(ONE, other)],
        };
        let mut next = Vec::with_capacity(terms.len() * choices.len());
        for (coef, word) in &terms {
            for &(c, p) in &choices {
                let mut w = word.clone();
                let mut k = *coef * c;
                match p {
                    PauliOp::Z => {
                        // σᶻ = −i a b
                        k *= -I;
                        w.extend([2 * j, 2 * j + 1]);
                    }
                    _ => {
                        // σˣ = K a, σʸ = K b with K = Π_{m<j} (i a_m b_m)
                        for m in 0..j {
                            k *= I;
                            w.extend([2 * m, 2 * m + 1]);
                        }
                        w.push(if p == PauliOp::X { 2 * j } else { 2 * j + 1 });
                    }
                }
                next.push((k, w));
            }
        }
        terms = next;
    }
    Ok(terms
        .into_iter()
        .map(|(c, w)| {
            let (sign, w) = normal_order(w);
            (c * sign, w)
        })
        .collect())
}

/// Sorts a Majorana word, tracking the sign of each transposition and
/// cancelling squares.
fn normal_order(mut w: Vec<usize>) -> (f64, Vec<usize>) {
    let mut sign = 1.0;
    loop {
        let mut changed = false;
        let mut i = 0;
        while i + 1 < w.len() {
            if w[i] == w[i + 1] {
                w.drain(i..i + 2);
                changed = true;
                i = i.saturating_sub(1);
                continue;
            }
            if w[i] > w[i + 1] {
                w.swap(i, i + 1);
                sign = -sign;
                changed = true;
            }
            i += 1;
        }
        if !changed {
            return (sign, w);
        }
    }
}

/// `⟨O₁ O₂ …⟩` for a string of single-site spin operators, via Jordan–Wigner
/// and Wick's theorem in Majorana form (a Pfaffian per term).
pub fn pauli_string_expectation(state: &GaussianState, string: &[(usize, PauliOp)]) -> Result<C64> {
    let mut total = ZERO;
    for (coef, word) in majorana_terms(state.n(), string)? {
        if word.len() % 2 == 1 {
            continue;
        }
        let pf = if word.is_empty() { ONE } else { pfaffian(&state.majorana_restriction(&word))? };
        total += coef * pf;
    }
    Ok(total)
}

/// The skew-symmetric Majorana restrictions that [`pauli_string_expectation`]
/// evaluates for `string`; exposed for consistency checks.
pub fn pauli_string_restrictions(state: &GaussianState, string: &[(usize, PauliOp)]) -> Result<Vec<DMatrix<C64>>> {
    Ok(majorana_terms(state.n(), string)?
        .into_iter()
        .filter(|(_, w)| !w.is_empty() && w.len() % 2 == 0)
        .map(|(_, w)| state.majorana_restriction(&w))
        .collect())
}

fn require_number_conserving(state: &GaussianState) -> Result<()> {
    if !state.is_number_conserving(1e-12) {
        return Err(Error::Input("determinant evaluation needs ⟨cc⟩ = 0".into()));
    }
    Ok(())
}

/// `⟨σ⁺_a σ⁻_b⟩` (1-based, `a < b`) for a number-conserving state.
///
/// In fermions this is `⟨W c†_a c_b⟩` with the parity string
/// `W = Π_{a<m<b} (1 − 2 n_m)`. Writing `W (1 + x c†_a c_b)` as one Gaussian
/// operator, its expectation is `det(K + x Gᵀe_a e_bᵀ)` with
/// `K = 1 − 2 Gᵀ P`, `P` the projector on the string sites. The coefficient
/// of `x` is the bordered determinant `−det [[K, Gᵀe_a], [e_bᵀ, 0]]`.
pub fn hopping_correlator(state: &GaussianState, a: usize, b: usize) -> Result<C64> {
    require_number_conserving(state)?;
    let n = state.n();
    if a == 0 || b > n || a >= b {
        return Err(Error::Input(format!("need 1 ≤ a < b ≤ {n}, got a = {a}, b = {b}")));
    }
    let (a, b) = (a - 1, b - 1);
    // restrict to sites a..=b; all other columns of K are unit vectors
    let sites: Vec<usize> = (a..=b).collect();
    let m = sites.len();
    let mut x = DMatrix::<C64>::zeros(m + 1, m + 1);
    for (r, &i) in sites.iter().enumerate() {
        for (c, &j) in sites.iter().enumerate() {
            let in_string = j > a && j < b;
            let id = if i == j { ONE } else { ZERO };
            // Gᵀ[i][j] = G[j][i]
            x[(r, c)] = if in_string { id - state.g[(j, i)] * 2.0 } else { id };
        }
        x[(r, m)] = state.g[(a, i)];
    }
    x[(m, m - 1)] = ONE;
    Ok(-determinant(&x))
}

/// `⟨n_a n_b⟩ = G_aa G_bb − G_ab G_ba` for a number-conserving state.
pub fn density_density(state: &GaussianState, a: usize, b: usize) -> Result<f64> {
    require_number_conserving(state)?;
    let (a, b) = (a - 1, b - 1);
    let g = &state.g;
    Ok((g[(a, a)] * g[(b, b)] - g[(a, b)] * g[(b, a)]).re)
}

/// Reduced density matrix of spins `(1, N)` in the original (un-flipped)
/// picture, assembled from `⟨n₁⟩`, `⟨n_N⟩`, `⟨n₁n_N⟩` and `⟨σ⁺₁σ⁻_N⟩`.
pub fn end_spin_density(state: &GaussianState) -> Result<TwoQubitDensity> {
    let n = state.n();
    let n1 = state.g[(0, 0)].re;
    let nn = state.g[(n - 1, n - 1)].re;
    let both = density_density(state, 1, n)?;
    let hop = hopping_correlator(state, 1, n)?;
    let mut rho = Matrix4::<C64>::zeros();
    rho[(0, 0)] = C64::new(1.0 - n1 - nn + both, 0.0);
    rho[(1, 1)] = C64::new(nn - both, 0.0);
    rho[(2, 2)] = C64::new(n1 - both, 0.0);
    rho[(3, 3)] = C64::new(both, 0.0);
    rho[(1, 2)] = hop;
    rho[(2, 1)] = hop.conj();
    TwoQubitDensity::new(undo_flips(&rho, n))
}

/// Same matrix from the sixteen Pauli correlators evaluated by Pfaffians.
pub fn end_spin_density_pfaffian(state: &GaussianState) -> Result<TwoQubitDensity> {
    let n = state.n();
    let paulis: [Option<PauliOp>; 4] = [None, Some(PauliOp::X), Some(PauliOp::Y), Some(PauliOp::Z)];
    let mut rho = Matrix4::<C64>::zeros();
    for p in &paulis {
        for q in &paulis {
            let mut string = Vec::new();
            if let Some(p) = p {
                string.push((1, *p));
            }
            if let Some(q) = q {
                string.push((n, *q));
            }
            let ev = pauli_string_expectation(state, &string)?;
            rho += kron2(&pauli2(*p), &pauli2(*q)) * (ev * 0.25);
        }
    }
    TwoQubitDensity::new(undo_flips(&rho, n))
}

/// 2×2 matrix of a Pauli operator in the `|0⟩, |1⟩` basis, `|1⟩` = spin up.
fn pauli2(p: Option<PauliOp>) -> nalgebra::Matrix2<C64> {
    use nalgebra::Matrix2;
    match p {
        None => Matrix2::identity(),
        Some(PauliOp::X) => Matrix2::new(ZERO, ONE, ONE, ZERO),
        Some(PauliOp::Y) => Matrix2::new(ZERO, I, -I, ZERO),
        Some(PauliOp::Z) => Matrix2::new(-ONE, ZERO, ZERO, ONE),
        Some(_) => unreachable!("only X, Y, Z are expanded"),
    }
}

fn kron2(a: &nalgebra::Matrix2<C64>, b: &nalgebra::Matrix2<C64>) -> Matrix4<C64> {
    Matrix4::from_fn(|i, j| a[(i >> 1, j >> 1)] * b[(i & 1, j & 1)])
}

/// Undo the odd-site flips on the end pair: spin 1 always, spin N when N is odd.
fn undo_flips(rho: &Matrix4<C64>, n: usize) -> Matrix4<C64> {
    let mask = 0b10 | if n % 2 == 1 { 0b01 } else { 0 };
    Matrix4::from_fn(|i, j| rho[(i ^ mask, j ^ mask)])
}

/// Excitation parity of the original chain, `(−1)^{⌈N/2⌉} det(1 − 2G)`.
pub fn original_parity(state: &GaussianState) -> f64 {
    let n = state.n();
    let m = DMatrix::<C64>::identity(n, n) - &state.g * C64::new(2.0, 0.0);
    let sign = if n.div_ceil(2).is_multiple_of(2) { 1.0 } else { -1.0 };
    sign * determinant(&m).re
}

/// Band data and arrival-time estimates for the `J0 = 0` chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub k: Vec<f64>,
    /// `ε_k = (γ J1 / 2) cos k`.
    pub energies: Vec<f64>,
    /// `v_k = dε/dk = −(γ J1 / 2) sin k`.
    pub velocities: Vec<f64>,
    /// Traversal time `N / |v_{π/2}| = 2N / (γ J1)`.
    pub t_star: f64,
    /// Arrival estimate `1.7 / (γ J1) + t*/2 = (1.7 + N) / (γ J1)`.
    pub t_arrival: f64,
}

/// Intercept of the linear arrival-time law, in units of `1 / (γ J1)`.
pub const ARRIVAL_OFFSET: f64 = 1.7;

/// Dispersion of the dual chain and the resulting time scales. `J0` is ignored.
pub fn arrival_estimate(config: &ChainConfig) -> Dispersion {
    let n = config.n;
    let gj = config.gamma * config.j1;
    let k: Vec<f64> = (1..=n).map(|m| PI * m as f64 / (n + 1) as f64).collect();
    Dispersion {
        energies: k.iter().map(|&k| gj / 2.0 * k.cos()).collect(),
        velocities: k.iter().map(|&k| -gj / 2.0 * k.sin()).collect(),
        k,
        t_star: 2.0 * n as f64 / gj,
        t_arrival: (ARRIVAL_OFFSET + n as f64) / gj,
    }
}

/// End-spin observables of the `J0 = 0` RWA chain from the free-fermion
/// engine, sampled every `sample_dt` up to `t_end`.
///
/// The `norm` column holds `tr G(t) / tr G(0)`, the conserved particle number.
pub fn fermion_dynamics(config: &ChainConfig, t_end: f64, sample_dt: f64) -> Result<TimeSeries> {
    config.validate()?;
    if config.j0 != 0.0 {
        return Err(Error::Config("fermion engine requires J0=0".into()));
    }
    if !(t_end > 0.0) || !(sample_dt > 0.0) {
        return Err(Error::Config("t_end and sample_dt must be positive".into()));
    }
    let g0 = neel_correlation(config.n)?;
    let tr0 = g0.trace();
    let evolver = CorrelationEvolver::new(&SingleParticleHamiltonian::from_config(config), &g0)?;
    let mut series = TimeSeries::new(config, "fermion");
    for t in sample_times(t_end, sample_dt) {
        let g = evolver.at(t);
        let rho = end_spin_density(&g)?;
        series.push_sample(t, rho, g.trace() / tr0, original_parity(&g))?;
    }
    Ok(series)
}

/// Concurrence and fully entangled fraction at a single time.
pub fn end_pair_metrics(config: &ChainConfig, t: f64) -> Result<(f64, f64)> {
    let h = SingleParticleHamiltonian::from_config(config);
    let g = propagate_correlation(&h, &neel_correlation(config.n)?, t)?;
    let rho = end_spin_density(&g)?;
    Ok((concurrence(&rho)?, fully_entangled_fraction(&rho)))
}
