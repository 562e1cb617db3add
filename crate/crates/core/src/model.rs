//! Chain configuration, drive protocols, state vectors and the family of
//! nearest-neighbour Hamiltonians acting on them.
//!
//! Conventions used throughout the crate:
//!
//! * Energies are measured in units of the Zeeman field `B` and times in
//!   units of `1/B` (ħ = 1). The default configuration has `b = 1`.
//! * Spin `n` (1-based) lives in bit `n - 1` of a basis index, so spin 1 is
//!   the least significant bit.
//! * Bit value 0 is the σᶻ = −1 state. The all-zero state is therefore the
//!   ground state of `(B/2) Σ σᶻ`, and σ⁺ sets a bit.
//!
//! Every Hamiltonian in this crate has the same bond structure,
//!
//! ```text
//! H = h Σₙ σᶻₙ + Σₙ [ s (σ⁺ₙσ⁻ₙ₊₁ + σ⁻ₙσ⁺ₙ₊₁) + p σ⁺ₙσ⁺ₙ₊₁ + p* σ⁻ₙσ⁻ₙ₊₁ ]
//! ```
//!
//! with an open chain (bonds 1..N−1). The variants only differ in how the
//! three coefficients `(h, s, p)` depend on time, see [`BondCoefficients`].

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel::Execution;

pub type C64 = Complex64;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Two drive frequencies closer than this are treated as equal when deciding
/// whether a segment is resonant with the Zeeman splitting.
pub const RESONANCE_TOL: f64 = 1e-9;

/// One piece of a piecewise drive: `J(t) = j0 + j1 sin(omega_d (t - t_start) + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveSegment {
    pub t_start: f64,
    pub j0: f64,
    pub j1: f64,
    pub omega_d: f64,
    pub phase: f64,
}

impl DriveSegment {
    pub fn new(t_start: f64, j0: f64, j1: f64, omega_d: f64) -> Self {
        DriveSegment { t_start, j0, j1, omega_d, phase: 0.0 }
    }

    pub fn with_phase(mut self, phase: f64) -> Self {
        self.phase = phase;
        self
    }

    /// Phase of the sinusoid at absolute time `t`.
    pub fn argument(&self, t: f64) -> f64 {
        self.omega_d * (t - self.t_start) + self.phase
    }

    pub fn coupling(&self, t: f64) -> f64 {
        if self.j1 == 0.0 {
            self.j0
        } else {
            self.j0 + self.j1 * self.argument(t).sin()
        }
    }

    /// True when the segment carries an oscillating component.
    pub fn has_ac(&self) -> bool {
        self.j1 != 0.0 && self.omega_d != 0.0
    }

    pub fn is_off(&self) -> bool {
        self.j0 == 0.0 && self.j1 == 0.0
    }
}

/// Ordered list of drive segments. The first starts at `t = 0`; each runs
/// until the next one starts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriveProtocol {
    segments: Vec<DriveSegment>,
}

impl DriveProtocol {
    pub fn new(segments: Vec<DriveSegment>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::Config("drive protocol needs at least one segment".into()))?;
        if first.t_start != 0.0 {
            return Err(Error::Config(format!(
                "first drive segment must start at t = 0, got {}",
                first.t_start
            )));
        }
        for seg in &segments {
            check_segment(seg)?;
        }
        for pair in segments.windows(2) {
            if !(pair[1].t_start > pair[0].t_start) {
                return Err(Error::Config(format!(
                    "drive segment start times must increase strictly ({} then {})",
                    pair[0].t_start, pair[1].t_start
                )));
            }
        }
        Ok(DriveProtocol { segments })
    }

    /// `J(t) = j0 + j1 sin(omega_d t)` for all `t ≥ 0`.
    pub fn constant(j0: f64, j1: f64, omega_d: f64) -> Self {
        DriveProtocol { segments: vec![DriveSegment::new(0.0, j0, j1, omega_d)] }
    }

    pub fn segments(&self) -> &[DriveSegment] {
        &self.segments
    }

    /// Appends a segment that starts after every existing one.
    pub fn push(&mut self, segment: DriveSegment) -> Result<()> {
        check_segment(&segment)?;
        let last = self.segments.last().expect("protocol is never empty");
        if !(segment.t_start > last.t_start) {
            return Err(Error::Config(format!(
                "new segment at t = {} does not start after t = {}",
                segment.t_start, last.t_start
            )));
        }
        self.segments.push(segment);
        Ok(())
    }

    /// The segment active at `t`. A boundary time belongs to the later segment.
    pub fn segment_at(&self, t: f64) -> &DriveSegment {
        let idx = self.segments.partition_point(|s| s.t_start <= t);
        &self.segments[idx.saturating_sub(1)]
    }

    pub fn coupling(&self, t: f64) -> f64 {
        self.segment_at(t).coupling(t)
    }

    /// Segment start times strictly inside `(t0, t1)`.
    pub fn boundaries_between(&self, t0: f64, t1: f64) -> impl Iterator<Item = f64> + '_ {
        self.segments
            .iter()
            .map(|s| s.t_start)
            .filter(move |&ts| ts > t0 && ts < t1)
    }
}

fn check_segment(seg: &DriveSegment) -> Result<()> {
    let vals = [seg.t_start, seg.j0, seg.j1, seg.omega_d, seg.phase];
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("non-finite drive segment {seg:?}")));
    }
    if seg.j0 < 0.0 || seg.j1 < 0.0 {
        return Err(Error::Config(format!("drive amplitudes must be non-negative: {seg:?}")));
    }
    Ok(())
}

/// Physical parameters of the chain together with its drive.
///
/// The scalar `j0`, `j1` and `omega_d` describe the primary (single segment)
/// drive. The `with_*` builders reset `drive` to that single segment;
/// [`ChainConfig::with_drive`] installs an arbitrary protocol.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n: usize,
    pub b: f64,
    pub gamma: f64,
    pub j0: f64,
    pub j1: f64,
    pub omega_d: f64,
    pub drive: DriveProtocol,
}

impl ChainConfig {
    /// Resonantly driven Ising-like chain: `B = 1`, `γ = 1`, `J0 = 0`,
    /// `J1 = 0.1`, `ω_d = 2`.
    pub fn new(n: usize) -> Self {
        let mut cfg = ChainConfig {
            n,
            b: 1.0,
            gamma: 1.0,
            j0: 0.0,
            j1: 0.1,
            omega_d: 2.0,
            drive: DriveProtocol::constant(0.0, 0.1, 2.0),
        };
        cfg.reset_drive();
        cfg
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn with_j0(mut self, j0: f64) -> Self {
        self.j0 = j0;
        self.reset_drive();
        self
    }

    pub fn with_j1(mut self, j1: f64) -> Self {
        self.j1 = j1;
        self.reset_drive();
        self
    }

    pub fn with_omega(mut self, omega_d: f64) -> Self {
        self.omega_d = omega_d;
        self.reset_drive();
        self
    }

    pub fn with_drive(mut self, drive: DriveProtocol) -> Self {
        self.drive = drive;
        self
    }

    fn reset_drive(&mut self) {
        self.drive = DriveProtocol::constant(self.j0, self.j1, self.omega_d);
    }

    pub fn dim(&self) -> usize {
        1usize << self.n
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("chain length must be at least 2, got {}", self.n)));
        }
        if !(self.b > 0.0) || !self.b.is_finite() {
            return Err(Error::Config(format!("Zeeman field must be positive, got {}", self.b)));
        }
        for (name, v) in [("gamma", self.gamma), ("J0", self.j0), ("J1", self.j1), ("omega_d", self.omega_d)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        for seg in self.drive.segments() {
            check_segment(seg)?;
        }
        Ok(())
    }

    /// Validation for runs that evolve in time: at least one coupling must
    /// be switched on, otherwise the observation window is undefined.
    pub fn validate_dynamic(&self) -> Result<()> {
        self.validate()?;
        if self.j0 == 0.0 && self.j1 == 0.0 {
            return Err(Error::Config("J0 and J1 are both zero; nothing drives the chain".into()));
        }
        Ok(())
    }

    /// `γ J1 / (2 J0)`, infinite at `J0 = 0`.
    pub fn effective_anisotropy(&self) -> f64 {
        if self.j0 == 0.0 {
            f64::INFINITY
        } else {
            self.gamma * self.j1 / (2.0 * self.j0)
        }
    }

    /// Observation window `4N / max(J0, J1)`.
    pub fn window(&self) -> Result<f64> {
        let jmax = self.j0.max(self.j1);
        if jmax <= 0.0 {
            return Err(Error::Config("observation window undefined for J0 = J1 = 0".into()));
        }
        Ok(4.0 * self.n as f64 / jmax)
    }

    pub fn is_resonant(&self, omega_d: f64) -> bool {
        (omega_d - 2.0 * self.b).abs() <= RESONANCE_TOL * self.b.max(1.0)
    }
}

/// Complex amplitudes over the `2^N` computational basis.
#[derive(Clone, Debug, PartialEq)]
pub struct PureState {
    n: usize,
    amps: Vec<C64>,
}

impl PureState {
    pub fn basis(n: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n];
        amps[index] = C64::new(1.0, 0.0);
        PureState { n, amps }
    }

    pub fn from_amplitudes(n: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1usize << n {
            return Err(Error::Config(format!(
                "state of {} amplitudes does not match N = {n}",
                amps.len()
            )));
        }
        Ok(PureState { n, amps })
    }

    /// Néel state with spins 1, 3, 5, … up.
    pub fn neel(n: usize) -> Self {
        PureState::basis(n, odd_site_mask(n))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) -> f64 {
        let nrm = self.norm();
        if nrm > 0.0 {
            let inv = 1.0 / nrm;
            self.amps.iter_mut().for_each(|a| *a *= inv);
        }
        nrm
    }

    pub fn inner(&self, other: &PureState) -> C64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum()
    }

    /// Expectation of the excitation-number parity `(−1)^{n₊}`.
    pub fn parity(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(i, a)| if i.count_ones() % 2 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    /// `⟨ψ| O₁ O₂ … |ψ⟩` for a product of single-site operators.
    pub fn expectation(&self, string: &[(usize, PauliOp)]) -> Result<C64> {
        let mut phi = self.amps.clone();
        for &(site, op) in string.iter().rev() {
            if site == 0 || site > self.n {
                return Err(Error::Input(format!("site {site} outside chain of length {}", self.n)));
            }
            phi = op.apply(site, &phi);
        }
        Ok(self.amps.iter().zip(&phi).map(|(a, b)| a.conj() * b).sum())
    }
}

/// Single-site operators that can appear in a spin string.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PauliOp {
    X,
    Y,
    Z,
    /// σ⁺, sets the bit.
    Plus,
    /// σ⁻, clears the bit.
    Minus,
}

impl PauliOp {
    /// Applies the operator on 1-based `site` to an amplitude vector.
    pub fn apply(self, site: usize, psi: &[C64]) -> Vec<C64> {
        let m = 1usize << (site - 1);
        let i_unit = C64::new(0.0, 1.0);
        let mut out = vec![ZERO; psi.len()];
        for (i, &a) in psi.iter().enumerate() {
            let up = i & m != 0;
            match self {
                PauliOp::X => out[i ^ m] += a,
                // σʸ|1⟩ = i|0⟩, σʸ|0⟩ = −i|1⟩ with |1⟩ the σᶻ = +1 state
                PauliOp::Y => out[i ^ m] += if up { i_unit * a } else { -i_unit * a },
                PauliOp::Z => out[i] += if up { a } else { -a },
                PauliOp::Plus => {
                    if !up {
                        out[i | m] += a;
                    }
                }
                PauliOp::Minus => {
                    if up {
                        out[i & !m] += a;
                    }
                }
            }
        }
        out
    }
}

/// Bit mask with the bits of sites 1, 3, 5, … set.
pub fn odd_site_mask(n: usize) -> usize {
    (0..n).step_by(2).fold(0, |m, bit| m | (1 << bit))
}

/// The all-down product state `|00…0⟩`.
pub fn initial_state(config: &ChainConfig) -> PureState {
    PureState::basis(config.n, 0)
}

/// Applies `S = Π_{odd n} σˣₙ`, mapping `|00…0⟩` to the Néel state.
pub fn duality_transform(psi: &PureState) -> PureState {
    let mask = odd_site_mask(psi.n);
    let mut amps = vec![ZERO; psi.dim()];
    for (i, &a) in psi.amps.iter().enumerate() {
        amps[i ^ mask] = a;
    }
    PureState { n: psi.n, amps }
}

/// How the RWA pair term is phased.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RwaGauge {
    /// Real pair coefficient `γ J1 / 4`, the conventional static form.
    Real,
    /// The literal one-period average of the interaction-picture
    /// Hamiltonian. Differs from `Real` by a uniform σᶻ rotation.
    TimeAverage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Lab frame: Zeeman term plus anisotropic XY coupling `J(t)`.
    LabFrame,
    /// Rotating frame of `H₀ = (B/2) Σ σᶻ`.
    InteractionPicture,
    /// Rotating-wave (period-averaged) static Hamiltonian.
    Rwa(RwaGauge),
    /// Isotropic XX chain with hopping `γ J1 / 4`, the image of the `J0 = 0`
    /// RWA Hamiltonian under [`duality_transform`].
    DualXx,
}

/// Coefficients `(h, s, p)` of the bond form in the module docs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BondCoefficients {
    pub zeeman: f64,
    pub swap: f64,
    pub pair: C64,
}

impl BondCoefficients {
    pub fn is_zero(&self) -> bool {
        self.swap == 0.0 && self.pair == ZERO
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianSpec {
    pub variant: Variant,
    pub config: ChainConfig,
}

pub fn lab_frame(config: &ChainConfig) -> HamiltonianSpec {
    HamiltonianSpec { variant: Variant::LabFrame, config: config.clone() }
}

pub fn interaction_picture(config: &ChainConfig) -> HamiltonianSpec {
    HamiltonianSpec { variant: Variant::InteractionPicture, config: config.clone() }
}

/// RWA Hamiltonian `(J0/2) Σ [σ⁺σ⁻ + γ̃ σ⁺σ⁺ + H.c.]` with a real pair term.
///
/// At `J0 = 0` the product `J0 γ̃ = γ J1 / 2` is kept, leaving the pure
/// pair-creation chain `(γ J1 / 4) Σ [σ⁺σ⁺ + σ⁻σ⁻]`.
pub fn rwa_hamiltonian(config: &ChainConfig) -> HamiltonianSpec {
    HamiltonianSpec { variant: Variant::Rwa(RwaGauge::Real), config: config.clone() }
}

/// RWA Hamiltonian with the pair phase produced by averaging over one period.
pub fn rwa_time_average(config: &ChainConfig) -> HamiltonianSpec {
    HamiltonianSpec { variant: Variant::Rwa(RwaGauge::TimeAverage), config: config.clone() }
}

/// Isotropic XX image of the `J0 = 0` RWA chain. `J0` of the configuration
/// is ignored.
pub fn dual_spec(config: &ChainConfig) -> HamiltonianSpec {
    HamiltonianSpec { variant: Variant::DualXx, config: config.clone() }
}

impl HamiltonianSpec {
    pub fn n(&self) -> usize {
        self.config.n
    }

    pub fn dim(&self) -> usize {
        self.config.dim()
    }

    /// Bond coefficients in force at time `t`.
    pub fn coefficients(&self, t: f64) -> BondCoefficients {
        self.coefficients_in(self.config.drive.segment_at(t), t)
    }

    /// Bond coefficients at `t` evaluated with a given drive segment, so that
    /// a step ending on a segment boundary still sees its own segment.
    pub fn coefficients_in(&self, seg: &DriveSegment, t: f64) -> BondCoefficients {
        let cfg = &self.config;
        match self.variant {
            Variant::LabFrame => {
                let j = seg.coupling(t);
                BondCoefficients {
                    zeeman: cfg.b / 2.0,
                    swap: j / 2.0,
                    pair: C64::new(cfg.gamma * j / 2.0, 0.0),
                }
            }
            Variant::InteractionPicture => {
                let j = seg.coupling(t);
                BondCoefficients {
                    zeeman: 0.0,
                    swap: j / 2.0,
                    pair: C64::from_polar(cfg.gamma * j / 2.0, 2.0 * cfg.b * t),
                }
            }
            Variant::Rwa(gauge) => {
                let pair = if cfg.is_resonant(seg.omega_d) && seg.j1 != 0.0 {
                    let mag = cfg.gamma * seg.j1 / 4.0;
                    match gauge {
                        RwaGauge::Real => C64::new(mag, 0.0),
                        // average of sin(ω(t−t₀)+φ) e^{2iBt} over a period is i e^{−iφ} e^{2iBt₀} / 2
                        RwaGauge::TimeAverage => {
                            C64::from_polar(mag, PI / 2.0 - seg.phase + 2.0 * cfg.b * seg.t_start)
                        }
                    }
                } else {
                    ZERO
                };
                BondCoefficients { zeeman: 0.0, swap: seg.j0 / 2.0, pair }
            }
            Variant::DualXx => {
                let swap = if cfg.is_resonant(seg.omega_d) { cfg.gamma * seg.j1 / 4.0 } else { 0.0 };
                BondCoefficients { zeeman: 0.0, swap, pair: ZERO }
            }
        }
    }

    /// True if the Hamiltonian has no explicit time dependence within `seg`.
    pub fn is_static_in(&self, seg: &DriveSegment) -> bool {
        match self.variant {
            Variant::Rwa(_) | Variant::DualXx => true,
            Variant::LabFrame => !seg.has_ac(),
            Variant::InteractionPicture => seg.is_off() || (self.config.gamma == 0.0 && !seg.has_ac()),
        }
    }

    /// Largest angular frequency of explicit time dependence within `seg`;
    /// used to cap integrator steps. Zero for static pieces.
    pub fn drive_frequency_in(&self, seg: &DriveSegment) -> f64 {
        let ac = if seg.has_ac() { seg.omega_d } else { 0.0 };
        match self.variant {
            Variant::LabFrame => ac,
            Variant::InteractionPicture if !seg.is_off() => {
                let rot = if self.config.gamma != 0.0 { 2.0 * self.config.b } else { 0.0 };
                ac.max(rot)
            }
            _ => 0.0,
        }
    }

    /// True when the bond part vanishes throughout `seg`, so the evolution
    /// reduces to diagonal Zeeman phases.
    pub fn is_diagonal_in(&self, seg: &DriveSegment) -> bool {
        self.is_static_in(seg) && self.coefficients_in(seg, seg.t_start).is_zero()
    }

    /// `out = H(t) ψ`, applied bond by bond without forming a matrix.
    pub fn apply_into(&self, t: f64, psi: &[C64], out: &mut [C64]) -> Result<()> {
        self.apply_into_with(Execution::default(), t, psi, out)
    }

    pub fn apply_into_with(&self, exec: Execution, t: f64, psi: &[C64], out: &mut [C64]) -> Result<()> {
        let dim = self.dim();
        if psi.len() != dim || out.len() != dim {
            return Err(Error::Config(format!(
                "state dimension {} / {} does not match 2^{} = {dim}",
                psi.len(),
                out.len(),
                self.n()
            )));
        }
        apply_with_coefficients(exec, self.n(), &self.coefficients(t), psi, out);
        Ok(())
    }

    /// Dense matrix of `H(t)`, assembled column by column from the matrix-free
    /// product. Intended for small chains.
    pub fn dense(&self, t: f64) -> DMatrix<C64> {
        let dim = self.dim();
        let mut m = DMatrix::<C64>::zeros(dim, dim);
        let mut col = vec![ZERO; dim];
        let mut e = vec![ZERO; dim];
        for j in 0..dim {
            e[j] = C64::new(1.0, 0.0);
            self.apply_into_with(Execution::Sequential, t, &e, &mut col).expect("shapes agree");
            for (i, v) in col.iter().enumerate() {
                m[(i, j)] = *v;
            }
            e[j] = ZERO;
        }
        m
    }

    /// Diagonal energy of a basis index under the Zeeman term.
    pub fn zeeman_energy(&self, index: usize, t: f64) -> f64 {
        let c = self.coefficients(t);
        c.zeeman * (2.0 * index.count_ones() as f64 - self.n() as f64)
    }
}

/// `H(t) ψ` as a fresh vector.
pub fn apply_hamiltonian(spec: &HamiltonianSpec, t: f64, psi: &PureState) -> Result<Vec<C64>> {
    let mut out = vec![ZERO; psi.dim()];
    spec.apply_into(t, psi.amplitudes(), &mut out)?;
    Ok(out)
}

/// `out = H ψ` for the bond form with fixed coefficients. Lengths must be `2^n`.
pub fn apply_with_coefficients(exec: Execution, n: usize, c: &BondCoefficients, psi: &[C64], out: &mut [C64]) {
    debug_assert_eq!(psi.len(), 1 << n);
    debug_assert_eq!(out.len(), 1 << n);
    let kernel = BondKernel::new(n, *c);
    crate::parallel::fill_indexed(exec, out, |i| kernel.row(i, psi));
}

struct BondKernel {
    n: usize,
    c: BondCoefficients,
    pair_conj: C64,
}

impl BondKernel {
    fn new(n: usize, c: BondCoefficients) -> Self {
        BondKernel { n, c, pair_conj: c.pair.conj() }
    }

    /// Row `i` of `H ψ`.
    #[inline]
    fn row(&self, i: usize, psi: &[C64]) -> C64 {
        let mut acc = if self.c.zeeman != 0.0 {
            psi[i] * (self.c.zeeman * (2.0 * i.count_ones() as f64 - self.n as f64))
        } else {
            ZERO
        };
        for bond in 0..self.n - 1 {
            let mask = 0b11usize << bond;
            let j = i ^ mask;
            match (i & mask) >> bond {
                0b11 => acc += self.c.pair * psi[j],
                0b00 => acc += self.pair_conj * psi[j],
                _ => acc += self.c.swap * psi[j],
            }
        }
        acc
    }
}
