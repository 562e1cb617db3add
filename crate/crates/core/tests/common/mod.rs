//! Dense reference Hamiltonians built from explicit Pauli tensor products.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix2};
use xy_resonance::{ChainConfig, PureState, C64};

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

// single-spin operators in the (|0⟩ = down, |1⟩ = up) basis
pub fn sx() -> Matrix2<C64> {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}
pub fn sy() -> Matrix2<C64> {
    Matrix2::new(ZERO, I, -I, ZERO)
}
pub fn sz() -> Matrix2<C64> {
    Matrix2::new(-ONE, ZERO, ZERO, ONE)
}
pub fn sp() -> Matrix2<C64> {
    Matrix2::new(ZERO, ZERO, ONE, ZERO)
}
pub fn sm() -> Matrix2<C64> {
    Matrix2::new(ZERO, ONE, ZERO, ZERO)
}

/// Tensor product of single-site operators on an `n`-spin chain; spin `s`
/// (1-based) lives on bit `s − 1`. Sites not listed carry the identity.
pub fn kron_sites(n: usize, ops: &[(usize, Matrix2<C64>)]) -> DMatrix<C64> {
    let dim = 1usize << n;
    DMatrix::from_fn(dim, dim, |i, j| {
        let mut v = ONE;
        for site in 1..=n {
            let (bi, bj) = ((i >> (site - 1)) & 1, (j >> (site - 1)) & 1);
            match ops.iter().find(|(s, _)| *s == site) {
                Some((_, m)) => v *= m[(bi, bj)],
                None => {
                    if bi != bj {
                        return ZERO;
                    }
                }
            }
        }
        v
    })
}

/// `(B/2) Σ σᶻ`.
pub fn zeeman(cfg: &ChainConfig) -> DMatrix<C64> {
    let mut h = DMatrix::zeros(cfg.dim(), cfg.dim());
    for s in 1..=cfg.n {
        h += kron_sites(cfg.n, &[(s, sz())]) * c(cfg.b / 2.0);
    }
    h
}

/// `Σ (J/4)[(1+γ) σˣσˣ + (1−γ) σʸσʸ]` over open bonds.
pub fn xy_coupling(cfg: &ChainConfig, j: f64) -> DMatrix<C64> {
    let mut h = DMatrix::zeros(cfg.dim(), cfg.dim());
    for s in 1..cfg.n {
        h += kron_sites(cfg.n, &[(s, sx()), (s + 1, sx())]) * c(j / 4.0 * (1.0 + cfg.gamma));
        h += kron_sites(cfg.n, &[(s, sy()), (s + 1, sy())]) * c(j / 4.0 * (1.0 - cfg.gamma));
    }
    h
}

pub fn lab(cfg: &ChainConfig, t: f64) -> DMatrix<C64> {
    zeeman(cfg) + xy_coupling(cfg, cfg.drive.coupling(t))
}

/// `e^{iH₀t} V(t) e^{−iH₀t}` with `H₀` the Zeeman term.
pub fn interaction(cfg: &ChainConfig, t: f64) -> DMatrix<C64> {
    let v = xy_coupling(cfg, cfg.drive.coupling(t));
    let e = zeeman(cfg);
    DMatrix::from_fn(cfg.dim(), cfg.dim(), |i, j| v[(i, j)] * C64::from_polar(1.0, (e[(i, i)].re - e[(j, j)].re) * t))
}

/// `(J0/2) Σ [σ⁺σ⁻ + σ⁻σ⁺] + (γJ1/4) Σ [σ⁺σ⁺ + σ⁻σ⁻]`.
pub fn rwa_real(cfg: &ChainConfig) -> DMatrix<C64> {
    let mut h = DMatrix::zeros(cfg.dim(), cfg.dim());
    let pair = cfg.gamma * cfg.j1 / 4.0;
    for s in 1..cfg.n {
        h += (kron_sites(cfg.n, &[(s, sp()), (s + 1, sm())]) + kron_sites(cfg.n, &[(s, sm()), (s + 1, sp())]))
            * c(cfg.j0 / 2.0);
        h += (kron_sites(cfg.n, &[(s, sp()), (s + 1, sp())]) + kron_sites(cfg.n, &[(s, sm()), (s + 1, sm())]))
            * c(pair);
    }
    h
}

/// Isotropic hopping `(γJ1/4) Σ [σ⁺σ⁻ + σ⁻σ⁺]`.
pub fn xx_dual(cfg: &ChainConfig) -> DMatrix<C64> {
    let mut h = DMatrix::zeros(cfg.dim(), cfg.dim());
    for s in 1..cfg.n {
        h += (kron_sites(cfg.n, &[(s, sp()), (s + 1, sm())]) + kron_sites(cfg.n, &[(s, sm()), (s + 1, sp())]))
            * c(cfg.gamma * cfg.j1 / 4.0);
    }
    h
}

/// `Π (−σᶻ)`: +1 on even excitation number.
pub fn parity(n: usize) -> DMatrix<C64> {
    let dim = 1usize << n;
    DMatrix::from_fn(dim, dim, |i, j| if i == j { c(if i.count_ones() % 2 == 0 { 1.0 } else { -1.0 }) } else { ZERO })
}

pub fn random_state(n: usize, seed: u64) -> PureState {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..1usize << n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let mut s = PureState::from_amplitudes(n, amps).unwrap();
    s.normalize();
    s
}

pub fn max_entry(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
