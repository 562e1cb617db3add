//! Two-qubit reduced states of the end spins and their entanglement.

use std::f64::consts::PI;

use nalgebra::{Matrix4, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{PureState, C64};

const ZERO: C64 = C64::new(0.0, 0.0);

/// Anything more negative than this is a broken input rather than round-off.
pub const NEGATIVITY_TOL: f64 = 1e-8;

/// 4×4 density matrix of spins `(1, N)` in the basis `|00⟩, |01⟩, |10⟩, |11⟩`
/// where the first label is spin 1. Row/column index is `2 s₁ + s_N`.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoQubitDensity {
    rho: Matrix4<C64>,
}

/// The parity-constrained view of an end-pair density matrix:
///
/// ```text
/// ⎡ p1  0   0   α  ⎤
/// ⎢ 0   p2  β   0  ⎥
/// ⎢ 0   β*  p2  0  ⎥
/// ⎣ α*  0   0   p3 ⎦
/// ```
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndSpinStructure {
    pub p1: f64,
    /// Mean of the two middle populations.
    pub p2: f64,
    pub p3: f64,
    pub alpha: (f64, f64),
    pub beta: (f64, f64),
    /// Frobenius norm of everything outside the pattern, including the
    /// mismatch of the two middle populations.
    pub residual: f64,
}

impl EndSpinStructure {
    pub fn alpha_abs(&self) -> f64 {
        self.alpha.0.hypot(self.alpha.1)
    }

    pub fn beta_abs(&self) -> f64 {
        self.beta.0.hypot(self.beta.1)
    }

    /// `2 max(0, |α| − p2, |β| − √(p1 p3))`.
    pub fn concurrence(&self) -> f64 {
        let a = self.alpha_abs() - self.p2;
        let b = self.beta_abs() - (self.p1 * self.p3).max(0.0).sqrt();
        2.0 * a.max(b).max(0.0)
    }
}

impl TwoQubitDensity {
    /// Validates Hermiticity, unit trace and positivity.
    pub fn new(rho: Matrix4<C64>) -> Result<Self> {
        let herm = (rho - rho.adjoint()).norm();
        if herm > 1e-10 {
            return Err(Error::Numerical(format!("two-qubit density not Hermitian (‖ρ−ρ†‖ = {herm:e})")));
        }
        let tr = rho.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-9 {
            return Err(Error::Numerical(format!("two-qubit density trace {tr} differs from 1")));
        }
        let d = TwoQubitDensity { rho };
        let min = d.eigenvalues().into_iter().fold(f64::INFINITY, f64::min);
        if min < -NEGATIVITY_TOL {
            return Err(Error::Numerical(format!("two-qubit density has eigenvalue {min:e}")));
        }
        Ok(d)
    }

    /// `|ψ⟩⟨ψ|` for a normalized two-qubit vector in the same basis.
    pub fn pure(psi: [C64; 4]) -> Result<Self> {
        let v = nalgebra::Vector4::from(psi);
        let nrm = v.norm_squared();
        Self::new(v * v.adjoint() / C64::new(nrm, 0.0))
    }

    /// Builds the pattern matrix from its parameters.
    pub fn from_structure(p1: f64, p2: f64, p3: f64, alpha: C64, beta: C64) -> Result<Self> {
        let mut m = Matrix4::<C64>::zeros();
        m[(0, 0)] = C64::new(p1, 0.0);
        m[(1, 1)] = C64::new(p2, 0.0);
        m[(2, 2)] = C64::new(p2, 0.0);
        m[(3, 3)] = C64::new(p3, 0.0);
        m[(0, 3)] = alpha;
        m[(3, 0)] = alpha.conj();
        m[(1, 2)] = beta;
        m[(2, 1)] = beta.conj();
        Self::new(m)
    }

    pub fn matrix(&self) -> &Matrix4<C64> {
        &self.rho
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        let e = SymmetricEigen::new(self.rho).eigenvalues;
        [e[0], e[1], e[2], e[3]]
    }

    /// `U ρ U†` for a two-qubit unitary.
    pub fn conjugate(&self, u: &Matrix4<C64>) -> Result<Self> {
        let m = u * self.rho * u.adjoint();
        Self::new((m + m.adjoint()) * C64::new(0.5, 0.0))
    }
}

/// Reduced density matrix of spins 1 and N, obtained by tracing out the rest.
pub fn partial_trace_ends(psi: &PureState) -> Result<TwoQubitDensity> {
    let n = psi.n();
    if n < 2 {
        return Err(Error::Config("end-pair trace needs at least two spins".into()));
    }
    let amps = psi.amplitudes();
    let last = 1usize << (n - 1);
    let mut rho = Matrix4::<C64>::zeros();
    let mut v = [ZERO; 4];
    for mid in 0..1usize << (n - 2) {
        let base = mid << 1;
        for (a, slot) in v.iter_mut().enumerate() {
            let s1 = a >> 1;
            let sn = a & 1;
            *slot = amps[base | s1 | if sn == 1 { last } else { 0 }];
        }
        for a in 0..4 {
            if v[a] == ZERO {
                continue;
            }
            for b in 0..4 {
                rho[(a, b)] += v[a] * v[b].conj();
            }
        }
    }
    let nrm = psi.norm().powi(2);
    TwoQubitDensity::new(rho / C64::new(nrm, 0.0))
}

fn spin_flip() -> Matrix4<C64> {
    // σʸ ⊗ σʸ in the |00⟩..|11⟩ basis
    let mut yy = Matrix4::<C64>::zeros();
    yy[(0, 3)] = C64::new(-1.0, 0.0);
    yy[(3, 0)] = C64::new(-1.0, 0.0);
    yy[(1, 2)] = C64::new(1.0, 0.0);
    yy[(2, 1)] = C64::new(1.0, 0.0);
    yy
}

fn hermitian_sqrt(m: &Matrix4<C64>) -> Result<Matrix4<C64>> {
    let eig = SymmetricEigen::new(*m);
    let mut d = Matrix4::<C64>::zeros();
    for i in 0..4 {
        let ev = eig.eigenvalues[i];
        if ev < -NEGATIVITY_TOL {
            return Err(Error::Numerical(format!("density eigenvalue {ev:e} is negative")));
        }
        d[(i, i)] = C64::new(ev.max(0.0).sqrt(), 0.0);
    }
    Ok(eig.eigenvectors * d * eig.eigenvectors.adjoint())
}

/// Wootters concurrence `max(0, λ₁ − λ₂ − λ₃ − λ₄)`.
///
/// The `λᵢ` are the square roots of the eigenvalues of `ρ ρ̃`,
/// `ρ̃ = (σʸ⊗σʸ) ρ* (σʸ⊗σʸ)`. They are obtained as the singular values of
/// `√ρ (σʸ⊗σʸ) √ρ*`, which avoids taking square roots of round-off sized
/// eigenvalues near pure states. Eigenvalues of `ρ` in `[−1e−8, 0)` are
/// clamped to zero before `√ρ` is formed.
pub fn concurrence(rho: &TwoQubitDensity) -> Result<f64> {
    let yy = spin_flip();
    let s = hermitian_sqrt(&rho.rho)?;
    let w = s * yy * s.conjugate();
    let sv = w.singular_values();
    let mut lam = [sv[0], sv[1], sv[2], sv[3]];
    lam.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok((lam[0] - lam[1] - lam[2] - lam[3]).clamp(0.0, 1.0))
}

/// Magic basis: maximally entangled states are exactly the real unit
/// combinations of these vectors, up to a global phase.
fn magic_basis() -> Matrix4<C64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let r = |x: f64| C64::new(x, 0.0);
    let i = |x: f64| C64::new(0.0, x);
    // columns: Φ⁺, iΦ⁻, iΨ⁺, Ψ⁻
    #[rustfmt::skip]
    let m = Matrix4::new(
        r(h),  i(h),  ZERO,  ZERO,
        ZERO,  ZERO,  i(h),  r(h),
        ZERO,  ZERO,  i(h),  r(-h),
        r(h),  i(-h), ZERO,  ZERO,
    );
    m
}

/// Fully entangled fraction `max_e ⟨e|ρ|e⟩` over maximally entangled `|e⟩`:
/// the largest eigenvalue of `Re(E† ρ E)` with `E` the magic basis.
pub fn fully_entangled_fraction(rho: &TwoQubitDensity) -> f64 {
    let e = magic_basis();
    let t = e.adjoint() * rho.rho * e;
    let re = t.map(|z| z.re);
    let re = (re + re.transpose()) * 0.5;
    let ev = SymmetricEigen::new(re).eigenvalues;
    ev.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Fully entangled fraction by brute force: maximizes `⟨Φ⁺|(U⊗1)† ρ (U⊗1)|Φ⁺⟩`
/// over an Euler-angle grid of single-qubit unitaries, then polishes the
/// best grid points with a shrinking pattern search.
pub fn fully_entangled_fraction_sampled(rho: &TwoQubitDensity, grid: usize) -> f64 {
    let overlap = |x: [f64; 3]| -> f64 {
        let e = rotated_bell(x);
        (e.adjoint() * rho.rho * e)[(0, 0)].re
    };
    let g = grid.max(4);
    let mut seeds: Vec<(f64, [f64; 3])> = Vec::with_capacity(g * g * g);
    for a in 0..g {
        for b in 0..g {
            for c in 0..g {
                let x = [
                    2.0 * PI * a as f64 / g as f64,
                    PI * b as f64 / (g - 1) as f64,
                    2.0 * PI * c as f64 / g as f64,
                ];
                seeds.push((overlap(x), x));
            }
        }
    }
    seeds.sort_by(|p, q| q.0.partial_cmp(&p.0).unwrap());
    let mut best = seeds[0].0;
    for &(mut val, mut x) in seeds.iter().take(8) {
        let mut step = 2.0 * PI / g as f64;
        while step > 1e-9 {
            let mut moved = false;
            for k in 0..3 {
                for dir in [1.0, -1.0] {
                    let mut y = x;
                    y[k] += dir * step;
                    let v = overlap(y);
                    if v > val {
                        val = v;
                        x = y;
                        moved = true;
                    }
                }
            }
            if !moved {
                step *= 0.5;
            }
        }
        best = best.max(val);
    }
    best
}

fn rotated_bell(x: [f64; 3]) -> nalgebra::Vector4<C64> {
    let [a, b, c] = x;
    // U = Rz(a) Ry(b) Rz(c)
    let u00 = C64::from_polar((b / 2.0).cos(), -(a + c) / 2.0);
    let u01 = -C64::from_polar((b / 2.0).sin(), -(a - c) / 2.0);
    let u10 = C64::from_polar((b / 2.0).sin(), (a - c) / 2.0);
    let u11 = C64::from_polar((b / 2.0).cos(), (a + c) / 2.0);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    // (U ⊗ 1)(|00⟩ + |11⟩)/√2, first factor acts on spin 1 (the high label bit)
    nalgebra::Vector4::new(u00 * h, u01 * h, u10 * h, u11 * h)
}

/// Splits `ρ` into the pattern parameters and the off-pattern residual.
pub fn end_spin_structure(rho: &TwoQubitDensity) -> EndSpinStructure {
    let m = &rho.rho;
    let mut off = 0.0;
    for i in 0..4 {
        for j in 0..4 {
            let on_pattern = i == j || (i + j == 3);
            if !on_pattern {
                off += m[(i, j)].norm_sqr();
            }
        }
    }
    let (pa, pb) = (m[(1, 1)].re, m[(2, 2)].re);
    off += (pa - pb).powi(2);
    let alpha = m[(0, 3)];
    let beta = m[(1, 2)];
    EndSpinStructure {
        p1: m[(0, 0)].re,
        p2: 0.5 * (pa + pb),
        p3: m[(3, 3)].re,
        alpha: (alpha.re, alpha.im),
        beta: (beta.re, beta.im),
        residual: off.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix2;
    use rand::{Rng, SeedableRng};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn random_density(rng: &mut impl Rng, rank: usize) -> TwoQubitDensity {
        let mut m = Matrix4::<C64>::zeros();
        for _ in 0..rank {
            let v = nalgebra::Vector4::from_fn(|_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            m += v * v.adjoint();
        }
        let tr = m.trace();
        TwoQubitDensity::new(m / tr).unwrap()
    }

    fn random_unitary2(rng: &mut impl Rng) -> Matrix2<C64> {
        let (a, b, cc, ph) = (
            rng.gen_range(0.0..2.0 * PI),
            rng.gen_range(0.0..PI),
            rng.gen_range(0.0..2.0 * PI),
            rng.gen_range(0.0..2.0 * PI),
        );
        let g = C64::from_polar(1.0, ph);
        Matrix2::new(
            g * C64::from_polar((b / 2.0).cos(), -(a + cc) / 2.0),
            -g * C64::from_polar((b / 2.0).sin(), -(a - cc) / 2.0),
            g * C64::from_polar((b / 2.0).sin(), (a - cc) / 2.0),
            g * C64::from_polar((b / 2.0).cos(), (a + cc) / 2.0),
        )
    }

    fn kron(a: &Matrix2<C64>, b: &Matrix2<C64>) -> Matrix4<C64> {
        Matrix4::from_fn(|i, j| a[(i >> 1, j >> 1)] * b[(i & 1, j & 1)])
    }

    #[test]
    fn bell_and_product() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let bell = TwoQubitDensity::pure([c(h), ZERO, ZERO, c(h)]).unwrap();
        assert_abs_diff_eq!(concurrence(&bell).unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(fully_entangled_fraction(&bell), 1.0, epsilon = 1e-12);
        let prod = TwoQubitDensity::pure([c(0.6), c(0.8), ZERO, ZERO]).unwrap();
        assert_abs_diff_eq!(concurrence(&prod).unwrap(), 0.0, epsilon = 1e-12);
        let mixed = TwoQubitDensity::new(Matrix4::identity() * c(0.25)).unwrap();
        assert_abs_diff_eq!(concurrence(&mixed).unwrap(), 0.0);
        assert_abs_diff_eq!(fully_entangled_fraction(&mixed), 0.25, epsilon = 1e-12);
    }

    #[test]
    fn appendix_form_value() {
        let rho = TwoQubitDensity::from_structure(0.4, 0.1, 0.4, c(0.35), ZERO).unwrap();
        let s = end_spin_structure(&rho);
        assert_abs_diff_eq!(s.concurrence(), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(concurrence(&rho).unwrap(), 0.5, epsilon = 1e-10);
        let bell = TwoQubitDensity::from_structure(0.5, 0.0, 0.5, c(0.5), ZERO).unwrap();
        assert_abs_diff_eq!(fully_entangled_fraction(&bell), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn three_spin_contraction() {
        // (|110⟩ + |011⟩)/√2 with spin 1 the low bit: indices 0b011 and 0b110
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut amps = vec![ZERO; 8];
        amps[0b011] = c(h);
        amps[0b110] = c(h);
        let rho = partial_trace_ends(&PureState::from_amplitudes(3, amps.clone()).unwrap()).unwrap();
        // brute force: ρ_ab = Σ_m ψ(s1=a1, m, s3=a0) ψ*(...)
        let mut oracle = Matrix4::<C64>::zeros();
        for a in 0..4usize {
            for b in 0..4usize {
                for m in 0..2usize {
                    let ia = (a >> 1) | (m << 1) | ((a & 1) << 2);
                    let ib = (b >> 1) | (m << 1) | ((b & 1) << 2);
                    oracle[(a, b)] += amps[ia] * amps[ib].conj();
                }
            }
        }
        assert!((rho.matrix() - oracle).norm() < 1e-15);
        // both configurations have the middle spin up: a pure Ψ⁺ on the ends
        assert_abs_diff_eq!(rho.matrix()[(1, 2)].re, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(concurrence(&rho).unwrap(), 1.0, epsilon = 1e-10);
    }

    #[test]
    fn trace_of_random_states() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for n in 2..7 {
            let amps = (0..1 << n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
            let mut psi = PureState::from_amplitudes(n, amps).unwrap();
            psi.normalize();
            let rho = partial_trace_ends(&psi).unwrap();
            assert_abs_diff_eq!(rho.matrix().trace().re, 1.0, epsilon = 1e-12);
            assert!(rho.eigenvalues().iter().all(|&e| e > -1e-12));
        }
    }

    #[test]
    fn rejects_unphysical() {
        let mut m = Matrix4::<C64>::zeros();
        m[(0, 0)] = c(1.5);
        m[(1, 1)] = c(-0.5);
        assert!(matches!(TwoQubitDensity::new(m), Err(Error::Numerical(_))));
        assert!(TwoQubitDensity::new(Matrix4::identity()).is_err());
    }

    #[test]
    fn local_unitary_invariance() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for rank in 1..=4 {
            let rho = random_density(&mut rng, rank);
            let c0 = concurrence(&rho).unwrap();
            let f0 = fully_entangled_fraction(&rho);
            let u = kron(&random_unitary2(&mut rng), &random_unitary2(&mut rng));
            let r2 = rho.conjugate(&u).unwrap();
            assert_abs_diff_eq!(concurrence(&r2).unwrap(), c0, epsilon = 1e-10);
            assert_abs_diff_eq!(fully_entangled_fraction(&r2), f0, epsilon = 1e-10);
        }
    }

    #[test]
    fn pure_bell_like_family() {
        for k in 0..=20 {
            let th = PI / 2.0 * k as f64 / 20.0;
            let rho = TwoQubitDensity::pure([c(th.cos()), ZERO, ZERO, c(th.sin())]).unwrap();
            let cc = concurrence(&rho).unwrap();
            assert_abs_diff_eq!(cc, (2.0 * th).sin().abs(), epsilon = 1e-12);
            assert_abs_diff_eq!(fully_entangled_fraction(&rho), (1.0 + cc) / 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn magic_basis_matches_sampled_maximum() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for rank in [1, 2, 4] {
            let rho = random_density(&mut rng, rank);
            let f = fully_entangled_fraction(&rho);
            let fs = fully_entangled_fraction_sampled(&rho, 16);
            assert!(f >= 0.25 - 1e-12);
            assert!(f >= fs - 1e-12, "magic {f} below sampled {fs}");
            assert!(f - fs < 1e-4, "magic {f} vs sampled {fs}");
        }
    }

    #[test]
    fn wootters_equals_closed_form_on_pattern() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let p1: f64 = rng.gen_range(0.0..1.0);
            let p3: f64 = rng.gen_range(0.0..(1.0 - p1));
            let p2 = (1.0 - p1 - p3) / 2.0;
            let alpha = C64::from_polar(rng.gen_range(0.0..1.0) * (p1 * p3).sqrt(), rng.gen_range(0.0..6.0));
            let beta = C64::from_polar(rng.gen_range(0.0..1.0) * p2, rng.gen_range(0.0..6.0));
            let rho = TwoQubitDensity::from_structure(p1, p2, p3, alpha, beta).unwrap();
            let s = end_spin_structure(&rho);
            assert!(s.residual < 1e-15);
            assert_abs_diff_eq!(concurrence(&rho).unwrap(), s.concurrence(), epsilon = 1e-10);
        }
    }
}
