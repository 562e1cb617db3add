//! Pfaffians of complex skew-symmetric matrices by Parlett–Reid elimination.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::model::C64;

/// Largest `|A + Aᵀ|` entry tolerated, relative to the largest entry.
const SKEW_TOL: f64 = 1e-10;

/// Pfaffian of a skew-symmetric matrix.
///
/// Uses the `A = L T Lᵀ` reduction with partial pivoting: at every second
/// column the largest sub-diagonal entry is swapped into place, after which
/// one Gauss step eliminates the pair of rows and columns. `O(n³)`.
pub fn pfaffian(a: &DMatrix<C64>) -> Result<C64> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::Input(format!("pfaffian of non-square {}x{} matrix", n, a.ncols())));
    }
    check_skew(a)?;
    if n == 0 {
        return Ok(C64::new(1.0, 0.0));
    }
    if n % 2 == 1 {
        return Ok(C64::new(0.0, 0.0));
    }

    let mut m = a.clone();
    let mut pf = C64::new(1.0, 0.0);
    let mut k = 0;
    while k + 1 < n {
        // pivot: largest |m[i, k]| below the diagonal
        let mut kp = k + 1;
        let mut best = m[(k + 1, k)].norm();
        for i in k + 2..n {
            let v = m[(i, k)].norm();
            if v > best {
                best = v;
                kp = i;
            }
        }
        if kp != k + 1 {
            m.swap_rows(k + 1, kp);
            m.swap_columns(k + 1, kp);
            pf = -pf;
        }
        let piv = m[(k, k + 1)];
        if piv == C64::new(0.0, 0.0) {
            return Ok(C64::new(0.0, 0.0));
        }
        pf *= piv;
        if k + 2 < n {
            let tau: Vec<C64> = (k + 2..n).map(|j| m[(k, j)] / piv).collect();
            let col: Vec<C64> = (k + 2..n).map(|i| m[(i, k + 1)]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                for (jj, j) in (k + 2..n).enumerate() {
                    let upd = tau[ii] * col[jj] - col[ii] * tau[jj];
                    m[(i, j)] += upd;
                }
            }
        }
        k += 2;
    }
    Ok(pf)
}

fn check_skew(a: &DMatrix<C64>) -> Result<()> {
    let scale = a.iter().fold(0.0f64, |s, v| s.max(v.norm())).max(1.0);
    let n = a.nrows();
    for i in 0..n {
        for j in i..n {
            if (a[(i, j)] + a[(j, i)]).norm() > SKEW_TOL * scale {
                return Err(Error::Input(format!("matrix is not skew-symmetric at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Determinant through LU with partial pivoting.
pub fn determinant(a: &DMatrix<C64>) -> C64 {
    if a.nrows() == 0 {
        return C64::new(1.0, 0.0);
    }
    a.clone().lu().determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn small_cases() {
        let a = DMatrix::from_row_slice(2, 2, &[c(0.0), c(3.0), c(-3.0), c(0.0)]);
        assert_eq!(pfaffian(&a).unwrap(), c(3.0));
        // Pf of 4x4 = a01 a23 - a02 a13 + a03 a12
        let (a01, a02, a03, a12, a13, a23) = (c(1.0), c(2.0), c(3.0), c(4.0), c(5.0), c(6.0));
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            c(0.0), a01, a02, a03,
            -a01, c(0.0), a12, a13,
            -a02, -a12, c(0.0), a23,
            -a03, -a13, -a23, c(0.0),
        ]);
        let expect = a01 * a23 - a02 * a13 + a03 * a12;
        assert!((pfaffian(&m).unwrap() - expect).norm() < 1e-13);
        assert_eq!(pfaffian(&DMatrix::zeros(3, 3)).unwrap(), c(0.0));
        assert_eq!(pfaffian(&DMatrix::zeros(0, 0)).unwrap(), c(1.0));
    }

    #[test]
    fn rejects_non_skew() {
        let a = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        assert!(pfaffian(&a).is_err());
    }

    #[test]
    fn zero_pivot_column_gives_zero() {
        let mut a = DMatrix::<C64>::zeros(4, 4);
        a[(1, 2)] = c(1.0);
        a[(2, 1)] = c(-1.0);
        assert_eq!(pfaffian(&a).unwrap(), c(0.0));
    }

    proptest! {
        #[test]
        fn square_equals_determinant(
            half in 1usize..6,
            vals in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 66),
        ) {
            let n = 2 * half;
            let mut a = DMatrix::<C64>::zeros(n, n);
            let mut it = vals.iter();
            for i in 0..n {
                for j in i + 1..n {
                    let &(re, im) = it.next().unwrap();
                    a[(i, j)] = C64::new(re, im);
                    a[(j, i)] = -C64::new(re, im);
                }
            }
            let pf = pfaffian(&a).unwrap();
            let det = determinant(&a);
            let scale = det.norm().max(1e-12);
            prop_assert!((pf * pf - det).norm() / scale < 1e-8);
        }
    }
}
