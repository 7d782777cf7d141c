//! Small dense complex linear algebra used by the recovery paths.
//!
//! Systems here are at most tens of rows (branch counts, selected supports),
//! so everything is written directly: modified Gram-Schmidt QR for least
//! squares and a partially pivoted LDU factorization for matrix inversion.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Frobenius norm of a complex matrix.
pub fn frobenius_norm(m: &Array2<Complex64>) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Euclidean norms of every column.
pub fn column_norms(m: &Array2<Complex64>) -> Array1<f64> {
    let (rows, cols) = m.dim();
    let mut norms = Array1::zeros(cols);
    for j in 0..cols {
        let mut acc = 0.0;
        for i in 0..rows {
            acc += m[[i, j]].norm_sqr();
        }
        norms[j] = acc.sqrt();
    }
    norms
}

/// Conjugate transpose.
pub fn hermitian(m: &Array2<Complex64>) -> Array2<Complex64> {
    let (rows, cols) = m.dim();
    Array2::from_shape_fn((cols, rows), |(i, j)| m[[j, i]].conj())
}

/// Least squares solve of `a x = b` for tall-or-square `a` via modified
/// Gram-Schmidt QR with one re-orthogonalization pass.
///
/// Returns the coefficient matrix `x` with one column per column of `b`.
pub fn lstsq_qr(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let (rows, cols) = a.dim();
    if b.nrows() != rows {
        return Err(Error::ShapeMismatch {
            expected: format!("{} rows", rows),
            got: format!("{} rows", b.nrows()),
            context: "lstsq_qr right-hand side".into(),
        });
    }
    if cols > rows {
        return Err(Error::Validation(format!(
            "lstsq_qr expects rows >= cols, got {}x{}",
            rows, cols
        )));
    }

    let mut q = a.clone();
    let mut r = Array2::<Complex64>::zeros((cols, cols));
    for j in 0..cols {
        // Two MGS passes to keep Q orthonormal at these sizes.
        for _pass in 0..2 {
            for i in 0..j {
                let mut proj = Complex64::new(0.0, 0.0);
                for k in 0..rows {
                    proj += q[[k, i]].conj() * q[[k, j]];
                }
                r[[i, j]] += proj;
                for k in 0..rows {
                    let qi = q[[k, i]];
                    q[[k, j]] -= proj * qi;
                }
            }
        }
        let norm = (0..rows).map(|k| q[[k, j]].norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::Singular(format!(
                "column {} dependent in least-squares system",
                j
            )));
        }
        r[[j, j]] = Complex64::new(norm, 0.0);
        for k in 0..rows {
            q[[k, j]] /= norm;
        }
    }

    // x = R^{-1} Q^H b, column by column.
    let rhs_cols = b.ncols();
    let mut x = Array2::<Complex64>::zeros((cols, rhs_cols));
    for c in 0..rhs_cols {
        let mut y = vec![Complex64::new(0.0, 0.0); cols];
        for i in 0..cols {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..rows {
                acc += q[[k, i]].conj() * b[[k, c]];
            }
            y[i] = acc;
        }
        for i in (0..cols).rev() {
            let mut acc = y[i];
            for k in i + 1..cols {
                acc -= r[[i, k]] * x[[k, c]];
            }
            x[[i, c]] = acc / r[[i, i]];
        }
    }
    Ok(x)
}

/// Partially pivoted LDU factorization of a square matrix: `P a = L D U`
/// with unit-diagonal `L` and `U` and diagonal `D`.
pub struct Ldu {
    /// Row permutation: `perm[i]` is the source row moved to position `i`.
    pub perm: Vec<usize>,
    /// Unit lower triangular factor.
    pub l: Array2<Complex64>,
    /// Diagonal factor.
    pub d: Vec<Complex64>,
    /// Unit upper triangular factor.
    pub u: Array2<Complex64>,
}

/// Pivot magnitudes below this are treated as zero.
pub const LDU_PIVOT_TOL: f64 = 1e-12;

/// Factorize `P a = L D U` with partial pivoting.
pub fn ldu_factor(a: &Array2<Complex64>) -> Result<Ldu> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            got: format!("{}x{}", a.nrows(), a.ncols()),
            context: "ldu_factor".into(),
        });
    }
    let mut work = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();

    for k in 0..n {
        // Partial pivot: largest magnitude in column k at or below the diagonal.
        let mut pivot_row = k;
        let mut pivot_mag = work[[k, k]].norm();
        for i in k + 1..n {
            let mag = work[[i, k]].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = i;
            }
        }
        if pivot_mag < LDU_PIVOT_TOL {
            return Err(Error::Singular(format!(
                "zero pivot at elimination step {} (|pivot| = {:.3e})",
                k, pivot_mag
            )));
        }
        if pivot_row != k {
            perm.swap(k, pivot_row);
            for j in 0..n {
                let tmp = work[[k, j]];
                work[[k, j]] = work[[pivot_row, j]];
                work[[pivot_row, j]] = tmp;
            }
        }
        let pivot = work[[k, k]];
        for i in k + 1..n {
            let factor = work[[i, k]] / pivot;
            work[[i, k]] = factor;
            for j in k + 1..n {
                let sub = factor * work[[k, j]];
                work[[i, j]] -= sub;
            }
        }
    }

    // Split the in-place LU into unit-L, D and unit-U.
    let mut l = Array2::<Complex64>::eye(n);
    let mut u = Array2::<Complex64>::eye(n);
    let mut d = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        d[i] = work[[i, i]];
        for j in 0..i {
            l[[i, j]] = work[[i, j]];
        }
        for j in i + 1..n {
            u[[i, j]] = work[[i, j]] / work[[i, i]];
        }
    }
    Ok(Ldu { perm, l, d, u })
}

impl Ldu {
    /// Solve `a x = b` using the factors: `x = U^{-1} D^{-1} L^{-1} P b`.
    pub fn solve(&self, b: &Array1<Complex64>) -> Array1<Complex64> {
        let n = self.d.len();
        // Apply P.
        let mut y: Vec<Complex64> = (0..n).map(|i| b[self.perm[i]]).collect();
        // Forward substitution with unit L.
        for i in 0..n {
            for j in 0..i {
                let sub = self.l[[i, j]] * y[j];
                y[i] -= sub;
            }
        }
        // Diagonal.
        for i in 0..n {
            y[i] /= self.d[i];
        }
        // Back substitution with unit U.
        for i in (0..n).rev() {
            for j in i + 1..n {
                let sub = self.u[[i, j]] * y[j];
                y[i] -= sub;
            }
        }
        Array1::from_vec(y)
    }

    /// Invert the factored matrix column by column.
    pub fn inverse(&self) -> Array2<Complex64> {
        let n = self.d.len();
        let mut inv = Array2::<Complex64>::zeros((n, n));
        for k in 0..n {
            let mut e = Array1::<Complex64>::zeros(n);
            e[k] = Complex64::new(1.0, 0.0);
            let col = self.solve(&e);
            for i in 0..n {
                inv[[i, k]] = col[i];
            }
        }
        inv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_complex(rows: usize, cols: usize, seed: u64) -> Array2<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((rows, cols), |_| {
            Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    #[test]
    fn lstsq_recovers_exact_solution() {
        let a = random_complex(6, 3, 1);
        let x_true = random_complex(3, 2, 2);
        let b = a.dot(&x_true);
        let x = lstsq_qr(&a, &b).unwrap();
        for (got, want) in x.iter().zip(x_true.iter()) {
            assert!((got - want).norm() < 1e-10);
        }
    }

    #[test]
    fn lstsq_rejects_dependent_columns() {
        let mut a = random_complex(5, 3, 3);
        for i in 0..5 {
            a[[i, 2]] = a[[i, 0]] + a[[i, 1]];
        }
        assert!(matches!(
            lstsq_qr(&a, &random_complex(5, 1, 4)),
            Err(Error::Singular(_))
        ));
    }

    #[test]
    fn ldu_inverse_matches_identity() {
        let g = random_complex(6, 6, 5);
        let fac = ldu_factor(&g).unwrap();
        let inv = fac.inverse();
        let prod = g.dot(&inv);
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((prod[[i, j]] - Complex64::new(want, 0.0)).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn ldu_reconstructs_permuted_input() {
        let g = random_complex(5, 5, 7);
        let fac = ldu_factor(&g).unwrap();
        let n = 5;
        let mut d = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            d[[i, i]] = fac.d[i];
        }
        let ldu = fac.l.dot(&d).dot(&fac.u);
        for i in 0..n {
            for j in 0..n {
                assert!((ldu[[i, j]] - g[[fac.perm[i], j]]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn ldu_rejects_singular_matrix() {
        let a = array![
            [Complex64::new(1.0, 0.0), Complex64::new(2.0, 0.0)],
            [Complex64::new(2.0, 0.0), Complex64::new(4.0, 0.0)],
        ];
        assert!(matches!(ldu_factor(&a), Err(Error::Singular(_))));
    }
}
