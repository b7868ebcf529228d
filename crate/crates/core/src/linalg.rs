//! Small dense helpers shared by the assembly, verification and simulation code.
//!
//! The eigenvalue routine here is a plain cyclic Jacobi sweep. It is used for
//! every posterior certificate check and is deliberately independent of the
//! factorizations the interior-point solver relies on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row-major nested representation used by the JSON formats.
pub type Rows = Vec<Vec<f64>>;

pub fn to_rows(m: &DMatrix<f64>) -> Rows {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| m[(r, c)]).collect())
        .collect()
}

/// Builds a matrix from nested rows, rejecting ragged or non-finite input.
pub fn from_rows(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    for (r, row) in rows.iter().enumerate() {
        if row.len() != nc {
            return Err(Error::Field {
                field: name.to_string(),
                message: format!("row {r} has {} entries, row 0 has {nc}", row.len()),
            });
        }
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::Field {
                field: name.to_string(),
                message: format!("non-finite entry {v}"),
            });
        }
    }
    Ok(DMatrix::from_fn(nr, nc, |r, c| rows[r][c]))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
///
/// A slightly asymmetric input is treated as its symmetric part.
pub fn jacobi_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    assert_eq!(n, m.ncols(), "jacobi_eigenvalues needs a square matrix");
    let mut a = symmetrize(m);
    let scale = max_abs(&a);
    if n == 0 {
        return Vec::new();
    }
    if scale == 0.0 {
        return vec![0.0; n];
    }
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off.sqrt() <= 1e-17 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
            }
        }
    }
    let mut eig: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    eig.sort_by(|x, y| x.total_cmp(y));
    eig
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    jacobi_eigenvalues(m)
        .last()
        .copied()
        .unwrap_or(f64::NEG_INFINITY)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    jacobi_eigenvalues(m)
        .first()
        .copied()
        .unwrap_or(f64::INFINITY)
}

/// 1-norm condition estimate from an explicit inverse. Fine for the tiny
/// matrices this crate inverts.
pub fn condition_1(m: &DMatrix<f64>, inv: &DMatrix<f64>) -> f64 {
    norm_1(m) * norm_1(inv)
}

fn norm_1(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols())
        .map(|c| m.column(c).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Solves `m · out = rhs` by LU with partial pivoting, rejecting matrices whose
/// condition estimate exceeds `max_condition`.
pub fn solve_guarded(
    m: &DMatrix<f64>,
    rhs: &DVector<f64>,
    max_condition: f64,
    what: &str,
) -> Result<DVector<f64>> {
    let inv = inverse_guarded(m, max_condition, what)?;
    Ok(inv * rhs)
}

pub fn inverse_guarded(m: &DMatrix<f64>, max_condition: f64, what: &str) -> Result<DMatrix<f64>> {
    let lu = m.clone().lu();
    let inv = lu.try_inverse().ok_or_else(|| Error::Singular {
        what: what.to_string(),
        condition: f64::INFINITY,
    })?;
    let cond = condition_1(m, &inv);
    if !cond.is_finite() || cond > max_condition {
        return Err(Error::Singular {
            what: what.to_string(),
            condition: cond,
        });
    }
    Ok(inv)
}

/// Orthonormal basis (columns) of the row space of `m`, with numerical rank
/// decided relative to the largest singular value. Each basis vector is
/// oriented so that its largest-magnitude component is positive.
pub fn row_space_basis(m: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let ncols = m.ncols();
    if m.nrows() == 0 || max_abs(m) == 0.0 {
        return DMatrix::zeros(ncols, 0);
    }
    // Row space of m = range of mᵀm; its eigenvectors are the right singular vectors.
    let gram = m.transpose() * m;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let top = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let mut idx: Vec<usize> = (0..ncols)
        .filter(|&i| eig.eigenvalues[i] > top * rel_tol * rel_tol)
        .collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut basis = DMatrix::zeros(ncols, idx.len());
    for (c, &i) in idx.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        let pivot = v
            .iter()
            .cloned()
            .fold(0.0_f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
        if pivot < 0.0 {
            v = -v;
        }
        basis.set_column(c, &v);
    }
    basis
}
