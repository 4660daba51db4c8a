//! Small dense helpers on row-major slices. Hot loops stay allocation-free;
//! anything spectral goes through nalgebra.

use nalgebra::{DMatrix, SymmetricEigen};

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `out = M v` for a row-major `n x n` matrix.
#[inline]
pub fn mat_vec(m: &[f64], v: &[f64], out: &mut [f64]) {
    let n = v.len();
    for (i, o) in out.iter_mut().enumerate().take(n) {
        *o = dot(&m[i * n..(i + 1) * n], v);
    }
}

/// Eigenvalues of a symmetric row-major matrix, ascending.
pub fn sym_eigenvalues(m: &[f64], n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![m[0]];
    }
    let mat = DMatrix::from_row_slice(n, n, m);
    let mut ev: Vec<f64> = SymmetricEigen::new(mat).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn max_eigenvalue(m: &[f64], n: usize) -> f64 {
    *sym_eigenvalues(m, n).last().expect("n >= 1")
}

pub fn min_eigenvalue(m: &[f64], n: usize) -> f64 {
    sym_eigenvalues(m, n)[0]
}

/// In-place Cholesky factorisation (lower triangle). Returns `false` if the
/// matrix is not numerically positive definite.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    for j in 0..n {
        let mut s = a[j * n + j];
        for k in 0..j {
            s -= a[j * n + k] * a[j * n + k];
        }
        if s <= 0.0 || !s.is_finite() {
            return false;
        }
        let l = s.sqrt();
        a[j * n + j] = l;
        for i in j + 1..n {
            let mut t = a[i * n + j];
            for k in 0..j {
                t -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = t / l;
        }
    }
    true
}

/// Solves `L L^T z = b` given the factor from [`cholesky_in_place`]; `b` is overwritten by `z`.
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}
