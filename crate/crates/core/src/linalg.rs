//! Small dense linear-algebra helpers shared by the modules.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn max_abs_c(m: &DMatrix<Complex64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.norm()))
}

pub fn symmetry_defect(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m - m.transpose()))
}

pub fn antisymmetry_defect(m: &DMatrix<f64>) -> f64 {
    max_abs(&(m + m.transpose()))
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }
    (values, vectors)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    sym_eigen(m).0[0]
}

/// Applies `f` to the spectrum of a symmetric matrix.
pub fn spectral_map(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let (values, vectors) = sym_eigen(m);
    let n = m.nrows();
    let mut scaled = vectors.clone();
    for (j, &lam) in values.iter().enumerate() {
        let s = f(lam);
        for i in 0..n {
            scaled[(i, j)] *= s;
        }
    }
    let out = scaled * vectors.transpose();
    (&out + out.transpose()) * 0.5
}

/// Symmetric positive-definite square root via the symmetric eigendecomposition.
pub fn matrix_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "matrix_sqrt needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let scale = max_abs(m).max(1.0);
    let defect = symmetry_defect(m);
    if defect > 1e-12 * scale {
        return Err(Error::Domain(format!(
            "matrix_sqrt input is not symmetric (defect {defect:e})"
        )));
    }
    let lo = min_eigenvalue(m);
    if lo <= 0.0 {
        return Err(Error::Domain(format!(
            "matrix_sqrt input is not positive definite (eigenvalue {lo:e})"
        )));
    }
    Ok(spectral_map(m, f64::sqrt))
}

pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

pub fn symmetrize_c(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (m + m.transpose()) * Complex64::new(0.5, 0.0)
}

/// Kronecker product `coeff ⊗ block` for a real coefficient pattern and a complex block.
pub fn kron(coeff: &DMatrix<f64>, block: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let (br, bc) = block.shape();
    let mut out = DMatrix::zeros(coeff.nrows() * br, coeff.ncols() * bc);
    for i in 0..coeff.nrows() {
        for j in 0..coeff.ncols() {
            let c = coeff[(i, j)];
            if c == 0.0 {
                continue;
            }
            let mut view = out.view_mut((i * br, j * bc), (br, bc));
            view += block * Complex64::new(c, 0.0);
        }
    }
    out
}
