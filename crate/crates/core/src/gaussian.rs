//! Closed-form calculus on complex multivariate Gaussians.
//!
//! Two conventions live here. [`GaussianFunction`] is the function
//! `c·exp(-uᵀAu + bᵀu)` used as a field/test-function class, and
//! [`QuadraticIntegrand`] is `p·exp(-½uᵀQu + Lᵀu)` used for integration.
//! The conversion between them is `Q = 2A`, `L = b`.
//!
//! `det(Q)^{-1/2}` is taken on the branch continuous from real
//! positive-definite `Q`, see [`log_det_branch`].

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, symmetrize_c};

const C0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const C1: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Relative tolerance for the positive-definiteness check of `Re Q`.
pub const PD_REL_TOL: f64 = 1e-12;

/// `c·exp(-uᵀAu + bᵀu)` with `A` complex symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFunction {
    coeff: Complex64,
    quad: DMatrix<Complex64>,
    lin: DVector<Complex64>,
}

impl GaussianFunction {
    pub fn new(coeff: Complex64, quad: DMatrix<Complex64>, lin: DVector<Complex64>) -> Result<Self> {
        if !quad.is_square() || quad.nrows() != lin.len() {
            return Err(Error::Dimension(format!(
                "Gaussian with {}x{} quadratic part and {}-vector linear part",
                quad.nrows(),
                quad.ncols(),
                lin.len()
            )));
        }
        Ok(Self {
            coeff,
            quad: symmetrize_c(&quad),
            lin,
        })
    }

    pub fn real(coeff: f64, quad: &DMatrix<f64>, lin: &DVector<f64>) -> Result<Self> {
        Self::new(
            Complex64::new(coeff, 0.0),
            quad.map(|v| Complex64::new(v, 0.0)),
            lin.map(|v| Complex64::new(v, 0.0)),
        )
    }

    /// `exp(-a|u|²)` in `n` variables.
    pub fn isotropic(n: usize, a: f64) -> Self {
        Self {
            coeff: C1,
            quad: DMatrix::identity(n, n) * Complex64::new(a, 0.0),
            lin: DVector::zeros(n),
        }
    }

    /// The constant function 1.
    pub fn one(n: usize) -> Self {
        Self {
            coeff: C1,
            quad: DMatrix::zeros(n, n),
            lin: DVector::zeros(n),
        }
    }

    pub fn dim(&self) -> usize {
        self.lin.len()
    }

    pub fn coeff(&self) -> Complex64 {
        self.coeff
    }

    pub fn quad(&self) -> &DMatrix<Complex64> {
        &self.quad
    }

    pub fn lin(&self) -> &DVector<Complex64> {
        &self.lin
    }

    pub fn eval(&self, x: &DVector<f64>) -> Complex64 {
        let xc = x.map(|v| Complex64::new(v, 0.0));
        self.eval_complex(&xc)
    }

    pub fn eval_complex(&self, x: &DVector<Complex64>) -> Complex64 {
        let q = (x.transpose() * &self.quad * x)[(0, 0)];
        let l = (self.lin.transpose() * x)[(0, 0)];
        self.coeff * (l - q).exp()
    }

    pub fn is_integrable(&self) -> bool {
        is_positive_definite(&self.quad.map(|z| z.re))
    }

    /// Whether `c`, `A` and `b` are all real.
    pub fn is_real(&self, tol: f64) -> bool {
        self.coeff.im.abs() <= tol * self.coeff.norm().max(1.0)
            && self.quad.iter().all(|z| z.im.abs() <= tol)
            && self.lin.iter().all(|z| z.im.abs() <= tol)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self {
            coeff: self.coeff * s,
            ..self.clone()
        }
    }

    /// `u ↦ f(T u)` for a real linear map `T`.
    pub fn compose_linear(&self, t: &DMatrix<f64>) -> Result<Self> {
        if t.nrows() != self.dim() {
            return Err(Error::Dimension(format!(
                "cannot compose {}-dim Gaussian with a {}x{} map",
                self.dim(),
                t.nrows(),
                t.ncols()
            )));
        }
        let tc = t.map(|v| Complex64::new(v, 0.0));
        Self::new(
            self.coeff,
            tc.transpose() * &self.quad * &tc,
            tc.transpose() * &self.lin,
        )
    }

    pub fn to_integrand(&self) -> QuadraticIntegrand {
        QuadraticIntegrand {
            q: &self.quad * Complex64::new(2.0, 0.0),
            l: self.lin.clone(),
            prefactor: self.coeff,
        }
    }

    pub fn from_integrand(q: &QuadraticIntegrand) -> Self {
        Self {
            coeff: q.prefactor,
            quad: symmetrize_c(&q.q) * Complex64::new(0.5, 0.0),
            lin: q.l.clone(),
        }
    }
}

/// Pointwise product: coefficients multiply, quadratic and linear parts add.
pub fn multiply(f: &GaussianFunction, g: &GaussianFunction) -> Result<GaussianFunction> {
    if f.dim() != g.dim() {
        return Err(Error::Dimension(format!(
            "cannot multiply Gaussians of dimension {} and {}",
            f.dim(),
            g.dim()
        )));
    }
    Ok(GaussianFunction {
        coeff: f.coeff * g.coeff,
        quad: &f.quad + &g.quad,
        lin: &f.lin + &g.lin,
    })
}

/// `∫ f(u) dⁿu`.
pub fn integrate(f: &GaussianFunction) -> Result<Complex64> {
    gaussian_integral(&f.to_integrand())
}

/// The integrand `w ↦ Π_k f_k(P_k w)` over `w ∈ R^n` for real linear maps
/// `P_k : R^n → R^{dim f_k}`.
pub fn pullback_product(
    n: usize,
    factors: &[(&GaussianFunction, &DMatrix<f64>)],
) -> Result<QuadraticIntegrand> {
    let mut out = QuadraticIntegrand::zeros(n);
    for (f, p) in factors {
        if p.nrows() != f.dim() || p.ncols() != n {
            return Err(Error::Dimension(format!(
                "pullback map is {}x{}, expected {}x{}",
                p.nrows(),
                p.ncols(),
                f.dim(),
                n
            )));
        }
        let pc = p.map(|v| Complex64::new(v, 0.0));
        out.q += pc.transpose() * &f.quad * &pc * Complex64::new(2.0, 0.0);
        out.l += pc.transpose() * &f.lin;
        out.prefactor *= f.coeff;
    }
    out.q = symmetrize_c(&out.q);
    Ok(out)
}

/// `p·exp(-½uᵀQu + Lᵀu)` with `Q` complex symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticIntegrand {
    pub q: DMatrix<Complex64>,
    pub l: DVector<Complex64>,
    pub prefactor: Complex64,
}

impl QuadraticIntegrand {
    pub fn new(q: DMatrix<Complex64>, l: DVector<Complex64>, prefactor: Complex64) -> Result<Self> {
        if !q.is_square() || q.nrows() != l.len() {
            return Err(Error::Dimension(format!(
                "integrand with {}x{} quadratic form and {}-vector linear term",
                q.nrows(),
                q.ncols(),
                l.len()
            )));
        }
        Ok(Self {
            q: symmetrize_c(&q),
            l,
            prefactor,
        })
    }

    pub fn zeros(k: usize) -> Self {
        Self {
            q: DMatrix::zeros(k, k),
            l: DVector::zeros(k),
            prefactor: C1,
        }
    }

    pub fn dim(&self) -> usize {
        self.l.len()
    }

    pub fn eval(&self, u: &DVector<f64>) -> Complex64 {
        let uc = u.map(|v| Complex64::new(v, 0.0));
        let quad = (uc.transpose() * &self.q * &uc)[(0, 0)];
        let lin = (self.l.transpose() * &uc)[(0, 0)];
        self.prefactor * (lin - quad * 0.5).exp()
    }

    /// Fixes the variables at `indices` to `values`, leaving an integrand
    /// over the remaining variables (in their original order).
    pub fn condition(&self, indices: &[usize], values: &DVector<f64>) -> Result<QuadraticIntegrand> {
        let (fixed, free) = split_indices(self.dim(), indices)?;
        if values.len() != fixed.len() {
            return Err(Error::Dimension(format!(
                "{} values for {} fixed variables",
                values.len(),
                fixed.len()
            )));
        }
        let v = values.map(|x| Complex64::new(x, 0.0));
        let q_ff = self.q.select_rows(&free).select_columns(&free);
        let q_fv = self.q.select_rows(&free).select_columns(&fixed);
        let q_vv = self.q.select_rows(&fixed).select_columns(&fixed);
        let l_f = self.l.select_rows(&free);
        let l_v = self.l.select_rows(&fixed);
        let exponent = (l_v.transpose() * &v)[(0, 0)] - (v.transpose() * &q_vv * &v)[(0, 0)] * 0.5;
        Ok(QuadraticIntegrand {
            q: q_ff,
            l: l_f - q_fv * v,
            prefactor: self.prefactor * exponent.exp(),
        })
    }
}

fn split_indices(n: usize, indices: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut mask = vec![false; n];
    for &i in indices {
        if i >= n {
            return Err(Error::Dimension(format!("index {i} out of range for {n} variables")));
        }
        if mask[i] {
            return Err(Error::Dimension(format!("index {i} listed twice")));
        }
        mask[i] = true;
    }
    let selected: Vec<usize> = (0..n).filter(|&i| mask[i]).collect();
    let rest: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
    Ok((selected, rest))
}

fn is_positive_definite(re: &DMatrix<f64>) -> bool {
    check_positive_definite(re).is_ok()
}

/// `ln det(Q)` on the branch continuous from real positive-definite `Q`;
/// fails with [`Error::Divergent`] unless `Re Q ≻ 0`.
///
/// Uses the unpivoted `Q = L·diag(d)·Lᵀ`: every Schur complement of a
/// matrix with positive-definite real part again has positive-definite real
/// part, so each pivot `d_k` stays in the right half-plane along
/// `A + itB`, `t ∈ [0, 1]`, and the sum of principal logarithms is the
/// continuous branch.
pub fn log_det_branch(q: &DMatrix<Complex64>) -> Result<Complex64> {
    let n = q.nrows();
    if n == 0 {
        return Ok(C0);
    }
    check_positive_definite(&q.map(|z| z.re))?;
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    let mut d = Vec::with_capacity(n);
    let mut acc = C0;
    for k in 0..n {
        let mut dk = q[(k, k)];
        for j in 0..k {
            dk -= l[(k, j)] * l[(k, j)] * d[j];
        }
        if !(dk.re > 0.0) {
            return Err(Error::Numerical {
                message: "LDLᵀ pivot left the right half-plane".into(),
                residual: dk.re,
            });
        }
        for i in k + 1..n {
            let mut s = q[(i, k)];
            for j in 0..k {
                s -= l[(i, j)] * l[(k, j)] * d[j];
            }
            l[(i, k)] = s / dk;
        }
        acc += dk.ln();
        d.push(dk);
    }
    Ok(acc)
}

/// Cholesky-based positive-definiteness test with a relative pivot floor;
/// the smallest eigenvalue is reported on failure.
fn check_positive_definite(re: &DMatrix<f64>) -> Result<()> {
    if re.nrows() == 0 {
        return Ok(());
    }
    let top = re.diagonal().amax();
    let ok = re.clone().cholesky().is_some_and(|c| {
        c.l_dirty().diagonal().iter().all(|v| v * v > PD_REL_TOL * top)
    });
    if ok {
        Ok(())
    } else {
        Err(Error::Divergent {
            eigenvalue: sym_eigen(re).0[0],
        })
    }
}

fn solve(q: &DMatrix<Complex64>, rhs: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    q.clone()
        .lu()
        .solve(rhs)
        .ok_or_else(|| Error::Singular("quadratic form".into()))
}

/// `p · (2π)^{k/2} · det(Q)^{-1/2} · exp(½ LᵀQ^{-1}L)`.
pub fn gaussian_integral(q: &QuadraticIntegrand) -> Result<Complex64> {
    Ok(q.prefactor * log_gaussian_integral_unscaled(q)?.exp())
}

/// Logarithm of the integral without the prefactor.
pub fn log_gaussian_integral_unscaled(q: &QuadraticIntegrand) -> Result<Complex64> {
    let k = q.dim();
    if k == 0 {
        return Ok(C0);
    }
    let logdet = log_det_branch(&q.q)?;
    let l = DMatrix::from_column_slice(k, 1, q.l.as_slice());
    let x = solve(&q.q, &l)?;
    let quad = (l.transpose() * x)[(0, 0)];
    Ok(Complex64::new(0.5 * k as f64 * (2.0 * PI).ln(), 0.0) - logdet * 0.5 + quad * 0.5)
}

/// Integrates out the variables listed in `integrate_out` by Schur-complement
/// reduction; the result is an integrand over the remaining variables in
/// their original order.
pub fn partial_gaussian_integral(
    q: &QuadraticIntegrand,
    integrate_out: &[usize],
) -> Result<QuadraticIntegrand> {
    let (u, v) = split_indices(q.dim(), integrate_out)?;
    if u.is_empty() {
        return Ok(q.clone());
    }
    let q_uu = q.q.select_rows(&u).select_columns(&u);
    let q_uv = q.q.select_rows(&u).select_columns(&v);
    let q_vv = q.q.select_rows(&v).select_columns(&v);
    let l_u = q.l.select_rows(&u);
    let l_v = q.l.select_rows(&v);

    let logdet = log_det_branch(&q_uu)?;
    let mut rhs = DMatrix::zeros(u.len(), v.len() + 1);
    rhs.view_mut((0, 0), (u.len(), v.len())).copy_from(&q_uv);
    rhs.set_column(v.len(), &l_u);
    let sol = solve(&q_uu, &rhs)?;
    let inv_q_uv = sol.columns(0, v.len()).into_owned();
    let inv_l_u = sol.column(v.len()).into_owned();

    let new_q = &q_vv - q_uv.transpose() * &inv_q_uv;
    let new_l = &l_v - q_uv.transpose() * &inv_l_u;
    let gain = Complex64::new(0.5 * u.len() as f64 * (2.0 * PI).ln(), 0.0) - logdet * 0.5
        + (l_u.transpose() * &inv_l_u)[(0, 0)] * 0.5;
    Ok(QuadraticIntegrand {
        q: symmetrize_c(&new_q),
        l: new_l,
        prefactor: q.prefactor * gain.exp(),
    })
}

/// Zeroth, first and second moments of a convergent integrand:
/// `∫f`, `∫u f / ∫f` and `∫u uᵀ f / ∫f`.
#[derive(Debug, Clone)]
pub struct Moments {
    pub total: Complex64,
    pub mean: DVector<Complex64>,
    pub second: DMatrix<Complex64>,
}

impl Moments {
    /// `∫ (uᵀHu + hᵀu + h0) f(u) du`.
    pub fn quadratic_expectation(
        &self,
        h: &DMatrix<Complex64>,
        lin: &DVector<Complex64>,
        constant: Complex64,
    ) -> Complex64 {
        let tr = (h.transpose().component_mul(&self.second)).sum();
        let l = (lin.transpose() * &self.mean)[(0, 0)];
        self.total * (tr + l + constant)
    }
}

pub fn gaussian_moments(q: &QuadraticIntegrand) -> Result<Moments> {
    let k = q.dim();
    let total = gaussian_integral(q)?;
    let mut rhs = DMatrix::<Complex64>::identity(k, k + 1);
    rhs.set_column(k, &q.l);
    let sol = solve(&q.q, &rhs)?;
    let cov = sol.columns(0, k).into_owned();
    let mean = sol.column(k).into_owned();
    let second = symmetrize_c(&cov) + &mean * mean.transpose();
    Ok(Moments {
        total,
        mean,
        second,
    })
}
