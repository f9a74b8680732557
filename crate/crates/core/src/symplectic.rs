//! Metrics, symplectic and complex structures on `R^D`, the orthogonal group
//! action on symplectic structures, and the decomposition of structures
//! adapted to a metric.
//!
//! A symplectic structure `Σ` is adapted to a metric `G` when
//! `J = -G^{-1/2} Σ G^{-1/2}` is orthogonal. Every adapted `Σ` can then be
//! written `Σ = G^{1/2} Rᵀ Σ_st R G^{1/2}` with `R` standard-orthogonal, see
//! [`decompose_adapted`].

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{
    antisymmetry_defect, matrix_sqrt, max_abs, min_eigenvalue, spectral_map, symmetry_defect,
};

/// Tolerance on `max|JᵀJ - 1|` for a structure to count as adapted.
pub const ADAPTED_TOL: f64 = 1e-9;
/// Tolerance on `max|ΛᵀGΛ - G|` (relative to the scale of `G`).
pub const ORTHOGONAL_TOL: f64 = 1e-10;
/// Tolerance on `max|ΛᵀΣΛ - Σ|` for isotropy membership.
pub const ISOTROPY_TOL: f64 = 1e-9;

fn check_even_dim(d: usize) -> Result<()> {
    if d == 0 || d % 2 != 0 {
        return Err(Error::Dimension(format!(
            "dimension must be even and positive, got {d}"
        )));
    }
    Ok(())
}

/// A positive-definite scalar product `G` with cached square root and inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct Metric {
    g: DMatrix<f64>,
    g_sqrt: DMatrix<f64>,
    g_inv_sqrt: DMatrix<f64>,
    g_inv: DMatrix<f64>,
}

impl Metric {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        if !g.is_square() {
            return Err(Error::Dimension(format!(
                "metric must be square, got {}x{}",
                g.nrows(),
                g.ncols()
            )));
        }
        check_even_dim(g.nrows())?;
        let defect = symmetry_defect(&g);
        if defect > 1e-12 * max_abs(&g).max(1.0) {
            return Err(Error::Domain(format!(
                "metric is not symmetric (defect {defect:e})"
            )));
        }
        let g = (&g + g.transpose()) * 0.5;
        let lo = min_eigenvalue(&g);
        if lo <= 0.0 {
            return Err(Error::Domain(format!(
                "metric is not positive definite (eigenvalue {lo:e})"
            )));
        }
        let g_sqrt = matrix_sqrt(&g)?;
        let g_inv_sqrt = spectral_map(&g, |v| 1.0 / v.sqrt());
        let g_inv = spectral_map(&g, |v| 1.0 / v);
        Ok(Self {
            g,
            g_sqrt,
            g_inv_sqrt,
            g_inv,
        })
    }

    pub fn identity(d: usize) -> Result<Self> {
        Self::new(DMatrix::identity(d, d))
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn sqrt(&self) -> &DMatrix<f64> {
        &self.g_sqrt
    }

    pub fn inv_sqrt(&self) -> &DMatrix<f64> {
        &self.g_inv_sqrt
    }

    pub fn inv(&self) -> &DMatrix<f64> {
        &self.g_inv
    }

    pub fn det(&self) -> f64 {
        self.g.determinant()
    }

    /// `xᵀ G y`.
    pub fn inner(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&(&self.g * y))
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.g * c)
    }
}

/// An invertible antisymmetric matrix `Σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticStructure {
    sigma: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
}

impl SymplecticStructure {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if !sigma.is_square() {
            return Err(Error::Dimension(format!(
                "symplectic structure must be square, got {}x{}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        let d = sigma.nrows();
        check_even_dim(d)?;
        let scale = max_abs(&sigma);
        let defect = antisymmetry_defect(&sigma);
        if defect > 1e-12 * scale.max(1.0) {
            return Err(Error::Domain(format!(
                "symplectic structure is not antisymmetric (defect {defect:e})"
            )));
        }
        let sigma = (&sigma - sigma.transpose()) * 0.5;
        let det = sigma.determinant();
        if !(det.abs() > 1e-14 * scale.powi(d as i32)) {
            return Err(Error::Singular(format!(
                "symplectic structure is degenerate (det {det:e})"
            )));
        }
        let sigma_inv = sigma
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Singular("symplectic structure".into()))?;
        let sigma_inv = (&sigma_inv - sigma_inv.transpose()) * 0.5;
        Ok(Self { sigma, sigma_inv })
    }

    /// Builds `Σ` from its inverse `Σ^{-1}`.
    pub fn from_inverse(sigma_inv: DMatrix<f64>) -> Result<Self> {
        let inv = sigma_inv
            .try_inverse()
            .ok_or_else(|| Error::Singular("inverse symplectic structure".into()))?;
        Self::new(inv)
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    pub fn det(&self) -> f64 {
        self.sigma.determinant()
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(&self.sigma * c)
    }
}

/// A linear map `I` with `I² = -1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStructure {
    i_matrix: DMatrix<f64>,
}

impl ComplexStructure {
    pub fn new(i_matrix: DMatrix<f64>) -> Result<Self> {
        if !i_matrix.is_square() {
            return Err(Error::Dimension("complex structure must be square".into()));
        }
        let d = i_matrix.nrows();
        let defect = max_abs(&(&i_matrix * &i_matrix + DMatrix::<f64>::identity(d, d)));
        if defect > 1e-10 {
            return Err(Error::Domain(format!(
                "I² != -1 (defect {defect:e})"
            )));
        }
        Ok(Self { i_matrix })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.i_matrix
    }
}

/// An element `Λ` of the orthogonal group `O(R^D, G)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthogonalMap {
    lambda: DMatrix<f64>,
    lambda_inv: DMatrix<f64>,
    metric: Metric,
}

impl OrthogonalMap {
    pub fn new(lambda: DMatrix<f64>, metric: &Metric) -> Result<Self> {
        if lambda.shape() != metric.matrix().shape() {
            return Err(Error::Dimension(format!(
                "map is {}x{}, metric is {}x{}",
                lambda.nrows(),
                lambda.ncols(),
                metric.dim(),
                metric.dim()
            )));
        }
        let g = metric.matrix();
        let defect = max_abs(&(lambda.transpose() * g * &lambda - g));
        if defect > ORTHOGONAL_TOL * max_abs(g).max(1.0) {
            return Err(Error::Domain(format!(
                "map does not preserve the metric (defect {defect:e})"
            )));
        }
        // Λ^{-1} = G^{-1} Λᵀ G exactly for G-orthogonal Λ.
        let lambda_inv = metric.inv() * lambda.transpose() * g;
        Ok(Self {
            lambda,
            lambda_inv,
            metric: metric.clone(),
        })
    }

    pub fn identity(metric: &Metric) -> Self {
        let d = metric.dim();
        Self {
            lambda: DMatrix::identity(d, d),
            lambda_inv: DMatrix::identity(d, d),
            metric: metric.clone(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn inverse_matrix(&self) -> &DMatrix<f64> {
        &self.lambda_inv
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.lambda.nrows()
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &OrthogonalMap) -> Result<OrthogonalMap> {
        OrthogonalMap::new(&self.lambda * &other.lambda, &self.metric)
    }

    pub fn inverse(&self) -> OrthogonalMap {
        OrthogonalMap {
            lambda: self.lambda_inv.clone(),
            lambda_inv: self.lambda.clone(),
            metric: self.metric.clone(),
        }
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.lambda * x
    }
}

/// Standard metric `I_D` and block-diagonal `Σ_st` with blocks `[[0,-1],[1,0]]`.
pub fn standard_structures(d: usize) -> Result<(Metric, SymplecticStructure)> {
    check_even_dim(d)?;
    Ok((Metric::identity(d)?, SymplecticStructure::new(standard_sigma(d))?))
}

pub(crate) fn standard_sigma(d: usize) -> DMatrix<f64> {
    let mut s = DMatrix::zeros(d, d);
    for k in 0..d / 2 {
        s[(2 * k, 2 * k + 1)] = -1.0;
        s[(2 * k + 1, 2 * k)] = 1.0;
    }
    s
}

fn check_same_dim(sigma: &SymplecticStructure, g: &Metric) -> Result<()> {
    if sigma.dim() != g.dim() {
        return Err(Error::Dimension(format!(
            "symplectic structure has dimension {}, metric {}",
            sigma.dim(),
            g.dim()
        )));
    }
    Ok(())
}

/// `J = -G^{-1/2} Σ G^{-1/2}`.
pub fn normalized_structure(sigma: &SymplecticStructure, g: &Metric) -> Result<DMatrix<f64>> {
    check_same_dim(sigma, g)?;
    Ok(-(g.inv_sqrt() * sigma.matrix() * g.inv_sqrt()))
}

/// `max|JᵀJ - 1|`; zero exactly when `Σ` is adapted to `G`.
pub fn adaptedness_defect(sigma: &SymplecticStructure, g: &Metric) -> Result<f64> {
    let j = normalized_structure(sigma, g)?;
    let d = j.nrows();
    Ok(max_abs(&(j.transpose() * &j - DMatrix::<f64>::identity(d, d))))
}

/// Returns the complex structure `I` with `IᵀGI = G` and `Σ = IᵀG` when `Σ`
/// is adapted to `G`, `None` otherwise.
pub fn is_adapted(sigma: &SymplecticStructure, g: &Metric) -> Result<Option<ComplexStructure>> {
    let j = normalized_structure(sigma, g)?;
    let d = j.nrows();
    let defect = max_abs(&(j.transpose() * &j - DMatrix::<f64>::identity(d, d)));
    if defect > ADAPTED_TOL {
        return Ok(None);
    }
    let i = g.inv_sqrt() * j * g.sqrt();
    Ok(Some(ComplexStructure::new(i)?))
}

/// Outcome of [`decompose_adapted`].
#[derive(Debug, Clone)]
pub struct AdaptedDecomposition {
    /// Standard-orthogonal `R` with `Σ = G^{1/2} Rᵀ Σ_st R G^{1/2}`.
    pub r: OrthogonalMap,
    /// Block orientations `ε_α` of the real canonical form of `J`.
    pub signs: Vec<i8>,
    /// `max|Σ - G^{1/2} Rᵀ Σ_st R G^{1/2}|`.
    pub residual: f64,
}

/// Constructs `R` for an adapted `Σ`.
///
/// `J` is antisymmetric and orthogonal, so `J² = -1` and every plane
/// `span{v, Jv}` is `J`-invariant with a `J`-invariant orthogonal
/// complement. The orthonormal basis is built greedily: `v` is the
/// standard basis vector with the largest component outside the planes
/// already collected (lowest index on ties), and its partner is `±Jv`
/// oriented so that its leading nonzero entry is positive. In that basis
/// `J` is block diagonal with blocks `-ε_α σ`; `S₀` flips the blocks with
/// `ε_α = -1` by `ρ = [[0,1],[1,0]]` and `R = S₀ S`.
pub fn decompose_adapted(sigma: &SymplecticStructure, g: &Metric) -> Result<AdaptedDecomposition> {
    let defect = adaptedness_defect(sigma, g)?;
    if defect > ADAPTED_TOL {
        return Err(Error::Precondition(format!(
            "symplectic structure is not adapted to the metric (|JᵀJ - 1| = {defect:e})"
        )));
    }
    let j = normalized_structure(sigma, g)?;
    let d = j.nrows();

    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(d);
    let mut signs = Vec::with_capacity(d / 2);
    let project_out = |w: &mut DVector<f64>, basis: &[DVector<f64>]| {
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for b in basis {
                let c = b.dot(w);
                w.axpy(-c, b, 1.0);
            }
        }
    };

    for _ in 0..d / 2 {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for k in 0..d {
            let mut e = DVector::zeros(d);
            e[k] = 1.0;
            project_out(&mut e, &basis);
            let n = e.norm();
            if best.as_ref().map_or(true, |(bn, _)| n > *bn + 1e-12) {
                best = Some((n, e));
            }
        }
        let (n, mut v) = best.expect("d > 0");
        if n < 1e-6 {
            return Err(Error::Numerical {
                message: "no complementary direction left while pairing blocks".into(),
                residual: n,
            });
        }
        v /= n;

        let mut w = &j * &v;
        let lead = w
            .iter()
            .copied()
            .find(|c| c.abs() > 1e-8)
            .unwrap_or(1.0);
        let s = if lead > 0.0 { 1.0 } else { -1.0 };
        w *= s;
        basis.push(v);
        project_out(&mut w, &basis);
        let wn = w.norm();
        if wn < 0.5 {
            return Err(Error::Numerical {
                message: "partner vector Jv collapsed during pairing".into(),
                residual: wn,
            });
        }
        w /= wn;
        basis.push(w);
        signs.push(if s > 0.0 { -1 } else { 1 });
    }

    // S has the basis vectors as rows.
    let mut s_mat = DMatrix::zeros(d, d);
    for (row, b) in basis.iter().enumerate() {
        s_mat.set_row(row, &b.transpose());
    }
    let mut s0 = DMatrix::<f64>::identity(d, d);
    for (a, &eps) in signs.iter().enumerate() {
        if eps < 0 {
            s0[(2 * a, 2 * a)] = 0.0;
            s0[(2 * a + 1, 2 * a + 1)] = 0.0;
            s0[(2 * a, 2 * a + 1)] = 1.0;
            s0[(2 * a + 1, 2 * a)] = 1.0;
        }
    }
    let r = s0 * s_mat;
    let rebuilt = g.sqrt() * r.transpose() * standard_sigma(d) * &r * g.sqrt();
    let residual = max_abs(&(sigma.matrix() - rebuilt));
    let scale = max_abs(sigma.matrix()).max(1.0);
    if residual > 1e-9 * scale {
        return Err(Error::Numerical {
            message: "adapted decomposition does not reproduce Σ".into(),
            residual,
        });
    }
    let identity = Metric::identity(d)?;
    Ok(AdaptedDecomposition {
        r: OrthogonalMap::new(r, &identity)?,
        signs,
        residual,
    })
}

/// The left action `(Λ, Σ) ↦ (Λ^{-1})ᵀ Σ Λ^{-1}`, equivalently `Σ^{-1} ↦ Λ Σ^{-1} Λᵀ`.
pub fn orthogonal_action(
    lambda: &OrthogonalMap,
    sigma: &SymplecticStructure,
) -> Result<SymplecticStructure> {
    if lambda.dim() != sigma.dim() {
        return Err(Error::Dimension(format!(
            "map has dimension {}, symplectic structure {}",
            lambda.dim(),
            sigma.dim()
        )));
    }
    let li = lambda.inverse_matrix();
    SymplecticStructure::new(li.transpose() * sigma.matrix() * li)
}

/// Haar-distributed standard orthogonal matrix from the QR factorization of
/// a seeded Gaussian matrix.
pub fn random_standard_orthogonal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let qr = a.qr();
    let mut q = qr.q();
    let r = qr.r();
    for k in 0..d {
        if r[(k, k)] < 0.0 {
            let mut col = q.column_mut(k);
            col.neg_mut();
        }
    }
    q
}

/// `Λ = G^{-1/2} Q G^{1/2}` with `Q` a seeded random standard orthogonal matrix.
pub fn random_orthogonal(g: &Metric, seed: u64) -> OrthogonalMap {
    let q = random_standard_orthogonal(g.dim(), seed);
    let lambda = g.inv_sqrt() * q * g.sqrt();
    let lambda_inv = g.inv() * lambda.transpose() * g.matrix();
    OrthogonalMap {
        lambda,
        lambda_inv,
        metric: g.clone(),
    }
}

/// Membership of `Λ` in the isotropy group `O(R^D,G) ∩ Sp(R^D,Σ)`.
pub fn symmetry_group_check(lambda: &OrthogonalMap, sigma: &SymplecticStructure) -> bool {
    if lambda.dim() != sigma.dim() {
        return false;
    }
    let l = lambda.matrix();
    let defect = max_abs(&(l.transpose() * sigma.matrix() * l - sigma.matrix()));
    defect <= ISOTROPY_TOL * max_abs(sigma.matrix()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_four_dim_layout() {
        let (g, s) = standard_structures(4).unwrap();
        assert_eq!(g.matrix(), &DMatrix::<f64>::identity(4, 4));
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, -1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0,
            ],
        );
        assert_eq!(s.matrix(), &expected);
    }

    #[test]
    fn standard_two_dim_and_odd() {
        let (_, s) = standard_structures(2).unwrap();
        assert_eq!(s.matrix(), &DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]));
        assert!(matches!(standard_structures(3), Err(Error::Dimension(_))));
        assert!(matches!(standard_structures(0), Err(Error::Dimension(_))));
    }

    #[test]
    fn standard_is_adapted_with_minus_sigma() {
        let (g, s) = standard_structures(4).unwrap();
        let i = is_adapted(&s, &g).unwrap().expect("adapted");
        assert!(max_abs(&(i.matrix() + s.matrix())) < 1e-15);
        let doubled = s.scaled(2.0).unwrap();
        assert!(is_adapted(&doubled, &g).unwrap().is_none());
    }

    #[test]
    fn decompose_standard_is_identity() {
        let (g, s) = standard_structures(4).unwrap();
        let dec = decompose_adapted(&s, &g).unwrap();
        assert!(dec.residual < 1e-12);
        assert_eq!(dec.signs, vec![1, 1]);
        let r = dec.r.matrix();
        assert!(max_abs(&(r.transpose() * standard_sigma(4) * r - standard_sigma(4))) < 1e-12);
    }

    #[test]
    fn decompose_scaled_two_dim() {
        let g = Metric::new(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0])).unwrap();
        let s = SymplecticStructure::new(DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]))
            .unwrap();
        let dec = decompose_adapted(&s, &g).unwrap();
        assert!(dec.residual < 1e-12);
    }

    #[test]
    fn decompose_negative_orientation_uses_flip() {
        let (g, s) = standard_structures(2).unwrap();
        let neg = s.scaled(-1.0).unwrap();
        let dec = decompose_adapted(&neg, &g).unwrap();
        assert_eq!(dec.signs, vec![-1]);
        assert!(dec.residual < 1e-12);
        // R contains the ρ flip: its determinant is -1.
        assert!((dec.r.matrix().determinant() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn decompose_rejects_non_adapted() {
        let (g, s) = standard_structures(2).unwrap();
        let bad = s.scaled(2.0).unwrap();
        assert!(matches!(
            decompose_adapted(&bad, &g),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn random_orthogonal_is_deterministic_and_orthogonal() {
        let g = Metric::new(DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0])).unwrap();
        let a = random_orthogonal(&g, 7);
        let b = random_orthogonal(&g, 7);
        assert_eq!(a.matrix(), b.matrix());
        let l = a.matrix();
        assert!(max_abs(&(l.transpose() * g.matrix() * l - g.matrix())) < 1e-10);

        let id = Metric::identity(4).unwrap();
        let q = random_orthogonal(&id, 3);
        let qm = q.matrix();
        assert!(max_abs(&(qm.transpose() * qm - DMatrix::<f64>::identity(4, 4))) < 1e-12);
    }

    #[test]
    fn action_identity_and_composition() {
        let g = Metric::new(DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0])).unwrap();
        let (_, s) = standard_structures(2).unwrap();
        let id = OrthogonalMap::identity(&g);
        assert_eq!(orthogonal_action(&id, &s).unwrap().matrix(), s.matrix());
        let l = random_orthogonal(&g, 1);
        let m = random_orthogonal(&g, 2);
        let lm = l.compose(&m).unwrap();
        let direct = orthogonal_action(&lm, &s).unwrap();
        let nested = orthogonal_action(&l, &orthogonal_action(&m, &s).unwrap()).unwrap();
        assert!(max_abs(&(direct.matrix() - nested.matrix())) < 1e-12);
    }

    #[test]
    fn isotropy_membership() {
        let (g, s) = standard_structures(4).unwrap();
        assert!(symmetry_group_check(&OrthogonalMap::identity(&g), &s));

        let (c, sn) = (0.7_f64.cos(), 0.7_f64.sin());
        let mut rot13 = DMatrix::<f64>::identity(4, 4);
        rot13[(0, 0)] = c;
        rot13[(0, 2)] = -sn;
        rot13[(2, 0)] = sn;
        rot13[(2, 2)] = c;
        let rot13 = OrthogonalMap::new(rot13, &g).unwrap();
        assert!(!symmetry_group_check(&rot13, &s));

        let mut blocks = DMatrix::<f64>::zeros(4, 4);
        for k in 0..2 {
            blocks[(2 * k, 2 * k)] = c;
            blocks[(2 * k, 2 * k + 1)] = -sn;
            blocks[(2 * k + 1, 2 * k)] = sn;
            blocks[(2 * k + 1, 2 * k + 1)] = c;
        }
        let blocks = OrthogonalMap::new(blocks, &g).unwrap();
        assert!(symmetry_group_check(&blocks, &s));
    }

    #[test]
    fn orthogonal_map_rejects_non_orthogonal() {
        let g = Metric::identity(2).unwrap();
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        assert!(matches!(OrthogonalMap::new(m, &g), Err(Error::Domain(_))));
    }
}
