//! The classical action of the harmonic scalar model on real Gaussian
//! fields
//!
//! ```text
//! S(φ) = ∫ ½G^{-1}_{μν}∂_μφ∂_νφ + (Ω²/2)G^{-1}_{μν}x̃_μx̃_νφ² + (m²/2)φ² + λ φ⋆φ⋆φ⋆φ
//! ```
//!
//! All four terms are closed-form Gaussian moment integrals; the quartic
//! term is `λ∫ψ²` with `ψ = φ⋆φ`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::{gaussian_moments, multiply, gaussian_integral, GaussianFunction};
use crate::linalg::to_complex;
use crate::moyal::{star_gaussian, MoyalContext};
use crate::symplectic::{
    is_adapted, orthogonal_action, ComplexStructure, Metric, OrthogonalMap, SymplecticStructure,
};

#[derive(Debug, Clone)]
pub struct ModelParams {
    ctx: MoyalContext,
    omega: f64,
    mass2: f64,
    lambda: f64,
    complex_structure: Option<ComplexStructure>,
}

impl ModelParams {
    /// Builds the model; `Σ` need not be adapted to `G` (see
    /// [`ModelParams::require_adapted`]). `Ω = 0` is accepted here and
    /// rejected by the propagator.
    pub fn new(
        g: &Metric,
        sigma: &SymplecticStructure,
        theta: f64,
        omega: f64,
        mass2: f64,
        lambda: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&omega) {
            return Err(Error::Domain(format!("Ω must lie in [0, 1], got {omega}")));
        }
        if !(mass2 >= 0.0 && mass2.is_finite()) {
            return Err(Error::Domain(format!("m² must be non-negative, got {mass2}")));
        }
        if !lambda.is_finite() {
            return Err(Error::Domain(format!("λ must be finite, got {lambda}")));
        }
        let ctx = MoyalContext::new(g, sigma, theta)?;
        let complex_structure = is_adapted(sigma, g)?;
        Ok(Self {
            ctx,
            omega,
            mass2,
            lambda,
            complex_structure,
        })
    }

    /// Same model with `Σ` replaced.
    pub fn with_sigma(&self, sigma: &SymplecticStructure) -> Result<Self> {
        Self::new(self.metric(), sigma, self.theta(), self.omega, self.mass2, self.lambda)
    }

    /// Same model with `G` and `Σ` replaced.
    pub fn with_structures(&self, g: &Metric, sigma: &SymplecticStructure) -> Result<Self> {
        Self::new(g, sigma, self.theta(), self.omega, self.mass2, self.lambda)
    }

    pub fn require_adapted(&self) -> Result<&ComplexStructure> {
        self.complex_structure.as_ref().ok_or_else(|| {
            Error::Precondition("the symplectic structure is not adapted to the metric".into())
        })
    }

    pub fn is_adapted(&self) -> bool {
        self.complex_structure.is_some()
    }

    pub fn context(&self) -> &MoyalContext {
        &self.ctx
    }

    pub fn metric(&self) -> &Metric {
        self.ctx.metric()
    }

    pub fn sigma(&self) -> &SymplecticStructure {
        self.ctx.sigma()
    }

    pub fn dim(&self) -> usize {
        self.ctx.dim()
    }

    pub fn theta(&self) -> f64 {
        self.ctx.theta()
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn mass2(&self) -> f64 {
        self.mass2
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `Ω̃ = 2Ω/θ`.
    pub fn omega_tilde(&self) -> f64 {
        2.0 * self.omega / self.theta()
    }
}

/// A real Gaussian field `φ(x) = c·exp(-xᵀAx + bᵀx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldConfig {
    phi: GaussianFunction,
}

impl FieldConfig {
    pub fn new(c: f64, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        Self::from_gaussian(GaussianFunction::real(c, a, b)?)
    }

    pub fn from_gaussian(phi: GaussianFunction) -> Result<Self> {
        if !phi.is_real(0.0) {
            return Err(Error::Domain("field must be real-valued".into()));
        }
        if !phi.is_integrable() {
            return Err(Error::Divergent {
                eigenvalue: crate::linalg::min_eigenvalue(&phi.quad().map(|z| z.re)),
            });
        }
        Ok(Self { phi })
    }

    pub fn gaussian(&self) -> &GaussianFunction {
        &self.phi
    }

    pub fn dim(&self) -> usize {
        self.phi.dim()
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        self.phi.eval(x).re
    }
}

/// The four contributions to the action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActionTerms {
    pub kinetic: f64,
    pub harmonic: f64,
    pub mass: f64,
    /// `λ∫φ⋆φ⋆φ⋆φ`; complex only through rounding.
    pub quartic: Complex64,
}

impl ActionTerms {
    pub fn total(&self) -> f64 {
        self.kinetic + self.harmonic + self.mass + self.quartic.re
    }
}

/// `H` with `G^{-1}_{μν}x̃_μx̃_ν = xᵀHx`, i.e. `H = MᵀG^{-1}M` for the wedge
/// matrix `M`.
pub fn harmonic_matrix(ctx: &MoyalContext) -> DMatrix<f64> {
    let m = ctx.wedge_matrix();
    let h = m.transpose() * ctx.metric().inv() * m;
    (&h + h.transpose()) * 0.5
}

/// `(4/θ²)G`, equal to [`harmonic_matrix`] when `Σ` is adapted.
pub fn harmonic_matrix_adapted(ctx: &MoyalContext) -> DMatrix<f64> {
    ctx.metric().matrix() * (4.0 / (ctx.theta() * ctx.theta()))
}

fn check_dim(params: &ModelParams, phi: &FieldConfig) -> Result<()> {
    if params.dim() != phi.dim() {
        return Err(Error::Dimension(format!(
            "field of dimension {} in a {}-dimensional model",
            phi.dim(),
            params.dim()
        )));
    }
    Ok(())
}

/// `∫xᵀHxφ²` for a symmetric `H`.
pub fn quadratic_potential_integral(phi: &FieldConfig, h: &DMatrix<f64>) -> Result<f64> {
    let sq = multiply(&phi.phi, &phi.phi)?;
    let mom = gaussian_moments(&sq.to_integrand())?;
    let d = phi.dim();
    Ok(mom
        .quadratic_expectation(&to_complex(h), &DVector::zeros(d), Complex64::new(0.0, 0.0))
        .re)
}

pub fn action_terms(params: &ModelParams, phi: &FieldConfig) -> Result<ActionTerms> {
    check_dim(params, phi)?;
    let d = params.dim();
    let g_inv = params.metric().inv();
    let a = phi.phi.quad().map(|z| z.re);
    let b = phi.phi.lin().map(|z| z.re);
    let sq = multiply(&phi.phi, &phi.phi)?;
    let mom = gaussian_moments(&sq.to_integrand())?;

    // ∂φ = (b - 2Ax)φ
    let h_kin = &a * g_inv * &a * 4.0;
    let l_kin = -(&a * g_inv * &b) * 4.0;
    let c_kin = (b.transpose() * g_inv * &b)[(0, 0)];
    let kinetic = 0.5
        * mom
            .quadratic_expectation(
                &to_complex(&h_kin),
                &l_kin.map(|v| Complex64::new(v, 0.0)),
                Complex64::new(c_kin, 0.0),
            )
            .re;

    let omega2 = params.omega * params.omega;
    let harmonic = if omega2 == 0.0 {
        0.0
    } else {
        0.5 * omega2
            * mom
                .quadratic_expectation(
                    &to_complex(&harmonic_matrix(&params.ctx)),
                    &DVector::zeros(d),
                    Complex64::new(0.0, 0.0),
                )
                .re
    };
    let mass = 0.5 * params.mass2 * mom.total.re;

    let quartic = if params.lambda == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        params.lambda * quartic_integral(&params.ctx, phi)?
    };
    Ok(ActionTerms {
        kinetic,
        harmonic,
        mass,
        quartic,
    })
}

/// `∫φ⋆φ⋆φ⋆φ = ∫ψ·ψ` with `ψ = φ⋆φ`.
pub fn quartic_integral(ctx: &MoyalContext, phi: &FieldConfig) -> Result<Complex64> {
    let psi = star_gaussian(ctx, &phi.phi, &phi.phi)?;
    gaussian_integral(&multiply(&psi, &psi)?.to_integrand())
}

pub fn action_value(params: &ModelParams, phi: &FieldConfig) -> Result<f64> {
    Ok(action_terms(params, phi)?.total())
}

/// `φ^Λ(x) = φ(Λ^{-1}x)`.
pub fn transform_field(lambda: &OrthogonalMap, phi: &FieldConfig) -> Result<FieldConfig> {
    if lambda.dim() != phi.dim() {
        return Err(Error::Dimension(format!(
            "map of dimension {} on a {}-dimensional field",
            lambda.dim(),
            phi.dim()
        )));
    }
    Ok(FieldConfig {
        phi: phi.phi.compose_linear(lambda.inverse_matrix())?,
    })
}

/// `|S_{G,ΛΣ^{-1}Λᵀ}(φ^Λ) - S_{G,Σ^{-1}}(φ)| / |S_{G,Σ^{-1}}(φ)|`.
pub fn check_classical_invariance(
    params: &ModelParams,
    phi: &FieldConfig,
    lambda: &OrthogonalMap,
) -> Result<f64> {
    let before = action_value(params, phi)?;
    let rotated = params.with_sigma(&orthogonal_action(lambda, params.sigma())?)?;
    let after = action_value(&rotated, &transform_field(lambda, phi)?)?;
    Ok((after - before).abs() / before.abs())
}
