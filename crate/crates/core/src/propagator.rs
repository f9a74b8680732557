//! The Mehler-kernel propagator of the harmonic model
//!
//! ```text
//! C(x, y) = θ√det G/(4Ω) · (Ω/(πθ))^{D/2} ∫_ε^∞ dα sinh^{-D/2}(α) e^{-m²α/(2Ω̃)} C(x, y, α)
//! C(x, y, α) = exp(-(Ω̃/4)coth(α/2)(x-y)ᵀG(x-y) - (Ω̃/4)tanh(α/2)(x+y)ᵀG(x+y))
//! ```
//!
//! with `Ω̃ = 2Ω/θ`. The symplectic structure never enters.
//!
//! With this normalization `C` inverts
//! `K = -G^{-1}_{μν}∂_μ∂_ν + Ω²G^{-1}_{μν}x̃_μx̃_ν + m²`, the Hessian of the
//! action at `φ = 0`, where `G^{-1}_{μν}x̃_μx̃_ν = (4/θ²)xᵀGx` for adapted `Σ`.
//! [`GreenOperator::half`] is `K/2`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::action::ModelParams;
use crate::error::{Error, Result};
use crate::gaussian::{gaussian_moments, multiply, GaussianFunction};
use crate::quadrature::{integrate, integrate_from, QuadOptions, QuadResult};
use crate::symplectic::Metric;

#[derive(Debug, Clone)]
pub struct MehlerKernel {
    metric: Metric,
    theta: f64,
    omega: f64,
    mass2: f64,
}

impl MehlerKernel {
    pub fn new(params: &ModelParams) -> Result<Self> {
        Self::from_parts(params.metric().clone(), params.theta(), params.omega(), params.mass2())
    }

    pub fn from_parts(metric: Metric, theta: f64, omega: f64, mass2: f64) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(Error::Domain(format!("the propagator needs Ω > 0, got {omega}")));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Domain(format!("θ must be positive, got {theta}")));
        }
        if !(mass2 >= 0.0 && mass2.is_finite()) {
            return Err(Error::Domain(format!("m² must be non-negative, got {mass2}")));
        }
        Ok(Self {
            metric,
            theta,
            omega,
            mass2,
        })
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn mass2(&self) -> f64 {
        self.mass2
    }

    pub fn omega_tilde(&self) -> f64 {
        2.0 * self.omega / self.theta
    }

    /// `θ√det G/(4Ω) · (Ω/(πθ))^{D/2}`.
    pub fn prefactor(&self) -> f64 {
        let d = self.dim() as f64;
        self.theta * self.metric.det().sqrt() / (4.0 * self.omega)
            * (self.omega / (PI * self.theta)).powf(0.5 * d)
    }

    /// `sinh^{-D/2}(α) e^{-m²α/(2Ω̃)}`, evaluated in the log domain.
    pub fn weight(&self, alpha: f64) -> f64 {
        let d = self.dim() as f64;
        // ln sinh α = α + ln(1 - e^{-2α}) - ln 2
        let ln_sinh = alpha + (-(-2.0 * alpha).exp()).ln_1p() - std::f64::consts::LN_2;
        (-0.5 * d * ln_sinh - self.mass2 * alpha / (2.0 * self.omega_tilde())).exp()
    }

    /// `((Ω̃/4)coth(α/2), (Ω̃/4)tanh(α/2))`, the weights of the difference
    /// and sum quadratic forms.
    pub fn coefficients(&self, alpha: f64) -> (f64, f64) {
        let q = 0.25 * self.omega_tilde();
        let t = (0.5 * alpha).tanh();
        (q / t, q * t)
    }

    /// Decay rate of the α-integrand at infinity.
    pub fn decay_rate(&self) -> f64 {
        0.5 * self.dim() as f64 + self.mass2 / (2.0 * self.omega_tilde())
    }

    /// `C(x, y, α)`.
    pub fn kernel_at(&self, x: &DVector<f64>, y: &DVector<f64>, alpha: f64) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("α must be positive, got {alpha}")));
        }
        let (cm, cp) = self.coefficients(alpha);
        let diff = x - y;
        let sum = x + y;
        Ok((-cm * self.metric.inner(&diff, &diff) - cp * self.metric.inner(&sum, &sum)).exp())
    }

    /// `C(x, ·, α)` as a Gaussian in the second argument.
    pub fn kernel_gaussian(&self, x: &DVector<f64>, alpha: f64) -> Result<GaussianFunction> {
        self.check_point(x)?;
        let (cm, cp) = self.coefficients(alpha);
        let g = self.metric.matrix();
        let gx = g * x;
        GaussianFunction::real(
            (-(cm + cp) * x.dot(&gx)).exp(),
            &(g * (cm + cp)),
            &(gx * (2.0 * (cm - cp))),
        )
    }

    fn check_point(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "point of dimension {} for a {}-dimensional kernel",
                x.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

/// `C(x, y, α)` for `G = 1`.
pub fn kernel_at_standard(omega_tilde: f64, x: &DVector<f64>, y: &DVector<f64>, alpha: f64) -> f64 {
    let q = 0.25 * omega_tilde;
    let t = (0.5 * alpha).tanh();
    (-(q / t) * (x - y).norm_squared() - q * t * (x + y).norm_squared()).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffSpec {
    pub epsilon: f64,
    /// Upper end of the α range; `f64::INFINITY` integrates the full tail.
    pub alpha_max: f64,
    pub rel_tol: f64,
}

impl CutoffSpec {
    pub fn new(epsilon: f64) -> Result<Self> {
        Self::with_options(epsilon, f64::INFINITY, 1e-10)
    }

    pub fn with_options(epsilon: f64, alpha_max: f64, rel_tol: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon < alpha_max) {
            return Err(Error::Domain(format!(
                "cutoff needs 0 < ε < α_max, got ε = {epsilon}, α_max = {alpha_max}"
            )));
        }
        if !(rel_tol > 0.0) {
            return Err(Error::Domain(format!("tolerance must be positive, got {rel_tol}")));
        }
        Ok(Self {
            epsilon,
            alpha_max,
            rel_tol,
        })
    }

    pub fn quad_options(&self) -> QuadOptions {
        QuadOptions::with_rel_tol(self.rel_tol)
    }
}

/// `∫_ε^{α_max} f(α) dα`, mapping an infinite range by `α = ε - ln(1 - u)`.
pub fn integrate_alpha<T: crate::quadrature::QuadValue>(
    f: impl FnMut(f64) -> T,
    cutoff: &CutoffSpec,
) -> Result<QuadResult<T>> {
    let opts = cutoff.quad_options();
    if cutoff.alpha_max.is_finite() {
        integrate(f, cutoff.epsilon, cutoff.alpha_max, &opts)
    } else {
        integrate_from(f, cutoff.epsilon, &opts)
    }
}

/// The regularized propagator `C_ε(x, y)` with its quadrature error estimate.
pub fn propagator_value(
    k: &MehlerKernel,
    cutoff: &CutoffSpec,
    x: &DVector<f64>,
    y: &DVector<f64>,
) -> Result<QuadResult<f64>> {
    k.check_point(x)?;
    k.check_point(y)?;
    if !(k.decay_rate() > 0.0) {
        return Err(Error::Precondition("the α-integrand does not decay".into()));
    }
    let pref = k.prefactor();
    let r = integrate_alpha(
        |a| k.weight(a) * k.kernel_at(x, y, a).unwrap_or(0.0),
        cutoff,
    )?;
    Ok(QuadResult {
        value: pref * r.value,
        abs_error: pref * r.abs_error,
        evaluations: r.evaluations,
    })
}

/// `factor · (-G^{-1}_{μν}∂_μ∂_ν + Ω²(4/θ²)xᵀGx + m²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreenOperator {
    pub factor: f64,
    pub omega: f64,
    pub mass2: f64,
}

impl GreenOperator {
    /// The operator the kernel inverts.
    pub fn matching(k: &MehlerKernel) -> Self {
        Self {
            factor: 1.0,
            omega: k.omega,
            mass2: k.mass2,
        }
    }

    /// `-½G^{-1}∂∂ + (Ω²/2)G^{-1}x̃x̃ + m²/2`.
    pub fn half(k: &MehlerKernel) -> Self {
        Self {
            factor: 0.5,
            ..Self::matching(k)
        }
    }

    /// Matching operator with the harmonic term switched off.
    pub fn without_harmonic(k: &MehlerKernel) -> Self {
        Self {
            omega: 0.0,
            ..Self::matching(k)
        }
    }

    /// `(Of)/f` as `(yᵀHy + hᵀy + h0)` for `f = c·exp(-yᵀAy + bᵀy)`.
    fn symbol(
        &self,
        k: &MehlerKernel,
        f: &GaussianFunction,
    ) -> (DMatrix<Complex64>, DVector<Complex64>, Complex64) {
        let g_inv = k.metric.inv().map(|v| Complex64::new(v, 0.0));
        let g = k.metric.matrix().map(|v| Complex64::new(v, 0.0));
        let a = f.quad();
        let b = f.lin();
        let s = Complex64::new(self.factor, 0.0);
        let harm = Complex64::new(self.omega * self.omega * 4.0 / (k.theta * k.theta), 0.0);
        let h = (a * &g_inv * a * Complex64::new(-4.0, 0.0) + g * harm) * s;
        let lin = (a * &g_inv * b) * Complex64::new(4.0, 0.0) * s;
        let tr: Complex64 = (&g_inv * a).trace();
        let c0 = ((b.transpose() * &g_inv * b)[(0, 0)] * Complex64::new(-1.0, 0.0)
            + tr * 2.0
            + Complex64::new(self.mass2, 0.0))
            * s;
        (h, lin, c0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenReport {
    pub epsilons: Vec<f64>,
    /// `∫dy C_ε(x₀, y)(Of)(y)` per ε.
    pub values: Vec<Complex64>,
    /// `|value - f(x₀)|` per ε.
    pub residuals: Vec<f64>,
    /// `f(x₀)`.
    pub target: Complex64,
}

impl GreenReport {
    pub fn strictly_decreasing(&self) -> bool {
        self.residuals.windows(2).all(|w| w[1] < w[0])
    }

    /// Last residual relative to `|f(x₀)|`.
    pub fn final_relative(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN) / self.target.norm()
    }
}

/// Weak Green-function test of the kernel against the matching operator.
pub fn check_green_property(
    k: &MehlerKernel,
    testfn: &GaussianFunction,
    x0: &DVector<f64>,
    epsilons: &[f64],
) -> Result<GreenReport> {
    check_green_property_with(k, &GreenOperator::matching(k), testfn, x0, epsilons)
}

/// Weak Green-function test: `∫dy C_ε(x₀, y)(Of)(y)` for each `ε`, with the
/// inner integral in closed form at fixed `α`.
pub fn check_green_property_with(
    k: &MehlerKernel,
    op: &GreenOperator,
    testfn: &GaussianFunction,
    x0: &DVector<f64>,
    epsilons: &[f64],
) -> Result<GreenReport> {
    k.check_point(x0)?;
    if testfn.dim() != k.dim() {
        return Err(Error::Dimension(format!(
            "test function of dimension {} for a {}-dimensional kernel",
            testfn.dim(),
            k.dim()
        )));
    }
    if !testfn.is_integrable() {
        return Err(Error::Precondition("test function is not integrable".into()));
    }
    let (h, lin, c0) = op.symbol(k, testfn);
    let pref = k.prefactor();
    let target = testfn.eval(x0);
    let mut values = Vec::with_capacity(epsilons.len());
    let mut residuals = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let cutoff = CutoffSpec::new(eps)?;
        let mut failure = None;
        let r = integrate_alpha(
            |a| {
                let inner = k
                    .kernel_gaussian(x0, a)
                    .and_then(|kg| multiply(&kg, testfn))
                    .and_then(|p| gaussian_moments(&p.to_integrand()));
                match inner {
                    Ok(m) => m.quadratic_expectation(&h, &lin, c0) * k.weight(a),
                    Err(e) => {
                        failure.get_or_insert(e);
                        Complex64::new(0.0, 0.0)
                    }
                }
            },
            &cutoff,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        let value = r.value * pref;
        residuals.push((value - target).norm());
        values.push(value);
    }
    Ok(GreenReport {
        epsilons: epsilons.to_vec(),
        values,
        residuals,
        target,
    })
}
