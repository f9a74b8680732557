//! The Moyal product `⋆_Σ` for a metric `G`, symplectic structure `Σ` and
//! deformation parameter `θ`.
//!
//! Two engines are provided:
//!
//! * [`star_gaussian`] evaluates the oscillatory double integral
//!   `K ∫ a(x+y) b(x+z) e^{-i y∧z} dy dz`, `K = det(G)² / ((πθ)^D |det Σ|)`,
//!   in closed form on the Gaussian class, with `y∧z = yᵀMz` and
//!   `M = (2/θ) G Σ^{-1} G`.
//! * [`star_polynomial`] is the bidifferential expansion
//!   `Σ_k (1/k!) (i/2)^k P^{μ₁ν₁}…P^{μ_kν_k} ∂_{μ₁…μ_k}a ∂_{ν₁…ν_k}b`, which
//!   terminates on polynomials.
//!
//! The sign of the Poisson tensor `P = ±θ G^{-1} Σ G^{-1}` is not taken on
//! faith: [`MoyalContext::new`] measures the second-order cross term of
//! `e^{s x_μ - ε|x|²} ⋆ e^{t x_ν - ε|x|²}` with the integral engine,
//! extrapolates `ε → 0` and keeps the candidate sign that matches.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::{
    gaussian_integral, multiply, partial_gaussian_integral, pullback_product, GaussianFunction,
    QuadraticIntegrand,
};
use crate::linalg::{antisymmetry_defect, max_abs};
use crate::polynomial::PolynomialFunction;
use crate::sampling::halton_points;
use crate::symplectic::{Metric, SymplecticStructure};

/// Regulator widths used by the sign calibration, before division by
/// `4·max(1, max|P|)`.
pub const CALIBRATION_EPSILONS: [f64; 2] = [1e-2, 1e-3];

/// Outcome of the sign calibration of the Poisson tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    /// `+1` when `[x_μ, x_ν] = +iθ(G^{-1}ΣG^{-1})_{μν}`.
    pub sign: f64,
    /// Largest deviation of the extrapolated cross terms from the chosen candidate.
    pub defect: f64,
    /// Same, for the rejected candidate.
    pub rejected_defect: f64,
}

#[derive(Debug, Clone)]
pub struct MoyalContext {
    metric: Metric,
    sigma: SymplecticStructure,
    theta: f64,
    wedge: DMatrix<f64>,
    poisson: DMatrix<f64>,
    normalization: f64,
    calibration: Calibration,
}

impl MoyalContext {
    pub fn new(metric: &Metric, sigma: &SymplecticStructure, theta: f64) -> Result<Self> {
        if metric.dim() != sigma.dim() {
            return Err(Error::Dimension(format!(
                "metric has dimension {}, symplectic structure {}",
                metric.dim(),
                sigma.dim()
            )));
        }
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::Domain(format!("θ must be positive, got {theta}")));
        }
        let g = metric.matrix();
        let wedge = g * sigma.inv() * g * (2.0 / theta);
        let wedge = (&wedge - wedge.transpose()) * 0.5;
        let candidate = metric.inv() * sigma.matrix() * metric.inv() * theta;
        let candidate = (&candidate - candidate.transpose()) * 0.5;
        let d = metric.dim() as i32;
        let normalization =
            metric.det().powi(2) / ((PI * theta).powi(d) * sigma.det().abs());
        let mut ctx = Self {
            metric: metric.clone(),
            sigma: sigma.clone(),
            theta,
            wedge,
            poisson: candidate.clone(),
            normalization,
            calibration: Calibration {
                sign: 1.0,
                defect: f64::NAN,
                rejected_defect: f64::NAN,
            },
        };
        let calibration = ctx.calibrate(&candidate)?;
        ctx.poisson = candidate * calibration.sign;
        ctx.calibration = calibration;
        Ok(ctx)
    }

    fn calibrate(&self, candidate: &DMatrix<f64>) -> Result<Calibration> {
        let d = self.dim();
        let scale = max_abs(candidate).max(f64::MIN_POSITIVE);
        let h = (1.0 / scale.sqrt()).min(1.0);
        let width = 4.0 * scale.max(1.0);
        let mut measured = DMatrix::<Complex64>::zeros(d, d);
        for mu in 0..d {
            for nu in 0..d {
                if mu == nu {
                    continue;
                }
                let (e1, e2) = (CALIBRATION_EPSILONS[0] / width, CALIBRATION_EPSILONS[1] / width);
                let c1 = self.cross_term(mu, nu, e1, h)?;
                let c2 = self.cross_term(mu, nu, e2, h)?;
                measured[(mu, nu)] = c2 - (c1 - c2) * (e2 / (e1 - e2));
            }
        }
        let defect = |sign: f64| {
            let mut worst = 0.0_f64;
            for mu in 0..d {
                for nu in 0..d {
                    if mu != nu {
                        let expected = Complex64::new(0.0, 0.5 * sign * candidate[(mu, nu)]);
                        worst = worst.max((measured[(mu, nu)] - expected).norm());
                    }
                }
            }
            worst / scale
        };
        let (plus, minus) = (defect(1.0), defect(-1.0));
        let (sign, chosen, rejected) = if plus <= minus {
            (1.0, plus, minus)
        } else {
            (-1.0, minus, plus)
        };
        if chosen > 1e-4 {
            return Err(Error::Numerical {
                message: "Poisson-tensor sign calibration matched neither candidate".into(),
                residual: chosen,
            });
        }
        Ok(Calibration {
            sign,
            defect: chosen,
            rejected_defect: rejected,
        })
    }

    /// Coefficient of `s·t` in `ln (e^{s x_μ - ε|x|²} ⋆ e^{t x_ν - ε|x|²})(0)`,
    /// extracted exactly from four evaluations of a log-quadratic function.
    fn cross_term(&self, mu: usize, nu: usize, eps: f64, h: f64) -> Result<Complex64> {
        let d = self.dim();
        let f = |s: f64, t: f64| -> Result<Complex64> {
            let mut ls = DVector::zeros(d);
            ls[mu] = s;
            let mut lt = DVector::zeros(d);
            lt[nu] = t;
            let quad = DMatrix::identity(d, d) * eps;
            let a = GaussianFunction::real(1.0, &quad, &ls)?;
            let b = GaussianFunction::real(1.0, &quad, &lt)?;
            Ok(star_gaussian(self, &a, &b)?.coeff())
        };
        let ratio = f(h, h)? * f(0.0, 0.0)? / (f(h, 0.0)? * f(0.0, h)?);
        Ok(ratio.ln() / (h * h))
    }

    pub fn dim(&self) -> usize {
        self.metric.dim()
    }

    pub fn metric(&self) -> &Metric {
        &self.metric
    }

    pub fn sigma(&self) -> &SymplecticStructure {
        &self.sigma
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// `M` with `y∧z = yᵀMz`; also the map `x ↦ x̃`.
    pub fn wedge_matrix(&self) -> &DMatrix<f64> {
        &self.wedge
    }

    /// Calibrated `P` with `[x_μ, x_ν] = iP_{μν}`.
    pub fn poisson(&self) -> &DMatrix<f64> {
        &self.poisson
    }

    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    pub fn calibration(&self) -> Calibration {
        self.calibration
    }

    pub fn wedge(&self, y: &DVector<f64>, z: &DVector<f64>) -> f64 {
        y.dot(&(&self.wedge * z))
    }

    /// `x̃_μ = 2 G_{μν} Θ^{-1}_{νρ} G_{ρσ} x_σ` as a linear polynomial.
    pub fn covariant_coordinate(&self, mu: usize) -> PolynomialFunction {
        let row: Vec<f64> = self.wedge.row(mu).iter().copied().collect();
        PolynomialFunction::linear(&row)
    }
}

fn block_map(d: usize, blocks: &[f64]) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(d, d * blocks.len());
    for (k, &c) in blocks.iter().enumerate() {
        for i in 0..d {
            p[(i, k * d + i)] = c;
        }
    }
    p
}

/// Adds the phase `-i yᵀMz` between the variable blocks starting at `y0`
/// and `z0`.
fn add_wedge_phase(q: &mut QuadraticIntegrand, m: &DMatrix<f64>, y0: usize, z0: usize) {
    let d = m.nrows();
    for i in 0..d {
        for j in 0..d {
            let v = Complex64::new(0.0, m[(i, j)]);
            q.q[(y0 + i, z0 + j)] += v;
            q.q[(z0 + j, y0 + i)] += v;
        }
    }
}

fn check_dims(ctx: &MoyalContext, fs: &[&GaussianFunction]) -> Result<()> {
    for f in fs {
        if f.dim() != ctx.dim() {
            return Err(Error::Dimension(format!(
                "function of dimension {} in a {}-dimensional Moyal space",
                f.dim(),
                ctx.dim()
            )));
        }
    }
    Ok(())
}

/// Integrates the `(y, z)` block (first `2D` variables) of a joint
/// integrand over `(y, z, x)` and returns the resulting function of `x`.
fn reduce_to_function(ctx: &MoyalContext, joint: &QuadraticIntegrand) -> Result<GaussianFunction> {
    let d = ctx.dim();
    let yz: Vec<usize> = (0..2 * d).collect();
    let reduced = partial_gaussian_integral(joint, &yz)?;
    Ok(GaussianFunction::from_integrand(&reduced).scale(Complex64::new(ctx.normalization, 0.0)))
}

/// `(a ⋆ b)(x)` in closed form.
pub fn star_gaussian(
    ctx: &MoyalContext,
    a: &GaussianFunction,
    b: &GaussianFunction,
) -> Result<GaussianFunction> {
    check_dims(ctx, &[a, b])?;
    let d = ctx.dim();
    let pa = block_map(d, &[1.0, 0.0, 1.0]);
    let pb = block_map(d, &[0.0, 1.0, 1.0]);
    let mut joint = pullback_product(3 * d, &[(a, &pa), (b, &pb)])?;
    add_wedge_phase(&mut joint, &ctx.wedge, 0, d);
    reduce_to_function(ctx, &joint)
}

/// The one-shot triple product `K ∫ a(x+y) b(x+z) c(x-y+z) e^{-i y∧z} dy dz`.
pub fn star_triple_gaussian(
    ctx: &MoyalContext,
    a: &GaussianFunction,
    b: &GaussianFunction,
    c: &GaussianFunction,
) -> Result<GaussianFunction> {
    check_dims(ctx, &[a, b, c])?;
    let d = ctx.dim();
    let pa = block_map(d, &[1.0, 0.0, 1.0]);
    let pb = block_map(d, &[0.0, 1.0, 1.0]);
    let pc = block_map(d, &[-1.0, 1.0, 1.0]);
    let mut joint = pullback_product(3 * d, &[(a, &pa), (b, &pb), (c, &pc)])?;
    add_wedge_phase(&mut joint, &ctx.wedge, 0, d);
    reduce_to_function(ctx, &joint)
}

/// `a ⋆ b` for polynomials via the terminating bidifferential expansion.
///
/// `a(y) b(z)` is held as a polynomial in `2D` variables, the operator
/// `Δ = P_{μν} ∂_{y_μ} ∂_{z_ν}` is applied repeatedly, and `y = z = x` is
/// substituted at the end.
pub fn star_polynomial(
    ctx: &MoyalContext,
    a: &PolynomialFunction,
    b: &PolynomialFunction,
) -> PolynomialFunction {
    let d = ctx.dim();
    assert_eq!(a.dim(), d, "left factor dimension");
    assert_eq!(b.dim(), d, "right factor dimension");
    let mut term = PolynomialFunction::from_terms(
        2 * d,
        a.terms().flat_map(|(ea, ca)| {
            b.terms().map(move |(eb, cb)| {
                let mut e = ea.clone();
                e.extend_from_slice(eb);
                (e, ca * cb)
            })
        }),
    );
    let mut acc = term.clone();
    let max_k = a.degree().min(b.degree());
    let p = &ctx.poisson;
    for k in 1..=max_k {
        let mut next = PolynomialFunction::zero(2 * d);
        for mu in 0..d {
            let dy = term.derivative(mu);
            if dy.is_zero() {
                continue;
            }
            for nu in 0..d {
                if p[(mu, nu)] == 0.0 {
                    continue;
                }
                let dyz = dy.derivative(d + nu);
                next = &next + &dyz.scale(Complex64::new(p[(mu, nu)], 0.0));
            }
        }
        term = next;
        let weight = Complex64::new(0.0, 0.5).powu(k) / (1..=k).map(f64::from).product::<f64>();
        acc = &acc + &term.scale(weight);
    }
    PolynomialFunction::from_terms(
        d,
        acc.terms().map(|(e, c)| {
            let merged: Vec<u32> = (0..d).map(|i| e[i] + e[d + i]).collect();
            (merged, *c)
        }),
    )
}

/// `[a, b]_⋆` for polynomials.
pub fn commutator(ctx: &MoyalContext, a: &PolynomialFunction, b: &PolynomialFunction) -> PolynomialFunction {
    &star_polynomial(ctx, a, b) - &star_polynomial(ctx, b, a)
}

/// `{a, b}_⋆` for polynomials.
pub fn anticommutator(ctx: &MoyalContext, a: &PolynomialFunction, b: &PolynomialFunction) -> PolynomialFunction {
    &star_polynomial(ctx, a, b) + &star_polynomial(ctx, b, a)
}

/// `|∫(a⋆b) - ∫ab| / |∫ab|`.
pub fn check_tracial(ctx: &MoyalContext, a: &GaussianFunction, b: &GaussianFunction) -> Result<f64> {
    let star = star_gaussian(ctx, a, b)?;
    let lhs = gaussian_integral(&star.to_integrand())?;
    let rhs = gaussian_integral(&multiply(a, b)?.to_integrand())?;
    Ok((lhs - rhs).norm() / rhs.norm())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssociativityResidual {
    /// `max_x |((a⋆b)⋆c - a⋆(b⋆c))(x)| / max_x |((a⋆b)⋆c)(x)|` over the sample points.
    pub pointwise: f64,
    /// Relative gap between the one-shot triple formula and the iterated product at `x = 0`.
    pub triple: f64,
}

impl AssociativityResidual {
    pub fn max(&self) -> f64 {
        self.pointwise.max(self.triple)
    }
}

/// Number of low-discrepancy sample points used by [`check_associativity`].
pub const ASSOCIATIVITY_SAMPLES: usize = 10;

pub fn check_associativity(
    ctx: &MoyalContext,
    a: &GaussianFunction,
    b: &GaussianFunction,
    c: &GaussianFunction,
) -> Result<AssociativityResidual> {
    let left = star_gaussian(ctx, &star_gaussian(ctx, a, b)?, c)?;
    let right = star_gaussian(ctx, a, &star_gaussian(ctx, b, c)?)?;
    let points = halton_points(ASSOCIATIVITY_SAMPLES, ctx.dim(), -2.0, 2.0);
    let mut diff = 0.0_f64;
    let mut scale = 0.0_f64;
    for x in &points {
        let l = left.eval(x);
        diff = diff.max((l - right.eval(x)).norm());
        scale = scale.max(l.norm());
    }
    let origin = DVector::zeros(ctx.dim());
    let one_shot = star_triple_gaussian(ctx, a, b, c)?.eval(&origin);
    let iterated = left.eval(&origin);
    Ok(AssociativityResidual {
        pointwise: diff / scale,
        triple: (one_shot - iterated).norm() / iterated.norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivationResiduals {
    /// `∂_μ(a⋆b) - (∂_μa)⋆b - a⋆(∂_μb)`.
    pub leibniz: f64,
    /// `[x̃_μ, a] - 2i ∂_μ a`.
    pub commutator: f64,
    /// `{x̃_μ, a} - 2 x̃_μ a`.
    pub anticommutator: f64,
}

impl DerivationResiduals {
    pub fn max(&self) -> f64 {
        self.leibniz.max(self.commutator).max(self.anticommutator)
    }
}

/// Checks the derivation identities with `b = a` in the Leibniz rule.
pub fn check_derivation_relations(ctx: &MoyalContext, a: &PolynomialFunction) -> DerivationResiduals {
    check_derivation_relations_with(ctx, a, a)
}

/// Coefficient-wise residuals of the three derivation identities, maximized
/// over `μ`; `b` is the second factor in the Leibniz rule.
pub fn check_derivation_relations_with(
    ctx: &MoyalContext,
    a: &PolynomialFunction,
    b: &PolynomialFunction,
) -> DerivationResiduals {
    let d = ctx.dim();
    let ab = star_polynomial(ctx, a, b);
    let mut out = DerivationResiduals {
        leibniz: 0.0,
        commutator: 0.0,
        anticommutator: 0.0,
    };
    for mu in 0..d {
        let lhs = ab.derivative(mu);
        let rhs = &star_polynomial(ctx, &a.derivative(mu), b) + &star_polynomial(ctx, a, &b.derivative(mu));
        out.leibniz = out.leibniz.max(lhs.distance(&rhs));

        let xt = ctx.covariant_coordinate(mu);
        let comm = commutator(ctx, &xt, a);
        let expected = a.derivative(mu).scale(Complex64::new(0.0, 2.0));
        out.commutator = out.commutator.max(comm.distance(&expected));

        let anti = anticommutator(ctx, &xt, a);
        let expected = (&xt * a).scale(Complex64::new(2.0, 0.0));
        out.anticommutator = out.anticommutator.max(anti.distance(&expected));
    }
    out
}

/// `max_{μ,ν} |[x_μ, x_ν] - iθ(G^{-1}ΣG^{-1})_{μν}|` with the commutators
/// from the polynomial engine.
pub fn commutator_residual(ctx: &MoyalContext) -> f64 {
    let d = ctx.dim();
    let target = ctx.metric.inv() * ctx.sigma.matrix() * ctx.metric.inv() * ctx.theta;
    let mut worst = 0.0_f64;
    for mu in 0..d {
        for nu in 0..d {
            let c = commutator(
                ctx,
                &PolynomialFunction::coordinate(d, mu),
                &PolynomialFunction::coordinate(d, nu),
            );
            let expected = PolynomialFunction::constant(d, Complex64::new(0.0, target[(mu, nu)]));
            worst = worst.max(c.distance(&expected));
        }
    }
    worst
}

/// Antisymmetry defect of the Poisson tensor (zero by construction).
pub fn poisson_antisymmetry(ctx: &MoyalContext) -> f64 {
    antisymmetry_defect(&ctx.poisson)
}
