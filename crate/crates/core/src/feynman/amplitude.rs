//! Regularized amputated amplitudes in the delta-constraint representation
//!
//! ```text
//! A_Γ({x_e}) = c_L^{|L|} (det G/(πθ)^D)^n ∫_ε^∞ Π_l dα_l w(α_l) ∫ Π_I dx
//!              Π_l C(x^{l,1}, x^{l,2}, α_l) Π_v δ(x₁-x₂+x₃-x₄) e^{-iΣ_{i<j}(-1)^{i+j+1}x_i∧x_j}
//! ```
//!
//! with `c_L` the propagator prefactor and `w(α) = sinh^{-D/2}(α)e^{-m²α/(2Ω̃)}`.
//! At each vertex the constraint eliminates the highest-index integrated
//! corner; every remaining corner position is a fixed linear combination of
//! the surviving variables ("slots"). A vertex whose four corners are all
//! external leaves its delta function unintegrated: the reported value is
//! the coefficient of that delta.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::graph::{Corner, FeynmanGraph};
use crate::action::{FieldConfig, ModelParams};
use crate::error::{Error, Result};
use crate::gaussian::{gaussian_integral, QuadraticIntegrand};
use crate::linalg::{kron, max_abs};
use crate::moyal::MoyalContext;
use crate::propagator::{integrate_alpha, CutoffSpec, MehlerKernel};
use crate::quadrature::Estimate;
use crate::symplectic::{
    decompose_adapted, orthogonal_action, standard_structures, OrthogonalMap,
};

/// Largest number of lines handled by the nested α-quadrature.
pub const MAX_LINES: usize = 3;

/// Coefficients of the corners in the constraint `x₁ - x₂ + x₃ - x₄`.
pub const CORNER_SIGNS: [f64; 4] = [1.0, -1.0, 1.0, -1.0];

/// Relative tolerance of the delta-constraint check on external corners.
pub const CONSTRAINT_TOL: f64 = 1e-12;

/// `(-1)^{i+j+1}` for 0-based corner indices.
fn pair_sign(i: usize, j: usize) -> f64 {
    if (i + j) % 2 == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Vertex in hypermomentum form, with `p` the hypermomentum:
/// `exp(-iΣ_{i<j}(-1)^{i+j+1}x_i∧x_j - iΣ_i(-1)^{i+1}p∧x_i)`.
pub fn vertex_factor(ctx: &MoyalContext, x: [&DVector<f64>; 4], p: &DVector<f64>) -> Complex64 {
    let mut phase = vertex_exponent(ctx, x);
    for (i, xi) in x.iter().enumerate() {
        phase += CORNER_SIGNS[i] * ctx.wedge(p, xi);
    }
    Complex64::new(0.0, -phase).exp()
}

/// The delta-form vertex phase `exp(-iΣ_{i<j}(-1)^{i+j+1}x_i∧x_j)`.
pub fn vertex_phase(ctx: &MoyalContext, x: [&DVector<f64>; 4]) -> Complex64 {
    Complex64::new(0.0, -vertex_exponent(ctx, x)).exp()
}

fn vertex_exponent(ctx: &MoyalContext, x: [&DVector<f64>; 4]) -> f64 {
    let mut phase = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            phase += pair_sign(i, j) * ctx.wedge(x[i], x[j]);
        }
    }
    phase
}

/// `x₁ - x₂ + x₃ - x₄`.
pub fn vertex_constraint(x: [&DVector<f64>; 4]) -> DVector<f64> {
    let mut out = x[0].clone() * CORNER_SIGNS[0];
    for i in 1..4 {
        out.axpy(CORNER_SIGNS[i], x[i], 1.0);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmplitudeResult {
    pub value: Complex64,
    pub abs_error: f64,
    pub n: usize,
    pub n_external: usize,
    pub epsilon: f64,
    /// `(det G)^{(n+N/2)/2}`.
    pub det_g_factor: f64,
    /// Vertices with all corners external; `value` multiplies one delta
    /// function per such vertex.
    pub delta_vertices: usize,
}

/// Corner positions as linear combinations of slot vectors.
#[derive(Debug, Clone)]
struct Layout {
    /// Slots that are integrated (the leading ones).
    free: usize,
    /// All slots, free then fixed external.
    slots: usize,
    /// `rows[v][i]`: coefficients of corner `(v, i)` over the slots.
    rows: Vec<[DVector<f64>; 4]>,
    /// Vertices without an integrated corner.
    constraint_vertices: Vec<usize>,
}

impl Layout {
    fn new(graph: &FeynmanGraph, integrate_externals: bool) -> Self {
        let n = graph.num_vertices();
        let n_ext = graph.num_external();
        let ext_pos = |c: Corner| graph.external().iter().position(|&e| e == c);
        let is_free = |c: Corner| integrate_externals || ext_pos(c).is_none();

        let eliminated: Vec<Option<usize>> = (0..n)
            .map(|v| (0..4).rev().find(|&i| is_free(Corner::new(v, i))))
            .collect();
        let mut slot_of = vec![[None; 4]; n];
        let mut free = 0;
        for v in 0..n {
            for i in 0..4 {
                if is_free(Corner::new(v, i)) && eliminated[v] != Some(i) {
                    slot_of[v][i] = Some(free);
                    free += 1;
                }
            }
        }
        let slots = if integrate_externals { free } else { free + n_ext };

        let unit = |k: usize| {
            let mut r = DVector::zeros(slots);
            r[k] = 1.0;
            r
        };
        let mut rows = Vec::with_capacity(n);
        let mut constraint_vertices = Vec::new();
        for v in 0..n {
            let mut r: [DVector<f64>; 4] = std::array::from_fn(|_| DVector::zeros(slots));
            for i in 0..4 {
                if let Some(k) = slot_of[v][i] {
                    r[i] = unit(k);
                } else if !integrate_externals {
                    if let Some(e) = ext_pos(Corner::new(v, i)) {
                        r[i] = unit(free + e);
                    }
                }
            }
            match eliminated[v] {
                Some(k) => {
                    let mut acc = DVector::zeros(slots);
                    for i in (0..4).filter(|&i| i != k) {
                        acc.axpy(CORNER_SIGNS[i], &r[i], 1.0);
                    }
                    r[k] = acc * (-CORNER_SIGNS[k]);
                }
                None => constraint_vertices.push(v),
            }
            rows.push(r);
        }
        Self {
            free,
            slots,
            rows,
            constraint_vertices,
        }
    }

    fn row(&self, c: Corner) -> &DVector<f64> {
        &self.rows[c.vertex][c.index]
    }
}

/// Everything about `A_Γ` that does not depend on the α's.
#[derive(Debug, Clone)]
struct Assembly {
    layout: Layout,
    kernel: MehlerKernel,
    dim: usize,
    /// Vertex phases (purely imaginary) plus field factors, over all slots.
    base_q: DMatrix<Complex64>,
    base_l: DVector<Complex64>,
    prefactor: Complex64,
    /// Per line: `(r rᵀ, s sᵀ)` for `r = a - b`, `s = a + b`.
    line_forms: Vec<(DMatrix<f64>, DMatrix<f64>)>,
}

impl Assembly {
    fn new(graph: &FeynmanGraph, params: &ModelParams, field: Option<&FieldConfig>) -> Result<Self> {
        params.require_adapted()?;
        if graph.num_lines() > MAX_LINES {
            return Err(Error::Graph(format!(
                "{} lines exceed the supported maximum of {MAX_LINES}",
                graph.num_lines()
            )));
        }
        let kernel = MehlerKernel::new(params)?;
        let ctx = params.context();
        let d = params.dim();
        let layout = Layout::new(graph, field.is_some());
        let s = layout.slots;

        let mut coupling = DMatrix::<f64>::zeros(s, s);
        for r in &layout.rows {
            for i in 0..4 {
                for j in i + 1..4 {
                    coupling += &r[i] * r[j].transpose() * pair_sign(i, j);
                }
            }
        }
        let im_m = ctx.wedge_matrix().map(|v| Complex64::new(0.0, v));
        let mut base_q = kron(&coupling, &im_m) + kron(&coupling.transpose(), &im_m.transpose());
        let mut base_l = DVector::<Complex64>::zeros(s * d);

        let det_g = params.metric().det();
        let vertex_norm = det_g / (PI * params.theta()).powi(d as i32);
        let mut prefactor = Complex64::new(
            kernel.prefactor().powi(graph.num_lines() as i32) * vertex_norm.powi(graph.num_vertices() as i32),
            0.0,
        );

        if let Some(phi) = field {
            let g = phi.gaussian();
            if g.dim() != d {
                return Err(Error::Dimension(format!(
                    "field of dimension {} in a {d}-dimensional model",
                    g.dim()
                )));
            }
            for &e in graph.external() {
                let r = layout.row(e);
                base_q += kron(&(r * r.transpose() * 2.0), g.quad());
                for k in 0..s {
                    if r[k] != 0.0 {
                        let mut block = base_l.rows_mut(k * d, d);
                        block += g.lin() * Complex64::new(r[k], 0.0);
                    }
                }
                prefactor *= g.coeff();
            }
        }

        let line_forms = graph
            .lines()
            .iter()
            .map(|&(a, b)| {
                let r = layout.row(a) - layout.row(b);
                let p = layout.row(a) + layout.row(b);
                (&r * r.transpose(), &p * p.transpose())
            })
            .collect();
        Ok(Self {
            layout,
            kernel,
            dim: d,
            base_q,
            base_l,
            prefactor,
            line_forms,
        })
    }

    /// The Gaussian integrand over all slots at fixed α's (weights excluded).
    fn integrand(&self, alphas: &[f64]) -> Result<QuadraticIntegrand> {
        if alphas.len() != self.line_forms.len() {
            return Err(Error::Dimension(format!(
                "{} α values for {} lines",
                alphas.len(),
                self.line_forms.len()
            )));
        }
        let s = self.layout.slots;
        let mut coef = DMatrix::<f64>::zeros(s, s);
        for (&a, (rr, ss)) in alphas.iter().zip(&self.line_forms) {
            if !(a > 0.0) {
                return Err(Error::Domain(format!("α must be positive, got {a}")));
            }
            let (cm, cp) = self.kernel.coefficients(a);
            coef += rr * (2.0 * cm) + ss * (2.0 * cp);
        }
        let g = self.kernel.metric().matrix().map(|v| Complex64::new(v, 0.0));
        QuadraticIntegrand::new(&self.base_q + kron(&coef, &g), self.base_l.clone(), self.prefactor)
    }

    fn fixed_indices(&self) -> Vec<usize> {
        (self.layout.free * self.dim..self.layout.slots * self.dim).collect()
    }

    fn weight(&self, alphas: &[f64]) -> f64 {
        alphas.iter().map(|&a| self.kernel.weight(a)).product()
    }

    /// Conditions on the external positions once; `None` when every slot
    /// is integrated.
    fn condition(&self, externals: Option<&DVector<f64>>) -> Result<Conditioned> {
        let d = self.dim;
        let free: Vec<usize> = (0..self.layout.free * d).collect();
        let fixed = self.fixed_indices();
        let x = match externals {
            Some(x) => x.map(|v| Complex64::new(v, 0.0)),
            None => DVector::zeros(0),
        };
        if x.len() != fixed.len() {
            return Err(Error::Dimension(format!(
                "{} external coordinates for {} fixed ones",
                x.len(),
                fixed.len()
            )));
        }
        let f = self.layout.free;
        let ext: Vec<usize> = (f..self.layout.slots).collect();
        let g = self.kernel.metric().matrix().map(|v| Complex64::new(v, 0.0));

        let q_fx = self.base_q.select_rows(&free).select_columns(&fixed);
        let q_xx = self.base_q.select_rows(&fixed).select_columns(&fixed);
        let l_x = self.base_l.select_rows(&fixed);
        let l0 = self.base_l.select_rows(&free) - q_fx * &x;
        let c0 = (l_x.transpose() * &x)[(0, 0)] - (x.transpose() * q_xx * &x)[(0, 0)] * 0.5;

        let slots_f: Vec<usize> = (0..f).collect();
        let split = |m: &DMatrix<f64>| {
            let ff = m.select_rows(&slots_f).select_columns(&slots_f);
            let fx = kron(&m.select_rows(&slots_f).select_columns(&ext), &g) * &x;
            let xx = (x.transpose() * kron(&m.select_rows(&ext).select_columns(&ext), &g) * &x)[(0, 0)];
            (ff, fx, xx)
        };
        let lines = self
            .line_forms
            .iter()
            .map(|(rr, ss)| (split(rr), split(ss)))
            .collect();
        Ok(Conditioned {
            q0: self.base_q.select_rows(&free).select_columns(&free),
            l0,
            c0,
            lines,
            g,
        })
    }

    /// `Π w(α_l) × ∫(integrated slots)` at fixed α's.
    fn evaluate(&self, cond: &Conditioned, alphas: &[f64]) -> Result<Complex64> {
        if alphas.len() != cond.lines.len() {
            return Err(Error::Dimension(format!(
                "{} α values for {} lines",
                alphas.len(),
                cond.lines.len()
            )));
        }
        let f = self.layout.free;
        let mut coef = DMatrix::<f64>::zeros(f, f);
        let mut l = cond.l0.clone();
        let mut c = cond.c0;
        for (&a, ((rr, r_fx, r_xx), (ss, s_fx, s_xx))) in alphas.iter().zip(&cond.lines) {
            if !(a > 0.0) {
                return Err(Error::Domain(format!("α must be positive, got {a}")));
            }
            let (cm, cp) = self.kernel.coefficients(a);
            let (wm, wp) = (2.0 * cm, 2.0 * cp);
            coef += rr * wm + ss * wp;
            l -= r_fx * Complex64::new(wm, 0.0) + s_fx * Complex64::new(wp, 0.0);
            c -= (r_xx * wm + s_xx * wp) * 0.5;
        }
        let reduced = QuadraticIntegrand::new(
            &cond.q0 + kron(&coef, &cond.g),
            l,
            self.prefactor * c.exp(),
        )?;
        Ok(gaussian_integral(&reduced)? * self.weight(alphas))
    }
}

type LinePart = (DMatrix<f64>, DVector<Complex64>, Complex64);

/// [`Assembly`] with the external positions substituted: the free-slot
/// blocks of the vertex part and, per line, the free-slot blocks of
/// `r rᵀ` and `s sᵀ` together with their couplings to the externals.
struct Conditioned {
    q0: DMatrix<Complex64>,
    l0: DVector<Complex64>,
    c0: Complex64,
    lines: Vec<(LinePart, LinePart)>,
    g: DMatrix<Complex64>,
}

fn stack_externals(graph: &FeynmanGraph, d: usize, externals: &[DVector<f64>]) -> Result<DVector<f64>> {
    if externals.len() != graph.num_external() {
        return Err(Error::Dimension(format!(
            "{} external positions for {} external corners",
            externals.len(),
            graph.num_external()
        )));
    }
    let mut out = DVector::zeros(d * externals.len());
    for (e, x) in externals.iter().enumerate() {
        if x.len() != d {
            return Err(Error::Dimension(format!(
                "external position of dimension {} in a {d}-dimensional model",
                x.len()
            )));
        }
        out.rows_mut(e * d, d).copy_from(x);
    }
    Ok(out)
}

/// The Gaussian integrand over the internal slots at fixed α's, with all
/// normalizations except the α weights.
pub fn assemble_integrand(
    graph: &FeynmanGraph,
    params: &ModelParams,
    externals: &[DVector<f64>],
    alphas: &[f64],
) -> Result<QuadraticIntegrand> {
    let asm = Assembly::new(graph, params, None)?;
    let x = stack_externals(graph, params.dim(), externals)?;
    asm.integrand(alphas)?.condition(&asm.fixed_indices(), &x)
}

/// The α-integrand of the amplitude, weights included.
pub fn alpha_integrand(
    graph: &FeynmanGraph,
    params: &ModelParams,
    externals: &[DVector<f64>],
    alphas: &[f64],
) -> Result<Complex64> {
    let asm = Assembly::new(graph, params, None)?;
    let x = stack_externals(graph, params.dim(), externals)?;
    asm.evaluate(&asm.condition(Some(&x))?, alphas)
}

/// Nested adaptive quadrature over `[ε, α_max)^L`.
fn integrate_lines(
    lines: usize,
    cutoff: &CutoffSpec,
    f: &dyn Fn(&[f64]) -> Result<Complex64>,
) -> Result<Estimate> {
    fn nested(
        level: usize,
        lines: usize,
        alphas: &mut Vec<f64>,
        cutoff: &CutoffSpec,
        f: &dyn Fn(&[f64]) -> Result<Complex64>,
    ) -> Result<Estimate> {
        if level == lines {
            return f(alphas).map(|value| Estimate { value, error: 0.0 });
        }
        let mut failure = None;
        let r = integrate_alpha(
            |a| {
                alphas.truncate(level);
                alphas.push(a);
                match nested(level + 1, lines, alphas, cutoff, f) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        Estimate {
                            value: Complex64::new(0.0, 0.0),
                            error: 0.0,
                        }
                    }
                }
            },
            cutoff,
        )?;
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(Estimate {
            value: r.value.value,
            error: r.abs_error + r.value.error,
        })
    }
    nested(0, lines, &mut Vec::with_capacity(lines), cutoff, f)
}

fn check_constraints(asm: &Assembly, externals: &DVector<f64>) -> Result<()> {
    let d = asm.dim;
    let free = asm.layout.free;
    let scale = externals.amax().max(1.0);
    for &v in &asm.layout.constraint_vertices {
        let mut sum = DVector::<f64>::zeros(d);
        for (i, row) in asm.layout.rows[v].iter().enumerate() {
            for k in free..asm.layout.slots {
                if row[k] != 0.0 {
                    sum.axpy(CORNER_SIGNS[i] * row[k], &externals.rows((k - free) * d, d), 1.0);
                }
            }
        }
        let residual = sum.amax();
        if residual > CONSTRAINT_TOL * scale {
            return Err(Error::Constraint { residual });
        }
    }
    Ok(())
}

/// The regularized amputated amplitude at fixed external positions.
pub fn amplitude(
    graph: &FeynmanGraph,
    params: &ModelParams,
    externals: &[DVector<f64>],
    cutoff: &CutoffSpec,
) -> Result<AmplitudeResult> {
    let asm = Assembly::new(graph, params, None)?;
    let x = stack_externals(graph, params.dim(), externals)?;
    check_constraints(&asm, &x)?;
    let cond = asm.condition(Some(&x))?;
    let est = integrate_lines(graph.num_lines(), cutoff, &|a| asm.evaluate(&cond, a))?;
    let n = graph.num_vertices();
    let n_ext = graph.num_external();
    Ok(AmplitudeResult {
        value: est.value,
        abs_error: est.error,
        n,
        n_external: n_ext,
        epsilon: cutoff.epsilon,
        det_g_factor: params.metric().det().powf(0.5 * (n as f64 + 0.5 * n_ext as f64)),
        delta_vertices: asm.layout.constraint_vertices.len(),
    })
}

fn relative_gap(a: Complex64, b: Complex64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).norm() / scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovarianceReport {
    /// `A^{G,Σ^{-1}}({x_e})`.
    pub lhs: AmplitudeResult,
    /// `A^st({RG^{1/2}x_e})`.
    pub standard: AmplitudeResult,
    /// `(det G)^{(n+N/2)/2 - k/2} A^st`, `k` the number of delta vertices.
    pub rhs: Complex64,
    pub residual: f64,
    /// `(n+N/2)/2 - k/2`.
    pub expected_exponent: f64,
    /// `ln|lhs/standard| / ln det G`; NaN when `det G = 1`.
    pub measured_exponent: f64,
}

/// Compares `A^{G,Σ^{-1}}({x_e})` with `(det G)^{(n+N/2)/2} A^st({RG^{1/2}x_e})`.
pub fn check_covariance(
    graph: &FeynmanGraph,
    params: &ModelParams,
    externals: &[DVector<f64>],
    cutoff: &CutoffSpec,
) -> Result<CovarianceReport> {
    params.require_adapted()?;
    let dec = decompose_adapted(params.sigma(), params.metric())?;
    let lhs = amplitude(graph, params, externals, cutoff)?;
    let (g_st, s_st) = standard_structures(params.dim())?;
    let std_params = params.with_structures(&g_st, &s_st)?;
    let map = dec.r.matrix() * params.metric().sqrt();
    let mapped: Vec<DVector<f64>> = externals.iter().map(|x| &map * x).collect();
    let standard = amplitude(graph, &std_params, &mapped, cutoff)?;
    let det_g = params.metric().det();
    let expected_exponent =
        0.5 * (lhs.n as f64 + 0.5 * lhs.n_external as f64) - 0.5 * lhs.delta_vertices as f64;
    let rhs = standard.value * det_g.powf(expected_exponent);
    let measured_exponent = if (det_g.ln()).abs() < 1e-12 {
        f64::NAN
    } else {
        (lhs.value.norm() / standard.value.norm()).ln() / det_g.ln()
    };
    Ok(CovarianceReport {
        lhs,
        standard,
        rhs,
        residual: relative_gap(lhs.value, rhs),
        expected_exponent,
        measured_exponent,
    })
}

fn check_map_metric(params: &ModelParams, lambda: &OrthogonalMap) -> Result<()> {
    let g = params.metric().matrix();
    if lambda.dim() != params.dim()
        || max_abs(&(lambda.metric().matrix() - g)) > 1e-12 * max_abs(g)
    {
        return Err(Error::Precondition(
            "the orthogonal map preserves a different metric".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvarianceReport {
    pub original: Complex64,
    pub transformed: Complex64,
    pub residual: f64,
}

/// Compares `A^{G,ΛΣ^{-1}Λᵀ}({Λx_e})` with `A^{G,Σ^{-1}}({x_e})`.
pub fn check_orthogonal_invariance(
    graph: &FeynmanGraph,
    params: &ModelParams,
    externals: &[DVector<f64>],
    lambda: &OrthogonalMap,
    cutoff: &CutoffSpec,
) -> Result<InvarianceReport> {
    check_map_metric(params, lambda)?;
    let original = amplitude(graph, params, externals, cutoff)?.value;
    let rotated = params.with_sigma(&orthogonal_action(lambda, params.sigma())?)?;
    let mapped: Vec<DVector<f64>> = externals.iter().map(|x| lambda.apply(x)).collect();
    let transformed = amplitude(graph, &rotated, &mapped, cutoff)?.value;
    Ok(InvarianceReport {
        original,
        transformed,
        residual: relative_gap(original, transformed),
    })
}

/// `Σ_Γ w_Γ ∫dx₁…dx_N A_Γ({x_i}) φ(x₁)…φ(x_N)` over a finite list of
/// weighted graphs.
pub fn effective_action_term(
    graphs: &[(f64, FeynmanGraph)],
    params: &ModelParams,
    field: &FieldConfig,
    cutoff: &CutoffSpec,
) -> Result<Complex64> {
    let mut total = Complex64::new(0.0, 0.0);
    for (w, graph) in graphs {
        let asm = Assembly::new(graph, params, Some(field))?;
        let cond = asm.condition(None)?;
        let est = integrate_lines(graph.num_lines(), cutoff, &|a| asm.evaluate(&cond, a))?;
        total += est.value * *w;
    }
    Ok(total)
}

/// Relative change of [`effective_action_term`] under
/// `(Σ^{-1}, φ) ↦ (ΛΣ^{-1}Λᵀ, φ^Λ)`.
pub fn check_effective_action_invariance(
    graphs: &[(f64, FeynmanGraph)],
    params: &ModelParams,
    field: &FieldConfig,
    lambda: &OrthogonalMap,
    cutoff: &CutoffSpec,
) -> Result<InvarianceReport> {
    check_map_metric(params, lambda)?;
    let original = effective_action_term(graphs, params, field, cutoff)?;
    let rotated = params.with_sigma(&orthogonal_action(lambda, params.sigma())?)?;
    let moved = crate::action::transform_field(lambda, field)?;
    let transformed = effective_action_term(graphs, &rotated, &moved, cutoff)?;
    Ok(InvarianceReport {
        original,
        transformed,
        residual: relative_gap(original, transformed),
    })
}
