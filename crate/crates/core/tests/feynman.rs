use std::f64::consts::PI;

mod common;

use moyal_harmonic::action::{FieldConfig, ModelParams};
use moyal_harmonic::feynman::*;
use moyal_harmonic::gaussian::{
    gaussian_integral, partial_gaussian_integral, pullback_product, GaussianFunction, QuadraticIntegrand,
};
use moyal_harmonic::linalg::min_eigenvalue;
use moyal_harmonic::moyal::{star_gaussian, MoyalContext};
use moyal_harmonic::propagator::CutoffSpec;
use moyal_harmonic::sampling::{
    halton_points, random_adapted_sigma, random_gaussian, random_metric, random_sigma, GaussianSpec,
};
use moyal_harmonic::symplectic::{
    random_orthogonal, standard_structures, symmetry_group_check, Metric, OrthogonalMap,
};
use moyal_harmonic::Error;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

fn v(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}

fn standard_params(d: usize) -> ModelParams {
    let (g, s) = standard_structures(d).unwrap();
    ModelParams::new(&g, &s, 1.0, 0.5, 1.0, 1.0).unwrap()
}

fn adapted_params(d: usize, seed: u64) -> ModelParams {
    let g = random_metric(d, seed).unwrap();
    let s = random_adapted_sigma(&g, seed).unwrap();
    ModelParams::new(&g, &s, 1.0, 0.5, 1.0, 1.0).unwrap()
}

/// `det G/(πθ)^D ∫Π dx_i f_i(x_i) δ(x₁-x₂+x₃-x₄) e^{-iΣ(-1)^{i+j+1}x_i∧x_j}`
/// over `(x₁, x₂, x₃)` with `x₄ = x₁ - x₂ + x₃`.
fn delta_vertex_integral(ctx: &MoyalContext, f: [&GaussianFunction; 4]) -> Complex64 {
    let d = ctx.dim();
    let block = |c: [f64; 3]| {
        let mut p = DMatrix::zeros(d, 3 * d);
        for (k, ck) in c.iter().enumerate() {
            for i in 0..d {
                p[(i, k * d + i)] = *ck;
            }
        }
        p
    };
    let maps = [
        block([1.0, 0.0, 0.0]),
        block([0.0, 1.0, 0.0]),
        block([0.0, 0.0, 1.0]),
        block([1.0, -1.0, 1.0]),
    ];
    let factors: Vec<(&GaussianFunction, &DMatrix<f64>)> =
        f.iter().copied().zip(maps.iter()).collect();
    let mut integrand = pullback_product(3 * d, &factors).unwrap();
    let m = ctx.wedge_matrix();
    for i in 0..4 {
        for j in i + 1..4 {
            let sign = if (i + j) % 2 == 0 { -1.0 } else { 1.0 };
            let form = maps[i].transpose() * m * &maps[j];
            let sym = &form + form.transpose();
            integrand.q += sym.map(|x| Complex64::new(0.0, sign * x));
        }
    }
    let norm = ctx.metric().det() / (PI * ctx.theta()).powi(d as i32);
    gaussian_integral(&integrand).unwrap() * norm
}

#[test]
fn delta_vertex_matches_iterated_star_products() {
    for (d, seed) in [(2usize, 1u64), (2, 2), (4, 3)] {
        let g = random_metric(d, seed).unwrap();
        let s = random_adapted_sigma(&g, seed).unwrap();
        let ctx = MoyalContext::new(&g, &s, 0.8).unwrap();
        let f: Vec<GaussianFunction> = (0..4)
            .map(|k| random_gaussian(d, 10 * seed + k, &GaussianSpec::complex()).unwrap())
            .collect();
        let chain = star_gaussian(
            &ctx,
            &star_gaussian(&ctx, &star_gaussian(&ctx, &f[0], &f[1]).unwrap(), &f[2]).unwrap(),
            &f[3],
        )
        .unwrap();
        let lhs = gaussian_integral(&chain.to_integrand()).unwrap();
        let rhs = delta_vertex_integral(&ctx, [&f[0], &f[1], &f[2], &f[3]]);
        assert!((lhs - rhs).norm() / lhs.norm() < 1e-10, "D={d}: {lhs} vs {rhs}");
    }
}

fn metric_diag(d: &[f64]) -> Metric {
    Metric::new(DMatrix::from_diagonal(&DVector::from_column_slice(d))).unwrap()
}

fn adapted_for(g: &Metric, seed: u64) -> ModelParams {
    let s = random_adapted_sigma(g, seed).unwrap();
    ModelParams::new(g, &s, 1.0, 0.5, 1.0, 1.0).unwrap()
}

fn ext(d: usize, count: usize, seed: u64) -> Vec<DVector<f64>> {
    halton_points(count + seed as usize, d, -0.5, 0.5)
        .into_iter()
        .skip(seed as usize)
        .collect()
}

fn pair_sign(i: usize, j: usize) -> f64 {
    if (i + j) % 2 == 0 {
        -1.0
    } else {
        1.0
    }
}

/// Fits `c + Lᵀu - ½uᵀQu` to an exactly quadratic complex function.
fn fit_quadratic(k: usize, e: impl Fn(&DVector<f64>) -> Complex64) -> (DMatrix<Complex64>, DVector<Complex64>, Complex64) {
    let unit = |i: usize| {
        let mut u = DVector::zeros(k);
        u[i] = 1.0;
        u
    };
    let c = e(&DVector::zeros(k));
    let mut q = DMatrix::zeros(k, k);
    let mut l = DVector::zeros(k);
    let single: Vec<(Complex64, Complex64)> = (0..k).map(|i| (e(&unit(i)), e(&(-unit(i))))).collect();
    for i in 0..k {
        let (p, m) = single[i];
        l[i] = (p - m) * 0.5;
        q[(i, i)] = -(p + m - c * 2.0);
    }
    for i in 0..k {
        for j in 0..i {
            let both = e(&(unit(i) + unit(j)));
            let v = -(both - c - l[i] - l[j] + (q[(i, i)] + q[(j, j)]) * 0.5);
            q[(i, j)] = v;
            q[(j, i)] = v;
        }
    }
    (q, l, c)
}

/// The α-integrand at fixed α's, built from scratch with the delta
/// functions solved for the lowest-index integrated corner at each vertex.
fn alpha_integrand_oracle(
    graph: &FeynmanGraph,
    params: &ModelParams,
    externals: &[DVector<f64>],
    alphas: &[f64],
) -> Complex64 {
    let d = params.dim();
    let n = graph.num_vertices();
    let ctx = params.context();
    let g = params.metric().matrix();
    let ext_index = |c: Corner| graph.external().iter().position(|&e| e == c);
    let solved: Vec<usize> = (0..n)
        .map(|v| (0..4).find(|&i| ext_index(Corner::new(v, i)).is_none()).unwrap())
        .collect();
    let mut free = vec![[None; 4]; n];
    let mut k = 0;
    for v in 0..n {
        for i in 0..4 {
            if ext_index(Corner::new(v, i)).is_none() && solved[v] != i {
                free[v][i] = Some(k);
                k += 1;
            }
        }
    }
    let positions = |u: &DVector<f64>| -> Vec<[DVector<f64>; 4]> {
        (0..n)
            .map(|v| {
                let mut x: [DVector<f64>; 4] = std::array::from_fn(|_| DVector::zeros(d));
                for i in 0..4 {
                    if let Some(e) = ext_index(Corner::new(v, i)) {
                        x[i] = externals[e].clone();
                    } else if let Some(s) = free[v][i] {
                        x[i] = u.rows(s * d, d).into_owned();
                    }
                }
                let k = solved[v];
                let sign = [1.0, -1.0, 1.0, -1.0];
                let mut rest = DVector::zeros(d);
                for i in (0..4).filter(|&i| i != k) {
                    rest += &x[i] * sign[i];
                }
                x[k] = rest * (-sign[k]);
                x
            })
            .collect()
    };
    let otilde = 2.0 * params.omega() / params.theta();
    let exponent = |u: &DVector<f64>| {
        let x = positions(u);
        let mut e = Complex64::new(0.0, 0.0);
        for (&(a, b), &alpha) in graph.lines().iter().zip(alphas) {
            let xa = &x[a.vertex][a.index];
            let xb = &x[b.vertex][b.index];
            let diff = xa - xb;
            let sum = xa + xb;
            let t = (0.5 * alpha).tanh();
            e -= 0.25 * otilde * (diff.dot(&(g * &diff)) / t + t * sum.dot(&(g * &sum)));
        }
        for xv in &x {
            for i in 0..4 {
                for j in i + 1..4 {
                    e -= Complex64::new(0.0, pair_sign(i, j) * ctx.wedge(&xv[i], &xv[j]));
                }
            }
        }
        e
    };
    let (q, l, c) = fit_quadratic(k * d, exponent);
    let det_g = params.metric().det();
    let theta = params.theta();
    let line_norm = theta * det_g.sqrt() / (4.0 * params.omega())
        * (params.omega() / (PI * theta)).powf(0.5 * d as f64);
    let vertex_norm = det_g / (PI * theta).powi(d as i32);
    let weight: f64 = alphas
        .iter()
        .map(|&a| a.sinh().powf(-0.5 * d as f64) * (-params.mass2() * a / (2.0 * otilde)).exp())
        .product();
    let pre = line_norm.powi(alphas.len() as i32) * vertex_norm.powi(n as i32) * weight;
    let integrand = QuadraticIntegrand::new(q, l, Complex64::new(pre, 0.0) * c.exp()).unwrap();
    gaussian_integral(&integrand).unwrap()
}

#[test]
fn alpha_integrand_is_independent_of_the_eliminated_corner() {
    let cases: Vec<(FeynmanGraph, Vec<f64>)> = vec![
        (FeynmanGraph::planar_tadpole(), vec![0.3]),
        (FeynmanGraph::planar_tadpole(), vec![2.5]),
        (FeynmanGraph::non_planar_tadpole(), vec![0.7]),
        (FeynmanGraph::two_vertex_bubble(), vec![0.4, 1.3]),
    ];
    for d in [2, 4] {
        let p = adapted_params(d, 11);
        for (graph, alphas) in &cases {
            let x = ext(d, graph.num_external(), 3);
            let got = alpha_integrand(graph, &p, &x, alphas).unwrap();
            let want = alpha_integrand_oracle(graph, &p, &x, alphas);
            assert!((got - want).norm() <= 1e-9 * want.norm(), "D={d}: {got} vs {want}");
        }
    }
}

#[test]
fn vertex_factor_basics() {
    let p = adapted_params(2, 1);
    let ctx = p.context();
    let z = v(&[0.0, 0.0]);
    assert_eq!(vertex_factor(ctx, [&z, &z, &z, &z], &z), Complex64::new(1.0, 0.0));
    let x = ext(2, 4, 0);
    let w = vertex_factor(ctx, [&x[0], &x[1], &x[2], &x[3]], &x[0]);
    assert!((w.norm() - 1.0).abs() < 1e-14);
    // with p = 0 the factor reduces to the delta-form phase
    let w0 = vertex_factor(ctx, [&x[0], &x[1], &x[2], &x[3]], &z);
    assert!((w0 - vertex_phase(ctx, [&x[0], &x[1], &x[2], &x[3]])).norm() < 1e-15);
    // paired corners: swapping the pairs and reversing p conjugates the phase
    let q = v(&[0.4, -1.1]);
    let a = vertex_factor(ctx, [&x[0], &x[0], &x[2], &x[2]], &q);
    let b = vertex_factor(ctx, [&x[2], &x[2], &x[0], &x[0]], &(-&q));
    assert!((a - b.conj()).norm() < 1e-15);
    let c = vertex_constraint([&x[0], &x[1], &x[2], &x[3]]);
    assert!((c - (&x[0] - &x[1] + &x[2] - &x[3])).amax() < 1e-15);
}

/// Integrating the hypermomentum form over `x₁…x₄` and then `p` reproduces
/// the delta form: `δ(c) = det G/(πθ)^D ∫dp e^{-ip∧c}`.
#[test]
fn hypermomentum_marginal_matches_delta_form() {
    for (d, seed) in [(2usize, 4u64), (4, 6)] {
        let g = random_metric(d, seed).unwrap();
        let s = random_adapted_sigma(&g, seed).unwrap();
        let ctx = MoyalContext::new(&g, &s, 0.7).unwrap();
        let f: Vec<GaussianFunction> = (0..4)
            .map(|k| random_gaussian(d, 30 * seed + k, &GaussianSpec::complex()).unwrap())
            .collect();
        let n = 5 * d;
        let block = |k: usize| {
            let mut m = DMatrix::zeros(d, n);
            for i in 0..d {
                m[(i, k * d + i)] = 1.0;
            }
            m
        };
        let maps: Vec<DMatrix<f64>> = (0..5).map(block).collect();
        let factors: Vec<(&GaussianFunction, &DMatrix<f64>)> = f.iter().zip(maps.iter()).collect();
        let mut integrand = pullback_product(n, &factors).unwrap();
        let m = ctx.wedge_matrix();
        let mut add_phase = |a: &DMatrix<f64>, b: &DMatrix<f64>, sign: f64| {
            let form = a.transpose() * m * b;
            integrand.q += (&form + form.transpose()).map(|x| Complex64::new(0.0, sign * x));
        };
        for i in 0..4 {
            for j in i + 1..4 {
                add_phase(&maps[i], &maps[j], pair_sign(i, j));
            }
            add_phase(&maps[4], &maps[i], [1.0, -1.0, 1.0, -1.0][i]);
        }
        let over_p = partial_gaussian_integral(&integrand, &(0..4 * d).collect::<Vec<_>>()).unwrap();
        let norm = g.det() / (PI * ctx.theta()).powi(d as i32);
        let lhs = gaussian_integral(&over_p).unwrap() * norm * norm;
        let rhs = delta_vertex_integral(&ctx, [&f[0], &f[1], &f[2], &f[3]]);
        assert!((lhs - rhs).norm() <= 1e-8 * rhs.norm(), "D={d}: {lhs} vs {rhs}");
    }
}

#[test]
fn tadpole_integrands_converge_on_an_alpha_grid() {
    for d in [2, 4] {
        let p = adapted_params(d, 2);
        for graph in [FeynmanGraph::planar_tadpole(), FeynmanGraph::non_planar_tadpole()] {
            let x = ext(d, 2, 1);
            for k in 0..40 {
                let alpha = 0.01 * 1.3f64.powi(k);
                let q = assemble_integrand(&graph, &p, &x, &[alpha]).unwrap();
                assert!(min_eigenvalue(&q.q.map(|c| c.re)) > 0.0, "α = {alpha}");
                assert!(gaussian_integral(&q).unwrap().is_finite());
            }
        }
    }
}

#[test]
fn tree_vertex_is_the_delta_coefficient() {
    let p = adapted_params(2, 3);
    let cut = CutoffSpec::new(0.1).unwrap();
    let (a, b, c) = (v(&[0.3, -0.2]), v(&[0.1, 0.4]), v(&[-0.5, 0.2]));
    let last = &a - &b + &c;
    let r = amplitude(&FeynmanGraph::tree_vertex(), &p, &[a.clone(), b.clone(), c.clone(), last.clone()], &cut)
        .unwrap();
    let norm = p.metric().det() / PI.powi(2);
    let want = vertex_phase(p.context(), [&a, &b, &c, &last]) * norm;
    assert!((r.value - want).norm() < 1e-14);
    assert_eq!(r.delta_vertices, 1);
    let bad = amplitude(&FeynmanGraph::tree_vertex(), &p, &[a, b, c, last * 1.01], &cut);
    assert!(matches!(bad, Err(Error::Constraint { .. })));
}

#[test]
fn rejects_unsupported_inputs() {
    let p = adapted_params(2, 3);
    let cut = CutoffSpec::new(0.2).unwrap();
    let g = FeynmanGraph::planar_tadpole();
    assert!(matches!(amplitude(&g, &p, &ext(2, 1, 0), &cut), Err(Error::Dimension(_))));
    assert!(matches!(amplitude(&g, &p, &ext(4, 2, 0), &cut), Err(Error::Dimension(_))));
    let metric = random_metric(2, 1).unwrap();
    let generic = ModelParams::new(&metric, &random_sigma(2, 5).unwrap(), 1.0, 0.5, 1.0, 1.0).unwrap();
    if !generic.is_adapted() {
        assert!(matches!(amplitude(&g, &generic, &ext(2, 2, 0), &cut), Err(Error::Precondition(_))));
    }
    let many = FeynmanGraph::new(
        2,
        (0..4).map(|i| (Corner::new(0, i), Corner::new(1, i))).collect(),
        vec![],
    )
    .unwrap();
    assert!(matches!(amplitude(&many, &p, &[], &cut), Err(Error::Graph(_))));
}

#[test]
fn origin_externals_give_real_tadpoles() {
    let p = standard_params(2);
    let cut = CutoffSpec::new(0.2).unwrap();
    let z = v(&[0.0, 0.0]);
    for graph in [FeynmanGraph::planar_tadpole(), FeynmanGraph::non_planar_tadpole()] {
        let r = amplitude(&graph, &p, &[z.clone(), z.clone()], &cut).unwrap();
        assert!(r.value.im.abs() < 1e-10 * r.value.re.abs(), "{}", r.value);
        assert!(r.value.re > 0.0);
    }
}

#[test]
fn amplitude_is_continuous_in_the_externals() {
    let p = adapted_params(2, 8);
    let cut = CutoffSpec::new(0.2).unwrap();
    let g = FeynmanGraph::planar_tadpole();
    let x = ext(2, 2, 2);
    let base = amplitude(&g, &p, &x, &cut).unwrap().value;
    let h = 1e-5;
    let moved: Vec<DVector<f64>> = x.iter().map(|y| y.add_scalar(h)).collect();
    let near = amplitude(&g, &p, &moved, &cut).unwrap().value;
    assert!((near - base).norm() < 1e-3 * base.norm());
    assert!((near - base).norm() > 0.0);
}

#[test]
fn smaller_cutoff_adds_a_positive_short_distance_piece_at_the_origin() {
    let p = standard_params(2);
    let z = v(&[0.0, 0.0]);
    let g = FeynmanGraph::planar_tadpole();
    let mut last = 0.0;
    for eps in [0.4, 0.2, 0.1] {
        let r = amplitude(&g, &p, &[z.clone(), z.clone()], &CutoffSpec::new(eps).unwrap()).unwrap();
        assert!(r.value.re > last);
        last = r.value.re;
    }
}

#[test]
fn covariance_with_standard_metric() {
    let (g, _) = standard_structures(2).unwrap();
    let p = adapted_for(&g, 5);
    for graph in [FeynmanGraph::planar_tadpole(), FeynmanGraph::non_planar_tadpole()] {
        for eps in [0.4, 0.1] {
            let r = check_covariance(&graph, &p, &ext(2, 2, 4), &CutoffSpec::new(eps).unwrap()).unwrap();
            assert!(r.residual < 1e-8, "ε = {eps}: {}", r.residual);
            assert!(r.measured_exponent.is_nan());
        }
    }
}

#[test]
fn covariance_with_diagonal_metric() {
    let g = metric_diag(&[4.0, 1.0]);
    let p = adapted_for(&g, 7);
    let cut = CutoffSpec::new(0.2).unwrap();
    for graph in [FeynmanGraph::planar_tadpole(), FeynmanGraph::non_planar_tadpole()] {
        let r = check_covariance(&graph, &p, &ext(2, 2, 5), &cut).unwrap();
        assert!(r.residual < 1e-6, "{}", r.residual);
        assert!((r.expected_exponent - 1.0).abs() < 1e-15);
        assert!((r.measured_exponent - r.expected_exponent).abs() < 1e-6);
        assert!((r.lhs.det_g_factor - 4.0).abs() < 1e-12);
    }
}

#[test]
fn covariance_in_four_dimensions() {
    let p = adapted_params(4, 9);
    let cut = CutoffSpec::new(0.2).unwrap();
    let r = check_covariance(&FeynmanGraph::non_planar_tadpole(), &p, &ext(4, 2, 1), &cut).unwrap();
    assert!(r.residual < 1e-5, "{}", r.residual);
    let r = check_covariance(&FeynmanGraph::two_vertex_bubble(), &p, &ext(4, 4, 2), &cut).unwrap();
    assert!(r.residual < 1e-5, "{}", r.residual);
    assert!((r.expected_exponent - 2.0).abs() < 1e-15);
}

#[test]
fn delta_vertices_lower_the_covariance_exponent() {
    let g = metric_diag(&[3.0, 0.5]);
    let p = adapted_for(&g, 2);
    let (a, b, c) = (v(&[0.3, -0.2]), v(&[0.1, 0.4]), v(&[-0.5, 0.2]));
    let last = &a - &b + &c;
    let r = check_covariance(&FeynmanGraph::tree_vertex(), &p, &[a, b, c, last], &CutoffSpec::new(0.2).unwrap())
        .unwrap();
    assert!(r.residual < 1e-12);
    assert!((r.expected_exponent - 1.0).abs() < 1e-15);
}

#[test]
fn orthogonal_invariance_of_amplitudes() {
    let p = adapted_params(2, 4);
    let cut = CutoffSpec::new(0.2).unwrap();
    let x = ext(2, 2, 6);
    let id = OrthogonalMap::identity(p.metric());
    let r = check_orthogonal_invariance(&FeynmanGraph::planar_tadpole(), &p, &x, &id, &cut).unwrap();
    assert!(r.residual < 1e-15);
    for seed in 0..3 {
        let lam = random_orthogonal(p.metric(), seed);
        for graph in [FeynmanGraph::planar_tadpole(), FeynmanGraph::non_planar_tadpole()] {
            let r = check_orthogonal_invariance(&graph, &p, &x, &lam, &cut).unwrap();
            assert!(r.residual < 1e-8, "{}", r.residual);
        }
    }
    let other = random_orthogonal(&random_metric(2, 99).unwrap(), 1);
    assert!(matches!(
        check_orthogonal_invariance(&FeynmanGraph::planar_tadpole(), &p, &x, &other, &cut),
        Err(Error::Precondition(_))
    ));
}

#[test]
fn isotropy_maps_fix_the_amplitude_pointwise() {
    // rotations of the standard plane preserve both G and Σ
    let p = standard_params(2);
    let cut = CutoffSpec::new(0.2).unwrap();
    let x = ext(2, 2, 3);
    let t: f64 = 0.7;
    let rot = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
    let lam = OrthogonalMap::new(rot, p.metric()).unwrap();
    assert!(symmetry_group_check(&lam, p.sigma()));
    for graph in [FeynmanGraph::planar_tadpole(), FeynmanGraph::non_planar_tadpole()] {
        let a = amplitude(&graph, &p, &x, &cut).unwrap().value;
        let moved: Vec<DVector<f64>> = x.iter().map(|y| lam.apply(y)).collect();
        let b = amplitude(&graph, &p, &moved, &cut).unwrap().value;
        assert!((a - b).norm() < 1e-8 * a.norm());
    }
}

fn field(d: usize, seed: u64) -> FieldConfig {
    FieldConfig::from_gaussian(random_gaussian(d, seed, &GaussianSpec::real()).unwrap()).unwrap()
}

#[test]
fn effective_action_basics() {
    let p = adapted_params(2, 6);
    let cut = CutoffSpec::new(0.2).unwrap();
    let phi = field(2, 3);
    assert_eq!(effective_action_term(&[], &p, &phi, &cut).unwrap(), Complex64::new(0.0, 0.0));
    let planar = FeynmanGraph::planar_tadpole();
    let non_planar = FeynmanGraph::non_planar_tadpole();
    let a = effective_action_term(&[(1.0, planar.clone())], &p, &phi, &cut).unwrap();
    let b = effective_action_term(&[(1.0, non_planar.clone())], &p, &phi, &cut).unwrap();
    let mix = effective_action_term(&[(2.0, planar), (-0.5, non_planar)], &p, &phi, &cut).unwrap();
    assert!((mix - (a * 2.0 - b * 0.5)).norm() < 1e-12 * mix.norm());
}

#[test]
fn effective_action_is_invariant() {
    let p = adapted_params(2, 6);
    let cut = CutoffSpec::new(0.2).unwrap();
    let phi = field(2, 4);
    let graphs = [
        (1.0, FeynmanGraph::planar_tadpole()),
        (0.5, FeynmanGraph::non_planar_tadpole()),
    ];
    for seed in 0..2 {
        let lam = random_orthogonal(p.metric(), seed + 10);
        let r = check_effective_action_invariance(&graphs, &p, &phi, &lam, &cut).unwrap();
        assert!(r.residual < 1e-5, "{}", r.residual);
    }
}

#[test]
fn effective_tadpole_matches_integrated_amplitude() {
    // ∫dx dy A(x, y) φ(x) φ(y) by tensor Gauss–Hermite over the externals
    let p = standard_params(2);
    let cut = CutoffSpec::new(1.5).unwrap();
    let phi = FieldConfig::new(1.0, &(DMatrix::identity(2, 2) * 1.5), &v(&[0.2, -0.1])).unwrap();
    let graph = FeynmanGraph::planar_tadpole();
    let direct = effective_action_term(&[(1.0, graph.clone())], &p, &phi, &cut).unwrap();
    let (nodes, weights) = common::gauss_hermite(10);
    let s = 1.0 / 1.5f64.sqrt();
    let mut sum = Complex64::new(0.0, 0.0);
    let mut grid = Vec::new();
    for (i, &u) in nodes.iter().enumerate() {
        for (j, &w) in nodes.iter().enumerate() {
            grid.push((v(&[s * u, s * w]), weights[i] * weights[j] * s * s));
        }
    }
    for (x, wx) in &grid {
        for (y, wy) in &grid {
            // strip the Gaussian weight of φ(x)φ(y) and restore the linear part
            let lin = (0.2 * (x[0] + y[0]) - 0.1 * (x[1] + y[1])).exp();
            let a = amplitude(&graph, &p, &[x.clone(), y.clone()], &cut).unwrap().value;
            sum += a * (wx * wy * lin);
        }
    }
    assert!((sum - direct).norm() < 1e-4 * direct.norm(), "{sum} vs {direct}");
}

#[test]
fn tadpoles_match_brute_force_reference() {
    let text = include_str!("data/tadpole_oracle.json");
    let doc: serde_json::Value = serde_json::from_str(text).unwrap();
    let p = standard_params(2);
    for entry in doc["values"].as_array().unwrap() {
        let graph = match entry["graph"].as_str().unwrap() {
            "planar" => FeynmanGraph::planar_tadpole(),
            _ => FeynmanGraph::non_planar_tadpole(),
        };
        let x: Vec<DVector<f64>> = entry["externals"]
            .as_array()
            .unwrap()
            .iter()
            .map(|p| v(&[p[0].as_f64().unwrap(), p[1].as_f64().unwrap()]))
            .collect();
        let eps = entry["epsilon"].as_f64().unwrap();
        let want = Complex64::new(entry["re"].as_f64().unwrap(), entry["im"].as_f64().unwrap());
        let got = amplitude(&graph, &p, &x, &CutoffSpec::new(eps).unwrap()).unwrap().value;
        assert!((got - want).norm() < 1e-8 * want.norm(), "{got} vs {want}");
    }
}

#[test]
fn orthogonal_invariance_in_four_dimensions() {
    let p = adapted_params(4, 12);
    let cut = CutoffSpec::new(0.2).unwrap();
    let lam = random_orthogonal(p.metric(), 3);
    let r = check_orthogonal_invariance(&FeynmanGraph::non_planar_tadpole(), &p, &ext(4, 2, 7), &lam, &cut).unwrap();
    assert!(r.residual < 1e-5, "{}", r.residual);
}

#[test]
fn metric_rescaling_bookkeeping() {
    let c = 2.5;
    let g = random_metric(2, 13).unwrap();
    let s = random_adapted_sigma(&g, 13).unwrap();
    let base = ModelParams::new(&g, &s, 1.0, 0.5, 1.0, 1.0).unwrap();
    let scaled = ModelParams::new(&g.scaled(c).unwrap(), &s.scaled(c).unwrap(), 1.0, 0.5, 1.0, 1.0).unwrap();
    let cut = CutoffSpec::new(0.2).unwrap();
    let x = ext(2, 2, 9);
    let moved: Vec<DVector<f64>> = x.iter().map(|y| y * c.sqrt()).collect();
    for graph in [FeynmanGraph::planar_tadpole(), FeynmanGraph::non_planar_tadpole()] {
        let a = amplitude(&graph, &scaled, &x, &cut).unwrap();
        let b = amplitude(&graph, &base, &moved, &cut).unwrap();
        // (det cG / det G)^{(n+N/2)/2} = c^{D(n+N/2)/2} with D = 2, n = 1, N = 2
        let want = b.value * c.powi(2);
        assert!((a.value - want).norm() < 1e-6 * want.norm());
        assert!((a.det_g_factor / b.det_g_factor - c.powi(2)).abs() < 1e-12);
    }
}

#[test]
fn invariance_holds_at_every_cutoff() {
    let p = adapted_params(2, 14);
    let x = ext(2, 2, 8);
    let lam = random_orthogonal(p.metric(), 21);
    for eps in [0.4, 0.2, 0.1] {
        let cut = CutoffSpec::new(eps).unwrap();
        for graph in [FeynmanGraph::planar_tadpole(), FeynmanGraph::non_planar_tadpole()] {
            let r = check_orthogonal_invariance(&graph, &p, &x, &lam, &cut).unwrap();
            assert!(r.residual < 1e-6, "ε = {eps}: {}", r.residual);
        }
    }
}
