//! Command implementations. Each returns a process exit code.

use std::io::Write;

use moyal_harmonic::action::{
    action_terms, check_classical_invariance, harmonic_matrix, harmonic_matrix_adapted, FieldConfig,
};
use moyal_harmonic::feynman::{
    alpha_integrand, amplitude, check_covariance, check_effective_action_invariance, check_orthogonal_invariance,
    FeynmanGraph,
};
use moyal_harmonic::gaussian::GaussianFunction;
use moyal_harmonic::linalg::max_abs;
use moyal_harmonic::moyal::{
    check_associativity, check_derivation_relations, check_tracial, commutator_residual,
};
use moyal_harmonic::polynomial::PolynomialFunction;
use moyal_harmonic::propagator::{check_green_property, propagator_value, MehlerKernel};
use moyal_harmonic::sampling::{halton_points, random_gaussian, GaussianSpec};
use moyal_harmonic::symplectic::{decompose_adapted, is_adapted, random_orthogonal, Metric};
use moyal_harmonic::Error;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const TRACIAL_TOL: f64 = 1e-8;
pub const ASSOCIATIVITY_TOL: f64 = 1e-9;
pub const COMMUTATOR_TOL: f64 = 1e-12;
pub const DERIVATION_TOL: f64 = 1e-10;
pub const CLASSICAL_TOL: f64 = 1e-8;
pub const HARMONIC_TOL: f64 = 1e-10;
pub const SCALING_TOL: f64 = 1e-10;
pub const GREEN_TOL: f64 = 0.05;
pub const COVARIANCE_TOL: f64 = 1e-6;
pub const INVARIANCE_TOL: f64 = 1e-5;

/// ε halved from 0.4 seven times; the Green residual shrinks linearly in ε.
const GREEN_EPSILONS: [f64; 8] = [0.4, 0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125];

/// Exit code for a library error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Quadrature { .. } | Error::Numerical { .. } | Error::Divergent { .. } | Error::Singular(_) => {
            EXIT_NUMERICAL
        }
        _ => EXIT_INVALID,
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn line(out: &mut dyn Write, value: &impl Serialize) {
    writeln!(out, "{}", serde_json::to_string(value).expect("record serializes")).expect("stdout is writable");
}

pub fn adapt(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let p = &cfg.params;
    let witness = match is_adapted(p.sigma(), p.metric()) {
        Ok(w) => w,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let Some(i) = witness else {
        let defect = moyal_harmonic::symplectic::adaptedness_defect(p.sigma(), p.metric()).unwrap_or(f64::NAN);
        let _ = writeln!(out, "adapted: false");
        let _ = writeln!(out, "defect: {defect:e}");
        let _ = writeln!(err, "Σ is not adapted to G");
        return EXIT_FAILED;
    };
    let dec = match decompose_adapted(p.sigma(), p.metric()) {
        Ok(d) => d,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let _ = writeln!(out, "adapted: true");
    let _ = writeln!(out, "witness I: {}", serde_json::to_string(&rows(i.matrix())).unwrap());
    let _ = writeln!(out, "R: {}", serde_json::to_string(&rows(dec.r.matrix())).unwrap());
    let _ = writeln!(out, "block signs: {:?}", dec.signs);
    let _ = writeln!(out, "residual: {:e}", dec.residual);
    let _ = writeln!(err, "decomposed a {}-dimensional adapted structure", p.dim());
    EXIT_OK
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Star,
    Action,
    Propagator,
    Covariance,
    Invariance,
    All,
}

impl Suite {
    fn includes(self, other: Suite) -> bool {
        self == other || self == Suite::All
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub check: String,
    pub params_digest: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

struct Verifier<'a> {
    cfg: &'a RunConfig,
    out: &'a mut dyn Write,
    err: &'a mut dyn Write,
    total: usize,
    passed: usize,
    hard_error: Option<i32>,
}

impl Verifier<'_> {
    fn record(&mut self, check: String, residual: f64, tolerance: f64, extra_ok: bool) {
        let pass = residual < tolerance && extra_ok;
        self.total += 1;
        self.passed += pass as usize;
        let rec = Record {
            check,
            params_digest: self.cfg.digest().to_owned(),
            residual,
            tolerance,
            pass,
        };
        line(self.out, &rec);
    }

    fn run(&mut self, check: &str, tolerance: f64, f: impl FnOnce() -> Result<(f64, bool), Error>) {
        match f() {
            Ok((r, ok)) => self.record(check.to_owned(), r, tolerance, ok),
            Err(e) => {
                let _ = writeln!(self.err, "{check}: {e}");
                self.hard_error.get_or_insert(exit_code(&e));
            }
        }
    }
}

fn sample_polynomial(d: usize) -> PolynomialFunction {
    let x = |mu| PolynomialFunction::coordinate(d, mu);
    &(&(&x(0) * &x(0)) * &x(1)) + &(&x(d - 1) * &x(d / 2))
}

pub fn verify(cfg: &RunConfig, suite: Suite, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let mut v = Verifier {
        cfg,
        out,
        err,
        total: 0,
        passed: 0,
        hard_error: None,
    };
    let p = &cfg.params;
    let d = p.dim();
    let ctx = p.context();
    let seed = cfg.seed;

    if suite.includes(Suite::Star) {
        for i in 0..cfg.draws {
            let s = 1000 * seed + 3 * i as u64;
            let draw = |k| random_gaussian(d, s + k, &GaussianSpec::complex());
            v.run(&format!("star.tracial.{i}"), TRACIAL_TOL, || {
                Ok((check_tracial(ctx, &draw(0)?, &draw(1)?)?, true))
            });
            v.run(&format!("star.associativity.{i}"), ASSOCIATIVITY_TOL, || {
                Ok((check_associativity(ctx, &draw(0)?, &draw(1)?, &draw(2)?)?.max(), true))
            });
        }
        v.run("star.commutator", COMMUTATOR_TOL, || Ok((commutator_residual(ctx), true)));
        v.run("star.derivation", DERIVATION_TOL, || {
            Ok((check_derivation_relations(ctx, &sample_polynomial(d)).max(), true))
        });
    }

    if suite.includes(Suite::Action) {
        for i in 0..cfg.draws {
            let s = 1000 * seed + i as u64;
            v.run(&format!("action.classical-invariance.{i}"), CLASSICAL_TOL, || {
                let phi = FieldConfig::from_gaussian(random_gaussian(d, s, &GaussianSpec::real())?)?;
                let lam = random_orthogonal(p.metric(), s + 500);
                Ok((check_classical_invariance(p, &phi, &lam)?, true))
            });
        }
        if p.is_adapted() {
            v.run("action.harmonic-identity", HARMONIC_TOL, || {
                let h = harmonic_matrix(ctx);
                Ok((max_abs(&(&h - harmonic_matrix_adapted(ctx))) / max_abs(&h), true))
            });
        }
    }

    if suite.includes(Suite::Propagator) {
        v.run("propagator.metric-scaling", SCALING_TOL, || {
            let k = MehlerKernel::new(p)?;
            let st = MehlerKernel::from_parts(Metric::identity(d)?, p.theta(), p.omega(), p.mass2())?;
            let cut = cfg.cutoff()?;
            let pts = halton_points(2, d, -1.0, 1.0);
            let g = p.metric();
            let got = propagator_value(&k, &cut, &pts[0], &pts[1])?.value;
            let want = g.det().sqrt() * propagator_value(&st, &cut, &(g.sqrt() * &pts[0]), &(g.sqrt() * &pts[1]))?.value;
            Ok(((got - want).abs() / want.abs(), true))
        });
        v.run("propagator.green", GREEN_TOL, || {
            let k = MehlerKernel::new(p)?;
            let r = check_green_property(&k, &GaussianFunction::isotropic(d, 1.0), &DVector::zeros(d), &GREEN_EPSILONS)?;
            Ok((r.final_relative(), r.strictly_decreasing()))
        });
    }

    let graph = cfg.graph_or_default();
    let externals = if suite.includes(Suite::Covariance) || suite.includes(Suite::Invariance) {
        match cfg.externals_for(&graph) {
            Ok(x) => Some(x),
            Err(e) => {
                let _ = writeln!(v.err, "error: {e}");
                return EXIT_INVALID;
            }
        }
    } else {
        None
    };

    if suite.includes(Suite::Covariance) {
        let x = externals.as_ref().expect("externals resolved");
        v.run("covariance.amplitude", COVARIANCE_TOL, || {
            Ok((check_covariance(&graph, p, x, &cfg.cutoff()?)?.residual, true))
        });
    }

    if suite.includes(Suite::Invariance) {
        let x = externals.as_ref().expect("externals resolved");
        let lam = random_orthogonal(p.metric(), seed);
        v.run("invariance.amplitude", INVARIANCE_TOL, || {
            Ok((check_orthogonal_invariance(&graph, p, x, &lam, &cfg.cutoff()?)?.residual, true))
        });
        v.run("invariance.effective-action", INVARIANCE_TOL, || {
            let weighted = [(1.0, graph.clone())];
            Ok((check_effective_action_invariance(&weighted, p, &cfg.field, &lam, &cfg.cutoff()?)?.residual, true))
        });
    }

    let _ = writeln!(v.err, "{} of {} checks passed", v.passed, v.total);
    match v.hard_error {
        Some(code) => code,
        None if v.passed == v.total => EXIT_OK,
        None => EXIT_FAILED,
    }
}

/// Geometric grid of `points` values from `ε` to `alpha_max`.
pub fn alpha_grid(epsilon: f64, alpha_max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![epsilon];
    }
    let ratio = (alpha_max / epsilon).powf(1.0 / (points - 1) as f64);
    (0..points).map(|k| epsilon * ratio.powi(k as i32)).collect()
}

pub struct AlphaScan {
    pub alpha_max: f64,
    pub points: usize,
}

pub fn amplitude_cmd(cfg: &RunConfig, scan: Option<AlphaScan>, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let graph: FeynmanGraph = cfg.graph_or_default();
    let x = match cfg.externals_for(&graph) {
        Ok(x) => x,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_INVALID;
        }
    };
    let p = &cfg.params;
    if let Some(scan) = scan {
        if !(scan.alpha_max > cfg.epsilon) || scan.points == 0 {
            let _ = writeln!(err, "error: the α-scan needs alpha_max > ε and at least one point");
            return EXIT_INVALID;
        }
        let l = graph.num_lines();
        let grid = alpha_grid(cfg.epsilon, scan.alpha_max, scan.points);
        let header: Vec<String> = (1..=l).map(|i| format!("alpha_{i}")).chain(["re".into(), "im".into()]).collect();
        let _ = writeln!(out, "{}", header.join(","));
        let rows = grid.len().pow(l as u32);
        for r in 0..rows {
            let alphas: Vec<f64> = (0..l).map(|i| grid[(r / grid.len().pow((l - 1 - i) as u32)) % grid.len()]).collect();
            match alpha_integrand(&graph, p, &x, &alphas) {
                Ok(z) => {
                    let cols: Vec<String> = alphas.iter().map(|a| a.to_string()).chain([z.re.to_string(), z.im.to_string()]).collect();
                    let _ = writeln!(out, "{}", cols.join(","));
                }
                Err(e) => {
                    let _ = writeln!(err, "error: {e}");
                    return exit_code(&e);
                }
            }
        }
        let _ = writeln!(err, "{rows} α-integrand samples over {l} lines");
        return EXIT_OK;
    }
    let cut = match cfg.cutoff() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    match amplitude(&graph, p, &x, &cut) {
        Ok(a) => {
            line(
                out,
                &json!({
                    "params_digest": cfg.digest(),
                    "re": a.value.re,
                    "im": a.value.im,
                    "abs_error": a.abs_error,
                    "epsilon": a.epsilon,
                    "vertices": a.n,
                    "external": a.n_external,
                    "det_g_factor": a.det_g_factor,
                    "delta_vertices": a.delta_vertices,
                }),
            );
            let _ = writeln!(err, "amplitude {} ± {:e} at ε = {}", a.value, a.abs_error, a.epsilon);
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn propagator_cmd(cfg: &RunConfig, x: &[f64], y: &[f64], out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let d = cfg.dim();
    let point = |v: &[f64]| if v.is_empty() { DVector::zeros(d) } else { DVector::from_column_slice(v) };
    let (px, py) = (point(x), point(y));
    let result = MehlerKernel::new(&cfg.params)
        .and_then(|k| Ok((k, cfg.cutoff()?)))
        .and_then(|(k, cut)| propagator_value(&k, &cut, &px, &py));
    match result {
        Ok(r) => {
            line(
                out,
                &json!({
                    "params_digest": cfg.digest(),
                    "x": px.as_slice(),
                    "y": py.as_slice(),
                    "epsilon": cfg.epsilon,
                    "value": r.value,
                    "abs_error": r.abs_error,
                }),
            );
            let _ = writeln!(err, "C_ε(x, y) = {} ± {:e}", r.value, r.abs_error);
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn action_cmd(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    match action_terms(&cfg.params, &cfg.field) {
        Ok(t) => {
            line(
                out,
                &json!({
                    "params_digest": cfg.digest(),
                    "kinetic": t.kinetic,
                    "harmonic": t.harmonic,
                    "mass": t.mass,
                    "quartic_re": t.quartic.re,
                    "quartic_im": t.quartic.im,
                    "total": t.total(),
                }),
            );
            let _ = writeln!(err, "S[φ] = {}", t.total());
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
