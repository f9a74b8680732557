//! Brute-force reference values for the one-vertex tadpoles in the standard
//! two-dimensional model (`G = 1`, `Σ = Σ_st`, θ = 1, Ω = 0.5, m² = 1).
//!
//! Run with `cargo run --release -p moyal-harmonic --example tadpole_oracle`;
//! writes `tests/data/tadpole_oracle.json`.

#[path = "../tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde_json::json;

const THETA: f64 = 1.0;
const OMEGA: f64 = 0.5;
const MASS2: f64 = 1.0;

type P = [f64; 2];

fn wedge(x: P, y: P) -> f64 {
    (2.0 / THETA) * (x[0] * y[1] - x[1] * y[0])
}

fn add(a: P, b: P, s: f64) -> P {
    [a[0] + s * b[0], a[1] + s * b[1]]
}

fn norm2(a: P) -> f64 {
    a[0] * a[0] + a[1] * a[1]
}

/// Corner positions from the internal variable `y`, and the line endpoints.
fn corners(planar: bool, e: [P; 2], y: P) -> ([P; 4], (usize, usize)) {
    if planar {
        // externals on corners 0, 3; corner 2 from x0 - x1 + x2 - x3 = 0
        ([e[0], y, add(add(y, e[0], -1.0), e[1], 1.0), e[1]], (1, 2))
    } else {
        // externals on corners 0, 2; corner 3 from the constraint
        ([e[0], y, e[1], add(add(e[0], y, -1.0), e[1], 1.0)], (1, 3))
    }
}

fn integrand(planar: bool, e: [P; 2], alpha: f64, y: P) -> Complex64 {
    let (x, (a, b)) = corners(planar, e, y);
    let ot = 2.0 * OMEGA / THETA;
    let t = (0.5 * alpha).tanh();
    let re = -0.25 * ot * (norm2(add(x[a], x[b], -1.0)) / t + t * norm2(add(x[a], x[b], 1.0)));
    let mut phase = 0.0;
    for i in 0..4 {
        for j in i + 1..4 {
            let sign = if (i + j) % 2 == 0 { -1.0 } else { 1.0 };
            phase += sign * wedge(x[i], x[j]);
        }
    }
    Complex64::new(re, -phase).exp()
}

/// Box centre and half-width covering the Gaussian envelope in `y`.
fn envelope(planar: bool, e: [P; 2], alpha: f64) -> (P, f64) {
    let ot = 2.0 * OMEGA / THETA;
    let t = (0.5 * alpha).tanh();
    let (cm, cp) = (0.25 * ot / t, 0.25 * ot * t);
    // the varying part of the line is 2y plus a constant c
    let (k, c) = if planar {
        (4.0 * cp, add(e[1], e[0], -1.0))
    } else {
        (4.0 * cm, [-(e[0][0] + e[1][0]), -(e[0][1] + e[1][1])])
    };
    ([-0.5 * c[0], -0.5 * c[1]], 9.0 / k.sqrt())
}

fn inner(planar: bool, e: [P; 2], alpha: f64, panels: usize) -> Complex64 {
    let (c, h) = envelope(planar, e, alpha);
    let (u, wu) = common::composite_legendre(c[0] - h, c[0] + h, panels, 12);
    let (v, wv) = common::composite_legendre(c[1] - h, c[1] + h, panels, 12);
    let mut s = Complex64::new(0.0, 0.0);
    for (y0, w0) in u.iter().zip(&wu) {
        for (y1, w1) in v.iter().zip(&wv) {
            s += integrand(planar, e, alpha, [*y0, *y1]) * (w0 * w1);
        }
    }
    s
}

fn amplitude(planar: bool, e: [P; 2], eps: f64, fine: bool) -> Complex64 {
    let ot = 2.0 * OMEGA / THETA;
    let scale = if fine { 2 } else { 1 };
    let (mut a, mut wa) = common::composite_legendre(eps, eps + 1.0, 24 * scale, 10);
    let (a2, w2) = common::composite_legendre(eps + 1.0, eps + 40.0, 40 * scale, 10);
    a.extend(a2);
    wa.extend(w2);
    let panels = if fine { 24 } else { 16 };
    let mut s = Complex64::new(0.0, 0.0);
    for (alpha, w) in a.iter().zip(&wa) {
        let weight = alpha.sinh().recip() * (-MASS2 * alpha / (2.0 * ot)).exp();
        s += inner(planar, e, *alpha, panels) * (w * weight);
    }
    let line = THETA / (4.0 * OMEGA) * (OMEGA / (PI * THETA));
    let vertex = 1.0 / (PI * THETA).powi(2);
    s * (line * vertex)
}

fn main() {
    let configs: [(&str, bool, f64, [P; 2]); 3] = [
        ("planar", true, 0.2, [[0.3, 0.0], [-0.1, 0.2]]),
        ("planar", true, 0.1, [[0.5, -0.3], [0.2, 0.4]]),
        ("non_planar", false, 0.2, [[0.3, 0.0], [-0.1, 0.2]]),
    ];
    let mut out = Vec::new();
    for (graph, planar, eps, e) in configs {
        let coarse = amplitude(planar, e, eps, false);
        let fine = amplitude(planar, e, eps, true);
        println!("{graph} ε={eps}: {fine} (resolution gap {:e})", (fine - coarse).norm());
        out.push(json!({
            "graph": graph,
            "epsilon": eps,
            "externals": e,
            "re": fine.re,
            "im": fine.im,
            "resolution_gap": (fine - coarse).norm(),
        }));
    }
    let doc = json!({
        "model": { "dim": 2, "theta": THETA, "omega": OMEGA, "mass2": MASS2 },
        "values": out,
    });
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/tadpole_oracle.json");
    std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap() + "\n").unwrap();
    println!("wrote {path}");
}
