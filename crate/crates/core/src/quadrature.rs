//! Adaptive Gauss–Kronrod (7/15) quadrature on finite and semi-infinite
//! intervals.
//!
//! The panel tree is refined by always bisecting the panel with the largest
//! error estimate, so results are deterministic for a given integrand.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Values that can be integrated: a vector space with a magnitude.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn magnitude(&self) -> f64;
    fn is_finite(&self) -> bool;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// A complex value carried together with an error bound, for nested
/// integrals whose inner error has to be propagated outwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: Complex64,
    pub error: f64,
}

impl Add for Estimate {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Estimate {
            value: self.value + o.value,
            error: self.error + o.error,
        }
    }
}

impl Sub for Estimate {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Estimate {
            value: self.value - o.value,
            error: self.error - o.error,
        }
    }
}

impl Mul<f64> for Estimate {
    type Output = Self;
    fn mul(self, s: f64) -> Self {
        Estimate {
            value: self.value * s,
            error: self.error * s.abs(),
        }
    }
}

impl QuadValue for Estimate {
    fn zero() -> Self {
        Estimate {
            value: Complex64::new(0.0, 0.0),
            error: 0.0,
        }
    }
    fn magnitude(&self) -> f64 {
        self.value.norm()
    }
    fn is_finite(&self) -> bool {
        self.value.re.is_finite() && self.value.im.is_finite() && self.error.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_panels: 2000,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(rel_tol: f64) -> Self {
        Self {
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub abs_error: f64,
    pub evaluations: usize,
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

fn gk15<T: QuadValue>(f: &mut impl FnMut(f64) -> T, a: f64, b: f64) -> Result<Panel<T>> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut fv1 = [T::zero(); 7];
    let mut fv2 = [T::zero(); 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k = res_k + (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            res_g = res_g + (f1 + f2) * WG[j / 2];
        }
    }
    if !res_k.is_finite() {
        return Err(Error::Quadrature {
            estimate: f64::NAN,
            error: f64::INFINITY,
            tolerance: 0.0,
        });
    }
    let mean = res_k * 0.5;
    let mut res_asc = (fc - mean).magnitude() * WGK[7];
    let mut res_abs = fc.magnitude() * WGK[7];
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).magnitude() + (fv2[j] - mean).magnitude());
        res_abs += WGK[j] * (fv1[j].magnitude() + fv2[j].magnitude());
    }
    let res_asc = res_asc * half.abs();
    let res_abs = res_abs * half.abs();
    let mut err = ((res_k - res_g) * half).magnitude();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Panel {
        a,
        b,
        value: res_k * half,
        error: err,
    })
}

/// Adaptive integration of `f` over the finite interval `[a, b]`.
pub fn integrate<T: QuadValue>(
    mut f: impl FnMut(f64) -> T,
    a: f64,
    b: f64,
    opts: &QuadOptions,
) -> Result<QuadResult<T>> {
    let mut panels = vec![gk15(&mut f, a, b)?];
    let mut evaluations = 15;
    loop {
        let total = panels.iter().fold(T::zero(), |acc, p| acc + p.value);
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let tolerance = opts.abs_tol.max(opts.rel_tol * total.magnitude());
        if error <= tolerance {
            return Ok(QuadResult {
                value: total,
                abs_error: error,
                evaluations,
            });
        }
        if panels.len() >= opts.max_panels {
            return Err(Error::Quadrature {
                estimate: total.magnitude(),
                error,
                tolerance,
            });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.error.total_cmp(&y.1.error))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return Err(Error::Quadrature {
                estimate: total.magnitude(),
                error,
                tolerance,
            });
        }
        panels.push(gk15(&mut f, p.a, mid)?);
        panels.push(gk15(&mut f, mid, p.b)?);
        evaluations += 30;
    }
}

/// Adaptive integration of `f` over `[a, ∞)` using `x = a - ln(1 - u)`,
/// `u ∈ [0, 1)`.
pub fn integrate_from<T: QuadValue>(
    mut f: impl FnMut(f64) -> T,
    a: f64,
    opts: &QuadOptions,
) -> Result<QuadResult<T>> {
    integrate(
        |u| {
            let one_minus = 1.0 - u;
            if one_minus <= 0.0 {
                return T::zero();
            }
            let x = a - one_minus.ln();
            f(x) * (1.0 / one_minus)
        },
        0.0,
        1.0,
        opts,
    )
}
