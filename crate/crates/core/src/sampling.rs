//! Seeded generators for test configurations and deterministic sample points.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::gaussian::GaussianFunction;
use crate::symplectic::{
    random_standard_orthogonal, standard_sigma, Metric, SymplecticStructure,
};

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Random positive-definite metric `QᵀΛQ` with eigenvalues in `[0.5, 3]`.
pub fn random_metric(d: usize, seed: u64) -> Result<Metric> {
    let mut r = rng(seed, 1);
    let q = random_standard_orthogonal(d, seed ^ 0x9e37_79b9_7f4a_7c15);
    let diag = DVector::from_fn(d, |_, _| r.random_range(0.5..3.0));
    let g = q.transpose() * DMatrix::from_diagonal(&diag) * &q;
    Metric::new((&g + g.transpose()) * 0.5)
}

/// Random symplectic structure adapted to `g`: `G^{1/2} Qᵀ Σ_st Q G^{1/2}`.
pub fn random_adapted_sigma(g: &Metric, seed: u64) -> Result<SymplecticStructure> {
    let d = g.dim();
    let q = random_standard_orthogonal(d, seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ 0xa5a5);
    SymplecticStructure::new(g.sqrt() * q.transpose() * standard_sigma(d) * q * g.sqrt())
}

/// Random invertible antisymmetric matrix, generally not adapted to any
/// particular metric.
pub fn random_sigma(d: usize, seed: u64) -> Result<SymplecticStructure> {
    let mut r = rng(seed, 2);
    let a = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
    SymplecticStructure::new(&a - a.transpose() + standard_sigma(d))
}

/// Shape of randomly drawn Gaussians.
#[derive(Debug, Clone, Copy)]
pub struct GaussianSpec {
    /// Eigenvalue range of `Re A`.
    pub re_range: (f64, f64),
    /// Entry scale of `Im A`.
    pub im_scale: f64,
    /// Entry scale of `b` (real and imaginary parts).
    pub lin_scale: (f64, f64),
    pub complex_coeff: bool,
}

impl GaussianSpec {
    pub fn complex() -> Self {
        Self {
            re_range: (0.4, 1.5),
            im_scale: 0.3,
            lin_scale: (0.4, 0.4),
            complex_coeff: true,
        }
    }

    pub fn real() -> Self {
        Self {
            re_range: (0.4, 1.5),
            im_scale: 0.0,
            lin_scale: (0.4, 0.0),
            complex_coeff: false,
        }
    }
}

pub fn random_gaussian(d: usize, seed: u64, spec: &GaussianSpec) -> Result<GaussianFunction> {
    let mut r = rng(seed, 3);
    let q = random_standard_orthogonal(d, seed ^ 0x5bd1_e995);
    let eig = DVector::from_fn(d, |_, _| r.random_range(spec.re_range.0..spec.re_range.1));
    let re = q.transpose() * DMatrix::from_diagonal(&eig) * &q;
    let mut im = DMatrix::zeros(d, d);
    if spec.im_scale > 0.0 {
        let raw = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
        im = (&raw + raw.transpose()) * (0.5 * spec.im_scale);
    }
    let quad = DMatrix::from_fn(d, d, |i, j| Complex64::new(re[(i, j)], im[(i, j)]));
    let lin = DVector::from_fn(d, |_, _| {
        let re = if spec.lin_scale.0 > 0.0 {
            r.random_range(-spec.lin_scale.0..spec.lin_scale.0)
        } else {
            0.0
        };
        let im = if spec.lin_scale.1 > 0.0 {
            r.random_range(-spec.lin_scale.1..spec.lin_scale.1)
        } else {
            0.0
        };
        Complex64::new(re, im)
    });
    let coeff = if spec.complex_coeff {
        Complex64::from_polar(r.random_range(0.5..2.0), r.random_range(-3.0..3.0))
    } else {
        Complex64::new(r.random_range(0.5..2.0), 0.0)
    };
    GaussianFunction::new(coeff, quad, lin)
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut out = 0.0;
    while i > 0 {
        out += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    out
}

/// First `n` points of the Halton sequence mapped to `[lo, hi]^d`
/// (starting from index 1).
pub fn halton_points(n: usize, d: usize, lo: f64, hi: f64) -> Vec<DVector<f64>> {
    assert!(d <= PRIMES.len(), "Halton sequence supports up to 12 dimensions");
    (1..=n as u64)
        .map(|i| DVector::from_fn(d, |k, _| lo + (hi - lo) * radical_inverse(i, PRIMES[k])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::is_adapted;

    #[test]
    fn halton_in_box_and_distinct() {
        let pts = halton_points(10, 4, -2.0, 2.0);
        assert_eq!(pts.len(), 10);
        for p in &pts {
            assert!(p.iter().all(|v| (-2.0..=2.0).contains(v)));
        }
        assert!((pts[0][0] - 0.0).abs() < 1e-15); // 1/2 mapped to the center
        assert_ne!(pts[0], pts[1]);
    }

    #[test]
    fn random_adapted_is_adapted() {
        for seed in 0..5 {
            let g = random_metric(4, seed).unwrap();
            let s = random_adapted_sigma(&g, seed).unwrap();
            assert!(is_adapted(&s, &g).unwrap().is_some());
        }
    }

    #[test]
    fn deterministic_gaussians() {
        let a = random_gaussian(2, 9, &GaussianSpec::complex()).unwrap();
        let b = random_gaussian(2, 9, &GaussianSpec::complex()).unwrap();
        assert_eq!(a, b);
        assert!(a.is_integrable());
        assert!(random_gaussian(2, 9, &GaussianSpec::real()).unwrap().is_real(0.0));
    }
}
