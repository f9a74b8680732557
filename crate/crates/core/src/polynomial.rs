//! Sparse complex polynomials in `D` real variables.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DVector;
use num_complex::Complex64;

/// Exponent vector of a monomial.
pub type MultiIndex = Vec<u32>;

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialFunction {
    dim: usize,
    terms: BTreeMap<MultiIndex, Complex64>,
}

impl PolynomialFunction {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: Complex64) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(vec![0; dim], c);
        p
    }

    /// The coordinate function `x_mu`.
    pub fn coordinate(dim: usize, mu: usize) -> Self {
        let mut e = vec![0; dim];
        e[mu] = 1;
        let mut p = Self::zero(dim);
        p.add_term(e, Complex64::new(1.0, 0.0));
        p
    }

    pub fn monomial(exponents: MultiIndex, c: Complex64) -> Self {
        let mut p = Self::zero(exponents.len());
        p.add_term(exponents, c);
        p
    }

    /// `Σ_ν c_ν x_ν`.
    pub fn linear(coeffs: &[f64]) -> Self {
        let dim = coeffs.len();
        let mut p = Self::zero(dim);
        for (nu, &c) in coeffs.iter().enumerate() {
            let mut e = vec![0; dim];
            e[nu] = 1;
            p.add_term(e, Complex64::new(c, 0.0));
        }
        p
    }

    pub fn from_terms(dim: usize, terms: impl IntoIterator<Item = (MultiIndex, Complex64)>) -> Self {
        let mut p = Self::zero(dim);
        for (e, c) in terms {
            assert_eq!(e.len(), dim, "multi-index length must equal the dimension");
            p.add_term(e, c);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, e: &[u32]) -> Complex64 {
        self.terms.get(e).copied().unwrap_or_default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>())
            .max()
            .unwrap_or(0)
    }

    fn add_term(&mut self, e: MultiIndex, c: Complex64) {
        if c == Complex64::default() {
            return;
        }
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == Complex64::default() {
                    o.remove();
                }
            }
        }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut p = Self::zero(self.dim);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), c * s);
        }
        p
    }

    pub fn derivative(&self, mu: usize) -> Self {
        let mut p = Self::zero(self.dim);
        for (e, c) in &self.terms {
            if e[mu] == 0 {
                continue;
            }
            let mut d = e.clone();
            d[mu] -= 1;
            p.add_term(d, c * e[mu] as f64);
        }
        p
    }

    pub fn eval(&self, x: &DVector<f64>) -> Complex64 {
        self.terms
            .iter()
            .map(|(e, c)| {
                let m: f64 = e
                    .iter()
                    .enumerate()
                    .map(|(k, &p)| x[k].powi(p as i32))
                    .product();
                c * m
            })
            .sum()
    }

    /// Largest coefficient magnitude.
    pub fn max_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |a, c| a.max(c.norm()))
    }

    /// Largest coefficient magnitude of `self - other`.
    pub fn distance(&self, other: &Self) -> f64 {
        (self - other).max_coeff()
    }
}

impl Add for &PolynomialFunction {
    type Output = PolynomialFunction;
    fn add(self, o: &PolynomialFunction) -> PolynomialFunction {
        assert_eq!(self.dim, o.dim);
        let mut p = self.clone();
        for (e, c) in &o.terms {
            p.add_term(e.clone(), *c);
        }
        p
    }
}

impl Sub for &PolynomialFunction {
    type Output = PolynomialFunction;
    fn sub(self, o: &PolynomialFunction) -> PolynomialFunction {
        self + &(-o)
    }
}

impl Neg for &PolynomialFunction {
    type Output = PolynomialFunction;
    fn neg(self) -> PolynomialFunction {
        self.scale(Complex64::new(-1.0, 0.0))
    }
}

/// Pointwise (commutative) product.
impl Mul for &PolynomialFunction {
    type Output = PolynomialFunction;
    fn mul(self, o: &PolynomialFunction) -> PolynomialFunction {
        assert_eq!(self.dim, o.dim);
        let mut p = PolynomialFunction::zero(self.dim);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &o.terms {
                let e = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                p.add_term(e, ca * cb);
            }
        }
        p
    }
}

impl fmt::Display for PolynomialFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)", c.re, c.im)?;
            for (k, &p) in e.iter().enumerate() {
                match p {
                    0 => {}
                    1 => write!(f, "·x{}", k + 1)?,
                    _ => write!(f, "·x{}^{}", k + 1, p)?,
                }
            }
        }
        Ok(())
    }
}
