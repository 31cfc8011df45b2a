//! Truncated power series in time with symbolic coefficients.
//!
//! A `SeriesPoly` of order K holds coefficients `c_0..c_K` of the series
//! `sum c_n t^n / n!` (derivative convention: `c_n` is the n-th time
//! derivative at t = 0). Arithmetic truncates to the smaller order of the two
//! operands; slots beyond the order are undefined, never silently zero.

use super::{Expr, Rat, Sym};
use crate::error::Result;
use num_bigint::BigInt;
use num_rational::BigRational;
use std::collections::BTreeMap;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeriesPoly {
    coeffs: Vec<Expr>,
}

fn binomial(n: usize, k: usize) -> Rat {
    let mut num = BigInt::from(1);
    let mut den = BigInt::from(1);
    for i in 0..k {
        num *= BigInt::from(n - i);
        den *= BigInt::from(i + 1);
    }
    BigRational::new(num, den)
}

impl SeriesPoly {
    pub fn new(coeffs: Vec<Expr>) -> Self {
        assert!(!coeffs.is_empty(), "series needs at least the constant slot");
        SeriesPoly { coeffs }
    }

    pub fn constant(e: Expr, order: usize) -> Self {
        let mut coeffs = vec![Expr::zero(); order + 1];
        coeffs[0] = e;
        SeriesPoly { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, n: usize) -> &Expr {
        &self.coeffs[n]
    }

    pub fn coeffs(&self) -> &[Expr] {
        &self.coeffs
    }

    pub fn truncate(&self, order: usize) -> SeriesPoly {
        let k = order.min(self.order());
        SeriesPoly { coeffs: self.coeffs[..=k].to_vec() }
    }

    /// d/dt: shifts coefficients down one slot and loses one order.
    pub fn derivative(&self) -> SeriesPoly {
        assert!(self.order() >= 1, "cannot differentiate an order-0 series");
        SeriesPoly { coeffs: self.coeffs[1..].to_vec() }
    }

    pub fn add(&self, other: &SeriesPoly) -> SeriesPoly {
        let k = self.order().min(other.order());
        let coeffs = (0..=k).map(|n| self.coeffs[n].add(&other.coeffs[n])).collect();
        SeriesPoly { coeffs }
    }

    pub fn neg(&self) -> SeriesPoly {
        SeriesPoly { coeffs: self.coeffs.iter().map(Expr::neg).collect() }
    }

    pub fn sub(&self, other: &SeriesPoly) -> SeriesPoly {
        self.add(&other.neg())
    }

    pub fn scale(&self, e: &Expr) -> SeriesPoly {
        SeriesPoly { coeffs: self.coeffs.iter().map(|c| e.mul(c)).collect() }
    }

    /// Cauchy product in the derivative convention:
    /// `(fg)_n = sum_s C(n,s) f_s g_{n-s}`.
    pub fn mul(&self, other: &SeriesPoly) -> SeriesPoly {
        let k = self.order().min(other.order());
        let mut coeffs = vec![Expr::zero(); k + 1];
        for (n, slot) in coeffs.iter_mut().enumerate() {
            let mut acc = Expr::zero();
            for s in 0..=n {
                let prod = self.coeffs[s].mul(&other.coeffs[n - s]);
                acc = acc.add(&prod.scale(&binomial(n, s)));
            }
            *slot = acc;
        }
        SeriesPoly { coeffs }
    }

    pub fn pow(&self, n: u32) -> SeriesPoly {
        let mut acc = SeriesPoly::constant(Expr::one(), self.order());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// exp of the series; the constant slot becomes a symbolic `exp` atom and
    /// the tail follows the ODE recurrence `E' = S' E`.
    pub fn exp(&self) -> Result<SeriesPoly> {
        let k = self.order();
        let mut coeffs = vec![Expr::zero(); k + 1];
        coeffs[0] = Expr::exp(&self.coeffs[0])?;
        for n in 0..k {
            // E_{n+1} = sum_{s=0..n} C(n,s) S_{s+1} E_{n-s}
            let mut acc = Expr::zero();
            for s in 0..=n {
                let prod = self.coeffs[s + 1].mul(&coeffs[n - s]);
                acc = acc.add(&prod.scale(&binomial(n, s)));
            }
            coeffs[n + 1] = acc;
        }
        Ok(SeriesPoly { coeffs })
    }
}

/// Evaluate `f` with some symbols replaced by series; unbound symbols stay
/// constant. Coefficients commute or anticommute per the kernel's grading, so
/// odd series slot in like any other factor.
pub fn compose(f: &Expr, bindings: &BTreeMap<Sym, SeriesPoly>, order: usize) -> Result<SeriesPoly> {
    let mut sum = SeriesPoly::constant(Expr::zero(), order);
    for t in f.terms() {
        let mut acc = SeriesPoly::constant(Expr::rational(t.coeff.clone()), order);
        if t.i_pow {
            acc = acc.scale(&Expr::imaginary());
        }
        for (s, k) in &t.syms {
            let series = match bindings.get(s) {
                Some(sp) => sp.truncate(order),
                None => SeriesPoly::constant(Expr::sym(s), order),
            };
            acc = acc.mul(&series.pow(*k));
        }
        if let Some(p) = &t.exp_arg {
            let inner = compose(p, bindings, order)?;
            acc = acc.mul(&inner.exp()?);
        }
        for s in &t.odds {
            let series = match bindings.get(s) {
                Some(sp) => sp.truncate(order),
                None => SeriesPoly::constant(Expr::sym(s), order),
            };
            acc = acc.mul(&series);
        }
        sum = sum.add(&acc);
    }
    Ok(sum)
}
