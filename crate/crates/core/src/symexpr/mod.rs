//! Grassmann-graded symbolic expression kernel.
//!
//! Every value is kept in a canonical normal form: a sum of monomials, each a
//! rational coefficient times an optional factor of the imaginary unit, a
//! product of even-symbol powers, at most one exponential factor `exp(P)` with
//! a canonical even polynomial argument, and an ordered product of odd
//! (anticommuting) generators. Two expressions are structurally equal exactly
//! when they are equal as polynomials over the atom set, so equality testing
//! is `==` and simplification never needs a separate pass.
//!
//! Products of exponentials merge by adding arguments (`exp(p)*exp(q)` becomes
//! `exp(p+q)`, and `exp(0)` is 1), which keeps the exponential factor unique
//! per monomial. Odd generators are sorted under a global name order with sign
//! tracking; a repeated generator kills the monomial.

mod series;

pub use series::{compose, SeriesPoly};

use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

pub type Rat = BigRational;

pub fn rat(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

/// Grassmann parity of a symbol or homogeneous expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Parity {
    Even,
    Odd,
}

/// Parity classification of a general expression.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParityClass {
    Zero,
    Even,
    Odd,
    Mixed,
}

impl ParityClass {
    pub fn accepts_even(self) -> bool {
        matches!(self, ParityClass::Zero | ParityClass::Even)
    }
    pub fn accepts_odd(self) -> bool {
        matches!(self, ParityClass::Zero | ParityClass::Odd)
    }
}

/// A named symbol with fixed Grassmann parity.
///
/// Symbols are ordered by name; this order fixes the canonical sign of odd
/// monomials, so it must not depend on construction order.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Sym {
    name: Arc<str>,
    parity: Parity,
}

impl Sym {
    pub fn new(name: &str, parity: Parity) -> Self {
        Sym { name: Arc::from(name), parity }
    }
    pub fn even(name: &str) -> Self {
        Sym::new(name, Parity::Even)
    }
    pub fn odd(name: &str) -> Self {
        Sym::new(name, Parity::Odd)
    }
    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn parity(&self) -> Parity {
        self.parity
    }
    pub fn is_odd(&self) -> bool {
        self.parity == Parity::Odd
    }
}

impl fmt::Debug for Sym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.parity {
            Parity::Even => write!(f, "{}", self.name),
            Parity::Odd => write!(f, "{}~", self.name),
        }
    }
}

/// One canonical monomial.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Term {
    coeff: Rat,
    i_pow: bool,
    syms: Vec<(Sym, u32)>,
    exp_arg: Option<Expr>,
    odds: Vec<Sym>,
}

impl Term {
    fn constant(c: Rat) -> Self {
        Term { coeff: c, i_pow: false, syms: Vec::new(), exp_arg: None, odds: Vec::new() }
    }

    fn key_cmp(&self, other: &Self) -> Ordering {
        self.syms
            .cmp(&other.syms)
            .then_with(|| self.exp_arg.cmp(&other.exp_arg))
            .then_with(|| self.odds.cmp(&other.odds))
            .then_with(|| self.i_pow.cmp(&other.i_pow))
    }

    fn same_key(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }

    fn parity(&self) -> Parity {
        if self.odds.len().is_multiple_of(2) {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    /// Merge two sorted odd-generator words; returns the merged word and
    /// whether the permutation sign is negative, or None when a generator
    /// repeats (the monomial vanishes).
    fn merge_odds(a: &[Sym], b: &[Sym]) -> Option<(Vec<Sym>, bool)> {
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0usize, 0usize);
        let mut swaps = 0usize;
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                Ordering::Equal => return None,
                Ordering::Less => {
                    out.push(a[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    swaps += a.len() - i;
                    out.push(b[j].clone());
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Some((out, swaps % 2 == 1))
    }

    /// The ordered odd-generator word of this monomial.
    pub fn odd_word(&self) -> &[Sym] {
        &self.odds
    }

    /// This monomial with its odd factors removed, as an expression.
    pub fn without_odds(&self) -> Expr {
        let mut t = self.clone();
        t.odds.clear();
        Expr { terms: vec![t] }
    }

    /// Split into the complex-rational coefficient `coeff * i^i_pow` and the
    /// unit monomial carrying the symbol powers, exponential, and odd word.
    pub fn split_complex_coeff(&self) -> (Expr, Expr) {
        let mut unit = self.clone();
        unit.coeff = rat_int(1);
        unit.i_pow = false;
        let mut c = Expr::rational(self.coeff.clone());
        if self.i_pow {
            c = c.mul(&Expr::imaginary());
        }
        (c, Expr { terms: vec![unit] })
    }

    fn mul(&self, other: &Self) -> Option<Term> {
        let mut coeff = &self.coeff * &other.coeff;
        if coeff.is_zero() {
            return None;
        }
        let i_pow = self.i_pow ^ other.i_pow;
        if self.i_pow && other.i_pow {
            coeff = -coeff;
        }
        // merge even symbol powers
        let mut syms = Vec::with_capacity(self.syms.len() + other.syms.len());
        let (mut i, mut j) = (0usize, 0usize);
        while i < self.syms.len() && j < other.syms.len() {
            match self.syms[i].0.cmp(&other.syms[j].0) {
                Ordering::Equal => {
                    syms.push((self.syms[i].0.clone(), self.syms[i].1 + other.syms[j].1));
                    i += 1;
                    j += 1;
                }
                Ordering::Less => {
                    syms.push(self.syms[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    syms.push(other.syms[j].clone());
                    j += 1;
                }
            }
        }
        syms.extend_from_slice(&self.syms[i..]);
        syms.extend_from_slice(&other.syms[j..]);
        // merge exponential factors by adding arguments
        let exp_arg = match (&self.exp_arg, &other.exp_arg) {
            (None, None) => None,
            (Some(p), None) | (None, Some(p)) => Some(p.clone()),
            (Some(p), Some(q)) => {
                let s = p.add(q);
                if s.is_zero() {
                    None
                } else {
                    Some(s)
                }
            }
        };
        let (odds, negate) = Term::merge_odds(&self.odds, &other.odds)?;
        if negate {
            coeff = -coeff;
        }
        Some(Term { coeff, i_pow, syms, exp_arg, odds })
    }
}

/// Immutable graded symbolic expression in canonical normal form.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Expr {
    terms: Vec<Term>,
}

impl Expr {
    fn from_terms(mut terms: Vec<Term>) -> Expr {
        terms.sort_by(|a, b| a.key_cmp(b));
        let mut out: Vec<Term> = Vec::with_capacity(terms.len());
        for t in terms {
            if t.coeff.is_zero() {
                continue;
            }
            if let Some(last) = out.last_mut() {
                if last.same_key(&t) {
                    last.coeff += &t.coeff;
                    if last.coeff.is_zero() {
                        out.pop();
                    }
                    continue;
                }
            }
            out.push(t);
        }
        Expr { terms: out }
    }

    pub fn zero() -> Expr {
        Expr { terms: Vec::new() }
    }

    pub fn one() -> Expr {
        Expr::int(1)
    }

    pub fn int(n: i64) -> Expr {
        Expr::rational(rat_int(n))
    }

    pub fn rational(c: Rat) -> Expr {
        if c.is_zero() {
            Expr::zero()
        } else {
            Expr { terms: vec![Term::constant(c)] }
        }
    }

    pub fn imaginary() -> Expr {
        Expr {
            terms: vec![Term {
                coeff: rat_int(1),
                i_pow: true,
                syms: Vec::new(),
                exp_arg: None,
                odds: Vec::new(),
            }],
        }
    }

    pub fn sym(s: &Sym) -> Expr {
        let t = match s.parity() {
            Parity::Even => Term {
                coeff: rat_int(1),
                i_pow: false,
                syms: vec![(s.clone(), 1)],
                exp_arg: None,
                odds: Vec::new(),
            },
            Parity::Odd => Term {
                coeff: rat_int(1),
                i_pow: false,
                syms: Vec::new(),
                exp_arg: None,
                odds: vec![s.clone()],
            },
        };
        Expr { terms: vec![t] }
    }

    /// Exponential of an even expression; `exp(0)` is 1.
    pub fn exp(arg: &Expr) -> Result<Expr> {
        if !arg.parity_class().accepts_even() {
            return Err(Error::ParityViolation(format!(
                "exp argument must be even, got `{arg}`"
            )));
        }
        if arg.is_zero() {
            return Ok(Expr::one());
        }
        Ok(Expr {
            terms: vec![Term {
                coeff: rat_int(1),
                i_pow: false,
                syms: Vec::new(),
                exp_arg: Some(arg.clone()),
                odds: Vec::new(),
            }],
        })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn add(&self, other: &Expr) -> Expr {
        let mut ts = self.terms.clone();
        ts.extend(other.terms.iter().cloned());
        Expr::from_terms(ts)
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Expr {
        Expr {
            terms: self
                .terms
                .iter()
                .map(|t| {
                    let mut t = t.clone();
                    t.coeff = -t.coeff;
                    t
                })
                .collect(),
        }
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        let mut ts = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                if let Some(t) = a.mul(b) {
                    ts.push(t);
                }
            }
        }
        Expr::from_terms(ts)
    }

    pub fn scale(&self, c: &Rat) -> Expr {
        if c.is_zero() {
            return Expr::zero();
        }
        Expr {
            terms: self
                .terms
                .iter()
                .map(|t| {
                    let mut t = t.clone();
                    t.coeff *= c;
                    t
                })
                .collect(),
        }
    }

    pub fn pow(&self, n: u32) -> Expr {
        let mut acc = Expr::one();
        let mut base = self.clone();
        let mut n = n;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn parity_class(&self) -> ParityClass {
        if self.terms.is_empty() {
            return ParityClass::Zero;
        }
        let mut even = false;
        let mut odd = false;
        for t in &self.terms {
            match t.parity() {
                Parity::Even => even = true,
                Parity::Odd => odd = true,
            }
        }
        match (even, odd) {
            (true, false) => ParityClass::Even,
            (false, true) => ParityClass::Odd,
            _ => ParityClass::Mixed,
        }
    }

    /// The expression as a rational constant, if it is one.
    pub fn as_rational(&self) -> Option<Rat> {
        match self.terms.len() {
            0 => Some(Rat::zero()),
            1 => {
                let t = &self.terms[0];
                if !t.i_pow && t.syms.is_empty() && t.exp_arg.is_none() && t.odds.is_empty() {
                    Some(t.coeff.clone())
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    /// The expression as a complex rational constant `re + im*i`, if it is one.
    pub fn as_complex_rational(&self) -> Option<(Rat, Rat)> {
        let mut re = Rat::zero();
        let mut im = Rat::zero();
        for t in &self.terms {
            if !t.syms.is_empty() || t.exp_arg.is_some() || !t.odds.is_empty() {
                return None;
            }
            if t.i_pow {
                im += &t.coeff;
            } else {
                re += &t.coeff;
            }
        }
        Some((re, im))
    }

    /// Exact multiplicative inverse for invertible monomials: a single term
    /// with no symbol powers and no odd generators (rational, `i`, and
    /// exponential factors invert exactly), or a complex rational constant.
    pub fn invert_monomial(&self) -> Option<Expr> {
        if let Some((re, im)) = self.as_complex_rational() {
            let n = &re * &re + &im * &im;
            if n.is_zero() {
                return None;
            }
            let real = Expr::rational(&re / &n);
            let imag = Expr::imaginary().scale(&(-&im / &n));
            return Some(real.add(&imag));
        }
        if self.terms.len() != 1 {
            return None;
        }
        let t = &self.terms[0];
        if !t.syms.is_empty() || !t.odds.is_empty() || t.coeff.is_zero() {
            return None;
        }
        let mut coeff = t.coeff.recip();
        if t.i_pow {
            coeff = -coeff; // 1/i = -i
        }
        let exp_arg = t.exp_arg.as_ref().map(|p| p.neg());
        Some(Expr {
            terms: vec![Term { coeff, i_pow: t.i_pow, syms: Vec::new(), exp_arg, odds: Vec::new() }],
        })
    }

    /// All symbols occurring anywhere, including inside exponential arguments.
    pub fn symbols(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Sym>) {
        for t in &self.terms {
            for (s, _) in &t.syms {
                out.insert(s.clone());
            }
            for s in &t.odds {
                out.insert(s.clone());
            }
            if let Some(p) = &t.exp_arg {
                p.collect_symbols(out);
            }
        }
    }

    pub fn depends_on(&self, s: &Sym) -> bool {
        self.terms.iter().any(|t| {
            t.syms.iter().any(|(x, _)| x == s)
                || t.odds.iter().any(|x| x == s)
                || t.exp_arg.as_ref().is_some_and(|p| p.depends_on(s))
        })
    }

    pub fn contains_imaginary(&self) -> bool {
        self.terms
            .iter()
            .any(|t| t.i_pow || t.exp_arg.as_ref().is_some_and(|p| p.contains_imaginary()))
    }
}

/// Distinct even atoms of an expression: even symbols plus exponential atoms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExprAtom {
    Sym(Sym),
    Exp(Expr),
}

impl ExprAtom {
    pub fn to_expr(&self) -> Expr {
        match self {
            ExprAtom::Sym(s) => Expr::sym(s),
            ExprAtom::Exp(p) => Expr::exp(p).expect("exp atom argument is even"),
        }
    }
}

/// All distinct even symbols and exponential atoms of `e`, in a deterministic
/// order. Symbols inside exponential arguments are included; odd generators
/// and the imaginary unit are not atoms.
pub fn harvest_atoms(e: &Expr) -> Vec<ExprAtom> {
    fn walk(e: &Expr, out: &mut BTreeSet<ExprAtom>) {
        for t in e.terms() {
            for (s, _) in &t.syms {
                out.insert(ExprAtom::Sym(s.clone()));
            }
            if let Some(p) = &t.exp_arg {
                out.insert(ExprAtom::Exp(p.clone()));
                walk(p, out);
            }
        }
    }
    let mut set = BTreeSet::new();
    walk(e, &mut set);
    set.into_iter().collect()
}

/// Side convention for graded derivatives. Both sides agree on even symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Graded partial derivative of `e` with respect to `s`.
pub fn differentiate(e: &Expr, s: &Sym, side: Side) -> Expr {
    let mut parts: Vec<Expr> = Vec::new();
    match s.parity() {
        Parity::Even => {
            for t in e.terms() {
                for (idx, (x, k)) in t.syms.iter().enumerate() {
                    if x == s {
                        let mut nt = t.clone();
                        nt.coeff *= rat_int(*k as i64);
                        if *k == 1 {
                            nt.syms.remove(idx);
                        } else {
                            nt.syms[idx].1 -= 1;
                        }
                        parts.push(Expr { terms: vec![nt] });
                    }
                }
                if let Some(p) = &t.exp_arg {
                    if p.depends_on(s) {
                        let dp = differentiate(p, s, side);
                        parts.push(Expr { terms: vec![t.clone()] }.mul(&dp));
                    }
                }
            }
        }
        Parity::Odd => {
            for t in e.terms() {
                if let Some(j) = t.odds.iter().position(|x| x == s) {
                    let hops = match side {
                        Side::Left => j,
                        Side::Right => t.odds.len() - 1 - j,
                    };
                    let mut nt = t.clone();
                    nt.odds.remove(j);
                    if hops % 2 == 1 {
                        nt.coeff = -nt.coeff;
                    }
                    parts.push(Expr { terms: vec![nt] });
                }
            }
        }
    }
    parts.into_iter().fold(Expr::zero(), |a, b| a.add(&b))
}

/// Simultaneous parity-preserving substitution followed by normalization.
pub fn substitute(e: &Expr, bindings: &BTreeMap<Sym, Expr>) -> Result<Expr> {
    for (s, v) in bindings {
        let ok = match s.parity() {
            Parity::Even => v.parity_class().accepts_even(),
            Parity::Odd => v.parity_class().accepts_odd(),
        };
        if !ok {
            return Err(Error::ParityViolation(format!(
                "binding for `{}` has wrong parity: `{v}`",
                s.name()
            )));
        }
    }
    substitute_unchecked(e, bindings)
}

fn substitute_unchecked(e: &Expr, bindings: &BTreeMap<Sym, Expr>) -> Result<Expr> {
    let mut acc_sum = Expr::zero();
    for t in e.terms() {
        let mut acc = Expr::rational(t.coeff.clone());
        if t.i_pow {
            acc = acc.mul(&Expr::imaginary());
        }
        for (s, k) in &t.syms {
            let f = match bindings.get(s) {
                Some(v) => v.clone(),
                None => Expr::sym(s),
            };
            acc = acc.mul(&f.pow(*k));
        }
        if let Some(p) = &t.exp_arg {
            let sub = substitute_unchecked(p, bindings)?;
            acc = acc.mul(&Expr::exp(&sub)?);
        }
        for s in &t.odds {
            let f = match bindings.get(s) {
                Some(v) => v.clone(),
                None => Expr::sym(s),
            };
            acc = acc.mul(&f);
        }
        acc_sum = acc_sum.add(&acc);
    }
    Ok(acc_sum)
}

/// Rename symbols wholesale (a special case of substitution that cannot fail
/// when the rename preserves parity).
pub fn rename(e: &Expr, map: &BTreeMap<Sym, Sym>) -> Expr {
    let bindings: BTreeMap<Sym, Expr> = map.iter().map(|(k, v)| (k.clone(), Expr::sym(v))).collect();
    substitute(e, &bindings).expect("rename preserves parity")
}

/// IEEE double evaluation of an even, generator-free, real expression.
pub fn eval_numeric(e: &Expr, point: &BTreeMap<Sym, f64>) -> Result<f64> {
    let mut sum = 0.0;
    for t in e.terms() {
        if !t.odds.is_empty() {
            return Err(Error::OddEvaluation);
        }
        if t.i_pow {
            return Err(Error::ComplexEvaluation);
        }
        let mut v = t.coeff.to_f64().ok_or(Error::ComplexEvaluation)?;
        for (s, k) in &t.syms {
            let x = *point
                .get(s)
                .ok_or_else(|| Error::UnboundSymbol(s.name().to_string()))?;
            v *= x.powi(*k as i32);
        }
        if let Some(p) = &t.exp_arg {
            v *= eval_numeric(p, point)?.exp();
        }
        sum += v;
    }
    Ok(sum)
}

/// Raw expression tree accepted by [`normalize`]; the programmatic analogue of
/// the DSL expression grammar.
#[derive(Clone, Debug)]
pub enum RawExpr {
    Num(Rat),
    Sym(Sym),
    Imag,
    Add(Vec<RawExpr>),
    Neg(Box<RawExpr>),
    Mul(Vec<RawExpr>),
    Div(Box<RawExpr>, Box<RawExpr>),
    Pow(Box<RawExpr>, u32),
    Exp(Box<RawExpr>),
}

/// Fold a raw tree into canonical form, enforcing parity consistency
/// (homogeneous sums, even exponential arguments) and rational division.
pub fn normalize(raw: &RawExpr) -> Result<Expr> {
    match raw {
        RawExpr::Num(c) => Ok(Expr::rational(c.clone())),
        RawExpr::Sym(s) => Ok(Expr::sym(s)),
        RawExpr::Imag => Ok(Expr::imaginary()),
        RawExpr::Add(xs) => {
            let mut acc = Expr::zero();
            for x in xs {
                let v = normalize(x)?;
                let compatible = matches!(
                    (acc.parity_class(), v.parity_class()),
                    (ParityClass::Zero, _)
                        | (_, ParityClass::Zero)
                        | (ParityClass::Even, ParityClass::Even)
                        | (ParityClass::Odd, ParityClass::Odd)
                );
                if !compatible {
                    return Err(Error::ParityViolation(format!(
                        "mixed-parity sum: `{acc}` + `{v}`"
                    )));
                }
                acc = acc.add(&v);
            }
            Ok(acc)
        }
        RawExpr::Neg(x) => Ok(normalize(x)?.neg()),
        RawExpr::Mul(xs) => {
            let mut acc = Expr::one();
            for x in xs {
                acc = acc.mul(&normalize(x)?);
            }
            Ok(acc)
        }
        RawExpr::Div(a, b) => {
            let num = normalize(a)?;
            let den = normalize(b)?;
            let c = den
                .as_rational()
                .filter(|c| !c.is_zero())
                .ok_or_else(|| Error::Invalid(format!("division by non-rational `{den}`")))?;
            Ok(num.scale(&c.recip()))
        }
        RawExpr::Pow(x, n) => Ok(normalize(x)?.pow(*n)),
        RawExpr::Exp(x) => Expr::exp(&normalize(x)?),
    }
}

// ---------------------------------------------------------------------------
// Display: canonical, deterministic, re-parseable under the DSL grammar.
// ---------------------------------------------------------------------------

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let neg = t.coeff.is_negative();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else if neg {
                write!(f, " - ")?;
            } else {
                write!(f, " + ")?;
            }
            let mags = t.coeff.abs();
            let mut factors: Vec<String> = Vec::new();
            let unit_coeff = mags.is_one();
            if !unit_coeff {
                factors.push(format_rat(&mags));
            }
            if t.i_pow {
                factors.push("im".to_string());
            }
            for (s, k) in &t.syms {
                if *k == 1 {
                    factors.push(s.name().to_string());
                } else {
                    factors.push(format!("{}^{}", s.name(), k));
                }
            }
            if let Some(p) = &t.exp_arg {
                factors.push(format!("exp({p})"));
            }
            for s in &t.odds {
                factors.push(s.name().to_string());
            }
            if factors.is_empty() {
                write!(f, "{}", format_rat(&mags))?;
            } else {
                write!(f, "{}", factors.join("*"))?;
            }
        }
        Ok(())
    }
}

fn format_rat(c: &Rat) -> String {
    if c.is_integer() {
        format!("{}", c.numer())
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Sym {
        Sym::even("x")
    }
    fn y() -> Sym {
        Sym::even("y")
    }
    fn z() -> Sym {
        Sym::even("z")
    }
    fn th(i: usize) -> Sym {
        Sym::odd(&format!("t{i}"))
    }

    #[test]
    fn commuting_symbols_cancel() {
        let e = Expr::sym(&x()).mul(&Expr::sym(&y())).sub(&Expr::sym(&y()).mul(&Expr::sym(&x())));
        assert!(e.is_zero());
    }

    #[test]
    fn odd_generators_anticommute() {
        let a = Expr::sym(&th(1)).mul(&Expr::sym(&th(2)));
        let b = Expr::sym(&th(2)).mul(&Expr::sym(&th(1)));
        assert!(a.add(&b).is_zero());
        assert_eq!(a, b.neg());
    }

    #[test]
    fn odd_generator_squares_to_zero() {
        let t = Expr::sym(&th(1));
        assert!(t.mul(&t).is_zero());
        assert!(t.pow(2).is_zero());
    }

    #[test]
    fn exp_atoms_cancel_via_exponent_addition() {
        let ex = Expr::sym(&x());
        let a = Expr::exp(&ex.neg()).unwrap();
        let b = Expr::exp(&ex).unwrap();
        assert_eq!(a.mul(&b), Expr::one());
        // and powers fold into the argument
        assert_eq!(a.pow(2), Expr::exp(&ex.scale(&rat_int(-2))).unwrap());
    }

    #[test]
    fn imaginary_unit_squares_to_minus_one() {
        let i = Expr::imaginary();
        assert_eq!(i.mul(&i), Expr::int(-1));
        assert_eq!(i.pow(4), Expr::one());
        assert_eq!(i.invert_monomial().unwrap(), i.neg());
    }

    #[test]
    fn derivative_of_momentum_shape() {
        // d/ddy of (z + exp(-x))*dy  ->  z + exp(-x)
        let dy = Sym::even("dy");
        let coeffs = Expr::sym(&z()).add(&Expr::exp(&Expr::sym(&x()).neg()).unwrap());
        let l = coeffs.mul(&Expr::sym(&dy));
        assert_eq!(differentiate(&l, &dy, Side::Left), coeffs);
    }

    #[test]
    fn left_derivative_signs() {
        let w = Expr::sym(&th(1)).mul(&Expr::sym(&th(2)));
        assert_eq!(differentiate(&w, &th(1), Side::Left), Expr::sym(&th(2)));
        assert_eq!(differentiate(&w, &th(2), Side::Left), Expr::sym(&th(1)).neg());
        // right derivatives flip by one hop on this word
        assert_eq!(differentiate(&w, &th(1), Side::Right), Expr::sym(&th(2)).neg());
        assert_eq!(differentiate(&w, &th(2), Side::Right), Expr::sym(&th(1)));
    }

    #[test]
    fn derivative_of_exponential() {
        let e = Expr::exp(&Expr::sym(&x()).neg()).unwrap();
        assert_eq!(differentiate(&e, &x(), Side::Left), e.neg());
    }

    #[test]
    fn substitution_swaps_odd_pair_with_sign() {
        let w = Expr::sym(&th(1)).mul(&Expr::sym(&th(2)));
        let mut map = BTreeMap::new();
        map.insert(th(1), Expr::sym(&th(2)));
        map.insert(th(2), Expr::sym(&th(1)));
        assert_eq!(substitute(&w, &map).unwrap(), w.neg());
    }

    #[test]
    fn substitution_rejects_parity_mismatch() {
        let mut map = BTreeMap::new();
        map.insert(x(), Expr::sym(&th(1)));
        let e = Expr::sym(&x());
        assert!(matches!(substitute(&e, &map), Err(Error::ParityViolation(_))));
    }

    #[test]
    fn numeric_evaluation() {
        let e = Expr::exp(&Expr::sym(&x()).neg()).unwrap();
        let mut p = BTreeMap::new();
        p.insert(x(), 0.0);
        assert_eq!(eval_numeric(&e, &p).unwrap(), 1.0);

        // p^2/2 + x^2 z / 2 at (1,1,1) -> 1.0
        let px = Sym::even("px");
        let h = Expr::sym(&px)
            .pow(2)
            .scale(&rat(1, 2))
            .add(&Expr::sym(&x()).pow(2).mul(&Expr::sym(&z())).scale(&rat(1, 2)));
        let mut p = BTreeMap::new();
        p.insert(px, 1.0);
        p.insert(x(), 1.0);
        p.insert(z(), 1.0);
        assert_eq!(eval_numeric(&h, &p).unwrap(), 1.0);

        let e = Expr::sym(&x()).pow(2).mul(&Expr::sym(&z()));
        let mut p = BTreeMap::new();
        p.insert(x(), 2.0);
        p.insert(z(), 3.0);
        assert_eq!(eval_numeric(&e, &p).unwrap(), 12.0);
    }

    #[test]
    fn numeric_evaluation_errors() {
        let e = Expr::sym(&th(1));
        assert_eq!(eval_numeric(&e, &BTreeMap::new()), Err(Error::OddEvaluation));
        let e = Expr::sym(&x());
        assert!(matches!(eval_numeric(&e, &BTreeMap::new()), Err(Error::UnboundSymbol(_))));
        assert_eq!(eval_numeric(&Expr::imaginary(), &BTreeMap::new()), Err(Error::ComplexEvaluation));
    }

    #[test]
    fn atom_harvest() {
        let e = Expr::sym(&z()).add(&Expr::exp(&Expr::sym(&x()).neg()).unwrap());
        let atoms = harvest_atoms(&e);
        assert_eq!(
            atoms,
            vec![
                ExprAtom::Sym(x()),
                ExprAtom::Sym(z()),
                ExprAtom::Exp(Expr::sym(&x()).neg()),
            ]
        );
        assert!(harvest_atoms(&Expr::int(5)).is_empty());
        // atoms of p*exp(-x) + x^2 z
        let px = Sym::even("px");
        let e = Expr::sym(&px)
            .mul(&Expr::exp(&Expr::sym(&x()).neg()).unwrap())
            .add(&Expr::sym(&x()).pow(2).mul(&Expr::sym(&z())));
        let atoms = harvest_atoms(&e);
        assert_eq!(atoms.len(), 4);
        assert!(atoms.contains(&ExprAtom::Sym(px)));
        assert!(atoms.contains(&ExprAtom::Exp(Expr::sym(&x()).neg())));
    }

    #[test]
    fn normalize_rejects_mixed_sum() {
        let raw = RawExpr::Add(vec![RawExpr::Sym(x()), RawExpr::Sym(th(1))]);
        assert!(matches!(normalize(&raw), Err(Error::ParityViolation(_))));
        let raw = RawExpr::Exp(Box::new(RawExpr::Sym(th(1))));
        assert!(matches!(normalize(&raw), Err(Error::ParityViolation(_))));
    }

    #[test]
    fn display_round_trip_shapes() {
        let e = Expr::sym(&x())
            .pow(2)
            .mul(&Expr::sym(&z()))
            .scale(&rat(3, 2))
            .sub(&Expr::exp(&Expr::sym(&x()).neg()).unwrap());
        assert_eq!(e.to_string(), "-exp(-x) + 3/2*x^2*z");
        assert_eq!(Expr::zero().to_string(), "0");
        assert_eq!(Expr::int(-7).to_string(), "-7");
        assert_eq!(Expr::imaginary().neg().to_string(), "-im");
    }
}
