//! Identification of the unknown brackets among independent initial
//! conditions from the first-order Hamilton equations at t = 0, and the
//! closure of the solved table over every phase variable.
//!
//! For every phase variable the order-1 Taylor coefficient must equal
//! `{xi, H}` expanded over the unknown slots `B_kl = {C_k, C_l}`. Even-sector
//! systems are solved by least-squares collocation over a harvested basis;
//! graded systems are expanded in odd monomials and the even coefficient
//! system is solved exactly.

use crate::error::{Error, Result};
use crate::initial_instant::{ICConstraintSet, TaylorSolution};
use crate::linsolve;
use crate::numeric::{least_squares, sample_point, seeded_rng};
use crate::symexpr::{
    differentiate, harvest_atoms, rat, rename, Expr, ExprAtom, Parity, Rat, Side, Sym,
};
use crate::sysparse::SystemSpec;
use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_traits::{FromPrimitive, Signed};
use std::collections::BTreeMap;

/// Solver knobs; defaults match the CLI defaults.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub degree: usize,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { degree: 2, samples: 200, seed: 42, tol: 1e-9 }
    }
}

/// An unknown bracket slot `{C_k, C_l}` with `k <= l` (`k == l` only for odd
/// generators, whose graded bracket need not vanish on the diagonal).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub k: usize,
    pub l: usize,
}

/// The symbolic identification system: one equation per phase variable,
/// linear in the slot placeholders.
#[derive(Clone, Debug)]
pub struct IdentificationSystem {
    pub independent: Vec<Sym>,
    pub slots: Vec<Slot>,
    slot_syms: Vec<Sym>,
    pub rows: Vec<IdentRow>,
    pub h_tilde: Expr,
    /// Exponential atoms harvested from the system, as expressions.
    pub exp_atoms: Vec<Expr>,
    /// Even symbols to sample during collocation: even independent ICs plus
    /// parameters (with their positivity flags).
    pub sampling_syms: Vec<(Sym, bool)>,
    pub has_odd: bool,
}

#[derive(Clone, Debug)]
pub struct IdentRow {
    pub phase: Sym,
    /// `lhs - rhs == 0`, linear in the slot placeholder symbols.
    pub equation: Expr,
    pub lhs: Expr,
}

fn slot_parity(independent: &[Sym], s: Slot) -> Parity {
    match (independent[s.k].parity(), independent[s.l].parity()) {
        (Parity::Odd, Parity::Even) | (Parity::Even, Parity::Odd) => Parity::Odd,
        _ => Parity::Even,
    }
}

/// Sign relating `{C_l, C_k}` to `{C_k, C_l}`: graded antisymmetry gives +1
/// for odd-odd pairs and -1 otherwise.
fn swap_sign(a: &Sym, b: &Sym) -> i64 {
    if a.is_odd() && b.is_odd() {
        1
    } else {
        -1
    }
}

/// Build one identification equation per phase variable (dependent ones
/// included): order-1 Taylor coefficient == sum over slots of
/// `(d^R xi/dC_k) B_kl (d^L H/dC_l)` with graded antisymmetry folded in.
pub fn build_identification_system(
    spec: &SystemSpec,
    tsol_reduced: &TaylorSolution,
    ics: &ICConstraintSet,
    h_tilde: &Expr,
) -> Result<IdentificationSystem> {
    let independent = ics.independent.clone();
    let mut slots = Vec::new();
    for k in 0..independent.len() {
        for l in k..independent.len() {
            if k == l && !independent[k].is_odd() {
                continue;
            }
            slots.push(Slot { k, l });
        }
    }
    let slot_syms: Vec<Sym> = slots
        .iter()
        .map(|s| {
            Sym::new(
                &format!("_b_{}_{}", s.k, s.l),
                slot_parity(&independent, *s),
            )
        })
        .collect();

    let dh: Vec<Expr> = independent
        .iter()
        .map(|c| differentiate(h_tilde, c, Side::Left))
        .collect();

    let phase_vars = spec.phase_vars();
    let phase_ics = spec.phase_ics();
    let n = spec.coords.len();
    let mut rows = Vec::with_capacity(phase_vars.len());
    let mut atom_pool: Vec<Expr> = vec![h_tilde.clone()];

    for (idx, phase) in phase_vars.iter().enumerate() {
        let xi_tilde = ics.expression_for(&phase_ics[idx]);
        let series = if idx < n {
            &tsol_reduced.coord_series[idx]
        } else {
            &tsol_reduced.momentum_series[idx - n]
        };
        let lhs = series.coeff(1).clone();
        let mut rhs = Expr::zero();
        for (s, b) in slots.iter().zip(&slot_syms) {
            let b_expr = Expr::sym(b);
            let dk = differentiate(&xi_tilde, &independent[s.k], Side::Right);
            if !dk.is_zero() && !dh[s.l].is_zero() {
                rhs = rhs.add(&dk.mul(&b_expr).mul(&dh[s.l]));
            }
            if s.k != s.l {
                let dl = differentiate(&xi_tilde, &independent[s.l], Side::Right);
                if !dl.is_zero() && !dh[s.k].is_zero() {
                    let sign = swap_sign(&independent[s.k], &independent[s.l]);
                    rhs = rhs.add(&dl.mul(&b_expr).mul(&dh[s.k]).scale(&rat(sign, 1)));
                }
            }
        }
        atom_pool.push(xi_tilde.clone());
        atom_pool.push(lhs.clone());
        rows.push(IdentRow { phase: phase.clone(), equation: lhs.sub(&rhs), lhs });
    }

    let mut exp_atoms: Vec<Expr> = Vec::new();
    for e in &atom_pool {
        for a in harvest_atoms(e) {
            if let ExprAtom::Exp(_) = a {
                let ax = a.to_expr();
                if !exp_atoms.contains(&ax) {
                    exp_atoms.push(ax);
                }
            }
        }
    }
    exp_atoms.sort();

    let mut sampling_syms: Vec<(Sym, bool)> = independent
        .iter()
        .filter(|c| !c.is_odd())
        .map(|c| (c.clone(), false))
        .collect();
    sampling_syms.extend(spec.params.iter().cloned());

    let has_odd = independent.iter().any(Sym::is_odd)
        || rows.iter().any(|r| !matches!(r.equation.parity_class(), crate::symexpr::ParityClass::Even | crate::symexpr::ParityClass::Zero))
        || rows.iter().any(|r| r.equation.contains_imaginary());

    Ok(IdentificationSystem {
        independent,
        slots,
        slot_syms,
        rows,
        h_tilde: h_tilde.clone(),
        exp_atoms,
        sampling_syms,
        has_odd,
    })
}

/// Candidate basis at a given polynomial degree: `{1}`, monomials of degree
/// <= d in the even sampled symbols, and their products with each harvested
/// exponential atom.
pub fn harvest_basis(sys: &IdentificationSystem, degree: usize) -> Vec<Expr> {
    let vars: Vec<Sym> = sys.sampling_syms.iter().map(|(s, _)| s.clone()).collect();
    let mut monomials: Vec<Expr> = vec![Expr::one()];
    let mut frontier: Vec<(usize, Expr)> = vec![(0, Expr::one())];
    for _ in 0..degree {
        let mut next = Vec::new();
        for (start, m) in &frontier {
            for (j, v) in vars.iter().enumerate().skip(*start) {
                let nm = m.mul(&Expr::sym(v));
                monomials.push(nm.clone());
                next.push((j, nm));
            }
        }
        frontier = next;
    }
    let mut basis = Vec::with_capacity(monomials.len() * (1 + sys.exp_atoms.len()));
    for m in &monomials {
        basis.push(m.clone());
    }
    for atom in &sys.exp_atoms {
        for m in &monomials {
            basis.push(m.mul(atom));
        }
    }
    basis
}

/// Outcome of the identification solve, before table reconstruction.
#[derive(Clone, Debug)]
pub struct IdentSolution {
    /// Per-slot bracket value over the independent IC symbols.
    pub slot_values: Vec<Expr>,
    pub residual: f64,
    pub nullspace_dim: usize,
    pub degree_used: usize,
    pub warnings: Vec<String>,
}

/// Substitute basis expansions for the slot placeholders in every equation.
#[allow(clippy::type_complexity)]
fn expand_rows(
    sys: &IdentificationSystem,
    basis_even: &[Expr],
) -> (Vec<Sym>, Vec<(usize, usize, Expr)>, Vec<Expr>) {
    // per slot, its list of (coefficient symbol, basis function)
    let odd_ics: Vec<Sym> = sys.independent.iter().filter(|c| c.is_odd()).cloned().collect();
    let mut c_syms: Vec<Sym> = Vec::new();
    let mut c_meta: Vec<(usize, usize, Expr)> = Vec::new(); // (slot idx, basis idx, basis expr incl. odd factor)
    let mut bind: BTreeMap<Sym, Expr> = BTreeMap::new();
    for (si, b) in sys.slot_syms.iter().enumerate() {
        let mut expansion = Expr::zero();
        let funcs: Vec<Expr> = match b.parity() {
            Parity::Even => basis_even.to_vec(),
            // odd-valued slots expand over odd IC times even basis
            Parity::Odd => odd_ics
                .iter()
                .flat_map(|th| basis_even.iter().map(move |m| m.mul(&Expr::sym(th))))
                .collect(),
        };
        for (bi, f) in funcs.iter().enumerate() {
            let c = Sym::even(&format!("_c_{si}_{bi}"));
            expansion = expansion.add(&Expr::sym(&c).mul(f));
            c_syms.push(c);
            c_meta.push((si, bi, f.clone()));
        }
        bind.insert(b.clone(), expansion);
    }
    let equations: Vec<Expr> = sys
        .rows
        .iter()
        .map(|r| crate::symexpr::substitute(&r.equation, &bind).expect("slot expansion preserves parity"))
        .collect();
    (c_syms, c_meta, equations)
}

/// Result of one collocation solve.
#[derive(Clone, Debug)]
pub struct CollocationOutcome {
    pub coefficients: Vec<f64>,
    /// Max-abs equation residual over a fresh validation sample.
    pub residual: f64,
    /// Nullspace dimension after sparse-support selection.
    pub nullspace_dim: usize,
    pub witness: Option<String>,
    pub warnings: Vec<String>,
}

/// Least-squares collocation of an even-sector identification system over the
/// given basis.
pub fn collocation_solve(
    sys: &IdentificationSystem,
    basis: &[Expr],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CollocationOutcome> {
    let (c_syms, c_meta, equations) = expand_rows(sys, basis);
    collocate(sys, &equations, &c_syms, &c_meta, samples, seed, tol)
}

fn collocate(
    sys: &IdentificationSystem,
    equations: &[Expr],
    c_syms: &[Sym],
    c_meta: &[(usize, usize, Expr)],
    samples: usize,
    seed: u64,
    tol: f64,
) -> Result<CollocationOutcome> {
    // linear structure of each equation in the coefficient symbols
    let mut rows_struct = Vec::with_capacity(equations.len());
    for e in equations {
        rows_struct.push(linsolve::linear_decompose(e, c_syms)?);
    }
    let live_rows: Vec<&(Vec<(usize, Expr)>, Expr)> =
        rows_struct.iter().filter(|(c, r)| !c.is_empty() || !r.is_zero()).collect();
    if live_rows.is_empty() || c_syms.is_empty() {
        return Ok(CollocationOutcome {
            coefficients: vec![0.0; c_syms.len()],
            residual: 0.0,
            nullspace_dim: c_syms.len(),
            witness: None,
            warnings: Vec::new(),
        });
    }

    let mut rng = seeded_rng(seed);
    let nrows = live_rows.len() * samples;
    let mut a = DMatrix::zeros(nrows, c_syms.len());
    let mut b = DVector::zeros(nrows);
    for p in 0..samples {
        let point = sample_point(&mut rng, &sys.sampling_syms);
        for (ri, (coefs, rest)) in live_rows.iter().enumerate() {
            let row = p * live_rows.len() + ri;
            for (j, coef) in coefs {
                a[(row, *j)] = crate::symexpr::eval_numeric(coef, &point)?;
            }
            b[row] = -crate::symexpr::eval_numeric(rest, &point)?;
        }
    }
    let fit = least_squares(&a, &b)?;
    let mut coefficients = fit.solution;
    let mut nullspace_dim = fit.nullspace_dim;
    let mut warnings = Vec::new();

    // The equations only pin the bracket through its contraction with dH, so
    // polynomial multiples of ker(dH) widen the nullspace as the basis grows.
    // Sequentially thresholded least squares picks the minimal-support
    // solution when one exists; genuine degeneracy survives it.
    if nullspace_dim > 0 {
        if let Some(sparse) = sparsify(&a, &b, &coefficients, tol) {
            warnings.push(format!(
                "identification nullspace of dimension {nullspace_dim} resolved by minimal-support selection"
            ));
            coefficients = sparse;
            nullspace_dim = 0;
        }
    }

    // validation on a fresh disjoint sample from the same stream
    let mut max_resid = 0.0f64;
    for _ in 0..samples {
        let point = sample_point(&mut rng, &sys.sampling_syms);
        for (coefs, rest) in live_rows.iter() {
            let mut v = crate::symexpr::eval_numeric(rest, &point)?;
            for (j, coef) in coefs {
                v += crate::symexpr::eval_numeric(coef, &point)? * coefficients[*j];
            }
            max_resid = max_resid.max(v.abs());
        }
    }
    let witness = if nullspace_dim > 0 {
        fit.witness.map(|w| {
            let mut parts: Vec<String> = Vec::new();
            for (j, x) in w.iter().enumerate() {
                if x.abs() > 1e-6 {
                    let (si, _, f) = &c_meta[j];
                    let s = sys.slots[*si];
                    parts.push(format!(
                        "{:+.3}*[{{{},{}}}~{}]",
                        x,
                        sys.independent[s.k].name(),
                        sys.independent[s.l].name(),
                        f
                    ));
                }
                if parts.len() >= 4 {
                    break;
                }
            }
            parts.join(" ")
        })
    } else {
        None
    };
    Ok(CollocationOutcome { coefficients, residual: max_resid, nullspace_dim, witness, warnings })
}

/// Sequentially thresholded least squares: at each threshold, iterate
/// support selection and restricted refits to a fixpoint; accept the first
/// stable support whose restricted system is full rank and reproduces the
/// data. Returns None when no such support exists (genuine degeneracy).
fn sparsify(a: &DMatrix<f64>, b: &DVector<f64>, initial: &[f64], tol: f64) -> Option<Vec<f64>> {
    let fit_tol = tol.max(1e-9);
    let mut lambda = 1e-6f64;
    while lambda <= 1e3 {
        let mut current = initial.to_vec();
        let mut prev_support: Option<Vec<usize>> = None;
        for _ in 0..30 {
            let support: Vec<usize> = current
                .iter()
                .enumerate()
                .filter(|(_, c)| c.abs() > lambda)
                .map(|(j, _)| j)
                .collect();
            if support.is_empty() {
                break;
            }
            let a_s = a.select_columns(&support);
            let fit = least_squares(&a_s, b).ok()?;
            let resid = (&a_s * DVector::from_vec(fit.solution.clone()) - b).abs().max();
            let stable = prev_support.as_deref() == Some(&support[..]);
            if stable {
                if fit.nullspace_dim == 0 && resid <= fit_tol {
                    let mut out = vec![0.0; a.ncols()];
                    for (s, j) in support.iter().enumerate() {
                        out[*j] = fit.solution[s];
                    }
                    return Some(out);
                }
                break;
            }
            let mut next = vec![0.0; a.ncols()];
            for (s, j) in support.iter().enumerate() {
                next[*j] = fit.solution[s];
            }
            prev_support = Some(support);
            current = next;
        }
        lambda *= 10.0;
    }
    None
}

/// Snap a float to a rational with denominator <= 64 when one lies within
/// 1e-9; otherwise keep the exact binary value of the float.
pub fn snap_rational(x: f64) -> (Rat, bool) {
    for q in 1..=64i64 {
        let p = (x * q as f64).round();
        if (x - p / q as f64).abs() <= 1e-9 && p.abs() < 1e15 {
            return (Rat::new(BigInt::from(p as i64), BigInt::from(q)), true);
        }
    }
    (Rat::from_f64(x).unwrap_or_else(|| Rat::from_integer(BigInt::from(0))), false)
}

/// Exact coefficient matching for graded systems: expand every equation in
/// the odd-monomial basis, split the resulting even coefficient identities
/// per monomial in the remaining atoms so every linear coefficient is a
/// complex rational, and solve by exact elimination.
pub fn graded_match(
    sys: &IdentificationSystem,
    basis_even: &[Expr],
    cfg: &SolverConfig,
) -> Result<(BTreeMap<Sym, Expr>, f64, Vec<Sym>)> {
    let (c_syms, c_meta, equations) = expand_rows(sys, basis_even);
    // group by odd monomial: each group's even coefficient must vanish
    let mut coefficient_eqs: Vec<Expr> = Vec::new();
    for e in &equations {
        let mut groups: BTreeMap<Vec<String>, Expr> = BTreeMap::new();
        for t in e.terms() {
            let word: Vec<String> = t.odd_word().iter().map(|s| s.name().to_string()).collect();
            let even_part = t.without_odds();
            let entry = groups.entry(word).or_insert_with(Expr::zero);
            *entry = entry.add(&even_part);
        }
        for (_, g) in groups {
            if !g.is_zero() {
                coefficient_eqs.push(g);
            }
        }
    }

    // The unknowns are constants, so each coefficient identity splits per
    // monomial in the even symbols and exponential atoms; the split system
    // has complex-rational coefficients and solves exactly.
    let mut split_eqs: Vec<Expr> = Vec::new();
    for e in &coefficient_eqs {
        let (coefs, rest) = linsolve::linear_decompose(e, &c_syms)?;
        let mut keyed: BTreeMap<Expr, Expr> = BTreeMap::new();
        for t in rest.terms() {
            let (c, unit) = t.split_complex_coeff();
            let slot = keyed.entry(unit).or_insert_with(Expr::zero);
            *slot = slot.add(&c);
        }
        for (j, a) in &coefs {
            for t in a.terms() {
                let (c, unit) = t.split_complex_coeff();
                let slot = keyed.entry(unit).or_insert_with(Expr::zero);
                *slot = slot.add(&c.mul(&Expr::sym(&c_syms[*j])));
            }
        }
        for (_, eq) in keyed {
            if !eq.is_zero() {
                split_eqs.push(eq);
            }
        }
    }

    let sol = linsolve::solve(&split_eqs, &c_syms)?;
    for r in &sol.leftover {
        if !r.is_zero() {
            return Err(Error::BasisInsufficient { residual: f64::INFINITY, tol: cfg.tol });
        }
    }
    if !sol.unresolved.is_empty() {
        return Err(Error::NonUniqueBrackets {
            dim: sol.unresolved.len(),
            witness: sol
                .unresolved
                .iter()
                .map(|s| describe_coefficient(sys, &c_meta, &c_syms, s))
                .collect::<Vec<_>>()
                .join(", "),
        });
    }
    let mut map = BTreeMap::new();
    for c in &c_syms {
        map.insert(c.clone(), sol.solved.get(c).cloned().unwrap_or_else(Expr::zero));
    }
    Ok((map, 0.0, c_syms))
}

fn describe_coefficient(
    sys: &IdentificationSystem,
    c_meta: &[(usize, usize, Expr)],
    c_syms: &[Sym],
    c: &Sym,
) -> String {
    match c_syms.iter().position(|s| s == c) {
        Some(j) => {
            let (si, _, f) = &c_meta[j];
            let s = sys.slots[*si];
            format!(
                "{{{},{}}} along {}",
                sys.independent[s.k].name(),
                sys.independent[s.l].name(),
                f
            )
        }
        None => c.name().to_string(),
    }
}

/// Solve the identification system, escalating the basis degree from 0 up to
/// `cfg.degree` until the validation residual passes. The escalation keeps
/// large lattices at the constant tier instead of drowning them in columns.
pub fn solve_identification(
    sys: &IdentificationSystem,
    cfg: &SolverConfig,
) -> Result<IdentSolution> {
    if sys.has_odd {
        let basis = harvest_basis(sys, 0);
        let (coefmap, residual, c_syms) = graded_match(sys, &basis, cfg)?;
        let slot_values = assemble_slots_exact(sys, &basis, &coefmap, &c_syms);
        return Ok(IdentSolution {
            slot_values,
            residual,
            nullspace_dim: 0,
            degree_used: 0,
            warnings: Vec::new(),
        });
    }

    let mut best: Option<(f64, usize)> = None;
    for degree in 0..=cfg.degree {
        let basis = harvest_basis(sys, degree);
        let ncols = basis.len() * sys.slots.len();
        let nrows = sys.rows.len() * cfg.samples;
        if ncols > nrows {
            // cannot be determined at this tier; keep the best diagnostic
            break;
        }
        let out = collocation_solve(sys, &basis, cfg.samples, cfg.seed, cfg.tol)?;
        if out.residual <= cfg.tol {
            if out.nullspace_dim > 0 {
                return Err(Error::NonUniqueBrackets {
                    dim: out.nullspace_dim,
                    witness: out.witness.unwrap_or_default(),
                });
            }
            let (slot_values, mut warnings) = assemble_slots_snapped(sys, &basis, &out.coefficients);
            warnings.extend(out.warnings);
            return Ok(IdentSolution {
                slot_values,
                residual: out.residual,
                nullspace_dim: out.nullspace_dim,
                degree_used: degree,
                warnings,
            });
        }
        best = Some(match best {
            None => (out.residual, degree),
            Some((r, _d)) if out.residual < r => (out.residual, degree),
            Some(b) => b,
        });
    }
    let (residual, _) = best.unwrap_or((f64::INFINITY, 0));
    Err(Error::BasisInsufficient { residual, tol: cfg.tol })
}

fn assemble_slots_exact(
    sys: &IdentificationSystem,
    basis_even: &[Expr],
    coefmap: &BTreeMap<Sym, Expr>,
    _c_syms: &[Sym],
) -> Vec<Expr> {
    let odd_ics: Vec<Sym> = sys.independent.iter().filter(|c| c.is_odd()).cloned().collect();
    let mut out = Vec::with_capacity(sys.slots.len());
    for (si, b) in sys.slot_syms.iter().enumerate() {
        let funcs: Vec<Expr> = match b.parity() {
            Parity::Even => basis_even.to_vec(),
            Parity::Odd => odd_ics
                .iter()
                .flat_map(|th| basis_even.iter().map(move |m| m.mul(&Expr::sym(th))))
                .collect(),
        };
        let mut v = Expr::zero();
        for (bi, f) in funcs.iter().enumerate() {
            let c = Sym::even(&format!("_c_{si}_{bi}"));
            if let Some(cv) = coefmap.get(&c) {
                v = v.add(&cv.mul(f));
            }
        }
        out.push(v);
    }
    out
}

fn assemble_slots_snapped(
    sys: &IdentificationSystem,
    basis: &[Expr],
    floats: &[f64],
) -> (Vec<Expr>, Vec<String>) {
    let mut warnings = Vec::new();
    let mut out = Vec::with_capacity(sys.slots.len());
    let nb = basis.len();
    for (si, s) in sys.slots.iter().enumerate() {
        let mut v = Expr::zero();
        for (bi, f) in basis.iter().enumerate() {
            let x = floats[si * nb + bi];
            if x.abs() <= 1e-9 {
                continue;
            }
            let (r, snapped) = snap_rational(x);
            if !snapped {
                warnings.push(format!(
                    "coefficient {x} of {{{},{}}} along `{f}` kept as a float",
                    sys.independent[s.k].name(),
                    sys.independent[s.l].name()
                ));
            }
            v = v.add(&f.scale(&r));
        }
        out.push(v);
    }
    (out, warnings)
}

// ---------------------------------------------------------------------------
// Bracket tables
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    Solved,
    Extended,
    ZeroByParity,
}

/// Graded-antisymmetric table of equal-time brackets over phase variables.
/// Entries are stored for `i <= j` in phase order; lookups fold in the graded
/// swap sign.
#[derive(Clone, Debug)]
pub struct BracketTable {
    pub system: String,
    pub independent: Vec<Sym>,
    phase_vars: Vec<Sym>,
    phase_ics: Vec<Sym>,
    entries: BTreeMap<(usize, usize), (Expr, Provenance)>,
}

impl BracketTable {
    pub fn new(system: &str, spec: &SystemSpec, independent: Vec<Sym>) -> Self {
        BracketTable {
            system: system.to_string(),
            independent,
            phase_vars: spec.phase_vars(),
            phase_ics: spec.phase_ics(),
            entries: BTreeMap::new(),
        }
    }

    pub fn phase_vars(&self) -> &[Sym] {
        &self.phase_vars
    }

    /// IC symbols aligned with [`BracketTable::phase_vars`].
    pub fn phase_ic_syms(&self) -> &[Sym] {
        &self.phase_ics
    }

    fn index_of(&self, s: &Sym) -> Result<usize> {
        self.phase_vars
            .iter()
            .position(|v| v == s)
            .ok_or_else(|| Error::UnboundSymbol(s.name().to_string()))
    }

    pub fn insert(&mut self, a: &Sym, b: &Sym, value: Expr, provenance: Provenance) {
        let i = self.index_of(a).expect("phase variable");
        let j = self.index_of(b).expect("phase variable");
        if i <= j {
            self.entries.insert((i, j), (value, provenance));
        } else {
            let sign = swap_sign(a, b);
            self.entries.insert((j, i), (value.scale(&rat(sign, 1)), provenance));
        }
    }

    /// `{a, b}` over phase variables, if present.
    pub fn entry(&self, a: &Sym, b: &Sym) -> Option<Expr> {
        let i = self.index_of(a).ok()?;
        let j = self.index_of(b).ok()?;
        if i == j && !a.is_odd() {
            return Some(Expr::zero());
        }
        if i <= j {
            self.entries.get(&(i, j)).map(|(e, _)| e.clone())
        } else {
            self.entries
                .get(&(j, i))
                .map(|(e, _)| e.scale(&rat(swap_sign(a, b), 1)))
        }
    }

    pub fn provenance(&self, a: &Sym, b: &Sym) -> Option<Provenance> {
        let i = self.index_of(a).ok()?;
        let j = self.index_of(b).ok()?;
        let key = if i <= j { (i, j) } else { (j, i) };
        self.entries.get(&key).map(|(_, p)| *p)
    }

    /// Iterate stored entries `(a, b, value, provenance)` with `a <= b`.
    pub fn iter_entries(&self) -> impl Iterator<Item = (&Sym, &Sym, &Expr, Provenance)> {
        self.entries.iter().map(move |((i, j), (e, p))| {
            (&self.phase_vars[*i], &self.phase_vars[*j], e, *p)
        })
    }

    fn phase_to_ic(&self) -> BTreeMap<Sym, Sym> {
        self.phase_vars.iter().cloned().zip(self.phase_ics.iter().cloned()).collect()
    }

    fn ic_to_phase(&self) -> BTreeMap<Sym, Sym> {
        self.phase_ics.iter().cloned().zip(self.phase_vars.iter().cloned()).collect()
    }

    /// `{a, b}` with the value rewritten over IC symbols.
    pub fn entry_ic(&self, a: &Sym, b: &Sym) -> Option<Expr> {
        self.entry(a, b).map(|e| rename(&e, &self.phase_to_ic()))
    }

    /// Graded bracket of two expressions over phase variables:
    /// `sum (f d^R/dxi_a) {xi_a, xi_b} (d^L/dxi_b g)`.
    pub fn bracket_of(&self, f: &Expr, g: &Expr) -> Result<Expr> {
        let f_syms = f.symbols();
        let g_syms = g.symbols();
        for s in f_syms.union(&g_syms) {
            if self.index_of(s).is_err() {
                return Err(Error::UnboundSymbol(s.name().to_string()));
            }
        }
        let mut acc = Expr::zero();
        for a in &f_syms {
            let df = differentiate(f, a, Side::Right);
            if df.is_zero() {
                continue;
            }
            for b in &g_syms {
                let dg = differentiate(g, b, Side::Left);
                if dg.is_zero() {
                    continue;
                }
                let th = self
                    .entry(a, b)
                    .ok_or_else(|| Error::UnboundSymbol(format!("{{{},{}}}", a.name(), b.name())))?;
                if th.is_zero() {
                    continue;
                }
                acc = acc.add(&df.mul(&th).mul(&dg));
            }
        }
        Ok(acc)
    }

    /// Same bracket, for expressions written over the IC symbols.
    pub fn bracket_of_ic(&self, f: &Expr, g: &Expr) -> Result<Expr> {
        let to_phase = self.ic_to_phase();
        let fp = rename(f, &to_phase);
        let gp = rename(g, &to_phase);
        let out = self.bracket_of(&fp, &gp)?;
        Ok(rename(&out, &self.phase_to_ic()))
    }
}

/// Dense matrix of slot values for fast ordered-pair lookup.
struct SlotMatrix {
    theta: Vec<Vec<Expr>>,
}

impl SlotMatrix {
    fn new(independent: &[Sym], slots: &[Slot], values: &[Expr]) -> Self {
        let m = independent.len();
        let mut theta = vec![vec![Expr::zero(); m]; m];
        for (s, v) in slots.iter().zip(values) {
            theta[s.k][s.l] = v.clone();
            if s.k != s.l {
                theta[s.l][s.k] =
                    v.scale(&rat(swap_sign(&independent[s.k], &independent[s.l]), 1));
            }
        }
        SlotMatrix { theta }
    }
}

/// Bracket of two expressions over independent ICs given the solved slots.
fn independent_bracket(
    independent: &[Sym],
    matrix: &SlotMatrix,
    f: &Expr,
    g: &Expr,
) -> Expr {
    let f_syms = f.symbols();
    let g_syms = g.symbols();
    let mut acc = Expr::zero();
    for (a, ca) in independent.iter().enumerate() {
        if !f_syms.contains(ca) {
            continue;
        }
        let df = differentiate(f, ca, Side::Right);
        if df.is_zero() {
            continue;
        }
        for (b, cb) in independent.iter().enumerate() {
            if !g_syms.contains(cb) {
                continue;
            }
            let th = &matrix.theta[a][b];
            if th.is_zero() {
                continue;
            }
            let dg = differentiate(g, cb, Side::Left);
            if dg.is_zero() {
                continue;
            }
            acc = acc.add(&df.mul(th).mul(&dg));
        }
    }
    acc
}

/// Table over the independent phase variables only (the solved slots with IC
/// symbols rewritten to phase variables).
pub fn reconstruct_brackets(
    spec: &SystemSpec,
    ics: &ICConstraintSet,
    sys: &IdentificationSystem,
    sol: &IdentSolution,
) -> BracketTable {
    let mut table = BracketTable::new(&spec.name, spec, ics.independent.clone());
    let to_phase = table.ic_to_phase();
    for (s, v) in sys.slots.iter().zip(&sol.slot_values) {
        let a_ic = &sys.independent[s.k];
        let b_ic = &sys.independent[s.l];
        let a = to_phase[a_ic].clone();
        let b = to_phase[b_ic].clone();
        table.insert(&a, &b, rename(v, &to_phase), Provenance::Solved);
    }
    table
}

/// Close the table over every coordinate and momentum by pushing the
/// elimination map through bracket bilinearity.
pub fn extend_table(
    spec: &SystemSpec,
    ics: &ICConstraintSet,
    sys: &IdentificationSystem,
    sol: &IdentSolution,
) -> Result<BracketTable> {
    let mut table = BracketTable::new(&spec.name, spec, ics.independent.clone());
    let to_phase = table.ic_to_phase();
    let phase_vars = table.phase_vars.clone();
    let phase_ics = table.phase_ics.clone();
    let independent_set: Vec<bool> = phase_ics
        .iter()
        .map(|ic| sys.independent.contains(ic))
        .collect();
    let matrix = SlotMatrix::new(&sys.independent, &sys.slots, &sol.slot_values);
    for i in 0..phase_vars.len() {
        for j in i..phase_vars.len() {
            if i == j && !phase_vars[i].is_odd() {
                continue;
            }
            let fi = ics.expression_for(&phase_ics[i]);
            let fj = ics.expression_for(&phase_ics[j]);
            let v_ic = independent_bracket(&sys.independent, &matrix, &fi, &fj);
            let v = rename(&v_ic, &to_phase);
            let provenance = if independent_set[i] && independent_set[j] {
                Provenance::Solved
            } else if v.is_zero() && phase_vars[i].parity() != phase_vars[j].parity() {
                Provenance::ZeroByParity
            } else {
                Provenance::Extended
            };
            table.insert(&phase_vars[i], &phase_vars[j], v, provenance);
        }
    }
    Ok(table)
}
