//! Reference implementation of the classical constraint algorithm for even
//! systems: primary constraints from velocity elimination, consistency
//! closure with multipliers, second-class classification, and the standard
//! bracket formula `{A,B} - {A,phi_a} (C^-1)_ab {phi_b,B}`.
//!
//! This module deliberately shares nothing with the initial-instant pipeline
//! beyond the expression kernel and the value types, so its tables are an
//! independent cross-check.

#![allow(clippy::needless_range_loop)] // index loops mirror the matrix algebra

use crate::bracket_solver::BracketTable;
use crate::error::{Error, Result};
use crate::linsolve;
use crate::mechanics::momenta;
use crate::numeric::{sample_point, seeded_rng};
use crate::symexpr::{differentiate, eval_numeric, substitute, Expr, Parity, Side, Sym};
use crate::sysparse::SystemSpec;
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Origin {
    Primary,
    Consistency(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintClass {
    First,
    Second,
    Undetermined,
}

#[derive(Clone, Debug)]
pub struct ConstraintRecord {
    pub expr: Expr,
    pub origin: Origin,
    pub class: ConstraintClass,
}

/// Canonical Poisson bracket over the phase variables of the spec.
pub fn poisson(spec: &SystemSpec, a: &Expr, b: &Expr) -> Expr {
    let mut acc = Expr::zero();
    for c in &spec.coords {
        let p = SystemSpec::momentum(c);
        let daq = differentiate(a, c, Side::Left);
        let dbp = differentiate(b, &p, Side::Left);
        if !daq.is_zero() && !dbp.is_zero() {
            acc = acc.add(&daq.mul(&dbp));
        }
        let dap = differentiate(a, &p, Side::Left);
        let dbq = differentiate(b, c, Side::Left);
        if !dap.is_zero() && !dbq.is_zero() {
            acc = acc.sub(&dap.mul(&dbq));
        }
    }
    acc
}

/// Primary constraints, the solved velocity map, and the canonical
/// Hamiltonian with every remaining velocity cancelled against the primaries.
pub struct PrimaryData {
    pub constraints: Vec<ConstraintRecord>,
    pub velocity_solution: BTreeMap<Sym, Expr>,
    pub h_canonical: Expr,
}

fn surface_solve_policy(spec: &SystemSpec, relation: &Expr) -> Result<(Sym, Expr)> {
    // prefer momenta, then the highest declaration index, linear with an
    // invertible monomial coefficient
    let momenta_syms: Vec<Sym> = spec.coords.iter().map(SystemSpec::momentum).collect();
    let rank = |s: &Sym| -> Option<(usize, usize)> {
        if let Some(i) = momenta_syms.iter().position(|m| m == s) {
            return Some((0, i));
        }
        spec.coords.iter().position(|c| c == s).map(|i| (1, i))
    };
    let mut candidates: Vec<(usize, usize, Sym)> = relation
        .symbols()
        .into_iter()
        .filter_map(|s| rank(&s).map(|(k, i)| (k, i, s)))
        .collect();
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
    for (_, _, cand) in candidates {
        let Ok((coefs, rest)) = linsolve::linear_decompose(relation, std::slice::from_ref(&cand))
        else {
            continue;
        };
        let Some((_, coef)) = coefs.first() else { continue };
        let Some(inv) = coef.invert_monomial() else { continue };
        return Ok((cand, inv.neg().mul(&rest)));
    }
    Err(Error::UnsolvableConstraint(format!("{relation} = 0")))
}

fn close_map(map: &mut BTreeMap<Sym, Expr>) -> Result<()> {
    for _ in 0..map.len() {
        let snapshot = map.clone();
        let mut changed = false;
        for e in map.values_mut() {
            let ne = substitute(e, &snapshot)?;
            if ne != *e {
                *e = ne;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(())
}

/// Velocity elimination: momentum definitions that cannot be solved for a
/// velocity become primary constraints `phi(q, p) = 0`.
pub fn primary_constraints(spec: &SystemSpec) -> Result<PrimaryData> {
    if spec.coords.iter().any(|c| c.parity() == Parity::Odd) {
        return Err(Error::Invalid(
            "the constraint-algorithm oracle handles even systems only".into(),
        ));
    }
    let ms = momenta(spec);
    let vels: Vec<Sym> = spec.coords.iter().map(SystemSpec::velocity).collect();
    let equations: Vec<Expr> = spec
        .coords
        .iter()
        .zip(&ms)
        .map(|(c, m)| Expr::sym(&SystemSpec::momentum(c)).sub(m))
        .collect();
    let sol = linsolve::solve(&equations, &vels)?;
    let constraints: Vec<ConstraintRecord> = sol
        .leftover
        .iter()
        .map(|e| ConstraintRecord { expr: e.clone(), origin: Origin::Primary, class: ConstraintClass::Undetermined })
        .collect();

    // H = sum q̇ p - L with the solved velocities substituted; the unsolved
    // directions multiply primary constraints and cancel on the surface
    let mut h = spec.lagrangian.neg();
    for c in &spec.coords {
        h = h.add(&Expr::sym(&SystemSpec::velocity(c)).mul(&Expr::sym(&SystemSpec::momentum(c))));
    }
    let h = substitute(&h, &sol.solved)?;
    let mut surface: BTreeMap<Sym, Expr> = BTreeMap::new();
    for rec in &constraints {
        let (target, expr) = surface_solve_policy(spec, &rec.expr)?;
        surface.insert(target, expr);
    }
    close_map(&mut surface)?;
    let h = substitute(&h, &surface)?;
    if vels.iter().any(|v| h.depends_on(v)) {
        return Err(Error::Invalid(
            "canonical Hamiltonian retains velocities after constraint reduction".into(),
        ));
    }
    Ok(PrimaryData { constraints, velocity_solution: sol.solved, h_canonical: h })
}

/// The closed constraint set plus surface data.
pub struct DiracClosure {
    pub constraints: Vec<ConstraintRecord>,
    pub h_canonical: Expr,
    /// Dependent phase variables solved from the constraints.
    pub surface: BTreeMap<Sym, Expr>,
    /// Multipliers fixed by the consistency conditions (by primary index).
    pub multipliers_fixed: Vec<bool>,
}

/// Iterate `d/dt phi = {phi, H + sum lambda phi} ~ 0`: each step fixes
/// multipliers or produces new constraints until the set closes.
pub fn consistency_closure(spec: &SystemSpec, cap: usize) -> Result<DiracClosure> {
    let primary = primary_constraints(spec)?;
    let n_primary = primary.constraints.len();
    let lambdas: Vec<Sym> = (0..n_primary).map(|i| Sym::even(&format!("_lam_{i}"))).collect();
    let mut constraints = primary.constraints;
    let mut surface: BTreeMap<Sym, Expr> = BTreeMap::new();
    for rec in &constraints {
        let (t, e) = surface_solve_policy(spec, &rec.expr)?;
        surface.insert(t, e);
    }
    close_map(&mut surface)?;
    let mut lambda_solved: BTreeMap<Sym, Expr> = BTreeMap::new();

    for step in 1..=cap {
        let mut new_constraints: Vec<Expr> = Vec::new();
        let mut lambda_eqs: Vec<Expr> = Vec::new();
        for rec in &constraints {
            let mut expr = poisson(spec, &rec.expr, &primary.h_canonical);
            for (b, lam) in lambdas.iter().enumerate() {
                let pb = poisson(spec, &rec.expr, &constraints[b].expr);
                if !pb.is_zero() {
                    expr = expr.add(&Expr::sym(lam).mul(&pb));
                }
            }
            let expr = substitute(&expr, &surface)?;
            let expr = substitute(&expr, &lambda_solved)?;
            // multiplier values may reintroduce surface-dependent variables
            let expr = substitute(&expr, &surface)?;
            if expr.is_zero() {
                continue;
            }
            if lambdas.iter().any(|l| expr.depends_on(l)) {
                lambda_eqs.push(expr);
            } else {
                new_constraints.push(expr);
            }
        }
        // fix whatever multipliers this round's equations determine
        if !lambda_eqs.is_empty() {
            let unsolved: Vec<Sym> = lambdas
                .iter()
                .filter(|l| !lambda_solved.contains_key(*l))
                .cloned()
                .collect();
            let lsol = linsolve::solve(&lambda_eqs, &unsolved)?;
            for (l, e) in &lsol.solved {
                lambda_solved.insert(l.clone(), e.clone());
            }
            for r in &lsol.leftover {
                if !r.is_zero() {
                    new_constraints.push(r.clone());
                }
            }
        }
        if new_constraints.is_empty() {
            let multipliers_fixed =
                lambdas.iter().map(|l| lambda_solved.contains_key(l)).collect();
            return Ok(DiracClosure {
                constraints,
                h_canonical: primary.h_canonical,
                surface,
                multipliers_fixed,
            });
        }
        for e in new_constraints {
            let (t, se) = surface_solve_policy(spec, &e)?;
            surface.insert(t, se);
            close_map(&mut surface)?;
            constraints.push(ConstraintRecord {
                expr: e,
                origin: Origin::Consistency(step),
                class: ConstraintClass::Undetermined,
            });
        }
    }
    Err(Error::NonTerminating(cap))
}

/// The constraint matrix `C_ab = {phi_a, phi_b}` reduced to the surface.
pub fn constraint_matrix(spec: &SystemSpec, closure: &DiracClosure) -> Result<Vec<Vec<Expr>>> {
    let n = closure.constraints.len();
    let mut m = vec![vec![Expr::zero(); n]; n];
    for a in 0..n {
        for b in (a + 1)..n {
            let pb = poisson(spec, &closure.constraints[a].expr, &closure.constraints[b].expr);
            let pb = substitute(&pb, &closure.surface)?;
            m[a][b] = pb.clone();
            m[b][a] = pb.neg();
        }
    }
    Ok(m)
}

/// Symbolic inverse as adjugate over determinant, available for small
/// constraint sets.
pub struct SymbolicInverse {
    pub adjugate: Vec<Vec<Expr>>,
    pub determinant: Expr,
}

fn det_expr(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    if n == 0 {
        return Expr::one();
    }
    if n == 1 {
        return m[0][0].clone();
    }
    let mut acc = Expr::zero();
    for (j, entry) in m[0].iter().enumerate() {
        if entry.is_zero() {
            continue;
        }
        let minor: Vec<Vec<Expr>> = m[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(k, _)| *k != j)
                    .map(|(_, e)| e.clone())
                    .collect()
            })
            .collect();
        let term = entry.mul(&det_expr(&minor));
        if j % 2 == 0 {
            acc = acc.add(&term);
        } else {
            acc = acc.sub(&term);
        }
    }
    acc
}

/// Classify the closed set and build the inverse machinery. First-class
/// constraints (a row of weakly vanishing brackets, or a symbolically
/// singular matrix) signal gauge freedom.
pub fn classify_and_invert(
    spec: &SystemSpec,
    closure: &mut DiracClosure,
) -> Result<Option<SymbolicInverse>> {
    let m = constraint_matrix(spec, closure)?;
    let n = m.len();
    for a in 0..n {
        if (0..n).all(|b| m[a][b].is_zero()) {
            closure.constraints[a].class = ConstraintClass::First;
        } else {
            closure.constraints[a].class = ConstraintClass::Second;
        }
    }
    if closure.constraints.iter().any(|c| c.class == ConstraintClass::First) {
        let names: Vec<String> = closure
            .constraints
            .iter()
            .filter(|c| c.class == ConstraintClass::First)
            .map(|c| c.expr.to_string())
            .collect();
        return Err(Error::GaugeFreedom(format!(
            "first-class constraints present: {}",
            names.join(", ")
        )));
    }
    if n == 0 {
        return Ok(None);
    }
    if n <= 6 {
        let det = det_expr(&m);
        if det.is_zero() {
            return Err(Error::GaugeFreedom(
                "constraint matrix is symbolically singular (first-class combination)".into(),
            ));
        }
        // adjugate: cofactor transpose
        let mut adj = vec![vec![Expr::zero(); n]; n];
        for i in 0..n {
            for j in 0..n {
                let minor: Vec<Vec<Expr>> = m
                    .iter()
                    .enumerate()
                    .filter(|(r, _)| *r != i)
                    .map(|(_, row)| {
                        row.iter()
                            .enumerate()
                            .filter(|(c, _)| *c != j)
                            .map(|(_, e)| e.clone())
                            .collect()
                    })
                    .collect();
                let mut cof = det_expr(&minor);
                if (i + j) % 2 == 1 {
                    cof = cof.neg();
                }
                adj[j][i] = cof;
            }
        }
        Ok(Some(SymbolicInverse { adjugate: adj, determinant: det }))
    } else {
        Ok(None)
    }
}

/// Symbolic Dirac bracket as a `(numerator, denominator)` pair over the
/// common determinant; collapses to a plain expression when the determinant
/// is an invertible monomial.
pub fn dirac_bracket_symbolic(
    spec: &SystemSpec,
    closure: &DiracClosure,
    inv: &SymbolicInverse,
    a: &Expr,
    b: &Expr,
) -> (Expr, Expr) {
    let n = closure.constraints.len();
    let pb = poisson(spec, a, b);
    let mut correction = Expr::zero();
    for i in 0..n {
        let pai = poisson(spec, a, &closure.constraints[i].expr);
        if pai.is_zero() {
            continue;
        }
        for j in 0..n {
            let pjb = poisson(spec, &closure.constraints[j].expr, b);
            if pjb.is_zero() || inv.adjugate[i][j].is_zero() {
                continue;
            }
            correction = correction.add(&pai.mul(&inv.adjugate[i][j]).mul(&pjb));
        }
    }
    let num = pb.mul(&inv.determinant).sub(&correction);
    (num, inv.determinant.clone())
}

/// Dirac bracket collapsed to a plain expression when possible.
pub fn dirac_bracket(
    spec: &SystemSpec,
    closure: &DiracClosure,
    inv: &SymbolicInverse,
    a: &Expr,
    b: &Expr,
) -> Option<Expr> {
    let (num, den) = dirac_bracket_symbolic(spec, closure, inv, a, b);
    den.invert_monomial().map(|i| num.mul(&i))
}

/// Everything needed to evaluate Dirac brackets numerically at sample points.
pub struct NumericBrackets {
    phase_vars: Vec<Sym>,
    pb_pairs: Vec<Vec<Expr>>,
    pb_var_con: Vec<Vec<Expr>>,
    matrix: Vec<Vec<Expr>>,
}

pub fn numeric_brackets(spec: &SystemSpec, closure: &DiracClosure) -> Result<NumericBrackets> {
    let phase_vars = spec.phase_vars();
    let nv = phase_vars.len();
    let nc = closure.constraints.len();
    let mut pb_pairs = vec![vec![Expr::zero(); nv]; nv];
    for i in 0..nv {
        for j in 0..nv {
            pb_pairs[i][j] = poisson(spec, &Expr::sym(&phase_vars[i]), &Expr::sym(&phase_vars[j]));
        }
    }
    let mut pb_var_con = vec![vec![Expr::zero(); nc]; nv];
    for (i, v) in phase_vars.iter().enumerate() {
        for (a, rec) in closure.constraints.iter().enumerate() {
            pb_var_con[i][a] = poisson(spec, &Expr::sym(v), &rec.expr);
        }
    }
    let matrix = constraint_matrix(spec, closure)?;
    Ok(NumericBrackets { phase_vars, pb_pairs, pb_var_con, matrix })
}

impl NumericBrackets {
    /// All pairwise Dirac brackets at one numeric phase point; reports the
    /// condition number of the constraint matrix alongside.
    pub fn all_pairs_at(
        &self,
        point: &BTreeMap<Sym, f64>,
    ) -> Result<(Vec<Vec<f64>>, f64)> {
        let nv = self.phase_vars.len();
        let nc = self.matrix.len();
        let mut out = vec![vec![0.0; nv]; nv];
        if nc == 0 {
            for i in 0..nv {
                for j in 0..nv {
                    out[i][j] = eval_numeric(&self.pb_pairs[i][j], point)?;
                }
            }
            return Ok((out, 1.0));
        }
        let mut c = DMatrix::zeros(nc, nc);
        for a in 0..nc {
            for b in 0..nc {
                c[(a, b)] = eval_numeric(&self.matrix[a][b], point)?;
            }
        }
        let svd = c.clone().svd(false, false);
        let smax = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
        let smin = svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min);
        if smin <= smax * 1e-12 {
            return Err(Error::SingularMatrix);
        }
        let cond = smax / smin;
        let lu = c.lu();
        // x_j = C^-1 {phi, xi_j}
        let mut solves: Vec<DVector<f64>> = Vec::with_capacity(nv);
        for j in 0..nv {
            let mut v = DVector::zeros(nc);
            for a in 0..nc {
                v[a] = -eval_numeric(&self.pb_var_con[j][a], point)?; // {phi_a, xi_j}
            }
            solves.push(lu.solve(&v).ok_or(Error::SingularMatrix)?);
        }
        for i in 0..nv {
            let mut u = vec![0.0; nc];
            for a in 0..nc {
                u[a] = eval_numeric(&self.pb_var_con[i][a], point)?;
            }
            for j in 0..nv {
                let mut corr = 0.0;
                for a in 0..nc {
                    corr += u[a] * solves[j][a];
                }
                out[i][j] = eval_numeric(&self.pb_pairs[i][j], point)? - corr;
            }
        }
        Ok((out, cond))
    }
}

/// Sample a constraint-consistent phase point: free variables uniform from
/// the standard range, dependent ones through the surface map.
pub fn sample_surface_point(
    spec: &SystemSpec,
    closure: &DiracClosure,
    rng: &mut rand_chacha::ChaCha12Rng,
) -> Result<BTreeMap<Sym, f64>> {
    let mut sampling: Vec<(Sym, bool)> = spec
        .phase_vars()
        .into_iter()
        .filter(|v| !closure.surface.contains_key(v))
        .map(|v| (v, false))
        .collect();
    sampling.extend(spec.params.iter().cloned());
    let mut point = sample_point(rng, &sampling);
    for (dep, expr) in &closure.surface {
        let v = eval_numeric(expr, &point)?;
        point.insert(dep.clone(), v);
    }
    Ok(point)
}

/// Max deviation between the initial-instant table and the oracle's Dirac
/// brackets over constraint-consistent random phase points.
pub fn compare_tables(
    spec: &SystemSpec,
    table: &BracketTable,
    closure: &DiracClosure,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let nb = numeric_brackets(spec, closure)?;
    let phase_vars = spec.phase_vars();
    let nv = phase_vars.len();
    // table entries as numeric callables
    let mut entries = vec![vec![Expr::zero(); nv]; nv];
    for i in 0..nv {
        for j in 0..nv {
            entries[i][j] = table
                .entry(&phase_vars[i], &phase_vars[j])
                .ok_or_else(|| Error::UnboundSymbol(phase_vars[i].name().into()))?;
        }
    }
    let mut rng = seeded_rng(seed);
    let mut max_dev = 0.0f64;
    let mut point = sample_surface_point(spec, closure, &mut rng)?;
    for _ in 0..samples {
        let pairs = match nb.all_pairs_at(&point) {
            Ok((p, _)) => p,
            Err(Error::SingularMatrix) => {
                // measure-zero sample: resample once
                point = sample_surface_point(spec, closure, &mut rng)?;
                nb.all_pairs_at(&point)?.0
            }
            Err(e) => return Err(e),
        };
        for i in 0..nv {
            for j in 0..nv {
                let ci = eval_numeric(&entries[i][j], &point)?;
                max_dev = max_dev.max((ci - pairs[i][j]).abs());
            }
        }
        point = sample_surface_point(spec, closure, &mut rng)?;
    }
    Ok(max_dev)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::rat;
    use crate::sysparse::parse_system;

    const TOY: &str = "\
system toy
coord x even
coord y even
coord z even
L = (1/2)*dx^2 + (z + exp(-x))*dy - (1/2)*z*x^2
";
    const OSC: &str = "system osc\ncoord q even\nL = (1/2)*dq^2 - (1/2)*q^2\n";

    fn s(n: &str) -> Expr {
        Expr::sym(&Sym::even(n))
    }

    #[test]
    fn toy_primary_constraints() {
        let spec = parse_system(TOY).unwrap();
        let pd = primary_constraints(&spec).unwrap();
        assert_eq!(pd.constraints.len(), 2);
        let phi1 = s("p_y").sub(&s("z")).sub(&Expr::exp(&s("x").neg()).unwrap());
        let phi2 = s("p_z");
        assert_eq!(pd.constraints[0].expr, phi1);
        assert_eq!(pd.constraints[1].expr, phi2);
        // canonical H
        let expected_h = s("p_x")
            .pow(2)
            .scale(&rat(1, 2))
            .add(&s("z").mul(&s("x").pow(2)).scale(&rat(1, 2)));
        assert_eq!(pd.h_canonical, expected_h);
        assert_eq!(pd.velocity_solution[&Sym::even("dx")], s("p_x"));
    }

    #[test]
    fn regular_system_has_no_primaries() {
        let spec = parse_system(OSC).unwrap();
        let pd = primary_constraints(&spec).unwrap();
        assert!(pd.constraints.is_empty());
        let closure = consistency_closure(&spec, 10).unwrap();
        assert!(closure.constraints.is_empty());
    }

    #[test]
    fn toy_closure_fixes_both_multipliers_without_secondaries() {
        let spec = parse_system(TOY).unwrap();
        let closure = consistency_closure(&spec, 10).unwrap();
        assert_eq!(closure.constraints.len(), 2);
        assert!(closure.multipliers_fixed.iter().all(|f| *f));
        assert!(closure.constraints.iter().all(|c| c.origin == Origin::Primary));
    }

    #[test]
    fn toy_constraint_matrix_and_inverse() {
        let spec = parse_system(TOY).unwrap();
        let mut closure = consistency_closure(&spec, 10).unwrap();
        let m = constraint_matrix(&spec, &closure).unwrap();
        assert_eq!(m[0][1], Expr::int(-1));
        assert_eq!(m[1][0], Expr::one());
        let inv = classify_and_invert(&spec, &mut closure).unwrap().unwrap();
        assert_eq!(inv.determinant, Expr::one());
        assert_eq!(inv.adjugate[0][1], Expr::one());
        assert_eq!(inv.adjugate[1][0], Expr::int(-1));
        assert!(closure.constraints.iter().all(|c| c.class == ConstraintClass::Second));
    }

    #[test]
    fn toy_dirac_brackets_match_the_expected_table() {
        let spec = parse_system(TOY).unwrap();
        let mut closure = consistency_closure(&spec, 10).unwrap();
        let inv = classify_and_invert(&spec, &mut closure).unwrap().unwrap();
        let e = Expr::exp(&s("x").neg()).unwrap();
        let db = |a: &Expr, b: &Expr| dirac_bracket(&spec, &closure, &inv, a, b).unwrap();
        assert_eq!(db(&s("x"), &s("p_x")), Expr::one());
        assert_eq!(db(&s("z"), &s("p_x")), e.clone());
        assert_eq!(db(&s("y"), &s("z")), Expr::one());
        assert_eq!(db(&s("y"), &s("p_x")), Expr::zero());
        assert_eq!(db(&s("x"), &s("z")), Expr::zero());
        assert_eq!(db(&s("x"), &s("y")), Expr::zero());
        assert_eq!(db(&s("y"), &s("p_y")), Expr::one());
        // the defining property: constraints have vanishing brackets with
        // everything
        for phi in closure.constraints.iter().map(|c| c.expr.clone()) {
            for v in ["x", "y", "z", "p_x", "p_y", "p_z"] {
                assert!(db(&phi, &s(v)).is_zero(), "{{phi, {v}}} != 0");
            }
            let f = s("x").pow(2).mul(&s("p_y")).add(&e.mul(&s("z")));
            assert!(db(&phi, &f).is_zero());
        }
    }

    #[test]
    fn two_by_two_inverse_with_exponential_entry() {
        // C = [[0, f],[-f, 0]] with f = exp(x): inverse entries are -/+ exp(-x)
        let m = vec![
            vec![Expr::zero(), Expr::exp(&s("x")).unwrap()],
            vec![Expr::exp(&s("x")).unwrap().neg(), Expr::zero()],
        ];
        let det = det_expr(&m);
        assert_eq!(det, Expr::exp(&s("x").scale(&rat(2, 1))).unwrap());
    }

    #[test]
    fn gauge_system_is_rejected() {
        let text = "system gauge\ncoord x even\ncoord y even\nL = (1/2)*(dx - dy)^2\n";
        let spec = parse_system(text).unwrap();
        let mut closure = consistency_closure(&spec, 10).unwrap();
        assert!(!closure.multipliers_fixed.iter().all(|f| *f));
        let r = classify_and_invert(&spec, &mut closure);
        assert!(matches!(r, Err(Error::GaugeFreedom(_))), "got first-class detection");
    }

    #[test]
    fn oracle_brackets_satisfy_jacobi_symbolically() {
        let spec = parse_system(TOY).unwrap();
        let mut closure = consistency_closure(&spec, 10).unwrap();
        let inv = classify_and_invert(&spec, &mut closure).unwrap().unwrap();
        let db = |a: &Expr, b: &Expr| dirac_bracket(&spec, &closure, &inv, a, b).unwrap();
        let vars = ["x", "y", "z", "p_x", "p_y", "p_z"];
        for a in vars {
            for b in vars {
                for c in vars {
                    let j = db(&db(&s(a), &s(b)), &s(c))
                        .add(&db(&db(&s(b), &s(c)), &s(a)))
                        .add(&db(&db(&s(c), &s(a)), &s(b)));
                    assert!(j.is_zero(), "Jacobi violated on ({a},{b},{c}): {j}");
                }
            }
        }
    }

    #[test]
    fn oracle_brackets_are_antisymmetric_and_jacobi_at_points() {
        let spec = parse_system(TOY).unwrap();
        let closure = consistency_closure(&spec, 10).unwrap();
        let nb = numeric_brackets(&spec, &closure).unwrap();
        let mut rng = seeded_rng(42);
        for _ in 0..10 {
            let point = sample_surface_point(&spec, &closure, &mut rng).unwrap();
            let (pairs, cond) = nb.all_pairs_at(&point).unwrap();
            assert!(cond.is_finite());
            let nv = pairs.len();
            for i in 0..nv {
                for j in 0..nv {
                    assert!((pairs[i][j] + pairs[j][i]).abs() < 1e-12);
                }
            }
        }
    }
}
