//! Exact linear elimination over the expression kernel.
//!
//! Equations are expressions required to vanish, linear in a designated set
//! of unknown symbols. Elimination proceeds by repeatedly picking an equation
//! and an unknown whose coefficient is an invertible monomial (rational, `i`,
//! exponential factors), preferring equations with few unknowns and pivots
//! with few monomials, then substituting the solved unknown everywhere.
//!
//! A coefficient that is a sum or carries a symbol power cannot be inverted in
//! the polynomial kernel; asking for such a division is reported as an error
//! instead of silently leaving the exact ring.

use crate::error::{Error, Result};
use crate::symexpr::{differentiate, Expr, Side, Sym};
use std::collections::BTreeMap;

/// Decompose `e` as `sum_j coef_j * u_j + rest` with the unknowns moved out to
/// the left of any odd factors. Fails when an unknown occurs nonlinearly,
/// inside an exponential, or multiplied by another unknown.
pub fn linear_decompose(e: &Expr, unknowns: &[Sym]) -> Result<(Vec<(usize, Expr)>, Expr)> {
    let mut coefs: Vec<(usize, Expr)> = Vec::new();
    let mut rest = e.clone();
    let present = e.symbols();
    for (j, u) in unknowns.iter().enumerate() {
        if !present.contains(u) {
            continue;
        }
        if !rest.depends_on(u) {
            continue;
        }
        // left-coefficient via the graded derivative: for e linear in u with u
        // moved to the left, d^L/du e recovers the coefficient... but the
        // coefficient must multiply from the LEFT of u, so use the right
        // derivative form instead: e = coef * u + rest  =>  coef = (e) d^R/du.
        let coef = differentiate(&rest, u, Side::Right);
        let reconstructed = coef.mul(&Expr::sym(u));
        rest = rest.sub(&reconstructed);
        if rest.depends_on(u) {
            return Err(Error::NonlinearSystem(format!(
                "unknown `{}` occurs nonlinearly in `{}`",
                u.name(),
                e
            )));
        }
        if coef.depends_on(u) {
            return Err(Error::NonlinearSystem(format!(
                "coefficient of `{}` depends on an unknown in `{}`",
                u.name(),
                e
            )));
        }
        for v in unknowns {
            if coef.depends_on(v) {
                return Err(Error::NonlinearSystem(format!(
                    "unknowns `{}` and `{}` multiply each other in `{}`",
                    u.name(),
                    v.name(),
                    e
                )));
            }
        }
        if !coef.is_zero() {
            coefs.push((j, coef));
        }
    }
    Ok((coefs, rest))
}

/// Result of an exact elimination pass.
#[derive(Clone, Debug)]
pub struct Solution {
    /// Solved unknowns, fully back-substituted (no unknown appears in any
    /// right-hand side).
    pub solved: BTreeMap<Sym, Expr>,
    /// Unknowns no equation could pin.
    pub unresolved: Vec<Sym>,
    /// Equations left over once all unknowns were eliminated; they involve
    /// only parameters of the system and must be interpreted by the caller
    /// (constraints at low order, consistency residuals elsewhere).
    pub leftover: Vec<Expr>,
}

#[derive(Clone)]
struct Row {
    coefs: Vec<(usize, Expr)>,
    rest: Expr,
}

/// Solve `equations == 0` for `unknowns` by exact elimination.
///
/// Rows update incrementally when a pivot is eliminated (only rows that
/// contain the pivot are touched, via the pivot row's own linear structure),
/// which keeps large sparse systems cheap.
#[allow(clippy::type_complexity)]
pub fn solve(equations: &[Expr], unknowns: &[Sym]) -> Result<Solution> {
    let mut rows: Vec<Row> = Vec::new();
    for e in equations {
        let (coefs, rest) = linear_decompose(e, unknowns)?;
        if coefs.is_empty() && rest.is_zero() {
            continue;
        }
        rows.push(Row { coefs, rest });
    }

    // occurrence index: unknown -> rows that currently mention it
    let mut occurs: Vec<Vec<usize>> = vec![Vec::new(); unknowns.len()];
    for (r, row) in rows.iter().enumerate() {
        for (j, _) in &row.coefs {
            occurs[*j].push(r);
        }
    }

    let mut solved_raw: Vec<(usize, Vec<(usize, Expr)>, Expr)> = Vec::new();
    let mut active: Vec<bool> = vec![true; rows.len()];
    let mut pinned: Vec<bool> = vec![false; unknowns.len()];

    loop {
        // candidate pivot: active row, unknown with invertible coefficient;
        // prefer rows with fewest unknowns, then pivots with fewest monomials.
        let mut best: Option<(usize, usize, Expr, usize, usize)> = None;
        for (r, row) in rows.iter().enumerate() {
            if !active[r] || row.coefs.is_empty() {
                continue;
            }
            for (j, coef) in &row.coefs {
                if pinned[*j] {
                    continue;
                }
                if let Some(inv) = coef.invert_monomial() {
                    let rank = (row.coefs.len(), coef.num_terms());
                    let better = match &best {
                        None => true,
                        Some((_, _, _, n_unknowns, n_terms)) => rank < (*n_unknowns, *n_terms),
                    };
                    if better {
                        best = Some((r, *j, inv, row.coefs.len(), coef.num_terms()));
                    }
                }
            }
        }
        let Some((r, j, inv, _, _)) = best else {
            // no invertible pivot available: either done, or genuinely stuck
            if let Some(row) = rows
                .iter()
                .enumerate()
                .find(|(r, row)| active[*r] && !row.coefs.is_empty())
                .map(|(_, row)| row)
            {
                let (_, worst) = &row.coefs[0];
                return Err(Error::PivotNotInvertible(worst.to_string()));
            }
            break;
        };

        // u_j = -inv * rest - inv * sum_{k != j} coef_k u_k
        let row = rows[r].clone();
        let neg_inv = inv.neg();
        let vrest = neg_inv.mul(&row.rest);
        let vcoefs: Vec<(usize, Expr)> = row
            .coefs
            .iter()
            .filter(|(k, _)| *k != j)
            .map(|(k, c)| (*k, neg_inv.mul(c)))
            .collect();
        active[r] = false;
        pinned[j] = true;
        solved_raw.push((j, vcoefs.clone(), vrest.clone()));

        // fold the pivot's value into every other row mentioning it
        let touched = std::mem::take(&mut occurs[j]);
        for rr in touched {
            if !active[rr] || rr == r {
                continue;
            }
            let Some(pos) = rows[rr].coefs.iter().position(|(k, _)| *k == j) else {
                continue;
            };
            let (_, cu) = rows[rr].coefs.remove(pos);
            let row_mut = &mut rows[rr];
            row_mut.rest = row_mut.rest.add(&cu.mul(&vrest));
            for (k, vc) in &vcoefs {
                let add = cu.mul(vc);
                if add.is_zero() {
                    continue;
                }
                match row_mut.coefs.iter_mut().find(|(kk, _)| kk == k) {
                    Some((_, existing)) => {
                        *existing = existing.add(&add);
                    }
                    None => {
                        row_mut.coefs.push((*k, add));
                        occurs[*k].push(rr);
                    }
                }
            }
            row_mut.coefs.retain(|(_, c)| !c.is_zero());
            if row_mut.coefs.is_empty() && row_mut.rest.is_zero() {
                active[rr] = false;
            }
        }
    }

    // back-substitute in reverse pivot order so every rhs is unknown-free
    let mut solved: BTreeMap<Sym, Expr> = BTreeMap::new();
    for (j, vcoefs, vrest) in solved_raw.into_iter().rev() {
        let mut value = vrest;
        for (k, c) in vcoefs {
            let uk = solved.get(&unknowns[k]).cloned().unwrap_or_else(|| Expr::sym(&unknowns[k]));
            value = value.add(&c.mul(&uk));
        }
        solved.insert(unknowns[j].clone(), value);
    }

    let mut leftover = Vec::new();
    for (r, row) in rows.iter().enumerate() {
        if active[r] && row.coefs.is_empty() && !row.rest.is_zero() {
            leftover.push(row.rest.clone());
        }
    }
    let unresolved = unknowns
        .iter()
        .enumerate()
        .filter(|(j, u)| !pinned[*j] && equations.iter().any(|e| e.depends_on(u)))
        .map(|(_, u)| u.clone())
        .collect();

    Ok(Solution { solved, unresolved, leftover })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::rat;

    fn ev(n: &str) -> Sym {
        Sym::even(n)
    }

    #[test]
    fn solves_triangular_system() {
        // u + v - 3 = 0 ; 2v - 4 = 0
        let u = ev("u");
        let v = ev("v");
        let e1 = Expr::sym(&u).add(&Expr::sym(&v)).sub(&Expr::int(3));
        let e2 = Expr::sym(&v).scale(&rat(2, 1)).sub(&Expr::int(4));
        let sol = solve(&[e1, e2], &[u.clone(), v.clone()]).unwrap();
        assert_eq!(sol.solved[&v], Expr::int(2));
        assert_eq!(sol.solved[&u], Expr::int(1));
        assert!(sol.leftover.is_empty());
        assert!(sol.unresolved.is_empty());
    }

    #[test]
    fn exponential_pivot_inverts() {
        // exp(-x) * u - 5 = 0  =>  u = 5 exp(x)
        let u = ev("u");
        let x = ev("x");
        let piv = Expr::exp(&Expr::sym(&x).neg()).unwrap();
        let e = piv.mul(&Expr::sym(&u)).sub(&Expr::int(5));
        let sol = solve(&[e], std::slice::from_ref(&u)).unwrap();
        assert_eq!(
            sol.solved[&u],
            Expr::exp(&Expr::sym(&x)).unwrap().scale(&rat(5, 1))
        );
    }

    #[test]
    fn complex_pivot_inverts() {
        // i * u + 1 = 0 => u = -1/i = i
        let u = ev("u");
        let e = Expr::imaginary().mul(&Expr::sym(&u)).add(&Expr::one());
        let sol = solve(&[e], std::slice::from_ref(&u)).unwrap();
        assert_eq!(sol.solved[&u], Expr::imaginary());
    }

    #[test]
    fn odd_unknown_with_even_coefficient() {
        // 2u - th = 0 with u, th odd  =>  u = th/2
        let u = Sym::odd("u");
        let th = Sym::odd("th");
        let e = Expr::sym(&u).scale(&rat(2, 1)).sub(&Expr::sym(&th));
        let sol = solve(&[e], std::slice::from_ref(&u)).unwrap();
        assert_eq!(sol.solved[&u], Expr::sym(&th).scale(&rat(1, 2)));
    }

    #[test]
    fn leftover_and_unresolved_are_reported() {
        let u = ev("u");
        let w = ev("w");
        // u - 1 = 0, plus a pure relation x - 2 = 0, and w never pinned
        let x = ev("x");
        let e1 = Expr::sym(&u).sub(&Expr::int(1));
        let e2 = Expr::sym(&x).sub(&Expr::int(2));
        let e3 = Expr::sym(&w).sub(&Expr::sym(&w)); // trivially zero
        let sol = solve(&[e1, e2, e3], &[u, w.clone()]).unwrap();
        assert_eq!(sol.leftover.len(), 1);
        assert!(sol.unresolved.is_empty(), "w never occurs, so it is not unresolved");
    }

    #[test]
    fn underdetermined_unknowns_surface() {
        // u + w = 1: one equation, two unknowns
        let u = ev("u");
        let w = ev("w");
        let e = Expr::sym(&u).add(&Expr::sym(&w)).sub(&Expr::int(1));
        let sol = solve(&[e], &[u, w]).unwrap();
        assert_eq!(sol.solved.len() + sol.unresolved.len(), 2);
        assert_eq!(sol.unresolved.len(), 1);
    }

    #[test]
    fn nonlinear_is_rejected() {
        let u = ev("u");
        let e = Expr::sym(&u).pow(2).sub(&Expr::int(1));
        assert!(matches!(solve(&[e], &[u]), Err(Error::NonlinearSystem(_))));
    }

    #[test]
    fn sum_pivot_is_rejected() {
        // (x + 1) u = 1 cannot be solved in the polynomial kernel
        let u = ev("u");
        let x = ev("x");
        let e = Expr::sym(&x).add(&Expr::one()).mul(&Expr::sym(&u)).sub(&Expr::one());
        assert!(matches!(solve(&[e], &[u]), Err(Error::PivotNotInvertible(_))));
    }
}
