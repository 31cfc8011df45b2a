//! Order-by-order Taylor solution of the equations of motion at t = 0,
//! detection of algebraic relations among the initial conditions, and the
//! policy that picks the independent initial-condition set.
//!
//! The ansatz `q_w(t) = sum a_w(n) t^n/n!` starts from `a_w(0) = w0`. At each
//! level n the unsolved top coefficients enter linearly: dynamical equations
//! contribute their t^(n-2) coefficient, first-order their t^(n-1), algebraic
//! their t^n, and at level 1 the momentum definitions tie the velocities to
//! the momentum initial conditions. Equations left over with no unknowns are
//! relations among initial conditions (levels 0 and 1) or consistency
//! residuals (higher levels).

use crate::error::{Error, Result};
use crate::linsolve;
use crate::mechanics::{euler_lagrange, momenta, EqClass};
use crate::symexpr::{compose, substitute, Expr, SeriesPoly, Sym};
use crate::sysparse::SystemSpec;
use std::collections::BTreeMap;

/// Per-phase-variable Taylor coefficients at t = 0, as expressions in the
/// (not yet reduced) initial-condition symbols.
#[derive(Clone, Debug)]
pub struct TaylorSolution {
    pub order: usize,
    pub coord_series: Vec<SeriesPoly>,
    pub momentum_series: Vec<SeriesPoly>,
    /// Relations `expr == 0` among IC symbols collected at levels 0 and 1.
    pub relations: Vec<Expr>,
    /// Leftover residuals from levels >= 2; must vanish modulo the relations.
    pub consistency: Vec<Expr>,
}

impl TaylorSolution {
    /// Series bindings for coordinates, velocities, and accelerations.
    pub fn series_bindings(&self, spec: &SystemSpec) -> BTreeMap<Sym, SeriesPoly> {
        let mut bind = BTreeMap::new();
        for (c, s) in spec.coords.iter().zip(&self.coord_series) {
            bind.insert(c.clone(), s.clone());
            bind.insert(SystemSpec::velocity(c), s.derivative());
            if s.order() >= 2 {
                bind.insert(SystemSpec::accel(c), s.derivative().derivative());
            }
        }
        bind
    }

    /// Largest order to which an expression over coordinates/velocities/
    /// accelerations can be composed with this solution.
    pub fn composable_order(&self, spec: &SystemSpec, expr: &Expr) -> usize {
        let mut consumed = 0usize;
        for c in &spec.coords {
            if expr.depends_on(&SystemSpec::accel(c)) {
                consumed = consumed.max(2);
            } else if expr.depends_on(&SystemSpec::velocity(c)) {
                consumed = consumed.max(1);
            }
        }
        self.order - consumed
    }

    /// Compose an expression over phase symbols with the series.
    pub fn compose(&self, spec: &SystemSpec, expr: &Expr, order: usize) -> Result<SeriesPoly> {
        compose(expr, &self.series_bindings(spec), order)
    }

    /// Compose, then rewrite every coefficient in the independent ICs.
    pub fn compose_reduced(
        &self,
        spec: &SystemSpec,
        expr: &Expr,
        ics: &ICConstraintSet,
    ) -> Result<SeriesPoly> {
        let order = self.composable_order(spec, expr);
        let series = self.compose(spec, expr, order)?;
        series_map(&series, |c| ics.apply(c))
    }

    /// The whole solution rewritten in the independent ICs.
    pub fn reduced(&self, ics: &ICConstraintSet) -> Result<TaylorSolution> {
        let coord_series = self
            .coord_series
            .iter()
            .map(|s| series_map(s, |c| ics.apply(c)))
            .collect::<Result<Vec<_>>>()?;
        let momentum_series = self
            .momentum_series
            .iter()
            .map(|s| series_map(s, |c| ics.apply(c)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TaylorSolution {
            order: self.order,
            coord_series,
            momentum_series,
            relations: Vec::new(),
            consistency: self
                .consistency
                .iter()
                .map(|c| ics.apply(c))
                .collect::<Result<Vec<_>>>()?,
        })
    }
}

fn series_map(
    s: &SeriesPoly,
    f: impl Fn(&Expr) -> Result<Expr>,
) -> Result<SeriesPoly> {
    let coeffs = s.coeffs().iter().map(f).collect::<Result<Vec<_>>>()?;
    Ok(SeriesPoly::new(coeffs))
}

fn level_unknown(coord: &Sym, n: usize) -> Sym {
    Sym::new(&format!("_{}_{}", coord.name(), n), coord.parity())
}

/// Solve the classified Euler-Lagrange system as a truncated Taylor series.
pub fn taylor_solve(spec: &SystemSpec, order: usize) -> Result<TaylorSolution> {
    if order < 2 {
        return Err(Error::Invalid(format!("Taylor order must be at least 2, got {order}")));
    }
    let el = euler_lagrange(spec);
    let ms = momenta(spec);
    let n_coords = spec.coords.len();

    let mut coeffs: Vec<Vec<Expr>> = spec
        .coords
        .iter()
        .map(|c| vec![Expr::sym(&SystemSpec::coord_ic(c))])
        .collect();
    let mut relations: Vec<Expr> = Vec::new();
    let mut consistency: Vec<Expr> = Vec::new();

    // level 0: the constant slot of every algebraic equation is a pure IC
    // relation
    {
        let bind: BTreeMap<Sym, SeriesPoly> = spec
            .coords
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), SeriesPoly::new(vec![coeffs[i][0].clone()])))
            .collect();
        for (e, class) in el.equations.iter().zip(&el.classes) {
            if *class == EqClass::Algebraic {
                let r = compose(e, &bind, 0)?.coeff(0).clone();
                if !r.is_zero() {
                    relations.push(r);
                }
            }
        }
    }

    for n in 1..=order {
        let unknowns: Vec<Sym> = spec.coords.iter().map(|c| level_unknown(c, n)).collect();
        // series truncated at this level with the unknown in the top slot
        let mut bind: BTreeMap<Sym, SeriesPoly> = BTreeMap::new();
        for (i, c) in spec.coords.iter().enumerate() {
            let mut cs = coeffs[i].clone();
            cs.push(Expr::sym(&unknowns[i]));
            let s = SeriesPoly::new(cs);
            bind.insert(c.clone(), s.clone());
            bind.insert(SystemSpec::velocity(c), s.derivative());
            if n >= 2 {
                bind.insert(SystemSpec::accel(c), s.derivative().derivative());
            }
        }
        let mut equations: Vec<Expr> = Vec::new();
        for (e, class) in el.equations.iter().zip(&el.classes) {
            let d = class.derivative_order();
            if n >= d {
                equations.push(compose(e, &bind, n - d)?.coeff(n - d).clone());
            }
        }
        if n == 1 {
            for (c, m) in spec.coords.iter().zip(&ms) {
                let p0 = compose(m, &bind, 0)?.coeff(0).clone();
                equations.push(Expr::sym(&SystemSpec::momentum_ic(c)).sub(&p0));
            }
        }

        let sol = linsolve::solve(&equations, &unknowns)?;
        for (i, u) in unknowns.iter().enumerate() {
            let value = match sol.solved.get(u) {
                Some(v) => v.clone(),
                None => {
                    return Err(Error::GaugeFreedom(format!(
                        "Taylor coefficient of `{}` at order {n} is undetermined",
                        spec.coords[i].name()
                    )))
                }
            };
            if unknowns.iter().any(|w| value.depends_on(w)) {
                return Err(Error::GaugeFreedom(format!(
                    "Taylor coefficient of `{}` at order {n} is only fixed up to undetermined functions",
                    spec.coords[i].name()
                )));
            }
            coeffs[i].push(value);
        }
        for r in sol.leftover {
            if n == 1 {
                relations.push(r);
            } else {
                consistency.push(r);
            }
        }
    }

    let coord_series: Vec<SeriesPoly> =
        coeffs.into_iter().map(SeriesPoly::new).collect();
    let mut full_bind: BTreeMap<Sym, SeriesPoly> = BTreeMap::new();
    for (c, s) in spec.coords.iter().zip(&coord_series) {
        full_bind.insert(c.clone(), s.clone());
        full_bind.insert(SystemSpec::velocity(c), s.derivative());
    }
    let momentum_series = ms
        .iter()
        .map(|m| compose(m, &full_bind, order - 1))
        .collect::<Result<Vec<_>>>()?;
    let _ = n_coords;

    Ok(TaylorSolution { order, coord_series, momentum_series, relations, consistency })
}

/// Relations `dependent IC = expr(independent ICs)` plus the surviving
/// independent list.
#[derive(Clone, Debug)]
pub struct ICConstraintSet {
    /// Eliminations in the order they were resolved, right-hand sides fully
    /// reduced to independent ICs.
    pub eliminated: Vec<(Sym, Expr)>,
    pub independent: Vec<Sym>,
    pub warnings: Vec<String>,
}

impl ICConstraintSet {
    pub fn empty(spec: &SystemSpec) -> Self {
        ICConstraintSet { eliminated: Vec::new(), independent: spec.phase_ics(), warnings: Vec::new() }
    }

    pub fn map(&self) -> BTreeMap<Sym, Expr> {
        self.eliminated.iter().cloned().collect()
    }

    /// Rewrite an expression in the independent ICs.
    pub fn apply(&self, e: &Expr) -> Result<Expr> {
        substitute(e, &self.map())
    }

    pub fn expression_for(&self, ic: &Sym) -> Expr {
        self.map().get(ic).cloned().unwrap_or_else(|| Expr::sym(ic))
    }
}

/// Selection policy for which IC a relation eliminates.
#[derive(Clone, Copy, Debug, Default)]
pub struct Policy {
    /// Prefer eliminating momenta before coordinates (the default).
    pub momenta_first: bool,
}

impl Policy {
    pub fn default_policy() -> Self {
        Policy { momenta_first: true }
    }
}

/// Solve each relation for one IC symbol under the policy; returns the closed
/// elimination map plus the ordered independent list.
pub fn select_independent(
    spec: &SystemSpec,
    relations: &[Expr],
    policy: Policy,
) -> Result<ICConstraintSet> {
    let coord_ics: Vec<Sym> = spec.coords.iter().map(SystemSpec::coord_ic).collect();
    let momentum_ics: Vec<Sym> = spec.coords.iter().map(SystemSpec::momentum_ic).collect();
    let rank = |s: &Sym| -> Option<(usize, usize)> {
        // (kind, declaration index): kind 0 = momentum (preferred), 1 = coord
        if let Some(i) = momentum_ics.iter().position(|m| m == s) {
            return Some(if policy.momenta_first { (0, i) } else { (1, i) });
        }
        coord_ics.iter().position(|c| c == s).map(|i| (1, i))
    };

    let mut eliminated: Vec<(Sym, Expr)> = Vec::new();
    let mut warnings: Vec<String> = Vec::new();
    let mut map: BTreeMap<Sym, Expr> = BTreeMap::new();

    for raw in relations {
        let r = substitute(raw, &map)?;
        if r.is_zero() {
            warnings.push(format!("relation `{raw}` is implied by earlier relations"));
            continue;
        }
        if r.as_complex_rational().is_some() {
            return Err(Error::Inconsistent(format!(
                "initial conditions satisfy no assignment: `{r}` = 0"
            )));
        }
        // candidates: IC symbols present in the relation, ranked by policy
        let mut candidates: Vec<(usize, usize, Sym)> = r
            .symbols()
            .into_iter()
            .filter_map(|s| rank(&s).map(|(k, i)| (k, i, s)))
            .collect();
        // highest declaration index first within each kind
        candidates.sort_by(|a, b| a.0.cmp(&b.0).then(b.1.cmp(&a.1)));
        let mut chosen: Option<(Sym, Expr)> = None;
        let mut fell_back = false;
        for (rank_idx, (_, _, cand)) in candidates.iter().enumerate() {
            let (coefs, rest) = match linsolve::linear_decompose(&r, std::slice::from_ref(cand)) {
                Ok(v) => v,
                Err(_) => {
                    fell_back = true;
                    continue;
                }
            };
            let Some((_, coef)) = coefs.first() else {
                fell_back = true;
                continue;
            };
            let Some(inv) = coef.invert_monomial() else {
                fell_back = true;
                continue;
            };
            let expr = inv.neg().mul(&rest);
            if fell_back && rank_idx > 0 {
                warnings.push(format!(
                    "relation `{r}`: preferred candidate not isolatable, eliminating `{}` instead",
                    cand.name()
                ));
            }
            chosen = Some((cand.clone(), expr));
            break;
        }
        let Some((target, expr)) = chosen else {
            return Err(Error::UnsolvableConstraint(format!("{r} = 0")));
        };
        map.insert(target.clone(), expr.clone());
        eliminated.push((target, expr));
    }

    // close the map: earlier right-hand sides may mention later-eliminated ICs
    for _ in 0..eliminated.len() {
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
    for (s, e) in eliminated.iter_mut() {
        *e = map[s].clone();
    }

    let independent: Vec<Sym> = coord_ics
        .iter()
        .chain(momentum_ics.iter())
        .filter(|s| !map.contains_key(s))
        .cloned()
        .collect();
    Ok(ICConstraintSet { eliminated, independent, warnings })
}

/// Collect the IC relations of a Taylor solution and resolve them under the
/// default policy.
pub fn detect_ic_constraints(spec: &SystemSpec, tsol: &TaylorSolution) -> Result<ICConstraintSet> {
    let ics = select_independent(spec, &tsol.relations, Policy::default_policy())?;
    // consistency residuals from higher orders must vanish on the surface
    for r in &tsol.consistency {
        let reduced = ics.apply(r)?;
        if !reduced.is_zero() {
            return Err(Error::Inconsistent(format!(
                "order>1 residual `{reduced}` does not vanish on the constraint surface"
            )));
        }
    }
    Ok(ics)
}
