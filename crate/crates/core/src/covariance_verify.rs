//! Verification of a derived bracket table: the order-by-order time
//! covariance of the brackets, the (graded) Jacobi identity, equivalence of
//! the bracket flow with the Euler-Lagrange equations, and direct numeric
//! trajectory comparison.

use crate::bracket_solver::BracketTable;
use crate::error::{Error, Result};
use crate::initial_instant::{ICConstraintSet, TaylorSolution};
use crate::linsolve;
use crate::mechanics::{euler_lagrange, momenta, time_derivative, EqClass};
use crate::numeric::{rk4, sample_point, seeded_rng};
use crate::symexpr::{compose, eval_numeric, rename, Expr, SeriesPoly, Sym};
use crate::sysparse::SystemSpec;
use num_bigint::BigInt;
use num_rational::BigRational;
use std::collections::BTreeMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped,
}

/// Residual magnitude of a check: exact symbolic zero, a numeric bound, or a
/// symbolic non-zero (always a failure).
#[derive(Clone, Debug, PartialEq)]
pub enum Residual {
    SymbolicZero,
    Numeric(f64),
    SymbolicNonZero(String),
}

impl Residual {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Residual::SymbolicZero => Some(0.0),
            Residual::Numeric(x) => Some(*x),
            Residual::SymbolicNonZero(_) => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub status: CheckStatus,
    pub residual: Residual,
    pub params: Vec<(String, String)>,
    pub detail: Option<String>,
}

/// Aggregate of all enabled checks; passes only if every enabled check does.
#[derive(Clone, Debug, Default)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }
}

/// Apply the Liouville operator `G f = {f, H}` n times to an expression over
/// the initial-condition symbols.
pub fn liouville_apply(table: &BracketTable, h: &Expr, f: &Expr, n: usize) -> Result<Expr> {
    let mut g = f.clone();
    for _ in 0..n {
        g = table.bracket_of_ic(&g, h)?;
    }
    Ok(g)
}

fn binomial(n: usize, k: usize) -> BigRational {
    let mut num = BigInt::from(1);
    let mut den = BigInt::from(1);
    for i in 0..k {
        num *= BigInt::from(n - i);
        den *= BigInt::from(i + 1);
    }
    BigRational::new(num, den)
}

/// Check that `{xi_I(t), xi_J(t)}` and `Theta_IJ(xi(t))` agree coefficient by
/// coefficient through order K-2, for every phase-variable pair.
pub fn covariance_check(
    spec: &SystemSpec,
    table: &BracketTable,
    h: &Expr,
    tsol_reduced: &TaylorSolution,
    ics: &ICConstraintSet,
    order: usize,
) -> CheckResult {
    let params = vec![("order".to_string(), order.to_string())];
    match covariance_residuals(spec, table, h, tsol_reduced, ics, order) {
        Ok(None) => CheckResult {
            name: "covariance".into(),
            status: CheckStatus::Pass,
            residual: Residual::SymbolicZero,
            params,
            detail: None,
        },
        Ok(Some(msg)) => CheckResult {
            name: "covariance".into(),
            status: CheckStatus::Fail,
            residual: Residual::SymbolicNonZero(msg.clone()),
            params,
            detail: Some(msg),
        },
        Err(e) => CheckResult {
            name: "covariance".into(),
            status: CheckStatus::Fail,
            residual: Residual::SymbolicNonZero(e.to_string()),
            params,
            detail: Some(e.to_string()),
        },
    }
}

fn covariance_residuals(
    spec: &SystemSpec,
    table: &BracketTable,
    h: &Expr,
    tsol_reduced: &TaylorSolution,
    ics: &ICConstraintSet,
    order: usize,
) -> Result<Option<String>> {
    let k_max = order.saturating_sub(2);
    let phase_vars = spec.phase_vars();
    let phase_ics = spec.phase_ics();
    let n = spec.coords.len();

    // Liouville towers G^s xi for every phase variable
    let mut towers: Vec<Vec<Expr>> = Vec::with_capacity(phase_vars.len());
    for ic in &phase_ics {
        let mut tower = vec![ics.expression_for(ic)];
        for s in 0..k_max {
            let next = table.bracket_of_ic(&tower[s], h)?;
            tower.push(next);
        }
        towers.push(tower);
    }

    // series bindings for the right side: every phase variable by its series
    let mut bind: BTreeMap<Sym, SeriesPoly> = BTreeMap::new();
    for (i, v) in phase_vars.iter().enumerate() {
        let s = if i < n {
            tsol_reduced.coord_series[i].clone()
        } else {
            tsol_reduced.momentum_series[i - n].clone()
        };
        bind.insert(v.clone(), s);
    }

    for i in 0..phase_vars.len() {
        for j in i..phase_vars.len() {
            if i == j && !phase_vars[i].is_odd() {
                continue;
            }
            let theta = table
                .entry(&phase_vars[i], &phase_vars[j])
                .ok_or_else(|| Error::UnboundSymbol(phase_vars[i].name().into()))?;
            let rhs = compose(&theta, &bind, k_max)?;
            for k in 0..=k_max {
                let mut lhs = Expr::zero();
                for s in 0..=k {
                    let b = table.bracket_of_ic(&towers[i][s], &towers[j][k - s])?;
                    lhs = lhs.add(&b.scale(&binomial(k, s)));
                }
                let diff = lhs.sub(rhs.coeff(k));
                if !diff.is_zero() {
                    return Ok(Some(format!(
                        "pair ({},{}) at order {}: residual {}",
                        phase_vars[i].name(),
                        phase_vars[j].name(),
                        k,
                        diff
                    )));
                }
            }
        }
    }
    Ok(None)
}

/// Numeric (even tables) or symbolic (graded tables) Jacobi identity check
/// over all variable triples.
pub fn jacobi_check(
    table: &BracketTable,
    ics: &ICConstraintSet,
    samples: usize,
    seed: u64,
    tol: f64,
) -> CheckResult {
    let params = vec![
        ("samples".to_string(), samples.to_string()),
        ("seed".to_string(), seed.to_string()),
        ("tol".to_string(), format!("{tol:e}")),
    ];
    match jacobi_residual(table, ics, samples, seed) {
        Ok(Residual::SymbolicZero) => CheckResult {
            name: "jacobi".into(),
            status: CheckStatus::Pass,
            residual: Residual::SymbolicZero,
            params,
            detail: None,
        },
        Ok(Residual::Numeric(r)) => CheckResult {
            name: "jacobi".into(),
            status: if r < tol { CheckStatus::Pass } else { CheckStatus::Fail },
            residual: Residual::Numeric(r),
            params,
            detail: None,
        },
        Ok(Residual::SymbolicNonZero(msg)) | Err(Error::Invalid(msg)) => CheckResult {
            name: "jacobi".into(),
            status: CheckStatus::Fail,
            residual: Residual::SymbolicNonZero(msg.clone()),
            params,
            detail: Some(msg),
        },
        Err(e) => CheckResult {
            name: "jacobi".into(),
            status: CheckStatus::Fail,
            residual: Residual::SymbolicNonZero(e.to_string()),
            params,
            detail: Some(e.to_string()),
        },
    }
}

fn graded_jacobi_sign(a: &Sym, b: &Sym) -> i64 {
    if a.is_odd() && b.is_odd() {
        -1
    } else {
        1
    }
}

fn jacobi_residual(
    table: &BracketTable,
    ics: &ICConstraintSet,
    samples: usize,
    seed: u64,
) -> Result<Residual> {
    let vars = table.phase_vars().to_vec();
    let graded = vars.iter().any(Sym::is_odd)
        || vars
            .iter()
            .flat_map(|a| vars.iter().map(move |b| (a, b)))
            .filter_map(|(a, b)| table.entry(a, b))
            .any(|e| e.contains_imaginary());

    let mut nonzero: Vec<Expr> = Vec::new();
    let nv = vars.len();
    for i in 0..nv {
        for j in i..nv {
            for k in j..nv {
                let (a, b, c) = (&vars[i], &vars[j], &vars[k]);
                // constant entries make every term of the cycle vanish
                let inner_ab = table.entry(a, b).unwrap_or_else(Expr::zero);
                let inner_bc = table.entry(b, c).unwrap_or_else(Expr::zero);
                let inner_ca = table.entry(c, a).unwrap_or_else(Expr::zero);
                if [&inner_ab, &inner_bc, &inner_ca]
                    .iter()
                    .all(|e| e.symbols().is_empty())
                {
                    continue;
                }
                // graded cyclic sum:
                // (-1)^{|a||c|}{a,{b,c}} + (-1)^{|b||a|}{b,{c,a}} + (-1)^{|c||b|}{c,{a,b}}
                let t1 = table
                    .bracket_of(&Expr::sym(a), &inner_bc)?
                    .scale(&BigRational::from_integer(BigInt::from(graded_jacobi_sign(a, c))));
                let t2 = table
                    .bracket_of(&Expr::sym(b), &inner_ca)?
                    .scale(&BigRational::from_integer(BigInt::from(graded_jacobi_sign(b, a))));
                let t3 = table
                    .bracket_of(&Expr::sym(c), &inner_ab)?
                    .scale(&BigRational::from_integer(BigInt::from(graded_jacobi_sign(c, b))));
                let cycle = t1.add(&t2).add(&t3);
                if !cycle.is_zero() {
                    if graded {
                        return Ok(Residual::SymbolicNonZero(format!(
                            "triple ({},{},{}): {}",
                            a.name(),
                            b.name(),
                            c.name(),
                            cycle
                        )));
                    }
                    nonzero.push(cycle);
                }
            }
        }
    }
    if graded || nonzero.is_empty() {
        return Ok(Residual::SymbolicZero);
    }

    // evaluate surviving cycles on constraint-consistent random phase points
    let mut rng = seeded_rng(seed);
    let sampling: Vec<(Sym, bool)> = ics.independent.iter().map(|s| (s.clone(), false)).collect();
    let mut max_resid = 0.0f64;
    for _ in 0..samples {
        let point = phase_point(table, ics, &sample_point(&mut rng, &sampling))?;
        for cyc in &nonzero {
            max_resid = max_resid.max(eval_numeric(cyc, &point)?.abs());
        }
    }
    Ok(Residual::Numeric(max_resid))
}

/// Numeric phase-space point from numeric independent ICs: dependent ICs go
/// through the elimination map, so the constraints hold exactly.
pub fn phase_point(
    table: &BracketTable,
    ics: &ICConstraintSet,
    independent_values: &BTreeMap<Sym, f64>,
) -> Result<BTreeMap<Sym, f64>> {
    let mut out = BTreeMap::new();
    let ic_map = ics.map();
    for (v, ic) in table.phase_vars().iter().zip(table.phase_ic_syms()) {
        let expr = ic_map.get(ic).cloned().unwrap_or_else(|| Expr::sym(ic));
        out.insert(v.clone(), eval_numeric(&expr, independent_values)?);
    }
    Ok(out)
}

/// The paper's own validity criterion: the Hamilton equations obtained from
/// the table must reproduce the order-1 Taylor coefficients symbolically.
pub fn hamilton_equivalence_check(
    spec: &SystemSpec,
    table: &BracketTable,
    h: &Expr,
    tsol_reduced: &TaylorSolution,
    ics: &ICConstraintSet,
) -> CheckResult {
    let phase_ics = spec.phase_ics();
    let n = spec.coords.len();
    let mut failing: Option<String> = None;
    for (i, v) in spec.phase_vars().iter().enumerate() {
        let xi = ics.expression_for(&phase_ics[i]);
        let lhs = match table.bracket_of_ic(&xi, h) {
            Ok(e) => e,
            Err(e) => {
                failing = Some(e.to_string());
                break;
            }
        };
        let rhs = if i < n {
            tsol_reduced.coord_series[i].coeff(1).clone()
        } else {
            tsol_reduced.momentum_series[i - n].coeff(1).clone()
        };
        if lhs != rhs {
            failing = Some(format!(
                "variable `{}`: {{xi,H}} = {} but the series gives {}",
                v.name(),
                lhs,
                rhs
            ));
            break;
        }
    }
    match failing {
        None => CheckResult {
            name: "hamilton_equivalence".into(),
            status: CheckStatus::Pass,
            residual: Residual::SymbolicZero,
            params: Vec::new(),
            detail: None,
        },
        Some(msg) => CheckResult {
            name: "hamilton_equivalence".into(),
            status: CheckStatus::Fail,
            residual: Residual::SymbolicNonZero(msg.clone()),
            params: Vec::new(),
            detail: Some(msg),
        },
    }
}

// ---------------------------------------------------------------------------
// Trajectory comparison
// ---------------------------------------------------------------------------

/// The Euler-Lagrange system reduced to first order on the full `(q, q̇)`
/// state: first-order equations are differentiated once and algebraic ones
/// twice (index reduction), then the combined system is solved for every
/// acceleration. The flow starts exactly on the constraint manifold (the
/// initial velocities come from the solved order-1 Taylor coefficients) and
/// is a genuinely different discretization from the bracket flow.
struct ElFlow {
    state: Vec<Sym>,
    derivs: Vec<Expr>,
    momentum_exprs: Vec<Expr>,
}

fn build_el_flow(spec: &SystemSpec) -> Result<ElFlow> {
    let el = euler_lagrange(spec);
    let ms = momenta(spec);
    let eqs: Vec<Expr> = el
        .equations
        .iter()
        .zip(&el.classes)
        .map(|(e, cl)| match cl {
            EqClass::Dynamical => e.clone(),
            EqClass::FirstOrder => time_derivative(spec, e),
            EqClass::Algebraic => time_derivative(spec, &time_derivative(spec, e)),
        })
        .collect();
    let accs: Vec<Sym> = spec.coords.iter().map(SystemSpec::accel).collect();
    let sol = linsolve::solve(&eqs, &accs)?;

    let mut state: Vec<Sym> = spec.coords.clone();
    state.extend(spec.coords.iter().map(SystemSpec::velocity));
    let mut derivs: Vec<Expr> = spec
        .coords
        .iter()
        .map(|c| Expr::sym(&SystemSpec::velocity(c)))
        .collect();
    for c in &spec.coords {
        let acc = sol
            .solved
            .get(&SystemSpec::accel(c))
            .cloned()
            .ok_or_else(|| {
                Error::GaugeFreedom(format!("acceleration of `{}` undetermined", c.name()))
            })?;
        if accs.iter().any(|a| acc.depends_on(a)) {
            return Err(Error::Invalid(format!(
                "acceleration of `{}` not fully resolved",
                c.name()
            )));
        }
        derivs.push(acc);
    }

    Ok(ElFlow { state, derivs, momentum_exprs: ms })
}

/// Integrate the bracket flow `dxi/dt = {xi, H}` and the reduced
/// Euler-Lagrange system side by side with RK4 and report the maximum
/// deviation across all phase variables over the horizon, plus the energy
/// drift of the bracket flow.
#[allow(clippy::too_many_arguments)]
pub fn trajectory_check(
    spec: &SystemSpec,
    table: &BracketTable,
    h: &Expr,
    tsol_reduced: &TaylorSolution,
    ics: &ICConstraintSet,
    initial: &BTreeMap<Sym, f64>,
    t_end: f64,
    dt: f64,
) -> CheckResult {
    let params = vec![
        ("t_end".to_string(), format!("{t_end}")),
        ("dt".to_string(), format!("{dt}")),
    ];
    match trajectory_deviation(spec, table, h, tsol_reduced, ics, initial, t_end, dt) {
        Ok((dev, drift)) => {
            let mut params = params;
            params.push(("energy_drift".to_string(), format!("{drift:e}")));
            CheckResult {
                name: "trajectory".into(),
                status: if dev.is_finite() { CheckStatus::Pass } else { CheckStatus::Fail },
                residual: Residual::Numeric(dev),
                params,
                detail: None,
            }
        }
        Err(e) => CheckResult {
            name: "trajectory".into(),
            status: CheckStatus::Fail,
            residual: Residual::SymbolicNonZero(e.to_string()),
            params,
            detail: Some(e.to_string()),
        },
    }
}

/// Max deviation between the two flows and the bracket-flow energy drift.
#[allow(clippy::too_many_arguments)]
pub fn trajectory_deviation(
    spec: &SystemSpec,
    table: &BracketTable,
    h: &Expr,
    tsol_reduced: &TaylorSolution,
    ics: &ICConstraintSet,
    initial: &BTreeMap<Sym, f64>,
    t_end: f64,
    dt: f64,
) -> Result<(f64, f64)> {
    let phase_vars = spec.phase_vars();
    let to_phase: BTreeMap<Sym, Sym> = spec
        .phase_ics()
        .into_iter()
        .zip(phase_vars.iter().cloned())
        .collect();
    let h_phase = rename(h, &to_phase);

    // bracket flow over the full phase vector
    let mut bracket_derivs: Vec<Expr> = Vec::with_capacity(phase_vars.len());
    for v in &phase_vars {
        bracket_derivs.push(table.bracket_of(&Expr::sym(v), &h_phase)?);
    }
    let start_phase = phase_point(table, ics, initial)?;
    let b0: Vec<f64> =
        phase_vars.iter().map(|v| start_phase[v]).collect();
    let eval_vec = |exprs: &[Expr], syms: &[Sym], y: &[f64]| -> Result<Vec<f64>> {
        let point: BTreeMap<Sym, f64> = syms.iter().cloned().zip(y.iter().cloned()).collect();
        exprs.iter().map(|e| eval_numeric(e, &point)).collect()
    };
    let pv = phase_vars.clone();
    let bd = bracket_derivs;
    let mut bracket_traj: Vec<Vec<f64>> = Vec::new();
    rk4(
        |y| eval_vec(&bd, &pv, y),
        &b0,
        t_end,
        dt,
        |_, y| bracket_traj.push(y.to_vec()),
    )?;

    // Euler-Lagrange flow on the (q, q̇) state; initial velocities come from
    // the solved order-1 Taylor coefficients, so it starts on the constraint
    // manifold
    let flow = build_el_flow(spec)?;
    let n = spec.coords.len();
    let mut e0: Vec<f64> = Vec::with_capacity(flow.state.len());
    for c in &spec.coords {
        e0.push(eval_numeric(&ics.expression_for(&SystemSpec::coord_ic(c)), initial)?);
    }
    for i in 0..n {
        e0.push(eval_numeric(tsol_reduced.coord_series[i].coeff(1), initial)?);
    }
    let fs = flow.state.clone();
    let fd = flow.derivs.clone();
    let mut el_traj: Vec<Vec<f64>> = Vec::new();
    rk4(
        |y| eval_vec(&fd, &fs, y),
        &e0,
        t_end,
        dt,
        |_, y| el_traj.push(y.to_vec()),
    )?;

    // compare phase vectors step by step
    let mut dev = 0.0f64;
    for (by, ey) in bracket_traj.iter().zip(&el_traj) {
        let st: BTreeMap<Sym, f64> = flow.state.iter().cloned().zip(ey.iter().cloned()).collect();
        for (i, _) in phase_vars.iter().enumerate() {
            let el_val = if i < n {
                ey[i]
            } else {
                eval_numeric(&flow.momentum_exprs[i - n], &st)?
            };
            dev = dev.max((by[i] - el_val).abs());
        }
    }

    // energy drift along the bracket flow
    let h0 = eval_numeric(&h_phase, &phase_map(&phase_vars, &bracket_traj[0]))?;
    let mut drift = 0.0f64;
    for y in &bracket_traj {
        let hv = eval_numeric(&h_phase, &phase_map(&phase_vars, y))?;
        drift = drift.max((hv - h0).abs());
    }
    Ok((dev, drift))
}

fn phase_map(vars: &[Sym], y: &[f64]) -> BTreeMap<Sym, f64> {
    vars.iter().cloned().zip(y.iter().cloned()).collect()
}

/// Sample a constraint-consistent independent IC point for checks that need
/// one and were not given one.
pub fn default_ic_point(ics: &ICConstraintSet, seed: u64) -> BTreeMap<Sym, f64> {
    let mut rng = seeded_rng(seed);
    let sampling: Vec<(Sym, bool)> = ics.independent.iter().map(|s| (s.clone(), false)).collect();
    sample_point(&mut rng, &sampling)
}
