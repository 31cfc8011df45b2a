//! Property tests over randomly generated expressions, systems, and tables.

use dbrack_core::bracket_solver::SolverConfig;
use dbrack_core::initial_instant::{detect_ic_constraints, taylor_solve};
use dbrack_core::mechanics::hamiltonian_at_initial;
use dbrack_core::symexpr::{
    compose, differentiate, eval_numeric, rat, substitute, Expr, Parity, SeriesPoly, Side, Sym,
};
use dbrack_core::sysparse::{emit_system, parse_system, SystemSpec};
use proptest::prelude::*;
use std::collections::BTreeMap;

const EVEN_NAMES: [&str; 4] = ["x", "y", "z", "w"];
const ODD_NAMES: [&str; 3] = ["u", "v", "s"];

fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-4i64..=4).prop_map(Expr::int),
        (0usize..EVEN_NAMES.len()).prop_map(|i| Expr::sym(&Sym::even(EVEN_NAMES[i]))),
        (0usize..ODD_NAMES.len()).prop_map(|i| Expr::sym(&Sym::odd(ODD_NAMES[i]))),
        Just(Expr::imaginary()),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(&b)),
            inner.clone().prop_map(|a| a.neg()),
            (inner.clone(), 0u32..3).prop_map(|(a, n)| a.pow(n)),
            // exponentials of even polynomials only
            (0usize..EVEN_NAMES.len(), -2i64..=2).prop_map(|(i, c)| {
                Expr::exp(&Expr::sym(&Sym::even(EVEN_NAMES[i])).scale(&rat(c, 1))).unwrap()
            }),
        ]
    })
}

fn arb_even_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-4i64..=4).prop_map(Expr::int),
        (0usize..EVEN_NAMES.len()).prop_map(|i| Expr::sym(&Sym::even(EVEN_NAMES[i]))),
    ];
    leaf.prop_recursive(3, 16, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.add(&b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| a.mul(&b)),
            (inner.clone(), 0u32..3).prop_map(|(a, n)| a.pow(n)),
        ]
    })
}

fn monomial(e: &Expr) -> Option<Expr> {
    e.terms().first().map(|t| {
        let (c, unit) = t.split_complex_coeff();
        c.mul(&unit)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn canonical_form_is_a_fixed_point(e in arb_expr()) {
        // re-normalizing through a rebuild is the identity
        let rebuilt = e.add(&Expr::zero()).mul(&Expr::one());
        prop_assert_eq!(rebuilt, e);
    }

    #[test]
    fn graded_commutativity_of_monomials(a in arb_expr(), b in arb_expr()) {
        let (Some(ma), Some(mb)) = (monomial(&a), monomial(&b)) else {
            return Ok(());
        };
        let ab = ma.mul(&mb);
        let ba = mb.mul(&ma);
        let odd_a = matches!(ma.parity_class(), dbrack_core::symexpr::ParityClass::Odd);
        let odd_b = matches!(mb.parity_class(), dbrack_core::symexpr::ParityClass::Odd);
        if odd_a && odd_b {
            prop_assert_eq!(ab, ba.neg());
        } else {
            prop_assert_eq!(ab, ba);
        }
    }

    #[test]
    fn differentiation_is_linear_and_leibniz(f in arb_expr(), g in arb_expr(), si in 0usize..7) {
        let s = if si < 4 {
            Sym::even(EVEN_NAMES[si])
        } else {
            Sym::odd(ODD_NAMES[si - 4])
        };
        // d(f+g) = df + dg
        let sum = differentiate(&f.add(&g), &s, Side::Left);
        prop_assert_eq!(sum, differentiate(&f, &s, Side::Left).add(&differentiate(&g, &s, Side::Left)));
        // left product rule with the grading of f and s:
        // d(fg) = (df)g + (-1)^{|f||s|} f(dg) for homogeneous f
        let fp = f.parity_class();
        if matches!(fp, dbrack_core::symexpr::ParityClass::Mixed) {
            return Ok(());
        }
        let dfg = differentiate(&f.mul(&g), &s, Side::Left);
        let df_g = differentiate(&f, &s, Side::Left).mul(&g);
        let f_dg = f.mul(&differentiate(&g, &s, Side::Left));
        let sign_flip = s.parity() == Parity::Odd
            && matches!(fp, dbrack_core::symexpr::ParityClass::Odd);
        let expected = if sign_flip { df_g.sub(&f_dg) } else { df_g.add(&f_dg) };
        prop_assert_eq!(dfg, expected);
    }

    #[test]
    fn evaluation_commutes_with_substitution(e in arb_even_expr(), vals in proptest::collection::vec(-2.0f64..2.0, 4)) {
        // substituting rational constants then evaluating equals evaluating
        // with the same bindings directly (within 1e-12 relative)
        let mut num = BTreeMap::new();
        let mut sym_bind = BTreeMap::new();
        for (name, v) in EVEN_NAMES.iter().zip(&vals) {
            // snap the f64 to an exact rational so both paths see the same value
            let r = rat((v * 64.0).round() as i64, 64);
            let exact = r.to_owned();
            num.insert(Sym::even(name), eval_numeric(&Expr::rational(exact.clone()), &BTreeMap::new()).unwrap());
            sym_bind.insert(Sym::even(name), Expr::rational(exact));
        }
        if e.contains_imaginary() {
            return Ok(());
        }
        let direct = eval_numeric(&e, &num).unwrap();
        let substituted = substitute(&e, &sym_bind).unwrap();
        let via_subst = eval_numeric(&substituted, &BTreeMap::new()).unwrap();
        prop_assert!((direct - via_subst).abs() <= 1e-12 * (1.0 + direct.abs().max(via_subst.abs())));
    }

    #[test]
    fn series_composition_matches_symbolic_expansion(e in arb_even_expr()) {
        // compose f with x(t) = a + b t and compare the order-1 slot with the
        // chain rule
        let a = Sym::even("a0");
        let b = Sym::even("b0");
        let series = SeriesPoly::new(vec![Expr::sym(&a), Expr::sym(&b), Expr::zero()]);
        let mut bind = BTreeMap::new();
        bind.insert(Sym::even("x"), series);
        let got = compose(&e, &bind, 1).unwrap();
        let mut sub0 = BTreeMap::new();
        sub0.insert(Sym::even("x"), Expr::sym(&a));
        let expected0 = substitute(&e, &sub0).unwrap();
        prop_assert_eq!(got.coeff(0).clone(), expected0);
        let dfdx = differentiate(&e, &Sym::even("x"), Side::Left);
        let expected1 = substitute(&dfdx, &sub0).unwrap().mul(&Expr::sym(&b));
        prop_assert_eq!(got.coeff(1).clone(), expected1);
    }
}

// ---------------------------------------------------------------------------
// Parser properties
// ---------------------------------------------------------------------------

fn arb_spec() -> impl Strategy<Value = SystemSpec> {
    (
        proptest::collection::vec((0usize..26, any::<bool>()), 1..4),
        any::<bool>(),
    )
        .prop_map(|(coord_seeds, with_param)| {
            let mut coords: Vec<Sym> = Vec::new();
            for (i, odd) in coord_seeds {
                let name = format!("q{}", (b'a' + i as u8) as char);
                if coords.iter().any(|c| c.name() == name) {
                    continue;
                }
                coords.push(Sym::new(&name, if odd { Parity::Odd } else { Parity::Even }));
            }
            let params = if with_param { vec![(Sym::even("k"), true)] } else { vec![] };
            // Lagrangian: sum of squared velocities of even coords, plus
            // conjugate-pair terms for odd ones to keep parities even
            let mut lag = Expr::zero();
            let mut prev_odd: Option<Sym> = None;
            for c in &coords {
                let v = Expr::sym(&SystemSpec::velocity(c));
                match c.parity() {
                    Parity::Even => {
                        lag = lag.add(&v.pow(2).scale(&rat(1, 2)));
                    }
                    Parity::Odd => {
                        if let Some(p) = prev_odd.take() {
                            lag = lag.add(&Expr::imaginary().mul(&Expr::sym(&p)).mul(&v));
                        } else {
                            prev_odd = Some(c.clone());
                        }
                    }
                }
            }
            if lag.is_zero() {
                lag = Expr::sym(&SystemSpec::velocity(&coords[0]))
                    .mul(&Expr::sym(&coords[0]));
            }
            SystemSpec {
                name: "generated".into(),
                params,
                coords,
                lagrangian: lag,
                metadata: vec![("origin".into(), "property".into())],
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn emit_then_parse_is_identity(spec in arb_spec()) {
        let text = emit_system(&spec);
        let back = parse_system(&text).unwrap();
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn parser_never_panics(text in "[ -~\n]{0,160}") {
        let _ = parse_system(&text);
    }

    #[test]
    fn expression_display_reparses(e in arb_even_expr()) {
        // wrap into a one-coordinate system whose Lagrangian is the expression
        let mut bind = BTreeMap::new();
        for n in EVEN_NAMES {
            bind.insert(Sym::even(n), Expr::sym(&Sym::even("q")));
        }
        let e = substitute(&e, &bind).unwrap();
        let text = format!("system p\ncoord q even\nL = {e} + dq\n");
        let spec = parse_system(&text).unwrap();
        prop_assert_eq!(spec.lagrangian, e.add(&Expr::sym(&Sym::even("dq"))));
    }
}

// ---------------------------------------------------------------------------
// Bracket properties on a derived table
// ---------------------------------------------------------------------------

fn toy_table() -> (dbrack_core::BracketTable, Vec<Sym>) {
    let spec = parse_system(
        "system toy\ncoord x even\ncoord y even\ncoord z even\nL = (1/2)*dx^2 + (z + exp(-x))*dy - (1/2)*z*x^2\n",
    )
    .unwrap();
    let tsol = taylor_solve(&spec, 3).unwrap();
    let ics = detect_ic_constraints(&spec, &tsol).unwrap();
    let h = hamiltonian_at_initial(&spec, &tsol, &ics).unwrap();
    let reduced = tsol.reduced(&ics).unwrap();
    let sys = dbrack_core::bracket_solver::build_identification_system(&spec, &reduced, &ics, &h)
        .unwrap();
    let sol =
        dbrack_core::bracket_solver::solve_identification(&sys, &SolverConfig::default()).unwrap();
    let table = dbrack_core::bracket_solver::extend_table(&spec, &ics, &sys, &sol).unwrap();
    let vars = spec.phase_vars();
    (table, vars)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn table_bracket_antisymmetry(f_seed in arb_phase_expr_holder(), g_seed in arb_phase_expr_holder()) {
        let (table, vars) = toy_table();
        let f = f_seed.build(&vars);
        let g = g_seed.build(&vars);
        let fg = table.bracket_of(&f, &g).unwrap();
        let gf = table.bracket_of(&g, &f).unwrap();
        prop_assert!(fg.add(&gf).is_zero());
    }

    #[test]
    fn table_bracket_leibniz(f_seed in arb_phase_expr_holder(), g_seed in arb_phase_expr_holder(), h_seed in arb_phase_expr_holder()) {
        let (table, vars) = toy_table();
        let f = f_seed.build(&vars);
        let g = g_seed.build(&vars);
        let h = h_seed.build(&vars);
        let lhs = table.bracket_of(&f, &g.mul(&h)).unwrap();
        let rhs = table
            .bracket_of(&f, &g)
            .unwrap()
            .mul(&h)
            .add(&g.mul(&table.bracket_of(&f, &h).unwrap()));
        prop_assert!(lhs.sub(&rhs).is_zero());
    }
}

/// Cheap deterministic stand-in for a random phase-space expression: a pair
/// of monomial picks combined with arithmetic chosen by the seed.
#[derive(Debug, Clone)]
struct PhaseExprSeed {
    picks: Vec<(usize, u32)>,
    add_const: i64,
}

impl PhaseExprSeed {
    fn build(&self, vars: &[Sym]) -> Expr {
        let mut acc = Expr::int(self.add_const);
        let mut term = Expr::one();
        for (i, p) in &self.picks {
            term = term.mul(&Expr::sym(&vars[i % vars.len()]).pow(p % 3));
        }
        acc = acc.add(&term);
        acc
    }
}

fn arb_phase_expr_holder() -> impl Strategy<Value = PhaseExprSeed> {
    (
        proptest::collection::vec((0usize..6, 0u32..3), 1..3),
        -2i64..=2,
    )
        .prop_map(|(picks, add_const)| PhaseExprSeed { picks, add_const })
}
