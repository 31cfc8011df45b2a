//! Full-pipeline runs on the lattice fixtures: the engine-derived tables must
//! match the closed-form expected tables entry for entry.

use dbrack_core::lattice_fixtures::{
    expected_table, generate, LatticeConfig, LatticeModel,
};
use dbrack_core::pipeline::{derive, RunConfig};
use dbrack_core::symexpr::{rat, rat_int, Rat};

fn check_lattice(model: LatticeModel, n: usize, a: Rat, m: Rat) {
    let cfg = LatticeConfig::new(model, n, a, m).unwrap();
    let spec = generate(&cfg).unwrap();
    let deriv = derive(&spec, &RunConfig::default()).unwrap();
    let expected = expected_table(&cfg).unwrap();
    let mut compared = 0usize;
    for (va, vb, want, _) in expected.iter_entries() {
        let got = deriv
            .table
            .entry(va, vb)
            .unwrap_or_else(|| panic!("missing entry {{{},{}}}", va.name(), vb.name()));
        assert_eq!(
            got,
            *want,
            "{} {{{},{}}}: engine {got} expected {want}",
            spec.name,
            va.name(),
            vb.name()
        );
        compared += 1;
    }
    assert!(compared > 0);
    assert!(deriv.residual <= 1e-9);
    assert_eq!(deriv.nullspace_dim, 0);
}

#[test]
fn self_dual_n2_unit_lattice() {
    check_lattice(LatticeModel::SelfDual, 2, rat_int(1), rat_int(1));
}

#[test]
fn self_dual_n2_fine_lattice_heavier_mass() {
    check_lattice(LatticeModel::SelfDual, 2, rat(1, 2), rat(2, 1));
}

#[test]
fn self_dual_n3() {
    check_lattice(LatticeModel::SelfDual, 3, rat_int(1), rat_int(1));
}

#[test]
fn dirac_n2() {
    check_lattice(LatticeModel::Dirac, 2, rat_int(1), rat_int(1));
}

#[test]
fn dirac_n2_half_spacing() {
    check_lattice(LatticeModel::Dirac, 2, rat(1, 2), rat_int(1));
}

#[test]
fn dirac_n4() {
    check_lattice(LatticeModel::Dirac, 4, rat_int(1), rat_int(1));
}

#[test]
fn independent_ic_counts() {
    // sd: only the two transverse fields per site stay independent
    let cfg = LatticeConfig::new(LatticeModel::SelfDual, 2, rat_int(1), rat_int(1)).unwrap();
    let spec = generate(&cfg).unwrap();
    let deriv = derive(&spec, &RunConfig::default()).unwrap();
    assert_eq!(deriv.ics.independent.len(), 2 * 4);
    assert!(deriv
        .ics
        .independent
        .iter()
        .all(|s| s.name().starts_with("f1_") || s.name().starts_with("f2_")));
    // dirac: all field components and conjugates stay independent
    let cfg = LatticeConfig::new(LatticeModel::Dirac, 2, rat_int(1), rat_int(1)).unwrap();
    let spec = generate(&cfg).unwrap();
    let deriv = derive(&spec, &RunConfig::default()).unwrap();
    assert_eq!(deriv.ics.independent.len(), 16);
    assert!(deriv.ics.independent.iter().all(|s| s.name().starts_with("psi")));
}
