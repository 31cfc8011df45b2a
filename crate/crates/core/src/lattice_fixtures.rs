//! Finite periodic-lattice discretizations of the two bundled field models,
//! plus their closed-form expected bracket tables.
//!
//! The self-dual model lives on an N x N grid with forward differences in the
//! action (the Euler-Lagrange equations then carry the symmetrized central
//! difference); the spinor model lives on N sites in one dimension with
//! central differences. Periodicity makes the dropped boundary terms exactly
//! absent.

use crate::bracket_solver::{BracketTable, Provenance};
use crate::error::{Error, Result};
use crate::symexpr::{rat, rat_int, Expr, Rat, Sym};
use crate::sysparse::SystemSpec;
use num_traits::Signed;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LatticeModel {
    SelfDual,
    Dirac,
}

impl LatticeModel {
    pub fn name(self) -> &'static str {
        match self {
            LatticeModel::SelfDual => "sd",
            LatticeModel::Dirac => "dirac",
        }
    }
}

#[derive(Clone, Debug)]
pub struct LatticeConfig {
    pub model: LatticeModel,
    pub sites: usize,
    pub spacing: Rat,
    pub mass: Rat,
}

impl LatticeConfig {
    pub fn new(model: LatticeModel, sites: usize, spacing: Rat, mass: Rat) -> Result<Self> {
        if sites < 2 {
            return Err(Error::Invalid(format!("lattice needs at least 2 sites, got {sites}")));
        }
        if !spacing.is_positive() || !mass.is_positive() {
            return Err(Error::Invalid("lattice spacing and mass must be positive".into()));
        }
        Ok(LatticeConfig { model, sites, spacing, mass })
    }

    fn metadata(&self) -> Vec<(String, String)> {
        vec![
            ("model".to_string(), self.model.name().to_string()),
            ("n".to_string(), self.sites.to_string()),
            ("a".to_string(), format_rat(&self.spacing)),
            ("m".to_string(), format_rat(&self.mass)),
        ]
    }
}

fn format_rat(c: &Rat) -> String {
    if c.is_integer() {
        format!("{}", c.numer())
    } else {
        format!("{}/{}", c.numer(), c.denom())
    }
}

pub fn generate(cfg: &LatticeConfig) -> Result<SystemSpec> {
    match cfg.model {
        LatticeModel::SelfDual => gen_sd(cfg),
        LatticeModel::Dirac => gen_dirac(cfg),
    }
}

// ---------------------------------------------------------------------------
// Self-dual model on an N x N periodic grid
// ---------------------------------------------------------------------------

fn sd_name(comp: usize, i: usize, j: usize) -> String {
    format!("f{comp}_{i}_{j}")
}

fn sd_sym(comp: usize, i: usize, j: usize) -> Sym {
    Sym::even(&sd_name(comp, i, j))
}

/// Forward difference of component `comp` in direction `dir` at site (i, j).
fn sd_fwd(cfg: &LatticeConfig, comp: usize, i: usize, j: usize, dir: usize) -> Expr {
    let n = cfg.sites;
    let (ni, nj) = match dir {
        1 => ((i + 1) % n, j),
        _ => (i, (j + 1) % n),
    };
    Expr::sym(&sd_sym(comp, ni, nj))
        .sub(&Expr::sym(&sd_sym(comp, i, j)))
        .scale(&cfg.spacing.recip())
}

/// Self-dual model: fields f0, f1, f2 on the grid, signature (+,-,-) already
/// folded into explicit upper components. The f0 family is declared last so
/// the elimination policy resolves the algebraic relation onto it.
pub fn gen_sd(cfg: &LatticeConfig) -> Result<SystemSpec> {
    if cfg.model != LatticeModel::SelfDual {
        return Err(Error::Invalid("config is not a self-dual lattice".into()));
    }
    let n = cfg.sites;
    let mut coords = Vec::with_capacity(3 * n * n);
    for comp in [1usize, 2, 0] {
        for i in 0..n {
            for j in 0..n {
                coords.push(sd_sym(comp, i, j));
            }
        }
    }

    let half_inv_mass = rat(1, 2) * cfg.mass.recip();
    let mut density_sum = Expr::zero();
    for i in 0..n {
        for j in 0..n {
            let f0 = Expr::sym(&sd_sym(0, i, j));
            let f1 = Expr::sym(&sd_sym(1, i, j));
            let f2 = Expr::sym(&sd_sym(2, i, j));
            let df1 = Expr::sym(&Sym::even(&format!("d{}", sd_name(1, i, j))));
            let df2 = Expr::sym(&Sym::even(&format!("d{}", sd_name(2, i, j))));
            // (1/2m)(f1 df2 - f2 df1)
            let time = f1.mul(&df2).sub(&f2.mul(&df1)).scale(&half_inv_mass);
            // -(1/2m)(-f0 D1 f2 + f0 D2 f1 - f1 D2 f0 + f2 D1 f0)
            let space = f0
                .mul(&sd_fwd(cfg, 2, i, j, 1))
                .neg()
                .add(&f0.mul(&sd_fwd(cfg, 1, i, j, 2)))
                .sub(&f1.mul(&sd_fwd(cfg, 0, i, j, 2)))
                .add(&f2.mul(&sd_fwd(cfg, 0, i, j, 1)))
                .scale(&(-half_inv_mass.clone()));
            // (1/2)(f0^2 - f1^2 - f2^2)
            let mass_term = f0
                .pow(2)
                .sub(&f1.pow(2))
                .sub(&f2.pow(2))
                .scale(&rat(1, 2));
            density_sum = density_sum.add(&time).add(&space).add(&mass_term);
        }
    }
    let lagrangian = density_sum.scale(&(cfg.spacing.clone() * cfg.spacing.clone()));

    Ok(SystemSpec {
        name: format!("sd_lattice_n{}", n),
        params: Vec::new(),
        coords,
        lagrangian,
        metadata: cfg.metadata(),
    })
}

// ---------------------------------------------------------------------------
// Free spinor field on N periodic sites in one dimension
// ---------------------------------------------------------------------------

fn psi_sym(a: usize, site: usize) -> Sym {
    Sym::odd(&format!("psi{a}_{site}"))
}

fn psis_sym(a: usize, site: usize) -> Sym {
    Sym::odd(&format!("psis{a}_{site}"))
}

/// gamma0 = diag(1,1,-1,-1); alpha1 = gamma0 gamma1 is the antidiagonal unit
/// matrix in this representation, beta = gamma0.
fn alpha1(a: usize, b: usize) -> i64 {
    if a + b == 5 {
        1
    } else {
        0
    }
}

fn beta(a: usize, b: usize) -> i64 {
    if a != b {
        0
    } else if a <= 2 {
        1
    } else {
        -1
    }
}

/// Spinor model: 4 odd components and their conjugates per site, central
/// differences for the spatial derivative.
pub fn gen_dirac(cfg: &LatticeConfig) -> Result<SystemSpec> {
    if cfg.model != LatticeModel::Dirac {
        return Err(Error::Invalid("config is not a spinor lattice".into()));
    }
    let n = cfg.sites;
    let mut coords = Vec::with_capacity(8 * n);
    for a in 1..=4 {
        for site in 0..n {
            coords.push(psi_sym(a, site));
        }
    }
    for a in 1..=4 {
        for site in 0..n {
            coords.push(psis_sym(a, site));
        }
    }

    let i_unit = Expr::imaginary();
    let two_a = rat(2, 1) * cfg.spacing.clone();
    let mut density_sum = Expr::zero();
    for site in 0..n {
        // i psis_a dpsi_a
        for a in 1..=4 {
            let dpsi = Expr::sym(&Sym::odd(&format!("dpsi{a}_{site}")));
            density_sum =
                density_sum.add(&i_unit.mul(&Expr::sym(&psis_sym(a, site))).mul(&dpsi));
        }
        // i psis_a alpha1_ab (psi_b[site+1] - psi_b[site-1]) / (2a)
        let up = (site + 1) % n;
        let down = (site + n - 1) % n;
        for a in 1..=4 {
            for b in 1..=4 {
                let c = alpha1(a, b);
                if c == 0 {
                    continue;
                }
                let diff = Expr::sym(&psi_sym(b, up))
                    .sub(&Expr::sym(&psi_sym(b, down)))
                    .scale(&two_a.recip());
                density_sum = density_sum.add(
                    &i_unit
                        .mul(&Expr::sym(&psis_sym(a, site)))
                        .mul(&diff)
                        .scale(&rat_int(c)),
                );
            }
        }
        // -m psis_a beta_ab psi_b
        for a in 1..=4 {
            let c = beta(a, a);
            density_sum = density_sum.add(
                &Expr::sym(&psis_sym(a, site))
                    .mul(&Expr::sym(&psi_sym(a, site)))
                    .scale(&(-cfg.mass.clone() * rat_int(c))),
            );
        }
    }
    let lagrangian = density_sum.scale(&cfg.spacing);

    Ok(SystemSpec {
        name: format!("dirac_lattice_n{}", n),
        params: Vec::new(),
        coords,
        lagrangian,
        metadata: cfg.metadata(),
    })
}

// ---------------------------------------------------------------------------
// Expected closed-form tables
// ---------------------------------------------------------------------------

/// The closed-form lattice bracket table implied by the continuum results
/// under the lattice-delta normalization (delta(x-x') -> delta_nm / a^d).
/// Partial: it pins every field-field pair and the momentum extensions; the
/// engine's full table is compared entry-wise against it.
pub fn expected_table(cfg: &LatticeConfig) -> Result<BracketTable> {
    let spec = generate(cfg)?;
    let mut table = BracketTable::new(&spec.name, &spec, Vec::new());
    match cfg.model {
        LatticeModel::SelfDual => {
            let n = cfg.sites;
            let a2 = cfg.spacing.clone() * cfg.spacing.clone();
            let m_over_a2 = cfg.mass.clone() / a2.clone();
            let inv_2a3 = (rat(2, 1) * a2.clone() * cfg.spacing.clone()).recip();
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let same = i == k && j == l;
                            // {f1, f2} = -(m/a^2) delta
                            let v12 = if same {
                                Expr::rational(-m_over_a2.clone())
                            } else {
                                Expr::zero()
                            };
                            table.insert(&sd_sym(1, i, j), &sd_sym(2, k, l), v12, Provenance::Solved);
                            table.insert(&sd_sym(1, i, j), &sd_sym(1, k, l), Expr::zero(), Provenance::Solved);
                            table.insert(&sd_sym(2, i, j), &sd_sym(2, k, l), Expr::zero(), Provenance::Solved);
                            // f0 rows from the central-difference curl:
                            // {f0_n, f1_m} = -(delta_{n+e1,m} - delta_{n-e1,m})/(2a^3)
                            let d1 = delta2(n, i, j, 1, k, l) - delta2(n, i, j, -1, k, l);
                            let v01 = Expr::rational(-inv_2a3.clone() * rat_int(d1));
                            table.insert(&sd_sym(0, i, j), &sd_sym(1, k, l), v01, Provenance::Extended);
                            let d2 = delta2v(n, i, j, 1, k, l) - delta2v(n, i, j, -1, k, l);
                            let v02 = Expr::rational(-inv_2a3.clone() * rat_int(d2));
                            table.insert(&sd_sym(0, i, j), &sd_sym(2, k, l), v02, Provenance::Extended);
                            // momentum extensions
                            let half = if same { rat(1, 2) } else { rat_int(0) };
                            let p1 = SystemSpec::momentum(&sd_sym(1, k, l));
                            let p2 = SystemSpec::momentum(&sd_sym(2, k, l));
                            let p0 = SystemSpec::momentum(&sd_sym(0, k, l));
                            table.insert(&sd_sym(1, i, j), &p1, Expr::rational(half.clone()), Provenance::Extended);
                            table.insert(&sd_sym(2, i, j), &p2, Expr::rational(half), Provenance::Extended);
                            table.insert(&sd_sym(1, i, j), &p2, Expr::zero(), Provenance::Extended);
                            table.insert(&sd_sym(2, i, j), &p1, Expr::zero(), Provenance::Extended);
                            for comp in 0..3 {
                                table.insert(&sd_sym(comp, i, j), &p0, Expr::zero(), Provenance::Extended);
                            }
                        }
                    }
                }
            }
        }
        LatticeModel::Dirac => {
            let n = cfg.sites;
            let minus_i_over_a = Expr::imaginary().neg().scale(&cfg.spacing.recip());
            for a in 1..=4 {
                for s in 0..n {
                    for c in 1..=4 {
                        for t in 0..n {
                            let same = a == c && s == t;
                            let v = if same { minus_i_over_a.clone() } else { Expr::zero() };
                            table.insert(&psi_sym(a, s), &psis_sym(c, t), v, Provenance::Solved);
                            table.insert(&psi_sym(a, s), &psi_sym(c, t), Expr::zero(), Provenance::Solved);
                            table.insert(&psis_sym(a, s), &psis_sym(c, t), Expr::zero(), Provenance::Solved);
                            // momenta: p_psi = -i a psis, p_psis = 0
                            let p_psi = SystemSpec::momentum(&psi_sym(c, t));
                            let p_psis = SystemSpec::momentum(&psis_sym(c, t));
                            let v = if same { Expr::int(-1) } else { Expr::zero() };
                            table.insert(&psi_sym(a, s), &p_psi, v, Provenance::Extended);
                            table.insert(&psis_sym(a, s), &p_psi, Expr::zero(), Provenance::Extended);
                            table.insert(&psi_sym(a, s), &p_psis, Expr::zero(), Provenance::Extended);
                            table.insert(&psis_sym(a, s), &p_psis, Expr::zero(), Provenance::Extended);
                        }
                    }
                }
            }
        }
    }
    Ok(table)
}

/// delta_{(i,j)+shift*e1, (k,l)} on the periodic grid.
fn delta2(n: usize, i: usize, j: usize, shift: i64, k: usize, l: usize) -> i64 {
    let si = ((i as i64 + shift).rem_euclid(n as i64)) as usize;
    if si == k && j == l {
        1
    } else {
        0
    }
}

/// delta_{(i,j)+shift*e2, (k,l)} on the periodic grid.
fn delta2v(n: usize, i: usize, j: usize, shift: i64, k: usize, l: usize) -> i64 {
    let sj = ((j as i64 + shift).rem_euclid(n as i64)) as usize;
    if i == k && sj == l {
        1
    } else {
        0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanics::{euler_lagrange, momenta, EqClass};
    use crate::symexpr::differentiate;
    use crate::sysparse::{emit_system, parse_system};

    fn sd_cfg(n: usize, a: Rat, m: Rat) -> LatticeConfig {
        LatticeConfig::new(LatticeModel::SelfDual, n, a, m).unwrap()
    }

    fn dirac_cfg(n: usize, a: Rat) -> LatticeConfig {
        LatticeConfig::new(LatticeModel::Dirac, n, a, rat_int(1)).unwrap()
    }

    #[test]
    fn sd_coordinate_count_and_roundtrip() {
        for n in [2usize, 3] {
            let cfg = sd_cfg(n, rat_int(1), rat_int(1));
            let spec = gen_sd(&cfg).unwrap();
            assert_eq!(spec.coords.len(), 3 * n * n);
            let reparsed = parse_system(&emit_system(&spec)).unwrap();
            assert_eq!(reparsed, spec);
        }
    }

    #[test]
    fn dirac_coordinate_count_and_roundtrip() {
        let cfg = dirac_cfg(2, rat_int(1));
        let spec = gen_dirac(&cfg).unwrap();
        assert_eq!(spec.coords.len(), 16);
        assert!(spec.coords.iter().all(|c| c.is_odd()));
        let reparsed = parse_system(&emit_system(&spec)).unwrap();
        assert_eq!(reparsed, spec);
    }

    #[test]
    fn sd_f0_equation_is_algebraic_with_central_curl() {
        let cfg = sd_cfg(3, rat_int(1), rat_int(1));
        let spec = gen_sd(&cfg).unwrap();
        let el = euler_lagrange(&spec);
        // the equation attached to each f0 coordinate is algebraic
        let idx0 = spec.coords.iter().position(|c| c.name() == "f0_0_0").unwrap();
        assert_eq!(el.classes[idx0], EqClass::Algebraic);
        // m f0_00 = [(D2 + D2bar) f1 - (D1 + D1bar) f2]/2 at site (0,0):
        // the equation must contain f0_0_0 with a nonzero coefficient and the
        // four neighbor fields of the symmetrized curl
        let e = &el.equations[idx0];
        assert!(e.depends_on(&sd_sym(0, 0, 0)));
        assert!(e.depends_on(&sd_sym(1, 0, 1)));
        assert!(e.depends_on(&sd_sym(1, 0, 2))); // j-1 wraps to 2
        assert!(e.depends_on(&sd_sym(2, 1, 0)));
        assert!(e.depends_on(&sd_sym(2, 2, 0)));
        assert!(!e.depends_on(&sd_sym(1, 1, 1)));
    }

    #[test]
    fn sd_momenta_proportional_to_fields() {
        let cfg = sd_cfg(2, rat_int(1), rat(2, 1));
        let spec = gen_sd(&cfg).unwrap();
        let ms = momenta(&spec);
        let idx1 = spec.coords.iter().position(|c| c.name() == "f1_0_0").unwrap();
        let idx2 = spec.coords.iter().position(|c| c.name() == "f2_0_0").unwrap();
        let idx0 = spec.coords.iter().position(|c| c.name() == "f0_0_0").unwrap();
        // pi_f1 = -(a^2/2m) f2, pi_f2 = +(a^2/2m) f1, pi_f0 = 0
        assert_eq!(ms[idx1], Expr::sym(&sd_sym(2, 0, 0)).scale(&rat(-1, 4)));
        assert_eq!(ms[idx2], Expr::sym(&sd_sym(1, 0, 0)).scale(&rat(1, 4)));
        assert!(ms[idx0].is_zero());
    }

    #[test]
    fn dirac_momenta_and_equations() {
        let cfg = dirac_cfg(2, rat_int(1));
        let spec = gen_dirac(&cfg).unwrap();
        let ms = momenta(&spec);
        let idx = spec.coords.iter().position(|c| c.name() == "psi1_0").unwrap();
        // p_psi1_0 = -i a psis1_0
        assert_eq!(
            ms[idx],
            Expr::imaginary().neg().mul(&Expr::sym(&psis_sym(1, 0)))
        );
        // conjugate components have vanishing momenta
        let idxs = spec.coords.iter().position(|c| c.name() == "psis1_0").unwrap();
        assert!(ms[idxs].is_zero());
        // the EL equation for psis reproduces i dpsi = -i alpha1 Dpsi + m beta psi:
        // at N=2 central differences cancel, leaving i dpsi1 = m psi1
        let el = euler_lagrange(&spec);
        let e = &el.equations[idxs];
        assert_eq!(el.classes[idxs], EqClass::FirstOrder);
        let dpsi = Sym::odd("dpsi1_0");
        let coef = differentiate(e, &dpsi, crate::symexpr::Side::Left);
        assert!(!coef.is_zero());
    }

    #[test]
    fn dirac_mass_term_per_site() {
        // mass term contributes -m a (psis beta psi) per site: check the
        // sign flip between upper and lower components in the Lagrangian
        let cfg = LatticeConfig::new(LatticeModel::Dirac, 2, rat_int(1), rat(3, 1)).unwrap();
        let spec = gen_dirac(&cfg).unwrap();
        let d_psi1 = differentiate(
            &spec.lagrangian,
            &psi_sym(1, 0),
            crate::symexpr::Side::Left,
        );
        let d_psi3 = differentiate(
            &spec.lagrangian,
            &psi_sym(3, 0),
            crate::symexpr::Side::Left,
        );
        // mass part of dL/dpsi1_0 is +3 psis1_0 (odd move sign), of psi3 -3 psis3_0
        assert!(d_psi1.depends_on(&psis_sym(1, 0)));
        assert!(d_psi3.depends_on(&psis_sym(3, 0)));
    }

    #[test]
    fn expected_tables_have_the_right_normalization() {
        // sd, m=1, a=1: {f1_n, f2_n} = -1 on-site, 0 off-site
        let t = expected_table(&sd_cfg(2, rat_int(1), rat_int(1))).unwrap();
        assert_eq!(t.entry(&sd_sym(1, 0, 0), &sd_sym(2, 0, 0)).unwrap(), Expr::int(-1));
        assert_eq!(t.entry(&sd_sym(1, 0, 0), &sd_sym(2, 1, 0)).unwrap(), Expr::zero());
        assert_eq!(t.entry(&sd_sym(1, 0, 0), &sd_sym(1, 1, 1)).unwrap(), Expr::zero());
        // dirac, a=1/2: {psi, psis} = -2i on-site
        let t = expected_table(&dirac_cfg(2, rat(1, 2))).unwrap();
        assert_eq!(
            t.entry(&psi_sym(1, 0), &psis_sym(1, 0)).unwrap(),
            Expr::imaginary().scale(&rat(-2, 1))
        );
        assert_eq!(t.entry(&psi_sym(1, 0), &psis_sym(2, 0)).unwrap(), Expr::zero());
    }

    #[test]
    fn expected_tables_scale_with_the_spacing() {
        // sd entries scale as 1/a^2, dirac as 1/a, checked at a in {1/2,1,2}
        let base_sd = expected_table(&sd_cfg(2, rat_int(1), rat_int(1))).unwrap();
        let base_val = base_sd.entry(&sd_sym(1, 0, 0), &sd_sym(2, 0, 0)).unwrap();
        for (a, factor) in [(rat(1, 2), rat(4, 1)), (rat(2, 1), rat(1, 4))] {
            let t = expected_table(&sd_cfg(2, a, rat_int(1))).unwrap();
            assert_eq!(
                t.entry(&sd_sym(1, 0, 0), &sd_sym(2, 0, 0)).unwrap(),
                base_val.scale(&factor)
            );
        }
        let base_d = expected_table(&dirac_cfg(2, rat_int(1))).unwrap();
        let base_val = base_d.entry(&psi_sym(1, 0), &psis_sym(1, 0)).unwrap();
        for (a, factor) in [(rat(1, 2), rat(2, 1)), (rat(2, 1), rat(1, 2))] {
            let t = expected_table(&dirac_cfg(2, a)).unwrap();
            assert_eq!(
                t.entry(&psi_sym(1, 0), &psis_sym(1, 0)).unwrap(),
                base_val.scale(&factor)
            );
        }
    }

    #[test]
    fn too_small_lattices_are_rejected() {
        assert!(LatticeConfig::new(LatticeModel::SelfDual, 1, rat_int(1), rat_int(1)).is_err());
        assert!(LatticeConfig::new(LatticeModel::SelfDual, 2, rat_int(0), rat_int(1)).is_err());
    }
}
