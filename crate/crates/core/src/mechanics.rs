//! Momenta, Euler-Lagrange equations, and the conserved Hamiltonian expressed
//! in initial conditions. Left-derivative conventions throughout, so graded
//! coordinates work the same as even ones.

use crate::error::{Error, Result};
use crate::initial_instant::{ICConstraintSet, TaylorSolution};
use crate::symexpr::{differentiate, Expr, ParityClass, Side};
use crate::sysparse::SystemSpec;

/// Classification of one Euler-Lagrange equation by the derivative symbols it
/// actually contains.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EqClass {
    /// Contains at least one acceleration symbol.
    Dynamical,
    /// Contains velocities but no accelerations.
    FirstOrder,
    /// Contains neither.
    Algebraic,
}

impl EqClass {
    /// Highest time-derivative order appearing in an equation of this class.
    pub fn derivative_order(self) -> usize {
        match self {
            EqClass::Dynamical => 2,
            EqClass::FirstOrder => 1,
            EqClass::Algebraic => 0,
        }
    }
}

/// The implicit system `E_i = 0`, one equation per coordinate.
#[derive(Clone, Debug)]
pub struct EulerLagrangeSystem {
    pub equations: Vec<Expr>,
    pub classes: Vec<EqClass>,
}

/// Left derivatives of the Lagrangian with respect to each velocity.
pub fn momenta(spec: &SystemSpec) -> Vec<Expr> {
    spec.coords
        .iter()
        .map(|c| differentiate(&spec.lagrangian, &SystemSpec::velocity(c), Side::Left))
        .collect()
}

/// Total time derivative via the chain rule: velocities and accelerations are
/// first-class symbols, multiplied from the left of the left-derivative.
pub fn time_derivative(spec: &SystemSpec, e: &Expr) -> Expr {
    let mut out = Expr::zero();
    for c in &spec.coords {
        let v = SystemSpec::velocity(c);
        let a = SystemSpec::accel(c);
        let dq = differentiate(e, c, Side::Left);
        if !dq.is_zero() {
            out = out.add(&Expr::sym(&v).mul(&dq));
        }
        let dv = differentiate(e, &v, Side::Left);
        if !dv.is_zero() {
            out = out.add(&Expr::sym(&a).mul(&dv));
        }
    }
    out
}

fn classify(spec: &SystemSpec, e: &Expr) -> EqClass {
    let has_acc = spec.coords.iter().any(|c| e.depends_on(&SystemSpec::accel(c)));
    if has_acc {
        return EqClass::Dynamical;
    }
    let has_vel = spec.coords.iter().any(|c| e.depends_on(&SystemSpec::velocity(c)));
    if has_vel {
        EqClass::FirstOrder
    } else {
        EqClass::Algebraic
    }
}

/// `E_i = d/dt(dL/dq̇_i) - dL/dq_i` in canonical form, with classification.
pub fn euler_lagrange(spec: &SystemSpec) -> EulerLagrangeSystem {
    let ps = momenta(spec);
    let mut equations = Vec::with_capacity(spec.coords.len());
    let mut classes = Vec::with_capacity(spec.coords.len());
    for (c, p) in spec.coords.iter().zip(&ps) {
        let e = time_derivative(spec, p).sub(&differentiate(&spec.lagrangian, c, Side::Left));
        classes.push(classify(spec, &e));
        equations.push(e);
    }
    EulerLagrangeSystem { equations, classes }
}

/// The Legendre transform `sum q̇_i p_i - L` over coordinates and velocities
/// (velocity to the left of the momentum, matching the left-derivative
/// pairing for odd coordinates).
pub fn hamiltonian_raw(spec: &SystemSpec) -> Expr {
    let mut h = spec.lagrangian.neg();
    for (c, p) in spec.coords.iter().zip(momenta(spec)) {
        h = h.add(&Expr::sym(&SystemSpec::velocity(c)).mul(&p));
    }
    h
}

/// The conserved Hamiltonian evaluated at t = 0 and expressed purely in the
/// independent initial conditions.
///
/// The Taylor solution is substituted into the Legendre transform; the
/// resulting series must be constant through the solved order (the Lagrangian
/// is autonomous), and the constant slot must be even.
pub fn hamiltonian_at_initial(
    spec: &SystemSpec,
    tsol: &TaylorSolution,
    ics: &ICConstraintSet,
) -> Result<Expr> {
    let h_raw = hamiltonian_raw(spec);
    let series = tsol.compose_reduced(spec, &h_raw, ics)?;
    let h0 = series.coeff(0).clone();
    // one order is consumed by the velocity series, one by validation headroom
    let checkable = series.order().saturating_sub(1);
    for n in 1..=checkable {
        if !series.coeff(n).is_zero() {
            return Err(Error::NonConservedHamiltonian(format!(
                "t^{n} coefficient of H is `{}`",
                series.coeff(n)
            )));
        }
    }
    match h0.parity_class() {
        ParityClass::Even | ParityClass::Zero => Ok(h0),
        _ => Err(Error::OddHamiltonian(format!("H = {h0}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symexpr::Sym;
    use crate::symexpr::rat;
    use crate::sysparse::parse_system;

    pub(crate) const TOY: &str = "\
system toy
coord x even
coord y even
coord z even
L = (1/2)*dx^2 + (z + exp(-x))*dy - (1/2)*z*x^2
";
    pub(crate) const OSC: &str = "system osc\ncoord q even\nL = (1/2)*dq^2 - (1/2)*q^2\n";

    fn s(n: &str) -> Expr {
        Expr::sym(&Sym::even(n))
    }

    #[test]
    fn toy_momenta() {
        let spec = parse_system(TOY).unwrap();
        let ps = momenta(&spec);
        assert_eq!(ps[0], s("dx"));
        assert_eq!(ps[1], s("z").add(&Expr::exp(&s("x").neg()).unwrap()));
        assert!(ps[2].is_zero());
    }

    #[test]
    fn oscillator_momentum_is_velocity() {
        let spec = parse_system(OSC).unwrap();
        assert_eq!(momenta(&spec), vec![s("dq")]);
    }

    #[test]
    fn toy_euler_lagrange() {
        let spec = parse_system(TOY).unwrap();
        let el = euler_lagrange(&spec);
        // x-equation: ddx + exp(-x) dy + z x = 0 (dynamical)
        let ex = s("ddx")
            .add(&Expr::exp(&s("x").neg()).unwrap().mul(&s("dy")))
            .add(&s("z").mul(&s("x")));
        assert_eq!(el.equations[0], ex);
        assert_eq!(el.classes[0], EqClass::Dynamical);
        // y-equation: dz - exp(-x) dx = 0, so ż = +exp(-x) ẋ (first order)
        let ey = s("dz").sub(&Expr::exp(&s("x").neg()).unwrap().mul(&s("dx")));
        assert_eq!(el.equations[1], ey);
        assert_eq!(el.classes[1], EqClass::FirstOrder);
        // z-equation: -dy + x^2/2 = 0 (first order)
        let ez = s("dy").neg().add(&s("x").pow(2).scale(&rat(1, 2)));
        assert_eq!(el.equations[2], ez);
        assert_eq!(el.classes[2], EqClass::FirstOrder);
    }

    #[test]
    fn oscillator_equation_of_motion() {
        let spec = parse_system(OSC).unwrap();
        let el = euler_lagrange(&spec);
        assert_eq!(el.equations[0], s("ddq").add(&s("q")));
        assert_eq!(el.classes[0], EqClass::Dynamical);
    }

    #[test]
    fn total_derivative_shift_leaves_equations_unchanged() {
        // L' = L + d/dt(q^3) = L + 3 q^2 dq
        let spec = parse_system(OSC).unwrap();
        let shifted = SystemSpec {
            lagrangian: spec
                .lagrangian
                .add(&s("q").pow(2).mul(&s("dq")).scale(&rat(3, 1))),
            ..spec.clone()
        };
        assert_eq!(euler_lagrange(&spec).equations, euler_lagrange(&shifted).equations);
    }

    #[test]
    fn raw_hamiltonian_of_toy_drops_first_order_terms() {
        // H = dx^2/2 + z x^2 / 2: the (z+e^-x) dy terms cancel in the
        // Legendre transform
        let spec = parse_system(TOY).unwrap();
        let h = hamiltonian_raw(&spec);
        let expected = s("dx")
            .pow(2)
            .scale(&rat(1, 2))
            .add(&s("z").mul(&s("x").pow(2)).scale(&rat(1, 2)));
        assert_eq!(h, expected);
    }

    #[test]
    fn fermion_legendre_pairing_is_even() {
        // L = i u* u̇ - m u* u with odd u, u* (us): H = m us u
        let text = "system fermi\nparam m positive\ncoord u odd\ncoord us odd\nL = im*us*du - m*us*u\n";
        let spec = parse_system(text).unwrap();
        let h = hamiltonian_raw(&spec);
        let us = Expr::sym(&Sym::odd("us"));
        let u = Expr::sym(&Sym::odd("u"));
        assert_eq!(h, s("m").mul(&us).mul(&u));
        assert!(h.parity_class().accepts_even());
    }
}
