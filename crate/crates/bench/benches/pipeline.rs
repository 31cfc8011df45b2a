//! Benchmarks for the expression kernel and the end-to-end derivation.

use criterion::{criterion_group, criterion_main, Criterion};
use dbrack_core::lattice_fixtures::{generate, LatticeConfig, LatticeModel};
use dbrack_core::pipeline::{derive, RunConfig};
use dbrack_core::symexpr::{differentiate, rat_int, Expr, Side, Sym};
use dbrack_core::sysparse::parse_system;
use std::hint::black_box;

const TOY: &str = "\
system toy
coord x even
coord y even
coord z even
L = (1/2)*dx^2 + (z + exp(-x))*dy - (1/2)*z*x^2
";

fn kernel_benches(c: &mut Criterion) {
    let x = Sym::even("x");
    let z = Sym::even("z");
    let base = Expr::sym(&x)
        .add(&Expr::sym(&z))
        .add(&Expr::exp(&Expr::sym(&x).neg()).unwrap());
    c.bench_function("kernel/poly_pow6", |b| {
        b.iter(|| black_box(base.pow(6)))
    });
    let big = base.pow(4);
    c.bench_function("kernel/differentiate", |b| {
        b.iter(|| black_box(differentiate(&big, &x, Side::Left)))
    });
}

fn parse_bench(c: &mut Criterion) {
    c.bench_function("parse/toy", |b| b.iter(|| black_box(parse_system(TOY).unwrap())));
}

fn derive_benches(c: &mut Criterion) {
    let toy = parse_system(TOY).unwrap();
    let cfg = RunConfig::default();
    c.bench_function("derive/toy", |b| b.iter(|| black_box(derive(&toy, &cfg).unwrap())));

    let sd = generate(
        &LatticeConfig::new(LatticeModel::SelfDual, 2, rat_int(1), rat_int(1)).unwrap(),
    )
    .unwrap();
    c.bench_function("derive/sd_n2", |b| b.iter(|| black_box(derive(&sd, &cfg).unwrap())));

    let dirac = generate(
        &LatticeConfig::new(LatticeModel::Dirac, 2, rat_int(1), rat_int(1)).unwrap(),
    )
    .unwrap();
    c.bench_function("derive/dirac_n2", |b| {
        b.iter(|| black_box(derive(&dirac, &cfg).unwrap()))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = kernel_benches, parse_bench, derive_benches
}
criterion_main!(benches);
