//! Benchmarks for the hot stages of one experiment run: matrix assembly,
//! reconstruction-operator construction, load assembly through the
//! operator, the saddle-point solve, and high-order rule construction.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use axisym::assembly::{assemble_a, assemble_b, assemble_rhs, eliminate_constraints};
use axisym::cases::find_case;
use axisym::fe_spaces::{apply_dirichlet, build_spaces, PressureSpace, VelocitySpace};
use axisym::hdiv_recon::{build_recon_operator, ReconVariant};
use axisym::mesh::{classify, generate_unit_square_mesh, AxisTopology, Mesh};
use axisym::quadrature::triangle_rule;
use axisym::solver::StokesFactorization;

struct Fixture {
    mesh: Mesh,
    topo: AxisTopology,
    vel: VelocitySpace,
    pres: PressureSpace,
}

fn fixture(n: usize) -> Fixture {
    let case = find_case("ex2").unwrap();
    let mesh = generate_unit_square_mesh(n, 0.2, 1).unwrap();
    let topo = classify(&mesh).unwrap();
    let (mut vel, pres) = build_spaces(&mesh, &topo);
    apply_dirichlet(&mut vel, &mesh, &topo, &|p| (case.u)(p), 10).unwrap();
    Fixture { mesh, topo, vel, pres }
}

fn bench_assembly(c: &mut Criterion) {
    let fx = fixture(16);
    c.bench_function("assemble_forms_n16", |b| {
        b.iter(|| {
            let a = assemble_a(&fx.mesh, &fx.vel, 4).unwrap();
            let bt = assemble_b(&fx.mesh, &fx.vel, &fx.pres, 4).unwrap();
            black_box((a, bt))
        })
    });
}

fn bench_recon(c: &mut Criterion) {
    let fx = fixture(16);
    c.bench_function("build_recon_bdm1_axi_n16", |b| {
        b.iter(|| {
            black_box(
                build_recon_operator(&fx.mesh, &fx.topo, &fx.vel, ReconVariant::Bdm1Axi)
                    .unwrap(),
            )
        })
    });

    let case = find_case("ex2").unwrap();
    let op = build_recon_operator(&fx.mesh, &fx.topo, &fx.vel, ReconVariant::Bdm1Axi).unwrap();
    c.bench_function("assemble_load_through_recon_n16", |b| {
        b.iter(|| {
            black_box(
                assemble_rhs(&fx.mesh, &fx.vel, Some(&op), &|p| (case.f)(1e-3, p), 10).unwrap(),
            )
        })
    });
}

fn bench_solve(c: &mut Criterion) {
    let fx = fixture(16);
    let case = find_case("ex2").unwrap();
    let op = build_recon_operator(&fx.mesh, &fx.topo, &fx.vel, ReconVariant::Bdm1Axi).unwrap();
    let a = assemble_a(&fx.mesh, &fx.vel, 4).unwrap();
    let bt = assemble_b(&fx.mesh, &fx.vel, &fx.pres, 4).unwrap();
    let load = assemble_rhs(&fx.mesh, &fx.vel, Some(&op), &|p| (case.f)(1e-3, p), 10).unwrap();
    let sys = eliminate_constraints(&fx.vel, &fx.pres, &a, &bt, load, 1e-3);

    c.bench_function("factorize_n16", |b| {
        b.iter(|| black_box(StokesFactorization::new(&sys).unwrap()))
    });

    let fact = StokesFactorization::new(&sys).unwrap();
    c.bench_function("solve_with_existing_factorization_n16", |b| {
        b.iter(|| black_box(fact.solve_with(&sys).unwrap()))
    });
}

fn bench_quadrature(c: &mut Criterion) {
    c.bench_function("triangle_rule_order50", |b| {
        b.iter_batched(
            || (),
            |()| black_box(triangle_rule(50).unwrap()),
            BatchSize::SmallInput,
        )
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_assembly, bench_recon, bench_solve, bench_quadrature
}
criterion_main!(benches);
