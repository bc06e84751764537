use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::{Vector2, Vector3};
use srbd_core::model::RobotModel;
use srbd_core::polytope::{exact_force_polytope, morph_at, polytope_jacobian};
use std::hint::black_box;

fn polytopes(c: &mut Criterion) {
    let model = RobotModel::hyq_like();
    let leg = &model.legs[0];
    let chain = model.sagittal_leg(0);
    let foot = leg.hip + Vector3::new(0.08, 0.0, -0.45);
    let q = chain.ik(&(foot - leg.hip)).unwrap();
    c.bench_function("exact_force_polytope", |b| {
        b.iter(|| exact_force_polytope(black_box(&q), &chain, &leg.torque_limits[1..]).unwrap())
    });
    c.bench_function("morph_at", |b| b.iter(|| morph_at(black_box(&foot), &leg.hip, &leg.polytopes).unwrap()));
    let f = Vector2::new(30.0, 200.0);
    c.bench_function("polytope_jacobian", |b| {
        b.iter(|| polytope_jacobian(black_box(&foot), &leg.hip, &f, &leg.polytopes).unwrap())
    });
}

criterion_group!(benches, polytopes);
criterion_main!(benches);
