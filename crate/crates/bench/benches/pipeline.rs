use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lbnet_bench::{desk_predictor, pipeline_sphere};
use lbnet_core::curation::isotropic_remesh;
use lbnet_core::features::assemble_features;
use lbnet_core::fem::{lb_spectrum, MassKind, SparseOperatorPair};
use lbnet_core::mesh::shapes;
use std::hint::black_box;

fn fem(c: &mut Criterion) {
    let mesh = pipeline_sphere();
    let mut g = c.benchmark_group("fem");
    g.sample_size(10);
    g.bench_function("assemble", |b| b.iter(|| SparseOperatorPair::assemble(black_box(&mesh), MassKind::Consistent).unwrap()));
    for k in [10, 50] {
        g.bench_with_input(BenchmarkId::new("lb_spectrum", k), &k, |b, &k| b.iter(|| lb_spectrum(black_box(&mesh), k).unwrap()));
    }
    g.finish();
}

fn gcn(c: &mut Criterion) {
    let mesh = pipeline_sphere();
    let predictor = desk_predictor(&mesh);
    let features = assemble_features(&mesh).unwrap();
    let graph = predictor.prepare(&features);
    let mut g = c.benchmark_group("gcn");
    g.bench_function("features", |b| b.iter(|| assemble_features(black_box(&mesh)).unwrap()));
    g.bench_function("forward", |b| b.iter(|| predictor.predict_prepared(&[black_box(&graph)]).unwrap()));
    g.bench_function("features_and_forward", |b| {
        b.iter(|| {
            let f = assemble_features(black_box(&mesh)).unwrap();
            predictor.predict(&[&f]).unwrap()
        })
    });
    g.finish();
}

fn remesh(c: &mut Criterion) {
    let dense = shapes::icosphere(1.0, 5);
    let mut g = c.benchmark_group("remesh");
    g.sample_size(10);
    g.bench_function("icosphere_10k_to_2k", |b| b.iter(|| isotropic_remesh(black_box(&dense), (1750, 2250), 12).unwrap()));
    g.finish();
}

criterion_group!(benches, fem, gcn, remesh);
criterion_main!(benches);
