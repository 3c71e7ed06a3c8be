//! Forest fitting and feature extraction on the default rayon pool versus a
//! single-thread pool. Build with `--no-default-features` for the sequential code path.

use acctrisk::ensemble::{fit_forest, ForestParams};
use acctrisk::features::compute_def1;
use acctrisk::synthgen::{generate_panel, SynthConfig};
use criterion::{criterion_group, criterion_main, Criterion};

fn workload() -> (acctrisk::panel::PanelDataset, acctrisk::FeatureMatrix, Vec<bool>) {
    let cfg = SynthConfig {
        n_firms: 2000,
        ..SynthConfig::reference()
    };
    let (panel, _) = generate_panel(&cfg).unwrap();
    let (x, _, _) = compute_def1(&panel).unwrap();
    let y = panel.labels().iter().map(|l| l.default).collect();
    (panel, x, y)
}

#[cfg(feature = "parallel")]
type Pool = rayon::ThreadPool;
#[cfg(not(feature = "parallel"))]
type Pool = ();

#[cfg(feature = "parallel")]
fn run<T: Send>(pool: &Option<Pool>, f: impl FnOnce() -> T + Send) -> T {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

#[cfg(not(feature = "parallel"))]
fn run<T: Send>(_: &Option<Pool>, f: impl FnOnce() -> T + Send) -> T {
    f()
}

fn bench(c: &mut Criterion) {
    let (panel, x, y) = workload();
    let params = ForestParams {
        n_trees: 64,
        ..ForestParams::balanced()
    };
    #[allow(unused_mut)]
    let mut pools: Vec<(String, Option<Pool>)> = vec![("default".into(), None)];
    #[cfg(feature = "parallel")]
    pools.push((
        "1-thread".into(),
        Some(rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
    ));

    let mut g = c.benchmark_group("forest");
    g.sample_size(10);
    for (name, pool) in &pools {
        g.bench_function(name.as_str(), |b| {
            b.iter(|| run(pool, || fit_forest(&x, &y, &params).unwrap()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("def1");
    g.sample_size(10);
    for (name, pool) in &pools {
        g.bench_function(name.as_str(), |b| {
            b.iter(|| run(pool, || compute_def1(&panel).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
