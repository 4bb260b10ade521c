//! Parallel vs sequential execution of the solver and the full pipeline.
//!
//! In the default build each benchmark runs under a one-thread rayon pool
//! and under the global pool. `cargo bench --no-default-features` runs the
//! plain sequential fallback under the `sequential` label for comparison.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use inwlr::pipeline::{run, PipelineConfig};
use inwlr::synth::{generate, SynthSpec};
use inwlr::wlr::solve;
use inwlr::{FrameGeometry, Rank, WeightMatrix, WlrConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Exec = Box<dyn Fn(&mut (dyn FnMut() + Send))>;

/// (label, runner) pairs; each runner executes a closure in its backend.
fn backends() -> Vec<(String, Exec)> {
    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        vec![
            (
                "rayon-1".to_string(),
                Box::new(move |f: &mut (dyn FnMut() + Send)| single.install(f)),
            ),
            (
                format!("rayon-global-{}", rayon::current_num_threads()),
                Box::new(|f: &mut (dyn FnMut() + Send)| f()),
            ),
        ]
    }
    #[cfg(not(feature = "parallel"))]
    {
        vec![("sequential".to_string(), Box::new(|f: &mut (dyn FnMut() + Send)| f()))]
    }
}

fn wlr_solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("wlr_solve");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (m, k, n2, r) = (64 * 64, 3, 20, 3);
    let basis = DMatrix::from_fn(m, 2, |_, _| rng.random_range(0.0..1.0));
    let a = &basis * DMatrix::from_fn(2, k + n2, |_, _| rng.random_range(0.0..1.0))
        + DMatrix::from_fn(m, k + n2, |_, _| rng.random_range(-0.01..0.01));
    let a1 = a.columns(0, k).into_owned();
    let a2 = a.columns(k, n2).into_owned();
    let w = WeightMatrix::uniform(m, k, 10.0, 100.0, &mut rng).unwrap();
    let cfg = WlrConfig::default();
    for (label, exec) in backends() {
        group.bench_function(BenchmarkId::new(label, "4096x23"), |b| {
            b.iter(|| {
                let mut out = None;
                exec(&mut || out = Some(solve(&a1, &a2, &w, Rank(r), &cfg).unwrap()));
                out
            })
        });
    }
    group.finish();
}

fn pipeline(c: &mut Criterion) {
    let mut group = c.benchmark_group("pipeline");
    group.sample_size(10);
    let spec = SynthSpec {
        geometry: FrameGeometry::new(96, 96).unwrap(),
        object_size: (16, 16),
        ..SynthSpec::default()
    }
    .with_frames(120);
    let video = generate(&spec).unwrap().video;
    let cfg = PipelineConfig {
        batches: 4,
        ..PipelineConfig::default()
    };
    for (label, exec) in backends() {
        group.bench_function(BenchmarkId::new(label, "96x96x120"), |b| {
            b.iter(|| {
                let mut out = None;
                exec(&mut || out = Some(run(&video, &cfg).unwrap()));
                out
            })
        });
    }
    group.finish();
}

criterion_group!(benches, wlr_solve, pipeline);
criterion_main!(benches);
