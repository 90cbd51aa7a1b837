use std::collections::BTreeMap;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use hoikit::diffusion::{evaluate_windows, TrainConfig};
use hoikit::geometry::{encode_bps_with, sample_basis_points};
use hoikit::keyaction::{build_training_windows, extract_key_actions, JointWeights};
use hoikit::synth::{box_catalog, synth_dataset, SynthConfig};
use hoikit::tracking::{
    oracle_rollout, NoiseModel, RewardWeights, RolloutConfig, TerminationConfig,
};
use hoikit::Exec;

const MODES: [(&str, Exec); 2] = [
    ("sequential", Exec::Sequential),
    ("parallel", Exec::Parallel),
];

fn bench(c: &mut Criterion) {
    let corpus = synth_dataset(
        &SynthConfig {
            sequences: 24,
            ..Default::default()
        },
        Exec::Sequential,
    )
    .unwrap();
    let weights = JointWeights::default_for(corpus[0].skeleton());
    let (_, mesh) = box_catalog().remove(0);
    let basis = sample_basis_points(0, 1024, 1.0).unwrap();

    let mut g = c.benchmark_group("encode_bps");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| encode_bps_with(&mesh, &basis, exec).unwrap())
        });
    }
    g.finish();

    let mut g = c.benchmark_group("extract_corpus");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.try_map(&corpus, |s| extract_key_actions(s, 0.05, &weights))
                    .unwrap()
            })
        });
    }
    g.finish();

    let mut windows = vec![];
    for s in &corpus {
        let k = extract_key_actions(s, 0.05, &weights).unwrap();
        windows.extend(build_training_windows(s, &k, 8, 4).unwrap());
    }
    let mut geometry = BTreeMap::new();
    for (name, m) in box_catalog() {
        geometry.insert(
            name,
            Arc::new(
                encode_bps_with(&m, &basis, Exec::Sequential)
                    .unwrap()
                    .to_array(),
            ),
        );
    }
    let cfg = TrainConfig {
        iterations: 0,
        ..Default::default()
    };
    let (ckpt, _) = hoikit::diffusion::train(&windows, &geometry, &cfg, Exec::Sequential).unwrap();
    let mut g = c.benchmark_group("batch_loss");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evaluate_windows(&ckpt, &windows, &geometry, &cfg, 1, exec).unwrap())
        });
    }
    g.finish();

    let rc = RolloutConfig {
        weights: RewardWeights::uniform(corpus[0].skeleton().key_joints()),
        termination: TerminationConfig::default(),
        noise: NoiseModel::gaussian(0.01),
    };
    let kp = mesh.bbox_corners();
    let mut g = c.benchmark_group("rollouts");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.try_map(&corpus, |s| oracle_rollout(s, &kp, &rc, 3))
                    .unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
