use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skillrecall_core::fm::GibbsConfig;
use skillrecall_core::synth::{self, SyntheticConfig};
use skillrecall_core::*;
use std::hint::black_box;

fn small_config() -> SyntheticConfig {
    SyntheticConfig {
        students: 100,
        interactions_per_student: 100,
        ..SyntheticConfig::default()
    }
}

fn encoding(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut t = 0.0;
    let history: Vec<(f64, bool)> = (0..500)
        .map(|_| {
            t += rng.random_range(0.0..3.0);
            (t, rng.random_bool(0.6))
        })
        .collect();
    let windows = WindowSet::default();
    c.bench_function("window_counts/500", |b| {
        b.iter(|| window_counts(black_box(&history), t + 1.0, &windows))
    });

    let (_, ds) = synth::generate(&small_config()).unwrap();
    let spec = ModelSpec::new(ModelFamily::Das3h, 0, WindowSet::default()).unwrap();
    c.bench_function("encode_dataset/das3h/10k", |b| {
        b.iter(|| encode_dataset(black_box(&ds), &spec).unwrap())
    });
}

fn scoring(c: &mut Criterion) {
    let (_, ds) = synth::generate(&small_config()).unwrap();
    let spec = ModelSpec::new(ModelFamily::Das3h, 5, WindowSet::default()).unwrap();
    let design = encode_dataset(&ds, &spec).unwrap();
    let n = design.n_features();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut params = FMParams::zeros(n, 5);
    params.linear_weights.iter_mut().for_each(|w| *w = rng.random_range(-1.0..1.0));
    params.embeddings.iter_mut().for_each(|w| *w = rng.random_range(-0.1..0.1));
    c.bench_function("fm_score/d5/10k", |b| {
        b.iter(|| design.rows.iter().map(|r| fm_score(&params, r).unwrap()).sum::<f64>())
    });

    let scores: Vec<f64> = (0..100_000).map(|_| rng.random()).collect();
    let labels: Vec<bool> = (0..100_000).map(|_| rng.random_bool(0.5)).collect();
    c.bench_function("auc/100k", |b| b.iter(|| auc(black_box(&scores), &labels).unwrap()));
}

fn fitting(c: &mut Criterion) {
    let (_, ds) = synth::generate(&small_config()).unwrap();
    let mut group = c.benchmark_group("fit");
    group.sample_size(10);

    let spec = ModelSpec::new(ModelFamily::Das3h, 0, WindowSet::default()).unwrap();
    let design = encode_dataset(&ds, &spec).unwrap();
    let labels = design.labels();
    group.bench_function("logistic/das3h/10k", |b| {
        b.iter(|| fit_logistic(&design.rows, &labels, design.n_features(), &LogisticConfig::default()).unwrap())
    });

    let spec = ModelSpec::new(ModelFamily::Das3h, 5, WindowSet::default()).unwrap();
    let design = encode_dataset(&ds, &spec).unwrap();
    let groups = design.layout.feature_groups();
    let config = GibbsConfig {
        iterations: 20,
        burn_in: 10,
        ..GibbsConfig::default()
    };
    group.bench_function("gibbs/das3h/d5/20iter", |b| {
        b.iter(|| fit_fm_gibbs(&design.rows, &labels, design.n_features(), &groups, 5, &config).unwrap())
    });
    group.finish();
}

criterion_group!(benches, encoding, scoring, fitting);
criterion_main!(benches);
