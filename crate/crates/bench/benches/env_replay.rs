use cmarl_bench::{desk_env, volume, LANDMARKS};
use cmarl_core::environment::{extract_roi, Action};
use cmarl_core::{Environment, JointTransition, Mode, ReplayBuffer, Rng};
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn environment(c: &mut Criterion) {
    let vol = volume(3);
    let cfg = desk_env();
    let targets: Vec<String> = LANDMARKS.iter().map(|s| s.to_string()).collect();

    let mut roi = vec![0f32; cfg.roi_voxels()];
    c.bench_function("env/extract_roi_9", |b| {
        b.iter(|| extract_roi(&vol, black_box([30, 31, 32]), 2, cfg.roi_size, &mut roi))
    });

    let mut rng = Rng::seed_from_u64(4);
    c.bench_function("env/step_3_agents", |b| {
        b.iter_batched(
            || Environment::reset(&vol, &targets, &cfg, Mode::Train, &mut rng).unwrap(),
            |mut env| {
                let actions = [Action::from_index(0).unwrap(), Action::from_index(2).unwrap(), Action::from_index(4).unwrap()];
                env.step(&actions).unwrap();
                env
            },
            criterion::BatchSize::SmallInput,
        )
    });
}

fn replay(c: &mut Criterion) {
    let cfg = desk_env();
    let obs_len = cfg.observation_len();
    let mut buf = ReplayBuffer::new(4096, 3, obs_len).unwrap();
    let obs = vec![0.5f32; 3 * obs_len];
    for i in 0..4096 {
        buf.push(JointTransition {
            obs: obs.clone(),
            actions: vec![i % 6; 3],
            rewards: vec![0.0; 3],
            next_obs: obs.clone(),
            terminal: vec![false; 3],
            active: vec![true; 3],
        })
        .unwrap();
    }
    let mut rng = Rng::seed_from_u64(5);
    c.bench_function("replay/sample_32", |b| b.iter(|| buf.sample(32, &mut rng).unwrap()));
}

criterion_group!(benches, environment, replay);
criterion_main!(benches);
