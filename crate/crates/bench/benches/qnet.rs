use cmarl_bench::desk_net;
use cmarl_core::trainer::{Learner, TrainConfig};
use cmarl_core::{JointTransition, QNet, ReplayBuffer, Rng};
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

fn random_obs(len: usize, rng: &mut Rng) -> Vec<f32> {
    (0..len).map(|_| rng.uniform() as f32).collect()
}

fn forward_backward(c: &mut Criterion) {
    let mut group = c.benchmark_group("qnet");
    for agents in [1usize, 3, 5] {
        let net = QNet::new(desk_net(agents)).unwrap();
        let mut rng = Rng::seed_from_u64(1);
        let params = net.init_params(&mut rng);
        let obs_len = agents * net.config().observation_len();

        let single = random_obs(obs_len, &mut rng);
        group.bench_with_input(BenchmarkId::new("predict_1", agents), &agents, |b, _| {
            b.iter(|| net.predict(&params.values, black_box(&single), 1).unwrap())
        });

        let batch = random_obs(obs_len * 32, &mut rng);
        group.bench_with_input(BenchmarkId::new("forward_backward_32", agents), &agents, |b, _| {
            b.iter(|| {
                let (q, cache) = net.forward(&params.values, black_box(&batch), 32).unwrap();
                let dq = vec![1e-3; q.len()];
                net.backward(&params.values, &cache, &dq).unwrap()
            })
        });
    }
    group.finish();
}

fn train_step(c: &mut Criterion) {
    let net = QNet::new(desk_net(3)).unwrap();
    let mut rng = Rng::seed_from_u64(2);
    let params = net.init_params(&mut rng);
    let obs_len = net.config().observation_len();
    let mut buf = ReplayBuffer::new(256, 3, obs_len).unwrap();
    for i in 0..256 {
        buf.push(JointTransition {
            obs: random_obs(3 * obs_len, &mut rng),
            actions: vec![i % 6, (i + 1) % 6, (i + 2) % 6],
            rewards: vec![0.1, -0.2, 0.3],
            next_obs: random_obs(3 * obs_len, &mut rng),
            terminal: vec![false; 3],
            active: vec![true; 3],
        })
        .unwrap();
    }
    let mut learner = Learner::new(net, params, TrainConfig::default()).unwrap();
    c.bench_function("learner/train_step_3x32", |b| b.iter(|| learner.train_step(&buf, &mut rng).unwrap()));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = forward_backward, train_step
}
criterion_main!(benches);
