use cmarl_bench::{desk_env, desk_net, volume, LANDMARKS};
use cmarl_core::QNet;

#[test]
fn fixtures_are_consistent() {
    let env = desk_env();
    env.validate().unwrap();
    for n in [1, 3, 5] {
        let net = QNet::new(desk_net(n)).unwrap();
        assert_eq!(net.config().observation_len(), env.observation_len());
    }
    let v = volume(0);
    assert!(LANDMARKS.iter().all(|l| v.landmark(l).is_some()));
}
