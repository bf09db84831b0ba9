mod common;

use phi4_core::cv::ansatz::{AnsatzConfig, Backend, PairCircuit};
use phi4_core::cv::energy::evaluate;
use phi4_core::LatticeSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn blockwise_energy_matches_dense_lattice() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let spec = LatticeSpec::with_lambda_tilde(4, 0.3, rng.random_range(5.0..80.0)).unwrap();
        let cfg = AnsatzConfig {
            backend: Backend::Direct,
            cutoff: 4,
            pair_circuit: PairCircuit::TwoModeSqueezer,
            ..AnsatzConfig::new(rng.random_range(0.2..0.8), rng.random_range(-1.0..1.0), &spec).with_all_modes(&spec)
        };
        let block = evaluate(&cfg, &spec).unwrap().energy();
        let dense = common::dense_energy_l4(&cfg, &spec);
        worst = worst.max((block - dense).abs());
    }
    assert!(worst < 1e-10, "max abs error {worst:e}");
}
