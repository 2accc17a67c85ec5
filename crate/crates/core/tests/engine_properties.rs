use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use imager_core::fock::max_engine_deviation;
use imager_core::imaging::{calibrate, difference_image, sum_image, sweep};
use imager_core::mode_space::build_mode_grid;
use imager_core::{BoundaryPolicy, Camera, Envelope, ObjectMap, OpticalConfig, Transmission};

fn random_map(seed: u64, n: usize, pitch: f64) -> ObjectMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n * n)
        .map(|_| Complex64::from_polar(rng.gen_range(0.0..=1.0), rng.gen_range(-PI..PI)))
        .collect();
    ObjectMap::new(n, n, pitch, values, BoundaryPolicy::Transparent).unwrap()
}

fn config(phases: [f64; 3], amps: [f64; 2], envelope: Envelope) -> OpticalConfig {
    let mut c = OpticalConfig::default();
    c.delta_s0 = phases[0];
    c.phi_i0 = phases[1];
    c.c0_prime = phases[2];
    c.pump_amplitudes = amps;
    c.envelope = envelope;
    c
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn oracle_matches_engine(
        seed in any::<u64>(),
        n in 1usize..4,
        d in -PI..PI, p in -PI..PI, c0 in -PI..PI,
        v2 in 0.05f64..1.5,
        sinc in any::<bool>(),
    ) {
        let envelope = if sinc { Envelope::Sinc } else { Envelope::Strict };
        let cfg = config([d, p, c0], [1.0, v2], envelope);
        let camera = Camera::new(n, n, 4e-4).unwrap();
        let grid = build_mode_grid(&cfg, &camera).unwrap();
        let obj = random_map(seed, n + 2, 4e-4);
        let phases: Vec<f64> = sweep(8).collect();
        let dev = max_engine_deviation(&cfg, &obj, &grid, &phases).unwrap();
        prop_assert!(dev < 1e-10, "deviation {dev}");
    }

    #[test]
    fn sum_and_difference_identities(
        seed in any::<u64>(),
        d in -PI..PI, p in -PI..PI, c0 in -PI..PI,
        v1 in 0.1f64..2.0, v2 in 0.1f64..2.0,
    ) {
        let cfg = config([d, p, c0], [v1, v2], Envelope::Strict);
        let camera = Camera::new(12, 10, 2e-5).unwrap();
        let grid = build_mode_grid(&cfg, &camera).unwrap();
        let obj = random_map(seed, 14, 2e-5);
        let cal = calibrate(&cfg, 32).unwrap();
        let sum = sum_image(&grid, &obj, &cfg, &cal);
        let diff = difference_image(&grid, &obj, &cfg, &cal);
        let background = v1 * v1 + v2 * v2;
        for (k, e) in grid.entries.iter().enumerate() {
            prop_assert!((sum.rates[k] - 2.0 * background).abs() < 1e-12 * background.max(1.0));
            let t = obj.sample(e.object_point).t;
            let arg = if t.norm() == 0.0 { 0.0 } else { t.arg() };
            let expected = 4.0 * v1 * v2 * t.norm() * arg.cos();
            prop_assert!((diff.rates[k] - expected).abs() < 1e-11, "{} vs {expected}", diff.rates[k]);
        }
    }
}
