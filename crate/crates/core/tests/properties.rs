use fbmlab_core::kernels::kernel_values;
use fbmlab_core::local_time::{center, edwards_weight, heat_kernel, local_time_approx};
use fbmlab_core::mean::mean_local_time;
use fbmlab_core::path_io::{read_binary, write_binary};
use fbmlab_core::{fbm_covariance, increment_covariance, FbmGenerator, Method, ModelParams, Path, TimeGrid, TimeQuad};
use proptest::prelude::*;

fn quad() -> impl Strategy<Value = TimeQuad> {
    prop::array::uniform4(0.0f64..1.0).prop_filter_map("distinct", |mut v| {
        v.sort_by(f64::total_cmp);
        let [a, b, c, d] = v;
        let (s, t, s2, t2) = (a, b.max(c), b.min(c), d);
        (t - s > 1e-6 && t2 - s2 > 1e-6).then(|| TimeQuad::new(s, t, s2, t2).ok()).flatten()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn covariance_symmetric(s in 0.0f64..5.0, t in 0.0f64..5.0, h in 0.05f64..0.95) {
        prop_assert_eq!(fbm_covariance(s, t, h).unwrap(), fbm_covariance(t, s, h).unwrap());
    }

    #[test]
    fn increment_covariance_is_additive(
        s in 0.0f64..1.0, u in 0.0f64..1.0, t in 0.0f64..1.0, a in 0.0f64..1.0, b in 0.0f64..1.0, h in 0.1f64..0.9
    ) {
        let whole = increment_covariance(s, s + u + t, a, a + b, h).unwrap();
        let split = increment_covariance(s, s + u, a, a + b, h).unwrap()
            + increment_covariance(s + u, s + u + t, a, a + b, h).unwrap();
        prop_assert!((whole - split).abs() < 1e-12);
    }

    #[test]
    fn determinant_nonnegative(tau in quad(), h in 0.1f64..0.9) {
        let k = kernel_values(&tau, h).unwrap();
        prop_assert!(k.delta >= -1e-12 * k.lambda * k.rho);
        prop_assert!(k.mu.abs() <= (k.lambda * k.rho).sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn heat_kernel_peaks_at_origin(x in prop::collection::vec(-3.0f64..3.0, 1..4), eps in 0.01f64..2.0) {
        let d = x.len();
        prop_assert!(heat_kernel(&x, eps, d).unwrap() <= heat_kernel(&vec![0.0; d], eps, d).unwrap());
    }

    #[test]
    fn local_time_weights(seed in 0u64..1000, g in 0.0f64..50.0) {
        let p = ModelParams::new(2, 0.4, 1.0).unwrap();
        let path = FbmGenerator::new(p, TimeGrid::new(32, 1.0).unwrap(), Method::Fast).unwrap().sample(seed, 0);
        let est = local_time_approx(&path, 0.1).unwrap();
        prop_assert!(est.value >= 0.0);
        let w = edwards_weight(&est, g, false).unwrap();
        prop_assert!(w.weight > 0.0 && w.weight <= 1.0);
        let c = center(&est, 0.2);
        prop_assert_eq!(c.centered, est.value - 0.2);
    }

    #[test]
    fn binary_round_trip(seed in 0u64..1000, d in 1usize..4, n in 1usize..40) {
        let p = ModelParams::new(d, 0.3, 2.0).unwrap();
        let path = FbmGenerator::new(p, TimeGrid::new(n, 2.0).unwrap(), Method::Fast).unwrap().sample(seed, 5);
        let mut buf = Vec::new();
        write_binary(&path, &mut buf).unwrap();
        let back: Path = read_binary(buf.as_slice()).unwrap();
        prop_assert_eq!(back.values(), path.values());
        prop_assert_eq!(back.seed, seed);
    }
}

#[test]
fn mean_decreases_in_eps() {
    let p = ModelParams::new(2, 0.4, 1.0).unwrap();
    let means: Vec<f64> = [0.01, 0.05, 0.1, 0.5, 1.0].iter().map(|&e| mean_local_time(&p, e).unwrap()).collect();
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
}

#[test]
fn dense_and_fast_agree_in_law() {
    let p = ModelParams::new(1, 0.3, 1.0).unwrap();
    let grid = TimeGrid::new(16, 1.0).unwrap();
    let paths = 4000;
    for method in [Method::Dense, Method::Fast] {
        let gen = FbmGenerator::new(p, grid, method).unwrap();
        let (mut sum, mut sq) = (0.0, 0.0);
        for i in 0..paths {
            let x = gen.sample(3, i).values()[16];
            sum += x;
            sq += x * x;
        }
        let var = sq / paths as f64 - (sum / paths as f64).powi(2);
        let se = (2.0 / paths as f64).sqrt();
        assert!((var - 1.0).abs() < 4.0 * se, "{method:?}: {var}");
    }
}
