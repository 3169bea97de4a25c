use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use qcrb::design::{design_mixed_qubit, mixed_qubit_helstrom};
use qcrb::estimation::*;
use qcrb::information::{InfoKind, InfoMatrix};
use qcrb::matkit::{dot, norm};
use qcrb::quantum::{BlochVector, FullMixedQubit, PureQubitPolar};
use qcrb::random::{random_ball_point, random_spd};

fn mixed_config(copies: usize, seed: u64) -> ProtocolConfig {
    let mut c = ProtocolConfig::new(ModelKind::MixedFull, copies, TargetSpec::HelstromFraction { fraction: 1.0 / 3.0 });
    c.seed = seed;
    c
}

fn mean_and_stderr(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn stage2_inverts_exact_means(s in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let theta0 = BlochVector::new(random_ball_point(0.9, &mut rng)).unwrap();
        let h = mixed_qubit_helstrom(&theta0.coords()).unwrap();
        let g = random_spd(3, 0.05, &mut rng);
        let g = g.scale(0.9 / h.inv().unwrap().trace_product(&g));
        let design = design_mixed_qubit(&InfoMatrix::new(InfoKind::Target, g).unwrap(), &theta0).unwrap();
        let truth = random_ball_point(0.95, &mut rng);
        let eta = design.directions.map(|m| dot(&m, &truth));
        let hat = stage2_estimate(&design, &eta).unwrap();
        for k in 0..3 {
            prop_assert!((hat[k] - truth[k]).abs() <= 1e-10);
        }
    }

    #[test]
    fn stage1_stays_in_the_ball(plus in prop::array::uniform3(0u32..50), minus in prop::array::uniform3(1u32..50)) {
        let counts = Stage1Counts { plus: plus.map(f64::from), minus: minus.map(f64::from) };
        let est = stage1_estimate(&counts, ModelKind::MixedFull, OutOfBallPolicy::Project).unwrap();
        prop_assert!(!est.discarded);
        prop_assert!(est.theta_tilde.norm() < 1.0);
        let raw_norm = norm(&est.raw);
        if raw_norm < PROJECTION_RADIUS {
            prop_assert_eq!(est.theta_tilde.coords(), est.raw);
        }
        let discard = stage1_estimate(&counts, ModelKind::MixedFull, OutOfBallPolicy::Discard).unwrap();
        prop_assert_eq!(discard.discarded, raw_norm > 1.0);
    }

    #[test]
    fn wrapped_angles(x in -100.0f64..100.0) {
        let w = wrap_angle(x);
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        let turns = (x - w) / std::f64::consts::TAU;
        prop_assert!((turns - turns.round()).abs() < 1e-9);
    }
}

#[test]
fn noiseless_protocol_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(401);
    for _ in 0..20 {
        let theta = random_ball_point(0.9, &mut rng);
        let r = run_protocol_noiseless(&mixed_config(10_000, 0), &theta).unwrap();
        assert_eq!(r.status, TrialStatus::Accepted);
        for k in 0..3 {
            assert!((r.theta_hat[k] - theta[k]).abs() < 1e-10);
        }
    }
    let mut pure = ProtocolConfig::new(ModelKind::PureFull, 10_000, TargetSpec::HelstromFraction { fraction: 0.5 });
    pure.seed = 3;
    let r = run_protocol_noiseless(&pure, &[1.1, -2.0]).unwrap();
    assert!((r.theta_hat[0] - 1.1).abs() < 1e-10 && (r.theta_hat[1] + 2.0).abs() < 1e-10);
}

#[test]
fn monte_carlo_is_deterministic_across_thread_counts() {
    let config = mixed_config(2_000, 77);
    let theta = [0.1, -0.2, 0.4];
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| monte_carlo_mqe(&config, &theta, 500).unwrap())
    };
    let a = run(1);
    let b = run(3);
    let c = monte_carlo_mqe(&config, &theta, 500).unwrap();
    for other in [&b, &c] {
        assert_eq!(a.v_hat, other.v_hat);
        assert_eq!(a.stderr, other.stderr);
        assert_eq!(a.discard_rate, other.discard_rate);
    }
    let different = monte_carlo_mqe(&mixed_config(2_000, 78), &theta, 500).unwrap();
    assert_ne!(a.v_hat, different.v_hat);
}

#[test]
fn stage1_and_final_estimates_are_unbiased() {
    let config = mixed_config(10_000, 402);
    let theta = [0.3, -0.2, 0.35];
    let results = run_trials(&config, &theta, 10_000).unwrap();
    assert!(results.iter().all(|r| r.status == TrialStatus::Accepted));
    for k in 0..3 {
        let (m, se) = mean_and_stderr(results.iter().map(|r| r.theta_tilde.coords()[k]));
        assert!((m - theta[k]).abs() <= 4.0 * se, "stage 1 axis {k}: {m} ± {se}");
        let (m, se) = mean_and_stderr(results.iter().map(|r| r.theta_hat[k]));
        assert!((m - theta[k]).abs() <= 4.0 * se, "final axis {k}: {m} ± {se}");
    }
}

#[test]
fn discard_rate_is_small_inside_the_ball() {
    let mut config = mixed_config(10_000, 403);
    config.policy = OutOfBallPolicy::Discard;
    let s = 0.8 / 3f64.sqrt();
    for theta in [[0.0, 0.0, 0.8], [s, s, -s], [0.0, 0.0, 0.0]] {
        let est = monte_carlo_mqe(&config, &theta, 2_000).unwrap();
        assert!(est.discard_rate < 0.01, "{theta:?}: {}", est.discard_rate);
    }
}

#[test]
fn stage2_matches_grid_likelihood_maximum() {
    let config = mixed_config(100_000, 404);
    let theta = [0.0, 0.0, 0.5];
    let step = 1e-3;
    for t in 0..20 {
        let r = run_protocol(&config, &theta, t).unwrap();
        let h = mixed_qubit_helstrom(&r.theta_tilde.coords()).unwrap();
        let design = design_mixed_qubit(&config.target.at(&h).unwrap(), &r.theta_tilde).unwrap();
        let povm = design.realize_povm();
        let n2 = config.stage2_copies() as f64;
        let counts: Vec<f64> = povm
            .labels()
            .iter()
            .map(|label| {
                if label == "idle" {
                    return n2 - r.allocations.iter().sum::<f64>();
                }
                let k: usize = label[..1].parse::<usize>().unwrap() - 1;
                let sign = if label.ends_with('+') { 1.0 } else { -1.0 };
                (r.allocations[k] * (1.0 + sign * r.frequencies[k]) / 2.0).round()
            })
            .collect();
        let grid = GridSpec::centered(&theta, 0.03, step);
        let mle = grid_mle(&FullMixedQubit, &povm, &counts, &grid).unwrap();
        for k in 0..3 {
            assert!((mle[k] - r.theta_hat[k]).abs() <= 2.0 * step, "trial {t}: {mle:?} vs {:?}", r.theta_hat);
        }
    }
}

#[test]
fn multinomial_allocation_runs() {
    let mut config = mixed_config(10_000, 405);
    config.allocation = Allocation::Multinomial;
    let theta = [0.0, 0.0, 0.5];
    let est = monte_carlo_mqe(&config, &theta, 4_000).unwrap();
    let h = mixed_qubit_helstrom(&theta).unwrap();
    let w = h.inv().unwrap().scale(3.0);
    let scaled = est.scaled(config.copies);
    let rel = (&scaled - &w).frobenius_norm() / w.frobenius_norm();
    assert!(rel < 0.1, "{rel}");
    assert_eq!(est.discard_rate, 0.0);
}

#[test]
fn pure_protocol_behaves() {
    let mut config = ProtocolConfig::new(ModelKind::PureFull, 10_000, TargetSpec::CostHelstrom { fraction: 0.25 });
    config.seed = 406;
    config.validate().unwrap();
    let est = monte_carlo_mqe(&config, &[1.0, 0.5], 2_000).unwrap();
    // the chart at θ̃ has H = 1, so tr H⁻¹(NV)⁻¹ ≈ 1 in polar coordinates too
    let h = qcrb::information::helstrom_matrix(&PureQubitPolar, &[1.0, 0.5]).unwrap();
    let t = h.matrix.inv().unwrap().trace_product(&est.scaled(config.copies).inv().unwrap());
    assert!((t - 1.0).abs() < 0.1, "{t}");

    config.copies = 1_000;
    let perfect = covariant_cost_experiment(&config, 100, CovariantEstimator::Perfect).unwrap();
    assert!((perfect.mean_cost - 1.0).abs() < 1e-12);
    let antipodal = covariant_cost_experiment(&config, 100, CovariantEstimator::Antipodal).unwrap();
    assert!(antipodal.mean_cost.abs() < 1e-12);
}

#[test]
fn configs_reject_bad_inputs() {
    let mut config = mixed_config(10, 0);
    config.exponent = 1.0;
    assert!(matches!(config.validate(), Err(qcrb::Error::Config(_))));
    let too_strong = ProtocolConfig::new(ModelKind::MixedFull, 1_000, TargetSpec::HelstromFraction { fraction: 0.5 });
    assert!(matches!(too_strong.validate(), Err(qcrb::Error::Target(_))));
    assert!(run_protocol(&mixed_config(1_000, 0), &[0.9, 0.9, 0.0], 0).is_err());
    let text = serde_json::to_string(&mixed_config(1_000, 9)).unwrap();
    assert_eq!(serde_json::from_str::<ProtocolConfig>(&text).unwrap(), mixed_config(1_000, 9));
}
