use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qcrb::design::*;
use qcrb::information::{fisher_information, gill_massar_trace, helstrom_matrix, InfoKind, InfoMatrix};
use qcrb::matkit::{norm, RealSymMatrix};
use qcrb::quantum::{BlochVector, FullMixedQubit, Povm, PureQubitTangent};
use qcrb::random::{random_ball_point, random_spd, random_unit_vector3};

fn info(kind: InfoKind, m: RealSymMatrix) -> InfoMatrix {
    InfoMatrix::new(kind, m).unwrap()
}

fn random_target<R: Rng>(h: &RealSymMatrix, rng: &mut R) -> RealSymMatrix {
    let s = random_spd(h.dim(), 0.02, rng);
    let t = rng.gen_range(0.2..=1.0);
    s.scale(t / h.inv().unwrap().trace_product(&s))
}

fn realised_fisher(design: &MixedQubitDesign) -> RealSymMatrix {
    let m = design.realize_povm();
    fisher_information(&m, &FullMixedQubit, &design.theta0.coords(), 1).unwrap().matrix
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn design_realises_target(s in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let theta = BlochVector::new(random_ball_point(0.9, &mut rng)).unwrap();
        let h = mixed_qubit_helstrom(&theta.coords()).unwrap();
        let g = random_target(&h, &mut rng);
        let design = design_mixed_qubit(&info(InfoKind::Target, g.clone()), &theta).unwrap();
        prop_assert!(design.weight_sum() <= 1.0 + 1e-12);
        prop_assert!((&realised_fisher(&design) - &g).max_abs() <= 1e-9);
    }

    #[test]
    fn spin_measurements_saturate(s in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let theta = random_ball_point(0.95, &mut rng);
        let m = Povm::spin(&random_unit_vector3(&mut rng));
        let h = helstrom_matrix(&FullMixedQubit, &theta).unwrap();
        let i = fisher_information(&m, &FullMixedQubit, &theta, 1).unwrap();
        prop_assert!((gill_massar_trace(&h, &i).unwrap() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn w_opt_is_optimal(s in any::<u64>(), d in 2usize..=4) {
        let mut rng = ChaCha8Rng::seed_from_u64(s);
        let p = 3;
        let h = random_spd(p, 0.1, &mut rng);
        let c = random_spd(p, 0.05, &mut rng);
        let opt = optimal_scaled_mqe(&info(InfoKind::Cost, c.clone()), &info(InfoKind::Helstrom, h.clone()), d).unwrap();
        let h_inv = h.inv().unwrap();
        let constraint = h_inv.trace_product(&opt.w_opt.matrix.inv().unwrap());
        prop_assert!((constraint - (d - 1) as f64).abs() <= 1e-9);
        let cost = c.trace_product(&opt.w_opt.matrix);
        prop_assert!((cost - opt.min_cost).abs() <= 1e-9 * opt.min_cost.max(1.0));
        for _ in 0..20 {
            // feasible competitor: any SPD matrix rescaled onto the constraint
            let a = random_spd(p, 0.01, &mut rng);
            let scale = h_inv.trace_product(&a.inv().unwrap()) / (d - 1) as f64;
            let w = a.scale(scale);
            prop_assert!(c.trace_product(&w) >= opt.min_cost * (1.0 - 1e-10));
        }
    }
}

#[test]
fn degenerate_spectrum_is_basis_independent() {
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    for _ in 0..50 {
        let theta = BlochVector::new(random_ball_point(0.9, &mut rng)).unwrap();
        let h = mixed_qubit_helstrom(&theta.coords()).unwrap();
        let h_half = h.sqrt().unwrap();
        // F = 0.4(I - vvᵀ) + 0.15 vvᵀ has a doubly degenerate top eigenvalue
        let v = random_unit_vector3(&mut rng);
        let f = &RealSymMatrix::identity(3).scale(0.4) - &RealSymMatrix::outer(&v).scale(0.25);
        let g = f.congruence(&h_half);
        let design = design_mixed_qubit(&info(InfoKind::Target, g.clone()), &theta).unwrap();
        assert!((design.gammas[0] - 0.4).abs() < 1e-12 && (design.gammas[1] - 0.4).abs() < 1e-12);
        assert!((&realised_fisher(&design) - &g).max_abs() <= 1e-9);

        // any rotation inside the degenerate cluster realises the same G
        let alpha = rng.gen_range(0.0..std::f64::consts::TAU);
        let (s, c) = alpha.sin_cos();
        let mut rotated = design.clone();
        for k in 0..3 {
            rotated.eigvecs[0][k] = c * design.eigvecs[0][k] + s * design.eigvecs[1][k];
            rotated.eigvecs[1][k] = -s * design.eigvecs[0][k] + c * design.eigvecs[1][k];
        }
        for k in 0..2 {
            let m = h_half.matvec(&rotated.eigvecs[k]);
            let n = norm(&m);
            rotated.directions[k] = std::array::from_fn(|j| m[j] / n);
        }
        assert!((&realised_fisher(&rotated) - &g).max_abs() <= 1e-9);
    }
}

#[test]
fn pure_design_realises_target() {
    let mut rng = ChaCha8Rng::seed_from_u64(302);
    for _ in 0..50 {
        let n = random_unit_vector3(&mut rng);
        let g = random_target(&RealSymMatrix::identity(2), &mut rng);
        let design = design_pure_qubit(&info(InfoKind::Target, g.clone()), &n).unwrap();
        let model = PureQubitTangent::at_bloch(&n);
        let i = fisher_information(&design.realize_povm(), &model, &[0.0, 0.0], 1).unwrap();
        assert!((&i.matrix - &g).max_abs() <= 1e-9, "{:?}", i.matrix);
    }
}

#[test]
fn inadmissible_targets_are_rejected() {
    let theta = BlochVector::new([0.0, 0.0, 0.5]).unwrap();
    let h = mixed_qubit_helstrom(&theta.coords()).unwrap();
    let too_big = h.scale(0.5);
    assert!(matches!(
        design_mixed_qubit(&info(InfoKind::Target, too_big), &theta),
        Err(qcrb::Error::Target(_))
    ));
    assert!(matches!(mixed_qubit_helstrom(&[0.0, 0.0, 1.0]), Err(qcrb::Error::Boundary { .. })));
}

#[test]
fn cost_h_recovers_known_minimum() {
    // C = H: W = (p/(d-1)) H⁻¹ and tr(CW) = p²/(d-1)
    let h = mixed_qubit_helstrom(&[0.1, 0.2, 0.3]).unwrap();
    let opt = optimal_scaled_mqe(&info(InfoKind::Cost, h.clone()), &info(InfoKind::Helstrom, h.clone()), 2).unwrap();
    assert!((opt.min_cost - 9.0).abs() < 1e-10);
    assert!((&opt.w_opt.matrix - &h.inv().unwrap().scale(3.0)).max_abs() < 1e-10);
}

#[test]
fn design_json_round_trip() {
    let theta = BlochVector::new([0.2, -0.1, 0.4]).unwrap();
    let h = mixed_qubit_helstrom(&theta.coords()).unwrap();
    let design = design_mixed_qubit(&info(InfoKind::Target, h.scale(1.0 / 3.0)), &theta).unwrap();
    let text = serde_json::to_string(&design).unwrap();
    let back: MixedQubitDesign = serde_json::from_str(&text).unwrap();
    assert_eq!(back, design);
}
