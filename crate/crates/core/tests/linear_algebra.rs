use proptest::prelude::*;

use qcrb::matkit::{c, tensor, ComplexMatrix, HermitianMatrix, RealSymMatrix};

fn hermitian(n: usize) -> impl Strategy<Value = HermitianMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n)
        .prop_map(move |v| {
            let m = ComplexMatrix::new(n, n, v.into_iter().map(|(re, im)| c(re, im)).collect()).unwrap();
            HermitianMatrix::symmetrized(&m + &m.adjoint())
        })
}

fn psd(n: usize) -> impl Strategy<Value = HermitianMatrix> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
        let m = ComplexMatrix::new(n, n, v.into_iter().map(|(re, im)| c(re, im)).collect()).unwrap();
        let g = HermitianMatrix::symmetrized(&m * &m.adjoint());
        &g + &HermitianMatrix::identity(n).scale(0.1)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eig_reconstructs(a in (1usize..7).prop_flat_map(hermitian)) {
        let e = a.eig().unwrap();
        let back = e.reassemble(|x| x);
        prop_assert!((back.as_matrix() - a.as_matrix()).max_abs() <= 1e-10 * a.as_matrix().max_abs().max(1.0));
        prop_assert!(e.values.windows(2).all(|w| w[0] <= w[1]));
        let v = &e.vectors;
        let gram = &v.adjoint() * v;
        prop_assert!((&gram - &ComplexMatrix::identity(a.dim())).max_abs() < 1e-12);
    }

    #[test]
    fn psd_functions(a in (1usize..6).prop_flat_map(psd)) {
        let s = a.sqrt().unwrap();
        prop_assert!((&(&s * &s) - a.as_matrix()).max_abs() < 1e-10);
        let inv = a.inv().unwrap();
        prop_assert!((&(&inv * &a) - &ComplexMatrix::identity(a.dim())).max_abs() < 1e-9);
        let is = a.inv_sqrt().unwrap();
        let prod = &(&(&is * &a).clone() * is.as_matrix()) - &ComplexMatrix::identity(a.dim());
        prop_assert!(prod.max_abs() < 1e-9);
    }

    #[test]
    fn kron_mixed_product(a in hermitian(2), b in hermitian(3), x in hermitian(2), y in hermitian(3)) {
        // (A ⊗ B)(X ⊗ Y) = AX ⊗ BY
        let lhs = &tensor(a.as_matrix(), b.as_matrix()).unwrap() * &tensor(x.as_matrix(), y.as_matrix()).unwrap();
        let rhs = tensor(&(&a * &x), &(&b * &y)).unwrap();
        prop_assert!((&lhs - &rhs).max_abs() < 1e-12);
    }

    #[test]
    fn real_sym_inverse(rows in prop::collection::vec(-1.0f64..1.0, 16)) {
        let m = RealSymMatrix::from_fn(4, |i, j| {
            let s: f64 = (0..4).map(|k| rows[i * 4 + k] * rows[j * 4 + k]).sum();
            s + if i == j { 0.2 } else { 0.0 }
        });
        let inv = m.inv().unwrap();
        for i in 0..4 {
            let col: Vec<f64> = (0..4).map(|j| inv.get(j, i)).collect();
            let back = m.matvec(&col);
            for (j, v) in back.iter().enumerate() {
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((v - expected).abs() < 1e-9);
            }
        }
        let half = m.sqrt().unwrap();
        prop_assert!((&half.congruence(&RealSymMatrix::identity(4)) - &half).max_abs() < 1e-15);
        prop_assert!((&RealSymMatrix::identity(4).congruence(&half) - &m).max_abs() < 1e-10);
    }
}

#[test]
fn degenerate_spectrum() {
    let a = HermitianMatrix::from_real_diagonal(&[2.0, 2.0, 2.0, -1.0]);
    let e = a.eig().unwrap();
    assert_eq!(e.values, vec![-1.0, 2.0, 2.0, 2.0]);
}

#[test]
fn real_sym_serde_round_trip() {
    let m = RealSymMatrix::from_rows(&[vec![1.0, 0.25], vec![0.25, 3.0]]).unwrap();
    let text = serde_json::to_string(&m).unwrap();
    assert_eq!(text, "[[1.0,0.25],[0.25,3.0]]");
    assert_eq!(serde_json::from_str::<RealSymMatrix>(&text).unwrap(), m);
    assert!(serde_json::from_str::<RealSymMatrix>("[[1.0,0.5],[0.0,1.0]]").is_err());
}
