//! Random states, unitaries, POVMs and positive matrices.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::matkit::{c, ComplexMatrix, HermitianMatrix, RealSymMatrix, C64};
use crate::quantum::Povm;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Matrix of i.i.d. standard complex Gaussians.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| c(s * gaussian(rng), s * gaussian(rng)))
}

/// Gram–Schmidt on the columns (two passes). Requires full column rank.
pub fn orthonormalize_columns(m: &ComplexMatrix) -> ComplexMatrix {
    let (rows, cols) = (m.rows(), m.cols());
    let mut q: Vec<Vec<C64>> = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut v = m.column(j);
        for _ in 0..2 {
            for u in &q {
                let proj: C64 = u.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (vi, ui) in v.iter_mut().zip(u) {
                    *vi -= proj * ui;
                }
            }
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        q.push(v.into_iter().map(|z| z / n).collect());
    }
    ComplexMatrix::from_fn(rows, cols, |r, col| q[col][r])
}

/// Haar-distributed unitary.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ComplexMatrix {
    orthonormalize_columns(&complex_gaussian_matrix(n, n, rng))
}

/// `rows × cols` matrix with orthonormal columns, `rows ≥ cols`.
pub fn random_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    assert!(rows >= cols, "an isometry needs rows >= cols");
    orthonormalize_columns(&complex_gaussian_matrix(rows, cols, rng))
}

pub fn random_ket<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    random_isometry(dim, 1, rng).column(0)
}

/// Rank-one POVM with `outcomes ≥ dim` elements, `M_ξ = |v_ξ⟩⟨v_ξ|` where
/// `(v_ξ)_a` is the conjugate of row ξ of a random isometry.
pub fn random_exhaustive_povm<R: Rng + ?Sized>(dim: usize, outcomes: usize, copies: usize, rng: &mut R) -> Povm {
    let v = random_isometry(outcomes, dim, rng);
    let elements = (0..outcomes)
        .map(|xi| {
            let ket: Vec<C64> = (0..dim).map(|a| v[(xi, a)].conj()).collect();
            HermitianMatrix::ket_bra(&ket)
        })
        .collect();
    Povm::new(elements, copies).expect("non-empty POVM")
}

/// Random exhaustive POVM whose outcomes are merged into `groups` non-empty
/// blocks; elements generally have rank above one.
pub fn random_coarse_povm<R: Rng + ?Sized>(
    dim: usize,
    outcomes: usize,
    groups: usize,
    copies: usize,
    rng: &mut R,
) -> Povm {
    assert!(groups >= 1 && groups <= outcomes);
    let fine = random_exhaustive_povm(dim, outcomes, copies, rng);
    let mut assignment: Vec<usize> = (0..outcomes).map(|k| if k < groups { k } else { rng.gen_range(0..groups) }).collect();
    for k in (1..outcomes).rev() {
        let j = rng.gen_range(0..=k);
        assignment.swap(j, k);
    }
    let mut elements = vec![HermitianMatrix::zeros(dim); groups];
    for (e, &g) in fine.elements().iter().zip(&assignment) {
        elements[g] = &elements[g] + e;
    }
    Povm::new(elements, copies).expect("non-empty POVM")
}

/// Full-rank density matrix: a Ginibre state mixed with `I/d` at weight 0.1.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> HermitianMatrix {
    let g = complex_gaussian_matrix(dim, dim, rng);
    let gg = HermitianMatrix::symmetrized(&g * &g.adjoint());
    let rho = gg.scale(0.9 / gg.trace());
    &rho + &HermitianMatrix::identity(dim).scale(0.1 / dim as f64)
}

pub fn random_unit_vector<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let n = crate::matkit::norm(&v);
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

pub fn random_unit_vector3<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    let v = random_unit_vector(3, rng);
    [v[0], v[1], v[2]]
}

/// Uniform point in the ball of the given radius.
pub fn random_ball_point<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> [f64; 3] {
    let dir = random_unit_vector3(rng);
    let r = radius * rng.gen::<f64>().cbrt();
    dir.map(|x| r * x)
}

/// Random symmetric positive definite matrix `AAᵀ/p + floor·I`.
pub fn random_spd<R: Rng + ?Sized>(dim: usize, floor: f64, rng: &mut R) -> RealSymMatrix {
    let a: Vec<f64> = (0..dim * dim).map(|_| gaussian(rng)).collect();
    RealSymMatrix::from_fn(dim, |i, j| {
        let s: f64 = (0..dim).map(|k| a[i * dim + k] * a[j * dim + k]).sum();
        s / dim as f64 + if i == j { floor } else { 0.0 }
    })
}
