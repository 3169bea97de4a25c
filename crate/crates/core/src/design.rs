//! Optimal measurement designs for qubit models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::information::{InfoKind, InfoMatrix};
use crate::matkit::{c, norm, HermitianMatrix, RealSymMatrix, C64};
use crate::quantum::{spin_projector, BlochVector, Povm, TangentFrame};

/// Slack on `tr(H⁻¹G) ≤ 1`.
pub const TARGET_TOL: f64 = 1e-12;
/// Above this condition number of H the C-side formula is used.
pub const H_CONDITION_SWITCH: f64 = 1e8;

/// `H(θ) = I + θθᵀ/(1 - |θ|²)` for the full mixed qubit chart.
pub fn mixed_qubit_helstrom(theta: &[f64; 3]) -> Result<RealSymMatrix> {
    let r2: f64 = theta.iter().map(|t| t * t).sum();
    if r2 >= 1.0 {
        return Err(Error::Boundary { norm: r2.sqrt() });
    }
    Ok(RealSymMatrix::from_fn(3, |i, j| {
        (if i == j { 1.0 } else { 0.0 }) + theta[i] * theta[j] / (1.0 - r2)
    }))
}

/// Cost-optimal scaled MQE for the quadratic cost C.
#[derive(Debug, Clone)]
pub struct OptimalMqe {
    pub w_opt: InfoMatrix,
    /// `(tr √(H^{-1/2} C H^{-1/2}))² / (d-1)`
    pub min_cost: f64,
}

/// Minimises `tr(CW)` over `W` with `tr(H⁻¹W⁻¹) = d-1`.
pub fn optimal_scaled_mqe(cost: &InfoMatrix, h: &InfoMatrix, hilbert_dim: usize) -> Result<OptimalMqe> {
    if cost.dim() != h.dim() {
        return Err(Error::Shape(format!("C is {0}x{0} but H is {1}x{1}", cost.dim(), h.dim())));
    }
    if hilbert_dim < 2 {
        return Err(Error::Domain("Hilbert dimension must be at least 2".into()));
    }
    let dm1 = (hilbert_dim - 1) as f64;
    // both C and H must be invertible whichever form is used
    cost.matrix.inv()?;
    let h_inv = h.matrix.inv()?;
    let h_eig = h.matrix.eig()?;
    let cond = h_eig.values[h_eig.values.len() - 1] / h_eig.values[0];
    let w = if cond > H_CONDITION_SWITCH {
        // W = κ C^{-1/2} √(C^{1/2} H⁻¹ C^{1/2}) C^{-1/2}
        let c_half = cost.matrix.sqrt()?;
        let c_inv_half = cost.matrix.inv_sqrt()?;
        let t = h_inv.congruence(&c_half).sqrt()?;
        t.congruence(&c_inv_half).scale(t.trace() / dm1)
    } else {
        // W = κ H^{-1/2} √(H^{1/2} C⁻¹ H^{1/2}) H^{-1/2}
        let h_half = h.matrix.sqrt()?;
        let h_inv_half = h.matrix.inv_sqrt()?;
        let s_trace = cost.matrix.congruence(&h_inv_half).sqrt()?.trace();
        let s_inv = cost.matrix.inv()?.congruence(&h_half).sqrt()?;
        s_inv.congruence(&h_inv_half).scale(s_trace / dm1)
    };
    let min_cost = cost.matrix.trace_product(&w);
    Ok(OptimalMqe {
        w_opt: InfoMatrix::new(InfoKind::ScaledMqe, w)?,
        min_cost,
    })
}

/// `(tr √(H^{-1/2} C H^{-1/2}))² / (d-1)` computed without forming W.
pub fn optimal_cost(cost: &RealSymMatrix, h: &RealSymMatrix, hilbert_dim: usize) -> Result<f64> {
    let s = cost.congruence(&h.inv_sqrt()?).sqrt()?.trace();
    Ok(s * s / (hilbert_dim - 1) as f64)
}

/// Admissibility of a target Fisher information.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetCheck {
    pub admissible: bool,
    /// `tr(H⁻¹G)`
    pub trace: f64,
    pub min_eig: f64,
}

pub fn validate_target(g: &InfoMatrix, h: &InfoMatrix) -> Result<TargetCheck> {
    if g.dim() != h.dim() {
        return Err(Error::Shape(format!("G is {0}x{0} but H is {1}x{1}", g.dim(), h.dim())));
    }
    let trace = h.matrix.inv()?.trace_product(&g.matrix);
    let min_eig = g.matrix.min_eigenvalue()?;
    let psd = min_eig >= crate::information::INFO_PSD_FLOOR * g.matrix.max_abs().max(1.0);
    Ok(TargetCheck {
        admissible: psd && trace <= 1.0 + TARGET_TOL,
        trace,
        min_eig,
    })
}

/// Randomised spin measurement whose Fisher information at `θ⁰` on the full
/// mixed qubit equals a prescribed target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixedQubitDesign {
    pub theta0: BlochVector,
    /// Eigenvalues of `F = H^{-1/2} G H^{-1/2}`, descending.
    pub gammas: [f64; 3],
    /// Unit spin directions `m_i ∝ H^{1/2} f_i`.
    pub directions: [[f64; 3]; 3],
    /// Orthonormal eigenvectors `f_i` of F.
    pub eigvecs: [[f64; 3]; 3],
}

impl MixedQubitDesign {
    pub fn weight_sum(&self) -> f64 {
        self.gammas.iter().sum()
    }

    /// `{γ_i P_{+m_i}, γ_i P_{-m_i}, (1 - Σγ) I}` with zero weights dropped.
    pub fn realize_povm(&self) -> Povm {
        spin_mixture(&self.gammas, &self.directions)
    }
}

/// Randomised measurement on a pure qubit: with probability `g_i` measure
/// the observable `A_i`, otherwise do nothing.
///
/// With `|ψ¹'⟩ = e^{iλ}|ψ¹⟩`, `A₁ = |ψ⁰⟩⟨ψ¹'| + h.c.` and
/// `A₂ = i|ψ⁰⟩⟨ψ¹'| + h.c.`; on the Bloch sphere these are spins along
/// `cos λ x' + sin λ y'` and `sin λ x' - cos λ y'`.
#[derive(Debug, Clone, PartialEq)]
pub struct PureQubitDesign {
    pub frame: TangentFrame,
    pub probs: [f64; 2],
    pub lambda: f64,
    pub observables: [HermitianMatrix; 2],
    /// Bloch directions of `A₁`, `A₂`.
    pub directions: [[f64; 3]; 2],
}

impl PureQubitDesign {
    /// Tangent-chart directions `(cos λ, sin λ)` and `(sin λ, -cos λ)`.
    pub fn chart_directions(&self) -> [[f64; 2]; 2] {
        let (s, co) = self.lambda.sin_cos();
        [[co, s], [s, -co]]
    }

    pub fn realize_povm(&self) -> Povm {
        spin_mixture(&self.probs, &self.directions)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasurementDesign {
    Mixed(MixedQubitDesign),
    Pure(PureQubitDesign),
}

pub fn realize_povm(design: &MeasurementDesign) -> Povm {
    match design {
        MeasurementDesign::Mixed(d) => d.realize_povm(),
        MeasurementDesign::Pure(d) => d.realize_povm(),
    }
}

fn spin_mixture(weights: &[f64], directions: &[[f64; 3]]) -> Povm {
    let mut labels = Vec::new();
    let mut elements = Vec::new();
    for (k, (&w, m)) in weights.iter().zip(directions).enumerate() {
        if w <= 0.0 {
            continue;
        }
        for (sign, tag) in [(1.0, '+'), (-1.0, '-')] {
            labels.push(format!("{}{tag}", k + 1));
            elements.push(spin_projector(m, sign).scale(w));
        }
    }
    let rest = 1.0 - weights.iter().sum::<f64>();
    if rest > 0.0 {
        labels.push("idle".into());
        elements.push(HermitianMatrix::identity(2).scale(rest));
    }
    Povm::with_labels(labels, elements, 1).expect("at least one weighted element")
}

fn ordered_spectrum(f: &RealSymMatrix) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let eig = f.eig()?;
    let p = eig.values.len();
    let gammas = (0..p).rev().map(|k| eig.values[k].max(0.0)).collect();
    let vecs = (0..p).rev().map(|k| eig.vectors[k].clone()).collect();
    Ok((gammas, vecs))
}

/// Spin-measurement design realising the target `G` at `θ⁰` on the full
/// mixed qubit model.
pub fn design_mixed_qubit(g: &InfoMatrix, theta0: &BlochVector) -> Result<MixedQubitDesign> {
    if g.dim() != 3 {
        return Err(Error::Shape(format!("mixed qubit target must be 3x3, got {0}x{0}", g.dim())));
    }
    if !theta0.is_interior() {
        return Err(Error::Boundary { norm: theta0.norm() });
    }
    let h = InfoMatrix::new(InfoKind::Helstrom, mixed_qubit_helstrom(&theta0.coords())?)?;
    let check = validate_target(g, &h)?;
    if !check.admissible {
        return Err(Error::Target(format!(
            "tr(H⁻¹G) = {:.6e}, smallest eigenvalue {:.3e}",
            check.trace, check.min_eig
        )));
    }
    let h_half = h.matrix.sqrt()?;
    let f = g.matrix.congruence(&h.matrix.inv_sqrt()?);
    let (mut gammas, vecs) = ordered_spectrum(&f)?;
    // round-off can push an admissible sum a hair above one
    let total: f64 = gammas.iter().sum();
    if total > 1.0 {
        gammas.iter_mut().for_each(|x| *x /= total);
    }
    let mut directions = [[0.0; 3]; 3];
    let mut eigvecs = [[0.0; 3]; 3];
    for k in 0..3 {
        let gk = h_half.matvec(&vecs[k]);
        let n = norm(&gk);
        eigvecs[k].copy_from_slice(&vecs[k]);
        directions[k] = std::array::from_fn(|j| gk[j] / n);
    }
    Ok(MixedQubitDesign {
        theta0: *theta0,
        gammas: [gammas[0], gammas[1], gammas[2]],
        directions,
        eigvecs,
    })
}

/// Design realising the target `G` in the tangent chart at the pure state
/// with Bloch vector `n` (where `H` is the identity).
pub fn design_pure_qubit(g: &InfoMatrix, reference: &[f64; 3]) -> Result<PureQubitDesign> {
    if g.dim() != 2 {
        return Err(Error::Shape(format!("pure qubit target must be 2x2, got {0}x{0}", g.dim())));
    }
    let n = norm(reference);
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!("reference Bloch vector has norm {n}, expected 1")));
    }
    let h = InfoMatrix::new(InfoKind::Helstrom, RealSymMatrix::identity(2))?;
    let check = validate_target(g, &h)?;
    if !check.admissible {
        return Err(Error::Target(format!(
            "tr G = {:.6e}, smallest eigenvalue {:.3e}",
            check.trace, check.min_eig
        )));
    }
    let (mut probs, vecs) = ordered_spectrum(&g.matrix)?;
    let total: f64 = probs.iter().sum();
    if total > 1.0 {
        probs.iter_mut().for_each(|x| *x /= total);
    }
    let lambda = vecs[0][1].atan2(vecs[0][0]);
    let frame = TangentFrame::from_bloch(reference);
    let (s, co) = lambda.sin_cos();
    let u1: [f64; 3] = std::array::from_fn(|k| co * frame.x[k] + s * frame.y[k]);
    let u2: [f64; 3] = std::array::from_fn(|k| s * frame.x[k] - co * frame.y[k]);
    let psi0 = frame.reference_ket();
    let psi1p: Vec<C64> = frame.tangent_ket().iter().map(|z| z * C64::from_polar(1.0, lambda)).collect();
    let cross = crate::matkit::ComplexMatrix::outer(&psi0, &psi1p);
    let a1 = HermitianMatrix::symmetrized(&cross + &cross.adjoint());
    let i_cross = cross.scale(c(0.0, 1.0));
    let a2 = HermitianMatrix::symmetrized(&i_cross + &i_cross.adjoint());
    Ok(PureQubitDesign {
        frame,
        probs: [probs[0], probs[1]],
        lambda,
        observables: [a1, a2],
        directions: [u1, u2],
    })
}

/// Seven-outcome POVM on two qubits: `½|aa⟩⟨aa|` for the six spin
/// eigenstates `a` along x, y, z, plus the singlet projector.
pub fn counterexample_povm() -> Povm {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let kets: [(&str, [C64; 2]); 6] = [
        ("xx+", [c(s, 0.0), c(s, 0.0)]),
        ("xx-", [c(s, 0.0), c(-s, 0.0)]),
        ("yy+", [c(s, 0.0), c(0.0, s)]),
        ("yy-", [c(s, 0.0), c(0.0, -s)]),
        ("zz+", [c(1.0, 0.0), c(0.0, 0.0)]),
        ("zz-", [c(0.0, 0.0), c(1.0, 0.0)]),
    ];
    let mut labels = Vec::with_capacity(7);
    let mut elements = Vec::with_capacity(7);
    for (label, k) in kets {
        let pair: Vec<C64> = (0..4).map(|j| k[j / 2] * k[j % 2]).collect();
        labels.push(label.to_string());
        elements.push(HermitianMatrix::ket_bra(&pair).scale(0.5));
    }
    let singlet = [c(0.0, 0.0), c(s, 0.0), c(-s, 0.0), c(0.0, 0.0)];
    labels.push("singlet".into());
    elements.push(HermitianMatrix::ket_bra(&singlet));
    Povm::with_labels(labels, elements, 2).expect("seven 4x4 elements")
}
