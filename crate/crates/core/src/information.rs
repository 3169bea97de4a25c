//! Symmetric logarithmic derivatives, Helstrom and Fisher information and the
//! trace bounds built from them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{ComplexMatrix, HermitianMatrix, RealSymMatrix};
use crate::quantum::{refine_to_rank1, tensor_power_state, ParametricModel, Povm};

/// `p_k + p_l` at or below this is treated as the joint null space.
pub const SLD_SUPPORT_FLOOR: f64 = 1e-12;
/// Largest derivative entry tolerated on the joint null space.
pub const SLD_LEAK_TOL: f64 = 1e-9;
/// Outcomes less likely than this are treated as impossible.
pub const OUTCOME_FLOOR: f64 = 1e-12;
/// Largest `|tr(∂ᵢρ M)|` tolerated on an impossible outcome.
pub const OUTCOME_SLOPE_TOL: f64 = 1e-9;
/// Eigenvalue floor for matrix inequalities between information matrices.
pub const MATRIX_INEQUALITY_TOL: f64 = 1e-9;
/// PSD floor applied when an information matrix is constructed.
pub const INFO_PSD_FLOOR: f64 = -1e-10;
/// Commutation and support tolerance for partial-trace projectors.
pub const PROJECTOR_TOL: f64 = 1e-10;

/// Symmetric logarithmic derivative: the solution of `dρ = (λρ + ρλ)/2`.
pub fn sld(rho: &HermitianMatrix, drho: &HermitianMatrix) -> Result<HermitianMatrix> {
    if rho.dim() != drho.dim() {
        return Err(Error::Shape(format!(
            "state is {}-dimensional, derivative {}-dimensional",
            rho.dim(),
            drho.dim()
        )));
    }
    let eig = rho.eig()?;
    let v = &eig.vectors;
    let d = &(&v.adjoint() * drho.as_matrix()) * v;
    let n = rho.dim();
    let mut lam = ComplexMatrix::zeros(n, n);
    for k in 0..n {
        for l in 0..n {
            let weight = eig.values[k] + eig.values[l];
            if weight > SLD_SUPPORT_FLOOR {
                lam[(k, l)] = d[(k, l)] * (2.0 / weight);
            } else if d[(k, l)].norm() > SLD_LEAK_TOL {
                return Err(Error::SingularModel {
                    entry: d[(k, l)].norm(),
                    weight,
                });
            }
        }
    }
    Ok(HermitianMatrix::symmetrized(&(v * &lam) * &v.adjoint()))
}

/// One SLD per model parameter.
#[derive(Debug, Clone)]
pub struct SldSet {
    pub lambdas: Vec<HermitianMatrix>,
}

impl SldSet {
    pub fn of_model(model: &dyn ParametricModel, theta: &[f64]) -> Result<Self> {
        let rho = model.rho(theta)?;
        let lambdas = model
            .drho(theta)?
            .iter()
            .map(|d| sld(&rho, d))
            .collect::<Result<_>>()?;
        Ok(Self { lambdas })
    }

    /// Largest `‖(λᵢρ + ρλᵢ)/2 - ∂ᵢρ‖_max` over the set.
    pub fn reconstruction_residual(&self, rho: &HermitianMatrix, drho: &[HermitianMatrix]) -> f64 {
        self.lambdas
            .iter()
            .zip(drho)
            .map(|(l, d)| {
                let anti = (&(l * rho) + &(rho * l)).scale_re(0.5);
                (&anti - d.as_matrix()).max_abs()
            })
            .fold(0.0, f64::max)
    }
}

/// What an [`InfoMatrix`] represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfoKind {
    Helstrom,
    Fisher,
    Target,
    ScaledMqe,
    Mqe,
    Cost,
}

/// A symmetric positive semidefinite `p × p` matrix tagged with its meaning.
#[derive(Debug, Clone, PartialEq)]
pub struct InfoMatrix {
    pub kind: InfoKind,
    pub matrix: RealSymMatrix,
}

impl InfoMatrix {
    /// Fails with [`Error::NotPsd`] below the floor `-1e-10·max(1, ‖A‖)`.
    pub fn new(kind: InfoKind, matrix: RealSymMatrix) -> Result<Self> {
        let min = matrix.min_eigenvalue()?;
        if min < INFO_PSD_FLOOR * matrix.max_abs().max(1.0) {
            return Err(Error::NotPsd { eigenvalue: min });
        }
        Ok(Self { kind, matrix })
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// `H_ij = Re tr(ρ λᵢ λⱼ)` from analytic SLDs.
pub fn helstrom_matrix(model: &dyn ParametricModel, theta: &[f64]) -> Result<InfoMatrix> {
    let rho = model.rho(theta)?;
    let slds = SldSet::of_model(model, theta)?;
    let rl: Vec<ComplexMatrix> = slds.lambdas.iter().map(|l| &rho * l).collect();
    let p = slds.lambdas.len();
    let h = RealSymMatrix::from_fn(p, |i, j| rl[i].trace_product(slds.lambdas[j].as_matrix()).re);
    InfoMatrix::new(InfoKind::Helstrom, h)
}

/// Fisher information of the POVM `M` measured on `ρ(θ)^{⊗N}`.
pub fn fisher_information(m: &Povm, model: &dyn ParametricModel, theta: &[f64], copies: usize) -> Result<InfoMatrix> {
    let d = model.hilbert_dim();
    let expected = d.checked_pow(copies as u32).unwrap_or(usize::MAX);
    if m.dim() != expected {
        return Err(Error::Shape(format!(
            "POVM acts on dimension {} but {copies} copies of a {d}-level system need {expected}",
            m.dim()
        )));
    }
    let (rho, drho) = tensor_power_state(model, theta, copies)?;
    let p = drho.len();
    let mut acc = vec![0.0; p * p];
    let mut slopes = vec![0.0; p];
    for (outcome, e) in m.elements().iter().enumerate() {
        let prob = rho.trace_product(e);
        for (s, di) in slopes.iter_mut().zip(&drho) {
            *s = di.trace_product(e);
        }
        if prob < OUTCOME_FLOOR {
            let slope = slopes.iter().fold(0.0f64, |a, s| a.max(s.abs()));
            if slope >= OUTCOME_SLOPE_TOL {
                return Err(Error::SingularOutcome {
                    outcome,
                    probability: prob,
                    slope,
                });
            }
            continue;
        }
        for i in 0..p {
            for j in 0..p {
                acc[i * p + j] += slopes[i] * slopes[j] / prob;
            }
        }
    }
    InfoMatrix::new(InfoKind::Fisher, RealSymMatrix::new(p, acc)?)
}

/// `tr(H⁻¹ I)`.
pub fn gill_massar_trace(h: &InfoMatrix, i: &InfoMatrix) -> Result<f64> {
    if h.dim() != i.dim() {
        return Err(Error::Shape(format!("H is {0}x{0} but I is {1}x{1}", h.dim(), i.dim())));
    }
    Ok(h.matrix.inv()?.trace_product(&i.matrix))
}

/// Outcome of a matrix inequality test `A ≥ B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub holds: bool,
    pub min_eig: f64,
}

/// Tests `I ≤ N·H` through the smallest eigenvalue of `N·H - I`.
pub fn helstrom_bound_check(i: &InfoMatrix, h: &InfoMatrix, copies: usize) -> Result<BoundCheck> {
    if h.dim() != i.dim() {
        return Err(Error::Shape(format!("H is {0}x{0} but I is {1}x{1}", h.dim(), i.dim())));
    }
    let gap = &h.matrix.scale(copies as f64) - &i.matrix;
    let min_eig = gap.min_eigenvalue()?;
    Ok(BoundCheck {
        holds: min_eig >= -MATRIX_INEQUALITY_TOL,
        min_eig,
    })
}

/// Both sides of the subset trace bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialTraceBound {
    /// `Σ_{i',j'∈S} (H_S⁻¹)_{i'j'} I_{i'j'}` with `H_S` the subset block of H.
    pub lhs: f64,
    /// `N (tr Π - 1)`
    pub bound: f64,
}

/// Trace bound restricted to the parameters in `subset`, whose derivatives
/// live inside the range of the projector `Π` that commutes with `ρ(θ)`.
pub fn partial_trace_bound(
    model: &dyn ParametricModel,
    theta: &[f64],
    subset: &[usize],
    projector: &HermitianMatrix,
    m: &Povm,
    copies: usize,
) -> Result<PartialTraceBound> {
    let d = model.hilbert_dim();
    if projector.dim() != d {
        return Err(Error::InvalidProjector(format!(
            "projector is {}-dimensional, state {d}-dimensional",
            projector.dim()
        )));
    }
    if subset.is_empty() || subset.iter().any(|&k| k >= model.param_dim()) {
        return Err(Error::InvalidProjector(format!("bad parameter subset {subset:?}")));
    }
    let pm = projector.as_matrix();
    let idempotence = (&(pm * pm) - pm).max_abs();
    if idempotence > PROJECTOR_TOL {
        return Err(Error::InvalidProjector(format!("Π² ≠ Π (defect {idempotence:e})")));
    }
    let rho = model.rho(theta)?;
    let commutator = (&(pm * rho.as_matrix()) - &(rho.as_matrix() * pm)).max_abs();
    if commutator > PROJECTOR_TOL {
        return Err(Error::InvalidProjector(format!(
            "Π does not commute with ρ (defect {commutator:e})"
        )));
    }
    let drho = model.drho(theta)?;
    for &k in subset {
        let squeezed = &(pm * drho[k].as_matrix()) * pm;
        let leak = (&squeezed - drho[k].as_matrix()).max_abs();
        if leak > PROJECTOR_TOL {
            return Err(Error::InvalidProjector(format!(
                "derivative {k} leaves the range of Π (defect {leak:e})"
            )));
        }
    }
    let h = helstrom_matrix(model, theta)?;
    let i = fisher_information(m, model, theta, copies)?;
    let h_sub = h.matrix.submatrix(subset).inv()?;
    let lhs = h_sub.trace_product(&i.matrix.submatrix(subset));
    let rank = projector.trace().round();
    Ok(PartialTraceBound {
        lhs,
        bound: copies as f64 * (rank - 1.0),
    })
}

/// Fisher information before and after refining `M` to rank-one elements.
#[derive(Debug, Clone)]
pub struct Refinement {
    pub before: InfoMatrix,
    pub after: InfoMatrix,
    pub holds: bool,
    pub min_eig: f64,
}

pub fn refinement_monotonicity_check(m: &Povm, model: &dyn ParametricModel, theta: &[f64]) -> Result<Refinement> {
    let before = fisher_information(m, model, theta, m.copies())?;
    let refined = refine_to_rank1(m)?;
    let after = fisher_information(&refined, model, theta, m.copies())?;
    let min_eig = (&after.matrix - &before.matrix).min_eigenvalue()?;
    Ok(Refinement {
        before,
        after,
        holds: min_eig >= -MATRIX_INEQUALITY_TOL,
        min_eig,
    })
}

/// Upper bound `N(d-1)` on `tr(H⁻¹ I)`.
pub fn trace_bound(hilbert_dim: usize, copies: usize) -> f64 {
    (copies * (hilbert_dim - 1)) as f64
}
