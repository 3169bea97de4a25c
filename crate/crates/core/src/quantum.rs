//! Quantum states, parametric models and POVMs.
//!
//! A [`ParametricModel`] is a chart `θ ↦ ρ(θ)` together with analytic partial
//! derivatives. The built-in charts cover the qubit models used by the design
//! and estimation layers plus the general qudit models used by the bound
//! checks.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matkit::{c, norm, ComplexMatrix, HermitianMatrix, C64, TOLERANCES};

/// Trace and positivity tolerance for states produced by a chart.
pub const STATE_TOL: f64 = 1e-10;
/// Eigenvalue floor for POVM elements.
pub const POVM_EIGEN_FLOOR: f64 = -1e-12;
/// Entrywise tolerance on Σ M_ξ = I.
pub const POVM_COMPLETENESS_TOL: f64 = 1e-10;
/// Eigenvalues above this count towards the rank of a refined element.
pub const RANK_TOL: f64 = 1e-10;
/// Probabilities down to this negativity are treated as round-off.
pub const NEGATIVE_PROBABILITY_TOL: f64 = 1e-12;

pub fn sigma_x() -> HermitianMatrix {
    HermitianMatrix::symmetrized(
        ComplexMatrix::new(2, 2, vec![c(0.0, 0.0), c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)]).unwrap(),
    )
}

pub fn sigma_y() -> HermitianMatrix {
    HermitianMatrix::symmetrized(
        ComplexMatrix::new(2, 2, vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]).unwrap(),
    )
}

pub fn sigma_z() -> HermitianMatrix {
    HermitianMatrix::from_real_diagonal(&[1.0, -1.0])
}

pub fn paulis() -> [HermitianMatrix; 3] {
    [sigma_x(), sigma_y(), sigma_z()]
}

/// `v · σ`
pub fn pauli_dot(v: &[f64; 3]) -> HermitianMatrix {
    let [x, y, z] = *v;
    HermitianMatrix::symmetrized(
        ComplexMatrix::new(2, 2, vec![c(z, 0.0), c(x, -y), c(x, y), c(-z, 0.0)]).unwrap(),
    )
}

/// `½(I ± m·σ)` for a unit vector `m`.
pub fn spin_projector(m: &[f64; 3], sign: f64) -> HermitianMatrix {
    let half = HermitianMatrix::identity(2).scale(0.5);
    &half + &pauli_dot(m).scale(0.5 * sign)
}

/// Bloch coordinates of a qubit state, `ρ = ½(I + r·σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct BlochVector([f64; 3]);

impl BlochVector {
    pub fn new(r: [f64; 3]) -> Result<Self> {
        if r.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("Bloch vector {r:?} is not finite")));
        }
        let n = norm(&r);
        if n > 1.0 + 1e-12 {
            return Err(Error::Domain(format!("Bloch vector norm {n} exceeds 1")));
        }
        Ok(Self(r))
    }

    pub fn origin() -> Self {
        Self([0.0; 3])
    }

    pub fn coords(&self) -> [f64; 3] {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn is_interior(&self) -> bool {
        self.norm() < 1.0
    }

    pub fn density(&self) -> HermitianMatrix {
        density_from_bloch(self)
    }
}

impl TryFrom<[f64; 3]> for BlochVector {
    type Error = Error;

    fn try_from(r: [f64; 3]) -> Result<Self> {
        Self::new(r)
    }
}

impl From<BlochVector> for [f64; 3] {
    fn from(b: BlochVector) -> Self {
        b.0
    }
}

pub fn density_from_bloch(r: &BlochVector) -> HermitianMatrix {
    let half = HermitianMatrix::identity(2).scale(0.5);
    &half + &pauli_dot(&r.0).scale(0.5)
}

/// A smooth family of density matrices with analytic derivatives.
pub trait ParametricModel: Send + Sync {
    fn chart_name(&self) -> &str;
    fn hilbert_dim(&self) -> usize;
    fn param_dim(&self) -> usize;
    fn in_domain(&self, theta: &[f64]) -> bool;
    fn rho(&self, theta: &[f64]) -> Result<HermitianMatrix>;
    /// `∂ρ/∂θ_i` for every parameter.
    fn drho(&self, theta: &[f64]) -> Result<Vec<HermitianMatrix>>;

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.param_dim() {
            return Err(Error::Domain(format!(
                "{} takes {} parameters, got {}",
                self.chart_name(),
                self.param_dim(),
                theta.len()
            )));
        }
        if !self.in_domain(theta) {
            return Err(Error::Domain(format!("{theta:?} is outside the {} domain", self.chart_name())));
        }
        Ok(())
    }
}

/// `ρ = ½(I + θ·σ)` with `∂_i ρ = σ_i/2`, domain `|θ| < 1`.
#[derive(Debug, Clone, Copy, Default)]
pub struct FullMixedQubit;

impl ParametricModel for FullMixedQubit {
    fn chart_name(&self) -> &str {
        "full_mixed_qubit"
    }

    fn hilbert_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        3
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == 3 && norm(theta) < 1.0
    }

    fn rho(&self, theta: &[f64]) -> Result<HermitianMatrix> {
        self.check_theta(theta)?;
        Ok(density_from_bloch(&BlochVector([theta[0], theta[1], theta[2]])))
    }

    fn drho(&self, theta: &[f64]) -> Result<Vec<HermitianMatrix>> {
        self.check_theta(theta)?;
        Ok(paulis().iter().map(|s| s.scale(0.5)).collect())
    }
}

/// `|ψ⟩ = cos(η/2)|↑⟩ + sin(η/2)e^{iφ}|↓⟩`, parameters `(η, φ)`, `0 < η < π`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PureQubitPolar;

impl PureQubitPolar {
    pub fn ket(eta: f64, phi: f64) -> [C64; 2] {
        let (s, co) = (0.5 * eta).sin_cos();
        [c(co, 0.0), C64::from_polar(s, phi)]
    }

    /// Bloch vector `(sin η cos φ, sin η sin φ, cos η)`.
    pub fn bloch(eta: f64, phi: f64) -> [f64; 3] {
        [eta.sin() * phi.cos(), eta.sin() * phi.sin(), eta.cos()]
    }

    /// Polar angles of a non-zero 3-vector.
    pub fn angles(r: &[f64; 3]) -> (f64, f64) {
        let n = norm(r);
        let eta = (r[2] / n).clamp(-1.0, 1.0).acos();
        let phi = r[1].atan2(r[0]);
        (eta, phi)
    }
}

fn ket_derivative(psi: &[C64], dpsi: &[C64]) -> HermitianMatrix {
    HermitianMatrix::symmetrized(&ComplexMatrix::outer(dpsi, psi) + &ComplexMatrix::outer(psi, dpsi))
}

impl ParametricModel for PureQubitPolar {
    fn chart_name(&self) -> &str {
        "pure_qubit_polar"
    }

    fn hilbert_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == 2
            && theta[0] > 0.0
            && theta[0] < std::f64::consts::PI
            && theta[1].is_finite()
    }

    fn rho(&self, theta: &[f64]) -> Result<HermitianMatrix> {
        self.check_theta(theta)?;
        Ok(HermitianMatrix::ket_bra(&Self::ket(theta[0], theta[1])))
    }

    fn drho(&self, theta: &[f64]) -> Result<Vec<HermitianMatrix>> {
        self.check_theta(theta)?;
        let (eta, phi) = (theta[0], theta[1]);
        let psi = Self::ket(eta, phi);
        let (s, co) = (0.5 * eta).sin_cos();
        let d_eta = [c(-0.5 * s, 0.0), C64::from_polar(0.5 * co, phi)];
        let d_phi = [c(0.0, 0.0), C64::from_polar(s, phi) * c(0.0, 1.0)];
        Ok(vec![ket_derivative(&psi, &d_eta), ket_derivative(&psi, &d_phi)])
    }
}

/// Orthonormal frame `(x', y', n)` obtained by rotating the lab frame with
/// `R_z(φ₀) R_y(η₀)`, where `n` is the Bloch vector of the reference state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentFrame {
    pub x: [f64; 3],
    pub y: [f64; 3],
    pub n: [f64; 3],
    pub eta: f64,
    pub phi: f64,
}

impl TangentFrame {
    pub fn from_polar(eta: f64, phi: f64) -> Self {
        let (se, ce) = eta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            x: [ce * cp, ce * sp, -se],
            y: [-sp, cp, 0.0],
            n: [se * cp, se * sp, ce],
            eta,
            phi,
        }
    }

    pub fn from_bloch(n: &[f64; 3]) -> Self {
        let (eta, phi) = PureQubitPolar::angles(n);
        Self::from_polar(eta, phi)
    }

    /// The SU(2) element `e^{-iφσ_z/2} e^{-iησ_y/2}` realising the rotation.
    pub fn unitary(&self) -> ComplexMatrix {
        let (s, co) = (0.5 * self.eta).sin_cos();
        let a = C64::from_polar(1.0, -0.5 * self.phi);
        let b = C64::from_polar(1.0, 0.5 * self.phi);
        ComplexMatrix::new(2, 2, vec![a * co, -a * s, b * s, b * co]).unwrap()
    }

    /// |ψ⁰⟩ = U|↑⟩
    pub fn reference_ket(&self) -> Vec<C64> {
        self.unitary().column(0)
    }

    /// |ψ¹⟩ = U|↓⟩
    pub fn tangent_ket(&self) -> Vec<C64> {
        self.unitary().column(1)
    }

    /// Bloch vector of the tangent-chart point `θ`.
    pub fn point(&self, theta: &[f64]) -> [f64; 3] {
        let rest = (1.0 - theta[0] * theta[0] - theta[1] * theta[1]).max(0.0).sqrt();
        std::array::from_fn(|k| theta[0] * self.x[k] + theta[1] * self.y[k] + rest * self.n[k])
    }

    /// Tangent coordinates `(r·x', r·y')` of a Bloch vector.
    pub fn coordinates(&self, r: &[f64; 3]) -> [f64; 2] {
        [crate::matkit::dot(r, &self.x), crate::matkit::dot(r, &self.y)]
    }
}

/// Local chart of pure qubit states around a reference state `|ψ⁰⟩`:
/// `ρ(θ) = ½(I + (θ₁x' + θ₂y' + √(1-θ₁²-θ₂²) n)·σ)`.
///
/// To first order this is `|ψ⁰⟩ + ½(θ₁ + iθ₂)|ψ¹⟩`; `H(0)` is the identity.
#[derive(Debug, Clone, Copy)]
pub struct PureQubitTangent {
    frame: TangentFrame,
}

impl PureQubitTangent {
    pub fn at_polar(eta: f64, phi: f64) -> Self {
        Self {
            frame: TangentFrame::from_polar(eta, phi),
        }
    }

    pub fn at_bloch(n: &[f64; 3]) -> Self {
        Self {
            frame: TangentFrame::from_bloch(n),
        }
    }

    pub fn frame(&self) -> &TangentFrame {
        &self.frame
    }
}

impl ParametricModel for PureQubitTangent {
    fn chart_name(&self) -> &str {
        "pure_qubit_tangent"
    }

    fn hilbert_dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        2
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == 2 && theta[0] * theta[0] + theta[1] * theta[1] < 1.0
    }

    fn rho(&self, theta: &[f64]) -> Result<HermitianMatrix> {
        self.check_theta(theta)?;
        Ok(density_from_bloch(&BlochVector(self.frame.point(theta))))
    }

    fn drho(&self, theta: &[f64]) -> Result<Vec<HermitianMatrix>> {
        self.check_theta(theta)?;
        let rest = (1.0 - theta[0] * theta[0] - theta[1] * theta[1]).sqrt();
        let f = &self.frame;
        let dir = |e: &[f64; 3], t: f64| -> [f64; 3] { std::array::from_fn(|k| e[k] - t / rest * f.n[k]) };
        Ok(vec![
            pauli_dot(&dir(&f.x, theta[0])).scale(0.5),
            pauli_dot(&dir(&f.y, theta[1])).scale(0.5),
        ])
    }
}

/// Pure qudit chart `ψ ∝ |1⟩ + Σ_k (θ_{k+} - iθ_{k-})|k⟩`, optionally rotated
/// by a unitary. At `θ = 0` the derivatives are
/// `|1⟩⟨k| + |k⟩⟨1|` and `i|1⟩⟨k| - i|k⟩⟨1|`, and `H = 4·I`.
///
/// Parameters are ordered `(2+, 2-, 3+, 3-, …)`.
#[derive(Debug, Clone)]
pub struct PureQuditTangent {
    dim: usize,
    unitary: Option<ComplexMatrix>,
}

impl PureQuditTangent {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain("qudit dimension must be at least 2".into()));
        }
        Ok(Self { dim, unitary: None })
    }

    /// Chart around `U|1⟩` instead of `|1⟩`.
    pub fn rotated(dim: usize, unitary: ComplexMatrix) -> Result<Self> {
        if unitary.rows() != dim || unitary.cols() != dim {
            return Err(Error::Shape(format!("expected a {dim}x{dim} unitary")));
        }
        let defect = (&(&unitary.adjoint() * &unitary) - &ComplexMatrix::identity(dim)).max_abs();
        if defect > 1e-10 {
            return Err(Error::Shape(format!("matrix is not unitary (defect {defect:e})")));
        }
        Ok(Self {
            dim,
            unitary: Some(unitary),
        })
    }

    fn ket(&self, theta: &[f64]) -> Vec<C64> {
        let mut psi = vec![C64::default(); self.dim];
        psi[0] = c(1.0, 0.0);
        for k in 1..self.dim {
            psi[k] = c(theta[2 * (k - 1)], -theta[2 * (k - 1) + 1]);
        }
        psi
    }

    fn rotate(&self, h: HermitianMatrix) -> HermitianMatrix {
        match &self.unitary {
            Some(u) => h.conjugate_by(u),
            None => h,
        }
    }
}

impl ParametricModel for PureQuditTangent {
    fn chart_name(&self) -> &str {
        "pure_qudit_tangent"
    }

    fn hilbert_dim(&self) -> usize {
        self.dim
    }

    fn param_dim(&self) -> usize {
        2 * self.dim - 2
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == self.param_dim() && theta.iter().all(|x| x.is_finite())
    }

    fn rho(&self, theta: &[f64]) -> Result<HermitianMatrix> {
        self.check_theta(theta)?;
        let psi = self.ket(theta);
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        Ok(self.rotate(HermitianMatrix::ket_bra(&psi).scale(1.0 / n2)))
    }

    fn drho(&self, theta: &[f64]) -> Result<Vec<HermitianMatrix>> {
        self.check_theta(theta)?;
        let psi = self.ket(theta);
        let n2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        let proj = HermitianMatrix::ket_bra(&psi);
        let mut out = Vec::with_capacity(self.param_dim());
        for k in 1..self.dim {
            for unit in [c(1.0, 0.0), c(0.0, -1.0)] {
                let mut dpsi = vec![C64::default(); self.dim];
                dpsi[k] = unit;
                let dn2 = 2.0 * (psi[k].conj() * unit).re;
                let d = &ket_derivative(&psi, &dpsi).scale(1.0 / n2) - &proj.scale(dn2 / (n2 * n2));
                out.push(self.rotate(d));
            }
        }
        Ok(out)
    }
}

/// Generalised Gell-Mann matrices, normalised to `tr(Λ_a Λ_b) = 2δ_ab`.
///
/// For each pair `j < k` the symmetric then antisymmetric generator, followed
/// by the `d-1` diagonal ones. At `d = 2` this is `(σ_x, σ_y, σ_z)`.
pub fn gell_mann(d: usize) -> Vec<HermitianMatrix> {
    let mut out = Vec::with_capacity(d * d - 1);
    for j in 0..d {
        for k in j + 1..d {
            let mut s = ComplexMatrix::zeros(d, d);
            s[(j, k)] = c(1.0, 0.0);
            s[(k, j)] = c(1.0, 0.0);
            out.push(HermitianMatrix::symmetrized(s));
            let mut a = ComplexMatrix::zeros(d, d);
            a[(j, k)] = c(0.0, -1.0);
            a[(k, j)] = c(0.0, 1.0);
            out.push(HermitianMatrix::symmetrized(a));
        }
    }
    for l in 1..d {
        let w = (2.0 / (l * (l + 1)) as f64).sqrt();
        let diag: Vec<f64> = (0..d)
            .map(|j| match j.cmp(&l) {
                std::cmp::Ordering::Less => w,
                std::cmp::Ordering::Equal => -(l as f64) * w,
                std::cmp::Ordering::Greater => 0.0,
            })
            .collect();
        out.push(HermitianMatrix::from_real_diagonal(&diag));
    }
    out
}

/// Affine chart of all qudit states, `ρ = I/d + ½ Σ θ_a Λ_a`, `∂_a ρ = Λ_a/2`.
/// Domain: `ρ(θ)` positive definite.
#[derive(Debug, Clone)]
pub struct FullMixedQudit {
    dim: usize,
    basis: Vec<HermitianMatrix>,
}

impl FullMixedQudit {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Domain("qudit dimension must be at least 2".into()));
        }
        Ok(Self {
            dim,
            basis: gell_mann(dim),
        })
    }

    /// θ_a = tr(ρ Λ_a).
    pub fn coordinates_of(&self, rho: &HermitianMatrix) -> Vec<f64> {
        self.basis.iter().map(|g| g.trace_product(rho)).collect()
    }

    fn assemble(&self, theta: &[f64]) -> HermitianMatrix {
        let mut rho = HermitianMatrix::identity(self.dim).scale(1.0 / self.dim as f64);
        for (t, g) in theta.iter().zip(&self.basis) {
            rho = &rho + &g.scale(0.5 * t);
        }
        rho
    }
}

impl ParametricModel for FullMixedQudit {
    fn chart_name(&self) -> &str {
        "full_mixed_qudit"
    }

    fn hilbert_dim(&self) -> usize {
        self.dim
    }

    fn param_dim(&self) -> usize {
        self.dim * self.dim - 1
    }

    fn in_domain(&self, theta: &[f64]) -> bool {
        theta.len() == self.param_dim()
            && theta.iter().all(|x| x.is_finite())
            && self.assemble(theta).min_eigenvalue().map(|e| e > 0.0).unwrap_or(false)
    }

    fn rho(&self, theta: &[f64]) -> Result<HermitianMatrix> {
        self.check_theta(theta)?;
        Ok(self.assemble(theta))
    }

    fn drho(&self, theta: &[f64]) -> Result<Vec<HermitianMatrix>> {
        self.check_theta(theta)?;
        Ok(self.basis.iter().map(|g| g.scale(0.5)).collect())
    }
}

/// `ρ^{⊗N}` and the Leibniz-sum derivatives `Σ_p ρ ⊗ … ⊗ ∂_iρ ⊗ … ⊗ ρ`.
pub fn tensor_power_state(
    model: &dyn ParametricModel,
    theta: &[f64],
    copies: usize,
) -> Result<(HermitianMatrix, Vec<HermitianMatrix>)> {
    if copies == 0 {
        return Err(Error::Domain("copy count must be positive".into()));
    }
    let d = model.hilbert_dim();
    let total = d
        .checked_pow(copies as u32)
        .filter(|&t| t <= TOLERANCES.max_dim)
        .ok_or(Error::Capacity {
            dim: d.saturating_pow(copies as u32),
            cap: TOLERANCES.max_dim,
        })?;
    debug_assert!(total <= TOLERANCES.max_dim);
    let rho = model.rho(theta)?;
    let drho = model.drho(theta)?;
    let mut power = rho.clone();
    let mut derivs = drho.clone();
    for _ in 1..copies {
        derivs = derivs
            .iter()
            .zip(&drho)
            .map(|(acc, di)| Ok(&acc.tensor(&rho)? + &power.tensor(di)?))
            .collect::<Result<_>>()?;
        power = power.tensor(&rho)?;
    }
    Ok((power, derivs))
}

/// A finite positive operator-valued measure acting on `copies` tensor factors.
#[derive(Debug, Clone)]
pub struct Povm {
    labels: Vec<String>,
    elements: Vec<HermitianMatrix>,
    copies: usize,
}

impl Povm {
    /// Builds a POVM with labels `0, 1, …`. Positivity and completeness are
    /// not checked here; see [`validate_povm`] and [`Povm::validated`].
    pub fn new(elements: Vec<HermitianMatrix>, copies: usize) -> Result<Self> {
        let labels = (0..elements.len()).map(|k| k.to_string()).collect();
        Self::with_labels(labels, elements, copies)
    }

    pub fn with_labels(labels: Vec<String>, elements: Vec<HermitianMatrix>, copies: usize) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::InvalidPovm("a POVM needs at least one element".into()));
        }
        if labels.len() != elements.len() {
            return Err(Error::InvalidPovm(format!(
                "{} labels for {} elements",
                labels.len(),
                elements.len()
            )));
        }
        let dim = elements[0].dim();
        if elements.iter().any(|e| e.dim() != dim) {
            return Err(Error::Shape("POVM elements must share one dimension".into()));
        }
        if copies == 0 {
            return Err(Error::InvalidPovm("copy count must be positive".into()));
        }
        Ok(Self {
            labels,
            elements,
            copies,
        })
    }

    /// Like [`Povm::with_labels`] but fails unless [`validate_povm`] passes.
    pub fn validated(labels: Vec<String>, elements: Vec<HermitianMatrix>, copies: usize) -> Result<Self> {
        let povm = Self::with_labels(labels, elements, copies)?;
        let report = validate_povm(&povm);
        if !report.passes {
            return Err(Error::InvalidPovm(report.to_string()));
        }
        Ok(povm)
    }

    /// Spin measurement `{½(I + m·σ), ½(I - m·σ)}` along a unit vector.
    pub fn spin(m: &[f64; 3]) -> Self {
        Self::with_labels(
            vec!["+".into(), "-".into()],
            vec![spin_projector(m, 1.0), spin_projector(m, -1.0)],
            1,
        )
        .expect("two 2x2 elements")
    }

    /// Projective measurement in the computational basis.
    pub fn computational(dim: usize) -> Self {
        let elements = (0..dim)
            .map(|k| {
                let mut diag = vec![0.0; dim];
                diag[k] = 1.0;
                HermitianMatrix::from_real_diagonal(&diag)
            })
            .collect();
        Self::new(elements, 1).expect("non-empty")
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn copies(&self) -> usize {
        self.copies
    }

    pub fn elements(&self) -> &[HermitianMatrix] {
        &self.elements
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, outcome: usize) -> &str {
        &self.labels[outcome]
    }

    /// Outcomes listed in a different order.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        for &k in order {
            if k >= self.len() || std::mem::replace(&mut seen[k], true) {
                return Err(Error::InvalidPovm("not a permutation of the outcomes".into()));
            }
        }
        if order.len() != self.len() {
            return Err(Error::InvalidPovm("not a permutation of the outcomes".into()));
        }
        Self::with_labels(
            order.iter().map(|&k| self.labels[k].clone()).collect(),
            order.iter().map(|&k| self.elements[k].clone()).collect(),
            self.copies,
        )
    }

    pub fn to_document(&self) -> PovmDocument {
        PovmDocument {
            dim: self.dim(),
            copies: self.copies,
            elements: self
                .elements
                .iter()
                .map(|e| e.as_matrix().data().iter().map(|z| [z.re, z.im]).collect())
                .collect(),
            labels: Some(self.labels.clone()),
        }
    }

    pub fn from_document(doc: &PovmDocument) -> Result<Self> {
        let elements = doc
            .elements
            .iter()
            .map(|entries| {
                let data = entries.iter().map(|&[re, im]| c(re, im)).collect();
                HermitianMatrix::new(ComplexMatrix::new(doc.dim, doc.dim, data)?)
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = doc
            .labels
            .clone()
            .unwrap_or_else(|| (0..elements.len()).map(|k| k.to_string()).collect());
        Self::validated(labels, elements, doc.copies)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_document()).expect("POVM document serialises")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: PovmDocument =
            serde_json::from_str(text).map_err(|e| Error::InvalidPovm(format!("malformed POVM document: {e}")))?;
        Self::from_document(&doc)
    }
}

/// On-disk POVM format: each element is a row-major list of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PovmDocument {
    pub dim: usize,
    pub copies: usize,
    pub elements: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

/// Positivity and completeness diagnostics for a POVM.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmReport {
    pub min_eigenvalues: Vec<f64>,
    /// max |(Σ M_ξ - I)_kl|
    pub completeness_residual: f64,
    pub passes: bool,
}

impl std::fmt::Display for PovmReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let worst = self.min_eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        write!(
            f,
            "smallest element eigenvalue {worst:e}, completeness residual {:e}",
            self.completeness_residual
        )
    }
}

pub fn validate_povm(m: &Povm) -> PovmReport {
    let min_eigenvalues: Vec<f64> = m
        .elements
        .iter()
        .map(|e| e.min_eigenvalue().unwrap_or(f64::NAN))
        .collect();
    let mut sum = ComplexMatrix::zeros(m.dim(), m.dim());
    for e in &m.elements {
        sum = &sum + e.as_matrix();
    }
    let completeness_residual = (&sum - &ComplexMatrix::identity(m.dim())).max_abs();
    let passes = min_eigenvalues.iter().all(|&v| v >= POVM_EIGEN_FLOOR)
        && completeness_residual <= POVM_COMPLETENESS_TOL;
    PovmReport {
        min_eigenvalues,
        completeness_residual,
        passes,
    }
}

/// Splits every element into its rank-one spectral pieces `λ_k |v_k⟩⟨v_k|`.
pub fn refine_to_rank1(m: &Povm) -> Result<Povm> {
    let mut labels = Vec::new();
    let mut elements = Vec::new();
    for (label, e) in m.labels.iter().zip(&m.elements) {
        let eig = e.eig()?;
        let pieces: Vec<usize> = (0..eig.values.len()).filter(|&k| eig.values[k] > RANK_TOL).collect();
        for &k in &pieces {
            let piece = HermitianMatrix::ket_bra(&eig.vector(k)).scale(eig.values[k]);
            labels.push(if pieces.len() == 1 {
                label.clone()
            } else {
                format!("{label}.{k}")
            });
            elements.push(piece);
        }
    }
    Povm::with_labels(labels, elements, m.copies)
}

/// Tensor-product POVM over the Cartesian product of outcome sets.
pub fn product_povm(factors: &[Povm]) -> Result<Povm> {
    let (first, rest) = factors
        .split_first()
        .ok_or_else(|| Error::InvalidPovm("product of zero POVMs".into()))?;
    let mut acc = first.clone();
    for f in rest {
        let mut labels = Vec::with_capacity(acc.len() * f.len());
        let mut elements = Vec::with_capacity(acc.len() * f.len());
        for (la, a) in acc.labels.iter().zip(&acc.elements) {
            for (lb, b) in f.labels.iter().zip(&f.elements) {
                labels.push(format!("{la},{lb}"));
                elements.push(a.tensor(b)?);
            }
        }
        acc = Povm::with_labels(labels, elements, acc.copies + f.copies)?;
    }
    Ok(acc)
}

/// Born-rule probabilities `tr(ρ M_ξ)`, round-off negativity clamped and the
/// vector renormalised.
pub fn outcome_distribution(m: &Povm, rho: &HermitianMatrix) -> Result<Vec<f64>> {
    if rho.dim() != m.dim() {
        return Err(Error::Shape(format!(
            "state has dimension {} but the POVM acts on {}",
            rho.dim(),
            m.dim()
        )));
    }
    let mut probs = Vec::with_capacity(m.len());
    for (k, e) in m.elements.iter().enumerate() {
        let p = rho.trace_product(e);
        if p < -NEGATIVE_PROBABILITY_TOL {
            return Err(Error::NegativeProbability {
                outcome: k,
                probability: p,
            });
        }
        probs.push(p.max(0.0));
    }
    let total: f64 = probs.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidPovm("outcome probabilities sum to zero".into()));
    }
    Ok(probs.into_iter().map(|p| p / total).collect())
}

/// Draws one outcome index from the Born distribution.
pub fn sample_outcome<R: Rng + ?Sized>(m: &Povm, rho: &HermitianMatrix, rng: &mut R) -> Result<usize> {
    let probs = outcome_distribution(m, rho)?;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return Ok(k);
        }
    }
    // u landed in the round-off gap above the final cumulative sum
    Ok(probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1))
}
