//! Two-stage adaptive qubit estimation and its Monte Carlo harness.
//!
//! Stage 1 spends `N₀ = 3⌈N^a/3⌉` copies on σx, σy, σz tomography to get a
//! preliminary estimate θ̃. Stage 2 measures the remaining `N' = N - N₀`
//! copies with the optimal design at θ̃ and inverts the observed spin means.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{design_mixed_qubit, design_pure_qubit, mixed_qubit_helstrom, optimal_scaled_mqe, validate_target, MixedQubitDesign, PureQubitDesign};
use crate::error::{Error, Result};
use crate::information::{InfoKind, InfoMatrix};
use crate::matkit::{dot, norm, RealSymMatrix};
use crate::quantum::{outcome_distribution, BlochVector, ParametricModel, Povm, PureQubitPolar};
use crate::random::{random_ball_point, random_unit_vector3};

pub const DEFAULT_EXPONENT: f64 = 0.7;
/// Out-of-ball preliminary estimates are pulled back to this radius.
pub const PROJECTION_RADIUS: f64 = 1.0 - 1e-6;
/// Random domain points checked when a protocol target is validated.
pub const TARGET_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// Full mixed qubit, parameters are the Bloch coordinates.
    MixedFull,
    /// Pure qubit, parameters are the polar angles `(η, φ)`.
    PureFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutOfBallPolicy {
    #[default]
    Project,
    Discard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Allocation {
    /// `X_i = ⌊γ_i N'⌋`, leftovers unmeasured.
    #[default]
    Deterministic,
    /// Every copy independently picks direction `i` with probability `γ_i`.
    Multinomial,
}

/// The target information as a function of the preliminary estimate.
///
/// For the mixed model matrices are in Bloch coordinates. For the pure model
/// they are in the tangent chart at θ̃, where `H` is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    /// `G = fraction · H(θ)`
    HelstromFraction { fraction: f64 },
    /// A fixed `G`.
    ConstantG { matrix: RealSymMatrix },
    /// `G = W_opt⁻¹` for a fixed quadratic cost `C`.
    Cost { matrix: RealSymMatrix },
    /// `G = W_opt⁻¹` for `C = fraction · H(θ)`.
    CostHelstrom { fraction: f64 },
}

impl TargetSpec {
    /// Target information at a point whose Helstrom matrix is `h`.
    pub fn at(&self, h: &RealSymMatrix) -> Result<InfoMatrix> {
        let g = match self {
            TargetSpec::HelstromFraction { fraction } => h.scale(*fraction),
            TargetSpec::ConstantG { matrix } => matrix.clone(),
            TargetSpec::Cost { matrix } => cost_target(matrix, h)?,
            TargetSpec::CostHelstrom { fraction } => cost_target(&h.scale(*fraction), h)?,
        };
        if g.dim() != h.dim() {
            return Err(Error::Target(format!("target is {0}x{0}, model has {1} parameters", g.dim(), h.dim())));
        }
        InfoMatrix::new(InfoKind::Target, g).map_err(|e| Error::Target(e.to_string()))
    }
}

fn cost_target(cost: &RealSymMatrix, h: &RealSymMatrix) -> Result<RealSymMatrix> {
    // W_opt⁻¹ satisfies tr(H⁻¹G) = d - 1 = 1 for a qubit
    let opt = optimal_scaled_mqe(
        &InfoMatrix::new(InfoKind::Cost, cost.clone())?,
        &InfoMatrix::new(InfoKind::Helstrom, h.clone())?,
        2,
    )?;
    opt.w_opt.matrix.inv()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    /// Total copy count N.
    pub copies: usize,
    /// Stage-1 exponent `a`.
    pub exponent: f64,
    pub target: TargetSpec,
    pub policy: OutOfBallPolicy,
    pub allocation: Allocation,
    pub model: ModelKind,
    pub seed: u64,
}

impl ProtocolConfig {
    pub fn new(model: ModelKind, copies: usize, target: TargetSpec) -> Self {
        Self {
            copies,
            exponent: DEFAULT_EXPONENT,
            target,
            policy: OutOfBallPolicy::default(),
            allocation: Allocation::default(),
            model,
            seed: 0,
        }
    }

    /// `N₀ = 3⌈N^a/3⌉`
    pub fn stage1_copies(&self) -> usize {
        3 * ((self.copies as f64).powf(self.exponent) / 3.0).ceil() as usize
    }

    pub fn stage2_copies(&self) -> usize {
        self.copies.saturating_sub(self.stage1_copies())
    }

    pub fn param_dim(&self) -> usize {
        match self.model {
            ModelKind::MixedFull => 3,
            ModelKind::PureFull => 2,
        }
    }

    /// Checks the copy budget and samples the target over the domain: it must
    /// be positive definite with `tr(H⁻¹G) ≤ 1` at every sampled point.
    pub fn validate(&self) -> Result<()> {
        if !(self.exponent > 0.0 && self.exponent < 1.0) {
            return Err(Error::Config(format!("exponent a = {} must lie in (0, 1)", self.exponent)));
        }
        if self.stage1_copies() >= self.copies {
            return Err(Error::Config(format!(
                "stage 1 uses {} of {} copies, leaving none for stage 2",
                self.stage1_copies(),
                self.copies
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5eed_7a59_e7a1);
        for _ in 0..TARGET_SAMPLES {
            let h = match self.model {
                ModelKind::MixedFull => mixed_qubit_helstrom(&random_ball_point(PROJECTION_RADIUS, &mut rng))?,
                ModelKind::PureFull => RealSymMatrix::identity(2),
            };
            let g = self.target.at(&h)?;
            let check = validate_target(&g, &InfoMatrix::new(InfoKind::Helstrom, h)?)?;
            if !check.admissible {
                return Err(Error::Target(format!("tr(H⁻¹G) = {:.6e} exceeds 1", check.trace)));
            }
            if g.matrix.min_eigenvalue()? <= 0.0 {
                return Err(Error::Target("protocol targets must be positive definite".into()));
            }
            if self.model == ModelKind::PureFull {
                break;
            }
        }
        Ok(())
    }
}

/// `(+, -)` tallies of the σx, σy, σz measurements. Counts are reals so the
/// noiseless limit can use expected values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stage1Counts {
    pub plus: [f64; 3],
    pub minus: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stage1Estimate {
    /// Raw estimate `(n₊ - n₋)/(n₊ + n₋)` per axis.
    pub raw: [f64; 3],
    pub theta_tilde: BlochVector,
    pub discarded: bool,
}

pub fn stage1_estimate(counts: &Stage1Counts, model: ModelKind, policy: OutOfBallPolicy) -> Result<Stage1Estimate> {
    let mut raw = [0.0; 3];
    for axis in 0..3 {
        let total = counts.plus[axis] + counts.minus[axis];
        if !(total > 0.0) {
            return Err(Error::InsufficientData { axis });
        }
        raw[axis] = (counts.plus[axis] - counts.minus[axis]) / total;
    }
    let n = norm(&raw);
    let (tilde, discarded) = match model {
        ModelKind::PureFull => {
            // a perfectly balanced record carries no direction; fall back to +z
            let dir = if n > 0.0 { raw.map(|x| x / n) } else { [0.0, 0.0, 1.0] };
            (dir, false)
        }
        ModelKind::MixedFull if n > 1.0 && policy == OutOfBallPolicy::Discard => (raw, true),
        // the design needs an interior point, so near-boundary estimates are
        // pulled in under either policy
        ModelKind::MixedFull if n > PROJECTION_RADIUS => (raw.map(|x| x * PROJECTION_RADIUS / n), false),
        ModelKind::MixedFull => (raw, false),
    };
    let theta_tilde = if discarded {
        BlochVector::new(raw.map(|x| x / n))?
    } else {
        BlochVector::new(tilde)?
    };
    Ok(Stage1Estimate {
        raw,
        theta_tilde,
        discarded,
    })
}

fn require_full_rank(design: &MixedQubitDesign) -> Result<()> {
    match design.gammas.iter().position(|&g| g <= 0.0) {
        Some(index) => Err(Error::RankDeficientDesign { index }),
        None => Ok(()),
    }
}

/// Linear inversion `θ̂ = H^{-1/2} Σ_i ‖H^{1/2} f_i‖ η̂_i f_i` with H at the
/// design point, projected onto the unit ball when it lands outside.
pub fn stage2_estimate(design: &MixedQubitDesign, frequencies: &[f64; 3]) -> Result<[f64; 3]> {
    require_full_rank(design)?;
    let h = mixed_qubit_helstrom(&design.theta0.coords())?;
    let h_half = h.sqrt()?;
    let mut v = [0.0; 3];
    for (f, eta) in design.eigvecs.iter().zip(frequencies) {
        let g = norm(&h_half.matvec(f));
        for k in 0..3 {
            v[k] += g * eta * f[k];
        }
    }
    let theta = h.inv_sqrt()?.matvec(&v);
    let n = norm(&theta);
    Ok(std::array::from_fn(|k| if n > 1.0 { theta[k] / n } else { theta[k] }))
}

/// MQE of the stage-2 estimator when the design is built at θ̃ but the true
/// state is θ⁰ and `γ_i N'` copies go to direction `i`:
/// `V = (1/N') Σ_i (1/γ_i)(1 - (θ⁰·m_i)²)‖g_i‖² H^{-1/2} f_i f_iᵀ H^{-1/2}`.
pub fn conditional_mqe(design: &MixedQubitDesign, theta0: &BlochVector, stage2_copies: usize) -> Result<InfoMatrix> {
    require_full_rank(design)?;
    let counts = design.gammas.map(|g| g * stage2_copies as f64);
    conditional_mqe_allocated(design, theta0, &counts)
}

/// As [`conditional_mqe`] for explicit per-direction copy counts `X_i`.
pub fn conditional_mqe_allocated(design: &MixedQubitDesign, theta0: &BlochVector, counts: &[f64; 3]) -> Result<InfoMatrix> {
    if let Some(index) = counts.iter().position(|&x| x <= 0.0) {
        return Err(Error::RankDeficientDesign { index });
    }
    let h = mixed_qubit_helstrom(&design.theta0.coords())?;
    let h_half = h.sqrt()?;
    let h_inv_half = h.inv_sqrt()?;
    let mut v = RealSymMatrix::zeros(3);
    for k in 0..3 {
        let g = h_half.matvec(&design.eigvecs[k]);
        let g2 = dot(&g, &g);
        let cos = dot(&theta0.coords(), &g) / g2.sqrt();
        let a = h_inv_half.matvec(&design.eigvecs[k]);
        v = &v + &RealSymMatrix::outer(&a).scale((1.0 - cos * cos) * g2 / counts[k]);
    }
    InfoMatrix::new(InfoKind::Mqe, v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Accepted,
    /// Stage-1 estimate outside the ball under the discard policy.
    Discarded,
    /// A design direction received no copies.
    Flagged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    /// Parameters in model coordinates: Bloch for the mixed model, `(η, φ)`
    /// for the pure model.
    pub theta_true: Vec<f64>,
    pub theta_tilde: BlochVector,
    pub theta_hat: Vec<f64>,
    /// Bloch vector of the final estimate.
    pub bloch_hat: [f64; 3],
    pub status: TrialStatus,
    /// Copies per design direction.
    pub allocations: Vec<f64>,
    /// Empirical spin means η̂_i per design direction.
    pub frequencies: Vec<f64>,
}

impl TrialResult {
    /// `θ̂ - θ`, with the azimuth difference wrapped to `(-π, π]` for the
    /// pure model.
    pub fn error(&self, model: ModelKind) -> Vec<f64> {
        let mut e: Vec<f64> = self.theta_hat.iter().zip(&self.theta_true).map(|(a, b)| a - b).collect();
        if model == ModelKind::PureFull {
            e[1] = wrap_angle(e[1]);
        }
        e
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(x: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let y = x.rem_euclid(TAU);
    if y > PI {
        y - TAU
    } else {
        y
    }
}

/// Source of binomial counts: random draws or their expectations.
trait CountSource {
    fn binomial(&mut self, n: f64, p: f64) -> f64;
}

struct Sampled<'a, R: Rng>(&'a mut R);

impl<R: Rng> CountSource for Sampled<'_, R> {
    fn binomial(&mut self, n: f64, p: f64) -> f64 {
        let n = n.round() as u64;
        if n == 0 {
            return 0.0;
        }
        Binomial::new(n, p.clamp(0.0, 1.0)).expect("valid binomial").sample(self.0) as f64
    }
}

struct Expected;

impl CountSource for Expected {
    fn binomial(&mut self, n: f64, p: f64) -> f64 {
        n * p.clamp(0.0, 1.0)
    }
}

/// Per-trial rng: the master seed selects the key, the trial index the stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn true_bloch(config: &ProtocolConfig, theta_true: &[f64]) -> Result<[f64; 3]> {
    if theta_true.len() != config.param_dim() {
        return Err(Error::Domain(format!(
            "expected {} parameters, got {}",
            config.param_dim(),
            theta_true.len()
        )));
    }
    match config.model {
        ModelKind::MixedFull => {
            let r = [theta_true[0], theta_true[1], theta_true[2]];
            if norm(&r) >= 1.0 {
                return Err(Error::Domain(format!("|θ| = {} is not inside the unit ball", norm(&r))));
            }
            Ok(r)
        }
        ModelKind::PureFull => {
            if !PureQubitPolar.in_domain(theta_true) {
                return Err(Error::Domain(format!("polar angle {} outside (0, π)", theta_true[0])));
            }
            Ok(PureQubitPolar::bloch(theta_true[0], theta_true[1]))
        }
    }
}

fn stage1_counts(config: &ProtocolConfig, r: &[f64; 3], src: &mut dyn CountSource) -> Stage1Counts {
    let per_axis = (config.stage1_copies() / 3) as f64;
    let mut counts = Stage1Counts {
        plus: [0.0; 3],
        minus: [0.0; 3],
    };
    for k in 0..3 {
        let plus = src.binomial(per_axis, 0.5 * (1.0 + r[k]));
        counts.plus[k] = plus;
        counts.minus[k] = per_axis - plus;
    }
    counts
}

fn allocate(config: &ProtocolConfig, weights: &[f64], src: &mut dyn CountSource) -> Vec<f64> {
    let n2 = config.stage2_copies() as f64;
    match config.allocation {
        Allocation::Deterministic => weights.iter().map(|g| (g * n2).floor()).collect(),
        Allocation::Multinomial => {
            let mut left = n2;
            let mut mass = 1.0;
            weights
                .iter()
                .map(|&g| {
                    let x = if mass > 0.0 { src.binomial(left, g / mass) } else { 0.0 };
                    left -= x;
                    mass -= g;
                    x
                })
                .collect()
        }
    }
}

fn spin_means(r: &[f64; 3], directions: &[[f64; 3]], allocations: &[f64], src: &mut dyn CountSource) -> Vec<f64> {
    directions
        .iter()
        .zip(allocations)
        .map(|(m, &x)| {
            if x <= 0.0 {
                return 0.0;
            }
            let plus = src.binomial(x, 0.5 * (1.0 + dot(r, m)));
            2.0 * plus / x - 1.0
        })
        .collect()
}

fn run_with(config: &ProtocolConfig, theta_true: &[f64], src: &mut dyn CountSource) -> Result<TrialResult> {
    let r = true_bloch(config, theta_true)?;
    let stage1 = stage1_estimate(&stage1_counts(config, &r, src), config.model, config.policy)?;
    let tilde = stage1.theta_tilde;
    let mut result = TrialResult {
        theta_true: theta_true.to_vec(),
        theta_tilde: tilde,
        theta_hat: stage1_coordinates(config.model, &tilde.coords()),
        bloch_hat: tilde.coords(),
        status: TrialStatus::Discarded,
        allocations: Vec::new(),
        frequencies: Vec::new(),
    };
    if stage1.discarded {
        return Ok(result);
    }
    match config.model {
        ModelKind::MixedFull => {
            let h = mixed_qubit_helstrom(&tilde.coords())?;
            let design = design_mixed_qubit(&config.target.at(&h)?, &tilde)?;
            require_full_rank(&design)?;
            result.allocations = allocate(config, &design.gammas, src);
            result.frequencies = spin_means(&r, &design.directions, &result.allocations, src);
            if result.allocations.iter().any(|&x| x <= 0.0) {
                result.status = TrialStatus::Flagged;
                return Ok(result);
            }
            let eta = [result.frequencies[0], result.frequencies[1], result.frequencies[2]];
            let hat = stage2_estimate(&design, &eta)?;
            result.theta_hat = hat.to_vec();
            result.bloch_hat = hat;
        }
        ModelKind::PureFull => {
            let design = design_pure_qubit(&config.target.at(&RealSymMatrix::identity(2))?, &tilde.coords())?;
            result.allocations = allocate(config, &design.probs, src);
            result.frequencies = spin_means(&r, &design.directions, &result.allocations, src);
            if result.allocations.iter().any(|&x| x <= 0.0) {
                result.status = TrialStatus::Flagged;
                return Ok(result);
            }
            let hat = pure_stage2_estimate(&design, &[result.frequencies[0], result.frequencies[1]]);
            let (eta, phi) = PureQubitPolar::angles(&hat);
            result.theta_hat = vec![eta, phi];
            result.bloch_hat = hat;
        }
    }
    result.status = TrialStatus::Accepted;
    Ok(result)
}

fn stage1_coordinates(model: ModelKind, r: &[f64; 3]) -> Vec<f64> {
    match model {
        ModelKind::MixedFull => r.to_vec(),
        ModelKind::PureFull => {
            let (eta, phi) = PureQubitPolar::angles(r);
            vec![eta, phi]
        }
    }
}

/// Bloch vector `η̂₁u₁ + η̂₂u₂ + √(1 - η̂₁² - η̂₂²) n` in the design frame;
/// `(η̂₁, η̂₂)` is first normalised if it leaves the unit disc.
pub fn pure_stage2_estimate(design: &PureQubitDesign, frequencies: &[f64; 2]) -> [f64; 3] {
    let [mut a, mut b] = *frequencies;
    let s = (a * a + b * b).sqrt();
    if s > 1.0 {
        a /= s;
        b /= s;
    }
    let rest = (1.0 - a * a - b * b).max(0.0).sqrt();
    let [u1, u2] = design.directions;
    let n = design.frame.n;
    std::array::from_fn(|k| a * u1[k] + b * u2[k] + rest * n[k])
}

/// One protocol run on the trial's own rng stream.
pub fn run_protocol(config: &ProtocolConfig, theta_true: &[f64], trial_index: u64) -> Result<TrialResult> {
    let mut rng = trial_rng(config.seed, trial_index);
    run_protocol_with_rng(config, theta_true, &mut rng)
}

pub fn run_protocol_with_rng<R: Rng>(config: &ProtocolConfig, theta_true: &[f64], rng: &mut R) -> Result<TrialResult> {
    run_with(config, theta_true, &mut Sampled(rng))
}

/// The protocol with every count replaced by its expectation.
pub fn run_protocol_noiseless(config: &ProtocolConfig, theta_true: &[f64]) -> Result<TrialResult> {
    run_with(config, theta_true, &mut Expected)
}

/// Runs `trials` independent protocol trials in parallel, returned in trial
/// order.
pub fn run_trials(config: &ProtocolConfig, theta_true: &[f64], trials: usize) -> Result<Vec<TrialResult>> {
    (0..trials as u64)
        .into_par_iter()
        .map(|t| run_protocol(config, theta_true, t))
        .collect()
}

/// Empirical mean quadratic error matrix.
#[derive(Debug, Clone)]
pub struct MqeEstimate {
    /// `mean (θ̂ - θ)(θ̂ - θ)ᵀ` over accepted trials.
    pub v_hat: InfoMatrix,
    /// Standard error of each entry of `v_hat`.
    pub stderr: Vec<Vec<f64>>,
    pub trials: usize,
    pub accepted: usize,
    /// Fraction of trials excluded (discarded or flagged).
    pub discard_rate: f64,
}

impl MqeEstimate {
    /// Second moment of a list of error vectors.
    pub fn from_errors(errors: &[Vec<f64>], trials: usize) -> Result<Self> {
        let n = errors.len();
        if n < 2 {
            return Err(Error::Config(format!("{n} usable trials; at least two are needed")));
        }
        let p = errors[0].len();
        let mut mean = vec![0.0; p * p];
        for e in errors {
            for i in 0..p {
                for j in 0..p {
                    mean[i * p + j] += e[i] * e[j];
                }
            }
        }
        mean.iter_mut().for_each(|x| *x /= n as f64);
        let mut var = vec![0.0; p * p];
        for e in errors {
            for i in 0..p {
                for j in 0..p {
                    let d = e[i] * e[j] - mean[i * p + j];
                    var[i * p + j] += d * d;
                }
            }
        }
        let stderr = (0..p)
            .map(|i| (0..p).map(|j| (var[i * p + j] / (n - 1) as f64 / n as f64).sqrt()).collect())
            .collect();
        Ok(Self {
            v_hat: InfoMatrix::new(InfoKind::Mqe, RealSymMatrix::new(p, mean)?)?,
            stderr,
            trials,
            accepted: n,
            discard_rate: (trials - n) as f64 / trials as f64,
        })
    }

    /// `N · V̂`
    pub fn scaled(&self, copies: usize) -> RealSymMatrix {
        self.v_hat.matrix.scale(copies as f64)
    }
}

pub fn mqe_from_trials(results: &[TrialResult], model: ModelKind) -> Result<MqeEstimate> {
    let errors: Vec<Vec<f64>> = results
        .iter()
        .filter(|t| t.status == TrialStatus::Accepted)
        .map(|t| t.error(model))
        .collect();
    MqeEstimate::from_errors(&errors, results.len())
}

/// Monte Carlo estimate of the protocol's MQE matrix at `θ_true`.
pub fn monte_carlo_mqe(config: &ProtocolConfig, theta_true: &[f64], trials: usize) -> Result<MqeEstimate> {
    if trials < 2 {
        return Err(Error::Config(format!("trials = {trials}; at least two are needed")));
    }
    let results = run_trials(config, theta_true, trials)?;
    mqe_from_trials(&results, config.model)
}

/// Monte Carlo MQE of stage 2 alone: the design is fixed, `⌊γ_i N'⌋` copies
/// go to direction `i`, and outcomes are drawn at the true point θ⁰.
pub fn conditional_monte_carlo(
    design: &MixedQubitDesign,
    theta0: &BlochVector,
    stage2_copies: usize,
    trials: usize,
    seed: u64,
) -> Result<MqeEstimate> {
    require_full_rank(design)?;
    let counts = design.gammas.map(|g| (g * stage2_copies as f64).floor());
    if let Some(index) = counts.iter().position(|&x| x <= 0.0) {
        return Err(Error::RankDeficientDesign { index });
    }
    let r = theta0.coords();
    let errors = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let eta = spin_means(&r, &design.directions, &counts, &mut Sampled(&mut rng));
            let hat = stage2_estimate(design, &[eta[0], eta[1], eta[2]])?;
            Ok((0..3).map(|k| hat[k] - r[k]).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    MqeEstimate::from_errors(&errors, trials)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovariantEstimator {
    #[default]
    Protocol,
    /// Returns the true direction.
    Perfect,
    /// Returns the opposite direction.
    Antipodal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CovariantResult {
    pub copies: usize,
    pub trials: usize,
    /// Mean of `cos²(ω/2)` between true and estimated directions.
    pub mean_cost: f64,
    pub stderr: f64,
}

/// Pure-qubit protocol on uniformly random directions with the fidelity
/// cost `cos²(ω/2) = (1 + Ω·Ω̂)/2`.
///
/// `config.model` must be [`ModelKind::PureFull`]; its target is typically
/// `CostHelstrom { fraction: 0.25 }`, the quadratic expansion of the cost.
pub fn covariant_cost_experiment(
    config: &ProtocolConfig,
    trials: usize,
    estimator: CovariantEstimator,
) -> Result<CovariantResult> {
    if config.model != ModelKind::PureFull {
        return Err(Error::Config("the covariant experiment needs the pure model".into()));
    }
    if trials < 2 {
        return Err(Error::Config(format!("trials = {trials}; at least two are needed")));
    }
    let costs = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(config.seed, t);
            let omega = random_unit_vector3(&mut rng);
            let hat = match estimator {
                CovariantEstimator::Perfect => omega,
                CovariantEstimator::Antipodal => omega.map(|x| -x),
                CovariantEstimator::Protocol => {
                    let (eta, phi) = PureQubitPolar::angles(&omega);
                    // the polar chart excludes the poles; they have measure zero
                    let eta = eta.clamp(1e-12, std::f64::consts::PI - 1e-12);
                    run_protocol_with_rng(config, &[eta, phi], &mut rng)?.bloch_hat
                }
            };
            Ok(0.5 * (1.0 + dot(&omega, &hat)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = costs.len() as f64;
    let mean = costs.iter().sum::<f64>() / n;
    let var = costs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
    Ok(CovariantResult {
        copies: config.copies,
        trials,
        mean_cost: mean,
        stderr: (var / n).sqrt(),
    })
}

/// Axis-aligned box grid `lower + k·step`, `k = 0 ..` while `≤ upper`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub step: f64,
}

impl GridSpec {
    pub fn centered(center: &[f64], half_width: f64, step: f64) -> Self {
        Self {
            lower: center.iter().map(|c| c - half_width).collect(),
            upper: center.iter().map(|c| c + half_width).collect(),
            step,
        }
    }

    fn axis_len(&self, k: usize) -> usize {
        ((self.upper[k] - self.lower[k]) / self.step + 1e-9).floor() as usize + 1
    }

    fn point(&self, index: &[usize]) -> Vec<f64> {
        index.iter().enumerate().map(|(k, &i)| self.lower[k] + i as f64 * self.step).collect()
    }
}

/// Grid maximiser of `Σ_ξ n_ξ log p(ξ|θ)` over in-domain grid points. Ties
/// go to the lowest row-major index.
pub fn grid_mle(model: &dyn ParametricModel, povm: &Povm, counts: &[f64], grid: &GridSpec) -> Result<Vec<f64>> {
    let p = model.param_dim();
    if grid.lower.len() != p || grid.upper.len() != p || !(grid.step > 0.0) {
        return Err(Error::Config(format!("grid must span {p} axes with a positive step")));
    }
    if counts.len() != povm.len() {
        return Err(Error::Shape(format!("{} counts for {} outcomes", counts.len(), povm.len())));
    }
    let lens: Vec<usize> = (0..p).map(|k| grid.axis_len(k)).collect();
    let inner: usize = lens[1..].iter().product();
    let log_lik = |theta: &[f64]| -> Result<Option<f64>> {
        if !model.in_domain(theta) {
            return Ok(None);
        }
        let probs = outcome_distribution(povm, &model.rho(theta)?)?;
        let mut ll = 0.0;
        for (n, q) in counts.iter().zip(&probs) {
            if *n > 0.0 {
                ll += n * q.ln();
            }
        }
        Ok(Some(ll))
    };
    let best = (0..lens[0])
        .into_par_iter()
        .map(|i0| {
            let mut best: Option<(usize, f64)> = None;
            let mut index = vec![0; p];
            index[0] = i0;
            for flat in 0..inner {
                let mut rest = flat;
                for k in (1..p).rev() {
                    index[k] = rest % lens[k];
                    rest /= lens[k];
                }
                if let Some(ll) = log_lik(&grid.point(&index))? {
                    if best.is_none_or(|(_, b)| ll > b) {
                        best = Some((i0 * inner + flat, ll));
                    }
                }
            }
            Ok(best)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(usize, f64)>, (i, ll)| match acc {
            Some((_, b)) if b >= ll => acc,
            _ => Some((i, ll)),
        });
    let (flat, _) = best.ok_or_else(|| Error::Domain("no grid point lies inside the model domain".into()))?;
    let mut index = vec![0; p];
    let mut rest = flat;
    for k in (0..p).rev() {
        index[k] = rest % lens[k];
        rest /= lens[k];
    }
    Ok(grid.point(&index))
}
