use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use qcrb::estimation::{Allocation, CovariantEstimator, GridSpec, OutOfBallPolicy, TargetSpec, DEFAULT_EXPONENT};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Verify,
    Design,
    Simulate,
    Covariant,
    Counterexample,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Verify => "verify",
            CommandKind::Design => "design",
            CommandKind::Simulate => "simulate",
            CommandKind::Covariant => "covariant",
            CommandKind::Counterexample => "counterexample",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    /// Bloch coordinates of a qubit density matrix.
    MixedQubit,
    /// Polar angles `(η, φ)` of a pure qubit.
    PureQubit,
    /// Generalised Gell-Mann coordinates of a qudit density matrix.
    MixedQudit,
    /// Tangent chart of pure qudit states around a reference vector.
    PureQudit,
}

impl Chart {
    pub fn is_pure(self) -> bool {
        matches!(self, Chart::PureQubit | Chart::PureQudit)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ThetaSpec {
    Values(Vec<Vec<f64>>),
    Grid(GridSpec),
}

impl ThetaSpec {
    /// Points in row-major order.
    pub fn points(&self) -> CliResult<Vec<Vec<f64>>> {
        match self {
            ThetaSpec::Values(v) => Ok(v.clone()),
            ThetaSpec::Grid(g) => {
                if g.lower.len() != g.upper.len() || !(g.step > 0.0) {
                    return Err(CliError::config("theta.grid", "lower/upper lengths differ or step is not positive"));
                }
                let lens: Vec<usize> = g
                    .lower
                    .iter()
                    .zip(&g.upper)
                    .map(|(l, u)| ((u - l) / g.step + 1e-9).floor().max(-1.0) as i64 + 1)
                    .map(|n| n.max(0) as usize)
                    .collect();
                let total: usize = lens.iter().product();
                if total > 100_000 {
                    return Err(CliError::config("theta.grid", format!("{total} points exceeds the 100000 cap")));
                }
                Ok((0..total)
                    .map(|mut flat| {
                        let mut p = vec![0.0; lens.len()];
                        for k in (0..lens.len()).rev() {
                            p[k] = g.lower[k] + (flat % lens[k]) as f64 * g.step;
                            flat /= lens[k];
                        }
                        p
                    })
                    .collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinPovm {
    /// Random rank-one POVMs (products of single-copy ones on mixed states).
    RandomExhaustive,
    /// Random POVMs with higher-rank elements.
    RandomCoarse,
    /// The two-copy measurement with σ⊗σ outcomes and the singlet.
    Counterexample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PovmSource {
    Builtin(BuiltinPovm),
    /// JSON document with `dim`, `copies`, `elements` and optional `labels`.
    File(PathBuf),
}

/// A reproducible experiment: every command is a pure function of it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentManifest {
    pub command: CommandKind,
    pub model: Chart,
    /// Hilbert dimensions swept by `verify`.
    #[serde(default)]
    pub dims: Vec<usize>,
    /// Copy counts N.
    #[serde(default)]
    pub copies: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<ThetaSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub povm: Option<PovmSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetSpec>,
    /// Cases per cell for `verify`, Monte Carlo trials otherwise.
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_exponent")]
    pub exponent: f64,
    #[serde(default)]
    pub policy: OutOfBallPolicy,
    #[serde(default)]
    pub allocation: Allocation,
    #[serde(default)]
    pub estimator: CovariantEstimator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn default_exponent() -> f64 {
    DEFAULT_EXPONENT
}

impl ExperimentManifest {
    /// The manifest a command runs with when none is given.
    pub fn default_for(command: CommandKind) -> Self {
        let base = ExperimentManifest {
            command,
            model: Chart::MixedQubit,
            dims: Vec::new(),
            copies: Vec::new(),
            theta: None,
            povm: None,
            target: None,
            trials: 100,
            seed: 0,
            exponent: DEFAULT_EXPONENT,
            policy: OutOfBallPolicy::default(),
            allocation: Allocation::default(),
            estimator: CovariantEstimator::default(),
            out: None,
        };
        match command {
            CommandKind::Verify => ExperimentManifest {
                model: Chart::PureQudit,
                dims: vec![2, 3],
                copies: vec![1, 2],
                povm: Some(PovmSource::Builtin(BuiltinPovm::RandomExhaustive)),
                ..base
            },
            CommandKind::Counterexample => ExperimentManifest {
                dims: vec![2],
                copies: vec![2],
                povm: Some(PovmSource::Builtin(BuiltinPovm::Counterexample)),
                trials: 1,
                ..base
            },
            CommandKind::Design => ExperimentManifest {
                theta: Some(ThetaSpec::Values(vec![vec![0.0, 0.0, 0.5]])),
                target: Some(TargetSpec::HelstromFraction { fraction: 1.0 / 3.0 }),
                trials: 1,
                ..base
            },
            CommandKind::Simulate => ExperimentManifest {
                copies: vec![1_000, 10_000],
                theta: Some(ThetaSpec::Values(vec![vec![0.0, 0.0, 0.5]])),
                target: Some(TargetSpec::HelstromFraction { fraction: 1.0 / 3.0 }),
                trials: 1_000,
                ..base
            },
            CommandKind::Covariant => ExperimentManifest {
                model: Chart::PureQubit,
                copies: vec![100, 1_000],
                target: Some(TargetSpec::CostHelstrom { fraction: 0.25 }),
                trials: 10_000,
                ..base
            },
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::config(path, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises")
    }

    /// Field-level checks shared by every command.
    pub fn validate(&self) -> CliResult<()> {
        if self.trials == 0 {
            return Err(CliError::config("trials", "must be at least 1"));
        }
        if let Some(&n) = self.copies.iter().find(|&&n| n == 0) {
            return Err(CliError::config("copies", format!("copy count {n} must be positive")));
        }
        if let Some(&d) = self.dims.iter().find(|&&d| d < 2) {
            return Err(CliError::config("dims", format!("dimension {d} must be at least 2")));
        }
        if !(self.exponent > 0.0 && self.exponent < 1.0) {
            return Err(CliError::config("exponent", format!("{} is not in (0, 1)", self.exponent)));
        }
        Ok(())
    }
}
