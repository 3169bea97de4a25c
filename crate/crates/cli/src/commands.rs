use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use qcrb::design::{
    counterexample_povm, design_mixed_qubit, design_pure_qubit, mixed_qubit_helstrom, optimal_cost, MixedQubitDesign,
};
use qcrb::estimation::{
    covariant_cost_experiment, monte_carlo_mqe, ModelKind, ProtocolConfig, TargetSpec,
};
use qcrb::information::{
    fisher_information, gill_massar_trace, helstrom_bound_check, helstrom_matrix, partial_trace_bound, trace_bound,
};
use qcrb::matkit::{HermitianMatrix, RealSymMatrix};
use qcrb::quantum::{
    product_povm, BlochVector, FullMixedQudit, ParametricModel, Povm, PureQubitPolar, PureQubitTangent,
    PureQuditTangent,
};
use qcrb::random::{random_coarse_povm, random_density_matrix, random_exhaustive_povm, random_unitary};

use crate::error::{at, CliError, CliResult};
use crate::manifest::{BuiltinPovm, Chart, CommandKind, ExperimentManifest, PovmSource};
use crate::output::{num, Csv};

/// Absolute tolerance on equalities and inequalities of the verify suite.
pub const VERIFY_TOL: f64 = 1e-8;
/// Largest acceptable `‖I − G‖` of a realised design.
pub const DESIGN_TOL: f64 = 1e-9;

pub const VERIFY_HEADER: [&str; 7] = ["case_id", "d", "N", "p", "trace_value", "bound", "pass"];
pub const COVARIANT_HEADER: [&str; 4] = ["N", "mean_cost", "stderr", "one_minus_inv_n"];

/// Result of a command: the machine-readable body plus human notes.
#[derive(Debug, Default)]
pub struct Report {
    pub body: String,
    pub notes: Vec<String>,
    /// Rows where a bound that must hold was found violated.
    pub violations: Vec<String>,
}

pub fn run(manifest: &ExperimentManifest) -> CliResult<Report> {
    manifest.validate()?;
    match manifest.command {
        CommandKind::Verify | CommandKind::Counterexample => verify(manifest),
        CommandKind::Design => design(manifest),
        CommandKind::Simulate => simulate(manifest),
        CommandKind::Covariant => covariant(manifest),
    }
}

/// Independent master seed for each cell of a sweep.
fn cell_seed(seed: u64, cell: usize) -> u64 {
    seed.wrapping_add((cell as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15))
}

struct VerifyRow {
    case_id: String,
    d: usize,
    copies: usize,
    p: usize,
    value: f64,
    bound: f64,
    /// "true", "false", or "violation-expected"
    pass: &'static str,
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "true"
    } else {
        "false"
    }
}

fn model_for(chart: Chart, d: usize, rng: &mut ChaCha8Rng) -> CliResult<(Box<dyn ParametricModel>, Vec<f64>)> {
    if matches!(chart, Chart::MixedQubit | Chart::PureQubit) && d != 2 {
        return Err(CliError::config("dims", format!("qubit charts need d = 2, got {d}")));
    }
    Ok(if chart.is_pure() {
        let model = PureQuditTangent::rotated(d, random_unitary(d, rng)).map_err(at("dims"))?;
        let theta = (0..model.param_dim()).map(|_| rng.gen_range(-0.5..0.5)).collect();
        (Box::new(model), theta)
    } else {
        let model = FullMixedQudit::new(d).map_err(at("dims"))?;
        let theta = model.coordinates_of(&random_density_matrix(d, rng));
        (Box::new(model), theta)
    })
}

fn verify_random_cell(
    m: &ExperimentManifest,
    kind: BuiltinPovm,
    d: usize,
    copies: usize,
    cell: usize,
) -> CliResult<Vec<VerifyRow>> {
    let dim = d.checked_pow(copies as u32).filter(|&x| x <= 4096).ok_or_else(|| {
        CliError::config("copies", format!("d^N = {d}^{copies} exceeds the 4096 capacity cap"))
    })?;
    let bound = trace_bound(d, copies);
    let mut rng = ChaCha8Rng::seed_from_u64(cell_seed(m.seed, cell));
    let mut rows = Vec::new();
    for k in 0..m.trials {
        let (model, theta) = model_for(m.model, d, &mut rng)?;
        let povm = match kind {
            BuiltinPovm::RandomExhaustive if m.model.is_pure() || copies == 1 => {
                let outcomes = rng.gen_range(dim..=dim + 4);
                random_exhaustive_povm(dim, outcomes, copies, &mut rng)
            }
            // mixed states only promise the bound for separable measurements
            BuiltinPovm::RandomExhaustive => {
                let factors: Vec<Povm> = (0..copies)
                    .map(|_| {
                        let outcomes = rng.gen_range(d..=d * d + 1);
                        random_exhaustive_povm(d, outcomes, 1, &mut rng)
                    })
                    .collect();
                product_povm(&factors).map_err(at("povm"))?
            }
            BuiltinPovm::RandomCoarse => {
                let factors: Vec<Povm> = (0..copies)
                    .map(|_| random_coarse_povm(d, d * d, d, 1, &mut rng))
                    .collect();
                product_povm(&factors).map_err(at("povm"))?
            }
            BuiltinPovm::Counterexample => unreachable!("handled by the caller"),
        };
        let h = helstrom_matrix(model.as_ref(), &theta)?;
        let i = fisher_information(&povm, model.as_ref(), &theta, copies)?;
        let value = gill_massar_trace(&h, &i)?;
        let ok = match kind {
            BuiltinPovm::RandomExhaustive => (value - bound).abs() <= VERIFY_TOL,
            _ => value <= bound + VERIFY_TOL,
        };
        let p = model.param_dim();
        let tag = if kind == BuiltinPovm::RandomExhaustive { "exhaustive" } else { "coarse" };
        rows.push(VerifyRow {
            case_id: format!("{tag}-{d}-{copies}-{k}"),
            d,
            copies,
            p,
            value,
            bound,
            pass: verdict(ok),
        });

        if copies == 1 {
            let check = helstrom_bound_check(&i, &h, 1)?;
            rows.push(VerifyRow {
                case_id: format!("helstrom-{d}-{copies}-{k}"),
                d,
                copies,
                p,
                value,
                bound: p as f64,
                pass: verdict(check.holds),
            });
        }
    }
    if m.model.is_pure() && d >= 3 && kind == BuiltinPovm::RandomExhaustive {
        let model = PureQuditTangent::new(d).map_err(at("dims"))?;
        let theta = vec![0.0; model.param_dim()];
        for k in 0..m.trials.min(10) {
            let povm = random_exhaustive_povm(dim, dim + 2, copies, &mut rng);
            for level in 1..d {
                let mut diag = vec![0.0; d];
                diag[0] = 1.0;
                diag[level] = 1.0;
                let projector = HermitianMatrix::from_real_diagonal(&diag);
                let subset = [2 * (level - 1), 2 * (level - 1) + 1];
                let b = partial_trace_bound(&model, &theta, &subset, &projector, &povm, copies)?;
                rows.push(VerifyRow {
                    case_id: format!("partial-{d}-{copies}-{k}-{level}"),
                    d,
                    copies,
                    p: subset.len(),
                    value: b.lhs,
                    bound: b.bound,
                    pass: verdict(b.lhs <= b.bound + VERIFY_TOL),
                });
            }
        }
    }
    Ok(rows)
}

fn counterexample_row() -> CliResult<(VerifyRow, RealSymMatrix)> {
    let m = counterexample_povm();
    let model = FullMixedQudit::new(2)?;
    let theta = [0.0; 3];
    let i = fisher_information(&m, &model, &theta, 2)?;
    let h = helstrom_matrix(&model, &theta)?;
    let value = gill_massar_trace(&h, &i)?;
    let bound = trace_bound(2, 2);
    let pass = if value > bound + VERIFY_TOL { "violation-expected" } else { "false" };
    let row = VerifyRow {
        case_id: "counterexample".into(),
        d: 2,
        copies: 2,
        p: 3,
        value,
        bound,
        pass,
    };
    Ok((row, i.matrix))
}

fn verify_file(m: &ExperimentManifest, povm: &Povm) -> CliResult<Vec<VerifyRow>> {
    let copies = povm.copies();
    let dim = povm.dim();
    let d = (2..=dim)
        .find(|d| d.checked_pow(copies as u32) == Some(dim))
        .ok_or_else(|| CliError::config("povm", format!("dimension {dim} is not a {copies}-th power")))?;
    let points = m
        .theta
        .as_ref()
        .ok_or_else(|| CliError::config("theta", "a file POVM needs parameter values"))?
        .points()?;
    let model: Box<dyn ParametricModel> = match m.model {
        Chart::MixedQubit | Chart::MixedQudit => Box::new(FullMixedQudit::new(d).map_err(at("povm"))?),
        Chart::PureQubit | Chart::PureQudit => Box::new(PureQuditTangent::new(d).map_err(at("povm"))?),
    };
    let bound = trace_bound(d, copies);
    let mut rows = Vec::new();
    for (k, theta) in points.iter().enumerate() {
        if theta.len() != model.param_dim() {
            return Err(CliError::config("theta", format!("expected {} coordinates", model.param_dim())));
        }
        let h = helstrom_matrix(model.as_ref(), theta).map_err(at("theta"))?;
        let i = fisher_information(povm, model.as_ref(), theta, copies).map_err(at("theta"))?;
        let value = gill_massar_trace(&h, &i)?;
        // entangled measurements on mixed states may beat N(d-1)
        let pass = if value <= bound + VERIFY_TOL {
            "true"
        } else if copies > 1 && !m.model.is_pure() {
            "violation-expected"
        } else {
            "false"
        };
        rows.push(VerifyRow {
            case_id: format!("file-{k}"),
            d,
            copies,
            p: model.param_dim(),
            value,
            bound,
            pass,
        });
    }
    Ok(rows)
}

fn verify(m: &ExperimentManifest) -> CliResult<Report> {
    let source = m.povm.clone().unwrap_or(PovmSource::Builtin(BuiltinPovm::RandomExhaustive));
    let mut report = Report::default();
    let rows = match source {
        PovmSource::Builtin(BuiltinPovm::Counterexample) => {
            let (row, i) = counterexample_row()?;
            report.notes.push(format!(
                "I = [[{}]]",
                (0..3)
                    .map(|r| (0..3).map(|c| format!("{:.12}", i.get(r, c))).collect::<Vec<_>>().join(", "))
                    .collect::<Vec<_>>()
                    .join("], [")
            ));
            if row.pass != "violation-expected" {
                report.violations.push("the collective measurement did not exceed N(d-1)".into());
            }
            vec![row]
        }
        PovmSource::Builtin(kind) => {
            if m.dims.is_empty() || m.copies.is_empty() {
                return Err(CliError::config("dims", "verify needs non-empty `dims` and `copies`"));
            }
            let cells: Vec<(usize, usize)> =
                m.dims.iter().flat_map(|&d| m.copies.iter().map(move |&n| (d, n))).collect();
            let per_cell = cells
                .par_iter()
                .enumerate()
                .map(|(cell, &(d, n))| verify_random_cell(m, kind, d, n, cell))
                .collect::<CliResult<Vec<_>>>()?;
            per_cell.into_iter().flatten().collect()
        }
        PovmSource::File(path) => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::io(format!("reading POVM {}", path.display()), e))?;
            let povm = Povm::from_json(&text).map_err(at("povm.file"))?;
            verify_file(m, &povm)?
        }
    };
    let mut csv = Csv::new(&VERIFY_HEADER);
    for r in &rows {
        if r.pass == "false" {
            report.violations.push(format!("{}: {} vs bound {}", r.case_id, num(r.value), num(r.bound)));
        }
        csv.row(&[
            r.case_id.clone(),
            r.d.to_string(),
            r.copies.to_string(),
            r.p.to_string(),
            num(r.value),
            num(r.bound),
            r.pass.to_string(),
        ]);
    }
    let passed = rows.iter().filter(|r| r.pass != "false").count();
    report.notes.push(format!("{passed}/{} cases behave as expected", rows.len()));
    report.body = csv.finish();
    Ok(report)
}

/// Serialised form of either design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignDocument {
    Mixed(MixedQubitDesign),
    Pure {
        /// Bloch vector of the reference state.
        reference: [f64; 3],
        lambda: f64,
        probs: [f64; 2],
        directions: [[f64; 3]; 2],
    },
}

fn single_theta(m: &ExperimentManifest) -> CliResult<Vec<f64>> {
    let points = m
        .theta
        .as_ref()
        .ok_or_else(|| CliError::config("theta", "a design point is required"))?
        .points()?;
    match points.as_slice() {
        [one] => Ok(one.clone()),
        _ => Err(CliError::config("theta", format!("expected one point, got {}", points.len()))),
    }
}

fn target_of(m: &ExperimentManifest) -> CliResult<&TargetSpec> {
    m.target.as_ref().ok_or_else(|| CliError::config("target", "a target is required"))
}

fn design(m: &ExperimentManifest) -> CliResult<Report> {
    let theta = single_theta(m)?;
    let spec = target_of(m)?;
    let mut report = Report::default();
    let (doc, deviation, h) = match m.model {
        Chart::MixedQubit => {
            let coords: [f64; 3] = theta
                .as_slice()
                .try_into()
                .map_err(|_| CliError::config("theta", "the mixed qubit needs three coordinates"))?;
            let theta0 = BlochVector::new(coords).map_err(at("theta"))?;
            let h = mixed_qubit_helstrom(&coords).map_err(at("theta"))?;
            let g = spec.at(&h).map_err(at("target"))?;
            let design = design_mixed_qubit(&g, &theta0).map_err(at("target"))?;
            let i = fisher_information(&design.realize_povm(), &FullMixedQudit::new(2)?, &coords, 1)?;
            let dev = (&i.matrix - &g.matrix).max_abs();
            report.notes.push(format!("gammas = {:?}", design.gammas));
            (DesignDocument::Mixed(design), dev, h)
        }
        Chart::PureQubit => {
            if theta.len() != 2 || !PureQubitPolar.in_domain(&theta) {
                return Err(CliError::config("theta", "the pure qubit needs polar angles (η, φ) with 0 < η < π"));
            }
            let reference = PureQubitPolar::bloch(theta[0], theta[1]);
            let h = RealSymMatrix::identity(2);
            let g = spec.at(&h).map_err(at("target"))?;
            let design = design_pure_qubit(&g, &reference).map_err(at("target"))?;
            let model = PureQubitTangent::at_bloch(&reference);
            let i = fisher_information(&design.realize_povm(), &model, &[0.0, 0.0], 1)?;
            let dev = (&i.matrix - &g.matrix).max_abs();
            report.notes.push(format!("lambda = {}, probs = {:?}", num(design.lambda), design.probs));
            let doc = DesignDocument::Pure {
                reference,
                lambda: design.lambda,
                probs: design.probs,
                directions: design.directions,
            };
            (doc, dev, h)
        }
        _ => return Err(CliError::config("model", "design supports mixed_qubit and pure_qubit")),
    };
    report.notes.push(format!("deviation |I - G| = {}", num(deviation)));
    match spec {
        TargetSpec::Cost { matrix } => {
            report.notes.push(format!("min_cost = {}", num(optimal_cost(matrix, &h, 2).map_err(at("target"))?)));
        }
        TargetSpec::CostHelstrom { fraction } => {
            report.notes.push(format!("min_cost = {}", num(optimal_cost(&h.scale(*fraction), &h, 2)?)));
        }
        _ => {}
    }
    if deviation > DESIGN_TOL {
        return Err(CliError::Numerical(qcrb::Error::Target(format!(
            "realised information deviates from the target by {deviation:e}"
        ))));
    }
    report.body = serde_json::to_string_pretty(&doc).expect("design serialises") + "\n";
    Ok(report)
}

fn model_kind(chart: Chart) -> CliResult<ModelKind> {
    match chart {
        Chart::MixedQubit => Ok(ModelKind::MixedFull),
        Chart::PureQubit => Ok(ModelKind::PureFull),
        _ => Err(CliError::config("model", "protocols run on mixed_qubit or pure_qubit")),
    }
}

fn protocol_config(m: &ExperimentManifest, copies: usize, seed: u64) -> CliResult<ProtocolConfig> {
    let mut config = ProtocolConfig::new(model_kind(m.model)?, copies, target_of(m)?.clone());
    config.exponent = m.exponent;
    config.policy = m.policy;
    config.allocation = m.allocation;
    config.seed = seed;
    config.validate().map_err(at("target"))?;
    Ok(config)
}

/// Upper-triangle column names `prefix_ij`.
fn triangle(prefix: &str, p: usize) -> Vec<String> {
    (0..p).flat_map(|i| (i..p).map(move |j| format!("{prefix}_{}{}", i + 1, j + 1))).collect()
}

pub fn simulate_header(p: usize) -> Vec<String> {
    let mut h: Vec<String> = vec!["N".into(), "trials".into()];
    h.extend((0..p).map(|k| format!("theta_{}", k + 1)));
    h.extend(["policy".into(), "a".into()]);
    h.extend(triangle("nv", p));
    h.extend(triangle("se", p));
    h.extend(["discard_rate".into(), "trace_hinv_nv_inv".into(), "rel_dev_w".into()]);
    h
}

/// `W = G⁻¹` in the coordinates of the chart, when the target is defined
/// there; fixed matrices for the pure model live in a moving chart.
fn asymptotic_w(m: &ExperimentManifest, h: &RealSymMatrix) -> CliResult<Option<RealSymMatrix>> {
    let spec = target_of(m)?;
    let chart_free = matches!(spec, TargetSpec::HelstromFraction { .. } | TargetSpec::CostHelstrom { .. });
    if m.model == Chart::PureQubit && !chart_free {
        return Ok(None);
    }
    Ok(Some(spec.at(h).map_err(at("target"))?.matrix.inv()?))
}

fn simulate(m: &ExperimentManifest) -> CliResult<Report> {
    if m.copies.is_empty() {
        return Err(CliError::config("copies", "at least one copy count is required"));
    }
    if m.trials < 2 {
        return Err(CliError::config("trials", "at least two trials are required"));
    }
    let points = m
        .theta
        .as_ref()
        .ok_or_else(|| CliError::config("theta", "simulate needs parameter values"))?
        .points()?;
    let p = match model_kind(m.model)? {
        ModelKind::MixedFull => 3,
        ModelKind::PureFull => 2,
    };
    let mut csv = Csv::new(&simulate_header(p));
    let mut report = Report::default();
    let mut cell = 0;
    for &copies in &m.copies {
        for theta in &points {
            if theta.len() != p {
                return Err(CliError::config("theta", format!("expected {p} coordinates, got {}", theta.len())));
            }
            let config = protocol_config(m, copies, cell_seed(m.seed, cell))?;
            cell += 1;
            let h = match config.model {
                ModelKind::MixedFull => {
                    mixed_qubit_helstrom(&[theta[0], theta[1], theta[2]]).map_err(at("theta"))?
                }
                ModelKind::PureFull => helstrom_matrix(&PureQubitPolar, theta).map_err(at("theta"))?.matrix,
            };
            let est = monte_carlo_mqe(&config, theta, m.trials).map_err(at("theta"))?;
            let nv = est.scaled(copies);
            let stat = match nv.inv() {
                Ok(inv) => h.inv()?.trace_product(&inv),
                Err(_) => f64::INFINITY,
            };
            let rel = asymptotic_w(m, &h)?.map(|w| (&nv - &w).frobenius_norm() / w.frobenius_norm());
            let mut row = vec![copies.to_string(), m.trials.to_string()];
            row.extend(theta.iter().map(|&x| num(x)));
            row.push(serde_json::to_value(m.policy).unwrap().as_str().unwrap().to_string());
            row.push(num(m.exponent));
            row.extend((0..p).flat_map(|i| (i..p).map(move |j| (i, j))).map(|(i, j)| num(nv.get(i, j))));
            row.extend(
                (0..p)
                    .flat_map(|i| (i..p).map(move |j| (i, j)))
                    .map(|(i, j)| num(est.stderr[i][j] * copies as f64)),
            );
            row.push(num(est.discard_rate));
            row.push(num(stat));
            row.push(rel.map_or_else(|| "nan".to_string(), num));
            csv.row(&row);
            report.notes.push(format!(
                "N = {copies}, theta = {theta:?}: tr H⁻¹(NV)⁻¹ = {stat:.6}, discard rate {:.4}",
                est.discard_rate
            ));
        }
    }
    report.body = csv.finish();
    Ok(report)
}

fn covariant(m: &ExperimentManifest) -> CliResult<Report> {
    if m.model != Chart::PureQubit {
        return Err(CliError::config("model", "the covariant experiment runs on pure_qubit"));
    }
    if m.copies.is_empty() {
        return Err(CliError::config("copies", "at least one copy count is required"));
    }
    if m.trials < 2 {
        return Err(CliError::config("trials", "at least two trials are required"));
    }
    let mut csv = Csv::new(&COVARIANT_HEADER);
    let mut report = Report::default();
    for (cell, &copies) in m.copies.iter().enumerate() {
        let config = protocol_config(m, copies, cell_seed(m.seed, cell))?;
        let r = covariant_cost_experiment(&config, m.trials, m.estimator).map_err(at("copies"))?;
        let reference = 1.0 - 1.0 / copies as f64;
        csv.row(&[copies.to_string(), num(r.mean_cost), num(r.stderr), num(reference)]);
        report.notes.push(format!(
            "N = {copies}: mean cost {:.6} ± {:.6} (1 - 1/N = {reference:.6})",
            r.mean_cost, r.stderr
        ));
    }
    report.body = csv.finish();
    Ok(report)
}
