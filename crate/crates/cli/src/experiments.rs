//! The four experiments. Each produces CSV rows plus a JSON results block.

use serde::Serialize;
use serde_json::{json, Value};

use zeno_histories::histories::BranchResolution;
use zeno_histories::zeno::{fit_log_log, zeno_record};
use zeno_histories::{
    branch_resolution, evolve_step, generator_relation_check, hermitian_exponential, intertwining_check,
    make_schroedinger_path, schroedinger_residual, AuxState, Boundary, DirectIntegralState, GeneratorSpec,
    HamiltonianSpec, HermitianOperator, HistoryChain, HistoryDensity, HistoryEvaluator, HistoryIndex, StateSpec,
    TimeGrid, ZenoConfig, ZenoSweep,
};

use crate::config::{vector_from_pairs, Experiment, ExperimentConfig, StateConfig};

/// Fixed CSV columns of the Zeno sweep.
pub const ZENO_COLUMNS: [&str; 7] = [
    "n",
    "dt",
    "S_exact",
    "S_pred",
    "deficit_exact",
    "prediction_error",
    "flag_out_of_validity",
];
pub const STABILITY_COLUMNS: [&str; 5] = ["n", "dt", "max_residual", "S_exact", "deficit_exact"];
pub const CONSISTENCY_COLUMNS: [&str; 6] = ["history", "history_prime", "re", "im", "expected", "abs_error"];
pub const CHECK_COLUMNS: [&str; 5] = ["check", "parameter", "value", "tolerance", "pass"];

/// Generator-relation step refinements.
const HALVINGS: usize = 3;
const MIN_HALVING_RATIO: f64 = 1.6;

pub struct Outcome {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub results: Value,
    /// Names of tolerance checks that failed.
    pub failures: Vec<String>,
}

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn history_label(alpha: &HistoryIndex) -> String {
    alpha
        .as_slice()
        .iter()
        .map(usize::to_string)
        .collect::<Vec<_>>()
        .join("-")
}

pub fn run(cfg: &ExperimentConfig) -> zeno_histories::Result<Outcome> {
    match cfg.experiment {
        Experiment::ZenoSweep => zeno_sweep(cfg),
        Experiment::Stability => stability(cfg),
        Experiment::Consistency => consistency(cfg),
        Experiment::EvolveCheck => evolve_check(cfg),
    }
}

fn hamiltonian(cfg: &ExperimentConfig) -> zeno_histories::Result<HermitianOperator> {
    cfg.build_hamiltonian()
        .ok_or_else(|| zeno_histories::Error::InvalidArgument("hamiltonian could not be built".into()))
}

fn single_vector(cfg: &ExperimentConfig, s: &StateConfig) -> zeno_histories::Result<AuxState> {
    let d = cfg.dimension;
    match s {
        StateConfig::Basis { index } => AuxState::basis(d, *index),
        StateConfig::Amplitudes { values } => {
            vector_from_pairs(values).ok_or_else(|| zeno_histories::Error::InvalidArgument("state.values".into()))
        }
        StateConfig::Random { .. } => AuxState::random(d, cfg.state_seed()),
        StateConfig::SchroedingerPath { from } => single_vector(cfg, from),
    }
}

fn state_spec(cfg: &ExperimentConfig, n: usize) -> zeno_histories::Result<StateSpec> {
    let s = cfg
        .state
        .as_ref()
        .ok_or_else(|| zeno_histories::Error::InvalidArgument("state is missing".into()))?;
    Ok(match s {
        StateConfig::Random { per_slot: true, .. } => {
            StateSpec::PerSlot(AuxState::random_sequence(cfg.dimension, n, cfg.state_seed())?)
        }
        StateConfig::SchroedingerPath { from } => StateSpec::SchroedingerPath(single_vector(cfg, from)?),
        other => StateSpec::Identical(single_vector(cfg, other)?),
    })
}

fn zeno_config(cfg: &ExperimentConfig, n: usize, h: &HermitianOperator) -> zeno_histories::Result<ZenoConfig> {
    Ok(ZenoConfig {
        t_start: cfg.grid.t_start,
        span: cfg.grid.span,
        n_list: vec![n],
        hamiltonian: HamiltonianSpec::Constant(h.clone()),
        state: state_spec(cfg, n)?,
    })
}

fn grid_counts(cfg: &ExperimentConfig) -> Vec<usize> {
    cfg.grid
        .n_list
        .clone()
        .or_else(|| cfg.grid.n.map(|n| vec![n]))
        .unwrap_or_default()
}

fn slope_json(points: &[(f64, f64)]) -> Value {
    json!(fit_log_log(points))
}

fn zeno_sweep(cfg: &ExperimentConfig) -> zeno_histories::Result<Outcome> {
    let h = hamiltonian(cfg)?;
    let records = grid_counts(cfg)
        .into_iter()
        .map(|n| zeno_record(&zeno_config(cfg, n, &h)?, n))
        .collect::<zeno_histories::Result<Vec<_>>>()?;
    let deficit: Vec<(f64, f64)> = records.iter().map(|r| (r.n as f64, r.deficit_exact)).collect();
    let error: Vec<(f64, f64)> = records.iter().map(|r| (r.n as f64, r.prediction_error)).collect();
    let sweep = ZenoSweep {
        deficit_fit: fit_log_log(&deficit),
        prediction_error_fit: fit_log_log(&error),
        records,
    };
    let rows = sweep
        .records
        .iter()
        .map(|r| {
            vec![
                r.n.to_string(),
                float(r.dt),
                float(r.s_exact),
                float(r.s_pred),
                float(r.deficit_exact),
                float(r.prediction_error),
                r.out_of_validity.to_string(),
            ]
        })
        .collect();
    Ok(Outcome {
        header: ZENO_COLUMNS.to_vec(),
        rows,
        results: json!(sweep),
        failures: Vec::new(),
    })
}

#[derive(Serialize)]
struct StabilityPoint {
    n: usize,
    dt: f64,
    max_residual: f64,
    s_exact: f64,
    deficit_exact: f64,
}

fn stability(cfg: &ExperimentConfig) -> zeno_histories::Result<Outcome> {
    let h = hamiltonian(cfg)?;
    let from = match cfg.state.as_ref() {
        Some(StateConfig::SchroedingerPath { from }) => from.as_ref(),
        Some(other) => other,
        None => return Err(zeno_histories::Error::InvalidArgument("state is missing".into())),
    };
    let h0 = single_vector(cfg, from)?;
    let mut points = Vec::new();
    for n in grid_counts(cfg) {
        let grid = TimeGrid::new(cfg.grid.t_start, cfg.grid.span, n)?;
        let gen = GeneratorSpec::constant(&h, n)?;
        let path = make_schroedinger_path(&h0, &gen, &grid)?;
        let report = schroedinger_residual(&path, &gen)?;
        let zc = ZenoConfig {
            t_start: cfg.grid.t_start,
            span: cfg.grid.span,
            n_list: vec![n],
            hamiltonian: HamiltonianSpec::Constant(h.clone()),
            state: StateSpec::SchroedingerPath(h0.clone()),
        };
        let rec = zeno_record(&zc, n)?;
        points.push(StabilityPoint {
            n,
            dt: grid.dt(),
            max_residual: report.max,
            s_exact: rec.s_exact,
            deficit_exact: rec.deficit_exact,
        });
    }
    let ratios: Vec<f64> = points
        .windows(2)
        .map(|w| w[0].max_residual / w[1].max_residual)
        .collect();
    let residual_points: Vec<(f64, f64)> = points.iter().map(|p| (p.dt, p.max_residual)).collect();
    let rows = points
        .iter()
        .map(|p| {
            vec![
                p.n.to_string(),
                float(p.dt),
                float(p.max_residual),
                float(p.s_exact),
                float(p.deficit_exact),
            ]
        })
        .collect();
    Ok(Outcome {
        header: STABILITY_COLUMNS.to_vec(),
        rows,
        results: json!({
            "points": points,
            "residual_ratios": ratios,
            "residual_vs_dt_fit": slope_json(&residual_points),
        }),
        failures: Vec::new(),
    })
}

fn consistency(cfg: &ExperimentConfig) -> zeno_histories::Result<Outcome> {
    let family = cfg
        .build_family()
        .ok_or_else(|| zeno_histories::Error::InvalidArgument("family could not be built".into()))?;
    let entries = cfg
        .probabilities
        .iter()
        .flatten()
        .map(|e| (e.p, HistoryIndex::new(e.history.clone())))
        .collect();
    let rho = HistoryDensity::new(family, entries)?;
    let cap = cfg.tolerances.cap;
    let eval = HistoryEvaluator::new(&rho, cap)?;
    let (histories, matrix) = eval.decoherence_matrix()?;
    let report = eval.consistency(cfg.tolerances.consistency)?;
    let trace = eval.trace();

    let mut rows = Vec::new();
    let mut worst_density_error: f64 = 0.0;
    let mut diagonal = Vec::new();
    for (i, a) in histories.iter().enumerate() {
        for (j, b) in histories.iter().enumerate() {
            let value = matrix[i][j];
            let expected = if i == j { rho.probability(a) } else { 0.0 };
            let err = (value - expected).norm();
            worst_density_error = worst_density_error.max(err);
            if i == j {
                diagonal.push(json!({"history": a.as_slice(), "value": value.re}));
            }
            rows.push(vec![
                history_label(a),
                history_label(b),
                float(value.re),
                float(value.im),
                float(expected),
                float(err),
            ]);
        }
    }
    let tol = &cfg.tolerances;
    let mut failures = Vec::new();
    if !report.consistent {
        failures.push("consistency".to_string());
    }
    if worst_density_error > tol.consistency {
        failures.push("decoherence_equals_density".to_string());
    }
    if (trace - 1.0).abs() > tol.trace {
        failures.push("trace".to_string());
    }
    Ok(Outcome {
        header: CONSISTENCY_COLUMNS.to_vec(),
        rows,
        results: json!({
            "consistent": report.consistent,
            "worst_off_diagonal": report.worst_off_diagonal,
            "worst_pair": report.worst_pair.as_ref().map(|(a, b)| [a.as_slice(), b.as_slice()]),
            "worst_density_error": worst_density_error,
            "trace": trace,
            "diagonal": diagonal,
        }),
        failures,
    })
}

struct Check {
    name: &'static str,
    parameter: String,
    value: f64,
    tolerance: f64,
    pass: bool,
}

impl Check {
    fn at_most(name: &'static str, parameter: String, value: f64, tolerance: f64) -> Self {
        Self {
            name,
            parameter,
            value,
            tolerance,
            pass: value <= tolerance,
        }
    }
}

fn evolve_check(cfg: &ExperimentConfig) -> zeno_histories::Result<Outcome> {
    let h = hamiltonian(cfg)?;
    let n = cfg.grid.n.unwrap_or_default();
    let grid = TimeGrid::new(cfg.grid.t_start, cfg.grid.span, n)?;
    let gen = GeneratorSpec::constant(&h, n)?;
    let phi: DirectIntegralState = state_spec(cfg, n)?.materialize(&grid, &gen)?;
    let tol = &cfg.tolerances;
    let mut checks = Vec::new();

    let u = hermitian_exponential(&h, grid.dt())?;
    let gram = u.adjoint().matrix() * u.matrix();
    let unitarity = (gram - zeno_histories::aux_algebra::CMatrix::identity(h.dim(), h.dim())).norm();
    checks.push(Check::at_most("unitarity", "dt".into(), unitarity, tol.group_law));

    let two_then_one = evolve_step(
        &evolve_step(&phi, &gen, 1, Boundary::Cyclic)?,
        &gen,
        2,
        Boundary::Cyclic,
    )?;
    let three = evolve_step(&phi, &gen, 3, Boundary::Cyclic)?;
    checks.push(Check::at_most(
        "group_law",
        "m=1+2".into(),
        two_then_one.max_slot_distance(&three),
        tol.group_law,
    ));
    checks.push(Check::at_most(
        "norm_preservation",
        "m=3".into(),
        (three.integral_norm() - phi.integral_norm()).abs(),
        tol.group_law,
    ));

    if let Some(family) = cfg.build_family() {
        let mut worst: f64 = 0.0;
        for alpha in family.histories(tol.cap)? {
            let chain = HistoryChain::new(family.clone(), alpha)?;
            worst = worst.max(intertwining_check(&chain, &phi, &gen, 1)?);
        }
        checks.push(Check::at_most("intertwining", "m=1".into(), worst, tol.intertwining));
        let BranchResolution { residual, .. } = branch_resolution(&family, &phi, tol.cap)?;
        checks.push(Check::at_most("branch_residual", "all".into(), residual, tol.branch));
    }

    let mut residuals = Vec::with_capacity(HALVINGS + 1);
    for j in 0..=HALVINGS {
        let dtau = grid.dt() / f64::from(1u32 << j);
        residuals.push((dtau, generator_relation_check(&phi, &gen, dtau)?));
    }
    for w in residuals.windows(2) {
        let ratio = if w[1].1 > 0.0 { w[0].1 / w[1].1 } else { f64::INFINITY };
        checks.push(Check {
            name: "generator_relation_ratio",
            parameter: format!("dtau={}", float(w[1].0)),
            value: ratio,
            tolerance: MIN_HALVING_RATIO,
            pass: ratio >= MIN_HALVING_RATIO || w[0].1 == 0.0,
        });
    }

    let rows = checks
        .iter()
        .map(|c| {
            vec![
                c.name.to_string(),
                c.parameter.clone(),
                float(c.value),
                float(c.tolerance),
                c.pass.to_string(),
            ]
        })
        .collect();
    let failures = checks.iter().filter(|c| !c.pass).map(|c| c.name.to_string()).collect();
    let results = json!({
        "checks": checks.iter().map(|c| json!({
            "check": c.name,
            "parameter": c.parameter,
            "value": c.value,
            "tolerance": c.tolerance,
            "pass": c.pass,
        })).collect::<Vec<_>>(),
        "generator_relation": residuals.iter().map(|(t, r)| json!({"dtau": t, "residual": r})).collect::<Vec<_>>(),
    });
    Ok(Outcome {
        header: CHECK_COLUMNS.to_vec(),
        rows,
        results,
        failures,
    })
}
