//! Command orchestration: config in, files out.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

use crate::ansatz::{closure_of, extended_operator_set, group_growth_report};
use crate::baselines::{exact_evolve, lag_metric, trotter_evolve, vqs_run, EXACT_QUBIT_LIMIT};
use crate::config::{ConfigError, OutputFormat, RunSpec, SCHEMA_VERSION};
use crate::error::{Error, StageExt};
use crate::evolution::{build_stage, run_closed, Diagnostics, TrajectoryRecord, REFERENCE_DT};
use crate::lindblad::run_open;
use crate::output::{matrix_json, write_json, write_text, Table};
use crate::pauli::PauliSum;
use crate::state::expectation_sum_dense;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Compare,
    Closure,
    Lindblad,
    Overlaps,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Compare => "compare",
            Command::Closure => "closure",
            Command::Lindblad => "lindblad",
            Command::Overlaps => "overlaps",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Core(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BUILD: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(ConfigError::Io { .. }) => EXIT_IO,
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Io { .. } => EXIT_IO,
            RunError::Core(e) => match e.stage() {
                Some("config") => EXIT_CONFIG,
                Some("closure" | "basis" | "overlaps") => EXIT_BUILD,
                _ => EXIT_NUMERIC,
            },
        }
    }
}

/// Files written and the summary document.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Value,
}

pub fn execute(command: Command, spec: &RunSpec, out_dir: &Path) -> Result<Outcome, RunError> {
    let start = Instant::now();
    let mut files = Vec::new();
    let mut summary = match command {
        Command::Simulate => cmd_simulate(spec, out_dir, &mut files)?,
        Command::Compare => cmd_compare(spec, out_dir, &mut files)?,
        Command::Closure => cmd_closure(spec, out_dir, &mut files)?,
        Command::Lindblad => cmd_lindblad(spec, out_dir, &mut files)?,
        Command::Overlaps => cmd_overlaps(spec, out_dir, &mut files)?,
    };
    let obj = summary.as_object_mut().expect("summary is an object");
    obj.insert("command".into(), json!(command.name()));
    obj.insert("schema_version".into(), json!(SCHEMA_VERSION));
    obj.insert("seed".into(), json!(spec.seed));
    obj.insert("config".into(), serde_json::to_value(spec).expect("spec serializes"));
    let timings = obj.entry("timings").or_insert_with(|| json!({}));
    timings["total_seconds"] = json!(start.elapsed().as_secs_f64());
    let path = out_dir.join("summary.json");
    write_json(&path, &summary).map_err(|source| RunError::Io { path: path.clone(), source })?;
    files.push(path);
    Ok(Outcome { files, summary })
}

fn emit_table(spec: &RunSpec, out_dir: &Path, stem: &str, table: &Table, files: &mut Vec<PathBuf>) -> Result<(), RunError> {
    let (path, res) = match spec.output.format {
        OutputFormat::Csv => {
            let path = out_dir.join(format!("{stem}.csv"));
            let res = write_text(&path, &table.to_csv());
            (path, res)
        }
        OutputFormat::Json => {
            let path = out_dir.join(format!("{stem}.json"));
            let res = write_json(&path, &table.to_json());
            (path, res)
        }
    };
    res.map_err(|source| RunError::Io { path: path.clone(), source })?;
    files.push(path);
    Ok(())
}

fn diagnostics_json(d: &Diagnostics) -> Value {
    json!({
        "basis_size": d.basis_size,
        "basis_sizes_per_k": d.basis_sizes_per_k,
        "closure_size": d.closure_size,
        "eval_count": d.eval_count,
        "cond_E": d.cond_e,
        "retained_rank": d.retained_rank,
        "svd_tol": d.svd_tol,
        "max_norm_drift": d.max_norm_drift,
        "closure_capped": d.closure_capped,
        "basis_capped": d.basis_capped,
        "timings": {"build_seconds": d.build_seconds, "evolve_seconds": d.evolve_seconds},
    })
}

fn record_table(rec: &TrajectoryRecord) -> Table {
    let mut cols = vec!["t".to_string()];
    cols.extend(rec.observables.iter().map(|o| o.name.clone()));
    if rec.survival.is_some() {
        cols.push("survival".into());
    }
    if rec.fidelity.is_some() {
        cols.push("fidelity".into());
    }
    let mut table = Table::new(cols);
    for (k, t) in rec.times.iter().enumerate() {
        let mut row = vec![Some(*t)];
        row.extend(rec.observables.iter().map(|o| Some(o.values[k])));
        if let Some(s) = &rec.survival {
            row.push(Some(s[k]));
        }
        if let Some(f) = &rec.fidelity {
            row.push(Some(f[k]));
        }
        table.push(row);
    }
    table
}

pub fn cmd_simulate(spec: &RunSpec, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value, RunError> {
    let run = spec.closed_run().stage("config")?;
    let before = crate::overlap::backend_evaluations();
    let rec = run_closed(&run)?;
    let total = crate::overlap::backend_evaluations() - before;
    emit_table(spec, out_dir, "trajectory", &record_table(&rec), files)?;
    let mut s = diagnostics_json(&rec.diagnostics);
    s["evals_outside_build"] = json!(total - rec.diagnostics.eval_count as u64);
    Ok(s)
}

pub fn cmd_lindblad(spec: &RunSpec, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value, RunError> {
    if spec.lindblad.is_none() {
        return Err(ConfigError::Invalid(vec!["lindblad command needs a `lindblad` section".into()]).into());
    }
    let run = spec.open_run().stage("config")?;
    let rec = run_open(&run)?;
    emit_table(spec, out_dir, "trajectory", &record_table(&rec), files)?;
    let mut s = diagnostics_json(&rec.diagnostics);
    let drift = s["max_norm_drift"].take();
    s.as_object_mut().unwrap().remove("max_norm_drift");
    s["max_trace_drift"] = drift;
    Ok(s)
}

pub fn cmd_closure(spec: &RunSpec, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value, RunError> {
    let h = spec.hamiltonian_model().stage("config")?;
    let start = Instant::now();
    let s = if spec.lindblad.is_some() {
        let model = crate::lindblad::LindbladModel::new(h, spec.jump_models().stage("config")?).stage("config")?;
        closure_of(model.h.n_qubits(), &model.generator_strings(), spec.ansatz.closure_cap)
            .stage("closure")?
    } else {
        extended_operator_set(&h, spec.ansatz.closure_cap).stage("closure")?
    };
    let growth = group_growth_report(&s, spec.ansatz.k, spec.ansatz.basis_cap).stage("basis")?;
    let operators: Vec<Value> = s
        .operators()
        .iter()
        .zip(s.depths())
        .map(|(p, d)| json!({"label": p.indexed_label(), "depth": d}))
        .collect();
    let report = json!({
        "closure_size": s.len(),
        "closure_capped": s.capped(),
        "operators": operators,
        "basis_sizes_per_k": growth.sizes,
        "saturation_k": growth.saturation_k,
    });
    let path = out_dir.join("closure.json");
    write_json(&path, &report).map_err(|source| RunError::Io { path: path.clone(), source })?;
    files.push(path);
    Ok(json!({
        "closure_size": s.len(),
        "basis_size": growth.sizes.last().copied().unwrap_or(1),
        "basis_sizes_per_k": growth.sizes,
        "saturation_k": growth.saturation_k,
        "timings": {"build_seconds": start.elapsed().as_secs_f64()},
    }))
}

pub fn cmd_overlaps(spec: &RunSpec, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value, RunError> {
    let h = spec.hamiltonian_model().stage("config")?;
    let state = spec.initial_state_model().stage("config")?;
    let obs = spec.observable_models().stage("config")?;
    let ops: Vec<PauliSum> = obs.iter().map(|o| o.operator.clone()).collect();
    let (basis, ov, diag) = build_stage(&h, &state, &spec.ansatz, spec.backend_model(), &ops, &[])?;
    let doc = json!({
        "basis": basis.operators().iter().map(|p| p.indexed_label()).collect::<Vec<_>>(),
        "E": matrix_json(ov.e()),
        "D": ov.d().iter().map(matrix_json).collect::<Vec<_>>(),
        "observables": obs.iter().zip(ov.observables()).map(|(o, m)| json!({"name": o.name, "M": matrix_json(m)})).collect::<Vec<_>>(),
        "eval_count": ov.eval_count(),
    });
    let path = out_dir.join("overlaps.json");
    write_json(&path, &doc).map_err(|source| RunError::Io { path: path.clone(), source })?;
    files.push(path);
    let mut d = diagnostics_json(&diag);
    d.as_object_mut().unwrap().remove("cond_E");
    Ok(d)
}

/// Trotter state index landing on `t`, if the grids align.
fn trotter_index(t: f64, delta: f64, steps: usize) -> Option<usize> {
    let i = (t / delta).round();
    let ok = i >= 0.0 && (i as usize) <= steps && (i * delta - t).abs() <= 1e-9 * t.abs().max(1.0);
    ok.then_some(i as usize)
}

pub fn cmd_compare(spec: &RunSpec, out_dir: &Path, files: &mut Vec<PathBuf>) -> Result<Value, RunError> {
    if spec.n_qubits > EXACT_QUBIT_LIMIT {
        return Err(ConfigError::Invalid(vec![format!("compare needs a dense reference, limited to {EXACT_QUBIT_LIMIT} qubits")]).into());
    }
    let run = spec.closed_run().stage("config")?;
    let rec = run_closed(&run)?;
    let times = &rec.times;
    let psi = run.state.to_dense().stage("config")?;
    let baselines = spec.baselines.clone().unwrap_or_default();

    let start = Instant::now();
    let reference = exact_evolve(&run.hamiltonian, &psi, times, spec.evolution.dt.min(REFERENCE_DT)).stage("exact")?;
    let expect = |states: &[crate::state::StateVector], op: &PauliSum| -> Result<Vec<f64>, Error> {
        states.iter().map(|s| expectation_sum_dense(op, s).map(|z| z.re)).collect()
    };
    let exact: Vec<Vec<f64>> =
        run.observables.iter().map(|o| expect(&reference, &o.operator)).collect::<Result<_, _>>().stage("exact")?;
    let exact_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let trotter = match baselines.trotter {
        Some(t) => {
            let states = trotter_evolve(&run.hamiltonian, &psi, t.steps, spec.evolution.t1).stage("trotter")?;
            let delta = spec.evolution.t1 / t.steps as f64;
            let traces: Vec<Vec<Option<f64>>> = run
                .observables
                .iter()
                .map(|o| {
                    times
                        .iter()
                        .map(|&tt| {
                            trotter_index(tt, delta, t.steps)
                                .map(|i| expectation_sum_dense(&o.operator, &states[i]).map(|z| z.re))
                                .transpose()
                        })
                        .collect::<Result<Vec<_>, _>>()
                })
                .collect::<Result<_, _>>()
                .stage("trotter")?;
            Some(traces)
        }
        None => None,
    };
    let trotter_seconds = start.elapsed().as_secs_f64();

    let start = Instant::now();
    let vqs = match spec.vqs_model().stage("config")? {
        Some((vspec, noise, dt)) => {
            let ops: Vec<PauliSum> = run.observables.iter().map(|o| o.operator.clone()).collect();
            let svd_tol = spec.evolution.svd_tol_for(&run.backend);
            Some(vqs_run(&vspec, &run.hamiltonian, times, dt, &noise, svd_tol, &ops).stage("vqs")?.observables)
        }
        None => None,
    };
    let vqs_seconds = start.elapsed().as_secs_f64();

    let mut cols = vec!["t".to_string()];
    for o in &run.observables {
        cols.push(format!("{}_qas", o.name));
        if baselines.exact {
            cols.push(format!("{}_exact", o.name));
        }
        if trotter.is_some() {
            cols.push(format!("{}_trotter", o.name));
        }
        if vqs.is_some() {
            cols.push(format!("{}_vqs", o.name));
        }
    }
    if rec.fidelity.is_some() {
        cols.push("fidelity".into());
    }
    let mut table = Table::new(cols);
    for (k, t) in times.iter().enumerate() {
        let mut row = vec![Some(*t)];
        for (j, o) in rec.observables.iter().enumerate() {
            row.push(Some(o.values[k]));
            if baselines.exact {
                row.push(Some(exact[j][k]));
            }
            if let Some(tr) = &trotter {
                row.push(tr[j][k]);
            }
            if let Some(v) = &vqs {
                row.push(Some(v[j][k]));
            }
        }
        if let Some(f) = &rec.fidelity {
            row.push(Some(f[k]));
        }
        table.push(row);
    }
    emit_table(spec, out_dir, "compare", &table, files)?;

    let mut errors = serde_json::Map::new();
    let mut lags = serde_json::Map::new();
    let max_err = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    for (j, o) in rec.observables.iter().enumerate() {
        errors.insert(format!("{}_qas", o.name), json!(max_err(&o.values, &exact[j])));
        lags.insert(format!("{}_qas", o.name), lag_json(&o.values, &exact[j], times));
        if let Some(tr) = &trotter {
            let e = tr[j].iter().zip(&exact[j]).filter_map(|(a, b)| a.map(|a| (a - b).abs())).fold(0.0, f64::max);
            errors.insert(format!("{}_trotter", o.name), json!(e));
        }
        if let Some(v) = &vqs {
            errors.insert(format!("{}_vqs", o.name), json!(max_err(&v[j], &exact[j])));
            lags.insert(format!("{}_vqs", o.name), lag_json(&v[j], &exact[j], times));
        }
    }
    let mut s = diagnostics_json(&rec.diagnostics);
    s["max_abs_error"] = Value::Object(errors);
    s["lag_metric"] = Value::Object(lags);
    s["timings"]["exact_seconds"] = json!(exact_seconds);
    s["timings"]["trotter_seconds"] = json!(trotter_seconds);
    s["timings"]["vqs_seconds"] = json!(vqs_seconds);
    Ok(s)
}

fn lag_json(a: &[f64], b: &[f64], times: &[f64]) -> Value {
    lag_metric(a, b, times).map_or(Value::Null, Value::from)
}
