//! End-to-end acceptance checks, one line per criterion.
//!
//! Run with `cargo test --test acceptance`; pass criterion numbers as extra
//! arguments (`-- 3 5`) to run a subset.

mod common;

use std::collections::HashSet;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use common::*;
use ndarray::ShapeBuilder;
use ndarray_linalg::EigValsh;
use ndarray_linalg::UPLO;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use tdqas::ansatz::{closure_of, cumulative_k_moment_basis, extended_operator_set, DEFAULT_BASIS_CAP, DEFAULT_CLOSURE_CAP};
use tdqas::baselines::{lag_metric, trotter_evolve, vqs_run, NoiseModel, VqsSpec};
use tdqas::config::RunSpec;
use tdqas::evolution::{run_closed, AnsatzConfig, ClosedRun, EvolutionConfig, NamedObservable, TrajectoryRecord};
use tdqas::hamiltonian::{random_pauli_hamiltonian, DriveFunction, TimeDependentHamiltonian};
use tdqas::lindblad::{run_open, LindbladModel, OpenRun};
use tdqas::overlap::{build_overlap_set, Backend, Jump};
use tdqas::runner::{execute, Command};
use tdqas::state::{Entangler, InitialState};
use tdqas::{PauliKey, PauliString};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn keys(n: usize, labels: &[&str]) -> HashSet<PauliKey> {
    let mut set: HashSet<PauliKey> = labels.iter().map(|l| label(n, l).into_key()).collect();
    set.insert(PauliString::identity(n).into_key());
    set
}

fn basis_of(h: &TimeDependentHamiltonian, k: usize) -> Vec<PauliString> {
    let s = extended_operator_set(h, DEFAULT_CLOSURE_CAP).unwrap();
    cumulative_k_moment_basis(&s, k, DEFAULT_BASIS_CAP).unwrap().operators().to_vec()
}

fn closed(h: TimeDependentHamiltonian, state: InitialState, k: usize, cfg: EvolutionConfig, obs: &[&str]) -> ClosedRun {
    let n = h.n_qubits();
    ClosedRun {
        hamiltonian: h,
        state,
        ansatz: AnsatzConfig::new(k),
        backend: Backend::Dense,
        evolution: cfg,
        observables: obs.iter().map(|l| NamedObservable::from_label(l, n).unwrap()).collect(),
        fidelity: false,
        survival: false,
    }
}

/// Minimum fidelity of the recorded ansatz states against the oracle.
fn min_oracle_fidelity(run: &ClosedRun, rec: &TrajectoryRecord) -> f64 {
    let psi = run.state.to_dense().unwrap();
    let basis = basis_of(&run.hamiltonian, run.ansatz.k);
    let reference = oracle_evolve(&run.hamiltonian, &psi, &rec.times, 1e-3);
    rec.alphas
        .iter()
        .zip(&reference)
        .map(|(a, r)| ansatz_fidelity(a, &basis, &psi, r))
        .fold(f64::INFINITY, f64::min)
}

fn c1_closure_sets() -> Check {
    let cases = [
        (one_qubit(2.0 * PI), keys(1, &["X", "Y", "Z"]), "1q"),
        (
            three_qubit(2.0 * PI),
            keys(3, &["X2", "Z1 Z2", "Z2 Z3", "Z1 Y2", "Y2 Z3", "Z1 X2 Z3"]),
            "3q",
        ),
        (two_qubit_demo(), keys(2, &["X1 X2", "Y2", "X1 Z2"]), "2q"),
    ];
    let mut out = Vec::new();
    for (h, want, name) in cases {
        let s = extended_operator_set(&h, DEFAULT_CLOSURE_CAP).map_err(|e| e.to_string())?;
        let got: HashSet<PauliKey> = s.keys().cloned().collect();
        ensure(got == want && s.len() == want.len(), || format!("{name}: got {} operators, set mismatch", s.len()))?;
        out.push(format!("{name}={}", s.len()));
    }
    Ok(out.join(" "))
}

fn sizes(h: &TimeDependentHamiltonian, k: usize) -> Vec<usize> {
    let s = extended_operator_set(h, DEFAULT_CLOSURE_CAP).unwrap();
    cumulative_k_moment_basis(&s, k, DEFAULT_BASIS_CAP).unwrap().level_sizes()[1..].to_vec()
}

fn c2_basis_table() -> Check {
    let periodic = sizes(&seven_qubit(true), 2);
    let table = [
        ("1q", sizes(&one_qubit(2.0 * PI), 1), vec![4]),
        ("3q", sizes(&three_qubit(2.0 * PI), 2), vec![7, 8]),
        ("7q", sizes(&seven_qubit(false), 2), vec![49, 64]),
        ("11q", sizes(&eleven_qubit(), 7), vec![15, 92, 324, 758, 1290, 1724, 1956]),
    ];
    for (name, got, want) in &table {
        ensure(got == want, || format!("{name}: got {got:?}, want {want:?}"))?;
    }
    Ok(format!(
        "1q {:?}, 3q {:?}, 7q open {:?} (periodic gives {:?}), 11q {:?}",
        table[0].1, table[1].1, table[2].1, periodic, table[3].1
    ))
}

fn c3_saturated_exactness() -> Check {
    let mut out = Vec::new();
    for (name, h, k, seed) in [("1q", one_qubit(2.0 * PI), 1, 11), ("3q", three_qubit(2.0 * PI), 2, 12)] {
        let n = h.n_qubits();
        let state = InitialState::random_dense(n, seed).unwrap();
        let obs = if n == 1 { "Z" } else { "Z2" };
        let mut run = closed(h, state, k, EvolutionConfig::new(0.0, 5.0, 1e-3).with_stride(10), &[obs]);
        run.fidelity = true;
        let rec = run_closed(&run).map_err(|e| e.to_string())?;
        let internal = rec.fidelity.as_ref().unwrap().iter().copied().fold(f64::INFINITY, f64::min);
        let oracle = min_oracle_fidelity(&run, &rec);
        ensure(oracle >= 1.0 - 1e-6 && internal >= 1.0 - 1e-6, || {
            format!("{name}: min fidelity {oracle:.3e} (oracle), {internal:.3e} (internal)")
        })?;
        out.push(format!("{name} K={k} max infidelity {:.1e}", (1.0 - oracle).max(0.0)));
    }
    Ok(out.join(", "))
}

fn c4_high_frequency() -> Check {
    let mut counts = Vec::new();
    let mut out = Vec::new();
    for (omega, dt, t1) in [(2.0 * PI, 0.08, 4.0), (10.0 * PI, 0.02, 4.0), (20.0 * PI, 0.002, 1.0)] {
        let state = InitialState::random_dense(3, 12).unwrap();
        let run = closed(three_qubit(omega), state, 2, EvolutionConfig::new(0.0, t1, dt), &["Z2"]);
        let rec = run_closed(&run).map_err(|e| e.to_string())?;
        let f = min_oracle_fidelity(&run, &rec);
        ensure(f >= 1.0 - 1e-6, || format!("omega {omega:.3}: min fidelity {f}"))?;
        counts.push(rec.diagnostics.eval_count);
        out.push(format!("dt={dt}: infidelity {:.1e}", (1.0 - f).max(0.0)));
    }
    ensure(counts.iter().all(|c| *c == counts[0]), || format!("eval counts differ: {counts:?}"))?;
    Ok(format!("{}; eval_count {} in all runs", out.join(", "), counts[0]))
}

fn eleven_qubit_state() -> InitialState {
    let InitialState::Product { mut sites } = InitialState::random_product(11, 2024).unwrap() else {
        unreachable!()
    };
    sites[10] = [c(1.0, 0.0), c(0.0, 0.0)];
    InitialState::product(sites).unwrap()
}

fn c5_eleven_qubit() -> Check {
    let mut curves: Vec<Vec<f64>> = Vec::new();
    let mut times = Vec::new();
    for k in 4..=7 {
        let mut run = closed(eleven_qubit(), eleven_qubit_state(), k, EvolutionConfig::new(0.0, 3.0, 1e-3).with_stride(100), &["X1"]);
        run.backend = Backend::Product;
        run.fidelity = true;
        let rec = run_closed(&run).map_err(|e| e.to_string())?;
        times = rec.times.clone();
        curves.push(rec.fidelity.unwrap());
    }
    for w in curves.windows(2) {
        for (i, (lo, hi)) in w[0].iter().zip(&w[1]).enumerate() {
            ensure(*hi >= lo - 1e-9, || format!("fidelity decreased in K at t={}: {lo} -> {hi}", times[i]))?;
        }
    }
    let k7 = curves[3].iter().copied().fold(f64::INFINITY, f64::min);
    ensure(k7 >= 0.999, || format!("K=7 min fidelity {k7}"))?;
    let at_end: Vec<String> = curves.iter().map(|c| format!("{:.4}", c.last().unwrap())).collect();
    Ok(format!("F(t=3) for K=4..7: [{}], K=7 min {:.9}", at_end.join(", "), k7))
}

fn c6_large_product() -> Check {
    let seed = 1;
    let start = Instant::now();
    let h = random_pauli_hamiltonian(10_000, 8, seed).map_err(|e| e.to_string())?;
    let mut run = closed(h, InitialState::all_zeros(10_000), 8, EvolutionConfig::new(0.0, 2.0, 1e-3).with_stride(50), &["Z1"]);
    run.backend = Backend::Product;
    run.survival = true;
    let rec = run_closed(&run).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let size = rec.diagnostics.basis_size;
    ensure(size <= 256 && secs <= 300.0, || format!("basis {size}, {secs:.1}s"))?;

    let mut worst = 0.0f64;
    for n in [4, 8, 12] {
        let h = random_pauli_hamiltonian(n, 8, seed).map_err(|e| e.to_string())?;
        let mut labels: Vec<String> = h.channels().iter().map(|ch| ch.operator.strings().next().unwrap().0.indexed_label()).collect();
        labels.truncate(3);
        labels.push("Z1".into());
        let obs: Vec<&str> = labels.iter().map(String::as_str).collect();
        let mut small = closed(h, InitialState::all_zeros(n), 8, EvolutionConfig::new(0.0, 2.0, 1e-3).with_stride(50), &obs);
        small.backend = Backend::Product;
        let rec = run_closed(&small).map_err(|e| e.to_string())?;
        let psi = small.state.to_dense().unwrap();
        let states = oracle_evolve(&small.hamiltonian, &psi, &rec.times, 1e-3);
        for (o, trace) in small.observables.iter().zip(&rec.observables) {
            let want: Vec<f64> = states.iter().map(|s| expectation_oracle(&o.operator, s)).collect();
            worst = worst.max(max_abs_diff(&trace.values, &want));
        }
    }
    ensure(worst <= 1e-6, || format!("max deviation from oracle {worst:.3e}"))?;
    Ok(format!("N=10000: basis {size}, {secs:.1}s; N<=12 max deviation {worst:.1e}"))
}

fn demo_state() -> InitialState {
    InitialState::layered_circuit(DEMO_ANGLES.to_vec(), Entangler::CzChain).unwrap()
}

fn c7_trotter() -> Check {
    let h = two_qubit_demo();
    let psi = demo_state().to_dense().unwrap();
    let z2 = sum(2, &[(1.0, "Z2")]);
    let horizon = 8.0;
    let mut errors = Vec::new();
    for steps in [25, 50, 100, 200] {
        let tr = trotter_evolve(&h, &psi, steps, horizon).map_err(|e| e.to_string())?;
        let times: Vec<f64> = (0..=steps).map(|i| i as f64 * horizon / steps as f64).collect();
        let exact = oracle_evolve(&h, &psi, &times, 1e-3);
        let err = tr
            .iter()
            .zip(&exact)
            .map(|(a, b)| (expectation_oracle(&z2, a) - expectation_oracle(&z2, b)).abs())
            .fold(0.0, f64::max);
        errors.push(err);
    }
    ensure(errors.windows(2).all(|w| w[1] < w[0]), || format!("errors not decreasing: {errors:?}"))?;

    let commuting = TimeDependentHamiltonian::from_pairs(
        2,
        vec![
            (DriveFunction::constant(1.0), sum(2, &[(1.0, "Z1")])),
            (DriveFunction::constant(0.7), sum(2, &[(1.0, "Z2"), (0.5, "Z1 Z2")])),
        ],
    )
    .unwrap();
    let mut worst = 0.0f64;
    for steps in [1, 7, 25] {
        let tr = trotter_evolve(&commuting, &psi, steps, 3.0).map_err(|e| e.to_string())?;
        let exact = oracle_evolve(&commuting, &psi, &[0.0, 3.0], 1e-4);
        worst = worst.max((tr.last().unwrap() - &exact[1]).iter().map(|z| z.norm()).fold(0.0, f64::max));
    }
    ensure(worst < 1e-9, || format!("commuting case deviates by {worst:.3e}"))?;
    let shown: Vec<String> = errors.iter().map(|e| format!("{e:.2e}")).collect();
    Ok(format!("max |err| for N=25..200: [{}]; commuting {worst:.1e}", shown.join(", ")))
}

fn c8_vqs_lag() -> Check {
    let h = two_qubit_demo();
    let psi = demo_state().to_dense().unwrap();
    let z2 = sum(2, &[(1.0, "Z2")]);
    let times: Vec<f64> = (0..=400).map(|i| i as f64 * 0.02).collect();
    let exact: Vec<f64> = oracle_evolve(&h, &psi, &times, 1e-3).iter().map(|s| expectation_oracle(&z2, s)).collect();
    let gens: Vec<PauliString> = ["X1 X2", "Y2", "X1 Z2"].iter().map(|l| label(2, l)).collect();
    let spec = VqsSpec::new(gens, psi.clone());
    let mut lags = Vec::new();
    let mut err0 = 0.0;
    for lambda in [0.0, 0.01, 0.02, 0.04] {
        let traj = vqs_run(&spec, &h, &times, 1e-3, &NoiseModel::with_lambda(lambda), 1e-8, std::slice::from_ref(&z2))
            .map_err(|e| e.to_string())?;
        if lambda == 0.0 {
            err0 = max_abs_diff(&traj.observables[0], &exact);
        }
        lags.push(lag_metric(&traj.observables[0], &exact, &times).map_err(|e| e.to_string())?);
    }
    ensure(err0 <= 2e-2, || format!("noiseless VQS error {err0:.3e}"))?;
    ensure(lags.windows(2).all(|w| w[1] > w[0]), || format!("lag not increasing: {lags:?}"))?;
    let shown: Vec<String> = lags.iter().map(|l| format!("{l:.4}")).collect();
    Ok(format!("noiseless error {err0:.1e}; lag for lambda 0..0.04: [{}]", shown.join(", ")))
}

fn open(h: TimeDependentHamiltonian, jumps: Vec<Jump>, state: InitialState, k: usize, t1: f64, obs: &[&str]) -> OpenRun {
    let n = h.n_qubits();
    OpenRun {
        model: LindbladModel::new(h, jumps).unwrap(),
        state,
        ansatz: AnsatzConfig::new(k),
        backend: Backend::Dense,
        evolution: EvolutionConfig::new(0.0, t1, 1e-3).with_stride(20),
        observables: obs.iter().map(|l| NamedObservable::from_label(l, n).unwrap()).collect(),
    }
}

fn c9_lindblad() -> Check {
    let mut worst = 0.0f64;
    let mut drift = 0.0f64;
    let excited = InitialState::product(vec![[c(0.0, 0.0), c(1.0, 0.0)]]).unwrap();
    let cases = [
        open(one_qubit(2.0 * PI), vec![jump(lowering(), 0.3)], excited, 2, 5.0, &["Z", "X"]),
        open(
            two_qubit_demo(),
            vec![jump(sum(2, &[(1.0, "Z1")]), 0.1), jump(sum(2, &[(1.0, "Z2")]), 0.25)],
            demo_state(),
            4,
            5.0,
            &["Z2", "X1 X2", "Y1"],
        ),
    ];
    for run in &cases {
        let rec = run_open(run).map_err(|e| e.to_string())?;
        drift = drift.max(rec.diagnostics.max_norm_drift);
        let psi = run.state.to_dense().unwrap();
        for (o, trace) in run.observables.iter().zip(&rec.observables) {
            let want = dense_lindblad(&run.model.h, &run.model.jumps, &psi, &rec.times, 1e-3, &o.operator);
            worst = worst.max(max_abs_diff(&trace.values, &want));
        }
    }
    ensure(worst <= 1e-4, || format!("max deviation from dense Lindblad {worst:.3e}"))?;
    ensure(drift <= 1e-6, || format!("trace drift {drift:.3e}"))?;

    let state = InitialState::random_dense(3, 5).unwrap();
    let quiet = open(three_qubit(2.0 * PI), vec![jump(sum(3, &[(1.0, "X2")]), 0.0)], state.clone(), 2, 3.0, &["Z2"]);
    let a = run_open(&quiet).map_err(|e| e.to_string())?;
    let b = run_closed(&closed(three_qubit(2.0 * PI), state, 2, quiet.evolution.clone(), &["Z2"])).map_err(|e| e.to_string())?;
    let gap = max_abs_diff(&a.observables[0].values, &b.observables[0].values);
    ensure(gap <= 1e-8, || format!("zero-rate reduction deviates by {gap:.3e}"))?;
    Ok(format!("oracle deviation {worst:.1e}, trace drift {drift:.1e}, zero-rate gap {gap:.1e}"))
}

fn pauli_word(n: usize) -> impl Strategy<Value = String> {
    proptest::collection::vec(prop_oneof![Just('I'), Just('X'), Just('Y'), Just('Z')], n).prop_map(|v| v.into_iter().collect())
}

fn c10_properties() -> Check {
    let cfg = |cases| Config { cases, failure_persistence: None, ..Config::default() };

    let mut runner = TestRunner::new(cfg(10_000));
    let pairs = (1usize..=5).prop_flat_map(|n| (Just(n), pauli_word(n), pauli_word(n)));
    runner
        .run(&pairs, |(n, a, b)| {
            let (pa, pb) = (label(n, &a), label(n, &b));
            let prod = pa.multiply(&pb).unwrap();
            prop_assert_eq!(dense_string(&prod), dense_string(&pa).dot(&dense_string(&pb)));
            Ok(())
        })
        .map_err(|e| format!("pauli products: {e}"))?;

    let mut runner = TestRunner::new(cfg(200));
    let gram = (1usize..=4)
        .prop_flat_map(|n| (Just(n), proptest::collection::vec(pauli_word(n), 1..4), any::<u64>()));
    runner
        .run(&gram, |(n, words, seed)| {
            let gens: Vec<PauliString> = words.iter().map(|w| label(n, w)).collect();
            let s = closure_of(n, &gens, DEFAULT_CLOSURE_CAP).unwrap();
            let basis = cumulative_k_moment_basis(&s, 2, DEFAULT_BASIS_CAP).unwrap();
            let h = TimeDependentHamiltonian::from_pairs(n, vec![(DriveFunction::constant(1.0), sum(n, &[(1.0, &words[0])]))]).unwrap();
            let state = InitialState::random_dense(n, seed).unwrap();
            let ov = build_overlap_set(&basis, &h, &[], &[], &state, Backend::Dense).unwrap();
            let mut e = ndarray::Array2::zeros(ov.e().dim().f());
            e.assign(ov.e());
            let w = e.eigvalsh(UPLO::Upper).unwrap();
            let top = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            prop_assert!(w.iter().all(|l| *l >= -1e-10 * top.max(1.0)), "eigenvalues {:?}", w);
            Ok(())
        })
        .map_err(|e| format!("gram PSD: {e}"))?;

    let mut runner = TestRunner::new(cfg(300));
    let growth = (1usize..=6).prop_flat_map(|n| (Just(n), proptest::collection::vec(pauli_word(n), 1..5)));
    runner
        .run(&growth, |(n, words)| {
            let gens: Vec<PauliString> = words.iter().map(|w| label(n, w)).collect();
            let s = closure_of(n, &gens, DEFAULT_CLOSURE_CAP).unwrap();
            let r = s.len() - 1;
            let basis = cumulative_k_moment_basis(&s, 6, DEFAULT_BASIS_CAP).unwrap();
            let bound = 1usize << r.min(usize::BITS as usize - 2);
            prop_assert!(basis.level_sizes().iter().all(|sz| *sz <= bound));
            prop_assert!(basis.level_sizes().windows(2).all(|w| w[0] <= w[1]));
            Ok(())
        })
        .map_err(|e| format!("growth bound: {e}"))?;

    let dirs = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let spec = RunSpec::from_json(DETERMINISM_CONFIG).map_err(|e| e.to_string())?;
    execute(Command::Simulate, &spec, dirs.0.path()).map_err(|e| e.to_string())?;
    execute(Command::Simulate, &spec, dirs.1.path()).map_err(|e| e.to_string())?;
    let a = std::fs::read(dirs.0.path().join("trajectory.csv")).unwrap();
    let b = std::fs::read(dirs.1.path().join("trajectory.csv")).unwrap();
    ensure(a == b, || "reruns differ".to_string())?;
    Ok("10000 product pairs exact, 200 Gram matrices PSD, 300 growth bounds, reruns byte-identical".into())
}

const DETERMINISM_CONFIG: &str = r#"{
    "schema_version": 1,
    "n_qubits": 3,
    "seed": 9,
    "hamiltonian": {"random_pauli": {"count": 3}},
    "initial_state": {"kind": "random_product"},
    "ansatz": {"K": 2},
    "backend": {"kind": "sampled", "shots": 4096},
    "evolution": {"t1": 1.0, "dt": 0.01},
    "observables": ["Z1", "X2"],
    "survival": true
}"#;

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("operator closure sets", c1_closure_sets),
        ("basis-count table", c2_basis_table),
        ("closed-system exactness at saturation", c3_saturated_exactness),
        ("high-frequency invariance", c4_high_frequency),
        ("11-qubit convergence", c5_eleven_qubit),
        ("large-N product backend", c6_large_product),
        ("Trotter behavior", c7_trotter),
        ("VQS lag", c8_vqs_lag),
        ("Lindblad correctness", c9_lindblad),
        ("property suites", c10_properties),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let id = i + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {id:>2} PASS  {name} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id:>2} FAIL  {name} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
