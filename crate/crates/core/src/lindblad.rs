//! Open-system evolution of the hybrid density matrix
//! `ρ = Σ_ij β_ij |χ_i⟩⟨χ_j|` under a Lindblad master equation.

use std::time::Instant;

use ndarray::Array2;

use crate::ansatz::{closure_of, MomentBasis};
use crate::error::{Error, Result, StageExt};
use crate::evolution::{assemble_generator, build_from_set, AnsatzConfig, EvolutionConfig, Integrator, NamedObservable, Trace, TrajectoryRecord};
use crate::hamiltonian::TimeDependentHamiltonian;
use crate::linalg::{adjoint, HermitianPinv};
use crate::overlap::{build_overlap_set, Backend, Jump, OverlapSet};
use crate::pauli::{PauliString, PauliSum, C64};
use crate::state::{accumulate_word, InitialState, StateVector};

#[derive(Clone, Debug, PartialEq)]
pub struct LindbladModel {
    pub h: TimeDependentHamiltonian,
    pub jumps: Vec<Jump>,
}

impl LindbladModel {
    pub fn new(h: TimeDependentHamiltonian, jumps: Vec<Jump>) -> Result<Self> {
        for j in &jumps {
            if !(j.rate >= 0.0 && j.rate.is_finite()) {
                return Err(Error::InvalidArgument(format!("jump rate must be nonnegative, got {}", j.rate)));
            }
            if j.operator.n_qubits() != h.n_qubits() {
                return Err(Error::DimensionMismatch { expected: h.n_qubits(), found: j.operator.n_qubits() });
            }
        }
        Ok(LindbladModel { h, jumps })
    }

    /// Hamiltonian words followed by the words of every jump operator.
    pub fn generator_strings(&self) -> Vec<PauliString> {
        let n = self.h.n_qubits();
        self.h
            .channels()
            .iter()
            .map(|c| &c.operator)
            .chain(self.jumps.iter().map(|j| &j.operator))
            .flat_map(|op| op.iter().map(|(k, _)| PauliString::from_key(n, k.clone(), 0)).collect::<Vec<_>>())
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridDensity {
    pub beta: Array2<C64>,
    pub t: f64,
}

impl HybridDensity {
    /// `β = e_0 e_0†`, the pure initial state.
    pub fn initial(dim: usize, t: f64) -> Self {
        let mut beta = Array2::zeros((dim, dim));
        beta[[0, 0]] = C64::new(1.0, 0.0);
        HybridDensity { beta, t }
    }
}

/// Overlaps including `R_n` and `F_n` for every jump.
pub fn build_lindblad_overlaps(
    basis: &MomentBasis,
    model: &LindbladModel,
    observables: &[PauliSum],
    state: &InitialState,
    backend: Backend,
) -> Result<OverlapSet> {
    build_overlap_set(basis, &model.h, observables, &model.jumps, state, backend)
}

/// Right-hand side of the sandwiched equation `E β̇ E = RHS`.
fn sandwiched_rhs(ov: &OverlapSet, model: &LindbladModel, d_t: &Array2<C64>, beta: &Array2<C64>) -> Array2<C64> {
    let e = ov.e();
    let eb = e.dot(beta);
    let be = beta.dot(e);
    let minus_i = C64::new(0.0, -1.0);
    let mut rhs = (d_t.dot(&be) - eb.dot(d_t)) * minus_i;
    for ((jump, r), f) in model.jumps.iter().zip(ov.r()).zip(ov.f()) {
        if jump.rate == 0.0 {
            continue;
        }
        let g = C64::new(jump.rate, 0.0);
        let half = C64::new(0.5 * jump.rate, 0.0);
        rhs = rhs + r.dot(beta).dot(&adjoint(r)) * g - f.dot(&be) * half - eb.dot(f) * half;
    }
    rhs
}

fn check_model(ov: &OverlapSet, model: &LindbladModel, beta: &Array2<C64>) -> Result<()> {
    if ov.r().len() != model.jumps.len() {
        return Err(Error::DimensionMismatch { expected: model.jumps.len(), found: ov.r().len() });
    }
    if beta.dim() != ov.e().dim() {
        return Err(Error::DimensionMismatch { expected: ov.dim(), found: beta.nrows() });
    }
    Ok(())
}

/// `β̇ = P · RHS · P` with `P = pinv(E)`.
pub fn density_derivative(
    ov: &OverlapSet,
    model: &LindbladModel,
    t: f64,
    beta: &Array2<C64>,
    svd_tol: f64,
) -> Result<Array2<C64>> {
    check_model(ov, model, beta)?;
    let p = HermitianPinv::new(ov.e(), svd_tol)?.matrix();
    let d_t = assemble_generator(t, ov, &model.h)?;
    Ok(p.dot(&sandwiched_rhs(ov, model, &d_t, beta)).dot(&p))
}

struct OpenPropagator<'a> {
    ov: &'a OverlapSet,
    model: &'a LindbladModel,
    p: Array2<C64>,
}

impl<'a> OpenPropagator<'a> {
    fn derivative(&self, t: f64, beta: &Array2<C64>) -> Array2<C64> {
        let mut d_t = Array2::zeros(self.ov.e().dim());
        for (d, f) in self.ov.d().iter().zip(self.model.h.drives_at(t)) {
            d_t.scaled_add(C64::new(f, 0.0), d);
        }
        self.p.dot(&sandwiched_rhs(self.ov, self.model, &d_t, beta)).dot(&self.p)
    }

    fn step(&self, rho: &HybridDensity, dt: f64, method: Integrator) -> Result<HybridDensity> {
        let t = rho.t;
        let b = &rho.beta;
        let mut next = match method {
            Integrator::Euler => b + &(self.derivative(t, b) * C64::new(dt, 0.0)),
            Integrator::Rk4 => {
                let half = C64::new(dt / 2.0, 0.0);
                let k1 = self.derivative(t, b);
                let k2 = self.derivative(t + dt / 2.0, &(b + &(&k1 * half)));
                let k3 = self.derivative(t + dt / 2.0, &(b + &(&k2 * half)));
                let k4 = self.derivative(t + dt, &(b + &(&k3 * C64::new(dt, 0.0))));
                b + &((k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * C64::new(dt / 6.0, 0.0))
            }
        };
        if next.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(format!("density coefficients at t={}", t + dt)));
        }
        next = (&next + &adjoint(&next)) * C64::new(0.5, 0.0);
        Ok(HybridDensity { beta: next, t: t + dt })
    }
}

/// `Tr(M β)`, the expectation of the operator whose overlap matrix is `M`.
pub fn density_trace(m: &Array2<C64>, beta: &Array2<C64>) -> C64 {
    m.t().iter().zip(beta.iter()).map(|(a, b)| a * b).sum()
}

/// `ρ = C β C†` with the columns of `C` the basis states `P_i|ψ⟩`.
pub fn reconstruct_density(beta: &Array2<C64>, basis: &MomentBasis, psi: &StateVector) -> Result<Array2<C64>> {
    let m = basis.len();
    if beta.dim() != (m, m) {
        return Err(Error::DimensionMismatch { expected: m, found: beta.nrows() });
    }
    let dim = psi.len();
    let mut c = Array2::<C64>::zeros((dim, m));
    let src = psi.as_slice().expect("contiguous");
    for (j, p) in basis.operators().iter().enumerate() {
        let mut col = vec![C64::new(0.0, 0.0); dim];
        accumulate_word(p.key(), p.phase(), src, &mut col);
        for (r, v) in col.into_iter().enumerate() {
            c[[r, j]] = v;
        }
    }
    Ok(c.dot(beta).dot(&adjoint(&c)))
}

#[derive(Clone, Debug)]
pub struct OpenIntegration {
    pub times: Vec<f64>,
    pub betas: Vec<Array2<C64>>,
    pub rank: usize,
    pub condition: f64,
    /// Largest `|Tr(Eβ) − 1|` over all steps.
    pub max_trace_drift: f64,
}

/// Integrates `β` from `e_0 e_0†` over the configured grid.
pub fn integrate_open(ov: &OverlapSet, model: &LindbladModel, cfg: &EvolutionConfig) -> Result<OpenIntegration> {
    cfg.validate()?;
    check_model(ov, model, ov.e())?;
    let pinv = HermitianPinv::new(ov.e(), cfg.svd_tol_for(&ov.backend()))?;
    let prop = OpenPropagator { ov, model, p: pinv.matrix() };
    let mut rho = HybridDensity::initial(ov.dim(), cfg.t0);
    let record = cfg.record_steps();
    let trace_drift = |b: &Array2<C64>| (density_trace(ov.e(), b) - C64::new(1.0, 0.0)).norm();
    let mut out = OpenIntegration {
        times: Vec::with_capacity(record.len()),
        betas: Vec::with_capacity(record.len()),
        rank: pinv.rank(),
        condition: pinv.condition(),
        max_trace_drift: trace_drift(&rho.beta),
    };
    let mut next_record = record.iter().peekable();
    for step in 0..=cfg.n_steps() {
        if step > 0 {
            rho = prop.step(&rho, cfg.dt, cfg.integrator)?;
            rho.t = cfg.time_of(step);
            out.max_trace_drift = out.max_trace_drift.max(trace_drift(&rho.beta));
        }
        if next_record.peek() == Some(&&step) {
            next_record.next();
            out.times.push(rho.t);
            out.betas.push(rho.beta.clone());
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct OpenRun {
    pub model: LindbladModel,
    pub state: InitialState,
    pub ansatz: AnsatzConfig,
    pub backend: Backend,
    pub evolution: EvolutionConfig,
    pub observables: Vec<NamedObservable>,
}

/// Builds the basis from the closure of Hamiltonian and jump words, then
/// evolves `β`. Observable traces are `Tr(M_O β)`.
pub fn run_open(spec: &OpenRun) -> Result<TrajectoryRecord> {
    spec.evolution.validate().stage("config")?;
    let start = Instant::now();
    let n = spec.model.h.n_qubits();
    let s = closure_of(n, &spec.model.generator_strings(), spec.ansatz.closure_cap).stage("closure")?;
    let ops: Vec<PauliSum> = spec.observables.iter().map(|o| o.operator.clone()).collect();
    let (_, ov, mut diag) =
        build_from_set(&s, &spec.model.h, &spec.state, &spec.ansatz, spec.backend, &ops, &spec.model.jumps, start)?;
    let start = Instant::now();
    let integ = integrate_open(&ov, &spec.model, &spec.evolution).stage("evolution")?;
    diag.svd_tol = spec.evolution.svd_tol_for(&spec.backend);
    diag.retained_rank = integ.rank;
    diag.cond_e = integ.condition;
    diag.max_norm_drift = integ.max_trace_drift;
    let observables = spec
        .observables
        .iter()
        .zip(ov.observables())
        .map(|(o, m)| Trace { name: o.name.clone(), values: integ.betas.iter().map(|b| density_trace(m, b).re).collect() })
        .collect();
    diag.evolve_seconds = start.elapsed().as_secs_f64();
    Ok(TrajectoryRecord {
        times: integ.times,
        alphas: Vec::new(),
        observables,
        survival: None,
        fidelity: None,
        diagnostics: diag,
    })
}
