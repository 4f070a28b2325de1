//! Classical integration of `E α̇ = -i D(t) α` on precomputed overlaps.

use std::time::Instant;

use ndarray::linalg::general_mat_vec_mul;
use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::ansatz::{cumulative_k_moment_basis, extended_operator_set, ExtendedOperatorSet, MomentBasis, DEFAULT_BASIS_CAP, DEFAULT_CLOSURE_CAP};
use crate::baselines::exact_evolve;
use crate::error::{Error, Result, StageExt};
use crate::hamiltonian::TimeDependentHamiltonian;
use crate::linalg::HermitianPinv;
use crate::overlap::{build_overlap_set, Backend, OverlapSet};
use crate::pauli::{PauliSum, C64};
use crate::state::{accumulate_word, inner, norm_sqr, InitialState, StateVector};

pub const DEFAULT_SVD_TOL: f64 = 1e-8;
pub const DEFAULT_SAMPLED_SVD_TOL: f64 = 1e-2;

/// Tolerance on `|Im|` of a Hermitian observable before it is discarded.
const IMAG_TOL: f64 = 1e-9;

/// Step length of the dense reference used for fidelity traces.
pub const REFERENCE_DT: f64 = 1e-3;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Euler,
    #[default]
    Rk4,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionConfig {
    #[serde(default)]
    pub t0: f64,
    pub t1: f64,
    pub dt: f64,
    #[serde(default)]
    pub integrator: Integrator,
    /// Relative singular-value cutoff; the default depends on the backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub svd_tol: Option<f64>,
    #[serde(default = "default_true")]
    pub renormalize: bool,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_true() -> bool {
    true
}

fn default_stride() -> usize {
    1
}

impl EvolutionConfig {
    pub fn new(t0: f64, t1: f64, dt: f64) -> Self {
        EvolutionConfig {
            t0,
            t1,
            dt,
            integrator: Integrator::Rk4,
            svd_tol: None,
            renormalize: true,
            record_stride: 1,
        }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.record_stride = stride;
        self
    }

    pub fn svd_tol_for(&self, backend: &Backend) -> f64 {
        self.svd_tol.unwrap_or(if backend.is_sampled() { DEFAULT_SAMPLED_SVD_TOL } else { DEFAULT_SVD_TOL })
    }

    /// All violated constraints, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.t0.is_finite() || !self.t1.is_finite() {
            out.push("t0 and t1 must be finite".to_string());
        } else if self.t1 <= self.t0 {
            out.push(format!("t1 ({}) must exceed t0 ({})", self.t1, self.t0));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            out.push(format!("dt must be positive, got {}", self.dt));
        } else if self.t1 > self.t0 && self.dt > self.t1 - self.t0 {
            out.push(format!("dt ({}) exceeds the horizon", self.dt));
        } else if self.t1 > self.t0 {
            let span = (self.t1 - self.t0) / self.dt;
            if (span - span.round()).abs() > 1e-6 * span.max(1.0) {
                out.push(format!("dt ({}) does not divide the horizon", self.dt));
            }
        }
        if let Some(tol) = self.svd_tol {
            if !(tol > 0.0 && tol < 1.0) {
                out.push(format!("svd_tol must lie in (0, 1), got {tol}"));
            }
        }
        if self.record_stride == 0 {
            out.push("record_stride must be positive".to_string());
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.problems();
        if p.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(p.join("; ")))
        }
    }

    pub fn n_steps(&self) -> usize {
        ((self.t1 - self.t0) / self.dt).round() as usize
    }

    /// Step indices at which the trajectory is recorded.
    pub fn record_steps(&self) -> Vec<usize> {
        let n = self.n_steps();
        let mut steps: Vec<usize> = (0..=n).step_by(self.record_stride.max(1)).collect();
        if *steps.last().expect("step 0 always present") != n {
            steps.push(n);
        }
        steps
    }

    pub fn time_of(&self, step: usize) -> f64 {
        self.t0 + step as f64 * self.dt
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientVector {
    pub alpha: Array1<C64>,
    pub t: f64,
}

/// `α = (1, 0, …, 0)`: the ansatz starts exactly at `|ψ⟩`.
pub fn initial_coefficients(basis: &MomentBasis) -> Result<CoefficientVector> {
    if basis.is_empty() || !basis.operators()[0].is_identity() {
        return Err(Error::MissingIdentity);
    }
    let mut alpha = Array1::zeros(basis.len());
    alpha[0] = C64::new(1.0, 0.0);
    Ok(CoefficientVector { alpha, t: 0.0 })
}

/// `D(t) = Σ_k f_k(t) D_k`.
pub fn assemble_generator(t: f64, ov: &OverlapSet, h: &TimeDependentHamiltonian) -> Result<Array2<C64>> {
    if ov.d().len() != h.n_channels() {
        return Err(Error::DimensionMismatch { expected: ov.d().len(), found: h.n_channels() });
    }
    let mut out = Array2::zeros((ov.dim(), ov.dim()));
    for (d, f) in ov.d().iter().zip(h.evaluate_drives(t)?) {
        out.scaled_add(C64::new(f, 0.0), d);
    }
    Ok(out)
}

/// `α̇ = -i pinv(E) D_t α` and the retained rank of `E`.
pub fn coefficient_derivative(
    e: &Array2<C64>,
    d_t: &Array2<C64>,
    alpha: &Array1<C64>,
    svd_tol: f64,
) -> Result<(Array1<C64>, usize)> {
    if d_t.dim() != e.dim() {
        return Err(Error::DimensionMismatch { expected: e.nrows(), found: d_t.nrows() });
    }
    if alpha.len() != e.nrows() {
        return Err(Error::DimensionMismatch { expected: e.nrows(), found: alpha.len() });
    }
    if d_t.iter().chain(alpha.iter()).any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite("generator or coefficients".into()));
    }
    let pinv = HermitianPinv::new(e, svd_tol)?;
    let rhs = d_t.dot(alpha);
    let rate = pinv.apply(&rhs).mapv(|z| z * C64::new(0.0, -1.0));
    Ok((rate, pinv.rank()))
}

/// The evolution generator restricted to the retained eigenspace of `E`.
///
/// Every rate `-i pinv(E) D(t) α` lies in the span of the retained
/// eigenvectors `V`, so a trajectory started at `α_0` stays of the form
/// `σ u + V c` with `u = (I - V V†) α_0` fixed. Steps update `c` only and
/// cost `O(r²)` per channel.
#[derive(Clone, Debug)]
pub struct Propagator<'a> {
    h: &'a TimeDependentHamiltonian,
    e: &'a Array2<C64>,
    /// Retained eigenvectors of `E` as columns.
    v: Array2<C64>,
    lambda: Array1<f64>,
    /// `-i Λ⁻¹ V† D_k`.
    lifted: Vec<Array2<C64>>,
    /// `-i Λ⁻¹ V† D_k V`.
    reduced: Vec<Array2<C64>>,
    condition: f64,
}

/// Coefficients `α = σ u + V c` together with the fixed data of `u`.
#[derive(Clone, Debug)]
struct Split {
    c: Array1<C64>,
    sigma: f64,
    u: Array1<C64>,
    /// `-i Λ⁻¹ V† D_k u`.
    drift: Vec<Array1<C64>>,
    /// `u† E u`.
    u_norm: f64,
}

fn finite(v: &Array1<C64>) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

impl<'a> Propagator<'a> {
    pub fn new(ov: &'a OverlapSet, h: &'a TimeDependentHamiltonian, svd_tol: f64) -> Result<Self> {
        if ov.d().len() != h.n_channels() {
            return Err(Error::DimensionMismatch { expected: ov.d().len(), found: h.n_channels() });
        }
        let pinv = HermitianPinv::new(ov.e(), svd_tol)?;
        let v = pinv.vectors().clone();
        let lambda = pinv.values().clone();
        let scale = lambda.mapv(|l| C64::new(0.0, -1.0 / l)).insert_axis(Axis(1));
        let vh = &v.t().mapv(|z| z.conj()) * &scale;
        let lifted: Vec<Array2<C64>> = ov.d().iter().map(|d| vh.dot(d)).collect();
        let reduced = lifted.iter().map(|w| w.dot(&v)).collect();
        Ok(Propagator { h, e: ov.e(), v, lambda, lifted, reduced, condition: pinv.condition() })
    }

    pub fn rank(&self) -> usize {
        self.lambda.len()
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// `-i pinv(E) D(t) α`.
    pub fn derivative(&self, t: f64, alpha: &Array1<C64>) -> Array1<C64> {
        let mut inner = Array1::zeros(self.rank());
        for (w, f) in self.lifted.iter().zip(self.h.drives_at(t)) {
            if f != 0.0 {
                general_mat_vec_mul(C64::new(f, 0.0), w, alpha, C64::new(1.0, 0.0), &mut inner);
            }
        }
        self.v.dot(&inner)
    }

    /// `α†Eα`.
    pub fn norm_sqr(&self, alpha: &Array1<C64>) -> f64 {
        alpha.iter().zip(self.e.dot(alpha).iter()).map(|(a, b)| (a.conj() * b).re).sum()
    }

    fn split(&self, alpha: &Array1<C64>) -> Split {
        let c = self.v.t().mapv(|z| z.conj()).dot(alpha);
        let u = alpha - &self.v.dot(&c);
        let drift = self.lifted.iter().map(|w| w.dot(&u)).collect();
        let u_norm = u.iter().zip(self.e.dot(&u).iter()).map(|(a, b)| (a.conj() * b).re).sum();
        Split { c, sigma: 1.0, u, drift, u_norm }
    }

    fn join(&self, s: &Split) -> Array1<C64> {
        let mut alpha = s.u.mapv(|z| z * s.sigma);
        general_mat_vec_mul(C64::new(1.0, 0.0), &self.v, &s.c, C64::new(1.0, 0.0), &mut alpha);
        alpha
    }

    /// `α†Eα = c†Λc + σ² u†Eu`; the cross terms vanish because `V† E u = 0`.
    fn split_norm_sqr(&self, s: &Split) -> f64 {
        let inner: f64 = s.c.iter().zip(&self.lambda).map(|(z, l)| z.norm_sqr() * l).sum();
        inner + s.sigma * s.sigma * s.u_norm
    }

    fn rate(&self, t: f64, s: &Split, c: &Array1<C64>) -> Array1<C64> {
        let mut out = Array1::zeros(c.len());
        for ((a, b), f) in self.reduced.iter().zip(&s.drift).zip(self.h.drives_at(t)) {
            if f != 0.0 {
                general_mat_vec_mul(C64::new(f, 0.0), a, c, C64::new(1.0, 0.0), &mut out);
                out.scaled_add(C64::new(f * s.sigma, 0.0), b);
            }
        }
        out
    }

    fn advance(&self, s: &mut Split, t: f64, dt: f64, method: Integrator, renormalize: bool) -> Result<()> {
        let c = &s.c;
        let next = match method {
            Integrator::Euler => {
                let k = self.rate(t, s, c);
                c + &(k * C64::new(dt, 0.0))
            }
            Integrator::Rk4 => {
                let half = C64::new(dt / 2.0, 0.0);
                let k1 = self.rate(t, s, c);
                let k2 = self.rate(t + dt / 2.0, s, &(c + &(&k1 * half)));
                let k3 = self.rate(t + dt / 2.0, s, &(c + &(&k2 * half)));
                let k4 = self.rate(t + dt, s, &(c + &(&k3 * C64::new(dt, 0.0))));
                let sum = k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4;
                c + &(sum * C64::new(dt / 6.0, 0.0))
            }
        };
        if !finite(&next) {
            return Err(Error::NonFinite(format!("coefficients at t={}", t + dt)));
        }
        s.c = next;
        if renormalize {
            let n2 = self.split_norm_sqr(s);
            if !(n2 > 0.0) {
                return Err(Error::InvalidState(format!("zero ansatz norm at t={}", t + dt)));
            }
            let r = n2.sqrt();
            s.c.mapv_inplace(|z| z / r);
            s.sigma /= r;
        }
        Ok(())
    }

    pub fn step(&self, state: &CoefficientVector, dt: f64, method: Integrator, renormalize: bool) -> Result<CoefficientVector> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
        }
        if !finite(&state.alpha) {
            return Err(Error::NonFinite(format!("coefficients at t={}", state.t)));
        }
        let mut s = self.split(&state.alpha);
        self.advance(&mut s, state.t, dt, method, renormalize)?;
        Ok(CoefficientVector { alpha: self.join(&s), t: state.t + dt })
    }
}

/// One explicit step with `D(t)` re-assembled at the sub-times.
pub fn integrate_step(
    state: &CoefficientVector,
    dt: f64,
    method: Integrator,
    ov: &OverlapSet,
    h: &TimeDependentHamiltonian,
    renormalize: bool,
    svd_tol: f64,
) -> Result<CoefficientVector> {
    Propagator::new(ov, h, svd_tol)?.step(state, dt, method, renormalize)
}

/// `Re(α† M_O α)`; errors if the discarded imaginary part is not negligible.
pub fn observable_trace(alpha: &Array1<C64>, m_o: &Array2<C64>) -> Result<f64> {
    if m_o.nrows() != alpha.len() || m_o.ncols() != alpha.len() {
        return Err(Error::DimensionMismatch { expected: alpha.len(), found: m_o.nrows() });
    }
    let v: C64 = alpha.iter().zip(m_o.dot(alpha).iter()).map(|(a, b)| a.conj() * b).sum();
    if v.im.abs() > IMAG_TOL * v.re.abs().max(1.0) {
        return Err(Error::NonHermitian(format!("observable value {v} has an imaginary part")));
    }
    Ok(v.re)
}

/// `Σ_i α_i P_i|ψ⟩` as a dense vector.
pub fn reconstruct_state(alpha: &Array1<C64>, basis: &MomentBasis, psi: &StateVector) -> Result<StateVector> {
    if alpha.len() != basis.len() {
        return Err(Error::DimensionMismatch { expected: basis.len(), found: alpha.len() });
    }
    if psi.len() != 1usize << basis.n_qubits() {
        return Err(Error::DimensionMismatch { expected: 1 << basis.n_qubits(), found: psi.len() });
    }
    let mut out = StateVector::zeros(psi.len());
    let src = psi.as_slice().expect("contiguous");
    let dst = out.as_slice_mut().expect("contiguous");
    for (a, p) in alpha.iter().zip(basis.operators()) {
        if *a != C64::new(0.0, 0.0) {
            accumulate_word(p.key(), a * p.phase(), src, dst);
        }
    }
    Ok(out)
}

/// `|⟨φ_ref|φ⟩|²` between normalized reconstructed and reference states.
pub fn fidelity(alpha: &Array1<C64>, basis: &MomentBasis, psi: &StateVector, reference: &StateVector) -> Result<f64> {
    let phi = reconstruct_state(alpha, basis, psi)?;
    if reference.len() != phi.len() {
        return Err(Error::DimensionMismatch { expected: phi.len(), found: reference.len() });
    }
    let denom = norm_sqr(&phi) * norm_sqr(reference);
    if !(denom > 0.0) {
        return Err(Error::InvalidState("zero-norm state in fidelity".into()));
    }
    Ok((inner(reference, &phi).norm_sqr() / denom).min(1.0))
}

/// Coefficient history on the recorded grid.
#[derive(Clone, Debug)]
pub struct Integration {
    pub times: Vec<f64>,
    pub alphas: Vec<Array1<C64>>,
    pub rank: usize,
    pub condition: f64,
    /// Largest `|α†Eα − 1|` seen over all steps.
    pub max_norm_drift: f64,
}

/// Integrates from `α(t0) = e_0` over the configured grid.
pub fn integrate(ov: &OverlapSet, h: &TimeDependentHamiltonian, cfg: &EvolutionConfig) -> Result<Integration> {
    cfg.validate()?;
    let svd_tol = cfg.svd_tol_for(&ov.backend());
    let prop = Propagator::new(ov, h, svd_tol)?;
    let mut alpha = Array1::zeros(ov.dim());
    alpha[0] = C64::new(1.0, 0.0);
    let mut split = prop.split(&alpha);
    let record = cfg.record_steps();
    let mut out = Integration {
        times: Vec::with_capacity(record.len()),
        alphas: Vec::with_capacity(record.len()),
        rank: prop.rank(),
        condition: prop.condition(),
        max_norm_drift: (prop.split_norm_sqr(&split) - 1.0).abs(),
    };
    let mut next_record = record.iter().peekable();
    let mut t = cfg.t0;
    for step in 0..=cfg.n_steps() {
        if step > 0 {
            prop.advance(&mut split, t, cfg.dt, cfg.integrator, cfg.renormalize)?;
            t = cfg.time_of(step);
            out.max_norm_drift = out.max_norm_drift.max((prop.split_norm_sqr(&split) - 1.0).abs());
        }
        if next_record.peek() == Some(&&step) {
            next_record.next();
            out.times.push(t);
            out.alphas.push(prop.join(&split));
        }
    }
    Ok(out)
}

/// Basis construction parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnsatzConfig {
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(default = "default_closure_cap")]
    pub closure_cap: usize,
    #[serde(default = "default_basis_cap")]
    pub basis_cap: usize,
}

fn default_closure_cap() -> usize {
    DEFAULT_CLOSURE_CAP
}

fn default_basis_cap() -> usize {
    DEFAULT_BASIS_CAP
}

impl AnsatzConfig {
    pub fn new(k: usize) -> Self {
        AnsatzConfig { k, closure_cap: DEFAULT_CLOSURE_CAP, basis_cap: DEFAULT_BASIS_CAP }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NamedObservable {
    pub name: String,
    pub operator: PauliSum,
}

impl NamedObservable {
    /// Named after the indexed label of its single string, or `obsN`.
    pub fn from_label(label: &str, n_qubits: usize) -> Result<Self> {
        let p = crate::pauli::PauliString::parse(label, n_qubits)?;
        Ok(NamedObservable {
            name: p.indexed_label().replace(' ', ""),
            operator: PauliSum::from_string(C64::new(1.0, 0.0), &p),
        })
    }
}

#[derive(Clone, Debug)]
pub struct ClosedRun {
    pub hamiltonian: TimeDependentHamiltonian,
    pub state: InitialState,
    pub ansatz: AnsatzConfig,
    pub backend: Backend,
    pub evolution: EvolutionConfig,
    pub observables: Vec<NamedObservable>,
    /// Record `|⟨φ_exact(t)|φ(t)⟩|²` against a dense reference.
    pub fidelity: bool,
    /// Record `|⟨ψ|φ(t)⟩|²`, available at any register size.
    pub survival: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Diagnostics {
    pub basis_size: usize,
    pub basis_sizes_per_k: Vec<usize>,
    pub closure_size: usize,
    pub eval_count: usize,
    pub cond_e: f64,
    pub retained_rank: usize,
    pub svd_tol: f64,
    pub max_norm_drift: f64,
    pub closure_capped: bool,
    pub basis_capped: bool,
    pub build_seconds: f64,
    pub evolve_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub alphas: Vec<Array1<C64>>,
    pub observables: Vec<Trace>,
    pub survival: Option<Vec<f64>>,
    pub fidelity: Option<Vec<f64>>,
    pub diagnostics: Diagnostics,
}

impl TrajectoryRecord {
    pub fn trace(&self, name: &str) -> Option<&[f64]> {
        self.observables.iter().find(|t| t.name == name).map(|t| t.values.as_slice())
    }
}

/// Closure, basis and overlaps for a run; the only stage that touches a backend.
pub fn build_stage(
    h: &TimeDependentHamiltonian,
    state: &InitialState,
    ansatz: &AnsatzConfig,
    backend: Backend,
    observables: &[PauliSum],
    jumps: &[crate::overlap::Jump],
) -> Result<(MomentBasis, OverlapSet, Diagnostics)> {
    let start = Instant::now();
    let s = extended_operator_set(h, ansatz.closure_cap).stage("closure")?;
    build_from_set(&s, h, state, ansatz, backend, observables, jumps, start)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn build_from_set(
    s: &ExtendedOperatorSet,
    h: &TimeDependentHamiltonian,
    state: &InitialState,
    ansatz: &AnsatzConfig,
    backend: Backend,
    observables: &[PauliSum],
    jumps: &[crate::overlap::Jump],
    start: Instant,
) -> Result<(MomentBasis, OverlapSet, Diagnostics)> {
    let basis = cumulative_k_moment_basis(s, ansatz.k, ansatz.basis_cap).stage("basis")?;
    let ov = build_overlap_set(&basis, h, observables, jumps, state, backend).stage("overlaps")?;
    let diag = Diagnostics {
        basis_size: basis.len(),
        basis_sizes_per_k: basis.level_sizes().to_vec(),
        closure_size: s.len(),
        eval_count: ov.eval_count(),
        closure_capped: s.capped(),
        basis_capped: basis.capped(),
        build_seconds: start.elapsed().as_secs_f64(),
        ..Default::default()
    };
    Ok((basis, ov, diag))
}

/// Builds basis and overlaps, integrates, and records traces.
pub fn run_closed(spec: &ClosedRun) -> Result<TrajectoryRecord> {
    spec.evolution.validate().stage("config")?;
    let ops: Vec<PauliSum> = spec.observables.iter().map(|o| o.operator.clone()).collect();
    let (basis, ov, mut diag) = build_stage(&spec.hamiltonian, &spec.state, &spec.ansatz, spec.backend, &ops, &[])?;
    let start = Instant::now();
    let integ = integrate(&ov, &spec.hamiltonian, &spec.evolution).stage("evolution")?;
    diag.svd_tol = spec.evolution.svd_tol_for(&spec.backend);
    diag.retained_rank = integ.rank;
    diag.cond_e = integ.condition;
    diag.max_norm_drift = integ.max_norm_drift;

    let observables = spec
        .observables
        .iter()
        .zip(ov.observables())
        .map(|(o, m)| {
            let values = integ.alphas.iter().map(|a| observable_trace(a, m)).collect::<Result<Vec<_>>>()?;
            Ok(Trace { name: o.name.clone(), values })
        })
        .collect::<Result<Vec<_>>>()
        .stage("evolution")?;

    let survival = spec.survival.then(|| {
        let row = ov.e().row(0);
        integ
            .alphas
            .iter()
            .map(|a| row.iter().zip(a.iter()).map(|(e, x)| e * x).sum::<C64>().norm_sqr())
            .collect()
    });

    let fidelity = if spec.fidelity {
        let psi = spec.state.to_dense().stage("fidelity")?;
        let dt = spec.evolution.dt.min(REFERENCE_DT);
        let reference = exact_evolve(&spec.hamiltonian, &psi, &integ.times, dt).stage("fidelity")?;
        Some(
            integ
                .alphas
                .iter()
                .zip(&reference)
                .map(|(a, r)| fidelity(a, &basis, &psi, r))
                .collect::<Result<Vec<_>>>()
                .stage("fidelity")?,
        )
    } else {
        None
    };
    diag.evolve_seconds = start.elapsed().as_secs_f64();
    Ok(TrajectoryRecord { times: integ.times, alphas: integ.alphas, observables, survival, fidelity, diagnostics: diag })
}
