//! Declarative JSON run configuration.

use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::baselines::{NoiseModel, VqsSpec, EXACT_QUBIT_LIMIT};
use crate::error::Result;
use crate::evolution::{AnsatzConfig, ClosedRun, EvolutionConfig, NamedObservable};
use crate::hamiltonian::{random_pauli_hamiltonian, Channel, DriveFunction, Sinusoid, TimeDependentHamiltonian};
use crate::lindblad::{LindbladModel, OpenRun};
use crate::overlap::{Backend, Jump, DEFAULT_SHOTS};
use crate::pauli::{PauliString, PauliSum, C64};
use crate::state::{Entangler, InitialState, DENSE_QUBIT_LIMIT};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid configuration:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
}

/// A real or `[re, im]` coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coeff {
    Real(f64),
    Complex([f64; 2]),
}

impl Coeff {
    pub fn value(&self) -> C64 {
        match *self {
            Coeff::Real(r) => C64::new(r, 0.0),
            Coeff::Complex([re, im]) => C64::new(re, im),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coeff: Coeff,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub drive: DriveFunction,
    pub pauli_terms: Vec<TermSpec>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomPauliSpec {
    /// Number of random strings, one channel each.
    pub count: usize,
}

/// Exactly one of `channels` or `random_pauli`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<ChannelSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_pauli: Option<RandomPauliSpec>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    #[default]
    AllZeros,
    Product {
        /// Per site `[[re, im], [re, im]]`.
        sites: Vec<[[f64; 2]; 2]>,
    },
    Dense {
        amplitudes: Vec<[f64; 2]>,
    },
    LayeredCircuit {
        angles: Vec<f64>,
        #[serde(default = "default_entangler")]
        entangler: Entangler,
    },
    /// Seeded random product state; listed sites (1-based) are set to `|0⟩`.
    RandomProduct {
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        zero_sites: Vec<usize>,
    },
    RandomDense,
}

fn default_entangler() -> Entangler {
    Entangler::CzChain
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BackendSpec {
    #[default]
    Dense,
    Product,
    Sampled {
        #[serde(default = "default_shots")]
        shots: u64,
    },
}

fn default_shots() -> u64 {
    DEFAULT_SHOTS
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrotterSpec {
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VqsConfig {
    pub generators: Vec<String>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_depth_m")]
    pub depth_m: f64,
    #[serde(default = "default_depth_v")]
    pub depth_v: f64,
    /// Integration step; defaults to the evolution step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

fn default_depth_m() -> f64 {
    NoiseModel::default().depth_m
}

fn default_depth_v() -> f64 {
    NoiseModel::default().depth_v
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineSpec {
    #[serde(default)]
    pub exact: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trotter: Option<TrotterSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vqs: Option<VqsConfig>,
}

/// A jump operator given either as one label or as a term list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pauli_terms: Option<Vec<TermSpec>>,
    pub gamma: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LindbladSpec {
    pub jumps: Vec<JumpSpec>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_path")]
    pub path: String,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_out_path() -> String {
    "out".to_string()
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { path: default_out_path(), format: OutputFormat::Csv }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub schema_version: u32,
    pub n_qubits: usize,
    /// Drives every random choice: random states, random Hamiltonians and
    /// shot sampling.
    #[serde(default)]
    pub seed: u64,
    pub hamiltonian: HamiltonianSpec,
    #[serde(default)]
    pub initial_state: StateSpec,
    pub ansatz: AnsatzConfig,
    #[serde(default)]
    pub backend: BackendSpec,
    pub evolution: EvolutionConfig,
    #[serde(default)]
    pub observables: Vec<String>,
    #[serde(default)]
    pub fidelity: bool,
    #[serde(default)]
    pub survival: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baselines: Option<BaselineSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lindblad: Option<LindbladSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn terms_to_sum(n: usize, terms: &[TermSpec]) -> Result<PauliSum> {
    let mut sum = PauliSum::new(n);
    for t in terms {
        sum.add_string(t.coeff.value(), &PauliString::parse(&t.label, n)?);
    }
    Ok(sum)
}

fn finite(x: f64) -> bool {
    x.is_finite()
}

impl RunSpec {
    pub fn from_json(text: &str) -> std::result::Result<RunSpec, ConfigError> {
        let spec: RunSpec = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let problems = spec.problems();
        if problems.is_empty() {
            Ok(spec.with_defaults())
        } else {
            Err(ConfigError::Invalid(problems))
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run spec serializes")
    }

    /// Resolves backend-dependent defaults so the echoed spec is explicit.
    fn with_defaults(mut self) -> Self {
        let backend = self.backend_model();
        self.evolution.svd_tol = Some(self.evolution.svd_tol_for(&backend));
        self
    }

    fn state_is_product(&self) -> bool {
        matches!(
            self.initial_state,
            StateSpec::AllZeros | StateSpec::Product { .. } | StateSpec::RandomProduct { .. }
        )
    }

    /// Every violated constraint, in document order.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let n = self.n_qubits;
        if self.schema_version != SCHEMA_VERSION {
            p.push(format!("schema_version must be {SCHEMA_VERSION}, got {}", self.schema_version));
        }
        if n == 0 {
            p.push("n_qubits must be positive".into());
            return p;
        }

        match (&self.hamiltonian.channels, &self.hamiltonian.random_pauli) {
            (Some(_), Some(_)) | (None, None) => {
                p.push("hamiltonian needs exactly one of `channels` or `random_pauli`".into())
            }
            (Some(channels), None) => {
                if channels.is_empty() {
                    p.push("hamiltonian.channels is empty".into());
                }
                for (k, ch) in channels.iter().enumerate() {
                    check_drive(&ch.drive, k, &mut p);
                    if ch.pauli_terms.is_empty() {
                        p.push(format!("hamiltonian.channels[{k}] has no pauli_terms"));
                    }
                    check_terms(&ch.pauli_terms, n, &format!("hamiltonian.channels[{k}]"), &mut p);
                    if let Ok(sum) = terms_to_sum(n, &ch.pauli_terms) {
                        if !sum.is_hermitian() {
                            p.push(format!("hamiltonian.channels[{k}] is not Hermitian"));
                        }
                    }
                }
            }
            (None, Some(r)) => {
                if r.count == 0 {
                    p.push("hamiltonian.random_pauli.count must be positive".into());
                }
            }
        }

        match &self.initial_state {
            StateSpec::AllZeros => {}
            StateSpec::Product { sites } => {
                if sites.len() != n {
                    p.push(format!("initial_state.sites has {} entries, expected {n}", sites.len()));
                }
                for (q, s) in sites.iter().enumerate() {
                    let norm: f64 = s.iter().flatten().map(|x| x * x).sum();
                    if !(norm > 0.0 && norm.is_finite()) {
                        p.push(format!("initial_state.sites[{q}] has zero or non-finite norm"));
                    }
                }
            }
            StateSpec::Dense { amplitudes } => {
                if n > DENSE_QUBIT_LIMIT {
                    p.push(format!("dense initial state limited to {DENSE_QUBIT_LIMIT} qubits"));
                } else if amplitudes.len() != 1 << n {
                    p.push(format!("initial_state.amplitudes has {} entries, expected {}", amplitudes.len(), 1usize << n));
                }
                let norm: f64 = amplitudes.iter().flatten().map(|x| x * x).sum();
                if !(norm > 0.0 && norm.is_finite()) {
                    p.push("initial_state.amplitudes has zero or non-finite norm".into());
                }
            }
            StateSpec::LayeredCircuit { angles, .. } => {
                if angles.len() != 3 * n {
                    p.push(format!("initial_state.angles has {} entries, expected {}", angles.len(), 3 * n));
                }
                if !angles.iter().copied().all(finite) {
                    p.push("initial_state.angles must be finite".into());
                }
                if n > DENSE_QUBIT_LIMIT {
                    p.push(format!("layered_circuit state limited to {DENSE_QUBIT_LIMIT} qubits"));
                }
            }
            StateSpec::RandomProduct { zero_sites } => {
                for s in zero_sites {
                    if *s == 0 || *s > n {
                        p.push(format!("initial_state.zero_sites entry {s} outside 1..={n}"));
                    }
                }
            }
            StateSpec::RandomDense => {
                if n > DENSE_QUBIT_LIMIT {
                    p.push(format!("random_dense state limited to {DENSE_QUBIT_LIMIT} qubits"));
                }
            }
        }

        if self.ansatz.closure_cap == 0 {
            p.push("ansatz.closure_cap must be positive".into());
        }
        if self.ansatz.basis_cap == 0 {
            p.push("ansatz.basis_cap must be positive".into());
        }

        match self.backend {
            BackendSpec::Dense => {
                if n > DENSE_QUBIT_LIMIT {
                    p.push(format!("dense backend limited to {DENSE_QUBIT_LIMIT} qubits; use the product backend"));
                }
            }
            BackendSpec::Product => {
                if !self.state_is_product() {
                    p.push("product backend requires an all_zeros, product or random_product state".into());
                }
            }
            BackendSpec::Sampled { shots } => {
                if shots == 0 {
                    p.push("backend.shots must be positive".into());
                }
                if !self.state_is_product() && n > DENSE_QUBIT_LIMIT {
                    p.push(format!("sampled backend on a non-product state limited to {DENSE_QUBIT_LIMIT} qubits"));
                }
            }
        }

        p.extend(self.evolution.problems().into_iter().map(|s| format!("evolution: {s}")));

        for (k, label) in self.observables.iter().enumerate() {
            if let Err(e) = PauliString::parse(label, n) {
                p.push(format!("observables[{k}]: {e}"));
            }
        }
        if self.fidelity && n > EXACT_QUBIT_LIMIT {
            p.push(format!("fidelity needs a dense reference, limited to {EXACT_QUBIT_LIMIT} qubits"));
        }

        if let Some(b) = &self.baselines {
            if (b.exact || b.trotter.is_some() || b.vqs.is_some()) && n > EXACT_QUBIT_LIMIT {
                p.push(format!("baselines limited to {EXACT_QUBIT_LIMIT} qubits"));
            }
            if let Some(t) = &b.trotter {
                if t.steps == 0 {
                    p.push("baselines.trotter.steps must be positive".into());
                }
                if self.evolution.t0 != 0.0 {
                    p.push("baselines.trotter requires evolution.t0 = 0".into());
                }
            }
            if let Some(v) = &b.vqs {
                if v.generators.is_empty() {
                    p.push("baselines.vqs.generators is empty".into());
                }
                for (k, g) in v.generators.iter().enumerate() {
                    if let Err(e) = PauliString::parse(g, n) {
                        p.push(format!("baselines.vqs.generators[{k}]: {e}"));
                    }
                }
                if let Err(e) = (NoiseModel { lambda: v.lambda, depth_m: v.depth_m, depth_v: v.depth_v }).validate() {
                    p.push(format!("baselines.vqs: {e}"));
                }
                if let Some(dt) = v.dt {
                    if !(dt > 0.0 && dt.is_finite()) {
                        p.push(format!("baselines.vqs.dt must be positive, got {dt}"));
                    }
                }
            }
        }

        if let Some(l) = &self.lindblad {
            for (k, j) in l.jumps.iter().enumerate() {
                if !(j.gamma >= 0.0 && j.gamma.is_finite()) {
                    p.push(format!("lindblad.jumps[{k}].gamma must be nonnegative, got {}", j.gamma));
                }
                match (&j.label, &j.pauli_terms) {
                    (Some(label), None) => {
                        if let Err(e) = PauliString::parse(label, n) {
                            p.push(format!("lindblad.jumps[{k}]: {e}"));
                        }
                    }
                    (None, Some(terms)) => {
                        if terms.is_empty() {
                            p.push(format!("lindblad.jumps[{k}].pauli_terms is empty"));
                        }
                        check_terms(terms, n, &format!("lindblad.jumps[{k}]"), &mut p);
                    }
                    _ => p.push(format!("lindblad.jumps[{k}] needs exactly one of `label` or `pauli_terms`")),
                }
            }
        }
        p
    }

    pub fn backend_model(&self) -> Backend {
        match self.backend {
            BackendSpec::Dense => Backend::Dense,
            BackendSpec::Product => Backend::Product,
            BackendSpec::Sampled { shots } => Backend::Sampled { shots, seed: self.seed },
        }
    }

    pub fn hamiltonian_model(&self) -> Result<TimeDependentHamiltonian> {
        let n = self.n_qubits;
        match (&self.hamiltonian.channels, &self.hamiltonian.random_pauli) {
            (Some(channels), _) => TimeDependentHamiltonian::new(
                n,
                channels
                    .iter()
                    .map(|c| Ok(Channel { drive: c.drive.clone(), operator: terms_to_sum(n, &c.pauli_terms)? }))
                    .collect::<Result<Vec<_>>>()?,
            ),
            (None, Some(r)) => random_pauli_hamiltonian(n, r.count, self.seed),
            (None, None) => Err(crate::Error::InvalidArgument("hamiltonian is empty".into())),
        }
    }

    pub fn initial_state_model(&self) -> Result<InitialState> {
        let n = self.n_qubits;
        // distinct stream from the Hamiltonian generator
        let state_seed = self.seed ^ 0x5bd1_e995_5bd1_e995;
        match &self.initial_state {
            StateSpec::AllZeros => Ok(InitialState::all_zeros(n)),
            StateSpec::Product { sites } => InitialState::product(
                sites.iter().map(|[a, b]| [C64::new(a[0], a[1]), C64::new(b[0], b[1])]).collect(),
            ),
            StateSpec::Dense { amplitudes } => {
                InitialState::dense(amplitudes.iter().map(|a| C64::new(a[0], a[1])).collect::<Array1<C64>>())
            }
            StateSpec::LayeredCircuit { angles, entangler } => InitialState::layered_circuit(angles.clone(), *entangler),
            StateSpec::RandomProduct { zero_sites } => {
                let InitialState::Product { mut sites } = InitialState::random_product(n, state_seed)? else {
                    unreachable!("random_product builds a product state")
                };
                for &s in zero_sites {
                    sites[s - 1] = [C64::new(1.0, 0.0), C64::new(0.0, 0.0)];
                }
                InitialState::product(sites)
            }
            StateSpec::RandomDense => InitialState::random_dense(n, state_seed),
        }
    }

    pub fn observable_models(&self) -> Result<Vec<NamedObservable>> {
        self.observables.iter().map(|l| NamedObservable::from_label(l, self.n_qubits)).collect()
    }

    pub fn closed_run(&self) -> Result<ClosedRun> {
        Ok(ClosedRun {
            hamiltonian: self.hamiltonian_model()?,
            state: self.initial_state_model()?,
            ansatz: self.ansatz,
            backend: self.backend_model(),
            evolution: self.evolution.clone(),
            observables: self.observable_models()?,
            fidelity: self.fidelity,
            survival: self.survival,
        })
    }

    pub fn jump_models(&self) -> Result<Vec<Jump>> {
        let n = self.n_qubits;
        let Some(l) = &self.lindblad else {
            return Ok(Vec::new());
        };
        l.jumps
            .iter()
            .map(|j| {
                let operator = match (&j.label, &j.pauli_terms) {
                    (Some(label), _) => PauliSum::from_string(C64::new(1.0, 0.0), &PauliString::parse(label, n)?),
                    (None, Some(terms)) => terms_to_sum(n, terms)?,
                    (None, None) => return Err(crate::Error::InvalidArgument("jump operator missing".into())),
                };
                Ok(Jump { operator, rate: j.gamma })
            })
            .collect()
    }

    pub fn open_run(&self) -> Result<OpenRun> {
        Ok(OpenRun {
            model: LindbladModel::new(self.hamiltonian_model()?, self.jump_models()?)?,
            state: self.initial_state_model()?,
            ansatz: self.ansatz,
            backend: self.backend_model(),
            evolution: self.evolution.clone(),
            observables: self.observable_models()?,
        })
    }

    pub fn vqs_model(&self) -> Result<Option<(VqsSpec, NoiseModel, f64)>> {
        let Some(v) = self.baselines.as_ref().and_then(|b| b.vqs.as_ref()) else {
            return Ok(None);
        };
        let generators = v
            .generators
            .iter()
            .map(|g| PauliString::parse(g, self.n_qubits))
            .collect::<Result<Vec<_>>>()?;
        let phi0 = self.initial_state_model()?.to_dense()?;
        let noise = NoiseModel { lambda: v.lambda, depth_m: v.depth_m, depth_v: v.depth_v };
        Ok(Some((VqsSpec::new(generators, phi0), noise, v.dt.unwrap_or(self.evolution.dt))))
    }
}

fn check_drive(drive: &DriveFunction, k: usize, p: &mut Vec<String>) {
    let sin_ok = |s: &Sinusoid| finite(s.amplitude) && finite(s.omega) && finite(s.phase);
    let ok = match drive {
        DriveFunction::Constant { value } => finite(*value),
        DriveFunction::Sinusoid(s) => sin_ok(s),
        DriveFunction::SumOfSinusoids { parts } => !parts.is_empty() && parts.iter().all(sin_ok),
    };
    if !ok {
        p.push(format!("hamiltonian.channels[{k}].drive has non-finite or missing parameters"));
    }
}

fn check_terms(terms: &[TermSpec], n: usize, ctx: &str, p: &mut Vec<String>) {
    for (j, t) in terms.iter().enumerate() {
        let c = t.coeff.value();
        if !(c.re.is_finite() && c.im.is_finite()) {
            p.push(format!("{ctx}.pauli_terms[{j}].coeff is not finite"));
        }
        if let Err(e) = PauliString::parse(&t.label, n) {
            p.push(format!("{ctx}.pauli_terms[{j}]: {e}"));
        }
    }
}

/// Reads and validates a configuration file.
pub fn load_config(path: &Path) -> std::result::Result<RunSpec, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    RunSpec::from_json(&text)
}
