//! One-shot evaluation of every overlap matrix the evolution needs.
//!
//! Each matrix element reduces to `⟨ψ|W|ψ⟩` for a Hermitian Pauli word `W`.
//! Values are memoized on the phase-free key, so every distinct word hits the
//! backend exactly once per build.

use std::collections::HashMap;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::ansatz::MomentBasis;
use crate::error::{Error, Result};
use crate::hamiltonian::TimeDependentHamiltonian;
use crate::pauli::{i_pow, PauliKey, PauliString, PauliSum, C64};
use crate::state::{word_expectation_dense, word_expectation_product, InitialState, StateVector};

pub const DEFAULT_SHOTS: u64 = 8192;

/// Largest basis accepted by [`build_overlap_set`].
pub const MAX_BASIS: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Backend {
    Dense,
    Product,
    Sampled {
        #[serde(default = "default_shots")]
        shots: u64,
        #[serde(default)]
        seed: u64,
    },
}

fn default_shots() -> u64 {
    DEFAULT_SHOTS
}

impl Backend {
    pub fn tag(&self) -> &'static str {
        match self {
            Backend::Dense => "dense",
            Backend::Product => "product",
            Backend::Sampled { .. } => "sampled",
        }
    }

    pub fn is_sampled(&self) -> bool {
        matches!(self, Backend::Sampled { .. })
    }
}

/// Identifies one random stream: the first matrix element that requested a word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StreamKey {
    pub seed: u64,
    pub i: u64,
    pub j: u64,
    pub channel: u64,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl StreamKey {
    fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let stream = splitmix(splitmix(splitmix(self.i) ^ self.j) ^ self.channel);
        rng.set_stream(stream);
        rng
    }
}

fn sample_part(value: f64, shots: u64, rng: &mut ChaCha8Rng) -> Result<f64> {
    if !value.is_finite() || value.abs() > 1.0 + 1e-12 {
        return Err(Error::InvalidArgument(format!("expectation part {value} outside [-1, 1]")));
    }
    let p = ((1.0 + value) / 2.0).clamp(0.0, 1.0);
    let ups = Binomial::new(shots, p)
        .map_err(|e| Error::InvalidArgument(format!("binomial: {e}")))?
        .sample(rng);
    Ok((2.0 * ups as f64 - shots as f64) / shots as f64)
}

/// Finite-shot estimate of `true_value`; real and imaginary parts are each the
/// mean of `shots` ±1 outcomes. Pure function of `key`.
pub fn sampled_estimate(true_value: C64, shots: u64, key: StreamKey) -> Result<C64> {
    if shots == 0 {
        return Err(Error::InvalidArgument("shots must be positive".into()));
    }
    let mut rng = key.rng();
    let re = sample_part(true_value.re, shots, &mut rng)?;
    let im = sample_part(true_value.im, shots, &mut rng)?;
    Ok(C64::new(re, im))
}

thread_local! {
    static EVALUATIONS: std::cell::Cell<u64> = const { std::cell::Cell::new(0) };
}

/// Distinct backend evaluations performed on the calling thread so far.
pub fn backend_evaluations() -> u64 {
    EVALUATIONS.with(|c| c.get())
}

struct Evaluator<'a> {
    state: &'a InitialState,
    dense: Option<StateVector>,
    backend: Backend,
    memo: HashMap<PauliKey, f64>,
}

impl<'a> Evaluator<'a> {
    fn new(state: &'a InitialState, backend: Backend) -> Result<Self> {
        let dense = match backend {
            Backend::Product => {
                if !state.is_product() {
                    return Err(Error::IncompatibleBackend {
                        backend: backend.tag().into(),
                        state: state.kind().into(),
                    });
                }
                None
            }
            Backend::Sampled { shots, .. } => {
                if shots == 0 {
                    return Err(Error::InvalidArgument("shots must be positive".into()));
                }
                if state.is_product() {
                    None
                } else {
                    Some(state.to_dense()?)
                }
            }
            Backend::Dense => Some(state.to_dense()?),
        };
        Ok(Evaluator { state, dense, backend, memo: HashMap::new() })
    }

    fn exact(&self, key: &PauliKey) -> f64 {
        if let Some(psi) = &self.dense {
            return word_expectation_dense(key, psi.as_slice().expect("contiguous")).re;
        }
        match self.state {
            InitialState::AllZeros { .. } => {
                if key.x.is_zero() {
                    1.0
                } else {
                    0.0
                }
            }
            InitialState::Product { sites } => word_expectation_product(key, sites).re,
            _ => unreachable!("dense vector materialized for non-product states"),
        }
    }

    fn word(&mut self, key: PauliKey, slot: (usize, usize, usize)) -> Result<f64> {
        if let Some(v) = self.memo.get(&key) {
            return Ok(*v);
        }
        EVALUATIONS.with(|c| c.set(c.get() + 1));
        let exact = self.exact(&key);
        let v = match self.backend {
            Backend::Sampled { shots, seed } => {
                if key.is_identity() {
                    1.0
                } else {
                    let sk = StreamKey { seed, i: slot.0 as u64, j: slot.1 as u64, channel: slot.2 as u64 };
                    sampled_estimate(C64::new(exact, 0.0), shots, sk)?.re
                }
            }
            _ => exact,
        };
        self.memo.insert(key, v);
        Ok(v)
    }

    /// `M[i,j] = ⟨ψ|P_i† O P_j|ψ⟩`; only the upper triangle is evaluated when
    /// `O` is Hermitian.
    fn matrix(&mut self, basis: &[PauliString], op: &PauliSum, channel: usize) -> Result<Array2<C64>> {
        let m = basis.len();
        let hermitian = op.is_hermitian();
        let terms: Vec<(&PauliKey, C64)> = op.iter().collect();
        let mut out = Array2::<C64>::zeros((m, m));
        for i in 0..m {
            let pi = &basis[i];
            let left: Vec<(PauliKey, C64)> = terms
                .iter()
                .map(|(k, c)| {
                    let (key, e) = pi.key().product(k);
                    (key, c * i_pow(e) * pi.phase().conj())
                })
                .collect();
            let start = if hermitian { i } else { 0 };
            for j in start..m {
                let pj = &basis[j];
                let mut acc = C64::new(0.0, 0.0);
                for (lk, lc) in &left {
                    let (key, e) = lk.product(pj.key());
                    let w = self.word(key, (i, j, channel))?;
                    acc += lc * i_pow(e) * w;
                }
                acc *= pj.phase();
                out[[i, j]] = acc;
            }
            if hermitian {
                out[[i, i]] = C64::new(out[[i, i]].re, 0.0);
                for j in i + 1..m {
                    out[[j, i]] = out[[i, j]].conj();
                }
            }
        }
        Ok(out)
    }
}

/// A jump operator with its rate.
#[derive(Clone, Debug, PartialEq)]
pub struct Jump {
    pub operator: PauliSum,
    pub rate: f64,
}

#[derive(Clone, Debug)]
pub struct OverlapSet {
    e: Array2<C64>,
    d: Vec<Array2<C64>>,
    obs: Vec<Array2<C64>>,
    r: Vec<Array2<C64>>,
    f: Vec<Array2<C64>>,
    eval_count: usize,
    backend: Backend,
}

impl OverlapSet {
    pub fn dim(&self) -> usize {
        self.e.nrows()
    }

    pub fn e(&self) -> &Array2<C64> {
        &self.e
    }

    pub fn d(&self) -> &[Array2<C64>] {
        &self.d
    }

    pub fn observables(&self) -> &[Array2<C64>] {
        &self.obs
    }

    pub fn r(&self) -> &[Array2<C64>] {
        &self.r
    }

    pub fn f(&self) -> &[Array2<C64>] {
        &self.f
    }

    pub fn eval_count(&self) -> usize {
        self.eval_count
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }
}

/// Builds `E`, one `D_k` per channel, one matrix per observable and, for each
/// jump `L`, `R = ⟨χ_i|L|χ_j⟩` and `F = ⟨χ_i|L†L|χ_j⟩`.
pub fn build_overlap_set(
    basis: &MomentBasis,
    h: &TimeDependentHamiltonian,
    observables: &[PauliSum],
    jumps: &[Jump],
    state: &InitialState,
    backend: Backend,
) -> Result<OverlapSet> {
    let n = basis.n_qubits();
    if basis.is_empty() || !basis.operators()[0].is_identity() {
        return Err(Error::MissingIdentity);
    }
    if basis.len() > MAX_BASIS {
        return Err(Error::CapExceeded { what: "overlap basis", cap: MAX_BASIS });
    }
    if h.n_qubits() != n {
        return Err(Error::DimensionMismatch { expected: n, found: h.n_qubits() });
    }
    if state.n_qubits() != n {
        return Err(Error::DimensionMismatch { expected: n, found: state.n_qubits() });
    }
    for op in observables.iter().chain(jumps.iter().map(|j| &j.operator)) {
        if op.n_qubits() != n {
            return Err(Error::DimensionMismatch { expected: n, found: op.n_qubits() });
        }
    }
    let ops = basis.operators();
    let mut ev = Evaluator::new(state, backend)?;
    let mut channel = 0;
    let mut next = |ev: &mut Evaluator, op: &PauliSum| {
        let m = ev.matrix(ops, op, channel);
        channel += 1;
        m
    };
    let identity = PauliSum::from_string(C64::new(1.0, 0.0), &PauliString::identity(n));
    let e = next(&mut ev, &identity)?;
    let d = h
        .channels()
        .iter()
        .map(|c| next(&mut ev, &c.operator))
        .collect::<Result<Vec<_>>>()?;
    let obs = observables.iter().map(|o| next(&mut ev, o)).collect::<Result<Vec<_>>>()?;
    let mut r = Vec::with_capacity(jumps.len());
    let mut f = Vec::with_capacity(jumps.len());
    for jump in jumps {
        r.push(next(&mut ev, &jump.operator)?);
        let ldl = jump.operator.dagger().multiply(&jump.operator)?;
        f.push(next(&mut ev, &ldl)?);
    }
    Ok(OverlapSet { e, d, obs, r, f, eval_count: ev.memo.len(), backend })
}
