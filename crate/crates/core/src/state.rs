//! Initial states and dense statevector kernels.
//!
//! Basis index bit `q` corresponds to site `q+1`, so `|b⟩` has site `q+1` in
//! state `(b >> q) & 1`.

use ndarray::Array1;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{i_pow, PauliKey, PauliString, PauliSum, C64};

pub type StateVector = Array1<C64>;

/// Largest register the dense kernels will materialize.
pub const DENSE_QUBIT_LIMIT: usize = 24;

const NORM_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entangler {
    /// Controlled-Z between every neighbouring pair `(q, q+1)`.
    CzChain,
    None,
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitialState {
    AllZeros { n_qubits: usize },
    /// Per-site normalized amplitudes `(⟨0|s⟩, ⟨1|s⟩)`.
    Product { sites: Vec<[C64; 2]> },
    Dense { amplitudes: StateVector },
    /// `R_z(θ3) R_y(θ2) R_x(θ1)` on every site of `|0…0⟩`, followed by the
    /// entangler. `angles` holds three angles per site in that order.
    LayeredCircuit { angles: Vec<f64>, entangler: Entangler },
}

impl InitialState {
    pub fn all_zeros(n_qubits: usize) -> Self {
        InitialState::AllZeros { n_qubits }
    }

    /// Normalizes each site independently.
    pub fn product(sites: Vec<[C64; 2]>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::InvalidState("product state needs at least one site".into()));
        }
        let sites = sites
            .into_iter()
            .enumerate()
            .map(|(q, [a, b])| {
                let norm = (a.norm_sqr() + b.norm_sqr()).sqrt();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(Error::InvalidState(format!("site {} has zero or non-finite norm", q + 1)));
                }
                Ok([a / norm, b / norm])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(InitialState::Product { sites })
    }

    pub fn dense(amplitudes: StateVector) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidState(format!("dense state length {len} is not 2^n with n >= 1")));
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidState("dense state has zero or non-finite norm".into()));
        }
        Ok(InitialState::Dense { amplitudes: amplitudes.mapv(|a| a / norm) })
    }

    pub fn layered_circuit(angles: Vec<f64>, entangler: Entangler) -> Result<Self> {
        if angles.is_empty() || angles.len() % 3 != 0 {
            return Err(Error::InvalidState(format!(
                "layered circuit needs three angles per site, got {}",
                angles.len()
            )));
        }
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("circuit angle".into()));
        }
        Ok(InitialState::LayeredCircuit { angles, entangler })
    }

    /// Seeded product of Haar-like single-site states.
    pub fn random_product(n_qubits: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sites = (0..n_qubits).map(|_| random_site(&mut rng)).collect();
        InitialState::product(sites)
    }

    /// Seeded Gaussian random dense state.
    pub fn random_dense(n_qubits: usize, seed: u64) -> Result<Self> {
        check_dense_limit(n_qubits)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let amps = (0..1usize << n_qubits)
            .map(|_| C64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        InitialState::dense(amps)
    }

    pub fn n_qubits(&self) -> usize {
        match self {
            InitialState::AllZeros { n_qubits } => *n_qubits,
            InitialState::Product { sites } => sites.len(),
            InitialState::Dense { amplitudes } => amplitudes.len().trailing_zeros() as usize,
            InitialState::LayeredCircuit { angles, .. } => angles.len() / 3,
        }
    }

    pub fn is_product(&self) -> bool {
        matches!(self, InitialState::AllZeros { .. } | InitialState::Product { .. })
    }

    pub fn kind(&self) -> &'static str {
        match self {
            InitialState::AllZeros { .. } => "all_zeros",
            InitialState::Product { .. } => "product",
            InitialState::Dense { .. } => "dense",
            InitialState::LayeredCircuit { .. } => "layered_circuit",
        }
    }

    pub fn to_dense(&self) -> Result<StateVector> {
        let n = self.n_qubits();
        check_dense_limit(n)?;
        match self {
            InitialState::AllZeros { .. } => {
                let mut v = Array1::zeros(1 << n);
                v[0] = C64::new(1.0, 0.0);
                Ok(v)
            }
            InitialState::Product { sites } => Ok(product_to_dense(sites)),
            InitialState::Dense { amplitudes } => Ok(amplitudes.clone()),
            InitialState::LayeredCircuit { angles, entangler } => {
                let sites: Vec<[C64; 2]> = angles
                    .chunks(3)
                    .map(|a| rotated_zero(a[0], a[1], a[2]))
                    .collect();
                let mut v = product_to_dense(&sites);
                if *entangler == Entangler::CzChain {
                    for q in 0..n.saturating_sub(1) {
                        let mask = (1usize << q) | (1usize << (q + 1));
                        for (b, amp) in v.iter_mut().enumerate() {
                            if b & mask == mask {
                                *amp = -*amp;
                            }
                        }
                    }
                }
                Ok(v)
            }
        }
    }
}

fn random_site(rng: &mut ChaCha8Rng) -> [C64; 2] {
    let mut draw = || C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng));
    [draw(), draw()]
}

/// `R_z(c) R_y(b) R_x(a) |0⟩` with `R_σ(θ) = exp(-iθσ/2)`.
fn rotated_zero(a: f64, b: f64, c: f64) -> [C64; 2] {
    let (ca, sa) = ((a / 2.0).cos(), (a / 2.0).sin());
    // R_x(a)|0⟩
    let v0 = C64::new(ca, 0.0);
    let v1 = C64::new(0.0, -sa);
    // R_y(b)
    let (cb, sb) = ((b / 2.0).cos(), (b / 2.0).sin());
    let w0 = v0 * cb - v1 * sb;
    let w1 = v0 * sb + v1 * cb;
    // R_z(c)
    let ph = C64::from_polar(1.0, c / 2.0);
    [w0 * ph.conj(), w1 * ph]
}

fn product_to_dense(sites: &[[C64; 2]]) -> StateVector {
    let n = sites.len();
    Array1::from_shape_fn(1 << n, |b| {
        sites
            .iter()
            .enumerate()
            .fold(C64::new(1.0, 0.0), |acc, (q, s)| acc * s[(b >> q) & 1])
    })
}

pub fn check_dense_limit(n_qubits: usize) -> Result<()> {
    if n_qubits > DENSE_QUBIT_LIMIT {
        return Err(Error::TooLarge { n_qubits, limit: DENSE_QUBIT_LIMIT });
    }
    Ok(())
}

fn check_len(n_qubits: usize, len: usize) -> Result<()> {
    check_dense_limit(n_qubits)?;
    if len != 1usize << n_qubits {
        return Err(Error::DimensionMismatch { expected: 1 << n_qubits, found: len });
    }
    Ok(())
}

/// Masks and phase of a word on a dense register (`n <= 64`).
#[inline]
fn word_masks(key: &PauliKey) -> (usize, usize, u8) {
    (key.x.low_word() as usize, key.z.low_word() as usize, (key.y_count() & 3) as u8)
}

/// `out += coeff · W|ψ⟩` for the Hermitian word `W` with phase-free `key`.
pub fn accumulate_word(key: &PauliKey, coeff: C64, psi: &[C64], out: &mut [C64]) {
    let (x, z, y) = word_masks(key);
    let c = coeff * i_pow(y);
    let neg = -c;
    for (b, &amp) in psi.iter().enumerate() {
        let s = if (b & z).count_ones() & 1 == 1 { neg } else { c };
        out[b ^ x] += s * amp;
    }
}

/// `P|ψ⟩` for a Pauli string including its phase.
pub fn apply_string(p: &PauliString, psi: &StateVector) -> Result<StateVector> {
    check_len(p.n_qubits(), psi.len())?;
    let mut out = Array1::zeros(psi.len());
    accumulate_word(
        p.key(),
        p.phase(),
        psi.as_slice().expect("contiguous"),
        out.as_slice_mut().expect("contiguous"),
    );
    Ok(out)
}

/// `O|ψ⟩` for a Pauli sum.
pub fn apply_sum(op: &PauliSum, psi: &StateVector) -> Result<StateVector> {
    check_len(op.n_qubits(), psi.len())?;
    let mut out = Array1::zeros(psi.len());
    apply_sum_into(op, psi.as_slice().expect("contiguous"), 1.0, out.as_slice_mut().expect("contiguous"));
    Ok(out)
}

/// `out += scale · O|ψ⟩` without allocation.
pub(crate) fn apply_sum_into(op: &PauliSum, psi: &[C64], scale: f64, out: &mut [C64]) {
    for (key, c) in op.iter() {
        accumulate_word(key, c * scale, psi, out);
    }
}

/// `⟨ψ|W|ψ⟩` for the Hermitian word with phase-free `key`.
pub fn word_expectation_dense(key: &PauliKey, psi: &[C64]) -> C64 {
    let (x, z, y) = word_masks(key);
    let mut acc = C64::new(0.0, 0.0);
    for (b, &amp) in psi.iter().enumerate() {
        let term = psi[b ^ x].conj() * amp;
        if (b & z).count_ones() & 1 == 1 {
            acc -= term;
        } else {
            acc += term;
        }
    }
    acc * i_pow(y)
}

/// `⟨ψ|P|ψ⟩` on a dense vector.
pub fn expectation_dense(p: &PauliString, psi: &StateVector) -> Result<C64> {
    check_len(p.n_qubits(), psi.len())?;
    Ok(p.phase() * word_expectation_dense(p.key(), psi.as_slice().expect("contiguous")))
}

pub fn expectation_sum_dense(op: &PauliSum, psi: &StateVector) -> Result<C64> {
    check_len(op.n_qubits(), psi.len())?;
    let s = psi.as_slice().expect("contiguous");
    Ok(op.iter().map(|(k, c)| c * word_expectation_dense(k, s)).sum())
}

/// `⟨W⟩` on a product state; O(weight of W).
pub fn word_expectation_product(key: &PauliKey, sites: &[[C64; 2]]) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    let mut support: Vec<usize> = key.x.ones().chain(key.z.ones()).collect();
    support.sort_unstable();
    support.dedup();
    for q in support {
        let [a0, a1] = sites[q];
        let cross = a0.conj() * a1;
        let v = match (key.x.get(q), key.z.get(q)) {
            (true, false) => 2.0 * cross.re,
            (true, true) => 2.0 * cross.im,
            (false, true) => a0.norm_sqr() - a1.norm_sqr(),
            (false, false) => unreachable!("site in support"),
        };
        acc *= v;
        if acc == C64::new(0.0, 0.0) {
            break;
        }
    }
    acc
}

/// `⟨ψ|P|ψ⟩` for a product-form state without materializing `2^n` amplitudes.
pub fn expectation_product(p: &PauliString, state: &InitialState) -> Result<C64> {
    if state.n_qubits() != p.n_qubits() {
        return Err(Error::DimensionMismatch { expected: state.n_qubits(), found: p.n_qubits() });
    }
    let w = match state {
        InitialState::AllZeros { .. } => {
            if p.x_mask().is_zero() {
                C64::new(1.0, 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }
        InitialState::Product { sites } => word_expectation_product(p.key(), sites),
        other => {
            return Err(Error::IncompatibleBackend { backend: "product".into(), state: other.kind().into() })
        }
    };
    Ok(p.phase() * w)
}

pub fn norm_sqr(psi: &StateVector) -> f64 {
    psi.iter().map(|a| a.norm_sqr()).sum()
}

/// `⟨a|b⟩`.
pub fn inner(a: &StateVector, b: &StateVector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn is_normalized(psi: &StateVector) -> bool {
    (norm_sqr(psi) - 1.0).abs() <= NORM_TOL
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn p(label: &str, n: usize) -> PauliString {
        PauliString::parse(label, n).unwrap()
    }

    #[test]
    fn z_on_zero_and_x_on_plus() {
        let zero = InitialState::all_zeros(1).to_dense().unwrap();
        assert_eq!(expectation_dense(&p("Z", 1), &zero).unwrap(), c(1.0, 0.0));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = InitialState::dense(Array1::from(vec![c(h, 0.0), c(h, 0.0)])).unwrap();
        let v = expectation_dense(&p("X", 1), &plus.to_dense().unwrap()).unwrap();
        assert!((v - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn product_expectations() {
        let zeros = InitialState::all_zeros(7);
        assert_eq!(expectation_product(&p("Z1", 7), &zeros).unwrap(), c(1.0, 0.0));
        let zeros2 = InitialState::all_zeros(2);
        assert_eq!(expectation_product(&p("X2", 2), &zeros2).unwrap(), c(0.0, 0.0));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let st = InitialState::product(vec![[c(h, 0.0), c(h, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]).unwrap();
        assert!(expectation_product(&p("Z1 Z2", 2), &st).unwrap().norm() < 1e-15);
        let dense = InitialState::random_dense(2, 1).unwrap();
        assert!(matches!(
            expectation_product(&p("Z1", 2), &dense),
            Err(Error::IncompatibleBackend { .. })
        ));
    }

    #[test]
    fn constructors_normalize() {
        let st = InitialState::product(vec![[c(3.0, 0.0), c(0.0, 4.0)]]).unwrap();
        assert!(is_normalized(&st.to_dense().unwrap()));
        assert!(InitialState::product(vec![[c(0.0, 0.0), c(0.0, 0.0)]]).is_err());
        assert!(InitialState::dense(Array1::from(vec![c(1.0, 0.0); 3])).is_err());
        assert!(is_normalized(&InitialState::random_dense(5, 9).unwrap().to_dense().unwrap()));
        let lc = InitialState::layered_circuit(vec![0.3, 1.1, -0.4, 2.0, 0.1, 0.9], Entangler::CzChain).unwrap();
        assert!(is_normalized(&lc.to_dense().unwrap()));
        assert!(InitialState::layered_circuit(vec![0.3, 1.1], Entangler::CzChain).is_err());
    }

    #[test]
    fn dense_length_checked() {
        let psi = InitialState::all_zeros(2).to_dense().unwrap();
        assert!(matches!(
            expectation_dense(&p("Z1", 3), &psi),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn apply_matches_expectation() {
        let psi = InitialState::random_dense(4, 3).unwrap().to_dense().unwrap();
        for label in ["X1 Y2", "Z3 Y4", "Y1 Y2 Y3 Y4", "X2"] {
            let s = p(label, 4);
            let applied = apply_string(&s, &psi).unwrap();
            let direct = expectation_dense(&s, &psi).unwrap();
            assert!((inner(&psi, &applied) - direct).norm() < 1e-13);
        }
    }

    #[test]
    fn product_and_dense_agree() {
        let st = InitialState::random_product(6, 11).unwrap();
        let psi = st.to_dense().unwrap();
        for label in ["X1 Y2 Z3", "Y6", "Z1 Z2 Z3 Z4 Z5 Z6", "X2 X5"] {
            let s = p(label, 6);
            let a = expectation_product(&s, &st).unwrap();
            let b = expectation_dense(&s, &psi).unwrap();
            assert!((a - b).norm() < 1e-13, "{label}: {a} vs {b}");
        }
    }
}
