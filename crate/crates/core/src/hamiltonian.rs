//! Time-dependent Hamiltonians `H(t) = Σ_k f_k(t) H_k`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{PauliKey, PauliString, PauliSum, C64};

/// `amplitude · sin(omega · t + phase)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sinusoid {
    pub amplitude: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

impl Sinusoid {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude * (self.omega * t + self.phase).sin()
    }
}

/// Scalar drive of a Hamiltonian channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DriveFunction {
    Constant { value: f64 },
    Sinusoid(Sinusoid),
    SumOfSinusoids { parts: Vec<Sinusoid> },
}

impl DriveFunction {
    pub fn constant(value: f64) -> Self {
        DriveFunction::Constant { value }
    }

    pub fn sin(amplitude: f64, omega: f64, phase: f64) -> Self {
        DriveFunction::Sinusoid(Sinusoid { amplitude, omega, phase })
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            DriveFunction::Constant { value } => *value,
            DriveFunction::Sinusoid(s) => s.eval(t),
            DriveFunction::SumOfSinusoids { parts } => parts.iter().map(|s| s.eval(t)).sum(),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, DriveFunction::Constant { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    pub drive: DriveFunction,
    pub operator: PauliSum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TimeDependentHamiltonian {
    n_qubits: usize,
    channels: Vec<Channel>,
}

impl TimeDependentHamiltonian {
    pub fn new(n_qubits: usize, channels: Vec<Channel>) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("n_qubits must be positive".into()));
        }
        for ch in &channels {
            if ch.operator.n_qubits() != n_qubits {
                return Err(Error::DimensionMismatch {
                    expected: n_qubits,
                    found: ch.operator.n_qubits(),
                });
            }
        }
        Ok(TimeDependentHamiltonian { n_qubits, channels })
    }

    /// Convenience constructor from `(drive, operator)` pairs.
    pub fn from_pairs(n_qubits: usize, pairs: Vec<(DriveFunction, PauliSum)>) -> Result<Self> {
        Self::new(
            n_qubits,
            pairs
                .into_iter()
                .map(|(drive, operator)| Channel { drive, operator })
                .collect(),
        )
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn evaluate_drives(&self, t: f64) -> Result<Vec<f64>> {
        if !t.is_finite() {
            return Err(Error::NonFinite(format!("time {t}")));
        }
        Ok(self.drives_at(t))
    }

    /// Unchecked drive evaluation for the integrators' inner loops.
    pub(crate) fn drives_at(&self, t: f64) -> Vec<f64> {
        self.channels.iter().map(|c| c.drive.eval(t)).collect()
    }

    pub fn is_hermitian(&self) -> bool {
        self.channels.iter().all(|c| c.operator.is_hermitian())
    }

    /// `H(t)` collapsed to a single sum.
    pub fn at(&self, t: f64) -> PauliSum {
        let mut out = PauliSum::new(self.n_qubits);
        for c in &self.channels {
            let f = c.drive.eval(t);
            out = out
                .add(&c.operator.scale(f.into()))
                .expect("channels share n_qubits");
        }
        out
    }
}

/// `H(t) = Σ_i sin(πt + φ_i) P_i` with `count` random non-identity strings,
/// each site drawn uniformly from {I, X, Y, Z} and `φ_i ∈ {0, π/2}`.
pub fn random_pauli_hamiltonian(n_qubits: usize, count: usize, seed: u64) -> Result<TimeDependentHamiltonian> {
    if n_qubits == 0 || count == 0 {
        return Err(Error::InvalidArgument("random Hamiltonian needs qubits and strings".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut channels = Vec::with_capacity(count);
    while channels.len() < count {
        let mut key = PauliKey::identity(n_qubits);
        for q in 0..n_qubits {
            let letter: u8 = rng.random_range(0..4);
            key.x.set(q, letter == 1 || letter == 2);
            key.z.set(q, letter == 2 || letter == 3);
        }
        let phase = if rng.random_bool(0.5) { FRAC_PI_2 } else { 0.0 };
        if key.is_identity() {
            continue;
        }
        let p = PauliString::from_key(n_qubits, key, 0);
        channels.push(Channel {
            drive: DriveFunction::sin(1.0, PI, phase),
            operator: PauliSum::from_string(C64::new(1.0, 0.0), &p),
        });
    }
    TimeDependentHamiltonian::new(n_qubits, channels)
}
