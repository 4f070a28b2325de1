//! Reference propagators: dense exact evolution, Trotterization and a small
//! McLachlan variational simulator, plus a period-lag estimator.

mod trotter;
mod vqs;

pub use trotter::trotter_evolve;
pub use vqs::{vqs_run, NoiseModel, VqsSpec, VqsTrajectory};

use crate::error::{Error, Result};
use crate::hamiltonian::TimeDependentHamiltonian;
use crate::pauli::C64;
use crate::state::{accumulate_word, StateVector};

/// Default register limit for the dense baselines.
pub const EXACT_QUBIT_LIMIT: usize = 14;

pub(crate) fn check_exact_limit(n_qubits: usize) -> Result<()> {
    if n_qubits > EXACT_QUBIT_LIMIT {
        return Err(Error::TooLarge { n_qubits, limit: EXACT_QUBIT_LIMIT });
    }
    Ok(())
}

/// `out = -i H(t) ψ` with precomputed drives.
pub(crate) fn schrodinger_rhs(h: &TimeDependentHamiltonian, drives: &[f64], psi: &[C64], out: &mut [C64]) {
    out.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
    for (channel, &f) in h.channels().iter().zip(drives) {
        if f == 0.0 {
            continue;
        }
        for (key, c) in channel.operator.iter() {
            accumulate_word(key, C64::new(0.0, -f) * c, psi, out);
        }
    }
}

/// One classical RK4 step of `ψ̇ = -i H(t) ψ`.
pub(crate) fn rk4_step(h: &TimeDependentHamiltonian, t: f64, dt: f64, psi: &mut StateVector, work: &mut [StateVector; 5]) {
    let [k1, k2, k3, k4, tmp] = work;
    let p = psi.as_slice().expect("contiguous");
    schrodinger_rhs(h, &h.drives_at(t), p, k1.as_slice_mut().unwrap());
    tmp.zip_mut_with(k1, |y, k| *y = *k * (dt / 2.0));
    *tmp += &*psi;
    schrodinger_rhs(h, &h.drives_at(t + dt / 2.0), tmp.as_slice().unwrap(), k2.as_slice_mut().unwrap());
    tmp.zip_mut_with(k2, |y, k| *y = *k * (dt / 2.0));
    *tmp += &*psi;
    schrodinger_rhs(h, &h.drives_at(t + dt / 2.0), tmp.as_slice().unwrap(), k3.as_slice_mut().unwrap());
    tmp.zip_mut_with(k3, |y, k| *y = *k * dt);
    *tmp += &*psi;
    schrodinger_rhs(h, &h.drives_at(t + dt), tmp.as_slice().unwrap(), k4.as_slice_mut().unwrap());
    let w = dt / 6.0;
    for i in 0..psi.len() {
        psi[i] += (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * w;
    }
}

/// Dense RK4 propagation of `psi0`; returns the state at every entry of
/// `times` (nondecreasing, starting at or after the initial time `times[0]`).
/// Each interval is split into steps no longer than `dt_max`.
pub fn exact_evolve(
    h: &TimeDependentHamiltonian,
    psi0: &StateVector,
    times: &[f64],
    dt_max: f64,
) -> Result<Vec<StateVector>> {
    let n = h.n_qubits();
    check_exact_limit(n)?;
    if psi0.len() != 1 << n {
        return Err(Error::DimensionMismatch { expected: 1 << n, found: psi0.len() });
    }
    if !(dt_max > 0.0 && dt_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt_max must be positive, got {dt_max}")));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite("grid time".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("time grid must be nondecreasing".into()));
    }
    let Some(&t_start) = times.first() else {
        return Ok(Vec::new());
    };
    let dim = psi0.len();
    let mut work: [StateVector; 5] = std::array::from_fn(|_| StateVector::zeros(dim));
    let mut psi = psi0.clone();
    let mut t = t_start;
    let mut out = Vec::with_capacity(times.len());
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt_max).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            for s in 0..steps {
                rk4_step(h, t + s as f64 * dt, dt, &mut psi, &mut work);
            }
            t = target;
        }
        out.push(psi.clone());
    }
    Ok(out)
}

/// Times at which `trace` changes sign, located by linear interpolation.
fn zero_crossings(trace: &[f64], times: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    for k in 0..trace.len().saturating_sub(1) {
        let (a, b) = (trace[k], trace[k + 1]);
        if a == 0.0 {
            if k == 0 || trace[k - 1] != 0.0 {
                out.push(times[k]);
            }
        } else if a * b < 0.0 {
            out.push(times[k] + (times[k + 1] - times[k]) * a / (a - b));
        }
    }
    out
}

fn mean_spacing(trace: &[f64], times: &[f64]) -> Result<f64> {
    let c = zero_crossings(trace, times);
    if c.len() < 2 {
        return Err(Error::InsufficientCrossings { found: c.len(), required: 2 });
    }
    Ok((c[c.len() - 1] - c[0]) / (c.len() - 1) as f64)
}

/// Ratio of the mean zero-crossing spacing of `a` to that of `b`; values
/// above one mean `a` oscillates more slowly.
pub fn lag_metric(a: &[f64], b: &[f64], times: &[f64]) -> Result<f64> {
    if a.len() != times.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: a.len() });
    }
    if b.len() != times.len() {
        return Err(Error::DimensionMismatch { expected: times.len(), found: b.len() });
    }
    Ok(mean_spacing(a, times)? / mean_spacing(b, times)?)
}
