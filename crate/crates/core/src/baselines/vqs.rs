use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::check_exact_limit;
use crate::error::{Error, Result};
use crate::hamiltonian::TimeDependentHamiltonian;
use crate::linalg::HermitianPinv;
use crate::pauli::{PauliKey, PauliString, PauliSum, C64};
use crate::state::{accumulate_word, apply_sum_into, inner, StateVector};

/// Depolarizing shrinkage of measured `M` and `V` entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_depth_m")]
    pub depth_m: f64,
    #[serde(default = "default_depth_v")]
    pub depth_v: f64,
}

fn default_depth_m() -> f64 {
    2.0
}

fn default_depth_v() -> f64 {
    3.0
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { lambda: 0.0, depth_m: default_depth_m(), depth_v: default_depth_v() }
    }
}

impl NoiseModel {
    pub fn with_lambda(lambda: f64) -> Self {
        NoiseModel { lambda, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidArgument(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if !(self.depth_m >= 0.0 && self.depth_v >= 0.0 && self.depth_m.is_finite() && self.depth_v.is_finite()) {
            return Err(Error::InvalidArgument("circuit depths must be nonnegative".into()));
        }
        Ok(())
    }

    fn factors(&self) -> (f64, f64) {
        let keep = 1.0 - self.lambda;
        (keep.powf(self.depth_m), keep.powf(self.depth_v))
    }
}

/// `|ψ(θ)⟩ = Π_k exp(-iθ_k G_k)|φ_0⟩`, the last generator acting first.
#[derive(Clone, Debug, PartialEq)]
pub struct VqsSpec {
    pub generators: Vec<PauliString>,
    pub phi0: StateVector,
    pub theta0: Vec<f64>,
}

impl VqsSpec {
    pub fn new(generators: Vec<PauliString>, phi0: StateVector) -> Self {
        let theta0 = vec![0.0; generators.len()];
        VqsSpec { generators, phi0, theta0 }
    }
}

#[derive(Clone, Debug)]
pub struct VqsTrajectory {
    pub times: Vec<f64>,
    pub thetas: Vec<Vec<f64>>,
    /// One trace per requested observable.
    pub observables: Vec<Vec<f64>>,
}

struct Ansatz<'a> {
    /// Phase-free words and the sign folded out of each generator.
    words: Vec<(PauliKey, f64)>,
    phi0: &'a StateVector,
}

impl<'a> Ansatz<'a> {
    fn new(spec: &'a VqsSpec) -> Result<Self> {
        let words = spec
            .generators
            .iter()
            .map(|g| match g.phase_exp() {
                0 => Ok((g.key().clone(), 1.0)),
                2 => Ok((g.key().clone(), -1.0)),
                _ => Err(Error::NonHermitian(format!("generator {g} is not a Hermitian Pauli string"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Ansatz { words, phi0: &spec.phi0 })
    }

    fn word(&self, k: usize, coeff: C64, psi: &StateVector) -> StateVector {
        let (key, sign) = &self.words[k];
        let mut out = StateVector::zeros(psi.len());
        accumulate_word(key, coeff * *sign, psi.as_slice().unwrap(), out.as_slice_mut().unwrap());
        out
    }

    fn rotate(&self, k: usize, theta: f64, psi: &StateVector) -> StateVector {
        let mut out = self.word(k, C64::new(0.0, -theta.sin()), psi);
        out.scaled_add(C64::new(theta.cos(), 0.0), psi);
        out
    }

    /// `ψ(θ)` and `∂_k ψ(θ)` for every `k`.
    fn state_and_tangents(&self, theta: &[f64]) -> (StateVector, Vec<StateVector>) {
        let n = theta.len();
        // suffix[k] = U_k … U_{n-1} φ0, suffix[n] = φ0
        let mut suffix = vec![self.phi0.clone(); n + 1];
        for k in (0..n).rev() {
            suffix[k] = self.rotate(k, theta[k], &suffix[k + 1]);
        }
        let tangents = (0..n)
            .map(|k| {
                let mut v = self.word(k, C64::new(0.0, -1.0), &suffix[k]);
                for j in (0..k).rev() {
                    v = self.rotate(j, theta[j], &v);
                }
                v
            })
            .collect();
        (suffix.swap_remove(0), tangents)
    }

    fn velocity(
        &self,
        h: &TimeDependentHamiltonian,
        t: f64,
        theta: &[f64],
        noise: &NoiseModel,
        svd_tol: f64,
    ) -> Result<Vec<f64>> {
        let n = theta.len();
        let (psi, d) = self.state_and_tangents(theta);
        let mut hpsi = StateVector::zeros(psi.len());
        for (channel, f) in h.channels().iter().zip(h.evaluate_drives(t)?) {
            apply_sum_into(&channel.operator, psi.as_slice().unwrap(), f, hpsi.as_slice_mut().unwrap());
        }
        let (shrink_m, shrink_v) = noise.factors();
        let m = Array2::from_shape_fn((n, n), |(k, l)| C64::new(shrink_m * inner(&d[k], &d[l]).re, 0.0));
        let v: Array1<C64> = (0..n).map(|k| C64::new(shrink_v * inner(&d[k], &hpsi).im, 0.0)).collect();
        let rate = HermitianPinv::new(&m, svd_tol)?.apply(&v);
        Ok(rate.iter().map(|z| z.re).collect())
    }

    fn expectation(&self, op: &PauliSum, theta: &[f64]) -> f64 {
        let mut psi = self.phi0.clone();
        for k in (0..theta.len()).rev() {
            psi = self.rotate(k, theta[k], &psi);
        }
        let mut out = StateVector::zeros(psi.len());
        apply_sum_into(op, psi.as_slice().unwrap(), 1.0, out.as_slice_mut().unwrap());
        inner(&psi, &out).re
    }
}

/// McLachlan evolution `M θ̇ = V` with `M_kl = Re⟨∂_kψ|∂_lψ⟩` and
/// `V_k = Im⟨∂_kψ|H(t)|ψ⟩`, integrated with RK4. Observables are recorded at
/// each entry of `times`; intervals are split into steps no longer than `dt_max`.
pub fn vqs_run(
    spec: &VqsSpec,
    h: &TimeDependentHamiltonian,
    times: &[f64],
    dt_max: f64,
    noise: &NoiseModel,
    svd_tol: f64,
    observables: &[PauliSum],
) -> Result<VqsTrajectory> {
    let n = h.n_qubits();
    check_exact_limit(n)?;
    noise.validate()?;
    if spec.phi0.len() != 1 << n {
        return Err(Error::DimensionMismatch { expected: 1 << n, found: spec.phi0.len() });
    }
    if spec.theta0.len() != spec.generators.len() {
        return Err(Error::DimensionMismatch { expected: spec.generators.len(), found: spec.theta0.len() });
    }
    if let Some(g) = spec.generators.iter().find(|g| g.n_qubits() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: g.n_qubits() });
    }
    if let Some(o) = observables.iter().find(|o| o.n_qubits() != n) {
        return Err(Error::DimensionMismatch { expected: n, found: o.n_qubits() });
    }
    if !(dt_max > 0.0 && dt_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("dt_max must be positive, got {dt_max}")));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::InvalidArgument("time grid must be nondecreasing".into()));
    }
    let ansatz = Ansatz::new(spec)?;
    let mut theta = spec.theta0.clone();
    let mut traj = VqsTrajectory {
        times: times.to_vec(),
        thetas: Vec::with_capacity(times.len()),
        observables: vec![Vec::with_capacity(times.len()); observables.len()],
    };
    let Some(&first) = times.first() else {
        return Ok(traj);
    };
    let mut t = first;
    let axpy = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x + s * y).collect() };
    for &target in times {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt_max).ceil().max(1.0) as usize;
            let dt = span / steps as f64;
            for s in 0..steps {
                let ts = t + s as f64 * dt;
                let k1 = ansatz.velocity(h, ts, &theta, noise, svd_tol)?;
                let k2 = ansatz.velocity(h, ts + dt / 2.0, &axpy(&theta, dt / 2.0, &k1), noise, svd_tol)?;
                let k3 = ansatz.velocity(h, ts + dt / 2.0, &axpy(&theta, dt / 2.0, &k2), noise, svd_tol)?;
                let k4 = ansatz.velocity(h, ts + dt, &axpy(&theta, dt, &k3), noise, svd_tol)?;
                for i in 0..theta.len() {
                    theta[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
                if theta.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite(format!("VQS parameters at t={}", ts + dt)));
                }
            }
            t = target;
        }
        for (trace, op) in traj.observables.iter_mut().zip(observables) {
            trace.push(ansatz.expectation(op, &theta));
        }
        traj.thetas.push(theta.clone());
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::exact_evolve;
    use crate::hamiltonian::DriveFunction;
    use crate::state::{expectation_sum_dense, InitialState};

    fn sum(n: usize, terms: &[(f64, &str)]) -> PauliSum {
        PauliSum::from_labels(n, terms.iter().map(|(c, l)| (C64::new(*c, 0.0), *l))).unwrap()
    }

    #[test]
    fn zero_parameters_reproduce_initial_state() {
        let phi0 = InitialState::random_dense(2, 4).unwrap().to_dense().unwrap();
        let spec = VqsSpec::new(
            ["X1 X2", "Y2", "X1 Z2"].iter().map(|l| PauliString::parse(l, 2).unwrap()).collect(),
            phi0.clone(),
        );
        let ansatz = Ansatz::new(&spec).unwrap();
        let (psi, tangents) = ansatz.state_and_tangents(&[0.0; 3]);
        assert_eq!(psi, phi0);
        assert_eq!(tangents.len(), 3);
    }

    #[test]
    fn tangents_match_finite_differences() {
        let phi0 = InitialState::random_dense(2, 4).unwrap().to_dense().unwrap();
        let spec = VqsSpec::new(
            ["X1 X2", "Y2", "X1 Z2"].iter().map(|l| PauliString::parse(l, 2).unwrap()).collect(),
            phi0,
        );
        let ansatz = Ansatz::new(&spec).unwrap();
        let theta = [0.3, -0.7, 1.1];
        let (_, tangents) = ansatz.state_and_tangents(&theta);
        let eps = 1e-6;
        for k in 0..3 {
            let mut plus = theta;
            plus[k] += eps;
            let mut minus = theta;
            minus[k] -= eps;
            let fd = (&ansatz.state_and_tangents(&plus).0 - &ansatz.state_and_tangents(&minus).0) / C64::new(2.0 * eps, 0.0);
            let err = (&fd - &tangents[k]).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(err < 1e-8, "k={k}: {err}");
        }
    }

    #[test]
    fn expressive_single_qubit_ansatz_tracks_exact() {
        let h = TimeDependentHamiltonian::from_pairs(
            1,
            vec![
                (DriveFunction::constant(1.0), sum(1, &[(1.0, "Z")])),
                (DriveFunction::sin(1.0, 2.0 * std::f64::consts::PI, 0.0), sum(1, &[(1.0, "X")])),
            ],
        )
        .unwrap();
        let phi0 = InitialState::random_dense(1, 9).unwrap().to_dense().unwrap();
        let spec = VqsSpec::new(["X", "Y", "Z"].iter().map(|l| PauliString::parse(l, 1).unwrap()).collect(), phi0.clone());
        let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.1).collect();
        let obs = sum(1, &[(1.0, "Z")]);
        let traj = vqs_run(&spec, &h, &times, 1e-3, &NoiseModel::default(), 1e-8, std::slice::from_ref(&obs)).unwrap();
        let exact = exact_evolve(&h, &phi0, &times, 1e-3).unwrap();
        for (v, psi) in traj.observables[0].iter().zip(&exact) {
            let e = expectation_sum_dense(&obs, psi).unwrap().re;
            assert!((v - e).abs() < 1e-5, "{v} vs {e}");
        }
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::with_lambda(1.5).validate().is_err());
        assert!(NoiseModel { lambda: 0.1, depth_m: -1.0, depth_v: 3.0 }.validate().is_err());
        assert_eq!(NoiseModel::with_lambda(0.0).factors(), (1.0, 1.0));
    }
}
