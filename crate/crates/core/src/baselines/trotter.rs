use ndarray::{Array1, Array2, ShapeBuilder};
use ndarray_linalg::{Eigh, UPLO};

use super::check_exact_limit;
use crate::error::{Error, Result};
use crate::hamiltonian::TimeDependentHamiltonian;
use crate::linalg::adjoint;
use crate::pauli::{PauliKey, PauliSum, C64};
use crate::state::{accumulate_word, StateVector};

/// Channels with non-commuting terms are exponentiated densely up to this size.
const DENSE_EXP_LIMIT: usize = 10;

enum ChannelExp {
    /// Mutually commuting terms: `exp(-iθ Σ c P) = Π (cos θc − i sin θc P)`.
    Commuting(Vec<(PauliKey, f64)>),
    Dense { values: Array1<f64>, vectors: Array2<C64> },
}

impl ChannelExp {
    fn new(op: &PauliSum) -> Result<Self> {
        if !op.is_hermitian() {
            return Err(Error::NonHermitian(op.to_string()));
        }
        let terms: Vec<(PauliKey, f64)> = op.iter().map(|(k, c)| (k.clone(), c.re)).collect();
        let commuting = terms
            .iter()
            .enumerate()
            .all(|(a, (ka, _))| terms[a + 1..].iter().all(|(kb, _)| !ka.anticommutes(kb)));
        if commuting {
            return Ok(ChannelExp::Commuting(terms));
        }
        let n = op.n_qubits();
        if n > DENSE_EXP_LIMIT {
            return Err(Error::TooLarge { n_qubits: n, limit: DENSE_EXP_LIMIT });
        }
        let dim = 1usize << n;
        let mut m = Array2::<C64>::zeros((dim, dim).f());
        let mut col = vec![C64::new(0.0, 0.0); dim];
        for b in 0..dim {
            let mut basis = vec![C64::new(0.0, 0.0); dim];
            basis[b] = C64::new(1.0, 0.0);
            col.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
            for (k, c) in op.iter() {
                accumulate_word(k, c, &basis, &mut col);
            }
            for (r, v) in col.iter().enumerate() {
                m[[r, b]] = *v;
            }
        }
        let (values, vectors) = m
            .eigh(UPLO::Upper)
            .map_err(|e| Error::NonFinite(format!("eigendecomposition failed: {e}")))?;
        Ok(ChannelExp::Dense { values, vectors })
    }

    /// `ψ ← exp(-iθ H_k) ψ`.
    fn apply(&self, theta: f64, psi: &mut StateVector, scratch: &mut StateVector) {
        match self {
            ChannelExp::Commuting(terms) => {
                for (key, c) in terms {
                    let a = theta * c;
                    scratch.fill(C64::new(0.0, 0.0));
                    accumulate_word(
                        key,
                        C64::new(0.0, -a.sin()),
                        psi.as_slice().expect("contiguous"),
                        scratch.as_slice_mut().expect("contiguous"),
                    );
                    let cos = a.cos();
                    psi.zip_mut_with(scratch, |p, s| *p = *p * cos + *s);
                }
            }
            ChannelExp::Dense { values, vectors } => {
                let coeffs = adjoint(vectors).dot(&*psi);
                let rotated = Array1::from_shape_fn(coeffs.len(), |k| {
                    coeffs[k] * C64::from_polar(1.0, -theta * values[k])
                });
                *psi = vectors.dot(&rotated);
            }
        }
    }
}

/// First-order product formula over `steps` equal slices of `[0, horizon]`.
/// Step `i` applies `exp(-iδt f_k(t_i) H_k)` channel by channel, in channel
/// order, with `t_i = i·δt` the end of the slice. Returns `steps + 1` states.
pub fn trotter_evolve(
    h: &TimeDependentHamiltonian,
    psi0: &StateVector,
    steps: usize,
    horizon: f64,
) -> Result<Vec<StateVector>> {
    let n = h.n_qubits();
    check_exact_limit(n)?;
    if steps == 0 {
        return Err(Error::InvalidArgument("Trotter step count must be positive".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if psi0.len() != 1 << n {
        return Err(Error::DimensionMismatch { expected: 1 << n, found: psi0.len() });
    }
    let exps = h
        .channels()
        .iter()
        .map(|c| ChannelExp::new(&c.operator))
        .collect::<Result<Vec<_>>>()?;
    let dt = horizon / steps as f64;
    let mut psi = psi0.clone();
    let mut scratch = StateVector::zeros(psi.len());
    let mut out = Vec::with_capacity(steps + 1);
    out.push(psi.clone());
    for i in 1..=steps {
        let drives = h.evaluate_drives(i as f64 * dt)?;
        for (e, f) in exps.iter().zip(drives) {
            e.apply(dt * f, &mut psi, &mut scratch);
        }
        out.push(psi.clone());
    }
    Ok(out)
}
