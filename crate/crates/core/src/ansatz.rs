//! Operator pool and K-moment basis construction.
//!
//! The pool (`ExtendedOperatorSet`) is the string-level commutator closure of
//! every Pauli word appearing in the Hamiltonian, with the identity prepended.
//! The cumulative K-moment basis is the set of all products of at most `K`
//! pool members, deduplicated on the phase-free key.

use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hamiltonian::TimeDependentHamiltonian;
use crate::pauli::{PauliKey, PauliString};

pub const DEFAULT_CLOSURE_CAP: usize = 4096;
pub const DEFAULT_BASIS_CAP: usize = 8192;

#[derive(Clone, Debug)]
pub struct ExtendedOperatorSet {
    n_qubits: usize,
    operators: Vec<PauliString>,
    depths: Vec<usize>,
    capped: bool,
}

impl ExtendedOperatorSet {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    /// Identity first, then strings in order of first appearance.
    pub fn operators(&self) -> &[PauliString] {
        &self.operators
    }

    /// Commutator depth at which each operator first appeared (identity 0,
    /// Hamiltonian strings 0, first-round commutators 1, ...).
    pub fn depths(&self) -> &[usize] {
        &self.depths
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// True when closure stopped at the cap rather than at a fixed point.
    pub fn capped(&self) -> bool {
        self.capped
    }

    pub fn keys(&self) -> impl Iterator<Item = &PauliKey> {
        self.operators.iter().map(|p| p.key())
    }
}

/// Closes the Hamiltonian's Pauli words under pairwise commutators.
///
/// `cap` bounds the number of non-identity strings. Hitting it is not an
/// error; the partial set comes back with `capped() == true`.
pub fn extended_operator_set(h: &TimeDependentHamiltonian, cap: usize) -> Result<ExtendedOperatorSet> {
    if !h.is_hermitian() {
        return Err(Error::NonHermitian("Hamiltonian channel operator".into()));
    }
    let n = h.n_qubits();
    let mut seen: HashSet<PauliKey> = HashSet::new();
    let identity = PauliKey::identity(n);
    seen.insert(identity.clone());

    let mut generators: Vec<PauliKey> = Vec::new();
    for ch in h.channels() {
        for (key, _) in ch.operator.iter() {
            if seen.insert(key.clone()) {
                generators.push(key.clone());
            }
        }
    }
    generators.sort();
    if generators.len() > cap {
        return Err(Error::InvalidArgument(format!(
            "closure cap {cap} is below the {} distinct Hamiltonian strings",
            generators.len()
        )));
    }
    close_keys(n, generators, seen, cap)
}

/// Closure of an explicit list of generator strings.
pub fn closure_of(n_qubits: usize, generators: &[PauliString], cap: usize) -> Result<ExtendedOperatorSet> {
    let mut seen = HashSet::new();
    seen.insert(PauliKey::identity(n_qubits));
    let mut keys = Vec::new();
    for g in generators {
        if g.n_qubits() != n_qubits {
            return Err(Error::DimensionMismatch { expected: n_qubits, found: g.n_qubits() });
        }
        if seen.insert(g.key().clone()) {
            keys.push(g.key().clone());
        }
    }
    keys.sort();
    close_keys(n_qubits, keys, seen, cap)
}

fn close_keys(
    n: usize,
    generators: Vec<PauliKey>,
    mut seen: HashSet<PauliKey>,
    cap: usize,
) -> Result<ExtendedOperatorSet> {
    let mut keys = generators;
    let mut depths = vec![0usize; keys.len()];
    let mut capped = false;
    // Pairs (i, j) with j >= frontier_start are new this round.
    let mut frontier_start = 0;
    let mut round = 0;
    while frontier_start < keys.len() && !capped {
        round += 1;
        let mut fresh: Vec<PauliKey> = Vec::new();
        for j in frontier_start..keys.len() {
            for i in 0..j {
                if keys[i].anticommutes(&keys[j]) {
                    let (k, _) = keys[i].product(&keys[j]);
                    if seen.insert(k.clone()) {
                        fresh.push(k);
                    }
                }
            }
        }
        fresh.sort();
        let room = cap - keys.len();
        if fresh.len() > room {
            fresh.truncate(room);
            capped = true;
        }
        frontier_start = keys.len();
        depths.extend(std::iter::repeat_n(round, fresh.len()));
        keys.extend(fresh);
    }
    let mut operators = Vec::with_capacity(keys.len() + 1);
    operators.push(PauliString::identity(n));
    operators.extend(keys.into_iter().map(|k| PauliString::from_key(n, k, 0)));
    depths.insert(0, 0);
    Ok(ExtendedOperatorSet { n_qubits: n, operators, depths, capped })
}

#[derive(Clone, Debug)]
pub struct MomentBasis {
    k: usize,
    operators: Vec<PauliString>,
    level_sizes: Vec<usize>,
    capped: bool,
}

impl MomentBasis {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn operators(&self) -> &[PauliString] {
        &self.operators
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn n_qubits(&self) -> usize {
        self.operators[0].n_qubits()
    }

    /// Cumulative sizes for moment orders `0..=k`.
    pub fn level_sizes(&self) -> &[usize] {
        &self.level_sizes
    }

    pub fn capped(&self) -> bool {
        self.capped
    }

    /// A basis built directly from explicit operators (identity must be first).
    pub fn from_operators(operators: Vec<PauliString>) -> Result<Self> {
        match operators.first() {
            Some(p) if p.is_identity() && p.phase_exp() == 0 => {}
            _ => return Err(Error::MissingIdentity),
        }
        let len = operators.len();
        Ok(MomentBasis { k: 0, operators, level_sizes: vec![len], capped: false })
    }
}

/// Cumulative K-moment basis: level `j+1` multiplies every level-`j` product
/// by every pool member, keeping unseen keys in insertion order.
pub fn cumulative_k_moment_basis(s: &ExtendedOperatorSet, k: usize, cap: usize) -> Result<MomentBasis> {
    if cap == 0 {
        return Err(Error::InvalidArgument("basis cap must be positive".into()));
    }
    let n = s.n_qubits();
    let pool: Vec<&PauliKey> = s.keys().collect();
    let mut keys = vec![PauliKey::identity(n)];
    let mut seen: HashSet<PauliKey> = keys.iter().cloned().collect();
    let mut level_sizes = vec![1];
    let mut capped = false;
    let mut last_level = 0..1;
    for _ in 0..k {
        let mut fresh = Vec::new();
        'outer: for idx in last_level.clone() {
            for q in &pool {
                let (prod, _) = keys[idx].product(q);
                if !seen.contains(&prod) {
                    if keys.len() + fresh.len() >= cap {
                        capped = true;
                        break 'outer;
                    }
                    seen.insert(prod.clone());
                    fresh.push(prod);
                }
            }
        }
        let start = keys.len();
        keys.extend(fresh);
        last_level = start..keys.len();
        level_sizes.push(keys.len());
        if capped {
            break;
        }
    }
    let operators = keys.into_iter().map(|key| PauliString::from_key(n, key, 0)).collect();
    Ok(MomentBasis { k, operators, level_sizes, capped })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct GrowthReport {
    /// Cumulative basis size for each `K` in `0..=k_max`.
    pub sizes: Vec<usize>,
    /// First `K` after which the size stops growing, if reached within `k_max`.
    pub saturation_k: Option<usize>,
}

pub fn group_growth_report(s: &ExtendedOperatorSet, k_max: usize, cap: usize) -> Result<GrowthReport> {
    let basis = cumulative_k_moment_basis(s, k_max + 1, cap)?;
    let all = basis.level_sizes();
    let saturation_k = (0..all.len() - 1).find(|&k| all[k + 1] == all[k]);
    let sizes = all.iter().take(k_max + 1).copied().collect();
    Ok(GrowthReport { sizes, saturation_k })
}
