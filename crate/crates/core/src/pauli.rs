//! Symplectic Pauli-string algebra.
//!
//! A string is stored as two bitsets (`x`, `z`) plus a phase exponent `k`,
//! representing `i^k · W` where `W` is the Hermitian word with
//! `(x,z) = (0,0)→I, (1,0)→X, (0,1)→Z, (1,1)→Y` on every site. Site `q`
//! (1-based in labels) lives in bit `q-1`, which is also the bit of the
//! computational-basis index used by the dense simulators.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use smallvec::SmallVec;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default magnitude below which sum coefficients are dropped.
pub const PRUNE_TOL: f64 = 1e-12;

const I_POW: [C64; 4] = [
    C64::new(1.0, 0.0),
    C64::new(0.0, 1.0),
    C64::new(-1.0, 0.0),
    C64::new(0.0, -1.0),
];

/// `i^k` as a complex number.
#[inline]
pub fn i_pow(k: u8) -> C64 {
    I_POW[(k & 3) as usize]
}

/// Dynamically sized bitset; inline storage up to 128 sites.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Bits(SmallVec<[u64; 2]>);

impl Bits {
    pub fn zeros(n_bits: usize) -> Self {
        Bits(SmallVec::from_elem(0, n_bits.div_ceil(64)))
    }

    #[inline]
    pub fn get(&self, bit: usize) -> bool {
        (self.0[bit / 64] >> (bit % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, bit: usize, value: bool) {
        let mask = 1u64 << (bit % 64);
        if value {
            self.0[bit / 64] |= mask;
        } else {
            self.0[bit / 64] &= !mask;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> u32 {
        self.0.iter().map(|w| w.count_ones()).sum()
    }

    /// Popcount of `self & other`.
    #[inline]
    pub fn and_count(&self, other: &Bits) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    #[inline]
    pub fn xor(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(other.0.iter()).map(|(a, b)| a ^ b).collect())
    }

    pub fn words(&self) -> &[u64] {
        &self.0
    }

    /// Lowest 64 bits; the whole mask when the register fits in one word.
    pub fn low_word(&self) -> u64 {
        self.0.first().copied().unwrap_or(0)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().flat_map(|(w, &word)| {
            let mut rest = word;
            std::iter::from_fn(move || {
                if rest == 0 {
                    return None;
                }
                let tz = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                Some(w * 64 + tz)
            })
        })
    }
}

impl fmt::Debug for Bits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Bits{:?}", self.ones().collect::<Vec<_>>())
    }
}

/// Phase-free identity of a Pauli string.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct PauliKey {
    pub x: Bits,
    pub z: Bits,
}

impl PauliKey {
    pub fn identity(n_qubits: usize) -> Self {
        PauliKey {
            x: Bits::zeros(n_qubits),
            z: Bits::zeros(n_qubits),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.x.is_zero() && self.z.is_zero()
    }

    /// Number of Y sites, i.e. `|x & z|`.
    #[inline]
    pub fn y_count(&self) -> u32 {
        self.x.and_count(&self.z)
    }

    /// True when the two words anticommute (odd symplectic product).
    #[inline]
    pub fn anticommutes(&self, other: &PauliKey) -> bool {
        (self.x.and_count(&other.z) + self.z.and_count(&other.x)) & 1 == 1
    }

    /// Product of the Hermitian words: `W_a W_b = i^k W_{a⊕b}`.
    #[inline]
    pub fn product(&self, other: &PauliKey) -> (PauliKey, u8) {
        let x = self.x.xor(&other.x);
        let z = self.z.xor(&other.z);
        let k = self.y_count() + other.y_count() + 2 * self.z.and_count(&other.x)
            + 3 * x.and_count(&z);
        (PauliKey { x, z }, (k & 3) as u8)
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    key: PauliKey,
    phase_exp: u8,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        PauliString {
            n_qubits,
            key: PauliKey::identity(n_qubits),
            phase_exp: 0,
        }
    }

    pub fn from_key(n_qubits: usize, key: PauliKey, phase_exp: u8) -> Self {
        PauliString {
            n_qubits,
            key,
            phase_exp: phase_exp & 3,
        }
    }

    /// Single-site operator, `site` 1-based, `letter` one of `XYZ`.
    pub fn single(n_qubits: usize, site: usize, letter: char) -> Result<Self> {
        let mut p = PauliString::identity(n_qubits);
        if site == 0 || site > n_qubits {
            return Err(Error::SiteOutOfRange { site, n_qubits });
        }
        p.set_site(site - 1, letter, &letter.to_string())?;
        Ok(p)
    }

    /// Parses either the dense form `XIZ` (length `n_qubits`) or the indexed
    /// form `X1 Z3` with 1-based sites.
    pub fn parse(label: &str, n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidArgument("n_qubits must be positive".into()));
        }
        let trimmed = label.trim();
        if trimmed.is_empty() {
            return Err(Error::MalformedLabel {
                label: label.into(),
                reason: "empty label".into(),
            });
        }
        let is_dense = !trimmed.chars().any(|c| c.is_ascii_digit() || c.is_whitespace());
        let mut p = PauliString::identity(n_qubits);
        if is_dense {
            if let Some(ch) = trimmed.chars().find(|c| !matches!(c, 'I' | 'X' | 'Y' | 'Z')) {
                return Err(Error::UnknownCharacter { ch, label: label.into() });
            }
            let len = trimmed.chars().count();
            if len != n_qubits {
                return Err(Error::MalformedLabel {
                    label: label.into(),
                    reason: format!("dense label has {len} sites, expected {n_qubits}"),
                });
            }
            for (q, ch) in trimmed.chars().enumerate() {
                p.set_site(q, ch, label)?;
            }
            return Ok(p);
        }
        let mut seen = vec![false; n_qubits];
        for token in trimmed.split_whitespace() {
            let mut chars = token.chars();
            let letter = chars.next().expect("split_whitespace yields nonempty tokens");
            if !matches!(letter, 'X' | 'Y' | 'Z') {
                return Err(Error::UnknownCharacter { ch: letter, label: label.into() });
            }
            let digits = chars.as_str();
            if let Some(ch) = digits.chars().find(|c| !c.is_ascii_digit()) {
                return Err(Error::UnknownCharacter { ch, label: label.into() });
            }
            let site: usize = digits.parse().map_err(|_| Error::MalformedLabel {
                label: label.into(),
                reason: format!("token {token:?} lacks a site index"),
            })?;
            if site == 0 || site > n_qubits {
                return Err(Error::SiteOutOfRange { site, n_qubits });
            }
            if std::mem::replace(&mut seen[site - 1], true) {
                return Err(Error::DuplicateSite { site, label: label.into() });
            }
            p.set_site(site - 1, letter, label)?;
        }
        Ok(p)
    }

    fn set_site(&mut self, q: usize, letter: char, label: &str) -> Result<()> {
        let (x, z) = match letter {
            'I' => (false, false),
            'X' => (true, false),
            'Z' => (false, true),
            'Y' => (true, true),
            ch => return Err(Error::UnknownCharacter { ch, label: label.into() }),
        };
        self.key.x.set(q, x);
        self.key.z.set(q, z);
        Ok(())
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn key(&self) -> &PauliKey {
        &self.key
    }

    pub fn into_key(self) -> PauliKey {
        self.key
    }

    pub fn x_mask(&self) -> &Bits {
        &self.key.x
    }

    pub fn z_mask(&self) -> &Bits {
        &self.key.z
    }

    pub fn phase_exp(&self) -> u8 {
        self.phase_exp
    }

    pub fn phase(&self) -> C64 {
        i_pow(self.phase_exp)
    }

    pub fn is_identity(&self) -> bool {
        self.key.is_identity()
    }

    /// Letter at 0-based site `q`.
    pub fn letter(&self, q: usize) -> char {
        match (self.key.x.get(q), self.key.z.get(q)) {
            (false, false) => 'I',
            (true, false) => 'X',
            (false, true) => 'Z',
            (true, true) => 'Y',
        }
    }

    /// Same word with phase reset to zero.
    pub fn canonical(&self) -> PauliString {
        PauliString {
            n_qubits: self.n_qubits,
            key: self.key.clone(),
            phase_exp: 0,
        }
    }

    pub fn dagger(&self) -> PauliString {
        PauliString {
            n_qubits: self.n_qubits,
            key: self.key.clone(),
            phase_exp: (4 - self.phase_exp) & 3,
        }
    }

    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        check_dims(self.n_qubits, other.n_qubits)?;
        let (key, k) = self.key.product(&other.key);
        Ok(PauliString {
            n_qubits: self.n_qubits,
            key,
            phase_exp: (self.phase_exp + other.phase_exp + k) & 3,
        })
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        !self.key.anticommutes(&other.key)
    }

    /// `[a, b]`: empty when the words commute, otherwise `2ab`.
    pub fn commutator(&self, other: &PauliString) -> Result<PauliSum> {
        check_dims(self.n_qubits, other.n_qubits)?;
        let mut out = PauliSum::new(self.n_qubits);
        if self.key.anticommutes(&other.key) {
            out.add_string(C64::new(2.0, 0.0), &self.multiply(other)?);
        }
        Ok(out)
    }

    /// Indexed label such as `X1 Z3`; `I` for the identity. Phase omitted.
    pub fn indexed_label(&self) -> String {
        if self.is_identity() {
            return "I".into();
        }
        let mut sites: Vec<usize> = self.key.x.ones().chain(self.key.z.ones()).collect();
        sites.sort_unstable();
        sites.dedup();
        sites
            .iter()
            .map(|&q| format!("{}{}", self.letter(q), q + 1))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Dense label of length `n_qubits`. Phase omitted.
    pub fn dense_label(&self) -> String {
        (0..self.n_qubits).map(|q| self.letter(q)).collect()
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = ["", "i·", "-", "-i·"][self.phase_exp as usize];
        write!(f, "{prefix}{}", self.indexed_label())
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

fn check_dims(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch { expected: a, found: b });
    }
    Ok(())
}

/// Weighted sum of Hermitian Pauli words; phases are folded into coefficients.
#[derive(Clone, PartialEq, Debug)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<PauliKey, C64>,
}

impl PauliSum {
    pub fn new(n_qubits: usize) -> Self {
        PauliSum {
            n_qubits,
            terms: BTreeMap::new(),
        }
    }

    pub fn from_string(coeff: C64, p: &PauliString) -> Self {
        let mut s = PauliSum::new(p.n_qubits());
        s.add_string(coeff, p);
        s
    }

    /// Builds a sum from `(coefficient, label)` pairs.
    pub fn from_labels<'a, I>(n_qubits: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (C64, &'a str)>,
    {
        let mut s = PauliSum::new(n_qubits);
        for (c, label) in terms {
            s.add_string(c, &PauliString::parse(label, n_qubits)?);
        }
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds `coeff · p` in place, folding the phase of `p` into the coefficient.
    pub fn add_string(&mut self, coeff: C64, p: &PauliString) {
        debug_assert_eq!(p.n_qubits(), self.n_qubits);
        self.add_key(coeff * p.phase(), p.key());
    }

    fn add_key(&mut self, coeff: C64, key: &PauliKey) {
        match self.terms.get_mut(key) {
            Some(c) => {
                *c += coeff;
                if c.norm() < PRUNE_TOL {
                    self.terms.remove(key);
                }
            }
            None => {
                if coeff.norm() >= PRUNE_TOL {
                    self.terms.insert(key.clone(), coeff);
                }
            }
        }
    }

    pub fn coefficient(&self, key: &PauliKey) -> C64 {
        self.terms.get(key).copied().unwrap_or_default()
    }

    /// Terms in canonical key order.
    pub fn iter(&self) -> impl Iterator<Item = (&PauliKey, C64)> {
        self.terms.iter().map(|(k, &c)| (k, c))
    }

    /// Terms as phase-free strings with their coefficients.
    pub fn strings(&self) -> impl Iterator<Item = (PauliString, C64)> + '_ {
        self.terms
            .iter()
            .map(|(k, &c)| (PauliString::from_key(self.n_qubits, k.clone(), 0), c))
    }

    pub fn add(&self, other: &PauliSum) -> Result<PauliSum> {
        check_dims(self.n_qubits, other.n_qubits)?;
        let mut out = self.clone();
        for (k, c) in other.iter() {
            out.add_key(c, k);
        }
        Ok(out)
    }

    pub fn scale(&self, factor: C64) -> PauliSum {
        let mut out = PauliSum::new(self.n_qubits);
        for (k, c) in self.iter() {
            out.add_key(c * factor, k);
        }
        out
    }

    pub fn prune(&self, tol: f64) -> Result<PauliSum> {
        if !(tol >= 0.0 && tol.is_finite()) {
            return Err(Error::InvalidTolerance(tol));
        }
        let mut out = self.clone();
        out.terms.retain(|_, c| c.norm() >= tol);
        Ok(out)
    }

    pub fn multiply(&self, other: &PauliSum) -> Result<PauliSum> {
        check_dims(self.n_qubits, other.n_qubits)?;
        let mut out = PauliSum::new(self.n_qubits);
        for (ka, ca) in self.iter() {
            for (kb, cb) in other.iter() {
                let (k, ph) = ka.product(kb);
                out.add_key(ca * cb * i_pow(ph), &k);
            }
        }
        Ok(out)
    }

    /// `[A, B]` expanded bilinearly over string commutators.
    pub fn commutator(&self, other: &PauliSum) -> Result<PauliSum> {
        check_dims(self.n_qubits, other.n_qubits)?;
        let mut out = PauliSum::new(self.n_qubits);
        for (ka, ca) in self.iter() {
            for (kb, cb) in other.iter() {
                if ka.anticommutes(kb) {
                    let (k, ph) = ka.product(kb);
                    out.add_key(C64::new(2.0, 0.0) * ca * cb * i_pow(ph), &k);
                }
            }
        }
        Ok(out)
    }

    pub fn dagger(&self) -> PauliSum {
        PauliSum {
            n_qubits: self.n_qubits,
            terms: self.terms.iter().map(|(k, c)| (k.clone(), c.conj())).collect(),
        }
    }

    /// Hermitian iff every folded coefficient is real.
    pub fn is_hermitian(&self) -> bool {
        self.terms
            .values()
            .all(|c| c.im.abs() <= PRUNE_TOL * c.norm().max(1.0))
    }
}

impl fmt::Display for PauliSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .strings()
            .map(|(p, c)| format!("({}{:+}i)·{}", c.re, c.im, p.indexed_label()))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}
