//! Pauli strings and sparse linear combinations of them.
//!
//! A string on `Q <= 64` qubits is stored as an X mask and a Z mask. The
//! represented operator is `i^{|x & z|} X^x Z^z`, so a qubit with both bits
//! set carries the letter `Y = iXZ`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default magnitude below which coefficients are dropped.
pub const DEFAULT_PRUNE: f64 = 1e-12;

/// Default qubit limit for dense matrix expansion.
pub const DENSE_LIMIT: usize = 14;

pub const MAX_QUBITS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum PauliError {
    #[error("operand lengths differ: {0} vs {1} qubits")]
    LengthMismatch(usize, usize),
    #[error("{qubits} qubits exceeds the dense limit of {limit}")]
    TooManyQubits { qubits: usize, limit: usize },
    #[error("cannot parse Pauli string {0:?}")]
    Parse(String),
    #[error("operator is not Hermitian (defect {0:e})")]
    NonHermitian(f64),
}

/// Powers of `i`.
pub fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

fn parity(v: u64) -> bool {
    v.count_ones() & 1 == 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct PauliString {
    pub x: u64,
    pub z: u64,
}

impl PauliString {
    pub const IDENTITY: PauliString = PauliString { x: 0, z: 0 };

    pub fn new(x: u64, z: u64) -> Self {
        Self { x, z }
    }

    /// Parse letters written highest qubit first (`"XZ"` is X on qubit 1).
    pub fn from_letters(s: &str) -> Result<Self, PauliError> {
        let letters: Vec<char> = s.chars().filter(|c| !c.is_whitespace()).collect();
        if letters.len() > MAX_QUBITS {
            return Err(PauliError::Parse(s.to_string()));
        }
        let mut p = Self::IDENTITY;
        for (w, ch) in letters.iter().rev().enumerate() {
            let (x, z) = match ch.to_ascii_uppercase() {
                'I' => (0, 0),
                'X' => (1, 0),
                'Y' => (1, 1),
                'Z' => (0, 1),
                _ => return Err(PauliError::Parse(s.to_string())),
            };
            p.x |= x << w;
            p.z |= z << w;
        }
        Ok(p)
    }

    pub fn letter(&self, qubit: usize) -> char {
        match (self.x >> qubit & 1, self.z >> qubit & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (1, 1) => 'Y',
            _ => 'Z',
        }
    }

    /// Letters for qubits `n-1 .. 0`.
    pub fn to_letters(&self, n: usize) -> String {
        (0..n).rev().map(|w| self.letter(w)).collect()
    }

    pub fn support(&self) -> u64 {
        self.x | self.z
    }

    pub fn weight(&self) -> u32 {
        self.support().count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Number of Y letters, the exponent of the string's `i` prefactor.
    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// `self * other = i^k * result`.
    pub fn mul(&self, other: &Self) -> (u32, Self) {
        let out = Self::new(self.x ^ other.x, self.z ^ other.z);
        let k = self.y_count() + other.y_count() + 2 * (self.z & other.x).count_ones() + 4
            - out.y_count() % 4;
        (k % 4, out)
    }

    /// Whether the two strings agree letterwise wherever both act.
    pub fn qubitwise_commutes(&self, other: &Self) -> bool {
        let both = self.support() & other.support();
        (self.x ^ other.x) & both == 0 && (self.z ^ other.z) & both == 0
    }

    pub fn commutes(&self, other: &Self) -> bool {
        !parity((self.x & other.z) ^ (self.z & other.x))
    }

    /// `P|c> = phase * |row>`.
    pub fn apply_basis(&self, c: u64) -> (u64, Complex64) {
        let sign = if parity(self.z & c) { 2 } else { 0 };
        (c ^ self.x, i_pow(self.y_count() + sign))
    }

    /// Diagonal value of the Z-type part on basis state `c`.
    pub fn z_sign(&self, c: u64) -> f64 {
        if parity(self.z & c) {
            -1.0
        } else {
            1.0
        }
    }
}

/// Sparse complex combination of equal-length Pauli strings.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliOperator {
    n_qubits: usize,
    terms: BTreeMap<PauliString, Complex64>,
    prune: f64,
}

impl PauliOperator {
    pub fn zero(n_qubits: usize) -> Self {
        assert!(n_qubits <= MAX_QUBITS, "at most {MAX_QUBITS} qubits");
        Self {
            n_qubits,
            terms: BTreeMap::new(),
            prune: DEFAULT_PRUNE,
        }
    }

    pub fn identity(n_qubits: usize, c: f64) -> Self {
        let mut op = Self::zero(n_qubits);
        op.add_term(PauliString::IDENTITY, Complex64::new(c, 0.0));
        op
    }

    pub fn with_prune(mut self, prune: f64) -> Self {
        self.prune = prune;
        self.prune_small();
        self
    }

    pub fn prune_threshold(&self) -> f64 {
        self.prune
    }

    /// Build from `(letters, coefficient)` pairs.
    pub fn from_letters<'a>(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (&'a str, Complex64)>,
    ) -> Result<Self, PauliError> {
        let mut op = Self::zero(n_qubits);
        for (s, c) in terms {
            let letters = s.chars().filter(|c| !c.is_whitespace()).count();
            if letters != n_qubits {
                return Err(PauliError::LengthMismatch(n_qubits, letters));
            }
            op.add_term(PauliString::from_letters(s)?, c);
        }
        Ok(op)
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

    /// Terms in `(x, z)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, p: &PauliString) -> Complex64 {
        self.terms.get(p).copied().unwrap_or_default()
    }

    pub fn coeff_of(&self, letters: &str) -> Complex64 {
        PauliString::from_letters(letters)
            .map(|p| self.coeff(&p))
            .unwrap_or_default()
    }

    /// Add `c * p`, merging with an existing entry.
    pub fn add_term(&mut self, p: PauliString, c: Complex64) {
        let slot = self.terms.entry(p).or_default();
        *slot += c;
        if slot.norm() < self.prune {
            self.terms.remove(&p);
        }
    }

    /// Add a term without pruning; call [`prune_small`](Self::prune_small) after.
    pub(crate) fn accumulate(&mut self, p: PauliString, c: Complex64) {
        *self.terms.entry(p).or_default() += c;
    }

    pub fn prune_small(&mut self) {
        let t = self.prune;
        self.terms.retain(|_, c| c.norm() >= t);
    }

    fn check_len(&self, other: &Self) -> Result<(), PauliError> {
        if self.n_qubits != other.n_qubits {
            Err(PauliError::LengthMismatch(self.n_qubits, other.n_qubits))
        } else {
            Ok(())
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, PauliError> {
        self.check_len(other)?;
        let mut out = self.clone();
        for (p, c) in &other.terms {
            out.accumulate(*p, *c);
        }
        out.prune_small();
        Ok(out)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= c;
        }
        out.prune_small();
        out
    }

    pub fn multiply(&self, other: &Self) -> Result<Self, PauliError> {
        self.check_len(other)?;
        let mut out = Self::zero(self.n_qubits).with_prune(self.prune);
        for (p, a) in &self.terms {
            for (q, b) in &other.terms {
                let (k, r) = p.mul(q);
                out.accumulate(r, a * b * i_pow(k));
            }
        }
        out.prune_small();
        Ok(out)
    }

    /// Hermitian conjugate.
    pub fn adjoint(&self) -> Self {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = v.conj();
        }
        out
    }

    /// Largest imaginary coefficient; zero means Hermitian, since every
    /// Pauli string is Hermitian.
    pub fn hermitian_defect(&self) -> f64 {
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// Copy with imaginary parts removed after checking they are below `tol`.
    pub fn into_real(mut self, tol: f64) -> Result<Self, PauliError> {
        let d = self.hermitian_defect();
        if d > tol {
            return Err(PauliError::NonHermitian(d));
        }
        for v in self.terms.values_mut() {
            v.im = 0.0;
        }
        self.prune_small();
        Ok(self)
    }

    /// Coefficient of the identity string.
    pub fn constant(&self) -> Complex64 {
        self.coeff(&PauliString::IDENTITY)
    }

    /// `<row| op |col>`.
    pub fn matrix_element(&self, row: u64, col: u64) -> Complex64 {
        self.terms
            .iter()
            .filter(|(p, _)| col ^ p.x == row)
            .map(|(p, c)| c * p.apply_basis(col).1)
            .sum()
    }

    pub fn to_matrix(&self) -> Result<DMatrix<Complex64>, PauliError> {
        self.to_matrix_with_limit(DENSE_LIMIT)
    }

    /// Dense matrix with qubit 0 as the least significant index bit.
    pub fn to_matrix_with_limit(&self, limit: usize) -> Result<DMatrix<Complex64>, PauliError> {
        if self.n_qubits > limit {
            return Err(PauliError::TooManyQubits {
                qubits: self.n_qubits,
                limit,
            });
        }
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::<Complex64>::zeros(dim, dim);
        for (p, c) in &self.terms {
            for col in 0..dim as u64 {
                let (row, ph) = p.apply_basis(col);
                m[(row as usize, col as usize)] += c * ph;
            }
        }
        Ok(m)
    }

    /// `op |psi>`.
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); psi.len()];
        for (p, c) in &self.terms {
            for (col, a) in psi.iter().enumerate() {
                let (row, ph) = p.apply_basis(col as u64);
                out[row as usize] += c * ph * a;
            }
        }
        out
    }

    /// One line per term, `coeff · letters`, coefficients rounded to
    /// `decimals` places.
    pub fn to_text(&self, decimals: usize) -> String {
        let mut s = String::new();
        for (p, c) in &self.terms {
            let coeff = if c.im == 0.0 {
                format!("{:+.*}", decimals, c.re)
            } else {
                format!("({:+.*}{:+.*}i)", decimals, c.re, decimals, c.im)
            };
            s.push_str(&format!("{coeff} · {}\n", p.to_letters(self.n_qubits)));
        }
        s
    }

    pub fn to_json(&self) -> OperatorJson {
        OperatorJson {
            n_qubits: self.n_qubits,
            terms: self
                .terms
                .iter()
                .map(|(p, c)| TermJson {
                    string: p.to_letters(self.n_qubits),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        }
    }

    pub fn from_json(doc: &OperatorJson) -> Result<Self, PauliError> {
        Self::from_letters(
            doc.n_qubits,
            doc.terms.iter().map(|t| (t.string.as_str(), Complex64::new(t.re, t.im))),
        )
    }
}

impl fmt::Display for PauliOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text(6))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorJson {
    pub n_qubits: usize,
    pub terms: Vec<TermJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermJson {
    pub string: String,
    pub re: f64,
    pub im: f64,
}
