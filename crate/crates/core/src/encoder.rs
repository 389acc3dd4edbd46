//! Fermionic Hamiltonians to Pauli operators.
//!
//! [`build_hamiltonian`] produces the compact encoding over a
//! [`ConfigSpace`]; [`jw_encode`] is the Jordan–Wigner reference on one
//! qubit per spin-orbital.
//!
//! Every transition `|k'><k|` factors into single-qubit entry operators
//! (`|1><0|`, `|0><1|`, `|0><0|`, `|1><1|`), each a half-sum of two Pauli
//! letters. Writing the strings as `i^{|x&z|} X^x Z^z`, the expansion has
//! `x = k ^ k'` and coefficient `2^-Q (-1)^{|z&k|} (-i)^{|x&z|}` for every
//! `z`, so all matrix elements sharing `x` reduce to one Walsh–Hadamard
//! transform.

use std::collections::BTreeMap;

use num_complex::Complex64;
use thiserror::Error;

use crate::configspace::{ConfigSpace, FermionConfig};
use crate::integrals::{Convention, IntegralTable, OrbitalBasis};
use crate::par;
use crate::pauli::{i_pow, PauliError, PauliOperator, PauliString, MAX_QUBITS};

/// Largest imaginary coefficient tolerated before it is treated as a bug.
pub const IMAG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum EncodeError {
    #[error("integrals cover {integrals} spin-orbitals, space has {space}")]
    DimensionMismatch { integrals: usize, space: usize },
    #[error("integrals must be a spin-orbital table")]
    NotSpinOrbital,
    #[error("imaginary coefficient residue {0:e} exceeds tolerance")]
    ImaginaryResidue(f64),
    #[error("{0} qubits is beyond the supported register width")]
    TooManyQubits(usize),
    #[error(transparent)]
    Pauli(#[from] PauliError),
}

/// `E_pq = a+_p a_q` acting on one configuration.
///
/// Returns the image and the sign `(-1)^(occupied bits strictly between p and q)`,
/// or `None` when the result vanishes.
pub fn apply_excitation(f: FermionConfig, p: usize, q: usize) -> Option<(FermionConfig, i8)> {
    let bits = f.bits();
    if bits >> q & 1 == 0 {
        return None;
    }
    if p == q {
        return Some((f, 1));
    }
    if bits >> p & 1 == 1 {
        return None;
    }
    let (lo, hi) = if p < q { (p, q) } else { (q, p) };
    let between = ((1u128 << hi) - 1) & !((1u128 << (lo + 1)) - 1);
    let sign = if (bits & between).count_ones().is_multiple_of(2) { 1 } else { -1 };
    Some((FermionConfig(bits ^ (1u128 << p) ^ (1u128 << q)), sign))
}

/// Sparse signed map between configuration indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionOperator {
    entries: BTreeMap<usize, (usize, f64)>,
}

impl TransitionOperator {
    pub fn identity(space: &ConfigSpace) -> Self {
        Self {
            entries: (0..space.len()).map(|k| (k, (k, 1.0))).collect(),
        }
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        Self {
            entries: entries
                .into_iter()
                .filter(|e| e.2 != 0.0)
                .map(|(k, t, c)| (k, (t, c)))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(source, target, coefficient)` ordered by source.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&k, &(t, c))| (k, t, c))
    }

    pub fn get(&self, source: usize) -> Option<(usize, f64)> {
        self.entries.get(&source).copied()
    }
}

/// `E_pq` restricted to `space`; transitions leaving the space are dropped.
pub fn build_transition(space: &ConfigSpace, p: usize, q: usize) -> TransitionOperator {
    let entries = space.configs().iter().enumerate().filter_map(|(k, f)| {
        let (g, sign) = apply_excitation(*f, p, q)?;
        space.index_of(g).map(|t| (k, (t, sign as f64)))
    });
    TransitionOperator {
        entries: entries.collect(),
    }
}

/// Matrix product `a · b` (`b` acts first).
pub fn compose(a: &TransitionOperator, b: &TransitionOperator) -> TransitionOperator {
    let entries = b.entries.iter().filter_map(|(&k, &(mid, cb))| {
        let (t, ca) = a.get(mid)?;
        Some((k, (t, ca * cb)))
    });
    TransitionOperator {
        entries: entries.collect(),
    }
}

/// Single-qubit operator with exactly one unit matrix entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryOperator {
    /// `|1><0| = (X - iY)/2`
    Raise,
    /// `|0><1| = (X + iY)/2`
    Lower,
    /// `|0><0| = (I + Z)/2`
    N0,
    /// `|1><1| = (I - Z)/2`
    N1,
}

impl EntryOperator {
    pub fn for_bits(target: bool, source: bool) -> Self {
        match (target, source) {
            (true, false) => Self::Raise,
            (false, true) => Self::Lower,
            (false, false) => Self::N0,
            (true, true) => Self::N1,
        }
    }

    /// The two `(letter, coefficient)` pairs summing to this operator.
    pub fn pauli_pair(self) -> [(char, Complex64); 2] {
        let h = 0.5;
        match self {
            Self::Raise => [('X', Complex64::new(h, 0.0)), ('Y', Complex64::new(0.0, -h))],
            Self::Lower => [('X', Complex64::new(h, 0.0)), ('Y', Complex64::new(0.0, h))],
            Self::N0 => [('I', Complex64::new(h, 0.0)), ('Z', Complex64::new(h, 0.0))],
            Self::N1 => [('I', Complex64::new(h, 0.0)), ('Z', Complex64::new(-h, 0.0))],
        }
    }
}

/// Entry operators of `|target><source|`, index `w` acting on qubit `w`.
pub fn factorize(target: usize, source: usize, n_qubits: usize) -> Vec<EntryOperator> {
    (0..n_qubits)
        .map(|w| EntryOperator::for_bits(target >> w & 1 == 1, source >> w & 1 == 1))
        .collect()
}

fn letter_bits(ch: char) -> (u64, u64) {
    match ch {
        'I' => (0, 0),
        'X' => (1, 0),
        'Y' => (1, 1),
        _ => (0, 1),
    }
}

/// Pauli form of a transition operator by distributing the entry-operator
/// products term by term. Also returns the number of raw terms produced
/// before merging, `len(t) · 2^Q`.
pub fn transition_to_pauli(space: &ConfigSpace, t: &TransitionOperator) -> (PauliOperator, u64) {
    let q = space.qubit_count();
    let mut op = PauliOperator::zero(q);
    let mut raw = 0u64;
    for (k, target, c) in t.entries() {
        let factors: Vec<_> = factorize(space.label(target), space.label(k), q).iter().map(|e| e.pauli_pair()).collect();
        for choice in 0u64..1 << q {
            let mut s = PauliString::IDENTITY;
            let mut coeff = Complex64::new(c, 0.0);
            for (w, pair) in factors.iter().enumerate() {
                let (ch, v) = pair[(choice >> w & 1) as usize];
                let (x, z) = letter_bits(ch);
                s.x |= x << w;
                s.z |= z << w;
                coeff *= v;
            }
            op.accumulate(s, coeff);
            raw += 1;
        }
    }
    op.prune_small();
    (op, raw)
}

/// Result of compiling a Hamiltonian.
#[derive(Debug, Clone)]
pub struct EncodedHamiltonian {
    pub operator: PauliOperator,
    /// Nonzero elements of the Hamiltonian matrix over the space.
    pub matrix_nonzeros: usize,
    /// Terms produced by expanding every nonzero element, before merging.
    pub raw_terms: u64,
    /// Largest imaginary residue seen before it was removed.
    pub imaginary_residue: f64,
}

fn spin_orbital_view(integrals: &IntegralTable) -> Result<IntegralTable, EncodeError> {
    match (integrals.basis(), integrals.convention()) {
        (OrbitalBasis::Spatial, _) => Err(EncodeError::NotSpinOrbital),
        (_, Convention::Chemist) => Ok(integrals.to_physicist()),
        _ => Ok(integrals.clone()),
    }
}

// Two-body terms with the (p,q,r,s) ~ (q,p,s,r) pair merged onto one
// representative. Both index orders give the same operator
// a+p a+q a_r a_s, so the merge is exact for any input.
fn two_body_representatives(t: &IntegralTable) -> Vec<([usize; 4], f64)> {
    t.two_body_entries()
        .filter_map(|([p, q, r, s], v)| {
            let partner = [q, p, s, r];
            match [p, q, r, s].cmp(&partner) {
                std::cmp::Ordering::Equal => Some(([p, q, r, s], 0.5 * v)),
                std::cmp::Ordering::Less => Some(([p, q, r, s], 0.5 * (v + t.two_body(partner)))),
                std::cmp::Ordering::Greater => {
                    if t.two_body(partner) == 0.0 {
                        Some(([p, q, r, s], 0.5 * v))
                    } else {
                        None
                    }
                }
            }
        })
        .filter(|(_, w)| *w != 0.0)
        .collect()
}

/// Column `k` of the Hamiltonian matrix over `space`, as `(row, value)`.
///
/// Two-body terms use `a+p a+q a_r a_s = δ_qr E_ps − E_pr E_qs`; the
/// intermediate configuration of `E_pr E_qs` may lie outside the space,
/// only the final one is projected.
fn hamiltonian_column(
    space: &ConfigSpace,
    one_body: &[(usize, usize, f64)],
    two_body: &[([usize; 4], f64)],
    k: usize,
) -> Vec<(usize, f64)> {
    let f = space.configs()[k];
    let mut col: BTreeMap<usize, f64> = BTreeMap::new();
    let mut add = |g: FermionConfig, v: f64| {
        if let Some(row) = space.index_of(g) {
            *col.entry(row).or_default() += v;
        }
    };
    for &(p, q, h) in one_body {
        if let Some((g, s)) = apply_excitation(f, p, q) {
            add(g, h * s as f64);
        }
    }
    for &([p, q, r, s], w) in two_body {
        if q == r {
            if let Some((g, sg)) = apply_excitation(f, p, s) {
                add(g, w * sg as f64);
            }
        }
        if let Some((mid, s1)) = apply_excitation(f, q, s) {
            if let Some((g, s2)) = apply_excitation(mid, p, r) {
                add(g, -w * (s1 * s2) as f64);
            }
        }
    }
    col.into_iter().filter(|(_, v)| *v != 0.0).collect()
}

/// In-place Walsh–Hadamard transform: `a[z] <- Σ_k a[k] (-1)^{|z&k|}`.
fn walsh_hadamard(a: &mut [f64]) {
    let n = a.len();
    let mut h = 1;
    while h < n {
        for block in a.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (u, v) in lo.iter_mut().zip(hi.iter_mut()) {
                let (s, d) = (*u + *v, *u - *v);
                *u = s;
                *v = d;
            }
        }
        h *= 2;
    }
}

// Pauli coefficients of all elements sharing `x`. Returns the real
// coefficients and the largest imaginary residue.
fn expand_group(x: u64, elems: &[(usize, f64)], q: usize, prune: f64) -> (Vec<(PauliString, f64)>, f64) {
    let dim = 1usize << q;
    let mut acc = vec![0.0f64; dim];
    if elems.len() > q {
        for &(k, v) in elems {
            acc[k] += v;
        }
        walsh_hadamard(&mut acc);
    } else {
        for &(k, v) in elems {
            for (z, a) in acc.iter_mut().enumerate() {
                if (z & k).count_ones() % 2 == 0 {
                    *a += v;
                } else {
                    *a -= v;
                }
            }
        }
    }
    let norm = 1.0 / dim as f64;
    let mut out = Vec::new();
    let mut residue = 0.0f64;
    for (z, a) in acc.into_iter().enumerate() {
        let z = z as u64;
        let c = i_pow(3 * (x & z).count_ones()) * (a * norm);
        residue = residue.max(c.im.abs());
        if c.re.abs() >= prune {
            out.push((PauliString::new(x, z), c.re));
        }
    }
    (out, residue)
}

/// Compile `integrals` (spin-orbital, any convention) over `space`.
pub fn build_hamiltonian(
    space: &ConfigSpace,
    integrals: &IntegralTable,
) -> Result<EncodedHamiltonian, EncodeError> {
    let table = spin_orbital_view(integrals)?;
    if table.n_orbitals() != space.n_spin_orbitals() {
        return Err(EncodeError::DimensionMismatch {
            integrals: table.n_orbitals(),
            space: space.n_spin_orbitals(),
        });
    }
    let q = space.qubit_count();
    if q > MAX_QUBITS.min(30) {
        return Err(EncodeError::TooManyQubits(q));
    }
    let one_body: Vec<_> = table.one_body_entries().collect();
    let two_body = two_body_representatives(&table);
    let columns = par::map_range(space.len(), |k| hamiltonian_column(space, &one_body, &two_body, k));

    let mut groups: BTreeMap<u64, Vec<(usize, f64)>> = BTreeMap::new();
    let mut nnz = 0usize;
    for (k, col) in columns.iter().enumerate() {
        let lk = space.label(k);
        for &(row, v) in col {
            groups.entry((space.label(row) ^ lk) as u64).or_default().push((lk, v));
            nnz += 1;
        }
    }
    let groups: Vec<(u64, Vec<(usize, f64)>)> = groups.into_iter().collect();
    let mut op = PauliOperator::zero(q);
    let prune = op.prune_threshold();
    let expanded = par::map_slice(&groups, |(x, elems)| expand_group(*x, elems, q, prune));
    let mut residue = 0.0f64;
    for (terms, r) in expanded {
        residue = residue.max(r);
        for (s, c) in terms {
            op.accumulate(s, Complex64::new(c, 0.0));
        }
    }
    if residue > IMAG_TOLERANCE {
        return Err(EncodeError::ImaginaryResidue(residue));
    }
    op.add_term(PauliString::IDENTITY, Complex64::new(table.constant(), 0.0));
    op.prune_small();
    Ok(EncodedHamiltonian {
        operator: op,
        matrix_nonzeros: nnz,
        raw_terms: nnz as u64 * (1u64 << q),
        imaginary_residue: residue,
    })
}

/// Jordan–Wigner images of `a+_p` and `a_p` on `n` qubits.
fn jw_ladder(n: usize, p: usize) -> (PauliOperator, PauliOperator) {
    let parity = (1u64 << p) - 1;
    let x = PauliString::new(1 << p, parity);
    let y = PauliString::new(1 << p, parity | 1 << p);
    let mut up = PauliOperator::zero(n);
    up.add_term(x, Complex64::new(0.5, 0.0));
    up.add_term(y, Complex64::new(0.0, -0.5));
    let mut down = PauliOperator::zero(n);
    down.add_term(x, Complex64::new(0.5, 0.0));
    down.add_term(y, Complex64::new(0.0, 0.5));
    (up, down)
}

/// Terms per deterministic work chunk in [`jw_encode`].
const JW_CHUNK: usize = 512;

/// Jordan–Wigner encoding on one qubit per spin-orbital.
pub fn jw_encode(integrals: &IntegralTable) -> Result<PauliOperator, EncodeError> {
    let table = spin_orbital_view(integrals)?;
    let n = table.n_orbitals();
    if n > MAX_QUBITS {
        return Err(EncodeError::TooManyQubits(n));
    }
    let ladders: Vec<_> = (0..n).map(|p| jw_ladder(n, p)).collect();
    let mut products: Vec<(Vec<usize>, f64)> = table
        .one_body_entries()
        .map(|(p, q, h)| (vec![p, q], h))
        .collect();
    products.extend(
        two_body_representatives(&table)
            .into_iter()
            .map(|([p, q, r, s], w)| (vec![p, q, r, s], w)),
    );
    let chunks: Vec<&[(Vec<usize>, f64)]> = products.chunks(JW_CHUNK).collect();
    let partials = par::map_slice(&chunks, |chunk| {
        let mut acc = PauliOperator::zero(n);
        for (idx, w) in chunk.iter() {
            // creators on the first half of the index list, annihilators after
            let half = idx.len() / 2;
            let mut term = PauliOperator::identity(n, *w);
            for (i, &p) in idx.iter().enumerate() {
                let factor = if i < half { &ladders[p].0 } else { &ladders[p].1 };
                term = term.multiply(factor).expect("equal lengths");
            }
            for (s, c) in term.iter() {
                acc.accumulate(*s, *c);
            }
        }
        acc
    });
    let mut op = PauliOperator::zero(n);
    for part in partials {
        for (s, c) in part.iter() {
            op.accumulate(*s, *c);
        }
    }
    op.add_term(PauliString::IDENTITY, Complex64::new(table.constant(), 0.0));
    op.prune_small();
    let residue = op.hermitian_defect();
    if residue > IMAG_TOLERANCE {
        return Err(EncodeError::ImaginaryResidue(residue));
    }
    Ok(op.into_real(IMAG_TOLERANCE)?)
}

/// Qubit and term counts of both encodings.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct TermCountReport {
    pub jw_qubits: usize,
    pub jw_terms: usize,
    pub qee_qubits: usize,
    pub qee_terms: usize,
    pub configurations: usize,
}

pub fn term_count_report(
    integrals: &IntegralTable,
    space: &ConfigSpace,
) -> Result<TermCountReport, EncodeError> {
    let jw = jw_encode(integrals)?;
    let qee = build_hamiltonian(space, integrals)?;
    Ok(TermCountReport {
        jw_qubits: jw.n_qubits(),
        jw_terms: jw.len(),
        qee_qubits: space.qubit_count(),
        qee_terms: qee.operator.len(),
        configurations: space.len(),
    })
}
