//! One- and two-electron integrals.
//!
//! Tables are ingested either from FCIDUMP files or from the JSON integral
//! schema, then normalized into the canonical spin-orbital form used by the
//! encoders:
//!
//! ```text
//! H = sum_pq h_pq a+_p a_q + 1/2 sum_pqrs h_pqrs a+_p a+_q a_r a_s
//! h_pqrs = ∫∫ ψp*(1) ψq*(2) ψr(2) ψs(1) / r12 = (ps|qr)
//! ```
//!
//! which this crate calls the *physicist* convention. *Chemist* tables store
//! `(ij|kl)` directly and are converted on ingestion.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

/// Entries with magnitude below this are not stored.
pub const STORAGE_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum IntegralError {
    #[error("FCIDUMP line {line}: {kind}")]
    Fcidump { line: usize, kind: FcidumpErrorKind },
    #[error("integral schema violation: {0}")]
    Schema(String),
    #[error("integral schema violation: missing \"convention\" field")]
    MissingConvention,
    #[error("orbital index {index} out of range for {n} orbitals")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("orbital layout covers {found} spatial orbitals, table has {expected}")]
    LayoutMismatch { expected: usize, found: usize },
    #[error("invalid orbital layout: {0}")]
    InvalidLayout(String),
    #[error("operation requires a spatial-orbital table")]
    NotSpatial,
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FcidumpErrorKind {
    MalformedHeader(String),
    OutOfRangeIndex { index: usize, norb: usize },
    NonNumeric(String),
    WrongFieldCount(usize),
}

impl fmt::Display for FcidumpErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MalformedHeader(m) => write!(f, "malformed header: {m}"),
            Self::OutOfRangeIndex { index, norb } => {
                write!(f, "orbital index {index} out of range (NORB={norb})")
            }
            Self::NonNumeric(tok) => write!(f, "non-numeric field {tok:?}"),
            Self::WrongFieldCount(n) => write!(f, "expected 5 fields, found {n}"),
        }
    }
}

/// Index order of the stored two-body tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// `(ij|kl)` stored at `[i, j, k, l]`.
    Chemist,
    /// `h_pqrs = (ps|qr)` stored at `[p, q, r, s]`.
    Physicist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrbitalBasis {
    Spatial,
    SpinOrbital,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Alpha,
    Beta,
}

/// Placement of spin-orbitals `(spatial index, spin)` on occupation bits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitalLayout {
    n_spatial: usize,
    // spin_order[spin * n_spatial + i] = bit position
    spin_order: Vec<usize>,
}

impl OrbitalLayout {
    /// All alpha spin-orbitals on the low bits, then all beta.
    pub fn blocked(n_spatial: usize) -> Self {
        Self {
            n_spatial,
            spin_order: (0..2 * n_spatial).collect(),
        }
    }

    /// Alpha and beta of each spatial orbital on adjacent bits
    /// (`(0,α)→0, (0,β)→1, (1,α)→2, ...`).
    pub fn interleaved(n_spatial: usize) -> Self {
        let mut spin_order = vec![0; 2 * n_spatial];
        for i in 0..n_spatial {
            spin_order[i] = 2 * i;
            spin_order[n_spatial + i] = 2 * i + 1;
        }
        Self {
            n_spatial,
            spin_order,
        }
    }

    /// `positions[spin * n_spatial + i]` is the bit of spatial orbital `i`
    /// with the given spin (alpha = 0, beta = 1).
    pub fn from_positions(n_spatial: usize, positions: Vec<usize>) -> Result<Self, IntegralError> {
        let n = 2 * n_spatial;
        if positions.len() != n {
            return Err(IntegralError::InvalidLayout(format!(
                "expected {n} positions, got {}",
                positions.len()
            )));
        }
        let mut seen = vec![false; n];
        for &p in &positions {
            if p >= n || seen[p] {
                return Err(IntegralError::InvalidLayout(format!(
                    "positions are not a permutation of 0..{n}"
                )));
            }
            seen[p] = true;
        }
        Ok(Self {
            n_spatial,
            spin_order: positions,
        })
    }

    pub fn n_spatial(&self) -> usize {
        self.n_spatial
    }

    pub fn n_spin_orbitals(&self) -> usize {
        2 * self.n_spatial
    }

    pub fn position(&self, spatial: usize, spin: Spin) -> usize {
        let s = match spin {
            Spin::Alpha => 0,
            Spin::Beta => 1,
        };
        self.spin_order[s * self.n_spatial + spatial]
    }

    pub fn positions(&self) -> &[usize] {
        &self.spin_order
    }

    /// Bitmask of alpha spin-orbital positions.
    pub fn alpha_mask(&self) -> u128 {
        (0..self.n_spatial).fold(0u128, |m, i| m | 1u128 << self.position(i, Spin::Alpha))
    }

    /// Parse `blocked`, `interleaved`, or a comma-separated position list.
    pub fn parse(spec: &str, n_spatial: usize) -> Result<Self, IntegralError> {
        match spec.trim() {
            "blocked" => Ok(Self::blocked(n_spatial)),
            "interleaved" => Ok(Self::interleaved(n_spatial)),
            other => {
                let list = other.strip_prefix("perm:").unwrap_or(other);
                let positions = list
                    .split(',')
                    .map(|t| t.trim().parse::<usize>())
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| IntegralError::InvalidLayout(e.to_string()))?;
                Self::from_positions(n_spatial, positions)
            }
        }
    }
}

/// Dense one-body and sparse two-body integrals plus a scalar offset.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralTable {
    n_orbitals: usize,
    basis: OrbitalBasis,
    convention: Convention,
    one_body: Vec<f64>,
    two_body: BTreeMap<[usize; 4], f64>,
    constant: f64,
    metadata: Option<Value>,
}

impl IntegralTable {
    pub fn new(n_orbitals: usize, basis: OrbitalBasis, convention: Convention) -> Self {
        Self {
            n_orbitals,
            basis,
            convention,
            one_body: vec![0.0; n_orbitals * n_orbitals],
            two_body: BTreeMap::new(),
            constant: 0.0,
            metadata: None,
        }
    }

    /// Empty spin-orbital table in the canonical convention.
    pub fn spin_orbital(n_spin_orbitals: usize) -> Self {
        Self::new(n_spin_orbitals, OrbitalBasis::SpinOrbital, Convention::Physicist)
    }

    pub fn n_orbitals(&self) -> usize {
        self.n_orbitals
    }

    pub fn n_spin_orbitals(&self) -> usize {
        match self.basis {
            OrbitalBasis::Spatial => 2 * self.n_orbitals,
            OrbitalBasis::SpinOrbital => self.n_orbitals,
        }
    }

    pub fn basis(&self) -> OrbitalBasis {
        self.basis
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn set_constant(&mut self, c: f64) {
        self.constant = c;
    }

    pub fn metadata(&self) -> Option<&Value> {
        self.metadata.as_ref()
    }

    pub fn set_metadata(&mut self, meta: Option<Value>) {
        self.metadata = meta;
    }

    fn check(&self, idx: &[usize]) -> Result<(), IntegralError> {
        match idx.iter().find(|&&i| i >= self.n_orbitals) {
            Some(&index) => Err(IntegralError::IndexOutOfRange {
                index,
                n: self.n_orbitals,
            }),
            None => Ok(()),
        }
    }

    pub fn one_body(&self, p: usize, q: usize) -> f64 {
        self.one_body[p * self.n_orbitals + q]
    }

    pub fn set_one_body(&mut self, p: usize, q: usize, v: f64) -> Result<(), IntegralError> {
        self.check(&[p, q])?;
        self.one_body[p * self.n_orbitals + q] = if v.abs() < STORAGE_THRESHOLD { 0.0 } else { v };
        Ok(())
    }

    pub fn two_body(&self, idx: [usize; 4]) -> f64 {
        self.two_body.get(&idx).copied().unwrap_or(0.0)
    }

    pub fn set_two_body(&mut self, idx: [usize; 4], v: f64) -> Result<(), IntegralError> {
        self.check(&idx)?;
        if v.abs() < STORAGE_THRESHOLD {
            self.two_body.remove(&idx);
        } else {
            self.two_body.insert(idx, v);
        }
        Ok(())
    }

    /// Nonzero one-body entries in row-major order.
    pub fn one_body_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let n = self.n_orbitals;
        self.one_body
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(move |(i, &v)| (i / n, i % n, v))
    }

    /// Stored two-body entries in lexicographic index order.
    pub fn two_body_entries(&self) -> impl Iterator<Item = ([usize; 4], f64)> + '_ {
        self.two_body.iter().map(|(k, v)| (*k, *v))
    }

    pub fn two_body_len(&self) -> usize {
        self.two_body.len()
    }

    /// Same table with the scalar offset removed (the electronic operator).
    pub fn without_constant(&self) -> Self {
        let mut t = self.clone();
        t.constant = 0.0;
        t
    }

    // Images of an index under the real-orbital permutational symmetries.
    fn symmetry_images(&self, [a, b, c, d]: [usize; 4]) -> [[usize; 4]; 4] {
        match self.convention {
            // h_pqrs = h_qpsr = h_srqp = h_rspq
            Convention::Physicist => [[a, b, c, d], [b, a, d, c], [d, c, b, a], [c, d, a, b]],
            // (ij|kl) = (ji|lk) = (kl|ij) = (lk|ji)
            Convention::Chemist => [[a, b, c, d], [b, a, d, c], [c, d, a, b], [d, c, b, a]],
        }
    }

    /// Largest violation of one-body Hermiticity and of the two-body
    /// permutational symmetry expected for real orbitals.
    pub fn symmetry_defect(&self) -> f64 {
        let n = self.n_orbitals;
        let mut worst = 0.0f64;
        for p in 0..n {
            for q in 0..n {
                worst = worst.max((self.one_body(p, q) - self.one_body(q, p)).abs());
            }
        }
        for (&idx, &v) in &self.two_body {
            for img in self.symmetry_images(idx) {
                worst = worst.max((v - self.two_body(img)).abs());
            }
        }
        worst
    }

    /// Average over the real-orbital symmetry images.
    pub fn symmetrized(&self) -> Self {
        let n = self.n_orbitals;
        let mut out = self.clone();
        for p in 0..n {
            for q in 0..n {
                out.one_body[p * n + q] = 0.5 * (self.one_body(p, q) + self.one_body(q, p));
            }
        }
        out.two_body.clear();
        let keys: Vec<[usize; 4]> = self
            .two_body
            .keys()
            .flat_map(|&k| self.symmetry_images(k))
            .collect();
        for k in keys {
            let avg = self
                .symmetry_images(k)
                .iter()
                .map(|&i| self.two_body(i))
                .sum::<f64>()
                / 4.0;
            if avg.abs() >= STORAGE_THRESHOLD {
                out.two_body.insert(k, avg);
            }
        }
        out
    }

    /// Re-index a chemist table into the physicist convention
    /// (`h[p,q,r,s] = (ps|qr)`); physicist tables are returned unchanged.
    pub fn to_physicist(&self) -> Self {
        if self.convention == Convention::Physicist {
            return self.clone();
        }
        let mut out = self.clone();
        out.convention = Convention::Physicist;
        out.two_body = self
            .two_body
            .iter()
            .map(|(&[i, j, k, l], &v)| ([i, k, l, j], v))
            .collect();
        out
    }

    /// Expand a spatial table onto spin-orbitals placed by `layout`.
    /// The result is always in the physicist convention; spin-forbidden
    /// entries are absent.
    pub fn to_spin_orbitals(&self, layout: &OrbitalLayout) -> Result<Self, IntegralError> {
        if self.basis != OrbitalBasis::Spatial {
            return Err(IntegralError::NotSpatial);
        }
        if layout.n_spatial() != self.n_orbitals {
            return Err(IntegralError::LayoutMismatch {
                expected: self.n_orbitals,
                found: layout.n_spatial(),
            });
        }
        let phys = self.to_physicist();
        let n = self.n_orbitals;
        let mut out = Self::spin_orbital(2 * n);
        out.constant = self.constant;
        out.metadata = self.metadata.clone();
        let spins = [Spin::Alpha, Spin::Beta];
        for p in 0..n {
            for q in 0..n {
                let v = phys.one_body(p, q);
                if v == 0.0 {
                    continue;
                }
                for s in spins {
                    out.set_one_body(layout.position(p, s), layout.position(q, s), v)?;
                }
            }
        }
        for (&[p, q, r, s], &v) in &phys.two_body {
            for s1 in spins {
                for s2 in spins {
                    let idx = [
                        layout.position(p, s1),
                        layout.position(q, s2),
                        layout.position(r, s2),
                        layout.position(s, s1),
                    ];
                    out.set_two_body(idx, v)?;
                }
            }
        }
        Ok(out)
    }

    /// Canonical spin-orbital physicist table for the encoders.
    pub fn canonical(&self, layout: Option<&OrbitalLayout>) -> Result<Self, IntegralError> {
        match self.basis {
            OrbitalBasis::Spatial => {
                let default = OrbitalLayout::blocked(self.n_orbitals);
                self.to_spin_orbitals(layout.unwrap_or(&default))
            }
            OrbitalBasis::SpinOrbital => Ok(self.to_physicist()),
        }
    }
}

/// Header fields of an FCIDUMP file.
#[derive(Debug, Clone, PartialEq)]
pub struct FcidumpMeta {
    pub norb: usize,
    pub nelec: usize,
    pub ms2: i64,
    pub orbsym: Vec<i64>,
    pub isym: Option<i64>,
    pub convention: Convention,
}

fn parse_number(tok: &str, line: usize) -> Result<f64, IntegralError> {
    tok.replace(['D', 'd'], "e")
        .parse::<f64>()
        .map_err(|_| IntegralError::Fcidump {
            line,
            kind: FcidumpErrorKind::NonNumeric(tok.to_string()),
        })
}

/// Parse an FCIDUMP file into a spatial chemist-notation table.
///
/// Integral lines with all four indices set are two-electron `(ij|kl)`
/// and are expanded over the eightfold real-orbital symmetry; `i j 0 0`
/// lines are one-electron; `0 0 0 0` carries the scalar constant; `i 0 0 0`
/// orbital energies are ignored.
pub fn parse_fcidump(text: &str) -> Result<(IntegralTable, FcidumpMeta), IntegralError> {
    let header_err = |line: usize, m: &str| IntegralError::Fcidump {
        line,
        kind: FcidumpErrorKind::MalformedHeader(m.to_string()),
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let mut header = String::new();
    let mut started = false;
    let mut header_end = 0;
    for (no, raw) in lines.by_ref() {
        let l = raw.trim();
        if l.is_empty() {
            continue;
        }
        let mut body = l;
        if !started {
            if !l.to_ascii_uppercase().starts_with("&FCI") {
                return Err(header_err(no, "expected &FCI namelist"));
            }
            started = true;
            body = l.split_once(char::is_whitespace).map_or("", |(_, r)| r);
        }
        let upper = body.to_ascii_uppercase();
        if let Some(pos) = upper.find("&END").or_else(|| upper.rfind('/')) {
            header.push_str(&body[..pos]);
            header_end = no;
            break;
        }
        header.push(' ');
        header.push_str(body);
    }
    if header_end == 0 {
        return Err(header_err(text.lines().count().max(1), "unterminated namelist"));
    }

    let mut fields: Vec<(String, Vec<String>)> = Vec::new();
    for tok in header.replace(',', " ").split_whitespace() {
        if let Some((k, v)) = tok.split_once('=') {
            let mut vals = Vec::new();
            if !v.is_empty() {
                vals.push(v.to_string());
            }
            fields.push((k.to_ascii_uppercase(), vals));
        } else if let Some(last) = fields.last_mut() {
            last.1.push(tok.to_string());
        } else {
            return Err(header_err(header_end, &format!("stray token {tok:?}")));
        }
    }
    let field = |name: &str| fields.iter().find(|(k, _)| k == name).map(|(_, v)| v);
    let int = |name: &str| -> Result<Option<i64>, IntegralError> {
        match field(name) {
            None => Ok(None),
            Some(v) if v.len() == 1 => v[0]
                .parse::<i64>()
                .map(Some)
                .map_err(|_| header_err(header_end, &format!("{name} is not an integer"))),
            Some(_) => Err(header_err(header_end, &format!("{name} must have one value"))),
        }
    };
    let norb = int("NORB")?.ok_or_else(|| header_err(header_end, "NORB missing"))?;
    let nelec = int("NELEC")?.ok_or_else(|| header_err(header_end, "NELEC missing"))?;
    if norb <= 0 || nelec < 0 {
        return Err(header_err(header_end, "NORB must be positive and NELEC non-negative"));
    }
    let norb = norb as usize;
    let orbsym = match field("ORBSYM") {
        Some(v) => v
            .iter()
            .map(|s| s.parse::<i64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| header_err(header_end, "ORBSYM entries must be integers"))?,
        None => Vec::new(),
    };
    let meta = FcidumpMeta {
        norb,
        nelec: nelec as usize,
        ms2: int("MS2")?.unwrap_or(0),
        orbsym,
        isym: int("ISYM")?,
        convention: Convention::Chemist,
    };

    let mut table = IntegralTable::new(norb, OrbitalBasis::Spatial, Convention::Chemist);
    for (no, raw) in lines {
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if toks.len() != 5 {
            return Err(IntegralError::Fcidump {
                line: no,
                kind: FcidumpErrorKind::WrongFieldCount(toks.len()),
            });
        }
        let value = parse_number(toks[0], no)?;
        let mut idx = [0usize; 4];
        for (slot, tok) in idx.iter_mut().zip(&toks[1..]) {
            let i = tok.parse::<usize>().map_err(|_| IntegralError::Fcidump {
                line: no,
                kind: FcidumpErrorKind::NonNumeric(tok.to_string()),
            })?;
            if i > norb {
                return Err(IntegralError::Fcidump {
                    line: no,
                    kind: FcidumpErrorKind::OutOfRangeIndex { index: i, norb },
                });
            }
            *slot = i;
        }
        match idx {
            [0, 0, 0, 0] => table.constant = value,
            [i, j, 0, 0] if i > 0 && j > 0 => {
                table.set_one_body(i - 1, j - 1, value)?;
                table.set_one_body(j - 1, i - 1, value)?;
            }
            [i, j, k, l] if i > 0 && j > 0 && k > 0 && l > 0 => {
                let (i, j, k, l) = (i - 1, j - 1, k - 1, l - 1);
                for key in [
                    [i, j, k, l],
                    [j, i, k, l],
                    [i, j, l, k],
                    [j, i, l, k],
                    [k, l, i, j],
                    [l, k, i, j],
                    [k, l, j, i],
                    [l, k, j, i],
                ] {
                    table.set_two_body(key, value)?;
                }
            }
            [_, 0, 0, 0] => {}
            _ => {
                return Err(IntegralError::Fcidump {
                    line: no,
                    kind: FcidumpErrorKind::MalformedHeader(format!(
                        "unrecognized index pattern {idx:?}"
                    )),
                })
            }
        }
    }
    Ok((table, meta))
}

#[derive(Debug, Serialize, Deserialize)]
struct IntegralDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_spin_orbitals: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_spatial: Option<usize>,
    convention: Convention,
    constant: f64,
    one_body: Vec<(usize, usize, f64)>,
    two_body: Vec<(usize, usize, usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metadata: Option<Value>,
}

/// Load the JSON integral schema.
pub fn load_json_integrals(text: &str) -> Result<IntegralTable, IntegralError> {
    let raw: Value = serde_json::from_str(text)?;
    let obj = raw
        .as_object()
        .ok_or_else(|| IntegralError::Schema("top level must be an object".into()))?;
    if !obj.contains_key("convention") {
        return Err(IntegralError::MissingConvention);
    }
    let doc: IntegralDoc =
        serde_json::from_value(raw).map_err(|e| IntegralError::Schema(e.to_string()))?;
    let (n, basis) = match (doc.n_spin_orbitals, doc.n_spatial) {
        (Some(n), None) => (n, OrbitalBasis::SpinOrbital),
        (None, Some(n)) => (n, OrbitalBasis::Spatial),
        _ => {
            return Err(IntegralError::Schema(
                "exactly one of n_spin_orbitals / n_spatial is required".into(),
            ))
        }
    };
    if n == 0 {
        return Err(IntegralError::Schema("orbital count must be positive".into()));
    }
    let mut table = IntegralTable::new(n, basis, doc.convention);
    table.constant = doc.constant;
    table.metadata = doc.metadata;
    for (p, q, v) in doc.one_body {
        table.set_one_body(p, q, v)?;
    }
    for (p, q, r, s, v) in doc.two_body {
        table.set_two_body([p, q, r, s], v)?;
    }
    Ok(table)
}

/// Emit the JSON integral schema. Floats use the shortest representation
/// that parses back to the identical `f64`.
pub fn emit_json_integrals(table: &IntegralTable) -> String {
    let (n_spin_orbitals, n_spatial) = match table.basis {
        OrbitalBasis::SpinOrbital => (Some(table.n_orbitals), None),
        OrbitalBasis::Spatial => (None, Some(table.n_orbitals)),
    };
    let doc = IntegralDoc {
        n_spin_orbitals,
        n_spatial,
        convention: table.convention,
        constant: table.constant,
        one_body: table.one_body_entries().collect(),
        two_body: table
            .two_body_entries()
            .map(|([p, q, r, s], v)| (p, q, r, s, v))
            .collect(),
        metadata: table.metadata.clone(),
    };
    serde_json::to_string_pretty(&doc).expect("integral document serializes")
}
