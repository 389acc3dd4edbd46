//! Particle-conserving configuration spaces and the compact state mapping.
//!
//! A configuration is an occupation bitstring with bit `i` holding `f_i`.
//! The admitted set is sorted ascending by integer value and its `k`-th
//! member is mapped to the `k`-th computational basis state of
//! `Q = ceil(log2 |F|)` qubits.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

use crate::par;

/// Largest supported spin-orbital count.
pub const MAX_SPIN_ORBITALS: usize = 128;

/// Enumeration refuses to materialize more configurations than this.
pub const MAX_CONFIGS: usize = 1 << 26;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("configuration set is empty")]
    Empty,
    #[error("bit {bit} out of range for {n} spin-orbitals")]
    BitOutOfRange { bit: usize, n: usize },
    #[error("at most {MAX_SPIN_ORBITALS} spin-orbitals are supported, got {0}")]
    TooManyOrbitals(usize),
    #[error("invalid filter: {0}")]
    InvalidFilter(String),
    #[error("configuration {0} is not in the space")]
    NotInSpace(String),
    #[error("configuration space would exceed {MAX_CONFIGS} members")]
    TooLarge,
}

/// Occupation bitstring; bit 0 is the least significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct FermionConfig(pub u128);

impl FermionConfig {
    pub fn bits(self) -> u128 {
        self.0
    }

    pub fn weight(self) -> u32 {
        self.0.count_ones()
    }

    pub fn occupied(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    /// Occupied positions in ascending order.
    pub fn orbitals(self) -> Vec<usize> {
        (0..128).filter(|&i| self.occupied(i)).collect()
    }

    /// `n`-character string, highest bit first.
    pub fn to_bitstring(self, n: usize) -> String {
        (0..n).rev().map(|i| if self.occupied(i) { '1' } else { '0' }).collect()
    }

    /// Parse a bitstring written highest bit first.
    pub fn from_bitstring(s: &str) -> Result<Self, ConfigError> {
        let s = s.trim().trim_start_matches("0b");
        if s.is_empty() || s.len() > MAX_SPIN_ORBITALS {
            return Err(ConfigError::InvalidFilter(format!("bad bitstring {s:?}")));
        }
        u128::from_str_radix(s, 2)
            .map(FermionConfig)
            .map_err(|_| ConfigError::InvalidFilter(format!("bad bitstring {s:?}")))
    }
}

impl fmt::Display for FermionConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:b}", self.0)
    }
}

/// Next larger integer with the same popcount.
fn next_same_weight(v: u128) -> Option<u128> {
    let c = v & v.wrapping_neg();
    let r = v.checked_add(c)?;
    Some((((r ^ v) >> 2) / c) | r)
}

/// Selection rules defining an admitted configuration set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymmetryFilter {
    pub n_spin_orbitals: usize,
    pub n_particles: usize,
    /// Required (alpha, beta) occupation counts.
    pub sz: Option<(usize, usize)>,
    /// Bits holding alpha spin-orbitals; used only with `sz`.
    pub alpha_mask: u128,
    pub exclude: BTreeSet<FermionConfig>,
    pub include_extra: BTreeSet<FermionConfig>,
}

impl SymmetryFilter {
    /// All weight-`m` strings over `n` bits.
    pub fn particles(n: usize, m: usize) -> Self {
        Self {
            n_spin_orbitals: n,
            n_particles: m,
            sz: None,
            alpha_mask: 0,
            exclude: BTreeSet::new(),
            include_extra: BTreeSet::new(),
        }
    }

    /// Restrict to `m_alpha` electrons on the `alpha_mask` bits and `m_beta`
    /// on the rest.
    pub fn with_sz(mut self, m_alpha: usize, m_beta: usize, alpha_mask: u128) -> Self {
        self.sz = Some((m_alpha, m_beta));
        self.alpha_mask = alpha_mask;
        self
    }

    pub fn excluding(mut self, configs: impl IntoIterator<Item = FermionConfig>) -> Self {
        self.exclude.extend(configs);
        self
    }

    pub fn including(mut self, configs: impl IntoIterator<Item = FermionConfig>) -> Self {
        self.include_extra.extend(configs);
        self
    }

    /// Parse a `;`-separated filter spec such as `m=2;sz=1,1`,
    /// `m=14;exclude=0011,1100` or `m=2;include=1000`. Bitstrings are written
    /// highest bit first.
    pub fn parse(spec: &str, n_spin_orbitals: usize, alpha_mask: u128) -> Result<Self, ConfigError> {
        let bad = |m: String| ConfigError::InvalidFilter(m);
        let mut m = None;
        let mut sz = None;
        let mut exclude = BTreeSet::new();
        let mut include = BTreeSet::new();
        for part in spec.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (key, val) = part
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {part:?}")))?;
            let list = || val.split(',').map(str::trim).filter(|t| !t.is_empty());
            match key.trim() {
                "m" => {
                    m = Some(val.trim().parse::<usize>().map_err(|e| bad(format!("m: {e}")))?)
                }
                "sz" => {
                    let v = list()
                        .map(|t| t.parse::<usize>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| bad(format!("sz: {e}")))?;
                    match v[..] {
                        [a, b] => sz = Some((a, b)),
                        _ => return Err(bad("sz takes two counts".into())),
                    }
                }
                "exclude" => {
                    for t in list() {
                        exclude.insert(FermionConfig::from_bitstring(t)?);
                    }
                }
                "include" => {
                    for t in list() {
                        include.insert(FermionConfig::from_bitstring(t)?);
                    }
                }
                other => return Err(bad(format!("unknown key {other:?}"))),
            }
        }
        let m = m.ok_or_else(|| bad("particle count m is required".into()))?;
        let mut f = Self::particles(n_spin_orbitals, m)
            .excluding(exclude)
            .including(include);
        if let Some((a, b)) = sz {
            f = f.with_sz(a, b, alpha_mask);
        }
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let n = self.n_spin_orbitals;
        if n > MAX_SPIN_ORBITALS {
            return Err(ConfigError::TooManyOrbitals(n));
        }
        if self.n_particles > n {
            return Err(ConfigError::InvalidFilter(format!(
                "{} particles in {n} spin-orbitals",
                self.n_particles
            )));
        }
        if let Some((a, b)) = self.sz {
            if a + b != self.n_particles {
                return Err(ConfigError::InvalidFilter(format!(
                    "sz counts {a}+{b} != {}",
                    self.n_particles
                )));
            }
        }
        let limit = |c: FermionConfig| {
            let top = 128 - c.0.leading_zeros() as usize;
            if top > n {
                Err(ConfigError::BitOutOfRange { bit: top - 1, n })
            } else {
                Ok(())
            }
        };
        for c in self.exclude.iter().chain(&self.include_extra) {
            limit(*c)?;
        }
        if self.alpha_mask != 0 {
            limit(FermionConfig(self.alpha_mask))?;
        }
        if let Some(c) = self.exclude.intersection(&self.include_extra).next() {
            return Err(ConfigError::InvalidFilter(format!(
                "{} both excluded and included",
                c.to_bitstring(n)
            )));
        }
        Ok(())
    }

    fn admits(&self, c: u128) -> bool {
        match self.sz {
            Some((a, _)) => (c & self.alpha_mask).count_ones() as usize == a,
            None => true,
        }
    }
}

/// Weight-`m` strings below `1 << n` passing `keep`, ascending.
fn enumerate_weight(n: usize, m: usize, keep: &(dyn Fn(u128) -> bool + Sync)) -> Vec<u128> {
    if m == 0 {
        return if keep(0) { vec![0] } else { Vec::new() };
    }
    if m > n {
        return Vec::new();
    }
    // Group by leading bit so groups can run independently; concatenating in
    // leading-bit order keeps the global ascending order.
    let groups = par::map_range(n - m + 1, |g| {
        let lead = g + m - 1;
        let high = 1u128 << lead;
        let mut out = Vec::new();
        if m == 1 {
            if keep(high) {
                out.push(high);
            }
            return out;
        }
        let mut v = (1u128 << (m - 1)) - 1;
        while v < high {
            let c = v | high;
            if keep(c) {
                out.push(c);
            }
            match next_same_weight(v) {
                Some(next) => v = next,
                None => break,
            }
        }
        out
    });
    groups.concat()
}

/// Ordered admitted configurations and their qubit-state indices.
#[derive(Debug, Clone)]
pub struct ConfigSpace {
    n_spin_orbitals: usize,
    configs: Vec<FermionConfig>,
    index: HashMap<FermionConfig, usize>,
    qubit_count: usize,
    // qubit basis state of each configuration; None means state k for config k
    labels: Option<Vec<usize>>,
}

impl ConfigSpace {
    pub fn enumerate(filter: &SymmetryFilter) -> Result<Self, ConfigError> {
        filter.validate()?;
        let n = filter.n_spin_orbitals;
        let m = filter.n_particles;
        let total = binomial(n, m);
        if filter.sz.is_none() && total > BigUint::from(MAX_CONFIGS) {
            return Err(ConfigError::TooLarge);
        }
        let keep = |c: u128| filter.admits(c) && !filter.exclude.contains(&FermionConfig(c));
        let mut configs: Vec<FermionConfig> =
            enumerate_weight(n, m, &keep).into_iter().map(FermionConfig).collect();
        if !filter.include_extra.is_empty() {
            configs.extend(filter.include_extra.iter().copied());
            configs.sort_unstable();
            configs.dedup();
        }
        Self::from_sorted(n, configs)
    }

    /// Space over an explicit configuration list (sorted and deduplicated here).
    pub fn from_configs(
        n_spin_orbitals: usize,
        configs: impl IntoIterator<Item = FermionConfig>,
    ) -> Result<Self, ConfigError> {
        if n_spin_orbitals > MAX_SPIN_ORBITALS {
            return Err(ConfigError::TooManyOrbitals(n_spin_orbitals));
        }
        let mut configs: Vec<FermionConfig> = configs.into_iter().collect();
        configs.sort_unstable();
        configs.dedup();
        if let Some(c) = configs.last() {
            let top = 128 - c.0.leading_zeros() as usize;
            if top > n_spin_orbitals {
                return Err(ConfigError::BitOutOfRange {
                    bit: top - 1,
                    n: n_spin_orbitals,
                });
            }
        }
        Self::from_sorted(n_spin_orbitals, configs)
    }

    fn from_sorted(n: usize, configs: Vec<FermionConfig>) -> Result<Self, ConfigError> {
        if configs.is_empty() {
            return Err(ConfigError::Empty);
        }
        if configs.len() > MAX_CONFIGS {
            return Err(ConfigError::TooLarge);
        }
        let index = configs.iter().enumerate().map(|(k, c)| (*c, k)).collect();
        let qubit_count = qubits_for_len(configs.len());
        Ok(Self {
            n_spin_orbitals: n,
            configs,
            index,
            qubit_count,
            labels: None,
        })
    }

    /// Product mapping over two spin sectors: each sector's configurations
    /// are numbered ascending on their own register and the qubit state is
    /// `k_alpha + 2^{Q_alpha} k_beta`. Needs an `sz` filter; exclude and
    /// include sets are not supported.
    pub fn spin_product(filter: &SymmetryFilter) -> Result<Self, ConfigError> {
        filter.validate()?;
        let (ma, mb) = filter
            .sz
            .ok_or_else(|| ConfigError::InvalidFilter("spin product needs sz counts".into()))?;
        if !filter.exclude.is_empty() || !filter.include_extra.is_empty() {
            return Err(ConfigError::InvalidFilter(
                "spin product does not take exclude/include sets".into(),
            ));
        }
        let n = filter.n_spin_orbitals;
        let full = if n == 128 { u128::MAX } else { (1u128 << n) - 1 };
        let alpha_bits: Vec<usize> = (0..n).filter(|i| filter.alpha_mask >> i & 1 == 1).collect();
        let beta_bits: Vec<usize> = (0..n).filter(|i| (full & !filter.alpha_mask) >> i & 1 == 1).collect();
        let scatter = |packed: u128, bits: &[usize]| {
            bits.iter()
                .enumerate()
                .fold(0u128, |acc, (j, &b)| acc | (packed >> j & 1) << b)
        };
        let keep_all = |_: u128| true;
        let fa = enumerate_weight(alpha_bits.len(), ma, &keep_all);
        let fb = enumerate_weight(beta_bits.len(), mb, &keep_all);
        if fa.is_empty() || fb.is_empty() {
            return Err(ConfigError::Empty);
        }
        if fa.len().saturating_mul(fb.len()) > MAX_CONFIGS {
            return Err(ConfigError::TooLarge);
        }
        let qa = qubits_for_len(fa.len());
        let mut pairs: Vec<(FermionConfig, usize)> = Vec::with_capacity(fa.len() * fb.len());
        for (kb, b) in fb.iter().enumerate() {
            for (ka, a) in fa.iter().enumerate() {
                let c = scatter(*a, &alpha_bits) | scatter(*b, &beta_bits);
                pairs.push((FermionConfig(c), ka + (kb << qa)));
            }
        }
        pairs.sort_unstable();
        let (configs, labels): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let mut space = Self::from_sorted(n, configs)?;
        space.qubit_count = qa + qubits_for_len(fb.len());
        space.labels = Some(labels);
        Ok(space)
    }

    pub fn n_spin_orbitals(&self) -> usize {
        self.n_spin_orbitals
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn configs(&self) -> &[FermionConfig] {
        &self.configs
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn index_of(&self, f: FermionConfig) -> Option<usize> {
        self.index.get(&f).copied()
    }

    /// Qubit basis state of configuration `k`.
    pub fn label(&self, k: usize) -> usize {
        match &self.labels {
            Some(l) => l[k],
            None => k,
        }
    }

    /// Whether configuration `k` maps to basis state `k` for every `k`.
    pub fn is_dense(&self) -> bool {
        self.labels.is_none()
    }

    /// Qubit basis state of `f`.
    pub fn encode_state(&self, f: FermionConfig) -> Result<usize, ConfigError> {
        self.index_of(f)
            .map(|k| self.label(k))
            .ok_or_else(|| ConfigError::NotInSpace(f.to_bitstring(self.n_spin_orbitals)))
    }

    /// Rows of the mapping table: occupied spin-orbitals, configuration
    /// string, qubit string.
    pub fn mapping_rows(&self) -> Vec<MappingRow> {
        let q = self.qubit_count;
        self.configs
            .iter()
            .enumerate()
            .map(|(k, c)| MappingRow {
                index: k,
                occupied: c.orbitals(),
                config: c.to_bitstring(self.n_spin_orbitals),
                qubits: (0..q)
                    .rev()
                    .map(|w| if self.label(k) >> w & 1 == 1 { '1' } else { '0' })
                    .collect(),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MappingRow {
    pub index: usize,
    pub occupied: Vec<usize>,
    pub config: String,
    pub qubits: String,
}

/// Exact binomial coefficient.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Qubits needed to index `len` states.
pub fn qubits_for_len(len: usize) -> usize {
    if len <= 1 {
        0
    } else {
        (usize::BITS - (len - 1).leading_zeros()) as usize
    }
}

/// `ceil(log2 C(n, m))`, with 0 for a single configuration.
pub fn qubit_count_for(n: usize, m: usize) -> usize {
    let c = binomial(n, m);
    if c <= BigUint::from(1u32) {
        0
    } else {
        (c - 1u32).bits() as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfgs(s: &[&str]) -> Vec<FermionConfig> {
        s.iter().map(|b| FermionConfig::from_bitstring(b).unwrap()).collect()
    }

    #[test]
    fn restricted_h2_mapping() {
        let f = SymmetryFilter::particles(4, 2).with_sz(1, 1, 0b0011);
        let s = ConfigSpace::enumerate(&f).unwrap();
        assert_eq!(s.configs(), cfgs(&["0101", "0110", "1001", "1010"]).as_slice());
        assert_eq!(s.qubit_count(), 2);
        assert_eq!(s.encode_state(FermionConfig(0b0101)).unwrap(), 0);
        assert_eq!(s.encode_state(FermionConfig(0b1010)).unwrap(), 3);
        assert!(s.encode_state(FermionConfig(0b0011)).is_err());
        let rows = s.mapping_rows();
        assert_eq!(rows[3].qubits, "11");
        assert_eq!(rows[3].occupied, vec![1, 3]);
    }

    #[test]
    fn unrestricted_and_larger_spaces() {
        let s = ConfigSpace::enumerate(&SymmetryFilter::particles(4, 2)).unwrap();
        assert_eq!(
            s.configs(),
            cfgs(&["0011", "0101", "0110", "1001", "1010", "1100"]).as_slice()
        );
        assert_eq!(s.qubit_count(), 3);
        let f = SymmetryFilter::particles(8, 2).with_sz(1, 1, 0x0f);
        let s = ConfigSpace::enumerate(&f).unwrap();
        assert_eq!(s.len(), 16);
        assert_eq!(s.qubit_count(), 4);
    }

    #[test]
    fn spin_product_labels() {
        // 3 spatial orbitals, one electron per spin: 3 x 3 configs on 2 + 2 qubits
        let f = SymmetryFilter::particles(6, 2).with_sz(1, 1, 0b000111);
        let s = ConfigSpace::spin_product(&f).unwrap();
        assert_eq!(s.len(), 9);
        assert_eq!(s.qubit_count(), 4);
        assert_eq!(s.encode_state(FermionConfig(0b001001)).unwrap(), 0);
        assert_eq!(s.encode_state(FermionConfig(0b001100)).unwrap(), 2);
        assert_eq!(s.encode_state(FermionConfig(0b010001)).unwrap(), 4);
        assert_eq!(s.encode_state(FermionConfig(0b100100)).unwrap(), 10);
        let dense = ConfigSpace::enumerate(&f).unwrap();
        assert_eq!(dense.configs(), s.configs());
        assert!(ConfigSpace::spin_product(&SymmetryFilter::particles(6, 2)).is_err());
    }

    #[test]
    fn qubit_counts() {
        assert_eq!(qubit_count_for(402, 10), 65);
        assert_eq!(qubit_count_for(4, 2), 3);
        assert_eq!(qubit_count_for(7, 0), 0);
        assert_eq!(qubit_count_for(7, 7), 0);
    }

    #[test]
    fn single_config_has_no_qubits() {
        let s = ConfigSpace::enumerate(&SymmetryFilter::particles(3, 3)).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.qubit_count(), 0);
    }

    #[test]
    fn exclude_and_include() {
        let f = SymmetryFilter::parse("m=2;exclude=0011,1100;include=10000", 5, 0).unwrap();
        let s = ConfigSpace::enumerate(&f).unwrap();
        assert!(s.index_of(FermionConfig(0b0011)).is_none());
        assert_eq!(s.configs().last(), Some(&FermionConfig(0b11000)));
        assert!(s.index_of(FermionConfig(0b10000)).is_some());
        assert!(s.configs().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn filter_errors() {
        assert_eq!(
            SymmetryFilter::parse("m=2;exclude=100000", 4, 0),
            Err(ConfigError::BitOutOfRange { bit: 5, n: 4 })
        );
        assert!(SymmetryFilter::parse("m=2;sz=2,1", 4, 0b11).is_err());
        assert!(SymmetryFilter::parse("m=1;exclude=01;include=01", 4, 0).is_err());
        assert!(SymmetryFilter::parse("sz=1,1", 4, 0b11).is_err());
        let all = SymmetryFilter::particles(2, 1).excluding(cfgs(&["01", "10"]));
        assert_eq!(ConfigSpace::enumerate(&all).unwrap_err(), ConfigError::Empty);
    }

    #[test]
    fn exhaustive_counts_match_binomial() {
        for n in 0..=16 {
            for m in 0..=n {
                let s = ConfigSpace::enumerate(&SymmetryFilter::particles(n, m)).unwrap();
                assert_eq!(BigUint::from(s.len()), binomial(n, m), "n={n} m={m}");
                assert!(s.configs().iter().all(|c| c.weight() as usize == m));
                assert!(s.configs().windows(2).all(|w| w[0] < w[1]));
            }
        }
    }

    #[test]
    fn wide_registers() {
        let s = ConfigSpace::enumerate(&SymmetryFilter::particles(128, 2)).unwrap();
        assert_eq!(s.len(), 128 * 127 / 2);
        assert_eq!(s.configs().last(), Some(&FermionConfig(3u128 << 126)));
    }

    #[test]
    fn compact_bound_holds() {
        for n in 1..=64usize {
            for m in 1..=n / 2 {
                let q = qubit_count_for(n, m) as f64;
                let log_fact: f64 = (1..=m).map(|i| (i as f64).log2()).sum();
                assert!(q < m as f64 * (n as f64).log2() - log_fact + 1.0, "n={n} m={m}");
            }
        }
    }

    proptest! {
        #[test]
        fn mirror_symmetry(n in 0usize..200, frac in 0.0f64..=1.0) {
            let m = (n as f64 * frac) as usize;
            prop_assert_eq!(qubit_count_for(n, m), qubit_count_for(n, n - m));
        }

        #[test]
        fn index_inverts_position(n in 1usize..12, mfrac in 0.0f64..=1.0) {
            let m = (n as f64 * mfrac) as usize;
            let s = ConfigSpace::enumerate(&SymmetryFilter::particles(n, m)).unwrap();
            for (k, c) in s.configs().iter().enumerate() {
                prop_assert_eq!(s.index_of(*c), Some(k));
            }
            if s.len() >= 2 {
                let q = s.qubit_count() as u32;
                prop_assert!(1usize << (q - 1) < s.len() && s.len() <= 1usize << q);
            }
        }
    }
}
