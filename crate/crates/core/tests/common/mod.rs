//! Independent references: occupation-vector second quantization straight
//! from spatial chemist integrals, and paper-independent helpers.
#![allow(dead_code)]

use nalgebra::DMatrix;
use qee_core::integrals::{Convention, IntegralTable, OrbitalBasis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Spatial integrals in chemist notation, dense.
#[derive(Clone, Debug)]
pub struct Spatial {
    pub n: usize,
    pub h1: Vec<f64>,
    pub eri: Vec<f64>,
    pub constant: f64,
}

impl Spatial {
    pub fn h(&self, p: usize, q: usize) -> f64 {
        self.h1[p * self.n + q]
    }

    pub fn g(&self, i: usize, j: usize, k: usize, l: usize) -> f64 {
        let n = self.n;
        self.eri[((i * n + j) * n + k) * n + l]
    }

    pub fn from_table(t: &IntegralTable) -> Self {
        assert_eq!(t.basis(), OrbitalBasis::Spatial);
        assert_eq!(t.convention(), Convention::Chemist);
        let n = t.n_orbitals();
        let mut s = Self {
            n,
            h1: vec![0.0; n * n],
            eri: vec![0.0; n.pow(4)],
            constant: t.constant(),
        };
        for (p, q, v) in t.one_body_entries() {
            s.h1[p * n + q] = v;
        }
        for ([i, j, k, l], v) in t.two_body_entries() {
            s.eri[((i * n + j) * n + k) * n + l] = v;
        }
        s
    }

    pub fn to_table(&self) -> IntegralTable {
        let n = self.n;
        let mut t = IntegralTable::new(n, OrbitalBasis::Spatial, Convention::Chemist);
        t.set_constant(self.constant);
        for p in 0..n {
            for q in 0..n {
                t.set_one_body(p, q, self.h(p, q)).unwrap();
                for r in 0..n {
                    for s in 0..n {
                        t.set_two_body([p, q, r, s], self.g(p, q, r, s)).unwrap();
                    }
                }
            }
        }
        t
    }

    /// Random real integrals with the 8-fold permutational symmetry.
    pub fn random(n: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Self {
            n,
            h1: vec![0.0; n * n],
            eri: vec![0.0; n.pow(4)],
            constant: rng.random_range(-1.0..1.0),
        };
        for p in 0..n {
            for q in 0..=p {
                let v = rng.random_range(-1.0..1.0);
                s.h1[p * n + q] = v;
                s.h1[q * n + p] = v;
            }
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let key = [(i, j, k, l), (j, i, k, l), (i, j, l, k), (j, i, l, k), (k, l, i, j), (l, k, i, j), (k, l, j, i), (l, k, j, i)];
                        if key.iter().any(|&(a, b, c, d)| (a, b, c, d) < (i, j, k, l)) {
                            continue;
                        }
                        let v = rng.random_range(-0.5..0.5);
                        for (a, b, c, d) in key {
                            s.eri[((a * n + b) * n + c) * n + d] = v;
                        }
                    }
                }
            }
        }
        s
    }
}

/// `a_p` on an occupation bitstring with the `(-1)^{occupied below p}` sign.
pub fn annihilate(f: u128, p: usize) -> Option<(u128, f64)> {
    if f >> p & 1 == 0 {
        return None;
    }
    let sign = if (f & ((1u128 << p) - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((f & !(1u128 << p), sign))
}

pub fn create(f: u128, p: usize) -> Option<(u128, f64)> {
    if f >> p & 1 == 1 {
        return None;
    }
    let sign = if (f & ((1u128 << p) - 1)).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
    Some((f | 1u128 << p, sign))
}

/// Apply a string of ladder operators, rightmost first. `true` = creation.
pub fn apply_string(f: u128, ops: &[(bool, usize)]) -> Option<(u128, f64)> {
    let mut state = f;
    let mut sign = 1.0;
    for &(dagger, p) in ops.iter().rev() {
        let (g, s) = if dagger { create(state, p)? } else { annihilate(state, p)? };
        state = g;
        sign *= s;
    }
    Some((state, sign))
}

/// CI matrix of
/// `Σ h_pq a+_pσ a_qσ + ½ Σ (pq|rs) a+_pσ a+_rτ a_sτ a_qσ + constant`
/// over `configs`, with spin-orbital `(p, σ)` at bit `pos(p, σ)`.
pub fn ci_matrix(ints: &Spatial, configs: &[u128], pos: impl Fn(usize, usize) -> usize, with_constant: bool) -> DMatrix<f64> {
    let d = configs.len();
    let n = ints.n;
    let index = |g: u128| configs.iter().position(|&c| c == g);
    let mut m = DMatrix::zeros(d, d);
    for (col, &f) in configs.iter().enumerate() {
        if with_constant {
            m[(col, col)] += ints.constant;
        }
        for sp in 0..2 {
            for p in 0..n {
                for q in 0..n {
                    let h = ints.h(p, q);
                    if h == 0.0 {
                        continue;
                    }
                    if let Some((g, s)) = apply_string(f, &[(true, pos(p, sp)), (false, pos(q, sp))]) {
                        if let Some(row) = index(g) {
                            m[(row, col)] += h * s;
                        }
                    }
                }
            }
            for tp in 0..2 {
                for p in 0..n {
                    for q in 0..n {
                        for r in 0..n {
                            for s in 0..n {
                                let v = ints.g(p, q, r, s);
                                if v == 0.0 {
                                    continue;
                                }
                                let ops = [(true, pos(p, sp)), (true, pos(r, tp)), (false, pos(s, tp)), (false, pos(q, sp))];
                                if let Some((g, sg)) = apply_string(f, &ops) {
                                    if let Some(row) = index(g) {
                                        m[(row, col)] += 0.5 * v * sg;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    m
}

pub fn blocked(n: usize) -> impl Fn(usize, usize) -> usize {
    move |p, s| p + s * n
}

pub fn interleaved() -> impl Fn(usize, usize) -> usize {
    |p, s| 2 * p + s
}

/// All `n`-bit strings of weight `m`, ascending, optionally with a fixed
/// number of set bits inside `alpha_mask`.
pub fn brute_configs(n: usize, m: usize, sz: Option<(usize, u128)>) -> Vec<u128> {
    (0u128..1 << n)
        .filter(|f| f.count_ones() as usize == m)
        .filter(|f| sz.is_none_or(|(ma, mask)| (f & mask).count_ones() as usize == ma))
        .collect()
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}
