//! Term-count and timing sweep over random integral tables.

use std::time::Instant;

use qee_core::configspace::{ConfigSpace, SymmetryFilter};
use qee_core::encoder::build_hamiltonian;
use qee_core::integrals::{Convention, IntegralTable, OrbitalBasis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{self, usage, CliResult};

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub n: usize,
    pub m: usize,
    pub configurations: usize,
    pub qubits: usize,
    pub matrix_nonzeros: usize,
    pub raw_terms: u64,
    /// Nonzero elements predicted from excitation degrees, times `2^Q`.
    pub analytic_raw_terms: u64,
    /// Raw terms of expanding every `E_pq` separately.
    pub excitation_raw_terms: u128,
    pub excitation_bound: f64,
    pub merged_terms: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Slope {
    pub m: usize,
    pub slope: f64,
    pub limit: f64,
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    (0..k as u128).fold(1, |acc, i| acc * (n as u128 - i) / (i + 1))
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

pub fn parse_grid(s: &str) -> CliResult<Vec<(usize, usize)>> {
    s.split(',')
        .map(|p| {
            let (n, m) = p.trim().split_once(':').ok_or_else(|| usage(format!("grid point {p:?} is not N:m")))?;
            let n: usize = n.parse().map_err(|_| usage(format!("grid point {p:?}")))?;
            let m: usize = m.parse().map_err(|_| usage(format!("grid point {p:?}")))?;
            if m == 0 || m > n || !n.is_multiple_of(2) {
                return Err(usage(format!("grid point {p:?} needs even N and 1 <= m <= N")));
            }
            Ok((n, m))
        })
        .collect()
}

/// Real spin-orbital integrals with the full 8-fold symmetry and no spin
/// structure, so every pair of configurations within two excitations couples.
pub fn random_table(n: usize, seed: u64) -> IntegralTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut t = IntegralTable::new(n, OrbitalBasis::SpinOrbital, Convention::Chemist);
    for p in 0..n {
        for q in 0..=p {
            let v = rng.random_range(-1.0..1.0);
            t.set_one_body(p, q, v).unwrap();
            t.set_one_body(q, p, v).unwrap();
        }
    }
    for i in 0..n {
        for j in 0..=i {
            for k in 0..n {
                for l in 0..=k {
                    if (i, j) < (k, l) {
                        continue;
                    }
                    let v = rng.random_range(-0.5..0.5);
                    for idx in [[i, j, k, l], [j, i, k, l], [i, j, l, k], [j, i, l, k], [k, l, i, j], [l, k, i, j], [k, l, j, i], [l, k, j, i]] {
                        t.set_two_body(idx, v).unwrap();
                    }
                }
            }
        }
    }
    t
}

pub fn run_point(n: usize, m: usize, seed: u64, repeats: usize, max_configs: u128) -> CliResult<BenchRow> {
    let size = binomial(n, m);
    if size > max_configs {
        return Err(error::CliError::new(
            error::Kind::Input,
            anyhow::anyhow!("grid point N={n} m={m} has {size} configurations, above the ceiling of {max_configs}"),
        ));
    }
    let table = random_table(n, seed ^ ((n as u64) << 32 | m as u64));
    let space = ConfigSpace::enumerate(&SymmetryFilter::particles(n, m)).map_err(usage)?;
    let mut best = f64::INFINITY;
    let mut enc = None;
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        let e = build_hamiltonian(&space, &table).map_err(error::encode)?;
        best = best.min(t.elapsed().as_secs_f64());
        enc = Some(e);
    }
    let enc = enc.unwrap();
    let q = space.qubit_count();
    let f = space.len() as u128;
    let neighbours = 1 + (m * (n - m)) as u128 + binomial(m, 2) * binomial(n - m, 2);
    let analytic = (f * neighbours) << q;
    let transitions = m as u128 * f * (n - m + 1) as u128;
    let bound = 2.0 * (n as f64).powi(2 * m as i32 + 1) / (factorial(m - 1) * factorial(m));
    Ok(BenchRow {
        n,
        m,
        configurations: space.len(),
        qubits: q,
        matrix_nonzeros: enc.matrix_nonzeros,
        raw_terms: enc.raw_terms,
        analytic_raw_terms: analytic as u64,
        excitation_raw_terms: transitions << q,
        excitation_bound: bound,
        merged_terms: enc.operator.len(),
        seconds: best,
    })
}

/// Least-squares slope of log(time) against log(N) for each particle count.
pub fn slopes(rows: &[BenchRow]) -> Vec<Slope> {
    let mut ms: Vec<usize> = rows.iter().map(|r| r.m).collect();
    ms.sort_unstable();
    ms.dedup();
    ms.into_iter()
        .filter_map(|m| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.m == m && r.seconds > 0.0)
                .map(|r| ((r.n as f64).ln(), r.seconds.ln()))
                .collect();
            if pts.len() < 2 {
                return None;
            }
            let k = pts.len() as f64;
            let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
            let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
            let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
            let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
            Some(Slope {
                m,
                slope: sxy / sxx,
                limit: (2 * m + 1) as f64 + 0.5,
            })
        })
        .collect()
}
