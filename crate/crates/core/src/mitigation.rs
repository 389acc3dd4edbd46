//! Readout-error mitigation and zero-noise linear extrapolation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::pauli::PauliOperator;
use crate::simulator::{
    estimate_energy, Backend, Mitigation, NoiseModel, ShotCounts, SimError,
};
use crate::vqe::{build_ansatz, minimize, AnsatzSpec, OptimizerConfig, VqeError};

/// Largest condition number accepted for inversion.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Error)]
pub enum MitigationError {
    #[error("calibration matrix is ill-conditioned (condition number {0:e})")]
    IllConditioned(f64),
    #[error("calibration matrix is not column-stochastic")]
    NotStochastic,
    #[error("dimension mismatch: calibration {expected}, data {found}")]
    Dimension { expected: usize, found: usize },
    #[error("extrapolation needs at least two distinct CNOT counts")]
    Degenerate,
    #[error("standard deviations must be positive")]
    NonPositiveSigma,
    #[error("need at least two repeats for a standard deviation")]
    TooFewRepeats,
    #[error(transparent)]
    Sim(#[from] Box<SimError>),
    #[error(transparent)]
    Vqe(#[from] Box<VqeError>),
}

impl From<SimError> for MitigationError {
    fn from(e: SimError) -> Self {
        Self::Sim(Box::new(e))
    }
}

impl From<VqeError> for MitigationError {
    fn from(e: VqeError) -> Self {
        Self::Vqe(Box::new(e))
    }
}

/// Confusion matrix `C[measured, prepared]`.
#[derive(Debug, Clone, PartialEq)]
pub enum CalibrationMatrix {
    /// Per-qubit 2×2 blocks; qubit `w` acts on bit `w`.
    Tensor(Vec<[[f64; 2]; 2]>),
    Full {
        matrix: DMatrix<f64>,
        inverse: DMatrix<f64>,
    },
}

fn qubit_block(p1_given_0: f64, p0_given_1: f64) -> [[f64; 2]; 2] {
    [[1.0 - p1_given_0, p0_given_1], [p1_given_0, 1.0 - p0_given_1]]
}

fn condition_number(m: &DMatrix<f64>) -> f64 {
    let sv = m.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

fn inv2(b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let det = b[0][0] * b[1][1] - b[0][1] * b[1][0];
    [[b[1][1] / det, -b[0][1] / det], [-b[1][0] / det, b[0][0] / det]]
}

fn transpose2(b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[b[0][0], b[1][0]], [b[0][1], b[1][1]]]
}

// Apply a 2x2 block to bit `q` of every index.
fn apply_block(v: &mut [f64], q: usize, b: &[[f64; 2]; 2]) {
    let bit = 1usize << q;
    for i in 0..v.len() {
        if i & bit == 0 {
            let (x, y) = (v[i], v[i | bit]);
            v[i] = b[0][0] * x + b[0][1] * y;
            v[i | bit] = b[1][0] * x + b[1][1] * y;
        }
    }
}

impl CalibrationMatrix {
    /// Tensor-product model from per-qubit `(P(1|0), P(0|1))`.
    pub fn from_readout(readout: &[(f64, f64)]) -> Self {
        Self::Tensor(readout.iter().map(|&(a, b)| qubit_block(a, b)).collect())
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self::from_readout(&vec![(0.0, 0.0); n_qubits])
    }

    /// Full matrix, e.g. estimated from calibration circuits.
    pub fn full(matrix: DMatrix<f64>) -> Result<Self, MitigationError> {
        if !matrix.is_square() {
            return Err(MitigationError::Dimension {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let stochastic = matrix
            .column_iter()
            .all(|c| c.iter().all(|v| *v >= -1e-12) && (c.sum() - 1.0).abs() < 1e-9);
        if !stochastic {
            return Err(MitigationError::NotStochastic);
        }
        let cond = condition_number(&matrix);
        if !(cond <= MAX_CONDITION) {
            return Err(MitigationError::IllConditioned(cond));
        }
        let inverse = matrix
            .clone()
            .try_inverse()
            .ok_or(MitigationError::IllConditioned(f64::INFINITY))?;
        Ok(Self::Full { matrix, inverse })
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Tensor(b) => 1 << b.len(),
            Self::Full { matrix, .. } => matrix.nrows(),
        }
    }

    /// Kronecker expansion of a tensor model.
    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Self::Full { matrix, .. } => matrix.clone(),
            Self::Tensor(_) => {
                let d = self.dim();
                let mut m = DMatrix::zeros(d, d);
                for col in 0..d {
                    let mut e = vec![0.0; d];
                    e[col] = 1.0;
                    let v = self.forward(&e).expect("matching dimension");
                    m.set_column(col, &DVector::from_vec(v));
                }
                m
            }
        }
    }

    pub fn condition_number(&self) -> f64 {
        match self {
            Self::Tensor(blocks) => blocks
                .iter()
                .map(|b| condition_number(&DMatrix::from_fn(2, 2, |r, c| b[r][c])))
                .product(),
            Self::Full { matrix, .. } => condition_number(matrix),
        }
    }

    fn check(&self, n: usize) -> Result<(), MitigationError> {
        if n != self.dim() {
            return Err(MitigationError::Dimension {
                expected: self.dim(),
                found: n,
            });
        }
        let cond = self.condition_number();
        if !(cond <= MAX_CONDITION) {
            return Err(MitigationError::IllConditioned(cond));
        }
        Ok(())
    }

    /// Noisy image `C p`.
    pub fn forward(&self, p: &[f64]) -> Result<Vec<f64>, MitigationError> {
        if p.len() != self.dim() {
            return Err(MitigationError::Dimension {
                expected: self.dim(),
                found: p.len(),
            });
        }
        Ok(match self {
            Self::Tensor(blocks) => {
                let mut v = p.to_vec();
                for (q, b) in blocks.iter().enumerate() {
                    apply_block(&mut v, q, b);
                }
                v
            }
            Self::Full { matrix, .. } => (matrix * DVector::from_column_slice(p)).as_slice().to_vec(),
        })
    }

    /// `C⁻¹ v`.
    pub fn apply_inverse(&self, v: &[f64]) -> Result<Vec<f64>, MitigationError> {
        self.check(v.len())?;
        Ok(match self {
            Self::Tensor(blocks) => {
                let mut out = v.to_vec();
                for (q, b) in blocks.iter().enumerate() {
                    apply_block(&mut out, q, &inv2(b));
                }
                out
            }
            Self::Full { inverse, .. } => (inverse * DVector::from_column_slice(v)).as_slice().to_vec(),
        })
    }

    /// `(C⁻¹)ᵀ v`, used to move the inverse onto observable values.
    pub fn apply_inverse_transpose(&self, v: &[f64]) -> Result<Vec<f64>, MitigationError> {
        self.check(v.len())?;
        Ok(match self {
            Self::Tensor(blocks) => {
                let mut out = v.to_vec();
                for (q, b) in blocks.iter().enumerate() {
                    apply_block(&mut out, q, &transpose2(&inv2(b)));
                }
                out
            }
            Self::Full { inverse, .. } => (inverse.transpose() * DVector::from_column_slice(v)).as_slice().to_vec(),
        })
    }

    /// Quasi-probabilities `C⁻¹ f` from measured counts; may contain small
    /// negative entries.
    pub fn mitigate(&self, counts: &ShotCounts) -> Result<Vec<f64>, MitigationError> {
        self.apply_inverse(&counts.frequencies())
    }
}

/// Clip negatives and renormalize, for display.
pub fn clip_normalize(q: &[f64]) -> Vec<f64> {
    let mut p: Vec<f64> = q.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|v| *v /= s);
    }
    p
}

/// One (CNOT count, mean energy, standard deviation) sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZnePoint {
    pub cnots: f64,
    pub energy: f64,
    pub sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtrapolationResult {
    pub intercept: f64,
    pub slope: f64,
    /// One-sigma uncertainty of the intercept.
    pub sigma: f64,
    /// Error bar half-length, `2σ`.
    pub error_bar: f64,
    /// `E_i − (intercept + slope·c_i)` in input order.
    pub residuals: Vec<f64>,
}

/// Weighted least-squares line `E = intercept + slope·c` with weights
/// `1/σ_i²`.
pub fn extrapolate(points: &[ZnePoint]) -> Result<ExtrapolationResult, MitigationError> {
    if points.iter().any(|p| !(p.sigma > 0.0)) {
        return Err(MitigationError::NonPositiveSigma);
    }
    let first = points.first().ok_or(MitigationError::Degenerate)?.cnots;
    if points.iter().all(|p| p.cnots == first) {
        return Err(MitigationError::Degenerate);
    }
    let (mut s, mut sx, mut sxx, mut sy, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let w = 1.0 / (p.sigma * p.sigma);
        s += w;
        sx += w * p.cnots;
        sxx += w * p.cnots * p.cnots;
        sy += w * p.energy;
        sxy += w * p.cnots * p.energy;
    }
    let delta = s * sxx - sx * sx;
    let intercept = (sxx * sy - sx * sxy) / delta;
    let slope = (s * sxy - sx * sy) / delta;
    let sigma = (sxx / delta).sqrt();
    Ok(ExtrapolationResult {
        intercept,
        slope,
        sigma,
        error_bar: 2.0 * sigma,
        residuals: points.iter().map(|p| p.energy - intercept - slope * p.cnots).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ZneMode {
    /// Evaluate every circuit at the same angles.
    FixedAngles { params: Vec<f64> },
    /// Re-optimize on the noisy backend for every repeat, then evaluate the
    /// optimum with an independent seed.
    FullVqe { optimizer: OptimizerConfig },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZneConfig {
    pub n_qubits: usize,
    pub reps: usize,
    /// Total CNOT counts; each must be reachable with redundant pairs.
    pub cnot_counts: Vec<usize>,
    pub shots: u64,
    pub repeats: usize,
    pub mitigation: Mitigation,
    pub mode: ZneMode,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZneRun {
    pub points: Vec<ZnePoint>,
    /// Raw energies, one row per CNOT count.
    pub samples: Vec<Vec<f64>>,
    pub fit: ExtrapolationResult,
}

fn repeat_seed(seed: u64, count: usize, repeat: usize) -> u64 {
    seed.wrapping_mul(0x2545_F491_4F6C_DD1D)
        .wrapping_add((count as u64) << 32)
        .wrapping_add(repeat as u64)
}

/// Sample mean and standard deviation (n − 1 denominator).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Repeated noisy energy estimates at each CNOT count, then extrapolation.
pub fn zne_pipeline(ham: &PauliOperator, nm: &NoiseModel, cfg: &ZneConfig) -> Result<ZneRun, MitigationError> {
    if cfg.repeats < 2 {
        return Err(MitigationError::TooFewRepeats);
    }
    let backend = Backend::Noisy {
        model: nm.clone(),
        shots: cfg.shots,
        mitigation: cfg.mitigation,
    };
    let mut points = Vec::new();
    let mut samples = Vec::new();
    for &count in &cfg.cnot_counts {
        let spec = AnsatzSpec::from_cnot_count(cfg.n_qubits, cfg.reps, count)?;
        let runs = par::map_range(cfg.repeats, |r| -> Result<f64, MitigationError> {
            let seed = repeat_seed(cfg.seed, count, r);
            let params = match &cfg.mode {
                ZneMode::FixedAngles { params } => params.clone(),
                ZneMode::FullVqe { optimizer } => {
                    let opt = OptimizerConfig {
                        seed,
                        ..optimizer.clone()
                    };
                    minimize(ham, &spec, &opt, &backend)?.best_params
                }
            };
            let circuit = build_ansatz(&spec, &params)?;
            Ok(estimate_energy(&circuit, ham, &backend, seed ^ 0xA5A5_A5A5)?.energy)
        });
        let energies = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
        let (mean, sd) = mean_std(&energies);
        points.push(ZnePoint {
            cnots: count as f64,
            energy: mean,
            sigma: sd,
        });
        samples.push(energies);
    }
    let fit = extrapolate(&points)?;
    Ok(ZneRun { points, samples, fit })
}
