//! Real-amplitude RY/CNOT ansatz and a derivative-free minimizer.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::{cobyla_like, TrustRegionConfig};
use crate::par;
use crate::pauli::{PauliOperator, DENSE_LIMIT};
use crate::simulator::{diagonalize, estimate_energy, Backend, Circuit, SimError};

#[derive(Debug, Error)]
pub enum VqeError {
    #[error("expected {expected} parameters, got {found}")]
    ParamCount { expected: usize, found: usize },
    #[error("{total} CNOTs is not reachable from {base} base CNOTs with identity pairs")]
    CnotCount { total: usize, base: usize },
    #[error("Hamiltonian acts on {op} qubits, ansatz on {ansatz}")]
    Dimension { op: usize, ansatz: usize },
    #[error("max_evaluations must be at least 1")]
    NoBudget,
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Linear-chain RY/CNOT ansatz. `redundant_pairs` back-to-back CNOT pairs
/// are spread evenly over the base CNOTs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub n_qubits: usize,
    pub reps: usize,
    pub redundant_pairs: usize,
}

impl AnsatzSpec {
    pub fn new(n_qubits: usize, reps: usize) -> Self {
        Self {
            n_qubits,
            reps,
            redundant_pairs: 0,
        }
    }

    pub fn with_pairs(mut self, pairs: usize) -> Self {
        self.redundant_pairs = pairs;
        self
    }

    /// Spec whose circuit has exactly `total` CNOTs.
    pub fn from_cnot_count(n_qubits: usize, reps: usize, total: usize) -> Result<Self, VqeError> {
        let spec = Self::new(n_qubits, reps);
        let base = spec.base_cnots();
        if total < base || !(total - base).is_multiple_of(2) || (base == 0 && total > 0) {
            return Err(VqeError::CnotCount { total, base });
        }
        Ok(spec.with_pairs((total - base) / 2))
    }

    pub fn n_params(&self) -> usize {
        self.n_qubits * (self.reps + 1)
    }

    pub fn base_cnots(&self) -> usize {
        self.n_qubits.saturating_sub(1) * self.reps
    }

    pub fn cnot_count(&self) -> usize {
        self.base_cnots() + 2 * self.redundant_pairs
    }

    /// Identity pairs following base CNOT `i`.
    pub fn pairs_after(&self, i: usize) -> usize {
        let (b, p) = (self.base_cnots(), self.redundant_pairs);
        (i + 1) * p / b - i * p / b
    }
}

/// Circuit for `spec`; parameter `l·Q + q` is the RY angle on qubit `q` in
/// rotation layer `l`.
pub fn build_ansatz(spec: &AnsatzSpec, params: &[f64]) -> Result<Circuit, VqeError> {
    if params.len() != spec.n_params() {
        return Err(VqeError::ParamCount {
            expected: spec.n_params(),
            found: params.len(),
        });
    }
    let q = spec.n_qubits;
    let mut c = Circuit::new(q);
    let mut k = 0;
    for layer in 0..=spec.reps {
        if layer > 0 {
            for w in 0..q.saturating_sub(1) {
                c.cnot(w, w + 1)?;
                for _ in 0..spec.pairs_after(k) {
                    c.cnot(w, w + 1)?.cnot(w, w + 1)?;
                }
                k += 1;
            }
        }
        for w in 0..q {
            c.ry(w, params[layer * q + w])?;
        }
    }
    Ok(c)
}

const RESTART_KICK: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_evaluations: usize,
    /// Initial trust-region radius (radians).
    pub rhobeg: f64,
    /// Final trust-region radius.
    pub rhoend: f64,
    pub seed: u64,
    /// Seeded restarts allowed when the exact backend stays above the
    /// ground energy by more than `restart_tolerance`. Each restart starts
    /// from a random perturbation of the best point so far.
    pub restarts: usize,
    pub restart_tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_evaluations: 500,
            rhobeg: 1.0,
            rhoend: 1e-6,
            seed: 0,
            restarts: 3,
            restart_tolerance: 1.6e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeResult {
    pub best_energy: f64,
    pub best_params: Vec<f64>,
    /// Every evaluated energy across all starts.
    pub trajectory: Vec<f64>,
    pub evaluations: usize,
    pub starts: usize,
}

/// Minimize the ansatz energy starting from all-zero angles, with a fresh
/// evaluation budget per start.
pub fn minimize(ham: &PauliOperator, spec: &AnsatzSpec, opt: &OptimizerConfig, backend: &Backend) -> Result<VqeResult, VqeError> {
    if ham.n_qubits() != spec.n_qubits {
        return Err(VqeError::Dimension {
            op: ham.n_qubits(),
            ansatz: spec.n_qubits,
        });
    }
    if opt.max_evaluations == 0 {
        return Err(VqeError::NoBudget);
    }
    let reference = match backend {
        Backend::Exact if spec.n_qubits <= DENSE_LIMIT && opt.restarts > 0 => diagonalize(ham)?.first().copied(),
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut trajectory = Vec::new();
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut starts = 0;
    let mut failure: Option<VqeError> = None;
    let mut x0 = vec![0.0; spec.n_params()];
    loop {
        starts += 1;
        let offset = trajectory.len() as u64;
        let mut evals = 0u64;
        let mut f = |x: &[f64]| -> f64 {
            let seed = opt.seed.wrapping_add(offset + evals);
            evals += 1;
            let e = build_ansatz(spec, x).and_then(|c| Ok(estimate_energy(&c, ham, backend, seed)?.energy));
            match e {
                Ok(v) => v,
                Err(err) => {
                    failure.get_or_insert(err);
                    f64::INFINITY
                }
            }
        };
        let tr = TrustRegionConfig {
            rhobeg: opt.rhobeg,
            rhoend: opt.rhoend,
            max_evaluations: opt.max_evaluations,
        };
        let run = cobyla_like(&mut f, &x0, &tr);
        if let Some(err) = failure.take() {
            return Err(err);
        }
        trajectory.extend_from_slice(&run.history);
        if best.as_ref().is_none_or(|(e, _)| run.fx < *e) {
            best = Some((run.fx, run.x));
        }
        let done = match reference {
            Some(r) => best.as_ref().unwrap().0 - r <= opt.restart_tolerance,
            None => true,
        };
        if done || starts > opt.restarts {
            break;
        }
        // Restart near the best point, widening the kick each time.
        let scale = RESTART_KICK * f64::from(1u32 << (starts - 1).min(16));
        x0 = best
            .as_ref()
            .unwrap()
            .1
            .iter()
            .map(|v| v + scale * rng.random_range(-1.0..1.0))
            .collect();
    }
    let (best_energy, best_params) = best.unwrap();
    Ok(VqeResult {
        best_energy,
        best_params,
        evaluations: trajectory.len(),
        trajectory,
        starts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub distance: f64,
    pub energy: f64,
    /// Lowest eigenvalue of the operator, when small enough to diagonalize.
    pub exact: Option<f64>,
    pub evaluations: usize,
}

/// Independent minimizations over `(distance, Hamiltonian)` pairs.
pub fn surface_scan(
    points: &[(f64, PauliOperator)],
    spec: &AnsatzSpec,
    opt: &OptimizerConfig,
    backend: &Backend,
) -> Result<Vec<ScanPoint>, VqeError> {
    par::map_slice(points, |(d, ham)| -> Result<ScanPoint, VqeError> {
        let r = minimize(ham, spec, opt, backend)?;
        let exact = if ham.n_qubits() <= DENSE_LIMIT {
            diagonalize(ham)?.first().copied()
        } else {
            None
        };
        Ok(ScanPoint {
            distance: *d,
            energy: r.best_energy,
            exact,
            evaluations: r.evaluations,
        })
    })
    .into_iter()
    .collect()
}

pub fn scan_csv(points: &[ScanPoint]) -> String {
    let mut s = String::from("distance,energy,exact,evaluations\n");
    for p in points {
        let exact = p.exact.map(|e| format!("{e:.17e}")).unwrap_or_default();
        let _ = writeln!(s, "{},{:.17e},{},{}", p.distance, p.energy, exact, p.evaluations);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::run_statevector;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn h2_restricted() -> PauliOperator {
        let c = |v| Complex64::new(v, 0.0);
        PauliOperator::from_letters(
            2,
            [
                ("II", c(-1.052373)),
                ("ZI", c(-0.397937)),
                ("IZ", c(-0.397937)),
                ("ZZ", c(0.011280)),
                ("XX", c(0.180931)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn ansatz_shapes() {
        let s = AnsatzSpec::new(4, 2);
        assert_eq!((s.n_params(), s.cnot_count()), (12, 6));
        for (total, pairs) in [(6, 0), (12, 3), (18, 6)] {
            let s = AnsatzSpec::from_cnot_count(4, 2, total).unwrap();
            assert_eq!(s.redundant_pairs, pairs);
            let c = build_ansatz(&s, &[0.1; 12]).unwrap();
            assert_eq!(c.cnot_count(), total);
        }
        assert!(AnsatzSpec::from_cnot_count(4, 2, 7).is_err());
        assert!(AnsatzSpec::from_cnot_count(4, 2, 4).is_err());
        let one = AnsatzSpec::new(1, 2);
        let c = build_ansatz(&one, &[0.1, 0.2, 0.3]).unwrap();
        assert_eq!((c.gates().len(), c.cnot_count()), (3, 0));
        assert!(build_ansatz(&one, &[0.0; 2]).is_err());
    }

    #[test]
    fn pairs_are_spread() {
        let s = AnsatzSpec::new(4, 2).with_pairs(3);
        let per: Vec<usize> = (0..6).map(|i| s.pairs_after(i)).collect();
        assert_eq!(per, vec![0, 1, 0, 1, 0, 1]);
        let s = s.with_pairs(6);
        assert!((0..6).all(|i| s.pairs_after(i) == 1));
    }

    #[test]
    fn zero_angles_give_reference_state() {
        let c = build_ansatz(&AnsatzSpec::new(4, 2).with_pairs(3), &[0.0; 12]).unwrap();
        let psi = run_statevector(&c).unwrap();
        assert!((psi[0].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vqe_on_two_qubits() {
        let h = h2_restricted();
        let exact = diagonalize(&h).unwrap()[0];
        let r = minimize(&h, &AnsatzSpec::new(2, 2), &OptimizerConfig::default(), &Backend::Exact).unwrap();
        assert!((r.best_energy - exact).abs() < 1e-6, "{} vs {exact}", r.best_energy);
        assert!(r.trajectory.iter().all(|e| *e >= exact - 1e-9));
        assert_eq!(r.best_energy, r.trajectory.iter().copied().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn zero_hamiltonian() {
        let r = minimize(&PauliOperator::zero(2), &AnsatzSpec::new(2, 2), &OptimizerConfig::default(), &Backend::Exact).unwrap();
        assert_eq!(r.best_energy, 0.0);
        assert_eq!(r.starts, 1);
    }

    #[test]
    fn deterministic_with_shots() {
        let opt = OptimizerConfig {
            max_evaluations: 40,
            seed: 11,
            ..Default::default()
        };
        let b = Backend::Shots { shots: 1000 };
        let a = minimize(&h2_restricted(), &AnsatzSpec::new(2, 1), &opt, &b).unwrap();
        let c = minimize(&h2_restricted(), &AnsatzSpec::new(2, 1), &opt, &b).unwrap();
        assert_eq!(a.trajectory, c.trajectory);
        assert!(a.evaluations <= 40);
    }

    #[test]
    fn dimension_checked() {
        let r = minimize(&h2_restricted(), &AnsatzSpec::new(3, 2), &OptimizerConfig::default(), &Backend::Exact);
        assert!(matches!(r, Err(VqeError::Dimension { .. })));
    }

    #[test]
    fn csv_output() {
        let s = scan_csv(&[ScanPoint {
            distance: 0.7,
            energy: -1.0,
            exact: None,
            evaluations: 3,
        }]);
        assert_eq!(s.lines().count(), 2);
        assert!(s.lines().nth(1).unwrap().starts_with("0.7,-1.00000000000000000e0,,3"));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn redundant_pairs_are_identity(params in prop::collection::vec(-3.2f64..3.2, 12)) {
            let base = run_statevector(&build_ansatz(&AnsatzSpec::new(4, 2), &params).unwrap()).unwrap();
            for pairs in [3, 6] {
                let psi = run_statevector(&build_ansatz(&AnsatzSpec::new(4, 2).with_pairs(pairs), &params).unwrap()).unwrap();
                prop_assert!(psi.iter().zip(&base).all(|(a, b)| (a - b).norm() < 1e-12));
                prop_assert!(psi.iter().all(|a| a.im.abs() < 1e-12));
            }
        }
    }
}
