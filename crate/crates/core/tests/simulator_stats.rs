use num_complex::Complex64;
use qee_core::mitigation::{zne_pipeline, ZneConfig, ZneMode};
use qee_core::pauli::{PauliOperator, PauliString};
use qee_core::simulator::{estimate_energy, expectation, run_noisy, run_statevector, sample, Backend, Mitigation, NoiseModel, State};
use qee_core::vqe::{build_ansatz, AnsatzSpec};

fn r(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn two_qubit_h() -> PauliOperator {
    PauliOperator::from_letters(2, [("II", r(-1.05)), ("ZI", r(-0.39)), ("IZ", r(-0.39)), ("ZZ", r(0.011)), ("XX", r(0.18))]).unwrap()
}

fn sd(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[test]
fn shot_noise_scales_as_inverse_sqrt() {
    let h = two_qubit_h();
    let c = build_ansatz(&AnsatzSpec::new(2, 1), &[0.7, -0.4, 0.3, 1.1]).unwrap();
    let spread = |shots: u64| {
        let e: Vec<f64> = (0..200).map(|s| estimate_energy(&c, &h, &Backend::Shots { shots }, s).unwrap().energy).collect();
        sd(&e)
    };
    let ratio = spread(10_000) / spread(1_000_000);
    assert!((ratio / 10.0 - 1.0).abs() < 0.2, "{ratio}");
    let a = estimate_energy(&c, &h, &Backend::Shots { shots: 10_000 }, 1).unwrap().sigma;
    let b = estimate_energy(&c, &h, &Backend::Shots { shots: 1_000_000 }, 1).unwrap().sigma;
    assert!((a / b / 10.0 - 1.0).abs() < 0.2);
}

#[test]
fn empirical_frequencies_follow_born_rule() {
    let c = build_ansatz(&AnsatzSpec::new(3, 1), &[0.3, 1.2, -0.8, 0.5, -1.9, 2.2]).unwrap();
    let psi = run_statevector(&c).unwrap();
    let shots = 50_000u64;
    for basis in ["ZZZ", "XYZ", "YYX"] {
        let b = PauliString::from_letters(basis).unwrap();
        let state = State::Pure(psi.clone());
        let probs = state.measurement_probabilities(b);
        let counts = sample(&state, b, shots, None, 42).unwrap();
        assert_eq!(counts.counts.values().sum::<u64>(), shots);
        for (k, p) in probs.iter().enumerate() {
            let got = counts.counts.get(&(k as u64)).copied().unwrap_or(0) as f64 / shots as f64;
            let sigma = (p * (1.0 - p) / shots as f64).sqrt().max(1e-9);
            assert!((got - p).abs() <= 5.0 * sigma, "{basis} {k}: {got} vs {p}");
        }
    }
}

#[test]
fn redundant_cnots_lower_fidelity() {
    let params: Vec<f64> = (0..12).map(|i| 0.3 * i as f64 - 1.4).collect();
    let model = NoiseModel::ideal(4);
    let mut model = model;
    for q in &mut model.qubits {
        q.single_qubit_error = 2e-4;
    }
    model.default_cnot_error = Some(0.006);
    let ideal = run_statevector(&build_ansatz(&AnsatzSpec::new(4, 2), &params).unwrap()).unwrap();
    let mut last = 1.0;
    for count in [6, 12, 18, 24] {
        let spec = AnsatzSpec::from_cnot_count(4, 2, count).unwrap();
        let circuit = build_ansatz(&spec, &params).unwrap();
        assert_eq!(circuit.cnot_count(), count);
        // redundant pairs leave the ideal state unchanged
        let psi = run_statevector(&circuit).unwrap();
        let overlap: Complex64 = psi.iter().zip(&ideal).map(|(a, b)| a.conj() * b).sum();
        assert!((overlap.norm() - 1.0).abs() < 1e-12);
        let f = run_noisy(&circuit, &model).unwrap().fidelity_with(&ideal);
        assert!(f < last, "{count}: {f} >= {last}");
        last = f;
    }
}

#[test]
fn mitigation_removes_readout_bias() {
    let h = two_qubit_h();
    let c = build_ansatz(&AnsatzSpec::new(2, 1), &[0.7, -0.4, 0.3, 1.1]).unwrap();
    let exact = expectation(&run_statevector(&c).unwrap(), &h).unwrap();
    let mut model = NoiseModel::ideal(2);
    model.qubits[0].p1_given_0 = 0.05;
    model.qubits[0].p0_given_1 = 0.08;
    model.qubits[1].p1_given_0 = 0.12;
    model.qubits[1].p0_given_1 = 0.03;
    let run = |mitigation| {
        let b = Backend::Noisy {
            model: model.clone(),
            shots: 1_000_000,
            mitigation,
        };
        estimate_energy(&c, &h, &b, 3).unwrap()
    };
    let raw = run(Mitigation::None);
    let fixed = run(Mitigation::TensorProduct);
    let full = run(Mitigation::Full { shots: 1_000_000 });
    assert!((raw.energy - exact).abs() > 10.0 * raw.sigma);
    assert!((fixed.energy - exact).abs() < 5.0 * fixed.sigma);
    assert!((full.energy - exact).abs() < 0.01);
}

#[test]
fn noiseless_zne_is_flat() {
    let h = PauliOperator::from_letters(
        3,
        [("ZII", r(-0.46)), ("IZI", r(-0.31)), ("IIZ", r(-0.2)), ("XIX", r(0.045)), ("ZZI", r(0.067))],
    )
    .unwrap();
    let params: Vec<f64> = (0..9).map(|i| 0.2 * i as f64 - 0.5).collect();
    let exact = expectation(&run_statevector(&build_ansatz(&AnsatzSpec::new(3, 2), &params).unwrap()).unwrap(), &h).unwrap();
    let cfg = ZneConfig {
        n_qubits: 3,
        reps: 2,
        cnot_counts: vec![4, 8, 12],
        shots: 20_000,
        repeats: 10,
        mitigation: Mitigation::None,
        mode: ZneMode::FixedAngles { params },
        seed: 11,
    };
    let run = zne_pipeline(&h, &NoiseModel::ideal(3), &cfg).unwrap();
    for p in &run.points {
        assert!((p.energy - exact).abs() < 4.0 * p.sigma / (10f64).sqrt(), "{p:?}");
    }
    assert!((run.fit.intercept - exact).abs() < 3.0 * run.fit.sigma);
}
