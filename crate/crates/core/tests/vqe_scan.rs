use qee_core::configspace::{ConfigSpace, SymmetryFilter};
use qee_core::encoder::build_hamiltonian;
use qee_core::fixtures::load_fixture;
use qee_core::integrals::OrbitalLayout;
use qee_core::pauli::PauliOperator;
use qee_core::simulator::Backend;
use qee_core::vqe::{minimize, scan_csv, surface_scan, AnsatzSpec, OptimizerConfig};

fn restricted(rel: &str) -> PauliOperator {
    let l = load_fixture(rel).unwrap();
    let n = l.table.n_orbitals();
    let m = l.n_electrons.unwrap();
    let layout = OrbitalLayout::blocked(n);
    let spin = l.table.to_spin_orbitals(&layout).unwrap();
    let f = SymmetryFilter::particles(2 * n, m).with_sz(m / 2, m / 2, layout.alpha_mask());
    build_hamiltonian(&ConfigSpace::enumerate(&f).unwrap(), &spin).unwrap().operator
}

fn scan(prefix: &str, dists: &[&str]) -> Vec<qee_core::vqe::ScanPoint> {
    let pts: Vec<(f64, PauliOperator)> = dists
        .iter()
        .map(|d| (d.parse().unwrap(), restricted(&format!("{prefix}_{d}.json"))))
        .collect();
    surface_scan(&pts, &AnsatzSpec::new(4, 2), &OptimizerConfig::default(), &Backend::Exact).unwrap()
}

fn argmin(points: &[qee_core::vqe::ScanPoint], f: impl Fn(&qee_core::vqe::ScanPoint) -> f64) -> f64 {
    points.iter().min_by(|a, b| f(a).total_cmp(&f(b))).unwrap().distance
}

#[test]
fn h2_631g_minimum_near_equilibrium() {
    let pts = scan("h2_631g/h2_631g", &["0.700", "0.720", "0.740", "0.745", "0.750", "0.770", "0.800", "1.000"]);
    for p in &pts {
        let exact = p.exact.unwrap();
        assert!(p.energy - exact < 1.6e-3, "{}: {} vs {exact}", p.distance, p.energy);
    }
    assert!((argmin(&pts, |p| p.exact.unwrap()) - 0.745).abs() <= 0.006);
    assert!((argmin(&pts, |p| p.energy) - 0.745).abs() <= 0.03);
}

#[test]
fn lih_minimum_near_equilibrium() {
    let pts = scan("lih_sto3g/lih_sto3g", &["1.000", "1.500", "1.530", "1.550", "1.570", "1.600", "2.000"]);
    for p in &pts {
        assert!(p.energy - p.exact.unwrap() < 1.6e-3, "{}: {:?}", p.distance, p);
    }
    assert!((argmin(&pts, |p| p.exact.unwrap()) - 1.55).abs() <= 0.05);
    assert!((argmin(&pts, |p| p.energy) - 1.55).abs() <= 0.05);
}

#[test]
fn single_point_scan_equals_minimize() {
    let h = restricted("h2_631g/h2_631g_0.745.json");
    let spec = AnsatzSpec::new(4, 2);
    let opt = OptimizerConfig { seed: 9, ..OptimizerConfig::default() };
    let direct = minimize(&h, &spec, &opt, &Backend::Exact).unwrap();
    let pts = surface_scan(&[(0.745, h)], &spec, &opt, &Backend::Exact).unwrap();
    assert_eq!(pts[0].energy, direct.best_energy);
    assert_eq!(pts[0].evaluations, direct.evaluations);
    let csv = scan_csv(&pts);
    assert!(csv.starts_with("distance,energy,exact,evaluations\n0.745,"));
}

#[test]
fn shot_backend_is_reproducible() {
    let h = restricted("h2_sto3g_0.735.json");
    let spec = AnsatzSpec::new(2, 2);
    let opt = OptimizerConfig { max_evaluations: 60, seed: 4, ..OptimizerConfig::default() };
    let b = Backend::Shots { shots: 2000 };
    let a = minimize(&h, &spec, &opt, &b).unwrap();
    let c = minimize(&h, &spec, &opt, &b).unwrap();
    assert_eq!(a.trajectory, c.trajectory);
    assert_eq!(a.starts, 1);
    assert!(a.evaluations <= 60);
}
