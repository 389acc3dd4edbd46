use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn qee(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qee")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = qee(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    qee(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn fci(rel: &str) -> f64 {
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixture(rel)).unwrap()).unwrap();
    doc["metadata"]["fci_energy"].as_f64().unwrap()
}

#[test]
fn encode_h2_without_constant() {
    let text = ok(&["encode", "--input", s(&fixture("h2_sto3g_0.735.json")), "--no-constant"]);
    let want = ["-1.052373 · II", "-0.397937 · IZ", "-0.397937 · ZI", "+0.011280 · ZZ", "+0.180931 · XX"];
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), want.len());
    for w in want {
        assert!(lines.contains(&w), "{w} missing from\n{text}");
    }
}

#[test]
fn diag_matches_fci() {
    let dir = tempfile::tempdir().unwrap();
    for rel in ["h2_sto3g_0.735.json", "h2_631g/h2_631g_0.745.json", "lih_sto3g/lih_sto3g_1.550.json"] {
        let op = dir.path().join("op.json");
        ok(&["encode", "--input", s(&fixture(rel)), "--out", s(&op)]);
        assert!(dir.path().join("op.json.manifest.json").exists());
        let e = fci(rel).to_string();
        ok(&["diag", "--ham", s(&op), "--expect", &e, "--tol", "1e-9"]);
        let out = ok(&["--json", "diag", "--ham", s(&op)]);
        let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
        let got = doc["result"]["ground_energy"].as_f64().unwrap();
        assert!((got - fci(rel)).abs() < 1e-9, "{rel}: {got}");
        assert_eq!(doc["manifest"]["command"], "diag");
    }
}

#[test]
fn jw_and_qee_agree_on_ground_energy() {
    let dir = tempfile::tempdir().unwrap();
    let op = dir.path().join("jw.json");
    ok(&["encode", "--input", s(&fixture("h2_sto3g_0.735.json")), "--encoding", "jw", "--out", s(&op)]);
    let doc: serde_json::Value = serde_json::from_str(&ok(&["--json", "diag", "--ham", s(&op), "--count", "16"])).unwrap();
    let ev: Vec<f64> = doc["result"]["eigenvalues"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    // full Fock space: the two-electron ground state is among the eigenvalues
    assert!(ev.iter().any(|e| (e - fci("h2_sto3g_0.735.json")).abs() < 1e-9));
}

#[test]
fn report_qubit_columns() {
    let out = ok(&["report", "--format", "csv"]);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "name,spin_orbitals,electrons,jw_qubits,jw_terms,qee_qubits,qee_terms,configurations");
    let want = [
        ("br2_f0-27", 16, 6),
        ("cl2_f0-1", 32, 8),
        ("cl2_f0-9", 16, 6),
        ("f2_f0-1", 16, 6),
        ("hbr_f0-2", 32, 8),
        ("hbr_f0-4", 28, 8),
        ("hcl_f0-1", 16, 6),
        ("hcl_f0", 18, 8),
        ("hf", 12, 6),
        ("hf_f0", 10, 6),
        ("i2_f0-45", 16, 6),
        ("lih_f0_r3", 8, 4),
    ];
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), want.len());
    for (row, (name, jw, q)) in rows.iter().zip(want) {
        assert_eq!(row[0], name);
        assert_eq!(row[3].parse::<usize>().unwrap(), jw, "{name}");
        assert_eq!(row[5].parse::<usize>().unwrap(), q, "{name}");
    }
}

#[test]
fn configs_listing() {
    let out = ok(&["configs", "--spin-orbitals", "4", "--filter", "m=2;sz=1,1"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "4 configurations on 2 qubits (m=2;sz=1,1)");
    assert!(lines[1].contains("0101  00"));
    assert!(lines[4].contains("1010  11"));
}

#[test]
fn exit_codes() {
    let h2 = fixture("h2_sto3g_0.735.json");
    assert_eq!(code(&["encode"]), 2);
    assert_eq!(code(&["encode", "--input", s(&h2), "--mapping", "sideways"]), 2);
    assert_eq!(code(&["encode", "--input", s(&h2), "--filter", "m=two"]), 2);
    assert_eq!(code(&["vqe", "--ham", "x.json", "--backend", "quantum"]), 3);
    assert_eq!(code(&["encode", "--input", "/definitely/missing.json"]), 3);
    assert_eq!(code(&["bench", "--grid", "16:8", "--max-configs", "100"]), 3);

    let dir = tempfile::tempdir().unwrap();
    let op = dir.path().join("op.json");
    ok(&["encode", "--input", s(&h2), "--out", s(&op)]);
    assert_eq!(code(&["vqe", "--ham", s(&op), "--backend", "quantum"]), 2);
    assert_eq!(code(&["diag", "--ham", s(&op), "--expect", "-1.2"]), 4);
    let garbage = dir.path().join("bad.json");
    std::fs::write(&garbage, "{ not json").unwrap();
    assert_eq!(code(&["diag", "--ham", s(&garbage)]), 3);

    let skew = dir.path().join("skew.json");
    std::fs::write(&skew, r#"{"n_qubits": 1, "terms": [{"string": "X", "re": 0.0, "im": 1.0}]}"#).unwrap();
    assert_eq!(code(&["diag", "--ham", s(&skew)]), 4);

    let out = qee(&["--json", "diag", "--ham", s(&garbage)]);
    let err: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"]["code"], 3);
    assert_eq!(err["error"]["kind"], "input");
}

#[test]
fn outputs_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let op = dir.path().join("op.json");
    ok(&["encode", "--input", s(&fixture("h2_sto3g_0.735.json")), "--out", s(&op)]);
    let noise = fixture("noise/santiago.json");
    let run = |tag: &str, threads: &str| {
        let out = dir.path().join(format!("zne_{tag}.json"));
        let csv = dir.path().join(format!("zne_{tag}.csv"));
        ok(&[
            "zne", "--ham", s(&op), "--noise", s(&noise), "--reps", "1", "--cnot-counts", "1,3,5", "--shots", "5000",
            "--repeats", "4", "--seed", "7", "--out", s(&out), "--csv", s(&csv), "--threads", threads,
        ]);
        (std::fs::read(out).unwrap(), std::fs::read(csv).unwrap())
    };
    let a = run("a", "1");
    let b = run("b", "4");
    assert_eq!(a, b);

    let scan = |tag: &str| {
        let out = dir.path().join(format!("scan_{tag}.csv"));
        ok(&[
            "scan",
            "--input",
            s(&fixture("h2_631g/h2_631g_0.700.json")),
            "--input",
            s(&fixture("h2_631g/h2_631g_1.000.json")),
            "--backend",
            "shots:2000",
            "--max-evals",
            "40",
            "--seed",
            "3",
            "--out",
            s(&out),
        ]);
        std::fs::read(out).unwrap()
    };
    assert_eq!(scan("a"), scan("b"));
}

#[test]
fn bench_counts_hold() {
    let out = ok(&["--json", "bench", "--grid", "6:2,8:2,6:3", "--repeats", "1", "--no-timing-check"]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    for r in doc["result"]["rows"].as_array().unwrap() {
        assert_eq!(r["raw_terms"], r["analytic_raw_terms"]);
    }
}

#[test]
fn plots_are_svg() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("pes.svg");
    ok(&[
        "scan",
        "--input",
        s(&fixture("h2_631g/h2_631g_0.700.json")),
        "--input",
        s(&fixture("h2_631g/h2_631g_0.745.json")),
        "--max-evals",
        "60",
        "--restarts",
        "0",
        "--plot",
        s(&svg),
    ]);
    let text = std::fs::read_to_string(svg).unwrap();
    assert!(text.starts_with("<svg") && text.trim_end().ends_with("</svg>"));
}
