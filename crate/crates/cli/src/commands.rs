use std::fmt::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Subcommand, ValueEnum};
use qee_core::encoder::{build_hamiltonian, jw_encode, term_count_report};
use qee_core::fixtures::fixture_root;
use qee_core::integrals::OrbitalLayout;
use qee_core::mitigation::{zne_pipeline, ZneConfig, ZneMode};
use qee_core::pauli::{PauliOperator, DENSE_LIMIT};
use qee_core::simulator::{diagonalize, Backend};
use qee_core::vqe::{minimize, scan_csv, surface_scan, AnsatzSpec, OptimizerConfig};
use serde_json::{json, Value};

use crate::bench;
use crate::error::{self, numerical, usage, Classify, CliResult};
use crate::inputs::{self, Mapping};
use crate::manifest::RunManifest;
use crate::plot::{chart, Series};

#[derive(Subcommand, Debug)]
pub enum Command {
    /// List the configuration space and its qubit labels.
    Configs(ConfigsArgs),
    /// Compile integrals into a Pauli operator.
    Encode(EncodeArgs),
    /// Exact eigenvalues of an operator.
    Diag(DiagArgs),
    /// Minimize the ansatz energy.
    Vqe(VqeArgs),
    /// VQE over a set of geometries.
    Scan(ScanArgs),
    /// Zero-noise extrapolation over redundant CNOT pairs.
    Zne(ZneArgs),
    /// Jordan-Wigner versus QEE qubit and term counts for a directory.
    Report(ReportArgs),
    /// Term counts and compile time on random integrals.
    Bench(BenchArgs),
}

pub struct Output {
    pub result: Value,
    pub text: String,
    pub out_path: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SpaceArgs {
    /// Spin layout of spatial orbitals: blocked, interleaved or a list.
    #[arg(long, default_value = "blocked")]
    layout: String,
    /// Symmetry filter, e.g. `m=2;sz=1,1`. Defaults to the electron count
    /// with equal spin occupations.
    #[arg(long)]
    filter: Option<String>,
    #[arg(long, value_enum, default_value_t = Mapping::Ascending)]
    mapping: Mapping,
}

#[derive(Args, Debug)]
pub struct ConfigsArgs {
    #[arg(long, conflicts_with = "spin_orbitals")]
    input: Option<PathBuf>,
    #[arg(long, requires = "filter")]
    spin_orbitals: Option<usize>,
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Encoding {
    Qee,
    Jw,
}

#[derive(Args, Debug)]
pub struct EncodeArgs {
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long, value_enum, default_value_t = Encoding::Qee)]
    encoding: Encoding,
    /// Drop the scalar (nuclear repulsion and frozen core) term.
    #[arg(long)]
    no_constant: bool,
    /// Operator JSON destination.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, default_value_t = 6)]
    decimals: usize,
}

#[derive(Args, Debug)]
pub struct DiagArgs {
    /// Operator JSON.
    #[arg(long)]
    ham: PathBuf,
    /// How many of the lowest eigenvalues to print.
    #[arg(long, default_value_t = 4)]
    count: usize,
    /// Fail with a numerical error unless the ground energy is within
    /// `--tol` of this value.
    #[arg(long, allow_hyphen_values = true)]
    expect: Option<f64>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args, Debug)]
pub struct AnsatzArgs {
    #[arg(long, default_value_t = 2)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    max_evals: usize,
    #[arg(long, default_value_t = 3)]
    restarts: usize,
}

impl AnsatzArgs {
    fn optimizer(&self) -> OptimizerConfig {
        OptimizerConfig {
            max_evaluations: self.max_evals,
            seed: self.seed,
            restarts: self.restarts,
            ..OptimizerConfig::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct VqeArgs {
    #[arg(long)]
    ham: PathBuf,
    #[command(flatten)]
    ansatz: AnsatzArgs,
    /// Total CNOTs, padded with redundant pairs.
    #[arg(long)]
    cnot_count: Option<usize>,
    /// `exact`, `shots:N` or `noisy:MODEL.json:N`.
    #[arg(long, default_value = "exact")]
    backend: String,
    /// `none`, `tensor` or `full:SHOTS`; noisy backend only.
    #[arg(long, default_value = "tensor")]
    mitigation: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ScanArgs {
    /// Integral files, one per geometry.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    #[command(flatten)]
    space: SpaceArgs,
    #[arg(long)]
    no_constant: bool,
    #[command(flatten)]
    ansatz: AnsatzArgs,
    #[arg(long, default_value = "exact")]
    backend: String,
    #[arg(long, default_value = "tensor")]
    mitigation: String,
    /// CSV destination.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG destination.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ZneModeArg {
    FixedAngles,
    FullVqe,
}

#[derive(Args, Debug)]
pub struct ZneArgs {
    #[arg(long)]
    ham: PathBuf,
    /// Noise model JSON.
    #[arg(long)]
    noise: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    shots: u64,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value = "6,12,18")]
    cnot_counts: String,
    #[arg(long, value_enum, default_value_t = ZneModeArg::FixedAngles)]
    mode: ZneModeArg,
    /// Comma-separated angles for fixed-angle mode. Without them the angles
    /// are optimized on the exact backend first.
    #[arg(long, allow_hyphen_values = true)]
    params: Option<String>,
    #[command(flatten)]
    ansatz: AnsatzArgs,
    #[arg(long, default_value = "tensor")]
    mitigation: String,
    /// Result JSON destination.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Markdown,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// Directory of integral files. Defaults to the bundled benchmark set.
    #[arg(long)]
    dir: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mapping::SpinProduct)]
    mapping: Mapping,
    #[arg(long, default_value = "blocked")]
    layout: String,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Grid of `N:m` points.
    #[arg(long, default_value = "6:2,8:2,10:2,12:2,8:3,10:3,12:3")]
    grid: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Timing repetitions per point; the fastest is kept.
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Refuse grid points with more configurations than this.
    #[arg(long, default_value_t = 20_000)]
    max_configs: u128,
    /// Skip the timing-slope check.
    #[arg(long)]
    no_timing_check: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn dispatch(cmd: &Command, man: &mut RunManifest) -> CliResult<Output> {
    match cmd {
        Command::Configs(a) => configs(a, man),
        Command::Encode(a) => encode(a, man),
        Command::Diag(a) => diag(a, man),
        Command::Vqe(a) => vqe(a, man),
        Command::Scan(a) => scan(a, man),
        Command::Zne(a) => zne(a, man),
        Command::Report(a) => report(a, man),
        Command::Bench(a) => bench_cmd(a, man),
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn configs(a: &ConfigsArgs, man: &mut RunManifest) -> CliResult<Output> {
    let (n, alpha_mask, spec) = match (&a.input, a.spin_orbitals) {
        (Some(path), _) => {
            let p = inputs::load_spin_table(path, &a.space.layout, man)?;
            let spec = inputs::filter_spec(a.space.filter.as_deref(), p.n_electrons)?;
            (p.table.n_orbitals(), p.alpha_mask, spec)
        }
        (None, Some(n)) => {
            if n % 2 != 0 {
                return Err(usage("--spin-orbitals must be even"));
            }
            let layout = OrbitalLayout::parse(&a.space.layout, n / 2).usage()?;
            (n, layout.alpha_mask(), a.space.filter.clone().unwrap_or_default())
        }
        (None, None) => return Err(usage("pass --input or --spin-orbitals")),
    };
    let space = man.time("enumerate", || inputs::build_space(&spec, n, alpha_mask, a.space.mapping))?;
    man.filter = Some(spec.clone());
    let rows = space.mapping_rows();
    let mut text = format!("{} configurations on {} qubits ({spec})\n", space.len(), space.qubit_count());
    for r in &rows {
        let _ = writeln!(text, "{:>5}  {}  {}  {:?}", r.index, r.config, r.qubits, r.occupied);
    }
    let result = json!({
        "spin_orbitals": n,
        "filter": spec,
        "configurations": space.len(),
        "qubits": space.qubit_count(),
        "rows": rows,
    });
    if let Some(out) = &a.out {
        man.write(out, &pretty(&result))?;
    }
    Ok(Output {
        result,
        text,
        out_path: a.out.clone(),
    })
}

fn encode(a: &EncodeArgs, man: &mut RunManifest) -> CliResult<Output> {
    let p = inputs::load_spin_table(&a.input, &a.space.layout, man)?;
    let table = if a.no_constant { p.table.without_constant() } else { p.table };
    let (op, extra) = match a.encoding {
        Encoding::Jw => (man.time("encode", || jw_encode(&table)).map_err(error::encode)?, json!({})),
        Encoding::Qee => {
            let spec = inputs::filter_spec(a.space.filter.as_deref(), p.n_electrons)?;
            let space = inputs::build_space(&spec, table.n_orbitals(), p.alpha_mask, a.space.mapping)?;
            man.filter = Some(spec.clone());
            let enc = man.time("encode", || build_hamiltonian(&space, &table)).map_err(error::encode)?;
            let extra = json!({
                "filter": spec,
                "configurations": space.len(),
                "matrix_nonzeros": enc.matrix_nonzeros,
                "raw_terms": enc.raw_terms,
                "imaginary_residue": enc.imaginary_residue,
            });
            (enc.operator, extra)
        }
    };
    let doc = op.to_json();
    if let Some(out) = &a.out {
        man.write(out, &pretty(&to_json(&doc)))?;
    }
    let mut result = json!({
        "encoding": match a.encoding { Encoding::Qee => "qee", Encoding::Jw => "jw" },
        "qubits": op.n_qubits(),
        "terms": op.len(),
        "operator": doc,
    });
    if let (Value::Object(r), Value::Object(e)) = (&mut result, extra) {
        r.extend(e);
    }
    Ok(Output {
        result,
        text: op.to_text(a.decimals),
        out_path: a.out.clone(),
    })
}

fn ground_energy(op: &PauliOperator) -> CliResult<Option<f64>> {
    if op.n_qubits() > DENSE_LIMIT {
        return Ok(None);
    }
    Ok(diagonalize(op).map_err(error::sim)?.first().copied())
}

fn diag(a: &DiagArgs, man: &mut RunManifest) -> CliResult<Output> {
    let op = inputs::read_operator(&a.ham, man)?;
    if op.n_qubits() > DENSE_LIMIT {
        return Err(error::CliError::new(
            error::Kind::Input,
            anyhow::anyhow!("{} qubits exceeds the dense limit of {DENSE_LIMIT}", op.n_qubits()),
        ));
    }
    let ev = man.time("diagonalize", || diagonalize(&op)).map_err(error::sim)?;
    let ground = ev[0];
    let shown: Vec<f64> = ev.iter().take(a.count).copied().collect();
    let mut text = format!("ground energy: {ground:.12}\n");
    for (k, e) in shown.iter().enumerate() {
        let _ = writeln!(text, "{k:>4}  {e:.12}");
    }
    if let Some(want) = a.expect {
        if !((ground - want).abs() <= a.tol) {
            return Err(numerical(format!("ground energy {ground} differs from expected {want} by more than {}", a.tol)));
        }
    }
    Ok(Output {
        result: json!({ "qubits": op.n_qubits(), "ground_energy": ground, "eigenvalues": shown }),
        text,
        out_path: None,
    })
}

fn vqe(a: &VqeArgs, man: &mut RunManifest) -> CliResult<Output> {
    let op = inputs::read_operator(&a.ham, man)?;
    let mitigation = inputs::parse_mitigation(&a.mitigation)?;
    let backend = inputs::parse_backend(&a.backend, mitigation, man)?;
    let n = op.n_qubits();
    let spec = match a.cnot_count {
        Some(c) => AnsatzSpec::from_cnot_count(n, a.ansatz.reps, c).map_err(error::vqe)?,
        None => AnsatzSpec::new(n, a.ansatz.reps),
    };
    let opt = a.ansatz.optimizer();
    man.seeds.push(opt.seed);
    let r = man.time("minimize", || minimize(&op, &spec, &opt, &backend)).map_err(error::vqe)?;
    let exact = ground_energy(&op)?;
    let mut text = format!("VQE energy: {:.12}\n", r.best_energy);
    if let Some(e) = exact {
        let _ = writeln!(text, "exact:      {e:.12}\nerror:      {:.3e}", r.best_energy - e);
    }
    let _ = writeln!(text, "evaluations: {} over {} start(s), {} CNOTs", r.evaluations, r.starts, spec.cnot_count());
    let result = json!({
        "qubits": n,
        "reps": spec.reps,
        "cnots": spec.cnot_count(),
        "backend": a.backend,
        "exact": exact,
        "vqe": r,
    });
    if let Some(out) = &a.out {
        man.write(out, &pretty(&result))?;
    }
    Ok(Output {
        result,
        text,
        out_path: a.out.clone(),
    })
}

fn scan(a: &ScanArgs, man: &mut RunManifest) -> CliResult<Output> {
    let mut points = Vec::new();
    let mut spec_used = None;
    for path in &a.inputs {
        let p = inputs::load_spin_table(path, &a.space.layout, man)?;
        let d = inputs::distance_of(path, p.metadata.as_ref())
            .ok_or_else(|| usage(format!("{}: no bond length in metadata or file name", path.display())))?;
        let table = if a.no_constant { p.table.without_constant() } else { p.table };
        let spec = inputs::filter_spec(a.space.filter.as_deref(), p.n_electrons)?;
        let space = inputs::build_space(&spec, table.n_orbitals(), p.alpha_mask, a.space.mapping)?;
        let enc = man.time("encode", || build_hamiltonian(&space, &table)).map_err(error::encode)?;
        spec_used.get_or_insert(spec);
        points.push((d, enc.operator));
    }
    man.filter = spec_used;
    points.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = points[0].1.n_qubits();
    if points.iter().any(|p| p.1.n_qubits() != n) {
        return Err(usage("all geometries must encode to the same qubit count"));
    }
    let mitigation = inputs::parse_mitigation(&a.mitigation)?;
    let backend = inputs::parse_backend(&a.backend, mitigation, man)?;
    let opt = a.ansatz.optimizer();
    man.seeds.push(opt.seed);
    let spec = AnsatzSpec::new(n, a.ansatz.reps);
    let res = man.time("minimize", || surface_scan(&points, &spec, &opt, &backend)).map_err(error::vqe)?;
    let csv = scan_csv(&res);
    if let Some(out) = &a.out {
        man.write(out, &csv)?;
    }
    if let Some(path) = &a.plot {
        let mut series = vec![Series {
            name: "VQE".into(),
            points: res.iter().map(|p| (p.distance, p.energy)).collect(),
            errors: None,
            line: false,
            color: "#d62728",
        }];
        if res.iter().all(|p| p.exact.is_some()) {
            series.insert(
                0,
                Series {
                    name: "exact".into(),
                    points: res.iter().map(|p| (p.distance, p.exact.unwrap())).collect(),
                    errors: None,
                    line: true,
                    color: "#1f77b4",
                },
            );
        }
        man.write(path, &chart("Potential energy surface", "bond length (Å)", "energy (Ha)", &series))?;
    }
    Ok(Output {
        result: json!({ "qubits": n, "points": res }),
        text: csv,
        out_path: a.out.clone(),
    })
}

fn parse_params(s: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| usage(format!("angle {t:?}: {e}"))))
        .collect()
}

fn zne(a: &ZneArgs, man: &mut RunManifest) -> CliResult<Output> {
    let op = inputs::read_operator(&a.ham, man)?;
    let model = inputs::read_noise(&a.noise, man)?;
    let mitigation = inputs::parse_mitigation(&a.mitigation)?;
    let counts = inputs::parse_counts(&a.cnot_counts)?;
    let n = op.n_qubits();
    let opt = a.ansatz.optimizer();
    man.seeds.push(opt.seed);
    let mode = match a.mode {
        ZneModeArg::FullVqe => ZneMode::FullVqe { optimizer: opt.clone() },
        ZneModeArg::FixedAngles => {
            let params = match &a.params {
                Some(s) => parse_params(s)?,
                None => {
                    let spec = AnsatzSpec::new(n, a.ansatz.reps);
                    man.time("preoptimize", || minimize(&op, &spec, &opt, &Backend::Exact))
                        .map_err(error::vqe)?
                        .best_params
                }
            };
            ZneMode::FixedAngles { params }
        }
    };
    let cfg = ZneConfig {
        n_qubits: n,
        reps: a.ansatz.reps,
        cnot_counts: counts,
        shots: a.shots,
        repeats: a.repeats,
        mitigation,
        mode: mode.clone(),
        seed: opt.seed,
    };
    let run = man.time("zne", || zne_pipeline(&op, &model, &cfg)).map_err(error::mitigation)?;
    let exact = ground_energy(&op)?;
    let mut text = String::from("cnots  energy            sigma\n");
    for p in &run.points {
        let _ = writeln!(text, "{:>5}  {:.10}  {:.3e}", p.cnots, p.energy, p.sigma);
    }
    let _ = writeln!(text, "extrapolated: {:.10} ± {:.3e}", run.fit.intercept, run.fit.error_bar);
    if let Some(e) = exact {
        let _ = writeln!(text, "exact:        {e:.10}");
    }
    let result = json!({
        "qubits": n,
        "shots": a.shots,
        "repeats": a.repeats,
        "mode": mode,
        "exact": exact,
        "run": run,
    });
    if let Some(out) = &a.out {
        man.write(out, &pretty(&result))?;
    }
    if let Some(path) = &a.csv {
        let mut csv = String::from("cnots,energy,sigma\n");
        for p in &run.points {
            let _ = writeln!(csv, "{},{:.17e},{:.17e}", p.cnots, p.energy, p.sigma);
        }
        man.write(path, &csv)?;
    }
    if let Some(path) = &a.plot {
        let top = run.points.iter().map(|p| p.cnots).fold(0.0, f64::max);
        let mut series = vec![
            Series {
                name: "measured".into(),
                points: run.points.iter().map(|p| (p.cnots, p.energy)).collect(),
                errors: Some(run.points.iter().map(|p| p.sigma).collect()),
                line: false,
                color: "#d62728",
            },
            Series {
                name: "fit".into(),
                points: vec![(0.0, run.fit.intercept), (top, run.fit.intercept + run.fit.slope * top)],
                errors: None,
                line: true,
                color: "#1f77b4",
            },
            Series {
                name: "extrapolated".into(),
                points: vec![(0.0, run.fit.intercept)],
                errors: Some(vec![run.fit.error_bar]),
                line: false,
                color: "#2ca02c",
            },
        ];
        if let Some(e) = exact {
            series.push(Series {
                name: "exact".into(),
                points: vec![(0.0, e), (top, e)],
                errors: None,
                line: true,
                color: "#7f7f7f",
            });
        }
        man.write(path, &chart("Zero-noise extrapolation", "CNOT count", "energy (Ha)", &series))?;
    }
    Ok(Output {
        result,
        text,
        out_path: a.out.clone(),
    })
}

fn integral_files(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| anyhow::anyhow!("{}: {e}", dir.display()))
        .input()?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("fcidump" | "json")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(error::CliError::new(error::Kind::Input, anyhow::anyhow!("no integral files in {}", dir.display())));
    }
    Ok(files)
}

fn report(a: &ReportArgs, man: &mut RunManifest) -> CliResult<Output> {
    let dir = a.dir.clone().unwrap_or_else(|| fixture_root().join("table3"));
    let mut rows = Vec::new();
    for path in integral_files(&dir)? {
        let p = inputs::load_spin_table(&path, &a.layout, man)?;
        let spec = inputs::filter_spec(None, p.n_electrons)?;
        let space = inputs::build_space(&spec, p.table.n_orbitals(), p.alpha_mask, a.mapping)?;
        let r = man.time("encode", || term_count_report(&p.table, &space)).map_err(error::encode)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
        rows.push(json!({
            "name": name,
            "spin_orbitals": p.table.n_orbitals(),
            "electrons": p.n_electrons,
            "jw_qubits": r.jw_qubits,
            "jw_terms": r.jw_terms,
            "qee_qubits": r.qee_qubits,
            "qee_terms": r.qee_terms,
            "configurations": r.configurations,
        }));
    }
    let cols = ["name", "spin_orbitals", "electrons", "jw_qubits", "jw_terms", "qee_qubits", "qee_terms", "configurations"];
    let cell = |r: &Value, c: &str| match &r[c] {
        Value::String(s) => s.clone(),
        v => v.to_string(),
    };
    let mut text = String::new();
    match a.format {
        Format::Csv => {
            text.push_str(&cols.join(","));
            text.push('\n');
            for r in &rows {
                text.push_str(&cols.iter().map(|c| cell(r, c)).collect::<Vec<_>>().join(","));
                text.push('\n');
            }
        }
        Format::Markdown => {
            let _ = writeln!(text, "| {} |", cols.join(" | "));
            let _ = writeln!(text, "|{}", "---|".repeat(cols.len()));
            for r in &rows {
                let _ = writeln!(text, "| {} |", cols.iter().map(|c| cell(r, c)).collect::<Vec<_>>().join(" | "));
            }
        }
    }
    if let Some(out) = &a.out {
        man.write(out, &text)?;
    }
    Ok(Output {
        result: json!({ "rows": rows }),
        text,
        out_path: a.out.clone(),
    })
}

fn bench_cmd(a: &BenchArgs, man: &mut RunManifest) -> CliResult<Output> {
    let grid = bench::parse_grid(&a.grid)?;
    man.seeds.push(a.seed);
    let mut rows = Vec::new();
    for &(n, m) in &grid {
        rows.push(man.time("bench", || bench::run_point(n, m, a.seed, a.repeats, a.max_configs))?);
    }
    let slopes = bench::slopes(&rows);
    let mut text = String::from("    N   m  configs  qubits      nnz   raw_terms  excitation_terms       bound   merged   seconds\n");
    for r in &rows {
        let _ = writeln!(
            text,
            "{:>5} {:>3} {:>8} {:>7} {:>8} {:>11} {:>17} {:>11.3e} {:>8} {:>9.2e}",
            r.n, r.m, r.configurations, r.qubits, r.matrix_nonzeros, r.raw_terms, r.excitation_raw_terms, r.excitation_bound, r.merged_terms, r.seconds
        );
    }
    for s in &slopes {
        let _ = writeln!(text, "m={}: time ~ N^{:.2} (limit {:.1})", s.m, s.slope, s.limit);
    }
    let result = json!({ "rows": rows, "slopes": slopes });
    if let Some(out) = &a.out {
        man.write(out, &pretty(&result))?;
    }
    for r in &rows {
        if r.raw_terms != r.analytic_raw_terms {
            return Err(numerical(format!(
                "N={} m={}: {} raw terms, expected {}",
                r.n, r.m, r.raw_terms, r.analytic_raw_terms
            )));
        }
        if r.excitation_raw_terms as f64 > r.excitation_bound {
            return Err(numerical(format!("N={} m={}: excitation expansion exceeds its bound", r.n, r.m)));
        }
    }
    if !a.no_timing_check {
        if let Some(s) = slopes.iter().find(|s| s.slope > s.limit) {
            return Err(numerical(format!("m={}: compile time grows as N^{:.2}, above N^{:.1}", s.m, s.slope, s.limit)));
        }
    }
    Ok(Output {
        result,
        text,
        out_path: a.out.clone(),
    })
}
