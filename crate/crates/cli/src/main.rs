//! `qee`: compile molecular Hamiltonians with the qubit-efficient encoding,
//! diagonalize them, and run (noisy) VQE experiments.

mod bench;
mod commands;
mod error;
mod inputs;
mod manifest;
mod plot;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::error::CliError;
use crate::manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "qee", version, about = "Qubit-efficient encoding toolkit")]
struct Cli {
    /// Print `{"result", "manifest"}` as JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for the parallel kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Where to write the run manifest. Defaults to `<out>.manifest.json`
    /// when the command has `--out`.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    #[command(subcommand)]
    command: commands::Command,
}

fn command_name(c: &commands::Command) -> &'static str {
    use commands::Command::*;
    match c {
        Configs(_) => "configs",
        Encode(_) => "encode",
        Diag(_) => "diag",
        Vqe(_) => "vqe",
        Scan(_) => "scan",
        Zne(_) => "zne",
        Report(_) => "report",
        Bench(_) => "bench",
    }
}

fn setup_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(error::usage("--threads must be at least 1"));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| error::usage(format!("thread pool: {e}")))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    setup_threads(cli.threads)?;
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut man = RunManifest::new(command_name(&cli.command), args, cli.threads);
    let out = commands::dispatch(&cli.command, &mut man)?;
    let manifest_path = cli.manifest.clone().or_else(|| {
        out.out_path.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".manifest.json");
            PathBuf::from(s)
        })
    });
    if let Some(path) = &manifest_path {
        man.outputs.push(path.clone());
        let text = serde_json::to_string_pretty(&man).expect("manifest serializes");
        std::fs::write(path, text + "\n").map_err(|e| CliError::new(error::Kind::Input, anyhow::anyhow!("{}: {e}", path.display())))?;
    }
    let text = if cli.json {
        let doc = serde_json::json!({ "result": out.result, "manifest": man });
        serde_json::to_string_pretty(&doc).expect("result serializes") + "\n"
    } else {
        out.text
    };
    // a closed pipe (`qee ... | head`) is not an error
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let json = cli.json;
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if json {
                let doc = serde_json::json!({ "error": { "kind": e.label(), "code": e.code(), "message": e.to_string() } });
                eprintln!("{}", serde_json::to_string_pretty(&doc).unwrap());
            } else {
                eprintln!("error[{}]: {e}", e.label());
            }
            ExitCode::from(e.code() as u8)
        }
    }
}
