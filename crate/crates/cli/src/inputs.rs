use std::path::Path;

use qee_core::configspace::{ConfigSpace, SymmetryFilter};
use qee_core::fixtures::load_integrals;
use qee_core::integrals::{IntegralTable, OrbitalBasis, OrbitalLayout};
use qee_core::pauli::{OperatorJson, PauliOperator};
use qee_core::simulator::{Backend, Mitigation, NoiseModel};

use crate::error::{usage, Classify, CliResult};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mapping {
    /// k-th configuration on basis state k.
    Ascending,
    /// Separate ascending registers for the two spin sectors.
    SpinProduct,
}

/// Spin-orbital integrals plus what is needed to build a space.
pub struct Prepared {
    pub table: IntegralTable,
    pub alpha_mask: u128,
    pub n_electrons: Option<usize>,
    pub metadata: Option<serde_json::Value>,
}

pub fn load_spin_table(path: &Path, layout: &str, man: &mut RunManifest) -> CliResult<Prepared> {
    let loaded = man.time("load", || load_integrals(path)).input()?;
    man.inputs.push(crate::manifest::InputFile {
        path: path.to_path_buf(),
        sha256: loaded.sha256.clone(),
    });
    let t = &loaded.table;
    let metadata = t.metadata().cloned();
    let (table, layout) = match t.basis() {
        OrbitalBasis::Spatial => {
            let layout = OrbitalLayout::parse(layout, t.n_orbitals()).usage()?;
            (t.to_spin_orbitals(&layout).input()?, layout)
        }
        OrbitalBasis::SpinOrbital => {
            let n = t.n_orbitals();
            if n % 2 != 0 {
                return Err(usage("spin-orbital tables need an even orbital count for a spin layout"));
            }
            (t.clone(), OrbitalLayout::parse(layout, n / 2).usage()?)
        }
    };
    Ok(Prepared {
        table,
        alpha_mask: layout.alpha_mask(),
        n_electrons: loaded.n_electrons,
        metadata,
    })
}

/// Default filter: particle number, plus `Sz = 0` for an even count.
pub fn filter_spec(explicit: Option<&str>, n_electrons: Option<usize>) -> CliResult<String> {
    match (explicit, n_electrons) {
        (Some(s), _) => Ok(s.to_string()),
        (None, Some(m)) if m % 2 == 0 => Ok(format!("m={m};sz={},{}", m / 2, m / 2)),
        (None, Some(m)) => Ok(format!("m={m}")),
        (None, None) => Err(usage("input has no electron count; pass --filter")),
    }
}

pub fn build_space(spec: &str, n_spin_orbitals: usize, alpha_mask: u128, mapping: Mapping) -> CliResult<ConfigSpace> {
    let filter = SymmetryFilter::parse(spec, n_spin_orbitals, alpha_mask).usage()?;
    match mapping {
        Mapping::Ascending => ConfigSpace::enumerate(&filter).input(),
        Mapping::SpinProduct => ConfigSpace::spin_product(&filter).usage(),
    }
}

pub fn read_operator(path: &Path, man: &mut RunManifest) -> CliResult<PauliOperator> {
    let bytes = man.input(path)?;
    let doc: OperatorJson = serde_json::from_slice(&bytes)
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
        .input()?;
    PauliOperator::from_json(&doc).input()
}

pub fn read_noise(path: &Path, man: &mut RunManifest) -> CliResult<NoiseModel> {
    let bytes = man.input(path)?;
    NoiseModel::from_json(&String::from_utf8_lossy(&bytes))
        .map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))
        .input()
}

pub fn parse_mitigation(s: &str) -> CliResult<Mitigation> {
    match s {
        "none" => Ok(Mitigation::None),
        "tensor" => Ok(Mitigation::TensorProduct),
        _ => match s.strip_prefix("full:").map(str::parse::<u64>) {
            Some(Ok(shots)) if shots > 0 => Ok(Mitigation::Full { shots }),
            _ => Err(usage(format!("mitigation must be none, tensor or full:SHOTS, got {s:?}"))),
        },
    }
}

/// `exact`, `shots:N` or `noisy:MODEL.json:N`.
pub fn parse_backend(s: &str, mitigation: Mitigation, man: &mut RunManifest) -> CliResult<Backend> {
    let shots = |t: &str| -> CliResult<u64> {
        match t.parse::<u64>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(usage(format!("invalid shot count {t:?}"))),
        }
    };
    if s == "exact" {
        return Ok(Backend::Exact);
    }
    if let Some(n) = s.strip_prefix("shots:") {
        return Ok(Backend::Shots { shots: shots(n)? });
    }
    if let Some(rest) = s.strip_prefix("noisy:") {
        let (path, n) = rest
            .rsplit_once(':')
            .ok_or_else(|| usage("noisy backend is noisy:MODEL.json:SHOTS"))?;
        let shots = shots(n)?;
        let model = read_noise(Path::new(path), man)?;
        return Ok(Backend::Noisy { model, shots, mitigation });
    }
    Err(usage(format!("unknown backend {s:?}")))
}

/// Bond length from metadata, else the last `_`-separated number of the
/// file stem.
pub fn distance_of(path: &Path, metadata: Option<&serde_json::Value>) -> Option<f64> {
    metadata
        .and_then(|m| m.get("bond_length_angstrom"))
        .and_then(|v| v.as_f64())
        .or_else(|| {
            path.file_stem()?
                .to_str()?
                .rsplit('_')
                .next()?
                .parse()
                .ok()
        })
}

pub fn parse_counts(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|e| usage(format!("CNOT count {t:?}: {e}"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_filters() {
        assert_eq!(filter_spec(None, Some(2)).unwrap(), "m=2;sz=1,1");
        assert_eq!(filter_spec(None, Some(3)).unwrap(), "m=3");
        assert_eq!(filter_spec(Some("m=2"), Some(4)).unwrap(), "m=2");
        assert!(filter_spec(None, None).is_err());
    }

    #[test]
    fn backends_and_mitigation() {
        let mut man = RunManifest::new("t", vec![], None);
        assert_eq!(parse_backend("exact", Mitigation::None, &mut man).unwrap(), Backend::Exact);
        assert_eq!(parse_backend("shots:100", Mitigation::None, &mut man).unwrap(), Backend::Shots { shots: 100 });
        assert!(parse_backend("shots:0", Mitigation::None, &mut man).is_err());
        assert!(parse_backend("noisy:model.json", Mitigation::None, &mut man).is_err());
        assert_eq!(parse_mitigation("full:500").unwrap(), Mitigation::Full { shots: 500 });
        assert!(parse_mitigation("full").is_err());
    }

    #[test]
    fn distances() {
        assert_eq!(distance_of(Path::new("a/h2_631g_0.745.json"), None), Some(0.745));
        let meta = serde_json::json!({"bond_length_angstrom": 1.5});
        assert_eq!(distance_of(Path::new("x.json"), Some(&meta)), Some(1.5));
        assert_eq!(distance_of(Path::new("x.json"), None), None);
        assert_eq!(parse_counts("6, 12,18").unwrap(), vec![6, 12, 18]);
    }
}
