//! Matrix bundles: `G.mtx`, `C.mtx`, `B.mtx`, `L.mtx` plus `manifest.txt`.
//!
//! The manifest is `key=value` per line. Descriptor bundles carry
//! `kind=descriptor`, `n`, `m` and `ports`; reduced models carry
//! `kind=rom`, `r`, `p`, `q`, `provenance`, `iterations`, `apriori_bound`
//! and the retained `hsv` list.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::bt::{HsvSpectrum, Provenance, Rom};
use crate::error::{MorError, Result};
use crate::mtx::{read_matrix_market, write_coordinate};
use crate::system::{DescriptorSystem, LinearModel};

pub const MANIFEST: &str = "manifest.txt";
const MATRIX_FILES: [&str; 4] = ["G.mtx", "C.mtx", "B.mtx", "L.mtx"];

/// A model loaded from disk.
#[derive(Debug, Clone)]
pub enum Model {
    Full(DescriptorSystem),
    Reduced(Rom),
}

impl Model {
    pub fn as_linear(&self) -> &(dyn LinearModel + Sync) {
        match self {
            Model::Full(s) => s,
            Model::Reduced(r) => r,
        }
    }

    pub fn port_names(&self) -> &[String] {
        match self {
            Model::Full(s) => &s.port_names,
            Model::Reduced(r) => &r.port_names,
        }
    }
}

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| MorError::validation(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_matrices(dir: &Path, mats: [&DMatrix<f64>; 4], manifest: String) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (name, m) in MATRIX_FILES.iter().zip(mats) {
        write_atomic(&dir.join(name), write_coordinate(m).as_bytes())?;
    }
    write_atomic(&dir.join(MANIFEST), manifest.as_bytes())
}

pub fn descriptor_manifest(sys: &DescriptorSystem) -> String {
    format!(
        "kind=descriptor\nn={}\nm={}\nports={}\n",
        sys.n,
        sys.m,
        sys.port_names.join(",")
    )
}

pub fn rom_manifest(rom: &Rom) -> String {
    let (provenance, iterations) = match rom.provenance {
        Provenance::Dense => ("dense", 0),
        Provenance::Eksm { iterations } => ("eksm", iterations),
    };
    let hsv: Vec<String> = rom.retained_hsvs.sigmas().iter().map(|s| format!("{s:e}")).collect();
    format!(
        "kind=rom\nr={}\np={}\nq={}\nprovenance={provenance}\niterations={iterations}\napriori_bound={:e}\nhsv={}\nports={}\n",
        rom.order(),
        rom.b.ncols(),
        rom.l.nrows(),
        rom.apriori_bound,
        hsv.join(","),
        rom.port_names.join(",")
    )
}

pub fn write_descriptor(dir: &Path, sys: &DescriptorSystem) -> Result<()> {
    write_matrices(dir, [&sys.g, &sys.c, &sys.b, &sys.l], descriptor_manifest(sys))
}

pub fn write_rom(dir: &Path, rom: &Rom) -> Result<()> {
    write_matrices(dir, [&rom.g, &rom.c, &rom.b, &rom.l], rom_manifest(rom))
}

pub fn parse_manifest(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| MorError::Syntax {
            line: i + 1,
            message: format!("expected key=value, got {line:?}"),
        })?;
        out.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(out)
}

fn field<'a>(map: &'a BTreeMap<String, String>, key: &str) -> Result<&'a str> {
    map.get(key)
        .map(String::as_str)
        .ok_or_else(|| MorError::Format(format!("manifest lacks {key:?}")))
}

fn count(map: &BTreeMap<String, String>, key: &str) -> Result<usize> {
    let v = field(map, key)?;
    v.parse()
        .map_err(|_| MorError::Format(format!("manifest {key}={v:?} is not a count")))
}

fn list(map: &BTreeMap<String, String>, key: &str) -> Vec<String> {
    map.get(key)
        .filter(|v| !v.is_empty())
        .map(|v| v.split(',').map(|s| s.trim().to_string()).collect())
        .unwrap_or_default()
}

/// Reads a bundle directory as either a full descriptor system or a ROM.
pub fn load_model(dir: &Path) -> Result<Model> {
    let manifest = parse_manifest(&fs::read_to_string(dir.join(MANIFEST))?)?;
    let mut mats = Vec::with_capacity(4);
    for name in MATRIX_FILES {
        let text = fs::read_to_string(dir.join(name))?;
        mats.push(read_matrix_market(&text).map_err(|e| match e {
            MorError::Syntax { line, message } => MorError::Syntax {
                line,
                message: format!("{name}: {message}"),
            },
            other => other,
        })?);
    }
    let l = mats.pop().unwrap();
    let b = mats.pop().unwrap();
    let c = mats.pop().unwrap();
    let g = mats.pop().unwrap();
    let mut ports = list(&manifest, "ports");
    if ports.is_empty() {
        ports = (1..=b.ncols()).map(|i| format!("P{i}")).collect();
    }

    match manifest.get("kind").map(String::as_str).unwrap_or("descriptor") {
        "descriptor" => {
            let n = count(&manifest, "n")?;
            let m = count(&manifest, "m")?;
            Ok(Model::Full(DescriptorSystem::from_matrices(g, c, b, l, n, m, ports)?))
        }
        "rom" => {
            let r = count(&manifest, "r")?;
            if g.shape() != (r, r) || c.shape() != (r, r) || b.nrows() != r || l.ncols() != r {
                return Err(MorError::Format(format!("ROM matrices do not match r={r}")));
            }
            if ports.len() != b.ncols() {
                return Err(MorError::Format("port names do not match B".into()));
            }
            let provenance = match field(&manifest, "provenance")? {
                "dense" => Provenance::Dense,
                "eksm" => Provenance::Eksm {
                    iterations: count(&manifest, "iterations")?,
                },
                other => return Err(MorError::Format(format!("unknown provenance {other:?}"))),
            };
            let hsv = list(&manifest, "hsv")
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| MorError::Format(format!("bad hsv {s:?}"))))
                .collect::<Result<Vec<_>>>()?;
            let apriori_bound = field(&manifest, "apriori_bound")?
                .parse::<f64>()
                .map_err(|_| MorError::Format("bad apriori_bound".into()))?;
            Ok(Model::Reduced(Rom {
                g,
                c,
                b,
                l,
                retained_hsvs: HsvSpectrum::new(hsv),
                apriori_bound,
                provenance,
                port_names: ports,
            }))
        }
        other => Err(MorError::Format(format!("unknown bundle kind {other:?}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{assemble_mna, parse_netlist};

    #[test]
    fn descriptor_round_trip() {
        let nl = parse_netlist("R1 1 2 10\nL1 2 0 1n\nC1 1 0 1p\nP1 port 1\n").unwrap();
        let sys = assemble_mna(&nl).unwrap().system;
        let dir = tempfile::tempdir().unwrap();
        write_descriptor(dir.path(), &sys).unwrap();
        match load_model(dir.path()).unwrap() {
            Model::Full(back) => assert_eq!(back, sys),
            Model::Reduced(_) => panic!("expected descriptor"),
        }
    }

    #[test]
    fn rom_round_trip() {
        let rom = Rom {
            g: DMatrix::from_row_slice(2, 2, &[-1.0, 0.25, -0.25, -3.0]),
            c: DMatrix::identity(2, 2),
            b: DMatrix::from_row_slice(2, 1, &[1.0, 0.5]),
            l: DMatrix::from_row_slice(1, 2, &[1.0, -0.5]),
            retained_hsvs: HsvSpectrum::new(vec![0.5, 0.125]),
            apriori_bound: 2e-3,
            provenance: Provenance::Eksm { iterations: 4 },
            port_names: vec!["a".into()],
        };
        let dir = tempfile::tempdir().unwrap();
        write_rom(dir.path(), &rom).unwrap();
        let Model::Reduced(back) = load_model(dir.path()).unwrap() else {
            panic!("expected rom")
        };
        assert_eq!(back.g, rom.g);
        assert_eq!(back.b, rom.b);
        assert_eq!(back.retained_hsvs, rom.retained_hsvs);
        assert_eq!(back.apriori_bound, rom.apriori_bound);
        assert_eq!(back.provenance, rom.provenance);
        assert_eq!(rom_manifest(&back), rom_manifest(&rom));
    }

    #[test]
    fn manifest_errors() {
        assert!(matches!(parse_manifest("n=1\nbogus\n"), Err(MorError::Syntax { line: 2, .. })));
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_model(dir.path()), Err(MorError::Io(_))));
    }
}
