//! File formats: JSON documents, cloud CSV with a provenance sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{Atom, Provenance, WeightedCloud};
use crate::sphere::{Chart, SpherePoint};

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Invalid(format!("{}: {e}", path.display()))
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Invalid(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, to_json_string(value)?).map_err(|e| io_err(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| io_err(path, e))
}

#[derive(Serialize, Deserialize)]
struct CsvAtom {
    re: f64,
    im: f64,
    chart: String,
    weight: f64,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    generation: usize,
    atoms: usize,
    provenance: Provenance,
}

/// Path of the provenance sidecar of a cloud CSV.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

pub fn cloud_to_csv(cloud: &WeightedCloud) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    for a in &cloud.atoms {
        let v = a.point.value();
        w.serialize(CsvAtom {
            re: v.re,
            im: v.im,
            chart: a.point.chart().name().to_string(),
            weight: a.weight,
        })
        .map_err(|e| Error::Invalid(e.to_string()))?;
    }
    if cloud.atoms.is_empty() {
        w.write_record(["re", "im", "chart", "weight"]).map_err(|e| Error::Invalid(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
}

fn parse_chart(s: &str) -> Result<Chart> {
    [Chart::Standard, Chart::Reciprocal]
        .into_iter()
        .find(|c| c.name() == s)
        .ok_or_else(|| Error::Invalid(format!("unknown chart {s:?}")))
}

pub fn atoms_from_csv(text: &str) -> Result<Vec<Atom>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let headers = r.headers().map_err(|e| Error::Invalid(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["re", "im", "chart", "weight"] {
        return Err(Error::Invalid("cloud CSV header must be re,im,chart,weight".into()));
    }
    r.deserialize::<CsvAtom>()
        .map(|row| {
            let row = row.map_err(|e| Error::Invalid(e.to_string()))?;
            Ok(Atom {
                point: SpherePoint::from_chart(Complex64::new(row.re, row.im), parse_chart(&row.chart)?),
                weight: row.weight,
            })
        })
        .collect()
}

/// Writes `path` and its sidecar.
pub fn write_cloud(path: &Path, cloud: &WeightedCloud) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, cloud_to_csv(cloud)?).map_err(|e| io_err(path, e))?;
    write_json(
        &sidecar_path(path),
        &Sidecar {
            generation: cloud.generation,
            atoms: cloud.atoms.len(),
            provenance: cloud.provenance.clone(),
        },
    )
}

pub fn read_cloud(path: &Path) -> Result<WeightedCloud> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let atoms = atoms_from_csv(&text)?;
    let side: Sidecar = read_json(&sidecar_path(path))?;
    if side.atoms != atoms.len() {
        return Err(Error::Invalid(format!(
            "sidecar lists {} atoms, CSV has {}",
            side.atoms,
            atoms.len()
        )));
    }
    WeightedCloud::new(atoms, side.generation, side.provenance)
}
