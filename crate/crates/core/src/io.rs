//! File formats: binary range-Doppler maps with JSON axis sidecars, peak
//! list CSVs, and atomic JSON report writing.
//!
//! The map container is a 16-byte header (magic `BISP`, format version,
//! row and column counts, all little-endian u32) followed by the row-major
//! matrix as little-endian f64. Rows are range bins, columns Doppler bins;
//! the physical axes travel in the sidecar next to the matrix file.

use crate::error::{Error, Result};
use crate::radar::{Peak, Periodogram};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

const BISP_MAGIC: &[u8; 4] = b"BISP";
const BISP_VERSION: u32 = 1;

/// Write bytes so readers never observe a partial file: write to a sibling
/// temp file, then rename over the target.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_sibling(path)?;
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn temp_sibling(path: &Path) -> Result<PathBuf> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::config(format!("not a file path: {}", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(".tmp");
    Ok(path.with_file_name(tmp_name))
}

/// Serialize a matrix into the binary map container.
pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    let mut bytes = Vec::with_capacity(16 + 8 * rows * cols);
    bytes.extend_from_slice(BISP_MAGIC);
    bytes.extend_from_slice(&BISP_VERSION.to_le_bytes());
    bytes.extend_from_slice(&u32::try_from(rows).map_err(oversize)?.to_le_bytes());
    bytes.extend_from_slice(&u32::try_from(cols).map_err(oversize)?.to_le_bytes());
    for r in 0..rows {
        for c in 0..cols {
            bytes.extend_from_slice(&m[[r, c]].to_le_bytes());
        }
    }
    write_atomic(path, &bytes)
}

fn oversize(_: std::num::TryFromIntError) -> Error {
    Error::dimension("matrix dimension exceeds u32")
}

/// Read a matrix back from the binary map container.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 16 || &bytes[..4] != BISP_MAGIC {
        return Err(Error::config(format!("{}: not a BISP file", path.display())));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4 bytes"));
    let version = word(4);
    if version != BISP_VERSION {
        return Err(Error::config(format!(
            "{}: unsupported BISP version {version}",
            path.display()
        )));
    }
    let rows = word(8) as usize;
    let cols = word(12) as usize;
    let expected = 16 + 8 * rows * cols;
    if bytes.len() != expected {
        return Err(Error::dimension(format!(
            "{}: {} bytes for a {rows}x{cols} map, expected {expected}",
            path.display(),
            bytes.len()
        )));
    }
    let mut m = Array2::zeros((rows, cols));
    let mut off = 16;
    for r in 0..rows {
        for c in 0..cols {
            m[[r, c]] = f64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"));
            off += 8;
        }
    }
    Ok(m)
}

/// Physical axes of a stored map.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MapAxes {
    pub rows: usize,
    pub cols: usize,
    pub range_step_m: f64,
    pub doppler_step_hz: f64,
    pub doppler_center_bin: usize,
    pub range_axis_m: Vec<f64>,
    pub doppler_axis_hz: Vec<f64>,
}

impl MapAxes {
    pub fn of(pg: &Periodogram) -> MapAxes {
        let (rows, cols) = pg.p.dim();
        MapAxes {
            rows,
            cols,
            range_step_m: pg.range_step_m,
            doppler_step_hz: pg.doppler_step_hz,
            doppler_center_bin: pg.doppler_center_bin,
            range_axis_m: (0..rows).map(|r| r as f64 * pg.range_step_m).collect(),
            doppler_axis_hz: (0..cols)
                .map(|c| (c as f64 - pg.doppler_center_bin as f64) * pg.doppler_step_hz)
                .collect(),
        }
    }
}

/// Write `<stem>.bisp` and `<stem>.axes.json` for a range-Doppler map.
pub fn write_periodogram(stem: &Path, pg: &Periodogram) -> Result<()> {
    write_matrix(&stem.with_extension("bisp"), &pg.p)?;
    write_json(&stem.with_extension("axes.json"), &MapAxes::of(pg))
}

/// Read a map written by [`write_periodogram`].
pub fn read_periodogram(stem: &Path) -> Result<Periodogram> {
    let p = read_matrix(&stem.with_extension("bisp"))?;
    let axes: MapAxes =
        serde_json::from_str(&fs::read_to_string(stem.with_extension("axes.json"))?)?;
    if p.dim() != (axes.rows, axes.cols) {
        return Err(Error::dimension(format!(
            "map is {:?} but sidecar says {}x{}",
            p.dim(),
            axes.rows,
            axes.cols
        )));
    }
    Ok(Periodogram {
        p,
        range_step_m: axes.range_step_m,
        doppler_step_hz: axes.doppler_step_hz,
        doppler_center_bin: axes.doppler_center_bin,
    })
}

/// Write detected peaks as CSV, one row per return.
pub fn write_peaks_csv(path: &Path, peaks: &[Peak]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for p in peaks {
        w.serialize(p)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
    write_atomic(path, &bytes)
}

/// Read a peak list CSV written by [`write_peaks_csv`].
pub fn read_peaks_csv(path: &Path) -> Result<Vec<Peak>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for rec in r.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}

/// Pretty-printed JSON report, written atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}
