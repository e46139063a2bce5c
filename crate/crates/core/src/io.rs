//! File formats.
//!
//! * series CSV: header `n,value`, one row per sample
//! * weight CSV: header `index,value,is_significant`
//! * sweep CSV: header `N,k,M,success_rate,trials`
//! * ensemble container: magic `NPLEX1`, then little-endian `u64` fields
//!   `M`, `N`, signal-dominant count, the signal-dominant indices, seed
//!   count, the seeds, and the noise-column variance as `f64`, followed
//!   by the `M x N` matrix as row-major little-endian `f64`.
//!
//! Floating point text uses 17 significant digits so values round-trip.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::analysis::SweepResult;
use crate::ensemble::{Ensemble, WeightVector};
use crate::{Error, Result};

pub const ENSEMBLE_MAGIC: &[u8; 6] = b"NPLEX1";

/// Text form of a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_series<W: Write>(mut w: W, values: &[f64]) -> Result<()> {
    writeln!(w, "n,value")?;
    for (n, v) in values.iter().enumerate() {
        writeln!(w, "{n},{}", fmt_f64(*v))?;
    }
    Ok(())
}

pub fn read_series<R: Read>(r: R) -> Result<Vec<f64>> {
    let mut lines = BufReader::new(r).lines();
    match lines.next().transpose()? {
        Some(h) if h.trim() == "n,value" => {}
        other => return Err(Error::Format(format!("expected header `n,value`, found {other:?}"))),
    }
    let mut out = Vec::new();
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (n, v) = line.split_once(',').ok_or_else(|| Error::Format(format!("row {row}: missing comma")))?;
        if n.trim().parse::<usize>().ok() != Some(out.len()) {
            return Err(Error::Format(format!("row {row}: expected index {}", out.len())));
        }
        out.push(v.trim().parse().map_err(|e| Error::Format(format!("row {row}: {e}")))?);
    }
    Ok(out)
}

pub fn save_series(path: &Path, values: &[f64]) -> Result<()> {
    write_series(BufWriter::new(std::fs::File::create(path)?), values)
}

pub fn write_weights<W: Write>(mut w: W, x: &WeightVector) -> Result<()> {
    let mut significant = vec![false; x.len()];
    for &i in &x.significant_support {
        significant[i] = true;
    }
    writeln!(w, "index,value,is_significant")?;
    for (i, v) in x.values.iter().enumerate() {
        writeln!(w, "{i},{},{}", fmt_f64(*v), significant[i])?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut w: W, sweep: &SweepResult) -> Result<()> {
    writeln!(w, "N,k,M,success_rate,trials")?;
    for p in &sweep.points {
        writeln!(w, "{},{},{},{},{}", p.neurons, p.multiplexed, p.measurements, fmt_f64(p.success_rate), sweep.trials)?;
    }
    Ok(())
}

/// Matrix as CSV with header `row,col_0,col_1,...`.
pub fn write_ensemble_csv<W: Write>(mut w: W, ensemble: &Ensemble) -> Result<()> {
    let a = ensemble.matrix();
    write!(w, "row")?;
    for j in 0..a.ncols() {
        write!(w, ",col_{j}")?;
    }
    writeln!(w)?;
    for i in 0..a.nrows() {
        write!(w, "{i}")?;
        for j in 0..a.ncols() {
            write!(w, ",{}", fmt_f64(a[(i, j)]))?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_ensemble<W: Write>(mut w: W, ensemble: &Ensemble) -> Result<()> {
    let a = ensemble.matrix();
    let u = |w: &mut W, v: u64| w.write_all(&v.to_le_bytes());
    w.write_all(ENSEMBLE_MAGIC)?;
    u(&mut w, a.nrows() as u64)?;
    u(&mut w, a.ncols() as u64)?;
    u(&mut w, ensemble.signal_indices().len() as u64)?;
    for &i in ensemble.signal_indices() {
        u(&mut w, i as u64)?;
    }
    u(&mut w, ensemble.seeds().len() as u64)?;
    for &s in ensemble.seeds() {
        u(&mut w, s)?;
    }
    w.write_all(&ensemble.noise_column_variance().to_le_bytes())?;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            w.write_all(&a[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

/// Header fields of an ensemble container.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleHeader {
    pub measurements: usize,
    pub neurons: usize,
    pub signal_indices: Vec<usize>,
    pub seeds: Vec<u64>,
    pub noise_column_variance: f64,
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_len<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = read_u64(r)?;
    // guards allocation on corrupt input
    if v > 1 << 32 {
        return Err(Error::Format(format!("implausible {what}: {v}")));
    }
    Ok(v as usize)
}

pub fn read_ensemble_header<R: Read>(r: &mut R) -> Result<EnsembleHeader> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic)?;
    if &magic != ENSEMBLE_MAGIC {
        return Err(Error::Format("not an NPLEX1 ensemble".into()));
    }
    let measurements = read_len(r, "row count")?;
    let neurons = read_len(r, "column count")?;
    let count = read_len(r, "signal count")?;
    let signal_indices = (0..count).map(|_| read_len(r, "signal index")).collect::<Result<_>>()?;
    let seeds_len = read_len(r, "seed count")?;
    let seeds = (0..seeds_len).map(|_| read_u64(r)).collect::<Result<_>>()?;
    let noise_column_variance = f64::from_bits(read_u64(r)?);
    Ok(EnsembleHeader { measurements, neurons, signal_indices, seeds, noise_column_variance })
}

pub fn read_ensemble<R: Read>(r: R) -> Result<Ensemble> {
    let mut r = BufReader::new(r);
    let h = read_ensemble_header(&mut r)?;
    let mut row_major = vec![0.0; h.measurements * h.neurons];
    let mut b = [0u8; 8];
    for v in row_major.iter_mut() {
        r.read_exact(&mut b)?;
        *v = f64::from_le_bytes(b);
    }
    let matrix = DMatrix::from_row_slice(h.measurements, h.neurons, &row_major);
    Ensemble::from_parts(matrix, h.signal_indices, h.noise_column_variance, h.seeds)
}

pub fn save_ensemble(path: &Path, ensemble: &Ensemble) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_ensemble(&mut w, ensemble)?;
    w.flush()?;
    Ok(())
}

pub fn load_ensemble(path: &Path) -> Result<Ensemble> {
    read_ensemble(std::fs::File::open(path)?)
}
