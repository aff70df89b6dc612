//! CSV output and the binary micro-state dump.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::MicroState;

pub const MICRO_MAGIC: &[u8; 4] = b"BNET";
pub const MICRO_VERSION: u32 = 1;
pub const MICRO_HEADER_LEN: usize = 16;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A CSV cell: floats in full precision, integers verbatim.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Cell::Float(x) => f.write_str(&fmt_f64(*x)),
            Cell::Int(i) => write!(f, "{i}"),
        }
    }
}

/// Writes a header line and one line per row, LF-terminated.
pub fn write_csv_rows<W: Write>(out: W, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<()> {
    let mut out = BufWriter::new(out);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::InvalidParameter(format!(
                "row has {} cells, header has {}",
                row.len(),
                header.len()
            )));
        }
        let line: Vec<String> = row.iter().map(Cell::to_string).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Column-major convenience: all columns must have the same length.
pub fn write_csv_columns<W: Write>(out: W, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    if header.len() != columns.len() {
        return Err(Error::InvalidParameter("header and column counts differ".into()));
    }
    let len = columns.first().map_or(0, |c| c.len());
    if columns.iter().any(|c| c.len() != len) {
        return Err(Error::InvalidParameter("columns have unequal lengths".into()));
    }
    write_csv_rows(out, header, (0..len).map(|i| columns.iter().map(|c| Cell::Float(c[i])).collect()))
}

pub fn save_csv_columns(path: impl AsRef<Path>, header: &[&str], columns: &[&[f64]]) -> Result<()> {
    write_csv_columns(File::create(path)?, header, columns)
}

pub fn save_csv_rows(path: impl AsRef<Path>, header: &[&str], rows: impl IntoIterator<Item = Vec<Cell>>) -> Result<()> {
    write_csv_rows(File::create(path)?, header, rows)
}

/// Layout: `"BNET"`, version `u32`, `n` `u32`, reserved `u32` (zero), then
/// `t`, `u_e[0..n]`, `u_i[0..n]` as `f64`, all little-endian. The state is synced
/// to its own time before writing.
pub fn write_micro<W: Write>(out: W, state: &MicroState, tau_e: f64, tau_i: f64) -> Result<()> {
    let n = u32::try_from(state.n()).map_err(|_| Error::InvalidParameter("n exceeds u32".into()))?;
    let mut synced = state.clone();
    synced.sync(state.t, tau_e, tau_i);
    let mut out = BufWriter::new(out);
    out.write_all(MICRO_MAGIC)?;
    out.write_all(&MICRO_VERSION.to_le_bytes())?;
    out.write_all(&n.to_le_bytes())?;
    out.write_all(&0u32.to_le_bytes())?;
    out.write_all(&synced.t.to_le_bytes())?;
    for x in synced.u.iter().flatten() {
        out.write_all(&x.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_micro<R: Read>(mut input: R) -> Result<MicroState> {
    let mut header = [0u8; MICRO_HEADER_LEN];
    input.read_exact(&mut header).map_err(|_| Error::Format("truncated header".into()))?;
    if &header[0..4] != MICRO_MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
    if word(4) != MICRO_VERSION {
        return Err(Error::Format(format!("unsupported version {}", word(4))));
    }
    let n = word(8) as usize;
    let mut body = Vec::new();
    input.read_to_end(&mut body)?;
    if body.len() != 8 * (1 + 2 * n) {
        return Err(Error::Format(format!("expected {} payload bytes, found {}", 8 * (1 + 2 * n), body.len())));
    }
    let vals: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let t = vals[0];
    let mut state = MicroState::new(vals[1..1 + n].to_vec(), vals[1 + n..].to_vec());
    state.t = t;
    for s in state.stamp.iter_mut() {
        s.fill(t);
    }
    Ok(state)
}

pub fn save_micro(path: impl AsRef<Path>, state: &MicroState, tau_e: f64, tau_i: f64) -> Result<()> {
    write_micro(File::create(path)?, state, tau_e, tau_i)
}

pub fn load_micro(path: impl AsRef<Path>) -> Result<MicroState> {
    read_micro(File::open(path)?)
}
