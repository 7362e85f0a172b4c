//! Dataset and artifact I/O.
//!
//! Text artifacts are CSV without headers; floats are written with Rust's
//! shortest round-trip formatting so `parse(write(x)) == x` bit for bit.
//! Large inputs may instead use a raw binary layout: a 16-byte header of two
//! little-endian u64 (rows, cols) followed by row-major little-endian f64.

use std::fs;
use std::io::Read;
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::CliError;

pub struct Dataset {
    pub x: Array2<f64>,
    pub labels: Option<Vec<usize>>,
    pub name: String,
}

fn io_err(path: &Path, err: std::io::Error) -> CliError {
    if err.kind() == std::io::ErrorKind::NotFound {
        CliError::io_not_found(format!("{}: not found", path.display()))
    } else {
        CliError::io(format!("{}: {err}", path.display()))
    }
}

/// Parse a CSV of floats, one row per line.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| {
            CliError::io(format!("{}:{}: bad float: {e}", path.display(), lineno + 1))
        })?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(CliError::io(format!(
                    "{}:{}: expected {} columns, got {}",
                    path.display(),
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::io(format!("{}: empty input", path.display())));
    }
    let cols = rows[0].len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let nrows = flat.len() / cols;
    Array2::from_shape_vec((nrows, cols), flat)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

/// Raw binary matrix: u64 rows, u64 cols, then row-major f64, all LE.
pub fn read_matrix_bin(path: &Path) -> Result<Array2<f64>, CliError> {
    let mut file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    let mut header = [0u8; 16];
    file.read_exact(&mut header).map_err(|e| io_err(path, e))?;
    let rows = u64::from_le_bytes(header[0..8].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(header[8..16].try_into().unwrap()) as usize;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf).map_err(|e| io_err(path, e))?;
    if buf.len() != rows * cols * 8 {
        return Err(CliError::io(format!(
            "{}: expected {} payload bytes, got {}",
            path.display(),
            rows * cols * 8,
            buf.len()
        )));
    }
    let mut flat = Vec::with_capacity(rows * cols);
    for chunk in buf.chunks_exact(8) {
        flat.push(f64::from_le_bytes(chunk.try_into().unwrap()));
    }
    Array2::from_shape_vec((rows, cols), flat)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn write_matrix_bin(path: &Path, m: &Array2<f64>) -> Result<(), CliError> {
    let mut out = Vec::with_capacity(16 + m.len() * 8);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for v in m.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Load a dataset, splitting off an optional label column.
pub fn read_dataset(path: &Path, labels_col: Option<usize>) -> Result<Dataset, CliError> {
    let raw = match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => read_matrix_bin(path)?,
        _ => read_matrix_csv(path)?,
    };
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    let Some(col) = labels_col else {
        return Ok(Dataset {
            x: raw,
            labels: None,
            name,
        });
    };
    if col >= raw.ncols() {
        return Err(CliError::config(format!(
            "label column {col} out of range for {} columns",
            raw.ncols()
        )));
    }
    let mut labels = Vec::with_capacity(raw.nrows());
    for i in 0..raw.nrows() {
        let v = raw[[i, col]];
        if v < 0.0 || v.fract() != 0.0 {
            return Err(CliError::config(format!(
                "label column holds a non-integer value {v} at row {i}"
            )));
        }
        labels.push(v as usize);
    }
    let keep: Vec<usize> = (0..raw.ncols()).filter(|&c| c != col).collect();
    let mut x = Array2::<f64>::zeros((raw.nrows(), keep.len()));
    for (dst, &src) in keep.iter().enumerate() {
        x.column_mut(dst).assign(&raw.column(src));
    }
    Ok(Dataset {
        x,
        labels: Some(labels),
        name,
    })
}

pub fn write_matrix_csv(path: &Path, m: &Array2<f64>) -> Result<(), CliError> {
    let mut out = String::new();
    for row in m.rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn write_vector_csv(path: &Path, v: &Array1<f64>) -> Result<(), CliError> {
    let mut out = String::new();
    for x in v.iter() {
        out.push_str(&format!("{x}\n"));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn read_vector_csv(path: &Path) -> Result<Array1<f64>, CliError> {
    let m = read_matrix_csv(path)?;
    if m.ncols() != 1 {
        return Err(CliError::io(format!(
            "{}: expected a single column, got {}",
            path.display(),
            m.ncols()
        )));
    }
    Ok(m.column(0).to_owned())
}

pub fn read_labels(path: &Path) -> Result<Vec<usize>, CliError> {
    let v = read_vector_csv(path)?;
    let mut labels = Vec::with_capacity(v.len());
    for (i, &x) in v.iter().enumerate() {
        if x < 0.0 || x.fract() != 0.0 {
            return Err(CliError::config(format!(
                "{}: non-integer label {x} at row {i}",
                path.display()
            )));
        }
        labels.push(x as usize);
    }
    Ok(labels)
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<(), CliError> {
    let mut out = String::new();
    for l in labels {
        out.push_str(&format!("{l}\n"));
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn write_string(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}
