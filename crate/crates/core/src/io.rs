//! CSV and key-value file helpers shared by the exporters.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub(crate) type CsvWriter = csv::Writer<File>;

pub(crate) fn csv_writer(path: &Path, header: &[&str]) -> Result<CsvWriter> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(file);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    Ok(w)
}

pub(crate) fn write_row<I, S>(w: &mut CsvWriter, path: &Path, row: I) -> Result<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| csv_err(path, e))
}

pub(crate) fn finish(mut w: CsvWriter, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes `key = value` lines in the given order.
pub fn write_key_values(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut out = String::new();
    for (k, v) in entries {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Shortest representation that parses back to the same `f64`; exponent
/// form for very small or large magnitudes.
pub(crate) fn num(x: f64) -> String {
    let m = x.abs();
    if m != 0.0 && !(1e-4..1e16).contains(&m) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub(crate) fn parse_f64(path: &Path, field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: cannot parse {field:?} as a number"),
    })
}

#[cfg(test)]
mod tests {
    use super::num;

    #[test]
    fn numbers_round_trip() {
        for x in [0.0, -0.0, 1.0, 0.1, 1e-4, 9.99e-5, 1.5e-300, -2.5e17, 1e16, std::f64::consts::PI, 1234.5678] {
            assert_eq!(num(x).parse::<f64>().unwrap().to_bits(), x.to_bits(), "{x}");
        }
        assert_eq!(num(0.25), "0.25");
        assert_eq!(num(1.5e-7), "1.5e-7");
    }
}
