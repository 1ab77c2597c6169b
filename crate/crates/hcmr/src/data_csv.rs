//! CSV datasets: header `x_0,…,x_{d-1},c_0,…,c_{n-1}`, concept cells `0`, `1`
//! or `?` for an unobserved label.

use std::io::{Read, Write};
use std::path::Path;

use hcmr_core::Dataset;

use crate::error::{FormatError, Result};

fn column_counts(header: &csv::StringRecord) -> Result<(usize, usize)> {
    let d = header.iter().take_while(|h| h.starts_with("x_")).count();
    let n = header.len() - d;
    for (t, name) in header.iter().enumerate() {
        let expected = if t < d { format!("x_{t}") } else { format!("c_{}", t - d) };
        if name.trim() != expected {
            return Err(FormatError::Schema(format!("header column {t} is `{name}`, expected `{expected}`")));
        }
    }
    Ok((d, n))
}

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let (d, n) = column_counts(rdr.headers()?)?;
    let mut data = Dataset::new(d, n);
    let mut x = vec![0.0; d];
    let mut labels = vec![false; n];
    let mut observed = vec![false; n];
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != d + n {
            return Err(FormatError::Schema(format!(
                "line {line} has {} columns, the header has {}",
                record.len(),
                d + n
            )));
        }
        for (t, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            if t < d {
                x[t] = cell
                    .parse()
                    .map_err(|e| FormatError::syntax(line, format!("x_{t} = `{cell}`: {e}")))?;
            } else {
                let i = t - d;
                (labels[i], observed[i]) = match cell {
                    "0" => (false, true),
                    "1" => (true, true),
                    "?" => (false, false),
                    _ => return Err(FormatError::syntax(line, format!("c_{i} = `{cell}` is not 0, 1 or ?"))),
                };
            }
        }
        data.push(&x, &labels, &observed)?;
    }
    Ok(data)
}

pub fn write_csv<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = (0..data.input_dim)
        .map(|t| format!("x_{t}"))
        .chain((0..data.n_concepts).map(|i| format!("c_{i}")))
        .collect();
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for e in 0..data.len() {
        row.clear();
        // Debug formatting of f64 parses back to the same bits
        row.extend(data.x(e).iter().map(|v| format!("{v:?}")));
        for (&l, &o) in data.labels(e).iter().zip(data.observed(e)) {
            row.push(match (o, l) {
                (false, _) => "?".into(),
                (true, true) => "1".into(),
                (true, false) => "0".into(),
            });
        }
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| FormatError::Io {
        path: "<csv>".into(),
        source,
    })?;
    Ok(())
}

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_csv(std::io::BufReader::new(file))
}

pub fn save_csv(path: &Path, data: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(std::io::BufWriter::new(file), data)
}
