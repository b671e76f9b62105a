use std::path::{Path, PathBuf};

use laprop::harness::{gaussian_smooth, moving_average};

use crate::error::CliError;
use crate::output::float;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Window(usize),
    Gaussian(f64),
}

pub fn default_output(input: &Path) -> PathBuf {
    let stem = input.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "out".into());
    input.with_file_name(format!("{stem}.smoothed.csv"))
}

fn malformed(path: &Path, line: u64, message: impl std::fmt::Display) -> CliError {
    CliError::Parse { path: path.into(), message: format!("line {line}: {message}") }
}

/// Parsed CSV: header plus rows, each row tagged with its 1-based line number.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<(u64, Vec<String>)>,
}

pub fn read_table(path: &Path) -> Result<Table, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(malformed(path, 1, "missing header row"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    Ok(Table { header, rows })
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match (e.position(), e.kind()) {
        (_, csv::ErrorKind::Io(_)) => {
            let csv::ErrorKind::Io(io) = e.into_kind() else { unreachable!() };
            CliError::io(path, io)
        }
        (Some(pos), _) => malformed(path, pos.line(), e),
        (None, _) => CliError::Parse { path: path.into(), message: e.to_string() },
    }
}

/// Smooths the selected columns of `table` (all fully numeric columns except
/// `step` when `columns` is empty). Other columns pass through unchanged.
pub fn smooth_table(table: &Table, kernel: Kernel, columns: &[String], origin: &Path) -> Result<String, CliError> {
    let parse = |col: usize| -> Result<Vec<f64>, (u64, String)> {
        table
            .rows
            .iter()
            .map(|(line, row)| row[col].trim().parse::<f64>().map_err(|_| (*line, row[col].clone())))
            .collect()
    };
    let mut selected = Vec::new();
    if columns.is_empty() {
        for (i, name) in table.header.iter().enumerate() {
            if name != "step" && !table.rows.is_empty() && parse(i).is_ok() {
                selected.push(i);
            }
        }
        if selected.is_empty() {
            return Err(CliError::Parse { path: origin.into(), message: "no numeric column to smooth".into() });
        }
    } else {
        for name in columns {
            let i = table.header.iter().position(|h| h == name).ok_or_else(|| CliError::Parse {
                path: origin.into(),
                message: format!("no column named `{name}`"),
            })?;
            selected.push(i);
        }
    }
    let mut out_rows: Vec<Vec<String>> = table.rows.iter().map(|(_, r)| r.clone()).collect();
    for &col in &selected {
        let values = parse(col).map_err(|(line, v)| {
            malformed(origin, line, format!("column `{}` has non-numeric value `{v}`", table.header[col]))
        })?;
        let smoothed = match kernel {
            Kernel::Window(w) => moving_average(&values, w)?,
            Kernel::Gaussian(s) => gaussian_smooth(&values, s)?,
        };
        for (row, v) in out_rows.iter_mut().zip(smoothed) {
            row[col] = float(v);
        }
    }
    let mut writer = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Config(format!("cannot format csv: {e}"));
    writer.write_record(&table.header).map_err(io)?;
    for row in &out_rows {
        writer.write_record(row).map_err(io)?;
    }
    let bytes = writer.into_inner().map_err(|e| CliError::Config(format!("cannot format csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv input was utf-8"))
}

pub fn smooth_file(input: &Path, output: &Path, kernel: Kernel, columns: &[String]) -> Result<(), CliError> {
    let table = read_table(input)?;
    let text = smooth_table(&table, kernel, columns, input)?;
    std::fs::write(output, text).map_err(|e| CliError::io(output, e))
}
