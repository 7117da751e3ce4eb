use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ExistenceTable, LadderResult, LadderRow};
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "eps,n_paths,grid_n,raw_mean,raw_var,scale_factor,scaled_var,\
sigma2_target,ks_stat,ks_p,skewness,excess_kurtosis,first_chaos_var,quad_var_total";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!("unknown output format {other:?}"))),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| x.to_string())
}

fn csv_line(r: &LadderRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        r.eps,
        r.n_paths,
        r.grid_n,
        r.raw_mean,
        r.raw_var,
        r.scale_factor,
        r.scaled_var,
        opt(r.sigma2_target),
        r.ks_stat,
        opt(r.ks_p),
        r.skewness,
        r.excess_kurtosis,
        r.first_chaos_var,
        opt(r.quad_var_total),
    )
}

pub fn write_csv<W: Write>(rows: &[LadderRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", csv_line(r))?;
    }
    out.flush()?;
    Ok(())
}

/// Appends rows to a ladder CSV one at a time, flushing after each.
pub(crate) struct CsvAppender {
    file: File,
}

impl CsvAppender {
    pub(crate) fn open(path: &Path, fresh: bool) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        let mut file = if fresh {
            File::create(path)?
        } else {
            OpenOptions::new().append(true).open(path)?
        };
        if fresh {
            writeln!(file, "{CSV_HEADER}")?;
        }
        Ok(Self { file })
    }

    pub(crate) fn append(&mut self, row: &LadderRow) -> Result<()> {
        writeln!(self.file, "{}", csv_line(row))?;
        self.file.flush()?;
        Ok(())
    }
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    let s = rec.get(i).ok_or_else(|| Error::Format(format!("missing column {i}")))?;
    s.parse()
        .map_err(|_| Error::Format(format!("bad value {s:?} in column {i}")))
}

fn opt_field(rec: &csv::StringRecord, i: usize) -> Result<Option<f64>> {
    let v: f64 = field(rec, i)?;
    Ok((!v.is_nan()).then_some(v))
}

/// Reads the rows of a ladder CSV written by this module.
pub fn read_csv_rows(path: &Path) -> Result<Vec<LadderRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Format(e.to_string()))?;
    let header = reader.headers().map_err(|e| Error::Format(e.to_string()))?;
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Format(format!("{} is not a ladder CSV", path.display())));
    }
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Format(e.to_string()))?;
        rows.push(LadderRow {
            eps: field(&rec, 0)?,
            n_paths: field(&rec, 1)?,
            grid_n: field(&rec, 2)?,
            raw_mean: field(&rec, 3)?,
            raw_var: field(&rec, 4)?,
            scale_factor: field(&rec, 5)?,
            scaled_var: field(&rec, 6)?,
            sigma2_target: opt_field(&rec, 7)?,
            ks_stat: field(&rec, 8)?,
            ks_p: opt_field(&rec, 9)?,
            skewness: field(&rec, 10)?,
            excess_kurtosis: field(&rec, 11)?,
            first_chaos_var: field(&rec, 12)?,
            quad_var_total: opt_field(&rec, 13)?,
        });
    }
    Ok(rows)
}

pub fn read_json(path: &Path) -> Result<LadderResult> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

fn plot_path(base: &Path) -> PathBuf {
    base.with_extension("plot.dat")
}

/// Writes `result` to `path` in `format`, plus a whitespace-separated
/// `eps scaled_var sigma2_target` file next to it (`*.plot.dat`).
/// Returns the paths written.
pub fn emit_results(result: &LadderResult, format: OutputFormat, path: &Path) -> Result<Vec<PathBuf>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let out = BufWriter::new(File::create(path)?);
    match format {
        OutputFormat::Csv => write_csv(&result.rows, out)?,
        OutputFormat::Json => {
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, result)?;
            writeln!(out)?;
            out.flush()?;
        }
    }
    let plot = plot_path(path);
    let mut p = BufWriter::new(File::create(&plot)?);
    writeln!(p, "# eps scaled_var sigma2_target")?;
    for r in &result.rows {
        writeln!(p, "{} {} {}", r.eps, r.scaled_var, opt(r.sigma2_target))?;
    }
    p.flush()?;
    Ok(vec![path.to_path_buf(), plot])
}

pub fn write_existence_csv<W: Write>(table: &ExistenceTable, mut out: W) -> Result<()> {
    writeln!(out, "hurst,eps,raw_var")?;
    for r in &table.rows {
        writeln!(out, "{},{},{}", r.hurst, r.eps, r.raw_var)?;
    }
    writeln!(out)?;
    writeln!(out, "hurst,exists_l2,growth_ratio,monotone_growth")?;
    for s in &table.summary {
        writeln!(out, "{},{},{},{}", s.hurst, s.exists_l2, s.growth_ratio, s.monotone_growth)?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::ExperimentConfig;

    fn row() -> LadderRow {
        LadderRow {
            eps: 0.1,
            n_paths: 100,
            grid_n: 64,
            raw_mean: -1.5e-3,
            raw_var: 0.0123,
            scale_factor: 0.4,
            scaled_var: 0.0123 * 0.16,
            sigma2_target: Some(0.2),
            ks_stat: 0.05,
            ks_p: None,
            skewness: 0.1,
            excess_kurtosis: -0.2,
            first_chaos_var: 0.004,
            quad_var_total: None,
        }
    }

    #[test]
    fn empty_ladder_is_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn missing_values_are_nan() {
        let mut buf = Vec::new();
        write_csv(&[row()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let line = text.lines().nth(1).unwrap();
        assert_eq!(line.split(',').count(), 14);
        assert!(line.ends_with(",NaN"));
    }

    #[test]
    fn csv_and_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let result = LadderResult::new(&ExperimentConfig::default(), vec![row()]);
        let csv_path = dir.path().join("r.csv");
        emit_results(&result, OutputFormat::Csv, &csv_path).unwrap();
        assert_eq!(read_csv_rows(&csv_path).unwrap(), result.rows);
        let json_path = dir.path().join("r.json");
        let written = emit_results(&result, OutputFormat::Json, &json_path).unwrap();
        assert_eq!(read_json(&json_path).unwrap(), result);
        assert!(written[1].ends_with("r.plot.dat"));
    }
}
