use std::fs;
use std::path::Path;

use eps_core::ObservableRecord;

use crate::error::{CliError, Result};
use crate::run::ExperimentReport;

pub const CSV_HEADER: [&str; 9] = [
    "t",
    "re_mean_p",
    "im_mean_p",
    "re_mean_qdot",
    "im_mean_qdot",
    "re_norm",
    "im_norm",
    "re_sigma",
    "im_sigma",
];

/// Shortest representation that parses back to the same bits.
fn exact(x: f64) -> String {
    format!("{x:?}")
}

/// One row per record under [`CSV_HEADER`], `\n`-terminated.
pub fn emit_csv(records: &[ObservableRecord], path: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(CliError::Config(format!("{}: no records to write", path.display())));
    }
    let csv_err = |source| CliError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_err)?;
    writer.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in records {
        let row = [
            r.t,
            r.mean_p.re,
            r.mean_p.im,
            r.mean_qdot.re,
            r.mean_qdot.im,
            r.norm.re,
            r.norm.im,
            r.sigma_instant.re,
            r.sigma_instant.im,
        ];
        writer.write_record(row.map(exact)).map_err(csv_err)?;
    }
    writer.flush().map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn emit_report(report: &ExperimentReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
