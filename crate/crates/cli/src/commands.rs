//! File-based entry points behind the `tailforge` subcommands. Each
//! returns the serialized document so the binary only handles output.

use std::path::{Path, PathBuf};

use tailforge_core::{
    export_curves, ingest_csv, run_experiment, Column, Dataset, ExperimentSpec, ExportFormat, IngestOptions, TailError,
};

use crate::docs::{gof_doc, path_doc, tail_doc, Document, FitQuery, GofQuery};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Tail(#[from] TailError),
    #[error("invalid spec: {0}")]
    Spec(#[from] serde_json::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// Where the observations come from.
#[derive(Debug, Clone, Default)]
pub struct Input {
    pub path: PathBuf,
    /// Index or header name; index 0 when absent.
    pub column: Option<String>,
    pub header: Option<bool>,
}

impl Input {
    pub fn load(&self) -> CliResult<Dataset> {
        let column = match &self.column {
            None => Column::default(),
            Some(c) => c.parse::<usize>().map(Column::Index).unwrap_or_else(|_| Column::Name(c.clone())),
        };
        let name = self.path.file_name().map(|s| s.to_string_lossy().into_owned());
        let opts = IngestOptions { column, header: self.header, id: None, name };
        Ok(ingest_csv(&read(&self.path)?, &opts)?.dataset)
    }
}

fn json<T: serde::Serialize>(body: T) -> CliResult<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(&Document::new(body))?;
    out.push(b'\n');
    Ok(out)
}

pub fn fit(input: &Input, q: &FitQuery) -> CliResult<Vec<u8>> {
    let ds = input.load()?;
    json(path_doc(&ds.sample, q)?)
}

pub fn tail(input: &Input, q: &FitQuery) -> CliResult<Vec<u8>> {
    let ds = input.load()?;
    json(tail_doc(&ds.sample, q)?)
}

pub fn gof(input: &Input, q: &GofQuery) -> CliResult<Vec<u8>> {
    let ds = input.load()?;
    json(gof_doc(&ds.sample, q)?)
}

/// Runs the experiment in a JSON spec file. `seed` replaces the spec's
/// base seed.
pub fn simulate(spec: &Path, seed: Option<u64>, format: ExportFormat) -> CliResult<Vec<u8>> {
    let mut spec: ExperimentSpec = serde_json::from_slice(&read(spec)?)?;
    if let Some(s) = seed {
        spec.base_seed = s;
    }
    let curves = run_experiment(&spec)?;
    match format {
        ExportFormat::Json => json(curves),
        ExportFormat::Csv => Ok(export_curves(&curves, format)?),
    }
}
