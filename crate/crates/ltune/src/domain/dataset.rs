//! Configurations, metric readings, and the dataset container with its
//! comma-separated persistence format.
//!
//! The file layout is `param:<name>,...,metric:<name>,...,provenance` in the
//! header, then one data row per sample. Floats are written with Rust's
//! shortest round-trip formatting, so save → load reproduces every value
//! exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::space::{MetricSchema, ParameterSpace};
use crate::error::{Error, Result};

/// A full assignment of all parameters, in raw units (categorical values
/// are stored as category indices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub values: Vec<f64>,
}

/// One reading of all external metrics, in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricVector {
    pub values: Vec<f64>,
}

impl MetricVector {
    pub fn new(values: Vec<f64>) -> Self {
        MetricVector { values }
    }

    pub fn validate_finite(&self) -> Result<()> {
        if let Some(v) = self.values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite metric value {v}")));
        }
        Ok(())
    }
}

/// Whether a row was actually benchmarked or synthesized by the predictor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Measured,
    Augmented,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::Measured => "measured",
            Provenance::Augmented => "augmented",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "measured" => Some(Provenance::Measured),
            "augmented" => Some(Provenance::Augmented),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub config: Configuration,
    pub metrics: MetricVector,
    pub provenance: Provenance,
}

/// Paired (configuration, metrics) rows conforming to one space and schema.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub space: ParameterSpace,
    pub schema: MetricSchema,
    rows: Vec<DatasetRow>,
}

impl Dataset {
    pub fn new(space: ParameterSpace, schema: MetricSchema) -> Self {
        Dataset {
            space,
            schema,
            rows: Vec::new(),
        }
    }

    pub fn rows(&self) -> &[DatasetRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Count of measured rows (the original dataset size N).
    pub fn n_measured(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.provenance == Provenance::Measured)
            .count()
    }

    /// Count of augmented rows (the synthesized extension size M).
    pub fn n_augmented(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| r.provenance == Provenance::Augmented)
            .count()
    }

    /// Validate and append one row.
    pub fn push(
        &mut self,
        config: Configuration,
        metrics: MetricVector,
        provenance: Provenance,
    ) -> Result<()> {
        self.space.validate_config(&config)?;
        if metrics.values.len() != self.schema.e() {
            return Err(Error::shape(format!(
                "metric vector has {} values, schema has {}",
                metrics.values.len(),
                self.schema.e()
            )));
        }
        metrics.validate_finite()?;
        self.rows.push(DatasetRow {
            config,
            metrics,
            provenance,
        });
        Ok(())
    }

    /// Keep only the first `n` rows (used by the data-count ablation).
    pub fn truncated(&self, n: usize) -> Dataset {
        Dataset {
            space: self.space.clone(),
            schema: self.schema.clone(),
            rows: self.rows[..n.min(self.rows.len())].to_vec(),
        }
    }

    fn header(&self) -> String {
        let mut cols: Vec<String> = Vec::with_capacity(self.space.d() + self.schema.e() + 1);
        for p in self.space.params() {
            cols.push(format!("param:{}", p.name));
        }
        for m in self.schema.names() {
            cols.push(format!("metric:{m}"));
        }
        cols.push("provenance".to_string());
        cols.join(",")
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(&self.header());
        out.push('\n');
        for row in &self.rows {
            let mut cells: Vec<String> =
                Vec::with_capacity(self.space.d() + self.schema.e() + 1);
            for v in &row.config.values {
                cells.push(format!("{v}"));
            }
            for v in &row.metrics.values {
                cells.push(format!("{v}"));
            }
            cells.push(row.provenance.as_str().to_string());
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(space: ParameterSpace, schema: MetricSchema, text: &str) -> Result<Dataset> {
        let mut ds = Dataset::new(space, schema);
        let expected_header = ds.header();
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::DatasetFormat {
                row: 0,
                message: "empty file, expected header".into(),
            })?
            .trim_end();
        if header != expected_header {
            return Err(Error::DatasetFormat {
                row: 0,
                message: format!("header mismatch: expected `{expected_header}`, got `{header}`"),
            });
        }
        let d = ds.space.d();
        let e = ds.schema.e();
        for (i, line) in lines.enumerate() {
            let row_no = i + 1;
            if line.trim().is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != d + e + 1 {
                return Err(Error::DatasetFormat {
                    row: row_no,
                    message: format!("expected {} cells, got {}", d + e + 1, cells.len()),
                });
            }
            let parse = |cell: &str| -> Result<f64> {
                cell.parse::<f64>().map_err(|_| Error::DatasetFormat {
                    row: row_no,
                    message: format!("non-numeric cell `{cell}`"),
                })
            };
            let mut config = Vec::with_capacity(d);
            for cell in &cells[..d] {
                config.push(parse(cell)?);
            }
            let mut metrics = Vec::with_capacity(e);
            for cell in &cells[d..d + e] {
                metrics.push(parse(cell)?);
            }
            let provenance = Provenance::parse(cells[d + e]).ok_or_else(|| Error::DatasetFormat {
                row: row_no,
                message: format!("unknown provenance `{}`", cells[d + e]),
            })?;
            ds.push(
                Configuration { values: config },
                MetricVector::new(metrics),
                provenance,
            )
            .map_err(|err| Error::DatasetFormat {
                row: row_no,
                message: err.to_string(),
            })?;
        }
        Ok(ds)
    }

    pub fn load(
        space: ParameterSpace,
        schema: MetricSchema,
        path: impl AsRef<Path>,
    ) -> Result<Dataset> {
        let text = std::fs::read_to_string(path)?;
        Self::from_csv(space, schema, &text)
    }
}
