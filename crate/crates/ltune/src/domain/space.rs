//! Parameter and metric schemas, plus the parameter-space document format.
//!
//! A parameter-space document is line based, one record per parameter, in
//! vector order:
//!
//! ```text
//! # comment lines and blank lines are ignored
//! buffer_mb    continuous   4 4096 64
//! io_threads   integer      1 64 8
//! compression  categorical  none,lz4,zstd lz4
//! ```

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a parameter is allowed to hold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParameterKind {
    Continuous { lower: f64, upper: f64 },
    Integer { lower: f64, upper: f64 },
    Categorical { categories: Vec<String> },
}

/// One tunable parameter: name, kind with bounds, and a default value.
///
/// For categorical parameters the default is the category index; integer
/// defaults are whole numbers stored as `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpec {
    pub name: String,
    pub kind: ParameterKind,
    pub default: f64,
}

impl ParameterSpec {
    pub fn continuous(name: &str, lower: f64, upper: f64, default: f64) -> Self {
        ParameterSpec {
            name: name.to_string(),
            kind: ParameterKind::Continuous { lower, upper },
            default,
        }
    }

    pub fn integer(name: &str, lower: i64, upper: i64, default: i64) -> Self {
        ParameterSpec {
            name: name.to_string(),
            kind: ParameterKind::Integer {
                lower: lower as f64,
                upper: upper as f64,
            },
            default: default as f64,
        }
    }

    pub fn categorical(name: &str, categories: &[&str], default: &str) -> Self {
        let idx = categories.iter().position(|c| c == &default).unwrap_or(0);
        ParameterSpec {
            name: name.to_string(),
            kind: ParameterKind::Categorical {
                categories: categories.iter().map(|c| c.to_string()).collect(),
            },
            default: idx as f64,
        }
    }

    fn validate(&self) -> Result<()> {
        match &self.kind {
            ParameterKind::Continuous { lower, upper } | ParameterKind::Integer { lower, upper } => {
                if !lower.is_finite() || !upper.is_finite() || lower >= upper {
                    return Err(Error::invalid(format!(
                        "parameter `{}`: bounds [{}, {}] are inverted or non-finite",
                        self.name, lower, upper
                    )));
                }
                if self.default < *lower || self.default > *upper {
                    return Err(Error::invalid(format!(
                        "parameter `{}`: default {} outside [{}, {}]",
                        self.name, self.default, lower, upper
                    )));
                }
                if matches!(self.kind, ParameterKind::Integer { .. })
                    && (lower.fract() != 0.0 || upper.fract() != 0.0 || self.default.fract() != 0.0)
                {
                    return Err(Error::invalid(format!(
                        "parameter `{}`: integer bounds and default must be whole numbers",
                        self.name
                    )));
                }
            }
            ParameterKind::Categorical { categories } => {
                if categories.is_empty() {
                    return Err(Error::invalid(format!(
                        "parameter `{}`: empty category list",
                        self.name
                    )));
                }
                let mut seen = std::collections::HashSet::new();
                for c in categories {
                    if !seen.insert(c) {
                        return Err(Error::invalid(format!(
                            "parameter `{}`: duplicate category `{}`",
                            self.name, c
                        )));
                    }
                }
                let idx = self.default;
                if idx.fract() != 0.0 || idx < 0.0 || idx as usize >= categories.len() {
                    return Err(Error::invalid(format!(
                        "parameter `{}`: default index {} outside category set",
                        self.name, idx
                    )));
                }
            }
        }
        Ok(())
    }

    /// Raw value range as used for normalization: parameter bounds for
    /// numeric kinds, `[0, |categories|-1]` for categorical.
    pub fn raw_range(&self) -> (f64, f64) {
        match &self.kind {
            ParameterKind::Continuous { lower, upper } | ParameterKind::Integer { lower, upper } => {
                (*lower, *upper)
            }
            ParameterKind::Categorical { categories } => (0.0, (categories.len() - 1) as f64),
        }
    }

    /// Check a raw value against the bounds / category set.
    pub fn contains(&self, value: f64) -> bool {
        if !value.is_finite() {
            return false;
        }
        match &self.kind {
            ParameterKind::Continuous { lower, upper } => value >= *lower && value <= *upper,
            ParameterKind::Integer { lower, upper } => {
                value >= *lower && value <= *upper && value.fract() == 0.0
            }
            ParameterKind::Categorical { categories } => {
                value.fract() == 0.0 && value >= 0.0 && (value as usize) < categories.len()
            }
        }
    }
}

/// Ordered schema of tunable parameters. The ordering is stable and defines
/// the vector layout everywhere downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSpace {
    params: Vec<ParameterSpec>,
}

impl ParameterSpace {
    pub fn new(params: Vec<ParameterSpec>) -> Result<Self> {
        if params.is_empty() {
            return Err(Error::invalid("parameter space must have at least one parameter"));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &params {
            p.validate()?;
            if !seen.insert(p.name.clone()) {
                return Err(Error::invalid(format!("duplicate parameter name `{}`", p.name)));
            }
        }
        Ok(ParameterSpace { params })
    }

    pub fn params(&self) -> &[ParameterSpec] {
        &self.params
    }

    /// Number of parameters; the configuration vector dimension.
    pub fn d(&self) -> usize {
        self.params.len()
    }

    /// The default configuration (raw units, categorical as index).
    pub fn default_config(&self) -> super::Configuration {
        super::Configuration {
            values: self.params.iter().map(|p| p.default).collect(),
        }
    }

    pub fn validate_config(&self, conf: &super::Configuration) -> Result<()> {
        if conf.values.len() != self.d() {
            return Err(Error::shape(format!(
                "configuration has {} values, space has {} parameters",
                conf.values.len(),
                self.d()
            )));
        }
        for (p, v) in self.params.iter().zip(&conf.values) {
            if !p.contains(*v) {
                return Err(Error::invalid(format!(
                    "parameter `{}`: value {} out of range",
                    p.name, v
                )));
            }
        }
        Ok(())
    }

    /// Parse a parameter-space document.
    pub fn from_document(text: &str) -> Result<Self> {
        let mut params = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            params.push(parse_record(line, line_no)?);
        }
        ParameterSpace::new(params).map_err(|e| match e {
            Error::InvalidInput(msg) => Error::SpaceParse { line: 0, message: msg },
            other => other,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_document(&text)
    }

    /// Render back into the document format (order preserved).
    pub fn to_document(&self) -> String {
        let mut out = String::new();
        for p in &self.params {
            match &p.kind {
                ParameterKind::Continuous { lower, upper } => {
                    let _ = writeln!(out, "{} continuous {} {} {}", p.name, lower, upper, p.default);
                }
                ParameterKind::Integer { lower, upper } => {
                    let _ = writeln!(out, "{} integer {} {} {}", p.name, lower, upper, p.default);
                }
                ParameterKind::Categorical { categories } => {
                    let _ = writeln!(
                        out,
                        "{} categorical {} {}",
                        p.name,
                        categories.join(","),
                        categories[p.default as usize]
                    );
                }
            }
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_document())?;
        Ok(())
    }
}

fn parse_record(line: &str, line_no: usize) -> Result<ParameterSpec> {
    let parse_err = |message: String| Error::SpaceParse { line: line_no, message };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 3 {
        return Err(parse_err(format!("expected `name kind ...`, got `{line}`")));
    }
    let name = fields[0].to_string();
    let num = |s: &str, what: &str| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| parse_err(format!("parameter `{name}`: {what} `{s}` is not a number")))
    };
    let spec = match fields[1] {
        "continuous" | "integer" => {
            if fields.len() != 5 {
                return Err(parse_err(format!(
                    "parameter `{name}`: expected `name {} lower upper default`",
                    fields[1]
                )));
            }
            let lower = num(fields[2], "lower bound")?;
            let upper = num(fields[3], "upper bound")?;
            let default = num(fields[4], "default")?;
            let kind = if fields[1] == "continuous" {
                ParameterKind::Continuous { lower, upper }
            } else {
                ParameterKind::Integer { lower, upper }
            };
            ParameterSpec { name, kind, default }
        }
        "categorical" => {
            if fields.len() != 4 {
                return Err(parse_err(format!(
                    "parameter `{name}`: expected `name categorical cat1,cat2,... default`"
                )));
            }
            let categories: Vec<String> = fields[2].split(',').map(|c| c.to_string()).collect();
            let default = categories
                .iter()
                .position(|c| c == fields[3])
                .ok_or_else(|| {
                    parse_err(format!(
                        "parameter `{name}`: default `{}` not among categories",
                        fields[3]
                    ))
                })? as f64;
            ParameterSpec {
                name,
                kind: ParameterKind::Categorical { categories },
                default,
            }
        }
        other => {
            return Err(parse_err(format!(
                "parameter `{name}`: unknown kind `{other}` (expected continuous|integer|categorical)"
            )))
        }
    };
    spec.validate().map_err(|e| match e {
        Error::InvalidInput(message) => Error::SpaceParse { line: line_no, message },
        other => other,
    })?;
    Ok(spec)
}

/// Load a parameter space from a document file.
pub fn load_parameter_space(path: impl AsRef<Path>) -> Result<ParameterSpace> {
    ParameterSpace::load(path)
}

/// Whether larger or smaller values of a metric are better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Maximize,
    Minimize,
}

/// Ordered list of external metric names with their optimization directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSchema {
    names: Vec<String>,
    directions: Vec<Direction>,
}

impl MetricSchema {
    pub fn new(names: Vec<String>, directions: Vec<Direction>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::invalid("metric schema must have at least one metric"));
        }
        if names.len() != directions.len() {
            return Err(Error::shape("metric names and directions differ in length"));
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n.clone()) {
                return Err(Error::invalid(format!("duplicate metric name `{n}`")));
            }
        }
        Ok(MetricSchema { names, directions })
    }

    /// Throughput (maximize) and Latency (minimize).
    pub fn mysql() -> Self {
        MetricSchema {
            names: vec!["Throughput".into(), "Latency".into()],
            directions: vec![Direction::Maximize, Direction::Minimize],
        }
    }

    /// TIME (min), RATE (max), WAF (min), SAF (min).
    pub fn rocksdb() -> Self {
        MetricSchema {
            names: vec!["TIME".into(), "RATE".into(), "WAF".into(), "SAF".into()],
            directions: vec![
                Direction::Minimize,
                Direction::Maximize,
                Direction::Minimize,
                Direction::Minimize,
            ],
        }
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    /// Number of metrics.
    pub fn e(&self) -> usize {
        self.names.len()
    }
}
