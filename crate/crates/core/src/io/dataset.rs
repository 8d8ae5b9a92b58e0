use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::survival::{Arm, SurvivalRecord};

/// Encoding for a categorical covariate column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Categorical {
    /// Label to real code, e.g. `{ I = 1, II = 2 }`.
    Codes { codes: BTreeMap<String, f64> },
    /// Expands into one 0/1 column per level, named `column=level`.
    OneHot { one_hot: Vec<String> },
}

/// Column layout of an input CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSchema {
    pub id_column: String,
    pub time_column: String,
    pub event_column: String,
    pub treatment_column: String,
    /// Covariate columns in order; `None` takes every other header column.
    pub covariate_columns: Option<Vec<String>>,
    pub categorical: BTreeMap<String, Categorical>,
}

impl Default for DatasetSchema {
    fn default() -> Self {
        DatasetSchema {
            id_column: "id".into(),
            time_column: "time".into(),
            event_column: "event".into(),
            treatment_column: "treatment".into(),
            covariate_columns: None,
            categorical: BTreeMap::new(),
        }
    }
}

impl DatasetSchema {
    pub fn from_toml(text: &str) -> Result<Self> {
        let schema: DatasetSchema = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = vec![&self.id_column, &self.time_column, &self.event_column, &self.treatment_column];
        if let Some(cols) = &self.covariate_columns {
            names.extend(cols);
        }
        let mut seen = std::collections::HashSet::new();
        for n in names {
            if !seen.insert(n) {
                return Err(Error::Schema(format!("column {n} named twice in schema")));
            }
        }
        for (col, enc) in &self.categorical {
            match enc {
                Categorical::Codes { codes } if codes.is_empty() || codes.values().any(|v| !v.is_finite()) => {
                    return Err(Error::Schema(format!("categorical {col}: codes must be nonempty and finite")));
                }
                Categorical::OneHot { one_hot } if one_hot.is_empty() => {
                    return Err(Error::Schema(format!("categorical {col}: one_hot needs levels")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    fn outcome_columns(&self) -> [&str; 4] {
        [&self.id_column, &self.time_column, &self.event_column, &self.treatment_column]
    }

    /// Covariate source columns, resolved against a header.
    fn source_columns(&self, header: &[String]) -> Vec<String> {
        match &self.covariate_columns {
            Some(cols) => cols.clone(),
            None => header
                .iter()
                .filter(|h| !self.outcome_columns().contains(&h.as_str()))
                .cloned()
                .collect(),
        }
    }

    /// Names of the encoded covariate vector entries.
    fn expanded_names(&self, sources: &[String]) -> Vec<String> {
        let mut out = Vec::new();
        for col in sources {
            match self.categorical.get(col) {
                Some(Categorical::OneHot { one_hot }) => {
                    out.extend(one_hot.iter().map(|level| format!("{col}={level}")));
                }
                _ => out.push(col.clone()),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadReport {
    pub rows: usize,
    pub events: usize,
    pub arm0: usize,
    pub arm1: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub records: Vec<SurvivalRecord>,
    pub covariate_names: Vec<String>,
    pub report: LoadReport,
}

pub fn load_dataset(path: &Path, schema: &DatasetSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    read_dataset(file, schema)
}

struct Layout {
    index: HashMap<String, usize>,
    sources: Vec<String>,
    names: Vec<String>,
}

fn layout(header: &csv::StringRecord, schema: &DatasetSchema, required: &[&str]) -> Result<Layout> {
    let header: Vec<String> = header.iter().map(|h| h.trim().to_string()).collect();
    let mut index = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        if index.insert(h.clone(), i).is_some() {
            return Err(Error::Schema(format!("duplicate header column {h}")));
        }
    }
    let sources = schema.source_columns(&header);
    for col in required.iter().copied().chain(sources.iter().map(String::as_str)) {
        if !index.contains_key(col) {
            return Err(Error::Schema(format!("missing column {col}")));
        }
    }
    let names = schema.expanded_names(&sources);
    Ok(Layout { index, sources, names })
}

fn encode_covariates(
    row: &csv::StringRecord,
    row_no: usize,
    layout: &Layout,
    schema: &DatasetSchema,
) -> Result<Vec<f64>> {
    let mut x = Vec::with_capacity(layout.names.len());
    for col in &layout.sources {
        let raw = row.get(layout.index[col]).unwrap_or("").trim();
        match schema.categorical.get(col) {
            Some(Categorical::Codes { codes }) => {
                let code = codes
                    .get(raw)
                    .ok_or_else(|| Error::data(row_no, col, format!("unknown category label {raw:?}")))?;
                x.push(*code);
            }
            Some(Categorical::OneHot { one_hot }) => {
                if !one_hot.iter().any(|l| l == raw) {
                    return Err(Error::data(row_no, col, format!("unknown category label {raw:?}")));
                }
                x.extend(one_hot.iter().map(|l| if l == raw { 1.0 } else { 0.0 }));
            }
            None => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| Error::data(row_no, col, format!("non-numeric value {raw:?}")))?;
                if !v.is_finite() {
                    return Err(Error::data(row_no, col, format!("non-finite value {raw:?}")));
                }
                x.push(v);
            }
        }
    }
    Ok(x)
}

fn parse_binary(raw: &str, row_no: usize, col: &str, what: &str) -> Result<u8> {
    match raw.trim().parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(0),
        Ok(v) if v == 1.0 => Ok(1),
        _ => Err(Error::data(row_no, col, format!("{what} must be 0 or 1, got {:?}", raw.trim()))),
    }
}

/// Parses a CSV with a header row. Row numbers in errors count data rows from 1.
pub fn read_dataset<R: Read>(reader: R, schema: &DatasetSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let layout = layout(rdr.headers()?, schema, &schema.outcome_columns())?;
    let col = |name: &str| layout.index[name];

    let mut records = Vec::new();
    let mut report = LoadReport {
        rows: 0,
        events: 0,
        arm0: 0,
        arm1: 0,
    };
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        let row_no = k + 1;
        let field = |name: &str| row.get(col(name)).unwrap_or("").trim();

        let id = field(&schema.id_column).to_string();
        if id.is_empty() {
            return Err(Error::data(row_no, &schema.id_column, "empty id"));
        }
        let time_raw = field(&schema.time_column);
        let time: f64 = time_raw
            .parse()
            .map_err(|_| Error::data(row_no, &schema.time_column, format!("non-numeric time {time_raw:?}")))?;
        if !time.is_finite() || time < 0.0 {
            return Err(Error::data(row_no, &schema.time_column, format!("negative or non-finite time {time_raw}")));
        }
        let event = parse_binary(field(&schema.event_column), row_no, &schema.event_column, "event")? == 1;
        let treatment = match parse_binary(field(&schema.treatment_column), row_no, &schema.treatment_column, "treatment")? {
            0 => Arm::T0,
            _ => Arm::T1,
        };
        let covariates = encode_covariates(&row, row_no, &layout, schema)?;

        report.rows += 1;
        report.events += usize::from(event);
        match treatment {
            Arm::T0 => report.arm0 += 1,
            Arm::T1 => report.arm1 += 1,
        }
        records.push(SurvivalRecord {
            id,
            time,
            event,
            treatment,
            covariates,
        });
    }
    Ok(Dataset {
        records,
        covariate_names: layout.names,
        report,
    })
}

/// Patient covariates without outcome columns, for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateRows {
    pub ids: Vec<String>,
    pub covariates: Vec<Vec<f64>>,
    pub covariate_names: Vec<String>,
}

/// Reads id and covariate columns; time, event and treatment columns are
/// ignored when present.
pub fn read_covariates<R: Read>(reader: R, schema: &DatasetSchema) -> Result<CovariateRows> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let mut effective = schema.clone();
    if effective.covariate_columns.is_none() {
        let cols: Vec<String> = header
            .iter()
            .map(|h| h.trim().to_string())
            .filter(|h| !schema.outcome_columns().contains(&h.as_str()))
            .collect();
        effective.covariate_columns = Some(cols);
    }
    let layout = layout(&header, &effective, &[schema.id_column.as_str()])?;
    let mut ids = Vec::new();
    let mut covariates = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        ids.push(row.get(layout.index[&schema.id_column]).unwrap_or("").trim().to_string());
        covariates.push(encode_covariates(&row, k + 1, &layout, &effective)?);
    }
    Ok(CovariateRows {
        ids,
        covariates,
        covariate_names: layout.names,
    })
}

pub fn load_covariates(path: &Path, schema: &DatasetSchema) -> Result<CovariateRows> {
    read_covariates(std::fs::File::open(path)?, schema)
}

/// Writes records under the default schema with full float precision.
pub fn write_dataset<W: Write>(writer: W, records: &[SurvivalRecord], covariate_names: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "time".into(), "event".into(), "treatment".into()];
    header.extend(covariate_names.iter().cloned());
    w.write_record(&header)?;
    for r in records {
        if r.covariates.len() != covariate_names.len() {
            return Err(Error::DimensionMismatch {
                expected: covariate_names.len(),
                got: r.covariates.len(),
            });
        }
        let mut row = vec![
            r.id.clone(),
            r.time.to_string(),
            u8::from(r.event).to_string(),
            r.treatment.to_string(),
        ];
        row.extend(r.covariates.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset(path: &Path, records: &[SurvivalRecord], covariate_names: &[String]) -> Result<()> {
    write_dataset(std::fs::File::create(path)?, records, covariate_names)
}
