//! SCADI ingestion, schema validation, label schemes and age scaling.

use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::Matrix;

/// Where in the input file a schema problem was found. Rows are 1-based data
/// rows; the header is line 1, so data row `r` sits on line `r + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Location {
    pub row: Option<usize>,
    pub column: Option<String>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.row, &self.column) {
            (Some(r), Some(c)) => write!(f, "row {r} (line {}), column '{c}'", r + 1),
            (Some(r), None) => write!(f, "row {r} (line {})", r + 1),
            (None, Some(c)) => write!(f, "column '{c}'"),
            (None, None) => write!(f, "file"),
        }
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("data file not found: {}", path.display())]
    MissingFile { path: PathBuf },
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("schema mismatch at {location}: {reason}")]
    SchemaMismatch { location: Location, reason: String },
    #[error("expected a {expected:?} dataset, got {found:?}")]
    WrongScheme { expected: LabelScheme, found: LabelScheme },
    #[error("no feature named '{0}'")]
    UnknownColumn(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

fn mismatch(row: Option<usize>, column: Option<&str>, reason: impl Into<String>) -> DatasetError {
    DatasetError::SchemaMismatch {
        location: Location { row, column: column.map(str::to_owned) },
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LabelScheme {
    /// Seven self-care classes, labels `0..7` for Class1..Class7.
    MultiClass7,
    /// 1 for "no self-care problem" (Class7), 0 otherwise.
    Binary,
}

impl LabelScheme {
    pub fn n_classes(self) -> usize {
        match self {
            LabelScheme::MultiClass7 => 7,
            LabelScheme::Binary => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LabelScheme::MultiClass7 => "multi",
            LabelScheme::Binary => "binary",
        }
    }
}

/// Column layout expected in a SCADI export. Columns are mapped by name, so
/// files with a different column order load unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct ScadiSchema {
    /// Row count a complete file must have; `None` accepts any non-zero count.
    pub n_rows: Option<usize>,
    /// Gender + age + activity indicators.
    pub n_feature_columns: usize,
    pub gender_column: String,
    pub age_column: String,
    pub class_column: String,
    pub class_labels: Vec<String>,
}

pub const SCADI_ROWS: usize = 70;
pub const SCADI_FEATURES: usize = 205;
pub const SCADI_CLASS_COUNTS: [usize; 7] = [2, 7, 1, 12, 3, 29, 16];
/// Index of Class7 ("no self-care problem").
pub const NO_PROBLEM_CLASS: usize = 6;

impl Default for ScadiSchema {
    fn default() -> Self {
        Self {
            n_rows: None,
            n_feature_columns: SCADI_FEATURES,
            gender_column: "Gender".into(),
            age_column: "Age".into(),
            class_column: "Classes".into(),
            class_labels: (1..=7).map(|i| format!("Class{i}")).collect(),
        }
    }
}

impl ScadiSchema {
    /// Schema of the complete published file: 70 rows, 205 features.
    pub fn full() -> Self {
        Self { n_rows: Some(SCADI_ROWS), ..Self::default() }
    }

    fn class_index(&self, raw: &str) -> Option<usize> {
        if let Ok(code) = raw.parse::<usize>() {
            return (1..=self.class_labels.len()).contains(&code).then(|| code - 1);
        }
        self.class_labels.iter().position(|l| l.eq_ignore_ascii_case(raw))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    scheme: LabelScheme,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Matrix,
        labels: Vec<usize>,
        scheme: LabelScheme,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(DatasetError::Invalid(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.rows()
            )));
        }
        if feature_names.len() != features.cols() {
            return Err(DatasetError::Invalid(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                features.cols()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= scheme.n_classes()) {
            return Err(DatasetError::Invalid(format!("label {bad} out of range for {scheme:?}")));
        }
        if !features.is_finite() {
            return Err(DatasetError::Invalid("non-finite feature value".into()));
        }
        Ok(Self { features, labels, scheme, feature_names })
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn scheme(&self) -> LabelScheme {
        self.scheme
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn n_classes(&self) -> usize {
        self.scheme.n_classes()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            scheme: self.scheme,
            feature_names: self.feature_names.clone(),
        }
    }

    /// Same rows with a replaced feature matrix (e.g. after scaling).
    fn with_features(&self, features: Matrix) -> Dataset {
        Dataset { features, ..self.clone() }
    }
}

/// Loads a SCADI CSV from disk.
pub fn load_scadi(path: impl AsRef<Path>, schema: &ScadiSchema) -> Result<Dataset> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(DatasetError::MissingFile { path: path.to_path_buf() });
    }
    let file = std::fs::File::open(path)
        .map_err(|source| DatasetError::Io { path: path.to_path_buf(), source })?;
    load_scadi_from_reader(file, schema)
}

/// Loads a SCADI CSV from any reader. The result is in the seven-class scheme.
pub fn load_scadi_from_reader<R: Read>(reader: R, schema: &ScadiSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| mismatch(None, None, format!("unreadable header: {e}")))?
        .iter()
        .map(|h| h.trim().trim_start_matches('\u{feff}').to_owned())
        .collect();

    if headers.len() != schema.n_feature_columns + 1 {
        return Err(mismatch(
            None,
            None,
            format!(
                "header has {} columns, expected {} features plus the class column",
                headers.len(),
                schema.n_feature_columns
            ),
        ));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| mismatch(None, Some(name), "required column missing from header"))
    };
    let gender_col = find(&schema.gender_column)?;
    let age_col = find(&schema.age_column)?;
    let class_col = find(&schema.class_column)?;
    let activity_cols: Vec<usize> =
        (0..headers.len()).filter(|c| ![gender_col, age_col, class_col].contains(c)).collect();
    if activity_cols.len() + 2 != schema.n_feature_columns {
        return Err(mismatch(None, None, "gender, age and class columns must be distinct"));
    }

    let mut feature_names = vec![headers[gender_col].clone(), headers[age_col].clone()];
    feature_names.extend(activity_cols.iter().map(|&c| headers[c].clone()));

    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { len, expected_len, .. } => mismatch(
                Some(row),
                None,
                format!("has {len} fields, header has {expected_len}"),
            ),
            _ => mismatch(Some(row), None, e.to_string()),
        })?;
        let cell = |c: usize| -> Result<&str> {
            let v = record.get(c).unwrap_or("").trim();
            if v.is_empty() {
                Err(mismatch(Some(row), Some(&headers[c]), "missing value"))
            } else {
                Ok(v)
            }
        };
        let numeric = |c: usize| -> Result<f64> {
            let raw = cell(c)?;
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| mismatch(Some(row), Some(&headers[c]), format!("non-numeric value '{raw}'")))
        };
        let binary = |c: usize| -> Result<f64> {
            let v = numeric(c)?;
            if v == 0.0 || v == 1.0 {
                Ok(v)
            } else {
                Err(mismatch(Some(row), Some(&headers[c]), format!("value {v} is not 0 or 1")))
            }
        };

        data.push(binary(gender_col)?);
        data.push(numeric(age_col)?);
        for &c in &activity_cols {
            data.push(binary(c)?);
        }
        let raw_class = cell(class_col)?;
        let class = schema.class_index(raw_class).ok_or_else(|| {
            mismatch(Some(row), Some(&headers[class_col]), format!("unknown class label '{raw_class}'"))
        })?;
        labels.push(class);
    }

    if labels.is_empty() {
        return Err(mismatch(None, None, "file has a header but no data rows"));
    }
    if let Some(expected) = schema.n_rows {
        if labels.len() != expected {
            return Err(mismatch(
                Some(labels.len()),
                None,
                format!("file has {} data rows, expected {expected}", labels.len()),
            ));
        }
    }
    let n = labels.len();
    let features = Matrix::from_vec(n, schema.n_feature_columns, data)
        .map_err(|e| DatasetError::Invalid(e.to_string()))?;
    Dataset::new(features, labels, LabelScheme::MultiClass7, feature_names)
}

/// Class7 becomes 1, every other class 0. Features are unchanged.
pub fn to_binary(d: &Dataset) -> Result<Dataset> {
    if d.scheme != LabelScheme::MultiClass7 {
        return Err(DatasetError::WrongScheme { expected: LabelScheme::MultiClass7, found: d.scheme });
    }
    Ok(Dataset {
        features: d.features.clone(),
        labels: d.labels.iter().map(|&l| binary_label(l)).collect(),
        scheme: LabelScheme::Binary,
        feature_names: d.feature_names.clone(),
    })
}

/// Seven-class label to binary label.
pub fn binary_label(class: usize) -> usize {
    usize::from(class == NO_PROBLEM_CLASS)
}

/// Min-max statistics of the age column, taken from training rows only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessState {
    pub age_column: String,
    pub age_index: usize,
    pub age_min: f64,
    pub age_max: f64,
    pub applied: bool,
}

impl PreprocessState {
    /// Fits on `train`'s age column.
    pub fn fit(train: &Dataset, age_column: &str) -> Result<Self> {
        let age_index =
            train.feature_index(age_column).ok_or_else(|| DatasetError::UnknownColumn(age_column.into()))?;
        if train.n_rows() == 0 {
            return Err(DatasetError::Invalid("cannot fit age scaling on an empty training set".into()));
        }
        let ages = train.features.column(age_index);
        let age_min = ages.iter().copied().fold(f64::INFINITY, f64::min);
        let age_max = ages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(Self { age_column: age_column.into(), age_index, age_min, age_max, applied: true })
    }

    /// Scaled age. Values outside the training range map outside `[0, 1]`;
    /// a degenerate range maps everything to 0.
    pub fn scale_age(&self, age: f64) -> f64 {
        if self.age_max > self.age_min {
            (age - self.age_min) / (self.age_max - self.age_min)
        } else {
            0.0
        }
    }

    pub fn apply(&self, d: &Dataset) -> Result<Dataset> {
        if d.feature_names.get(self.age_index).map(String::as_str) != Some(self.age_column.as_str()) {
            return Err(DatasetError::UnknownColumn(self.age_column.clone()));
        }
        let mut features = d.features.clone();
        for r in 0..features.rows() {
            let v = features.get(r, self.age_index);
            features.set(r, self.age_index, self.scale_age(v));
        }
        Ok(d.with_features(features))
    }

    pub fn apply_matrix(&self, x: &Matrix) -> Matrix {
        let mut features = x.clone();
        for r in 0..features.rows() {
            let v = features.get(r, self.age_index);
            features.set(r, self.age_index, self.scale_age(v));
        }
        features
    }
}

/// Fits age scaling on `train` and applies it to `train` and every dataset in `others`.
pub fn fit_apply_age_scaling(
    train: &Dataset,
    others: &[&Dataset],
    age_column: &str,
) -> Result<(PreprocessState, Dataset, Vec<Dataset>)> {
    let state = PreprocessState::fit(train, age_column)?;
    let scaled_train = state.apply(train)?;
    let scaled_others = others.iter().map(|d| state.apply(d)).collect::<Result<Vec<_>>>()?;
    Ok((state, scaled_train, scaled_others))
}
