use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("parse error at row {row}, column '{column}': cannot parse '{value}' as a number")]
    Parse { row: usize, column: String, value: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("stratification error: {0}")]
    Stratification(String),
    #[error("unsupported feature '{0}': crosstabs need a binary or categorical column")]
    UnsupportedFeature(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("prediction error: {0}")]
    Prediction(String),
    #[error("degenerate model: {0}")]
    DegenerateModel(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("AUC is undefined when only one class is present")]
    UndefinedAuc,
    #[error("unsupported model family for {method}: {family}")]
    UnsupportedFamily { method: &'static str, family: String },
    #[error("kernel width too small: all perturbation weights vanished ({0}); use a larger width")]
    KernelWidth(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("grid search failed: {0}")]
    Search(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
