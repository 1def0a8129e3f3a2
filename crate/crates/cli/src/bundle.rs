use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use osteo::data::sha256_hex;
use osteo::{Model, ModelFamily};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, conflicting arguments or missing input files.
    Usage(String),
    Domain(osteo::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Domain(e) => write!(f, "{e}"),
        }
    }
}

impl From<osteo::Error> for CliError {
    fn from(e: osteo::Error) -> Self {
        CliError::Domain(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Domain(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{what} '{}' does not exist", path.display())))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub dataset_sha256: String,
}

impl Provenance {
    /// Adds `seed` and `dataset_sha256` to a JSON object.
    pub fn tag<T: Serialize>(&self, payload: &T) -> CliResult<Value> {
        let mut v = serde_json::to_value(payload)?;
        let obj = v
            .as_object_mut()
            .expect("artifact payloads serialize to objects");
        obj.insert("seed".into(), self.seed.into());
        obj.insert("dataset_sha256".into(), self.dataset_sha256.clone().into());
        Ok(v)
    }

    pub fn csv_preamble(&self) -> String {
        format!("# seed={}\n# dataset_sha256={}\n", self.seed, self.dataset_sha256)
    }
}

/// Model plus the context it was fit in.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub family: ModelFamily,
    pub seed: u64,
    pub dataset_sha256: String,
    pub test_fraction: f64,
    pub tool_version: String,
    pub model: Model,
}

impl ModelFile {
    pub fn load(path: &Path) -> CliResult<ModelFile> {
        require_file(path, "model file")?;
        let text = std::fs::read_to_string(path).map_err(|e| osteo::Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text)?;
        file.model.validate()?;
        if file.family != file.model.family {
            return Err(CliError::Domain(osteo::Error::Schema(format!(
                "model file declares family {} but holds a {} model",
                file.family, file.model.family
            ))));
        }
        Ok(file)
    }
}

/// Artifacts staged in memory and written only once a command has fully
/// succeeded, so failures leave no partial output.
#[derive(Default)]
pub struct Staged {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Staged {
    pub fn json<T: Serialize + ?Sized>(&mut self, rel: impl Into<PathBuf>, value: &T) -> CliResult<()> {
        let text = osteo::json::to_canonical_string(value)?;
        self.files.push((rel.into(), text.into_bytes()));
        Ok(())
    }

    pub fn text(&mut self, rel: impl Into<PathBuf>, text: String) {
        self.files.push((rel.into(), text.into_bytes()));
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Path, &[u8])> {
        self.files.iter().map(|(p, b)| (p.as_path(), b.as_slice()))
    }

    pub fn commit(self, root: &Path) -> CliResult<()> {
        for (rel, bytes) in self.files {
            let path = root.join(&rel);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| osteo::Error::io(dir, e))?;
            }
            let tmp = path.with_extension("tmp");
            std::fs::write(&tmp, &bytes).map_err(|e| osteo::Error::io(&tmp, e))?;
            std::fs::rename(&tmp, &path).map_err(|e| osteo::Error::io(&path, e))?;
        }
        Ok(())
    }
}

/// CSV text with a provenance preamble.
pub fn csv_text(prov: &Provenance, header: &[String], rows: &[Vec<String>]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(osteo::Error::from)?;
    for r in rows {
        w.write_record(r).map_err(osteo::Error::from)?;
    }
    let body = w
        .into_inner()
        .map_err(|e| osteo::Error::Input(format!("csv buffer: {e}")))?;
    Ok(prov.csv_preamble() + &String::from_utf8(body).expect("csv output is UTF-8"))
}

/// Every file under `root` (relative paths, sorted) with its SHA-256.
pub fn hash_tree(root: &Path) -> CliResult<Vec<(String, String)>> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) -> CliResult<()> {
        let entries = std::fs::read_dir(dir).map_err(|e| osteo::Error::io(dir, e))?;
        for entry in entries {
            let path = entry.map_err(|e| osteo::Error::io(dir, e))?.path();
            if path.is_dir() {
                walk(root, &path, out)?;
            } else {
                let bytes = std::fs::read(&path).map_err(|e| osteo::Error::io(&path, e))?;
                let rel = path
                    .strip_prefix(root)
                    .expect("walked paths live under the root")
                    .to_string_lossy()
                    .replace('\\', "/");
                out.push((rel, sha256_hex(&bytes)));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    if root.is_dir() {
        walk(root, root, &mut out)?;
    }
    out.sort();
    Ok(out)
}
