//! Flat `key = value` run configuration. Every key can also be given as a
//! command-line flag of the same name; flags win over the file, the file
//! wins over the defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use polycf::{BasisFamily, PolyBasis};
use sha2::{Digest, Sha256};

use crate::CliError;

pub struct Key {
    pub name: &'static str,
    pub default: &'static str,
    pub help: &'static str,
    /// Presence flag (`--fast`) rather than `--key value`.
    pub switch: bool,
}

const fn key(name: &'static str, default: &'static str, help: &'static str) -> Key {
    Key {
        name,
        default,
        help,
        switch: false,
    }
}

pub const KEYS: &[Key] = &[
    key(
        "dataset",
        "synthetic",
        "dataset name under data_dir, or `synthetic` for the 200x200 block generator",
    ),
    key(
        "data_dir",
        "data",
        "directory holding <dataset>/train.txt and <dataset>/test.txt",
    ),
    key(
        "train_file",
        "",
        "explicit train file (overrides data_dir/dataset)",
    ),
    key(
        "test_file",
        "",
        "explicit test file (overrides data_dir/dataset)",
    ),
    key(
        "synthetic_seed",
        "0",
        "generator seed for the synthetic dataset",
    ),
    key(
        "basis",
        "chebyshev",
        "monomial, chebyshev, bernstein, jacobi or hermite",
    ),
    key("K", "5", "polynomial order"),
    key(
        "gammas",
        "0.3,0.4,0.5,0.6",
        "comma-separated normalization orders in [0, 1]",
    ),
    key("jacobi_a", "1", "Jacobi alpha"),
    key("jacobi_b", "1", "Jacobi beta"),
    key("s", "2", "low-pass cutoff (0 disables the low-pass term)"),
    key("omega", "1", "weight of the low-pass term"),
    key("epochs", "50", "training epochs"),
    key("lr", "0.001", "SGD learning rate"),
    key("batch_users", "1024", "users per batch"),
    key(
        "batches_per_epoch",
        "auto",
        "batches per epoch, or `auto` for one pass over the users",
    ),
    key(
        "noise_eps",
        "0.1",
        "variance of the input noise in the graph objective",
    ),
    key("dropout", "0.2", "kernel dropout rate"),
    key("negatives", "1", "negative samples per positive"),
    key(
        "init_jitter",
        "0.1",
        "std of the Gaussian jitter on the initial kernel",
    ),
    key(
        "seed",
        "2024",
        "seed for sampling, noise, dropout, initialization and the SVD",
    ),
    key("validate", "false", "evaluate after every epoch"),
    key(
        "k",
        "20",
        "cutoff for Recall@k / NDCG@k and recommendation lists",
    ),
    key(
        "output_dir",
        "runs/latest",
        "directory for all artifacts of this run",
    ),
    key(
        "cache_dir",
        "",
        "SVD cache directory (default <output_dir>/cache)",
    ),
    Key {
        name: "fast",
        default: "false",
        help: "parallel reduction without a fixed order (not bit-reproducible)",
        switch: true,
    },
];

/// Keys that name locations rather than affect results.
const LOCATION_KEYS: &[&str] = &[
    "output_dir",
    "cache_dir",
    "data_dir",
    "train_file",
    "test_file",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

fn lookup(name: &str) -> Option<&'static Key> {
    KEYS.iter().find(|k| k.name == name)
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS
                .iter()
                .map(|k| (k.name, k.default.to_string()))
                .collect(),
        }
    }
}

impl RunConfig {
    /// Applies `key = value` lines. Blank lines and `#` comments are skipped;
    /// unknown keys are errors.
    pub fn merge_text(&mut self, text: &str, origin: &str) -> Result<(), CliError> {
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("{origin}:{}: expected `key = value`", no + 1))
            })?;
            self.set(k.trim(), v.trim())
                .map_err(|e| CliError::Usage(format!("{origin}:{}: {e}", no + 1)))?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        self.merge_text(&text, &path.display().to_string())
    }

    pub fn set(&mut self, name: &str, value: &str) -> Result<(), String> {
        let key = lookup(name).ok_or_else(|| format!("unknown config key `{name}`"))?;
        self.values.insert(key.name, value.to_string());
        Ok(())
    }

    pub fn raw(&self, name: &str) -> &str {
        self.values
            .get(name)
            .map(String::as_str)
            .unwrap_or_default()
    }

    pub fn get<T: FromStr>(&self, name: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(name);
        raw.parse()
            .map_err(|e| CliError::Usage(format!("invalid value `{raw}` for `{name}`: {e}")))
    }

    pub fn flag(&self, name: &str) -> Result<bool, CliError> {
        match self.raw(name) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => Err(CliError::Usage(format!(
                "invalid boolean `{other}` for `{name}`"
            ))),
        }
    }

    pub fn optional_path(&self, name: &str) -> Option<PathBuf> {
        let raw = self.raw(name);
        (!raw.is_empty()).then(|| PathBuf::from(raw))
    }

    pub fn gammas(&self) -> Result<Vec<f64>, CliError> {
        self.raw("gammas")
            .split(',')
            .map(|g| {
                g.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::Usage(format!("invalid gamma `{g}`: {e}")))
            })
            .collect()
    }

    pub fn basis(&self) -> Result<PolyBasis, CliError> {
        let family: BasisFamily = self.get("basis")?;
        if family == BasisFamily::Jacobi {
            PolyBasis::jacobi(self.get("jacobi_a")?, self.get("jacobi_b")?)
                .map_err(|e| CliError::Usage(e.to_string()))
        } else {
            Ok(PolyBasis::new(family))
        }
    }

    pub fn batches_per_epoch(&self) -> Result<Option<usize>, CliError> {
        match self.raw("batches_per_epoch") {
            "auto" | "" => Ok(None),
            _ => self.get("batches_per_epoch").map(Some),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        PathBuf::from(self.raw("output_dir"))
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.optional_path("cache_dir")
            .unwrap_or_else(|| self.output_dir().join("cache"))
    }

    /// Every key in table order, as a loadable config file.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            let _ = writeln!(out, "{} = {}", k.name, self.raw(k.name));
        }
        out
    }

    /// Hash of the result-affecting keys; locations are left out so the same
    /// run in another directory hashes the same.
    pub fn content_hash(&self, extra: &str) -> String {
        let mut h = Sha256::new();
        for k in KEYS.iter().filter(|k| !LOCATION_KEYS.contains(&k.name)) {
            h.update(k.name.as_bytes());
            h.update(b"=");
            h.update(self.raw(k.name).as_bytes());
            h.update(b"\n");
        }
        h.update(extra.as_bytes());
        hex::encode(&h.finalize()[..8])
    }
}
