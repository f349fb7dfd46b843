//! Train/test datasets in the adjacency-list text format
//! (`<user> <item> <item> ...`, one user per line).

use std::fs;
use std::path::Path;

use log::warn;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{PolyCfError, Result};
use crate::interaction::InteractionMatrix;

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub train: InteractionMatrix,
    /// Held-out items per user, sorted, disjoint from that user's train items.
    pub test: Vec<Vec<usize>>,
}

struct ParsedFile {
    rows: Vec<(usize, Vec<usize>)>,
    lines: usize,
    /// Largest user id, including users listed without items.
    max_user: Option<usize>,
}

fn parse_file(path: &Path) -> Result<ParsedFile> {
    let text = fs::read_to_string(path).map_err(|e| PolyCfError::io(path, e))?;
    let mut rows = Vec::new();
    let mut lines = 0;
    let mut max_user = None;
    for (lineno, line) in text.lines().enumerate() {
        let mut ids = Vec::new();
        for tok in line.split_whitespace() {
            let id: usize = tok.parse().map_err(|_| PolyCfError::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                msg: format!("malformed id {tok:?}"),
            })?;
            ids.push(id);
        }
        if ids.is_empty() {
            continue;
        }
        lines += 1;
        max_user = max_user.max(Some(ids[0]));
        if ids.len() == 1 {
            continue;
        }
        let user = ids[0];
        ids.remove(0);
        rows.push((user, ids));
    }
    Ok(ParsedFile {
        rows,
        lines,
        max_user,
    })
}

/// Loads a LightGCN-style train/test pair. Ids are used as dense indices.
pub fn load_dataset(train_path: impl AsRef<Path>, test_path: impl AsRef<Path>) -> Result<Dataset> {
    let train_path = train_path.as_ref();
    let test_path = test_path.as_ref();
    let train = parse_file(train_path)?;
    if train.rows.is_empty() {
        return Err(PolyCfError::EmptyTrain(train_path.to_path_buf()));
    }
    let test = parse_file(test_path)?;

    let lines = train.lines + test.lines;
    let max_user = train.max_user.max(test.max_user).unwrap_or(0);
    let max_item = train
        .rows
        .iter()
        .chain(&test.rows)
        .flat_map(|(_, items)| items.iter().copied())
        .max()
        .unwrap_or(0);
    let max_id = max_user.max(max_item);
    if max_id > 10 * lines {
        return Err(PolyCfError::SparseIds { id: max_id, lines });
    }
    let (m, n) = (max_user + 1, max_item + 1);

    let mut train_rows = vec![Vec::new(); m];
    for (u, items) in train.rows {
        train_rows[u].extend(items);
    }
    let mut test_rows = vec![Vec::new(); m];
    for (u, items) in test.rows {
        test_rows[u].extend(items);
    }
    let name = train_path.parent().and_then(|p| p.file_name()).map_or_else(
        || "dataset".to_string(),
        |s| s.to_string_lossy().into_owned(),
    );
    Dataset::from_rows(name, m, n, &train_rows, test_rows)
}

impl Dataset {
    /// Assembles a dataset, dropping test items that also occur in train.
    pub fn from_rows(
        name: impl Into<String>,
        num_users: usize,
        num_items: usize,
        train_rows: &[Vec<usize>],
        mut test: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let train = InteractionMatrix::from_user_items(num_users, num_items, train_rows)?;
        if train.nnz() == 0 {
            return Err(PolyCfError::invalid("training matrix is empty"));
        }
        test.resize(num_users, Vec::new());
        let mut overlap = 0;
        for (u, items) in test.iter_mut().enumerate() {
            items.sort_unstable();
            items.dedup();
            if let Some(&bad) = items.iter().find(|&&i| i >= num_items) {
                return Err(PolyCfError::invalid(format!(
                    "test item {bad} out of range"
                )));
            }
            let before = items.len();
            items.retain(|&i| !train.contains(u, i));
            overlap += before - items.len();
        }
        if overlap > 0 {
            warn!("dropped {overlap} test interactions that also appear in train");
        }
        let cold = train.user_degrees().iter().filter(|&&d| d == 0).count();
        if cold > 0 {
            warn!("{cold} users have no train interactions and are excluded from operators");
        }
        Ok(Self {
            name: name.into(),
            train,
            test,
        })
    }

    pub fn num_users(&self) -> usize {
        self.train.num_users()
    }

    pub fn num_items(&self) -> usize {
        self.train.num_items()
    }

    pub fn num_test(&self) -> usize {
        self.test.iter().map(Vec::len).sum()
    }

    /// Content hash over the canonical train/test lists (16 hex chars).
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.num_users() as u64).to_le_bytes());
        h.update((self.num_items() as u64).to_le_bytes());
        for u in 0..self.num_users() {
            h.update(b"R");
            for &i in self.train.user_items(u) {
                h.update((i as u64).to_le_bytes());
            }
            h.update(b"T");
            for &i in &self.test[u] {
                h.update((i as u64).to_le_bytes());
            }
        }
        hex::encode(&h.finalize()[..8])
    }

    /// Moves a `fraction` of each user's train items into a fresh test split.
    /// Returns the reduced training set; the original test split is discarded.
    pub fn split_validation(&self, fraction: f64, seed: u64) -> Result<Dataset> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(PolyCfError::invalid(format!(
                "validation fraction {fraction} outside [0, 1)"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train_rows = Vec::with_capacity(self.num_users());
        let mut val_rows = Vec::with_capacity(self.num_users());
        for u in 0..self.num_users() {
            let mut items = self.train.user_items(u).to_vec();
            items.shuffle(&mut rng);
            let take = ((items.len() as f64) * fraction).floor() as usize;
            // keep at least one train item per user
            let take = take.min(items.len().saturating_sub(1));
            let val = items.split_off(items.len() - take);
            train_rows.push(items);
            val_rows.push(val);
        }
        Dataset::from_rows(
            format!("{}-val", self.name),
            self.num_users(),
            self.num_items(),
            &train_rows,
            val_rows,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::File::create(&p)
            .unwrap()
            .write_all(body.as_bytes())
            .unwrap();
        p
    }

    #[test]
    fn loads_small_pair() {
        let dir = tempfile::tempdir().unwrap();
        let tr = write(dir.path(), "train.txt", "0 0 1\n1 1\n");
        let te = write(dir.path(), "test.txt", "");
        let d = load_dataset(&tr, &te).unwrap();
        assert_eq!((d.num_users(), d.num_items()), (2, 2));
        assert_eq!(d.train.nnz(), 3);
        assert_eq!(d.train.user_degrees(), &[2, 1]);
        assert_eq!(d.train.item_degrees(), &[1, 2]);
    }

    #[test]
    fn dedups_and_skips_blank_lines() {
        let dir = tempfile::tempdir().unwrap();
        let tr = write(dir.path(), "train.txt", "0 5 5\n\n3\n");
        let te = write(dir.path(), "test.txt", "0 2 5\n");
        let d = load_dataset(&tr, &te).unwrap();
        assert_eq!(d.train.nnz(), 1);
        assert_eq!(d.train.user_degrees()[0], 1);
        assert_eq!(d.num_users(), 4);
        // item 5 is a train item, removed from test
        assert_eq!(d.test[0], vec![2]);
    }

    #[test]
    fn malformed_token_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let tr = write(dir.path(), "train.txt", "0 1\n1 x\n");
        let te = write(dir.path(), "test.txt", "");
        match load_dataset(&tr, &te) {
            Err(PolyCfError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_train_is_error() {
        let dir = tempfile::tempdir().unwrap();
        let tr = write(dir.path(), "train.txt", "\n");
        let te = write(dir.path(), "test.txt", "0 1\n");
        assert!(matches!(
            load_dataset(&tr, &te),
            Err(PolyCfError::EmptyTrain(_))
        ));
    }

    #[test]
    fn sparse_ids_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let tr = write(dir.path(), "train.txt", "0 1000\n");
        let te = write(dir.path(), "test.txt", "");
        assert!(matches!(
            load_dataset(&tr, &te),
            Err(PolyCfError::SparseIds { .. })
        ));
    }

    #[test]
    fn validation_split_keeps_one_item() {
        let rows = vec![vec![0, 1, 2, 3], vec![1]];
        let d = Dataset::from_rows("t", 2, 4, &rows, vec![]).unwrap();
        let v = d.split_validation(0.5, 3).unwrap();
        assert_eq!(v.train.user_degrees(), &[2, 1]);
        assert_eq!(v.test[0].len(), 2);
        assert!(v.test[1].is_empty());
        assert_ne!(d.content_hash(), v.content_hash());
    }
}
