//! Generated datasets for desk-scale experiments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::Dataset;
use crate::error::Result;
use crate::interaction::InteractionMatrix;

/// Users and items split into equal communities; interactions are Bernoulli
/// with a high within-community and a low cross-community rate. A fraction
/// of each user's within-community interactions is held out as test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockConfig {
    pub users: usize,
    pub items: usize,
    pub communities: usize,
    pub within: f64,
    pub cross: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for BlockConfig {
    fn default() -> Self {
        Self {
            users: 200,
            items: 200,
            communities: 2,
            within: 0.3,
            cross: 0.01,
            test_fraction: 0.2,
            seed: 0,
        }
    }
}

pub fn block_dataset(cfg: &BlockConfig) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let c = cfg.communities.max(1);
    let user_block = |u: usize| u * c / cfg.users;
    let item_block = |i: usize| i * c / cfg.items;
    let mut train = vec![Vec::new(); cfg.users];
    let mut test = vec![Vec::new(); cfg.users];
    for u in 0..cfg.users {
        let mut inside = Vec::new();
        for i in 0..cfg.items {
            let same = user_block(u) == item_block(i);
            let p = if same { cfg.within } else { cfg.cross };
            if rng.random::<f64>() < p {
                if same {
                    inside.push(i);
                } else {
                    train[u].push(i);
                }
            }
        }
        inside.shuffle(&mut rng);
        let held = ((inside.len() as f64) * cfg.test_fraction).round() as usize;
        let held = held.min(inside.len().saturating_sub(1));
        test[u] = inside.split_off(inside.len() - held);
        train[u].extend(inside);
    }
    Dataset::from_rows(
        format!("block-{}x{}-s{}", cfg.users, cfg.items, cfg.seed),
        cfg.users,
        cfg.items,
        &train,
        test,
    )
}

/// Uniform Bernoulli matrix where every user has at least one item.
pub fn random_interactions<R: Rng + ?Sized>(
    m: usize,
    n: usize,
    density: f64,
    rng: &mut R,
) -> Result<InteractionMatrix> {
    let rows: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let mut row: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < density).collect();
            if row.is_empty() {
                row.push(rng.random_range(0..n));
            }
            row
        })
        .collect();
    InteractionMatrix::from_user_items(m, n, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_dataset_shape() {
        let d = block_dataset(&BlockConfig::default()).unwrap();
        assert_eq!((d.num_users(), d.num_items()), (200, 200));
        // test items stay inside the user's own community
        for u in 0..200 {
            for &i in &d.test[u] {
                assert_eq!(u / 100, i / 100);
                assert!(!d.train.contains(u, i));
            }
        }
        let density = d.train.nnz() as f64 / 40_000.0;
        assert!(density > 0.1 && density < 0.16, "{density}");
        let again = block_dataset(&BlockConfig::default()).unwrap();
        assert_eq!(d.content_hash(), again.content_hash());
    }
}
