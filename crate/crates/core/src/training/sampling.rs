use rand::seq::index;
use rand::Rng;

use crate::interaction::InteractionMatrix;

/// One `(user, positive, negative)` BPR triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triple {
    pub user: usize,
    pub pos: usize,
    pub neg: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TripleBatch {
    /// Distinct users of the batch, in draw order.
    pub users: Vec<usize>,
    pub triples: Vec<Triple>,
    /// Users that could not be sampled (no train items, or every item seen).
    pub skipped: usize,
}

/// Users with at least one train item and at least one unseen item.
pub fn eligible_users(r: &InteractionMatrix) -> Vec<usize> {
    let n = r.num_items();
    (0..r.num_users())
        .filter(|&u| {
            let d = r.user_degrees()[u];
            d > 0 && d < n
        })
        .collect()
}

/// Draws up to `batch_users` distinct users, then for each one positive and
/// `negatives` rejection-sampled negatives.
pub fn sample_triples<R: Rng + ?Sized>(
    r: &InteractionMatrix,
    batch_users: usize,
    negatives: usize,
    rng: &mut R,
) -> TripleBatch {
    let eligible = eligible_users(r);
    let skipped = r.num_users() - eligible.len();
    sample_from(r, &eligible, batch_users, negatives, skipped, rng)
}

pub(crate) fn sample_from<R: Rng + ?Sized>(
    r: &InteractionMatrix,
    eligible: &[usize],
    batch_users: usize,
    negatives: usize,
    skipped: usize,
    rng: &mut R,
) -> TripleBatch {
    let take = batch_users.min(eligible.len());
    let users: Vec<usize> = index::sample(rng, eligible.len(), take)
        .into_iter()
        .map(|i| eligible[i])
        .collect();
    let n = r.num_items();
    let mut triples = Vec::with_capacity(users.len() * negatives);
    for &u in &users {
        let items = r.user_items(u);
        let pos = items[rng.random_range(0..items.len())];
        for _ in 0..negatives {
            let neg = loop {
                let j = rng.random_range(0..n);
                if items.binary_search(&j).is_err() {
                    break j;
                }
            };
            triples.push(Triple { user: u, pos, neg });
        }
    }
    TripleBatch {
        users,
        triples,
        skipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn forced_negative() {
        let r = InteractionMatrix::from_dense(&[vec![1, 0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..50 {
            let b = sample_triples(&r, 4, 2, &mut rng);
            assert!(b.triples.iter().all(|t| t.pos == 0 && t.neg == 1));
        }
    }

    #[test]
    fn saturated_users_are_skipped() {
        let r = InteractionMatrix::from_dense(&[vec![1, 1], vec![0, 1], vec![0, 0]]).unwrap();
        let b = sample_triples(&r, 10, 1, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(b.users, vec![1]);
        assert_eq!(b.skipped, 2);
    }

    #[test]
    fn constraints_hold_over_many_draws() {
        let r = InteractionMatrix::from_dense(&[
            vec![1, 0, 1, 0, 0, 1],
            vec![0, 1, 0, 0, 1, 0],
            vec![1, 1, 1, 1, 1, 0],
            vec![0, 0, 0, 1, 0, 0],
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut count = 0;
        while count < 100_000 {
            let b = sample_triples(&r, 3, 2, &mut rng);
            let mut seen = b.users.clone();
            seen.sort_unstable();
            seen.dedup();
            assert_eq!(seen.len(), b.users.len());
            for t in &b.triples {
                assert!(r.contains(t.user, t.pos));
                assert!(!r.contains(t.user, t.neg));
            }
            count += b.triples.len();
        }
    }

    #[test]
    fn same_seed_same_batches() {
        let r =
            InteractionMatrix::from_dense(&[vec![1, 0, 1, 0], vec![0, 1, 0, 0], vec![1, 1, 0, 0]])
                .unwrap();
        let mut a = ChaCha8Rng::seed_from_u64(42);
        let mut b = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            assert_eq!(
                sample_triples(&r, 2, 3, &mut a),
                sample_triples(&r, 2, 3, &mut b)
            );
        }
    }
}
