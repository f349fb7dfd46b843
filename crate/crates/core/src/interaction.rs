//! Binary user-item interaction matrix and its degree-normalized factors.

use crate::error::{PolyCfError, Result};
use crate::scalar::Real;
use crate::sparse::CsrMatrix;

/// Sparse binary `m x n` interaction matrix.
///
/// Entries are kept twice: row-major (user -> items) and column-major
/// (item -> users), since the factored Gram product needs both orientations.
/// Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    num_users: usize,
    num_items: usize,
    row_ptr: Vec<usize>,
    row_items: Vec<usize>,
    col_ptr: Vec<usize>,
    col_users: Vec<usize>,
    user_degrees: Vec<usize>,
    item_degrees: Vec<usize>,
}

impl InteractionMatrix {
    /// Builds the matrix from per-user item lists. Duplicates are dropped.
    pub fn from_user_items(
        num_users: usize,
        num_items: usize,
        rows: &[Vec<usize>],
    ) -> Result<Self> {
        if num_users == 0 || num_items == 0 {
            return Err(PolyCfError::invalid("interaction matrix needs m, n >= 1"));
        }
        if rows.len() > num_users {
            return Err(PolyCfError::invalid(format!(
                "{} user rows for {} users",
                rows.len(),
                num_users
            )));
        }
        let mut row_ptr = Vec::with_capacity(num_users + 1);
        let mut row_items = Vec::new();
        row_ptr.push(0);
        for u in 0..num_users {
            if let Some(items) = rows.get(u) {
                let mut items = items.clone();
                items.sort_unstable();
                items.dedup();
                if let Some(&bad) = items.iter().find(|&&i| i >= num_items) {
                    return Err(PolyCfError::invalid(format!(
                        "item {bad} out of range for {num_items} items (user {u})"
                    )));
                }
                row_items.extend_from_slice(&items);
            }
            row_ptr.push(row_items.len());
        }
        Ok(Self::from_csr(num_users, num_items, row_ptr, row_items))
    }

    /// Builds from `(user, item)` pairs.
    pub fn from_pairs(
        num_users: usize,
        num_items: usize,
        pairs: &[(usize, usize)],
    ) -> Result<Self> {
        let mut rows = vec![Vec::new(); num_users];
        for &(u, i) in pairs {
            if u >= num_users {
                return Err(PolyCfError::invalid(format!(
                    "user {u} out of range for {num_users} users"
                )));
            }
            rows[u].push(i);
        }
        Self::from_user_items(num_users, num_items, &rows)
    }

    /// Builds from a dense 0/1 row-major table (test helper scale).
    pub fn from_dense(rows: &[Vec<u8>]) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        let lists: Vec<Vec<usize>> = rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        Self::from_user_items(rows.len(), n, &lists)
    }

    fn from_csr(
        num_users: usize,
        num_items: usize,
        row_ptr: Vec<usize>,
        row_items: Vec<usize>,
    ) -> Self {
        let user_degrees: Vec<usize> = row_ptr.windows(2).map(|w| w[1] - w[0]).collect();
        let mut item_degrees = vec![0usize; num_items];
        for &i in &row_items {
            item_degrees[i] += 1;
        }
        let mut col_ptr = Vec::with_capacity(num_items + 1);
        col_ptr.push(0);
        for &d in &item_degrees {
            col_ptr.push(col_ptr.last().unwrap() + d);
        }
        let mut cursor = col_ptr[..num_items].to_vec();
        let mut col_users = vec![0usize; row_items.len()];
        for u in 0..num_users {
            for &i in &row_items[row_ptr[u]..row_ptr[u + 1]] {
                col_users[cursor[i]] = u;
                cursor[i] += 1;
            }
        }
        Self {
            num_users,
            num_items,
            row_ptr,
            row_items,
            col_ptr,
            col_users,
            user_degrees,
            item_degrees,
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn nnz(&self) -> usize {
        self.row_items.len()
    }

    pub fn user_degrees(&self) -> &[usize] {
        &self.user_degrees
    }

    pub fn item_degrees(&self) -> &[usize] {
        &self.item_degrees
    }

    /// Sorted items of user `u`.
    pub fn user_items(&self, u: usize) -> &[usize] {
        &self.row_items[self.row_ptr[u]..self.row_ptr[u + 1]]
    }

    /// Sorted users of item `i`.
    pub fn item_users(&self, i: usize) -> &[usize] {
        &self.col_users[self.col_ptr[i]..self.col_ptr[i + 1]]
    }

    pub fn contains(&self, u: usize, i: usize) -> bool {
        self.user_items(u).binary_search(&i).is_ok()
    }

    /// Binary train row of `u` as a dense item signal.
    pub fn user_signal<T: Real>(&self, u: usize) -> Vec<T> {
        let mut x = vec![T::zero(); self.num_items];
        for &i in self.user_items(u) {
            x[i] = T::one();
        }
        x
    }

    /// Row-major entry iterator.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.num_users).flat_map(move |u| self.user_items(u).iter().map(move |&i| (u, i)))
    }

    fn csr_with_values<T: Real>(&self, value: impl Fn(usize, usize) -> T) -> CsrMatrix<T> {
        let values = self.entries().map(|(u, i)| value(u, i)).collect();
        CsrMatrix::from_raw(
            self.num_users,
            self.num_items,
            self.row_ptr.clone(),
            self.row_items.clone(),
            values,
        )
    }

    fn csc_with_values<T: Real>(&self, value: impl Fn(usize, usize) -> T) -> CsrMatrix<T> {
        let values = (0..self.num_items)
            .flat_map(|i| self.item_users(i).iter().map(move |&u| (u, i)))
            .map(|(u, i)| value(u, i))
            .collect();
        CsrMatrix::from_raw(
            self.num_items,
            self.num_users,
            self.col_ptr.clone(),
            self.col_users.clone(),
            values,
        )
    }

    /// `R~ = D_U^{-1/2} R D_I^{-1/2}` as an `m x n` CSR matrix.
    pub fn symmetric_normalized<T: Real>(&self) -> CsrMatrix<T> {
        let du = degree_power::<T>(&self.user_degrees, -0.5);
        let di = degree_power::<T>(&self.item_degrees, -0.5);
        self.csr_with_values(|u, i| du[u] * di[i])
    }

    /// Transpose of [`Self::symmetric_normalized`] (`n x m`).
    pub fn symmetric_normalized_t<T: Real>(&self) -> CsrMatrix<T> {
        let du = degree_power::<T>(&self.user_degrees, -0.5);
        let di = degree_power::<T>(&self.item_degrees, -0.5);
        self.csc_with_values(|u, i| du[u] * di[i])
    }
}

/// `d^p` per entry, with zero degrees mapped to weight 0.
pub fn degree_power<T: Real>(degrees: &[usize], p: f64) -> Vec<T> {
    degrees
        .iter()
        .map(|&d| {
            if d == 0 {
                T::zero()
            } else {
                T::lit((d as f64).powf(p))
            }
        })
        .collect()
}

/// The two sparse factors whose product is the generalized Gram operator
/// `G^(gamma) = D_I^{-gamma} R^T D_U^{-1} R D_I^{gamma-1}`.
#[derive(Debug, Clone)]
pub struct NormalizedFactors<T> {
    pub gamma: T,
    /// `D_I^{-gamma} R^T D_U^{-1}`, `n x m`.
    pub left: CsrMatrix<T>,
    /// `R D_I^{gamma-1}`, `m x n`.
    pub right: CsrMatrix<T>,
}

pub fn normalized_interaction<T: Real>(
    r: &InteractionMatrix,
    gamma: T,
) -> Result<NormalizedFactors<T>> {
    let g = gamma.as_f64();
    if !(0.0..=1.0).contains(&g) {
        return Err(PolyCfError::invalid(format!("gamma {g} outside [0, 1]")));
    }
    let di_left = degree_power::<T>(&r.item_degrees, -g);
    let di_right = degree_power::<T>(&r.item_degrees, g - 1.0);
    let du = degree_power::<T>(&r.user_degrees, -1.0);
    let left = r.csc_with_values(|u, i| di_left[i] * du[u]);
    let right = r.csr_with_values(|_, i| di_right[i]);
    Ok(NormalizedFactors { gamma, left, right })
}
