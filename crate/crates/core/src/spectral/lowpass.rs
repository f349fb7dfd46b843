//! Ideal low-pass projector `V_s V_s^T` onto the leading eigenvectors of the
//! symmetric item Gram `G^(1/2) = R~^T R~`.
//!
//! The eigenvectors are the right singular vectors of `R~`. Small problems
//! (`min(m, n) <= dense_threshold`) eigendecompose the smaller-side Gram
//! densely; larger ones run randomized subspace iteration on the sparse `R~`.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use log::debug;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{check_len, PolyCfError, Result};
use crate::interaction::InteractionMatrix;
use crate::scalar::{dot, Real};
use crate::sparse::CsrMatrix;

pub const CACHE_MAGIC: &[u8; 11] = b"POLYCF-SVD\0";
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct LowPassProjector<T> {
    num_items: usize,
    cutoff: usize,
    /// `n x s`, column-major, orthonormal columns.
    basis: Vec<T>,
    /// Leading eigenvalues of `G^(1/2)` (its singular values), descending.
    sigma: Vec<T>,
}

impl<T: Real> LowPassProjector<T> {
    pub fn from_parts(
        num_items: usize,
        cutoff: usize,
        basis: Vec<T>,
        sigma: Vec<T>,
    ) -> Result<Self> {
        check_len(num_items * cutoff, basis.len())?;
        check_len(cutoff, sigma.len())?;
        Ok(Self {
            num_items,
            cutoff,
            basis,
            sigma,
        })
    }

    pub fn empty(num_items: usize) -> Self {
        Self {
            num_items,
            cutoff: 0,
            basis: Vec::new(),
            sigma: Vec::new(),
        }
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn sigma(&self) -> &[T] {
        &self.sigma
    }

    pub fn column(&self, j: usize) -> &[T] {
        &self.basis[j * self.num_items..(j + 1) * self.num_items]
    }

    /// `V_s (V_s^T x)`.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.num_items, x.len())?;
        let mut out = vec![T::zero(); self.num_items];
        for j in 0..self.cutoff {
            let col = self.column(j);
            let c = dot(col, x);
            for (o, &v) in out.iter_mut().zip(col) {
                *o = *o + c * v;
            }
        }
        Ok(out)
    }

    /// `max |V^T V - I|`.
    pub fn orthonormality_error(&self) -> T {
        let mut worst = T::zero();
        for a in 0..self.cutoff {
            for b in a..self.cutoff {
                let target = if a == b { T::one() } else { T::zero() };
                worst = worst.max((dot(self.column(a), self.column(b)) - target).abs());
            }
        }
        worst
    }

    pub fn cast<U: Real>(&self) -> LowPassProjector<U> {
        LowPassProjector {
            num_items: self.num_items,
            cutoff: self.cutoff,
            basis: self.basis.iter().map(|v| U::lit(v.as_f64())).collect(),
            sigma: self.sigma.iter().map(|v| U::lit(v.as_f64())).collect(),
        }
    }

    /// Writes the binary cache: magic, u32 version, u64 n, u64 s, then the
    /// `s` singular values and the `n * s` column-major entries, all as
    /// little-endian f64.
    pub fn write_cache<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(CACHE_MAGIC)?;
        w.write_all(&CACHE_VERSION.to_le_bytes())?;
        w.write_all(&(self.num_items as u64).to_le_bytes())?;
        w.write_all(&(self.cutoff as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(8 * (self.sigma.len() + self.basis.len()));
        for v in self.sigma.iter().chain(&self.basis) {
            buf.extend_from_slice(&v.as_f64().to_le_bytes());
        }
        w.write_all(&buf)
    }

    pub fn read_cache<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)
            .map_err(|e| PolyCfError::Cache(e.to_string()))?;
        let header = CACHE_MAGIC.len() + 4 + 16;
        if bytes.len() < header || &bytes[..CACHE_MAGIC.len()] != CACHE_MAGIC {
            return Err(PolyCfError::Cache("bad magic".into()));
        }
        let mut at = CACHE_MAGIC.len();
        let version = u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());
        at += 4;
        if version != CACHE_VERSION {
            return Err(PolyCfError::Cache(format!("unsupported version {version}")));
        }
        let n = u64::from_le_bytes(bytes[at..at + 8].try_into().unwrap()) as usize;
        let s = u64::from_le_bytes(bytes[at + 8..at + 16].try_into().unwrap()) as usize;
        at += 16;
        let count = s
            .checked_mul(n)
            .and_then(|ns| ns.checked_add(s))
            .ok_or_else(|| PolyCfError::Cache("size overflow".into()))?;
        if bytes.len() != at + 8 * count {
            return Err(PolyCfError::Cache(format!(
                "expected {} payload bytes, found {}",
                8 * count,
                bytes.len() - at
            )));
        }
        let floats: Vec<T> = bytes[at..]
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().unwrap())))
            .collect();
        let (sigma, basis) = floats.split_at(s);
        Self::from_parts(n, s, basis.to_vec(), sigma.to_vec())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = fs::File::create(path).map_err(|e| PolyCfError::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write_cache(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| PolyCfError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = fs::File::open(path).map_err(|e| PolyCfError::io(path, e))?;
        Self::read_cache(std::io::BufReader::new(file))
    }
}

/// `V_s (V_s^T x)`.
pub fn apply_low_pass<T: Real>(p: &LowPassProjector<T>, x: &[T]) -> Result<Vec<T>> {
    p.apply(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvdOptions {
    pub oversample: usize,
    /// Power iterations always performed before testing convergence.
    pub power_iters: usize,
    /// Hard cap on power iterations; exceeding it is an error.
    pub max_iters: usize,
    /// Converged once every `||G v - lambda v|| <= tol * lambda_max`.
    pub tol: f64,
    /// Use the dense path when `min(m, n)` is at most this.
    pub dense_threshold: usize,
}

impl Default for SvdOptions {
    fn default() -> Self {
        Self {
            oversample: 16,
            power_iters: 8,
            max_iters: 100,
            tol: 1e-9,
            dense_threshold: 256,
        }
    }
}

/// Top-`s` right singular vectors of `R~ = D_U^{-1/2} R D_I^{-1/2}`.
pub fn truncated_svd<T: Real>(
    r: &InteractionMatrix,
    s: usize,
    seed: u64,
) -> Result<LowPassProjector<T>> {
    truncated_svd_with(r, s, seed, &SvdOptions::default())
}

pub fn truncated_svd_with<T: Real>(
    r: &InteractionMatrix,
    s: usize,
    seed: u64,
    opts: &SvdOptions,
) -> Result<LowPassProjector<T>> {
    let (m, n) = (r.num_users(), r.num_items());
    if s > m.min(n) {
        return Err(PolyCfError::invalid(format!(
            "low-pass cutoff {s} exceeds min(m, n) = {}",
            m.min(n)
        )));
    }
    if s == 0 {
        return Ok(LowPassProjector::empty(n));
    }
    let (vectors, sigma) = if m.min(n) <= opts.dense_threshold {
        dense_svd(r, s, seed)
    } else {
        randomized_svd(r, s, seed, opts)?
    };
    let basis = vectors.as_slice().iter().map(|&v| T::lit(v)).collect();
    let sigma = sigma.iter().map(|&v| T::lit(v)).collect();
    LowPassProjector::from_parts(n, s, basis, sigma)
}

/// Returns `(V: n x s, eigenvalues of G^(1/2))`.
fn dense_svd(r: &InteractionMatrix, s: usize, seed: u64) -> (DMatrix<f64>, Vec<f64>) {
    let (m, n) = (r.num_users(), r.num_items());
    let rn: CsrMatrix<f64> = r.symmetric_normalized();
    if n <= m {
        let mut g = DMatrix::<f64>::zeros(n, n);
        for u in 0..m {
            let (idx, val) = rn.row(u);
            for (a, &i) in idx.iter().enumerate() {
                for (b, &j) in idx.iter().enumerate() {
                    g[(i, j)] += val[a] * val[b];
                }
            }
        }
        let (vals, vecs) = sorted_eigen(g);
        let v = vecs.columns(0, s).into_owned();
        let sigma = vals[..s].iter().map(|&x| x.max(0.0)).collect();
        (v, sigma)
    } else {
        let rt: CsrMatrix<f64> = r.symmetric_normalized_t();
        let mut g = DMatrix::<f64>::zeros(m, m);
        for i in 0..n {
            let (idx, val) = rt.row(i);
            for (a, &u) in idx.iter().enumerate() {
                for (b, &w) in idx.iter().enumerate() {
                    g[(u, w)] += val[a] * val[b];
                }
            }
        }
        let (vals, vecs) = sorted_eigen(g);
        let lmax = vals.first().copied().unwrap_or(0.0).max(0.0);
        let mut v = DMatrix::<f64>::zeros(n, s);
        let mut filled = 0;
        for j in 0..s {
            let lam = vals[j];
            if lam <= 1e-12 * lmax.max(f64::MIN_POSITIVE) {
                break;
            }
            let col = rt.matvec(vecs.column(j).as_slice());
            let inv = 1.0 / lam.sqrt();
            v.column_mut(j)
                .iter_mut()
                .zip(col)
                .for_each(|(d, c)| *d = c * inv);
            filled += 1;
        }
        // null directions of R~: any orthonormal completion is a valid choice
        if filled < s {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut j = filled;
            while j < s {
                let mut cand: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                for _ in 0..2 {
                    for p in 0..j {
                        let c: f64 = v.column(p).iter().zip(&cand).map(|(a, b)| a * b).sum();
                        cand.iter_mut()
                            .zip(v.column(p).iter())
                            .for_each(|(x, &q)| *x -= c * q);
                    }
                }
                let norm = cand.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 1e-8 {
                    v.column_mut(j)
                        .iter_mut()
                        .zip(&cand)
                        .for_each(|(d, &c)| *d = c / norm);
                    j += 1;
                }
            }
        }
        let sigma = vals[..s].iter().map(|&x| x.max(0.0)).collect();
        (v, sigma)
    }
}

/// Symmetric eigendecomposition sorted by descending eigenvalue.
fn sorted_eigen(g: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let dim = g.nrows();
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::<f64>::zeros(dim, dim);
    for (dst, &src) in order.iter().enumerate() {
        vecs.set_column(dst, &eig.eigenvectors.column(src));
    }
    (vals, vecs)
}

/// `A * X` for CSR `A` and a column-major dense block, parallel over columns.
fn csr_times_block(a: &CsrMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let (rows, cols) = (a.rows(), x.ncols());
    let mut out = DMatrix::<f64>::zeros(rows, cols);
    out.as_mut_slice()
        .par_chunks_mut(rows)
        .enumerate()
        .for_each(|(j, col)| {
            let src = x.column(j);
            for (r, o) in col.iter_mut().enumerate() {
                let (idx, val) = a.row(r);
                *o = idx.iter().zip(val).map(|(&c, &v)| v * src[c]).sum();
            }
        });
    out
}

fn orthonormalize(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

fn randomized_svd(
    r: &InteractionMatrix,
    s: usize,
    seed: u64,
    opts: &SvdOptions,
) -> Result<(DMatrix<f64>, Vec<f64>)> {
    let (m, n) = (r.num_users(), r.num_items());
    let rn: CsrMatrix<f64> = r.symmetric_normalized();
    let rt: CsrMatrix<f64> = r.symmetric_normalized_t();
    let width = (s + opts.oversample).min(m.min(n));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::<f64>::from_fn(n, width, |_, _| StandardNormal.sample(&mut rng));
    let mut q = orthonormalize(csr_times_block(&rn, &omega));

    let mut iter = 0;
    loop {
        iter += 1;
        let z = orthonormalize(csr_times_block(&rt, &q));
        q = orthonormalize(csr_times_block(&rn, &z));

        // Rayleigh-Ritz on span(q): B^T = R~^T Q, eigen of B B^T
        let bt = csr_times_block(&rt, &q);
        let small = bt.transpose() * &bt;
        let (vals, vecs) = sorted_eigen(small);
        let lead: Vec<f64> = vals[..s].iter().map(|&x| x.max(0.0)).collect();
        // v_j = B^T u_j / sigma_j
        let mut v = DMatrix::<f64>::zeros(n, s);
        for j in 0..s {
            let sv = lead[j].sqrt();
            let col = &bt * vecs.column(j);
            if sv > 0.0 {
                v.set_column(j, &(col / sv));
            } else {
                v.set_column(j, &col);
            }
        }
        let v = orthonormalize_keep_sign(v);
        let gv = csr_times_block(&rt, &csr_times_block(&rn, &v));
        let residuals: Vec<f64> = (0..s)
            .map(|j| (gv.column(j) - v.column(j) * lead[j]).norm())
            .collect();
        let worst = residuals.iter().copied().fold(0.0, f64::max);
        let scale = lead.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
        debug!("subspace iteration {iter}: max eigen-residual {worst:e}");
        if iter >= opts.power_iters && worst <= opts.tol * scale {
            return Ok((v, lead));
        }
        if iter >= opts.max_iters {
            return Err(PolyCfError::SvdNotConverged {
                iterations: iter,
                residuals,
            });
        }
    }
}

/// QR re-orthonormalization that keeps each column's direction.
fn orthonormalize_keep_sign(v: DMatrix<f64>) -> DMatrix<f64> {
    let qr = v.qr();
    let rdiag: Vec<f64> = qr.r().diagonal().iter().copied().collect();
    let mut q = qr.q();
    for (j, d) in rdiag.iter().enumerate() {
        if *d < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}
