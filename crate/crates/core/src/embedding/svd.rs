//! Seeded randomized subspace iteration for the top-k SVD of a sparse
//! term-document matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use super::TermDocMatrix;
use crate::Scalar;

const MAX_ITERATIONS: usize = 300;
const SIGMA_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SvdError {
    #[error("k = {k} out of range 1..={max}")]
    KOutOfRange { k: usize, max: usize },
}

/// Top-k factors M ≈ W·diag(sigma)·C with orthonormal W columns and C rows.
#[derive(Debug, Clone)]
pub struct SvdFactors<S: Scalar> {
    term_factors: Vec<Vec<S>>,
    singular_values: Vec<S>,
    doc_factors: Vec<Vec<S>>,
}

impl<S: Scalar> SvdFactors<S> {
    pub fn k(&self) -> usize {
        self.singular_values.len()
    }

    pub fn vocab_size(&self) -> usize {
        self.term_factors.len()
    }

    pub fn num_docs(&self) -> usize {
        self.doc_factors.first().map_or(0, Vec::len)
    }

    /// Row v of W: the k-dimensional representation of token v.
    pub fn term_row(&self, v: usize) -> &[S] {
        &self.term_factors[v]
    }

    /// Non-increasing singular values.
    pub fn singular_values(&self) -> &[S] {
        &self.singular_values
    }

    /// Row i of C: the document-side factor for singular direction i.
    pub fn doc_row(&self, i: usize) -> &[S] {
        &self.doc_factors[i]
    }
}

/// Computes the top-k singular triples of M by randomized subspace iteration.
///
/// The iteration is deterministic given the seed. It stops when no singular
/// value estimate moves by more than 1e-10 between iterations, or after 300
/// iterations. The sign of each left vector is normalised so its first
/// non-negligible entry is non-negative.
pub fn truncated_svd<S: Scalar>(
    m: &TermDocMatrix<S>,
    k: usize,
    seed: u64,
) -> Result<SvdFactors<S>, SvdError> {
    let nv = m.nrows();
    let nd = m.ncols();
    let rmax = nv.min(nd);
    if k < 1 || k > rmax {
        return Err(SvdError::KOutOfRange { k, max: rmax });
    }
    let block = (k + 8).min(rmax);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Q spans the current estimate of the top left subspace.
    let mut q: Vec<Vec<S>> = (0..block)
        .map(|_| {
            let omega: Vec<S> = (0..nd).map(|_| gauss(&mut rng)).collect();
            let mut y = vec![S::zero(); nv];
            m.mul_vec(&omega, &mut y);
            y
        })
        .collect();
    orthonormalize(&mut q, &mut rng);

    let tol = S::from_f64(SIGMA_TOLERANCE);
    let mut prev: Option<Vec<S>> = None;
    let mut iters = 0;
    let (q, bt, evals, evecs) = loop {
        // bt holds the columns of Bᵀ where B = QᵀM.
        let bt: Vec<Vec<S>> = q
            .par_iter()
            .map(|qj| {
                let mut z = vec![S::zero(); nd];
                m.mul_t_vec(qj, &mut z);
                z
            })
            .collect();
        let gram = gram_matrix(&bt);
        let (evals, evecs) = jacobi_eigh(gram);
        let sigma: Vec<S> = evals
            .iter()
            .take(k)
            .map(|&l| l.max(S::zero()).sqrt())
            .collect();
        iters += 1;
        let converged = prev.as_ref().is_some_and(|p: &Vec<S>| {
            p.iter()
                .zip(&sigma)
                .map(|(&a, &b)| (a - b).abs())
                .fold(S::zero(), S::max)
                <= tol
        });
        if converged || iters >= MAX_ITERATIONS {
            if !converged {
                log::debug!("svd: singular values still moving after {iters} iterations");
            }
            break (q, bt, evals, evecs);
        }
        prev = Some(sigma);
        let mut z = bt;
        orthonormalize(&mut z, &mut rng);
        q = z
            .par_iter()
            .map(|zj| {
                let mut y = vec![S::zero(); nv];
                m.mul_vec(zj, &mut y);
                y
            })
            .collect();
        orthonormalize(&mut q, &mut rng);
    };

    let zero = S::zero();
    let sigma_max = evals.first().copied().unwrap_or(zero).max(zero).sqrt();
    let rank_tol = S::from_f64(nv.max(nd) as f64) * S::epsilon() * sigma_max;

    let mut term_factors = vec![vec![zero; k]; nv];
    let mut singular_values = Vec::with_capacity(k);
    let mut doc_factors: Vec<Vec<S>> = Vec::with_capacity(k);
    let mut deficient = Vec::new();
    for i in 0..k {
        let sigma_i = evals[i].max(zero).sqrt();
        singular_values.push(sigma_i);
        let mut u = vec![zero; nv];
        for (j, qj) in q.iter().enumerate() {
            let w = evecs[i][j];
            for (ur, &qr) in u.iter_mut().zip(qj) {
                *ur += w * qr;
            }
        }
        // Right vector from Bᵀ·e_i / sigma; below the rank tolerance the
        // direction is noise and gets completed afterwards.
        let mut c = if sigma_i > rank_tol && sigma_i > zero {
            let mut c = vec![zero; nd];
            for (j, btj) in bt.iter().enumerate() {
                let w = evecs[i][j];
                for (cr, &br) in c.iter_mut().zip(btj) {
                    *cr += w * br;
                }
            }
            let inv = S::one() / sigma_i;
            for x in c.iter_mut() {
                *x *= inv;
            }
            Some(c)
        } else {
            deficient.push(i);
            None
        };

        let maxabs = u.iter().fold(zero, |m, &x| m.max(x.abs()));
        let threshold = S::from_f64(1e-8) * maxabs;
        if let Some(&first) = u.iter().find(|x| x.abs() > threshold) {
            if first < zero {
                for x in u.iter_mut() {
                    *x = -*x;
                }
                if let Some(c) = c.as_mut() {
                    for x in c.iter_mut() {
                        *x = -*x;
                    }
                }
            }
        }
        for (row, &ur) in term_factors.iter_mut().zip(&u) {
            row[i] = ur;
        }
        doc_factors.push(c.unwrap_or_default());
    }

    // Deterministic completion: for each missing right vector take the
    // canonical basis direction with the largest residual after projecting
    // out every defined row.
    for &i in &deficient {
        let mut best = (S::neg_infinity(), 0);
        for cand in 0..nd {
            let mut c = vec![zero; nd];
            c[cand] = S::one();
            project_out(&doc_factors, &mut c);
            let nrm = norm(&c);
            if nrm > best.0 {
                best = (nrm, cand);
            }
        }
        let mut c = vec![zero; nd];
        c[best.1] = S::one();
        project_out(&doc_factors, &mut c);
        project_out(&doc_factors, &mut c);
        let nrm = norm(&c);
        assert!(nrm > zero, "found no direction to complete right factors");
        let inv = S::one() / nrm;
        for x in c.iter_mut() {
            *x *= inv;
        }
        doc_factors[i] = c;
    }

    Ok(SvdFactors {
        term_factors,
        singular_values,
        doc_factors,
    })
}

fn gauss<S: Scalar>(rng: &mut ChaCha8Rng) -> S {
    let x: f64 = rng.sample(StandardNormal);
    S::from_f64(x)
}

fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn norm<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

fn project_out<S: Scalar>(basis: &[Vec<S>], x: &mut [S]) {
    for row in basis {
        if row.is_empty() {
            continue;
        }
        let d = dot(row, x);
        for (xr, &br) in x.iter_mut().zip(row) {
            *xr -= d * br;
        }
    }
}

/// Modified Gram-Schmidt with a second pass for stability. Columns that
/// collapse (rank deficiency) are replaced by fresh Gaussian draws until
/// independent, which keeps the result deterministic for a given rng state.
fn orthonormalize<S: Scalar>(cols: &mut [Vec<S>], rng: &mut ChaCha8Rng) {
    for j in 0..cols.len() {
        loop {
            let (head, tail) = cols.split_at_mut(j);
            let col = &mut tail[0];
            let orig = norm(col);
            for _ in 0..2 {
                for prev in head.iter() {
                    let d = dot(prev, col);
                    for (cr, &pr) in col.iter_mut().zip(prev) {
                        *cr -= d * pr;
                    }
                }
            }
            let nrm = norm(col);
            if nrm.is_finite() && nrm > orig * S::from_f64(1e-8) && nrm > S::zero() {
                let inv = S::one() / nrm;
                for x in col.iter_mut() {
                    *x *= inv;
                }
                break;
            }
            for x in col.iter_mut() {
                *x = gauss(rng);
            }
        }
    }
}

fn gram_matrix<S: Scalar>(cols: &[Vec<S>]) -> Vec<Vec<S>> {
    let n = cols.len();
    (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| dot(&cols[i], &cols[j])).collect())
        .collect()
}

/// Cyclic Jacobi eigensolver for small symmetric matrices. Returns
/// eigenvalues in descending order with matching eigenvector columns.
fn jacobi_eigh<S: Scalar>(mut a: Vec<Vec<S>>) -> (Vec<S>, Vec<Vec<S>>) {
    let n = a.len();
    let mut v = vec![vec![S::zero(); n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = S::one();
    }
    if n <= 1 {
        let evals = a.first().map(|r| r[0]).into_iter().collect();
        return (evals, v);
    }
    let frob = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|&x| x * x)
        .sum::<S>()
        .sqrt();
    let stop = frob * S::epsilon() * S::from_f64(n as f64);
    let two = S::from_f64(2.0);
    for _sweep in 0..100 {
        let mut off = S::zero();
        for p in 0..n {
            for q in p + 1..n {
                off = off.max(a[p][q].abs());
            }
        }
        if off <= stop {
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = a[p][q];
                if apq == S::zero() {
                    continue;
                }
                let app = a[p][p];
                let aqq = a[q][q];
                let tau = (aqq - app) / (two * apq);
                let t = if tau >= S::zero() {
                    S::one() / (tau + (S::one() + tau * tau).sqrt())
                } else {
                    S::one() / (tau - (S::one() + tau * tau).sqrt())
                };
                let c = S::one() / (S::one() + t * t).sqrt();
                let s = t * c;
                a[p][p] = app - t * apq;
                a[q][q] = aqq + t * apq;
                a[p][q] = S::zero();
                a[q][p] = S::zero();
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[r][p];
                        let arq = a[r][q];
                        a[r][p] = c * arp - s * arq;
                        a[p][r] = a[r][p];
                        a[r][q] = s * arp + c * arq;
                        a[q][r] = a[r][q];
                    }
                }
                for row in v.iter_mut() {
                    let vrp = row[p];
                    let vrq = row[q];
                    row[p] = c * vrp - s * vrq;
                    row[q] = s * vrp + c * vrq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).expect("finite eigenvalues"));
    let evals: Vec<S> = order.iter().map(|&i| a[i][i]).collect();
    let evecs: Vec<Vec<S>> = order
        .iter()
        .map(|&c0| (0..n).map(|r| v[r][c0]).collect())
        .collect();
    (evals, evecs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::Weighting;
    use approx::assert_relative_eq;

    fn diag_3_2() -> TermDocMatrix<f64> {
        TermDocMatrix::from_columns(2, vec![vec![(0, 3.0)], vec![(1, 2.0)]], Weighting::Raw)
            .unwrap()
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> TermDocMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cols: Vec<Vec<(usize, f64)>> = (0..cols)
            .map(|_| {
                (0..rows)
                    .filter_map(|r| {
                        let x: f64 = rng.random();
                        (x > 0.3).then(|| (r, rng.random::<f64>() * 5.0))
                    })
                    .collect()
            })
            .collect();
        TermDocMatrix::from_columns(rows, cols, Weighting::Raw).unwrap()
    }

    fn max_gram_deviation(rows: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..rows.len() {
            for j in 0..rows.len() {
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(&rows[i], &rows[j]) - expect).abs());
            }
        }
        worst
    }

    #[test]
    fn diagonal_matrix_top_singular_triple() {
        let f = truncated_svd(&diag_3_2(), 1, 42).unwrap();
        assert_relative_eq!(f.singular_values()[0], 3.0, max_relative = 1e-9);
        assert_relative_eq!(f.term_row(0)[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(f.term_row(1)[0], 0.0, epsilon = 1e-8);
        assert_relative_eq!(f.doc_row(0)[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(f.doc_row(0)[1], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn diagonal_matrix_full_factors() {
        let f = truncated_svd(&diag_3_2(), 2, 42).unwrap();
        assert_relative_eq!(f.singular_values()[0], 3.0, max_relative = 1e-9);
        assert_relative_eq!(f.singular_values()[1], 2.0, max_relative = 1e-9);
        assert_relative_eq!(f.term_row(0)[0], 1.0, epsilon = 1e-8);
        assert_relative_eq!(f.term_row(1)[1], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn rank_one_matrix_has_negligible_second_value() {
        let u = [1.0, 2.0, 3.0, 4.0];
        let v = [2.0, 1.0, 2.0];
        let cols: Vec<Vec<(usize, f64)>> = v
            .iter()
            .map(|&vd| u.iter().enumerate().map(|(r, &ur)| (r, ur * vd)).collect())
            .collect();
        let m = TermDocMatrix::from_columns(4, cols, Weighting::Raw).unwrap();
        let f = truncated_svd(&m, 2, 7).unwrap();
        let unorm = (30.0f64).sqrt();
        let vnorm = (9.0f64).sqrt();
        assert_relative_eq!(f.singular_values()[0], unorm * vnorm, max_relative = 1e-8);
        assert!(f.singular_values()[1] <= 1e-8);
        // completion keeps the factor rows orthonormal
        let c_rows: Vec<Vec<f64>> = (0..2).map(|i| f.doc_row(i).to_vec()).collect();
        assert!(max_gram_deviation(&c_rows) <= 1e-8);
    }

    #[test]
    fn factors_are_orthonormal_and_ordered() {
        let m = random_matrix(12, 9, 5);
        let k = 5;
        let f = truncated_svd(&m, k, 11).unwrap();
        for w in f.singular_values().windows(2) {
            assert!(w[0] >= w[1]);
        }
        let w_cols: Vec<Vec<f64>> = (0..k)
            .map(|i| (0..m.nrows()).map(|v| f.term_row(v)[i]).collect())
            .collect();
        assert!(max_gram_deviation(&w_cols) <= 1e-8);
        let c_rows: Vec<Vec<f64>> = (0..k).map(|i| f.doc_row(i).to_vec()).collect();
        assert!(max_gram_deviation(&c_rows) <= 1e-8);
    }

    #[test]
    fn first_nonzero_entry_of_each_left_vector_is_non_negative() {
        let m = random_matrix(10, 8, 3);
        let f = truncated_svd(&m, 4, 9).unwrap();
        for i in 0..4 {
            let col: Vec<f64> = (0..m.nrows()).map(|v| f.term_row(v)[i]).collect();
            let maxabs = col.iter().fold(0.0f64, |a, &x| a.max(x.abs()));
            let first = col.iter().find(|x| x.abs() > 1e-8 * maxabs).unwrap();
            assert!(*first >= 0.0);
        }
    }

    #[test]
    fn same_seed_reproduces_identical_factors() {
        let m = random_matrix(9, 7, 1);
        let a = truncated_svd(&m, 3, 33).unwrap();
        let b = truncated_svd(&m, 3, 33).unwrap();
        assert_eq!(a.singular_values(), b.singular_values());
        for v in 0..m.nrows() {
            assert_eq!(a.term_row(v), b.term_row(v));
        }
        for i in 0..3 {
            assert_eq!(a.doc_row(i), b.doc_row(i));
        }
    }

    #[test]
    fn reconstruction_beats_random_rank_k_factorizations() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..10 {
            let m = random_matrix(8, 6, 100 + trial);
            let k = 3;
            let f = truncated_svd(&m, k, trial).unwrap();
            let ours = reconstruction_error(&m, |v, d| {
                (0..k)
                    .map(|i| f.term_row(v)[i] * f.singular_values()[i] * f.doc_row(i)[d])
                    .sum()
            });
            for _ in 0..100 {
                let left: Vec<Vec<f64>> = (0..m.nrows())
                    .map(|_| (0..k).map(|_| rng.random::<f64>() - 0.5).collect())
                    .collect();
                let right: Vec<Vec<f64>> = (0..k)
                    .map(|_| (0..m.ncols()).map(|_| rng.random::<f64>() * 4.0).collect())
                    .collect();
                let theirs = reconstruction_error(&m, |v, d| {
                    (0..k).map(|i| left[v][i] * right[i][d]).sum()
                });
                assert!(ours <= theirs + 1e-9);
            }
        }
    }

    fn reconstruction_error(m: &TermDocMatrix<f64>, approx: impl Fn(usize, usize) -> f64) -> f64 {
        let mut err = 0.0;
        for v in 0..m.nrows() {
            for d in 0..m.ncols() {
                let diff = m.get(v, d) - approx(v, d);
                err += diff * diff;
            }
        }
        err.sqrt()
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let m = diag_3_2();
        assert!(matches!(
            truncated_svd(&m, 0, 1),
            Err(SvdError::KOutOfRange { k: 0, max: 2 })
        ));
        let err = truncated_svd(&m, 3, 1).unwrap_err();
        assert_eq!(err.to_string(), "k = 3 out of range 1..=2");
    }

    #[test]
    fn f32_factors_match_f64_loosely() {
        let cols32: Vec<Vec<(usize, f32)>> = vec![vec![(0, 3.0)], vec![(1, 2.0)]];
        let m32 = TermDocMatrix::from_columns(2, cols32, Weighting::Raw).unwrap();
        let f = truncated_svd(&m32, 2, 42).unwrap();
        assert_relative_eq!(f.singular_values()[0], 3.0f32, max_relative = 1e-5);
        assert_relative_eq!(f.singular_values()[1], 2.0f32, max_relative = 1e-5);
    }

    #[test]
    fn jacobi_recovers_known_eigenpairs() {
        let a = vec![vec![4.0, 1.0], vec![1.0, 3.0]];
        let (evals, evecs) = jacobi_eigh(a.clone());
        let disc = (5.0f64).sqrt();
        assert_relative_eq!(evals[0], (7.0 + disc) / 2.0, max_relative = 1e-12);
        assert_relative_eq!(evals[1], (7.0 - disc) / 2.0, max_relative = 1e-12);
        for (i, &l) in evals.iter().enumerate() {
            for r in 0..2 {
                let av: f64 = (0..2).map(|c| a[r][c] * evecs[i][c]).sum();
                assert_relative_eq!(av, l * evecs[i][r], epsilon = 1e-10);
            }
        }
    }
}
