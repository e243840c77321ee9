//! Sparse symmetric matrices and the direct/iterative kernels built on them.
//!
//! Everything here is sized for desk-scale structured-grid problems: CSR
//! storage assembled from triplets, a skyline (envelope) Cholesky
//! factorization that exploits the small profile of lexicographically
//! numbered grids, a Lanczos probe for the smallest Ritz value, and inverse
//! iteration for the smallest generalized eigenvalue.

/// Compressed sparse row matrix. Symmetric matrices store both triangles so
/// that row access is cheap in relaxation sweeps.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CsrMatrix {
    /// Build from unsorted triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> CsrMatrix {
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_counts = vec![0usize; n + 1];
        let mut col_idx: Vec<usize> = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in triplets.iter() {
            debug_assert!(r < n && c < n);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_counts[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_counts[r + 1] += row_counts[r];
        }
        CsrMatrix {
            n,
            row_ptr: row_counts,
            col_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] = acc;
        }
    }

    pub fn matvec_alloc(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `x' A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut row_acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                row_acc += v * y[*c];
            }
            acc += x[i] * row_acc;
        }
        acc
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest relative asymmetry `|a_ij - a_ji| / max|a|`.
    pub fn asymmetry(&self) -> f64 {
        let scale = self
            .values
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(*c, i)).abs());
            }
        }
        worst / scale
    }

    /// Extract the principal submatrix on `keep` (sorted, deduplicated).
    /// Entry `(i, j)` of the result is `(keep[i], keep[j])` of `self`.
    pub fn submatrix(&self, keep: &[usize]) -> CsrMatrix {
        let mut inv = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            inv[old] = new;
        }
        let mut row_ptr = Vec::with_capacity(keep.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &old_r in keep {
            let (cols, vals) = self.row(old_r);
            for (c, v) in cols.iter().zip(vals) {
                let new_c = inv[*c];
                if new_c != usize::MAX {
                    col_idx.push(new_c);
                    values.push(*v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            n: keep.len(),
            row_ptr,
            col_idx,
            values,
        }
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum FactorError {
    #[error("matrix is not positive definite: pivot {pivot} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },
}

/// Skyline (envelope) Cholesky factorization `A = L L'`.
///
/// Row `i` of `L` is stored densely from its first structurally nonzero
/// column to the diagonal. Fill-in never leaves the envelope, so for
/// lexicographically numbered structured grids the cost is
/// `O(n * bandwidth^2)` and the factorization is fully deterministic.
#[derive(Debug, Clone)]
pub struct SkylineCholesky {
    n: usize,
    first: Vec<usize>,
    row_start: Vec<usize>,
    vals: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<SkylineCholesky, FactorError> {
        let n = a.n;
        let mut first = vec![0usize; n];
        for i in 0..n {
            let (cols, _) = a.row(i);
            first[i] = cols.iter().copied().find(|&c| c <= i).unwrap_or(i).min(i);
        }
        let mut row_start = vec![0usize; n + 1];
        for i in 0..n {
            row_start[i + 1] = row_start[i] + (i - first[i] + 1);
        }
        let mut vals = vec![0.0f64; row_start[n]];
        // scatter lower triangle of A into the envelope
        for i in 0..n {
            let (cols, avals) = a.row(i);
            for (c, v) in cols.iter().zip(avals) {
                if *c <= i {
                    vals[row_start[i] + (c - first[i])] = *v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            for j in fi..i {
                let fj = first[j];
                let lo = fi.max(fj);
                let mut sum = vals[row_start[i] + (j - fi)];
                if lo < j {
                    let ri = &vals[row_start[i] + (lo - fi)..row_start[i] + (j - fi)];
                    let rj = &vals[row_start[j] + (lo - fj)..row_start[j] + (j - fj)];
                    let mut dot = 0.0;
                    for k in 0..ri.len() {
                        dot += ri[k] * rj[k];
                    }
                    sum -= dot;
                }
                let djj = vals[row_start[j] + (j - fj)];
                vals[row_start[i] + (j - fi)] = sum / djj;
            }
            let mut diag = vals[row_start[i] + (i - fi)];
            for k in fi..i {
                let lik = vals[row_start[i] + (k - fi)];
                diag -= lik * lik;
            }
            if diag <= 0.0 || !diag.is_finite() {
                return Err(FactorError::NotPositiveDefinite {
                    row: i,
                    pivot: diag,
                });
            }
            vals[row_start[i] + (i - fi)] = diag.sqrt();
        }
        Ok(SkylineCholesky {
            n,
            first,
            row_start,
            vals,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(b.len(), self.n);
        let mut y = b.to_vec();
        // forward: L y = b
        for i in 0..self.n {
            let fi = self.first[i];
            let row = &self.vals[self.row_start[i]..self.row_start[i + 1]];
            let mut acc = y[i];
            for (k, &lik) in row[..row.len() - 1].iter().enumerate() {
                acc -= lik * y[fi + k];
            }
            y[i] = acc / row[row.len() - 1];
        }
        // backward: L' x = y
        for j in (0..self.n).rev() {
            let fj = self.first[j];
            let row = &self.vals[self.row_start[j]..self.row_start[j + 1]];
            let xj = y[j] / row[row.len() - 1];
            y[j] = xj;
            for (k, &ljk) in row[..row.len() - 1].iter().enumerate() {
                y[fj + k] -= ljk * xj;
            }
        }
        y
    }
}

/// Smallest Ritz value of a symmetric matrix from `m` Lanczos steps with
/// full reorthogonalization. Used as a positive-definiteness probe.
pub fn smallest_ritz_value(a: &CsrMatrix, m: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let n = a.n;
    if n == 0 {
        return f64::NAN;
    }
    let m = m.min(n);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = (q.iter().map(|x| x * x).sum::<f64>()).sqrt();
    q.iter_mut().for_each(|x| *x /= norm);

    let mut basis: Vec<Vec<f64>> = vec![q.clone()];
    let mut alphas: Vec<f64> = Vec::with_capacity(m);
    let mut betas: Vec<f64> = Vec::with_capacity(m);
    let mut w = vec![0.0; n];
    for step in 0..m {
        a.matvec(&basis[step], &mut w);
        let alpha: f64 = w.iter().zip(&basis[step]).map(|(a, b)| a * b).sum();
        alphas.push(alpha);
        // full reorthogonalization, twice for stability
        for _ in 0..2 {
            for v in &basis {
                let proj: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
                w.iter_mut().zip(v).for_each(|(wi, vi)| *wi -= proj * vi);
            }
        }
        let beta = (w.iter().map(|x| x * x).sum::<f64>()).sqrt();
        if beta < 1e-14 || step + 1 == m {
            break;
        }
        betas.push(beta);
        let next: Vec<f64> = w.iter().map(|x| x / beta).collect();
        basis.push(next);
    }
    tridiag_smallest_eigenvalue(&alphas, &betas)
}

/// Smallest eigenvalue of a symmetric tridiagonal matrix via Sturm bisection.
pub fn tridiag_smallest_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    assert!(m > 0 && beta.len() + 1 >= m);
    // Gershgorin bounds
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..m {
        let b_left = if i > 0 { beta[i - 1].abs() } else { 0.0 };
        let b_right = if i < m - 1 { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - b_left - b_right);
        hi = hi.max(alpha[i] + b_left + b_right);
    }
    // count of eigenvalues below x
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut d = 1.0f64;
        for i in 0..m {
            let b2 = if i > 0 { beta[i - 1] * beta[i - 1] } else { 0.0 };
            d = alpha[i] - x - b2 / d;
            if d == 0.0 {
                d = 1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = (lo - 1e-12 * (1.0 + lo.abs()), hi);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Result of the generalized smallest-eigenvalue solve.
#[derive(Debug, Clone)]
pub struct GeneralizedEigen {
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Smallest eigenvalue of `A v = lambda M v` for SPD `A`, `M` by inverse
/// iteration on the factored `A` with Rayleigh-quotient monitoring.
pub fn smallest_generalized_eigenvalue(
    a: &CsrMatrix,
    m: &CsrMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<GeneralizedEigen, FactorError> {
    assert_eq!(a.n, m.n);
    let chol = SkylineCholesky::factor(a)?;
    let n = a.n;
    let mut v = vec![1.0f64; n];
    let mnorm = m.bilinear(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= mnorm);
    let mut lambda_old = f64::INFINITY;
    let mut mv = vec![0.0; n];
    for it in 1..=max_iter {
        m.matvec(&v, &mut mv);
        let w = chol.solve(&mv);
        let mnorm = m.bilinear(&w, &w).sqrt();
        if mnorm == 0.0 || !mnorm.is_finite() {
            return Ok(GeneralizedEigen {
                lambda: f64::NAN,
                iterations: it,
                converged: false,
            });
        }
        v = w.iter().map(|x| x / mnorm).collect();
        let lambda = a.bilinear(&v, &v) / m.bilinear(&v, &v);
        if (lambda - lambda_old).abs() <= tol * (1.0 + lambda.abs()) {
            return Ok(GeneralizedEigen {
                lambda,
                iterations: it,
                converged: true,
            });
        }
        lambda_old = lambda;
    }
    Ok(GeneralizedEigen {
        lambda: lambda_old,
        iterations: max_iter,
        converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        CsrMatrix::from_triplets(n, &mut t)
    }

    #[test]
    fn triplets_sum_duplicates_and_sort() {
        let mut t = vec![
            (1usize, 0usize, 1.0),
            (0, 0, 1.0),
            (0, 0, 2.0),
            (0, 1, 5.0),
            (1, 1, 4.0),
        ];
        let a = CsrMatrix::from_triplets(2, &mut t);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.get(0, 1), 5.0);
        assert_eq!(a.get(1, 0), 1.0);
        assert_eq!(a.nnz(), 4);
    }

    #[test]
    fn skyline_solves_spd_system() {
        let n = 50;
        let a = laplacian_1d(n);
        let chol = SkylineCholesky::factor(&a).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let b = a.matvec_alloc(&x_true);
        let x = chol.solve(&b);
        for i in 0..n {
            assert_relative_eq!(x[i], x_true[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn skyline_rejects_indefinite() {
        let mut t = vec![(0usize, 0usize, 1.0), (1, 1, -1.0)];
        let a = CsrMatrix::from_triplets(2, &mut t);
        assert!(matches!(
            SkylineCholesky::factor(&a),
            Err(FactorError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn skyline_handles_general_envelope() {
        // random SPD with scattered sparsity
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let mut dense = vec![vec![0.0f64; n]; n];
        for i in 0..n {
            for j in 0..i {
                if rng.gen_bool(0.15) {
                    let v = rng.gen_range(-1.0..1.0);
                    dense[i][j] = v;
                    dense[j][i] = v;
                }
            }
        }
        for i in 0..n {
            dense[i][i] = 10.0 + rng.gen_range(0.0..1.0);
        }
        let mut t = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if dense[i][j] != 0.0 {
                    t.push((i, j, dense[i][j]));
                }
            }
        }
        let a = CsrMatrix::from_triplets(n, &mut t);
        let chol = SkylineCholesky::factor(&a).unwrap();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let b = a.matvec_alloc(&x_true);
        let x = chol.solve(&b);
        for i in 0..n {
            assert_relative_eq!(x[i], x_true[i], epsilon = 1e-10);
        }
    }

    #[test]
    fn lanczos_ritz_probe_bounds_the_spectrum() {
        // clustered spectrum: the probe stays inside [lambda_min, lambda_max]
        let n = 64;
        let a = laplacian_1d(n);
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let ritz = smallest_ritz_value(&a, 50, 1);
        assert!(ritz > 0.0);
        assert!(ritz >= exact - 1e-10 && ritz < 4.0);

        // separated smallest eigenvalue: the probe nails it
        let mut t: Vec<(usize, usize, f64)> =
            (0..40).map(|i| (i, i, 1.0 + i as f64)).collect();
        t.push((0, 0, -0.63)); // shifts the first diagonal to 0.37
        let d = CsrMatrix::from_triplets(40, &mut t);
        let ritz = smallest_ritz_value(&d, 40, 2);
        assert_relative_eq!(ritz, 0.37, max_relative = 1e-8);

        // and flags indefiniteness
        let mut t: Vec<(usize, usize, f64)> =
            (0..40).map(|i| (i, i, 1.0 + i as f64)).collect();
        t.push((5, 5, -8.0)); // diagonal becomes -2
        let d = CsrMatrix::from_triplets(40, &mut t);
        assert!(smallest_ritz_value(&d, 40, 3) < 0.0);
    }

    #[test]
    fn generalized_eigenvalue_identity_mass() {
        let n = 64;
        let a = laplacian_1d(n);
        let mut t = (0..n).map(|i| (i, i, 1.0)).collect::<Vec<_>>();
        let m = CsrMatrix::from_triplets(n, &mut t);
        let exact = 2.0 - 2.0 * (std::f64::consts::PI / (n as f64 + 1.0)).cos();
        let res = smallest_generalized_eigenvalue(&a, &m, 1e-10, 2000).unwrap();
        assert!(res.converged);
        assert_relative_eq!(res.lambda, exact, max_relative = 1e-7);
    }

    #[test]
    fn submatrix_picks_principal_block() {
        let a = laplacian_1d(5);
        let sub = a.submatrix(&[0, 2, 3]);
        assert_eq!(sub.n, 3);
        assert_eq!(sub.get(0, 0), 2.0);
        assert_eq!(sub.get(0, 1), 0.0); // a[0][2] = 0
        assert_eq!(sub.get(1, 2), -1.0); // a[2][3] = -1
    }
}
