//! Dense decompositions used by the nuclear-norm prox and the spectral diagnostics.
//!
//! Symmetric matrices go through Householder tridiagonalization followed by
//! implicit QL iteration. Everything else goes through one-sided (Hestenes)
//! Jacobi, which orthogonalizes the columns of the input directly.

use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Sweep limit for one-sided Jacobi.
pub const JACOBI_MAX_SWEEPS: usize = 100;
/// Relative off-diagonal tolerance for one-sided Jacobi.
pub const JACOBI_TOL: f64 = 1e-10;
/// Per-eigenvalue iteration limit for the QL stage.
const QL_MAX_ITER: usize = 60;

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Array1<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: Array2<f64>,
}

/// `Z = U diag(sigma) Vᵀ` with `sigma` nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Array2<f64>,
    pub sigma: Array1<f64>,
    pub v: Array2<f64>,
}

impl SvdResult {
    pub fn reconstruct(&self) -> Array2<f64> {
        let us = &self.u * &self.sigma.view().insert_axis(Axis(0));
        us.dot(&self.v.t())
    }
}

pub fn is_symmetric(m: ArrayView2<f64>) -> bool {
    let (r, c) = m.dim();
    if r != c {
        return false;
    }
    (0..r).all(|i| (0..i).all(|j| m[[i, j]] == m[[j, i]]))
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Only the lower triangle is read.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> Result<SymmetricEigen> {
    let n = square_dim(a)?;
    let (d, vt) = tridiag_ql(a, n, true)?;
    let vt = vt.expect("vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| d[x].total_cmp(&d[y]));
    let values = Array1::from_iter(order.iter().map(|&k| d[k]));
    let mut vectors = Array2::zeros((n, n));
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vectors[[row, col]] = vt[k * n + row];
        }
    }
    Ok(SymmetricEigen { values, vectors })
}

/// Eigenvalues of a symmetric matrix (ascending), skipping vector accumulation.
pub fn symmetric_eigenvalues(a: ArrayView2<f64>) -> Result<Array1<f64>> {
    let n = square_dim(a)?;
    let (mut d, _) = tridiag_ql(a, n, false)?;
    d.sort_by(f64::total_cmp);
    Ok(Array1::from(d))
}

/// SVD through the symmetric eigendecomposition: `σ = |λ|`, `u_k = sign(λ_k) v_k`.
pub fn svd_symmetric(a: ArrayView2<f64>) -> Result<SvdResult> {
    let eig = symmetric_eigen(a)?;
    let n = eig.values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.values[y].abs().total_cmp(&eig.values[x].abs()));
    let mut u = Array2::zeros((n, n));
    let mut v = Array2::zeros((n, n));
    let mut sigma = Array1::zeros(n);
    for (col, &k) in order.iter().enumerate() {
        let lam = eig.values[k];
        let sign = if lam < 0.0 { -1.0 } else { 1.0 };
        sigma[col] = lam.abs();
        for row in 0..n {
            let x = eig.vectors[[row, k]];
            v[[row, col]] = x;
            u[[row, col]] = sign * x;
        }
    }
    Ok(SvdResult { u, sigma, v })
}

/// One-sided Jacobi SVD of an `m × n` matrix with `m >= n`.
pub fn svd_jacobi(a: ArrayView2<f64>) -> Result<SvdResult> {
    let (m, n) = a.dim();
    if m < n {
        return Err(Error::Shape(format!(
            "one-sided Jacobi needs rows >= cols, got {m}x{n}"
        )));
    }
    // Columns stored as contiguous rows.
    let mut ut: Vec<Vec<f64>> = (0..n).map(|j| a.column(j).to_vec()).collect();
    let mut vt: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();

    let mut converged = n < 2;
    let mut sweeps = 0;
    while !converged && sweeps < JACOBI_MAX_SWEEPS {
        sweeps += 1;
        converged = true;
        for p in 0..n - 1 {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let (up, uq) = (&ut[p], &ut[q]);
                    let mut al = 0.0;
                    let mut be = 0.0;
                    let mut ga = 0.0;
                    for k in 0..m {
                        al += up[k] * up[k];
                        be += uq[k] * uq[k];
                        ga += up[k] * uq[k];
                    }
                    (al, be, ga)
                };
                if gamma == 0.0 || gamma.abs() <= JACOBI_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                converged = false;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(&mut ut, p, q, c, s);
                rotate_pair(&mut vt, p, q, c, s);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            routine: "one-sided Jacobi SVD",
            iterations: sweeps,
        });
    }

    let norms: Vec<f64> = ut.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]));
    let scale = norms.iter().cloned().fold(0.0, f64::max);

    let mut u = Array2::zeros((m, n));
    let mut v = Array2::zeros((n, n));
    let mut sigma = Array1::zeros(n);
    let mut missing = Vec::new();
    for (col, &k) in order.iter().enumerate() {
        sigma[col] = norms[k];
        for row in 0..n {
            v[[row, col]] = vt[k][row];
        }
        if norms[k] > scale * 1e-14 && norms[k] > 0.0 {
            for row in 0..m {
                u[[row, col]] = ut[k][row] / norms[k];
            }
        } else {
            missing.push(col);
        }
    }
    complete_orthonormal(&mut u, &missing);
    Ok(SvdResult { u, sigma, v })
}

/// Dispatches to the symmetric path when `a` is exactly symmetric.
pub fn svd(a: ArrayView2<f64>) -> Result<SvdResult> {
    if is_symmetric(a) {
        svd_symmetric(a)
    } else {
        svd_jacobi(a)
    }
}

/// Singular values only, nonincreasing.
pub fn singular_values(a: ArrayView2<f64>) -> Result<Array1<f64>> {
    if is_symmetric(a) {
        let mut s: Vec<f64> = symmetric_eigenvalues(a)?.iter().map(|x| x.abs()).collect();
        s.sort_by(|x, y| y.total_cmp(x));
        Ok(Array1::from(s))
    } else {
        Ok(svd_jacobi(a)?.sigma)
    }
}

pub fn nuclear_norm(a: ArrayView2<f64>) -> Result<f64> {
    Ok(singular_values(a)?.sum())
}

fn square_dim(a: ArrayView2<f64>) -> Result<usize> {
    let (r, c) = a.dim();
    if r != c {
        return Err(Error::Shape(format!("expected a square matrix, got {r}x{c}")));
    }
    Ok(r)
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = cols.split_at_mut(q);
    let (xp, xq) = (&mut head[p], &mut tail[0]);
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let (va, vb) = (*a, *b);
        *a = c * va - s * vb;
        *b = s * va + c * vb;
    }
}

/// Fills the listed zero columns of `u` so that all columns are orthonormal.
fn complete_orthonormal(u: &mut Array2<f64>, missing: &[usize]) {
    let m = u.nrows();
    let mut candidate = 0;
    for &col in missing {
        while candidate < m {
            let mut x = Array1::<f64>::zeros(m);
            x[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for j in 0..u.ncols() {
                    if j == col {
                        continue;
                    }
                    let uj = u.column(j);
                    let proj = uj.dot(&x);
                    x.scaled_add(-proj, &uj);
                }
            }
            let norm = x.dot(&x).sqrt();
            if norm > 1e-8 {
                u.column_mut(col).assign(&(x / norm));
                break;
            }
        }
    }
}

/// Householder tridiagonalization followed by implicit QL.
///
/// Returns unsorted eigenvalues and, when requested, eigenvectors stored
/// row-wise (`vt[k * n ..]` is the vector for eigenvalue `k`).
fn tridiag_ql(a: ArrayView2<f64>, n: usize, want_vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    if n == 0 {
        return Ok((Vec::new(), want_vectors.then(Vec::new)));
    }
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            v[i * n + j] = a[[i, j]];
            v[j * n + i] = a[[i, j]];
        }
    }
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];

    // Householder reduction to tridiagonal form.
    for j in 0..n {
        d[j] = v[(n - 1) * n + j];
    }
    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
                v[j * n + i] = 0.0;
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = 0.0;
            }
            for j in 0..i {
                f = d[j];
                v[j * n + i] = f;
                g = e[j] + v[j * n + j] * f;
                for k in j + 1..i {
                    g += v[k * n + j] * d[k];
                    e[k] += v[k * n + j] * f;
                }
                e[j] = g;
            }
            f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    v[k * n + j] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1) * n + j];
                v[i * n + j] = 0.0;
            }
        }
        d[i] = h;
    }

    if want_vectors {
        for i in 0..n - 1 {
            v[(n - 1) * n + i] = v[i * n + i];
            v[i * n + i] = 1.0;
            let h = d[i + 1];
            if h != 0.0 {
                for k in 0..=i {
                    d[k] = v[k * n + i + 1] / h;
                }
                for j in 0..=i {
                    let mut g = 0.0;
                    for k in 0..=i {
                        g += v[k * n + i + 1] * v[k * n + j];
                    }
                    for k in 0..=i {
                        v[k * n + j] -= g * d[k];
                    }
                }
            }
            for k in 0..=i {
                v[k * n + i + 1] = 0.0;
            }
        }
        for j in 0..n {
            d[j] = v[(n - 1) * n + j];
            v[(n - 1) * n + j] = 0.0;
        }
        v[(n - 1) * n + n - 1] = 1.0;
    } else {
        for j in 0..n {
            d[j] = v[j * n + j];
        }
    }
    e[0] = 0.0;

    // Eigenvector rotations below touch columns of v; work on the transpose
    // so each rotation streams over two contiguous rows.
    let mut vt = if want_vectors {
        let mut t = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..n {
                t[c * n + r] = v[r * n + c];
            }
        }
        Some(t)
    } else {
        None
    };
    drop(v);

    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > QL_MAX_ITER {
                    return Err(Error::NoConvergence {
                        routine: "symmetric QL",
                        iterations: iter - 1,
                    });
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(vt) = vt.as_mut() {
                        let (lo, hi) = vt.split_at_mut((i + 1) * n);
                        let row_i = &mut lo[i * n..];
                        let row_i1 = &mut hi[..n];
                        for (a, b) in row_i.iter_mut().zip(row_i1.iter_mut()) {
                            let hb = *b;
                            *b = s * *a + c * hb;
                            *a = c * *a - s * hb;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok((d, vt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
        Array2::from_shape_fn((r, c), |_| rng.gen_range(-1.0..1.0))
    }

    fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
        let m = random_matrix(rng, n, n);
        (&m + &m.t()) / 2.0
    }

    fn max_abs(m: &Array2<f64>) -> f64 {
        m.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    fn orthogonality_error(q: &Array2<f64>) -> f64 {
        let qtq = q.t().dot(q);
        max_abs(&(qtq - Array2::<f64>::eye(q.ncols())))
    }

    #[test]
    fn eigen_of_diagonal() {
        let a = array![[3.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 2.0]];
        let e = symmetric_eigen(a.view()).unwrap();
        assert_eq!(e.values.to_vec(), vec![-1.0, 2.0, 3.0]);
    }

    #[test]
    fn eigen_reconstructs_random_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3, 8, 31] {
            let a = random_symmetric(&mut rng, n);
            let e = symmetric_eigen(a.view()).unwrap();
            let lam = Array2::from_diag(&e.values);
            let rec = e.vectors.dot(&lam).dot(&e.vectors.t());
            assert!(max_abs(&(rec - &a)) < 1e-12, "n={n}");
            assert!(orthogonality_error(&e.vectors) < 1e-12);
            let vals = symmetric_eigenvalues(a.view()).unwrap();
            assert!((vals - &e.values).iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn eigen_handles_zero_and_repeated() {
        let z = Array2::<f64>::zeros((4, 4));
        let e = symmetric_eigen(z.view()).unwrap();
        assert!(e.values.iter().all(|&x| x == 0.0));
        let id = Array2::<f64>::eye(5) * 2.0;
        let e = symmetric_eigen(id.view()).unwrap();
        assert!(e.values.iter().all(|&x| (x - 2.0).abs() < 1e-15));
    }

    #[test]
    fn jacobi_svd_reconstructs_general_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for (r, c) in [(1, 1), (3, 3), (6, 4), (10, 10)] {
            let a = random_matrix(&mut rng, r, c);
            let s = svd_jacobi(a.view()).unwrap();
            assert!(max_abs(&(s.reconstruct() - &a)) < 1e-10);
            assert!(orthogonality_error(&s.u) < 1e-10);
            assert!(orthogonality_error(&s.v) < 1e-10);
            assert!(s.sigma.windows(2).into_iter().all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn jacobi_svd_rank_deficient_completes_u() {
        let a = array![[1.0, 2.0, 0.0], [2.0, 4.0, 0.0], [0.0, 0.0, 0.0]];
        let s = svd_jacobi(a.view()).unwrap();
        assert!(orthogonality_error(&s.u) < 1e-10);
        assert!(max_abs(&(s.reconstruct() - &a)) < 1e-12);
        assert!(s.sigma[1].abs() < 1e-12 && s.sigma[2].abs() < 1e-12);
    }

    #[test]
    fn symmetric_and_jacobi_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [2, 5, 9] {
            let a = random_symmetric(&mut rng, n);
            let s1 = svd_symmetric(a.view()).unwrap();
            let s2 = svd_jacobi(a.view()).unwrap();
            assert!((&s1.sigma - &s2.sigma).iter().all(|x| x.abs() < 1e-10));
            assert!(max_abs(&(s1.reconstruct() - &a)) < 1e-10);
        }
    }

    #[test]
    fn non_square_eigen_is_shape_error() {
        let a = Array2::<f64>::zeros((2, 3));
        assert!(matches!(symmetric_eigen(a.view()), Err(Error::Shape(_))));
    }
}
