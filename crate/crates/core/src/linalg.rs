//! Dense-free linear algebra kernels: a symmetric tridiagonal eigensolver
//! (Sturm-count bisection plus inverse iteration) and an LU factorization
//! for general banded matrices with partial pivoting.
//!
//! Both are written for the matrices this crate actually produces:
//! second-order finite-difference operators on tensor-product grids.

use crate::error::{Error, Result};

/// Number of eigenvalues of the symmetric tridiagonal matrix (diag, off)
/// strictly below `x`, via the Sturm sequence of leading principal minors.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    let safe = f64::MIN_POSITIVE;
    let mut count = 0usize;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let denom = if q.abs() < safe { safe.copysign(q + safe) } else { q };
        q = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Solve (T - shift I) v = b for tridiagonal T, overwriting `b`.
/// Gaussian elimination with partial pivoting; returns false on breakdown.
fn tridiagonal_shifted_solve(diag: &[f64], off: &[f64], shift: f64, b: &mut [f64]) -> bool {
    let n = diag.len();
    // Row storage: main, upper, second upper (fill-in from pivoting).
    let mut d: Vec<f64> = diag.iter().map(|&v| v - shift).collect();
    let mut u: Vec<f64> = off.to_vec();
    let mut u2 = vec![0.0; n.saturating_sub(1)];
    let mut low: Vec<f64> = off.to_vec(); // subdiagonal, consumed in place

    for k in 0..n - 1 {
        if low[k].abs() > d[k].abs() {
            // Swap rows k and k+1.
            b.swap(k, k + 1);
            std::mem::swap(&mut d[k], &mut low[k]);
            let tmp = u[k];
            u[k] = d[k + 1];
            d[k + 1] = tmp;
            if k + 1 < n - 1 {
                u2[k] = u[k + 1];
                u[k + 1] = 0.0;
            }
        }
        if d[k] == 0.0 {
            return false;
        }
        let m = low[k] / d[k];
        d[k + 1] -= m * u[k];
        if k + 1 < n - 1 {
            u[k + 1] -= m * u2[k];
        }
        b[k + 1] -= m * b[k];
    }
    if d[n - 1] == 0.0 {
        return false;
    }
    b[n - 1] /= d[n - 1];
    if n >= 2 {
        b[n - 2] = (b[n - 2] - u[n - 2] * b[n - 1]) / d[n - 2];
    }
    for k in (0..n.saturating_sub(2)).rev() {
        let mut s = b[k] - u[k] * b[k + 1];
        if k < n - 2 {
            s -= u2[k] * b[k + 2];
        }
        b[k] = s / d[k];
    }
    true
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|&x| x * x).sum::<f64>().sqrt()
}

/// Smallest `count` eigenpairs of the symmetric tridiagonal matrix with
/// main diagonal `diag` and off-diagonal `off` (length n-1), eigenvalues
/// ascending, eigenvectors unit in the Euclidean norm with the
/// largest-magnitude entry made positive.
pub fn tridiagonal_eigen_smallest(
    diag: &[f64],
    off: &[f64],
    count: usize,
) -> Result<Vec<(f64, Vec<f64>)>> {
    let n = diag.len();
    if n == 0 || off.len() + 1 != n {
        return Err(Error::config("tridiagonal matrix shape mismatch"));
    }
    if count == 0 || count > n {
        return Err(Error::config(format!(
            "requested {count} eigenpairs of an order-{n} matrix"
        )));
    }
    // Gershgorin enclosure of the whole spectrum.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { off[i - 1].abs() } else { 0.0 }
            + if i < n - 1 { off[i].abs() } else { 0.0 };
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let scale = hi.abs().max(lo.abs()).max(1.0);
    let tol = 2.0 * f64::EPSILON * scale;

    let mut pairs: Vec<(f64, Vec<f64>)> = Vec::with_capacity(count);
    for j in 0..count {
        // Bisect for the (j+1)-th smallest eigenvalue.
        let (mut a, mut b) = (lo, hi);
        while b - a > tol {
            let mid = 0.5 * (a + b);
            if sturm_count(diag, off, mid) > j {
                b = mid;
            } else {
                a = mid;
            }
            if mid == 0.5 * (a + b) {
                break; // interval no longer representable
            }
        }
        let lambda = 0.5 * (a + b);

        // Inverse iteration from a deterministic pseudo-random start.
        let mut v = vec![0.0; n];
        let mut state = 0x9e37_79b9_7f4a_7c15u64.wrapping_mul(j as u64 + 1);
        for x in v.iter_mut() {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            *x = ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5;
        }
        let mut shift = lambda;
        let mut converged = false;
        for pass in 0..8 {
            let nv = norm2(&v);
            for x in v.iter_mut() {
                *x /= nv;
            }
            let mut w = v.clone();
            if !tridiagonal_shifted_solve(diag, off, shift, &mut w) {
                shift += tol.max(1e-300) * (pass + 1) as f64;
                continue;
            }
            let nw = norm2(&w);
            if !nw.is_finite() || nw == 0.0 {
                shift += tol.max(1e-300) * (pass + 1) as f64;
                continue;
            }
            for x in w.iter_mut() {
                *x /= nw;
            }
            // Residual check: ||(T - lambda) w||.
            let mut res = 0.0f64;
            for i in 0..n {
                let mut s = (diag[i] - lambda) * w[i];
                if i > 0 {
                    s += off[i - 1] * w[i - 1];
                }
                if i < n - 1 {
                    s += off[i] * w[i + 1];
                }
                res = res.max(s.abs());
            }
            v = w;
            if res <= 64.0 * tol {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::solver(format!(
                "inverse iteration failed for eigenvalue index {}",
                j + 1
            )));
        }
        // Re-orthogonalize inside near-degenerate clusters.
        for (mu, w) in &pairs {
            if (mu - lambda).abs() <= 1e3 * tol {
                let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
                for (x, y) in v.iter_mut().zip(w) {
                    *x -= dot * y;
                }
            }
        }
        let nv = norm2(&v);
        if nv == 0.0 {
            return Err(Error::solver("degenerate eigenvector cluster collapse"));
        }
        for x in v.iter_mut() {
            *x /= nv;
        }
        // Deterministic sign: largest-magnitude entry positive.
        let mut imax = 0;
        for i in 1..n {
            if v[i].abs() > v[imax].abs() {
                imax = i;
            }
        }
        if v[imax] < 0.0 {
            for x in v.iter_mut() {
                *x = -*x;
            }
        }
        pairs.push((lambda, v));
    }
    Ok(pairs)
}

/// General banded matrix in band storage, `kl` sub- and `ku` superdiagonals.
/// Column-major band layout with `2*kl + ku + 1` rows per column; the top
/// `kl` rows are workspace for pivoting fill-in.
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl Banded {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Banded {
            n,
            kl,
            ku,
            ldab,
            ab: vec![0.0; ldab * n],
        }
    }

    #[inline]
    fn slot(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.n);
        debug_assert!(i + self.ku >= j && j + self.kl >= i, "outside band");
        j * self.ldab + (self.kl + self.ku + i - j)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.ab[s] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let s = self.slot(i, j);
        self.ab[s] += v;
    }

    /// LU factorization with partial pivoting, consuming the matrix.
    pub fn factor(mut self) -> Result<BandedLu> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let mut ipiv = vec![0usize; n];
        let kv = kl + ku; // superdiagonals in the factored form
        let mut ju = 0usize;
        for k in 0..n {
            let km = kl.min(n - 1 - k);
            // Pivot search down column k.
            let base = k * ldab + kv;
            let mut p = 0usize;
            let mut pmax = self.ab[base].abs();
            for i in 1..=km {
                let v = self.ab[base + i].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            ipiv[k] = k + p;
            if pmax == 0.0 {
                return Err(Error::solver(format!(
                    "banded LU: zero pivot at column {k}"
                )));
            }
            ju = ju.max((k + ku + p).min(n - 1));
            if p != 0 {
                for j in k..=ju {
                    let a = j * ldab + (kv + k - j);
                    let b = a + p;
                    self.ab.swap(a, b);
                }
            }
            let pivot = self.ab[base];
            for i in 1..=km {
                self.ab[base + i] /= pivot;
            }
            for j in k + 1..=ju {
                let f = self.ab[j * ldab + (kv + k - j)];
                if f != 0.0 {
                    let col = j * ldab + (kv + k - j);
                    for i in 1..=km {
                        self.ab[col + i] -= f * self.ab[base + i];
                    }
                }
            }
        }
        Ok(BandedLu {
            n,
            kl,
            ku,
            ldab,
            ab: self.ab,
            ipiv,
        })
    }
}

/// Factored form produced by [`Banded::factor`].
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Solve A x = b in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let (n, kl, ldab) = (self.n, self.kl, self.ldab);
        let kv = self.kl + self.ku;
        // Forward: apply L (unit lower, stored multipliers) and row swaps.
        for k in 0..n {
            let p = self.ipiv[k];
            if p != k {
                b.swap(k, p);
            }
            let km = kl.min(n - 1 - k);
            let base = k * ldab + kv;
            let bk = b[k];
            for i in 1..=km {
                b[k + i] -= self.ab[base + i] * bk;
            }
        }
        // Backward: U has bandwidth kl + ku above the diagonal.
        for j in (0..n).rev() {
            let col = j * ldab + kv;
            b[j] /= self.ab[col];
            let lm = kv.min(j);
            let bj = b[j];
            for i in 1..=lm {
                b[j - i] -= self.ab[col - i] * bj;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_tridiag(n: usize, h: f64) -> (Vec<f64>, Vec<f64>) {
        (vec![2.0 / (h * h); n], vec![-1.0 / (h * h); n - 1])
    }

    #[test]
    fn interval_laplacian_eigenvalues_match_closed_form() {
        // Dirichlet second-difference matrix has eigenvalues
        // (4/h^2) sin^2(j pi h / (2 L)).
        let ell = 4.0;
        let nodes = 101;
        let h = ell / (nodes - 1) as f64;
        let n = nodes - 2;
        let (d, e) = laplacian_tridiag(n, h);
        let pairs = tridiagonal_eigen_smallest(&d, &e, 4).unwrap();
        for (j, (lam, _)) in pairs.iter().enumerate() {
            let k = (j + 1) as f64;
            let exact = (4.0 / (h * h)) * (k * std::f64::consts::PI * h / (2.0 * ell)).sin().powi(2);
            assert!(
                (lam - exact).abs() <= 1e-10 * exact.max(1.0),
                "j={} lam={} exact={}",
                j + 1,
                lam,
                exact
            );
        }
    }

    #[test]
    fn eigenvectors_are_orthonormal_and_satisfy_residual() {
        let (d, e) = laplacian_tridiag(50, 0.1);
        let pairs = tridiagonal_eigen_smallest(&d, &e, 6).unwrap();
        for (a, (la, va)) in pairs.iter().enumerate() {
            let mut res = 0.0f64;
            for i in 0..va.len() {
                let mut s = (d[i] - la) * va[i];
                if i > 0 {
                    s += e[i - 1] * va[i - 1];
                }
                if i < va.len() - 1 {
                    s += e[i] * va[i + 1];
                }
                res = res.max(s.abs());
            }
            assert!(res < 1e-9 * d[0], "residual {res}");
            for (b, (_, vb)) in pairs.iter().enumerate() {
                let dot: f64 = va.iter().zip(vb).map(|(x, y)| x * y).sum();
                let want = if a == b { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-8, "dot({a},{b})={dot}");
            }
        }
    }

    #[test]
    fn eigen_count_request_validation() {
        let (d, e) = laplacian_tridiag(5, 0.1);
        assert!(tridiagonal_eigen_smallest(&d, &e, 0).is_err());
        assert!(tridiagonal_eigen_smallest(&d, &e, 6).is_err());
        assert!(tridiagonal_eigen_smallest(&d, &e, 5).is_ok());
    }

    /// Dense reference solve for cross-checking the banded kernel.
    fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let mut p = k;
            for i in k + 1..n {
                if a[i][k].abs() > a[p][k].abs() {
                    p = i;
                }
            }
            a.swap(k, p);
            b.swap(k, p);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for j in k + 1..n {
                s -= a[k][j] * b[j];
            }
            b[k] = s / a[k][k];
        }
        b
    }

    #[test]
    fn banded_lu_matches_dense_on_random_systems() {
        // Deterministic congruential stream; no external RNG needed here.
        let mut state = 42u64;
        let mut next = move || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((state >> 11) as f64) / ((1u64 << 53) as f64) - 0.5
        };
        for &(n, kl, ku) in &[(1usize, 0usize, 0usize), (7, 1, 1), (20, 3, 2), (40, 5, 5)] {
            let mut banded = Banded::new(n, kl, ku);
            let mut dense = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    if i + ku >= j && j + kl >= i {
                        let v = if i == j { 4.0 + next() } else { next() };
                        banded.set(i, j, v);
                        dense[i][j] = v;
                    }
                }
            }
            let b: Vec<f64> = (0..n).map(|_| next()).collect();
            let lu = banded.factor().unwrap();
            let mut x = b.clone();
            lu.solve_in_place(&mut x);
            let y = dense_solve(dense, b);
            for i in 0..n {
                assert!((x[i] - y[i]).abs() < 1e-10, "n={n} i={i} {} vs {}", x[i], y[i]);
            }
        }
    }

    #[test]
    fn banded_lu_pivots_through_zero_diagonal() {
        // [[0, 1], [1, 0]] requires a row swap.
        let mut m = Banded::new(2, 1, 1);
        m.set(0, 1, 1.0);
        m.set(1, 0, 1.0);
        let lu = m.factor().unwrap();
        let mut b = vec![2.0, 3.0];
        lu.solve_in_place(&mut b);
        assert!((b[0] - 3.0).abs() < 1e-15 && (b[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn banded_lu_reports_singularity() {
        let mut m = Banded::new(3, 1, 1);
        m.set(0, 0, 1.0);
        m.set(1, 1, 1.0);
        // Row/column 2 left identically zero.
        assert!(m.factor().is_err());
    }
}
