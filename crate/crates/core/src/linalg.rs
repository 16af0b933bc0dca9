//! Sparse matrices, direct solvers and extreme eigenvalues of symmetric
//! pencils, backed by `faer`.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Par, Side};
use log::{debug, warn};

use crate::error::LinalgError;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Square sparse matrix in compressed column storage.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    inner: SparseColMat<usize, f64>,
}

impl SparseMatrix {
    /// Duplicate entries are summed.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Result<Self, LinalgError> {
        let trips: Vec<_> = entries.iter().map(|&(i, j, v)| Triplet::new(i, j, v)).collect();
        let inner = SparseColMat::try_new_from_triplets(n, n, &trips)
            .map_err(|e| LinalgError::Factorization(format!("invalid triplets: {e:?}")))?;
        Ok(Self { inner })
    }

    pub fn n(&self) -> usize {
        self.inner.nrows()
    }

    pub fn nnz(&self) -> usize {
        self.inner.val().len()
    }

    pub fn as_faer(&self) -> &SparseColMat<usize, f64> {
        &self.inner
    }

    fn for_each(&self, mut f: impl FnMut(usize, usize, f64)) {
        let sym = self.inner.symbolic();
        let (cp, ri, val) = (sym.col_ptr(), sym.row_idx(), self.inner.val());
        for j in 0..self.n() {
            for idx in cp[j]..cp[j + 1] {
                f(ri[idx], j, val[idx]);
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n());
        let mut y = vec![0.0; self.n()];
        self.for_each(|i, j, v| y[i] += v * x[j]);
        y
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let mut m = Mat::zeros(self.n(), self.n());
        self.for_each(|i, j, v| m[(i, j)] += v);
        m
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n()];
        self.for_each(|i, j, v| {
            if i == j {
                d[i] += v
            }
        });
        d
    }

    pub fn max_abs(&self) -> f64 {
        self.inner.val().iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// `max |a_ij - a_ji| / max |a_ij|`
    pub fn symmetry_defect(&self) -> f64 {
        let d = self.to_dense_if_small();
        match d {
            Some(m) => {
                let mut defect = 0.0f64;
                for i in 0..self.n() {
                    for j in 0..i {
                        defect = defect.max((m[(i, j)] - m[(j, i)]).abs());
                    }
                }
                defect / self.max_abs().max(f64::MIN_POSITIVE)
            }
            None => {
                let mut entries = std::collections::HashMap::new();
                self.for_each(|i, j, v| *entries.entry((i, j)).or_insert(0.0) += v);
                let defect = entries
                    .iter()
                    .map(|(&(i, j), &v)| (v - entries.get(&(j, i)).copied().unwrap_or(0.0)).abs())
                    .fold(0.0f64, f64::max);
                defect / self.max_abs().max(f64::MIN_POSITIVE)
            }
        }
    }

    fn to_dense_if_small(&self) -> Option<Mat<f64>> {
        (self.n() <= 600).then(|| self.to_dense())
    }
}

enum Factor {
    Cholesky(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// Direct solver with a sparse Cholesky factorization, falling back to LU
/// when the matrix is not positive definite, followed by iterative
/// refinement.
pub struct LinearSolver {
    matrix: SparseMatrix,
    factor: Factor,
    tolerance: f64,
}

impl LinearSolver {
    pub const DEFAULT_TOLERANCE: f64 = 1e-12;

    pub fn new(matrix: &SparseMatrix) -> Result<Self, LinalgError> {
        let factor = match matrix.inner.sp_cholesky(Side::Lower) {
            Ok(llt) => Factor::Cholesky(llt),
            Err(e) => {
                debug!("sparse Cholesky failed ({e:?}), switching to LU");
                Factor::Lu(matrix.inner.sp_lu().map_err(|e| LinalgError::Factorization(format!("{e:?}")))?)
            }
        };
        Ok(Self { matrix: matrix.clone(), factor, tolerance: Self::DEFAULT_TOLERANCE })
    }

    /// Only the LU path; used when the matrix is known to be indefinite.
    pub fn new_lu(matrix: &SparseMatrix) -> Result<Self, LinalgError> {
        let lu = matrix.inner.sp_lu().map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
        Ok(Self { matrix: matrix.clone(), factor: Factor::Lu(lu), tolerance: Self::DEFAULT_TOLERANCE })
    }

    pub fn is_cholesky(&self) -> bool {
        matches!(self.factor, Factor::Cholesky(_))
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    fn apply_factor(&self, b: &[f64]) -> Vec<f64> {
        let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        match &self.factor {
            Factor::Cholesky(f) => f.solve_in_place(rhs.as_mut()),
            Factor::Lu(f) => f.solve_in_place(rhs.as_mut()),
        }
        (0..b.len()).map(|i| rhs[(i, 0)]).collect()
    }

    /// Solves `A x = b` to relative residual `tolerance`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
        if b.len() != self.matrix.n() {
            return Err(LinalgError::Dimension { expected: self.matrix.n(), got: b.len() });
        }
        let bn = norm2(b);
        if bn == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let mut x = self.apply_factor(b);
        let mut rel = f64::INFINITY;
        for _ in 0..5 {
            let ax = self.matrix.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            rel = norm2(&r) / bn;
            if !rel.is_finite() {
                break;
            }
            if rel <= self.tolerance {
                return Ok(x);
            }
            let dx = self.apply_factor(&r);
            x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
        }
        // the final update has not been checked yet
        let ax = self.matrix.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let final_rel = norm2(&r) / bn;
        if final_rel <= self.tolerance {
            return Ok(x);
        }
        Err(LinalgError::Inaccurate { residual: final_rel.min(rel), tolerance: self.tolerance })
    }
}

/// Extreme eigenvalues of `H x = lambda K x` with certified residuals
/// `||H x - lambda K x|| / ||K x||`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PencilExtremes {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub residual_min: f64,
    pub residual_max: f64,
}

pub const GEVP_TOLERANCE: f64 = 1e-8;
/// Largest dimension handled by dense factorization.
pub const DENSE_GEVP_LIMIT: usize = 1200;

fn pencil_residual(h: &SparseMatrix, k: &SparseMatrix, lambda: f64, x: &[f64]) -> f64 {
    let hx = h.mul_vec(x);
    let kx = k.mul_vec(x);
    let r: Vec<f64> = hx.iter().zip(&kx).map(|(a, b)| a - lambda * b).collect();
    norm2(&r) / norm2(&kx)
}

/// Dense route: `K = L L^T`, eigenvalues of `L^{-1} H L^{-T}`.
pub fn pencil_extremes_dense(h: &SparseMatrix, k: &SparseMatrix) -> Result<PencilExtremes, LinalgError> {
    let n = k.n();
    if h.n() != n {
        return Err(LinalgError::Dimension { expected: n, got: h.n() });
    }
    if n > DENSE_GEVP_LIMIT {
        return Err(LinalgError::TooLarge { ndof: n, limit: DENSE_GEVP_LIMIT });
    }
    let kd = k.to_dense();
    let llt = kd.llt(Side::Lower).map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
    let l = llt.L();
    let mut c = h.to_dense();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, c.as_mut(), Par::Seq);
    let mut ct = c.transpose().to_owned();
    faer::linalg::triangular_solve::solve_lower_triangular_in_place(l, ct.as_mut(), Par::Seq);
    let sym = Mat::from_fn(n, n, |i, j| 0.5 * (ct[(i, j)] + ct[(j, i)]));
    let eig = sym.self_adjoint_eigen(Side::Lower).map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    let back = |col: usize| -> Vec<f64> {
        let mut y = Mat::from_fn(n, 1, |i, _| u[(i, col)]);
        faer::linalg::triangular_solve::solve_upper_triangular_in_place(l.transpose(), y.as_mut(), Par::Seq);
        (0..n).map(|i| y[(i, 0)]).collect()
    };
    let (lmin, lmax) = (s[0], s[n - 1]);
    Ok(PencilExtremes {
        lambda_min: lmin,
        lambda_max: lmax,
        residual_min: pencil_residual(h, k, lmin, &back(0)),
        residual_max: pencil_residual(h, k, lmax, &back(n - 1)),
    })
}

struct Ritz {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
}

/// Lanczos with full reorthogonalization in the `K` inner product for an
/// operator that is self-adjoint with respect to it. Returns the Ritz pairs
/// for the smallest and largest Ritz values.
fn k_lanczos(
    n: usize,
    apply: &dyn Fn(&[f64]) -> Result<Vec<f64>, LinalgError>,
    k: &SparseMatrix,
    steps: usize,
    start: &[f64],
) -> Result<Ritz, LinalgError> {
    let mut q: Vec<Vec<f64>> = Vec::new();
    let mut kq: Vec<Vec<f64>> = Vec::new();
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut v = start.to_vec();
    let kv = k.mul_vec(&v);
    let nv = dot(&v, &kv).sqrt();
    v.iter_mut().for_each(|x| *x /= nv);
    let mut kv: Vec<f64> = kv.iter().map(|x| x / nv).collect();
    for j in 0..steps.min(n) {
        let mut w = apply(&v)?;
        let a = dot(&w, &kv);
        alpha.push(a);
        q.push(v.clone());
        kq.push(kv.clone());
        for _ in 0..2 {
            for (qi, kqi) in q.iter().zip(&kq) {
                let c = dot(&w, kqi);
                w.iter_mut().zip(qi).for_each(|(w, q)| *w -= c * q);
            }
        }
        let kw = k.mul_vec(&w);
        let b = dot(&w, &kw).max(0.0).sqrt();
        if j + 1 == steps.min(n) || b < 1e-13 * a.abs().max(1.0) {
            break;
        }
        beta.push(b);
        v = w.iter().map(|x| x / b).collect();
        kv = kw.iter().map(|x| x / b).collect();
    }
    let m = alpha.len();
    let t = Mat::from_fn(m, m, |i, j| {
        if i == j {
            alpha[i]
        } else if i == j + 1 {
            beta[j]
        } else if j == i + 1 {
            beta[i]
        } else {
            0.0
        }
    });
    let eig = t.self_adjoint_eigen(Side::Lower).map_err(|e| LinalgError::Factorization(format!("{e:?}")))?;
    let s = eig.S();
    let u = eig.U();
    let mut values = Vec::new();
    let mut vectors = Vec::new();
    for col in [0, m - 1] {
        let mut x = vec![0.0; n];
        for (i, qi) in q.iter().enumerate() {
            let c = u[(i, col)];
            x.iter_mut().zip(qi).for_each(|(x, q)| *x += c * q);
        }
        values.push(s[col]);
        vectors.push(x);
    }
    Ok(Ritz { values, vectors })
}

fn lanczos_start(n: usize) -> Vec<f64> {
    // deterministic, with components in every direction
    (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.754_877_666).sin()).collect()
}

/// Iterative route: Lanczos on `K^{-1} H` for both ends of the spectrum,
/// with shift-invert on `H^{-1} K` for the lower end if the plain iteration
/// does not certify it and `H` is positive definite.
pub fn pencil_extremes_lanczos(h: &SparseMatrix, k: &SparseMatrix) -> Result<PencilExtremes, LinalgError> {
    let n = k.n();
    if h.n() != n {
        return Err(LinalgError::Dimension { expected: n, got: h.n() });
    }
    let ks = LinearSolver::new(k)?;
    let start = lanczos_start(n);
    let apply = |x: &[f64]| ks.solve(&h.mul_vec(x));
    let mut steps = 40;
    let mut best = None;
    while steps <= 400 {
        let ritz = k_lanczos(n, &apply, k, steps, &start)?;
        let rmin = pencil_residual(h, k, ritz.values[0], &ritz.vectors[0]);
        let rmax = pencil_residual(h, k, ritz.values[1], &ritz.vectors[1]);
        debug!("lanczos {steps} steps: [{}, {}] residuals {rmin:e} {rmax:e}", ritz.values[0], ritz.values[1]);
        let ext = PencilExtremes {
            lambda_min: ritz.values[0],
            lambda_max: ritz.values[1],
            residual_min: rmin,
            residual_max: rmax,
        };
        best = Some(ext);
        if (rmin <= GEVP_TOLERANCE && rmax <= GEVP_TOLERANCE) || steps >= n {
            return Ok(ext);
        }
        steps *= 2;
    }
    let mut ext = best.expect("at least one Lanczos run");
    if ext.residual_min > GEVP_TOLERANCE {
        if let Ok(hs) = LinearSolver::new(h).and_then(|s| if s.is_cholesky() { Ok(s) } else { Err(LinalgError::Factorization("indefinite".into())) }) {
            let apply_inv = |x: &[f64]| hs.solve(&k.mul_vec(x));
            let ritz = k_lanczos(n, &apply_inv, k, 200, &start)?;
            let mu = ritz.values[1];
            let r = pencil_residual(h, k, 1.0 / mu, &ritz.vectors[1]);
            if r < ext.residual_min {
                ext.lambda_min = 1.0 / mu;
                ext.residual_min = r;
            }
        }
    }
    if ext.residual_min > GEVP_TOLERANCE || ext.residual_max > GEVP_TOLERANCE {
        warn!("generalized eigenvalues not certified: residuals {:e}, {:e}", ext.residual_min, ext.residual_max);
        return Err(LinalgError::EigenNotConverged { residual: ext.residual_min.max(ext.residual_max) });
    }
    Ok(ext)
}

/// Dense route for small pencils, Lanczos otherwise.
pub fn pencil_extremes(h: &SparseMatrix, k: &SparseMatrix) -> Result<PencilExtremes, LinalgError> {
    if k.n() <= DENSE_GEVP_LIMIT {
        pencil_extremes_dense(h, k)
    } else {
        pencil_extremes_lanczos(h, k)
    }
}
