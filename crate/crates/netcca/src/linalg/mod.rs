//! Standardization, thin SVD, regularized covariance operators,
//! nonsparse CCA initialization, and data deflation.
//!
//! Everything here exploits the low-rank structure of n×p data with
//! p ≫ n: the regularized covariance `S + ridge·I` is only ever applied
//! through the thin SVD of the data, so no p×p matrix is inverted or
//! factorized densely.

mod decomp;

pub(crate) use decomp::{cholesky, cholesky_solve, gauss_inverse, jacobi_eigh, jacobi_svd};

use crate::scalar::Scalar;
use ndarray::{Array1, Array2};
use thiserror::Error;

/// Errors from the linear-algebra layer.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("column {index} has zero variance; drop or impute it before standardizing")]
    ZeroVarianceColumn { index: usize },
    #[error("need at least 2 rows, got {n}")]
    TooFewRows { n: usize },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("row count mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("component {requested} exceeds rank {rank}")]
    RankDeficient { requested: usize, rank: usize },
    #[error("deflation basis is rank-deficient at column {column}")]
    DegenerateBasis { column: usize },
}

/// An n×p data matrix with per-column standardization metadata.
#[derive(Debug, Clone)]
pub struct DataMatrix<S: Scalar> {
    values: Array2<S>,
    column_means: Array1<S>,
    column_sds: Array1<S>,
    standardized: bool,
}

impl<S: Scalar> DataMatrix<S> {
    /// Centers and scales every column to mean 0 and unit sample
    /// variance (1/(n−1) convention). The original means and sds are
    /// retained for reporting.
    pub fn standardize(raw: &Array2<S>) -> Result<Self, LinalgError> {
        let (n, p) = raw.dim();
        if n < 2 {
            return Err(LinalgError::TooFewRows { n });
        }
        for ((i, j), v) in raw.indexed_iter() {
            if !v.is_finite() {
                return Err(LinalgError::NonFiniteEntry { row: i, col: j });
            }
        }
        let nf = S::cast(n as f64);
        let mut means = Array1::<S>::zeros(p);
        let mut sds = Array1::<S>::zeros(p);
        let mut values = raw.clone();
        for j in 0..p {
            let mean = raw.column(j).iter().copied().sum::<S>() / nf;
            let mut ss = S::zero();
            for i in 0..n {
                let d = raw[[i, j]] - mean;
                ss += d * d;
            }
            let var = ss / S::cast((n - 1) as f64);
            if var <= S::cast(1e-30) {
                return Err(LinalgError::ZeroVarianceColumn { index: j });
            }
            let sd = var.sqrt();
            means[j] = mean;
            sds[j] = sd;
            for i in 0..n {
                values[[i, j]] = (raw[[i, j]] - mean) / sd;
            }
        }
        Ok(Self {
            values,
            column_means: means,
            column_sds: sds,
            standardized: true,
        })
    }

    /// Wraps an already-processed matrix without rescaling. Used for
    /// deflated data, which is centered but no longer unit-variance.
    pub(crate) fn from_processed(
        values: Array2<S>,
        column_means: Array1<S>,
        column_sds: Array1<S>,
        standardized: bool,
    ) -> Self {
        Self {
            values,
            column_means,
            column_sds,
            standardized,
        }
    }

    pub fn values(&self) -> &Array2<S> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_means(&self) -> &Array1<S> {
        &self.column_means
    }

    pub fn column_sds(&self) -> &Array1<S> {
        &self.column_sds
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }
}

/// Thin singular value decomposition `X = U D V^T` with the numerically
/// zero part dropped.
#[derive(Debug, Clone)]
pub struct ThinSvd<S: Scalar> {
    left: Array2<S>,
    singular: Array1<S>,
    right: Array2<S>,
}

impl<S: Scalar> ThinSvd<S> {
    pub fn compute(x: &Array2<S>) -> Self {
        let (u, s, v) = jacobi_svd(x);
        let smax = if s.is_empty() { S::zero() } else { s[0] };
        let dim = x.nrows().max(x.ncols());
        let cut = smax * S::epsilon() * S::cast(16.0 * (dim as f64).sqrt());
        let r = s.iter().take_while(|&&sv| sv > cut).count();
        ThinSvd {
            left: u.slice(ndarray::s![.., ..r]).to_owned(),
            singular: s.slice(ndarray::s![..r]).to_owned(),
            right: v.slice(ndarray::s![.., ..r]).to_owned(),
        }
    }

    /// Left singular vectors, n×r.
    pub fn left(&self) -> &Array2<S> {
        &self.left
    }

    /// Singular values, nonincreasing, length r.
    pub fn singular(&self) -> &Array1<S> {
        &self.singular
    }

    /// Right singular vectors, p×r.
    pub fn right(&self) -> &Array2<S> {
        &self.right
    }

    pub fn rank(&self) -> usize {
        self.singular.len()
    }

    /// `U D V^T`.
    pub fn reconstruct(&self) -> Array2<S> {
        let r = self.rank();
        let mut scaled = self.left.clone();
        for t in 0..r {
            let s = self.singular[t];
            scaled.column_mut(t).mapv_inplace(|x| x * s);
        }
        scaled.dot(&self.right.t())
    }
}

/// Ridge constant `sqrt(log(dim)/n)` (natural log).
pub fn ridge_constant<S: Scalar>(dim: usize, n: usize) -> S {
    assert!(dim >= 1 && n >= 1, "ridge_constant needs positive dims");
    (S::cast(dim as f64).ln() / S::cast(n as f64)).sqrt()
}

/// Cross-covariance `X^T Y / (n-1)` of two matrices sharing rows.
pub fn cross_covariance<S: Scalar>(
    x: &DataMatrix<S>,
    y: &DataMatrix<S>,
) -> Result<Array2<S>, LinalgError> {
    if x.n() != y.n() {
        return Err(LinalgError::DimensionMismatch {
            left: x.n(),
            right: y.n(),
        });
    }
    let scale = S::one() / S::cast((x.n() - 1) as f64);
    Ok(x.values.t().dot(&y.values) * scale)
}

/// The regularized covariance `S + ridge·I` of one data matrix, held as
/// its thin SVD so that inverse and inverse-square-root products cost
/// O(n²·(n+p+m)) instead of O(p³).
#[derive(Debug, Clone)]
pub struct RegCovOperator<S: Scalar> {
    source: ThinSvd<S>,
    /// eigenvalues of S restricted to the data span: sigma² / (n-1)
    span_eigs: Array1<S>,
    ridge: S,
    dim: usize,
}

impl<S: Scalar> RegCovOperator<S> {
    /// Builds the operator from standardized data. `ridge` defaults to
    /// `sqrt(log p / n)` via [`ridge_constant`].
    pub fn new(x: &DataMatrix<S>) -> Self {
        Self::with_ridge(x, ridge_constant(x.p(), x.n()))
    }

    pub fn with_ridge(x: &DataMatrix<S>, ridge: S) -> Self {
        let svd = ThinSvd::compute(x.values());
        Self::from_svd(svd, ridge, x.n())
    }

    pub fn from_svd(source: ThinSvd<S>, ridge: S, n: usize) -> Self {
        let denom = S::cast((n - 1) as f64);
        let span_eigs = source.singular().mapv(|s| s * s / denom);
        let dim = source.right().nrows();
        RegCovOperator {
            source,
            span_eigs,
            ridge,
            dim,
        }
    }

    pub fn ridge(&self) -> S {
        self.ridge
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> &ThinSvd<S> {
        &self.source
    }

    /// Applies `f(S + ridge·I)` to the columns of `m`, where `f` acts on
    /// the spectrum: the data span gets `f(lambda + ridge)` and the
    /// orthogonal complement the constant `f(ridge)`.
    fn apply_spectral(&self, m: &Array2<S>, f: impl Fn(S) -> S) -> Array2<S> {
        assert_eq!(m.nrows(), self.dim, "operator/input dimension mismatch");
        let v = self.source.right();
        let r = self.span_eigs.len();
        let w = v.t().dot(m); // r×m
        let f_ridge = if r < self.dim {
            let fr = f(self.ridge);
            assert!(
                fr.is_finite(),
                "singular operator: zero ridge with rank-deficient data"
            );
            fr
        } else {
            S::zero()
        };
        let mut scaled = w.clone();
        for t in 0..r {
            let c = f(self.span_eigs[t] + self.ridge) - f_ridge;
            scaled.row_mut(t).mapv_inplace(|x| x * c);
        }
        let mut out = v.dot(&scaled);
        if r < self.dim {
            out = out + &(m * f_ridge);
        }
        out
    }

    /// `(S + ridge·I)^{-1} · M`.
    pub fn inv_times(&self, m: &Array2<S>) -> Array2<S> {
        self.apply_spectral(m, |lam| S::one() / lam)
    }

    /// `(S + ridge·I)^{-1/2} · v`.
    pub fn inv_sqrt_times(&self, v: &Array1<S>) -> Array1<S> {
        let m = v
            .view()
            .into_shape((v.len(), 1))
            .expect("vector reshapes to column");
        let out = self.apply_spectral(&m.to_owned(), |lam| S::one() / lam.sqrt());
        out.column(0).to_owned()
    }

    /// `(S + ridge·I)^{-1/2} · M`.
    pub fn inv_sqrt_times_mat(&self, m: &Array2<S>) -> Array2<S> {
        self.apply_spectral(m, |lam| S::one() / lam.sqrt())
    }

    /// `(S + ridge·I) · M` (forward product, used by tests and the
    /// variant-A constraint assembly).
    pub fn forward_times(&self, m: &Array2<S>) -> Array2<S> {
        self.apply_spectral(m, |lam| lam)
    }

    /// Dense `S + ridge·I`, for moderate p only.
    pub fn to_dense(&self) -> Array2<S> {
        let eye = Array2::<S>::eye(self.dim);
        self.forward_times(&eye)
    }
}

/// One nonsparse canonical triple: unit-norm loading vectors and the
/// associated correlation estimate.
#[derive(Debug, Clone)]
pub struct NonsparseTriple<S: Scalar> {
    pub alpha: Array1<S>,
    pub beta: Array1<S>,
    pub rho: S,
}

/// Nonsparse CCA initialization: the k-th singular triple of
/// `S̃_xx^{-1/2} S_xy S̃_yy^{-1/2}`, computed entirely in the n-dimensional
/// data span. Loadings are rescaled to unit l2 norm; the correlation is
/// initialized as the square root of the singular value.
pub fn nonsparse_init<S: Scalar>(
    x: &DataMatrix<S>,
    y: &DataMatrix<S>,
    k: usize,
) -> Result<NonsparseTriple<S>, LinalgError> {
    if x.n() != y.n() {
        return Err(LinalgError::DimensionMismatch {
            left: x.n(),
            right: y.n(),
        });
    }
    let op_x = RegCovOperator::new(x);
    let op_y = RegCovOperator::new(y);
    nonsparse_init_from_ops(&op_x, &op_y, x.n(), k)
}

/// Same as [`nonsparse_init`] but reusing prebuilt covariance operators.
pub fn nonsparse_init_from_ops<S: Scalar>(
    op_x: &RegCovOperator<S>,
    op_y: &RegCovOperator<S>,
    n: usize,
    k: usize,
) -> Result<NonsparseTriple<S>, LinalgError> {
    assert!(k >= 1, "component index is 1-based");
    let denom = S::cast((n - 1) as f64);
    let svd_x = op_x.source();
    let svd_y = op_y.source();
    // core = phi_x^{-1/2} (R_x^T R_y / (n-1)) phi_y^{-1/2}, all r_x × r_y
    let mut core = svd_x.left().t().dot(svd_y.left());
    for i in 0..svd_x.rank() {
        for j in 0..svd_y.rank() {
            let rx = svd_x.singular()[i];
            let ry = svd_y.singular()[j];
            let sx = (op_x.span_eigs[i] + op_x.ridge).sqrt();
            let sy = (op_y.span_eigs[j] + op_y.ridge).sqrt();
            core[[i, j]] = core[[i, j]] * rx * ry / (denom * sx * sy);
        }
    }
    let (cu, cs, cv) = jacobi_svd(&core);
    let smax = if cs.is_empty() { S::zero() } else { cs[0] };
    let rank = cs
        .iter()
        .take_while(|&&s| s > smax * S::cast(1e-10))
        .count();
    if k > rank {
        return Err(LinalgError::RankDeficient { requested: k, rank });
    }
    let lambda = cs[k - 1];

    let scale_cols = |svd: &ThinSvd<S>, op: &RegCovOperator<S>, w: ndarray::ArrayView1<S>| {
        let mut scaled = w.to_owned();
        for i in 0..scaled.len() {
            scaled[i] = scaled[i] / (op.span_eigs[i] + op.ridge).sqrt();
        }
        svd.right().dot(&scaled)
    };
    let mut alpha = scale_cols(svd_x, op_x, cu.column(k - 1));
    let mut beta = scale_cols(svd_y, op_y, cv.column(k - 1));
    normalize_inplace(&mut alpha);
    normalize_inplace(&mut beta);
    // sign convention: largest-magnitude coordinate of alpha positive
    if dominant_entry(&alpha) < S::zero() {
        alpha.mapv_inplace(|v| -v);
        beta.mapv_inplace(|v| -v);
    }
    Ok(NonsparseTriple {
        alpha,
        beta,
        rho: lambda.sqrt().min(S::one()).max(S::zero()),
    })
}

pub(crate) fn normalize_inplace<S: Scalar>(v: &mut Array1<S>) -> S {
    let nrm = v.iter().map(|&x| x * x).sum::<S>().sqrt();
    if nrm > S::zero() {
        v.mapv_inplace(|x| x / nrm);
    }
    nrm
}

pub(crate) fn dominant_entry<S: Scalar>(v: &Array1<S>) -> S {
    let mut best = S::zero();
    for &x in v.iter() {
        if x.abs() > best.abs() {
            best = x;
        }
    }
    best
}

/// Projects the columns of `x` onto the orthogonal complement of the
/// span of `basis` (p×k). The basis is orthonormalized first by
/// modified Gram-Schmidt with one reorthogonalization pass.
pub fn deflate<S: Scalar>(
    x: &DataMatrix<S>,
    basis: &Array2<S>,
) -> Result<DataMatrix<S>, LinalgError> {
    let k = basis.ncols();
    if k == 0 {
        return Ok(x.clone());
    }
    assert_eq!(basis.nrows(), x.p(), "basis dimension must match columns");
    let q = orthonormalize(basis)?;
    // X_new = X - (X Q) Q^T
    let xq = x.values.dot(&q);
    let values = &x.values - &xq.dot(&q.t());
    Ok(DataMatrix::from_processed(
        values,
        x.column_means.clone(),
        x.column_sds.clone(),
        false,
    ))
}

fn orthonormalize<S: Scalar>(basis: &Array2<S>) -> Result<Array2<S>, LinalgError> {
    let (p, k) = basis.dim();
    let mut q = Array2::<S>::zeros((p, k));
    for j in 0..k {
        let mut col = basis.column(j).to_owned();
        let orig = col.iter().map(|&x| x * x).sum::<S>().sqrt();
        for _pass in 0..2 {
            for t in 0..j {
                let proj = q.column(t).dot(&col);
                let qt = q.column(t).to_owned();
                col = col - &(qt * proj);
            }
        }
        let nrm = col.iter().map(|&x| x * x).sum::<S>().sqrt();
        if nrm <= S::cast(1e-10) * orig.max(S::one()) {
            return Err(LinalgError::DegenerateBasis { column: j });
        }
        col.mapv_inplace(|x| x / nrm);
        q.column_mut(j).assign(&col);
    }
    Ok(q)
}
