//! Dense linear-algebra substrate: subspaces with a rank tolerance, matrices
//! with horizontal-vector entries, and unique minimal-norm elements of affine
//! families of such matrices.

use alloc::{format, vec::Vec};
use core::f64::consts::FRAC_PI_2;
use core::ops::{Add, Sub};

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Orthonormal basis of a linear subspace of `ℝⁿ` (Euclidean product of
/// frame coordinates).
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: DMatrix<f64>,
    tol: f64,
}

impl Subspace {
    pub fn zero(n: usize, tol: f64) -> Self {
        Self { basis: DMatrix::zeros(n, 0), tol }
    }

    /// Columns form an orthonormal basis.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.basis * (self.basis.transpose() * v)
    }

    /// Component of `v` orthogonal to the subspace.
    pub fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        v - self.project(v)
    }

    /// Membership up to the relative tolerance.
    pub fn contains(&self, v: &DVector<f64>) -> bool {
        self.residual(v).norm() <= self.tol * v.norm().max(1.0)
    }

    /// Orthonormal directions spanned by `vectors` that are new relative to
    /// this subspace, in input order.
    pub fn extend(&self, vectors: &DMatrix<f64>) -> DMatrix<f64> {
        let mut q: Vec<DVector<f64>> = self.basis.column_iter().map(|c| c.into_owned()).collect();
        let start = q.len();
        let threshold = self.tol * max_column_norm(vectors);
        for v in vectors.column_iter() {
            append_orthonormal(&mut q, &v.into_owned(), threshold);
        }
        columns_to_matrix(self.ambient_dim(), &q[start..])
    }

    /// Span of this subspace together with `vectors`.
    pub fn join(&self, vectors: &DMatrix<f64>) -> Subspace {
        let extra = self.extend(vectors);
        let mut basis = DMatrix::zeros(self.ambient_dim(), self.dim() + extra.ncols());
        basis.columns_mut(0, self.dim()).copy_from(&self.basis);
        basis.columns_mut(self.dim(), extra.ncols()).copy_from(&extra);
        Subspace { basis, tol: self.tol }
    }

    /// Orthonormal basis of the Euclidean orthogonal complement.
    pub fn complement(&self) -> DMatrix<f64> {
        self.extend(&DMatrix::identity(self.ambient_dim(), self.ambient_dim()))
    }

    /// Largest principal angle to `other`; `π/2` when dimensions differ.
    pub fn max_angle(&self, other: &Subspace) -> f64 {
        max_principal_angle(&self.basis, &other.basis)
    }
}

fn max_column_norm(m: &DMatrix<f64>) -> f64 {
    let s = m.column_iter().map(|c| c.norm()).fold(0.0, f64::max);
    if s > 0.0 {
        s
    } else {
        1.0
    }
}

fn append_orthonormal(q: &mut Vec<DVector<f64>>, v: &DVector<f64>, threshold: f64) -> bool {
    let mut r = v.clone();
    // two passes of modified Gram-Schmidt
    for _ in 0..2 {
        for qi in q.iter() {
            let c = qi.dot(&r);
            r.axpy(-c, qi, 1.0);
        }
    }
    let nr = r.norm();
    if nr > threshold {
        q.push(r / nr);
        true
    } else {
        false
    }
}

fn columns_to_matrix(n: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}

/// Orthonormal basis of the span of the columns of `vectors`.
///
/// A column is discarded when its residual after projection onto the
/// previously accepted columns has norm at most `tol` times the largest
/// input norm (or `tol` if every input is zero).
pub fn orthonormalize(vectors: &DMatrix<f64>, tol: f64) -> Subspace {
    Subspace::zero(vectors.nrows(), tol).join(vectors)
}

/// Largest principal angle between the column spans of two matrices with
/// orthonormal columns.
pub fn max_principal_angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() != b.ncols() {
        return FRAC_PI_2;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let ra = a - b * (b.transpose() * a);
    let rb = b - a * (a.transpose() * b);
    let s = spectral_norm(&ra).max(spectral_norm(&rb)).min(1.0);
    libm::asin(s)
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.iter().fold(0.0, |a, &b| a.max(b))
}

/// Numerical rank summary of a matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RankInfo {
    pub rank: usize,
    /// Number of columns.
    pub dim: usize,
    pub largest: f64,
    /// Smallest of the `min(rows, cols)` singular values (0 when rows < cols).
    pub smallest: f64,
}

impl RankInfo {
    pub fn kernel_dim(&self) -> usize {
        self.dim - self.rank
    }

    pub fn injective(&self) -> bool {
        self.rank == self.dim
    }
}

/// Rank with singular values below `tol · σ_max` treated as zero.
pub fn rank_info(m: &DMatrix<f64>, tol: f64) -> RankInfo {
    let dim = m.ncols();
    if dim == 0 || m.nrows() == 0 {
        return RankInfo { rank: 0, dim, largest: 0.0, smallest: 0.0 };
    }
    let sv = m.clone().svd(false, false).singular_values;
    let largest = sv.iter().fold(0.0, |a: f64, &b| a.max(b));
    let mut smallest = sv.iter().fold(f64::INFINITY, |a: f64, &b| a.min(b));
    if m.nrows() < dim {
        smallest = 0.0;
    }
    let rank = if largest > 0.0 { sv.iter().filter(|&&s| s > tol * largest).count() } else { 0 };
    RankInfo { rank, dim, largest, smallest }
}

/// Orthonormal basis (columns) of the kernel of `m`.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let p = m.ncols();
    if m.nrows() == 0 || p == 0 {
        return DMatrix::identity(p, p);
    }
    let svd = m.clone().svd(false, true);
    let vt = svd.v_t.expect("requested");
    let largest = svd.singular_values.iter().fold(0.0, |a: f64, &b| a.max(b));
    let rows: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, &s)| largest > 0.0 && s > tol * largest)
        .map(|(i, _)| vt.row(i).transpose())
        .collect();
    let row_space = orthonormalize(&columns_to_matrix(p, &rows), tol);
    row_space.complement()
}

/// Gram-Schmidt of the columns of `vectors` with respect to the inner
/// product `⟨x, y⟩ = xᵀ G y`, in column order. Returns `None` when the
/// columns are dependent.
pub fn gram_schmidt_in(gram: &DMatrix<f64>, vectors: &DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(vectors.ncols());
    for v in vectors.column_iter() {
        let v = v.into_owned();
        let scale = libm::sqrt((v.transpose() * gram * &v)[(0, 0)].abs());
        let mut r = v;
        for _ in 0..2 {
            for q in &out {
                let c = (q.transpose() * gram * &r)[(0, 0)];
                r.axpy(-c, q, 1.0);
            }
        }
        let nr2 = (r.transpose() * gram * &r)[(0, 0)];
        if nr2.is_nan() || nr2 <= 0.0 || libm::sqrt(nr2) <= tol * scale.max(f64::MIN_POSITIVE) {
            return None;
        }
        out.push(r / libm::sqrt(nr2));
    }
    Some(columns_to_matrix(vectors.nrows(), &out))
}

/// Reduced row-echelon form with partial pivoting; entries below
/// `tol · max|m|` are treated as zero.
pub fn rref(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let scale = a.iter().fold(0.0, |s: f64, x| s.max(x.abs()));
    let eps = tol * if scale > 0.0 { scale } else { 1.0 };
    let mut lead = 0;
    for c in 0..cols {
        if lead == rows {
            break;
        }
        let (mut piv, mut best) = (lead, a[(lead, c)].abs());
        for r in lead + 1..rows {
            if a[(r, c)].abs() > best {
                piv = r;
                best = a[(r, c)].abs();
            }
        }
        if best <= eps {
            for r in lead..rows {
                a[(r, c)] = 0.0;
            }
            continue;
        }
        a.swap_rows(lead, piv);
        let p = a[(lead, c)];
        for j in 0..cols {
            a[(lead, j)] /= p;
        }
        for r in 0..rows {
            if r != lead {
                let f = a[(r, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        let v = a[(lead, j)];
                        a[(r, j)] -= f * v;
                    }
                }
            }
        }
        lead += 1;
    }
    a
}

/// `rows × cols` matrix whose entries are horizontal vectors, stored by
/// coefficients over an orthonormal horizontal frame of dimension `hdim`.
#[derive(Clone, Debug, PartialEq)]
pub struct HMatrix {
    rows: usize,
    cols: usize,
    hdim: usize,
    data: Vec<f64>,
}

impl HMatrix {
    pub fn zeros(rows: usize, cols: usize, hdim: usize) -> Self {
        Self { rows, cols, hdim, data: alloc::vec![0.0; rows * cols * hdim] }
    }

    /// Inverse of [`HMatrix::to_vector`].
    pub fn from_vector(rows: usize, cols: usize, hdim: usize, v: &DVector<f64>) -> Result<Self> {
        if v.len() != rows * cols * hdim {
            return Err(Error::ShapeMismatch {
                expected: format!("{}", rows * cols * hdim),
                found: format!("{}", v.len()),
            });
        }
        Ok(Self { rows, cols, hdim, data: v.iter().copied().collect() })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn hdim(&self) -> usize {
        self.hdim
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.hdim)
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        assert!(i < self.rows && j < self.cols, "entry ({i}, {j}) out of bounds");
        (i * self.cols + j) * self.hdim
    }

    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j);
        &self.data[o..o + self.hdim]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = self.offset(i, j);
        &mut self.data[o..o + self.hdim]
    }

    pub fn entry_vector(&self, i: usize, j: usize) -> DVector<f64> {
        DVector::from_column_slice(self.entry(i, j))
    }

    pub fn set_entry(&mut self, i: usize, j: usize, h: &DVector<f64>) {
        self.entry_mut(i, j).copy_from_slice(h.as_slice());
    }

    /// Flattening in row-major entry order; the Euclidean product of two
    /// flattenings is [`hmat_inner`].
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.data)
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows, self.hdim);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.entry_mut(j, i).copy_from_slice(self.entry(i, j));
            }
        }
        t
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { data: self.data.iter().map(|x| x * s).collect(), ..*self }
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_squared())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    /// Sum of the diagonal entries, a horizontal vector.
    pub fn trace(&self) -> DVector<f64> {
        let mut t = DVector::zeros(self.hdim);
        for i in 0..self.rows.min(self.cols) {
            for (a, b) in t.iter_mut().zip(self.entry(i, i)) {
                *a += b;
            }
        }
        t
    }

    /// `f · self · gᵀ` with real matrices `f` (rows × rows) and `g`
    /// (cols × cols) acting on the matrix indices.
    pub fn conjugate(&self, f: &DMatrix<f64>, g: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(f.nrows(), g.nrows(), self.hdim);
        for a in 0..f.nrows() {
            for b in 0..g.nrows() {
                let dst = out.entry_mut(a, b);
                for i in 0..self.rows {
                    for j in 0..self.cols {
                        let w = f[(a, i)] * g[(b, j)];
                        if w != 0.0 {
                            for (d, s) in dst.iter_mut().zip(self.entry(i, j)) {
                                *d += w * s;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Applies `h ↦ R h` to every horizontal entry.
    pub fn map_entries(&self, r: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(self.rows, self.cols, r.nrows());
        for i in 0..self.rows {
            for j in 0..self.cols {
                let v = r * self.entry_vector(i, j);
                out.set_entry(i, j, &v);
            }
        }
        out
    }
}

impl Add for &HMatrix {
    type Output = HMatrix;

    fn add(self, rhs: &HMatrix) -> HMatrix {
        assert_eq!(self.shape(), rhs.shape(), "HMatrix shape mismatch");
        HMatrix { data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(), ..*self }
    }
}

impl Sub for &HMatrix {
    type Output = HMatrix;

    fn sub(self, rhs: &HMatrix) -> HMatrix {
        assert_eq!(self.shape(), rhs.shape(), "HMatrix shape mismatch");
        HMatrix { data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(), ..*self }
    }
}

/// Trace inner product `Σ_{l,m} ⟨A_l^m, B_l^m⟩`.
pub fn hmat_inner(a: &HMatrix, b: &HMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", a.shape()),
            found: format!("{:?}", b.shape()),
        });
    }
    Ok(a.data.iter().zip(&b.data).map(|(x, y)| x * y).sum())
}

/// Linear map `ℝ^p → M_{rows×cols}(H)`; column `q` of `matrix` is the
/// flattened image of the `q`-th unit parameter.
#[derive(Clone, Debug)]
pub struct LinearHMap {
    rows: usize,
    cols: usize,
    hdim: usize,
    matrix: DMatrix<f64>,
}

impl LinearHMap {
    pub fn from_images(rows: usize, cols: usize, hdim: usize, images: &[HMatrix]) -> Result<Self> {
        let mut matrix = DMatrix::zeros(rows * cols * hdim, images.len());
        for (q, img) in images.iter().enumerate() {
            if img.shape() != (rows, cols, hdim) {
                return Err(Error::ShapeMismatch {
                    expected: format!("{:?}", (rows, cols, hdim)),
                    found: format!("{:?}", img.shape()),
                });
            }
            matrix.set_column(q, &img.to_vector());
        }
        Ok(Self { rows, cols, hdim, matrix })
    }

    pub fn params(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.rows, self.cols, self.hdim)
    }

    pub fn apply(&self, z: &DVector<f64>) -> HMatrix {
        let v = &self.matrix * z;
        HMatrix { rows: self.rows, cols: self.cols, hdim: self.hdim, data: v.iter().copied().collect() }
    }
}

/// Affine equality constraints `matrix · z = rhs` on the parameters.
#[derive(Clone, Debug)]
pub struct AffineConstraints {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

/// Unique minimizer of `‖offset + map(z)‖` over the feasible parameters.
#[derive(Clone, Debug)]
pub struct MinNorm {
    pub params: DVector<f64>,
    /// The minimum norm.
    pub value: f64,
    /// `offset + map(params)`.
    pub minimizer: HMatrix,
    /// Dimension of the feasible affine set.
    pub feasible_dim: usize,
    /// `σ_min / σ_max` of the map restricted to the feasible directions
    /// (1 when there are none); the restricted Hessian is `2 σ²`.
    pub conditioning: f64,
}

/// Minimal-norm element of the affine family `offset + map(z)`, optionally
/// with `z` restricted by affine equality constraints.
///
/// Constraints are eliminated by an explicit parametrization
/// `z = z₀ + N y` (particular solution plus kernel basis), after which the
/// minimizer is the least-squares solution obtained from an SVD.
pub fn min_norm_affine(
    offset: &HMatrix,
    map: &LinearHMap,
    constraints: Option<&AffineConstraints>,
    tol: f64,
) -> Result<MinNorm> {
    if offset.shape() != map.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", map.shape()),
            found: format!("{:?}", offset.shape()),
        });
    }
    let p = map.params();
    let (z0, basis) = match constraints {
        Some(c) if c.matrix.nrows() > 0 => {
            if c.matrix.ncols() != p || c.rhs.len() != c.matrix.nrows() {
                return Err(Error::ShapeMismatch {
                    expected: format!("constraints on {p} parameters"),
                    found: format!("{}x{} with rhs {}", c.matrix.nrows(), c.matrix.ncols(), c.rhs.len()),
                });
            }
            let z0 = pinv_solve(&c.matrix, &c.rhs, tol);
            let residual = (&c.matrix * &z0 - &c.rhs).norm();
            let scale = 1f64.max(c.rhs.norm()).max(spectral_norm(&c.matrix) * z0.norm());
            if residual > tol * scale * 10.0 {
                return Err(Error::Infeasible { residual });
            }
            (z0, null_space(&c.matrix, tol))
        }
        _ => (DVector::zeros(p), DMatrix::identity(p, p)),
    };
    let feasible_dim = basis.ncols();
    let reduced = map.matrix() * &basis;
    let base = offset.to_vector() + map.matrix() * &z0;

    let (y, conditioning) = if feasible_dim == 0 {
        (DVector::zeros(0), 1.0)
    } else {
        let info = rank_info(&reduced, tol);
        if !info.injective() {
            return Err(Error::NotInjective { rank: info.rank, dim: feasible_dim });
        }
        let svd = reduced.clone().svd(true, true);
        let y = svd.solve(&(-&base), 0.0).expect("U and V were computed");
        (y, info.smallest / info.largest)
    };
    let params = z0 + &basis * y;
    let minimizer = offset + &map.apply(&params);
    Ok(MinNorm { value: minimizer.norm(), params, minimizer, feasible_dim, conditioning })
}

/// Minimum-norm least-squares solution of `a x = b` via the SVD.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> DVector<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return DVector::zeros(a.ncols());
    }
    let svd = a.clone().svd(true, true);
    let largest = svd.singular_values.iter().fold(0.0, |x: f64, &y| x.max(y));
    svd.solve(b, tol * largest).expect("U and V were computed")
}
