//! Structure constants, the bracket filtration and the quotient tower with
//! its intrinsic inner products.

use alloc::{format, string::String, vec::Vec};

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::linalg::{gram_schmidt_in, orthonormalize, Subspace};
use crate::{Error, Result};

/// A frame `e_0, …, e_{n-1}` with constant structure constants
/// `[e_i, e_j] = c_{ij}^k e_k`; the first `d1` vectors are horizontal and
/// orthonormal.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureSpec {
    n: usize,
    d1: usize,
    names: Vec<String>,
    c: Vec<f64>,
}

/// Incremental construction from individual brackets `[e_i, e_j]`.
#[derive(Clone, Debug)]
pub struct StructureBuilder {
    d1: usize,
    names: Vec<String>,
    c: Vec<f64>,
    set: Vec<bool>,
}

impl StructureBuilder {
    /// Sets `[e_i, e_j] = Σ coef · e_k` (and `[e_j, e_i]` by antisymmetry).
    pub fn bracket(mut self, i: usize, j: usize, terms: &[(usize, f64)]) -> Result<Self> {
        let n = self.names.len();
        if i >= n || j >= n || terms.iter().any(|&(k, _)| k >= n) {
            return Err(Error::InvalidStructure(format!("bracket [{i}, {j}] refers to an index outside 0..{n}")));
        }
        if i == j {
            if terms.iter().any(|&(_, v)| v != 0.0) {
                return Err(Error::InvalidStructure(format!("bracket [{i}, {i}] must vanish")));
            }
            return Ok(self);
        }
        if self.set[i * n + j] {
            return Err(Error::InvalidStructure(format!(
                "bracket [{}, {}] given twice",
                self.names[i], self.names[j]
            )));
        }
        self.set[i * n + j] = true;
        self.set[j * n + i] = true;
        for &(k, v) in terms {
            self.c[(i * n + j) * n + k] += v;
            self.c[(j * n + i) * n + k] -= v;
        }
        Ok(self)
    }

    /// Name-based variant of [`StructureBuilder::bracket`].
    pub fn bracket_named(self, a: &str, b: &str, terms: &[(&str, f64)]) -> Result<Self> {
        let idx = |s: &str| {
            self.names
                .iter()
                .position(|x| x == s)
                .ok_or_else(|| Error::InvalidStructure(format!("unknown frame vector {s}")))
        };
        let (i, j) = (idx(a)?, idx(b)?);
        let terms = terms.iter().map(|&(s, v)| Ok((idx(s)?, v))).collect::<Result<Vec<_>>>()?;
        self.bracket(i, j, &terms)
    }

    pub fn build(self, tol: f64) -> Result<StructureSpec> {
        StructureSpec::from_tensor(self.names, self.d1, self.c, tol)
    }
}

impl StructureSpec {
    pub fn builder<S: Into<String>>(names: impl IntoIterator<Item = S>, d1: usize) -> StructureBuilder {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let n = names.len();
        StructureBuilder { d1, names, c: alloc::vec![0.0; n * n * n], set: alloc::vec![false; n * n] }
    }

    /// Validates a full tensor stored as `c[(i*n + j)*n + k] = c_{ij}^k`.
    pub fn from_tensor(names: Vec<String>, d1: usize, c: Vec<f64>, tol: f64) -> Result<Self> {
        let n = names.len();
        if n == 0 || d1 == 0 || d1 > n {
            return Err(Error::InvalidStructure(format!("need 1 <= horizontal <= dim, got {d1} and {n}")));
        }
        if c.len() != n * n * n {
            return Err(Error::ShapeMismatch { expected: format!("{} coefficients", n * n * n), found: format!("{}", c.len()) });
        }
        if let Some(bad) = c.iter().position(|x| !x.is_finite()) {
            return Err(Error::InvalidStructure(format!("non-finite coefficient at flat index {bad}")));
        }
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    if c[(i * n + j) * n + k] != -c[(j * n + i) * n + k] {
                        return Err(Error::InvalidStructure(format!("c_{{{i}{j}}}^{k} is not antisymmetric in (i, j)")));
                    }
                }
            }
        }
        for (a, name) in names.iter().enumerate() {
            if name.is_empty() || names[..a].contains(name) {
                return Err(Error::InvalidStructure(format!("frame name {name:?} is empty or repeated")));
            }
        }
        let spec = Self { n, d1, names, c };
        spec.check_jacobi(tol)?;
        Ok(spec)
    }

    fn check_jacobi(&self, tol: f64) -> Result<()> {
        let n = self.n;
        let cmax = self.c.iter().fold(0.0, |a: f64, x| a.max(x.abs()));
        let bound = tol * (cmax * cmax).max(1.0);
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    for l in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += self.coef(i, j, m) * self.coef(m, k, l)
                                + self.coef(j, k, m) * self.coef(m, i, l)
                                + self.coef(k, i, m) * self.coef(m, j, l);
                        }
                        if s.abs() > bound {
                            return Err(Error::JacobiViolation { i, j, k, residual: s.abs() });
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn horizontal_rank(&self) -> usize {
        self.d1
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensor(&self) -> &[f64] {
        &self.c
    }

    /// `c_{ij}^k`.
    pub fn coef(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.n + j) * self.n + k]
    }

    /// `[u, v]` for coordinate vectors in the frame.
    pub fn bracket(&self, u: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut out = DVector::zeros(n);
        for i in 0..n {
            if u[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                let w = u[i] * v[j];
                if w == 0.0 {
                    continue;
                }
                let base = (i * n + j) * n;
                for k in 0..n {
                    out[k] += w * self.c[base + k];
                }
            }
        }
        out
    }

    /// Matrix of `v ↦ [v, e_l]`.
    pub fn right_bracket_matrix(&self, l: usize) -> DMatrix<f64> {
        let n = self.n;
        DMatrix::from_fn(n, n, |k, i| self.coef(i, l, k))
    }

    /// Right-bracket matrices for every horizontal frame vector.
    pub fn horizontal_right_brackets(&self) -> Vec<DMatrix<f64>> {
        (0..self.d1).map(|l| self.right_bracket_matrix(l)).collect()
    }

    /// Structure constants in the frame `e'_a = Σ_i P_{ia} e_i`; the first
    /// `d1` new vectors must stay horizontal and are declared orthonormal.
    pub fn change_frame(&self, p: &DMatrix<f64>, tol: f64) -> Result<StructureSpec> {
        let n = self.n;
        if p.shape() != (n, n) {
            return Err(Error::ShapeMismatch { expected: format!("{n}x{n}"), found: format!("{:?}", p.shape()) });
        }
        let leak = p.view((self.d1, 0), (n - self.d1, self.d1)).amax();
        if leak > tol * p.amax().max(1.0) {
            return Err(Error::InvalidStructure(format!("frame change moves horizontal vectors out of H (leak {leak:e})")));
        }
        let pinv = p
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidStructure(String::from("frame change is singular")))?;
        let cols: Vec<DVector<f64>> = (0..n).map(|a| p.column(a).into_owned()).collect();
        let mut c = alloc::vec![0.0; n * n * n];
        for a in 0..n {
            for b in a + 1..n {
                let w = &pinv * self.bracket(&cols[a], &cols[b]);
                for l in 0..n {
                    c[(a * n + b) * n + l] = w[l];
                    c[(b * n + a) * n + l] = -w[l];
                }
            }
        }
        let cmax = c.iter().fold(0.0, |s: f64, x| s.max(x.abs()));
        for x in c.iter_mut() {
            if x.abs() <= 1e-14 * cmax {
                *x = 0.0;
            }
        }
        // Jacobi holds analytically; allow for roundoff of the transform
        let scale = p.amax().max(1.0) * pinv.amax().max(1.0);
        StructureSpec::from_tensor(self.names.clone(), self.d1, c, tol.max(1e-12) * scale * scale * scale)
    }
}

/// `H_1 ⊆ H_2 ⊆ … ⊆ H_r = ℝⁿ` with `H_{i+1} = H_i + [H_i, H_1]`.
#[derive(Clone, Debug)]
pub struct Filtration {
    pub spaces: Vec<Subspace>,
    pub growth: Vec<usize>,
    pub step: usize,
}

impl Filtration {
    /// `H_m` for `1 ≤ m ≤ r`.
    pub fn space(&self, m: usize) -> &Subspace {
        &self.spaces[m - 1]
    }
}

pub fn compute_filtration(spec: &StructureSpec, tol: f64) -> Result<Filtration> {
    let n = spec.dim();
    let d1 = spec.horizontal_rank();
    let mut h1 = DMatrix::zeros(n, d1);
    for a in 0..d1 {
        h1[(a, a)] = 1.0;
    }
    let mut spaces = alloc::vec![orthonormalize(&h1, tol)];
    let mut growth = alloc::vec![d1];
    loop {
        let cur = spaces.last().expect("nonempty");
        if cur.dim() == n {
            break;
        }
        let mut brackets = DMatrix::zeros(n, d1 * cur.dim());
        for a in 0..d1 {
            let ea = DVector::from_fn(n, |i, _| if i == a { 1.0 } else { 0.0 });
            for (q, h) in cur.basis().column_iter().enumerate() {
                brackets.set_column(a * cur.dim() + q, &spec.bracket(&ea, &h.into_owned()));
            }
        }
        let next = cur.join(&brackets);
        if next.dim() == cur.dim() {
            return Err(Error::NotBracketGenerating { rank: cur.dim(), dim: n });
        }
        growth.push(next.dim() - cur.dim());
        spaces.push(next);
    }
    let step = spaces.len();
    Ok(Filtration { spaces, growth, step })
}

/// One graded quotient `Ĥ_m = H_m / H_{m-1}` with its intrinsic metric.
///
/// Classes are stored through the section `q`: the class of `v ∈ H_m` has
/// coordinates `qᵀ v`, and a covector `φ ∈ H_{m-1}^o` induces the class
/// `φ q` in the dual quotient.
#[derive(Clone, Debug)]
pub struct QuotientLevel {
    pub level: usize,
    /// `n × d_m`, orthonormal basis of `H_m ⊖ H_{m-1}`.
    pub q: DMatrix<f64>,
    /// Inner product on `Ĥ_m` in `q`-coordinates.
    pub gram: DMatrix<f64>,
    /// Inner product on the dual quotient.
    pub gram_inv: DMatrix<f64>,
    /// Rows: an orthonormal coframe of the dual quotient; `gram = Dᵀ D`.
    pub coframe: DMatrix<f64>,
    /// Columns: the dual orthonormal frame of `Ĥ_m`, `C = D⁻¹`.
    pub frame: DMatrix<f64>,
}

impl QuotientLevel {
    pub fn dim(&self) -> usize {
        self.q.ncols()
    }

    /// Representatives in `H_m` of the orthonormal frame classes.
    pub fn frame_vectors(&self) -> DMatrix<f64> {
        &self.q * &self.frame
    }

    /// Covectors in `H_{m-1}^o` (rows) representing the orthonormal coframe.
    pub fn coframe_covectors(&self) -> DMatrix<f64> {
        &self.coframe * self.q.transpose()
    }
}

/// The filtration together with all quotient levels.
#[derive(Clone, Debug)]
pub struct QuotientTower {
    spec: StructureSpec,
    filtration: Filtration,
    levels: Vec<QuotientLevel>,
    tol: f64,
}

impl QuotientTower {
    pub fn spec(&self) -> &StructureSpec {
        &self.spec
    }

    pub fn filtration(&self) -> &Filtration {
        &self.filtration
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn step(&self) -> usize {
        self.filtration.step
    }

    pub fn growth(&self) -> &[usize] {
        &self.filtration.growth
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    pub fn d(&self, m: usize) -> usize {
        self.filtration.growth[m - 1]
    }

    /// Level `m`, `1 ≤ m ≤ r`.
    pub fn level(&self, m: usize) -> &QuotientLevel {
        &self.levels[m - 1]
    }

    pub fn levels(&self) -> &[QuotientLevel] {
        &self.levels
    }

    pub fn check_level(&self, m: usize) -> Result<()> {
        if m == 0 || m > self.step() {
            return Err(Error::InvalidLevel { level: m, step: self.step() });
        }
        Ok(())
    }

    /// Class coordinates (`q`-coordinates) of `v` in `Ĥ_m`.
    pub fn class_coords(&self, m: usize, v: &DVector<f64>) -> DVector<f64> {
        self.level(m).q.transpose() * v
    }

    /// Orthonormal-frame coordinates of the class of `v` in `Ĥ_m`.
    pub fn class_on_coords(&self, m: usize, v: &DVector<f64>) -> DVector<f64> {
        let l = self.level(m);
        &l.coframe * (l.q.transpose() * v)
    }

    /// Vector in `H_m` representing the class with orthonormal coordinates `x`.
    pub fn class_vector(&self, m: usize, x: &DVector<f64>) -> DVector<f64> {
        let l = self.level(m);
        &l.q * (&l.frame * x)
    }

    /// Component of `v` in the block `H_m ⊖ H_{m-1}`.
    pub fn block(&self, m: usize, v: &DVector<f64>) -> DVector<f64> {
        let q = &self.level(m).q;
        q * (q.transpose() * v)
    }

    /// Sum of the blocks `lo..=hi` of each column of `e`.
    pub fn blocks(&self, lo: usize, hi: usize, e: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(e.nrows(), e.ncols());
        for m in lo.max(1)..=hi.min(self.step()) {
            let q = &self.level(m).q;
            out += q * (q.transpose() * e);
        }
        out
    }

    /// Orthonormal basis (columns) of `H_m`; `H_0 = 0`.
    pub fn lower_basis(&self, m: usize) -> DMatrix<f64> {
        let n = self.dim();
        let cols: usize = (1..=m.min(self.step())).map(|j| self.d(j)).sum();
        let mut out = DMatrix::zeros(n, cols);
        let mut at = 0;
        for j in 1..=m.min(self.step()) {
            let q = &self.level(j).q;
            out.columns_mut(at, q.ncols()).copy_from(q);
            at += q.ncols();
        }
        out
    }

    /// Basis (rows) of the annihilator `H_m^o`.
    pub fn annihilator(&self, m: usize) -> DMatrix<f64> {
        let n = self.dim();
        let rows: usize = (m + 1..=self.step()).map(|j| self.d(j)).sum();
        let mut out = DMatrix::zeros(rows, n);
        let mut at = 0;
        for j in m + 1..=self.step() {
            let qt = self.level(j).q.transpose();
            out.rows_mut(at, qt.nrows()).copy_from(&qt);
            at += qt.nrows();
        }
        out
    }

    /// Residual of `φ` against `H_m^o` membership: `‖φ|_{H_m}‖`.
    pub fn annihilation_residual(&self, m: usize, phi: &RowDVector<f64>) -> f64 {
        (phi * self.lower_basis(m)).norm()
    }

    /// Smallest `m` with `e_i ∈ H_m`, for every input frame vector.
    pub fn frame_vector_levels(&self) -> Vec<usize> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let e = DVector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 });
                (1..=self.step()).find(|&m| self.filtration.space(m).contains(&e)).unwrap_or(self.step())
            })
            .collect()
    }

    /// Squared norm of the class of `v ∈ H_m` in `Ĥ_m`.
    pub fn class_norm_squared(&self, m: usize, v: &DVector<f64>) -> f64 {
        let y = self.class_coords(m, v);
        (y.transpose() * &self.level(m).gram * &y)[(0, 0)]
    }
}

/// Builds the quotient tower.
///
/// `Ĥ_2` carries the metric induced by `X ∧ Y ↦ [-[X, Y]]` from `Λ²H` with
/// the determinant inner product; `Ĥ_{j+1}` the one induced by
/// `X ⊗ [Y] ↦ [-[X, Y]]` from `H ⊗ Ĥ_j` with the product inner product. In
/// both cases the orthogonal complement of the kernel maps isometrically.
pub fn quotient_tower(spec: &StructureSpec, filtration: &Filtration, tol: f64) -> Result<QuotientTower> {
    let n = spec.dim();
    let d1 = spec.horizontal_rank();
    let r = filtration.step;
    let identity = DMatrix::<f64>::identity(n, n);
    let mut levels: Vec<QuotientLevel> = Vec::with_capacity(r);
    for m in 1..=r {
        let q = if m == 1 {
            identity.columns(0, d1).into_owned()
        } else {
            let lower = filtration.space(m - 1);
            let cur = filtration.space(m);
            let mut proj = DMatrix::zeros(n, n);
            for i in 0..n {
                let e = identity.column(i).into_owned();
                proj.set_column(i, &(cur.project(&e) - lower.project(&e)));
            }
            let s = orthonormalize(&proj, tol);
            if s.dim() != filtration.growth[m - 1] {
                return Err(Error::InvalidStructure(format!("level {m} block has rank {} instead of {}", s.dim(), filtration.growth[m - 1])));
            }
            s.basis().clone()
        };
        let dm = q.ncols();
        let gram = if m == 1 {
            DMatrix::identity(dm, dm)
        } else {
            induced_gram(spec, &levels, &q, m)?
        };
        let gram = (&gram + gram.transpose()) * 0.5;
        let gram_inv = gram
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidStructure(format!("degenerate induced metric at level {m}")))?;
        let gram_inv = (&gram_inv + gram_inv.transpose()) * 0.5;
        let u = gram_schmidt_in(&gram_inv, &DMatrix::identity(dm, dm), tol)
            .ok_or_else(|| Error::InvalidStructure(format!("induced metric at level {m} is not positive definite")))?;
        let coframe = u.transpose();
        let frame = coframe
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidStructure(format!("singular coframe at level {m}")))?;
        levels.push(QuotientLevel { level: m, q, gram, gram_inv, coframe, frame });
    }
    Ok(QuotientTower { spec: spec.clone(), filtration: filtration.clone(), levels, tol })
}

fn induced_gram(spec: &StructureSpec, levels: &[QuotientLevel], q: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    let n = spec.dim();
    let d1 = spec.horizontal_rank();
    let dm = q.ncols();
    let e = |a: usize| DVector::from_fn(n, |i, _| if i == a { 1.0 } else { 0.0 });
    let (p, k_inv) = if m == 2 {
        let pairs: Vec<(usize, usize)> = (0..d1).flat_map(|a| (a + 1..d1).map(move |b| (a, b))).collect();
        let mut p = DMatrix::zeros(dm, pairs.len());
        for (col, &(a, b)) in pairs.iter().enumerate() {
            p.set_column(col, &(q.transpose() * -spec.bracket(&e(a), &e(b))));
        }
        let k = pairs.len();
        (p, DMatrix::identity(k, k))
    } else {
        let prev = &levels[m - 2];
        let dj = prev.dim();
        let mut p = DMatrix::zeros(dm, d1 * dj);
        for a in 0..d1 {
            for beta in 0..dj {
                let y = prev.q.column(beta).into_owned();
                p.set_column(a * dj + beta, &(q.transpose() * -spec.bracket(&e(a), &y)));
            }
        }
        let mut k_inv = DMatrix::zeros(d1 * dj, d1 * dj);
        for a in 0..d1 {
            k_inv.view_mut((a * dj, a * dj), (dj, dj)).copy_from(&prev.gram_inv);
        }
        (p, k_inv)
    };
    let dual = &p * k_inv * p.transpose();
    dual.try_inverse()
        .ok_or_else(|| Error::InvalidStructure(format!("bracket map onto level {m} is not surjective")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::samples;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tower(spec: &StructureSpec) -> QuotientTower {
        let f = compute_filtration(spec, 1e-9).unwrap();
        quotient_tower(spec, &f, 1e-9).unwrap()
    }

    #[test]
    fn example_growth_and_orthonormal_levels() {
        let spec = catalog::deformed_cartan();
        assert_eq!((spec.dim(), spec.horizontal_rank()), (5, 2));
        let t = tower(&spec);
        assert_eq!(t.growth(), &[2, 1, 2]);
        assert_eq!(t.step(), 3);
        assert!((&t.level(2).gram - DMatrix::identity(1, 1)).norm() < 1e-12);
        assert!((&t.level(3).gram - DMatrix::identity(2, 2)).norm() < 1e-12);
        // {T} and {S1, S2} are orthonormal representatives
        let tt = DVector::from_column_slice(&[0.0, 0.0, 1.0, 0.0, 0.0]);
        assert!((t.class_norm_squared(2, &tt) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn heisenberg_and_abelian() {
        let t = tower(&catalog::heisenberg());
        assert_eq!(t.growth(), &[2, 1]);
        assert!((t.level(2).gram[(0, 0)] - 1.0).abs() < 1e-12);
        let a = tower(&catalog::abelian(2));
        assert_eq!((a.growth(), a.step()), (&[2usize][..], 1));
    }

    #[test]
    fn scaled_heisenberg_class_norm() {
        // [X1, X2] = 2T: the unit element of Λ²H maps to 2[T], so ‖[T]‖ = 1/2
        let t = tower(&catalog::scaled_heisenberg(2.0));
        let tt = DVector::from_column_slice(&[0.0, 0.0, 1.0]);
        assert!((t.class_norm_squared(2, &tt).sqrt() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn jacobi_violation_reports_triple() {
        let err = StructureSpec::builder(["X1", "X2", "T", "S1"], 2)
            .bracket_named("X1", "X2", &[("T", 1.0)])
            .unwrap()
            .bracket_named("X1", "T", &[("S1", 1.0)])
            .unwrap()
            .bracket_named("X2", "T", &[("S1", -1.0)])
            .unwrap()
            .bracket_named("X2", "S1", &[("T", 1.0)])
            .unwrap()
            .build(1e-9)
            .unwrap_err();
        assert!(matches!(err, Error::JacobiViolation { .. }), "{err:?}");
    }

    #[test]
    fn duplicate_bracket_rejected() {
        let err = StructureSpec::builder(["X1", "X2", "T"], 2)
            .bracket(0, 1, &[(2, 1.0)])
            .unwrap()
            .bracket(1, 0, &[(2, -1.0)])
            .unwrap_err();
        assert!(matches!(err, Error::InvalidStructure(_)));
    }

    #[test]
    fn not_bracket_generating() {
        let spec = StructureSpec::builder(["X1", "X2", "T", "U"], 2)
            .bracket(0, 1, &[(2, 1.0)])
            .unwrap()
            .build(1e-9)
            .unwrap();
        assert_eq!(compute_filtration(&spec, 1e-9).unwrap_err(), Error::NotBracketGenerating { rank: 3, dim: 4 });
    }

    #[test]
    fn frame_vector_levels_of_example() {
        let t = tower(&catalog::deformed_cartan());
        assert_eq!(t.frame_vector_levels(), [1, 1, 2, 3, 3]);
    }

    #[test]
    fn coframe_and_frame_are_dual_and_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let (_, spec) = samples::random_structure(&mut rng, 1e-9);
            let t = tower(&spec);
            for l in t.levels() {
                let d = l.dim();
                assert!((&l.coframe * &l.frame - DMatrix::identity(d, d)).norm() < 1e-9);
                assert!((l.frame.transpose() * &l.gram * &l.frame - DMatrix::identity(d, d)).norm() < 1e-8);
                assert!((l.coframe.transpose() * &l.coframe - &l.gram).norm() < 1e-8 * l.gram.norm().max(1.0));
            }
        }
    }

    fn filtration_closure_holds(spec: &StructureSpec, t: &QuotientTower) -> bool {
        let n = spec.dim();
        for m in 1..t.step() {
            let hm = t.filtration().space(m).basis().clone();
            for a in 0..spec.horizontal_rank() {
                let ea = DVector::from_fn(n, |i, _| if i == a { 1.0 } else { 0.0 });
                for h in hm.column_iter() {
                    if !t.filtration().space(m + 1).contains(&spec.bracket(&h.into_owned(), &ea)) {
                        return false;
                    }
                }
            }
        }
        true
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn filtration_is_natural_under_horizontal_isometries(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (_, spec) = samples::random_structure(&mut rng, 1e-9);
            let t = tower(&spec);
            prop_assert!(filtration_closure_holds(&spec, &t));
            prop_assert_eq!(t.growth().iter().sum::<usize>(), spec.dim());
            prop_assert!(t.growth().iter().all(|&g| g > 0));

            let p = samples::random_isometric_reframing(&mut rng, &spec);
            let moved = spec.change_frame(&p, 1e-9).unwrap();
            let t2 = tower(&moved);
            prop_assert_eq!(t.growth(), t2.growth());
            for m in 1..=t.step() {
                // H_m' = P⁻¹ H_m as subspaces
                let mapped = orthonormalize(&(&p * t2.filtration().space(m).basis()), 1e-9);
                prop_assert!(mapped.max_angle(t.filtration().space(m)) < 1e-8);
                // induced metrics agree on the transported frame classes
                let e2 = &p * t2.level(m).frame_vectors();
                let c = t.level(m).q.transpose() * &e2;
                let g = c.transpose() * &t.level(m).gram * &c;
                prop_assert!((g - DMatrix::identity(t.d(m), t.d(m))).norm() < 1e-8);
            }
        }
    }
}
