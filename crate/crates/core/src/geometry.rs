//! Geometry over a graded complement: the adapted frame, the connection and
//! its torsion, the horizontal Laplacian drift, Popp's volume and the
//! isometry dimension bound.
//!
//! The metric extension declares the adapted frame orthonormal. The
//! connection preserves every level: on a level it is the projection of the
//! Levi-Civita connection when differentiating along the same level, and
//! `⟨∇_A U_i, U_j⟩ = ½(⟨[A, U_i], U_j⟩ - ⟨[A, U_j], U_i⟩)` along any other
//! level. The horizontal level (`V_1 = H`) uses the same two rules.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::complement::GradedComplement;
use crate::jmaps::level_verdicts;
use crate::structure::{QuotientTower, StructureSpec};
use crate::{Error, Result};

/// Orthonormal frame adapted to `H ⊕ V_2 ⊕ … ⊕ V_r`, with its dual coframe.
#[derive(Clone, Debug)]
pub struct AdaptedFrame {
    /// Columns in input-frame coordinates.
    pub vectors: DMatrix<f64>,
    /// Rows: the dual coframe.
    pub coframe: DMatrix<f64>,
    pub levels: Vec<usize>,
}

impl AdaptedFrame {
    pub fn new(complement: &GradedComplement, tower: &QuotientTower) -> Result<Self> {
        let vectors = complement.adapted_frame(tower);
        let coframe = vectors.clone().try_inverse().ok_or_else(|| Error::InvalidComplement {
            level: 2,
            reason: alloc::string::String::from("adapted frame is singular"),
        })?;
        let mut levels = Vec::with_capacity(tower.dim());
        for m in 1..=tower.step() {
            levels.extend(core::iter::repeat_n(m, tower.d(m)));
        }
        Ok(Self { vectors, coframe, levels })
    }

    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    /// Largest deviation from the identity of the Gram matrix of each
    /// level's classes in its quotient.
    pub fn gram_residual(&self, tower: &QuotientTower) -> f64 {
        let mut worst: f64 = 0.0;
        let mut at = 0;
        for m in 1..=tower.step() {
            let d = tower.d(m);
            let block = self.vectors.columns(at, d);
            let l = tower.level(m);
            let y = l.q.transpose() * block;
            let g = y.transpose() * &l.gram * y;
            worst = worst.max((g - DMatrix::identity(d, d)).amax());
            at += d;
        }
        worst
    }

    /// `c[(a*n + b)*n + c] = ψ^c([U_a, U_b])`.
    pub fn structure_constants(&self, spec: &StructureSpec) -> Vec<f64> {
        let n = self.dim();
        let mut c = alloc::vec![0.0; n * n * n];
        for a in 0..n {
            for b in a + 1..n {
                let w = &self.coframe * spec.bracket(&self.vectors.column(a).into_owned(), &self.vectors.column(b).into_owned());
                for k in 0..n {
                    c[(a * n + b) * n + k] = w[k];
                    c[(b * n + a) * n + k] = -w[k];
                }
            }
        }
        c
    }
}

/// Connection coefficients `∇_{U_a} U_b = Γ_{ab}^c U_c` and torsion
/// `T(U_a, U_b) = T_{ab}^c U_c` over an adapted frame.
#[derive(Clone, Debug)]
pub struct ConnectionTable {
    pub frame: AdaptedFrame,
    constants: Vec<f64>,
    gamma: Vec<f64>,
    torsion: Vec<f64>,
}

impl ConnectionTable {
    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    fn idx(&self, a: usize, b: usize, c: usize) -> usize {
        let n = self.dim();
        (a * n + b) * n + c
    }

    pub fn constant(&self, a: usize, b: usize, c: usize) -> f64 {
        self.constants[self.idx(a, b, c)]
    }

    pub fn gamma(&self, a: usize, b: usize, c: usize) -> f64 {
        self.gamma[self.idx(a, b, c)]
    }

    pub fn torsion(&self, a: usize, b: usize, c: usize) -> f64 {
        self.torsion[self.idx(a, b, c)]
    }

    /// `T(U_a, U_b)` in adapted coordinates.
    pub fn torsion_vector(&self, a: usize, b: usize) -> DVector<f64> {
        DVector::from_fn(self.dim(), |c, _| self.torsion(a, b, c))
    }

    /// `T(U_a, U_b)` in input-frame coordinates.
    pub fn torsion_input(&self, a: usize, b: usize) -> DVector<f64> {
        &self.frame.vectors * self.torsion_vector(a, b)
    }

    fn scale(&self) -> f64 {
        self.constants.iter().fold(1.0, |s: f64, x| s.max(x.abs()))
    }

    /// Residuals of the structural properties of the connection.
    pub fn properties(&self, tol: f64) -> TorsionProperties {
        let n = self.dim();
        let lv = &self.frame.levels;
        let (mut compat, mut ortho, mut sym): (f64, f64, f64) = (0.0, 0.0, 0.0);
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    compat = compat.max((self.gamma(a, b, c) + self.gamma(a, c, b)).abs());
                    if lv[a] == lv[b] && lv[b] == lv[c] {
                        ortho = ortho.max(self.torsion(a, b, c).abs());
                    }
                    if lv[b] == lv[c] && lv[a] != lv[b] {
                        sym = sym.max((self.torsion(a, b, c) - self.torsion(a, c, b)).abs());
                    }
                }
            }
        }
        let bound = tol * self.scale();
        TorsionProperties {
            metric_compatibility: compat,
            same_level_orthogonality: ortho,
            cross_level_symmetry: sym,
            all_hold: compat <= bound && ortho <= bound && sym <= bound,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TorsionProperties {
    /// `max |Γ_{ab}^c + Γ_{ac}^b|`.
    pub metric_compatibility: f64,
    /// `max |⟨T(A, B), C⟩|` with `A, B, C` in one level.
    pub same_level_orthogonality: f64,
    /// `max |⟨T(B, U_i), U_j⟩ - ⟨T(B, U_j), U_i⟩|` with `U_i, U_j` in a
    /// level other than `B`'s.
    pub cross_level_symmetry: f64,
    pub all_hold: bool,
}

/// Connection coefficients and torsion for the complement.
pub fn connection_and_torsion(complement: &GradedComplement, tower: &QuotientTower) -> Result<ConnectionTable> {
    let frame = AdaptedFrame::new(complement, tower)?;
    let n = frame.dim();
    let c = frame.structure_constants(tower.spec());
    let at = |a: usize, b: usize, k: usize| c[(a * n + b) * n + k];
    let lv = &frame.levels;
    let mut gamma = alloc::vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for k in 0..n {
                if lv[b] != lv[k] {
                    continue;
                }
                gamma[(a * n + b) * n + k] = if lv[a] == lv[b] {
                    0.5 * (at(a, b, k) - at(b, k, a) + at(k, a, b))
                } else {
                    0.5 * (at(a, b, k) - at(a, k, b))
                };
            }
        }
    }
    let mut torsion = alloc::vec![0.0; n * n * n];
    for a in 0..n {
        for b in 0..n {
            for k in 0..n {
                let i = (a * n + b) * n + k;
                torsion[i] = gamma[i] - gamma[(b * n + a) * n + k] - c[i];
            }
        }
    }
    Ok(ConnectionTable { frame, constants: c, gamma, torsion })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VFlags {
    pub v_normal: bool,
    pub v_rigid: bool,
    /// `max |⟨T(X, U_i), U_j⟩|` over horizontal `X` and same-level vertical
    /// `U_i, U_j`.
    pub normal_residual: f64,
    /// `max_X |Σ_i ⟨T(X, U_i), U_i⟩|` over vertical `U_i`.
    pub rigid_residual: f64,
}

/// Evaluates V-normality and V-rigidity. The rigidity bound is the
/// normality bound times the number of vertical vectors, so a V-normal
/// table is always reported V-rigid.
pub fn vnormal_vrigid_flags(table: &ConnectionTable, tol: f64) -> VFlags {
    let n = table.dim();
    let lv = &table.frame.levels;
    let d1 = lv.iter().filter(|&&l| l == 1).count();
    let mut normal: f64 = 0.0;
    let mut rigid: f64 = 0.0;
    for x in 0..d1 {
        let mut s = 0.0;
        for i in d1..n {
            s += table.torsion(x, i, i);
            for j in d1..n {
                if lv[i] == lv[j] {
                    normal = normal.max(table.torsion(x, i, j).abs());
                }
            }
        }
        rigid = rigid.max(s.abs());
    }
    let bound = tol * table.scale();
    let v_normal = normal <= bound;
    let v_rigid = rigid <= bound * (n - d1).max(1) as f64;
    debug_assert!(!v_normal || v_rigid);
    VFlags { v_normal, v_rigid, normal_residual: normal, rigid_residual: rigid }
}

/// Coefficients of `Δ_H = Σ_i E_i E_i - Σ_i ∇_{E_i} E_i` over a horizontal
/// orthonormal frame `{E_i}`.
#[derive(Clone, Debug)]
pub struct HorizontalLaplacian {
    /// `Σ_i ∇_{E_i} E_i` in adapted coordinates (horizontal).
    pub drift_adapted: DVector<f64>,
    /// The same vector in input-frame coordinates.
    pub drift_input: DVector<f64>,
    /// Principal symbol `Σ_i E_i E_iᵀ` in input-frame coordinates.
    pub symbol: DMatrix<f64>,
    /// `Δ_H = -∇_H^* ∇_H` is applicable (the complement is V-rigid).
    pub self_adjoint_form: bool,
}

pub fn horizontal_laplacian_coeffs(table: &ConnectionTable, tol: f64) -> HorizontalLaplacian {
    let n = table.dim();
    let d1 = table.frame.levels.iter().filter(|&&l| l == 1).count();
    let drift_adapted = DVector::from_fn(n, |c, _| if c < d1 { (0..d1).map(|i| table.gamma(i, i, c)).sum() } else { 0.0 });
    let drift_input = &table.frame.vectors * &drift_adapted;
    let h = table.frame.vectors.columns(0, d1);
    let symbol = h * h.transpose();
    let self_adjoint_form = vnormal_vrigid_flags(table, tol).v_rigid;
    HorizontalLaplacian { drift_adapted, drift_input, symbol, self_adjoint_form }
}

/// Density of Popp's volume against `e_0 ∧ … ∧ e_{n-1}`: the determinant of
/// the stacked orthonormal quotient coframes.
pub fn popp_volume(tower: &QuotientTower) -> f64 {
    let n = tower.dim();
    let mut rows = DMatrix::zeros(n, n);
    let mut at = 0;
    for l in tower.levels() {
        let c = l.coframe_covectors();
        rows.rows_mut(at, c.nrows()).copy_from(&c);
        at += c.nrows();
    }
    rows.determinant().abs()
}

/// Independent evaluation of [`popp_volume`] as `Π_m sqrt(det G_m)`.
pub fn popp_volume_from_grams(tower: &QuotientTower) -> f64 {
    tower.levels().iter().map(|l| libm::sqrt(l.gram.determinant())).product()
}

/// `d1 (d1 - 3) / 2 + n`, the bound on the dimension of the isometry group.
pub fn isometry_dim_bound(tower: &QuotientTower) -> Result<i64> {
    if let Some(v) = level_verdicts(tower, tower.tol())?.iter().find(|v| !v.injective) {
        return Err(Error::NotSemiJNondegenerate { level: v.level, kernel_dim: v.kernel_dim });
    }
    Ok(isometry_bound_formula(tower.spec().horizontal_rank(), tower.dim()))
}

/// `d1 (d1 - 3) / 2 + n` in exact integer arithmetic.
pub fn isometry_bound_formula(d1: usize, n: usize) -> i64 {
    let d1 = d1 as i64;
    d1 * (d1 - 3) / 2 + n as i64
}
