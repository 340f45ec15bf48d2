//! Quotient bracket maps, the `𝒥` operators, their symmetrized forms `Ĵ^k`
//! and the nondegeneracy checks.
//!
//! Classes of `Ĥ_m` are given by orthonormal-frame coordinates (see
//! [`QuotientTower::class_on_coords`]); for `m = 1` these are the
//! coefficients over the horizontal frame.

use alloc::{format, vec::Vec};

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::linalg::{null_space, orthonormalize, rank_info, HMatrix, LinearHMap, Subspace};
use crate::samples::random_orthogonal;
use crate::structure::QuotientTower;
use crate::{Error, Result};

/// Covectors `φ^1, …, φ^{d_m}` (rows, input-frame coordinates) in
/// `H_{m-1}^o` whose classes are orthonormal in the dual quotient.
#[derive(Clone, Debug, PartialEq)]
pub struct Coframe {
    pub level: usize,
    pub rows: DMatrix<f64>,
}

impl Coframe {
    /// Validates annihilation of `H_{m-1}` and orthonormality of the classes.
    pub fn new(level: usize, rows: DMatrix<f64>, tower: &QuotientTower) -> Result<Self> {
        tower.check_level(level)?;
        let l = tower.level(level);
        if rows.shape() != (l.dim(), tower.dim()) {
            return Err(Error::ShapeMismatch {
                expected: format!("{}x{}", l.dim(), tower.dim()),
                found: format!("{:?}", rows.shape()),
            });
        }
        let scale = rows.amax().max(1.0);
        let res = (&rows * tower.lower_basis(level - 1)).amax();
        if res > tower.tol() * scale {
            return Err(Error::InvalidCovector { level: level - 1, residual: res });
        }
        let cls = &rows * &l.q;
        let g = &cls * &l.gram_inv * cls.transpose();
        let res = (g - DMatrix::identity(l.dim(), l.dim())).amax();
        if res > libm::sqrt(tower.tol()) {
            return Err(Error::InvalidCovector { level, residual: res });
        }
        Ok(Self { level, rows })
    }

    /// The coframe built from the tower's orthonormal dual quotient basis.
    pub fn canonical(level: usize, tower: &QuotientTower) -> Self {
        Self { level, rows: tower.level(level).coframe_covectors() }
    }

    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn row(&self, i: usize) -> RowDVector<f64> {
        self.rows.row(i).into_owned()
    }

    /// The coframe `f φ` for an orthogonal `f`.
    pub fn rotate(&self, f: &DMatrix<f64>) -> Self {
        Self { level: self.level, rows: f * &self.rows }
    }
}

/// A class of `Ĥ_level` produced by a quotient bracket.
#[derive(Clone, Debug)]
pub struct QuotientClass {
    pub level: usize,
    /// Orthonormal-frame coordinates; empty when the level exceeds the step.
    pub coords: DVector<f64>,
    /// A representative vector in `H_level`.
    pub representative: DVector<f64>,
    /// `true` when the level exceeds the step and the class is zero.
    pub overflow: bool,
}

fn check_membership(tower: &QuotientTower, m: usize, v: &DVector<f64>) -> Result<()> {
    tower.check_level(m)?;
    if v.len() != tower.dim() {
        return Err(Error::ShapeMismatch { expected: format!("{}", tower.dim()), found: format!("{}", v.len()) });
    }
    let res = tower.filtration().space(m).residual(v).norm();
    if res > tower.tol() * v.norm().max(1.0) {
        return Err(Error::NotInFiltration { level: m, residual: res });
    }
    Ok(())
}

/// `B^{k,m}([A], [B]) = [-[A, B]]_{k+m}` from representatives `A ∈ H_k`,
/// `B ∈ H_m`.
pub fn bracket_quotient(k: usize, m: usize, a: &DVector<f64>, b: &DVector<f64>, tower: &QuotientTower) -> Result<QuotientClass> {
    check_membership(tower, k, a)?;
    check_membership(tower, m, b)?;
    let level = k + m;
    if level > tower.step() {
        return Ok(QuotientClass {
            level,
            coords: DVector::zeros(0),
            representative: DVector::zeros(tower.dim()),
            overflow: true,
        });
    }
    let v = -tower.spec().bracket(a, b);
    let coords = tower.class_on_coords(level, &v);
    let representative = tower.class_vector(level, &coords);
    Ok(QuotientClass { level, coords, representative, overflow: false })
}

/// Matrix of `𝒥^{m,k}([φ]) : Ĥ_m → Ĥ_k` in orthonormal quotient frames,
/// determined by `⟨𝒥 a, b⟩ = -φ([A, B])`.
#[derive(Clone, Debug, PartialEq)]
pub struct JOperator {
    pub m: usize,
    pub k: usize,
    /// `d_k × d_m`.
    pub matrix: DMatrix<f64>,
}

impl JOperator {
    pub fn apply(&self, a: &DVector<f64>) -> DVector<f64> {
        &self.matrix * a
    }
}

pub fn jmap(m: usize, k: usize, phi: &RowDVector<f64>, tower: &QuotientTower) -> Result<JOperator> {
    tower.check_level(m)?;
    tower.check_level(k)?;
    if phi.len() != tower.dim() {
        return Err(Error::ShapeMismatch { expected: format!("{}", tower.dim()), found: format!("{}", phi.len()) });
    }
    let below = (m + k - 1).min(tower.step());
    let res = tower.annihilation_residual(below, phi);
    if res > tower.tol() * phi.norm().max(1.0) {
        return Err(Error::InvalidCovector { level: below, residual: res });
    }
    let a = tower.level(m).frame_vectors();
    let b = tower.level(k).frame_vectors();
    let spec = tower.spec();
    let matrix = DMatrix::from_fn(b.ncols(), a.ncols(), |beta, alpha| {
        -(phi * spec.bracket(&a.column(alpha).into_owned(), &b.column(beta).into_owned()))[(0, 0)]
    });
    Ok(JOperator { m, k, matrix })
}

/// `𝒥^{k-1,1}(φ^i)` for every coframe entry.
fn coframe_jmaps(coframe: &Coframe, tower: &QuotientTower) -> Result<Vec<DMatrix<f64>>> {
    let k = coframe.level;
    if k < 2 {
        return Err(Error::InvalidLevel { level: k, step: tower.step() });
    }
    (0..coframe.len()).map(|i| Ok(jmap(k - 1, 1, &coframe.row(i), tower)?.matrix)).collect()
}

/// `Ĵ^k(Z)_{ij} = 𝒥^{k-1,1}(φ^i) Z_j + 𝒥^{k-1,1}(φ^j) Z_i`.
pub fn jhat(coframe: &Coframe, z: &[DVector<f64>], tower: &QuotientTower) -> Result<HMatrix> {
    let js = coframe_jmaps(coframe, tower)?;
    let d = coframe.len();
    if z.len() != d {
        return Err(Error::ShapeMismatch { expected: format!("{d} entries"), found: format!("{}", z.len()) });
    }
    let d1 = tower.spec().horizontal_rank();
    let mut out = HMatrix::zeros(d, d, d1);
    for i in 0..d {
        for j in 0..d {
            let v = &js[i] * &z[j] + &js[j] * &z[i];
            out.set_entry(i, j, &v);
        }
    }
    Ok(out)
}

/// The linear map `Z ↦ Ĵ^k(Z)`; parameter `j·d_{k-1} + α` is coordinate
/// `α` of `Z_j`.
pub fn assemble_jhat(coframe: &Coframe, tower: &QuotientTower) -> Result<LinearHMap> {
    let js = coframe_jmaps(coframe, tower)?;
    let d = coframe.len();
    let dp = tower.d(coframe.level - 1);
    let d1 = tower.spec().horizontal_rank();
    let mut images = Vec::with_capacity(d * dp);
    for j in 0..d {
        for alpha in 0..dp {
            let mut img = HMatrix::zeros(d, d, d1);
            for i in 0..d {
                let v = js[i].column(alpha).into_owned();
                let cur = img.entry_vector(i, j) + &v;
                img.set_entry(i, j, &cur);
                let cur = img.entry_vector(j, i) + &v;
                img.set_entry(j, i, &cur);
            }
            images.push(img);
        }
    }
    LinearHMap::from_images(d, d, d1, &images)
}

/// The linear map `Z ↦ (𝒥^{k-1,1}(φ^i) Z_j)_{ij}` into `d_k × cols`
/// matrices, with the same parameter order as [`assemble_jhat`].
pub fn assemble_jmap_rows(coframe: &Coframe, cols: usize, tower: &QuotientTower) -> Result<LinearHMap> {
    let js = coframe_jmaps(coframe, tower)?;
    let d = coframe.len();
    let dp = tower.d(coframe.level - 1);
    let d1 = tower.spec().horizontal_rank();
    let mut images = Vec::with_capacity(cols * dp);
    for j in 0..cols {
        for alpha in 0..dp {
            let mut img = HMatrix::zeros(d, cols, d1);
            for i in 0..d {
                img.set_entry(i, j, &js[i].column(alpha).into_owned());
            }
            images.push(img);
        }
    }
    LinearHMap::from_images(d, cols, d1, &images)
}

/// Injectivity verdict for one `Ĵ^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelVerdict {
    pub level: usize,
    pub injective: bool,
    pub kernel_dim: usize,
    /// Dimension of `(Ĥ_{k-1})^{d_k}`.
    pub domain_dim: usize,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NondegeneracyReport {
    pub levels: Vec<LevelVerdict>,
    /// Surjectivity of `tr ∘ Ĵ² : H^{d_2} → H`; `None` for step 1.
    pub trace_surjective: Option<bool>,
    pub semi_j_nondegenerate: bool,
    pub step2: Option<Step2Report>,
}

impl NondegeneracyReport {
    /// First level whose `Ĵ` has a kernel, with the kernel dimension.
    pub fn first_failure(&self) -> Option<(usize, usize)> {
        self.levels.iter().find(|v| !v.injective).map(|v| (v.level, v.kernel_dim))
    }

    pub fn require(&self) -> Result<()> {
        match self.first_failure() {
            Some((level, kernel_dim)) => Err(Error::NotSemiJNondegenerate { level, kernel_dim }),
            None => Ok(()),
        }
    }
}

/// Matrix of `Z ↦ tr Ĵ²(Z)` (rows: horizontal coordinates).
pub fn trace_map(map: &LinearHMap) -> DMatrix<f64> {
    let hdim = map.shape().2;
    let p = map.params();
    let mut out = DMatrix::zeros(hdim, p);
    for q in 0..p {
        let img = map.apply(&DVector::from_fn(p, |i, _| if i == q { 1.0 } else { 0.0 }));
        out.set_column(q, &img.trace());
    }
    out
}

/// Per-level injectivity of `Ĵ^k` for `k = 2..r`, using the canonical
/// coframes (the verdict does not depend on the coframe).
pub fn level_verdicts(tower: &QuotientTower, tol: f64) -> Result<Vec<LevelVerdict>> {
    (2..=tower.step())
        .map(|k| {
            let map = assemble_jhat(&Coframe::canonical(k, tower), tower)?;
            let info = rank_info(map.matrix(), tol);
            Ok(LevelVerdict {
                level: k,
                injective: info.injective(),
                kernel_dim: info.kernel_dim(),
                domain_dim: info.dim,
                smallest_singular_value: info.smallest,
                largest_singular_value: info.largest,
            })
        })
        .collect()
}

pub fn check_semi_j_nondegenerate(tower: &QuotientTower, seed: u64, tol: f64) -> Result<NondegeneracyReport> {
    let levels = level_verdicts(tower, tol)?;
    let trace_surjective = if tower.step() >= 2 {
        let map = assemble_jhat(&Coframe::canonical(2, tower), tower)?;
        let t = trace_map(&map);
        Some(rank_info(&t.transpose(), tol).rank == tower.spec().horizontal_rank())
    } else {
        None
    };
    let step2 = if tower.step() == 2 { Some(check_step2_conditions(tower, seed, tol)?) } else { None };
    let semi_j_nondegenerate = levels.iter().all(|v| v.injective);
    Ok(NondegeneracyReport { levels, trace_surjective, semi_j_nondegenerate, step2 })
}

/// The three sufficient conditions available in step 2.
#[derive(Clone, Debug, PartialEq)]
pub struct Step2Report {
    /// `𝒥(φ)` invertible for every sampled unit covector.
    pub j_nondegenerate: bool,
    /// Some sampled `𝒥(ψ)` is invertible.
    pub invertible_exists: bool,
    /// Some orthonormal coframe has `Σ 𝒥(φ^i)` injective on `Σ ker 𝒥(φ^i)`.
    pub kernel_sum_condition: bool,
    /// Every sample has `|det 𝒥| ≤ tol · σ_max^{d1}`.
    pub determinant_identically_zero: bool,
    /// Smallest and largest `|det 𝒥(φ)| / σ_max(𝒥(φ))^{d1}` over the samples.
    pub min_normalized_det: f64,
    pub max_normalized_det: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Number of random unit covectors added to the deterministic grid.
pub const RANDOM_SAMPLES: usize = 64;

fn normalized_det(j: &DMatrix<f64>) -> f64 {
    let d = j.nrows();
    if d == 0 {
        return 1.0;
    }
    let smax = crate::linalg::spectral_norm(j);
    if smax == 0.0 {
        return 0.0;
    }
    j.clone().determinant().abs() / libm::pow(smax, d as f64)
}

fn unit_random(rng: &mut ChaCha8Rng, d: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let nv = v.norm();
        if nv > 1e-3 && nv <= 1.0 {
            return v / nv;
        }
    }
}

pub fn check_step2_conditions(tower: &QuotientTower, seed: u64, tol: f64) -> Result<Step2Report> {
    if tower.step() != 2 {
        return Err(Error::WrongStep { step: tower.step() });
    }
    let coframe = Coframe::canonical(2, tower);
    let js = coframe_jmaps(&coframe, tower)?;
    let d2 = js.len();
    let combine = |c: &DVector<f64>| js.iter().zip(c.iter()).fold(DMatrix::zeros(js[0].nrows(), js[0].ncols()), |acc, (j, &w)| acc + j * w);

    let mut coeffs: Vec<DVector<f64>> = Vec::new();
    let s = core::f64::consts::FRAC_1_SQRT_2;
    for i in 0..d2 {
        coeffs.push(DVector::from_fn(d2, |a, _| if a == i { 1.0 } else { 0.0 }));
        for j in i + 1..d2 {
            for sign in [1.0, -1.0] {
                coeffs.push(DVector::from_fn(d2, |a, _| if a == i { s } else if a == j { sign * s } else { 0.0 }));
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RANDOM_SAMPLES {
        coeffs.push(unit_random(&mut rng, d2));
    }
    let dets: Vec<f64> = coeffs.iter().map(|c| normalized_det(&combine(c))).collect();
    let min_det = dets.iter().copied().fold(f64::INFINITY, f64::min);
    let max_det = dets.iter().copied().fold(0.0, f64::max);

    let mut kernel_sum_condition = false;
    let mut frng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_f5e7);
    for attempt in 0..=RANDOM_SAMPLES {
        let f = if attempt == 0 { DMatrix::identity(d2, d2) } else { random_orthogonal(&mut frng, d2) };
        let rotated: Vec<DMatrix<f64>> = (0..d2).map(|i| combine(&f.row(i).transpose())).collect();
        if kernel_sum_injective(&rotated, tol) {
            kernel_sum_condition = true;
            break;
        }
    }

    Ok(Step2Report {
        j_nondegenerate: min_det > tol,
        invertible_exists: max_det > tol,
        kernel_sum_condition,
        determinant_identically_zero: max_det <= tol,
        min_normalized_det: min_det,
        max_normalized_det: max_det,
        samples: coeffs.len(),
        seed,
    })
}

fn kernel_sum_injective(js: &[DMatrix<f64>], tol: f64) -> bool {
    let d1 = js.first().map_or(0, |j| j.nrows());
    let mut sum = Subspace::zero(d1, tol);
    for j in js {
        sum = sum.join(&null_space(j, tol));
    }
    if sum.dim() == 0 {
        return true;
    }
    let total = js.iter().fold(DMatrix::zeros(d1, d1), |a, j| a + j);
    let restricted = total * sum.basis();
    rank_info(&restricted, tol).injective()
}

/// Kernel dimension of `Ĵ^k` by exact-style Gaussian elimination on the
/// assembled matrix, used as an independent cross-check.
pub fn kernel_dim_by_elimination(matrix: &DMatrix<f64>, tol: f64) -> usize {
    let r = crate::linalg::rref(matrix, tol);
    let pivots = r.row_iter().filter(|row| row.iter().any(|x| x.abs() > tol)).count();
    matrix.ncols() - pivots
}

/// Orthonormal basis of the kernel of `Ĵ^k` (columns in parameter space).
pub fn jhat_kernel(coframe: &Coframe, tower: &QuotientTower, tol: f64) -> Result<DMatrix<f64>> {
    let map = assemble_jhat(coframe, tower)?;
    Ok(orthonormalize(&null_space(map.matrix(), tol), tol).basis().clone())
}
