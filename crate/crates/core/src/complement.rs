//! The `𝒮` and `𝒜` maps, their unique minimizers, and the backwards
//! induction producing the minimal rigid complement.
//!
//! Frames are stored as full representatives (columns in input-frame
//! coordinates). A frame of level `m` and modulus `k` is only meaningful
//! modulo `H_k`; the minimizers always start from the canonical
//! representative obtained by dropping the blocks below `k + 1`.

use alloc::{format, string::String, vec::Vec};

use nalgebra::{DMatrix, DVector};

use crate::jmaps::{assemble_jhat, assemble_jmap_rows, level_verdicts, trace_map};
use crate::linalg::{gram_schmidt_in, min_norm_affine, orthonormalize, pinv_solve, rref, spectral_norm, AffineConstraints, HMatrix, LinearHMap, MinNorm, Subspace};
use crate::structure::QuotientTower;
use crate::{Error, Result};

pub use crate::jmaps::Coframe;

/// An `(m, k)`-frame: `d_m` representatives whose level-`m` classes are
/// orthonormal, defined modulo `H_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSection {
    pub level: usize,
    pub modulus: usize,
    /// `n × d_m`.
    pub vectors: DMatrix<f64>,
}

impl FrameSection {
    /// The frame dual to the tower's canonical coframe class at level `m`.
    pub fn canonical(m: usize, tower: &QuotientTower) -> Self {
        Self { level: m, modulus: m - 1, vectors: tower.level(m).frame_vectors() }
    }
}

fn check_dual(coframe: &Coframe, frame: &FrameSection, tower: &QuotientTower) -> Result<()> {
    if coframe.level != frame.level || coframe.rows.ncols() != frame.vectors.nrows() || coframe.len() != frame.vectors.ncols() {
        return Err(Error::ShapeMismatch {
            expected: format!("coframe and frame of level {}", coframe.level),
            found: format!("frame of level {} with {} vectors", frame.level, frame.vectors.ncols()),
        });
    }
    let d = coframe.len();
    let res = (&coframe.rows * &frame.vectors - DMatrix::identity(d, d)).amax();
    if res > tower.tol() * (coframe.rows.amax() * frame.vectors.amax()).max(1.0) {
        return Err(Error::DualityViolation { residual: res });
    }
    Ok(())
}

fn check_annihilates(coframe: &Coframe, frame: &FrameSection, tower: &QuotientTower) -> Result<()> {
    if frame.level <= coframe.level || coframe.rows.ncols() != frame.vectors.nrows() {
        return Err(Error::ShapeMismatch {
            expected: format!("frame of level above {}", coframe.level),
            found: format!("frame of level {}", frame.level),
        });
    }
    let res = (&coframe.rows * &frame.vectors).amax();
    if res > tower.tol() * (coframe.rows.amax() * frame.vectors.amax()).max(1.0) {
        return Err(Error::AnnihilationViolation { residual: res });
    }
    Ok(())
}

/// `(φ [E_j, X_l])_{ij}` for every horizontal `X_l`.
fn bracket_pairings(coframe: &Coframe, vectors: &DMatrix<f64>, tower: &QuotientTower) -> Vec<DMatrix<f64>> {
    tower
        .spec()
        .horizontal_right_brackets()
        .iter()
        .map(|r| &coframe.rows * r * vectors)
        .collect()
}

/// `⟨𝒮(φ, E)_{ij}, X⟩ = dφ^i(E_j, X) + dφ^j(E_i, X)` with
/// `dφ(A, B) = -φ([A, B])`.
pub fn s_map(coframe: &Coframe, frame: &FrameSection, tower: &QuotientTower) -> Result<HMatrix> {
    check_dual(coframe, frame, tower)?;
    let d = coframe.len();
    let pairings = bracket_pairings(coframe, &frame.vectors, tower);
    let mut out = HMatrix::zeros(d, d, pairings.len());
    for i in 0..d {
        for j in 0..d {
            let e = out.entry_mut(i, j);
            for (l, m) in pairings.iter().enumerate() {
                e[l] = -(m[(i, j)] + m[(j, i)]);
            }
        }
    }
    Ok(out)
}

/// `⟨𝒜(φ, E)_{ij}, X⟩ = dφ^i(E_j, X)` for a frame annihilated by `φ`.
pub fn a_map(coframe: &Coframe, frame: &FrameSection, tower: &QuotientTower) -> Result<HMatrix> {
    check_annihilates(coframe, frame, tower)?;
    let pairings = bracket_pairings(coframe, &frame.vectors, tower);
    let (rows, cols) = (coframe.len(), frame.vectors.ncols());
    let mut out = HMatrix::zeros(rows, cols, pairings.len());
    for i in 0..rows {
        for j in 0..cols {
            let e = out.entry_mut(i, j);
            for (l, m) in pairings.iter().enumerate() {
                e[l] = -m[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Result of one minimization stage.
#[derive(Clone, Debug)]
pub struct MinStep {
    pub frame: FrameSection,
    /// Orthonormal coordinates of the added classes, entry by entry.
    pub params: DVector<f64>,
    /// Norm of the minimal matrix.
    pub value: f64,
    /// `σ_min / σ_max` of the map on the feasible directions.
    pub conditioning: f64,
    pub feasible_dim: usize,
}

/// Adds `Z_j` (orthonormal coordinates in `Ĥ_level`) to each column.
fn shift(base: &DMatrix<f64>, level: usize, params: &DVector<f64>, tower: &QuotientTower) -> DMatrix<f64> {
    let dp = tower.d(level);
    let mut out = base.clone();
    for j in 0..base.ncols() {
        let z = params.rows(j * dp, dp).into_owned();
        let v = out.column(j) + tower.class_vector(level, &z);
        out.set_column(j, &v);
    }
    out
}

fn finish(sol: MinNorm, frame: FrameSection) -> MinStep {
    MinStep { frame, params: sol.params, value: sol.value, conditioning: sol.conditioning, feasible_dim: sol.feasible_dim }
}

/// Unique minimizer of `‖𝒮(φ, ·)‖` over the `(m, m-2)`-frames refining the
/// `(m, m-1)`-frame `frame`.
pub fn min_s(coframe: &Coframe, frame: &FrameSection, tower: &QuotientTower) -> Result<MinStep> {
    min_s_constrained(coframe, frame, None, tower)
}

/// [`min_s`] restricted to frames with `tr 𝒮(φ, F) = target`.
pub fn min_s_constrained(coframe: &Coframe, frame: &FrameSection, target_trace: Option<&DVector<f64>>, tower: &QuotientTower) -> Result<MinStep> {
    let m = frame.level;
    if m < 2 {
        return Err(Error::InvalidLevel { level: m, step: tower.step() });
    }
    let base = FrameSection { level: m, modulus: m - 1, vectors: tower.blocks(m, m, &frame.vectors) };
    let offset = s_map(coframe, &base, tower)?;
    let map = assemble_jhat(coframe, tower)?;
    let constraints = target_trace.map(|t| AffineConstraints { matrix: trace_map(&map), rhs: t - offset.trace() });
    let sol = match min_norm_affine(&offset, &map, constraints.as_ref(), tower.tol()) {
        Err(Error::Infeasible { residual }) => return Err(Error::InfeasibleW { residual }),
        other => other?,
    };
    let vectors = shift(&base.vectors, m - 1, &sol.params, tower);
    Ok(finish(sol, FrameSection { level: m, modulus: m.saturating_sub(2), vectors }))
}

/// Unique minimizer of `‖𝒜(φ, ·)‖` for a level-`k` coframe over the
/// `(m, k-2)`-frames refining the `(m, k-1)`-frame `frame`, `m > k`.
pub fn min_a(coframe: &Coframe, frame: &FrameSection, tower: &QuotientTower) -> Result<MinStep> {
    let k = coframe.level;
    let m = frame.level;
    if k < 2 || m <= k {
        return Err(Error::InvalidLevel { level: m, step: tower.step() });
    }
    let base = FrameSection { level: m, modulus: k - 1, vectors: tower.blocks(k, m, &frame.vectors) };
    let offset = a_map(coframe, &base, tower)?;
    let map = assemble_jmap_rows(coframe, base.vectors.ncols(), tower)?;
    let sol = min_norm_affine(&offset, &map, None, tower.tol())?;
    let vectors = shift(&base.vectors, k - 1, &sol.params, tower);
    Ok(finish(sol, FrameSection { level: m, modulus: k - 2, vectors }))
}

/// Solves `𝒮(φ, F) = 0` over the refinements of an `(m, m-1)`-frame by
/// least squares on a matrix assembled column by column from [`s_map`].
/// `value` is the residual norm; the system is solvable iff it is zero.
pub fn solve_s_zero(coframe: &Coframe, frame: &FrameSection, tower: &QuotientTower) -> Result<MinStep> {
    let m = frame.level;
    if m < 2 {
        return Err(Error::InvalidLevel { level: m, step: tower.step() });
    }
    let base = FrameSection { level: m, modulus: m - 1, vectors: tower.blocks(m, m, &frame.vectors) };
    let offset = s_map(coframe, &base, tower)?.to_vector();
    let p = base.vectors.ncols() * tower.d(m - 1);
    let mut a = DMatrix::zeros(offset.len(), p);
    for q in 0..p {
        let unit = DVector::from_fn(p, |i, _| if i == q { 1.0 } else { 0.0 });
        let probe = FrameSection { vectors: shift(&base.vectors, m - 1, &unit, tower), ..base.clone() };
        a.set_column(q, &(s_map(coframe, &probe, tower)?.to_vector() - &offset));
    }
    let params = pinv_solve(&a, &(-&offset), tower.tol());
    let residual = (&offset + &a * &params).norm();
    let vectors = shift(&base.vectors, m - 1, &params, tower);
    let info = crate::linalg::rank_info(&a, tower.tol());
    Ok(MinStep {
        frame: FrameSection { level: m, modulus: m.saturating_sub(2), vectors },
        params,
        value: residual,
        conditioning: if info.largest > 0.0 { info.smallest / info.largest } else { 0.0 },
        feasible_dim: p,
    })
}

/// An `m`-coframe annihilating `H_{m-1}` and the given higher frames,
/// dual to the canonical class frame of level `m`.
pub fn lift_coframe(m: usize, higher: &[&FrameSection], tower: &QuotientTower) -> Result<Coframe> {
    tower.check_level(m)?;
    let n = tower.dim();
    let lower = tower.lower_basis(m);
    let cols = lower.ncols() + higher.iter().map(|f| f.vectors.ncols()).sum::<usize>();
    if cols != n {
        return Err(Error::ShapeMismatch { expected: format!("{n} frame vectors"), found: format!("{cols}") });
    }
    let mut b = DMatrix::zeros(n, n);
    b.columns_mut(0, lower.ncols()).copy_from(&lower);
    let mut at = lower.ncols();
    for f in higher {
        b.columns_mut(at, f.vectors.ncols()).copy_from(&f.vectors);
        at += f.vectors.ncols();
    }
    let binv = b
        .try_inverse()
        .ok_or_else(|| Error::InvalidComplement { level: m, reason: String::from("higher frames are not independent modulo H_m") })?;
    let level = tower.level(m);
    let dm = level.dim();
    let start = lower.ncols() - dm;
    let mut selector = DMatrix::zeros(dm, n);
    selector.columns_mut(start, dm).copy_from(&level.coframe);
    Ok(Coframe { level: m, rows: selector * binv })
}

/// Kind of a recorded minimization stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageKind {
    MinS,
    MinA,
    /// Final level-2 step with the trace constraint.
    ConstrainedS,
    /// Exact solve of `𝒮 = 0`.
    ExactS,
}

impl StageKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StageKind::MinS => "min_s",
            StageKind::MinA => "min_a",
            StageKind::ConstrainedS => "min_s_trace_constrained",
            StageKind::ExactS => "solve_s_zero",
        }
    }
}

#[derive(Clone, Debug)]
pub struct StageRecord {
    pub kind: StageKind,
    pub coframe_level: usize,
    pub frame_level: usize,
    pub params: Vec<f64>,
    pub value: f64,
    pub conditioning: f64,
    pub feasible_dim: usize,
}

#[derive(Clone, Debug, Default)]
pub struct AlgorithmTrace {
    pub stages: Vec<StageRecord>,
}

impl AlgorithmTrace {
    fn push(&mut self, kind: StageKind, coframe_level: usize, step: &MinStep) {
        self.stages.push(StageRecord {
            kind,
            coframe_level,
            frame_level: step.frame.level,
            params: step.params.iter().copied().collect(),
            value: step.value,
            conditioning: step.conditioning,
            feasible_dim: step.feasible_dim,
        });
    }
}

/// Which complement the driver produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    /// Trace-constrained final step; the output is V-rigid.
    MinimalRigid,
    /// Unconstrained final step.
    Alternate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum LevelRule {
    Minimize(Variant),
    Exact,
}

/// Everything the driver produced.
#[derive(Clone, Debug)]
pub struct ComplementRun {
    pub complement: GradedComplement,
    pub trace: AlgorithmTrace,
    /// `Σ_{m≥3} tr 𝒮(φ^m, E^m_0)` in horizontal coordinates.
    pub r: DVector<f64>,
    /// `φ^2, …, φ^r`.
    pub coframes: Vec<Coframe>,
    /// `E^2_0, …, E^r_0`.
    pub frames: Vec<FrameSection>,
}

impl ComplementRun {
    pub fn coframe(&self, m: usize) -> &Coframe {
        &self.coframes[m - 2]
    }

    pub fn frame(&self, m: usize) -> &FrameSection {
        &self.frames[m - 2]
    }
}

/// Runs the backwards induction and returns the minimal rigid complement
/// (or its alternate variant).
pub fn minimal_rigid_complement(tower: &QuotientTower, variant: Variant) -> Result<ComplementRun> {
    run_driver(tower, LevelRule::Minimize(variant)).map(|(run, _)| run)
}

/// `Σ_{m≥3} tr 𝒮(φ^m, E^m)`.
pub fn r_vector(coframes: &[Coframe], frames: &[FrameSection], tower: &QuotientTower) -> Result<DVector<f64>> {
    let mut r = DVector::zeros(tower.spec().horizontal_rank());
    for (phi, e) in coframes.iter().zip(frames) {
        if phi.level >= 3 {
            r += s_map(phi, e, tower)?.trace();
        }
    }
    Ok(r)
}

fn run_driver(tower: &QuotientTower, rule: LevelRule) -> Result<(ComplementRun, Vec<(usize, f64)>)> {
    let r = tower.step();
    let provenance = match rule {
        LevelRule::Minimize(Variant::Alternate) => Provenance::Alternate,
        _ => Provenance::MinimalRigid,
    };
    let mut trace = AlgorithmTrace::default();
    let mut exact = Vec::new();
    if r == 1 {
        let complement = GradedComplement { levels: Vec::new(), provenance };
        let run = ComplementRun { complement, trace, r: DVector::zeros(tower.spec().horizontal_rank()), coframes: Vec::new(), frames: Vec::new() };
        return Ok((run, exact));
    }
    if let Some(v) = level_verdicts(tower, tower.tol())?.iter().find(|v| !v.injective) {
        return Err(Error::NotSemiJNondegenerate { level: v.level, kernel_dim: v.kernel_dim });
    }

    let mut frames: Vec<Option<FrameSection>> = alloc::vec![None; r + 1];
    let mut coframes: Vec<Option<Coframe>> = alloc::vec![None; r + 1];
    coframes[r] = Some(lift_coframe(r, &[], tower)?);
    frames[r] = Some(FrameSection::canonical(r, tower));

    let mut solve_s = |phi: &Coframe, e: &FrameSection, trace: &mut AlgorithmTrace| -> Result<FrameSection> {
        let step = match rule {
            LevelRule::Minimize(_) => min_s(phi, e, tower)?,
            LevelRule::Exact => {
                let s = solve_s_zero(phi, e, tower)?;
                exact.push((e.level, s.value));
                s
            }
        };
        let kind = if rule == LevelRule::Exact { StageKind::ExactS } else { StageKind::MinS };
        trace.push(kind, phi.level, &step);
        Ok(step.frame)
    };

    for m in (2..r).rev() {
        let phi = coframes[m + 1].clone().expect("set in the previous round");
        for j in m + 2..=r {
            let step = min_a(&phi, frames[j].as_ref().expect("set"), tower)?;
            trace.push(StageKind::MinA, phi.level, &step);
            frames[j] = Some(step.frame);
        }
        let refined = solve_s(&phi, frames[m + 1].as_ref().expect("set"), &mut trace)?;
        frames[m + 1] = Some(refined);
        let higher: Vec<&FrameSection> = frames[m + 1..=r].iter().map(|f| f.as_ref().expect("set")).collect();
        coframes[m] = Some(lift_coframe(m, &higher, tower)?);
        frames[m] = Some(FrameSection::canonical(m, tower));
    }

    let phi2 = coframes[2].clone().expect("set");
    for j in 3..=r {
        let step = min_a(&phi2, frames[j].as_ref().expect("set"), tower)?;
        trace.push(StageKind::MinA, 2, &step);
        frames[j] = Some(step.frame);
    }
    let coframes: Vec<Coframe> = coframes.into_iter().skip(2).map(|c| c.expect("set")).collect();
    let upper: Vec<FrameSection> = frames[3..].iter().map(|f| f.clone().expect("set")).collect();
    let rvec = r_vector(&coframes[1..], &upper, tower)?;
    let e21 = frames[2].clone().expect("set");
    let final_frame = match rule {
        LevelRule::Minimize(Variant::MinimalRigid) => {
            let step = min_s_constrained(&phi2, &e21, Some(&(-&rvec)), tower)?;
            trace.push(StageKind::ConstrainedS, 2, &step);
            step.frame
        }
        LevelRule::Minimize(Variant::Alternate) => {
            let step = min_s(&phi2, &e21, tower)?;
            trace.push(StageKind::MinS, 2, &step);
            step.frame
        }
        LevelRule::Exact => solve_s(&phi2, &e21, &mut trace)?,
    };
    let mut all_frames = alloc::vec![final_frame];
    all_frames.extend(upper);
    let bases: Vec<DMatrix<f64>> = all_frames.iter().map(|f| f.vectors.clone()).collect();
    let complement = GradedComplement::from_subspaces(tower, &bases, provenance)?;
    Ok((ComplementRun { complement, trace, r: rvec, coframes, frames: all_frames }, exact))
}

/// Outcome of the search for a complement with `𝒮(φ^m, E^m) = 0` at
/// every level.
#[derive(Clone, Debug)]
pub struct VNormalSolution {
    pub exists: bool,
    pub complement: Option<GradedComplement>,
    /// Residual norm of `𝒮 = 0` per level (level, residual).
    pub residuals: Vec<(usize, f64)>,
}

/// Looks for the V-normal complement by solving `𝒮 = 0` exactly at each
/// level of the induction (the lower components of each frame are fixed as
/// in the minimal rigid complement).
pub fn solve_v_normal(tower: &QuotientTower) -> Result<VNormalSolution> {
    let (run, mut residuals) = run_driver(tower, LevelRule::Exact)?;
    residuals.sort_by_key(|&(l, _)| l);
    let scale = tower.spec().tensor().iter().fold(1.0, |a: f64, x| a.max(x.abs()));
    let exists = residuals.iter().all(|&(_, r)| r <= tower.tol() * scale * 10.0);
    let mut complement = run.complement;
    complement.provenance = Provenance::VNormal;
    Ok(VNormalSolution { exists, complement: exists.then_some(complement), residuals })
}

/// Origin of a complement.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    MinimalRigid,
    Alternate,
    VNormal,
    UserSupplied,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::MinimalRigid => "minimal-rigid",
            Provenance::Alternate => "alternate",
            Provenance::VNormal => "v-normal",
            Provenance::UserSupplied => "user-supplied",
        }
    }
}

/// `V_2 ⊕ … ⊕ V_r` with `H_m = H_{m-1} ⊕ V_m`, stored by the orthonormal
/// frames of the metric extension.
#[derive(Clone, Debug)]
pub struct GradedComplement {
    /// `levels[m-2]`: `n × d_m`, the representatives in `V_m` of the
    /// tower's orthonormal class frame of level `m`.
    levels: Vec<DMatrix<f64>>,
    pub provenance: Provenance,
}

impl GradedComplement {
    /// Validates spanning sets of `V_2, …, V_r` (columns).
    pub fn from_subspaces(tower: &QuotientTower, bases: &[DMatrix<f64>], provenance: Provenance) -> Result<Self> {
        let r = tower.step();
        if bases.len() != r.saturating_sub(1) {
            return Err(Error::InvalidComplement {
                level: bases.len() + 1,
                reason: format!("expected {} levels, got {}", r.saturating_sub(1), bases.len()),
            });
        }
        let tol = tower.tol();
        let mut levels = Vec::with_capacity(bases.len());
        for (idx, b) in bases.iter().enumerate() {
            let m = idx + 2;
            if b.nrows() != tower.dim() {
                return Err(Error::InvalidComplement { level: m, reason: format!("vectors have length {} instead of {}", b.nrows(), tower.dim()) });
            }
            let span = orthonormalize(b, tol);
            let dm = tower.d(m);
            if span.dim() != dm {
                return Err(Error::InvalidComplement { level: m, reason: format!("spans dimension {} instead of {dm}", span.dim()) });
            }
            let hm = tower.filtration().space(m);
            for v in span.basis().column_iter() {
                let res = hm.residual(&v.into_owned()).norm();
                if res > libm::sqrt(tol) {
                    return Err(Error::InvalidComplement { level: m, reason: format!("not contained in H_{m} (residual {res:e})") });
                }
            }
            let level = tower.level(m);
            let a = level.q.transpose() * span.basis();
            let info = crate::linalg::rank_info(&a, tol);
            if info.rank < dm {
                return Err(Error::InvalidComplement { level: m, reason: format!("meets H_{} nontrivially", m - 1) });
            }
            let ainv = a.try_inverse().expect("full rank");
            levels.push(span.basis() * ainv * &level.frame);
        }
        Ok(Self { levels, provenance })
    }

    pub fn step(&self) -> usize {
        self.levels.len() + 1
    }

    /// The orthonormal frame of `V_m` (columns) for `2 ≤ m ≤ r`.
    pub fn frame(&self, m: usize) -> &DMatrix<f64> {
        &self.levels[m - 2]
    }

    pub fn subspace(&self, m: usize, tol: f64) -> Subspace {
        orthonormalize(self.frame(m), tol)
    }

    /// `[e_0 … e_{d1-1} | V_2 frame | … | V_r frame]`.
    pub fn adapted_frame(&self, tower: &QuotientTower) -> DMatrix<f64> {
        let n = tower.dim();
        let d1 = tower.spec().horizontal_rank();
        let mut p = DMatrix::zeros(n, n);
        for a in 0..d1 {
            p[(a, a)] = 1.0;
        }
        let mut at = d1;
        for f in &self.levels {
            p.columns_mut(at, f.ncols()).copy_from(f);
            at += f.ncols();
        }
        p
    }

    /// The reported basis of `V_m`.
    ///
    /// Coordinates are ordered by decreasing filtration level of the frame
    /// vectors, then by index. The basis is the row-reduced echelon form in
    /// that order, orthonormalized in the metric extension, with each
    /// vector's first nonzero coordinate positive.
    pub fn canonical_basis(&self, m: usize, tower: &QuotientTower) -> DMatrix<f64> {
        let n = tower.dim();
        let tol = tower.tol();
        let order = canonical_order(tower);
        let f = self.frame(m);
        let permuted = DMatrix::from_fn(f.ncols(), n, |i, c| f[(order[c], i)]);
        let reduced = rref(&permuted, tol);
        let rows: Vec<usize> = (0..reduced.nrows()).filter(|&i| reduced.row(i).amax() > tol).collect();
        let mut basis = DMatrix::zeros(n, rows.len());
        for (j, &i) in rows.iter().enumerate() {
            for c in 0..n {
                basis[(order[c], j)] = reduced[(i, c)];
            }
        }
        let level = tower.level(m);
        let metric = &level.q * &level.gram * level.q.transpose();
        let mut out = gram_schmidt_in(&metric, &basis, tol).unwrap_or(basis);
        for j in 0..out.ncols() {
            let scale = out.column(j).amax();
            let first = order.iter().map(|&i| out[(i, j)]).find(|x| x.abs() > 1e-12 * scale).unwrap_or(1.0);
            if first < 0.0 {
                let neg = -out.column(j);
                out.set_column(j, &neg);
            }
            for i in 0..n {
                if out[(i, j)].abs() <= 1e-13 * scale {
                    out[(i, j)] = 0.0;
                }
            }
        }
        out
    }

    /// Largest principal angle between corresponding levels.
    pub fn max_angle(&self, other: &GradedComplement, tol: f64) -> f64 {
        if self.levels.len() != other.levels.len() {
            return core::f64::consts::FRAC_PI_2;
        }
        (2..=self.step()).map(|m| self.subspace(m, tol).max_angle(&other.subspace(m, tol))).fold(0.0, f64::max)
    }
}

/// Input coordinate indices sorted by decreasing filtration level, then index.
pub fn canonical_order(tower: &QuotientTower) -> Vec<usize> {
    let levels = tower.frame_vector_levels();
    let mut order: Vec<usize> = (0..tower.dim()).collect();
    order.sort_by_key(|&i| (core::cmp::Reverse(levels[i]), i));
    order
}

/// `max_X |Σ_i dψ^i(U_i, X)|` over the horizontal frame, for the adapted
/// orthonormal frame `{U_i}` of the complement with dual coframe `{ψ^i}`.
pub fn verify_v_rigid(complement: &GradedComplement, tower: &QuotientTower) -> f64 {
    let p = complement.adapted_frame(tower);
    let coframe = match p.clone().try_inverse() {
        Some(c) => c,
        None => return f64::INFINITY,
    };
    let spec = tower.spec();
    let d1 = spec.horizontal_rank();
    let mut worst: f64 = 0.0;
    for l in 0..d1 {
        let rl = spec.right_bracket_matrix(l);
        let mut s = 0.0;
        for i in d1..tower.dim() {
            // dψ^i(U_i, X_l) = -ψ^i([U_i, X_l])
            s -= (coframe.row(i) * &rl * p.column(i))[(0, 0)];
        }
        worst = worst.max(s.abs());
    }
    worst
}

/// The map `Z ↦ 𝒮(φ, E + Z)` as a matrix assembled from [`s_map`] probes;
/// used to cross-check the `Ĵ` route.
pub fn s_map_linear_part(coframe: &Coframe, frame: &FrameSection, tower: &QuotientTower) -> Result<LinearHMap> {
    let m = frame.level;
    let base = FrameSection { level: m, modulus: m - 1, vectors: tower.blocks(m, m, &frame.vectors) };
    let offset = s_map(coframe, &base, tower)?;
    let p = base.vectors.ncols() * tower.d(m - 1);
    let mut images = Vec::with_capacity(p);
    for q in 0..p {
        let unit = DVector::from_fn(p, |i, _| if i == q { 1.0 } else { 0.0 });
        let probe = FrameSection { vectors: shift(&base.vectors, m - 1, &unit, tower), ..base.clone() };
        images.push(&s_map(coframe, &probe, tower)? - &offset);
    }
    let (rows, cols, hdim) = offset.shape();
    LinearHMap::from_images(rows, cols, hdim, &images)
}

/// Relative gap `‖A - B‖ / max(1, ‖A‖)` between two linear maps.
pub fn map_gap(a: &LinearHMap, b: &LinearHMap) -> f64 {
    let d = a.matrix() - b.matrix();
    spectral_norm(&d) / spectral_norm(a.matrix()).max(1.0)
}
