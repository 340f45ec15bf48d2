//! JSON documents emitted by the commands, and their text summaries.
//!
//! Field names are stable. Every basis is the canonical form from
//! [`GradedComplement::canonical_basis`]; vectors are listed in input-frame
//! coordinates.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use srcomplement::complement::{AlgorithmTrace, ComplementRun, VNormalSolution};
use srcomplement::geometry::{HorizontalLaplacian, TorsionProperties, VFlags};
use srcomplement::jmaps::{LevelVerdict, NondegeneracyReport, Step2Report};
use srcomplement::{GradedComplement, QuotientTower, StructureSpec};

/// Replaces `-0.0` by `0.0` so that output does not depend on signed zeros.
fn clean(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

fn vector(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().map(clean).collect()
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.column_iter().map(|c| c.iter().copied().map(clean).collect()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Tool {
    pub name: &'static str,
    pub version: &'static str,
}

impl Default for Tool {
    fn default() -> Self {
        Self { name: "srcomp", version: env!("CARGO_PKG_VERSION") }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Term {
    pub coef: f64,
    pub name: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct BracketEcho {
    pub left: String,
    pub right: String,
    pub terms: Vec<Term>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StructureEcho {
    pub dim: usize,
    pub horizontal: usize,
    pub basis: Vec<String>,
    pub brackets: Vec<BracketEcho>,
}

impl StructureEcho {
    pub fn new(spec: &StructureSpec) -> Self {
        let n = spec.dim();
        let names = spec.names();
        let mut brackets = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let terms: Vec<Term> = (0..n)
                    .filter(|&k| spec.coef(i, j, k) != 0.0)
                    .map(|k| Term { coef: spec.coef(i, j, k), name: names[k].clone() })
                    .collect();
                if !terms.is_empty() {
                    brackets.push(BracketEcho { left: names[i].clone(), right: names[j].clone(), terms });
                }
            }
        }
        Self { dim: n, horizontal: spec.horizontal_rank(), basis: names.to_vec(), brackets }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FiltrationJson {
    pub growth: Vec<usize>,
    pub step: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelVerdictJson {
    pub level: usize,
    pub injective: bool,
    pub kernel_dim: usize,
    pub domain_dim: usize,
    pub smallest_singular_value: f64,
    pub largest_singular_value: f64,
}

impl From<&LevelVerdict> for LevelVerdictJson {
    fn from(v: &LevelVerdict) -> Self {
        Self {
            level: v.level,
            injective: v.injective,
            kernel_dim: v.kernel_dim,
            domain_dim: v.domain_dim,
            smallest_singular_value: clean(v.smallest_singular_value),
            largest_singular_value: clean(v.largest_singular_value),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Step2Json {
    pub j_nondegenerate: bool,
    pub invertible_exists: bool,
    pub kernel_sum_condition: bool,
    pub determinant_identically_zero: bool,
    pub min_normalized_det: f64,
    pub max_normalized_det: f64,
    pub samples: usize,
    pub seed: u64,
}

impl From<&Step2Report> for Step2Json {
    fn from(s: &Step2Report) -> Self {
        Self {
            j_nondegenerate: s.j_nondegenerate,
            invertible_exists: s.invertible_exists,
            kernel_sum_condition: s.kernel_sum_condition,
            determinant_identically_zero: s.determinant_identically_zero,
            min_normalized_det: clean(s.min_normalized_det),
            max_normalized_det: clean(s.max_normalized_det),
            samples: s.samples,
            seed: s.seed,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NondegeneracyJson {
    pub semi_j_nondegenerate: bool,
    /// First degenerate level, if any.
    pub failing_level: Option<usize>,
    pub levels: Vec<LevelVerdictJson>,
    pub trace_surjective: Option<bool>,
    pub step2: Option<Step2Json>,
}

impl From<&NondegeneracyReport> for NondegeneracyJson {
    fn from(r: &NondegeneracyReport) -> Self {
        Self {
            semi_j_nondegenerate: r.semi_j_nondegenerate,
            failing_level: r.first_failure().map(|f| f.0),
            levels: r.levels.iter().map(Into::into).collect(),
            trace_surjective: r.trace_surjective,
            step2: r.step2.as_ref().map(Into::into),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Analysis {
    pub tool: Tool,
    pub structure: StructureEcho,
    pub tolerance: f64,
    pub seed: u64,
    pub filtration: FiltrationJson,
    pub nondegeneracy: NondegeneracyJson,
}

impl Analysis {
    pub fn new(tower: &QuotientTower, nondeg: &NondegeneracyReport, tol: f64, seed: u64) -> Self {
        Self {
            tool: Tool::default(),
            structure: StructureEcho::new(tower.spec()),
            tolerance: tol,
            seed,
            filtration: FiltrationJson { growth: tower.growth().to_vec(), step: tower.step() },
            nondegeneracy: nondeg.into(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelBasis {
    pub level: usize,
    /// Basis vectors in input-frame coordinates.
    pub basis: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ComplementJson {
    pub provenance: &'static str,
    pub levels: Vec<LevelBasis>,
    pub v_rigid: bool,
    pub v_rigid_residual: f64,
}

impl ComplementJson {
    pub fn new(c: &GradedComplement, tower: &QuotientTower, tol: f64) -> Self {
        let residual = srcomplement::complement::verify_v_rigid(c, tower);
        let scale = tower.spec().tensor().iter().fold(1.0, |a: f64, x| a.max(x.abs()));
        Self {
            provenance: c.provenance.as_str(),
            levels: (2..=tower.step()).map(|m| LevelBasis { level: m, basis: columns(&c.canonical_basis(m, tower)) }).collect(),
            v_rigid: residual <= tol * scale,
            v_rigid_residual: clean(residual),
        }
    }

    /// `(level, basis columns)` pairs, as written to complement blocks.
    pub fn blocks(&self) -> Vec<(usize, DMatrix<f64>)> {
        self.levels
            .iter()
            .map(|l| {
                let n = l.basis.first().map_or(0, Vec::len);
                (l.level, DMatrix::from_fn(n, l.basis.len(), |i, j| l.basis[j][i]))
            })
            .collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StageJson {
    pub stage: &'static str,
    pub coframe_level: usize,
    pub frame_level: usize,
    /// Orthonormal coordinates of the added classes.
    pub params: Vec<f64>,
    pub min_norm: f64,
    pub conditioning: f64,
    pub feasible_dim: usize,
}

pub fn trace_json(trace: &AlgorithmTrace) -> Vec<StageJson> {
    trace
        .stages
        .iter()
        .map(|s| StageJson {
            stage: s.kind.as_str(),
            coframe_level: s.coframe_level,
            frame_level: s.frame_level,
            params: s.params.iter().copied().map(clean).collect(),
            min_norm: clean(s.value),
            conditioning: clean(s.conditioning),
            feasible_dim: s.feasible_dim,
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ComplementDoc {
    pub tool: Tool,
    pub structure: StructureEcho,
    pub tolerance: f64,
    pub variant: &'static str,
    pub complement: ComplementJson,
    /// `R` in horizontal coordinates.
    pub r_vector: Vec<f64>,
    pub trace: Vec<StageJson>,
}

impl ComplementDoc {
    pub fn new(run: &ComplementRun, tower: &QuotientTower, tol: f64) -> Self {
        Self {
            tool: Tool::default(),
            structure: StructureEcho::new(tower.spec()),
            tolerance: tol,
            variant: run.complement.provenance.as_str(),
            complement: ComplementJson::new(&run.complement, tower, tol),
            r_vector: vector(&run.r),
            trace: trace_json(&run.trace),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckDoc {
    pub tool: Tool,
    pub tolerance: f64,
    pub valid: bool,
    /// Reason the supplied complement was rejected.
    pub error: Option<String>,
    pub complement: Option<ComplementJson>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelResidual {
    pub level: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VNormalJson {
    pub exists: bool,
    pub residuals: Vec<LevelResidual>,
    /// Largest principal angle to the minimal rigid complement.
    pub angle_to_minimal: Option<f64>,
}

impl VNormalJson {
    pub fn new(s: &VNormalSolution, minimal: &GradedComplement, tol: f64) -> Self {
        Self {
            exists: s.exists,
            residuals: s.residuals.iter().map(|&(level, r)| LevelResidual { level, residual: clean(r) }).collect(),
            angle_to_minimal: s.complement.as_ref().map(|c| clean(c.max_angle(minimal, tol))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TorsionJson {
    pub metric_compatibility: f64,
    pub same_level_orthogonality: f64,
    pub cross_level_symmetry: f64,
    pub all_hold: bool,
}

impl From<TorsionProperties> for TorsionJson {
    fn from(p: TorsionProperties) -> Self {
        Self {
            metric_compatibility: clean(p.metric_compatibility),
            same_level_orthogonality: clean(p.same_level_orthogonality),
            cross_level_symmetry: clean(p.cross_level_symmetry),
            all_hold: p.all_hold,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VFlagsJson {
    pub v_normal: bool,
    pub v_rigid: bool,
    pub normal_residual: f64,
    pub rigid_residual: f64,
}

impl From<VFlags> for VFlagsJson {
    fn from(f: VFlags) -> Self {
        Self { v_normal: f.v_normal, v_rigid: f.v_rigid, normal_residual: clean(f.normal_residual), rigid_residual: clean(f.rigid_residual) }
    }
}

/// Rule used for the connection on `H`.
pub const HORIZONTAL_RULE: &str =
    "interpretation: on H the same two rules as on V_m are used (same-level Koszul projection, cross-level skew bracket rule)";

#[derive(Clone, Debug, Serialize)]
pub struct GeometryJson {
    pub popp_density: f64,
    pub torsion: TorsionJson,
    pub flags: VFlagsJson,
    /// `Σ_i ∇_{E_i} E_i` in input-frame coordinates.
    pub laplacian_drift: Vec<f64>,
    /// `Δ_H = -∇_H^* ∇_H` applies (complement is V-rigid).
    pub laplacian_self_adjoint_form: bool,
    pub horizontal_connection_rule: &'static str,
    pub isometry_dim_bound: i64,
}

impl GeometryJson {
    pub fn new(popp: f64, torsion: TorsionProperties, flags: VFlags, lap: &HorizontalLaplacian, bound: i64) -> Self {
        Self {
            popp_density: clean(popp),
            torsion: torsion.into(),
            flags: flags.into(),
            laplacian_drift: vector(&lap.drift_input),
            laplacian_self_adjoint_form: lap.self_adjoint_form,
            horizontal_connection_rule: HORIZONTAL_RULE,
            isometry_dim_bound: bound,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: Tool,
    pub structure: StructureEcho,
    pub tolerance: f64,
    pub seed: u64,
    pub filtration: FiltrationJson,
    pub nondegeneracy: NondegeneracyJson,
    pub complement: ComplementJson,
    pub alternate_complement: ComplementJson,
    pub r_vector: Vec<f64>,
    pub trace: Vec<StageJson>,
    pub alternate_trace: Vec<StageJson>,
    pub v_normal: VNormalJson,
    pub geometry: GeometryJson,
    /// The input structure with the minimal rigid complement as
    /// `complement` blocks; `srcomp check` accepts it.
    pub check_file: String,
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Human-readable combination of the basis vectors with frame names.
pub fn combination(v: &[f64], names: &[String]) -> String {
    let mut out = String::new();
    for (x, name) in v.iter().zip(names) {
        if x.abs() < 1e-12 {
            continue;
        }
        let sign = match (out.is_empty(), *x < 0.0) {
            (true, true) => "-",
            (true, false) => "",
            (false, true) => " - ",
            (false, false) => " + ",
        };
        let mag = x.abs();
        let coef = if (mag - 1.0).abs() < 1e-12 { String::new() } else { format!("{mag:.6}*") };
        let _ = write!(out, "{sign}{coef}{name}");
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

pub fn analysis_text(a: &Analysis) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "growth vector: {:?}", a.filtration.growth);
    let _ = writeln!(s, "step: {}", a.filtration.step);
    let _ = writeln!(s, "semi-J-nondegenerate: {}", a.nondegeneracy.semi_j_nondegenerate);
    for v in &a.nondegeneracy.levels {
        let _ = writeln!(
            s,
            "  level {}: injective {} (kernel {}, sigma_min {:.3e}, sigma_max {:.3e})",
            v.level, v.injective, v.kernel_dim, v.smallest_singular_value, v.largest_singular_value
        );
    }
    if let Some(t) = a.nondegeneracy.trace_surjective {
        let _ = writeln!(s, "trace map surjective: {t}");
    }
    if let Some(s2) = &a.nondegeneracy.step2 {
        let _ = writeln!(
            s,
            "step 2: J-nondegenerate {}, invertible J exists {}, kernel-sum condition {} ({} samples, seed {})",
            s2.j_nondegenerate, s2.invertible_exists, s2.kernel_sum_condition, s2.samples, s2.seed
        );
    }
    s
}

pub fn complement_text(c: &ComplementJson, names: &[String]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "complement ({}):", c.provenance);
    for l in &c.levels {
        let spans: Vec<String> = l.basis.iter().map(|v| combination(v, names)).collect();
        let _ = writeln!(s, "  V_{} = span({})", l.level, spans.join(", "));
    }
    let _ = writeln!(s, "V-rigid: {} (residual {:.3e})", c.v_rigid, c.v_rigid_residual);
    s
}

pub fn report_text(r: &Report) -> String {
    let names = &r.structure.basis;
    let mut s = String::new();
    let _ = writeln!(s, "growth vector: {:?}, step {}", r.filtration.growth, r.filtration.step);
    let _ = writeln!(s, "semi-J-nondegenerate: {}", r.nondegeneracy.semi_j_nondegenerate);
    s.push_str(&complement_text(&r.complement, names));
    s.push_str(&complement_text(&r.alternate_complement, names));
    let _ = writeln!(s, "R = {}", fmt_vec(&r.r_vector));
    let _ = writeln!(s, "V-normal complement exists: {}", r.v_normal.exists);
    let g = &r.geometry;
    let _ = writeln!(s, "Popp density: {:.12}", g.popp_density);
    let _ = writeln!(s, "torsion properties hold: {}", g.torsion.all_hold);
    let _ = writeln!(s, "V-normal: {}, V-rigid: {}", g.flags.v_normal, g.flags.v_rigid);
    let _ = writeln!(s, "horizontal Laplacian drift: {}", fmt_vec(&g.laplacian_drift));
    let _ = writeln!(s, "isometry dimension bound: {}", g.isometry_dim_bound);
    s
}
