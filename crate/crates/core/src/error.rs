use alloc::string::String;

/// Errors raised by the structure pipeline and the complement algorithm.
///
/// Every message starts with the variant name so that front ends can surface
/// it verbatim together with the offending level or index.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("ShapeMismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },

    #[error("NotInjective: linear map has rank {rank} on a {dim}-dimensional feasible set")]
    NotInjective { rank: usize, dim: usize },

    #[error("Infeasible: affine constraints are inconsistent (residual {residual:e})")]
    Infeasible { residual: f64 },

    #[error("InvalidStructure: {0}")]
    InvalidStructure(String),

    #[error("JacobiViolation: Jacobi identity fails for frame triple ({i}, {j}, {k}) with residual {residual:e}")]
    JacobiViolation { i: usize, j: usize, k: usize, residual: f64 },

    #[error("NotBracketGenerating: bracket filtration stabilizes at rank {rank} < {dim}")]
    NotBracketGenerating { rank: usize, dim: usize },

    #[error("NotSemiJNondegenerate: symmetrized J map at level {level} has a {kernel_dim}-dimensional kernel")]
    NotSemiJNondegenerate { level: usize, kernel_dim: usize },

    #[error("InfeasibleW: trace constraint at level 2 is inconsistent (residual {residual:e})")]
    InfeasibleW { residual: f64 },

    #[error("WrongStep: operation requires step 2, structure has step {step}")]
    WrongStep { step: usize },

    #[error("DualityViolation: coframe applied to frame deviates from the identity by {residual:e}")]
    DualityViolation { residual: f64 },

    #[error("AnnihilationViolation: coframe does not annihilate the frame (residual {residual:e})")]
    AnnihilationViolation { residual: f64 },

    #[error("InvalidCovector: covector is not in the annihilator of H_{level} (residual {residual:e})")]
    InvalidCovector { level: usize, residual: f64 },

    #[error("NotInFiltration: vector does not lie in H_{level} (residual {residual:e})")]
    NotInFiltration { level: usize, residual: f64 },

    #[error("InvalidLevel: level {level} outside 1..={step}")]
    InvalidLevel { level: usize, step: usize },

    #[error("InvalidComplement: level {level}: {reason}")]
    InvalidComplement { level: usize, reason: String },
}
