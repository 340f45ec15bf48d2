//! Command execution, independent of argument parsing and process exit.

use std::fmt::Write as _;

use serde::Serialize;
use srcomplement::complement::{minimal_rigid_complement, solve_v_normal, Provenance};
use srcomplement::geometry::{connection_and_torsion, horizontal_laplacian_coeffs, isometry_dim_bound, popp_volume, vnormal_vrigid_flags};
use srcomplement::jmaps::check_semi_j_nondegenerate;
use srcomplement::{compute_filtration, quotient_tower, GradedComplement, QuotientTower, Variant};

use crate::format::{parse_structure, write_structure, ComplementBlock, FormatError};
use crate::report::{
    analysis_text, complement_text, report_text, trace_json, Analysis, CheckDoc, ComplementDoc, ComplementJson, GeometryJson, Report,
    StructureEcho, Tool, VNormalJson,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Complement,
    Check,
    Report,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    /// JSON on stdout (for `report`, the text summary also goes to stderr).
    Default,
    Json,
    Text,
}

#[derive(Clone, Copy, Debug)]
pub struct Options {
    pub tol: f64,
    pub seed: u64,
    pub alternate: bool,
    pub format: Format,
}

impl Default for Options {
    fn default() -> Self {
        Self { tol: srcomplement::DEFAULT_TOL, seed: 0, alternate: false, format: Format::Default }
    }
}

/// What the process prints and its exit status.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub stderr: String,
    pub code: i32,
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_DOMAIN: i32 = 2;

fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

fn failure(code: i32, message: impl std::fmt::Display) -> Outcome {
    Outcome { stdout: String::new(), stderr: format!("error: {message}\n"), code }
}

fn domain(e: srcomplement::Error) -> Outcome {
    failure(EXIT_DOMAIN, e)
}

/// Reads `path` and runs `command`.
pub fn run_file(command: Command, path: &std::path::Path, opts: &Options) -> Outcome {
    match std::fs::read_to_string(path) {
        Ok(text) => run_text(command, &text, opts),
        Err(e) => failure(EXIT_IO, format!("IoError: {}: {e}", path.display())),
    }
}

pub fn run_text(command: Command, text: &str, opts: &Options) -> Outcome {
    let parsed = match parse_structure(text, opts.tol) {
        Ok(p) => p,
        Err(e @ FormatError::Parse { .. }) => return failure(EXIT_IO, e),
        Err(FormatError::Structure(e)) => return domain(e),
    };
    let tower = match compute_filtration(&parsed.spec, opts.tol).and_then(|f| quotient_tower(&parsed.spec, &f, opts.tol)) {
        Ok(t) => t,
        Err(e) => return domain(e),
    };
    let result = match command {
        Command::Analyze => analyze(&tower, opts),
        Command::Complement => complement(&tower, opts),
        Command::Check => check(&tower, &parsed.complement, opts),
        Command::Report => report(&tower, opts),
    };
    result.unwrap_or_else(domain)
}

fn render(opts: &Options, json_doc: String, text: String) -> String {
    match opts.format {
        Format::Text => text,
        _ => json_doc,
    }
}

fn analyze(tower: &QuotientTower, opts: &Options) -> srcomplement::Result<Outcome> {
    let nondeg = check_semi_j_nondegenerate(tower, opts.seed, opts.tol)?;
    let doc = Analysis::new(tower, &nondeg, opts.tol, opts.seed);
    let stdout = render(opts, json(&doc), analysis_text(&doc));
    Ok(match nondeg.require() {
        Ok(()) => Outcome { stdout, stderr: String::new(), code: EXIT_OK },
        Err(e) => Outcome { stdout, stderr: format!("error: {e}\n"), code: EXIT_DOMAIN },
    })
}

fn complement(tower: &QuotientTower, opts: &Options) -> srcomplement::Result<Outcome> {
    let variant = if opts.alternate { Variant::Alternate } else { Variant::MinimalRigid };
    let run = minimal_rigid_complement(tower, variant)?;
    let doc = ComplementDoc::new(&run, tower, opts.tol);
    let mut text = complement_text(&doc.complement, tower.spec().names());
    let _ = writeln!(text, "R = {:?}", doc.r_vector);
    Ok(Outcome { stdout: render(opts, json(&doc), text), stderr: String::new(), code: EXIT_OK })
}

/// Validates `complement <m>` blocks, one per level `2..=r`.
pub fn supplied_complement(tower: &QuotientTower, blocks: &[ComplementBlock]) -> srcomplement::Result<GradedComplement> {
    let r = tower.step();
    let n = tower.dim();
    let mut bases = Vec::with_capacity(r.saturating_sub(1));
    for m in 2..=r {
        let mut found = blocks.iter().filter(|b| b.level == m);
        let block = found.next().ok_or_else(|| srcomplement::Error::InvalidComplement {
            level: m,
            reason: String::from("no `complement` block for this level"),
        })?;
        if found.next().is_some() {
            return Err(srcomplement::Error::InvalidComplement { level: m, reason: String::from("more than one block for this level") });
        }
        bases.push(block.matrix(n));
    }
    if let Some(b) = blocks.iter().find(|b| b.level < 2 || b.level > r) {
        return Err(srcomplement::Error::InvalidComplement { level: b.level, reason: format!("levels run from 2 to {r}") });
    }
    GradedComplement::from_subspaces(tower, &bases, Provenance::UserSupplied)
}

fn check(tower: &QuotientTower, blocks: &[ComplementBlock], opts: &Options) -> srcomplement::Result<Outcome> {
    if blocks.is_empty() && tower.step() > 1 {
        return Ok(failure(EXIT_IO, "ParseError: `check` needs `complement <level>` blocks in the input file"));
    }
    let (doc, code, stderr) = match supplied_complement(tower, blocks) {
        Ok(c) => {
            let cj = ComplementJson::new(&c, tower, opts.tol);
            (CheckDoc { tool: Tool::default(), tolerance: opts.tol, valid: true, error: None, complement: Some(cj) }, EXIT_OK, String::new())
        }
        Err(e) => {
            let msg = e.to_string();
            let doc = CheckDoc { tool: Tool::default(), tolerance: opts.tol, valid: false, error: Some(msg.clone()), complement: None };
            (doc, EXIT_DOMAIN, format!("error: {msg}\n"))
        }
    };
    let text = match &doc.complement {
        Some(c) => format!("valid graded complement\n{}", complement_text(c, tower.spec().names())),
        None => format!("invalid complement: {}\n", doc.error.as_deref().unwrap_or("")),
    };
    Ok(Outcome { stdout: render(opts, json(&doc), text), stderr, code })
}

/// Builds the full report.
pub fn build_report(tower: &QuotientTower, opts: &Options) -> srcomplement::Result<Report> {
    let nondeg = check_semi_j_nondegenerate(tower, opts.seed, opts.tol)?;
    nondeg.require()?;
    let run = minimal_rigid_complement(tower, Variant::MinimalRigid)?;
    let alt = minimal_rigid_complement(tower, Variant::Alternate)?;
    let vn = solve_v_normal(tower)?;
    let table = connection_and_torsion(&run.complement, tower)?;
    let lap = horizontal_laplacian_coeffs(&table, opts.tol);
    let analysis = Analysis::new(tower, &nondeg, opts.tol, opts.seed);
    let complement = ComplementJson::new(&run.complement, tower, opts.tol);
    let check_file = write_structure(tower.spec(), &complement.blocks());
    Ok(Report {
        tool: Tool::default(),
        structure: StructureEcho::new(tower.spec()),
        tolerance: opts.tol,
        seed: opts.seed,
        filtration: analysis.filtration,
        nondegeneracy: analysis.nondegeneracy,
        alternate_complement: ComplementJson::new(&alt.complement, tower, opts.tol),
        complement,
        r_vector: run.r.iter().map(|&x| if x == 0.0 { 0.0 } else { x }).collect(),
        trace: trace_json(&run.trace),
        alternate_trace: trace_json(&alt.trace),
        v_normal: VNormalJson::new(&vn, &run.complement, opts.tol),
        geometry: GeometryJson::new(
            popp_volume(tower),
            table.properties(opts.tol),
            vnormal_vrigid_flags(&table, opts.tol),
            &lap,
            isometry_dim_bound(tower)?,
        ),
        check_file,
    })
}

fn report(tower: &QuotientTower, opts: &Options) -> srcomplement::Result<Outcome> {
    let r = build_report(tower, opts)?;
    let text = report_text(&r);
    Ok(match opts.format {
        Format::Default => Outcome { stdout: json(&r), stderr: text, code: EXIT_OK },
        Format::Json => Outcome { stdout: json(&r), stderr: String::new(), code: EXIT_OK },
        Format::Text => Outcome { stdout: text, stderr: String::new(), code: EXIT_OK },
    })
}
