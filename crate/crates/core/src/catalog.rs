//! Named nilpotent structures used in examples and tests.

use alloc::{format, string::String, vec::Vec};

use crate::structure::StructureSpec;

const TOL: f64 = 1e-12;

fn names(list: &[&str]) -> Vec<String> {
    list.iter().map(|s| String::from(*s)).collect()
}

/// `[a, b] = Σ c·name` entries.
type Bracket<'a> = (&'a str, &'a str, &'a [(&'a str, f64)]);

fn build(list: &[&str], d1: usize, brackets: &[Bracket]) -> StructureSpec {
    let mut b = StructureSpec::builder(names(list), d1);
    for (x, y, terms) in brackets {
        b = b.bracket_named(x, y, terms).expect("catalog bracket is well formed");
    }
    b.build(TOL).expect("catalog structure satisfies Jacobi")
}

/// `[X1, X2] = T`.
pub fn heisenberg() -> StructureSpec {
    scaled_heisenberg(1.0)
}

/// `[X1, X2] = s T`.
pub fn scaled_heisenberg(s: f64) -> StructureSpec {
    build(&["X1", "X2", "T"], 2, &[("X1", "X2", &[("T", s)])])
}

/// `[X1, X2] = T`, `[X1, T] = S1`, `[X2, T] = S2`, `[X1, S1] = 3 S2`.
pub fn deformed_cartan() -> StructureSpec {
    cartan_family(3.0)
}

/// The free step-3 algebra of rank 2 with an extra `[X1, S1] = β S2`.
pub fn cartan_family(beta: f64) -> StructureSpec {
    build(
        &["X1", "X2", "T", "S1", "S2"],
        2,
        &[
            ("X1", "X2", &[("T", 1.0)]),
            ("X1", "T", &[("S1", 1.0)]),
            ("X2", "T", &[("S2", 1.0)]),
            ("X1", "S1", &[("S2", beta)]),
        ],
    )
}

/// Free nilpotent of rank 2 and step 3.
pub fn cartan() -> StructureSpec {
    cartan_family(0.0)
}

/// `[X1, X2] = T`, `[X1, T] = S`.
pub fn engel() -> StructureSpec {
    build(&["X1", "X2", "T", "S"], 2, &[("X1", "X2", &[("T", 1.0)]), ("X1", "T", &[("S", 1.0)])])
}

/// `ℝⁿ` with everything horizontal.
pub fn abelian(n: usize) -> StructureSpec {
    let list: Vec<String> = (1..=n).map(|i| format!("X{i}")).collect();
    StructureSpec::builder(list, n).build(TOL).expect("abelian structure is valid")
}

/// Five-dimensional Heisenberg: `[X1, X2] = [X3, X4] = T`.
pub fn h5() -> StructureSpec {
    build(&["X1", "X2", "X3", "X4", "T"], 4, &[("X1", "X2", &[("T", 1.0)]), ("X3", "X4", &[("T", 1.0)])])
}

/// Free nilpotent of rank 3 and step 2.
pub fn free_step2_rank3() -> StructureSpec {
    build(
        &["X1", "X2", "X3", "T12", "T13", "T23"],
        3,
        &[("X1", "X2", &[("T12", 1.0)]), ("X1", "X3", &[("T13", 1.0)]), ("X2", "X3", &[("T23", 1.0)])],
    )
}

/// Quaternionic Heisenberg with `ω1 = e12 + e34`, `ω2 = e13 - e24`,
/// `ω3 = e14 + e23`.
pub fn quaternionic() -> StructureSpec {
    build(
        &["X1", "X2", "X3", "X4", "T1", "T2", "T3"],
        4,
        &[
            ("X1", "X2", &[("T1", 1.0)]),
            ("X3", "X4", &[("T1", 1.0)]),
            ("X1", "X3", &[("T2", 1.0)]),
            ("X2", "X4", &[("T2", -1.0)]),
            ("X1", "X4", &[("T3", 1.0)]),
            ("X2", "X3", &[("T3", 1.0)]),
        ],
    )
}

/// Free nilpotent of rank 2 and step 4 (Hall basis).
pub fn free_rank2_step4_quotient() -> StructureSpec {
    build(
        &["X1", "X2", "T", "S1", "S2", "U1", "U2", "U3"],
        2,
        &[
            ("X1", "X2", &[("T", 1.0)]),
            ("X1", "T", &[("S1", 1.0)]),
            ("X2", "T", &[("S2", 1.0)]),
            ("X1", "S1", &[("U1", 1.0)]),
            ("X2", "S1", &[("U2", 1.0)]),
            ("X1", "S2", &[("U2", 1.0)]),
            ("X2", "S2", &[("U3", 1.0)]),
        ],
    )
}

/// Model filiform algebra: `[X, Y_i] = Y_{i+1}`, with `X`, `Y1` horizontal.
pub fn filiform(n: usize) -> StructureSpec {
    assert!(n >= 3, "filiform algebras need dimension at least 3");
    let mut list = alloc::vec![String::from("X")];
    list.extend((1..n).map(|i| format!("Y{i}")));
    let mut b = StructureSpec::builder(list, 2);
    for i in 1..n - 1 {
        b = b.bracket(0, i, &[(i + 1, 1.0)]).expect("indices in range");
    }
    b.build(TOL).expect("filiform structure satisfies Jacobi")
}

/// Step 2 with `d1 = 4` and the single form `e12`: `𝒥(τ)` has rank 2.
pub fn degenerate_rank4() -> StructureSpec {
    build(&["X1", "X2", "X3", "X4", "T"], 4, &[("X1", "X2", &[("T", 1.0)])])
}

/// Growth `(4, 2, 1)` with `[X1, X2] = T1`, `[X3, X4] = T2`,
/// `[X1, T1] = S`; `[T2]` never brackets into `Ĥ_3`.
pub fn degenerate_level3() -> StructureSpec {
    build(
        &["X1", "X2", "X3", "X4", "T1", "T2", "S"],
        4,
        &[("X1", "X2", &[("T1", 1.0)]), ("X3", "X4", &[("T2", 1.0)]), ("X1", "T1", &[("S", 1.0)])],
    )
}

/// Looks a structure up by name (`abelian-N` and `filiform-N` take a size).
pub fn by_name(name: &str) -> Option<StructureSpec> {
    let sized = |prefix: &str| name.strip_prefix(prefix).and_then(|s| s.parse::<usize>().ok());
    Some(match name {
        "heisenberg" => heisenberg(),
        "deformed-cartan" => deformed_cartan(),
        "cartan" => cartan(),
        "engel" => engel(),
        "h5" => h5(),
        "free-step2-rank3" => free_step2_rank3(),
        "quaternionic" => quaternionic(),
        "free-rank2-step4" => free_rank2_step4_quotient(),
        "degenerate-rank4" => degenerate_rank4(),
        "degenerate-level3" => degenerate_level3(),
        _ => {
            if let Some(n) = sized("abelian-").filter(|&n| n >= 1) {
                abelian(n)
            } else {
                filiform(sized("filiform-").filter(|&n| n >= 3)?)
            }
        }
    })
}

/// Names accepted by [`by_name`] (sized families shown with a sample size).
pub const NAMES: &[&str] = &[
    "heisenberg",
    "deformed-cartan",
    "cartan",
    "engel",
    "h5",
    "free-step2-rank3",
    "quaternionic",
    "free-rank2-step4",
    "degenerate-rank4",
    "degenerate-level3",
    "abelian-3",
    "filiform-5",
];
