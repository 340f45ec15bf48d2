//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs with a custom harness so the lines are always printed; the process
//! fails if any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use srcomplement::catalog;
use srcomplement::complement::{
    a_map, lift_coframe, min_a, min_s, min_s_constrained, r_vector, s_map, s_map_linear_part, solve_v_normal, verify_v_rigid, Coframe,
    FrameSection, GradedComplement, MinStep,
};
use srcomplement::geometry::{connection_and_torsion, isometry_dim_bound, popp_volume};
use srcomplement::jmaps::{assemble_jhat, check_semi_j_nondegenerate, jhat, kernel_dim_by_elimination};
use srcomplement::linalg::{orthonormalize, HMatrix};
use srcomplement::samples::{random_orthogonal, random_structure};
use srcomplement::{compute_filtration, minimal_rigid_complement, quotient_tower, QuotientTower, StructureSpec, Variant};
use srcomplement_cli::format::write_structure;
use srcomplement_cli::run::{run_file, run_text, Command, Options};

const TOL: f64 = 1e-9;

fn tower(spec: &StructureSpec) -> QuotientTower {
    let f = compute_filtration(spec, TOL).expect("filtration");
    quotient_tower(spec, &f, TOL).expect("tower")
}

fn structures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../structures")
}

/// Collects named sub-checks of one criterion.
struct Checks {
    items: Vec<(String, bool, String)>,
}

impl Checks {
    fn new() -> Self {
        Self { items: Vec::new() }
    }

    fn check(&mut self, name: &str, ok: bool, detail: impl Into<String>) {
        self.items.push((name.to_string(), ok, detail.into()));
    }

    fn close(&mut self, name: &str, got: f64, want: f64, tol: f64) {
        self.check(name, (got - want).abs() <= tol, format!("got {got:.12e}, want {want:.12e}, tol {tol:e}"));
    }

    fn report(&self, number: usize, title: &str) -> bool {
        let failed: Vec<&str> = self.items.iter().filter(|i| !i.1).map(|i| i.0.as_str()).collect();
        let ok = failed.is_empty();
        if ok {
            println!("PASS criterion {number}: {title} ({} checks)", self.items.len());
        } else {
            println!("FAIL criterion {number}: {title} ({} of {} checks failed: {})", failed.len(), self.items.len(), failed.join(", "));
        }
        for (name, pass, detail) in &self.items {
            if !pass || std::env::var_os("ACCEPTANCE_VERBOSE").is_some() {
                println!("    {} {name}: {detail}", if *pass { "ok  " } else { "FAIL" });
            }
        }
        ok
    }
}

fn cols(n: usize, data: &[&[f64]]) -> DMatrix<f64> {
    DMatrix::from_fn(n, data.len(), |i, j| data[j][i])
}

fn angle(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    orthonormalize(a, TOL).max_angle(&orthonormalize(b, TOL))
}

fn json_basis(doc: &Value, level: usize) -> DMatrix<f64> {
    let lv = doc["complement"]["levels"].as_array().unwrap().iter().find(|l| l["level"] == level).unwrap();
    let vs: Vec<Vec<f64>> = lv["basis"].as_array().unwrap().iter().map(|v| v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()).collect();
    DMatrix::from_fn(vs[0].len(), vs.len(), |i, j| vs[j][i])
}

fn hmat(rows: usize, cols: usize, entries: &[[f64; 2]]) -> HMatrix {
    let flat: Vec<f64> = entries.iter().flatten().copied().collect();
    HMatrix::from_vector(rows, cols, 2, &DVector::from_vec(flat)).unwrap()
}

fn criterion_1() -> bool {
    let mut c = Checks::new();
    let file = structures_dir().join("example.sr");
    let opts = Options { format: srcomplement_cli::run::Format::Json, ..Options::default() };

    let out = run_file(Command::Analyze, &file, &opts);
    let doc: Value = serde_json::from_str(&out.stdout).unwrap_or(Value::Null);
    c.check("growth (2,1,2)", doc["filtration"]["growth"] == serde_json::json!([2, 1, 2]), format!("{}", doc["filtration"]["growth"]));
    c.check("step 3", doc["filtration"]["step"] == 3, format!("{}", doc["filtration"]["step"]));

    let spec = catalog::deformed_cartan();
    let t = tower(&spec);
    let sigma = Coframe::new(3, DMatrix::from_row_slice(2, 5, &[0., 0., 0., 1., 0., 0., 0., 0., 0., 1.]), &t).unwrap();
    let tau = Coframe::new(2, DMatrix::from_row_slice(1, 5, &[0., 0., 1., 0., 0.]), &t).unwrap();
    let mut jhat_gap: f64 = 0.0;
    for (a, b) in [(1.0, 0.0), (0.0, 1.0), (0.7, -1.3)] {
        let got = jhat(&sigma, &[DVector::from_element(1, a), DVector::from_element(1, b)], &t).unwrap();
        let want = hmat(2, 2, &[[2. * a, 0.], [b, a], [b, a], [0., 2. * b]]);
        jhat_gap = jhat_gap.max((&got - &want).max_abs());
        let got = jhat(&tau, &[DVector::from_column_slice(&[a, b])], &t).unwrap();
        jhat_gap = jhat_gap.max((&got - &hmat(1, 1, &[[2. * b, -2. * a]])).max_abs());
    }
    c.close("both J-hat matrices as displayed", jhat_gap, 0.0, TOL);

    let frame = |a: f64, b: f64| FrameSection { level: 3, modulus: 1, vectors: cols(5, &[&[0., 0., a, 1., 0.], &[0., 0., b, 0., 1.]]) };
    for (a, b, want) in [(0.0, 0.0, 18.0), (0.0, -1.0, 12.0), (1.0, 1.0, 42.0)] {
        let v = s_map(&sigma, &frame(a, b), &t).unwrap().norm_squared();
        c.close(&format!("|S|^2 at ({a},{b}) = {want}"), v, want, TOL);
    }
    let step = min_s(&sigma, &frame(0.0, 0.0), &t).unwrap();
    c.check(
        "minimizer (a,b) = (0,-1)",
        (step.params[0]).abs() <= TOL && (step.params[1] + 1.0).abs() <= TOL,
        format!("got {:?}", step.params.as_slice()),
    );
    let e31 = cols(5, &[&[0., 0., 0., 1., 0.], &[0., 0., -1., 0., 1.]]);
    c.close("E3_1 = (S1, S2-T)", (&step.frame.vectors - &e31).amax(), 0.0, TOL);

    let run = minimal_rigid_complement(&t, Variant::MinimalRigid).unwrap();
    let e30_quoted = cols(5, &[&[0., -3., 0., 1., 0.], &[0., 0., -1., 0., 1.]]);
    let e30 = &run.frame(3).vectors;
    c.check(
        "E3_0 = (S1-3X2, S2-T)",
        (e30 - &e30_quoted).amax() <= TOL,
        format!("got columns {:?}", e30.column_iter().map(|v| v.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>()),
    );
    let v2_coframe = DMatrix::from_row_slice(1, 5, &[0., 0., 1., 0., 1.]);
    c.close("V^2 coframe tau+sigma^2", (&run.coframe(2).rows - &v2_coframe).amax(), 0.0, TOL);
    c.close("R = -2 X2", (&run.r - DVector::from_column_slice(&[0.0, -2.0])).amax(), 0.0, TOL);

    let last = run.trace.stages.last().unwrap();
    c.check("W has rank 0", last.feasible_dim == 0, format!("feasible dimension {}", last.feasible_dim));
    let w = &run.frame(2).vectors;
    c.check("W = {T-X1}", (w - cols(5, &[&[-1., 0., 1., 0., 0.]])).amax() <= TOL, format!("got {:?}", w.as_slice()));

    let out = run_file(Command::Complement, &file, &opts);
    let doc: Value = serde_json::from_str(&out.stdout).unwrap_or(Value::Null);
    let v2 = json_basis(&doc, 2);
    c.check("V2 = span(T-X1)", angle(&v2, &cols(5, &[&[-1., 0., 1., 0., 0.]])) <= TOL, format!("got {:?}", v2.as_slice()));
    let v3 = json_basis(&doc, 3);
    c.check(
        "V3 = span(S1-3X2, S2-T)",
        angle(&v3, &e30_quoted) <= TOL,
        format!("angle {:.3e}; got columns {:?}", angle(&v3, &e30_quoted), v3.column_iter().map(|v| v.iter().copied().collect::<Vec<_>>()).collect::<Vec<_>>()),
    );
    let alt_opts = Options { alternate: true, ..opts };
    let out = run_file(Command::Complement, &file, &alt_opts);
    let doc: Value = serde_json::from_str(&out.stdout).unwrap_or(Value::Null);
    let v2 = json_basis(&doc, 2);
    c.check("alternate V2 = span(T)", angle(&v2, &cols(5, &[&[0., 0., 1., 0., 0.]])) <= TOL, format!("got {:?}", v2.as_slice()));

    c.report(1, "golden example end to end (tol 1e-9)")
}

fn criterion_2() -> bool {
    let mut c = Checks::new();
    let t = tower(&catalog::heisenberg());
    let tol = 1e-12;
    let run = minimal_rigid_complement(&t, Variant::MinimalRigid).unwrap();
    let reeb = cols(3, &[&[0., 0., 1.]]);
    c.close("complement = span(T)", angle(run.complement.frame(2), &reeb), 0.0, tol);
    let vn = solve_v_normal(&t).unwrap();
    c.check("V-normal complement exists", vn.exists, format!("residuals {:?}", vn.residuals));
    if let Some(vc) = &vn.complement {
        c.close("V-normal complement equals it", vc.max_angle(&run.complement, TOL), 0.0, tol);
    }
    c.close("V-rigid residual 0", verify_v_rigid(&run.complement, &t), 0.0, tol);
    c.close("Popp density 1", popp_volume(&t), 1.0, tol);
    c.check("isometry bound 2", isometry_dim_bound(&t) == Ok(2), format!("{:?}", isometry_dim_bound(&t)));
    c.report(2, "Heisenberg oracle (tol 1e-12)")
}

/// Minimizer of a convex quadratic `f` over `{z : t z = rhs}` (or all of
/// `ℝ^p`) by nested grid search.
///
/// The feasible set is parametrized from the eigenvectors of `tᵀt`, the
/// Hessian of the reduced objective is measured by central differences and
/// the search runs along its eigenvectors: the objective is separable in
/// those coordinates, so the minimum over the product grid is the product
/// of the per-axis minima. Each axis is searched with cells 1, 1e-2 and
/// 1e-4, the first round widening its window until the best point is
/// interior.
struct GridResult {
    params: DVector<f64>,
    value: f64,
}

fn grid_minimize(f: &dyn Fn(&DVector<f64>) -> f64, p: usize, constraint: Option<(&DMatrix<f64>, &DVector<f64>)>) -> Option<GridResult> {
    let (z0, basis) = match constraint {
        None => (DVector::zeros(p), DMatrix::identity(p, p)),
        Some((t, rhs)) => {
            let e = (t.transpose() * t).symmetric_eigen();
            let top = e.eigenvalues.amax().max(1.0);
            let mut z0 = DVector::zeros(p);
            let mut kernel = Vec::new();
            for (i, &l) in e.eigenvalues.iter().enumerate() {
                let v = e.eigenvectors.column(i).into_owned();
                if l > 1e-10 * top {
                    z0 += &v * (v.dot(&(t.transpose() * rhs)) / l);
                } else {
                    kernel.push(v);
                }
            }
            if (t * &z0 - rhs).amax() > 1e-8 * rhs.amax().max(1.0) {
                return None;
            }
            let basis = if kernel.is_empty() { DMatrix::zeros(p, 0) } else { DMatrix::from_columns(&kernel) };
            (z0, basis)
        }
    };
    let q = basis.ncols();
    let g = |y: &DVector<f64>| f(&(&z0 + &basis * y));
    let unit = |i: usize| DVector::from_fn(q, |k, _| if k == i { 1.0 } else { 0.0 });
    let hess = DMatrix::from_fn(q, q, |i, j| {
        let (ei, ej) = (unit(i), unit(j));
        (g(&(&ei + &ej)) - g(&(&ei - &ej)) - g(&(&ej - &ei)) + g(&(-&ei - &ej))) / 4.0
    });
    let axes = if q == 0 { DMatrix::zeros(0, 0) } else { hess.symmetric_eigen().eigenvectors };
    let mut y = DVector::zeros(q);
    for i in 0..q {
        let u = axes.column(i).into_owned();
        let line = |s: f64| g(&(&u * s));
        let scan = |center: f64, half_cells: i64, cell: f64| {
            let mut best = (f64::INFINITY, center, 0i64);
            for k in -half_cells..=half_cells {
                let s = center + k as f64 * cell;
                let v = line(s);
                if v < best.0 {
                    best = (v, s, k);
                }
            }
            best
        };
        let mut half = 4i64;
        let mut best = scan(0.0, half, 1.0);
        while best.2.abs() == half && half < 1 << 20 {
            half *= 2;
            best = scan(0.0, half, 1.0);
        }
        let s = scan(best.1, 200, 1e-2).1;
        let s = scan(s, 200, 1e-4).1;
        y += &u * s;
    }
    let params = &z0 + &basis * &y;
    Some(GridResult { value: f(&params), params })
}

fn shift(tower: &QuotientTower, base: &DMatrix<f64>, level: usize, z: &DVector<f64>) -> DMatrix<f64> {
    let dp = tower.d(level);
    let mut out = base.clone();
    for j in 0..base.ncols() {
        let v = out.column(j) + tower.class_vector(level, &z.rows(j * dp, dp).into_owned());
        out.set_column(j, &v);
    }
    out
}

struct StageCheck {
    kind: &'static str,
    param_gap: f64,
    value_gap: f64,
}

fn compare(kind: &'static str, step: &MinStep, grid: Option<GridResult>) -> StageCheck {
    match grid {
        None => StageCheck { kind, param_gap: f64::INFINITY, value_gap: f64::INFINITY },
        Some(g) => StageCheck {
            kind,
            param_gap: (&g.params - &step.params).amax(),
            value_gap: (g.value - step.value * step.value).abs(),
        },
    }
}

fn s_stage(phi: &Coframe, e: &FrameSection, t: &QuotientTower, target: Option<&DVector<f64>>) -> (MinStep, StageCheck) {
    let m = e.level;
    let base = t.blocks(m, m, &e.vectors);
    let p = base.ncols() * t.d(m - 1);
    let eval = |z: &DVector<f64>| {
        s_map(phi, &FrameSection { level: m, modulus: m - 1, vectors: shift(t, &base, m - 1, z) }, t).unwrap()
    };
    let f = |z: &DVector<f64>| eval(z).norm_squared();
    match target {
        None => {
            let step = min_s(phi, e, t).unwrap();
            let grid = grid_minimize(&f, p, None);
            (step.clone(), compare("min_s", &step, grid))
        }
        Some(target) => {
            let step = min_s_constrained(phi, e, Some(target), t).unwrap();
            let tr0 = eval(&DVector::zeros(p)).trace();
            let tm = DMatrix::from_fn(tr0.len(), p, |i, q| eval(&DVector::from_fn(p, |k, _| if k == q { 1.0 } else { 0.0 })).trace()[i] - tr0[i]);
            let rhs = target - &tr0;
            let grid = grid_minimize(&f, p, Some((&tm, &rhs)));
            (step.clone(), compare("constrained_w", &step, grid))
        }
    }
}

fn a_stage(phi: &Coframe, e: &FrameSection, t: &QuotientTower) -> (MinStep, StageCheck) {
    let k = phi.level;
    let m = e.level;
    let base = t.blocks(k, m, &e.vectors);
    let p = base.ncols() * t.d(k - 1);
    let f = |z: &DVector<f64>| {
        a_map(phi, &FrameSection { level: m, modulus: k - 1, vectors: shift(t, &base, k - 1, z) }, t).unwrap().norm_squared()
    };
    let step = min_a(phi, e, t).unwrap();
    let grid = grid_minimize(&f, p, None);
    (step.clone(), compare("min_a", &step, grid))
}

/// Replays the induction stage by stage, checking each minimizer.
fn replay(t: &QuotientTower) -> (Vec<StageCheck>, GradedComplement) {
    let r = t.step();
    let mut checks = Vec::new();
    let mut frames: Vec<Option<FrameSection>> = vec![None; r + 1];
    let mut coframes: Vec<Option<Coframe>> = vec![None; r + 1];
    coframes[r] = Some(lift_coframe(r, &[], t).unwrap());
    frames[r] = Some(FrameSection::canonical(r, t));
    for m in (2..r).rev() {
        let phi = coframes[m + 1].clone().unwrap();
        for j in m + 2..=r {
            let (step, chk) = a_stage(&phi, frames[j].as_ref().unwrap(), t);
            checks.push(chk);
            frames[j] = Some(step.frame);
        }
        let (step, chk) = s_stage(&phi, frames[m + 1].as_ref().unwrap(), t, None);
        checks.push(chk);
        frames[m + 1] = Some(step.frame);
        let higher: Vec<&FrameSection> = frames[m + 1..=r].iter().map(|f| f.as_ref().unwrap()).collect();
        coframes[m] = Some(lift_coframe(m, &higher, t).unwrap());
        frames[m] = Some(FrameSection::canonical(m, t));
    }
    let phi2 = coframes[2].clone().unwrap();
    for j in 3..=r {
        let (step, chk) = a_stage(&phi2, frames[j].as_ref().unwrap(), t);
        checks.push(chk);
        frames[j] = Some(step.frame);
    }
    let upper_cof: Vec<Coframe> = coframes[3..].iter().map(|c| c.clone().unwrap()).collect();
    let upper: Vec<FrameSection> = frames[3..].iter().map(|f| f.clone().unwrap()).collect();
    let rv = r_vector(&upper_cof, &upper, t).unwrap();
    let (step, chk) = s_stage(&phi2, frames[2].as_ref().unwrap(), t, Some(&(-rv)));
    checks.push(chk);
    let mut bases = vec![step.frame.vectors];
    bases.extend(upper.into_iter().map(|f| f.vectors));
    let complement = GradedComplement::from_subspaces(t, &bases, srcomplement::complement::Provenance::MinimalRigid).unwrap();
    (checks, complement)
}

fn criterion_3() -> bool {
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut steps = [0usize; 5];
    let mut stages = 0;
    for case in 0..50 {
        let (name, spec) = random_structure(&mut rng, TOL);
        let t = tower(&spec);
        steps[t.step().min(4)] += 1;
        let (checks, replayed) = replay(&t);
        let run = minimal_rigid_complement(&t, Variant::MinimalRigid).unwrap();
        let drift = replayed.max_angle(&run.complement, TOL);
        c.check(&format!("case {case} ({name}) replay equals driver"), drift <= 1e-9, format!("angle {drift:.3e}"));
        for chk in checks {
            stages += 1;
            c.check(
                &format!("case {case} ({name}) {}", chk.kind),
                chk.param_gap <= 1e-3 && chk.value_gap <= 1e-6,
                format!("param gap {:.3e}, squared-objective gap {:.3e}", chk.param_gap, chk.value_gap),
            );
        }
    }
    let covered = steps[2] > 0 && steps[3] > 0 && steps[4] > 0;
    c.check("steps 2, 3 and 4 all sampled", covered, format!("step counts 2:{} 3:{} 4:{}", steps[2], steps[3], steps[4]));
    c.report(3, &format!("minimizers match nested grid search on 50 random structures, {stages} stages (params 1e-3, squared objective 1e-6)"))
}

fn test_structures() -> Vec<(String, StructureSpec)> {
    let mut out: Vec<(String, StructureSpec)> = [
        ("heisenberg", catalog::heisenberg()),
        ("example", catalog::deformed_cartan()),
        ("cartan", catalog::cartan()),
        ("engel", catalog::engel()),
        ("h5", catalog::h5()),
        ("quaternionic", catalog::quaternionic()),
        ("free-rank2-step4", catalog::free_rank2_step4_quotient()),
        ("filiform-5", catalog::filiform(5)),
    ]
    .into_iter()
    .map(|(n, s)| (n.to_string(), s))
    .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for i in 0..5 {
        let (name, spec) = random_structure(&mut rng, TOL);
        out.push((format!("random-{i}-{name}"), spec));
    }
    out.retain(|(_, s)| check_semi_j_nondegenerate(&tower(s), 0, TOL).map(|r| r.semi_j_nondegenerate).unwrap_or(false));
    out
}

fn criterion_4() -> bool {
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for (name, spec) in test_structures() {
        let t = tower(&spec);
        let n = spec.dim();
        let d1 = spec.horizontal_rank();
        let run = minimal_rigid_complement(&t, Variant::MinimalRigid).unwrap();
        let popp = popp_volume(&t);
        let (mut filt, mut gram, mut jeq, mut sa, mut comp, mut pv): (f64, f64, f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..20 {
            let o = random_orthogonal(&mut rng, d1);
            let mut p = DMatrix::identity(n, n);
            p.view_mut((0, 0), (d1, d1)).copy_from(&o);
            let moved = spec.change_frame(&p, TOL).unwrap();
            let t2 = tower(&moved);
            for m in 1..=t.step() {
                let mapped = orthonormalize(&(&p * t2.filtration().space(m).basis()), TOL);
                filt = filt.max(mapped.max_angle(t.filtration().space(m)));
                let l = t.level(m);
                let l2 = t2.level(m);
                let mm = l.q.transpose() * &p * &l2.q;
                gram = gram.max((&l2.gram - mm.transpose() * &l.gram * &mm).amax());
            }
            // naturality of 𝒮 and 𝒜: entries rotate by Oᵀ
            for m in 2..=t.step() {
                let phi = run.coframe(m);
                let phi2 = Coframe { level: m, rows: &phi.rows * &p };
                let e = run.frame(m);
                let e2 = FrameSection { vectors: p.clone().try_inverse().unwrap() * &e.vectors, ..e.clone() };
                let s1 = s_map(phi, e, &t).unwrap().map_entries(&o.transpose());
                sa = sa.max((&s_map(&phi2, &e2, &t2).unwrap() - &s1).max_abs());
                for j in m + 1..=t.step() {
                    let ej = run.frame(j);
                    let ej2 = FrameSection { vectors: p.clone().try_inverse().unwrap() * &ej.vectors, ..ej.clone() };
                    let a1 = a_map(phi, ej, &t).unwrap().map_entries(&o.transpose());
                    sa = sa.max((&a_map(&phi2, &ej2, &t2).unwrap() - &a1).max_abs());
                }
                // coframe rotation: 𝒮(fφ, E fᵀ) = f 𝒮 fᵀ and Ĵ_{fφ}(fZ) = f Ĵ_φ(Z) fᵀ
                let f = random_orthogonal(&mut rng, phi.len());
                let ef = FrameSection { vectors: &e.vectors * f.transpose(), ..e.clone() };
                let lhs = s_map(&phi.rotate(&f), &ef, &t).unwrap();
                sa = sa.max((&lhs - &s_map(phi, e, &t).unwrap().conjugate(&f, &f)).max_abs());
                let dp = t.d(m - 1);
                let z: Vec<DVector<f64>> = (0..phi.len()).map(|_| DVector::from_fn(dp, |i, _| ((i * 7 + 3) % 5) as f64 / 5.0 - 0.4)).collect();
                let fz: Vec<DVector<f64>> = (0..phi.len()).map(|i| (0..phi.len()).fold(DVector::zeros(dp), |acc, k| acc + &z[k] * f[(i, k)])).collect();
                let lhs = jhat(&phi.rotate(&f), &fz, &t).unwrap();
                let rhs = jhat(phi, &z, &t).unwrap().conjugate(&f, &f);
                jeq = jeq.max((&lhs - &rhs).max_abs());
                // the verdict data are frame independent
                let sv1 = assemble_jhat(&Coframe::canonical(m, &t), &t).unwrap().matrix().clone().singular_values();
                let sv2 = assemble_jhat(&Coframe::canonical(m, &t2), &t2).unwrap().matrix().clone().singular_values();
                let mut a: Vec<f64> = sv1.iter().copied().collect();
                let mut b: Vec<f64> = sv2.iter().copied().collect();
                a.sort_by(f64::total_cmp);
                b.sort_by(f64::total_cmp);
                jeq = jeq.max(a.iter().zip(&b).fold(0.0, |s: f64, (x, y)| s.max((x - y).abs())));
            }
            let run2 = minimal_rigid_complement(&t2, Variant::MinimalRigid).unwrap();
            for m in 2..=t.step() {
                comp = comp.max(angle(&(&p * run2.complement.frame(m)), run.complement.frame(m)));
            }
            pv = pv.max((popp_volume(&t2) - popp).abs());
        }
        c.close(&format!("{name}: filtration subspaces"), filt, 0.0, 1e-9);
        c.close(&format!("{name}: quotient Grams"), gram, 0.0, 1e-9);
        c.close(&format!("{name}: J-hat equivariance"), jeq, 0.0, 1e-9);
        c.close(&format!("{name}: S/A equivariance"), sa, 0.0, 1e-9);
        c.close(&format!("{name}: complement invariance"), comp, 0.0, 1e-8);
        c.close(&format!("{name}: Popp density"), pv, 0.0, 1e-9);
    }
    c.report(4, "naturality under 20 orthogonal horizontal reframings per structure (1e-9; complements 1e-8)")
}

fn criterion_5() -> bool {
    let mut c = Checks::new();
    let mut all = test_structures();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..30 {
        let (name, spec) = random_structure(&mut rng, TOL);
        all.push((format!("random-{i}-{name}"), spec));
    }
    for (name, spec) in all {
        let t = tower(&spec);
        let run = minimal_rigid_complement(&t, Variant::MinimalRigid).unwrap();
        c.close(&format!("{name}: V-rigid residual"), verify_v_rigid(&run.complement, &t), 0.0, 1e-9);
        let props = connection_and_torsion(&run.complement, &t).unwrap().properties(TOL);
        c.check(
            &format!("{name}: torsion orthogonality and symmetry"),
            props.all_hold && props.same_level_orthogonality <= 1e-9 && props.cross_level_symmetry <= 1e-9,
            format!("{props:?}"),
        );
        let vn = solve_v_normal(&t).unwrap();
        if let Some(vc) = vn.complement {
            c.close(&format!("{name}: V-normal equals minimal"), vc.max_angle(&run.complement, TOL), 0.0, 1e-8);
        }
    }
    c.report(5, "output contract on every nondegenerate test structure (1e-9; angles 1e-8)")
}

fn degenerate_pool(rng: &mut ChaCha8Rng) -> Vec<(String, StructureSpec)> {
    let templates: Vec<(&str, StructureSpec)> = vec![
        ("degenerate-rank4", catalog::degenerate_rank4()),
        ("degenerate-level3", catalog::degenerate_level3()),
        ("free-step2-rank3", catalog::free_step2_rank3()),
        (
            "heisenberg-x-line",
            StructureSpec::builder(["X1", "X2", "Y", "T"], 3).bracket(0, 1, &[(3, 1.0)]).unwrap().build(TOL).unwrap(),
        ),
    ];
    let mut out = Vec::new();
    for round in 0..5 {
        for (name, spec) in &templates {
            let n = spec.dim();
            let d1 = spec.horizontal_rank();
            let mut p = DMatrix::identity(n, n);
            p.view_mut((0, 0), (d1, d1)).copy_from(&random_orthogonal(rng, d1));
            if n > d1 {
                let c = random_orthogonal(rng, n - d1) * 1.5;
                p.view_mut((d1, d1), (n - d1, n - d1)).copy_from(&c);
                p.view_mut((0, d1), (d1, n - d1)).copy_from(&DMatrix::from_fn(d1, n - d1, |i, j| ((i + 2 * j + round) % 3) as f64 * 0.3 - 0.3));
            }
            out.push((format!("{name}-frame{round}"), spec.change_frame(&p, TOL).unwrap()));
        }
    }
    out
}

fn criterion_6() -> bool {
    let mut c = Checks::new();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for (name, spec) in degenerate_pool(&mut rng) {
        let t = tower(&spec);
        let report = check_semi_j_nondegenerate(&t, 0, TOL).unwrap();
        let Some((level, kernel)) = report.first_failure() else {
            c.check(&format!("{name}: detected as degenerate"), false, "no failing level");
            continue;
        };
        let out = run_text(Command::Complement, &write_structure(&spec, &[]), &Options::default());
        c.check(
            &format!("{name}: exit 2 naming level {level}"),
            out.code == 2 && out.stderr.contains(&format!("level {level} ")),
            format!("exit {}, stderr {:?}", out.code, out.stderr.trim()),
        );
        let probed = s_map_linear_part(&Coframe::canonical(level, &t), &FrameSection::canonical(level, &t), &t).unwrap();
        let independent = kernel_dim_by_elimination(probed.matrix(), TOL);
        c.check(&format!("{name}: kernel dimension"), independent == kernel, format!("report {kernel}, elimination {independent}"));
    }
    let bin = run_file(Command::Complement, &structures_dir().join("degenerate_level3.sr"), &Options::default());
    c.check("bundled degenerate file", bin.code == 2 && bin.stderr.contains("level 3 "), format!("{:?}", bin.stderr.trim()));
    c.report(6, "degeneracy handling on 20 reframed degenerate structures")
}

fn main() -> ExitCode {
    let started = std::time::Instant::now();
    let results = [criterion_1(), criterion_2(), criterion_3(), criterion_4(), criterion_5(), criterion_6()];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed in {:.2}s", results.len(), started.elapsed().as_secs_f64());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
