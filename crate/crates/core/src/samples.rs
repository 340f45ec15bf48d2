//! Seeded random orthogonal matrices, frame changes and structures.

use nalgebra::DMatrix;
use rand::Rng;

use crate::catalog;
use crate::jmaps::level_verdicts;
use crate::structure::{compute_filtration, quotient_tower, StructureSpec};

/// Orthogonal `d × d` matrix from the QR factorization of a random matrix,
/// with the signs of `R`'s diagonal absorbed.
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<f64> {
    loop {
        let m = DMatrix::<f64>::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let qr = m.qr();
        let r = qr.r();
        if (0..d).any(|i| r[(i, i)].abs() < 1e-3) {
            continue;
        }
        let mut q = qr.q();
        for j in 0..d {
            if r[(j, j)] < 0.0 {
                let neg = -q.column(j);
                q.set_column(j, &neg);
            }
        }
        return q;
    }
}

fn well_conditioned<R: Rng + ?Sized>(rng: &mut R, d: usize) -> DMatrix<f64> {
    let s = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(d, |_, _| rng.random_range(0.6..1.6)));
    random_orthogonal(rng, d) * s * random_orthogonal(rng, d)
}

/// `P = [[O, B], [0, C]]` with `O` orthogonal: an isometric change of the
/// horizontal frame together with an arbitrary change of the rest.
pub fn random_isometric_reframing<R: Rng + ?Sized>(rng: &mut R, spec: &StructureSpec) -> DMatrix<f64> {
    let o = random_orthogonal(rng, spec.horizontal_rank());
    reframing(rng, spec, o)
}

fn reframing<R: Rng + ?Sized>(rng: &mut R, spec: &StructureSpec, horizontal: DMatrix<f64>) -> DMatrix<f64> {
    let n = spec.dim();
    let d1 = spec.horizontal_rank();
    let mut p = DMatrix::zeros(n, n);
    p.view_mut((0, 0), (d1, d1)).copy_from(&horizontal);
    if n > d1 {
        let b = DMatrix::from_fn(d1, n - d1, |_, _| rng.random_range(-1.0..1.0));
        p.view_mut((0, d1), (d1, n - d1)).copy_from(&b);
        p.view_mut((d1, d1), (n - d1, n - d1)).copy_from(&well_conditioned(rng, n - d1));
    }
    p
}

/// A random semi-J-nondegenerate structure of dimension at most 7: a
/// catalog template in a random frame whose horizontal part is neither
/// orthonormal nor aligned with the template's.
pub fn random_structure<R: Rng + ?Sized>(rng: &mut R, tol: f64) -> (&'static str, StructureSpec) {
    for _ in 0..200 {
        let (name, template) = match rng.random_range(0..6) {
            0 => ("heisenberg", catalog::heisenberg()),
            1 => ("h5", catalog::h5()),
            2 => ("cartan-family", catalog::cartan_family(rng.random_range(-3.0..3.0))),
            3 => ("engel", catalog::engel()),
            4 => ("quaternionic", catalog::quaternionic()),
            _ => ("filiform-5", catalog::filiform(5)),
        };
        let a = well_conditioned(rng, template.horizontal_rank());
        let p = reframing(rng, &template, a);
        let Ok(spec) = template.change_frame(&p, tol) else { continue };
        let Ok(f) = compute_filtration(&spec, tol) else { continue };
        let Ok(tower) = quotient_tower(&spec, &f, tol) else { continue };
        if level_verdicts(&tower, tol).is_ok_and(|v| v.iter().all(|l| l.injective)) {
            return (name, spec);
        }
    }
    panic!("no nondegenerate structure found in 200 draws")
}
