//! Random matrix generators used by the test suites. Not part of the
//! public surface; exposed so the integration tests can reuse them.
#![doc(hidden)]

use crate::ground_fields::{GroundField, Quat};
use crate::matk::MatK;
use rand::Rng;

pub fn rand_quat<R: Rng>(rng: &mut R, field: GroundField, scale: f64) -> Quat {
    let mut g = || rng.gen_range(-scale..scale);
    match field {
        GroundField::Real => Quat::real(g()),
        GroundField::Complex => Quat::new(g(), g(), 0.0, 0.0),
        GroundField::Quaternion => Quat::new(g(), g(), g(), g()),
    }
}

pub fn rand_matrix<R: Rng>(
    rng: &mut R,
    field: GroundField,
    rows: usize,
    cols: usize,
    scale: f64,
) -> MatK {
    let mut m = MatK::zeros(field, rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m.set(i, j, rand_quat(rng, field, scale));
        }
    }
    m
}

/// `A A* + εI`: hermitian and positive definite by construction.
pub fn rand_pd_hermitian<R: Rng>(rng: &mut R, field: GroundField, n: usize) -> MatK {
    let a = rand_matrix(rng, field, n, n, 1.0);
    a.matmul(&a.adjoint()).add(&MatK::identity(field, n).scale(0.05))
}

pub fn rand_antihermitian<R: Rng>(rng: &mut R, field: GroundField, n: usize, scale: f64) -> MatK {
    let a = rand_matrix(rng, field, n, n, scale);
    a.sub(&a.adjoint()).scale(0.5)
}

pub fn rand_symmetric<R: Rng>(rng: &mut R, field: GroundField, n: usize, scale: f64) -> MatK {
    let a = rand_matrix(rng, field, n, n, scale);
    a.add(&a.transpose()).scale(0.5)
}

pub fn rand_antisymmetric<R: Rng>(rng: &mut R, field: GroundField, n: usize, scale: f64) -> MatK {
    let a = rand_matrix(rng, field, n, n, scale);
    a.sub(&a.transpose()).scale(0.5)
}
