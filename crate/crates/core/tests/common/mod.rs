#![allow(dead_code)]

use corrgeom::{OrbitPoint, OrthogonalMatrix, UnitRowMatrix};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(m: usize, k: usize, r: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(m, k, |_, _| r.sample(StandardNormal))
}

pub fn unit_vector(n: usize, r: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| r.sample::<f64, _>(StandardNormal)).normalize()
}

pub fn random_factor(m: usize, k: usize, r: &mut ChaCha8Rng) -> UnitRowMatrix {
    UnitRowMatrix::normalized(gaussian(m, k, r)).unwrap()
}

pub fn nearby(x: &UnitRowMatrix, eps: f64, r: &mut ChaCha8Rng) -> UnitRowMatrix {
    let (m, k) = x.shape();
    UnitRowMatrix::normalized(x.as_matrix() + gaussian(m, k, r) * eps).unwrap()
}

/// A random member of the orbit of a small perturbation of `x`.
pub fn nearby_orbit(x: &UnitRowMatrix, eps: f64, r: &mut ChaCha8Rng) -> OrbitPoint {
    let rot = OrthogonalMatrix::random(x.ncols(), r);
    OrbitPoint::new(nearby(x, eps, r).act(&rot))
}

pub fn orbit(x: UnitRowMatrix) -> OrbitPoint {
    OrbitPoint::new(x)
}
