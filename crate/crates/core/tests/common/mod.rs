//! Helpers shared by the integration tests.
//!
//! The ergotropy oracle never diagonalizes anything: it descends the energy
//! `tr(U rho U^dag H)` along the unitary orbit with a double-bracket flow,
//! stepping with exactly unitary Cayley transforms.

#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64 as C64;
use rand::Rng;

pub type M3 = Matrix3<C64>;

const MAX_FLOW_ITERATIONS: usize = 200_000;
const FLOW_RESTARTS: usize = 6;

pub fn energy(rho: &M3, h: &M3) -> f64 {
    (rho * h).trace().re
}

/// `(1 - A/2)^-1 (1 + A/2)`, unitary for anti-Hermitian `A`.
pub fn cayley(a: &M3) -> M3 {
    let half = a * C64::new(0.5, 0.0);
    let id = M3::identity();
    (id - half).try_inverse().expect("1 - A/2 is invertible for anti-Hermitian A") * (id + half)
}

fn frobenius(m: &M3) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Follows `rho -> U rho U^dag` with `U = cayley(eta [rho, H])`, which lowers
/// the energy for small `eta > 0`, until the commutator vanishes or no step
/// lowers the energy any further.
pub fn descend(mut rho: M3, h: &M3) -> f64 {
    let mut e = energy(&rho, h);
    let mut eta = 1.0 / (frobenius(h).powi(2) + 1e-300);
    for _ in 0..MAX_FLOW_ITERATIONS {
        let c = rho * h - h * rho;
        if frobenius(&c) < 1e-13 {
            break;
        }
        let u = cayley(&(c * C64::new(eta, 0.0)));
        let candidate = u * rho * u.adjoint();
        let ec = energy(&candidate, h);
        if ec < e {
            rho = candidate;
            e = ec;
            eta *= 1.5;
        } else {
            eta *= 0.5;
            if eta < 1e-30 {
                break;
            }
        }
    }
    e
}

pub fn random_anti_hermitian(rng: &mut impl Rng, scale: f64) -> M3 {
    let h = random_hermitian(rng);
    h * C64::new(0.0, scale)
}

pub fn random_hermitian(rng: &mut impl Rng) -> M3 {
    let g = M3::from_fn(|_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    (g + g.adjoint()) * C64::new(0.5, 0.0)
}

/// Full-rank random density matrix `G G^dag / tr(G G^dag)`.
pub fn random_density(rng: &mut impl Rng) -> M3 {
    let g = M3::from_fn(|_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let m = g * g.adjoint();
    let tr = m.trace();
    m / tr
}

pub fn random_pure(rng: &mut impl Rng) -> M3 {
    let v = nalgebra::Vector3::from_fn(|_, _| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    let v = v / C64::new(v.norm(), 0.0);
    v * v.adjoint()
}

/// Lowest energy on the unitary orbit of `rho`, best of several random starts.
pub fn passive_energy_by_flow(rho: &M3, h: &M3, rng: &mut impl Rng) -> f64 {
    let mut best = descend(*rho, h);
    for _ in 0..FLOW_RESTARTS {
        let u = cayley(&random_anti_hermitian(rng, 3.0));
        best = best.min(descend(u * rho * u.adjoint(), h));
    }
    best
}

/// Ergotropy from the orbit search.
pub fn ergotropy_by_flow(rho: &M3, h: &M3, rng: &mut impl Rng) -> f64 {
    energy(rho, h) - passive_energy_by_flow(rho, h, rng)
}

pub fn to_dynamic(m: &M3) -> DMatrix<C64> {
    DMatrix::from_fn(3, 3, |i, j| m[(i, j)])
}
