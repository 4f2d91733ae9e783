#![allow(dead_code)]

use std::sync::OnceLock;

use efrlab::flow::Discretization;
use efrlab::mesh::{generate_channel_cylinder, Mesh};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The coarse channel-cylinder mesh used throughout the acceptance runs.
pub fn coarse_mesh() -> &'static Mesh {
    static MESH: OnceLock<Mesh> = OnceLock::new();
    MESH.get_or_init(|| generate_channel_cylinder(36, 7, 16).expect("coarse mesh"))
}

pub fn coarse() -> &'static Discretization {
    static DISC: OnceLock<Discretization> = OnceLock::new();
    DISC.get_or_init(|| Discretization::new(coarse_mesh()))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Random velocity vanishing on the Dirichlet boundary.
pub fn random_homogeneous(d: &Discretization, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v = random_vec(rng, d.n_u());
    for &j in d.space.dirichlet_vel_dofs() {
        v[j] = 0.0;
    }
    v
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if den == 0.0 {
        num
    } else {
        num / den
    }
}
