#![allow(dead_code)]

use std::f64::consts::PI;

use mfl_core::functionals::{KernelMmdObjective, MmdTarget};
use mfl_core::kernel::CosineSeriesKernel;
use mfl_core::{Domain, GridDensity, ParticleEnsemble};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn torus(d: usize) -> Domain {
    Domain::standard_torus(d).unwrap()
}

/// Equal mixture of von Mises bumps (concentration 4) at pi/2 and 3pi/2.
pub fn two_bump_grid(n: usize) -> GridDensity {
    GridDensity::from_density_fn(torus(1), n, |x| {
        (4.0 * (x[0] - PI / 2.0).cos()).exp() + (4.0 * (x[0] - 1.5 * PI).cos()).exp()
    })
    .unwrap()
}

pub fn kmmd_grid_target(target: GridDensity) -> KernelMmdObjective {
    KernelMmdObjective::new(CosineSeriesKernel::new(5), MmdTarget::Grid(target)).unwrap()
}

pub fn kmmd_atoms(target: ParticleEnsemble) -> KernelMmdObjective {
    KernelMmdObjective::new(CosineSeriesKernel::new(5), MmdTarget::Atoms(target)).unwrap()
}

pub fn random_ensemble(domain: Domain, m: usize, scale: f64, rng: &mut ChaCha8Rng) -> ParticleEnsemble {
    let d = domain.dim();
    let pos = (0..m * d)
        .map(|_| match domain.period() {
            Some(p) => rng.random_range(0.0..p),
            None => rng.random_range(-scale..scale),
        })
        .collect();
    ParticleEnsemble::new(domain, pos).unwrap()
}

/// Smooth positive random density from a few random Fourier modes.
pub fn random_smooth_grid(domain: Domain, n: usize, rng: &mut ChaCha8Rng) -> GridDensity {
    let d = domain.dim();
    let modes: Vec<(Vec<f64>, f64, f64)> = (0..4)
        .map(|_| {
            let k: Vec<f64> = (0..d).map(|_| rng.random_range(0..4) as f64).collect();
            (k, rng.random_range(-0.8..0.8), rng.random_range(0.0..2.0 * PI))
        })
        .collect();
    GridDensity::from_log_density_fn(domain, n, |x| {
        modes
            .iter()
            .map(|(k, a, ph)| a * (k.iter().zip(x).map(|(ki, xi)| ki * xi).sum::<f64>() + ph).cos())
            .sum()
    })
    .unwrap()
}
