//! Entropy functionals in the convention `H(mu) = int mu log mu`, i.e. minus
//! the differential entropy. Estimators that naturally produce differential
//! entropy are negated before returning.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::measures::{GridDensity, ParticleEnsemble};
use crate::{Error, Result};

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Density floor applied before logarithms in [`grid_fisher`].
pub const FISHER_FLOOR: f64 = 1e-300;

/// Magnitude of the jitter used to separate coincident particles.
pub const DUPLICATE_JITTER: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntropyEstimate {
    pub value: f64,
    pub m_used: usize,
}

/// Volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    let mut v = [1.0, 2.0];
    for k in 2..=d {
        v[k % 2] *= 2.0 * std::f64::consts::PI / k as f64;
    }
    v[d % 2]
}

/// 1-NN Kozachenko-Leonenko estimate, duplicates jittered with seed 0.
pub fn knn_entropy(mu: &ParticleEnsemble) -> Result<EntropyEstimate> {
    knn_entropy_with_seed(mu, 0)
}

/// Returns `-(d/m sum log rho_i + log(m-1) + gamma + log V_d)` where `rho_i`
/// is the geodesic distance from particle `i` to its nearest neighbour.
/// Coincident particles are moved by a uniform jitter of size
/// [`DUPLICATE_JITTER`] drawn from `seed`.
pub fn knn_entropy_with_seed(mu: &ParticleEnsemble, seed: u64) -> Result<EntropyEstimate> {
    let m = mu.len();
    if m < 2 {
        return Err(Error::invalid(format!("1-NN entropy needs at least 2 particles, got {m}")));
    }
    let d = mu.dim();
    let mut nn = nearest_sq_distances(mu);
    if nn.contains(&0.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pos = mu.positions().to_vec();
        let mut attempts = 0;
        while nn.contains(&0.0) {
            attempts += 1;
            if attempts > 8 {
                return Err(Error::invalid("could not separate coincident particles"));
            }
            let scale = DUPLICATE_JITTER * (1.0 + pos.iter().fold(0.0f64, |a, v| a.max(v.abs())));
            for (i, r) in nn.iter().enumerate() {
                if *r == 0.0 {
                    for v in &mut pos[i * d..(i + 1) * d] {
                        *v += scale * rng.random_range(-1.0..1.0);
                    }
                }
            }
            let jittered = ParticleEnsemble::new(*mu.domain(), pos.clone())?;
            pos = jittered.positions().to_vec();
            nn = nearest_sq_distances(&jittered);
        }
    }
    let mean_log_rho = nn.iter().map(|r| 0.5 * r.ln()).sum::<f64>() / m as f64;
    let h_diff = d as f64 * mean_log_rho + ((m - 1) as f64).ln() + EULER_GAMMA + unit_ball_volume(d).ln();
    Ok(EntropyEstimate {
        value: -h_diff,
        m_used: m,
    })
}

/// Squared geodesic distance from each particle to its nearest neighbour.
fn nearest_sq_distances(mu: &ParticleEnsemble) -> Vec<f64> {
    let dom = mu.domain();
    let m = mu.len();
    (0..m)
        .into_par_iter()
        .map(|i| {
            let xi = mu.position(i);
            (0..m)
                .filter(|&j| j != i)
                .map(|j| dom.sq_dist(xi, mu.position(j)))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// `sum mass log(mass / cell_volume)` with `0 log 0 = 0`.
pub fn grid_entropy(p: &GridDensity) -> f64 {
    let vol = p.cell_volume();
    p.values()
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * (w / vol).ln())
        .sum()
}

/// Relative entropy `sum p log(p/q)` between two grids.
///
/// Summed in the Bregman form `p log(p/q) - p + q`, whose terms are
/// individually nonnegative.
pub fn grid_kl(p: &GridDensity, q: &GridDensity) -> Result<f64> {
    check_same_grid(p, q)?;
    let mut total = 0.0;
    for (cell, (&a, &b)) in p.values().iter().zip(q.values()).enumerate() {
        if a > 0.0 {
            if b <= 0.0 {
                return Err(Error::AbsoluteContinuity { cell });
            }
            total += (a * (a / b).ln() - a + b).max(0.0);
        } else {
            total += b;
        }
    }
    Ok(total)
}

/// Relative Fisher information `sum p |grad log(p/q)|^2` with centered
/// periodic differences. Both densities are floored at [`FISHER_FLOOR`].
pub fn grid_fisher(p: &GridDensity, q: &GridDensity) -> Result<f64> {
    check_same_grid(p, q)?;
    let log_ratio: Vec<f64> = p
        .values()
        .iter()
        .zip(q.values())
        .map(|(&a, &b)| a.max(FISHER_FLOOR).ln() - b.max(FISHER_FLOOR).ln())
        .collect();
    let d = p.dim();
    let inv_2h = 0.5 / p.cell_width();
    Ok((0..p.len())
        .map(|c| {
            let sq: f64 = (0..d)
                .map(|axis| {
                    let g = (log_ratio[p.neighbor(c, axis, true)] - log_ratio[p.neighbor(c, axis, false)]) * inv_2h;
                    g * g
                })
                .sum();
            p.values()[c] * sq
        })
        .sum())
}

fn check_same_grid(p: &GridDensity, q: &GridDensity) -> Result<()> {
    if !p.same_grid(q) {
        return Err(Error::DomainMismatch("grids differ in domain or resolution".into()));
    }
    Ok(())
}
