//! Exact 2-Wasserstein distance between equal-size, equal-weight ensembles.
//!
//! With uniform weights the optimal plan is a permutation (Birkhoff), so W2
//! reduces to a linear assignment problem on squared geodesic costs. Solved
//! with the O(m^3) shortest augmenting path method with dual potentials.

use crate::measures::ParticleEnsemble;
use crate::{Error, Result};

/// Largest ensemble accepted by [`w2_exact`].
pub const MAX_ASSIGNMENT_SIZE: usize = 512;

/// Source particle `i` is sent to target particle `permutation[i]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransportPlan {
    permutation: Vec<usize>,
}

impl TransportPlan {
    pub fn new(permutation: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; permutation.len()];
        for &j in &permutation {
            if j >= seen.len() || std::mem::replace(&mut seen[j], true) {
                return Err(Error::invalid("transport plan is not a bijection"));
            }
        }
        Ok(Self { permutation })
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    /// Mean squared geodesic displacement of the plan.
    pub fn cost(&self, a: &ParticleEnsemble, b: &ParticleEnsemble) -> f64 {
        let dom = a.domain();
        self.permutation
            .iter()
            .enumerate()
            .map(|(i, &j)| dom.sq_dist(a.position(i), b.position(j)))
            .sum::<f64>()
            / self.permutation.len() as f64
    }
}

/// Returns `(W2, plan)`.
pub fn w2_exact(a: &ParticleEnsemble, b: &ParticleEnsemble) -> Result<(f64, TransportPlan)> {
    if a.domain() != b.domain() {
        return Err(Error::DomainMismatch(format!(
            "ensembles on {:?} and {:?}",
            a.domain(),
            b.domain()
        )));
    }
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let m = a.len();
    if m > MAX_ASSIGNMENT_SIZE {
        return Err(Error::Capacity {
            what: "exact assignment",
            got: m,
            limit: MAX_ASSIGNMENT_SIZE,
        });
    }
    let dom = a.domain();
    let cost: Vec<f64> = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| dom.sq_dist(a.position(i), b.position(j)))
        .collect();
    let plan = TransportPlan {
        permutation: assign(&cost, m),
    };
    let w2 = plan.cost(a, b).max(0.0).sqrt();
    Ok((w2, plan))
}

/// Minimum-cost perfect matching of a dense `n x n` row-major cost matrix.
/// Returns `row -> column`.
pub fn assign(cost: &[f64], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n);
    // 1-based arrays with a virtual column 0, as in the classic formulation
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut j0 = 0;
        minv.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut result = vec![0; n];
    for j in 1..=n {
        result[owner[j] - 1] = j - 1;
    }
    result
}
