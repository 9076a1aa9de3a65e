//! Quantitative checks on trajectories: exponential rate fits, the entropy
//! sandwich, Talagrand-type particle checks, paired seed comparisons and
//! particle/grid agreement. Results serialize to JSON lines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::entropy::grid_kl;
use crate::functionals::{KernelMmdObjective, Measure, Objective};
use crate::measures::{Domain, GridDensity, ParticleEnsemble};
use crate::oracle::{free_energy_grid, gibbs_grid, Frame};
use crate::transport::w2_exact;
use crate::{Error, Result};

/// Band `[lo, hi] * g0` of gaps used by [`fit_rate_auto`].
pub const RATE_WINDOW_BAND: (f64, f64) = (1e-6, 1e-1);

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateFit {
    /// `-slope` of `log gap` against `t`.
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub points: usize,
}

/// Least-squares line through `(t, log gap)` over the whole series.
pub fn fit_exponential_rate(series: &[(f64, f64)]) -> Result<RateFit> {
    if series.len() < 5 {
        return Err(Error::invalid(format!(
            "rate fit needs at least 5 points, got {}",
            series.len()
        )));
    }
    if let Some(&(t, gap)) = series.iter().find(|(_, g)| !(*g > 0.0)) {
        return Err(Error::NonPositiveGap { t, gap });
    }
    let n = series.len() as f64;
    let xs: Vec<f64> = series.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = series.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("rate fit needs distinct times"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - sse / syy).clamp(0.0, 1.0) } else { 0.0 };
    Ok(RateFit {
        rate: -slope,
        intercept,
        r_squared,
        window: (xs[0], xs[xs.len() - 1]),
        points: series.len(),
    })
}

/// Fits over the largest contiguous run of points whose gap lies in
/// `[1e-6, 1e-1] * g0`, `g0` being the first gap of the series.
pub fn fit_rate_auto(series: &[(f64, f64)]) -> Result<RateFit> {
    let window = auto_window(series)?;
    fit_exponential_rate(&series[window.0..window.1])
}

/// Index range `[start, end)` selected by [`fit_rate_auto`].
pub fn auto_window(series: &[(f64, f64)]) -> Result<(usize, usize)> {
    let g0 = series
        .first()
        .map(|p| p.1)
        .ok_or_else(|| Error::invalid("empty series"))?;
    if !(g0 > 0.0) {
        return Err(Error::NonPositiveGap {
            t: series[0].0,
            gap: g0,
        });
    }
    let (lo, hi) = (RATE_WINDOW_BAND.0 * g0, RATE_WINDOW_BAND.1 * g0);
    let inside = |g: f64| g > 0.0 && g >= lo && g <= hi;
    let mut best = (0, 0);
    let mut start = None;
    for (i, &(_, g)) in series.iter().enumerate() {
        match (inside(g), start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                if i - s > best.1 - best.0 {
                    best = (s, i);
                }
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        if series.len() - s > best.1 - best.0 {
            best = (s, series.len());
        }
    }
    if best.1 - best.0 < 5 {
        return Err(Error::invalid(format!(
            "automatic window holds {} points, need at least 5",
            best.1 - best.0
        )));
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SandwichReport {
    /// `tau H(mu | mu*)`
    pub lower: f64,
    /// `F(mu) - F(mu*)`
    pub mid: f64,
    /// `tau H(mu | nu)` with `nu` the Gibbs measure of `V[mu]`
    pub upper: f64,
    pub slack_lower: f64,
    pub slack_upper: f64,
}

impl SandwichReport {
    pub fn holds(&self, tolerance: f64) -> bool {
        self.slack_lower >= -tolerance && self.slack_upper >= -tolerance
    }
}

pub fn sandwich_check(mu: &GridDensity, obj: &dyn Objective, tau: f64, mu_star: &GridDensity) -> Result<SandwichReport> {
    let f_star = free_energy_grid(obj, mu_star, tau)?;
    sandwich_check_with(mu, obj, tau, mu_star, f_star)
}

/// As [`sandwich_check`] with `F(mu*)` precomputed.
pub fn sandwich_check_with(
    mu: &GridDensity,
    obj: &dyn Objective,
    tau: f64,
    mu_star: &GridDensity,
    f_star: f64,
) -> Result<SandwichReport> {
    let nu = gibbs_grid(obj, mu, tau)?;
    let lower = tau * grid_kl(mu, mu_star)?;
    let mid = free_energy_grid(obj, mu, tau)? - f_star;
    let upper = tau * grid_kl(mu, &nu)?;
    Ok(SandwichReport {
        lower,
        mid,
        upper,
        slack_lower: mid - lower,
        slack_upper: upper - mid,
    })
}

/// Discrete energy balance at interior frames: the centered difference
/// `(F_{k+1} - F_{k-1}) / (t_{k+1} - t_{k-1})` against `-tau^2 I_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyBalance {
    pub t: f64,
    pub df_dt: f64,
    pub dissipation: f64,
    pub rel_error: f64,
}

pub fn energy_balance(frames: &[Frame]) -> Vec<EnergyBalance> {
    frames
        .windows(3)
        .map(|w| {
            let (a, mid, b) = (&w[0], &w[1], &w[2]);
            let df_dt = (b.f - a.f) / (b.t - a.t);
            let dissipation = -mid.tau * mid.tau * mid.fisher;
            EnergyBalance {
                t: mid.t,
                df_dt,
                dissipation,
                rel_error: (df_dt - dissipation).abs() / dissipation.abs(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TalagrandReport {
    pub w2sq: f64,
    /// `2 H / rho`
    pub bound: f64,
    /// Three bootstrap standard errors of `w2sq`.
    pub margin: f64,
    pub holds: bool,
}

/// Compares `W2^2(mu, samples of mu*)` with `2 kl / rho`. The margin is three
/// times the standard error of `w2sq` over `resamples` paired bootstrap
/// resamplings drawn from `seed`.
pub fn talagrand_particle_check(
    mu: &ParticleEnsemble,
    mu_star_samples: &ParticleEnsemble,
    rho: f64,
    kl: f64,
    resamples: usize,
    seed: u64,
) -> Result<TalagrandReport> {
    if !(rho > 0.0) {
        return Err(Error::invalid(format!("LSI constant must be positive, got {rho}")));
    }
    if !(kl >= 0.0) {
        return Err(Error::invalid(format!("relative entropy must be nonnegative, got {kl}")));
    }
    let (w2, _) = w2_exact(mu, mu_star_samples)?;
    let w2sq = w2 * w2;
    let m = mu.len();
    let d = mu.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut a = Vec::with_capacity(m * d);
        let mut b = Vec::with_capacity(m * d);
        for _ in 0..m {
            a.extend_from_slice(mu.position(rng.random_range(0..m)));
            b.extend_from_slice(mu_star_samples.position(rng.random_range(0..m)));
        }
        let ea = ParticleEnsemble::new(*mu.domain(), a)?;
        let eb = ParticleEnsemble::new(*mu.domain(), b)?;
        let (w, _) = w2_exact(&ea, &eb)?;
        draws.push(w * w);
    }
    let margin = 3.0 * std_dev(&draws);
    let bound = 2.0 * kl / rho;
    Ok(TalagrandReport {
        w2sq,
        bound,
        margin,
        holds: w2sq <= bound + margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedComparison {
    pub wins_a: usize,
    pub wins_b: usize,
    pub ties: usize,
    pub median_a: f64,
    pub median_b: f64,
}

/// Per-pair comparison of a lower-is-better metric (e.g. final `G`).
pub fn paired_seed_comparison(a: &[f64], b: &[f64]) -> Result<PairedComparison> {
    if a.len() != b.len() {
        return Err(Error::SizeMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::invalid("no pairs to compare"));
    }
    let wins_a = a.iter().zip(b).filter(|(x, y)| x < y).count();
    let wins_b = a.iter().zip(b).filter(|(x, y)| y < x).count();
    Ok(PairedComparison {
        wins_a,
        wins_b,
        ties: a.len() - wins_a - wins_b,
        median_a: median(a),
        median_b: median(b),
    })
}

/// Squared MMD between an ensemble and a grid measure under the objective's
/// kernel.
pub fn particle_grid_discrepancy(mu: &ParticleEnsemble, p: &GridDensity, obj: &KernelMmdObjective) -> Result<f64> {
    let a = obj.embedding(Measure::Particles(mu))?;
    let b = obj.embedding(Measure::Grid(p))?;
    Ok(a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlateauCheck {
    /// Largest `(mean_k - min_{j<k} mean_j) / se_k` over checkpoints.
    pub worst_ratio: f64,
    pub worst_index: usize,
    pub pass: bool,
}

/// A seed-averaged curve counts as decreasing to a plateau when no point
/// exceeds the running minimum of its predecessors by more than
/// `factor * se_k`.
pub fn decreasing_to_plateau(means: &[f64], ses: &[f64], factor: f64) -> Result<PlateauCheck> {
    if means.len() != ses.len() {
        return Err(Error::SizeMismatch {
            expected: means.len(),
            got: ses.len(),
        });
    }
    let mut running = f64::INFINITY;
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut worst_index = 0;
    let mut pass = true;
    for (k, (&m, &se)) in means.iter().zip(ses).enumerate() {
        if k > 0 {
            let excess = m - running;
            if excess > factor * se {
                pass = false;
            }
            let ratio = if se > 0.0 {
                excess / se
            } else if excess > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst_index = k;
            }
        }
        running = running.min(m);
    }
    Ok(PlateauCheck {
        worst_ratio: worst_ratio.max(0.0),
        worst_index,
        pass,
    })
}

/// Affine envelope `-H <= c1 F + c2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyEnvelope {
    pub c1: f64,
    pub c2: f64,
}

impl EntropyEnvelope {
    /// On a torus of volume `|X|`, `-H <= log |X|` for every density, so
    /// `c1 = 0` and `c2 = d log(period)` work for any objective.
    pub fn torus(domain: &Domain) -> Result<Self> {
        let vol = domain
            .volume()
            .ok_or_else(|| Error::DomainMismatch("envelope needs a bounded domain".into()))?;
        Ok(Self { c1: 0.0, c2: vol.ln() })
    }

    pub fn slack(&self, h: f64, f: f64) -> f64 {
        self.c1 * f + self.c2 + h
    }
}

/// Right-hand side of `-H(mu) <= M2(mu)/sigma^2 + 1 + d log(2 pi sigma^2)`.
pub fn entropy_moment_bound(m2: f64, sigma: f64, d: usize) -> f64 {
    m2 / (sigma * sigma) + 1.0 + d as f64 * (2.0 * std::f64::consts::PI * sigma * sigma).ln()
}

/// One JSON-lines diagnostic record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub check: String,
    pub inputs: serde_json::Value,
    pub values: serde_json::Value,
    pub pass: bool,
}

impl Report {
    pub fn new(check: impl Into<String>, inputs: serde_json::Value, values: serde_json::Value, pass: bool) -> Self {
        Self {
            check: check.into(),
            inputs,
            values,
            pass,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (`n - 1` denominator); 0 for fewer than 2 values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn std_error(xs: &[f64]) -> f64 {
    std_dev(xs) / (xs.len() as f64).sqrt()
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
