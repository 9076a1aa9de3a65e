//! Noisy particle gradient descent (NPGD), temperature schedules and
//! trajectory runs.
//!
//! One step moves every particle against the first-variation gradient frozen
//! at the pre-step empirical measure, then adds `sqrt(2 eta tau) Z`:
//!
//! ```text
//! X_i <- X_i - eta grad V[mu_hat](X_i) + sqrt(2 eta tau) Z_i
//! ```
//!
//! Noise is counter-based: `Z_{i,j}` at step `k` depends only on
//! `(seed, k, key_i, j)`, so results do not depend on scheduling or on the
//! number of worker threads.

use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::knn_entropy_with_seed;
use crate::functionals::{Measure, Objective};
use crate::measures::{Domain, ParticleEnsemble};
use crate::{Error, Result};

/// Euclidean coordinates beyond this magnitude abort a run.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Temperature as a function of the step index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum TemperatureSchedule {
    Constant { tau: f64 },
    /// `alpha / log(t + t0)`, `t0 > 1`.
    Logarithmic { alpha: f64, t0: f64 },
    /// `c (t + 1)^(-beta)` for `t < cutoff`, zero afterwards.
    Polynomial { c: f64, beta: f64, cutoff: u64 },
}

impl TemperatureSchedule {
    pub fn constant(tau: f64) -> Self {
        TemperatureSchedule::Constant { tau }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            TemperatureSchedule::Constant { tau } => tau >= 0.0 && tau.is_finite(),
            TemperatureSchedule::Logarithmic { alpha, t0 } => alpha >= 0.0 && alpha.is_finite() && t0 > 1.0 && t0.is_finite(),
            TemperatureSchedule::Polynomial { c, beta, .. } => c >= 0.0 && c.is_finite() && beta >= 0.0 && beta.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid temperature schedule {self:?}")))
        }
    }

    pub fn eval(&self, t: u64) -> f64 {
        match *self {
            TemperatureSchedule::Polynomial { cutoff, .. } if t >= cutoff => 0.0,
            _ => self.eval_continuous(t as f64),
        }
    }

    /// Same formulas at real time `t`; the polynomial cutoff applies to `t`.
    pub fn eval_continuous(&self, t: f64) -> f64 {
        match *self {
            TemperatureSchedule::Constant { tau } => tau,
            TemperatureSchedule::Logarithmic { alpha, t0 } => alpha / (t + t0).ln(),
            TemperatureSchedule::Polynomial { c, beta, cutoff } => {
                if t >= cutoff as f64 {
                    0.0
                } else {
                    c * (t + 1.0).powf(-beta)
                }
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, TemperatureSchedule::Constant { .. })
    }
}

/// Counter-based standard Gaussian source.
///
/// `Z(step, key, j)` is read from ChaCha8 seeded by `seed`, stream `step`,
/// at word offset `4 (key d + j)`; each normal consumes two 64-bit words
/// (Box-Muller, cosine branch).
#[derive(Clone)]
pub struct NoiseSource {
    base: ChaCha8Rng,
    dim: usize,
}

impl NoiseSource {
    pub fn new(seed: u64, dim: usize) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
            dim,
        }
    }

    /// Fills `out` (length `d`) with the normals of particle `key` at `step`.
    pub fn fill(&self, step: u64, key: u64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        let mut rng = self.base.clone();
        rng.set_stream(step);
        rng.set_word_pos(4 * key as u128 * self.dim as u128);
        for z in out.iter_mut() {
            *z = box_muller(rng.next_u64(), rng.next_u64());
        }
    }

    pub fn normal(&self, step: u64, key: u64, coord: usize) -> f64 {
        let mut rng = self.base.clone();
        rng.set_stream(step);
        rng.set_word_pos(4 * (key as u128 * self.dim as u128 + coord as u128));
        box_muller(rng.next_u64(), rng.next_u64())
    }
}

fn box_muller(a: u64, b: u64) -> f64 {
    const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
    let u1 = ((a >> 11) + 1) as f64 * SCALE;
    let u2 = (b >> 11) as f64 * SCALE;
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// One NPGD step with noise keys equal to particle indices.
pub fn npgd_step(
    ens: &ParticleEnsemble,
    obj: &dyn Objective,
    eta: f64,
    tau: f64,
    step_index: u64,
    seed: u64,
) -> Result<ParticleEnsemble> {
    let noise = NoiseSource::new(seed, ens.dim());
    npgd_step_keyed(ens, obj, eta, tau, step_index, &noise, None)
}

/// One NPGD step; particle `i` draws its noise under key `keys[i]`
/// (default `i`).
pub fn npgd_step_keyed(
    ens: &ParticleEnsemble,
    obj: &dyn Objective,
    eta: f64,
    tau: f64,
    step_index: u64,
    noise: &NoiseSource,
    keys: Option<&[u64]>,
) -> Result<ParticleEnsemble> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::invalid(format!("step size must be positive, got {eta}")));
    }
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("temperature must be nonnegative, got {tau}")));
    }
    if let Some(k) = keys {
        if k.len() != ens.len() {
            return Err(Error::SizeMismatch {
                expected: ens.len(),
                got: k.len(),
            });
        }
    }
    let domain: Domain = *ens.domain();
    let d = ens.dim();
    let fv = obj.first_variation(Measure::Particles(ens))?;
    let scale = (2.0 * eta * tau).sqrt();
    let mut next = vec![0.0; ens.positions().len()];
    next.par_chunks_mut(d).enumerate().try_for_each(|(i, out)| {
        let x = ens.position(i);
        fv.grad(x, out);
        if out.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                step: step_index,
                particle: i,
            });
        }
        for (o, xi) in out.iter_mut().zip(x) {
            *o = xi - eta * *o;
        }
        if tau > 0.0 {
            let mut z = vec![0.0; d];
            noise.fill(step_index, keys.map_or(i as u64, |k| k[i]), &mut z);
            for (o, zi) in out.iter_mut().zip(&z) {
                *o += scale * zi;
            }
        }
        if out.iter().any(|v| !v.is_finite() || (!domain.is_torus() && v.abs() > DIVERGENCE_LIMIT)) {
            return Err(Error::Diverged {
                step: step_index,
                particle: i,
            });
        }
        domain.wrap_in_place(out);
        Ok(())
    })?;
    Ok(ParticleEnsemble::from_raw(domain, next))
}

/// Initial distribution of a run.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Uniform on the torus.
    Uniform,
    /// Isotropic centered Gaussian (wrapped on the torus).
    Gaussian { sigma: f64 },
    Ensemble(ParticleEnsemble),
}

impl Init {
    /// Draws `m` particles; random inits use stream `u64::MAX` of `seed`,
    /// disjoint from every noise stream.
    pub fn sample(&self, domain: Domain, m: usize, seed: u64) -> Result<ParticleEnsemble> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        match self {
            Init::Uniform => ParticleEnsemble::uniform(domain, m, &mut rng),
            Init::Gaussian { sigma } => ParticleEnsemble::gaussian(domain, m, *sigma, &mut rng),
            Init::Ensemble(e) => {
                if e.domain() != &domain {
                    return Err(Error::DomainMismatch("initial ensemble on a different domain".into()));
                }
                if e.len() != m {
                    return Err(Error::SizeMismatch { expected: m, got: e.len() });
                }
                Ok(e.clone())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub m: usize,
    pub eta: f64,
    pub steps: u64,
    pub schedule: TemperatureSchedule,
    pub seed: u64,
    pub init: Init,
    pub checkpoint_every: u64,
    /// Record elapsed milliseconds; off keeps traces bytewise reproducible.
    pub wall_clock: bool,
    /// Estimate `H` with the 1-NN estimator at checkpoints (else NaN).
    pub estimate_entropy: bool,
}

impl RunConfig {
    pub fn new(m: usize, eta: f64, steps: u64, schedule: TemperatureSchedule, seed: u64) -> Self {
        Self {
            m,
            eta,
            steps,
            schedule,
            seed,
            init: Init::Uniform,
            checkpoint_every: 1,
            wall_clock: false,
            estimate_entropy: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid(format!("eta must be positive, got {}", self.eta)));
        }
        if self.checkpoint_every == 0 {
            return Err(Error::invalid("checkpoint_every must be positive"));
        }
        if self.estimate_entropy && self.m < 2 {
            return Err(Error::invalid("entropy estimation needs m >= 2"));
        }
        self.schedule.validate()
    }

    /// Steps at which a trace row is recorded: multiples of
    /// `checkpoint_every` and the final step.
    pub fn checkpoints(&self) -> Vec<u64> {
        let mut out: Vec<u64> = (0..=self.steps).step_by(self.checkpoint_every as usize).collect();
        if *out.last().expect("step 0 is always recorded") != self.steps {
            out.push(self.steps);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: u64,
    pub tau: f64,
    pub g: f64,
    pub h: f64,
    pub f: f64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub final_ensemble: ParticleEnsemble,
}

pub const TRACE_HEADER: &str = "step,tau,G,H,F,wall_ms";

impl Trace {
    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.rows.len() + 1));
        s.push_str(TRACE_HEADER);
        s.push('\n');
        for r in &self.rows {
            s.push_str(&format!("{},{:?},{:?},{:?},{:?},{}\n", r.step, r.tau, r.g, r.h, r.f, r.wall_ms));
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Vec<TraceRow>> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == TRACE_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header `{TRACE_HEADER}`"),
                })
            }
        }
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = idx + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 6 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected 6 fields, found {}", fields.len()),
                });
            }
            let bad = |f: &str| Error::Parse {
                line: line_no,
                msg: format!("bad field `{f}`"),
            };
            let num = |f: &str| f.trim().parse::<f64>().map_err(|_| bad(f));
            rows.push(TraceRow {
                step: fields[0].trim().parse().map_err(|_| bad(fields[0]))?,
                tau: num(fields[1])?,
                g: num(fields[2])?,
                h: num(fields[3])?,
                f: num(fields[4])?,
                wall_ms: fields[5].trim().parse().map_err(|_| bad(fields[5]))?,
            });
        }
        Ok(rows)
    }

    pub fn last(&self) -> &TraceRow {
        self.rows.last().expect("a trace has at least one row")
    }
}

/// Runs NPGD without callbacks.
pub fn run(config: &RunConfig, obj: &dyn Objective) -> Result<Trace> {
    run_with(config, obj, |_, _| Ok(()))
}

/// Runs NPGD, calling `on_checkpoint(row, ensemble)` at every recorded step.
pub fn run_with<F>(config: &RunConfig, obj: &dyn Objective, mut on_checkpoint: F) -> Result<Trace>
where
    F: FnMut(&TraceRow, &ParticleEnsemble) -> Result<()>,
{
    config.validate()?;
    let start = Instant::now();
    let mut ens = config.init.sample(*obj.domain(), config.m, config.seed)?;
    let noise = NoiseSource::new(config.seed, ens.dim());
    let checkpoints = config.checkpoints();
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut next_cp = checkpoints.iter().peekable();
    let mut record = |step: u64, ens: &ParticleEnsemble, rows: &mut Vec<TraceRow>| -> Result<()> {
        let tau = config.schedule.eval(step);
        let g = obj.value(ens)?;
        let h = if config.estimate_entropy {
            knn_entropy_with_seed(ens, config.seed)?.value
        } else {
            f64::NAN
        };
        let f = if tau == 0.0 { g } else { g + tau * h };
        let wall_ms = if config.wall_clock {
            start.elapsed().as_millis() as u64
        } else {
            0
        };
        let row = TraceRow {
            step,
            tau,
            g,
            h,
            f,
            wall_ms,
        };
        on_checkpoint(&row, ens)?;
        rows.push(row);
        Ok(())
    };
    for step in 0..=config.steps {
        if next_cp.peek() == Some(&&step) {
            next_cp.next();
            record(step, &ens, &mut rows)?;
        }
        if step == config.steps {
            break;
        }
        let tau = config.schedule.eval(step);
        ens = npgd_step_keyed(&ens, obj, config.eta, tau, step, &noise, None)?;
    }
    Ok(Trace {
        rows,
        final_ensemble: ens,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functionals::{LinearPotentialObjective, PotentialShape};

    #[test]
    fn schedule_examples() {
        let p = TemperatureSchedule::Polynomial {
            c: 20.0,
            beta: 1.0,
            cutoff: 800,
        };
        assert_eq!(p.eval(0), 20.0);
        assert_eq!(p.eval(799), 20.0 / 800.0);
        assert_eq!(p.eval(800), 0.0);
        let l = TemperatureSchedule::Logarithmic {
            alpha: 2.0,
            t0: std::f64::consts::E,
        };
        assert!((l.eval(0) - 2.0).abs() < 1e-15);
        assert!(TemperatureSchedule::Logarithmic { alpha: 1.0, t0: 1.0 }.validate().is_err());
    }

    #[test]
    fn deterministic_gradient_step() {
        let r1 = Domain::euclidean(1).unwrap();
        let obj = LinearPotentialObjective::new(r1, PotentialShape::Quadratic { lambda: 1.0 }).unwrap();
        let ens = ParticleEnsemble::new(r1, vec![1.0]).unwrap();
        let next = npgd_step(&ens, &obj, 0.1, 0.0, 0, 7).unwrap();
        assert!((next.positions()[0] - 0.9).abs() < 1e-15);
        let flat = LinearPotentialObjective::new(r1, PotentialShape::Constant(3.0)).unwrap();
        assert_eq!(npgd_step(&ens, &flat, 0.1, 0.0, 0, 7).unwrap(), ens);
    }

    #[test]
    fn same_key_same_noise() {
        let t = Domain::standard_torus(2).unwrap();
        let obj = LinearPotentialObjective::new(t, PotentialShape::Cosine { amplitude: 1.0 }).unwrap();
        let ens = ParticleEnsemble::new(t, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let a = npgd_step(&ens, &obj, 0.1, 0.5, 3, 11).unwrap();
        let b = npgd_step(&ens, &obj, 0.1, 0.5, 3, 11).unwrap();
        assert_eq!(a.positions(), b.positions());
        let c = npgd_step(&ens, &obj, 0.1, 0.5, 4, 11).unwrap();
        assert_ne!(a.positions(), c.positions());
    }

    #[test]
    fn noise_fill_matches_pointwise() {
        let noise = NoiseSource::new(42, 3);
        let mut z = [0.0; 3];
        noise.fill(9, 5, &mut z);
        for (j, v) in z.iter().enumerate() {
            assert_eq!(*v, noise.normal(9, 5, j));
        }
        assert_ne!(noise.normal(9, 5, 0), noise.normal(9, 6, 0));
    }

    #[test]
    fn divergence_is_reported() {
        let r1 = Domain::euclidean(1).unwrap();
        let obj = LinearPotentialObjective::new(r1, PotentialShape::Quadratic { lambda: 1.0 }).unwrap();
        let ens = ParticleEnsemble::new(r1, vec![0.0, 1e11]).unwrap();
        let err = npgd_step(&ens, &obj, 100.0, 0.0, 4, 0).unwrap_err();
        assert!(matches!(err, Error::Diverged { step: 4, particle: 1 }), "{err}");
    }

    #[test]
    fn checkpoint_layout() {
        let mut cfg = RunConfig::new(3, 0.1, 25, TemperatureSchedule::constant(0.1), 0);
        cfg.checkpoint_every = 10;
        assert_eq!(cfg.checkpoints(), vec![0, 10, 20, 25]);
        cfg.steps = 0;
        assert_eq!(cfg.checkpoints(), vec![0]);
        cfg.steps = 20;
        assert_eq!(cfg.checkpoints(), vec![0, 10, 20]);
    }

    #[test]
    fn csv_round_trip() {
        let t = Domain::standard_torus(1).unwrap();
        let obj = LinearPotentialObjective::new(t, PotentialShape::Cosine { amplitude: 1.0 }).unwrap();
        let mut cfg = RunConfig::new(5, 0.1, 7, TemperatureSchedule::constant(0.3), 1);
        cfg.checkpoint_every = 3;
        let trace = run(&cfg, &obj).unwrap();
        assert_eq!(trace.rows.len(), 4);
        let parsed = Trace::parse_csv(&trace.to_csv()).unwrap();
        assert_eq!(parsed, trace.rows);
    }
}
