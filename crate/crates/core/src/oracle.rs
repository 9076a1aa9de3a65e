//! Grid solver for the mean-field Langevin equation
//!
//! ```text
//! d/dt mu = div(mu grad V[mu]) + tau Laplace(mu)
//! ```
//!
//! on 1-D and 2-D torus grids, plus the damped fixed-point iteration for the
//! Gibbs minimizer `mu* = normalize(exp(-V[mu*]/tau))`.
//!
//! Time stepping is explicit Euler in conservative form. Face fluxes use the
//! Scharfetter-Gummel (exponentially fitted) discretization
//!
//! ```text
//! J = (1/h^2) [tau B(dV/tau) m_c - tau B(-dV/tau) m_n],   B(z) = z / (e^z - 1)
//! ```
//!
//! between a cell `c` and its forward neighbour `n`, with `dV = V_n - V_c`.
//! It reduces to centered diffusion for `dV -> 0` and to first-order upwind
//! advection for `tau -> 0`, and its discrete stationary states are exactly
//! the discrete Gibbs states, so the solver relaxes to the same fixed point
//! the iteration computes.

use rayon::prelude::*;

use crate::dynamics::TemperatureSchedule;
use crate::entropy::{grid_entropy, grid_fisher};
use crate::functionals::{check_tau, Measure, Objective};
use crate::measures::GridDensity;
use crate::{Error, Result};

/// Diffusive CFL limit `tau dt / h^2` (divided by `d` for `d > 1`).
pub const CFL_DIFFUSION: f64 = 0.25;
/// Advective CFL limit `max|grad V| dt / h` (divided by `d` for `d > 1`).
pub const CFL_ADVECTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct PdeConfig {
    pub initial: GridDensity,
    pub dt: f64,
    pub t_end: f64,
    /// Evaluated at continuous time `step * dt`.
    pub schedule: TemperatureSchedule,
    pub record_every: u64,
}

impl PdeConfig {
    /// Largest `tau` the schedule reaches (schedules are nonincreasing).
    fn max_tau(&self) -> f64 {
        self.schedule.eval_continuous(0.0)
    }

    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    /// 90% of the largest `dt` allowed by both CFL limits.
    pub fn stable_dt(obj: &dyn Objective, grid: &GridDensity, max_tau: f64) -> Result<f64> {
        let h = grid.cell_width();
        let d = grid.dim() as f64;
        let drift = obj
            .drift_bound()
            .ok_or_else(|| Error::NotAvailable(format!("{} has no drift bound for the CFL check", obj.name())))?;
        let mut dt = f64::INFINITY;
        if max_tau > 0.0 {
            dt = dt.min(CFL_DIFFUSION * h * h / (max_tau * d));
        }
        if drift > 0.0 {
            dt = dt.min(CFL_ADVECTION * h / (drift * d));
        }
        if !dt.is_finite() {
            dt = h * h;
        }
        Ok(0.9 * dt)
    }

    /// Checks the configuration against both CFL limits for `obj`.
    pub fn check_cfl(&self, obj: &dyn Objective) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return Err(Error::invalid(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if self.record_every == 0 {
            return Err(Error::invalid("record_every must be positive"));
        }
        self.schedule.validate()?;
        if obj.domain() != self.initial.domain() {
            return Err(Error::DomainMismatch("initial grid and objective differ in domain".into()));
        }
        if self.initial.dim() > 2 {
            return Err(Error::invalid("grid solver supports d = 1 and d = 2"));
        }
        let h = self.initial.cell_width();
        let d = self.initial.dim() as f64;
        let diff = self.max_tau() * self.dt / (h * h);
        if diff > CFL_DIFFUSION / d {
            return Err(Error::Cfl(format!(
                "tau dt / h^2 = {diff:.4} exceeds {:.4}",
                CFL_DIFFUSION / d
            )));
        }
        let drift = obj
            .drift_bound()
            .ok_or_else(|| Error::NotAvailable(format!("{} has no drift bound for the CFL check", obj.name())))?;
        let adv = drift * self.dt / h;
        if adv > CFL_ADVECTION / d {
            return Err(Error::Cfl(format!(
                "max|grad V| dt / h = {adv:.4} exceeds {:.4}",
                CFL_ADVECTION / d
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Initial damping; halved whenever the residual grows.
    pub damping: f64,
    /// L1 residual tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tol: 1e-12,
            max_iter: 20_000,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid(format!("tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

/// `V[p]` at every cell center.
pub fn potential_field(obj: &dyn Objective, p: &GridDensity) -> Result<Vec<f64>> {
    let fv = first_variation_on_grid(obj, p)?;
    let d = p.dim();
    Ok(p.centers().par_chunks(d).map(|x| fv.value(x)).collect())
}

/// `grad V[p]` at every cell center, row-major `cells x d`.
pub fn drift_field(obj: &dyn Objective, p: &GridDensity) -> Result<Vec<f64>> {
    let fv = first_variation_on_grid(obj, p)?;
    let d = p.dim();
    let centers = p.centers();
    let mut out = vec![0.0; centers.len()];
    out.par_chunks_mut(d)
        .zip(centers.par_chunks(d))
        .for_each(|(o, x)| fv.grad(x, o));
    Ok(out)
}

fn first_variation_on_grid<'a>(
    obj: &'a dyn Objective,
    p: &GridDensity,
) -> Result<Box<dyn crate::functionals::FirstVariation + 'a>> {
    if obj.domain() != p.domain() {
        return Err(Error::NotAvailable(format!(
            "{} is not defined on this torus grid",
            obj.name()
        )));
    }
    obj.first_variation(Measure::Grid(p))
}

/// `normalize(exp(-V[p]/tau))` on the grid of `p`.
pub fn gibbs_grid(obj: &dyn Objective, p: &GridDensity, tau: f64) -> Result<GridDensity> {
    check_tau(tau)?;
    let v = potential_field(obj, p)?;
    gibbs_from_potential(p, &v, tau)
}

fn gibbs_from_potential(p: &GridDensity, v: &[f64], tau: f64) -> Result<GridDensity> {
    let logs: Vec<f64> = v.iter().map(|x| -x / tau).collect();
    GridDensity::from_log_masses(*p.domain(), p.n(), &logs)
}

/// `F_tau(p) = G(p) + tau H(p)`.
pub fn free_energy_grid(obj: &dyn Objective, p: &GridDensity, tau: f64) -> Result<f64> {
    Ok(obj.value_grid(p)? + tau * grid_entropy(p))
}

/// `tau B(dv / tau)`, continuous at `tau = 0`.
fn fitted(dv: f64, tau: f64) -> f64 {
    if tau == 0.0 {
        return (-dv).max(0.0);
    }
    let z = dv / tau;
    if z.abs() < 1e-8 {
        tau * (1.0 - 0.5 * z)
    } else {
        tau * z / z.exp_m1()
    }
}

/// One explicit step given the potential at cell centers.
fn step_with_potential(p: &GridDensity, v: &[f64], tau: f64, dt: f64) -> Result<GridDensity> {
    let h = p.cell_width();
    let k = dt / (h * h);
    let cells = p.len();
    let d = p.dim();
    let m = p.values();
    // outgoing coefficient per cell for the positivity check
    let mut out_coef = vec![0.0; cells];
    let mut delta = vec![0.0; cells];
    for axis in 0..d {
        for c in 0..cells {
            let nb = p.neighbor(c, axis, true);
            let dv = v[nb] - v[c];
            let fwd = fitted(dv, tau);
            let bwd = fitted(-dv, tau);
            out_coef[c] += k * fwd;
            out_coef[nb] += k * bwd;
            let flux = k * (fwd * m[c] - bwd * m[nb]);
            delta[c] -= flux;
            delta[nb] += flux;
        }
    }
    if let Some(c) = out_coef.iter().position(|&a| a > 1.0) {
        return Err(Error::Cfl(format!(
            "outflow coefficient {:.4} > 1 at cell {c}; reduce dt",
            out_coef[c]
        )));
    }
    let values = m
        .iter()
        .zip(&delta)
        .map(|(a, b)| (a + b).max(0.0))
        .collect();
    Ok(GridDensity::from_masses_unchecked(*p.domain(), p.n(), values))
}

/// One explicit Scharfetter-Gummel step of the mean-field equation.
pub fn fokker_planck_step(p: &GridDensity, obj: &dyn Objective, tau: f64, dt: f64) -> Result<GridDensity> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("temperature must be nonnegative, got {tau}")));
    }
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt must be positive, got {dt}")));
    }
    let v = potential_field(obj, p)?;
    step_with_potential(p, &v, tau, dt)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub t: f64,
    pub tau: f64,
    pub grid: GridDensity,
    pub g: f64,
    pub h: f64,
    pub f: f64,
    /// `I(mu_t | nu_t)` against the instantaneous Gibbs measure; NaN at `tau = 0`.
    pub fisher: f64,
}

pub const FRAMES_HEADER: &str = "t,tau,G,H,F,fisher";

pub fn frames_to_csv(frames: &[Frame]) -> String {
    let mut s = String::from(FRAMES_HEADER);
    s.push('\n');
    for fr in frames {
        s.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?},{:?}\n",
            fr.t, fr.tau, fr.g, fr.h, fr.f, fr.fisher
        ));
    }
    s
}

fn make_frame(obj: &dyn Objective, grid: GridDensity, v: &[f64], t: f64, tau: f64) -> Result<Frame> {
    let g = obj.value_grid(&grid)?;
    let h = grid_entropy(&grid);
    let (f, fisher) = if tau > 0.0 {
        let nu = gibbs_from_potential(&grid, v, tau)?;
        (g + tau * h, grid_fisher(&grid, &nu)?)
    } else {
        (g, f64::NAN)
    };
    Ok(Frame {
        t,
        tau,
        grid,
        g,
        h,
        f,
        fisher,
    })
}

/// Integrates to `t_end`, recording a frame at step 0, every
/// `record_every` steps and at the final step.
pub fn solve_mfl(config: &PdeConfig, obj: &dyn Objective) -> Result<Vec<Frame>> {
    config.check_cfl(obj)?;
    let steps = config.steps();
    let mut p = config.initial.clone();
    let mut frames = Vec::new();
    for step in 0..=steps {
        let t = step as f64 * config.dt;
        let tau = config.schedule.eval_continuous(t);
        let v = potential_field(obj, &p)?;
        if step % config.record_every == 0 || step == steps {
            frames.push(make_frame(obj, p.clone(), &v, t, tau)?);
        }
        if step == steps {
            break;
        }
        p = step_with_potential(&p, &v, tau, config.dt)?;
    }
    Ok(frames)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub density: GridDensity,
    pub iterations: usize,
    pub residual: f64,
}

/// Damped iteration `p <- (1 - theta) p + theta normalize(exp(-V[p]/tau))`
/// until the L1 residual `|T(p) - p|_1` is at most `cfg.tol`. `theta` starts
/// at `cfg.damping` and is halved whenever the residual increases.
pub fn gibbs_fixed_point(
    obj: &dyn Objective,
    tau: f64,
    init: &GridDensity,
    cfg: &FixedPointConfig,
) -> Result<FixedPoint> {
    check_tau(tau)?;
    cfg.validate()?;
    let mut p = init.clone();
    let mut theta = cfg.damping;
    let mut last = f64::INFINITY;
    for iter in 0..=cfg.max_iter {
        let t = gibbs_grid(obj, &p, tau)?;
        let residual: f64 = p.values().iter().zip(t.values()).map(|(a, b)| (a - b).abs()).sum();
        if residual <= cfg.tol {
            return Ok(FixedPoint {
                density: p,
                iterations: iter,
                residual,
            });
        }
        if iter == cfg.max_iter {
            return Err(Error::NoConvergence {
                iterations: iter,
                residual,
            });
        }
        if residual > last {
            theta = (0.5 * theta).max(1e-6);
        }
        last = residual;
        let mixed = p
            .values()
            .iter()
            .zip(t.values())
            .map(|(a, b)| (1.0 - theta) * a + theta * b)
            .collect();
        p = GridDensity::new(*p.domain(), p.n(), mixed)?;
    }
    unreachable!("loop returns at max_iter")
}
