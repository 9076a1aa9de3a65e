//! Convex functionals `G` on probability measures, their first variations
//! `V[mu]` and first-variation gradients.
//!
//! An [`Objective`] freezes `V[mu]` for a given measure through
//! [`Objective::first_variation`]; the returned [`FirstVariation`] evaluates
//! `V[mu](x)` and `grad V[mu](x)` at arbitrary points. NPGD moves particle `i`
//! along `-grad V[mu_hat](X_i)`, which equals `-m grad_{X_i} G_m(X)`.
//!
//! Additive constants of `V[mu]`:
//! - linear potential: `V[mu] = V` itself;
//! - kernel MMD: `V[mu](x) = int k(x, y) d(mu - nu)(y)`, no shift;
//! - two-layer network: `E_j[l'(y_j, f_mu(z_j)) Phi(z_j, x)] + lambda |x|^2 / 2`.

use std::f64::consts::PI;
use std::io::BufRead;
use std::path::Path;

use crate::kernel::{CosineSeriesKernel, FeatureMap};
use crate::measures::{Domain, GridDensity, ParticleEnsemble};
use crate::{Error, Result};

/// A measure an objective can be linearized at.
#[derive(Debug, Clone, Copy)]
pub enum Measure<'a> {
    Particles(&'a ParticleEnsemble),
    Grid(&'a GridDensity),
    /// The mixture `(1 - t) from + t to` of two ensembles.
    Segment {
        from: &'a ParticleEnsemble,
        to: &'a ParticleEnsemble,
        t: f64,
    },
}

impl<'a> From<&'a ParticleEnsemble> for Measure<'a> {
    fn from(p: &'a ParticleEnsemble) -> Self {
        Measure::Particles(p)
    }
}

impl<'a> From<&'a GridDensity> for Measure<'a> {
    fn from(g: &'a GridDensity) -> Self {
        Measure::Grid(g)
    }
}

impl Measure<'_> {
    pub fn domain(&self) -> &Domain {
        match self {
            Measure::Particles(p) => p.domain(),
            Measure::Grid(g) => g.domain(),
            Measure::Segment { from, .. } => from.domain(),
        }
    }

    fn check(&self, expected: &Domain) -> Result<()> {
        if self.domain() != expected {
            return Err(Error::DomainMismatch(format!(
                "measure lives on {:?}, objective on {:?}",
                self.domain(),
                expected
            )));
        }
        if let Measure::Segment { from, to, t } = self {
            if from.domain() != to.domain() {
                return Err(Error::DomainMismatch("segment endpoints on different domains".into()));
            }
            if !(0.0..=1.0).contains(t) {
                return Err(Error::invalid(format!("segment parameter {t} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// `V[mu]` frozen at a measure.
pub trait FirstVariation: Send + Sync {
    fn value(&self, x: &[f64]) -> f64;
    /// Writes `grad V[mu](x)` into `out` (length `d`).
    fn grad(&self, x: &[f64], out: &mut [f64]);
}

/// Capability set of a convex functional with a first variation.
pub trait Objective: Send + Sync {
    fn domain(&self) -> &Domain;

    /// `G` at the empirical measure of `mu`.
    fn value(&self, mu: &ParticleEnsemble) -> Result<f64>;

    /// `G` at a grid measure (atoms at cell centers). Torus objectives only.
    fn value_grid(&self, p: &GridDensity) -> Result<f64> {
        let _ = p;
        Err(Error::NotAvailable(format!("{} has no grid representation", self.name())))
    }

    fn first_variation<'a>(&'a self, mu: Measure<'_>) -> Result<Box<dyn FirstVariation + 'a>>;

    /// A lower bound on the uniform log-Sobolev constant of the Gibbs
    /// measures `exp(-V[mu]/tau)`. `Ok(None)` when no bound is known for this
    /// objective; an error for `tau <= 0`.
    fn lsi_lower_bound(&self, tau: f64) -> Result<Option<f64>>;

    /// Lipschitz constant of `(mu, x) -> grad V[mu](x)`, when known.
    fn lipschitz_l(&self) -> Option<f64> {
        None
    }

    /// Bound on `max_i |d_i V[mu](x)|` over all measures and points, when finite.
    fn drift_bound(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> &'static str;
}

pub fn fv_value(obj: &dyn Objective, mu: Measure<'_>, x: &[f64]) -> Result<f64> {
    check_point(obj.domain(), x)?;
    Ok(obj.first_variation(mu)?.value(x))
}

pub fn fv_grad(obj: &dyn Objective, mu: Measure<'_>, x: &[f64]) -> Result<Vec<f64>> {
    check_point(obj.domain(), x)?;
    let mut out = vec![0.0; x.len()];
    obj.first_variation(mu)?.grad(x, &mut out);
    Ok(out)
}

/// `-V[mu](x) / tau`, the unnormalized log-density of the instantaneous Gibbs
/// measure.
pub fn gibbs_log_density_unnorm(obj: &dyn Objective, mu: Measure<'_>, tau: f64, x: &[f64]) -> Result<f64> {
    check_tau(tau)?;
    Ok(-fv_value(obj, mu, x)? / tau)
}

/// Central finite difference of `m G_m` with respect to the coordinates of
/// particle `i`.
pub fn finite_diff_particle_grad(obj: &dyn Objective, mu: &ParticleEnsemble, i: usize, h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0 && h <= 1e-4) {
        return Err(Error::invalid(format!("finite-difference step {h} outside (0, 1e-4]")));
    }
    if i >= mu.len() {
        return Err(Error::invalid(format!("particle index {i} out of range ({} particles)", mu.len())));
    }
    let d = mu.dim();
    let m = mu.len() as f64;
    let mut out = vec![0.0; d];
    let mut buf = mu.positions().to_vec();
    for (j, o) in out.iter_mut().enumerate() {
        let x0 = buf[i * d + j];
        buf[i * d + j] = x0 + h;
        let plus = obj.value(&ParticleEnsemble::new(*mu.domain(), buf.clone())?)?;
        buf[i * d + j] = x0 - h;
        let minus = obj.value(&ParticleEnsemble::new(*mu.domain(), buf.clone())?)?;
        buf[i * d + j] = x0;
        *o = m * (plus - minus) / (2.0 * h);
    }
    Ok(out)
}

/// Largest relative deviation, over particles, between `fv_grad(mu_hat, X_i)`
/// and [`finite_diff_particle_grad`]:
/// `max_i |fd_i - g_i|_inf / max(|g_i|_inf, 1e-8)`.
pub fn gradient_identity_error(obj: &dyn Objective, mu: &ParticleEnsemble, h: f64) -> Result<f64> {
    let fv = obj.first_variation(Measure::Particles(mu))?;
    let mut g = vec![0.0; mu.dim()];
    let mut worst = 0.0f64;
    for i in 0..mu.len() {
        fv.grad(mu.position(i), &mut g);
        let fd = finite_diff_particle_grad(obj, mu, i, h)?;
        let diff = fd.iter().zip(&g).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
        let scale = g.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-8);
        worst = worst.max(diff / scale);
    }
    Ok(worst)
}

/// Composite Simpson quadrature over `t` in `[0, 1]` of
/// `int V[mu_t] d(mu1 - mu0)` along `mu_t = (1 - t) mu0 + t mu1`.
/// `nodes` must be odd and at least 3.
pub fn integral_formula_simpson(
    obj: &dyn Objective,
    mu0: &ParticleEnsemble,
    mu1: &ParticleEnsemble,
    nodes: usize,
) -> Result<f64> {
    if nodes < 3 || nodes.is_multiple_of(2) {
        return Err(Error::invalid(format!("Simpson rule needs an odd node count >= 3, got {nodes}")));
    }
    let intervals = nodes - 1;
    let mut acc = 0.0;
    for k in 0..nodes {
        let t = k as f64 / intervals as f64;
        let fv = obj.first_variation(Measure::Segment { from: mu0, to: mu1, t })?;
        let plus = mu1.iter().map(|x| fv.value(x)).sum::<f64>() / mu1.len() as f64;
        let minus = mu0.iter().map(|x| fv.value(x)).sum::<f64>() / mu0.len() as f64;
        let w = if k == 0 || k == intervals {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * (plus - minus);
    }
    Ok(acc / (3.0 * intervals as f64))
}

fn check_point(domain: &Domain, x: &[f64]) -> Result<()> {
    if x.len() != domain.dim() {
        return Err(Error::SizeMismatch {
            expected: domain.dim(),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite evaluation point"));
    }
    Ok(())
}

pub(crate) fn check_tau(tau: f64) -> Result<()> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::invalid(format!("temperature must be positive, got {tau}")));
    }
    Ok(())
}

fn check_ensemble(domain: &Domain, mu: &ParticleEnsemble) -> Result<()> {
    if mu.domain() != domain {
        return Err(Error::DomainMismatch(format!(
            "ensemble lives on {:?}, objective on {:?}",
            mu.domain(),
            domain
        )));
    }
    Ok(())
}

/// LSI constant of the normalized volume measure on the torus,
/// `pi^2 / ((1 + 2 pi) diam^2)` with `diam = (period / 2) sqrt(d)`.
pub fn torus_uniform_lsi(domain: &Domain) -> Option<f64> {
    let period = domain.period()?;
    let diam_sq = 0.25 * period * period * domain.dim() as f64;
    Some(PI * PI / ((1.0 + 2.0 * PI) * diam_sq))
}

// ---------------------------------------------------------------------------
// Linear potentials

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialShape {
    /// `lambda |x|^2 / 2` on `R^d`.
    Quadratic { lambda: f64 },
    /// `amplitude * sum_i cos(x_i)`.
    Cosine { amplitude: f64 },
    Constant(f64),
}

impl PotentialShape {
    fn value(&self, x: &[f64]) -> f64 {
        match *self {
            PotentialShape::Quadratic { lambda } => 0.5 * lambda * x.iter().map(|v| v * v).sum::<f64>(),
            PotentialShape::Cosine { amplitude } => amplitude * x.iter().map(|v| v.cos()).sum::<f64>(),
            PotentialShape::Constant(c) => c,
        }
    }

    fn grad(&self, x: &[f64], out: &mut [f64]) {
        match *self {
            PotentialShape::Quadratic { lambda } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = lambda * v;
                }
            }
            PotentialShape::Cosine { amplitude } => {
                for (o, v) in out.iter_mut().zip(x) {
                    *o = -amplitude * v.sin();
                }
            }
            PotentialShape::Constant(_) => out.fill(0.0),
        }
    }
}

/// `G(mu) = int V dmu`. NPGD reduces to independent unadjusted Langevin chains.
#[derive(Debug, Clone)]
pub struct LinearPotentialObjective {
    domain: Domain,
    shape: PotentialShape,
}

impl LinearPotentialObjective {
    pub fn new(domain: Domain, shape: PotentialShape) -> Result<Self> {
        match shape {
            PotentialShape::Quadratic { lambda } => {
                if domain.is_torus() {
                    return Err(Error::invalid("quadratic potential is only defined on R^d"));
                }
                if !(lambda > 0.0) || !lambda.is_finite() {
                    return Err(Error::invalid(format!("quadratic lambda must be positive, got {lambda}")));
                }
            }
            PotentialShape::Cosine { amplitude } => {
                if !amplitude.is_finite() {
                    return Err(Error::invalid("cosine amplitude must be finite"));
                }
            }
            PotentialShape::Constant(c) => {
                if !c.is_finite() {
                    return Err(Error::invalid("constant potential must be finite"));
                }
            }
        }
        Ok(Self { domain, shape })
    }

    pub fn shape(&self) -> PotentialShape {
        self.shape
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        self.shape.value(x)
    }
}

struct LinearFv(PotentialShape);

impl FirstVariation for LinearFv {
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x)
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        self.0.grad(x, out)
    }
}

impl Objective for LinearPotentialObjective {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn value(&self, mu: &ParticleEnsemble) -> Result<f64> {
        check_ensemble(&self.domain, mu)?;
        Ok(mu.iter().map(|x| self.shape.value(x)).sum::<f64>() / mu.len() as f64)
    }

    fn value_grid(&self, p: &GridDensity) -> Result<f64> {
        Measure::Grid(p).check(&self.domain)?;
        let d = p.dim();
        Ok(p.centers()
            .chunks_exact(d)
            .zip(p.values())
            .map(|(x, w)| w * self.shape.value(x))
            .sum())
    }

    fn first_variation<'a>(&'a self, mu: Measure<'_>) -> Result<Box<dyn FirstVariation + 'a>> {
        mu.check(&self.domain)?;
        Ok(Box::new(LinearFv(self.shape)))
    }

    fn lsi_lower_bound(&self, tau: f64) -> Result<Option<f64>> {
        check_tau(tau)?;
        let d = self.domain.dim() as f64;
        Ok(match (self.shape, torus_uniform_lsi(&self.domain)) {
            // Bakry-Emery: Hess(V/tau) = (lambda/tau) I
            (PotentialShape::Quadratic { lambda }, None) => Some(lambda / tau),
            // Holley-Stroock around the uniform measure; osc(V) = 2 |a| d
            (PotentialShape::Cosine { amplitude }, Some(rho0)) => Some(rho0 * (-2.0 * amplitude.abs() * d / tau).exp()),
            (PotentialShape::Constant(_), Some(rho0)) => Some(rho0),
            _ => None,
        })
    }

    fn lipschitz_l(&self) -> Option<f64> {
        match self.shape {
            PotentialShape::Quadratic { lambda } => Some(lambda),
            PotentialShape::Cosine { amplitude } => Some(amplitude.abs()),
            PotentialShape::Constant(_) => None,
        }
    }

    fn drift_bound(&self) -> Option<f64> {
        match self.shape {
            PotentialShape::Quadratic { .. } => None,
            PotentialShape::Cosine { amplitude } => Some(amplitude.abs()),
            PotentialShape::Constant(_) => Some(0.0),
        }
    }

    fn name(&self) -> &'static str {
        "linear"
    }
}

// ---------------------------------------------------------------------------
// Kernel MMD on the torus

/// Target measure of the kernel MMD.
#[derive(Debug, Clone)]
pub enum MmdTarget {
    Atoms(ParticleEnsemble),
    Grid(GridDensity),
}

impl MmdTarget {
    fn domain(&self) -> &Domain {
        match self {
            MmdTarget::Atoms(p) => p.domain(),
            MmdTarget::Grid(g) => g.domain(),
        }
    }
}

/// `G(mu) = 1/2 ||m_mu - m_nu||^2` in the RKHS of a cosine-series kernel,
/// i.e. half the squared kernel MMD between `mu` and the target `nu`.
#[derive(Debug, Clone)]
pub struct KernelMmdObjective {
    domain: Domain,
    kernel: CosineSeriesKernel,
    target: MmdTarget,
    features: FeatureMap,
    target_embedding: Vec<f64>,
}

impl KernelMmdObjective {
    pub fn new(kernel: CosineSeriesKernel, target: MmdTarget) -> Result<Self> {
        let domain = *target.domain();
        let period = domain
            .period()
            .ok_or_else(|| Error::DomainMismatch("kernel MMD is defined on the torus".into()))?;
        if (period - kernel.period()).abs() > 1e-12 * period {
            return Err(Error::DomainMismatch(format!(
                "kernel period {} differs from torus period {period}",
                kernel.period()
            )));
        }
        let features = kernel.feature_map(domain.dim());
        let target_embedding = match &target {
            MmdTarget::Atoms(p) => features.mean_embedding(p.positions()),
            MmdTarget::Grid(g) => features.weighted_embedding(&g.centers(), g.values()),
        };
        Ok(Self {
            domain,
            kernel,
            target,
            features,
            target_embedding,
        })
    }

    pub fn kernel(&self) -> &CosineSeriesKernel {
        &self.kernel
    }

    pub fn target(&self) -> &MmdTarget {
        &self.target
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    /// Kernel mean embedding `m_mu` of a measure.
    pub fn embedding(&self, mu: Measure<'_>) -> Result<Vec<f64>> {
        mu.check(&self.domain)?;
        Ok(match mu {
            Measure::Particles(p) => self.features.mean_embedding(p.positions()),
            Measure::Grid(g) => self.features.weighted_embedding(&g.centers(), g.values()),
            Measure::Segment { from, to, t } => {
                let a = self.features.mean_embedding(from.positions());
                let b = self.features.mean_embedding(to.positions());
                a.iter().zip(&b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
            }
        })
    }

    fn half_sq_norm_to_target(&self, emb: &[f64]) -> f64 {
        0.5 * emb
            .iter()
            .zip(&self.target_embedding)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
    }
}

struct MmdFv<'a> {
    features: &'a FeatureMap,
    diff: Vec<f64>,
}

impl FirstVariation for MmdFv<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.features.contract(&self.diff, x, None)
    }
    fn grad(&self, x: &[f64], out: &mut [f64]) {
        self.features.contract(&self.diff, x, Some(out));
    }
}

impl Objective for KernelMmdObjective {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn value(&self, mu: &ParticleEnsemble) -> Result<f64> {
        check_ensemble(&self.domain, mu)?;
        Ok(self.half_sq_norm_to_target(&self.features.mean_embedding(mu.positions())))
    }

    fn value_grid(&self, p: &GridDensity) -> Result<f64> {
        let emb = self.embedding(Measure::Grid(p))?;
        Ok(self.half_sq_norm_to_target(&emb))
    }

    fn first_variation<'a>(&'a self, mu: Measure<'_>) -> Result<Box<dyn FirstVariation + 'a>> {
        let emb = self.embedding(mu)?;
        let diff = emb.iter().zip(&self.target_embedding).map(|(a, b)| a - b).collect();
        Ok(Box::new(MmdFv {
            features: &self.features,
            diff,
        }))
    }

    fn lsi_lower_bound(&self, tau: f64) -> Result<Option<f64>> {
        check_tau(tau)?;
        let rho0 = torus_uniform_lsi(&self.domain).expect("kernel MMD lives on a torus");
        let (inf_k, sup_k) = self.kernel.kernel_range(self.domain.dim());
        Ok(Some(rho0 * ((inf_k - sup_k) / tau).exp()))
    }

    fn lipschitz_l(&self) -> Option<f64> {
        // |Hess_x k| <= d * sup|f''| sup|f|^(d-1), mixed terms included crudely
        let d = self.domain.dim() as i32;
        let f0 = self.kernel.profile_abs_bound();
        let f1 = self.kernel.profile_deriv_bound();
        let f2 = self.kernel.profile_second_deriv_bound();
        let hess = d as f64 * f2.max(f1 * f1 / f0.max(f64::MIN_POSITIVE)) * f0.powi(d - 1);
        Some(2.0 * hess)
    }

    fn drift_bound(&self) -> Option<f64> {
        let d = self.domain.dim() as i32;
        Some(2.0 * self.kernel.profile_deriv_bound() * self.kernel.profile_abs_bound().powi(d - 1))
    }

    fn name(&self) -> &'static str {
        "kmmd"
    }
}

// ---------------------------------------------------------------------------
// Two-layer network

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Loss {
    /// `(y - y')^2 / 2`
    Square,
    /// `log(1 + exp(-y y'))`
    Logistic,
}

impl Loss {
    pub fn value(&self, y: f64, pred: f64) -> f64 {
        match self {
            Loss::Square => 0.5 * (y - pred) * (y - pred),
            Loss::Logistic => softplus(-y * pred),
        }
    }

    /// Derivative with respect to the prediction.
    pub fn deriv(&self, y: f64, pred: f64) -> f64 {
        match self {
            Loss::Square => pred - y,
            Loss::Logistic => -y * sigmoid(-y * pred),
        }
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Finite regression/classification dataset with inputs in `R^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_in: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(n_in: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::invalid("dataset must contain at least one sample"));
        }
        if inputs.len() != n_in * targets.len() {
            return Err(Error::SizeMismatch {
                expected: n_in * targets.len(),
                got: inputs.len(),
            });
        }
        if inputs.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset contains non-finite values"));
        }
        Ok(Self { n_in, inputs, targets })
    }

    /// Text format: header `N n`, then `N` rows of `n` inputs followed by the target.
    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true));
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header `N n`".into(),
        })?;
        let header = header?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let parse_usize = |s: &str| {
            s.parse::<usize>().map_err(|e| Error::Parse {
                line: 1,
                msg: format!("bad header field `{s}`: {e}"),
            })
        };
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: 1,
                msg: "header must be `N n`".into(),
            });
        }
        let (count, n_in) = (parse_usize(fields[0])?, parse_usize(fields[1])?);
        let mut inputs = Vec::with_capacity(count * n_in);
        let mut targets = Vec::with_capacity(count);
        for (idx, line) in lines {
            let line = line?;
            let row = parse_row(&line, idx + 1)?;
            if row.len() != n_in + 1 {
                return Err(Error::Parse {
                    line: idx + 1,
                    msg: format!("expected {} values, found {}", n_in + 1, row.len()),
                });
            }
            inputs.extend_from_slice(&row[..n_in]);
            targets.push(row[n_in]);
        }
        if targets.len() != count {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header announces {count} rows, found {}", targets.len()),
            });
        }
        Self::new(n_in, inputs, targets)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(std::io::BufReader::new(file))
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn input(&self, j: usize) -> &[f64] {
        &self.inputs[j * self.n_in..(j + 1) * self.n_in]
    }

    pub fn target(&self, j: usize) -> f64 {
        self.targets[j]
    }

    pub fn max_abs_target(&self) -> f64 {
        self.targets.iter().fold(0.0, |m, y| m.max(y.abs()))
    }
}

pub(crate) fn parse_row(line: &str, line_no: usize) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                msg: format!("bad number `{tok}`: {e}"),
            })
        })
        .collect()
}

/// Mean-field two-layer network risk with weight decay,
///
/// ```text
/// G(mu) = (1/N) sum_j l(y_j, int Phi(z_j, x) dmu(x)) + (lambda/2) int |x|^2 dmu
/// ```
///
/// with the bounded smooth feature `Phi(z, x) = K tanh(x . [z; 1] / K)`, so
/// particles live in `R^(n+1)`.
#[derive(Debug, Clone)]
pub struct TwoLayerNnObjective {
    domain: Domain,
    data: Dataset,
    loss: Loss,
    bound: f64,
    lambda: f64,
}

impl TwoLayerNnObjective {
    pub fn new(data: Dataset, loss: Loss, bound: f64, lambda: f64) -> Result<Self> {
        if !(bound > 0.0) || !bound.is_finite() {
            return Err(Error::invalid(format!("feature bound K must be positive, got {bound}")));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("weight decay lambda must be positive, got {lambda}")));
        }
        let domain = Domain::euclidean(data.n_in() + 1)?;
        Ok(Self {
            domain,
            data,
            loss,
            bound,
            lambda,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.data
    }

    pub fn loss(&self) -> Loss {
        self.loss
    }

    pub fn feature_bound(&self) -> f64 {
        self.bound
    }

    pub fn weight_decay(&self) -> f64 {
        self.lambda
    }

    /// Pre-activation `x . [z; 1]`.
    fn preactivation(&self, z: &[f64], x: &[f64]) -> f64 {
        let n = z.len();
        z.iter().zip(&x[..n]).map(|(a, b)| a * b).sum::<f64>() + x[n]
    }

    pub fn feature(&self, z: &[f64], x: &[f64]) -> f64 {
        self.bound * (self.preactivation(z, x) / self.bound).tanh()
    }

    /// Network outputs `f_mu(z_j)` for every sample.
    fn predictions(&self, points: &[f64]) -> Vec<f64> {
        let d = self.domain.dim();
        let m = (points.len() / d) as f64;
        (0..self.data.len())
            .map(|j| {
                let z = self.data.input(j);
                points.chunks_exact(d).map(|x| self.feature(z, x)).sum::<f64>() / m
            })
            .collect()
    }

    fn measure_stats(&self, mu: Measure<'_>) -> Result<Vec<f64>> {
        mu.check(&self.domain)?;
        match mu {
            Measure::Particles(p) => Ok(self.predictions(p.positions())),
            Measure::Segment { from, to, t } => {
                let a = self.predictions(from.positions());
                let b = self.predictions(to.positions());
                Ok(a.iter().zip(&b).map(|(x, y)| (1.0 - t) * x + t * y).collect())
            }
            Measure::Grid(_) => Err(Error::NotAvailable("two-layer network objective lives on R^d".into())),
        }
    }
}

struct NnFv<'a> {
    obj: &'a TwoLayerNnObjective,
    /// `l'(y_j, f_mu(z_j)) / N`
    weights: Vec<f64>,
}

impl FirstVariation for NnFv<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let data_term: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(j, w)| w * self.obj.feature(self.obj.data.input(j), x))
            .sum();
        data_term + 0.5 * self.obj.lambda * x.iter().map(|v| v * v).sum::<f64>()
    }

    fn grad(&self, x: &[f64], out: &mut [f64]) {
        let n = self.obj.data.n_in();
        for (o, v) in out.iter_mut().zip(x) {
            *o = self.obj.lambda * v;
        }
        for (j, w) in self.weights.iter().enumerate() {
            let z = self.obj.data.input(j);
            let t = (self.obj.preactivation(z, x) / self.obj.bound).tanh();
            let c = w * (1.0 - t * t);
            for (o, zi) in out[..n].iter_mut().zip(z) {
                *o += c * zi;
            }
            out[n] += c;
        }
    }
}

impl Objective for TwoLayerNnObjective {
    fn domain(&self) -> &Domain {
        &self.domain
    }

    fn value(&self, mu: &ParticleEnsemble) -> Result<f64> {
        check_ensemble(&self.domain, mu)?;
        let preds = self.predictions(mu.positions());
        let risk = preds
            .iter()
            .enumerate()
            .map(|(j, &f)| self.loss.value(self.data.target(j), f))
            .sum::<f64>()
            / self.data.len() as f64;
        let m2: f64 = mu.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>()).sum::<f64>() / mu.len() as f64;
        Ok(risk + 0.5 * self.lambda * m2)
    }

    fn first_variation<'a>(&'a self, mu: Measure<'_>) -> Result<Box<dyn FirstVariation + 'a>> {
        let preds = self.measure_stats(mu)?;
        let n = self.data.len() as f64;
        let weights = preds
            .iter()
            .enumerate()
            .map(|(j, &f)| self.loss.deriv(self.data.target(j), f) / n)
            .collect();
        Ok(Box::new(NnFv { obj: self, weights }))
    }

    fn lsi_lower_bound(&self, tau: f64) -> Result<Option<f64>> {
        check_tau(tau)?;
        let k = self.bound;
        let osc = match self.loss {
            Loss::Logistic => 2.0 * k,
            Loss::Square => 2.0 * k * (k + self.data.max_abs_target()),
        };
        Ok(Some(self.lambda / tau * (-osc / tau).exp()))
    }

    fn name(&self) -> &'static str {
        "two-layer-nn"
    }
}
