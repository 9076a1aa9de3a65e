//! Ambient domains and the two measure representations used throughout the
//! crate: equally weighted particle ensembles and cell-mass grids.
//!
//! Torus coordinates are always stored wrapped into `[0, period)`. Geodesic
//! displacements on the torus are the per-coordinate signed shortest arcs in
//! `(-period/2, period/2]`; the antipodal tie resolves to `+period/2`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DomainKind {
    Euclidean,
    Torus { period: f64 },
}

/// Ambient space: `R^d` or the flat torus `(R / period Z)^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    kind: DomainKind,
    dim: usize,
}

impl Domain {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        Ok(Self {
            kind: DomainKind::Euclidean,
            dim,
        })
    }

    pub fn torus(dim: usize, period: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::invalid(format!("torus period must be positive, got {period}")));
        }
        Ok(Self {
            kind: DomainKind::Torus { period },
            dim,
        })
    }

    /// The `2 pi`-periodic torus of dimension `dim`.
    pub fn standard_torus(dim: usize) -> Result<Self> {
        Self::torus(dim, 2.0 * PI)
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn period(&self) -> Option<f64> {
        match self.kind {
            DomainKind::Torus { period } => Some(period),
            DomainKind::Euclidean => None,
        }
    }

    pub fn is_torus(&self) -> bool {
        matches!(self.kind, DomainKind::Torus { .. })
    }

    /// Volume of the torus, `period^d`. `None` on `R^d`.
    pub fn volume(&self) -> Option<f64> {
        self.period().map(|p| p.powi(self.dim as i32))
    }

    #[inline]
    pub fn wrap_coord(&self, x: f64) -> f64 {
        match self.kind {
            DomainKind::Euclidean => x,
            DomainKind::Torus { period } => {
                let r = x.rem_euclid(period);
                // rem_euclid rounds up to `period` for tiny negative inputs
                if r >= period {
                    0.0
                } else {
                    r
                }
            }
        }
    }

    pub fn wrap(&self, position: &[f64]) -> Result<Vec<f64>> {
        self.check_point(position)?;
        Ok(position.iter().map(|&x| self.wrap_coord(x)).collect())
    }

    pub fn wrap_in_place(&self, position: &mut [f64]) {
        if self.is_torus() {
            for x in position {
                *x = self.wrap_coord(*x);
            }
        }
    }

    /// Signed shortest displacement from `x` to `y` along one coordinate.
    #[inline]
    pub fn displacement_coord(&self, x: f64, y: f64) -> f64 {
        match self.kind {
            DomainKind::Euclidean => y - x,
            DomainKind::Torus { period } => {
                let mut delta = (y - x).rem_euclid(period);
                if delta >= period {
                    delta = 0.0;
                }
                if delta > 0.5 * period {
                    delta - period
                } else {
                    delta
                }
            }
        }
    }

    pub fn geodesic_displacement(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(x.iter()
            .zip(y)
            .map(|(&a, &b)| self.displacement_coord(a, b))
            .collect())
    }

    /// Squared geodesic distance. No validation; callers pass in-domain points.
    #[inline]
    pub fn sq_dist(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter()
            .zip(y)
            .map(|(&a, &b)| {
                let d = self.displacement_coord(a, b);
                d * d
            })
            .sum()
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::SizeMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite coordinate {v}")));
        }
        Ok(())
    }
}

/// `m` equally weighted atoms, stored row-major as an `m x d` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    domain: Domain,
    positions: Vec<f64>,
}

impl ParticleEnsemble {
    /// Builds an ensemble from a flat row-major buffer. Torus coordinates are
    /// wrapped; non-finite entries are rejected.
    pub fn new(domain: Domain, mut positions: Vec<f64>) -> Result<Self> {
        let d = domain.dim();
        if positions.is_empty() || !positions.len().is_multiple_of(d) {
            return Err(Error::invalid(format!(
                "position buffer of length {} is not a nonempty multiple of d = {d}",
                positions.len()
            )));
        }
        if let Some(v) = positions.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite particle coordinate {v}")));
        }
        domain.wrap_in_place(&mut positions);
        Ok(Self { domain, positions })
    }

    pub fn from_rows<R: AsRef<[f64]>>(domain: Domain, rows: &[R]) -> Result<Self> {
        let mut flat = Vec::with_capacity(rows.len() * domain.dim());
        for row in rows {
            let row = row.as_ref();
            if row.len() != domain.dim() {
                return Err(Error::SizeMismatch {
                    expected: domain.dim(),
                    got: row.len(),
                });
            }
            flat.extend_from_slice(row);
        }
        Self::new(domain, flat)
    }

    /// Caller guarantees finiteness and wrapping.
    pub(crate) fn from_raw(domain: Domain, positions: Vec<f64>) -> Self {
        debug_assert_eq!(positions.len() % domain.dim(), 0);
        Self { domain, positions }
    }

    /// `m` i.i.d. uniform points on the torus.
    pub fn uniform<R: Rng + ?Sized>(domain: Domain, m: usize, rng: &mut R) -> Result<Self> {
        let period = domain
            .period()
            .ok_or_else(|| Error::invalid("uniform initialization requires a torus domain"))?;
        if m == 0 {
            return Err(Error::invalid("ensemble size must be at least 1"));
        }
        let positions = (0..m * domain.dim())
            .map(|_| domain.wrap_coord(rng.random::<f64>() * period))
            .collect();
        Ok(Self { domain, positions })
    }

    /// `m` i.i.d. draws of `N(0, sigma^2 I)`, wrapped on the torus.
    pub fn gaussian<R: Rng + ?Sized>(domain: Domain, m: usize, sigma: f64, rng: &mut R) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("ensemble size must be at least 1"));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("gaussian sigma must be positive, got {sigma}")));
        }
        let positions = (0..m * domain.dim())
            .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self::new(domain, positions)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn len(&self) -> usize {
        self.positions.len() / self.domain.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn into_positions(self) -> Vec<f64> {
        self.positions
    }

    pub fn position(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.positions[i * d..(i + 1) * d]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.positions.chunks_exact(self.dim())
    }

    /// Reorders atoms so that atom `i` of the result is atom `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.len() {
            return Err(Error::SizeMismatch {
                expected: self.len(),
                got: perm.len(),
            });
        }
        let mut seen = vec![false; perm.len()];
        let mut out = Vec::with_capacity(self.positions.len());
        for &j in perm {
            if j >= perm.len() || std::mem::replace(&mut seen[j], true) {
                return Err(Error::invalid("not a permutation"));
            }
            out.extend_from_slice(self.position(j));
        }
        Ok(Self::from_raw(self.domain, out))
    }

    /// Mean squared distance to the origin (geodesic on the torus).
    pub fn second_moment(&self) -> f64 {
        let origin = vec![0.0; self.dim()];
        let total: f64 = self.iter().map(|x| self.domain.sq_dist(&origin, x)).sum();
        total / self.len() as f64
    }
}

/// Probability masses on a uniform cell-centered grid over the torus.
///
/// Cells are indexed row-major (first axis slowest); the center of cell
/// `(i_0, .., i_{d-1})` is `((i_0 + 1/2) h, .., (i_{d-1} + 1/2) h)` with
/// `h = period / n`. Values are masses (density times cell volume) and sum
/// to one.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDensity {
    domain: Domain,
    n: usize,
    values: Vec<f64>,
}

impl GridDensity {
    /// Validates and normalizes a mass vector.
    pub fn new(domain: Domain, n: usize, values: Vec<f64>) -> Result<Self> {
        Self::check_shape(&domain, n, values.len())?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::invalid(format!("grid value {v} at cell {i} is negative or non-finite")));
        }
        let mut grid = Self { domain, n, values };
        grid.normalize()?;
        Ok(grid)
    }

    /// Accepts masses that already sum to one within `1e-12`, bit-exact.
    pub fn from_masses(domain: Domain, n: usize, values: Vec<f64>) -> Result<Self> {
        Self::check_shape(&domain, n, values.len())?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::invalid(format!("grid value {v} at cell {i} is negative or non-finite")));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("grid masses sum to {total}, expected 1")));
        }
        Ok(Self { domain, n, values })
    }

    /// Masses produced by a conservative update; no renormalization.
    pub(crate) fn from_masses_unchecked(domain: Domain, n: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), n.pow(domain.dim() as u32));
        Self { domain, n, values }
    }

    pub fn uniform(domain: Domain, n: usize) -> Result<Self> {
        Self::check_shape(&domain, n, n.checked_pow(domain.dim() as u32).unwrap_or(0))?;
        let cells = n.pow(domain.dim() as u32);
        Self::new(domain, n, vec![1.0; cells])
    }

    /// All mass in one cell.
    pub fn point_mass(domain: Domain, n: usize, cell: usize) -> Result<Self> {
        Self::check_shape(&domain, n, n.checked_pow(domain.dim() as u32).unwrap_or(0))?;
        let cells = n.pow(domain.dim() as u32);
        if cell >= cells {
            return Err(Error::invalid(format!("cell {cell} out of range ({cells} cells)")));
        }
        let mut values = vec![0.0; cells];
        values[cell] = 1.0;
        Ok(Self { domain, n, values })
    }

    /// Samples a nonnegative density at cell centers and normalizes.
    pub fn from_density_fn(domain: Domain, n: usize, density: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let centers = Self::centers_for(&domain, n)?;
        let d = domain.dim();
        let values = centers.chunks_exact(d).map(&density).collect();
        Self::new(domain, n, values)
    }

    /// Normalizes `exp(log_density)` at cell centers without overflow.
    pub fn from_log_density_fn(domain: Domain, n: usize, log_density: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let centers = Self::centers_for(&domain, n)?;
        let logs: Vec<f64> = centers.chunks_exact(domain.dim()).map(&log_density).collect();
        Self::from_log_masses(domain, n, &logs)
    }

    /// Normalizes `exp(logs[c])` over cells.
    pub fn from_log_masses(domain: Domain, n: usize, logs: &[f64]) -> Result<Self> {
        Self::check_shape(&domain, n, logs.len())?;
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::invalid("log-masses must contain a finite maximum"));
        }
        let values = logs.iter().map(|&l| (l - max).exp()).collect();
        Self::new(domain, n, values)
    }

    /// Histogram of an ensemble: each atom deposits `1/m` in its cell.
    pub fn histogram(ensemble: &ParticleEnsemble, n: usize) -> Result<Self> {
        let domain = *ensemble.domain();
        let h = Self::check_shape(&domain, n, n.checked_pow(domain.dim() as u32).unwrap_or(0))?;
        let mut values = vec![0.0; n.pow(domain.dim() as u32)];
        let w = 1.0 / ensemble.len() as f64;
        for x in ensemble.iter() {
            let mut idx = 0usize;
            for &c in x {
                let i = ((c / h) as usize).min(n - 1);
                idx = idx * n + i;
            }
            values[idx] += w;
        }
        Self::new(domain, n, values)
    }

    fn check_shape(domain: &Domain, n: usize, len: usize) -> Result<f64> {
        let period = domain
            .period()
            .ok_or_else(|| Error::DomainMismatch("grid densities live on a torus".into()))?;
        if n == 0 {
            return Err(Error::invalid("grid needs at least one point per axis"));
        }
        let cells = n
            .checked_pow(domain.dim() as u32)
            .ok_or_else(|| Error::invalid("grid too large"))?;
        if len != cells {
            return Err(Error::SizeMismatch {
                expected: cells,
                got: len,
            });
        }
        Ok(period / n as f64)
    }

    fn centers_for(domain: &Domain, n: usize) -> Result<Vec<f64>> {
        let cells = n
            .checked_pow(domain.dim() as u32)
            .ok_or_else(|| Error::invalid("grid too large"))?;
        let h = Self::check_shape(domain, n, cells)?;
        let d = domain.dim();
        let mut out = Vec::with_capacity(cells * d);
        for c in 0..cells {
            let mut rem = c;
            let start = out.len();
            out.resize(start + d, 0.0);
            for axis in (0..d).rev() {
                out[start + axis] = ((rem % n) as f64 + 0.5) * h;
                rem /= n;
            }
        }
        Ok(out)
    }

    pub fn normalize(&mut self) -> Result<()> {
        let total: f64 = self.values.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::invalid(format!("grid total mass {total} cannot be normalized")));
        }
        for v in &mut self.values {
            *v /= total;
        }
        Ok(())
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Points per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn cell_width(&self) -> f64 {
        self.domain.period().expect("grid domain is a torus") / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.cell_width().powi(self.dim() as i32)
    }

    pub fn cell_center(&self, cell: usize) -> Vec<f64> {
        let d = self.dim();
        let h = self.cell_width();
        let mut out = vec![0.0; d];
        let mut rem = cell;
        for axis in (0..d).rev() {
            out[axis] = ((rem % self.n) as f64 + 0.5) * h;
            rem /= self.n;
        }
        out
    }

    /// All cell centers, row-major `cells x d`.
    pub fn centers(&self) -> Vec<f64> {
        Self::centers_for(&self.domain, self.n).expect("shape validated at construction")
    }

    /// Flat index of the neighbour of `cell` one step along `axis` (periodic).
    #[inline]
    pub fn neighbor(&self, cell: usize, axis: usize, forward: bool) -> usize {
        let d = self.dim();
        let stride = self.n.pow((d - 1 - axis) as u32);
        let i = (cell / stride) % self.n;
        let j = if forward {
            (i + 1) % self.n
        } else {
            (i + self.n - 1) % self.n
        };
        cell - i * stride + j * stride
    }

    pub fn same_grid(&self, other: &GridDensity) -> bool {
        self.domain == other.domain && self.n == other.n
    }

    /// Mean squared geodesic distance of cell centers to the origin.
    pub fn second_moment(&self) -> f64 {
        let d = self.dim();
        let origin = vec![0.0; d];
        self.centers()
            .chunks_exact(d)
            .zip(&self.values)
            .map(|(x, &p)| p * self.domain.sq_dist(&origin, x))
            .sum()
    }

    /// `m` i.i.d. draws: a cell by mass, then a uniform point inside it.
    pub fn sample<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<ParticleEnsemble> {
        if m == 0 {
            return Err(Error::invalid("ensemble size must be at least 1"));
        }
        let mut cdf = Vec::with_capacity(self.values.len());
        let mut acc = 0.0;
        for &v in &self.values {
            acc += v;
            cdf.push(acc);
        }
        let h = self.cell_width();
        let d = self.dim();
        let mut out = Vec::with_capacity(m * d);
        for _ in 0..m {
            let u = rng.random::<f64>() * acc;
            let cell = cdf.partition_point(|&c| c <= u).min(self.values.len() - 1);
            let mut rem = cell;
            let start = out.len();
            out.resize(start + d, 0.0);
            for axis in (0..d).rev() {
                let i = (rem % self.n) as f64;
                out[start + axis] = (i + rng.random::<f64>()) * h;
                rem /= self.n;
            }
        }
        ParticleEnsemble::new(self.domain, out)
    }
}
