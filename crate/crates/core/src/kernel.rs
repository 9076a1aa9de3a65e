//! Translation-invariant product kernels on the torus built from a finite
//! cosine series,
//!
//! ```text
//! f(theta) = sum_{k=0}^{n} a_k cos(k theta),    k(x, y) = prod_i f(x_i - y_i)
//! ```
//!
//! With `a_k >= 0` the kernel is positive semi-definite and admits an exact
//! finite feature map: per axis the `2n + 1` functions
//! `sqrt(a_k) cos(k x)`, `sqrt(a_k) sin(k x)` (`k >= 1`), tensorized over axes,
//! so that `k(x, y) = <psi(x), psi(y)>`. Kernel mean embeddings, MMD values and
//! first variations are evaluated through that feature map.

use crate::{Error, Result};

/// Number of samples per axis for the dense profile search.
const PROFILE_SEARCH_POINTS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CosineSeriesKernel {
    coefficients: Vec<f64>,
    period: f64,
}

impl CosineSeriesKernel {
    /// `a_0 = 1`, `a_k = 2 / (1 + k)` for `k = 1..=n_freq`, `2 pi`-periodic.
    pub fn new(n_freq: usize) -> Self {
        let coefficients = std::iter::once(1.0)
            .chain((1..=n_freq).map(|k| 2.0 / (1.0 + k as f64)))
            .collect();
        Self {
            coefficients,
            period: 2.0 * std::f64::consts::PI,
        }
    }

    /// Arbitrary nonnegative coefficients `a_0..=a_n` on the torus of the
    /// given period (frequencies are `2 pi k / period`).
    pub fn with_coefficients(coefficients: Vec<f64>, period: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::invalid("kernel needs at least the constant coefficient"));
        }
        if coefficients.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::invalid("cosine-series coefficients must be finite and nonnegative"));
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::invalid("kernel period must be positive"));
        }
        Ok(Self { coefficients, period })
    }

    pub fn with_period(mut self, period: f64) -> Result<Self> {
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::invalid("kernel period must be positive"));
        }
        self.period = period;
        Ok(self)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn n_freq(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    #[inline]
    fn omega(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.period
    }

    /// Per-axis profile `f(theta)`.
    pub fn profile(&self, theta: f64) -> f64 {
        let w = self.omega();
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, a)| a * (k as f64 * w * theta).cos())
            .sum()
    }

    pub fn profile_deriv(&self, theta: f64) -> f64 {
        let w = self.omega();
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, a)| -a * k as f64 * w * (k as f64 * w * theta).sin())
            .sum()
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        x.iter().zip(y).map(|(a, b)| self.profile(a - b)).product()
    }

    /// Gradient of `k(., y)` at `x`.
    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let f: Vec<f64> = x.iter().zip(y).map(|(a, b)| self.profile(a - b)).collect();
        (0..x.len())
            .map(|i| {
                let mut g = self.profile_deriv(x[i] - y[i]);
                for (j, fj) in f.iter().enumerate() {
                    if j != i {
                        g *= fj;
                    }
                }
                g
            })
            .collect()
    }

    /// Minimum and maximum of the per-axis profile by dense search over one
    /// period.
    pub fn profile_range(&self) -> (f64, f64) {
        let step = self.period / PROFILE_SEARCH_POINTS as f64;
        (0..PROFILE_SEARCH_POINTS)
            .map(|i| self.profile(i as f64 * step))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
    }

    /// `(inf k, sup k)` over the `d`-dimensional torus.
    ///
    /// Every axis factor ranges over the full interval `[lo, hi]` of the
    /// profile and the product is multilinear in those factors, so the
    /// extremes are attained at the `2^d` vertices `{lo, hi}^d`.
    pub fn kernel_range(&self, dim: usize) -> (f64, f64) {
        let (lo, hi) = self.profile_range();
        let mut inf = f64::INFINITY;
        let mut sup = f64::NEG_INFINITY;
        for mask in 0u32..(1 << dim) {
            let v: f64 = (0..dim)
                .map(|i| if mask >> i & 1 == 1 { hi } else { lo })
                .product();
            inf = inf.min(v);
            sup = sup.max(v);
        }
        (inf, sup)
    }

    /// `sum_k a_k k w`, an upper bound on `sup |f'|`.
    pub fn profile_deriv_bound(&self) -> f64 {
        let w = self.omega();
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, a)| a * k as f64 * w)
            .sum()
    }

    /// `sum_k a_k (k w)^2`, an upper bound on `sup |f''|`.
    pub fn profile_second_deriv_bound(&self) -> f64 {
        let w = self.omega();
        self.coefficients
            .iter()
            .enumerate()
            .map(|(k, a)| a * (k as f64 * w).powi(2))
            .sum()
    }

    /// `sum_k a_k = f(0)`, the maximum of `|f|`.
    pub fn profile_abs_bound(&self) -> f64 {
        self.coefficients.iter().sum()
    }

    pub fn feature_map(&self, dim: usize) -> FeatureMap {
        FeatureMap::new(self, dim)
    }
}

/// Tensorized trigonometric feature map of a [`CosineSeriesKernel`].
///
/// Per axis the features are ordered `[cos 0x, .., cos nx, sin 1x, .., sin nx]`
/// scaled by `sqrt(a_k)`; the full feature index is row-major over axes.
#[derive(Debug, Clone)]
pub struct FeatureMap {
    sqrt_a: Vec<f64>,
    omega: f64,
    dim: usize,
    per_axis: usize,
    len: usize,
}

impl FeatureMap {
    fn new(kernel: &CosineSeriesKernel, dim: usize) -> Self {
        let per_axis = 2 * kernel.n_freq() + 1;
        Self {
            sqrt_a: kernel.coefficients.iter().map(|a| a.sqrt()).collect(),
            omega: kernel.omega(),
            dim,
            per_axis,
            len: per_axis.pow(dim as u32),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Per-axis feature values and their derivatives at coordinate `x`.
    fn axis_features(&self, x: f64, values: &mut [f64], derivs: &mut [f64]) {
        let n = self.sqrt_a.len() - 1;
        for k in 0..=n {
            let kw = k as f64 * self.omega;
            let (s, c) = (kw * x).sin_cos();
            values[k] = self.sqrt_a[k] * c;
            derivs[k] = -self.sqrt_a[k] * kw * s;
            if k >= 1 {
                values[n + k] = self.sqrt_a[k] * s;
                derivs[n + k] = self.sqrt_a[k] * kw * c;
            }
        }
    }

    fn axis_tables(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let p = self.per_axis;
        let mut values = vec![0.0; p * self.dim];
        let mut derivs = vec![0.0; p * self.dim];
        for (axis, &xi) in x.iter().enumerate() {
            self.axis_features(xi, &mut values[axis * p..(axis + 1) * p], &mut derivs[axis * p..(axis + 1) * p]);
        }
        (values, derivs)
    }

    /// Adds `weight * psi(x)` to `acc`.
    pub fn accumulate(&self, x: &[f64], weight: f64, acc: &mut [f64]) {
        debug_assert_eq!(acc.len(), self.len);
        let (values, _) = self.axis_tables(x);
        let p = self.per_axis;
        // Build the tensor product one axis at a time.
        let mut buf = vec![weight];
        for axis in 0..self.dim {
            let row = &values[axis * p..(axis + 1) * p];
            let mut next = Vec::with_capacity(buf.len() * p);
            for &b in &buf {
                next.extend(row.iter().map(|v| b * v));
            }
            buf = next;
        }
        for (a, b) in acc.iter_mut().zip(buf) {
            *a += b;
        }
    }

    /// Mean embedding `(1/m) sum_i psi(x_i)` of row-major points.
    pub fn mean_embedding(&self, points: &[f64]) -> Vec<f64> {
        let m = points.len() / self.dim;
        let mut acc = vec![0.0; self.len];
        let w = 1.0 / m as f64;
        for x in points.chunks_exact(self.dim) {
            self.accumulate(x, w, &mut acc);
        }
        acc
    }

    /// Weighted embedding `sum_c w_c psi(x_c)`.
    pub fn weighted_embedding(&self, points: &[f64], weights: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.len];
        for (x, &w) in points.chunks_exact(self.dim).zip(weights) {
            if w != 0.0 {
                self.accumulate(x, w, &mut acc);
            }
        }
        acc
    }

    /// `<psi(x), coeffs>` and its gradient in `x`.
    pub fn contract(&self, coeffs: &[f64], x: &[f64], grad: Option<&mut [f64]>) -> f64 {
        let (values, derivs) = self.axis_tables(x);
        let value = self.contract_with(coeffs, &values, None);
        if let Some(grad) = grad {
            for (axis, g) in grad.iter_mut().enumerate() {
                *g = self.contract_with(coeffs, &values, Some((axis, &derivs)));
            }
        }
        value
    }

    /// Contracts the coefficient tensor with the per-axis tables, replacing
    /// the table of `swap.0` by its derivative table when given.
    fn contract_with(&self, coeffs: &[f64], values: &[f64], swap: Option<(usize, &[f64])>) -> f64 {
        let p = self.per_axis;
        let mut buf: Vec<f64> = coeffs.to_vec();
        for axis in (0..self.dim).rev() {
            let table = match swap {
                Some((a, derivs)) if a == axis => &derivs[axis * p..(axis + 1) * p],
                _ => &values[axis * p..(axis + 1) * p],
            };
            buf = buf
                .chunks_exact(p)
                .map(|chunk| chunk.iter().zip(table).map(|(c, t)| c * t).sum())
                .collect();
        }
        buf[0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn profile_values() {
        let k = CosineSeriesKernel::new(5);
        assert!((k.profile(0.0) - 3.9).abs() < 1e-14);
        assert!((k.profile(PI) - 7.0 / 30.0).abs() < 1e-14);
        let (lo, hi) = k.profile_range();
        assert!((hi - 3.9).abs() < 1e-12);
        assert!(lo > 0.0 && lo <= 7.0 / 30.0 + 1e-12);
    }

    #[test]
    fn features_reproduce_kernel() {
        let k = CosineSeriesKernel::new(5);
        let fm = k.feature_map(2);
        assert_eq!(fm.len(), 121);
        let x = [0.3, 5.1];
        let y = [2.2, 1.7];
        let mut px = vec![0.0; fm.len()];
        fm.accumulate(&x, 1.0, &mut px);
        let mut grad = [0.0; 2];
        let v = fm.contract(&px, &y, Some(&mut grad));
        assert!((v - k.eval(&x, &y)).abs() < 1e-12);
        // d/dy k(x, y) = -d/dx k(x, y) for translation-invariant k
        let gx = k.grad_x(&y, &x);
        assert!((grad[0] - gx[0]).abs() < 1e-12);
        assert!((grad[1] - gx[1]).abs() < 1e-12);
    }

    #[test]
    fn kernel_range_constant_and_default() {
        let c = CosineSeriesKernel::new(0);
        assert_eq!(c.kernel_range(2), (1.0, 1.0));
        let k = CosineSeriesKernel::new(5);
        let (inf, sup) = k.kernel_range(2);
        assert!((sup - 15.21).abs() < 1e-10);
        assert!((inf - (7.0f64 / 30.0).powi(2)).abs() < 1e-10);
    }

    #[test]
    fn rejects_negative_coefficients() {
        assert!(CosineSeriesKernel::with_coefficients(vec![1.0, -0.5], 2.0 * PI).is_err());
        assert!(CosineSeriesKernel::with_coefficients(vec![], 2.0 * PI).is_err());
    }
}
