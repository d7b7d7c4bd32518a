//! Uniform periodic grids in dimension 1..3, discrete fields, and the
//! midpoint quadrature behind every norm in the crate.
//!
//! The box is `[-L, L)^N` sampled at `n` points per axis, `x_i = -L + i h`
//! with `h = 2L/n`. Flat storage is lexicographic row-major (last axis
//! fastest); this single canonical layout is what makes cross-module
//! equality tests meaningful.

use crate::math;
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;

/// Geometry of a uniform periodic grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    points_per_axis: usize,
}

impl GridSpec {
    /// `dim` in 1..=3, `half_width > 0`, `points_per_axis` a power of two >= 8.
    pub fn new(dim: usize, half_width: f64, points_per_axis: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidParameter(format!("dim {dim} not in 1..=3")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "half_width {half_width} must be positive and finite"
            )));
        }
        let n = points_per_axis;
        if n < 8 || !n.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "points_per_axis {n} must be a power of two >= 8"
            )));
        }
        Ok(GridSpec {
            dim,
            half_width,
            points_per_axis,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    #[inline]
    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    /// Mesh width `h = 2L/n`.
    #[inline]
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points_per_axis as f64
    }

    /// Total number of grid points `n^N`.
    #[inline]
    pub fn len(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature cell volume `h^N`.
    #[inline]
    pub fn cell_volume(&self) -> f64 {
        math::powi(self.spacing(), self.dim as i32)
    }

    /// Per-axis indices of a flat index (last axis fastest).
    #[inline]
    pub fn unravel(&self, mut idx: usize) -> [usize; 3] {
        let n = self.points_per_axis;
        let mut out = [0usize; 3];
        for a in (0..self.dim).rev() {
            out[a] = idx % n;
            idx /= n;
        }
        out
    }

    /// Flat index of per-axis indices.
    #[inline]
    pub fn ravel(&self, ix: &[usize]) -> usize {
        let n = self.points_per_axis;
        let mut idx = 0usize;
        for a in 0..self.dim {
            idx = idx * n + ix[a];
        }
        idx
    }

    /// Coordinate of per-axis index `i`: `-L + i h`.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.spacing()
    }

    /// Full coordinate vector of a flat index (unused components are 0).
    #[inline]
    pub fn point(&self, idx: usize) -> [f64; 3] {
        let ix = self.unravel(idx);
        let mut x = [0.0f64; 3];
        for a in 0..self.dim {
            x[a] = self.coord(ix[a]);
        }
        x
    }

    /// Sup-norm of the coordinate vector at a flat index.
    pub fn point_inf_norm(&self, idx: usize) -> f64 {
        let x = self.point(idx);
        let mut m = 0.0f64;
        for a in 0..self.dim {
            m = m.max(math::abs(x[a]));
        }
        m
    }

    /// Minimal-image (periodic) offset of a signed index difference, as a
    /// per-axis index into the offset grid. Used by kernel double sums.
    #[inline]
    pub fn wrap(&self, di: isize) -> usize {
        let n = self.points_per_axis as isize;
        (((di % n) + n) % n) as usize
    }
}

/// A real-valued function sampled on a grid. Values are immutable after
/// construction; evolution produces new fields.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: GridSpec,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "field length {} does not match grid size {}",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(
                "field contains a non-finite value".into(),
            ));
        }
        Ok(Field { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Field {
            grid,
            values: alloc::vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: GridSpec, c: f64) -> Result<Self> {
        Field::new(grid, alloc::vec![c; grid.len()])
    }

    /// Sample a function of the coordinate vector.
    pub fn from_fn(grid: GridSpec, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let x = grid.point(idx);
            values.push(f(&x[..grid.dim()]));
        }
        Field::new(grid, values)
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)))
    }

    pub fn scale(&self, alpha: f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Field {
        Field {
            grid: self.grid,
            values: self.values.iter().map(|v| f(*v)).collect(),
        }
    }
}

/// Midpoint-rule `L^p` norm, `(h^N Σ |u_i|^p)^{1/p}`. Requires `p >= 1`.
pub fn lp_norm(u: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "p {p} must be >= 1 and finite"
        )));
    }
    let mut sum = 0.0;
    if p == 1.0 {
        for v in u.values() {
            sum += math::abs(*v);
        }
    } else if p == 2.0 {
        for v in u.values() {
            sum += v * v;
        }
    } else {
        for v in u.values() {
            sum += math::powf(math::abs(*v), p);
        }
    }
    Ok(math::powf(u.grid().cell_volume() * sum, 1.0 / p))
}

/// Signed total mass `h^N Σ u_i`.
pub fn mass(u: &Field) -> f64 {
    let sum: f64 = u.values().iter().sum();
    u.grid().cell_volume() * sum
}

/// Absolute mass in the frame `‖x‖_∞ > L - margin`; the domain-truncation
/// monitor. Requires `0 < margin < L`.
pub fn boundary_mass(u: &Field, margin: f64) -> Result<f64> {
    let l = u.grid().half_width();
    if !(margin > 0.0 && margin < l) {
        return Err(Error::InvalidParameter(format!(
            "margin {margin} must lie in (0, {l})"
        )));
    }
    let cut = l - margin;
    let grid = u.grid();
    let mut sum = 0.0;
    for (idx, v) in u.values().iter().enumerate() {
        if grid.point_inf_norm(idx) > cut {
            sum += math::abs(*v);
        }
    }
    Ok(grid.cell_volume() * sum)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn grid1(l: f64, n: usize) -> GridSpec {
        GridSpec::new(1, l, n).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(0, 1.0, 64).is_err());
        assert!(GridSpec::new(4, 1.0, 64).is_err());
        assert!(GridSpec::new(1, 0.0, 64).is_err());
        assert!(GridSpec::new(1, 1.0, 48).is_err());
        assert!(GridSpec::new(1, 1.0, 4).is_err());
    }

    #[test]
    fn lp_norm_constant_field_is_exact() {
        // u = 1 on [-1,1), p = 2 -> sqrt(2); constant-field quadrature is exact.
        for n in [8usize, 64, 256] {
            let u = Field::constant(grid1(1.0, n), 1.0).unwrap();
            assert!((lp_norm(&u, 2.0).unwrap() - 2.0f64.sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn lp_norm_zero_field() {
        let u = Field::zeros(grid1(1.0, 32));
        assert_eq!(lp_norm(&u, 3.0).unwrap(), 0.0);
    }

    #[test]
    fn lp_norm_rejects_p_below_one() {
        let u = Field::zeros(grid1(1.0, 32));
        assert!(lp_norm(&u, 0.5).is_err());
    }

    #[test]
    fn gaussian_l1_matches_analytic_integral() {
        // ∫ exp(-x^2) dx = sqrt(pi); for a Gaussian the midpoint rule on a
        // wide box is accurate to far below 1e-10 (Poisson summation).
        let g = grid1(16.0, 1024);
        let u = Field::from_fn(g, |x| (-x[0] * x[0]).exp()).unwrap();
        let pi_sqrt = core::f64::consts::PI.sqrt();
        assert!((lp_norm(&u, 1.0).unwrap() - pi_sqrt).abs() < 1e-10);
        assert!((mass(&u) - pi_sqrt).abs() < 1e-10);
    }

    #[test]
    fn mass_constant_2d() {
        let g = GridSpec::new(2, 1.0, 16).unwrap();
        let u = Field::constant(g, 1.0).unwrap();
        assert!((mass(&u) - 4.0).abs() < 1e-13);
    }

    #[test]
    fn mass_of_odd_field_vanishes() {
        // grid pairs x_i <-> -x_i cancel; the lone unpaired sample at -L
        // needs the field to have died out there
        let g = grid1(8.0, 256);
        let u = Field::from_fn(g, |x| x[0] * (-x[0] * x[0]).exp()).unwrap();
        assert!(mass(&u).abs() < 1e-12);
    }

    #[test]
    fn boundary_mass_zero_for_interior_support() {
        let g = grid1(4.0, 128);
        let u = Field::from_fn(g, |x| if x[0].abs() < 2.0 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(boundary_mass(&u, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn boundary_mass_constant_half_box() {
        // u = 1, margin = L/2, N = 1: both frames of width L/2 carry mass L.
        let l = 4.0;
        let g = grid1(l, 256);
        let u = Field::constant(g, 1.0).unwrap();
        let got = boundary_mass(&u, l / 2.0).unwrap();
        // The cut at |x| > L/2 includes the sample at -L/2 or not depending
        // on parity; with x_i = -L + i h the count is exact: points with
        // |x_i| > L/2 strictly.
        let h = g.spacing();
        let expect: f64 = (0..g.len())
            .filter(|&i| g.point_inf_norm(i) > l / 2.0)
            .count() as f64
            * h;
        assert!((got - expect).abs() < 1e-13);
        assert!((got - l).abs() < 3.0 * h); // L up to edge-sample effects
    }

    #[test]
    fn boundary_mass_matches_masked_sum() {
        let g = GridSpec::new(2, 3.0, 32).unwrap();
        let mut r = Rng::new(9);
        let u = Field::from_fn(g, |_| r.range(-1.0, 1.0)).unwrap();
        let margin = 0.8;
        let cut = g.half_width() - margin;
        let mut brute = 0.0;
        for idx in 0..g.len() {
            let x = g.point(idx);
            if x[0].abs().max(x[1].abs()) > cut {
                brute += u.values()[idx].abs();
            }
        }
        brute *= g.cell_volume();
        assert!((boundary_mass(&u, margin).unwrap() - brute).abs() < 1e-14);
    }

    #[test]
    fn boundary_mass_rejects_bad_margin() {
        let u = Field::zeros(grid1(2.0, 32));
        assert!(boundary_mass(&u, 0.0).is_err());
        assert!(boundary_mass(&u, 2.0).is_err());
    }

    #[test]
    fn l1_dominates_mass() {
        let mut r = Rng::new(3);
        for _ in 0..20 {
            let g = grid1(2.0, 64);
            let u = Field::from_fn(g, |_| r.range(-1.0, 1.0)).unwrap();
            assert!(lp_norm(&u, 1.0).unwrap() >= mass(&u).abs() - 1e-15);
        }
    }

    #[test]
    fn lp_norm_is_homogeneous() {
        let mut r = Rng::new(4);
        let g = grid1(2.0, 64);
        let u = Field::from_fn(g, |_| r.range(-1.0, 1.0)).unwrap();
        for p in [1.0, 2.0, 2.5, 4.0] {
            let alpha = -3.7;
            let lhs = lp_norm(&u.scale(alpha), p).unwrap();
            let rhs = alpha.abs() * lp_norm(&u, p).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs());
        }
    }

    #[test]
    fn interpolation_inequality_on_random_fields() {
        // ‖u‖_{p/2} <= ‖u‖_1^{1/(p-1)} ‖u‖_p^{(p-2)/(p-1)} for p >= 2.
        let g = grid1(2.0, 128);
        for seed in 0..50u64 {
            let mut r = Rng::stream(11, seed);
            let u = Field::from_fn(g, |_| r.range(-2.0, 2.0)).unwrap();
            for p in [2.0f64, 2.5, 3.0, 4.0] {
                let lhs = lp_norm(&u, (p / 2.0).max(1.0)).unwrap();
                let n1 = lp_norm(&u, 1.0).unwrap();
                let np = lp_norm(&u, p).unwrap();
                let rhs = n1.powf(1.0 / (p - 1.0)) * np.powf((p - 2.0) / (p - 1.0));
                assert!(lhs <= rhs * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn ravel_unravel_roundtrip() {
        let g = GridSpec::new(3, 1.0, 8).unwrap();
        for idx in [0usize, 1, 7, 8, 63, 64, 511] {
            let ix = g.unravel(idx);
            assert_eq!(g.ravel(&ix[..3]), idx);
        }
    }
}
