//! Convolution kernels `J(x-y)`, two-point kernels `K(x,y)`, and their
//! validation: the positivity hypothesis `J >= r` on a ball, heat-scaling
//! rescalings, and the heterogeneous dispersal kernel.

use crate::grid::{Field, GridSpec};
use crate::math;
use crate::{Error, Result};
use alloc::format;
use alloc::vec::Vec;

/// Volume of the unit ball in dimension 1..3.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        1 => 2.0,
        2 => core::f64::consts::PI,
        3 => 4.0 * core::f64::consts::PI / 3.0,
        _ => f64::NAN,
    }
}

/// Analytic radial profile behind a sampled kernel; kept so kernels can be
/// rescaled or evaluated off-grid (dispersal) without interpolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelShape {
    /// `height` on `|z| < r_sup`.
    Box { height: f64 },
    /// `height * exp(1 - 1/(1 - (|z|/r_sup)^2))` on `|z| < r_sup`; peak = height.
    Bump { height: f64 },
    /// `exp(-|z|^2 / scale^2)` cut at `|z| < r_sup`.
    TruncatedGaussian { scale: f64 },
    /// Samples only; off-grid evaluation unavailable.
    Custom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Box,
    Bump,
    TruncatedGaussian,
}

impl KernelShape {
    /// Evaluate the profile at radius `rho >= 0` with support radius `r_sup`.
    pub fn eval(&self, rho: f64, r_sup: f64) -> Option<f64> {
        if rho >= r_sup {
            return Some(0.0);
        }
        match self {
            KernelShape::Box { height } => Some(*height),
            KernelShape::Bump { height } => {
                let t = rho / r_sup;
                Some(height * math::exp(1.0 - 1.0 / (1.0 - t * t)))
            }
            KernelShape::TruncatedGaussian { scale } => {
                Some(math::exp(-(rho * rho) / (scale * scale)))
            }
            KernelShape::Custom => None,
        }
    }
}

/// Translation-invariant kernel sampled at the grid offsets `z in [-L, L)^N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel {
    grid: GridSpec,
    profile: Vec<f64>,
    support_radius: f64,
    is_even: bool,
    shape: KernelShape,
}

impl ConvKernel {
    /// Wrap a sampled profile. Checks nonnegativity, the support radius,
    /// and evenness of the samples.
    pub fn from_profile(grid: GridSpec, profile: Vec<f64>, support_radius: f64) -> Result<Self> {
        Self::build(grid, profile, support_radius, KernelShape::Custom)
    }

    fn build(
        grid: GridSpec,
        profile: Vec<f64>,
        support_radius: f64,
        shape: KernelShape,
    ) -> Result<Self> {
        if profile.len() != grid.len() {
            return Err(Error::InvalidParameter(
                "kernel profile length does not match grid".into(),
            ));
        }
        if !(support_radius > 0.0 && support_radius < grid.half_width()) {
            return Err(Error::InvalidParameter(format!(
                "support radius {support_radius} must lie in (0, L)"
            )));
        }
        for (idx, v) in profile.iter().enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(Error::InvalidParameter(
                    "kernel profile must be nonnegative and finite".into(),
                ));
            }
            if *v > 0.0 && offset_norm_sq(&grid, idx) > support_radius * support_radius {
                return Err(Error::InvalidParameter(
                    "kernel profile nonzero outside its support radius".into(),
                ));
            }
        }
        let is_even = profile_is_even(&grid, &profile);
        Ok(ConvKernel {
            grid,
            profile,
            support_radius,
            is_even,
            shape,
        })
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn profile(&self) -> &[f64] {
        &self.profile
    }

    #[inline]
    pub fn support_radius(&self) -> f64 {
        self.support_radius
    }

    #[inline]
    pub fn is_even(&self) -> bool {
        self.is_even
    }

    #[inline]
    pub fn shape(&self) -> KernelShape {
        self.shape
    }

    /// Quadrature mass `h^N Σ J(z)`.
    pub fn mass(&self) -> f64 {
        self.grid.cell_volume() * self.profile.iter().sum::<f64>()
    }

    /// `J` at the minimal-image offset `x_i - x_j`, via the flat indices.
    #[inline]
    pub fn offset_value(&self, i: usize, j: usize) -> f64 {
        let n = self.grid.points_per_axis();
        let half = n / 2;
        let ii = self.grid.unravel(i);
        let jj = self.grid.unravel(j);
        let mut k = [0usize; 3];
        for a in 0..self.grid.dim() {
            k[a] = (ii[a] + n + half - jj[a]) % n;
        }
        self.profile[self.grid.ravel(&k[..self.grid.dim()])]
    }

    /// Second moment `(1/2)∫ J(z) z_N^2 dz` by quadrature (last axis).
    pub fn half_second_moment(&self) -> f64 {
        let axis = self.grid.dim() - 1;
        let mut sum = 0.0;
        for (idx, v) in self.profile.iter().enumerate() {
            if *v != 0.0 {
                let z = self.grid.point(idx)[axis];
                sum += v * z * z;
            }
        }
        0.5 * self.grid.cell_volume() * sum
    }
}

fn offset_norm_sq(grid: &GridSpec, idx: usize) -> f64 {
    let x = grid.point(idx);
    let mut s = 0.0;
    for a in 0..grid.dim() {
        s += x[a] * x[a];
    }
    s
}

fn profile_is_even(grid: &GridSpec, profile: &[f64]) -> bool {
    let n = grid.points_per_axis();
    for idx in 0..grid.len() {
        let ix = grid.unravel(idx);
        // the -L plane has no mirror sample; evenness requires 0 there
        if (0..grid.dim()).any(|a| ix[a] == 0) {
            if profile[idx] != 0.0 {
                return false;
            }
            continue;
        }
        let mut mi = [0usize; 3];
        for a in 0..grid.dim() {
            mi[a] = n - ix[a];
        }
        if profile[grid.ravel(&mi[..grid.dim()])] != profile[idx] {
            return false;
        }
    }
    true
}

/// Certified lower-bound data for a kernel: `J(z) >= r` for `|z| < R`,
/// plus the integral bound `C_K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelBounds {
    pub r: f64,
    pub radius: f64,
    pub c_k: f64,
}

/// Build one of the standard test kernels, sampled on `grid`.
///
/// `height_or_scale` is the plateau height for `box` and `bump` and the
/// Gaussian width for `truncated_gaussian` (unit peak).
pub fn make_standard_kernel(
    kind: KernelKind,
    r_sup: f64,
    height_or_scale: f64,
    grid: GridSpec,
) -> Result<ConvKernel> {
    if !(r_sup > 0.0 && r_sup < grid.half_width()) {
        return Err(Error::InvalidParameter(format!(
            "kernel support radius {r_sup} must lie in (0, L = {})",
            grid.half_width()
        )));
    }
    if !(height_or_scale > 0.0 && height_or_scale.is_finite()) {
        return Err(Error::InvalidParameter(
            "kernel height/scale must be positive".into(),
        ));
    }
    let shape = match kind {
        KernelKind::Box => KernelShape::Box {
            height: height_or_scale,
        },
        KernelKind::Bump => KernelShape::Bump {
            height: height_or_scale,
        },
        KernelKind::TruncatedGaussian => KernelShape::TruncatedGaussian {
            scale: height_or_scale,
        },
    };
    let mut profile = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let rho = math::sqrt(offset_norm_sq(&grid, idx));
        profile.push(shape.eval(rho, r_sup).unwrap());
    }
    ConvKernel::build(grid, profile, r_sup, shape)
}

/// Check the lower-bound hypothesis on the ball `|z| < R_test` and return
/// the certified `(r, R, C_K)` triple.
pub fn verify_hypothesis_j(kernel: &ConvKernel, r_test: f64) -> Result<KernelBounds> {
    if !(r_test > 0.0 && r_test <= kernel.support_radius()) {
        return Err(Error::InvalidParameter(format!(
            "R_test {r_test} must lie in (0, support radius {}]",
            kernel.support_radius()
        )));
    }
    let grid = kernel.grid();
    let mut r = f64::INFINITY;
    let mut seen = false;
    for (idx, v) in kernel.profile().iter().enumerate() {
        if offset_norm_sq(&grid, idx) < r_test * r_test {
            seen = true;
            if *v < r {
                r = *v;
            }
        }
    }
    if !seen {
        return Err(Error::InvalidParameter(
            "R_test is below the grid resolution; no offsets sampled".into(),
        ));
    }
    if r <= 0.0 {
        return Err(Error::HypothesisViolated(format!(
            "kernel vanishes inside |z| < {r_test}"
        )));
    }
    Ok(KernelBounds {
        r,
        radius: r_test,
        c_k: kernel.mass(),
    })
}

/// Heat-scaling rescaling `J_eps(z) = C(J)/eps^{N+2} J(z/eps)` with the
/// second-moment normalization `C(J)^{-1} = (1/2)∫ J z_N^2`.
#[derive(Debug, Clone)]
pub struct RescaledKernel {
    base: ConvKernel,
    epsilon: f64,
    normalization: f64,
    resampled: ConvKernel,
}

impl RescaledKernel {
    #[inline]
    pub fn base(&self) -> &ConvKernel {
        &self.base
    }

    #[inline]
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `C(J)`.
    #[inline]
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// The rescaled kernel sampled on the grid.
    #[inline]
    pub fn kernel(&self) -> &ConvKernel {
        &self.resampled
    }
}

pub fn rescale_kernel(kernel: &ConvKernel, epsilon: f64) -> Result<RescaledKernel> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon {epsilon} must lie in (0, 1]"
        )));
    }
    let grid = kernel.grid();
    let scaled_sup = epsilon * kernel.support_radius();
    if scaled_sup >= grid.half_width() {
        return Err(Error::InvalidParameter(
            "rescaled support exceeds the box".into(),
        ));
    }
    if kernel.shape() == KernelShape::Custom {
        return Err(Error::Unsupported(
            "rescaling needs an analytic kernel shape".into(),
        ));
    }
    let half_m2 = kernel.half_second_moment();
    if !(half_m2 > 0.0) {
        return Err(Error::DegenerateKernel(
            "kernel second moment vanishes".into(),
        ));
    }
    let normalization = 1.0 / half_m2;
    let dim = grid.dim() as i32;
    let amp = normalization / math::powi(epsilon, dim + 2);
    let mut profile = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let rho = math::sqrt(offset_norm_sq(&grid, idx));
        let v = kernel
            .shape()
            .eval(rho / epsilon, kernel.support_radius())
            .unwrap();
        profile.push(amp * v);
    }
    let resampled = ConvKernel::build(grid, profile, scaled_sup, KernelShape::Custom)?;
    Ok(RescaledKernel {
        base: kernel.clone(),
        epsilon,
        normalization,
        resampled,
    })
}

/// How the loss rate `sigma` of a two-point kernel was derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaMode {
    /// `sigma(x) = ∫ K(y, x) dy` (column sums): total mass is conserved.
    MassConserving,
    /// `sigma(x) = ∫ K(x, y) dy` (row sums): diffusion form.
    DiffusionForm,
    Custom,
}

/// Dense two-point kernel `K(x_i, x_j)`; row index = arrival `x`, column
/// index = departure `y`, matching `sigma(x) = ∫ K(y, x) dy`.
#[derive(Debug, Clone)]
pub struct GeneralKernel {
    grid: GridSpec,
    matrix: Vec<f64>,
    sigma: Field,
    sigma_mode: SigmaMode,
}

fn check_dense_size(grid: &GridSpec) -> Result<()> {
    let limit = match grid.dim() {
        1 => 2048,
        2 => 64,
        _ => {
            return Err(Error::Unsupported(
                "dense two-point kernels are limited to N <= 2".into(),
            ))
        }
    };
    if grid.points_per_axis() > limit {
        return Err(Error::InvalidParameter(format!(
            "dense kernel too large: n = {} exceeds {} for N = {}",
            grid.points_per_axis(),
            limit,
            grid.dim()
        )));
    }
    Ok(())
}

fn check_matrix(grid: &GridSpec, matrix: &[f64]) -> Result<()> {
    let m = grid.len();
    if matrix.len() != m * m {
        return Err(Error::InvalidParameter(
            "kernel matrix shape does not match grid".into(),
        ));
    }
    if matrix.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidParameter(
            "kernel matrix entries must be nonnegative and finite".into(),
        ));
    }
    Ok(())
}

impl GeneralKernel {
    /// Column-sum sigma: the evolution conserves mass exactly at the
    /// semi-discrete level.
    pub fn mass_conserving(grid: GridSpec, matrix: Vec<f64>) -> Result<Self> {
        check_dense_size(&grid)?;
        check_matrix(&grid, &matrix)?;
        let m = grid.len();
        let hn = grid.cell_volume();
        let mut sigma = alloc::vec![0.0; m];
        for i in 0..m {
            let row = &matrix[i * m..(i + 1) * m];
            for (j, v) in row.iter().enumerate() {
                sigma[j] += v;
            }
        }
        for s in sigma.iter_mut() {
            *s *= hn;
        }
        Ok(GeneralKernel {
            grid,
            matrix,
            sigma: Field::new(grid, sigma)?,
            sigma_mode: SigmaMode::MassConserving,
        })
    }

    /// Row-sum sigma: nonlocal diffusion form.
    pub fn diffusion_form(grid: GridSpec, matrix: Vec<f64>) -> Result<Self> {
        check_dense_size(&grid)?;
        check_matrix(&grid, &matrix)?;
        let m = grid.len();
        let hn = grid.cell_volume();
        let sigma: Vec<f64> = (0..m)
            .map(|i| hn * matrix[i * m..(i + 1) * m].iter().sum::<f64>())
            .collect();
        Ok(GeneralKernel {
            grid,
            matrix,
            sigma: Field::new(grid, sigma)?,
            sigma_mode: SigmaMode::DiffusionForm,
        })
    }

    pub fn custom(grid: GridSpec, matrix: Vec<f64>, sigma: Field) -> Result<Self> {
        check_dense_size(&grid)?;
        check_matrix(&grid, &matrix)?;
        if sigma.grid() != grid {
            return Err(Error::GridMismatch);
        }
        if sigma.values().iter().any(|v| *v < 0.0) {
            return Err(Error::InvalidParameter("sigma must be nonnegative".into()));
        }
        Ok(GeneralKernel {
            grid,
            matrix,
            sigma,
            sigma_mode: SigmaMode::Custom,
        })
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.grid.len() + j]
    }

    #[inline]
    pub fn sigma(&self) -> &Field {
        &self.sigma
    }

    #[inline]
    pub fn sigma_mode(&self) -> SigmaMode {
        self.sigma_mode
    }

    /// The integral operator `(Ku)(x_i) = h^N Σ_j K(x_i, x_j) u_j`.
    pub fn apply(&self, u: &Field) -> Result<Field> {
        if u.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let m = self.grid.len();
        let hn = self.grid.cell_volume();
        let mut out = alloc::vec![0.0; m];
        for (i, slot) in out.iter_mut().enumerate() {
            let row = &self.matrix[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for (v, u_j) in row.iter().zip(u.values()) {
                acc += v * u_j;
            }
            *slot = hn * acc;
        }
        Field::new(self.grid, out)
    }

    /// `sup_x ∫ K(x, y) dy` (rows) and `sup_y ∫ K(x, y) dx` (columns).
    pub fn integral_bounds(&self) -> (f64, f64) {
        let m = self.grid.len();
        let hn = self.grid.cell_volume();
        let mut row_max = 0.0f64;
        let mut col = alloc::vec![0.0f64; m];
        for i in 0..m {
            let r = &self.matrix[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for (j, v) in r.iter().enumerate() {
                acc += v;
                col[j] += v;
            }
            row_max = row_max.max(hn * acc);
        }
        let col_max = col.iter().fold(0.0f64, |a, b| a.max(hn * *b));
        (row_max, col_max)
    }

    /// Existence bound `C_K = max(row, column integral sup)`.
    pub fn c_k(&self) -> f64 {
        let (r, c) = self.integral_bounds();
        r.max(c)
    }

    /// Worst relative defect of `sigma` against exact column sums; zero for
    /// a kernel whose evolution conserves mass.
    pub fn mass_conservation_defect(&self) -> f64 {
        let m = self.grid.len();
        let hn = self.grid.cell_volume();
        let mut col = alloc::vec![0.0f64; m];
        for i in 0..m {
            for (j, v) in self.matrix[i * m..(i + 1) * m].iter().enumerate() {
                col[j] += v;
            }
        }
        let mut worst = 0.0f64;
        for (j, s) in self.sigma.values().iter().enumerate() {
            let want = hn * col[j];
            let scale = s.abs().max(want.abs()).max(1e-300);
            worst = worst.max((s - want).abs() / scale);
        }
        worst
    }
}

/// Dense two-point kernel `K(x, y) = J(x - y)` assembled from a
/// convolution kernel via minimal-image offsets. With column-sum sigma
/// the evolution matches the convolution equation exactly at the
/// semi-discrete level.
pub fn general_from_conv(kernel: &ConvKernel) -> Result<GeneralKernel> {
    let grid = kernel.grid();
    check_dense_size(&grid)?;
    let m = grid.len();
    let mut matrix = alloc::vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            matrix[i * m + j] = kernel.offset_value(i, j);
        }
    }
    GeneralKernel::mass_conserving(grid, matrix)
}

/// Minimal positive entry over pairs with minimal-image `|x_i - x_j| < R_test`,
/// as a `KernelBounds` certificate for a two-point kernel.
pub fn verify_hypothesis_general(kernel: &GeneralKernel, r_test: f64) -> Result<KernelBounds> {
    let grid = kernel.grid();
    if !(r_test > 0.0 && r_test < grid.half_width()) {
        return Err(Error::InvalidParameter("R_test must lie in (0, L)".into()));
    }
    let m = grid.len();
    let mut r = f64::INFINITY;
    let mut seen = false;
    for i in 0..m {
        for j in 0..m {
            if minimal_image_dist_sq(&grid, i, j) < r_test * r_test {
                seen = true;
                r = r.min(kernel.entry(i, j));
            }
        }
    }
    if !seen {
        return Err(Error::InvalidParameter(
            "R_test is below the grid resolution".into(),
        ));
    }
    if r <= 0.0 {
        return Err(Error::HypothesisViolated(format!(
            "kernel vanishes for some |x-y| < {r_test}"
        )));
    }
    Ok(KernelBounds {
        r,
        radius: r_test,
        c_k: kernel.c_k(),
    })
}

/// Squared minimal-image distance between two grid points.
pub fn minimal_image_dist_sq(grid: &GridSpec, i: usize, j: usize) -> f64 {
    let n = grid.points_per_axis() as isize;
    let h = grid.spacing();
    let ii = grid.unravel(i);
    let jj = grid.unravel(j);
    let mut s = 0.0;
    for a in 0..grid.dim() {
        let mut d = ii[a] as isize - jj[a] as isize;
        if d < -n / 2 {
            d += n;
        } else if d >= n / 2 {
            d -= n;
        }
        let dz = d as f64 * h;
        s += dz * dz;
    }
    s
}

/// Dispersal kernel `K(x, y) = J((x-y)/g(y)) / g(y)` in one dimension.
///
/// Columns are rescaled to integrate exactly to one (making `sigma = 1`
/// mass-conserving at the discrete level); the raw quadrature defect is
/// returned alongside.
pub fn dispersal_kernel(kernel: &ConvKernel, g: &Field) -> Result<(GeneralKernel, f64)> {
    let grid = kernel.grid();
    if grid.dim() != 1 {
        return Err(Error::Unsupported(
            "dispersal model is one-dimensional".into(),
        ));
    }
    if g.grid() != grid {
        return Err(Error::GridMismatch);
    }
    if g.values().iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidParameter(
            "g must be strictly positive".into(),
        ));
    }
    if kernel.shape() == KernelShape::Custom {
        return Err(Error::Unsupported(
            "dispersal kernel needs an analytic kernel shape".into(),
        ));
    }
    let g_max = g.values().iter().fold(0.0f64, |a, b| a.max(*b));
    if g_max * kernel.support_radius() >= grid.half_width() {
        return Err(Error::InvalidParameter(
            "max(g) * support radius must stay below L".into(),
        ));
    }
    check_dense_size(&grid)?;
    let m = grid.len();
    let h = grid.spacing();
    let mut matrix = alloc::vec![0.0f64; m * m];
    for j in 0..m {
        let gj = g.values()[j];
        for i in 0..m {
            let d = math::sqrt(minimal_image_dist_sq(&grid, i, j));
            // The box profile is discontinuous, so pointwise sampling
            // leaves an O(h) column defect; use the exact cell average
            // (finite-volume value) instead. Smooth shapes sample
            // pointwise with superalgebraic quadrature accuracy.
            let v = match kernel.shape() {
                KernelShape::Box { height } => {
                    let s = kernel.support_radius() * gj;
                    let overlap = (d + 0.5 * h).min(s) - (d - 0.5 * h).max(-s);
                    height * overlap.max(0.0) / h
                }
                shape => shape.eval(d / gj, kernel.support_radius()).unwrap(),
            };
            matrix[i * m + j] = v / gj;
        }
    }
    // raw column-integral defect before correction
    let mut defect = 0.0f64;
    let mut col_sums = alloc::vec![0.0f64; m];
    for i in 0..m {
        for (j, v) in matrix[i * m..(i + 1) * m].iter().enumerate() {
            col_sums[j] += v;
        }
    }
    for s in &col_sums {
        defect = defect.max(math::abs(h * s - 1.0));
    }
    if defect > 1e-6 {
        return Err(Error::InvalidParameter(format!(
            "dispersal column integrals deviate from 1 by {defect:e} \
             (kernel mass not 1, or grid too coarse)"
        )));
    }
    for j in 0..m {
        let scale = 1.0 / (h * col_sums[j]);
        for i in 0..m {
            matrix[i * m + j] *= scale;
        }
    }
    let sigma = Field::constant(grid, 1.0)?;
    let kernel = GeneralKernel::custom(grid, matrix, sigma)?;
    Ok((kernel, defect))
}

/// Detailed-balance residual `max_{i,j} |K(x_i,x_j) u(x_j) - K(x_j,x_i) u(x_i)|`.
pub fn detailed_balance_residual(kernel: &GeneralKernel, u_inf: &Field) -> Result<f64> {
    if u_inf.grid() != kernel.grid() {
        return Err(Error::GridMismatch);
    }
    if u_inf.values().iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidParameter(
            "equilibrium must be strictly positive".into(),
        ));
    }
    let m = kernel.grid().len();
    let w = u_inf.values();
    let mut worst = 0.0f64;
    for i in 0..m {
        for j in (i + 1)..m {
            let d = math::abs(kernel.entry(i, j) * w[j] - kernel.entry(j, i) * w[i]);
            worst = worst.max(d);
        }
    }
    Ok(worst)
}
