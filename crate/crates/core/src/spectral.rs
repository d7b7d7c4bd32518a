//! Discrete Fourier machinery on the periodic box.
//!
//! Two conventions coexist, mirroring how the energy proofs manipulate
//! `<u^, (1 - I^) u^>`:
//!
//! * fields use the isometric convention: `Σ_ξ |u^(ξ)|^2 = ‖u‖_2^2`
//!   exactly (discrete Parseval);
//! * kernels use the mass convention: `J^(0) = ∫J`, so the convolution
//!   theorem reads `(J*u)^ = J^ · u^` with the field convention above.
//!
//! Frequencies are the torus frequencies `ξ = π m / L`, `m` integer in
//! `[-n/2, n/2)` per axis.

use crate::fft::{transform_axis, Complex, Fft};
use crate::grid::{Field, GridSpec};
use crate::kernels::ConvKernel;
use crate::math;
use crate::{Error, Result};
use alloc::vec::Vec;
use core::f64::consts::PI;

/// Complex spectrum of a field, stored in FFT index order; use
/// [`Spectrum::freq`] / [`Spectrum::xi_sq`] for the physical frequencies.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: GridSpec,
    coeffs: Vec<Complex>,
}

#[inline]
fn signed_freq(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// `|ξ|^2` at a flat spectral index of `grid`.
pub fn xi_sq_at(grid: &GridSpec, idx: usize) -> f64 {
    let scale = PI / grid.half_width();
    let n = grid.points_per_axis();
    let ix = grid.unravel(idx);
    let mut s = 0.0;
    for a in 0..grid.dim() {
        let xi = scale * signed_freq(ix[a], n) as f64;
        s += xi * xi;
    }
    s
}

impl Spectrum {
    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn coeffs(&self) -> &[Complex] {
        &self.coeffs
    }

    /// Signed integer frequency vector of a flat index.
    pub fn freq(&self, idx: usize) -> [i64; 3] {
        let n = self.grid.points_per_axis();
        let ix = self.grid.unravel(idx);
        let mut m = [0i64; 3];
        for a in 0..self.grid.dim() {
            m[a] = signed_freq(ix[a], n);
        }
        m
    }

    /// `|ξ|^2` at a flat index.
    pub fn xi_sq(&self, idx: usize) -> f64 {
        xi_sq_at(&self.grid, idx)
    }

    /// Coefficient at a signed frequency vector.
    pub fn coeff_at(&self, m: &[i64]) -> Complex {
        let n = self.grid.points_per_axis() as i64;
        let mut ix = [0usize; 3];
        for a in 0..self.grid.dim() {
            ix[a] = (((m[a] % n) + n) % n) as usize;
        }
        self.coeffs[self.grid.ravel(&ix[..self.grid.dim()])]
    }

    /// `Σ_ξ |u^(ξ)|^2`, equal to `‖u‖_2^2` by the isometric convention.
    pub fn l2_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sq()).sum()
    }
}

fn dft(grid: GridSpec, values: &[f64]) -> Vec<Complex> {
    let n = grid.points_per_axis();
    let mut data: Vec<Complex> = values.iter().map(|v| Complex::new(*v, 0.0)).collect();
    let fft = Fft::new(n);
    for axis in 0..grid.dim() {
        transform_axis(&fft, &mut data, grid.dim(), axis, false);
    }
    data
}

fn idft_real(grid: GridSpec, mut data: Vec<Complex>) -> Vec<f64> {
    let n = grid.points_per_axis();
    let fft = Fft::new(n);
    for axis in 0..grid.dim() {
        transform_axis(&fft, &mut data, grid.dim(), axis, true);
    }
    data.iter().map(|c| c.re).collect()
}

/// Forward transform with the isometric normalization.
pub fn forward(u: &Field) -> Spectrum {
    let grid = u.grid();
    let alpha = math::sqrt(grid.cell_volume() / grid.len() as f64);
    let mut coeffs = dft(grid, u.values());
    for c in coeffs.iter_mut() {
        *c = c.scale(alpha);
    }
    Spectrum { grid, coeffs }
}

/// Inverse of [`forward`]; the imaginary part of the result is dropped
/// (spectra of real fields are Hermitian, so it is roundoff).
pub fn inverse(s: &Spectrum) -> Result<Field> {
    let grid = s.grid;
    let alpha = math::sqrt(grid.cell_volume() / grid.len() as f64);
    let data: Vec<Complex> = s.coeffs.iter().map(|c| c.scale(1.0 / alpha)).collect();
    Field::new(grid, idft_real(grid, data))
}

/// Real symbol `J^(ξ) = h^N Σ_z J(z) e^{-i ξ·z}` of an even kernel,
/// stored over FFT-ordered frequencies with `mass = J^(0) = ∫J`.
#[derive(Debug, Clone)]
pub struct KernelSymbol {
    grid: GridSpec,
    values: Vec<f64>,
    mass: f64,
}

impl KernelSymbol {
    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `J^(0) = ∫J`.
    #[inline]
    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// `|ξ|^2` at a flat index (same layout as [`Spectrum`]).
    pub fn xi_sq(&self, idx: usize) -> f64 {
        xi_sq_at(&self.grid, idx)
    }

    /// Same symbol scaled to `J^(0) = 1`.
    pub fn normalized(&self) -> Result<KernelSymbol> {
        if !(self.mass > 0.0) {
            return Err(Error::DegenerateKernel(
                "symbol mass must be positive".into(),
            ));
        }
        Ok(KernelSymbol {
            grid: self.grid,
            values: self.values.iter().map(|v| v / self.mass).collect(),
            mass: 1.0,
        })
    }
}

/// Symbol of an even convolution kernel. The offset grid is centered at
/// `z = 0` (index `n/2` per axis), hence the `(-1)^{Σ m_a}` twist on the
/// raw DFT.
pub fn kernel_symbol(kernel: &ConvKernel) -> Result<KernelSymbol> {
    if !kernel.is_even() {
        return Err(Error::Unsupported(
            "kernel symbol requires an even kernel (symbol would be complex)".into(),
        ));
    }
    let grid = kernel.grid();
    let hn = grid.cell_volume();
    let data = dft(grid, kernel.profile());
    let mut values = Vec::with_capacity(grid.len());
    for (idx, c) in data.iter().enumerate() {
        let ix = grid.unravel(idx);
        let parity: usize = (0..grid.dim()).map(|a| ix[a]).sum();
        let sign = if parity % 2 == 0 { 1.0 } else { -1.0 };
        values.push(sign * hn * c.re);
    }
    let mass = values[0];
    Ok(KernelSymbol { grid, values, mass })
}

/// The constant `C1` of the symbol bound
/// `(1 - J^(ξ))^{-1} <= C1 max{1, |ξ|^{-2}}` over nonzero grid
/// frequencies, for a normalized symbol.
pub fn symbol_lower_bound_constant(symbol: &KernelSymbol) -> Result<f64> {
    if math::abs(symbol.mass() - 1.0) > 1e-9 {
        return Err(Error::InvalidParameter(
            "symbol must be normalized to J^(0) = 1".into(),
        ));
    }
    let mut c1 = 0.0f64;
    for idx in 1..symbol.grid().len() {
        let denom = 1.0 - symbol.values()[idx];
        if denom <= 0.0 {
            return Err(Error::DegenerateKernel(
                "symbol reaches 1 at a nonzero frequency; no lower bound".into(),
            ));
        }
        let xi_sq = symbol.xi_sq(idx);
        c1 = c1.max(xi_sq.min(1.0) / denom);
    }
    Ok(c1)
}

/// Spectral circular convolution `J * u` (exact at the discrete level).
pub fn convolve(symbol: &KernelSymbol, u: &Field) -> Result<Field> {
    if symbol.grid() != u.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = u.grid();
    let mut data = dft(grid, u.values());
    for (c, s) in data.iter_mut().zip(symbol.values()) {
        *c = c.scale(*s);
    }
    Field::new(grid, idft_real(grid, data))
}

/// Apply a real frequency multiplier `m(J^(ξ))` derived from a kernel
/// symbol (e.g. the exact propagator `exp(dt (J^(ξ) - J^(0)))`).
pub fn apply_symbol_multiplier(
    u: &Field,
    symbol: &KernelSymbol,
    mut m: impl FnMut(f64) -> f64,
) -> Result<Field> {
    if symbol.grid() != u.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = u.grid();
    let mut data = dft(grid, u.values());
    for (c, s) in data.iter_mut().zip(symbol.values()) {
        *c = c.scale(m(*s));
    }
    Field::new(grid, idft_real(grid, data))
}

/// Apply a real frequency multiplier `m(|ξ|^2)` (e.g. the heat semigroup
/// `exp(-t |ξ|^2)`).
pub fn apply_xi_multiplier(u: &Field, mut m: impl FnMut(f64) -> f64) -> Result<Field> {
    let grid = u.grid();
    let mut data = dft(grid, u.values());
    for (idx, c) in data.iter_mut().enumerate() {
        *c = c.scale(m(xi_sq_at(&grid, idx)));
    }
    Field::new(grid, idft_real(grid, data))
}

/// `D^k u = -(-Δ)^{k/2} u`: multiplier `-|ξ|^k` for `k > 0`; `D^0` is the
/// identity by convention (the sign is immaterial in every norm used).
pub fn fractional_derivative(u: &Field, k: f64) -> Result<Field> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!(
            "derivative order {k} must be >= 0"
        )));
    }
    if k == 0.0 {
        return Ok(u.clone());
    }
    apply_xi_multiplier(u, |xi_sq| -math::powf(xi_sq, 0.5 * k))
}

/// Spectral gradient; component `j` has spectrum `i ξ_j u^(ξ)` with the
/// Nyquist plane zeroed so the result is real.
pub fn gradient(u: &Field) -> Result<Vec<Field>> {
    let grid = u.grid();
    let n = grid.points_per_axis();
    let scale = PI / grid.half_width();
    let base = dft(grid, u.values());
    let mut out = Vec::with_capacity(grid.dim());
    for axis in 0..grid.dim() {
        let mut data = base.clone();
        for (idx, c) in data.iter_mut().enumerate() {
            let m = signed_freq(grid.unravel(idx)[axis], n);
            if m == -(n as i64) / 2 {
                *c = Complex::ZERO;
            } else {
                let xi = scale * m as f64;
                // multiply by i*xi
                *c = Complex::new(-xi * c.im, xi * c.re);
            }
        }
        out.push(Field::new(grid, idft_real(grid, data))?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::lp_norm;
    use crate::kernels::{make_standard_kernel, ConvKernel, KernelKind};
    use crate::rng::Rng;

    fn grid1(l: f64, n: usize) -> GridSpec {
        GridSpec::new(1, l, n).unwrap()
    }

    fn random_field(grid: GridSpec, seed: u64) -> Field {
        let mut r = Rng::new(seed);
        Field::from_fn(grid, |_| r.range(-1.0, 1.0)).unwrap()
    }

    #[test]
    fn roundtrip_identity() {
        for (dim, n) in [(1usize, 256usize), (2, 32), (3, 8)] {
            let g = GridSpec::new(dim, 3.0, n).unwrap();
            let u = random_field(g, 17);
            let v = inverse(&forward(&u)).unwrap();
            let scale = u.max_abs();
            for (a, b) in u.values().iter().zip(v.values()) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn delta_field_has_flat_spectrum_magnitude() {
        let g = grid1(2.0, 64);
        let mut vals = alloc::vec![0.0; g.len()];
        vals[13] = 1.0 / g.cell_volume();
        let u = Field::new(g, vals).unwrap();
        let s = forward(&u);
        let m0 = s.coeffs()[0].norm_sq();
        for c in s.coeffs() {
            assert!((c.norm_sq() - m0).abs() <= 1e-12 * m0);
        }
    }

    #[test]
    fn pure_cosine_has_two_modes() {
        let g = grid1(4.0, 128);
        let l = g.half_width();
        let u = Field::from_fn(g, |x| (PI * x[0] / l).cos()).unwrap();
        let s = forward(&u);
        let peak = math::sqrt(s.coeff_at(&[1]).norm_sq());
        assert!(peak > 0.0);
        for idx in 0..g.len() {
            let m = s.freq(idx)[0];
            let mag = math::sqrt(s.coeffs()[idx].norm_sq());
            if m == 1 || m == -1 {
                assert!((mag - peak).abs() <= 1e-12 * peak);
            } else {
                assert!(mag <= 1e-12 * peak);
            }
        }
    }

    #[test]
    fn parseval_isometry() {
        let g = GridSpec::new(2, 2.5, 32).unwrap();
        let u = random_field(g, 23);
        let l2 = lp_norm(&u, 2.0).unwrap();
        let spec = forward(&u).l2_sq();
        assert!((spec - l2 * l2).abs() <= 1e-12 * l2 * l2);
    }

    #[test]
    fn hermitian_symmetry_of_real_fields() {
        let g = grid1(2.0, 64);
        let u = random_field(g, 29);
        let s = forward(&u);
        for m in 1..31i64 {
            let a = s.coeff_at(&[m]);
            let b = s.coeff_at(&[-m]).conj();
            assert!((a.re - b.re).abs() <= 1e-12 && (a.im - b.im).abs() <= 1e-12);
        }
    }

    #[test]
    fn box_symbol_matches_sinc() {
        // place the kernel edge on a quadrature cell boundary so the
        // midpoint-sampled box is a second-order approximation of the
        // exact one; then J^(ξ) ~ sin(ξ)/(ξ) to O(h^2).
        let n = 1024usize;
        let h = 2.0 / 641.0;
        let g = grid1(n as f64 * h / 2.0, n);
        let k = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let sym = kernel_symbol(&k).unwrap().normalized().unwrap();
        for m in 1..=6usize {
            let xi = PI * m as f64 / g.half_width();
            let want = math::sin(xi) / xi;
            let got = sym.values()[m];
            assert!((got - want).abs() < 1e-4, "m={m} got {got} want {want}");
        }
    }

    #[test]
    fn symbol_zero_frequency_is_mass() {
        let g = grid1(4.0, 256);
        let k = make_standard_kernel(KernelKind::Bump, 1.0, 0.7, g).unwrap();
        let sym = kernel_symbol(&k).unwrap();
        assert!((sym.mass() - k.mass()).abs() <= 1e-12 * k.mass());
    }

    #[test]
    fn symbol_bounded_by_mass() {
        let g = grid1(4.0, 256);
        for kind in [
            KernelKind::Box,
            KernelKind::Bump,
            KernelKind::TruncatedGaussian,
        ] {
            let k = make_standard_kernel(kind, 1.0, 0.5, g).unwrap();
            let sym = kernel_symbol(&k).unwrap();
            for v in sym.values() {
                assert!(*v <= sym.mass() * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn discrete_delta_is_degenerate() {
        let g = grid1(2.0, 64);
        let mut profile = alloc::vec![0.0; g.len()];
        profile[g.len() / 2] = 1.0 / g.cell_volume(); // z = 0
        let k = ConvKernel::from_profile(g, profile, g.spacing()).unwrap();
        let sym = kernel_symbol(&k).unwrap().normalized().unwrap();
        assert!(matches!(
            symbol_lower_bound_constant(&sym),
            Err(Error::DegenerateKernel(_))
        ));
    }

    #[test]
    fn c1_dominates_each_sample() {
        let g = grid1(4.0, 512);
        let k = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let sym = kernel_symbol(&k).unwrap().normalized().unwrap();
        let c1 = symbol_lower_bound_constant(&sym).unwrap();
        let xi1 = sym.xi_sq(1);
        let sample = xi1.min(1.0) / (1.0 - sym.values()[1]);
        assert!(c1 >= sample);
        // post-hoc scan: 1 - J^ >= min{1, xi^2}/C1 at every nonzero frequency
        for idx in 1..g.len() {
            let lhs = 1.0 - sym.values()[idx];
            let rhs = sym.xi_sq(idx).min(1.0) / c1;
            assert!(lhs >= rhs * (1.0 - 1e-12));
        }
    }

    #[test]
    fn fractional_derivative_k0_is_identity() {
        let g = grid1(2.0, 64);
        let u = random_field(g, 31);
        let d = fractional_derivative(&u, 0.0).unwrap();
        assert_eq!(u.values(), d.values());
    }

    #[test]
    fn fractional_derivative_k2_is_laplacian_on_mode() {
        let g = grid1(4.0, 128);
        let l = g.half_width();
        let u = Field::from_fn(g, |x| (PI * x[0] / l).sin()).unwrap();
        let d = fractional_derivative(&u, 2.0).unwrap();
        let factor = -(PI / l) * (PI / l);
        for (a, b) in d.values().iter().zip(u.values()) {
            assert!((a - factor * b).abs() <= 1e-12);
        }
    }

    #[test]
    fn fractional_derivative_rejects_negative_order() {
        let g = grid1(2.0, 64);
        let u = Field::zeros(g);
        assert!(fractional_derivative(&u, -1.0).is_err());
    }

    #[test]
    fn d1_norm_matches_spectral_quadrature() {
        let g = grid1(8.0, 512);
        let u = Field::from_fn(g, |x| (-x[0] * x[0]).exp()).unwrap();
        let d1 = fractional_derivative(&u, 1.0).unwrap();
        let lhs = lp_norm(&d1, 2.0).unwrap();
        let s = forward(&u);
        let quad: f64 = (0..g.len())
            .map(|i| s.xi_sq(i) * s.coeffs()[i].norm_sq())
            .sum();
        assert!((lhs - math::sqrt(quad)).abs() < 1e-8);
    }

    #[test]
    fn fractional_derivative_composes() {
        let g = grid1(8.0, 256);
        let u = Field::from_fn(g, |x| (-x[0] * x[0] / 2.0).exp()).unwrap();
        for (k1, k2) in [(1.0, 1.0), (0.5, 1.5), (2.0, 1.0)] {
            let a = fractional_derivative(&fractional_derivative(&u, k2).unwrap(), k1).unwrap();
            let b = fractional_derivative(&u, k1 + k2).unwrap();
            let na = lp_norm(&a, 2.0).unwrap();
            let nb = lp_norm(&b, 2.0).unwrap();
            assert!((na - nb).abs() <= 1e-10 * nb.max(1.0));
        }
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = GridSpec::new(2, 2.0, 16).unwrap();
        let u = Field::constant(g, 3.5).unwrap();
        for comp in gradient(&u).unwrap() {
            assert!(comp.max_abs() <= 1e-12);
        }
    }

    #[test]
    fn gradient_of_pure_mode() {
        let g = grid1(4.0, 128);
        let l = g.half_width();
        let u = Field::from_fn(g, |x| (PI * x[0] / l).sin()).unwrap();
        let dx = &gradient(&u).unwrap()[0];
        for (idx, v) in dx.values().iter().enumerate() {
            let x = g.point(idx)[0];
            let want = (PI / l) * (PI * x / l).cos();
            assert!((v - want).abs() <= 1e-12);
        }
    }

    #[test]
    fn gradient_norm_matches_d1_for_bandlimited_fields() {
        let g = GridSpec::new(2, 3.0, 32).unwrap();
        let l = g.half_width();
        let u = Field::from_fn(g, |x| {
            (PI * x[0] / l).sin() * (2.0 * PI * x[1] / l).cos() + 0.3 * (PI * x[1] / l).sin()
        })
        .unwrap();
        let grads = gradient(&u).unwrap();
        let mut grad_sq = 0.0;
        for comp in &grads {
            let n = lp_norm(comp, 2.0).unwrap();
            grad_sq += n * n;
        }
        let d1 = fractional_derivative(&u, 1.0).unwrap();
        let d1_sq = lp_norm(&d1, 2.0).unwrap().powi(2);
        assert!((grad_sq - d1_sq).abs() <= 1e-10 * d1_sq.max(1.0));
    }
}
