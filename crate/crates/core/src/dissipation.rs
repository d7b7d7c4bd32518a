//! Energy dissipation functionals.
//!
//! The `L^p` dissipation of a convolution kernel is the double integral
//!
//! ```text
//! D_p(u) = (p/2) ∬ J(x-y) (u(x) - u(y)) (φ_{p-1}(u(x)) - φ_{p-1}(u(y))) dx dy
//! ```
//!
//! with `φ_q(s) = |s|^q sgn(s)`. The double sum is the ground-truth oracle;
//! the spectrally rearranged forms are the production path and must agree
//! with it (they are checked against each other in the tests and in the
//! acceptance suite).

use crate::grid::Field;
use crate::kernels::{ConvKernel, GeneralKernel};
use crate::math;
use crate::rng::Rng;
use crate::spectral::{self, forward, kernel_symbol};
use crate::{Error, Result};
use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

/// Antisymmetric power `φ_q(s) = |s|^q sgn(s)`, `q > 0`.
#[inline]
pub fn phi_power(s: f64, q: f64) -> f64 {
    debug_assert!(q > 0.0);
    if s == 0.0 {
        return 0.0;
    }
    math::copysign(math::powf(math::abs(s), q), s)
}

/// A convex entropy `Φ` with its derivative; convexity is spot-checked on
/// random triples at construction.
pub struct EntropySpec {
    phi: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    phi_prime: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    label: String,
}

impl EntropySpec {
    pub fn new(
        label: &str,
        phi: Box<dyn Fn(f64) -> f64 + Send + Sync>,
        phi_prime: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    ) -> Result<Self> {
        let mut rng = Rng::new(0x70c0_11e5);
        for _ in 0..100 {
            let mut a = rng.range(-5.0, 5.0);
            let mut b = rng.range(-5.0, 5.0);
            let mut c = rng.range(-5.0, 5.0);
            if a > b {
                core::mem::swap(&mut a, &mut b);
            }
            if b > c {
                core::mem::swap(&mut b, &mut c);
            }
            if a > b {
                core::mem::swap(&mut a, &mut b);
            }
            if c - a < 1e-9 {
                continue;
            }
            let t = (b - a) / (c - a);
            let chord = (1.0 - t) * phi(a) + t * phi(c);
            if phi(b) > chord + 1e-9 * (1.0 + chord.abs()) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "entropy {label} is not convex at ({a}, {b}, {c})"
                )));
            }
        }
        Ok(EntropySpec {
            phi,
            phi_prime,
            label: label.into(),
        })
    }

    /// `Φ(s) = |s|^p` with `Φ'(s) = p φ_{p-1}(s)`.
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(Error::InvalidParameter("entropy power needs p > 1".into()));
        }
        Self::new(
            "|s|^p",
            Box::new(move |s| math::powf(math::abs(s), p)),
            Box::new(move |s| p * phi_power(s, p - 1.0)),
        )
    }

    /// `Φ(s) = s^2`.
    pub fn square() -> Self {
        Self::new("s^2", Box::new(|s| s * s), Box::new(|s| 2.0 * s)).unwrap()
    }

    /// `Φ(s) = s^4`.
    pub fn fourth() -> Self {
        Self::new(
            "s^4",
            Box::new(|s| s * s * s * s),
            Box::new(|s| 4.0 * s * s * s),
        )
        .unwrap()
    }

    #[inline]
    pub fn phi(&self, s: f64) -> f64 {
        (self.phi)(s)
    }

    #[inline]
    pub fn phi_prime(&self, s: f64) -> f64 {
        (self.phi_prime)(s)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 2.0 && p.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!(
            "dissipation needs p >= 2, got {p}"
        )));
    }
    Ok(())
}

/// Literal double sum for a convolution kernel (minimal-image offsets).
/// Zero kernel entries are skipped; every retained term is identical to
/// the all-pairs transcription.
pub fn dissipation_direct(kernel: &ConvKernel, u: &Field, p: f64) -> Result<f64> {
    check_p(p)?;
    if u.grid() != kernel.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = u.grid();
    let m = grid.len();
    let n = grid.points_per_axis();
    let half = n / 2;
    // offsets with nonzero kernel value, as per-axis index shifts
    let mut support: Vec<(usize, f64)> = Vec::new();
    for (idx, v) in kernel.profile().iter().enumerate() {
        if *v != 0.0 {
            support.push((idx, *v));
        }
    }
    let vals = u.values();
    let phis: Vec<f64> = vals.iter().map(|v| phi_power(*v, p - 1.0)).collect();
    let mut total = 0.0;
    let mut shift = [0usize; 3];
    for i in 0..m {
        let ii = grid.unravel(i);
        let mut acc = 0.0;
        for (off_idx, jv) in &support {
            let oo = grid.unravel(*off_idx);
            // j such that offset(i, j) = z_off, i.e. j = i - (off - n/2)
            for a in 0..grid.dim() {
                shift[a] = (ii[a] + n + half - oo[a]) % n;
            }
            let j = grid.ravel(&shift[..grid.dim()]);
            acc += jv * (vals[i] - vals[j]) * (phis[i] - phis[j]);
        }
        total += acc;
    }
    let hn = grid.cell_volume();
    Ok(0.5 * p * hn * hn * total)
}

/// Literal double sum for a dense two-point kernel.
pub fn dissipation_direct_general(kernel: &GeneralKernel, u: &Field, p: f64) -> Result<f64> {
    check_p(p)?;
    if u.grid() != kernel.grid() {
        return Err(Error::GridMismatch);
    }
    let grid = u.grid();
    let m = grid.len();
    let vals = u.values();
    let phis: Vec<f64> = vals.iter().map(|v| phi_power(*v, p - 1.0)).collect();
    let mut total = 0.0;
    for i in 0..m {
        let row = &kernel.matrix()[i * m..(i + 1) * m];
        let mut acc = 0.0;
        for j in 0..m {
            acc += row[j] * (vals[i] - vals[j]) * (phis[i] - phis[j]);
        }
        total += acc;
    }
    let hn = grid.cell_volume();
    Ok(0.5 * p * hn * hn * total)
}

/// Rearranged form `p Σ φ_{p-1}(u) ((∫J) u - J*u) h^N` with the
/// convolution done spectrally; equals [`dissipation_direct`] for even `J`.
pub fn dissipation_fast(kernel: &ConvKernel, u: &Field, p: f64) -> Result<f64> {
    check_p(p)?;
    if !kernel.is_even() {
        return Err(Error::Unsupported(
            "fast dissipation requires an even kernel".into(),
        ));
    }
    if u.grid() != kernel.grid() {
        return Err(Error::GridMismatch);
    }
    let sym = kernel_symbol(kernel)?;
    let conv = spectral::convolve(&sym, u)?;
    let mass = sym.mass();
    let mut total = 0.0;
    for (v, c) in u.values().iter().zip(conv.values()) {
        total += phi_power(*v, p - 1.0) * (mass * v - c);
    }
    Ok(p * u.grid().cell_volume() * total)
}

/// Spectral dissipation of the fractional derivative:
/// `2 Σ_ξ (J^(0) - J^(ξ)) |ξ|^{2k} |u^(ξ)|^2`.
pub fn dissipation_dk(kernel: &ConvKernel, u: &Field, k: f64) -> Result<f64> {
    if !(k >= 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!(
            "derivative order {k} must be >= 0"
        )));
    }
    if u.grid() != kernel.grid() {
        return Err(Error::GridMismatch);
    }
    let sym = kernel_symbol(kernel)?;
    let s = forward(u);
    let mass = sym.mass();
    let mut total = 0.0;
    for idx in 0..u.grid().len() {
        let gap = mass - sym.values()[idx];
        let weight = if k == 0.0 {
            1.0
        } else {
            math::powf(s.xi_sq(idx), k)
        };
        total += gap * weight * s.coeffs()[idx].norm_sq();
    }
    Ok(2.0 * total)
}

/// Gradient dissipation `Σ_j D_2(∂_j u) = 2 Σ_ξ (J^(0) - J^(ξ)) |ξ|^2 |u^|^2`.
pub fn dissipation_gradient(kernel: &ConvKernel, u: &Field) -> Result<f64> {
    dissipation_dk(kernel, u, 1.0)
}

/// General relative-entropy dissipation for a mass-conserving kernel:
///
/// ```text
/// E(f) = h^{2N} Σ_i Σ_j K(x_i, x_j) u_inf(x_j)
///        [ Φ'(f_i)(f_i - f_j) - Φ(f_i) + Φ(f_j) ]
/// ```
///
/// Nonnegative for convex `Φ`.
pub fn relative_entropy_dissipation(
    kernel: &GeneralKernel,
    u_inf: &Field,
    f: &Field,
    spec: &EntropySpec,
) -> Result<f64> {
    if u_inf.grid() != kernel.grid() || f.grid() != kernel.grid() {
        return Err(Error::GridMismatch);
    }
    if u_inf.values().iter().any(|v| *v <= 0.0) {
        return Err(Error::InvalidParameter(
            "equilibrium weight must be strictly positive".into(),
        ));
    }
    if kernel.mass_conservation_defect() > 1e-9 {
        return Err(Error::InvalidParameter(
            "relative entropy dissipation needs a mass-conserving kernel".into(),
        ));
    }
    let grid = kernel.grid();
    let m = grid.len();
    let fv = f.values();
    let w = u_inf.values();
    let phis: Vec<f64> = fv.iter().map(|s| spec.phi(*s)).collect();
    let primes: Vec<f64> = fv.iter().map(|s| spec.phi_prime(*s)).collect();
    let mut total = 0.0;
    for i in 0..m {
        let row = &kernel.matrix()[i * m..(i + 1) * m];
        let mut acc = 0.0;
        for j in 0..m {
            let bracket = primes[i] * (fv[i] - fv[j]) - phis[i] + phis[j];
            acc += row[j] * w[j] * bracket;
        }
        total += acc;
    }
    let hn = grid.cell_volume();
    Ok(hn * hn * total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::kernels::{make_standard_kernel, KernelKind};
    use crate::rng::Rng;

    fn grid1(l: f64, n: usize) -> GridSpec {
        GridSpec::new(1, l, n).unwrap()
    }

    fn random_field(grid: GridSpec, seed: u64, lo: f64, hi: f64) -> Field {
        let mut r = Rng::new(seed);
        Field::from_fn(grid, |_| r.range(lo, hi)).unwrap()
    }

    #[test]
    fn phi_power_examples() {
        assert_eq!(phi_power(-2.0, 2.0), -4.0);
        assert_eq!(phi_power(0.0, 3.0), 0.0);
        assert!((phi_power(3.0, 1.5) - 3.0f64.powf(1.5)).abs() < 1e-14);
        assert_eq!(phi_power(-1.5, 1.0), -1.5);
    }

    #[test]
    fn direct_vanishes_on_constants() {
        let g = grid1(4.0, 64);
        let k = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let u = Field::constant(g, 2.3).unwrap();
        assert_eq!(dissipation_direct(&k, &u, 3.0).unwrap(), 0.0);
        assert!(dissipation_fast(&k, &u, 3.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn direct_is_sign_invariant() {
        let g = grid1(4.0, 64);
        let k = make_standard_kernel(KernelKind::Bump, 1.0, 1.0, g).unwrap();
        let u = random_field(g, 3, -1.0, 1.0);
        for p in [2.0, 3.0, 4.0] {
            let a = dissipation_direct(&k, &u, p).unwrap();
            let b = dissipation_direct(&k, &u.scale(-1.0), p).unwrap();
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        }
    }

    #[test]
    fn direct_matches_hand_expanded_sum() {
        // n = 16 indicator bump, p = 2: literal all-pairs scalar loop
        let g = grid1(2.0, 16);
        let k = make_standard_kernel(KernelKind::Box, 0.6, 1.0, g).unwrap();
        let u = Field::from_fn(g, |x| if x[0].abs() < 0.5 { 1.0 } else { 0.0 }).unwrap();
        let got = dissipation_direct(&k, &u, 2.0).unwrap();
        let m = g.len();
        let h = g.spacing();
        let mut brute = 0.0;
        for i in 0..m {
            for j in 0..m {
                let jv = k.offset_value(i, j);
                let (ui, uj) = (u.values()[i], u.values()[j]);
                brute += jv * (ui - uj) * (ui - uj);
            }
        }
        brute *= 0.5 * 2.0 * h * h;
        assert!((got - brute).abs() <= 1e-12 * brute.max(1e-300));
    }

    #[test]
    fn fast_matches_direct() {
        let g = grid1(4.0, 128);
        for kind in [
            KernelKind::Box,
            KernelKind::Bump,
            KernelKind::TruncatedGaussian,
        ] {
            let k = make_standard_kernel(kind, 1.0, 0.8, g).unwrap();
            for p in [2.0, 3.0, 4.0] {
                let u = random_field(g, 7 + p as u64, -1.0, 1.0);
                let a = dissipation_direct(&k, &u, p).unwrap();
                let b = dissipation_fast(&k, &u, p).unwrap();
                assert!(
                    (a - b).abs() <= 1e-8 * a.abs().max(1e-300),
                    "{kind:?} p={p}"
                );
            }
        }
    }

    #[test]
    fn fast_matches_direct_2d() {
        let g = GridSpec::new(2, 3.0, 32).unwrap();
        let k = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let u = random_field(g, 11, -1.0, 1.0);
        let a = dissipation_direct(&k, &u, 4.0).unwrap();
        let b = dissipation_fast(&k, &u, 4.0).unwrap();
        assert!((a - b).abs() <= 1e-8 * a.abs());
    }

    #[test]
    fn p2_spectral_identity() {
        // D_2(u) = 2 Σ (J^(0) - J^(ξ)) |u^|^2
        let g = grid1(4.0, 256);
        let k = make_standard_kernel(KernelKind::TruncatedGaussian, 1.0, 0.5, g).unwrap();
        let u = random_field(g, 13, -1.0, 1.0);
        let fast = dissipation_fast(&k, &u, 2.0).unwrap();
        let spectral_form = dissipation_dk(&k, &u, 0.0).unwrap();
        assert!((fast - spectral_form).abs() <= 1e-10 * fast);
    }

    #[test]
    fn dk_zero_equals_fast_p2() {
        let g = grid1(4.0, 128);
        let k = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let u = random_field(g, 17, -1.0, 1.0);
        let a = dissipation_dk(&k, &u, 0.0).unwrap();
        let b = dissipation_fast(&k, &u, 2.0).unwrap();
        assert!((a - b).abs() <= 1e-10 * b);
    }

    #[test]
    fn dk_one_matches_direct_on_derivative() {
        let g = grid1(8.0, 256);
        let k = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let u = Field::from_fn(g, |x| (-x[0] * x[0]).exp()).unwrap();
        let d1 = spectral::fractional_derivative(&u, 1.0).unwrap();
        let a = dissipation_dk(&k, &u, 1.0).unwrap();
        let b = dissipation_direct(&k, &d1, 2.0).unwrap();
        assert!((a - b).abs() <= 1e-8 * a);
    }

    #[test]
    fn dk_constant_field_vanishes() {
        let g = grid1(4.0, 64);
        let k = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let u = Field::constant(g, 1.0).unwrap();
        assert!(dissipation_dk(&k, &u, 1.5).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gradient_dissipation_identities() {
        let g = grid1(8.0, 256);
        let k = make_standard_kernel(KernelKind::Bump, 1.0, 1.0, g).unwrap();
        let u = Field::from_fn(g, |x| (-x[0] * x[0] / 2.0).exp()).unwrap();
        // N = 1: gradient and D^1 forms coincide
        let a = dissipation_gradient(&k, &u).unwrap();
        let b = dissipation_dk(&k, &u, 1.0).unwrap();
        assert!((a - b).abs() <= 1e-10 * a);
        let c = Field::constant(g, 5.0).unwrap();
        assert!(dissipation_gradient(&k, &c).unwrap().abs() < 1e-12);
    }

    #[test]
    fn gradient_dissipation_matches_component_sums_2d() {
        let g = GridSpec::new(2, 3.0, 32).unwrap();
        let k = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let l = g.half_width();
        let u = Field::from_fn(g, |x| {
            (core::f64::consts::PI * x[0] / l).sin()
                * (2.0 * core::f64::consts::PI * x[1] / l).cos()
        })
        .unwrap();
        let fast = dissipation_gradient(&k, &u).unwrap();
        // physical-space oracle: sum of per-component direct dissipations
        let grads = spectral::gradient(&u).unwrap();
        let mut brute = 0.0;
        for comp in &grads {
            brute += dissipation_direct(&k, comp, 2.0).unwrap();
        }
        assert!((fast - brute).abs() <= 1e-8 * fast.max(1e-300));
    }

    #[test]
    fn nonnegativity_on_random_fields() {
        let g = grid1(3.0, 64);
        let k = make_standard_kernel(KernelKind::Box, 0.8, 0.7, g).unwrap();
        for seed in 0..30u64 {
            let u = random_field(g, 100 + seed, -2.0, 2.0);
            for p in [2.0, 3.0, 4.0] {
                let d = dissipation_direct(&k, &u, p).unwrap();
                assert!(d >= -1e-12 * u.max_abs().powf(p));
            }
        }
    }

    #[test]
    fn modulus_monotonicity() {
        // D_p(u) >= D_p(|u|): the step that reduces proofs to u >= 0
        let g = grid1(3.0, 64);
        let k = make_standard_kernel(KernelKind::Bump, 0.8, 1.0, g).unwrap();
        for seed in 0..20u64 {
            let u = random_field(g, 200 + seed, -2.0, 2.0);
            let au = u.map(|v| v.abs());
            for p in [2.0, 3.0] {
                let d_signed = dissipation_direct(&k, &u, p).unwrap();
                let d_abs = dissipation_direct(&k, &au, p).unwrap();
                assert!(d_signed >= d_abs - 1e-12 * d_signed.abs().max(1.0));
            }
        }
    }

    #[test]
    fn elementary_pointwise_inequality() {
        // (|a|-|b|)(|a|^s-|b|^s) <= (a-b)(φ_s(a)-φ_s(b))
        let mut r = Rng::new(42);
        for _ in 0..10_000 {
            let a = r.range(-3.0, 3.0);
            let b = r.range(-3.0, 3.0);
            let s = r.range(1.0 + 1e-6, 4.0);
            let lhs = (a.abs() - b.abs()) * (a.abs().powf(s) - b.abs().powf(s));
            let rhs = (a - b) * (phi_power(a, s) - phi_power(b, s));
            assert!(lhs <= rhs + 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn scaling_law_under_grid_refinement() {
        // D^{J_λ}(u_λ) = λ^{2N} D^J(u) with λ = 2, u_λ(x) = u(x/λ).
        // Smooth well-resolved kernel and field, so both sides carry
        // quadrature error far below the 1e-6 comparison.
        let g1 = grid1(4.0, 128);
        let g2 = grid1(8.0, 256); // same h
        let j1 = make_standard_kernel(KernelKind::TruncatedGaussian, 1.0, 0.25, g1).unwrap();
        let j2 = make_standard_kernel(KernelKind::TruncatedGaussian, 2.0, 0.5, g2).unwrap();
        let f = |x: f64| (-x * x).exp() + 0.5 * (-(x - 0.7) * (x - 0.7) * 2.0).exp();
        let u1 = Field::from_fn(g1, |x| f(x[0])).unwrap();
        let u2 = Field::from_fn(g2, |x| f(x[0] / 2.0)).unwrap();
        let d1 = dissipation_direct(&j1, &u1, 2.0).unwrap();
        let d2 = dissipation_direct(&j2, &u2, 2.0).unwrap();
        assert!((d2 - 4.0 * d1).abs() <= 1e-6 * d2);
    }

    #[test]
    fn entropy_spec_rejects_nonconvex() {
        let bad = EntropySpec::new(
            "sqrt",
            Box::new(|s: f64| s.abs().sqrt()),
            Box::new(|s: f64| 0.5 / s.abs().max(1e-9).sqrt()),
        );
        assert!(bad.is_err());
    }

    #[test]
    fn relative_entropy_constant_f_vanishes() {
        let g = grid1(4.0, 64);
        let j = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let m = g.len();
        let mut matrix = alloc::vec![0.0; m * m];
        for i in 0..m {
            for jj in 0..m {
                matrix[i * m + jj] = j.offset_value(i, jj);
            }
        }
        let k = GeneralKernel::mass_conserving(g, matrix).unwrap();
        let ones = Field::constant(g, 1.0).unwrap();
        let f = Field::constant(g, 0.7).unwrap();
        let e = relative_entropy_dissipation(&k, &ones, &f, &EntropySpec::square()).unwrap();
        assert!(e.abs() < 1e-12);
    }

    #[test]
    fn relative_entropy_symmetrized_form_under_detailed_balance() {
        let g = grid1(4.0, 64);
        let j = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let w = Field::from_fn(g, |x| 1.0 + 0.4 * (0.9 * x[0]).cos()).unwrap();
        let m = g.len();
        let mut matrix = alloc::vec![0.0; m * m];
        for i in 0..m {
            for jj in 0..m {
                matrix[i * m + jj] = j.offset_value(i, jj) * w.values()[i];
            }
        }
        let k = GeneralKernel::mass_conserving(g, matrix).unwrap();
        assert!(crate::kernels::detailed_balance_residual(&k, &w).unwrap() < 1e-12);
        let mut r = Rng::new(77);
        let f = Field::from_fn(g, |_| r.range(0.1, 2.0)).unwrap();
        let p = 2.0;
        let e = relative_entropy_dissipation(&k, &w, &f, &EntropySpec::power(p).unwrap()).unwrap();
        // symmetrized form (p/2) ΣΣ (f_i - f_j)(φ_{p-1}(f_i) - φ_{p-1}(f_j)) K_ij w_j
        let h = g.spacing();
        let mut sym = 0.0;
        for i in 0..m {
            for jj in 0..m {
                let d = f.values()[i] - f.values()[jj];
                let dp = phi_power(f.values()[i], p - 1.0) - phi_power(f.values()[jj], p - 1.0);
                sym += d * dp * k.entry(i, jj) * w.values()[jj];
            }
        }
        sym *= 0.5 * p * h * h;
        assert!((e - sym).abs() <= 1e-10 * e.max(1e-300));
    }

    #[test]
    fn relative_entropy_reduces_to_convolution_dissipation() {
        let g = grid1(4.0, 64);
        let j = make_standard_kernel(KernelKind::Bump, 1.0, 1.0, g).unwrap();
        let m = g.len();
        let mut matrix = alloc::vec![0.0; m * m];
        for i in 0..m {
            for jj in 0..m {
                matrix[i * m + jj] = j.offset_value(i, jj);
            }
        }
        let k = GeneralKernel::mass_conserving(g, matrix).unwrap();
        let ones = Field::constant(g, 1.0).unwrap();
        let mut r = Rng::new(5);
        let f = Field::from_fn(g, |_| r.range(0.0, 2.0)).unwrap();
        for p in [2.0, 3.0] {
            let e = relative_entropy_dissipation(&k, &ones, &f, &EntropySpec::power(p).unwrap())
                .unwrap();
            let d = dissipation_direct(&j, &f, p).unwrap();
            assert!((e - d).abs() <= 1e-10 * d.max(1e-300));
        }
    }

    #[test]
    fn rejects_p_below_two() {
        let g = grid1(2.0, 32);
        let k = make_standard_kernel(KernelKind::Box, 0.5, 1.0, g).unwrap();
        let u = Field::zeros(g);
        assert!(dissipation_direct(&k, &u, 1.5).is_err());
        assert!(dissipation_fast(&k, &u, 1.9).is_err());
    }
}
