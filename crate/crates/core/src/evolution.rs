//! Time integration of the three equation families and the bookkeeping
//! behind the H-theorem checks.
//!
//! The convolution equation `∂t u = J*u - (∫J) u` is advanced with its
//! exact spectral propagator `exp(t (J^(ξ) - J^(0)))`, so every envelope
//! comparison sees no time-discretization error. General kernels use
//! classical RK4 under a stability guard; the operator is bounded, so the
//! guard keeps the step well inside the stability region.

use crate::dissipation::phi_power;
use crate::grid::{boundary_mass, lp_norm, mass, Field, GridSpec};
use crate::kernels::{ConvKernel, GeneralKernel};
use crate::math;
use crate::spectral::{self, kernel_symbol, KernelSymbol};
use crate::{Error, Result};
use alloc::boxed::Box;
use alloc::vec::Vec;

/// Fraction of the initial mass that the boundary frame may carry before
/// a run is flagged as truncation-breached.
pub const BREACH_FRACTION: f64 = 1e-6;

/// Locally Lipschitz source term with the dissipativity condition
/// `f(s) s <= 0`, spot-checked on a sample grid at construction.
pub struct SourceSpec {
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    sign_checked: bool,
}

impl SourceSpec {
    pub fn new(f: Box<dyn Fn(f64) -> f64 + Send + Sync>) -> Result<Self> {
        for k in 0..1000 {
            let s = -10.0 + 20.0 * k as f64 / 999.0;
            let v = f(s);
            if !v.is_finite() {
                return Err(Error::InvalidParameter(
                    "source is not finite on [-10, 10]".into(),
                ));
            }
            if v * s > 0.0 {
                return Err(Error::InvalidParameter(alloc::format!(
                    "source violates the sign condition at s = {s}: f(s) s = {}",
                    v * s
                )));
            }
        }
        Ok(SourceSpec {
            f,
            sign_checked: true,
        })
    }

    /// `f(s) = -s^3`.
    pub fn cubic_absorption() -> Self {
        Self::new(Box::new(|s| -s * s * s)).unwrap()
    }

    #[inline]
    pub fn eval(&self, s: f64) -> f64 {
        (self.f)(s)
    }

    #[inline]
    pub fn sign_checked(&self) -> bool {
        self.sign_checked
    }
}

/// Exact one-step propagator of the convolution equation on the discrete
/// torus: spectrum multiplied by `exp(dt (J^(ξ) - J^(0)))`.
pub fn step_spectral_exact(kernel: &ConvKernel, u: &Field, dt: f64) -> Result<Field> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let sym = kernel_symbol(kernel)?;
    step_with_symbol(&sym, u, dt)
}

/// Same as [`step_spectral_exact`] with a precomputed symbol.
pub fn step_with_symbol(sym: &KernelSymbol, u: &Field, dt: f64) -> Result<Field> {
    let mass = sym.mass();
    spectral::apply_symbol_multiplier(u, sym, |s| math::exp(dt * (s - mass)))
}

/// Exact heat semigroup `e^{tΔ}` on the discrete torus (comparison curve
/// for the rescaled runs).
pub fn heat_semigroup(u: &Field, t: f64) -> Result<Field> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter("t must be >= 0".into()));
    }
    spectral::apply_xi_multiplier(u, |xi_sq| math::exp(-t * xi_sq))
}

/// Stability guard for the RK4 stepper: `dt <= 1/(2 max(‖σ‖_∞, C_K))`.
pub fn rk4_dt_max(kernel: &GeneralKernel) -> f64 {
    let sigma_max = kernel.sigma().max_abs();
    let c_k = kernel.c_k();
    0.5 / sigma_max.max(c_k).max(1e-300)
}

fn rhs_general(kernel: &GeneralKernel, source: Option<&SourceSpec>, u: &[f64], out: &mut [f64]) {
    let grid = kernel.grid();
    let m = grid.len();
    let hn = grid.cell_volume();
    let sigma = kernel.sigma().values();
    for i in 0..m {
        let row = &kernel.matrix()[i * m..(i + 1) * m];
        let mut acc = 0.0;
        for (v, uj) in row.iter().zip(u) {
            acc += v * uj;
        }
        out[i] = hn * acc - sigma[i] * u[i];
    }
    if let Some(src) = source {
        for (o, v) in out.iter_mut().zip(u) {
            *o += src.eval(*v);
        }
    }
}

/// One classical fourth-order step of `du/dt = h^N K u - σ u + f(u)`.
pub fn step_rk4_general(
    kernel: &GeneralKernel,
    u: &Field,
    dt: f64,
    source: Option<&SourceSpec>,
) -> Result<Field> {
    if u.grid() != kernel.grid() {
        return Err(Error::GridMismatch);
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let dt_max = rk4_dt_max(kernel);
    if dt > dt_max {
        return Err(Error::StepRejected { dt, dt_max });
    }
    if let Some(src) = source {
        if !src.sign_checked() {
            return Err(Error::InvalidParameter("source not sign-checked".into()));
        }
    }
    let m = kernel.grid().len();
    let y = u.values();
    let mut k1 = alloc::vec![0.0; m];
    let mut k2 = alloc::vec![0.0; m];
    let mut k3 = alloc::vec![0.0; m];
    let mut k4 = alloc::vec![0.0; m];
    let mut tmp = alloc::vec![0.0; m];
    rhs_general(kernel, source, y, &mut k1);
    for i in 0..m {
        tmp[i] = y[i] + 0.5 * dt * k1[i];
    }
    rhs_general(kernel, source, &tmp, &mut k2);
    for i in 0..m {
        tmp[i] = y[i] + 0.5 * dt * k2[i];
    }
    rhs_general(kernel, source, &tmp, &mut k3);
    for i in 0..m {
        tmp[i] = y[i] + dt * k3[i];
    }
    rhs_general(kernel, source, &tmp, &mut k4);
    let sixth = dt / 6.0;
    let out: Vec<f64> = (0..m)
        .map(|i| y[i] + sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    Field::new(kernel.grid(), out)
}

/// Which equation a run integrates.
pub enum Equation<'a> {
    Convolution(&'a ConvKernel),
    General {
        kernel: &'a GeneralKernel,
        source: Option<&'a SourceSpec>,
    },
}

/// Sampling plan of a run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub horizon: f64,
    pub sample_dt: f64,
    /// norms recorded as `‖u‖_p^p`; 2 is always recorded
    pub p_list: Vec<f64>,
    /// derivative norms recorded as `‖D^k u‖_2^2`
    pub k_list: Vec<f64>,
    /// frame width for the truncation monitor
    pub boundary_margin: f64,
    /// RK4 substeps per sample; 0 picks the stability guard automatically
    pub substeps: usize,
}

impl RunConfig {
    pub fn new(horizon: f64, sample_dt: f64, boundary_margin: f64) -> Self {
        RunConfig {
            horizon,
            sample_dt,
            p_list: alloc::vec![2.0],
            k_list: Vec::new(),
            boundary_margin,
            substeps: 0,
        }
    }

    fn validate(&self, grid: &GridSpec) -> Result<()> {
        if !(self.sample_dt > 0.0 && self.horizon >= self.sample_dt) {
            return Err(Error::InvalidParameter(
                "need 0 < sample_dt <= horizon".into(),
            ));
        }
        if !(self.boundary_margin > 0.0 && self.boundary_margin < grid.half_width()) {
            return Err(Error::InvalidParameter(
                "boundary margin must lie in (0, L)".into(),
            ));
        }
        for p in &self.p_list {
            if !(*p >= 1.0) {
                return Err(Error::InvalidParameter(
                    "p list entries must be >= 1".into(),
                ));
            }
        }
        for k in &self.k_list {
            if !(*k >= 0.0) {
                return Err(Error::InvalidParameter(
                    "k list entries must be >= 0".into(),
                ));
            }
        }
        Ok(())
    }

    /// `p_list` with 2 prepended when missing.
    pub fn effective_p_list(&self) -> Vec<f64> {
        let mut ps = alloc::vec![2.0];
        for p in &self.p_list {
            if (*p - 2.0).abs() > 1e-12 {
                ps.push(*p);
            }
        }
        ps
    }
}

/// Per-sample record of a run: norms, dissipations, mass and the
/// truncation monitor. Envelope and relative-entropy columns are attached
/// by the callers that know the constants.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub mass: Vec<f64>,
    pub boundary_mass: Vec<f64>,
    /// recorded p values (2 first)
    pub p_list: Vec<f64>,
    /// `‖u(t)‖_p^p` per p
    pub lp_pow: Vec<Vec<f64>>,
    pub k_list: Vec<f64>,
    /// `‖D^k u(t)‖_2^2` per k
    pub dk_norms: Vec<Vec<f64>>,
    /// instantaneous dissipation `-d/dt ‖u‖_p^p` per p
    pub dissipation: Vec<Vec<f64>>,
    /// decay-envelope values per p (filled by the envelope layer)
    pub envelope: Vec<Option<Vec<f64>>>,
    /// relative entropy `∫ (u/u_∞)^p u_∞` per p (dispersal runs)
    pub entropy: Vec<Option<Vec<f64>>>,
    /// named extra columns (e.g. comparison-kernel dissipations)
    pub aux: Vec<(alloc::string::String, Vec<f64>)>,
    /// index of the first sample whose boundary mass breached the guard
    pub truncation_breach: Option<usize>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn p_index(&self, p: f64) -> Option<usize> {
        self.p_list.iter().position(|q| (q - p).abs() < 1e-12)
    }

    pub fn k_index(&self, k: f64) -> Option<usize> {
        self.k_list.iter().position(|q| (q - k).abs() < 1e-12)
    }

    /// Samples strictly before the truncation breach.
    pub fn valid_len(&self) -> usize {
        self.truncation_breach.unwrap_or(self.times.len())
    }

    pub fn aux_column(&self, name: &str) -> Option<&[f64]> {
        self.aux
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, col)| col.as_slice())
    }
}

enum Stepper<'a> {
    Conv(KernelSymbol),
    Gen {
        kernel: &'a GeneralKernel,
        source: Option<&'a SourceSpec>,
        substeps: usize,
    },
}

/// Advance the configured equation, recording every configured norm,
/// dissipation, mass and boundary mass at each sample time. Halts early
/// (with the breach index set) once the boundary frame carries more than
/// `BREACH_FRACTION` of the initial mass.
pub fn run_experiment(eq: &Equation, u0: &Field, cfg: &RunConfig) -> Result<TimeSeries> {
    let grid = u0.grid();
    cfg.validate(&grid)?;
    let p_list = cfg.effective_p_list();

    let samples = (cfg.horizon / cfg.sample_dt + 1e-9) as usize + 1;
    let mut series = TimeSeries {
        times: Vec::with_capacity(samples),
        mass: Vec::with_capacity(samples),
        boundary_mass: Vec::with_capacity(samples),
        p_list: p_list.clone(),
        lp_pow: alloc::vec![Vec::new(); p_list.len()],
        k_list: cfg.k_list.clone(),
        dk_norms: alloc::vec![Vec::new(); cfg.k_list.len()],
        dissipation: alloc::vec![Vec::new(); p_list.len()],
        envelope: alloc::vec![None; p_list.len()],
        entropy: alloc::vec![None; p_list.len()],
        aux: Vec::new(),
        truncation_breach: None,
    };

    let stepper = match eq {
        Equation::Convolution(kernel) => {
            if kernel.grid() != grid {
                return Err(Error::GridMismatch);
            }
            Stepper::Conv(kernel_symbol(kernel)?)
        }
        Equation::General { kernel, source } => {
            if kernel.grid() != grid {
                return Err(Error::GridMismatch);
            }
            let dt_max = rk4_dt_max(kernel);
            let min_sub = if cfg.sample_dt > dt_max {
                (cfg.sample_dt / dt_max + 1.0) as usize
            } else {
                1
            };
            let substeps = cfg.substeps.max(min_sub).max(1);
            Stepper::Gen {
                kernel,
                source: *source,
                substeps,
            }
        }
    };

    let mass0 = mass(u0).abs();
    let breach_level = BREACH_FRACTION * mass0;
    let mut u = u0.clone();

    for step in 0..samples {
        let t = step as f64 * cfg.sample_dt;
        if step > 0 {
            u = match &stepper {
                Stepper::Conv(sym) => step_with_symbol(sym, &u, cfg.sample_dt)?,
                Stepper::Gen {
                    kernel,
                    source,
                    substeps,
                } => {
                    let dt = cfg.sample_dt / *substeps as f64;
                    let mut v = u;
                    for _ in 0..*substeps {
                        v = step_rk4_general(kernel, &v, dt, *source)?;
                    }
                    v
                }
            };
        }
        series.times.push(t);
        series.mass.push(mass(&u));
        let bm = boundary_mass(&u, cfg.boundary_margin)?;
        series.boundary_mass.push(bm);
        // du/dt at the sample, for the instantaneous dissipation
        let rhs: Vec<f64> = match &stepper {
            Stepper::Conv(sym) => {
                let conv = spectral::convolve(sym, &u)?;
                let mass_j = sym.mass();
                conv.values()
                    .iter()
                    .zip(u.values())
                    .map(|(c, v)| c - mass_j * v)
                    .collect()
            }
            Stepper::Gen { kernel, source, .. } => {
                let mut rhs = alloc::vec![0.0; grid.len()];
                rhs_general(kernel, *source, u.values(), &mut rhs);
                rhs
            }
        };
        let hn = grid.cell_volume();
        for (pi, p) in p_list.iter().enumerate() {
            let norm = lp_norm(&u, *p)?;
            series.lp_pow[pi].push(math::powf(norm, *p));
            let mut diss = 0.0;
            for (v, r) in u.values().iter().zip(&rhs) {
                // φ_{p-1} degenerates to the sign at p = 1 (d/dt ‖u‖_1)
                let weight = if *p == 1.0 {
                    if *v > 0.0 {
                        1.0
                    } else if *v < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                } else {
                    phi_power(*v, p - 1.0)
                };
                diss -= p * weight * r;
            }
            series.dissipation[pi].push(hn * diss);
        }
        for (ki, k) in cfg.k_list.iter().enumerate() {
            let dku = spectral::fractional_derivative(&u, *k)?;
            let nk = lp_norm(&dku, 2.0)?;
            series.dk_norms[ki].push(nk * nk);
        }
        if series.truncation_breach.is_none() && bm > breach_level && mass0 > 0.0 {
            series.truncation_breach = Some(step);
            break;
        }
    }
    Ok(series)
}

/// Worst interior mismatch between the centered difference of the
/// dissipated functional and the recorded dissipation, relative to the
/// peak dissipation. The functional is `‖u‖_p^p` for plain runs and the
/// relative entropy `∫ (u/u_∞)^p u_∞` when the series carries one (the
/// recorded dissipation drives that quantity). Zero when the run never
/// dissipates (equilibrium).
pub fn h_theorem_residual(series: &TimeSeries, p: f64) -> Result<f64> {
    let pi = series
        .p_index(p)
        .ok_or_else(|| Error::InvalidParameter(alloc::format!("p = {p} was not recorded")))?;
    let n = series.len();
    if n < 3 {
        return Err(Error::InsufficientData);
    }
    let dt = series.times[1] - series.times[0];
    for i in 1..n {
        if math::abs(series.times[i] - series.times[i - 1] - dt) > 1e-9 * dt {
            return Err(Error::InvalidParameter(
                "h-theorem residual needs uniform sampling".into(),
            ));
        }
    }
    let x = series.entropy[pi].as_ref().unwrap_or(&series.lp_pow[pi]);
    let d = &series.dissipation[pi];
    let mut max_d = 0.0f64;
    for i in 1..n - 1 {
        max_d = max_d.max(math::abs(d[i]));
    }
    if max_d == 0.0 {
        return Ok(0.0);
    }
    let mut worst = 0.0f64;
    for i in 1..n - 1 {
        let cd = (x[i + 1] - x[i - 1]) / (2.0 * dt);
        worst = worst.max(math::abs(cd + d[i]));
    }
    Ok(worst / max_d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipation::{dissipation_fast, EntropySpec};
    use crate::kernels::{general_from_conv, make_standard_kernel, KernelKind};
    use crate::rng::Rng;
    use crate::spectral::forward;

    fn grid1(l: f64, n: usize) -> GridSpec {
        GridSpec::new(1, l, n).unwrap()
    }

    fn gaussian(grid: GridSpec, width: f64) -> Field {
        Field::from_fn(grid, |x| (-x[0] * x[0] / (width * width)).exp()).unwrap()
    }

    #[test]
    fn exact_step_semigroup_composition() {
        let g = grid1(8.0, 256);
        let k = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let u = gaussian(g, 1.0);
        let a = step_spectral_exact(&k, &step_spectral_exact(&k, &u, 0.3).unwrap(), 0.7).unwrap();
        let b = step_spectral_exact(&k, &u, 1.0).unwrap();
        let scale = b.max_abs();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn exact_step_fixes_constants_and_mass() {
        let g = grid1(4.0, 128);
        let k = make_standard_kernel(KernelKind::Bump, 1.0, 1.0, g).unwrap();
        let c = Field::constant(g, 2.5).unwrap();
        let stepped = step_spectral_exact(&k, &c, 1.7).unwrap();
        for v in stepped.values() {
            assert!((v - 2.5).abs() <= 1e-12);
        }
        let u = gaussian(g, 0.8);
        let m0 = mass(&u);
        let m1 = mass(&step_spectral_exact(&k, &u, 2.0).unwrap());
        assert!((m1 - m0).abs() <= 1e-12 * m0.abs());
    }

    #[test]
    fn rk4_order_five_per_step() {
        // general kernel assembled from the same convolution kernel: the
        // semi-discrete generators agree exactly, so the one-step gap to
        // the exact propagator is pure time-discretization error ~ dt^5
        let g = grid1(8.0, 64);
        let j = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let k = general_from_conv(&j).unwrap();
        let u = gaussian(g, 1.0);
        let err = |dt: f64| {
            let a = step_rk4_general(&k, &u, dt, None).unwrap();
            let b = step_spectral_exact(&j, &u, dt).unwrap();
            let mut worst = 0.0f64;
            for (x, y) in a.values().iter().zip(b.values()) {
                worst = worst.max((x - y).abs());
            }
            worst
        };
        let e1 = err(0.4);
        let e2 = err(0.2);
        let ratio = e1 / e2;
        assert!(
            (20.0..48.0).contains(&ratio),
            "order ratio {ratio} (e1 {e1:e}, e2 {e2:e})"
        );
    }

    #[test]
    fn rk4_zero_field_stays_zero_with_source() {
        let g = grid1(4.0, 64);
        let j = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let k = general_from_conv(&j).unwrap();
        let src = SourceSpec::cubic_absorption();
        let z = Field::zeros(g);
        let out = step_rk4_general(&k, &z, 0.1, Some(&src)).unwrap();
        assert_eq!(out.max_abs(), 0.0);
    }

    #[test]
    fn rk4_conserves_mass_per_step() {
        let g = grid1(4.0, 64);
        let j = make_standard_kernel(KernelKind::Bump, 1.0, 1.0, g).unwrap();
        let k = general_from_conv(&j).unwrap();
        let u = gaussian(g, 0.7);
        let m0 = mass(&u);
        let m1 = mass(&step_rk4_general(&k, &u, 0.2, None).unwrap());
        assert!((m1 - m0).abs() <= 1e-12 * m0.abs());
    }

    #[test]
    fn rk4_rejects_unstable_step() {
        let g = grid1(4.0, 64);
        let j = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let k = general_from_conv(&j).unwrap();
        let u = gaussian(g, 1.0);
        let dt_max = rk4_dt_max(&k);
        assert!(matches!(
            step_rk4_general(&k, &u, 2.0 * dt_max, None),
            Err(Error::StepRejected { .. })
        ));
    }

    #[test]
    fn source_spec_rejects_wrong_sign() {
        assert!(SourceSpec::new(Box::new(|s| s)).is_err());
        assert!(SourceSpec::new(Box::new(|s| -s)).is_ok());
    }

    #[test]
    fn run_zero_initial_data() {
        let g = grid1(4.0, 64);
        let j = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let cfg = RunConfig::new(1.0, 0.25, 1.0);
        let s = run_experiment(&Equation::Convolution(&j), &Field::zeros(g), &cfg).unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.lp_pow[0].iter().all(|v| *v == 0.0));
        assert!(s.mass.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn run_l2_monotone_and_matches_closed_form() {
        let g = grid1(16.0, 512);
        let j = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let u0 = gaussian(g, 1.0);
        let cfg = RunConfig::new(5.0, 0.5, 4.0);
        let s = run_experiment(&Equation::Convolution(&j), &u0, &cfg).unwrap();
        for w in s.lp_pow[0].windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        // closed form: ‖u(t)‖_2^2 = Σ exp(2t (J^ - J^(0))) |u0^|^2
        let sym = kernel_symbol(&j).unwrap();
        let spec0 = forward(&u0);
        for (i, t) in s.times.iter().enumerate() {
            let want: f64 = (0..g.len())
                .map(|idx| {
                    (2.0 * t * (sym.values()[idx] - sym.mass())).exp()
                        * spec0.coeffs()[idx].norm_sq()
                })
                .sum();
            let got = s.lp_pow[0][i];
            assert!((got - want).abs() <= 1e-10 * want, "t = {t}");
        }
    }

    #[test]
    fn run_records_dissipation_consistent_with_fast_form() {
        let g = grid1(8.0, 256);
        let j = make_standard_kernel(KernelKind::TruncatedGaussian, 1.0, 0.4, g).unwrap();
        let u0 = gaussian(g, 1.0);
        let mut cfg = RunConfig::new(1.0, 0.5, 2.0);
        cfg.p_list = alloc::vec![2.0, 3.0];
        let s = run_experiment(&Equation::Convolution(&j), &u0, &cfg).unwrap();
        // at t = 0 the recorded dissipation equals D_p(u0)
        for (pi, p) in s.p_list.iter().enumerate() {
            let want = dissipation_fast(&j, &u0, *p).unwrap();
            let got = s.dissipation[pi][0];
            assert!((got - want).abs() <= 1e-10 * want.max(1e-300));
        }
    }

    #[test]
    fn h_theorem_residual_second_order() {
        let g = grid1(16.0, 256);
        let j = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let u0 = gaussian(g, 1.0);
        let run = |dt: f64| {
            let mut cfg = RunConfig::new(0.2, dt, 4.0);
            cfg.p_list = alloc::vec![2.0, 4.0];
            run_experiment(&Equation::Convolution(&j), &u0, &cfg).unwrap()
        };
        for p in [2.0, 4.0] {
            let r1 = h_theorem_residual(&run(1e-3), p).unwrap();
            let r2 = h_theorem_residual(&run(5e-4), p).unwrap();
            assert!(r1 <= 1e-4, "p = {p}: residual {r1:e}");
            assert!(r1 / r2 >= 3.5, "p = {p}: ratio {}", r1 / r2);
        }
    }

    #[test]
    fn h_theorem_residual_zero_at_equilibrium() {
        // constant-in-time state: x and dissipation columns are flat, so
        // the 0/0 guard must report zero
        let s = TimeSeries {
            times: vec![0.0, 0.25, 0.5, 0.75],
            mass: vec![8.0; 4],
            boundary_mass: vec![0.0; 4],
            p_list: vec![2.0],
            lp_pow: vec![vec![8.0; 4]],
            k_list: vec![],
            dk_norms: vec![],
            dissipation: vec![vec![0.0; 4]],
            envelope: vec![None],
            entropy: vec![None],
            aux: vec![],
            truncation_breach: None,
        };
        assert_eq!(h_theorem_residual(&s, 2.0).unwrap(), 0.0);
    }

    #[test]
    fn h_theorem_residual_needs_samples() {
        let g = grid1(4.0, 64);
        let j = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let cfg = RunConfig::new(0.25, 0.25, 1.0);
        let s = run_experiment(&Equation::Convolution(&j), &gaussian(g, 0.5), &cfg).unwrap();
        assert!(matches!(
            h_theorem_residual(&s, 2.0),
            Err(Error::InsufficientData)
        ));
    }

    #[test]
    fn general_run_preserves_sign() {
        let g = grid1(8.0, 128);
        let j = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let k = general_from_conv(&j).unwrap();
        let u0 = gaussian(g, 0.6);
        let mut u = u0.clone();
        for _ in 0..12 {
            u = step_rk4_general(&k, &u, 0.25, None).unwrap();
        }
        let floor = -1e-12 * u0.max_abs();
        assert!(u.values().iter().all(|v| *v >= floor));
    }

    #[test]
    fn l1_contracts_for_signed_data() {
        let g = grid1(8.0, 128);
        let j = make_standard_kernel(KernelKind::Bump, 1.0, 1.0, g).unwrap();
        let mut r = Rng::new(3);
        let u0 = Field::from_fn(g, |x| (-x[0] * x[0] / 4.0).exp() * r.range(-1.0, 1.0)).unwrap();
        let mut cfg = RunConfig::new(4.0, 0.5, 2.0);
        cfg.p_list = alloc::vec![1.0, 2.0];
        let s = run_experiment(&Equation::Convolution(&j), &u0, &cfg).unwrap();
        let pi = s.p_index(1.0).unwrap();
        let first = s.lp_pow[pi][0];
        for v in &s.lp_pow[pi] {
            assert!(*v <= first * (1.0 + 1e-12));
        }
    }

    #[test]
    fn convex_entropies_are_lyapunov_functionals() {
        // mass-conserving general kernel with constant equilibrium:
        // ∫ Φ(u) is nonincreasing for each catalog entropy
        let g = grid1(8.0, 64);
        let j = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let k = general_from_conv(&j).unwrap();
        let mut r = Rng::new(9);
        let u0 = Field::from_fn(g, |x| (-x[0] * x[0] / 2.0).exp() * r.range(0.2, 1.0)).unwrap();
        let entropies = [
            EntropySpec::square(),
            EntropySpec::power(3.0).unwrap(),
            EntropySpec::fourth(),
        ];
        let mut u = u0.clone();
        let hn = g.cell_volume();
        let mut last: Vec<f64> = entropies
            .iter()
            .map(|e| u.values().iter().map(|v| e.phi(*v)).sum::<f64>() * hn)
            .collect();
        for _ in 0..20 {
            u = step_rk4_general(&k, &u, 0.2, None).unwrap();
            for (ei, e) in entropies.iter().enumerate() {
                let x: f64 = u.values().iter().map(|v| e.phi(*v)).sum::<f64>() * hn;
                assert!(x <= last[ei] * (1.0 + 1e-10), "{} grew", e.label());
                last[ei] = x;
            }
        }
    }

    #[test]
    fn cubic_source_accelerates_decay() {
        let g = grid1(8.0, 128);
        let j = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let k = general_from_conv(&j).unwrap();
        let u0 = gaussian(g, 0.8).scale(2.0);
        let src = SourceSpec::cubic_absorption();
        let cfg = RunConfig::new(3.0, 0.25, 2.0);
        let plain = run_experiment(
            &Equation::General {
                kernel: &k,
                source: None,
            },
            &u0,
            &cfg,
        )
        .unwrap();
        let damped = run_experiment(
            &Equation::General {
                kernel: &k,
                source: Some(&src),
            },
            &u0,
            &cfg,
        )
        .unwrap();
        for i in 1..plain.len() {
            assert!(damped.lp_pow[0][i] < plain.lp_pow[0][i]);
        }
    }

    #[test]
    fn heat_semigroup_damps_pure_mode_exactly() {
        let g = grid1(4.0, 128);
        let l = g.half_width();
        let xi = core::f64::consts::PI / l;
        let u = Field::from_fn(g, |x| (xi * x[0]).sin()).unwrap();
        let t = 0.7;
        let v = heat_semigroup(&u, t).unwrap();
        let factor = (-t * xi * xi).exp();
        for (a, b) in v.values().iter().zip(u.values()) {
            assert!((a - factor * b).abs() <= 1e-12);
        }
    }

    #[test]
    fn truncation_breach_halts_run() {
        // tight box: the gaussian reaches the frame quickly
        let g = grid1(4.0, 128);
        let j = make_standard_kernel(KernelKind::Box, 1.0, 0.5, g).unwrap();
        let u0 = gaussian(g, 1.0);
        let cfg = RunConfig::new(50.0, 0.5, 1.0);
        let s = run_experiment(&Equation::Convolution(&j), &u0, &cfg).unwrap();
        let breach = s.truncation_breach.expect("expected a truncation breach");
        assert!(breach < 101);
        assert_eq!(s.len(), breach + 1);
    }
}
