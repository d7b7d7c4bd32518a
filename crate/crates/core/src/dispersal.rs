//! The heterogeneous dispersal model: equilibrium computation by power
//! iteration, relative-entropy decay runs, and the general-kernel decay
//! certificate built from them.
//!
//! The stationary operator is column-stochastic after quadrature
//! correction, so the fixed-point sweep is power iteration converging to
//! the Perron eigenvector; the mass renormalization pins the eigenvalue-1
//! mode.

use crate::bounds::{ode_envelope, ConstantLedger};
use crate::dissipation::{dissipation_direct, relative_entropy_dissipation, EntropySpec};
use crate::evolution::{rk4_dt_max, step_rk4_general, TimeSeries, BREACH_FRACTION};
use crate::grid::{boundary_mass, lp_norm, mass, Field};
use crate::kernels::{
    dispersal_kernel, make_standard_kernel, verify_hypothesis_general, ConvKernel, GeneralKernel,
    KernelBounds, KernelKind,
};
use crate::math;
use crate::{Error, Result};
use alloc::vec::Vec;

/// Positive stationary state of the dispersal evolution, normalized to
/// unit mean so the two-sided bound `1/m <= u_inf <= m` is tight.
#[derive(Debug, Clone)]
pub struct EquilibriumResult {
    pub u_inf: Field,
    /// sup-norm fixed-point defect, relative to the sup of the iterate
    pub residual: f64,
    /// `max(max u_inf, 1/min u_inf)`
    pub m: f64,
    pub iterations: usize,
}

/// Power iteration `u <- T u`, `(T u)(x) = h Σ_y K(x, y) u(y)`, with mass
/// renormalized to one after each sweep.
pub fn solve_equilibrium(
    kernel: &ConvKernel,
    g: &Field,
    tol: f64,
    max_iter: usize,
) -> Result<EquilibriumResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be positive".into()));
    }
    let (two_point, _defect) = dispersal_kernel(kernel, g)?;
    solve_equilibrium_with_kernel(&two_point, tol, max_iter)
}

/// Same iteration on a prebuilt dispersal kernel.
pub fn solve_equilibrium_with_kernel(
    kernel: &GeneralKernel,
    tol: f64,
    max_iter: usize,
) -> Result<EquilibriumResult> {
    let grid = kernel.grid();
    let mut u = Field::constant(grid, 1.0 / (2.0 * grid.half_width()))?;
    let mut residual = f64::INFINITY;
    let mut iterations = 0usize;
    while iterations < max_iter {
        let v = kernel.apply(&u)?;
        iterations += 1;
        if v.values().iter().any(|x| *x <= 0.0) {
            return Err(Error::PositivityLost);
        }
        let sup = u.max_abs();
        let mut defect = 0.0f64;
        for (a, b) in v.values().iter().zip(u.values()) {
            defect = defect.max(math::abs(a - b));
        }
        residual = defect / sup;
        let v_mass = mass(&v);
        u = v.scale(1.0 / v_mass);
        if residual <= tol {
            // unit-mean normalization for an O(1) two-sided bound
            let mean = mass(&u) / (2.0 * grid.half_width());
            let u_inf = u.scale(1.0 / mean);
            let max = u_inf.values().iter().fold(0.0f64, |a, b| a.max(*b));
            let min = u_inf.values().iter().fold(f64::INFINITY, |a, b| a.min(*b));
            return Ok(EquilibriumResult {
                u_inf,
                residual,
                m: max.max(1.0 / min),
                iterations,
            });
        }
    }
    Err(Error::NoConvergence {
        residual,
        iterations,
    })
}

/// Everything a dispersal decay run produces: the sampled series (with
/// relative entropy and comparison-kernel dissipation columns), the
/// equilibrium, the assembled kernel and its certified bounds.
pub struct DispersalRun {
    pub series: TimeSeries,
    pub equilibrium: EquilibriumResult,
    pub kernel: GeneralKernel,
    pub bounds: KernelBounds,
    pub raw_column_defect: f64,
    /// `X(t)` nonincreasing at every recorded sample
    pub entropy_nonincreasing: bool,
    /// `‖u‖_p^p <= m^{p-1} X(t)` at every recorded sample
    pub lp_dominated_by_entropy: bool,
}

/// Evolve the dispersal equation from `u0 >= 0`, recording `‖u‖_p^p`,
/// the relative entropy `X(t) = ∫ (u/u_∞)^p u_∞`, its dissipation, and
/// the comparison dissipation `D_p(f)` of the certified box kernel.
pub fn run_dispersal_decay(
    kernel: &ConvKernel,
    g: &Field,
    u0: &Field,
    p: f64,
    horizon: f64,
    sample_dt: f64,
    margin: f64,
) -> Result<DispersalRun> {
    run_dispersal_decay_with(kernel, g, u0, p, horizon, sample_dt, margin, 1e-10, 100_000)
}

/// [`run_dispersal_decay`] with an explicit equilibrium tolerance and
/// iteration budget.
#[allow(clippy::too_many_arguments)]
pub fn run_dispersal_decay_with(
    kernel: &ConvKernel,
    g: &Field,
    u0: &Field,
    p: f64,
    horizon: f64,
    sample_dt: f64,
    margin: f64,
    eq_tol: f64,
    eq_max_iter: usize,
) -> Result<DispersalRun> {
    if !(p >= 2.0) {
        return Err(Error::InvalidParameter(
            "dispersal decay needs p >= 2".into(),
        ));
    }
    if u0.values().iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidParameter("u0 must be nonnegative".into()));
    }
    if u0.grid() != kernel.grid() || g.grid() != kernel.grid() {
        return Err(Error::GridMismatch);
    }
    let equilibrium = solve_equilibrium(kernel, g, eq_tol, eq_max_iter)?;
    let (two_point, raw_column_defect) = dispersal_kernel(kernel, g)?;
    // certified lower-bound ball: stay clear of the cell-averaged edge
    let g_min = g.values().iter().fold(f64::INFINITY, |a, b| a.min(*b));
    let r_test = 0.95 * g_min * kernel.support_radius();
    let bounds = verify_hypothesis_general(&two_point, r_test)?;
    let tilde = make_standard_kernel(KernelKind::Box, bounds.radius, bounds.r, u0.grid())?;

    let grid = u0.grid();
    let hn = grid.cell_volume();
    let p_list: Vec<f64> = if (p - 2.0).abs() < 1e-12 {
        alloc::vec![2.0]
    } else {
        alloc::vec![2.0, p]
    };
    let samples = (horizon / sample_dt + 1e-9) as usize + 1;
    let dt_max = rk4_dt_max(&two_point);
    let accuracy_dt = 0.25 * dt_max;
    let substeps = (math::ceil(sample_dt / accuracy_dt) as usize).max(1);
    let dt = sample_dt / substeps as f64;

    let mut series = TimeSeries {
        times: Vec::with_capacity(samples),
        mass: Vec::with_capacity(samples),
        boundary_mass: Vec::with_capacity(samples),
        p_list: p_list.clone(),
        lp_pow: alloc::vec![Vec::new(); p_list.len()],
        k_list: Vec::new(),
        dk_norms: Vec::new(),
        dissipation: alloc::vec![Vec::new(); p_list.len()],
        envelope: alloc::vec![None; p_list.len()],
        entropy: alloc::vec![Some(Vec::new()); p_list.len()],
        aux: p_list
            .iter()
            .map(|q| (alloc::format!("dtilde_p{q}"), Vec::new()))
            .collect(),
        truncation_breach: None,
    };

    let entropies: Vec<EntropySpec> = p_list
        .iter()
        .map(|q| EntropySpec::power(*q))
        .collect::<Result<_>>()?;
    let mass0 = mass(u0).abs();
    let breach_level = BREACH_FRACTION * mass0;
    let w = equilibrium.u_inf.values();
    let mut u = u0.clone();
    let mut entropy_nonincreasing = true;
    let mut lp_dominated_by_entropy = true;
    let mut last_entropy = alloc::vec![f64::INFINITY; p_list.len()];

    for step in 0..samples {
        if step > 0 {
            for _ in 0..substeps {
                u = step_rk4_general(&two_point, &u, dt, None)?;
            }
        }
        series.times.push(step as f64 * sample_dt);
        series.mass.push(mass(&u));
        let bm = boundary_mass(&u, margin)?;
        series.boundary_mass.push(bm);
        let f = Field::new(grid, u.values().iter().zip(w).map(|(a, b)| a / b).collect())?;
        for (qi, q) in p_list.iter().enumerate() {
            let nq = lp_norm(&u, *q)?;
            series.lp_pow[qi].push(math::powf(nq, *q));
            let x: f64 = f
                .values()
                .iter()
                .zip(w)
                .map(|(fi, wi)| math::powf(math::abs(*fi), *q) * wi)
                .sum::<f64>()
                * hn;
            if x > last_entropy[qi] * (1.0 + 1e-12) {
                entropy_nonincreasing = false;
            }
            last_entropy[qi] = x;
            if math::powf(nq, *q) > math::powf(equilibrium.m, q - 1.0) * x * (1.0 + 1e-12) {
                lp_dominated_by_entropy = false;
            }
            series.entropy[qi].as_mut().unwrap().push(x);
            let e =
                relative_entropy_dissipation(&two_point, &equilibrium.u_inf, &f, &entropies[qi])?;
            series.dissipation[qi].push(e);
            let dtilde = dissipation_direct(&tilde, &f, *q)?;
            series.aux[qi].1.push(dtilde);
        }
        if series.truncation_breach.is_none() && bm > breach_level && mass0 > 0.0 {
            series.truncation_breach = Some(step);
            break;
        }
    }
    Ok(DispersalRun {
        series,
        equilibrium,
        kernel: two_point,
        bounds,
        raw_column_defect,
        entropy_nonincreasing,
        lp_dominated_by_entropy,
    })
}

/// Outcome of the three-part general-kernel decay certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneralDecayReport {
    pub checked_samples: usize,
    /// (i) `E_p(f) >= (1/m) D_p(f)` for the certified box kernel
    pub dissipation_bound_ok: bool,
    pub first_dissipation_failure: Option<usize>,
    /// (ii) `X(t)` below the comparison-ODE envelope
    pub envelope_ok: bool,
    pub first_envelope_failure: Option<usize>,
    /// (iii) `‖u‖_p^p <= m^{p-1} X(t)`
    pub lp_bound_ok: bool,
    pub first_lp_failure: Option<usize>,
}

impl GeneralDecayReport {
    pub fn all_ok(&self) -> bool {
        self.dissipation_bound_ok && self.envelope_ok && self.lp_bound_ok
    }
}

/// Verify, sample by sample, the three inequalities behind the
/// general-kernel decay certificate on a recorded series. `m` is the
/// two-sided equilibrium bound; the envelope constants carry the `m`
/// powers exactly as the symmetrization argument produces them:
/// `C1 = C r R^{N+2} m^{-(pγ+γ+2)} ‖u0‖_1^{-pγ}`, `C2 = C r R^N m^{-2}`.
pub fn check_general_decay(
    kernel: &GeneralKernel,
    m: f64,
    bounds: &KernelBounds,
    ledger: &ConstantLedger,
    series: &TimeSeries,
    p: f64,
) -> Result<GeneralDecayReport> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidParameter(
            "equilibrium bound m must be positive".into(),
        ));
    }
    if kernel.mass_conservation_defect() > 1e-9 {
        return Err(Error::InvalidParameter(
            "general decay certificate needs a mass-conserving kernel".into(),
        ));
    }
    let pi = series
        .p_index(p)
        .ok_or_else(|| Error::InvalidParameter(alloc::format!("p = {p} not recorded")))?;
    let x = series.entropy[pi]
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("series carries no entropy column".into()))?;
    let dtilde = series
        .aux_column(&alloc::format!("dtilde_p{p}"))
        .ok_or_else(|| Error::InvalidParameter("series carries no comparison column".into()))?;
    let e = &series.dissipation[pi];
    let lp = &series.lp_pow[pi];
    let n = ledger.dim as f64;
    let gamma = 2.0 / (n * (p - 1.0));
    let norm1_0 = math::abs(series.mass[0]);
    let x0 = x[0];
    let c1 = ledger.c_main
        * bounds.r
        * math::powf(bounds.radius, n + 2.0)
        * math::powf(m, -(p * gamma + gamma + 2.0))
        * math::powf(norm1_0, -p * gamma);
    let c2 = ledger.c_main * bounds.r * math::powf(bounds.radius, n) * math::powf(m, -2.0);

    let valid = series.valid_len();
    let mut report = GeneralDecayReport {
        checked_samples: valid,
        dissipation_bound_ok: true,
        first_dissipation_failure: None,
        envelope_ok: true,
        first_envelope_failure: None,
        lp_bound_ok: true,
        first_lp_failure: None,
    };
    for i in 0..valid {
        if e[i] < dtilde[i] / m && report.dissipation_bound_ok {
            report.dissipation_bound_ok = false;
            report.first_dissipation_failure = Some(i);
        }
        let env = ode_envelope(x0, c1, c2, gamma, series.times[i]);
        if x[i] > env && report.envelope_ok {
            report.envelope_ok = false;
            report.first_envelope_failure = Some(i);
        }
        if lp[i] > math::powf(m, p - 1.0) * x[i] * (1.0 + 1e-12) && report.lp_bound_ok {
            report.lp_bound_ok = false;
            report.first_lp_failure = Some(i);
        }
    }
    Ok(report)
}
