//! Error bounds on reduced dynamics driven by correlation-function distance.
//!
//! Two environments with coupling-index correlation matrices `C` and `C'`
//! induce reduced dynamics whose trace-norm gap is controlled by weighted
//! distances between `C` and `C'` alone. This module computes the distance
//! constants, evaluates the bound curves (a Grönwall family and a sharper
//! exponential family, each in an L¹-in-time and an L∞-in-time flavor),
//! and certifies a model pair by propagating both and checking the measured
//! gap against the bound on a shared time grid.
//!
//! The constants follow the stationary single-time-difference convention:
//! with `N` coupling indices and pointwise matrix 2-norms,
//! `ε = N·max_t ‖C(t)−C'(t)‖₂` and `ε₁ = N·∫₀ᵀ ‖C(t)−C'(t)‖₂ dt`, with the
//! companion magnitudes `M = N·max_t max(‖C‖₂, ‖C'‖₂)` and
//! `M₁ = N·max(‖C‖_{L¹}, ‖C'‖_{L¹})`. A genuinely two-time-argument variant
//! of the L¹ constants is also reported for the secondary Grönwall curve.

use crate::bcf::{BcfClosedForm, HybridizationPair, SuperBcf};
use crate::dynamics::{gap_curve, propagate};
use crate::error::{CoreError, Result};
use crate::linalg::{frob_norm, op_norm, trapezoid};
use crate::models::{AssembledModel, DynamicsKind};

/// Time-weighting of a bound: total variation over the window (`L1`) or peak
/// magnitude times elapsed area (`LInf`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormFamily {
    L1,
    LInf,
}

/// Distance and magnitude constants extracted from a pair of correlation
/// matrices on `[0, T]`.
#[derive(Debug, Clone)]
pub struct EpsConstants {
    /// `ε`: sup-norm distance, scaled by the coupling-index count.
    pub eps_linf: f64,
    /// `ε₁`: L¹ distance, scaled by the coupling-index count.
    pub eps_l1: f64,
    /// `M`: larger of the two sup-norm magnitudes, same scaling.
    pub m_linf: f64,
    /// `M₁`: larger of the two L¹ magnitudes, same scaling.
    pub m_l1: f64,
    /// L¹ distance in the two-time-argument sense
    /// `N·sup_{t₂} ∫₀ᵀ ‖ΔC(|t₁−t₂|)‖₂ dt₁`; at most `2·eps_l1`.
    pub eps_l1_two_time: f64,
    /// Two-time-argument companion magnitude; at most `2·m_linf·T` and
    /// bounded by `2·m_l1`.
    pub m_l1_two_time: f64,
    /// First-order sensitivity of the sharper L¹ bound to the quadrature
    /// error in `ε₁`, estimated by one grid doubling:
    /// `|ε₁⁽ᴳ⁾ − ε₁⁽²ᴳ⁾|·T·e^{ε₁T}`.
    pub quadrature_margin: f64,
}

/// Everything a certification run produces: the constants, the bound curves
/// on the propagation grid, the measured gap, and the verdict.
#[derive(Debug, Clone)]
pub struct BoundReport {
    /// Horizon `T` the constants and curves were computed on.
    pub horizon: f64,
    /// Coupling-index count `N` shared by both models.
    pub n_indices: usize,
    pub eps_linf: f64,
    pub eps_l1: f64,
    pub m_linf: f64,
    pub m_l1: f64,
    pub eps_l1_two_time: f64,
    pub m_l1_two_time: f64,
    /// Time grid all curves below are sampled on.
    pub grid: Vec<f64>,
    /// Sharper exponential bound, L¹ flavor: `e^{ε₁t} − 1`.
    pub bound_improved_l1: Vec<f64>,
    /// Sharper exponential bound, L∞ flavor: `e^{εt²/2} − 1`.
    pub bound_improved_linf: Vec<f64>,
    /// Grönwall bound, L¹ flavor: `ε₁·t·e^{M₁t}`.
    pub bound_gronwall_l1: Vec<f64>,
    /// Grönwall bound, L∞ flavor: `ε·(t²/2)·e^{Mt²/2}`.
    pub bound_gronwall_linf: Vec<f64>,
    /// Secondary Grönwall curve from the two-time-argument constants:
    /// `ε₁'·(t/2)·e^{M₁'t/2}`.
    pub bound_gronwall_l1_two_time: Vec<f64>,
    /// Trace-norm gap between the two propagated reduced states.
    pub empirical_gap: Option<Vec<f64>>,
    /// Whether the measured gap stayed within the sharper L¹ bound plus the
    /// quadrature margin at every grid point.
    pub certified: bool,
    pub quadrature_margin: f64,
}

fn check_window(horizon: f64, grid: usize) -> Result<()> {
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "horizon must be finite and positive, got {horizon}"
        )));
    }
    if grid < 64 {
        return Err(CoreError::InvalidArgument(format!(
            "distance quadrature needs at least 64 nodes, got {grid}"
        )));
    }
    Ok(())
}

/// `∫ f` by trapezoid given samples on a uniform grid with step `h`.
fn trapz_samples(values: &[f64], h: f64) -> f64 {
    let s: f64 = values.iter().sum();
    h * (s - 0.5 * (values[0] + values[values.len() - 1]))
}

/// Cumulative trapezoid antiderivative `F[i] = ∫₀^{t_i} f`.
fn cumulative_trapz(values: &[f64], h: f64) -> Vec<f64> {
    let mut acc = Vec::with_capacity(values.len());
    let mut total = 0.0;
    acc.push(0.0);
    for w in values.windows(2) {
        total += 0.5 * h * (w[0] + w[1]);
        acc.push(total);
    }
    acc
}

/// Two-time-argument L¹ functional of a stationary kernel from its 1-D
/// samples: `sup_{t₂} ∫₀ᵀ f(|t₁−t₂|) dt₁ = max_i (F[i] + F[last−i])`.
fn two_time_l1(values: &[f64], h: f64) -> f64 {
    let f = cumulative_trapz(values, h);
    let last = f.len() - 1;
    (0..f.len())
        .map(|i| f[i] + f[last - i])
        .fold(0.0, f64::max)
}

/// Distance and magnitude constants for a pair of coupling-index correlation
/// matrices over `[0, horizon]`, sampled with a `2·grid − 1`-node trapezoid
/// rule (one Richardson halving against the `grid`-node rule feeds the
/// reported quadrature margin).
pub fn compute_eps(
    c_a: &SuperBcf,
    c_b: &SuperBcf,
    horizon: f64,
    grid: usize,
) -> Result<EpsConstants> {
    check_window(horizon, grid)?;
    let n_idx = c_a.n_indices();
    if n_idx != c_b.n_indices() {
        return Err(CoreError::DimensionMismatch {
            context: "correlation matrices must carry the same coupling-index count".into(),
            expected: n_idx,
            got: c_b.n_indices(),
        });
    }
    let scale = n_idx as f64;

    let fine = 2 * grid - 1;
    let (ts, _) = trapezoid(horizon, fine);
    let h = ts[1] - ts[0];
    let mut gap = Vec::with_capacity(fine);
    let mut mag_a = Vec::with_capacity(fine);
    let mut mag_b = Vec::with_capacity(fine);
    for &t in &ts {
        let ca = c_a.eval_matrix(t)?;
        let cb = c_b.eval_matrix(t)?;
        gap.push(op_norm(&(&ca - &cb)));
        mag_a.push(op_norm(&ca));
        mag_b.push(op_norm(&cb));
    }

    let eps_linf = scale * gap.iter().fold(0.0, |m, &v| f64::max(m, v));
    let eps_l1 = scale * trapz_samples(&gap, h);
    let m_linf = scale
        * mag_a
            .iter()
            .chain(&mag_b)
            .fold(0.0, |m, &v| f64::max(m, v));
    let m_l1 = scale * f64::max(trapz_samples(&mag_a, h), trapz_samples(&mag_b, h));

    let eps_l1_two_time = scale * two_time_l1(&gap, h);
    let m_l1_two_time = scale * f64::max(two_time_l1(&mag_a, h), two_time_l1(&mag_b, h));

    // Coarse pass reuses every second fine node, so the step exactly doubles.
    let coarse: Vec<f64> = gap.iter().step_by(2).copied().collect();
    let eps_l1_coarse = scale * trapz_samples(&coarse, 2.0 * h);
    let quadrature_margin =
        (eps_l1 - eps_l1_coarse).abs() * horizon * f64::exp(eps_l1 * horizon);

    Ok(EpsConstants {
        eps_linf,
        eps_l1,
        m_linf,
        m_l1,
        eps_l1_two_time,
        m_l1_two_time,
        quadrature_margin,
    })
}

fn closed_form_distance(
    dim: usize,
    pairs: &[(&BcfClosedForm, &BcfClosedForm)],
    horizon: f64,
    grid: usize,
) -> Result<(f64, f64)> {
    check_window(horizon, grid)?;
    for (a, b) in pairs {
        if a.dim() != dim || b.dim() != dim {
            return Err(CoreError::DimensionMismatch {
                context: "closed-form correlation block size must match the mode count".into(),
                expected: dim,
                got: if a.dim() != dim { a.dim() } else { b.dim() },
            });
        }
    }
    let fine = 2 * grid - 1;
    let (ts, _) = trapezoid(horizon, fine);
    let h = ts[1] - ts[0];
    let mut sup = 0.0;
    let mut l1 = 0.0;
    for (a, b) in pairs {
        let mut gap = Vec::with_capacity(fine);
        for &t in &ts {
            gap.push(op_norm(&(&a.eval(t)? - &b.eval(t)?)));
        }
        sup += gap.iter().fold(0.0, |m, &v| f64::max(m, v));
        l1 += trapz_samples(&gap, h);
    }
    Ok((sup, l1))
}

/// Shortcut constants `(ε, ε₁)` for two bosonic environments coupled at `n`
/// sites: `4n` times the sup/L¹ distance between the `n×n` mode correlation
/// blocks. Avoids assembling the `2n`-index matrix.
pub fn shortcut_eps_spin_boson(
    c_a: &BcfClosedForm,
    c_b: &BcfClosedForm,
    n: usize,
    horizon: f64,
    grid: usize,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(CoreError::InvalidArgument(
            "coupling-site count must be positive".into(),
        ));
    }
    let (sup, l1) = closed_form_distance(n, &[(c_a, c_b)], horizon, grid)?;
    let scale = 4.0 * n as f64;
    Ok((scale * sup, scale * l1))
}

/// Shortcut constants `(ε, ε₁)` for two fermionic environments coupled at `n`
/// sites: `4n` times the summed distances of the greater and lesser
/// hybridization blocks.
pub fn shortcut_eps_fermion(
    pair_a: &HybridizationPair,
    pair_b: &HybridizationPair,
    n: usize,
    horizon: f64,
    grid: usize,
) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(CoreError::InvalidArgument(
            "coupling-site count must be positive".into(),
        ));
    }
    let (sup, l1) = closed_form_distance(
        n,
        &[
            (&pair_a.greater, &pair_b.greater),
            (&pair_a.lesser, &pair_b.lesser),
        ],
        horizon,
        grid,
    )?;
    let scale = 4.0 * n as f64;
    Ok((scale * sup, scale * l1))
}

fn check_bound_args(t: f64, eps: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "bound evaluation time must be finite and nonnegative, got {t}"
        )));
    }
    if !eps.is_finite() || eps < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "distance constant must be finite and nonnegative, got {eps}"
        )));
    }
    Ok(())
}

/// Grönwall-family trace-norm bound at time `t`:
/// `ε₁·t·e^{M₁t}` (`L1`) or `ε·(t²/2)·e^{Mt²/2}` (`LInf`).
pub fn gronwall_bound(t: f64, eps: f64, magnitude: f64, family: NormFamily) -> Result<f64> {
    check_bound_args(t, eps)?;
    if !magnitude.is_finite() || magnitude < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "magnitude constant must be finite and nonnegative, got {magnitude}"
        )));
    }
    Ok(match family {
        NormFamily::L1 => eps * t * f64::exp(magnitude * t),
        NormFamily::LInf => eps * (0.5 * t * t) * f64::exp(magnitude * 0.5 * t * t),
    })
}

/// Secondary Grönwall curve from the two-time-argument constants:
/// `ε₁'·(t/2)·e^{M₁'t/2}`.
pub fn gronwall_bound_two_time(t: f64, eps_two_time: f64, m_two_time: f64) -> Result<f64> {
    check_bound_args(t, eps_two_time)?;
    if !m_two_time.is_finite() || m_two_time < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "magnitude constant must be finite and nonnegative, got {m_two_time}"
        )));
    }
    Ok(eps_two_time * (0.5 * t) * f64::exp(m_two_time * 0.5 * t))
}

/// Sharper exponential bound at time `t`, free of the magnitude constant:
/// `e^{ε₁t} − 1` (`L1`) or `e^{εt²/2} − 1` (`LInf`).
pub fn improved_bound(t: f64, eps: f64, family: NormFamily) -> Result<f64> {
    check_bound_args(t, eps)?;
    Ok(match family {
        NormFamily::L1 => f64::exp_m1(eps * t),
        NormFamily::LInf => f64::exp_m1(eps * 0.5 * t * t),
    })
}

/// Lifts a trace-norm gap series to an observable gap series:
/// `|⟨O⟩ − ⟨O⟩'| ≤ ‖O‖₂→₂ · ‖ρ − ρ'‖_tr` pointwise.
pub fn observable_bound(series: &[f64], o_norm: f64) -> Result<Vec<f64>> {
    if !o_norm.is_finite() || o_norm < 0.0 {
        return Err(CoreError::InvalidArgument(format!(
            "observable norm must be finite and nonnegative, got {o_norm}"
        )));
    }
    Ok(series.iter().map(|&v| o_norm * v).collect())
}

/// Bound between two non-contractive models compared through one shared
/// contractive reference: distances add in the exponent,
/// `e^{(ε_a+ε_b)·w(t)} − 1` with the weight of the chosen family. Symmetric
/// in the two distances; with one distance zero it reduces to the sharper
/// bound for the remaining pair.
pub fn quasi_triangle_bound(
    eps_a: f64,
    eps_b: f64,
    t: f64,
    family: NormFamily,
) -> Result<f64> {
    check_bound_args(t, eps_a)?;
    check_bound_args(t, eps_b)?;
    improved_bound(t, eps_a + eps_b, family)
}

fn ops_agree(a: &AssembledModel, b: &AssembledModel) -> bool {
    let tol = 1e-10;
    let sys_gap = frob_norm(&(a.l_sys.mat() - b.l_sys.mat()));
    if sys_gap > tol * (1.0 + frob_norm(a.l_sys.mat())) {
        return false;
    }
    if a.s_ops.len() != b.s_ops.len() {
        return false;
    }
    a.s_ops.iter().zip(&b.s_ops).all(|(sa, sb)| {
        frob_norm(&(sa.mat() - sb.mat())) <= tol * (1.0 + frob_norm(sa.mat()))
    })
}

/// Propagates two models of the same open system, computes the distance
/// constants from their closed-form correlation matrices, and checks the
/// measured trace-norm gap against the sharper L¹ bound (plus the quadrature
/// margin) on the whole grid.
///
/// The correlation matrices must describe the models they are passed with;
/// they are accepted separately because the closed forms are built from the
/// model specification, which the assembled operators no longer carry.
/// At least one model must be contractive: between two non-contractive
/// models the gap is not controlled by their mutual distance, and the
/// comparison must go through a shared contractive reference via
/// [`quasi_triangle_bound`].
pub fn certify(
    model_a: &AssembledModel,
    c_a: &SuperBcf,
    model_b: &AssembledModel,
    c_b: &SuperBcf,
    horizon: f64,
    steps: usize,
    eps_grid: usize,
) -> Result<BoundReport> {
    if model_a.dynamics == DynamicsKind::QuasiLindblad
        && model_b.dynamics == DynamicsKind::QuasiLindblad
    {
        return Err(CoreError::InvalidArgument(
            "both models are non-contractive; certify each against a shared contractive \
             reference and combine with quasi_triangle_bound"
                .into(),
        ));
    }
    if model_a.dim_sys != model_b.dim_sys {
        return Err(CoreError::DimensionMismatch {
            context: "certification needs a shared system dimension".into(),
            expected: model_a.dim_sys,
            got: model_b.dim_sys,
        });
    }
    let state_gap = frob_norm(&(model_a.rho_sys0.mat() - model_b.rho_sys0.mat()));
    if state_gap > 1e-12 {
        return Err(CoreError::InvalidState(format!(
            "certification needs a shared initial reduced state, got gap {state_gap:.3e}"
        )));
    }
    if !ops_agree(model_a, model_b) {
        return Err(CoreError::InvalidModel(
            "certification compares environments only: system generators and coupling \
             factors must agree between the two models"
                .into(),
        ));
    }
    for (model, c) in [(model_a, c_a), (model_b, c_b)] {
        if c.n_indices() != model.n_coupling {
            return Err(CoreError::DimensionMismatch {
                context: "correlation matrix does not match its model's coupling-index count",
                expected: model.n_coupling,
                got: c.n_indices(),
            });
        }
    }

    let eps = compute_eps(c_a, c_b, horizon, eps_grid)?;
    let traj_a = propagate(model_a, horizon, steps)?;
    let traj_b = propagate(model_b, horizon, steps)?;
    let gap = gap_curve(&traj_a, &traj_b)?;
    let grid = traj_a.times.clone();

    let mut bound_improved_l1 = Vec::with_capacity(grid.len());
    let mut bound_improved_linf = Vec::with_capacity(grid.len());
    let mut bound_gronwall_l1 = Vec::with_capacity(grid.len());
    let mut bound_gronwall_linf = Vec::with_capacity(grid.len());
    let mut bound_gronwall_l1_two_time = Vec::with_capacity(grid.len());
    for &t in &grid {
        bound_improved_l1.push(improved_bound(t, eps.eps_l1, NormFamily::L1)?);
        bound_improved_linf.push(improved_bound(t, eps.eps_linf, NormFamily::LInf)?);
        bound_gronwall_l1.push(gronwall_bound(t, eps.eps_l1, eps.m_l1, NormFamily::L1)?);
        bound_gronwall_linf.push(gronwall_bound(
            t,
            eps.eps_linf,
            eps.m_linf,
            NormFamily::LInf,
        )?);
        bound_gronwall_l1_two_time.push(gronwall_bound_two_time(
            t,
            eps.eps_l1_two_time,
            eps.m_l1_two_time,
        )?);
    }

    let certified = gap
        .iter()
        .zip(&bound_improved_l1)
        .all(|(&g, &b)| g <= b + eps.quadrature_margin);

    Ok(BoundReport {
        horizon,
        n_indices: c_a.n_indices(),
        eps_linf: eps.eps_linf,
        eps_l1: eps.eps_l1,
        m_linf: eps.m_linf,
        m_l1: eps.m_l1,
        eps_l1_two_time: eps.eps_l1_two_time,
        m_l1_two_time: eps.m_l1_two_time,
        grid,
        bound_improved_l1,
        bound_improved_linf,
        bound_gronwall_l1,
        bound_gronwall_linf,
        bound_gronwall_l1_two_time,
        empirical_gap: Some(gap),
        certified,
        quadrature_margin: eps.quadrature_margin,
    })
}
