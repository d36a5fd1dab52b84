//! Pseudomode compression of scalar correlation functions.
//!
//! A target correlation function `c(t)` on `[0, T]` is approximated by an
//! exponential sum `c'(t) = Σ_k w_k e^{λ_k t}` (matrix-pencil initialization,
//! variable-projection refinement), which is then realized exactly as a chain
//! of `K` damped modes with diagonal frequencies `ω_k = −Im λ_k`, dampings
//! `γ_k = −Re λ_k`, and couplings solving `(g_k − i m_k)² = w_k`. Complex
//! residues force `m_k ≠ 0`, i.e. a non-contractive realization; nonnegative
//! real residues yield a plain dissipative chain.
//!
//! The compression error is certified: `ε₁ = 4·‖c − c'‖_{L¹[0,T]}` feeds the
//! trace-norm bound `e^{ε₁t} − 1` on any reduced dynamics driven by the
//! fitted environment in place of the target.

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigVals, LeastSquaresSvd, SVD};
use num_complex::Complex64;

use crate::bcf::{sample, BcfClosedForm, SampledBcf};
use crate::error::{CoreError, Result};
use crate::linalg::CMat;
use crate::models::{DynamicsKind, SpinBosonSpec};

fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Exponential-sum model `Σ_k w_k e^{λ_k t}` with stable poles.
#[derive(Debug, Clone)]
pub struct ExpModes {
    /// Poles `λ_k`, each with `Re λ_k ≤ 0`.
    pub poles: Vec<Complex64>,
    /// Residues `w_k`.
    pub residues: Vec<Complex64>,
    /// Set when initialization produced genuinely unstable poles
    /// (`Re λ > 1e-10`) that were reflected onto the imaginary axis.
    pub reflected: bool,
    /// Set when refinement diverged and the initialization was returned.
    pub refine_diverged: bool,
}

impl ExpModes {
    pub fn k(&self) -> usize {
        self.poles.len()
    }

    /// Evaluate the exponential sum at `t`.
    pub fn eval(&self, t: f64) -> Complex64 {
        self.poles
            .iter()
            .zip(&self.residues)
            .map(|(&l, &w)| w * (l * cr(t)).exp())
            .sum()
    }
}

/// Diagonal damped-mode realization of an exponential sum.
#[derive(Debug, Clone)]
pub struct PseudomodeParams {
    /// Mode frequencies `ω_k`.
    pub omega: Vec<f64>,
    /// Mode dampings `γ_k ≥ 0`.
    pub gamma: Vec<f64>,
    /// Coupling amplitudes `g_k` (real).
    pub g: Vec<f64>,
    /// Non-CP coupling amplitudes `m_k` (real; all zero iff the realization
    /// is contractive).
    pub m: Vec<f64>,
}

impl PseudomodeParams {
    pub fn k(&self) -> usize {
        self.omega.len()
    }

    /// True when every `m_k` vanishes, i.e. the realization is a plain
    /// dissipative mode chain.
    pub fn is_contractive(&self) -> bool {
        self.m.iter().all(|&m| m.abs() < 1e-14)
    }
}

/// Fit target: a closed form (sampled internally) or existing samples.
pub enum FitTarget<'a> {
    Closed(&'a BcfClosedForm),
    Samples(&'a SampledBcf),
}

/// Output of the full compression pipeline, certificate included.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub modes: ExpModes,
    pub params: PseudomodeParams,
    /// `max_t |c − c'|` on the fit grid.
    pub residual_linf: f64,
    /// `∫₀ᵀ |c − c'| dt` on the fit grid.
    pub residual_l1: f64,
    /// Certified distance constant `ε₁ = 4·residual_l1` (single coupling
    /// site).
    pub eps1: f64,
    pub horizon: f64,
    /// Whether the realization is contractive. When false the certificate
    /// only covers comparisons against a contractive counterpart; two
    /// non-contractive models must be combined through
    /// `bounds::quasi_triangle_bound`.
    pub contractive: bool,
}

/// Extract the scalar series from samples, requiring a 1×1 block.
fn scalar_series(samples: &SampledBcf) -> Result<(Vec<f64>, Vec<Complex64>)> {
    if samples.dim() != 1 {
        return Err(CoreError::InvalidArgument(format!(
            "fitting handles scalar correlation functions only, got {}×{} blocks",
            samples.dim(),
            samples.dim()
        )));
    }
    if samples.t_grid.len() < 2 {
        return Err(CoreError::InvalidArgument(
            "need at least two samples".into(),
        ));
    }
    let dt = samples.dt();
    for (i, w) in samples.t_grid.windows(2).enumerate() {
        if (w[1] - w[0] - dt).abs() > 1e-9 * (1.0 + dt) {
            return Err(CoreError::InvalidArgument(format!(
                "sample grid must be uniform; spacing deviates at index {i}"
            )));
        }
    }
    let f = samples.samples.iter().map(|m| m[[0, 0]]).collect();
    Ok((samples.t_grid.clone(), f))
}

/// Reflect unstable poles onto the imaginary axis. Returns whether any pole
/// was beyond the 1e-10 stability slack.
fn stabilize(poles: &mut [Complex64]) -> bool {
    let mut reflected = false;
    for l in poles.iter_mut() {
        if l.re > 0.0 {
            if l.re > 1e-10 {
                reflected = true;
            }
            *l = Complex64::new(0.0, l.im);
        }
    }
    reflected
}

fn vandermonde(poles: &[Complex64], ts: &[f64]) -> CMat {
    let mut v = CMat::zeros((ts.len(), poles.len()));
    for (i, &t) in ts.iter().enumerate() {
        for (k, &l) in poles.iter().enumerate() {
            v[[i, k]] = (l * cr(t)).exp();
        }
    }
    v
}

/// Least-squares residues for fixed poles.
fn solve_residues(poles: &[Complex64], ts: &[f64], f: &[Complex64]) -> Result<Vec<Complex64>> {
    if poles.is_empty() {
        return Ok(vec![]);
    }
    let v = vandermonde(poles, ts);
    let rhs = Array1::from_vec(f.to_vec());
    let sol = v
        .least_squares(&rhs)
        .map_err(|e| CoreError::Numerical(format!("residue solve failed: {e}")))?;
    Ok(sol.solution.to_vec())
}

/// Matrix-pencil estimate of `k` exponential modes from uniform samples.
///
/// Builds the shifted Hankel pair of the series with pencil parameter
/// `L = G/2`, truncates its SVD to rank `k`, and reads the pole phases
/// `z_k = e^{λ_k Δt}` off the reduced pencil's eigenvalues; residues follow
/// by linear least squares. Poles that land in the right half-plane are
/// reflected onto the imaginary axis.
pub fn pencil_fit(samples: &SampledBcf, k: usize) -> Result<ExpModes> {
    let (ts, f) = scalar_series(samples)?;
    let g = f.len();
    if k == 0 {
        return Ok(ExpModes {
            poles: vec![],
            residues: vec![],
            reflected: false,
            refine_diverged: false,
        });
    }
    if g < 4 * k {
        return Err(CoreError::InvalidArgument(format!(
            "need at least {} samples for {k} modes, got {g}",
            4 * k
        )));
    }
    let dt = ts[1] - ts[0];

    // Zero signal: any stable poles with vanishing residues represent it.
    let scale = f.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Ok(ExpModes {
            poles: (1..=k).map(|i| cr(-(i as f64))).collect(),
            residues: vec![Complex64::new(0.0, 0.0); k],
            reflected: false,
            refine_diverged: false,
        });
    }

    let l = g / 2;
    let rows = g - l;
    let mut m0 = CMat::zeros((rows, l));
    let mut m1 = CMat::zeros((rows, l));
    for i in 0..rows {
        for j in 0..l {
            m0[[i, j]] = f[i + j];
            m1[[i, j]] = f[i + j + 1];
        }
    }

    let (u, s, vt) = m0
        .svd(true, true)
        .map_err(|e| CoreError::Numerical(format!("pencil SVD failed: {e}")))?;
    let u = u.expect("left singular vectors requested");
    let vt = vt.expect("right singular vectors requested");
    let achievable = s.iter().filter(|&&sv| sv >= s[0] * 1e-12).count();
    if achievable < k {
        return Err(CoreError::Numerical(format!(
            "samples support only {achievable} modes at the requested tolerance, not {k}"
        )));
    }

    // Reduced pencil A = Σ_K⁻¹ U_K† M1 V_K, whose eigenvalues are the z_k.
    let mut a = CMat::zeros((k, k));
    for p in 0..k {
        for q in 0..k {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..rows {
                for j in 0..l {
                    acc += u[[i, p]].conj() * m1[[i, j]] * vt[[q, j]].conj();
                }
            }
            a[[p, q]] = acc / cr(s[p]);
        }
    }
    let zs = a
        .eigvals()
        .map_err(|e| CoreError::Numerical(format!("pencil eigenvalues failed: {e}")))?;

    let mut poles: Vec<Complex64> = zs
        .iter()
        .map(|&z| {
            if z.norm() < 1e-300 {
                // A annihilated direction decays faster than the grid
                // resolves; pin it to a fast real decay.
                Complex64::new(-1.0 / dt, 0.0)
            } else {
                z.ln() / cr(dt)
            }
        })
        .collect();
    let reflected = stabilize(&mut poles);
    let residues = solve_residues(&poles, &ts, &f)?;
    Ok(ExpModes {
        poles,
        residues,
        reflected,
        refine_diverged: false,
    })
}

/// Residual vector `c'(t_i) − f_i` with the residues held fixed.
fn fixed_residue_residual(
    poles: &[Complex64],
    residues: &[Complex64],
    ts: &[f64],
    f: &[Complex64],
) -> Vec<Complex64> {
    ts.iter()
        .zip(f)
        .map(|(&t, &fi)| {
            let model: Complex64 = poles
                .iter()
                .zip(residues)
                .map(|(&l, &w)| w * (l * cr(t)).exp())
                .sum();
            model - fi
        })
        .collect()
}

/// Real Jacobian of the fixed-residue residual with respect to
/// `(Re λ_1, Im λ_1, …)`: the complex column for pole `k` is
/// `w_k t e^{λ_k t}`, split into real and imaginary rows.
fn fixed_residue_jacobian(
    poles: &[Complex64],
    residues: &[Complex64],
    ts: &[f64],
) -> Array2<f64> {
    let (g, k) = (ts.len(), poles.len());
    let mut jac = Array2::zeros((2 * g, 2 * k));
    for (i, &t) in ts.iter().enumerate() {
        for (kk, (&l, &w)) in poles.iter().zip(residues).enumerate() {
            let col = w * cr(t) * (l * cr(t)).exp();
            // ∂/∂Re λ
            jac[[i, 2 * kk]] = col.re;
            jac[[g + i, 2 * kk]] = col.im;
            // ∂/∂Im λ multiplies the column by i.
            jac[[i, 2 * kk + 1]] = -col.im;
            jac[[g + i, 2 * kk + 1]] = col.re;
        }
    }
    jac
}

fn l2_norm(r: &[Complex64]) -> f64 {
    r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Residual of the projected problem: residues re-solved for these poles.
fn projected_residual(poles: &[Complex64], ts: &[f64], f: &[Complex64]) -> Result<f64> {
    let residues = solve_residues(poles, ts, f)?;
    Ok(l2_norm(&fixed_residue_residual(poles, &residues, ts, f)))
}

/// Merge poles closer than the distinctness tolerance and re-solve residues.
fn merge_close_poles(
    poles: Vec<Complex64>,
    ts: &[f64],
    f: &[Complex64],
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let mut kept: Vec<Complex64> = Vec::with_capacity(poles.len());
    for l in poles {
        if !kept.iter().any(|&p| (p - l).norm() <= 1e-10) {
            kept.push(l);
        }
    }
    let residues = solve_residues(&kept, ts, f)?;
    Ok((kept, residues))
}

/// Variable-projection Gauss–Newton refinement of the poles: residues are
/// re-solved at every trial point, steps come from the fixed-residue
/// Jacobian, and a backtracking line search keeps the projected residual
/// monotonically nonincreasing. Stability (`Re λ ≤ 0`) is enforced on every
/// iterate.
pub fn refine_ls(modes: &ExpModes, samples: &SampledBcf) -> Result<ExpModes> {
    let (ts, f) = scalar_series(samples)?;
    if modes.k() == 0 {
        return Ok(modes.clone());
    }
    let mut poles = modes.poles.clone();
    stabilize(&mut poles);
    let res0 = projected_residual(&poles, &ts, &f)?;
    let floor = 1e-15 * (1.0 + l2_norm(&f));
    let mut res_prev = res0;

    for _ in 0..200 {
        if res_prev < floor {
            break;
        }
        let residues = solve_residues(&poles, &ts, &f)?;
        let r = fixed_residue_residual(&poles, &residues, &ts, &f);
        let jac = fixed_residue_jacobian(&poles, &residues, &ts);
        let mut rhs = Array1::zeros(2 * ts.len());
        for (i, z) in r.iter().enumerate() {
            rhs[i] = -z.re;
            rhs[ts.len() + i] = -z.im;
        }
        let step = jac
            .least_squares(&rhs)
            .map_err(|e| CoreError::Numerical(format!("refinement step failed: {e}")))?
            .solution;

        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha >= 1e-8 {
            let mut trial: Vec<Complex64> = poles
                .iter()
                .enumerate()
                .map(|(kk, &l)| {
                    l + cr(alpha) * Complex64::new(step[2 * kk], step[2 * kk + 1])
                })
                .collect();
            stabilize(&mut trial);
            let res_trial = projected_residual(&trial, &ts, &f)?;
            if res_trial < res_prev {
                accepted = Some((trial, res_trial));
                break;
            }
            alpha *= 0.5;
        }
        let Some((trial, res_trial)) = accepted else {
            break;
        };
        // Monotone line search makes growth impossible; the guard documents
        // the contract for any future step rule.
        if res_trial > 10.0 * res0 {
            let mut out = modes.clone();
            out.refine_diverged = true;
            return Ok(out);
        }
        let gain = (res_prev - res_trial) / res_prev.max(1e-300);
        poles = trial;
        res_prev = res_trial;
        if gain < 1e-12 {
            break;
        }
    }

    let (poles, residues) = merge_close_poles(poles, &ts, &f)?;
    Ok(ExpModes {
        poles,
        residues,
        reflected: modes.reflected,
        refine_diverged: false,
    })
}

/// Realize an exponential sum as damped modes: `ω_k = −Im λ_k`,
/// `γ_k = −Re λ_k`, and `g_k − i m_k` the square root of `w_k` with
/// `Re ≥ 0`, ties broken toward `Im ≤ 0`.
pub fn modes_to_pseudomode(modes: &ExpModes) -> Result<PseudomodeParams> {
    let mut omega = Vec::with_capacity(modes.k());
    let mut gamma = Vec::with_capacity(modes.k());
    let mut g = Vec::with_capacity(modes.k());
    let mut m = Vec::with_capacity(modes.k());
    for (&l, &w) in modes.poles.iter().zip(&modes.residues) {
        if l.re > 1e-12 {
            return Err(CoreError::InvalidArgument(format!(
                "unstable pole {l} cannot be realized as a damped mode"
            )));
        }
        omega.push(-l.im);
        gamma.push((-l.re).max(0.0));
        let mut s = w.sqrt();
        if s.re < 0.0 || (s.re == 0.0 && s.im > 0.0) {
            s = -s;
        }
        g.push(s.re);
        m.push(-s.im);
    }
    Ok(PseudomodeParams { omega, gamma, g, m })
}

/// Assemble-ready model description with the fitted environment: `K` diagonal
/// modes under the caller's system. Non-contractive whenever any `m_k ≠ 0`.
pub fn pseudomode_spec(
    params: &PseudomodeParams,
    sys_hamiltonian: CMat,
    sys_jumps: Vec<CMat>,
    fock_cutoff: usize,
) -> Result<SpinBosonSpec> {
    let k = params.k();
    if k == 0 {
        return Err(CoreError::InvalidArgument(
            "cannot build an environment with zero modes".into(),
        ));
    }
    let contractive = params.is_contractive();
    let mut env_h = CMat::zeros((k, k));
    let mut env_gamma = CMat::zeros((k, k));
    let mut coupling_g = CMat::zeros((1, k));
    let mut coupling_m = CMat::zeros((1, k));
    for i in 0..k {
        env_h[[i, i]] = cr(params.omega[i]);
        env_gamma[[i, i]] = cr(params.gamma[i]);
        coupling_g[[0, i]] = cr(params.g[i]);
        // Sub-fp non-CP amplitudes are numerical residue of the square root;
        // the contractive realization requires M to vanish identically.
        if !contractive {
            coupling_m[[0, i]] = cr(params.m[i]);
        }
    }
    let dynamics = if contractive {
        DynamicsKind::Lindblad
    } else {
        DynamicsKind::QuasiLindblad
    };
    Ok(SpinBosonSpec {
        n: 1,
        sys_hamiltonian,
        sys_jumps,
        n_env: k,
        env_h,
        env_gamma,
        coupling_g,
        coupling_m,
        dynamics,
        fock_cutoff,
    })
}

/// Full pipeline: pencil initialization, refinement, mode realization, and
/// the `ε₁` certificate. With `k = 0` the certificate compares the target
/// against the decoupled environment: `ε₁ = 4‖c‖_{L¹}`.
pub fn fit_and_certify(
    target: FitTarget,
    k: usize,
    horizon: f64,
    grid: usize,
) -> Result<FitResult> {
    let owned;
    let samples: &SampledBcf = match target {
        FitTarget::Closed(cf) => {
            owned = sample(|t| cf.eval(t), horizon, grid)?;
            &owned
        }
        FitTarget::Samples(s) => {
            let last = *s.t_grid.last().ok_or_else(|| {
                CoreError::InvalidArgument("need at least two samples".into())
            })?;
            if (last - horizon).abs() > 1e-9 * (1.0 + horizon) {
                return Err(CoreError::InvalidArgument(format!(
                    "samples end at {last}, not at the requested horizon {horizon}"
                )));
            }
            s
        }
    };
    let (ts, f) = scalar_series(samples)?;
    let dt = ts[1] - ts[0];

    let modes = if k == 0 {
        ExpModes {
            poles: vec![],
            residues: vec![],
            reflected: false,
            refine_diverged: false,
        }
    } else {
        refine_ls(&pencil_fit(samples, k)?, samples)?
    };
    let params = modes_to_pseudomode(&modes)?;

    let gaps: Vec<f64> = ts
        .iter()
        .zip(&f)
        .map(|(&t, &fi)| (modes.eval(t) - fi).norm())
        .collect();
    let residual_linf = gaps.iter().fold(0.0, |m, &v| f64::max(m, v));
    let total: f64 = gaps.iter().sum();
    let residual_l1 = dt * (total - 0.5 * (gaps[0] + gaps[gaps.len() - 1]));
    let contractive = params.is_contractive();

    Ok(FitResult {
        modes,
        params,
        residual_linf,
        residual_l1,
        eps1: 4.0 * residual_l1,
        horizon,
        contractive,
    })
}
