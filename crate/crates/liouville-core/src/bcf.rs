//! Bath correlation functions.
//!
//! Every model kind admits a closed-form two-point correlation: a sum of
//! matrix exponentials `Σ A e^{Zt} B` (optionally conjugated). This module
//! builds those forms, assembles the N×N superoperator correlation matrix
//! `C_{αα'}(t)` that drives the perturbative expansion, evaluates the same
//! matrix numerically through the environment propagator as an independent
//! cross-check, and samples correlation functions on uniform grids.

use ndarray::s;
use ndarray_linalg::EigVals;
use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::fock::Statistics;
use crate::linalg::{dagger, eigh_decomp, expm, herm_func, vectorize, CMat};
use crate::models::{
    check_stationarity, AssembledModel, DynamicsKind, FermionImpuritySpec, SpinBosonSpec,
};
use crate::superop::{boson_superops, fermion_superops, LadderSuperOps, SuperOp};

const IM: Complex64 = Complex64::new(0.0, 1.0);

fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// One exponential term `A e^{Zt} B` of a closed-form correlation function.
#[derive(Debug, Clone)]
pub struct BcfTerm {
    pub a: CMat,
    pub z: CMat,
    pub b: CMat,
    /// Conjugated terms contribute `(A e^{Zt} B)*`.
    pub conjugated: bool,
}

/// Closed-form correlation function `c(t) = Σ_terms (A e^{Zt} B)^{(*)}`,
/// defined for `t ≥ 0`.
#[derive(Debug, Clone)]
pub struct BcfClosedForm {
    dim: usize,
    terms: Vec<BcfTerm>,
}

impl BcfClosedForm {
    /// Validate shapes and the decay condition: every `Z` must have spectral
    /// abscissa at most 1e-10.
    pub fn new(dim: usize, terms: Vec<BcfTerm>) -> Result<Self> {
        for term in &terms {
            let q = term.z.nrows();
            if term.z.ncols() != q {
                return Err(CoreError::InvalidArgument(
                    "exponent matrix must be square".into(),
                ));
            }
            if term.a.nrows() != dim || term.a.ncols() != q {
                return Err(CoreError::InvalidArgument(
                    "left factor shape mismatch".into(),
                ));
            }
            if term.b.nrows() != q || term.b.ncols() != dim {
                return Err(CoreError::InvalidArgument(
                    "right factor shape mismatch".into(),
                ));
            }
            if q > 0 {
                let eigs = term.z.eigvals()?;
                let abscissa = eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
                if abscissa > 1e-10 {
                    return Err(CoreError::InvalidModel(format!(
                        "correlation exponent grows: spectral abscissa {abscissa:.3e}"
                    )));
                }
            }
        }
        Ok(Self { dim, terms })
    }

    /// Matrix dimension of `c(t)`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[BcfTerm] {
        &self.terms
    }

    /// Evaluate at `t ≥ 0`.
    pub fn eval(&self, t: f64) -> Result<CMat> {
        if t < 0.0 {
            return Err(CoreError::InvalidArgument(format!(
                "correlation functions are evaluated for t ≥ 0, got {t}"
            )));
        }
        let mut out = CMat::zeros((self.dim, self.dim));
        for term in &self.terms {
            let prop = expm(&(&term.z * cr(t)))?;
            let val = term.a.dot(&prop).dot(&term.b);
            if term.conjugated {
                out += &val.mapv(|z| z.conj());
            } else {
                out += &val;
            }
        }
        Ok(out)
    }
}

/// Greater/lesser hybridization functions of a fermionic environment.
#[derive(Debug, Clone)]
pub struct HybridizationPair {
    pub greater: BcfClosedForm,
    pub lesser: BcfClosedForm,
}

fn check_positive_modes(h: &CMat) -> Result<()> {
    let eigs = eigh_decomp(h)?.0;
    let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(CoreError::InvalidModel(format!(
            "thermal bosonic correlation needs a positive definite mode matrix, \
             min eigenvalue {min:.3e}"
        )));
    }
    Ok(())
}

/// Closed-form spin-boson correlation `c(t)`, an n×n matrix function.
pub fn bcf_spin_boson(spec: &SpinBosonSpec) -> Result<BcfClosedForm> {
    spec.validate()?;
    let g = spec.coupling_g.clone();
    let gd = dagger(&g);
    match spec.dynamics {
        DynamicsKind::Unitary { beta } => {
            check_positive_modes(&spec.env_h)?;
            let z = &spec.env_h * (-IM);
            // (I − e^{−βH})⁻¹ and (e^{βH} − I)⁻¹ share the eigenbasis of H.
            let plus = herm_func(&spec.env_h, |w| cr(1.0 / (1.0 - (-beta * w).exp())))?;
            let minus = herm_func(&spec.env_h, |w| cr(1.0 / ((beta * w).exp() - 1.0)))?;
            BcfClosedForm::new(
                spec.n,
                vec![
                    BcfTerm {
                        a: g.clone(),
                        z: z.clone(),
                        b: plus.dot(&gd),
                        conjugated: false,
                    },
                    BcfTerm {
                        a: g,
                        z,
                        b: minus.dot(&gd),
                        conjugated: true,
                    },
                ],
            )
        }
        DynamicsKind::Lindblad => {
            let z = &(&spec.env_h * (-IM)) - &spec.env_gamma;
            BcfClosedForm::new(
                spec.n,
                vec![BcfTerm {
                    a: g,
                    z,
                    b: gd,
                    conjugated: false,
                }],
            )
        }
        DynamicsKind::QuasiLindblad => {
            let z = &(&spec.env_h * (-IM)) - &spec.env_gamma;
            let a = &g - &(&spec.coupling_m * IM);
            let b = &gd - &(dagger(&spec.coupling_m) * IM);
            BcfClosedForm::new(
                spec.n,
                vec![BcfTerm {
                    a,
                    z,
                    b,
                    conjugated: false,
                }],
            )
        }
    }
}

/// Closed-form greater/lesser hybridization functions of a fermionic model.
pub fn hyb_fermion(spec: &FermionImpuritySpec) -> Result<HybridizationPair> {
    spec.validate()?;
    let nu = spec.coupling_nu.clone();
    match spec.dynamics {
        DynamicsKind::Unitary { beta } => {
            let z = &spec.env_h * (-IM);
            let empty = herm_func(&spec.env_h, |w| cr(1.0 / (1.0 + (-beta * w).exp())))?;
            let filled = herm_func(&spec.env_h, |w| cr(1.0 / ((beta * w).exp() + 1.0)))?;
            let nud = dagger(&nu);
            Ok(HybridizationPair {
                greater: BcfClosedForm::new(
                    spec.n,
                    vec![BcfTerm {
                        a: nu.clone(),
                        z: z.clone(),
                        b: empty.dot(&nud),
                        conjugated: false,
                    }],
                )?,
                lesser: BcfClosedForm::new(
                    spec.n,
                    vec![BcfTerm {
                        a: nu,
                        z,
                        b: filled.dot(&nud),
                        conjugated: false,
                    }],
                )?,
            })
        }
        DynamicsKind::Lindblad | DynamicsKind::QuasiLindblad => {
            let n1 = spec.n_split;
            let h_minus = spec.env_h.slice(s![..n1, ..n1]).to_owned();
            let h_plus = spec.env_h.slice(s![n1.., n1..]).to_owned();
            let nu_minus = nu.slice(s![.., ..n1]).to_owned();
            let nu_plus = nu.slice(s![.., n1..]).to_owned();
            // The non-CP coupling shifts the left factor to ν − iM and the
            // right factor to ν† − iM†; the right factor is not the adjoint
            // of the left one.
            let (a_minus, b_minus, a_plus, b_plus) =
                if spec.dynamics == DynamicsKind::QuasiLindblad {
                    let m_minus = spec.coupling_m.slice(s![.., ..n1]).to_owned();
                    let m_plus = spec.coupling_m.slice(s![.., n1..]).to_owned();
                    (
                        &nu_minus - &(&m_minus * IM),
                        &dagger(&nu_minus) - &(dagger(&m_minus) * IM),
                        &nu_plus - &(&m_plus * IM),
                        &dagger(&nu_plus) - &(dagger(&m_plus) * IM),
                    )
                } else {
                    (
                        nu_minus.clone(),
                        dagger(&nu_minus),
                        nu_plus.clone(),
                        dagger(&nu_plus),
                    )
                };
            let z_minus = &(&h_minus * (-IM)) - &spec.gamma_minus;
            let z_plus = &(&h_plus * (-IM)) - &spec.gamma_plus;
            Ok(HybridizationPair {
                greater: BcfClosedForm::new(
                    spec.n,
                    vec![BcfTerm {
                        a: a_minus,
                        z: z_minus,
                        b: b_minus,
                        conjugated: false,
                    }],
                )?,
                lesser: BcfClosedForm::new(
                    spec.n,
                    vec![BcfTerm {
                        a: a_plus,
                        z: z_plus,
                        b: b_plus,
                        conjugated: false,
                    }],
                )?,
            })
        }
    }
}

/// N×N superoperator correlation matrix assembled from model-level
/// correlation functions.
#[derive(Debug, Clone)]
pub enum SuperBcf {
    SpinBoson { n: usize, c: BcfClosedForm },
    Fermion { n: usize, hyb: HybridizationPair },
}

impl SuperBcf {
    /// Total coupling index count N (2n spin-boson, 4n fermion).
    pub fn n_indices(&self) -> usize {
        match self {
            SuperBcf::SpinBoson { n, .. } => 2 * n,
            SuperBcf::Fermion { n, .. } => 4 * n,
        }
    }

    /// Spread an n×n spin-boson correlation value over the 2n×2n index
    /// pattern.
    pub fn spread_spin_boson(c: &CMat) -> CMat {
        let n = c.nrows();
        let mut out = CMat::zeros((2 * n, 2 * n));
        for i in 0..n {
            for j in 0..n {
                let v = c[[i, j]];
                out[[2 * i, 2 * j]] = -v;
                out[[2 * i + 1, 2 * j]] = v;
                out[[2 * i, 2 * j + 1]] = v.conj();
                out[[2 * i + 1, 2 * j + 1]] = -v.conj();
            }
        }
        out
    }

    /// Spread greater/lesser hybridization values over the 4n×4n fermionic
    /// index pattern.
    pub fn spread_fermion(greater: &CMat, lesser: &CMat) -> CMat {
        let n = greater.nrows();
        let mut out = CMat::zeros((4 * n, 4 * n));
        for i in 0..n {
            for j in 0..n {
                let gt = greater[[i, j]];
                let ls = lesser[[i, j]];
                // Block slots (0..3) correspond to the four coupling
                // superoperators of each impurity mode.
                out[[4 * i, 4 * j + 1]] = -gt;
                out[[4 * i + 3, 4 * j + 1]] = -gt;
                out[[4 * i, 4 * j + 2]] = -ls;
                out[[4 * i + 3, 4 * j + 2]] = -ls;
                out[[4 * i + 1, 4 * j + 3]] = gt.conj();
                out[[4 * i + 2, 4 * j + 3]] = -gt.conj();
                out[[4 * i + 2, 4 * j]] = ls.conj();
                out[[4 * i + 1, 4 * j]] = -ls.conj();
            }
        }
        out
    }

    /// Evaluate the full N×N matrix at `t ≥ 0`.
    pub fn eval_matrix(&self, t: f64) -> Result<CMat> {
        match self {
            SuperBcf::SpinBoson { c, .. } => Ok(Self::spread_spin_boson(&c.eval(t)?)),
            SuperBcf::Fermion { hyb, .. } => Ok(Self::spread_fermion(
                &hyb.greater.eval(t)?,
                &hyb.lesser.eval(t)?,
            )),
        }
    }

    /// Evaluate a single entry.
    pub fn eval(&self, alpha: usize, alpha_p: usize, t: f64) -> Result<Complex64> {
        let m = self.eval_matrix(t)?;
        let n = self.n_indices();
        if alpha >= n || alpha_p >= n {
            return Err(CoreError::InvalidArgument(format!(
                "coupling index out of range: ({alpha}, {alpha_p}) with N = {n}"
            )));
        }
        Ok(m[[alpha, alpha_p]])
    }
}

/// SuperBcf from a spin-boson spec.
pub fn super_bcf_spin_boson(spec: &SpinBosonSpec) -> Result<SuperBcf> {
    Ok(SuperBcf::SpinBoson {
        n: spec.n,
        c: bcf_spin_boson(spec)?,
    })
}

/// SuperBcf from a fermionic impurity spec.
pub fn super_bcf_fermion(spec: &FermionImpuritySpec) -> Result<SuperBcf> {
    Ok(SuperBcf::Fermion {
        n: spec.n,
        hyb: hyb_fermion(spec)?,
    })
}

pub(crate) fn require_stationary(model: &AssembledModel) -> Result<()> {
    let res = check_stationarity(&model.l_env, &model.rho_env0);
    if res >= 1e-8 {
        return Err(CoreError::InvalidState(format!(
            "environment initial state is not stationary: residual {res:.3e}"
        )));
    }
    Ok(())
}

pub(crate) fn vec_trace(v: &ndarray::Array1<Complex64>, dim: usize) -> Complex64 {
    (0..dim).map(|i| v[i * dim + i]).sum()
}

/// Numerical two-point superoperator correlation matrix
/// `C_{αα'}(t) = tr(E_α e^{L_e t} E_{α'} ρ_E(0))`.
pub fn bcf_numeric(model: &AssembledModel, t: f64) -> Result<CMat> {
    if t < 0.0 {
        return Err(CoreError::InvalidArgument(
            "correlation functions are evaluated for t ≥ 0".into(),
        ));
    }
    require_stationary(model)?;
    let n = model.n_coupling;
    let de = model.dim_env;
    let prop = expm(&(model.l_env.mat() * cr(t)))?;
    let rho = vectorize(model.rho_env0.mat());
    let mut out = CMat::zeros((n, n));
    for ap in 0..n {
        let pushed = prop.dot(&model.e_ops[ap].apply_vec(&rho));
        for a in 0..n {
            out[[a, ap]] = vec_trace(&model.e_ops[a].apply_vec(&pushed), de);
        }
    }
    Ok(out)
}

/// Ladder superoperator families available for pair correlation tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LadderFamily {
    /// Left annihilator `ρ ↦ a_k ρ` (parity-weaved for fermions).
    AnnL,
    /// Left creator.
    CreL,
    /// Right annihilator family `ρ ↦ ρ a_k†` (up to parity weaving).
    AnnR,
    /// Right creator family.
    CreR,
}

fn env_ladders(model: &AssembledModel) -> Result<LadderSuperOps> {
    match model.env_algebra.kind() {
        Statistics::Bosonic => boson_superops(&model.env_algebra),
        Statistics::Fermionic => fermion_superops(&model.env_algebra),
    }
}

fn family<'a>(ladders: &'a LadderSuperOps, which: LadderFamily) -> &'a [SuperOp] {
    match which {
        LadderFamily::AnnL => &ladders.ann_l,
        LadderFamily::CreL => &ladders.cre_l,
        LadderFamily::AnnR => &ladders.ann_r,
        LadderFamily::CreR => &ladders.cre_r,
    }
}

/// Pair correlation table `tr(O_k e^{L_e t} O'_l ρ_E(0))` over two ladder
/// superoperator families, an N_e×N_e matrix.
pub fn pair_corr_table(
    model: &AssembledModel,
    first: LadderFamily,
    second: LadderFamily,
    t: f64,
) -> Result<CMat> {
    require_stationary(model)?;
    let ladders = env_ladders(model)?;
    let outer = family(&ladders, first);
    let inner = family(&ladders, second);
    let ne = model.env_algebra.n_modes();
    let de = model.dim_env;
    let prop = expm(&(model.l_env.mat() * cr(t)))?;
    let rho = vectorize(model.rho_env0.mat());
    let mut out = CMat::zeros((ne, ne));
    for l in 0..ne {
        let pushed = prop.dot(&inner[l].apply_vec(&rho));
        for k in 0..ne {
            out[[k, l]] = vec_trace(&outer[k].apply_vec(&pushed), de);
        }
    }
    Ok(out)
}

/// Uniform-grid samples of a matrix-valued function of time.
#[derive(Debug, Clone)]
pub struct SampledBcf {
    pub t_grid: Vec<f64>,
    pub samples: Vec<CMat>,
}

impl SampledBcf {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |m| m.nrows())
    }

    /// Grid spacing.
    pub fn dt(&self) -> f64 {
        if self.t_grid.len() < 2 {
            0.0
        } else {
            self.t_grid[1] - self.t_grid[0]
        }
    }
}

/// Sample a function on the uniform grid `0, T/G, …, T`.
pub fn sample(
    f: impl Fn(f64) -> Result<CMat>,
    horizon: f64,
    grid: usize,
) -> Result<SampledBcf> {
    if horizon <= 0.0 {
        return Err(CoreError::InvalidArgument("horizon must be positive".into()));
    }
    if grid < 2 {
        return Err(CoreError::InvalidArgument(
            "grid must have at least 2 intervals".into(),
        ));
    }
    let mut t_grid = Vec::with_capacity(grid + 1);
    let mut samples = Vec::with_capacity(grid + 1);
    for i in 0..=grid {
        let t = horizon * i as f64 / grid as f64;
        let val = f(t)?;
        if val.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(CoreError::Numerical(format!(
                "correlation sample at t = {t} is not finite"
            )));
        }
        t_grid.push(t);
        samples.push(val);
    }
    Ok(SampledBcf { t_grid, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{
        c, lindblad_fermion, lindblad_spin_boson, quasi_fermion, quasi_spin_boson,
        unitary_fermion, unitary_spin_boson,
    };
    use crate::linalg::{eye, frob_norm};
    use crate::models::{assemble_fermion, assemble_spin_boson};
    use ndarray::arr2;

    #[test]
    fn scalar_lindblad_matches_exponential() {
        let spec = lindblad_spin_boson();
        let form = bcf_spin_boson(&spec).unwrap();
        let g2 = spec.coupling_g[[0, 0]].norm_sqr();
        for &t in &[0.0, 0.3, 1.1, 2.7] {
            let expect = c(g2, 0.0) * (c(-0.5, -1.0) * t).exp();
            let got = form.eval(t).unwrap()[[0, 0]];
            assert!((got - expect).norm() < 1e-13, "t={t}: {got} vs {expect}");
        }
    }

    #[test]
    fn scalar_unitary_matches_coth_form() {
        let spec = unitary_spin_boson();
        let mut spec = spec;
        spec.coupling_g = arr2(&[[c(0.4, 0.0)]]);
        let beta = 3.0f64;
        let omega = 1.0f64;
        let form = bcf_spin_boson(&spec).unwrap();
        let coth = 1.0 / (beta * omega / 2.0).tanh();
        for &t in &[0.0, 0.4, 1.3] {
            let expect =
                c(0.4 * 0.4, 0.0) * c(coth * (omega * t).cos(), -(omega * t).sin());
            let got = form.eval(t).unwrap()[[0, 0]];
            assert!((got - expect).norm() < 1e-13, "t={t}: {got} vs {expect}");
        }
    }

    #[test]
    fn quasi_with_zero_m_reduces_to_lindblad() {
        let mut spec = lindblad_spin_boson();
        spec.dynamics = DynamicsKind::QuasiLindblad;
        let quasi = bcf_spin_boson(&spec).unwrap();
        let lind = bcf_spin_boson(&lindblad_spin_boson()).unwrap();
        for &t in &[0.0, 0.7, 2.0] {
            let gap = frob_norm(&(quasi.eval(t).unwrap() - lind.eval(t).unwrap()));
            assert!(gap < 1e-14);
        }
        let mut fspec = lindblad_fermion();
        fspec.dynamics = DynamicsKind::QuasiLindblad;
        let qh = hyb_fermion(&fspec).unwrap();
        let lh = hyb_fermion(&lindblad_fermion()).unwrap();
        for &t in &[0.0, 0.7, 2.0] {
            assert!(
                frob_norm(&(qh.greater.eval(t).unwrap() - lh.greater.eval(t).unwrap())) < 1e-14
            );
            assert!(
                frob_norm(&(qh.lesser.eval(t).unwrap() - lh.lesser.eval(t).unwrap())) < 1e-14
            );
        }
    }

    #[test]
    fn scalar_unitary_hybridization() {
        let mut spec = unitary_fermion();
        spec.n_env = 1;
        spec.n_split = 1;
        spec.env_h = arr2(&[[c(1.0, 0.0)]]);
        spec.gamma_minus = CMat::zeros((1, 1));
        spec.gamma_plus = CMat::zeros((0, 0));
        spec.coupling_nu = arr2(&[[c(0.6, 0.2)]]);
        spec.coupling_m = CMat::zeros((1, 1));
        let beta = 2.0;
        spec.dynamics = DynamicsKind::Unitary { beta };
        let hyb = hyb_fermion(&spec).unwrap();
        let nu2 = spec.coupling_nu[[0, 0]].norm_sqr();
        for &t in &[0.0, 0.5, 1.4] {
            let expect = c(nu2 / (1.0 + (-beta).exp()), 0.0) * (c(0.0, -t)).exp();
            let got = hyb.greater.eval(t).unwrap()[[0, 0]];
            assert!((got - expect).norm() < 1e-13);
        }
        // Deep in the β→∞ limit the filled-band part of an ω>0 mode vanishes.
        spec.dynamics = DynamicsKind::Unitary { beta: 60.0 };
        let cold = hyb_fermion(&spec).unwrap();
        assert!(cold.lesser.eval(0.8).unwrap()[[0, 0]].norm() < 1e-12);
    }

    #[test]
    fn unitary_correlation_hermitian_at_zero() {
        let mut spec = unitary_spin_boson();
        spec.n = 1;
        spec.n_env = 2;
        spec.env_h = arr2(&[[c(1.0, 0.0), c(0.2, 0.1)], [c(0.2, -0.1), c(1.4, 0.0)]]);
        spec.env_gamma = CMat::zeros((2, 2));
        spec.coupling_g = arr2(&[[c(0.4, 0.1), c(0.2, -0.3)]]);
        spec.coupling_m = CMat::zeros((2, 2));
        // c(0) is n×n here with n = 1; use two spins for an actual matrix.
        let mut two = spec.clone();
        two.n = 2;
        two.sys_hamiltonian = crate::models::spin_chain_hamiltonian(&[1.0, 0.8], &[0.2, 0.0]);
        two.coupling_g = arr2(&[
            [c(0.4, 0.1), c(0.2, -0.3)],
            [c(0.1, 0.0), c(0.3, 0.2)],
        ]);
        two.coupling_m = CMat::zeros((2, 2));
        let form = bcf_spin_boson(&two).unwrap();
        let at0 = form.eval(0.0).unwrap();
        assert!(frob_norm(&(&at0 - &dagger(&at0))) < 1e-12);
        let _ = spec;
    }

    #[test]
    fn rejects_growing_exponent_and_negative_time() {
        let bad = BcfClosedForm::new(
            1,
            vec![BcfTerm {
                a: eye(1),
                z: arr2(&[[c(0.3, 0.0)]]),
                b: eye(1),
                conjugated: false,
            }],
        );
        assert!(bad.is_err());
        let ok = BcfClosedForm::new(
            1,
            vec![BcfTerm {
                a: eye(1),
                z: arr2(&[[c(-0.3, 1.0)]]),
                b: eye(1),
                conjugated: false,
            }],
        )
        .unwrap();
        assert!(ok.eval(-0.1).is_err());
        let growing = bcf_spin_boson(&SpinBosonSpec {
            env_h: arr2(&[[c(-1.0, 0.0)]]),
            ..unitary_spin_boson()
        });
        assert!(growing.is_err());
    }

    #[test]
    fn closed_form_matches_numeric_trace_all_kinds() {
        // Spin-boson, three dynamics kinds.
        for (spec, tol) in [
            (lindblad_spin_boson(), 1e-7),
            (quasi_spin_boson(), 1e-7),
            (unitary_spin_boson(), 1e-6),
        ] {
            let model = assemble_spin_boson(&spec, None).unwrap();
            let sb = super_bcf_spin_boson(&spec).unwrap();
            for i in 0..10 {
                let t = 3.0 * i as f64 / 9.0;
                let closed = sb.eval_matrix(t).unwrap();
                let numeric = bcf_numeric(&model, t).unwrap();
                let gap = (&closed - &numeric)
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                assert!(gap < tol, "spin-boson {:?} t={t}: gap {gap:.3e}", spec.dynamics);
            }
        }
        // Fermionic impurity, three dynamics kinds.
        for spec in [lindblad_fermion(), quasi_fermion(), unitary_fermion()] {
            let model = assemble_fermion(&spec, None).unwrap();
            let sb = super_bcf_fermion(&spec).unwrap();
            for i in 0..10 {
                let t = 3.0 * i as f64 / 9.0;
                let closed = sb.eval_matrix(t).unwrap();
                let numeric = bcf_numeric(&model, t).unwrap();
                let gap = (&closed - &numeric)
                    .iter()
                    .map(|z| z.norm())
                    .fold(0.0, f64::max);
                assert!(gap < 1e-7, "fermion {:?} t={t}: gap {gap:.3e}", spec.dynamics);
            }
        }
    }

    #[test]
    fn numeric_matrix_matches_index_pattern_at_zero() {
        let spec = lindblad_spin_boson();
        let model = assemble_spin_boson(&spec, None).unwrap();
        let c0 = bcf_numeric(&model, 0.0).unwrap();
        let gg = spec.coupling_g[[0, 0]].norm_sqr();
        assert!((c0[[0, 0]] - c(-gg, 0.0)).norm() < 1e-10);
        assert!((c0[[1, 0]] - c(gg, 0.0)).norm() < 1e-10);
        assert!((c0[[0, 1]] - c(gg, 0.0)).norm() < 1e-10);
        assert!((c0[[1, 1]] - c(-gg, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn fermionic_zero_pattern_holds_numerically() {
        let model = assemble_fermion(&unitary_fermion(), None).unwrap();
        let numeric = bcf_numeric(&model, 0.7).unwrap();
        // Nonzero slots per impurity block pair (i = j = 0 here).
        let listed = [
            (0usize, 1usize),
            (3, 1),
            (0, 2),
            (3, 2),
            (1, 3),
            (2, 3),
            (2, 0),
            (1, 0),
        ];
        for a in 0..4 {
            for ap in 0..4 {
                if listed.contains(&(a, ap)) {
                    continue;
                }
                assert!(
                    numeric[[a, ap]].norm() < 1e-10,
                    "entry ({a},{ap}) should vanish, got {}",
                    numeric[[a, ap]]
                );
            }
        }
    }

    #[test]
    fn pair_correlation_tables() {
        // Lindblad vacuum: the annihilator/creator table is the mode-space
        // propagator; the annihilator/annihilator table vanishes.
        let spec = lindblad_spin_boson();
        let model = assemble_spin_boson(&spec, None).unwrap();
        for &t in &[0.0, 0.6, 1.5] {
            let table = pair_corr_table(&model, LadderFamily::AnnL, LadderFamily::CreL, t).unwrap();
            let z = &(&spec.env_h * (-IM)) - &spec.env_gamma;
            let expect = expm(&(&z * c(t, 0.0))).unwrap();
            assert!(frob_norm(&(&table - &expect)) < 1e-10);
            let zero = pair_corr_table(&model, LadderFamily::AnnL, LadderFamily::AnnL, t).unwrap();
            assert!(frob_norm(&zero) < 1e-10);
        }
        // Thermal state: equal-time occupation factor (I − e^{−βH})⁻¹.
        let uspec = unitary_spin_boson();
        let umodel = assemble_spin_boson(&uspec, None).unwrap();
        let table = pair_corr_table(&umodel, LadderFamily::AnnL, LadderFamily::CreL, 0.0).unwrap();
        let expect = herm_func(&uspec.env_h, |w| cr(1.0 / (1.0 - (-3.0 * w).exp()))).unwrap();
        assert!(frob_norm(&(&table - &expect)) < 1e-6);
    }

    #[test]
    fn sampling_grid_is_uniform_and_exact() {
        let spec = lindblad_spin_boson();
        let form = bcf_spin_boson(&spec).unwrap();
        let sampled = sample(|t| form.eval(t), 2.0, 8).unwrap();
        assert_eq!(sampled.t_grid.len(), 9);
        assert!((sampled.dt() - 0.25).abs() < 1e-15);
        for (i, t) in sampled.t_grid.iter().enumerate() {
            let direct = form.eval(*t).unwrap();
            assert!(frob_norm(&(&sampled.samples[i] - &direct)) < 1e-15);
        }
        let zeros = sample(|_| Ok(CMat::zeros((2, 2))), 1.0, 4).unwrap();
        assert!(zeros.samples.iter().all(|m| frob_norm(m) == 0.0));
        assert!(sample(|t| form.eval(t), 0.0, 4).is_err());
        assert!(sample(|t| form.eval(t), 1.0, 1).is_err());
    }
}
