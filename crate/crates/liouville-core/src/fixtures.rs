//! Small reference models shared by the unit tests of several modules.
//!
//! One spin-boson and one fermionic impurity configuration, each in the
//! three dynamics variants. Parameters are chosen so every closed-form
//! quantity stays well inside its truncation tolerance while keeping the
//! joint Hilbert spaces tiny.

use ndarray::arr2;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::{dagger, CMat};
use crate::models::{spin_chain_hamiltonian, DynamicsKind, FermionImpuritySpec, SpinBosonSpec};

pub(crate) fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub(crate) fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> CMat {
    let x = CMat::from_shape_fn((d, d), |_| {
        c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    });
    (&x + &dagger(&x)) * c(0.5, 0.0)
}

/// One spin site with a damped bosonic mode and a decaying system jump.
pub(crate) fn lindblad_spin_boson() -> SpinBosonSpec {
    SpinBosonSpec {
        n: 1,
        sys_hamiltonian: spin_chain_hamiltonian(&[1.0], &[0.4]),
        sys_jumps: vec![arr2(&[[c(0.0, 0.0), c(0.3, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]])],
        n_env: 1,
        env_h: arr2(&[[c(1.0, 0.0)]]),
        env_gamma: arr2(&[[c(0.5, 0.0)]]),
        coupling_g: arr2(&[[c(0.4, 0.1)]]),
        coupling_m: arr2(&[[c(0.0, 0.0)]]),
        dynamics: DynamicsKind::Lindblad,
        fock_cutoff: 4,
    }
}

/// Closed joint evolution against a thermal mode; no system jumps so the
/// total Hamiltonian exists.
pub(crate) fn unitary_spin_boson() -> SpinBosonSpec {
    let mut spec = lindblad_spin_boson();
    spec.sys_jumps = vec![];
    spec.env_gamma = arr2(&[[c(0.0, 0.0)]]);
    spec.dynamics = DynamicsKind::Unitary { beta: 3.0 };
    spec.fock_cutoff = 8;
    spec
}

pub(crate) fn quasi_spin_boson() -> SpinBosonSpec {
    let mut spec = lindblad_spin_boson();
    spec.coupling_m = arr2(&[[c(0.3, 0.1)]]);
    spec.dynamics = DynamicsKind::QuasiLindblad;
    spec
}

/// Single impurity level against one filled and one empty reservoir mode.
pub(crate) fn lindblad_fermion() -> FermionImpuritySpec {
    FermionImpuritySpec {
        n: 1,
        sys_h: arr2(&[[c(0.3, 0.0)]]),
        sys_interaction: None,
        sys_jumps: vec![],
        n_env: 2,
        n_split: 1,
        env_h: arr2(&[[c(0.8, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-0.5, 0.0)]]),
        gamma_minus: arr2(&[[c(0.5, 0.0)]]),
        gamma_plus: arr2(&[[c(0.7, 0.0)]]),
        coupling_nu: arr2(&[[c(0.4, 0.1), c(0.3, -0.2)]]),
        coupling_m: arr2(&[[c(0.0, 0.0), c(0.0, 0.0)]]),
        dynamics: DynamicsKind::Lindblad,
    }
}

/// Thermal reservoir with mode mixing; the Gibbs state is exact here, so
/// correlation identities hold to machine precision.
pub(crate) fn unitary_fermion() -> FermionImpuritySpec {
    let mut spec = lindblad_fermion();
    spec.gamma_minus = CMat::zeros((1, 1));
    spec.gamma_plus = CMat::zeros((1, 1));
    spec.env_h = arr2(&[[c(0.6, 0.0), c(0.2, 0.1)], [c(0.2, -0.1), c(-0.4, 0.0)]]);
    spec.dynamics = DynamicsKind::Unitary { beta: 2.0 };
    spec
}

pub(crate) fn quasi_fermion() -> FermionImpuritySpec {
    let mut spec = lindblad_fermion();
    spec.coupling_m = arr2(&[[c(0.2, -0.1), c(0.15, 0.05)]]);
    spec.dynamics = DynamicsKind::QuasiLindblad;
    spec
}
