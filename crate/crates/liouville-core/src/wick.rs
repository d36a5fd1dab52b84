//! Higher-order correlation structure of Gaussian environments.
//!
//! The environment generators assembled in this crate are quadratic in the
//! ladder superoperators and act on stationary Gaussian states, so every
//! n-point coupling correlation reduces to two-point data: odd orders
//! vanish, and order 2m decomposes into a signed sum over the (2m−1)!!
//! pairings. This module evaluates n-point correlations directly through
//! the environment propagator and checks the pairing decomposition, which
//! is the property the resummed perturbative expansion rests on.

use num_complex::Complex64;

use crate::bcf::{require_stationary, vec_trace};
use crate::error::{CoreError, Result};
use crate::fock::Statistics;
use crate::linalg::{vectorize, PropagatorCache};
use crate::models::AssembledModel;

fn cr(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn check_indices(model: &AssembledModel, alphas: &[usize], times: &[f64]) -> Result<()> {
    if alphas.len() != times.len() {
        return Err(CoreError::InvalidArgument(format!(
            "{} coupling indices but {} times",
            alphas.len(),
            times.len()
        )));
    }
    if let Some(&bad) = alphas.iter().find(|&&a| a >= model.n_coupling) {
        return Err(CoreError::InvalidArgument(format!(
            "coupling index {bad} out of range for N = {}",
            model.n_coupling
        )));
    }
    if times.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(CoreError::InvalidArgument(
            "correlation times must be finite and ≥ 0".into(),
        ));
    }
    Ok(())
}

/// Chain evaluation `tr(E_{α₁} e^{L_e(t₁−t₂)} E_{α₂} ⋯ E_{αₙ} ρ_E(0))` for
/// non-ascending times. Callers validate ordering.
fn chain_eval(
    model: &AssembledModel,
    cache: &mut PropagatorCache,
    alphas: &[usize],
    times: &[f64],
) -> Result<Complex64> {
    let mut v = vectorize(model.rho_env0.mat());
    for i in (0..alphas.len()).rev() {
        v = model.e_ops[alphas[i]].apply_vec(&v);
        if i > 0 {
            v = cache.propagator(times[i - 1] - times[i])?.dot(&v);
        }
    }
    Ok(vec_trace(&v, model.dim_env))
}

/// n-point coupling correlation
/// `tr(E_{α₁} e^{L_e(t₁−t₂)} E_{α₂} ⋯ E_{αₙ} ρ_E(0))`
/// for strictly descending times `t₁ > t₂ > ⋯ > tₙ ≥ 0`.
///
/// The stationary initial state makes the value depend only on the gaps, so
/// with n = 2 this reduces to the two-point correlation matrix at `t₁ − t₂`.
pub fn npoint_bcf(model: &AssembledModel, alphas: &[usize], times: &[f64]) -> Result<Complex64> {
    check_indices(model, alphas, times)?;
    if alphas.is_empty() {
        return Err(CoreError::InvalidArgument(
            "n-point correlation needs at least one index".into(),
        ));
    }
    for w in times.windows(2) {
        if w[0] <= w[1] {
            return Err(CoreError::InvalidArgument(format!(
                "times must be strictly descending, got {} followed by {}",
                w[0], w[1]
            )));
        }
    }
    require_stationary(model)?;
    let mut cache = PropagatorCache::new(model.l_env.mat().clone());
    chain_eval(model, &mut cache, alphas, times)
}

/// All pairings of `{0, …, n−1}` in canonical form: every pair is written
/// (low, high) and pairs are ordered by their low members, so the flattened
/// pairing is the image list of a permutation with σ(2i−1) < σ(2i) and
/// σ(1) < σ(3) < ⋯. There are (n−1)!! pairings for even n.
pub fn pairings(n: usize) -> Vec<Vec<(usize, usize)>> {
    assert!(n % 2 == 0, "pairings exist only for even-sized sets");
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(n / 2);
    let items: Vec<usize> = (0..n).collect();
    pair_recurse(&items, &mut current, &mut out);
    out
}

fn pair_recurse(
    rest: &[usize],
    current: &mut Vec<(usize, usize)>,
    out: &mut Vec<Vec<(usize, usize)>>,
) {
    if rest.is_empty() {
        out.push(current.clone());
        return;
    }
    let first = rest[0];
    for j in 1..rest.len() {
        let partner = rest[j];
        let remaining: Vec<usize> = rest[1..]
            .iter()
            .copied()
            .filter(|&x| x != partner)
            .collect();
        current.push((first, partner));
        pair_recurse(&remaining, current, out);
        current.pop();
    }
}

/// Parity of a permutation given as its image list: +1 for even, −1 for odd,
/// from the inversion count (equal to a transposition count mod 2).
pub fn permutation_parity(perm: &[usize]) -> i32 {
    let mut inversions = 0usize;
    for i in 0..perm.len() {
        for j in (i + 1)..perm.len() {
            if perm[i] > perm[j] {
                inversions += 1;
            }
        }
    }
    if inversions % 2 == 0 {
        1
    } else {
        -1
    }
}

fn reorder_sign(signature: Statistics, perm: &[usize]) -> f64 {
    match signature {
        Statistics::Bosonic => 1.0,
        Statistics::Fermionic => permutation_parity(perm) as f64,
    }
}

/// Two-point value for arbitrary argument order. Descending arguments
/// evaluate directly; ascending ones are swapped, which contributes a
/// factor −1 for fermionic signatures.
fn two_point(
    model: &AssembledModel,
    cache: &mut PropagatorCache,
    signature: Statistics,
    a: usize,
    ap: usize,
    t1: f64,
    t2: f64,
) -> Result<Complex64> {
    if t1 >= t2 {
        let rho = vectorize(model.rho_env0.mat());
        let mut v = model.e_ops[ap].apply_vec(&rho);
        v = cache.propagator(t1 - t2)?.dot(&v);
        v = model.e_ops[a].apply_vec(&v);
        Ok(vec_trace(&v, model.dim_env))
    } else {
        let swapped = two_point(model, cache, signature, ap, a, t2, t1)?;
        Ok(match signature {
            Statistics::Bosonic => swapped,
            Statistics::Fermionic => -swapped,
        })
    }
}

/// Both sides of the pairing decomposition at one configuration.
#[derive(Debug, Clone, Copy)]
pub struct WickCheck {
    /// Direct n-point value at the given times: chain evaluation on the
    /// descending rearrangement with the reordering sign applied.
    pub lhs: Complex64,
    /// Signed sum over all pairings of two-point products.
    pub rhs: Complex64,
    /// `|lhs − rhs|`.
    pub gap: f64,
}

/// Check the pairing decomposition of an order-2m correlation at arbitrary
/// (not necessarily ordered) times in `[0, T]`, with 2m ≤ 6. `signature`
/// selects the plus (bosonic) or minus (fermionic) reordering sign used
/// both for sorting the left-hand side and for weighting pairings.
pub fn wick_check(
    model: &AssembledModel,
    alphas: &[usize],
    times: &[f64],
    signature: Statistics,
) -> Result<WickCheck> {
    check_indices(model, alphas, times)?;
    let n = alphas.len();
    if n % 2 != 0 || n == 0 || n > 6 {
        return Err(CoreError::InvalidArgument(format!(
            "pairing check takes 2, 4, or 6 indices, got {n}"
        )));
    }
    require_stationary(model)?;
    let mut cache = PropagatorCache::new(model.l_env.mat().clone());

    // Left side: sort times descending (stable, so coincident times keep
    // their given order) and absorb the rearrangement into a sign.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| times[j].partial_cmp(&times[i]).expect("finite times"));
    let sorted_alphas: Vec<usize> = order.iter().map(|&i| alphas[i]).collect();
    let sorted_times: Vec<f64> = order.iter().map(|&i| times[i]).collect();
    let lhs =
        chain_eval(model, &mut cache, &sorted_alphas, &sorted_times)? * cr(reorder_sign(signature, &order));

    // Right side: signed sum over pairings of the position indices.
    let mut rhs = Complex64::new(0.0, 0.0);
    for pairing in pairings(n) {
        let flat: Vec<usize> = pairing.iter().flat_map(|&(i, j)| [i, j]).collect();
        let mut term = cr(reorder_sign(signature, &flat));
        for &(i, j) in &pairing {
            term *= two_point(model, &mut cache, signature, alphas[i], alphas[j], times[i], times[j])?;
        }
        rhs += term;
    }

    let gap = (lhs - rhs).norm();
    Ok(WickCheck { lhs, rhs, gap })
}
