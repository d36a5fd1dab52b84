//! Mode algebras: truncated bosonic Fock ladders and Jordan-Wigner fermions.
//!
//! Fermionic modes use the convention `c_k = σ_z^{⊗k} ⊗ σ⁻ ⊗ I^{⊗(n−1−k)}`
//! with `σ⁻ = |0⟩⟨1|` and `|0⟩` the empty state, which makes the parity
//! operator diagonal. Bosonic modes are truncated to `d` Fock levels with
//! `b = Σ_{m<d−1} √(m+1) |m⟩⟨m+1|`; adequacy of the cutoff is the caller's
//! responsibility (the model layer monitors population leakage).

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::linalg::{dagger, eye, kron, CMat};

/// Exchange statistics of a mode family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistics {
    Bosonic,
    Fermionic,
}

/// A family of ladder operators on a common Fock space.
#[derive(Debug, Clone)]
pub struct ModeAlgebra {
    kind: Statistics,
    n_modes: usize,
    fock_cutoff: Option<usize>,
    dim: usize,
    /// (annihilation, creation) matrix pairs, one per mode.
    ops: Vec<(CMat, CMat)>,
    /// (−1)^{Σ c†c}; fermionic only.
    parity: Option<CMat>,
}

/// Single-mode truncated annihilation ladder on `d` levels.
fn boson_ladder(d: usize) -> CMat {
    let mut b = CMat::zeros((d, d));
    for m in 0..d.saturating_sub(1) {
        b[[m, m + 1]] = Complex64::new(((m + 1) as f64).sqrt(), 0.0);
    }
    b
}

fn sigma_minus() -> CMat {
    let mut s = CMat::zeros((2, 2));
    s[[0, 1]] = Complex64::new(1.0, 0.0);
    s
}

fn sigma_z() -> CMat {
    let mut s = CMat::zeros((2, 2));
    s[[0, 0]] = Complex64::new(1.0, 0.0);
    s[[1, 1]] = Complex64::new(-1.0, 0.0);
    s
}

/// Embed `op` at position `k` in an `n`-fold tensor product, with `left` on
/// every site before `k` and identity after.
fn jw_chain(n: usize, k: usize, op: &CMat, left: &CMat) -> CMat {
    let mut acc = eye(1);
    for j in 0..n {
        let factor = if j < k {
            left.clone()
        } else if j == k {
            op.clone()
        } else {
            eye(op.nrows())
        };
        acc = kron(&acc, &factor);
    }
    acc
}

impl ModeAlgebra {
    /// Truncated bosonic modes: `n_modes` oscillators, `fock_cutoff` levels each.
    pub fn bosonic(n_modes: usize, fock_cutoff: usize) -> Result<Self> {
        if fock_cutoff < 2 {
            return Err(CoreError::InvalidArgument(
                "bosonic Fock cutoff must be at least 2".into(),
            ));
        }
        let d = fock_cutoff;
        let dim = d.checked_pow(n_modes as u32).ok_or_else(|| {
            CoreError::InvalidArgument("bosonic Fock space dimension overflow".into())
        })?;
        let b1 = boson_ladder(d);
        let ident = eye(d);
        let ops = (0..n_modes)
            .map(|k| {
                let b = jw_chain(n_modes, k, &b1, &ident);
                let bd = dagger(&b);
                (b, bd)
            })
            .collect();
        Ok(ModeAlgebra {
            kind: Statistics::Bosonic,
            n_modes,
            fock_cutoff: Some(d),
            dim,
            ops,
            parity: None,
        })
    }

    /// Jordan-Wigner fermionic modes.
    pub fn fermionic(n_modes: usize) -> Result<Self> {
        let dim = 1usize.checked_shl(n_modes as u32).ok_or_else(|| {
            CoreError::InvalidArgument("fermionic Fock space dimension overflow".into())
        })?;
        let sm = sigma_minus();
        let sz = sigma_z();
        let ops = (0..n_modes)
            .map(|k| {
                let c = jw_chain(n_modes, k, &sm, &sz);
                let cd = dagger(&c);
                (c, cd)
            })
            .collect();
        let parity = jw_chain(n_modes, n_modes, &eye(1), &sz);
        Ok(ModeAlgebra {
            kind: Statistics::Fermionic,
            n_modes,
            fock_cutoff: None,
            dim,
            ops,
            parity: Some(parity),
        })
    }

    pub fn kind(&self) -> Statistics {
        self.kind
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    /// Fock levels per bosonic mode; `None` for fermions.
    pub fn fock_cutoff(&self) -> Option<usize> {
        self.fock_cutoff
    }

    /// Hilbert space dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Annihilation operator of mode `k`.
    pub fn ann(&self, k: usize) -> &CMat {
        &self.ops[k].0
    }

    /// Creation operator of mode `k`.
    pub fn cre(&self, k: usize) -> &CMat {
        &self.ops[k].1
    }

    /// Parity operator `(−1)^{Σ c†c}`; fermionic algebras only.
    pub fn parity(&self) -> Option<&CMat> {
        self.parity.as_ref()
    }

    /// Total number operator `Σ_k a_k† a_k`.
    pub fn total_number(&self) -> CMat {
        let mut n = CMat::zeros((self.dim, self.dim));
        for (a, ad) in &self.ops {
            n += &ad.dot(a);
        }
        n
    }
}
