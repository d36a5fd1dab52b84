//! Superoperators on vectorized operators: left/right multiplication,
//! Hamiltonian commutators, dissipators, ladder superoperator families for
//! both statistics, and graded extensions of fermionic operators to the
//! joint space.
//!
//! All matrices act on column-stacked operators, so `lmul(a) = I ⊗ a` and
//! `rmul(b) = bᵀ ⊗ I`.

use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::fock::{ModeAlgebra, Statistics};
use crate::linalg::{dagger, eye, frob_norm, kron, unvectorize, vectorize, CMat, CVec};

/// A linear map on vectorized `D×D` operators, stored as a `D²×D²` matrix.
#[derive(Debug, Clone)]
pub struct SuperOp {
    dim: usize,
    mat: CMat,
}

impl SuperOp {
    /// Wrap a `D²×D²` matrix acting on vectorized `D×D` operators.
    pub fn new(dim: usize, mat: CMat) -> Result<Self> {
        let d2 = dim * dim;
        if mat.nrows() != d2 || mat.ncols() != d2 {
            return Err(CoreError::DimensionMismatch {
                context: "superoperator matrix size",
                expected: d2,
                got: mat.nrows().max(mat.ncols()),
            });
        }
        Ok(SuperOp { dim, mat })
    }

    /// Identity map on `D×D` operators.
    pub fn identity(dim: usize) -> Self {
        SuperOp {
            dim,
            mat: eye(dim * dim),
        }
    }

    /// Zero map on `D×D` operators.
    pub fn zero(dim: usize) -> Self {
        SuperOp {
            dim,
            mat: CMat::zeros((dim * dim, dim * dim)),
        }
    }

    /// Hilbert space dimension `D`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `D²×D²` matrix.
    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    pub fn into_mat(self) -> CMat {
        self.mat
    }

    /// Apply to a vectorized operator.
    pub fn apply_vec(&self, v: &CVec) -> CVec {
        self.mat.dot(v)
    }

    /// Apply to an operator in matrix form.
    pub fn apply(&self, x: &CMat) -> CMat {
        let v = self.mat.dot(&vectorize(x));
        unvectorize(&v, self.dim, self.dim).expect("superoperator output size")
    }

    /// Composition `self ∘ other` (apply `other` first).
    pub fn compose(&self, other: &SuperOp) -> SuperOp {
        assert_eq!(self.dim, other.dim, "superoperator dimension mismatch");
        SuperOp {
            dim: self.dim,
            mat: self.mat.dot(&other.mat),
        }
    }

    /// Commutator `self·other − other·self`.
    pub fn commutator(&self, other: &SuperOp) -> SuperOp {
        &self.compose(other) - &other.compose(self)
    }

    /// Anticommutator `self·other + other·self`.
    pub fn anticommutator(&self, other: &SuperOp) -> SuperOp {
        &self.compose(other) + &other.compose(self)
    }
}

impl Add for &SuperOp {
    type Output = SuperOp;
    fn add(self, rhs: &SuperOp) -> SuperOp {
        assert_eq!(self.dim, rhs.dim, "superoperator dimension mismatch");
        SuperOp {
            dim: self.dim,
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &SuperOp {
    type Output = SuperOp;
    fn sub(self, rhs: &SuperOp) -> SuperOp {
        assert_eq!(self.dim, rhs.dim, "superoperator dimension mismatch");
        SuperOp {
            dim: self.dim,
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl AddAssign<&SuperOp> for SuperOp {
    fn add_assign(&mut self, rhs: &SuperOp) {
        assert_eq!(self.dim, rhs.dim, "superoperator dimension mismatch");
        self.mat += &rhs.mat;
    }
}

impl SubAssign<&SuperOp> for SuperOp {
    fn sub_assign(&mut self, rhs: &SuperOp) {
        assert_eq!(self.dim, rhs.dim, "superoperator dimension mismatch");
        self.mat -= &rhs.mat;
    }
}

impl Mul<Complex64> for &SuperOp {
    type Output = SuperOp;
    fn mul(self, z: Complex64) -> SuperOp {
        SuperOp {
            dim: self.dim,
            mat: &self.mat * z,
        }
    }
}

impl Neg for &SuperOp {
    type Output = SuperOp;
    fn neg(self) -> SuperOp {
        SuperOp {
            dim: self.dim,
            mat: -&self.mat,
        }
    }
}

/// Two-sided multiplication: `sandwich(a, b) vec(X) = vec(aXb)`.
pub fn sandwich(a: &CMat, b: &CMat) -> SuperOp {
    let d = a.nrows();
    SuperOp {
        dim: d,
        mat: kron(&b.t().to_owned(), a),
    }
}

/// Tensor product of superoperators acting on `L(H_E) ⊗ L(H_S)`, reindexed
/// to act on `L(H_E ⊗ H_S)` with the environment as the slow factor.
///
/// On product operators, `superkron(E, S)(X_E ⊗ X_S) = E(X_E) ⊗ S(X_S)`.
pub fn superkron(env: &SuperOp, sys: &SuperOp) -> SuperOp {
    let de = env.dim();
    let ds = sys.dim();
    let d = de * ds;
    let me = env.mat();
    let ms = sys.mat();
    let zero = Complex64::default();
    let mut out = CMat::zeros((d * d, d * d));
    for ecr in 0..de * de {
        let (ec, er) = (ecr / de, ecr % de);
        for ecc in 0..de * de {
            let ze = me[[ecr, ecc]];
            if ze == zero {
                continue;
            }
            let (ec2, er2) = (ecc / de, ecc % de);
            for scr in 0..ds * ds {
                let (sc, sr) = (scr / ds, scr % ds);
                let row = (ec * ds + sc) * d + er * ds + sr;
                for scc in 0..ds * ds {
                    let zs = ms[[scr, scc]];
                    if zs == zero {
                        continue;
                    }
                    let (sc2, sr2) = (scc / ds, scc % ds);
                    let col = (ec2 * ds + sc2) * d + er2 * ds + sr2;
                    out[[row, col]] = ze * zs;
                }
            }
        }
    }
    SuperOp { dim: d, mat: out }
}

/// Left multiplication: `lmul(a) vec(X) = vec(aX)`.
pub fn lmul(a: &CMat) -> SuperOp {
    let d = a.nrows();
    SuperOp {
        dim: d,
        mat: kron(&eye(d), a),
    }
}

/// Right multiplication: `rmul(b) vec(X) = vec(Xb)`.
pub fn rmul(b: &CMat) -> SuperOp {
    let d = b.nrows();
    SuperOp {
        dim: d,
        mat: kron(&b.t().to_owned(), &eye(d)),
    }
}

/// Commutator generator `−i[h, ·]` for a Hermitian `h`.
pub fn hamiltonian_liouv(h: &CMat) -> Result<SuperOp> {
    let gap = frob_norm(&(h - &dagger(h)));
    if gap > 1e-10 * frob_norm(h).max(1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "hamiltonian_liouv requires Hermitian input, ‖h−h†‖_F = {gap:.3e}"
        )));
    }
    let mi = Complex64::new(0.0, -1.0);
    Ok(&(&lmul(h) - &rmul(h)) * mi)
}

/// Dissipator `D(ρ) = Σ_{kl} Γ_{kl} (2 L_l ρ L_k† − L_k†L_l ρ − ρ L_k†L_l)`.
///
/// `rate` must be Hermitian positive semidefinite. Note the factor 2 on the
/// sandwich term; there is no 1/2 on the anticommutator.
pub fn lindblad_dissipator(rate: &CMat, jumps: &[CMat]) -> Result<SuperOp> {
    let n = jumps.len();
    if rate.nrows() != n || rate.ncols() != n {
        return Err(CoreError::DimensionMismatch {
            context: "rate matrix size must match jump count",
            expected: n,
            got: rate.nrows().max(rate.ncols()),
        });
    }
    let herm_gap = frob_norm(&(rate - &dagger(rate)));
    if herm_gap > 1e-10 * frob_norm(rate).max(1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "dissipator rate matrix must be Hermitian, ‖Γ−Γ†‖_F = {herm_gap:.3e}"
        )));
    }
    if n > 0 {
        let eigs = crate::linalg::eigh_decomp(rate)?.0;
        if let Some(&min) = eigs.iter().min_by(|a, b| a.partial_cmp(b).unwrap()) {
            if min < -1e-10 {
                return Err(CoreError::InvalidArgument(format!(
                    "dissipator rate matrix must be PSD, min eigenvalue {min:.3e}"
                )));
            }
        }
    }
    let d = jumps.first().map_or(0, |j| j.nrows());
    for j in jumps {
        if j.nrows() != d || j.ncols() != d {
            return Err(CoreError::DimensionMismatch {
                context: "jump operators must be square of equal dimension",
                expected: d,
                got: j.nrows().max(j.ncols()),
            });
        }
    }
    // D = 2 Σ_{kl} Γ_{kl} conj(L_k)⊗L_l − lmul(A) − rmul(A), A = Σ Γ_{kl} L_k†L_l.
    let mut sandwich = CMat::zeros((d * d, d * d));
    let mut a = CMat::zeros((d, d));
    for k in 0..n {
        for l in 0..n {
            let g = rate[[k, l]];
            if g == Complex64::default() {
                continue;
            }
            let lk_conj = jumps[k].mapv(|z| z.conj());
            sandwich += &(kron(&lk_conj, &jumps[l]) * (g * 2.0));
            a += &(dagger(&jumps[k]).dot(&jumps[l]) * g);
        }
    }
    let mat = sandwich - lmul(&a).mat - rmul(&a).mat;
    Ok(SuperOp { dim: d, mat })
}

/// The four ladder superoperator families of a mode algebra.
///
/// For bosons: `ann_l[k]: ρ ↦ b_k ρ`, `cre_l[k]: ρ ↦ b_k† ρ`,
/// `ann_r[k]: ρ ↦ ρ b_k†`, `cre_r[k]: ρ ↦ ρ b_k`. The primed (`_r`) pair
/// forms its own canonical ladder pair commuting with the unprimed one.
///
/// For fermions the maps are parity-weaved: `ann_l[k]: ρ ↦ P c_k ρ`,
/// `cre_l[k]: ρ ↦ −P c_k† ρ`, `ann_r[k]: ρ ↦ P ρ c_k†`,
/// `cre_r[k]: ρ ↦ P ρ c_k`, which makes all four families mutually
/// anticommuting with exact canonical anticommutation relations.
pub struct LadderSuperOps {
    pub ann_l: Vec<SuperOp>,
    pub cre_l: Vec<SuperOp>,
    pub ann_r: Vec<SuperOp>,
    pub cre_r: Vec<SuperOp>,
}

/// Ladder superoperators for a bosonic algebra.
pub fn boson_superops(alg: &ModeAlgebra) -> Result<LadderSuperOps> {
    if alg.kind() != Statistics::Bosonic {
        return Err(CoreError::InvalidArgument(
            "boson_superops requires a bosonic algebra".into(),
        ));
    }
    let n = alg.n_modes();
    let mut ops = LadderSuperOps {
        ann_l: Vec::with_capacity(n),
        cre_l: Vec::with_capacity(n),
        ann_r: Vec::with_capacity(n),
        cre_r: Vec::with_capacity(n),
    };
    for k in 0..n {
        ops.ann_l.push(lmul(alg.ann(k)));
        ops.cre_l.push(lmul(alg.cre(k)));
        ops.ann_r.push(rmul(alg.cre(k)));
        ops.cre_r.push(rmul(alg.ann(k)));
    }
    Ok(ops)
}

/// Parity-weaved ladder superoperators for a fermionic algebra.
pub fn fermion_superops(alg: &ModeAlgebra) -> Result<LadderSuperOps> {
    if alg.kind() != Statistics::Fermionic {
        return Err(CoreError::InvalidArgument(
            "fermion_superops requires a fermionic algebra".into(),
        ));
    }
    let p = alg
        .parity()
        .expect("fermionic algebra carries a parity operator");
    let n = alg.n_modes();
    let lp = lmul(p);
    let mut ops = LadderSuperOps {
        ann_l: Vec::with_capacity(n),
        cre_l: Vec::with_capacity(n),
        ann_r: Vec::with_capacity(n),
        cre_r: Vec::with_capacity(n),
    };
    for k in 0..n {
        ops.ann_l.push(lmul(&p.dot(alg.ann(k))));
        ops.cre_l.push(lmul(&-(p.dot(alg.cre(k)))));
        ops.ann_r.push(lp.compose(&rmul(alg.cre(k))));
        ops.cre_r.push(lp.compose(&rmul(alg.ann(k))));
    }
    Ok(ops)
}

/// Fermionic operators extended to the joint space `H = H_E ⊗ H_S` with the
/// graded tensor structure: environment modes act as `c_k ⊗ I_s`, system
/// modes as `P_e ⊗ a_i`, so mixed pairs anticommute.
pub struct ExtendedFermionOps {
    pub env_ann: Vec<CMat>,
    pub env_cre: Vec<CMat>,
    pub sys_ann: Vec<CMat>,
    pub sys_cre: Vec<CMat>,
    /// Total parity `P_e ⊗ P_s`.
    pub parity: CMat,
}

/// Extend environment and system fermionic algebras to the joint space.
pub fn extend_fermion_ops(
    env: &ModeAlgebra,
    sys: &ModeAlgebra,
) -> Result<ExtendedFermionOps> {
    if env.kind() != Statistics::Fermionic || sys.kind() != Statistics::Fermionic {
        return Err(CoreError::InvalidArgument(
            "extend_fermion_ops requires fermionic algebras".into(),
        ));
    }
    let pe = env.parity().expect("fermionic env parity");
    let ps = sys.parity().expect("fermionic sys parity");
    let ident_s = eye(sys.dim());
    let env_ann = (0..env.n_modes())
        .map(|k| kron(env.ann(k), &ident_s))
        .collect();
    let env_cre = (0..env.n_modes())
        .map(|k| kron(env.cre(k), &ident_s))
        .collect();
    let sys_ann = (0..sys.n_modes())
        .map(|i| kron(pe, sys.ann(i)))
        .collect();
    let sys_cre = (0..sys.n_modes())
        .map(|i| kron(pe, sys.cre(i)))
        .collect();
    Ok(ExtendedFermionOps {
        env_ann,
        env_cre,
        sys_ann,
        sys_cre,
        parity: kron(pe, ps),
    })
}
