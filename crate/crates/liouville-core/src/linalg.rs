//! Dense complex linear algebra: Kronecker products, matrix exponentials,
//! norms, partial traces, and the global vectorization convention.
//!
//! Every superoperator in this crate relies on column-stacking vectorization,
//! `vec(A X B) = (Bᵀ ⊗ A) vec(X)`, and on the index ordering `H = H_E ⊗ H_S`
//! with the environment as the left (slow) Kronecker factor.

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigValsh, Factorize, Solve, UPLO, SVD};
use num_complex::Complex64;

use crate::error::{CoreError, Result};

/// Dense complex matrix, row-major storage.
pub type CMat = Array2<Complex64>;
/// Dense complex column vector.
pub type CVec = Array1<Complex64>;

pub use ndarray::linalg::kron;

/// Identity matrix of dimension `n`.
pub fn eye(n: usize) -> CMat {
    Array2::eye(n)
}

/// Conjugate transpose.
pub fn dagger(a: &CMat) -> CMat {
    a.t().mapv(|z| z.conj())
}

/// Matrix trace.
pub fn trace(a: &CMat) -> Complex64 {
    a.diag().sum()
}

/// Frobenius norm.
pub fn frob_norm(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest column sum of absolute values (induced 1-norm).
fn norm_1(a: &CMat) -> f64 {
    let mut best = 0.0_f64;
    for col in a.columns() {
        let s: f64 = col.iter().map(|z| z.norm()).sum();
        best = best.max(s);
    }
    best
}

/// Sum of singular values.
pub fn trace_norm(a: &CMat) -> f64 {
    singular_values(a).iter().sum()
}

/// Largest singular value (matrix 2-norm).
pub fn op_norm(a: &CMat) -> f64 {
    singular_values(a).iter().cloned().fold(0.0, f64::max)
}

fn singular_values(a: &CMat) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    let (_, s, _) = a.svd(false, false).expect("SVD failed to converge");
    s.to_vec()
}

/// Trace out the environment factor of an operator on `H_E ⊗ H_S`.
///
/// `x` must be square of dimension `dim_env·dim_sys`; the environment is the
/// slow (left) index. Returns `Σ_e (⟨e|⊗I) x (|e⟩⊗I)`.
pub fn partial_trace_env(x: &CMat, dim_env: usize, dim_sys: usize) -> Result<CMat> {
    let d = dim_env * dim_sys;
    if x.nrows() != d || x.ncols() != d {
        return Err(CoreError::DimensionMismatch {
            context: "partial_trace_env input",
            expected: d,
            got: x.nrows().max(x.ncols()),
        });
    }
    let mut out = CMat::zeros((dim_sys, dim_sys));
    for e in 0..dim_env {
        for r in 0..dim_sys {
            for c in 0..dim_sys {
                out[[r, c]] += x[[e * dim_sys + r, e * dim_sys + c]];
            }
        }
    }
    Ok(out)
}

/// Column-stacking vectorization: `vec(X)[c·rows + r] = X[r, c]`.
pub fn vectorize(x: &CMat) -> CVec {
    CVec::from_iter(x.t().iter().cloned())
}

/// Inverse of [`vectorize`] for a `rows × cols` matrix.
pub fn unvectorize(v: &CVec, rows: usize, cols: usize) -> Result<CMat> {
    if v.len() != rows * cols {
        return Err(CoreError::DimensionMismatch {
            context: "unvectorize input length",
            expected: rows * cols,
            got: v.len(),
        });
    }
    Ok(Array2::from_shape_fn((rows, cols), |(r, c)| v[c * rows + r]))
}

/// Spectral decomposition of a Hermitian matrix: `h = V diag(λ) V†` with
/// eigenvalues ascending and eigenvectors as columns of `V`.
///
/// Wraps the LAPACK call so callers never see the backend's conjugated
/// eigenvector convention for row-major complex input.
pub fn eigh_decomp(h: &CMat) -> Result<(Array1<f64>, CMat)> {
    use ndarray_linalg::Eigh;
    let (eigs, v) = h.eigh(UPLO::Lower)?;
    Ok((eigs, v.mapv(|z| z.conj())))
}

/// Apply a scalar function to a Hermitian matrix through its spectrum:
/// `f(h) = V diag(f(λ)) V†`.
pub fn herm_func(h: &CMat, f: impl Fn(f64) -> Complex64) -> Result<CMat> {
    let (eigs, v) = eigh_decomp(h)?;
    let fdiag = CMat::from_diag(&eigs.mapv(f));
    Ok(v.dot(&fdiag).dot(&dagger(&v)))
}

/// Solve `a · X = b` for matrix `X` with a single LU factorization.
pub(crate) fn solve_matrix(a: &CMat, b: &CMat) -> Result<CMat> {
    let f = a.factorize()?;
    let mut out = CMat::zeros(b.raw_dim());
    for (j, col) in b.columns().into_iter().enumerate() {
        let x = f.solve(&col.to_owned())?;
        out.column_mut(j).assign(&x);
    }
    Ok(out)
}

const PADE3: [f64; 4] = [120., 60., 12., 1.];
const PADE5: [f64; 6] = [30240., 15120., 3360., 420., 30., 1.];
const PADE7: [f64; 8] = [17_297_280., 8_648_640., 1_995_840., 277_200., 25_200., 1_512., 56., 1.];
const PADE9: [f64; 10] = [
    17_643_225_600.,
    8_821_612_800.,
    2_075_673_600.,
    302_702_400.,
    30_270_240.,
    2_162_160.,
    110_880.,
    3_960.,
    90.,
    1.,
];
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.,
    32_382_376_266_240_000.,
    7_771_770_303_897_600.,
    1_187_353_796_428_800.,
    129_060_195_264_000.,
    10_559_470_521_600.,
    670_442_572_800.,
    33_522_128_640.,
    1_323_241_920.,
    40_840_800.,
    960_960.,
    16_380.,
    182.,
    1.,
];

const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068;
const THETA13: f64 = 5.371920351148152;

fn re(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// Evaluate the order-(m,m) Padé approximant for odd m ∈ {3,5,7,9} given the
/// even powers `[I, A², A⁴, …]`, returning (U, V) with `r(A) = (V−U)⁻¹(V+U)`.
fn pade_low(a: &CMat, evens: &[CMat], b: &[f64]) -> (CMat, CMat) {
    let d = a.nrows();
    let mut u_inner = CMat::zeros((d, d));
    let mut v = CMat::zeros((d, d));
    for (j, even) in evens.iter().enumerate() {
        u_inner += &(even * re(b[2 * j + 1]));
        v += &(even * re(b[2 * j]));
    }
    (a.dot(&u_inner), v)
}

/// Matrix exponential by scaling-and-squaring with Padé approximants of
/// degree 3/5/7/9/13, chosen from the 1-norm of the input. Relative accuracy
/// is ~1e-13 for inputs with 2-norm up to ~50.
pub fn expm(a: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() {
        return Err(CoreError::DimensionMismatch {
            context: "expm requires a square matrix",
            expected: a.nrows(),
            got: a.ncols(),
        });
    }
    let d = a.nrows();
    if d == 0 {
        return Ok(CMat::zeros((0, 0)));
    }
    let nrm = norm_1(a);
    if !nrm.is_finite() {
        return Err(CoreError::Numerical("expm input contains non-finite entries".into()));
    }

    let a2 = a.dot(a);
    if nrm <= THETA9 {
        let (u, v) = if nrm <= THETA3 {
            pade_low(a, &[eye(d), a2], &PADE3)
        } else if nrm <= THETA5 {
            let a4 = a2.dot(&a2);
            pade_low(a, &[eye(d), a2, a4], &PADE5)
        } else if nrm <= THETA7 {
            let a4 = a2.dot(&a2);
            let a6 = a4.dot(&a2);
            pade_low(a, &[eye(d), a2, a4, a6], &PADE7)
        } else {
            let a4 = a2.dot(&a2);
            let a6 = a4.dot(&a2);
            let a8 = a6.dot(&a2);
            pade_low(a, &[eye(d), a2, a4, a6, a8], &PADE9)
        };
        return solve_matrix(&(&v - &u), &(&v + &u));
    }

    // Degree 13 with scaling by 2^s so the scaled norm is below θ₁₃.
    let s = ((nrm / THETA13).log2().ceil()).max(0.0) as u32;
    let scale = re(2f64.powi(-(s as i32)));
    let a_s = a * scale;
    let a2 = &a2 * (scale * scale);
    let a4 = a2.dot(&a2);
    let a6 = a4.dot(&a2);
    let b = &PADE13;

    let u_hi = &a6 * re(b[13]) + &a4 * re(b[11]) + &a2 * re(b[9]);
    let u_lo = &a6 * re(b[7]) + &a4 * re(b[5]) + &a2 * re(b[3]) + &(eye(d) * re(b[1]));
    let u = a_s.dot(&(a6.dot(&u_hi) + u_lo));

    let v_hi = &a6 * re(b[12]) + &a4 * re(b[10]) + &a2 * re(b[8]);
    let v = a6.dot(&v_hi) + &a6 * re(b[6]) + &a4 * re(b[4]) + &a2 * re(b[2]) + eye(d) * re(b[0]);

    let mut x = solve_matrix(&(&v - &u), &(&v + &u))?;
    for _ in 0..s {
        x = x.dot(&x);
    }
    Ok(x)
}

/// Composite trapezoid rule on `[0, hi]` with `g ≥ 2` points: nodes and
/// matching weights.
pub(crate) fn trapezoid(hi: f64, g: usize) -> (Vec<f64>, Vec<f64>) {
    let h = hi / (g - 1) as f64;
    let nodes: Vec<f64> = (0..g).map(|i| h * i as f64).collect();
    let mut weights = vec![h; g];
    weights[0] = 0.5 * h;
    weights[g - 1] = 0.5 * h;
    (nodes, weights)
}

/// Memoized propagators `e^{A Δt}` for one fixed generator, keyed by the bit
/// pattern of the step. Time-ordered chains and nested quadratures reuse a
/// small set of distinct gaps, so each exponential is computed once.
pub struct PropagatorCache {
    generator: CMat,
    cache: std::collections::HashMap<u64, CMat>,
}

impl PropagatorCache {
    pub fn new(generator: CMat) -> Self {
        PropagatorCache {
            generator,
            cache: std::collections::HashMap::new(),
        }
    }

    /// The propagator over a step of length `dt`.
    pub fn propagator(&mut self, dt: f64) -> Result<&CMat> {
        let key = dt.to_bits();
        if !self.cache.contains_key(&key) {
            let p = expm(&(&self.generator * Complex64::new(dt, 0.0)))?;
            self.cache.insert(key, p);
        }
        Ok(&self.cache[&key])
    }

    /// Number of distinct steps exponentiated so far.
    pub fn len(&self) -> usize {
        self.cache.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cache.is_empty()
    }
}

/// Trace-one positive semidefinite operator with validated invariants.
///
/// Construction checks hermiticity (relative tolerance 1e-12), unit trace
/// (1e-12), and eigenvalues ≥ −1e-10.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    mat: CMat,
}

impl DensityMatrix {
    /// Validate and wrap a candidate density matrix.
    pub fn new(mat: CMat) -> Result<Self> {
        if mat.nrows() != mat.ncols() {
            return Err(CoreError::DimensionMismatch {
                context: "density matrix must be square",
                expected: mat.nrows(),
                got: mat.ncols(),
            });
        }
        let herm_gap = frob_norm(&(&mat - &dagger(&mat)));
        let scale = frob_norm(&mat).max(1.0);
        if herm_gap > 1e-12 * scale {
            return Err(CoreError::InvalidState(format!(
                "not Hermitian: ‖ρ−ρ†‖_F = {:.3e}",
                herm_gap
            )));
        }
        let tr = trace(&mat);
        if (tr - Complex64::new(1.0, 0.0)).norm() > 1e-12 {
            return Err(CoreError::InvalidState(format!(
                "trace = {:.15e}{:+.3e}i, expected 1",
                tr.re, tr.im
            )));
        }
        let herm = (&mat + &dagger(&mat)) * re(0.5);
        let eigs = herm.eigvalsh(UPLO::Lower)?;
        if let Some(&min) = eigs
            .iter()
            .min_by(|a, b| a.partial_cmp(b).expect("eigenvalue NaN"))
        {
            if min < -1e-10 {
                return Err(CoreError::InvalidState(format!(
                    "negative eigenvalue {:.3e}",
                    min
                )));
            }
        }
        Ok(DensityMatrix { mat })
    }

    /// Rank-one projector onto a normalized state vector.
    pub fn from_pure(psi: &CVec) -> Result<Self> {
        let nrm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (nrm - 1.0).abs() > 1e-12 {
            return Err(CoreError::InvalidState(format!(
                "state vector norm {:.15e}, expected 1",
                nrm
            )));
        }
        let d = psi.len();
        let mat = Array2::from_shape_fn((d, d), |(r, c)| psi[r] * psi[c].conj());
        Ok(DensityMatrix { mat })
    }

    /// Hilbert space dimension.
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Borrow the underlying matrix.
    pub fn mat(&self) -> &CMat {
        &self.mat
    }

    /// Consume and return the underlying matrix.
    pub fn into_mat(self) -> CMat {
        self.mat
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand::Rng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
        Array2::from_shape_fn((rows, cols), |_| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        })
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> CMat {
        let a = random_mat(rng, n, n);
        (&a + &dagger(&a)) * c(0.5, 0.0)
    }

    fn assert_close(a: &CMat, b: &CMat, tol: f64) {
        let gap = frob_norm(&(a - b));
        assert!(gap <= tol, "matrices differ: ‖a−b‖_F = {gap:.3e} > {tol:.1e}");
    }

    #[test]
    fn kron_identity_left_into_block_diagonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_mat(&mut rng, 2, 2);
        let k = kron(&eye(2), &a);
        assert_eq!(k.dim(), (4, 4));
        assert_close(&k.slice(ndarray::s![0..2, 0..2]).to_owned(), &a, 1e-15);
        assert_close(&k.slice(ndarray::s![2..4, 2..4]).to_owned(), &a, 1e-15);
        assert_eq!(k[[0, 2]], c(0.0, 0.0));
    }

    #[test]
    fn kron_scalar_identity_right_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_mat(&mut rng, 3, 2);
        assert_close(&kron(&a, &eye(1)), &a, 1e-15);
    }

    #[test]
    fn kron_mixed_product_rule() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (a, b) = (random_mat(&mut rng, 2, 2), random_mat(&mut rng, 2, 2));
        let (cc, d) = (random_mat(&mut rng, 2, 2), random_mat(&mut rng, 2, 2));
        let lhs = kron(&a, &b).dot(&kron(&cc, &d));
        let rhs = kron(&a.dot(&cc), &b.dot(&d));
        assert_close(&lhs, &rhs, 1e-13);
    }

    #[test]
    fn expm_zero_is_identity() {
        let z = CMat::zeros((4, 4));
        assert_close(&expm(&z).unwrap(), &eye(4), 1e-15);
    }

    #[test]
    fn expm_diagonal_phase() {
        let mut a = CMat::zeros((2, 2));
        a[[0, 0]] = c(0.0, std::f64::consts::PI);
        a[[1, 1]] = c(0.0, -std::f64::consts::PI);
        let e = expm(&a).unwrap();
        let want = eye(2) * c(-1.0, 0.0);
        assert_close(&e, &want, 1e-13);
    }

    #[test]
    fn expm_nilpotent_terminates() {
        let mut a = CMat::zeros((2, 2));
        a[[0, 1]] = c(1.0, 0.0);
        let e = expm(&a).unwrap();
        let mut want = eye(2);
        want[[0, 1]] = c(1.0, 0.0);
        assert_close(&e, &want, 1e-15);
    }

    #[test]
    fn expm_matches_spectral_oracle_at_norm_50() {
        // Independent oracle: for Hermitian H, e^{iH} = V e^{iλ} V†.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = random_hermitian(&mut rng, 24);
        let h = &h * c(50.0 / op_norm(&h), 0.0);
        let oracle = herm_func(&h, |w| Complex64::new(0.0, w).exp()).unwrap();
        let ih = h.mapv(|z| z * c(0.0, 1.0));
        let got = expm(&ih).unwrap();
        let rel = frob_norm(&(&got - &oracle)) / frob_norm(&oracle);
        assert!(rel <= 1e-12, "relative error {rel:.3e}");
    }

    #[test]
    fn expm_group_inverse_property() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let a = random_mat(&mut rng, 6, 6);
            let a = &a * c(5.0 / op_norm(&a), 0.0);
            let prod = expm(&a).unwrap().dot(&expm(&(-&a)).unwrap());
            assert_close(&prod, &eye(6), 1e-10);
        }
    }

    #[test]
    fn trace_norm_examples() {
        assert_abs_diff_eq!(trace_norm(&eye(3)), 3.0, epsilon = 1e-13);
        let mut d = CMat::zeros((2, 2));
        d[[0, 0]] = c(1.0, 0.0);
        d[[1, 1]] = c(-1.0, 0.0);
        assert_abs_diff_eq!(trace_norm(&d), 2.0, epsilon = 1e-13);
        let mut n = CMat::zeros((2, 2));
        n[[0, 1]] = c(1.0, 0.0);
        assert_abs_diff_eq!(trace_norm(&n), 1.0, epsilon = 1e-13);
    }

    #[test]
    fn op_norm_examples() {
        let mut sz = CMat::zeros((2, 2));
        sz[[0, 0]] = c(1.0, 0.0);
        sz[[1, 1]] = c(-1.0, 0.0);
        assert_abs_diff_eq!(op_norm(&sz), 1.0, epsilon = 1e-13);
        let mut d = CMat::zeros((2, 2));
        d[[0, 0]] = c(3.0, 0.0);
        d[[1, 1]] = c(0.0, -5.0);
        assert_abs_diff_eq!(op_norm(&d), 5.0, epsilon = 1e-13);
    }

    #[test]
    fn op_norm_below_trace_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let a = random_mat(&mut rng, 4, 4);
            assert!(op_norm(&a) <= trace_norm(&a) + 1e-12);
        }
    }

    #[test]
    fn partial_trace_product_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let re_ = random_hermitian(&mut rng, 3);
        let rs = random_hermitian(&mut rng, 2);
        let full = kron(&re_, &rs);
        let got = partial_trace_env(&full, 3, 2).unwrap();
        let want = &rs * trace(&re_);
        assert_close(&got, &want, 1e-13);
    }

    #[test]
    fn partial_trace_bell_state() {
        let inv = 1.0 / 2f64.sqrt();
        let psi = CVec::from(vec![c(inv, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(inv, 0.0)]);
        let rho = DensityMatrix::from_pure(&psi).unwrap();
        let red = partial_trace_env(rho.mat(), 2, 2).unwrap();
        assert_close(&red, &(eye(2) * c(0.5, 0.0)), 1e-14);
    }

    #[test]
    fn partial_trace_preserves_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_mat(&mut rng, 12, 12);
        let red = partial_trace_env(&x, 4, 3).unwrap();
        let (t1, t2) = (trace(&x), trace(&red));
        assert_abs_diff_eq!(t1.re, t2.re, epsilon = 1e-13);
        assert_abs_diff_eq!(t1.im, t2.im, epsilon = 1e-13);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        let x = CMat::zeros((5, 5));
        assert!(partial_trace_env(&x, 2, 2).is_err());
    }

    #[test]
    fn vectorize_convention() {
        let x = ndarray::arr2(&[
            [c(1.0, 0.0), c(2.0, 0.0)],
            [c(3.0, 0.0), c(4.0, 0.0)],
        ]);
        let v = vectorize(&x);
        let want = [1.0, 3.0, 2.0, 4.0];
        for (got, want) in v.iter().zip(want) {
            assert_abs_diff_eq!(got.re, want, epsilon = 1e-15);
        }
        assert_close(&unvectorize(&v, 2, 2).unwrap(), &x, 1e-15);
    }

    #[test]
    fn vectorize_intertwines_sandwich_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (a, x, b) = (
            random_mat(&mut rng, 3, 3),
            random_mat(&mut rng, 3, 3),
            random_mat(&mut rng, 3, 3),
        );
        let lhs = kron(&b.t().to_owned(), &a).dot(&vectorize(&x));
        let rhs = vectorize(&a.dot(&x).dot(&b));
        let gap: f64 = (&lhs - &rhs).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!(gap < 1e-13);
    }

    #[test]
    fn density_matrix_accepts_maximally_mixed() {
        let rho = DensityMatrix::new(eye(4) * c(0.25, 0.0)).unwrap();
        assert_eq!(rho.dim(), 4);
    }

    #[test]
    fn propagator_cache_reuses_and_matches_expm() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let gen = random_mat(&mut rng, 5, 5);
        let mut cache = PropagatorCache::new(gen.clone());
        assert!(cache.is_empty());
        for &dt in &[0.3, 0.7, 0.3, 0.0, 0.7] {
            let direct = expm(&(&gen * c(dt, 0.0))).unwrap();
            assert_close(cache.propagator(dt).unwrap(), &direct, 1e-12);
        }
        // three distinct bit patterns: 0.3, 0.7, 0.0
        assert_eq!(cache.len(), 3);
        let p3 = cache.propagator(0.3).unwrap().clone();
        let semigroup = p3.dot(cache.propagator(0.7).unwrap());
        let whole = expm(&(&gen * c(1.0, 0.0))).unwrap();
        assert_close(&semigroup, &whole, 1e-10);
    }

    #[test]
    fn density_matrix_rejects_invalid() {
        let mut m = eye(2) * c(0.5, 0.0);
        m[[0, 1]] = c(0.3, 0.1); // not Hermitian
        assert!(DensityMatrix::new(m).is_err());

        let m = eye(2); // trace 2
        assert!(DensityMatrix::new(m).is_err());

        let mut m = CMat::zeros((2, 2)); // negative eigenvalue
        m[[0, 0]] = c(1.5, 0.0);
        m[[1, 1]] = c(-0.5, 0.0);
        assert!(DensityMatrix::new(m).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn prop_expm_inverse(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_mat(&mut rng, 4, 4);
            let nrm = op_norm(&a);
            prop_assume!(nrm > 1e-6);
            let a = &a * c(rng.gen_range(0.1..5.0) / nrm, 0.0);
            let prod = expm(&a).unwrap().dot(&expm(&(-&a)).unwrap());
            prop_assert!(frob_norm(&(&prod - &eye(4))) < 1e-10);
        }

        #[test]
        fn prop_trace_norm_is_norm(seed in 0u64..1000, s in -3.0f64..3.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_mat(&mut rng, 3, 3);
            let b = random_mat(&mut rng, 3, 3);
            // Triangle inequality and absolute homogeneity.
            prop_assert!(trace_norm(&(&a + &b)) <= trace_norm(&a) + trace_norm(&b) + 1e-12);
            let scaled = trace_norm(&(&a * c(s, 0.0)));
            prop_assert!((scaled - s.abs() * trace_norm(&a)).abs() < 1e-12 * (1.0 + scaled));
        }

        #[test]
        fn prop_partial_trace_hermitian(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let h = random_hermitian(&mut rng, 6);
            let red = partial_trace_env(&h, 2, 3).unwrap();
            prop_assert!(frob_norm(&(&red - &dagger(&red))) < 1e-13);
        }

        #[test]
        fn prop_vec_unvec_roundtrip(seed in 0u64..1000, rows in 1usize..5, cols in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = random_mat(&mut rng, rows, cols);
            let back = unvectorize(&vectorize(&x), rows, cols).unwrap();
            prop_assert!(frob_norm(&(&back - &x)) < 1e-15);
        }
    }
}
