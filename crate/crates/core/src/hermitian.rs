//! Complex and Hermitian linear-algebra kernel.
//!
//! Everything downstream (channel evaluation, SDP construction, rank-one
//! recovery) is built on a handful of primitives defined here: quadratic
//! trace forms, dense Hermitian eigendecomposition, nuclear/spectral norms,
//! and the complex-to-real PSD embedding used to express Hermitian
//! semidefinite constraints over a real symmetric-cone solver.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix.
pub type CMat = DMatrix<Complex64>;
/// Dense complex column vector.
pub type CVec = DVector<Complex64>;

/// Absolute tolerance on the smallest eigenvalue when classifying a matrix
/// as positive semidefinite (matches typical interior-point feasibility
/// accuracy).
pub const TOL_PSD: f64 = 1e-7;

/// Relative asymmetry above which a matrix is rejected as "not Hermitian"
/// rather than silently symmetrized.
const TOL_ASYM_REL: f64 = 1e-6;

fn all_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Hermitian matrix with exact symmetry enforced on construction.
///
/// `M <- (M + M^H)/2` is applied by every constructor, so the stored matrix
/// satisfies `M == M.adjoint()` bitwise. Solver outputs carry asymmetry at
/// solver tolerance; [`Hermitian::symmetrized`] accepts those, while
/// [`Hermitian::new`] rejects inputs whose asymmetry exceeds rounding scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian {
    m: CMat,
}

impl Hermitian {
    /// Build from a matrix that is already Hermitian up to rounding error.
    ///
    /// Returns a configuration error for non-square input and a numeric
    /// error for non-finite entries or asymmetry beyond `1e-6` relative.
    pub fn new(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Config(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !all_finite(&m) {
            return Err(Error::Numeric("non-finite entry in Hermitian input".into()));
        }
        let asym = (&m - m.adjoint()).norm();
        let scale = m.norm();
        if asym > TOL_ASYM_REL * scale + 1e-14 {
            return Err(Error::Numeric(format!(
                "matrix is not Hermitian: asymmetry {asym:.3e} vs scale {scale:.3e}"
            )));
        }
        Ok(Self::symmetrize(m))
    }

    /// Build from a matrix with arbitrary asymmetry, symmetrizing it.
    ///
    /// Intended for solver outputs; still rejects non-square or non-finite
    /// input.
    pub fn symmetrized(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Config(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if !all_finite(&m) {
            return Err(Error::Numeric("non-finite entry in Hermitian input".into()));
        }
        Ok(Self::symmetrize(m))
    }

    fn symmetrize(m: CMat) -> Self {
        let h = (&m + m.adjoint()).scale(0.5);
        Self { m: h }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            m: CMat::zeros(dim, dim),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            m: CMat::identity(dim, dim),
        }
    }

    /// Rank-one matrix `v v^H`.
    pub fn from_outer(v: &CVec) -> Self {
        let mut m = CMat::zeros(v.len(), v.len());
        for i in 0..v.len() {
            for j in 0..v.len() {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        // exactly Hermitian by construction, but normalize the diagonal's
        // imaginary parts introduced by conj products
        Self::symmetrize(m)
    }

    pub fn from_real_diag(d: &[f64]) -> Self {
        let mut m = CMat::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn mat(&self) -> &CMat {
        &self.m
    }

    pub fn into_mat(self) -> CMat {
        self.m
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            m: self.m.scale(s),
        }
    }

    pub fn trace_re(&self) -> f64 {
        (0..self.dim()).map(|i| self.m[(i, i)].re).sum()
    }

    /// Eigenvalues in descending order.
    pub fn eigenvalues_desc(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self
            .m
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .copied()
            .collect();
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues_desc().last().copied().unwrap_or(0.0)
    }

    pub fn is_psd(&self, tol: f64) -> bool {
        self.dim() == 0 || self.min_eigenvalue() >= -tol
    }
}

/// Real part of `Tr(A B)`.
///
/// For Hermitian `A`, `B` the trace is real and this is the exact value.
pub fn re_trace_product(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let x = a[(i, j)];
            let y = b[(j, i)];
            acc += x.re * y.re - x.im * y.im;
        }
    }
    acc
}

/// Quadratic trace form `Tr(G P G^H Q)`.
///
/// With `P = w w^H` and `Q = q q^H` this equals the received power
/// `|q^H G w|^2` of a cascaded link. The result is real for Hermitian `P`,
/// `Q`; the imaginary part is checked against rounding scale and discarded.
pub fn trace_form(g: &CMat, p: &Hermitian, q: &Hermitian) -> Result<f64> {
    if p.dim() != g.ncols() || q.dim() != g.nrows() {
        return Err(Error::Config(format!(
            "trace_form dimension mismatch: G is {}x{}, P is {}, Q is {}",
            g.nrows(),
            g.ncols(),
            p.dim(),
            q.dim()
        )));
    }
    let gp = g * p.mat();
    let gpgh = &gp * g.adjoint();
    // Tr(gpgh * Q) with explicit imaginary-part bookkeeping
    let mut re = 0.0;
    let mut im = 0.0;
    for i in 0..gpgh.nrows() {
        for j in 0..gpgh.ncols() {
            let x = gpgh[(i, j)];
            let y = q.mat()[(j, i)];
            re += x.re * y.re - x.im * y.im;
            im += x.re * y.im + x.im * y.re;
        }
    }
    if im.abs() > 1e-9 * re.abs() + 1e-12 {
        return Err(Error::Numeric(format!(
            "trace form has non-negligible imaginary part: re={re:.6e} im={im:.6e}"
        )));
    }
    Ok(re)
}

/// Largest eigenvalue and a unit-norm eigenvector of a Hermitian matrix.
///
/// Satisfies `M v ~= lambda v` with residual below `1e-8 ||M||`; for PSD
/// input the eigenvalue equals the spectral norm.
pub fn largest_eigpair(m: &Hermitian) -> Result<(f64, CVec)> {
    if m.dim() == 0 {
        return Err(Error::Config("empty matrix has no eigenpair".into()));
    }
    let eig = m.mat().clone().symmetric_eigen();
    let mut best = 0;
    for i in 1..eig.eigenvalues.len() {
        if eig.eigenvalues[i] > eig.eigenvalues[best] {
            best = i;
        }
    }
    let lambda = eig.eigenvalues[best];
    if !lambda.is_finite() {
        return Err(Error::Numeric("non-finite eigenvalue".into()));
    }
    let mut v: CVec = eig.eigenvectors.column(best).into();
    let n = v.norm();
    if n <= 0.0 || !n.is_finite() {
        return Err(Error::Numeric("degenerate eigenvector".into()));
    }
    v /= Complex64::new(n, 0.0);
    Ok((lambda, v))
}

/// Nuclear norm (sum of singular values) of a Hermitian matrix.
pub fn nuclear_norm(m: &Hermitian) -> f64 {
    m.eigenvalues_desc().iter().map(|l| l.abs()).sum()
}

/// Spectral norm (largest singular value) of a Hermitian matrix.
pub fn spectral_norm(m: &Hermitian) -> f64 {
    m.eigenvalues_desc()
        .iter()
        .map(|l| l.abs())
        .fold(0.0, f64::max)
}

/// Real symmetric embedding `[[Re M, -Im M], [Im M, Re M]]` of a Hermitian
/// matrix.
///
/// The embedding is PSD iff `M` is PSD, doubles the trace and every
/// eigenvalue multiplicity, and maps inner products as
/// `Tr(A^H B) = Tr(embed(A)^T embed(B)) / 2`.
pub fn real_embed(m: &Hermitian) -> DMatrix<f64> {
    let n = m.dim();
    let mut out = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = m.mat()[(i, j)];
            out[(i, j)] = z.re;
            out[(n + i, n + j)] = z.re;
            out[(i, n + j)] = -z.im;
            out[(n + i, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`real_embed`] for (approximately) structured symmetric input.
///
/// Averages the two real blocks and the two imaginary blocks, which projects
/// a general symmetric matrix onto the embedded subspace, then symmetrizes.
pub fn real_unembed(x: &DMatrix<f64>) -> Result<Hermitian> {
    if x.nrows() != x.ncols() || x.nrows() % 2 != 0 {
        return Err(Error::Config(format!(
            "embedded matrix must be square with even dimension, got {}x{}",
            x.nrows(),
            x.ncols()
        )));
    }
    let n = x.nrows() / 2;
    let mut m = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (x[(i, j)] + x[(n + i, n + j)]);
            let im = 0.5 * (x[(n + i, j)] - x[(i, n + j)]);
            m[(i, j)] = Complex64::new(re, im);
        }
    }
    Hermitian::symmetrized(m)
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn randn_vec(rng: &mut ChaCha8Rng, n: usize) -> CVec {
        CVec::from_fn(n, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn randn_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| {
            Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, n: usize) -> Hermitian {
        let a = randn_mat(rng, n, n);
        Hermitian::new((&a + a.adjoint()).scale(0.5)).unwrap()
    }

    fn random_psd(rng: &mut ChaCha8Rng, n: usize, rank: usize) -> Hermitian {
        let mut m = CMat::zeros(n, n);
        for _ in 0..rank {
            let v = randn_vec(rng, n);
            for i in 0..n {
                for j in 0..n {
                    m[(i, j)] += v[i] * v[j].conj();
                }
            }
        }
        Hermitian::new(m).unwrap()
    }

    #[test]
    fn trace_form_scalar_case() {
        let g = CMat::from_element(1, 1, Complex64::new(1.0, 0.0));
        let p = Hermitian::from_real_diag(&[4.0]);
        let q = Hermitian::from_real_diag(&[1.0]);
        assert!((trace_form(&g, &p, &q).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn trace_form_zero_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = randn_mat(&mut rng, 3, 2);
        let p = Hermitian::zeros(2);
        let q = random_psd(&mut rng, 3, 2);
        assert_eq!(trace_form(&g, &p, &q).unwrap(), 0.0);
    }

    #[test]
    fn trace_form_matches_rank_one_power() {
        // Tr(G ww^H G^H qq^H) == |q^H G w|^2
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (ns, nt) = (6, 4);
            let g = randn_mat(&mut rng, ns, nt);
            let w = randn_vec(&mut rng, nt);
            let q = randn_vec(&mut rng, ns);
            let lhs = trace_form(&g, &Hermitian::from_outer(&w), &Hermitian::from_outer(&q)).unwrap();
            let rhs = (q.adjoint() * &g * &w)[(0, 0)].norm_sqr();
            assert!(
                (lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0),
                "seed {seed}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn trace_form_rejects_dimension_mismatch() {
        let g = CMat::zeros(3, 2);
        let p = Hermitian::zeros(3); // should be 2
        let q = Hermitian::zeros(3);
        assert!(matches!(trace_form(&g, &p, &q), Err(Error::Config(_))));
    }

    #[test]
    fn largest_eigpair_identity() {
        let (l, v) = largest_eigpair(&Hermitian::identity(3)).unwrap();
        assert!((l - 1.0).abs() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn largest_eigpair_diagonal() {
        let m = Hermitian::from_real_diag(&[5.0, 1.0]);
        let (l, v) = largest_eigpair(&m).unwrap();
        assert!((l - 5.0).abs() < 1e-12);
        // e1 up to unit phase
        assert!((v[0].norm() - 1.0).abs() < 1e-10);
        assert!(v[1].norm() < 1e-10);
    }

    #[test]
    fn largest_eigpair_rank_one() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let q = randn_vec(&mut rng, 5);
            let m = Hermitian::from_outer(&q);
            let (l, v) = largest_eigpair(&m).unwrap();
            let nq = q.norm();
            assert!((l - nq * nq).abs() <= 1e-9 * nq * nq);
            // eigenvector matches q up to phase
            let overlap = (v.adjoint() * &q)[(0, 0)].norm() / nq;
            assert!((overlap - 1.0).abs() < 1e-8, "overlap {overlap}");
        }
    }

    #[test]
    fn eigpair_residual_contract() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_hermitian(&mut rng, 40);
        let (l, v) = largest_eigpair(&m).unwrap();
        let res = (m.mat() * &v - v.scale(l)).norm();
        assert!(res <= 1e-8 * m.mat().norm());
    }

    #[test]
    fn norms_rank_one_equality() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = randn_vec(&mut rng, 4);
        let m = Hermitian::from_outer(&q);
        let n2 = q.norm_squared();
        assert!((nuclear_norm(&m) - n2).abs() < 1e-9 * n2);
        assert!((spectral_norm(&m) - n2).abs() < 1e-9 * n2);
    }

    #[test]
    fn norms_diagonal() {
        let m = Hermitian::from_real_diag(&[2.0, 1.0]);
        assert!((nuclear_norm(&m) - 3.0).abs() < 1e-12);
        assert!((spectral_norm(&m) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn nuclear_dominates_spectral() {
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
            let m = random_psd(&mut rng, 5, 3);
            let gap = nuclear_norm(&m) - spectral_norm(&m);
            assert!(gap >= -1e-10, "seed {seed}: gap {gap}");
        }
    }

    #[test]
    fn rank_one_gap_iff_second_eigenvalue() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // rank-one: gap ~ 0
        let v = randn_vec(&mut rng, 5);
        let m1 = Hermitian::from_outer(&v);
        assert!(nuclear_norm(&m1) - spectral_norm(&m1) <= 1e-8 * spectral_norm(&m1));
        // rank-two with sizable second eigenvalue: gap clearly positive
        let m2 = random_psd(&mut rng, 5, 2);
        let ev = m2.eigenvalues_desc();
        if ev[1] > 1e-8 * ev[0] {
            assert!(nuclear_norm(&m2) - spectral_norm(&m2) > 1e-8 * ev[0]);
        }
    }

    #[test]
    fn reject_non_hermitian() {
        let m = CMat::from_element(1, 1, Complex64::new(0.0, 1.0));
        assert!(Hermitian::new(m).is_err());
    }

    #[test]
    fn embed_scalar() {
        let m = Hermitian::from_real_diag(&[2.0]);
        let e = real_embed(&m);
        assert_eq!(e.nrows(), 2);
        assert!((e[(0, 0)] - 2.0).abs() < 1e-15);
        assert!((e[(1, 1)] - 2.0).abs() < 1e-15);
        assert!(e[(0, 1)].abs() < 1e-15 && e[(1, 0)].abs() < 1e-15);
    }

    #[test]
    fn embed_doubles_spectrum() {
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(300 + seed);
            let m = random_hermitian(&mut rng, 4);
            let mut want: Vec<f64> = m
                .eigenvalues_desc()
                .into_iter()
                .flat_map(|l| [l, l])
                .collect();
            let mut got: Vec<f64> = real_embed(&m).symmetric_eigen().eigenvalues.iter().copied().collect();
            want.sort_by(|a, b| a.partial_cmp(b).unwrap());
            got.sort_by(|a, b| a.partial_cmp(b).unwrap());
            for (w, g) in want.iter().zip(got.iter()) {
                assert!((w - g).abs() <= 1e-9 * w.abs().max(1.0), "seed {seed}");
            }
        }
    }

    #[test]
    fn embed_preserves_psd_both_directions() {
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(400 + seed);
            let psd = seed % 2 == 0;
            let m = if psd {
                random_psd(&mut rng, 4, 2)
            } else {
                // indefinite by construction: shift a PSD matrix down
                let p = random_psd(&mut rng, 4, 3);
                let shift = p.eigenvalues_desc()[0] * 0.5 + 0.1;
                let mut mm = p.mat().clone();
                for i in 0..4 {
                    mm[(i, i)] -= Complex64::new(shift, 0.0);
                }
                Hermitian::new(mm).unwrap()
            };
            let e = real_embed(&m);
            let min_e = e
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .fold(f64::INFINITY, |a, &b| a.min(b));
            assert_eq!(
                m.min_eigenvalue() >= -1e-10,
                min_e >= -1e-10,
                "seed {seed}: embedding must preserve definiteness"
            );
        }
    }

    #[test]
    fn embed_inner_product_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_hermitian(&mut rng, 4);
        let b = random_hermitian(&mut rng, 4);
        let direct = re_trace_product(a.mat(), b.mat());
        let embedded = (real_embed(&a).transpose() * real_embed(&b)).trace() * 0.5;
        assert!((direct - embedded).abs() <= 1e-9 * direct.abs().max(1.0));
    }

    #[test]
    fn unembed_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let m = random_hermitian(&mut rng, 5);
        let back = real_unembed(&real_embed(&m)).unwrap();
        assert!((back.mat() - m.mat()).norm() < 1e-12 * m.mat().norm().max(1.0));
    }
}
