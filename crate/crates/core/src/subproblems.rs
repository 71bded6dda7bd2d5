//! Builders for the two convexified subproblems of the alternation.
//!
//! The phase-shift subproblem optimizes the lifted matrices `Q^r`, `Q^t`
//! at fixed precoder covariances, with the rank-one constraint relaxed into
//! a penalized nuclear-minus-spectral gap whose concave part is replaced by
//! its supporting hyperplane at the current iterate. The beamforming
//! subproblem optimizes the covariances `P_m` and the rate slacks at fixed
//! phase matrices, with the two bilinear couplings (`tau * psi_k` and
//! `(beta - 1) * psi_k`) replaced by first-order surrogates exact at the
//! anchor.
//!
//! Both bilinear couplings carry gradient terms in the variables of the
//! *other* subproblem; inside each builder those are identically zero
//! because the alternation fixes them, so only the active-block gradients
//! appear here. The nonconvex coupling `tau = beta^(1/K)` is relaxed to its
//! hypograph `tau <= beta^(1/K)` (tight at optimum since the objective
//! increases in `tau`) and represented by a tree of 2x2 PSD geometric-mean
//! gates.

use num_complex::Complex64;

use crate::channel::{ChannelSet, Side, SystemConfig};
use crate::conic::{LinExpr, MatVar, ScalVar, SdpProblem, Sense};
use crate::error::{Error, Result};
use crate::hermitian::{largest_eigpair, re_trace_product, spectral_norm, CMat, CVec, Hermitian};

/// Current iterate the surrogates expand around.
///
/// `p` always has `K + 1` entries (index 0 is the common stream, all-zero
/// for schemes without one). `rho` is the active penalty weight and
/// `lambda` the fractional-programming parameter; both stay fixed inside a
/// built problem.
#[derive(Debug, Clone)]
pub struct IterateAnchor {
    pub p: Vec<Hermitian>,
    pub q_r: Hermitian,
    pub q_t: Hermitian,
    pub tau: f64,
    pub beta: f64,
    pub lambda: f64,
    pub rho: f64,
}

impl IterateAnchor {
    pub fn validate(&self, cs: &ChannelSet, cfg: &SystemConfig) -> Result<()> {
        if self.p.len() != cfg.k() + 1 {
            return Err(Error::Config(format!(
                "anchor has {} precoder matrices for {} users",
                self.p.len(),
                cfg.k()
            )));
        }
        for (m, p) in self.p.iter().enumerate() {
            if p.dim() != cfg.n_t {
                return Err(Error::Config(format!(
                    "anchor precoder {m} has dimension {}, expected {}",
                    p.dim(),
                    cfg.n_t
                )));
            }
        }
        if self.q_r.dim() != cs.n_s() || self.q_t.dim() != cs.n_s() {
            return Err(Error::Config("anchor phase matrix dimension mismatch".into()));
        }
        for v in [self.tau, self.beta, self.lambda, self.rho] {
            if !v.is_finite() {
                return Err(Error::Numeric("non-finite anchor scalar".into()));
            }
        }
        if self.lambda < 0.0 {
            return Err(Error::Config(format!("lambda must be nonnegative, got {}", self.lambda)));
        }
        if self.rho < 0.0 {
            return Err(Error::Config(format!("rho must be nonnegative, got {}", self.rho)));
        }
        // anchors must sit (approximately) inside their own cones
        let cone_tol = 1e-5;
        for p in &self.p {
            if !p.is_psd(cone_tol) {
                return Err(Error::Numeric("anchor precoder matrix is not PSD".into()));
            }
        }
        if !self.q_r.is_psd(cone_tol) || !self.q_t.is_psd(cone_tol) {
            return Err(Error::Numeric("anchor phase matrix is not PSD".into()));
        }
        Ok(())
    }
}

/// Structural variant of the optimization problem (scheme knobs).
#[derive(Debug, Clone)]
pub struct SchemeShape {
    /// Whether the common stream and its rate variables exist.
    pub common_stream: bool,
    /// Whether the internal/external eavesdropping caps are enforced.
    pub secrecy: bool,
    /// Per-element diagonal constraint on the lifted phase matrices.
    pub diag: DiagConstraint,
}

impl SchemeShape {
    /// Full design: common stream, secrecy caps, coupled energy splitting.
    pub fn full() -> Self {
        Self {
            common_stream: true,
            secrecy: true,
            diag: DiagConstraint::Coupled,
        }
    }
}

#[derive(Debug, Clone)]
pub enum DiagConstraint {
    /// Energy splitting: `[Q^r]_nn + [Q^t]_nn = 1` per element.
    Coupled,
    /// Fixed per-side amplitudes: `[Q^r]_nn = r[n]`, `[Q^t]_nn = t[n]`
    /// (values are squared amplitudes).
    Fixed { r: Vec<f64>, t: Vec<f64> },
}

/// Supporting hyperplane of the spectral norm at a PSD anchor.
///
/// `eval(Q) = ||Q_a||_2 + Tr(u u^H (Q - Q_a))` with `u` the largest
/// eigenvector; exact at the anchor and a global lower bound on `||Q||_2`.
#[derive(Debug, Clone)]
pub struct SpectralCut {
    pub base: f64,
    pub u: CVec,
    anchor_term: f64,
}

impl SpectralCut {
    pub fn eval(&self, q: &Hermitian) -> f64 {
        self.base + (self.u.adjoint() * q.mat() * &self.u)[(0, 0)].re - self.anchor_term
    }

    /// Coefficient matrix `u u^H` of the linear part.
    pub fn gradient(&self) -> Hermitian {
        Hermitian::from_outer(&self.u)
    }

    /// Constant part of the affine functional.
    pub fn offset(&self) -> f64 {
        self.base - self.anchor_term
    }
}

/// First-order expansion of the spectral norm at `q_anchor`.
pub fn linearize_spectral(q_anchor: &Hermitian) -> Result<SpectralCut> {
    let (_, u) = largest_eigpair(q_anchor)?;
    let base = spectral_norm(q_anchor);
    let anchor_term = (u.adjoint() * q_anchor.mat() * &u)[(0, 0)].re;
    Ok(SpectralCut {
        base,
        u,
        anchor_term,
    })
}

/// Affine surrogate of a bilinear product `scalar * psi_k(P)` (with
/// `scalar = tau` for the rate constraint and `scalar = beta - 1` for the
/// common-stream constraint), expanded at the anchor.
#[derive(Debug, Clone)]
pub struct BilinearCut {
    /// Gradient weight on `psi_k(P)`: the anchor value of the bilinear
    /// scalar factor.
    pub grad_scale: f64,
    /// `psi_k` evaluated at the anchor precoders.
    pub psi_anchor: f64,
    /// Per-user Gram matrix `Gamma_k^H Q^l Gamma_k`.
    pub gram: Hermitian,
    pub sigma2: f64,
    /// Anchor value of the free scalar (`tau` or `beta`).
    pub scalar_anchor: f64,
}

impl BilinearCut {
    /// `psi_k(P)` under this cut's Gram matrix.
    pub fn psi(&self, p: &[Hermitian]) -> f64 {
        p[1..]
            .iter()
            .map(|pm| re_trace_product(self.gram.mat(), pm.mat()))
            .sum::<f64>()
            + self.sigma2
    }

    /// Surrogate value at `(P, scalar)`.
    pub fn eval(&self, p: &[Hermitian], scalar: f64) -> f64 {
        self.grad_scale * self.psi(p) + self.psi_anchor * (scalar - self.scalar_anchor)
    }
}

fn user_gram(cs: &ChannelSet, anchor: &IterateAnchor, k: usize) -> Hermitian {
    let gamma = cs.gamma_user(k);
    let q = match cs.users[k].side {
        Side::Reflection => &anchor.q_r,
        Side::Transmission => &anchor.q_t,
    };
    Hermitian::symmetrized(gamma.adjoint() * q.mat() * &gamma).expect("square")
}

fn eve_gram(cs: &ChannelSet, anchor: &IterateAnchor, j: usize) -> Hermitian {
    let gamma = cs.gamma_eve(j);
    let q = match cs.eves[j].side {
        Side::Reflection => &anchor.q_r,
        Side::Transmission => &anchor.q_t,
    };
    Hermitian::symmetrized(gamma.adjoint() * q.mat() * &gamma).expect("square")
}

/// Surrogate of `f(tau, P) = tau * psi_k(P)` at the anchor (exact there,
/// affine in both arguments).
pub fn linearize_f(cs: &ChannelSet, cfg: &SystemConfig, anchor: &IterateAnchor, k: usize) -> Result<BilinearCut> {
    if k >= cfg.k() {
        return Err(Error::Config(format!("user index {k} out of range")));
    }
    let gram = user_gram(cs, anchor, k);
    let mut cut = BilinearCut {
        grad_scale: anchor.tau,
        psi_anchor: 0.0,
        gram,
        sigma2: cfg.sigma2,
        scalar_anchor: anchor.tau,
    };
    cut.psi_anchor = cut.psi(&anchor.p);
    Ok(cut)
}

/// Surrogate of `g(beta, P) = (beta - 1) * psi_k(P)` at the anchor.
pub fn linearize_g(cs: &ChannelSet, cfg: &SystemConfig, anchor: &IterateAnchor, k: usize) -> Result<BilinearCut> {
    if k >= cfg.k() {
        return Err(Error::Config(format!("user index {k} out of range")));
    }
    let gram = user_gram(cs, anchor, k);
    let mut cut = BilinearCut {
        grad_scale: anchor.beta - 1.0,
        psi_anchor: 0.0,
        gram,
        sigma2: cfg.sigma2,
        scalar_anchor: anchor.beta,
    };
    cut.psi_anchor = cut.psi(&anchor.p);
    Ok(cut)
}

// ---------------------------------------------------------------------------
// Geometric-mean gates for tau <= beta^(1/K)
// ---------------------------------------------------------------------------

#[derive(Clone, Copy)]
enum GmTerm {
    Var(ScalVar),
    One,
}

/// Constrain `u^2 <= a * b` through a 2x2 PSD block with pinned entries.
fn add_gm_gate(p: &mut SdpProblem, a: GmTerm, b: GmTerm, u: ScalVar) -> Result<()> {
    let s = p.add_symmetric_var(2);
    let unit = |r: usize, c: usize| -> CMat {
        let mut m = CMat::zeros(2, 2);
        m[(r, c)] = Complex64::new(1.0, 0.0);
        m
    };
    let mut pin = |coeff_mat: CMat, term: GmTerm| -> Result<()> {
        let mut e = LinExpr::new();
        e.add_mat(s, coeff_mat);
        match term {
            GmTerm::Var(v) => {
                e.add_scalar(v, -1.0);
            }
            GmTerm::One => {
                e.add_const(-1.0);
            }
        }
        p.add_constraint(e, Sense::Eq)
    };
    pin(unit(0, 0), a)?;
    pin(unit(1, 1), b)?;
    // S_01 = u (the off-diagonal pin uses the symmetrized basis element)
    let mut off = CMat::zeros(2, 2);
    off[(0, 1)] = Complex64::new(0.5, 0.0);
    off[(1, 0)] = Complex64::new(0.5, 0.0);
    pin(off, GmTerm::Var(u))?;
    Ok(())
}

/// Add `tau <= beta^(1/k_users)` via a binary tree of geometric-mean gates.
fn add_root_coupling(p: &mut SdpProblem, tau: ScalVar, beta: ScalVar, k_users: usize) -> Result<()> {
    if k_users == 1 {
        // tau <= beta directly
        let mut e = LinExpr::new();
        e.add_scalar(tau, 1.0);
        e.add_scalar(beta, -1.0);
        return p.add_constraint(e, Sense::Le);
    }
    let t_leaves = k_users.next_power_of_two();
    // tau^T <= beta * tau^(T-K) * 1^(K-1)  <=>  tau^K <= beta
    let mut level: Vec<GmTerm> = Vec::with_capacity(t_leaves);
    level.push(GmTerm::Var(beta));
    for _ in 0..(t_leaves - k_users) {
        level.push(GmTerm::Var(tau));
    }
    for _ in 0..(k_users - 1) {
        level.push(GmTerm::One);
    }
    while level.len() > 1 {
        let mut next = Vec::with_capacity(level.len() / 2);
        for pair in level.chunks(2) {
            match (pair[0], pair[1]) {
                (GmTerm::One, GmTerm::One) => next.push(GmTerm::One),
                (a, b) => {
                    let u = p.add_scalar_var();
                    add_gm_gate(p, a, b, u)?;
                    next.push(GmTerm::Var(u));
                }
            }
        }
        level = next;
    }
    let mut e = LinExpr::new();
    e.add_scalar(tau, 1.0);
    match level[0] {
        GmTerm::Var(root) => {
            e.add_scalar(root, -1.0);
        }
        GmTerm::One => {
            e.add_const(-1.0);
        }
    }
    p.add_constraint(e, Sense::Le)
}

fn add_lower_bound(p: &mut SdpProblem, v: ScalVar, bound: f64) -> Result<()> {
    let mut e = LinExpr::constant(bound);
    e.add_scalar(v, -1.0);
    p.add_constraint(e, Sense::Le)
}

// ---------------------------------------------------------------------------
// Phase-shift subproblem
// ---------------------------------------------------------------------------

/// Variable handles of a built phase problem.
#[derive(Debug, Clone)]
pub struct PhaseVars {
    pub q_r: MatVar,
    pub q_t: MatVar,
    pub t: ScalVar,
    pub tau: Option<ScalVar>,
    pub beta: Option<ScalVar>,
}

#[derive(Debug)]
pub struct PhaseBuild {
    pub problem: SdpProblem,
    pub vars: PhaseVars,
    pub cut_r: SpectralCut,
    pub cut_t: SpectralCut,
}

/// One diagonal-entry selector `E_nn` as a coefficient matrix.
fn diag_selector(n_s: usize, n: usize) -> CMat {
    let mut m = CMat::zeros(n_s, n_s);
    m[(n, n)] = Complex64::new(1.0, 0.0);
    m
}

/// Build the convexified phase-shift problem at the anchor.
///
/// Variables: `Q^r`, `Q^t` (Hermitian PSD), slack `t`, and when the common
/// stream exists a shared `tau`, `beta` pair. Objective:
/// `t - rho * sum_l (Tr(Q^l) - A~(Q^l))` with the nuclear norm of a PSD
/// variable written as its trace.
pub fn build_phase_problem(
    cs: &ChannelSet,
    cfg: &SystemConfig,
    anchor: &IterateAnchor,
    shape: &SchemeShape,
) -> Result<PhaseBuild> {
    cfg.validate()?;
    anchor.validate(cs, cfg)?;
    let n_s = cs.n_s();
    let k_n = cfg.k();
    if let DiagConstraint::Fixed { r, t } = &shape.diag {
        if r.len() != n_s || t.len() != n_s {
            return Err(Error::Config("fixed diagonal pattern length mismatch".into()));
        }
    }

    let cut_r = linearize_spectral(&anchor.q_r)?;
    let cut_t = linearize_spectral(&anchor.q_t)?;

    let mut p = SdpProblem::new();
    let q_r = p.add_hermitian_var(n_s);
    let q_t = p.add_hermitian_var(n_s);
    let t = p.add_scalar_var();
    let (tau, beta) = if shape.common_stream {
        let tau = p.add_scalar_var();
        let beta = p.add_scalar_var();
        add_root_coupling(&mut p, tau, beta, k_n)?;
        add_lower_bound(&mut p, tau, 1.0)?;
        add_lower_bound(&mut p, beta, 1.0)?;
        (Some(tau), Some(beta))
    } else {
        (None, None)
    };

    let side_var = |side: Side| match side {
        Side::Reflection => q_r,
        Side::Transmission => q_t,
    };

    // objective: t + rho * sum_l [ Tr((u u^H - I) Q^l) + offset_l ]
    let mut obj = LinExpr::new();
    obj.add_scalar(t, 1.0);
    if anchor.rho > 0.0 {
        for (qv, cut) in [(q_r, &cut_r), (q_t, &cut_t)] {
            let grad = cut.gradient();
            let coeff = (grad.mat() - CMat::identity(n_s, n_s)).scale(anchor.rho);
            obj.add_mat(qv, coeff);
            obj.add_const(anchor.rho * cut.offset());
        }
    }
    p.set_objective(obj, true)?;

    // per-user cascaded coefficient matrices D_{k,m} = Gamma_k P_m^a Gamma_k^H
    let user_d: Vec<Vec<CMat>> = (0..k_n)
        .map(|k| {
            let gamma = cs.gamma_user(k);
            anchor
                .p
                .iter()
                .map(|pm| &gamma * pm.mat() * gamma.adjoint())
                .collect()
        })
        .collect();
    let psi_q_anchor: Vec<f64> = (0..k_n)
        .map(|k| {
            let q = match cs.users[k].side {
                Side::Reflection => &anchor.q_r,
                Side::Transmission => &anchor.q_t,
            };
            (1..=k_n)
                .map(|m| re_trace_product(&user_d[k][m], q.mat()))
                .sum::<f64>()
                + cfg.sigma2
        })
        .collect();

    // rate constraints: t <= tau_a * psi_k(Q) - lambda * phi_k(Q)
    for k in 0..k_n {
        let qv = side_var(cs.users[k].side);
        let mut coeff = CMat::zeros(n_s, n_s);
        for m in 1..=k_n {
            let w = if m == k + 1 {
                anchor.tau
            } else {
                anchor.tau - anchor.lambda
            };
            coeff += user_d[k][m].scale(w);
        }
        let mut e = LinExpr::new();
        e.add_scalar(t, 1.0);
        e.add_mat(qv, coeff.scale(-1.0));
        e.add_const(-(anchor.tau - anchor.lambda) * cfg.sigma2);
        p.add_constraint(e, Sense::Le)?;
    }

    // linearized common-stream constraint, restricted to the Q variables:
    // (beta_a - 1) psi_k(Q) + psi_k(Q_a)(beta - beta_a) <= Tr(D_{k,c} Q^l)
    if let (Some(_), Some(beta)) = (tau, beta) {
        for k in 0..k_n {
            let qv = side_var(cs.users[k].side);
            let mut coeff = CMat::zeros(n_s, n_s);
            for m in 1..=k_n {
                coeff += user_d[k][m].scale(anchor.beta - 1.0);
            }
            coeff -= &user_d[k][0];
            let mut e = LinExpr::new();
            e.add_mat(qv, coeff);
            e.add_const((anchor.beta - 1.0) * cfg.sigma2);
            e.add_scalar(beta, psi_q_anchor[k]);
            e.add_const(-psi_q_anchor[k] * anchor.beta);
            p.add_constraint(e, Sense::Le)?;
        }
    }

    if shape.secrecy {
        // internal caps: Tr((P_i/r0 - sum_{k' not in {k,i}} P_k') cascade Q) <= sigma2
        for k in 0..k_n {
            let qv = side_var(cs.users[k].side);
            for i in 0..k_n {
                if i == k {
                    continue;
                }
                let mut coeff = user_d[k][i + 1].scale(1.0 / cfg.r0);
                for kp in 0..k_n {
                    if kp != k && kp != i {
                        coeff -= &user_d[k][kp + 1];
                    }
                }
                let mut e = LinExpr::new();
                e.add_mat(qv, coeff);
                e.add_const(-cfg.sigma2);
                p.add_constraint(e, Sense::Le)?;
            }
        }
        // external caps
        for j in 0..cfg.j() {
            let gamma = cs.gamma_eve(j);
            let eve_d: Vec<CMat> = anchor
                .p
                .iter()
                .map(|pm| &gamma * pm.mat() * gamma.adjoint())
                .collect();
            let qv = side_var(cs.eves[j].side);
            // private streams
            for k in 0..k_n {
                let mut coeff = eve_d[k + 1].scale(1.0 / cfg.r_e);
                for kp in 0..k_n {
                    if kp != k {
                        coeff -= &eve_d[kp + 1];
                    }
                }
                if shape.common_stream {
                    coeff -= &eve_d[0];
                }
                let mut e = LinExpr::new();
                e.add_mat(qv, coeff);
                e.add_const(-cfg.sigma2_e);
                p.add_constraint(e, Sense::Le)?;
            }
            // common stream
            if shape.common_stream {
                let mut coeff = eve_d[0].scale(1.0 / cfg.r_e);
                for kp in 0..k_n {
                    coeff -= &eve_d[kp + 1];
                }
                let mut e = LinExpr::new();
                e.add_mat(qv, coeff);
                e.add_const(-cfg.sigma2_e);
                p.add_constraint(e, Sense::Le)?;
            }
        }
    }

    // diagonal constraints
    match &shape.diag {
        DiagConstraint::Coupled => {
            for n in 0..n_s {
                let mut e = LinExpr::constant(-1.0);
                e.add_mat(q_r, diag_selector(n_s, n));
                e.add_mat(q_t, diag_selector(n_s, n));
                p.add_constraint(e, Sense::Eq)?;
            }
        }
        DiagConstraint::Fixed { r, t: tdiag } => {
            for n in 0..n_s {
                let mut er = LinExpr::constant(-r[n]);
                er.add_mat(q_r, diag_selector(n_s, n));
                p.add_constraint(er, Sense::Eq)?;
                let mut et = LinExpr::constant(-tdiag[n]);
                et.add_mat(q_t, diag_selector(n_s, n));
                p.add_constraint(et, Sense::Eq)?;
            }
        }
    }

    Ok(PhaseBuild {
        problem: p,
        vars: PhaseVars {
            q_r,
            q_t,
            t,
            tau,
            beta,
        },
        cut_r,
        cut_t,
    })
}

// ---------------------------------------------------------------------------
// Beamforming subproblem
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct BeamVars {
    /// Covariance variables, index 0 = common stream.
    pub p: Vec<MatVar>,
    pub t: ScalVar,
    pub tau: Option<ScalVar>,
    pub beta: Option<ScalVar>,
}

#[derive(Debug)]
pub struct BeamBuild {
    pub problem: SdpProblem,
    pub vars: BeamVars,
}

/// Build the convexified beamforming problem at the anchor (rank
/// constraints dropped, phase matrices fixed to the anchor's `Q^l`).
pub fn build_beamforming_problem(
    cs: &ChannelSet,
    cfg: &SystemConfig,
    anchor: &IterateAnchor,
    shape: &SchemeShape,
) -> Result<BeamBuild> {
    cfg.validate()?;
    anchor.validate(cs, cfg)?;
    let k_n = cfg.k();
    let n_t = cfg.n_t;

    let f_cuts: Vec<BilinearCut> = (0..k_n)
        .map(|k| linearize_f(cs, cfg, anchor, k))
        .collect::<Result<_>>()?;
    let g_cuts: Vec<BilinearCut> = if shape.common_stream {
        (0..k_n)
            .map(|k| linearize_g(cs, cfg, anchor, k))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    let mut p = SdpProblem::new();
    let pv: Vec<MatVar> = (0..=k_n).map(|_| p.add_hermitian_var(n_t)).collect();
    let t = p.add_scalar_var();
    let (tau, beta) = if shape.common_stream {
        let tau = p.add_scalar_var();
        let beta = p.add_scalar_var();
        add_root_coupling(&mut p, tau, beta, k_n)?;
        add_lower_bound(&mut p, tau, 1.0)?;
        add_lower_bound(&mut p, beta, 1.0)?;
        (Some(tau), Some(beta))
    } else {
        // no common stream: the covariance is pinned to zero
        let mut e = LinExpr::new();
        e.add_mat(pv[0], CMat::identity(n_t, n_t));
        p.add_constraint(e, Sense::Eq)?;
        (None, None)
    };

    let mut obj = LinExpr::new();
    obj.add_scalar(t, 1.0);
    p.set_objective(obj, true)?;

    // rate constraints: t <= f~(tau, P) - lambda * phi_k(P)
    for k in 0..k_n {
        let cut = &f_cuts[k];
        let mut e = LinExpr::new();
        e.add_scalar(t, 1.0);
        for m in 1..=k_n {
            let mut w = -cut.grad_scale;
            if m != k + 1 {
                w += anchor.lambda;
            }
            e.add_mat(pv[m], cut.gram.mat().scale(w));
        }
        if let Some(tau) = tau {
            e.add_scalar(tau, -cut.psi_anchor);
            e.add_const(cut.psi_anchor * cut.scalar_anchor);
        }
        e.add_const(-cut.grad_scale * cfg.sigma2 + anchor.lambda * cfg.sigma2);
        p.add_constraint(e, Sense::Le)?;
    }

    // linearized common-stream constraint: g~(beta, P) <= Tr(G_k P_c)
    if let Some(beta) = beta {
        for k in 0..k_n {
            let cut = &g_cuts[k];
            let mut e = LinExpr::new();
            for m in 1..=k_n {
                e.add_mat(pv[m], cut.gram.mat().scale(cut.grad_scale));
            }
            e.add_const(cut.grad_scale * cfg.sigma2);
            e.add_scalar(beta, cut.psi_anchor);
            e.add_const(-cut.psi_anchor * cut.scalar_anchor);
            e.add_mat(pv[0], cut.gram.mat().scale(-1.0));
            p.add_constraint(e, Sense::Le)?;
        }
    }

    if shape.secrecy {
        for k in 0..k_n {
            let gram = &f_cuts[k].gram;
            for i in 0..k_n {
                if i == k {
                    continue;
                }
                let mut e = LinExpr::new();
                e.add_mat(pv[i + 1], gram.mat().scale(1.0 / cfg.r0));
                for kp in 0..k_n {
                    if kp != k && kp != i {
                        e.add_mat(pv[kp + 1], gram.mat().scale(-1.0));
                    }
                }
                e.add_const(-cfg.sigma2);
                p.add_constraint(e, Sense::Le)?;
            }
        }
        for j in 0..cfg.j() {
            let gram = eve_gram(cs, anchor, j);
            for k in 0..k_n {
                let mut e = LinExpr::new();
                e.add_mat(pv[k + 1], gram.mat().scale(1.0 / cfg.r_e));
                for kp in 0..k_n {
                    if kp != k {
                        e.add_mat(pv[kp + 1], gram.mat().scale(-1.0));
                    }
                }
                if shape.common_stream {
                    e.add_mat(pv[0], gram.mat().scale(-1.0));
                }
                e.add_const(-cfg.sigma2_e);
                p.add_constraint(e, Sense::Le)?;
            }
            if shape.common_stream {
                let mut e = LinExpr::new();
                e.add_mat(pv[0], gram.mat().scale(1.0 / cfg.r_e));
                for kp in 0..k_n {
                    e.add_mat(pv[kp + 1], gram.mat().scale(-1.0));
                }
                e.add_const(-cfg.sigma2_e);
                p.add_constraint(e, Sense::Le)?;
            }
        }
    }

    // power budget over all streams
    let mut power = LinExpr::constant(-cfg.p_max);
    for m in 0..=k_n {
        power.add_mat(pv[m], CMat::identity(n_t, n_t));
    }
    p.add_constraint(power, Sense::Le)?;

    Ok(BeamBuild {
        problem: p,
        vars: BeamVars {
            p: pv,
            t,
            tau,
            beta,
        },
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
