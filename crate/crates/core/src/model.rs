//! Ground-truth evaluation of SINRs, rates and constraint residuals.
//!
//! Every optimizer output is re-evaluated here. Two equivalent evaluation
//! paths exist: the vector form `|h^H Theta H w|^2` when precoder vectors
//! are available, and the lifted trace form `Tr(Gamma P Gamma^H Q)` for
//! covariance iterates; on rank-one inputs the two agree to rounding.
//!
//! The internal-eavesdropping constraint is enforced for every ordered user
//! pair `(k, i)` with `i != k`: after its own SIC steps, user `k` must not
//! be able to decode user `i`'s private stream. The common stream is
//! excluded from that index set since it is decoded by all users by design.

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::channel::{ChannelSet, Side, SystemConfig};
use crate::error::{Error, Result};
use crate::hermitian::{re_trace_product, CVec, Hermitian};

/// Absolute feasibility tolerance on constraint residuals.
pub const TOL_FEAS: f64 = 1e-6;

/// STAR-RIS element coefficients, split into per-side amplitude and phase.
///
/// The energy-splitting invariant is `beta_r[n]^2 + beta_t[n]^2 = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StarState {
    pub beta_r: Vec<f64>,
    pub beta_t: Vec<f64>,
    pub theta_r: Vec<f64>,
    pub theta_t: Vec<f64>,
}

impl StarState {
    /// Equal split with zero phases.
    pub fn uniform(n_s: usize) -> Self {
        let b = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            beta_r: vec![b; n_s],
            beta_t: vec![b; n_s],
            theta_r: vec![0.0; n_s],
            theta_t: vec![0.0; n_s],
        }
    }

    /// Equal split with i.i.d. uniform phases on `[0, 2pi)`.
    pub fn random(n_s: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = Self::uniform(n_s);
        for n in 0..n_s {
            s.theta_r[n] = rng.random::<f64>() * std::f64::consts::TAU;
            s.theta_t[n] = rng.random::<f64>() * std::f64::consts::TAU;
        }
        s
    }

    pub fn n_s(&self) -> usize {
        self.beta_r.len()
    }

    /// Coefficient vector `q_l` with entries `beta e^{j theta}`.
    pub fn q(&self, side: Side) -> CVec {
        let (beta, theta) = match side {
            Side::Reflection => (&self.beta_r, &self.theta_r),
            Side::Transmission => (&self.beta_t, &self.theta_t),
        };
        CVec::from_fn(self.n_s(), |n, _| Complex64::from_polar(beta[n], theta[n]))
    }

    /// Lifted rank-one matrix `q_l q_l^H`.
    pub fn lifted(&self, side: Side) -> Hermitian {
        Hermitian::from_outer(&self.q(side))
    }

    /// Largest violation of the per-element energy-splitting equality.
    pub fn energy_split_residual(&self) -> f64 {
        (0..self.n_s())
            .map(|n| (self.beta_r[n] * self.beta_r[n] + self.beta_t[n] * self.beta_t[n] - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Rescale each per-element amplitude pair onto the unit circle. Pairs
    /// with zero magnitude fall back to the equal split.
    pub fn renormalize_energy_split(&mut self) {
        for n in 0..self.n_s() {
            let s = (self.beta_r[n] * self.beta_r[n] + self.beta_t[n] * self.beta_t[n]).sqrt();
            if s > 1e-12 {
                self.beta_r[n] /= s;
                self.beta_t[n] /= s;
            } else {
                self.beta_r[n] = std::f64::consts::FRAC_1_SQRT_2;
                self.beta_t[n] = std::f64::consts::FRAC_1_SQRT_2;
            }
        }
    }
}

/// Precoder solution: covariances always, vectors once recovered.
///
/// Index 0 is the common stream; indices `1..=K` are the private streams.
#[derive(Debug, Clone)]
pub struct BeamSolution {
    pub p: Vec<Hermitian>,
    pub w: Option<Vec<CVec>>,
    /// Common-rate shares `C_k` (bits/s/Hz), length `K`.
    pub c_alloc: Vec<f64>,
}

impl BeamSolution {
    pub fn zeros(n_t: usize, k: usize) -> Self {
        Self {
            p: vec![Hermitian::zeros(n_t); k + 1],
            w: Some(vec![CVec::zeros(n_t); k + 1]),
            c_alloc: vec![0.0; k],
        }
    }

    pub fn total_power(&self) -> f64 {
        match &self.w {
            Some(w) => w.iter().map(|v| v.norm_squared()).sum(),
            None => self.p.iter().map(|p| p.trace_re()).sum(),
        }
    }
}

/// Received powers `S[node][m]` for every stream `m` (0 = common).
#[derive(Debug, Clone)]
pub struct PowerTable {
    pub users: Vec<Vec<f64>>,
    pub eves: Vec<Vec<f64>>,
}

impl PowerTable {
    /// Vector-form table from precoder vectors.
    pub fn from_vectors(cs: &ChannelSet, star: &StarState, w: &[CVec]) -> Result<Self> {
        if star.n_s() != cs.n_s() {
            return Err(Error::Config(format!(
                "star state has {} elements, channels have {}",
                star.n_s(),
                cs.n_s()
            )));
        }
        let q_r = star.q(Side::Reflection);
        let q_t = star.q(Side::Transmission);
        let row = |link_vec: &CVec, side: Side, gamma: &crate::hermitian::CMat| -> CVec {
            let q = match side {
                Side::Reflection => &q_r,
                Side::Transmission => &q_t,
            };
            let _ = link_vec;
            // r^H = q^H Gamma, returned as the column vector r = Gamma^H q
            gamma.adjoint() * q
        };
        let mut users = Vec::with_capacity(cs.users.len());
        for (k, link) in cs.users.iter().enumerate() {
            let g = cs.gamma_user(k);
            let r = row(&link.vec, link.side, &g);
            users.push(
                w.iter()
                    .map(|wm| (r.adjoint() * wm)[(0, 0)].norm_sqr())
                    .collect(),
            );
        }
        let mut eves = Vec::with_capacity(cs.eves.len());
        for (j, link) in cs.eves.iter().enumerate() {
            let g = cs.gamma_eve(j);
            let r = row(&link.vec, link.side, &g);
            eves.push(
                w.iter()
                    .map(|wm| (r.adjoint() * wm)[(0, 0)].norm_sqr())
                    .collect(),
            );
        }
        Ok(Self { users, eves })
    }

    /// Trace-form table from covariances and (possibly relaxed) lifted
    /// phase matrices.
    pub fn from_covariances(
        cs: &ChannelSet,
        q_r: &Hermitian,
        q_t: &Hermitian,
        p: &[Hermitian],
    ) -> Result<Self> {
        if q_r.dim() != cs.n_s() || q_t.dim() != cs.n_s() {
            return Err(Error::Config("lifted phase matrix dimension mismatch".into()));
        }
        let mut users = Vec::with_capacity(cs.users.len());
        for (k, link) in cs.users.iter().enumerate() {
            let gamma = cs.gamma_user(k);
            let q = match link.side {
                Side::Reflection => q_r,
                Side::Transmission => q_t,
            };
            // G = Gamma^H Q Gamma is the per-user Gram matrix; each stream
            // power is Tr(G P_m)
            let g = gamma.adjoint() * q.mat() * &gamma;
            users.push(p.iter().map(|pm| re_trace_product(&g, pm.mat())).collect());
        }
        let mut eves = Vec::with_capacity(cs.eves.len());
        for (j, link) in cs.eves.iter().enumerate() {
            let gamma = cs.gamma_eve(j);
            let q = match link.side {
                Side::Reflection => q_r,
                Side::Transmission => q_t,
            };
            let g = gamma.adjoint() * q.mat() * &gamma;
            eves.push(p.iter().map(|pm| re_trace_product(&g, pm.mat())).collect());
        }
        Ok(Self { users, eves })
    }

    /// Dispatch on whether vectors are available.
    pub fn from_solution(cs: &ChannelSet, star: &StarState, bs: &BeamSolution) -> Result<Self> {
        match &bs.w {
            Some(w) => Self::from_vectors(cs, star, w),
            None => Self::from_covariances(
                cs,
                &star.lifted(Side::Reflection),
                &star.lifted(Side::Transmission),
                &bs.p,
            ),
        }
    }

    fn k(&self) -> usize {
        self.users.len()
    }

    /// `psi_k`: all private-stream powers at user `k` plus noise.
    pub fn psi(&self, k: usize, sigma2: f64) -> f64 {
        self.users[k][1..].iter().sum::<f64>() + sigma2
    }

    /// `phi_k`: `psi_k` minus user `k`'s own private power.
    pub fn phi(&self, k: usize, sigma2: f64) -> f64 {
        self.psi(k, sigma2) - self.users[k][k + 1]
    }

    pub fn gamma_c(&self, k: usize, sigma2: f64) -> f64 {
        self.users[k][0] / self.psi(k, sigma2)
    }

    pub fn gamma_p(&self, k: usize, sigma2: f64) -> f64 {
        self.users[k][k + 1] / self.phi(k, sigma2)
    }

    pub fn gamma_internal(&self, k: usize, i: usize, sigma2: f64) -> f64 {
        let interference: f64 = (0..self.k())
            .filter(|&kp| kp != k && kp != i)
            .map(|kp| self.users[k][kp + 1])
            .sum();
        self.users[k][i + 1] / (interference + sigma2)
    }

    pub fn gamma_eve_common(&self, j: usize, sigma2_e: f64) -> f64 {
        let denom: f64 = self.eves[j][1..].iter().sum::<f64>() + sigma2_e;
        self.eves[j][0] / denom
    }

    pub fn gamma_eve_private(&self, j: usize, k: usize, sigma2_e: f64) -> f64 {
        let total: f64 = self.eves[j].iter().sum();
        let denom = total - self.eves[j][k + 1] + sigma2_e;
        self.eves[j][k + 1] / denom
    }
}

/// Per-user SINRs of the common and private streams at user `k`.
pub fn sinr_user(
    cs: &ChannelSet,
    star: &StarState,
    bs: &BeamSolution,
    cfg: &SystemConfig,
    k: usize,
) -> Result<(f64, f64)> {
    if k >= cs.users.len() {
        return Err(Error::Config(format!("user index {k} out of range")));
    }
    let t = PowerTable::from_solution(cs, star, bs)?;
    Ok((t.gamma_c(k, cfg.sigma2), t.gamma_p(k, cfg.sigma2)))
}

/// SINR of user `i`'s private stream observed at user `k` after SIC.
pub fn sinr_internal(
    cs: &ChannelSet,
    star: &StarState,
    bs: &BeamSolution,
    cfg: &SystemConfig,
    k: usize,
    i: usize,
) -> Result<f64> {
    if k >= cs.users.len() || i >= cs.users.len() {
        return Err(Error::Config("user index out of range".into()));
    }
    if i == k {
        return Err(Error::Config(
            "internal-eavesdropping SINR requires i != k".into(),
        ));
    }
    let t = PowerTable::from_solution(cs, star, bs)?;
    Ok(t.gamma_internal(k, i, cfg.sigma2))
}

/// SINRs of the common stream and every private stream at eavesdropper `j`.
pub fn sinr_eve(
    cs: &ChannelSet,
    star: &StarState,
    bs: &BeamSolution,
    cfg: &SystemConfig,
    j: usize,
) -> Result<(f64, Vec<f64>)> {
    if j >= cs.eves.len() {
        return Err(Error::Config("eavesdropper index out of range".into()));
    }
    let t = PowerTable::from_solution(cs, star, bs)?;
    let common = t.gamma_eve_common(j, cfg.sigma2_e);
    let privates = (0..cs.users.len())
        .map(|k| t.gamma_eve_private(j, k, cfg.sigma2_e))
        .collect();
    Ok((common, privates))
}

/// Full rate and SINR report.
#[derive(Debug, Clone)]
pub struct RateReport {
    pub gamma_c: Vec<f64>,
    pub gamma_p: Vec<f64>,
    pub c_alloc: Vec<f64>,
    pub r_p: Vec<f64>,
    pub r_tot: Vec<f64>,
    pub r_c: f64,
    pub min_rate: f64,
    /// `gamma_internal[k][i]`, zero on the diagonal.
    pub gamma_internal: Vec<Vec<f64>>,
    pub gamma_eve_common: Vec<f64>,
    pub gamma_eve_private: Vec<Vec<f64>>,
    pub worst_residual: f64,
}

impl RateReport {
    /// Flat `key = value` block, one line per scalar.
    pub fn to_kv_block(&self) -> String {
        let mut out = String::new();
        let mut push = |k: String, v: f64| out.push_str(&format!("{k} = {v}\n"));
        push("min_rate".into(), self.min_rate);
        push("r_c".into(), self.r_c);
        push("worst_residual".into(), self.worst_residual);
        for (k, v) in self.r_tot.iter().enumerate() {
            push(format!("r_tot.{k}"), *v);
        }
        for (k, v) in self.c_alloc.iter().enumerate() {
            push(format!("c_alloc.{k}"), *v);
        }
        for (k, v) in self.r_p.iter().enumerate() {
            push(format!("r_p.{k}"), *v);
        }
        for (k, v) in self.gamma_c.iter().enumerate() {
            push(format!("gamma_c.{k}"), *v);
        }
        for (k, v) in self.gamma_p.iter().enumerate() {
            push(format!("gamma_p.{k}"), *v);
        }
        for (j, v) in self.gamma_eve_common.iter().enumerate() {
            push(format!("gamma_eve_common.{j}"), *v);
        }
        for (j, row) in self.gamma_eve_private.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                push(format!("gamma_eve_private.{j}.{k}"), *v);
            }
        }
        out
    }
}

fn log2p1(x: f64) -> f64 {
    (1.0 + x).log2()
}

fn report_from_table(
    t: &PowerTable,
    cfg: &SystemConfig,
    c_alloc_raw: &[f64],
    residual: f64,
) -> RateReport {
    let k_n = t.users.len();
    let gamma_c: Vec<f64> = (0..k_n).map(|k| t.gamma_c(k, cfg.sigma2)).collect();
    let gamma_p: Vec<f64> = (0..k_n).map(|k| t.gamma_p(k, cfg.sigma2)).collect();
    let r_c = gamma_c
        .iter()
        .map(|&g| log2p1(g))
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    // clip the requested allocation into the admissible common rate
    let mut c_alloc: Vec<f64> = c_alloc_raw.iter().map(|&c| c.max(0.0)).collect();
    let total: f64 = c_alloc.iter().sum();
    if total > r_c && total > 0.0 {
        let scale = r_c / total;
        for c in &mut c_alloc {
            *c *= scale;
        }
    }
    let r_p: Vec<f64> = gamma_p.iter().map(|&g| log2p1(g)).collect();
    let r_tot: Vec<f64> = r_p
        .iter()
        .zip(c_alloc.iter())
        .map(|(rp, c)| rp + c)
        .collect();
    let min_rate = r_tot.iter().copied().fold(f64::INFINITY, f64::min);
    let gamma_internal = (0..k_n)
        .map(|k| {
            (0..k_n)
                .map(|i| {
                    if i == k {
                        0.0
                    } else {
                        t.gamma_internal(k, i, cfg.sigma2)
                    }
                })
                .collect()
        })
        .collect();
    let gamma_eve_common = (0..t.eves.len())
        .map(|j| t.gamma_eve_common(j, cfg.sigma2_e))
        .collect();
    let gamma_eve_private = (0..t.eves.len())
        .map(|j| {
            (0..k_n)
                .map(|k| t.gamma_eve_private(j, k, cfg.sigma2_e))
                .collect()
        })
        .collect();
    RateReport {
        gamma_c,
        gamma_p,
        c_alloc,
        r_p,
        r_tot,
        r_c,
        min_rate,
        gamma_internal,
        gamma_eve_common,
        gamma_eve_private,
        worst_residual: residual,
    }
}

/// Rates from a beam solution (vector form when vectors are present).
pub fn rates(
    cs: &ChannelSet,
    star: &StarState,
    bs: &BeamSolution,
    cfg: &SystemConfig,
) -> Result<RateReport> {
    let t = PowerTable::from_solution(cs, star, bs)?;
    let residual = check_feasibility(cs, star, bs, cfg)?.worst;
    Ok(report_from_table(&t, cfg, &bs.c_alloc, residual))
}

/// Rates from relaxed covariance iterates with equal common-rate shares.
pub fn rates_cov(
    cs: &ChannelSet,
    q_r: &Hermitian,
    q_t: &Hermitian,
    p: &[Hermitian],
    cfg: &SystemConfig,
) -> Result<RateReport> {
    let t = PowerTable::from_covariances(cs, q_r, q_t, p)?;
    let k_n = t.users.len();
    let r_c = (0..k_n)
        .map(|k| log2p1(t.gamma_c(k, cfg.sigma2)))
        .fold(f64::INFINITY, f64::min)
        .max(0.0);
    let c_alloc: Vec<f64> = cfg.mu.iter().map(|&m| m * r_c).collect();
    Ok(report_from_table(&t, cfg, &c_alloc, f64::NAN))
}

/// Signed constraint residuals; every entry `<= tol` means feasible.
#[derive(Debug, Clone)]
pub struct ResidualReport {
    /// `sum_m ||w_m||^2 - P_max` (or trace form without vectors).
    pub power: f64,
    /// `max_n |beta_r^2 + beta_t^2 - 1|`.
    pub energy_split: f64,
    /// Largest violation of `0 <= beta <= 1`.
    pub amplitude: f64,
    /// `max_{k, i != k} gamma_{k->i} - r_0`.
    pub internal: f64,
    /// `max_{j,k} gamma^E_{k,j} - r_E`.
    pub eve_private: f64,
    /// `max_j gamma^E_{c,j} - r_E`.
    pub eve_common: f64,
    /// `max_k -C_k`.
    pub c_nonneg: f64,
    pub worst: f64,
}

impl ResidualReport {
    pub fn is_feasible(&self, tol: f64) -> bool {
        self.worst <= tol
    }

    /// Worst residual ignoring the secrecy constraints; used for schemes
    /// that deliberately drop them.
    pub fn worst_without_secrecy(&self) -> f64 {
        self.power
            .max(self.energy_split)
            .max(self.amplitude)
            .max(self.c_nonneg)
    }
}

/// Evaluate all constraint residuals of the original design problem.
pub fn check_feasibility(
    cs: &ChannelSet,
    star: &StarState,
    bs: &BeamSolution,
    cfg: &SystemConfig,
) -> Result<ResidualReport> {
    let t = PowerTable::from_solution(cs, star, bs)?;
    let k_n = cs.users.len();
    let power = bs.total_power() - cfg.p_max;
    let energy_split = star.energy_split_residual();
    let amplitude = star
        .beta_r
        .iter()
        .chain(star.beta_t.iter())
        .map(|&b| (b - 1.0).max(-b))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut internal = f64::NEG_INFINITY;
    for k in 0..k_n {
        for i in 0..k_n {
            if i != k {
                internal = internal.max(t.gamma_internal(k, i, cfg.sigma2) - cfg.r0);
            }
        }
    }
    let mut eve_private = f64::NEG_INFINITY;
    let mut eve_common = f64::NEG_INFINITY;
    for j in 0..cs.eves.len() {
        eve_common = eve_common.max(t.gamma_eve_common(j, cfg.sigma2_e) - cfg.r_e);
        for k in 0..k_n {
            eve_private = eve_private.max(t.gamma_eve_private(j, k, cfg.sigma2_e) - cfg.r_e);
        }
    }
    let c_nonneg = bs
        .c_alloc
        .iter()
        .map(|&c| -c)
        .fold(f64::NEG_INFINITY, f64::max);
    let worst = power
        .max(energy_split)
        .max(amplitude)
        .max(internal)
        .max(eve_private)
        .max(eve_common)
        .max(c_nonneg);
    Ok(ResidualReport {
        power,
        energy_split,
        amplitude,
        internal,
        eve_private,
        eve_common,
        c_nonneg,
        worst,
    })
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel;
    use crate::hermitian::CMat;
    use rand_distr::StandardNormal;

    fn desk_instance(seed: u64) -> (SystemConfig, ChannelSet) {
        let cfg = SystemConfig {
            seed,
            ..SystemConfig::desk()
        };
        let cs = channel::generate(&cfg).unwrap();
        (cfg, cs)
    }

    fn random_solution(cfg: &SystemConfig, seed: u64, power: f64) -> (StarState, BeamSolution) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let star = StarState::random(cfg.n_s, seed ^ 0x5151);
        let k = cfg.k();
        let per = (power / (k + 1) as f64).sqrt();
        let w: Vec<CVec> = (0..=k)
            .map(|_| {
                let mut v = CVec::from_fn(cfg.n_t, |_, _| {
                    Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                });
                let n = v.norm();
                v /= Complex64::new(n / per, 0.0);
                v
            })
            .collect();
        let p = w.iter().map(Hermitian::from_outer).collect();
        let bs = BeamSolution {
            p,
            w: Some(w),
            c_alloc: vec![0.1; k],
        };
        (star, bs)
    }

    #[test]
    fn zero_precoders_zero_sinr_and_feasible() {
        let (cfg, cs) = desk_instance(1);
        let star = StarState::uniform(cfg.n_s);
        let bs = BeamSolution::zeros(cfg.n_t, cfg.k());
        let t = PowerTable::from_solution(&cs, &star, &bs).unwrap();
        assert_eq!(t.gamma_c(0, cfg.sigma2), 0.0);
        assert_eq!(t.gamma_p(0, cfg.sigma2), 0.0);
        let rep = rates(&cs, &star, &bs, &cfg).unwrap();
        assert_eq!(rep.min_rate, 0.0);
        let res = check_feasibility(&cs, &star, &bs, &cfg).unwrap();
        assert!(res.is_feasible(TOL_FEAS), "residuals {res:?}");
    }

    #[test]
    fn single_link_closed_form() {
        // N_T = N_S = K = 1, H = [1], h = [1], beta_r = 1, theta = 0,
        // w_c = 0, w_1 = sqrt(P): gamma_p = P / sigma2
        let cfg = SystemConfig {
            n_t: 1,
            n_s: 1,
            k_r: 1,
            k_t: 0,
            j_r: 0,
            j_t: 0,
            mu: vec![1.0],
            ..SystemConfig::default()
        };
        let cs = ChannelSet {
            h_ts: CMat::from_element(1, 1, Complex64::new(1.0, 0.0)),
            pathloss_ts: 1.0,
            users: vec![channel::Link {
                vec: CVec::from_element(1, Complex64::new(1.0, 0.0)),
                side: Side::Reflection,
                dist: 1.0,
                pathloss: 1.0,
            }],
            eves: vec![],
        };
        let star = StarState {
            beta_r: vec![1.0],
            beta_t: vec![0.0],
            theta_r: vec![0.0],
            theta_t: vec![0.0],
        };
        let p_lin: f64 = 4.0;
        let w = vec![
            CVec::zeros(1),
            CVec::from_element(1, Complex64::new(p_lin.sqrt(), 0.0)),
        ];
        let bs = BeamSolution {
            p: w.iter().map(Hermitian::from_outer).collect(),
            w: Some(w),
            c_alloc: vec![0.0],
        };
        let t = PowerTable::from_solution(&cs, &star, &bs).unwrap();
        assert!((t.gamma_p(0, cfg.sigma2) - p_lin / cfg.sigma2).abs() < 1e-12);
    }

    #[test]
    fn trace_and_vector_forms_agree() {
        for seed in 0..20 {
            let (cfg, cs) = desk_instance(seed);
            let (star, bs) = random_solution(&cfg, seed, cfg.p_max);
            let tv = PowerTable::from_vectors(&cs, &star, bs.w.as_ref().unwrap()).unwrap();
            let tc = PowerTable::from_covariances(
                &cs,
                &star.lifted(Side::Reflection),
                &star.lifted(Side::Transmission),
                &bs.p,
            )
            .unwrap();
            for k in 0..cfg.k() {
                for m in 0..=cfg.k() {
                    let (a, b) = (tv.users[k][m], tc.users[k][m]);
                    assert!(
                        (a - b).abs() <= 1e-9 * a.abs().max(1e-12),
                        "seed {seed} user {k} stream {m}: {a} vs {b}"
                    );
                }
            }
            for j in 0..cfg.j() {
                for m in 0..=cfg.k() {
                    let (a, b) = (tv.eves[j][m], tc.eves[j][m]);
                    assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-12));
                }
            }
        }
    }

    #[test]
    fn psi_phi_identity() {
        for seed in 0..20 {
            let (cfg, cs) = desk_instance(100 + seed);
            let (star, bs) = random_solution(&cfg, seed, cfg.p_max);
            let t = PowerTable::from_solution(&cs, &star, &bs).unwrap();
            for k in 0..cfg.k() {
                let lhs = 1.0 + t.gamma_p(k, cfg.sigma2);
                let rhs = t.psi(k, cfg.sigma2) / t.phi(k, cfg.sigma2);
                assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs());
            }
        }
    }

    #[test]
    fn common_sinr_ignores_common_power_in_interference() {
        let (cfg, cs) = desk_instance(3);
        let (star, mut bs) = random_solution(&cfg, 3, cfg.p_max);
        let g_with = {
            let t = PowerTable::from_solution(&cs, &star, &bs).unwrap();
            (0..cfg.k()).map(|k| t.gamma_c(k, cfg.sigma2)).collect::<Vec<_>>()
        };
        // rescale the common precoder; denominators must not change
        if let Some(w) = bs.w.as_mut() {
            w[0] *= Complex64::new(3.0, 0.0);
        }
        bs.p[0] = Hermitian::from_outer(&bs.w.as_ref().unwrap()[0]);
        let t = PowerTable::from_solution(&cs, &star, &bs).unwrap();
        for k in 0..cfg.k() {
            let g = t.gamma_c(k, cfg.sigma2);
            assert!(
                ((g / 9.0) - g_with[k]).abs() <= 1e-9 * g_with[k].max(1e-12),
                "denominator must exclude the common stream"
            );
        }
    }

    #[test]
    fn internal_sinr_two_user_denominator_is_noise() {
        // K = 2: the interference sum over K \ {k, i} is empty
        let (cfg, cs) = desk_instance(4);
        let (star, bs) = random_solution(&cfg, 4, cfg.p_max);
        let t = PowerTable::from_solution(&cs, &star, &bs).unwrap();
        let direct = t.users[0][2] / cfg.sigma2;
        assert!((t.gamma_internal(0, 1, cfg.sigma2) - direct).abs() <= 1e-12 * direct.abs());
    }

    #[test]
    fn internal_sinr_rejects_self() {
        let (cfg, cs) = desk_instance(5);
        let (star, bs) = random_solution(&cfg, 5, cfg.p_max);
        assert!(sinr_internal(&cs, &star, &bs, &cfg, 0, 0).is_err());
        assert!(sinr_internal(&cs, &star, &bs, &cfg, 0, 1).is_ok());
    }

    #[test]
    fn eve_sinr_closed_form_without_common() {
        // w_c = 0 and a single private stream: gamma^E = |g^H Theta H w|^2 / sigma_E^2
        let cfg = SystemConfig {
            k_r: 1,
            k_t: 0,
            j_r: 1,
            j_t: 0,
            mu: vec![1.0],
            seed: 6,
            ..SystemConfig::desk()
        };
        let cs = channel::generate(&cfg).unwrap();
        let (star, mut bs) = random_solution(&cfg, 6, cfg.p_max);
        if let Some(w) = bs.w.as_mut() {
            w[0] = CVec::zeros(cfg.n_t);
        }
        bs.p[0] = Hermitian::zeros(cfg.n_t);
        let t = PowerTable::from_solution(&cs, &star, &bs).unwrap();
        let expect = t.eves[0][1] / cfg.sigma2_e;
        assert!((t.gamma_eve_private(0, 0, cfg.sigma2_e) - expect).abs() <= 1e-12 * expect.abs());
        let (gc, gp) = sinr_eve(&cs, &star, &bs, &cfg, 0).unwrap();
        assert_eq!(gc, 0.0);
        assert!((gp[0] - expect).abs() <= 1e-12 * expect.abs());
    }

    #[test]
    fn equal_allocation_reproduces_rc_over_k() {
        let (cfg, cs) = desk_instance(7);
        let (star, mut bs) = random_solution(&cfg, 7, cfg.p_max);
        // request equal shares of a generous budget; clipping lands on R_c/K
        bs.c_alloc = vec![1e6; cfg.k()];
        let rep = rates(&cs, &star, &bs, &cfg).unwrap();
        for k in 0..cfg.k() {
            assert!(
                (rep.c_alloc[k] - rep.r_c / cfg.k() as f64).abs() <= 1e-9,
                "C_k must clip to R_c / K"
            );
        }
    }

    #[test]
    fn min_rate_bounds_every_user() {
        let (cfg, cs) = desk_instance(8);
        let (star, bs) = random_solution(&cfg, 8, cfg.p_max);
        let rep = rates(&cs, &star, &bs, &cfg).unwrap();
        for &r in &rep.r_tot {
            assert!(rep.min_rate <= r + 1e-12);
        }
        assert!(rep.r_c <= rep.gamma_c.iter().map(|&g| (1.0 + g).log2()).fold(f64::INFINITY, f64::min) + 1e-9);
        let sum_c: f64 = rep.c_alloc.iter().sum();
        assert!(sum_c <= rep.r_c + 1e-9);
    }

    #[test]
    fn scaling_precoders_breaks_feasibility() {
        let (cfg, cs) = desk_instance(9);
        let (star, mut bs) = random_solution(&cfg, 9, cfg.p_max * 0.5);
        if let Some(w) = bs.w.as_mut() {
            for v in w.iter_mut() {
                *v *= Complex64::new(1e3, 0.0);
            }
        }
        bs.p = bs.w.as_ref().unwrap().iter().map(Hermitian::from_outer).collect();
        let res = check_feasibility(&cs, &star, &bs, &cfg).unwrap();
        assert!(
            res.power > 0.0 || res.eve_private > 0.0 || res.eve_common > 0.0,
            "scaled solution must violate power or secrecy: {res:?}"
        );
    }

    #[test]
    fn energy_split_residual_example() {
        let mut star = StarState::uniform(4);
        star.beta_r = vec![0.9; 4];
        star.beta_t = vec![0.9; 4];
        assert!((star.energy_split_residual() - 0.62).abs() < 1e-12);
    }

    #[test]
    fn renormalize_restores_energy_split() {
        let mut star = StarState::random(6, 11);
        star.beta_r[2] = 0.9;
        star.beta_t[2] = 0.9;
        star.renormalize_energy_split();
        assert!(star.energy_split_residual() < 1e-15);
    }
}
