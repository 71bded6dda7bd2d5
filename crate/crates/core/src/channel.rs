//! Scenario geometry and seeded Rician channel synthesis.
//!
//! The STAR-RIS sits at the origin with its elements on a uniform linear
//! array along the y-axis. The x > 0 half-plane is the reflection region and
//! x < 0 the transmission region; the transmitter is placed in the
//! reflection half-plane at distance `d_ts` and bearing `angle_ts_deg` from
//! the x-axis. Users and eavesdroppers are placed uniformly at random on the
//! half-circle of radius `d` belonging to their side.
//!
//! Every link is Rician,
//! `sqrt(PL) * (sqrt(k/(1+k)) a_los + sqrt(1/(1+k)) a_nlos)`, with a
//! unit-modulus steering component and i.i.d. circularly-symmetric unit
//! Gaussian scattering. Path loss follows `pl0 * dist^-exp`. With
//! `normalize_pathloss` set (the default) each loss is expressed relative to
//! a fixed reference geometry (50 m for the feeder link, 80 m for the node
//! links) so received powers sit near unity and linear solver tolerances are
//! meaningful; the relative distance dependence is unchanged.
//!
//! Randomness is drawn from a counter-based generator with one dedicated
//! stream per link, so individual links can be regenerated in any order.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::hermitian::{CMat, CVec};

/// Reference distances fixing the path-loss normalization (feeder link and
/// user/eavesdropper links respectively).
pub const PL_REF_TS_M: f64 = 50.0;
pub const PL_REF_NODE_M: f64 = 80.0;

/// Side of the STAR-RIS a node lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Reflection,
    Transmission,
}

impl Side {
    pub fn tag(self) -> &'static str {
        match self {
            Side::Reflection => "r",
            Side::Transmission => "t",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "r" => Ok(Side::Reflection),
            "t" => Ok(Side::Transmission),
            _ => Err(Error::Config(format!("unknown side tag '{s}'"))),
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// All scalar system parameters.
///
/// Powers, variances and SINR thresholds are linear; the CLI layer converts
/// dB inputs before they get here.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// Transmit antennas.
    pub n_t: usize,
    /// STAR-RIS elements.
    pub n_s: usize,
    /// Users in the reflection / transmission region.
    pub k_r: usize,
    pub k_t: usize,
    /// External eavesdroppers in the reflection / transmission region.
    pub j_r: usize,
    pub j_t: usize,
    /// Transmit power budget (linear).
    pub p_max: f64,
    /// User noise variance (linear).
    pub sigma2: f64,
    /// Eavesdropper noise variance (linear).
    pub sigma2_e: f64,
    /// Internal decoding threshold (linear SINR).
    pub r0: f64,
    /// External decoding threshold (linear SINR).
    pub r_e: f64,
    /// Common-rate fractions, one per user, summing to 1.
    pub mu: Vec<f64>,
    /// User/eavesdropper distribution radius (m).
    pub d: f64,
    /// Transmitter distance from the STAR-RIS (m).
    pub d_ts: f64,
    /// Transmitter bearing from the x-axis (degrees).
    pub angle_ts_deg: f64,
    /// Rician factor (linear).
    pub rician_kappa: f64,
    /// Path-loss exponents: feeder link and node links.
    pub pathloss_exp_ts: f64,
    pub pathloss_exp_su: f64,
    /// Reference path loss at 1 m (linear).
    pub pl0: f64,
    /// Express path losses relative to the reference geometry (see module
    /// docs). Turn off for absolute `pl0 * d^-exp` values.
    pub normalize_pathloss: bool,
    /// Channel realization seed.
    pub seed: u64,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_t: 8,
            n_s: 20,
            k_r: 2,
            k_t: 2,
            j_r: 1,
            j_t: 1,
            p_max: 10.0,
            sigma2: 1.0,
            sigma2_e: 1.0,
            r0: 1.0,
            r_e: 1.0,
            mu: vec![0.25; 4],
            d: 80.0,
            d_ts: 50.0,
            angle_ts_deg: 20.0,
            rician_kappa: 3.0,
            pathloss_exp_ts: 2.2,
            pathloss_exp_su: 2.8,
            pl0: 1e-3,
            normalize_pathloss: true,
            seed: 0,
        }
    }
}

impl SystemConfig {
    /// Small configuration used throughout the test suite: 4 antennas,
    /// 8 elements, one user and one eavesdropper per side.
    pub fn desk() -> Self {
        Self {
            n_t: 4,
            n_s: 8,
            k_r: 1,
            k_t: 1,
            j_r: 1,
            j_t: 1,
            mu: vec![0.5; 2],
            ..Self::default()
        }
    }

    pub fn k(&self) -> usize {
        self.k_r + self.k_t
    }

    pub fn j(&self) -> usize {
        self.j_r + self.j_t
    }

    /// Set equal common-rate fractions `1/K` for the current user count.
    pub fn with_equal_mu(mut self) -> Self {
        let k = self.k();
        self.mu = vec![1.0 / k as f64; k];
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_t == 0 || self.n_s == 0 {
            return Err(Error::Config("antenna/element counts must be positive".into()));
        }
        if self.k() == 0 {
            return Err(Error::Config("at least one user is required".into()));
        }
        for (name, v) in [
            ("p_max", self.p_max),
            ("sigma2", self.sigma2),
            ("sigma2_e", self.sigma2_e),
            ("r0", self.r0),
            ("r_e", self.r_e),
            ("d", self.d),
            ("d_ts", self.d_ts),
            ("pl0", self.pl0),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.rician_kappa < 0.0 || !self.rician_kappa.is_finite() {
            return Err(Error::Config("rician_kappa must be nonnegative".into()));
        }
        if self.mu.len() != self.k() {
            return Err(Error::Config(format!(
                "mu has {} entries for {} users",
                self.mu.len(),
                self.k()
            )));
        }
        if self.mu.iter().any(|&m| !(m > 0.0) || m > 1.0) {
            return Err(Error::Config("each mu_k must lie in (0, 1]".into()));
        }
        let s: f64 = self.mu.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("mu must sum to 1, got {s}")));
        }
        Ok(())
    }

    /// Side of user `k` under the fixed ordering: reflection users first.
    pub fn user_side(&self, k: usize) -> Side {
        if k < self.k_r {
            Side::Reflection
        } else {
            Side::Transmission
        }
    }

    pub fn eve_side(&self, j: usize) -> Side {
        if j < self.j_r {
            Side::Reflection
        } else {
            Side::Transmission
        }
    }
}

/// Planar placement of every node.
#[derive(Debug, Clone)]
pub struct Geometry {
    /// Transmitter position.
    pub tx: [f64; 2],
    /// User positions and polar angles (from the x-axis).
    pub users: Vec<Placement>,
    pub eves: Vec<Placement>,
}

#[derive(Debug, Clone)]
pub struct Placement {
    pub pos: [f64; 2],
    pub angle: f64,
    pub side: Side,
    pub dist: f64,
}

/// One synthesized link.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    /// Channel vector from the STAR-RIS to the node (length `n_s`).
    pub vec: CVec,
    pub side: Side,
    pub dist: f64,
    pub pathloss: f64,
}

/// Realized channels for one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Transmitter to STAR-RIS matrix, `n_s x n_t`.
    pub h_ts: CMat,
    /// Feeder-link path loss.
    pub pathloss_ts: f64,
    pub users: Vec<Link>,
    pub eves: Vec<Link>,
}

impl ChannelSet {
    pub fn n_s(&self) -> usize {
        self.h_ts.nrows()
    }

    pub fn n_t(&self) -> usize {
        self.h_ts.ncols()
    }

    /// Cascaded-channel matrix `diag(h_k^H) H` for user `k`.
    pub fn gamma_user(&self, k: usize) -> CMat {
        Self::cascade(&self.users[k].vec, &self.h_ts)
    }

    /// Cascaded-channel matrix `diag(g_j^H) H` for eavesdropper `j`.
    pub fn gamma_eve(&self, j: usize) -> CMat {
        Self::cascade(&self.eves[j].vec, &self.h_ts)
    }

    fn cascade(v: &CVec, h: &CMat) -> CMat {
        let mut out = h.clone();
        for n in 0..h.nrows() {
            let c = v[n].conj();
            for m in 0..h.ncols() {
                out[(n, m)] *= c;
            }
        }
        out
    }
}

// stream ids for the per-link RNG
const STREAM_GEOMETRY: u64 = 0;
const STREAM_FEEDER: u64 = 1;
const STREAM_USER_BASE: u64 = 16;
const STREAM_EVE_BASE: u64 = 1 << 20;

fn link_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn pathloss(cfg: &SystemConfig, dist: f64, exp: f64, ref_dist: f64) -> f64 {
    if cfg.normalize_pathloss {
        (dist / ref_dist).powf(-exp)
    } else {
        cfg.pl0 * dist.powf(-exp)
    }
}

/// Half-wavelength ULA steering vector for a node at polar angle `angle`,
/// for an array along the y-axis.
fn steering(n: usize, angle: f64) -> CVec {
    CVec::from_fn(n, |i, _| {
        Complex64::from_polar(1.0, std::f64::consts::PI * i as f64 * angle.sin())
    })
}

/// Place the transmitter, users and eavesdroppers.
///
/// Deterministic for a fixed seed; users and eavesdroppers land on the
/// half-circle of radius `d` on their own side.
pub fn place_nodes(cfg: &SystemConfig) -> Result<Geometry> {
    cfg.validate()?;
    let mut rng = link_rng(cfg.seed, STREAM_GEOMETRY);
    let a_ts = cfg.angle_ts_deg.to_radians();
    let tx = [cfg.d_ts * a_ts.cos(), cfg.d_ts * a_ts.sin()];

    let mut draw = |side: Side| -> Placement {
        let u: f64 = rng.random();
        let angle = match side {
            // reflection: (-pi/2, pi/2); transmission: (pi/2, 3pi/2)
            Side::Reflection => (u - 0.5) * std::f64::consts::PI,
            Side::Transmission => (u + 0.5) * std::f64::consts::PI,
        };
        Placement {
            pos: [cfg.d * angle.cos(), cfg.d * angle.sin()],
            angle,
            side,
            dist: cfg.d,
        }
    };

    let mut users = Vec::with_capacity(cfg.k());
    for k in 0..cfg.k() {
        users.push(draw(cfg.user_side(k)));
    }
    let mut eves = Vec::with_capacity(cfg.j());
    for j in 0..cfg.j() {
        eves.push(draw(cfg.eve_side(j)));
    }
    Ok(Geometry { tx, users, eves })
}

fn rician_vector(rng: &mut ChaCha8Rng, pl: f64, kappa: f64, los: &CVec) -> CVec {
    let n = los.len();
    let c_los = (kappa / (1.0 + kappa)).sqrt();
    let c_nlos = (1.0 / (1.0 + kappa)).sqrt();
    let amp = pl.sqrt();
    CVec::from_fn(n, |i, _| {
        let scatter = Complex64::new(
            rng.sample::<f64, _>(StandardNormal),
            rng.sample::<f64, _>(StandardNormal),
        ) / Complex64::new(2.0_f64.sqrt(), 0.0);
        (los[i] * c_los + scatter * c_nlos) * amp
    })
}

/// Synthesize the full channel set for a configuration.
pub fn generate(cfg: &SystemConfig) -> Result<ChannelSet> {
    let geo = place_nodes(cfg)?;

    // feeder link: rank-one LoS from the steering vectors on both arrays
    let pl_ts = pathloss(cfg, cfg.d_ts, cfg.pathloss_exp_ts, PL_REF_TS_M);
    let a_rx = steering(cfg.n_s, cfg.angle_ts_deg.to_radians());
    let a_tx = steering(cfg.n_t, -cfg.angle_ts_deg.to_radians());
    let mut rng = link_rng(cfg.seed, STREAM_FEEDER);
    let c_los = (cfg.rician_kappa / (1.0 + cfg.rician_kappa)).sqrt();
    let c_nlos = (1.0 / (1.0 + cfg.rician_kappa)).sqrt();
    let amp = pl_ts.sqrt();
    let mut h_ts = CMat::zeros(cfg.n_s, cfg.n_t);
    for i in 0..cfg.n_s {
        for m in 0..cfg.n_t {
            let scatter = Complex64::new(
                rng.sample::<f64, _>(StandardNormal),
                rng.sample::<f64, _>(StandardNormal),
            ) / Complex64::new(2.0_f64.sqrt(), 0.0);
            h_ts[(i, m)] = (a_rx[i] * a_tx[m].conj() * c_los + scatter * c_nlos) * amp;
        }
    }

    let node_link = |placement: &Placement, stream: u64| -> Link {
        let pl = pathloss(cfg, placement.dist, cfg.pathloss_exp_su, PL_REF_NODE_M);
        let los = steering(cfg.n_s, placement.angle);
        let mut rng = link_rng(cfg.seed, stream);
        Link {
            vec: rician_vector(&mut rng, pl, cfg.rician_kappa, &los),
            side: placement.side,
            dist: placement.dist,
            pathloss: pl,
        }
    };

    let users = geo
        .users
        .iter()
        .enumerate()
        .map(|(k, p)| node_link(p, STREAM_USER_BASE + k as u64))
        .collect();
    let eves = geo
        .eves
        .iter()
        .enumerate()
        .map(|(j, p)| node_link(p, STREAM_EVE_BASE + j as u64))
        .collect();

    Ok(ChannelSet {
        h_ts,
        pathloss_ts: pl_ts,
        users,
        eves,
    })
}

// ---------------------------------------------------------------------------
// Config key/value mapping (shared by the config-file parser and the
// channel-set file header)
// ---------------------------------------------------------------------------

impl SystemConfig {
    /// Flat `key = value` lines covering every field.
    pub fn to_kv_lines(&self) -> Vec<String> {
        let mut out = vec![
            format!("n_t = {}", self.n_t),
            format!("n_s = {}", self.n_s),
            format!("k_r = {}", self.k_r),
            format!("k_t = {}", self.k_t),
            format!("j_r = {}", self.j_r),
            format!("j_t = {}", self.j_t),
            format!("p_max = {}", self.p_max),
            format!("sigma2 = {}", self.sigma2),
            format!("sigma2_e = {}", self.sigma2_e),
            format!("r0 = {}", self.r0),
            format!("r_e = {}", self.r_e),
            format!("d = {}", self.d),
            format!("d_ts = {}", self.d_ts),
            format!("angle_ts_deg = {}", self.angle_ts_deg),
            format!("rician_kappa = {}", self.rician_kappa),
            format!("pathloss_exp_ts = {}", self.pathloss_exp_ts),
            format!("pathloss_exp_su = {}", self.pathloss_exp_su),
            format!("pl0 = {}", self.pl0),
            format!("normalize_pathloss = {}", self.normalize_pathloss),
            format!("seed = {}", self.seed),
        ];
        let mu = self
            .mu
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(",");
        out.push(format!("mu = {mu}"));
        out
    }

    /// Apply one `key = value` pair. Linear-scale keys accept a `_db` suffix
    /// (`r_e_db = 0` sets `r_e = 1`), and `snr_db` sets `p_max` relative to
    /// `sigma2`. Returns false for unknown keys.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<bool> {
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        let parse_f = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("invalid number '{v}' for key '{key}'")))
        };
        let parse_u = |v: &str| -> Result<usize> {
            v.parse::<usize>()
                .map_err(|_| Error::Config(format!("invalid integer '{v}' for key '{key}'")))
        };
        let from_db = |db: f64| 10f64.powf(db / 10.0);
        match key.as_str() {
            "n_t" => self.n_t = parse_u(value)?,
            "n_s" => self.n_s = parse_u(value)?,
            "k_r" => self.k_r = parse_u(value)?,
            "k_t" => self.k_t = parse_u(value)?,
            "j_r" => self.j_r = parse_u(value)?,
            "j_t" => self.j_t = parse_u(value)?,
            "p_max" => self.p_max = parse_f(value)?,
            "p_max_db" => self.p_max = from_db(parse_f(value)?),
            "snr_db" => self.p_max = self.sigma2 * from_db(parse_f(value)?),
            "sigma2" => self.sigma2 = parse_f(value)?,
            "sigma2_db" => self.sigma2 = from_db(parse_f(value)?),
            "sigma2_e" => self.sigma2_e = parse_f(value)?,
            "sigma2_e_db" => self.sigma2_e = from_db(parse_f(value)?),
            "r0" => self.r0 = parse_f(value)?,
            "r0_db" => self.r0 = from_db(parse_f(value)?),
            "r_e" => self.r_e = parse_f(value)?,
            "r_e_db" => self.r_e = from_db(parse_f(value)?),
            "d" => self.d = parse_f(value)?,
            "d_ts" => self.d_ts = parse_f(value)?,
            "angle_ts_deg" => self.angle_ts_deg = parse_f(value)?,
            "rician_kappa" => self.rician_kappa = parse_f(value)?,
            "rician_kappa_db" => self.rician_kappa = from_db(parse_f(value)?),
            "pathloss_exp_ts" => self.pathloss_exp_ts = parse_f(value)?,
            "pathloss_exp_su" => self.pathloss_exp_su = parse_f(value)?,
            "pl0" => self.pl0 = parse_f(value)?,
            "normalize_pathloss" => {
                self.normalize_pathloss = value
                    .parse::<bool>()
                    .map_err(|_| Error::Config(format!("invalid bool '{value}'")))?
            }
            "seed" => {
                self.seed = value
                    .parse::<u64>()
                    .map_err(|_| Error::Config(format!("invalid seed '{value}'")))?
            }
            "mu" => {
                let mut mu = Vec::new();
                for part in value.split(',') {
                    mu.push(parse_f(part)?);
                }
                self.mu = mu;
            }
            _ => return Ok(false),
        }
        Ok(true)
    }
}

// ---------------------------------------------------------------------------
// Channel-set file format
// ---------------------------------------------------------------------------

fn write_cvec(w: &mut impl Write, v: &CVec) -> std::io::Result<()> {
    let parts: Vec<String> = v.iter().map(|z| format!("{},{}", z.re, z.im)).collect();
    writeln!(w, "{}", parts.join(" "))
}

fn parse_cvec(line: &str, expect: usize) -> Result<CVec> {
    let mut vals = Vec::new();
    for tok in line.split_whitespace() {
        let (re, im) = tok
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("bad complex entry '{tok}'")))?;
        let re: f64 = re
            .parse()
            .map_err(|_| Error::Config(format!("bad real part '{re}'")))?;
        let im: f64 = im
            .parse()
            .map_err(|_| Error::Config(format!("bad imaginary part '{im}'")))?;
        vals.push(Complex64::new(re, im));
    }
    if vals.len() != expect {
        return Err(Error::Config(format!(
            "expected {expect} complex entries, got {}",
            vals.len()
        )));
    }
    Ok(CVec::from_vec(vals))
}

/// Write a channel set to a replayable structured-text file.
///
/// Format: a `# star-rsma channelset v1` banner, the full configuration as
/// `cfg.<key> = <value>` lines, then one section per matrix/vector with
/// complex entries as `re,im` pairs separated by spaces.
pub fn save_channel_set(path: &Path, cfg: &SystemConfig, cs: &ChannelSet) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# star-rsma channelset v1")?;
    for line in cfg.to_kv_lines() {
        writeln!(f, "cfg.{line}")?;
    }
    writeln!(f, "[H] rows={} cols={} pathloss={}", cs.n_s(), cs.n_t(), cs.pathloss_ts)?;
    for r in 0..cs.n_s() {
        let row: CVec = cs.h_ts.row(r).transpose();
        write_cvec(&mut f, &row)?;
    }
    for (k, link) in cs.users.iter().enumerate() {
        writeln!(
            f,
            "[user] index={} side={} dist={} pathloss={}",
            k, link.side, link.dist, link.pathloss
        )?;
        write_cvec(&mut f, &link.vec)?;
    }
    for (j, link) in cs.eves.iter().enumerate() {
        writeln!(
            f,
            "[eve] index={} side={} dist={} pathloss={}",
            j, link.side, link.dist, link.pathloss
        )?;
        write_cvec(&mut f, &link.vec)?;
    }
    Ok(())
}

fn section_attr(line: &str, key: &str) -> Result<String> {
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix(&format!("{key}=")).map(str::to_string))
        .ok_or_else(|| Error::Config(format!("missing '{key}=' in section header '{line}'")))
}

/// Load a channel set saved by [`save_channel_set`].
pub fn load_channel_set(path: &Path) -> Result<(SystemConfig, ChannelSet)> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let banner = lines
        .next()
        .ok_or_else(|| Error::Config("empty channel-set file".into()))??;
    if !banner.starts_with("# star-rsma channelset v1") {
        return Err(Error::Config("missing channel-set banner".into()));
    }

    let mut cfg = SystemConfig::default();
    let mut h_ts: Option<CMat> = None;
    let mut pathloss_ts = 1.0;
    let mut users: Vec<Link> = Vec::new();
    let mut eves: Vec<Link> = Vec::new();

    let mut pending = lines.next().transpose()?;
    while let Some(line) = pending.take() {
        let line_trim = line.trim().to_string();
        if line_trim.is_empty() || line_trim.starts_with('#') {
            pending = lines.next().transpose()?;
            continue;
        }
        if let Some(rest) = line_trim.strip_prefix("cfg.") {
            let (k, v) = rest
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("bad cfg line '{line_trim}'")))?;
            if !cfg.apply_kv(k, v)? {
                return Err(Error::Config(format!("unknown cfg key '{k}'")));
            }
            pending = lines.next().transpose()?;
        } else if line_trim.starts_with("[H]") {
            let rows: usize = section_attr(&line_trim, "rows")?
                .parse()
                .map_err(|_| Error::Config("bad rows".into()))?;
            let cols: usize = section_attr(&line_trim, "cols")?
                .parse()
                .map_err(|_| Error::Config("bad cols".into()))?;
            pathloss_ts = section_attr(&line_trim, "pathloss")?
                .parse()
                .map_err(|_| Error::Config("bad pathloss".into()))?;
            let mut m = CMat::zeros(rows, cols);
            for r in 0..rows {
                let row_line = lines
                    .next()
                    .ok_or_else(|| Error::Config("truncated [H] section".into()))??;
                let row = parse_cvec(&row_line, cols)?;
                for c in 0..cols {
                    m[(r, c)] = row[c];
                }
            }
            h_ts = Some(m);
            pending = lines.next().transpose()?;
        } else if line_trim.starts_with("[user]") || line_trim.starts_with("[eve]") {
            let side = Side::parse(&section_attr(&line_trim, "side")?)?;
            let dist: f64 = section_attr(&line_trim, "dist")?
                .parse()
                .map_err(|_| Error::Config("bad dist".into()))?;
            let pl: f64 = section_attr(&line_trim, "pathloss")?
                .parse()
                .map_err(|_| Error::Config("bad pathloss".into()))?;
            let vec_line = lines
                .next()
                .ok_or_else(|| Error::Config("truncated link section".into()))??;
            let vec = parse_cvec(&vec_line, cfg.n_s)?;
            let link = Link {
                vec,
                side,
                dist,
                pathloss: pl,
            };
            if line_trim.starts_with("[user]") {
                users.push(link);
            } else {
                eves.push(link);
            }
            pending = lines.next().transpose()?;
        } else {
            return Err(Error::Config(format!("unrecognized line '{line_trim}'")));
        }
    }

    let h_ts = h_ts.ok_or_else(|| Error::Config("channel-set file has no [H] section".into()))?;
    if users.len() != cfg.k() || eves.len() != cfg.j() {
        return Err(Error::Config(format!(
            "link sections ({} users, {} eves) disagree with cfg ({}, {})",
            users.len(),
            eves.len(),
            cfg.k(),
            cfg.j()
        )));
    }
    Ok((
        cfg,
        ChannelSet {
            h_ts,
            pathloss_ts,
            users,
            eves,
        },
    ))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn placement_on_radius() {
        let cfg = SystemConfig {
            k_r: 1,
            k_t: 0,
            j_r: 0,
            j_t: 0,
            mu: vec![1.0],
            seed: 42,
            ..SystemConfig::default()
        };
        let geo = place_nodes(&cfg).unwrap();
        let p = &geo.users[0];
        let r = (p.pos[0] * p.pos[0] + p.pos[1] * p.pos[1]).sqrt();
        assert!((r - 80.0).abs() < 1e-9, "radius {r}");
    }

    #[test]
    fn placement_deterministic() {
        let cfg = SystemConfig::default();
        let a = place_nodes(&cfg).unwrap();
        let b = place_nodes(&cfg).unwrap();
        for (x, y) in a.users.iter().zip(b.users.iter()) {
            assert_eq!(x.pos, y.pos);
        }
    }

    #[test]
    fn placement_respects_sides() {
        for seed in 0..20 {
            let cfg = SystemConfig {
                seed,
                ..SystemConfig::default()
            };
            let geo = place_nodes(&cfg).unwrap();
            for p in geo.users.iter().chain(geo.eves.iter()) {
                match p.side {
                    Side::Reflection => assert!(p.pos[0] > 0.0, "seed {seed}"),
                    Side::Transmission => assert!(p.pos[0] < 0.0, "seed {seed}"),
                }
            }
        }
    }

    #[test]
    fn los_limit_unit_modulus() {
        let cfg = SystemConfig {
            rician_kappa: 1e9,
            ..SystemConfig::default()
        };
        let cs = generate(&cfg).unwrap();
        for link in cs.users.iter().chain(cs.eves.iter()) {
            let expect = link.pathloss.sqrt();
            for z in link.vec.iter() {
                assert!(
                    (z.norm() - expect).abs() <= 1e-3 * expect,
                    "entry modulus {} vs {expect}",
                    z.norm()
                );
            }
        }
    }

    #[test]
    fn rayleigh_power_normalization() {
        // kappa = 0: average ||h||^2 / n_s over many seeds approaches PL
        let mut acc = 0.0;
        let n_runs = 10_000;
        for seed in 0..n_runs {
            let cfg = SystemConfig {
                rician_kappa: 0.0,
                k_r: 1,
                k_t: 0,
                j_r: 0,
                j_t: 0,
                mu: vec![1.0],
                seed,
                ..SystemConfig::default()
            };
            let cs = generate(&cfg).unwrap();
            acc += cs.users[0].vec.norm_squared() / cfg.n_s as f64 / cs.users[0].pathloss;
        }
        let mean = acc / n_runs as f64;
        assert!((mean - 1.0).abs() < 0.02, "normalized power {mean}");
    }

    #[test]
    fn rician_power_split_sums_to_one() {
        // same invariant at kappa = 3
        let mut acc = 0.0;
        let n_runs = 4_000;
        for seed in 0..n_runs {
            let cfg = SystemConfig {
                k_r: 1,
                k_t: 0,
                j_r: 0,
                j_t: 0,
                mu: vec![1.0],
                seed,
                ..SystemConfig::default()
            };
            let cs = generate(&cfg).unwrap();
            acc += cs.users[0].vec.norm_squared() / cfg.n_s as f64 / cs.users[0].pathloss;
        }
        let mean = acc / n_runs as f64;
        assert!((mean - 1.0).abs() < 0.03, "normalized power {mean}");
    }

    #[test]
    fn generation_deterministic() {
        let cfg = SystemConfig::default();
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pathloss_decreases_with_distance() {
        let base = SystemConfig::default();
        let mut last = f64::INFINITY;
        for d in [40.0, 60.0, 80.0, 120.0, 200.0] {
            let pl = pathloss(&base, d, base.pathloss_exp_su, PL_REF_NODE_M);
            assert!(pl < last, "pathloss must strictly decrease");
            last = pl;
        }
    }

    #[test]
    fn channel_set_round_trip() {
        let cfg = SystemConfig {
            seed: 9,
            ..SystemConfig::desk()
        };
        let cs = generate(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("links.txt");
        save_channel_set(&path, &cfg, &cs).unwrap();
        let (cfg2, cs2) = load_channel_set(&path).unwrap();
        assert_eq!(cfg, cfg2);
        assert_eq!(cs.users.len(), cs2.users.len());
        assert!((&cs.h_ts - &cs2.h_ts).norm() < 1e-12);
        for (a, b) in cs.users.iter().zip(cs2.users.iter()) {
            assert!((&a.vec - &b.vec).norm() < 1e-12);
            assert_eq!(a.side, b.side);
        }
    }

    #[test]
    fn kv_round_trip_with_db_keys() {
        let mut cfg = SystemConfig::default();
        assert!(cfg.apply_kv("r_e_db", "3").unwrap());
        assert!((cfg.r_e - 10f64.powf(0.3)).abs() < 1e-12);
        assert!(cfg.apply_kv("snr_db", "10").unwrap());
        assert!((cfg.p_max - 10.0 * cfg.sigma2).abs() < 1e-12);
        assert!(!cfg.apply_kv("no_such_key", "1").unwrap());
    }

    #[test]
    fn validate_rejects_bad_mu() {
        let cfg = SystemConfig {
            mu: vec![0.3, 0.3],
            ..SystemConfig::desk()
        };
        assert!(cfg.validate().is_err());
    }
}
