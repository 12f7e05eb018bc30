//! Parameter sweeps: a declarative configuration, lexicographic grid
//! expansion, and parallel per-point evaluation with per-row errors.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::PathBuf;

use nalgebra::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::{
    direct_log_negativity, direct_state, log_negativity_blocks, log_negativity_generic,
    singlet_state, DensityMatrix, LogBase,
};
use crate::error::{Error, Result};
use crate::gaussian::{
    attenuate, homodyne_teleport_oracle, tmsv_state, SingleModeGaussian, Transmissivity,
};
use crate::num::Real;
use crate::optimize::{
    optimal_gain, teleport_advantage, threshold_squeezing_with, GainSearchOptions, Threshold,
};
use crate::qkd::{
    ch_value, key_rate_bound, optimize_settings, required_fock_dim, CHSettings,
    NonlocalFractionBound,
};
use crate::teleportation::{
    assemble_density_matrix, gamma, sigma_tel, teleported_coefficients,
    teleported_coefficients_with_cutoff, ChannelConfig, TeleportedCoefficients,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Sigma,
    Teleport,
    Direct,
    Compare,
    GainOpt,
    Threshold,
    Qkd,
}

impl Mode {
    pub const ALL: [Mode; 7] = [
        Mode::Sigma,
        Mode::Teleport,
        Mode::Direct,
        Mode::Compare,
        Mode::GainOpt,
        Mode::Threshold,
        Mode::Qkd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Sigma => "sigma",
            Mode::Teleport => "teleport",
            Mode::Direct => "direct",
            Mode::Compare => "compare",
            Mode::GainOpt => "gain-opt",
            Mode::Threshold => "threshold",
            Mode::Qkd => "qkd",
        }
    }

    fn needs_r(self) -> bool {
        !matches!(self, Mode::Direct | Mode::Threshold)
    }

    fn takes_gain(self) -> bool {
        matches!(
            self,
            Mode::Sigma | Mode::Teleport | Mode::Compare | Mode::Qkd
        )
    }

    /// Modes that accept distinct `t_a`, `t_b`.
    pub fn asymmetric(self) -> bool {
        matches!(self, Mode::Sigma | Mode::Teleport | Mode::GainOpt)
    }

    fn uses_fock(self) -> bool {
        matches!(self, Mode::Teleport | Mode::Compare | Mode::Qkd)
    }

    fn uses_ch(self) -> bool {
        matches!(self, Mode::Compare | Mode::Qkd)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Sweepable parameters, in grid-expansion order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Param {
    #[serde(rename = "r")]
    R,
    #[serde(rename = "t_a")]
    TA,
    #[serde(rename = "t_b")]
    TB,
    #[serde(rename = "t")]
    T,
    #[serde(rename = "loss_db")]
    LossDb,
    #[serde(rename = "g")]
    G,
}

impl Param {
    pub const ALL: [Param; 6] = [
        Param::R,
        Param::TA,
        Param::TB,
        Param::T,
        Param::LossDb,
        Param::G,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::R => "r",
            Param::TA => "t_a",
            Param::TB => "t_b",
            Param::T => "t",
            Param::LossDb => "loss_db",
            Param::G => "g",
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

/// Values taken by one swept parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Axis {
    List(Vec<f64>),
    Range {
        min: f64,
        max: f64,
        count: usize,
        #[serde(default)]
        spacing: Spacing,
    },
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>> {
        match *self {
            Axis::List(ref v) => {
                if v.is_empty() {
                    return Err(Error::Config("empty value list".into()));
                }
                if let Some(x) = v.iter().find(|x| !x.is_finite()) {
                    return Err(Error::Config(format!("non-finite grid value {x}")));
                }
                Ok(v.clone())
            }
            Axis::Range {
                min,
                max,
                count,
                spacing,
            } => {
                if !(min.is_finite() && max.is_finite()) {
                    return Err(Error::Config(format!("non-finite range {min}:{max}")));
                }
                if count == 0 {
                    return Err(Error::Config("range count must be >= 1".into()));
                }
                if count == 1 {
                    return Ok(vec![min]);
                }
                let n = (count - 1) as f64;
                match spacing {
                    Spacing::Linear => Ok((0..count)
                        .map(|i| {
                            if i == count - 1 {
                                max
                            } else {
                                min + (max - min) * i as f64 / n
                            }
                        })
                        .collect()),
                    Spacing::Log => {
                        if !(min > 0.0 && max > 0.0) {
                            return Err(Error::Config(format!(
                                "log spacing needs positive bounds, got {min}:{max}"
                            )));
                        }
                        let (a, b) = (min.ln(), max.ln());
                        Ok((0..count)
                            .map(|i| match i {
                                0 => min,
                                i if i == count - 1 => max,
                                i => (a + (b - a) * i as f64 / n).exp(),
                            })
                            .collect())
                    }
                }
            }
        }
    }
}

fn default_tolerance() -> f64 {
    1e-12
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// Fixed parameter values and evaluation options.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fixed {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_b: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
    #[serde(default)]
    pub base: LogBase,
    /// Tail mass left out of a Fock truncation.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Explicit Fock dimension of mode B'' in place of `tolerance`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fock_dim: Option<usize>,
    /// Cross-check every row against an independent route.
    #[serde(default, skip_serializing_if = "is_false")]
    pub check: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_tol: Option<f64>,
    /// Scale of the CH settings grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bit_error: Option<f64>,
}

impl Default for Fixed {
    fn default() -> Self {
        Self {
            r: None,
            t_a: None,
            t_b: None,
            t: None,
            loss_db: None,
            g: None,
            base: LogBase::Two,
            tolerance: default_tolerance(),
            fock_dim: None,
            check: false,
            r_min: None,
            r_max: None,
            r_tol: None,
            s: None,
            bit_error: None,
        }
    }
}

impl Fixed {
    pub fn get(&self, p: Param) -> Option<f64> {
        match p {
            Param::R => self.r,
            Param::TA => self.t_a,
            Param::TB => self.t_b,
            Param::T => self.t,
            Param::LossDb => self.loss_db,
            Param::G => self.g,
        }
    }

    pub fn set(&mut self, p: Param, v: Option<f64>) {
        let slot = match p {
            Param::R => &mut self.r,
            Param::TA => &mut self.t_a,
            Param::TB => &mut self.t_b,
            Param::T => &mut self.t,
            Param::LossDb => &mut self.loss_db,
            Param::G => &mut self.g,
        };
        *slot = v;
    }
}

/// Explicit CH settings as `[re, im]` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChSpec {
    pub alpha1: [f64; 2],
    pub alpha2: [f64; 2],
    pub beta1: [f64; 2],
    pub beta2: [f64; 2],
}

impl ChSpec {
    pub fn settings<T: Real>(&self) -> CHSettings<T> {
        let c = |z: [f64; 2]| Complex::new(T::lit(z[0]), T::lit(z[1]));
        CHSettings::new(
            [c(self.alpha1), c(self.alpha2)],
            [c(self.beta1), c(self.beta2)],
        )
    }

    pub fn from_settings<T: Real>(s: &CHSettings<T>) -> Self {
        let c = |z: Complex<T>| [z.re.as_f64(), z.im.as_f64()];
        Self {
            alpha1: c(s.alpha[0]),
            alpha2: c(s.alpha[1]),
            beta1: c(s.beta[0]),
            beta2: c(s.beta[1]),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
}

/// A complete sweep: what to compute, over which grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub mode: Mode,
    #[serde(default)]
    pub fixed: Fixed,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub grid: BTreeMap<Param, Axis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ch: Option<ChSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl SweepConfig {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            fixed: Fixed::default(),
            grid: BTreeMap::new(),
            ch: None,
            output: OutputSpec::default(),
        }
    }

    fn present(&self, p: Param) -> bool {
        self.fixed.get(p).is_some() || self.grid.contains_key(&p)
    }

    /// Checks the configuration is complete and consistent for its mode.
    pub fn validate(&self) -> Result<()> {
        let mode = self.mode;
        let err = |msg: String| Err(Error::Config(msg));
        for p in Param::ALL {
            if self.fixed.get(p).is_some() && self.grid.contains_key(&p) {
                return err(format!("parameter {p} is both fixed and gridded"));
            }
        }
        for (p, axis) in &self.grid {
            axis.values()
                .map_err(|e| Error::Config(format!("grid {p}: {e}")))?;
        }
        if mode.needs_r() && !self.present(Param::R) {
            return err(format!("{mode} requires r"));
        }
        if !mode.needs_r() && self.present(Param::R) {
            return err(format!("{mode} does not take r"));
        }
        if !mode.takes_gain() && self.present(Param::G) {
            return err(format!("{mode} does not take g"));
        }
        let (ta, tb) = (self.present(Param::TA), self.present(Param::TB));
        let channels = [
            ta || tb,
            self.present(Param::T),
            self.present(Param::LossDb),
        ]
        .iter()
        .filter(|&&b| b)
        .count();
        if channels != 1 {
            return err("specify exactly one of (t_a, t_b), t or loss_db".into());
        }
        if ta != tb {
            return err("t_a and t_b must be given together".into());
        }
        if ta && !mode.asymmetric() {
            return err(format!("{mode} takes a symmetric channel (t or loss_db)"));
        }
        let f = &self.fixed;
        if !(f.tolerance.is_finite() && f.tolerance > 0.0) {
            return err(format!("tolerance must be > 0, got {}", f.tolerance));
        }
        if f.fock_dim.is_some() && !mode.uses_fock() {
            return err(format!("{mode} does not take fock_dim"));
        }
        if let Some(d) = f.fock_dim {
            if d < 3 {
                return err(format!("fock_dim must be >= 3, got {d}"));
            }
        }
        if mode != Mode::Threshold && (f.r_min.is_some() || f.r_max.is_some() || f.r_tol.is_some())
        {
            return err(format!("{mode} does not take r_min, r_max or r_tol"));
        }
        if !mode.uses_ch() && (f.s.is_some() || f.bit_error.is_some() || self.ch.is_some()) {
            return err(format!("{mode} does not take CH settings, s or bit_error"));
        }
        if let Some(s) = f.s {
            if !(s.is_finite() && s > 0.0) {
                return err(format!("s must be > 0, got {s}"));
            }
        }
        if let Some(e) = f.bit_error {
            if !(0.0..=0.5).contains(&e) {
                return err(format!("bit_error must lie in [0, 0.5], got {e}"));
            }
        }
        if let Some(tol) = f.r_tol {
            if !(tol.is_finite() && tol > 0.0) {
                return err(format!("r_tol must be > 0, got {tol}"));
            }
        }
        Ok(())
    }

    /// Grid axes in expansion order; the last varies fastest.
    pub fn axes(&self) -> Result<Vec<(Param, Vec<f64>)>> {
        self.grid
            .iter()
            .map(|(&p, a)| Ok((p, a.values()?)))
            .collect()
    }

    pub fn point_count(&self) -> Result<usize> {
        Ok(self.axes()?.iter().map(|(_, v)| v.len()).product())
    }

    fn r_bracket(&self) -> (f64, f64) {
        (
            self.fixed.r_min.unwrap_or(0.0),
            self.fixed.r_max.unwrap_or(3.0),
        )
    }
}

/// One evaluated grid point. Fields a mode does not produce stay `None`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow<T> {
    pub index: usize,
    pub r: Option<T>,
    pub t_a: Option<T>,
    pub t_b: Option<T>,
    pub t: Option<T>,
    pub loss_db: Option<T>,
    pub g: Option<T>,
    pub sigma_tel: Option<T>,
    pub gamma: Option<T>,
    pub cutoff: Option<usize>,
    pub residual: Option<T>,
    pub e_ln_teleported: Option<T>,
    pub e_ln_direct: Option<T>,
    pub ratio: Option<T>,
    pub g_opt: Option<T>,
    pub g_target: Option<T>,
    pub e_ln_max: Option<T>,
    pub iterations: Option<usize>,
    pub r_th: Option<T>,
    pub ch_teleported: Option<T>,
    pub ch_direct: Option<T>,
    pub key_rate_teleported: Option<T>,
    pub key_rate_direct: Option<T>,
    pub check_deviation: Option<T>,
    pub note: Option<String>,
    pub error: Option<String>,
}

impl<T> SweepRow<T> {
    fn empty(index: usize) -> Self {
        Self {
            index,
            r: None,
            t_a: None,
            t_b: None,
            t: None,
            loss_db: None,
            g: None,
            sigma_tel: None,
            gamma: None,
            cutoff: None,
            residual: None,
            e_ln_teleported: None,
            e_ln_direct: None,
            ratio: None,
            g_opt: None,
            g_target: None,
            e_ln_max: None,
            iterations: None,
            r_th: None,
            ch_teleported: None,
            ch_direct: None,
            key_rate_teleported: None,
            key_rate_direct: None,
            check_deviation: None,
            note: None,
            error: None,
        }
    }
}

/// CH settings held fixed across a loss sweep, chosen on the lossless channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceSettings<T> {
    pub r: T,
    pub g: T,
    pub teleported: ChSpec,
    pub ch_teleported: T,
    pub direct: ChSpec,
    pub ch_direct: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult<T> {
    pub mode: Mode,
    pub base: LogBase,
    pub axes: Vec<(Param, Vec<f64>)>,
    pub rows: Vec<SweepRow<T>>,
    pub reference_settings: Vec<ReferenceSettings<T>>,
    /// Attack model of the key-rate bound, for modes that report one.
    pub attack_model: Option<String>,
}

impl<T: Real> SweepResult<T> {
    pub fn error_count(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    pub fn max_check_deviation(&self) -> Option<T> {
        self.rows
            .iter()
            .filter_map(|r| r.check_deviation)
            .fold(None, |acc, d| Some(acc.map_or(d, |a: T| a.max(d))))
    }
}

#[derive(Debug, Clone, Copy)]
enum Channel {
    Asymmetric(f64, f64),
    Transmissivity(f64),
    LossDb(f64),
}

#[derive(Debug, Clone, Copy)]
struct Point {
    index: usize,
    r: Option<f64>,
    g: Option<f64>,
    channel: Channel,
}

fn expand(cfg: &SweepConfig, axes: &[(Param, Vec<f64>)]) -> Vec<Point> {
    let total: usize = axes.iter().map(|(_, v)| v.len()).product();
    (0..total)
        .map(|index| {
            let mut values = cfg.fixed.clone();
            let mut rem = index;
            for (p, vals) in axes.iter().rev() {
                values.set(*p, Some(vals[rem % vals.len()]));
                rem /= vals.len();
            }
            let channel = match (values.t_a, values.t_b, values.t, values.loss_db) {
                (Some(a), Some(b), _, _) => Channel::Asymmetric(a, b),
                (_, _, Some(t), _) => Channel::Transmissivity(t),
                (_, _, _, Some(db)) => Channel::LossDb(db),
                _ => unreachable!("validated configuration has a channel"),
            };
            let g = if cfg.mode.takes_gain() {
                Some(values.g.unwrap_or(1.0))
            } else {
                None
            };
            Point {
                index,
                r: values.r,
                g,
                channel,
            }
        })
        .collect()
}

fn loss_db_of<T: Real>(t: T) -> T {
    -T::lit(20.0) * t.log10()
}

struct Ctx<'a, T: Real> {
    cfg: &'a SweepConfig,
    tolerance: T,
    base: LogBase,
    references: &'a References<T>,
    direct_settings: CHSettings<T>,
}

fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// Teleported state dense enough for CH evaluation at amplitudes up to `amp`.
fn teleported_state_for_ch<T: Real>(
    cfg: &ChannelConfig<T>,
    tolerance: T,
    fock_dim: Option<usize>,
    amp: T,
) -> Result<(TeleportedCoefficients<T>, DensityMatrix<T>)> {
    let coeffs = match fock_dim {
        Some(d) => teleported_coefficients_with_cutoff(cfg, d - 2)?,
        None => {
            let base = teleported_coefficients(cfg, tolerance)?;
            let need = required_fock_dim(amp).saturating_sub(2);
            if base.cutoff() >= need {
                base
            } else {
                teleported_coefficients_with_cutoff(cfg, need)?
            }
        }
    };
    let rho = assemble_density_matrix(&coeffs);
    Ok((coeffs, rho))
}

fn max_amplitude<T: Real>(s: &CHSettings<T>) -> T {
    s.alpha
        .iter()
        .chain(s.beta.iter())
        .map(|z| z.norm_sqr().sqrt())
        .fold(T::zero(), |a, b| a.max(b))
}

fn f64_key(r: f64, g: f64) -> (u64, u64) {
    (r.to_bits(), g.to_bits())
}

impl<T: Real> Ctx<'_, T> {
    fn symmetric_t(channel: Channel) -> Result<Transmissivity<T>> {
        match channel {
            Channel::Transmissivity(t) => Transmissivity::new(lit(t)),
            Channel::LossDb(db) => {
                if !(db >= 0.0 && db.is_finite()) {
                    return Err(Error::Config(format!(
                        "loss_db must be finite and >= 0, got {db}"
                    )));
                }
                Transmissivity::from_total_loss_db(lit(db))
            }
            Channel::Asymmetric(..) => unreachable!("symmetric mode with asymmetric channel"),
        }
    }

    fn fill_channel(row: &mut SweepRow<T>, p: &Point) {
        match p.channel {
            Channel::Asymmetric(a, b) => {
                row.t_a = Some(lit(a));
                row.t_b = Some(lit(b));
            }
            Channel::Transmissivity(t) => {
                row.t = Some(lit(t));
                row.loss_db = Some(loss_db_of(lit::<T>(t)));
            }
            Channel::LossDb(db) => {
                row.loss_db = Some(lit(db));
                row.t = Some(T::lit(10.0).powf(-lit::<T>(db) / lit(20.0)));
            }
        }
        row.r = p.r.map(lit);
        row.g = p.g.map(lit);
    }

    fn channel_config(p: &Point) -> Result<ChannelConfig<T>> {
        let r = lit(p.r.expect("mode requires r"));
        let g = lit(p.g.unwrap_or(1.0));
        match p.channel {
            Channel::Asymmetric(a, b) => ChannelConfig::new(r, lit(a), lit(b), g),
            c => ChannelConfig::symmetric(r, Self::symmetric_t(c)?.value(), g),
        }
    }

    fn evaluate(&self, p: &Point) -> SweepRow<T> {
        let mut row = SweepRow::empty(p.index);
        Self::fill_channel(&mut row, p);
        if let Err(e) = self.evaluate_into(p, &mut row) {
            row.error = Some(e.to_string());
        }
        row
    }

    fn evaluate_into(&self, p: &Point, row: &mut SweepRow<T>) -> Result<()> {
        let check = self.cfg.fixed.check;
        let fock_dim = self.cfg.fixed.fock_dim;
        let coefficients = |cfg: &ChannelConfig<T>| match fock_dim {
            Some(d) => teleported_coefficients_with_cutoff(cfg, d - 2),
            None => teleported_coefficients(cfg, self.tolerance),
        };
        match self.cfg.mode {
            Mode::Sigma => {
                let cfg = Self::channel_config(p)?;
                let s = sigma_tel(&cfg).value();
                row.sigma_tel = Some(s);
                row.gamma = Some(gamma(&cfg)?);
                if check {
                    let channel = attenuate(
                        &tmsv_state(cfg.r())?,
                        Transmissivity::new(cfg.t_a())?,
                        Transmissivity::new(cfg.t_b())?,
                    );
                    let oracle =
                        homodyne_teleport_oracle(&SingleModeGaussian::vacuum(), &channel, cfg.g())?;
                    row.check_deviation =
                        Some((oracle.sigma_tel - s).norm1() / s.max(T::lit(f64::MIN_POSITIVE)));
                }
            }
            Mode::Teleport => {
                let cfg = Self::channel_config(p)?;
                row.sigma_tel = Some(sigma_tel(&cfg).value());
                let co = coefficients(&cfg)?;
                row.gamma = Some(co.gamma());
                row.cutoff = Some(co.cutoff());
                row.residual = Some(co.residual());
                let e = log_negativity_blocks(&co, self.base).value;
                row.e_ln_teleported = Some(e);
                if check {
                    let g =
                        log_negativity_generic(&assemble_density_matrix(&co), 1, self.base)?.value;
                    row.check_deviation = Some((g - e).norm1());
                }
            }
            Mode::Direct => {
                let t = Self::symmetric_t(p.channel)?;
                let e = direct_log_negativity(t, self.base).value;
                row.e_ln_direct = Some(e);
                if check {
                    let g = log_negativity_generic(&direct_state(t), 1, self.base)?.value;
                    row.check_deviation = Some((g - e).norm1());
                }
            }
            Mode::Compare | Mode::Qkd => self.evaluate_ch(p, row)?,
            Mode::GainOpt => {
                let (r, ta, tb) = match p.channel {
                    Channel::Asymmetric(a, b) => (lit(p.r.expect("r")), lit(a), lit(b)),
                    c => {
                        let t = Self::symmetric_t(c)?.value();
                        (lit(p.r.expect("r")), t, t)
                    }
                };
                let opts = GainSearchOptions {
                    tail_tolerance: self.tolerance,
                    ..GainSearchOptions::default()
                };
                let res = optimal_gain(r, ta, tb, &opts)?;
                if ta > T::zero() {
                    row.g_target = Some((tb / ta).sqrt());
                }
                row.g_opt = res.g_opt;
                row.e_ln_max = Some(res.e_ln_max.to_base(self.base).value);
                row.iterations = Some(res.iterations);
                if res.is_degenerate() {
                    row.note = Some("no entanglement for any gain".into());
                }
                if check {
                    if let Some(g) = res.g_opt {
                        let cfg = ChannelConfig::new(r, ta, tb, g)?;
                        let co = teleported_coefficients(&cfg, self.tolerance)?;
                        let gen =
                            log_negativity_generic(&assemble_density_matrix(&co), 1, LogBase::Two)?
                                .value;
                        row.check_deviation = Some((gen - res.e_ln_max.value).norm1());
                    } else {
                        row.check_deviation = Some(T::zero());
                    }
                }
            }
            Mode::Threshold => {
                let t = Self::symmetric_t(p.channel)?;
                let (lo, hi) = self.cfg.r_bracket();
                let tol = lit(self.cfg.fixed.r_tol.unwrap_or(1e-6));
                match threshold_squeezing_with(t, (lit(lo), lit(hi)), tol, self.tolerance)? {
                    Threshold::Found {
                        r_th, iterations, ..
                    } => {
                        row.r_th = Some(r_th);
                        row.iterations = Some(iterations);
                        if check {
                            row.check_deviation =
                                Some(teleport_advantage(t, r_th, self.tolerance)?.norm1());
                        }
                    }
                    Threshold::NoSignChange { f_lo, f_hi } => {
                        row.note = Some(format!(
                            "no sign change on [{lo}, {hi}]: advantage {:.6e} .. {:.6e}",
                            f_lo.as_f64(),
                            f_hi.as_f64()
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn evaluate_ch(&self, p: &Point, row: &mut SweepRow<T>) -> Result<()> {
        let cfg = Self::channel_config(p)?;
        let t = Transmissivity::new(cfg.t_a())?;
        let reference = &self.references[&f64_key(p.r.expect("r"), p.g.unwrap_or(1.0))];
        let settings = reference.teleported.settings::<T>();
        let (co, rho) = teleported_state_for_ch(
            &cfg,
            self.tolerance,
            self.cfg.fixed.fock_dim,
            max_amplitude(&settings),
        )?;
        row.cutoff = Some(co.cutoff());
        row.residual = Some(co.residual());
        let e_tel = log_negativity_blocks(&co, self.base).value;
        let e_dir = direct_log_negativity(t, self.base).value;
        let ch_tel = ch_value(&rho, &settings)?.ch_value;
        let ch_dir = ch_value(&direct_state(t), &self.direct_settings)?.ch_value;
        let bit_error = lit(self.cfg.fixed.bit_error.unwrap_or(0.0));
        let bound = NonlocalFractionBound;
        let k_tel = key_rate_bound(&ch_value(&rho, &settings)?, bit_error, &bound)?;
        let k_dir = key_rate_bound(
            &ch_value(&direct_state(t), &self.direct_settings)?,
            bit_error,
            &bound,
        )?;
        row.e_ln_teleported = Some(e_tel);
        row.e_ln_direct = Some(e_dir);
        row.ratio = (e_dir > T::zero()).then(|| e_tel / e_dir);
        row.ch_teleported = Some(ch_tel);
        row.ch_direct = Some(ch_dir);
        row.key_rate_teleported = Some(k_tel.raw);
        row.key_rate_direct = Some(k_dir.raw);
        if self.cfg.fixed.check {
            let dev = match self.cfg.mode {
                Mode::Qkd => {
                    let wider = assemble_density_matrix(&teleported_coefficients_with_cutoff(
                        &cfg,
                        co.cutoff() + 10,
                    )?);
                    (ch_value(&wider, &settings)?.ch_value - ch_tel).norm1()
                }
                _ => {
                    let gen = log_negativity_generic(&rho, 1, self.base)?.value;
                    let gen_dir = log_negativity_generic(&direct_state(t), 1, self.base)?.value;
                    (gen - e_tel).norm1().max((gen_dir - e_dir).norm1())
                }
            };
            row.check_deviation = Some(dev);
        }
        Ok(())
    }
}

type References<T> = HashMap<(u64, u64), ReferenceSettings<T>>;

fn reference_settings<T: Real>(
    cfg: &SweepConfig,
    points: &[Point],
    tolerance: T,
) -> Result<(References<T>, CHSettings<T>)> {
    let s = lit(cfg.fixed.s.unwrap_or(0.5));
    let singlet = singlet_state::<T>();
    let direct = match cfg.ch {
        Some(spec) => ch_value(&singlet, &spec.settings())?,
        None => optimize_settings(&singlet, s)?,
    };
    let mut keys: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.r.expect("r"), p.g.unwrap_or(1.0)))
        .collect();
    keys.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    keys.dedup_by(|a, b| f64_key(a.0, a.1) == f64_key(b.0, b.1));
    let refs = keys
        .par_iter()
        .map(|&(r, g)| -> Result<_> {
            let channel = ChannelConfig::symmetric(lit(r), T::one(), lit(g))?;
            let teleported = match cfg.ch {
                Some(spec) => {
                    let settings = spec.settings::<T>();
                    let (_, rho) = teleported_state_for_ch(
                        &channel,
                        tolerance,
                        cfg.fixed.fock_dim,
                        max_amplitude(&settings),
                    )?;
                    ch_value(&rho, &settings)?
                }
                None => {
                    let (_, rho) = teleported_state_for_ch(
                        &channel,
                        tolerance,
                        cfg.fixed.fock_dim,
                        s * lit(3.0),
                    )?;
                    optimize_settings(&rho, s)?
                }
            };
            Ok((
                f64_key(r, g),
                ReferenceSettings {
                    r: lit(r),
                    g: lit(g),
                    teleported: ChSpec::from_settings(&teleported.settings),
                    ch_teleported: teleported.ch_value,
                    direct: ChSpec::from_settings(&direct.settings),
                    ch_direct: direct.ch_value,
                },
            ))
        })
        .collect::<Result<HashMap<_, _>>>()?;
    Ok((refs, direct.settings))
}

/// Validates `cfg`, expands its grid and evaluates every point.
///
/// Configuration problems are returned as `Err`; failures at individual
/// points land in the row's `error` field. Rows come back in grid order
/// regardless of the thread count.
pub fn run_sweep<T: Real>(cfg: &SweepConfig) -> Result<SweepResult<T>> {
    cfg.validate()?;
    let axes = cfg.axes()?;
    let points = expand(cfg, &axes);
    let tolerance = lit(cfg.fixed.tolerance);
    let (references, direct_settings) = if cfg.mode.uses_ch() {
        reference_settings::<T>(cfg, &points, tolerance)?
    } else {
        (
            HashMap::new(),
            CHSettings::new(
                [Complex::new(T::zero(), T::zero()); 2],
                [Complex::new(T::zero(), T::zero()); 2],
            ),
        )
    };
    let ctx = Ctx {
        cfg,
        tolerance,
        base: cfg.fixed.base,
        references: &references,
        direct_settings,
    };
    let rows: Vec<SweepRow<T>> = points.par_iter().map(|p| ctx.evaluate(p)).collect();
    let mut reference_settings: Vec<_> = references.into_values().collect();
    reference_settings.sort_by(|a, b| {
        (a.r, a.g)
            .partial_cmp(&(b.r, b.g))
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(SweepResult {
        mode: cfg.mode,
        base: cfg.fixed.base,
        axes,
        rows,
        reference_settings,
        attack_model: cfg.mode.uses_ch().then(|| {
            <NonlocalFractionBound as crate::qkd::KeyRateFunction<T>>::attack_model(
                &NonlocalFractionBound,
            )
            .to_string()
        }),
    })
}
