//! Teleportation over an attenuated two-mode squeezed channel.
//!
//! The channel adds isotropic Gaussian noise to the input Wigner function and
//! rescales phase space by the gain `g`. [`sigma_tel`] gives that noise in
//! kernel units (see [`crate::gaussian`]). For a photon-number entangled input
//! `(|01> - |10>)/sqrt2` the teleported state decomposes into 2x2 blocks,
//! stored as [`TeleportedCoefficients`].

use nalgebra::{Complex, DMatrix};

use crate::entanglement::DensityMatrix;
use crate::error::{Error, Result};
use crate::gaussian::Transmissivity;
use crate::num::Real;

/// Hard ceiling on the Fock cutoff `K`.
pub const MAX_CUTOFF: usize = 10_000;

/// Full parameter point of the protocol.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig<T: Real> {
    r: T,
    t_a: Transmissivity<T>,
    t_b: Transmissivity<T>,
    g: T,
}

impl<T: Real> ChannelConfig<T> {
    pub fn new(r: T, t_a: T, t_b: T, g: T) -> Result<Self> {
        if !(r.is_finite_value() && r >= T::zero()) {
            return Err(Error::NegativeSqueezing(r.as_f64()));
        }
        if !(g.is_finite_value() && g > T::zero()) {
            return Err(Error::NonPositiveGain(g.as_f64()));
        }
        Ok(Self {
            r,
            t_a: Transmissivity::new(t_a)?,
            t_b: Transmissivity::new(t_b)?,
            g,
        })
    }

    /// Equal loss on both arms.
    pub fn symmetric(r: T, t: T, g: T) -> Result<Self> {
        Self::new(r, t, t, g)
    }

    pub fn with_gain(self, g: T) -> Result<Self> {
        Self::new(self.r, self.t_a.value(), self.t_b.value(), g)
    }

    pub fn r(&self) -> T {
        self.r
    }

    pub fn t_a(&self) -> T {
        self.t_a.value()
    }

    pub fn t_b(&self) -> T {
        self.t_b.value()
    }

    pub fn g(&self) -> T {
        self.g
    }

    /// Total link loss `-10 log10(T_A T_B)` in dB.
    pub fn total_loss_db(&self) -> T {
        -T::lit(10.0) * (self.t_a() * self.t_b()).log10()
    }
}

/// Teleportation noise in kernel units (`G_sigma` exponent scale).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SigmaTel<T>(pub T);

impl<T: Real> SigmaTel<T> {
    pub fn value(self) -> T {
        self.0
    }

    /// Per-quadrature added variance referred to the input, covariance units.
    pub fn variance(self) -> T {
        crate::gaussian::kernel_sigma_to_variance(self.0)
    }
}

/// Teleportation noise for arbitrary gain and asymmetric loss:
///
/// `[e^{2r}(g sqrt(T_A) - sqrt(T_B))^2 + e^{-2r}(g sqrt(T_A) + sqrt(T_B))^2
///   + 2 g^2 (1 - T_A) + 2 (1 - T_B)] / (4 g^2)`.
///
/// Symmetric loss at unit gain is routed to [`sigma_tel_symmetric_unity`].
pub fn sigma_tel<T: Real>(cfg: &ChannelConfig<T>) -> SigmaTel<T> {
    if cfg.t_a == cfg.t_b && cfg.g == T::one() {
        return sigma_tel_symmetric_unity(cfg.r, cfg.t_a);
    }
    sigma_tel_general(cfg)
}

/// The general closed form, without the symmetric fast path.
pub fn sigma_tel_general<T: Real>(cfg: &ChannelConfig<T>) -> SigmaTel<T> {
    let two = T::lit(2.0);
    let (ta, tb, g) = (cfg.t_a(), cfg.t_b(), cfg.g);
    let (sa, sb) = (ta.sqrt(), tb.sqrt());
    let up = (two * cfg.r).exp();
    let down = (-two * cfg.r).exp();
    let num = up * (g * sa - sb).powi(2)
        + down * (g * sa + sb).powi(2)
        + two * g * g * (T::one() - ta)
        + two * (T::one() - tb);
    SigmaTel(num / (T::lit(4.0) * g * g))
}

/// `T e^{-2r} + (1 - T)`, the closed form at `T_A = T_B = T` and `g = 1`.
pub fn sigma_tel_symmetric_unity<T: Real>(r: T, t: Transmissivity<T>) -> SigmaTel<T> {
    let t = t.value();
    SigmaTel(t * (-T::lit(2.0) * r).exp() + (T::one() - t))
}

/// `gamma = g^2 (2 sigma_tel + 1)`, validated to be at least 1 within slack.
pub fn gamma<T: Real>(cfg: &ChannelConfig<T>) -> Result<T> {
    let g = cfg.g * cfg.g * (T::lit(2.0) * sigma_tel(cfg).value() + T::one());
    if g < T::one() - T::lit(T::GAMMA_SLACK) {
        return Err(Error::GammaBelowOne { gamma: g.as_f64() });
    }
    Ok(g)
}

/// Block coefficients of the teleported photon-number entangled state.
///
/// Block `k` couples `|0>_C |k>` and `|1>_C |k+1>`:
/// `rho_k = a_k |0,k><0,k| - b_k (|1,k><0,k+1| + h.c.) + c_k |1,k+1><1,k+1|`.
/// Sequences are indexed `k = -1..=K` and stored with offset one, so index 0
/// holds `k = -1` where `a` and `b` vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct TeleportedCoefficients<T: Real> {
    a: Vec<T>,
    b: Vec<T>,
    c: Vec<T>,
    gamma: T,
    gain: T,
    cutoff: usize,
    residual: T,
}

impl<T: Real> TeleportedCoefficients<T> {
    /// Builds coefficients from raw sequences. Used for hand-made test states
    /// and by callers that already hold block data.
    pub fn from_parts(a: Vec<T>, b: Vec<T>, c: Vec<T>, residual: T) -> Result<Self> {
        let n = a.len();
        if n < 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                found: n,
            });
        }
        for v in [&b, &c] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        Ok(Self {
            a,
            b,
            c,
            gamma: T::one(),
            gain: T::one(),
            cutoff: n - 2,
            residual,
        })
    }

    fn at(v: &[T], k: isize) -> T {
        let i = k + 1;
        if i < 0 || i as usize >= v.len() {
            T::zero()
        } else {
            v[i as usize]
        }
    }

    pub fn a(&self, k: isize) -> T {
        Self::at(&self.a, k)
    }

    pub fn b(&self, k: isize) -> T {
        Self::at(&self.b, k)
    }

    pub fn c(&self, k: isize) -> T {
        Self::at(&self.c, k)
    }

    /// `(a_k, b_k, c_k)` for `k = -1..=K`.
    pub fn blocks(&self) -> impl Iterator<Item = (isize, T, T, T)> + '_ {
        (0..self.a.len()).map(move |i| (i as isize - 1, self.a[i], self.b[i], self.c[i]))
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn gain(&self) -> T {
        self.gain
    }

    /// Largest block index `K` retained.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    /// Trace mass of the blocks beyond `K`.
    pub fn residual(&self) -> T {
        self.residual
    }

    /// Retained trace `sum_k (a_k + c_k)`.
    pub fn trace(&self) -> T {
        self.a
            .iter()
            .chain(self.c.iter())
            .fold(T::zero(), |acc, &x| acc + x)
    }
}

/// Closed-form coefficient generator for a given `(gamma, g)`.
///
/// With `q = (gamma - 1)/(gamma + 1)` and `A = gamma - 2g^2 + 1`:
///
/// * `c_k = (1 - q) q^{k+1} / 2` for `k >= -1`,
/// * `a_0 = A (1 - q)^2 / 4`,
///   `a_k = (1 - q)^3 q^{k-1} [A (gamma - 1) + 4 k g^2] / 8` for `k >= 1`,
/// * `b_k = g sqrt(k + 1) q^k (1 - q)^2 / 2` for `k >= 0`.
///
/// The `k = 0` term of `a` is written with the `(gamma - 1)` factors already
/// cancelled so `gamma = 1` needs no special case.
#[derive(Debug, Clone, Copy)]
struct Generator<T> {
    gamma: T,
    g: T,
    q: T,
    big_a: T,
}

impl<T: Real> Generator<T> {
    fn new(gamma: T, g: T) -> Result<Self> {
        let slack = T::lit(T::GAMMA_SLACK);
        if gamma < T::one() - slack {
            return Err(Error::GammaBelowOne {
                gamma: gamma.as_f64(),
            });
        }
        let gamma = gamma.max(T::one());
        let mut big_a = gamma - T::lit(2.0) * g * g + T::one();
        if big_a < -slack * gamma {
            return Err(Error::UnphysicalChannel {
                gamma: gamma.as_f64(),
                gain: g.as_f64(),
            });
        }
        big_a = big_a.max(T::zero());
        let q = (gamma - T::one()) / (gamma + T::one());
        Ok(Self { gamma, g, q, big_a })
    }

    fn a(&self, k: isize) -> T {
        let one = T::one();
        let p = one - self.q;
        match k {
            k if k < 0 => T::zero(),
            0 => self.big_a * p * p / T::lit(4.0),
            k => {
                let kf = T::lit(k as f64);
                p.powi(3)
                    * self.q.powi(k as i32 - 1)
                    * (self.big_a * (self.gamma - one) + T::lit(4.0) * kf * self.g * self.g)
                    / T::lit(8.0)
            }
        }
    }

    fn b(&self, k: isize) -> T {
        if k < 0 {
            return T::zero();
        }
        let p = T::one() - self.q;
        self.g * T::lit((k + 1) as f64).sqrt() * self.q.powi(k as i32) * p * p / T::lit(2.0)
    }

    fn c(&self, k: isize) -> T {
        if k < -1 {
            return T::zero();
        }
        (T::one() - self.q) * self.q.powi((k + 1) as i32) / T::lit(2.0)
    }

    /// Closed-form `sum_{k > K} (a_k + c_k)`.
    fn tail(&self, cutoff: usize) -> T {
        let one = T::one();
        let (q, p) = (self.q, one - self.q);
        let m = T::lit((cutoff + 1) as f64);
        let g2 = self.g * self.g;
        let c_tail = q.powi(cutoff as i32 + 2) / T::lit(2.0);
        let a_tail = q.powi(cutoff as i32) * p / T::lit(8.0)
            * (p * (self.big_a * (self.gamma - one) + T::lit(4.0) * g2 * m) + T::lit(4.0) * g2 * q);
        a_tail + c_tail
    }
}

/// Coefficients with the smallest cutoff `K >= 1` whose closed-form tail mass
/// is below `tolerance`.
pub fn teleported_coefficients<T: Real>(
    cfg: &ChannelConfig<T>,
    tolerance: T,
) -> Result<TeleportedCoefficients<T>> {
    if !(tolerance.is_finite_value() && tolerance > T::zero()) {
        return Err(Error::InvalidTolerance(tolerance.as_f64()));
    }
    let gen = Generator::new(gamma(cfg)?, cfg.g)?;
    let mut cutoff = 1;
    while gen.tail(cutoff) >= tolerance {
        cutoff += 1;
        if cutoff > MAX_CUTOFF {
            return Err(Error::CutoffExceeded {
                max: MAX_CUTOFF,
                tolerance: tolerance.as_f64(),
                ratio: gen.q.as_f64(),
            });
        }
    }
    Ok(build(&gen, cutoff))
}

/// Coefficients truncated at an explicit cutoff `K`; the residual records
/// whatever mass that leaves out.
pub fn teleported_coefficients_with_cutoff<T: Real>(
    cfg: &ChannelConfig<T>,
    cutoff: usize,
) -> Result<TeleportedCoefficients<T>> {
    if cutoff > MAX_CUTOFF {
        return Err(Error::CutoffExceeded {
            max: MAX_CUTOFF,
            tolerance: 0.0,
            ratio: f64::NAN,
        });
    }
    let gen = Generator::new(gamma(cfg)?, cfg.g)?;
    Ok(build(&gen, cutoff))
}

fn build<T: Real>(gen: &Generator<T>, cutoff: usize) -> TeleportedCoefficients<T> {
    let ks = -1..=cutoff as isize;
    TeleportedCoefficients {
        a: ks.clone().map(|k| gen.a(k)).collect(),
        b: ks.clone().map(|k| gen.b(k)).collect(),
        c: ks.map(|k| gen.c(k)).collect(),
        gamma: gen.gamma,
        gain: gen.g,
        cutoff,
        residual: gen.tail(cutoff),
    }
}

/// Explicit density matrix of the teleported state on `C (dim 2) x B'' (dim
/// K + 2)`, row-major basis `|n_C, n_B>`.
pub fn assemble_density_matrix<T: Real>(coeffs: &TeleportedCoefficients<T>) -> DensityMatrix<T> {
    let d2 = coeffs.cutoff + 2;
    let idx = |nc: usize, nb: usize| nc * d2 + nb;
    let mut m = DMatrix::<Complex<T>>::zeros(2 * d2, 2 * d2);
    let re = |x: T| Complex::new(x, T::zero());
    for (k, a, b, c) in coeffs.blocks() {
        let kp1 = (k + 1) as usize;
        if k >= 0 {
            let k = k as usize;
            m[(idx(0, k), idx(0, k))] = re(a);
            m[(idx(1, k), idx(0, kp1))] = re(-b);
            m[(idx(0, kp1), idx(1, k))] = re(-b);
        }
        m[(idx(1, kp1), idx(1, kp1))] = re(c);
    }
    DensityMatrix::from_parts_unchecked((2, d2), m, coeffs.residual)
}
