//! CH non-locality test with displaced on/off detection, and key-rate bounds
//! derived from the CH value.
//!
//! Each party displaces its mode and records "no click" when the displaced
//! mode is found in vacuum, so the joint no-click probability for settings
//! `(alpha, beta)` is `<alpha, beta| rho |alpha, beta>`. The CH combination
//!
//! `Q(a1, b1) + Q(a1, b2) + Q(a2, b1) - Q(a2, b2) - Q(a1) - Q(b1)`
//!
//! is at most zero for local states; positive values witness non-locality.

use nalgebra::Complex;

use crate::entanglement::DensityMatrix;
use crate::error::{Error, Result};
use crate::num::{binary_entropy, Real};
use crate::optimize::{nelder_mead_max, NelderMeadOptions};

/// Largest normalisation deficit tolerated in a truncated coherent-state
/// expansion when the state itself is a truncation.
pub const COHERENT_DEFICIT_TOL: f64 = 1e-6;

/// Smallest Fock dimension whose coherent expansion at `|alpha| = amplitude`
/// leaves out less than [`COHERENT_DEFICIT_TOL`] of the norm.
pub fn required_fock_dim<T: Real>(amplitude: T) -> usize {
    let alpha = Complex::new(amplitude, T::zero());
    let mut dim = 1;
    while coherent_amplitudes(alpha, dim).1 > T::lit(COHERENT_DEFICIT_TOL) && dim < 1000 {
        dim += 1;
    }
    dim
}

/// `<n|alpha>` for `n < dim`, and the norm it leaves out.
pub fn coherent_amplitudes<T: Real>(alpha: Complex<T>, dim: usize) -> (Vec<Complex<T>>, T) {
    let mut out = Vec::with_capacity(dim);
    let mut c = Complex::new((-alpha.norm_sqr() / T::lit(2.0)).exp(), T::zero());
    let mut norm = T::zero();
    for n in 0..dim {
        if n > 0 {
            c = c * alpha / Complex::new(T::lit(n as f64).sqrt(), T::zero());
        }
        norm += c.norm_sqr();
        out.push(c);
    }
    (out, (T::one() - norm).max(T::zero()))
}

/// Truncated states carry their residual mass in mode 2 only; mode 1 is
/// exact at its dimension.
fn checked_amplitudes<T: Real>(
    rho: &DensityMatrix<T>,
    mode: usize,
    alpha: Complex<T>,
    dim: usize,
) -> Result<Vec<Complex<T>>> {
    let (amps, deficit) = coherent_amplitudes(alpha, dim);
    if mode == 2 && rho.residual() > T::zero() && deficit > T::lit(COHERENT_DEFICIT_TOL) {
        return Err(Error::FockTruncation {
            amplitude: alpha.norm_sqr().sqrt().as_f64(),
            deficit: deficit.as_f64(),
            dim,
        });
    }
    Ok(amps)
}

fn quadratic_form<T: Real>(m: &nalgebra::DMatrix<Complex<T>>, v: &[Complex<T>]) -> T {
    let mut acc = Complex::new(T::zero(), T::zero());
    for (i, vi) in v.iter().enumerate() {
        if vi.norm_sqr() == T::zero() {
            continue;
        }
        let mut row = Complex::new(T::zero(), T::zero());
        for (j, vj) in v.iter().enumerate() {
            row += m[(i, j)] * vj;
        }
        acc += vi.conj() * row;
    }
    acc.re.max(T::zero()).min(T::one())
}

fn joint_vector<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    a.iter()
        .flat_map(|&x| b.iter().map(move |&y| x * y))
        .collect()
}

/// Joint no-click probability `<alpha, beta| rho |alpha, beta>`.
pub fn no_click_probability<T: Real>(
    rho: &DensityMatrix<T>,
    alpha: Complex<T>,
    beta: Complex<T>,
) -> Result<T> {
    let (d1, d2) = rho.dims();
    let a = checked_amplitudes(rho, 1, alpha, d1)?;
    let b = checked_amplitudes(rho, 2, beta, d2)?;
    Ok(quadratic_form(rho.elements(), &joint_vector(&a, &b)))
}

/// Single-party no-click probability `<alpha| rho_mode |alpha>` for mode 1 or 2.
pub fn marginal_no_click_probability<T: Real>(
    rho: &DensityMatrix<T>,
    mode: usize,
    alpha: Complex<T>,
) -> Result<T> {
    let reduced = rho.reduced(mode)?;
    let a = checked_amplitudes(rho, mode, alpha, reduced.nrows())?;
    Ok(quadratic_form(&reduced, &a))
}

/// Displacement settings for the two parties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CHSettings<T> {
    pub alpha: [Complex<T>; 2],
    pub beta: [Complex<T>; 2],
    /// Scale of the settings grid used by [`optimize_settings`].
    pub s: T,
}

impl<T: Real> CHSettings<T> {
    pub fn new(alpha: [Complex<T>; 2], beta: [Complex<T>; 2]) -> Self {
        Self {
            alpha,
            beta,
            s: T::lit(0.5),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.alpha
            .iter()
            .chain(self.beta.iter())
            .all(|z| z.re.is_finite_value() && z.im.is_finite_value())
    }

    fn to_params(self) -> [T; 8] {
        let [a1, a2] = self.alpha;
        let [b1, b2] = self.beta;
        [a1.re, a1.im, a2.re, a2.im, b1.re, b1.im, b2.re, b2.im]
    }

    fn from_params(p: &[T], s: T) -> Self {
        let c = |i: usize| Complex::new(p[i], p[i + 1]);
        Self {
            alpha: [c(0), c(2)],
            beta: [c(4), c(6)],
            s,
        }
    }
}

/// The six no-click probabilities entering the CH combination.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CHProbabilities<T> {
    pub q11: T,
    pub q12: T,
    pub q21: T,
    pub q22: T,
    /// Mode-1 marginal at `alpha_1`.
    pub q_a1: T,
    /// Mode-2 marginal at `beta_1`.
    pub q_b1: T,
}

impl<T: Real> CHProbabilities<T> {
    pub fn combination(&self) -> T {
        self.q11 + self.q12 + self.q21 - self.q22 - self.q_a1 - self.q_b1
    }

    pub fn as_array(&self) -> [T; 6] {
        [self.q11, self.q12, self.q21, self.q22, self.q_a1, self.q_b1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CHResult<T> {
    pub ch_value: T,
    pub probabilities: CHProbabilities<T>,
    pub settings: CHSettings<T>,
}

/// CH combination for the given settings. Positive means violation.
pub fn ch_value<T: Real>(rho: &DensityMatrix<T>, settings: &CHSettings<T>) -> Result<CHResult<T>> {
    let [a1, a2] = settings.alpha;
    let [b1, b2] = settings.beta;
    let probabilities = CHProbabilities {
        q11: no_click_probability(rho, a1, b1)?,
        q12: no_click_probability(rho, a1, b2)?,
        q21: no_click_probability(rho, a2, b1)?,
        q22: no_click_probability(rho, a2, b2)?,
        q_a1: marginal_no_click_probability(rho, 1, a1)?,
        q_b1: marginal_no_click_probability(rho, 2, b1)?,
    };
    Ok(CHResult {
        ch_value: probabilities.combination(),
        probabilities,
        settings: *settings,
    })
}

/// Settings maximising the CH value for `rho`.
///
/// A grid with magnitudes `{s/2, s, 3s/2, 2s}` and four phases per amplitude
/// (the phase of `alpha_1` fixed at zero) is scanned from precomputed
/// probabilities, then the best few grid points are refined with
/// Nelder-Mead over all eight real parameters.
pub fn optimize_settings<T: Real>(rho: &DensityMatrix<T>, s: T) -> Result<CHResult<T>> {
    const STARTS: usize = 4;
    let (d1, d2) = rho.dims();
    let half_pi = T::FRAC_PI_2();
    let points: Vec<Complex<T>> = (1..=4)
        .flat_map(|m| {
            let mag = s * T::lit(m as f64) / T::lit(2.0);
            (0..4).map(move |p| {
                let phase = half_pi * T::lit(p as f64);
                Complex::new(mag * phase.cos(), mag * phase.sin())
            })
        })
        .collect();
    let np = points.len();

    let amps_a = points
        .iter()
        .map(|&z| checked_amplitudes(rho, 1, z, d1))
        .collect::<Result<Vec<_>>>()?;
    let amps_b = points
        .iter()
        .map(|&z| checked_amplitudes(rho, 2, z, d2))
        .collect::<Result<Vec<_>>>()?;
    let reduced_a = rho.reduced(1)?;
    let reduced_b = rho.reduced(2)?;
    let qa: Vec<T> = amps_a
        .iter()
        .map(|v| quadratic_form(&reduced_a, v))
        .collect();
    let qb: Vec<T> = amps_b
        .iter()
        .map(|v| quadratic_form(&reduced_b, v))
        .collect();
    let qj: Vec<Vec<T>> = amps_a
        .iter()
        .map(|a| {
            amps_b
                .iter()
                .map(|b| quadratic_form(rho.elements(), &joint_vector(a, b)))
                .collect()
        })
        .collect();

    let mut scored: Vec<(T, [usize; 4])> = Vec::new();
    for a1 in (0..np).step_by(4) {
        for a2 in 0..np {
            for b1 in 0..np {
                for b2 in 0..np {
                    let v = qj[a1][b1] + qj[a1][b2] + qj[a2][b1] - qj[a2][b2] - qa[a1] - qb[b1];
                    scored.push((v, [a1, a2, b1, b2]));
                }
            }
        }
    }
    scored.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));

    let objective = |p: &[T]| -> T {
        let settings = CHSettings::from_params(p, s);
        ch_value(rho, &settings)
            .map(|r| r.ch_value)
            .unwrap_or(-T::one())
    };
    let opts = NelderMeadOptions {
        initial_step: s / T::lit(4.0),
        max_evaluations: 3000,
        value_tolerance: T::lit(1e-13),
    };
    let mut best: Option<CHResult<T>> = None;
    for (_, [a1, a2, b1, b2]) in scored.iter().take(STARTS) {
        let start = CHSettings {
            alpha: [points[*a1], points[*a2]],
            beta: [points[*b1], points[*b2]],
            s,
        };
        let (p, _, _) = nelder_mead_max(objective, &start.to_params(), &opts);
        let candidate = ch_value(rho, &CHSettings::from_params(&p, s))?;
        let start_result = ch_value(rho, &start)?;
        let candidate = if candidate.ch_value >= start_result.ch_value {
            candidate
        } else {
            start_result
        };
        if best.is_none_or(|b| candidate.ch_value > b.ch_value) {
            best = Some(candidate);
        }
    }
    Ok(best.expect("grid is non-empty"))
}

/// A key-rate lower bound as a function of CH value and bit error.
pub trait KeyRateFunction<T: Real>: Sync {
    /// Raw bound in bits per signal; may be negative.
    fn raw_rate(&self, ch_value: T, bit_error: T) -> T;

    fn attack_model(&self) -> &str;
}

/// Nonlocal-fraction bound against a no-signalling individual attack.
///
/// The CH value maps to a CHSH value `S = 2 + 4 CH`. Any no-signalling
/// box with that `S` splits into a PR-box part of weight at least
/// `(S - 2)/2 = 2 CH` and a local part the eavesdropper can know in full.
/// Treating the local part as an erasure for Alice and Bob gives
/// `r = 2 CH - h(e)`.
///
/// This is the crate's shipped default and is not a transcription of any
/// particular published protocol's bound.
#[derive(Debug, Clone, Copy, Default)]
pub struct NonlocalFractionBound;

impl<T: Real> KeyRateFunction<T> for NonlocalFractionBound {
    fn raw_rate(&self, ch_value: T, bit_error: T) -> T {
        T::lit(2.0) * ch_value - binary_entropy(bit_error)
    }

    fn attack_model(&self) -> &str {
        "no-signalling individual attack, nonlocal-fraction bound"
    }
}

impl<T: Real, F> KeyRateFunction<T> for F
where
    F: Fn(T, T) -> T + Sync,
{
    fn raw_rate(&self, ch_value: T, bit_error: T) -> T {
        self(ch_value, bit_error)
    }

    fn attack_model(&self) -> &str {
        "custom"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyRateBound<T> {
    /// Bound as computed; negative when the CH test fails.
    pub raw: T,
    /// `max(raw, 0)`.
    pub rate: T,
    pub bit_error: T,
    pub attack_model: String,
}

pub fn key_rate_bound<T: Real, B: KeyRateFunction<T> + ?Sized>(
    ch: &CHResult<T>,
    bit_error: T,
    bound: &B,
) -> Result<KeyRateBound<T>> {
    if !(bit_error >= T::zero() && bit_error <= T::lit(0.5)) {
        return Err(Error::InvalidBitError(bit_error.as_f64()));
    }
    let raw = bound.raw_rate(ch.ch_value, bit_error);
    Ok(KeyRateBound {
        raw,
        rate: raw.max(T::zero()),
        bit_error,
        attack_model: bound.attack_model().to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entanglement::{direct_state, singlet_state};
    use crate::gaussian::Transmissivity;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn vacuum_never_clicks_at_zero_displacement() {
        let rho = DensityMatrix::<f64>::fock((2, 2), 0, 0).unwrap();
        assert_eq!(
            no_click_probability(&rho, c(0.0, 0.0), c(0.0, 0.0)).unwrap(),
            1.0
        );
    }

    #[test]
    fn singlet_has_no_vacuum_component() {
        let rho = singlet_state::<f64>();
        assert_eq!(
            no_click_probability(&rho, c(0.0, 0.0), c(0.0, 0.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn one_one_fock_overlap() {
        let rho = DensityMatrix::<f64>::fock((2, 2), 1, 1).unwrap();
        let q = no_click_probability(&rho, c(0.5, 0.0), c(0.5, 0.0)).unwrap();
        let expected = ((-0.25_f64).exp() * 0.25).powi(2);
        assert!((q - expected).abs() < 1e-15);
        assert!((q - 0.03791).abs() < 1e-5);
    }

    #[test]
    fn singlet_closed_form() {
        // Q(a, b) = e^{-|a|^2-|b|^2} |b - a|^2 / 2 for (|01> - |10>)/sqrt2.
        let rho = singlet_state::<f64>();
        let (a, b) = (c(0.3, -0.4), c(-0.2, 0.7));
        let q = no_click_probability(&rho, a, b).unwrap();
        let expected = (-a.norm_sqr() - b.norm_sqr()).exp() * (b - a).norm_sqr() / 2.0;
        assert!((q - expected).abs() < 1e-15);
        let qa = marginal_no_click_probability(&rho, 1, a).unwrap();
        assert!((qa - (-a.norm_sqr()).exp() * (1.0 + a.norm_sqr()) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn truncated_state_demands_enough_dimension() {
        let mut rho = DensityMatrix::<f64>::fock((2, 2), 0, 0).unwrap();
        assert!(no_click_probability(&rho, c(1.5, 0.0), c(0.0, 0.0)).is_ok());
        rho = DensityMatrix::from_parts_unchecked(rho.dims(), rho.elements().clone(), 1e-9);
        assert!(no_click_probability(&rho, c(1.5, 0.0), c(0.0, 0.0)).is_ok());
        assert!(matches!(
            no_click_probability(&rho, c(0.0, 0.0), c(1.5, 0.0)),
            Err(Error::FockTruncation { .. })
        ));
        assert!(marginal_no_click_probability(&rho, 2, c(1.5, 0.0)).is_err());
    }

    #[test]
    fn embedding_does_not_change_probabilities() {
        let rho = direct_state(Transmissivity::new(0.7).unwrap());
        let big = rho.embed((5, 6)).unwrap();
        let (a, b) = (c(0.8, 0.1), c(-0.3, 0.6));
        let q1 = no_click_probability(&rho, a, b).unwrap();
        let q2 = no_click_probability(&big, a, b).unwrap();
        assert!((q1 - q2).abs() < 1e-15);
    }

    #[test]
    fn product_states_obey_ch() {
        let settings = CHSettings::new([c(0.9, 0.0), c(-0.5, 0.3)], [c(0.2, -0.8), c(-0.4, -0.5)]);
        for (n1, n2) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let rho = DensityMatrix::<f64>::fock((2, 2), n1, n2).unwrap();
            assert!(ch_value(&rho, &settings).unwrap().ch_value <= 1e-9);
        }
    }

    #[test]
    fn singlet_violates_ch_after_optimisation() {
        let res = optimize_settings(&singlet_state::<f64>(), 0.5).unwrap();
        assert!(res.ch_value > 0.017, "{}", res.ch_value);
        let resum = res.probabilities.combination();
        assert!((resum - res.ch_value).abs() < 1e-15);
        assert!(res
            .probabilities
            .as_array()
            .iter()
            .all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn key_rate_threshold_and_monotonicity() {
        let rho = singlet_state::<f64>();
        let settings = CHSettings::new([c(0.0, 0.0); 2], [c(0.0, 0.0); 2]);
        let mut ch = ch_value(&rho, &settings).unwrap();
        let bound = NonlocalFractionBound;
        let mut prev = f64::NEG_INFINITY;
        for i in -20..=20 {
            ch.ch_value = i as f64 * 0.01;
            let k = key_rate_bound(&ch, 0.0, &bound).unwrap();
            assert!(k.raw >= prev);
            prev = k.raw;
            assert_eq!(k.rate > 0.0, ch.ch_value > 0.0);
            assert!(k.rate >= 0.0);
        }
        ch.ch_value = 0.05;
        let k = key_rate_bound(&ch, 0.02, &bound).unwrap();
        assert!((k.raw - (0.1 - binary_entropy(0.02))).abs() < 1e-15);
        assert!(key_rate_bound(&ch, 0.6, &bound).is_err());
        let custom = |ch: f64, _e: f64| ch - 0.01;
        assert_eq!(
            key_rate_bound(&ch, 0.0, &custom).unwrap().attack_model,
            "custom"
        );
    }
}
