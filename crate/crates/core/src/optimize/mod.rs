//! One-dimensional searches over protocol parameters.

mod search;
pub mod sweep;

pub use search::{golden_section_max, nelder_mead_max, NelderMeadOptions, Optimum};

use crate::entanglement::{direct_log_negativity, log_negativity_blocks, LogBase, LogNegativity};
use crate::error::{Error, Result};
use crate::gaussian::Transmissivity;
use crate::num::Real;
use crate::teleportation::{teleported_coefficients, ChannelConfig};

/// Teleported logarithmic negativity, block route.
pub fn teleported_log_negativity<T: Real>(
    cfg: &ChannelConfig<T>,
    tolerance: T,
    base: LogBase,
) -> Result<LogNegativity<T>> {
    let coeffs = teleported_coefficients(cfg, tolerance)?;
    Ok(log_negativity_blocks(&coeffs, base))
}

/// Options for [`optimal_gain`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSearchOptions<T> {
    pub g_min: T,
    pub g_max: T,
    /// Number of log-spaced coarse-grid points.
    pub grid_points: usize,
    /// Golden-section termination width in `g`.
    pub tolerance: T,
    /// Tail tolerance for the Fock cutoff.
    pub tail_tolerance: T,
}

impl<T: Real> Default for GainSearchOptions<T> {
    fn default() -> Self {
        Self {
            g_min: T::lit(0.05),
            g_max: T::lit(20.0),
            grid_points: 64,
            tolerance: T::lit(1e-6),
            tail_tolerance: T::lit(T::TAIL_TOLERANCE),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainSearchResult<T: Real> {
    /// `None` when the objective is identically zero over the bracket.
    pub g_opt: Option<T>,
    pub e_ln_max: LogNegativity<T>,
    /// Objective evaluations, coarse grid included.
    pub iterations: usize,
    /// Final golden-section bracket.
    pub bracket: (T, T),
    /// Grid points whose Fock cutoff could not be reached.
    pub skipped: usize,
}

impl<T: Real> GainSearchResult<T> {
    pub fn is_degenerate(&self) -> bool {
        self.g_opt.is_none()
    }
}

/// Gain maximising the teleported logarithmic negativity (base two).
///
/// Coarse log-spaced grid over `[g_min, g_max]`, then golden-section
/// refinement between the neighbours of the best grid point. The objective
/// is not known to be unimodal in `g`, hence the grid.
pub fn optimal_gain<T: Real>(
    r: T,
    t_a: T,
    t_b: T,
    opts: &GainSearchOptions<T>,
) -> Result<GainSearchResult<T>> {
    let base_cfg = ChannelConfig::new(r, t_a, t_b, T::one())?;
    if !(opts.g_min > T::zero() && opts.g_max > opts.g_min) || opts.grid_points < 3 {
        return Err(Error::InvalidBracket(
            opts.g_min.as_f64(),
            opts.g_max.as_f64(),
        ));
    }
    let objective = |g: T| -> Option<T> {
        let cfg = base_cfg.with_gain(g).ok()?;
        teleported_log_negativity(&cfg, opts.tail_tolerance, LogBase::Two)
            .ok()
            .map(|e| e.value)
    };

    let (lo, hi) = (opts.g_min.ln(), opts.g_max.ln());
    let n = opts.grid_points;
    let grid: Vec<T> = (0..n)
        .map(|i| (lo + (hi - lo) * T::lit(i as f64) / T::lit((n - 1) as f64)).exp())
        .collect();
    let values: Vec<Option<T>> = grid.iter().map(|&g| objective(g)).collect();
    let skipped = values.iter().filter(|v| v.is_none()).count();

    let best = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .fold(None::<(usize, T)>, |acc, (i, v)| match acc {
            Some((_, bv)) if bv >= v => acc,
            _ => Some((i, v)),
        });
    let degenerate = |iterations| GainSearchResult {
        g_opt: None,
        e_ln_max: LogNegativity {
            value: T::zero(),
            base: LogBase::Two,
        },
        iterations,
        bracket: (opts.g_min, opts.g_max),
        skipped,
    };
    let Some((i_best, v_best)) = best else {
        return Ok(degenerate(n));
    };
    if v_best <= T::zero() {
        return Ok(degenerate(n));
    }

    let a = grid[i_best.saturating_sub(1)];
    let b = grid[(i_best + 1).min(n - 1)];
    let refined = golden_section_max(|g| objective(g).unwrap_or(T::zero()), a, b, opts.tolerance);
    let (g_opt, e_max) = if refined.value >= v_best {
        (refined.x, refined.value)
    } else {
        (grid[i_best], v_best)
    };
    Ok(GainSearchResult {
        g_opt: Some(g_opt),
        e_ln_max: LogNegativity {
            value: e_max,
            base: LogBase::Two,
        },
        iterations: n + refined.evaluations,
        bracket: refined.bracket,
        skipped,
    })
}

/// Outcome of [`threshold_squeezing`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold<T> {
    Found {
        r_th: T,
        /// Final bisection interval.
        bracket: (T, T),
        iterations: usize,
    },
    /// `f` has the same sign at both ends of the bracket.
    NoSignChange { f_lo: T, f_hi: T },
}

impl<T: Real> Threshold<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Threshold::Found { r_th, .. } => Some(*r_th),
            Threshold::NoSignChange { .. } => None,
        }
    }
}

/// `E_tel(r, T, T, g = 1) - E_direct(T)`, base two.
pub fn teleport_advantage<T: Real>(t: Transmissivity<T>, r: T, tail_tolerance: T) -> Result<T> {
    let cfg = ChannelConfig::symmetric(r, t.value(), T::one())?;
    let tel = teleported_log_negativity(&cfg, tail_tolerance, LogBase::Two)?;
    Ok(tel.value - direct_log_negativity(t, LogBase::Two).value)
}

/// Squeezing at which teleported entanglement overtakes direct distribution,
/// by bisection on [`teleport_advantage`] to width `tol`.
pub fn threshold_squeezing<T: Real>(
    t: Transmissivity<T>,
    r_bracket: (T, T),
    tol: T,
) -> Result<Threshold<T>> {
    threshold_squeezing_with(t, r_bracket, tol, T::lit(T::TAIL_TOLERANCE))
}

pub fn threshold_squeezing_with<T: Real>(
    t: Transmissivity<T>,
    r_bracket: (T, T),
    tol: T,
    tail_tolerance: T,
) -> Result<Threshold<T>> {
    let (mut lo, mut hi) = r_bracket;
    if !(lo >= T::zero() && hi > lo) {
        return Err(Error::InvalidBracket(lo.as_f64(), hi.as_f64()));
    }
    if !tol.is_finite_value() || tol <= T::zero() {
        return Err(Error::InvalidTolerance(tol.as_f64()));
    }
    let f = |r: T| teleport_advantage(t, r, tail_tolerance);
    let (mut f_lo, f_hi) = (f(lo)?, f(hi)?);
    if f_lo == T::zero() {
        return Ok(Threshold::Found {
            r_th: lo,
            bracket: (lo, lo),
            iterations: 0,
        });
    }
    if f_hi == T::zero() {
        return Ok(Threshold::Found {
            r_th: hi,
            bracket: (hi, hi),
            iterations: 0,
        });
    }
    if (f_lo > T::zero()) == (f_hi > T::zero()) {
        return Ok(Threshold::NoSignChange { f_lo, f_hi });
    }
    let mut iterations = 0;
    while hi - lo > tol {
        let mid = (lo + hi) / T::lit(2.0);
        let f_mid = f(mid)?;
        iterations += 1;
        if f_mid == T::zero() {
            return Ok(Threshold::Found {
                r_th: mid,
                bracket: (mid, mid),
                iterations,
            });
        }
        if (f_mid > T::zero()) == (f_lo > T::zero()) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    Ok(Threshold::Found {
        r_th: (lo + hi) / T::lit(2.0),
        bracket: (lo, hi),
        iterations,
    })
}
