//! Scalar abstraction.
//!
//! Every routine in the crate is generic over [`Real`], implemented for `f32`
//! and `f64`. Per-type constants carry the numerical slack appropriate to the
//! precision so that thresholds never have to be hard-coded at call sites.

use std::fmt;

use nalgebra::RealField;
use num_traits::{FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar usable throughout the simulation.
pub trait Real:
    RealField
    + Copy
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Default trace mass allowed beyond the Fock cutoff.
    const TAIL_TOLERANCE: f64;
    /// Slack below the physical boundary `gamma = 1`.
    const GAMMA_SLACK: f64;
    /// Eigenvalues in `(-NOISE_FLOOR, 0)` are rounding noise.
    const NOISE_FLOOR: f64;
    /// Element-wise tolerance for Hermiticity and symmetry checks.
    const HERMITIAN_TOL: f64;

    /// Converts an `f64` literal. Panics only for values the type cannot
    /// represent at all, which never happens for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn is_finite_value(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f64 {
    const TAIL_TOLERANCE: f64 = 1e-12;
    const GAMMA_SLACK: f64 = 1e-12;
    const NOISE_FLOOR: f64 = 1e-10;
    const HERMITIAN_TOL: f64 = 1e-12;
}

impl Real for f32 {
    const TAIL_TOLERANCE: f64 = 1e-6;
    const GAMMA_SLACK: f64 = 1e-5;
    const NOISE_FLOOR: f64 = 1e-5;
    const HERMITIAN_TOL: f64 = 1e-6;
}

/// Binary entropy in bits; `h(0) = h(1) = 0`.
pub fn binary_entropy<T: Real>(p: T) -> T {
    let zero = T::zero();
    let one = T::one();
    if p <= zero || p >= one {
        return zero;
    }
    let q = one - p;
    -(p * p.log2() + q * q.log2())
}
