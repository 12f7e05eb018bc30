//! Two-mode Gaussian states in the `hbar = 1/2` quadrature convention.
//!
//! Quadratures are `x = (a + a^dag)/2` and `p = i(a^dag - a)/2`, so the vacuum
//! has variance 1/4 in each quadrature. Phase-space vectors are ordered
//! `(x_A, p_A, x_B, p_B)`.
//!
//! Two variance languages coexist in this domain. Covariance matrices hold
//! second moments directly. Isotropic Gaussian kernels
//! `G_sigma(x, p) = exp(-(x^2 + p^2)/sigma) / (pi sigma)` are instead labelled by
//! their exponent scale `sigma`, whose per-quadrature second moment is
//! `sigma / 2`. [`kernel_sigma_to_variance`] and [`variance_to_kernel_sigma`]
//! are the only conversions between the two. Every public function here takes
//! and returns covariance units, except where a value is explicitly typed as a
//! [`GaussianKernel`].

use nalgebra::{Matrix2, Matrix4, Matrix6, Vector2, Vector4, Vector6};

use crate::error::{Error, Result};
use crate::num::Real;

/// A single quadrature value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Quadrature<T>(pub T);

impl<T: Real> Quadrature<T> {
    /// Variance of either quadrature of the vacuum.
    pub fn vacuum_variance() -> T {
        T::lit(0.25)
    }
}

/// Power transmissivity of a pure-loss channel, `0 <= t <= 1`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Transmissivity<T>(T);

impl<T: Real> Transmissivity<T> {
    pub fn new(t: T) -> Result<Self> {
        if t.is_finite_value() && t >= T::zero() && t <= T::one() {
            Ok(Self(t))
        } else {
            Err(Error::TransmissivityOutOfRange(t.as_f64()))
        }
    }

    pub fn lossless() -> Self {
        Self(T::one())
    }

    /// Transmissivity of each arm of a symmetric link with the given total
    /// loss, where total loss is `-10 log10(T^2)` dB.
    pub fn from_total_loss_db(db: T) -> Result<Self> {
        Self::new(T::lit(10.0).powf(-db / T::lit(20.0)))
    }

    pub fn value(self) -> T {
        self.0
    }
}

/// Isotropic phase-space Gaussian `G_sigma`, labelled by its exponent scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernel<T> {
    sigma: T,
}

impl<T: Real> GaussianKernel<T> {
    pub fn new(sigma: T) -> Result<Self> {
        if sigma.is_finite_value() && sigma > T::zero() {
            Ok(Self { sigma })
        } else {
            Err(Error::NonPositiveKernel(sigma.as_f64()))
        }
    }

    /// Kernel whose convolution, followed by rescaling phase space by
    /// `sqrt(t)`, reproduces a pure-loss channel of transmissivity `t`.
    ///
    /// The covariance update `t V + (1 - t)/4` factors as
    /// `t (V + (1 - t)/(4t))`, i.e. a per-quadrature second moment of
    /// `(1 - t)/(4t)` and so `sigma = (1 - t)/(2t)`.
    pub fn for_loss(t: Transmissivity<T>) -> Result<Self> {
        let t = t.value();
        if t <= T::zero() || t >= T::one() {
            return Err(Error::KernelUndefined(t.as_f64()));
        }
        Self::new((T::one() - t) / (T::lit(2.0) * t))
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    /// Per-quadrature second moment.
    pub fn variance(&self) -> T {
        kernel_sigma_to_variance(self.sigma)
    }

    pub fn density(&self, x: T, p: T) -> T {
        (-(x * x + p * p) / self.sigma).exp() / (T::pi() * self.sigma)
    }
}

/// Exponent-scale `sigma` of a `G_sigma` kernel to per-quadrature variance.
pub fn kernel_sigma_to_variance<T: Real>(sigma: T) -> T {
    sigma / T::lit(2.0)
}

/// Per-quadrature variance to the exponent scale of the matching kernel.
pub fn variance_to_kernel_sigma<T: Real>(variance: T) -> T {
    variance * T::lit(2.0)
}

/// Single-mode Gaussian state, `(x, p)` ordering.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleModeGaussian<T: Real> {
    mean: Vector2<T>,
    cov: Matrix2<T>,
}

impl<T: Real> SingleModeGaussian<T> {
    pub fn new(mean: Vector2<T>, cov: Matrix2<T>) -> Result<Self> {
        check_symmetric(&cov)?;
        if cov.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        let nu = cov.determinant().sqrt();
        if nu < T::lit(0.25) * (T::one() - T::lit(T::HERMITIAN_TOL)) {
            return Err(Error::UncertaintyViolation(nu.as_f64()));
        }
        Ok(Self { mean, cov })
    }

    pub fn vacuum() -> Self {
        Self {
            mean: Vector2::zeros(),
            cov: Matrix2::identity() * Quadrature::<T>::vacuum_variance(),
        }
    }

    /// Coherent state with the given quadrature means.
    pub fn coherent(x: T, p: T) -> Self {
        Self {
            mean: Vector2::new(x, p),
            ..Self::vacuum()
        }
    }

    /// Thermal state with mean photon number `n`.
    pub fn thermal(n: T) -> Result<Self> {
        let v = (T::lit(2.0) * n + T::one()) / T::lit(4.0);
        Self::new(Vector2::zeros(), Matrix2::identity() * v)
    }

    /// Single-mode squeezed vacuum, `x` squeezed for `r > 0`.
    pub fn squeezed(r: T) -> Self {
        let q = Quadrature::<T>::vacuum_variance();
        let e = (T::lit(2.0) * r).exp();
        Self {
            mean: Vector2::zeros(),
            cov: Matrix2::new(q / e, T::zero(), T::zero(), q * e),
        }
    }

    pub fn mean(&self) -> &Vector2<T> {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix2<T> {
        &self.cov
    }
}

/// Two-mode Gaussian state: mean vector and covariance matrix.
///
/// Construction through [`GaussianTwoModeState::new`] checks symmetry,
/// positive definiteness and the uncertainty bound (both symplectic eigenvalues
/// at least 1/4).
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTwoModeState<T: Real> {
    mean: Vector4<T>,
    cov: Matrix4<T>,
}

impl<T: Real> GaussianTwoModeState<T> {
    pub fn new(mean: Vector4<T>, cov: Matrix4<T>) -> Result<Self> {
        check_symmetric(&cov)?;
        if cov.cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        let state = Self { mean, cov };
        let (nu_minus, _) = state.symplectic_eigenvalues();
        if nu_minus < T::lit(0.25) * (T::one() - T::lit(T::HERMITIAN_TOL).sqrt()) {
            return Err(Error::UncertaintyViolation(nu_minus.as_f64()));
        }
        Ok(state)
    }

    pub fn vacuum() -> Self {
        Self {
            mean: Vector4::zeros(),
            cov: Matrix4::identity() * Quadrature::<T>::vacuum_variance(),
        }
    }

    pub fn mean(&self) -> &Vector4<T> {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix4<T> {
        &self.cov
    }

    /// Covariance block of one mode (`0` for A, `1` for B).
    pub fn mode_block(&self, mode: usize) -> Matrix2<T> {
        let o = 2 * mode;
        self.cov.fixed_view::<2, 2>(o, o).into_owned()
    }

    /// Reduced single-mode state.
    pub fn marginal(&self, mode: usize) -> SingleModeGaussian<T> {
        let o = 2 * mode;
        SingleModeGaussian {
            mean: self.mean.fixed_rows::<2>(o).into_owned(),
            cov: self.mode_block(mode),
        }
    }

    /// Symplectic eigenvalues `(nu_-, nu_+)`.
    ///
    /// Uses the two-mode invariants `Delta = det A + det B + 2 det C` and
    /// `det V`: `nu_{+-}^2 = (Delta +- sqrt(Delta^2 - 4 det V)) / 2`.
    pub fn symplectic_eigenvalues(&self) -> (T, T) {
        let a = self.cov.fixed_view::<2, 2>(0, 0).determinant();
        let b = self.cov.fixed_view::<2, 2>(2, 2).determinant();
        let c = self.cov.fixed_view::<2, 2>(0, 2).determinant();
        let delta = a + b + T::lit(2.0) * c;
        let det = self.cov.determinant();
        let disc = (delta * delta - T::lit(4.0) * det).max(T::zero()).sqrt();
        let two = T::lit(2.0);
        let minus = ((delta - disc) / two).max(T::zero()).sqrt();
        let plus = ((delta + disc) / two).sqrt();
        (minus, plus)
    }

    /// Wigner function evaluated at a phase-space point.
    pub fn wigner(&self, point: &Vector4<T>) -> T {
        let d = point - self.mean;
        let inv = self
            .cov
            .try_inverse()
            .expect("validated covariance is invertible");
        let quad = (d.transpose() * inv * d)[(0, 0)];
        let norm = T::lit(4.0) * T::pi() * T::pi() * self.cov.determinant().sqrt();
        (-quad / T::lit(2.0)).exp() / norm
    }
}

fn check_symmetric<T: Real, const N: usize>(m: &nalgebra::SMatrix<T, N, N>) -> Result<()> {
    let asym = (m - m.transpose()).amax();
    let scale = m.amax().max(T::one());
    if asym > T::lit(T::HERMITIAN_TOL) * scale {
        return Err(Error::NotSymmetric(asym.as_f64()));
    }
    Ok(())
}

fn check_squeezing<T: Real>(r: T) -> Result<()> {
    if r.is_finite_value() && r >= T::zero() {
        Ok(())
    } else {
        Err(Error::NegativeSqueezing(r.as_f64()))
    }
}

/// Two-mode squeezed vacuum with squeezing `r`.
///
/// Diagonal `cosh(2r)/4`, `<x_A x_B> = +sinh(2r)/4`, `<p_A p_B> = -sinh(2r)/4`:
/// `x_A - x_B` and `p_A + p_B` are squeezed.
pub fn tmsv_state<T: Real>(r: T) -> Result<GaussianTwoModeState<T>> {
    check_squeezing(r)?;
    let two_r = T::lit(2.0) * r;
    let c = two_r.cosh() / T::lit(4.0);
    let s = two_r.sinh() / T::lit(4.0);
    let z = T::zero();
    #[rustfmt::skip]
    let cov = Matrix4::new(
        c,  z,  s,  z,
        z,  c,  z, -s,
        s,  z,  c,  z,
        z, -s,  z,  c,
    );
    Ok(GaussianTwoModeState {
        mean: Vector4::zeros(),
        cov,
    })
}

/// Independent pure-loss channels on both modes.
pub fn attenuate<T: Real>(
    state: &GaussianTwoModeState<T>,
    t_a: Transmissivity<T>,
    t_b: Transmissivity<T>,
) -> GaussianTwoModeState<T> {
    let (sa, sb) = (t_a.value().sqrt(), t_b.value().sqrt());
    let scale = Matrix4::from_diagonal(&Vector4::new(sa, sa, sb, sb));
    let vac = Quadrature::<T>::vacuum_variance();
    let na = (T::one() - t_a.value()) * vac;
    let nb = (T::one() - t_b.value()) * vac;
    let noise = Matrix4::from_diagonal(&Vector4::new(na, na, nb, nb));
    let cov = scale * state.cov * scale + noise;
    GaussianTwoModeState {
        mean: scale * state.mean,
        cov: symmetrize(cov),
    }
}

/// Pure loss on a single mode through the kernel picture: convolve that mode
/// with [`GaussianKernel::for_loss`], then rescale its phase space by
/// `sqrt(t)`. Must agree with [`attenuate`].
pub fn convolve_rescale<T: Real>(
    state: &GaussianTwoModeState<T>,
    mode: usize,
    t: Transmissivity<T>,
) -> Result<GaussianTwoModeState<T>> {
    assert!(mode < 2, "two-mode state has modes 0 and 1");
    if t.value() == T::one() {
        return Ok(state.clone());
    }
    let kernel = GaussianKernel::for_loss(t)?;
    let o = 2 * mode;

    // Convolution adds the kernel's second moment to the mode's diagonal.
    let mut cov = state.cov;
    cov[(o, o)] += kernel.variance();
    cov[(o + 1, o + 1)] += kernel.variance();

    let s = t.value().sqrt();
    let mut scale = Vector4::repeat(T::one());
    scale[o] = s;
    scale[o + 1] = s;
    let scale = Matrix4::from_diagonal(&scale);
    Ok(GaussianTwoModeState {
        mean: scale * state.mean,
        cov: symmetrize(scale * cov * scale),
    })
}

fn symmetrize<T: Real>(m: Matrix4<T>) -> Matrix4<T> {
    (m + m.transpose()) * T::lit(0.5)
}

/// Output of [`homodyne_teleport_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct TeleportOracle<T: Real> {
    /// State of Bob's mode after displacement, averaged over outcomes.
    pub output: SingleModeGaussian<T>,
    /// Conditional covariance of Bob's mode given the homodyne outcomes,
    /// before displacement.
    pub conditional_cov: Matrix2<T>,
    /// `V_out - g^2 V_in`, covariance units.
    pub added_noise: Matrix2<T>,
    /// Isotropic part of `added_noise` divided by `g^2`, expressed as the
    /// exponent scale of the equivalent input-referred kernel.
    pub sigma_tel: T,
}

/// Runs the full teleportation protocol in covariance algebra.
///
/// The input mode is mixed with mode A of `channel` on a 50:50 beam splitter
/// (`x_u = (x_in - x_A)/sqrt2`, `p_v = (p_in + p_A)/sqrt2`), Bob's mode is
/// conditioned on the `(x_u, p_v)` outcomes through a Schur complement, then
/// displaced by `g sqrt2 (x_u, p_v)` and averaged over outcomes. This is an
/// independent route to the closed-form teleportation noise in
/// [`crate::teleportation::sigma_tel`].
pub fn homodyne_teleport_oracle<T: Real>(
    input: &SingleModeGaussian<T>,
    channel: &GaussianTwoModeState<T>,
    gain: T,
) -> Result<TeleportOracle<T>> {
    if !(gain.is_finite_value() && gain > T::zero()) {
        return Err(Error::NonPositiveGain(gain.as_f64()));
    }
    let z = T::zero();

    // Joint (in, A, B) moments; the input is independent of the channel.
    let mut cov = Matrix6::<T>::zeros();
    cov.fixed_view_mut::<2, 2>(0, 0).copy_from(&input.cov);
    cov.fixed_view_mut::<4, 4>(2, 2).copy_from(&channel.cov);
    let mut mean = Vector6::<T>::zeros();
    mean.fixed_rows_mut::<2>(0).copy_from(&input.mean);
    mean.fixed_rows_mut::<4>(2).copy_from(&channel.mean);

    // Beam splitter to (x_u, p_u, x_v, p_v, x_B, p_B).
    let h = T::one() / T::lit(2.0).sqrt();
    let o = T::one();
    #[rustfmt::skip]
    let bs = Matrix6::new(
        h, z, -h,  z, z, z,
        z, h,  z, -h, z, z,
        h, z,  h,  z, z, z,
        z, h,  z,  h, z, z,
        z, z,  z,  z, o, z,
        z, z,  z,  z, z, o,
    );
    let cov = bs * cov * bs.transpose();
    let mean = bs * mean;

    // Measured quadratures x_u (0) and p_v (3); Bob's mode at 4, 5.
    const MEASURED: [usize; 2] = [0, 3];
    const BOB: [usize; 2] = [4, 5];
    let v_mm = Matrix2::from_fn(|i, j| cov[(MEASURED[i], MEASURED[j])]);
    let v_bm = Matrix2::from_fn(|i, j| cov[(BOB[i], MEASURED[j])]);
    let v_bb = Matrix2::from_fn(|i, j| cov[(BOB[i], BOB[j])]);
    let mu_m = Vector2::new(mean[MEASURED[0]], mean[MEASURED[1]]);
    let mu_b = Vector2::new(mean[BOB[0]], mean[BOB[1]]);

    let v_mm_inv = v_mm.try_inverse().ok_or(Error::SingularConditioning)?;
    let conditional_cov = v_bb - v_bm * v_mm_inv * v_bm.transpose();

    // Bob's output for outcome m is E[B | m] + G m with G = g sqrt2 I. Its
    // conditional mean is linear in m, so averaging over m ~ N(mu_m, V_mm)
    // adds K V_mm K^T with K = V_bm V_mm^-1 + G.
    let displacement = Matrix2::identity() * (gain * T::lit(2.0).sqrt());
    let k = v_bm * v_mm_inv + displacement;
    let out_cov = conditional_cov + k * v_mm * k.transpose();
    let out_cov = (out_cov + out_cov.transpose()) * T::lit(0.5);
    let out_mean = mu_b + displacement * mu_m;

    let g2 = gain * gain;
    let added_noise = out_cov - input.cov * g2;
    let isotropic = (added_noise[(0, 0)] + added_noise[(1, 1)]) / T::lit(2.0);
    Ok(TeleportOracle {
        output: SingleModeGaussian {
            mean: out_mean,
            cov: out_cov,
        },
        conditional_cov,
        added_noise,
        sigma_tel: variance_to_kernel_sigma(isotropic / g2),
    })
}
