//! Two-mode Fock density matrices and logarithmic negativity.

use nalgebra::{Complex, ComplexField, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::Transmissivity;
use crate::num::Real;
use crate::teleportation::TeleportedCoefficients;

/// Truncated two-mode density matrix in the product basis `|n_1, n_2>`,
/// row-major (`index = n_1 * d_2 + n_2`).
///
/// `residual` is the trace mass dropped by truncation; zero for states with
/// exact finite support.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix<T: Real> {
    dims: (usize, usize),
    elements: DMatrix<Complex<T>>,
    residual: T,
}

impl<T: Real> DensityMatrix<T> {
    /// Validated constructor: square matrix matching `dims`, Hermitian within
    /// tolerance.
    pub fn new(dims: (usize, usize), elements: DMatrix<Complex<T>>, residual: T) -> Result<Self> {
        let n = dims.0 * dims.1;
        if elements.nrows() != n || elements.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: elements.nrows().max(elements.ncols()),
            });
        }
        let rho = Self::from_parts_unchecked(dims, elements, residual);
        let dev = rho.hermitian_deviation();
        if dev > T::lit(T::HERMITIAN_TOL) {
            return Err(Error::NotHermitian(dev.as_f64()));
        }
        Ok(rho)
    }

    pub(crate) fn from_parts_unchecked(
        dims: (usize, usize),
        elements: DMatrix<Complex<T>>,
        residual: T,
    ) -> Self {
        Self {
            dims,
            elements,
            residual,
        }
    }

    /// Real symmetric matrix convenience constructor.
    pub fn from_real(dims: (usize, usize), elements: DMatrix<T>) -> Result<Self> {
        Self::new(
            dims,
            elements.map(|x| Complex::new(x, T::zero())),
            T::zero(),
        )
    }

    /// `|psi><psi|` for an amplitude vector in the product basis.
    pub fn pure(dims: (usize, usize), amplitudes: &[Complex<T>]) -> Result<Self> {
        let n = dims.0 * dims.1;
        if amplitudes.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: amplitudes.len(),
            });
        }
        let m = DMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj());
        Ok(Self::from_parts_unchecked(dims, m, T::zero()))
    }

    /// Product Fock state `|n_1, n_2><n_1, n_2|`.
    pub fn fock(dims: (usize, usize), n1: usize, n2: usize) -> Result<Self> {
        let mut amps = vec![Complex::new(T::zero(), T::zero()); dims.0 * dims.1];
        let i = n1 * dims.1 + n2;
        if n1 >= dims.0 || n2 >= dims.1 {
            return Err(Error::DimensionMismatch {
                expected: dims.0 * dims.1,
                found: i + 1,
            });
        }
        amps[i] = Complex::new(T::one(), T::zero());
        Self::pure(dims, &amps)
    }

    pub fn dims(&self) -> (usize, usize) {
        self.dims
    }

    pub fn elements(&self) -> &DMatrix<Complex<T>> {
        &self.elements
    }

    pub fn residual(&self) -> T {
        self.residual
    }

    /// `<n1 n2| rho |m1 m2>`.
    pub fn get(&self, n1: usize, n2: usize, m1: usize, m2: usize) -> Complex<T> {
        let d2 = self.dims.1;
        self.elements[(n1 * d2 + n2, m1 * d2 + m2)]
    }

    pub fn trace(&self) -> T {
        self.elements
            .diagonal()
            .iter()
            .fold(T::zero(), |acc, z| acc + z.re)
    }

    pub fn hermitian_deviation(&self) -> T {
        let m = &self.elements;
        let mut worst = T::zero();
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                let d = (m[(i, j)] - m[(j, i)].conj()).modulus();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<T> {
        hermitian_eigenvalues(self.elements.clone())
    }

    /// Partial transpose on mode 1 or 2.
    pub fn partial_transpose(&self, mode: usize) -> Result<DMatrix<Complex<T>>> {
        let (d1, d2) = self.dims;
        let n = d1 * d2;
        let swap_first = match mode {
            1 => true,
            2 => false,
            m => return Err(Error::InvalidMode(m)),
        };
        Ok(DMatrix::from_fn(n, n, |row, col| {
            let (n1, n2) = (row / d2, row % d2);
            let (m1, m2) = (col / d2, col % d2);
            if swap_first {
                self.get(m1, n2, n1, m2)
            } else {
                self.get(n1, m2, m1, n2)
            }
        }))
    }

    /// Reduced state of mode 1 or 2.
    pub fn reduced(&self, mode: usize) -> Result<DMatrix<Complex<T>>> {
        let (d1, d2) = self.dims;
        match mode {
            1 => Ok(DMatrix::from_fn(d1, d1, |i, j| {
                (0..d2).fold(Complex::new(T::zero(), T::zero()), |acc, k| {
                    acc + self.get(i, k, j, k)
                })
            })),
            2 => Ok(DMatrix::from_fn(d2, d2, |i, j| {
                (0..d1).fold(Complex::new(T::zero(), T::zero()), |acc, k| {
                    acc + self.get(k, i, k, j)
                })
            })),
            m => Err(Error::InvalidMode(m)),
        }
    }

    /// Same state in larger per-mode dimensions, padded with zeros.
    pub fn embed(&self, dims: (usize, usize)) -> Result<Self> {
        if dims.0 < self.dims.0 || dims.1 < self.dims.1 {
            return Err(Error::DimensionMismatch {
                expected: self.dims.0 * self.dims.1,
                found: dims.0 * dims.1,
            });
        }
        let (d1, d2) = self.dims;
        let mut m = DMatrix::zeros(dims.0 * dims.1, dims.0 * dims.1);
        for r in 0..d1 * d2 {
            for c in 0..d1 * d2 {
                let (rn1, rn2) = (r / d2, r % d2);
                let (cn1, cn2) = (c / d2, c % d2);
                m[(rn1 * dims.1 + rn2, cn1 * dims.1 + cn2)] = self.elements[(r, c)];
            }
        }
        Ok(Self::from_parts_unchecked(dims, m, self.residual))
    }

    /// Convex mixture `w * self + (1 - w) * other` of equally sized states.
    pub fn mix(&self, other: &Self, w: T) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims.0 * self.dims.1,
                found: other.dims.0 * other.dims.1,
            });
        }
        let wc = Complex::new(w, T::zero());
        let vc = Complex::new(T::one() - w, T::zero());
        Ok(Self::from_parts_unchecked(
            self.dims,
            self.elements.map(|z| z * wc) + other.elements.map(|z| z * vc),
            self.residual * w + other.residual * (T::one() - w),
        ))
    }
}

fn hermitian_eigenvalues<T: Real>(m: DMatrix<Complex<T>>) -> Vec<T> {
    let mut ev: Vec<T> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

/// Logarithm base for entanglement values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum LogBase {
    #[default]
    #[serde(rename = "2")]
    Two,
    #[serde(rename = "e")]
    Natural,
}

impl LogBase {
    pub fn log<T: Real>(self, x: T) -> T {
        match self {
            LogBase::Two => x.log2(),
            LogBase::Natural => x.ln(),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            LogBase::Two => "log2",
            LogBase::Natural => "ln",
        }
    }
}

impl std::str::FromStr for LogBase {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "2" | "two" => Ok(LogBase::Two),
            "e" | "natural" => Ok(LogBase::Natural),
            other => Err(format!("unknown log base {other:?} (expected 2 or e)")),
        }
    }
}

/// Logarithmic negativity with its base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNegativity<T> {
    pub value: T,
    pub base: LogBase,
}

impl<T: Real> LogNegativity<T> {
    fn from_trace_norm(norm: T, base: LogBase) -> Self {
        Self {
            value: base.log(norm).max(T::zero()),
            base,
        }
    }

    pub fn to_base(self, base: LogBase) -> Self {
        let ln2 = T::LN_2();
        let value = match (self.base, base) {
            (a, b) if a == b => self.value,
            (LogBase::Two, LogBase::Natural) => self.value * ln2,
            (LogBase::Natural, LogBase::Two) => self.value / ln2,
            _ => unreachable!(),
        };
        Self { value, base }
    }
}

/// Negative part `|lambda| - lambda` of an eigenvalue with rounding noise
/// above `-NOISE_FLOOR` treated as zero.
fn negative_part<T: Real>(lambda: T) -> T {
    if lambda > -T::lit(T::NOISE_FLOOR) {
        T::zero()
    } else {
        -T::lit(2.0) * lambda
    }
}

/// Logarithmic negativity from the 2x2 block structure:
/// `log[1 + sum_k (|lambda_k^-| - lambda_k^-)]` with
/// `lambda_k^- = [a_k + c_k - sqrt((a_k - c_k)^2 + 4 b_k^2)] / 2`.
pub fn log_negativity_blocks<T: Real>(
    coeffs: &TeleportedCoefficients<T>,
    base: LogBase,
) -> LogNegativity<T> {
    let two = T::lit(2.0);
    let neg = coeffs.blocks().fold(T::zero(), |acc, (_, a, b, c)| {
        let disc = ((a - c) * (a - c) + T::lit(4.0) * b * b).sqrt();
        acc + negative_part((a + c - disc) / two)
    });
    LogNegativity::from_trace_norm(T::one() + neg, base)
}

/// Logarithmic negativity through the eigenvalues of the partial transpose.
///
/// The trace norm is divided by `Tr(rho)` so truncated states are treated as
/// their normalised counterparts.
pub fn log_negativity_generic<T: Real>(
    rho: &DensityMatrix<T>,
    transpose_mode: usize,
    base: LogBase,
) -> Result<LogNegativity<T>> {
    let dev = rho.hermitian_deviation();
    if dev > T::lit(T::HERMITIAN_TOL) {
        return Err(Error::NotHermitian(dev.as_f64()));
    }
    let pt = rho.partial_transpose(transpose_mode)?;
    let ev = hermitian_eigenvalues(pt);
    let trace = ev.iter().fold(T::zero(), |acc, &x| acc + x);
    let neg = ev.iter().fold(T::zero(), |acc, &x| acc + negative_part(x));
    Ok(LogNegativity::from_trace_norm(
        (trace + neg) / rho.trace(),
        base,
    ))
}

/// `(|01> - |10>)/sqrt2` on two qubit-truncated modes.
pub fn singlet_state<T: Real>() -> DensityMatrix<T> {
    let h = T::one() / T::lit(2.0).sqrt();
    let z = Complex::new(T::zero(), T::zero());
    let amps = [
        z,
        Complex::new(h, T::zero()),
        Complex::new(-h, T::zero()),
        z,
    ];
    DensityMatrix::pure((2, 2), &amps).expect("dimensions match")
}

/// The photon-number entangled pair after both modes cross a pure-loss
/// channel of transmissivity `t`: `t |psi><psi| + (1 - t) |00><00|`.
pub fn direct_state<T: Real>(t: Transmissivity<T>) -> DensityMatrix<T> {
    let vacuum = DensityMatrix::fock((2, 2), 0, 0).expect("in range");
    singlet_state()
        .mix(&vacuum, t.value())
        .expect("dimensions match")
}

/// `log[1 + sqrt((1 - t)^2 + t^2) - (1 - t)]`, the closed form of the
/// direct state's logarithmic negativity. Its partial transpose has a single
/// 2x2 block `[[1 - t, -t/2], [-t/2, 0]]` carrying the negative eigenvalue.
pub fn direct_log_negativity<T: Real>(t: Transmissivity<T>, base: LogBase) -> LogNegativity<T> {
    let t = t.value();
    let l = T::one() - t;
    LogNegativity::from_trace_norm(T::one() + (l * l + t * t).sqrt() - l, base)
}
