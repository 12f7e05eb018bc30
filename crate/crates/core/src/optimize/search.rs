use crate::num::Real;

/// Result of a scalar maximisation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Optimum<T> {
    pub x: T,
    pub value: T,
    pub evaluations: usize,
    pub bracket: (T, T),
}

/// Golden-section search for a maximum of `f` on `[a, b]`, stopping when the
/// bracket is narrower than `tol`. Assumes `f` is unimodal on the bracket.
pub fn golden_section_max<T: Real, F>(mut f: F, a: T, b: T, tol: T) -> Optimum<T>
where
    F: FnMut(T) -> T,
{
    let inv_phi = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let (mut a, mut b) = if a <= b { (a, b) } else { (b, a) };
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    let mut evaluations = 2;
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
        evaluations += 1;
        // Guard against a tolerance below the scalar's resolution.
        if evaluations > 10_000 {
            break;
        }
    }
    let (x, value) = if fc >= fd { (c, fc) } else { (d, fd) };
    Optimum {
        x,
        value,
        evaluations,
        bracket: (a, b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions<T> {
    pub initial_step: T,
    pub max_evaluations: usize,
    /// Stop when the spread of simplex values falls below this.
    pub value_tolerance: T,
}

impl<T: Real> Default for NelderMeadOptions<T> {
    fn default() -> Self {
        Self {
            initial_step: T::lit(0.1),
            max_evaluations: 4000,
            value_tolerance: T::lit(1e-12),
        }
    }
}

/// Nelder-Mead simplex maximisation of `f` starting at `x0`.
///
/// Returns the best vertex and its value.
pub fn nelder_mead_max<T: Real, F>(
    mut f: F,
    x0: &[T],
    opts: &NelderMeadOptions<T>,
) -> (Vec<T>, T, usize)
where
    F: FnMut(&[T]) -> T,
{
    let n = x0.len();
    let (alpha, gamma, rho, sigma) = (T::one(), T::lit(2.0), T::lit(0.5), T::lit(0.5));
    // Minimise -f internally.
    let mut simplex: Vec<(Vec<T>, T)> = Vec::with_capacity(n + 1);
    let mut evals = 0;
    let mut eval = |x: &[T], evals: &mut usize| {
        *evals += 1;
        -f(x)
    };
    simplex.push((x0.to_vec(), eval(x0, &mut evals)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.initial_step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }

    let centroid = |s: &[(Vec<T>, T)]| -> Vec<T> {
        let mut c = vec![T::zero(); n];
        for (x, _) in &s[..n] {
            for (ci, xi) in c.iter_mut().zip(x) {
                *ci += *xi;
            }
        }
        c.iter().map(|&v| v / T::lit(n as f64)).collect()
    };
    let along = |c: &[T], x: &[T], t: T| -> Vec<T> {
        c.iter()
            .zip(x)
            .map(|(&ci, &xi)| ci + t * (xi - ci))
            .collect()
    };

    while evals < opts.max_evaluations {
        simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
        if simplex[n].1 - simplex[0].1 <= opts.value_tolerance {
            break;
        }
        let c = centroid(&simplex);
        let worst = simplex[n].clone();
        let xr = along(&c, &worst.0, -alpha);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = along(&c, &worst.0, -gamma);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < worst.1 {
                let xc = along(&c, &xr, rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = along(&c, &worst.0, rho);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < worst.1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for vertex in simplex.iter_mut().skip(1) {
                    let x = along(&best, &vertex.0, sigma);
                    let v = eval(&x, &mut evals);
                    *vertex = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (x, v) = simplex.swap_remove(0);
    (x, -v, evals)
}
