//! Small numerical routines: bracketed root refinement, power iteration for
//! the spectral radius of a nonnegative matrix, and least-squares line fits.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Brent-style refinement of a root of `f` inside a bracket `[a, b]` with
/// `f(a) * f(b) <= 0`. Combines bisection with secant/inverse-quadratic
/// steps; stops when `|f| <= f_tol` or the bracket collapses.
pub fn brent<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    f_tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 {
        return Err(Error::PreconditionViolated(format!(
            "root not bracketed: f({a}) = {fa:e}, f({b}) = {fb:e}"
        )));
    }
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut mflag = true;
    for _ in 0..max_iter {
        if fb.abs() <= f_tol {
            return Ok(b);
        }
        let s = if fa != fc && fb != fc {
            // inverse quadratic interpolation
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            // secant
            b - fb * (b - a) / (fb - fa)
        };
        let lo = (3.0 * a + b) / 4.0;
        let hi = b;
        let (lo, hi) = if lo < hi { (lo, hi) } else { (hi, lo) };
        let bisect = !(lo < s && s < hi)
            || (mflag && (s - b).abs() >= (b - c).abs() / 2.0)
            || (!mflag && (s - b).abs() >= (c - d).abs() / 2.0)
            || (mflag && (b - c).abs() < 1e-15 * b.abs().max(1.0))
            || (!mflag && (c - d).abs() < 1e-15 * b.abs().max(1.0));
        let s = if bisect { 0.5 * (a + b) } else { s };
        mflag = bisect;
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa * fs < 0.0 {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
        if (b - a).abs() <= 1e-16 * b.abs().max(1.0) {
            return Ok(b);
        }
    }
    if fb.abs() <= f_tol * 10.0 {
        return Ok(b);
    }
    Err(Error::ConvergenceFailure {
        iterations: max_iter,
        residual: fb.abs(),
    })
}

/// Spectral radius and right eigenvector of an entrywise-nonnegative matrix
/// by power iteration. Starts from the all-ones vector; a diagonal shift
/// guards against period-2 cycling on patterns with zero diagonal.
///
/// Converges when successive Rayleigh quotients differ by at most `tol`;
/// the returned residual is `||A y - rho y||_inf` for the min-normalized `y`.
pub struct PowerResult {
    pub rho: f64,
    /// Eigenvector normalized so its minimum entry is 1 (requires a
    /// strictly positive eigenvector, i.e. an irreducible pattern).
    pub y: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
}

pub fn power_iteration(a: &DMatrix<f64>, tol: f64, max_iter: usize) -> Result<PowerResult> {
    let n = a.nrows();
    if n == 1 {
        let rho = a[(0, 0)];
        return Ok(PowerResult {
            rho,
            y: DVector::from_element(1, 1.0),
            iterations: 0,
            residual: 0.0,
        });
    }
    let scale = a.amax().max(1e-300);
    let shift = 0.25 * scale;
    let shifted = a + DMatrix::identity(n, n) * shift;
    let mut y = DVector::from_element(n, 1.0);
    let mut rayleigh_prev = f64::INFINITY;
    let mut iterations = 0;
    loop {
        let ay = &shifted * &y;
        let num: f64 = y.iter().zip(ay.iter()).map(|(u, v)| u * v).sum();
        let den: f64 = y.iter().map(|u| u * u).sum();
        let rayleigh = num / den;
        let norm = ay.amax();
        if norm == 0.0 {
            return Ok(PowerResult {
                rho: 0.0,
                y: DVector::from_element(n, 1.0),
                iterations,
                residual: 0.0,
            });
        }
        y = ay / norm;
        iterations += 1;
        if (rayleigh - rayleigh_prev).abs() <= tol * rayleigh.abs().max(1.0) {
            let rho = rayleigh - shift;
            let min = y.min();
            if min <= 0.0 {
                return Err(Error::ConvergenceFailure {
                    iterations,
                    residual: f64::INFINITY,
                });
            }
            let y = y / min;
            let residual = (a * &y - &y * rho).amax();
            return Ok(PowerResult {
                rho,
                y,
                iterations,
                residual,
            });
        }
        rayleigh_prev = rayleigh;
        if iterations >= max_iter {
            return Err(Error::ConvergenceFailure {
                iterations,
                residual: (rayleigh - rayleigh_prev).abs(),
            });
        }
    }
}

/// Ordinary least squares fit `y ~= intercept + slope * x`.
/// Returns `(slope, intercept, r_squared)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

/// Stationary vector of a stochastic matrix by GTH elimination.
///
/// State-reduction with no subtractions: every operation combines
/// nonnegative quantities, so each entry of the result carries full
/// relative accuracy even when the stationary mass spans hundreds of
/// orders of magnitude (deep truncation tails do).
pub fn gth_stationary(p: &DMatrix<f64>) -> Vec<f64> {
    let n = p.nrows();
    let mut a: Vec<f64> = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            a.push(p[(r, c)]);
        }
    }
    for k in (1..n).rev() {
        let s: f64 = a[k * n..k * n + k].iter().sum();
        for i in 0..k {
            a[i * n + k] /= s;
        }
        for i in 0..k {
            let pik = a[i * n + k];
            if pik != 0.0 {
                let (head, tail) = a.split_at_mut(k * n);
                let row_k = &tail[..k];
                let row_i = &mut head[i * n..i * n + k];
                for j in 0..k {
                    row_i[j] += pik * row_k[j];
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        let mut acc = 0.0;
        for i in 0..k {
            acc += pi[i] * a[i * n + k];
        }
        pi[k] = acc;
    }
    let total: f64 = pi.iter().sum();
    for x in pi.iter_mut() {
        *x /= total;
    }
    pi
}

/// Binomial coefficient as f64 (exact for the small arguments used by the
/// moment recursions).
pub fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}
