//! Numerical helpers shared by the fitting code.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    /// Covariance from the supplied weights (not rescaled by χ²).
    pub cov: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
}

impl LinearFit {
    pub fn stderr(&self, i: usize) -> f64 {
        self.cov[i][i].sqrt()
    }
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Minimise `Σ w_i (y_i - x_i·β)²`, weights being inverse variances.
pub fn weighted_least_squares(design: &[Vec<f64>], y: &[f64], weights: &[f64]) -> Result<LinearFit> {
    let m = y.len();
    let k = design.first().map_or(0, Vec::len);
    if m < k || k == 0 {
        return Err(Error::InsufficientData(format!("{m} points for {k} parameters")));
    }
    let a = DMatrix::from_fn(m, k, |i, j| design[i][j] * weights[i].sqrt());
    let b = DVector::from_fn(m, |i, _| y[i] * weights[i].sqrt());
    let normal = a.transpose() * &a;
    let cov = normal
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::InsufficientData("singular design matrix".into()))?;
    let coef = &cov * (a.transpose() * &b);
    let resid = &a * &coef - &b;
    Ok(LinearFit { coef: coef.iter().copied().collect(), cov: to_rows(&cov), chi2: resid.norm_squared(), dof: m - k })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonlinearFit {
    pub params: Vec<f64>,
    /// `(JᵀJ)⁻¹` at the optimum, for residuals already divided by σ.
    pub cov: Vec<Vec<f64>>,
    pub chi2: f64,
    pub dof: usize,
    pub iterations: usize,
    pub converged: bool,
}

fn jacobian(f: &impl Fn(&[f64]) -> Vec<f64>, x: &[f64], r0: &[f64]) -> DMatrix<f64> {
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = 1e-6 * x[j].abs().max(1e-6);
        xp[j] = x[j] + h;
        let rp = f(&xp);
        xp[j] = x[j] - h;
        let rm = f(&xp);
        xp[j] = x[j];
        for i in 0..r0.len() {
            jac[(i, j)] = (rp[i] - rm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Levenberg–Marquardt on weighted residuals `r(x)`; minimises `Σ r_i²`.
pub fn levenberg_marquardt(f: impl Fn(&[f64]) -> Vec<f64>, init: &[f64], max_iter: usize) -> NonlinearFit {
    let mut x = init.to_vec();
    let mut r = f(&x);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        let jac = jacobian(&f, &x, &r);
        let rv = DVector::from_column_slice(&r);
        let jtj = jac.transpose() * &jac;
        let grad = jac.transpose() * rv;
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for i in 0..x.len() {
                damped[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
            }
            let Some(step) = damped.lu().solve(&(-&grad)) else {
                lambda *= 10.0;
                continue;
            };
            let cand: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rc = f(&cand);
            let cc: f64 = rc.iter().map(|v| v * v).sum();
            if cc.is_finite() && cc <= cost {
                let rel = (cost - cc) / cost.max(1e-300);
                let small_step = step.iter().zip(&x).all(|(s, v)| s.abs() <= 1e-10 * v.abs().max(1e-10));
                x = cand;
                r = rc;
                cost = cc;
                lambda = (lambda / 3.0).max(1e-12);
                improved = true;
                if rel < 1e-12 || small_step {
                    converged = true;
                }
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            // no downhill step at any damping: stationary point
            converged = true;
        }
        if converged {
            break;
        }
    }
    let jac = jacobian(&f, &x, &r);
    let cov = (jac.transpose() * &jac).try_inverse().map(|c| to_rows(&c)).unwrap_or_else(|| {
        converged = false;
        vec![vec![f64::NAN; x.len()]; x.len()]
    });
    NonlinearFit { dof: r.len().saturating_sub(x.len()), params: x, cov, chi2: cost, iterations, converged }
}

/// Root of a continuous function on a sign-changing bracket, to relative `rtol`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, rtol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if !(flo.signum() != fhi.signum()) || flo.is_nan() || fhi.is_nan() {
        return Err(Error::NoRoot(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if (hi - lo).abs() <= rtol * mid.abs().max(f64::MIN_POSITIVE) {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch–Carlson).
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n {
            return Err(Error::InsufficientData(format!("{n} interpolation nodes")));
        }
        if xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("interpolation nodes must increase".into()));
        }
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();
        let mut m = vec![0.0; n];
        m[0] = delta[0];
        m[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            m[i] = if delta[i - 1] * delta[i] <= 0.0 { 0.0 } else { 0.5 * (delta[i - 1] + delta[i]) };
        }
        for i in 0..n - 1 {
            if delta[i] == 0.0 {
                m[i] = 0.0;
                m[i + 1] = 0.0;
                continue;
            }
            let a = m[i] / delta[i];
            let b = m[i + 1] / delta[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let t = 3.0 / s.sqrt();
                m[i] = t * a * delta[i];
                m[i + 1] = t * b * delta[i];
            }
        }
        Ok(MonotoneCubic { xs: xs.to_vec(), ys: ys.to_vec(), slopes: m })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    /// Evaluate; `None` outside the node range.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if !(lo..=hi).contains(&x) {
            return None;
        }
        let i = match self.xs.partition_point(|&v| v <= x) {
            0 => 0,
            k => (k - 1).min(self.xs.len() - 2),
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        Some(
            (2.0 * t3 - 3.0 * t2 + 1.0) * self.ys[i]
                + (t3 - 2.0 * t2 + t) * h * self.slopes[i]
                + (-2.0 * t3 + 3.0 * t2) * self.ys[i + 1]
                + (t3 - t2) * h * self.slopes[i + 1],
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let design: Vec<_> = xs.iter().map(|&x| vec![1.0, x]).collect();
        let y: Vec<_> = xs.iter().map(|x| 0.5 - 2.0 * x).collect();
        let fit = weighted_least_squares(&design, &y, &[1.0, 2.0, 1.0, 3.0]).unwrap();
        assert!((fit.coef[0] - 0.5).abs() < 1e-12 && (fit.coef[1] + 2.0).abs() < 1e-12);
        assert!(fit.chi2 < 1e-20);
        assert_eq!(fit.dof, 2);
    }

    #[test]
    fn lm_fits_exponential() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 0.2).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * (-1.3 * x).exp() + 0.1).collect();
        let fit = levenberg_marquardt(
            |p| xs.iter().zip(&ys).map(|(x, y)| (p[0] * (p[1] * x).exp() + p[2] - y) / 0.01).collect(),
            &[1.0, -0.5, 0.0],
            200,
        );
        assert!(fit.converged);
        assert!((fit.params[0] - 2.0).abs() < 1e-6);
        assert!((fit.params[1] + 1.3).abs() < 1e-6);
    }

    #[test]
    fn bisection_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-14).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-13);
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, 1e-9).is_err());
    }

    #[test]
    fn monotone_cubic_interpolates_and_preserves_monotonicity() {
        let xs = [0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = [0.0, 0.1, 0.2, 5.0, 5.1];
        let c = MonotoneCubic::new(&xs, &ys).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((c.eval(*x).unwrap() - y).abs() < 1e-12);
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=400 {
            let v = c.eval(i as f64 * 0.01).unwrap();
            assert!(v >= prev - 1e-12);
            prev = v;
        }
        assert!(c.eval(4.5).is_none());
        // reproduces cubics' linear part exactly
        let lin = MonotoneCubic::new(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((lin.eval(1.5).unwrap() - 4.0).abs() < 1e-12);
    }
}
