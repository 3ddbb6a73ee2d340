//! Direct Monte Carlo estimation of logical failure rates and the fits built on it.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, weighted_least_squares};
use crate::geometry::{CodeGeometry, Orientation};
use crate::matching::Decoder;
use crate::noise::{rng_stream, sample_into, ErrorConfig, NoiseParams};

/// Failure count for one geometry and error rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureEstimate {
    pub orientation: Orientation,
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub trials: u64,
    pub failures: u64,
    /// Trials per residual class (index 0 = success).
    pub class_counts: [u64; 4],
    pub seed: u64,
}

impl FailureEstimate {
    pub fn p_hat(&self) -> f64 {
        self.failures as f64 / self.trials as f64
    }

    /// `√((1 - P)P/η)`.
    pub fn sigma(&self) -> f64 {
        let p = self.p_hat();
        ((1.0 - p) * p / self.trials as f64).sqrt()
    }

    /// Wilson score interval at `z` standard deviations.
    pub fn wilson(&self, z: f64) -> (f64, f64) {
        let n = self.trials as f64;
        let ph = self.p_hat();
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let center = (ph + z2 / (2.0 * n)) / denom;
        let half = z * (ph * (1.0 - ph) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        ((center - half).max(0.0), (center + half).min(1.0))
    }

    /// Standard error used for fitting: the normal approximation, or the
    /// one-sigma Wilson half-width when fewer than 10 failures were seen.
    pub fn fit_sigma(&self) -> f64 {
        if self.failures < 10 {
            let (lo, hi) = self.wilson(1.0);
            0.5 * (hi - lo)
        } else {
            self.sigma()
        }
    }

    pub fn sqrt_n(&self) -> f64 {
        (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    /// Trials per independently seeded chunk.
    pub chunk_size: u64,
    /// Optional nearest-neighbour pruning of the matching graph.
    pub neighbor_limit: Option<usize>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig { chunk_size: 1024, neighbor_limit: None }
    }
}

pub fn estimate_failure_rate(geom: &CodeGeometry, p: f64, trials: u64, seed: u64) -> Result<FailureEstimate> {
    estimate_failure_rate_with(geom, p, trials, seed, &McConfig::default())
}

/// `trials` independent decodes. Chunk `c` draws from stream `c` of `seed`,
/// so the result does not depend on how chunks are scheduled.
pub fn estimate_failure_rate_with(
    geom: &CodeGeometry,
    p: f64,
    trials: u64,
    seed: u64,
    config: &McConfig,
) -> Result<FailureEstimate> {
    let noise = NoiseParams::new(p)?;
    if trials == 0 {
        return Err(Error::InvalidInput("trial count must be positive".into()));
    }
    let chunk = config.chunk_size.max(1);
    let chunks = trials.div_ceil(chunk);
    let class_counts = (0..chunks)
        .into_par_iter()
        .map_init(
            || (Decoder::new(geom).with_neighbor_limit(config.neighbor_limit), ErrorConfig::zeros(geom.n())),
            |(decoder, e), c| {
                let mut rng = rng_stream(seed, c);
                let count = chunk.min(trials - c * chunk);
                let mut counts = [0u64; 4];
                for _ in 0..count {
                    sample_into(e, noise.p, &mut rng);
                    counts[decoder.failure_class(e).index()] += 1;
                }
                counts
            },
        )
        .reduce(|| [0; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]);
    Ok(FailureEstimate {
        orientation: geom.orientation(),
        d: geom.d(),
        n: geom.n(),
        p,
        trials,
        failures: class_counts[1] + class_counts[2] + class_counts[3],
        class_counts,
        seed,
    })
}

/// Straight-line fit of `log10 P` against `√n` at one error rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnsatzFit {
    pub p: f64,
    pub p_th: f64,
    pub alpha: f64,
    pub alpha_err: f64,
    pub log10_a: f64,
    pub log10_a_err: f64,
    pub slope: f64,
    pub slope_err: f64,
    /// Covariance of (intercept, slope).
    pub cov_intercept_slope: f64,
    pub sqrt_n_window: (f64, f64),
    pub points: usize,
    pub excluded: usize,
    pub chi2: f64,
    pub dof: usize,
}

impl AnsatzFit {
    pub fn predict_log10(&self, sqrt_n: f64) -> f64 {
        self.log10_a + self.slope * sqrt_n
    }
}

/// Fit `P = A exp(α log(p/p_th) √n)` separately at each error rate present.
pub fn fit_ansatz(estimates: &[FailureEstimate], p_th: f64) -> Result<Vec<AnsatzFit>> {
    let mut by_p: BTreeMap<u64, Vec<&FailureEstimate>> = BTreeMap::new();
    for est in estimates {
        by_p.entry(est.p.to_bits()).or_default().push(est);
    }
    let mut fits = Vec::new();
    for (bits, group) in by_p {
        let p = f64::from_bits(bits);
        let usable: Vec<_> = group.iter().filter(|e| e.failures > 0).collect();
        let excluded = group.len() - usable.len();
        if usable.len() < 3 {
            return Err(Error::InsufficientData(format!(
                "p = {p}: {} sizes with nonzero failures, need 3",
                usable.len()
            )));
        }
        let design: Vec<Vec<f64>> = usable.iter().map(|e| vec![1.0, e.sqrt_n()]).collect();
        let y: Vec<f64> = usable.iter().map(|e| e.p_hat().log10()).collect();
        let w: Vec<f64> = usable
            .iter()
            .map(|e| {
                let s = e.fit_sigma() / (e.p_hat() * std::f64::consts::LN_10);
                1.0 / (s * s)
            })
            .collect();
        let lf = weighted_least_squares(&design, &y, &w)?;
        let scale = (p / p_th).log10();
        let sizes: Vec<f64> = usable.iter().map(|e| e.sqrt_n()).collect();
        fits.push(AnsatzFit {
            p,
            p_th,
            alpha: lf.coef[1] / scale,
            alpha_err: lf.stderr(1) / scale.abs(),
            log10_a: lf.coef[0],
            log10_a_err: lf.stderr(0),
            slope: lf.coef[1],
            slope_err: lf.stderr(1),
            cov_intercept_slope: lf.cov[0][1],
            sqrt_n_window: (
                sizes.iter().copied().fold(f64::INFINITY, f64::min),
                sizes.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ),
            points: usable.len(),
            excluded,
            chi2: lf.chi2,
            dof: lf.dof,
        });
    }
    Ok(fits)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub p: f64,
    /// `√n` where the two fitted lines meet, if they do so at positive size.
    pub sqrt_n: Option<f64>,
    pub sigma: Option<f64>,
    /// `crossing`, `parallel` or `nonpositive`.
    pub status: &'static str,
}

/// Sizes where two sets of per-p fits predict equal failure rates.
pub fn find_crossings(first: &[AnsatzFit], second: &[AnsatzFit]) -> Vec<Crossing> {
    let mut out = Vec::new();
    for a in first {
        let Some(b) = second.iter().find(|b| b.p == a.p) else { continue };
        let ds = a.slope - b.slope;
        let ds_err = (a.slope_err.powi(2) + b.slope_err.powi(2)).sqrt();
        if ds == 0.0 || ds.abs() <= 2.0 * ds_err {
            out.push(Crossing { p: a.p, sqrt_n: None, sigma: None, status: "parallel" });
            continue;
        }
        let di = b.log10_a - a.log10_a;
        let x = di / ds;
        // first-order propagation with each fit's intercept-slope covariance
        let var = |f: &AnsatzFit, sign: f64| {
            let gi = sign / ds;
            let gs = -sign * x / ds;
            gi * gi * f.log10_a_err.powi(2) + gs * gs * f.slope_err.powi(2) + 2.0 * gi * gs * f.cov_intercept_slope
        };
        let sigma = (var(a, -1.0) + var(b, 1.0)).max(0.0).sqrt();
        if x > 0.0 {
            out.push(Crossing { p: a.p, sqrt_n: Some(x), sigma: Some(sigma), status: "crossing" });
        } else {
            out.push(Crossing { p: a.p, sqrt_n: None, sigma: None, status: "nonpositive" });
        }
    }
    out
}

/// `log P = a + b x + c x²` with `x = (p - p_th) d^μ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdFit {
    pub p_th: f64,
    pub mu: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Standard errors of (p_th, μ, a, b, c), scaled by the reduced χ².
    pub errors: [f64; 5],
    pub chi2: f64,
    pub dof: usize,
    pub points: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOptions {
    pub p_th0: f64,
    pub mu0: f64,
    /// Relative half-width of the multistart grid around the initial values.
    pub spread: f64,
    pub grid: usize,
}

impl Default for ThresholdOptions {
    fn default() -> Self {
        ThresholdOptions { p_th0: 0.10, mu0: 0.7, spread: 0.5, grid: 41 }
    }
}

struct ThresholdData {
    p: Vec<f64>,
    d: Vec<f64>,
    y: Vec<f64>,
    s: Vec<f64>,
}

impl ThresholdData {
    fn residuals(&self, x: &[f64]) -> Vec<f64> {
        let (pth, mu, a, b, c) = (x[0], x[1], x[2], x[3], x[4]);
        (0..self.y.len())
            .map(|i| {
                let u = (self.p[i] - pth) * self.d[i].powf(mu);
                (a + b * u + c * u * u - self.y[i]) / self.s[i]
            })
            .collect()
    }

    /// Best (a, b, c) and χ² for fixed (p_th, μ).
    fn project(&self, pth: f64, mu: f64) -> Option<([f64; 3], f64)> {
        let design: Vec<Vec<f64>> = (0..self.y.len())
            .map(|i| {
                let u = (self.p[i] - pth) * self.d[i].powf(mu);
                vec![1.0, u, u * u]
            })
            .collect();
        let w: Vec<f64> = self.s.iter().map(|s| 1.0 / (s * s)).collect();
        let lf = weighted_least_squares(&design, &self.y, &w).ok()?;
        Some(([lf.coef[0], lf.coef[1], lf.coef[2]], lf.chi2))
    }
}

pub fn fit_threshold(estimates: &[FailureEstimate]) -> Result<ThresholdFit> {
    fit_threshold_with(estimates, &ThresholdOptions::default())
}

pub fn fit_threshold_with(estimates: &[FailureEstimate], opts: &ThresholdOptions) -> Result<ThresholdFit> {
    let usable: Vec<_> = estimates.iter().filter(|e| e.failures > 0 && e.failures < e.trials).collect();
    let mut sizes: Vec<usize> = usable.iter().map(|e| e.d).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 4 || usable.len() < 6 {
        return Err(Error::InsufficientData(format!(
            "{} usable points over {} sizes; need 4 sizes",
            usable.len(),
            sizes.len()
        )));
    }
    let data = ThresholdData {
        p: usable.iter().map(|e| e.p).collect(),
        d: usable.iter().map(|e| e.d as f64).collect(),
        y: usable.iter().map(|e| e.p_hat().ln()).collect(),
        s: usable.iter().map(|e| e.fit_sigma() / e.p_hat()).collect(),
    };

    // variable projection over a (p_th, μ) grid picks the starting point
    let g = opts.grid.max(2);
    let mut best: Option<(f64, [f64; 5])> = None;
    for i in 0..g {
        for j in 0..g {
            let fi = i as f64 / (g - 1) as f64 * 2.0 - 1.0;
            let fj = j as f64 / (g - 1) as f64 * 2.0 - 1.0;
            let pth = opts.p_th0 * (1.0 + opts.spread * fi);
            let mu = opts.mu0 * (1.0 + opts.spread * fj);
            if let Some((abc, chi2)) = data.project(pth, mu) {
                if best.as_ref().is_none_or(|(c, _)| chi2 < *c) {
                    best = Some((chi2, [pth, mu, abc[0], abc[1], abc[2]]));
                }
            }
        }
    }
    let (_, start) = best.ok_or_else(|| Error::NoConvergence("degenerate threshold design".into()))?;
    let fit = levenberg_marquardt(|x| data.residuals(x), &start, 500);
    let residuals = data.residuals(&fit.params);
    if !fit.converged || fit.params.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence(format!(
            "threshold fit stalled at {:?}, max |residual| {:.3}",
            fit.params,
            residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()))
        )));
    }
    let scale = if fit.dof > 0 { (fit.chi2 / fit.dof as f64).max(1e-300) } else { 1.0 };
    let mut errors = [0.0; 5];
    for (k, e) in errors.iter_mut().enumerate() {
        *e = (fit.cov[k][k] * scale).sqrt();
    }
    let x = &fit.params;
    Ok(ThresholdFit {
        p_th: x[0],
        mu: x[1],
        a: x[2],
        b: x[3],
        c: x[4],
        errors,
        chi2: fit.chi2,
        dof: fit.dof,
        points: usable.len(),
        converged: fit.converged,
    })
}
