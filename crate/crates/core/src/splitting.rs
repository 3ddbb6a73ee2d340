//! Low-p failure rates by splitting.
//!
//! `P(p_0) = P(p_Λ) ∏ R_j` with `R_j = P(p_j)/P(p_{j+1})`. Each ratio comes
//! from two Metropolis chains restricted to failing configurations, combined
//! with Bennett's acceptance ratio. The chain distributions differ only through
//! the error weight, so a chain is summarised by the weights it visits.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::bisect;
use crate::geometry::CodeGeometry;
use crate::matching::Decoder;
use crate::noise::{rng_stream, ErrorConfig, NoiseParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Proposals per chain.
    pub steps: u64,
    /// Fraction of steps discarded before recording.
    pub burn_in: f64,
    /// Record every `thin`-th state; `None` means one sweep (`n` steps).
    pub thin: Option<u64>,
    pub batches: usize,
    pub seed: u64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { steps: 10_000_000, burn_in: 0.05, thin: None, batches: 32, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainSample {
    pub p: f64,
    pub n: usize,
    pub steps: u64,
    /// Weights of the recorded (failing) states, in chain order.
    pub weights: Vec<u32>,
    pub proposed: u64,
    /// Passed the Metropolis test.
    pub accepted_flip: u64,
    /// Passed the Metropolis test and still failed.
    pub accepted_failing: u64,
    #[serde(skip)]
    pub last: ErrorConfig,
}

impl ChainSample {
    pub fn acceptance(&self) -> f64 {
        self.accepted_failing as f64 / self.proposed.max(1) as f64
    }
}

/// A weight-`d/2` failing error: half of a minimal logical cycle.
pub fn minimal_failing_config(geom: &CodeGeometry) -> Result<ErrorConfig> {
    let mut decoder = Decoder::new(geom);
    let n = geom.n();
    let [g1, _] = geom.periods();
    let cycle = geom.lift_cycle(0, g1);
    let half = cycle.len() / 2;
    for part in [&cycle[..half], &cycle[half..]] {
        let e = ErrorConfig::from_edges(n, part.iter().copied());
        if decoder.failure_class(&e).is_failure() {
            return Ok(e);
        }
    }
    Err(Error::InitNotFailing)
}

/// Single-flip Metropolis walk on `π(E) ∝ p^w (1-p)^{n-w}` restricted to
/// errors the decoder fails on. Proposals leaving the failing set are rejected.
pub fn metropolis_chain(
    geom: &CodeGeometry,
    p: f64,
    init: &ErrorConfig,
    config: &ChainConfig,
    stream: u64,
) -> Result<ChainSample> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidProbability(p));
    }
    NoiseParams::new(p)?;
    let mut decoder = Decoder::new(geom);
    if init.len() != geom.n() || !decoder.failure_class(init).is_failure() {
        return Err(Error::InitNotFailing);
    }
    let n = geom.n();
    let up = p / (1.0 - p);
    let thin = config.thin.unwrap_or(n as u64).max(1);
    let burn = (config.burn_in.clamp(0.0, 1.0) * config.steps as f64) as u64;
    let mut rng = rng_stream(config.seed, stream);
    let mut e = init.clone();
    let mut out = ChainSample {
        p,
        n,
        steps: config.steps,
        weights: Vec::with_capacity(((config.steps - burn.min(config.steps)) / thin) as usize + 1),
        proposed: 0,
        accepted_flip: 0,
        accepted_failing: 0,
        last: ErrorConfig::zeros(n),
    };
    let mut recorded = 0u64;
    for step in 0..config.steps {
        let i = rng.random_range(0..n);
        out.proposed += 1;
        let adding = !e.get(i);
        if !adding || rng.random::<f64>() < up {
            out.accepted_flip += 1;
            e.flip(i);
            if decoder.failure_class(&e).is_failure() {
                out.accepted_failing += 1;
            } else {
                e.flip(i);
            }
        }
        if step >= burn && (step - burn) % thin == thin - 1 {
            recorded += 1;
            // the failure property is rechecked for a fraction of records
            if recorded % 64 == 1 {
                assert!(decoder.failure_class(&e).is_failure(), "chain left the failing set");
            }
            out.weights.push(e.weight() as u32);
        }
    }
    out.last = e;
    Ok(out)
}

/// Bennett's weighting function; satisfies `g(x) = g(1/x)/x`.
pub fn bennett_g(x: f64) -> f64 {
    1.0 / (1.0 + x)
}

/// `ln(π_j(E)/π_{j+1}(E))` for an error of weight `w`.
fn ln_ratio(w: u32, n: usize, pj: f64, pj1: f64) -> f64 {
    let w = w as f64;
    w * (pj / pj1).ln() + (n as f64 - w) * ((1.0 - pj) / (1.0 - pj1)).ln()
}

/// Solve Bennett's equation for `Z_j/Z_{j+1}` from weighted samples of
/// `a = π_j/π_{j+1}` under each distribution (`(a, multiplicity)` pairs).
///
/// Writing `R = C⟨g(C/a)⟩_{j+1} / ⟨g(a/C)⟩_j`, which holds for every `C`,
/// the optimal `C` is where both averages agree and then `R = C`.
pub fn bennett_solve(from_j: &[(f64, f64)], from_j1: &[(f64, f64)]) -> Result<f64> {
    if from_j.is_empty() || from_j1.is_empty() {
        return Err(Error::InsufficientData("empty chain".into()));
    }
    let mean = |s: &[(f64, f64)], f: &dyn Fn(f64) -> f64| {
        let (num, den) = s.iter().fold((0.0, 0.0), |(a, b), &(x, m)| (a + m * f(x), b + m));
        num / den
    };
    // decreasing in C
    let gap = |c: f64| mean(from_j1, &|a| bennett_g(c / a)) - mean(from_j, &|a| bennett_g(a / c));
    for (lo_exp, hi_exp) in [(-6.0, 0.0), (-12.0, 3.0), (-30.0, 10.0)] {
        let grid: Vec<f64> = (0..100).map(|k| 10f64.powf(lo_exp + (hi_exp - lo_exp) * k as f64 / 99.0)).collect();
        let vals: Vec<f64> = grid.iter().map(|&c| gap(c)).collect();
        if let Some(k) = (0..99).find(|&k| vals[k] >= 0.0 && vals[k + 1] <= 0.0) {
            if vals[k] == 0.0 {
                return Ok(grid[k]);
            }
            return bisect(gap, grid[k], grid[k + 1], 1e-9);
        }
    }
    Err(Error::NoRoot("Bennett curves do not cross on [1e-30, 1e10]".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioEstimate {
    pub p_j: f64,
    pub p_j1: f64,
    pub c_star: f64,
    /// `P(p_j)/P(p_{j+1}) = C*`.
    pub ratio: f64,
    pub sigma: f64,
    pub acceptance_j: f64,
    pub acceptance_j1: f64,
}

fn histogram(weights: &[u32], n: usize, pj: f64, pj1: f64) -> Vec<(f64, f64)> {
    let mut counts = vec![0u64; n + 1];
    for &w in weights {
        counts[w as usize] += 1;
    }
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(w, &c)| (ln_ratio(w as u32, n, pj, pj1).exp(), c as f64))
        .collect()
}

/// `R_j` from chains at `p_j` and `p_{j+1}`, with a batch-means error.
pub fn bennett_ratio(chain_j: &ChainSample, chain_j1: &ChainSample, batches: usize) -> Result<RatioEstimate> {
    let (pj, pj1, n) = (chain_j.p, chain_j1.p, chain_j.n);
    let c_star = bennett_solve(&histogram(&chain_j.weights, n, pj, pj1), &histogram(&chain_j1.weights, n, pj, pj1))?;
    let b = batches.max(2).min(chain_j.weights.len()).min(chain_j1.weights.len());
    let sigma = if b >= 2 {
        let slice = |w: &[u32], k: usize| {
            let len = w.len() / b;
            w[k * len..(k + 1) * len].to_vec()
        };
        let est: Vec<f64> = (0..b)
            .filter_map(|k| {
                let hj = histogram(&slice(&chain_j.weights, k), n, pj, pj1);
                let hj1 = histogram(&slice(&chain_j1.weights, k), n, pj, pj1);
                bennett_solve(&hj, &hj1).ok()
            })
            .collect();
        let m = est.iter().sum::<f64>() / est.len() as f64;
        let var = est.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (est.len() as f64 - 1.0);
        (var / est.len() as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(RatioEstimate {
        p_j: pj,
        p_j1: pj1,
        c_star,
        ratio: c_star,
        sigma,
        acceptance_j: chain_j.acceptance(),
        acceptance_j1: chain_j1.acceptance(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSchedule {
    /// Strictly decreasing rates; the first is the anchor rate.
    pub rates: Vec<f64>,
    pub anchor: f64,
    pub anchor_sigma: f64,
}

impl SplitSchedule {
    pub fn new(rates: Vec<f64>, anchor: f64, anchor_sigma: f64) -> Result<Self> {
        if rates.is_empty() || rates.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput("schedule rates must be strictly decreasing".into()));
        }
        if let Some(&p) = rates.iter().find(|&&p| !(p > 0.0 && p < 0.5)) {
            return Err(Error::InvalidProbability(p));
        }
        if !(anchor > 0.0) || anchor_sigma / anchor > 0.1 {
            return Err(Error::InvalidInput(format!("anchor {anchor} ± {anchor_sigma} is not within 10%")));
        }
        Ok(SplitSchedule { rates, anchor, anchor_sigma })
    }

    /// Rates from `p_anchor` down to `p0` with ratio at most `factor` per step.
    pub fn geometric_rates(p_anchor: f64, p0: f64, factor: f64) -> Vec<f64> {
        if p0 >= p_anchor {
            return vec![p_anchor];
        }
        let steps = ((p_anchor / p0).ln() / factor.ln()).ceil().max(1.0) as usize;
        let r = (p0 / p_anchor).ln() / steps as f64;
        let mut rates: Vec<f64> = (0..=steps).map(|k| p_anchor * (r * k as f64).exp()).collect();
        rates[steps] = p0;
        rates
    }

    pub fn target(&self) -> f64 {
        *self.rates.last().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitResult {
    pub p0: f64,
    pub estimate: f64,
    pub sigma: f64,
    pub ratios: Vec<RatioEstimate>,
    /// Running estimate at every rate of the schedule.
    pub partial: Vec<(f64, f64, f64)>,
    pub config: ChainConfig,
}

/// One chain per rate (run concurrently), then the telescoping product.
pub fn split_failure_rate(geom: &CodeGeometry, schedule: &SplitSchedule, config: &ChainConfig) -> Result<SplitResult> {
    let init = minimal_failing_config(geom)?;
    let rates = &schedule.rates;
    let chains: Vec<ChainSample> = if rates.len() > 1 {
        rates
            .par_iter()
            .enumerate()
            .map(|(k, &p)| metropolis_chain(geom, p, &init, config, k as u64))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut estimate = schedule.anchor;
    let mut rel2 = (schedule.anchor_sigma / schedule.anchor).powi(2);
    let mut ratios = Vec::new();
    let mut partial = vec![(rates[0], estimate, estimate * rel2.sqrt())];
    for k in 1..rates.len() {
        // R = P(rates[k]) / P(rates[k-1])
        let r = bennett_ratio(&chains[k], &chains[k - 1], config.batches)?;
        estimate *= r.ratio;
        rel2 += (r.sigma / r.ratio).powi(2);
        partial.push((rates[k], estimate, estimate * rel2.sqrt()));
        ratios.push(r);
    }
    Ok(SplitResult {
        p0: schedule.target(),
        estimate,
        sigma: estimate * rel2.sqrt(),
        ratios,
        partial,
        config: *config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumeration::enumerate_weights;
    use crate::geometry::Orientation;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    #[test]
    fn g_symmetry() {
        let mut rng = rng_stream(3, 0);
        for _ in 0..1_000_000 {
            let x: f64 = 10f64.powf(rng.random_range(-8.0..8.0));
            let lhs = bennett_g(x);
            let rhs = bennett_g(1.0 / x) / x;
            assert!((lhs - rhs).abs() <= 1e-15 * lhs.abs().max(1e-300) * 4.0, "{x}");
        }
    }

    #[test]
    fn identical_distributions_give_unit_ratio() {
        let h = [(1.0, 5.0)];
        let c = bennett_solve(&h, &h).unwrap();
        assert!((c - 1.0).abs() < 1e-8);
    }

    #[test]
    fn two_atom_ratio() {
        // π_j = (1, 2), π_{j+1} = (3, 1) on atoms (x, y): Z_j/Z_{j+1} = 3/4.
        let (ax, ay) = (1.0 / 3.0, 2.0);
        let from_j = [(ax, 1.0), (ay, 2.0)];
        let from_j1 = [(ax, 3.0), (ay, 1.0)];
        let c = bennett_solve(&from_j, &from_j1).unwrap();
        assert!((c - 0.75).abs() < 1e-8, "{c}");
    }

    #[test]
    fn schedule_validation() {
        assert!(SplitSchedule::new(vec![0.1, 0.2], 0.1, 0.001).is_err());
        assert!(SplitSchedule::new(vec![0.1, 0.05], 0.1, 0.05).is_err());
        let rates = SplitSchedule::geometric_rates(0.05, 0.001, 2.0);
        assert_eq!(rates[0], 0.05);
        assert_eq!(*rates.last().unwrap(), 0.001);
        assert!(rates.windows(2).all(|w| w[0] / w[1] <= 2.0 + 1e-12 && w[1] < w[0]));
    }

    #[test]
    fn anchor_only_schedule_is_identity() {
        let g = CodeGeometry::new(Orientation::Rotated, 4).unwrap();
        let s = SplitSchedule::new(vec![0.05], 0.02, 0.001).unwrap();
        let r = split_failure_rate(&g, &s, &ChainConfig { steps: 10, ..Default::default() }).unwrap();
        assert_eq!(r.estimate, 0.02);
        assert_eq!(r.sigma, 0.001);
    }

    #[test]
    fn init_must_fail() {
        let g = CodeGeometry::new(Orientation::Rotated, 4).unwrap();
        let cfg = ChainConfig { steps: 10, ..Default::default() };
        assert!(matches!(
            metropolis_chain(&g, 0.05, &ErrorConfig::zeros(g.n()), &cfg, 0),
            Err(Error::InitNotFailing)
        ));
        let init = minimal_failing_config(&g).unwrap();
        assert_eq!(init.weight(), 2);
    }

    #[test]
    fn low_p_chain_stays_minimal() {
        let g = CodeGeometry::new(Orientation::Square, 6).unwrap();
        let init = minimal_failing_config(&g).unwrap();
        let cfg = ChainConfig { steps: 20_000, burn_in: 0.0, thin: Some(1), batches: 4, seed: 5 };
        let chain = metropolis_chain(&g, 1e-9, &init, &cfg, 0).unwrap();
        assert!(chain.accepted_failing <= chain.accepted_flip && chain.accepted_flip <= chain.proposed);
        assert!(chain.weights.iter().all(|&w| w == 3));
        let mut dec = Decoder::new(&g);
        assert!(dec.failure_class(&chain.last).is_failure());
    }

    #[test]
    fn chain_samples_conditional_weight_distribution() {
        let g = CodeGeometry::new(Orientation::Rotated, 4).unwrap();
        let tally = enumerate_weights(&g, 0..=16).unwrap();
        let p: f64 = 0.05;
        let exact: Vec<f64> = (0..=16)
            .map(|w| tally.failures(w) as f64 * p.powi(w as i32) * (1.0 - p).powi(16 - w as i32))
            .collect();
        let z: f64 = exact.iter().sum();
        let init = minimal_failing_config(&g).unwrap();
        let cfg = ChainConfig { steps: 4_000_000, burn_in: 0.05, thin: Some(400), batches: 32, seed: 11 };
        let chain = metropolis_chain(&g, p, &init, &cfg, 0).unwrap();
        let mut obs = [0f64; 17];
        for &w in &chain.weights {
            obs[w as usize] += 1.0;
        }
        let total = chain.weights.len() as f64;
        // pool weights with small expectation into the last bin
        let (mut chi2, mut bins, mut tail_o, mut tail_e) = (0.0, 0, 0.0, 0.0);
        for w in 0..=16 {
            let e = exact[w] / z * total;
            if e >= 20.0 {
                chi2 += (obs[w] - e).powi(2) / e;
                bins += 1;
            } else {
                tail_o += obs[w];
                tail_e += e;
            }
        }
        if tail_e > 0.0 {
            chi2 += (tail_o - tail_e).powi(2) / tail_e;
            bins += 1;
        }
        let pval = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
        assert!(pval > 0.01, "chi2 {chi2} over {bins} bins, p = {pval}");
    }
}
