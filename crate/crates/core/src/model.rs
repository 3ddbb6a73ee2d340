//! Free energy of failure and the string model of the failure rate.
//!
//! `P = (1-p)^n Σ_w e^{-βF(w)}` with `F(w) = w - S(w)/β`, `S(w) = ln N_fail(w)`.
//! The model replaces the exact failing set by non-contractible self-avoiding
//! cycles: `P_model = Σ_l N_con(l) ξ^l (p(1-p))^{l/2}`.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::enumeration::TallyResult;
use crate::error::{Error, Result};
use crate::fit::bisect;
use crate::geometry::{CodeGeometry, Orientation};
use crate::noise::NoiseParams;
use crate::pathcount::binomial;
use crate::walks::{exact_constrained_small, ConstrainedCurve, CurvePoint};

/// Connective constant of self-avoiding walks on the square lattice.
pub const CONNECTIVE_CONSTANT: f64 = 2.638;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeEnergyRow {
    pub w: usize,
    pub n_fail: u64,
    /// `None` when nothing of this weight fails.
    pub entropy: Option<f64>,
    pub free_energy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FreeEnergyProfile {
    pub orientation: Orientation,
    pub d: usize,
    pub n: usize,
    pub p: f64,
    pub beta: f64,
    pub rows: Vec<FreeEnergyRow>,
    /// Some weights in `0..=n` were not tallied.
    pub partial: bool,
    #[serde(skip)]
    counts: Vec<(usize, u64)>,
}

pub fn free_energy_profile(p: f64, tally: &TallyResult) -> Result<FreeEnergyProfile> {
    let noise = NoiseParams::new(p)?;
    if p == 0.0 {
        return Err(Error::InvalidProbability(p));
    }
    let beta = noise.beta;
    let rows = tally
        .weights()
        .map(|w| {
            let k = tally.failures(w);
            let entropy = (k > 0).then(|| (k as f64).ln());
            FreeEnergyRow { w, n_fail: k, entropy, free_energy: entropy.map(|s| w as f64 - s / beta) }
        })
        .collect();
    Ok(FreeEnergyProfile {
        orientation: tally.orientation,
        d: tally.d,
        n: tally.n,
        p,
        beta,
        rows,
        partial: (0..=tally.n).any(|w| !tally.counts.contains_key(&w)),
        counts: tally.weights().map(|w| (w, tally.failures(w))).collect(),
    })
}

impl FreeEnergyProfile {
    /// `(1-p)^n Σ e^{-βF(w)}`.
    pub fn reconstruct(&self) -> f64 {
        let ln_q = (-self.p).ln_1p();
        self.rows
            .iter()
            .filter_map(|r| r.free_energy.map(|f| (self.n as f64 * ln_q - self.beta * f).exp()))
            .sum()
    }

    /// The same identity in exact arithmetic at a rational error rate:
    /// `(1-p)^n Σ N_fail(w) (p/(1-p))^w`.
    pub fn reconstruct_exact(&self, p: &BigRational) -> BigRational {
        let q = BigRational::one() - p;
        let x = p / &q;
        let sum = self.counts.iter().fold(BigRational::zero(), |acc, &(w, k)| {
            acc + BigRational::from_integer(BigInt::from(k)) * pow(&x, w)
        });
        pow(&q, self.n) * sum
    }

    /// Weight minimising `F`.
    pub fn argmin(&self) -> Option<usize> {
        self.rows
            .iter()
            .filter_map(|r| r.free_energy.map(|f| (r.w, f)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(w, _)| w)
    }
}

fn pow(x: &BigRational, k: usize) -> BigRational {
    num_traits::pow(x.clone(), k)
}

/// `N_con(l)` for every length on the curve, with zeros below `d`.
fn ncon_terms(ncon: &ConstrainedCurve) -> Result<Vec<(usize, f64)>> {
    let mut pts: Vec<&CurvePoint> = ncon.points.iter().filter(|p| p.l >= ncon.d).collect();
    pts.sort_by_key(|p| p.l);
    if pts.first().map(|p| p.l) != Some(ncon.d) {
        return Err(Error::InsufficientData(format!("N_con table must start at l = d = {}", ncon.d)));
    }
    Ok(pts.into_iter().map(|p| (p.l, p.estimate)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelValue {
    pub value: f64,
    /// Geometric estimate of the omitted tail.
    pub tail: f64,
    pub l_max: usize,
    /// The table ran out before the terms became negligible.
    pub truncated: bool,
}

/// `Σ_l N_con(l) ξ^l (p(1-p))^{l/2}`, stopping once a term falls below
/// `10⁻³` of the partial sum.
pub fn model_failure_rate(ncon: &ConstrainedCurve, p: f64, xi: f64) -> Result<ModelValue> {
    NoiseParams::new(p)?;
    let terms = ncon_terms(ncon)?;
    let h = (p * (1.0 - p)).sqrt();
    let mut sum = 0.0;
    let mut prev: Option<f64> = None;
    let mut l_max = ncon.d;
    for &(l, n) in &terms {
        let t = n * (xi * h).powi(l as i32);
        sum += t;
        l_max = l;
        if l > ncon.d && t > 0.0 && t < 1e-3 * sum {
            return Ok(ModelValue { value: sum, tail: tail(prev, t), l_max, truncated: false });
        }
        prev = Some(t);
    }
    let t = terms.last().map_or(0.0, |&(l, n)| n * (xi * h).powi(l as i32));
    let before = if terms.len() >= 2 {
        let (l, n) = terms[terms.len() - 2];
        Some(n * (xi * h).powi(l as i32))
    } else {
        None
    };
    Ok(ModelValue { value: sum, tail: tail(before, t), l_max, truncated: true })
}

fn tail(prev: Option<f64>, last: f64) -> f64 {
    match prev {
        Some(a) if a > 0.0 && last < a => {
            let r = last / a;
            last * r / (1.0 - r)
        }
        Some(_) => f64::INFINITY,
        None => 0.0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UpperBound {
    /// `Σ_l N_con(l) Σ_{u >= l/2} C(l,u) p^u (1-p)^{l-u}`.
    pub full: f64,
    /// `Σ_l N_con(l) 2^l (p(1-p))^{l/2}`.
    pub simplified: f64,
}

/// Both forms of the path-counting upper bound. Rigorous only when `ncon`
/// is exact for every length up to `n`.
pub fn rigorous_upper_bound(ncon: &ConstrainedCurve, p: f64) -> Result<UpperBound> {
    if !(p > 0.0 && p < 0.5) {
        return Err(Error::InvalidProbability(p));
    }
    let terms = ncon_terms(ncon)?;
    let (mut full, mut simplified) = (0.0, 0.0);
    for (l, n) in terms {
        full += n * majority_probability(l, p);
        simplified += n * (2.0 * (p * (1.0 - p)).sqrt()).powi(l as i32);
    }
    Ok(UpperBound { full, simplified })
}

/// Probability that at least half of `l` independent edges are flipped.
pub fn majority_probability(l: usize, p: f64) -> f64 {
    ((l + 1) / 2..=l)
        .map(|u| {
            let c = crate::pathcount::ln_big(&binomial(l as i64, u as i64));
            (c + u as f64 * p.ln() + (l - u) as f64 * (-p).ln_1p()).exp()
        })
        .sum()
}

/// `Σ_{u >= l/2} C(l,u) x^u` and `2^l x^{l/2}`: the two sides of the
/// inequality behind the simplified bound.
pub fn majority_inequality(l: usize, p: f64) -> (f64, f64) {
    let x = p / (1.0 - p);
    let lhs = ((l + 1) / 2..=l)
        .map(|u| binomial(l as i64, u as i64).to_f64().unwrap_or(f64::INFINITY) * x.powi(u as i32))
        .sum();
    (lhs, 2f64.powi(l as i32) * x.powf(l as f64 / 2.0))
}

/// Smaller root of `2c√(p(1-p)) = 1`.
pub fn threshold_lower_bound(c: f64) -> Result<f64> {
    if !(c >= 1.0) {
        return Err(Error::NoRoot(format!("2c√(p(1-p)) = 1 has no root for c = {c}")));
    }
    Ok(0.5 - (0.25 - 1.0 / (4.0 * c * c)).sqrt())
}

/// `p_c = 1/2 - √(1/4 - 1/(ξc)²)`.
pub fn critical_p(xi_th: f64, c: f64) -> Result<f64> {
    let k = xi_th * c;
    if !(k >= 2.0) {
        return Err(Error::NoRoot(format!("ξc = {k} < 2")));
    }
    Ok(0.5 - (0.25 - 1.0 / (k * k)).sqrt())
}

/// Inverse of `critical_p` in `ξ`.
pub fn xi_at_critical(p_c: f64, c: f64) -> f64 {
    1.0 / (c * (p_c * (1.0 - p_c)).sqrt())
}

/// Exact `N_con(l)` for every even `l` from `d` to `l_max` by backtracking.
pub fn exact_ncon_curve(geom: &CodeGeometry, l_max: usize) -> Result<ConstrainedCurve> {
    let points = (geom.d()..=l_max)
        .step_by(2)
        .map(|l| {
            let v = exact_constrained_small(geom, l)?;
            Ok(CurvePoint {
                l,
                estimate: biguint_f64(&v),
                sigma: 0.0,
                exact: true,
                per_root: f64::NAN,
                per_root_sigma: 0.0,
                samples: 0,
                accepted: 0,
                upper_bound: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstrainedCurve { orientation: geom.orientation(), d: geom.d(), n: geom.n(), points })
}

fn biguint_f64(v: &BigUint) -> f64 {
    v.to_f64().unwrap_or(f64::INFINITY)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiPoint {
    pub p: f64,
    pub p_hat: f64,
    pub xi: Option<f64>,
    pub sigma: Option<f64>,
    /// No root on `[0.5, 2.5]`, or a root outside `[1, 2]` by more than σ.
    pub flagged: bool,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct XiCurve {
    pub orientation: Orientation,
    pub d: usize,
    pub n: usize,
    pub points: Vec<XiPoint>,
}

const XI_RANGE: (f64, f64) = (0.5, 2.5);

fn solve_xi(ncon: &ConstrainedCurve, p: f64, target: f64) -> Option<(f64, bool)> {
    if !(target > 0.0) {
        return None;
    }
    let f = |xi: f64| model_failure_rate(ncon, p, xi).map(|m| m.value.ln() - target.ln()).unwrap_or(f64::NAN);
    let xi = bisect(f, XI_RANGE.0, XI_RANGE.1, 1e-10).ok()?;
    Some((xi, model_failure_rate(ncon, p, xi).ok()?.truncated))
}

/// Per-`p` inversion of `P_model(ξ) = P̂`. Input triples are `(p, P̂, σ)`.
pub fn fit_xi(data: &[(f64, f64, f64)], ncon: &ConstrainedCurve) -> Result<XiCurve> {
    ncon_terms(ncon)?;
    let points = data
        .iter()
        .map(|&(p, p_hat, sigma)| {
            let Some((xi, truncated)) = solve_xi(ncon, p, p_hat) else {
                return XiPoint { p, p_hat, xi: None, sigma: None, flagged: true, truncated: false };
            };
            let hi = solve_xi(ncon, p, p_hat + sigma).map(|r| r.0);
            let lo = solve_xi(ncon, p, p_hat - sigma).map(|r| r.0);
            let s = match (lo, hi) {
                (Some(a), Some(b)) => Some(0.5 * (b - a)),
                (None, Some(b)) => Some(b - xi),
                (Some(a), None) => Some(xi - a),
                (None, None) => None,
            };
            let margin = s.unwrap_or(0.0);
            let flagged = xi < 1.0 - margin || xi > 2.0 + margin;
            XiPoint { p, p_hat, xi: Some(xi), sigma: s, flagged, truncated }
        })
        .collect();
    Ok(XiCurve { orientation: ncon.orientation, d: ncon.d, n: ncon.n, points })
}

/// `ξ(0)` implied by the leading low-p terms:
/// `N_con(d) ξ^d = N_fail(d/2)`.
pub fn low_p_xi(n_fail_min: f64, ncon_d: f64, d: usize) -> f64 {
    (n_fail_min / ncon_d).powf(1.0 / d as f64)
}
