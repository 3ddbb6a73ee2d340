//! Counting non-contractible closed paths.
//!
//! Unconstrained counts are walks on the plane with a fixed displacement.
//! Constrained counts are vertex-self-avoiding cycles on the torus with a
//! nonzero lift, counted as undirected edge sets.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fit::{weighted_least_squares, MonotoneCubic};
use crate::geometry::{CodeGeometry, Orientation};
use crate::noise::rng_stream;
use crate::pathcount::{binomial, ln_big};

/// Largest search tree `exact_constrained_small` will walk.
pub const BACKTRACK_GUARD: u64 = 1_000_000_000;

fn factorial_ratio(l: i64, parts: [i64; 4]) -> BigUint {
    // l!/(a!b!c!d!) as a product of binomials
    let mut rest = l;
    let mut out = BigUint::from(1u32);
    for k in parts {
        out *= binomial(rest, k);
        rest -= k;
    }
    out
}

/// Step counts `(n_↑, n_↓, n_→, n_←)` of length-`l` walks to `(x, y)`,
/// one entry per admissible `n_↑`.
fn step_vectors(l: i64, x: i64, y: i64) -> Vec<[i64; 4]> {
    let mut out = Vec::new();
    if l < x.abs() + y.abs() || (l + x + y).rem_euclid(2) != 0 {
        return out;
    }
    for up in y.max(0)..=l {
        let down = up - y;
        let m = l - up - down;
        if m < x.abs() {
            if m < 0 {
                break;
            }
            continue;
        }
        out.push([up, down, (m + x) / 2, (m - x) / 2]);
    }
    out
}

/// `N_unc(l; x, y) = Σ l!/(n_↑! n_↓! n_→! n_←!)`, zero on parity mismatch.
pub fn count_unconstrained(l: i64, x: i64, y: i64) -> BigUint {
    step_vectors(l, x, y).into_iter().map(|v| factorial_ratio(l, v)).sum()
}

/// Gaussian-integral approximation `ln(√(2πσ²) e^{B(μ)})`.
///
/// `B` is the log multinomial continued through `ln Γ`; `μ` is the
/// stationary point `(l² - x² + 2ly + y²)/(4l)` and `σ² = -1/B''(μ)`.
pub fn ln_unconstrained_gaussian(l: f64, x: f64, y: f64) -> Result<f64> {
    if !(l > x.abs() + y.abs()) {
        return Err(Error::InvalidInput(format!("need l > |x| + |y|, got l = {l}, ({x}, {y})")));
    }
    let mu = (l * l - x * x + 2.0 * l * y + y * y) / (4.0 * l);
    let parts = [mu, mu - y, (l - 2.0 * mu + y + x) / 2.0, (l - 2.0 * mu + y - x) / 2.0];
    let b = ln_gamma(l + 1.0) - parts.iter().map(|&k| ln_gamma(k + 1.0)).sum::<f64>();
    let curvature: f64 = parts.iter().map(|k| 1.0 / k).sum();
    let sigma2 = 1.0 / curvature;
    Ok(0.5 * (2.0 * std::f64::consts::PI * sigma2).ln() + b)
}

/// Leading-order closed form
/// `l ln 4 + 2l ln l - Σ_± (l±x±y)/2 · ln(l±x±y)`.
pub fn ln_unconstrained_leading(l: f64, x: f64, y: f64) -> f64 {
    let term = |s: f64| if s > 0.0 { 0.5 * s * s.ln() } else { 0.0 };
    l * 4f64.ln() + 2.0 * l * l.ln() - term(l + x + y) - term(l + x - y) - term(l - x + y) - term(l - x - y)
}

/// Large-`l` series `l ln 4 - r²/l - r⁴/(6l³) - 2x²y²/(3l³)`.
pub fn ln_unconstrained_expansion(l: f64, x: f64, y: f64) -> f64 {
    let r2 = x * x + y * y;
    l * 4f64.ln() - r2 / l - r2 * r2 / (6.0 * l.powi(3)) - 2.0 * x * x * y * y / (3.0 * l.powi(3))
}

/// The same series per unit length in polar form:
/// `ln 4 - (r/l)² + (cos 4θ - 3)(r/l)⁴/12`.
pub fn ln_unconstrained_polar(l: f64, r: f64, theta: f64) -> f64 {
    let q = r / l;
    4f64.ln() - q * q + ((4.0 * theta).cos() - 3.0) * q.powi(4) / 12.0
}

/// Self-avoiding non-contractible cycles of length `l`, by depth-first search
/// from each cycle's smallest vertex.
pub fn exact_constrained_small(geom: &CodeGeometry, l: usize) -> Result<BigUint> {
    if l < geom.d() || l % 2 == 1 {
        return Ok(BigUint::zero());
    }
    struct Search<'a> {
        geom: &'a CodeGeometry,
        l: usize,
        start: usize,
        visited: Vec<bool>,
        nodes: u64,
        found: u128,
    }
    const STEPS: [(i32, i32); 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
    impl Search<'_> {
        fn go(&mut self, x: i32, y: i32, depth: usize) -> Result<()> {
            self.nodes += 1;
            if self.nodes > BACKTRACK_GUARD {
                return Err(Error::GuardExceeded { count: self.nodes as u128, limit: BACKTRACK_GUARD as u128 });
            }
            let remaining = self.l - depth;
            for (dx, dy) in STEPS {
                let (v, _) = self.geom.reduce(x + dx, y + dy);
                if v == self.start {
                    // close only with a nonzero lift and at full length
                    let lifted_home = (x + dx, y + dy) != self.geom.coords(self.start);
                    if remaining == 1 && lifted_home {
                        self.found += 1;
                    }
                    continue;
                }
                if v < self.start || self.visited[v] || remaining <= 1 {
                    continue;
                }
                if self.geom.distance(v, self.start) as usize > remaining - 1 {
                    continue;
                }
                self.visited[v] = true;
                self.go(x + dx, y + dy, depth + 1)?;
                self.visited[v] = false;
            }
            Ok(())
        }
    }
    let mut total: u128 = 0;
    for start in 0..geom.vertex_count() {
        let mut s = Search {
            geom,
            l,
            start,
            visited: vec![false; geom.vertex_count()],
            nodes: 0,
            found: 0,
        };
        s.visited[start] = true;
        let (x, y) = geom.coords(start);
        s.go(x, y, 0)?;
        total += s.found;
    }
    // each cycle is found once per direction
    Ok(BigUint::from(total / 2))
}

/// Primitive lattice vectors (up to sign) with `|λ|₁ <= l`, grouped into
/// orbits of the square's symmetry group. The torus lattice is invariant
/// under that group in both orientations, so all members of an orbit carry
/// the same number of cycles.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindingFamily {
    pub lift: (i64, i64),
    /// Orbit size up to sign.
    pub multiplicity: usize,
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

fn sign_normal((x, y): (i64, i64)) -> (i64, i64) {
    if x < 0 || (x == 0 && y < 0) {
        (-x, -y)
    } else {
        (x, y)
    }
}

fn orbit((x, y): (i64, i64)) -> std::collections::BTreeSet<(i64, i64)> {
    [(x, y), (-x, y), (x, -y), (-x, -y), (y, x), (-y, x), (y, -x), (-y, -x)].into_iter().map(sign_normal).collect()
}

fn orbit_rep(v: (i64, i64)) -> (i64, i64) {
    *orbit(v).iter().next_back().unwrap()
}

pub fn winding_families(geom: &CodeGeometry, l: usize) -> Vec<WindingFamily> {
    let [(ax, ay), (bx, by)] = geom.periods();
    let k = (l / geom.d()) as i64;
    let mut orbits: BTreeMap<(i64, i64), std::collections::BTreeSet<(i64, i64)>> = BTreeMap::new();
    for a in -k..=k {
        for b in -k..=k {
            if (a, b) == (0, 0) || gcd(a, b) != 1 {
                continue;
            }
            let v = (a * ax as i64 + b * bx as i64, a * ay as i64 + b * by as i64);
            if (v.0.abs() + v.1.abs()) as usize > l {
                continue;
            }
            orbits.insert(orbit_rep(v), orbit(v));
        }
    }
    orbits.into_iter().map(|(lift, orbit)| WindingFamily { lift, multiplicity: orbit.len() }).collect()
}

/// Uniform random walk of length `l` with displacement `(x, y)`, as unit steps.
pub fn sample_walk<R: rand::Rng + ?Sized>(l: i64, x: i64, y: i64, rng: &mut R) -> Result<Vec<(i32, i32)>> {
    let vectors = step_vectors(l, x, y);
    if vectors.is_empty() {
        return Err(Error::InvalidInput(format!("no walks of length {l} to ({x}, {y})")));
    }
    let ln_w: Vec<f64> = vectors.iter().map(|v| ln_big(&factorial_ratio(l, *v))).collect();
    let top = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dist = WeightedIndex::new(ln_w.iter().map(|w| (w - top).exp())).map_err(|e| Error::InvalidInput(e.to_string()))?;
    Ok(shuffled_steps(&vectors[dist.sample(rng)], rng))
}

fn shuffled_steps<R: rand::Rng + ?Sized>(v: &[i64; 4], rng: &mut R) -> Vec<(i32, i32)> {
    let mut steps = Vec::with_capacity(v.iter().sum::<i64>() as usize);
    for (k, dir) in [(0, 1), (0, -1), (1, 0), (-1, 0)].into_iter().enumerate() {
        steps.extend(std::iter::repeat_n(dir, v[k] as usize));
    }
    steps.shuffle(rng);
    steps
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub l: usize,
    pub estimate: f64,
    pub sigma: f64,
    pub exact: bool,
    /// Cycles per starting vertex in the family of the first period,
    /// `f · N_unc(l; λ₀)`. This is the quantity the size extrapolation uses.
    pub per_root: f64,
    pub per_root_sigma: f64,
    pub samples: u64,
    pub accepted: u64,
    /// One-sided 95% bound when nothing was accepted.
    pub upper_bound: Option<f64>,
}

impl CurvePoint {
    pub fn ln_estimate(&self) -> f64 {
        self.estimate.ln()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstrainedCurve {
    pub orientation: Orientation,
    pub d: usize,
    pub n: usize,
    pub points: Vec<CurvePoint>,
}

impl ConstrainedCurve {
    /// `√(n/2)`, the length scale behind `l̂`.
    pub fn scale(&self) -> f64 {
        (self.n as f64 / 2.0).sqrt()
    }

    pub fn get(&self, l: usize) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.l == l)
    }
}

/// Estimate `N_con(l)` by drawing uniform walks in every winding family and
/// keeping the fraction that close into self-avoiding cycles on the torus.
/// `samples` is spent per family. At `l = d` the count is exact.
pub fn sample_constrained(geom: &CodeGeometry, l: usize, samples: u64, seed: u64) -> Result<CurvePoint> {
    let d = geom.d();
    if l < d || l % 2 == 1 {
        return Ok(CurvePoint {
            l,
            estimate: 0.0,
            sigma: 0.0,
            exact: true,
            per_root: 0.0,
            per_root_sigma: 0.0,
            samples: 0,
            accepted: 0,
            upper_bound: None,
        });
    }
    let families = winding_families(geom, l);
    let [g1, _] = geom.periods();
    let primary = families.iter().position(|f| f.lift == orbit_rep((g1.0 as i64, g1.1 as i64)));
    let (mut per_root, mut per_root_sigma) = (0.0, 0.0);
    let vertices = geom.vertex_count() as f64;
    let mut estimate = 0.0;
    let mut var = 0.0;
    let mut total_samples = 0;
    let mut total_accepted = 0;
    let mut upper = 0.0;
    let mut all_exact = true;
    for (k, fam) in families.iter().enumerate() {
        let (x, y) = fam.lift;
        // at l = d every walk is a monotone staircase shorter than any other
        // period, so none revisits a vertex; longer tight walks can
        let tight = l == d && (x.abs() + y.abs()) as usize == l;
        let unc = count_unconstrained(l as i64, x, y);
        // cycles rooted at every vertex, read in the direction of +λ
        let scale = vertices * unc.to_f64().unwrap_or(f64::INFINITY) / l as f64 * fam.multiplicity as f64;
        let unc = unc.to_f64().unwrap_or(f64::INFINITY);
        if tight {
            estimate += scale;
            if Some(k) == primary {
                per_root = unc;
            }
            continue;
        }
        all_exact = false;
        let accepted = sample_fraction(geom, l as i64, (x, y), samples, rng_stream(seed, k as u64))?;
        let f = accepted as f64 / samples as f64;
        estimate += scale * f;
        var += scale * scale * f * (1.0 - f) / samples as f64;
        if Some(k) == primary {
            per_root = unc * f;
            per_root_sigma = unc * (f * (1.0 - f) / samples as f64).sqrt();
        }
        if accepted == 0 {
            upper += scale * 3.0 / samples as f64;
        }
        total_samples += samples;
        total_accepted += accepted;
    }
    Ok(CurvePoint {
        l,
        estimate,
        sigma: var.sqrt(),
        exact: all_exact,
        per_root,
        per_root_sigma,
        samples: total_samples,
        accepted: total_accepted,
        upper_bound: (total_accepted == 0 && !all_exact).then_some(estimate + upper),
    })
}

fn sample_fraction(
    geom: &CodeGeometry,
    l: i64,
    (x, y): (i64, i64),
    samples: u64,
    mut rng: rand_chacha::ChaCha8Rng,
) -> Result<u64> {
    let vectors = step_vectors(l, x, y);
    let ln_w: Vec<f64> = vectors.iter().map(|v| ln_big(&factorial_ratio(l, *v))).collect();
    let top = ln_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let dist = WeightedIndex::new(ln_w.iter().map(|w| (w - top).exp())).map_err(|e| Error::InvalidInput(e.to_string()))?;
    let mut stamp = vec![0u64; geom.vertex_count()];
    let mut accepted = 0;
    for s in 1..=samples {
        let steps = shuffled_steps(&vectors[dist.sample(&mut rng)], &mut rng);
        let (mut cx, mut cy) = (0i32, 0i32);
        let mut ok = true;
        // the final step returns to the start, whose stamp is set last
        for &(dx, dy) in &steps[..steps.len() - 1] {
            cx += dx;
            cy += dy;
            let (v, _) = geom.reduce(cx, cy);
            if v == 0 || stamp[v] == s {
                ok = false;
                break;
            }
            stamp[v] = s;
        }
        if ok {
            accepted += 1;
        }
    }
    Ok(accepted)
}

/// A curve over `ls`, sampled in parallel (one stream family per length).
pub fn constrained_curve(geom: &CodeGeometry, ls: &[usize], samples: u64, seed: u64) -> Result<ConstrainedCurve> {
    let points = ls
        .par_iter()
        .map(|&l| sample_constrained(geom, l, samples, seed.wrapping_add((l as u64) << 32)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstrainedCurve { orientation: geom.orientation(), d: geom.d(), n: geom.n(), points })
}

/// Resample with four times the budget until `σ <= rel · N̂` or the
/// per-family budget `max_samples` is spent.
pub fn sample_constrained_to_accuracy(
    geom: &CodeGeometry,
    l: usize,
    rel: f64,
    max_samples: u64,
    seed: u64,
) -> Result<CurvePoint> {
    let mut samples = 10_000.min(max_samples).max(1);
    loop {
        let pt = sample_constrained(geom, l, samples, seed)?;
        if pt.exact || (pt.estimate > 0.0 && pt.sigma <= rel * pt.estimate) || samples >= max_samples {
            return Ok(pt);
        }
        samples = (samples * 4).min(max_samples);
    }
}

pub fn constrained_curve_to_accuracy(
    geom: &CodeGeometry,
    ls: &[usize],
    rel: f64,
    max_samples: u64,
    seed: u64,
) -> Result<ConstrainedCurve> {
    let points = ls
        .par_iter()
        .map(|&l| sample_constrained_to_accuracy(geom, l, rel, max_samples, seed.wrapping_add((l as u64) << 32)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConstrainedCurve { orientation: geom.orientation(), d: geom.d(), n: geom.n(), points })
}

/// Exact `N_con(d)` from the tight-path relations.
pub fn ncon_at_distance(orientation: Orientation, d: usize) -> BigUint {
    let d_i = d as i64;
    match orientation {
        Orientation::Square => BigUint::from(2 * d),
        Orientation::Rotated => BigUint::from(d) * count_unconstrained(d_i, d_i / 2, d_i / 2) + BigUint::from(d),
    }
}

/// Fit of `v(n) = A - (B/√n) ln(C√n)`, linear in `(A, B, B ln C)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtrapolationFit {
    pub lhat: f64,
    pub a: f64,
    pub a_err: f64,
    pub b: f64,
    pub c: f64,
    pub chi2: f64,
    pub residuals: Vec<f64>,
    pub sizes: usize,
    /// Fewer than four sizes or a singular design.
    pub degenerate: bool,
}

/// `(n, value, sigma)` triples at fixed `l̂`.
pub fn fit_finite_size(lhat: f64, data: &[(f64, f64, f64)]) -> ExtrapolationFit {
    let degenerate = |sizes| ExtrapolationFit {
        lhat,
        a: f64::NAN,
        a_err: f64::NAN,
        b: f64::NAN,
        c: f64::NAN,
        chi2: f64::NAN,
        residuals: Vec::new(),
        sizes,
        degenerate: true,
    };
    if data.len() < 4 {
        return degenerate(data.len());
    }
    let design: Vec<Vec<f64>> = data
        .iter()
        .map(|&(n, _, _)| {
            let r = n.sqrt();
            vec![1.0, -r.ln() / r, -1.0 / r]
        })
        .collect();
    let y: Vec<f64> = data.iter().map(|d| d.1).collect();
    let w: Vec<f64> = data.iter().map(|d| 1.0 / (d.2 * d.2)).collect();
    let Ok(lf) = weighted_least_squares(&design, &y, &w) else {
        return degenerate(data.len());
    };
    let residuals = design
        .iter()
        .zip(&y)
        .map(|(row, yi)| yi - row.iter().zip(&lf.coef).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let (a, b, blnc) = (lf.coef[0], lf.coef[1], lf.coef[2]);
    ExtrapolationFit {
        lhat,
        a,
        a_err: lf.stderr(0) * if lf.dof > 0 { (lf.chi2 / lf.dof as f64).sqrt().max(1.0) } else { 1.0 },
        b,
        c: (blnc / b).exp(),
        chi2: lf.chi2,
        residuals,
        sizes: data.len(),
        degenerate: false,
    }
}

/// Per-`l̂` extrapolation of `ln N / √(n/2)` across sizes, with `N` the
/// per-root count of each curve interpolated in `l` by a monotone cubic.
/// Translations and the other winding families contribute only a polynomial
/// factor, which the finite-size term would otherwise have to absorb.
pub fn extrapolate_ncon(curves: &[ConstrainedCurve], lhats: &[f64]) -> Vec<ExtrapolationFit> {
    let interps: Vec<_> = curves
        .iter()
        .filter_map(|c| {
            let pts: Vec<_> = c.points.iter().filter(|p| p.per_root > 0.0).collect();
            let xs: Vec<f64> = pts.iter().map(|p| p.l as f64).collect();
            let ys: Vec<f64> = pts.iter().map(|p| p.per_root.ln()).collect();
            let rel: Vec<f64> = pts.iter().map(|p| p.per_root_sigma / p.per_root).collect();
            let value = MonotoneCubic::new(&xs, &ys).ok()?;
            let err = MonotoneCubic::new(&xs, &rel).ok()?;
            Some((c, value, err))
        })
        .collect();
    lhats
        .iter()
        .map(|&lhat| {
            let data: Vec<(f64, f64, f64)> = interps
                .iter()
                .filter_map(|(c, value, err)| {
                    let s = c.scale();
                    let mut l = lhat * s;
                    // grid points that land on an integer length up to rounding
                    if (l - l.round()).abs() < 1e-9 {
                        l = l.round();
                    }
                    let v = value.eval(l)?;
                    // exact points all get the same nominal error
                    let e = err.eval(l)?;
                    Some((c.n as f64, v / s, (e / s).max(1e-6)))
                })
                .collect();
            fit_finite_size(lhat, &data)
        })
        .collect()
}
