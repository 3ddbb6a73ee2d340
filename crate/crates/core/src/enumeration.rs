//! Exhaustive enumeration of fixed-weight errors.
//!
//! Besides running the implemented decoder on every configuration, this groups
//! minimum-weight errors by syndrome and by logical coset so the best and worst
//! possible minimum-weight decoders can be evaluated exactly.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CodeGeometry, Orientation, WindingClass};
use crate::matching::Decoder;
use crate::noise::ErrorConfig;

/// Largest number of combinations an enumeration will visit.
pub const COMBINATION_GUARD: u128 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecoderPolicy {
    /// The matching decoder of this crate.
    Implemented,
    /// Corrects into the largest minimum-weight coset.
    Best,
    /// Corrects into the smallest nonempty minimum-weight coset.
    Worst,
}

impl DecoderPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            DecoderPolicy::Implemented => "implemented",
            DecoderPolicy::Best => "best",
            DecoderPolicy::Worst => "worst",
        }
    }
}

impl fmt::Display for DecoderPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DecoderPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "implemented" | "mwpm" => Ok(DecoderPolicy::Implemented),
            "best" => Ok(DecoderPolicy::Best),
            "worst" => Ok(DecoderPolicy::Worst),
            other => Err(Error::InvalidInput(format!("unknown decoder policy '{other}'"))),
        }
    }
}

/// Counts indexed by error weight and residual winding class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyResult {
    pub orientation: Orientation,
    pub d: usize,
    pub n: usize,
    pub policy: DecoderPolicy,
    /// weight -> counts per class index (0 = success).
    pub counts: BTreeMap<usize, [u64; 4]>,
}

impl TallyResult {
    pub fn new(geom: &CodeGeometry, policy: DecoderPolicy) -> Self {
        TallyResult {
            orientation: geom.orientation(),
            d: geom.d(),
            n: geom.n(),
            policy,
            counts: BTreeMap::new(),
        }
    }

    pub fn count(&self, w: usize, class: WindingClass) -> u64 {
        self.counts.get(&w).map_or(0, |c| c[class.index()])
    }

    /// N_fail(w): all failing classes together.
    pub fn failures(&self, w: usize) -> u64 {
        self.counts.get(&w).map_or(0, |c| c[1] + c[2] + c[3])
    }

    /// Horizontal plus vertical failures.
    pub fn straight_failures(&self, w: usize) -> u64 {
        self.counts.get(&w).map_or(0, |c| c[1] + c[2])
    }

    pub fn diagonal_failures(&self, w: usize) -> u64 {
        self.count(w, WindingClass::DIAGONAL)
    }

    pub fn weights(&self) -> impl Iterator<Item = usize> + '_ {
        self.counts.keys().copied()
    }

    /// `Σ_w N_fail(w) p^w (1-p)^{n-w}` over the tallied weights. Exact only
    /// when every weight has been tallied.
    pub fn failure_probability(&self, p: f64) -> f64 {
        let n = self.n as f64;
        self.counts
            .keys()
            .map(|&w| {
                let k = self.failures(w);
                if k == 0 {
                    return 0.0;
                }
                let w = w as f64;
                ((k as f64).ln() + w * p.ln() + (n - w) * (-p).ln_1p()).exp()
            })
            .sum()
    }

    /// Associative, commutative merge.
    pub fn merge(&mut self, other: &TallyResult) {
        for (&w, c) in &other.counts {
            let slot = self.counts.entry(w).or_insert([0; 4]);
            for k in 0..4 {
                slot[k] += c[k];
            }
        }
    }
}

/// Multiset of sorted coset sizes `(M1 >= M2 >= M3 >= M4)` over syndromes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CosetReport {
    pub orientation: Orientation,
    pub d: usize,
    pub w: usize,
    /// sorted coset sizes -> number of syndromes with that profile.
    pub profiles: BTreeMap<[u64; 4], u64>,
}

impl CosetReport {
    pub fn syndrome_count(&self) -> u64 {
        self.profiles.values().sum()
    }

    pub fn min_weight_errors(&self) -> u64 {
        self.profiles.iter().map(|(m, &c)| c * m.iter().sum::<u64>()).sum()
    }

    /// Failures of a decoder that always picks the largest coset.
    pub fn best_failures(&self) -> u64 {
        self.profiles.iter().map(|(m, &c)| c * (m.iter().sum::<u64>() - m[0])).sum()
    }

    /// Failures of a decoder that always picks the smallest nonempty coset.
    pub fn worst_failures(&self) -> u64 {
        self.profiles
            .iter()
            .map(|(m, &c)| {
                let smallest = m.iter().copied().filter(|&x| x > 0).min().unwrap_or(0);
                c * (m.iter().sum::<u64>() - smallest)
            })
            .sum()
    }
}

/// Expected failures of a decoder that picks uniformly among minimum-weight corrections.
pub fn random_decoder_expectation(report: &CosetReport) -> f64 {
    report
        .profiles
        .iter()
        .map(|(m, &count)| {
            let total: u64 = m.iter().sum();
            if total == 0 {
                return 0.0;
            }
            let t = total as f64;
            let same: f64 = m.iter().map(|&x| (x as f64 / t).powi(2)).sum();
            count as f64 * (1.0 - same) * t
        })
        .sum()
}

pub fn binomial_u128(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

fn check_guard(n: usize, w: usize) -> Result<()> {
    let count = binomial_u128(n, w);
    if count > COMBINATION_GUARD {
        return Err(Error::GuardExceeded { count, limit: COMBINATION_GUARD });
    }
    Ok(())
}

/// Visit every `w`-subset of `0..n` whose smallest element is `first`, in
/// lexicographic order.
pub fn for_each_combination_from(n: usize, w: usize, first: usize, mut f: impl FnMut(&[usize])) {
    if w == 0 {
        f(&[]);
        return;
    }
    if first + w > n {
        return;
    }
    let mut idx: Vec<usize> = (0..w).map(|i| first + i).collect();
    loop {
        f(&idx);
        // advance positions 1..w, keeping idx[0] fixed
        let mut i = w - 1;
        loop {
            if i == 0 {
                return;
            }
            if idx[i] < n - (w - i) {
                idx[i] += 1;
                for j in i + 1..w {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            i -= 1;
        }
    }
}

fn firsts(n: usize, w: usize) -> Vec<usize> {
    if w == 0 {
        vec![0]
    } else {
        (0..=n.saturating_sub(w)).collect()
    }
}

/// Run the implemented decoder on every weight-`w` error.
fn enumerate_implemented(geom: &CodeGeometry, w: usize) -> [u64; 4] {
    let n = geom.n();
    firsts(n, w)
        .into_par_iter()
        .map(|first| {
            let mut decoder = Decoder::new(geom);
            let mut e = ErrorConfig::zeros(n);
            let mut counts = [0u64; 4];
            for_each_combination_from(n, w, first, |idx| {
                for &i in idx {
                    e.flip(i);
                }
                counts[decoder.failure_class(&e).index()] += 1;
                for &i in idx {
                    e.flip(i);
                }
            });
            counts
        })
        .reduce(|| [0; 4], |a, b| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]])
}

/// Per-syndrome coset sizes of weight-`w` errors whose syndrome cannot be
/// matched with weight below `w`. The index is the cut-parity class of the error.
pub fn min_weight_cosets(geom: &CodeGeometry, w: usize) -> Result<HashMap<u128, [u64; 4]>> {
    let n = geom.n();
    if geom.vertex_count() > 128 {
        return Err(Error::Unsupported(format!(
            "coset grouping needs at most 128 defect vertices, geometry has {}",
            geom.vertex_count()
        )));
    }
    check_guard(n, w)?;
    let masks: Vec<u128> = (0..n)
        .map(|e| {
            let [a, b] = geom.edge_endpoints(e);
            (1u128 << a) ^ (1u128 << b)
        })
        .collect();
    let classes: Vec<usize> = (0..n).map(|e| geom.edge_class(e).index()).collect();
    let parts: Vec<HashMap<u128, [u64; 4]>> = firsts(n, w)
        .into_par_iter()
        .map(|first| {
            let mut decoder = Decoder::new(geom);
            let mut memo: HashMap<u128, bool> = HashMap::new();
            let mut groups: HashMap<u128, [u64; 4]> = HashMap::new();
            let mut defects = Vec::with_capacity(2 * w);
            for_each_combination_from(n, w, first, |idx| {
                let mut key = 0u128;
                let mut class = 0usize;
                for &i in idx {
                    key ^= masks[i];
                    class ^= classes[i];
                }
                let minimal = *memo.entry(key).or_insert_with(|| {
                    defects.clear();
                    let mut bits = key;
                    while bits != 0 {
                        defects.push(bits.trailing_zeros() as usize);
                        bits &= bits - 1;
                    }
                    decoder.matching_weight(&defects).expect("even boundary") as usize == w
                });
                if minimal {
                    groups.entry(key).or_insert([0; 4])[class] += 1;
                }
            });
            groups
        })
        .collect();
    let mut merged: HashMap<u128, [u64; 4]> = HashMap::new();
    for part in parts {
        for (k, v) in part {
            let slot = merged.entry(k).or_insert([0; 4]);
            for j in 0..4 {
                slot[j] += v[j];
            }
        }
    }
    Ok(merged)
}

/// Count failing weight-`w` errors under a decoder policy.
///
/// `Best` and `Worst` are defined through minimum-weight cosets and are only
/// available at `w = d/2`, where every error of that weight whose syndrome
/// admits a lighter matching is corrected by any minimum-weight decoder.
pub fn enumerate_failures(geom: &CodeGeometry, w: usize, policy: DecoderPolicy) -> Result<TallyResult> {
    let n = geom.n();
    if w > n {
        return Err(Error::InvalidInput(format!("weight {w} exceeds qubit count {n}")));
    }
    check_guard(n, w)?;
    let mut tally = TallyResult::new(geom, policy);
    let counts = match policy {
        DecoderPolicy::Implemented => enumerate_implemented(geom, w),
        DecoderPolicy::Best | DecoderPolicy::Worst => {
            if w != geom.d() / 2 {
                return Err(Error::Unsupported(format!(
                    "{policy} policy is defined at w = d/2 = {}, got {w}",
                    geom.d() / 2
                )));
            }
            let groups = min_weight_cosets(geom, w)?;
            let mut counts = [0u64; 4];
            counts[0] = binomial_u128(n, w) as u64;
            for m in groups.values() {
                let chosen = match policy {
                    // ties resolved towards the lowest class index
                    DecoderPolicy::Best => (0..4).fold(0, |b, j| if m[j] > m[b] { j } else { b }),
                    _ => (0..4).filter(|&j| m[j] > 0).fold(None, |b: Option<usize>, j| match b {
                        Some(b) if m[b] <= m[j] => Some(b),
                        _ => Some(j),
                    })
                    .unwrap(),
                };
                for j in 0..4 {
                    if j != chosen {
                        counts[j ^ chosen] += m[j];
                        counts[0] -= m[j];
                    }
                }
            }
            counts
        }
    };
    tally.counts.insert(w, counts);
    Ok(tally)
}

/// Implemented-decoder tallies for every weight in `weights`.
pub fn enumerate_weights(geom: &CodeGeometry, weights: impl IntoIterator<Item = usize>) -> Result<TallyResult> {
    let mut tally = TallyResult::new(geom, DecoderPolicy::Implemented);
    for w in weights {
        tally.merge(&enumerate_failures(geom, w, DecoderPolicy::Implemented)?);
    }
    Ok(tally)
}

pub fn coset_report(geom: &CodeGeometry, w: usize) -> Result<CosetReport> {
    let groups = min_weight_cosets(geom, w)?;
    let mut profiles = BTreeMap::new();
    for m in groups.values() {
        let mut sorted = *m;
        sorted.sort_unstable_by(|a, b| b.cmp(a));
        *profiles.entry(sorted).or_insert(0) += 1;
    }
    Ok(CosetReport { orientation: geom.orientation(), d: geom.d(), w, profiles })
}
