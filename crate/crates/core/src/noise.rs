//! Independent bit-flip noise and the error-configuration bitset.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CodeGeometry, Vertex};

/// A subset of qubits (edges), stored as a packed bitset with cached weight.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ErrorConfig {
    words: Vec<u64>,
    len: usize,
    weight: usize,
}

impl ErrorConfig {
    pub fn zeros(len: usize) -> Self {
        ErrorConfig { words: vec![0; len.div_ceil(64)], len, weight: 0 }
    }

    /// Build from edge indices; repeated indices cancel.
    pub fn from_edges(len: usize, edges: impl IntoIterator<Item = usize>) -> Self {
        let mut e = Self::zeros(len);
        for i in edges {
            e.flip(i);
        }
        e
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        Self::from_edges(bits.len(), bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i))
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.weight == 0
    }

    pub fn weight(&self) -> usize {
        self.weight
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        self.words[i >> 6] >> (i & 63) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        if self.get(i) != value {
            self.flip(i);
        }
    }

    /// Toggle bit `i` and return its new value.
    #[inline]
    pub fn flip(&mut self, i: usize) -> bool {
        assert!(i < self.len, "edge {i} out of range {}", self.len);
        self.words[i >> 6] ^= 1 << (i & 63);
        let now = self.get(i);
        if now {
            self.weight += 1;
        } else {
            self.weight -= 1;
        }
        now
    }

    pub fn clear(&mut self) {
        self.words.iter_mut().for_each(|w| *w = 0);
        self.weight = 0;
    }

    pub fn xor_assign(&mut self, other: &ErrorConfig) {
        assert_eq!(self.len, other.len);
        let mut weight = 0;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
            weight += a.count_ones() as usize;
        }
        self.weight = weight;
    }

    pub fn xor(&self, other: &ErrorConfig) -> ErrorConfig {
        let mut out = self.clone();
        out.xor_assign(other);
        out
    }

    /// Parity of the overlap with `mask`.
    pub fn parity_with(&self, mask: &ErrorConfig) -> bool {
        let ones: u32 = self.words.iter().zip(&mask.words).map(|(a, b)| (a & b).count_ones()).sum();
        ones % 2 == 1
    }

    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(k, &w)| {
            let mut word = w;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let bit = word.trailing_zeros() as usize;
                word &= word - 1;
                Some(64 * k + bit)
            })
        })
    }

    pub fn to_bools(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.get(i)).collect()
    }

    /// Vertices of odd degree in the edge subset.
    pub fn boundary(&self, geom: &CodeGeometry) -> Vec<Vertex> {
        let mut parity = vec![false; geom.vertex_count()];
        for e in self.iter_ones() {
            for v in geom.edge_endpoints(e) {
                parity[v] ^= true;
            }
        }
        (0..parity.len()).filter(|&v| parity[v]).collect()
    }
}

impl Serialize for ErrorConfig {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            n: usize,
            edges: Vec<usize>,
        }
        Repr { n: self.len, edges: self.iter_ones().collect() }.serialize(s)
    }
}

/// Bit-flip probability with its Boltzmann weight `β = ln((1-p)/p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub p: f64,
    pub beta: f64,
}

impl NoiseParams {
    /// Admissible range is `0 <= p < 1/2`.
    pub fn new(p: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&p) {
            return Err(Error::InvalidProbability(p));
        }
        let beta = if p == 0.0 { f64::INFINITY } else { ((1.0 - p) / p).ln() };
        Ok(NoiseParams { p, beta })
    }

    /// Natural log of the probability of one specific configuration.
    pub fn log_probability(&self, e: &ErrorConfig) -> f64 {
        let w = e.weight() as f64;
        let n = e.len() as f64;
        if self.p == 0.0 {
            return if e.weight() == 0 { 0.0 } else { f64::NEG_INFINITY };
        }
        w * self.p.ln() + (n - w) * (-self.p).ln_1p()
    }
}

pub fn sample_error<R: Rng + ?Sized>(geom: &CodeGeometry, noise: &NoiseParams, rng: &mut R) -> ErrorConfig {
    let mut e = ErrorConfig::zeros(geom.n());
    sample_into(&mut e, noise.p, rng);
    e
}

/// Overwrite `e` with a fresh i.i.d. draw.
pub fn sample_into<R: Rng + ?Sized>(e: &mut ErrorConfig, p: f64, rng: &mut R) {
    e.clear();
    if p <= 0.0 {
        return;
    }
    for i in 0..e.len() {
        if rng.random::<f64>() < p {
            e.flip(i);
        }
    }
}

/// Reproducible generator for an independent stream of a seeded experiment.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Orientation;

    #[test]
    fn bitset_basics() {
        let mut e = ErrorConfig::zeros(130);
        assert!(e.is_empty());
        assert!(e.flip(3));
        assert!(e.flip(129));
        assert!(e.flip(64));
        assert_eq!(e.weight(), 3);
        assert_eq!(e.iter_ones().collect::<Vec<_>>(), vec![3, 64, 129]);
        assert!(!e.flip(64));
        assert_eq!(e.weight(), 2);
        let f = ErrorConfig::from_edges(130, [3, 5]);
        let x = e.xor(&f);
        assert_eq!(x.iter_ones().collect::<Vec<_>>(), vec![5, 129]);
        assert!(e.parity_with(&f));
        assert_eq!(ErrorConfig::from_bools(&x.to_bools()), x);
    }

    #[test]
    fn log_probability_matches_closed_form() {
        let geom = CodeGeometry::new(Orientation::Square, 4).unwrap();
        let noise = NoiseParams::new(0.1).unwrap();
        let e = ErrorConfig::from_edges(geom.n(), [0, 7, 9]);
        let expect = 0.1f64.powi(3) * 0.9f64.powi(29);
        assert!((noise.log_probability(&e) - expect.ln()).abs() < 1e-12);
        let zero = NoiseParams::new(0.0).unwrap();
        assert_eq!(zero.log_probability(&ErrorConfig::zeros(32)), 0.0);
        assert_eq!(zero.log_probability(&e), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_out_of_range_probability() {
        for p in [-0.1, 0.5, 0.7, f64::NAN] {
            assert!(NoiseParams::new(p).is_err());
        }
    }

    #[test]
    fn p_zero_never_flips_and_streams_are_reproducible() {
        let geom = CodeGeometry::new(Orientation::Rotated, 8).unwrap();
        let noise = NoiseParams::new(0.0).unwrap();
        let mut rng = rng_stream(1, 0);
        for _ in 0..100 {
            assert!(sample_error(&geom, &noise, &mut rng).is_empty());
        }
        let noise = NoiseParams::new(0.2).unwrap();
        let a = sample_error(&geom, &noise, &mut rng_stream(9, 4));
        let b = sample_error(&geom, &noise, &mut rng_stream(9, 4));
        let c = sample_error(&geom, &noise, &mut rng_stream(9, 5));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_rate_is_close_to_p() {
        let geom = CodeGeometry::new(Orientation::Square, 10).unwrap();
        let noise = NoiseParams::new(0.07).unwrap();
        let mut rng = rng_stream(3, 0);
        let trials = 2000;
        let total: usize = (0..trials).map(|_| sample_error(&geom, &noise, &mut rng).weight()).sum();
        let rate = total as f64 / (trials * geom.n()) as f64;
        // 200k Bernoulli draws: sd ≈ 5.7e-4
        assert!((rate - 0.07).abs() < 3e-3, "rate {rate}");
    }
}
