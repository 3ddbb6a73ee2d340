//! Syndrome extraction, minimum-weight perfect matching, and homology checks.

pub mod blossom;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{CodeGeometry, Vertex, WindingClass};
use crate::noise::ErrorConfig;
use blossom::{BlossomMatcher, NONE};

/// Sorted list of flagged defect vertices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize)]
pub struct Syndrome {
    defects: Vec<Vertex>,
}

impl Syndrome {
    pub fn new(mut defects: Vec<Vertex>) -> Self {
        defects.sort_unstable();
        Syndrome { defects }
    }

    pub fn defects(&self) -> &[Vertex] {
        &self.defects
    }

    pub fn len(&self) -> usize {
        self.defects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defects.is_empty()
    }

    /// Symmetric difference with another syndrome.
    pub fn symmetric_difference(&self, other: &Syndrome) -> Syndrome {
        let (a, b) = (&self.defects, &other.defects);
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i] < b[j]) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j] < a[i] {
                out.push(b[j]);
                j += 1;
            } else {
                i += 1;
                j += 1;
            }
        }
        Syndrome { defects: out }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DecodeOutcome {
    pub correction: ErrorConfig,
    pub class: WindingClass,
    pub matched_pairs: Vec<(Vertex, Vertex)>,
}

impl DecodeOutcome {
    pub fn failed(&self) -> bool {
        self.class.is_failure()
    }
}

pub fn extract_syndrome(geom: &CodeGeometry, e: &ErrorConfig) -> Syndrome {
    Syndrome { defects: e.boundary(geom) }
}

/// Homology class of a closed edge set.
pub fn winding_class(geom: &CodeGeometry, cycle: &ErrorConfig) -> Result<WindingClass> {
    let boundary = cycle.boundary(geom);
    if !boundary.is_empty() {
        return Err(Error::NotACycle(boundary.len()));
    }
    Ok(geom.cut_parity(cycle))
}

/// Reusable minimum-weight matching decoder over one geometry.
///
/// Holds scratch buffers, so use one instance per worker thread.
#[derive(Debug, Clone)]
pub struct Decoder<'g> {
    geom: &'g CodeGeometry,
    matcher: BlossomMatcher,
    edges: Vec<(usize, usize, i64)>,
    parity: Vec<bool>,
    touched: Vec<Vertex>,
    defects: Vec<Vertex>,
    neighbor_limit: Option<usize>,
}

impl<'g> Decoder<'g> {
    pub fn new(geom: &'g CodeGeometry) -> Self {
        Decoder {
            geom,
            matcher: BlossomMatcher::new(),
            edges: Vec::new(),
            parity: vec![false; geom.vertex_count()],
            touched: Vec::new(),
            defects: Vec::new(),
            neighbor_limit: None,
        }
    }

    /// Restrict candidate edges to each defect's `k` nearest partners.
    ///
    /// Not exact in general. Falls back to the complete graph whenever the
    /// pruned graph has no perfect matching.
    pub fn with_neighbor_limit(mut self, k: Option<usize>) -> Self {
        self.neighbor_limit = k;
        self
    }

    pub fn geometry(&self) -> &'g CodeGeometry {
        self.geom
    }

    /// Defects of `e` into the internal buffer (sorted).
    fn load_syndrome(&mut self, e: &ErrorConfig) {
        self.touched.clear();
        for edge in e.iter_ones() {
            for v in self.geom.edge_endpoints(edge) {
                self.parity[v] ^= true;
                self.touched.push(v);
            }
        }
        self.defects.clear();
        for &v in &self.touched {
            if self.parity[v] {
                self.defects.push(v);
                self.parity[v] = false;
            }
        }
        self.defects.sort_unstable();
    }

    /// Perfect matching of `defects`; returns local `mate` indices.
    fn solve(&mut self, defects: &[Vertex]) -> Result<Vec<usize>> {
        let k = defects.len();
        if k % 2 == 1 {
            return Err(Error::OddSyndrome(k));
        }
        if k == 0 {
            return Ok(Vec::new());
        }
        if k == 2 {
            return Ok(vec![1, 0]);
        }
        let geom = self.geom;
        if let Some(limit) = self.neighbor_limit.filter(|&l| k > 2 * l + 2) {
            self.edges.clear();
            let mut maxd = 0;
            let mut near: Vec<(u32, usize)> = Vec::with_capacity(k);
            let mut chosen = std::collections::BTreeSet::new();
            for i in 0..k {
                near.clear();
                near.extend((0..k).filter(|&j| j != i).map(|j| (geom.distance(defects[i], defects[j]), j)));
                near.sort_unstable();
                for &(dist, j) in near.iter().take(limit) {
                    chosen.insert((i.min(j), i.max(j)));
                    maxd = maxd.max(dist as i64);
                }
            }
            self.edges.extend(chosen.into_iter().map(|(i, j)| {
                (i, j, maxd + 1 - geom.distance(defects[i], defects[j]) as i64)
            }));
            let mate = self.matcher.solve(k, &self.edges, true);
            if mate.iter().all(|&m| m != NONE) {
                return Ok(mate.to_vec());
            }
        }
        Ok(blossom::min_weight_perfect_matching(&mut self.matcher, k, &mut self.edges, |i, j| {
            geom.distance(defects[i], defects[j]) as i64
        }))
    }

    fn pairs_from(defects: &[Vertex], mate: &[usize]) -> Vec<(Vertex, Vertex)> {
        (0..defects.len()).filter(|&i| mate[i] > i).map(|i| (defects[i], defects[mate[i]])).collect()
    }

    /// Minimum-weight pairing of the defects of `s`.
    pub fn match_syndrome(&mut self, s: &Syndrome) -> Result<Vec<(Vertex, Vertex)>> {
        for &v in s.defects() {
            if v >= self.geom.vertex_count() {
                return Err(Error::InvalidVertex { index: v, count: self.geom.vertex_count() });
            }
        }
        let mate = self.solve(s.defects())?;
        Ok(Self::pairs_from(s.defects(), &mate))
    }

    /// Correction edge set realising the minimum-weight matching.
    pub fn mwpm_correction(&mut self, s: &Syndrome) -> Result<(ErrorConfig, Vec<(Vertex, Vertex)>)> {
        let pairs = self.match_syndrome(s)?;
        let mut path = Vec::new();
        for &(u, v) in &pairs {
            self.geom.push_canonical_path(u, v, &mut path);
        }
        Ok((ErrorConfig::from_edges(self.geom.n(), path), pairs))
    }

    /// Total matching weight of a syndrome.
    pub fn matching_weight(&mut self, defects: &[Vertex]) -> Result<u32> {
        let mate = self.solve(defects)?;
        Ok((0..defects.len()).filter(|&i| mate[i] > i).map(|i| self.geom.distance(defects[i], defects[mate[i]])).sum())
    }

    /// Full decode: correction, pairs and residual class.
    pub fn decode(&mut self, e: &ErrorConfig) -> Result<DecodeOutcome> {
        let s = extract_syndrome(self.geom, e);
        let (correction, matched_pairs) = self.mwpm_correction(&s)?;
        let residual = correction.xor(e);
        let class = winding_class(self.geom, &residual)?;
        Ok(DecodeOutcome { correction, class, matched_pairs })
    }

    /// Residual class of `e` after decoding, without materialising the correction.
    pub fn failure_class(&mut self, e: &ErrorConfig) -> WindingClass {
        self.load_syndrome(e);
        let defects = std::mem::take(&mut self.defects);
        let class = self.correction_class(&defects).expect("boundary has even size") ^ self.geom.cut_parity(e);
        self.defects = defects;
        class
    }

    /// Cut parities of the correction chosen for `defects`.
    pub fn correction_class(&mut self, defects: &[Vertex]) -> Result<WindingClass> {
        let mate = self.solve(defects)?;
        let mut class = WindingClass::TRIVIAL;
        for i in 0..defects.len() {
            if mate[i] > i {
                class = class ^ self.geom.path_class(defects[i], defects[mate[i]]);
            }
        }
        Ok(class)
    }
}

/// Convenience one-shot decode.
pub fn decode(geom: &CodeGeometry, e: &ErrorConfig) -> Result<DecodeOutcome> {
    Decoder::new(geom).decode(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Orientation;
    use crate::noise::{rng_stream, sample_error, NoiseParams};

    fn brute_pairing(geom: &CodeGeometry, defects: &mut Vec<Vertex>) -> u32 {
        if defects.is_empty() {
            return 0;
        }
        let a = defects.remove(0);
        let mut best = u32::MAX;
        for i in 0..defects.len() {
            let b = defects.remove(i);
            best = best.min(geom.distance(a, b) + brute_pairing(geom, defects));
            defects.insert(i, b);
        }
        defects.insert(0, a);
        best
    }

    fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
        fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
            if cur.len() == k {
                f(cur);
                return;
            }
            for i in start..n {
                cur.push(i);
                rec(i + 1, n, k, cur, f);
                cur.pop();
            }
        }
        rec(0, n, k, &mut Vec::new(), f);
    }

    #[test]
    fn syndrome_basics() {
        let g = CodeGeometry::new(Orientation::Square, 6).unwrap();
        assert!(extract_syndrome(&g, &ErrorConfig::zeros(g.n())).is_empty());
        let e = ErrorConfig::from_edges(g.n(), [7]);
        let mut ends = g.edge_endpoints(7).to_vec();
        ends.sort();
        assert_eq!(extract_syndrome(&g, &e).defects(), &ends[..]);
        let [l1, l2] = g.logical_generators();
        assert!(extract_syndrome(&g, &l1).is_empty());
        assert!(extract_syndrome(&g, &l2).is_empty());
        // linearity
        let a = ErrorConfig::from_edges(g.n(), [1, 2, 30]);
        let b = ErrorConfig::from_edges(g.n(), [2, 3, 44]);
        assert_eq!(
            extract_syndrome(&g, &a.xor(&b)),
            extract_syndrome(&g, &a).symmetric_difference(&extract_syndrome(&g, &b))
        );
    }

    #[test]
    fn winding_of_generators() {
        let g = CodeGeometry::new(Orientation::Rotated, 8).unwrap();
        let [l1, l2] = g.logical_generators();
        assert_eq!(winding_class(&g, &ErrorConfig::zeros(g.n())).unwrap(), WindingClass::TRIVIAL);
        assert_eq!(winding_class(&g, &l1).unwrap(), WindingClass::HORIZONTAL);
        assert_eq!(winding_class(&g, &l1.xor(&l2)).unwrap(), WindingClass::DIAGONAL);
        assert_eq!(winding_class(&g, &ErrorConfig::from_edges(g.n(), [0])), Err(Error::NotACycle(2)));
    }

    #[test]
    fn trivial_corrections() {
        let g = CodeGeometry::new(Orientation::Square, 4).unwrap();
        let mut dec = Decoder::new(&g);
        let (c, pairs) = dec.mwpm_correction(&Syndrome::default()).unwrap();
        assert!(c.is_empty() && pairs.is_empty());
        let [a, b] = g.edge_endpoints(5);
        let (c, _) = dec.mwpm_correction(&Syndrome::new(vec![a, b])).unwrap();
        assert_eq!(c.iter_ones().collect::<Vec<_>>(), vec![5]);
        assert_eq!(dec.mwpm_correction(&Syndrome::new(vec![0, 1, 2])).unwrap_err(), Error::OddSyndrome(3));
    }

    #[test]
    fn matching_is_minimal_on_all_small_syndromes() {
        for o in Orientation::ALL {
            let g = CodeGeometry::new(o, 4).unwrap();
            let mut dec = Decoder::new(&g);
            for w in 1..=4 {
                combinations(g.n(), w, &mut |edges| {
                    let e = ErrorConfig::from_edges(g.n(), edges.iter().copied());
                    let s = extract_syndrome(&g, &e);
                    let out = dec.decode(&e).unwrap();
                    let total: u32 = out.matched_pairs.iter().map(|&(u, v)| g.distance(u, v)).sum();
                    assert_eq!(total, brute_pairing(&g, &mut s.defects().to_vec()));
                    assert_eq!(out.correction.weight() as u32, total);
                    assert_eq!(extract_syndrome(&g, &out.correction), s);
                    assert_eq!(dec.failure_class(&e), out.class);
                });
            }
        }
    }

    #[test]
    fn short_errors_never_fail() {
        for o in Orientation::ALL {
            for d in [4, 6] {
                let g = CodeGeometry::new(o, d).unwrap();
                let mut dec = Decoder::new(&g);
                for w in 1..d / 2 {
                    combinations(g.n(), w, &mut |edges| {
                        let e = ErrorConfig::from_edges(g.n(), edges.iter().copied());
                        assert!(!dec.failure_class(&e).is_failure(), "{o} d={d} {edges:?}");
                    });
                }
            }
        }
    }

    #[test]
    fn half_row_fails_on_square_lattice() {
        let g = CodeGeometry::new(Orientation::Square, 6).unwrap();
        // a row of length 6 split into two halves of 3 flips: the defects are
        // tied at distance 3 both ways, so exactly one half is miscorrected
        let half = |x0: i32| {
            let row: Vec<_> = (x0..x0 + 3).map(|x| 2 * g.reduce(x, 0).0).collect();
            decode(&g, &ErrorConfig::from_edges(g.n(), row)).unwrap()
        };
        let (a, b) = (half(0), half(3));
        assert_ne!(a.failed(), b.failed());
        let failing = if a.failed() { a } else { b };
        assert_eq!(failing.class, WindingClass::HORIZONTAL);
    }

    #[test]
    fn stabilizer_applied_preserves_success() {
        for o in Orientation::ALL {
            let g = CodeGeometry::new(o, 4).unwrap();
            let mut dec = Decoder::new(&g);
            // plaquette cycles: the four edges around a unit square
            let plaquettes: Vec<ErrorConfig> = (0..g.vertex_count())
                .map(|v| {
                    let (x, y) = g.coords(v);
                    let right = g.reduce(x + 1, y).0;
                    let up = g.reduce(x, y + 1).0;
                    ErrorConfig::from_edges(g.n(), [2 * v, 2 * v + 1, 2 * right + 1, 2 * up])
                })
                .collect();
            for w in 1..=3 {
                combinations(g.n(), w, &mut |edges| {
                    let e = ErrorConfig::from_edges(g.n(), edges.iter().copied());
                    let base = dec.failure_class(&e);
                    for s in &plaquettes {
                        assert_eq!(dec.failure_class(&e.xor(s)), base);
                    }
                });
            }
        }
    }

    #[test]
    fn pruned_matching_agrees_on_random_syndromes() {
        let g = CodeGeometry::new(Orientation::Square, 12).unwrap();
        let noise = NoiseParams::new(0.08).unwrap();
        let mut exact = Decoder::new(&g);
        let mut pruned = Decoder::new(&g).with_neighbor_limit(Some(16));
        let mut rng = rng_stream(17, 0);
        for _ in 0..2000 {
            let e = sample_error(&g, &noise, &mut rng);
            let s = extract_syndrome(&g, &e);
            assert_eq!(exact.matching_weight(s.defects()).unwrap(), pruned.matching_weight(s.defects()).unwrap());
        }
    }

    #[test]
    fn decoding_is_deterministic() {
        let g = CodeGeometry::new(Orientation::Rotated, 10).unwrap();
        let noise = NoiseParams::new(0.1).unwrap();
        let mut rng = rng_stream(2, 3);
        let mut a = Decoder::new(&g);
        let mut b = Decoder::new(&g);
        for _ in 0..200 {
            let e = sample_error(&g, &noise, &mut rng);
            assert_eq!(a.decode(&e).unwrap(), b.decode(&e).unwrap());
        }
    }
}
