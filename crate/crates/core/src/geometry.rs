//! Torus lattices for the two code orientations.
//!
//! Both orientations are represented by their defect graph: the square
//! lattice `Z²` modulo a periodicity lattice `Λ`. Qubits live on the edges of
//! this graph and star-operator defects on its vertices.
//!
//! * square: `Λ = ⟨(d,0), (0,d)⟩`, `d²` vertices, `n = 2d²` edges.
//! * rotated: `Λ = ⟨(d/2,d/2), (d/2,-d/2)⟩`, `d²/2` vertices, `n = d²` edges.
//!
//! Vertices are indexed row-major over the fundamental domain
//! `0 <= x < width`, `0 <= y < height`, where `Λ` is written in the
//! triangular basis `(width, 0)`, `(shift, height)`. Edge `2v` joins `v` to its
//! `+x` neighbour and edge `2v + 1` joins `v` to its `+y` neighbour.

use std::fmt;
use std::ops::BitXor;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::ErrorConfig;

pub type Vertex = usize;
pub type EdgeIndex = usize;

/// Lattice orientation of the toric code.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Square,
    Rotated,
}

impl Orientation {
    pub const ALL: [Orientation; 2] = [Orientation::Square, Orientation::Rotated];

    /// Number of physical qubits at distance `d`.
    pub fn qubit_count(self, d: usize) -> usize {
        match self {
            Orientation::Square => 2 * d * d,
            Orientation::Rotated => d * d,
        }
    }

    /// `sqrt(n/2)`, the normalising length used for path statistics.
    pub fn half_root(self, d: usize) -> f64 {
        (self.qubit_count(d) as f64 / 2.0).sqrt()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::Square => "square",
            Orientation::Rotated => "rotated",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "square" | "standard" | "kitaev" => Ok(Orientation::Square),
            "rotated" | "diamond" | "wen" => Ok(Orientation::Rotated),
            other => Err(Error::InvalidInput(format!("unknown orientation '{other}'"))),
        }
    }
}

/// Homology class of a closed edge set, as crossing parities with the two cuts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WindingClass {
    pub h: bool,
    pub v: bool,
}

impl WindingClass {
    pub const TRIVIAL: WindingClass = WindingClass { h: false, v: false };
    pub const HORIZONTAL: WindingClass = WindingClass { h: true, v: false };
    pub const VERTICAL: WindingClass = WindingClass { h: false, v: true };
    pub const DIAGONAL: WindingClass = WindingClass { h: true, v: true };
    pub const ALL: [WindingClass; 4] =
        [Self::TRIVIAL, Self::HORIZONTAL, Self::VERTICAL, Self::DIAGONAL];

    pub fn new(h: bool, v: bool) -> Self {
        WindingClass { h, v }
    }

    pub fn index(self) -> usize {
        self.h as usize | (self.v as usize) << 1
    }

    pub fn from_index(i: usize) -> Self {
        WindingClass { h: i & 1 == 1, v: i & 2 == 2 }
    }

    pub fn is_failure(self) -> bool {
        self.h || self.v
    }

    pub fn label(self) -> &'static str {
        match (self.h, self.v) {
            (false, false) => "success",
            (true, false) => "horizontal",
            (false, true) => "vertical",
            (true, true) => "diagonal",
        }
    }
}

impl BitXor for WindingClass {
    type Output = WindingClass;

    fn bitxor(self, rhs: Self) -> Self {
        WindingClass { h: self.h ^ rhs.h, v: self.v ^ rhs.v }
    }
}

impl fmt::Display for WindingClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// A displacement on the defect torus, stored as its minimal-norm lift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusDisplacement {
    pub x: i32,
    pub y: i32,
}

impl TorusDisplacement {
    pub fn manhattan(self) -> u32 {
        self.x.unsigned_abs() + self.y.unsigned_abs()
    }
}

/// Immutable torus geometry for one orientation and distance.
#[derive(Debug, Clone)]
pub struct CodeGeometry {
    orientation: Orientation,
    d: usize,
    width: i32,
    height: i32,
    shift: i32,
    generators: [(i32, i32); 2],
    edges: Vec<[Vertex; 2]>,
    incident: Vec<[EdgeIndex; 4]>,
    edge_class: Vec<WindingClass>,
    cuts: [ErrorConfig; 2],
    min_lift: Vec<TorusDisplacement>,
}

impl CodeGeometry {
    pub fn new(orientation: Orientation, d: usize) -> Result<Self> {
        if d == 0 || d % 2 == 1 || d > 4096 {
            return Err(Error::InvalidDistance(d));
        }
        let di = d as i32;
        let half = di / 2;
        let (width, height, shift, generators) = match orientation {
            Orientation::Square => (di, di, 0, [(di, 0), (0, di)]),
            Orientation::Rotated => (di, half, half, [(half, half), (half, -half)]),
        };
        let mut geom = CodeGeometry {
            orientation,
            d,
            width,
            height,
            shift,
            generators,
            edges: Vec::new(),
            incident: Vec::new(),
            edge_class: Vec::new(),
            cuts: [ErrorConfig::zeros(0), ErrorConfig::zeros(0)],
            min_lift: Vec::new(),
        };
        let nv = geom.vertex_count();
        let n = 2 * nv;
        let mut edges = Vec::with_capacity(n);
        let mut edge_class = Vec::with_capacity(n);
        for v in 0..nv {
            let (x, y) = geom.coords(v);
            for (dx, dy) in [(1, 0), (0, 1)] {
                let (w, lift) = geom.reduce(x + dx, y + dy);
                edges.push([v, w]);
                edge_class.push(geom.lattice_class(lift));
            }
        }
        let mut incident = vec![[0usize; 4]; nv];
        for v in 0..nv {
            let (x, y) = geom.coords(v);
            let left = geom.reduce(x - 1, y).0;
            let down = geom.reduce(x, y - 1).0;
            incident[v] = [2 * v, 2 * left, 2 * v + 1, 2 * down + 1];
        }
        let mut cut_h = ErrorConfig::zeros(n);
        let mut cut_v = ErrorConfig::zeros(n);
        for (e, c) in edge_class.iter().enumerate() {
            if c.h {
                cut_h.set(e, true);
            }
            if c.v {
                cut_v.set(e, true);
            }
        }
        let min_lift = (0..nv)
            .map(|v| {
                let (x, y) = geom.coords(v);
                geom.minimal_lift(x, y)
            })
            .collect();
        geom.edges = edges;
        geom.edge_class = edge_class;
        geom.incident = incident;
        geom.cuts = [cut_h, cut_v];
        geom.min_lift = min_lift;
        Ok(geom)
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn d(&self) -> usize {
        self.d
    }

    /// Number of qubits (edges).
    pub fn n(&self) -> usize {
        2 * self.vertex_count()
    }

    pub fn vertex_count(&self) -> usize {
        (self.width * self.height) as usize
    }

    pub fn edge_count(&self) -> usize {
        self.n()
    }

    /// Periodicity vectors of the defect graph in the logical basis.
    pub fn periods(&self) -> [(i32, i32); 2] {
        self.generators
    }

    pub fn coords(&self, v: Vertex) -> (i32, i32) {
        let v = v as i32;
        (v % self.width, v / self.width)
    }

    /// Reduce a point of `Z²` into the fundamental domain. Returns the vertex
    /// and the lattice vector `λ` with `(x, y) = coords(vertex) + λ`.
    pub fn reduce(&self, x: i32, y: i32) -> (Vertex, (i32, i32)) {
        let k = y.div_euclid(self.height);
        let y0 = y - k * self.height;
        let x1 = x - k * self.shift;
        let m = x1.div_euclid(self.width);
        let x0 = x1 - m * self.width;
        let v = (y0 * self.width + x0) as Vertex;
        (v, (x - x0, y - y0))
    }

    /// Winding class of a lattice vector `λ ∈ Λ`.
    pub fn lattice_class(&self, lift: (i32, i32)) -> WindingClass {
        let [(ax, ay), (bx, by)] = self.generators;
        let det = ax * by - ay * bx;
        let a = lift.0 * by - lift.1 * bx;
        let b = ax * lift.1 - ay * lift.0;
        debug_assert!(a % det == 0 && b % det == 0, "{lift:?} is not a lattice vector");
        WindingClass { h: (a / det) % 2 != 0, v: (b / det) % 2 != 0 }
    }

    fn minimal_lift(&self, x: i32, y: i32) -> TorusDisplacement {
        let mut best = TorusDisplacement { x, y };
        for k in -2..=2 {
            for m in -2..=2 {
                let cand = TorusDisplacement {
                    x: x + k * self.shift + m * self.width,
                    y: y + k * self.height,
                };
                if cand.manhattan() < best.manhattan() {
                    best = cand;
                }
            }
        }
        best
    }

    fn check_vertex(&self, v: Vertex) -> Result<()> {
        if v >= self.vertex_count() {
            return Err(Error::InvalidVertex { index: v, count: self.vertex_count() });
        }
        Ok(())
    }

    pub fn edge_endpoints(&self, e: EdgeIndex) -> [Vertex; 2] {
        self.edges[e]
    }

    /// Edges incident to `v`, in the order `+x, -x, +y, -y`.
    pub fn incident_edges(&self, v: Vertex) -> [EdgeIndex; 4] {
        self.incident[v]
    }

    /// Cut crossing parities contributed by a single edge.
    pub fn edge_class(&self, e: EdgeIndex) -> WindingClass {
        self.edge_class[e]
    }

    /// The horizontal (index 0) and vertical (index 1) cuts.
    pub fn cuts(&self) -> &[ErrorConfig; 2] {
        &self.cuts
    }

    /// Minimal lift of the displacement from `u` to `v`.
    pub fn displacement(&self, u: Vertex, v: Vertex) -> TorusDisplacement {
        let (xu, yu) = self.coords(u);
        let (xv, yv) = self.coords(v);
        let (idx, _) = self.reduce(xv - xu, yv - yu);
        self.min_lift[idx]
    }

    /// Torus Manhattan distance without bounds checks.
    #[inline]
    pub fn distance(&self, u: Vertex, v: Vertex) -> u32 {
        self.displacement(u, v).manhattan()
    }

    /// Graph distance between two defect vertices.
    pub fn defect_distance(&self, u: Vertex, v: Vertex) -> Result<u32> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        Ok(self.distance(u, v))
    }

    /// Start vertex and lift of the canonical path joining `u` and `v`.
    ///
    /// The pair is ordered by index and the walk runs in the direction of
    /// non-negative `x`, so the result does not depend on argument order.
    fn path_frame(&self, u: Vertex, v: Vertex) -> (Vertex, Vertex, TorusDisplacement) {
        let (a, b) = if u <= v { (u, v) } else { (v, u) };
        let delta = self.displacement(a, b);
        if delta.x < 0 {
            (b, a, TorusDisplacement { x: -delta.x, y: -delta.y })
        } else {
            (a, b, delta)
        }
    }

    /// Shortest path with every x-step before every y-step.
    pub fn canonical_path(&self, u: Vertex, v: Vertex) -> Result<Vec<EdgeIndex>> {
        self.check_vertex(u)?;
        self.check_vertex(v)?;
        let mut path = Vec::new();
        self.push_canonical_path(u, v, &mut path);
        Ok(path)
    }

    pub(crate) fn push_canonical_path(&self, u: Vertex, v: Vertex, out: &mut Vec<EdgeIndex>) {
        let (start, _, delta) = self.path_frame(u, v);
        let (mut x, mut y) = self.coords(start);
        for _ in 0..delta.x {
            let (cur, _) = self.reduce(x, y);
            out.push(2 * cur);
            x += 1;
        }
        let step = delta.y.signum();
        for _ in 0..delta.y.abs() {
            if step > 0 {
                let (cur, _) = self.reduce(x, y);
                out.push(2 * cur + 1);
            } else {
                let (below, _) = self.reduce(x, y - 1);
                out.push(2 * below + 1);
            }
            y += step;
        }
    }

    /// Cut parities of `canonical_path(u, v)` computed from the lift alone.
    #[inline]
    pub fn path_class(&self, u: Vertex, v: Vertex) -> WindingClass {
        let (start, end, delta) = self.path_frame(u, v);
        let (xs, ys) = self.coords(start);
        let (xe, ye) = self.coords(end);
        self.lattice_class((xs + delta.x - xe, ys + delta.y - ye))
    }

    /// Crossing parities of an arbitrary edge set with the two cuts.
    pub fn cut_parity(&self, edges: &ErrorConfig) -> WindingClass {
        WindingClass { h: edges.parity_with(&self.cuts[0]), v: edges.parity_with(&self.cuts[1]) }
    }

    /// Minimal cycle realising a lattice vector, starting at `origin`.
    pub fn lift_cycle(&self, origin: Vertex, lift: (i32, i32)) -> Vec<EdgeIndex> {
        let (mut x, mut y) = self.coords(origin);
        let mut out = Vec::with_capacity((lift.0.abs() + lift.1.abs()) as usize);
        for _ in 0..lift.0.abs() {
            if lift.0 > 0 {
                out.push(2 * self.reduce(x, y).0);
                x += 1;
            } else {
                out.push(2 * self.reduce(x - 1, y).0);
                x -= 1;
            }
        }
        for _ in 0..lift.1.abs() {
            if lift.1 > 0 {
                out.push(2 * self.reduce(x, y).0 + 1);
                y += 1;
            } else {
                out.push(2 * self.reduce(x, y - 1).0 + 1);
                y -= 1;
            }
        }
        out
    }

    /// Weight-`d` representatives of the two logical generators through vertex 0.
    pub fn logical_generators(&self) -> [ErrorConfig; 2] {
        let n = self.n();
        let [g1, g2] = self.generators;
        [
            ErrorConfig::from_edges(n, self.lift_cycle(0, g1)),
            ErrorConfig::from_edges(n, self.lift_cycle(0, g2)),
        ]
    }

    /// Debug summary of the geometry.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "orientation": self.orientation,
            "d": self.d,
            "n": self.n(),
            "vertices": self.vertex_count(),
            "fundamental_domain": [self.width, self.height],
            "periods": self.generators,
            "cut_sizes": [self.cuts[0].weight(), self.cuts[1].weight()],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::VecDeque;

    fn bfs(geom: &CodeGeometry, src: Vertex) -> Vec<u32> {
        let mut dist = vec![u32::MAX; geom.vertex_count()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            for e in geom.incident_edges(v) {
                let [a, b] = geom.edge_endpoints(e);
                let w = if a == v { b } else { a };
                if dist[w] == u32::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    #[test]
    fn sizes_match_figure_examples() {
        let sq = CodeGeometry::new(Orientation::Square, 6).unwrap();
        assert_eq!((sq.n(), sq.vertex_count()), (72, 36));
        let rot = CodeGeometry::new(Orientation::Rotated, 12).unwrap();
        assert_eq!((rot.n(), rot.vertex_count()), (144, 72));
        let tiny = CodeGeometry::new(Orientation::Square, 2).unwrap();
        assert_eq!((tiny.n(), tiny.vertex_count()), (8, 4));
    }

    #[test]
    fn rejects_odd_or_zero_distance() {
        for d in [0, 1, 3, 7] {
            assert_eq!(
                CodeGeometry::new(Orientation::Square, d).unwrap_err(),
                Error::InvalidDistance(d)
            );
        }
    }

    #[test]
    fn every_vertex_has_degree_four() {
        for o in Orientation::ALL {
            for d in [2, 4, 6, 8] {
                let g = CodeGeometry::new(o, d).unwrap();
                let mut degree = vec![0; g.vertex_count()];
                for e in 0..g.n() {
                    for v in g.edge_endpoints(e) {
                        degree[v] += 1;
                    }
                }
                assert!(degree.iter().all(|&k| k == 4), "{o} d={d}");
                for v in 0..g.vertex_count() {
                    for e in g.incident_edges(v) {
                        assert!(g.edge_endpoints(e).contains(&v));
                    }
                }
            }
        }
    }

    #[test]
    fn distance_matches_bfs_and_wraps() {
        for o in Orientation::ALL {
            for d in [2, 4, 6, 8] {
                let g = CodeGeometry::new(o, d).unwrap();
                for u in 0..g.vertex_count() {
                    let reference = bfs(&g, u);
                    for v in 0..g.vertex_count() {
                        assert_eq!(g.distance(u, v), reference[v], "{o} d={d} {u}->{v}");
                    }
                }
            }
        }
        let g = CodeGeometry::new(Orientation::Square, 6).unwrap();
        let u = g.reduce(0, 0).0;
        let v = g.reduce(5, 0).0;
        assert_eq!(g.defect_distance(u, v).unwrap(), 1);
        assert_eq!(g.defect_distance(u, u).unwrap(), 0);
        assert!(g.defect_distance(u, 36).is_err());
    }

    #[test]
    fn triangle_inequality_exhaustive() {
        for o in Orientation::ALL {
            for d in [2, 4, 6] {
                let g = CodeGeometry::new(o, d).unwrap();
                let nv = g.vertex_count();
                for a in 0..nv {
                    for b in 0..nv {
                        let ab = g.distance(a, b);
                        assert_eq!(ab, g.distance(b, a));
                        assert_eq!(ab == 0, a == b);
                        for c in 0..nv {
                            assert!(ab <= g.distance(a, c) + g.distance(c, b));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn canonical_paths_are_geodesics_with_matching_boundary() {
        for o in Orientation::ALL {
            for d in [2, 4, 6] {
                let g = CodeGeometry::new(o, d).unwrap();
                let n = g.n();
                for u in 0..g.vertex_count() {
                    for v in 0..g.vertex_count() {
                        let path = g.canonical_path(u, v).unwrap();
                        assert_eq!(path.len() as u32, g.distance(u, v));
                        let e = ErrorConfig::from_edges(n, path.iter().copied());
                        assert_eq!(e.weight(), path.len(), "path revisits an edge");
                        let mut parity = vec![false; g.vertex_count()];
                        for edge in e.iter_ones() {
                            for w in g.edge_endpoints(edge) {
                                parity[w] ^= true;
                            }
                        }
                        let defects: Vec<_> =
                            (0..g.vertex_count()).filter(|&w| parity[w]).collect();
                        if u == v {
                            assert!(defects.is_empty());
                        } else {
                            let mut want = vec![u, v];
                            want.sort();
                            assert_eq!(defects, want);
                        }
                        // there-and-back is contractible, and the O(1) class agrees
                        let back = ErrorConfig::from_edges(n, g.canonical_path(v, u).unwrap());
                        assert_eq!(g.cut_parity(&e.xor(&back)), WindingClass::TRIVIAL);
                        assert_eq!(g.cut_parity(&e), g.path_class(u, v));
                    }
                }
            }
        }
    }

    #[test]
    fn straight_pair_gives_colinear_edges() {
        let g = CodeGeometry::new(Orientation::Square, 8).unwrap();
        let u = g.reduce(1, 2).0;
        let v = g.reduce(4, 2).0;
        let path = g.canonical_path(u, v).unwrap();
        assert_eq!(path.len(), 3);
        assert!(path.iter().all(|e| e % 2 == 0));
        assert!(path.iter().all(|&e| g.coords(g.edge_endpoints(e)[0]).1 == 2));
    }

    /// Enumerate all geodesics between two points of the plane lift.
    fn geodesics(dx: i32, dy: i32) -> Vec<Vec<(i32, i32)>> {
        fn rec(x: i32, y: i32, dx: i32, dy: i32, cur: &mut Vec<(i32, i32)>, out: &mut Vec<Vec<(i32, i32)>>) {
            if x == dx && y == dy {
                out.push(cur.clone());
                return;
            }
            if x != dx {
                cur.push((dx.signum(), 0));
                rec(x + dx.signum(), y, dx, dy, cur, out);
                cur.pop();
            }
            if y != dy {
                cur.push((0, dy.signum()));
                rec(x, y + dy.signum(), dx, dy, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(0, 0, dx, dy, &mut Vec::new(), &mut out);
        out
    }

    #[test]
    fn staircase_choice_has_no_right_turn() {
        let g = CodeGeometry::new(Orientation::Rotated, 12).unwrap();
        let u = g.reduce(0, 0).0;
        let v = g.reduce(2, 2).0;
        let all = geodesics(2, 2);
        assert_eq!(all.len(), 6);
        // a right turn switches from a y-move to an x-move
        let no_right: Vec<_> = all
            .iter()
            .filter(|steps| !steps.windows(2).any(|w| w[0].1 != 0 && w[1].0 != 0))
            .collect();
        assert_eq!(no_right.len(), 1);
        let expected: Vec<EdgeIndex> = {
            let (mut x, mut y) = (0, 0);
            no_right[0]
                .iter()
                .map(|&(sx, sy)| {
                    let e = 2 * g.reduce(x, y).0 + usize::from(sy != 0);
                    x += sx;
                    y += sy;
                    e
                })
                .collect()
        };
        assert_eq!(g.canonical_path(u, v).unwrap(), expected);
    }

    /// Shortest non-contractible cycle by BFS over the lifted plane.
    fn shortest_noncontractible(g: &CodeGeometry) -> u32 {
        // a non-contractible closed walk lifts to a walk ending at a nonzero lattice point
        let mut best = u32::MAX;
        let (ox, oy) = g.coords(0);
        let radius = 3 * g.d() as i32;
        for x in -radius..=radius {
            for y in -radius..=radius {
                let (w, lift) = g.reduce(ox + x, oy + y);
                if w == 0 && lift != (0, 0) {
                    best = best.min(x.unsigned_abs() + y.unsigned_abs());
                }
            }
        }
        best
    }

    #[test]
    fn minimum_winding_length_is_distance() {
        for o in Orientation::ALL {
            for d in [2, 4, 6, 8] {
                let g = CodeGeometry::new(o, d).unwrap();
                assert_eq!(shortest_noncontractible(&g), d as u32, "{o} d={d}");
            }
        }
    }

    #[test]
    fn cuts_detect_generators() {
        for o in Orientation::ALL {
            for d in [2, 4, 6, 8] {
                let g = CodeGeometry::new(o, d).unwrap();
                let [l1, l2] = g.logical_generators();
                assert_eq!(l1.weight(), d);
                assert_eq!(l2.weight(), d);
                assert_eq!(g.cut_parity(&l1), WindingClass::HORIZONTAL);
                assert_eq!(g.cut_parity(&l2), WindingClass::VERTICAL);
                assert_eq!(g.cut_parity(&l1.xor(&l2)), WindingClass::DIAGONAL);
            }
        }
    }

    #[test]
    fn rotated_straight_line_is_diagonal() {
        let g = CodeGeometry::new(Orientation::Rotated, 6).unwrap();
        let row = ErrorConfig::from_edges(g.n(), g.lift_cycle(0, (6, 0)));
        assert_eq!(row.weight(), 6);
        assert_eq!(g.cut_parity(&row), WindingClass::DIAGONAL);
    }
}
