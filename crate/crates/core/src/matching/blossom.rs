//! Maximum-weight matching on general graphs by Edmonds' blossom algorithm.
//!
//! This is the O(n³) primal-dual formulation by Galil, as popularised by
//! Joris van Rantwijk's reference implementation, rewritten over integer
//! weights with reusable buffers so repeated decodes do not reallocate.
//! Endpoint `p` of edge `k = p / 2` is the vertex `edges[k].(p % 2)`.

use std::mem::take;

pub const NONE: usize = usize::MAX;

#[derive(Debug, Default, Clone)]
pub struct BlossomMatcher {
    nvertex: usize,
    edges: Vec<(usize, usize, i64)>,
    endpoint: Vec<usize>,
    neighbend: Vec<Vec<usize>>,
    mate: Vec<usize>,
    label: Vec<i8>,
    labelend: Vec<usize>,
    inblossom: Vec<usize>,
    blossomparent: Vec<usize>,
    blossomchilds: Vec<Vec<usize>>,
    blossombase: Vec<usize>,
    blossomendps: Vec<Vec<usize>>,
    bestedge: Vec<usize>,
    blossombestedges: Vec<Vec<usize>>,
    has_best_list: Vec<bool>,
    unusedblossoms: Vec<usize>,
    dualvar: Vec<i64>,
    allowedge: Vec<bool>,
    queue: Vec<usize>,
    bestedgeto: Vec<usize>,
    // scratch
    stack: Vec<usize>,
    leafbuf: Vec<usize>,
    pathbuf: Vec<usize>,
    touched: Vec<usize>,
}

impl BlossomMatcher {
    pub fn new() -> Self {
        Self::default()
    }

    /// Compute a maximum-weight matching. With `max_cardinality` the result
    /// is the heaviest among the maximum-cardinality matchings.
    ///
    /// Returns `mate[v]`, the partner of `v` or [`NONE`].
    pub fn solve(&mut self, nvertex: usize, edges: &[(usize, usize, i64)], max_cardinality: bool) -> &[usize] {
        self.reset(nvertex, edges);
        if edges.is_empty() {
            return &self.mate;
        }
        self.run(max_cardinality);
        for v in 0..nvertex {
            if self.mate[v] != NONE {
                self.mate[v] = self.endpoint[self.mate[v]];
            }
        }
        &self.mate
    }

    fn reset(&mut self, nvertex: usize, edges: &[(usize, usize, i64)]) {
        let n = nvertex;
        self.nvertex = n;
        self.edges.clear();
        self.edges.extend_from_slice(edges);
        let maxweight = edges.iter().map(|e| e.2).max().unwrap_or(0).max(0);

        self.endpoint.clear();
        for &(i, j, _) in edges {
            debug_assert!(i != j && i < n && j < n);
            self.endpoint.push(i);
            self.endpoint.push(j);
        }
        if self.neighbend.len() < n {
            self.neighbend.resize_with(n, Vec::new);
        }
        for list in &mut self.neighbend[..n] {
            list.clear();
        }
        for (k, &(i, j, _)) in edges.iter().enumerate() {
            self.neighbend[i].push(2 * k + 1);
            self.neighbend[j].push(2 * k);
        }
        self.mate.clear();
        self.mate.resize(n, NONE);
        self.label.clear();
        self.label.resize(2 * n, 0);
        self.labelend.clear();
        self.labelend.resize(2 * n, NONE);
        self.inblossom.clear();
        self.inblossom.extend(0..n);
        self.blossomparent.clear();
        self.blossomparent.resize(2 * n, NONE);
        if self.blossomchilds.len() < 2 * n {
            self.blossomchilds.resize_with(2 * n, Vec::new);
            self.blossomendps.resize_with(2 * n, Vec::new);
            self.blossombestedges.resize_with(2 * n, Vec::new);
        }
        for b in 0..2 * n {
            self.blossomchilds[b].clear();
            self.blossomendps[b].clear();
            self.blossombestedges[b].clear();
        }
        self.has_best_list.clear();
        self.has_best_list.resize(2 * n, false);
        self.blossombase.clear();
        self.blossombase.extend(0..n);
        self.blossombase.resize(2 * n, NONE);
        self.bestedge.clear();
        self.bestedge.resize(2 * n, NONE);
        self.unusedblossoms.clear();
        self.unusedblossoms.extend(n..2 * n);
        self.dualvar.clear();
        self.dualvar.resize(n, maxweight);
        self.dualvar.resize(2 * n, 0);
        self.allowedge.clear();
        self.allowedge.resize(edges.len(), false);
        self.queue.clear();
        self.bestedgeto.clear();
        self.bestedgeto.resize(2 * n, NONE);
    }

    #[inline]
    fn slack(&self, k: usize) -> i64 {
        let (i, j, w) = self.edges[k];
        self.dualvar[i] + self.dualvar[j] - 2 * w
    }

    /// Leaf vertices of (sub-)blossom `b`, in child order.
    fn leaves_into(&mut self, b: usize, out: &mut Vec<usize>) {
        out.clear();
        let mut stack = take(&mut self.stack);
        stack.clear();
        stack.push(b);
        while let Some(t) = stack.pop() {
            if t < self.nvertex {
                out.push(t);
            } else {
                stack.extend(self.blossomchilds[t].iter().rev());
            }
        }
        self.stack = stack;
    }

    fn assign_label(&mut self, mut w: usize, mut t: i8, mut p: usize) {
        loop {
            let b = self.inblossom[w];
            debug_assert!(self.label[w] == 0 && self.label[b] == 0);
            self.label[w] = t;
            self.label[b] = t;
            self.labelend[w] = p;
            self.labelend[b] = p;
            self.bestedge[w] = NONE;
            self.bestedge[b] = NONE;
            if t == 1 {
                let mut buf = take(&mut self.leafbuf);
                self.leaves_into(b, &mut buf);
                self.queue.extend_from_slice(&buf);
                self.leafbuf = buf;
                return;
            }
            // t == 2: the mate of the base becomes an S-vertex
            let base = self.blossombase[b];
            let mb = self.mate[base];
            debug_assert!(mb != NONE);
            w = self.endpoint[mb];
            t = 1;
            p = mb ^ 1;
        }
    }

    /// Trace back from `v` and `w` to find a new blossom base or an augmenting path.
    fn scan_blossom(&mut self, mut v: usize, mut w: usize) -> usize {
        let mut path = take(&mut self.pathbuf);
        path.clear();
        let mut base = NONE;
        while v != NONE {
            let b = self.inblossom[v];
            if self.label[b] & 4 != 0 {
                base = self.blossombase[b];
                break;
            }
            debug_assert_eq!(self.label[b], 1);
            path.push(b);
            self.label[b] = 5;
            if self.labelend[b] == NONE {
                v = NONE;
            } else {
                v = self.endpoint[self.labelend[b]];
                let bt = self.inblossom[v];
                debug_assert_eq!(self.label[bt], 2);
                v = self.endpoint[self.labelend[bt]];
            }
            if w != NONE {
                std::mem::swap(&mut v, &mut w);
            }
        }
        for &b in &path {
            self.label[b] = 1;
        }
        self.pathbuf = path;
        base
    }

    fn add_blossom(&mut self, base: usize, k: usize) {
        let (mut v, mut w, _) = self.edges[k];
        let bb = self.inblossom[base];
        let mut bv = self.inblossom[v];
        let mut bw = self.inblossom[w];
        let b = self.unusedblossoms.pop().expect("blossom pool exhausted");
        self.blossombase[b] = base;
        self.blossomparent[b] = NONE;
        self.blossomparent[bb] = b;
        let mut path = take(&mut self.blossomchilds[b]);
        let mut endps = take(&mut self.blossomendps[b]);
        path.clear();
        endps.clear();
        while bv != bb {
            self.blossomparent[bv] = b;
            path.push(bv);
            endps.push(self.labelend[bv]);
            v = self.endpoint[self.labelend[bv]];
            bv = self.inblossom[v];
        }
        path.push(bb);
        path.reverse();
        endps.reverse();
        endps.push(2 * k);
        while bw != bb {
            self.blossomparent[bw] = b;
            path.push(bw);
            endps.push(self.labelend[bw] ^ 1);
            w = self.endpoint[self.labelend[bw]];
            bw = self.inblossom[w];
        }
        debug_assert_eq!(self.label[bb], 1);
        self.blossomchilds[b] = path;
        self.blossomendps[b] = endps;
        self.label[b] = 1;
        self.labelend[b] = self.labelend[bb];
        self.dualvar[b] = 0;

        let mut leaves = take(&mut self.leafbuf);
        self.leaves_into(b, &mut leaves);
        for &lv in &leaves {
            if self.label[self.inblossom[lv]] == 2 {
                self.queue.push(lv);
            }
            self.inblossom[lv] = b;
        }

        // least-slack edges from the new blossom to each neighbouring S-blossom
        let mut bestedgeto = take(&mut self.bestedgeto);
        let mut touched = take(&mut self.touched);
        touched.clear();
        let children = take(&mut self.blossomchilds[b]);
        for &sub in &children {
            let mut consider = |me: &Self, k2: usize| {
                let (mut i, mut j, _) = me.edges[k2];
                if me.inblossom[j] == b {
                    std::mem::swap(&mut i, &mut j);
                }
                let _ = i;
                let bj = me.inblossom[j];
                if bj != b
                    && me.label[bj] == 1
                    && (bestedgeto[bj] == NONE || me.slack(k2) < me.slack(bestedgeto[bj]))
                {
                    if bestedgeto[bj] == NONE {
                        touched.push(bj);
                    }
                    bestedgeto[bj] = k2;
                }
            };
            if self.has_best_list[sub] {
                for &k2 in &self.blossombestedges[sub] {
                    consider(self, k2);
                }
            } else {
                self.leaves_into(sub, &mut leaves);
                for &lv in &leaves {
                    for &p in &self.neighbend[lv] {
                        consider(self, p / 2);
                    }
                }
            }
            self.blossombestedges[sub].clear();
            self.has_best_list[sub] = false;
            self.bestedge[sub] = NONE;
        }
        self.blossomchilds[b] = children;
        self.leafbuf = leaves;

        touched.sort_unstable();
        let mut list = take(&mut self.blossombestedges[b]);
        list.clear();
        for &bj in &touched {
            list.push(bestedgeto[bj]);
            bestedgeto[bj] = NONE;
        }
        self.bestedgeto = bestedgeto;
        self.touched = touched;
        let mut best = NONE;
        for &k2 in &list {
            if best == NONE || self.slack(k2) < self.slack(best) {
                best = k2;
            }
        }
        self.blossombestedges[b] = list;
        self.has_best_list[b] = true;
        self.bestedge[b] = best;
    }

    fn expand_blossom(&mut self, b: usize, endstage: bool) {
        let children = take(&mut self.blossomchilds[b]);
        let mut leaves = Vec::new();
        for &s in &children {
            self.blossomparent[s] = NONE;
            if s < self.nvertex {
                self.inblossom[s] = s;
            } else if endstage && self.dualvar[s] == 0 {
                self.expand_blossom(s, endstage);
            } else {
                self.leaves_into(s, &mut leaves);
                for &lv in &leaves {
                    self.inblossom[lv] = s;
                }
            }
        }
        self.blossomchilds[b] = children;

        if !endstage && self.label[b] == 2 {
            // relabel the children on the even-length path through the blossom
            let len = self.blossomchilds[b].len() as isize;
            let at = |j: isize| j.rem_euclid(len) as usize;
            let entrychild = self.inblossom[self.endpoint[self.labelend[b] ^ 1]];
            let mut j = self.blossomchilds[b].iter().position(|&c| c == entrychild).unwrap() as isize;
            let (jstep, endptrick): (isize, usize) = if j & 1 == 1 {
                j -= len;
                (1, 0)
            } else {
                (-1, 1)
            };
            let mut p = self.labelend[b];
            while j != 0 {
                self.label[self.endpoint[p ^ 1]] = 0;
                let q = self.blossomendps[b][at(j - endptrick as isize)];
                self.label[self.endpoint[q ^ endptrick ^ 1]] = 0;
                self.assign_label(self.endpoint[p ^ 1], 2, p);
                self.allowedge[q / 2] = true;
                j += jstep;
                p = self.blossomendps[b][at(j - endptrick as isize)] ^ endptrick;
                self.allowedge[p / 2] = true;
                j += jstep;
            }
            let bv = self.blossomchilds[b][at(j)];
            let ep = self.endpoint[p ^ 1];
            self.label[ep] = 2;
            self.label[bv] = 2;
            self.labelend[ep] = p;
            self.labelend[bv] = p;
            self.bestedge[bv] = NONE;
            j += jstep;
            while self.blossomchilds[b][at(j)] != entrychild {
                let bv = self.blossomchilds[b][at(j)];
                if self.label[bv] == 1 {
                    j += jstep;
                    continue;
                }
                self.leaves_into(bv, &mut leaves);
                if let Some(v) = leaves.iter().copied().find(|&v| self.label[v] != 0) {
                    debug_assert_eq!(self.label[v], 2);
                    debug_assert_eq!(self.inblossom[v], bv);
                    self.label[v] = 0;
                    self.label[self.endpoint[self.mate[self.blossombase[bv]]]] = 0;
                    self.assign_label(v, 2, self.labelend[v]);
                }
                j += jstep;
            }
        }
        self.label[b] = -1;
        self.labelend[b] = NONE;
        self.blossomchilds[b].clear();
        self.blossomendps[b].clear();
        self.blossombase[b] = NONE;
        self.blossombestedges[b].clear();
        self.has_best_list[b] = false;
        self.bestedge[b] = NONE;
        self.unusedblossoms.push(b);
    }

    /// Swap matched and unmatched edges along the path through `b` to `v`.
    fn augment_blossom(&mut self, b: usize, v: usize) {
        let mut t = v;
        while self.blossomparent[t] != b {
            t = self.blossomparent[t];
        }
        if t >= self.nvertex {
            self.augment_blossom(t, v);
        }
        let len = self.blossomchilds[b].len() as isize;
        let at = |j: isize| j.rem_euclid(len) as usize;
        let i = self.blossomchilds[b].iter().position(|&c| c == t).unwrap();
        let mut j = i as isize;
        let (jstep, endptrick): (isize, usize) = if j & 1 == 1 {
            j -= len;
            (1, 0)
        } else {
            (-1, 1)
        };
        while j != 0 {
            j += jstep;
            let t = self.blossomchilds[b][at(j)];
            let p = self.blossomendps[b][at(j - endptrick as isize)] ^ endptrick;
            if t >= self.nvertex {
                self.augment_blossom(t, self.endpoint[p]);
            }
            j += jstep;
            let t = self.blossomchilds[b][at(j)];
            if t >= self.nvertex {
                self.augment_blossom(t, self.endpoint[p ^ 1]);
            }
            self.mate[self.endpoint[p]] = p ^ 1;
            self.mate[self.endpoint[p ^ 1]] = p;
        }
        self.blossomchilds[b].rotate_left(i);
        self.blossomendps[b].rotate_left(i);
        self.blossombase[b] = self.blossombase[self.blossomchilds[b][0]];
        debug_assert_eq!(self.blossombase[b], v);
    }

    fn augment_matching(&mut self, k: usize) {
        let (v, w, _) = self.edges[k];
        for (mut s, mut p) in [(v, 2 * k + 1), (w, 2 * k)] {
            loop {
                let bs = self.inblossom[s];
                debug_assert_eq!(self.label[bs], 1);
                if bs >= self.nvertex {
                    self.augment_blossom(bs, s);
                }
                self.mate[s] = p;
                if self.labelend[bs] == NONE {
                    break;
                }
                let t = self.endpoint[self.labelend[bs]];
                let bt = self.inblossom[t];
                debug_assert_eq!(self.label[bt], 2);
                s = self.endpoint[self.labelend[bt]];
                let j = self.endpoint[self.labelend[bt] ^ 1];
                debug_assert_eq!(self.blossombase[bt], t);
                if bt >= self.nvertex {
                    self.augment_blossom(bt, j);
                }
                self.mate[j] = self.labelend[bt];
                p = self.labelend[bt] ^ 1;
            }
        }
    }

    fn run(&mut self, max_cardinality: bool) {
        let n = self.nvertex;
        for _stage in 0..n {
            self.label.iter_mut().for_each(|l| *l = 0);
            self.bestedge.iter_mut().for_each(|b| *b = NONE);
            for b in n..2 * n {
                self.blossombestedges[b].clear();
                self.has_best_list[b] = false;
            }
            self.allowedge.iter_mut().for_each(|a| *a = false);
            self.queue.clear();

            for v in 0..n {
                if self.mate[v] == NONE && self.label[self.inblossom[v]] == 0 {
                    self.assign_label(v, 1, NONE);
                }
            }

            let mut augmented = false;
            loop {
                while !augmented {
                    let Some(v) = self.queue.pop() else { break };
                    debug_assert_eq!(self.label[self.inblossom[v]], 1);
                    let mut idx = 0;
                    while idx < self.neighbend[v].len() {
                        let p = self.neighbend[v][idx];
                        idx += 1;
                        let k = p / 2;
                        let w = self.endpoint[p];
                        if self.inblossom[v] == self.inblossom[w] {
                            continue;
                        }
                        let mut kslack = 0;
                        if !self.allowedge[k] {
                            kslack = self.slack(k);
                            if kslack <= 0 {
                                self.allowedge[k] = true;
                            }
                        }
                        if self.allowedge[k] {
                            if self.label[self.inblossom[w]] == 0 {
                                self.assign_label(w, 2, p ^ 1);
                            } else if self.label[self.inblossom[w]] == 1 {
                                let base = self.scan_blossom(v, w);
                                if base != NONE {
                                    self.add_blossom(base, k);
                                } else {
                                    self.augment_matching(k);
                                    augmented = true;
                                    break;
                                }
                            } else if self.label[w] == 0 {
                                debug_assert_eq!(self.label[self.inblossom[w]], 2);
                                self.label[w] = 2;
                                self.labelend[w] = p ^ 1;
                            }
                        } else if self.label[self.inblossom[w]] == 1 {
                            let b = self.inblossom[v];
                            if self.bestedge[b] == NONE || kslack < self.slack(self.bestedge[b]) {
                                self.bestedge[b] = k;
                            }
                        } else if self.label[w] == 0
                            && (self.bestedge[w] == NONE || kslack < self.slack(self.bestedge[w]))
                        {
                            self.bestedge[w] = k;
                        }
                    }
                }
                if augmented {
                    break;
                }

                // dual adjustment
                let mut deltatype = 0u8;
                let mut delta = 0i64;
                let mut deltaedge = NONE;
                let mut deltablossom = NONE;
                if !max_cardinality {
                    deltatype = 1;
                    delta = *self.dualvar[..n].iter().min().unwrap();
                }
                for v in 0..n {
                    if self.label[self.inblossom[v]] == 0 && self.bestedge[v] != NONE {
                        let d = self.slack(self.bestedge[v]);
                        if deltatype == 0 || d < delta {
                            delta = d;
                            deltatype = 2;
                            deltaedge = self.bestedge[v];
                        }
                    }
                }
                for b in 0..2 * n {
                    if self.blossomparent[b] == NONE && self.label[b] == 1 && self.bestedge[b] != NONE {
                        let kslack = self.slack(self.bestedge[b]);
                        debug_assert_eq!(kslack % 2, 0);
                        let d = kslack / 2;
                        if deltatype == 0 || d < delta {
                            delta = d;
                            deltatype = 3;
                            deltaedge = self.bestedge[b];
                        }
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != NONE
                        && self.blossomparent[b] == NONE
                        && self.label[b] == 2
                        && (deltatype == 0 || self.dualvar[b] < delta)
                    {
                        delta = self.dualvar[b];
                        deltatype = 4;
                        deltablossom = b;
                    }
                }
                if deltatype == 0 {
                    // no further improvement possible; optimum reached
                    debug_assert!(max_cardinality);
                    deltatype = 1;
                    delta = (*self.dualvar[..n].iter().min().unwrap()).max(0);
                }

                for v in 0..n {
                    match self.label[self.inblossom[v]] {
                        1 => self.dualvar[v] -= delta,
                        2 => self.dualvar[v] += delta,
                        _ => {}
                    }
                }
                for b in n..2 * n {
                    if self.blossombase[b] != NONE && self.blossomparent[b] == NONE {
                        match self.label[b] {
                            1 => self.dualvar[b] += delta,
                            2 => self.dualvar[b] -= delta,
                            _ => {}
                        }
                    }
                }

                match deltatype {
                    1 => break,
                    2 => {
                        self.allowedge[deltaedge] = true;
                        let (mut i, j, _) = self.edges[deltaedge];
                        if self.label[self.inblossom[i]] == 0 {
                            i = j;
                        }
                        debug_assert_eq!(self.label[self.inblossom[i]], 1);
                        self.queue.push(i);
                    }
                    3 => {
                        self.allowedge[deltaedge] = true;
                        let (i, _, _) = self.edges[deltaedge];
                        debug_assert_eq!(self.label[self.inblossom[i]], 1);
                        self.queue.push(i);
                    }
                    _ => self.expand_blossom(deltablossom, false),
                }
            }

            if !augmented {
                break;
            }
            for b in n..2 * n {
                if self.blossomparent[b] == NONE
                    && self.blossombase[b] != NONE
                    && self.label[b] == 1
                    && self.dualvar[b] == 0
                {
                    self.expand_blossom(b, true);
                }
            }
        }
    }
}

/// Minimum-weight perfect matching on the complete graph over `k` nodes
/// (k even) with nonnegative integer costs. Returns `mate`.
pub fn min_weight_perfect_matching(
    matcher: &mut BlossomMatcher,
    k: usize,
    edges: &mut Vec<(usize, usize, i64)>,
    cost: impl Fn(usize, usize) -> i64,
) -> Vec<usize> {
    edges.clear();
    let mut maxc = 0;
    for i in 0..k {
        for j in i + 1..k {
            let c = cost(i, j);
            maxc = maxc.max(c);
            edges.push((i, j, c));
        }
    }
    for e in edges.iter_mut() {
        e.2 = maxc + 1 - e.2;
    }
    matcher.solve(k, edges, true).to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Best weight over all matchings (not necessarily perfect) by brute force.
    fn brute_max(n: usize, w: &[Vec<Option<i64>>], used: &mut Vec<bool>, maxcard: bool) -> (usize, i64) {
        let Some(i) = (0..n).find(|&i| !used[i]) else { return (0, 0) };
        used[i] = true;
        let mut best = brute_max(n, w, used, maxcard);
        for j in i + 1..n {
            if !used[j] {
                if let Some(wij) = w[i][j] {
                    used[j] = true;
                    let (c, s) = brute_max(n, w, used, maxcard);
                    let cand = (c + 1, s + wij);
                    let better = if maxcard { (cand.0, cand.1) > (best.0, best.1) } else { cand.1 > best.1 };
                    if better {
                        best = cand;
                    }
                    used[j] = false;
                }
            }
        }
        used[i] = false;
        best
    }

    fn evaluate(mate: &[usize], w: &[Vec<Option<i64>>]) -> (usize, i64) {
        let mut count = 0;
        let mut total = 0;
        for (v, &m) in mate.iter().enumerate() {
            if m != NONE {
                assert_eq!(mate[m], v, "mate not symmetric");
                if v < m {
                    count += 1;
                    total += w[v][m].expect("matched a non-edge");
                }
            }
        }
        (count, total)
    }

    #[test]
    fn small_known_cases() {
        let mut m = BlossomMatcher::new();
        assert_eq!(m.solve(0, &[], false), &[] as &[usize]);
        assert_eq!(m.solve(2, &[(0, 1, 1)], false), &[1, 0]);
        assert_eq!(m.solve(3, &[(0, 1, 10), (1, 2, 11)], false), &[NONE, 2, 1]);
        assert_eq!(m.solve(4, &[(0, 1, 5), (1, 2, 11), (2, 3, 5)], false), &[NONE, 2, 1, NONE]);
        assert_eq!(m.solve(4, &[(0, 1, 5), (1, 2, 11), (2, 3, 5)], true), &[1, 0, 3, 2]);
        // blossom with augmenting path through it
        let edges = [(0, 1, 8), (0, 2, 9), (1, 2, 10), (2, 3, 7)];
        assert_eq!(m.solve(4, &edges, false), &[1, 0, 3, 2]);
        // nested S-blossom relabelled as T, then expanded
        let edges = [
            (0, 1, 19), (0, 2, 20), (0, 7, 8), (1, 2, 25), (1, 3, 18),
            (2, 4, 18), (3, 4, 13), (3, 6, 7), (4, 5, 7),
        ];
        assert_eq!(m.solve(8, &edges, false), &[7, 2, 1, 6, 5, 4, 3, 0]);
        // nested S-blossom expanded recursively
        let edges = [
            (0, 1, 40), (0, 2, 40), (1, 2, 60), (1, 3, 55), (2, 4, 55), (3, 4, 50),
            (0, 7, 15), (4, 6, 30), (6, 5, 10), (7, 9, 10), (3, 8, 30),
        ];
        assert_eq!(m.solve(10, &edges, false), &[1, 0, 4, 8, 2, 6, 5, 9, 3, 7]);
    }

    #[test]
    fn agrees_with_brute_force_on_random_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut m = BlossomMatcher::new();
        for trial in 0..3000 {
            let n = rng.random_range(1..=10);
            let density = rng.random_range(0.2..1.0);
            let wmax = if trial % 3 == 0 { 3 } else { 40 };
            let mut w = vec![vec![None; n]; n];
            let mut edges = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    if rng.random::<f64>() < density {
                        let x = rng.random_range(0..=wmax);
                        w[i][j] = Some(x);
                        w[j][i] = Some(x);
                        edges.push((i, j, x));
                    }
                }
            }
            for maxcard in [false, true] {
                let got = evaluate(m.solve(n, &edges, maxcard), &w);
                let want = brute_max(n, &w, &mut vec![false; n], maxcard);
                if maxcard {
                    assert_eq!(got, want, "trial {trial} n={n} edges={edges:?}");
                } else {
                    assert_eq!(got.1, want.1, "trial {trial} n={n} edges={edges:?}");
                }
            }
        }
    }

    #[test]
    fn perfect_matching_minimises_cost() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut m = BlossomMatcher::new();
        let mut buf = Vec::new();
        for _ in 0..500 {
            let k = 2 * rng.random_range(0..=5);
            let pts: Vec<(i64, i64)> = (0..k).map(|_| (rng.random_range(0..8), rng.random_range(0..8))).collect();
            let cost = |i: usize, j: usize| (pts[i].0 - pts[j].0).abs() + (pts[i].1 - pts[j].1).abs();
            let mate = min_weight_perfect_matching(&mut m, k, &mut buf, cost);
            let got: i64 = (0..k).filter(|&i| mate[i] > i).map(|i| cost(i, mate[i])).sum();
            assert!(mate.iter().all(|&x| x != NONE));
            fn best(rem: &mut Vec<usize>, cost: &dyn Fn(usize, usize) -> i64) -> i64 {
                if rem.is_empty() {
                    return 0;
                }
                let a = rem.remove(0);
                let mut out = i64::MAX;
                for idx in 0..rem.len() {
                    let b = rem.remove(idx);
                    out = out.min(cost(a, b) + best(rem, cost));
                    rem.insert(idx, b);
                }
                rem.insert(0, a);
                out
            }
            assert_eq!(got, best(&mut (0..k).collect(), &cost));
        }
    }
}
