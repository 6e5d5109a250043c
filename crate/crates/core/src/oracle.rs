//! Dyadic brute-force oracle.
//!
//! Independent verification path for the exact checkers: everything here
//! works on a rigid grid of step (min edge length)/denominator, decides
//! conditions by direct evaluation of their definitions (finite
//! differences, partition sums, grid-restricted quantifiers, its own
//! Dijkstra over the grid graph), and never touches the piecewise
//! breakpoint machinery, regions, or the candidate-center schedules. On
//! fixtures whose breakpoints lie on the grid the oracle verdicts agree
//! with the exact ones; the acceptance suite enforces that agreement.

use std::collections::BTreeMap;

use num_traits::Signed;

use crate::graph::{GraphPoint, MetricGraph, Sign, VertexId, Walk};
use crate::map::GraphMap;
use crate::rational::{rat_int, rat_one, rat_zero, Rat};

/// Grid-subdivided view of a metric graph with its own shortest-path
/// machinery.
pub struct GridSpace<'a> {
    g: &'a MetricGraph,
    step: Rat,
    /// per edge: sorted grid offsets including 0 and len
    offsets: Vec<Vec<Rat>>,
    /// node ids: vertices come first, then interior grid points per edge
    interior_base: Vec<usize>,
    node_count: usize,
}

impl<'a> GridSpace<'a> {
    pub fn new(g: &'a MetricGraph, denominator: i64) -> Self {
        let minlen = g.min_edge_len().unwrap_or_else(rat_one);
        let step = minlen / rat_int(denominator);
        let mut offsets = Vec::with_capacity(g.edge_count());
        let mut interior_base = Vec::with_capacity(g.edge_count());
        let mut node_count = g.vertex_count();
        for e in g.edge_ids() {
            let len = &g.edge(e).len;
            let count = (len / &step).to_integer();
            let count: usize = count.to_string().parse().expect("small grid");
            let mut offs = Vec::with_capacity(count + 1);
            for j in 0..=count {
                offs.push(&step * rat_int(j as i64));
            }
            if offs.last() != Some(len) {
                offs.push(len.clone());
            }
            interior_base.push(node_count);
            node_count += offs.len().saturating_sub(2);
            offsets.push(offs);
        }
        GridSpace { g, step, offsets, interior_base, node_count }
    }

    pub fn step(&self) -> &Rat {
        &self.step
    }

    /// All grid points (vertices and interior grid nodes).
    pub fn points(&self, stride: usize) -> Vec<GraphPoint> {
        let stride = stride.max(1);
        let mut out: Vec<GraphPoint> = self.g.vertices().map(GraphPoint::Vertex).collect();
        for e in self.g.edge_ids() {
            for (j, off) in self.offsets[e.0].iter().enumerate() {
                if j == 0 || j + 1 >= self.offsets[e.0].len() {
                    continue;
                }
                if j % stride == 0 {
                    out.push(GraphPoint::Interior(e, off.clone()));
                }
            }
        }
        out
    }

    fn node_of(&self, p: &GraphPoint) -> Option<usize> {
        match p {
            GraphPoint::Vertex(v) => Some(v.0),
            GraphPoint::Interior(e, off) => {
                let offs = &self.offsets[e.0];
                offs.binary_search(off).ok().map(|j| self.interior_base[e.0] + j - 1)
            }
        }
    }

    fn node_point(&self, id: usize) -> GraphPoint {
        if id < self.g.vertex_count() {
            return GraphPoint::Vertex(VertexId(id));
        }
        for e in self.g.edge_ids() {
            let base = self.interior_base[e.0];
            let interior = self.offsets[e.0].len().saturating_sub(2);
            if id >= base && id < base + interior {
                return GraphPoint::Interior(e, self.offsets[e.0][id - base + 1].clone());
            }
        }
        unreachable!("node id within range");
    }

    fn neighbors(&self, id: usize) -> Vec<(usize, Rat)> {
        let mut out = Vec::new();
        match self.node_point(id) {
            GraphPoint::Vertex(v) => {
                for &(e, end) in self.g.incident(v) {
                    let offs = &self.offsets[e.0];
                    let n = offs.len();
                    match end {
                        crate::graph::EdgeEnd::Lo => {
                            let gap = &offs[1] - &offs[0];
                            let other = if n == 2 {
                                self.node_of(&self.g.point_on_edge(e, offs[1].clone()).unwrap())
                            } else {
                                Some(self.interior_base[e.0])
                            };
                            if let Some(o) = other {
                                out.push((o, gap));
                            }
                        }
                        crate::graph::EdgeEnd::Hi => {
                            let gap = &offs[n - 1] - &offs[n - 2];
                            let other = if n == 2 {
                                self.node_of(&self.g.point_on_edge(e, offs[0].clone()).unwrap())
                            } else {
                                Some(self.interior_base[e.0] + n - 3)
                            };
                            if let Some(o) = other {
                                out.push((o, gap));
                            }
                        }
                    }
                }
            }
            GraphPoint::Interior(e, off) => {
                let offs = &self.offsets[e.0];
                let j = offs.binary_search(&off).expect("grid node");
                for k in [j - 1, j + 1] {
                    let gap = (&offs[k] - &offs[j]).abs();
                    let q = self.g.point_on_edge(e, offs[k].clone()).unwrap();
                    if let Some(o) = self.node_of(&q) {
                        out.push((o, gap));
                    }
                }
            }
        }
        out
    }

    /// Shortest grid distances from an arbitrary point (grid node or
    /// off-grid) to every grid node, computed by this module's own
    /// Dijkstra over the grid graph.
    pub fn dist_map(&self, from: &GraphPoint) -> DistMap<'_, 'a> {
        DistMap { grid: self, from: from.clone(), dist: self.dijkstra_vec(from) }
    }

    fn dijkstra_vec(&self, from: &GraphPoint) -> Vec<Option<Rat>> {
        let mut dist: Vec<Option<Rat>> = vec![None; self.node_count];
        let mut heap: std::collections::BinaryHeap<std::cmp::Reverse<(Rat, usize)>> =
            Default::default();
        let mut seed = |d: Rat, id: usize, dist: &mut Vec<Option<Rat>>| {
            if dist[id].as_ref().is_none_or(|cur| d < *cur) {
                dist[id] = Some(d.clone());
            }
            heap.push(std::cmp::Reverse((d, id)));
        };
        match self.node_of(from) {
            Some(id) => seed(rat_zero(), id, &mut dist),
            None => {
                if let GraphPoint::Interior(e, off) = from {
                    let offs = &self.offsets[e.0];
                    let j = offs.partition_point(|o| o < off);
                    let left = &offs[j - 1];
                    let right = &offs[j];
                    let lp = self.g.point_on_edge(*e, left.clone()).unwrap();
                    let rp = self.g.point_on_edge(*e, right.clone()).unwrap();
                    let lid = self.node_of(&lp).expect("grid node");
                    let rid = self.node_of(&rp).expect("grid node");
                    seed(off - left, lid, &mut dist);
                    seed(right - off, rid, &mut dist);
                } else {
                    unreachable!("vertices are always grid nodes");
                }
            }
        }
        let mut fixed = vec![false; self.node_count];
        while let Some(std::cmp::Reverse((d, id))) = heap.pop() {
            if fixed[id] {
                continue;
            }
            fixed[id] = true;
            for (o, gap) in self.neighbors(id) {
                let nd = &d + &gap;
                if dist[o].as_ref().is_none_or(|cur| nd < *cur) {
                    dist[o] = Some(nd.clone());
                    heap.push(std::cmp::Reverse((nd, o)));
                }
            }
        }
        dist
    }

    /// Distance lookup against a precomputed vector from `dijkstra_vec`.
    fn lookup(&self, from: &GraphPoint, dist: &[Option<Rat>], q: &GraphPoint) -> Rat {
        let mut best: Option<Rat> = None;
        let mut consider = |c: Rat| {
            if best.as_ref().is_none_or(|b| c < *b) {
                best = Some(c);
            }
        };
        match self.node_of(q) {
            Some(id) => {
                if let Some(d) = &dist[id] {
                    consider(d.clone());
                }
            }
            None => {
                if let GraphPoint::Interior(e, off) = q {
                    let offs = &self.offsets[e.0];
                    let j = offs.partition_point(|o| o < off);
                    let pairs = [(j - 1, off - &offs[j - 1]), (j, &offs[j] - off)];
                    for (k, gap) in pairs {
                        let p = self.g.point_on_edge(*e, offs[k].clone()).unwrap();
                        if let Some(id) = self.node_of(&p) {
                            if let Some(d) = &dist[id] {
                                consider(d + &gap);
                            }
                        }
                    }
                }
            }
        }
        if let (GraphPoint::Interior(e1, a), GraphPoint::Interior(e2, b)) = (from, q) {
            if e1 == e2 {
                consider((a - b).abs());
            }
        }
        best.expect("connected grid")
    }
}

pub struct DistMap<'m, 'a> {
    grid: &'m GridSpace<'a>,
    from: GraphPoint,
    dist: Vec<Option<Rat>>,
}

impl DistMap<'_, '_> {
    /// Distance from the map's source to an arbitrary point of the
    /// graph (off-grid points route through their grid neighbors; the
    /// direct same-edge segment is included when applicable).
    pub fn dist_to(&self, q: &GraphPoint) -> Rat {
        self.grid.lookup(&self.from, &self.dist, q)
    }
}

/// Straight-line evaluation of the map at a point, by scanning the image
/// walk positions directly.
pub fn oracle_eval(f: &GraphMap, p: &GraphPoint) -> GraphPoint {
    match p {
        GraphPoint::Vertex(v) => GraphPoint::Vertex(f.vertex_image(*v)),
        GraphPoint::Interior(e, off) => {
            let s = f.speed(*e);
            let walk = f.edge_walk(*e);
            if *s == rat_zero() {
                return walk.start().clone();
            }
            let mut pos = off * s;
            for seg in walk.segments() {
                let l = seg.len();
                if pos <= l {
                    let target_off = match seg.sign() {
                        Sign::Pos => &seg.from + &pos,
                        Sign::Neg => &seg.from - &pos,
                    };
                    return f.target().point_on_edge(seg.edge, target_off).expect("valid");
                }
                pos = &pos - &l;
            }
            walk.end().clone()
        }
    }
}

/// Direct per-edge linear solve of `f = y` (independent of the fiber
/// machinery). Returns the isolated solutions; collapsed edges mapping
/// onto `y` report `None` (an infinite fiber).
pub fn oracle_fiber(f: &GraphMap, y: &GraphPoint) -> Option<Vec<GraphPoint>> {
    let mut out: Vec<GraphPoint> = Vec::new();
    for v in f.source().vertices() {
        if &GraphPoint::Vertex(f.vertex_image(v)) == y {
            out.push(GraphPoint::Vertex(v));
        }
    }
    for e in f.source().edge_ids() {
        let s = f.speed(e);
        let walk = f.edge_walk(e);
        if *s == rat_zero() {
            if walk.start() == y {
                return None;
            }
            continue;
        }
        let mut acc = rat_zero();
        for seg in walk.segments() {
            let l = seg.len();
            let hit = match y {
                GraphPoint::Interior(g, c) if *g == seg.edge => {
                    let lo = seg.from.clone().min(seg.to.clone());
                    let hi = seg.from.clone().max(seg.to.clone());
                    if *c >= lo && *c <= hi {
                        Some(&acc + (c - &seg.from).abs())
                    } else {
                        None
                    }
                }
                GraphPoint::Vertex(_) => {
                    let mut found = None;
                    if &seg.start_point(f.target()) == y {
                        found = Some(acc.clone());
                    }
                    if &seg.end_point(f.target()) == y {
                        found = Some(&acc + &l);
                    }
                    found
                }
                _ => None,
            };
            if let Some(pos) = hit {
                let t = &pos / s;
                if let Ok(p) = f.source().point_on_edge(e, t) {
                    if !out.contains(&p) {
                        out.push(p);
                    }
                }
            }
            acc = &acc + &l;
        }
    }
    out.sort();
    out.dedup();
    Some(out)
}

/// The grid oracle for one map: grids on both sides plus a cache of
/// shortest-path maps.
pub struct Oracle<'a> {
    pub f: &'a GraphMap,
    pub source: GridSpace<'a>,
    pub target: GridSpace<'a>,
    stride: usize,
    source_maps: BTreeMap<GraphPoint, Vec<Option<Rat>>>,
    target_maps: BTreeMap<GraphPoint, Vec<Option<Rat>>>,
}

impl<'a> Oracle<'a> {
    /// `denominator` is the grid fineness (step = min edge length / d);
    /// `stride` thins the center/sample sets while keeping the grid
    /// metric substrate at full resolution.
    pub fn new(f: &'a GraphMap, denominator: i64, stride: usize) -> Self {
        Oracle {
            f,
            source: GridSpace::new(f.source(), denominator),
            target: GridSpace::new(f.target(), denominator),
            stride: stride.max(1),
            source_maps: BTreeMap::new(),
            target_maps: BTreeMap::new(),
        }
    }

    fn sdist(&mut self, from: &GraphPoint, to: &GraphPoint) -> Rat {
        if !self.source_maps.contains_key(from) {
            let v = self.source.dijkstra_vec(from);
            self.source_maps.insert(from.clone(), v);
        }
        self.source.lookup(from, &self.source_maps[from], to)
    }

    fn tdist(&mut self, from: &GraphPoint, to: &GraphPoint) -> Rat {
        if !self.target_maps.contains_key(from) {
            let v = self.target.dijkstra_vec(from);
            self.target_maps.insert(from.clone(), v);
        }
        self.target.lookup(from, &self.target_maps[from], to)
    }

    pub fn centers(&self) -> Vec<GraphPoint> {
        self.source.points(self.stride)
    }

    /// Discreteness by finite differences: an edge is collapsed iff its
    /// grid image increments are all zero.
    pub fn is_discrete(&mut self) -> bool {
        for e in self.f.source().edge_ids() {
            let len = self.f.source().edge(e).len.clone();
            let h = len / rat_int(4);
            let p1 = self.f.source().point_on_edge(e, h.clone()).unwrap();
            let p2 = self.f.source().point_on_edge(e, &h * rat_int(2)).unwrap();
            let q1 = oracle_eval(self.f, &p1);
            let q2 = oracle_eval(self.f, &p2);
            if q1 == q2 && self.tdist(&q1, &q2) == rat_zero() {
                return false;
            }
        }
        true
    }

    /// Openness by direction probing: at every grid center, each target
    /// direction at the image must be realized by some source direction
    /// (decided by comparing probe points at matching arc depths).
    pub fn is_open(&mut self) -> bool {
        let centers = self.centers();
        for x in centers {
            if !self.open_at(&x) {
                return false;
            }
        }
        true
    }

    fn open_at(&mut self, x: &GraphPoint) -> bool {
        let fx = oracle_eval(self.f, x);
        let h = self.source.step().clone() / rat_int(2);
        // image probes along every source direction
        let mut probes: Vec<GraphPoint> = Vec::new();
        for d in self.f.source().directions_at(x) {
            let here = self.f.source().offset_on_edge(x, d.edge, d.sign);
            let here = match here {
                Some(h) => h,
                None => continue,
            };
            let room = match d.sign {
                Sign::Pos => &self.f.source().edge(d.edge).len - &here,
                Sign::Neg => here.clone(),
            };
            if room == rat_zero() {
                continue;
            }
            let step = if room < h { room / rat_int(2) } else { h.clone() };
            if let Some(y) = self.f.source().advance(x, d, &step) {
                probes.push(oracle_eval(self.f, &y));
            }
        }
        // every target direction must have a probe sitting along it
        for delta in self.f.target().directions_at(&fx) {
            let here = match self.f.target().offset_on_edge(&fx, delta.edge, delta.sign) {
                Some(o) => o,
                None => continue,
            };
            let room = match delta.sign {
                Sign::Pos => &self.f.target().edge(delta.edge).len - &here,
                Sign::Neg => here.clone(),
            };
            if room == rat_zero() {
                continue;
            }
            let mut covered = false;
            for q in &probes {
                let dq = self.tdist(&fx, q);
                if dq == rat_zero() {
                    continue;
                }
                let eta = if room < dq { room.clone() } else { dq.clone() } / rat_int(2);
                if let Some(y_delta) = self.f.target().advance(&fx, delta, &eta) {
                    // q lies along delta iff y_delta sits between fx and q
                    if self.tdist(&y_delta, q) == &dq - &eta {
                        covered = true;
                        break;
                    }
                }
            }
            if !covered {
                return false;
            }
        }
        true
    }

    pub fn check_lipschitz(&mut self, l: &Rat) -> bool {
        let pts = self.centers();
        for i in 0..pts.len() {
            let fi = oracle_eval(self.f, &pts[i]);
            for j in (i + 1)..pts.len() {
                let fj = oracle_eval(self.f, &pts[j]);
                let dx = self.sdist(&pts[i], &pts[j]);
                let dy = self.tdist(&fi, &fj);
                if dy > l * &dx {
                    return false;
                }
            }
        }
        true
    }

    /// Sub-grid radial probing: both sphere conditions at radii step/2
    /// and step/4 around every center.
    pub fn check_radial(&mut self, l: &Rat) -> bool {
        let centers = self.centers();
        let radii = [
            self.source.step().clone() / rat_int(2),
            self.source.step().clone() / rat_int(4),
        ];
        for x in centers {
            let fx = oracle_eval(self.f, &x);
            for r in &radii {
                let mut sup: Option<Rat> = None;
                let mut inf: Option<Rat> = None;
                for d in self.f.source().directions_at(&x) {
                    let y = match self.f.source().advance(&x, d, r) {
                        Some(y) => y,
                        None => continue,
                    };
                    let dv = self.tdist(&fx, &oracle_eval(self.f, &y));
                    if sup.as_ref().is_none_or(|s| dv > *s) {
                        sup = Some(dv.clone());
                    }
                    if inf.as_ref().is_none_or(|s| dv < *s) {
                        inf = Some(dv);
                    }
                }
                if let (Some(sup), Some(inf)) = (sup, inf) {
                    if sup > l * r || inf < r / l {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// The pointwise formulation at the same probe points.
    pub fn check_radial_pointwise(&mut self, l: &Rat) -> bool {
        let centers = self.centers();
        let radii = [
            self.source.step().clone() / rat_int(2),
            self.source.step().clone() / rat_int(4),
        ];
        for x in centers {
            let fx = oracle_eval(self.f, &x);
            for r in &radii {
                for d in self.f.source().directions_at(&x) {
                    let y = match self.f.source().advance(&x, d, r) {
                        Some(y) => y,
                        None => continue,
                    };
                    let dv = self.tdist(&fx, &oracle_eval(self.f, &y));
                    let dx = self.sdist(&x, &y);
                    if dv > l * &dx || dv < &dx / l {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Grid-quantified ball inclusions at a dyadic radius schedule.
    pub fn check_lq(&mut self, l: &Rat) -> bool {
        let centers = self.centers();
        let targets = self.target.points(self.stride);
        for x in centers {
            let fx = oracle_eval(self.f, &x);
            let ecc = self.f.source().eccentricity(&x);
            let reach = l * self.f.target().eccentricity(&fx);
            let top = if ecc > reach { ecc } else { reach };
            let rstep = self.source.step().clone() * rat_int(8);
            let mut radii: Vec<Rat> = Vec::new();
            let mut r = rstep.clone();
            while r <= top {
                radii.push(r.clone());
                r = &r + &rstep;
            }
            radii.push(top + rat_one());
            for r in radii {
                // left inclusion on grid targets
                for y in &targets {
                    if self.tdist(&fx, y) <= &r / l {
                        let fiber = match oracle_fiber(self.f, y) {
                            Some(pts) => pts,
                            None => continue, // infinite fiber: trivially reachable
                        };
                        let reachable =
                            fiber.iter().any(|a| self.sdist(&x, a) <= r);
                        if !reachable {
                            return false;
                        }
                    }
                }
            }
        }
        // right inclusion is the Lipschitz bound
        self.check_lipschitz(l)
    }

    /// Small-radius ball inclusions by direction probing.
    pub fn check_lq_local(&mut self, l: &Rat) -> bool {
        let centers = self.centers();
        let r = self.source.step().clone() / rat_int(2);
        for x in centers {
            let fx = oracle_eval(self.f, &x);
            // left: targets at depth r/L along each direction of f(x)
            for delta in self.f.target().directions_at(&fx) {
                let here = match self.f.target().offset_on_edge(&fx, delta.edge, delta.sign) {
                    Some(o) => o,
                    None => continue,
                };
                let room = match delta.sign {
                    Sign::Pos => &self.f.target().edge(delta.edge).len - &here,
                    Sign::Neg => here.clone(),
                };
                if room == rat_zero() {
                    continue;
                }
                let depth0 = &r / l;
                let depth = if room < depth0 { room / rat_int(2) } else { depth0 };
                // the matching source radius shrinks with the probe depth
                let source_r = l * &depth;
                if let Some(y) = self.f.target().advance(&fx, delta, &depth) {
                    let fiber = match oracle_fiber(self.f, &y) {
                        Some(pts) => pts,
                        None => continue,
                    };
                    if !fiber.iter().any(|a| self.sdist(&x, a) <= source_r) {
                        return false;
                    }
                }
            }
            // right: probes at distance r from x
            for d in self.f.source().directions_at(&x) {
                if let Some(y) = self.f.source().advance(&x, d, &r) {
                    if self.tdist(&fx, &oracle_eval(self.f, &y)) > l * &r {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Length of the image of a walk by grid partition sums: the paths
    /// are piecewise linear, so a partition through all grid multiples
    /// and walk nodes attains the supremum defining the length.
    pub fn image_length(&mut self, w: &Walk) -> Rat {
        let total = w.length();
        if total == rat_zero() {
            return rat_zero();
        }
        let mut cuts: Vec<Rat> = vec![rat_zero(), total.clone()];
        // walk node positions
        let mut acc = rat_zero();
        for seg in w.segments() {
            // grid multiples inside the segment (source arc length)
            let l = seg.len();
            let step = self.source.step().clone();
            let mut t = step.clone();
            while t < l {
                cuts.push(&acc + &t);
                t = &t + &step;
            }
            acc = &acc + &l;
            cuts.push(acc.clone());
        }
        cuts.sort();
        cuts.dedup();
        let mut sum = rat_zero();
        let mut prev: Option<GraphPoint> = None;
        for t in cuts {
            let p = w.point_at(self.f.source(), &t).expect("position within walk");
            let q = oracle_eval(self.f, &p);
            if let Some(prev) = prev {
                sum = &sum + self.tdist(&prev, &q);
            }
            prev = Some(q);
        }
        sum
    }

    /// Finite-difference minimal constant: the largest of ratio and
    /// reciprocal ratio of image to source displacement over all grid
    /// directions.
    pub fn min_constant(&mut self) -> Option<Rat> {
        let mut best = rat_one();
        let h = self.source.step().clone() / rat_int(2);
        for x in self.centers() {
            let fx = oracle_eval(self.f, &x);
            for d in self.f.source().directions_at(&x) {
                let y = match self.f.source().advance(&x, d, &h) {
                    Some(y) => y,
                    None => continue,
                };
                let dv = self.tdist(&fx, &oracle_eval(self.f, &y));
                if dv == rat_zero() {
                    return None; // collapsed direction: no finite constant
                }
                let ratio = &dv / &h;
                let c = if ratio >= rat_one() { ratio.clone() } else { rat_one() / &ratio };
                if c > best {
                    best = c;
                }
            }
        }
        Some(best)
    }
}
