//! Finite metric graphs and their geodesic realizations.
//!
//! A `MetricGraph` is a connected edge-weighted multigraph (self-loops
//! permitted) with strictly positive rational edge lengths. Points of the
//! realization are vertices or interior edge points; all distances are
//! exact rationals computed as infima of walk lengths, which are attained
//! because the realization is a compact geodesic space.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{CoreError, Result};
use num_traits::Signed;

use crate::pl::PlFn;
use crate::rational::{fmt_rat, rat_int, rat_zero, Rat};
use crate::region::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VertexId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub usize);

/// Which end of an edge: `Lo` is offset 0 (at `u`), `Hi` is offset `len`
/// (at `v`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeEnd {
    Lo,
    Hi,
}

/// A local direction at a point: move along `edge` with increasing
/// (`Pos`) or decreasing (`Neg`) offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Direction {
    pub edge: EdgeId,
    pub sign: Sign,
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub name: String,
    pub u: VertexId,
    pub v: VertexId,
    pub len: Rat,
}

impl Edge {
    pub fn endpoint(&self, end: EdgeEnd) -> VertexId {
        match end {
            EdgeEnd::Lo => self.u,
            EdgeEnd::Hi => self.v,
        }
    }
}

/// A point of the geodesic realization, in canonical form: offsets 0 and
/// `len` are always represented by the vertex itself.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GraphPoint {
    Vertex(VertexId),
    Interior(EdgeId, Rat),
}

#[derive(Debug, Clone)]
pub struct MetricGraph {
    vertex_names: Vec<String>,
    edges: Vec<Edge>,
    /// Per vertex: incident edge-ends, sorted by (edge, end).
    incid: Vec<Vec<(EdgeId, EdgeEnd)>>,
    /// All-pairs vertex distances.
    dist: Vec<Vec<Rat>>,
}

/// Plain description used to build a graph.
#[derive(Debug, Clone, Default)]
pub struct GraphSpec {
    pub vertices: Vec<String>,
    /// (edge id, from vertex, to vertex, length)
    pub edges: Vec<(String, String, String, Rat)>,
}

impl MetricGraph {
    pub fn build(spec: &GraphSpec) -> Result<Self> {
        if spec.vertices.is_empty() {
            return Err(CoreError::EmptyGraph);
        }
        let mut vertex_names = Vec::new();
        for name in &spec.vertices {
            if vertex_names.contains(name) {
                return Err(CoreError::DuplicateId(name.clone()));
            }
            vertex_names.push(name.clone());
        }
        let vid = |name: &str| -> Result<VertexId> {
            vertex_names
                .iter()
                .position(|n| n == name)
                .map(VertexId)
                .ok_or_else(|| CoreError::UnknownId(name.to_string()))
        };
        let mut edges = Vec::new();
        let mut edge_names: Vec<&String> = Vec::new();
        for (name, from, to, len) in &spec.edges {
            if edge_names.contains(&name) {
                return Err(CoreError::DuplicateId(name.clone()));
            }
            edge_names.push(name);
            if *len <= rat_zero() {
                return Err(CoreError::NonpositiveLength(name.clone()));
            }
            edges.push(Edge { name: name.clone(), u: vid(from)?, v: vid(to)?, len: len.clone() });
        }
        let mut incid = vec![Vec::new(); vertex_names.len()];
        for (i, e) in edges.iter().enumerate() {
            incid[e.u.0].push((EdgeId(i), EdgeEnd::Lo));
            incid[e.v.0].push((EdgeId(i), EdgeEnd::Hi));
        }
        for l in &mut incid {
            l.sort();
        }
        let mut g = MetricGraph { vertex_names, edges, incid, dist: Vec::new() };
        g.dist = (0..g.vertex_count()).map(|s| g.dijkstra(VertexId(s))).collect();
        // connectivity: every vertex reachable from vertex 0
        for (i, row) in g.dist[0].iter().enumerate().skip(1) {
            let _ = row;
            if !g.reachable(VertexId(0), VertexId(i)) {
                return Err(CoreError::Disconnected(g.vertex_names[i].clone()));
            }
        }
        Ok(g)
    }

    fn reachable(&self, s: VertexId, t: VertexId) -> bool {
        // dijkstra marks unreachable with a sentinel: we track it via a
        // parallel reachability BFS to keep distances purely rational.
        let mut seen = vec![false; self.vertex_count()];
        let mut stack = vec![s];
        seen[s.0] = true;
        while let Some(w) = stack.pop() {
            if w == t {
                return true;
            }
            for &(e, _) in &self.incid[w.0] {
                for n in [self.edges[e.0].u, self.edges[e.0].v] {
                    if !seen[n.0] {
                        seen[n.0] = true;
                        stack.push(n);
                    }
                }
            }
        }
        seen[t.0]
    }

    fn dijkstra(&self, s: VertexId) -> Vec<Rat> {
        let n = self.vertex_count();
        let mut dist: Vec<Option<Rat>> = vec![None; n];
        dist[s.0] = Some(rat_zero());
        let mut heap: BinaryHeap<Reverse<(Rat, usize)>> = BinaryHeap::new();
        heap.push(Reverse((rat_zero(), s.0)));
        let mut fixed = vec![false; n];
        while let Some(Reverse((d, w))) = heap.pop() {
            if fixed[w] {
                continue;
            }
            fixed[w] = true;
            for &(e, _) in &self.incid[w] {
                let edge = &self.edges[e.0];
                let other = if edge.u.0 == w { edge.v } else { edge.u };
                let nd = &d + &edge.len;
                if dist[other.0].as_ref().is_none_or(|cur| nd < *cur) {
                    dist[other.0] = Some(nd.clone());
                    heap.push(Reverse((nd, other.0)));
                }
            }
        }
        // unreached vertices keep a large sentinel; `build` rejects them.
        let sentinel: Rat = self.edges.iter().map(|e| &e.len).sum::<Rat>() + rat_int(1);
        dist.into_iter().map(|d| d.unwrap_or_else(|| sentinel.clone())).collect()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> {
        (0..self.vertex_count()).map(VertexId)
    }

    pub fn edge_ids(&self) -> impl Iterator<Item = EdgeId> {
        (0..self.edge_count()).map(EdgeId)
    }

    pub fn edge(&self, e: EdgeId) -> &Edge {
        &self.edges[e.0]
    }

    pub fn vertex_name(&self, v: VertexId) -> &str {
        &self.vertex_names[v.0]
    }

    pub fn vertex_by_name(&self, name: &str) -> Result<VertexId> {
        self.vertex_names
            .iter()
            .position(|n| n == name)
            .map(VertexId)
            .ok_or_else(|| CoreError::UnknownId(name.to_string()))
    }

    pub fn edge_by_name(&self, name: &str) -> Result<EdgeId> {
        self.edges
            .iter()
            .position(|e| e.name == name)
            .map(EdgeId)
            .ok_or_else(|| CoreError::UnknownId(name.to_string()))
    }

    pub fn incident(&self, v: VertexId) -> &[(EdgeId, EdgeEnd)] {
        &self.incid[v.0]
    }

    pub fn vertex_dist(&self, a: VertexId, b: VertexId) -> &Rat {
        &self.dist[a.0][b.0]
    }

    pub fn min_edge_len(&self) -> Option<Rat> {
        self.edges.iter().map(|e| e.len.clone()).min()
    }

    pub fn total_edge_len(&self) -> Rat {
        self.edges.iter().map(|e| e.len.clone()).sum()
    }

    /// Canonical point on an edge; offsets 0 and `len` collapse to the
    /// vertex form.
    pub fn point_on_edge(&self, e: EdgeId, offset: Rat) -> Result<GraphPoint> {
        let edge = &self.edges[e.0];
        if offset < rat_zero() || offset > edge.len {
            return Err(CoreError::OffsetOutOfRange(edge.name.clone()));
        }
        if offset == rat_zero() {
            Ok(GraphPoint::Vertex(edge.u))
        } else if offset == edge.len {
            Ok(GraphPoint::Vertex(edge.v))
        } else {
            Ok(GraphPoint::Interior(e, offset))
        }
    }

    pub fn contains_point(&self, p: &GraphPoint) -> bool {
        match p {
            GraphPoint::Vertex(v) => v.0 < self.vertex_count(),
            GraphPoint::Interior(e, off) => {
                e.0 < self.edge_count()
                    && *off > rat_zero()
                    && *off < self.edges[e.0].len
            }
        }
    }

    /// Exits of a point: (vertex, cost of reaching it along the carrying
    /// edge). A vertex exits to itself at cost 0.
    fn exits(&self, p: &GraphPoint) -> Vec<(VertexId, Rat)> {
        match p {
            GraphPoint::Vertex(v) => vec![(*v, rat_zero())],
            GraphPoint::Interior(e, off) => {
                let edge = &self.edges[e.0];
                vec![(edge.u, off.clone()), (edge.v, &edge.len - off)]
            }
        }
    }

    /// Exact path-metric distance.
    pub fn distance(&self, p: &GraphPoint, q: &GraphPoint) -> Result<Rat> {
        if !self.contains_point(p) || !self.contains_point(q) {
            return Err(CoreError::PointNotOnGraph);
        }
        if p == q {
            return Ok(rat_zero());
        }
        let mut best: Option<Rat> = None;
        let mut consider = |c: Rat| {
            if best.as_ref().is_none_or(|b| c < *b) {
                best = Some(c);
            }
        };
        if let (GraphPoint::Interior(e1, a), GraphPoint::Interior(e2, b)) = (p, q) {
            if e1 == e2 {
                consider((a - b).abs());
            }
        }
        for (w1, c1) in self.exits(p) {
            for (w2, c2) in self.exits(q) {
                consider(&c1 + self.vertex_dist(w1, w2) + &c2);
            }
        }
        Ok(best.expect("connected graph always yields a distance"))
    }

    /// Local directions available at a point, sorted by (edge, sign).
    pub fn directions_at(&self, p: &GraphPoint) -> Vec<Direction> {
        match p {
            GraphPoint::Vertex(v) => {
                let mut out: Vec<Direction> = self.incid[v.0]
                    .iter()
                    .map(|&(e, end)| Direction {
                        edge: e,
                        sign: match end {
                            EdgeEnd::Lo => Sign::Pos,
                            EdgeEnd::Hi => Sign::Neg,
                        },
                    })
                    .collect();
                out.sort();
                out
            }
            GraphPoint::Interior(e, _) => vec![
                Direction { edge: *e, sign: Sign::Pos },
                Direction { edge: *e, sign: Sign::Neg },
            ],
        }
    }

    /// Offset of `p` along `e`, when `p` lies on `e` (vertices resolve to
    /// end offsets; for a self-loop the end matching `sign` is chosen so
    /// that moving along `sign` stays on the edge).
    pub fn offset_on_edge(&self, p: &GraphPoint, e: EdgeId, sign: Sign) -> Option<Rat> {
        let edge = &self.edges[e.0];
        match p {
            GraphPoint::Interior(pe, off) if pe == &e => Some(off.clone()),
            GraphPoint::Interior(_, _) => None,
            GraphPoint::Vertex(v) => match sign {
                Sign::Pos => {
                    if edge.u == *v {
                        Some(rat_zero())
                    } else if edge.v == *v {
                        // moving Pos from the Hi end immediately leaves: only
                        // valid on self-loops where both ends coincide.
                        None
                    } else {
                        None
                    }
                }
                Sign::Neg => {
                    if edge.v == *v {
                        Some(edge.len.clone())
                    } else {
                        None
                    }
                }
            },
        }
    }

    /// The point reached from `p` after travelling `t >= 0` along
    /// direction `d` without leaving the edge. `None` if the move runs
    /// off the edge or `p` is not on it.
    pub fn advance(&self, p: &GraphPoint, d: Direction, t: &Rat) -> Option<GraphPoint> {
        let start = self.offset_on_edge(p, d.edge, d.sign)?;
        let target = match d.sign {
            Sign::Pos => &start + t,
            Sign::Neg => &start - t,
        };
        self.point_on_edge(d.edge, target).ok()
    }

    /// Distance profile along edge `e`: `t -> d(x, point at offset t)`.
    pub fn dist_profile(&self, x: &GraphPoint, e: EdgeId) -> PlFn {
        let edge = &self.edges[e.0];
        // candidate affine functions of t, valid on all of [0, len]
        let mut cands: Vec<(Rat, Rat)> = Vec::new();
        for (w, c) in self.exits(x) {
            // via Lo end: c + d(w, u) + t
            cands.push((&c + self.vertex_dist(w, edge.u), rat_int(1)));
            // via Hi end: c + d(w, v) + len - t
            cands.push((&c + self.vertex_dist(w, edge.v) + &edge.len, rat_int(-1)));
        }
        if let GraphPoint::Interior(xe, a) = x {
            if xe == &e {
                // the same-edge direct route |t - a| is affine only per
                // side of a, so build the two sides separately and join.
                let mut left_cands = cands.clone();
                left_cands.push((a.clone(), rat_int(-1)));
                let left = PlFn::min_of_affine(rat_zero(), a.clone(), &left_cands);
                let mut right_cands = cands;
                right_cands.push((-a.clone(), rat_int(1)));
                let right = PlFn::min_of_affine(a.clone(), edge.len.clone(), &right_cands);
                let mut pts: Vec<(Rat, Rat)> = left.breakpoints().to_vec();
                for p in right.breakpoints() {
                    if p.0 > *a {
                        pts.push(p.clone());
                    }
                }
                return PlFn::from_breakpoints(pts);
            }
        }
        PlFn::min_of_affine(rat_zero(), edge.len.clone(), &cands)
    }

    /// Closed (`strict = false`) or open (`strict = true` means `< r`)
    /// metric ball around `x`.
    pub fn ball(&self, x: &GraphPoint, r: &Rat, open: bool) -> Result<Region> {
        if !self.contains_point(x) {
            return Err(CoreError::PointNotOnGraph);
        }
        if *r <= rat_zero() {
            return Err(CoreError::NonpositiveRadius);
        }
        let mut reg = Region::empty();
        for v in self.vertices() {
            let d = self.distance(&GraphPoint::Vertex(v), x)?;
            if (open && d < *r) || (!open && d <= *r) {
                reg.insert_vertex(v);
            }
        }
        for e in self.edge_ids() {
            let prof = self.dist_profile(x, e);
            for span in prof.sublevel(r, open) {
                reg.insert_span(self, e, span);
            }
        }
        Ok(reg.normalized(self))
    }

    /// The distance sphere `{d(x, .) = r}`, a finite set in a metric
    /// graph (it equals the topological ball boundary in the geodesic
    /// realization for radii up to the eccentricity of `x`).
    pub fn sphere(&self, x: &GraphPoint, r: &Rat) -> Result<Vec<GraphPoint>> {
        if !self.contains_point(x) {
            return Err(CoreError::PointNotOnGraph);
        }
        if *r <= rat_zero() {
            return Err(CoreError::NonpositiveRadius);
        }
        let mut out: Vec<GraphPoint> = Vec::new();
        for e in self.edge_ids() {
            let prof = self.dist_profile(x, e);
            for t in prof.level_set(r) {
                out.push(self.point_on_edge(e, t)?);
            }
        }
        out.sort();
        out.dedup();
        Ok(out)
    }

    /// Radii at which the combinatorics of `sphere(x, .)` change:
    /// distances to vertices together with interior meeting values (the
    /// breakpoint values of every per-edge distance profile), 0 excluded.
    pub fn critical_radii(&self, x: &GraphPoint) -> Vec<Rat> {
        let mut out: Vec<Rat> = Vec::new();
        for v in self.vertices() {
            out.push(self.distance(&GraphPoint::Vertex(v), x).expect("valid point"));
        }
        for e in self.edge_ids() {
            out.extend(self.dist_profile(x, e).breakpoint_values());
        }
        out.retain(|r| *r > rat_zero());
        out.sort();
        out.dedup();
        out
    }

    /// Largest distance from `x` to any point of the realization.
    pub fn eccentricity(&self, x: &GraphPoint) -> Rat {
        let mut best = rat_zero();
        for e in self.edge_ids() {
            let m = self.dist_profile(x, e).max_value();
            if m > best {
                best = m;
            }
        }
        if self.edge_count() == 0 {
            for v in self.vertices() {
                let d = self.distance(&GraphPoint::Vertex(v), x).expect("valid");
                if d > best {
                    best = d;
                }
            }
        }
        best
    }

    pub fn diameter(&self) -> Rat {
        let mut best = rat_zero();
        for v in self.vertices() {
            let e = self.eccentricity(&GraphPoint::Vertex(v));
            if e > best {
                best = e;
            }
        }
        // interior-to-interior maxima occur at profile breakpoints of
        // profiles from sphere-change points; vertex eccentricities are
        // enough only for vertex-anchored diameters, so include interior
        // meeting points as centers too.
        for e in self.edge_ids() {
            let prof_pts: Vec<Rat> = self
                .dist_profile(&GraphPoint::Vertex(self.edges[e.0].u), e)
                .breakpoints()
                .iter()
                .map(|(t, _)| t.clone())
                .collect();
            for t in prof_pts {
                if let Ok(p) = self.point_on_edge(e, t) {
                    let ecc = self.eccentricity(&p);
                    if ecc > best {
                        best = ecc;
                    }
                }
            }
        }
        best
    }

    /// Deterministic geodesic from `p` to `q`: among all equal-length
    /// geodesics the lexicographically smallest (edge, direction)
    /// sequence is returned.
    pub fn geodesic(&self, p: &GraphPoint, q: &GraphPoint) -> Result<Walk> {
        if !self.contains_point(p) || !self.contains_point(q) {
            return Err(CoreError::PointNotOnGraph);
        }
        let mut walk = Walk::empty_at(p.clone());
        if p == q {
            return Ok(walk);
        }
        let mut remaining = self.distance(p, q)?;
        let mut cur = p.clone();
        let mut guard = 0usize;
        while &cur != q {
            guard += 1;
            if guard > 4 * (self.vertex_count() + self.edge_count()) + 8 {
                return Err(CoreError::BudgetExceeded("geodesic step bound".into()));
            }
            let mut chosen: Option<(Direction, Rat, GraphPoint)> = None;
            for d in self.directions_at(&cur) {
                let edge = &self.edges[d.edge.0];
                let here = match self.offset_on_edge(&cur, d.edge, d.sign) {
                    Some(o) => o,
                    None => continue,
                };
                // candidate: either stop at q on this edge, or traverse to
                // the far end of the edge.
                let mut cands: Vec<(Rat, GraphPoint)> = Vec::new();
                if let GraphPoint::Interior(qe, b) = q {
                    if qe == &d.edge {
                        let step = match d.sign {
                            Sign::Pos => b - &here,
                            Sign::Neg => &here - b,
                        };
                        if step > rat_zero() {
                            cands.push((step, q.clone()));
                        }
                    }
                }
                let (full_step, far) = match d.sign {
                    Sign::Pos => (&edge.len - &here, GraphPoint::Vertex(edge.v)),
                    Sign::Neg => (here.clone(), GraphPoint::Vertex(edge.u)),
                };
                if full_step > rat_zero() {
                    cands.push((full_step, far));
                }
                for (step, next) in cands {
                    if step <= remaining
                        && self.distance(&next, q)? == &remaining - &step
                    {
                        chosen = Some((d, step, next));
                        break;
                    }
                }
                if chosen.is_some() {
                    break;
                }
            }
            let (d, step, next) = chosen.expect("geodesic step always exists in a connected graph");
            let here = self.offset_on_edge(&cur, d.edge, d.sign).expect("on edge");
            let to = match d.sign {
                Sign::Pos => &here + &step,
                Sign::Neg => &here - &step,
            };
            walk.push_segment(self, Segment { edge: d.edge, from: here, to })?;
            remaining = &remaining - &step;
            cur = next;
        }
        Ok(walk)
    }

    /// Split every edge into pieces of length at most `delta`.
    pub fn subdivide(&self, delta: &Rat) -> Result<(MetricGraph, Subdivision)> {
        if *delta <= rat_zero() {
            return Err(CoreError::NonpositiveMesh);
        }
        let mut spec = GraphSpec { vertices: self.vertex_names.clone(), edges: Vec::new() };
        let mut orig_to_new: Vec<Vec<(usize, Rat)>> = Vec::new(); // (new edge index, start offset)
        for e in self.edge_ids() {
            let edge = &self.edges[e.0];
            // ceil(len / delta)
            let ratio = &edge.len / delta;
            let mut k = ratio.to_integer();
            if Rat::from_integer(k.clone()) < ratio {
                k += 1;
            }
            let k: usize = k.to_string().parse().expect("small subdivision count");
            let piece = &edge.len / rat_int(k as i64);
            let mut chain = Vec::new();
            let mut prev_name = self.vertex_names[edge.u.0].clone();
            for i in 0..k {
                let next_name = if i + 1 == k {
                    self.vertex_names[edge.v.0].clone()
                } else {
                    let name = format!("{}.{}", edge.name, i + 1);
                    spec.vertices.push(name.clone());
                    name
                };
                let edge_name =
                    if k == 1 { edge.name.clone() } else { format!("{}.{}", edge.name, i) };
                chain.push((spec.edges.len(), &piece * rat_int(i as i64)));
                spec.edges.push((edge_name, prev_name, next_name.clone(), piece.clone()));
                prev_name = next_name;
            }
            orig_to_new.push(chain);
        }
        let g2 = MetricGraph::build(&spec)?;
        let sub = Subdivision { orig_to_new };
        Ok((g2, sub))
    }
}

/// Isometric point correspondence produced by `subdivide`.
#[derive(Debug, Clone)]
pub struct Subdivision {
    /// Per original edge, the chain of (new edge index, offset of its Lo
    /// end within the original edge), in order.
    orig_to_new: Vec<Vec<(usize, Rat)>>,
}

impl Subdivision {
    /// Map a point of the original graph to the subdivided graph.
    pub fn map_point(&self, orig: &MetricGraph, sub: &MetricGraph, p: &GraphPoint) -> GraphPoint {
        let _ = orig;
        match p {
            GraphPoint::Vertex(v) => GraphPoint::Vertex(*v),
            GraphPoint::Interior(e, off) => {
                for (new_e, base) in self.orig_to_new[e.0].iter().rev() {
                    if off >= base {
                        return sub
                            .point_on_edge(EdgeId(*new_e), off - base)
                            .expect("offset within piece");
                    }
                }
                unreachable!("offset within original edge");
            }
        }
    }

    /// Map back from the subdivided graph.
    pub fn unmap_point(&self, orig: &MetricGraph, sub: &MetricGraph, p: &GraphPoint) -> GraphPoint {
        let _ = sub;
        match p {
            GraphPoint::Vertex(v) if v.0 < orig.vertex_count() => GraphPoint::Vertex(*v),
            GraphPoint::Vertex(v) => {
                // interior subdivision vertex: locate its chain
                for (orig_e, chain) in self.orig_to_new.iter().enumerate() {
                    for (new_e, base) in chain {
                        let ne = &sub.edge(EdgeId(*new_e));
                        if ne.u == *v {
                            return orig
                                .point_on_edge(EdgeId(orig_e), base.clone())
                                .expect("valid offset");
                        }
                        if ne.v == *v {
                            return orig
                                .point_on_edge(EdgeId(orig_e), base + &ne.len)
                                .expect("valid offset");
                        }
                    }
                }
                unreachable!("vertex of the subdivided graph");
            }
            GraphPoint::Interior(e, off) => {
                for (orig_e, chain) in self.orig_to_new.iter().enumerate() {
                    for (new_e, base) in chain {
                        if *new_e == e.0 {
                            return orig
                                .point_on_edge(EdgeId(orig_e), base + off)
                                .expect("valid offset");
                        }
                    }
                }
                unreachable!("edge of the subdivided graph");
            }
        }
    }
}

/// A directed partial-edge segment: traverses `edge` from offset `from`
/// to offset `to` (either order). Zero-length segments are dropped by
/// normalization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub edge: EdgeId,
    pub from: Rat,
    pub to: Rat,
}

impl Segment {
    pub fn len(&self) -> Rat {
        (&self.to - &self.from).abs()
    }

    pub fn sign(&self) -> Sign {
        if self.to >= self.from {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }

    pub fn reversed(&self) -> Segment {
        Segment { edge: self.edge, from: self.to.clone(), to: self.from.clone() }
    }

    pub fn start_point(&self, g: &MetricGraph) -> GraphPoint {
        g.point_on_edge(self.edge, self.from.clone()).expect("segment offsets valid")
    }

    pub fn end_point(&self, g: &MetricGraph) -> GraphPoint {
        g.point_on_edge(self.edge, self.to.clone()).expect("segment offsets valid")
    }
}

/// A finite concatenation of segments with an explicit start point (so
/// that constant walks are representable).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Walk {
    start: GraphPoint,
    end: GraphPoint,
    segments: Vec<Segment>,
}

impl Walk {
    pub fn empty_at(p: GraphPoint) -> Self {
        Walk { end: p.clone(), start: p, segments: Vec::new() }
    }

    pub fn from_segments(g: &MetricGraph, start: GraphPoint, segments: Vec<Segment>) -> Result<Self> {
        let mut w = Walk::empty_at(start);
        for s in segments {
            w.push_segment(g, s)?;
        }
        Ok(w)
    }

    pub fn start(&self) -> &GraphPoint {
        &self.start
    }

    pub fn end(&self) -> &GraphPoint {
        &self.end
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn is_constant(&self) -> bool {
        self.segments.iter().all(|s| s.len() == rat_zero())
    }

    pub fn push_segment(&mut self, g: &MetricGraph, seg: Segment) -> Result<()> {
        let sp = seg.start_point(g);
        if sp != self.end {
            return Err(CoreError::WalkNotIncident(
                self.segments.len(),
                self.segments.len().saturating_sub(1),
            ));
        }
        if seg.len() == rat_zero() {
            return Ok(());
        }
        // merge straight continuation on the same edge
        if let Some(last) = self.segments.last_mut() {
            if last.edge == seg.edge && last.sign() == seg.sign() && last.to == seg.from {
                last.to = seg.to.clone();
                self.end = seg.end_point(g);
                return Ok(());
            }
        }
        self.end = seg.end_point(g);
        self.segments.push(seg);
        Ok(())
    }

    pub fn extend(&mut self, g: &MetricGraph, other: &Walk) -> Result<()> {
        if other.start != self.end {
            return Err(CoreError::WalkNotIncident(self.segments.len(), 0));
        }
        for s in &other.segments {
            self.push_segment(g, s.clone())?;
        }
        Ok(())
    }

    pub fn reversed(&self, g: &MetricGraph) -> Walk {
        let mut w = Walk::empty_at(self.end.clone());
        for s in self.segments.iter().rev() {
            w.push_segment(g, s.reversed()).expect("reversal stays incident");
        }
        w
    }

    pub fn length(&self) -> Rat {
        self.segments.iter().map(|s| s.len()).sum()
    }

    /// The point at arc-length position `pos` in `[0, length]`.
    pub fn point_at(&self, g: &MetricGraph, pos: &Rat) -> Result<GraphPoint> {
        if *pos < rat_zero() {
            return Err(CoreError::OffsetOutOfRange("walk position".into()));
        }
        let mut acc = rat_zero();
        for s in &self.segments {
            let l = s.len();
            if pos <= &(&acc + &l) {
                let within = pos - &acc;
                let off = match s.sign() {
                    Sign::Pos => &s.from + &within,
                    Sign::Neg => &s.from - &within,
                };
                return g.point_on_edge(s.edge, off);
            }
            acc = &acc + &l;
        }
        if *pos == acc {
            return Ok(self.end.clone());
        }
        Err(CoreError::OffsetOutOfRange("walk position".into()))
    }

    /// Sub-walk between arc-length positions `a <= b`.
    pub fn subwalk(&self, g: &MetricGraph, a: &Rat, b: &Rat) -> Result<Walk> {
        if a > b {
            return Ok(self.subwalk(g, b, a)?.reversed(g));
        }
        let start = self.point_at(g, a)?;
        let mut w = Walk::empty_at(start);
        let mut acc = rat_zero();
        for s in &self.segments {
            let l = s.len();
            let seg_lo = acc.clone();
            let seg_hi = &acc + &l;
            let lo = if a > &seg_lo { a.clone() } else { seg_lo.clone() };
            let hi = if b < &seg_hi { b.clone() } else { seg_hi.clone() };
            if lo < hi {
                let (from, to) = match s.sign() {
                    Sign::Pos => (&s.from + (&lo - &seg_lo), &s.from + (&hi - &seg_lo)),
                    Sign::Neg => (&s.from - (&lo - &seg_lo), &s.from - (&hi - &seg_lo)),
                };
                w.push_segment(g, Segment { edge: s.edge, from, to })?;
            }
            acc = seg_hi;
        }
        Ok(w)
    }

    /// Positions (arc-length) and points of the walk's nodes: start, all
    /// segment boundaries, end.
    pub fn nodes(&self, g: &MetricGraph) -> Vec<(Rat, GraphPoint)> {
        let mut out = vec![(rat_zero(), self.start.clone())];
        let mut acc = rat_zero();
        for s in &self.segments {
            acc = &acc + &s.len();
            out.push((acc.clone(), s.end_point(g)));
        }
        out
    }

    pub fn validate(&self, g: &MetricGraph) -> Result<()> {
        let mut cur = self.start.clone();
        for (i, s) in self.segments.iter().enumerate() {
            if s.start_point(g) != cur {
                return Err(CoreError::WalkNotIncident(i, i.saturating_sub(1)));
            }
            cur = s.end_point(g);
        }
        if cur != self.end {
            return Err(CoreError::WalkStartMismatch);
        }
        Ok(())
    }
}

pub fn fmt_point(g: &MetricGraph, p: &GraphPoint) -> String {
    match p {
        GraphPoint::Vertex(v) => g.vertex_name(*v).to_string(),
        GraphPoint::Interior(e, off) => {
            format!("{}@{}", g.edge(*e).name, fmt_rat(off))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::rat;

    #[test]
    fn build_rejects_bad_specs() {
        let mut spec = GraphSpec {
            vertices: vec!["a".into(), "b".into()],
            edges: vec![("e".into(), "a".into(), "b".into(), rat_int(0))],
        };
        assert!(matches!(MetricGraph::build(&spec), Err(CoreError::NonpositiveLength(_))));
        spec.edges[0].3 = rat_int(1);
        spec.vertices.push("c".into());
        assert!(matches!(MetricGraph::build(&spec), Err(CoreError::Disconnected(_))));
    }

    #[test]
    fn one_point_space() {
        let g = fixtures::one_point();
        assert_eq!(g.vertex_count(), 1);
        let p = GraphPoint::Vertex(VertexId(0));
        assert_eq!(g.distance(&p, &p).unwrap(), rat_int(0));
        assert!(g.critical_radii(&p).is_empty());
        let b = g.ball(&p, &rat_int(5), false).unwrap();
        assert!(b.contains(&g, &p));
    }

    #[test]
    fn cycle_distances() {
        let g = fixtures::cycle_graph(3, rat_int(1));
        let v0 = GraphPoint::Vertex(VertexId(0));
        let v1 = GraphPoint::Vertex(VertexId(1));
        assert_eq!(g.distance(&v0, &v1).unwrap(), rat_int(1));
        // vertex to midpoint of the opposite edge
        let mid = g.point_on_edge(EdgeId(1), rat(1, 2)).unwrap();
        assert_eq!(g.distance(&v0, &mid).unwrap(), rat(3, 2));
        assert_eq!(g.diameter(), rat(3, 2));
    }

    #[test]
    fn path_graph_geodesic() {
        let g = fixtures::path_graph(2);
        let a = GraphPoint::Vertex(VertexId(0));
        let b = GraphPoint::Vertex(VertexId(2));
        let w = g.geodesic(&a, &b).unwrap();
        assert_eq!(w.length(), rat_int(2));
        assert_eq!(w.segments().len(), 2);
        assert_eq!(w.end(), &b);
    }

    #[test]
    fn geodesic_tie_break_prefers_small_edge_ids() {
        let g = fixtures::cycle_graph(4, rat_int(1));
        let v0 = GraphPoint::Vertex(VertexId(0));
        let v2 = GraphPoint::Vertex(VertexId(2));
        let w = g.geodesic(&v0, &v2).unwrap();
        assert_eq!(w.length(), rat_int(2));
        assert_eq!(w.segments()[0].edge, EdgeId(0));
        assert_eq!(g.distance(&v0, &v2).unwrap(), rat_int(2));
    }

    #[test]
    fn geodesic_identity() {
        let g = fixtures::cycle_graph(3, rat_int(1));
        let p = g.point_on_edge(EdgeId(0), rat(1, 3)).unwrap();
        let w = g.geodesic(&p, &p).unwrap();
        assert_eq!(w.length(), rat_int(0));
        assert!(w.segments().is_empty());
    }

    #[test]
    fn sphere_counts() {
        let g = fixtures::path_graph(2);
        let a = GraphPoint::Vertex(VertexId(0));
        let s = g.sphere(&a, &rat(1, 2)).unwrap();
        assert_eq!(s.len(), 1);
        let g4 = fixtures::cycle_graph(4, rat_int(1));
        let s = g4.sphere(&GraphPoint::Vertex(VertexId(0)), &rat(1, 2)).unwrap();
        assert_eq!(s.len(), 2);
        // beyond eccentricity: empty
        let s = g4.sphere(&GraphPoint::Vertex(VertexId(0)), &rat_int(5)).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn critical_radii_examples() {
        let g = fixtures::path_graph(2);
        let m = GraphPoint::Vertex(VertexId(1));
        assert_eq!(g.critical_radii(&m), vec![rat_int(1)]);
        let c3 = fixtures::cycle_graph(3, rat_int(1));
        assert_eq!(
            c3.critical_radii(&GraphPoint::Vertex(VertexId(0))),
            vec![rat_int(1), rat(3, 2)]
        );
    }

    #[test]
    fn ball_covers_whole_space_at_diameter() {
        let g = fixtures::cycle_graph(3, rat_int(1));
        let x = GraphPoint::Vertex(VertexId(0));
        let b = g.ball(&x, &rat(3, 2), false).unwrap();
        assert_eq!(b, Region::whole(&g));
    }

    #[test]
    fn subdivision_preserves_distances() {
        let g = fixtures::cycle_graph(3, rat_int(1));
        let (g2, sub) = g.subdivide(&rat(1, 3)).unwrap();
        assert_eq!(g2.edge_count(), 9);
        for a in g.vertices() {
            for b in g.vertices() {
                let pa = GraphPoint::Vertex(a);
                let pb = GraphPoint::Vertex(b);
                let qa = sub.map_point(&g, &g2, &pa);
                let qb = sub.map_point(&g, &g2, &pb);
                assert_eq!(g.distance(&pa, &pb).unwrap(), g2.distance(&qa, &qb).unwrap());
            }
        }
        let p = g.point_on_edge(EdgeId(0), rat(1, 2)).unwrap();
        let q = sub.map_point(&g, &g2, &p);
        assert_eq!(sub.unmap_point(&g, &g2, &q), p);
    }

    #[test]
    fn subdivision_noop_when_mesh_large() {
        let g = fixtures::path_graph(2);
        let (g2, _) = g.subdivide(&rat_int(5)).unwrap();
        assert_eq!(g2.edge_count(), g.edge_count());
        assert_eq!(g2.vertex_count(), g.vertex_count());
    }

    #[test]
    fn walk_length_additivity() {
        let g = fixtures::path_graph(2);
        // traverse edge 0 fully there and back: length 2
        let mut w = Walk::empty_at(GraphPoint::Vertex(VertexId(0)));
        w.push_segment(&g, Segment { edge: EdgeId(0), from: rat_int(0), to: rat_int(1) }).unwrap();
        w.push_segment(&g, Segment { edge: EdgeId(0), from: rat_int(1), to: rat_int(0) }).unwrap();
        assert_eq!(w.length(), rat_int(2));
        assert_eq!(w.end(), &GraphPoint::Vertex(VertexId(0)));
        w.validate(&g).unwrap();
    }

    #[test]
    fn walk_rejects_non_incident() {
        let g = fixtures::path_graph(2);
        let mut w = Walk::empty_at(GraphPoint::Vertex(VertexId(0)));
        let bad = w.push_segment(&g, Segment { edge: EdgeId(1), from: rat(1, 2), to: rat_int(1) });
        assert!(bad.is_err());
    }

    #[test]
    fn self_loop_geometry() {
        let g = fixtures::cycle_graph(1, rat_int(1));
        let v = GraphPoint::Vertex(VertexId(0));
        let p = g.point_on_edge(EdgeId(0), rat(1, 4)).unwrap();
        assert_eq!(g.distance(&v, &p).unwrap(), rat(1, 4));
        let far = g.point_on_edge(EdgeId(0), rat(1, 2)).unwrap();
        assert_eq!(g.distance(&v, &far).unwrap(), rat(1, 2));
        let q = g.point_on_edge(EdgeId(0), rat(3, 4)).unwrap();
        assert_eq!(g.distance(&p, &q).unwrap(), rat(1, 2));
        let w = g.geodesic(&p, &q).unwrap();
        assert_eq!(w.length(), rat(1, 2));
    }

    #[test]
    fn subwalk_and_point_at() {
        let g = fixtures::path_graph(3);
        let a = GraphPoint::Vertex(VertexId(0));
        let d = GraphPoint::Vertex(VertexId(3));
        let w = g.geodesic(&a, &d).unwrap();
        assert_eq!(w.length(), rat_int(3));
        let mid = w.point_at(&g, &rat(3, 2)).unwrap();
        assert_eq!(mid, g.point_on_edge(EdgeId(1), rat(1, 2)).unwrap());
        let sub = w.subwalk(&g, &rat(1, 2), &rat(5, 2)).unwrap();
        assert_eq!(sub.length(), rat_int(2));
        assert_eq!(sub.start(), &g.point_on_edge(EdgeId(0), rat(1, 2)).unwrap());
        assert_eq!(sub.end(), &g.point_on_edge(EdgeId(2), rat(1, 2)).unwrap());
        let rev = sub.reversed(&g);
        assert_eq!(rev.length(), rat_int(2));
        assert_eq!(rev.start(), sub.end());
    }
}
