//! Finite piecewise-linear subsets of a metric graph realization.
//!
//! A `Region` stores, per edge, a sorted list of disjoint spans with
//! open/closed ends confined to the open edge interior, plus an explicit
//! set of member vertices. Vertex membership is a property of the point
//! itself, so "a vertex belongs on one incident edge iff it belongs on
//! all" holds by construction. Balls, preimages of balls, components
//! U(x,f,r) and normal domains are all values of this type.

use std::collections::{BTreeMap, BTreeSet};

use crate::graph::{EdgeEnd, EdgeId, GraphPoint, MetricGraph, VertexId};
use crate::pl::Span;
use crate::rational::{rat_mid, rat_zero, Rat};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Region {
    verts: BTreeSet<VertexId>,
    ivals: BTreeMap<EdgeId, Vec<Span>>,
}

impl Region {
    pub fn empty() -> Self {
        Region::default()
    }

    pub fn whole(g: &MetricGraph) -> Self {
        let mut r = Region::empty();
        for v in g.vertices() {
            r.verts.insert(v);
        }
        for e in g.edge_ids() {
            let len = g.edge(e).len.clone();
            r.ivals.insert(
                e,
                vec![Span { lo: rat_zero(), hi: len, lo_closed: false, hi_closed: false }],
            );
        }
        r
    }

    pub fn single_point(p: &GraphPoint) -> Self {
        let mut r = Region::empty();
        match p {
            GraphPoint::Vertex(v) => {
                r.verts.insert(*v);
            }
            GraphPoint::Interior(e, off) => {
                r.ivals.insert(*e, vec![Span::point(off.clone())]);
            }
        }
        r
    }

    pub fn insert_vertex(&mut self, v: VertexId) {
        self.verts.insert(v);
    }

    /// Insert a span on an edge (offsets within `[0, len]`); closed ends
    /// at offset 0/len are converted into vertex membership.
    pub fn insert_span(&mut self, g: &MetricGraph, e: EdgeId, mut s: Span) {
        let edge = g.edge(e);
        if s.lo == rat_zero() && s.lo_closed {
            self.verts.insert(edge.u);
            s.lo_closed = false;
        }
        if s.hi == edge.len && s.hi_closed {
            self.verts.insert(edge.v);
            s.hi_closed = false;
        }
        if s.lo == s.hi {
            if s.lo_closed && s.hi_closed {
                // degenerate interior point
                self.ivals.entry(e).or_default().push(Span::point(s.lo));
            }
            return;
        }
        self.ivals.entry(e).or_default().push(s);
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty() && self.ivals.values().all(|v| v.is_empty())
    }

    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.verts.iter().copied()
    }

    pub fn spans(&self) -> impl Iterator<Item = (EdgeId, &Span)> + '_ {
        self.ivals.iter().flat_map(|(e, v)| v.iter().map(move |s| (*e, s)))
    }

    pub fn contains(&self, _g: &MetricGraph, p: &GraphPoint) -> bool {
        match p {
            GraphPoint::Vertex(v) => self.verts.contains(v),
            GraphPoint::Interior(e, off) => self
                .ivals
                .get(e)
                .is_some_and(|spans| spans.iter().any(|s| s.contains(off))),
        }
    }

    /// Canonical form: spans sorted, merged maximally (touching spans
    /// merge when their union is connected), degenerate points absorbed,
    /// empty lists dropped.
    pub fn normalized(&self, g: &MetricGraph) -> Region {
        let mut out = Region { verts: self.verts.clone(), ivals: BTreeMap::new() };
        for (e, spans) in &self.ivals {
            let len = &g.edge(*e).len;
            let merged = union_spans(spans, &[], len);
            if !merged.is_empty() {
                out.ivals.insert(*e, merged);
            }
        }
        out
    }

    pub fn union(&self, g: &MetricGraph, other: &Region) -> Region {
        let mut verts = self.verts.clone();
        verts.extend(other.verts.iter().copied());
        let mut ivals = BTreeMap::new();
        let edges: BTreeSet<EdgeId> =
            self.ivals.keys().chain(other.ivals.keys()).copied().collect();
        for e in edges {
            let a = self.ivals.get(&e).map_or(&[][..], |v| &v[..]);
            let b = other.ivals.get(&e).map_or(&[][..], |v| &v[..]);
            let u = union_spans(a, b, &g.edge(e).len);
            if !u.is_empty() {
                ivals.insert(e, u);
            }
        }
        Region { verts, ivals }
    }

    pub fn intersect(&self, g: &MetricGraph, other: &Region) -> Region {
        self.combine(g, other, |x, y| x && y)
    }

    pub fn difference(&self, g: &MetricGraph, other: &Region) -> Region {
        self.combine(g, other, |x, y| x && !y)
    }

    fn combine(&self, g: &MetricGraph, other: &Region, op: fn(bool, bool) -> bool) -> Region {
        let mut verts = BTreeSet::new();
        for v in g.vertices() {
            if op(self.verts.contains(&v), other.verts.contains(&v)) {
                verts.insert(v);
            }
        }
        let mut ivals = BTreeMap::new();
        let edges: BTreeSet<EdgeId> =
            self.ivals.keys().chain(other.ivals.keys()).copied().collect();
        for e in edges {
            let a = self.ivals.get(&e).map_or(&[][..], |v| &v[..]);
            let b = other.ivals.get(&e).map_or(&[][..], |v| &v[..]);
            let spans = combine_spans(a, b, &g.edge(e).len, op);
            if !spans.is_empty() {
                ivals.insert(e, spans);
            }
        }
        Region { verts, ivals }
    }

    pub fn is_subset(&self, g: &MetricGraph, other: &Region) -> bool {
        self.difference(g, other).is_empty()
    }

    /// Topological closure in the graph realization.
    pub fn closure(&self, g: &MetricGraph) -> Region {
        let mut out = Region { verts: self.verts.clone(), ivals: BTreeMap::new() };
        for (e, spans) in &self.ivals {
            let edge = g.edge(*e);
            let mut closed = Vec::new();
            for s in spans {
                let mut c = s.clone();
                if c.lo == rat_zero() {
                    out.verts.insert(edge.u);
                } else {
                    c.lo_closed = true;
                }
                if c.hi == edge.len {
                    out.verts.insert(edge.v);
                } else {
                    c.hi_closed = true;
                }
                closed.push(c);
            }
            out.ivals.insert(*e, closed);
        }
        out.normalized(g)
    }

    /// Whether the set is open in the graph realization.
    pub fn is_open_set(&self, g: &MetricGraph) -> bool {
        for (e, spans) in &self.ivals {
            let len = &g.edge(*e).len;
            for s in spans {
                if s.is_point() {
                    return false;
                }
                if s.lo_closed && s.lo > rat_zero() {
                    return false;
                }
                if s.hi_closed && s.hi < *len {
                    return false;
                }
            }
        }
        for v in &self.verts {
            for &(e, end) in g.incident(*v) {
                if !self.covers_end(g, e, end) {
                    return false;
                }
            }
        }
        true
    }

    /// Does the region contain a one-sided neighbourhood of the given
    /// edge end (excluding the end vertex itself)?
    fn covers_end(&self, g: &MetricGraph, e: EdgeId, end: EdgeEnd) -> bool {
        let len = &g.edge(e).len;
        self.ivals.get(&e).is_some_and(|spans| {
            spans.iter().any(|s| {
                !s.is_point()
                    && match end {
                        EdgeEnd::Lo => s.lo == rat_zero(),
                        EdgeEnd::Hi => s.hi == *len,
                    }
            })
        })
    }

    /// Does the closure of the region reach the given edge end?
    fn reaches_end(&self, g: &MetricGraph, e: EdgeId, end: EdgeEnd) -> bool {
        let len = &g.edge(e).len;
        self.ivals.get(&e).is_some_and(|spans| {
            spans.iter().any(|s| match end {
                EdgeEnd::Lo => s.lo == rat_zero() && !s.is_point(),
                EdgeEnd::Hi => s.hi == *len && !s.is_point(),
            })
        })
    }

    /// Topological boundary: the finite set of points lying in the
    /// closure of both the region and its complement.
    pub fn boundary(&self, g: &MetricGraph) -> BTreeSet<GraphPoint> {
        let norm = self.normalized(g);
        let mut out = BTreeSet::new();
        for (e, spans) in &norm.ivals {
            let edge = g.edge(*e);
            for s in spans {
                if s.is_point() {
                    out.insert(GraphPoint::Interior(*e, s.lo.clone()));
                    continue;
                }
                // interior span ends are boundary whether or not they are
                // members (closed end: member adjacent to complement; open
                // end: non-member limit of members). Ends at offset 0/len
                // resolve to the vertex case below.
                if s.lo > rat_zero() {
                    out.insert(GraphPoint::Interior(*e, s.lo.clone()));
                }
                if s.hi < edge.len {
                    out.insert(GraphPoint::Interior(*e, s.hi.clone()));
                }
            }
        }
        for v in g.vertices() {
            let member = norm.verts.contains(&v);
            let mut in_closure = member;
            let mut complement_near = !member;
            for &(e, end) in g.incident(v) {
                if norm.reaches_end(g, e, end) {
                    in_closure = true;
                }
                if !norm.covers_end(g, e, end) {
                    complement_near = true;
                }
            }
            if in_closure && complement_near {
                out.insert(GraphPoint::Vertex(v));
            }
        }
        out
    }

    /// Connected components, in deterministic order (sorted by their
    /// smallest member anchor).
    pub fn components(&self, g: &MetricGraph) -> Vec<Region> {
        let norm = self.normalized(g);
        // nodes: one per member vertex + one per span
        let vert_list: Vec<VertexId> = norm.verts.iter().copied().collect();
        let mut span_list: Vec<(EdgeId, Span)> = Vec::new();
        for (e, spans) in &norm.ivals {
            for s in spans {
                span_list.push((*e, s.clone()));
            }
        }
        let n = vert_list.len() + span_list.len();
        let mut dsu: Vec<usize> = (0..n).collect();
        fn find(dsu: &mut [usize], mut x: usize) -> usize {
            while dsu[x] != x {
                dsu[x] = dsu[dsu[x]];
                x = dsu[x];
            }
            x
        }
        let join = |dsu: &mut [usize], a: usize, b: usize| {
            let (ra, rb) = (find(dsu, a), find(dsu, b));
            if ra != rb {
                dsu[ra] = rb;
            }
        };
        let vidx = |v: &VertexId| vert_list.binary_search(v).ok();
        for (i, (e, s)) in span_list.iter().enumerate() {
            let edge = g.edge(*e);
            // span connects to a member vertex through a shared end point
            if s.lo == rat_zero() && !s.is_point() {
                if let Some(j) = vidx(&edge.u) {
                    join(&mut dsu, vert_list.len() + i, j);
                }
            }
            if s.hi == edge.len && !s.is_point() {
                if let Some(j) = vidx(&edge.v) {
                    join(&mut dsu, vert_list.len() + i, j);
                }
            }
        }
        let mut groups: BTreeMap<usize, Region> = BTreeMap::new();
        for (j, v) in vert_list.iter().enumerate() {
            let r = find(&mut dsu, j);
            groups.entry(r).or_insert_with(Region::empty).verts.insert(*v);
        }
        for (i, (e, s)) in span_list.iter().enumerate() {
            let r = find(&mut dsu, vert_list.len() + i);
            groups
                .entry(r)
                .or_insert_with(Region::empty)
                .ivals
                .entry(*e)
                .or_default()
                .push(s.clone());
        }
        let mut comps: Vec<Region> = groups.into_values().map(|c| c.normalized(g)).collect();
        comps.sort_by_key(|c| c.anchor());
        comps
    }

    /// Deterministic ordering key: smallest member vertex, else smallest
    /// (edge, lo) span start.
    fn anchor(&self) -> (usize, usize, Option<Rat>) {
        if let Some(v) = self.verts.iter().next() {
            return (0, v.0, None);
        }
        if let Some((e, spans)) = self.ivals.iter().next() {
            return (1, e.0, Some(spans[0].lo.clone()));
        }
        (2, usize::MAX, None)
    }

    /// An arbitrary member point (used for witnesses).
    pub fn some_point(&self, g: &MetricGraph) -> Option<GraphPoint> {
        if let Some(v) = self.verts.iter().next() {
            return Some(GraphPoint::Vertex(*v));
        }
        for (e, spans) in &self.ivals {
            if let Some(s) = spans.first() {
                let off = if s.is_point() { s.lo.clone() } else { rat_mid(&s.lo, &s.hi) };
                return g.point_on_edge(*e, off).ok();
            }
        }
        None
    }

    /// All span end offsets on an edge (used to schedule exact probes).
    pub fn edge_event_offsets(&self, e: EdgeId) -> Vec<Rat> {
        let mut out = Vec::new();
        if let Some(spans) = self.ivals.get(&e) {
            for s in spans {
                out.push(s.lo.clone());
                out.push(s.hi.clone());
            }
        }
        out
    }
}

/// Union of two span lists over `(0, len)` interiors.
fn union_spans(a: &[Span], b: &[Span], len: &Rat) -> Vec<Span> {
    combine_spans(a, b, len, |x, y| x || y)
}

/// Pointwise boolean combination of two span sets on the open interval
/// `(0, len)`. Works on the atom pattern spanned by all end offsets.
fn combine_spans(a: &[Span], b: &[Span], len: &Rat, op: fn(bool, bool) -> bool) -> Vec<Span> {
    let mut coords: Vec<Rat> = vec![rat_zero(), len.clone()];
    for s in a.iter().chain(b.iter()) {
        coords.push(s.lo.clone());
        coords.push(s.hi.clone());
    }
    coords.sort();
    coords.dedup();
    let inside = |set: &[Span], t: &Rat| set.iter().any(|s| s.contains(t));
    let mut out: Vec<Span> = Vec::new();
    let mut cur: Option<Span> = None;
    fn flush(cur: &mut Option<Span>, out: &mut Vec<Span>) {
        if let Some(s) = cur.take() {
            out.push(s);
        }
    }
    for i in 0..coords.len() {
        let c = &coords[i];
        let member_here = *c > rat_zero() && c < len && op(inside(a, c), inside(b, c));
        if member_here {
            match &mut cur {
                Some(s) => {
                    s.hi = c.clone();
                    s.hi_closed = true;
                }
                None => cur = Some(Span::point(c.clone())),
            }
        } else {
            flush(&mut cur, &mut out);
        }
        if i + 1 < coords.len() {
            let c2 = &coords[i + 1];
            let mid = rat_mid(c, c2);
            if op(inside(a, &mid), inside(b, &mid)) {
                match &mut cur {
                    Some(s) => {
                        s.hi = c2.clone();
                        s.hi_closed = false;
                    }
                    None => {
                        cur = Some(Span {
                            lo: c.clone(),
                            hi: c2.clone(),
                            lo_closed: false,
                            hi_closed: false,
                        })
                    }
                }
            } else {
                flush(&mut cur, &mut out);
            }
        }
    }
    flush(&mut cur, &mut out);
    out
}
