//! Piecewise-linear maps between metric graphs.
//!
//! A `GraphMap` assigns to every source vertex a target vertex and to
//! every source edge a walk in the target, traversed at constant speed
//! (speed 0 for collapsed edges). This class is closed under the maps the
//! theory needs (windings, folds, constants, limits) and every local
//! quantity is piecewise affine with rational breakpoints, so openness,
//! discreteness, fibers, multiplicity, normal domains and the components
//! U(x,f,r) are all decided exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use num_traits::Signed;

use crate::error::{CoreError, Result};
use crate::graph::{
    Direction, EdgeId, GraphPoint, MetricGraph, Segment, Sign, VertexId, Walk,
};
use crate::pl::{PlFn, Span};
use crate::rational::{rat_int, rat_zero, Rat};
use crate::region::Region;

/// Plain description used to build a map: vertex assignment by name plus,
/// per source edge, the image walk as a list of (target edge, forward?)
/// full traversals. An empty list collapses the edge.
#[derive(Debug, Clone, Default)]
pub struct MapSpec {
    pub vertex_map: BTreeMap<String, String>,
    pub edge_map: BTreeMap<String, Vec<(String, bool)>>,
}

#[derive(Debug, Clone)]
pub struct GraphMap {
    source: Arc<MetricGraph>,
    target: Arc<MetricGraph>,
    vertex_map: Vec<VertexId>,
    edge_walks: Vec<Walk>,
    speeds: Vec<Rat>,
}

/// One local direction at a point together with its speed and image
/// direction (`None` on collapsed edges).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirEntry {
    pub dir: Direction,
    pub speed: Rat,
    pub image_dir: Option<Direction>,
}

#[derive(Debug, Clone)]
pub struct DirectionProfile {
    pub point: GraphPoint,
    pub entries: Vec<DirEntry>,
}

/// The preimage of a single target point.
#[derive(Debug, Clone)]
pub struct Fiber {
    pub target: GraphPoint,
    pub discrete: bool,
    /// Isolated preimage points (the full fiber when discrete).
    pub points: Vec<GraphPoint>,
    /// Exact preimage as a region when the fiber is not discrete.
    pub region: Option<Region>,
}

impl GraphMap {
    pub fn build(
        source: Arc<MetricGraph>,
        target: Arc<MetricGraph>,
        spec: &MapSpec,
    ) -> Result<Self> {
        let mut vertex_map = Vec::with_capacity(source.vertex_count());
        for v in source.vertices() {
            let name = source.vertex_name(v);
            let image = spec
                .vertex_map
                .get(name)
                .ok_or_else(|| CoreError::UnknownId(name.to_string()))?;
            vertex_map.push(target.vertex_by_name(image)?);
        }
        let mut edge_walks = Vec::with_capacity(source.edge_count());
        let mut speeds = Vec::with_capacity(source.edge_count());
        for e in source.edge_ids() {
            let edge = source.edge(e);
            let steps = spec
                .edge_map
                .get(&edge.name)
                .ok_or_else(|| CoreError::UnknownId(edge.name.clone()))?;
            let start = GraphPoint::Vertex(vertex_map[edge.u.0]);
            let expected_end = GraphPoint::Vertex(vertex_map[edge.v.0]);
            if steps.is_empty() {
                if start != expected_end {
                    return Err(CoreError::CollapsedEndpointMismatch(edge.name.clone()));
                }
                edge_walks.push(Walk::empty_at(start));
                speeds.push(rat_zero());
                continue;
            }
            let mut walk = Walk::empty_at(start);
            for (gname, forward) in steps {
                let g = target.edge_by_name(gname)?;
                let len = target.edge(g).len.clone();
                let seg = if *forward {
                    Segment { edge: g, from: rat_zero(), to: len }
                } else {
                    Segment { edge: g, from: len, to: rat_zero() }
                };
                walk.push_segment(&target, seg)
                    .map_err(|_| CoreError::EndpointMismatch(edge.name.clone()))?;
            }
            if walk.end() != &expected_end {
                return Err(CoreError::EndpointMismatch(edge.name.clone()));
            }
            speeds.push(walk.length() / &edge.len);
            edge_walks.push(walk);
        }
        Ok(GraphMap { source, target, vertex_map, edge_walks, speeds })
    }

    /// Build directly from prepared walks (used by generators; the same
    /// continuity validation applies).
    pub fn from_walks(
        source: Arc<MetricGraph>,
        target: Arc<MetricGraph>,
        vertex_map: Vec<VertexId>,
        edge_walks: Vec<Walk>,
    ) -> Result<Self> {
        assert_eq!(vertex_map.len(), source.vertex_count());
        assert_eq!(edge_walks.len(), source.edge_count());
        let mut speeds = Vec::with_capacity(edge_walks.len());
        for e in source.edge_ids() {
            let edge = source.edge(e);
            let walk = &edge_walks[e.0];
            walk.validate(&target)?;
            if walk.start() != &GraphPoint::Vertex(vertex_map[edge.u.0])
                || walk.end() != &GraphPoint::Vertex(vertex_map[edge.v.0])
            {
                return Err(CoreError::EndpointMismatch(edge.name.clone()));
            }
            speeds.push(walk.length() / &edge.len);
        }
        Ok(GraphMap { source, target, vertex_map, edge_walks, speeds })
    }

    pub fn source(&self) -> &Arc<MetricGraph> {
        &self.source
    }

    pub fn target(&self) -> &Arc<MetricGraph> {
        &self.target
    }

    pub fn vertex_image(&self, v: VertexId) -> VertexId {
        self.vertex_map[v.0]
    }

    pub fn edge_walk(&self, e: EdgeId) -> &Walk {
        &self.edge_walks[e.0]
    }

    pub fn speed(&self, e: EdgeId) -> &Rat {
        &self.speeds[e.0]
    }

    pub fn speeds(&self) -> &[Rat] {
        &self.speeds
    }

    pub fn eval(&self, p: &GraphPoint) -> Result<GraphPoint> {
        if !self.source.contains_point(p) {
            return Err(CoreError::PointNotOnGraph);
        }
        match p {
            GraphPoint::Vertex(v) => Ok(GraphPoint::Vertex(self.vertex_map[v.0])),
            GraphPoint::Interior(e, off) => {
                let s = &self.speeds[e.0];
                if *s == rat_zero() {
                    Ok(self.edge_walks[e.0].start().clone())
                } else {
                    self.edge_walks[e.0].point_at(&self.target, &(off * s))
                }
            }
        }
    }

    /// The image walk of a walk in the source; its length equals the sum
    /// of speed-weighted segment lengths exactly.
    pub fn image_walk(&self, w: &Walk) -> Result<Walk> {
        w.validate(&self.source)?;
        let mut out = Walk::empty_at(self.eval(w.start())?);
        for seg in w.segments() {
            let s = &self.speeds[seg.edge.0];
            if *s == rat_zero() {
                continue;
            }
            let sub = self.edge_walks[seg.edge.0].subwalk(
                &self.target,
                &(&seg.from * s),
                &(&seg.to * s),
            )?;
            out.extend(&self.target, &sub)?;
        }
        Ok(out)
    }

    /// Interior breakpoint offsets of a source edge: pullbacks of the
    /// image walk's nodes (where the image turns or crosses a target
    /// vertex). Empty for collapsed edges.
    pub fn edge_breakpoints(&self, e: EdgeId) -> Vec<Rat> {
        let s = &self.speeds[e.0];
        if *s == rat_zero() {
            return Vec::new();
        }
        let len = &self.source.edge(e).len;
        let mut out = Vec::new();
        for (pos, _) in self.edge_walks[e.0].nodes(&self.target) {
            let t = &pos / s;
            if t > rat_zero() && t < *len {
                out.push(t);
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// All breakpoints of the map: source vertices plus interior walk
    /// node pullbacks.
    pub fn breakpoints(&self) -> Vec<GraphPoint> {
        let mut out: Vec<GraphPoint> =
            self.source.vertices().map(GraphPoint::Vertex).collect();
        for e in self.source.edge_ids() {
            for t in self.edge_breakpoints(e) {
                out.push(GraphPoint::Interior(e, t));
            }
        }
        out.sort();
        out.dedup();
        out
    }

    /// Local model at a point: one entry per direction, tagged with speed
    /// and image direction.
    pub fn direction_profile(&self, p: &GraphPoint) -> Result<DirectionProfile> {
        if !self.source.contains_point(p) {
            return Err(CoreError::PointNotOnGraph);
        }
        let mut entries = Vec::new();
        for dir in self.source.directions_at(p) {
            let s = self.speeds[dir.edge.0].clone();
            if s == rat_zero() {
                entries.push(DirEntry { dir, speed: s, image_dir: None });
                continue;
            }
            let a = self
                .source
                .offset_on_edge(p, dir.edge, dir.sign)
                .expect("direction anchored at p");
            let pos = &a * &s;
            let forward = dir.sign == Sign::Pos;
            let image_dir = self.walk_direction_at(dir.edge, &pos, forward);
            entries.push(DirEntry { dir, speed: s, image_dir });
        }
        Ok(DirectionProfile { point: p.clone(), entries })
    }

    /// Direction of the image walk of edge `e` at position `pos`, moving
    /// forward or backward along the walk.
    fn walk_direction_at(&self, e: EdgeId, pos: &Rat, forward: bool) -> Option<Direction> {
        let walk = &self.edge_walks[e.0];
        let mut acc = rat_zero();
        for seg in walk.segments() {
            let lo = acc.clone();
            let hi = &acc + &seg.len();
            if forward {
                if pos >= &lo && pos < &hi {
                    return Some(Direction { edge: seg.edge, sign: seg.sign() });
                }
            } else if pos > &lo && pos <= &hi {
                return Some(Direction { edge: seg.edge, sign: seg.sign().flip() });
            }
            acc = hi;
        }
        None
    }

    /// Discreteness: every fiber is finite iff no edge is collapsed.
    pub fn is_discrete(&self) -> (bool, Option<EdgeId>) {
        for e in self.source.edge_ids() {
            if self.speeds[e.0] == rat_zero() {
                return (false, Some(e));
            }
        }
        (true, None)
    }

    /// Openness: at every breakpoint the image directions must cover all
    /// directions of the target at the image point. Interior
    /// non-breakpoints are linear homeomorphisms onto their image.
    pub fn is_open(&self) -> (bool, Option<(GraphPoint, Direction)>) {
        let mut check_points = self.breakpoints();
        for e in self.source.edge_ids() {
            if self.speeds[e.0] == rat_zero() {
                let len = &self.source.edge(e).len;
                check_points.push(GraphPoint::Interior(e, len / rat_int(2)));
            }
        }
        for p in check_points {
            let profile = self.direction_profile(&p).expect("breakpoint on graph");
            let covered: BTreeSet<Direction> =
                profile.entries.iter().filter_map(|en| en.image_dir).collect();
            let fp = self.eval(&p).expect("breakpoint on graph");
            for need in self.target.directions_at(&fp) {
                if !covered.contains(&need) {
                    return (false, Some((p, need)));
                }
            }
        }
        (true, None)
    }

    /// Branched cover = continuous (by construction) + discrete + open.
    pub fn is_branched_cover(&self) -> bool {
        self.is_discrete().0 && self.is_open().0
    }

    pub fn require_branched_cover(&self) -> Result<()> {
        if let (false, Some(e)) = self.is_discrete() {
            return Err(CoreError::NotBranchedCover(format!(
                "edge `{}` is collapsed",
                self.source.edge(e).name
            )));
        }
        if let (false, Some((p, _))) = self.is_open() {
            return Err(CoreError::NotBranchedCover(format!(
                "not open at {}",
                crate::graph::fmt_point(&self.source, &p)
            )));
        }
        Ok(())
    }

    /// Points where the map is not locally injective: breakpoints with
    /// two local directions sharing an image direction.
    pub fn branch_set(&self) -> Result<Vec<GraphPoint>> {
        self.require_branched_cover()?;
        let mut out = Vec::new();
        for p in self.breakpoints() {
            let profile = self.direction_profile(&p)?;
            let dirs: Vec<Direction> =
                profile.entries.iter().filter_map(|en| en.image_dir).collect();
            let mut seen = BTreeSet::new();
            if dirs.iter().any(|d| !seen.insert(*d)) {
                out.push(p);
            }
        }
        Ok(out)
    }

    /// Exact fiber over a target point.
    pub fn fiber(&self, y: &GraphPoint) -> Result<Fiber> {
        if !self.target.contains_point(y) {
            return Err(CoreError::PointNotOnGraph);
        }
        let mut points: BTreeSet<GraphPoint> = BTreeSet::new();
        for v in self.source.vertices() {
            if &GraphPoint::Vertex(self.vertex_map[v.0]) == y {
                points.insert(GraphPoint::Vertex(v));
            }
        }
        let mut collapsed_hits: Vec<EdgeId> = Vec::new();
        for e in self.source.edge_ids() {
            let s = &self.speeds[e.0];
            let walk = &self.edge_walks[e.0];
            if *s == rat_zero() {
                if walk.start() == y {
                    collapsed_hits.push(e);
                }
                continue;
            }
            // positions where the walk passes through y
            let mut positions: Vec<Rat> = Vec::new();
            let mut acc = rat_zero();
            for seg in walk.segments() {
                if let GraphPoint::Interior(g, c) = y {
                    if *g == seg.edge {
                        let lo = seg.from.clone().min(seg.to.clone());
                        let hi = seg.from.clone().max(seg.to.clone());
                        if *c >= lo && *c <= hi {
                            positions.push(&acc + (c - &seg.from).abs());
                        }
                    }
                }
                acc = &acc + &seg.len();
            }
            for (pos, node) in walk.nodes(&self.target) {
                if &node == y {
                    positions.push(pos);
                }
            }
            for pos in positions {
                let t = &pos / s;
                points.insert(self.source.point_on_edge(e, t)?);
            }
        }
        if collapsed_hits.is_empty() {
            Ok(Fiber {
                target: y.clone(),
                discrete: true,
                points: points.into_iter().collect(),
                region: None,
            })
        } else {
            let mut region = Region::empty();
            for p in &points {
                region = region.union(&self.source, &Region::single_point(p));
            }
            for e in collapsed_hits {
                let len = self.source.edge(e).len.clone();
                region.insert_span(
                    &self.source,
                    e,
                    Span { lo: rat_zero(), hi: len, lo_closed: true, hi_closed: true },
                );
            }
            Ok(Fiber {
                target: y.clone(),
                discrete: false,
                points: points.into_iter().collect(),
                region: Some(region.normalized(&self.source)),
            })
        }
    }

    /// N(y, f, A): cardinality of `A` intersected with the fiber over
    /// `y`; `None` when infinite.
    pub fn multiplicity(&self, y: &GraphPoint, a: &Region) -> Result<Option<usize>> {
        let fib = self.fiber(y)?;
        if fib.discrete {
            Ok(Some(fib.points.iter().filter(|p| a.contains(&self.source, p)).count()))
        } else {
            let region = fib.region.expect("non-discrete fiber carries a region");
            let meet = region.intersect(&self.source, a);
            match count_region_points(&meet) {
                Some(n) => Ok(Some(n)),
                None => Ok(None),
            }
        }
    }

    /// N(f, A) = sup over y of N(y, f, A), computed over the finitely
    /// many combinatorial regimes of y; `None` when infinite.
    pub fn max_multiplicity(&self, a: &Region) -> Result<Option<usize>> {
        // candidate target points: vertices, walk node offsets, images of
        // region span ends, and regime midpoints between consecutive ones.
        let mut per_edge: BTreeMap<EdgeId, Vec<Rat>> = BTreeMap::new();
        for e in self.source.edge_ids() {
            let walk = &self.edge_walks[e.0];
            for (_, node) in walk.nodes(&self.target) {
                if let GraphPoint::Interior(g, c) = node {
                    per_edge.entry(g).or_default().push(c);
                }
            }
            // images of the region's span ends on this source edge
            for t in a.edge_event_offsets(e) {
                if let Ok(GraphPoint::Interior(g, c)) =
                    self.eval(&self.source.point_on_edge(e, t)?)
                {
                    per_edge.entry(g).or_default().push(c);
                }
            }
        }
        let mut candidates: Vec<GraphPoint> =
            self.target.vertices().map(GraphPoint::Vertex).collect();
        for g in self.target.edge_ids() {
            let len = &self.target.edge(g).len;
            let mut offs = per_edge.remove(&g).unwrap_or_default();
            offs.push(rat_zero());
            offs.push(len.clone());
            offs.sort();
            offs.dedup();
            for w in offs.windows(2) {
                candidates.push(GraphPoint::Interior(g, crate::rational::rat_mid(&w[0], &w[1])));
            }
            for off in offs {
                if off > rat_zero() && off < *len {
                    candidates.push(GraphPoint::Interior(g, off));
                }
            }
        }
        let mut best = 0usize;
        for y in candidates {
            match self.multiplicity(&y, a)? {
                Some(n) => best = best.max(n),
                None => return Ok(None),
            }
        }
        Ok(Some(best))
    }

    /// Exact preimage of a target region.
    pub fn preimage_region(&self, b: &Region) -> Result<Region> {
        let mut out = Region::empty();
        for v in self.source.vertices() {
            if b.contains(&self.target, &GraphPoint::Vertex(self.vertex_map[v.0])) {
                out.insert_vertex(v);
            }
        }
        for e in self.source.edge_ids() {
            let s = &self.speeds[e.0];
            let len = self.source.edge(e).len.clone();
            let walk = &self.edge_walks[e.0];
            if *s == rat_zero() {
                if b.contains(&self.target, walk.start()) {
                    out.insert_span(
                        &self.source,
                        e,
                        Span { lo: rat_zero(), hi: len, lo_closed: true, hi_closed: true },
                    );
                }
                continue;
            }
            let mut acc = rat_zero();
            for seg in walk.segments() {
                let seg_len = seg.len();
                let lo_off = seg.from.clone().min(seg.to.clone());
                let hi_off = seg.from.clone().max(seg.to.clone());
                let coverage =
                    Span { lo: lo_off, hi: hi_off, lo_closed: true, hi_closed: true };
                for (ge, span) in b.spans() {
                    if ge != seg.edge {
                        continue;
                    }
                    if let Some(clip) = intersect_spans(span, &coverage) {
                        out.insert_span(&self.source, e, pull_back(seg, &acc, s, &clip));
                    }
                }
                acc = &acc + &seg_len;
            }
            // target vertex members hit by walk nodes
            for (pos, node) in walk.nodes(&self.target) {
                if b.contains(&self.target, &node) {
                    let t = &pos / s;
                    if t > rat_zero() && t < len {
                        out.insert_span(&self.source, e, Span::point(t));
                    }
                }
            }
        }
        Ok(out.normalized(&self.source))
    }

    /// Image of the closure of a region (equivalently the closure of its
    /// image): a closed region in the target.
    pub fn image_region_closure(&self, r: &Region) -> Result<Region> {
        let closed = r.closure(&self.source);
        let mut out = Region::empty();
        let insert_point = |out: &mut Region, p: &GraphPoint| match p {
            GraphPoint::Vertex(v) => out.insert_vertex(*v),
            GraphPoint::Interior(e, off) => {
                out.insert_span(&self.target, *e, Span::point(off.clone()))
            }
        };
        for v in closed.vertices() {
            out.insert_vertex(self.vertex_map[v.0]);
        }
        for (e, span) in closed.spans() {
            let s = &self.speeds[e.0];
            if *s == rat_zero() {
                insert_point(&mut out, self.edge_walks[e.0].start());
                continue;
            }
            let sub = self.edge_walks[e.0].subwalk(
                &self.target,
                &(&span.lo * s),
                &(&span.hi * s),
            )?;
            if sub.segments().is_empty() {
                insert_point(&mut out, sub.start());
            }
            for seg in sub.segments() {
                let lo = seg.from.clone().min(seg.to.clone());
                let hi = seg.from.clone().max(seg.to.clone());
                out.insert_span(
                    &self.target,
                    seg.edge,
                    Span { lo, hi, lo_closed: true, hi_closed: true },
                );
            }
        }
        Ok(out.normalized(&self.target))
    }

    /// Exact image of an arbitrary region: the closed image of the
    /// closure minus those images of missing boundary points that are not
    /// attained elsewhere in the region.
    pub fn image_region(&self, r: &Region) -> Result<Region> {
        let closed = r.closure(&self.source);
        let mut img = self.image_region_closure(r)?;
        let missing = closed.difference(&self.source, r);
        let mut punctures: BTreeSet<GraphPoint> = BTreeSet::new();
        for v in missing.vertices() {
            punctures.insert(GraphPoint::Vertex(self.vertex_map[v.0]));
        }
        for (e, span) in missing.spans() {
            debug_assert!(span.is_point(), "closure minus set is a finite point set");
            punctures.insert(self.eval(&self.source.point_on_edge(e, span.lo.clone())?)?);
        }
        for q in punctures {
            let fib = self.fiber(&q)?;
            let attained = if fib.discrete {
                fib.points.iter().any(|p| r.contains(&self.source, p))
            } else {
                !fib
                    .region
                    .as_ref()
                    .expect("region present")
                    .intersect(&self.source, r)
                    .is_empty()
            };
            if !attained {
                img = img.difference(&self.target, &Region::single_point(&q));
            }
        }
        Ok(img.normalized(&self.target))
    }

    /// U(x, f, r): the component of the preimage of the open ball
    /// B(f(x), r) containing x.
    pub fn u_component(&self, x: &GraphPoint, r: &Rat) -> Result<Region> {
        if !self.source.contains_point(x) {
            return Err(CoreError::PointNotOnGraph);
        }
        let fx = self.eval(x)?;
        let ball = self.target.ball(&fx, r, true)?;
        let pre = self.preimage_region(&ball)?;
        for comp in pre.components(&self.source) {
            if comp.contains(&self.source, x) {
                return Ok(comp);
            }
        }
        unreachable!("x lies in the preimage of every ball around f(x)");
    }

    /// Distance profile of the image: `t -> d(y, f(point at offset t))`
    /// on a source edge. Its breakpoint values are the radii where the
    /// preimage combinatorics of balls around `y` change.
    pub fn image_dist_profile(&self, y: &GraphPoint, e: EdgeId) -> PlFn {
        let s = &self.speeds[e.0];
        let len = self.source.edge(e).len.clone();
        let walk = &self.edge_walks[e.0];
        if *s == rat_zero() {
            let d = self
                .target
                .distance(y, walk.start())
                .expect("valid points");
            return PlFn::from_breakpoints(vec![(rat_zero(), d.clone()), (len, d)]);
        }
        let mut ts: Vec<Rat> = vec![rat_zero(), len.clone()];
        let mut acc = rat_zero();
        for seg in walk.segments() {
            let seg_len = seg.len();
            // node position
            let t = &acc / s;
            if t > rat_zero() && t < len {
                ts.push(t);
            }
            // target profile breakpoints inside the covered range
            let prof = self.target.dist_profile(y, seg.edge);
            let lo = seg.from.clone().min(seg.to.clone());
            let hi = seg.from.clone().max(seg.to.clone());
            for (c, _) in prof.breakpoints() {
                if *c > lo && *c < hi {
                    let pos = &acc + (c - &seg.from).abs();
                    let t = pos / s;
                    if t > rat_zero() && t < len {
                        ts.push(t);
                    }
                }
            }
            acc = &acc + &seg_len;
        }
        ts.sort();
        ts.dedup();
        let pts = ts
            .into_iter()
            .map(|t| {
                let p = walk
                    .point_at(&self.target, &(&t * s))
                    .expect("position within walk");
                let d = self.target.distance(y, &p).expect("valid points");
                (t, d)
            })
            .collect();
        PlFn::from_breakpoints(pts)
    }

    /// All radii at which the structure of preimages of balls around `y`
    /// can change.
    pub fn critical_image_radii(&self, y: &GraphPoint) -> Vec<Rat> {
        let mut out: Vec<Rat> = Vec::new();
        for e in self.source.edge_ids() {
            out.extend(self.image_dist_profile(y, e).breakpoint_values());
        }
        out.retain(|r| *r > rat_zero());
        out.sort();
        out.dedup();
        out
    }

    /// `∂f(U) = f(∂U)` for an open connected region.
    pub fn is_normal_domain(&self, u: &Region) -> Result<bool> {
        if !u.is_open_set(&self.source) {
            return Err(CoreError::Precondition("normal domain candidate must be open".into()));
        }
        if u.components(&self.source).len() != 1 {
            return Err(CoreError::Precondition(
                "normal domain candidate must be connected".into(),
            ));
        }
        let fu = self.image_region(u)?;
        let bd_fu = fu.boundary(&self.target);
        let mut f_bd_u: BTreeSet<GraphPoint> = BTreeSet::new();
        for p in u.boundary(&self.source) {
            f_bd_u.insert(self.eval(&p)?);
        }
        Ok(bd_fu == f_bd_u)
    }

    /// Normal domain that meets the fiber of `f(x)` only at `x` (in its
    /// closure).
    pub fn is_normal_neighbourhood(&self, u: &Region, x: &GraphPoint) -> Result<bool> {
        if !u.contains(&self.source, x) {
            return Ok(false);
        }
        if !self.is_normal_domain(u)? {
            return Ok(false);
        }
        let closure = u.closure(&self.source);
        let fib = self.fiber(&self.eval(x)?)?;
        if fib.discrete {
            let inside: Vec<&GraphPoint> =
                fib.points.iter().filter(|p| closure.contains(&self.source, p)).collect();
            Ok(inside.len() == 1 && inside[0] == x)
        } else {
            let meet = fib
                .region
                .as_ref()
                .expect("region present")
                .intersect(&self.source, &closure);
            Ok(meet == Region::single_point(x).normalized(&self.source))
        }
    }

    /// Largest radius r_x such that U(x, f, r) is a proper normal
    /// neighbourhood of x for every r < r_x.
    pub fn max_normal_radius(&self, x: &GraphPoint) -> Result<Rat> {
        self.require_branched_cover()?;
        let fx = self.eval(x)?;
        let whole = Region::whole(&self.source);
        let crit = self.critical_image_radii(&fx);
        let test = |r: &Rat| -> Result<bool> {
            let u = self.u_component(x, r)?;
            if u == whole {
                return Ok(false);
            }
            self.is_normal_neighbourhood(&u, x)
        };
        scan_critical_prefix(&crit, test)
    }

    /// Disjoint normal neighbourhoods U(z, f, r) of the fiber points of
    /// `y` inside a normal domain `U`, with their union equal to
    /// `U ∩ f^{-1}(B(y, r))`, for all r below the returned radius;
    /// verified exactly at the returned witness radius.
    pub fn vaisala_decomposition(
        &self,
        u: &Region,
        y: &GraphPoint,
    ) -> Result<VaisalaDecomposition> {
        self.require_branched_cover()?;
        if !self.is_normal_domain(u)? {
            return Err(CoreError::Precondition("U must be a normal domain".into()));
        }
        let fu = self.image_region(u)?;
        if !fu.contains(&self.target, y) {
            return Err(CoreError::Precondition("y must lie in f(U)".into()));
        }
        let fib = self.fiber(y)?;
        let zs: Vec<GraphPoint> = fib
            .points
            .iter()
            .filter(|p| u.contains(&self.source, p))
            .cloned()
            .collect();
        if zs.is_empty() {
            return Err(CoreError::Precondition("fiber of y misses U".into()));
        }
        let crit = self.critical_image_radii(y);
        let test = |r: &Rat| -> Result<bool> {
            let ball = self.target.ball(y, r, true)?;
            let pre = self.preimage_region(&ball)?.intersect(&self.source, u);
            let mut union = Region::empty();
            for z in &zs {
                let uz = self.u_component(z, r)?;
                if !self.is_normal_neighbourhood(&uz, z)? {
                    return Ok(false);
                }
                if !uz.is_subset(&self.source, u) {
                    return Ok(false);
                }
                if !uz.intersect(&self.source, &union).is_empty() {
                    return Ok(false);
                }
                union = union.union(&self.source, &uz);
            }
            Ok(union.normalized(&self.source) == pre.normalized(&self.source))
        };
        let r_max = scan_critical_prefix(&crit, test)?;
        if r_max == rat_zero() {
            return Err(CoreError::Precondition("no positive decomposition radius".into()));
        }
        let witness = &r_max / rat_int(2);
        let neighbourhoods: Vec<Region> =
            zs.iter().map(|z| self.u_component(z, &witness)).collect::<Result<_>>()?;
        Ok(VaisalaDecomposition { fiber_points: zs, r_max, witness, neighbourhoods })
    }

    /// Connectivity of `U ∩ f^{-1}(W)` for a normal neighbourhood `U` of
    /// `x` and a connected open `W ⊆ f(U)` containing `f(x)`.
    pub fn connected_preimage_check(
        &self,
        x: &GraphPoint,
        u: &Region,
        w: &Region,
    ) -> Result<bool> {
        if !self.is_normal_neighbourhood(u, x)? {
            return Err(CoreError::Precondition("U must be a normal neighbourhood of x".into()));
        }
        if !w.is_open_set(&self.target) || w.components(&self.target).len() != 1 {
            return Err(CoreError::Precondition("W must be open and connected".into()));
        }
        if !w.contains(&self.target, &self.eval(x)?) {
            return Err(CoreError::Precondition("W must contain f(x)".into()));
        }
        let fu = self.image_region(u)?;
        if !w.is_subset(&self.target, &fu) {
            return Err(CoreError::Precondition("W must lie inside f(U)".into()));
        }
        let pre = self.preimage_region(w)?.intersect(&self.source, u);
        Ok(pre.components(&self.source).len() == 1)
    }
}

#[derive(Debug, Clone)]
pub struct VaisalaDecomposition {
    pub fiber_points: Vec<GraphPoint>,
    pub r_max: Rat,
    pub witness: Rat,
    pub neighbourhoods: Vec<Region>,
}

/// Scan the probe schedule mid(0,c1), c1, mid(c1,c2), ..., cn, cn+1 and
/// return the supremum radius below which `test` holds: the critical
/// value at (or below) the first failing probe.
fn scan_critical_prefix<F>(crit: &[Rat], mut test: F) -> Result<Rat>
where
    F: FnMut(&Rat) -> Result<bool>,
{
    let mut prev = rat_zero();
    for c in crit {
        let mid = crate::rational::rat_mid(&prev, c);
        if mid > rat_zero() && !test(&mid)? {
            return Ok(prev);
        }
        if !test(c)? {
            return Ok(c.clone());
        }
        prev = c.clone();
    }
    let beyond = &prev + rat_int(1);
    if !test(&beyond)? {
        return Ok(prev);
    }
    // everything passes; the structure is stable beyond the last critical
    // radius, so the property holds for all radii.
    Ok(beyond)
}

/// Count the points in a region consisting only of isolated points;
/// `None` if it contains a nondegenerate span.
pub fn count_region_points(r: &Region) -> Option<usize> {
    let mut n = r.vertices().count();
    for (_, s) in r.spans() {
        if s.is_point() {
            n += 1;
        } else {
            return None;
        }
    }
    Some(n)
}

fn intersect_spans(a: &Span, b: &Span) -> Option<Span> {
    let (lo, lo_closed) = if a.lo > b.lo {
        (a.lo.clone(), a.lo_closed)
    } else if b.lo > a.lo {
        (b.lo.clone(), b.lo_closed)
    } else {
        (a.lo.clone(), a.lo_closed && b.lo_closed)
    };
    let (hi, hi_closed) = if a.hi < b.hi {
        (a.hi.clone(), a.hi_closed)
    } else if b.hi < a.hi {
        (b.hi.clone(), b.hi_closed)
    } else {
        (a.hi.clone(), a.hi_closed && b.hi_closed)
    };
    if lo < hi || (lo == hi && lo_closed && hi_closed) {
        Some(Span { lo, hi, lo_closed, hi_closed })
    } else {
        None
    }
}

/// Pull a clipped target span back through one walk segment into source
/// offsets. `acc` is the walk position at the segment start, `s` the
/// edge speed.
fn pull_back(seg: &Segment, acc: &Rat, s: &Rat, clip: &Span) -> Span {
    match seg.sign() {
        Sign::Pos => {
            let lo = (acc + (&clip.lo - &seg.from)) / s;
            let hi = (acc + (&clip.hi - &seg.from)) / s;
            Span { lo, hi, lo_closed: clip.lo_closed, hi_closed: clip.hi_closed }
        }
        Sign::Neg => {
            let lo = (acc + (&seg.from - &clip.hi)) / s;
            let hi = (acc + (&seg.from - &clip.lo)) / s;
            Span { lo, hi, lo_closed: clip.hi_closed, hi_closed: clip.lo_closed }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rational::rat;

    #[test]
    fn build_validates_continuity() {
        let x = Arc::new(fixtures::path_graph(2));
        let y = Arc::new(fixtures::path_graph(1));
        // edge e1 image starts at the wrong vertex
        let spec = MapSpec {
            vertex_map: [("v0", "v0"), ("v1", "v1"), ("v2", "v0")]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b.to_string()))
                .collect(),
            edge_map: [("e0", vec![("e0".to_string(), true)]), ("e1", vec![("e0".to_string(), true)])]
                .into_iter()
                .map(|(a, b)| (a.to_string(), b))
                .collect(),
        };
        assert!(matches!(
            GraphMap::build(x, y, &spec),
            Err(CoreError::EndpointMismatch(_))
        ));
    }

    #[test]
    fn winding_speeds_are_one() {
        let w2 = fixtures::winding(2, 3);
        assert!(w2.speeds().iter().all(|s| *s == rat_int(1)));
        assert!(w2.is_branched_cover());
        assert!(w2.branch_set().unwrap().is_empty());
    }

    #[test]
    fn eval_speed2_midpoint() {
        let f = fixtures::speed2();
        let mid = f.source().point_on_edge(EdgeId(0), rat(1, 2)).unwrap();
        assert_eq!(f.eval(&mid).unwrap(), GraphPoint::Vertex(VertexId(1)));
        let q = f.source().point_on_edge(EdgeId(0), rat(1, 4)).unwrap();
        assert_eq!(
            f.eval(&q).unwrap(),
            f.target().point_on_edge(EdgeId(0), rat(1, 2)).unwrap()
        );
    }

    #[test]
    fn const_map_evaluates_to_point() {
        let f = fixtures::const_map();
        let p = f.source().point_on_edge(EdgeId(1), rat(2, 7)).unwrap();
        assert_eq!(f.eval(&p).unwrap(), GraphPoint::Vertex(VertexId(0)));
        let (discrete, witness) = f.is_discrete();
        assert!(!discrete);
        assert!(witness.is_some());
        assert!(f.is_open().0, "constant map to the one-point space is open");
        assert!(!f.is_branched_cover());
    }

    #[test]
    fn tent_image_walk_and_branch_set() {
        let f = fixtures::tent();
        let x = f.source();
        let a = GraphPoint::Vertex(VertexId(0));
        let b = GraphPoint::Vertex(VertexId(2));
        let w = x.geodesic(&a, &b).unwrap();
        let img = f.image_walk(&w).unwrap();
        assert_eq!(img.length(), rat_int(2));
        assert_eq!(img.start(), &GraphPoint::Vertex(VertexId(0)));
        assert_eq!(img.end(), &GraphPoint::Vertex(VertexId(0)));
        assert!(f.is_branched_cover());
        assert_eq!(f.branch_set().unwrap(), vec![GraphPoint::Vertex(VertexId(1))]);
    }

    #[test]
    fn fold_is_not_open_at_middle_vertex() {
        let f = fixtures::fold();
        let (open, witness) = f.is_open();
        assert!(!open);
        let (p, _missing) = witness.unwrap();
        assert_eq!(p, GraphPoint::Vertex(VertexId(1)));
        assert!(f.is_discrete().0);
        assert!(!f.is_branched_cover());
    }

    #[test]
    fn tent_is_open_despite_fold() {
        let f = fixtures::tent();
        assert!(f.is_open().0, "fold point maps to a degree-1 vertex");
    }

    #[test]
    fn fiber_counts() {
        let w2 = fixtures::winding(2, 3);
        for v in w2.target().vertices() {
            let fib = w2.fiber(&GraphPoint::Vertex(v)).unwrap();
            assert!(fib.discrete);
            assert_eq!(fib.points.len(), 2);
        }
        let y = w2.target().point_on_edge(EdgeId(1), rat(1, 3)).unwrap();
        assert_eq!(w2.fiber(&y).unwrap().points.len(), 2);

        let tent = fixtures::tent();
        let w = GraphPoint::Vertex(VertexId(1));
        assert_eq!(tent.fiber(&w).unwrap().points.len(), 1);
        let inner = tent.target().point_on_edge(EdgeId(0), rat(1, 2)).unwrap();
        assert_eq!(tent.fiber(&inner).unwrap().points.len(), 2);
        assert_eq!(
            tent.max_multiplicity(&Region::whole(tent.source())).unwrap(),
            Some(2)
        );
    }

    #[test]
    fn const_fiber_is_a_region() {
        let f = fixtures::const_map();
        let fib = f.fiber(&GraphPoint::Vertex(VertexId(0))).unwrap();
        assert!(!fib.discrete);
        assert_eq!(fib.region.as_ref().unwrap(), &Region::whole(f.source()));
        assert_eq!(f.max_multiplicity(&Region::whole(f.source())).unwrap(), None);
    }

    #[test]
    fn preimage_under_speed2() {
        let f = fixtures::speed2();
        let mid_vertex = GraphPoint::Vertex(VertexId(1));
        let ball = f.target().ball(&mid_vertex, &rat(1, 2), false).unwrap();
        let pre = f.preimage_region(&ball).unwrap();
        // preimage = interval of radius 1/4 around the source midpoint
        assert!(pre.contains(f.source(), &f.source().point_on_edge(EdgeId(0), rat(1, 4)).unwrap()));
        assert!(pre.contains(f.source(), &f.source().point_on_edge(EdgeId(0), rat(3, 4)).unwrap()));
        assert!(!pre.contains(f.source(), &f.source().point_on_edge(EdgeId(0), rat(1, 5)).unwrap()));
        let b = pre.boundary(f.source());
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn identity_preimage_is_identity() {
        let g = Arc::new(fixtures::cycle_graph(3, rat_int(1)));
        let id = fixtures::identity(&g);
        let x = GraphPoint::Vertex(VertexId(0));
        let ball = g.ball(&x, &rat(2, 3), false).unwrap();
        assert_eq!(id.preimage_region(&ball).unwrap(), ball.normalized(&g));
        assert_eq!(id.image_region(&ball).unwrap(), ball.normalized(&g));
    }

    #[test]
    fn u_component_tent_middle() {
        let f = fixtures::tent();
        let m = GraphPoint::Vertex(VertexId(1));
        let u = f.u_component(&m, &rat(1, 2)).unwrap();
        assert!(u.is_open_set(f.source()));
        assert!(u.contains(f.source(), &m));
        assert!(u.contains(f.source(), &f.source().point_on_edge(EdgeId(0), rat(7, 8)).unwrap()));
        assert!(u.contains(f.source(), &f.source().point_on_edge(EdgeId(1), rat(1, 8)).unwrap()));
        assert!(!u.contains(f.source(), &f.source().point_on_edge(EdgeId(0), rat(1, 2)).unwrap()));
        let bd = u.boundary(f.source());
        assert_eq!(bd.len(), 2);
        assert!(f.is_normal_neighbourhood(&u, &m).unwrap());
    }

    #[test]
    fn u_component_separates_winding_fiber() {
        let w2 = fixtures::winding(2, 3);
        let x = GraphPoint::Vertex(VertexId(0));
        let u = w2.u_component(&x, &rat(1, 2)).unwrap();
        assert!(u.contains(w2.source(), &x));
        // the antipodal fiber point is excluded
        assert!(!u.contains(w2.source(), &GraphPoint::Vertex(VertexId(3))));
        assert!(w2.is_normal_neighbourhood(&u, &x).unwrap());
    }

    #[test]
    fn whole_space_is_normal_domain_but_not_neighbourhood_for_w2() {
        let w2 = fixtures::winding(2, 3);
        let whole = Region::whole(w2.source());
        assert!(w2.is_normal_domain(&whole).unwrap());
        let x = GraphPoint::Vertex(VertexId(0));
        assert!(!w2.is_normal_neighbourhood(&whole, &x).unwrap());
    }

    #[test]
    fn max_normal_radius_fixture_values() {
        let g = Arc::new(fixtures::cycle_graph(3, rat_int(1)));
        let id = fixtures::identity(&g);
        let x = GraphPoint::Vertex(VertexId(0));
        assert_eq!(id.max_normal_radius(&x).unwrap(), rat(3, 2));

        let w2 = fixtures::winding(2, 3);
        assert_eq!(w2.max_normal_radius(&GraphPoint::Vertex(VertexId(0))).unwrap(), rat(3, 2));

        let tent = fixtures::tent();
        assert_eq!(
            tent.max_normal_radius(&GraphPoint::Vertex(VertexId(1))).unwrap(),
            rat_int(1)
        );
    }

    #[test]
    fn vaisala_decomposition_w2() {
        let w2 = fixtures::winding(2, 3);
        let whole = Region::whole(w2.source());
        let y = GraphPoint::Vertex(VertexId(0));
        let dec = w2.vaisala_decomposition(&whole, &y).unwrap();
        assert_eq!(dec.r_max, rat(3, 2));
        assert_eq!(dec.neighbourhoods.len(), 2);
        // at r = 1/2 the two arcs are disjoint and their union is the
        // full preimage of the open ball
        let ball = w2.target().ball(&y, &rat(1, 2), true).unwrap();
        let pre = w2.preimage_region(&ball).unwrap();
        let u0 = w2.u_component(&dec.fiber_points[0], &rat(1, 2)).unwrap();
        let u1 = w2.u_component(&dec.fiber_points[1], &rat(1, 2)).unwrap();
        assert!(u0.intersect(w2.source(), &u1).is_empty());
        assert_eq!(u0.union(w2.source(), &u1).normalized(w2.source()), pre);
    }

    #[test]
    fn u_component_is_intersection_with_larger_component() {
        // U(x,f,r) = U(x,f,r0) ∩ f^{-1}(B(f(x),r)) for r < r0
        for (f, x) in [
            (fixtures::winding(2, 3), GraphPoint::Vertex(VertexId(0))),
            (fixtures::tent(), GraphPoint::Vertex(VertexId(1))),
            (fixtures::identity(&Arc::new(fixtures::cycle_graph(3, rat_int(1)))), GraphPoint::Vertex(VertexId(1))),
        ] {
            let r0 = f.max_normal_radius(&x).unwrap();
            let big = f.u_component(&x, &r0).unwrap();
            for frac in [rat(1, 4), rat(1, 2), rat(3, 4)] {
                let r = &r0 * &frac;
                let small = f.u_component(&x, &r).unwrap();
                let ball = f.target().ball(&f.eval(&x).unwrap(), &r, true).unwrap();
                let pre = f.preimage_region(&ball).unwrap();
                let expected = big.intersect(f.source(), &pre).normalized(f.source());
                assert_eq!(small, expected);
            }
        }
    }

    #[test]
    fn connected_preimage_tent() {
        let f = fixtures::tent();
        let m = GraphPoint::Vertex(VertexId(1));
        let u = f.u_component(&m, &rat(1, 2)).unwrap();
        let w = f.target().ball(&f.eval(&m).unwrap(), &rat(1, 4), true).unwrap();
        assert!(f.connected_preimage_check(&m, &u, &w).unwrap());
    }
}
