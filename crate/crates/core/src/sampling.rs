//! Deterministic generators for randomized suites: connected graphs with
//! small rational edge lengths, branched covers built from combinatorial
//! sheet gluings, and random rectifiable walks. Everything is driven by
//! a seeded SplitMix64 so failures replay exactly.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::graph::{Direction, GraphPoint, GraphSpec, MetricGraph, Segment, Sign, Walk};
use crate::map::GraphMap;
use crate::rational::{rat, rat_zero, Rat};

pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed.wrapping_add(0x9e3779b97f4a7c15) }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in `0..n` (n > 0).
    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// A random positive rational p/q with p in 1..=num_max and q in
    /// 1..=den_max.
    pub fn positive_rat(&mut self, num_max: i64, den_max: i64) -> Rat {
        let p = 1 + self.below(num_max as usize) as i64;
        let q = 1 + self.below(den_max as usize) as i64;
        rat(p, q)
    }
}

/// A random connected multigraph with `n_vertices` vertices and up to
/// `extra_edges` edges beyond a spanning tree; lengths have numerators
/// and denominators bounded by `den_max`.
pub fn random_connected_graph(
    rng: &mut Rng,
    n_vertices: usize,
    extra_edges: usize,
    den_max: i64,
) -> MetricGraph {
    assert!(n_vertices >= 1);
    let vertices: Vec<String> = (0..n_vertices).map(|i| format!("v{i}")).collect();
    let mut edges = Vec::new();
    for i in 1..n_vertices {
        let parent = rng.below(i);
        edges.push((
            format!("e{}", edges.len()),
            format!("v{parent}"),
            format!("v{i}"),
            rng.positive_rat(den_max, den_max),
        ));
    }
    for _ in 0..extra_edges {
        let a = rng.below(n_vertices);
        let b = rng.below(n_vertices);
        edges.push((
            format!("e{}", edges.len()),
            format!("v{a}"),
            format!("v{b}"),
            rng.positive_rat(den_max, den_max),
        ));
    }
    if n_vertices == 1 && edges.is_empty() {
        // guarantee at least one edge so maps have something to do
        edges.push(("e0".into(), "v0".into(), "v0".into(), rng.positive_rat(den_max, den_max)));
    }
    MetricGraph::build(&GraphSpec { vertices, edges }).expect("construction is connected by design")
}

/// A random branched cover built combinatorially: `sheets` copies of
/// every target edge, glued over each target vertex along a random
/// partition of the sheet set. Every group of sheets becomes one source
/// vertex whose local directions map onto all directions at the target
/// vertex (with multiplicity = group size), so the result is open and
/// discrete by construction; source edge lengths are randomized, which
/// makes the speeds (and the minimal constants) nontrivial.
pub fn random_branched_cover(rng: &mut Rng, den_max: i64) -> GraphMap {
    let target_vertices = 2 + rng.below(2); // 2..=3
    let target_extra = 1 + rng.below(2); // ensures a cycle somewhere
    let target = Arc::new(random_connected_graph(rng, target_vertices, target_extra, den_max));
    let sheets = 1 + rng.below(3); // 1..=3

    // partition the sheet set over each target vertex
    let mut groups_of: Vec<Vec<Vec<usize>>> = Vec::new();
    for _ in target.vertices() {
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for sheet in 0..sheets {
            if !groups.is_empty() && rng.below(2) == 0 {
                let g = rng.below(groups.len());
                groups[g].push(sheet);
            } else {
                groups.push(vec![sheet]);
            }
        }
        groups_of.push(groups);
    }
    let group_index = |v: usize, sheet: usize| -> usize {
        groups_of[v]
            .iter()
            .position(|g| g.contains(&sheet))
            .expect("partition covers every sheet")
    };

    // sheet permutation per target edge (how sheets reconnect across it)
    let mut perms: Vec<Vec<usize>> = Vec::new();
    for _ in target.edge_ids() {
        let mut perm: Vec<usize> = (0..sheets).collect();
        for i in (1..sheets).rev() {
            let j = rng.below(i + 1);
            perm.swap(i, j);
        }
        perms.push(perm);
    }

    // source vertices: (target vertex, group); source edges: (target
    // edge, sheet)
    let mut vertex_names: Vec<String> = Vec::new();
    let mut vkey: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for v in target.vertices() {
        for g in 0..groups_of[v.0].len() {
            vkey.insert((v.0, g), vertex_names.len());
            vertex_names.push(format!("v{}g{}", v.0, g));
        }
    }
    let mut spec = GraphSpec { vertices: vertex_names.clone(), edges: Vec::new() };
    let mut vertex_map: BTreeMap<String, String> = BTreeMap::new();
    for ((tv, _), &idx) in &vkey {
        vertex_map.insert(
            vertex_names[idx].clone(),
            target.vertex_name(crate::graph::VertexId(*tv)).to_string(),
        );
    }
    let mut edge_map: BTreeMap<String, Vec<(String, bool)>> = BTreeMap::new();
    for e in target.edge_ids() {
        let edge = target.edge(e);
        let perm = &perms[e.0];
        #[allow(clippy::needless_range_loop)]
        for sheet in 0..sheets {
            let lo_group = group_index(edge.u.0, sheet);
            let hi_group = group_index(edge.v.0, perm[sheet]);
            let name = format!("e{}s{}", e.0, sheet);
            spec.edges.push((
                name.clone(),
                vertex_names[vkey[&(edge.u.0, lo_group)]].clone(),
                vertex_names[vkey[&(edge.v.0, hi_group)]].clone(),
                rng.positive_rat(den_max, den_max),
            ));
            edge_map.insert(name, vec![(edge.name.clone(), true)]);
        }
    }

    // restrict to the component of the first vertex (a branched cover
    // onto a connected target restricts to components)
    let component = component_of(&spec, 0);
    let vertices: Vec<String> =
        spec.vertices.iter().filter(|v| component.contains(*v)).cloned().collect();
    let edges: Vec<_> =
        spec.edges.iter().filter(|(_, a, _, _)| component.contains(a)).cloned().collect();
    let source = Arc::new(
        MetricGraph::build(&GraphSpec { vertices: vertices.clone(), edges: edges.clone() })
            .expect("component is connected"),
    );
    let vertex_map =
        vertex_map.into_iter().filter(|(k, _)| component.contains(k)).collect();
    let edge_map = edge_map
        .into_iter()
        .filter(|(k, _)| edges.iter().any(|(n, _, _, _)| n == k))
        .collect();
    let f = GraphMap::build(source, target, &crate::map::MapSpec { vertex_map, edge_map })
        .expect("construction is continuous by design");
    debug_assert!(f.is_branched_cover());
    f
}

fn component_of(spec: &GraphSpec, start: usize) -> std::collections::BTreeSet<String> {
    let mut seen: std::collections::BTreeSet<String> = Default::default();
    if spec.vertices.is_empty() {
        return seen;
    }
    let mut stack = vec![spec.vertices[start].clone()];
    seen.insert(spec.vertices[start].clone());
    while let Some(v) = stack.pop() {
        for (_, a, b, _) in &spec.edges {
            for (x, y) in [(a, b), (b, a)] {
                if x == &v && !seen.contains(y) {
                    seen.insert(y.clone());
                    stack.push(y.clone());
                }
            }
        }
    }
    seen
}

/// A random point of the graph (vertices and rational interior offsets).
pub fn random_point(rng: &mut Rng, g: &MetricGraph, den_max: i64) -> GraphPoint {
    if g.edge_count() == 0 || rng.below(4) == 0 {
        return GraphPoint::Vertex(crate::graph::VertexId(rng.below(g.vertex_count())));
    }
    let e = crate::graph::EdgeId(rng.below(g.edge_count()));
    let len = &g.edge(e).len;
    let q = 1 + rng.below(den_max as usize) as i64;
    let p = rng.below(q as usize + 1) as i64;
    let off = rat(p, q) * len;
    g.point_on_edge(e, off).expect("offset clamped to the edge")
}

/// A random rectifiable walk with at most `max_steps` direction steps.
pub fn random_walk(rng: &mut Rng, g: &MetricGraph, max_steps: usize, den_max: i64) -> Walk {
    let start = random_point(rng, g, den_max);
    let mut walk = Walk::empty_at(start);
    let steps = 1 + rng.below(max_steps);
    for _ in 0..steps {
        let cur = walk.end().clone();
        let dirs: Vec<Direction> = g.directions_at(&cur);
        if dirs.is_empty() {
            break;
        }
        let d = dirs[rng.below(dirs.len())];
        let here = g.offset_on_edge(&cur, d.edge, d.sign).expect("direction anchored");
        let len = &g.edge(d.edge).len;
        let room = match d.sign {
            Sign::Pos => len - &here,
            Sign::Neg => here.clone(),
        };
        if room == rat_zero() {
            continue;
        }
        let q = 1 + rng.below(den_max as usize) as i64;
        let p = 1 + rng.below(q as usize) as i64;
        let step = rat(p, q) * &room;
        let to = match d.sign {
            Sign::Pos => &here + &step,
            Sign::Neg => &here - &step,
        };
        walk.push_segment(g, Segment { edge: d.edge, from: here, to })
            .expect("step stays on the edge");
    }
    walk
}

/// A random branched cover whose image walks cross subdivision vertices
/// of the target, so interior breakpoints are exercised: builds a plain
/// cover and re-expresses it over a subdivided copy of the target (an
/// isometric change of presentation; speeds and constants are
/// unchanged).
pub fn random_branched_cover_subdivided(rng: &mut Rng, den_max: i64) -> GraphMap {
    let f = random_branched_cover(rng, den_max);
    let target = f.target();
    let delta = {
        // split the longest edge into a few pieces; shorter edges get
        // proportionally fewer, keeping the fine graph small
        let maxlen = target
            .edge_ids()
            .map(|e| target.edge(e).len.clone())
            .max()
            .expect("target has edges");
        let k = 2 + rng.below(2) as i64;
        maxlen / rat(k, 1)
    };
    let (fine, sub) = target.subdivide(&delta).expect("positive mesh");
    let fine = Arc::new(fine);
    let vertex_map = f
        .source()
        .vertices()
        .map(|v| {
            let image = crate::graph::GraphPoint::Vertex(f.vertex_image(v));
            match sub.map_point(target, &fine, &image) {
                crate::graph::GraphPoint::Vertex(w) => w,
                _ => unreachable!("vertices map to vertices under subdivision"),
            }
        })
        .collect();
    let edge_walks = f
        .source()
        .edge_ids()
        .map(|e| {
            let walk = f.edge_walk(e);
            let mut out =
                Walk::empty_at(sub.map_point(target, &fine, walk.start()));
            for seg in walk.segments() {
                // a full traversal of an original edge becomes the chain
                // of its pieces in the subdivided graph
                let pieces: Vec<crate::graph::EdgeId> = fine
                    .edge_ids()
                    .filter(|ne| {
                        let name = &fine.edge(*ne).name;
                        let orig = &target.edge(seg.edge).name;
                        name == orig || name.starts_with(&format!("{orig}."))
                    })
                    .collect();
                let ordered: Vec<_> = if seg.sign() == Sign::Pos {
                    pieces
                } else {
                    pieces.into_iter().rev().collect()
                };
                for ne in ordered {
                    let len = fine.edge(ne).len.clone();
                    let (from, to) = if seg.sign() == Sign::Pos {
                        (crate::rational::rat_zero(), len)
                    } else {
                        (len, crate::rational::rat_zero())
                    };
                    out.push_segment(&fine, Segment { edge: ne, from, to })
                        .expect("pieces chain in order");
                }
            }
            out
        })
        .collect();
    GraphMap::from_walks(f.source().clone(), fine, vertex_map, edge_walks)
        .expect("re-presentation preserves continuity")
}

/// A random walk whose offsets stay on the 1/denominator grid of the
/// minimum edge length (so grid partition sums are exact on it).
pub fn random_grid_walk(
    rng: &mut Rng,
    g: &MetricGraph,
    max_steps: usize,
    denominator: i64,
) -> Walk {
    let step = g.min_edge_len().expect("graph with edges") / rat(denominator, 1);
    let start = GraphPoint::Vertex(crate::graph::VertexId(rng.below(g.vertex_count())));
    let mut walk = Walk::empty_at(start);
    let steps = 1 + rng.below(max_steps);
    for _ in 0..steps {
        let cur = walk.end().clone();
        let dirs: Vec<Direction> = g.directions_at(&cur);
        if dirs.is_empty() {
            break;
        }
        let d = dirs[rng.below(dirs.len())];
        let here = g.offset_on_edge(&cur, d.edge, d.sign).expect("direction anchored");
        let len = &g.edge(d.edge).len;
        let room = match d.sign {
            Sign::Pos => len - &here,
            Sign::Neg => here.clone(),
        };
        let slots = (&room / &step).to_integer();
        let slots: usize = slots.to_string().parse().unwrap_or(0);
        if slots == 0 {
            continue;
        }
        let k = 1 + rng.below(slots);
        let travel = &step * rat(k as i64, 1);
        let to = match d.sign {
            Sign::Pos => &here + &travel,
            Sign::Neg => &here - &travel,
        };
        walk.push_segment(g, Segment { edge: d.edge, from: here, to })
            .expect("step stays on the edge");
    }
    walk
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkers;

    #[test]
    fn random_graphs_are_valid() {
        let mut rng = Rng::new(7);
        for _ in 0..20 {
            let n = 1 + rng.below(6);
            let extra = rng.below(4);
            let g = random_connected_graph(&mut rng, n, extra, 8);
            assert!(g.vertex_count() >= 1);
            let p = random_point(&mut rng, &g, 8);
            assert!(g.contains_point(&p));
        }
    }

    #[test]
    fn random_covers_are_branched_covers() {
        let mut rng = Rng::new(42);
        for _ in 0..10 {
            let f = random_branched_cover(&mut rng, 8);
            assert!(f.is_branched_cover());
            let c = checkers::min_bld_constant(&f).unwrap();
            assert!(c >= crate::rational::rat_one());
        }
    }

    #[test]
    fn subdivided_covers_have_interior_breakpoints() {
        let mut rng = Rng::new(11);
        for _ in 0..8 {
            let f = random_branched_cover_subdivided(&mut rng, 8);
            assert!(f.is_branched_cover());
            let has_breaks = f
                .source()
                .edge_ids()
                .any(|e| !f.edge_breakpoints(e).is_empty());
            assert!(has_breaks, "subdivision must introduce walk nodes");
        }
    }

    #[test]
    fn random_walks_are_valid() {
        let mut rng = Rng::new(3);
        let g = random_connected_graph(&mut rng, 4, 2, 8);
        for _ in 0..50 {
            let w = random_walk(&mut rng, &g, 6, 8);
            w.validate(&g).unwrap();
        }
    }

    #[test]
    fn rng_is_deterministic() {
        let mut a = Rng::new(5);
        let mut b = Rng::new(5);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }
}
