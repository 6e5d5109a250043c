//! Canonical corpus of small spaces and maps used across tests, the
//! acceptance suite and the `fixtures` CLI subcommand.
//!
//! - `path_graph(n)`: I_n, a path of n unit edges `v0 - v1 - ... - vn`.
//! - `cycle_graph(n, l)`: C_n(l), a cycle of n edges of length l
//!   (n = 1 yields a single self-loop).
//! - `winding(k, n)`: W_k, the degree-k winding C_{kn}(1) -> C_n(1).
//! - `tent()`: I_2 -> I_1 folding the middle vertex onto the far end.
//! - `fold()`: I_2 -> I_2 folding onto one half (radial but not open).
//! - `speed2()`: one unit edge onto I_2 at speed 2.
//! - `const_map()`: C_3(1) collapsed to the one-point space.

use std::sync::Arc;

use crate::graph::{GraphSpec, MetricGraph};
use crate::map::{GraphMap, MapSpec};
use crate::rational::{rat_int, Rat};

pub fn one_point() -> MetricGraph {
    MetricGraph::build(&GraphSpec { vertices: vec!["o".into()], edges: vec![] })
        .expect("one-point space")
}

pub fn path_graph(n: usize) -> MetricGraph {
    assert!(n >= 1);
    let vertices: Vec<String> = (0..=n).map(|i| format!("v{i}")).collect();
    let edges = (0..n)
        .map(|i| (format!("e{i}"), format!("v{i}"), format!("v{}", i + 1), rat_int(1)))
        .collect();
    MetricGraph::build(&GraphSpec { vertices, edges }).expect("path graph")
}

pub fn cycle_graph(n: usize, len: Rat) -> MetricGraph {
    assert!(n >= 1);
    let vertices: Vec<String> = (0..n).map(|i| format!("v{i}")).collect();
    let edges = (0..n)
        .map(|i| (format!("e{i}"), format!("v{i}"), format!("v{}", (i + 1) % n), len.clone()))
        .collect();
    MetricGraph::build(&GraphSpec { vertices, edges }).expect("cycle graph")
}

pub fn identity(g: &Arc<MetricGraph>) -> GraphMap {
    let vertex_map = g.vertices().map(|v| (g.vertex_name(v).into(), g.vertex_name(v).into())).collect();
    let edge_map = g
        .edge_ids()
        .map(|e| (g.edge(e).name.clone(), vec![(g.edge(e).name.clone(), true)]))
        .collect();
    GraphMap::build(g.clone(), g.clone(), &MapSpec { vertex_map, edge_map }).expect("identity map")
}

/// W_k: C_{kn}(1) -> C_n(1), every edge onto one edge at speed 1.
pub fn winding(k: usize, n: usize) -> GraphMap {
    assert!(k >= 1 && n >= 1);
    let x = Arc::new(cycle_graph(k * n, rat_int(1)));
    let y = Arc::new(cycle_graph(n, rat_int(1)));
    let vertex_map = (0..k * n).map(|i| (format!("v{i}"), format!("v{}", i % n))).collect();
    let edge_map =
        (0..k * n).map(|i| (format!("e{i}"), vec![(format!("e{}", i % n), true)])).collect();
    GraphMap::build(x, y, &MapSpec { vertex_map, edge_map }).expect("winding map")
}

/// TENT: I_2 -> I_1, both edges at speed 1, middle vertex onto the far
/// endpoint.
pub fn tent() -> GraphMap {
    let x = Arc::new(path_graph(2));
    let y = Arc::new(path_graph(1));
    let vertex_map = vec![
        ("v0".into(), "v0".into()),
        ("v1".into(), "v1".into()),
        ("v2".into(), "v0".into()),
    ];
    let edge_map = vec![
        ("e0".into(), vec![("e0".into(), true)]),
        ("e1".into(), vec![("e0".into(), false)]),
    ];
    GraphMap::build(x, y, &MapSpec { vertex_map: vertex_map.into_iter().collect(), edge_map: edge_map.into_iter().collect() })
        .expect("tent map")
}

/// FOLD: I_2 -> I_2 folding onto the first half; radial but not open at
/// the fold vertex.
pub fn fold() -> GraphMap {
    let x = Arc::new(path_graph(2));
    let y = Arc::new(path_graph(2));
    let vertex_map = vec![
        ("v0".into(), "v0".into()),
        ("v1".into(), "v1".into()),
        ("v2".into(), "v0".into()),
    ];
    let edge_map = vec![
        ("e0".into(), vec![("e0".into(), true)]),
        ("e1".into(), vec![("e0".into(), false)]),
    ];
    GraphMap::build(x, y, &MapSpec { vertex_map: vertex_map.into_iter().collect(), edge_map: edge_map.into_iter().collect() })
        .expect("fold map")
}

/// SPEED2: one unit edge onto I_2 at constant speed 2.
pub fn speed2() -> GraphMap {
    let x = Arc::new(path_graph(1));
    let y = Arc::new(path_graph(2));
    let vertex_map = vec![("v0".into(), "v0".into()), ("v1".into(), "v2".into())];
    let edge_map = vec![("e0".into(), vec![("e0".into(), true), ("e1".into(), true)])];
    GraphMap::build(x, y, &MapSpec { vertex_map: vertex_map.into_iter().collect(), edge_map: edge_map.into_iter().collect() })
        .expect("speed-2 map")
}

/// CONST: C_3(1) to the one-point space.
pub fn const_map() -> GraphMap {
    let x = Arc::new(cycle_graph(3, rat_int(1)));
    let y = Arc::new(one_point());
    let vertex_map = (0..3).map(|i| (format!("v{i}"), "o".into())).collect();
    let edge_map = (0..3).map(|i| (format!("e{i}"), vec![])).collect();
    GraphMap::build(x, y, &MapSpec { vertex_map, edge_map }).expect("constant map")
}
