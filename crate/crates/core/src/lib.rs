//! Exact computational toolkit for piecewise-linear maps between finite
//! metric graphs: bounded-length-distortion and Lipschitz-quotient
//! verification with matching minimal constants, branched-cover
//! topology, path lifting and fiber transport, and pointed convergence
//! certificates. All arithmetic is rational; every verdict is exact.

pub mod checkers;
pub mod convergence;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod io;
pub mod lifting;
pub mod map;
pub mod oracle;
pub mod pl;
pub mod rational;
pub mod region;
pub mod sampling;

pub use error::{CoreError, Result};
pub use graph::{Direction, EdgeId, GraphPoint, GraphSpec, MetricGraph, Segment, Sign, VertexId, Walk};
pub use map::{DirectionProfile, Fiber, GraphMap, MapSpec};
pub use rational::{fmt_rat, parse_rat, Rat};
pub use region::Region;
