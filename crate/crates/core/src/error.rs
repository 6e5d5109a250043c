use thiserror::Error;

use crate::graph::GraphPoint;

/// Errors produced while building or querying metric graphs, maps and
/// certificates. All validation is exact; there are no tolerance failures.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("graph is not connected (vertex `{0}` unreachable from vertex 0)")]
    Disconnected(String),
    #[error("edge `{0}` has nonpositive length")]
    NonpositiveLength(String),
    #[error("duplicate id `{0}`")]
    DuplicateId(String),
    #[error("unknown id `{0}`")]
    UnknownId(String),
    #[error("graph has no vertices")]
    EmptyGraph,
    #[error("offset out of range on edge `{0}`")]
    OffsetOutOfRange(String),
    #[error("point does not belong to this graph")]
    PointNotOnGraph,
    #[error("walk is not incident: segment {0} does not start where segment {1} ends")]
    WalkNotIncident(usize, usize),
    #[error("walk does not start at the declared start point")]
    WalkStartMismatch,
    #[error("map is discontinuous on edge `{0}`: image walk endpoints disagree with the vertex assignment")]
    EndpointMismatch(String),
    #[error("edge `{0}` is collapsed but its endpoints have distinct images")]
    CollapsedEndpointMismatch(String),
    #[error("radius must be positive")]
    NonpositiveRadius,
    #[error("subdivision mesh must be positive")]
    NonpositiveMesh,
    #[error("map is not a branched cover: {0}")]
    NotBranchedCover(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("no admissible constant: {0}")]
    NoAdmissibleConstant(String),
    #[error("path lift stuck at {at:?} with {consumed} of the base walk consumed")]
    LiftStuck { at: GraphPoint, consumed: String },
    #[error("fiber transport degenerate: {0}")]
    TransportDegenerate(String),
    #[error("net mesh {delta} exceeds eps/4 = {bound}")]
    NetTooCoarse { delta: String, bound: String },
    #[error("net does not cover the required ball (worst gap {gap})")]
    NetDoesNotCover { gap: String },
    #[error("certificate schedule incomplete: {0}")]
    ScheduleIncomplete(String),
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
