//! Exact verification and minimal-constant computation for the four
//! equivalent characterizations of bounded length distortion: the
//! per-path length bounds (bld), the two-sided ball inclusions (lq),
//! the radial sphere conditions in both sup/inf and pointwise form, and
//! the coradial condition on the components U(x,f,r).
//!
//! Every universally quantified condition is decided at finitely many
//! candidate centers (breakpoints plus one interior witness per linear
//! regime) and finitely many radii (critical radii plus one witness per
//! regime gap); every quantity involved is piecewise affine in the point
//! and the radius with rational breakpoints, which is what makes the
//! finite schedules complete. The grid oracle cross-checks the same
//! verdicts independently.

use std::collections::BTreeSet;

use crate::error::{CoreError, Result};
use crate::graph::{fmt_point, GraphPoint, MetricGraph, Sign};
use crate::map::GraphMap;
use crate::rational::{fmt_rat, rat_int, rat_mid, rat_one, rat_zero, ExtRat, Rat};
use crate::region::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PropertyKind {
    Bld,
    Lq,
    LqLocal,
    Radial,
    RadialPointwise,
    Coradial,
    Lipschitz,
}

impl PropertyKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PropertyKind::Bld => "bld",
            PropertyKind::Lq => "lq",
            PropertyKind::LqLocal => "lq-local",
            PropertyKind::Radial => "radial",
            PropertyKind::RadialPointwise => "radial-pointwise",
            PropertyKind::Coradial => "coradial",
            PropertyKind::Lipschitz => "lipschitz",
        }
    }

    pub fn parse(s: &str) -> Option<PropertyKind> {
        match s {
            "bld" => Some(PropertyKind::Bld),
            "lq" => Some(PropertyKind::Lq),
            "lq-local" => Some(PropertyKind::LqLocal),
            "radial" => Some(PropertyKind::Radial),
            "radial-pointwise" => Some(PropertyKind::RadialPointwise),
            "coradial" => Some(PropertyKind::Coradial),
            "lipschitz" => Some(PropertyKind::Lipschitz),
            _ => None,
        }
    }
}

/// The four local indices at (x, r): sup/inf of d(f(x), f(y)) over the
/// sphere ∂B(x,r), and sup/inf of d(x, y) over ∂U(x,f,r). Infima over
/// empty boundary sets are +inf (the conditions are then vacuous), and
/// suprema over empty sets are 0.
#[derive(Debug, Clone)]
pub struct LocalIndices {
    pub center: GraphPoint,
    pub radius: Rat,
    pub big_l: Rat,
    pub small_l: ExtRat,
    pub big_l_star: Rat,
    pub small_l_star: ExtRat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopologyFlags {
    pub discrete: bool,
    pub open: bool,
    pub branched_cover: bool,
}

pub fn topology_flags(f: &GraphMap) -> TopologyFlags {
    let discrete = f.is_discrete().0;
    let open = f.is_open().0;
    TopologyFlags { discrete, open, branched_cover: discrete && open }
}

#[derive(Debug, Clone)]
pub struct Witness {
    pub center: Option<GraphPoint>,
    pub radius: Option<Rat>,
    pub point: Option<GraphPoint>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub property: PropertyKind,
    pub given_constant: Option<Rat>,
    pub verdict: bool,
    pub witness: Option<Witness>,
    /// Largest uniform small-radius threshold established by the check
    /// (for the local conditions).
    pub r0: Option<Rat>,
    pub topology: TopologyFlags,
}

impl PropertyReport {
    fn pass(property: PropertyKind, l: Option<Rat>, topology: TopologyFlags) -> Self {
        PropertyReport { property, given_constant: l, verdict: true, witness: None, r0: None, topology }
    }

    fn fail(property: PropertyKind, l: Option<Rat>, topology: TopologyFlags, witness: Witness) -> Self {
        PropertyReport {
            property,
            given_constant: l,
            verdict: false,
            witness: Some(witness),
            r0: None,
            topology,
        }
    }
}

fn require_constant_at_least_one(l: &Rat) -> Result<()> {
    if *l < rat_one() {
        return Err(CoreError::Precondition("constant L must be >= 1".into()));
    }
    Ok(())
}

/// Candidate centers: all breakpoints of the map plus one interior point
/// per linear regime of every edge.
pub fn candidate_centers(f: &GraphMap) -> Vec<GraphPoint> {
    let mut out = f.breakpoints();
    for e in f.source().edge_ids() {
        let len = &f.source().edge(e).len;
        let mut cuts = f.edge_breakpoints(e);
        cuts.insert(0, rat_zero());
        cuts.push(len.clone());
        for w in cuts.windows(2) {
            let mid = rat_mid(&w[0], &w[1]);
            out.push(GraphPoint::Interior(e, mid));
        }
    }
    out.sort();
    out.dedup();
    out
}

fn first_critical_radius(g: &MetricGraph, x: &GraphPoint) -> Option<Rat> {
    g.critical_radii(x).into_iter().next()
}

/// A radius below which the small-radius normal forms hold at `x`: the
/// sphere is one point per direction at exact distance r, image paths
/// are straight and distance-realizing, and U(x,f,r) is the open star
/// with arm lengths r/s_d. `None` if some direction at `x` is collapsed.
pub fn small_radius_threshold(f: &GraphMap, x: &GraphPoint) -> Option<Rat> {
    let profile = f.direction_profile(x).ok()?;
    let fx = f.eval(x).ok()?;
    let mut bound = first_critical_radius(f.source(), x)?;
    let crit_y = first_critical_radius(f.target(), &fx);
    for entry in &profile.entries {
        if entry.speed == rat_zero() {
            return None;
        }
        let t = arc_to_next_feature(f, x, entry.dir.edge, entry.dir.sign);
        let via_source = &entry.speed * &t;
        if via_source < bound {
            bound = via_source;
        }
        if let Some(cy) = &crit_y {
            let via_target = cy / &entry.speed;
            if via_target < bound {
                bound = via_target;
            }
        }
    }
    Some(bound)
}

/// Arc length from `x` to the next breakpoint (or edge end) along a
/// direction.
fn arc_to_next_feature(f: &GraphMap, x: &GraphPoint, edge: crate::graph::EdgeId, sign: Sign) -> Rat {
    let a = f
        .source()
        .offset_on_edge(x, edge, sign)
        .expect("direction anchored at x");
    let len = &f.source().edge(edge).len;
    let mut cuts = f.edge_breakpoints(edge);
    cuts.push(rat_zero());
    cuts.push(len.clone());
    match sign {
        Sign::Pos => cuts
            .into_iter()
            .filter(|b| *b > a)
            .map(|b| b - &a)
            .min()
            .expect("edge end lies ahead"),
        Sign::Neg => cuts
            .into_iter()
            .filter(|b| *b < a)
            .map(|b| &a - b)
            .min()
            .expect("edge end lies behind"),
    }
}

/// Exact local indices at (x, r).
pub fn local_indices(f: &GraphMap, x: &GraphPoint, r: &Rat) -> Result<LocalIndices> {
    if *r <= rat_zero() {
        return Err(CoreError::NonpositiveRadius);
    }
    let fx = f.eval(x)?;
    let sphere = f.source().sphere(x, r)?;
    let mut big_l = rat_zero();
    let mut small_l = ExtRat::Infinite;
    for y in &sphere {
        let d = f.target().distance(&fx, &f.eval(y)?)?;
        if d > big_l {
            big_l = d.clone();
        }
        if small_l.as_finite().is_none_or(|cur| d < *cur) {
            small_l = ExtRat::Finite(d);
        }
    }
    let u = f.u_component(x, r)?;
    let mut big_l_star = rat_zero();
    let mut small_l_star = ExtRat::Infinite;
    for y in u.boundary(f.source()) {
        let d = f.source().distance(x, &y)?;
        if d > big_l_star {
            big_l_star = d.clone();
        }
        if small_l_star.as_finite().is_none_or(|cur| d < *cur) {
            small_l_star = ExtRat::Finite(d);
        }
    }
    Ok(LocalIndices { center: x.clone(), radius: r.clone(), big_l, small_l, big_l_star, small_l_star })
}

/// Bounded length distortion: a branched cover with every edge speed in
/// [1/L, L]. By walk length additivity this is exactly the two-sided
/// path-length bound over all walks.
pub fn check_bld(f: &GraphMap, l: &Rat) -> Result<PropertyReport> {
    require_constant_at_least_one(l)?;
    let topology = topology_flags(f);
    if !topology.branched_cover {
        let detail = if !topology.discrete {
            let e = f.is_discrete().1.expect("witness accompanies failure");
            format!("not discrete: edge `{}` is collapsed", f.source().edge(e).name)
        } else {
            let (_, w) = f.is_open();
            let (p, _) = w.expect("witness accompanies failure");
            format!("not open at {}", fmt_point(f.source(), &p))
        };
        return Ok(PropertyReport::fail(
            PropertyKind::Bld,
            Some(l.clone()),
            topology,
            Witness { center: None, radius: None, point: None, detail },
        ));
    }
    for e in f.source().edge_ids() {
        let s = f.speed(e);
        if s > l || s < &(rat_one() / l) {
            let mid = &f.source().edge(e).len / rat_int(2);
            return Ok(PropertyReport::fail(
                PropertyKind::Bld,
                Some(l.clone()),
                topology,
                Witness {
                    center: Some(GraphPoint::Interior(e, mid)),
                    radius: None,
                    point: None,
                    detail: format!(
                        "edge `{}` has speed {} outside [1/{}, {}]",
                        f.source().edge(e).name,
                        fmt_rat(s),
                        fmt_rat(l),
                        fmt_rat(l)
                    ),
                },
            ));
        }
    }
    Ok(PropertyReport::pass(PropertyKind::Bld, Some(l.clone()), topology))
}

/// Least L for which `check_bld` passes.
pub fn min_bld_constant(f: &GraphMap) -> Result<Rat> {
    f.require_branched_cover()?;
    Ok(speed_constant(f))
}

fn speed_constant(f: &GraphMap) -> Rat {
    let mut best = rat_one();
    for s in f.speeds() {
        debug_assert!(*s > rat_zero());
        let c = if *s >= rat_one() { s.clone() } else { rat_one() / s };
        if c > best {
            best = c;
        }
    }
    best
}

/// Global L-Lipschitz bound: in the constant-speed model this is exactly
/// "every edge speed <= L"; vertex pairs are verified as an additional
/// cross-check.
pub fn check_lipschitz(f: &GraphMap, l: &Rat) -> Result<PropertyReport> {
    if *l < rat_zero() {
        return Err(CoreError::Precondition("constant L must be >= 0".into()));
    }
    let topology = topology_flags(f);
    for e in f.source().edge_ids() {
        let s = f.speed(e);
        if s > l {
            let mid = &f.source().edge(e).len / rat_int(2);
            return Ok(PropertyReport::fail(
                PropertyKind::Lipschitz,
                Some(l.clone()),
                topology,
                Witness {
                    center: Some(GraphPoint::Interior(e, mid)),
                    radius: None,
                    point: None,
                    detail: format!(
                        "edge `{}` has speed {} > {}",
                        f.source().edge(e).name,
                        fmt_rat(s),
                        fmt_rat(l)
                    ),
                },
            ));
        }
    }
    for u in f.source().vertices() {
        for v in f.source().vertices() {
            let du = f.source().vertex_dist(u, v);
            let dv = f.target().vertex_dist(f.vertex_image(u), f.vertex_image(v));
            if dv > &(l * du) {
                return Ok(PropertyReport::fail(
                    PropertyKind::Lipschitz,
                    Some(l.clone()),
                    topology,
                    Witness {
                        center: Some(GraphPoint::Vertex(u)),
                        radius: None,
                        point: Some(GraphPoint::Vertex(v)),
                        detail: "vertex pair exceeds the Lipschitz bound".into(),
                    },
                ));
            }
        }
    }
    Ok(PropertyReport::pass(PropertyKind::Lipschitz, Some(l.clone()), topology))
}

/// Cached per-center ball builder for the LQ schedules.
struct BallCache<'a> {
    g: &'a MetricGraph,
    center: GraphPoint,
    profiles: Vec<crate::pl::PlFn>,
}

impl<'a> BallCache<'a> {
    fn new(g: &'a MetricGraph, center: GraphPoint) -> Self {
        let profiles = g.edge_ids().map(|e| g.dist_profile(&center, e)).collect();
        BallCache { g, center, profiles }
    }

    fn closed_ball(&self, r: &Rat) -> Region {
        let mut reg = Region::empty();
        for v in self.g.vertices() {
            let d = self
                .g
                .distance(&GraphPoint::Vertex(v), &self.center)
                .expect("valid center");
            if d <= *r {
                reg.insert_vertex(v);
            }
        }
        for e in self.g.edge_ids() {
            for span in self.profiles[e.0].sublevel(r, false) {
                reg.insert_span(self.g, e, span);
            }
        }
        reg.normalized(self.g)
    }
}

/// Radii at which either side of the LQ inclusions can change
/// combinatorics at center `x`, plus a witness inside every gap and one
/// radius beyond the largest.
fn lq_radius_schedule(f: &GraphMap, x: &GraphPoint, fx: &GraphPoint, l: &Rat) -> Vec<Rat> {
    let mut crit: Vec<Rat> = f.source().critical_radii(x);
    for e in f.source().edge_ids() {
        for t in f.edge_breakpoints(e) {
            let b = GraphPoint::Interior(e, t);
            crit.push(f.source().distance(x, &b).expect("valid points"));
        }
    }
    for r in f.target().critical_radii(fx) {
        crit.push(l * r);
    }
    crit.retain(|r| *r > rat_zero());
    crit.sort();
    crit.dedup();
    let mut probes = Vec::new();
    let mut prev = rat_zero();
    for c in &crit {
        let mid = rat_mid(&prev, c);
        if mid > rat_zero() {
            probes.push(mid);
        }
        probes.push(c.clone());
        prev = c.clone();
    }
    probes.push(&prev + rat_int(1));
    probes.sort();
    probes.dedup();
    probes
}

/// Lipschitz quotient: B(f(x), r/L) ⊆ f(B(x,r)) ⊆ B(f(x), Lr) for all
/// centers and radii. The right inclusion is the Lipschitz bound; the left is tested
/// as exact region inclusion over the finite radius schedule (the
/// all-radii closed-ball formulation is equivalent to the open one by
/// nested intersection/union).
pub fn check_lq(f: &GraphMap, l: &Rat) -> Result<PropertyReport> {
    require_constant_at_least_one(l)?;
    let topology = topology_flags(f);
    let lip = check_lipschitz(f, l)?;
    if !lip.verdict {
        let mut w = lip.witness.expect("failing lipschitz has witness");
        w.detail = format!("right inclusion fails: {}", w.detail);
        return Ok(PropertyReport::fail(PropertyKind::Lq, Some(l.clone()), topology, w));
    }
    for x in candidate_centers(f) {
        let fx = f.eval(&x)?;
        let source_balls = BallCache::new(f.source(), x.clone());
        let target_balls = BallCache::new(f.target(), fx.clone());
        for r in lq_radius_schedule(f, &x, &fx, l) {
            let needed = target_balls.closed_ball(&(&r / l));
            let image = f.image_region_closure(&source_balls.closed_ball(&r))?;
            if !needed.is_subset(f.target(), &image) {
                let missing = needed.difference(f.target(), &image);
                return Ok(PropertyReport::fail(
                    PropertyKind::Lq,
                    Some(l.clone()),
                    topology,
                    Witness {
                        center: Some(x),
                        radius: Some(r.clone()),
                        point: missing.some_point(f.target()),
                        detail: format!(
                            "left inclusion fails: B(f(x), {}) is not covered by f(B(x, {}))",
                            fmt_rat(&(&r / l)),
                            fmt_rat(&r)
                        ),
                    },
                ));
            }
        }
    }
    Ok(PropertyReport::pass(PropertyKind::Lq, Some(l.clone()), topology))
}

/// Local Lipschitz quotient: both inclusions for all radii below a per-center
/// threshold r0(x) > 0, decided at one witness radius in the stable
/// small-radius regime. Instruments the local-to-global lemma: a local
/// pass must imply a `check_lq` pass.
pub fn check_lq_local(f: &GraphMap, l: &Rat) -> Result<PropertyReport> {
    require_constant_at_least_one(l)?;
    let topology = topology_flags(f);
    let mut min_r0: Option<Rat> = None;
    for x in candidate_centers(f) {
        let fx = f.eval(&x)?;
        let r0 = local_lq_threshold(f, &x, &fx);
        let r = &r0 / rat_int(2);
        let ball_x = f.source().ball(&x, &r, false)?;
        let image = f.image_region_closure(&ball_x)?;
        let needed = f.target().ball(&fx, &(&r / l), false)?;
        if !needed.is_subset(f.target(), &image) {
            let missing = needed.difference(f.target(), &image);
            return Ok(PropertyReport::fail(
                PropertyKind::LqLocal,
                Some(l.clone()),
                topology,
                Witness {
                    center: Some(x),
                    radius: Some(r),
                    point: missing.some_point(f.target()),
                    detail: "local left inclusion fails".into(),
                },
            ));
        }
        let bound = f.target().ball(&fx, &(l * &r), false)?;
        if !image.is_subset(f.target(), &bound) {
            let excess = image.difference(f.target(), &bound);
            return Ok(PropertyReport::fail(
                PropertyKind::LqLocal,
                Some(l.clone()),
                topology,
                Witness {
                    center: Some(x),
                    radius: Some(r),
                    point: excess.some_point(f.target()),
                    detail: "local right inclusion fails".into(),
                },
            ));
        }
        if min_r0.as_ref().is_none_or(|m| r0 < *m) {
            min_r0 = Some(r0);
        }
    }
    let mut report = PropertyReport::pass(PropertyKind::LqLocal, Some(l.clone()), topology);
    report.r0 = min_r0;
    Ok(report)
}

/// Small-radius threshold for the local LQ test; ignores collapsed
/// directions (their image contribution is radius-independent).
fn local_lq_threshold(f: &GraphMap, x: &GraphPoint, fx: &GraphPoint) -> Rat {
    let mut bound = rat_one();
    if let Some(c) = first_critical_radius(f.source(), x) {
        if c < bound {
            bound = c;
        }
    }
    let crit_y = first_critical_radius(f.target(), fx);
    if let Some(c) = &crit_y {
        if *c < bound {
            bound = c.clone();
        }
    }
    if let Ok(profile) = f.direction_profile(x) {
        for entry in &profile.entries {
            if entry.speed == rat_zero() {
                continue;
            }
            let t = arc_to_next_feature(f, x, entry.dir.edge, entry.dir.sign);
            let via_source = &entry.speed * &t;
            if via_source < bound {
                bound = via_source;
            }
            if let Some(cy) = &crit_y {
                let via_target = cy / &entry.speed;
                if via_target < bound {
                    bound = via_target;
                }
            }
        }
    }
    bound
}

/// Radial: small-radius two-sided sphere condition L(x,f,r) <= Lr and
/// l(x,f,r) >= r/L, decided by exact evaluation of the local indices at
/// a witness radius in the stable regime.
pub fn check_radial(f: &GraphMap, l: &Rat) -> Result<PropertyReport> {
    require_constant_at_least_one(l)?;
    let topology = topology_flags(f);
    let mut min_r0: Option<Rat> = None;
    for x in candidate_centers(f) {
        let r0 = match small_radius_threshold(f, &x) {
            Some(r0) => r0,
            None => {
                return Ok(PropertyReport::fail(
                    PropertyKind::Radial,
                    Some(l.clone()),
                    topology,
                    Witness {
                        center: Some(x),
                        radius: None,
                        point: None,
                        detail: "a collapsed direction forces l(x,f,r) = 0".into(),
                    },
                ));
            }
        };
        let r = &r0 / rat_int(2);
        let idx = local_indices(f, &x, &r)?;
        if idx.big_l > l * &r {
            return Ok(PropertyReport::fail(
                PropertyKind::Radial,
                Some(l.clone()),
                topology,
                Witness {
                    center: Some(x),
                    radius: Some(r.clone()),
                    point: None,
                    detail: format!("L(x,f,r) = {} > Lr = {}", fmt_rat(&idx.big_l), fmt_rat(&(l * &r))),
                },
            ));
        }
        if !idx.small_l.at_least(&(&r / l)) {
            return Ok(PropertyReport::fail(
                PropertyKind::Radial,
                Some(l.clone()),
                topology,
                Witness {
                    center: Some(x),
                    radius: Some(r.clone()),
                    point: None,
                    detail: format!("l(x,f,r) = {} < r/L = {}", idx.small_l, fmt_rat(&(&r / l))),
                },
            ));
        }
        if min_r0.as_ref().is_none_or(|m| r0 < *m) {
            min_r0 = Some(r0);
        }
    }
    let mut report = PropertyReport::pass(PropertyKind::Radial, Some(l.clone()), topology);
    report.r0 = min_r0;
    Ok(report)
}

/// Pointwise radial: the two-sided bound L^{-1} d(x,y) <= d(f(x),f(y)) <=
/// L d(x,y) on a small ball, decided by sampling one point per direction
/// in the stable regime. Must agree with `check_radial` everywhere.
pub fn check_radial_pointwise(f: &GraphMap, l: &Rat) -> Result<PropertyReport> {
    require_constant_at_least_one(l)?;
    let topology = topology_flags(f);
    let mut min_r0: Option<Rat> = None;
    for x in candidate_centers(f) {
        let profile = f.direction_profile(&x)?;
        let fx = f.eval(&x)?;
        let r0 = small_radius_threshold(f, &x);
        for entry in &profile.entries {
            let t = arc_to_next_feature(f, &x, entry.dir.edge, entry.dir.sign);
            let step_bound = match &r0 {
                Some(r0) => {
                    let mut b = t.clone();
                    if *r0 < b {
                        b = r0.clone();
                    }
                    b
                }
                None => t.clone(),
            };
            let step = &step_bound / rat_int(2);
            if step == rat_zero() {
                continue;
            }
            let y = f
                .source()
                .advance(&x, entry.dir, &step)
                .expect("step stays on the edge");
            let dx = f.source().distance(&x, &y)?;
            let dy = f.target().distance(&fx, &f.eval(&y)?)?;
            if dy > l * &dx || dy < &dx / l {
                return Ok(PropertyReport::fail(
                    PropertyKind::RadialPointwise,
                    Some(l.clone()),
                    topology,
                    Witness {
                        center: Some(x),
                        radius: Some(step),
                        point: Some(y),
                        detail: format!(
                            "d(f(x),f(y)) = {} violates [d(x,y)/L, L d(x,y)] = [{}, {}]",
                            fmt_rat(&dy),
                            fmt_rat(&(&dx / l)),
                            fmt_rat(&(l * &dx))
                        ),
                    },
                ));
            }
        }
        if let Some(r0) = r0 {
            if min_r0.as_ref().is_none_or(|m| r0 < *m) {
                min_r0 = Some(r0);
            }
        }
    }
    let mut report = PropertyReport::pass(PropertyKind::RadialPointwise, Some(l.clone()), topology);
    report.r0 = min_r0;
    Ok(report)
}

/// Coradial: small-radius two-sided bounds on ∂U(x,f,r); defined for
/// branched covers only.
pub fn check_coradial(f: &GraphMap, l: &Rat) -> Result<PropertyReport> {
    require_constant_at_least_one(l)?;
    f.require_branched_cover()?;
    let topology = topology_flags(f);
    let mut min_r0: Option<Rat> = None;
    for x in candidate_centers(f) {
        let r0 = small_radius_threshold(f, &x)
            .expect("branched covers have no collapsed directions");
        let r = &r0 / rat_int(2);
        let idx = local_indices(f, &x, &r)?;
        if idx.big_l_star > l * &r {
            return Ok(PropertyReport::fail(
                PropertyKind::Coradial,
                Some(l.clone()),
                topology,
                Witness {
                    center: Some(x),
                    radius: Some(r.clone()),
                    point: None,
                    detail: format!(
                        "L*(x,f,r) = {} > Lr = {}",
                        fmt_rat(&idx.big_l_star),
                        fmt_rat(&(l * &r))
                    ),
                },
            ));
        }
        if !idx.small_l_star.at_least(&(&r / l)) {
            return Ok(PropertyReport::fail(
                PropertyKind::Coradial,
                Some(l.clone()),
                topology,
                Witness {
                    center: Some(x),
                    radius: Some(r.clone()),
                    point: None,
                    detail: format!(
                        "l*(x,f,r) = {} < r/L = {}",
                        idx.small_l_star,
                        fmt_rat(&(&r / l))
                    ),
                },
            ));
        }
        if min_r0.as_ref().is_none_or(|m| r0 < *m) {
            min_r0 = Some(r0);
        }
    }
    let mut report = PropertyReport::pass(PropertyKind::Coradial, Some(l.clone()), topology);
    report.r0 = min_r0;
    Ok(report)
}

pub fn check_property(f: &GraphMap, property: PropertyKind, l: &Rat) -> Result<PropertyReport> {
    match property {
        PropertyKind::Bld => check_bld(f, l),
        PropertyKind::Lq => check_lq(f, l),
        PropertyKind::LqLocal => check_lq_local(f, l),
        PropertyKind::Radial => check_radial(f, l),
        PropertyKind::RadialPointwise => check_radial_pointwise(f, l),
        PropertyKind::Coradial => check_coradial(f, l),
        PropertyKind::Lipschitz => check_lipschitz(f, l),
    }
}

/// Least admissible L >= 1 for a property. BLD, radial and coradial
/// minima are attained at breakpoint speed ratios in closed form; the LQ
/// minimum is found by exact bisection over the finite candidate set
/// (the same ratio values), using `check_lq` as the monotone predicate.
pub fn min_constant(f: &GraphMap, property: PropertyKind) -> Result<Rat> {
    match property {
        PropertyKind::Bld => min_bld_constant(f),
        PropertyKind::Coradial => {
            f.require_branched_cover()?;
            Ok(speed_constant(f))
        }
        PropertyKind::Radial | PropertyKind::RadialPointwise => {
            if let (false, Some(e)) = f.is_discrete() {
                return Err(CoreError::NoAdmissibleConstant(format!(
                    "edge `{}` is collapsed, so l(x,f,r) = 0 on it",
                    f.source().edge(e).name
                )));
            }
            Ok(speed_constant(f))
        }
        PropertyKind::Lipschitz => {
            let mut best = rat_zero();
            for s in f.speeds() {
                if *s > best {
                    best = s.clone();
                }
            }
            Ok(best)
        }
        PropertyKind::Lq | PropertyKind::LqLocal => {
            let mut cands: BTreeSet<Rat> = BTreeSet::new();
            cands.insert(rat_one());
            for s in f.speeds() {
                if *s > rat_zero() {
                    cands.insert(if *s >= rat_one() { s.clone() } else { rat_one() / s });
                }
            }
            let cands: Vec<Rat> = cands.into_iter().collect();
            let mut lo = 0usize;
            let mut hi = cands.len();
            while lo < hi {
                let mid = (lo + hi) / 2;
                if check_property(f, property, &cands[mid])?.verdict {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            if lo == cands.len() {
                return Err(CoreError::NoAdmissibleConstant(
                    "no candidate constant satisfies the ball inclusions".into(),
                ));
            }
            Ok(cands[lo].clone())
        }
    }
}

/// Full cross-validation of the characterization: topology flags, the
/// four minimal constants where defined, and exact equality of the
/// minima when the map is a branched cover.
#[derive(Debug, Clone)]
pub struct CharacterizeReport {
    pub topology: TopologyFlags,
    pub bld: Option<Rat>,
    pub lq: Option<Rat>,
    pub radial: Option<Rat>,
    pub coradial: Option<Rat>,
    /// `Some(true)` iff the map is a branched cover and all four minima
    /// coincide exactly; `None` when the equivalence hypotheses fail.
    pub equivalence: Option<bool>,
    pub notes: Vec<String>,
}

pub fn characterize(f: &GraphMap) -> CharacterizeReport {
    let topology = topology_flags(f);
    let mut notes = Vec::new();
    let mut grab = |property: PropertyKind| -> Option<Rat> {
        match min_constant(f, property) {
            Ok(c) => Some(c),
            Err(err) => {
                notes.push(format!("{}: {}", property.as_str(), err));
                None
            }
        }
    };
    let bld = grab(PropertyKind::Bld);
    let lq = grab(PropertyKind::Lq);
    let radial = grab(PropertyKind::Radial);
    let coradial = grab(PropertyKind::Coradial);
    let equivalence = if topology.branched_cover {
        Some(bld.is_some() && bld == lq && bld == radial && bld == coradial)
    } else {
        if !topology.discrete {
            notes.push("equivalence not applicable: map is not discrete".into());
        }
        if !topology.open {
            notes.push("equivalence not applicable: map is not open".into());
        }
        None
    };
    CharacterizeReport { topology, bld, lq, radial, coradial, equivalence, notes }
}
