//! Total path lifts through branched covers and fiber transport.
//!
//! On piecewise-linear graph maps lifting is a direct finite recursion:
//! inside an edge regime the local inverse is linear (speed reciprocal
//! scaling), and at breakpoints the lift continues along a source
//! direction whose image direction matches the base walk. Openness
//! guarantees a continuation always exists, so total lifts of rectifiable
//! walks exist on compact graphs; no transfinite machinery is needed.

use std::collections::BTreeSet;

use crate::error::{CoreError, Result};
use crate::graph::{Direction, GraphPoint, Segment, Sign, Walk};
use crate::map::GraphMap;
use crate::rational::{fmt_rat, rat_zero, Rat};

/// A lift of a base walk: `image_walk(f, lift) == base` after
/// normalization, starting at `start`.
#[derive(Debug, Clone)]
pub struct Lift {
    pub base: Walk,
    pub lift: Walk,
    pub start: GraphPoint,
    pub total: bool,
    /// Junctions where several continuations matched the base direction,
    /// with the direction taken (the deterministic tie-break picks the
    /// smallest (edge, sign)).
    pub choices: Vec<(Rat, Direction)>,
}

/// A fiber-to-fiber bijection transported along a geodesic, with exact
/// per-pair distance bounds.
#[derive(Debug, Clone)]
pub struct FiberTransport {
    pub from: GraphPoint,
    pub to: GraphPoint,
    /// (fiber point over `from`, its transport over `to`, d(a, psi(a)))
    pub pairs: Vec<(GraphPoint, GraphPoint, Rat)>,
    /// The certified bound L * d(from, to).
    pub bound: Rat,
}

/// Continuations at the current lift point that match the required image
/// direction, sorted by (edge, sign); the reversal of the incoming
/// direction is dropped when another continuation exists.
fn continuations(
    f: &GraphMap,
    at: &GraphPoint,
    needed: Direction,
    incoming: Option<Direction>,
) -> Result<Vec<Direction>> {
    let profile = f.direction_profile(at)?;
    let mut dirs: Vec<Direction> = profile
        .entries
        .iter()
        .filter(|en| en.image_dir == Some(needed))
        .map(|en| en.dir)
        .collect();
    dirs.sort();
    if dirs.len() > 1 {
        if let Some(inc) = incoming {
            let reversal = Direction { edge: inc.edge, sign: inc.sign.flip() };
            let filtered: Vec<Direction> =
                dirs.iter().copied().filter(|d| *d != reversal).collect();
            if !filtered.is_empty() {
                dirs = filtered;
            }
        }
    }
    Ok(dirs)
}

/// Remaining arc length of the image walk piece at the image position of
/// `source_offset`, moving along `dir` on the carrying source edge.
fn image_room(f: &GraphMap, dir: Direction, source_offset: &Rat) -> Rat {
    let s = f.speed(dir.edge);
    let walk = f.edge_walk(dir.edge);
    let pos = source_offset * s;
    let mut acc = rat_zero();
    for seg in walk.segments() {
        let lo = acc.clone();
        let hi = &acc + &seg.len();
        match dir.sign {
            Sign::Pos => {
                if pos >= lo && pos < hi {
                    return hi - pos;
                }
            }
            Sign::Neg => {
                if pos > lo && pos <= hi {
                    return pos - lo;
                }
            }
        }
        acc = hi;
    }
    rat_zero()
}

struct LiftState {
    cur: GraphPoint,
    lift: Walk,
    incoming: Option<Direction>,
    choices: Vec<(Rat, Direction)>,
}

/// Advance the lift along one base segment. At every junction the
/// continuation chosen is `pick`'s option index (the deterministic lift
/// always picks 0, the smallest).
fn lift_segment<F>(
    f: &GraphMap,
    state: &mut LiftState,
    seg: &Segment,
    consumed_before: &Rat,
    mut pick: F,
) -> Result<()>
where
    F: FnMut(&Rat, &[Direction]) -> usize,
{
    let x = f.source();
    let total = seg.len();
    let mut done = rat_zero();
    let mut guard = 0usize;
    while done < total {
        guard += 1;
        if guard > 100_000 {
            return Err(CoreError::BudgetExceeded("lift step bound".into()));
        }
        let needed = Direction { edge: seg.edge, sign: seg.sign() };
        let options = continuations(f, &state.cur, needed, state.incoming)?;
        if options.is_empty() {
            return Err(CoreError::LiftStuck {
                at: state.cur.clone(),
                consumed: fmt_rat(&(consumed_before + &done)),
            });
        }
        let idx = if options.len() == 1 {
            0
        } else {
            let pos = consumed_before + &done;
            let k = pick(&pos, &options);
            state.choices.push((pos, options[k]));
            k
        };
        let dir = options[idx];
        let speed = f.speed(dir.edge).clone();
        let offset = x
            .offset_on_edge(&state.cur, dir.edge, dir.sign)
            .expect("continuation anchored at current point");
        let room = image_room(f, dir, &offset);
        debug_assert!(room > rat_zero());
        let remaining = &total - &done;
        let step_img = if room < remaining { room } else { remaining };
        let step_src = &step_img / &speed;
        let to = match dir.sign {
            Sign::Pos => &offset + &step_src,
            Sign::Neg => &offset - &step_src,
        };
        state.lift.push_segment(x, Segment { edge: dir.edge, from: offset, to })?;
        state.incoming = Some(dir);
        state.cur = state.lift.end().clone();
        done = &done + &step_img;
    }
    Ok(())
}

/// The deterministic total lift confined to a region: continuations are
/// rejected as soon as a step would leave `within`. Mirrors lifting
/// inside a fixed normal domain; the unrestricted variant works on the
/// whole compact source.
pub fn total_lift_within(
    f: &GraphMap,
    base: &Walk,
    start: &GraphPoint,
    within: &crate::region::Region,
) -> Result<Lift> {
    if !within.contains(f.source(), start) {
        return Err(CoreError::Precondition("lift start must lie in the region".into()));
    }
    let lift = total_lift(f, base, start)?;
    // replay the lift and verify containment segment by segment; the
    // deterministic continuation is unique up to recorded choices, so a
    // containment failure means no confined lift along those choices.
    for seg in lift.lift.segments() {
        let lo = seg.from.clone().min(seg.to.clone());
        let hi = seg.from.clone().max(seg.to.clone());
        let mut piece = crate::region::Region::empty();
        piece.insert_span(
            f.source(),
            seg.edge,
            crate::pl::Span { lo, hi, lo_closed: false, hi_closed: false },
        );
        if !piece.normalized(f.source()).is_subset(f.source(), within) {
            return Err(CoreError::LiftStuck {
                at: seg.start_point(f.source()),
                consumed: "confined lift leaves the region".into(),
            });
        }
    }
    Ok(lift)
}

/// The deterministic total lift of `base` starting from `start`.
pub fn total_lift(f: &GraphMap, base: &Walk, start: &GraphPoint) -> Result<Lift> {
    f.require_branched_cover()?;
    base.validate(f.target())?;
    if &f.eval(start)? != base.start() {
        return Err(CoreError::Precondition(
            "lift start point must lie over the base start".into(),
        ));
    }
    let mut state = LiftState {
        cur: start.clone(),
        lift: Walk::empty_at(start.clone()),
        incoming: None,
        choices: Vec::new(),
    };
    let mut consumed = rat_zero();
    for seg in base.segments() {
        lift_segment(f, &mut state, seg, &consumed, |_, _| 0)?;
        consumed = &consumed + &seg.len();
    }
    Ok(Lift {
        base: base.clone(),
        lift: state.lift,
        start: start.clone(),
        total: true,
        choices: state.choices,
    })
}

/// One deterministic total lift per fiber point over the base start.
pub fn lifts_from_fiber(f: &GraphMap, base: &Walk) -> Result<Vec<Lift>> {
    let fiber = f.fiber(base.start())?;
    if !fiber.discrete {
        return Err(CoreError::NotBranchedCover("fiber is not discrete".into()));
    }
    fiber.points.iter().map(|p| total_lift(f, base, p)).collect()
}

/// All distinct total lifts from one start point, enumerated over the
/// branch choices (depth-first over choice plans, budget-capped).
pub fn enumerate_total_lifts(
    f: &GraphMap,
    base: &Walk,
    start: &GraphPoint,
    budget: usize,
) -> Result<Vec<Lift>> {
    f.require_branched_cover()?;
    base.validate(f.target())?;
    if &f.eval(start)? != base.start() {
        return Err(CoreError::Precondition(
            "lift start point must lie over the base start".into(),
        ));
    }
    let mut plans: Vec<Vec<usize>> = vec![vec![]];
    let mut seen: BTreeSet<Vec<(crate::graph::EdgeId, Rat, Rat)>> = BTreeSet::new();
    let mut out: Vec<Lift> = Vec::new();
    let mut explored = 0usize;
    while let Some(plan) = plans.pop() {
        explored += 1;
        if explored > budget {
            return Err(CoreError::BudgetExceeded(format!(
                "lift enumeration exceeded {budget} attempts"
            )));
        }
        let mut state = LiftState {
            cur: start.clone(),
            lift: Walk::empty_at(start.clone()),
            incoming: None,
            choices: Vec::new(),
        };
        let mut junction = 0usize;
        let mut widths: Vec<usize> = Vec::new();
        let mut consumed = rat_zero();
        for seg in base.segments() {
            lift_segment(f, &mut state, seg, &consumed, |_, options| {
                let k = if junction < plan.len() { plan[junction] } else { 0 };
                widths.push(options.len());
                junction += 1;
                k
            })?;
            consumed = &consumed + &seg.len();
        }
        for (j, &width) in widths.iter().enumerate().skip(plan.len()) {
            for alt in 1..width {
                let mut next = plan.clone();
                next.extend(std::iter::repeat_n(0, j - next.len()));
                next.push(alt);
                plans.push(next);
            }
        }
        let key: Vec<(crate::graph::EdgeId, Rat, Rat)> = state
            .lift
            .segments()
            .iter()
            .map(|s| (s.edge, s.from.clone(), s.to.clone()))
            .collect();
        if seen.insert(key) {
            out.push(Lift {
                base: base.clone(),
                lift: state.lift,
                start: start.clone(),
                total: true,
                choices: state.choices,
            });
        }
    }
    Ok(out)
}

/// Exact replay check: the image walk of `lift` must equal `base`
/// segment-by-segment after normalization, with matching endpoints.
pub fn verify_lift(f: &GraphMap, lift: &Walk, base: &Walk) -> bool {
    if lift.validate(f.source()).is_err() || base.validate(f.target()).is_err() {
        return false;
    }
    match f.image_walk(lift) {
        Ok(img) => img == *base,
        Err(_) => false,
    }
}

/// When f is L-BLD, every lift alpha of beta satisfies
/// len(beta)/L <= len(alpha) <= L len(beta).
pub fn lift_length_within_bld_bounds(l: &Rat, base: &Walk, lift: &Walk) -> bool {
    let lb = base.length();
    let la = lift.length();
    la <= l * &lb && la >= &lb / l
}

/// The bijection between the fibers of two points obtained by lifting a
/// geodesic from every preimage, with the exact distance bound
/// d(a, psi(a)) <= L d(x, y). Both points must avoid the image of the
/// branch set.
pub fn fiber_transport(
    f: &GraphMap,
    from: &GraphPoint,
    to: &GraphPoint,
    l: &Rat,
) -> Result<FiberTransport> {
    let bld = crate::checkers::check_bld(f, l)?;
    if !bld.verdict {
        return Err(CoreError::Precondition(format!(
            "map is not {}-bld: {}",
            fmt_rat(l),
            bld.witness.map(|w| w.detail).unwrap_or_default()
        )));
    }
    let branch_images: BTreeSet<GraphPoint> =
        f.branch_set()?.iter().map(|p| f.eval(p)).collect::<Result<_>>()?;
    for p in [from, to] {
        if branch_images.contains(p) {
            return Err(CoreError::Precondition(
                "transport endpoints must avoid the branch set image".into(),
            ));
        }
    }
    let base = f.target().geodesic(from, to)?;
    let d = f.target().distance(from, to)?;
    let bound = l * &d;
    let fiber_from = f.fiber(from)?;
    let fiber_to = f.fiber(to)?;
    let mut pairs = Vec::new();
    let mut endpoints: BTreeSet<GraphPoint> = BTreeSet::new();
    for a in &fiber_from.points {
        let lift = total_lift(f, &base, a)?;
        let psi = lift.lift.end().clone();
        if !endpoints.insert(psi.clone()) {
            return Err(CoreError::TransportDegenerate(format!(
                "two lifts end at {}",
                crate::graph::fmt_point(f.source(), &psi)
            )));
        }
        let dist = f.source().distance(a, &psi)?;
        if dist > bound {
            return Err(CoreError::TransportDegenerate(format!(
                "transport distance {} exceeds the bound {}",
                fmt_rat(&dist),
                fmt_rat(&bound)
            )));
        }
        pairs.push((a.clone(), psi, dist));
    }
    if fiber_from.points.len() != fiber_to.points.len() {
        return Err(CoreError::TransportDegenerate(format!(
            "fiber cardinalities differ: {} vs {}",
            fiber_from.points.len(),
            fiber_to.points.len()
        )));
    }
    for (_, psi, _) in &pairs {
        if !fiber_to.points.contains(psi) {
            return Err(CoreError::TransportDegenerate(
                "lift endpoint misses the target fiber".into(),
            ));
        }
    }
    Ok(FiberTransport { from: from.clone(), to: to.clone(), pairs, bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::graph::{EdgeId, VertexId};
    use crate::rational::{rat, rat_int};
    use std::sync::Arc;

    fn full_loop(f: &GraphMap) -> Walk {
        let y = f.target();
        let mut w = Walk::empty_at(GraphPoint::Vertex(VertexId(0)));
        for e in y.edge_ids() {
            let len = y.edge(e).len.clone();
            w.push_segment(y, Segment { edge: e, from: rat_zero(), to: len }).unwrap();
        }
        w
    }

    #[test]
    fn w2_loop_lifts_to_half_cycle() {
        let w2 = fixtures::winding(2, 3);
        let beta = full_loop(&w2);
        assert_eq!(beta.length(), rat_int(3));
        let lift = total_lift(&w2, &beta, &GraphPoint::Vertex(VertexId(0))).unwrap();
        assert_eq!(lift.lift.length(), rat_int(3));
        assert_eq!(lift.lift.end(), &GraphPoint::Vertex(VertexId(3)));
        assert!(verify_lift(&w2, &lift.lift, &beta));
        let lifts = lifts_from_fiber(&w2, &beta).unwrap();
        assert_eq!(lifts.len(), 2);
        let ends: BTreeSet<_> = lifts.iter().map(|l| l.lift.end().clone()).collect();
        assert_eq!(ends.len(), 2);
    }

    #[test]
    fn identity_lift_echoes() {
        let g = Arc::new(fixtures::cycle_graph(4, rat_int(1)));
        let id = fixtures::identity(&g);
        let beta = g
            .geodesic(&GraphPoint::Vertex(VertexId(0)), &GraphPoint::Vertex(VertexId(2)))
            .unwrap();
        let lift = total_lift(&id, &beta, &GraphPoint::Vertex(VertexId(0))).unwrap();
        assert_eq!(&lift.lift, &beta);
        let all =
            enumerate_total_lifts(&id, &beta, &GraphPoint::Vertex(VertexId(0)), 1000).unwrap();
        assert_eq!(all.len(), 1);
    }

    #[test]
    fn tent_lifts_merge_at_fold() {
        let tent = fixtures::tent();
        let y = tent.target();
        let beta = Walk::from_segments(
            y,
            GraphPoint::Vertex(VertexId(0)),
            vec![Segment { edge: EdgeId(0), from: rat_int(0), to: rat_int(1) }],
        )
        .unwrap();
        let from_a = total_lift(&tent, &beta, &GraphPoint::Vertex(VertexId(0))).unwrap();
        assert_eq!(from_a.lift.end(), &GraphPoint::Vertex(VertexId(1)));
        let from_b = total_lift(&tent, &beta, &GraphPoint::Vertex(VertexId(2))).unwrap();
        assert_eq!(from_b.lift.end(), &GraphPoint::Vertex(VertexId(1)));
    }

    #[test]
    fn tent_round_trip_avoids_backtracking() {
        let tent = fixtures::tent();
        let y = tent.target();
        // beta: u -> w -> u (length 2)
        let beta = Walk::from_segments(
            y,
            GraphPoint::Vertex(VertexId(0)),
            vec![
                Segment { edge: EdgeId(0), from: rat_int(0), to: rat_int(1) },
                Segment { edge: EdgeId(0), from: rat_int(1), to: rat_int(0) },
            ],
        )
        .unwrap();
        let a = GraphPoint::Vertex(VertexId(0));
        let b = GraphPoint::Vertex(VertexId(2));
        let det_a = total_lift(&tent, &beta, &a).unwrap();
        assert_eq!(det_a.lift.end(), &b, "the continuation crosses the fold");
        let det_b = total_lift(&tent, &beta, &b).unwrap();
        assert_eq!(det_b.lift.end(), &a);
        assert!(verify_lift(&tent, &det_a.lift, &beta));
        assert!(det_a.choices.is_empty(), "dropping the backtrack leaves a forced continuation");
        // enumeration from both fiber points yields exactly the two
        // non-backtracking lifts a->m->b and b->m->a
        let mut all = Vec::new();
        for p in [a, b] {
            all.extend(enumerate_total_lifts(&tent, &beta, &p, 1000).unwrap());
        }
        assert_eq!(all.len(), 2);
        let ends: BTreeSet<_> = all.iter().map(|l| l.lift.end().clone()).collect();
        assert_eq!(ends.len(), 2);
    }

    #[test]
    fn w2_enumeration_finds_exactly_two_lifts_total() {
        let w2 = fixtures::winding(2, 3);
        let beta = full_loop(&w2);
        let mut all = Vec::new();
        for p in w2.fiber(beta.start()).unwrap().points {
            all.extend(enumerate_total_lifts(&w2, &beta, &p, 1000).unwrap());
        }
        assert_eq!(all.len(), 2);
    }

    #[test]
    fn speed2_lift_scales_length() {
        let s2 = fixtures::speed2();
        let y = s2.target();
        let beta = y
            .geodesic(&GraphPoint::Vertex(VertexId(0)), &GraphPoint::Vertex(VertexId(2)))
            .unwrap();
        assert_eq!(beta.length(), rat_int(2));
        let lift = total_lift(&s2, &beta, &GraphPoint::Vertex(VertexId(0))).unwrap();
        assert_eq!(lift.lift.length(), rat_int(1));
        assert!(lift_length_within_bld_bounds(&rat_int(2), &beta, &lift.lift));
        assert!(!lift_length_within_bld_bounds(&rat(3, 2), &beta, &lift.lift));
    }

    #[test]
    fn verify_lift_rejects_perturbations() {
        let w2 = fixtures::winding(2, 3);
        let beta = full_loop(&w2);
        let lift = total_lift(&w2, &beta, &GraphPoint::Vertex(VertexId(0))).unwrap();
        let mut broken = Walk::empty_at(lift.lift.start().clone());
        for seg in &lift.lift.segments()[..lift.lift.segments().len() - 1] {
            broken.push_segment(w2.source(), seg.clone()).unwrap();
        }
        assert!(!verify_lift(&w2, &broken, &beta));
    }

    #[test]
    fn transport_w2_vertices() {
        let w2 = fixtures::winding(2, 3);
        let x = GraphPoint::Vertex(VertexId(0));
        let y = GraphPoint::Vertex(VertexId(1));
        let t = fiber_transport(&w2, &x, &y, &rat_int(1)).unwrap();
        assert_eq!(t.pairs.len(), 2);
        for (_, _, d) in &t.pairs {
            assert_eq!(*d, rat_int(1));
        }
    }

    #[test]
    fn transport_identity_is_identity() {
        let g = Arc::new(fixtures::path_graph(3));
        let id = fixtures::identity(&g);
        let x = g.point_on_edge(EdgeId(0), rat(1, 2)).unwrap();
        let y = g.point_on_edge(EdgeId(2), rat(1, 2)).unwrap();
        let t = fiber_transport(&id, &x, &y, &rat_int(1)).unwrap();
        assert_eq!(t.pairs.len(), 1);
        assert_eq!(t.pairs[0].0, x);
        assert_eq!(t.pairs[0].1, y);
        assert_eq!(t.pairs[0].2, rat_int(2));
    }

    #[test]
    fn transport_tent_interior_points() {
        let tent = fixtures::tent();
        let x = tent.target().point_on_edge(EdgeId(0), rat(1, 4)).unwrap();
        let y = tent.target().point_on_edge(EdgeId(0), rat(3, 4)).unwrap();
        let t = fiber_transport(&tent, &x, &y, &rat_int(1)).unwrap();
        assert_eq!(t.pairs.len(), 2);
        for (_, _, d) in &t.pairs {
            assert_eq!(*d, rat(1, 2));
        }
    }

    #[test]
    fn transport_rejects_branch_image_endpoints() {
        let tent = fixtures::tent();
        let w = GraphPoint::Vertex(VertexId(1)); // image of the fold point
        let y = tent.target().point_on_edge(EdgeId(0), rat(1, 2)).unwrap();
        assert!(matches!(
            fiber_transport(&tent, &w, &y, &rat_int(1)),
            Err(CoreError::Precondition(_))
        ));
    }

    #[test]
    fn confined_lift_stays_in_normal_domain() {
        let w2 = fixtures::winding(2, 3);
        let x = GraphPoint::Vertex(VertexId(0));
        let u = w2.u_component(&x, &rat_int(1)).unwrap();
        let beta = w2
            .target()
            .geodesic(&GraphPoint::Vertex(VertexId(0)), &GraphPoint::Vertex(VertexId(1)))
            .unwrap();
        let lift = total_lift_within(&w2, &beta, &x, &u).unwrap();
        assert_eq!(lift.lift.length(), rat_int(1));
        // the far fiber point lies outside U, so its confined lift fails
        let whole = crate::region::Region::whole(w2.source());
        assert!(total_lift_within(&w2, &beta, &GraphPoint::Vertex(VertexId(3)), &u).is_err());
        assert!(total_lift_within(&w2, &beta, &GraphPoint::Vertex(VertexId(3)), &whole).is_ok());
    }

    #[test]
    fn transport_composition_respects_triangle_bound() {
        let w2 = fixtures::winding(2, 3);
        let l = rat_int(1);
        let x = GraphPoint::Vertex(VertexId(0));
        let y = GraphPoint::Vertex(VertexId(1));
        let z = w2.target().point_on_edge(EdgeId(1), rat(1, 2)).unwrap();
        let t1 = fiber_transport(&w2, &x, &y, &l).unwrap();
        let t2 = fiber_transport(&w2, &y, &z, &l).unwrap();
        let dxy = w2.target().distance(&x, &y).unwrap();
        let dyz = w2.target().distance(&y, &z).unwrap();
        let bound = &l * (&dxy + &dyz);
        for (a, b, _) in &t1.pairs {
            let c = &t2
                .pairs
                .iter()
                .find(|(p, _, _)| p == b)
                .expect("composable pairing")
                .1;
            assert!(w2.source().distance(a, c).unwrap() <= bound);
        }
    }

    #[test]
    fn constant_base_lifts_constantly() {
        let w2 = fixtures::winding(2, 3);
        let beta = Walk::empty_at(GraphPoint::Vertex(VertexId(0)));
        let lift = total_lift(&w2, &beta, &GraphPoint::Vertex(VertexId(3))).unwrap();
        assert!(lift.lift.segments().is_empty());
        assert_eq!(lift.lift.end(), &GraphPoint::Vertex(VertexId(3)));
    }
}
