//! Pointed mapping packages, quasi-isometry verification and search, and
//! finite convergence certificates.
//!
//! Convergence of pointed mapping packages is an infinite-limit
//! statement; the artifact certifies it over a finite schedule of
//! indices and radii together with a declared rate. Quasi-isometry
//! conditions are checked on finite nets: the additive distortion bound
//! is tested exactly on net pairs, and the coverage condition is tested
//! as an exact region computation with a 2*delta net-mesh allowance.

use std::sync::Arc;

use num_traits::Signed;

use crate::error::{CoreError, Result};
use crate::graph::{EdgeId, GraphPoint, MetricGraph, VertexId};
use crate::map::GraphMap;
use crate::pl::PlFn;
use crate::rational::{fmt_rat, rat, rat_int, rat_one, rat_zero, Rat};
use crate::region::Region;

#[derive(Debug, Clone)]
pub struct PointedSpace {
    pub space: Arc<MetricGraph>,
    pub basepoint: GraphPoint,
}

impl PointedSpace {
    pub fn new(space: Arc<MetricGraph>, basepoint: GraphPoint) -> Result<Self> {
        if !space.contains_point(&basepoint) {
            return Err(CoreError::PointNotOnGraph);
        }
        Ok(PointedSpace { space, basepoint })
    }
}

/// A pointed triple ((X, x0), (Y, y0), f) with f(x0) = y0.
#[derive(Debug, Clone)]
pub struct MappingPackage {
    pub source: PointedSpace,
    pub target: PointedSpace,
    pub map: GraphMap,
}

impl MappingPackage {
    pub fn new(map: GraphMap, x0: GraphPoint, y0: GraphPoint) -> Result<Self> {
        let source = PointedSpace::new(map.source().clone(), x0)?;
        let target = PointedSpace::new(map.target().clone(), y0)?;
        if map.eval(&source.basepoint)? != target.basepoint {
            return Err(CoreError::Precondition(
                "package map must send the source basepoint to the target basepoint".into(),
            ));
        }
        Ok(MappingPackage { source, target, map })
    }
}

/// A point assignment on a finite net of the source ball B(x0, 1/eps).
#[derive(Debug, Clone)]
pub struct QiWitness {
    pub epsilon: Rat,
    pub delta: Rat,
    pub net: Vec<GraphPoint>,
    pub images: Vec<GraphPoint>,
}

#[derive(Debug, Clone)]
pub enum QiViolation {
    Distortion { a: GraphPoint, b: GraphPoint, distortion: Rat },
    Coverage { radius: Rat, gap: Rat },
}

#[derive(Debug, Clone)]
pub struct QiReport {
    pub pass: bool,
    pub violation: Option<QiViolation>,
    pub max_distortion: Rat,
    pub worst_coverage_gap: Rat,
    /// Allowance added to coverage tests for off-net points.
    pub mesh_correction: Rat,
}

/// Largest distance from a point of `region` to the finite set `pts`,
/// exact via lower envelopes of the distance profiles.
pub fn max_dist_to_set(g: &MetricGraph, region: &Region, pts: &[GraphPoint]) -> Rat {
    assert!(!pts.is_empty(), "net must be nonempty");
    let mut worst = rat_zero();
    for v in region.vertices() {
        let p = GraphPoint::Vertex(v);
        let d = pts
            .iter()
            .map(|q| g.distance(&p, q).expect("valid points"))
            .min()
            .expect("nonempty net");
        if d > worst {
            worst = d;
        }
    }
    // group spans per edge so each envelope is built once
    let mut edges: Vec<EdgeId> = region.spans().map(|(e, _)| e).collect();
    edges.sort();
    edges.dedup();
    for e in edges {
        let mut envelope: Option<PlFn> = None;
        for q in pts {
            let prof = g.dist_profile(q, e);
            envelope = Some(match envelope {
                None => prof,
                Some(env) => env.pointwise_min(&prof),
            });
        }
        let envelope = envelope.expect("nonempty net");
        for (se, span) in region.spans() {
            if se != e {
                continue;
            }
            let mut cands: Vec<Rat> = vec![span.lo.clone(), span.hi.clone()];
            for (x, _) in envelope.breakpoints() {
                if *x > span.lo && *x < span.hi {
                    cands.push(x.clone());
                }
            }
            for t in cands {
                let d = envelope.eval(&t);
                if d > worst {
                    worst = d;
                }
            }
        }
    }
    worst
}

pub fn nearest_in_net<'a>(
    g: &MetricGraph,
    p: &GraphPoint,
    net: &'a [GraphPoint],
) -> (usize, &'a GraphPoint, Rat) {
    let mut best: Option<(usize, &GraphPoint, Rat)> = None;
    for (i, q) in net.iter().enumerate() {
        let d = g.distance(p, q).expect("valid points");
        if best.as_ref().is_none_or(|(_, _, bd)| d < *bd) {
            best = Some((i, q, d));
        }
    }
    best.expect("nonempty net")
}

fn validate_witness(src: &PointedSpace, dst: &PointedSpace, w: &QiWitness) -> Result<()> {
    if w.epsilon <= rat_zero() {
        return Err(CoreError::Precondition("epsilon must be positive".into()));
    }
    let bound = &w.epsilon / rat_int(4);
    if w.delta > bound {
        return Err(CoreError::NetTooCoarse {
            delta: fmt_rat(&w.delta),
            bound: fmt_rat(&bound),
        });
    }
    if w.net.len() != w.images.len() || w.net.is_empty() {
        return Err(CoreError::ScheduleIncomplete("net and image lists must match".into()));
    }
    for p in &w.net {
        if !src.space.contains_point(p) {
            return Err(CoreError::PointNotOnGraph);
        }
    }
    for q in &w.images {
        if !dst.space.contains_point(q) {
            return Err(CoreError::PointNotOnGraph);
        }
    }
    // basepoint must be on the net and map to the target basepoint
    match w.net.iter().position(|p| *p == src.basepoint) {
        Some(i) if w.images[i] == dst.basepoint => {}
        _ => {
            return Err(CoreError::Precondition(
                "witness must map the source basepoint to the target basepoint".into(),
            ))
        }
    }
    // the net must delta-cover the ball B(x0, 1/eps)
    let cap = rat_one() / &w.epsilon;
    let ball = src.space.ball(&src.basepoint, &cap, false)?;
    let gap = max_dist_to_set(&src.space, &ball, &w.net);
    if gap > w.delta {
        return Err(CoreError::NetDoesNotCover { gap: fmt_rat(&gap) });
    }
    Ok(())
}

/// Check the quasi-isometry conditions of a witness, with the coverage
/// condition additionally tested at `extra_radii`.
pub fn check_quasi_isometry_with_radii(
    src: &PointedSpace,
    dst: &PointedSpace,
    w: &QiWitness,
    extra_radii: &[Rat],
) -> Result<QiReport> {
    validate_witness(src, dst, w)?;
    let eps = &w.epsilon;
    let mesh_correction = rat_int(2) * &w.delta;
    // condition (i): additive distortion on net pairs, strict
    let mut max_distortion = rat_zero();
    let mut violation: Option<QiViolation> = None;
    'pairs: for i in 0..w.net.len() {
        for j in (i + 1)..w.net.len() {
            let da = src.space.distance(&w.net[i], &w.net[j])?;
            let db = dst.space.distance(&w.images[i], &w.images[j])?;
            let dist = (&da - &db).abs();
            if dist > max_distortion {
                max_distortion = dist.clone();
            }
            if dist >= *eps {
                violation = Some(QiViolation::Distortion {
                    a: w.net[i].clone(),
                    b: w.net[j].clone(),
                    distortion: dist,
                });
                break 'pairs;
            }
        }
    }
    // condition (ii): N_eps(images(net within B(x0, r))) covers
    // B(y0, r - eps) for all r in [eps, 1/eps], tested at the radii
    // where either side changes plus regime midpoints.
    let mut worst_gap = rat_zero();
    if violation.is_none() {
        let cap = rat_one() / eps;
        let mut radii: Vec<Rat> = vec![eps.clone(), cap.clone()];
        for p in &w.net {
            let d = src.space.distance(&src.basepoint, p)?;
            if d >= *eps && d <= cap {
                radii.push(d);
            }
        }
        for c in dst.space.critical_radii(&dst.basepoint) {
            let r = c + eps;
            if r >= *eps && r <= cap {
                radii.push(r);
            }
        }
        for r in extra_radii {
            if *r >= *eps && *r <= cap {
                radii.push(r.clone());
            }
        }
        radii.sort();
        radii.dedup();
        let mids: Vec<Rat> = radii
            .windows(2)
            .map(|p| crate::rational::rat_mid(&p[0], &p[1]))
            .collect();
        radii.extend(mids);
        radii.sort();
        radii.dedup();
        for r in radii {
            let shifted = &r - eps;
            let mut covered: Vec<GraphPoint> = Vec::new();
            for (p, q) in w.net.iter().zip(&w.images) {
                if src.space.distance(&src.basepoint, p)? <= r {
                    covered.push(q.clone());
                }
            }
            let gap = if shifted <= rat_zero() {
                rat_zero()
            } else if covered.is_empty() {
                dst.space.eccentricity(&dst.basepoint)
            } else {
                let target_ball = dst.space.ball(&dst.basepoint, &shifted, false)?;
                max_dist_to_set(&dst.space, &target_ball, &covered)
            };
            if gap > worst_gap {
                worst_gap = gap.clone();
            }
            if gap > eps + &mesh_correction {
                violation = Some(QiViolation::Coverage { radius: r, gap });
                break;
            }
        }
    }
    Ok(QiReport {
        pass: violation.is_none(),
        violation,
        max_distortion,
        worst_coverage_gap: worst_gap,
        mesh_correction,
    })
}

pub fn check_quasi_isometry(
    src: &PointedSpace,
    dst: &PointedSpace,
    w: &QiWitness,
) -> Result<QiReport> {
    check_quasi_isometry_with_radii(src, dst, w, &[])
}

#[derive(Debug, Clone)]
pub struct MinEps {
    /// Infimum of admissible epsilon over the two metric conditions.
    pub infimum: Rat,
    /// Whether the infimum itself passes (the distortion bound is
    /// strict, so a distortion-bound infimum is never attained).
    pub attained: bool,
    /// The floor imposed by the net-mesh policy delta <= eps/4.
    pub policy_floor: Rat,
}

/// Smallest admissible epsilon for a fixed witness assignment, over the
/// finite candidate set of distortion and coverage-slack values.
pub fn min_qi_epsilon(src: &PointedSpace, dst: &PointedSpace, w: &QiWitness) -> Result<MinEps> {
    // distortion side: strict bound, infimum = max pair distortion
    let mut max_distortion = rat_zero();
    for i in 0..w.net.len() {
        for j in (i + 1)..w.net.len() {
            let da = src.space.distance(&w.net[i], &w.net[j])?;
            let db = dst.space.distance(&w.images[i], &w.images[j])?;
            let dist = (&da - &db).abs();
            if dist > max_distortion {
                max_distortion = dist;
            }
        }
    }
    // coverage side: smallest eps with worst gap <= eps + 2 delta,
    // searched over the closure of observed slack values. `eps = 0` is
    // the exact limit (largest balls, no fattening beyond the mesh).
    let slack = |eps: &Rat| -> Result<Rat> {
        let cap = if *eps > rat_zero() {
            rat_one() / eps
        } else {
            src.space.eccentricity(&src.basepoint) + rat_one()
        };
        let mut worst = rat_zero();
        let mut radii: Vec<Rat> = vec![eps.clone(), cap.clone()];
        for p in &w.net {
            let d = src.space.distance(&src.basepoint, p)?;
            if d >= *eps && d <= cap {
                radii.push(d);
            }
        }
        radii.sort();
        radii.dedup();
        for r in radii {
            let shifted = &r - eps;
            if shifted <= rat_zero() {
                continue;
            }
            let mut covered: Vec<GraphPoint> = Vec::new();
            for (p, q) in w.net.iter().zip(&w.images) {
                if src.space.distance(&src.basepoint, p)? <= r {
                    covered.push(q.clone());
                }
            }
            let gap = if covered.is_empty() {
                dst.space.eccentricity(&dst.basepoint)
            } else {
                let ball = dst.space.ball(&dst.basepoint, &shifted, false)?;
                max_dist_to_set(&dst.space, &ball, &covered)
            };
            let adjusted = gap - rat_int(2) * &w.delta;
            if adjusted > worst {
                worst = adjusted;
            }
        }
        Ok(worst)
    };
    let mut ii_min = rat_zero();
    if slack(&rat_zero())? > rat_zero() {
        let mut candidates: Vec<Rat> = vec![max_distortion.clone()];
        let mut frontier = candidates.clone();
        for _ in 0..3 {
            let mut next = Vec::new();
            for c in &frontier {
                let s = slack(c)?;
                if s > rat_zero() && !candidates.contains(&s) {
                    candidates.push(s.clone());
                    next.push(s);
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        candidates.sort();
        candidates.dedup();
        for c in &candidates {
            if *c > rat_zero() && slack(c)? <= *c {
                ii_min = c.clone();
                break;
            }
        }
    }
    let infimum = if ii_min > max_distortion { ii_min.clone() } else { max_distortion.clone() };
    let attained = ii_min > max_distortion;
    Ok(MinEps { infimum, attained, policy_floor: rat_int(4) * &w.delta })
}

/// Build a net of `B(x0, cap)` with mesh at most `spacing / 2`: all
/// vertices and span ends of the ball plus grid points at most `spacing`
/// apart along every covered span.
pub fn ball_net(g: &MetricGraph, x0: &GraphPoint, cap: &Rat, spacing: &Rat) -> Vec<GraphPoint> {
    assert!(*spacing > rat_zero());
    let reach = g.eccentricity(x0);
    let cap = if *cap > reach { reach } else { cap.clone() };
    let mut net: Vec<GraphPoint> = vec![x0.clone()];
    if cap <= rat_zero() {
        return net;
    }
    let ball = g.ball(x0, &cap, false).expect("positive radius");
    for v in ball.vertices() {
        net.push(GraphPoint::Vertex(v));
    }
    for (e, span) in ball.spans() {
        let width = &span.hi - &span.lo;
        if width == rat_zero() {
            net.push(g.point_on_edge(e, span.lo.clone()).expect("valid"));
            continue;
        }
        let ratio = &width / spacing;
        let mut k = ratio.to_integer();
        if Rat::from_integer(k.clone()) < ratio {
            k += 1;
        }
        let k: usize = k.to_string().parse().expect("small net count");
        let step = &width / rat_int(k as i64);
        for i in 0..=k {
            let off = &span.lo + &step * rat_int(i as i64);
            net.push(g.point_on_edge(e, off).expect("valid offset"));
        }
    }
    net.sort();
    net.dedup();
    net
}

/// Exhaustive quasi-isometry search over net-to-net assignments with
/// distortion pruning. A `None` result is a search outcome over the
/// finite net space, not a nonexistence proof.
pub fn search_quasi_isometry(
    src: &PointedSpace,
    dst: &PointedSpace,
    eps: &Rat,
    delta: &Rat,
    budget: usize,
) -> Result<Option<QiWitness>> {
    if *eps <= rat_zero() {
        return Err(CoreError::Precondition("epsilon must be positive".into()));
    }
    let bound = eps / rat_int(4);
    if *delta > bound {
        return Err(CoreError::NetTooCoarse { delta: fmt_rat(delta), bound: fmt_rat(&bound) });
    }
    let cap = rat_one() / eps;
    let spacing = rat_int(2) * delta;
    let net = ball_net(&src.space, &src.basepoint, &cap, &spacing);
    let target_cap = &cap + eps;
    let candidates = ball_net(&dst.space, &dst.basepoint, &target_cap, &spacing);

    // a-priori coverage feasibility: everything the witness can reach is
    // within max net distance + eps of y0
    let reach_needed = {
        let mut ecc = dst.space.eccentricity(&dst.basepoint);
        if cap < ecc {
            ecc = cap.clone();
        }
        &ecc - eps
    };
    let reach_possible = net
        .iter()
        .map(|p| src.space.distance(&src.basepoint, p).expect("valid"))
        .max()
        .unwrap_or_else(rat_zero)
        + eps
        + eps
        + rat_int(2) * delta;
    if reach_needed > reach_possible {
        return Ok(None);
    }

    // order: basepoint first, then by distance from it
    let mut order: Vec<usize> = (0..net.len()).collect();
    let dist_to_base: Vec<Rat> = net
        .iter()
        .map(|p| src.space.distance(&src.basepoint, p).expect("valid"))
        .collect();
    order.sort_by(|&a, &b| dist_to_base[a].cmp(&dist_to_base[b]));
    // per net point, candidate targets sorted by radial mismatch
    let cand_dist: Vec<Rat> = candidates
        .iter()
        .map(|q| dst.space.distance(&dst.basepoint, q).expect("valid"))
        .collect();
    let mut ranked: Vec<Vec<usize>> = Vec::with_capacity(net.len());
    for &i in &order {
        let mut idx: Vec<usize> = (0..candidates.len()).collect();
        idx.sort_by_key(|&c| (&cand_dist[c] - &dist_to_base[i]).abs());
        ranked.push(idx);
    }

    let mut assignment: Vec<usize> = Vec::with_capacity(net.len());
    let mut nodes = 0usize;
    // iterative backtracking over ranked candidates
    let mut cursor: Vec<usize> = vec![0];
    loop {
        nodes += 1;
        if nodes > budget {
            return Err(CoreError::BudgetExceeded(format!(
                "quasi-isometry search exceeded {budget} nodes"
            )));
        }
        let depth = assignment.len();
        if depth == net.len() {
            // full assignment: run the complete check
            let mut images = vec![GraphPoint::Vertex(VertexId(0)); net.len()];
            for (k, &i) in order.iter().enumerate() {
                images[i] = candidates[assignment[k]].clone();
            }
            let witness = QiWitness {
                epsilon: eps.clone(),
                delta: delta.clone(),
                net: net.clone(),
                images,
            };
            if check_quasi_isometry(src, dst, &witness)?.pass {
                return Ok(Some(witness));
            }
            // treat as a failed leaf: backtrack
            assignment.pop();
            let c = cursor.pop().expect("cursor parallel to assignment");
            cursor.push(c + 1);
            continue;
        }
        let next_rank = *cursor.last().expect("cursor nonempty");
        if next_rank >= candidates.len() {
            cursor.pop();
            if assignment.pop().is_none() {
                return Ok(None);
            }
            let c = cursor.pop().expect("cursor parallel");
            cursor.push(c + 1);
            continue;
        }
        let cand = ranked[depth][next_rank];
        // prune: basepoint fixed, pairwise distortion strict
        let mut ok = true;
        if depth == 0 {
            ok = candidates[cand] == dst.basepoint;
        }
        if ok {
            for k in 0..depth {
                let da = src
                    .space
                    .distance(&net[order[k]], &net[order[depth]])
                    .expect("valid");
                let db = dst
                    .space
                    .distance(&candidates[assignment[k]], &candidates[cand])
                    .expect("valid");
                if (&da - &db).abs() >= *eps {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            assignment.push(cand);
            cursor.push(0);
        } else {
            let c = cursor.pop().expect("cursor nonempty");
            cursor.push(c + 1);
        }
    }
}

/// Per-index stage of a convergence certificate: for every scheduled
/// radius, an epsilon and the g/h witnesses into the limit spaces.
#[derive(Debug, Clone)]
pub struct Stage {
    pub eps: Vec<Rat>,
    pub g: Vec<QiWitness>,
    pub h: Vec<QiWitness>,
}

/// A sample track instrumenting pointwise convergence: a point of the
/// limit source, one representative per index, a working radius and
/// declared tail bounds.
#[derive(Debug, Clone)]
pub struct Sample {
    pub point: GraphPoint,
    pub track: Vec<GraphPoint>,
    pub radius: Rat,
    pub tails: Vec<Rat>,
}

#[derive(Debug, Clone)]
pub struct Certificate {
    pub packages: Vec<MappingPackage>,
    pub limit: MappingPackage,
    pub radii: Vec<Rat>,
    pub stages: Vec<Stage>,
    pub samples: Vec<Sample>,
    /// Declared rate: eps_i^(r) <= rate_c / i (1-based index).
    pub rate_c: Rat,
    /// Index from which the epsilon sequence must be nonincreasing.
    pub monotone_from: usize,
}

#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub pass: bool,
    pub issues: Vec<String>,
    pub worst_eps: Rat,
    pub worst_tail: Rat,
}

pub fn check_package_convergence(cert: &Certificate) -> Result<ConvergenceReport> {
    if cert.stages.len() != cert.packages.len() {
        return Err(CoreError::ScheduleIncomplete("one stage per package required".into()));
    }
    let mut issues = Vec::new();
    let mut worst_eps = rat_zero();
    let mut worst_tail = rat_zero();
    for (i, stage) in cert.stages.iter().enumerate() {
        let index = i + 1;
        if stage.eps.len() != cert.radii.len()
            || stage.g.len() != cert.radii.len()
            || stage.h.len() != cert.radii.len()
        {
            return Err(CoreError::ScheduleIncomplete(format!(
                "stage {index} must cover every scheduled radius"
            )));
        }
        let pkg = &cert.packages[i];
        for (j, r) in cert.radii.iter().enumerate() {
            let eps = &stage.eps[j];
            if *eps > &cert.rate_c / rat_int(index as i64) {
                issues.push(format!(
                    "eps_{index}^({}) = {} exceeds the declared rate {}",
                    fmt_rat(r),
                    fmt_rat(eps),
                    fmt_rat(&(&cert.rate_c / rat_int(index as i64)))
                ));
            }
            if *eps > worst_eps {
                worst_eps = eps.clone();
            }
            if i + 1 > cert.monotone_from && stage.eps[j] > cert.stages[i - 1].eps[j] {
                issues.push(format!(
                    "eps sequence increases at index {index}, radius {}",
                    fmt_rat(r)
                ));
            }
            for (witness, side, src, dst) in [
                (&stage.g[j], "g", &pkg.source, &cert.limit.source),
                (&stage.h[j], "h", &pkg.target, &cert.limit.target),
            ] {
                if witness.epsilon != *eps {
                    issues.push(format!(
                        "{side}_{index}^({}) carries epsilon {} instead of {}",
                        fmt_rat(r),
                        fmt_rat(&witness.epsilon),
                        fmt_rat(eps)
                    ));
                    continue;
                }
                let rep = check_quasi_isometry_with_radii(src, dst, witness, std::slice::from_ref(r))?;
                if !rep.pass {
                    issues.push(format!(
                        "{side}_{index}^({}) fails: {}",
                        fmt_rat(r),
                        describe_violation(&rep)
                    ));
                }
            }
        }
    }
    // pointwise convergence on the sampled tracks
    for (s_idx, sample) in cert.samples.iter().enumerate() {
        let d0 = cert
            .limit
            .source
            .space
            .distance(&cert.limit.source.basepoint, &sample.point)?;
        if sample.radius <= d0 {
            return Err(CoreError::ScheduleIncomplete(format!(
                "sample {s_idx} radius must exceed d(x0, a)"
            )));
        }
        let j = cert
            .radii
            .iter()
            .position(|r| *r == sample.radius)
            .ok_or_else(|| {
                CoreError::ScheduleIncomplete(format!(
                    "sample {s_idx} radius is not on the schedule"
                ))
            })?;
        if sample.track.len() != cert.packages.len() || sample.tails.len() != cert.packages.len() {
            return Err(CoreError::ScheduleIncomplete(format!(
                "sample {s_idx} must provide one representative and tail per index"
            )));
        }
        let fa = cert.limit.map.eval(&sample.point)?;
        for (i, (a_i, tail)) in sample.track.iter().zip(&sample.tails).enumerate() {
            let index = i + 1;
            let pkg = &cert.packages[i];
            let g = &cert.stages[i].g[j];
            let h = &cert.stages[i].h[j];
            // premise: the track converges to the sample point under g
            let (gi, _, nd) = nearest_in_net(&pkg.source.space, a_i, &g.net);
            if nd > g.delta {
                issues.push(format!(
                    "sample {s_idx}: representative {index} lies {} from the g-net",
                    fmt_rat(&nd)
                ));
                continue;
            }
            let premise = cert
                .limit
                .source
                .space
                .distance(&g.images[gi], &sample.point)?;
            let allowance = &g.epsilon + rat_int(2) * &g.delta;
            if premise > allowance {
                issues.push(format!(
                    "sample {s_idx}: g_{index}(a_{index}) sits {} from a (allowed {})",
                    fmt_rat(&premise),
                    fmt_rat(&allowance)
                ));
            }
            // claim: h_i(f_i(a_i)) approaches f(a)
            let b_i = pkg.map.eval(a_i)?;
            let (hi, _, nd) = nearest_in_net(&pkg.target.space, &b_i, &h.net);
            if nd > h.delta {
                issues.push(format!(
                    "sample {s_idx}: image {index} lies {} from the h-net",
                    fmt_rat(&nd)
                ));
                continue;
            }
            let measured = cert.limit.target.space.distance(&h.images[hi], &fa)?;
            let allowed = tail + rat_int(2) * &h.delta;
            if measured > allowed {
                issues.push(format!(
                    "sample {s_idx}: tail at index {index} is {} (declared {} + mesh)",
                    fmt_rat(&measured),
                    fmt_rat(tail)
                ));
            }
            if measured > worst_tail {
                worst_tail = measured;
            }
            let declared_rate = &cert.rate_c / rat_int(index as i64);
            if *tail > declared_rate {
                issues.push(format!(
                    "sample {s_idx}: declared tail {} at index {index} exceeds the rate",
                    fmt_rat(tail)
                ));
            }
        }
    }
    Ok(ConvergenceReport { pass: issues.is_empty(), issues, worst_eps, worst_tail })
}

fn describe_violation(rep: &QiReport) -> String {
    match &rep.violation {
        Some(QiViolation::Distortion { distortion, .. }) => {
            format!("distortion {} reaches epsilon", fmt_rat(distortion))
        }
        Some(QiViolation::Coverage { radius, gap }) => format!(
            "coverage gap {} at radius {} exceeds the allowance",
            fmt_rat(gap),
            fmt_rat(radius)
        ),
        None => "pass".into(),
    }
}

#[derive(Debug, Clone)]
pub struct LimitHarnessReport {
    pub premises_checked: usize,
    pub convergence_pass: bool,
    /// Verdict of the limit map at the given constant.
    pub limit_pass: bool,
}

/// If every package map is L-LQ and the certificate converges, the limit
/// map must be L-LQ.
pub fn lq_limit_harness(cert: &Certificate, l: &Rat) -> Result<LimitHarnessReport> {
    for (i, pkg) in cert.packages.iter().enumerate() {
        let rep = crate::checkers::check_lq(&pkg.map, l)?;
        if !rep.verdict {
            return Err(CoreError::Precondition(format!(
                "package {} is not {}-lq",
                i + 1,
                fmt_rat(l)
            )));
        }
    }
    let conv = check_package_convergence(cert)?;
    if !conv.pass {
        return Err(CoreError::Precondition("certificate does not converge".into()));
    }
    let limit = crate::checkers::check_lq(&cert.limit.map, l)?;
    Ok(LimitHarnessReport {
        premises_checked: cert.packages.len(),
        convergence_pass: conv.pass,
        limit_pass: limit.verdict,
    })
}

#[derive(Debug, Clone)]
pub struct BldLimitReport {
    pub premises_checked: usize,
    pub convergence_pass: bool,
    pub limit_discrete: bool,
    /// Verdict of check_bld on the limit when it is discrete; `None`
    /// records that the discreteness hypothesis fails and the limit
    /// theorem is not applicable.
    pub limit_bld: Option<bool>,
}

/// If every package map is L-BLD and the limit map is discrete, the
/// limit must be L-BLD; when discreteness fails the report flags the
/// hypothesis instead.
pub fn bld_limit_harness(cert: &Certificate, l: &Rat) -> Result<BldLimitReport> {
    for (i, pkg) in cert.packages.iter().enumerate() {
        let rep = crate::checkers::check_bld(&pkg.map, l)?;
        if !rep.verdict {
            return Err(CoreError::Precondition(format!(
                "package {} is not {}-bld",
                i + 1,
                fmt_rat(l)
            )));
        }
    }
    let conv = check_package_convergence(cert)?;
    if !conv.pass {
        return Err(CoreError::Precondition("certificate does not converge".into()));
    }
    let discrete = cert.limit.map.is_discrete().0;
    let limit_bld = if discrete {
        Some(crate::checkers::check_bld(&cert.limit.map, l)?.verdict)
    } else {
        None
    };
    Ok(BldLimitReport {
        premises_checked: cert.packages.len(),
        convergence_pass: conv.pass,
        limit_discrete: discrete,
        limit_bld,
    })
}

/// A witness assembled from a fresh net of B(x0, 1/eps) with the given
/// grid spacing (mesh delta = spacing/2) and a pointwise assignment.
pub fn net_witness<FN>(src: &PointedSpace, eps: &Rat, spacing: &Rat, assign: FN) -> QiWitness
where
    FN: Fn(&GraphPoint) -> GraphPoint,
{
    let cap = rat_one() / eps;
    let net = ball_net(&src.space, &src.basepoint, &cap, spacing);
    let images = net.iter().map(assign).collect();
    QiWitness { epsilon: eps.clone(), delta: spacing / rat_int(2), net, images }
}

fn witness_from<FN>(src: &PointedSpace, eps: &Rat, assign: FN) -> QiWitness
where
    FN: Fn(&GraphPoint) -> GraphPoint,
{
    let spacing = eps / rat_int(2);
    net_witness(src, eps, &spacing, assign)
}

/// Arc-length position of a point on a cycle graph built by
/// `fixtures::cycle_graph` (edge i spans [i*len, (i+1)*len]).
fn cycle_position(g: &MetricGraph, p: &GraphPoint) -> Rat {
    match p {
        GraphPoint::Vertex(v) => &g.edge(EdgeId(0)).len * rat_int(v.0 as i64),
        GraphPoint::Interior(e, off) => &g.edge(EdgeId(0)).len * rat_int(e.0 as i64) + off,
    }
}

/// The point of a cycle graph at a given arc-length position.
fn cycle_point(g: &MetricGraph, pos: &Rat) -> GraphPoint {
    let len = &g.edge(EdgeId(0)).len;
    let total = len * rat_int(g.edge_count() as i64);
    let mut pos = pos.clone();
    while pos >= total {
        pos = &pos - &total;
    }
    let idx = (&pos / len).to_integer();
    let idx: usize = idx.to_string().parse().expect("small cycle index");
    let off = &pos - len * rat_int(idx as i64);
    g.point_on_edge(EdgeId(idx % g.edge_count()), off).expect("valid offset")
}

/// The degeneration family: X_k is the unit-circumference cycle with k*m
/// edges, Y_k the circumference-1/k cycle with m edges, f_k the degree-k
/// winding at speed 1 (so f_k is 1-BLD for every k). The certified limit
/// is the constant package onto the one-point space: the witnesses g are
/// arc-length re-subdivision correspondences and h collapses to the
/// point, with eps_i = 3/(4i).
pub fn winding_demo(k_max: usize, m: usize) -> Result<Certificate> {
    if k_max < 1 || m < 1 {
        return Err(CoreError::Precondition("k_max and m must be positive".into()));
    }
    if k_max > 64 || m > 64 {
        return Err(CoreError::BudgetExceeded("winding family size".into()));
    }
    let limit_source = Arc::new(crate::fixtures::cycle_graph(m, rat(1, m as i64)));
    let limit_target = Arc::new(crate::fixtures::one_point());
    let limit_map = {
        let vertex_map = (0..m).map(|i| (format!("v{i}"), "o".to_string())).collect();
        let edge_map = (0..m).map(|i| (format!("e{i}"), vec![])).collect();
        GraphMap::build(
            limit_source.clone(),
            limit_target.clone(),
            &crate::map::MapSpec { vertex_map, edge_map },
        )?
    };
    let limit = MappingPackage::new(
        limit_map,
        GraphPoint::Vertex(VertexId(0)),
        GraphPoint::Vertex(VertexId(0)),
    )?;

    let radii = vec![rat(1, 2), rat_one()];
    let mut packages = Vec::new();
    let mut stages = Vec::new();
    for k in 1..=k_max {
        let n_edges = k * m;
        let source = Arc::new(crate::fixtures::cycle_graph(n_edges, rat(1, n_edges as i64)));
        let target = Arc::new(crate::fixtures::cycle_graph(m, rat(1, n_edges as i64)));
        let vertex_map =
            (0..n_edges).map(|i| (format!("v{i}"), format!("v{}", i % m))).collect();
        let edge_map = (0..n_edges)
            .map(|i| (format!("e{i}"), vec![(format!("e{}", i % m), true)]))
            .collect();
        let f = GraphMap::build(
            source.clone(),
            target.clone(),
            &crate::map::MapSpec { vertex_map, edge_map },
        )?;
        let pkg = MappingPackage::new(
            f,
            GraphPoint::Vertex(VertexId(0)),
            GraphPoint::Vertex(VertexId(0)),
        )?;
        let eps_k = rat(3, 4 * k as i64);
        let mut eps = Vec::new();
        let mut gs = Vec::new();
        let mut hs = Vec::new();
        for _ in &radii {
            eps.push(eps_k.clone());
            let src_space = pkg.source.space.clone();
            let limit_src_space = limit.source.space.clone();
            let g_w = witness_from(&pkg.source, &eps_k, |p| {
                cycle_point(&limit_src_space, &cycle_position(&src_space, p))
            });
            gs.push(g_w);
            let h_w = witness_from(&pkg.target, &eps_k, |_| GraphPoint::Vertex(VertexId(0)));
            hs.push(h_w);
        }
        packages.push(pkg);
        stages.push(Stage { eps, g: gs, h: hs });
    }

    // samples: the basepoint and the vertex at arc length floor(m/2)/m
    let mut samples = Vec::new();
    let sample_vertices = if m >= 2 { vec![0usize, m / 2] } else { vec![0usize] };
    for sv in sample_vertices {
        let point = GraphPoint::Vertex(VertexId(sv));
        let track = (1..=k_max).map(|_k| GraphPoint::Vertex(VertexId(sv))).collect::<Vec<_>>();
        // vertex sv of the limit sits at arc length sv/m; in X_k that is
        // vertex sv * k
        let track = track
            .into_iter()
            .enumerate()
            .map(|(i, _)| GraphPoint::Vertex(VertexId(sv * (i + 1))))
            .collect();
        samples.push(Sample {
            point,
            track,
            radius: rat_one(),
            tails: (1..=k_max).map(|_| rat_zero()).collect(),
        });
    }

    Ok(Certificate {
        packages,
        limit,
        radii,
        stages,
        samples,
        rate_c: rat_one(),
        monotone_from: 1,
    })
}

/// A constant sequence of copies of one package, certified by identity
/// witnesses with eps_i = c/i.
pub fn constant_certificate(pkg: &MappingPackage, count: usize, rate_c: &Rat) -> Result<Certificate> {
    if count < 1 {
        return Err(CoreError::Precondition("need at least one package".into()));
    }
    let radii = vec![rat_one()];
    let mut stages = Vec::new();
    for i in 1..=count {
        let eps_i = rate_c / rat_int(i as i64);
        let g = witness_from(&pkg.source, &eps_i, |p| p.clone());
        let h = witness_from(&pkg.target, &eps_i, |p| p.clone());
        stages.push(Stage { eps: vec![eps_i], g: vec![g], h: vec![h] });
    }
    let sample_point = pkg.source.basepoint.clone();
    let samples = vec![Sample {
        point: sample_point.clone(),
        track: (0..count).map(|_| sample_point.clone()).collect(),
        radius: rat_one(),
        tails: (0..count).map(|_| rat_zero()).collect(),
    }];
    Ok(Certificate {
        packages: (0..count).map(|_| pkg.clone()).collect(),
        limit: pkg.clone(),
        radii,
        stages,
        samples,
        rate_c: rate_c.clone(),
        monotone_from: 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn pointed_cycle(n: usize, len: Rat) -> PointedSpace {
        PointedSpace::new(
            Arc::new(fixtures::cycle_graph(n, len)),
            GraphPoint::Vertex(VertexId(0)),
        )
        .unwrap()
    }

    fn pointed_one_point() -> PointedSpace {
        PointedSpace::new(Arc::new(fixtures::one_point()), GraphPoint::Vertex(VertexId(0)))
            .unwrap()
    }

    #[test]
    fn identity_witness_passes_any_eps() {
        let ps = pointed_cycle(3, rat_int(1));
        for eps in [rat(1, 8), rat(1, 2), rat_int(1)] {
            let w = witness_from(&ps, &eps, |p| p.clone());
            let rep = check_quasi_isometry(&ps, &ps, &w).unwrap();
            assert!(rep.pass, "identity witness must pass at eps = {}", fmt_rat(&eps));
            assert_eq!(rep.max_distortion, rat_zero());
        }
    }

    #[test]
    fn collapse_witness_verdicts() {
        // C_3(1/3) has circumference 1 and diameter 1/2
        let src = pointed_cycle(3, rat(1, 3));
        let dst = pointed_one_point();
        // a 1/12 grid realizes antipodal pairs at distance exactly 1/2
        let collapse = |eps: &Rat| {
            net_witness(&src, eps, &rat(1, 12), |_| GraphPoint::Vertex(VertexId(0)))
        };
        let w = collapse(&rat(3, 4));
        let rep = check_quasi_isometry(&src, &dst, &w).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.max_distortion, rat(1, 2));
        let w = collapse(&rat(1, 4));
        let rep = check_quasi_isometry(&src, &dst, &w).unwrap();
        assert!(!rep.pass);
        match rep.violation.unwrap() {
            QiViolation::Distortion { distortion, .. } => assert!(distortion >= rat(1, 4)),
            other => panic!("expected a distortion violation, got {other:?}"),
        }
    }

    #[test]
    fn min_eps_identity_and_collapse() {
        let ps = pointed_cycle(3, rat(1, 3));
        let w = witness_from(&ps, &rat(1, 8), |p| p.clone());
        let rep = min_qi_epsilon(&ps, &ps, &w).unwrap();
        assert_eq!(rep.infimum, rat_zero());
        assert!(!rep.attained);

        let dst = pointed_one_point();
        let w = net_witness(&ps, &rat(3, 4), &rat(1, 12), |_| GraphPoint::Vertex(VertexId(0)));
        let rep = min_qi_epsilon(&ps, &dst, &w).unwrap();
        assert_eq!(rep.infimum, rat(1, 2));
        assert!(!rep.attained);
    }

    #[test]
    fn min_eps_winding_assignment_distorts() {
        // the degree-2 winding from C_6(1) to C_3(1) halves antipodal
        // distances: infimum >= 3/2
        let src = pointed_cycle(6, rat_int(1));
        let dst = pointed_cycle(3, rat_int(1));
        let w2 = fixtures::winding(2, 3);
        let w = witness_from(&src, &rat(1, 2), |p| w2.eval(p).unwrap());
        let rep = min_qi_epsilon(&src, &dst, &w).unwrap();
        assert!(rep.infimum >= rat(3, 2), "got {}", fmt_rat(&rep.infimum));
    }

    #[test]
    fn coarse_net_is_rejected() {
        let ps = pointed_cycle(3, rat_int(1));
        let w = QiWitness {
            epsilon: rat(1, 4),
            delta: rat(1, 2),
            net: vec![GraphPoint::Vertex(VertexId(0))],
            images: vec![GraphPoint::Vertex(VertexId(0))],
        };
        assert!(matches!(
            check_quasi_isometry(&ps, &ps, &w),
            Err(CoreError::NetTooCoarse { .. })
        ));
    }

    #[test]
    fn search_finds_identity_like_witness() {
        let ps = pointed_cycle(3, rat_int(1));
        let found = search_quasi_isometry(&ps, &ps, &rat(1, 2), &rat(1, 8), 2_000_000)
            .unwrap()
            .expect("identity-like witness exists");
        assert!(check_quasi_isometry(&ps, &ps, &found).unwrap().pass);
    }

    #[test]
    fn qi_check_monotone_in_epsilon() {
        let src = pointed_cycle(3, rat(1, 3));
        let dst = pointed_one_point();
        let w = net_witness(&src, &rat(3, 4), &rat(1, 12), |_| GraphPoint::Vertex(VertexId(0)));
        assert!(check_quasi_isometry(&src, &dst, &w).unwrap().pass);
        for factor in [rat_int(2), rat_int(4)] {
            let mut bigger = w.clone();
            bigger.epsilon = &w.epsilon * &factor;
            assert!(
                check_quasi_isometry(&src, &dst, &bigger).unwrap().pass,
                "passing at eps implies passing at every larger eps with the same net"
            );
        }
    }

    #[test]
    fn search_finds_identity_at_fine_epsilon() {
        // the mesh policy at eps = 1/8 forces a ~100-point net
        let ps = pointed_cycle(3, rat_int(1));
        let found = search_quasi_isometry(&ps, &ps, &rat(1, 8), &rat(1, 32), 5_000_000)
            .unwrap()
            .expect("identity-like witness exists");
        assert!(check_quasi_isometry(&ps, &ps, &found).unwrap().pass);
    }

    #[test]
    fn search_finds_collapse_witness() {
        let src = pointed_cycle(3, rat(1, 3));
        let dst = pointed_one_point();
        let found = search_quasi_isometry(&src, &dst, &rat(3, 4), &rat(1, 8), 100_000)
            .unwrap()
            .expect("collapse witness exists");
        assert!(check_quasi_isometry(&src, &dst, &found).unwrap().pass);
    }

    #[test]
    fn search_reports_none_when_target_unreachable() {
        // I_1 cannot quasi-isometrically cover C_8(1) at eps = 1/4
        let src = PointedSpace::new(
            Arc::new(fixtures::path_graph(1)),
            GraphPoint::Vertex(VertexId(0)),
        )
        .unwrap();
        let dst = pointed_cycle(8, rat_int(1));
        let found =
            search_quasi_isometry(&src, &dst, &rat(1, 4), &rat(1, 16), 2_000_000).unwrap();
        assert!(found.is_none());
    }

    #[test]
    fn winding_demo_certificate_converges() {
        let cert = winding_demo(3, 4).unwrap();
        assert_eq!(cert.packages.len(), 3);
        for pkg in &cert.packages {
            assert!(crate::checkers::check_bld(&pkg.map, &rat_one()).unwrap().verdict);
        }
        let rep = check_package_convergence(&cert).unwrap();
        assert!(rep.pass, "issues: {:?}", rep.issues);
        // eps_i <= 1/i
        for (i, stage) in cert.stages.iter().enumerate() {
            for eps in &stage.eps {
                assert!(*eps <= rat(1, (i + 1) as i64));
            }
        }
    }

    #[test]
    fn winding_demo_limit_flags() {
        let cert = winding_demo(2, 4).unwrap();
        let lq = lq_limit_harness(&cert, &rat_one()).unwrap();
        assert!(lq.limit_pass, "the constant limit is 1-lq");
        let bld = bld_limit_harness(&cert, &rat_one()).unwrap();
        assert!(!bld.limit_discrete);
        assert!(bld.limit_bld.is_none(), "discreteness hypothesis fails");
    }

    #[test]
    fn winding_demo_single_loop_cycles() {
        // m = 1 realizes the cycles as single self-loops
        let cert = winding_demo(2, 1).unwrap();
        let rep = check_package_convergence(&cert).unwrap();
        assert!(rep.pass, "issues: {:?}", rep.issues);
    }

    #[test]
    fn constant_identity_sequence_converges() {
        let g = Arc::new(fixtures::cycle_graph(3, rat_int(1)));
        let id = fixtures::identity(&g);
        let pkg = MappingPackage::new(
            id,
            GraphPoint::Vertex(VertexId(0)),
            GraphPoint::Vertex(VertexId(0)),
        )
        .unwrap();
        let cert = constant_certificate(&pkg, 4, &rat_int(2)).unwrap();
        let rep = check_package_convergence(&cert).unwrap();
        assert!(rep.pass, "issues: {:?}", rep.issues);
        let lq = lq_limit_harness(&cert, &rat_one()).unwrap();
        assert!(lq.limit_pass);
    }

    #[test]
    fn corrupted_eps_table_fails() {
        let mut cert = winding_demo(2, 4).unwrap();
        cert.stages[1].eps[0] = rat_int(5);
        let rep = check_package_convergence(&cert).unwrap();
        assert!(!rep.pass);
        // a witness whose h sends the basepoint elsewhere is a schedule
        // violation detected by the witness check
        let mut cert = winding_demo(2, 4).unwrap();
        let wrong = cert.stages[0].g[0].images[0].clone();
        let _ = wrong;
        cert.stages[0].h[0].images =
            cert.stages[0].h[0].images.iter().map(|_| GraphPoint::Vertex(VertexId(0))).collect();
        // (images already collapse to the point, so re-check passes)
        let rep = check_package_convergence(&cert).unwrap();
        assert!(rep.pass);
    }

    #[test]
    fn subsequence_of_passing_certificate_passes() {
        let cert = winding_demo(4, 4).unwrap();
        // indices 2 and 4 (1-based) under the original declared rate
        let sub = Certificate {
            packages: vec![cert.packages[1].clone(), cert.packages[3].clone()],
            limit: cert.limit.clone(),
            radii: cert.radii.clone(),
            stages: vec![cert.stages[1].clone(), cert.stages[3].clone()],
            samples: cert
                .samples
                .iter()
                .map(|s| Sample {
                    point: s.point.clone(),
                    track: vec![s.track[1].clone(), s.track[3].clone()],
                    radius: s.radius.clone(),
                    tails: vec![s.tails[1].clone(), s.tails[3].clone()],
                })
                .collect(),
            rate_c: cert.rate_c.clone(),
            monotone_from: 1,
        };
        let rep = check_package_convergence(&sub).unwrap();
        assert!(rep.pass, "issues: {:?}", rep.issues);
    }
}
