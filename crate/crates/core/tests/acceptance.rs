//! Acceptance suite: one test per criterion, each printing a single
//! pass/fail line (run with `cargo test --test acceptance -- --nocapture`
//! to see them). All assertions are exact; there are no tolerances
//! anywhere in this file.

use std::sync::Arc;

use bldgraph::checkers::{self, PropertyKind};
use bldgraph::convergence::{self, MappingPackage};
use bldgraph::fixtures;
use bldgraph::graph::{GraphPoint, Segment, VertexId, Walk};
use bldgraph::lifting;
use bldgraph::map::GraphMap;
use bldgraph::oracle::Oracle;
use bldgraph::rational::{fmt_rat, rat, rat_int, rat_one, rat_zero, Rat};
use bldgraph::region::Region;
use bldgraph::sampling::{self, Rng};

fn pass(criterion: usize, name: &str) {
    println!("criterion {criterion} ({name}): PASS");
}

/// The named corpus of criterion 1.
fn equivalence_corpus() -> Vec<(String, GraphMap)> {
    vec![
        ("identity I_3".into(), fixtures::identity(&Arc::new(fixtures::path_graph(3)))),
        ("identity C_4(1)".into(), fixtures::identity(&Arc::new(fixtures::cycle_graph(4, rat_int(1))))),
        ("W_2".into(), fixtures::winding(2, 3)),
        ("W_3".into(), fixtures::winding(3, 3)),
        ("TENT".into(), fixtures::tent()),
        ("SPEED2".into(), fixtures::speed2()),
    ]
}

/// Everything named by the fixture ledger, including the counterexamples.
fn full_corpus() -> Vec<(String, GraphMap)> {
    let mut corpus = equivalence_corpus();
    corpus.push(("FOLD".into(), fixtures::fold()));
    corpus.push(("CONST".into(), fixtures::const_map()));
    corpus
}

fn random_cover_within_spec(rng: &mut Rng) -> GraphMap {
    loop {
        let f = sampling::random_branched_cover(rng, 8);
        if f.source().vertex_count() <= 8 {
            return f;
        }
    }
}

/// Variant whose image walks cross subdivision vertices, so the interior
/// breakpoint machinery is exercised by the randomized suites too.
fn random_subdivided_cover_within_spec(rng: &mut Rng) -> GraphMap {
    loop {
        let f = sampling::random_branched_cover_subdivided(rng, 8);
        if f.source().vertex_count() <= 8 {
            return f;
        }
    }
}

const L_GRID: [(i64, i64); 5] = [(1, 1), (9, 8), (3, 2), (2, 1), (3, 1)];

fn l_grid() -> Vec<Rat> {
    L_GRID.iter().map(|(p, q)| rat(*p, *q)).collect()
}

#[test]
fn criterion_01_equivalence_of_minimal_constants() {
    let four = [
        PropertyKind::Bld,
        PropertyKind::Lq,
        PropertyKind::Radial,
        PropertyKind::Coradial,
    ];
    let mut maps = equivalence_corpus();
    let mut rng = Rng::new(0x1001);
    for i in 0..50 {
        maps.push((format!("random cover #{i}"), random_cover_within_spec(&mut rng)));
    }
    // extra presentations with interior walk breakpoints, beyond the 50
    for i in 0..10 {
        maps.push((
            format!("random subdivided cover #{i}"),
            random_subdivided_cover_within_spec(&mut rng),
        ));
    }
    for (idx, (name, f)) in maps.iter().enumerate() {
        assert!(f.is_branched_cover(), "{name} must be a branched cover");
        let constants: Vec<Rat> = four
            .iter()
            .map(|p| checkers::min_constant(f, *p).unwrap_or_else(|e| panic!("{name}: {e}")))
            .collect();
        for (p, c) in four.iter().zip(&constants) {
            assert_eq!(
                c, &constants[0],
                "{name}: {} constant {} differs from bld {}",
                p.as_str(),
                fmt_rat(c),
                fmt_rat(&constants[0])
            );
        }
        // the minimum is really admissible, and really minimal: every
        // check passes at c and (sampled) fails strictly below
        let c = constants[0].clone();
        for p in four {
            assert!(
                checkers::check_property(f, p, &c).unwrap().verdict,
                "{name}: {} fails at its own minimal constant",
                p.as_str()
            );
        }
        if c > rat_one() && idx % 5 == 0 {
            let below = &rat_one() + (&c - rat_one()) * rat(15, 16);
            for p in four {
                assert!(
                    !checkers::check_property(f, p, &below).unwrap().verdict,
                    "{name}: {} passes strictly below the minimum",
                    p.as_str()
                );
            }
        }
    }
    pass(1, "four equivalent characterizations: minimal constants agree exactly");
}

#[test]
fn criterion_02_hypothesis_sharpness() {
    let fold = fixtures::fold();
    assert!(checkers::check_radial(&fold, &rat_one()).unwrap().verdict);
    assert!(!fold.is_open().0);
    assert!(!checkers::check_bld(&fold, &rat_one()).unwrap().verdict);
    assert!(!checkers::check_bld(&fold, &rat_int(100)).unwrap().verdict);

    let cst = fixtures::const_map();
    assert!(checkers::check_lq(&cst, &rat_one()).unwrap().verdict);
    assert!(!cst.is_discrete().0);
    assert!(!checkers::check_bld(&cst, &rat_one()).unwrap().verdict);
    assert!(!checkers::check_bld(&cst, &rat_int(100)).unwrap().verdict);
    pass(2, "openness and discreteness hypotheses are both sharp");
}

#[test]
fn criterion_03_local_to_global_lq() {
    for (name, f) in full_corpus() {
        for l in l_grid() {
            let local = checkers::check_lq_local(&f, &l).unwrap().verdict;
            if local {
                let global = checkers::check_lq(&f, &l).unwrap().verdict;
                assert!(
                    global,
                    "{name}: local LQ pass at {} must imply a global pass",
                    fmt_rat(&l)
                );
            }
        }
    }
    pass(3, "local LQ pass implies global LQ pass at the same constant");
}

#[test]
fn criterion_04_radial_formulations_agree() {
    for (name, f) in full_corpus() {
        for l in l_grid() {
            let a = checkers::check_radial(&f, &l).unwrap().verdict;
            let b = checkers::check_radial_pointwise(&f, &l).unwrap().verdict;
            assert_eq!(a, b, "{name}: sphere and pointwise radial disagree at L = {}", fmt_rat(&l));
        }
    }
    pass(4, "sphere and pointwise radial conditions coincide on the L grid");
}

#[test]
fn criterion_05_radial_maps_bound_walk_lengths() {
    let mut rng = Rng::new(0x5005);
    for (name, f) in full_corpus() {
        let l = match checkers::min_constant(&f, PropertyKind::Radial) {
            Ok(l) => l,
            Err(_) => continue, // collapsed edges admit no radial constant
        };
        assert!(checkers::check_radial(&f, &l).unwrap().verdict, "{name}");
        for _ in 0..100 {
            let w = sampling::random_walk(&mut rng, f.source(), 6, 8);
            let lw = w.length();
            let img = f.image_walk(&w).unwrap().length();
            assert!(
                img <= &l * &lw && img >= &lw / &l,
                "{name}: walk of length {} maps to length {} outside the {}-bounds",
                fmt_rat(&lw),
                fmt_rat(&img),
                fmt_rat(&l)
            );
        }
    }
    pass(5, "radial maps distort every sampled walk within [1/L, L] exactly");
}

fn full_target_loop(f: &GraphMap) -> Walk {
    let y = f.target();
    let mut w = Walk::empty_at(GraphPoint::Vertex(VertexId(0)));
    for e in y.edge_ids() {
        let len = y.edge(e).len.clone();
        w.push_segment(y, Segment { edge: e, from: rat_zero(), to: len }).unwrap();
    }
    w
}

#[test]
fn criterion_06_total_lifts() {
    let mut rng = Rng::new(0x6006);
    for (name, f) in equivalence_corpus() {
        let l = checkers::min_bld_constant(&f).unwrap();
        for _ in 0..100 {
            let beta = sampling::random_walk(&mut rng, f.target(), 5, 8);
            let lifts = lifting::lifts_from_fiber(&f, &beta)
                .unwrap_or_else(|e| panic!("{name}: lift failed: {e}"));
            assert!(!lifts.is_empty(), "{name}: the fiber over the start is nonempty");
            for lift in &lifts {
                assert!(lift.total);
                assert!(
                    lifting::verify_lift(&f, &lift.lift, &beta),
                    "{name}: image of the lift must replay the base walk"
                );
                assert!(
                    lifting::lift_length_within_bld_bounds(&l, &beta, &lift.lift),
                    "{name}: lift length {} outside the {}-bounds of {}",
                    fmt_rat(&lift.lift.length()),
                    fmt_rat(&l),
                    fmt_rat(&beta.length())
                );
            }
        }
    }
    // a full target loop of W_k lifts to exactly k distinct total lifts
    for k in [2usize, 3] {
        let f = fixtures::winding(k, 3);
        let beta = full_target_loop(&f);
        let fiber = f.fiber(beta.start()).unwrap();
        assert_eq!(fiber.points.len(), k);
        let mut all = Vec::new();
        for p in &fiber.points {
            all.extend(lifting::enumerate_total_lifts(&f, &beta, p, 10_000).unwrap());
        }
        assert_eq!(all.len(), k, "W_{k}: expected exactly {k} distinct lifts");
        let ends: std::collections::BTreeSet<_> =
            all.iter().map(|l| l.lift.end().clone()).collect();
        assert_eq!(ends.len(), k);
    }
    pass(6, "random rectifiable walks admit verified total lifts within the BLD bounds");
}

#[test]
fn criterion_07_fiber_transport() {
    let mut rng = Rng::new(0x7007);
    for (name, f, l) in [
        ("W_2", fixtures::winding(2, 3), rat_one()),
        ("W_3", fixtures::winding(3, 3), rat_one()),
        ("TENT", fixtures::tent(), rat_one()),
    ] {
        let branch_images: std::collections::BTreeSet<GraphPoint> = f
            .branch_set()
            .unwrap()
            .iter()
            .map(|p| f.eval(p).unwrap())
            .collect();
        let mut tested = 0;
        while tested < 12 {
            let x = sampling::random_point(&mut rng, f.target(), 8);
            let y = sampling::random_point(&mut rng, f.target(), 8);
            if branch_images.contains(&x) || branch_images.contains(&y) {
                continue;
            }
            tested += 1;
            let t = lifting::fiber_transport(&f, &x, &y, &l)
                .unwrap_or_else(|e| panic!("{name}: transport failed: {e}"));
            let fiber_from = f.fiber(&x).unwrap().points;
            let fiber_to = f.fiber(&y).unwrap().points;
            assert_eq!(t.pairs.len(), fiber_from.len(), "{name}: one pair per fiber point");
            assert_eq!(fiber_from.len(), fiber_to.len(), "{name}: equal cardinality");
            let images: std::collections::BTreeSet<_> =
                t.pairs.iter().map(|(_, b, _)| b.clone()).collect();
            assert_eq!(images.len(), t.pairs.len(), "{name}: injective pairing");
            let d = f.target().distance(&x, &y).unwrap();
            for (a, b, dist) in &t.pairs {
                assert!(fiber_to.contains(b), "{name}: pairing lands in the target fiber");
                assert_eq!(dist, &f.source().distance(a, b).unwrap());
                assert!(*dist <= &l * &d, "{name}: transport distance exceeds L d(x,y)");
            }
        }
    }
    pass(7, "fiber transport is a bijection with exact distance bounds");
}

#[test]
fn criterion_08_convergence_suite() {
    let cert = convergence::winding_demo(10, 4).unwrap();
    assert_eq!(cert.packages.len(), 10);
    for (i, stage) in cert.stages.iter().enumerate() {
        for eps in &stage.eps {
            assert!(
                *eps <= rat(1, (i + 1) as i64),
                "eps_{} = {} exceeds 1/i",
                i + 1,
                fmt_rat(eps)
            );
        }
    }
    for pkg in &cert.packages {
        assert!(checkers::check_bld(&pkg.map, &rat_one()).unwrap().verdict);
    }
    let rep = convergence::check_package_convergence(&cert).unwrap();
    assert!(rep.pass, "winding certificate fails: {:?}", rep.issues);
    assert!(checkers::check_lq(&cert.limit.map, &rat_one()).unwrap().verdict);
    assert!(!cert.limit.map.is_discrete().0);
    let bld = convergence::bld_limit_harness(&cert, &rat_one()).unwrap();
    assert!(!bld.limit_discrete, "the winding limit must fail discreteness");
    assert!(bld.limit_bld.is_none(), "the limit theorem must be reported non-applicable");
    let lq = convergence::lq_limit_harness(&cert, &rat_one()).unwrap();
    assert!(lq.limit_pass, "the LQ limit lemma holds for the winding family");

    // a constant sequence of W_2 packages has a discrete 1-BLD limit
    let w2 = fixtures::winding(2, 3);
    let pkg = MappingPackage::new(
        w2,
        GraphPoint::Vertex(VertexId(0)),
        GraphPoint::Vertex(VertexId(0)),
    )
    .unwrap();
    let cert = convergence::constant_certificate(&pkg, 4, &rat_int(2)).unwrap();
    let rep = convergence::bld_limit_harness(&cert, &rat_one()).unwrap();
    assert!(rep.limit_discrete);
    assert_eq!(rep.limit_bld, Some(true));
    pass(8, "winding degeneration certified; limit hypotheses behave as predicted");
}

#[test]
fn criterion_09_oracle_equivalence() {
    let mut rng = Rng::new(0x9009);
    for (name, f) in full_corpus() {
        let mut o = Oracle::new(&f, 64, 8);
        // criterion 1 verdicts: minimal constants
        match checkers::min_bld_constant(&f) {
            Ok(exact) => {
                assert_eq!(
                    o.min_constant(),
                    Some(exact.clone()),
                    "{name}: oracle minimal constant disagrees"
                );
                // criterion 3 verdicts at the minimal constant
                assert_eq!(
                    o.check_lq(&exact),
                    checkers::check_lq(&f, &exact).unwrap().verdict,
                    "{name}: oracle lq disagrees at the minimal constant"
                );
                assert_eq!(
                    o.check_lq_local(&exact),
                    checkers::check_lq_local(&f, &exact).unwrap().verdict,
                    "{name}: oracle local lq disagrees at the minimal constant"
                );
            }
            Err(_) => {
                // criterion 2 verdicts for the counterexamples
                let l = rat_one();
                assert_eq!(
                    o.check_lq(&l),
                    checkers::check_lq(&f, &l).unwrap().verdict,
                    "{name}: oracle lq disagrees at L = 1"
                );
                assert_eq!(o.is_discrete(), f.is_discrete().0, "{name}: discreteness");
                assert_eq!(o.is_open(), f.is_open().0, "{name}: openness");
            }
        }
        // criterion 4 verdicts over the L grid
        for l in l_grid() {
            let exact_radial = checkers::check_radial(&f, &l).unwrap().verdict;
            assert_eq!(o.check_radial(&l), exact_radial, "{name}: oracle radial at {}", fmt_rat(&l));
            assert_eq!(
                o.check_radial_pointwise(&l),
                checkers::check_radial_pointwise(&f, &l).unwrap().verdict,
                "{name}: oracle pointwise radial at {}",
                fmt_rat(&l)
            );
        }
        // criterion 5 verdicts: partition-sum lengths on grid walks
        for _ in 0..10 {
            let w = sampling::random_grid_walk(&mut rng, f.source(), 5, 64);
            let exact = f.image_walk(&w).unwrap().length();
            assert_eq!(o.image_length(&w), exact, "{name}: oracle image length disagrees");
        }
    }
    pass(9, "grid oracle agrees with every exact verdict on the fixture corpus");
}

#[test]
fn criterion_10_normal_domains() {
    // worked values
    let id = fixtures::identity(&Arc::new(fixtures::cycle_graph(3, rat_int(1))));
    assert_eq!(id.max_normal_radius(&GraphPoint::Vertex(VertexId(0))).unwrap(), rat(3, 2));
    let w2 = fixtures::winding(2, 3);
    assert_eq!(w2.max_normal_radius(&GraphPoint::Vertex(VertexId(0))).unwrap(), rat(3, 2));
    let tent = fixtures::tent();
    assert_eq!(tent.max_normal_radius(&GraphPoint::Vertex(VertexId(1))).unwrap(), rat_int(1));

    // exact decomposition equality on W_2 over the whole space
    let whole = Region::whole(w2.source());
    let y = GraphPoint::Vertex(VertexId(0));
    let dec = w2.vaisala_decomposition(&whole, &y).unwrap();
    assert_eq!(dec.r_max, rat(3, 2));
    let ball = w2.target().ball(&y, &dec.witness, true).unwrap();
    let pre = w2.preimage_region(&ball).unwrap();
    let mut union = Region::empty();
    for (z, u) in dec.fiber_points.iter().zip(&dec.neighbourhoods) {
        assert!(w2.is_normal_neighbourhood(u, z).unwrap());
        for other in &dec.neighbourhoods {
            if other != u {
                assert!(u.intersect(w2.source(), other).is_empty());
            }
        }
        union = union.union(w2.source(), u);
    }
    assert_eq!(union.normalized(w2.source()), pre.normalized(w2.source()));

    // TENT decomposition over an interior target point: two intervals
    let y = tent.target().point_on_edge(bldgraph::graph::EdgeId(0), rat(1, 2)).unwrap();
    let dec = tent.vaisala_decomposition(&Region::whole(tent.source()), &y).unwrap();
    assert_eq!(dec.neighbourhoods.len(), 2);

    // connected preimages on 50 random valid triples
    let mut rng = Rng::new(0xA00A);
    let mut done = 0;
    while done < 50 {
        let f = random_cover_within_spec(&mut rng);
        let x = sampling::random_point(&mut rng, f.source(), 8);
        let r_max = f.max_normal_radius(&x).unwrap();
        if r_max == rat_zero() {
            continue;
        }
        let r = &r_max / rat_int(2);
        let u = f.u_component(&x, &r).unwrap();
        if !f.is_normal_neighbourhood(&u, &x).unwrap() {
            continue;
        }
        let l = checkers::min_bld_constant(&f).unwrap();
        let rho = &r / (rat_int(2) * &l);
        let w = f.target().ball(&f.eval(&x).unwrap(), &rho, true).unwrap();
        let fu = f.image_region(&u).unwrap();
        if !w.is_subset(f.target(), &fu) {
            continue;
        }
        assert!(
            f.connected_preimage_check(&x, &u, &w).unwrap(),
            "U ∩ f^-1(W) must be connected for a normal neighbourhood"
        );
        done += 1;
    }
    pass(10, "normal radii, decompositions and connected preimages verified exactly");
}
