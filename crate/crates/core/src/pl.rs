//! Piecewise-linear functions on a closed interval, with exact rational
//! breakpoints. Used for per-edge distance profiles: every distance,
//! radius and offset in a metric graph is piecewise affine, so sub-level
//! sets and level sets are computed exactly from the breakpoint list.

use crate::rational::{rat_mid, Rat};

/// A PL function on `[pts[0].0, pts.last().0]` given by its values at an
/// increasing list of breakpoints with affine interpolation in between.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlFn {
    pts: Vec<(Rat, Rat)>,
}

/// A 1-D interval with open/closed ends. `lo == hi` requires both ends
/// closed (a single point).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub lo: Rat,
    pub hi: Rat,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Span {
    pub fn point(at: Rat) -> Self {
        Span { lo: at.clone(), hi: at, lo_closed: true, hi_closed: true }
    }

    pub fn is_point(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains(&self, t: &Rat) -> bool {
        (if self.lo_closed { *t >= self.lo } else { *t > self.lo })
            && (if self.hi_closed { *t <= self.hi } else { *t < self.hi })
    }
}

impl PlFn {
    /// Build from raw breakpoints; positions must be strictly increasing
    /// and cover the intended domain.
    pub fn from_breakpoints(pts: Vec<(Rat, Rat)>) -> Self {
        debug_assert!(pts.len() >= 2 || (pts.len() == 1));
        debug_assert!(pts.windows(2).all(|w| w[0].0 < w[1].0));
        PlFn { pts }
    }

    /// Pointwise minimum of affine candidate functions `t -> a + b*t`
    /// over `[lo, hi]`. The candidate list must be nonempty.
    pub fn min_of_affine(lo: Rat, hi: Rat, cands: &[(Rat, Rat)]) -> Self {
        assert!(!cands.is_empty());
        assert!(lo <= hi);
        let eval_min = |t: &Rat| -> Rat {
            cands
                .iter()
                .map(|(a, b)| a + b * t)
                .min()
                .expect("nonempty candidates")
        };
        if lo == hi {
            return PlFn { pts: vec![(lo.clone(), eval_min(&lo))] };
        }
        // Candidate breakpoints: interval ends plus all pairwise crossings.
        let mut xs: Vec<Rat> = vec![lo.clone(), hi.clone()];
        for i in 0..cands.len() {
            for j in (i + 1)..cands.len() {
                let (a1, b1) = &cands[i];
                let (a2, b2) = &cands[j];
                if b1 != b2 {
                    let x = (a2 - a1) / (b1 - b2);
                    if x > lo && x < hi {
                        xs.push(x);
                    }
                }
            }
        }
        xs.sort();
        xs.dedup();
        let pts = xs.into_iter().map(|x| (x.clone(), eval_min(&x))).collect();
        PlFn { pts }
    }

    pub fn domain(&self) -> (&Rat, &Rat) {
        (&self.pts[0].0, &self.pts[self.pts.len() - 1].0)
    }

    pub fn breakpoints(&self) -> &[(Rat, Rat)] {
        &self.pts
    }

    pub fn eval(&self, t: &Rat) -> Rat {
        let n = self.pts.len();
        assert!(t >= &self.pts[0].0 && t <= &self.pts[n - 1].0, "PlFn eval out of domain");
        if n == 1 {
            return self.pts[0].1.clone();
        }
        for w in self.pts.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if t <= x1 {
                if x0 == x1 {
                    return y0.clone();
                }
                return y0 + (y1 - y0) * (t - x0) / (x1 - x0);
            }
        }
        self.pts[n - 1].1.clone()
    }

    pub fn max_value(&self) -> Rat {
        self.pts.iter().map(|(_, y)| y.clone()).max().expect("nonempty")
    }

    pub fn min_value(&self) -> Rat {
        self.pts.iter().map(|(_, y)| y.clone()).min().expect("nonempty")
    }

    /// All values taken at breakpoints (the radii where sub-level sets
    /// change combinatorics).
    pub fn breakpoint_values(&self) -> Vec<Rat> {
        let mut v: Vec<Rat> = self.pts.iter().map(|(_, y)| y.clone()).collect();
        v.sort();
        v.dedup();
        v
    }

    /// The sub-level set `{t : f(t) <= r}` (or `< r` when `strict`) as
    /// disjoint sorted spans.
    ///
    /// Works on the atom pattern: between consecutive critical positions
    /// (breakpoints and exact crossings with level `r`) membership is
    /// constant, so it is decided at a midpoint; at the positions
    /// themselves it is decided by direct evaluation.
    pub fn sublevel(&self, r: &Rat, strict: bool) -> Vec<Span> {
        let inside = |y: &Rat| if strict { y < r } else { y <= r };
        let n = self.pts.len();
        if n == 1 {
            return if inside(&self.pts[0].1) {
                vec![Span::point(self.pts[0].0.clone())]
            } else {
                vec![]
            };
        }
        let mut coords: Vec<Rat> = self.pts.iter().map(|(x, _)| x.clone()).collect();
        for w in self.pts.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if (y0 < r && y1 > r) || (y0 > r && y1 < r) {
                let xc = x0 + (x1 - x0) * (r - y0) / (y1 - y0);
                if xc > *x0 && xc < *x1 {
                    coords.push(xc);
                }
            }
        }
        coords.sort();
        coords.dedup();
        let mut spans: Vec<Span> = Vec::new();
        let mut cur: Option<Span> = None;
        fn flush(cur: &mut Option<Span>, spans: &mut Vec<Span>) {
            if let Some(s) = cur.take() {
                spans.push(s);
            }
        }
        for i in 0..coords.len() {
            let c = &coords[i];
            if inside(&self.eval(c)) {
                match &mut cur {
                    Some(s) => {
                        s.hi = c.clone();
                        s.hi_closed = true;
                    }
                    None => cur = Some(Span::point(c.clone())),
                }
            } else {
                flush(&mut cur, &mut spans);
            }
            if i + 1 < coords.len() {
                let c2 = &coords[i + 1];
                let mid = rat_mid(c, c2);
                if inside(&self.eval(&mid)) {
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
                    flush(&mut cur, &mut spans);
                }
            }
        }
        flush(&mut cur, &mut spans);
        spans
    }

    /// Exact solution set of `f(t) = r`, assuming no piece is constantly
    /// equal to `r` (true for distance profiles: slopes are never 0 at
    /// level `r > 0`). Returns sorted distinct positions.
    pub fn level_set(&self, r: &Rat) -> Vec<Rat> {
        let mut out: Vec<Rat> = Vec::new();
        let n = self.pts.len();
        if n == 1 {
            if &self.pts[0].1 == r {
                out.push(self.pts[0].0.clone());
            }
            return out;
        }
        for w in self.pts.windows(2) {
            let (x0, y0) = &w[0];
            let (x1, y1) = &w[1];
            if y0 == r {
                out.push(x0.clone());
            }
            if (y0 < r && y1 > r) || (y0 > r && y1 < r) {
                let xc = x0 + (x1 - x0) * (r - y0) / (y1 - y0);
                out.push(xc);
            }
            debug_assert!(
                !(y0 == y1 && y0 == r && x0 != x1),
                "level_set hit a flat piece at the query level"
            );
        }
        if &self.pts[n - 1].1 == r {
            out.push(self.pts[n - 1].0.clone());
        }
        out.sort();
        out.dedup();
        out
    }

    /// Largest prefix `[dom.0, t)` on which `f < r` fails... helper for
    /// first-crossing queries: smallest t with f(t) == r, if any.
    pub fn first_hit(&self, r: &Rat) -> Option<Rat> {
        self.level_set(r).into_iter().next()
    }

    /// Pointwise minimum of two PL functions on the same domain.
    pub fn pointwise_min(&self, other: &PlFn) -> PlFn {
        debug_assert_eq!(self.domain(), other.domain());
        let mut xs: Vec<Rat> = self
            .pts
            .iter()
            .map(|(x, _)| x.clone())
            .chain(other.pts.iter().map(|(x, _)| x.clone()))
            .collect();
        xs.sort();
        xs.dedup();
        // add crossings inside each merged interval where both are affine
        let mut crossings = Vec::new();
        for w in xs.windows(2) {
            let (x0, x1) = (&w[0], &w[1]);
            let (a0, a1) = (self.eval(x0), self.eval(x1));
            let (b0, b1) = (other.eval(x0), other.eval(x1));
            let d0 = &a0 - &b0;
            let d1 = &a1 - &b1;
            if (d0 > Rat::from_integer(0.into()) && d1 < Rat::from_integer(0.into()))
                || (d0 < Rat::from_integer(0.into()) && d1 > Rat::from_integer(0.into()))
            {
                let xc = x0 + (x1 - x0) * &d0 / (&d0 - &d1);
                crossings.push(xc);
            }
        }
        xs.extend(crossings);
        xs.sort();
        xs.dedup();
        let pts = xs
            .into_iter()
            .map(|x| {
                let v = self.eval(&x).min(other.eval(&x));
                (x, v)
            })
            .collect();
        PlFn { pts }
    }

    /// Midpoints of consecutive breakpoints plus the breakpoints; a
    /// witness schedule that meets every affine regime of the function.
    pub fn probe_positions(&self) -> Vec<Rat> {
        let mut out = Vec::new();
        for w in self.pts.windows(2) {
            out.push(w[0].0.clone());
            out.push(rat_mid(&w[0].0, &w[1].0));
        }
        out.push(self.pts[self.pts.len() - 1].0.clone());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, rat_int};

    fn tent() -> PlFn {
        // distance-like profile on [0,2]: rises 0..1, falls 1..2
        PlFn::from_breakpoints(vec![
            (rat_int(0), rat_int(0)),
            (rat_int(1), rat_int(1)),
            (rat_int(2), rat_int(0)),
        ])
    }

    #[test]
    fn eval_interpolates() {
        let f = tent();
        assert_eq!(f.eval(&rat(1, 2)), rat(1, 2));
        assert_eq!(f.eval(&rat(3, 2)), rat(1, 2));
        assert_eq!(f.eval(&rat_int(1)), rat_int(1));
    }

    #[test]
    fn sublevel_closed_and_strict() {
        let f = tent();
        let s = f.sublevel(&rat(1, 2), false);
        assert_eq!(s.len(), 2);
        assert_eq!(s[0], Span { lo: rat_int(0), hi: rat(1, 2), lo_closed: true, hi_closed: true });
        assert_eq!(s[1], Span { lo: rat(3, 2), hi: rat_int(2), lo_closed: true, hi_closed: true });
        let s = f.sublevel(&rat(1, 2), true);
        assert_eq!(s.len(), 2);
        assert!(!s[0].hi_closed && s[0].hi == rat(1, 2));
        assert!(!s[1].lo_closed && s[1].lo == rat(3, 2));
    }

    #[test]
    fn sublevel_covers_all_when_large() {
        let f = tent();
        let s = f.sublevel(&rat_int(5), false);
        assert_eq!(s.len(), 1);
        assert_eq!(s[0], Span { lo: rat_int(0), hi: rat_int(2), lo_closed: true, hi_closed: true });
    }

    #[test]
    fn level_set_exact() {
        let f = tent();
        assert_eq!(f.level_set(&rat(1, 2)), vec![rat(1, 2), rat(3, 2)]);
        assert_eq!(f.level_set(&rat_int(1)), vec![rat_int(1)]);
        assert!(f.level_set(&rat_int(2)).is_empty());
    }

    #[test]
    fn min_of_affine_matches_pointwise() {
        // min(t, 2 - t, 1/2 + 0*t) on [0,2]
        let f = PlFn::min_of_affine(
            rat_int(0),
            rat_int(2),
            &[(rat_int(0), rat_int(1)), (rat_int(2), rat_int(-1)), (rat(1, 2), rat_int(0))],
        );
        for t in [rat_int(0), rat(1, 4), rat(1, 2), rat_int(1), rat(7, 4), rat_int(2)] {
            let expect = [t.clone(), rat_int(2) - &t, rat(1, 2)].into_iter().min().unwrap();
            assert_eq!(f.eval(&t), expect, "at t={t}");
        }
    }
}
