//! Exact rational arithmetic helpers.
//!
//! Every length, offset, radius and constant in this crate is a
//! `BigRational`. Values serialize as `"p/q"` (or a bare integer string
//! when the denominator is 1) so that files round-trip bit-exactly.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

pub type Rat = BigRational;

/// `p/q` as an exact rational. Panics on `q == 0`.
pub fn rat(p: i64, q: i64) -> Rat {
    Rat::new(BigInt::from(p), BigInt::from(q))
}

pub fn rat_int(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat_zero() -> Rat {
    Rat::zero()
}

pub fn rat_one() -> Rat {
    Rat::one()
}

/// Parse `"p/q"` or `"n"`.
pub fn parse_rat(s: &str) -> Option<Rat> {
    let s = s.trim();
    if let Some((num, den)) = s.split_once('/') {
        let n: BigInt = num.trim().parse().ok()?;
        let d: BigInt = den.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        Some(Rat::new(n, d))
    } else {
        let n: BigInt = s.parse().ok()?;
        Some(Rat::from_integer(n))
    }
}

/// Render in the `"p/q"` form used by all file formats.
pub fn fmt_rat(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_abs(r: &Rat) -> Rat {
    r.abs()
}

pub fn rat_min(a: Rat, b: Rat) -> Rat {
    if a <= b {
        a
    } else {
        b
    }
}

pub fn rat_max(a: Rat, b: Rat) -> Rat {
    if a >= b {
        a
    } else {
        b
    }
}

pub fn rat_mid(a: &Rat, b: &Rat) -> Rat {
    (a + b) / rat_int(2)
}

/// `sup`/`inf` values over possibly empty candidate sets. `Infinite`
/// stands for the vacuous infimum (+inf) over an empty boundary set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExtRat {
    Finite(Rat),
    Infinite,
}

impl ExtRat {
    pub fn as_finite(&self) -> Option<&Rat> {
        match self {
            ExtRat::Finite(r) => Some(r),
            ExtRat::Infinite => None,
        }
    }

    /// `self >= bound`, with +inf above everything.
    pub fn at_least(&self, bound: &Rat) -> bool {
        match self {
            ExtRat::Finite(r) => r >= bound,
            ExtRat::Infinite => true,
        }
    }
}

impl std::fmt::Display for ExtRat {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtRat::Finite(r) => write!(f, "{}", fmt_rat(r)),
            ExtRat::Infinite => write!(f, "inf"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format_round_trip() {
        for s in ["0", "3", "-7", "1/2", "-3/4", "22/7"] {
            let r = parse_rat(s).unwrap();
            assert_eq!(fmt_rat(&r), s);
        }
    }

    #[test]
    fn parse_normalizes() {
        assert_eq!(fmt_rat(&parse_rat("2/4").unwrap()), "1/2");
        assert_eq!(fmt_rat(&parse_rat("4/2").unwrap()), "2");
        assert_eq!(fmt_rat(&parse_rat("3/-6").unwrap()), "-1/2");
    }

    #[test]
    fn parse_rejects_garbage() {
        assert!(parse_rat("1/0").is_none());
        assert!(parse_rat("a/b").is_none());
        assert!(parse_rat("").is_none());
    }
}
