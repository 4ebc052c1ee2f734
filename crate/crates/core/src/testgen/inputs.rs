use rand::Rng;

use crate::lgp::protected_div;

use super::TestGenError;

/// Attempts per target quotient before giving up.
const MAX_TRIES: usize = 100_000;

/// Why a pair was drawn. Probabilities are out of 16.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InputCategory {
    /// y == 0 (8/16)
    ZeroDivisor,
    /// quotient 0 with a nonzero divisor (1/16)
    QuotientZero,
    /// quotient 1 (1/16)
    QuotientOne,
    /// quotient 255; only (255, 1) qualifies (1/16)
    QuotientMax,
    /// quotient uniform in 1..=255 (1/16)
    QuotientAny(u8),
    /// quotient uniform in 2..=127 (4/16)
    QuotientMid(u8),
}

impl InputCategory {
    pub fn target(self) -> u8 {
        match self {
            InputCategory::ZeroDivisor | InputCategory::QuotientZero => 0,
            InputCategory::QuotientOne => 1,
            InputCategory::QuotientMax => 255,
            InputCategory::QuotientAny(q) | InputCategory::QuotientMid(q) => q,
        }
    }

    /// Category with its sampled quotient erased, for counting.
    pub fn kind(self) -> InputCategory {
        match self {
            InputCategory::QuotientAny(_) => InputCategory::QuotientAny(0),
            InputCategory::QuotientMid(_) => InputCategory::QuotientMid(0),
            other => other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DivisionInput {
    pub x: u8,
    pub y: u8,
    pub category: InputCategory,
}

fn draw_category<R: Rng>(rng: &mut R) -> InputCategory {
    match rng.gen_range(0..16u8) {
        0..=7 => InputCategory::ZeroDivisor,
        8 => InputCategory::QuotientZero,
        9 => InputCategory::QuotientOne,
        10 => InputCategory::QuotientMax,
        11 => InputCategory::QuotientAny(rng.gen_range(1..=255)),
        _ => InputCategory::QuotientMid(rng.gen_range(2..=127)),
    }
}

/// Draws a nonzero divisor, then a dividend from the range giving quotient
/// `q`; divisors with an empty range are rejected and redrawn.
fn pair_for_quotient<R: Rng>(rng: &mut R, q: u8) -> Result<(u8, u8), TestGenError> {
    for _ in 0..MAX_TRIES {
        let y = rng.gen_range(1..=255u32);
        let lo = q as u32 * y;
        if lo > 255 {
            continue;
        }
        let hi = (lo + y - 1).min(255);
        let x = rng.gen_range(lo..=hi) as u8;
        debug_assert_eq!(protected_div(x, y as u8), q);
        return Ok((x, y as u8));
    }
    Err(TestGenError::TargetUnreachable { target: q, tries: MAX_TRIES })
}

/// `n` input pairs for a program's leading division: half force division
/// by zero, an eighth of the rest each target quotients 0, 1, 255 and a
/// random 1..=255, and the remaining half of the rest a quotient in 2..=127.
pub fn gen_division_inputs<R: Rng>(rng: &mut R, n: usize) -> Result<Vec<DivisionInput>, TestGenError> {
    if n < 8 {
        return Err(TestGenError::TooFewCases(n));
    }
    (0..n)
        .map(|_| {
            let category = draw_category(rng);
            let (x, y) = match category {
                InputCategory::ZeroDivisor => (rng.gen(), 0),
                other => pair_for_quotient(rng, other.target())?,
            };
            Ok(DivisionInput { x, y, category })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testgen::rng_from_seed;

    #[test]
    fn only_255_over_1_gives_255() {
        let hits: Vec<(u8, u8)> = (0..=255u8)
            .flat_map(|x| (0..=255u8).map(move |y| (x, y)))
            .filter(|&(x, y)| protected_div(x, y) == 255)
            .collect();
        assert_eq!(hits, vec![(255, 1)]);
        let mut rng = rng_from_seed(3);
        assert_eq!(pair_for_quotient(&mut rng, 255).unwrap(), (255, 1));
    }

    #[test]
    fn every_pair_meets_its_target() {
        let mut rng = rng_from_seed(11);
        for d in gen_division_inputs(&mut rng, 20_000).unwrap() {
            assert_eq!(protected_div(d.x, d.y), d.category.target());
            match d.category {
                InputCategory::ZeroDivisor => assert_eq!(d.y, 0),
                InputCategory::QuotientMid(q) => assert!((2..=127).contains(&q)),
                InputCategory::QuotientAny(q) => assert!(q >= 1),
                _ => assert_ne!(d.y, 0),
            }
        }
    }

    #[test]
    fn too_few_cases() {
        let mut rng = rng_from_seed(0);
        assert_eq!(gen_division_inputs(&mut rng, 7), Err(TestGenError::TooFewCases(7)));
    }
}
