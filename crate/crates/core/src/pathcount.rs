//! Counting minimum-weight failures by the turn structure of minimal paths.
//!
//! Exact counts use arbitrary-precision integers. A minimal horizontal
//! logical on the rotated lattice is a cyclic staircase of `d/2` x-steps and
//! `d/2` y-steps. A right turn is a cyclic `y -> x` switch.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{CodeGeometry, Orientation};

/// Binomial coefficient, zero outside `0 <= k <= n`.
pub fn binomial(n: i64, k: i64) -> BigUint {
    if n < 0 || k < 0 || k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k) as u64;
    let n = n as u64;
    let mut acc = BigUint::one();
    for i in 0..k {
        acc *= n - i;
        acc /= i + 1;
    }
    acc
}

/// Natural log of a big integer (`-inf` for zero).
pub fn ln_big(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits < 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 900;
    let top = (x >> shift).to_f64().unwrap();
    top.ln() + shift as f64 * std::f64::consts::LN_2
}

fn check_even(d: usize, min: usize) -> Result<()> {
    if d < min || d % 2 == 1 {
        return Err(Error::InvalidDistance(d));
    }
    Ok(())
}

/// `½ · 2d · C(d, d/2)`: weight-d/2 failures of the square lattice.
pub fn square_min_weight(d: usize) -> Result<BigUint> {
    check_even(d, 2)?;
    Ok(binomial(d as i64, d as i64 / 2) * d)
}

/// Failing weight-d/2 placements on a length-d path with `t` right turns.
pub fn turn_configurations(t: usize, d: usize) -> BigUint {
    let (t, d) = (t as i64, d as i64);
    let mut total = BigUint::zero();
    for w in 0..=t.min(d / 4) {
        total += (BigUint::one() << (t - w) as usize) * binomial(t, w) * binomial(d - 2 * t, d / 2 - t - w);
    }
    total
}

/// Number of cyclic staircase words with `d/2` of each step and `t` right turns.
pub fn turn_multiplicity(t: usize, d: usize) -> BigInt {
    let (t, h) = (t as i64, d as i64 / 2);
    let sq = |x: BigUint| BigInt::from(&x * &x);
    sq(binomial(h, t)) - sq(binomial(h - 1, t)) + sq(binomial(h - 1, t - 1))
}

/// Upper bound on weight-d/2 failures of the rotated lattice.
pub fn rotated_upper_bound(d: usize) -> Result<BigUint> {
    check_even(d, 4)?;
    let mut total = BigInt::zero();
    for t in 0..=d / 2 {
        total += turn_multiplicity(t, d) * BigInt::from(turn_configurations(t, d));
    }
    total *= d;
    total += BigInt::from(binomial(d as i64, d as i64 / 2) * d);
    total -= BigInt::from(2 * d * d);
    Ok(total.to_biguint().expect("bound is positive"))
}

/// `M_ab = Σ_{T <= d/4} C(d/2 - b, T - a)² 2^T C(d - 2T, d/2 - T)`.
pub fn pair_sum(a: i64, b: i64, d: usize) -> BigUint {
    let d = d as i64;
    let mut total = BigUint::zero();
    for t in 0..=d / 4 {
        let c = binomial(d / 2 - b, t - a);
        total += &c * &c * (BigUint::one() << t as usize) * binomial(d - 2 * t, d / 2 - t);
    }
    total
}

/// Lower bound on weight-d/2 failures of the rotated lattice from paired errors.
pub fn rotated_lower_bound(d: usize) -> Result<BigUint> {
    check_even(d, 4)?;
    let total = BigInt::from(pair_sum(0, 0, d)) - BigInt::from(pair_sum(1, 0, d)) + BigInt::from(pair_sum(1, 1, d));
    Ok(total.to_biguint().expect("lower bound is nonnegative"))
}

/// Gaussian-integral asymptotic of the leading pair sum, as a natural log:
/// `4πd²/(27√3) · (27/2)^{d/2}`.
pub fn ln_upper_asymptotic(d: usize) -> f64 {
    let d = d as f64;
    (4.0 * std::f64::consts::PI * d * d / (27.0 * 3f64.sqrt())).ln() + 0.5 * d * 13.5f64.ln()
}

/// `(lower, upper)` growth constants `γ₀` with `N_fail(d/2) ~ γ₀^{√n}`.
pub fn gamma_asymptotics(orientation: Orientation) -> (f64, f64) {
    match orientation {
        Orientation::Square => {
            let g = 2f64.powf(std::f64::consts::FRAC_1_SQRT_2);
            (g, g)
        }
        Orientation::Rotated => (2.0 + 2f64.sqrt(), 13.5f64.sqrt()),
    }
}

/// Per-`√n` ratio of rotated to square low-p failure rates at equal `n`.
/// Values below one favour the rotated layout.
pub fn low_p_ratio(p: f64) -> f64 {
    let (_, g_rot) = gamma_asymptotics(Orientation::Rotated);
    let (g_sq, _) = gamma_asymptotics(Orientation::Square);
    // (d_rot - d_sq) / √n = 1 - 1/√2
    (g_rot / g_sq) * p.powf(0.5 * (1.0 - std::f64::consts::FRAC_1_SQRT_2))
}

fn as_decimal<S: serde::Serializer>(x: &BigUint, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

/// Leading low-p behaviour `N_fail(d/2) · p^{d/2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LowPEstimate {
    pub orientation: Orientation,
    pub n: usize,
    pub d: usize,
    #[serde(serialize_with = "as_decimal")]
    pub coefficient: BigUint,
    pub exponent: usize,
}

impl LowPEstimate {
    pub fn for_geometry(geom: &CodeGeometry) -> Result<Self> {
        let d = geom.d();
        let coefficient = match geom.orientation() {
            Orientation::Square => square_min_weight(d)?,
            Orientation::Rotated => rotated_upper_bound(d)?,
        };
        Ok(LowPEstimate { orientation: geom.orientation(), n: geom.n(), d, coefficient, exponent: d / 2 })
    }

    pub fn eval(&self, p: f64) -> f64 {
        (ln_big(&self.coefficient) + self.exponent as f64 * p.ln()).exp()
    }
}

pub fn low_p_failure(geom: &CodeGeometry, p: f64) -> Result<f64> {
    Ok(LowPEstimate::for_geometry(geom)?.eval(p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(x: u64) -> BigUint {
        BigUint::from(x)
    }

    /// Cyclic words over {x, y} with h of each letter.
    fn words(h: usize) -> Vec<Vec<bool>> {
        let d = 2 * h;
        (0u32..1 << d)
            .filter(|m| m.count_ones() as usize == h)
            .map(|m| (0..d).map(|i| m >> i & 1 == 1).collect())
            .collect()
    }

    /// Vertices where a y-step (true) is followed by an x-step (false), cyclically.
    fn right_turns(word: &[bool]) -> Vec<usize> {
        let d = word.len();
        (0..d).filter(|&i| word[(i + d - 1) % d] && !word[i]).collect()
    }

    #[test]
    fn binomials_vanish_out_of_range() {
        assert_eq!(binomial(5, 2), big(10));
        assert_eq!(binomial(5, -1), big(0));
        assert_eq!(binomial(5, 6), big(0));
        assert_eq!(binomial(-1, 0), big(0));
        assert_eq!(binomial(0, 0), big(1));
    }

    #[test]
    fn square_counts() {
        assert_eq!(square_min_weight(4).unwrap(), big(24));
        assert_eq!(square_min_weight(6).unwrap(), big(120));
        assert_eq!(square_min_weight(8).unwrap(), big(560));
        assert!(square_min_weight(5).is_err());
    }

    #[test]
    fn turn_configurations_small() {
        assert_eq!(turn_configurations(0, 4), big(6));
        assert_eq!(turn_configurations(1, 4), big(5));
        assert_eq!(turn_configurations(2, 4), big(4));
        for d in [4, 6, 8, 10] {
            assert_eq!(turn_configurations(0, d), binomial(d as i64, d as i64 / 2));
        }
    }

    /// Placements of d/2 errors on the path such that every right-turn vertex
    /// touches at least one error: the corner cannot be cut by a correction
    /// that avoids right turns.
    #[test]
    fn turn_configurations_match_placement_oracle() {
        for h in 2..=6 {
            let d = 2 * h;
            for word in words(h) {
                let turns = right_turns(&word);
                let t = turns.len();
                let mut count = 0u64;
                for m in 0u32..1 << d {
                    if m.count_ones() as usize != h {
                        continue;
                    }
                    // vertex i sits between edge i-1 and edge i
                    let hit = |i: usize| m >> i & 1 == 1 || m >> ((i + d - 1) % d) & 1 == 1;
                    if turns.iter().all(|&i| hit(i)) {
                        count += 1;
                    }
                }
                assert_eq!(big(count), turn_configurations(t, d), "d={d} word={word:?}");
            }
        }
    }

    #[test]
    fn turn_multiplicities_match_word_enumeration() {
        for h in 1..=4 {
            let d = 2 * h;
            let mut hist = vec![0i64; h + 1];
            for word in words(h) {
                hist[right_turns(&word).len()] += 1;
            }
            for (t, &c) in hist.iter().enumerate() {
                assert_eq!(turn_multiplicity(t, d), BigInt::from(c), "d={d} t={t}");
            }
            assert_eq!(hist.iter().sum::<i64>(), binomial(d as i64, h as i64).to_i64().unwrap());
        }
    }

    #[test]
    fn rotated_bounds_values() {
        let expect_upper = [(4, 104u64), (6, 1584), (8, 21392), (10, 287360)];
        for (d, v) in expect_upper {
            assert_eq!(rotated_upper_bound(d).unwrap(), big(v), "d={d}");
        }
        let expect_lower = [(4, 22u64), (6, 128), (8, 1406)];
        for (d, v) in expect_lower {
            assert_eq!(rotated_lower_bound(d).unwrap(), big(v), "d={d}");
        }
        for d in (4..=60).step_by(2) {
            assert!(rotated_lower_bound(d).unwrap() <= rotated_upper_bound(d).unwrap(), "d={d}");
        }
    }

    #[test]
    fn growth_rates() {
        let d = 40;
        let up = ln_big(&rotated_upper_bound(d).unwrap()) / d as f64;
        let low = ln_big(&rotated_lower_bound(d).unwrap()) / d as f64;
        let target_up = 0.5 * 13.5f64.ln();
        let target_low = (2.0 + 2f64.sqrt()).ln();
        assert!((up / target_up - 1.0).abs() < 0.1, "{up} vs {target_up}");
        assert!((low / target_low - 1.0).abs() < 0.1, "{low} vs {target_low}");
        // the Gaussian-integral asymptotic grows at the same rate
        let a = ln_upper_asymptotic(200) / 200.0;
        assert!((a - target_up).abs() < 0.05);
    }

    #[test]
    fn no_overflow_at_large_distance() {
        let v = rotated_upper_bound(100).unwrap();
        assert!(v.bits() > 64);
        assert!(ln_big(&v).is_finite());
    }

    #[test]
    fn gammas() {
        let (a, b) = gamma_asymptotics(Orientation::Square);
        assert!((a - 1.6325).abs() < 1e-4 && a == b);
        let (lo, hi) = gamma_asymptotics(Orientation::Rotated);
        assert!((lo - 3.4142).abs() < 1e-4);
        assert!((hi - 3.6742).abs() < 1e-4);
        assert!(low_p_ratio(1e-3) < 1.0);
    }

    #[test]
    fn low_p_square_d4() {
        let g = CodeGeometry::new(Orientation::Square, 4).unwrap();
        let v = low_p_failure(&g, 1e-3).unwrap();
        assert!((v - 24e-6).abs() < 1e-15);
    }
}
