//! Surjection counts and the probability that two states with randomly
//! grouped actions end up matching under the full-action state rule.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, RngCore};

use crate::oracle::OracleError;

pub const MAX_SURJECTION_N: u32 = 20;
pub const MAX_ACTIONS_TOTAL: u32 = 30;
pub const MAX_POOL: u32 = 20;

fn binomial(n: u32, k: u32) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Number of surjections from an `n`-set onto a `k`-set, by
/// inclusion-exclusion.
pub fn surjection_count(n: u32, k: u32) -> Result<BigInt, OracleError> {
    if n > MAX_SURJECTION_N {
        return Err(OracleError::RangeExceeded(format!("n = {n} > {MAX_SURJECTION_N}")));
    }
    if k > n {
        return Ok(BigInt::zero());
    }
    let mut total = BigInt::zero();
    for j in 0..=k {
        let term = binomial(k, j) * BigInt::from(k - j).pow(n);
        if j % 2 == 0 {
            total += term;
        } else {
            total -= term;
        }
    }
    Ok(total)
}

fn check_pabs(n: u32, l: u32, m: u32) -> Result<(), OracleError> {
    if n == 0 || l == 0 || m == 0 {
        return Err(OracleError::RangeExceeded("n, l and m must be positive".into()));
    }
    if n + l > MAX_ACTIONS_TOTAL || m > MAX_POOL {
        return Err(OracleError::RangeExceeded(format!(
            "need n + l <= {MAX_ACTIONS_TOTAL} and m <= {MAX_POOL}, got ({n}, {l}, {m})"
        )));
    }
    Ok(())
}

/// Exact probability as a rational.
pub fn p_abs_exact(n: u32, l: u32, m: u32) -> Result<BigRational, OracleError> {
    check_pabs(n, l, m)?;
    let c = n.min(l).min(m);
    let mut num = BigInt::zero();
    for k in 1..=c {
        num += binomial(m, k) * surjection_count(n, k)? * surjection_count(l, k)?;
    }
    Ok(BigRational::new(num, BigInt::from(m).pow(n + l)))
}

/// `(2c / m)^(n + l)` with `c = min(n, l, m)`, exactly.
pub fn p_abs_bound_exact(n: u32, l: u32, m: u32) -> Result<BigRational, OracleError> {
    check_pabs(n, l, m)?;
    let c = n.min(l).min(m);
    Ok(BigRational::new(BigInt::from(2 * c).pow(n + l), BigInt::from(m).pow(n + l)))
}

/// Exact probability and its upper bound, as floats.
pub fn p_abs_closed_form(n: u32, l: u32, m: u32) -> Result<(f64, f64), OracleError> {
    let p = p_abs_exact(n, l, m)?;
    let b = p_abs_bound_exact(n, l, m)?;
    Ok((p.to_f64().unwrap_or(f64::NAN), b.to_f64().unwrap_or(f64::INFINITY)))
}

/// Counts, over all `m^(n+l)` assignments, those where both action sets hit
/// the same set of groups. `None` when there are more than `limit`
/// assignments.
pub fn p_abs_enumerate(n: u32, l: u32, m: u32, limit: u64) -> Result<Option<BigRational>, OracleError> {
    check_pabs(n, l, m)?;
    let total = (m as u64).checked_pow(n + l);
    let Some(total) = total.filter(|&t| t <= limit) else {
        return Ok(None);
    };
    // Number of maps from an `k`-set into the pool hitting exactly each
    // subset mask, then matches are the squared-overlap sum.
    let hits = |k: u32| {
        let mut counts = vec![0u64; 1 << m];
        let mut digits = vec![0u32; k as usize];
        loop {
            let mask = digits.iter().fold(0usize, |acc, &g| acc | 1 << g);
            counts[mask] += 1;
            let mut i = 0;
            loop {
                if i == digits.len() {
                    return counts;
                }
                digits[i] += 1;
                if digits[i] < m {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
        }
    };
    let (ha, hb) = (hits(n), hits(l));
    let matches: u64 = ha.iter().zip(&hb).map(|(a, b)| a * b).sum();
    Ok(Some(BigRational::new(BigInt::from(matches), BigInt::from(total))))
}

/// Frequency of matching group sets over `trials` uniform assignments, with
/// the binomial standard error of that frequency.
pub fn p_abs_monte_carlo(n: u32, l: u32, m: u32, trials: u64, rng: &mut dyn RngCore) -> Result<(f64, f64), OracleError> {
    check_pabs(n, l, m)?;
    if trials == 0 {
        return Err(OracleError::RangeExceeded("trials must be positive".into()));
    }
    let mut hits = 0u64;
    for _ in 0..trials {
        let mut a = 0u32;
        for _ in 0..n {
            a |= 1 << rng.gen_range(0..m);
        }
        let mut b = 0u32;
        for _ in 0..l {
            b |= 1 << rng.gen_range(0..m);
        }
        hits += (a == b) as u64;
    }
    let p = hits as f64 / trials as f64;
    Ok((p, (p * (1.0 - p) / trials as f64).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::FromPrimitive;

    #[test]
    fn surjection_examples() {
        assert_eq!(surjection_count(3, 3).unwrap(), BigInt::from(6));
        assert_eq!(surjection_count(2, 3).unwrap(), BigInt::from(0));
        assert_eq!(surjection_count(3, 2).unwrap(), BigInt::from(6));
        assert_eq!(surjection_count(1, 0).unwrap(), BigInt::from(0));
        assert_eq!(surjection_count(0, 0).unwrap(), BigInt::from(1));
        assert!(matches!(surjection_count(21, 3), Err(OracleError::RangeExceeded(_))));
    }

    #[test]
    fn surjection_recurrence() {
        for n in 2..=12 {
            for k in 1..=n {
                let lhs = surjection_count(n, k).unwrap();
                let rhs = BigInt::from(k) * (surjection_count(n - 1, k).unwrap() + surjection_count(n - 1, k - 1).unwrap());
                assert_eq!(lhs, rhs, "f({n},{k})");
            }
        }
    }

    #[test]
    fn p_abs_examples() {
        assert_eq!(p_abs_closed_form(3, 4, 1).unwrap().0, 1.0);
        assert_eq!(p_abs_closed_form(1, 1, 2).unwrap().0, 0.5);
        assert_eq!(p_abs_closed_form(2, 1, 2).unwrap().0, 0.25);
        assert_eq!(p_abs_exact(2, 1, 2).unwrap(), BigRational::from_f64(0.25).unwrap());
        assert!(p_abs_closed_form(31, 1, 2).is_err());
    }

    #[test]
    fn enumeration_matches_small_cases() {
        for (n, l, m) in [(1, 1, 2), (2, 1, 2), (2, 2, 3), (3, 2, 4)] {
            assert_eq!(p_abs_enumerate(n, l, m, 1_000_000).unwrap().unwrap(), p_abs_exact(n, l, m).unwrap());
        }
        assert_eq!(p_abs_enumerate(5, 5, 10, 1_000_000).unwrap(), None);
    }

    #[test]
    fn monte_carlo_degenerate_pool() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        assert_eq!(p_abs_monte_carlo(3, 2, 1, 100, &mut rng).unwrap(), (1.0, 0.0));
    }
}
