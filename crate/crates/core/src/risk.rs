//! Value-at-risk and conditional value-at-risk of finite cost distributions.
//!
//! These are the reference semantics every engine is checked against.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Probability mass over nonnegative integer costs. All stored masses are
/// positive and sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct CostDistribution<T> {
    mass: BTreeMap<u64, T>,
}

/// VaR and CVaR of one distribution (or policy) at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskResult<T> {
    pub var: u64,
    pub cvar: T,
}

impl<T: Scalar> CostDistribution<T> {
    /// Merges duplicate costs and drops zero entries; the total must be one
    /// (up to the scalar's default tolerance).
    pub fn new(pairs: impl IntoIterator<Item = (u64, T)>) -> Result<Self> {
        let mut mass: BTreeMap<u64, T> = BTreeMap::new();
        for (cost, p) in pairs {
            if p < T::zero() {
                return Err(Error::Argument(format!("negative mass at cost {cost}")));
            }
            if p.is_zero() {
                continue;
            }
            let entry = mass.entry(cost).or_insert_with(T::zero);
            *entry = entry.clone() + p;
        }
        let dist = CostDistribution { mass };
        let total = dist.total_mass();
        if (total.clone() - T::one()).abs() > T::default_tolerance() {
            return Err(Error::Argument(format!(
                "distribution mass sums to {}, expected 1",
                total.to_f64()
            )));
        }
        Ok(dist)
    }

    pub fn point(cost: u64) -> Self {
        CostDistribution {
            mass: BTreeMap::from([(cost, T::one())]),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &T)> {
        self.mass.iter().map(|(c, p)| (*c, p))
    }

    pub fn total_mass(&self) -> T {
        self.mass.values().fold(T::zero(), |acc, p| acc + p.clone())
    }

    pub fn mean(&self) -> T {
        self.mass
            .iter()
            .fold(T::zero(), |acc, (c, p)| acc + T::from_u64(*c) * p.clone())
    }

    pub fn min_support(&self) -> u64 {
        *self.mass.keys().next().expect("distribution is nonempty")
    }

    /// The worst case, i.e. the limit of CVaR as the threshold goes to zero.
    pub fn max_support(&self) -> u64 {
        *self.mass.keys().next_back().expect("distribution is nonempty")
    }

    /// Smallest `v` with `P[X > v] <= t`; for `t = 1` the minimum of the support.
    pub fn var(&self, t: &T) -> Result<u64> {
        check_threshold(t)?;
        if *t >= T::one() {
            return Ok(self.min_support());
        }
        let mut above = T::one();
        for (cost, p) in &self.mass {
            above = above - p.clone();
            if above <= *t {
                return Ok(*cost);
            }
        }
        // Only reachable through rounding in float mode.
        Ok(self.max_support())
    }

    /// Expectation over the worst `t` fraction of outcomes, splitting the
    /// atom at the VaR.
    pub fn cvar(&self, t: &T) -> Result<T> {
        Ok(self.risk(t)?.cvar)
    }

    pub fn risk(&self, t: &T) -> Result<RiskResult<T>> {
        let var = self.var(t)?;
        let mut tail_mass = T::zero();
        let mut tail_sum = T::zero();
        for (cost, p) in self.mass.range(var + 1..) {
            tail_mass = tail_mass + p.clone();
            tail_sum = tail_sum + T::from_u64(*cost) * p.clone();
        }
        let t = if *t > T::one() { T::one() } else { t.clone() };
        let cvar = (tail_sum + (t.clone() - tail_mass) * T::from_u64(var)) / t;
        Ok(RiskResult { var, cvar })
    }
}

fn check_threshold<T: Scalar>(t: &T) -> Result<()> {
    if *t <= T::zero() || *t > T::one() {
        return Err(Error::Threshold(t.to_string()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, Zero};
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn figure_one() -> CostDistribution<BigRational> {
        CostDistribution::new([
            (2, q(20, 100)),
            (5, q(35, 100)),
            (7, q(25, 100)),
            (8, q(5, 100)),
            (9, q(15, 100)),
        ])
        .unwrap()
    }

    #[test]
    fn figure_one_values() {
        let d = figure_one();
        assert_eq!(d.var(&q(40, 100)).unwrap(), 7);
        assert_eq!(d.cvar(&q(40, 100)).unwrap(), q(7875, 1000));
        // P[X > 5] is exactly 45%, so the smaller value wins.
        assert_eq!(d.var(&q(45, 100)).unwrap(), 5);
        // Plain expectation: 0.4 + 1.75 + 1.75 + 0.4 + 1.35.
        assert_eq!(d.cvar(&BigRational::one()).unwrap(), q(565, 100));
        assert_eq!(d.var(&BigRational::one()).unwrap(), 2);
        assert_eq!(d.max_support(), 9);
    }

    #[test]
    fn point_mass() {
        let d = CostDistribution::<BigRational>::point(5);
        for t in [q(1, 10), q(3, 10), q(1, 1)] {
            assert_eq!(d.var(&t).unwrap(), 5);
            assert_eq!(d.cvar(&t).unwrap(), q(5, 1));
        }
    }

    #[test]
    fn rejects_bad_thresholds_and_mass() {
        let d = figure_one();
        assert!(d.var(&BigRational::zero()).is_err());
        assert!(d.cvar(&q(-1, 2)).is_err());
        assert!(d.cvar(&q(3, 2)).is_err());
        assert!(CostDistribution::new([(1, q(1, 2))]).is_err());
        assert!(CostDistribution::new([(1, q(3, 2)), (2, q(-1, 2))]).is_err());
    }

    fn distribution() -> impl Strategy<Value = Vec<(u64, u32)>> {
        prop::collection::vec((0u64..30, 1u32..20), 1..10)
    }

    fn exact_of(raw: &[(u64, u32)]) -> CostDistribution<BigRational> {
        let total: u32 = raw.iter().map(|(_, w)| w).sum();
        CostDistribution::new(
            raw.iter()
                .map(|(c, w)| (*c, q(*w as i64, total as i64))),
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn cvar_dominates_var_and_decreases(raw in distribution(), a in 1u32..100, b in 1u32..100) {
            let d = exact_of(&raw);
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let t_lo = q(lo as i64, 100);
            let t_hi = q(hi as i64, 100);
            let r_lo = d.risk(&t_lo).unwrap();
            let r_hi = d.risk(&t_hi).unwrap();
            prop_assert!(r_lo.cvar >= BigRational::from_u64(r_lo.var));
            prop_assert!(r_lo.cvar >= r_hi.cvar);
            prop_assert!(r_lo.var >= r_hi.var);
            prop_assert!(r_lo.cvar <= BigRational::from_u64(d.max_support()));
            prop_assert_eq!(d.cvar(&BigRational::one()).unwrap(), d.mean());
        }

        #[test]
        fn float_matches_exact(raw in distribution(), t in 1u32..100) {
            let exact = exact_of(&raw);
            let float = CostDistribution::new(exact.iter().map(|(c, p)| (c, Scalar::to_f64(p)))).unwrap();
            let t_exact = q(t as i64, 100);
            let a = exact.risk(&t_exact).unwrap();
            let b = float.risk(&(t as f64 / 100.0)).unwrap();
            // Float VaR can land on the neighbouring atom at exact boundaries,
            // but CVaR is continuous in the threshold.
            prop_assert!((Scalar::to_f64(&a.cvar) - b.cvar).abs() < 1e-9);
        }
    }
}
