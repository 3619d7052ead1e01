//! Binomial tail bounds and moments used to justify the thinning rule, as
//! independently testable utilities.

use std::fmt;

use crate::special;

/// A Hoeffding-type bound on P(Bin(n, r/sqrt(n)) > k1 * r * sqrt(n)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailBound {
    pub n: u64,
    pub r: f64,
    pub k1: f64,
    /// k1 log k1 + 1 - k1 (positive whenever k1 > 1)
    pub kappa: f64,
    /// the tight pre-asymptotic bound value in [0, 1]
    pub bound: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundsError {
    DomainError(&'static str),
}

impl fmt::Display for BoundsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundsError::DomainError(what) => write!(f, "domain error: {what}"),
        }
    }
}

impl std::error::Error for BoundsError {}

/// The exact Hoeffding bound
/// `{(mu/(mu+eps))^(mu+eps) ((1-mu)/(1-mu-eps))^(1-mu-eps)}^n`
/// for mu = r/sqrt(n), eps = (k1-1) r/sqrt(n), evaluated in log space.
pub fn hoeffding_tail(n: u64, r: f64, k1: f64) -> Result<TailBound, BoundsError> {
    if k1 <= 1.0 {
        return Err(BoundsError::DomainError("k1 must exceed 1"));
    }
    let kappa = k1 * k1.ln() + 1.0 - k1;
    if r < 0.0 {
        return Err(BoundsError::DomainError("radius must be >= 0"));
    }
    if r == 0.0 {
        // degenerate binomial: the tail is exactly 0
        return Ok(TailBound { n, r, k1, kappa, bound: 0.0 });
    }
    let mu = r / (n as f64).sqrt();
    let eps = (k1 - 1.0) * mu;
    if !(eps > 0.0 && eps < 1.0 - mu) {
        return Err(BoundsError::DomainError("need 0 < (k1-1) r/sqrt(n) < 1 - r/sqrt(n)"));
    }
    let ln_bound = (n as f64)
        * ((mu + eps) * (mu.ln() - (mu + eps).ln())
            + (1.0 - mu - eps) * ((1.0 - mu).ln() - (1.0 - mu - eps).ln()));
    Ok(TailBound { n, r, k1, kappa, bound: ln_bound.exp().min(1.0) })
}

/// Exact P(Bin(n, r/sqrt(n)) > threshold) by stable log-space summation.
pub fn thinning_probability(n: u64, r: f64, threshold: u64) -> f64 {
    let p = r / (n as f64).sqrt();
    special::binom_tail_gt(n, p, threshold.min(n))
}

/// Closed-form moments E X^order of X ~ Bin(n, r/sqrt(n)), order 1..=4.
pub fn binomial_moments(n: u64, r: f64, order: u32) -> Result<f64, BoundsError> {
    let nf = n as f64;
    let p = r / nf.sqrt();
    if !(0.0..=1.0).contains(&p) {
        return Err(BoundsError::DomainError("need r/sqrt(n) in [0, 1]"));
    }
    let rt = nf.sqrt();
    let r2 = r * r;
    let r3 = r2 * r;
    let r4 = r2 * r2;
    match order {
        1 => Ok(r * rt),
        2 => Ok(r2 * nf + r * rt - r2),
        3 => Ok(r3 * nf * rt + 3.0 * r2 * nf + (r - 3.0 * r3) * rt - 3.0 * r2 + 2.0 * r3 / rt),
        4 => Ok(r4 * nf * nf
            + 6.0 * r3 * nf * rt
            + (7.0 * r2 - 6.0 * r4) * nf
            + (r - 18.0 * r3) * rt
            + 11.0 * r4
            - 7.0 * r2
            + 12.0 * r3 / rt
            - 6.0 * r4 / nf),
        _ => Err(BoundsError::DomainError("moment order must be 1..=4")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// brute-force E X^q for X ~ Bin(n, p)
    fn moment_by_enumeration(n: u64, p: f64, q: u32) -> f64 {
        (0..=n)
            .map(|k| (k as f64).powi(q as i32) * special::ln_binom_pmf(n, k, p).exp())
            .sum()
    }

    #[test]
    fn kappa_value_and_integral_identity() {
        let tb = hoeffding_tail(100, 0.5, 2.0).unwrap();
        assert!((tb.kappa - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        // kappa = int_1^k1 log x dx
        for k1 in [1.5f64, 2.0, 3.0] {
            let integral = k1 * k1.ln() - k1 + 1.0; // antiderivative x log x - x
            let tb = hoeffding_tail(50, 0.3, k1).unwrap();
            assert!((tb.kappa - integral).abs() < 1e-12);
            assert!(tb.kappa > 0.0);
        }
    }

    #[test]
    fn hoeffding_dominates_exact_tail() {
        for &(n, r, k1) in &[(100u64, 0.5, 2.0), (400, 0.25, 1.5), (49, 1.0, 2.5), (1000, 0.8, 3.0)]
        {
            let tb = hoeffding_tail(n, r, k1).unwrap();
            let exact = thinning_probability(n, r, (k1 * r * (n as f64).sqrt()).floor() as u64);
            assert!(
                tb.bound >= exact,
                "bound {} < exact tail {} at (n,r,k1)=({n},{r},{k1})",
                tb.bound,
                exact
            );
        }
        // r = 0: tail is 0, bound is 0
        let tb = hoeffding_tail(10, 0.0, 2.0).unwrap();
        assert_eq!(tb.bound, 0.0);
        assert!(hoeffding_tail(10, 0.5, 1.0).is_err());
        assert!(hoeffding_tail(4, 1.9, 2.0).is_err(), "eps beyond 1 - mu");
    }

    #[test]
    fn thinning_probability_exact_cases() {
        // n=5, r=1: closed-form sum over k = 3,4,5 at p = 5^(-1/2)
        let p = 1.0 / 5f64.sqrt();
        let q = 1.0 - p;
        let want = 10.0 * p.powi(3) * q * q + 5.0 * p.powi(4) * q + p.powi(5);
        assert!((thinning_probability(5, 1.0, 2) - want).abs() < 1e-14);
        assert_eq!(thinning_probability(7, 0.5, 7), 0.0);
        // dominated by the Hoeffding form exp(-2n(eps - r/sqrt(n))^2)
        let (n, r, thr) = (101u64, 0.5, 50u64);
        let eps = (thr + 1) as f64 / n as f64;
        let hoeff = (-2.0 * n as f64 * (eps - r / (n as f64).sqrt()).powi(2)).exp();
        assert!(thinning_probability(n, r, thr) <= hoeff);
    }

    #[test]
    fn binomial_moments_closed_forms() {
        // n=4, r=1 means p = 1/2: E X = 2, E X^2 = 5
        assert!((binomial_moments(4, 1.0, 1).unwrap() - 2.0).abs() < 1e-13);
        assert!((binomial_moments(4, 1.0, 2).unwrap() - 5.0).abs() < 1e-13);
        // r = 0: all moments vanish
        for q in 1..=4 {
            assert_eq!(binomial_moments(17, 0.0, q).unwrap(), 0.0);
        }
        // n=9, r=0.3: third moment against brute force
        let p = 0.3 / 3.0;
        let want = moment_by_enumeration(9, p, 3);
        assert!((binomial_moments(9, 0.3, 3).unwrap() - want).abs() < 1e-12);
        assert!(binomial_moments(9, 0.3, 5).is_err());
        assert!(binomial_moments(4, 2.1, 2).is_err());
    }

    #[test]
    fn binomial_moments_match_enumeration_on_grid() {
        for n in (1..=50u64).step_by(7) {
            for &r in &[0.1, 0.5, 1.0] {
                let p = r / (n as f64).sqrt();
                if p > 1.0 {
                    continue;
                }
                for q in 1..=4u32 {
                    let lhs = binomial_moments(n, r, q).unwrap();
                    let rhs = moment_by_enumeration(n, p, q);
                    assert!(
                        (lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-10),
                        "n={n} r={r} order={q}: {lhs} vs {rhs}"
                    );
                }
            }
        }
    }
}
