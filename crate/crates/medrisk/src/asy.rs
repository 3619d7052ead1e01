//! Closed-form higher-order expansions of n * maxMSE for every median
//! variant, plus the separate bias/variance expansions.
//!
//! The n*MSE expansion has the shape
//!
//! ```text
//! (1/(4 f0^2)) * [ (1+r^2) + (r/sqrt(n)) (a10 + a11 f1/f0^2)
//!                + (1/n) (a20 + a21 f1/f0^2 + a22 f2/f0^3 + a23 f1^2/f0^4) ]
//! ```
//!
//! with coefficients depending on the variant and the contamination radius.
//! The convention sign(0) = 0 is used throughout, so |f1| = sign(f1)*f1
//! holds identically and the two printed presentations of the odd-median
//! coefficients stay equal.

use std::fmt;

use crate::dist::IdealDistribution;

/// Which sample-median variant; the first is for odd n, the rest for even n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MedianVariant {
    OddMedian,
    LowerQuantile,
    UpperQuantile,
    Randomized,
    Midpoint,
    BiasCorrected,
}

impl MedianVariant {
    /// true when the variant applies to odd sample sizes
    pub fn wants_odd_n(self) -> bool {
        matches!(self, MedianVariant::OddMedian)
    }

    pub fn matches_parity(self, n: u64) -> bool {
        !n.is_multiple_of(2) == self.wants_odd_n()
    }

    pub fn label(self) -> &'static str {
        match self {
            MedianVariant::OddMedian => "odd",
            MedianVariant::LowerQuantile => "lower",
            MedianVariant::UpperQuantile => "upper",
            MedianVariant::Randomized => "randomized",
            MedianVariant::Midpoint => "midpoint",
            MedianVariant::BiasCorrected => "bias-corrected",
        }
    }
}

impl fmt::Display for MedianVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// How far the expansion is carried: n^0, n^(-1/2) or n^(-1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpansionOrder {
    Zero,
    Half,
    One,
}

impl ExpansionOrder {
    pub fn label(self) -> &'static str {
        match self {
            ExpansionOrder::Zero => "asy0",
            ExpansionOrder::Half => "asy-half",
            ExpansionOrder::One => "asy1",
        }
    }
}

/// Provenance of a risk value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RiskMethod {
    Asy0,
    AsyHalf,
    AsyOne,
    ExactQuadrature,
    Simulated,
}

impl RiskMethod {
    pub fn label(self) -> &'static str {
        match self {
            RiskMethod::Asy0 => "asy0",
            RiskMethod::AsyHalf => "asy-half",
            RiskMethod::AsyOne => "asy1",
            RiskMethod::ExactQuadrature => "exact",
            RiskMethod::Simulated => "sim",
        }
    }
}

/// A value of n*MSE with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskResult {
    pub value: f64,
    pub method: RiskMethod,
    /// 95% confidence interval, only for simulated values
    pub ci: Option<(f64, f64)>,
    pub n: u64,
    pub r: f64,
    pub variant: MedianVariant,
}

/// The a_{i,j} coefficient set of one variant at one radius.
///
/// `side` records which contamination side attains the maximum
/// (-1 left, +1 right, 0 both); `s_prime`/`s` are the quantile-variant
/// signs (0/0 for the non-quantile variants).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionCoefficients {
    pub a10: f64,
    pub a11: f64,
    pub a20c: f64,
    pub a20r: f64,
    pub a21c: f64,
    pub a21r: f64,
    pub a22c: f64,
    pub a22r: f64,
    pub a23: f64,
    pub side: i8,
    pub s_prime: i8,
    pub s: i8,
}

impl ExpansionCoefficients {
    pub fn a20(&self) -> f64 {
        self.a20c + self.a20r
    }
    pub fn a21(&self) -> f64 {
        self.a21c + self.a21r
    }
    pub fn a22(&self) -> f64 {
        self.a22c + self.a22r
    }

    /// sqrt(n)-order bundle a10 + a11 f1/f0^2.
    pub fn first_bundle(&self, dist: &IdealDistribution) -> f64 {
        let f0sq = dist.f0 * dist.f0;
        self.a10 + self.a11 * dist.f1 / f0sq
    }

    /// 1/n-order bundle a20 + a21 f1/f0^2 + a22 f2/f0^3 + a23 f1^2/f0^4.
    pub fn second_bundle(&self, dist: &IdealDistribution) -> f64 {
        let f0sq = dist.f0 * dist.f0;
        self.a20()
            + self.a21() * dist.f1 / f0sq
            + self.a22() * dist.f2 / (f0sq * dist.f0)
            + self.a23 * dist.f1 * dist.f1 / (f0sq * f0sq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsyError {
    NegativeRadius,
    WrongParity { n: u64, variant: MedianVariant },
}

impl fmt::Display for AsyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AsyError::NegativeRadius => write!(f, "contamination radius must be >= 0"),
            AsyError::WrongParity { n, variant } => {
                write!(f, "variant `{variant}` does not apply to sample size {n}")
            }
        }
    }
}

impl std::error::Error for AsyError {}

#[inline]
fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Coefficients shared by every variant at radius r.
fn common_terms(r: f64) -> (f64, f64, f64) {
    let r2 = r * r;
    let r4 = r2 * r2;
    let a22c = -0.25;
    let a22r = -(r4 + 6.0 * r2) / 12.0;
    let a23 = 5.0 * (r4 + 6.0 * r2 + 3.0) / 16.0;
    (a22c, a22r, a23)
}

/// Odd-median coefficient set: a1 = 2(1+r^2) + ((r^2+3)/2) |f1|/f0^2 and the
/// matching 1/n terms in the same c/r split as the even-n variants.
///
/// The reported worst side is -sign(f1): with a falling density (f1 < 0)
/// the quantile spacing is wider to the right, so pushing mass right moves
/// the median farther. Verified against the exact quadrature on asymmetric
/// models; the attained maximum value is the |f1| form either way.
pub fn coefficients_odd(dist: &IdealDistribution, r: f64) -> Result<ExpansionCoefficients, AsyError> {
    if r < 0.0 {
        return Err(AsyError::NegativeRadius);
    }
    let r2 = r * r;
    let r4 = r2 * r2;
    let sgn = sign0(dist.f1);
    let (a22c, a22r, a23) = common_terms(r);
    Ok(ExpansionCoefficients {
        a10: 2.0 * (1.0 + r2),
        a11: (r2 + 3.0) * sgn / 2.0,
        a20c: -2.0,
        a20r: 3.0 * r2 + 3.0 * r4,
        a21c: 0.0,
        a21r: 3.0 * r2 * (3.0 + r2) * sgn / 2.0,
        a22c,
        a22r,
        a23,
        side: -sgn as i8,
        s_prime: 0,
        s: 0,
    })
}

/// Even-n coefficient sets.
///
/// For the pure quantiles, s = sign((3+r^2) f1 + s' 4 f0^2) and the worst
/// side is -s; at the degenerate point (3+r^2) f1 = -s' 4 f0^2 both sides
/// yield the same MSE, s = 0, and the formulas are used with s = 0 directly.
/// The upper-quantile r-cross terms carry s's in place of the lower
/// quantile's s, which is what the exact mixture identity
/// MSE(randomized) = (MSE(lower)+MSE(upper))/2 and the reflection symmetry
/// lower(F) <-> upper(F mirrored) force; both arrangements, and the
/// bias-corrected side split below, are confirmed by coefficient fits
/// against the exact quadrature.
pub fn coefficients_even(
    dist: &IdealDistribution,
    r: f64,
    variant: MedianVariant,
) -> Result<ExpansionCoefficients, AsyError> {
    if r < 0.0 {
        return Err(AsyError::NegativeRadius);
    }
    if variant == MedianVariant::OddMedian {
        return Err(AsyError::WrongParity { n: 0, variant });
    }
    let f0 = dist.f0;
    let f1 = dist.f1;
    let r2 = r * r;
    let r4 = r2 * r2;
    let (a22c, a22r, a23) = common_terms(r);

    match variant {
        MedianVariant::LowerQuantile | MedianVariant::UpperQuantile => {
            let s_prime: f64 = if variant == MedianVariant::LowerQuantile { 1.0 } else { -1.0 };
            let s = sign0((3.0 + r2) * f1 + 4.0 * s_prime * f0 * f0);
            let side = -s;
            let ss = s_prime * s; // +1 in the interior regime |(3+r^2) f1| < 4 f0^2
            Ok(ExpansionCoefficients {
                a10: 2.0 + 2.0 * ss + 2.0 * r2,
                a11: (r2 + 3.0) * s / 2.0,
                a20c: -1.0,
                a20r: 3.0 * r4 + (3.0 + 4.0 * ss) * r2,
                a21c: 1.5 * s_prime,
                a21r: 3.0 * s * ((3.0 + ss) * r2 + r4) / 2.0,
                a22c,
                a22r,
                a23,
                side: side as i8,
                s_prime: s_prime as i8,
                s: s as i8,
            })
        }
        MedianVariant::Midpoint | MedianVariant::Randomized => {
            let sgn = sign0(f1);
            let a20c = if variant == MedianVariant::Midpoint { -3.0 } else { -1.0 };
            Ok(ExpansionCoefficients {
                a10: 2.0 * (1.0 + r2),
                a11: (r2 + 3.0) * sgn / 2.0,
                a20c,
                a20r: 3.0 * r4 + 3.0 * r2,
                a21c: 0.0,
                a21r: 3.0 * r2 * (3.0 + r2) * sgn / 2.0,
                a22c,
                a22r,
                a23,
                side: -sgn as i8,
                s_prime: 0,
                s: 0,
            })
        }
        MedianVariant::BiasCorrected => {
            // lower quantile plus the deterministic shift 1/(2 n f0); the
            // shift cancels the quantile's sqrt(n)-order side asymmetry, and
            // the remaining 1/n cross term prefers the left side when f1 = 0
            let side = if f1 != 0.0 { -sign0(f1) } else { -1.0 };
            Ok(ExpansionCoefficients {
                a10: 2.0 * (1.0 + r2),
                a11: (r2 + 3.0) * sign0(f1) / 2.0,
                a20c: -2.0,
                a20r: 3.0 * r4 + 3.0 * r2 - 2.0 * side * r2,
                a21c: 1.0,
                a21r: -3.0 * side * ((3.0 - side) * r2 + r4) / 2.0 - r2 / 2.0,
                a22c,
                a22r,
                a23,
                side: side as i8,
                s_prime: 0,
                s: 0,
            })
        }
        MedianVariant::OddMedian => unreachable!(),
    }
}

fn coefficients_for(
    dist: &IdealDistribution,
    r: f64,
    n: u64,
    variant: MedianVariant,
) -> Result<ExpansionCoefficients, AsyError> {
    if !variant.matches_parity(n) {
        return Err(AsyError::WrongParity { n, variant });
    }
    match variant {
        MedianVariant::OddMedian => coefficients_odd(dist, r),
        _ => coefficients_even(dist, r, variant),
    }
}

/// n * maxMSE by the expansion, truncated at the requested order.
pub fn asy_mse(
    dist: &IdealDistribution,
    r: f64,
    n: u64,
    variant: MedianVariant,
    order: ExpansionOrder,
) -> Result<RiskResult, AsyError> {
    if r < 0.0 {
        return Err(AsyError::NegativeRadius);
    }
    let coeffs = coefficients_for(dist, r, n, variant)?;
    let nf = n as f64;
    let mut bracket = 1.0 + r * r;
    if order != ExpansionOrder::Zero {
        bracket += r / nf.sqrt() * coeffs.first_bundle(dist);
    }
    if order == ExpansionOrder::One {
        bracket += coeffs.second_bundle(dist) / nf;
    }
    let value = bracket / (4.0 * dist.f0 * dist.f0);
    let method = match order {
        ExpansionOrder::Zero => RiskMethod::Asy0,
        ExpansionOrder::Half => RiskMethod::AsyHalf,
        ExpansionOrder::One => RiskMethod::AsyOne,
    };
    Ok(RiskResult { value, method, ci: None, n, r, variant })
}

/// The three expansions of the MSE decomposition at the worst-case side,
/// scaled as (n Var, sqrt(n) |Bias|, n Bias^2).
///
/// Odd n refers to the odd median, even n to the midpoint estimator; parity
/// enters only through the (5+(-1)^n)/2 term of the variance (which makes
/// n Var + n Bias^2 agree with [`asy_mse`] at order one, coefficient by
/// coefficient).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasVarExpansion {
    pub n_var: f64,
    pub sqrt_n_abs_bias: f64,
    pub n_bias_sq: f64,
}

pub fn bias_var_expansion(
    dist: &IdealDistribution,
    r: f64,
    n: u64,
) -> Result<BiasVarExpansion, AsyError> {
    if r < 0.0 {
        return Err(AsyError::NegativeRadius);
    }
    let f0 = dist.f0;
    let f1a = dist.f1.abs();
    let f2 = dist.f2;
    let f0sq = f0 * f0;
    let f1sq = dist.f1 * dist.f1;
    let nf = n as f64;
    let rt = nf.sqrt();
    let r2 = r * r;
    let parity = if n.is_multiple_of(2) { 1.0 } else { -1.0 };

    let n_var = (1.0
        + r / rt * (2.0 + f1a / f0sq)
        + (3.0 * r2 - (5.0 + parity) / 2.0
            + 3.0 * f1a * r2 / f0sq
            - f2 * (r2 + 1.0) / (4.0 * f0sq * f0)
            + f1sq * (8.0 * r2 + 7.0) / (8.0 * f0sq * f0sq))
            / nf)
        / (4.0 * f0sq);

    // sign arrangement fixed so that (sqrt(n)|Bias|)^2 = n Bias^2 + o(1/n)
    // and Var + Bias^2 = MSE hold coefficientwise
    let sqrt_n_abs_bias = (r
        + (r2 + f1a * (r2 + 1.0) / (4.0 * f0sq)) / rt
        + r * (r2 + f1a * (r2 + 1.0) / (2.0 * f0sq)
            - f2 * (r2 + 3.0) / (24.0 * f0sq * f0)
            + f1sq * (r2 + 3.0) / (8.0 * f0sq * f0sq))
            / nf)
        / (2.0 * f0);

    let n_bias_sq = (r2
        + r / rt * (2.0 * r2 + f1a * (r2 + 1.0) / (2.0 * f0sq))
        + (3.0 * r2 * r2
            + 3.0 * f1a * r2 * (r2 + 1.0) / (2.0 * f0sq)
            - f2 * r2 * (r2 + 3.0) / (12.0 * f0sq * f0)
            + f1sq * (5.0 * r2 * r2 + 14.0 * r2 + 1.0) / (16.0 * f0sq * f0sq))
            / nf)
        / (4.0 * f0sq);

    Ok(BiasVarExpansion { n_var, sqrt_n_abs_bias, n_bias_sq })
}

/// [`asy_mse`] evaluated for the standard normal model.
pub fn normal_specialization(
    r: f64,
    n: u64,
    variant: MedianVariant,
    order: ExpansionOrder,
) -> Result<RiskResult, AsyError> {
    asy_mse(&crate::dist::make_normal(), r, n, variant, order)
}
