//! The ideal central distribution F: cdf/pdf/quantile plus the local Taylor
//! data (f0, f1, f2) of the density at the median.
//!
//! A distribution is a record of pure callables. The library never
//! differentiates the pdf symbolically; supplied Taylor coefficients are only
//! cross-checked numerically by [`validate`]. Optional log-scale and survival
//! callables can be supplied where plain `1 - cdf(t)` would lose the far tail;
//! the exact-risk quadratures rely on those.

use std::fmt;
use std::sync::Arc;

use crate::special;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An ideal model F with everything the risk formulas need.
///
/// All fields are immutable after construction and the callables must be
/// pure, so values can be shared freely across worker threads.
#[derive(Clone)]
pub struct IdealDistribution {
    cdf: RealFn,
    pdf: RealFn,
    quantile: RealFn,
    sf: RealFn,
    log_cdf: RealFn,
    log_sf: RealFn,
    log_pdf: RealFn,
    /// density at the median
    pub f0: f64,
    /// first derivative of the density at the median
    pub f1: f64,
    /// second derivative of the density at the median
    pub f2: f64,
    /// attested delta of the moment condition (not verified, see module doc)
    pub moment_exponent_delta: f64,
}

impl fmt::Debug for IdealDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IdealDistribution")
            .field("f0", &self.f0)
            .field("f1", &self.f1)
            .field("f2", &self.f2)
            .field("moment_exponent_delta", &self.moment_exponent_delta)
            .finish_non_exhaustive()
    }
}

impl IdealDistribution {
    /// Build a distribution from the three basic callables; survival and
    /// log-scale functions default to compositions of `cdf`.
    ///
    /// The defaults lose relative accuracy in the upper tail (`1 - cdf`),
    /// which is fine for moderate sample sizes; supply precise overrides via
    /// [`IdealDistribution::with_tail_functions`] for deep-tail work.
    pub fn new(
        cdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        pdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        quantile: impl Fn(f64) -> f64 + Send + Sync + 'static,
        f0: f64,
        f1: f64,
        f2: f64,
        moment_exponent_delta: f64,
    ) -> Self {
        let cdf: RealFn = Arc::new(cdf);
        let pdf: RealFn = Arc::new(pdf);
        let sf = {
            let cdf = cdf.clone();
            Arc::new(move |t: f64| 1.0 - cdf(t)) as RealFn
        };
        let log_cdf = {
            let cdf = cdf.clone();
            Arc::new(move |t: f64| cdf(t).ln()) as RealFn
        };
        let log_sf = {
            let cdf = cdf.clone();
            Arc::new(move |t: f64| (-cdf(t)).ln_1p()) as RealFn
        };
        let log_pdf = {
            let pdf = pdf.clone();
            Arc::new(move |t: f64| pdf(t).ln()) as RealFn
        };
        IdealDistribution {
            cdf,
            pdf,
            quantile: Arc::new(quantile),
            sf,
            log_cdf,
            log_sf,
            log_pdf,
            f0,
            f1,
            f2,
            moment_exponent_delta,
        }
    }

    /// Replace the survival / log-scale callables with precise versions.
    pub fn with_tail_functions(
        mut self,
        sf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        log_cdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        log_sf: impl Fn(f64) -> f64 + Send + Sync + 'static,
        log_pdf: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.sf = Arc::new(sf);
        self.log_cdf = Arc::new(log_cdf);
        self.log_sf = Arc::new(log_sf);
        self.log_pdf = Arc::new(log_pdf);
        self
    }

    #[inline]
    pub fn cdf(&self, t: f64) -> f64 {
        (self.cdf)(t)
    }
    #[inline]
    pub fn pdf(&self, t: f64) -> f64 {
        (self.pdf)(t)
    }
    #[inline]
    pub fn quantile(&self, p: f64) -> f64 {
        (self.quantile)(p)
    }
    /// Survival function 1 - F(t).
    #[inline]
    pub fn sf(&self, t: f64) -> f64 {
        (self.sf)(t)
    }
    #[inline]
    pub fn log_cdf(&self, t: f64) -> f64 {
        (self.log_cdf)(t)
    }
    #[inline]
    pub fn log_sf(&self, t: f64) -> f64 {
        (self.log_sf)(t)
    }
    #[inline]
    pub fn log_pdf(&self, t: f64) -> f64 {
        (self.log_pdf)(t)
    }
}

/// The standard normal model N(0,1) with analytic Taylor constants
/// f0 = 1/sqrt(2 pi), f1 = 0, f2 = -1/sqrt(2 pi).
pub fn make_normal() -> IdealDistribution {
    let f0 = special::FRAC_1_SQRT_2PI;
    IdealDistribution::new(
        special::norm_cdf,
        special::norm_pdf,
        special::norm_quantile,
        f0,
        0.0,
        -f0,
        0.5,
    )
    .with_tail_functions(
        special::norm_sf,
        special::norm_log_cdf,
        special::norm_log_sf,
        special::norm_log_pdf,
    )
}

/// Two-piece (split) normal with scales `sigma_l` left and `sigma_r` right of
/// its mode, re-centered so the median sits at 0. An asymmetric test model
/// with closed-form cdf/quantile and nonzero f1 at the median.
pub fn make_two_piece_normal(sigma_l: f64, sigma_r: f64) -> IdealDistribution {
    assert!(sigma_l > 0.0 && sigma_r > 0.0);
    let c = (2.0 / std::f64::consts::PI).sqrt() / (sigma_l + sigma_r);
    let w_l = 2.0 * sigma_l / (sigma_l + sigma_r); // total mass left of the mode
    // median of the uncentered density (mode at 0)
    let med = if sigma_r > sigma_l {
        sigma_r * special::norm_quantile(0.5 + (sigma_r - sigma_l) / (4.0 * sigma_r))
    } else if sigma_l > sigma_r {
        sigma_l * special::norm_quantile(0.5 + (sigma_r - sigma_l) / (4.0 * sigma_l))
    } else {
        0.0
    };
    let dens = move |x: f64| {
        let s = if x < 0.0 { sigma_l } else { sigma_r };
        c * (-x * x / (2.0 * s * s)).exp()
    };
    let cdf0 = move |x: f64| {
        if x < 0.0 {
            w_l * special::norm_cdf(x / sigma_l)
        } else {
            w_l / 2.0 + (2.0 - w_l) * (special::norm_cdf(x / sigma_r) - 0.5)
        }
    };
    let sf0 = move |x: f64| {
        if x < 0.0 {
            1.0 - w_l * special::norm_cdf(x / sigma_l)
        } else {
            (2.0 - w_l) * special::norm_sf(x / sigma_r)
        }
    };
    let quant0 = move |p: f64| {
        if p <= w_l / 2.0 {
            sigma_l * special::norm_quantile(p / w_l)
        } else {
            sigma_r * special::norm_quantile(0.5 + (p - w_l / 2.0) / (2.0 - w_l))
        }
    };
    // Taylor data of the shifted density at its median (med > 0 iff
    // sigma_r > sigma_l, which puts the median inside one smooth piece)
    let s_med = if med >= 0.0 { sigma_r } else { sigma_l };
    let f0 = dens(med);
    let f1 = -(med / (s_med * s_med)) * f0;
    let f2 = f0 * (med * med / (s_med * s_med * s_med * s_med) - 1.0 / (s_med * s_med));
    IdealDistribution::new(
        move |t: f64| cdf0(t + med),
        move |t: f64| dens(t + med),
        move |p: f64| quant0(p) - med,
        f0,
        f1,
        f2,
        0.5,
    )
    .with_tail_functions(
        move |t: f64| sf0(t + med),
        move |t: f64| {
            let x = t + med;
            if x < 0.0 {
                w_l.ln() + special::norm_log_cdf(x / sigma_l)
            } else {
                cdf0(x).ln()
            }
        },
        move |t: f64| {
            let x = t + med;
            if x < 0.0 {
                sf0(x).ln()
            } else {
                (2.0 - w_l).ln() + special::norm_log_sf(x / sigma_r)
            }
        },
        move |t: f64| {
            let x = t + med;
            let s = if x < 0.0 { sigma_l } else { sigma_r };
            c.ln() - x * x / (2.0 * s * s)
        },
    )
}

/// Hard validation failures: the model is unusable as a median model.
#[derive(Debug, Clone, PartialEq)]
pub enum DistError {
    /// |cdf(0) - 1/2| exceeded 1e-8
    NonMedianCentered { residual: f64 },
    /// density at the median not strictly positive
    InvalidDensity { f0: f64 },
}

impl fmt::Display for DistError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistError::NonMedianCentered { residual } => {
                write!(f, "cdf(0) deviates from 1/2 by {residual:e}; model is not median-centered")
            }
            DistError::InvalidDensity { f0 } => {
                write!(f, "density at the median must be positive, got f0 = {f0}")
            }
        }
    }
}

impl std::error::Error for DistError {}

/// One validated invariant.
#[derive(Debug, Clone)]
pub struct ValidationCheck {
    pub name: &'static str,
    pub passed: bool,
    /// measured residual, in the units of the check
    pub residual: f64,
    pub tolerance: f64,
}

/// Outcome of [`validate`]: per-invariant pass/fail with residuals.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(&mut self, name: &'static str, residual: f64, tolerance: f64) {
        self.checks.push(ValidationCheck { name, passed: residual.abs() <= tolerance, residual, tolerance });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<28} {}  residual {: >12.3e}  (tol {:.1e})",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                c.residual,
                c.tolerance
            )?;
        }
        Ok(())
    }
}

/// Numerically check the distribution invariants.
///
/// Returns `Err` for the two hard failures (off-center median, nonpositive
/// density); everything else lands in the report as pass/fail entries.
///
/// The quantile-roundtrip and pdf-vs-cdf-slope tolerances carry an explicit
/// f64-quantization allowance: near p = 1 the cdf value itself is quantized
/// to ~1e-16, which any implementation turns into a roundtrip error of
/// ulp(p)/pdf(t) regardless of the accuracy of the callables.
pub fn validate(dist: &IdealDistribution) -> Result<ValidationReport, DistError> {
    if dist.f0 <= 0.0 || !dist.f0.is_finite() {
        return Err(DistError::InvalidDensity { f0: dist.f0 });
    }
    let center_residual = dist.cdf(0.0) - 0.5;
    if center_residual.abs() > 1e-8 {
        return Err(DistError::NonMedianCentered { residual: center_residual });
    }

    let mut report = ValidationReport::default();
    report.push("cdf_at_median", center_residual, 1e-12);
    report.push("f0_positive", 0.0, 1.0);

    // natural scale of the distribution for step sizes
    let scale = (dist.quantile(0.75) - dist.quantile(0.25)).abs().max(f64::MIN_POSITIVE);

    // Taylor data vs central differences of the pdf at 0, step h = 1e-4*scale
    let h = 1e-4 * scale;
    let p0 = dist.pdf(0.0);
    let pp = dist.pdf(h);
    let pm = dist.pdf(-h);
    let d1 = (pp - pm) / (2.0 * h);
    let d2 = (pp - 2.0 * p0 + pm) / (h * h);
    let tol_rel = 1e-4;
    report.push("taylor_f0", (p0 - dist.f0) / dist.f0, tol_rel);
    let f1_scale = dist.f1.abs().max(dist.f0 / scale);
    report.push("taylor_f1", (d1 - dist.f1) / f1_scale, tol_rel);
    let f2_scale = dist.f2.abs().max(dist.f0 / (scale * scale));
    report.push("taylor_f2", (d2 - dist.f2) / f2_scale, tol_rel * 10.0);

    // grid covering [quantile(1e-10), quantile(1-1e-10)]
    let mut grid = Vec::new();
    let mut p = 1e-10;
    while p < 0.5 {
        grid.push(p);
        grid.push(1.0 - p);
        p *= 31.62;
    }
    grid.push(0.5);
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut rt_worst = 0.0f64;
    let mut rt_tol = 1e-9f64;
    let mut slope_worst = 0.0f64;
    let mut mono_worst = 0.0f64;
    let mut pdf_min = f64::INFINITY;
    let mut prev_cdf = f64::NEG_INFINITY;
    let hd = 6e-6 * scale;
    for &pi in &grid {
        let t = dist.quantile(pi);
        let c = dist.cdf(t);
        // quantile-roundtrip, with quantization slack ulp(c)/pdf
        let back = dist.quantile(c);
        let slack = (c.abs().max(1.0) * f64::EPSILON) / dist.pdf(t).max(f64::MIN_POSITIVE);
        rt_worst = rt_worst.max((back - t).abs() - slack);
        rt_tol = 1e-9;
        // pdf vs central slope of cdf (sf in the upper half for tail accuracy)
        let slope = if c <= 0.5 {
            (dist.cdf(t + hd) - dist.cdf(t - hd)) / (2.0 * hd)
        } else {
            (dist.sf(t - hd) - dist.sf(t + hd)) / (2.0 * hd)
        };
        let pdf_t = dist.pdf(t);
        let quant_noise = 4.0 * f64::EPSILON * c.min(1.0 - c).max(f64::MIN_POSITIVE) / hd;
        let denom = pdf_t.abs().max(quant_noise / 1e-6);
        slope_worst = slope_worst.max((slope - pdf_t).abs() / denom);
        // monotone cdf, nonnegative pdf
        mono_worst = mono_worst.max(prev_cdf - c);
        prev_cdf = c;
        pdf_min = pdf_min.min(pdf_t);
    }
    report.push("quantile_roundtrip", rt_worst.max(0.0), rt_tol);
    report.push("pdf_matches_cdf_slope", slope_worst, 1e-6);
    report.push("cdf_nondecreasing", mono_worst.max(0.0), 0.0);
    report.push("pdf_nonnegative", (-pdf_min).max(0.0), 0.0);

    Ok(report)
}
