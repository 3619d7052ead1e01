//! Monte Carlo study of the thinned shrinking-neighborhood model.
//!
//! Reproducibility contract: run j draws everything it needs from its own
//! ChaCha substream derived from (seed, j), and the reduction over runs is
//! performed in run order, so results are bitwise identical for any degree
//! of parallelism. Ideal draws are inverse-cdf transforms of uniforms, which
//! keeps the sampler generic in the distribution.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::asy::MedianVariant;
use crate::dist::IdealDistribution;

/// How a contaminated coordinate is drawn.
#[derive(Clone)]
pub enum ContaminationLaw {
    /// point mass
    Dirac(f64),
    /// inverse-transform sampler: maps a uniform in [0,1) to a draw
    Quantile(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for ContaminationLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContaminationLaw::Dirac(x) => write!(f, "Dirac({x})"),
            ContaminationLaw::Quantile(_) => write!(f, "Quantile(..)"),
        }
    }
}

/// Simulation design: sample size, radius, number of runs, seed,
/// contamination law and median variant.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub n: u64,
    pub r: f64,
    pub runs: u64,
    pub seed: u64,
    pub contamination: ContaminationLaw,
    /// None = parity rule (odd -> OddMedian, even -> Midpoint)
    pub variant: Option<MedianVariant>,
    /// reject samples with more than ceil(n/2)-1 contaminated coordinates
    pub thinned: bool,
}

impl SimConfig {
    pub fn new(n: u64, r: f64, seed: u64) -> Self {
        SimConfig {
            n,
            r,
            runs: 10_000,
            seed,
            contamination: ContaminationLaw::Dirac(100.0),
            variant: None,
            thinned: true,
        }
    }

    pub fn variant_for(&self, n: u64) -> MedianVariant {
        self.variant.unwrap_or(crate::exact::default_variant_rule(n))
    }
}

/// Empirical n*MSE with its 95% CLT interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalRisk {
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub runs_used: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    /// rejection sampling failed to accept within the retry budget
    DegenerateConfig { rejections: u64 },
    Parity { n: u64, variant: MedianVariant },
    BadConfig(&'static str),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::DegenerateConfig { rejections } => {
                write!(f, "thinning rejected {rejections} consecutive U-vectors")
            }
            SimError::Parity { n, variant } => {
                write!(f, "variant `{variant}` does not apply to sample size {n}")
            }
            SimError::BadConfig(what) => write!(f, "bad simulation config: {what}"),
        }
    }
}

impl std::error::Error for SimError {}

const MAX_REJECTIONS: u64 = 1_000_000;

fn contamination_draw(law: &ContaminationLaw, rng: &mut ChaCha12Rng) -> f64 {
    match law {
        ContaminationLaw::Dirac(x) => *x,
        ContaminationLaw::Quantile(q) => q(rng.random::<f64>()),
    }
}

/// One sample from the (optionally thinned) contaminated model.
///
/// The whole U-vector is redrawn when the thinning rule rejects it, which
/// realizes the conditional law exactly; the data draws happen only after a
/// U-vector is accepted, one draw per coordinate.
pub fn draw_sample(
    config: &SimConfig,
    dist: &IdealDistribution,
    rng: &mut ChaCha12Rng,
) -> Result<Vec<f64>, SimError> {
    let n = config.n as usize;
    let p = config.r / (config.n as f64).sqrt();
    if !(0.0..1.0).contains(&p) {
        return Err(SimError::BadConfig("need r/sqrt(n) in [0, 1)"));
    }
    let threshold = config.n.div_ceil(2) - 1;
    let mut flags = vec![false; n];
    if p > 0.0 {
        let mut rejections = 0u64;
        loop {
            let mut count = 0u64;
            for f in &mut flags {
                *f = rng.random::<f64>() < p;
                count += *f as u64;
            }
            if !config.thinned || count <= threshold {
                break;
            }
            rejections += 1;
            if rejections >= MAX_REJECTIONS {
                return Err(SimError::DegenerateConfig { rejections });
            }
        }
    }
    let mut sample = Vec::with_capacity(n);
    for &contaminated in &flags {
        if contaminated {
            sample.push(contamination_draw(&config.contamination, rng));
        } else {
            sample.push(dist.quantile(rng.random::<f64>()));
        }
    }
    Ok(sample)
}

/// Apply a median variant to a sample. `Randomized` consumes exactly one
/// uniform from `rng`; the other variants leave the stream untouched, so
/// runs on a common seed see identical data across variants.
pub fn apply_variant(
    sample: &[f64],
    variant: MedianVariant,
    dist: &IdealDistribution,
    rng: &mut ChaCha12Rng,
) -> Result<f64, SimError> {
    let n = sample.len() as u64;
    if !variant.matches_parity(n) {
        return Err(SimError::Parity { n, variant });
    }
    let mut sorted = sample.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = (n / 2) as usize;
    let est = match variant {
        MedianVariant::OddMedian => sorted[m],
        MedianVariant::LowerQuantile => sorted[m - 1],
        MedianVariant::UpperQuantile => sorted[m],
        MedianVariant::Midpoint => 0.5 * (sorted[m - 1] + sorted[m]),
        MedianVariant::Randomized => {
            if rng.random::<f64>() < 0.5 {
                sorted[m - 1]
            } else {
                sorted[m]
            }
        }
        MedianVariant::BiasCorrected => sorted[m - 1] + 1.0 / (2.0 * n as f64 * dist.f0),
    };
    Ok(est)
}

fn stream_rng(seed: u64, run: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

/// Monte Carlo estimate of n*MSE with its asymptotic 95% confidence
/// interval (normal quantile 1.96 exactly).
pub fn empirical_mse(config: &SimConfig, dist: &IdealDistribution) -> Result<EmpiricalRisk, SimError> {
    if config.runs < 1 {
        return Err(SimError::BadConfig("need at least one run"));
    }
    let variant = config.variant_for(config.n);
    if !variant.matches_parity(config.n) {
        return Err(SimError::Parity { n: config.n, variant });
    }
    let nf = config.n as f64;
    let per_run: Vec<Result<f64, SimError>> = (0..config.runs)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(config.seed, j);
            let sample = draw_sample(config, dist, &mut rng)?;
            let est = apply_variant(&sample, variant, dist, &mut rng)?;
            Ok(nf * est * est)
        })
        .collect();
    // fixed-order reduction over run index
    let mut sum = 0.0;
    let mut values = Vec::with_capacity(per_run.len());
    for v in per_run {
        let y = v?;
        sum += y;
        values.push(y);
    }
    let runs = config.runs as f64;
    let mean = sum / runs;
    let half_width = if config.runs > 1 {
        let mut ss = 0.0;
        for y in &values {
            ss += (y - mean) * (y - mean);
        }
        let sd = (ss / (runs - 1.0)).sqrt();
        1.96 * sd / runs.sqrt()
    } else {
        0.0
    };
    Ok(EmpiricalRisk {
        value: mean,
        ci_lo: mean - half_width,
        ci_hi: mean + half_width,
        runs_used: config.runs,
    })
}

/// Outcome of the breakdown demonstration on the *unthinned* neighborhood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BreakdownDemo {
    /// contamination point x0 = sqrt(C / p_n)
    pub x0: f64,
    /// exact P(Bin(n, r/sqrt(n)) > m)
    pub p_n: f64,
    /// empirical n*MSE under Dirac(x0) contamination without thinning
    pub empirical_n_mse: f64,
}

/// Places Dirac contamination at x0 = sqrt(C/p_n) so that the unthinned MSE
/// must exceed C (breakdown argument); the returned empirical n*MSE is
/// expected to exceed n*C up to statistical error.
pub fn breakdown_demo(
    dist: &IdealDistribution,
    n: u64,
    r: f64,
    c_target: f64,
    runs: u64,
    seed: u64,
) -> Result<BreakdownDemo, SimError> {
    if n.is_multiple_of(2) {
        return Err(SimError::Parity { n, variant: MedianVariant::OddMedian });
    }
    if c_target <= 0.0 {
        return Err(SimError::BadConfig("C must be positive"));
    }
    let m = (n - 1) / 2;
    let p_n = crate::bounds::thinning_probability(n, r, m);
    if p_n <= 0.0 {
        return Err(SimError::BadConfig("breakdown event has probability zero"));
    }
    let x0 = (c_target / p_n).sqrt();
    let mut config = SimConfig::new(n, r, seed);
    config.runs = runs;
    config.contamination = ContaminationLaw::Dirac(x0);
    config.thinned = false;
    let risk = empirical_mse(&config, dist)?;
    Ok(BreakdownDemo { x0, p_n, empirical_n_mse: risk.value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::make_normal;

    #[test]
    fn apply_variant_examples() {
        let d = make_normal();
        let mut rng = stream_rng(1, 0);
        assert_eq!(
            apply_variant(&[3.0, 1.0, 2.0], MedianVariant::OddMedian, &d, &mut rng).unwrap(),
            2.0
        );
        assert_eq!(
            apply_variant(&[4.0, 1.0, 3.0, 2.0], MedianVariant::Midpoint, &d, &mut rng).unwrap(),
            2.5
        );
        let bc = apply_variant(&[4.0, 1.0, 3.0, 2.0], MedianVariant::BiasCorrected, &d, &mut rng)
            .unwrap();
        assert!((bc - (2.0 + (2.0 * std::f64::consts::PI).sqrt() / 8.0)).abs() < 1e-14);
        let lo = apply_variant(&[4.0, 1.0, 3.0, 2.0], MedianVariant::LowerQuantile, &d, &mut rng)
            .unwrap();
        let up = apply_variant(&[4.0, 1.0, 3.0, 2.0], MedianVariant::UpperQuantile, &d, &mut rng)
            .unwrap();
        assert_eq!((lo, up), (2.0, 3.0));
        assert!(matches!(
            apply_variant(&[1.0, 2.0], MedianVariant::OddMedian, &d, &mut rng),
            Err(SimError::Parity { .. })
        ));
    }

    #[test]
    fn draw_sample_r0_is_clean() {
        let d = make_normal();
        let config = SimConfig::new(7, 0.0, 42);
        let mut rng = stream_rng(42, 0);
        let s = draw_sample(&config, &d, &mut rng).unwrap();
        assert_eq!(s.len(), 7);
        assert!(s.iter().all(|x| x.abs() < 100.0));
    }

    #[test]
    fn dirac_contamination_is_exact() {
        let d = make_normal();
        let mut config = SimConfig::new(5, 1.0, 7);
        config.contamination = ContaminationLaw::Dirac(100.0);
        let mut hits = 0;
        for j in 0..200 {
            let mut rng = stream_rng(7, j);
            let s = draw_sample(&config, &d, &mut rng).unwrap();
            hits += s.iter().filter(|&&x| x == 100.0).count();
        }
        assert!(hits > 0, "contamination never fired over 200 draws at p=0.447");
    }

    #[test]
    fn rejection_rate_matches_binomial_tail() {
        // count rejections by re-deriving them from accepted U-vector stats:
        // instead simulate the unthinned count distribution and compare the
        // frequency of "would-be-rejected" vectors to the exact tail
        let d = make_normal();
        let (n, r) = (5u64, 1.0);
        let mut config = SimConfig::new(n, r, 99);
        config.thinned = false;
        config.contamination = ContaminationLaw::Dirac(100.0);
        let runs = 40_000u64;
        let mut over = 0u64;
        for j in 0..runs {
            let mut rng = stream_rng(99, j);
            let s = draw_sample(&config, &d, &mut rng).unwrap();
            let k = s.iter().filter(|&&x| x == 100.0).count() as u64;
            if k > n.div_ceil(2) - 1 {
                over += 1;
            }
        }
        let p_hat = over as f64 / runs as f64;
        let p_exact = crate::bounds::thinning_probability(n, r, n.div_ceil(2) - 1);
        let se = (p_exact * (1.0 - p_exact) / runs as f64).sqrt();
        assert!(
            (p_hat - p_exact).abs() < 3.0 * se,
            "rejection rate {p_hat} vs exact {p_exact} (3se = {})",
            3.0 * se
        );
    }

    #[test]
    fn empirical_mse_is_reproducible_across_thread_counts() {
        let d = make_normal();
        let mut config = SimConfig::new(10, 0.5, 20260808);
        config.runs = 2000;
        let pool1 = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let pool4 = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let r1 = pool1.install(|| empirical_mse(&config, &d)).unwrap();
        let r4 = pool4.install(|| empirical_mse(&config, &d)).unwrap();
        assert_eq!(r1, r4);
    }

    #[test]
    fn single_run_has_degenerate_interval() {
        let d = make_normal();
        let mut config = SimConfig::new(5, 0.0, 3);
        config.runs = 1;
        let r = empirical_mse(&config, &d).unwrap();
        assert_eq!(r.runs_used, 1);
        assert_eq!(r.ci_lo, r.value);
        assert_eq!(r.ci_hi, r.value);
    }

    #[test]
    fn ideal_runs_concentrate_near_exact_value() {
        // r=0, n=5: 40000 pooled ideal runs; CI half-width comparable to the
        // published +/- 0.04 and the interval contains the exact 1.4342
        let d = make_normal();
        let mut config = SimConfig::new(5, 0.0, 1234);
        config.runs = 40_000;
        let r = empirical_mse(&config, &d).unwrap();
        let hw = 0.5 * (r.ci_hi - r.ci_lo);
        assert!(hw > 0.005 && hw < 0.08, "half width {hw}");
        assert!(r.ci_lo <= 1.4342 && 1.4342 <= r.ci_hi, "CI [{}, {}]", r.ci_lo, r.ci_hi);
    }

    #[test]
    fn paired_midpoint_beats_randomized() {
        let d = make_normal();
        let n = 10u64;
        let config = SimConfig::new(n, 0.0, 555);
        let runs = 100_000u64;
        let (mut sum_mid, mut sum_rnd) = (0.0, 0.0);
        for j in 0..runs {
            let mut rng = stream_rng(555, j);
            let sample = draw_sample(&config, &d, &mut rng).unwrap();
            let mid = apply_variant(&sample, MedianVariant::Midpoint, &d, &mut rng).unwrap();
            let rnd = apply_variant(&sample, MedianVariant::Randomized, &d, &mut rng).unwrap();
            sum_mid += mid * mid;
            sum_rnd += rnd * rnd;
        }
        assert!(sum_mid <= sum_rnd, "averaging cannot lose to randomization on paired samples");
    }

    #[test]
    fn breakdown_demo_exceeds_target() {
        let d = make_normal();
        let (n, r, c) = (5u64, 0.5, 1000.0);
        let demo = breakdown_demo(&d, n, r, c, 10_000, 77).unwrap();
        // p_5 = P(Bin(5, 0.2236) >= 3) via closed-form sum
        let p = 0.5 / 5f64.sqrt();
        let q = 1.0 - p;
        let p5 = 10.0 * p.powi(3) * q * q + 5.0 * p.powi(4) * q + p.powi(5);
        assert!((demo.p_n - p5).abs() < 1e-12);
        assert!((demo.x0 - (c / p5).sqrt()).abs() < 1e-9);
        // unthinned risk blows past n*C (up to statistical margin)
        assert!(
            demo.empirical_n_mse > 0.8 * n as f64 * c,
            "unthinned n*MSE {} should exceed ~{}",
            demo.empirical_n_mse,
            n as f64 * c
        );
        // the thinned run with the same contamination point stays bounded
        let mut thinned = SimConfig::new(n, r, 77);
        thinned.contamination = ContaminationLaw::Dirac(demo.x0);
        thinned.runs = 10_000;
        let tr = empirical_mse(&thinned, &d).unwrap();
        assert!(tr.value < 10.0, "thinned n*MSE {} must stay near the exact 3.04", tr.value);
        // the unthinned risk scales like C
        let demo4 = breakdown_demo(&d, n, r, 4.0 * c, 10_000, 77).unwrap();
        let ratio = demo4.empirical_n_mse / demo.empirical_n_mse;
        assert!((3.0..5.0).contains(&ratio), "risk should grow like C, ratio {ratio}");
    }
}
