//! Command line front end: reproduces the benchmark tables and figure data
//! as CSV and exposes one-off risk queries.
//!
//! Output files start with `#`-prefixed manifest lines (command, parameters,
//! seed, version, timestamp) followed by a CSV header; numeric fields are
//! printed in shortest round-trip form, so no precision is lost to
//! formatting. Re-running with identical parameters reproduces every byte
//! except the timestamp line.
//!
//! Exit codes: 0 success, 2 usage error, 3 numerical failure, 4 when a
//! minimal-n search did not reach its criterion (the file is still written).

use std::fmt::Write as _;
use std::fs;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use medrisk::asy::{self, ExpansionOrder, MedianVariant};
use medrisk::dist::make_normal;
use medrisk::exact::{self, ContaminationConfig, QuadratureSpec};
use medrisk::sim::{self, SimConfig};

#[derive(Parser)]
#[command(
    name = "medrisk",
    version,
    about = "Maximal MSE of sample-median variants under shrinking gross-error contamination",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// output file (default: stdout)
    #[arg(long, global = true)]
    out: Option<String>,
    /// relative tolerance of the exact-risk quadrature
    #[arg(long, global = true, default_value_t = 1e-10)]
    tol: f64,
    /// worker threads (default: all cores); results do not depend on it
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// One risk value as a single CSV row
    Risk {
        #[command(flatten)]
        common: CommonOpts,
        /// sample size
        #[arg(long)]
        n: u64,
        /// contamination radius
        #[arg(long)]
        r: f64,
        /// odd | lower | upper | randomized | midpoint | bias-corrected
        #[arg(long)]
        variant: String,
        /// asy0 | asy-half | asy1 | exact | sim
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
    },
    /// Ideal-model accuracy table (exact values and asymptotic errors)
    Table1 {
        #[command(flatten)]
        common: CommonOpts,
        /// comma separated sample sizes, one parity
        #[arg(long = "n-list")]
        n_list: String,
        /// comma separated variants (default by parity)
        #[arg(long)]
        variants: Option<String>,
    },
    /// Simulated / exact / asymptotic comparison over an (n, r) grid
    Table2 {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long = "n-list", default_value = "5,10,30,100")]
        n_list: String,
        #[arg(long = "r-list", default_value = "0,0.1,0.5,1")]
        r_list: String,
        #[arg(long, default_value_t = 10_000)]
        runs: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Minimal n0 with relative error below a threshold from n0 up to a cap
    Table2n {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long, default_value = "0.01,0.05")]
        thresholds: String,
        #[arg(long = "r-list", default_value = "0,0.1,0.25,0.5,1")]
        r_list: String,
        /// comma separated orders: 0 | half | one
        #[arg(long, default_value = "one")]
        orders: String,
        #[arg(long = "n-cap", default_value_t = 200)]
        n_cap: u64,
    },
    /// Relative-error curves n -> (asy - exact)/exact in long CSV format
    Figure1 {
        #[command(flatten)]
        common: CommonOpts,
        #[arg(long = "r-list", default_value = "0,0.1,0.25,0.5,1")]
        r_list: String,
        #[arg(long = "n-min", default_value_t = 3)]
        n_min: u64,
        #[arg(long = "n-max", default_value_t = 100)]
        n_max: u64,
        /// 0 | half | one
        #[arg(long, default_value = "one")]
        order: String,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
    fn numerical(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
}

impl From<exact::ExactError> for Failure {
    fn from(e: exact::ExactError) -> Self {
        match e {
            exact::ExactError::QuadratureFailure { .. } => Failure::numerical(e.to_string()),
            exact::ExactError::NotReached { .. } => Failure { code: 4, message: e.to_string() },
            _ => Failure::usage(e.to_string()),
        }
    }
}

impl From<asy::AsyError> for Failure {
    fn from(e: asy::AsyError) -> Self {
        Failure::usage(e.to_string())
    }
}

impl From<sim::SimError> for Failure {
    fn from(e: sim::SimError) -> Self {
        match e {
            sim::SimError::DegenerateConfig { .. } => Failure::numerical(e.to_string()),
            _ => Failure::usage(e.to_string()),
        }
    }
}

fn parse_variant(s: &str) -> Result<MedianVariant, Failure> {
    Ok(match s {
        "odd" => MedianVariant::OddMedian,
        "lower" => MedianVariant::LowerQuantile,
        "upper" => MedianVariant::UpperQuantile,
        "randomized" => MedianVariant::Randomized,
        "midpoint" => MedianVariant::Midpoint,
        "bias-corrected" => MedianVariant::BiasCorrected,
        other => {
            return Err(Failure::usage(format!(
                "unknown variant `{other}` (expected odd|lower|upper|randomized|midpoint|bias-corrected)"
            )))
        }
    })
}

fn parse_order(s: &str) -> Result<ExpansionOrder, Failure> {
    Ok(match s {
        "0" | "zero" | "asy0" => ExpansionOrder::Zero,
        "half" | "asy-half" => ExpansionOrder::Half,
        "1" | "one" | "asy1" => ExpansionOrder::One,
        other => return Err(Failure::usage(format!("unknown order `{other}` (expected 0|half|one)"))),
    })
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>, Failure> {
    let mut out = Vec::new();
    for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        out.push(
            tok.parse::<T>()
                .map_err(|_| Failure::usage(format!("cannot parse `{tok}` in {what}")))?,
        );
    }
    if out.is_empty() {
        return Err(Failure::usage(format!("{what} must not be empty")));
    }
    Ok(out)
}

/// shortest round-trip decimal form: full precision by construction
fn num(x: f64) -> String {
    format!("{x}")
}

fn quad_spec(tol: f64) -> QuadratureSpec {
    QuadratureSpec { rel_tol: tol, abs_tol: tol * 1e-4, ..QuadratureSpec::default() }
}

fn manifest(command: &str, params: &[(&str, String)]) -> String {
    let mut head = String::new();
    let _ = writeln!(head, "# command: {command}");
    let joined =
        params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ");
    let _ = writeln!(head, "# parameters: {joined}");
    if let Some((_, seed)) = params.iter().find(|(k, _)| *k == "seed") {
        let _ = writeln!(head, "# seed: {seed}");
    }
    let _ = writeln!(head, "# version: medrisk {}", env!("CARGO_PKG_VERSION"));
    let ts = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let _ = writeln!(head, "# timestamp: {ts} (unix seconds)");
    head
}

fn emit(out: &Option<String>, content: &str) -> Result<(), Failure> {
    match out {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => fs::write(path, content)
            .map_err(|e| Failure::numerical(format!("cannot write {path}: {e}"))),
    }
}

fn cmd_risk(
    common: &CommonOpts,
    n: u64,
    r: f64,
    variant: &str,
    method: &str,
    seed: u64,
    runs: u64,
) -> Result<(), Failure> {
    let variant = parse_variant(variant)?;
    if !variant.matches_parity(n) {
        return Err(Failure::usage(format!(
            "variant `{}` does not apply to sample size {n}",
            variant.label()
        )));
    }
    if r < 0.0 {
        return Err(Failure::usage("radius must be >= 0"));
    }
    let dist = make_normal();
    let (value, ci): (f64, Option<(f64, f64)>) = match method {
        "asy0" => (asy::asy_mse(&dist, r, n, variant, ExpansionOrder::Zero)?.value, None),
        "asy-half" => (asy::asy_mse(&dist, r, n, variant, ExpansionOrder::Half)?.value, None),
        "asy1" => (asy::asy_mse(&dist, r, n, variant, ExpansionOrder::One)?.value, None),
        "exact" => {
            let cfg = ContaminationConfig::worst_case(r, exact::worst_side(&dist, r, variant));
            (exact::exact_mse(&dist, &cfg, n, variant, &quad_spec(common.tol))?.value, None)
        }
        "sim" => {
            let mut cfg = SimConfig::new(n, r, seed);
            cfg.runs = runs;
            cfg.variant = Some(variant);
            let er = sim::empirical_mse(&cfg, &dist)?;
            (er.value, Some((er.ci_lo, er.ci_hi)))
        }
        other => {
            return Err(Failure::usage(format!(
                "unknown method `{other}` (expected asy0|asy-half|asy1|exact|sim)"
            )))
        }
    };
    let params = [
        ("n", n.to_string()),
        ("r", num(r)),
        ("variant", variant.label().to_string()),
        ("method", method.to_string()),
        ("seed", seed.to_string()),
        ("runs", runs.to_string()),
        ("tol", num(common.tol)),
    ];
    let mut out = manifest("risk", &params);
    out.push_str("n,r,variant,method,value,ci_lo,ci_hi\n");
    let (lo, hi) = match ci {
        Some((lo, hi)) => (num(lo), num(hi)),
        None => (String::new(), String::new()),
    };
    let _ = writeln!(
        out,
        "{n},{},{},{method},{},{lo},{hi}",
        num(r),
        variant.label(),
        num(value)
    );
    emit(&common.out, &out)
}

fn cmd_table1(common: &CommonOpts, n_list: &str, variants: &Option<String>) -> Result<(), Failure> {
    let ns: Vec<u64> = parse_list(n_list, "--n-list")?;
    let all_odd = ns.iter().all(|n| n % 2 == 1);
    let all_even = ns.iter().all(|n| n % 2 == 0);
    if !all_odd && !all_even {
        return Err(Failure::usage("--n-list must contain a single parity"));
    }
    let variants: Vec<MedianVariant> = match variants {
        Some(list) => parse_list::<String>(list, "--variants")?
            .iter()
            .map(|s| parse_variant(s))
            .collect::<Result<_, _>>()?,
        None if all_odd => vec![MedianVariant::OddMedian],
        None => vec![
            MedianVariant::LowerQuantile,
            MedianVariant::BiasCorrected,
            MedianVariant::Midpoint,
        ],
    };
    for v in &variants {
        for &n in &ns {
            if !v.matches_parity(n) {
                return Err(Failure::usage(format!(
                    "variant `{}` does not apply to sample size {n}",
                    v.label()
                )));
            }
        }
    }
    let dist = make_normal();
    let quad = quad_spec(common.tol);
    let params = [
        ("n-list", n_list.to_string()),
        ("variants", variants.iter().map(|v| v.label()).collect::<Vec<_>>().join(",")),
        ("tol", num(common.tol)),
    ];
    let mut out = manifest("table1", &params);
    out.push_str("variant,n,exact,err12_abs,err12_rel,err3_abs,err3_rel\n");
    for v in &variants {
        for &n in &ns {
            let cfg = ContaminationConfig::worst_case(0.0, exact::worst_side(&dist, 0.0, *v));
            let ex = exact::exact_mse(&dist, &cfg, n, *v, &quad)?.value;
            let a12 = asy::asy_mse(&dist, 0.0, n, *v, ExpansionOrder::Half)?.value;
            let a3 = asy::asy_mse(&dist, 0.0, n, *v, ExpansionOrder::One)?.value;
            let _ = writeln!(
                out,
                "{},{n},{},{},{},{},{}",
                v.label(),
                num(ex),
                num(a12 - ex),
                num((a12 - ex) / ex),
                num(a3 - ex),
                num((a3 - ex) / ex)
            );
        }
    }
    emit(&common.out, &out)
}

fn cmd_table2(
    common: &CommonOpts,
    n_list: &str,
    r_list: &str,
    runs: u64,
    seed: u64,
) -> Result<(), Failure> {
    let ns: Vec<u64> = parse_list(n_list, "--n-list")?;
    let rs: Vec<f64> = parse_list(r_list, "--r-list")?;
    let dist = make_normal();
    let quad = quad_spec(common.tol);
    let params = [
        ("n-list", n_list.to_string()),
        ("r-list", r_list.to_string()),
        ("runs", runs.to_string()),
        ("seed", seed.to_string()),
        ("tol", num(common.tol)),
    ];
    let mut out = manifest("table2", &params);
    out.push_str("n,r,sim,ci_lo,ci_hi,num,asy0,asy_half,asy1\n");
    let mut cell = 0u64;
    for &n in &ns {
        for &r in &rs {
            let variant = exact::default_variant_rule(n);
            let mut sim_cfg = SimConfig::new(n, r, seed.wrapping_add(cell.wrapping_mul(0x9E37_79B9_7F4A_7C15)));
            sim_cfg.runs = runs;
            cell += 1;
            let er = sim::empirical_mse(&sim_cfg, &dist)?;
            let cfg = ContaminationConfig::worst_case(r, exact::worst_side(&dist, r, variant));
            let ex = exact::exact_mse(&dist, &cfg, n, variant, &quad)?.value;
            let a0 = asy::asy_mse(&dist, r, n, variant, ExpansionOrder::Zero)?.value;
            let ah = asy::asy_mse(&dist, r, n, variant, ExpansionOrder::Half)?.value;
            let a1 = asy::asy_mse(&dist, r, n, variant, ExpansionOrder::One)?.value;
            let _ = writeln!(
                out,
                "{n},{},{},{},{},{},{},{},{}",
                num(r),
                num(er.value),
                num(er.ci_lo),
                num(er.ci_hi),
                num(ex),
                num(a0),
                num(ah),
                num(a1)
            );
        }
    }
    emit(&common.out, &out)
}

fn cmd_table2n(
    common: &CommonOpts,
    thresholds: &str,
    r_list: &str,
    orders: &str,
    n_cap: u64,
) -> Result<bool, Failure> {
    let ths: Vec<f64> = parse_list(thresholds, "--thresholds")?;
    let rs: Vec<f64> = parse_list(r_list, "--r-list")?;
    let ords: Vec<ExpansionOrder> = parse_list::<String>(orders, "--orders")?
        .iter()
        .map(|s| parse_order(s))
        .collect::<Result<_, _>>()?;
    if n_cap < 3 {
        return Err(Failure::usage("--n-cap must be at least 3"));
    }
    for &t in &ths {
        if !(0.0 < t && t < 1.0) {
            return Err(Failure::usage("thresholds must lie in (0, 1)"));
        }
    }
    let dist = make_normal();
    let quad = quad_spec(common.tol);
    let params = [
        ("thresholds", thresholds.to_string()),
        ("r-list", r_list.to_string()),
        ("orders", orders.to_string()),
        ("n-cap", n_cap.to_string()),
        ("tol", num(common.tol)),
    ];
    let mut out = manifest("table2n", &params);
    out.push_str("threshold,order,r,n0\n");
    let mut any_not_reached = false;
    for &th in &ths {
        for &order in &ords {
            for &r in &rs {
                let cell = match exact::minimal_n_search(&dist, r, th, order, n_cap, &quad) {
                    Ok(n0) => n0.to_string(),
                    Err(exact::ExactError::NotReached { .. }) => {
                        any_not_reached = true;
                        eprintln!(
                            "warning: criterion {th} at order {} r={r} not reached by n-cap {n_cap}",
                            order.label()
                        );
                        "NA".to_string()
                    }
                    Err(e) => return Err(e.into()),
                };
                let _ = writeln!(out, "{},{},{},{cell}", num(th), order.label(), num(r));
            }
        }
    }
    emit(&common.out, &out)?;
    Ok(any_not_reached)
}

fn cmd_figure1(
    common: &CommonOpts,
    r_list: &str,
    n_min: u64,
    n_max: u64,
    order: &str,
) -> Result<(), Failure> {
    if n_min < 3 {
        return Err(Failure::usage("--n-min must be at least 3"));
    }
    if n_max < n_min {
        return Err(Failure::usage("--n-max must be >= --n-min"));
    }
    let rs: Vec<f64> = parse_list(r_list, "--r-list")?;
    let order = parse_order(order)?;
    let dist = make_normal();
    let quad = quad_spec(common.tol);
    let params = [
        ("r-list", r_list.to_string()),
        ("n-min", n_min.to_string()),
        ("n-max", n_max.to_string()),
        ("order", order.label().to_string()),
        ("tol", num(common.tol)),
    ];
    let mut out = manifest("figure1", &params);
    out.push_str("r,n,rel_error\n");
    for &r in &rs {
        let curve = exact::relative_error_curve(
            &dist,
            r,
            n_min..=n_max,
            exact::default_variant_rule,
            order,
            &quad,
        )?;
        for (n, rel) in curve {
            let _ = writeln!(out, "{},{n},{}", num(r), num(rel));
        }
    }
    emit(&common.out, &out)
}

fn run() -> Result<bool, Failure> {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::Risk { common, .. }
        | Command::Table1 { common, .. }
        | Command::Table2 { common, .. }
        | Command::Table2n { common, .. }
        | Command::Figure1 { common, .. } => common.clone(),
    };
    if common.tol.is_nan() || common.tol < 0.0 {
        return Err(Failure::usage("--tol must be a nonnegative number"));
    }
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(Failure::usage("--threads must be positive"));
        }
        // deterministic results regardless; this only bounds parallelism
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match &cli.command {
        Command::Risk { common, n, r, variant, method, seed, runs } => {
            cmd_risk(common, *n, *r, variant, method, *seed, *runs)?;
            Ok(false)
        }
        Command::Table1 { common, n_list, variants } => {
            cmd_table1(common, n_list, variants)?;
            Ok(false)
        }
        Command::Table2 { common, n_list, r_list, runs, seed } => {
            cmd_table2(common, n_list, r_list, *runs, *seed)?;
            Ok(false)
        }
        Command::Table2n { common, thresholds, r_list, orders, n_cap } => {
            cmd_table2n(common, thresholds, r_list, orders, *n_cap)
        }
        Command::Figure1 { common, r_list, n_min, n_max, order } => {
            cmd_figure1(common, r_list, *n_min, *n_max, order)?;
            Ok(false)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(false) => ExitCode::SUCCESS,
        Ok(true) => ExitCode::from(4),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
