//! `spreadtime` command-line tool.
//!
//! Every table command writes CSV (or JSON with `--format json`). With
//! `--out FILE` a JSON sidecar holding the parameters and library version is
//! written next to it, at `FILE` with the extension replaced by `.json`.
//!
//! Exit codes: 0 success, 2 invalid input, 3 infeasible request, 4 numerical
//! failure. Errors are reported on standard error as a JSON object.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use spreadtime::analysis::{min_seeds_for_bound, SpreadDistribution};
use spreadtime::closedform::{
    guaranteed_time_bounds, homog_mean_completion, homog_variance, noncoop_ccdf, noncoop_mean,
    noncoop_variance,
};
use spreadtime::contribution::{contribution_table, Removal};
use spreadtime::hetero::{gamma_region, GridSpec};
use spreadtime::model::{target_count, NetworkSpec};
use spreadtime::sim::{
    ks_critical_value, ks_distance_batch, simulate_completion, SimConfig, SpreadModel,
};
use spreadtime::trace::{
    estimate_spec, generate_trace, parse_grouping, parse_trace, synthetic_grouping, write_grouping,
    write_trace, DurationModel, Grouping, TraceFormat,
};
use spreadtime::SpreadError;

#[derive(Parser)]
#[command(
    name = "spreadtime",
    version,
    about = "Completion-time guarantees for SI information spread"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct OutputArgs {
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Args, Clone)]
struct SpecArgs {
    /// Network spec JSON file.
    #[arg(long)]
    spec: PathBuf,
    /// Total seed count, filled into groups in order; overrides the spec.
    #[arg(long)]
    seeds: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// CDF and survival of the completion time on a time grid.
    Cdf {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        alpha: f64,
        /// Comma-separated times in hours.
        #[arg(long, value_delimiter = ',', required = true)]
        t: Vec<f64>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Guaranteed time, mean and their ratio for every (alpha, beta, seeds).
    Guarantee {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<f64>,
        #[arg(long, value_delimiter = ',', required = true)]
        beta: Vec<f64>,
        /// Total seed counts to try instead of the spec's seeds.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<usize>,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Raw moments of the completion time.
    Moments {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 3)]
        max_order: u32,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Monte Carlo samples of the completion time.
    Simulate {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        alpha: f64,
        #[arg(long, default_value_t = 10_000)]
        replications: usize,
        #[arg(long, default_value_t = 1)]
        rng_seed: u64,
        /// Only the initial seeds forward the information.
        #[arg(long)]
        non_cooperative: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Two-community sweep over intra/inter rate ratios.
    HeteroSweep {
        #[arg(long)]
        mean_rate: f64,
        /// Total population, split evenly between the two groups.
        #[arg(long)]
        n: usize,
        #[arg(long, value_delimiter = ',', required = true)]
        alpha: Vec<f64>,
        #[arg(long)]
        beta: f64,
        #[arg(long, default_value_t = 0.0)]
        grid_min: f64,
        #[arg(long, default_value_t = 20.0)]
        grid_max: f64,
        #[arg(long, default_value_t = 41)]
        grid_points: usize,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Estimate a network spec from a contact trace.
    Estimate {
        /// Trace CSV with header node_a,node_b,start_s,end_s.
        #[arg(long)]
        trace: PathBuf,
        /// Grouping CSV with header node,group; one group when absent.
        #[arg(long)]
        grouping: Option<PathBuf>,
        /// Time a data transfer needs, seconds.
        #[arg(long)]
        transfer_time: f64,
        /// Observation horizon, seconds; the last contact end when absent.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Smallest seed count or rate scale meeting a time bound.
    Plan {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        /// Time bound in hours.
        #[arg(long)]
        t_bound: f64,
        #[arg(long, value_enum)]
        mode: PlanMode,
        /// Order in which groups receive seeds; 0,1,... when absent.
        #[arg(long, value_delimiter = ',')]
        priority: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Closed-form results next to the matrix method for one homogeneous group.
    Oracle {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seeds: usize,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.99)]
        beta: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Per-group contribution of a single node.
    Contribution {
        #[command(flatten)]
        spec: SpecArgs,
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        #[arg(long, value_enum, default_value = "non-seed")]
        removal: RemovalArg,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Synthetic contact trace with Poisson meetings at the spec's base rates.
    GenTrace {
        #[command(flatten)]
        spec: SpecArgs,
        /// Horizon in hours.
        #[arg(long)]
        horizon: f64,
        /// Mean of exponential contact durations, seconds.
        #[arg(long, conflicts_with = "fixed_duration")]
        duration_mean: Option<f64>,
        /// Constant contact duration, seconds.
        #[arg(long)]
        fixed_duration: Option<f64>,
        #[arg(long, default_value_t = 1)]
        rng_seed: u64,
        /// Also write the node,group CSV here.
        #[arg(long)]
        grouping_out: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlanMode {
    Seeds,
    Rate,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RemovalArg {
    NonSeed,
    Seed,
}

/// Rows of a result table; cells are JSON scalars.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(header: Vec<&'static str>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Value>) {
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r
                .iter()
                .map(|v| match v {
                    Value::String(x) => x.clone(),
                    Value::Null => String::new(),
                    other => other.to_string(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|r| {
                    Value::Object(
                        self.header
                            .iter()
                            .zip(r)
                            .map(|(h, v)| (h.to_string(), v.clone()))
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

/// JSON number, or null when not finite.
fn num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

fn write_target(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn meta(command: &str, parameters: Value) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "parameters": parameters,
    })
}

fn emit(output: &OutputArgs, table: &Table, meta: Value) -> Result<()> {
    match output.format {
        Format::Csv => {
            write_target(output.out.as_deref(), &table.to_csv())?;
            if let Some(p) = &output.out {
                let side = sidecar_path(p);
                fs::write(&side, serde_json::to_string_pretty(&meta)? + "\n")
                    .with_context(|| format!("writing {}", side.display()))?;
            }
        }
        Format::Json => {
            let doc = json!({ "meta": meta, "rows": table.to_json() });
            write_target(
                output.out.as_deref(),
                &(serde_json::to_string_pretty(&doc)? + "\n"),
            )?;
        }
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, doc: &Value) -> Result<()> {
    write_target(out, &(serde_json::to_string_pretty(doc)? + "\n"))
}

fn read_spec(path: &Path) -> Result<NetworkSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec = NetworkSpec::from_json(&text)?;
    spec.ensure_valid()?;
    Ok(spec)
}

/// `spec` with `total` seeds filled into groups in order.
fn with_total_seeds(spec: &NetworkSpec, total: usize) -> Result<NetworkSpec> {
    if total > spec.population() {
        return Err(SpreadError::InvalidParameter(format!(
            "{total} seeds exceed the population {}",
            spec.population()
        ))
        .into());
    }
    let mut left = total;
    let seeds: Vec<usize> = spec
        .groups
        .iter()
        .map(|g| {
            let take = left.min(g.size);
            left -= take;
            take
        })
        .collect();
    let s = spec.with_seeds(&seeds);
    s.ensure_valid()?;
    Ok(s)
}

fn load(args: &SpecArgs) -> Result<NetworkSpec> {
    let spec = read_spec(&args.spec)?;
    match args.seeds {
        Some(s) => with_total_seeds(&spec, s),
        None => Ok(spec),
    }
}

fn spec_params(args: &SpecArgs) -> Value {
    json!({ "spec": args.spec.display().to_string(), "seeds": args.seeds })
}

fn cmd_cdf(spec: &SpecArgs, alpha: f64, ts: &[f64], output: &OutputArgs) -> Result<()> {
    let net = load(spec)?;
    let dist = SpreadDistribution::new(&net, alpha)?;
    let cdf = dist.cdf_many(ts)?;
    let mut table = Table::new(vec!["t", "cdf", "survival"]);
    for (t, c) in ts.iter().zip(cdf) {
        table.push(vec![num(*t), num(c), num(1.0 - c)]);
    }
    let mut params = spec_params(spec);
    params["alpha"] = num(alpha);
    params["t"] = json!(ts);
    emit(output, &table, meta("cdf", params))
}

fn cmd_guarantee(
    path: &Path,
    alphas: &[f64],
    betas: &[f64],
    seeds: &[usize],
    output: &OutputArgs,
) -> Result<()> {
    let base = read_spec(path)?;
    let variants: Vec<NetworkSpec> = if seeds.is_empty() {
        vec![base.clone()]
    } else {
        seeds
            .iter()
            .map(|&s| with_total_seeds(&base, s))
            .collect::<Result<_>>()?
    };
    let mut table = Table::new(vec!["alpha", "beta", "seeds", "G", "mean", "ratio"]);
    for net in &variants {
        for &alpha in alphas {
            let dist = SpreadDistribution::new(net, alpha)?;
            let mean = dist.mean()?;
            for &beta in betas {
                table.push(vec![
                    num(alpha),
                    num(beta),
                    json!(net.total_seeds()),
                    num(dist.guaranteed_time(beta)?),
                    num(mean),
                    num(dist.ratio(beta)?),
                ]);
            }
        }
    }
    let params = json!({
        "spec": path.display().to_string(),
        "alpha": alphas,
        "beta": betas,
        "seeds": seeds,
    });
    emit(output, &table, meta("guarantee", params))
}

fn cmd_moments(spec: &SpecArgs, alpha: f64, max_order: u32, output: &OutputArgs) -> Result<()> {
    let net = load(spec)?;
    let dist = SpreadDistribution::new(&net, alpha)?;
    let mut table = Table::new(vec!["order", "moment"]);
    for n in 1..=max_order {
        table.push(vec![json!(n), num(dist.moment(n)?)]);
    }
    let mut params = spec_params(spec);
    params["alpha"] = num(alpha);
    params["max_order"] = json!(max_order);
    let mut m = meta("moments", params);
    m["variance"] = num(dist.variance()?);
    m["decay_rate"] = num(dist.decay_rate());
    emit(output, &table, m)
}

fn cmd_simulate(
    spec: &SpecArgs,
    alpha: f64,
    replications: usize,
    rng_seed: u64,
    non_cooperative: bool,
    output: &OutputArgs,
) -> Result<()> {
    let net = load(spec)?;
    let mut config = SimConfig::new(replications, rng_seed);
    if non_cooperative {
        config = config.non_cooperative();
    }
    let samples = simulate_completion(&net, alpha, &config)?;
    // analytic reference: the chain for the cooperative model, the closed
    // form for the single-seed, single-group, full-penetration baseline
    let ks = match config.model {
        SpreadModel::Cooperative => {
            let dist = SpreadDistribution::new(&net, alpha)?;
            Some(ks_distance_batch(&samples, |ts| dist.cdf_many(ts))?)
        }
        SpreadModel::NonCooperative
            if net.num_groups() == 1
                && net.total_seeds() == 1
                && target_count(alpha, net.population())? == net.population() =>
        {
            let (n, lambda) = (
                net.population(),
                net.rates.get(0, 0) * net.groups[0].infectivity * net.groups[0].susceptibility,
            );
            Some(ks_distance_batch(&samples, |ts| {
                ts.iter()
                    .map(|&t| noncoop_ccdf(n, lambda, t).map(|s| 1.0 - s))
                    .collect()
            })?)
        }
        SpreadModel::NonCooperative => None,
    };
    let mut table = Table::new(vec!["completion_time_h"]);
    for &x in &samples.samples {
        table.push(vec![num(x)]);
    }
    let mut params = spec_params(spec);
    params["alpha"] = num(alpha);
    params["replications"] = json!(replications);
    params["rng_seed"] = json!(rng_seed);
    params["model"] = json!(config.model);
    let mut m = meta("simulate", params);
    m["summary"] = json!({
        "fingerprint": samples.fingerprint,
        "mean": num(samples.mean()),
        "variance": if samples.len() > 1 { num(samples.variance()) } else { Value::Null },
        "ks_distance": ks.map(num),
        "ks_critical_99": num(ks_critical_value(samples.len(), 1.63)),
    });
    emit(output, &table, m)
}

fn cmd_hetero(
    mean_rate: f64,
    n: usize,
    alphas: &[f64],
    beta: f64,
    grid: GridSpec,
    output: &OutputArgs,
) -> Result<()> {
    let mut table = Table::new(vec!["alpha", "gamma1", "gamma2", "delta_G", "member"]);
    let mut homogeneous = Vec::new();
    for &alpha in alphas {
        let region = gamma_region(mean_rate, n, alpha, beta, &grid)?;
        homogeneous.push(json!({ "alpha": alpha, "G": num(region.homogeneous_time) }));
        for (i, g1) in region.gamma1_values.iter().enumerate() {
            for (j, g2) in region.gamma2_values.iter().enumerate() {
                table.push(vec![
                    num(alpha),
                    num(*g1),
                    num(*g2),
                    num(region.delta_g[i][j]),
                    json!(u8::from(region.membership[i][j])),
                ]);
            }
        }
    }
    let params = json!({
        "mean_rate": mean_rate,
        "n": n,
        "alpha": alphas,
        "beta": beta,
        "gamma1": grid.gamma1,
        "gamma2": grid.gamma2,
    });
    let mut m = meta("hetero-sweep", params);
    m["homogeneous"] = Value::Array(homogeneous);
    emit(output, &table, m)
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).with_context(|| format!("reading {}", path.display()))
}

fn cmd_estimate(
    trace: &Path,
    grouping: Option<&Path>,
    transfer_time: f64,
    horizon: Option<f64>,
    out: Option<&Path>,
) -> Result<()> {
    let records = parse_trace(open(trace)?, TraceFormat::default())?;
    if records.is_empty() {
        return Err(SpreadError::InvalidParameter("trace has no contacts".into()).into());
    }
    let grouping = match grouping {
        Some(p) => parse_grouping(open(p)?)?,
        None => {
            let mut nodes = std::collections::BTreeMap::new();
            for r in &records {
                nodes.insert(r.node_a.clone(), 0);
                nodes.insert(r.node_b.clone(), 0);
            }
            Grouping::new(nodes)?
        }
    };
    let horizon = horizon.unwrap_or_else(|| records.iter().map(|r| r.end).fold(0.0, f64::max));
    let spec = estimate_spec(&records, &grouping, horizon, transfer_time)?;
    emit_json(out, &serde_json::to_value(&spec)?)
}

fn cmd_plan(
    spec: &SpecArgs,
    alpha: f64,
    beta: f64,
    t_bound: f64,
    mode: PlanMode,
    priority: &[usize],
    out: Option<&Path>,
) -> Result<()> {
    let net = load(spec)?;
    let answer = match mode {
        PlanMode::Seeds => {
            let priority: Vec<usize> = if priority.is_empty() {
                (0..net.num_groups()).collect()
            } else {
                priority.to_vec()
            };
            let seeds = min_seeds_for_bound(&net, &priority, alpha, beta, t_bound)?;
            let g =
                SpreadDistribution::new(&net.with_seeds(&seeds), alpha)?.guaranteed_time(beta)?;
            json!({
                "mode": "seeds",
                "seeds": seeds,
                "total_seeds": seeds.iter().sum::<usize>(),
                "guaranteed_time": num(g),
            })
        }
        PlanMode::Rate => {
            let dist = SpreadDistribution::new(&net, alpha)?;
            if dist.is_trivial() {
                return Err(SpreadError::Infeasible(
                    "seeds already meet the target; no rate to scale".into(),
                )
                .into());
            }
            let gamma = dist.rate_scale_for_bound(beta, t_bound)?;
            json!({
                "mode": "rate",
                "rate_scale": num(gamma),
                "current_guaranteed_time": num(dist.guaranteed_time(beta)?),
            })
        }
    };
    let mut params = spec_params(spec);
    params["alpha"] = num(alpha);
    params["beta"] = num(beta);
    params["t_bound"] = num(t_bound);
    let mut doc = meta("plan", params);
    doc["answer"] = answer;
    emit_json(out, &doc)
}

fn rel_diff(a: f64, b: f64) -> Value {
    if a == b {
        num(0.0)
    } else {
        num((a - b).abs() / b.abs().max(a.abs()))
    }
}

fn cmd_oracle(
    n: usize,
    seeds: usize,
    lambda: f64,
    alpha: f64,
    beta: f64,
    output: &OutputArgs,
) -> Result<()> {
    let spec = NetworkSpec::homogeneous(n, seeds, lambda)?;
    let dist = SpreadDistribution::new(&spec, alpha)?;
    let mut table = Table::new(vec!["quantity", "closed_form", "matrix", "rel_diff"]);
    let mean = homog_mean_completion(n, seeds, lambda, alpha)?;
    let var = homog_variance(n, seeds, lambda, alpha)?;
    let (m, v) = (dist.mean()?, dist.variance()?);
    table.push(vec![json!("mean"), num(mean), num(m), rel_diff(m, mean)]);
    table.push(vec![json!("variance"), num(var), num(v), rel_diff(v, var)]);
    let g = dist.guaranteed_time(beta)?;
    if seeds == 1 && target_count(alpha, n)? == n && beta < 1.0 {
        let (lo, hi) = guaranteed_time_bounds(n, lambda, beta)?;
        table.push(vec![
            json!("guaranteed_time_lower_bound"),
            num(lo),
            num(g),
            Value::Null,
        ]);
        table.push(vec![
            json!("guaranteed_time_upper_bound"),
            num(hi),
            num(g),
            Value::Null,
        ]);
    }
    table.push(vec![
        json!("noncooperative_mean"),
        num(noncoop_mean(n, lambda)?),
        Value::Null,
        Value::Null,
    ]);
    table.push(vec![
        json!("noncooperative_variance"),
        num(noncoop_variance(n, lambda)?),
        Value::Null,
        Value::Null,
    ]);
    let params = json!({ "n": n, "seeds": seeds, "lambda": lambda, "alpha": alpha, "beta": beta });
    emit(output, &table, meta("oracle", params))
}

fn cmd_contribution(
    spec: &SpecArgs,
    alpha: f64,
    beta: f64,
    removal: RemovalArg,
    output: &OutputArgs,
) -> Result<()> {
    let net = load(spec)?;
    let removal = match removal {
        RemovalArg::NonSeed => Removal::NonSeed,
        RemovalArg::Seed => Removal::Seed,
    };
    let rows = contribution_table(&net, alpha, beta, removal)?;
    let mut table = Table::new(vec![
        "group",
        "removal",
        "target",
        "G_without",
        "G_with",
        "ratio",
    ]);
    for c in rows {
        table.push(vec![
            json!(c.group),
            json!(c.removal),
            json!(c.target),
            num(c.without),
            num(c.with),
            num(c.ratio),
        ]);
    }
    let mut params = spec_params(spec);
    params["alpha"] = num(alpha);
    params["beta"] = num(beta);
    emit(output, &table, meta("contribution", params))
}

#[allow(clippy::too_many_arguments)]
fn cmd_gen_trace(
    spec: &SpecArgs,
    horizon_h: f64,
    duration_mean: Option<f64>,
    fixed_duration: Option<f64>,
    rng_seed: u64,
    grouping_out: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let net = load(spec)?;
    let durations = match (duration_mean, fixed_duration) {
        (Some(mean_s), _) => DurationModel::Exponential { mean_s },
        (None, Some(seconds)) => DurationModel::Fixed { seconds },
        (None, None) => DurationModel::default(),
    };
    let valid = match durations {
        DurationModel::Exponential { mean_s } => mean_s > 0.0 && mean_s.is_finite(),
        DurationModel::Fixed { seconds } => seconds >= 0.0 && seconds.is_finite(),
    };
    if !valid {
        bail!(SpreadError::InvalidParameter(
            "contact duration must be positive and finite".into()
        ));
    }
    let records = generate_trace(&net, horizon_h * 3600.0, durations, rng_seed)?;
    let mut buf = Vec::new();
    write_trace(&records, &mut buf)?;
    write_target(out, std::str::from_utf8(&buf)?)?;
    if let Some(p) = grouping_out {
        let mut g = Vec::new();
        write_grouping(&synthetic_grouping(&net), &mut g)?;
        fs::write(p, g).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = out {
        let mut params = spec_params(spec);
        params["horizon_h"] = num(horizon_h);
        params["rng_seed"] = json!(rng_seed);
        params["durations"] = serde_json::to_value(durations)?;
        let mut m = meta("gen-trace", params);
        m["records"] = json!(records.len());
        fs::write(sidecar_path(p), serde_json::to_string_pretty(&m)? + "\n")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Cdf {
            spec,
            alpha,
            t,
            output,
        } => cmd_cdf(&spec, alpha, &t, &output),
        Command::Guarantee {
            spec,
            alpha,
            beta,
            seeds,
            output,
        } => cmd_guarantee(&spec, &alpha, &beta, &seeds, &output),
        Command::Moments {
            spec,
            alpha,
            max_order,
            output,
        } => cmd_moments(&spec, alpha, max_order, &output),
        Command::Simulate {
            spec,
            alpha,
            replications,
            rng_seed,
            non_cooperative,
            output,
        } => cmd_simulate(
            &spec,
            alpha,
            replications,
            rng_seed,
            non_cooperative,
            &output,
        ),
        Command::HeteroSweep {
            mean_rate,
            n,
            alpha,
            beta,
            grid_min,
            grid_max,
            grid_points,
            output,
        } => cmd_hetero(
            mean_rate,
            n,
            &alpha,
            beta,
            GridSpec::uniform(grid_min, grid_max, grid_points),
            &output,
        ),
        Command::Estimate {
            trace,
            grouping,
            transfer_time,
            horizon,
            out,
        } => cmd_estimate(
            &trace,
            grouping.as_deref(),
            transfer_time,
            horizon,
            out.as_deref(),
        ),
        Command::Plan {
            spec,
            alpha,
            beta,
            t_bound,
            mode,
            priority,
            out,
        } => cmd_plan(&spec, alpha, beta, t_bound, mode, &priority, out.as_deref()),
        Command::Oracle {
            n,
            seeds,
            lambda,
            alpha,
            beta,
            output,
        } => cmd_oracle(n, seeds, lambda, alpha, beta, &output),
        Command::Contribution {
            spec,
            alpha,
            beta,
            removal,
            output,
        } => cmd_contribution(&spec, alpha, beta, removal, &output),
        Command::GenTrace {
            spec,
            horizon,
            duration_mean,
            fixed_duration,
            rng_seed,
            grouping_out,
            out,
        } => cmd_gen_trace(
            &spec,
            horizon,
            duration_mean,
            fixed_duration,
            rng_seed,
            grouping_out.as_deref(),
            out.as_deref(),
        ),
    }
}

/// Exit code and error kind for a failure.
fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    match err.downcast_ref::<SpreadError>() {
        Some(e) => match e {
            SpreadError::Infeasible(_) => (3, "infeasible"),
            SpreadError::NoFeasibleTransfer(_) => (3, "no_feasible_transfer"),
            SpreadError::Numerical(_) => (4, "numerical"),
            SpreadError::NearDegenerateRates(..) => (4, "near_degenerate_rates"),
            SpreadError::InfiniteMoment(_) => (4, "infinite_moment"),
            SpreadError::InvalidSpec(_) => (2, "invalid_spec"),
            SpreadError::InvalidParameter(_) => (2, "invalid_parameter"),
            SpreadError::TrivialCompletion { .. } => (2, "trivial_completion"),
            SpreadError::DegenerateReachability { .. } => (2, "degenerate_reachability"),
            SpreadError::EmptySamples => (2, "empty_samples"),
            SpreadError::InsufficientContacts(..) => (2, "insufficient_contacts"),
            SpreadError::UnmappedNode(_) => (2, "unmapped_node"),
            SpreadError::Parse { .. } => (2, "parse"),
            SpreadError::Io(_) => (2, "io"),
            SpreadError::Json(_) => (2, "json"),
        },
        None if err.downcast_ref::<std::io::Error>().is_some() => (2, "io"),
        None => (2, "invalid_input"),
    }
}

fn error_json(err: &anyhow::Error) -> (u8, Value) {
    let (code, kind) = classify(err);
    let mut doc = json!({
        "error": kind,
        "message": format!("{err:#}"),
        "exit_code": code,
    });
    match err.downcast_ref::<SpreadError>() {
        Some(SpreadError::InvalidSpec(v)) => doc["violations"] = json!(v),
        Some(SpreadError::Parse { line, .. }) => doc["line"] = json!(line),
        _ => {}
    }
    (code, doc)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, doc) = error_json(&err);
            eprintln!("{doc}");
            ExitCode::from(code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        let code = |e: SpreadError| classify(&anyhow::Error::from(e)).0;
        assert_eq!(code(SpreadError::Numerical("x".into())), 4);
        assert_eq!(code(SpreadError::InfiniteMoment(2)), 4);
        assert_eq!(code(SpreadError::Infeasible("x".into())), 3);
        assert_eq!(code(SpreadError::InvalidSpec(Vec::new())), 2);
        let wrapped =
            anyhow::Error::from(SpreadError::Numerical("x".into())).context("while testing");
        assert_eq!(classify(&wrapped).0, 4);
    }
}
