use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use tvpsvd::bench::{measure_scaling, scaling_fit, write_fit_report, write_timings, Axis, Sampler};
use tvpsvd::config::Config;
use tvpsvd::forecast::{
    cumulative_bf_table, recursive_eval, score_table, write_bf_table, write_score_table, EvalOutput, ModelKind,
};
use tvpsvd::ingest::write_table;
use tvpsvd::mcmc::{
    config_hash, g0_distribution, inefficiency_factor, path_inefficiency, run_chains, ChainExtras, DrawStore,
    Manifest, Summary,
};
use tvpsvd::simulate::{macro_panel, simulate, DgpConfig, DgpKind};
use tvpsvd::{Error, ErrorKind};

#[derive(Debug, Parser)]
#[command(name = "tvpsvd", version, about = "SVD-based Bayesian TVP regressions")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    /// Worker threads for chains and forecast cells.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(short, long, default_value = "out")]
    out: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Validate configuration and data, print the plan, and stop.
    #[arg(long)]
    dry_run: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DgpArg {
    Step,
    Rw,
    /// Price level, a slack measure and two unrelated indicators.
    Macro,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the step-mean or random-walk state-space series.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        dgp: Option<DgpArg>,
        /// Assign t = 86 to the third regime of the step process.
        #[arg(long)]
        close_gap: bool,
    },
    /// Run the sampler and write draws and summaries.
    Estimate {
        #[command(flatten)]
        common: Common,
        /// Drop singular values below the tolerance instead of failing.
        #[arg(long)]
        truncate_svd: bool,
        /// Record component means in increasing order (one regressor only).
        #[arg(long)]
        order_means: bool,
        /// Keep every draw of the coefficient paths.
        #[arg(long)]
        store_paths: bool,
    },
    /// Recursive pseudo out-of-sample evaluation.
    Forecast {
        #[command(flatten)]
        common: Common,
        /// Repeat the evaluation over a grid, e.g. `kappa=0.001,0.01,0.05`
        /// or `groups=5,10,30`.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Time the state-draw kernels over a grid of K (and T).
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated K grid.
        #[arg(long, value_delimiter = ',')]
        k: Option<Vec<usize>>,
        /// Comma-separated T grid.
        #[arg(long, value_delimiter = ',')]
        t: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
        /// Comma-separated sampler names (SVD-block, SVD-lowertri-ridge, FFBS, AWOL).
        #[arg(long, value_delimiter = ',')]
        samplers: Option<Vec<String>>,
    },
}

#[derive(Serialize)]
struct ErrorLine<'a> {
    error: &'a str,
    message: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).format_timestamp(None).init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(&Error::Config(format!("cannot size the worker pool: {e}")));
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(&e),
    }
}

fn fail(e: &Error) -> ExitCode {
    let (name, code) = match e.kind() {
        ErrorKind::Config => ("config", 2),
        ErrorKind::Data => ("data", 3),
        ErrorKind::Numerical => ("numerical", 4),
    };
    let line = serde_json::to_string(&ErrorLine {
        error: name,
        message: e.to_string(),
    })
    .unwrap_or_else(|_| format!("{{\"error\":\"{name}\"}}"));
    eprintln!("{line}");
    ExitCode::from(code)
}

fn run(cmd: Command) -> Result<(), Error> {
    match cmd {
        Command::Simulate { common, dgp, close_gap } => cmd_simulate(&common, dgp, close_gap),
        Command::Estimate {
            common,
            truncate_svd,
            order_means,
            store_paths,
        } => cmd_estimate(&common, truncate_svd, order_means, store_paths),
        Command::Forecast { common, sweep } => cmd_forecast(&common, sweep.as_deref()),
        Command::Bench {
            common,
            k,
            t,
            reps,
            samplers,
        } => cmd_bench(&common, k, t, reps, samplers),
    }
}

/// Configuration with flag overrides applied, plus the directory relative
/// data paths are resolved against.
fn load(common: &Common) -> Result<(Config, PathBuf), Error> {
    let (mut cfg, base) = match &common.config {
        Some(p) => {
            let (c, _) = Config::load(p)?;
            (c, p.parent().map(Path::to_path_buf).unwrap_or_default())
        }
        None => (Config::default(), PathBuf::from(".")),
    };
    if let Some(s) = common.seed {
        cfg.run.seed = s;
        cfg.bench.seed = s;
    }
    Ok((cfg, base))
}

fn resolved_text(cfg: &Config) -> Result<String, Error> {
    toml::to_string(cfg).map_err(|e| Error::Config(format!("cannot serialize the configuration: {e}")))
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn create_file(path: &Path) -> Result<fs::File, Error> {
    fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

#[derive(Serialize)]
struct RunManifest {
    command: &'static str,
    config_hash: String,
    seed: u64,
    versions: BTreeMap<String, String>,
}

fn write_run_manifest(dir: &Path, command: &'static str, text: &str, seed: u64) -> Result<(), Error> {
    let mut versions = BTreeMap::new();
    versions.insert("tvpsvd".to_string(), env!("CARGO_PKG_VERSION").to_string());
    let m = RunManifest {
        command,
        config_hash: config_hash(text),
        seed,
        versions,
    };
    let json = serde_json::to_string_pretty(&m).map_err(|e| Error::Numerical(e.to_string()))?;
    write_text(&dir.join("manifest.json"), &json)?;
    write_text(&dir.join("config.toml"), text)
}

fn cmd_simulate(common: &Common, dgp: Option<DgpArg>, close_gap: bool) -> Result<(), Error> {
    let (mut cfg, _) = load(common)?;
    if let Some(DgpArg::Macro) = dgp {
        let seed = cfg.run.seed;
        if common.dry_run {
            println!("simulate macro panel T={} seed={seed} -> {}", cfg.simulate.t, common.out.display());
            return Ok(());
        }
        let table = macro_panel(cfg.simulate.t, 2, seed)?;
        create_dir(&common.out)?;
        let path = common.out.join("macro.csv");
        write_table(&table, create_file(&path)?, true)?;
        write_run_manifest(&common.out, "simulate", &resolved_text(&cfg)?, seed)?;
        println!("wrote {} periods to {}", cfg.simulate.t, path.display());
        return Ok(());
    }
    if let Some(d) = dgp {
        let preset = match d {
            DgpArg::Step => DgpConfig::step(),
            DgpArg::Rw | DgpArg::Macro => DgpConfig::random_walk(),
        };
        if common.config.is_none() || cfg.simulate.kind != preset.kind {
            cfg.simulate = DgpConfig {
                close_gap: cfg.simulate.close_gap,
                ..preset
            };
        }
    }
    cfg.simulate.close_gap |= close_gap;
    let seed = cfg.run.seed;
    let text = resolved_text(&cfg)?;
    if common.dry_run {
        println!("simulate {:?} T={} seed={seed} -> {}", cfg.simulate.kind, cfg.simulate.t, common.out.display());
        return Ok(());
    }
    let sim = simulate(&cfg.simulate, seed)?;
    create_dir(&common.out)?;
    let name = match cfg.simulate.kind {
        DgpKind::Step => "step.csv",
        DgpKind::RandomWalk => "random_walk.csv",
    };
    write_table(&sim.to_table()?, create_file(&common.out.join(name))?, false)?;
    write_run_manifest(&common.out, "simulate", &text, seed)?;
    println!("wrote {} observations to {}", sim.y.len(), common.out.join(name).display());
    Ok(())
}

fn cmd_estimate(common: &Common, truncate_svd: bool, order_means: bool, store_paths: bool) -> Result<(), Error> {
    let (mut cfg, base) = load(common)?;
    cfg.model.truncate_svd |= truncate_svd;
    cfg.run.order_means |= order_means;
    cfg.run.store_paths |= store_paths;
    cfg.validate()?;
    let prepared = cfg.regression_data(&base)?;
    let model = cfg.build_model(&prepared)?;
    let multipliers = cfg.multiplier_spec(&prepared)?;
    let text = resolved_text(&cfg)?;
    println!(
        "T = {}, K = {}, mode = {:?}, prior = {:?}{}, {} chain(s) x {} draws ({} burn-in)",
        model.t(),
        model.k(),
        model.mode(),
        cfg.prior.family,
        if cfg.prior.clustering { " with clustering" } else { "" },
        cfg.run.chains,
        cfg.run.draws,
        cfg.run.burn_in
    );
    if common.dry_run {
        print!("{text}");
        return Ok(());
    }
    let extras = ChainExtras {
        multipliers,
        ..ChainExtras::default()
    };
    let stores = run_chains(&model, &cfg.run, &extras)?;
    create_dir(&common.out)?;
    write_text(&common.out.join("config.toml"), &text)?;
    for s in &stores {
        let manifest = Manifest::new(&text, s);
        s.write_dir(&common.out.join(format!("chain_{}", s.chain + 1)), &manifest)?;
    }
    let refs: Vec<&DrawStore> = stores.iter().collect();
    let mut stdout = std::io::stdout().lock();
    if let Some(g) = stores[0].groups {
        let p = g0_distribution(&refs, g);
        write_g0_table(&p, &common.out.join("g0_table.csv"))?;
        print_g0_table(&p, g, &mut stdout).map_err(io_stdout)?;
    }
    let rows = inefficiency_rows(&stores)?;
    write_if_table(&rows, &common.out.join("inefficiency.csv"))?;
    print_if_table(&rows, &mut stdout).map_err(io_stdout)?;
    for s in &stores {
        let a = s.acceptance;
        if let Some(r) = a.theta {
            writeln!(stdout, "chain {}: theta acceptance {:.3} (scale {:.3})", s.chain + 1, r, a.theta_scale)
                .map_err(io_stdout)?;
        }
    }
    if let Some(m) = &stores[0].multipliers {
        let bands = m.bands();
        let per_t = m.dim() / stores[0].t.max(1);
        let last = &bands[bands.len() - per_t..];
        writeln!(stdout, "multipliers at the last period (mean [16%, 84%]):").map_err(io_stdout)?;
        let labels = cfg.model.multipliers.as_ref().map(|m| m.horizons.clone()).unwrap_or_default();
        for (b, h) in last.iter().zip(labels) {
            let name = if h == 0 { "long run".to_string() } else { format!("h = {h}") };
            writeln!(stdout, "  {name:>9}: {:.4} [{:.4}, {:.4}]", b.mean, b.lower, b.upper).map_err(io_stdout)?;
        }
    }
    Ok(())
}

fn io_stdout(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn write_g0_table(p: &[f64], path: &Path) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Numerical(e.to_string()))?;
    w.write_record(["g0", "probability"]).map_err(|e| Error::Numerical(e.to_string()))?;
    for (i, v) in p.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])
            .map_err(|e| Error::Numerical(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn print_g0_table(p: &[f64], g: usize, out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "Posterior probabilities for a given number of groups (G = {g})")?;
    write!(out, "{:>6}", "G0 =")?;
    for i in 1..=p.len() {
        write!(out, "{i:>6}")?;
    }
    writeln!(out)?;
    write!(out, "{:>6}", "")?;
    for v in p {
        write!(out, "{v:>6.2}")?;
    }
    writeln!(out)
}

struct IfRow {
    quantity: String,
    summary: Summary,
}

fn inefficiency_rows(stores: &[DrawStore]) -> Result<Vec<IfRow>, Error> {
    let mut rows = Vec::new();
    let mut push = |name: &str, values: Vec<f64>| {
        if let Some(summary) = Summary::of(&values) {
            rows.push(IfRow {
                quantity: name.to_string(),
                summary,
            });
        }
    };
    let scalar = |f: &dyn Fn(&DrawStore) -> Vec<Vec<f64>>| -> Vec<f64> {
        let mut v = Vec::new();
        for s in stores {
            let cols = f(s);
            for c in cols {
                if let Ok(x) = inefficiency_factor(&c) {
                    v.push(x);
                }
            }
        }
        v
    };
    let paths_stored = stores.iter().all(|s| s.beta.draws().is_some());
    if paths_stored {
        let mut b = Vec::new();
        let mut h = Vec::new();
        for s in stores {
            b.extend(path_inefficiency(&s.beta)?);
            h.extend(path_inefficiency(&s.h)?);
        }
        push("beta_t", b);
        push("sigma_t (log)", h);
    }
    push(
        "gamma",
        scalar(&|s| (0..s.k).map(|j| s.gamma.iter().map(|g| g[j]).collect()).collect()),
    );
    push(
        "theta",
        scalar(&|s| {
            let d = s.theta.first().map_or(0, Vec::len);
            (0..d).map(|j| s.theta.iter().map(|g| g[j]).collect()).collect()
        }),
    );
    push(
        "sv (mu, rho, sigma2)",
        scalar(&|s| {
            vec![
                s.sv.iter().map(|r| r.mu).collect(),
                s.sv.iter().map(|r| r.rho).collect(),
                s.sv.iter().map(|r| r.sigma2).collect(),
            ]
        }),
    );
    if !paths_stored {
        log::warn!("coefficient paths were not stored; run with --store-paths for their inefficiency factors");
    }
    Ok(rows)
}

fn write_if_table(rows: &[IfRow], path: &Path) -> Result<(), Error> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Numerical(e.to_string()))?;
    let err = |e: csv::Error| Error::Numerical(e.to_string());
    w.write_record(["quantity", "mean", "median", "min", "max", "p05", "p95"]).map_err(err)?;
    for r in rows {
        let s = r.summary;
        w.write_record([
            r.quantity.clone(),
            s.mean.to_string(),
            s.median.to_string(),
            s.min.to_string(),
            s.max.to_string(),
            s.p05.to_string(),
            s.p95.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn print_if_table(rows: &[IfRow], out: &mut impl Write) -> std::io::Result<()> {
    writeln!(out, "Inefficiency factors")?;
    writeln!(
        out,
        "{:<22}{:>9}{:>9}{:>9}{:>9}{:>9}{:>9}",
        "", "mean", "median", "min", "max", "5th", "95th"
    )?;
    for r in rows {
        let s = r.summary;
        writeln!(
            out,
            "{:<22}{:>9.2}{:>9.2}{:>9.2}{:>9.2}{:>9.2}{:>9.2}",
            r.quantity, s.mean, s.median, s.min, s.max, s.p05, s.p95
        )?;
    }
    Ok(())
}

/// A `name=v1,v2,...` grid over one prior setting.
#[derive(Debug, Clone, PartialEq)]
enum Sweep {
    Kappa(Vec<f64>),
    Groups(Vec<usize>),
}

fn parse_sweep(s: &str) -> Result<Sweep, Error> {
    let (key, values) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("sweep {s:?} must look like name=v1,v2")))?;
    let bad = |v: &str| Error::Config(format!("sweep value {v:?} is not a number"));
    match key.trim() {
        "kappa" => values
            .split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| bad(v)))
            .collect::<Result<_, _>>()
            .map(Sweep::Kappa),
        "groups" | "G" => values
            .split(',')
            .map(|v| v.trim().parse::<usize>().map_err(|_| bad(v)))
            .collect::<Result<_, _>>()
            .map(Sweep::Groups),
        other => Err(Error::Config(format!("cannot sweep over {other:?} (kappa or groups)"))),
    }
}

/// Configurations of a sweep, labelled for their output directories.
fn sweep_configs(cfg: &Config, sweep: &Sweep) -> Vec<(String, Config)> {
    let apply = |f: &dyn Fn(&mut tvpsvd::priors::PriorSpec)| {
        let mut c = cfg.clone();
        f(&mut c.prior);
        if let Some(e) = c.eval.as_mut() {
            for m in e.models.iter_mut() {
                match &mut m.kind {
                    ModelKind::Svd { prior, .. } | ModelKind::RwTvp { prior } => f(prior),
                    ModelKind::RandomWalk => {}
                }
            }
        }
        c
    };
    match sweep {
        Sweep::Kappa(v) => v
            .iter()
            .map(|&k| (format!("kappa_{k}"), apply(&|p| p.kappa = k)))
            .collect(),
        Sweep::Groups(v) => v
            .iter()
            .map(|&g| (format!("groups_{g}"), apply(&|p| p.mixture.groups = g)))
            .collect(),
    }
}

fn cmd_forecast(common: &Common, sweep: Option<&str>) -> Result<(), Error> {
    let (cfg, base) = load(common)?;
    let runs = match sweep {
        Some(s) => sweep_configs(&cfg, &parse_sweep(s)?),
        None => vec![(String::new(), cfg)],
    };
    for (_, c) in &runs {
        c.validate()?;
        if let Some(e) = &c.eval {
            for m in &e.models {
                if let ModelKind::Svd { mode, prior, .. } = &m.kind {
                    prior.validate(*mode)?;
                }
            }
        }
    }
    for (label, c) in runs {
        let (eval, input) = c.eval_input(&base)?;
        let out = if label.is_empty() { common.out.clone() } else { common.out.join(&label) };
        let text = resolved_text(&c)?;
        println!(
            "{}{} model(s), horizons {:?}, {} design rows, hold-out from origin {}",
            if label.is_empty() { String::new() } else { format!("[{label}] ") },
            eval.models.len(),
            eval.horizons,
            input.design.rows.len(),
            eval.holdout_start
        );
        if common.dry_run {
            continue;
        }
        let result = recursive_eval(&eval, &c.run, &input)?;
        create_dir(&out)?;
        write_run_manifest(&out, "forecast", &text, c.run.seed)?;
        write_forecast_outputs(&result, &eval, &out)?;
    }
    Ok(())
}

fn write_forecast_outputs(result: &EvalOutput, eval: &tvpsvd::forecast::EvalConfig, out: &Path) -> Result<(), Error> {
    let rows = score_table(&result.records, eval.benchmark.as_deref(), eval.harvey)?;
    write_score_table(&rows, create_file(&out.join("scores.csv"))?)?;
    if let Some(b) = &eval.benchmark {
        let bf = cumulative_bf_table(&result.records, b)?;
        write_bf_table(&bf, create_file(&out.join("bayes_factors.csv"))?)?;
    }
    let path = out.join("forecasts.csv");
    let mut w = csv::Writer::from_writer(create_file(&path)?);
    let err = |e: csv::Error| Error::Numerical(e.to_string());
    w.write_record(["model", "horizon", "origin", "realized", "point", "lpl"]).map_err(err)?;
    for r in &result.records {
        w.write_record([
            r.model.clone(),
            r.horizon.to_string(),
            r.origin.to_string(),
            r.realized.to_string(),
            r.point().to_string(),
            r.lpl()?.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Io { path, source: e })?;
    if !result.failures.is_empty() {
        let path = out.join("failures.csv");
        let mut w = csv::Writer::from_writer(create_file(&path)?);
        w.write_record(["model", "horizon", "origin", "message"]).map_err(err)?;
        for f in &result.failures {
            w.write_record([f.model.clone(), f.horizon.to_string(), f.origin.to_string(), f.message.clone()])
                .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Io { path, source: e })?;
    }
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{:<20}{:>4}{:>5}{:>10}{:>10}{:>6}{:>10}{:>6}", "model", "h", "n", "rmse", "rel", "", "lpl", "")
        .map_err(io_stdout)?;
    for r in &rows {
        writeln!(
            stdout,
            "{:<20}{:>4}{:>5}{:>10.4}{:>10}{:>6}{:>10.3}{:>6}",
            r.model,
            r.horizon,
            r.n,
            r.rmse,
            r.rel_rmse.map_or("-".to_string(), |v| format!("{v:.3}")),
            r.rmse_stars,
            r.lpl_mean,
            r.lpl_stars
        )
        .map_err(io_stdout)?;
    }
    if !result.failures.is_empty() {
        writeln!(stdout, "{} forecast cell(s) failed; see failures.csv", result.failures.len()).map_err(io_stdout)?;
    }
    Ok(())
}

fn cmd_bench(
    common: &Common,
    k: Option<Vec<usize>>,
    t: Option<Vec<usize>>,
    reps: Option<usize>,
    samplers: Option<Vec<String>>,
) -> Result<(), Error> {
    let (mut cfg, _) = load(common)?;
    if let Some(k) = k {
        cfg.bench.k = k;
    }
    if let Some(t) = t {
        cfg.bench.t = t;
    }
    if let Some(r) = reps {
        cfg.bench.reps = r;
    }
    if let Some(s) = samplers {
        cfg.bench.samplers = s.iter().map(|x| Sampler::parse(x)).collect::<Result<_, _>>()?;
    }
    cfg.bench.validate()?;
    let text = resolved_text(&cfg)?;
    let axis = if cfg.bench.k.len() >= cfg.bench.t.len() { Axis::K } else { Axis::T };
    println!(
        "timing {} sampler(s) over K = {:?}, T = {:?}, {} reps",
        cfg.bench.samplers.len(),
        cfg.bench.k,
        cfg.bench.t,
        cfg.bench.reps
    );
    if common.dry_run {
        return Ok(());
    }
    let rows = measure_scaling(&cfg.bench)?;
    create_dir(&common.out)?;
    write_run_manifest(&common.out, "bench", &text, cfg.bench.seed)?;
    write_timings(&rows, create_file(&common.out.join("timings.csv"))?)?;
    let fixed_other = match axis {
        Axis::K => cfg.bench.t.len() == 1,
        Axis::T => cfg.bench.k.len() == 1,
    };
    if fixed_other {
        match scaling_fit(&rows, axis) {
            Ok(fits) => {
                let mut buf = Vec::new();
                write_fit_report(&fits, &mut buf).map_err(io_stdout)?;
                write_text(&common.out.join("scaling_fit.txt"), &String::from_utf8_lossy(&buf))?;
                print!("{}", String::from_utf8_lossy(&buf));
            }
            Err(e) => log::warn!("no scaling fit: {e}"),
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_parsing() {
        assert_eq!(parse_sweep("kappa=0.01,0.05").unwrap(), Sweep::Kappa(vec![0.01, 0.05]));
        assert_eq!(parse_sweep("groups=5,10").unwrap(), Sweep::Groups(vec![5, 10]));
        assert!(parse_sweep("kappa").is_err());
        assert!(parse_sweep("rho=0.1").is_err());
        assert!(parse_sweep("kappa=a").is_err());
    }

    #[test]
    fn sweep_reaches_model_priors() {
        let text = r#"
[eval]
horizons = [1]
holdout_start = 10
models = [{ name = "a", kind = "svd" }, { name = "rw", kind = "random_walk" }]
"#;
        let cfg = Config::from_toml(text).unwrap();
        let runs = sweep_configs(&cfg, &Sweep::Kappa(vec![0.5]));
        assert_eq!(runs[0].0, "kappa_0.5");
        assert_eq!(runs[0].1.prior.kappa, 0.5);
        match &runs[0].1.eval.as_ref().unwrap().models[0].kind {
            ModelKind::Svd { prior, .. } => assert_eq!(prior.kappa, 0.5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
