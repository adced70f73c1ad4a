//! Recursive pseudo-out-of-sample evaluation: predictive draws per origin,
//! point and density scores, Diebold-Mariano tests, cumulative log
//! predictive Bayes factors, and ARDL multiplier paths.

use std::collections::BTreeMap;
use std::io::Write;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::baselines::RwTvpModel;
use crate::design::StateMode;
use crate::dist::{ln_normal_pdf, log_sum_exp, std_normal};
use crate::error::{Error, Result};
use crate::ingest::{ColumnTag, Design, RegressionData};
use crate::mcmc::{run_chain, ChainExtras, PredictiveDraw, RunConfig};
use crate::priors::{ColumnMeta, Family, PriorSpec};
use crate::rng::{derive_seed, Streams};
use crate::samplers::{draw_sv_given_obs, FixedBlocks, Model, ModelOptions, SvParams, VolObs, Volatility};

/// Threshold on `|1 − Σ a_l|` below which the long-run multiplier is
/// reported as non-finite.
pub const LONG_RUN_TOL: f64 = 1e-6;

/// Multiplier horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    Steps(usize),
    LongRun,
}

impl Horizon {
    pub fn label(self) -> String {
        match self {
            Horizon::Steps(h) => format!("h{h}"),
            Horizon::LongRun => "long_run".to_string(),
        }
    }
}

/// Columns holding the own lags `a_1..a_p` and the lags `b_1..b_p` of one
/// regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArdlSpec {
    pub own: Vec<usize>,
    pub exog: Vec<usize>,
    pub horizons: Vec<Horizon>,
}

impl ArdlSpec {
    /// Locate the lag columns of exogenous series `series` and of the own
    /// series from the column tags.
    pub fn from_tags(tags: &[ColumnTag], series: usize, horizons: Vec<Horizon>) -> Result<Self> {
        let find = |f: &dyn Fn(&ColumnTag) -> Option<usize>| {
            let mut v: Vec<(usize, usize)> = tags.iter().enumerate().filter_map(|(i, t)| f(t).map(|l| (l, i))).collect();
            v.sort();
            v
        };
        let own = find(&|t| match t {
            ColumnTag::OwnLag { lag } => Some(*lag),
            _ => None,
        });
        let exog = find(&|t| match t {
            ColumnTag::ExogLag { series: s, lag } if *s == series => Some(*lag),
            _ => None,
        });
        if exog.is_empty() {
            return Err(Error::Structure(format!("no lags of exogenous series {series} in the design")));
        }
        let consecutive = |v: &[(usize, usize)]| v.iter().enumerate().all(|(i, (l, _))| *l == i + 1);
        if !consecutive(&own) || !consecutive(&exog) {
            return Err(Error::Structure("lag columns must cover lags 1..p without gaps".into()));
        }
        if horizons.is_empty() {
            return Err(Error::Config("at least one multiplier horizon is required".into()));
        }
        Ok(ArdlSpec {
            own: own.into_iter().map(|(_, i)| i).collect(),
            exog: exog.into_iter().map(|(_, i)| i).collect(),
            horizons,
        })
    }
}

/// Cumulative responses `C_1..C_n` of `y_t = Σ a_l y_{t−l} + Σ b_l x_{t−l}`
/// to a unit impulse in `x` at time 0.
pub fn cumulative_responses(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut d = vec![0.0; n + 1];
    let mut out = Vec::with_capacity(n);
    let mut cum = 0.0;
    for i in 1..=n {
        let mut v = if i <= b.len() { b[i - 1] } else { 0.0 };
        for (l, al) in a.iter().enumerate() {
            if i > l + 1 {
                v += al * d[i - l - 1];
            }
        }
        d[i] = v;
        cum += v;
        out.push(cum);
    }
    out
}

/// `Σ b_l / (1 − Σ a_l)`, or `None` when the denominator vanishes.
pub fn long_run_multiplier(a: &[f64], b: &[f64]) -> Option<f64> {
    let den = 1.0 - a.iter().sum::<f64>();
    (den.abs() >= LONG_RUN_TOL).then(|| b.iter().sum::<f64>() / den)
}

/// Multipliers at the configured horizons for one coefficient vector; a
/// degenerate long run is `NaN`.
pub fn ardl_multipliers(beta: &[f64], spec: &ArdlSpec) -> Vec<f64> {
    let a: Vec<f64> = spec.own.iter().map(|&i| beta[i]).collect();
    let b: Vec<f64> = spec.exog.iter().map(|&i| beta[i]).collect();
    let max_h = spec
        .horizons
        .iter()
        .filter_map(|h| match h {
            Horizon::Steps(n) => Some(*n),
            Horizon::LongRun => None,
        })
        .max()
        .unwrap_or(0);
    let c = cumulative_responses(&a, &b, max_h);
    spec.horizons
        .iter()
        .map(|h| match h {
            Horizon::Steps(0) => 0.0,
            Horizon::Steps(n) => c[n - 1],
            Horizon::LongRun => long_run_multiplier(&a, &b).unwrap_or(f64::NAN),
        })
        .collect()
}

/// Log of the mixture density `mean_j N(y; m_j, v_j)`.
pub fn log_pred_likelihood(draws: &[PredictiveDraw], y: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::Domain("log predictive likelihood needs at least one draw".into()));
    }
    if !y.is_finite() {
        return Err(Error::Data("realized value is missing".into()));
    }
    let terms: Vec<f64> = draws.iter().map(|d| ln_normal_pdf(y, d.mean, d.var)).collect();
    let v = log_sum_exp(&terms) - (draws.len() as f64).ln();
    if v.is_nan() {
        return Err(Error::Numerical("log predictive likelihood is NaN".into()));
    }
    Ok(v)
}

/// Predictive draws of one model, origin and horizon with the realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastRecord {
    pub model: String,
    pub origin: usize,
    pub horizon: usize,
    pub realized: f64,
    pub draws: Vec<PredictiveDraw>,
}

impl ForecastRecord {
    /// Predictive mean (average of the conditional means).
    pub fn point(&self) -> f64 {
        self.draws.iter().map(|d| d.mean).sum::<f64>() / self.draws.len().max(1) as f64
    }

    pub fn lpl(&self) -> Result<f64> {
        log_pred_likelihood(&self.draws, self.realized)
    }

    pub fn squared_error(&self) -> f64 {
        (self.point() - self.realized).powi(2)
    }
}

type Key = (String, usize);

fn grouped(records: &[ForecastRecord]) -> BTreeMap<Key, Vec<&ForecastRecord>> {
    let mut map: BTreeMap<Key, Vec<&ForecastRecord>> = BTreeMap::new();
    for r in records {
        map.entry((r.model.clone(), r.horizon)).or_default().push(r);
    }
    for v in map.values_mut() {
        v.sort_by_key(|r| r.origin);
    }
    map
}

/// Root mean squared error of one model at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointScore {
    pub model: String,
    pub horizon: usize,
    pub rmse: f64,
    pub n: usize,
}

/// RMSE of the predictive means per model and horizon.
pub fn score_point(records: &[ForecastRecord]) -> Vec<PointScore> {
    grouped(records)
        .into_iter()
        .map(|((model, horizon), rs)| {
            let sse: f64 = rs.iter().map(|r| r.squared_error()).sum();
            PointScore {
                model,
                horizon,
                rmse: (sse / rs.len() as f64).sqrt(),
                n: rs.len(),
            }
        })
        .collect()
}

/// Average and cumulated log predictive likelihood.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityScore {
    pub model: String,
    pub horizon: usize,
    pub mean: f64,
    pub sum: f64,
    pub n: usize,
}

pub fn score_density(records: &[ForecastRecord]) -> Result<Vec<DensityScore>> {
    grouped(records)
        .into_iter()
        .map(|((model, horizon), rs)| {
            let lpl: Vec<f64> = rs.iter().map(|r| r.lpl()).collect::<Result<_>>()?;
            let sum: f64 = lpl.iter().sum();
            Ok(DensityScore {
                model,
                horizon,
                mean: sum / lpl.len() as f64,
                sum,
                n: lpl.len(),
            })
        })
        .collect()
}

/// Outcome of a Diebold-Mariano comparison of `loss_a − loss_b`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DmTest {
    pub statistic: f64,
    pub p_value: f64,
    /// The loss differential has no variance; the statistic is set to 0.
    pub degenerate: bool,
}

/// Diebold-Mariano test with a rectangular-kernel long-run variance using
/// `h − 1` lags (falling back to the lag-0 variance if that estimate is not
/// positive) and a two-sided normal p-value. With `harvey`, the small-sample
/// correction is applied and the p-value uses Student-t with `n − 1` degrees
/// of freedom.
pub fn dm_test(loss_a: &[f64], loss_b: &[f64], h: usize, harvey: bool) -> Result<DmTest> {
    if loss_a.len() != loss_b.len() {
        return Err(Error::Structure("loss series differ in length".into()));
    }
    if h == 0 {
        return Err(Error::Config("forecast horizon must be at least 1".into()));
    }
    let n = loss_a.len();
    if n < 2 {
        return Err(Error::Data("Diebold-Mariano needs at least two losses".into()));
    }
    let d: Vec<f64> = loss_a.iter().zip(loss_b).map(|(a, b)| a - b).collect();
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let acov = |k: usize| (k..n).map(|t| (d[t] - mean) * (d[t - k] - mean)).sum::<f64>() / nf;
    let g0 = acov(0);
    let scale = d.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0);
    if g0 <= 1e-24 * scale * scale {
        return Ok(DmTest {
            statistic: 0.0,
            p_value: 1.0,
            degenerate: true,
        });
    }
    let mut lrv = g0 + 2.0 * (1..h.min(n)).map(acov).sum::<f64>();
    if lrv <= 0.0 {
        lrv = g0;
    }
    let mut stat = mean / (lrv / nf).sqrt();
    let p_value = if harvey {
        let hf = h as f64;
        stat *= ((nf + 1.0 - 2.0 * hf + hf * (hf - 1.0) / nf) / nf).sqrt();
        let t = StudentsT::new(0.0, 1.0, nf - 1.0).map_err(|e| Error::Numerical(e.to_string()))?;
        2.0 * (1.0 - t.cdf(stat.abs()))
    } else {
        let z = Normal::standard();
        2.0 * (1.0 - z.cdf(stat.abs()))
    };
    Ok(DmTest {
        statistic: stat,
        p_value,
        degenerate: false,
    })
}

/// Significance stars at the 10%, 5% and 1% levels.
pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Running sum of `lpl_model − lpl_benchmark`.
pub fn cumulative_log_bf(lpl_model: &[f64], lpl_benchmark: &[f64]) -> Result<Vec<f64>> {
    if lpl_model.len() != lpl_benchmark.len() {
        return Err(Error::Structure("LPL series differ in length".into()));
    }
    let mut acc = 0.0;
    Ok(lpl_model
        .iter()
        .zip(lpl_benchmark)
        .map(|(a, b)| {
            acc += a - b;
            acc
        })
        .collect())
}

/// How a competitor is estimated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    /// TVP regression sampled through the SVD; `time_invariant` forces
    /// `β̃ ≡ 0`.
    Svd {
        #[serde(default = "default_mode")]
        mode: StateMode,
        #[serde(default)]
        prior: PriorSpec,
        #[serde(default)]
        time_invariant: bool,
    },
    /// Random-walk TVP regression sampled by forward filtering, backward
    /// sampling.
    RwTvp {
        #[serde(default)]
        prior: PriorSpec,
    },
    /// Driftless random walk with stochastic volatility on the target.
    RandomWalk,
}

fn default_mode() -> StateMode {
    StateMode::BlockDiagonal
}

/// A named competitor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub name: String,
    #[serde(flatten)]
    pub kind: ModelKind,
}

/// Settings of a recursive evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub horizons: Vec<usize>,
    /// First and last forecast origin (raw row indices, inclusive).
    pub holdout_start: usize,
    #[serde(default)]
    pub holdout_end: Option<usize>,
    #[serde(default = "yes")]
    pub standardize: bool,
    pub models: Vec<ModelEntry>,
    /// Name of the model scores are expressed relative to.
    #[serde(default)]
    pub benchmark: Option<String>,
    /// Apply the small-sample correction to the Diebold-Mariano test.
    #[serde(default)]
    pub harvey: bool,
}

fn yes() -> bool {
    true
}

/// A forecast cell that failed; its origin is skipped for that model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub model: String,
    pub origin: usize,
    pub horizon: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct EvalOutput {
    pub records: Vec<ForecastRecord>,
    pub failures: Vec<Failure>,
}

/// Regressors by origin and targets by horizon.
#[derive(Debug, Clone)]
pub struct EvalInput {
    pub design: Design,
    /// `targets[h][origin]`, `NaN` where undefined.
    pub targets: BTreeMap<usize, Vec<f64>>,
}

/// Expanding-window re-estimation of every model at every origin and
/// horizon. Cells run in parallel; each has its own seed derived from the
/// master seed, so results do not depend on scheduling.
pub fn recursive_eval(cfg: &EvalConfig, run: &RunConfig, input: &EvalInput) -> Result<EvalOutput> {
    run.validate()?;
    if cfg.models.is_empty() {
        return Err(Error::Config("no models to evaluate".into()));
    }
    let mut cells = Vec::new();
    for &h in &cfg.horizons {
        let target = input
            .targets
            .get(&h)
            .ok_or_else(|| Error::Config(format!("no target for horizon {h}")))?;
        let end = cfg.holdout_end.unwrap_or(usize::MAX);
        let origins: Vec<usize> = input
            .design
            .origins
            .iter()
            .copied()
            .filter(|&o| o >= cfg.holdout_start && o <= end && o < target.len() && target[o].is_finite())
            .collect();
        if origins.is_empty() {
            return Err(Error::Config(format!("hold-out window is empty for horizon {h}")));
        }
        if origins[0] < h + 1 {
            return Err(Error::Config("hold-out starts before any estimation data".into()));
        }
        for (m, entry) in cfg.models.iter().enumerate() {
            for &o in &origins {
                cells.push((m, entry, h, o));
            }
        }
    }
    let results: Vec<(usize, usize, usize, std::result::Result<ForecastRecord, Failure>)> = cells
        .par_iter()
        .map(|&(m, entry, h, origin)| {
            let seed = derive_seed(derive_seed(derive_seed(run.seed, m as u64), h as u64), origin as u64);
            let out = forecast_cell(entry, run, seed, input, h, origin, cfg.standardize).map_err(|e| Failure {
                model: entry.name.clone(),
                origin,
                horizon: h,
                message: e.to_string(),
            });
            (m, h, origin, out)
        })
        .collect();
    let mut output = EvalOutput::default();
    let mut sorted = results;
    sorted.sort_by_key(|(m, h, o, _)| (*m, *h, *o));
    for (_, _, _, r) in sorted {
        match r {
            Ok(rec) => output.records.push(rec),
            Err(f) => {
                log::warn!("{} h={} origin={}: {}", f.model, f.horizon, f.origin, f.message);
                output.failures.push(f)
            }
        }
    }
    Ok(output)
}

/// Estimate one model on the window ending `h` periods before `origin` and
/// return its predictive draws for `origin`.
pub fn forecast_cell(
    entry: &ModelEntry,
    run: &RunConfig,
    seed: u64,
    input: &EvalInput,
    h: usize,
    origin: usize,
    standardize: bool,
) -> Result<ForecastRecord> {
    let target = &input.targets[&h];
    let last = origin
        .checked_sub(h)
        .ok_or_else(|| Error::Config("origin precedes the horizon".into()))?;
    let realized = target[origin];
    let mut run = run.clone();
    run.seed = seed;
    run.chains = 1;
    let draws = match &entry.kind {
        ModelKind::RandomWalk => {
            let (data, _) = RegressionData::from_design(&input.design, target, last, false)?;
            let y: Vec<f64> = data.y.iter().copied().collect();
            random_walk_draws(&y, h, &run, seed)?
        }
        kind => {
            let (data, scaler) = RegressionData::from_design(&input.design, target, last, standardize)?;
            let raw = input
                .design
                .row_for_origin(origin)
                .ok_or_else(|| Error::Data(format!("no regressors at origin {origin}")))?;
            let x = match &scaler {
                Some(s) => s.apply(raw),
                None => raw.to_vec(),
            };
            match kind {
                ModelKind::Svd {
                    mode,
                    prior,
                    time_invariant,
                } => {
                    let meta = match prior.family {
                        Family::Ridge => ColumnMeta::plain(data.tags.clone()),
                        _ => ColumnMeta::from_data(&data, data.lags.max(1))?,
                    };
                    let opts = ModelOptions {
                        mode: *mode,
                        time_invariant: *time_invariant,
                        fixed: FixedBlocks::default(),
                        ..ModelOptions::default()
                    };
                    let model = Model::new(data, prior.clone(), meta, opts)?;
                    let extras = ChainExtras {
                        x_future: Some(x),
                        ..ChainExtras::default()
                    };
                    run_chain(&model, &run, 0, &extras)?.predictive
                }
                ModelKind::RwTvp { prior } => rw_tvp_draws(data, prior, &x, &run, seed)?,
                ModelKind::RandomWalk => unreachable!(),
            }
        }
    };
    Ok(ForecastRecord {
        model: entry.name.clone(),
        origin,
        horizon: h,
        realized,
        draws,
    })
}

/// Predictive draws of the driftless random walk `y_{t} = y_{t−h} + e_t`
/// with stochastic volatility on `e_t`. The forecast of the next target is
/// the last observed one.
pub fn random_walk_draws(y: &[f64], h: usize, run: &RunConfig, seed: u64) -> Result<Vec<PredictiveDraw>> {
    if y.len() < h + 3 {
        return Err(Error::Data(format!("random-walk benchmark needs more than {} observations", h + 2)));
    }
    let d: Vec<f64> = (h..y.len()).map(|t| y[t] - y[t - h]).collect();
    let last = y[y.len() - 1];
    let prior = PriorSpec::default().sv;
    let mut streams = Streams::new(seed, 0);
    let v = d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64;
    let mut hpath = vec![v.max(1e-8).ln(); d.len()];
    let mut sv = SvParams {
        mu: hpath[0],
        rho: 0.9,
        sigma2: 0.1,
    };
    let mut out = Vec::with_capacity(run.kept());
    for s in 0..run.draws {
        let obs = VolObs { values: &d, per_t: 1 };
        draw_sv_given_obs(Some(&obs), &mut hpath, &mut sv, &prior, &mut streams.volatility)?;
        if s >= run.burn_in && (s - run.burn_in + 1) % run.thin == 0 {
            let rng = &mut streams.predictive;
            let hn = sv.mu + sv.rho * (hpath[hpath.len() - 1] - sv.mu) + sv.sigma2.sqrt() * std_normal(rng);
            let var = hn.exp();
            out.push(PredictiveDraw {
                mean: last,
                var,
                y: last + var.sqrt() * std_normal(rng),
            });
        }
    }
    Ok(out)
}

fn rw_tvp_draws(data: RegressionData, prior: &PriorSpec, x: &[f64], run: &RunConfig, seed: u64) -> Result<Vec<PredictiveDraw>> {
    let model = RwTvpModel::new(data.y.clone(), data.x.clone(), prior, Volatility::Stochastic)?;
    let mut st = model.initial_state();
    let mut streams = Streams::new(seed, 0);
    let mut out = Vec::with_capacity(run.kept());
    let xv = DVector::from_column_slice(x);
    for s in 0..run.draws {
        model.sweep(&mut st, &mut streams)?;
        if s >= run.burn_in && (s - run.burn_in + 1) % run.thin == 0 {
            let rng = &mut streams.predictive;
            let t = st.h.len();
            let hn = st.sv.mu + st.sv.rho * (st.h[t - 1] - st.sv.mu) + st.sv.sigma2.sqrt() * std_normal(rng);
            let var = hn.exp();
            let beta = model.next_coefficients(&st, rng);
            let mean = xv.dot(&DVector::from_vec(beta));
            out.push(PredictiveDraw {
                mean,
                var,
                y: mean + var.sqrt() * std_normal(rng),
            });
        }
    }
    Ok(out)
}

/// One row of the scoring table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreRow {
    pub model: String,
    pub horizon: usize,
    pub n: usize,
    pub rmse: f64,
    /// RMSE relative to the benchmark on common origins.
    pub rel_rmse: Option<f64>,
    pub rmse_stars: String,
    /// LPL averaged over the hold-out.
    pub lpl_mean: f64,
    /// LPL cumulated over the hold-out.
    pub lpl_sum: f64,
    /// Average LPL difference to the benchmark on common origins.
    pub lpl_diff: Option<f64>,
    pub lpl_stars: String,
    pub dm_rmse: Option<DmTest>,
    pub dm_lpl: Option<DmTest>,
}

fn paired<'a>(a: &[&'a ForecastRecord], b: &[&'a ForecastRecord]) -> Vec<(&'a ForecastRecord, &'a ForecastRecord)> {
    let bm: BTreeMap<usize, &ForecastRecord> = b.iter().map(|r| (r.origin, *r)).collect();
    a.iter().filter_map(|r| bm.get(&r.origin).map(|s| (*r, *s))).collect()
}

/// Scores per model and horizon, with relative scores and significance
/// against `benchmark` when given.
pub fn score_table(records: &[ForecastRecord], benchmark: Option<&str>, harvey: bool) -> Result<Vec<ScoreRow>> {
    let groups = grouped(records);
    let mut rows = Vec::new();
    for ((model, horizon), rs) in &groups {
        let sse: f64 = rs.iter().map(|r| r.squared_error()).sum();
        let lpl: Vec<f64> = rs.iter().map(|r| r.lpl()).collect::<Result<_>>()?;
        let lsum: f64 = lpl.iter().sum();
        let mut row = ScoreRow {
            model: model.clone(),
            horizon: *horizon,
            n: rs.len(),
            rmse: (sse / rs.len() as f64).sqrt(),
            rel_rmse: None,
            rmse_stars: String::new(),
            lpl_mean: lsum / lpl.len() as f64,
            lpl_sum: lsum,
            lpl_diff: None,
            lpl_stars: String::new(),
            dm_rmse: None,
            dm_lpl: None,
        };
        if let Some(bench) = benchmark.and_then(|b| groups.get(&(b.to_string(), *horizon))) {
            let pairs = paired(rs, bench);
            if !pairs.is_empty() {
                let (mut la, mut lb, mut pa, mut pb) = (vec![], vec![], vec![], vec![]);
                for (a, b) in &pairs {
                    la.push(a.squared_error());
                    lb.push(b.squared_error());
                    pa.push(-a.lpl()?);
                    pb.push(-b.lpl()?);
                }
                let n = pairs.len() as f64;
                let rmse_a = (la.iter().sum::<f64>() / n).sqrt();
                let rmse_b = (lb.iter().sum::<f64>() / n).sqrt();
                row.rel_rmse = Some(if rmse_a == rmse_b { 1.0 } else { rmse_a / rmse_b });
                row.lpl_diff = Some((pb.iter().sum::<f64>() - pa.iter().sum::<f64>()) / n);
                if model != bench[0].model.as_str() && pairs.len() >= 2 {
                    let dm = dm_test(&la, &lb, *horizon, harvey)?;
                    row.rmse_stars = if dm.degenerate { String::new() } else { stars(dm.p_value).into() };
                    row.dm_rmse = Some(dm);
                    let dm = dm_test(&pa, &pb, *horizon, harvey)?;
                    row.lpl_stars = if dm.degenerate { String::new() } else { stars(dm.p_value).into() };
                    row.dm_lpl = Some(dm);
                }
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Write the score table as CSV (RMSE and LPL with separate star columns).
pub fn write_score_table<W: Write>(rows: &[ScoreRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Numerical(format!("writing score table: {e}"));
    out.write_record([
        "model", "horizon", "n", "rmse", "rel_rmse", "rmse_stars", "dm_rmse", "dm_rmse_p", "lpl_mean", "lpl_sum",
        "lpl_diff", "lpl_stars", "dm_lpl", "dm_lpl_p",
    ])
    .map_err(err)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for r in rows {
        out.write_record([
            r.model.clone(),
            r.horizon.to_string(),
            r.n.to_string(),
            r.rmse.to_string(),
            opt(r.rel_rmse),
            r.rmse_stars.clone(),
            opt(r.dm_rmse.map(|d| d.statistic)),
            opt(r.dm_rmse.map(|d| d.p_value)),
            r.lpl_mean.to_string(),
            r.lpl_sum.to_string(),
            opt(r.lpl_diff),
            r.lpl_stars.clone(),
            opt(r.dm_lpl.map(|d| d.statistic)),
            opt(r.dm_lpl.map(|d| d.p_value)),
        ])
        .map_err(err)?;
    }
    out.flush().map_err(|e| Error::Numerical(e.to_string()))
}

/// Tidy cumulative log predictive Bayes factors of every model against the
/// benchmark: `(model, horizon, origin, value)`.
pub fn cumulative_bf_table(records: &[ForecastRecord], benchmark: &str) -> Result<Vec<(String, usize, usize, f64)>> {
    let groups = grouped(records);
    let mut out = Vec::new();
    for ((model, horizon), rs) in &groups {
        let Some(bench) = groups.get(&(benchmark.to_string(), *horizon)) else {
            continue;
        };
        let pairs = paired(rs, bench);
        let a: Vec<f64> = pairs.iter().map(|(a, _)| a.lpl()).collect::<Result<_>>()?;
        let b: Vec<f64> = pairs.iter().map(|(_, b)| b.lpl()).collect::<Result<_>>()?;
        for ((r, _), v) in pairs.iter().zip(cumulative_log_bf(&a, &b)?) {
            out.push((model.clone(), *horizon, r.origin, v));
        }
    }
    Ok(out)
}

pub fn write_bf_table<W: Write>(rows: &[(String, usize, usize, f64)], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Numerical(format!("writing Bayes factors: {e}"));
    out.write_record(["model", "horizon", "origin", "cum_log_bf"]).map_err(err)?;
    for (m, h, o, v) in rows {
        out.write_record([m.clone(), h.to_string(), o.to_string(), v.to_string()])
            .map_err(err)?;
    }
    out.flush().map_err(|e| Error::Numerical(e.to_string()))
}
