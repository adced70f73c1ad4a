//! The Gibbs loop, draw storage and convergence diagnostics.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use average::{Estimate, Quantile, Variance};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::design::StateMode;
use crate::dist::{sample_log_categorical, std_normal};
use crate::error::{Error, Result};
use crate::forecast::{ardl_multipliers, ArdlSpec};
use crate::mixture::{order_means, update_mixture};
use crate::rng::Streams;
use crate::samplers::{
    coefficient_paths, draw_beta_tilde, draw_gamma, draw_ng_global, draw_ng_locals, draw_sv, draw_theta, Block,
    ChainState, Model, SvdCache, Volatility,
};

/// Reported pointwise quantiles (a 68% band and the median).
pub const BAND: [f64; 3] = [0.16, 0.5, 0.84];

/// Sampler settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Total sweeps including burn-in.
    pub draws: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub seed: u64,
    /// Keep every stored draw of the `β_t`, `β̃_t`, `m_t` and `h_t` paths.
    pub store_paths: bool,
    /// Record component means sorted by their first coefficient (K = 1 only).
    pub order_means: bool,
    /// Share of the burn-in during which proposal scales adapt.
    pub adapt_fraction: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            draws: 30_000,
            burn_in: 10_000,
            thin: 1,
            chains: 1,
            seed: 42,
            store_paths: false,
            order_means: false,
            adapt_fraction: 0.25,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.draws {
            return Err(Error::Config(format!(
                "burn-in {} must be smaller than the number of draws {}",
                self.burn_in, self.draws
            )));
        }
        if self.thin == 0 {
            return Err(Error::Config("thinning must be at least 1".into()));
        }
        if self.chains == 0 {
            return Err(Error::Config("at least one chain is required".into()));
        }
        if !(0.0..=1.0).contains(&self.adapt_fraction) {
            return Err(Error::Config("adapt_fraction must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Number of stored records.
    pub fn kept(&self) -> usize {
        (self.draws - self.burn_in) / self.thin
    }
}

/// Per-run inputs that are not part of the model.
#[derive(Debug, Clone, Default)]
pub struct ChainExtras {
    /// Regressors of the forecast origin; enables predictive draws.
    pub x_future: Option<Vec<f64>>,
    /// Column structure for multiplier paths.
    pub multipliers: Option<ArdlSpec>,
    /// Record the block sequence of the first two sweeps.
    pub trace: bool,
}

/// Running summary of a vector-valued quantity, optionally with all draws.
#[derive(Debug, Clone)]
pub struct PathStore {
    dim: usize,
    moments: Vec<Variance>,
    quantiles: Vec<[Quantile; 3]>,
    draws: Option<Vec<f64>>,
}

/// Summary of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub mean: f64,
    pub sd: f64,
    pub lower: f64,
    pub median: f64,
    pub upper: f64,
}

impl PathStore {
    pub fn new(dim: usize, keep: bool) -> Self {
        PathStore {
            dim,
            moments: vec![Variance::new(); dim],
            quantiles: (0..dim).map(|_| BAND.map(Quantile::new)).collect(),
            draws: keep.then(Vec::new),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.moments.first().map_or(0, |m| m.len() as usize)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.dim);
        for (i, &v) in x.iter().enumerate() {
            if v.is_finite() {
                self.moments[i].add(v);
                for q in self.quantiles[i].iter_mut() {
                    q.add(v);
                }
            }
        }
        if let Some(d) = &mut self.draws {
            d.extend_from_slice(x);
        }
    }

    /// All stored draws of coordinate `i` (requires full storage).
    pub fn trace(&self, i: usize) -> Option<Vec<f64>> {
        self.draws
            .as_ref()
            .map(|d| d.iter().skip(i).step_by(self.dim).copied().collect())
    }

    pub fn draws(&self) -> Option<&[f64]> {
        self.draws.as_deref()
    }

    pub fn mean(&self) -> Vec<f64> {
        self.moments.iter().map(|m| m.mean()).collect()
    }

    /// Pointwise summary. Quantiles are exact when draws are stored and P²
    /// estimates otherwise.
    pub fn band(&self, i: usize) -> Band {
        let m = &self.moments[i];
        let q = match self.trace(i) {
            Some(mut tr) => {
                tr.retain(|v| v.is_finite());
                tr.sort_by(f64::total_cmp);
                BAND.map(|p| quantile_sorted(&tr, p))
            }
            None => [0, 1, 2].map(|j| self.quantiles[i][j].quantile()),
        };
        Band {
            mean: m.mean(),
            sd: m.sample_variance().sqrt(),
            lower: q[0],
            median: q[1],
            upper: q[2],
        }
    }

    pub fn bands(&self) -> Vec<Band> {
        (0..self.dim).map(|i| self.band(i)).collect()
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Volatility summary of one draw.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvRecord {
    pub h_mean: f64,
    pub h_last: f64,
    pub mu: f64,
    pub rho: f64,
    pub sigma2: f64,
}

/// One predictive draw: conditional mean and variance, plus a simulated
/// outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictiveDraw {
    pub mean: f64,
    pub var: f64,
    pub y: f64,
}

/// Post-burn-in acceptance rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acceptance {
    pub theta: Option<f64>,
    pub theta_scale: f64,
    pub concentration: Option<f64>,
}

/// Everything a chain keeps.
#[derive(Debug, Clone)]
pub struct DrawStore {
    pub chain: usize,
    pub seed: u64,
    pub t: usize,
    pub k: usize,
    pub groups: Option<usize>,
    pub gamma: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub sv: Vec<SvRecord>,
    pub g0: Vec<usize>,
    pub concentration: Vec<f64>,
    /// Component means ordered by the first coefficient.
    pub ordered_means: Vec<Vec<f64>>,
    pub beta: PathStore,
    pub beta_tilde: PathStore,
    pub m: Option<PathStore>,
    pub h: PathStore,
    pub multipliers: Option<PathStore>,
    pub predictive: Vec<PredictiveDraw>,
    pub acceptance: Acceptance,
    pub trace: Vec<(usize, Block)>,
    pub svd_refactorizations: usize,
}

impl DrawStore {
    fn new(model: &Model, cfg: &RunConfig, chain: usize, extras: &ChainExtras) -> Self {
        let (t, k) = (model.t(), model.k());
        let keep = cfg.store_paths;
        DrawStore {
            chain,
            seed: cfg.seed,
            t,
            k,
            groups: model.spec.clustering.then_some(model.spec.mixture.groups),
            gamma: Vec::new(),
            theta: Vec::new(),
            sv: Vec::new(),
            g0: Vec::new(),
            concentration: Vec::new(),
            ordered_means: Vec::new(),
            beta: PathStore::new(t * k, keep),
            beta_tilde: PathStore::new(t * k, keep),
            m: model.spec.clustering.then(|| PathStore::new(t * k, keep)),
            h: PathStore::new(t, keep),
            multipliers: extras
                .multipliers
                .as_ref()
                .map(|s| PathStore::new(t * s.horizons.len(), keep)),
            predictive: Vec::new(),
            acceptance: Acceptance {
                theta: None,
                theta_scale: 0.0,
                concentration: None,
            },
            trace: Vec::new(),
            svd_refactorizations: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// Posterior probabilities of `G₀ = 1, …, G`.
    pub fn g0_distribution(&self) -> Option<Vec<f64>> {
        let g = self.groups?;
        Some(g0_distribution(&[self], g))
    }

    /// Write one CSV per parameter group and a JSON manifest into `dir`.
    pub fn write_dir(&self, dir: &Path, manifest: &Manifest) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let idx = |n: usize, p: &str| (1..=n).map(|i| format!("{p}_{i}")).collect::<Vec<_>>();
        write_rows(&dir.join("gamma.csv"), &idx(self.k, "gamma"), &self.gamma)?;
        let theta_dim = self.theta.first().map_or(0, Vec::len);
        write_rows(&dir.join("theta.csv"), &idx(theta_dim, "theta"), &self.theta)?;
        let sv: Vec<Vec<f64>> = self.sv.iter().map(|r| vec![r.h_mean, r.h_last, r.mu, r.rho, r.sigma2]).collect();
        let sv_head: Vec<String> = ["h_mean", "h_last", "mu", "rho", "sigma2"].map(String::from).to_vec();
        write_rows(&dir.join("sv.csv"), &sv_head, &sv)?;
        if self.groups.is_some() {
            let rows: Vec<Vec<f64>> = self
                .g0
                .iter()
                .zip(&self.concentration)
                .map(|(g, a)| vec![*g as f64, *a])
                .collect();
            write_rows(&dir.join("g0.csv"), &["g0".to_string(), "concentration".to_string()], &rows)?;
            if let Some(p) = self.g0_distribution() {
                let head = idx(p.len(), "g0");
                write_rows(&dir.join("g0_table.csv"), &head, &[p])?;
            }
        }
        if !self.ordered_means.is_empty() {
            let g = self.ordered_means[0].len();
            write_rows(&dir.join("ordered_means.csv"), &idx(g, "mu"), &self.ordered_means)?;
        }
        write_summary(&dir.join("beta.csv"), &self.beta, self.k)?;
        write_summary(&dir.join("beta_tilde.csv"), &self.beta_tilde, self.k)?;
        write_summary(&dir.join("h.csv"), &self.h, 1)?;
        if let Some(m) = &self.m {
            write_summary(&dir.join("m.csv"), m, self.k)?;
        }
        if let Some(mult) = &self.multipliers {
            let per_t = mult.dim() / self.t.max(1);
            write_summary(&dir.join("multipliers.csv"), mult, per_t)?;
        }
        if !self.predictive.is_empty() {
            let rows: Vec<Vec<f64>> = self.predictive.iter().map(|p| vec![p.mean, p.var, p.y]).collect();
            write_rows(&dir.join("predictive.csv"), &["mean".into(), "var".into(), "y".into()], &rows)?;
        }
        for (name, store) in [("beta", Some(&self.beta)), ("h", Some(&self.h)), ("m", self.m.as_ref())] {
            if let Some(d) = store.and_then(PathStore::draws) {
                let rows: Vec<Vec<f64>> = d.chunks(store.unwrap().dim()).map(<[f64]>::to_vec).collect();
                let head = idx(store.unwrap().dim(), name);
                write_rows(&dir.join(format!("{name}_draws.csv")), &head, &rows)?;
            }
        }
        let json = serde_json::to_string_pretty(manifest).map_err(|e| Error::Numerical(e.to_string()))?;
        let path = dir.join("manifest.json");
        fs::write(&path, json).map_err(|e| io_err(&path, e))
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => Error::Numerical(format!("{}: {other:?}", path.display())),
    }
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut head = vec!["draw".to_string()];
    head.extend_from_slice(header);
    w.write_record(&head).map_err(|e| csv_err(path, e))?;
    for (i, r) in rows.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(r.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn write_summary(path: &Path, store: &PathStore, per_t: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["t", "coef", "mean", "sd", "q16", "q50", "q84"])
        .map_err(|e| csv_err(path, e))?;
    for (i, b) in store.bands().iter().enumerate() {
        let rec = [
            (i / per_t + 1).to_string(),
            (i % per_t + 1).to_string(),
            b.mean.to_string(),
            b.sd.to_string(),
            b.lower.to_string(),
            b.median.to_string(),
            b.upper.to_string(),
        ];
        w.write_record(&rec).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Provenance written next to the draws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub chain: usize,
    pub records: usize,
    pub versions: BTreeMap<String, String>,
    pub acceptance: Acceptance,
    #[serde(default)]
    pub notes: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(config_text: &str, store: &DrawStore) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("tvpsvd".to_string(), env!("CARGO_PKG_VERSION").to_string());
        Manifest {
            config_hash: config_hash(config_text),
            seed: store.seed,
            chain: store.chain,
            records: store.len(),
            versions,
            acceptance: store.acceptance,
            notes: BTreeMap::new(),
        }
    }
}

/// Hex SHA-256 of a configuration text.
pub fn config_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Run one chain to completion.
pub fn run_chain(model: &Model, cfg: &RunConfig, chain: usize, extras: &ChainExtras) -> Result<DrawStore> {
    cfg.validate()?;
    if cfg.order_means && (model.k() != 1 || !model.spec.clustering) {
        return Err(Error::Config("ordering component means needs clustering and a single regressor".into()));
    }
    if let Some(x) = &extras.x_future {
        if x.len() != model.k() {
            return Err(Error::Structure(format!(
                "forecast regressors have {} entries, the model has {}",
                x.len(),
                model.k()
            )));
        }
    }
    let mut streams = Streams::new(cfg.seed, chain as u64);
    let mut state = model.initial_state(&mut streams.init)?;
    let mut cache = SvdCache::default();
    let mut store = DrawStore::new(model, cfg, chain, extras);
    let adapt_until = (cfg.burn_in as f64 * cfg.adapt_fraction).floor() as usize;
    for s in 0..cfg.draws {
        if s == cfg.burn_in {
            state.proposal.reset_counts();
            if let Some(m) = &mut state.mixture {
                m.conc_proposal.reset_counts();
            }
        }
        let current = Cell::new(Block::Gamma);
        let trace = extras.trace && s < 2;
        let mut visit = |b: Block| {
            current.set(b);
            if trace {
                store.trace.push((s, b));
            }
        };
        sweep(model, &mut state, &mut streams, &mut cache, s < adapt_until, &mut visit)
            .map_err(|e| e.in_sweep(s, current.get().name()))?;
        if s >= cfg.burn_in && (s - cfg.burn_in + 1) % cfg.thin == 0 {
            record(model, &state, cfg, extras, &mut streams, &mut store).map_err(|e| e.in_sweep(s, "record"))?;
        }
    }
    store.acceptance = Acceptance {
        theta: (state.proposal.proposed > 0).then(|| state.proposal.acceptance_rate()),
        theta_scale: state.proposal.scale,
        concentration: state
            .mixture
            .as_ref()
            .filter(|m| m.conc_proposal.proposed > 0)
            .map(|m| m.conc_proposal.acceptance_rate()),
    };
    store.svd_refactorizations = cache.refactorizations;
    Ok(store)
}

/// One pass through every block in the fixed order.
pub fn sweep(
    model: &Model,
    state: &mut ChainState,
    streams: &mut Streams,
    cache: &mut SvdCache,
    adapt: bool,
    visit: &mut dyn FnMut(Block),
) -> Result<()> {
    visit(Block::Gamma);
    if model.fixed.gamma.is_none() {
        state.gamma = draw_gamma(state, model, &mut streams.gamma)?;
    }
    visit(Block::Locals);
    state.tau = draw_ng_locals(&state.gamma, state.psi_global, &model.spec, &mut streams.shrinkage)?;
    visit(Block::Global);
    state.psi_global = draw_ng_global(&state.tau, &model.spec, &mut streams.shrinkage)?;
    if !model.time_invariant {
        visit(Block::States);
        state.beta_tilde = draw_beta_tilde(state, model, cache, &mut streams.states)?;
    }
    if model.volatility == Volatility::Stochastic {
        visit(Block::Volatility);
        draw_sv(state, model, &mut streams.volatility)?;
        if model.mode() == StateMode::BlockDiagonal && model.likelihood && !model.time_invariant {
            visit(Block::StateRefresh);
            state.beta_tilde = draw_beta_tilde(state, model, cache, &mut streams.states)?;
        }
    } else {
        draw_sv(state, model, &mut streams.volatility)?;
    }
    if !model.time_invariant {
        visit(Block::Theta);
        draw_theta(state, model, adapt, &mut streams.theta)?;
    }
    if let Some(mix) = &mut state.mixture {
        let psi = model.psi(&state.theta)?;
        let sigma: Vec<f64> = state.h.iter().map(|h| (0.5 * h).exp()).collect();
        update_mixture(
            mix,
            &state.beta_tilde,
            &sigma,
            &psi,
            &model.spec.mixture,
            streams,
            adapt,
            model.likelihood,
            visit,
        )?;
    }
    Ok(())
}

fn record(
    model: &Model,
    state: &ChainState,
    cfg: &RunConfig,
    extras: &ChainExtras,
    streams: &mut Streams,
    store: &mut DrawStore,
) -> Result<()> {
    let (t_len, k) = (model.t(), model.k());
    store.gamma.push(state.gamma.clone());
    store.theta.push(state.theta.clone());
    store.sv.push(SvRecord {
        h_mean: state.h.iter().sum::<f64>() / t_len as f64,
        h_last: state.h[t_len - 1],
        mu: state.sv.mu,
        rho: state.sv.rho,
        sigma2: state.sv.sigma2,
    });
    let beta = coefficient_paths(model.mode(), &state.gamma, &state.beta_tilde);
    store.beta.push(&beta);
    store.beta_tilde.push(&state.beta_tilde);
    store.h.push(&state.h);
    if let Some(mix) = &state.mixture {
        store.g0.push(mix.occupied());
        store.concentration.push(mix.concentration);
        if let Some(m) = &mut store.m {
            m.push(&state.prior_mean(t_len, k));
        }
        if cfg.order_means {
            let mut sorted = mix.clone();
            order_means(&mut sorted);
            store.ordered_means.push(sorted.means.iter().map(|m| m[0]).collect());
        }
    }
    if let (Some(spec), Some(mult)) = (&extras.multipliers, &mut store.multipliers) {
        let mut row = Vec::with_capacity(mult.dim());
        for t in 0..t_len {
            row.extend(ardl_multipliers(&beta[t * k..(t + 1) * k], spec));
        }
        mult.push(&row);
    }
    if let Some(x) = &extras.x_future {
        let p = predictive_draw(model, state, x, &mut streams.predictive)?;
        store.predictive.push(p);
    }
    Ok(())
}

/// Simulate the next period's volatility and coefficients from one draw and
/// return the conditional predictive moments with one simulated outcome.
pub fn predictive_draw(model: &Model, state: &ChainState, x: &[f64], rng: &mut crate::rng::Rng) -> Result<PredictiveDraw> {
    let (t_len, k) = (model.t(), model.k());
    let h_next = match model.volatility {
        Volatility::Fixed { sigma2 } => sigma2.ln(),
        Volatility::Stochastic => {
            let sv = state.sv;
            sv.mu + sv.rho * (state.h[t_len - 1] - sv.mu) + sv.sigma2.sqrt() * std_normal(rng)
        }
    };
    let s2 = h_next.exp();
    let beta: Vec<f64> = if model.time_invariant {
        state.gamma.clone()
    } else {
        let psi = model.psi(&state.theta)?;
        let shock: Vec<f64> = psi.0.iter().map(|p| (s2 * p).sqrt() * std_normal(rng)).collect();
        match model.mode() {
            StateMode::BlockDiagonal => {
                let centre = match &state.mixture {
                    Some(mix) => {
                        let g = sample_log_categorical(rng, &mix.log_weights)?;
                        mix.means[g].clone()
                    }
                    None => vec![0.0; k],
                };
                (0..k).map(|j| state.gamma[j] + centre[j] + shock[j]).collect()
            }
            StateMode::LowerTriangular => {
                let path = coefficient_paths(model.mode(), &state.gamma, &state.beta_tilde);
                (0..k).map(|j| path[(t_len - 1) * k + j] + shock[j]).collect()
            }
        }
    };
    let mean: f64 = x.iter().zip(&beta).map(|(a, b)| a * b).sum();
    let y = mean + s2.sqrt() * std_normal(rng);
    Ok(PredictiveDraw { mean, var: s2, y })
}

/// Run `cfg.chains` independent chains in parallel.
pub fn run_chains(model: &Model, cfg: &RunConfig, extras: &ChainExtras) -> Result<Vec<DrawStore>> {
    cfg.validate()?;
    (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(model, cfg, c, extras))
        .collect()
}

/// Share of draws with `G₀ = g`, `g = 1..=groups`, pooled over chains.
pub fn g0_distribution(stores: &[&DrawStore], groups: usize) -> Vec<f64> {
    let mut counts = vec![0usize; groups];
    let mut n = 0;
    for s in stores {
        for &g in &s.g0 {
            counts[g - 1] += 1;
            n += 1;
        }
    }
    counts.iter().map(|&c| c as f64 / n.max(1) as f64).collect()
}

/// Inefficiency factor `1 + 2 Σ ρ_k`, with the autocorrelation sum truncated
/// by the initial monotone sequence rule on pairs `ρ_{2m} + ρ_{2m+1}`. The
/// estimate is floored at `1/log₁₀ n` so that it stays positive for
/// antithetic traces.
pub fn inefficiency_factor(trace: &[f64]) -> Result<f64> {
    let n = trace.len();
    if n < 100 {
        return Err(Error::Domain(format!("inefficiency factor needs at least 100 draws, got {n}")));
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = trace.iter().map(|v| v - mean).collect();
    let c0 = dev.iter().map(|d| d * d).sum::<f64>() / n as f64;
    if !(c0 > 1e-300) || !c0.is_finite() {
        return Err(Error::Domain("inefficiency factor of a constant trace is undefined".into()));
    }
    let acf = |lag: usize| dev[..n - lag].iter().zip(&dev[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 / c0;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut m = 0;
    while 2 * m + 1 < n {
        let pair = acf(2 * m) + acf(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        m += 1;
    }
    let tau = -1.0 + 2.0 * sum;
    Ok(tau.max(1.0 / (n as f64).log10()))
}

/// Mean, median, extremes and 5th/95th percentiles of a set of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    pub p05: f64,
    pub p95: f64,
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Summary {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: quantile_sorted(&v, 0.5),
            min: v[0],
            max: v[v.len() - 1],
            p05: quantile_sorted(&v, 0.05),
            p95: quantile_sorted(&v, 0.95),
        })
    }
}

/// Inefficiency factors of every stored coordinate of a path (constant
/// coordinates are skipped).
pub fn path_inefficiency(store: &PathStore) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(store.dim());
    for i in 0..store.dim() {
        let tr = store
            .trace(i)
            .ok_or_else(|| Error::Config("inefficiency factors need stored paths".into()))?;
        if let Ok(v) = inefficiency_factor(&tr) {
            out.push(v);
        }
    }
    Ok(out)
}

/// Potential scale reduction factor of equally long chains.
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64> {
    let m = chains.len();
    if m < 2 {
        return Err(Error::Domain("R-hat needs at least two chains".into()));
    }
    let n = chains[0].len();
    if n < 2 || chains.iter().any(|c| c.len() != n) {
        return Err(Error::Domain("R-hat needs equally long chains of length ≥ 2".into()));
    }
    let means: Vec<f64> = chains.iter().map(|c| c.iter().sum::<f64>() / n as f64).collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = n as f64 / (m - 1) as f64 * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64)
        .sum::<f64>()
        / m as f64;
    if !(w > 0.0) {
        return Err(Error::Domain("R-hat undefined for constant chains".into()));
    }
    let var = (n - 1) as f64 / n as f64 * w + b / n as f64;
    Ok((var / w).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use rand::SeedableRng;

    #[test]
    fn iid_trace_is_near_one() {
        let mut r = Rng::seed_from_u64(3);
        let tr: Vec<f64> = (0..10_000).map(|_| std_normal(&mut r)).collect();
        let f = inefficiency_factor(&tr).unwrap();
        assert!((0.8..=1.3).contains(&f), "{f}");
    }

    #[test]
    fn ar1_trace_matches_analytic_factor() {
        let mut r = Rng::seed_from_u64(4);
        let rho = 0.9;
        let mut x = 0.0;
        let tr: Vec<f64> = (0..100_000)
            .map(|_| {
                x = rho * x + (1.0f64 - rho * rho).sqrt() * std_normal(&mut r);
                x
            })
            .collect();
        let f = inefficiency_factor(&tr).unwrap();
        let want = (1.0 + rho) / (1.0 - rho);
        assert!((f / want - 1.0).abs() < 0.25, "{f} vs {want}");
    }

    #[test]
    fn alternating_trace_is_antithetic() {
        let tr: Vec<f64> = (0..1000).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let f = inefficiency_factor(&tr).unwrap();
        assert!(f > 0.0 && f < 1.0, "{f}");
    }

    #[test]
    fn constant_trace_is_rejected() {
        assert!(inefficiency_factor(&[2.0; 500]).is_err());
        assert!(inefficiency_factor(&[1.0; 10]).is_err());
    }

    #[test]
    fn rhat_near_one_for_identical_laws() {
        let mut r = Rng::seed_from_u64(5);
        let chains: Vec<Vec<f64>> = (0..4).map(|_| (0..2000).map(|_| std_normal(&mut r)).collect()).collect();
        let v = rhat(&chains).unwrap();
        assert!((v - 1.0).abs() < 0.01, "{v}");
        let shifted = vec![chains[0].clone(), chains[1].iter().map(|x| x + 5.0).collect()];
        assert!(rhat(&shifted).unwrap() > 2.0);
    }

    #[test]
    fn path_store_bands_match_sorted_quantiles() {
        let mut r = Rng::seed_from_u64(6);
        let mut full = PathStore::new(2, true);
        let mut lean = PathStore::new(2, false);
        for _ in 0..20_000 {
            let x = [std_normal(&mut r), 3.0 + 2.0 * std_normal(&mut r)];
            full.push(&x);
            lean.push(&x);
        }
        let (a, b) = (full.band(1), lean.band(1));
        assert!((a.mean - 3.0).abs() < 0.05 && (a.sd - 2.0).abs() < 0.05);
        assert!((a.lower - (3.0 - 2.0 * 0.994_457_9)).abs() < 0.06);
        assert!((a.lower - b.lower).abs() < 0.05 && (a.upper - b.upper).abs() < 0.05);
        assert_eq!(full.trace(0).unwrap().len(), 20_000);
        assert!(lean.trace(0).is_none());
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.5), 2.5);
        assert_eq!(quantile_sorted(&[1.0, 2.0], 0.0), 1.0);
        assert_eq!(quantile_sorted(&[1.0, 2.0], 1.0), 2.0);
    }

    #[test]
    fn run_config_rules() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        assert_eq!(c.kept(), 20_000);
        c.thin = 3;
        assert_eq!(c.kept(), 6666);
        c.thin = 0;
        assert!(c.validate().is_err());
        c.thin = 1;
        c.burn_in = c.draws;
        assert!(c.validate().is_err());
    }
}
