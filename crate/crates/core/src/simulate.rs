//! Synthetic data: the step-mean and random-walk state processes, and a
//! small macro panel for end-to-end forecasting runs.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::dist::std_normal;
use crate::error::{Error, Result};
use crate::ingest::SeriesTable;
use crate::rng::Rng;

/// Step-shaped mean path (1-based `t`):
/// `3·I(t≤60) + 1·I(60<t≤85) − 3·I(86<t≤120) − 1·I(t>120)`.
/// With the windows as written, `t = 86` belongs to none of them and gets
/// mean 0; `close_gap` assigns it to the third regime instead.
pub fn step_mean(t: usize, close_gap: bool) -> f64 {
    let third_start = if close_gap { 85 } else { 86 };
    if t <= 60 {
        3.0
    } else if t <= 85 {
        1.0
    } else if t > third_start && t <= 120 {
        -3.0
    } else if t > 120 {
        -1.0
    } else {
        0.0
    }
}

/// Which state process generated the data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DgpKind {
    Step,
    RandomWalk,
}

/// Settings of the univariate state-space experiments
/// `y_t = β̃_t + ε_t`, `ε_t ~ N(0, noise_sd²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DgpConfig {
    pub kind: DgpKind,
    pub t: usize,
    pub noise_sd: f64,
    /// Step process: `β̃_t ~ N(m_t, state_sd²)`. Random walk: innovation sd.
    pub state_sd: f64,
    /// Random walk: starting value `β̃_0`.
    pub start: f64,
    pub close_gap: bool,
}

impl Default for DgpConfig {
    fn default() -> Self {
        DgpConfig {
            kind: DgpKind::Step,
            t: 160,
            noise_sd: 0.1,
            state_sd: 0.1,
            start: 3.0,
            close_gap: false,
        }
    }
}

impl DgpConfig {
    pub fn step() -> Self {
        DgpConfig::default()
    }

    pub fn random_walk() -> Self {
        DgpConfig {
            kind: DgpKind::RandomWalk,
            state_sd: 1.0,
            ..DgpConfig::default()
        }
    }
}

/// A simulated path with its latent truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulated {
    pub y: Vec<f64>,
    pub beta_tilde: Vec<f64>,
    /// Mean path `m_t` (step process) or the state itself (random walk).
    pub m: Vec<f64>,
}

impl Simulated {
    /// Columns `y`, `beta_tilde`, `m` indexed by `t = 1..T`.
    pub fn to_table(&self) -> Result<SeriesTable> {
        SeriesTable::new(
            (1..=self.y.len()).map(|t| t.to_string()).collect(),
            vec!["y".into(), "beta_tilde".into(), "m".into()],
            vec![self.y.clone(), self.beta_tilde.clone(), self.m.clone()],
        )
    }
}

pub fn simulate(cfg: &DgpConfig, seed: u64) -> Result<Simulated> {
    if cfg.t == 0 {
        return Err(Error::Config("the simulated sample must be non-empty".into()));
    }
    if !(cfg.noise_sd >= 0.0 && cfg.state_sd >= 0.0) {
        return Err(Error::Config("standard deviations must be non-negative".into()));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let (mut beta, mut m) = (Vec::with_capacity(cfg.t), Vec::with_capacity(cfg.t));
    let mut state = cfg.start;
    for t in 1..=cfg.t {
        match cfg.kind {
            DgpKind::Step => {
                let mt = step_mean(t, cfg.close_gap);
                m.push(mt);
                beta.push(mt + cfg.state_sd * std_normal(&mut rng));
            }
            DgpKind::RandomWalk => {
                state += cfg.state_sd * std_normal(&mut rng);
                m.push(state);
                beta.push(state);
            }
        }
    }
    let y = beta.iter().map(|b| b + cfg.noise_sd * std_normal(&mut rng)).collect();
    Ok(Simulated { y, beta_tilde: beta, m })
}

/// A quarterly-style panel: a price level whose inflation depends on its
/// own past and on lagged slack with a coefficient that shifts once, plus
/// `n_extra` unrelated AR(1) indicators. Columns: `PRICE` (code 5), `SLACK`
/// and `X1..` (code 1).
pub fn macro_panel(t: usize, n_extra: usize, seed: u64) -> Result<SeriesTable> {
    if t < 20 {
        return Err(Error::Config("the macro panel needs at least 20 periods".into()));
    }
    let mut rng = Rng::seed_from_u64(seed);
    let mut slack = vec![0.0; t];
    let mut infl = vec![0.5; t];
    let mut extra = vec![vec![0.0; t]; n_extra];
    for s in 1..t {
        slack[s] = 0.8 * slack[s - 1] + 0.5 * std_normal(&mut rng);
        for x in extra.iter_mut() {
            x[s] = 0.6 * x[s - 1] + std_normal(&mut rng);
        }
        let b = if s < t / 2 { -0.4 } else { -0.1 };
        infl[s] = 0.2 + 0.5 * infl[s - 1] + b * slack[s - 1] + 0.3 * std_normal(&mut rng);
    }
    let mut price = vec![100.0; t];
    for s in 1..t {
        price[s] = price[s - 1] * (infl[s] / 100.0).exp();
    }
    let mut names = vec!["PRICE".to_string(), "SLACK".to_string()];
    let mut cols = vec![price, slack];
    for (i, x) in extra.into_iter().enumerate() {
        names.push(format!("X{}", i + 1));
        cols.push(x);
    }
    let mut table = SeriesTable::new((1..=t).map(|s| s.to_string()).collect(), names, cols)?;
    table.codes = std::iter::once(5).chain(std::iter::repeat(1).take(n_extra + 1)).collect();
    Ok(table)
}
