//! Runtime scaling of the state-draw kernels: the SVD sampler in both state
//! modes against forward filtering, backward sampling and the banded
//! precision sampler.

use std::fmt;
use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::baselines::{awol_draw, ffbs_draw, RwSystem};
use crate::design::StateMode;
use crate::dist::std_normal;
use crate::error::{Error, Result};
use crate::ingest::{ColumnTag, RegressionData};
use crate::priors::{ColumnMeta, Family, PriorSpec};
use crate::rng::{derive_seed, Rng};
use crate::samplers::{draw_beta_tilde, ChainState, FixedBlocks, Model, ModelOptions, SvdCache, Volatility};

/// Fewest points a power-law fit accepts.
pub const MIN_FIT_POINTS: usize = 5;
const WARMUP_DRAWS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    SvdBlock,
    SvdLowertriRidge,
    Ffbs,
    Awol,
}

impl Sampler {
    pub const ALL: [Sampler; 4] = [Sampler::SvdBlock, Sampler::SvdLowertriRidge, Sampler::Ffbs, Sampler::Awol];

    pub fn label(self) -> &'static str {
        match self {
            Sampler::SvdBlock => "SVD-block",
            Sampler::SvdLowertriRidge => "SVD-lowertri-ridge",
            Sampler::Ffbs => "FFBS",
            Sampler::Awol => "AWOL",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Sampler::ALL
            .into_iter()
            .find(|x| x.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown sampler {s:?}")))
    }
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Median wall time of one state draw at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimingRow {
    pub sampler: Sampler,
    pub k: usize,
    pub t: usize,
    pub reps: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub samplers: Vec<Sampler>,
    pub k: Vec<usize>,
    pub t: Vec<usize>,
    pub reps: usize,
    pub seed: u64,
    /// Fixed state-variance ratio used by every kernel.
    pub theta: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            samplers: Sampler::ALL.to_vec(),
            k: vec![25, 50, 75, 100, 125, 150],
            t: vec![200],
            reps: 7,
            seed: 1,
            theta: 1e-3,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 5 {
            return Err(Error::Config(format!("reps = {} must be at least 5", self.reps)));
        }
        if self.samplers.is_empty() || self.k.is_empty() || self.t.is_empty() {
            return Err(Error::Config("the benchmark grid is empty".into()));
        }
        if self.k.iter().chain(&self.t).any(|&v| v == 0) {
            return Err(Error::Config("grid sizes must be positive".into()));
        }
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::Config("theta must be positive".into()));
        }
        Ok(())
    }
}

/// Synthetic regression for one grid point; the same `(K, T, seed)` always
/// gives the same data.
fn synthetic(k: usize, t: usize, seed: u64) -> (DVector<f64>, DMatrix<f64>) {
    let mut rng = Rng::seed_from_u64(derive_seed(derive_seed(seed, k as u64), t as u64));
    let x = DMatrix::from_fn(t, k, |_, _| std_normal(&mut rng));
    let y = DVector::from_fn(t, |_, _| std_normal(&mut rng));
    (y, x)
}

fn svd_model(y: DVector<f64>, x: DMatrix<f64>, mode: StateMode, theta: f64) -> Result<Model> {
    let k = x.ncols();
    let tags: Vec<ColumnTag> = (0..k).map(|series| ColumnTag::Plain { series }).collect();
    let data = RegressionData::new(y, x, tags.clone())?;
    let spec = PriorSpec {
        family: Family::Ridge,
        ..PriorSpec::default()
    };
    let opts = ModelOptions {
        mode,
        volatility: Volatility::Fixed { sigma2: 1.0 },
        fixed: FixedBlocks {
            gamma: Some(vec![0.0; k]),
            theta: Some(vec![theta]),
        },
        ..ModelOptions::default()
    };
    Model::new(data, spec, ColumnMeta::plain(tags), opts)
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Each repetition times a batch of draws lasting at least this long, so
/// fast kernels are not dominated by clock resolution.
const MIN_REP_SECONDS: f64 = 5e-3;
const MAX_BATCH: usize = 1000;

fn time_reps(reps: usize, mut draw: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut warm = f64::INFINITY;
    for _ in 0..WARMUP_DRAWS {
        let start = Instant::now();
        draw()?;
        warm = warm.min(start.elapsed().as_secs_f64());
    }
    let batch = ((MIN_REP_SECONDS / warm.max(1e-9)).ceil() as usize).clamp(1, MAX_BATCH);
    let mut secs = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        for _ in 0..batch {
            draw()?;
        }
        secs.push((start.elapsed().as_secs_f64() / batch as f64).max(1e-12));
    }
    Ok(median(&mut secs))
}

/// Time one kernel at one grid point. Only the state draw is timed; the
/// factorization of the fixed design happens before the clock starts.
pub fn time_kernel(sampler: Sampler, k: usize, t: usize, reps: usize, theta: f64, seed: u64) -> Result<f64> {
    let (y, x) = synthetic(k, t, seed);
    let mut rng = Rng::seed_from_u64(derive_seed(seed, 0xbe7c));
    match sampler {
        Sampler::SvdBlock | Sampler::SvdLowertriRidge => {
            let mode = if sampler == Sampler::SvdBlock {
                StateMode::BlockDiagonal
            } else {
                StateMode::LowerTriangular
            };
            let model = svd_model(y, x, mode, theta)?;
            let mut init_rng = Rng::seed_from_u64(seed);
            let state: ChainState = model.initial_state(&mut init_rng)?;
            let mut cache = SvdCache::default();
            cache.factors(&model, &state.sigma())?;
            time_reps(reps, || {
                std::hint::black_box(draw_beta_tilde(&state, &model, &mut cache, &mut rng)?);
                Ok(())
            })
        }
        Sampler::Ffbs | Sampler::Awol => {
            let obs_var = vec![1.0; t];
            let state_var = vec![theta; k];
            let init_mean = vec![0.0; k];
            let init_var = vec![theta; k];
            let sys = RwSystem {
                y: y.as_slice(),
                x: &x,
                obs_var: &obs_var,
                state_var: &state_var,
                init_mean: &init_mean,
                init_var: &init_var,
            };
            time_reps(reps, || {
                let d = if sampler == Sampler::Ffbs {
                    ffbs_draw(&sys, &mut rng)?
                } else {
                    awol_draw(&sys, &mut rng)?
                };
                std::hint::black_box(d);
                Ok(())
            })
        }
    }
}

/// Median per-draw time of every sampler over the `K × T` grid, measured
/// on the calling thread.
pub fn measure_scaling(cfg: &BenchConfig) -> Result<Vec<TimingRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &sampler in &cfg.samplers {
        for &t in &cfg.t {
            for &k in &cfg.k {
                let seconds = time_kernel(sampler, k, t, cfg.reps, cfg.theta, cfg.seed)?;
                log::info!("{sampler} K={k} T={t}: {seconds:.3e} s/draw");
                rows.push(TimingRow {
                    sampler,
                    k,
                    t,
                    reps: cfg.reps,
                    seconds,
                });
            }
        }
    }
    Ok(rows)
}

/// Which grid dimension a power law is fitted against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    K,
    T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingFit {
    pub sampler: Sampler,
    pub axis: Axis,
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
    pub points: usize,
}

/// Least-squares line through `(ln x, ln seconds)` for each sampler.
pub fn scaling_fit(rows: &[TimingRow], axis: Axis) -> Result<Vec<ScalingFit>> {
    let mut samplers: Vec<Sampler> = rows.iter().map(|r| r.sampler).collect();
    samplers.sort();
    samplers.dedup();
    let mut out = Vec::new();
    for sampler in samplers {
        let pts: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| r.sampler == sampler)
            .map(|r| {
                let x = match axis {
                    Axis::K => r.k,
                    Axis::T => r.t,
                };
                ((x as f64).ln(), r.seconds.ln())
            })
            .collect();
        if pts.len() < MIN_FIT_POINTS {
            return Err(Error::Data(format!(
                "{sampler}: {} grid points, a power-law fit needs at least {MIN_FIT_POINTS}",
                pts.len()
            )));
        }
        if pts.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Data(format!("{sampler}: timings must be positive")));
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
        if sxx <= 0.0 {
            return Err(Error::Data(format!("{sampler}: the grid does not vary along {axis:?}")));
        }
        let slope = sxy / sxx;
        let r2 = if syy > 0.0 { (sxy * sxy) / (sxx * syy) } else { 1.0 };
        out.push(ScalingFit {
            sampler,
            axis,
            exponent: slope,
            intercept: my - slope * mx,
            r2,
            points: pts.len(),
        });
    }
    Ok(out)
}

/// Timing table with columns `sampler, K, T, seconds`.
pub fn write_timings<W: Write>(rows: &[TimingRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let err = |e: csv::Error| Error::Numerical(format!("writing timings: {e}"));
    out.write_record(["sampler", "K", "T", "seconds"]).map_err(err)?;
    for r in rows {
        out.write_record([r.sampler.label().to_string(), r.k.to_string(), r.t.to_string(), format!("{:e}", r.seconds)])
            .map_err(err)?;
    }
    out.flush().map_err(|e| Error::Numerical(e.to_string()))
}

/// Plain-text report of the fitted exponents.
pub fn write_fit_report<W: Write>(fits: &[ScalingFit], mut out: W) -> std::io::Result<()> {
    writeln!(out, "{:<20} {:>5} {:>9} {:>7} {:>6}", "sampler", "axis", "exponent", "R2", "points")?;
    for f in fits {
        writeln!(
            out,
            "{:<20} {:>5} {:>9.3} {:>7.3} {:>6}",
            f.sampler.label(),
            format!("{:?}", f.axis),
            f.exponent,
            f.r2,
            f.points
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(f: impl Fn(f64) -> f64) -> Vec<TimingRow> {
        [25, 50, 75, 100, 125, 150]
            .into_iter()
            .map(|k| TimingRow {
                sampler: Sampler::Ffbs,
                k,
                t: 200,
                reps: 5,
                seconds: f(k as f64),
            })
            .collect()
    }

    #[test]
    fn cubic_timings_give_exponent_three() {
        let fit = scaling_fit(&rows(|k| 2e-9 * k.powi(3)), Axis::K).unwrap();
        assert!((fit[0].exponent - 3.0).abs() < 0.01);
        assert!((fit[0].r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn linear_timings_give_exponent_one() {
        let fit = scaling_fit(&rows(|k| 3e-6 * k), Axis::K).unwrap();
        assert!((fit[0].exponent - 1.0).abs() < 0.01);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let mut r = rows(|k| k);
        r.truncate(4);
        assert!(scaling_fit(&r, Axis::K).is_err());
    }

    #[test]
    fn fewer_than_five_reps_rejected() {
        let cfg = BenchConfig {
            reps: 4,
            ..BenchConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn every_kernel_runs_on_a_tiny_grid() {
        for s in Sampler::ALL {
            let secs = time_kernel(s, 3, 12, 5, 0.05, 9).unwrap();
            assert!(secs > 0.0);
        }
    }

    #[test]
    fn sampler_labels_round_trip() {
        for s in Sampler::ALL {
            assert_eq!(Sampler::parse(s.label()).unwrap(), s);
        }
        assert!(Sampler::parse("gibbs").is_err());
    }
}
