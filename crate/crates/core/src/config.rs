//! TOML run configuration and the data preparation it describes.
//!
//! ```toml
//! [run]
//! draws = 30000
//! burn_in = 10000
//!
//! [prior]
//! family = "g"
//! clustering = true
//! kappa = 0.01
//!
//! [model]
//! mode = "block_diagonal"
//!
//! [data]
//! kind = "regression"
//! path = "step.csv"
//! target = "y"
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bench::BenchConfig;
use crate::design::StateMode;
use crate::error::{Error, Result};
use crate::forecast::{ArdlSpec, EvalConfig, EvalInput, Horizon};
use crate::ingest::{build_design, build_target, load_table, ColumnTag, DesignOptions, RegressionData, SeriesTable};
use crate::mcmc::RunConfig;
use crate::priors::{ColumnMeta, Family, PriorSpec};
use crate::samplers::{FixedBlocks, Model, ModelOptions, Volatility};
use crate::simulate::DgpConfig;

/// Everything a command needs, read from one TOML file.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub run: RunConfig,
    pub prior: PriorSpec,
    pub model: ModelSection,
    pub data: Option<DataSpec>,
    pub simulate: DgpConfig,
    pub eval: Option<EvalConfig>,
    pub bench: BenchConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub mode: StateMode,
    pub volatility: Volatility,
    pub time_invariant: bool,
    pub truncate_svd: bool,
    pub fixed: FixedBlocks,
    /// Long- and short-run multipliers of one exogenous series.
    pub multipliers: Option<MultiplierSpec>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            mode: StateMode::BlockDiagonal,
            volatility: Volatility::Stochastic,
            time_invariant: false,
            truncate_svd: false,
            fixed: FixedBlocks::default(),
            multipliers: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierSpec {
    /// Name of the exogenous series.
    pub series: String,
    /// Horizons in periods; `0` requests the long-run multiplier.
    pub horizons: Vec<usize>,
}

/// Where the estimation data come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    /// A target column regressed on other columns as they are.
    Regression {
        path: PathBuf,
        target: String,
        #[serde(default)]
        regressors: Vec<String>,
        #[serde(default = "yes")]
        intercept: bool,
        #[serde(default)]
        standardize: bool,
    },
    /// Direct `h`-step inflation forecasting: the change in inflation of a
    /// price level regressed on its own lags and lags of transformed
    /// indicators.
    Macro {
        path: PathBuf,
        price: String,
        /// Transform codes by series name; unlisted series keep the code
        /// found in the file (level if none).
        #[serde(default)]
        codes: BTreeMap<String, u8>,
        #[serde(default = "two")]
        lags: usize,
        /// Indicator series; all other columns when absent.
        #[serde(default)]
        exog: Option<Vec<String>>,
        #[serde(default = "one")]
        horizon: usize,
        #[serde(default = "yes")]
        own_lags: bool,
        #[serde(default = "yes")]
        intercept: bool,
        #[serde(default = "yes")]
        standardize: bool,
    },
}

fn yes() -> bool {
    true
}

fn one() -> usize {
    1
}

fn two() -> usize {
    2
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Read and validate a file; returns the configuration and its text.
    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Ok((Config::from_toml(&text)?, text))
    }

    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        self.prior.validate(self.model.mode)?;
        if self.model.time_invariant && self.prior.clustering {
            return Err(Error::Config("a time-invariant model has no states to cluster".into()));
        }
        if let Volatility::Fixed { sigma2 } = self.model.volatility {
            if !(sigma2 > 0.0 && sigma2.is_finite()) {
                return Err(Error::Config("a fixed error variance must be positive".into()));
            }
        }
        if let Some(m) = &self.model.multipliers {
            if m.horizons.is_empty() {
                return Err(Error::Config("multipliers need at least one horizon".into()));
            }
        }
        if let Some(e) = &self.eval {
            if e.horizons.is_empty() || e.horizons.contains(&0) {
                return Err(Error::Config("evaluation horizons must be at least 1".into()));
            }
        }
        Ok(())
    }

    pub fn model_options(&self) -> ModelOptions {
        ModelOptions {
            mode: self.model.mode,
            volatility: self.model.volatility,
            fixed: self.model.fixed.clone(),
            truncate_svd: self.model.truncate_svd,
            likelihood: true,
            time_invariant: self.model.time_invariant,
        }
    }

    fn data_spec(&self) -> Result<&DataSpec> {
        self.data
            .as_ref()
            .ok_or_else(|| Error::Config("the configuration has no [data] section".into()))
    }

    /// Estimation data for `estimate`. Relative paths are resolved against
    /// `base`.
    pub fn regression_data(&self, base: &Path) -> Result<Prepared> {
        match self.data_spec()? {
            DataSpec::Regression {
                path,
                target,
                regressors,
                intercept,
                standardize,
            } => {
                let table = load_table(resolve(base, path))?;
                regression_from_table(&table, target, regressors, *intercept, *standardize)
            }
            DataSpec::Macro { horizon, .. } => {
                let panel = self.macro_panel(base)?;
                let target = build_target(&panel.price, *horizon)?;
                let last = panel.design.origins.last().copied().unwrap_or(0);
                let (data, _) = RegressionData::from_design(&panel.design, &target, last, panel.standardize)?;
                Ok(Prepared {
                    data,
                    exog_names: panel.exog_names,
                })
            }
        }
    }

    /// Design and targets for `forecast`; needs macro data and an `[eval]`
    /// section.
    pub fn eval_input(&self, base: &Path) -> Result<(EvalConfig, EvalInput)> {
        let eval = self
            .eval
            .clone()
            .ok_or_else(|| Error::Config("the configuration has no [eval] section".into()))?;
        let panel = self.macro_panel(base)?;
        let mut targets = BTreeMap::new();
        for &h in &eval.horizons {
            targets.insert(h, build_target(&panel.price, h)?);
        }
        let eval = EvalConfig {
            standardize: eval.standardize && panel.standardize,
            ..eval
        };
        Ok((
            eval,
            EvalInput {
                design: panel.design,
                targets,
            },
        ))
    }

    fn macro_panel(&self, base: &Path) -> Result<MacroPanel> {
        let DataSpec::Macro {
            path,
            price,
            codes,
            lags,
            exog,
            own_lags,
            intercept,
            standardize,
            ..
        } = self.data_spec()?
        else {
            return Err(Error::Config("forecasting needs `kind = \"macro\"` data".into()));
        };
        let mut table = load_table(resolve(base, path))?;
        table.set_codes(codes)?;
        let price_raw = table.column(price)?.to_vec();
        let exog_names: Vec<String> = match exog {
            Some(v) => v.clone(),
            None => table.names.iter().filter(|n| *n != price).cloned().collect(),
        };
        let transformed = table.transformed()?;
        let exog_cols: Vec<Vec<f64>> = exog_names
            .iter()
            .map(|n| transformed.column(n).map(<[f64]>::to_vec))
            .collect::<Result<_>>()?;
        let own = inflation_change(&price_raw)?;
        let design = build_design(
            &own,
            &exog_cols,
            DesignOptions {
                lags: *lags,
                own_lags: *own_lags,
                intercept: *intercept,
            },
        )?;
        Ok(MacroPanel {
            price: price_raw,
            design,
            exog_names,
            standardize: *standardize,
        })
    }

    /// Column metadata for the prior: plain for the ridge prior, AR-variance
    /// ratios otherwise.
    pub fn column_meta(&self, data: &RegressionData) -> Result<ColumnMeta> {
        match self.prior.family {
            Family::Ridge => Ok(ColumnMeta::plain(data.tags.clone())),
            _ => ColumnMeta::from_data(data, data.lags.max(1)),
        }
    }

    pub fn build_model(&self, prepared: &Prepared) -> Result<Model> {
        let meta = self.column_meta(&prepared.data)?;
        Model::new(prepared.data.clone(), self.prior.clone(), meta, self.model_options())
    }

    /// Multiplier layout for the configured exogenous series, if any.
    pub fn multiplier_spec(&self, prepared: &Prepared) -> Result<Option<ArdlSpec>> {
        let Some(m) = &self.model.multipliers else {
            return Ok(None);
        };
        let series = prepared
            .exog_names
            .iter()
            .position(|n| *n == m.series)
            .ok_or_else(|| Error::Config(format!("multiplier series {:?} is not a regressor", m.series)))?;
        let horizons = m
            .horizons
            .iter()
            .map(|&h| if h == 0 { Horizon::LongRun } else { Horizon::Steps(h) })
            .collect();
        ArdlSpec::from_tags(&prepared.data.tags, series, horizons).map(Some)
    }
}

/// Estimation data plus the names behind its exogenous series indices.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub data: RegressionData,
    pub exog_names: Vec<String>,
}

struct MacroPanel {
    price: Vec<f64>,
    design: crate::ingest::Design,
    exog_names: Vec<String>,
    standardize: bool,
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

/// `Δπ_t = ln(P_t/P_{t−1}) − ln(P_{t−1}/P_{t−2})` by raw row (`NaN` for the
/// first two rows).
pub fn inflation_change(price: &[f64]) -> Result<Vec<f64>> {
    if let Some(t) = price.iter().position(|p| !(*p > 0.0)) {
        return Err(Error::Data(format!("nonpositive price {} at row {t}", price[t])));
    }
    let mut out = vec![f64::NAN; price.len()];
    for t in 2..price.len() {
        out[t] = (price[t] / price[t - 1]).ln() - (price[t - 1] / price[t - 2]).ln();
    }
    Ok(out)
}

/// Regression of one column on others, rows with any missing value
/// rejected.
pub fn regression_from_table(
    table: &SeriesTable,
    target: &str,
    regressors: &[String],
    intercept: bool,
    standardize: bool,
) -> Result<Prepared> {
    let y = table.column(target)?.to_vec();
    let cols: Vec<&[f64]> = regressors.iter().map(|n| table.column(n)).collect::<Result<_>>()?;
    let mut tags: Vec<ColumnTag> = (0..cols.len()).map(|series| ColumnTag::Plain { series }).collect();
    if intercept {
        tags.push(ColumnTag::Intercept);
    }
    if tags.is_empty() {
        return Err(Error::Config("the regression has no regressors".into()));
    }
    let t = y.len();
    for (i, v) in y.iter().enumerate() {
        if !v.is_finite() || cols.iter().any(|c| !c[i].is_finite()) {
            return Err(Error::Data(format!("missing value in row {}", i + 1)));
        }
    }
    let rows: Vec<Vec<f64>> = (0..t)
        .map(|i| {
            let mut r: Vec<f64> = cols.iter().map(|c| c[i]).collect();
            if intercept {
                r.push(1.0);
            }
            r
        })
        .collect();
    let design = crate::ingest::Design {
        origins: (0..t).collect(),
        rows,
        tags,
        lags: 0,
    };
    let (mut data, _) = RegressionData::from_design(&design, &y, t.saturating_sub(1), standardize)?;
    data.lags = 0;
    Ok(Prepared {
        data,
        exog_names: regressors.to_vec(),
    })
}
