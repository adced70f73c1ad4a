//! Prior families for the state deviations, their hyperparameter bounds, and
//! the fixed hyperparameters of every other block.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::design::StateMode;
use crate::error::{Error, Result};
use crate::ingest::{ColumnTag, RegressionData};

/// Prior family for `Ψ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// `θ = (ζ₁, ζ₂)`: own lags `ζ₁²/l²`, other lags scaled by variance ratios.
    Minnesota,
    /// `θ = ξ`: `Ψ = ξ Ω` with variance-ratio scaling `Ω`.
    G,
    /// `θ = ξ`: `Ψ = ξ I`.
    Ridge,
}

impl Family {
    pub fn theta_dim(self) -> usize {
        match self {
            Family::Minnesota => 2,
            Family::G | Family::Ridge => 1,
        }
    }
}

/// Normal-Gamma prior on the constant coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormalGamma {
    pub vartheta: f64,
    pub a0: f64,
    pub a1: f64,
}

impl Default for NormalGamma {
    fn default() -> Self {
        NormalGamma {
            vartheta: 0.1,
            a0: 0.01,
            a1: 0.01,
        }
    }
}

/// Priors of the log-volatility process
/// `h_t = μ_h + ρ_h (h_{t-1} − μ_h) + σ_h ν_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvPrior {
    pub mu_mean: f64,
    pub mu_var: f64,
    /// `(ρ_h + 1)/2 ~ Beta(rho_a, rho_b)`.
    pub rho_a: f64,
    pub rho_b: f64,
    /// `σ_h² ~ Gamma(sigma2_shape, sigma2_rate)`.
    pub sigma2_shape: f64,
    pub sigma2_rate: f64,
}

impl Default for SvPrior {
    fn default() -> Self {
        SvPrior {
            mu_mean: 0.0,
            mu_var: 10.0,
            rho_a: 25.0,
            rho_b: 5.0,
            sigma2_shape: 0.5,
            sigma2_rate: 0.5,
        }
    }
}

/// Hyperparameters of the finite mixture on the state deviations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixturePrior {
    pub groups: usize,
    pub c0: f64,
    pub c1: f64,
    /// Concentration `a ~ Gamma(conc_shape, conc_rate)`.
    pub conc_shape: f64,
    pub conc_rate: f64,
    /// Hold the concentration at this value instead of sampling it.
    pub fixed_concentration: Option<f64>,
}

impl Default for MixturePrior {
    fn default() -> Self {
        MixturePrior {
            groups: 12,
            c0: 0.6,
            c1: 0.6,
            conc_shape: 10.0,
            conc_rate: 10.0,
            fixed_concentration: None,
        }
    }
}

/// Complete prior specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSpec {
    pub family: Family,
    pub clustering: bool,
    /// Scales the upper bound `𝔰₁ = κ T / K²`.
    pub kappa: f64,
    /// Lower bound `𝔰₀` of the uniform hyperprior.
    pub lower_bound: f64,
    pub normal_gamma: NormalGamma,
    pub sv: SvPrior,
    pub mixture: MixturePrior,
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            family: Family::Ridge,
            clustering: false,
            kappa: 1.0,
            lower_bound: 1e-10,
            normal_gamma: NormalGamma::default(),
            sv: SvPrior::default(),
            mixture: MixturePrior::default(),
        }
    }
}

impl PriorSpec {
    /// Reject combinations the sampler cannot handle.
    pub fn validate(&self, mode: StateMode) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(Error::Config(format!("kappa = {} must lie in (0, 1]", self.kappa)));
        }
        if !(self.lower_bound > 0.0) {
            return Err(Error::Config("lower bound of the hyperprior must be positive".into()));
        }
        if self.clustering && self.family == Family::Minnesota {
            return Err(Error::Config(
                "the Minnesota prior cannot be combined with clustering".into(),
            ));
        }
        if mode == StateMode::LowerTriangular {
            if self.family != Family::Ridge {
                return Err(Error::Config(
                    "random-walk states require the ridge prior".into(),
                ));
            }
            if self.clustering {
                return Err(Error::Config(
                    "random-walk states cannot be combined with clustering".into(),
                ));
            }
        }
        if self.clustering && self.mixture.groups < 1 {
            return Err(Error::Config("clustering needs at least one group".into()));
        }
        let ng = &self.normal_gamma;
        let sv = &self.sv;
        let mx = &self.mixture;
        let positive = [
            ("normal_gamma.vartheta", ng.vartheta),
            ("normal_gamma.a0", ng.a0),
            ("normal_gamma.a1", ng.a1),
            ("sv.mu_var", sv.mu_var),
            ("sv.rho_a", sv.rho_a),
            ("sv.rho_b", sv.rho_b),
            ("sv.sigma2_shape", sv.sigma2_shape),
            ("sv.sigma2_rate", sv.sigma2_rate),
            ("mixture.c0", mx.c0),
            ("mixture.c1", mx.c1),
            ("mixture.conc_shape", mx.conc_shape),
            ("mixture.conc_rate", mx.conc_rate),
        ];
        if let Some(a) = mx.fixed_concentration {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::Config(format!("fixed concentration {a} must be positive")));
            }
        }
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be positive")));
            }
        }
        Ok(())
    }
}

/// Upper bound `𝔰₁ = κ T / K²` of the uniform hyperprior.
pub fn hyper_bound(kappa: f64, t: usize, k: usize) -> Result<f64> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::Config(format!("kappa = {kappa} must lie in (0, 1]")));
    }
    if t == 0 || k == 0 {
        return Err(Error::Config("T and K must be positive".into()));
    }
    Ok(kappa * t as f64 / (k * k) as f64)
}

/// Lower and upper bound of each `θ` component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub fn new(spec: &PriorSpec, t: usize, k: usize) -> Result<Self> {
        let upper = hyper_bound(spec.kappa, t, k)?;
        if !(spec.lower_bound < upper) {
            return Err(Error::Config(format!(
                "hyperprior bounds [{:e}, {upper:e}] are empty",
                spec.lower_bound
            )));
        }
        Ok(Bounds {
            lower: spec.lower_bound,
            upper,
        })
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.iter().all(|&v| v >= self.lower && v <= self.upper)
    }
}

/// Diagonal of `Ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Psi(pub Vec<f64>);

impl Psi {
    pub fn diag(&self) -> &[f64] {
        &self.0
    }

    /// `x' Ψ x`.
    pub fn quad(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.0).map(|(a, p)| a * a * p).sum()
    }
}

/// Column roles plus residual variances from univariate AR fits, everything
/// `Ψ` is allowed to depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMeta {
    pub tags: Vec<ColumnTag>,
    /// AR residual variance of the dependent series.
    pub sigma2_y: f64,
    /// AR residual variance of each exogenous series, indexed by
    /// `ColumnTag::ExogLag::series`.
    pub sigma2_exog: Vec<f64>,
}

impl ColumnMeta {
    /// Metadata for a design whose columns carry no lag structure.
    pub fn plain(tags: Vec<ColumnTag>) -> Self {
        ColumnMeta {
            tags,
            sigma2_y: 1.0,
            sigma2_exog: Vec::new(),
        }
    }

    /// AR(`p`) residual variances estimated on the estimation window: the
    /// response for the dependent series and the first-lag column for each
    /// exogenous series.
    pub fn from_data(data: &RegressionData, p: usize) -> Result<Self> {
        let tags = data.tags.clone();
        let y: Vec<f64> = data.y.iter().copied().collect();
        let sigma2_y = ar_variance("response", &y, p)?;
        let n_exog = tags
            .iter()
            .filter_map(|t| match t {
                ColumnTag::ExogLag { series, .. } => Some(series + 1),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        let mut sigma2_exog = Vec::with_capacity(n_exog);
        for s in 0..n_exog {
            let col = tags
                .iter()
                .position(|t| *t == ColumnTag::ExogLag { series: s, lag: 1 })
                .ok_or_else(|| Error::Structure(format!("exogenous series {s} has no first lag")))?;
            let x: Vec<f64> = data.x.column(col).iter().copied().collect();
            sigma2_exog.push(ar_variance(&format!("exogenous {s}"), &x, p)?);
        }
        Ok(ColumnMeta {
            tags,
            sigma2_y,
            sigma2_exog,
        })
    }

    fn ratio(&self, series: usize) -> Result<f64> {
        self.sigma2_exog
            .get(series)
            .map(|s| self.sigma2_y / s)
            .ok_or_else(|| Error::Config(format!("no AR variance for exogenous series {series}")))
    }
}

/// Assemble `diag(Ψ)` for the current hyperparameters.
pub fn build_psi(family: Family, theta: &[f64], meta: &ColumnMeta) -> Result<Psi> {
    if theta.len() != family.theta_dim() {
        return Err(Error::Contract(format!(
            "{family:?} expects {} hyperparameters, got {}",
            family.theta_dim(),
            theta.len()
        )));
    }
    if theta.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain(format!("hyperparameters {theta:?} must be positive")));
    }
    let mut out = Vec::with_capacity(meta.tags.len());
    for tag in &meta.tags {
        let v = match (family, *tag) {
            (Family::Ridge, _) => theta[0],
            (Family::G, ColumnTag::ExogLag { series, .. }) => theta[0] * meta.ratio(series)?,
            (Family::G, _) => theta[0],
            (Family::Minnesota, ColumnTag::OwnLag { lag }) => theta[0].powi(2) / (lag * lag) as f64,
            (Family::Minnesota, ColumnTag::ExogLag { series, lag }) => {
                theta[1].powi(2) / (lag * lag) as f64 * meta.ratio(series)?
            }
            (Family::Minnesota, ColumnTag::Intercept) => theta[1].powi(2),
            (Family::Minnesota, ColumnTag::Plain { .. }) => {
                return Err(Error::Config(
                    "the Minnesota prior needs lag-tagged design columns".into(),
                ))
            }
        };
        out.push(v);
    }
    Ok(Psi(out))
}

/// Residual variance of an OLS AR(`p`) fit with intercept, one per series.
pub fn ar_variances(series: &[(&str, &[f64])], p: usize) -> Result<Vec<f64>> {
    if p == 0 {
        return Err(Error::Config("AR order must be positive".into()));
    }
    series.iter().map(|(name, y)| ar_variance(name, y, p)).collect()
}

fn ar_variance(name: &str, y: &[f64], p: usize) -> Result<f64> {
    let n = y.len();
    if n <= 2 * p + 1 {
        return Err(Error::Data(format!(
            "series {name} has {n} observations, too few for an AR({p})"
        )));
    }
    let rows = n - p;
    let x = DMatrix::from_fn(rows, p + 1, |i, j| if j == 0 { 1.0 } else { y[p + i - j] });
    let target = DVector::from_iterator(rows, (p..n).map(|t| y[t]));
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd.singular_values.min() <= 1e-10 * smax {
        return Err(Error::Data(format!(
            "AR({p}) regression for series {name} is singular (constant series?)"
        )));
    }
    let coef = svd
        .solve(&target, 0.0)
        .map_err(|e| Error::Numerical(format!("AR fit for {name}: {e}")))?;
    let resid = target - x * coef;
    Ok(resid.norm_squared() / (rows - p - 1) as f64)
}
