//! Conditional posterior draws for everything except the mixture block:
//! constant coefficients, Normal-Gamma shrinkage, state deviations through
//! the thin SVD, the prior hyperparameters `θ`, and stochastic volatility.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::banded::{sample_from_precision, BandedSpd};
use crate::design::{assemble_static, thin_svd, whiten_system, StateMode, StaticSystem, SvdFactors};
use crate::dist::{ln_normal_pdf, sample_gamma, sample_gig, sample_log_categorical, sample_truncated_normal, std_normal, uniform_open};
use crate::error::{Error, Result};
use crate::ingest::RegressionData;
use crate::mixture::MixtureState;
use crate::priors::{build_psi, Bounds, ColumnMeta, Psi, PriorSpec, SvPrior};
use crate::rng::Rng;

/// Parameters of `h_t = μ + ρ (h_{t-1} − μ) + σ ν_t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvParams {
    pub mu: f64,
    pub rho: f64,
    pub sigma2: f64,
}

/// Error-variance specification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Volatility {
    Stochastic,
    /// Known constant variance; the volatility block is skipped.
    Fixed { sigma2: f64 },
}

/// Blocks held fixed at given values (used for cross-sampler checks and
/// conditional experiments).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixedBlocks {
    pub gamma: Option<Vec<f64>>,
    pub theta: Option<Vec<f64>>,
}

/// Adaptive random-walk state for the `θ` update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaProposal {
    pub scale: f64,
    pub accepted: usize,
    pub proposed: usize,
    batch_accepted: usize,
    batch_proposed: usize,
}

/// Batch length of the proposal-scale adaptation.
pub const ADAPT_BATCH: usize = 50;

impl ThetaProposal {
    pub fn new(scale: f64) -> Self {
        ThetaProposal {
            scale,
            accepted: 0,
            proposed: 0,
            batch_accepted: 0,
            batch_proposed: 0,
        }
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub(crate) fn record(&mut self, accepted: bool, adapt: bool) {
        self.proposed += 1;
        self.accepted += accepted as usize;
        if !adapt {
            return;
        }
        self.batch_proposed += 1;
        self.batch_accepted += accepted as usize;
        if self.batch_proposed == ADAPT_BATCH {
            let rate = self.batch_accepted as f64 / ADAPT_BATCH as f64;
            if !(0.2..=0.4).contains(&rate) {
                self.scale *= (3.0 * (rate - 0.3)).exp();
            }
            self.batch_accepted = 0;
            self.batch_proposed = 0;
        }
    }

    /// Restart the acceptance counters (after burn-in).
    pub fn reset_counts(&mut self) {
        self.accepted = 0;
        self.proposed = 0;
    }
}

/// Blocks of one Gibbs sweep, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Gamma,
    Locals,
    Global,
    States,
    Volatility,
    StateRefresh,
    Theta,
    Weights,
    Indicators,
    Means,
    Scales,
    Concentration,
    Permutation,
}

impl Block {
    pub fn name(self) -> &'static str {
        match self {
            Block::Gamma => "gamma",
            Block::Locals => "local_scales",
            Block::Global => "global_scale",
            Block::States => "states",
            Block::Volatility => "volatility",
            Block::StateRefresh => "state_refresh",
            Block::Theta => "theta",
            Block::Weights => "weights",
            Block::Indicators => "indicators",
            Block::Means => "means",
            Block::Scales => "mean_scales",
            Block::Concentration => "concentration",
            Block::Permutation => "permutation",
        }
    }
}

/// Complete state of one Markov chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub gamma: Vec<f64>,
    pub tau: Vec<f64>,
    pub psi_global: f64,
    /// Block-major `K·T` state deviations.
    pub beta_tilde: Vec<f64>,
    pub theta: Vec<f64>,
    pub h: Vec<f64>,
    pub sv: SvParams,
    pub mixture: Option<MixtureState>,
    pub proposal: ThetaProposal,
}

impl ChainState {
    pub fn sigma(&self) -> Vec<f64> {
        self.h.iter().map(|h| (0.5 * h).exp()).collect()
    }

    /// Prior mean of `β̃` (cluster means, or zero).
    pub fn prior_mean(&self, t: usize, k: usize) -> Vec<f64> {
        match &self.mixture {
            Some(m) => {
                let mut out = Vec::with_capacity(t * k);
                for &g in &m.indicators {
                    out.extend_from_slice(&m.means[g]);
                }
                out
            }
            None => vec![0.0; t * k],
        }
    }
}

/// Everything a sweep needs that does not change between sweeps.
#[derive(Debug, Clone)]
pub struct Model {
    pub data: RegressionData,
    pub system: StaticSystem,
    /// Factors of the unscaled design, valid for every `σ` in block mode and
    /// for a fixed `σ` in lower-triangular mode.
    pub base_svd: SvdFactors,
    pub spec: PriorSpec,
    pub meta: ColumnMeta,
    pub bounds: Bounds,
    pub volatility: Volatility,
    pub fixed: FixedBlocks,
    pub truncate_svd: bool,
    /// When false every block samples from its prior.
    pub likelihood: bool,
    /// Force `β̃ ≡ 0` (constant-coefficient competitor).
    pub time_invariant: bool,
}

/// Options for [`Model::new`].
#[derive(Debug, Clone)]
pub struct ModelOptions {
    pub mode: StateMode,
    pub volatility: Volatility,
    pub fixed: FixedBlocks,
    pub truncate_svd: bool,
    pub likelihood: bool,
    pub time_invariant: bool,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions {
            mode: StateMode::BlockDiagonal,
            volatility: Volatility::Stochastic,
            fixed: FixedBlocks::default(),
            truncate_svd: false,
            likelihood: true,
            time_invariant: false,
        }
    }
}

impl Model {
    pub fn new(data: RegressionData, spec: PriorSpec, meta: ColumnMeta, opts: ModelOptions) -> Result<Self> {
        spec.validate(opts.mode)?;
        if opts.time_invariant && spec.clustering {
            return Err(Error::Config("a time-invariant model has no states to cluster".into()));
        }
        if meta.tags.len() != data.k() {
            return Err(Error::Structure(format!(
                "{} column tags for {} regressors",
                meta.tags.len(),
                data.k()
            )));
        }
        if let Volatility::Fixed { sigma2 } = opts.volatility {
            if !(sigma2 > 0.0) {
                return Err(Error::Config(format!("fixed variance {sigma2} must be positive")));
            }
        }
        let bounds = Bounds::new(&spec, data.t(), data.k())?;
        if let Some(g) = &opts.fixed.gamma {
            if g.len() != data.k() {
                return Err(Error::Config("fixed gamma has the wrong length".into()));
            }
        }
        if let Some(th) = &opts.fixed.theta {
            if th.len() != spec.family.theta_dim() || !bounds.contains(th) {
                return Err(Error::Config(format!(
                    "fixed theta {th:?} must have {} entries inside [{:e}, {:e}]",
                    spec.family.theta_dim(),
                    bounds.lower,
                    bounds.upper
                )));
            }
        }
        let system = assemble_static(&data.x, opts.mode)?;
        let base_svd = thin_svd(&system, opts.truncate_svd)?;
        Ok(Model {
            data,
            system,
            base_svd,
            spec,
            meta,
            bounds,
            volatility: opts.volatility,
            fixed: opts.fixed,
            truncate_svd: opts.truncate_svd,
            likelihood: opts.likelihood,
            time_invariant: opts.time_invariant,
        })
    }

    pub fn t(&self) -> usize {
        self.data.t()
    }

    pub fn k(&self) -> usize {
        self.data.k()
    }

    pub fn mode(&self) -> StateMode {
        self.system.mode()
    }

    pub fn psi(&self, theta: &[f64]) -> Result<Psi> {
        build_psi(self.spec.family, theta, &self.meta)
    }

    /// `y − Xγ`.
    pub fn y_hat(&self, gamma: &[f64]) -> Vec<f64> {
        let g = DVector::from_column_slice(gamma);
        (&self.data.y - &self.data.x * g).as_slice().to_vec()
    }

    /// Coefficient paths `β_t` (block-major) implied by `γ` and `β̃`.
    pub fn coefficient_paths(&self, state: &ChainState) -> Vec<f64> {
        coefficient_paths(self.mode(), &state.gamma, &state.beta_tilde)
    }

    /// A starting point: `γ` at least squares, unit shrinkage, `θ` at a tenth
    /// of its upper bound and a flat log-volatility at the difference-based
    /// noise variance. With clustering, the states start at the exact-fit
    /// split of the residuals and the labels at residual quantile groups.
    pub fn initial_state(&self, _rng: &mut Rng) -> Result<ChainState> {
        let (t, k) = (self.t(), self.k());
        let theta = match &self.fixed.theta {
            Some(th) => th.clone(),
            None => vec![(0.1 * self.bounds.upper).max(self.bounds.lower * 10.0); self.spec.family.theta_dim()],
        };
        let gamma = match &self.fixed.gamma {
            Some(g) => g.clone(),
            None => least_squares(&self.data.y, &self.data.x),
        };
        let (h0, sv) = match self.volatility {
            Volatility::Fixed { sigma2 } => (sigma2.ln(), SvParams { mu: sigma2.ln(), rho: 0.0, sigma2: 1.0 }),
            Volatility::Stochastic => {
                let v = noise_variance(&self.data.y, &self.data.x);
                (v.ln(), SvParams { mu: v.ln(), rho: 0.9, sigma2: 0.1 })
            }
        };
        let mut beta_tilde = vec![0.0; t * k];
        let mixture = if self.spec.clustering {
            let resid = self.y_hat(&gamma);
            if self.mode() == StateMode::BlockDiagonal && !self.time_invariant {
                for (s, r) in resid.iter().enumerate() {
                    let row = self.data.x.row(s);
                    let nn = row.norm_squared();
                    if nn > 0.0 {
                        for j in 0..k {
                            beta_tilde[s * k + j] = row[j] * r / nn;
                        }
                    }
                }
            }
            Some(MixtureState::from_states(&self.spec.mixture, &beta_tilde, &resid, k)?)
        } else {
            None
        };
        let n_terms = (t * k) as f64 / self.spec.family.theta_dim() as f64;
        Ok(ChainState {
            gamma,
            tau: vec![1.0; k],
            psi_global: 1.0,
            beta_tilde,
            theta,
            h: vec![h0; t],
            sv,
            mixture,
            proposal: ThetaProposal::new(2.4 * (2.0 / n_terms).sqrt()),
        })
    }
}

/// Minimum-norm least-squares coefficients, zero when `T ≤ K`.
pub fn least_squares(y: &DVector<f64>, x: &DMatrix<f64>) -> Vec<f64> {
    if y.len() <= x.ncols() {
        return vec![0.0; x.ncols()];
    }
    match x.clone().svd(true, true).solve(y, 1e-10) {
        Ok(b) => b.as_slice().to_vec(),
        Err(_) => vec![0.0; x.ncols()],
    }
}

/// Difference-based noise variance `Σ (Δe_t)² / (2(T−1))` of the OLS
/// residuals `e`. Unlike the residual variance it is not inflated by
/// coefficient breaks.
pub fn noise_variance(y: &DVector<f64>, x: &DMatrix<f64>) -> f64 {
    let t = y.len();
    let resid = if t > x.ncols() {
        match x.clone().svd(true, true).solve(y, 1e-10) {
            Ok(b) => y - x * b,
            Err(_) => y.clone(),
        }
    } else {
        y.clone()
    };
    if t < 2 {
        return resid.norm_squared().max(1e-8);
    }
    let s: f64 = (1..t).map(|i| (resid[i] - resid[i - 1]).powi(2)).sum();
    (s / (2.0 * (t - 1) as f64)).max(1e-8)
}

/// `β_t = γ + β̃_t` (white-noise states) or `γ + Σ_{s≤t} β̃_s` (random walk).
pub fn coefficient_paths(mode: StateMode, gamma: &[f64], beta_tilde: &[f64]) -> Vec<f64> {
    let k = gamma.len();
    let t_len = beta_tilde.len() / k;
    let mut out = vec![0.0; t_len * k];
    let mut cum = vec![0.0; k];
    for t in 0..t_len {
        for j in 0..k {
            let b = beta_tilde[t * k + j];
            let state = match mode {
                StateMode::BlockDiagonal => b,
                StateMode::LowerTriangular => {
                    cum[j] += b;
                    cum[j]
                }
            };
            out[t * k + j] = gamma[j] + state;
        }
    }
    out
}

pub(crate) fn chol_sample(precision: DMatrix<f64>, rhs: &DVector<f64>, rng: &mut Rng, context: &str) -> Result<Vec<f64>> {
    let k = rhs.len();
    let chol = Cholesky::new(precision).ok_or_else(|| Error::NotPositiveDefinite {
        context: context.to_string(),
    })?;
    let mean = chol.solve(rhs);
    let z = DVector::from_fn(k, |_, _| std_normal(rng));
    let lt = chol.l().transpose();
    let dev = lt
        .solve_upper_triangular(&z)
        .ok_or_else(|| Error::Numerical(format!("{context}: triangular solve failed")))?;
    Ok((mean + dev).as_slice().to_vec())
}

/// Draw `γ ~ N(V X̃'ỹ, V)` with `V = (X̃'X̃ + diag(τ)⁻¹)⁻¹`, rows scaled by
/// `1/σ_t` and `ỹ` the residual after the states.
pub fn draw_gamma(state: &ChainState, model: &Model, rng: &mut Rng) -> Result<Vec<f64>> {
    let (t_len, k) = (model.t(), model.k());
    let mut precision = DMatrix::from_diagonal(&DVector::from_iterator(k, state.tau.iter().map(|t| 1.0 / t)));
    let mut rhs = DVector::zeros(k);
    if model.likelihood {
        let zb = model.system.mul(&state.beta_tilde);
        let sigma = state.sigma();
        let mut xs = model.data.x.clone();
        let mut ys = DVector::zeros(t_len);
        for t in 0..t_len {
            let inv = 1.0 / sigma[t];
            xs.row_mut(t).scale_mut(inv);
            ys[t] = (model.data.y[t] - zb[t]) * inv;
        }
        precision += xs.tr_mul(&xs);
        rhs = xs.tr_mul(&ys);
    }
    chol_sample(precision, &rhs, rng, "gamma precision")
}

/// Smallest `γ_j²` handed to the GIG sampler.
const GAMMA_SQ_FLOOR: f64 = 1e-20;

/// `τ_j ~ GIG(ϑ − 1/2, ϑψ, γ_j²)`, clamped to `[1e-20, 1e20]`.
pub fn draw_ng_locals(gamma: &[f64], psi_global: f64, spec: &PriorSpec, rng: &mut Rng) -> Result<Vec<f64>> {
    let vt = spec.normal_gamma.vartheta;
    gamma
        .iter()
        .map(|g| {
            let c = (g * g).max(GAMMA_SQ_FLOOR);
            Ok(sample_gig(rng, vt - 0.5, vt * psi_global, c)?.clamp(1e-20, 1e20))
        })
        .collect()
}

/// `ψ ~ Gamma(a₀ + ϑK, a₁ + ϑ/2 Σ τ_j)`.
pub fn draw_ng_global(tau: &[f64], spec: &PriorSpec, rng: &mut Rng) -> Result<f64> {
    let ng = &spec.normal_gamma;
    let shape = ng.a0 + ng.vartheta * tau.len() as f64;
    let rate = ng.a1 + 0.5 * ng.vartheta * tau.iter().sum::<f64>();
    sample_gamma(rng, shape, rate)
}

/// Posterior moments of the standardized coefficients: the mean and the
/// diagonal `Ξ` that, with the factors, represents the covariance
/// `D₀ − D₀ V Ξ V' D₀`.
#[derive(Debug, Clone)]
pub struct Moments {
    pub mean: Vec<f64>,
    pub xi: Vec<f64>,
}

/// Conjugate posterior of `β̆` under `y* = Z* β̆ + ε`, `ε ~ N(0, I)` and
/// `β̆ ~ N(b0, diag(d0))`, evaluated through the thin SVD of `Z*`.
pub fn posterior_moments(svd: &SvdFactors, d0: &[f64], b0: &[f64], y_star: &[f64]) -> Result<Moments> {
    let lambda = svd.lambda();
    let vtdv = svd.vtdv_diag(d0)?;
    let xi: Vec<f64> = lambda.iter().zip(&vtdv).map(|(l, q)| 1.0 / (1.0 / (l * l) + q)).collect();
    let uty = svd.ut_mul(y_star);
    let b0_zero = b0.iter().all(|v| *v == 0.0);
    let vtb0 = if b0_zero { vec![0.0; lambda.len()] } else { svd.vt_mul(b0) };
    let scalar = matches!(svd, SvdFactors::Dense(_)) && d0.windows(2).all(|w| w[0] == w[1]);
    let mean = if scalar {
        let theta = d0[0];
        let coef: Vec<f64> = (0..lambda.len())
            .map(|i| lambda[i] / (1.0 / theta + lambda[i] * lambda[i]) * uty[i] - theta * xi[i] * vtb0[i])
            .collect();
        let mut m = svd.v_mul(&coef);
        for (m, b) in m.iter_mut().zip(b0) {
            *m += b;
        }
        m
    } else {
        let lu: Vec<f64> = lambda.iter().zip(&uty).map(|(l, u)| l * u).collect();
        let zty = svd.v_mul(&lu);
        let dg: Vec<f64> = d0.iter().zip(&zty).map(|(d, g)| d * g).collect();
        let vtdg = svd.vt_mul(&dg);
        let c: Vec<f64> = (0..lambda.len()).map(|i| xi[i] * (vtdg[i] + vtb0[i])).collect();
        let corr = svd.v_mul(&c);
        (0..d0.len()).map(|i| dg[i] + b0[i] - d0[i] * corr[i]).collect()
    };
    Ok(Moments { mean, xi })
}

/// The affine map `(a, b) ↦ μ + a − D₀ V Ξ (V'a + b)`, which sends
/// `a ~ N(0, D₀)`, `b ~ N(0, Λ⁻²)` to a draw from the posterior.
pub fn posterior_map(moments: &Moments, svd: &SvdFactors, d0: &[f64], a: &[f64], b: &[f64]) -> Vec<f64> {
    let vta = svd.vt_mul(a);
    let c: Vec<f64> = (0..moments.xi.len()).map(|i| moments.xi[i] * (vta[i] + b[i])).collect();
    let corr = svd.v_mul(&c);
    (0..d0.len()).map(|i| moments.mean[i] + a[i] - d0[i] * corr[i]).collect()
}

/// One exact draw of `β̆` given its posterior moments.
pub fn draw_beta_breve(moments: &Moments, svd: &SvdFactors, d0: &[f64], rng: &mut Rng) -> Vec<f64> {
    let a: Vec<f64> = d0.iter().map(|d| d.sqrt() * std_normal(rng)).collect();
    let b: Vec<f64> = svd.lambda().iter().map(|l| std_normal(rng) / l).collect();
    posterior_map(moments, svd, d0, &a, &b)
}

fn prior_diag(psi: &Psi, t: usize) -> Vec<f64> {
    let k = psi.0.len();
    (0..t * k).map(|i| psi.0[i % k]).collect()
}

/// Draw `β̃ | γ, σ, θ, b0` and return it block-major.
pub fn draw_beta_tilde(state: &ChainState, model: &Model, svd_cache: &mut SvdCache, rng: &mut Rng) -> Result<Vec<f64>> {
    let (t_len, k) = (model.t(), model.k());
    let psi = model.psi(&state.theta)?;
    let d0 = prior_diag(&psi, t_len);
    let b0 = state.prior_mean(t_len, k);
    let sigma = state.sigma();
    if !model.likelihood {
        return Ok((0..t_len * k)
            .map(|i| b0[i] + sigma[i / k] * d0[i].sqrt() * std_normal(rng))
            .collect());
    }
    let y_hat = model.y_hat(&state.gamma);
    let w = whiten_system(&model.system, &y_hat, &sigma, &b0)?;
    let svd = svd_cache.factors(model, &sigma)?;
    let zero = vec![0.0; t_len * k];
    let moments = posterior_moments(svd, &d0, &zero, w.y.as_slice())?;
    let breve = draw_beta_breve(&moments, svd, &d0, rng);
    Ok(w.unwhiten(&breve, &b0))
}

/// Factors of the standardized design for the current `σ` path. Block mode
/// always reuses the base factors; lower-triangular mode refactors only when
/// `σ` changes.
#[derive(Debug, Clone, Default)]
pub struct SvdCache {
    sigma: Vec<f64>,
    factors: Option<SvdFactors>,
    pub refactorizations: usize,
}

impl SvdCache {
    pub fn factors<'a>(&'a mut self, model: &'a Model, sigma: &[f64]) -> Result<&'a SvdFactors> {
        if model.mode() == StateMode::BlockDiagonal {
            return Ok(&model.base_svd);
        }
        if sigma.iter().all(|s| *s == 1.0) {
            return Ok(&model.base_svd);
        }
        if self.factors.is_none() || self.sigma != sigma {
            let zeros = vec![0.0; model.t() * model.k()];
            let w = whiten_system(&model.system, &vec![0.0; model.t()], sigma, &zeros)?;
            self.factors = Some(thin_svd(&w.system, model.truncate_svd)?);
            self.sigma = sigma.to_vec();
            self.refactorizations += 1;
        }
        Ok(self.factors.as_ref().expect("factors present"))
    }
}

/// `ln N(β̃ | b0, diag(σ²) ⊗ Ψ(θ))`, the only factor of the posterior of `θ`
/// besides its uniform prior.
pub fn theta_log_target(theta: &[f64], state: &ChainState, model: &Model) -> Result<f64> {
    let psi = model.psi(theta)?;
    let (t_len, k) = (model.t(), model.k());
    let b0 = state.prior_mean(t_len, k);
    let mut acc = 0.0;
    let ln_psi: f64 = psi.0.iter().map(|p| p.ln()).sum();
    for t in 0..t_len {
        let s2 = state.h[t].exp();
        let mut q = 0.0;
        for j in 0..k {
            let d = state.beta_tilde[t * k + j] - b0[t * k + j];
            q += d * d / psi.0[j];
        }
        acc += -0.5 * (ln_psi + k as f64 * s2.ln()) - 0.5 * q / s2;
    }
    Ok(acc)
}

/// Random-walk MH on `ln θ` (uniform prior on `[𝔰₀, 𝔰₁]`). Returns whether
/// the proposal was accepted; `adapt` enables scale tuning.
pub fn draw_theta(state: &mut ChainState, model: &Model, adapt: bool, rng: &mut Rng) -> Result<bool> {
    if model.fixed.theta.is_some() {
        return Ok(false);
    }
    let scale = state.proposal.scale;
    let proposal: Vec<f64> = state.theta.iter().map(|v| v * (scale * std_normal(rng)).exp()).collect();
    let u = uniform_open(rng);
    let accepted = if model.bounds.contains(&proposal) {
        let jac: f64 = proposal.iter().zip(&state.theta).map(|(p, c)| (p / c).ln()).sum();
        let log_ratio = theta_log_target(&proposal, state, model)? - theta_log_target(&state.theta, state, model)? + jac;
        u.ln() < log_ratio
    } else {
        false
    };
    if accepted {
        state.theta = proposal;
    }
    state.proposal.record(accepted, adapt);
    Ok(accepted)
}

/// Ten-component normal mixture approximation of the log-χ²₁ law
/// (weights, means, variances).
pub const LOG_CHI2_MIXTURE: [(f64, f64, f64); 10] = [
    (0.00609, 1.92677, 0.11265),
    (0.04775, 1.34744, 0.17788),
    (0.13057, 0.73504, 0.26768),
    (0.20674, 0.02266, 0.40611),
    (0.22715, -0.85173, 0.62699),
    (0.18842, -1.97278, 0.98583),
    (0.12047, -3.46788, 1.57469),
    (0.05591, -5.55246, 2.54498),
    (0.01575, -8.68384, 4.16591),
    (0.00115, -14.65000, 7.33342),
];

/// Floor on squared residuals before taking logs.
const LOG_SQ_FLOOR: f64 = 1e-300;

/// Volatility observations `e_{tj} = σ_t u_{tj}`, `u ~ N(0, 1)`, with
/// `per_t` entries per period.
pub struct VolObs<'a> {
    pub values: &'a [f64],
    pub per_t: usize,
}

/// Draw the log-volatility path jointly given standardized observations,
/// then update `(μ, ρ, σ²)`.
pub fn draw_sv_given_obs(
    obs: Option<&VolObs<'_>>,
    h: &mut [f64],
    params: &mut SvParams,
    prior: &SvPrior,
    rng: &mut Rng,
) -> Result<()> {
    let t_len = h.len();
    let SvParams { mu, rho, sigma2 } = *params;
    let mut q = BandedSpd::zeros(t_len, 1);
    let mut rhs = vec![0.0; t_len];
    // AR(1) prior precision with stationary start
    for t in 0..t_len {
        let d = if t == 0 || t == t_len - 1 { 1.0 } else { 1.0 + rho * rho };
        let d = if t_len == 1 { 1.0 - rho * rho } else { d };
        q.add(t, t, d / sigma2);
        if t > 0 {
            q.add(t, t - 1, -rho / sigma2);
        }
    }
    let ones_q = q.mul_vec(&vec![mu; t_len]);
    rhs.copy_from_slice(&ones_q);
    if let Some(obs) = obs {
        let n = obs.per_t;
        for t in 0..t_len {
            for j in 0..n {
                let e = obs.values[t * n + j];
                let ystar = (e * e).max(LOG_SQ_FLOOR).ln();
                let logp: Vec<f64> = LOG_CHI2_MIXTURE
                    .iter()
                    .map(|&(p, m, v)| p.ln() + ln_normal_pdf(ystar, h[t] + m, v))
                    .collect();
                let s = sample_log_categorical(rng, &logp)?;
                let (_, m, v) = LOG_CHI2_MIXTURE[s];
                q.add(t, t, 1.0 / v);
                rhs[t] += (ystar - m) / v;
            }
        }
    }
    let chol = q.cholesky()?;
    let z: Vec<f64> = (0..t_len).map(|_| std_normal(rng)).collect();
    let draw = sample_from_precision(&chol, &rhs, &z);
    h.copy_from_slice(&draw);
    draw_sv_params(h, params, prior, rng)
}

/// Update `μ_h` (conjugate normal), `ρ_h` (independence MH from the AR
/// regression proposal) and `σ_h²` (exact GIG) given the path.
pub fn draw_sv_params(h: &[f64], params: &mut SvParams, prior: &SvPrior, rng: &mut Rng) -> Result<()> {
    let t_len = h.len();
    // μ | h, ρ, σ²
    {
        let SvParams { rho, sigma2, .. } = *params;
        let mut prec = 1.0 / prior.mu_var + (1.0 - rho * rho) / sigma2;
        let mut num = prior.mu_mean / prior.mu_var + (1.0 - rho * rho) * h[0] / sigma2;
        for t in 1..t_len {
            prec += (1.0 - rho).powi(2) / sigma2;
            num += (1.0 - rho) * (h[t] - rho * h[t - 1]) / sigma2;
        }
        params.mu = num / prec + std_normal(rng) / prec.sqrt();
    }
    // ρ | h, μ, σ²
    if t_len > 2 {
        let SvParams { mu, rho, sigma2 } = *params;
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for t in 1..t_len {
            let x = h[t - 1] - mu;
            sxx += x * x;
            sxy += x * (h[t] - mu);
        }
        if sxx > 0.0 {
            let mean = sxy / sxx;
            let sd = (sigma2 / sxx).sqrt();
            let lim = 1.0 - 1e-10;
            let prop = sample_truncated_normal(rng, mean, sd, -lim, lim);
            let log_rest = |r: f64| {
                (prior.rho_a - 1.0) * ((1.0 + r) / 2.0).ln()
                    + (prior.rho_b - 1.0) * ((1.0 - r) / 2.0).ln()
                    + ln_normal_pdf(h[0], mu, sigma2 / (1.0 - r * r))
            };
            if uniform_open(rng).ln() < log_rest(prop) - log_rest(rho) {
                params.rho = prop;
            }
        }
    }
    // σ² | h, μ, ρ
    {
        let SvParams { mu, rho, .. } = *params;
        let mut s = (1.0 - rho * rho) * (h[0] - mu).powi(2);
        for t in 1..t_len {
            s += (h[t] - mu - rho * (h[t - 1] - mu)).powi(2);
        }
        // Gamma(shape, rate) prior times the AR likelihood is GIG.
        let p = prior.sigma2_shape - t_len as f64 / 2.0;
        params.sigma2 = sample_gig(rng, p, 2.0 * prior.sigma2_rate, s.max(1e-300))?.max(1e-12);
    }
    Ok(())
}

/// Volatility block. In white-noise mode the states are integrated out,
/// giving one observation `(ŷ_t − x_t'm_t)/ς_t` with `ς_t² = 1 + x_t'Ψx_t`
/// per period. In random-walk mode the draw conditions on `β̃`, with the
/// residual and the `K` standardized shocks as observations.
pub fn draw_sv(state: &mut ChainState, model: &Model, rng: &mut Rng) -> Result<()> {
    if let Volatility::Fixed { sigma2 } = model.volatility {
        state.h.iter_mut().for_each(|h| *h = sigma2.ln());
        return Ok(());
    }
    let (t_len, k) = (model.t(), model.k());
    let prior = &model.spec.sv;
    if !model.likelihood {
        return draw_sv_given_obs(None, &mut state.h, &mut state.sv, prior, rng);
    }
    let psi = model.psi(&state.theta)?;
    let y_hat = model.y_hat(&state.gamma);
    let b0 = state.prior_mean(t_len, k);
    let values = match model.mode() {
        _ if model.time_invariant => y_hat.clone(),
        StateMode::BlockDiagonal => {
            let zb0 = model.system.mul(&b0);
            (0..t_len)
                .map(|t| {
                    let xt: Vec<f64> = model.data.x.row(t).iter().copied().collect();
                    (y_hat[t] - zb0[t]) / (1.0 + psi.quad(&xt)).sqrt()
                })
                .collect::<Vec<_>>()
        }
        StateMode::LowerTriangular => {
            let zb = model.system.mul(&state.beta_tilde);
            let mut v = Vec::with_capacity(t_len * (k + 1));
            for t in 0..t_len {
                v.push(y_hat[t] - zb[t]);
                for j in 0..k {
                    v.push((state.beta_tilde[t * k + j] - b0[t * k + j]) / psi.0[j].sqrt());
                }
            }
            v
        }
    };
    let per_t = values.len() / t_len;
    let obs = VolObs { values: &values, per_t };
    draw_sv_given_obs(Some(&obs), &mut state.h, &mut state.sv, prior, rng)
}
