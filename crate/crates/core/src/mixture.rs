//! Sparse finite mixture on the means of the state deviations:
//! `β̃_t ~ Σ_g w_g N(μ_g, σ_t² Ψ)` with `μ_g ~ N(μ₀, Π)`,
//! `Π = diag(υ_j R_j²)` and `w ~ Dir(a/G, …, a/G)`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::dist::{ln_normal_pdf, sample_dirichlet_log, sample_gig, sample_log_categorical, std_normal, uniform_open};
use crate::error::{Error, Result};
use crate::priors::{MixturePrior, Psi};
use crate::rng::{Rng, Streams};
use crate::samplers::{Block, ThetaProposal};

/// Floor for the range of a coefficient path.
pub const RANGE_FLOOR: f64 = 1e-8;
/// Floor for the scale argument of the `υ` draw.
const SCALE_ARG_FLOOR: f64 = 1e-10;

/// Mixture block of the chain state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureState {
    pub log_weights: Vec<f64>,
    /// Component label of each period, `0..G`.
    pub indicators: Vec<usize>,
    /// `G × K` component means.
    pub means: Vec<Vec<f64>>,
    pub mu0: Vec<f64>,
    pub upsilon: Vec<f64>,
    /// Range of each coefficient path of `β̃`, floored.
    pub ranges: Vec<f64>,
    pub concentration: f64,
    pub conc_proposal: ThetaProposal,
}

impl MixtureState {
    /// Uniform random labels, zero means, unit scales.
    pub fn initial(prior: &MixturePrior, t: usize, k: usize, rng: &mut Rng) -> Result<Self> {
        let g = prior.groups;
        if g == 0 {
            return Err(Error::Config("mixture needs at least one group".into()));
        }
        use rand::Rng as _;
        Ok(MixtureState {
            log_weights: vec![-(g as f64).ln(); g],
            indicators: (0..t).map(|_| rng.random_range(0..g)).collect(),
            means: vec![vec![0.0; k]; g],
            mu0: vec![0.0; k],
            upsilon: vec![1.0; k],
            ranges: vec![1.0; k],
            concentration: prior.fixed_concentration.unwrap_or(1.0),
            conc_proposal: ThetaProposal::new(0.5),
        })
    }

    /// Labels from `G` equal-size groups of periods ordered by `score`,
    /// means at the group averages of `beta_tilde` and weights at the group
    /// shares.
    pub fn from_states(prior: &MixturePrior, beta_tilde: &[f64], score: &[f64], k: usize) -> Result<Self> {
        let g = prior.groups;
        let t = score.len();
        if g == 0 {
            return Err(Error::Config("mixture needs at least one group".into()));
        }
        if t == 0 || beta_tilde.len() != t * k {
            return Err(Error::Data(format!(
                "{} states for {t} periods of {k} coefficients",
                beta_tilde.len()
            )));
        }
        let mut order: Vec<usize> = (0..t).collect();
        order.sort_by(|a, b| score[*a].total_cmp(&score[*b]));
        let mut indicators = vec![0; t];
        for (rank, &p) in order.iter().enumerate() {
            indicators[p] = (rank * g.min(t) / t).min(g - 1);
        }
        let mut means = vec![vec![0.0; k]; g];
        let c = counts(&indicators, g);
        for (p, &d) in indicators.iter().enumerate() {
            for j in 0..k {
                means[d][j] += beta_tilde[p * k + j] / c[d] as f64;
            }
        }
        let mu0: Vec<f64> = (0..k).map(|j| beta_tilde.iter().skip(j).step_by(k).sum::<f64>() / t as f64).collect();
        for (d, m) in means.iter_mut().enumerate() {
            if c[d] == 0 {
                m.clone_from(&mu0);
            }
        }
        let log_weights = c.iter().map(|&n| ((n as f64 + 0.5) / (t as f64 + 0.5 * g as f64)).ln()).collect();
        Ok(MixtureState {
            log_weights,
            indicators,
            means,
            mu0,
            upsilon: vec![1.0; k],
            ranges: path_ranges(beta_tilde, k),
            concentration: prior.fixed_concentration.unwrap_or(1.0),
            conc_proposal: ThetaProposal::new(0.5),
        })
    }

    pub fn groups(&self) -> usize {
        self.means.len()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|l| l.exp()).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        counts(&self.indicators, self.groups())
    }

    /// Diagonal of `Π`.
    pub fn pi_diag(&self) -> Vec<f64> {
        self.upsilon.iter().zip(&self.ranges).map(|(u, r)| u * r * r).collect()
    }

    /// Number of non-empty components.
    pub fn occupied(&self) -> usize {
        count_groups(&self.indicators, self.groups())
    }
}

pub fn counts(delta: &[usize], g: usize) -> Vec<usize> {
    let mut c = vec![0; g];
    for &d in delta {
        c[d] += 1;
    }
    c
}

/// `G₀`: number of components with at least one member.
pub fn count_groups(delta: &[usize], g: usize) -> usize {
    counts(delta, g).iter().filter(|&&c| c > 0).count()
}

/// `w ~ Dir(π + T_g)`, returned as log-weights.
pub fn draw_weights(counts: &[usize], pi: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    let alpha: Vec<f64> = counts.iter().map(|&c| pi + c as f64).collect();
    sample_dirichlet_log(rng, &alpha)
}

/// `Pr(δ_t = g) ∝ w_g N(β̃_t | μ_g, σ_t² Ψ)`.
pub fn draw_indicators(
    beta_tilde: &[f64],
    means: &[Vec<f64>],
    log_weights: &[f64],
    sigma: &[f64],
    psi: &Psi,
    rng: &mut Rng,
) -> Result<Vec<usize>> {
    let k = psi.0.len();
    let t_len = sigma.len();
    let g_len = means.len();
    let mut out = Vec::with_capacity(t_len);
    let mut logp = vec![0.0; g_len];
    for t in 0..t_len {
        let s2 = sigma[t] * sigma[t];
        let bt = &beta_tilde[t * k..(t + 1) * k];
        for g in 0..g_len {
            let q: f64 = (0..k).map(|j| (bt[j] - means[g][j]).powi(2) / psi.0[j]).sum();
            logp[g] = log_weights[g] - 0.5 * q / s2;
        }
        out.push(sample_log_categorical(rng, &logp)?);
    }
    Ok(out)
}

/// Conjugate update of every `μ_{gj}` given the labels: precision
/// `Σ_{t∈g} 1/(σ_t² Ψ_j) + 1/Π_j`.
#[allow(clippy::too_many_arguments)]
pub fn draw_means(
    beta_tilde: &[f64],
    delta: &[usize],
    sigma: &[f64],
    psi: &Psi,
    pi_diag: &[f64],
    mu0: &[f64],
    groups: usize,
    rng: &mut Rng,
) -> Vec<Vec<f64>> {
    let k = psi.0.len();
    let (prec, num) = mean_suff(beta_tilde, delta, sigma, psi, groups);
    (0..groups)
        .map(|g| {
            (0..k)
                .map(|j| {
                    let p = prec[g] / psi.0[j] + 1.0 / pi_diag[j];
                    let m = (num[g][j] / psi.0[j] + mu0[j] / pi_diag[j]) / p;
                    m + std_normal(rng) / p.sqrt()
                })
                .collect()
        })
        .collect()
}

/// Per component: `Σ 1/σ_t²` and `Σ β̃_{tj}/σ_t²`.
fn mean_suff(beta_tilde: &[f64], delta: &[usize], sigma: &[f64], psi: &Psi, groups: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = psi.0.len();
    let mut prec = vec![0.0; groups];
    let mut num = vec![vec![0.0; k]; groups];
    for (t, &g) in delta.iter().enumerate() {
        let w = 1.0 / (sigma[t] * sigma[t]);
        prec[g] += w;
        for j in 0..k {
            num[g][j] += w * beta_tilde[t * k + j];
        }
    }
    (prec, num)
}

/// Posterior mean and variance of `μ_{gj}` (exposed for checking).
pub fn mean_moments(
    beta_tilde: &[f64],
    delta: &[usize],
    sigma: &[f64],
    psi: &Psi,
    pi_diag: &[f64],
    mu0: &[f64],
    groups: usize,
) -> Vec<Vec<(f64, f64)>> {
    let k = psi.0.len();
    let (prec, num) = mean_suff(beta_tilde, delta, sigma, psi, groups);
    (0..groups)
        .map(|g| {
            (0..k)
                .map(|j| {
                    let p = prec[g] / psi.0[j] + 1.0 / pi_diag[j];
                    ((num[g][j] / psi.0[j] + mu0[j] / pi_diag[j]) / p, 1.0 / p)
                })
                .collect()
        })
        .collect()
}

/// `μ₀ ~ N(Σ_g μ_g / G, Π / G)`.
pub fn draw_common_mean(means: &[Vec<f64>], pi_diag: &[f64], rng: &mut Rng) -> Vec<f64> {
    let g = means.len() as f64;
    (0..pi_diag.len())
        .map(|j| {
            let m = means.iter().map(|mu| mu[j]).sum::<f64>() / g;
            m + (pi_diag[j] / g).sqrt() * std_normal(rng)
        })
        .collect()
}

/// Range of each coefficient path, floored at [`RANGE_FLOOR`].
pub fn path_ranges(beta_tilde: &[f64], k: usize) -> Vec<f64> {
    let t_len = beta_tilde.len() / k;
    (0..k)
        .map(|j| {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for t in 0..t_len {
                let v = beta_tilde[t * k + j];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let r = hi - lo;
            if !(r >= RANGE_FLOOR) {
                log::warn!("coefficient path {j} is flat; range floored at {RANGE_FLOOR:e}");
                RANGE_FLOOR
            } else {
                r
            }
        })
        .collect()
}

/// `υ_j ~ GIG(c₀ − G/2, 2c₁, Σ_g (μ_{gj} − μ_{0j})² / R_j²)`.
pub fn draw_mean_scales(
    means: &[Vec<f64>],
    mu0: &[f64],
    ranges: &[f64],
    prior: &MixturePrior,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    let g = means.len() as f64;
    (0..mu0.len())
        .map(|j| {
            let ss: f64 = means.iter().map(|m| (m[j] - mu0[j]).powi(2)).sum();
            let c = (ss / (ranges[j] * ranges[j])).max(SCALE_ARG_FLOOR);
            Ok(sample_gig(rng, prior.c0 - g / 2.0, 2.0 * prior.c1, c)?.max(1e-300))
        })
        .collect()
}

/// `ln Gamma(a | shape, rate) + ln Dir(w | a/G)`; the Dirichlet term is
/// dropped when `with_weights` is false.
pub fn concentration_log_target(a: f64, log_weights: &[f64], prior: &MixturePrior, with_weights: bool) -> f64 {
    if !(a > 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut lp = (prior.conc_shape - 1.0) * a.ln() - prior.conc_rate * a;
    if with_weights {
        let g = log_weights.len() as f64;
        let e = a / g;
        lp += ln_gamma(a) - g * ln_gamma(e) + (e - 1.0) * log_weights.iter().sum::<f64>();
    }
    lp
}

/// Random-walk MH on `ln a`. Returns the new value and whether it moved.
pub fn draw_concentration(
    a: f64,
    log_weights: &[f64],
    prior: &MixturePrior,
    proposal: &mut ThetaProposal,
    adapt: bool,
    with_weights: bool,
    rng: &mut Rng,
) -> (f64, bool) {
    let prop = a * (proposal.scale * std_normal(rng)).exp();
    let log_ratio = concentration_log_target(prop, log_weights, prior, with_weights)
        - concentration_log_target(a, log_weights, prior, with_weights)
        + (prop / a).ln();
    let accepted = uniform_open(rng).ln() < log_ratio;
    proposal.record(accepted, adapt);
    (if accepted { prop } else { a }, accepted)
}

/// Apply one uniform random relabeling to weights, means and indicators.
pub fn permute_labels(state: &mut MixtureState, rng: &mut Rng) {
    let g = state.groups();
    let mut perm: Vec<usize> = (0..g).collect();
    perm.shuffle(rng);
    apply_permutation(state, &perm);
}

/// Relabel component `g` as `perm[g]`.
pub fn apply_permutation(state: &mut MixtureState, perm: &[usize]) {
    let g = state.groups();
    let mut lw = vec![0.0; g];
    let mut means = vec![Vec::new(); g];
    for old in 0..g {
        lw[perm[old]] = state.log_weights[old];
        means[perm[old]] = std::mem::take(&mut state.means[old]);
    }
    state.log_weights = lw;
    state.means = means;
    for d in state.indicators.iter_mut() {
        *d = perm[*d];
    }
}

/// Relabel so that component means are increasing in the first coefficient
/// (reporting only).
pub fn order_means(state: &mut MixtureState) {
    let g = state.groups();
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&a, &b| state.means[a][0].total_cmp(&state.means[b][0]));
    let mut perm = vec![0; g];
    for (new, &old) in order.iter().enumerate() {
        perm[old] = new;
    }
    apply_permutation(state, &perm);
}

/// Log joint density of the label-dependent part of the model:
/// states given labels and means, labels given weights, weights given the
/// concentration, and means given `(μ₀, Π)`.
pub fn log_joint(state: &MixtureState, beta_tilde: &[f64], sigma: &[f64], psi: &Psi) -> f64 {
    let k = psi.0.len();
    let mut lp = 0.0;
    for (t, &g) in state.indicators.iter().enumerate() {
        let s2 = sigma[t] * sigma[t];
        for j in 0..k {
            lp += ln_normal_pdf(beta_tilde[t * k + j], state.means[g][j], s2 * psi.0[j]);
        }
        lp += state.log_weights[g];
    }
    let g = state.groups() as f64;
    let e = state.concentration / g;
    lp += ln_gamma(state.concentration) - g * ln_gamma(e) + (e - 1.0) * state.log_weights.iter().sum::<f64>();
    let pi = state.pi_diag();
    for m in &state.means {
        for j in 0..k {
            lp += ln_normal_pdf(m[j], state.mu0[j], pi[j]);
        }
    }
    lp
}

/// One pass through the mixture block: weights, labels, means and common
/// mean, scales, concentration and a random relabeling. `visit` is called
/// with each block just before it runs.
#[allow(clippy::too_many_arguments)]
pub fn update_mixture(
    state: &mut MixtureState,
    beta_tilde: &[f64],
    sigma: &[f64],
    psi: &Psi,
    prior: &MixturePrior,
    streams: &mut Streams,
    adapt: bool,
    likelihood: bool,
    visit: &mut dyn FnMut(Block),
) -> Result<()> {
    let g = state.groups();
    let k = psi.0.len();
    let pi = state.concentration / g as f64;
    visit(Block::Weights);
    state.log_weights = draw_weights(&state.counts(), pi, &mut streams.weights)?;
    visit(Block::Indicators);
    state.indicators = draw_indicators(beta_tilde, &state.means, &state.log_weights, sigma, psi, &mut streams.indicators)?;
    visit(Block::Means);
    state.ranges = path_ranges(beta_tilde, k);
    let pi_diag = state.pi_diag();
    state.means = draw_means(beta_tilde, &state.indicators, sigma, psi, &pi_diag, &state.mu0, g, &mut streams.means);
    state.mu0 = draw_common_mean(&state.means, &pi_diag, &mut streams.means);
    visit(Block::Scales);
    state.upsilon = draw_mean_scales(&state.means, &state.mu0, &state.ranges, prior, &mut streams.scales)?;
    if prior.fixed_concentration.is_none() {
        visit(Block::Concentration);
        let (a, _) = draw_concentration(
            state.concentration,
            &state.log_weights,
            prior,
            &mut state.conc_proposal,
            adapt,
            likelihood,
            &mut streams.concentration,
        );
        state.concentration = a;
    }
    visit(Block::Permutation);
    permute_labels(state, &mut streams.permutation);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(s: u64) -> Rng {
        Rng::seed_from_u64(s)
    }

    #[test]
    fn weights_match_dirichlet_means() {
        let mut r = rng(1);
        let n = 100_000;
        let mut m = [0.0; 2];
        for _ in 0..n {
            let w = draw_weights(&[0, 0], 1.0, &mut r).unwrap();
            m[0] += w[0].exp();
            m[1] += w[1].exp();
        }
        let se = (1.0f64 / 12.0 / n as f64).sqrt();
        assert!((m[0] / n as f64 - 0.5).abs() < 3.0 * se);
        let mut s = 0.0;
        for _ in 0..10_000 {
            s += draw_weights(&[100, 0], 0.01, &mut r).unwrap()[0].exp();
        }
        let expect = 100.01 / 100.02;
        assert!((s / 10_000.0 - expect).abs() < 1e-3);
    }

    #[test]
    fn single_group_indicators() {
        let mut r = rng(2);
        let psi = Psi(vec![1.0, 2.0]);
        let d = draw_indicators(&[0.1; 10], &[vec![0.0, 0.0]], &[0.0], &[1.0; 5], &psi, &mut r).unwrap();
        assert!(d.iter().all(|&g| g == 0));
    }

    #[test]
    fn separated_components_pick_the_right_label() {
        let mut r = rng(3);
        let psi = Psi(vec![0.01]);
        let means = vec![vec![0.0], vec![5.0]];
        let lw = vec![0.5f64.ln(); 2];
        let bt = vec![0.0; 1000];
        let d = draw_indicators(&bt, &means, &lw, &vec![1.0; 1000], &psi, &mut r).unwrap();
        assert!(d.iter().all(|&g| g == 0));
    }

    #[test]
    fn equal_means_reproduce_prior_weights() {
        let mut r = rng(4);
        let psi = Psi(vec![1.0]);
        let means = vec![vec![1.0], vec![1.0]];
        let lw = vec![0.2f64.ln(), 0.8f64.ln()];
        let n = 50_000;
        let d = draw_indicators(&vec![0.3; n], &means, &lw, &vec![1.0; n], &psi, &mut r).unwrap();
        let f = d.iter().filter(|&&g| g == 0).count() as f64 / n as f64;
        assert!((f - 0.2).abs() < 3.0 * (0.16 / n as f64).sqrt() + 1e-3);
    }

    #[test]
    fn single_cluster_mean_formula() {
        let bt = [0.5, 1.5, 1.0, 2.0];
        let pi = [4.0];
        let mu0 = [1.0];
        let mm = mean_moments(&bt, &[0, 0, 0, 0], &[1.0; 4], &Psi(vec![1.0]), &pi, &mu0, 1);
        let expect = (5.0 + 0.25 * 1.0) / (4.0 + 0.25);
        assert!((mm[0][0].0 - expect).abs() < 1e-14);
        assert!((mm[0][0].1 - 1.0 / 4.25).abs() < 1e-14);
        // an empty component keeps its prior
        let mm = mean_moments(&bt, &[0, 0, 0, 0], &[1.0; 4], &Psi(vec![1.0]), &pi, &mu0, 2);
        assert_eq!(mm[1][0], (1.0, 4.0));
    }

    #[test]
    fn mean_moments_match_dense_oracle() {
        use nalgebra::{DMatrix, DVector};
        let (t, g, k) = (6, 2, 2);
        let bt: Vec<f64> = (0..t * k).map(|i| (i as f64 * 0.9).sin()).collect();
        let delta = [0, 1, 1, 0, 1, 0];
        let sigma = [0.5, 1.0, 1.5, 0.7, 1.2, 0.9];
        let psi = Psi(vec![0.3, 2.0]);
        let pi = [0.8, 1.7];
        let mu0 = [0.1, -0.2];
        // stack μ = vec(μ_1, μ_2), observations β̃_tj = μ_{δ_t j} + noise
        let n = g * k;
        let mut prec = DMatrix::zeros(n, n);
        let mut rhs = DVector::zeros(n);
        for c in 0..n {
            prec[(c, c)] = 1.0 / pi[c % k];
            rhs[c] = mu0[c % k] / pi[c % k];
        }
        for tt in 0..t {
            for j in 0..k {
                let var = sigma[tt] * sigma[tt] * psi.0[j];
                let c = delta[tt] * k + j;
                prec[(c, c)] += 1.0 / var;
                rhs[c] += bt[tt * k + j] / var;
            }
        }
        let cov = prec.try_inverse().unwrap();
        let mean = &cov * rhs;
        let mm = mean_moments(&bt, &delta, &sigma, &psi, &pi, &mu0, g);
        for gg in 0..g {
            for j in 0..k {
                let c = gg * k + j;
                assert!((mm[gg][j].0 - mean[c]).abs() < 1e-12);
                assert!((mm[gg][j].1 - cov[(c, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn common_mean_moments() {
        let mut r = rng(5);
        let means = vec![vec![-1.0, 2.0], vec![1.0, 4.0]];
        let pi = [2.0, 0.5];
        let n = 100_000;
        let mut s = [0.0; 2];
        let mut s2 = [0.0; 2];
        for _ in 0..n {
            let m = draw_common_mean(&means, &pi, &mut r);
            for j in 0..2 {
                s[j] += m[j];
                s2[j] += m[j] * m[j];
            }
        }
        let expect_mean = [0.0, 3.0];
        for j in 0..2 {
            let m = s[j] / n as f64;
            let v = s2[j] / n as f64 - m * m;
            assert!((m - expect_mean[j]).abs() < 3.0 * (pi[j] / 2.0 / n as f64).sqrt());
            assert!((v / (pi[j] / 2.0) - 1.0).abs() < 0.02);
        }
        let one = draw_common_mean(&[vec![3.0]], &[1e-20], &mut r);
        assert!((one[0] - 3.0).abs() < 1e-8);
    }

    #[test]
    fn mean_scales_match_quadrature() {
        let mut r = rng(6);
        let prior = MixturePrior::default();
        let means = vec![vec![1.0], vec![-0.5], vec![0.2]];
        let mu0 = [0.1f64];
        let ranges = [2.0];
        let ss: f64 = means.iter().map(|m: &Vec<f64>| (m[0] - mu0[0]).powi(2)).sum::<f64>() / 4.0;
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| draw_mean_scales(&means, &mu0, &ranges, &prior, &mut r).unwrap()[0]).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let expect = crate::dist::gig_moment_quadrature(0.6 - 1.5, 1.2, ss, 1.0);
        assert!((m / expect - 1.0).abs() < 0.02, "{m} vs {expect}");
    }

    #[test]
    fn mean_scales_follow_the_scaling_law() {
        // scaling deviations by 10 is equivalent to shrinking the range by 10
        let prior = MixturePrior::default();
        let means = vec![vec![0.3], vec![-0.4]];
        let big: Vec<Vec<f64>> = means.iter().map(|m| vec![m[0] * 10.0]).collect();
        let mut a = rng(7);
        let mut b = rng(7);
        for _ in 0..200 {
            let x = draw_mean_scales(&means, &[0.0], &[0.1], &prior, &mut a).unwrap()[0];
            let y = draw_mean_scales(&big, &[0.0], &[1.0], &prior, &mut b).unwrap()[0];
            assert!((x - y).abs() <= 1e-9 * x.abs().max(1e-300), "{x} {y}");
        }
    }

    #[test]
    fn concentration_prior_reproduction_and_data_pull() {
        let prior = MixturePrior::default();
        let mut r = rng(8);
        let mut prop = ThetaProposal::new(0.8);
        let mut a = 1.0;
        let n = 100_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            a = draw_concentration(a, &[], &prior, &mut prop, false, false, &mut r).0;
            s += a;
            s2 += a * a;
        }
        let m = s / n as f64;
        let v = s2 / n as f64 - m * m;
        assert!((m - 1.0).abs() < 0.03, "{m}");
        assert!((v - 0.1).abs() < 0.015, "{v}");
        assert!((0.1..0.9).contains(&prop.acceptance_rate()));

        let g = 30;
        let uniform = vec![-(g as f64).ln(); g];
        let mut skewed = vec![(1e-6f64).ln(); g];
        skewed[0] = (1.0 - 29e-6f64).ln();
        let run = |lw: &[f64], r: &mut Rng| {
            let mut p = ThetaProposal::new(0.5);
            let mut a = 1.0;
            let mut s = 0.0;
            for i in 0..20_000 {
                a = draw_concentration(a, lw, &prior, &mut p, i < 5000, true, r).0;
                if i >= 5000 {
                    s += a;
                }
            }
            (s / 15_000.0, p.acceptance_rate())
        };
        let (mu, acc) = run(&uniform, &mut r);
        let (ms, _) = run(&skewed, &mut r);
        assert!(mu > 1.0 && mu > ms, "{mu} {ms}");
        assert!((0.1..=0.6).contains(&acc), "{acc}");
    }

    fn toy_state(r: &mut Rng) -> (MixtureState, Vec<f64>, Vec<f64>, Psi) {
        let prior = MixturePrior { groups: 4, ..Default::default() };
        let mut st = MixtureState::initial(&prior, 8, 2, r).unwrap();
        st.means = (0..4).map(|g| vec![g as f64, -(g as f64) * 0.5]).collect();
        st.log_weights = draw_weights(&[1, 2, 3, 2], 0.5, r).unwrap();
        st.mu0 = vec![0.3, 0.1];
        st.upsilon = vec![1.5, 0.7];
        st.ranges = vec![2.0, 3.0];
        st.concentration = 1.3;
        let bt: Vec<f64> = (0..16).map(|i| (i as f64 * 0.4).cos()).collect();
        let sigma: Vec<f64> = (0..8).map(|t| 0.5 + 0.1 * t as f64).collect();
        (st, bt, sigma, Psi(vec![0.4, 1.1]))
    }

    fn prior_mean_of(st: &MixtureState) -> Vec<f64> {
        st.indicators.iter().flat_map(|&g| st.means[g].clone()).collect()
    }

    #[test]
    fn permutation_keeps_b0_and_joint_density() {
        let mut r = rng(9);
        let (mut st, bt, sigma, psi) = toy_state(&mut r);
        let before = st.clone();
        apply_permutation(&mut st, &[0, 1, 2, 3]);
        assert_eq!(st, before);
        let b0 = prior_mean_of(&st);
        let lj = log_joint(&st, &bt, &sigma, &psi);
        for _ in 0..20 {
            permute_labels(&mut st, &mut r);
            assert_eq!(prior_mean_of(&st), b0);
            assert!((log_joint(&st, &bt, &sigma, &psi) - lj).abs() < 1e-12);
        }
    }

    #[test]
    fn group_counts() {
        assert_eq!(count_groups(&[2, 2, 2], 5), 1);
        assert_eq!(count_groups(&[0, 3, 1, 4, 1], 5), 4);
    }

    #[test]
    fn ordering_sorts_first_coefficient() {
        let mut r = rng(10);
        let (mut st, ..) = toy_state(&mut r);
        permute_labels(&mut st, &mut r);
        let b0 = prior_mean_of(&st);
        order_means(&mut st);
        assert!(st.means.windows(2).all(|w| w[0][0] <= w[1][0]));
        assert_eq!(prior_mean_of(&st), b0);
    }

    #[test]
    fn flat_paths_get_floored_ranges() {
        let r = path_ranges(&[1.0, 2.0, 1.0, 5.0], 2);
        assert_eq!(r, vec![RANGE_FLOOR, 3.0]);
    }
}
