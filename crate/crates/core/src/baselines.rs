//! Reference samplers for random-walk coefficient paths (forward filtering,
//! backward sampling and the banded-precision sampler), a non-centered
//! random-walk TVP competitor built on them, and principal-component
//! compression of the exogenous block.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::banded::{sample_from_precision, BandedSpd};
use crate::dist::{ln_normal_pdf, std_normal, uniform_open};
use crate::error::{Error, Result};
use crate::priors::{NormalGamma, PriorSpec, SvPrior};
use crate::rng::{Rng, Streams};
use crate::samplers::{chol_sample, draw_ng_global, draw_ng_locals, draw_sv_given_obs, SvParams, Volatility, VolObs};

/// Linear Gaussian random-walk system
/// `y_t = x_t'β_t + ε_t`, `ε_t ~ N(0, obs_var_t)`,
/// `β_t = β_{t-1} + w_t`, `w_t ~ N(0, diag(state_var))`,
/// `β_1 ~ N(init_mean, diag(init_var))`.
#[derive(Debug, Clone, Copy)]
pub struct RwSystem<'a> {
    pub y: &'a [f64],
    pub x: &'a DMatrix<f64>,
    pub obs_var: &'a [f64],
    pub state_var: &'a [f64],
    pub init_mean: &'a [f64],
    pub init_var: &'a [f64],
}

impl RwSystem<'_> {
    fn check(&self) -> Result<()> {
        let (t, k) = (self.x.nrows(), self.x.ncols());
        if self.y.len() != t || self.obs_var.len() != t || self.state_var.len() != k || self.init_mean.len() != k || self.init_var.len() != k {
            return Err(Error::Structure("random-walk system has inconsistent dimensions".into()));
        }
        let finite = self.y.iter().chain(self.x.iter()).chain(self.obs_var).chain(self.state_var).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Data("non-finite system matrix".into()));
        }
        if self.obs_var.iter().any(|v| !(*v > 0.0)) || self.state_var.iter().any(|v| *v < 0.0) || self.init_var.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::Domain("variances of the random-walk system must be positive".into()));
        }
        Ok(())
    }
}

/// Filtered means and covariances plus the log likelihood.
#[derive(Debug, Clone)]
pub struct Filtered {
    pub mean: Vec<DVector<f64>>,
    pub cov: Vec<DMatrix<f64>>,
    pub log_lik: f64,
}

/// Kalman filter, `O(K²)` per period.
pub fn kalman_filter(sys: &RwSystem<'_>) -> Result<Filtered> {
    sys.check()?;
    let (t_len, k) = (sys.x.nrows(), sys.x.ncols());
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(sys.state_var));
    let mut a = DVector::from_column_slice(sys.init_mean);
    let mut p = DMatrix::from_diagonal(&DVector::from_column_slice(sys.init_var));
    let mut means = Vec::with_capacity(t_len);
    let mut covs = Vec::with_capacity(t_len);
    let mut log_lik = 0.0;
    for t in 0..t_len {
        if t > 0 {
            p += &q;
        }
        let x = sys.x.row(t).transpose();
        let px = &p * &x;
        let f = x.dot(&px) + sys.obs_var[t];
        let v = sys.y[t] - x.dot(&a);
        log_lik += ln_normal_pdf(v, 0.0, f);
        a += &px * (v / f);
        p -= &px * px.transpose() / f;
        p = (&p + p.transpose()) * 0.5;
        if (0..k).any(|j| !(p[(j, j)] > 0.0)) || Cholesky::new(p.clone()).is_none() {
            return Err(Error::NotPositiveDefinite {
                context: format!("filtered covariance at t = {t}"),
            });
        }
        means.push(a.clone());
        covs.push(p.clone());
    }
    Ok(Filtered { mean: means, cov: covs, log_lik })
}

/// Draw from `N(mean, cov)` for a positive semi-definite `cov`.
fn mvn_psd(mean: &DVector<f64>, cov: &DMatrix<f64>, rng: &mut Rng) -> DVector<f64> {
    let k = mean.len();
    let z = DVector::from_fn(k, |_, _| std_normal(rng));
    if let Some(ch) = Cholesky::new(cov.clone()) {
        return mean + ch.l() * z;
    }
    let eig = SymmetricEigen::new(cov.clone());
    let root = DVector::from_iterator(k, eig.eigenvalues.iter().map(|l| l.max(0.0).sqrt()));
    mean + &eig.eigenvectors * root.component_mul(&z)
}

/// Forward filtering, backward sampling: one exact draw of the state path
/// (block-major `T·K`).
pub fn ffbs_draw(sys: &RwSystem<'_>, rng: &mut Rng) -> Result<Vec<f64>> {
    let f = kalman_filter(sys)?;
    let (t_len, k) = (sys.x.nrows(), sys.x.ncols());
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(sys.state_var));
    let mut out = vec![0.0; t_len * k];
    let mut next = mvn_psd(&f.mean[t_len - 1], &f.cov[t_len - 1], rng);
    out[(t_len - 1) * k..].copy_from_slice(next.as_slice());
    for t in (0..t_len.saturating_sub(1)).rev() {
        let p = &f.cov[t];
        let pred = p + &q;
        let ch = Cholesky::new(pred).ok_or_else(|| Error::NotPositiveDefinite {
            context: format!("predicted covariance at t = {}", t + 1),
        })?;
        // gain = P_t (P_t + Q)⁻¹
        let gain = ch.solve(p).transpose();
        let mean = &f.mean[t] + &gain * (&next - &f.mean[t]);
        let mut cov = p - &gain * p;
        cov = (&cov + cov.transpose()) * 0.5;
        next = mvn_psd(&mean, &cov, rng);
        out[t * k..(t + 1) * k].copy_from_slice(next.as_slice());
    }
    Ok(out)
}

/// Rauch–Tung–Striebel smoothed means.
pub fn smoothed_mean(sys: &RwSystem<'_>) -> Result<Vec<f64>> {
    let f = kalman_filter(sys)?;
    let (t_len, k) = (sys.x.nrows(), sys.x.ncols());
    let q = DMatrix::from_diagonal(&DVector::from_column_slice(sys.state_var));
    let mut out = vec![0.0; t_len * k];
    let mut s = f.mean[t_len - 1].clone();
    out[(t_len - 1) * k..].copy_from_slice(s.as_slice());
    for t in (0..t_len.saturating_sub(1)).rev() {
        let p = &f.cov[t];
        let ch = Cholesky::new(p + &q).ok_or_else(|| Error::NotPositiveDefinite {
            context: format!("predicted covariance at t = {}", t + 1),
        })?;
        let gain = ch.solve(p).transpose();
        s = &f.mean[t] + gain * (&s - &f.mean[t]);
        out[t * k..(t + 1) * k].copy_from_slice(s.as_slice());
    }
    Ok(out)
}

/// Banded posterior precision (bandwidth `K`) and right-hand side of the
/// stacked state vector.
pub fn awol_precision(sys: &RwSystem<'_>) -> Result<(BandedSpd, Vec<f64>)> {
    sys.check()?;
    if sys.state_var.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Domain("the banded sampler needs positive state variances".into()));
    }
    let (t_len, k) = (sys.x.nrows(), sys.x.ncols());
    let mut prec = BandedSpd::zeros(t_len * k, k);
    let mut rhs = vec![0.0; t_len * k];
    for j in 0..k {
        let iq = 1.0 / sys.state_var[j];
        prec.add(j, j, 1.0 / sys.init_var[j]);
        rhs[j] += sys.init_mean[j] / sys.init_var[j];
        for t in 1..t_len {
            let (i, im) = (t * k + j, (t - 1) * k + j);
            prec.add(i, i, iq);
            prec.add(im, im, iq);
            prec.add(i, im, -iq);
        }
    }
    for t in 0..t_len {
        let w = 1.0 / sys.obs_var[t];
        for a in 0..k {
            let xa = sys.x[(t, a)];
            rhs[t * k + a] += xa * sys.y[t] * w;
            for b in 0..=a {
                prec.add(t * k + a, t * k + b, xa * sys.x[(t, b)] * w);
            }
        }
    }
    Ok((prec, rhs))
}

/// All-without-a-loop draw through the banded Cholesky factor.
pub fn awol_draw(sys: &RwSystem<'_>, rng: &mut Rng) -> Result<Vec<f64>> {
    let (prec, rhs) = awol_precision(sys)?;
    let chol = prec.cholesky()?;
    let z: Vec<f64> = (0..rhs.len()).map(|_| std_normal(rng)).collect();
    Ok(sample_from_precision(&chol, &rhs, &z))
}

/// Posterior mean of the stacked states from the banded system.
pub fn awol_mean(sys: &RwSystem<'_>) -> Result<Vec<f64>> {
    let (prec, mut rhs) = awol_precision(sys)?;
    prec.cholesky()?.solve(&mut rhs);
    Ok(rhs)
}

/// State of the non-centered random-walk competitor
/// `β_t = β₀ + √q ⊙ β̃*_t`, `β̃*_t = β̃*_{t-1} + u_t`, `u_t ~ N(0, I)`,
/// with Normal-Gamma shrinkage on `β₀` and on the signed `√q`.
#[derive(Debug, Clone)]
pub struct RwTvpState {
    pub beta0: Vec<f64>,
    pub sqrt_q: Vec<f64>,
    /// Standardized state path, block-major.
    pub path: Vec<f64>,
    pub tau0: Vec<f64>,
    pub tau_q: Vec<f64>,
    pub psi0: f64,
    pub psi_q: f64,
    pub h: Vec<f64>,
    pub sv: SvParams,
}

impl RwTvpState {
    /// Innovation variances `q_j`.
    pub fn innovation_var(&self) -> Vec<f64> {
        self.sqrt_q.iter().map(|s| s * s).collect()
    }
}

/// Random-walk TVP regression estimated with forward filtering, backward
/// sampling.
#[derive(Debug, Clone)]
pub struct RwTvpModel {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub ng: NormalGamma,
    pub sv_prior: SvPrior,
    pub volatility: Volatility,
    /// Use the banded sampler instead of forward filtering for the path.
    pub banded: bool,
}

impl RwTvpModel {
    pub fn new(y: DVector<f64>, x: DMatrix<f64>, spec: &PriorSpec, volatility: Volatility) -> Result<Self> {
        if y.len() != x.nrows() || y.is_empty() || x.ncols() == 0 {
            return Err(Error::Structure("response and design do not conform".into()));
        }
        Ok(RwTvpModel {
            y,
            x,
            ng: spec.normal_gamma,
            sv_prior: spec.sv,
            volatility,
            banded: false,
        })
    }

    pub fn t(&self) -> usize {
        self.y.len()
    }

    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn initial_state(&self) -> RwTvpState {
        let (t, k) = (self.t(), self.k());
        let m = self.y.mean();
        let v = (self.y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / t.max(2) as f64).max(1e-8);
        let h0 = match self.volatility {
            Volatility::Fixed { sigma2 } => sigma2.ln(),
            Volatility::Stochastic => v.ln(),
        };
        RwTvpState {
            beta0: vec![0.0; k],
            sqrt_q: vec![0.1; k],
            path: vec![0.0; t * k],
            tau0: vec![1.0; k],
            tau_q: vec![1.0; k],
            psi0: 1.0,
            psi_q: 1.0,
            h: vec![h0; t],
            sv: SvParams { mu: h0, rho: 0.9, sigma2: 0.1 },
        }
    }

    /// Coefficient paths `β_t`, block-major.
    pub fn coefficients(&self, st: &RwTvpState) -> Vec<f64> {
        let k = self.k();
        st.path
            .iter()
            .enumerate()
            .map(|(i, p)| st.beta0[i % k] + st.sqrt_q[i % k] * p)
            .collect()
    }

    /// One draw of the next-period coefficients.
    pub fn next_coefficients(&self, st: &RwTvpState, rng: &mut Rng) -> Vec<f64> {
        let (t, k) = (self.t(), self.k());
        (0..k)
            .map(|j| st.beta0[j] + st.sqrt_q[j] * (st.path[(t - 1) * k + j] + std_normal(rng)))
            .collect()
    }

    /// One Gibbs sweep: path, constant part and scales, shrinkage, random
    /// sign switch, volatility.
    pub fn sweep(&self, st: &mut RwTvpState, streams: &mut Streams) -> Result<()> {
        let (t_len, k) = (self.t(), self.k());
        let sigma2: Vec<f64> = st.h.iter().map(|h| h.exp()).collect();

        // standardized path given (β₀, √q)
        let resid: Vec<f64> = (0..t_len)
            .map(|t| self.y[t] - (0..k).map(|j| self.x[(t, j)] * st.beta0[j]).sum::<f64>())
            .collect();
        let load = DMatrix::from_fn(t_len, k, |t, j| self.x[(t, j)] * st.sqrt_q[j]);
        let ones = vec![1.0; k];
        let zeros = vec![0.0; k];
        let sys = RwSystem {
            y: &resid,
            x: &load,
            obs_var: &sigma2,
            state_var: &ones,
            init_mean: &zeros,
            init_var: &ones,
        };
        st.path = if self.banded {
            awol_draw(&sys, &mut streams.states)?
        } else {
            ffbs_draw(&sys, &mut streams.states)?
        };

        // (β₀, √q) by weighted regression on [x_t, x_t ⊙ β̃*_t]
        let mut prec = DMatrix::zeros(2 * k, 2 * k);
        let mut rhs = DVector::zeros(2 * k);
        let mut z = DVector::zeros(2 * k);
        for t in 0..t_len {
            for j in 0..k {
                z[j] = self.x[(t, j)];
                z[k + j] = self.x[(t, j)] * st.path[t * k + j];
            }
            let w = 1.0 / sigma2[t];
            prec.ger(w, &z, &z, 1.0);
            rhs.axpy(w * self.y[t], &z, 1.0);
        }
        for j in 0..k {
            prec[(j, j)] += 1.0 / st.tau0[j];
            prec[(k + j, k + j)] += 1.0 / st.tau_q[j];
        }
        let coef = chol_sample(prec, &rhs, &mut streams.gamma, "constant-part precision")?;
        st.beta0 = coef[..k].to_vec();
        st.sqrt_q = coef[k..].to_vec();

        // Normal-Gamma shrinkage on both groups
        let spec = PriorSpec {
            normal_gamma: self.ng,
            ..Default::default()
        };
        st.tau0 = draw_ng_locals(&st.beta0, st.psi0, &spec, &mut streams.shrinkage)?;
        st.psi0 = draw_ng_global(&st.tau0, &spec, &mut streams.shrinkage)?;
        st.tau_q = draw_ng_locals(&st.sqrt_q, st.psi_q, &spec, &mut streams.shrinkage)?;
        st.psi_q = draw_ng_global(&st.tau_q, &spec, &mut streams.shrinkage)?;

        // random sign switch of (√q_j, β̃*_j)
        for j in 0..k {
            if uniform_open(&mut streams.permutation) < 0.5 {
                st.sqrt_q[j] = -st.sqrt_q[j];
                for t in 0..t_len {
                    st.path[t * k + j] = -st.path[t * k + j];
                }
            }
        }

        match self.volatility {
            Volatility::Fixed { sigma2 } => st.h.iter_mut().for_each(|h| *h = sigma2.ln()),
            Volatility::Stochastic => {
                let beta = self.coefficients(st);
                let e: Vec<f64> = (0..t_len)
                    .map(|t| self.y[t] - (0..k).map(|j| self.x[(t, j)] * beta[t * k + j]).sum::<f64>())
                    .collect();
                let obs = VolObs { values: &e, per_t: 1 };
                draw_sv_given_obs(Some(&obs), &mut st.h, &mut st.sv, &self.sv_prior, &mut streams.volatility)?;
            }
        }
        Ok(())
    }
}

/// Principal components of a standardized data block.
#[derive(Debug, Clone)]
pub struct Pca {
    /// `T × n` component scores.
    pub scores: DMatrix<f64>,
    /// `N × n` loadings (unit eigenvectors).
    pub loadings: DMatrix<f64>,
    /// Variance of each retained component, descending.
    pub explained: Vec<f64>,
    /// Sum of all eigenvalues (equals `N` after standardization).
    pub total_variance: f64,
}

/// Scores of the first `n` principal components of the column-standardized
/// `T × N` block `d`.
pub fn pca_compress(d: &DMatrix<f64>, n: usize) -> Result<Pca> {
    let (t_len, cols) = (d.nrows(), d.ncols());
    if n == 0 || n > t_len.min(cols) {
        return Err(Error::Config(format!(
            "cannot extract {n} components from a {t_len}x{cols} block"
        )));
    }
    if t_len < 2 {
        return Err(Error::Data("need at least two observations for PCA".into()));
    }
    let mut z = d.clone();
    for j in 0..cols {
        let mut c = z.column_mut(j);
        let m = c.mean();
        c.add_scalar_mut(-m);
        let sd = (c.norm_squared() / (t_len - 1) as f64).sqrt();
        if !(sd > 0.0) {
            return Err(Error::Data(format!("column {j} of the PCA block is constant")));
        }
        c /= sd;
    }
    let cov = z.tr_mul(&z) / (t_len - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let loadings = DMatrix::from_fn(cols, n, |i, c| eig.eigenvectors[(i, order[c])]);
    let scores = &z * &loadings;
    Ok(Pca {
        scores,
        loadings,
        explained: order[..n].iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect(),
        total_variance: eig.eigenvalues.sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng(s: u64) -> Rng {
        Rng::seed_from_u64(s)
    }

    fn toy(t: usize, k: usize, seed: u64) -> (Vec<f64>, DMatrix<f64>) {
        let mut r = rng(seed);
        let x = DMatrix::from_fn(t, k, |_, j| if j == 0 { 1.0 } else { std_normal(&mut r) });
        let y: Vec<f64> = (0..t).map(|i| (i as f64 * 0.2).sin() + 0.3 * std_normal(&mut r)).collect();
        (y, x)
    }

    /// Scalar filter written out by hand.
    fn scalar_filter(y: &[f64], x: &[f64], r: f64, q: f64, m1: f64, p1: f64) -> Vec<(f64, f64)> {
        let (mut a, mut p) = (m1, p1);
        let mut out = Vec::new();
        for t in 0..y.len() {
            if t > 0 {
                p += q;
            }
            let f = x[t] * x[t] * p + r;
            let kg = p * x[t] / f;
            a += kg * (y[t] - x[t] * a);
            p *= 1.0 - kg * x[t];
            out.push((a, p));
        }
        out
    }

    #[test]
    fn scalar_filter_matches_hand_rolled() {
        let y = [1.0, 0.5, -0.3, 2.0, 1.1];
        let xs = [1.0, 2.0, 0.5, 1.5, -1.0];
        let x = DMatrix::from_column_slice(5, 1, &xs);
        let sys = RwSystem { y: &y, x: &x, obs_var: &[0.7; 5], state_var: &[0.2], init_mean: &[0.1], init_var: &[3.0] };
        let f = kalman_filter(&sys).unwrap();
        for (t, (a, p)) in scalar_filter(&y, &xs, 0.7, 0.2, 0.1, 3.0).into_iter().enumerate() {
            assert!((f.mean[t][0] - a).abs() < 1e-10);
            assert!((f.cov[t][(0, 0)] - p).abs() < 1e-10);
        }
    }

    #[test]
    fn smoother_equals_banded_mean() {
        let (y, x) = toy(40, 3, 1);
        let obs: Vec<f64> = (0..40).map(|t| 0.2 + 0.01 * t as f64).collect();
        let sys = RwSystem { y: &y, x: &x, obs_var: &obs, state_var: &[0.05, 0.01, 0.2], init_mean: &[0.0, 0.5, 0.0], init_var: &[1.0, 2.0, 0.5] };
        let a = smoothed_mean(&sys).unwrap();
        let b = awol_mean(&sys).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-8, "{u} {v}");
        }
    }

    #[test]
    fn zero_innovation_gives_constant_path() {
        let (y, x) = toy(30, 2, 2);
        let sys = RwSystem { y: &y, x: &x, obs_var: &[0.1; 30], state_var: &[0.0, 0.0], init_mean: &[0.0, 0.0], init_var: &[10.0, 10.0] };
        let mut r = rng(3);
        let path = ffbs_draw(&sys, &mut r).unwrap();
        for t in 1..30 {
            for j in 0..2 {
                assert!((path[t * 2 + j] - path[j]).abs() < 1e-8);
            }
        }
        // the constant equals a draw from the conjugate constant-coefficient posterior
        let prec = x.tr_mul(&x) / 0.1 + DMatrix::from_diagonal_element(2, 2, 0.1);
        let mean = prec.clone().try_inverse().unwrap() * (x.transpose() * DVector::from_column_slice(&y) / 0.1);
        let mut acc = [0.0; 2];
        let n = 4000;
        for _ in 0..n {
            let p = ffbs_draw(&sys, &mut r).unwrap();
            acc[0] += p[0];
            acc[1] += p[1];
        }
        let cov = prec.try_inverse().unwrap();
        for j in 0..2 {
            assert!((acc[j] / n as f64 - mean[j]).abs() < 4.0 * (cov[(j, j)] / n as f64).sqrt());
        }
    }

    #[test]
    fn scalar_banded_closed_form() {
        let x = DMatrix::from_element(1, 1, 2.0);
        let sys = RwSystem { y: &[3.0], x: &x, obs_var: &[0.5], state_var: &[1.0], init_mean: &[1.0], init_var: &[4.0] };
        let m = awol_mean(&sys).unwrap()[0];
        let prec = 0.25 + 4.0 / 0.5;
        let expect = (1.0 / 4.0 + 2.0 * 3.0 / 0.5) / prec;
        assert!((m - expect).abs() < 1e-14);
        let (p, _) = awol_precision(&sys).unwrap();
        assert!((p.get(0, 0) - prec).abs() < 1e-14);
    }

    #[test]
    fn banded_precision_has_no_fill_outside_the_band() {
        let (y, x) = toy(10, 3, 4);
        let sys = RwSystem { y: &y, x: &x, obs_var: &[1.0; 10], state_var: &[1.0; 3], init_mean: &[0.0; 3], init_var: &[1.0; 3] };
        let (p, _) = awol_precision(&sys).unwrap();
        assert_eq!(p.bandwidth(), 3);
        for i in 0..30usize {
            for j in 0..30 {
                if i.abs_diff(j) > 3 {
                    assert_eq!(p.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn ffbs_and_banded_agree_in_distribution() {
        let (y, x) = toy(50, 2, 5);
        let sys = RwSystem { y: &y, x: &x, obs_var: &[0.09; 50], state_var: &[0.02, 0.02], init_mean: &[0.0; 2], init_var: &[0.02; 2] };
        let mut r = rng(6);
        let n = 4000;
        let mut fa = vec![0.0; 100];
        let mut fb = vec![0.0; 100];
        let mut f2 = vec![0.0; 100];
        for _ in 0..n {
            let a = ffbs_draw(&sys, &mut r).unwrap();
            let b = awol_draw(&sys, &mut r).unwrap();
            for i in 0..100 {
                fa[i] += a[i];
                fb[i] += b[i];
                f2[i] += a[i] * a[i];
            }
        }
        for i in 0..100 {
            let ma = fa[i] / n as f64;
            let mb = fb[i] / n as f64;
            let sd = (f2[i] / n as f64 - ma * ma).sqrt();
            assert!((ma - mb).abs() < 4.0 * sd * (2.0 / n as f64).sqrt(), "{i}: {ma} {mb}");
        }
    }

    #[test]
    fn rw_competitor_tracks_a_drifting_coefficient() {
        let t = 150;
        let mut r = rng(7);
        let x = DMatrix::from_fn(t, 2, |_, j| if j == 0 { 1.0 } else { std_normal(&mut r) });
        let slope: Vec<f64> = (0..t).map(|i| -1.0 + 2.0 * i as f64 / t as f64).collect();
        let y = DVector::from_fn(t, |i, _| 0.5 + slope[i] * x[(i, 1)] + 0.1 * std_normal(&mut r));
        let m = RwTvpModel::new(y, x, &PriorSpec::default(), Volatility::Stochastic).unwrap();
        let mut st = m.initial_state();
        let mut streams = Streams::new(11, 0);
        let mut mean = vec![0.0; 2 * t];
        let n = 600;
        for it in 0..(n + 400) {
            m.sweep(&mut st, &mut streams).unwrap();
            if it >= 400 {
                for (a, b) in mean.iter_mut().zip(m.coefficients(&st)) {
                    *a += b / n as f64;
                }
            }
        }
        let err: f64 = (0..t).map(|i| (mean[i * 2 + 1] - slope[i]).abs()).sum::<f64>() / t as f64;
        assert!(err < 0.15, "mean abs error {err}");
    }

    #[test]
    fn pca_rank_one_and_ordering() {
        let t = 40;
        let u: Vec<f64> = (0..t).map(|i| (i as f64 * 0.3).sin() + 0.01 * i as f64).collect();
        let v = [1.0, -2.0, 0.5, 3.0];
        let d = DMatrix::from_fn(t, 4, |i, j| u[i] * v[j] + 0.3 * j as f64);
        let p = pca_compress(&d, 2).unwrap();
        let s0: Vec<f64> = p.scores.column(0).iter().copied().collect();
        let corr = correlation(&s0, &u);
        assert!((corr.abs() - 1.0).abs() < 1e-10);
        assert!(p.explained[1] < 1e-10);
        assert!((p.explained[0] - 4.0).abs() < 1e-10);

        let mut r = rng(8);
        let d = DMatrix::from_fn(60, 5, |_, j| std_normal(&mut r) * (j + 1) as f64);
        let p = pca_compress(&d, 3).unwrap();
        let cov = p.scores.tr_mul(&p.scores) / 59.0;
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert!(cov[(a, b)].abs() < 1e-10);
                }
            }
            assert!((cov[(a, a)] - p.explained[a]).abs() < 1e-10);
        }
        assert!(p.explained.windows(2).all(|w| w[0] >= w[1]));
        assert!((p.total_variance - 5.0).abs() < 1e-10);
        assert!(pca_compress(&d, 6).is_err());
        assert!(pca_compress(&d, 0).is_err());
    }

    #[test]
    fn pca_variance_matches_eigen_oracle() {
        let mut r = rng(9);
        let d = DMatrix::from_fn(30, 4, |i, j| std_normal(&mut r) + (i * j) as f64 * 0.05);
        let p = pca_compress(&d, 4).unwrap();
        let mut z = d.clone();
        for j in 0..4 {
            let c = z.column(j).clone_owned();
            let m = c.mean();
            let sd = ((c.add_scalar(-m)).norm_squared() / 29.0).sqrt();
            z.set_column(j, &c.add_scalar(-m).unscale(sd));
        }
        let cov = z.tr_mul(&z) / 29.0;
        let mut ev: Vec<f64> = cov.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in ev.iter().zip(&p.explained) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }
}
