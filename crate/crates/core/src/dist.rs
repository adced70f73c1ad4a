//! Random variate generators and small density helpers.
//!
//! The generalized inverse Gaussian sampler follows Hörmann & Leydold (2014):
//! ratio-of-uniforms with or without mode shift, plus the concave-hat
//! rejection scheme for small `omega` and `lambda < 1`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};

pub const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Open-interval uniform on (0, 1).
#[inline]
pub fn uniform_open<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

#[inline]
pub fn ln_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (LN_2PI + var.ln() + d * d / var)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Gamma draw with the given shape and *rate*.
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return Err(Error::Domain(format!(
            "gamma(shape = {shape}, rate = {rate})"
        )));
    }
    Ok(log_gamma_variate(rng, shape).exp() / rate)
}

/// Logarithm of a Gamma(shape, 1) draw. Stays finite for tiny shapes where
/// the variate itself underflows to zero.
pub fn log_gamma_variate<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("shape checked");
        g.sample(rng).ln()
    } else {
        let g = Gamma::new(shape + 1.0, 1.0).expect("shape checked");
        let x: f64 = g.sample(rng);
        x.ln() + uniform_open(rng).ln() / shape
    }
}

/// Dirichlet draw returned as log-weights; the weights themselves are
/// `exp` of the result and sum to one.
pub fn sample_dirichlet_log<R: Rng + ?Sized>(rng: &mut R, alpha: &[f64]) -> Result<Vec<f64>> {
    if alpha.is_empty() || alpha.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return Err(Error::Domain(format!("dirichlet alpha = {alpha:?}")));
    }
    let logs: Vec<f64> = alpha.iter().map(|&a| log_gamma_variate(rng, a)).collect();
    let norm = log_sum_exp(&logs);
    Ok(logs.into_iter().map(|l| l - norm).collect())
}

/// Categorical draw from unnormalised log-probabilities via the Gumbel-max
/// trick.
pub fn sample_log_categorical<R: Rng + ?Sized>(rng: &mut R, log_p: &[f64]) -> Result<usize> {
    let mut best = f64::NEG_INFINITY;
    let mut arg = None;
    for (g, &lp) in log_p.iter().enumerate() {
        if lp == f64::NEG_INFINITY {
            continue;
        }
        if lp.is_nan() {
            return Err(Error::Numerical("NaN log-probability".into()));
        }
        let gumbel = -(-uniform_open(rng).ln()).ln();
        let v = lp + gumbel;
        if v > best {
            best = v;
            arg = Some(g);
        }
    }
    arg.ok_or_else(|| Error::Numerical("all categories have zero probability".into()))
}

/// Normal draw truncated to `(lo, hi)` by inversion.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    rng: &mut R,
    mean: f64,
    sd: f64,
    lo: f64,
    hi: f64,
) -> f64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    let a = n.cdf((lo - mean) / sd);
    let b = n.cdf((hi - mean) / sd);
    if b - a > 1e-3 {
        // rejection is cheap and exact when the window holds real mass
        loop {
            let x = mean + sd * std_normal(rng);
            if x > lo && x < hi {
                return x;
            }
        }
    }
    let u = a + (b - a) * uniform_open(rng);
    let x = mean + sd * n.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16));
    x.clamp(lo + f64::EPSILON, hi - f64::EPSILON)
}

/// Draw from the generalized inverse Gaussian law with density
/// `p(x) ∝ x^(p-1) exp(-(b x + c / x) / 2)` on `x > 0`.
///
/// `c = 0` reduces to Gamma(p, rate b/2) and requires `p > 0`; `b = 0`
/// reduces to an inverse Gamma and requires `p < 0`.
pub fn sample_gig<R: Rng + ?Sized>(rng: &mut R, p: f64, b: f64, c: f64) -> Result<f64> {
    if !(p.is_finite() && b.is_finite() && c.is_finite()) || b < 0.0 || c < 0.0 {
        return Err(Error::Domain(format!("GIG(p = {p}, b = {b}, c = {c})")));
    }
    if c == 0.0 {
        if p > 0.0 && b > 0.0 {
            return sample_gamma(rng, p, b / 2.0);
        }
        return Err(Error::Domain(format!(
            "GIG(p = {p}, b = {b}, c = 0) is improper"
        )));
    }
    if b == 0.0 {
        if p < 0.0 {
            return Ok(1.0 / sample_gamma(rng, -p, c / 2.0)?);
        }
        return Err(Error::Domain(format!(
            "GIG(p = {p}, b = 0, c = {c}) is improper"
        )));
    }

    let omega = (b * c).sqrt();
    let alpha = (c / b).sqrt();
    let lambda = p.abs();

    let x = if omega < 1e-12 {
        // Limit where the standardized law is Gamma(lambda, omega / 2) or its
        // reciprocal; the rejection schemes below lose precision here.
        if lambda > 0.0 {
            sample_gamma(rng, lambda, omega / 2.0)?
        } else {
            return Err(Error::Domain(format!(
                "GIG(p = 0, b = {b}, c = {c}) numerically degenerate"
            )));
        }
    } else if lambda > 2.0 || omega > 3.0 {
        rou_shift(rng, lambda, omega)
    } else if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        rou_noshift(rng, lambda, omega)
    } else {
        concave_hat(rng, lambda, omega)
    };
    let out = if p < 0.0 { alpha / x } else { alpha * x };
    if out.is_finite() && out > 0.0 {
        Ok(out)
    } else if out == 0.0 {
        Ok(f64::MIN_POSITIVE)
    } else {
        Err(Error::Numerical(format!(
            "GIG(p = {p}, b = {b}, c = {c}) produced {out}"
        )))
    }
}

fn gig_mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        (((lambda - 1.0) * (lambda - 1.0) + omega * omega).sqrt() + (lambda - 1.0)) / omega
    } else {
        omega / (((1.0 - lambda) * (1.0 - lambda) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

fn rou_noshift<R: Rng + ?Sized>(rng: &mut R, lambda: f64, omega: f64) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0) * (lambda + 1.0) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * uniform_open(rng);
        let v = uniform_open(rng);
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn rou_shift<R: Rng + ?Sized>(rng: &mut R, lambda: f64, omega: f64) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = gig_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);

    // roots of the cubic bounding the shifted region
    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = (2.0 * a * a * a) / 27.0 - (a * b) / 3.0 + c;
    let fi = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * PI).cos() - a / 3.0;

    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();
    loop {
        let u = uminus + uniform_open(rng) * (uplus - uminus);
        let v = uniform_open(rng);
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

fn concave_hat<R: Rng + ?Sized>(rng: &mut R, lambda: f64, omega: f64) -> f64 {
    let xm = gig_mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let a0 = k0 * x0;
    let (k1, a1, k2, a2);
    if x0 >= 2.0 / omega {
        k1 = 0.0;
        a1 = 0.0;
        k2 = x0.powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega;
    } else {
        k1 = (-omega).exp();
        a1 = if lambda == 0.0 {
            k1 * (2.0 / (omega * omega)).ln()
        } else {
            k1 / lambda * ((2.0 / omega).powf(lambda) - x0.powf(lambda))
        };
        k2 = (2.0 / omega).powf(lambda - 1.0);
        a2 = k2 * 2.0 * (-1.0f64).exp() / omega;
    }
    let total = a0 + a1 + a2;
    loop {
        let mut v = total * uniform_open(rng);
        let (x, hx);
        if v <= a0 {
            x = x0 * v / a0;
            hx = k0;
        } else {
            v -= a0;
            if v <= a1 {
                if lambda == 0.0 {
                    x = omega * (omega.exp() * v).exp();
                    hx = k1 / x;
                } else {
                    x = (x0.powf(lambda) + lambda / k1 * v).powf(1.0 / lambda);
                    hx = k1 * x.powf(lambda - 1.0);
                }
            } else {
                v -= a1;
                let start = if x0 > 2.0 / omega { x0 } else { 2.0 / omega };
                x = -2.0 / omega * ((-omega / 2.0 * start).exp() - omega / (2.0 * k2) * v).ln();
                hx = k2 * (-omega / 2.0 * x).exp();
            }
        }
        let u = uniform_open(rng) * hx;
        if u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}

/// `E[X^k]` of the GIG law by quadrature on a log-scale grid. Shared by the
/// tests of every GIG consumer.
pub fn gig_moment_quadrature(p: f64, b: f64, c: f64, k: f64) -> f64 {
    // integrate exp(p u - (b e^u + c e^-u)/2) over u = ln x
    let log_f = |u: f64, extra: f64| (p + extra) * u - 0.5 * (b * u.exp() + c * (-u).exp());
    // bracket the bulk by scanning outward from the log-mode
    let mut centre = 0.0;
    let mut best = f64::NEG_INFINITY;
    let mut u = -60.0;
    while u <= 60.0 {
        let v = log_f(u, k);
        if v > best {
            best = v;
            centre = u;
        }
        u += 0.01;
    }
    let (lo, hi, n) = (centre - 40.0, centre + 40.0, 400_000usize);
    let h = (hi - lo) / n as f64;
    let integrate = |extra: f64, shift: f64| {
        let mut acc = 0.0;
        for i in 0..=n {
            let u = lo + i as f64 * h;
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            acc += w * (log_f(u, extra) - shift).exp();
        }
        acc * h
    };
    let shift = best;
    integrate(k, shift) / integrate(0.0, shift)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, StreamId};

    fn draws(p: f64, b: f64, c: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, 0, StreamId::Init);
        (0..n).map(|_| sample_gig(&mut rng, p, b, c).unwrap()).collect()
    }

    fn mean(xs: &[f64]) -> f64 {
        xs.iter().sum::<f64>() / xs.len() as f64
    }

    #[test]
    fn gig_mean_matches_quadrature_across_regimes() {
        // one parameter triple per rejection scheme, plus negative p
        let cases = [
            (0.1, 1.0, 1.0),    // newapproach / noshift boundary
            (0.3, 0.01, 0.01),  // concave hat (omega small)
            (0.5, 1.0, 2.0),    // noshift
            (3.0, 2.0, 1.0),    // shifted ROU
            (-0.4, 0.2, 0.5),   // reciprocal branch
            (-5.4, 1.2, 3.0),   // mixture scales with many groups
        ];
        for (i, &(p, b, c)) in cases.iter().enumerate() {
            let xs = draws(p, b, c, 100_000, 11 + i as u64);
            let m = mean(&xs);
            let oracle = gig_moment_quadrature(p, b, c, 1.0);
            let sd = (gig_moment_quadrature(p, b, c, 2.0) - oracle * oracle).sqrt();
            let se = sd / (xs.len() as f64).sqrt();
            assert!(
                (m - oracle).abs() < (0.01 * oracle).max(4.0 * se),
                "case {:?}: mean {m} vs quadrature {oracle} (se {se})",
                (p, b, c)
            );
        }
    }

    #[test]
    fn gig_reduces_to_gamma_when_c_is_zero() {
        let xs = draws(2.5, 3.0, 0.0, 50_000, 3);
        let m = mean(&xs);
        assert!((m - 2.5 / 1.5).abs() < 0.02, "{m}");
    }

    #[test]
    fn gig_rejects_improper_limits() {
        let mut rng = stream(1, 0, StreamId::Init);
        assert!(sample_gig(&mut rng, -0.4, 1.0, 0.0).is_err());
        assert!(sample_gig(&mut rng, 0.4, 0.0, 1.0).is_err());
        assert!(sample_gig(&mut rng, 0.4, -1.0, 1.0).is_err());
    }

    #[test]
    fn inverse_gaussian_reduction_moments() {
        // p = -1/2: X ~ IG(mean = sqrt(c/b), shape = c)
        let (b, c) = (2.0, 4.5);
        let xs = draws(-0.5, b, c, 100_000, 5);
        let mu = (c / b).sqrt();
        let var = mu.powi(3) / c;
        let m = mean(&xs);
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / xs.len() as f64;
        assert!((m - mu).abs() / mu < 0.01, "mean {m} vs {mu}");
        assert!((v - var).abs() / var < 0.03, "var {v} vs {var}");
    }

    #[test]
    fn gig_scaling_law() {
        // X ~ GIG(p, b, c)  =>  s X ~ GIG(p, b / s, s c)
        let (p, b, c, s) = (0.7, 1.5, 0.8, 10.0);
        let mut a = draws(p, b, c, 40_000, 21);
        let mut z = draws(p, b / s, s * c, 40_000, 22);
        a.iter_mut().for_each(|x| *x *= s);
        a.sort_by(f64::total_cmp);
        z.sort_by(f64::total_cmp);
        for q in [0.1, 0.25, 0.5, 0.75, 0.9] {
            let i = (q * a.len() as f64) as usize;
            assert!((a[i] - z[i]).abs() / z[i] < 0.03, "q{q}: {} vs {}", a[i], z[i]);
        }
    }

    #[test]
    fn dirichlet_log_weights_stay_finite_for_tiny_shapes() {
        let mut rng = stream(3, 0, StreamId::Init);
        let lw = sample_dirichlet_log(&mut rng, &[0.001; 12]).unwrap();
        assert!(lw.iter().all(|l| l.is_finite()));
        let total: f64 = lw.iter().map(|l| l.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn categorical_never_picks_zero_probability() {
        let mut rng = stream(4, 0, StreamId::Init);
        for _ in 0..1000 {
            let g = sample_log_categorical(&mut rng, &[0.0, f64::NEG_INFINITY, -1.0]).unwrap();
            assert_ne!(g, 1);
        }
        assert!(sample_log_categorical(&mut rng, &[f64::NEG_INFINITY; 3]).is_err());
    }

    #[test]
    fn truncated_normal_respects_bounds() {
        let mut rng = stream(5, 0, StreamId::Init);
        for &(m, s) in &[(0.9, 0.05), (1.3, 0.01), (-2.0, 0.1)] {
            for _ in 0..200 {
                let x = sample_truncated_normal(&mut rng, m, s, -1.0, 1.0);
                assert!(x > -1.0 && x < 1.0);
            }
        }
    }
}
