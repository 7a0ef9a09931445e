//! Policy output heads: tanh-squashed Gaussians and Gumbel categoricals.

use rand::Rng;
use rand_distr::StandardNormal;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(1 − tanh²(u))`, stable for large |u|.
pub fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u.abs() - (-2.0 * u.abs()).exp().ln_1p())
}

fn clamp_log_std(raw: f64) -> (f64, bool) {
    let c = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
    (c, c == raw)
}

/// A reparameterized sample `a = tanh(μ + σε)` with everything needed to
/// differentiate through it.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianSample {
    pub action: Vec<f64>,
    pub pre_tanh: Vec<f64>,
    pub noise: Vec<f64>,
    pub log_prob: f64,
    /// `∂ log π / ∂ head output` at fixed noise (means first, then log-stds).
    pub dlogp_dout: Vec<f64>,
    /// `∂ a_d / ∂ μ_d`.
    pub da_dmean: Vec<f64>,
    /// `∂ a_d / ∂ (raw log-std)_d`, zero where the clamp is active.
    pub da_dlogstd: Vec<f64>,
}

/// Squashed Gaussian from a head output of `2n` values (means, then log-stds)
/// and standard-normal `noise` of length `n`.
pub fn gaussian_head(out: &[f64], noise: &[f64]) -> GaussianSample {
    assert_eq!(out.len(), 2 * noise.len(), "gaussian head expects 2n outputs");
    let n = noise.len();
    let mut s = GaussianSample {
        action: Vec::with_capacity(n),
        pre_tanh: Vec::with_capacity(n),
        noise: noise.to_vec(),
        log_prob: 0.0,
        dlogp_dout: vec![0.0; 2 * n],
        da_dmean: Vec::with_capacity(n),
        da_dlogstd: Vec::with_capacity(n),
    };
    for d in 0..n {
        let (log_std, free) = clamp_log_std(out[n + d]);
        let std = log_std.exp();
        let eps = noise[d];
        let u = out[d] + std * eps;
        let a = u.tanh();
        s.log_prob += -0.5 * eps * eps - log_std - HALF_LN_2PI - log_one_minus_tanh_sq(u);
        // d/du of −ln(1 − tanh²u) is 2·tanh(u).
        s.dlogp_dout[d] = 2.0 * a;
        s.dlogp_dout[n + d] = if free { -1.0 + 2.0 * a * std * eps } else { 0.0 };
        let sech2 = 1.0 - a * a;
        s.da_dmean.push(sech2);
        s.da_dlogstd.push(if free { sech2 * std * eps } else { 0.0 });
        s.action.push(a);
        s.pre_tanh.push(u);
    }
    s
}

pub fn sample_gaussian_head<R: Rng + ?Sized>(out: &[f64], rng: &mut R) -> GaussianSample {
    let noise: Vec<f64> = (0..out.len() / 2).map(|_| rng.sample(StandardNormal)).collect();
    gaussian_head(out, &noise)
}

/// Mode of the squashed Gaussian, `tanh(μ)`.
pub fn gaussian_mode(out: &[f64]) -> Vec<f64> {
    out[..out.len() / 2].iter().map(|m| m.tanh()).collect()
}

/// Log-density of a stored pre-squash value `u`, with gradients with respect
/// to the head output (used by on-policy updates).
pub fn gaussian_log_prob_of(out: &[f64], pre_tanh: &[f64]) -> (f64, Vec<f64>) {
    let n = pre_tanh.len();
    assert_eq!(out.len(), 2 * n);
    let mut lp = 0.0;
    let mut grad = vec![0.0; 2 * n];
    for d in 0..n {
        let (log_std, free) = clamp_log_std(out[n + d]);
        let std = log_std.exp();
        let z = (pre_tanh[d] - out[d]) / std;
        lp += -0.5 * z * z - log_std - HALF_LN_2PI - log_one_minus_tanh_sq(pre_tanh[d]);
        grad[d] = z / std;
        grad[n + d] = if free { z * z - 1.0 } else { 0.0 };
    }
    (lp, grad)
}

/// Density of the squashed Gaussian at action `a ∈ (−1, 1)` in one dimension.
pub fn squashed_density(mean: f64, log_std: f64, a: f64) -> f64 {
    let (log_std, _) = clamp_log_std(log_std);
    let u = a.atanh();
    let z = (u - mean) / log_std.exp();
    (-0.5 * z * z - log_std - HALF_LN_2PI).exp() / (1.0 - a * a)
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x - lse).collect()
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    log_softmax(logits).into_iter().map(f64::exp).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CategoricalSample {
    pub index: usize,
    /// Exact log-mass of `index`.
    pub log_prob: f64,
    pub probs: Vec<f64>,
    /// Relaxed one-hot `softmax((logits + g)/temperature)`.
    pub relaxed: Vec<f64>,
}

/// Gumbel-max sample given uniform draws `u ∈ (0, 1)` of the logits' length.
pub fn categorical_head(logits: &[f64], temperature: f64, uniforms: &[f64]) -> CategoricalSample {
    assert_eq!(logits.len(), uniforms.len());
    let perturbed: Vec<f64> = logits.iter().zip(uniforms).map(|(l, u)| l - (-u.ln()).ln()).collect();
    let index = perturbed
        .iter()
        .enumerate()
        .fold(0, |best, (i, &v)| if v > perturbed[best] { i } else { best });
    let logp = log_softmax(logits);
    let scaled: Vec<f64> = perturbed.iter().map(|v| v / temperature).collect();
    CategoricalSample { index, log_prob: logp[index], probs: logp.iter().map(|l| l.exp()).collect(), relaxed: softmax(&scaled) }
}

pub fn sample_categorical_head<R: Rng + ?Sized>(logits: &[f64], temperature: f64, rng: &mut R) -> CategoricalSample {
    let u: Vec<f64> = logits
        .iter()
        .map(|_| {
            let x: f64 = rng.random();
            x.max(f64::MIN_POSITIVE)
        })
        .collect();
    categorical_head(logits, temperature, &u)
}

pub fn argmax(xs: &[f64]) -> usize {
    xs.iter().enumerate().fold(0, |best, (i, &v)| if v > xs[best] { i } else { best })
}
