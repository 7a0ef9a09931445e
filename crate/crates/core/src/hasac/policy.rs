//! Hybrid discrete/continuous policies shared by the SAC and A2C trainers.
//!
//! An actor network outputs, in order: one block of logits per categorical
//! component, then the means and the log-stds of the continuous component.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::nn::heads::{argmax, gaussian_head, gaussian_log_prob_of, log_softmax, sample_categorical_head, GaussianSample};
use crate::nn::{Activation, DenseNet};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadLayout {
    pub categorical: Vec<usize>,
    pub continuous: usize,
}

impl HeadLayout {
    pub fn logits_len(&self) -> usize {
        self.categorical.iter().sum()
    }

    pub fn output_len(&self) -> usize {
        self.logits_len() + 2 * self.continuous
    }

    /// Length of the critic-side encoding: one-hot blocks plus squashed values.
    pub fn encoding_len(&self) -> usize {
        self.logits_len() + self.continuous
    }

    /// Offsets of each categorical block within the logits.
    pub fn offsets(&self) -> Vec<usize> {
        self.categorical
            .iter()
            .scan(0, |acc, &n| {
                let start = *acc;
                *acc += n;
                Some(start)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub obs_dim: usize,
    pub layout: HeadLayout,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentAction {
    pub discrete: Vec<usize>,
    /// Squashed values in (−1, 1).
    pub continuous: Vec<f64>,
    /// Values before the tanh squash, kept for on-policy log-probabilities.
    pub pre_tanh: Vec<f64>,
}

pub fn build_actor<R: Rng + ?Sized>(spec: &AgentSpec, hidden: &[usize], act: Activation, rng: &mut R) -> DenseNet {
    let mut sizes = vec![spec.obs_dim];
    sizes.extend(hidden);
    sizes.push(spec.layout.output_len());
    DenseNet::new(&sizes, act, Activation::Identity, rng)
}

/// A sampled action with its log-probability and head internals.
#[derive(Clone, Debug)]
pub struct SampledAction {
    pub action: AgentAction,
    pub log_prob: f64,
    /// Per categorical component: the full probability vector.
    pub probs: Vec<Vec<f64>>,
    pub gaussian: Option<GaussianSample>,
}

/// Samples (or, when `deterministic`, takes the mode of) the policy given
/// one row of actor output.
pub fn sample_from_output<R: Rng + ?Sized>(layout: &HeadLayout, out: &[f64], rng: &mut R, deterministic: bool) -> SampledAction {
    let mut discrete = Vec::with_capacity(layout.categorical.len());
    let mut probs = Vec::with_capacity(layout.categorical.len());
    let mut log_prob = 0.0;
    for (&start, &n) in layout.offsets().iter().zip(&layout.categorical) {
        let logits = &out[start..start + n];
        let (index, lp, p) = if deterministic {
            let lps = log_softmax(logits);
            let k = argmax(logits);
            (k, lps[k], lps.iter().map(|l| l.exp()).collect())
        } else {
            let s = sample_categorical_head(logits, 1.0, rng);
            (s.index, s.log_prob, s.probs)
        };
        discrete.push(index);
        probs.push(p);
        log_prob += lp;
    }
    let l = layout.logits_len();
    let (continuous, pre_tanh, gaussian) = if layout.continuous == 0 {
        (Vec::new(), Vec::new(), None)
    } else {
        let head = &out[l..l + 2 * layout.continuous];
        let noise: Vec<f64> = if deterministic {
            vec![0.0; layout.continuous]
        } else {
            (0..layout.continuous).map(|_| rng.sample(rand_distr::StandardNormal)).collect()
        };
        let g = gaussian_head(head, &noise);
        log_prob += g.log_prob;
        (g.action.clone(), g.pre_tanh.clone(), Some(g))
    };
    SampledAction { action: AgentAction { discrete, continuous, pre_tanh }, log_prob, probs, gaussian }
}

/// Writes the critic-side encoding of `a` into `out` (length `encoding_len`).
pub fn encode_into(layout: &HeadLayout, a: &AgentAction, out: &mut [f64]) {
    out.fill(0.0);
    for ((&start, _), &k) in layout.offsets().iter().zip(&layout.categorical).zip(&a.discrete) {
        out[start + k] = 1.0;
    }
    let l = layout.logits_len();
    out[l..l + layout.continuous].copy_from_slice(&a.continuous);
}

pub fn encode(layout: &HeadLayout, a: &AgentAction) -> Vec<f64> {
    let mut v = vec![0.0; layout.encoding_len()];
    encode_into(layout, a, &mut v);
    v
}

/// Log-probability of a stored action and its gradient with respect to the
/// actor output row.
pub fn log_prob_of(layout: &HeadLayout, out: &[f64], a: &AgentAction) -> (f64, Vec<f64>) {
    let mut grad = vec![0.0; layout.output_len()];
    let mut lp = 0.0;
    for ((&start, &n), &k) in layout.offsets().iter().zip(&layout.categorical).zip(&a.discrete) {
        let lps = log_softmax(&out[start..start + n]);
        lp += lps[k];
        for j in 0..n {
            grad[start + j] = if j == k { 1.0 } else { 0.0 } - lps[j].exp();
        }
    }
    if layout.continuous > 0 {
        let l = layout.logits_len();
        let (glp, g) = gaussian_log_prob_of(&out[l..l + 2 * layout.continuous], &a.pre_tanh);
        lp += glp;
        grad[l..].copy_from_slice(&g);
    }
    (lp, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn layout() -> HeadLayout {
        HeadLayout { categorical: vec![2, 3], continuous: 2 }
    }

    #[test]
    fn sizes_and_offsets() {
        let l = layout();
        assert_eq!((l.logits_len(), l.output_len(), l.encoding_len()), (5, 9, 7));
        assert_eq!(l.offsets(), vec![0, 2]);
    }

    #[test]
    fn encoding_is_one_hot_plus_values() {
        let a = AgentAction { discrete: vec![1, 2], continuous: vec![0.5, -0.25], pre_tanh: vec![0.0; 2] };
        assert_eq!(encode(&layout(), &a), vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.5, -0.25]);
    }

    #[test]
    fn sampled_log_prob_matches_stored_log_prob() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = [0.2, -0.4, 1.0, 0.0, -1.0, 0.3, -0.2, -0.5, 0.1];
        for _ in 0..20 {
            let s = sample_from_output(&layout(), &out, &mut rng, false);
            let (lp, _) = log_prob_of(&layout(), &out, &s.action);
            assert!((lp - s.log_prob).abs() < 1e-9);
        }
    }

    #[test]
    fn stored_log_prob_gradient_matches_differences() {
        let out = [0.2, -0.4, 1.0, 0.0, -1.0, 0.3, -0.2, -0.5, 0.1];
        let a = AgentAction { discrete: vec![0, 2], continuous: vec![0.2f64.tanh(), (-0.7f64).tanh()], pre_tanh: vec![0.2, -0.7] };
        let (_, g) = log_prob_of(&layout(), &out, &a);
        for p in 0..out.len() {
            let mut up = out;
            let mut dn = out;
            up[p] += 1e-6;
            dn[p] -= 1e-6;
            let fd = (log_prob_of(&layout(), &up, &a).0 - log_prob_of(&layout(), &dn, &a).0) / 2e-6;
            assert!((fd - g[p]).abs() < 1e-6, "{p}");
        }
    }

    #[test]
    fn deterministic_takes_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = [0.2, -0.4, 1.0, 3.0, -1.0, 0.3, -0.2, -0.5, 0.1];
        let s = sample_from_output(&layout(), &out, &mut rng, true);
        assert_eq!(s.action.discrete, vec![0, 1]);
        assert_eq!(s.action.continuous, vec![0.3f64.tanh(), (-0.2f64).tanh()]);
    }
}
