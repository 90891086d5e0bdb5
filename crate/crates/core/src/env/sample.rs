//! Samplers for initial states and rollout noise.
//!
//! Both are deterministic functions of the rng state. The initial-state
//! distribution only needs to cover the states of interest: alphas start in
//! their stationary law, the last weight and statics uniformly over their
//! declared ranges.

use rand::Rng;
use rand_distr::StandardNormal;

use super::{stationary_std, EnvSpec, State};

/// Draw `n` initial states. Per state the draw order is statics, then alpha
/// components, then last weight; when the alpha volatility is a lifted
/// static, the sampled value feeds the stationary law of that state.
pub fn sample_initial_states<R: Rng + ?Sized>(env: &EnvSpec, n: usize, rng: &mut R) -> Vec<State> {
    let params = env.alpha.component_params();
    let [lw_lo, lw_hi] = env.lw_init_range;
    (0..n)
        .map(|_| {
            let statics: Vec<f64> =
                env.statics.iter().map(|d| rng.random_range(d.lo..=d.hi)).collect();
            let probe = State { alpha: vec![0.0; params.len()], last_weight: 0.0, statics };
            let alpha = params
                .iter()
                .enumerate()
                .map(|(c, &(rho, _))| {
                    let sd = stationary_std(rho, env.sigma_of(&probe, c));
                    let z: f64 = rng.sample(StandardNormal);
                    sd * z
                })
                .collect();
            let last_weight = rng.random_range(lw_lo..=lw_hi);
            State { alpha, last_weight, statics: probe.statics }
        })
        .collect()
}

/// Standard-normal innovations for `n` samples over `t` steps, one per alpha
/// component. Stored step-major so a chunk of samples at a fixed `(step,
/// component)` is a contiguous row.
pub struct NoiseTensor {
    pub n: usize,
    pub t: usize,
    pub comps: usize,
    data: Vec<f64>,
}

impl NoiseTensor {
    pub fn at(&self, sample: usize, step: usize, comp: usize) -> f64 {
        self.data[(step * self.comps + comp) * self.n + sample]
    }

    /// Innovations of all samples in `range` at a fixed step and component.
    pub fn row(&self, step: usize, comp: usize, range: std::ops::Range<usize>) -> &[f64] {
        let base = (step * self.comps + comp) * self.n;
        &self.data[base + range.start..base + range.end]
    }
}

/// Sample the full noise tensor for a batch of rollouts. The draw order is
/// sample-major (all steps and components of sample 0, then sample 1, ...).
pub fn sample_noise<R: Rng + ?Sized>(
    env: &EnvSpec,
    n: usize,
    t: usize,
    rng: &mut R,
) -> NoiseTensor {
    let comps = env.alpha.components();
    let mut data = vec![0.0; n * t * comps];
    for sample in 0..n {
        for step in 0..t {
            for comp in 0..comps {
                data[(step * comps + comp) * n + sample] = rng.sample(StandardNormal);
            }
        }
    }
    NoiseTensor { n, t, comps, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{AlphaModel, CostSpec, RiskSpec, StaticParam, StaticParamDecl};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mono_env() -> EnvSpec {
        EnvSpec {
            alpha: AlphaModel::Mono { rho: 0.9, sigma: 1.0 },
            risk: RiskSpec { l2_lambda: 1.0, max_weight: None },
            cost: CostSpec { l1_spread: 4.0, l2_coeff: 0.0 },
            statics: vec![],
            lw_init_range: [-6.0, 6.0],
        }
    }

    #[test]
    fn stationary_std_of_persistent_alpha() {
        // rho = 0.9, sigma = 1: sd = 1/sqrt(1 - 0.81) ≈ 2.2942.
        let env = mono_env();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let states = sample_initial_states(&env, 1_000_000, &mut rng);
        let mean = states.iter().map(|s| s.alpha[0]).sum::<f64>() / states.len() as f64;
        let var = states.iter().map(|s| (s.alpha[0] - mean).powi(2)).sum::<f64>()
            / (states.len() - 1) as f64;
        let want = stationary_std(0.9, 1.0);
        assert!((want - 2.2941573).abs() < 1e-6);
        assert!((var.sqrt() - want).abs() / want < 0.01, "sd = {}", var.sqrt());
    }

    #[test]
    fn zero_persistence_means_stationary_std_is_sigma() {
        assert_eq!(stationary_std(0.0, 1.7), 1.7);
    }

    #[test]
    fn statics_sample_uniformly_over_their_range() {
        let mut env = mono_env();
        env.statics.push(StaticParamDecl { name: StaticParam::L1Spread, lo: 0.0, hi: 6.0 });
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let states = sample_initial_states(&env, 100_000, &mut rng);
        let values: Vec<f64> = states.iter().map(|s| s.statics[0]).collect();
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert!(min >= 0.0 && max <= 6.0);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        assert!((mean - 3.0).abs() / 3.0 < 0.02, "mean = {mean}");
    }

    #[test]
    fn noise_moments_and_determinism() {
        let env = mono_env();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = sample_noise(&env, 10_000, 100, &mut rng);
        let total = (noise.n * noise.t * noise.comps) as f64;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..noise.n {
            for t in 0..noise.t {
                let v = noise.at(i, t, 0);
                sum += v;
                sum_sq += v * v;
            }
        }
        let mean = sum / total;
        let var = sum_sq / total - mean * mean;
        assert!(mean.abs() < 0.005, "mean = {mean}");
        assert!((var - 1.0).abs() < 0.01, "var = {var}");

        let mut rng2 = ChaCha8Rng::seed_from_u64(3);
        let noise2 = sample_noise(&env, 10_000, 100, &mut rng2);
        assert_eq!(noise.data, noise2.data);
    }

    #[test]
    fn noise_rows_are_contiguous_views() {
        let env = mono_env();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = sample_noise(&env, 16, 3, &mut rng);
        let row = noise.row(2, 0, 4..9);
        for (offset, &v) in row.iter().enumerate() {
            assert_eq!(v, noise.at(4 + offset, 2, 0));
        }
    }
}
