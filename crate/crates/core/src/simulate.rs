//! Finite populations of independent `N`-blocks.
//!
//! Each block of `N` agents evolves through the joint kernel evaluated at the
//! deterministic mean-field path, so blocks interact only through that path.
//! Every block (or Monte-Carlo sample chunk) owns a random stream derived
//! from `(seed, index)`, which makes results independent of thread count.
//! Categorical draws use integer alias tables, so the same seed reproduces
//! the same draws on every platform.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::{lambda_rollout, PrescriptionSource};
use crate::model::{MeanField, Prescription, ValidatedModel};
use crate::rng;

const ONE: u64 = 1 << 32;

/// Walker/Vose alias table with 32-bit integer thresholds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AliasTable {
    threshold: Vec<u64>,
    alias: Vec<u32>,
}

impl AliasTable {
    /// Builds a table for the (nonnegative, not necessarily normalized)
    /// weights `probs`. Each weight is scaled to an integer share of
    /// `n * 2^32`; rounding slack goes to the largest weight.
    pub fn new(probs: &[f64]) -> Self {
        let n = probs.len();
        assert!(n > 0, "alias table needs at least one outcome");
        let total: f64 = probs.iter().sum();
        let target = n as u64 * ONE;
        let mut w: Vec<u64> = probs
            .iter()
            .map(|&p| if total > 0.0 { (p.max(0.0) / total * target as f64).floor() as u64 } else { ONE })
            .collect();
        let assigned: u64 = w.iter().sum();
        let top = (0..n).fold(0, |b, i| if w[i] > w[b] { i } else { b });
        if assigned <= target {
            w[top] += target - assigned;
        } else {
            w[top] -= assigned - target;
        }
        let mut threshold = vec![ONE; n];
        let mut alias: Vec<u32> = (0..n as u32).collect();
        let mut small: Vec<usize> = (0..n).filter(|&i| w[i] < ONE).collect();
        let mut large: Vec<usize> = (0..n).filter(|&i| w[i] >= ONE).collect();
        small.reverse();
        large.reverse();
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            threshold[s] = w[s];
            alias[s] = l as u32;
            w[l] -= ONE - w[s];
            if w[l] < ONE {
                large.pop();
                small.push(l);
            }
        }
        Self { threshold, alias }
    }

    pub fn sample<R: RngCore>(&self, rng: &mut R) -> usize {
        let col = rng.gen_range(0..self.threshold.len());
        let u = rng.next_u32() as u64;
        if u < self.threshold[col] {
            col
        } else {
            self.alias[col] as usize
        }
    }
}

/// Alias tables for every draw a block trajectory needs along a fixed path.
struct PathSampler {
    initial: AliasTable,
    /// `[t][x]` action tables.
    actions: Vec<Vec<AliasTable>>,
    /// `[t][joint_x * |A^N| + joint_a]` next-type tables.
    kernel: Vec<Vec<AliasTable>>,
}

impl PathSampler {
    fn new(model: &ValidatedModel, gammas: &[Prescription], zs: &[MeanField]) -> Result<Self> {
        if zs.len() < gammas.len() {
            return Err(Error::HorizonMismatch { expected: gammas.len(), got: zs.len() });
        }
        let sx = model.meanfield_dim();
        let sa = model.joint_a().size();
        let actions = gammas
            .iter()
            .map(|g| (0..model.n_states()).map(|x| AliasTable::new(g.row(x))).collect())
            .collect();
        let kernel = zs[..gammas.len()]
            .iter()
            .map(|z| {
                let k = model.kernel_at(z);
                let mut row = vec![0.0; sx];
                (0..sx * sa)
                    .map(|i| {
                        k.row_into(i / sa, i % sa, &mut row);
                        AliasTable::new(&row)
                    })
                    .collect()
            })
            .collect();
        Ok(Self { initial: AliasTable::new(zs[0].probs()), actions, kernel })
    }
}

/// Joint types `x_1..x_{T+1}` and joint actions `a_1..a_T` of one block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockTrajectory {
    pub joint_x: Vec<usize>,
    pub joint_a: Vec<usize>,
}

fn run_block<R: RngCore>(model: &ValidatedModel, s: &PathSampler, rng: &mut R) -> BlockTrajectory {
    let ja_idx = model.joint_a();
    let jx_idx = model.joint_x();
    let sa = ja_idx.size();
    let horizon = s.actions.len();
    let mut joint_x = Vec::with_capacity(horizon + 1);
    let mut joint_a = Vec::with_capacity(horizon);
    let mut jx = s.initial.sample(rng);
    joint_x.push(jx);
    let mut acts = vec![0usize; model.n_corr()];
    for t in 0..horizon {
        for (a, &x) in acts.iter_mut().zip(jx_idx.digits(jx)) {
            *a = s.actions[t][x].sample(rng);
        }
        let ja = ja_idx.encode(&acts);
        jx = s.kernel[t][jx * sa + ja].sample(rng);
        joint_a.push(ja);
        joint_x.push(jx);
    }
    BlockTrajectory { joint_x, joint_a }
}

/// One block trajectory: `x_1 ~ z_1`, actions drawn independently per agent
/// from `gamma_t`, next joint type from the kernel at the deterministic `z_t`.
pub fn sample_block_trajectory<R: RngCore>(
    model: &ValidatedModel,
    gammas: &[Prescription],
    zs: &[MeanField],
    rng: &mut R,
) -> Result<BlockTrajectory> {
    let s = PathSampler::new(model, gammas, zs)?;
    Ok(run_block(model, &s, rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_blocks: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalPath {
    /// Empirical joint-type frequencies per stage `t = 1..T+1`.
    pub empirical: Vec<Vec<f64>>,
    /// Deterministic rollout of `gammas` from `z1`.
    pub deterministic: Vec<MeanField>,
    pub tv: Vec<f64>,
}

impl EmpiricalPath {
    pub fn max_tv(&self) -> f64 {
        self.tv.iter().copied().fold(0.0, f64::max)
    }
}

/// Simulates `n_blocks` independent blocks along the rollout of `gammas`
/// from `z1` and compares empirical frequencies with the rollout.
pub fn empirical_meanfield(
    model: &ValidatedModel,
    gammas: &[Prescription],
    z1: &MeanField,
    config: SimConfig,
) -> Result<EmpiricalPath> {
    if config.n_blocks == 0 {
        return Err(Error::BadShape("n_blocks must be at least 1".into()));
    }
    let horizon = gammas.len();
    let traj = lambda_rollout(model, z1, &PrescriptionSource::Fixed(gammas), horizon)?;
    let sampler = PathSampler::new(model, gammas, &traj.meanfields)?;
    let sx = model.meanfield_dim();
    let counts = (0..config.n_blocks)
        .into_par_iter()
        .fold(
            || vec![0u64; (horizon + 1) * sx],
            |mut acc, b| {
                let mut r = rng::stream(config.seed, &[b as u64]);
                let path = run_block(model, &sampler, &mut r);
                for (t, &jx) in path.joint_x.iter().enumerate() {
                    acc[t * sx + jx] += 1;
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; (horizon + 1) * sx],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let m = config.n_blocks as f64;
    let empirical: Vec<Vec<f64>> = counts.chunks(sx).map(|c| c.iter().map(|&k| k as f64 / m).collect()).collect();
    let tv = empirical
        .iter()
        .zip(&traj.meanfields)
        .map(|(e, z)| 0.5 * e.iter().zip(z.probs()).map(|(a, b)| (a - b).abs()).sum::<f64>())
        .collect();
    Ok(EmpiricalPath { empirical, deterministic: traj.meanfields, tv })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

const CHUNK: usize = 4096;

/// Discounted reward-to-go of a focal agent starting in type `x0` at stage
/// `t0` (1-based) and playing `gammas`, with the other members of its block
/// redrawn each stage from the others' law of `z_t` and acting under
/// `gammas`, as in the equilibrium action values.
pub fn monte_carlo_value(
    model: &ValidatedModel,
    gammas: &[Prescription],
    zs: &[MeanField],
    t0: usize,
    x0: usize,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    let horizon = gammas.len();
    if t0 == 0 || t0 > horizon {
        return Err(Error::IndexOutOfRange { what: "t0", index: t0, limit: horizon + 1 });
    }
    if x0 >= model.n_states() {
        return Err(Error::IndexOutOfRange { what: "x0", index: x0, limit: model.n_states() });
    }
    if n_samples == 0 {
        return Err(Error::BadShape("n_samples must be at least 1".into()));
    }
    let sampler = PathSampler::new(model, gammas, zs)?;
    let (nx, na) = (model.n_states(), model.n_actions());
    let sa = model.joint_a().size();
    let ox = model.others_x();
    let oa = model.others_a();
    let others: Vec<Vec<AliasTable>> =
        zs[..horizon].iter().map(|z| (0..nx).map(|x| AliasTable::new(&model.others_law_for(z, x))).collect()).collect();
    let rewards: Vec<Vec<f64>> = zs[..horizon].iter().map(|z| model.reward_table(z)).collect();
    let delta = model.discount();

    let n_chunks = n_samples.div_ceil(CHUNK);
    let sums: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng::stream(seed, &[c as u64]);
            let count = CHUNK.min(n_samples - c * CHUNK);
            let mut acts = vec![0usize; model.n_corr().saturating_sub(1)];
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..count {
                let mut x = x0;
                let mut total = 0.0;
                let mut w = 1.0;
                for t in t0 - 1..horizon {
                    let a = sampler.actions[t][x].sample(&mut r);
                    total += w * rewards[t][x * na + a];
                    w *= delta;
                    if t + 1 == horizon || w == 0.0 {
                        break;
                    }
                    let jo = others[t][x].sample(&mut r);
                    for (ai, &xi) in acts.iter_mut().zip(ox.digits(jo)) {
                        *ai = sampler.actions[t][xi].sample(&mut r);
                    }
                    let ja = oa.encode(&acts) * na + a;
                    let jx = jo * nx + x;
                    x = sampler.kernel[t][jx * sa + ja].sample(&mut r) % nx;
                }
                s1 += total;
                s2 += total * total;
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |(a, b), (c, d)| (a + c, b + d));
    let n = n_samples as f64;
    let mean = s1 / n;
    let var = if n_samples > 1 { ((s2 - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    Ok(McEstimate { mean, std_error: (var / n).sqrt(), samples: n_samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::testing::{identity_spec, uniform_spec};
    use crate::model::validate_model;
    use proptest::prelude::*;

    #[test]
    fn alias_point_mass_and_uniform() {
        let mut r = rng::stream(1, &[]);
        let t = AliasTable::new(&[0.0, 1.0, 0.0]);
        assert!((0..1000).all(|_| t.sample(&mut r) == 1));
        let u = AliasTable::new(&[0.25; 4]);
        let mut counts = [0usize; 4];
        for _ in 0..40_000 {
            counts[u.sample(&mut r)] += 1;
        }
        assert!(counts.iter().all(|&c| (c as f64 - 10_000.0).abs() < 500.0));
    }

    proptest! {
        #[test]
        fn alias_thresholds_reproduce_weights(w in proptest::collection::vec(0.0f64..1.0, 1..12)) {
            prop_assume!(w.iter().sum::<f64>() > 1e-3);
            let t = AliasTable::new(&w);
            let n = w.len();
            // probability mass of outcome i implied by the table, in units of 2^-32 / n
            let mut mass = vec![0u64; n];
            for c in 0..n {
                mass[c] += t.threshold[c];
                mass[t.alias[c] as usize] += ONE - t.threshold[c];
            }
            let total: f64 = w.iter().sum();
            for i in 0..n {
                let want = w[i] / total;
                let got = mass[i] as f64 / (n as f64 * ONE as f64);
                prop_assert!((want - got).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn identity_kernel_blocks_stay_put() {
        let m = validate_model(identity_spec(2, 2, 2, 0.9)).unwrap();
        let g = vec![Prescription::uniform(2, 2); 4];
        let zs = vec![MeanField::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap(); 5];
        let mut r = rng::stream(42, &[]);
        for _ in 0..50 {
            let path = sample_block_trajectory(&m, &g, &zs, &mut r).unwrap();
            assert!(path.joint_x.iter().all(|&j| j == path.joint_x[0]));
        }
    }

    #[test]
    fn same_seed_same_result() {
        let m = validate_model(uniform_spec(2, 2, 2, 0.9)).unwrap();
        let g = vec![Prescription::new(vec![vec![0.3, 0.7], vec![0.5, 0.5]]).unwrap(); 3];
        let cfg = SimConfig { n_blocks: 2000, seed: 7 };
        let a = empirical_meanfield(&m, &g, &MeanField::uniform(4), cfg).unwrap();
        let b = empirical_meanfield(&m, &g, &MeanField::uniform(4), cfg).unwrap();
        assert_eq!(a, b);
        let one = empirical_meanfield(&m, &g, &MeanField::uniform(4), SimConfig { n_blocks: 1, seed: 3 }).unwrap();
        assert!(one.empirical.iter().all(|e| e.iter().filter(|&&p| p == 1.0).count() == 1));
        assert!(one.tv.iter().all(|&t| t <= 1.0));
    }

    #[test]
    fn constant_reward_has_no_variance() {
        let mut spec = uniform_spec(2, 2, 2, 0.5);
        spec.reward.base = vec![vec![2.0; 2]; 2];
        let m = validate_model(spec).unwrap();
        let g = vec![Prescription::uniform(2, 2); 3];
        let zs = vec![MeanField::uniform(4); 4];
        let est = monte_carlo_value(&m, &g, &zs, 1, 0, 1000, 1).unwrap();
        assert!((est.mean - 2.0 * 1.75).abs() < 1e-12);
        assert!(est.std_error < 1e-6);
    }

    #[test]
    fn myopic_last_stage_mean() {
        let m = validate_model(identity_spec(2, 2, 2, 0.0)).unwrap();
        let g = vec![Prescription::pure(&[1, 0], 2); 2];
        let zs = vec![MeanField::uniform(4); 3];
        let est = monte_carlo_value(&m, &g, &zs, 2, 0, 500, 9).unwrap();
        assert_eq!(est.mean, -0.5);
        assert_eq!(est.std_error, 0.0);
    }
}
