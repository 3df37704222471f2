//! Particle sets and the two resampling strategies.
//!
//! Both strategies are elitist: slot 0 of the new set is an unperturbed copy
//! of the lowest-cost particle of the previous set.
//!
//! * DRS ranks particles by cost, perturbs the best `⌊e·N⌋` of them and
//!   refills the rest of the set from the neighbourhood of the best one.
//! * SRS turns costs into Gaussian likelihoods, normalizes them, and picks
//!   ancestors with one stratified uniform draw per slot.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matching::Cost;
use crate::rng::stream;

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// A posture hypothesis for one hierarchy stage.
#[derive(Debug, Clone, PartialEq)]
pub struct Particle {
    pub params: Vec<f64>,
    /// `None` until evaluated against an observation.
    pub cost: Option<Cost>,
    /// Unnormalized probability p (SRS only).
    pub prob: f64,
    /// Normalized probability ω (SRS only).
    pub weight: f64,
}

impl Particle {
    pub fn new(params: Vec<f64>) -> Self {
        Particle {
            params,
            cost: None,
            prob: 0.0,
            weight: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    /// Estimation cycle k; 0 after initialization.
    pub cycle: u64,
    /// Root of this set's random streams.
    pub seed: u64,
    /// Cumulative weights L_i, filled by [`normalize_and_accumulate`].
    pub cumulative: Vec<f64>,
    /// Index in the previous set each particle descends from (identity after initialization).
    pub ancestors: Vec<usize>,
}

/// Diagonal Gaussian perturbation with per-DOF clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub sigma: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Perturbation {
    pub fn unbounded(sigma: Vec<f64>) -> Self {
        let n = sigma.len();
        Perturbation {
            sigma,
            lo: vec![f64::NEG_INFINITY; n],
            hi: vec![f64::INFINITY; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.sigma.len()
    }

    /// `params + N(0, σ²)`, with samples past a limit clamped onto it.
    pub fn apply(&self, params: &[f64], rng: &mut ChaCha8Rng) -> Vec<f64> {
        params
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let z: f64 = rng.sample(StandardNormal);
                (v + self.sigma[i] * z).clamp(self.lo[i], self.hi[i])
            })
            .collect()
    }
}

impl ParticleSet {
    /// N particles around `reference`: slot 0 is the reference itself, the
    /// others are `reference + N(0, σ²)`. Cycle index 0.
    pub fn around(reference: &[f64], n: usize, noise: &Perturbation, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter {
                name: "N",
                value: 0.0,
            });
        }
        if reference.len() != noise.dim() {
            return Err(Error::LengthMismatch {
                expected: noise.dim(),
                actual: reference.len(),
            });
        }
        let particles = (0..n)
            .map(|slot| {
                if slot == 0 {
                    Particle::new(reference.to_vec())
                } else {
                    Particle::new(noise.apply(reference, &mut slot_stream(seed, 0, slot)))
                }
            })
            .collect();
        Ok(ParticleSet {
            particles,
            cycle: 0,
            seed,
            cumulative: Vec::new(),
            ancestors: (0..n).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    fn costs(&self) -> Result<Vec<Cost>> {
        self.particles
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.cost.ok_or(Error::InvalidParameter {
                    name: "unevaluated particle",
                    value: i as f64,
                })
            })
            .collect()
    }

    /// Index of the lowest-cost particle; ties go to the lowest index.
    pub fn best_index(&self) -> Result<usize> {
        let costs = self.costs()?;
        Ok(costs
            .iter()
            .enumerate()
            .min_by_key(|(i, c)| (**c, *i))
            .map(|(i, _)| i)
            .expect("particle sets are never empty"))
    }

    pub fn best(&self) -> Result<&Particle> {
        Ok(&self.particles[self.best_index()?])
    }

    /// Indices sorted by ascending cost, ties broken by index.
    pub fn ranking(&self) -> Result<Vec<usize>> {
        let costs = self.costs()?;
        let mut order: Vec<usize> = (0..costs.len()).collect();
        order.sort_by_key(|&i| (costs[i], i));
        Ok(order)
    }
}

pub(crate) fn slot_stream(seed: u64, cycle: u64, slot: usize) -> ChaCha8Rng {
    stream(seed, &[cycle, slot as u64])
}

/// Gaussian likelihood exp(−W² / (2σ_γ²)).
pub fn particle_probability(cost: Cost, sigma_gamma: f64) -> Result<f64> {
    if !(sigma_gamma > 0.0 && sigma_gamma.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "sigma_gamma",
            value: sigma_gamma,
        });
    }
    let w = cost.0 as f64;
    Ok((-(w * w) / (2.0 * sigma_gamma * sigma_gamma)).exp())
}

/// Sets `prob` of every particle from its cost.
pub fn assign_probabilities(set: &mut ParticleSet, sigma_gamma: f64) -> Result<()> {
    let costs = set.costs()?;
    for (p, c) in set.particles.iter_mut().zip(costs) {
        p.prob = particle_probability(c, sigma_gamma)?;
    }
    Ok(())
}

/// ω_i = p_i / Σp and L_i = ω_1 + … + ω_i. Fails with
/// [`Error::DegenerateWeights`] when every probability is zero; the caller
/// then falls back to [`uniform_weights`].
pub fn normalize_and_accumulate(set: &mut ParticleSet) -> Result<()> {
    let total: f64 = set.particles.iter().map(|p| p.prob).sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::DegenerateWeights);
    }
    let mut acc = 0.0;
    set.cumulative.clear();
    for p in &mut set.particles {
        p.weight = p.prob / total;
        acc += p.weight;
        set.cumulative.push(acc);
    }
    Ok(())
}

/// ω_i = 1/N for every particle.
pub fn uniform_weights(set: &mut ParticleSet) {
    let n = set.len() as f64;
    let mut acc = 0.0;
    set.cumulative.clear();
    for p in &mut set.particles {
        p.weight = 1.0 / n;
        acc += p.weight;
        set.cumulative.push(acc);
    }
}

/// Stratified ancestor selection for `slots` draws: draw `s` uses
/// r = (u + s) / slots with u ~ U[0, 1), and picks the first index whose
/// cumulative weight reaches r. `uniforms` supplies u for each draw.
pub fn stratified_ancestors(cumulative: &[f64], uniforms: &[f64]) -> Vec<usize> {
    let slots = uniforms.len() as f64;
    let last = cumulative.len() - 1;
    uniforms
        .iter()
        .enumerate()
        .map(|(s, &u)| {
            let r = (u + s as f64) / slots;
            cumulative.partition_point(|&l| l < r).min(last)
        })
        .collect()
}

/// Stratified resampling. Slot 0 keeps the previous best; slots 1..N draw
/// their ancestors with N−1 equal strata over the cumulative weights and
/// perturb them. New particles other than slot 0 are unevaluated.
pub fn srs_step(set: &ParticleSet, noise: &Perturbation) -> Result<ParticleSet> {
    let n = set.len();
    let total = set.cumulative.last().copied().unwrap_or(0.0);
    if set.cumulative.len() != n || !((total - 1.0).abs() <= WEIGHT_TOLERANCE) {
        return Err(Error::UnnormalizedWeights(total));
    }
    let best = set.best_index()?;
    let cycle = set.cycle + 1;

    let mut streams: Vec<ChaCha8Rng> = (1..n).map(|slot| slot_stream(set.seed, cycle, slot)).collect();
    let uniforms: Vec<f64> = streams.iter_mut().map(|r| r.random::<f64>()).collect();
    let mut ancestors = vec![best];
    ancestors.extend(stratified_ancestors(&set.cumulative, &uniforms));

    let mut particles = Vec::with_capacity(n);
    particles.push(elite(&set.particles[best]));
    for (rng, &a) in streams.iter_mut().zip(&ancestors[1..]) {
        particles.push(Particle::new(noise.apply(&set.particles[a].params, rng)));
    }
    Ok(ParticleSet {
        particles,
        cycle,
        seed: set.seed,
        cumulative: Vec::new(),
        ancestors,
    })
}

/// Number of DRS survivors ⌊e·N⌋; `e·N` products within 1e-9 of an integer
/// round to it.
pub fn drs_survivors(n: usize, e: f64) -> Result<usize> {
    if !(e > 0.0 && e <= 1.0) {
        return Err(Error::InvalidParameter { name: "e", value: e });
    }
    let s = (e * n as f64 + 1e-9).floor() as usize;
    if s == 0 {
        return Err(Error::InvalidParameter {
            name: "e*N",
            value: e * n as f64,
        });
    }
    Ok(s.min(n))
}

/// Sizes of the DRS slot groups: (elite copy, perturbed survivors, redrawn near the best).
pub fn drs_partition(n: usize, e: f64) -> Result<(usize, usize, usize)> {
    let s = drs_survivors(n, e)?;
    Ok((1, s - 1, n - s))
}

/// Deterministic resampling with survival rate `e`.
pub fn drs_step(set: &ParticleSet, e: f64, noise: &Perturbation) -> Result<ParticleSet> {
    let n = set.len();
    let survivors = drs_survivors(n, e)?;
    let ranked = set.ranking()?;
    let cycle = set.cycle + 1;

    let mut particles = Vec::with_capacity(n);
    let mut ancestors = Vec::with_capacity(n);
    particles.push(elite(&set.particles[ranked[0]]));
    ancestors.push(ranked[0]);
    for slot in 1..n {
        let a = if slot < survivors { ranked[slot] } else { ranked[0] };
        let mut rng = slot_stream(set.seed, cycle, slot);
        particles.push(Particle::new(noise.apply(&set.particles[a].params, &mut rng)));
        ancestors.push(a);
    }
    Ok(ParticleSet {
        particles,
        cycle,
        seed: set.seed,
        cumulative: Vec::new(),
        ancestors,
    })
}

/// Unperturbed copy that keeps its cost.
fn elite(p: &Particle) -> Particle {
    Particle {
        params: p.params.clone(),
        cost: p.cost,
        prob: 0.0,
        weight: 0.0,
    }
}
