//! Seeded building blocks shared by the commands: instance construction,
//! demonstration sampling, training and scoring.

use std::time::Instant;

use sirl_core::gmm::Gmm;
use sirl_core::maxent::{self, WeightVector};
use sirl_core::mcem::{self, IterationRecord};
use sirl_core::mdp::{self, DpOptions, Policy, TabularMdp, ValueFunction};
use sirl_core::objectworld::{self, DemoSet, FeatureMatrix, ObjectworldInstance};

use crate::config::{ExperimentConfig, FeatureVariant, Method};
use crate::{seeds, CliError, CliResult};

/// An instance together with everything derived from its true reward.
pub struct World {
    pub instance: ObjectworldInstance<f64>,
    pub mdp: TabularMdp<f64>,
    pub features: FeatureMatrix<f64>,
    pub optimal: Policy<f64>,
    pub optimal_value: ValueFunction<f64>,
}

impl World {
    pub fn from_instance(
        instance: ObjectworldInstance<f64>,
        variant: FeatureVariant,
    ) -> CliResult<Self> {
        let mdp = instance.mdp();
        let features = match variant {
            FeatureVariant::Continuous => instance.features_continuous(),
            FeatureVariant::Discrete => instance.features_discrete(),
        };
        let (optimal_value, optimal) = mdp::value_iteration_with(&mdp, &DpOptions::default())
            .map_err(CliError::core("optimal policy"))?;
        Ok(Self {
            instance,
            mdp,
            features,
            optimal,
            optimal_value,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.instance.grid_size
    }

    pub fn evd(&self, w: &WeightVector<f64>) -> CliResult<f64> {
        maxent::weights_evd(
            w,
            &self.features,
            &self.mdp,
            &self.optimal,
            &DpOptions::default(),
        )
        .map_err(CliError::core("EVD"))
    }

    /// Reward of `w` and the optimal value under that reward.
    pub fn recovered_maps(&self, w: &WeightVector<f64>) -> CliResult<(Vec<f64>, Vec<f64>)> {
        let reward =
            maxent::reward_from_weights(w, &self.features).map_err(CliError::core("reward"))?;
        let task = self
            .mdp
            .with_reward(reward.clone())
            .map_err(CliError::core("reward"))?;
        let (v, _) = mdp::value_iteration_with(&task, &DpOptions::default())
            .map_err(CliError::core("value"))?;
        Ok((reward, v.0))
    }
}

/// The instance of a master seed.
pub fn build_world(config: &ExperimentConfig, master: u64) -> CliResult<World> {
    let instance = objectworld::generate(
        &config.environment.params(),
        seeds::derive(master, seeds::WORLD),
    )
    .map_err(CliError::core("instance"))?;
    World::from_instance(instance, config.features.variant)
}

pub fn demo_seed(config: &ExperimentConfig, master: u64) -> u64 {
    config
        .demos
        .seed
        .unwrap_or_else(|| seeds::derive(master, seeds::DEMOS))
}

/// Expert rollouts of the optimal policy from uniformly drawn start cells.
/// Equal seeds give nested sets: the first `n` demos do not depend on how many follow.
pub fn sample_demos(world: &World, n_demos: usize, length: usize, seed: u64) -> CliResult<DemoSet> {
    let mut rng = sirl_core::mcem::task_rng(seed, 0, 0);
    objectworld::rollout_demos(&world.mdp, &world.optimal, n_demos, length, &mut rng)
        .map_err(CliError::core("demonstrations"))
}

pub struct Trained {
    pub method: Method,
    /// The weight vector whose greedy policy is scored: the MaxEnt estimate,
    /// or the mixture mean `Σ α_k μ_k` for SIRL.
    pub weights: WeightVector<f64>,
    pub evd: f64,
    pub converged: bool,
    pub seconds: f64,
    pub gmm: Option<Gmm<f64>>,
    pub log: Vec<IterationRecord<f64>>,
}

/// Seeds for one training run, derived from the master seed and a replication index.
#[derive(Debug, Clone, Copy)]
pub struct RunSeeds {
    pub maxent: u64,
    pub mcem: u64,
}

impl RunSeeds {
    pub fn new(master: u64, replication: usize) -> Self {
        Self {
            maxent: seeds::replica(seeds::derive(master, seeds::MAXENT), replication),
            mcem: seeds::replica(seeds::derive(master, seeds::MCEM), replication),
        }
    }
}

pub fn train(
    world: &World,
    demos: &DemoSet,
    method: Method,
    config: &ExperimentConfig,
    run_seeds: RunSeeds,
) -> CliResult<Trained> {
    let started = Instant::now();
    let (weights, converged, gmm, log) = match method {
        Method::Maxent => {
            let w = maxent::maxent_baseline(
                demos,
                &world.features,
                &world.mdp,
                config.methods.maxent_epochs,
                config.methods.maxent_lr,
                run_seeds.maxent,
            )
            .map_err(CliError::core("maxent"))?;
            (w, true, None, Vec::new())
        }
        Method::Sirl => {
            let mcem_config = config.mcem_config(run_seeds.mcem);
            let out = mcem::run(demos, &world.features, &world.mdp, &mcem_config)
                .map_err(CliError::core("sirl"))?;
            let w = WeightVector(out.theta.mean());
            (w, out.converged, Some(out.theta), out.log)
        }
    };
    let evd = world.evd(&weights)?;
    Ok(Trained {
        method,
        weights,
        evd,
        converged,
        seconds: started.elapsed().as_secs_f64(),
        gmm,
        log,
    })
}

/// Mean EVD of `draws` weight vectors drawn uniformly from `[-1, 1]^d`.
pub fn random_baseline(world: &World, draws: usize, seed: u64) -> CliResult<f64> {
    let mut rng = sirl_core::mcem::task_rng(seed, 0, 0);
    let mut total = 0.0;
    for _ in 0..draws {
        let w = WeightVector::random_uniform(world.features.n_cols(), &mut rng);
        total += world.evd(&w)?;
    }
    Ok(total / draws as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.environment.grid_size = 5;
        c.environment.n_objects = 6;
        c.mcem.max_outer_iters = 2;
        c.mcem.n0 = 4;
        c
    }

    #[test]
    fn worlds_are_reproducible() {
        let c = small();
        let a = build_world(&c, 3).unwrap();
        let b = build_world(&c, 3).unwrap();
        assert_eq!(a.instance, b.instance);
        assert_ne!(build_world(&c, 4).unwrap().instance, a.instance);
        assert_eq!(a.features.n_cols(), 2 * 2 * 5);
    }

    #[test]
    fn demo_sets_are_nested() {
        let c = small();
        let world = build_world(&c, 1).unwrap();
        let few = sample_demos(&world, 5, 4, 11).unwrap();
        let many = sample_demos(&world, 12, 4, 11).unwrap();
        assert_eq!(few.trajectories[..], many.trajectories[..5]);
    }

    #[test]
    fn optimal_weights_score_zero() {
        let c = small();
        let world = build_world(&c, 2).unwrap();
        assert!(
            world
                .evd(&WeightVector::zeros(world.features.n_cols()))
                .unwrap()
                >= 0.0
        );
        let rnd = random_baseline(&world, 4, 0).unwrap();
        assert!(rnd.is_finite() && rnd >= 0.0);
    }

    #[test]
    fn both_methods_train() {
        let c = small();
        let world = build_world(&c, 5).unwrap();
        let demos = sample_demos(&world, 8, 3, 1).unwrap();
        for m in [Method::Maxent, Method::Sirl] {
            let t = train(&world, &demos, m, &c, RunSeeds::new(5, 0)).unwrap();
            assert!(t.evd.is_finite() && t.evd >= 0.0);
            assert_eq!(t.gmm.is_some(), m == Method::Sirl);
            assert_eq!(t.log.len(), if m == Method::Sirl { 2 } else { 0 });
        }
    }
}
