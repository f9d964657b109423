//! The Monte Carlo EM outer loop.
//!
//! Each iteration draws `N_t` reward weights from the current mixture, pairs
//! every draw with a random ε-sized subset of the demonstrations and climbs
//! the MaxEnt log-likelihood for `m` steps (first stage). The mixture is then
//! refit on the climbed weights, warm-started from its previous parameters
//! (second stage). The sample size grows geometrically so that `Σ 1/N_t`
//! stays finite. The loop stops once the relative change of the mixture
//! parameters stays below `epsilon_mcem` for three consecutive iterations.

use std::path::Path;
use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::gmm::{self, Gmm, GmmInit};
use crate::maxent::{DemoSummary, MaxEntObjective, WeightVector};
use crate::mdp::TabularMdp;
use crate::objectworld::{DemoSet, FeatureMatrix};
use crate::util::mix_seed;
use crate::{Error, Result, Scalar};

/// Consecutive sub-threshold changes required before stopping.
pub const STREAK: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McemConfig<F> {
    /// Fraction ε of demonstrations in every trajectory element set.
    pub epsilon_rep: F,
    pub n0: usize,
    /// Sample-size multiplier; must exceed 1.
    pub growth: F,
    /// Ascent steps per learning task.
    pub m: usize,
    pub lr: F,
    pub k: usize,
    pub delta_mcem: F,
    pub epsilon_mcem: F,
    pub max_outer_iters: usize,
    pub gmm_max_iter: usize,
    pub gmm_tol: F,
    pub seed: u64,
}

impl<F: Scalar> Default for McemConfig<F> {
    fn default() -> Self {
        Self {
            epsilon_rep: F::lit(0.95),
            n0: 10,
            growth: F::lit(2.0),
            m: 20,
            lr: F::lit(0.01),
            k: gmm::DEFAULT_COMPONENTS,
            delta_mcem: F::lit(1e-3),
            epsilon_mcem: F::lit(5e-2),
            max_outer_iters: 15,
            gmm_max_iter: gmm::DEFAULT_MAX_ITER,
            gmm_tol: F::lit(1e-6),
            seed: 0,
        }
    }
}

impl<F: Scalar> McemConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_rep > F::zero() && self.epsilon_rep <= F::one()) {
            return Err(Error::config(format!(
                "epsilon_rep {} outside (0, 1]",
                self.epsilon_rep
            )));
        }
        if self.k == 0 {
            return Err(Error::config("K must be positive"));
        }
        if self.n0 < self.k {
            return Err(Error::config(format!(
                "n0 = {} is smaller than K = {}",
                self.n0, self.k
            )));
        }
        if !(self.growth > F::one()) || !self.growth.is_finite() {
            return Err(Error::config(format!(
                "growth {} must exceed 1 so that Σ 1/N_t converges",
                self.growth
            )));
        }
        if !(self.lr >= F::zero()) {
            return Err(Error::config("learning rate must be non-negative"));
        }
        if !(self.delta_mcem > F::zero()) || !(self.epsilon_mcem > F::zero()) {
            return Err(Error::config("termination constants must be positive"));
        }
        if self.max_outer_iters == 0 {
            return Err(Error::config("max_outer_iters must be positive"));
        }
        Ok(())
    }

    /// `N_{t+1} = ⌈growth · N_t⌉`, never smaller than `N_t + 1`.
    pub fn next_sample_size(&self, n_t: usize) -> usize {
        let grown = (F::from_usize_lossy(n_t) * self.growth)
            .ceil()
            .to_usize()
            .unwrap_or(usize::MAX);
        grown.max(n_t + 1)
    }
}

/// Profile parameter `(Θ₁, Θ₂)` plus loop bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McemState<F> {
    /// m-step weights from the latest first stage.
    pub theta1: Vec<WeightVector<F>>,
    pub theta2: Gmm<F>,
    /// Completed iterations.
    pub t: usize,
    /// Sample size of the next iteration.
    pub n_t: usize,
    pub termination_history: Vec<F>,
}

impl<F: Scalar> McemState<F> {
    /// Random `Θ⁰`: component means uniform in `[-1, 1]^d`, unit variances,
    /// uniform mixing.
    pub fn initial(d: usize, config: &McemConfig<F>) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 0x1417));
        let means = (0..config.k)
            .map(|_| WeightVector::<F>::random_uniform(d, &mut rng).0)
            .collect();
        let w = F::one() / F::from_usize_lossy(config.k);
        let theta2 = Gmm::new(vec![w; config.k], means, vec![vec![F::one(); d]; config.k])?;
        Ok(Self {
            theta1: Vec::new(),
            theta2,
            t: 0,
            n_t: config.n0,
            termination_history: Vec::new(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Indices of one trajectory element set `𝒪 ⊂ ζ^E`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrajectoryElementSet {
    pub indices: Vec<usize>,
}

/// `⌈ε · n⌉`, tolerant of ε values such as 0.95 that are not exact in binary.
pub fn subset_size<F: Scalar>(n: usize, epsilon: F) -> usize {
    let raw = epsilon.to_f64_lossy() * n as f64;
    ((raw - 1e-9).ceil().max(1.0) as usize).min(n)
}

pub fn sample_trajectory_set_with<F: Scalar, R: Rng + ?Sized>(
    n_demos: usize,
    epsilon: F,
    rng: &mut R,
) -> Result<TrajectoryElementSet> {
    if !(epsilon > F::zero() && epsilon <= F::one()) {
        return Err(Error::config(format!(
            "epsilon_rep {epsilon} outside (0, 1]"
        )));
    }
    if n_demos == 0 {
        return Err(Error::config("no demonstrations"));
    }
    let mut indices = index::sample(rng, n_demos, subset_size(n_demos, epsilon)).into_vec();
    indices.sort_unstable();
    Ok(TrajectoryElementSet { indices })
}

/// A uniformly drawn subset of exactly `⌈ε·|ζ^E|⌉` demonstrations.
pub fn sample_trajectory_set<F: Scalar>(
    demos: &DemoSet,
    epsilon: F,
    seed: u64,
) -> Result<TrajectoryElementSet> {
    sample_trajectory_set_with(demos.len(), epsilon, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `max_i |θ_i − θ'_i| / (|θ_i| + δ)` over the canonically ordered, flattened parameters.
pub fn relative_change<F: Scalar>(previous: &Gmm<F>, current: &Gmm<F>, delta: F) -> F {
    let a = previous.canonical().flatten();
    let b = current.canonical().flatten();
    if a.len() != b.len() {
        return F::infinity();
    }
    a.iter()
        .zip(&b)
        .map(|(&old, &new)| (new - old).abs() / (new.abs() + delta))
        .fold(F::zero(), F::max)
}

/// True iff the last [`STREAK`] relative changes are all below `epsilon`.
pub fn termination_check<F: Scalar>(history: &[F], epsilon: F) -> bool {
    history.len() >= STREAK
        && history[history.len() - STREAK..]
            .iter()
            .all(|&c| c < epsilon)
}

/// One row of the iteration log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord<F> {
    /// 1-based iteration number.
    pub t: usize,
    pub n_t: usize,
    pub theta2_rel_change: F,
    pub mean_ll_gain: F,
    pub seconds: f64,
}

/// Iteration log without wall-clock columns, so equal runs give equal bytes.
pub fn iteration_log_csv<F: Scalar>(log: &[IterationRecord<F>]) -> String {
    let mut out = String::from("t,N_t,theta2_rel_change,mean_ll_gain\n");
    for r in log {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.t, r.n_t, r.theta2_rel_change, r.mean_ll_gain
        ));
    }
    out
}

pub fn iteration_timing_csv<F: Scalar>(log: &[IterationRecord<F>]) -> String {
    let mut out = String::from("t,N_t,seconds\n");
    for r in log {
        out.push_str(&format!("{},{},{:.6}\n", r.t, r.n_t, r.seconds));
    }
    out
}

/// Per-task RNG keyed by `(seed, t, i)`, independent of scheduling.
pub fn task_rng(seed: u64, t: usize, i: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, t as u64));
    rng.set_stream(i as u64);
    rng
}

/// Result of one learning task of the first stage.
#[derive(Debug, Clone)]
pub struct TaskOutcome<F> {
    pub weights: WeightVector<F>,
    pub ll_gain: F,
}

/// Draw a weight from `Θ₂`, draw `𝒪`, climb `m` steps.
pub fn run_task<F: Scalar>(
    theta2: &Gmm<F>,
    demos: &DemoSet,
    features: &FeatureMatrix<F>,
    mdp: &TabularMdp<F>,
    config: &McemConfig<F>,
    t: usize,
    i: usize,
) -> Result<TaskOutcome<F>> {
    let mut rng = task_rng(config.seed, t, i);
    let w0 = theta2.sample_one(&mut rng);
    let subset = sample_trajectory_set_with(demos.len(), config.epsilon_rep, &mut rng)?;
    let summary = DemoSummary::from_indices(demos, subset.indices.iter().copied(), features)?;
    let trace = MaxEntObjective::new(mdp, features, summary)?.ascend(&w0, config.m, config.lr)?;
    Ok(TaskOutcome {
        ll_gain: trace.gain(),
        weights: trace.final_weights,
    })
}

/// First stage over tasks `0..n`, returned in task order.
pub fn first_stage<F: Scalar>(
    state: &McemState<F>,
    demos: &DemoSet,
    features: &FeatureMatrix<F>,
    mdp: &TabularMdp<F>,
    config: &McemConfig<F>,
) -> Result<Vec<TaskOutcome<F>>> {
    (0..state.n_t)
        .into_par_iter()
        .map(|i| run_task(&state.theta2, demos, features, mdp, config, state.t, i))
        .collect()
}

/// Second stage: EM on the m-step weights, warm-started at the current `Θ₂`.
pub fn second_stage<F: Scalar>(
    theta1: &[WeightVector<F>],
    theta2: &Gmm<F>,
    config: &McemConfig<F>,
    t: usize,
) -> Result<gmm::FitReport<F>> {
    gmm::fit(
        theta1,
        config.k,
        GmmInit::Warm {
            gmm: theta2.clone(),
            seed: mix_seed(config.seed, 0x6d6d_0000 + t as u64),
        },
        config.gmm_max_iter,
        config.gmm_tol,
    )
}

/// One full MCEM iteration.
pub fn mcem_iteration<F: Scalar>(
    state: &McemState<F>,
    demos: &DemoSet,
    features: &FeatureMatrix<F>,
    mdp: &TabularMdp<F>,
    config: &McemConfig<F>,
) -> Result<(McemState<F>, IterationRecord<F>)> {
    let started = Instant::now();
    let wrap = |e: Error| Error::Iteration {
        iteration: state.t + 1,
        source: Box::new(e),
    };
    let outcomes = first_stage(state, demos, features, mdp, config).map_err(wrap)?;
    let mean_ll_gain = if outcomes.is_empty() {
        F::zero()
    } else {
        outcomes.iter().map(|o| o.ll_gain).sum::<F>() / F::from_usize_lossy(outcomes.len())
    };
    let theta1: Vec<WeightVector<F>> = outcomes.into_iter().map(|o| o.weights).collect();
    let fit = second_stage(&theta1, &state.theta2, config, state.t).map_err(wrap)?;
    let change = relative_change(&state.theta2, &fit.gmm, config.delta_mcem);
    let mut termination_history = state.termination_history.clone();
    termination_history.push(change);
    let record = IterationRecord {
        t: state.t + 1,
        n_t: state.n_t,
        theta2_rel_change: change,
        mean_ll_gain,
        seconds: started.elapsed().as_secs_f64(),
    };
    log::info!(
        "MCEM iteration {}: N_t = {}, change = {:e}, mean ll gain = {}",
        record.t,
        record.n_t,
        change,
        mean_ll_gain
    );
    let next = McemState {
        theta1,
        theta2: fit.gmm,
        t: state.t + 1,
        n_t: config.next_sample_size(state.n_t),
        termination_history,
    };
    Ok((next, record))
}

#[derive(Debug, Clone)]
pub struct McemOutcome<F> {
    /// `Θ*`: the mixture at termination.
    pub theta: Gmm<F>,
    pub log: Vec<IterationRecord<F>>,
    /// False when `max_outer_iters` ran out first.
    pub converged: bool,
    pub state: McemState<F>,
}

/// Generic driver: repeats `step` until [`termination_check`] passes or the
/// iteration budget is exhausted. `on_iteration` sees every new state.
pub fn drive<F, S, C>(
    mut state: McemState<F>,
    config: &McemConfig<F>,
    mut step: S,
    mut on_iteration: C,
) -> Result<McemOutcome<F>>
where
    F: Scalar,
    S: FnMut(&McemState<F>) -> Result<(McemState<F>, IterationRecord<F>)>,
    C: FnMut(&McemState<F>) -> Result<()>,
{
    let mut log = Vec::new();
    let mut converged = termination_check(&state.termination_history, config.epsilon_mcem);
    while !converged && state.t < config.max_outer_iters {
        let (next, record) = step(&state)?;
        state = next;
        log.push(record);
        on_iteration(&state)?;
        converged = termination_check(&state.termination_history, config.epsilon_mcem);
    }
    if !converged {
        log::warn!(
            "MCEM stopped after {} iterations without meeting the stopping rule",
            state.t
        );
    }
    Ok(McemOutcome {
        theta: state.theta2.clone(),
        log,
        converged,
        state,
    })
}

/// Continues from `state`, optionally writing a checkpoint after every iteration.
pub fn run_from<F: Scalar>(
    state: McemState<F>,
    demos: &DemoSet,
    features: &FeatureMatrix<F>,
    mdp: &TabularMdp<F>,
    config: &McemConfig<F>,
    checkpoint: Option<&Path>,
) -> Result<McemOutcome<F>> {
    config.validate()?;
    if state.theta2.dim() != features.n_cols() {
        return Err(Error::Shape {
            what: "mixture dimension",
            expected: features.n_cols(),
            got: state.theta2.dim(),
        });
    }
    drive(
        state,
        config,
        |s| mcem_iteration(s, demos, features, mdp, config),
        |s| match checkpoint {
            Some(path) => s.save(path),
            None => Ok(()),
        },
    )
}

/// Full run from a random `Θ⁰`.
pub fn run<F: Scalar>(
    demos: &DemoSet,
    features: &FeatureMatrix<F>,
    mdp: &TabularMdp<F>,
    config: &McemConfig<F>,
) -> Result<McemOutcome<F>> {
    let state = McemState::initial(features.n_cols(), config)?;
    run_from(state, demos, features, mdp, config, None)
}
