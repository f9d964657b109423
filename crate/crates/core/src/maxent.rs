//! Maximum-entropy IRL with linear rewards `r = Φ·w`.
//!
//! The demonstration log-likelihood is the MaxEnt trajectory likelihood with
//! a soft (log-partition) normaliser computed by an undiscounted backward pass
//! over the demonstration length `L`:
//!
//! ```text
//! ℓ(w) = Σ_ζ [ Σ_t r_w(s_t) − V_0(s_0^ζ) ]
//! ∇ℓ(w) = Σ_ζ Σ_t φ(s_t) − Φᵀ·D
//! ```
//!
//! where `D` is the expected state visitation of the time-indexed soft policy
//! started from the empirical start-state counts. `ℓ` is concave in `w` and
//! `∇ℓ` is its exact gradient. For deterministic dynamics `ℓ` coincides with
//! `Σ log π_t(a_t|s_t)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mdp::{self, DpOptions, Policy, PolicySchedule, TabularMdp};
use crate::objectworld::{DemoSet, FeatureMatrix};
use crate::util::rng_from;
use crate::{Error, Result, Scalar};

/// Linear reward coefficients, one per feature column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector<F>(pub Vec<F>);

impl<F: Scalar> WeightVector<F> {
    pub fn zeros(d: usize) -> Self {
        Self(vec![F::zero(); d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[F] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }

    /// Uniform draw from `[-1, 1]^d`.
    pub fn random_uniform<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Self {
        Self(
            (0..d)
                .map(|_| F::lit(rng.random_range(-1.0..=1.0)))
                .collect(),
        )
    }

    /// Single-line CSV.
    pub fn to_csv(&self) -> String {
        let mut s = crate::util::fmt_list(&self.0);
        s.push('\n');
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let line = text
            .lines()
            .find(|l| !l.trim().is_empty())
            .ok_or_else(|| Error::parse(1, "empty weight file"))?;
        Ok(Self(crate::util::parse_list(line, 1)?))
    }
}

impl<F> From<Vec<F>> for WeightVector<F> {
    fn from(v: Vec<F>) -> Self {
        Self(v)
    }
}

pub fn reward_from_weights<F: Scalar>(
    w: &WeightVector<F>,
    features: &FeatureMatrix<F>,
) -> Result<Vec<F>> {
    if w.dim() != features.n_cols() {
        return Err(Error::Shape {
            what: "weight vector",
            expected: features.n_cols(),
            got: w.dim(),
        });
    }
    Ok((0..features.n_rows())
        .map(|s| features.row(s).iter().zip(&w.0).map(|(&f, &x)| f * x).sum())
        .collect())
}

/// Expected state visitation over `horizon` steps: `D = Σ_t D_t`, with `D_0`
/// the normalised start counts and `D_{t+1}[s'] = Σ_{s,a} D_t[s] π_t(a|s) T[s][a][s']`.
pub fn expected_svf<F: Scalar, P: PolicySchedule<F> + ?Sized>(
    mdp: &TabularMdp<F>,
    policy: &P,
    start_counts: &[F],
    horizon: usize,
) -> Result<Vec<F>> {
    let n = mdp.n_states();
    if start_counts.len() != n {
        return Err(Error::Shape {
            what: "start counts",
            expected: n,
            got: start_counts.len(),
        });
    }
    let total: F = start_counts.iter().copied().sum();
    if !(total > F::zero()) {
        return Err(Error::config("start counts must have positive mass"));
    }
    let mut cur: Vec<F> = start_counts.iter().map(|&c| c / total).collect();
    let mut visits = vec![F::zero(); n];
    let mut next = vec![F::zero(); n];
    for t in 0..horizon {
        for (v, &c) in visits.iter_mut().zip(&cur) {
            *v += c;
        }
        if t + 1 == horizon {
            break;
        }
        next.iter_mut().for_each(|x| *x = F::zero());
        for (s, &mass) in cur.iter().enumerate() {
            if mass == F::zero() {
                continue;
            }
            for (a, &pa) in policy.action_probs(t, s).iter().enumerate() {
                let flow = mass * pa;
                if flow == F::zero() {
                    continue;
                }
                for &(s2, p) in mdp.successors(s, a) {
                    next[s2] += flow * p;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Ok(visits)
}

/// Sufficient statistics of a demonstration set for the MaxEnt objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DemoSummary<F> {
    /// `Σ_ζ Σ_t φ(s_t)`.
    pub feature_counts: Vec<F>,
    /// Number of demonstrations starting in each state.
    pub start_counts: Vec<F>,
    pub n_trajectories: usize,
    pub horizon: usize,
}

impl<F: Scalar> DemoSummary<F> {
    pub fn from_demos(demos: &DemoSet, features: &FeatureMatrix<F>) -> Result<Self> {
        Self::from_indices(demos, 0..demos.len(), features)
    }

    pub fn from_indices(
        demos: &DemoSet,
        indices: impl IntoIterator<Item = usize>,
        features: &FeatureMatrix<F>,
    ) -> Result<Self> {
        let mut feature_counts = vec![F::zero(); features.n_cols()];
        let mut start_counts = vec![F::zero(); features.n_rows()];
        let mut n_trajectories = 0;
        for i in indices {
            let traj = &demos.trajectories[i];
            for &(s, _) in traj {
                if s >= features.n_rows() {
                    return Err(Error::Shape {
                        what: "demonstration state",
                        expected: features.n_rows(),
                        got: s,
                    });
                }
                for (acc, &f) in feature_counts.iter_mut().zip(features.row(s)) {
                    *acc += f;
                }
            }
            start_counts[traj[0].0] += F::one();
            n_trajectories += 1;
        }
        if n_trajectories == 0 {
            return Err(Error::config("empty demonstration set"));
        }
        Ok(Self {
            feature_counts,
            start_counts,
            n_trajectories,
            horizon: demos.trajectory_length,
        })
    }
}

/// Per-step record of an m-step ascent.
#[derive(Debug, Clone, PartialEq)]
pub struct AscentTrace<F> {
    pub initial: WeightVector<F>,
    pub final_weights: WeightVector<F>,
    pub initial_log_likelihood: F,
    /// Log-likelihood after each of the `m` steps.
    pub log_likelihoods: Vec<F>,
}

impl<F: Scalar> AscentTrace<F> {
    pub fn steps(&self) -> usize {
        self.log_likelihoods.len()
    }

    /// `ℓ(final) − ℓ(initial)`.
    pub fn gain(&self) -> F {
        self.log_likelihoods
            .last()
            .map_or(F::zero(), |&l| l - self.initial_log_likelihood)
    }

    /// Two-column CSV: step, log-likelihood (step 0 is the starting point).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,log_likelihood\n");
        out.push_str(&format!("0,{}\n", self.initial_log_likelihood));
        for (i, ll) in self.log_likelihoods.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, ll));
        }
        out
    }
}

/// MaxEnt objective for one learning task: fixed dynamics, features and demonstrations.
#[derive(Debug, Clone)]
pub struct MaxEntObjective<'a, F> {
    mdp: &'a TabularMdp<F>,
    features: &'a FeatureMatrix<F>,
    summary: DemoSummary<F>,
}

impl<'a, F: Scalar> MaxEntObjective<'a, F> {
    pub fn new(
        mdp: &'a TabularMdp<F>,
        features: &'a FeatureMatrix<F>,
        summary: DemoSummary<F>,
    ) -> Result<Self> {
        if features.n_rows() != mdp.n_states() {
            return Err(Error::Shape {
                what: "feature rows",
                expected: mdp.n_states(),
                got: features.n_rows(),
            });
        }
        Ok(Self {
            mdp,
            features,
            summary,
        })
    }

    pub fn from_demos(
        mdp: &'a TabularMdp<F>,
        features: &'a FeatureMatrix<F>,
        demos: &DemoSet,
    ) -> Result<Self> {
        Self::new(mdp, features, DemoSummary::from_demos(demos, features)?)
    }

    pub fn summary(&self) -> &DemoSummary<F> {
        &self.summary
    }

    fn soft_pass(&self, w: &WeightVector<F>) -> Result<(TabularMdp<F>, mdp::SoftBackward<F>)> {
        let reward = reward_from_weights(w, self.features)?;
        let task = self.mdp.with_reward(reward)?;
        let back = mdp::soft_backward_pass(&task, self.summary.horizon);
        Ok((task, back))
    }

    fn ll_from(&self, w: &WeightVector<F>, back: &mdp::SoftBackward<F>) -> F {
        let demo_reward: F =
            w.0.iter()
                .zip(&self.summary.feature_counts)
                .map(|(&x, &c)| x * c)
                .sum();
        let log_z: F = self
            .summary
            .start_counts
            .iter()
            .zip(&back.values[0])
            .filter(|(&c, _)| c > F::zero())
            .map(|(&c, &v)| c * v)
            .sum();
        demo_reward - log_z
    }

    pub fn log_likelihood(&self, w: &WeightVector<F>) -> Result<F> {
        let (_, back) = self.soft_pass(w)?;
        Ok(self.ll_from(w, &back))
    }

    /// Log-likelihood and its gradient from one backward and one forward pass.
    pub fn evaluate(&self, w: &WeightVector<F>) -> Result<(F, Vec<F>)> {
        let (task, back) = self.soft_pass(w)?;
        let ll = self.ll_from(w, &back);
        let svf = expected_svf(
            &task,
            &back.policy,
            &self.summary.start_counts,
            self.summary.horizon,
        )?;
        let scale = F::from_usize_lossy(self.summary.n_trajectories);
        let mut grad = self.summary.feature_counts.clone();
        for (s, &d) in svf.iter().enumerate() {
            let mass = d * scale;
            if mass == F::zero() {
                continue;
            }
            for (g, &f) in grad.iter_mut().zip(self.features.row(s)) {
                *g -= mass * f;
            }
        }
        Ok((ll, grad))
    }

    pub fn gradient(&self, w: &WeightVector<F>) -> Result<Vec<F>> {
        Ok(self.evaluate(w)?.1)
    }

    /// `m` steps of constant-rate gradient ascent from `w0`.
    pub fn ascend(&self, w0: &WeightVector<F>, m: usize, lr: F) -> Result<AscentTrace<F>> {
        if !(lr >= F::zero()) {
            return Err(Error::config(format!(
                "learning rate {lr} must be non-negative"
            )));
        }
        if !w0.is_finite() {
            return Err(Error::Numerical { step: 0 });
        }
        let mut w = w0.clone();
        let mut lls = Vec::with_capacity(m);
        let (mut ll, mut grad) = self.evaluate(&w)?;
        let initial_ll = ll;
        for step in 1..=m {
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numerical { step });
            }
            for (x, &g) in w.0.iter_mut().zip(&grad) {
                *x += lr * g;
            }
            if !w.is_finite() {
                return Err(Error::Numerical { step });
            }
            if step < m {
                (ll, grad) = self.evaluate(&w)?;
            } else {
                ll = self.log_likelihood(&w)?;
            }
            if !ll.is_finite() {
                return Err(Error::Numerical { step });
            }
            lls.push(ll);
        }
        Ok(AscentTrace {
            initial: w0.clone(),
            final_weights: w,
            initial_log_likelihood: initial_ll,
            log_likelihoods: lls,
        })
    }
}

pub fn log_likelihood<F: Scalar>(
    demos: &DemoSet,
    w: &WeightVector<F>,
    features: &FeatureMatrix<F>,
    mdp: &TabularMdp<F>,
) -> Result<F> {
    MaxEntObjective::from_demos(mdp, features, demos)?.log_likelihood(w)
}

pub fn gradient<F: Scalar>(
    demos: &DemoSet,
    w: &WeightVector<F>,
    features: &FeatureMatrix<F>,
    mdp: &TabularMdp<F>,
) -> Result<Vec<F>> {
    MaxEntObjective::from_demos(mdp, features, demos)?.gradient(w)
}

pub fn ascend<F: Scalar>(
    w0: &WeightVector<F>,
    demos: &DemoSet,
    features: &FeatureMatrix<F>,
    mdp: &TabularMdp<F>,
    m: usize,
    lr: F,
) -> Result<AscentTrace<F>> {
    MaxEntObjective::from_demos(mdp, features, demos)?.ascend(w0, m, lr)
}

/// Plain MaxEnt IRL: `epochs` ascent steps from a uniform `[-1, 1]^d` start.
pub fn maxent_baseline<F: Scalar>(
    demos: &DemoSet,
    features: &FeatureMatrix<F>,
    mdp: &TabularMdp<F>,
    epochs: usize,
    lr: F,
    seed: u64,
) -> Result<WeightVector<F>> {
    let w0 = WeightVector::random_uniform(features.n_cols(), &mut rng_from(seed));
    Ok(ascend(&w0, demos, features, mdp, epochs, lr)?.final_weights)
}

/// Greedy optimal policy for the reward induced by `w`.
pub fn policy_from_weights<F: Scalar>(
    w: &WeightVector<F>,
    features: &FeatureMatrix<F>,
    mdp: &TabularMdp<F>,
    opts: &DpOptions<F>,
) -> Result<Policy<F>> {
    let task = mdp.with_reward(reward_from_weights(w, features)?)?;
    Ok(mdp::value_iteration_with(&task, opts)?.1)
}

/// EVD of the policy induced by `w`, scored on the true reward of `true_mdp`
/// under a uniform start distribution.
pub fn weights_evd<F: Scalar>(
    w: &WeightVector<F>,
    features: &FeatureMatrix<F>,
    true_mdp: &TabularMdp<F>,
    optimal: &Policy<F>,
    opts: &DpOptions<F>,
) -> Result<F> {
    let pi = policy_from_weights(w, features, true_mdp, opts)?;
    let start = mdp::uniform_start(true_mdp.n_states());
    mdp::evd_against(true_mdp, optimal, &pi, &start, opts)
}
