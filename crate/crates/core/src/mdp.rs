//! Finite tabular MDPs with state-only rewards, exact dynamic programming and
//! the expected value difference metric.

use std::sync::Arc;

use rand::Rng;

use crate::util::logsumexp;
use crate::{Error, Result, Scalar};

/// Sweep cap shared by every iterative solver.
pub const DEFAULT_MAX_SWEEPS: usize = 10_000;

/// Sparse transition tensor: for each `(s, a)` the list of `(s', p)` with `p > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Transitions<F> {
    n_states: usize,
    n_actions: usize,
    rows: Vec<Vec<(usize, F)>>,
}

impl<F: Scalar> Transitions<F> {
    pub fn new(n_states: usize, n_actions: usize, rows: Vec<Vec<(usize, F)>>) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::config(
                "an MDP needs at least one state and one action",
            ));
        }
        if rows.len() != n_states * n_actions {
            return Err(Error::Shape {
                what: "transition rows",
                expected: n_states * n_actions,
                got: rows.len(),
            });
        }
        let slack = F::lit(1e-9).max(F::epsilon() * F::lit(64.0));
        for (idx, row) in rows.iter().enumerate() {
            let mut total = F::zero();
            for &(next, p) in row {
                if next >= n_states {
                    return Err(Error::config(format!(
                        "transition ({}, {}) points at state {next} outside 0..{n_states}",
                        idx / n_actions,
                        idx % n_actions
                    )));
                }
                if !(p >= F::zero()) || !p.is_finite() {
                    return Err(Error::config(format!(
                        "transition ({}, {}) has invalid probability {p}",
                        idx / n_actions,
                        idx % n_actions
                    )));
                }
                total += p;
            }
            if (total - F::one()).abs() > slack {
                return Err(Error::config(format!(
                    "transition row ({}, {}) sums to {total}",
                    idx / n_actions,
                    idx % n_actions
                )));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            rows,
        })
    }

    /// Builds from a dense row-major `(s, a, s')` tensor, dropping zero entries.
    pub fn from_dense(n_states: usize, n_actions: usize, dense: &[F]) -> Result<Self> {
        let expected = n_states * n_actions * n_states;
        if dense.len() != expected {
            return Err(Error::Shape {
                what: "dense transition tensor",
                expected,
                got: dense.len(),
            });
        }
        let rows = dense
            .chunks(n_states)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &p)| p != F::zero())
                    .map(|(s, &p)| (s, p))
                    .collect()
            })
            .collect();
        Self::new(n_states, n_actions, rows)
    }

    #[inline]
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, F)] {
        &self.rows[s * self.n_actions + a]
    }
}

#[derive(Debug, Clone)]
pub struct TabularMdp<F> {
    transitions: Arc<Transitions<F>>,
    reward: Vec<F>,
    discount: F,
}

impl<F: Scalar> TabularMdp<F> {
    pub fn new(transitions: Transitions<F>, reward: Vec<F>, discount: F) -> Result<Self> {
        Self::from_shared(Arc::new(transitions), reward, discount)
    }

    pub fn from_shared(
        transitions: Arc<Transitions<F>>,
        reward: Vec<F>,
        discount: F,
    ) -> Result<Self> {
        if reward.len() != transitions.n_states {
            return Err(Error::Shape {
                what: "reward vector",
                expected: transitions.n_states,
                got: reward.len(),
            });
        }
        if !(discount >= F::zero() && discount < F::one()) {
            return Err(Error::config(format!("discount {discount} outside [0, 1)")));
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return Err(Error::config("reward contains a non-finite entry"));
        }
        Ok(Self {
            transitions,
            reward,
            discount,
        })
    }

    /// Same dynamics and discount, different reward. The transition tensor is shared.
    pub fn with_reward(&self, reward: Vec<F>) -> Result<Self> {
        Self::from_shared(Arc::clone(&self.transitions), reward, self.discount)
    }

    #[inline]
    pub fn n_states(&self) -> usize {
        self.transitions.n_states
    }

    #[inline]
    pub fn n_actions(&self) -> usize {
        self.transitions.n_actions
    }

    #[inline]
    pub fn reward(&self) -> &[F] {
        &self.reward
    }

    #[inline]
    pub fn discount(&self) -> F {
        self.discount
    }

    pub fn transitions(&self) -> &Arc<Transitions<F>> {
        &self.transitions
    }

    #[inline]
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, F)] {
        self.transitions.successors(s, a)
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> F {
        self.successors(s, a)
            .iter()
            .filter(|(n, _)| *n == next)
            .map(|&(_, p)| p)
            .sum()
    }

    /// `Σ_{s'} T[s][a][s'] · v[s']`
    #[inline]
    pub fn expected_next(&self, s: usize, a: usize, v: &[F]) -> F {
        self.successors(s, a).iter().map(|&(n, p)| p * v[n]).sum()
    }

    #[inline]
    fn q_value(&self, s: usize, a: usize, v: &[F]) -> F {
        self.reward[s] + self.discount * self.expected_next(s, a, v)
    }

    /// Samples a successor of `(s, a)`.
    pub fn sample_next<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> usize {
        let row = self.successors(s, a);
        let u = F::lit(rng.random::<f64>());
        let mut acc = F::zero();
        for &(n, p) in row {
            acc += p;
            if u < acc {
                return n;
            }
        }
        row.last().map(|&(n, _)| n).unwrap_or(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction<F>(pub Vec<F>);

impl<F: Scalar> ValueFunction<F> {
    pub fn values(&self) -> &[F] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<F> {
        self.0
    }
}

/// Row-major `π(a|s)` table.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticPolicy<F> {
    n_actions: usize,
    probs: Vec<F>,
}

impl<F: Scalar> StochasticPolicy<F> {
    pub fn new(n_actions: usize, probs: Vec<F>) -> Result<Self> {
        if n_actions == 0 || probs.len() % n_actions != 0 {
            return Err(Error::config("policy table is not a whole number of rows"));
        }
        let slack = F::lit(1e-9).max(F::epsilon() * F::lit(64.0));
        for (s, row) in probs.chunks(n_actions).enumerate() {
            let total: F = row.iter().copied().sum();
            if row.iter().any(|&p| !(p >= F::zero())) || (total - F::one()).abs() > slack {
                return Err(Error::config(format!(
                    "policy row {s} is not a distribution"
                )));
            }
        }
        Ok(Self { n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = F::one() / F::from_usize_lossy(n_actions);
        Self {
            n_actions,
            probs: vec![p; n_states * n_actions],
        }
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[F] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn n_states(&self) -> usize {
        self.probs.len() / self.n_actions
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Policy<F> {
    Deterministic(Vec<usize>),
    Stochastic(StochasticPolicy<F>),
}

impl<F: Scalar> Policy<F> {
    pub fn prob(&self, s: usize, a: usize) -> F {
        match self {
            Policy::Deterministic(acts) => {
                if acts[s] == a {
                    F::one()
                } else {
                    F::zero()
                }
            }
            Policy::Stochastic(p) => p.row(s)[a],
        }
    }

    pub fn validate_for(&self, mdp: &TabularMdp<F>) -> Result<()> {
        match self {
            Policy::Deterministic(acts) => {
                if acts.len() != mdp.n_states() {
                    return Err(Error::Shape {
                        what: "deterministic policy",
                        expected: mdp.n_states(),
                        got: acts.len(),
                    });
                }
                if let Some(&a) = acts.iter().find(|&&a| a >= mdp.n_actions()) {
                    return Err(Error::config(format!("policy action {a} out of range")));
                }
            }
            Policy::Stochastic(p) => {
                if p.n_actions() != mdp.n_actions() || p.n_states() != mdp.n_states() {
                    return Err(Error::Shape {
                        what: "stochastic policy",
                        expected: mdp.n_states() * mdp.n_actions(),
                        got: p.probs.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Deterministic action table, if this is a deterministic policy.
    pub fn actions(&self) -> Option<&[usize]> {
        match self {
            Policy::Deterministic(a) => Some(a),
            Policy::Stochastic(_) => None,
        }
    }
}

/// Time-indexed action distributions, as consumed by forward visitation passes.
pub trait PolicySchedule<F> {
    fn action_probs(&self, t: usize, s: usize) -> &[F];
}

impl<F: Scalar> PolicySchedule<F> for StochasticPolicy<F> {
    fn action_probs(&self, _t: usize, s: usize) -> &[F] {
        self.row(s)
    }
}

/// One stochastic policy per time step of a finite horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteHorizonPolicy<F> {
    pub steps: Vec<StochasticPolicy<F>>,
}

impl<F: Scalar> PolicySchedule<F> for FiniteHorizonPolicy<F> {
    fn action_probs(&self, t: usize, s: usize) -> &[F] {
        self.steps[t.min(self.steps.len() - 1)].row(s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DpOptions<F> {
    pub tol: F,
    pub max_sweeps: usize,
}

impl<F: Scalar> DpOptions<F> {
    pub fn new(tol: F) -> Self {
        Self {
            tol,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

impl<F: Scalar> Default for DpOptions<F> {
    fn default() -> Self {
        Self::new(F::lit(1e-8).max(F::epsilon() * F::lit(256.0)))
    }
}

fn check_tol<F: Scalar>(tol: F) -> Result<()> {
    if tol > F::zero() && tol.is_finite() {
        Ok(())
    } else {
        Err(Error::config(format!(
            "tolerance must be positive, got {tol}"
        )))
    }
}

fn max_abs_diff<F: Scalar>(a: &[F], b: &[F]) -> F {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| (x - y).abs())
        .fold(F::zero(), F::max)
}

/// Greedy argmax of Q; near-ties (a few ulps) resolve to the lowest action index.
fn greedy_action<F: Scalar>(mdp: &TabularMdp<F>, s: usize, v: &[F]) -> (usize, F) {
    let qs: Vec<F> = (0..mdp.n_actions()).map(|a| mdp.q_value(s, a, v)).collect();
    let best = qs.iter().copied().fold(F::neg_infinity(), F::max);
    let slack = F::epsilon() * F::lit(64.0) * best.abs().max(F::one());
    let action = qs.iter().position(|&q| q >= best - slack).unwrap_or(0);
    (action, best)
}

pub fn value_iteration<F: Scalar>(
    mdp: &TabularMdp<F>,
    tol: F,
) -> Result<(ValueFunction<F>, Policy<F>)> {
    value_iteration_with(mdp, &DpOptions::new(tol))
}

/// Hard Bellman optimality iteration. Stops once successive sweeps differ by at
/// most `tol` in max norm, which bounds the Bellman residual of the result by
/// `γ · tol`.
pub fn value_iteration_with<F: Scalar>(
    mdp: &TabularMdp<F>,
    opts: &DpOptions<F>,
) -> Result<(ValueFunction<F>, Policy<F>)> {
    check_tol(opts.tol)?;
    let n = mdp.n_states();
    let mut v = vec![F::zero(); n];
    let mut next = vec![F::zero(); n];
    let mut residual = F::infinity();
    for _ in 0..opts.max_sweeps {
        for (s, slot) in next.iter_mut().enumerate() {
            *slot = greedy_action(mdp, s, &v).1;
        }
        residual = max_abs_diff(&v, &next);
        std::mem::swap(&mut v, &mut next);
        if residual <= opts.tol {
            let policy = (0..n).map(|s| greedy_action(mdp, s, &v).0).collect();
            return Ok((ValueFunction(v), Policy::Deterministic(policy)));
        }
    }
    Err(Error::Divergence {
        solver: "value iteration",
        sweeps: opts.max_sweeps,
        residual: residual.to_f64_lossy(),
    })
}

pub fn soft_value_iteration<F: Scalar>(
    mdp: &TabularMdp<F>,
    tol: F,
) -> Result<(ValueFunction<F>, StochasticPolicy<F>)> {
    soft_value_iteration_with(mdp, &DpOptions::new(tol))
}

/// Discounted soft Bellman iteration: `V(s) = logsumexp_a Q(s, a)`, returning
/// the maximum-entropy policy `π(a|s) = exp(Q(s, a) − V(s))`.
pub fn soft_value_iteration_with<F: Scalar>(
    mdp: &TabularMdp<F>,
    opts: &DpOptions<F>,
) -> Result<(ValueFunction<F>, StochasticPolicy<F>)> {
    check_tol(opts.tol)?;
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut v = vec![F::zero(); n];
    let mut next = vec![F::zero(); n];
    let mut q = vec![F::zero(); na];
    let mut residual = F::infinity();
    for _ in 0..opts.max_sweeps {
        for (s, slot) in next.iter_mut().enumerate() {
            for (a, qa) in q.iter_mut().enumerate() {
                *qa = mdp.q_value(s, a, &v);
            }
            *slot = logsumexp(&q);
        }
        residual = max_abs_diff(&v, &next);
        std::mem::swap(&mut v, &mut next);
        if residual <= opts.tol {
            let mut probs = Vec::with_capacity(n * na);
            for s in 0..n {
                for (a, qa) in q.iter_mut().enumerate() {
                    *qa = mdp.q_value(s, a, &v);
                }
                let norm = logsumexp(&q);
                probs.extend(q.iter().map(|&qa| (qa - norm).exp()));
            }
            return Ok((
                ValueFunction(v),
                StochasticPolicy {
                    n_actions: na,
                    probs,
                },
            ));
        }
    }
    Err(Error::Divergence {
        solver: "soft value iteration",
        sweeps: opts.max_sweeps,
        residual: residual.to_f64_lossy(),
    })
}

/// Result of an undiscounted finite-horizon soft backward pass.
#[derive(Debug, Clone)]
pub struct SoftBackward<F> {
    /// `values[t][s]`: log partition of the remaining `horizon − t` steps from `s`.
    pub values: Vec<Vec<F>>,
    pub policy: FiniteHorizonPolicy<F>,
}

/// Soft backward recursion over `horizon` state-action steps:
/// `V_horizon = 0`, `Q_t(s, a) = r(s) + Σ T(s'|s, a) V_{t+1}(s')`,
/// `V_t = logsumexp_a Q_t`, `π_t(a|s) = exp(Q_t − V_t)`.
pub fn soft_backward_pass<F: Scalar>(mdp: &TabularMdp<F>, horizon: usize) -> SoftBackward<F> {
    let n = mdp.n_states();
    let na = mdp.n_actions();
    let mut values = vec![vec![F::zero(); n]; horizon];
    let mut steps = Vec::with_capacity(horizon);
    let zero = vec![F::zero(); n];
    let mut q = vec![F::zero(); na];
    for t in (0..horizon).rev() {
        let mut probs = Vec::with_capacity(n * na);
        let mut cur = vec![F::zero(); n];
        {
            let future = if t + 1 < horizon {
                &values[t + 1]
            } else {
                &zero
            };
            for (s, slot) in cur.iter_mut().enumerate() {
                for (a, qa) in q.iter_mut().enumerate() {
                    *qa = mdp.reward[s] + mdp.expected_next(s, a, future);
                }
                let norm = logsumexp(&q);
                *slot = norm;
                probs.extend(q.iter().map(|&qa| (qa - norm).exp()));
            }
        }
        values[t] = cur;
        steps.push(StochasticPolicy {
            n_actions: na,
            probs,
        });
    }
    steps.reverse();
    SoftBackward {
        values,
        policy: FiniteHorizonPolicy { steps },
    }
}

pub fn policy_evaluation<F: Scalar>(
    mdp: &TabularMdp<F>,
    policy: &Policy<F>,
    tol: F,
) -> Result<ValueFunction<F>> {
    policy_evaluation_with(mdp, policy, &DpOptions::new(tol))
}

/// Iterates the policy-induced Bellman operator to its fixed point.
pub fn policy_evaluation_with<F: Scalar>(
    mdp: &TabularMdp<F>,
    policy: &Policy<F>,
    opts: &DpOptions<F>,
) -> Result<ValueFunction<F>> {
    check_tol(opts.tol)?;
    policy.validate_for(mdp)?;
    let n = mdp.n_states();
    let mut v = vec![F::zero(); n];
    let mut next = vec![F::zero(); n];
    let mut residual = F::infinity();
    for _ in 0..opts.max_sweeps {
        for (s, slot) in next.iter_mut().enumerate() {
            *slot = match policy {
                Policy::Deterministic(acts) => mdp.q_value(s, acts[s], &v),
                Policy::Stochastic(p) => p
                    .row(s)
                    .iter()
                    .enumerate()
                    .filter(|(_, &pa)| pa > F::zero())
                    .map(|(a, &pa)| pa * mdp.q_value(s, a, &v))
                    .sum(),
            };
        }
        residual = max_abs_diff(&v, &next);
        std::mem::swap(&mut v, &mut next);
        if residual <= opts.tol {
            return Ok(ValueFunction(v));
        }
    }
    Err(Error::Divergence {
        solver: "policy evaluation",
        sweeps: opts.max_sweeps,
        residual: residual.to_f64_lossy(),
    })
}

/// Uniform distribution over the states of `mdp`.
pub fn uniform_start<F: Scalar>(n_states: usize) -> Vec<F> {
    vec![F::one() / F::from_usize_lossy(n_states); n_states]
}

pub fn evd<F: Scalar>(
    true_mdp: &TabularMdp<F>,
    candidate: &Policy<F>,
    start_dist: &[F],
) -> Result<F> {
    evd_with(true_mdp, candidate, start_dist, &DpOptions::default())
}

/// Expected value difference between the optimal policy of `true_mdp` and
/// `candidate`, both scored under the true reward and weighted by `start_dist`.
///
/// Both values come from the same policy evaluator, so the optimal policy
/// scores exactly zero. Negative round-off is clamped to zero.
pub fn evd_with<F: Scalar>(
    true_mdp: &TabularMdp<F>,
    candidate: &Policy<F>,
    start_dist: &[F],
    opts: &DpOptions<F>,
) -> Result<F> {
    let (_, optimal) = value_iteration_with(true_mdp, opts)?;
    evd_against(true_mdp, &optimal, candidate, start_dist, opts)
}

/// As [`evd_with`] with the optimal policy supplied by the caller.
pub fn evd_against<F: Scalar>(
    true_mdp: &TabularMdp<F>,
    optimal: &Policy<F>,
    candidate: &Policy<F>,
    start_dist: &[F],
    opts: &DpOptions<F>,
) -> Result<F> {
    if start_dist.len() != true_mdp.n_states() {
        return Err(Error::Shape {
            what: "start distribution",
            expected: true_mdp.n_states(),
            got: start_dist.len(),
        });
    }
    let total: F = start_dist.iter().copied().sum();
    if (total - F::one()).abs() > F::lit(1e-6) {
        return Err(Error::config(format!("start distribution sums to {total}")));
    }
    let best = policy_evaluation_with(true_mdp, optimal, opts)?;
    let cand = if candidate == optimal {
        best.clone()
    } else {
        policy_evaluation_with(true_mdp, candidate, opts)?
    };
    let gap: F = start_dist
        .iter()
        .zip(best.values().iter().zip(cand.values()))
        .map(|(&p, (&b, &c))| p * (b - c))
        .sum();
    Ok(gap.max(F::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// State 0: action 0 self-loops, action 1 moves to absorbing state 1.
    /// Reward 0 in state 0, 1 in state 1.
    pub(crate) fn chain(discount: f64) -> TabularMdp<f64> {
        let rows = vec![
            vec![(0, 1.0)],
            vec![(1, 1.0)],
            vec![(1, 1.0)],
            vec![(1, 1.0)],
        ];
        TabularMdp::new(
            Transitions::new(2, 2, rows).unwrap(),
            vec![0.0, 1.0],
            discount,
        )
        .unwrap()
    }

    fn random_mdp(n: usize, na: usize, seed: u64) -> TabularMdp<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense = Vec::new();
        for _ in 0..n * na {
            let row: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let s: f64 = row.iter().sum();
            dense.extend(row.iter().map(|x| x / s));
        }
        let reward = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        TabularMdp::new(Transitions::from_dense(n, na, &dense).unwrap(), reward, 0.9).unwrap()
    }

    fn bellman_residual(mdp: &TabularMdp<f64>, v: &[f64]) -> f64 {
        (0..mdp.n_states())
            .map(|s| {
                let best = (0..mdp.n_actions())
                    .map(|a| mdp.q_value(s, a, v))
                    .fold(f64::NEG_INFINITY, f64::max);
                (best - v[s]).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn rejects_bad_transitions() {
        assert!(Transitions::<f64>::new(1, 1, vec![vec![(0, 0.5)]]).is_err());
        assert!(Transitions::<f64>::new(1, 1, vec![vec![(1, 1.0)]]).is_err());
        assert!(Transitions::<f64>::new(1, 1, vec![vec![(0, 1.5), (0, -0.5)]]).is_err());
        let t = Transitions::<f64>::new(1, 1, vec![vec![(0, 1.0)]]).unwrap();
        assert!(TabularMdp::new(t, vec![0.0], 1.0).is_err());
    }

    #[test]
    fn single_state_zero_reward() {
        let t = Transitions::new(1, 1, vec![vec![(0, 1.0)]]).unwrap();
        for &g in &[0.0, 0.5, 0.99] {
            let mdp = TabularMdp::new(t.clone(), vec![0.0], g).unwrap();
            let (v, _) = value_iteration(&mdp, 1e-10).unwrap();
            assert_eq!(v.values(), &[0.0]);
        }
    }

    #[test]
    fn chain_closed_form_and_rollout() {
        let mdp = chain(0.9);
        let (v, pi) = value_iteration(&mdp, 1e-10).unwrap();
        assert!((v.values()[1] - 10.0).abs() < 1e-8);
        assert!((v.values()[0] - 9.0).abs() < 1e-8);
        assert_eq!(pi.actions().unwrap()[0], 1);
        // 1000-step accumulation of the "go" path: 0 then 1 forever.
        let rollout: f64 = (1..1000).map(|t| 0.9f64.powi(t)).sum();
        assert!((v.values()[0] - rollout).abs() < 1e-8);
        assert!(bellman_residual(&mdp, v.values()) <= 1e-10);
    }

    #[test]
    fn constant_reward_values() {
        let mdp = random_mdp(6, 3, 4).with_reward(vec![2.5; 6]).unwrap();
        let (v, _) = value_iteration(&mdp, 1e-10).unwrap();
        for &x in v.values() {
            assert!((x - 25.0).abs() < 1e-8);
        }
        let uniform = Policy::Stochastic(StochasticPolicy::uniform(6, 3));
        let pv = policy_evaluation(&mdp, &uniform, 1e-10).unwrap();
        for &x in pv.values() {
            assert!((x - 25.0).abs() < 1e-8);
        }
    }

    #[test]
    fn residual_bound_on_random_mdps() {
        for seed in 0..5 {
            let mdp = random_mdp(7, 3, seed);
            let tol = 1e-6;
            let (v, _) = value_iteration(&mdp, tol).unwrap();
            assert!(bellman_residual(&mdp, v.values()) <= tol);
        }
    }

    #[test]
    fn divergence_error_past_cap() {
        let mdp = chain(0.99);
        let opts = DpOptions {
            tol: 1e-12,
            max_sweeps: 5,
        };
        assert!(matches!(
            value_iteration_with(&mdp, &opts),
            Err(Error::Divergence { .. })
        ));
        assert!(soft_value_iteration_with(&mdp, &opts).is_err());
        let pi = Policy::Deterministic(vec![1, 0]);
        assert!(policy_evaluation_with(&mdp, &pi, &opts).is_err());
        assert!(value_iteration(&mdp, 0.0).is_err());
    }

    #[test]
    fn reward_shift_keeps_greedy_policy() {
        for seed in 10..15 {
            let mdp = random_mdp(8, 4, seed);
            let shifted = mdp
                .with_reward(mdp.reward().iter().map(|r| r + 3.0).collect())
                .unwrap();
            let (_, p1) = value_iteration(&mdp, 1e-10).unwrap();
            let (_, p2) = value_iteration(&shifted, 1e-10).unwrap();
            assert_eq!(p1, p2);
        }
    }

    #[test]
    fn soft_vi_symmetric_actions_uniform() {
        let t = Transitions::new(1, 2, vec![vec![(0, 1.0)], vec![(0, 1.0)]]).unwrap();
        let mdp = TabularMdp::new(t, vec![0.3f64], 0.9).unwrap();
        let (_, pi) = soft_value_iteration(&mdp, 1e-4).unwrap();
        assert!((pi.row(0)[0] - 0.5).abs() < 1e-12);
        assert!((pi.row(0)[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn soft_vi_concentrates_with_scale() {
        // Chain: "go" leads to the rewarding state; scaling the reward sharpens π(go|0).
        let mut last = 0.0;
        for &beta in &[0.1, 1.0, 5.0, 20.0] {
            let mdp = chain(0.9).with_reward(vec![0.0, beta]).unwrap();
            let (_, pi) = soft_value_iteration(&mdp, 1e-8).unwrap();
            // Oracle: finite-horizon (50) discounted soft Q by brute-force unrolling.
            let mut v = [0.0f64; 2];
            for _ in 0..50 {
                let q00 = 0.0 + 0.9 * v[0];
                let q01 = 0.0 + 0.9 * v[1];
                let q1 = beta + 0.9 * v[1];
                v = [(q00.exp() + q01.exp()).ln(), (q1.exp() + q1.exp()).ln()];
            }
            let q00 = 0.9 * v[0];
            let q01 = 0.9 * v[1];
            let oracle = q01.exp() / (q00.exp() + q01.exp());
            let got = pi.row(0)[1];
            assert!(
                (got - oracle).abs() < 1e-3,
                "beta {beta}: {got} vs {oracle}"
            );
            assert!(got >= last);
            last = got;
        }
        assert!(last > 0.99);
    }

    #[test]
    fn soft_vi_large_rewards_finite() {
        let mdp = random_mdp(5, 3, 2);
        let big = mdp
            .with_reward(vec![1e3, -1e3, 500.0, -500.0, 0.0])
            .unwrap();
        let (v, pi) = soft_value_iteration(&big, 1e-4).unwrap();
        assert!(v.values().iter().all(|x| x.is_finite()));
        for s in 0..5 {
            let row = pi.row(s);
            assert!(row.iter().all(|p| p.is_finite()));
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn policy_evaluation_uniform_chain() {
        let mdp = chain(0.9);
        let pi = Policy::Stochastic(StochasticPolicy::uniform(2, 2));
        let v = policy_evaluation(&mdp, &pi, 1e-12).unwrap();
        // V(0) = 0.5·0.9·V(0) + 0.5·0.9·10  ⇒  V(0) = 4.5 / 0.55
        assert!((v.values()[0] - 4.5 / 0.55).abs() < 1e-9);
        assert!((v.values()[1] - 10.0).abs() < 1e-9);
    }

    #[test]
    fn policy_evaluation_matches_vi() {
        let mdp = random_mdp(9, 3, 7);
        let tol = 1e-9;
        let (v, pi) = value_iteration(&mdp, tol).unwrap();
        let pv = policy_evaluation(&mdp, &pi, tol).unwrap();
        assert!(max_abs_diff(v.values(), pv.values()) <= 2.0 * tol / (1.0 - 0.9));
    }

    #[test]
    fn evd_identity_and_worst() {
        let mdp = chain(0.9);
        let (_, opt) = value_iteration(&mdp, 1e-10).unwrap();
        assert_eq!(evd(&mdp, &opt, &[1.0, 0.0]).unwrap(), 0.0);
        let stay = Policy::Deterministic(vec![0, 0]);
        let gap = evd(&mdp, &stay, &[1.0, 0.0]).unwrap();
        assert!((gap - 9.0).abs() < 1e-6);
        assert!(evd(&mdp, &stay, &[0.5, 0.4]).is_err());
    }

    #[test]
    fn evd_constant_reward_zero() {
        let mdp = random_mdp(6, 3, 1).with_reward(vec![1.0; 6]).unwrap();
        let start = uniform_start(6);
        for pi in [
            Policy::Deterministic(vec![0; 6]),
            Policy::Deterministic(vec![2; 6]),
            Policy::Stochastic(StochasticPolicy::uniform(6, 3)),
        ] {
            assert!(evd(&mdp, &pi, &start).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn finite_horizon_zero_reward_is_uniform() {
        let mdp = random_mdp(4, 5, 3).with_reward(vec![0.0; 4]).unwrap();
        let back = soft_backward_pass(&mdp, 3);
        for t in 0..3 {
            for s in 0..4 {
                assert!((back.values[t][s] - (3 - t) as f64 * 5f64.ln()).abs() < 1e-12);
                for &p in back.policy.action_probs(t, s) {
                    assert!((p - 0.2).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn generic_over_f32() {
        let rows = vec![
            vec![(0, 1.0f32)],
            vec![(1, 1.0)],
            vec![(1, 1.0)],
            vec![(1, 1.0)],
        ];
        let mdp = TabularMdp::new(
            Transitions::new(2, 2, rows).unwrap(),
            vec![0.0f32, 1.0],
            0.9,
        )
        .unwrap();
        let (v, pi) = value_iteration(&mdp, 1e-5).unwrap();
        assert!((v.values()[0] - 9.0).abs() < 1e-3);
        assert_eq!(pi.actions().unwrap()[0], 1);
    }
}
