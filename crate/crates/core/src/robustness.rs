//! Mining a diverse set of low-EVD reward weights from a fitted mixture.

use rayon::prelude::*;

use crate::gmm::Gmm;
use crate::maxent::{weights_evd, WeightVector};
use crate::mdp::{self, DpOptions, TabularMdp};
use crate::objectworld::FeatureMatrix;
use crate::util::rng_from;
use crate::{Error, Result, Scalar};

/// Candidates whose EVD is evaluated together before admission.
const BATCH: usize = 16;

/// `‖w − w'‖_F`; for vectors this is the Euclidean distance.
pub fn frobenius_distance<F: Scalar>(w: &WeightVector<F>, other: &WeightVector<F>) -> Result<F> {
    if w.dim() != other.dim() {
        return Err(Error::Shape {
            what: "weight vector",
            expected: w.dim(),
            got: other.dim(),
        });
    }
    Ok(w.0
        .iter()
        .zip(&other.0)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<F>()
        .sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionSet<F> {
    pub members: Vec<WeightVector<F>>,
    pub evds: Vec<F>,
    pub delta: F,
    pub epsilon: F,
    /// Candidates drawn in total.
    pub draws: usize,
    /// False when `max_draws` ran out before the target size was reached.
    pub complete: bool,
}

impl<F: Scalar> SolutionSet<F> {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Re-checks both admission constraints over the whole set.
    pub fn verify(&self) -> bool {
        let separated = self.members.iter().enumerate().all(|(i, a)| {
            self.members[i + 1..]
                .iter()
                .all(|b| frobenius_distance(a, b).map_or(false, |d| d > self.delta))
        });
        separated && self.evds.iter().all(|&e| e < self.epsilon)
    }

    /// One row per member: weights then EVD, preceded by a `#` status line and a header.
    pub fn to_csv(&self) -> String {
        let d = self.members.first().map_or(0, |w| w.dim());
        let mut out = format!(
            "# complete={} members={} draws={} delta={} epsilon={}\n",
            self.complete,
            self.members.len(),
            self.draws,
            self.delta,
            self.epsilon
        );
        let mut header: Vec<String> = (0..d).map(|j| format!("w{j}")).collect();
        header.push("evd".into());
        out.push_str(&header.join(","));
        out.push('\n');
        for (w, e) in self.members.iter().zip(&self.evds) {
            out.push_str(&crate::util::fmt_list(&w.0));
            out.push_str(&format!(",{e}\n"));
        }
        out
    }
}

/// Rejection sampler: a draw joins the set iff it is farther than `delta`
/// from every member and the optimal policy of its reward has EVD below
/// `epsilon_evd` on the true reward. Stops at `n` members or `max_draws`
/// candidates, whichever comes first.
#[allow(clippy::too_many_arguments)]
pub fn generate_solution_set<F: Scalar>(
    gmm: &Gmm<F>,
    n: usize,
    delta: F,
    epsilon_evd: F,
    true_mdp: &TabularMdp<F>,
    features: &FeatureMatrix<F>,
    seed: u64,
    max_draws: usize,
) -> Result<SolutionSet<F>> {
    if gmm.dim() != features.n_cols() {
        return Err(Error::Shape {
            what: "mixture dimension",
            expected: features.n_cols(),
            got: gmm.dim(),
        });
    }
    let opts = DpOptions::default();
    let (_, optimal) = mdp::value_iteration_with(true_mdp, &opts)?;
    let mut rng = rng_from(seed);
    let mut set = SolutionSet {
        members: Vec::new(),
        evds: Vec::new(),
        delta,
        epsilon: epsilon_evd,
        draws: 0,
        complete: n == 0,
    };
    while set.members.len() < n && set.draws < max_draws {
        let batch = BATCH.min(max_draws - set.draws);
        let candidates = gmm.sample_with(batch, &mut rng);
        let evds: Vec<F> = candidates
            .par_iter()
            .map(|w| weights_evd(w, features, true_mdp, &optimal, &opts))
            .collect::<Result<_>>()?;
        for (w, evd) in candidates.into_iter().zip(evds) {
            set.draws += 1;
            let far = set
                .members
                .iter()
                .all(|m| frobenius_distance(&w, m).map_or(false, |d| d > delta));
            if far && evd < epsilon_evd {
                set.members.push(w);
                set.evds.push(evd);
                if set.members.len() == n {
                    break;
                }
            }
        }
    }
    set.complete = set.members.len() >= n;
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectworld::{self, ObjectworldParams};

    #[test]
    fn distances() {
        let a = WeightVector(vec![3.0, 0.0]);
        let b = WeightVector(vec![0.0, 4.0]);
        assert_eq!(frobenius_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(frobenius_distance(&a, &b).unwrap(), 5.0);
        assert_eq!(frobenius_distance(&b, &a).unwrap(), 5.0);
        assert!(frobenius_distance(&a, &WeightVector(vec![1.0])).is_err());
    }

    fn setup() -> (TabularMdp<f64>, FeatureMatrix<f64>, Gmm<f64>) {
        let world = objectworld::generate(
            &ObjectworldParams {
                grid_size: 6,
                n_objects: 8,
                ..ObjectworldParams::default()
            },
            5,
        )
        .unwrap();
        let gmm = Gmm::isotropic(vec![0.0; 4], 1.0).unwrap();
        (world.mdp(), world.features_continuous(), gmm)
    }

    #[test]
    fn vacuous_thresholds_take_first_draws() {
        let (mdp, feats, gmm) = setup();
        let set = generate_solution_set(&gmm, 4, 0.0, f64::INFINITY, &mdp, &feats, 9, 100).unwrap();
        assert_eq!(set.len(), 4);
        assert_eq!(set.draws, 4);
        assert!(set.complete);
        assert_eq!(set.members, gmm.sample_with(4, &mut rng_from(9)));
        assert!(set.verify());
    }

    #[test]
    fn impossible_threshold_is_incomplete() {
        let (mdp, feats, gmm) = setup();
        let set = generate_solution_set(&gmm, 3, 0.0, 0.0, &mdp, &feats, 1, 20).unwrap();
        assert!(set.is_empty());
        assert!(!set.complete);
        assert_eq!(set.draws, 20);
        assert!(set.to_csv().starts_with("# complete=false"));
    }

    #[test]
    fn wider_evd_bound_never_admits_fewer_without_separation() {
        let (mdp, feats, gmm) = setup();
        let mut last = 0;
        for &eps in &[0.5, 2.0, 5.0, 50.0] {
            let set = generate_solution_set(&gmm, 100, 0.0, eps, &mdp, &feats, 3, 48).unwrap();
            assert!(set.verify());
            assert!(set.len() >= last);
            last = set.len();
        }
    }
}
