//! Diagonal-covariance Gaussian mixtures with log-domain EM.

use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::maxent::WeightVector;
use crate::util::{fmt_list, logsumexp, parse_list, rng_from};
use crate::{Error, Result, Scalar};

pub const VARIANCE_FLOOR: f64 = 1e-6;
/// Components whose total responsibility falls below this are re-seeded.
pub const EMPTY_COMPONENT: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 1000;
pub const DEFAULT_COMPONENTS: usize = 3;

const PAR_THRESHOLD: usize = 4096;

impl<F> AsRef<[F]> for WeightVector<F> {
    fn as_ref(&self) -> &[F] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gmm<F> {
    weights: Vec<F>,
    means: Vec<Vec<F>>,
    variances: Vec<Vec<F>>,
}

fn floor<F: Scalar>() -> F {
    F::lit(VARIANCE_FLOOR)
}

impl<F: Scalar> Gmm<F> {
    pub fn new(weights: Vec<F>, means: Vec<Vec<F>>, variances: Vec<Vec<F>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 {
            return Err(Error::config("a mixture needs at least one component"));
        }
        if means.len() != k || variances.len() != k {
            return Err(Error::Shape {
                what: "mixture components",
                expected: k,
                got: means.len().min(variances.len()),
            });
        }
        let d = means[0].len();
        if d == 0 {
            return Err(Error::config("mixture dimension must be positive"));
        }
        for (m, v) in means.iter().zip(&variances) {
            if m.len() != d || v.len() != d {
                return Err(Error::Shape {
                    what: "component dimension",
                    expected: d,
                    got: m.len().min(v.len()),
                });
            }
            if m.iter().any(|x| !x.is_finite()) || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::config("mixture parameters must be finite"));
            }
            if v.iter().any(|&x| x < floor()) {
                return Err(Error::config("variance below floor"));
            }
        }
        let total: F = weights.iter().copied().sum();
        let slack = F::lit(1e-9).max(F::epsilon() * F::lit(64.0));
        if weights.iter().any(|&w| !(w >= F::zero())) || (total - F::one()).abs() > slack {
            return Err(Error::config(format!("mixing weights sum to {total}")));
        }
        Ok(Self {
            weights,
            means,
            variances,
        })
    }

    /// Single isotropic component.
    pub fn isotropic(mean: Vec<F>, variance: F) -> Result<Self> {
        let d = mean.len();
        Self::new(
            vec![F::one()],
            vec![mean],
            vec![vec![variance.max(floor()); d]],
        )
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<F>] {
        &self.means
    }

    pub fn variances(&self) -> &[Vec<F>] {
        &self.variances
    }

    /// Overall mixture mean `Σ_k α_k μ_k`.
    pub fn mean(&self) -> Vec<F> {
        let mut out = vec![F::zero(); self.dim()];
        for (a, m) in self.weights.iter().zip(&self.means) {
            for (o, &x) in out.iter_mut().zip(m) {
                *o += *a * x;
            }
        }
        out
    }

    /// Largest per-coordinate variance across components.
    pub fn max_variance(&self) -> F {
        self.variances
            .iter()
            .flatten()
            .copied()
            .fold(F::zero(), F::max)
    }

    pub fn component_log_density(&self, k: usize, x: &[F]) -> F {
        let two_pi = F::lit(std::f64::consts::TAU);
        let half = F::lit(0.5);
        self.means[k]
            .iter()
            .zip(&self.variances[k])
            .zip(x)
            .map(|((&mu, &var), &xi)| {
                let diff = xi - mu;
                -half * ((two_pi * var).ln() + diff * diff / var)
            })
            .sum()
    }

    fn joint_log_densities(&self, x: &[F], out: &mut [F]) {
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = self.weights[k].ln() + self.component_log_density(k, x);
        }
    }

    pub fn log_pdf(&self, x: &[F]) -> Result<F> {
        if x.len() != self.dim() {
            return Err(Error::Shape {
                what: "point dimension",
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut buf = vec![F::zero(); self.k()];
        self.joint_log_densities(x, &mut buf);
        Ok(logsumexp(&buf))
    }

    /// Components sorted by mean (first coordinate, then the rest), so that
    /// relabelled but otherwise equal mixtures compare equal.
    pub fn canonical(&self) -> Self {
        let mut order: Vec<usize> = (0..self.k()).collect();
        order.sort_by(|&a, &b| {
            self.means[a]
                .iter()
                .zip(&self.means[b])
                .map(|(x, y)| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        Self {
            weights: order.iter().map(|&i| self.weights[i]).collect(),
            means: order.iter().map(|&i| self.means[i].clone()).collect(),
            variances: order.iter().map(|&i| self.variances[i].clone()).collect(),
        }
    }

    /// `α ⊕ μ ⊕ Σ` as one flat vector.
    pub fn flatten(&self) -> Vec<F> {
        let mut out = self.weights.clone();
        out.extend(self.means.iter().flatten());
        out.extend(self.variances.iter().flatten());
        out
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> WeightVector<F> {
        let u = F::lit(rng.random::<f64>());
        let mut acc = F::zero();
        let k = self
            .weights
            .iter()
            .position(|&a| {
                acc += a;
                u < acc
            })
            .unwrap_or(self.k() - 1);
        WeightVector(
            self.means[k]
                .iter()
                .zip(&self.variances[k])
                .map(|(&mu, &var)| {
                    let z: f64 = rng.sample(StandardNormal);
                    mu + var.sqrt() * F::lit(z)
                })
                .collect(),
        )
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<WeightVector<F>> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    pub fn sample(&self, n: usize, seed: u64) -> Vec<WeightVector<F>> {
        self.sample_with(n, &mut rng_from(seed))
    }

    /// Text form: `gmm k=K d=D`, then one `alpha; mu,…; sigma²,…` line per component.
    pub fn to_text(&self) -> String {
        let mut out = format!("gmm k={} d={}\n", self.k(), self.dim());
        for k in 0..self.k() {
            out.push_str(&format!(
                "{}; {}; {}\n",
                self.weights[k],
                fmt_list(&self.means[k]),
                fmt_list(&self.variances[k])
            ));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty mixture file"))?;
        let mut toks = header.split_whitespace();
        if toks.next() != Some("gmm") {
            return Err(Error::parse(1, "missing gmm header"));
        }
        let mut k = None;
        let mut d = None;
        for tok in toks {
            match tok.split_once('=') {
                Some(("k", v)) => k = v.parse::<usize>().ok(),
                Some(("d", v)) => d = v.parse::<usize>().ok(),
                _ => return Err(Error::parse(1, format!("unexpected header token {tok:?}"))),
            }
        }
        let (k, d) = k
            .zip(d)
            .ok_or_else(|| Error::parse(1, "header needs k= and d="))?;
        let mut weights = Vec::with_capacity(k);
        let mut means = Vec::with_capacity(k);
        let mut variances = Vec::with_capacity(k);
        for (idx, line) in lines {
            let parts: Vec<&str> = line.split(';').collect();
            if parts.len() != 3 {
                return Err(Error::parse(
                    idx + 1,
                    "component line needs three ';'-separated fields",
                ));
            }
            let alpha = parts[0]
                .trim()
                .parse::<F>()
                .map_err(|_| Error::parse(idx + 1, "bad mixing weight"))?;
            let mu = parse_list::<F>(parts[1], idx + 1)?;
            let var = parse_list::<F>(parts[2], idx + 1)?;
            if mu.len() != d || var.len() != d {
                return Err(Error::parse(
                    idx + 1,
                    format!("component dimension differs from d={d}"),
                ));
            }
            weights.push(alpha);
            means.push(mu);
            variances.push(var);
        }
        if weights.len() != k {
            return Err(Error::parse(
                0,
                format!("expected {k} components, found {}", weights.len()),
            ));
        }
        Self::new(weights, means, variances)
    }
}

/// Row-major point × component posterior table.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponsibilityMatrix<F> {
    k: usize,
    data: Vec<F>,
}

impl<F: Scalar> ResponsibilityMatrix<F> {
    pub fn new(k: usize, data: Vec<F>) -> Result<Self> {
        if k == 0 || data.len() % k != 0 {
            return Err(Error::config(
                "responsibility table is not a whole number of rows",
            ));
        }
        Ok(Self { k, data })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_points(&self) -> usize {
        self.data.len() / self.k
    }

    pub fn row(&self, i: usize) -> &[F] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    /// `Σ_i γ_ij` for each component.
    pub fn totals(&self) -> Vec<F> {
        let mut out = vec![F::zero(); self.k];
        for row in self.data.chunks(self.k) {
            for (o, &g) in out.iter_mut().zip(row) {
                *o += g;
            }
        }
        out
    }
}

fn check_points<F: Scalar, P: AsRef<[F]>>(points: &[P], d: usize) -> Result<()> {
    for p in points {
        if p.as_ref().len() != d {
            return Err(Error::Shape {
                what: "point dimension",
                expected: d,
                got: p.as_ref().len(),
            });
        }
    }
    Ok(())
}

/// Responsibilities together with the total data log-likelihood.
pub fn e_step_with_ll<F: Scalar, P: AsRef<[F]> + Sync>(
    gmm: &Gmm<F>,
    points: &[P],
) -> Result<(ResponsibilityMatrix<F>, F)> {
    check_points(points, gmm.dim())?;
    let k = gmm.k();
    let mut data = vec![F::zero(); points.len() * k];
    let row_fn = |(i, (x, row)): (usize, (&P, &mut [F]))| -> Result<F> {
        gmm.joint_log_densities(x.as_ref(), row);
        let norm = logsumexp(row);
        if !norm.is_finite() {
            return Err(Error::DegenerateDensity { point: i });
        }
        for g in row.iter_mut() {
            *g = (*g - norm).exp();
        }
        Ok(norm)
    };
    let norms: Vec<F> = if points.len() >= PAR_THRESHOLD {
        points
            .par_iter()
            .zip(data.par_chunks_mut(k))
            .enumerate()
            .map(row_fn)
            .collect::<Result<_>>()?
    } else {
        points
            .iter()
            .zip(data.chunks_mut(k))
            .enumerate()
            .map(row_fn)
            .collect::<Result<_>>()?
    };
    let ll = norms.into_iter().sum();
    Ok((ResponsibilityMatrix { k, data }, ll))
}

/// `γ_ij = α_j N(x_i|μ_j, Σ_j) / Σ_k α_k N(x_i|μ_k, Σ_k)`, in log space.
pub fn e_step<F: Scalar, P: AsRef<[F]> + Sync>(
    gmm: &Gmm<F>,
    points: &[P],
) -> Result<ResponsibilityMatrix<F>> {
    Ok(e_step_with_ll(gmm, points)?.0)
}

/// Per-coordinate population variance of the data, floored.
pub fn global_variance<F: Scalar, P: AsRef<[F]>>(points: &[P]) -> Vec<F> {
    let d = points.first().map_or(0, |p| p.as_ref().len());
    let n = F::from_usize_lossy(points.len().max(1));
    let mut mean = vec![F::zero(); d];
    for p in points {
        for (m, &x) in mean.iter_mut().zip(p.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![F::zero(); d];
    for p in points {
        for ((v, &m), &x) in var.iter_mut().zip(&mean).zip(p.as_ref()) {
            *v += (x - m) * (x - m);
        }
    }
    var.into_iter().map(|v| (v / n).max(floor())).collect()
}

#[derive(Debug, Clone)]
pub struct MStep<F> {
    pub gmm: Gmm<F>,
    /// Components that carried no responsibility and were re-seeded.
    pub reseeded: Vec<usize>,
}

/// Weighted means, mixing proportions and diagonal variances. An empty
/// component is moved to a uniformly chosen data point with the global data
/// variance.
pub fn m_step<F: Scalar, P: AsRef<[F]>, R: Rng + ?Sized>(
    points: &[P],
    resp: &ResponsibilityMatrix<F>,
    rng: &mut R,
) -> Result<MStep<F>> {
    let n = points.len();
    if resp.n_points() != n {
        return Err(Error::Shape {
            what: "responsibility rows",
            expected: n,
            got: resp.n_points(),
        });
    }
    if n == 0 {
        return Err(Error::config("cannot fit a mixture to zero points"));
    }
    let d = points[0].as_ref().len();
    check_points(points, d)?;
    let k = resp.k();
    let totals = resp.totals();
    let mut means = vec![vec![F::zero(); d]; k];
    for (i, p) in points.iter().enumerate() {
        for (j, &g) in resp.row(i).iter().enumerate() {
            if g == F::zero() {
                continue;
            }
            for (m, &x) in means[j].iter_mut().zip(p.as_ref()) {
                *m += g * x;
            }
        }
    }
    let mut variances = vec![vec![F::zero(); d]; k];
    let mut reseeded = Vec::new();
    for j in 0..k {
        if totals[j] < F::lit(EMPTY_COMPONENT) {
            reseeded.push(j);
            continue;
        }
        means[j].iter_mut().for_each(|m| *m /= totals[j]);
    }
    for (i, p) in points.iter().enumerate() {
        for (j, &g) in resp.row(i).iter().enumerate() {
            if g == F::zero() || reseeded.contains(&j) {
                continue;
            }
            for ((v, &m), &x) in variances[j].iter_mut().zip(&means[j]).zip(p.as_ref()) {
                *v += g * (x - m) * (x - m);
            }
        }
    }
    let nf = F::from_usize_lossy(n);
    let mut weights: Vec<F> = totals.iter().map(|&t| t / nf).collect();
    for j in 0..k {
        if !reseeded.contains(&j) {
            variances[j] = variances[j]
                .iter()
                .map(|&v| (v / totals[j]).max(floor()))
                .collect();
        }
    }
    if !reseeded.is_empty() {
        let global = global_variance(points);
        for &j in &reseeded {
            means[j] = points[rng.random_range(0..n)].as_ref().to_vec();
            variances[j] = global.clone();
            weights[j] = F::one() / nf;
        }
    }
    let total: F = weights.iter().copied().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(MStep {
        gmm: Gmm::new(weights, means, variances)?,
        reseeded,
    })
}

#[derive(Debug, Clone)]
pub enum GmmInit<F> {
    /// Start from existing parameters; `seed` drives component re-seeding.
    Warm { gmm: Gmm<F>, seed: u64 },
    /// Means at K distinct random points, global variance, uniform mixing.
    Cold { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct FitReport<F> {
    pub gmm: Gmm<F>,
    /// Total log-likelihood of the data under `gmm`.
    pub log_likelihood: F,
    /// Total log-likelihood before the first and after every M-step.
    pub history: Vec<F>,
    pub iterations: usize,
    pub converged: bool,
    /// `(iteration, component)` pairs that were re-seeded.
    pub reseeds: Vec<(usize, usize)>,
}

/// Cold-start parameters (see [`GmmInit::Cold`]).
pub fn cold_start<F: Scalar, P: AsRef<[F]>, R: Rng + ?Sized>(
    points: &[P],
    k: usize,
    rng: &mut R,
) -> Result<Gmm<F>> {
    if points.len() < k || k == 0 {
        return Err(Error::config(format!(
            "need at least K = {k} points, got {}",
            points.len()
        )));
    }
    let var = global_variance(points);
    let chosen = index::sample(rng, points.len(), k);
    let means = chosen.iter().map(|i| points[i].as_ref().to_vec()).collect();
    let w = F::one() / F::from_usize_lossy(k);
    Gmm::new(vec![w; k], means, vec![var; k])
}

/// EM until the mean per-point log-likelihood improves by less than `tol`
/// or `max_iter` M-steps have run.
pub fn fit<F: Scalar, P: AsRef<[F]> + Sync>(
    points: &[P],
    k: usize,
    init: GmmInit<F>,
    max_iter: usize,
    tol: F,
) -> Result<FitReport<F>> {
    if points.len() < k || k == 0 {
        return Err(Error::config(format!(
            "need at least K = {k} points, got {}",
            points.len()
        )));
    }
    let (mut gmm, mut rng) = match init {
        GmmInit::Warm { gmm, seed } => {
            if gmm.k() != k {
                return Err(Error::config(format!(
                    "warm start has {} components, expected {k}",
                    gmm.k()
                )));
            }
            (gmm, rng_from(seed))
        }
        GmmInit::Cold { seed } => {
            let mut rng = rng_from(seed);
            (cold_start(points, k, &mut rng)?, rng)
        }
    };
    let nf = F::from_usize_lossy(points.len());
    let (mut resp, mut ll) = e_step_with_ll(&gmm, points)?;
    let mut history = vec![ll];
    let mut reseeds = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for iter in 1..=max_iter {
        let step = m_step(points, &resp, &mut rng)?;
        for &j in &step.reseeded {
            log::warn!(
                "EM iteration {iter}: component {j} lost all responsibility and was re-seeded"
            );
            reseeds.push((iter, j));
        }
        let (new_resp, new_ll) = e_step_with_ll(&step.gmm, points)?;
        let improvement = (new_ll - ll) / nf;
        gmm = step.gmm;
        resp = new_resp;
        ll = new_ll;
        history.push(ll);
        iterations = iter;
        if step.reseeded.is_empty() && improvement < tol {
            converged = true;
            break;
        }
    }
    Ok(FitReport {
        gmm,
        log_likelihood: ll,
        history,
        iterations,
        converged,
        reseeds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_comp(mu: [f64; 2], var: [f64; 2]) -> Gmm<f64> {
        Gmm::new(
            vec![0.5, 0.5],
            vec![vec![mu[0]], vec![mu[1]]],
            vec![vec![var[0]], vec![var[1]]],
        )
        .unwrap()
    }

    fn scalar_normal(x: f64, mu: f64, var: f64) -> f64 {
        (-(x - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
    }

    #[test]
    fn validation() {
        assert!(Gmm::<f64>::new(
            vec![0.6, 0.6],
            vec![vec![0.0], vec![1.0]],
            vec![vec![1.0], vec![1.0]]
        )
        .is_err());
        assert!(Gmm::<f64>::new(vec![1.0], vec![vec![0.0]], vec![vec![1e-9]]).is_err());
        assert!(Gmm::<f64>::new(vec![], vec![], vec![]).is_err());
    }

    #[test]
    fn single_component_responsibility_is_one() {
        let g = Gmm::isotropic(vec![0.0, 1.0], 2.0).unwrap();
        let pts = vec![vec![3.0, 4.0], vec![-1.0, 0.0]];
        let r = e_step(&g, &pts).unwrap();
        assert_eq!(r.row(0), &[1.0]);
        assert_eq!(r.row(1), &[1.0]);
    }

    #[test]
    fn symmetric_point_splits_evenly() {
        let g = two_comp([-2.0, 2.0], [1.0, 1.0]);
        let r = e_step(&g, &[vec![0.0]]).unwrap();
        assert!((r.row(0)[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn responsibilities_match_scalar_oracle() {
        let g = two_comp([0.0, 4.0], [1.0, 1.0]);
        let r = e_step(&g, &[vec![1.0]]).unwrap();
        let a = 0.5 * scalar_normal(1.0, 0.0, 1.0);
        let b = 0.5 * scalar_normal(1.0, 4.0, 1.0);
        assert!((r.row(0)[0] - a / (a + b)).abs() < 1e-12);
        assert!((r.row(0)[1] - b / (a + b)).abs() < 1e-12);
    }

    #[test]
    fn far_points_do_not_underflow() {
        let g = two_comp([0.0, 4.0], [1e-6, 1e-6]);
        let r = e_step(&g, &[vec![1e4]]).unwrap();
        assert!((r.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(matches!(
            e_step(&g, &[vec![f64::NAN]]),
            Err(Error::DegenerateDensity { point: 0 })
        ));
    }

    #[test]
    fn m_step_population_moments() {
        let pts = vec![vec![-1.0], vec![1.0]];
        let resp = ResponsibilityMatrix::new(1, vec![1.0, 1.0]).unwrap();
        let out = m_step(&pts, &resp, &mut rng_from(0)).unwrap();
        assert_eq!(out.gmm.means()[0], vec![0.0]);
        assert_eq!(out.gmm.variances()[0], vec![1.0]);
        assert_eq!(out.gmm.weights(), &[1.0]);
    }

    #[test]
    fn m_step_weighted_oracle() {
        let pts = vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![5.0, 3.0]];
        let gam = [[0.9, 0.1], [0.5, 0.5], [0.2, 0.8]];
        let resp = ResponsibilityMatrix::new(2, gam.iter().flatten().copied().collect()).unwrap();
        let out = m_step(&pts, &resp, &mut rng_from(0)).unwrap();
        for j in 0..2 {
            let tot: f64 = (0..3).map(|i| gam[i][j]).sum();
            assert!((out.gmm.weights()[j] - tot / 3.0).abs() < 1e-12);
            for c in 0..2 {
                let mut mu = 0.0;
                for i in 0..3 {
                    mu += gam[i][j] * pts[i][c];
                }
                mu /= tot;
                let mut var = 0.0;
                for i in 0..3 {
                    var += gam[i][j] * (pts[i][c] - mu).powi(2);
                }
                var /= tot;
                assert!((out.gmm.means()[j][c] - mu).abs() < 1e-12);
                assert!((out.gmm.variances()[j][c] - var).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn m_step_floors_and_reseeds() {
        let pts = vec![vec![2.0], vec![2.0], vec![4.0]];
        let resp = ResponsibilityMatrix::new(2, vec![1.0, 0.0, 1.0, 0.0, 1.0, 0.0]).unwrap();
        let out = m_step(&pts, &resp, &mut rng_from(3)).unwrap();
        assert_eq!(out.reseeded, vec![1]);
        assert!(pts.iter().any(|p| p == &out.gmm.means()[1]));
        assert!((out.gmm.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let dup = vec![vec![1.0], vec![1.0]];
        let one = ResponsibilityMatrix::new(1, vec![1.0, 1.0]).unwrap();
        let out = m_step(&dup, &one, &mut rng_from(0)).unwrap();
        assert_eq!(out.gmm.variances()[0][0], VARIANCE_FLOOR);
    }

    #[test]
    fn k1_fit_is_closed_form() {
        let pts: Vec<Vec<f64>> = (0..20)
            .map(|i| vec![i as f64 * 0.5, (i * i) as f64 % 7.0])
            .collect();
        let rep = fit(&pts, 1, GmmInit::Cold { seed: 1 }, 1, 1e-9).unwrap();
        let var = global_variance(&pts);
        let mean: Vec<f64> = (0..2)
            .map(|c| pts.iter().map(|p| p[c]).sum::<f64>() / 20.0)
            .collect();
        for c in 0..2 {
            assert!((rep.gmm.means()[0][c] - mean[c]).abs() < 1e-12);
            assert!((rep.gmm.variances()[0][c] - var[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn log_pdf_values() {
        let g = Gmm::isotropic(vec![0.0], 1.0).unwrap();
        assert!(
            (g.log_pdf(&[0.0]).unwrap() + 0.5 * (2.0 * std::f64::consts::PI).ln()).abs() < 1e-12
        );
        let m = two_comp([-1.5, 1.5], [0.7, 0.7]);
        for &x in &[0.0, 0.3, 2.0, -4.0] {
            assert!((m.log_pdf(&[x]).unwrap() - m.log_pdf(&[-x]).unwrap()).abs() < 1e-12);
            for k in 0..2 {
                assert!(m.log_pdf(&[x]).unwrap() >= 0.5f64.ln() + m.component_log_density(k, &[x]));
            }
        }
        assert!(g.log_pdf(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn canonical_sort_and_flatten() {
        let g = Gmm::new(
            vec![0.25, 0.75],
            vec![vec![3.0, 0.0], vec![-1.0, 2.0]],
            vec![vec![1.0, 2.0], vec![3.0, 4.0]],
        )
        .unwrap();
        let c = g.canonical();
        assert_eq!(c.means()[0], vec![-1.0, 2.0]);
        assert_eq!(
            c.flatten(),
            vec![0.75, 0.25, -1.0, 2.0, 3.0, 0.0, 3.0, 4.0, 1.0, 2.0]
        );
        assert_eq!(g.mean(), vec![0.25 * 3.0 - 0.75, 1.5]);
    }

    #[test]
    fn text_round_trip() {
        let g = Gmm::new(
            vec![0.1, 0.2, 0.7],
            vec![vec![1.0, -0.1], vec![3.3, 1e-8], vec![0.0, 5.5]],
            vec![vec![0.5, 0.25], vec![1.0, 2.0], vec![1e-6, 3.0]],
        )
        .unwrap();
        assert_eq!(Gmm::<f64>::from_text(&g.to_text()).unwrap(), g);
        assert!(Gmm::<f64>::from_text("gmm k=2 d=1\n1; 0; 1\n").is_err());
    }

    #[test]
    fn tight_component_samples_near_mean() {
        let g = Gmm::isotropic(vec![2.0, -3.0], VARIANCE_FLOOR).unwrap();
        for w in g.sample(200, 4) {
            assert!((w.0[0] - 2.0).abs() < 0.01 && (w.0[1] + 3.0).abs() < 0.01);
        }
        assert_eq!(g.sample(5, 9), g.sample(5, 9));
    }

    #[test]
    fn works_in_f32() {
        let pts: Vec<Vec<f32>> = (0..200)
            .map(|i| vec![(if i % 2 == 0 { -5.0 } else { 5.0 }) + (i % 7) as f32 * 0.1])
            .collect();
        let init = Gmm::new(
            vec![0.5, 0.5],
            vec![vec![-1.0], vec![1.0]],
            vec![vec![1.0], vec![1.0]],
        )
        .unwrap();
        let rep = fit(&pts, 2, GmmInit::Warm { gmm: init, seed: 2 }, 100, 1e-6).unwrap();
        let c = rep.gmm.canonical();
        assert!((c.means()[0][0] + 4.7).abs() < 0.1);
        assert!((c.means()[1][0] - 5.3).abs() < 0.1);
    }
}
