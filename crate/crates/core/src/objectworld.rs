//! Objectworld: an N×N grid with coloured objects, a distance-based ground
//! truth reward, continuous and binarised distance features, and expert
//! demonstrations drawn from the optimal policy.

use rand::seq::index;
use rand::Rng;

use crate::mdp::{self, Policy, TabularMdp, Transitions};
use crate::util::rng_from;
use crate::{Error, Result, Scalar};

/// Up, down, left, right, stay.
pub const N_ACTIONS: usize = 5;
pub const ACTION_NAMES: [&str; N_ACTIONS] = ["up", "down", "left", "right", "stay"];

/// Colour index of the "red" primary.
pub const RED: usize = 0;
/// Colour index of the "blue" primary.
pub const BLUE: usize = 1;
/// L1 radius around outer red objects.
pub const RED_RADIUS: usize = 3;
/// L1 radius around outer blue objects.
pub const BLUE_RADIUS: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Object {
    pub cell: usize,
    pub inner: usize,
    pub outer: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectworldParams<F> {
    pub grid_size: usize,
    pub n_objects: usize,
    pub n_colors: usize,
    pub wind: F,
    pub discount: F,
}

impl<F: Scalar> Default for ObjectworldParams<F> {
    fn default() -> Self {
        Self {
            grid_size: 10,
            n_objects: 25,
            n_colors: 2,
            wind: F::lit(0.3),
            discount: F::lit(0.9),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectworldInstance<F> {
    pub grid_size: usize,
    pub n_colors: usize,
    pub objects: Vec<Object>,
    pub wind: F,
    pub discount: F,
    pub seed: u64,
}

/// Dense row-major state × feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<F> {
    n_rows: usize,
    n_cols: usize,
    data: Vec<F>,
}

impl<F: Scalar> FeatureMatrix<F> {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<F>) -> Result<Self> {
        if data.len() != n_rows * n_cols {
            return Err(Error::Shape {
                what: "feature matrix data",
                expected: n_rows * n_cols,
                got: data.len(),
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            data,
        })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![F::zero(); n_rows * n_cols],
        }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[F] {
        &self.data[s * self.n_cols..(s + 1) * self.n_cols]
    }

    #[inline]
    pub fn get(&self, s: usize, j: usize) -> F {
        self.data[s * self.n_cols + j]
    }

    pub fn column(&self, j: usize) -> Vec<F> {
        (0..self.n_rows).map(|s| self.get(s, j)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for s in 0..self.n_rows {
            out.push_str(&crate::util::fmt_list(self.row(s)));
            out.push('\n');
        }
        out
    }
}

pub type Trajectory = Vec<(usize, usize)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoSet {
    pub trajectories: Vec<Trajectory>,
    pub trajectory_length: usize,
}

impl DemoSet {
    /// Checks that every trajectory has the same non-zero length and valid indices.
    pub fn new(trajectories: Vec<Trajectory>, n_states: usize, n_actions: usize) -> Result<Self> {
        let trajectory_length = trajectories.first().map(Vec::len).unwrap_or(0);
        if trajectory_length == 0 {
            return Err(Error::config("demonstrations must be non-empty"));
        }
        for (i, traj) in trajectories.iter().enumerate() {
            if traj.len() != trajectory_length {
                return Err(Error::config(format!(
                    "trajectory {i} has length {} instead of {trajectory_length}",
                    traj.len()
                )));
            }
            if traj.iter().any(|&(s, a)| s >= n_states || a >= n_actions) {
                return Err(Error::config(format!(
                    "trajectory {i} has an out-of-range step"
                )));
            }
        }
        Ok(Self {
            trajectories,
            trajectory_length,
        })
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    /// The demonstrations at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> DemoSet {
        DemoSet {
            trajectories: indices
                .iter()
                .map(|&i| self.trajectories[i].clone())
                .collect(),
            trajectory_length: self.trajectory_length,
        }
    }
}

pub fn generate<F: Scalar>(
    params: &ObjectworldParams<F>,
    seed: u64,
) -> Result<ObjectworldInstance<F>> {
    let n = params.grid_size;
    if n == 0 {
        return Err(Error::config("grid_size must be positive"));
    }
    if params.n_colors < 2 {
        return Err(Error::config("objectworld needs at least two colours"));
    }
    if params.n_objects > n * n {
        return Err(Error::config(format!(
            "{} objects do not fit on a {n}×{n} grid",
            params.n_objects
        )));
    }
    if !(params.wind >= F::zero() && params.wind <= F::one()) {
        return Err(Error::config(format!(
            "wind {} outside [0, 1]",
            params.wind
        )));
    }
    if !(params.discount >= F::zero() && params.discount < F::one()) {
        return Err(Error::config(format!(
            "discount {} outside [0, 1)",
            params.discount
        )));
    }
    let mut rng = rng_from(seed);
    let cells = index::sample(&mut rng, n * n, params.n_objects).into_vec();
    let objects = cells
        .into_iter()
        .map(|cell| Object {
            cell,
            inner: rng.random_range(0..params.n_colors),
            outer: rng.random_range(0..params.n_colors),
        })
        .collect();
    Ok(ObjectworldInstance {
        grid_size: n,
        n_colors: params.n_colors,
        objects,
        wind: params.wind,
        discount: params.discount,
        seed,
    })
}

impl<F: Scalar> ObjectworldInstance<F> {
    pub fn n_states(&self) -> usize {
        self.grid_size * self.grid_size
    }

    /// `(x, y)` coordinates of a cell; cells are numbered row-major.
    #[inline]
    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.grid_size, cell / self.grid_size)
    }

    /// Deterministic effect of an action; moves off the edge stay in place.
    pub fn step(&self, cell: usize, action: usize) -> usize {
        let n = self.grid_size;
        let (x, y) = self.coords(cell);
        let (nx, ny) = match action {
            0 if y > 0 => (x, y - 1),
            1 if y + 1 < n => (x, y + 1),
            2 if x > 0 => (x - 1, y),
            3 if x + 1 < n => (x + 1, y),
            _ => (x, y),
        };
        ny * n + nx
    }

    /// With probability `1 − wind` the intended move happens; otherwise one of
    /// the five moves is chosen uniformly.
    pub fn transition_model(&self) -> Transitions<F> {
        let n_states = self.n_states();
        let keep = F::one() - self.wind;
        let slip = self.wind / F::from_usize_lossy(N_ACTIONS);
        let mut rows = Vec::with_capacity(n_states * N_ACTIONS);
        for s in 0..n_states {
            for a in 0..N_ACTIONS {
                let mut row: Vec<(usize, F)> = Vec::with_capacity(N_ACTIONS);
                let mut add = |next: usize, p: F| match row.iter_mut().find(|(c, _)| *c == next) {
                    Some(slot) => slot.1 += p,
                    None => row.push((next, p)),
                };
                add(self.step(s, a), keep);
                for other in 0..N_ACTIONS {
                    add(self.step(s, other), slip);
                }
                row.retain(|&(_, p)| p > F::zero());
                row.sort_by_key(|&(c, _)| c);
                rows.push(row);
            }
        }
        Transitions::new(n_states, N_ACTIONS, rows).expect("objectworld rows are stochastic")
    }

    fn l1(&self, a: usize, b: usize) -> usize {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        ax.abs_diff(bx) + ay.abs_diff(by)
    }

    fn euclid(&self, a: usize, b: usize) -> F {
        let (ax, ay) = self.coords(a);
        let (bx, by) = self.coords(b);
        let dx = F::from_usize_lossy(ax.abs_diff(bx));
        let dy = F::from_usize_lossy(ay.abs_diff(by));
        (dx * dx + dy * dy).sqrt()
    }

    /// +1 within L1 distance 3 of an outer red object and 2 of an outer blue
    /// one, −1 within 3 of an outer red object only, 0 otherwise.
    pub fn true_reward(&self) -> Vec<F> {
        let near = |s: usize, color: usize, radius: usize| {
            self.objects
                .iter()
                .any(|o| o.outer == color && self.l1(s, o.cell) <= radius)
        };
        (0..self.n_states())
            .map(|s| {
                if near(s, RED, RED_RADIUS) {
                    if near(s, BLUE, BLUE_RADIUS) {
                        F::one()
                    } else {
                        -F::one()
                    }
                } else {
                    F::zero()
                }
            })
            .collect()
    }

    /// Distance reported when no object of a colour class exists.
    pub fn missing_distance(&self) -> F {
        F::from_usize_lossy(self.grid_size) * F::lit(2.0).sqrt()
    }

    /// `n_states × 2C`: Euclidean distance to the nearest inner and outer
    /// object of each colour, ordered (inner 0, outer 0, inner 1, outer 1, …).
    pub fn features_continuous(&self) -> FeatureMatrix<F> {
        let cols = 2 * self.n_colors;
        let mut m = FeatureMatrix::zeros(self.n_states(), cols);
        for s in 0..self.n_states() {
            for color in 0..self.n_colors {
                let nearest = |outer: bool| {
                    self.objects
                        .iter()
                        .filter(|o| {
                            if outer {
                                o.outer == color
                            } else {
                                o.inner == color
                            }
                        })
                        .map(|o| self.euclid(s, o.cell))
                        .fold(None, |best: Option<F>, d| {
                            Some(best.map_or(d, |b| b.min(d)))
                        })
                        .unwrap_or_else(|| self.missing_distance())
                };
                m.data[s * cols + 2 * color] = nearest(false);
                m.data[s * cols + 2 * color + 1] = nearest(true);
            }
        }
        m
    }

    /// `n_states × 2C·N` binarisation of the continuous features: bit `d`
    /// (d = 1..N) of each block is set iff the distance is below `d`.
    pub fn features_discrete(&self) -> FeatureMatrix<F> {
        let cont = self.features_continuous();
        let n = self.grid_size;
        let cols = cont.n_cols() * n;
        let mut m = FeatureMatrix::zeros(self.n_states(), cols);
        for s in 0..self.n_states() {
            for block in 0..cont.n_cols() {
                let dist = cont.get(s, block);
                for d in 1..=n {
                    if dist < F::from_usize_lossy(d) {
                        m.data[s * cols + block * n + d - 1] = F::one();
                    }
                }
            }
        }
        m
    }

    /// MDP with the objectworld dynamics and the ground-truth reward.
    pub fn mdp(&self) -> TabularMdp<F> {
        TabularMdp::new(self.transition_model(), self.true_reward(), self.discount)
            .expect("objectworld MDP is valid")
    }

    /// Self-describing text form: a header line then one `cell inner outer` line per object.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "objectworld grid_size={} n_colors={} wind={} discount={} seed={}\n",
            self.grid_size, self.n_colors, self.wind, self.discount, self.seed
        );
        for o in &self.objects {
            out.push_str(&format!("{} {} {}\n", o.cell, o.inner, o.outer));
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
            .ok_or_else(|| Error::parse(1, "empty instance file"))?;
        let mut toks = header.split_whitespace();
        if toks.next() != Some("objectworld") {
            return Err(Error::parse(1, "missing objectworld header"));
        }
        let (mut grid, mut colors, mut wind, mut discount, mut seed) =
            (None, None, None, None, None);
        for tok in toks {
            let (key, value) = tok
                .split_once('=')
                .ok_or_else(|| Error::parse(1, format!("expected key=value, got {tok:?}")))?;
            let bad = || Error::parse(1, format!("bad value for {key}: {value:?}"));
            match key {
                "grid_size" => grid = Some(value.parse::<usize>().map_err(|_| bad())?),
                "n_colors" => colors = Some(value.parse::<usize>().map_err(|_| bad())?),
                "wind" => wind = Some(value.parse::<F>().map_err(|_| bad())?),
                "discount" => discount = Some(value.parse::<F>().map_err(|_| bad())?),
                "seed" => seed = Some(value.parse::<u64>().map_err(|_| bad())?),
                _ => return Err(Error::parse(1, format!("unknown header key {key:?}"))),
            }
        }
        let missing = |k: &str| Error::parse(1, format!("header lacks {k}"));
        let grid_size = grid.ok_or_else(|| missing("grid_size"))?;
        let n_colors = colors.ok_or_else(|| missing("n_colors"))?;
        let mut objects: Vec<Object> = Vec::new();
        for (idx, line) in lines {
            let nums: Vec<usize> = line
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(idx + 1, "object line must hold three integers"))?;
            let [cell, inner, outer] = nums[..] else {
                return Err(Error::parse(
                    idx + 1,
                    "object line must hold three integers",
                ));
            };
            if cell >= grid_size * grid_size || inner >= n_colors || outer >= n_colors {
                return Err(Error::parse(idx + 1, "object out of range"));
            }
            if objects.iter().any(|o| o.cell == cell) {
                return Err(Error::parse(
                    idx + 1,
                    format!("duplicate object cell {cell}"),
                ));
            }
            objects.push(Object { cell, inner, outer });
        }
        Ok(Self {
            grid_size,
            n_colors,
            objects,
            wind: wind.ok_or_else(|| missing("wind"))?,
            discount: discount.ok_or_else(|| missing("discount"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
        })
    }
}

/// Rolls out `policy` from uniformly drawn start states.
pub fn rollout_demos<F: Scalar, R: Rng>(
    mdp: &TabularMdp<F>,
    policy: &Policy<F>,
    n_demos: usize,
    length: usize,
    rng: &mut R,
) -> Result<DemoSet> {
    if length == 0 || n_demos == 0 {
        return Err(Error::config(
            "need at least one demonstration of length ≥ 1",
        ));
    }
    policy.validate_for(mdp)?;
    let mut trajectories = Vec::with_capacity(n_demos);
    for _ in 0..n_demos {
        let mut s = rng.random_range(0..mdp.n_states());
        let mut traj = Vec::with_capacity(length);
        for step in 0..length {
            let a = match policy {
                Policy::Deterministic(acts) => acts[s],
                Policy::Stochastic(p) => {
                    let u = F::lit(rng.random::<f64>());
                    let mut acc = F::zero();
                    let row = p.row(s);
                    row.iter()
                        .position(|&pa| {
                            acc += pa;
                            u < acc
                        })
                        .unwrap_or(row.len() - 1)
                }
            };
            traj.push((s, a));
            if step + 1 < length {
                s = mdp.sample_next(s, a, rng);
            }
        }
        trajectories.push(traj);
    }
    DemoSet::new(trajectories, mdp.n_states(), mdp.n_actions())
}

/// Expert demonstrations following the optimal policy of the true reward.
pub fn generate_demos<F: Scalar>(
    instance: &ObjectworldInstance<F>,
    n_demos: usize,
    length: usize,
    seed: u64,
) -> Result<DemoSet> {
    let mdp = instance.mdp();
    let (_, policy) = mdp::value_iteration_with(&mdp, &mdp::DpOptions::default())?;
    rollout_demos(&mdp, &policy, n_demos, length, &mut rng_from(seed))
}
