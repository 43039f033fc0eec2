//! Trajectories that satisfy the coordinate-wise condition `ẋ_i (Ax)_i <= 0`
//! by construction, and a randomized search for unusual limit behaviour.
//!
//! Every policy moves coordinate `i` against the sign of `g_i = (Ax)_i` with a
//! speed capped at `min(rate, |g_i| / (n·A_ii·dt))`. The cap keeps each Euler
//! step within a damped Jacobi step, so the discrete energy never increases
//! and the sign condition holds exactly at every sample.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::energy::{Classification, QuadraticEnergy};
use crate::error::{Error, Result};
use crate::graph::SensingGraph;
use crate::simulate::{detect, Status, Trajectory};

pub const DEFAULT_TAIL_FRACTION: f64 = 0.25;
/// Cluster radius as a multiple of the detection tolerance.
pub const RADIUS_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PolicyKind {
    GradientOpposed,
    RandomFeasible,
    AxisSwitching,
    Stall,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 4] = [
        Self::GradientOpposed,
        Self::RandomFeasible,
        Self::AxisSwitching,
        Self::Stall,
    ];
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GradientOpposed => "gradient-opposed",
            Self::RandomFeasible => "random-feasible",
            Self::AxisSwitching => "axis-switching",
            Self::Stall => "stall",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthesisPolicy {
    pub kind: PolicyKind,
    /// Maximum speed per coordinate.
    pub rate: f64,
    /// Random-feasible: seed of the speed multipliers.
    pub seed: u64,
    /// Axis-switching: length of each interval.
    pub interval: f64,
    /// Axis-switching: coordinates are split into this many groups by index
    /// modulo `groups`; one group moves per interval.
    pub groups: usize,
    /// Stall: time after which all velocities are zero.
    pub stall_time: f64,
}

impl SynthesisPolicy {
    fn base(kind: PolicyKind, rate: f64) -> Self {
        Self {
            kind,
            rate,
            seed: 0,
            interval: 1.0,
            groups: 2,
            stall_time: 0.0,
        }
    }

    pub fn gradient_opposed(rate: f64) -> Self {
        Self::base(PolicyKind::GradientOpposed, rate)
    }

    pub fn random_feasible(rate: f64, seed: u64) -> Self {
        Self {
            seed,
            ..Self::base(PolicyKind::RandomFeasible, rate)
        }
    }

    pub fn axis_switching(rate: f64, interval: f64, groups: usize) -> Self {
        Self {
            interval,
            groups,
            ..Self::base(PolicyKind::AxisSwitching, rate)
        }
    }

    pub fn stall(rate: f64, stall_time: f64) -> Self {
        Self {
            stall_time,
            ..Self::base(PolicyKind::Stall, rate)
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rate must be positive, got {}",
                self.rate
            )));
        }
        if self.kind == PolicyKind::AxisSwitching && !(self.interval > 0.0 && self.groups >= 1) {
            return Err(Error::InvalidParameter(
                "axis switching needs a positive interval and at least one group".into(),
            ));
        }
        Ok(())
    }
}

/// Euler trajectory of a sign-feasible policy on `½xᵀAx`.
pub fn synthesize(
    energy: &QuadraticEnergy,
    x0: &DVector<f64>,
    policy: &SynthesisPolicy,
    dt: f64,
    horizon: f64,
) -> Result<Trajectory> {
    if energy.classification() == Classification::Indefinite {
        return Err(Error::Indefinite);
    }
    policy.validate()?;
    if !(dt > 0.0 && horizon >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and horizon >= 0, got dt {dt}, horizon {horizon}"
        )));
    }
    let a = energy.matrix();
    let n = energy.dim();
    if x0.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: x0.len(),
        });
    }
    let steps = (horizon / dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(policy.seed);

    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut controls = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    let mut x = x0.clone();
    for k in 0..=steps {
        let t = k as f64 * dt;
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::Diverged { step: k, time: t });
        }
        let g = a * &x;
        let active_group = (t / policy.interval).floor() as usize % policy.groups.max(1);
        let mut v = DVector::zeros(n);
        for i in 0..n {
            let aii = a[(i, i)];
            if g[i] == 0.0 || aii <= 0.0 {
                continue;
            }
            let speed = policy.rate.min(g[i].abs() / (n as f64 * aii * dt));
            let factor = match policy.kind {
                PolicyKind::GradientOpposed => 1.0,
                PolicyKind::RandomFeasible => rng.gen::<f64>(),
                PolicyKind::AxisSwitching => f64::from(u8::from(i % policy.groups == active_group)),
                PolicyKind::Stall => f64::from(u8::from(t < policy.stall_time)),
            };
            v[i] = -g[i].signum() * speed * factor;
            if v[i] * g[i] > 0.0 {
                return Err(Error::SignInvariant { step: k, index: i });
            }
        }
        times.push(t);
        values.push(0.5 * x.dot(&g));
        let next = &x + &v * dt;
        states.push(x);
        controls.push(v);
        x = next;
    }
    Ok(Trajectory {
        times,
        states,
        controls: Some(controls),
        energy: values,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AccumulationEstimate {
    /// Ordered by decreasing count.
    pub centers: Vec<DVector<f64>>,
    /// Largest distance from each center to one of its samples.
    pub radii: Vec<f64>,
    pub counts: Vec<usize>,
}

impl AccumulationEstimate {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }
}

/// Greedy clustering of the last `tail_fraction` of the samples: each sample
/// joins the first center within `radius`, or becomes a new center.
pub fn estimate_accumulation(
    traj: &Trajectory,
    tail_fraction: f64,
    radius: f64,
) -> Result<AccumulationEstimate> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail fraction must lie in (0, 1], got {tail_fraction}"
        )));
    }
    let take = (traj.len() as f64 * tail_fraction).ceil() as usize;
    if take == 0 {
        return Err(Error::TooFewSamples { needed: 1, have: 0 });
    }
    let tail = &traj.states[traj.len() - take..];

    let mut clusters: Vec<(DVector<f64>, f64, usize)> = Vec::new();
    for x in tail {
        match clusters.iter_mut().find(|(c, _, _)| (x - c).norm() <= radius) {
            Some((c, r, count)) => {
                *r = r.max((x - &*c).norm());
                *count += 1;
            }
            None => clusters.push((x.clone(), 0.0, 1)),
        }
    }
    clusters.sort_by_key(|c| std::cmp::Reverse(c.2));
    Ok(AccumulationEstimate {
        centers: clusters.iter().map(|c| c.0.clone()).collect(),
        radii: clusters.iter().map(|c| c.1).collect(),
        counts: clusters.iter().map(|c| c.2).collect(),
    })
}

/// Distance from `point` to `ker A`.
pub fn kernel_distance(energy: &QuadraticEnergy, point: &DVector<f64>) -> Result<f64> {
    energy.kernel_distance(point)
}

fn uniform_matrix(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0))
}

fn orthonormal_completion(first: &DVector<f64>, rng: &mut impl Rng) -> DMatrix<f64> {
    let n = first.len();
    let mut m = uniform_matrix(n, rng);
    m.set_column(0, first);
    m.qr().q()
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// `QΛQᵀ` with a random orthogonal `Q` and eigenvalues in `[0.2, 2]`.
pub fn random_positive_definite(n: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let q = uniform_matrix(n, rng).qr().q();
    let lambda = DVector::from_fn(n, |_, _| rng.gen_range(0.2..2.0));
    symmetrize(&q * DMatrix::from_diagonal(&lambda) * q.transpose())
}

/// Random PSD matrix of rank `n - 1` whose kernel is spanned by a vector
/// with no zero entries (`zero_free`) or with between 1 and `n - 1` zeros.
/// Returns the matrix and the kernel vector.
pub fn random_psd_with_kernel(
    n: usize,
    zero_free: bool,
    rng: &mut impl Rng,
) -> (DMatrix<f64>, DVector<f64>) {
    let mut v = DVector::from_fn(n, |_, _| {
        let s = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        s * rng.gen_range(0.2..1.0)
    });
    if !zero_free && n >= 2 {
        let zeros = rng.gen_range(1..n);
        let mut idx: Vec<usize> = (0..n).collect();
        for k in 0..zeros {
            let pick = rng.gen_range(k..n);
            idx.swap(k, pick);
            v[idx[k]] = 0.0;
        }
    }
    v /= v.norm();
    let q = orthonormal_completion(&v, rng);
    let mut a = DMatrix::zeros(n, n);
    for k in 1..n {
        let col = q.column(k);
        a += col * col.transpose() * rng.gen_range(0.2..2.0);
    }
    (symmetrize(a), v)
}

/// Connected graph: a random spanning tree plus extra edges with
/// probability 0.3, weights in `[0.5, 2]`.
pub fn random_connected_graph(n: usize, rng: &mut impl Rng) -> SensingGraph {
    let mut triples = Vec::new();
    for b in 1..n {
        let a = rng.gen_range(0..b);
        triples.push((a, b, rng.gen_range(0.5..2.0)));
    }
    for a in 0..n {
        for b in a + 1..n {
            if !triples.iter().any(|&(x, y, _)| (x, y) == (a, b)) && rng.gen_bool(0.3) {
                triples.push((a, b, rng.gen_range(0.5..2.0)));
            }
        }
    }
    SensingGraph::with_weights(n, triples).expect("generated graph is well formed")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MatrixFamily {
    PositiveDefinite,
    PsdZeroFreeKernel,
    PsdKernelWithZeros,
    Laplacian,
}

impl fmt::Display for MatrixFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PositiveDefinite => "positive-definite",
            Self::PsdZeroFreeKernel => "psd-zero-free-kernel",
            Self::PsdKernelWithZeros => "psd-kernel-with-zeros",
            Self::Laplacian => "laplacian",
        })
    }
}

impl FromStr for MatrixFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "positive-definite" => Ok(Self::PositiveDefinite),
            "psd-zero-free-kernel" => Ok(Self::PsdZeroFreeKernel),
            "psd-kernel-with-zeros" => Ok(Self::PsdKernelWithZeros),
            "laplacian" => Ok(Self::Laplacian),
            other => Err(Error::Parse(format!("unknown matrix family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Outcome {
    ConvergedInKernel,
    ConvergedOffKernel,
    MultiCluster,
    Diverging,
    Undecided,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::ConvergedInKernel => "converged-in-kernel",
            Self::ConvergedOffKernel => "converged-off-kernel",
            Self::MultiCluster => "multi-cluster",
            Self::Diverging => "diverging",
            Self::Undecided => "undecided",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchConfig {
    pub family: MatrixFamily,
    pub trials: usize,
    pub seed: u64,
    /// Inclusive range of dimensions.
    pub dims: (usize, usize),
    /// Policies drawn uniformly per trial.
    pub policies: Vec<PolicyKind>,
    pub rate: f64,
    pub dt: f64,
    pub horizon: f64,
    pub window: f64,
    pub tol: f64,
    pub tail_fraction: f64,
    /// Number of non-trivial trajectories kept for replay.
    pub keep: usize,
}

impl SearchConfig {
    pub fn new(family: MatrixFamily, trials: usize, seed: u64) -> Self {
        Self {
            family,
            trials,
            seed,
            dims: (2, 8),
            policies: PolicyKind::ALL.to_vec(),
            rate: 1.0,
            dt: 1e-2,
            horizon: 100.0,
            window: 10.0,
            tol: 1e-3,
            tail_fraction: DEFAULT_TAIL_FRACTION,
            keep: 5,
        }
    }

    pub fn radius(&self) -> f64 {
        RADIUS_FACTOR * self.tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialSummary {
    pub index: usize,
    pub n: usize,
    pub policy: PolicyKind,
    pub outcome: Outcome,
    pub status: Status,
    pub clusters: usize,
    /// Largest distance from a cluster center to `ker A`.
    pub kernel_distance: f64,
    /// Largest `ẋ_i (Ax)_i` over the trajectory.
    pub sign_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeptTrial {
    pub index: usize,
    pub matrix: DMatrix<f64>,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchReport {
    pub family: MatrixFamily,
    pub tallies: BTreeMap<Outcome, usize>,
    pub trials: Vec<TrialSummary>,
    pub kept: Vec<KeptTrial>,
    /// Observations that contradict the theory; each demands investigation.
    pub violations: Vec<String>,
}

impl SearchReport {
    pub fn count(&self, outcome: Outcome) -> usize {
        self.tallies.get(&outcome).copied().unwrap_or(0)
    }
}

struct TrialResult {
    summary: TrialSummary,
    matrix: DMatrix<f64>,
    trajectory: Option<Trajectory>,
    violations: Vec<String>,
}

fn run_trial(cfg: &SearchConfig, index: usize) -> Result<TrialResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index as u64);
    let n = rng.gen_range(cfg.dims.0..=cfg.dims.1);
    let mut graph = None;
    let matrix = match cfg.family {
        MatrixFamily::PositiveDefinite => random_positive_definite(n, &mut rng),
        MatrixFamily::PsdZeroFreeKernel => random_psd_with_kernel(n, true, &mut rng).0,
        MatrixFamily::PsdKernelWithZeros => random_psd_with_kernel(n, false, &mut rng).0,
        MatrixFamily::Laplacian => {
            let g = random_connected_graph(n, &mut rng);
            let l = g.laplacian();
            graph = Some(g);
            l
        }
    };
    let kind = cfg.policies[rng.gen_range(0..cfg.policies.len())];
    let policy = SynthesisPolicy {
        seed: rng.gen(),
        interval: rng.gen_range(0.5..3.0),
        groups: rng.gen_range(1..=n.max(2)),
        stall_time: rng.gen_range(0.0..cfg.horizon / 4.0),
        ..SynthesisPolicy::base(kind, cfg.rate)
    };
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-5.0..5.0));
    let energy = QuadraticEnergy::new(matrix.clone())?;
    let mut violations = Vec::new();

    let trajectory = match synthesize(&energy, &x0, &policy, cfg.dt, cfg.horizon) {
        Ok(t) => t,
        Err(Error::SignInvariant { step, index: i }) => {
            violations.push(format!(
                "trial {index}: policy {kind} violated the sign condition at step {step}, coordinate {}",
                i + 1
            ));
            return Ok(TrialResult {
                summary: TrialSummary {
                    index,
                    n,
                    policy: kind,
                    outcome: Outcome::Undecided,
                    status: Status::Undecided,
                    clusters: 0,
                    kernel_distance: f64::NAN,
                    sign_margin: f64::INFINITY,
                },
                matrix,
                trajectory: None,
                violations,
            });
        }
        Err(Error::Diverged { .. }) => {
            return Ok(TrialResult {
                summary: TrialSummary {
                    index,
                    n,
                    policy: kind,
                    outcome: Outcome::Diverging,
                    status: Status::Undecided,
                    clusters: 0,
                    kernel_distance: f64::INFINITY,
                    sign_margin: f64::NAN,
                },
                matrix,
                trajectory: None,
                violations,
            })
        }
        Err(e) => return Err(e),
    };

    let sign_margin = trajectory
        .states
        .iter()
        .zip(trajectory.controls.as_ref().expect("synthesized controls"))
        .flat_map(|(x, v)| {
            let g = &matrix * x;
            (0..n).map(move |i| v[i] * g[i]).collect::<Vec<_>>()
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if sign_margin > 0.0 {
        violations.push(format!("trial {index}: sign margin {sign_margin:e} > 0"));
    }

    let verdict = detect(&trajectory, cfg.window, cfg.tol)?;
    let estimate = estimate_accumulation(&trajectory, cfg.tail_fraction, cfg.radius())?;
    let kd = estimate
        .centers
        .iter()
        .map(|c| energy.kernel_distance(c))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    let bound = 1e3 * x0.norm() + 1e3;
    let diverging = trajectory.states.iter().any(|x| x.norm() > bound);

    let outcome = if diverging {
        Outcome::Diverging
    } else if verdict.status == Status::Converged {
        if kd <= cfg.radius() {
            Outcome::ConvergedInKernel
        } else {
            Outcome::ConvergedOffKernel
        }
    } else if estimate.len() >= 2 && verdict.status == Status::Oscillating {
        Outcome::MultiCluster
    } else {
        Outcome::Undecided
    };

    let zero_free = energy.kernel_is_zero_free() && energy.classification() != Classification::PositiveDefinite;
    match outcome {
        Outcome::Diverging if cfg.family == MatrixFamily::PositiveDefinite => {
            violations.push(format!("trial {index}: diverged on a positive-definite matrix"));
        }
        Outcome::MultiCluster if cfg.family == MatrixFamily::PositiveDefinite => {
            violations.push(format!(
                "trial {index}: several accumulation points on a positive-definite matrix"
            ));
        }
        Outcome::MultiCluster if zero_free && kd > cfg.radius() => {
            violations.push(format!(
                "trial {index}: accumulation point at distance {kd:e} from a zero-free kernel"
            ));
        }
        _ => {}
    }
    if let (Some(_), Status::Converged) = (&graph, verdict.status) {
        let (lo, hi) = (x0.min(), x0.max());
        let x_star = trajectory.states.last().expect("nonempty");
        let escape = x_star
            .iter()
            .map(|&v| (lo - v).max(v - hi))
            .fold(f64::NEG_INFINITY, f64::max);
        if escape > 1e-6 {
            violations.push(format!(
                "trial {index}: Laplacian limit leaves the initial range by {escape:e}"
            ));
        }
    }

    Ok(TrialResult {
        summary: TrialSummary {
            index,
            n,
            policy: kind,
            outcome,
            status: verdict.status,
            clusters: estimate.len(),
            kernel_distance: kd,
            sign_margin,
        },
        matrix,
        trajectory: Some(trajectory),
        violations,
    })
}

fn interest(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::MultiCluster => 0,
        Outcome::Diverging => 1,
        Outcome::Undecided => 2,
        Outcome::ConvergedOffKernel => 3,
        Outcome::ConvergedInKernel => 4,
    }
}

/// Runs `cfg.trials` independent trials in parallel. Trial `k` draws from
/// the ChaCha stream `k` of the master seed, so reports are reproducible
/// regardless of scheduling.
pub fn search_counterexample(cfg: &SearchConfig) -> Result<SearchReport> {
    if cfg.trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial".into()));
    }
    if cfg.policies.is_empty() || cfg.dims.0 < 2 || cfg.dims.0 > cfg.dims.1 {
        return Err(Error::InvalidParameter(
            "need at least one policy and a dimension range within [2, ∞)".into(),
        ));
    }
    let results = (0..cfg.trials)
        .into_par_iter()
        .map(|k| run_trial(cfg, k))
        .collect::<Result<Vec<_>>>()?;

    let mut tallies = BTreeMap::new();
    let mut violations = Vec::new();
    for r in &results {
        *tallies.entry(r.summary.outcome).or_insert(0) += 1;
        violations.extend(r.violations.iter().cloned());
    }
    let mut ranked: Vec<&TrialResult> = results
        .iter()
        .filter(|r| r.summary.outcome != Outcome::ConvergedInKernel && r.trajectory.is_some())
        .collect();
    ranked.sort_by_key(|r| (interest(r.summary.outcome), r.summary.index));
    let kept = ranked
        .into_iter()
        .take(cfg.keep)
        .map(|r| KeptTrial {
            index: r.summary.index,
            matrix: r.matrix.clone(),
            trajectory: r.trajectory.clone().expect("filtered"),
        })
        .collect();
    Ok(SearchReport {
        family: cfg.family,
        tallies,
        trials: results.into_iter().map(|r| r.summary).collect(),
        kept,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn stall_at_zero_is_constant() {
        let e = QuadraticEnergy::new(DMatrix::identity(3, 3)).unwrap();
        let x0 = v(&[1.0, -2.0, 3.0]);
        let t = synthesize(&e, &x0, &SynthesisPolicy::stall(1.0, 0.0), 0.1, 5.0).unwrap();
        assert!(t.states.iter().all(|x| *x == x0));
    }

    #[test]
    fn gradient_opposed_converges_on_positive_definite() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_positive_definite(4, &mut rng);
        let e = QuadraticEnergy::new(a).unwrap();
        let x0 = v(&[3.0, -1.0, 2.0, 0.5]);
        let t = synthesize(&e, &x0, &SynthesisPolicy::gradient_opposed(1.0), 1e-2, 60.0).unwrap();
        let verdict = detect(&t, 10.0, 1e-3).unwrap();
        assert_eq!(verdict.status, Status::Converged);
        assert!(t.energy.windows(2).all(|w| w[1] <= w[0] + 1e-15));
    }

    #[test]
    fn random_feasible_laplacian_stays_in_range() {
        let g = SensingGraph::chain(4).unwrap();
        let e = QuadraticEnergy::new(g.laplacian()).unwrap();
        let x0 = v(&[0.0, 4.0, -1.0, 2.0]);
        let t = synthesize(&e, &x0, &SynthesisPolicy::random_feasible(1.0, 3), 1e-2, 80.0).unwrap();
        let x_star = t.states.last().unwrap();
        assert!(x_star.iter().all(|&c| (-1.0..=4.0).contains(&c)));
        assert_eq!(detect(&t, 10.0, 1e-3).unwrap().status, Status::Converged);
    }

    #[test]
    fn indefinite_is_rejected() {
        let e = QuadraticEnergy::new(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0])).unwrap();
        let r = synthesize(&e, &v(&[1.0, 1.0]), &SynthesisPolicy::gradient_opposed(1.0), 0.1, 1.0);
        assert_eq!(r, Err(Error::Indefinite));
    }

    #[test]
    fn clustering_examples() {
        let constant = Trajectory {
            times: (0..10).map(f64::from).collect(),
            states: vec![v(&[1.0, 2.0]); 10],
            controls: None,
            energy: vec![0.0; 10],
        };
        let c = estimate_accumulation(&constant, 0.5, 1e-2).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c.counts, vec![5]);

        let alternating = Trajectory {
            states: (0..10)
                .map(|k| if k % 2 == 0 { v(&[0.0, 0.0]) } else { v(&[1.0, 1.0]) })
                .collect(),
            ..constant.clone()
        };
        let c = estimate_accumulation(&alternating, 1.0, 1e-2).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.counts, vec![5, 5]);
        assert!(estimate_accumulation(&constant, 0.0, 1.0).is_err());
    }

    #[test]
    fn kernel_distance_examples() {
        let l = QuadraticEnergy::new(SensingGraph::chain(3).unwrap().laplacian()).unwrap();
        assert_abs_diff_eq!(kernel_distance(&l, &v(&[1.0, 2.0, 3.0])).unwrap(), 2f64.sqrt(), epsilon = 1e-9);
        assert_abs_diff_eq!(kernel_distance(&l, &v(&[2.0, 2.0, 2.0])).unwrap(), 0.0, epsilon = 1e-9);
        let pd = QuadraticEnergy::new(DMatrix::identity(2, 2)).unwrap();
        assert_abs_diff_eq!(kernel_distance(&pd, &v(&[3.0, 4.0])).unwrap(), 5.0, epsilon = 1e-12);
    }

    #[test]
    fn generated_matrices_belong_to_their_family() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 2..=8 {
            let pd = QuadraticEnergy::new(random_positive_definite(n, &mut rng)).unwrap();
            assert_eq!(pd.classification(), Classification::PositiveDefinite);

            let (a, k) = random_psd_with_kernel(n, true, &mut rng);
            let e = QuadraticEnergy::new(a.clone()).unwrap();
            assert_eq!(e.classification(), Classification::PsdRankDeficient);
            assert!(e.kernel_is_zero_free());
            assert!((&a * &k).norm() < 1e-12);

            let (a, k) = random_psd_with_kernel(n, false, &mut rng);
            let e = QuadraticEnergy::new(a).unwrap();
            assert_eq!(e.kernel_basis().len(), 1);
            assert!(!e.kernel_is_zero_free());
            assert!(k.iter().any(|&c| c == 0.0));

            assert!(random_connected_graph(n, &mut rng).is_connected());
        }
    }

    #[test]
    fn search_is_reproducible() {
        let mut cfg = SearchConfig::new(MatrixFamily::PsdZeroFreeKernel, 8, 42);
        cfg.horizon = 20.0;
        cfg.window = 5.0;
        let a = search_counterexample(&cfg).unwrap();
        let b = search_counterexample(&cfg).unwrap();
        assert_eq!(a.tallies, b.tallies);
        assert_eq!(a.trials, b.trials);
        assert_eq!(a.trials.len(), 8);
        assert!(a.violations.is_empty(), "{:?}", a.violations);
    }

    #[test]
    fn stall_trials_can_stop_off_kernel() {
        let mut cfg = SearchConfig::new(MatrixFamily::PsdKernelWithZeros, 12, 7);
        cfg.policies = vec![PolicyKind::Stall];
        cfg.horizon = 40.0;
        let r = search_counterexample(&cfg).unwrap();
        assert!(r.count(Outcome::ConvergedOffKernel) > 0, "{:?}", r.tallies);
        assert!(r.violations.is_empty());
    }
}
