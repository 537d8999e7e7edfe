//! Per-network tuning: fits each calculus's parameters to the minimum
//! cross-entropy norm over the probe grid by minimizing mean squared error.
//!
//! Bounded parameters are searched in an unconstrained reparameterization
//! (log-odds for probabilities, inverse hyperbolic tangent for certainty
//! factors) with a conjugate-gradient descent, periodic restarts, and a
//! backtracking Armijo line search. Each fit is multi-started from the
//! theoretical translation of the joint table plus seeded random points.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::calculi::{
    theoretical_init, Calculus, CalculusParams, EvalOptions, IndependenceParams, LinearParams,
    MycinParams, ProspectorParams,
};
use crate::joint::{JointError, JointTable};
use crate::mce::{mce_update, EvidenceProbe, MceError};

/// Default probe levels. Each evidence variable takes every level, so the
/// grid is the 5x5 Cartesian product: 25 probes.
pub const DEFAULT_GRID: [f64; 5] = [0.999, 0.75, 0.50, 0.25, 0.001];

/// Bound applied before logit/atanh so boundary parameter values map to
/// large finite coordinates instead of infinities.
const TRANSFORM_CLAMP: f64 = 1e-12;

/// Half-width of the random-start box in unconstrained space.
const START_BOX: f64 = 3.0;

/// Errors from problem construction and tuning.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TunerError {
    #[error("problem set is empty")]
    EmptyProblemSet,
    #[error("probe and target counts differ: {probes} probes, {targets} targets")]
    LengthMismatch { probes: usize, targets: usize },
    #[error("target {index} is {value}, expected a probability in [0, 1]")]
    InvalidTarget { index: usize, value: f64 },
    #[error("{calculus}: no start accepted a descent step or reached a stationary point")]
    OptimizerFailure { calculus: Calculus },
    #[error(transparent)]
    Joint(#[from] JointError),
    #[error(transparent)]
    Mce(#[from] MceError),
}

/// The full Cartesian grid of probes over `levels`, `p1` varying slowest.
pub fn probe_grid(levels: &[f64]) -> Vec<EvidenceProbe> {
    let mut probes = Vec::with_capacity(levels.len() * levels.len());
    for &p1 in levels {
        for &p2 in levels {
            probes.push(EvidenceProbe::new(p1, p2));
        }
    }
    probes
}

/// A network's tuning problem: the probe grid paired with the norm
/// posterior at each probe.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSet {
    probes: Vec<EvidenceProbe>,
    targets: Vec<f64>,
}

impl ProblemSet {
    /// Pairs probes with externally computed targets.
    pub fn new(probes: Vec<EvidenceProbe>, targets: Vec<f64>) -> Result<Self, TunerError> {
        if probes.is_empty() {
            return Err(TunerError::EmptyProblemSet);
        }
        if probes.len() != targets.len() {
            return Err(TunerError::LengthMismatch {
                probes: probes.len(),
                targets: targets.len(),
            });
        }
        for (index, &value) in targets.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(TunerError::InvalidTarget { index, value });
            }
        }
        Ok(ProblemSet { probes, targets })
    }

    /// Builds the problem for one table by solving the norm at every grid
    /// probe.
    pub fn from_table(table: &JointTable, levels: &[f64]) -> Result<Self, TunerError> {
        let probes = probe_grid(levels);
        let targets = probes
            .iter()
            .map(|&p| mce_update(table, p).map(|s| s.posterior_c))
            .collect::<Result<Vec<_>, _>>()?;
        ProblemSet::new(probes, targets)
    }

    pub fn probes(&self) -> &[EvidenceProbe] {
        &self.probes
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.probes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probes.is_empty()
    }
}

/// Mean squared error of `params` against the problem targets.
pub fn objective(params: &CalculusParams, problems: &ProblemSet, options: EvalOptions) -> f64 {
    let sum: f64 = problems
        .probes
        .iter()
        .zip(&problems.targets)
        .map(|(&probe, &target)| {
            let e = params.eval(probe, options) - target;
            e * e
        })
        .sum();
    sum / problems.len() as f64
}

fn logit(p: f64) -> f64 {
    let p = p.clamp(TRANSFORM_CLAMP, 1.0 - TRANSFORM_CLAMP);
    (p / (1.0 - p)).ln()
}

fn sigmoid(x: f64) -> f64 {
    // Split on sign so exp never overflows.
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn atanh_clamped(c: f64) -> f64 {
    c.clamp(-1.0 + TRANSFORM_CLAMP, 1.0 - TRANSFORM_CLAMP).atanh()
}

/// Maps parameters to the unconstrained search space: identity for the linear
/// coefficients, log-odds for probabilities, atanh for certainty factors.
pub fn to_unconstrained(params: &CalculusParams) -> Vec<f64> {
    match params {
        CalculusParams::Linear(p) => vec![p.a, p.b1, p.b2],
        CalculusParams::Independence(p) => {
            vec![logit(p.q00), logit(p.q10), logit(p.q01), logit(p.q11)]
        }
        CalculusParams::Mycin(p) => vec![
            logit(p.prior_e1),
            logit(p.prior_e2),
            logit(p.prior_c),
            atanh_clamped(p.cf1),
            atanh_clamped(p.cf2),
        ],
        CalculusParams::Prospector(p) => vec![
            logit(p.prior_e1),
            logit(p.prior_e2),
            logit(p.prior_c),
            logit(p.like1_t),
            logit(p.like1_f),
            logit(p.like2_t),
            logit(p.like2_f),
        ],
    }
}

/// Inverse of [`to_unconstrained`]. `x` must have the calculus's parameter
/// count.
pub fn from_unconstrained(calculus: Calculus, x: &[f64]) -> CalculusParams {
    assert_eq!(x.len(), calculus.param_count(), "wrong parameter count for {calculus}");
    match calculus {
        Calculus::Linear => CalculusParams::Linear(LinearParams { a: x[0], b1: x[1], b2: x[2] }),
        Calculus::Independence => CalculusParams::Independence(IndependenceParams {
            q00: sigmoid(x[0]),
            q10: sigmoid(x[1]),
            q01: sigmoid(x[2]),
            q11: sigmoid(x[3]),
        }),
        Calculus::Mycin => CalculusParams::Mycin(MycinParams {
            prior_e1: sigmoid(x[0]),
            prior_e2: sigmoid(x[1]),
            prior_c: sigmoid(x[2]),
            cf1: x[3].tanh(),
            cf2: x[4].tanh(),
        }),
        Calculus::Prospector => CalculusParams::Prospector(ProspectorParams {
            prior_e1: sigmoid(x[0]),
            prior_e2: sigmoid(x[1]),
            prior_c: sigmoid(x[2]),
            like1_t: sigmoid(x[3]),
            like1_f: sigmoid(x[4]),
            like2_t: sigmoid(x[5]),
            like2_f: sigmoid(x[6]),
        }),
    }
}

/// Stopping rules and line-search constants for [`minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeConfig {
    pub max_iterations: usize,
    /// Stop when the gradient norm falls below this.
    pub grad_tolerance: f64,
    /// Stop when the relative objective decrease falls below this.
    pub rel_tolerance: f64,
    /// Central-difference step.
    pub gradient_step: f64,
    /// Armijo sufficient-decrease constant.
    pub armijo_c: f64,
    /// Step shrink factor on a rejected trial.
    pub shrink: f64,
    /// Trials per line search before giving up on the direction.
    pub max_backtracks: usize,
}

impl Default for MinimizeConfig {
    fn default() -> Self {
        MinimizeConfig {
            max_iterations: 500,
            grad_tolerance: 1e-8,
            rel_tolerance: 1e-12,
            gradient_step: 1e-5,
            armijo_c: 1e-4,
            shrink: 0.5,
            max_backtracks: 60,
        }
    }
}

/// Terminal state of one [`minimize`] run.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    /// Accepted descent steps.
    pub iterations: usize,
    /// Gradient norm at `x`.
    pub grad_norm: f64,
    /// Stopped by a tolerance rather than the iteration cap or a dead line
    /// search.
    pub converged: bool,
    /// At least one step was accepted.
    pub moved: bool,
    /// Objective after each accepted step, starting with the initial value.
    /// Non-increasing.
    pub history: Vec<f64>,
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_gradient<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], h: f64) -> Vec<f64> {
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let xi = x[i];
        probe[i] = xi + h;
        let above = f(&probe);
        probe[i] = xi - h;
        let below = f(&probe);
        probe[i] = xi;
        grad[i] = (above - below) / (2.0 * h);
    }
    grad
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Backtracking Armijo search along `dir` from `x`. Returns the accepted
/// point, its value, and the step length, or `None` if no trial satisfied
/// sufficient decrease.
fn line_search<F: Fn(&[f64]) -> f64>(
    f: &F,
    x: &[f64],
    fx: f64,
    dir: &[f64],
    slope: f64,
    initial_step: f64,
    config: &MinimizeConfig,
) -> Option<(Vec<f64>, f64, f64)> {
    let mut t = initial_step;
    for _ in 0..config.max_backtracks {
        let candidate: Vec<f64> = x.iter().zip(dir).map(|(xi, di)| xi + t * di).collect();
        let fc = f(&candidate);
        if fc <= fx + config.armijo_c * t * slope {
            return Some((candidate, fc, t));
        }
        t *= config.shrink;
    }
    None
}

/// Conjugate-gradient descent with numerical gradients.
///
/// Directions follow the Polak-Ribiere update, floored at zero, restarted to
/// steepest descent every `n` iterations and whenever the direction stops
/// descending. Accepted objective values are strictly decreasing.
pub fn minimize<F: Fn(&[f64]) -> f64>(
    f: F,
    x0: &[f64],
    config: &MinimizeConfig,
) -> MinimizeOutcome {
    let n = x0.len().max(1);
    let mut x = x0.to_vec();
    let mut value = f(&x);
    let mut grad = central_gradient(&f, &x, config.gradient_step);
    let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
    let mut history = vec![value];
    let mut converged = false;
    // Warm-started step: the next search opens at twice the last accepted
    // step so lengths can grow as well as shrink.
    let mut step: f64 = 1.0;

    for iter in 1..=config.max_iterations {
        let grad_norm = norm(&grad);
        if grad_norm < config.grad_tolerance {
            converged = true;
            break;
        }

        let mut slope = dot(&dir, &grad);
        if slope.is_nan() || slope >= 0.0 {
            // Lost descent; fall back to steepest.
            dir = grad.iter().map(|g| -g).collect();
            slope = -grad_norm * grad_norm;
        }

        let opening = (step * 2.0).min(1e8);
        let mut accepted = line_search(&f, &x, value, &dir, slope, opening, config);
        if accepted.is_none() {
            // One retry along steepest descent before declaring a dead end.
            let steepest: Vec<f64> = grad.iter().map(|g| -g).collect();
            if steepest != dir {
                slope = -grad_norm * grad_norm;
                accepted = line_search(&f, &x, value, &steepest, slope, opening, config);
                if accepted.is_some() {
                    dir = steepest;
                }
            }
        }
        let Some((x_new, value_new, t)) = accepted else {
            break;
        };
        step = t;

        let grad_new = central_gradient(&f, &x_new, config.gradient_step);
        let beta = if iter % n == 0 {
            0.0
        } else {
            let num: f64 = grad_new.iter().zip(&grad).map(|(gn, g)| gn * (gn - g)).sum();
            let den = dot(&grad, &grad);
            if den > 0.0 { (num / den).max(0.0) } else { 0.0 }
        };
        let old_dir = dir;
        dir = grad_new
            .iter()
            .zip(&old_dir)
            .map(|(gn, d)| -gn + beta * d)
            .collect();

        let decrease = value - value_new;
        let rel = decrease / value.abs().max(1e-300);
        x = x_new;
        value = value_new;
        grad = grad_new;
        history.push(value);
        if rel < config.rel_tolerance {
            converged = true;
            break;
        }
        let _ = iter;
    }

    let grad_norm = norm(&grad);
    MinimizeOutcome {
        x,
        value,
        iterations: history.len() - 1,
        grad_norm,
        converged,
        moved: history.len() > 1,
        history,
    }
}

/// Multi-start policy and evaluation toggles for [`tune`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunerConfig {
    /// Random starts in addition to the theoretical one.
    pub restarts: usize,
    /// Seeds the random starts.
    pub seed: u64,
    pub options: EvalOptions,
    pub minimize: MinimizeConfig,
    /// Starts whose final objective is within this of the best count as
    /// agreeing.
    pub agreement_tolerance: f64,
    /// Fixed exploratory starts shared by every run. They search the box
    /// independently of the restart seed so the reported optimum is a
    /// property of the problem, not of the seed.
    pub auxiliary_starts: usize,
    /// Perturb-and-descend rounds around the incumbent after the start
    /// sweep, drawn from a fixed stream for the same reason.
    pub hop_rounds: usize,
    /// Descent passes chained from each start's terminal point. The MYCIN
    /// and PROSPECTOR surfaces are only piecewise smooth, and a single pass
    /// can stall on a plateau that a fresh pass escapes.
    pub polish_cycles: usize,
}

impl Default for TunerConfig {
    fn default() -> Self {
        TunerConfig {
            restarts: 4,
            seed: 0,
            options: EvalOptions::default(),
            minimize: MinimizeConfig::default(),
            agreement_tolerance: 1e-6,
            auxiliary_starts: 24,
            hop_rounds: 24,
            polish_cycles: 8,
        }
    }
}

/// Stream for the auxiliary starts; any fixed value works, it only has to be
/// the same in every run.
const AUX_START_SEED: u64 = 0x5EED_AB1E;
/// Stream for the hop perturbations.
const HOP_SEED: u64 = 0x5EED_90B5;
/// Perturbation radii cycled by the hop rounds, widest first.
const HOP_RADII: [f64; 6] = [1.5, 0.75, 0.375, 0.18, 0.09, 0.045];

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; the uniform is kept away from zero so the log is finite.
    let u: f64 = rng.random_range(f64::MIN_POSITIVE..1.0);
    let v: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    (-2.0 * u.ln()).sqrt() * v.cos()
}

fn auxiliary_starts(dims: usize, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(AUX_START_SEED);
    (0..count)
        .map(|_| {
            (0..dims)
                .map(|_| rng.random_range(-START_BOX..=START_BOX))
                .collect()
        })
        .collect()
}

/// Midpoints of the intervals the distinct sorted `levels` cut out of
/// (0, 1), endpoints excluded.
fn interval_midpoints(levels: &[f64]) -> Vec<f64> {
    let mut sorted: Vec<f64> = levels.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let mut bounds = vec![0.0];
    bounds.extend(sorted);
    bounds.push(1.0);
    bounds
        .windows(2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .filter(|m| *m > 0.0 && *m < 1.0)
        .collect()
}

/// Deterministic starts covering every piecewise branch pattern of the MYCIN
/// and PROSPECTOR evaluators on the given probes.
///
/// Both calculi switch formula branches where an evidence input crosses its
/// pivot `prior_ei`, so the objective is smooth only within each cell of the
/// lattice the probe levels cut the pivot square into. One start per cell and
/// per orientation of the two evidence weights reaches every cell's own
/// optimum; blind restarts miss the small cells too often for repeated runs
/// to agree.
fn structured_starts(
    calculus: Calculus,
    problems: &ProblemSet,
    theoretical: &CalculusParams,
) -> Vec<Vec<f64>> {
    let (prior_c, is_mycin) = match (calculus, theoretical) {
        (Calculus::Mycin, CalculusParams::Mycin(p)) => (p.prior_c, true),
        (Calculus::Prospector, CalculusParams::Prospector(p)) => (p.prior_c, false),
        _ => return Vec::new(),
    };
    let probes = problems.probes();
    let mids1 = interval_midpoints(&probes.iter().map(|p| p.p1).collect::<Vec<_>>());
    let mids2 = interval_midpoints(&probes.iter().map(|p| p.p2).collect::<Vec<_>>());

    // Within a cell the surface still splits over the conclusion prior and
    // the weight magnitudes, so those get coarse coverage too.
    let prior_cs = [prior_c, 0.5];
    let magnitudes = [0.4, 0.8];
    let mut starts =
        Vec::with_capacity(mids1.len() * mids2.len() * 4 * prior_cs.len() * magnitudes.len());
    for &m1 in &mids1 {
        for &m2 in &mids2 {
            for signs in 0..4u8 {
                let up1 = signs & 1 == 0;
                let up2 = signs & 2 == 0;
                for &pc in &prior_cs {
                    for &mag in &magnitudes {
                        let params = if is_mycin {
                            CalculusParams::Mycin(MycinParams {
                                prior_e1: m1,
                                prior_e2: m2,
                                prior_c: pc,
                                cf1: if up1 { mag } else { -mag },
                                cf2: if up2 { mag } else { -mag },
                            })
                        } else {
                            let (hi, lo) = (0.5 + mag / 2.0, 0.5 - mag / 2.0);
                            CalculusParams::Prospector(ProspectorParams {
                                prior_e1: m1,
                                prior_e2: m2,
                                prior_c: pc,
                                like1_t: if up1 { hi } else { lo },
                                like1_f: if up1 { lo } else { hi },
                                like2_t: if up2 { hi } else { lo },
                                like2_f: if up2 { lo } else { hi },
                            })
                        };
                        starts.push(to_unconstrained(&params));
                    }
                }
            }
        }
    }
    starts
}

/// Chains [`minimize`] passes from each terminal point until a pass makes no
/// progress. Every pass resets the direction memory and the warm step.
fn deep_minimize<F: Fn(&[f64]) -> f64>(
    f: &F,
    x0: &[f64],
    config: &TunerConfig,
) -> MinimizeOutcome {
    let mut out = minimize(f, x0, &config.minimize);
    for _ in 1..config.polish_cycles.max(1) {
        let again = minimize(f, &out.x, &config.minimize);
        let improved = again.value < out.value;
        let moved = out.moved || again.moved;
        let mut history = out.history;
        history.extend_from_slice(&again.history[1..]);
        out = MinimizeOutcome {
            moved,
            iterations: history.len() - 1,
            history,
            ..again
        };
        if !improved {
            break;
        }
    }
    out
}

/// Short capped descent used to rank exploratory starts before paying for a
/// full polish on the leaders.
fn screen_config(config: &TunerConfig) -> MinimizeConfig {
    MinimizeConfig {
        max_iterations: 150,
        rel_tolerance: 1e-10,
        ..config.minimize
    }
}

/// A screened value lying under this threshold is close enough to the
/// incumbent's basin depth to be worth a full polish.
fn worth_polishing(screened: f64, incumbent: f64) -> bool {
    screened < incumbent * 1.5 + 1e-6
}

/// Perturb-and-descend refinement around the incumbent, with a fixed
/// perturbation stream. Each hop is first screened and only deepened when it
/// lands near or below the incumbent.
fn hop_refine<F: Fn(&[f64]) -> f64>(
    f: &F,
    incumbent: MinimizeOutcome,
    config: &TunerConfig,
) -> MinimizeOutcome {
    let screen = screen_config(config);
    let mut best = incumbent;
    let mut rng = ChaCha8Rng::seed_from_u64(HOP_SEED);
    for round in 0..config.hop_rounds {
        let sigma = HOP_RADII[round % HOP_RADII.len()];
        let start: Vec<f64> = best
            .x
            .iter()
            .map(|&xi| xi + sigma * standard_normal(&mut rng))
            .collect();
        let out = minimize(f, &start, &screen);
        if !worth_polishing(out.value, best.value) {
            continue;
        }
        let out = deep_minimize(f, &out.x, config);
        if out.value < best.value {
            best = out;
        }
    }
    best
}

/// Best fit found for one (network, calculus) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub params: CalculusParams,
    pub mse: f64,
    pub rmse: f64,
    /// Objective at the theoretical translation, the untuned baseline.
    /// `mse` never exceeds it.
    pub theoretical_mse: f64,
    /// Starts whose final objective tied the best within the agreement
    /// tolerance.
    pub starts_agreeing: usize,
}

/// Tunes `calculus` to `problems`, starting from the theoretical translation
/// of `table` plus seeded random points, returning the best fit.
pub fn tune(
    calculus: Calculus,
    problems: &ProblemSet,
    table: &JointTable,
    config: &TunerConfig,
) -> Result<TuneResult, TunerError> {
    let theoretical = theoretical_init(table, calculus)?;
    let theoretical_mse = objective(&theoretical, problems, config.options);
    let start = to_unconstrained(&theoretical);
    let dims = start.len();

    let f = |x: &[f64]| objective(&from_unconstrained(calculus, x), problems, config.options);

    let mut starts = Vec::with_capacity(config.restarts + 1);
    starts.push(start);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.restarts {
        starts.push((0..dims).map(|_| rng.random_range(-START_BOX..=START_BOX)).collect());
    }

    let outcomes: Vec<MinimizeOutcome> =
        starts.iter().map(|s| deep_minimize(&f, s, config)).collect();

    if outcomes.iter().all(|o| !o.moved && !o.converged) {
        return Err(TunerError::OptimizerFailure { calculus });
    }

    // Deterministic exploration, identical in every run: screen the
    // auxiliary and structured starts with a capped descent, fully polish
    // the leaders, then hop around the winner. Nothing here may depend on
    // the seeded starts, or the reported optimum would vary with the seed.
    let screen = screen_config(config);
    let mut screened: Vec<MinimizeOutcome> = auxiliary_starts(dims, config.auxiliary_starts)
        .into_iter()
        .chain(structured_starts(calculus, problems, &theoretical))
        .map(|s| minimize(f, &s, &screen))
        .collect();
    screened.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut deterministic = outcomes[0].clone();
    for candidate in screened.into_iter().take(12) {
        let out = deep_minimize(&f, &candidate.x, config);
        if out.value < deterministic.value {
            deterministic = out;
        }
    }
    let deterministic = hop_refine(&f, deterministic, config);

    // The seeded starts can only improve on the deterministic result.
    let best = outcomes[1..]
        .iter()
        .fold(deterministic, |acc, o| {
            if o.value < acc.value {
                o.clone()
            } else {
                acc
            }
        });

    // Round-tripping the theoretical start through the transform can move the
    // objective by a few ulps; keep the exact baseline when tuning finds
    // nothing strictly better.
    let (params, mse) = if best.value < theoretical_mse {
        (from_unconstrained(calculus, &best.x), best.value)
    } else {
        (theoretical, theoretical_mse)
    };
    let starts_agreeing = outcomes
        .iter()
        .filter(|o| o.value - mse <= config.agreement_tolerance)
        .count();

    Ok(TuneResult {
        params,
        mse,
        rmse: mse.sqrt(),
        theoretical_mse,
        starts_agreeing,
    })
}
