//! Experiment drivers: seeded Monte Carlo over trajectory ensembles, exact
//! LQR cost integration, and high-rate (Bennett) asymptotics.
//!
//! The Monte Carlo walker exploits that the belief recursion depends only on
//! the index history, not on the trial's continuous randomness: trials sharing
//! a history prefix share the belief, so the ensemble is processed as a
//! depth-first walk over the realized history tree. Accumulation order is the
//! deterministic tree order and every trial owns a counter-seeded RNG stream,
//! which makes reports bit-reproducible for a fixed config and seed.

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::control::{
    self, advance_belief, design_quantizer, design_silent_quantizer, riccati, CoderState, Mode,
    RiccatiGains, SystemSpec,
};
use crate::density::{GriddedDensity, Moments, PdfSpec, DEFAULT_TAIL_MASS};
use crate::error::{Error, Result};
use crate::quantizer;

/// Control policy driven by the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum Policy {
    /// Per-step Lloyd-Max at the scheduled rate.
    Greedy,
    /// Three-cell quantizer with a silent cell of probability at least
    /// `1 - average_rate`.
    Event { average_rate: f64 },
}

/// How the per-step rate budget is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "model")]
pub enum RateModel {
    Fixed { rate: u32 },
    Schedule { schedule: Vec<u32> },
    /// Bernoulli packet loss: each step keeps `rate` bits with probability
    /// `1 - p_drop` and is erased (zero rate) otherwise.
    IidErasure { p_drop: f64, rate: u32 },
}

impl RateModel {
    pub fn nominal_rate(&self) -> f64 {
        match self {
            RateModel::Fixed { rate } => *rate as f64,
            RateModel::Schedule { schedule } => {
                schedule.iter().sum::<u32>() as f64 / schedule.len().max(1) as f64
            }
            RateModel::IidErasure { p_drop, rate } => (1.0 - p_drop) * *rate as f64,
        }
    }

    fn base_rates(&self, steps: usize) -> Result<Vec<u32>> {
        match self {
            RateModel::Fixed { rate } => Ok(vec![*rate; steps]),
            RateModel::Schedule { schedule } => {
                if schedule.len() != steps {
                    return Err(Error::invalid(
                        "schedule",
                        format!("need {steps} entries, got {}", schedule.len()),
                    ));
                }
                Ok(schedule.clone())
            }
            RateModel::IidErasure { rate, p_drop } => {
                if !(0.0..=1.0).contains(p_drop) {
                    return Err(Error::invalid("p_drop", "must lie in [0, 1]"));
                }
                Ok(vec![*rate; steps])
            }
        }
    }
}

/// Full description of one Monte Carlo experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub a: f64,
    pub horizon: usize,
    pub state_weight: f64,
    pub control_weight: f64,
    pub disturbance: PdfSpec,
    pub policy: Policy,
    pub rate_model: RateModel,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    #[serde(default = "default_tail_mass")]
    pub tail_mass: f64,
}

fn default_grid_points() -> usize {
    512
}

fn default_tail_mass() -> f64 {
    DEFAULT_TAIL_MASS
}

impl ExperimentConfig {
    pub fn system_spec(&self) -> Result<SystemSpec> {
        let d = self.disturbance.to_density(self.tail_mass, self.grid_points)?;
        SystemSpec::new(
            self.a,
            self.horizon,
            vec![self.state_weight; self.horizon],
            vec![self.control_weight; self.horizon.saturating_sub(1)],
            self.rate_model.base_rates(self.horizon.saturating_sub(1))?,
            d,
            Mode::Iid,
        )
    }

    fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::invalid("trials", "need at least one trial"));
        }
        if self.horizon < 2 {
            return Err(Error::invalid("horizon", "need at least two steps"));
        }
        if let Policy::Event { average_rate } = self.policy {
            if !(average_rate > 0.0 && average_rate <= 1.0) {
                return Err(Error::invalid("average_rate", "must lie in (0, 1]"));
            }
        }
        Ok(())
    }
}

/// Per-step sample statistics across trials.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepStats {
    pub t: usize,
    pub mean_cost: f64,
    pub stderr: f64,
    /// Running average `(1/t) Σ_{i<=t} mean_cost_i`.
    pub cum_avg: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
    /// Average realized rate in bits (event: one bit per transmission).
    pub mean_rate: f64,
    /// Fraction of trials that stayed silent (event policy only).
    pub silence_freq: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostReport {
    pub steps: Vec<StepStats>,
    /// Mean of `mean_cost` over the final third of the horizon.
    pub steady_state_cost: f64,
    pub realized_avg_rate: f64,
    pub trials: usize,
    pub seed: u64,
}

struct Trial {
    x: f64,
    rng: ChaCha12Rng,
}

struct Accumulators {
    cost: Vec<f64>,
    cost_sq: Vec<f64>,
    rate: Vec<f64>,
    silent: Vec<f64>,
}

/// Seeded Monte Carlo simulation of the closed loop in the i.i.d. regime.
pub fn run_monte_carlo(config: &ExperimentConfig) -> Result<CostReport> {
    config.validate()?;
    let spec = config.system_spec()?;
    let gains = riccati(&spec);
    let t_end = spec.horizon;

    let mut acc = Accumulators {
        cost: vec![0.0; t_end + 1],
        cost_sq: vec![0.0; t_end + 1],
        rate: vec![0.0; t_end + 1],
        silent: vec![0.0; t_end + 1],
    };

    // x_1 = w_0 drawn from the trial's own stream
    let trials: Vec<Trial> = (0..config.trials)
        .map(|i| {
            let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64 + 1);
            let x = spec.disturbance.sample(rng.gen::<f64>());
            Trial { x, rng }
        })
        .collect();

    let root = CoderState::init(&spec);
    walk(&root, &spec, &gains, config, trials, &mut acc)?;

    let n = config.trials as f64;
    let sigma2 = config.disturbance.variance();
    let (lb, ub) = control::prop4_bounds(config.a, config.rate_model.nominal_rate(), sigma2, t_end);
    let mut steps = Vec::with_capacity(t_end);
    let mut cum = 0.0;
    for t in 1..=t_end {
        let mean = acc.cost[t] / n;
        let var = (acc.cost_sq[t] / n - mean * mean).max(0.0);
        cum += mean;
        steps.push(StepStats {
            t,
            mean_cost: mean,
            stderr: (var / n).sqrt(),
            cum_avg: cum / t as f64,
            lower_bound: lb[t - 1],
            upper_bound: ub[t - 1],
            mean_rate: acc.rate[t] / n,
            silence_freq: acc.silent[t] / n,
        });
    }
    let tail_start = t_end - t_end / 3;
    let tail: Vec<f64> = steps[tail_start - 1..].iter().map(|s| s.mean_cost).collect();
    let steady = tail.iter().sum::<f64>() / tail.len() as f64;
    let transmit_steps = (t_end - 1) as f64;
    let realized_avg_rate =
        steps[..t_end - 1].iter().map(|s| s.mean_rate).sum::<f64>() / transmit_steps;
    Ok(CostReport {
        steps,
        steady_state_cost: steady,
        realized_avg_rate,
        trials: config.trials,
        seed: config.seed,
    })
}

/// Depth-first ensemble walk: every distinct index history is visited once and
/// its belief is computed once, then dropped as the recursion unwinds.
fn walk(
    state: &CoderState,
    spec: &SystemSpec,
    gains: &RiccatiGains,
    config: &ExperimentConfig,
    trials: Vec<Trial>,
    acc: &mut Accumulators,
) -> Result<()> {
    let t = state.t;
    let q_w = spec.q(t);
    if t == spec.horizon {
        for tr in &trials {
            let j = q_w * tr.x * tr.x;
            acc.cost[t] += j;
            acc.cost_sq[t] += j * j;
        }
        return Ok(());
    }
    let r_w = spec.r(t);
    let k = gains.k_at(t);

    match config.policy {
        Policy::Greedy => {
            let base_rate = spec.rate(t);
            let q_full = design_quantizer(&state.belief, base_rate)?;
            let erasure = match config.rate_model {
                RateModel::IidErasure { p_drop, .. } if p_drop > 0.0 => Some(p_drop),
                _ => None,
            };
            let q_zero = if erasure.is_some() {
                Some(design_quantizer(&state.belief, 0)?)
            } else {
                None
            };
            // bucket 0..cells: delivered; last bucket: erased
            let cells = q_full.num_cells();
            let mut buckets: Vec<Vec<Trial>> = (0..=cells).map(|_| Vec::new()).collect();
            for mut tr in trials {
                let dropped = match erasure {
                    Some(p) => tr.rng.gen::<f64>() < p,
                    None => false,
                };
                let (bucket, xhat, bits) = if dropped {
                    (cells, q_zero.as_ref().unwrap().decode(0)?, 0.0)
                } else {
                    let l = q_full.encode(tr.x);
                    (l, q_full.decode(l)?, base_rate as f64)
                };
                let u = -k * xhat;
                let j = q_w * tr.x * tr.x + r_w * u * u;
                acc.cost[t] += j;
                acc.cost_sq[t] += j * j;
                acc.rate[t] += bits;
                let w = spec.disturbance.sample(tr.rng.gen::<f64>());
                tr.x = spec.a * tr.x + u + w;
                buckets[bucket].push(tr);
            }
            for (l, bucket) in buckets.into_iter().enumerate() {
                if bucket.is_empty() {
                    continue;
                }
                let child = if l == cells {
                    advance_belief(state, spec, k, q_zero.as_ref().unwrap(), 0)?
                } else {
                    advance_belief(state, spec, k, &q_full, l)?
                };
                walk(&child, spec, gains, config, bucket, acc)?;
            }
        }
        Policy::Event { average_rate } => {
            let delta = 1.0 - average_rate;
            let sq = design_silent_quantizer(&state.belief, delta)?;
            let mut buckets: Vec<Vec<Trial>> = (0..3).map(|_| Vec::new()).collect();
            for mut tr in trials {
                let l = sq.quantizer.encode(tr.x);
                let xhat = sq.quantizer.decode(l)?;
                let u = -k * xhat;
                let j = q_w * tr.x * tr.x + r_w * u * u;
                acc.cost[t] += j;
                acc.cost_sq[t] += j * j;
                if l == sq.silent_index {
                    acc.silent[t] += 1.0;
                } else {
                    acc.rate[t] += 1.0;
                }
                let w = spec.disturbance.sample(tr.rng.gen::<f64>());
                tr.x = spec.a * tr.x + u + w;
                buckets[l].push(tr);
            }
            for (l, bucket) in buckets.into_iter().enumerate() {
                if bucket.is_empty() {
                    continue;
                }
                let child = advance_belief(state, spec, k, &sq.quantizer, l)?;
                walk(&child, spec, gains, config, bucket, acc)?;
            }
        }
    }
    Ok(())
}

/// One row of the exact LQR comparison: accumulated costs of the greedy and
/// the globally optimal policy up to time `t`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LqrExactRow {
    pub t: usize,
    pub greedy_cum: f64,
    pub optimal_cum: f64,
}

/// Exact (integration, no Monte Carlo) accumulated costs in the LQR regime,
/// for both the greedy per-step policy and the MRSQ policy.
///
/// Needs zero actuation weights: with them the per-step cost reduces to
/// `q_t a^{2(t-1)} D_{t-1}` through the estimation-error identity.
pub fn run_lqr_exact(spec: &SystemSpec) -> Result<Vec<LqrExactRow>> {
    if spec.mode != Mode::Lqr {
        return Err(Error::invalid("mode", "run_lqr_exact needs mode = lqr"));
    }
    if spec.control_weights.iter().any(|r| *r != 0.0) {
        return Err(Error::invalid(
            "control_weights",
            "exact accumulated rows are derived for zero actuation cost",
        ));
    }
    let d = &spec.disturbance;
    let t_end = spec.horizon;
    let m = Moments::new(d);

    // greedy column: refine the disturbance partition by per-cell Lloyd-Max
    let mut greedy_d = Vec::with_capacity(t_end - 1);
    let mut parts: Vec<f64> = vec![d.lo(), d.hi()];
    for tau in 1..t_end {
        let cells = 1usize << spec.rate(tau);
        let mut next = Vec::with_capacity((parts.len() - 1) * cells + 1);
        next.push(parts[0]);
        for w in parts.windows(2) {
            let fit = quantizer::lloyd_max_on(
                &m,
                (w[0], w[1]),
                cells,
                quantizer::DEFAULT_TOL,
                quantizer::DEFAULT_MAX_ITER,
            )?;
            next.extend_from_slice(&fit.quantizer.levels()[1..]);
        }
        parts = next;
        let dist: f64 = parts.windows(2).map(|w| m.cell(w[0], w[1]).m2_centroid()).sum();
        greedy_d.push(dist);
    }

    // optimal column: one MRSQ designed for the whole horizon
    let policy = control::lqr_policy(spec, quantizer::DEFAULT_TOL, quantizer::DEFAULT_MAX_ITER)?;

    let sigma2 = d.variance();
    let mut rows = Vec::with_capacity(t_end);
    let mut cg = spec.q(1) * sigma2;
    let mut co = cg;
    rows.push(LqrExactRow { t: 1, greedy_cum: cg, optimal_cum: co });
    for t in 2..=t_end {
        let amp = spec.q(t) * spec.a.powi(2 * (t as i32 - 1));
        cg += amp * greedy_d[t - 2];
        co += amp * policy.stage_distortions[t - 2];
        rows.push(LqrExactRow { t, greedy_cum: cg, optimal_cum: co });
    }
    Ok(rows)
}

/// High-rate reproduction-point density: `f^{1/3}` renormalized.
pub fn bennett_point_density(d: &GriddedDensity) -> Result<GriddedDensity> {
    let values: Vec<f64> = d.values().iter().map(|v| v.cbrt()).collect();
    GriddedDensity::from_values(d.lo(), d.step(), values)
}

/// Bennett's high-rate distortion approximation
/// `D ≈ (1/(12·2^{2R})) [∫ f^{1/3}]^3` (the rate may be fractional).
pub fn bennett_distortion(d: &GriddedDensity, rate: f64) -> f64 {
    let integral: f64 = d.values().iter().map(|v| v.cbrt()).sum::<f64>() * d.step();
    integral.powi(3) / (12.0 * 2f64.powf(2.0 * rate))
}

/// One per-history record of the exact conditional-error tree.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubcellRow {
    pub t: usize,
    /// Index history as concatenated digits, e.g. "010".
    pub path: String,
    /// Probability of the history (product of truncation factors).
    pub prob: f64,
    /// Conditional estimation MSE `E[(X_t - x̂_t)^2 | history]`.
    pub mse: f64,
}

/// Exact enumeration of all index histories up to `max_depth` steps, with the
/// conditional estimation error per history. Probabilities at each depth sum
/// to one up to grid rounding.
pub fn conditional_mse_tree(
    spec: &SystemSpec,
    gains: &RiccatiGains,
    max_depth: usize,
) -> Result<Vec<SubcellRow>> {
    let mut rows = Vec::new();
    let root = CoderState::init(spec);
    let depth = max_depth.min(spec.horizon - 1);
    descend(&root, spec, gains, 1.0, String::new(), depth, &mut rows)?;
    rows.sort_by(|a, b| (a.t, &a.path).cmp(&(b.t, &b.path)));
    Ok(rows)
}

fn descend(
    state: &CoderState,
    spec: &SystemSpec,
    gains: &RiccatiGains,
    prob: f64,
    path: String,
    depth_left: usize,
    rows: &mut Vec<SubcellRow>,
) -> Result<()> {
    if depth_left == 0 {
        return Ok(());
    }
    let t = state.t;
    let q = design_quantizer(&state.belief, spec.rate(t))?;
    for l in 0..q.num_cells() {
        let cell = q.cell(l);
        let gamma = state.belief.mass_on(cell);
        if gamma <= 0.0 {
            continue;
        }
        let c = q.decode(l)?;
        let mse = state.belief.second_moment_about(c, cell) / gamma;
        let mut p = path.clone();
        p.push_str(&l.to_string());
        rows.push(SubcellRow { t, path: p.clone(), prob: prob * gamma, mse });
        let child = advance_belief(state, spec, gains.k_at(t), &q, l)?;
        descend(&child, spec, gains, prob * gamma, p, depth_left - 1, rows)?;
    }
    Ok(())
}
