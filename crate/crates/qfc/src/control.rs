//! Control layer: Riccati gains, the greedy coder-controller over filtered
//! densities, its event-triggered variant, and the globally optimal LQR policy
//! built on a multi-resolution quantizer.
//!
//! Encoder and decoder run the same pure belief update on identical inputs;
//! everything here is deterministic with a fixed evaluation order so the two
//! ends stay bit-identical.

use crate::density::GriddedDensity;
use crate::error::{Error, Result};
use crate::mrsq::{self, MultiResolutionQuantizer};
use crate::quantizer::{self, ScalarQuantizer};
use crate::silent::{self, SilentQuantizer};

/// Disturbance regime: fresh i.i.d. noise every step, or a single random
/// initial disturbance (LQR).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Iid,
    Lqr,
}

/// Plant, cost weights and rate schedule over a finite horizon.
#[derive(Debug, Clone)]
pub struct SystemSpec {
    pub a: f64,
    pub horizon: usize,
    /// q_1..q_T
    pub state_weights: Vec<f64>,
    /// r_1..r_{T-1}
    pub control_weights: Vec<f64>,
    /// R_1..R_{T-1}
    pub rates: Vec<u32>,
    pub disturbance: GriddedDensity,
    pub mode: Mode,
}

impl SystemSpec {
    pub fn new(
        a: f64,
        horizon: usize,
        state_weights: Vec<f64>,
        control_weights: Vec<f64>,
        rates: Vec<u32>,
        disturbance: GriddedDensity,
        mode: Mode,
    ) -> Result<Self> {
        if a == 0.0 || !a.is_finite() {
            return Err(Error::invalid("a", "plant gain must be nonzero and finite"));
        }
        if horizon < 1 {
            return Err(Error::invalid("horizon", "need T >= 1"));
        }
        if state_weights.len() != horizon {
            return Err(Error::invalid("state_weights", "need one weight per step"));
        }
        if control_weights.len() != horizon - 1 || rates.len() != horizon - 1 {
            return Err(Error::invalid(
                "control_weights",
                "need one control weight and one rate per step before the horizon",
            ));
        }
        if state_weights.iter().chain(&control_weights).any(|w| *w < 0.0) {
            return Err(Error::invalid("weights", "cost weights must be nonnegative"));
        }
        if !state_weights.iter().any(|q| *q > 0.0) {
            return Err(Error::invalid("state_weights", "cost must be nontrivial"));
        }
        Ok(SystemSpec { a, horizon, state_weights, control_weights, rates, disturbance, mode })
    }

    /// Constant weights and a fixed rate at every step.
    pub fn uniform(
        a: f64,
        horizon: usize,
        q: f64,
        r: f64,
        rate: u32,
        disturbance: GriddedDensity,
        mode: Mode,
    ) -> Result<Self> {
        Self::new(
            a,
            horizon,
            vec![q; horizon],
            vec![r; horizon.saturating_sub(1)],
            vec![rate; horizon.saturating_sub(1)],
            disturbance,
            mode,
        )
    }

    /// 1-based accessors matching the time indexing of the recursions.
    pub fn q(&self, t: usize) -> f64 {
        self.state_weights[t - 1]
    }

    pub fn r(&self, t: usize) -> f64 {
        self.control_weights[t - 1]
    }

    pub fn rate(&self, t: usize) -> u32 {
        self.rates[t - 1]
    }
}

/// Backward Riccati solution: cost-to-go coefficients `s_1..s_{T+1}`, control
/// gains `k_1..k_T`, and estimation-error weights `g_1..g_T`.
#[derive(Debug, Clone)]
pub struct RiccatiGains {
    pub s: Vec<f64>,
    pub k: Vec<f64>,
    pub g: Vec<f64>,
}

impl RiccatiGains {
    pub fn s_at(&self, t: usize) -> f64 {
        self.s[t - 1]
    }
    pub fn k_at(&self, t: usize) -> f64 {
        self.k[t - 1]
    }
    pub fn g_at(&self, t: usize) -> f64 {
        self.g[t - 1]
    }
}

/// Backward Riccati recursion with `s_T = q_T`, `s_{T+1} = k_T = 0`.
/// A 0/0 in the gain (no cost ahead) resolves to zero.
pub fn riccati(spec: &SystemSpec) -> RiccatiGains {
    riccati_recursion(spec.a, &spec.state_weights, &spec.control_weights)
}

/// The recursion itself, for callers that carry the weights directly:
/// `state_weights` is `q_1..q_T`, `control_weights` is `r_1..r_{T-1}`.
pub fn riccati_recursion(a: f64, state_weights: &[f64], control_weights: &[f64]) -> RiccatiGains {
    let t_end = state_weights.len();
    let q = |t: usize| state_weights[t - 1];
    let r = |t: usize| control_weights[t - 1];
    let mut s = vec![0.0; t_end + 1];
    s[t_end] = 0.0; // s_{T+1}
    s[t_end - 1] = q(t_end); // s_T
    for t in (1..t_end).rev() {
        let s_next = s[t]; // s_{t+1}
        let frac = if s_next + r(t) > 0.0 { s_next * r(t) / (s_next + r(t)) } else { 0.0 };
        s[t - 1] = q(t) + frac * a * a;
    }
    let mut k = vec![0.0; t_end];
    for t in 1..t_end {
        let s_next = s[t];
        k[t - 1] = if s_next + r(t) > 0.0 { s_next / (s_next + r(t)) * a } else { 0.0 };
    }
    // k_T = 0 already
    let mut g = vec![0.0; t_end];
    for t in 1..=t_end {
        let s_next = if t < t_end { s[t] } else { 0.0 };
        g[t - 1] = s_next * a * a - s[t - 1] + q(t);
    }
    RiccatiGains { s, k, g }
}

/// Shared filtering state of the encoder and the decoder.
#[derive(Debug, Clone)]
pub struct CoderState {
    /// Current prior belief about the state.
    pub belief: GriddedDensity,
    /// 1-based time step the next observation belongs to.
    pub t: usize,
    pub last_xhat: f64,
    pub last_u: f64,
}

impl CoderState {
    /// Initial prior: the first state is the first disturbance.
    pub fn init(spec: &SystemSpec) -> Self {
        CoderState { belief: spec.disturbance.clone(), t: 1, last_xhat: 0.0, last_u: 0.0 }
    }
}

/// Snaps quantizer levels onto the belief grid and recomputes the points as
/// the snapped cells' centroids. Encoder, decoder and the posterior truncation
/// then agree exactly on every cell edge.
pub(crate) fn snap_to_grid(d: &GriddedDensity, levels: &[f64]) -> Result<ScalarQuantizer> {
    let n = d.len();
    let mut idx: Vec<usize> = Vec::with_capacity(levels.len());
    idx.push(0);
    for l in &levels[1..levels.len() - 1] {
        let i = d.snap_boundary(*l).clamp(1, n - 1);
        let prev = *idx.last().unwrap();
        idx.push(i.max(prev + 1).min(n - 1));
    }
    idx.push(n);
    let snapped: Vec<f64> = idx.iter().map(|i| d.boundary(*i)).collect();
    let points = quantizer::centroid_step(d, &snapped)?;
    ScalarQuantizer::from_parts(snapped, points)
}

/// Rate-`rate` Lloyd-Max design for the current belief, grid-aligned.
pub fn design_quantizer(belief: &GriddedDensity, rate: u32) -> Result<ScalarQuantizer> {
    if rate == 0 {
        let c = belief.mean();
        return ScalarQuantizer::from_parts(vec![belief.lo(), belief.hi()], vec![c]);
    }
    let q = quantizer::lloyd_max(belief, rate, quantizer::DEFAULT_TOL, quantizer::DEFAULT_MAX_ITER)?;
    snap_to_grid(belief, q.levels())
}

/// Event-triggered design: silent-cell boundaries snap outward so the snapped
/// silent cell never loses mass against the constraint. `delta = 0` is the
/// unconstrained limit (plain three-level Lloyd-Max, heaviest cell silent).
pub fn design_silent_quantizer(belief: &GriddedDensity, delta: f64) -> Result<SilentQuantizer> {
    let sq = if delta > 0.0 {
        silent::min_cell_prob_quantizer(
            belief,
            delta,
            quantizer::DEFAULT_TOL,
            quantizer::DEFAULT_MAX_ITER,
        )?
    } else {
        let fit = quantizer::lloyd_max_cells(
            belief,
            3,
            quantizer::DEFAULT_TOL,
            quantizer::DEFAULT_MAX_ITER,
        )?;
        let silent_index = (0..3)
            .max_by(|&a, &b| {
                let ma = belief.mass_on(fit.quantizer.cell(a));
                let mb = belief.mass_on(fit.quantizer.cell(b));
                ma.partial_cmp(&mb).unwrap()
            })
            .unwrap();
        SilentQuantizer { quantizer: fit.quantizer, silent_index, delta: 0.0 }
    };
    let n = belief.len();
    let lv = sq.quantizer.levels();
    let (p1, p2) = (lv[1], lv[2]);
    let to_idx = |x: f64, down: bool| -> usize {
        let pos = (x - belief.lo()) / belief.step();
        let i = if down { pos.floor() } else { pos.ceil() };
        (i.max(0.0) as usize).min(n)
    };
    let (i1, i2) = match sq.silent_index {
        0 => (to_idx(p1, false), to_idx(p2, false).max(to_idx(p1, false) + 1)),
        1 => {
            let a = to_idx(p1, true);
            (a, to_idx(p2, false).max(a + 1))
        }
        _ => {
            let b = to_idx(p2, true);
            (to_idx(p1, true).min(b.saturating_sub(1)), b)
        }
    };
    let i1 = i1.clamp(1, n - 2);
    let i2 = i2.clamp(i1 + 1, n - 1);
    let levels = vec![belief.lo(), belief.boundary(i1), belief.boundary(i2), belief.hi()];
    let points = quantizer::centroid_step(belief, &levels)?;
    Ok(SilentQuantizer {
        quantizer: ScalarQuantizer::from_parts(levels, points)?,
        silent_index: sq.silent_index,
        delta,
    })
}

/// Posterior-to-next-prior update shared by both ends: truncate to the
/// received cell, apply the plant map `x -> a x + u`, and in the i.i.d. regime
/// convolve with the disturbance (the LQR regime has none).
pub fn advance_belief(
    state: &CoderState,
    spec: &SystemSpec,
    k_gain: f64,
    q: &ScalarQuantizer,
    index: usize,
) -> Result<CoderState> {
    let xhat = q.decode(index)?;
    let u = -k_gain * xhat;
    let (posterior, _gamma) = state.belief.truncate_normalize(q.cell(index))?;
    let moved = posterior.affine(spec.a, u)?;
    let belief = match spec.mode {
        Mode::Iid => moved
            .resample_to_step(spec.disturbance.step(), spec.disturbance.lo())
            .convolve(&spec.disturbance),
        Mode::Lqr => moved,
    };
    Ok(CoderState { belief, t: state.t + 1, last_xhat: xhat, last_u: u })
}

/// Observer/encoder step of the greedy policy: design, quantize, transmit the
/// index, and filter.
pub fn greedy_observer_step(
    state: &CoderState,
    spec: &SystemSpec,
    gains: &RiccatiGains,
    x: f64,
) -> Result<(usize, CoderState)> {
    let q = design_quantizer(&state.belief, spec.rate(state.t))?;
    let index = q.encode(x);
    let next = advance_belief(state, spec, gains.k_at(state.t), &q, index)?;
    Ok((index, next))
}

/// Controller/decoder step of the greedy policy: mirrors the observer's belief
/// computation bit for bit and returns the actuation.
pub fn greedy_controller_step(
    state: &CoderState,
    spec: &SystemSpec,
    gains: &RiccatiGains,
    index: usize,
) -> Result<(f64, CoderState)> {
    let q = design_quantizer(&state.belief, spec.rate(state.t))?;
    let next = advance_belief(state, spec, gains.k_at(state.t), &q, index)?;
    Ok((next.last_u, next))
}

/// What travels over the channel in the event-triggered scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelSymbol {
    Silent,
    Index(u8),
}

/// Event-triggered observer step: silence stands in for the silent cell's index.
pub fn event_observer_step(
    state: &CoderState,
    spec: &SystemSpec,
    gains: &RiccatiGains,
    delta: f64,
    x: f64,
) -> Result<(ChannelSymbol, CoderState)> {
    let sq = design_silent_quantizer(&state.belief, delta)?;
    let index = sq.quantizer.encode(x);
    let symbol = if index == sq.silent_index {
        ChannelSymbol::Silent
    } else {
        ChannelSymbol::Index(index as u8)
    };
    let next = advance_belief(state, spec, gains.k_at(state.t), &sq.quantizer, index)?;
    Ok((symbol, next))
}

/// Event-triggered controller step: silence decodes to the silent cell.
pub fn event_controller_step(
    state: &CoderState,
    spec: &SystemSpec,
    gains: &RiccatiGains,
    delta: f64,
    symbol: ChannelSymbol,
) -> Result<(f64, CoderState)> {
    let sq = design_silent_quantizer(&state.belief, delta)?;
    let index = match symbol {
        ChannelSymbol::Silent => sq.silent_index,
        ChannelSymbol::Index(i) => i as usize,
    };
    let next = advance_belief(state, spec, gains.k_at(state.t), &sq.quantizer, index)?;
    Ok((next.last_u, next))
}

/// Weights `a^{2(t-1)} g_t` that turn the LQ cost into a weighted
/// quantization distortion over refinement stages.
pub fn lqr_weights(gains: &RiccatiGains, a: f64) -> Vec<f64> {
    gains
        .g
        .iter()
        .enumerate()
        .map(|(i, g)| a.powi(2 * i as i32) * g)
        .collect()
}

/// Globally optimal LQR policy: a multi-resolution quantizer over the initial
/// disturbance plus the certainty-equivalent state-estimate recursion.
#[derive(Debug, Clone)]
pub struct LqrPolicy {
    pub mrsq: MultiResolutionQuantizer,
    pub stage_distortions: Vec<f64>,
    pub gains: RiccatiGains,
    pub a: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct LqrStep {
    pub t: usize,
    pub w_hat: f64,
    pub x_hat: f64,
    pub u: f64,
}

pub fn lqr_policy(spec: &SystemSpec, tol: f64, max_iter: usize) -> Result<LqrPolicy> {
    if spec.mode != Mode::Lqr {
        return Err(Error::invalid("mode", "lqr_policy needs mode = lqr"));
    }
    if spec.horizon < 2 {
        return Err(Error::invalid("horizon", "nothing to transmit before T"));
    }
    let gains = riccati(spec);
    let weights_full = lqr_weights(&gains, spec.a);
    let stage_weights = &weights_full[..spec.horizon - 1];
    if let Some(t) = stage_weights.iter().position(|w| !(*w > 0.0)) {
        return Err(Error::invalid(
            "weights",
            format!("stage {} has non-positive weight g~={}", t + 1, stage_weights[t]),
        ));
    }
    let glm = mrsq::generalized_lloyd_max(&spec.disturbance, &spec.rates, stage_weights, tol, max_iter)?;
    Ok(LqrPolicy {
        mrsq: glm.mrsq,
        stage_distortions: glm.stage_distortions,
        gains,
        a: spec.a,
        horizon: spec.horizon,
    })
}

impl LqrPolicy {
    /// Decoder-side trajectory for one realization of the initial disturbance:
    /// progressive refinement plus `x̂_t = a x̂_{t-1} + u_{t-1} + a^{t-1}(ŵ_t - ŵ_{t-1})`.
    pub fn run(&self, w0: f64) -> Result<Vec<LqrStep>> {
        let idx = self.mrsq.encode(w0);
        let mut out = Vec::with_capacity(self.horizon);
        let mut x_hat = 0.0;
        let mut w_hat = 0.0;
        let mut u_prev = 0.0;
        for t in 1..=self.horizon {
            let w_new = if t <= self.horizon - 1 {
                self.mrsq.decode_prefix(&idx[..t])?
            } else {
                w_hat // no transmission at the horizon
            };
            x_hat = self.a * x_hat + u_prev + self.a.powi(t as i32 - 1) * (w_new - w_hat);
            w_hat = w_new;
            let u = -self.gains.k_at(t) * x_hat;
            out.push(LqrStep { t, w_hat, x_hat, u });
            u_prev = u;
        }
        Ok(out)
    }
}

/// The separation-principle cost: `J̄_T = (1/T) Σ (s_t σ²_{W_t} + g_t MSE_t)`.
/// In the i.i.d. regime every step injects the disturbance variance; in the
/// LQR regime only the first does.
pub fn cost_decomposition(spec: &SystemSpec, gains: &RiccatiGains, mse: &[f64]) -> Result<f64> {
    if mse.len() != spec.horizon {
        return Err(Error::invalid("mse", "need one MSE per step"));
    }
    let sigma2 = spec.disturbance.variance();
    let mut sum = 0.0;
    for t in 1..=spec.horizon {
        let sigma_t = match spec.mode {
            Mode::Iid => sigma2,
            Mode::Lqr => {
                if t == 1 {
                    sigma2
                } else {
                    0.0
                }
            }
        };
        sum += gains.s_at(t) * sigma_t + gains.g_at(t) * mse[t - 1];
    }
    Ok(sum / spec.horizon as f64)
}

/// Instantaneous-cost bounds for the variable-rate relaxation, both recursions
/// started from zero. Divergent parameter choices simply return growing
/// sequences.
pub fn prop4_bounds(a: f64, rate: f64, sigma2: f64, horizon: usize) -> (Vec<f64>, Vec<f64>) {
    let shrink = 2f64.powf(-2.0 * rate);
    let ub_coef = std::f64::consts::PI * std::f64::consts::E / 6.0;
    let mut lb = Vec::with_capacity(horizon);
    let mut ub = Vec::with_capacity(horizon);
    let (mut l, mut u) = (0.0f64, 0.0f64);
    for _ in 0..horizon {
        l = a * a * l * shrink + sigma2;
        u = ub_coef * a * a * u * shrink + sigma2;
        lb.push(l);
        ub.push(u);
    }
    (lb, ub)
}

/// Fixed points of the Prop-4 recursions, when they exist.
pub fn prop4_fixed_points(a: f64, rate: f64, sigma2: f64) -> (Option<f64>, Option<f64>) {
    let shrink = 2f64.powf(-2.0 * rate);
    let lb_coef = a * a * shrink;
    let ub_coef = std::f64::consts::PI * std::f64::consts::E / 6.0 * a * a * shrink;
    let fp = |c: f64| (c < 1.0).then(|| sigma2 / (1.0 - c));
    (fp(lb_coef), fp(ub_coef))
}
