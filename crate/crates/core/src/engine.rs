//! Iteration engine for the state-decomposed push-pull method and for the
//! plain push-pull baseline.
//!
//! Every agent keeps a decision variable `x` and splits its gradient tracker
//! into a shared part `y_alpha` and a private part `y_beta`. Only `x`,
//! `Λ y_alpha` and `C y_alpha` ever leave an agent.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::objective::ProblemInstance;
use crate::schedule::{self, IterationWeights, WeightHistory, DEFAULT_K0_MAGNITUDE};
use crate::topology::Digraph;

/// Residual above which a run is declared diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e12;

const INIT_STREAM: u64 = 0;
const WEIGHT_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: Vec<f64>,
    pub y_alpha: Vec<f64>,
    pub y_beta: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkState {
    pub k: usize,
    pub agents: Vec<AgentState>,
    /// Absolute probability vector over the `2n` sub-agents (shared parts
    /// first), present from `k = 1`.
    pub v: Option<Vec<f64>>,
    /// `∇f_i(x_i^k)`, cached so each step evaluates each oracle once.
    pub grads: Vec<Vec<f64>>,
}

impl NetworkState {
    /// Wraps explicit agent states, evaluating the gradient cache.
    pub fn from_agents(k: usize, agents: Vec<AgentState>, v: Option<Vec<f64>>, instance: &ProblemInstance) -> Self {
        let grads = agents
            .iter()
            .zip(&instance.objectives)
            .map(|(a, f)| f.gradient(&a.x))
            .collect();
        NetworkState { k, agents, v, grads }
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    /// `s = y / v` per sub-agent, shared parts first. `None` before `k = 1`.
    pub fn normalized_trackers(&self) -> Option<Vec<Vec<f64>>> {
        let v = self.v.as_ref()?;
        let n = self.n();
        Some(
            (0..2 * n)
                .map(|q| {
                    let y = if q < n { &self.agents[q].y_alpha } else { &self.agents[q - n].y_beta };
                    y.iter().map(|t| t / v[q]).collect()
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum X0Policy {
    #[default]
    Zeros,
    Gaussian { std: f64 },
}

/// Draws `x^0` per policy and `y_alpha^0` uniformly on `[-magnitude, magnitude]^d`,
/// closing `y_beta^0 = ∇f_i(x_i^0) − y_alpha^0`.
pub fn init_state(
    instance: &ProblemInstance,
    x0: X0Policy,
    magnitude: f64,
    rng: &mut impl Rng,
) -> Result<NetworkState> {
    let d = instance.d;
    let mut agents = Vec::with_capacity(instance.n());
    let mut grads = Vec::with_capacity(instance.n());
    for f in &instance.objectives {
        let x: Vec<f64> = match x0 {
            X0Policy::Zeros => vec![0.0; d],
            X0Policy::Gaussian { std } => {
                let normal = Normal::new(0.0, std).map_err(|e| invalid(format!("x0 std {std}: {e}")))?;
                (0..d).map(|_| normal.sample(rng)).collect()
            }
        };
        let y_alpha: Vec<f64> = (0..d).map(|_| rng.gen_range(-magnitude..=magnitude)).collect();
        let g = f.gradient(&x);
        let y_beta = g.iter().zip(&y_alpha).map(|(a, b)| a - b).collect();
        agents.push(AgentState { x, y_alpha, y_beta });
        grads.push(g);
    }
    Ok(NetworkState {
        k: 0,
        agents,
        v: None,
        grads,
    })
}

/// One synchronous round of the state-decomposed method.
///
/// ```text
/// x_i'       = Σ_j R_ij x_j − A_ij Λ_j y_{j,α}
/// y_{i,α}'   = Σ_j C_ij y_{j,α} + (I − Φβ_i) y_{i,β}
/// y_{i,β}'   = Φα_i y_{i,α} + Φβ_i y_{i,β} + ∇f_i(x_i') − ∇f_i(x_i)
/// ```
///
/// Weights are applied as given; no validation happens here.
pub fn ppsd_step(s: &NetworkState, w: &IterationWeights, instance: &ProblemInstance) -> Result<NetworkState> {
    if w.k != s.k {
        return Err(invalid(format!("weights for k={} applied to state k={}", w.k, s.k)));
    }
    let n = s.n();
    let d = instance.d;
    if w.n() != n || w.d != d || instance.n() != n {
        return Err(invalid("weights, state and instance disagree on n or d"));
    }

    // Λ_j y_{j,α} is what j broadcasts.
    let scaled: Vec<Vec<f64>> = (0..n).map(|j| w.lambda[j].apply(&s.agents[j].y_alpha)).collect();

    let mut next: Vec<AgentState> = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = vec![0.0; d];
        for (j, r) in &w.r[i] {
            let xj = &s.agents[j - 1].x;
            for l in 0..d {
                x[l] += r.at(l) * xj[l];
            }
        }
        for (j, a) in &w.a[i] {
            let sj = &scaled[j - 1];
            for l in 0..d {
                x[l] -= a.at(l) * sj[l];
            }
        }
        next.push(AgentState {
            x,
            y_alpha: vec![0.0; d],
            y_beta: vec![0.0; d],
        });
    }

    for i in 0..n {
        let cur = &s.agents[i];
        for (j, c) in &w.c[i] {
            let target = &mut next[j - 1].y_alpha;
            for l in 0..d {
                target[l] += c.at(l) * cur.y_alpha[l];
            }
        }
    }

    let mut grads = Vec::with_capacity(n);
    for i in 0..n {
        let cur = &s.agents[i];
        let (alpha, beta) = (&w.phi_alpha[i], &w.phi_beta[i]);
        let g_new = instance.objectives[i].gradient(&next[i].x);
        let nx = &mut next[i];
        for l in 0..d {
            nx.y_alpha[l] += (1.0 - beta.at(l)) * cur.y_beta[l];
            nx.y_beta[l] = alpha.at(l) * cur.y_alpha[l] + beta.at(l) * cur.y_beta[l] + g_new[l]
                - s.grads[i][l];
        }
        grads.push(g_new);
    }

    let v = match &s.v {
        None if s.k == 0 => Some(vec![1.0 / (2 * n) as f64; 2 * n]),
        None => return Err(invalid(format!("state at k={} has no v vector", s.k))),
        Some(v) => Some(advance_v(v, w)),
    };

    Ok(NetworkState {
        k: s.k + 1,
        agents: next,
        v,
        grads,
    })
}

/// `v' = Č v` with the scalar `k >= 1` weights.
fn advance_v(v: &[f64], w: &IterationWeights) -> Vec<f64> {
    let n = w.n();
    let mut out = vec![0.0; 2 * n];
    for i in 1..=n {
        for (j, c) in &w.c[i - 1] {
            out[j - 1] += c.at(0) * v[i - 1];
        }
        let beta = w.phi_beta[i - 1].at(0);
        out[i - 1] += (1.0 - beta) * v[n + i - 1];
        out[n + i - 1] = w.phi_alpha[i - 1].at(0) * v[i - 1] + beta * v[n + i - 1];
    }
    out
}

/// Baseline push-pull round with fixed uniform weights
/// `r_ij = 1/(|N_i^in|+1)`, `c_ij = 1/(|N_j^out|+1)`.
///
/// The single tracker lives in `y_alpha`; `y_beta` stays zero.
pub fn pushpull_step(s: &NetworkState, g: &Digraph, gamma: f64, instance: &ProblemInstance) -> Result<NetworkState> {
    let n = s.n();
    let d = instance.d;
    if g.n() != n || instance.n() != n {
        return Err(invalid("graph, state and instance disagree on n"));
    }
    let mut next = Vec::with_capacity(n);
    let mut grads = Vec::with_capacity(n);
    for i in 1..=n {
        let r = 1.0 / (g.ins(i).len() + 1) as f64;
        let mut x: Vec<f64> = s.agents[i - 1].x.iter().map(|v| r * v).collect();
        for &j in g.ins(i) {
            for (xl, xj) in x.iter_mut().zip(&s.agents[j - 1].x) {
                *xl += r * xj;
            }
        }
        for (xl, yl) in x.iter_mut().zip(&s.agents[i - 1].y_alpha) {
            *xl -= gamma * yl;
        }
        next.push(AgentState {
            x,
            y_alpha: vec![0.0; d],
            y_beta: vec![0.0; d],
        });
    }
    for i in 1..=n {
        let c = 1.0 / (g.outs(i).len() + 1) as f64;
        for &j in g.outs(i).iter().chain(std::iter::once(&i)) {
            for (t, y) in next[j - 1].y_alpha.iter_mut().zip(&s.agents[i - 1].y_alpha) {
                *t += c * y;
            }
        }
    }
    for i in 0..n {
        let g_new = instance.objectives[i].gradient(&next[i].x);
        for l in 0..d {
            next[i].y_alpha[l] += g_new[l] - s.grads[i][l];
        }
        grads.push(g_new);
    }
    Ok(NetworkState {
        k: s.k + 1,
        agents: next,
        v: None,
        grads,
    })
}

/// Baseline initial state: `y_i^0 = ∇f_i(x_i^0)`.
pub fn init_baseline_state(instance: &ProblemInstance, x0: X0Policy, rng: &mut impl Rng) -> Result<NetworkState> {
    let mut s = init_state(instance, x0, 1.0, rng)?;
    for (a, g) in s.agents.iter_mut().zip(&s.grads) {
        a.y_alpha = g.clone();
        a.y_beta = vec![0.0; g.len()];
    }
    Ok(s)
}

fn norm(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(|t| t * t).sum::<f64>().sqrt()
}

/// `‖Σ_i (y_{i,α} + y_{i,β}) − Σ_i ∇f_i(x_i)‖`.
pub fn tracking_residual(s: &NetworkState, instance: &ProblemInstance) -> f64 {
    let d = instance.d;
    let mut acc = vec![0.0; d];
    for (a, f) in s.agents.iter().zip(&instance.objectives) {
        let g = f.gradient(&a.x);
        for l in 0..d {
            acc[l] += a.y_alpha[l] + a.y_beta[l] - g[l];
        }
    }
    norm(acc)
}

/// `‖Σ_i ∇f_i(x_i)‖`, the scale used by the tracking tolerance.
pub fn gradient_sum_norm(s: &NetworkState, instance: &ProblemInstance) -> f64 {
    let d = instance.d;
    let mut acc = vec![0.0; d];
    for (a, f) in s.agents.iter().zip(&instance.objectives) {
        for (t, g) in acc.iter_mut().zip(f.gradient(&a.x)) {
            *t += g;
        }
    }
    norm(acc)
}

/// `‖x − 1 ⊗ x*‖`.
pub fn residual(s: &NetworkState, instance: &ProblemInstance) -> f64 {
    norm(s.agents.iter().flat_map(|a| a.x.iter().zip(&instance.x_star).map(|(x, t)| x - t)))
}

/// Consensus error, optimality gap and gradient-estimation error with
/// `phi` standing in for the absolute probability vector of `R̄`.
/// The third entry is `None` until `v` exists.
pub fn error_triplet(s: &NetworkState, instance: &ProblemInstance, phi: &[f64]) -> (f64, f64, Option<f64>) {
    let d = instance.d;
    let n = s.n();
    let mut xbar = vec![0.0; d];
    for (a, p) in s.agents.iter().zip(phi) {
        for l in 0..d {
            xbar[l] += p * a.x[l];
        }
    }
    let consensus = norm(s.agents.iter().flat_map(|a| a.x.iter().zip(&xbar).map(|(x, m)| x - m)));
    let gap = (n as f64).sqrt() * norm(xbar.iter().zip(&instance.x_star).map(|(a, b)| a - b));
    let grad_est = s.normalized_trackers().map(|sv| {
        // Σ_q v_q s_q = Σ_q y_q
        let mut mean = vec![0.0; d];
        for a in &s.agents {
            for l in 0..d {
                mean[l] += a.y_alpha[l] + a.y_beta[l];
            }
        }
        norm(sv.iter().flat_map(|q| q.iter().zip(&mean).map(|(a, b)| a - b)))
    });
    (consensus, gap, grad_est)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Ppsd,
    Pushpull,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    Diverged,
    /// A replayed weight history ran out.
    ScheduleExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub k: usize,
    pub residual: f64,
    pub tracking_residual: f64,
    pub consensus_err: f64,
    pub opt_gap: f64,
    pub grad_est_err: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecordOptions {
    pub states: bool,
    pub weights: bool,
}

impl Default for RecordOptions {
    fn default() -> Self {
        RecordOptions {
            states: true,
            weights: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    /// Lower weight bound for `k >= 1`; `None` picks [`schedule::default_eta`].
    pub eta: Option<f64>,
    pub k_max: usize,
    /// Stop once the residual drops below this; `0` never stops early.
    pub epsilon: f64,
    pub seed: u64,
    pub k0_magnitude: f64,
    pub y_alpha_magnitude: f64,
    pub x0: X0Policy,
    pub record: RecordOptions,
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, gamma: f64, seed: u64) -> Self {
        RunConfig {
            algorithm,
            gamma,
            eta: None,
            k_max: 5000,
            epsilon: 1e-8,
            seed,
            k0_magnitude: DEFAULT_K0_MAGNITUDE,
            y_alpha_magnitude: 1.0,
            x0: X0Policy::Zeros,
            record: RecordOptions::default(),
        }
    }
}

/// `1 / (2 n L)`.
pub fn default_gamma(instance: &ProblemInstance) -> f64 {
    1.0 / (2.0 * instance.n() as f64 * instance.l)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: RunConfig,
    pub eta: f64,
    pub diagnostics: Vec<Diagnostics>,
    pub weights: Option<WeightHistory>,
    pub states: Option<Vec<NetworkState>>,
    pub final_state: NetworkState,
    pub stop: StopReason,
}

impl RunRecord {
    pub fn iterations(&self) -> usize {
        self.final_state.k
    }

    pub fn final_residual(&self) -> f64 {
        self.diagnostics.last().map_or(f64::NAN, |d| d.residual)
    }

    pub fn residuals(&self) -> Vec<f64> {
        self.diagnostics.iter().map(|d| d.residual).collect()
    }

    pub fn state(&self, k: usize) -> Option<&NetworkState> {
        self.states.as_ref()?.get(k)
    }

    /// Diagnostics as CSV with 17 significant digits; an empty cell marks a
    /// quantity that is undefined at that iteration.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,residual,tracking_residual,consensus_err,opt_gap,grad_est_err\n");
        for d in &self.diagnostics {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                d.k,
                fmt17(d.residual),
                fmt17(d.tracking_residual),
                fmt17(d.consensus_err),
                fmt17(d.opt_gap),
                d.grad_est_err.map(fmt17).unwrap_or_default()
            ));
        }
        out
    }
}

/// Full-precision decimal rendering used in every CSV artifact.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Where a run's weights come from.
pub enum Schedule<'a> {
    /// Fresh seeded draws: arbitrary regime at `k = 0`, bounded stochastic after.
    Random,
    /// Replays a recorded history; the run ends when it runs out.
    Replay(&'a WeightHistory),
}

fn diagnose(s: &NetworkState, instance: &ProblemInstance) -> Diagnostics {
    let n = s.n();
    let phi = vec![1.0 / n as f64; n];
    let (consensus_err, opt_gap, grad_est_err) = error_triplet(s, instance, &phi);
    Diagnostics {
        k: s.k,
        residual: residual(s, instance),
        tracking_residual: tracking_residual(s, instance),
        consensus_err,
        opt_gap,
        grad_est_err,
    }
}

/// Runs from a fresh seeded initial state with freshly drawn weights.
pub fn run(g: &Digraph, instance: &ProblemInstance, cfg: &RunConfig) -> Result<RunRecord> {
    run_with(g, instance, cfg, None, Schedule::Random)
}

/// General entry point: optional explicit initial state and weight source.
pub fn run_with(
    g: &Digraph,
    instance: &ProblemInstance,
    cfg: &RunConfig,
    initial: Option<NetworkState>,
    source: Schedule<'_>,
) -> Result<RunRecord> {
    if g.n() != instance.n() {
        return Err(invalid(format!("graph has {} agents, problem has {}", g.n(), instance.n())));
    }
    if !g.is_strongly_connected() {
        return Err(invalid("communication graph is not strongly connected"));
    }
    if !(cfg.gamma > 0.0 && cfg.gamma.is_finite()) {
        return Err(invalid(format!("step size {} must be positive", cfg.gamma)));
    }
    let eta = cfg.eta.unwrap_or_else(|| schedule::default_eta(g));
    let d = instance.d;

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    init_rng.set_stream(INIT_STREAM);
    let mut weight_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    weight_rng.set_stream(WEIGHT_STREAM);

    let mut state = match initial {
        Some(s) => s,
        None => match cfg.algorithm {
            Algorithm::Ppsd => init_state(instance, cfg.x0, cfg.y_alpha_magnitude, &mut init_rng)?,
            Algorithm::Pushpull => init_baseline_state(instance, cfg.x0, &mut init_rng)?,
        },
    };
    if state.n() != instance.n() {
        return Err(invalid("initial state has the wrong number of agents"));
    }

    let mut history = cfg.record.weights.then(WeightHistory::new);
    let mut states = cfg.record.states.then(Vec::new);
    let mut diagnostics = vec![diagnose(&state, instance)];

    let stop = loop {
        let last = diagnostics.last().expect("non-empty");
        if !last.residual.is_finite() || last.residual > DIVERGENCE_THRESHOLD {
            break StopReason::Diverged;
        }
        if last.residual < cfg.epsilon {
            break StopReason::Converged;
        }
        if state.k >= cfg.k_max {
            break StopReason::MaxIterations;
        }
        let next = match cfg.algorithm {
            Algorithm::Pushpull => pushpull_step(&state, g, cfg.gamma, instance)?,
            Algorithm::Ppsd => {
                let w = match &source {
                    Schedule::Replay(h) => match h.get(state.k) {
                        Some(w) => w.clone(),
                        None => break StopReason::ScheduleExhausted,
                    },
                    Schedule::Random if state.k == 0 => {
                        schedule::init_weights_k0(g, d, cfg.k0_magnitude, &mut weight_rng)?
                    }
                    Schedule::Random => schedule::weights_k(g, d, state.k, eta, cfg.gamma, &mut weight_rng)?,
                };
                let next = ppsd_step(&state, &w, instance)?;
                if let Some(h) = history.as_mut() {
                    h.push(w)?;
                }
                next
            }
        };
        if let Some(st) = states.as_mut() {
            st.push(std::mem::replace(&mut state, next));
        } else {
            state = next;
        }
        diagnostics.push(diagnose(&state, instance));
    };

    if let Some(st) = states.as_mut() {
        st.push(state.clone());
    }
    Ok(RunRecord {
        config: cfg.clone(),
        eta,
        diagnostics,
        weights: history,
        states,
        final_state: state,
        stop,
    })
}

/// Backward estimate of the absolute probability sequence of `R̄^k` over a
/// recorded history: `φ^{K+1}` uniform, `φ^k = (R̄^k)ᵀ φ^{k+1}`.
/// Entry `k` of the result is `φ^k`; entry 0 repeats entry 1 because the
/// `k = 0` weights are not stochastic.
pub fn phi_backward(history: &WeightHistory, n: usize) -> Vec<Vec<f64>> {
    let len = history.len();
    let mut out = vec![vec![1.0 / n as f64; n]; len + 1];
    for k in (1..len).rev() {
        let w = history.get(k).expect("in range");
        let mut phi = vec![0.0; n];
        for i in 1..=n {
            for (j, r) in &w.r[i - 1] {
                phi[j - 1] += r.at(0) * out[k + 1][i - 1];
            }
        }
        out[k] = phi;
    }
    if len >= 2 {
        out[0] = out[1].clone();
    }
    out
}

/// Recomputes the error triplet over a recorded trajectory with the
/// backward `φ` estimate.
pub fn backward_error_triplets(record: &RunRecord, instance: &ProblemInstance) -> Option<Vec<(f64, f64, Option<f64>)>> {
    let states = record.states.as_ref()?;
    let history = record.weights.as_ref()?;
    let phis = phi_backward(history, instance.n());
    Some(
        states
            .iter()
            .map(|s| error_triplet(s, instance, &phis[s.k.min(phis.len() - 1)]))
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::g1_graph;
    use crate::objective::{rendezvous, ProblemSpec};
    use crate::schedule::DiagWeight;
    use nalgebra::{DMatrix, DVector};

    fn two_agent_instance() -> ProblemInstance {
        rendezvous(&[vec![1.0], vec![-1.0]]).unwrap()
    }

    fn scalar_weights(k: usize, r: f64, c_self: f64, c_other: f64, alpha: f64, beta: f64, gamma: f64) -> IterationWeights {
        IterationWeights {
            k,
            d: 1,
            eta: Some(0.1),
            r: vec![
                vec![(1, DiagWeight::Scalar(r)), (2, DiagWeight::Scalar(r))],
                vec![(1, DiagWeight::Scalar(r)), (2, DiagWeight::Scalar(r))],
            ],
            a: vec![
                vec![(1, DiagWeight::Scalar(r)), (2, DiagWeight::Scalar(r))],
                vec![(1, DiagWeight::Scalar(r)), (2, DiagWeight::Scalar(r))],
            ],
            c: vec![
                vec![(1, DiagWeight::Scalar(c_self)), (2, DiagWeight::Scalar(c_other))],
                vec![(1, DiagWeight::Scalar(c_other)), (2, DiagWeight::Scalar(c_self))],
            ],
            lambda: vec![DiagWeight::Scalar(gamma); 2],
            phi_alpha: vec![DiagWeight::Scalar(alpha); 2],
            phi_beta: vec![DiagWeight::Scalar(beta); 2],
        }
    }

    #[test]
    fn hand_evaluated_step() {
        let inst = two_agent_instance();
        let s = NetworkState::from_agents(
            1,
            vec![
                AgentState { x: vec![1.0], y_alpha: vec![0.2], y_beta: vec![-0.2] },
                AgentState { x: vec![-1.0], y_alpha: vec![0.4], y_beta: vec![-0.4] },
            ],
            Some(vec![0.25; 4]),
            &inst,
        );
        let w = scalar_weights(1, 0.5, 0.4, 0.3, 0.3, 0.5, 0.1);
        let next = ppsd_step(&s, &w, &inst).unwrap();
        let expect = [(-0.03, 0.10, -1.07), (-0.03, 0.02, 0.89)];
        for (a, (x, ya, yb)) in next.agents.iter().zip(expect) {
            assert!((a.x[0] - x).abs() < 1e-15);
            assert!((a.y_alpha[0] - ya).abs() < 1e-15);
            assert!((a.y_beta[0] - yb).abs() < 1e-15);
        }
        let total: f64 = next.agents.iter().map(|a| a.y_alpha[0] + a.y_beta[0]).sum();
        assert!((total + 0.06).abs() < 1e-15);
        assert!(tracking_residual(&next, &inst) < 1e-15);
        assert_eq!(next.k, 2);

        let wrong_k = scalar_weights(4, 0.5, 0.4, 0.3, 0.3, 0.5, 0.1);
        assert!(ppsd_step(&s, &wrong_k, &inst).is_err());
    }

    #[test]
    fn zero_gradient_is_pure_consensus() {
        // Both agents at the same point: gradients vanish where x = p.
        let inst = rendezvous(&[vec![0.0], vec![0.0]]).unwrap();
        let s = NetworkState::from_agents(
            1,
            vec![
                AgentState { x: vec![3.0], y_alpha: vec![0.0], y_beta: vec![0.0] },
                AgentState { x: vec![1.0], y_alpha: vec![0.0], y_beta: vec![0.0] },
            ],
            Some(vec![0.25; 4]),
            &inst,
        );
        let w = scalar_weights(1, 0.5, 0.4, 0.3, 0.3, 0.5, 0.1);
        let next = ppsd_step(&s, &w, &inst).unwrap();
        assert_eq!(next.agents[0].x[0], 2.0);
        assert_eq!(next.agents[1].x[0], 2.0);
    }

    #[test]
    fn init_state_closure() {
        let inst = rendezvous(&[vec![1.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = init_state(&inst, X0Policy::Zeros, 1.0, &mut rng).unwrap();
        let a = &s.agents[0];
        assert_eq!(a.y_beta[0], -1.0 - a.y_alpha[0]);
        assert_eq!(tracking_residual(&s, &inst), 0.0);

        let five = ProblemSpec::RandomRendezvous { n: 5, d: 3, scale: 10.0, seed: Some(2) }.build().unwrap();
        let mk = || init_state(&five, X0Policy::Gaussian { std: 1.0 }, 2.0, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let s = mk();
        assert_eq!(s, mk());
        for (a, f) in s.agents.iter().zip(&five.objectives) {
            let g = f.gradient(&a.x);
            for l in 0..3 {
                assert_eq!(a.y_alpha[l] + a.y_beta[l], a.y_alpha[l] + (g[l] - a.y_alpha[l]));
            }
        }
    }

    /// Dense stacked evaluation: x' = R x − A Λ T y, y' = Ĉ y + ∇f̂(x') − ∇f̂(x).
    fn dense_step(s: &NetworkState, w: &IterationWeights, inst: &ProblemInstance) -> (DVector<f64>, DVector<f64>) {
        let n = s.n();
        let d = inst.d;
        let nd = n * d;
        let mut r = DMatrix::zeros(nd, nd);
        let mut a = DMatrix::zeros(nd, nd);
        let mut lam = DMatrix::zeros(nd, nd);
        let mut ch = DMatrix::zeros(2 * nd, 2 * nd);
        for i in 1..=n {
            for l in 0..d {
                let row = (i - 1) * d + l;
                for (j, v) in &w.r[i - 1] {
                    r[(row, (j - 1) * d + l)] = v.at(l);
                }
                for (j, v) in &w.a[i - 1] {
                    a[(row, (j - 1) * d + l)] = v.at(l);
                }
                lam[(row, row)] = w.lambda[i - 1].at(l);
                for (j, v) in &w.c[i - 1] {
                    ch[((j - 1) * d + l, row)] = v.at(l);
                }
                let beta = w.phi_beta[i - 1].at(l);
                ch[(row, nd + row)] = 1.0 - beta;
                ch[(nd + row, row)] = w.phi_alpha[i - 1].at(l);
                ch[(nd + row, nd + row)] = beta;
            }
        }
        let x = DVector::from_iterator(nd, s.agents.iter().flat_map(|ag| ag.x.clone()));
        let y = DVector::from_iterator(
            2 * nd,
            s.agents.iter().flat_map(|ag| ag.y_alpha.clone()).chain(s.agents.iter().flat_map(|ag| ag.y_beta.clone())),
        );
        let ty = y.rows(0, nd).into_owned();
        let x_new = &r * &x - &a * (&lam * ty);
        let grad = |xv: &DVector<f64>| {
            let mut g = DVector::zeros(2 * nd);
            for (i, f) in inst.objectives.iter().enumerate() {
                let gi = f.gradient(xv.rows(i * d, d).as_slice());
                g.rows_mut(nd + i * d, d).copy_from_slice(&gi);
            }
            g
        };
        let y_new = &ch * &y + grad(&x_new) - grad(&x);
        (x_new, y_new)
    }

    #[test]
    fn per_agent_step_matches_dense_stacked_form() {
        for seed in 0..20u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = Digraph::random_strongly_connected(4, 0.4, seed).unwrap();
            let inst = crate::objective::random_linear_regression(4, 3, 5, 0.2, seed).unwrap();
            let s0 = init_state(&inst, X0Policy::Gaussian { std: 1.0 }, 1.0, &mut rng).unwrap();
            let w0 = schedule::init_weights_k0(&g, 3, 10.0, &mut rng).unwrap();
            let w1 = schedule::weights_k(&g, 3, 1, schedule::default_eta(&g), 0.05, &mut rng).unwrap();
            let s1 = ppsd_step(&s0, &w0, &inst).unwrap();
            for (s, w, nxt) in [(&s0, &w0, &s1), (&s1, &w1, &ppsd_step(&s1, &w1, &inst).unwrap())] {
                let (xd, yd) = dense_step(s, w, &inst);
                let scale = 1.0 + xd.amax().max(yd.amax());
                let n = s.n();
                for i in 0..n {
                    for l in 0..3 {
                        assert!((nxt.agents[i].x[l] - xd[i * 3 + l]).abs() <= 1e-12 * scale);
                        assert!((nxt.agents[i].y_alpha[l] - yd[i * 3 + l]).abs() <= 1e-12 * scale);
                        assert!((nxt.agents[i].y_beta[l] - yd[n * 3 + i * 3 + l]).abs() <= 1e-12 * scale);
                    }
                }
            }
        }
    }

    #[test]
    fn pushpull_single_agent_is_gradient_descent() {
        let g = Digraph::new(1, []).unwrap();
        let inst = rendezvous(&[vec![4.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = init_baseline_state(&inst, X0Policy::Zeros, &mut rng).unwrap();
        let mut x = 0.0;
        for _ in 0..5 {
            s = pushpull_step(&s, &g, 0.3, &inst).unwrap();
            x -= 0.3 * (x - 4.0);
            assert!((s.agents[0].x[0] - x).abs() < 1e-14);
        }
    }

    #[test]
    fn pushpull_preserves_tracker_sum() {
        let g = Digraph::new(2, [(1, 2), (2, 1)]).unwrap();
        let inst = two_agent_instance();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut s = init_baseline_state(&inst, X0Policy::Gaussian { std: 2.0 }, &mut rng).unwrap();
        for _ in 0..20 {
            s = pushpull_step(&s, &g, 0.1, &inst).unwrap();
            assert!(tracking_residual(&s, &inst) < 1e-13);
        }
    }

    #[test]
    fn pushpull_converges_on_rendezvous() {
        let g = g1_graph();
        let inst = ProblemSpec::RandomRendezvous { n: 5, d: 2, scale: 10.0, seed: Some(3) }.build().unwrap();
        let mut cfg = RunConfig::new(Algorithm::Pushpull, 0.1, 1);
        cfg.k_max = 2000;
        let rec = run(&g, &inst, &cfg).unwrap();
        assert_eq!(rec.stop, StopReason::Converged);
        assert!(rec.final_residual() < 1e-8);
    }

    #[test]
    fn ppsd_run_converges_and_is_reproducible() {
        let g = g1_graph();
        let inst = ProblemSpec::RandomRendezvous { n: 5, d: 1, scale: 10.0, seed: Some(3) }.build().unwrap();
        let cfg = RunConfig::new(Algorithm::Ppsd, 0.05, 9);
        let a = run(&g, &inst, &cfg).unwrap();
        assert_eq!(a.stop, StopReason::Converged, "residual {}", a.final_residual());
        assert!(a.final_residual() < 1e-8);
        assert_eq!(a.diagnostics.len(), a.iterations() + 1);
        let b = run(&g, &inst, &cfg).unwrap();
        assert_eq!(a.diagnostics, b.diagnostics);
        assert_eq!(a.weights, b.weights);
        assert_eq!(a.final_state, b.final_state);
    }

    #[test]
    fn absurd_step_diverges() {
        let g = g1_graph();
        let inst = ProblemSpec::RandomRendezvous { n: 5, d: 1, scale: 10.0, seed: Some(3) }.build().unwrap();
        let cfg = RunConfig::new(Algorithm::Ppsd, 1e6, 9);
        let rec = run(&g, &inst, &cfg).unwrap();
        assert_eq!(rec.stop, StopReason::Diverged);
    }

    #[test]
    fn v_sequence_stays_a_bounded_probability_vector() {
        let g = g1_graph();
        let inst = ProblemSpec::RandomRendezvous { n: 5, d: 1, scale: 10.0, seed: Some(3) }.build().unwrap();
        let mut cfg = RunConfig::new(Algorithm::Ppsd, 0.05, 2);
        cfg.k_max = 300;
        cfg.epsilon = 0.0;
        let rec = run(&g, &inst, &cfg).unwrap();
        let n = 5;
        let floor = rec.eta.powi(2 * n - 1) / (2 * n) as f64;
        for s in rec.states.as_ref().unwrap().iter().skip(1) {
            let v = s.v.as_ref().unwrap();
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(v.iter().all(|&t| t >= floor));
        }
    }

    #[test]
    fn corrupted_weight_breaks_tracking() {
        let g = g1_graph();
        let inst = ProblemSpec::RandomRendezvous { n: 5, d: 1, scale: 10.0, seed: Some(3) }.build().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s0 = init_state(&inst, X0Policy::Zeros, 1.0, &mut rng).unwrap();
        let mut w0 = schedule::init_weights_k0(&g, 1, 10.0, &mut rng).unwrap();
        let good = ppsd_step(&s0, &w0, &inst).unwrap();
        assert!(tracking_residual(&good, &inst) <= 1e-10 * (1.0 + gradient_sum_norm(&good, &inst)));
        if let Some(DiagWeight::Diagonal(v)) = w0.c_at_mut(2, 1) {
            v[0] += 0.25;
        }
        let bad = ppsd_step(&s0, &w0, &inst).unwrap();
        assert!(tracking_residual(&bad, &inst) > 1e-6);
    }

    #[test]
    fn error_triplet_edge_cases() {
        let inst = rendezvous(&[vec![1.0], vec![3.0]]).unwrap();
        let s = NetworkState::from_agents(
            3,
            vec![
                AgentState { x: vec![2.0], y_alpha: vec![0.0], y_beta: vec![-1.0] },
                AgentState { x: vec![2.0], y_alpha: vec![0.0], y_beta: vec![1.0] },
            ],
            Some(vec![0.25; 4]),
            &inst,
        );
        let (c, gap, _) = error_triplet(&s, &inst, &[0.5, 0.5]);
        assert_eq!(c, 0.0);
        assert!(gap < 1e-14);
        let fresh = NetworkState { k: 0, v: None, ..s };
        assert!(error_triplet(&fresh, &inst, &[0.5, 0.5]).2.is_none());
    }

    #[test]
    fn backward_phi_is_probability_vector() {
        let g = g1_graph();
        let inst = ProblemSpec::RandomRendezvous { n: 5, d: 1, scale: 10.0, seed: Some(3) }.build().unwrap();
        let mut cfg = RunConfig::new(Algorithm::Ppsd, 0.05, 2);
        cfg.k_max = 50;
        cfg.epsilon = 0.0;
        let rec = run(&g, &inst, &cfg).unwrap();
        let phis = phi_backward(rec.weights.as_ref().unwrap(), 5);
        for p in &phis {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        let trip = backward_error_triplets(&rec, &inst).unwrap();
        assert_eq!(trip.len(), rec.diagnostics.len());
    }
}
