//! Honest-but-curious adversary model and the mechanical privacy auditor.
//!
//! [`record_view`] extracts exactly what a colluding set of agents observes.
//! [`construct_shadow`] builds a second execution in which the target's
//! gradient is shifted by an arbitrary `δ` (and an accomplice's by `-δ`)
//! while the `k = 0` weights absorb the shift, and [`verify_indistinguishable`]
//! runs both and compares the two views. [`inference_attack`] is the converse:
//! when every neighbor of the target is corrupted, the target's gradient at
//! the optimum can be rebuilt from observed messages.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{self, NetworkState, RunConfig, RunRecord, Schedule, StopReason};
use crate::error::{invalid, Error, Result};
use crate::objective::ProblemInstance;
use crate::schedule::{DiagWeight, IterationWeights, WeightHistory};
use crate::topology::Digraph;

/// Relative tolerance for comparing two views.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// Attempts at drawing a shared/private split of `δ` before giving up.
const SPLIT_ATTEMPTS: usize = 100;

/// One observable quantity. The derived order is the flattening order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(tag = "field", rename_all = "snake_case")]
pub enum Field {
    X,
    YAlpha,
    LambdaY,
    SelfCY,
    SentX,
    SentLambdaY,
    SentCY { to: usize },
    RecvX { from: usize },
    RecvLambdaY { from: usize },
    RecvCY { from: usize },
    /// A message seen on the wire by an outside listener.
    Wire { from: usize, to: usize, msg: Message },
    Lambda { agent: usize },
    R { row: usize, col: usize },
    A { row: usize, col: usize },
    C { row: usize, col: usize },
    PhiAlpha { agent: usize },
    PhiBeta { agent: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Message {
    X,
    LambdaY,
    CY,
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Field::X => write!(f, "x"),
            Field::YAlpha => write!(f, "y_alpha"),
            Field::LambdaY => write!(f, "lambda_y"),
            Field::SelfCY => write!(f, "self_c_y"),
            Field::SentX => write!(f, "sent_x"),
            Field::SentLambdaY => write!(f, "sent_lambda_y"),
            Field::SentCY { to } => write!(f, "sent_c_y->{to}"),
            Field::RecvX { from } => write!(f, "recv_x<-{from}"),
            Field::RecvLambdaY { from } => write!(f, "recv_lambda_y<-{from}"),
            Field::RecvCY { from } => write!(f, "recv_c_y<-{from}"),
            Field::Wire { from, to, msg } => {
                let m = match msg {
                    Message::X => "x",
                    Message::LambdaY => "lambda_y",
                    Message::CY => "c_y",
                };
                write!(f, "wire_{m}:{from}->{to}")
            }
            Field::Lambda { agent } => write!(f, "Lambda[{agent}]"),
            Field::R { row, col } => write!(f, "R[{row},{col}]"),
            Field::A { row, col } => write!(f, "A[{row},{col}]"),
            Field::C { row, col } => write!(f, "C[{row},{col}]"),
            Field::PhiAlpha { agent } => write!(f, "PhiAlpha[{agent}]"),
            Field::PhiBeta { agent } => write!(f, "PhiBeta[{agent}]"),
        }
    }
}

/// What one observer holds at one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationSet {
    /// Observing agent; `0` stands for an outside eavesdropper.
    pub observer: usize,
    pub k: usize,
    pub entries: BTreeMap<Field, Vec<f64>>,
}

impl InformationSet {
    pub fn get(&self, field: &Field) -> Option<&[f64]> {
        self.entries.get(field).map(Vec::as_slice)
    }
}

/// Everything a coalition (or a listener) saw over iterations `0..=kappa`,
/// ordered by iteration, then observer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackerLog {
    pub adversaries: BTreeSet<usize>,
    pub kappa: usize,
    pub sets: Vec<InformationSet>,
}

impl AttackerLog {
    pub fn is_empty(&self) -> bool {
        self.sets.iter().all(|s| s.entries.is_empty())
    }

    /// Iteration, then observer, then field, then coordinate.
    pub fn flatten(&self) -> Vec<f64> {
        self.sets
            .iter()
            .flat_map(|s| s.entries.values().flat_map(|v| v.iter().copied()))
            .collect()
    }

    pub fn get(&self, k: usize, observer: usize, field: &Field) -> Option<&[f64]> {
        self.sets
            .iter()
            .find(|s| s.k == k && s.observer == observer)
            .and_then(|s| s.get(field))
    }

    /// Whether any observer saw `field` at iteration `k`.
    pub fn contains(&self, k: usize, field: &Field) -> bool {
        self.sets.iter().any(|s| s.k == k && s.entries.contains_key(field))
    }

    /// CSV rows `k,observer,field,coord,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,observer,field,coord,value\n");
        for s in &self.sets {
            for (f, v) in &s.entries {
                for (l, x) in v.iter().enumerate() {
                    out.push_str(&format!("{},{},{},{},{:.17e}\n", s.k, s.observer, f, l, x));
                }
            }
        }
        out
    }
}

fn weights_of(run: &RunRecord) -> Result<&WeightHistory> {
    run.weights
        .as_ref()
        .ok_or_else(|| Error::Precondition("run did not record its weight history".into()))
}

fn states_of(run: &RunRecord) -> Result<&[NetworkState]> {
    run.states
        .as_deref()
        .ok_or_else(|| Error::Precondition("run did not record its states".into()))
}

fn check_horizon(run: &RunRecord, kappa: usize) -> Result<(&[NetworkState], &WeightHistory)> {
    let states = states_of(run)?;
    let weights = weights_of(run)?;
    if states.len() <= kappa || weights.len() <= kappa {
        return Err(invalid(format!(
            "view up to k={kappa} needs {} recorded iterations, run has {}",
            kappa + 1,
            weights.len()
        )));
    }
    Ok((states, weights))
}

fn dw(w: &DiagWeight, d: usize) -> Vec<f64> {
    match w {
        DiagWeight::Scalar(v) => vec![*v],
        DiagWeight::Diagonal(_) => w.to_vec(d),
    }
}

fn times(w: &DiagWeight, y: &[f64]) -> Vec<f64> {
    w.apply(y)
}

fn observe(g: &Digraph, s: &NetworkState, w: &IterationWeights, j: usize) -> InformationSet {
    let d = w.d;
    let me = &s.agents[j - 1];
    let mut e = BTreeMap::new();
    let lambda_y = times(&w.lambda[j - 1], &me.y_alpha);
    e.insert(Field::X, me.x.clone());
    e.insert(Field::YAlpha, me.y_alpha.clone());
    e.insert(Field::LambdaY, lambda_y.clone());
    if let Some(c) = w.c_at(j, j) {
        e.insert(Field::SelfCY, times(c, &me.y_alpha));
    }
    e.insert(Field::SentX, me.x.clone());
    e.insert(Field::SentLambdaY, lambda_y);
    for &m in g.outs(j) {
        if let Some(c) = w.c_at(m, j) {
            e.insert(Field::SentCY { to: m }, times(c, &me.y_alpha));
        }
    }
    for &l in g.ins(j) {
        let other = &s.agents[l - 1];
        e.insert(Field::RecvX { from: l }, other.x.clone());
        e.insert(Field::RecvLambdaY { from: l }, times(&w.lambda[l - 1], &other.y_alpha));
        if let Some(c) = w.c_at(j, l) {
            e.insert(Field::RecvCY { from: l }, times(c, &other.y_alpha));
        }
    }

    // Own weights.
    e.insert(Field::Lambda { agent: j }, dw(&w.lambda[j - 1], d));
    e.insert(Field::PhiAlpha { agent: j }, dw(&w.phi_alpha[j - 1], d));
    e.insert(Field::PhiBeta { agent: j }, dw(&w.phi_beta[j - 1], d));
    for (l, r) in &w.r[j - 1] {
        e.insert(Field::R { row: j, col: *l }, dw(r, d));
    }
    for (l, a) in &w.a[j - 1] {
        e.insert(Field::A { row: j, col: *l }, dw(a, d));
    }
    for (m, c) in &w.c[j - 1] {
        e.insert(Field::C { row: *m, col: j }, dw(c, d));
    }

    // From k = 1 on, everyone else's weights except their Φβ.
    if w.k >= 1 {
        for l in (1..=w.n()).filter(|&l| l != j) {
            e.insert(Field::Lambda { agent: l }, dw(&w.lambda[l - 1], d));
            e.insert(Field::PhiAlpha { agent: l }, dw(&w.phi_alpha[l - 1], d));
            for (m, r) in w.r[l - 1].iter().filter(|(m, _)| *m != j) {
                e.insert(Field::R { row: l, col: *m }, dw(r, d));
            }
            for (m, a) in w.a[l - 1].iter().filter(|(m, _)| *m != j) {
                e.insert(Field::A { row: l, col: *m }, dw(a, d));
            }
            for (m, c) in w.c[l - 1].iter().filter(|(m, _)| *m != j) {
                e.insert(Field::C { row: *m, col: l }, dw(c, d));
            }
        }
    }
    InformationSet { observer: j, k: w.k, entries: e }
}

/// Extracts `I_j(k)` for every `j` in `adversaries` and `k` in `0..=kappa`.
pub fn record_view(g: &Digraph, run: &RunRecord, adversaries: &BTreeSet<usize>, kappa: usize) -> Result<AttackerLog> {
    if let Some(&bad) = adversaries.iter().find(|&&j| j == 0 || j > g.n()) {
        return Err(invalid(format!("adversary {bad} out of range 1..={}", g.n())));
    }
    let mut sets = Vec::new();
    if !adversaries.is_empty() {
        let (states, weights) = check_horizon(run, kappa)?;
        for k in 0..=kappa {
            let w = weights.get(k).expect("checked horizon");
            for &j in adversaries {
                sets.push(observe(g, &states[k], w, j));
            }
        }
    }
    Ok(AttackerLog {
        adversaries: adversaries.clone(),
        kappa,
        sets,
    })
}

/// Listener on every channel except those between `hidden.0` and `hidden.1`
/// (both directions). Sees messages only, no weights.
pub fn eavesdropper_view(g: &Digraph, run: &RunRecord, hidden: Option<(usize, usize)>, kappa: usize) -> Result<AttackerLog> {
    let (i, m) = hidden.ok_or_else(|| {
        Error::Precondition("an eavesdropper audit needs one channel the listener cannot reach".into())
    })?;
    if !(g.has_edge(m, i) || g.has_edge(i, m)) {
        return Err(invalid(format!("agents {i} and {m} share no channel")));
    }
    let (states, weights) = check_horizon(run, kappa)?;
    let is_hidden = |from: usize, to: usize| (from, to) == (i, m) || (from, to) == (m, i);
    let mut sets = Vec::with_capacity(kappa + 1);
    for k in 0..=kappa {
        let w = weights.get(k).expect("checked horizon");
        let s = &states[k];
        let mut e = BTreeMap::new();
        for (to, from) in g.edges().filter(|&(to, from)| !is_hidden(from, to)) {
            let a = &s.agents[from - 1];
            e.insert(Field::Wire { from, to, msg: Message::X }, a.x.clone());
            e.insert(
                Field::Wire { from, to, msg: Message::LambdaY },
                times(&w.lambda[from - 1], &a.y_alpha),
            );
            if let Some(c) = w.c_at(to, from) {
                e.insert(Field::Wire { from, to, msg: Message::CY }, times(c, &a.y_alpha));
            }
        }
        sets.push(InformationSet { observer: 0, k, entries: e });
    }
    Ok(AttackerLog {
        adversaries: BTreeSet::new(),
        kappa,
        sets,
    })
}

/// Which side of the target the accomplice sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShadowCase {
    /// Accomplice is an out-neighbor of the target.
    I,
    /// Accomplice is an in-neighbor of the target.
    II,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShadowSpec {
    pub target: usize,
    pub accomplice: usize,
    pub case: ShadowCase,
    pub delta: Vec<f64>,
    /// Part of `δ` pushed through the shared state; the rest goes through
    /// the private state.
    pub delta_alpha: Vec<f64>,
    /// Drops the `+δ` term of the link weight carrying the shift, producing
    /// a deliberately broken shadow.
    #[serde(default)]
    pub omit_correction: bool,
}

impl ShadowSpec {
    /// Picks the case from the graph: out-neighbor first, then in-neighbor.
    pub fn new(g: &Digraph, target: usize, accomplice: usize, delta: Vec<f64>, delta_alpha: Vec<f64>) -> Result<Self> {
        let case = if g.out_neighbors(target)?.contains(&accomplice) {
            ShadowCase::I
        } else if g.in_neighbors(target)?.contains(&accomplice) {
            ShadowCase::II
        } else {
            return Err(invalid(format!("agent {accomplice} is not a neighbor of agent {target}")));
        };
        Self::with_case(g, target, accomplice, case, delta, delta_alpha)
    }

    pub fn with_case(
        g: &Digraph,
        target: usize,
        accomplice: usize,
        case: ShadowCase,
        delta: Vec<f64>,
        delta_alpha: Vec<f64>,
    ) -> Result<Self> {
        let ok = match case {
            ShadowCase::I => g.out_neighbors(target)?.contains(&accomplice),
            ShadowCase::II => g.in_neighbors(target)?.contains(&accomplice),
        };
        if !ok {
            return Err(invalid(format!("agent {accomplice} does not fit case {case:?} for agent {target}")));
        }
        if delta.len() != delta_alpha.len() {
            return Err(invalid("delta and delta_alpha differ in length"));
        }
        Ok(ShadowSpec {
            target,
            accomplice,
            case,
            delta,
            delta_alpha,
            omit_correction: false,
        })
    }

    pub fn delta_beta(&self) -> Vec<f64> {
        self.delta.iter().zip(&self.delta_alpha).map(|(a, b)| a - b).collect()
    }
}

fn far_from_zero(denom: f64, y: f64) -> bool {
    denom.abs() >= 1e-6 * (1.0 + y.abs())
}

fn denominators_ok(s0: &NetworkState, i: usize, m: usize, da: &[f64], db: &[f64]) -> bool {
    let (a, b) = (&s0.agents[i - 1], &s0.agents[m - 1]);
    (0..da.len()).all(|l| {
        far_from_zero(a.y_alpha[l] + da[l], a.y_alpha[l])
            && far_from_zero(b.y_alpha[l] - da[l], b.y_alpha[l])
            && far_from_zero(a.y_beta[l] + db[l], a.y_beta[l])
            && far_from_zero(b.y_beta[l] - db[l], b.y_beta[l])
    })
}

/// Draws `δ_α = u ⊙ δ` with `u` uniform on `(0, 1)` until every denominator
/// of the shadow construction is safely away from zero.
pub fn split_delta(run: &RunRecord, target: usize, accomplice: usize, delta: &[f64], rng: &mut impl Rng) -> Result<Vec<f64>> {
    let s0 = states_of(run)?.first().ok_or_else(|| invalid("run has no states"))?;
    for _ in 0..SPLIT_ATTEMPTS {
        let da: Vec<f64> = delta.iter().map(|d| d * rng.gen_range(0.05..0.95)).collect();
        let db: Vec<f64> = delta.iter().zip(&da).map(|(a, b)| a - b).collect();
        if denominators_ok(s0, target, accomplice, &da, &db) {
            return Ok(da);
        }
    }
    Err(Error::ResampleRequired(format!(
        "no admissible split of delta found in {SPLIT_ATTEMPTS} draws"
    )))
}

/// Initial state, weight history and objectives of the shadow execution.
#[derive(Debug, Clone)]
pub struct Shadow {
    pub initial: NetworkState,
    pub weights: WeightHistory,
    pub instance: ProblemInstance,
}

fn diag_mut(w: &mut DiagWeight, d: usize) -> &mut Vec<f64> {
    if let DiagWeight::Scalar(v) = w {
        *w = DiagWeight::Diagonal(vec![*v; d]);
    }
    match w {
        DiagWeight::Diagonal(v) => v,
        DiagWeight::Scalar(_) => unreachable!(),
    }
}

/// `w ← w · y / den` unless the perturbation is zero, which leaves `w` untouched.
fn rescale(v: &mut f64, y: f64, den: f64, shift: f64) {
    if shift != 0.0 {
        *v = *v * y / den;
    }
}

/// Builds the shadow execution: the target's gradient is shifted by `δ`, the
/// accomplice's by `-δ`, and the `k = 0` weights of both absorb the change so
/// that every state coincides again from `k = 1` on.
pub fn construct_shadow(run: &RunRecord, instance: &ProblemInstance, spec: &ShadowSpec) -> Result<Shadow> {
    let (i, m) = (spec.target, spec.accomplice);
    let n = instance.n();
    let d = instance.d;
    if i == 0 || m == 0 || i > n || m > n || i == m {
        return Err(invalid(format!("shadow agents ({i}, {m}) invalid for n={n}")));
    }
    if spec.delta.len() != d || spec.delta_alpha.len() != d {
        return Err(invalid(format!("delta must have dimension {d}")));
    }
    let s0 = states_of(run)?.first().ok_or_else(|| invalid("run has no states"))?;
    if s0.k != 0 {
        return Err(invalid("recorded trajectory must start at k=0"));
    }
    let history = weights_of(run)?;
    let mut w0 = history.get(0).ok_or_else(|| invalid("run has no k=0 weights"))?.clone();

    let delta = &spec.delta;
    let da = &spec.delta_alpha;
    let db = spec.delta_beta();
    if !denominators_ok(s0, i, m, da, &db) {
        return Err(Error::ResampleRequired(
            "a shadow denominator is too close to zero for this split".into(),
        ));
    }

    let (yi, ym) = (&s0.agents[i - 1], &s0.agents[m - 1]);
    for l in 0..d {
        let (yia, yib, yma, ymb) = (yi.y_alpha[l], yi.y_beta[l], ym.y_alpha[l], ym.y_beta[l]);
        let den_i = yia + da[l];
        let den_m = yma - da[l];
        let link = if spec.omit_correction { 0.0 } else { delta[l] };

        rescale(&mut diag_mut(&mut w0.lambda[i - 1], d)[l], yia, den_i, da[l]);
        rescale(&mut diag_mut(&mut w0.lambda[m - 1], d)[l], yma, den_m, da[l]);

        // Columns of i and m in C.
        let (gain_i, loss_m) = match spec.case {
            ShadowCase::I => ((m, i), (m, m)),
            ShadowCase::II => ((i, i), (i, m)),
        };
        for (p, c) in w0.c[i - 1].iter_mut() {
            let v = &mut diag_mut(c, d)[l];
            if (*p, i) == gain_i {
                if delta[l] != 0.0 || da[l] != 0.0 {
                    *v = (*v * yia + link) / den_i;
                }
            } else {
                rescale(v, yia, den_i, da[l]);
            }
        }
        for (p, c) in w0.c[m - 1].iter_mut() {
            let v = &mut diag_mut(c, d)[l];
            if (*p, m) == loss_m {
                if delta[l] != 0.0 || da[l] != 0.0 {
                    *v = (*v * yma - delta[l]) / den_m;
                }
            } else {
                rescale(v, yma, den_m, da[l]);
            }
        }

        if db[l] != 0.0 {
            let b = &mut diag_mut(&mut w0.phi_beta[i - 1], d)[l];
            *b = (*b * yib + db[l]) / (yib + db[l]);
            let b = &mut diag_mut(&mut w0.phi_beta[m - 1], d)[l];
            *b = (*b * ymb - db[l]) / (ymb - db[l]);
        }
        if db[l] != 0.0 || da[l] != 0.0 {
            let a = &mut diag_mut(&mut w0.phi_alpha[i - 1], d)[l];
            *a = (*a * yia - db[l]) / den_i;
            let a = &mut diag_mut(&mut w0.phi_alpha[m - 1], d)[l];
            *a = (*a * yma + db[l]) / den_m;
        }
    }

    let mut weights = WeightHistory::new();
    weights.push(w0)?;
    for w in history.iter().skip(1) {
        weights.push(w.clone())?;
    }

    let shadow_instance = instance.with_paired_tilt(i, m, delta)?;
    let mut agents = s0.agents.clone();
    for l in 0..d {
        if da[l] != 0.0 {
            agents[i - 1].y_alpha[l] += da[l];
            agents[m - 1].y_alpha[l] -= da[l];
        }
        if db[l] != 0.0 {
            agents[i - 1].y_beta[l] += db[l];
            agents[m - 1].y_beta[l] -= db[l];
        }
    }
    let initial = NetworkState::from_agents(0, agents, None, &shadow_instance);
    Ok(Shadow {
        initial,
        weights,
        instance: shadow_instance,
    })
}

/// Runs the shadow execution for the same horizon as the recorded history.
pub fn run_shadow(g: &Digraph, run: &RunRecord, shadow: &Shadow) -> Result<RunRecord> {
    let mut cfg: RunConfig = run.config.clone();
    cfg.epsilon = 0.0;
    cfg.k_max = shadow.weights.len();
    cfg.record.states = true;
    cfg.record.weights = true;
    let rec = engine::run_with(
        g,
        &shadow.instance,
        &cfg,
        Some(shadow.initial.clone()),
        Schedule::Replay(&shadow.weights),
    )?;
    if rec.stop == StopReason::Diverged {
        return Err(Error::AuditInconclusive(format!(
            "shadow run diverged at k={}",
            rec.iterations()
        )));
    }
    Ok(rec)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
}

/// Element-wise comparison of two views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogComparison {
    /// Worst relative deviation per iteration.
    pub per_iteration: Vec<f64>,
    pub max_deviation: f64,
    /// Entries present in one view only.
    pub structural_mismatches: usize,
}

/// Compares two views entry by entry. Each deviation is scaled by the
/// largest magnitude its series (observer, field, coordinate) reaches over
/// the whole horizon in either view.
pub fn compare_logs(a: &AttackerLog, b: &AttackerLog) -> LogComparison {
    type Key = (usize, Field, usize);
    let mut scale: BTreeMap<Key, f64> = BTreeMap::new();
    for log in [a, b] {
        for s in &log.sets {
            for (f, v) in &s.entries {
                for (l, x) in v.iter().enumerate() {
                    let e = scale.entry((s.observer, *f, l)).or_insert(0.0);
                    *e = e.max(x.abs());
                }
            }
        }
    }
    fn index(log: &AttackerLog) -> BTreeMap<(usize, usize), &InformationSet> {
        log.sets.iter().map(|s| ((s.k, s.observer), s)).collect()
    }
    let (ia, ib) = (index(a), index(b));
    let kmax = a.kappa.max(b.kappa);
    let mut per_iteration = vec![0.0f64; kmax + 1];
    let mut mismatches = 0;
    let keys: BTreeSet<_> = ia.keys().chain(ib.keys()).copied().collect();
    for key in keys {
        let (Some(sa), Some(sb)) = (ia.get(&key), ib.get(&key)) else {
            mismatches += 1;
            continue;
        };
        let fields: BTreeSet<_> = sa.entries.keys().chain(sb.entries.keys()).collect();
        for f in fields {
            let (Some(va), Some(vb)) = (sa.entries.get(f), sb.entries.get(f)) else {
                mismatches += 1;
                continue;
            };
            if va.len() != vb.len() {
                mismatches += 1;
                continue;
            }
            for (l, (x, y)) in va.iter().zip(vb).enumerate() {
                let diff = (x - y).abs();
                let dev = if diff == 0.0 {
                    0.0
                } else {
                    let s = scale[&(key.1, *f, l)];
                    if s > 0.0 { diff / s } else { f64::INFINITY }
                };
                let slot = &mut per_iteration[key.0];
                *slot = if dev.is_nan() { f64::INFINITY } else { slot.max(dev) };
            }
        }
    }
    let max_deviation = per_iteration.iter().copied().fold(0.0, f64::max);
    LogComparison {
        per_iteration,
        max_deviation,
        structural_mismatches: mismatches,
    }
}

/// Outcome of one indistinguishability audit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditReport {
    pub case: ShadowCase,
    pub target: usize,
    pub accomplice: usize,
    pub delta: Vec<f64>,
    pub delta_alpha: Vec<f64>,
    pub kappa: usize,
    pub per_iteration_max_deviation: Vec<f64>,
    pub max_deviation: f64,
    pub structural_mismatches: usize,
    /// `max_l |∇f̃_i(x̃_i) − ∇f_i(x_i) − δ| / (1 + ‖δ‖∞)` over the horizon.
    pub gradient_offset_error: f64,
    /// Relative gap between the two runs' final decision variables.
    pub final_state_gap: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
}

/// Who is watching during an audit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observer {
    Coalition(BTreeSet<usize>),
    /// Outside listener that cannot reach the channel between the shadow's
    /// target and accomplice.
    Eavesdropper,
}

fn view(g: &Digraph, run: &RunRecord, observer: &Observer, spec: &ShadowSpec, kappa: usize) -> Result<AttackerLog> {
    match observer {
        Observer::Coalition(a) => record_view(g, run, a, kappa),
        Observer::Eavesdropper => eavesdropper_view(g, run, Some((spec.target, spec.accomplice)), kappa),
    }
}

/// Runs the shadow execution next to `run` and compares what `observer`
/// sees in both over iterations `0..=kappa`.
pub fn verify_indistinguishable(
    g: &Digraph,
    instance: &ProblemInstance,
    run: &RunRecord,
    observer: &Observer,
    spec: &ShadowSpec,
    kappa: usize,
    tolerance: f64,
) -> Result<AuditReport> {
    if let Observer::Coalition(a) = observer {
        if a.contains(&spec.target) || a.contains(&spec.accomplice) {
            return Err(Error::Precondition(format!(
                "target {} and accomplice {} must both be outside the coalition",
                spec.target, spec.accomplice
            )));
        }
    }
    check_horizon(run, kappa)?;
    let shadow = construct_shadow(run, instance, spec)?;
    let shadow_run = run_shadow(g, run, &shadow)?;
    let original_view = view(g, run, observer, spec, kappa)?;
    let shadow_view = view(g, &shadow_run, observer, spec, kappa)?;
    let cmp = compare_logs(&original_view, &shadow_view);

    let i = spec.target;
    let dnorm = spec.delta.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    let states = states_of(run)?;
    let shadow_states = states_of(&shadow_run)?;
    let mut gradient_offset_error = 0.0f64;
    for (s, t) in states.iter().zip(shadow_states).take(kappa + 1) {
        let g0 = instance.objectives[i - 1].gradient(&s.agents[i - 1].x);
        let g1 = shadow.instance.objectives[i - 1].gradient(&t.agents[i - 1].x);
        for l in 0..instance.d {
            gradient_offset_error = gradient_offset_error.max((g1[l] - g0[l] - spec.delta[l]).abs() / (1.0 + dnorm));
        }
    }

    let a = &states[kappa];
    let b = &shadow_states[kappa];
    let mut final_state_gap = 0.0f64;
    for (p, q) in a.agents.iter().zip(&b.agents) {
        for (x, y) in p.x.iter().zip(&q.x) {
            final_state_gap = final_state_gap.max((x - y).abs() / (1.0 + x.abs()));
        }
    }
    let optimum_gap = instance
        .x_star
        .iter()
        .zip(&shadow.instance.x_star)
        .fold(0.0f64, |acc, (x, y)| acc.max((x - y).abs() / (1.0 + x.abs())));
    final_state_gap = final_state_gap.max(optimum_gap);

    let pass = cmp.structural_mismatches == 0
        && cmp.max_deviation <= tolerance
        && gradient_offset_error <= tolerance
        && final_state_gap <= tolerance;
    Ok(AuditReport {
        case: spec.case,
        target: spec.target,
        accomplice: spec.accomplice,
        delta: spec.delta.clone(),
        delta_alpha: spec.delta_alpha.clone(),
        kappa,
        per_iteration_max_deviation: cmp.per_iteration,
        max_deviation: cmp.max_deviation,
        structural_mismatches: cmp.structural_mismatches,
        gradient_offset_error,
        final_state_gap,
        tolerance,
        verdict: if pass { Verdict::Pass } else { Verdict::Fail },
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub passes: usize,
    pub total: usize,
    pub reports: Vec<AuditReport>,
}

/// Repeats the audit for `δ = M·u`, `u` uniform on `(0, 1)^d`, for each
/// magnitude `M` of the ladder. Only meaningful when some neighbor of the
/// target is outside the coalition.
#[allow(clippy::too_many_arguments)]
pub fn privacy_sweep(
    g: &Digraph,
    instance: &ProblemInstance,
    run: &RunRecord,
    observer: &Observer,
    target: usize,
    accomplice: usize,
    ladder: &[f64],
    kappa: usize,
    tolerance: f64,
    seed: u64,
) -> Result<SweepReport> {
    if let Observer::Coalition(a) = observer {
        let nbrs = g.neighbors(target)?;
        if nbrs.iter().all(|j| a.contains(j)) {
            return Err(Error::Precondition(format!(
                "every neighbor of agent {target} is corrupted; nothing can hide its gradient"
            )));
        }
    }
    let d = instance.d;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eavesdropping = matches!(observer, Observer::Eavesdropper);
    let mut reports = Vec::with_capacity(ladder.len());
    for &mag in ladder {
        let delta: Vec<f64> = (0..d).map(|_| mag * rng.gen_range(f64::MIN_POSITIVE..1.0)).collect();
        let delta_alpha = if eavesdropping {
            vec![0.0; d]
        } else {
            split_delta(run, target, accomplice, &delta, &mut rng)?
        };
        let spec = ShadowSpec::new(g, target, accomplice, delta, delta_alpha)?;
        reports.push(verify_indistinguishable(g, instance, run, observer, &spec, kappa, tolerance)?);
    }
    Ok(SweepReport {
        passes: reports.iter().filter(|r| r.verdict == Verdict::Pass).count(),
        total: reports.len(),
        reports,
    })
}

/// Shift that only touches the target's and accomplice's mixing and private
/// weights: the shared states stay put, so the listener's messages change
/// only on the hidden channel.
pub fn eavesdropper_spec(g: &Digraph, target: usize, accomplice: usize, delta: Vec<f64>) -> Result<ShadowSpec> {
    let zeros = vec![0.0; delta.len()];
    ShadowSpec::new(g, target, accomplice, delta, zeros)
}

/// Rebuilds `∇f_i` at the limit point from a coalition's view:
/// `−Σ_t (Σ_{j∈in} C_ij y_{j,α} − Σ_{j∈out} C_ji y_{i,α})`.
pub fn inference_attack(g: &Digraph, log: &AttackerLog, i: usize) -> Result<Vec<f64>> {
    let nbrs = g.neighbors(i)?;
    if let Some(j) = nbrs.iter().find(|j| !log.adversaries.contains(j)) {
        return Err(Error::InsufficientInformation(format!(
            "neighbor {j} of agent {i} is not corrupted"
        )));
    }
    if log.adversaries.contains(&i) {
        return Err(invalid(format!("agent {i} is itself corrupted")));
    }
    let mut acc: Option<Vec<f64>> = None;
    for k in 0..=log.kappa {
        let mut add = |v: &[f64], sign: f64| {
            let a = acc.get_or_insert_with(|| vec![0.0; v.len()]);
            for (t, x) in a.iter_mut().zip(v) {
                *t -= sign * x;
            }
        };
        for &j in g.ins(i) {
            let v = log
                .get(k, j, &Field::SentCY { to: i })
                .ok_or_else(|| Error::InsufficientInformation(format!("missing C_{i}{j} y_{j} at k={k}")))?;
            add(v, 1.0);
        }
        for &j in g.outs(i) {
            let v = log
                .get(k, j, &Field::RecvCY { from: i })
                .ok_or_else(|| Error::InsufficientInformation(format!("missing C_{j}{i} y_{i} at k={k}")))?;
            add(v, -1.0);
        }
    }
    acc.ok_or_else(|| Error::InsufficientInformation(format!("agent {i} has no neighbors")))
}

/// Attack estimate next to the truth it targets.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackReport {
    pub target: usize,
    pub estimate: Vec<f64>,
    pub truth: Vec<f64>,
    pub error: f64,
    /// Residual of the run at the end of the summed horizon.
    pub residual: f64,
    /// `L_i · residual + ‖z_i‖`, what the truncated sum can miss.
    pub error_bound: f64,
}

/// Runs the attack over the whole recorded run and scores it against
/// `∇f_i(x*)`.
pub fn attack_report(g: &Digraph, instance: &ProblemInstance, run: &RunRecord, i: usize) -> Result<AttackReport> {
    let states = states_of(run)?;
    let weights = weights_of(run)?;
    let kappa = weights.len().checked_sub(1).ok_or_else(|| invalid("run has no iterations"))?;
    let adversaries: BTreeSet<usize> = g.neighbors(i)?;
    let log = record_view(g, run, &adversaries, kappa)?;
    let estimate = inference_attack(g, &log, i)?;
    let f = &instance.objectives[i - 1];
    let truth = f.gradient(&instance.x_star);
    let error = estimate.iter().zip(&truth).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let last = &states[kappa + 1];
    let residual = engine::residual(last, instance);
    let z: f64 = last.agents[i - 1]
        .y_alpha
        .iter()
        .zip(&last.agents[i - 1].y_beta)
        .map(|(a, b)| (a + b) * (a + b))
        .sum::<f64>()
        .sqrt();
    Ok(AttackReport {
        target: i,
        estimate,
        truth,
        error,
        residual,
        error_bound: f.smoothness * residual + z,
    })
}

/// `z_i^0 = y_{i,α}^0 + y_{i,β}^0` against `∇f_i(x_i^0)`, the identity the
/// attack's telescoping sum starts from. Returns the largest absolute gap.
pub fn anchor_gap(instance: &ProblemInstance, run: &RunRecord) -> Result<f64> {
    let s0 = states_of(run)?.first().ok_or_else(|| invalid("run has no states"))?;
    let mut gap = 0.0f64;
    for (a, f) in s0.agents.iter().zip(&instance.objectives) {
        let g = f.gradient(&a.x);
        for l in 0..instance.d {
            gap = gap.max((a.y_alpha[l] + a.y_beta[l] - g[l]).abs());
        }
    }
    Ok(gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, Algorithm};
    use crate::experiments::{default_config, g1_graph, rendezvous_5};
    use crate::schedule::validate;

    fn audit_run(kappa: usize) -> (Digraph, ProblemInstance, RunRecord) {
        let g = g1_graph();
        let inst = rendezvous_5(11).unwrap();
        let mut cfg = default_config(&inst, Algorithm::Ppsd, 3);
        cfg.epsilon = 0.0;
        cfg.k_max = kappa + 1;
        let rec = run(&g, &inst, &cfg).unwrap();
        (g, inst, rec)
    }

    fn coalition(ids: &[usize]) -> BTreeSet<usize> {
        ids.iter().copied().collect()
    }

    #[test]
    fn empty_coalition_sees_nothing() {
        let (g, _, rec) = audit_run(5);
        let log = record_view(&g, &rec, &BTreeSet::new(), 5).unwrap();
        assert!(log.is_empty());
        assert!(log.flatten().is_empty());
    }

    #[test]
    fn view_contents() {
        let (g, _, rec) = audit_run(10);
        let log = record_view(&g, &rec, &coalition(&[4, 5]), 10).unwrap();
        let w = rec.weights.as_ref().unwrap();
        let states = rec.states.as_ref().unwrap();
        for k in 0..=10 {
            let seen = log.get(k, 4, &Field::RecvCY { from: 1 }).unwrap();
            let expect = w.get(k).unwrap().c_at(4, 1).unwrap().apply(&states[k].agents[0].y_alpha);
            assert_eq!(seen, expect.as_slice());
        }
        // Agent 1's private part never shows up anywhere.
        let private: Vec<f64> = states.iter().take(11).flat_map(|s| s.agents[0].y_beta.clone()).collect();
        for s in &log.sets {
            for (f, v) in &s.entries {
                if matches!(f, Field::PhiBeta { .. } | Field::Lambda { .. } | Field::R { .. } | Field::A { .. } | Field::C { .. } | Field::PhiAlpha { .. }) {
                    continue;
                }
                for x in v {
                    assert!(!private.contains(x), "{f} leaks y_beta of agent 1");
                }
            }
            assert!(!s.entries.keys().any(|f| *f == Field::PhiBeta { agent: 1 }));
        }
        assert_eq!(record_view(&g, &rec, &coalition(&[4, 5]), 10).unwrap().flatten(), log.flatten());
    }

    #[test]
    fn shadow_keeps_columns_stochastic_and_matches_hand_value() {
        let (g, inst, rec) = audit_run(3);
        let spec = ShadowSpec::new(&g, 1, 2, vec![1234.5], vec![600.0]).unwrap();
        assert_eq!(spec.case, ShadowCase::I);
        let sh = construct_shadow(&rec, &inst, &spec).unwrap();
        let w0 = sh.weights.get(0).unwrap();
        assert!(validate(w0).is_empty(), "{:?}", validate(w0));
        for k in 1..sh.weights.len() {
            assert_eq!(sh.weights.get(k), rec.weights.as_ref().unwrap().get(k));
        }
        let y = rec.states.as_ref().unwrap()[0].agents[0].y_alpha[0];
        let gamma = rec.weights.as_ref().unwrap().get(0).unwrap().lambda[0].at(0);
        assert!((w0.lambda[0].at(0) - gamma * y / (y + 600.0)).abs() < 1e-15 * gamma.abs().max(1.0));
    }

    #[test]
    fn zero_delta_is_identity() {
        let (g, inst, rec) = audit_run(20);
        let spec = ShadowSpec::new(&g, 1, 2, vec![0.0], vec![0.0]).unwrap();
        let sh = construct_shadow(&rec, &inst, &spec).unwrap();
        assert_eq!(&sh.weights, rec.weights.as_ref().unwrap());
        let report =
            verify_indistinguishable(&g, &inst, &rec, &Observer::Coalition(coalition(&[4, 5])), &spec, 20, 1e-9).unwrap();
        assert_eq!(report.max_deviation, 0.0);
        assert_eq!(report.verdict, Verdict::Pass);
    }

    #[test]
    fn tampered_shadow_fails() {
        let (g, inst, rec) = audit_run(50);
        let mut spec = ShadowSpec::new(&g, 1, 2, vec![2500.0], vec![1000.0]).unwrap();
        spec.omit_correction = true;
        let report =
            verify_indistinguishable(&g, &inst, &rec, &Observer::Coalition(coalition(&[4, 5])), &spec, 50, 1e-9).unwrap();
        assert_eq!(report.verdict, Verdict::Fail);
    }

    #[test]
    fn shadow_passes_both_cases() {
        let (g, inst, rec) = audit_run(100);
        let obs = Observer::Coalition(coalition(&[4, 5]));
        for m in [2, 3] {
            let mut rng = ChaCha8Rng::seed_from_u64(m as u64);
            let delta = vec![rng.gen_range(0.0..5000.0)];
            let da = split_delta(&rec, 1, m, &delta, &mut rng).unwrap();
            let spec = ShadowSpec::new(&g, 1, m, delta, da).unwrap();
            let r = verify_indistinguishable(&g, &inst, &rec, &obs, &spec, 100, 1e-9).unwrap();
            assert_eq!(r.verdict, Verdict::Pass, "{r:?}");
        }
    }

    #[test]
    fn sweep_rejects_fully_surrounded_target() {
        let (g, inst, rec) = audit_run(5);
        let obs = Observer::Coalition(coalition(&[2, 3, 4, 5]));
        let err = privacy_sweep(&g, &inst, &rec, &obs, 1, 2, &[1.0], 5, 1e-9, 0).unwrap_err();
        assert!(matches!(err, Error::Precondition(_)));
    }

    #[test]
    fn zero_ladder_sweep_passes() {
        let (g, inst, rec) = audit_run(10);
        let obs = Observer::Coalition(coalition(&[4, 5]));
        let r = privacy_sweep(&g, &inst, &rec, &obs, 1, 2, &[0.0], 10, 1e-9, 0).unwrap();
        assert_eq!((r.passes, r.total), (1, 1));
    }

    #[test]
    fn attack_needs_every_neighbor() {
        let (g, _, rec) = audit_run(5);
        let log = record_view(&g, &rec, &coalition(&[2, 3, 4]), 5).unwrap();
        assert!(matches!(inference_attack(&g, &log, 1), Err(Error::InsufficientInformation(_))));
    }

    #[test]
    fn eavesdropper_view_hides_one_channel() {
        let (g, _, rec) = audit_run(5);
        assert!(matches!(eavesdropper_view(&g, &rec, None, 5), Err(Error::Precondition(_))));
        let log = eavesdropper_view(&g, &rec, Some((1, 2)), 5).unwrap();
        assert!(!log.contains(0, &Field::Wire { from: 1, to: 2, msg: Message::CY }));
        assert!(log.contains(0, &Field::Wire { from: 1, to: 4, msg: Message::CY }));
    }
}
