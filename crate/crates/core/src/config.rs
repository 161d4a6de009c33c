//! JSON experiment configs and the four commands behind the `ppsd` binary.
//!
//! Each command resolves the config (seed override, automatic step size,
//! default `η`), runs, and writes its artifacts atomically into an output
//! directory. Every artifact sidecar embeds the resolved config, and feeding
//! a sidecar back through `--config` reproduces the run.

use std::collections::BTreeSet;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{self, TheoryConstants, UModel};
use crate::engine::{self, fmt17, Algorithm, RecordOptions, RunConfig, RunRecord, StopReason, X0Policy};
use crate::error::{Error, Result};
use crate::experiments::g1_graph;
use crate::objective::{ProblemInstance, ProblemSpec};
use crate::privacy::{self, Observer, ShadowSpec};
use crate::schedule;
use crate::topology::Digraph;

/// JSON schema for [`ExperimentConfig`], published next to the binary.
pub const SCHEMA: &str = include_str!("../schema/experiment.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSpec {
    /// The fixed five-agent test network.
    G1,
    Ring { n: usize },
    Random { n: usize, p: f64, seed: u64 },
    Edges { n: usize, edges: Vec<(usize, usize)> },
}

impl GraphSpec {
    pub fn build(&self) -> Result<Digraph> {
        match self {
            GraphSpec::G1 => Ok(g1_graph()),
            GraphSpec::Ring { n } => Digraph::ring(*n),
            GraphSpec::Random { n, p, seed } => Digraph::random_strongly_connected(*n, *p, *seed),
            GraphSpec::Edges { n, edges } => Digraph::new(*n, edges.iter().copied()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StepSize {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditSpec {
    /// Corrupted agents.
    #[serde(default)]
    pub adversaries: Vec<usize>,
    pub target: usize,
    /// Uncorrupted neighbors of the target to hide behind; one audit per entry.
    #[serde(default)]
    pub accomplices: Vec<usize>,
    #[serde(default = "default_ladder")]
    pub delta_ladder: Vec<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Channel the outside listener cannot reach, as `[target, neighbor]`.
    #[serde(default)]
    pub eavesdropper_channel: Option<(usize, usize)>,
    /// Also run the gradient-recovery attack with every neighbor corrupted.
    #[serde(default)]
    pub attack: bool,
}

fn default_ladder() -> Vec<f64> {
    vec![1.0, 1e2, 1e4, 1e6]
}

fn default_kappa() -> usize {
    500
}

fn default_tolerance() -> f64 {
    privacy::DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConstants {
    pub n: usize,
    pub eta: f64,
    pub l: f64,
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub r_r: f64,
    pub r_p: f64,
    pub n_bar: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdviseSpec {
    /// Overrides the agent count of the problem.
    #[serde(default)]
    pub n: Option<usize>,
    /// Overrides the weight floor.
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub l: Option<f64>,
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_gamma_range")]
    pub gamma_range: (f64, f64),
    #[serde(default = "default_cap")]
    pub cap: usize,
    /// Skips the constant evaluation and uses these values directly.
    #[serde(default)]
    pub synthetic: Option<SyntheticConstants>,
}

fn default_gamma_range() -> (f64, f64) {
    (1e-30, 1.0)
}

fn default_cap() -> usize {
    analysis::DEFAULT_CAP
}

fn default_epsilon() -> f64 {
    1e-8
}

fn default_k_max() -> usize {
    5000
}

fn default_k0_magnitude() -> f64 {
    schedule::DEFAULT_K0_MAGNITUDE
}

fn default_y_alpha_magnitude() -> f64 {
    1.0
}

fn default_algorithm() -> Algorithm {
    Algorithm::Ppsd
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub graph: GraphSpec,
    /// A positive number, or `"auto"` for `1/(2nL)`.
    pub gamma: StepSize,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_algorithm")]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub x0: X0Policy,
    #[serde(default = "default_k0_magnitude")]
    pub k0_magnitude: f64,
    #[serde(default = "default_y_alpha_magnitude")]
    pub y_alpha_magnitude: f64,
    #[serde(default)]
    pub audit: Option<AuditSpec>,
    #[serde(default)]
    pub advise: Option<AdviseSpec>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    /// Parses a config document, or the `config` member of a sidecar.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| config_err(format!("not valid JSON: {e}")))?;
        let doc = match value.get("config") {
            Some(inner) if value.get("problem").is_none() => inner.clone(),
            _ => value,
        };
        let cfg: ExperimentConfig = serde_json::from_value(doc).map_err(|e| config_err(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Range checks the types alone cannot express.
    pub fn check(&self) -> Result<()> {
        let mut problems = Vec::new();
        if let StepSize::Value(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                problems.push(format!("gamma: must be positive, got {g}"));
            }
        }
        if let Some(eta) = self.eta {
            if !(eta > 0.0 && eta < 1.0) {
                problems.push(format!("eta: must lie in (0, 1), got {eta}"));
            }
        }
        if !(self.epsilon >= 0.0) {
            problems.push("epsilon: must be nonnegative".into());
        }
        if let Some(a) = &self.audit {
            if a.target == 0 {
                problems.push("audit.target: agent ids start at 1".into());
            }
            if !(a.tolerance > 0.0) {
                problems.push("audit.tolerance: must be positive".into());
            }
        }
        if let Some(a) = &self.advise {
            let (lo, hi) = a.gamma_range;
            if !(lo > 0.0 && hi > lo) {
                problems.push("advise.gamma_range: need 0 < lo < hi".into());
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(config_err(problems.join("; ")))
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        self
    }
}

/// Graph, problem and run settings after every default has been filled in.
pub struct Resolved {
    pub config: ExperimentConfig,
    pub graph: Digraph,
    pub instance: ProblemInstance,
    pub run: RunConfig,
}

/// Builds graph and problem, fixes the problem seed to the run seed when
/// none is given, and replaces `"auto"` and a missing `η` with numbers.
pub fn resolve(cfg: &ExperimentConfig) -> Result<Resolved> {
    let mut config = cfg.clone();
    config.problem = config.problem.with_default_seed(config.seed);
    let graph = config.graph.build()?;
    let instance = config.problem.build()?;
    if graph.n() != instance.n() {
        return Err(config_err(format!(
            "graph has {} agents but problem has {}",
            graph.n(),
            instance.n()
        )));
    }
    let gamma = match config.gamma {
        StepSize::Value(g) => g,
        StepSize::Auto(_) => engine::default_gamma(&instance),
    };
    config.gamma = StepSize::Value(gamma);
    let eta = config.eta.unwrap_or_else(|| schedule::default_eta(&graph));
    config.eta = Some(eta);
    let run = RunConfig {
        algorithm: config.algorithm,
        gamma,
        eta: Some(eta),
        k_max: config.k_max,
        epsilon: config.epsilon,
        seed: config.seed,
        k0_magnitude: config.k0_magnitude,
        y_alpha_magnitude: config.y_alpha_magnitude,
        x0: config.x0,
        record: RecordOptions {
            states: false,
            weights: false,
        },
    };
    Ok(Resolved {
        config,
        graph,
        instance,
        run,
    })
}

/// Writes through a temporary file in the same directory, then renames.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    s.push('\n');
    s
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

/// What a command produced, for the caller to print.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: Vec<String>,
}

fn fit_json(rec: &RunRecord) -> Value {
    match analysis::fit_linear_rate(&rec.residuals()) {
        Ok(f) => json!({ "lambda": f.lambda, "c": f.c, "start": f.start, "end": f.end, "fit_residual": f.fit_residual }),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn stop_name(s: StopReason) -> Value {
    serde_json::to_value(s).expect("enum serializes")
}

/// Runs the configured algorithm; writes `run.csv` and `run.json`.
pub fn cmd_run(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let r = resolve(cfg)?;
    let rec = engine::run(&r.graph, &r.instance, &r.run)?;
    let csv = out.join("run.csv");
    let side = out.join("run.json");
    write_atomic(&csv, &rec.to_csv())?;
    let fit = fit_json(&rec);
    let sidecar = json!({
        "config": r.config,
        "seed": r.run.seed,
        "stop_reason": stop_name(rec.stop),
        "iterations": rec.iterations(),
        "final_residual": finite_or_null(rec.final_residual()),
        "x_star": r.instance.x_star,
        "rate_fit": fit,
    });
    write_atomic(&side, &pretty(&sidecar))?;
    let lambda = fit.get("lambda").and_then(Value::as_f64);
    Ok(Outcome {
        files: vec![csv, side],
        summary: vec![
            format!("stop: {}", sidecar["stop_reason"].as_str().unwrap_or("?")),
            format!("iterations: {}", rec.iterations()),
            format!("final residual: {:e}", rec.final_residual()),
            match lambda {
                Some(l) => format!("fitted lambda: {l:.6}"),
                None => "fitted lambda: undefined".into(),
            },
        ],
    })
}

/// Runs both algorithms on one instance and seed; writes `compare.csv`
/// (`k, ppsd_residual, pushpull_residual`) and `compare.json`.
pub fn cmd_compare(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let r = resolve(cfg)?;
    let mut pp = r.run.clone();
    pp.algorithm = Algorithm::Pushpull;
    let mut sd = r.run.clone();
    sd.algorithm = Algorithm::Ppsd;
    let a = engine::run(&r.graph, &r.instance, &sd)?;
    let b = engine::run(&r.graph, &r.instance, &pp)?;
    let len = a.diagnostics.len().max(b.diagnostics.len());
    let mut csv = String::from("k,ppsd_residual,pushpull_residual\n");
    for k in 0..len {
        let cell = |rec: &RunRecord| rec.diagnostics.get(k).map(|d| fmt17(d.residual)).unwrap_or_default();
        csv.push_str(&format!("{k},{},{}\n", cell(&a), cell(&b)));
    }
    let gap: f64 = a
        .final_state
        .agents
        .iter()
        .zip(&b.final_state.agents)
        .flat_map(|(p, q)| p.x.iter().zip(&q.x).map(|(x, y)| (x - y) * (x - y)))
        .sum::<f64>()
        .sqrt();
    let csv_path = out.join("compare.csv");
    let side = out.join("compare.json");
    write_atomic(&csv_path, &csv)?;
    let sidecar = json!({
        "config": r.config,
        "seed": r.run.seed,
        "ppsd": { "stop_reason": stop_name(a.stop), "iterations": a.iterations(),
                  "final_residual": finite_or_null(a.final_residual()), "rate_fit": fit_json(&a) },
        "pushpull": { "stop_reason": stop_name(b.stop), "iterations": b.iterations(),
                      "final_residual": finite_or_null(b.final_residual()), "rate_fit": fit_json(&b) },
        "final_state_gap": finite_or_null(gap),
    });
    write_atomic(&side, &pretty(&sidecar))?;
    Ok(Outcome {
        files: vec![csv_path, side],
        summary: vec![
            format!("ppsd: {} iterations, final residual {:e}", a.iterations(), a.final_residual()),
            format!("pushpull: {} iterations, final residual {:e}", b.iterations(), b.final_residual()),
            format!("final decision gap between the two: {gap:e}"),
        ],
    })
}

fn gradient_csv(
    instance: &ProblemInstance,
    shadow_instance: &ProblemInstance,
    original: &RunRecord,
    shadow: &RunRecord,
    i: usize,
) -> String {
    let mut out = String::from("k,coord,original,shadow\n");
    let (Some(a), Some(b)) = (original.states.as_ref(), shadow.states.as_ref()) else {
        return out;
    };
    for (s, t) in a.iter().zip(b) {
        let g0 = instance.objectives[i - 1].gradient(&s.agents[i - 1].x);
        let g1 = shadow_instance.objectives[i - 1].gradient(&t.agents[i - 1].x);
        for (l, (x, y)) in g0.iter().zip(&g1).enumerate() {
            out.push_str(&format!("{},{l},{},{}\n", s.k, fmt17(*x), fmt17(*y)));
        }
    }
    out
}

fn paired_log_csv(a: &privacy::AttackerLog, b: &privacy::AttackerLog) -> String {
    let mut out = String::from("k,observer,field,coord,original,shadow\n");
    for (s, t) in a.sets.iter().zip(&b.sets) {
        for (f, v) in &s.entries {
            let w = t.entries.get(f);
            for (l, x) in v.iter().enumerate() {
                let y = w.and_then(|w| w.get(l)).map(|y| fmt17(*y)).unwrap_or_default();
                out.push_str(&format!("{},{},{},{l},{},{y}\n", s.k, s.observer, f, fmt17(*x)));
            }
        }
    }
    out
}

/// Runs every audit the config asks for and writes `audit.json`, plus the
/// gradient and attacker-view CSVs of the first coalition sample.
pub fn cmd_privacy_audit(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let audit = cfg
        .audit
        .clone()
        .ok_or_else(|| config_err("audit: section required for privacy-audit"))?;
    let mut r = resolve(cfg)?;
    if r.run.algorithm != Algorithm::Ppsd {
        return Err(config_err("algorithm: privacy audits need ppsd"));
    }
    let g = &r.graph;
    let inst = &r.instance;
    let i = audit.target;
    g.neighbors(i).map_err(|e| config_err(format!("audit.target: {e}")))?;

    let mut audit_cfg = r.run.clone();
    audit_cfg.epsilon = 0.0;
    audit_cfg.k_max = audit.kappa + 1;
    audit_cfg.record = RecordOptions::default();
    let base = engine::run(g, inst, &audit_cfg)?;

    let mut entries = Vec::new();
    let mut summary = Vec::new();
    let mut files = Vec::new();
    let coalition: BTreeSet<usize> = audit.adversaries.iter().copied().collect();

    if !coalition.is_empty() {
        let obs = Observer::Coalition(coalition.clone());
        let accomplices = if audit.accomplices.is_empty() {
            g.neighbors(i)?.into_iter().filter(|j| !coalition.contains(j)).take(1).collect()
        } else {
            audit.accomplices.clone()
        };
        if accomplices.is_empty() {
            entries.push(json!({
                "kind": "coalition_sweep",
                "error": format!("precondition violated: every neighbor of agent {i} is corrupted"),
            }));
            summary.push(format!("coalition sweep: rejected, every neighbor of agent {i} is corrupted"));
        }
        for (idx, m) in accomplices.into_iter().enumerate() {
            match privacy::privacy_sweep(g, inst, &base, &obs, i, m, &audit.delta_ladder, audit.kappa, audit.tolerance, r.run.seed) {
                Ok(rep) => {
                    summary.push(format!("coalition sweep via agent {m}: {}/{} pass", rep.passes, rep.total));
                    if idx == 0 {
                        if let Some(first) = rep.reports.first() {
                            let mut spec = ShadowSpec::new(g, i, m, first.delta.clone(), first.delta_alpha.clone())?;
                            spec.case = first.case;
                            let sh = privacy::construct_shadow(&base, inst, &spec)?;
                            let srun = privacy::run_shadow(g, &base, &sh)?;
                            let va = privacy::record_view(g, &base, &coalition, audit.kappa)?;
                            let vb = privacy::record_view(g, &srun, &coalition, audit.kappa)?;
                            let p1 = out.join("gradients.csv");
                            let p2 = out.join("attacker_view.csv");
                            write_atomic(&p1, &gradient_csv(inst, &sh.instance, &base, &srun, i))?;
                            write_atomic(&p2, &paired_log_csv(&va, &vb))?;
                            files.extend([p1, p2]);
                        }
                    }
                    entries.push(json!({ "kind": "coalition_sweep", "accomplice": m, "result": rep }));
                }
                Err(e) => {
                    summary.push(format!("coalition sweep via agent {m}: {e}"));
                    entries.push(json!({ "kind": "coalition_sweep", "accomplice": m, "error": e.to_string() }));
                }
            }
        }
    }

    if let Some((a, m)) = audit.eavesdropper_channel {
        let target = if a == i { a } else { i };
        let other = if a == i { m } else { a };
        match privacy::privacy_sweep(g, inst, &base, &Observer::Eavesdropper, target, other, &audit.delta_ladder, audit.kappa, audit.tolerance, r.run.seed) {
            Ok(rep) => {
                summary.push(format!("eavesdropper sweep, channel {target}-{other} hidden: {}/{} pass", rep.passes, rep.total));
                entries.push(json!({ "kind": "eavesdropper_sweep", "channel": [target, other], "result": rep }));
            }
            Err(e) => {
                summary.push(format!("eavesdropper sweep: {e}"));
                entries.push(json!({ "kind": "eavesdropper_sweep", "error": e.to_string() }));
            }
        }
    }

    if audit.attack {
        r.run.record = RecordOptions::default();
        let full = engine::run(g, inst, &r.run)?;
        match privacy::attack_report(g, inst, &full, i) {
            Ok(rep) => {
                summary.push(format!(
                    "attack with all neighbors of agent {i} corrupted: error {:e} at residual {:e}",
                    rep.error, rep.residual
                ));
                entries.push(json!({
                    "kind": "inference_attack",
                    "anchor_gap": privacy::anchor_gap(inst, &full)?,
                    "result": rep,
                }));
            }
            Err(e) => entries.push(json!({ "kind": "inference_attack", "error": e.to_string() })),
        }
    }

    let report_path = out.join("audit.json");
    write_atomic(
        &report_path,
        &pretty(&json!({ "config": r.config, "seed": r.run.seed, "audits": entries })),
    )?;
    files.insert(0, report_path);
    Ok(Outcome { files, summary })
}

fn constants_json(c: &TheoryConstants) -> Value {
    let opt = |v: Option<f64>| v.map(finite_or_null).unwrap_or(Value::Null);
    json!({
        "n": c.n, "eta": c.eta, "L": c.l, "mu": c.mu, "cap": c.cap,
        "Q_R": finite_or_null(c.q_r), "ln_Q_R": c.ln_q_r, "N_R": c.n_r, "r_R": opt(c.r_r),
        "N_R_estimate": finite_or_null(c.n_r_estimate),
        "Q_P": finite_or_null(c.q_p), "ln_Q_P": c.ln_q_p, "N_P": c.n_p, "r_P": opt(c.r_p),
        "N_P_estimate": finite_or_null(c.n_p_estimate),
        "q1": finite_or_null(c.q1), "ln_q1": c.ln_q1, "q2": finite_or_null(c.q2), "q3": c.q3,
        "N_bar": c.n_bar,
    })
}

/// Evaluates the bound constants and, when they are tractable, searches for
/// a certified step size. Writes `advice.json`.
pub fn cmd_advise(cfg: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    let spec = cfg.advise.clone().unwrap_or(AdviseSpec {
        n: None,
        eta: None,
        l: None,
        mu: None,
        gamma_range: default_gamma_range(),
        cap: default_cap(),
        synthetic: None,
    });
    let (lo, hi) = spec.gamma_range;
    let (constants, model) = if let Some(s) = &spec.synthetic {
        let m = UModel {
            n: s.n,
            eta: s.eta,
            l: s.l,
            q1: s.q1,
            q2: s.q2,
            q3: s.q3,
            r_r: s.r_r,
            r_p: s.r_p,
            n_bar: s.n_bar,
        };
        (json!({ "synthetic": s }), Ok(m))
    } else {
        let needs_problem = spec.n.is_none() || spec.l.is_none() || spec.mu.is_none() || spec.eta.is_none();
        let r = if needs_problem { Some(resolve(cfg)?) } else { None };
        let n = spec.n.or(r.as_ref().map(|r| r.instance.n())).expect("resolved");
        let eta = spec.eta.or(r.as_ref().and_then(|r| r.run.eta)).expect("resolved");
        let l = spec.l.or(r.as_ref().map(|r| r.instance.l)).expect("resolved");
        let mu = spec.mu.or(r.as_ref().map(|r| r.instance.mu)).expect("resolved");
        let c = analysis::theoretical_constants(n, eta, l, mu, spec.cap).map_err(|e| config_err(e.to_string()))?;
        (constants_json(&c), UModel::from_constants(&c))
    };
    let (advice, intractable) = match model {
        Ok(m) => (
            serde_json::to_value(analysis::step_size_advisor(&m, lo, hi)?).expect("serializable"),
            Value::Null,
        ),
        Err(Error::Intractable(msg)) => (Value::Null, json!(msg)),
        Err(e) => return Err(e),
    };
    let mut summary = vec![];
    if let Some(n_r) = constants.get("N_R").and_then(Value::as_u64) {
        summary.push(format!("N_R = {n_r}"));
    }
    match (&advice, &intractable) {
        (Value::Null, Value::String(msg)) => summary.push(format!("intractable: {msg}")),
        (a, _) => match a.get("gamma").and_then(Value::as_f64) {
            Some(g) => summary.push(format!("largest certified step size: {g:e}")),
            None => summary.push("no certified step size in range".into()),
        },
    }
    let path = out.join("advice.json");
    write_atomic(
        &path,
        &pretty(&json!({
            "constants": constants,
            "intractable": intractable,
            "advice": advice,
            "gamma_range": [lo, hi],
        })),
    )?;
    Ok(Outcome {
        files: vec![path],
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "problem": {"kind": "random_rendezvous", "n": 5, "d": 1},
        "graph": {"kind": "g1"},
        "gamma": "auto",
        "seed": 4
    }"#;

    #[test]
    fn missing_gamma_is_named() {
        let err = ExperimentConfig::from_json(r#"{"problem": {"kind": "rendezvous", "points": [[1.0]]}, "graph": {"kind": "g1"}}"#)
            .unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("gamma"), "{err}");
    }

    #[test]
    fn unknown_fields_rejected() {
        let text = MINIMAL.replace("\"seed\": 4", "\"seed\": 4, \"gama\": 1");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn auto_step_resolves() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        let r = resolve(&cfg).unwrap();
        assert_eq!(r.config.gamma, StepSize::Value(0.1));
        assert!(r.config.eta.is_some());
        // The sidecar form parses back to the resolved config.
        let side = json!({ "config": r.config, "seed": 4 }).to_string();
        assert_eq!(ExperimentConfig::from_json(&side).unwrap(), r.config);
    }

    #[test]
    fn schema_is_valid_json_naming_required_fields() {
        let v: Value = serde_json::from_str(SCHEMA).unwrap();
        let req: Vec<&str> = v["required"].as_array().unwrap().iter().map(|x| x.as_str().unwrap()).collect();
        assert!(req.contains(&"gamma") && req.contains(&"problem") && req.contains(&"graph"));
    }

    #[test]
    fn shipped_configs_parse() {
        for text in [
            include_str!("../configs/g1_rendezvous.json"),
            include_str!("../configs/regression_ring.json"),
        ] {
            let cfg = ExperimentConfig::from_json(text).unwrap();
            resolve(&cfg).unwrap();
        }
    }
}
