//! Per-iteration mixing weights.
//!
//! Iteration `k = 0` uses arbitrary real per-coordinate diagonal weights whose
//! only constraint is that the augmented tracker matrix stays column
//! stochastic. From `k = 1` on every weight is a scalar multiple of the
//! identity, bounded below by `eta`, with row-stochastic `R`, `A` and
//! column-stochastic augmented `C`.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::topology::Digraph;

/// Tolerance used by [`validate`].
pub const STOCHASTIC_TOL: f64 = 1e-10;

/// Default magnitude bound for the arbitrary `k = 0` weights.
pub const DEFAULT_K0_MAGNITUDE: f64 = 10.0;

/// Diagonal block of a weight matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DiagWeight {
    /// `w * I_d`.
    Scalar(f64),
    /// `diag(w_1, ..., w_d)`.
    Diagonal(Vec<f64>),
}

impl DiagWeight {
    #[inline]
    pub fn at(&self, l: usize) -> f64 {
        match self {
            DiagWeight::Scalar(w) => *w,
            DiagWeight::Diagonal(v) => v[l],
        }
    }

    pub fn to_vec(&self, d: usize) -> Vec<f64> {
        (0..d).map(|l| self.at(l)).collect()
    }

    /// `self * x` coordinate-wise.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter().enumerate().map(|(l, v)| self.at(l) * v).collect()
    }

    fn values(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match self {
            DiagWeight::Scalar(w) => Box::new(std::iter::once(*w)),
            DiagWeight::Diagonal(v) => Box::new(v.iter().copied()),
        }
    }

    fn dim_ok(&self, d: usize) -> bool {
        match self {
            DiagWeight::Scalar(_) => true,
            DiagWeight::Diagonal(v) => v.len() == d,
        }
    }
}

/// One iteration's complete weight set.
///
/// `r[i-1]` and `a[i-1]` hold agent `i`'s row over `N_i^in ∪ {i}` as
/// `(j, R_ij)` pairs. `c[i-1]` holds agent `i`'s column over `N_i^out ∪ {i}`
/// as `(j, C_ji)` pairs. Pairs that are not stored are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationWeights {
    pub k: usize,
    pub d: usize,
    pub eta: Option<f64>,
    #[serde(rename = "R")]
    pub r: Vec<Vec<(usize, DiagWeight)>>,
    #[serde(rename = "A")]
    pub a: Vec<Vec<(usize, DiagWeight)>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<(usize, DiagWeight)>>,
    #[serde(rename = "Lambda")]
    pub lambda: Vec<DiagWeight>,
    #[serde(rename = "PhiAlpha")]
    pub phi_alpha: Vec<DiagWeight>,
    #[serde(rename = "PhiBeta")]
    pub phi_beta: Vec<DiagWeight>,
}

fn lookup(entries: &[(usize, DiagWeight)], key: usize) -> Option<&DiagWeight> {
    entries
        .binary_search_by_key(&key, |(j, _)| *j)
        .ok()
        .map(|p| &entries[p].1)
}

fn lookup_mut(entries: &mut [(usize, DiagWeight)], key: usize) -> Option<&mut DiagWeight> {
    entries
        .binary_search_by_key(&key, |(j, _)| *j)
        .ok()
        .map(|p| &mut entries[p].1)
}

impl IterationWeights {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    /// `R_ij`, if stored.
    pub fn r_at(&self, i: usize, j: usize) -> Option<&DiagWeight> {
        lookup(&self.r[i - 1], j)
    }

    pub fn a_at(&self, i: usize, j: usize) -> Option<&DiagWeight> {
        lookup(&self.a[i - 1], j)
    }

    /// `C_ji`: weight agent `i` applies to what it pushes to `j`.
    pub fn c_at(&self, j: usize, i: usize) -> Option<&DiagWeight> {
        lookup(&self.c[i - 1], j)
    }

    pub fn c_at_mut(&mut self, j: usize, i: usize) -> Option<&mut DiagWeight> {
        lookup_mut(&mut self.c[i - 1], j)
    }

    pub fn r_at_mut(&mut self, i: usize, j: usize) -> Option<&mut DiagWeight> {
        lookup_mut(&mut self.r[i - 1], j)
    }

    /// Augmented column sum `Σ_j C_ji(l) + Φα_i(l)` for agent `i`.
    pub fn alpha_column_sum(&self, i: usize, l: usize) -> f64 {
        self.c[i - 1].iter().map(|(_, w)| w.at(l)).sum::<f64>() + self.phi_alpha[i - 1].at(l)
    }
}

/// Append-only list of weights indexed from `k = 0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightHistory(Vec<IterationWeights>);

impl WeightHistory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, w: IterationWeights) -> Result<()> {
        if w.k != self.0.len() {
            return Err(invalid(format!(
                "weight history expects k={}, got k={}",
                self.0.len(),
                w.k
            )));
        }
        self.0.push(w);
        Ok(())
    }

    pub fn get(&self, k: usize) -> Option<&IterationWeights> {
        self.0.get(k)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, IterationWeights> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[IterationWeights] {
        &self.0
    }

    pub fn truncated(&self, len: usize) -> Self {
        WeightHistory(self.0[..len.min(self.0.len())].to_vec())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let h: WeightHistory = serde_json::from_str(s)?;
        for (k, w) in h.0.iter().enumerate() {
            if w.k != k {
                return Err(invalid(format!("weight history entry {k} has k={}", w.k)));
            }
        }
        Ok(h)
    }
}

/// Largest `eta` that keeps every `[eta, 1]` simplex feasible.
pub fn max_feasible_eta(g: &Digraph) -> f64 {
    let worst = (1..=g.n())
        .map(|i| (g.ins(i).len() + 1).max(g.outs(i).len() + 2))
        .max()
        .unwrap_or(2);
    1.0 / worst as f64
}

/// `1 / (2 (maxdeg + 2))`.
pub fn default_eta(g: &Digraph) -> f64 {
    1.0 / (2.0 * (g.max_degree() as f64 + 2.0))
}

/// Maps raw values in `[0, 1]` onto weights in `[eta, 1]` summing to one:
///
/// `w_q = (1 - m eta) ((1 - eta) p_q + eta) / ((1 - eta) Σp + m eta) + eta`.
pub fn normalize_eta(raw: &[f64], eta: f64) -> Result<Vec<f64>> {
    let m = raw.len();
    if m == 0 {
        return Err(invalid("normalize_eta needs at least one value"));
    }
    if !(0.0..1.0).contains(&eta) {
        return Err(invalid(format!("eta {eta} outside [0, 1)")));
    }
    let mf = m as f64;
    if mf * eta > 1.0 + 1e-12 {
        return Err(invalid(format!("m * eta = {mf} * {eta} exceeds 1")));
    }
    if raw.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid("raw values must lie in [0, 1]"));
    }
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let sum: f64 = raw.iter().sum();
    let denom = (1.0 - eta) * sum + mf * eta;
    if denom <= 0.0 {
        return Err(invalid("raw values sum to zero with eta = 0"));
    }
    let scale = (1.0 - mf * eta).max(0.0) / denom;
    Ok(raw
        .iter()
        .map(|p| scale * ((1.0 - eta) * p + eta) + eta)
        .collect())
}

fn uniform_diag(d: usize, magnitude: f64, rng: &mut impl Rng) -> DiagWeight {
    DiagWeight::Diagonal((0..d).map(|_| rng.gen_range(-magnitude..=magnitude)).collect())
}

/// Arbitrary-weight regime used at `k = 0`.
///
/// Every free entry is uniform on `[-magnitude, magnitude]` per coordinate;
/// `C_ii` closes agent `i`'s augmented column to exactly one.
pub fn init_weights_k0(
    g: &Digraph,
    d: usize,
    magnitude: f64,
    rng: &mut impl Rng,
) -> Result<IterationWeights> {
    if d == 0 {
        return Err(invalid("dimension must be >= 1"));
    }
    if !(magnitude > 0.0 && magnitude.is_finite()) {
        return Err(invalid(format!("k=0 magnitude {magnitude} must be positive")));
    }
    let n = g.n();
    let mut w = IterationWeights {
        k: 0,
        d,
        eta: None,
        r: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
        lambda: Vec::with_capacity(n),
        phi_alpha: Vec::with_capacity(n),
        phi_beta: Vec::with_capacity(n),
    };
    for i in 1..=n {
        let row = with_self(g.ins(i), i);
        w.r.push(row.iter().map(|&j| (j, uniform_diag(d, magnitude, rng))).collect());
        w.a.push(row.iter().map(|&j| (j, uniform_diag(d, magnitude, rng))).collect());
        w.lambda.push(uniform_diag(d, magnitude, rng));
        let alpha = uniform_diag(d, magnitude, rng);
        w.phi_beta.push(uniform_diag(d, magnitude, rng));

        let mut col: Vec<(usize, DiagWeight)> = g
            .outs(i)
            .iter()
            .map(|&j| (j, uniform_diag(d, magnitude, rng)))
            .collect();
        let closure: Vec<f64> = (0..d)
            .map(|l| 1.0 - col.iter().map(|(_, c)| c.at(l)).sum::<f64>() - alpha.at(l))
            .collect();
        col.push((i, DiagWeight::Diagonal(closure)));
        col.sort_by_key(|(j, _)| *j);
        w.c.push(col);
        w.phi_alpha.push(alpha);
    }
    Ok(w)
}

fn with_self(nbrs: &[usize], i: usize) -> Vec<usize> {
    let mut v = nbrs.to_vec();
    let pos = v.partition_point(|&j| j < i);
    v.insert(pos, i);
    v
}

/// Bounded stochastic regime used for `k >= 1`.
///
/// `R` and `A` rows are normalized over `N_i^in ∪ {i}`; agent `i`'s augmented
/// column over `N_i^out ∪ {i}` plus its private sub-agent is normalized
/// jointly, the last normalized value becoming `Φα_i`. `Φβ_i` is uniform on
/// `[eta, 1]` and `Λ_i = gamma I`.
pub fn weights_k(
    g: &Digraph,
    d: usize,
    k: usize,
    eta: f64,
    gamma: f64,
    rng: &mut impl Rng,
) -> Result<IterationWeights> {
    if k == 0 {
        return Err(invalid("weights_k is for k >= 1; use init_weights_k0"));
    }
    if d == 0 {
        return Err(invalid("dimension must be >= 1"));
    }
    let cap = max_feasible_eta(g);
    if !(eta > 0.0 && eta <= cap + 1e-15) {
        return Err(invalid(format!(
            "eta {eta} infeasible for this degree profile (must be in (0, {cap}])"
        )));
    }
    let n = g.n();
    let mut w = IterationWeights {
        k,
        d,
        eta: Some(eta),
        r: Vec::with_capacity(n),
        a: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
        lambda: vec![DiagWeight::Scalar(gamma); n],
        phi_alpha: Vec::with_capacity(n),
        phi_beta: Vec::with_capacity(n),
    };
    for i in 1..=n {
        let row = with_self(g.ins(i), i);
        w.r.push(stochastic_row(&row, eta, rng)?);
        w.a.push(stochastic_row(&row, eta, rng)?);

        let col = with_self(g.outs(i), i);
        let raw: Vec<f64> = (0..=col.len()).map(|_| rng.gen::<f64>()).collect();
        let mut normalized = normalize_eta(&raw, eta)?;
        let alpha = normalized.pop().expect("column has the private sub-agent slot");
        w.c.push(
            col.iter()
                .zip(normalized)
                .map(|(&j, v)| (j, DiagWeight::Scalar(v)))
                .collect(),
        );
        w.phi_alpha.push(DiagWeight::Scalar(alpha));
        w.phi_beta.push(DiagWeight::Scalar(rng.gen_range(eta..=1.0)));
    }
    Ok(w)
}

fn stochastic_row(
    members: &[usize],
    eta: f64,
    rng: &mut impl Rng,
) -> Result<Vec<(usize, DiagWeight)>> {
    let raw: Vec<f64> = members.iter().map(|_| rng.gen::<f64>()).collect();
    Ok(members
        .iter()
        .zip(normalize_eta(&raw, eta)?)
        .map(|(&j, v)| (j, DiagWeight::Scalar(v)))
        .collect())
}

/// Lists every violated invariant; empty means `w` is valid for its `k`.
pub fn validate(w: &IterationWeights) -> Vec<String> {
    let mut out = Vec::new();
    let n = w.n();
    let d = w.d;
    for (name, len) in [
        ("R", w.r.len()),
        ("A", w.a.len()),
        ("C", w.c.len()),
        ("PhiAlpha", w.phi_alpha.len()),
        ("PhiBeta", w.phi_beta.len()),
    ] {
        if len != n {
            out.push(format!("{name} has {len} agents, Lambda has {n}"));
        }
    }
    if !out.is_empty() {
        return out;
    }

    let all = w
        .r
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |(j, v)| ("R", i + 1, *j, v)))
        .chain(w.a.iter().enumerate().flat_map(|(i, row)| row.iter().map(move |(j, v)| ("A", i + 1, *j, v))))
        .chain(w.c.iter().enumerate().flat_map(|(i, col)| col.iter().map(move |(j, v)| ("C", *j, i + 1, v))))
        .chain(w.lambda.iter().enumerate().map(|(i, v)| ("Lambda", i + 1, i + 1, v)))
        .chain(w.phi_alpha.iter().enumerate().map(|(i, v)| ("PhiAlpha", i + 1, i + 1, v)))
        .chain(w.phi_beta.iter().enumerate().map(|(i, v)| ("PhiBeta", i + 1, i + 1, v)));

    for (name, p, q, v) in all {
        if !v.dim_ok(d) {
            out.push(format!("{name}[{p},{q}] has wrong dimension (d={d})"));
            continue;
        }
        if v.values().any(|x| !x.is_finite()) {
            out.push(format!("{name}[{p},{q}] is not finite"));
        }
        if w.k >= 1 {
            if matches!(v, DiagWeight::Diagonal(vals) if vals.iter().any(|x| *x != vals[0])) {
                out.push(format!("{name}[{p},{q}] must be a scalar multiple of I at k={}", w.k));
            }
            if name == "Lambda" {
                if v.values().any(|x| x <= 0.0) {
                    out.push(format!("Lambda[{p}] must be positive at k={}", w.k));
                }
            } else if let Some(eta) = w.eta {
                if v.values().any(|x| x < eta - STOCHASTIC_TOL || x > 1.0 + STOCHASTIC_TOL) {
                    out.push(format!("{name}[{p},{q}] outside [{eta}, 1] at k={}", w.k));
                }
            }
        }
    }
    if w.k >= 1 && w.eta.is_none() {
        out.push(format!("k={} weights carry no eta bound", w.k));
    }
    if !out.is_empty() {
        return out;
    }

    for i in 1..=n {
        for l in 0..d {
            let s = w.alpha_column_sum(i, l);
            if (s - 1.0).abs() > STOCHASTIC_TOL {
                out.push(format!("augmented column {i} coordinate {l} sums to {s}"));
            }
            if w.k >= 1 {
                for (name, rows) in [("R", &w.r), ("A", &w.a)] {
                    let s: f64 = rows[i - 1].iter().map(|(_, v)| v.at(l)).sum();
                    if (s - 1.0).abs() > STOCHASTIC_TOL {
                        out.push(format!("{name} row {i} coordinate {l} sums to {s}"));
                    }
                }
            }
        }
    }
    out
}

/// Dense `2n x 2n` augmented matrix per coordinate:
/// `[[C, I - Φβ], [Φα, Φβ]]`.
pub fn assemble_augmented(w: &IterationWeights) -> Result<Vec<DMatrix<f64>>> {
    let problems = validate(w);
    if !problems.is_empty() {
        return Err(Error::InvariantViolation(problems));
    }
    let n = w.n();
    Ok((0..w.d)
        .map(|l| {
            let mut m = DMatrix::zeros(2 * n, 2 * n);
            for i in 1..=n {
                for (j, c) in &w.c[i - 1] {
                    m[(j - 1, i - 1)] = c.at(l);
                }
                let beta = w.phi_beta[i - 1].at(l);
                m[(i - 1, n + i - 1)] = 1.0 - beta;
                m[(n + i - 1, i - 1)] = w.phi_alpha[i - 1].at(l);
                m[(n + i - 1, n + i - 1)] = beta;
            }
            m
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::g1_graph;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn max_col_dev(mats: &[DMatrix<f64>]) -> f64 {
        mats.iter()
            .flat_map(|m| m.column_iter().map(|c| (c.sum() - 1.0).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    }

    #[test]
    fn normalize_eta_examples() {
        let w = normalize_eta(&[0.5, 0.5, 0.5], 0.1).unwrap();
        // (1 - 0.3)(0.45 + 0.1) / (0.9 * 1.5 + 0.3) + 0.1 = 0.385 / 1.65 + 0.1
        for v in &w {
            assert!((v - (0.385 / 1.65 + 0.1)).abs() < 1e-15);
            assert!((v - 1.0 / 3.0).abs() < 1e-12);
        }
        assert_eq!(normalize_eta(&[0.7], 0.3).unwrap(), vec![1.0]);
        assert_eq!(normalize_eta(&[1.0, 0.0], 0.0).unwrap(), vec![1.0, 0.0]);
        assert!(normalize_eta(&[0.5; 4], 0.3).is_err());
        assert!(normalize_eta(&[], 0.1).is_err());
    }

    #[test]
    fn k0_closure_on_two_cycle() {
        let g = Digraph::new(2, [(1, 2), (2, 1)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let w = init_weights_k0(&g, 1, 10.0, &mut rng).unwrap();
        let s = w.c_at(2, 1).unwrap().at(0) + w.c_at(1, 1).unwrap().at(0) + w.phi_alpha[0].at(0);
        assert!((s - 1.0).abs() < 1e-12);
        let mut rng2 = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(w, init_weights_k0(&g, 1, 10.0, &mut rng2).unwrap());
    }

    #[test]
    fn k0_on_five_nodes_validates() {
        let g = g1_graph();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = init_weights_k0(&g, 3, 10.0, &mut rng).unwrap();
        assert!(validate(&w).is_empty(), "{:?}", validate(&w));
        assert!(max_col_dev(&assemble_augmented(&w).unwrap()) <= 1e-12);
    }

    #[test]
    fn weights_k_row_sums_and_eta_checks() {
        let g = g1_graph();
        let eta = default_eta(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = weights_k(&g, 2, 1, eta, 0.1, &mut rng).unwrap();
        assert!(validate(&w).is_empty());
        for row in &w.r {
            let s: f64 = row.iter().map(|(_, v)| v.at(0)).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!(max_col_dev(&assemble_augmented(&w).unwrap()) <= 1e-12);

        // star: agent 1 sends to 4 others, so its column has 6 slots
        let star = Digraph::new(5, (2..=5).flat_map(|j| [(j, 1), (1, j)])).unwrap();
        assert!(weights_k(&star, 1, 1, 1.0 / 6.0, 0.1, &mut rng).is_ok());
        assert!(matches!(
            weights_k(&star, 1, 1, 1.0 / 5.5, 0.1, &mut rng),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn validate_flags_tampering() {
        let g = g1_graph();
        let eta = default_eta(&g);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let w = weights_k(&g, 1, 3, eta, 0.1, &mut rng).unwrap();

        let mut low = w.clone();
        *low.r_at_mut(1, 1).unwrap() = DiagWeight::Scalar(eta / 2.0);
        assert!(validate(&low).iter().any(|v| v.contains("outside")));

        let mut scaled = w.clone();
        for (_, v) in scaled.a[2].iter_mut() {
            if let DiagWeight::Scalar(x) = v {
                *x *= 1.01;
            }
        }
        assert!(validate(&scaled).iter().any(|v| v.contains("A row 3")));

        let mut col = w;
        *col.c_at_mut(2, 1).unwrap() = DiagWeight::Scalar(0.5);
        assert!(matches!(assemble_augmented(&col), Err(Error::InvariantViolation(_))));
    }

    #[test]
    fn single_agent_augmented_layout() {
        let w = IterationWeights {
            k: 0,
            d: 1,
            eta: None,
            r: vec![vec![(1, DiagWeight::Scalar(1.0))]],
            a: vec![vec![(1, DiagWeight::Scalar(1.0))]],
            c: vec![vec![(1, DiagWeight::Diagonal(vec![0.7]))]],
            lambda: vec![DiagWeight::Diagonal(vec![0.1])],
            phi_alpha: vec![DiagWeight::Diagonal(vec![0.3])],
            phi_beta: vec![DiagWeight::Diagonal(vec![0.5])],
        };
        let m = &assemble_augmented(&w).unwrap()[0];
        assert_eq!(m.column(0).as_slice(), &[0.7, 0.3]);
        assert_eq!(m.column(1).as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn history_json_roundtrip_and_contiguity() {
        let g = Digraph::ring(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut h = WeightHistory::new();
        h.push(init_weights_k0(&g, 2, 10.0, &mut rng).unwrap()).unwrap();
        h.push(weights_k(&g, 2, 1, 0.1, 0.05, &mut rng).unwrap()).unwrap();
        assert!(h.push(weights_k(&g, 2, 5, 0.1, 0.05, &mut rng).unwrap()).is_err());
        let json = h.to_json().unwrap();
        for key in ["\"R\"", "\"A\"", "\"C\"", "\"Lambda\"", "\"PhiAlpha\"", "\"PhiBeta\""] {
            assert!(json.contains(key));
        }
        assert_eq!(WeightHistory::from_json(&json).unwrap(), h);
    }

    proptest! {
        #[test]
        fn normalize_eta_lands_on_bounded_simplex(
            raw in prop::collection::vec(0.0f64..=1.0, 1..12),
            frac in 0.0f64..=1.0,
        ) {
            let eta = frac / raw.len() as f64;
            prop_assume!(eta > 0.0 || raw.iter().sum::<f64>() > 0.0);
            let w = normalize_eta(&raw, eta).unwrap();
            prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for v in w {
                prop_assert!(v >= eta - 1e-15 && v <= 1.0 + 1e-15);
            }
        }

        #[test]
        fn schedules_are_deterministic(n in 2usize..12, p in 0.0f64..0.5, seed in any::<u64>(), d in 1usize..4) {
            let g = Digraph::random_strongly_connected(n, p, seed).unwrap();
            let eta = default_eta(&g);
            let gen = |s| {
                let mut rng = ChaCha8Rng::seed_from_u64(s);
                (init_weights_k0(&g, d, 10.0, &mut rng).unwrap(), weights_k(&g, d, 1, eta, 0.1, &mut rng).unwrap())
            };
            prop_assert_eq!(gen(seed), gen(seed));
        }
    }
}
