//! Local objectives and problem instances.
//!
//! Both experiment families are quadratic, so every local objective is
//! represented as `f(x) = ½ xᵀHx − bᵀx + c` plus its descriptive parameters.
//! An optional linear tilt `δ` turns `∇f` into `∇f + δ`, which is how the
//! privacy auditor builds its alternative gradient functions.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum LocalKind {
    /// `½‖x − p‖²`
    Rendezvous { point: Vec<f64> },
    /// `‖Qx − m‖²`
    LeastSquares { q: DMatrix<f64>, m: DVector<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalObjective {
    pub kind: LocalKind,
    /// Added to the gradient everywhere.
    pub tilt: Option<Vec<f64>>,
    pub smoothness: f64,
    pub strong_convexity: f64,
    d: usize,
}

impl LocalObjective {
    pub fn rendezvous(point: Vec<f64>) -> Self {
        LocalObjective {
            d: point.len(),
            kind: LocalKind::Rendezvous { point },
            tilt: None,
            smoothness: 1.0,
            strong_convexity: 1.0,
        }
    }

    pub fn least_squares(q: DMatrix<f64>, m: DVector<f64>) -> Result<Self> {
        if q.nrows() != m.len() {
            return Err(invalid(format!(
                "Q has {} rows but m has {} entries",
                q.nrows(),
                m.len()
            )));
        }
        let sv = q.clone().svd(false, false).singular_values;
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let smin = if q.nrows() >= q.ncols() {
            sv.iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            0.0
        };
        Ok(LocalObjective {
            d: q.ncols(),
            kind: LocalKind::LeastSquares { q, m },
            tilt: None,
            smoothness: 2.0 * smax * smax,
            strong_convexity: 2.0 * smin * smin,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn with_tilt(mut self, delta: &[f64]) -> Self {
        let t = match self.tilt.take() {
            Some(t) => t.iter().zip(delta).map(|(a, b)| a + b).collect(),
            None => delta.to_vec(),
        };
        self.tilt = Some(t);
        self
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            LocalKind::Rendezvous { point } => {
                for ((o, xv), p) in out.iter_mut().zip(x).zip(point) {
                    *o = xv - p;
                }
            }
            LocalKind::LeastSquares { q, m } => {
                let xv = DVector::from_column_slice(x);
                let g = (q.transpose() * (q * xv - m)) * 2.0;
                out.copy_from_slice(g.as_slice());
            }
        }
        if let Some(t) = &self.tilt {
            for (o, tv) in out.iter_mut().zip(t) {
                *o += tv;
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.d];
        self.gradient_into(x, &mut g);
        g
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let base = match &self.kind {
            LocalKind::Rendezvous { point } => {
                0.5 * x.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            }
            LocalKind::LeastSquares { q, m } => {
                (q * DVector::from_column_slice(x) - m).norm_squared()
            }
        };
        base + self
            .tilt
            .as_ref()
            .map_or(0.0, |t| t.iter().zip(x).map(|(a, b)| a * b).sum())
    }

    /// `(H, b)` with `∇f(x) = Hx − b`.
    fn quadratic_form(&self) -> (DMatrix<f64>, DVector<f64>) {
        let (h, mut b) = match &self.kind {
            LocalKind::Rendezvous { point } => (
                DMatrix::identity(self.d, self.d),
                DVector::from_column_slice(point),
            ),
            LocalKind::LeastSquares { q, m } => {
                (q.transpose() * q * 2.0, q.transpose() * m * 2.0)
            }
        };
        if let Some(t) = &self.tilt {
            b -= DVector::from_column_slice(t);
        }
        (h, b)
    }
}

/// Generator description; this is what gets serialized alongside a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Rendezvous {
        points: Vec<Vec<f64>>,
    },
    /// Points uniform on `[-scale, scale]^d`.
    RandomRendezvous {
        n: usize,
        d: usize,
        #[serde(default = "default_scale")]
        scale: f64,
        seed: Option<u64>,
    },
    LinearRegression {
        /// Row-major `p_i x d` matrices.
        q: Vec<Vec<Vec<f64>>>,
        m: Vec<Vec<f64>>,
    },
    /// Gaussian signal, Gaussian observation matrices normalized to unit
    /// spectral norm, Gaussian measurement noise.
    RandomLinearRegression {
        n: usize,
        d: usize,
        #[serde(default = "default_rows")]
        rows: usize,
        #[serde(default = "default_noise")]
        noise_std: f64,
        seed: Option<u64>,
    },
}

fn default_scale() -> f64 {
    10.0
}
fn default_rows() -> usize {
    10
}
fn default_noise() -> f64 {
    0.2
}

impl ProblemSpec {
    pub fn agent_count(&self) -> usize {
        match self {
            ProblemSpec::Rendezvous { points } => points.len(),
            ProblemSpec::LinearRegression { q, .. } => q.len(),
            ProblemSpec::RandomRendezvous { n, .. } | ProblemSpec::RandomLinearRegression { n, .. } => *n,
        }
    }

    /// Fills a missing generator seed.
    pub fn with_default_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ProblemSpec::RandomRendezvous { seed: s, .. }
            | ProblemSpec::RandomLinearRegression { seed: s, .. } => {
                s.get_or_insert(seed);
            }
            _ => {}
        }
        self
    }

    pub fn build(&self) -> Result<ProblemInstance> {
        match self {
            ProblemSpec::Rendezvous { points } => rendezvous(points),
            ProblemSpec::RandomRendezvous { n, d, scale, seed } => {
                if *n == 0 || *d == 0 || !(*scale > 0.0) {
                    return Err(invalid("random rendezvous needs n, d >= 1 and scale > 0"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
                let u = Uniform::new_inclusive(-scale, scale);
                let points: Vec<Vec<f64>> = (0..*n)
                    .map(|_| (0..*d).map(|_| u.sample(&mut rng)).collect())
                    .collect();
                let mut inst = rendezvous(&points)?;
                inst.spec = self.clone();
                Ok(inst)
            }
            ProblemSpec::LinearRegression { q, m } => {
                let qs = q
                    .iter()
                    .map(|rows| {
                        let p = rows.len();
                        let d = rows.first().map_or(0, Vec::len);
                        if rows.iter().any(|r| r.len() != d) {
                            return Err(invalid("ragged observation matrix"));
                        }
                        Ok(DMatrix::from_row_iterator(p, d, rows.iter().flatten().copied()))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let ms = m.iter().map(|v| DVector::from_column_slice(v)).collect::<Vec<_>>();
                linear_regression(qs, ms)
            }
            ProblemSpec::RandomLinearRegression {
                n,
                d,
                rows,
                noise_std,
                seed,
            } => {
                let mut inst = random_linear_regression(*n, *d, *rows, *noise_std, seed.unwrap_or(0))?;
                inst.spec = self.clone();
                Ok(inst)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub objectives: Vec<LocalObjective>,
    pub d: usize,
    /// Global strong convexity of `F = Σ f_i`.
    pub mu: f64,
    /// `max L_i`.
    pub l: f64,
    /// `Σ L_i`.
    pub l_bar: f64,
    pub x_star: Vec<f64>,
    pub spec: ProblemSpec,
}

impl ProblemInstance {
    pub fn from_objectives(objectives: Vec<LocalObjective>, spec: ProblemSpec) -> Result<Self> {
        let d = objectives
            .first()
            .map(LocalObjective::dim)
            .ok_or_else(|| invalid("problem needs at least one agent"))?;
        if d == 0 {
            return Err(invalid("dimension must be >= 1"));
        }
        if objectives.iter().any(|f| f.dim() != d) {
            return Err(invalid("all local objectives must share one dimension"));
        }
        let mut h = DMatrix::zeros(d, d);
        let mut b = DVector::zeros(d);
        for f in &objectives {
            let (hi, bi) = f.quadratic_form();
            h += hi;
            b += bi;
        }
        let eig = h.clone().symmetric_eigen();
        let mu = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        let top = eig.eigenvalues.iter().copied().fold(0.0, f64::max);
        if !(mu > 1e-12 * top.max(1.0)) {
            return Err(Error::DegenerateProblem(format!(
                "aggregate Hessian is singular (smallest eigenvalue {mu:e})"
            )));
        }
        let x_star = h
            .cholesky()
            .ok_or_else(|| Error::DegenerateProblem("aggregate Hessian not positive definite".into()))?
            .solve(&b);
        let l = objectives.iter().map(|f| f.smoothness).fold(0.0, f64::max);
        let l_bar = objectives.iter().map(|f| f.smoothness).sum();
        Ok(ProblemInstance {
            d,
            mu,
            l,
            l_bar,
            x_star: x_star.as_slice().to_vec(),
            objectives,
            spec,
        })
    }

    pub fn n(&self) -> usize {
        self.objectives.len()
    }

    pub fn global_gradient_at(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(invalid(format!("x has dimension {}, expected {}", x.len(), self.d)));
        }
        let mut total = vec![0.0; self.d];
        let mut g = vec![0.0; self.d];
        for f in &self.objectives {
            f.gradient_into(x, &mut g);
            for (t, v) in total.iter_mut().zip(&g) {
                *t += v;
            }
        }
        Ok(total)
    }

    /// `(μ, L, L̄)`.
    pub fn smoothness_constants(&self) -> (f64, f64, f64) {
        (self.mu, self.l, self.l_bar)
    }

    /// Copy with agent `i`'s gradient shifted by `delta` and agent `m`'s by
    /// `-delta`; the minimizer of the sum is unchanged.
    pub fn with_paired_tilt(&self, i: usize, m: usize, delta: &[f64]) -> Result<Self> {
        let n = self.n();
        if i == 0 || m == 0 || i > n || m > n || i == m {
            return Err(invalid(format!("tilt agents ({i}, {m}) invalid for n={n}")));
        }
        if delta.len() != self.d {
            return Err(invalid("tilt dimension mismatch"));
        }
        let mut out = self.clone();
        let neg: Vec<f64> = delta.iter().map(|v| -v).collect();
        out.objectives[i - 1] = out.objectives[i - 1].clone().with_tilt(delta);
        out.objectives[m - 1] = out.objectives[m - 1].clone().with_tilt(&neg);
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.spec)?)
    }
}

/// `f_i(x) = ½‖x − p_i‖²`, minimizer is the mean point.
pub fn rendezvous(points: &[Vec<f64>]) -> Result<ProblemInstance> {
    let d = points.first().map_or(0, Vec::len);
    if points.iter().any(|p| p.len() != d) {
        return Err(invalid("rendezvous points have mismatched dimensions"));
    }
    let objectives = points.iter().cloned().map(LocalObjective::rendezvous).collect();
    ProblemInstance::from_objectives(
        objectives,
        ProblemSpec::Rendezvous {
            points: points.to_vec(),
        },
    )
}

/// `f_i(x) = ‖Q_i x − m_i‖²`.
pub fn linear_regression(q: Vec<DMatrix<f64>>, m: Vec<DVector<f64>>) -> Result<ProblemInstance> {
    if q.len() != m.len() {
        return Err(invalid("need one measurement vector per observation matrix"));
    }
    let spec = ProblemSpec::LinearRegression {
        q: q.iter()
            .map(|qi| qi.row_iter().map(|r| r.iter().copied().collect()).collect())
            .collect(),
        m: m.iter().map(|v| v.as_slice().to_vec()).collect(),
    };
    let objectives = q
        .into_iter()
        .zip(m)
        .map(|(qi, mi)| LocalObjective::least_squares(qi, mi))
        .collect::<Result<Vec<_>>>()?;
    ProblemInstance::from_objectives(objectives, spec)
}

pub fn random_linear_regression(
    n: usize,
    d: usize,
    rows: usize,
    noise_std: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    if n == 0 || d == 0 || rows == 0 {
        return Err(invalid("regression needs n, d, rows >= 1"));
    }
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = Normal::new(0.0, noise_std)
        .map_err(|e| invalid(format!("noise_std {noise_std}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let signal = DVector::from_fn(d, |_, _| std_normal.sample(&mut rng));
    let mut qs = Vec::with_capacity(n);
    let mut ms = Vec::with_capacity(n);
    for _ in 0..n {
        let raw = DMatrix::from_fn(rows, d, |_, _| std_normal.sample(&mut rng));
        let spectral = raw.clone().svd(false, false).singular_values.max();
        let q = raw / spectral;
        let m = &q * &signal + DVector::from_fn(rows, |_, _| noise.sample(&mut rng));
        qs.push(q);
        ms.push(m);
    }
    linear_regression(qs, ms)
}
