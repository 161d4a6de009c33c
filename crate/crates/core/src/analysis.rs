//! Convergence-rate estimation and the step-size certificate machinery.
//!
//! [`fit_linear_rate`] fits `‖x^k − x*‖ ≈ c λ^k` to a recorded residual
//! series. [`theoretical_constants`] evaluates the ergodicity constants of
//! the row- and column-stochastic products, and [`UModel`] assembles the
//! block-companion bound matrix `U(γ)` whose spectral radius certifies a
//! step size.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Largest block count accepted for `U(γ)`.
pub const DEFAULT_CAP: usize = 5000;
/// Default share of the series dropped before fitting.
pub const DEFAULT_BURN_IN: f64 = 0.1;
/// Fewest points a rate fit accepts.
pub const MIN_FIT_POINTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub lambda: f64,
    pub c: f64,
    /// Fitted index range `[start, end)`.
    pub start: usize,
    pub end: usize,
    /// `1 − R²` of the log-linear fit; 0 when the series is exactly geometric.
    pub fit_residual: f64,
}

/// Least-squares fit of `ln r_k = ln c + k ln λ` after dropping the first
/// [`DEFAULT_BURN_IN`] share of the series.
pub fn fit_linear_rate(residuals: &[f64]) -> Result<RateFit> {
    let start = (residuals.len() as f64 * DEFAULT_BURN_IN).floor() as usize;
    fit_linear_rate_window(residuals, start, residuals.len())
}

pub fn fit_linear_rate_window(residuals: &[f64], start: usize, end: usize) -> Result<RateFit> {
    if start > end || end > residuals.len() {
        return Err(invalid(format!("window [{start}, {end}) outside series of {}", residuals.len())));
    }
    let window = &residuals[start..end];
    if window.len() < MIN_FIT_POINTS {
        return Err(Error::FitUndefined(format!(
            "{} points in window, need at least {MIN_FIT_POINTS}",
            window.len()
        )));
    }
    if let Some((k, r)) = window.iter().enumerate().find(|(_, r)| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::FitUndefined(format!("residual {r} at k={} is not positive", start + k)));
    }
    let m = window.len() as f64;
    let ks: Vec<f64> = (start..end).map(|k| k as f64).collect();
    let ls: Vec<f64> = window.iter().map(|r| r.ln()).collect();
    let kbar = ks.iter().sum::<f64>() / m;
    let lbar = ls.iter().sum::<f64>() / m;
    let sxx: f64 = ks.iter().map(|k| (k - kbar).powi(2)).sum();
    let sxy: f64 = ks.iter().zip(&ls).map(|(k, l)| (k - kbar) * (l - lbar)).sum();
    let slope = sxy / sxx;
    let intercept = lbar - slope * kbar;
    let ss_res: f64 = ks.iter().zip(&ls).map(|(k, l)| (l - intercept - slope * k).powi(2)).sum();
    let ss_tot: f64 = ls.iter().map(|l| (l - lbar).powi(2)).sum();
    let fit_residual = if ss_res <= 1e-24 * m * (1.0 + lbar * lbar) {
        0.0
    } else if ss_tot > 0.0 {
        ss_res / ss_tot
    } else {
        1.0
    };
    Ok(RateFit {
        lambda: slope.exp(),
        c: intercept.exp(),
        start,
        end,
        fit_residual,
    })
}

/// Constants of the ergodicity bounds for products of the `k >= 1` matrices
/// and of the step-size bound matrix. Logarithms are kept alongside values
/// that overflow for small `η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    pub n: usize,
    pub eta: f64,
    pub l: f64,
    pub mu: f64,
    pub cap: usize,
    pub ln_q_r: f64,
    pub q_r: f64,
    pub n_r: Option<usize>,
    pub r_r: Option<f64>,
    /// Real-valued solution of `r_R = 1` before rounding up.
    pub n_r_estimate: f64,
    pub ln_q_p: f64,
    pub q_p: f64,
    pub n_p: Option<usize>,
    pub r_p: Option<f64>,
    pub n_p_estimate: f64,
    pub q1: f64,
    pub ln_q1: f64,
    pub q2: f64,
    pub q3: f64,
    pub n_bar: Option<usize>,
}

impl TheoryConstants {
    pub fn is_tractable(&self) -> bool {
        self.n_bar.is_some()
    }
}

/// Smallest `N` with `exp(ln_q) · (1 − a)^((N−1)/m) < 1`, computed from
/// `ln(1 − a)` so tiny `a` never rounds to a spurious zero.
fn smallest_n(ln_q: f64, ln_one_minus_a: f64, m: f64, cap: usize) -> (Option<usize>, Option<f64>, f64) {
    if ln_q < 0.0 {
        return (Some(1), Some(ln_q.exp()), 1.0);
    }
    if !(ln_one_minus_a < 0.0) {
        return (None, None, f64::INFINITY);
    }
    let t = ln_q * m / -ln_one_minus_a;
    let estimate = t + 1.0;
    if !(t.is_finite()) || t + 2.0 > cap as f64 {
        return (None, None, estimate);
    }
    let r_at = |n: usize| ln_q + (n as f64 - 1.0) / m * ln_one_minus_a;
    let mut n = t.floor() as usize + 2;
    while n > 1 && r_at(n - 1) < 0.0 {
        n -= 1;
    }
    while r_at(n) >= 0.0 {
        n += 1;
    }
    if n > cap {
        return (None, None, estimate);
    }
    (Some(n), Some(r_at(n).exp()), estimate)
}

/// Evaluates the constants for `n` agents, weight floor `η`, smoothness `L`
/// and strong convexity `μ`. Block counts beyond `cap` come back as `None`.
pub fn theoretical_constants(n: usize, eta: f64, l: f64, mu: f64, cap: usize) -> Result<TheoryConstants> {
    if n < 2 {
        return Err(invalid(format!("need at least 2 agents, got {n}")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(invalid(format!("eta {eta} must lie in (0, 1)")));
    }
    if !(l > 0.0 && mu > 0.0) {
        return Err(invalid("L and mu must be positive"));
    }
    let nf = n as f64;
    let nt = 2.0 * nf;
    let ln_eta = eta.ln();

    // Row-stochastic products.
    let a_r = eta.powi(n as i32 - 1);
    let ln_q_r = (2.0 * nf).ln() + (-(nf - 1.0) * ln_eta).exp().ln_1p() - (-a_r).ln_1p();
    let (n_r, r_r, n_r_estimate) = smallest_n(ln_q_r, (-a_r).ln_1p(), nf - 1.0, cap);

    // Column-stochastic products on the 2n sub-agents.
    let ln_inner = nt.ln() - nt * ln_eta; // ln(ñ η^{-ñ})
    let ln_big = (nt - 1.0) * ln_inner;
    let ln_one_plus_big = if ln_big > 30.0 { ln_big + (-ln_big).exp().ln_1p() } else { ln_big.exp().ln_1p() };
    let ln_small = nt * ln_eta - nt.ln(); // ln(η^ñ / ñ)
    let a_den = ((nf - 1.0) * ln_small).exp();
    let a_p = ((nt - 1.0) * ln_small).exp();
    let ln_q_p = (2.0 * nt).ln() + ln_one_plus_big - (-a_den).ln_1p();
    let (n_p, r_p, n_p_estimate) = smallest_n(ln_q_p, (-a_p).ln_1p(), nt - 1.0, cap);

    let ln_q1 = nt.ln() + 0.5 * nf.ln() + l.ln() + ln_q_p - (nt - 1.0) * ln_eta;
    let q2 = ln_q_r.exp() * nf.sqrt();
    let n_bar = match (n_r, n_p) {
        (Some(a), Some(b)) => Some(a.max(b)),
        _ => None,
    };
    Ok(TheoryConstants {
        n,
        eta,
        l,
        mu,
        cap,
        ln_q_r,
        q_r: ln_q_r.exp(),
        n_r,
        r_r,
        n_r_estimate,
        ln_q_p,
        q_p: ln_q_p.exp(),
        n_p,
        r_p,
        n_p_estimate,
        q1: ln_q1.exp(),
        ln_q1,
        q2,
        q3: mu / nf,
        n_bar,
    })
}

/// Everything `U(γ)` depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UModel {
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

impl UModel {
    pub fn from_constants(c: &TheoryConstants) -> Result<Self> {
        let (Some(n_bar), Some(r_r), Some(r_p)) = (c.n_bar, c.r_r, c.r_p) else {
            return Err(Error::Intractable(format!(
                "block count exceeds cap {} (N_R ~ {:.3e}, N_P ~ {:.3e})",
                c.cap, c.n_r_estimate, c.n_p_estimate
            )));
        };
        if !c.q1.is_finite() {
            return Err(Error::Intractable("q1 overflows double precision".into()));
        }
        Ok(UModel {
            n: c.n,
            eta: c.eta,
            l: c.l,
            q1: c.q1,
            q2: c.q2,
            q3: c.q3,
            r_r,
            r_p,
            n_bar,
        })
    }

    /// `(U_a, U_b, U_c)` at step size `γ`.
    pub fn blocks(&self, gamma: f64) -> (Matrix3<f64>, Matrix3<f64>, Matrix3<f64>) {
        let nf = self.n as f64;
        let nl = nf * self.l;
        let (q1, q2) = (self.q1, self.q2);
        let top = [gamma * nl * q2, gamma * nl * q2, gamma * q2];
        let bottom = [2.0 * q1 + gamma * nl * q1, gamma * nl * q1, gamma * q1];
        let ub = Matrix3::new(top[0], top[1], top[2], 0.0, 0.0, 0.0, bottom[0], bottom[1], bottom[2]);
        let mut ua = ub;
        ua[(1, 0)] = gamma * nl;
        ua[(1, 1)] = 1.0 - gamma * self.eta.powi(self.n as i32 - 1) * self.q3;
        ua[(1, 2)] = gamma * nf;
        let mut uc = ub;
        uc[(0, 0)] += self.r_r;
        uc[(2, 2)] += self.r_p;
        (ua, ub, uc)
    }

    /// Dense `3N̄ × 3N̄` matrix: top block row `[U_a, U_b, …, U_b, U_c]`,
    /// identities on the block subdiagonal.
    pub fn build(&self, gamma: f64) -> DMatrix<f64> {
        let nb = self.n_bar;
        let (ua, ub, uc) = self.blocks(gamma);
        let mut u = DMatrix::zeros(3 * nb, 3 * nb);
        for j in 0..nb {
            let b = if j == 0 {
                &ua
            } else if j == nb - 1 {
                &uc
            } else {
                &ub
            };
            // N̄ = 1 collapses to a single block carrying both U_a and U_c terms.
            let b = if nb == 1 { ua + uc - ub } else { *b };
            u.view_mut((0, 3 * j), (3, 3)).copy_from(&b);
        }
        for j in 1..nb {
            for t in 0..3 {
                u[(3 * j + t, 3 * (j - 1) + t)] = 1.0;
            }
        }
        u
    }

    /// `Σ_j B_j λ^{-j}` for the top block row `B_1..B_N̄`.
    fn pencil(&self, gamma: f64, lambda: f64) -> Matrix3<f64> {
        let (ua, ub, uc) = self.blocks(gamma);
        let nb = self.n_bar;
        if nb == 1 {
            return (ua + uc - ub) / lambda;
        }
        let inv = 1.0 / lambda;
        let mut mid = 0.0;
        let mut p = inv;
        for _ in 2..nb {
            p *= inv;
            mid += p;
        }
        ua * inv + ub * mid + uc * (p * inv)
    }

    /// `ρ(U(γ))`. When every block is nonnegative the Perron root is the
    /// unique `λ > 0` with `ρ(Σ_j B_j λ^{-j}) = 1`, found by bisection;
    /// otherwise the dense matrix is used.
    pub fn spectral_radius(&self, gamma: f64) -> Result<f64> {
        let (ua, ub, uc) = self.blocks(gamma);
        let nonneg = ua.iter().chain(ub.iter()).chain(uc.iter()).all(|v| *v >= 0.0);
        if !nonneg {
            if 3 * self.n_bar <= 900 {
                return Ok(dense_spectral_radius(&self.build(gamma)));
            }
            return Err(Error::Intractable("negative block entries at this step size".into()));
        }
        let f = |lambda: f64| rho3(&self.pencil(gamma, lambda));
        let mut hi = 1.0;
        while f(hi) >= 1.0 {
            hi *= 2.0;
            if hi > 1e300 {
                return Ok(f64::INFINITY);
            }
        }
        let mut lo = hi / 2.0;
        while f(lo) < 1.0 {
            lo /= 2.0;
            if lo < 1e-300 {
                return Ok(0.0);
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) >= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Slope of the unit eigenvalue at `γ = 0`: `−η^{n−1} q3`.
    pub fn unit_eigenvalue_slope(&self) -> f64 {
        -self.eta.powi(self.n as i32 - 1) * self.q3
    }
}

fn rho3(m: &Matrix3<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Dense convenience form of [`UModel::build`].
#[allow(non_snake_case)]
pub fn build_U(gamma: f64, model: &UModel) -> DMatrix<f64> {
    model.build(gamma)
}

fn dense_spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spectral radius of a square matrix: power iteration from the all-ones
/// vector to relative tolerance `1e-10`, dense eigenvalues when it stalls.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if !m.is_square() {
        return Err(invalid("spectral radius needs a square matrix"));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(0.0);
    }
    let nonneg = m.iter().all(|v| *v >= 0.0);
    if nonneg {
        let mut x = nalgebra::DVector::from_element(n, 1.0 / (n as f64).sqrt());
        let mut prev = f64::NAN;
        for _ in 0..10_000 {
            let y = m * &x;
            let norm = y.norm();
            if norm == 0.0 {
                break;
            }
            if (norm - prev).abs() <= 1e-10 * norm.max(1e-300) {
                // Confirm with a second step before trusting the estimate.
                let z = m * (&y / norm);
                if ((z.norm() - norm).abs()) <= 1e-10 * norm {
                    return Ok(norm);
                }
            }
            prev = norm;
            x = y / norm;
        }
    }
    Ok(dense_spectral_radius(m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Advice {
    /// Largest step size found with `ρ(U(γ)) < 1`, if any.
    pub gamma: Option<f64>,
    pub rho: Option<f64>,
    pub searched: (f64, f64),
    pub note: String,
}

/// Largest `γ` in `[lo, hi]` with `ρ(U(γ)) < 1`: log-spaced scan, then
/// bisection on the first sign change.
pub fn step_size_advisor(model: &UModel, lo: f64, hi: f64) -> Result<Advice> {
    if !(lo > 0.0 && hi > lo) {
        return Err(invalid(format!("step range [{lo}, {hi}] must satisfy 0 < lo < hi")));
    }
    const GRID: usize = 121;
    let ratio = (hi / lo).ln() / (GRID - 1) as f64;
    let grid: Vec<f64> = (0..GRID).map(|t| lo * (ratio * t as f64).exp()).collect();
    let mut best: Option<(usize, f64)> = None;
    for (t, &g) in grid.iter().enumerate() {
        let rho = model.spectral_radius(g).unwrap_or(f64::INFINITY);
        if rho < 1.0 {
            best = Some((t, rho));
        } else if best.is_some() {
            break;
        }
    }
    let Some((t, rho)) = best else {
        return Ok(Advice {
            gamma: None,
            rho: None,
            searched: (lo, hi),
            note: "no step size in range makes the bound contract".into(),
        });
    };
    if t + 1 == GRID {
        return Ok(Advice {
            gamma: Some(grid[t]),
            rho: Some(rho),
            searched: (lo, hi),
            note: "feasible up to the top of the range".into(),
        });
    }
    let (mut a, mut b) = (grid[t], grid[t + 1]);
    let mut rho_a = rho;
    for _ in 0..100 {
        let mid = (a * b).sqrt();
        if mid <= a || mid >= b {
            break;
        }
        let r = model.spectral_radius(mid).unwrap_or(f64::INFINITY);
        if r < 1.0 {
            a = mid;
            rho_a = r;
        } else {
            b = mid;
        }
        if b / a - 1.0 < 1e-12 {
            break;
        }
    }
    Ok(Advice {
        gamma: Some(a),
        rho: Some(rho_a),
        searched: (lo, hi),
        note: "largest contracting step found".into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic() -> UModel {
        UModel {
            n: 2,
            eta: 0.5,
            l: 1.0,
            q1: 1.0,
            q2: 1.0,
            q3: 1.0,
            r_r: 0.5,
            r_p: 0.5,
            n_bar: 2,
        }
    }

    #[test]
    fn geometric_and_constant_series() {
        let s: Vec<f64> = (0..100).map(|k| 2f64.powi(-k)).collect();
        let f = fit_linear_rate(&s).unwrap();
        assert!((f.lambda - 0.5).abs() < 1e-6);
        assert_eq!(f.fit_residual, 0.0);
        let c = fit_linear_rate(&[3.0; 50]).unwrap();
        assert!((c.lambda - 1.0).abs() < 1e-6);
        assert!(matches!(fit_linear_rate(&[1.0; 5]), Err(Error::FitUndefined(_))));
        let mut z = s.clone();
        z[50] = 0.0;
        assert!(matches!(fit_linear_rate(&z), Err(Error::FitUndefined(_))));
    }

    #[test]
    fn two_agent_row_constant() {
        let c = theoretical_constants(2, 0.25, 1.0, 1.0, DEFAULT_CAP).unwrap();
        assert!((c.q_r - 80.0 / 3.0).abs() < 1e-12);
        assert_eq!(c.n_r, Some(13));
        assert!(c.r_r.unwrap() < 1.0);
        // One block fewer must not contract.
        assert!(c.q_r * 0.75f64.powi(11) >= 1.0);
        assert!(c.n_p.is_none());
        assert!(!c.is_tractable());
        assert!(matches!(UModel::from_constants(&c), Err(Error::Intractable(_))));
    }

    #[test]
    fn tiny_eta_is_intractable() {
        let c = theoretical_constants(5, 1e-3, 1.0, 1.0, DEFAULT_CAP).unwrap();
        assert!(c.n_r.is_none() && c.n_p.is_none());
        assert!(c.n_r_estimate > DEFAULT_CAP as f64);
    }

    #[test]
    fn unit_radius_at_zero_step() {
        for nb in [1, 2, 3, 7, 13] {
            let m = UModel { n_bar: nb, ..synthetic() };
            assert!((m.spectral_radius(0.0).unwrap() - 1.0).abs() < 1e-12);
            assert!((dense_spectral_radius(&m.build(0.0)) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn structured_radius_matches_dense() {
        for nb in [2, 3, 5, 13] {
            let m = UModel { n_bar: nb, q1: 0.3, q2: 2.0, ..synthetic() };
            for g in [1e-4, 1e-3, 1e-2, 0.1] {
                let s = m.spectral_radius(g).unwrap();
                let d = dense_spectral_radius(&m.build(g));
                let p = spectral_radius(&m.build(g)).unwrap();
                assert!((s - d).abs() < 1e-9 * d, "nb={nb} g={g}: {s} vs {d}");
                assert!((p - d).abs() < 1e-8 * d, "nb={nb} g={g}: power {p} vs {d}");
            }
        }
    }

    #[test]
    fn eigenvalue_slope_at_zero() {
        let m = synthetic();
        let g = 1e-8;
        let slope = (m.spectral_radius(g).unwrap() - 1.0) / g;
        let expect = m.unit_eigenvalue_slope();
        assert!((slope - expect).abs() <= 0.1 * expect.abs(), "{slope} vs {expect}");
        // Decreasing just above zero.
        assert!(m.spectral_radius(1e-6).unwrap() < m.spectral_radius(1e-7).unwrap());
    }

    #[test]
    fn identity_radius() {
        assert!((spectral_radius(&DMatrix::identity(3, 3)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn advisor_on_synthetic_constants() {
        let m = synthetic();
        let a = step_size_advisor(&m, 1e-8, 1.0).unwrap();
        let g = a.gamma.expect("feasible step");
        assert!(a.rho.unwrap() < 1.0);
        assert!(m.spectral_radius(g * (1.0 + 1e-9)).unwrap() >= 1.0 - 1e-12);
        assert!(m.spectral_radius(g * 1.01).unwrap() >= 1.0);
    }
}
