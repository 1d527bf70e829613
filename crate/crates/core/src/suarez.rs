//! The Suarez-Schopf delayed oscillator `x' = x - alpha x(t - tau) - x^3`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{DelayModel, HistoryGrid, LinearFunctional};
use crate::integrator::evolve_fn;
use crate::spectral::suarez_lambda;

pub const DEFAULT_R_CUT: f64 = 1.0;

/// Odd `C^2` nonlinearity equal to `y^3` for `|y| <= a`, blended by a quintic
/// smoothstep over `[a, a + 1]` into the tangent line of slope `3 a^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cutoff {
    pub a: f64,
}

fn smoothstep(u: f64) -> (f64, f64, f64) {
    let u2 = u * u;
    let s = u2 * u * (10.0 - 15.0 * u + 6.0 * u2);
    let ds = 30.0 * u2 * (1.0 - u) * (1.0 - u);
    let d2s = 60.0 * u * (1.0 - u) * (1.0 - 2.0 * u);
    (s, ds, d2s)
}

impl Cutoff {
    pub fn new(a: f64) -> Self {
        Self { a }
    }

    /// `(g, g', g'')` at `y`.
    pub fn eval_all(&self, y: f64) -> (f64, f64, f64) {
        let s = y.signum();
        let x = y.abs();
        let a = self.a;
        let (g, dg, d2g) = if x <= a {
            (x * x * x, 3.0 * x * x, 6.0 * x)
        } else if x < a + 1.0 {
            let (st, dst, d2st) = smoothstep(x - a);
            let cube = x * x * x;
            let lin = a * a * a + 3.0 * a * a * (x - a);
            let d = lin - cube;
            let dd = 3.0 * a * a - 3.0 * x * x;
            (cube + st * d, 3.0 * x * x + dst * d + st * dd, 6.0 * x + d2st * d + 2.0 * dst * dd - 6.0 * x * st)
        } else {
            (a * a * a + 3.0 * a * a * (x - a), 3.0 * a * a, 0.0)
        };
        (s * g, dg, s * d2g)
    }

    pub fn g(&self, y: f64) -> f64 {
        if y.abs() <= self.a {
            return y * y * y;
        }
        self.eval_all(y).0
    }

    pub fn dg(&self, y: f64) -> f64 {
        self.eval_all(y).1
    }

    pub fn d2g(&self, y: f64) -> f64 {
        self.eval_all(y).2
    }

    /// `sup |g'|`, sampled over the blend band (the tail slope is `3 a^2`).
    pub fn sup_slope(&self) -> f64 {
        (0..=2000).map(|i| self.dg(self.a + i as f64 / 2000.0)).fold(3.0 * self.a * self.a, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct SuarezModel {
    pub alpha: f64,
    pub tau: f64,
    pub r_cut: f64,
    pub gamma: f64,
    pub cutoff: Cutoff,
    model: DelayModel,
}

impl SuarezModel {
    pub fn new(alpha: f64, tau: f64) -> Result<Self> {
        Self::with_cutoff(alpha, tau, DEFAULT_R_CUT)
    }

    pub fn with_cutoff(alpha: f64, tau: f64, r_cut: f64) -> Result<Self> {
        if !(alpha.is_finite() && (0.0..1.0).contains(&alpha)) {
            return Err(Error::Domain(format!("alpha must lie in [0, 1), got {alpha}")));
        }
        if !(r_cut.is_finite() && r_cut > 0.0) {
            return Err(Error::Config(format!("cutoff offset must be positive, got {r_cut}")));
        }
        let gamma = (1.0 + alpha).sqrt();
        let cutoff = Cutoff::new(gamma + r_cut);
        let a = LinearFunctional::new(1, 1).with_scalar_mass(0.0, 1.0)?.with_scalar_mass(-tau, -alpha)?;
        let c = LinearFunctional::delta(1, 0.0)?;
        let model = DelayModel::new(
            tau,
            a,
            DMatrix::from_element(1, 1, 1.0),
            c,
            Arc::new(move |_, y: &[f64]| vec![-cutoff.g(y[0])]),
            Arc::new(move |_, y: &[f64]| DMatrix::from_element(1, 1, -cutoff.dg(y[0]))),
            cutoff.sup_slope(),
        )?;
        Ok(Self { alpha, tau, r_cut, gamma, cutoff, model })
    }

    pub fn model(&self) -> &DelayModel {
        &self.model
    }

    /// `sup |g'|` over the whole line.
    pub fn lambda_sup(&self) -> f64 {
        self.model.lambda()
    }

    /// `3 + 3 alpha`, the slope bound on `[-gamma, gamma]` used by the frequency test.
    pub fn lambda_attractor(&self) -> f64 {
        suarez_lambda(self.alpha)
    }

    /// `[-sqrt(1 - alpha), 0, sqrt(1 - alpha)]`.
    pub fn stationary_states(&self) -> [f64; 3] {
        let x = (1.0 - self.alpha).sqrt();
        [-x, 0.0, x]
    }

    /// `x - alpha x - g(x)` for a constant history `x`.
    pub fn stationary_residual(&self, x: f64) -> f64 {
        x - self.alpha * x - self.cutoff.g(x)
    }
}

/// Closed-form first trace number `(3 + alpha^2) / 2` of the linear part.
pub fn beta1_closed_form(alpha: f64) -> f64 {
    (3.0 + alpha * alpha) / 2.0
}

/// Random smooth history with `sup |phi| = radius` on `[-tau, 0]`.
pub fn random_history<R: Rng>(rng: &mut R, tau: f64, radius: f64) -> impl Fn(f64) -> Vec<f64> + Sync {
    let coef: Vec<(f64, f64)> = (0..5).map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    let raw = move |th: f64| -> f64 {
        coef.iter()
            .enumerate()
            .map(|(j, (a, b))| {
                let w = j as f64 * std::f64::consts::PI * th / tau;
                a * w.cos() + b * w.sin()
            })
            .sum()
    };
    let sup = (0..=4096).map(|i| raw(-tau + tau * i as f64 / 4096.0).abs()).fold(0.0, f64::max);
    let scale = if sup > 0.0 { radius / sup } else { 0.0 };
    move |th| vec![(scale * raw(th)).clamp(-radius, radius)]
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub radius: f64,
    pub trials: usize,
    /// `max (sup |x(t)| - radius)` over trials and node times `t >= 0`.
    pub max_overshoot: f64,
}

/// Evolves `trials` random histories with `sup |phi| <= gamma + r` (the first
/// one the constant `gamma + r`) and reports the largest overshoot of `gamma + r`.
pub fn check_invariance(
    sm: &SuarezModel,
    r: f64,
    trials: usize,
    horizon: f64,
    m: usize,
    seed: u64,
) -> Result<InvarianceReport> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("radius offset must be positive, got {r}")));
    }
    let radius = sm.gamma + r;
    let grid = HistoryGrid::new(sm.tau, m)?;
    let h = sm.tau / m as f64;
    let overs = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let rad = if i == 0 { radius } else { radius * rng.gen_range(0.05..=1.0) };
            let traj = if i == 0 {
                evolve_fn(sm.model(), grid, |_| vec![radius], 0.0, horizon, h)?
            } else {
                evolve_fn(sm.model(), grid, random_history(&mut rng, sm.tau, rad), 0.0, horizon, h)?
            };
            Ok(traj.heads().iter().map(|x| x.abs() - radius).fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(InvarianceReport { radius, trials, max_overshoot: overs.into_iter().fold(f64::NEG_INFINITY, f64::max) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbsorbingReport {
    pub trials: usize,
    pub horizon: f64,
    /// `max (sup |x| - gamma)` over the second half of every run.
    pub max_excess: f64,
}

/// Long runs from histories of size up to `gamma + start_offset` (the first
/// one constant at that size); reports the terminal excess over `gamma`.
pub fn check_absorbing(
    sm: &SuarezModel,
    trials: usize,
    t_long: f64,
    start_offset: f64,
    m: usize,
    seed: u64,
) -> Result<AbsorbingReport> {
    if t_long < 100.0 * sm.tau * (1.0 - 1e-12) {
        return Err(Error::Domain(format!("run length {t_long} is below 100 delays")));
    }
    let grid = HistoryGrid::new(sm.tau, m)?;
    let h = sm.tau / m as f64;
    let start = sm.gamma + start_offset;
    let ex = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let traj = if i == 0 {
                evolve_fn(sm.model(), grid, |_| vec![start], 0.0, t_long, h)?
            } else {
                let rad = start * rng.gen_range(0.05..=1.0);
                evolve_fn(sm.model(), grid, random_history(&mut rng, sm.tau, rad), 0.0, t_long, h)?
            };
            let heads = traj.heads();
            let half = heads.len() / 2;
            Ok(heads[half..].iter().map(|x| x.abs() - sm.gamma).fold(f64::NEG_INFINITY, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(AbsorbingReport { trials, horizon: t_long, max_excess: ex.into_iter().fold(f64::NEG_INFINITY, f64::max) })
}
