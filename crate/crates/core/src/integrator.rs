//! Method of steps for `x'(t) = A~ x_t + B~ F(t, C~ x_t)`.
//!
//! The head ODE is advanced by the classical four-stage Runge-Kutta scheme on
//! a step `h` that divides the delay and every lag, so all breaking points are
//! nodes. Delayed values needed at half-step stage times are reconstructed by
//! cubic (four-point) interpolation of node values that lie inside the current
//! history window `[t - tau, t]`. The one-step map therefore depends only on
//! the grid state at `t`, which makes the discrete flow an exact semigroup on
//! grid states when the step equals the grid spacing.

use std::sync::{Arc, OnceLock};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{h_inner, DelayModel, HState, HistoryGrid, ResolvedFunctional};

/// Heads beyond this magnitude are treated as a blow-up.
pub const DIVERGENCE_BOUND: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Stage {
    Start,
    Mid,
    End,
}

impl Stage {
    pub(crate) const RK4: [Stage; 4] = [Stage::Start, Stage::Mid, Stage::Mid, Stage::End];

    fn offset(self) -> f64 {
        match self {
            Stage::Start => 0.0,
            Stage::Mid => 0.5,
            Stage::End => 1.0,
        }
    }
}

/// Cubic Lagrange weights on nodes `0, 1, 2, 3` evaluated at `x`.
pub(crate) fn cubic_weights(x: f64) -> [f64; 4] {
    [
        -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0,
        x * (x - 2.0) * (x - 3.0) / 2.0,
        -x * (x - 1.0) * (x - 3.0) / 2.0,
        x * (x - 1.0) * (x - 2.0) / 6.0,
    ]
}

/// Node values at integer positions `p >= -window`, position 0 being `t0`.
#[derive(Debug, Clone)]
pub(crate) struct NodeHistory {
    n: usize,
    window: usize,
    data: Vec<f64>,
}

impl NodeHistory {
    pub(crate) fn with_capacity(n: usize, window: usize, steps: usize) -> Self {
        Self { n, window, data: Vec::with_capacity((window + steps + 1) * n) }
    }

    pub(crate) fn push(&mut self, x: &[f64]) {
        debug_assert_eq!(x.len(), self.n);
        self.data.extend_from_slice(x);
    }

    /// Stored node `p` steps from the start; negative `p` reaches into the initial history.
    pub(crate) fn node(&self, p: isize) -> &[f64] {
        let i = (p + self.window as isize) as usize * self.n;
        &self.data[i..i + self.n]
    }

    pub(crate) fn node_mut(&mut self, p: isize) -> &mut [f64] {
        let i = (p + self.window as isize) as usize * self.n;
        &mut self.data[i..i + self.n]
    }

    /// Value `back` steps behind the stage time of step `k` (stage state `y`).
    pub(crate) fn stage_value(&self, k: usize, stage: Stage, back: usize, y: &[f64], out: &mut [f64]) {
        if back == 0 {
            out.copy_from_slice(y);
            return;
        }
        let k = k as isize;
        let back = back as isize;
        match stage {
            Stage::Start => out.copy_from_slice(self.node(k - back)),
            Stage::End => out.copy_from_slice(self.node(k + 1 - back)),
            Stage::Mid => {
                let j = k - back;
                let lo = k - self.window as isize;
                let s = (j - 1).clamp(lo, k - 3);
                let w = cubic_weights((j - s) as f64 + 0.5);
                out.fill(0.0);
                for (a, wa) in w.iter().enumerate() {
                    let v = self.node(s + a as isize);
                    for (o, vi) in out.iter_mut().zip(v) {
                        *o += wa * vi;
                    }
                }
            }
        }
    }
}

/// Step-level data shared by the nonlinear and the tangent flows.
#[derive(Debug, Clone)]
pub(crate) struct Scheme {
    pub n: usize,
    pub h: f64,
    /// Steps per delay `tau`.
    pub window: usize,
    /// Steps per history-grid interval.
    pub stride: usize,
    pub a: ResolvedFunctional,
    pub c: ResolvedFunctional,
    pub b: DMatrix<f64>,
}

impl Scheme {
    pub(crate) fn new(model: &DelayModel, grid: HistoryGrid, h: f64) -> Result<Self> {
        if (grid.tau() - model.tau()).abs() > 1e-12 * model.tau() {
            return Err(Error::Config(format!(
                "state grid horizon {} differs from the model delay {}",
                grid.tau(),
                model.tau()
            )));
        }
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Config(format!("step must be positive, got {h}")));
        }
        let ratio = model.tau() / h;
        let window = ratio.round();
        if (ratio - window).abs() > 1e-9 * ratio.max(1.0) || window < 1.0 {
            return Err(Error::Config(format!("step {h} does not divide the delay {}", model.tau())));
        }
        let window = window as usize;
        let m = grid.intervals();
        if !window.is_multiple_of(m) {
            return Err(Error::Config(format!(
                "step {h} does not divide the history grid spacing {} ({} steps per delay vs {m} grid intervals)",
                grid.spacing(),
                window
            )));
        }
        let stride = window / m;
        let a = model.a_tilde().resolve(grid)?.rescaled(stride);
        let c = model.c_tilde().resolve(grid)?.rescaled(stride);
        Ok(Self { n: model.n(), h, window, stride, a, c, b: model.b_tilde().clone() })
    }

    /// Prefix positions `-window..=0` from a grid state (position 0 is the head).
    pub(crate) fn history_from_state(&self, v0: &HState, steps: usize) -> NodeHistory {
        let n = self.n;
        let m = v0.grid().intervals();
        let mut hist = NodeHistory::with_capacity(n, self.window, steps);
        let mut buf = vec![0.0; n];
        for p in 0..self.window {
            let i = p / self.stride;
            let r = p % self.stride;
            if r == 0 {
                hist.push(v0.seg_row(i));
            } else {
                let s = (i as isize - 1).clamp(0, m as isize - 3) as usize;
                let w = cubic_weights((i - s) as f64 + r as f64 / self.stride as f64);
                buf.fill(0.0);
                for (a, wa) in w.iter().enumerate() {
                    for (o, v) in buf.iter_mut().zip(v0.seg_row(s + a)) {
                        *o += wa * v;
                    }
                }
                hist.push(&buf);
            }
        }
        hist.push(v0.head());
        hist
    }
}

fn divergence_check(x: &[f64], t: f64) -> Result<()> {
    if x.iter().any(|v| !v.is_finite() || v.abs() > DIVERGENCE_BOUND) {
        return Err(Error::Divergence { t });
    }
    Ok(())
}

pub(crate) fn finite_check(x: &[f64], t: f64) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Divergence { t });
    }
    Ok(())
}

/// A computed solution on `[t0 - tau, t0 + steps * h]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    model: Arc<DelayModel>,
    grid: HistoryGrid,
    scheme: Scheme,
    t0: f64,
    steps: usize,
    nodes: NodeHistory,
    v0: HState,
    /// `C~` applied at each Runge-Kutta stage, `steps * 4 * r` values.
    stage_outputs: Vec<f64>,
    stage_jac: OnceLock<Arc<Vec<DMatrix<f64>>>>,
}

/// Integrates from the grid state `v0` at time `t0` over `horizon` with step `h`.
///
/// `v0` need not be embedded: a head differing from `phi(0)` is treated as
/// jump data (generalized initial condition).
pub fn evolve(model: &DelayModel, v0: &HState, t0: f64, horizon: f64, h: f64) -> Result<Trajectory> {
    if v0.n() != model.n() {
        return Err(Error::Shape(format!("state has n = {}, model has n = {}", v0.n(), model.n())));
    }
    let scheme = Scheme::new(model, v0.grid(), h)?;
    let steps = step_count(horizon, h)?;
    let hist = scheme.history_from_state(v0, steps);
    run(model, scheme, v0.clone(), hist, t0, steps)
}

/// Integrates from a continuous initial history `history(theta)`, sampled at
/// every step node of `[-tau, 0]`.
pub fn evolve_fn<F>(
    model: &DelayModel,
    grid: HistoryGrid,
    history: F,
    t0: f64,
    horizon: f64,
    h: f64,
) -> Result<Trajectory>
where
    F: Fn(f64) -> Vec<f64>,
{
    let scheme = Scheme::new(model, grid, h)?;
    let steps = step_count(horizon, h)?;
    let v0 = HState::from_fn(grid, model.n(), &history)?;
    let mut hist = NodeHistory::with_capacity(model.n(), scheme.window, steps);
    for p in 0..scheme.window {
        let theta = if p == 0 { -model.tau() } else { -((scheme.window - p) as f64) * h };
        let v = history(theta);
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("initial history must be finite".into()));
        }
        hist.push(&v);
    }
    hist.push(v0.head());
    run(model, scheme, v0, hist, t0, steps)
}

fn step_count(horizon: f64, h: f64) -> Result<usize> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::Config(format!("integration horizon must be positive, got {horizon}")));
    }
    Ok((horizon / h - 1e-9).ceil().max(1.0) as usize)
}

fn run(
    model: &DelayModel,
    scheme: Scheme,
    v0: HState,
    mut nodes: NodeHistory,
    t0: f64,
    steps: usize,
) -> Result<Trajectory> {
    let n = scheme.n;
    let r = model.output_dim();
    let h = scheme.h;
    let mut stage_outputs = Vec::with_capacity(steps * 4 * r);
    let mut x = nodes.node(0).to_vec();
    let mut ks = vec![vec![0.0; n]; 4];
    let mut y = vec![0.0; n];
    let mut a_out = DVector::zeros(n);
    let mut c_out = DVector::zeros(r);

    for k in 0..steps {
        let tk = t0 + k as f64 * h;
        for (si, stage) in Stage::RK4.iter().enumerate() {
            let coef = match si {
                0 => 0.0,
                1 | 2 => 0.5 * h,
                _ => h,
            };
            for i in 0..n {
                y[i] = if si == 0 { x[i] } else { x[i] + coef * ks[si - 1][i] };
            }
            let ts = tk + stage.offset() * h;
            scheme.a.eval(|back, buf| nodes.stage_value(k, *stage, back, &y, buf), &mut a_out);
            scheme.c.eval(|back, buf| nodes.stage_value(k, *stage, back, &y, buf), &mut c_out);
            stage_outputs.extend_from_slice(c_out.as_slice());
            let fv = model.f(ts, c_out.as_slice());
            let kv = &mut ks[si];
            for i in 0..n {
                let mut acc = a_out[i];
                for (j, fj) in fv.iter().enumerate() {
                    acc += scheme.b[(i, j)] * fj;
                }
                kv[i] = acc;
            }
        }
        for i in 0..n {
            x[i] += h / 6.0 * (ks[0][i] + 2.0 * ks[1][i] + 2.0 * ks[2][i] + ks[3][i]);
        }
        divergence_check(&x, tk + h)?;
        nodes.push(&x);
    }

    Ok(Trajectory {
        model: Arc::new(model.clone()),
        grid: v0.grid(),
        scheme,
        t0,
        steps,
        nodes,
        v0,
        stage_outputs,
        stage_jac: OnceLock::new(),
    })
}

impl Trajectory {
    pub fn model(&self) -> &DelayModel {
        &self.model
    }

    pub fn grid(&self) -> HistoryGrid {
        self.grid
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn step(&self) -> f64 {
        self.scheme.h
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn t_end(&self) -> f64 {
        self.time_at_step(self.steps)
    }

    pub fn time_at_step(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.scheme.h
    }

    /// Steps per delay.
    pub fn steps_per_delay(&self) -> usize {
        self.scheme.window
    }

    pub fn initial_state(&self) -> &HState {
        &self.v0
    }

    /// `x(t0 + k h)`; negative `k` reaches into the initial history.
    pub fn head_at(&self, k: isize) -> &[f64] {
        assert!(k >= -(self.scheme.window as isize) && k <= self.steps as isize);
        self.nodes.node(k)
    }

    /// Scalar head sequence `x(t0 + k h)`, `k = 0..=steps` (first component).
    pub fn heads(&self) -> Vec<f64> {
        (0..=self.steps as isize).map(|k| self.nodes.node(k)[0]).collect()
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.time_at_step(k)).collect()
    }

    /// Step index of a node time.
    pub fn step_index(&self, t: f64) -> Result<usize> {
        let x = (t - self.t0) / self.scheme.h;
        let k = x.round();
        if !(k >= 0.0 && k <= self.steps as f64) || (x - k).abs() > 1e-9 * k.max(1.0) {
            return Err(Error::Domain(format!(
                "t = {t} is not a node time in [{}, {}] (step {})",
                self.t0,
                self.t_end(),
                self.scheme.h
            )));
        }
        Ok(k as usize)
    }

    pub fn state_at(&self, t: f64) -> Result<HState> {
        let k = self.step_index(t)?;
        Ok(self.state_at_step(k))
    }

    /// Grid state `(x(t), x_t)` at `t = t0 + k h`.
    pub fn state_at_step(&self, k: usize) -> HState {
        assert!(k <= self.steps);
        if k == 0 {
            return self.v0.clone();
        }
        state_from_nodes(&self.nodes, self.grid, self.scheme.stride, self.scheme.n, k)
    }

    /// Jacobians `dF(t_s, C~ x)` at every Runge-Kutta stage (4 per step).
    pub(crate) fn stage_jacobians(&self) -> Arc<Vec<DMatrix<f64>>> {
        self.stage_jac
            .get_or_init(|| {
                let r = self.model.output_dim();
                let h = self.scheme.h;
                let jacs = (0..self.steps * 4)
                    .map(|idx| {
                        let k = idx / 4;
                        let stage = Stage::RK4[idx % 4];
                        let t = self.t0 + (k as f64 + stage.offset()) * h;
                        self.model.df(t, &self.stage_outputs[idx * r..(idx + 1) * r])
                    })
                    .collect();
                Arc::new(jacs)
            })
            .clone()
    }

    pub(crate) fn scheme(&self) -> &Scheme {
        &self.scheme
    }
}

pub(crate) fn state_from_nodes(nodes: &NodeHistory, grid: HistoryGrid, stride: usize, n: usize, k: usize) -> HState {
    let m = grid.intervals();
    let head = nodes.node(k as isize).to_vec();
    let mut seg = Vec::with_capacity((m + 1) * n);
    for i in 0..=m {
        let p = k as isize - ((m - i) * stride) as isize;
        seg.extend_from_slice(nodes.node(p));
    }
    HState::new(grid, head, seg).expect("node values are finite and conform to the grid")
}

/// Lipschitz behaviour of the flow for one pair of initial states.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UlipReport {
    pub times: Vec<f64>,
    /// `|phi^t(v1) - phi^t(v2)|_H / |v1 - v2|_H` at each node time.
    pub ratios: Vec<f64>,
    pub sup_ratio: f64,
    /// Least-squares slope of `ln ratio` against `t - t0`.
    pub rate: f64,
    /// `exp` of the least-squares intercept.
    pub prefactor: f64,
}

pub fn check_ulip(model: &DelayModel, v1: &HState, v2: &HState, horizon: f64, h: f64) -> Result<UlipReport> {
    let d0 = v1.combine(1.0, -1.0, v2)?;
    let n0 = h_inner(&d0, &d0)?.sqrt();
    if n0 == 0.0 {
        return Err(Error::DegeneratePair);
    }
    let t1 = evolve(model, v1, 0.0, horizon, h)?;
    let t2 = evolve(model, v2, 0.0, horizon, h)?;
    let mut times = Vec::with_capacity(t1.steps() + 1);
    let mut ratios = Vec::with_capacity(t1.steps() + 1);
    for k in 0..=t1.steps() {
        let d = t1.state_at_step(k).combine(1.0, -1.0, &t2.state_at_step(k))?;
        times.push(t1.time_at_step(k));
        ratios.push(h_inner(&d, &d)?.sqrt() / n0);
    }
    let sup_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let (rate, intercept) = fit_log_linear(&times, &ratios);
    Ok(UlipReport { times, ratios, sup_ratio, rate, prefactor: intercept.exp() })
}

/// Least squares for `ln y = a t + b` over positive samples.
pub(crate) fn fit_log_linear(t: &[f64], y: &[f64]) -> (f64, f64) {
    let pts: Vec<(f64, f64)> = t.iter().zip(y).filter(|(_, v)| **v > 0.0).map(|(a, v)| (*a, v.ln())).collect();
    if pts.len() < 2 {
        return (0.0, pts.first().map_or(0.0, |p| p.1));
    }
    let nf = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / nf;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / nf;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let a = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (a, my - a * mt)
}

/// Constants `(M1, kappa)` of the a-priori Lipschitz estimate assembled from
/// the linear semigroup bound `|G(t)| <= M_A e^{kappa0 t}`, the (MES)
/// constant `M_C`, the Lipschitz bound `Lambda` and `|B|` over a window `T`.
pub fn ulip_constants(m_a: f64, kappa0: f64, m_c: f64, lambda: f64, b_norm: f64, horizon: f64) -> (f64, f64) {
    let coupling = m_a * m_c * lambda * b_norm;
    (m_a + coupling, (coupling + 1.0) * (kappa0 * horizon).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::LinearFunctional;
    use std::f64::consts::{E, FRAC_PI_2, PI};

    fn growth_model() -> DelayModel {
        DelayModel::linear(1.0, LinearFunctional::delta(1, 0.0).unwrap()).unwrap()
    }

    fn cos_model() -> DelayModel {
        DelayModel::linear(FRAC_PI_2, LinearFunctional::new(1, 1).with_scalar_mass(-FRAC_PI_2, -1.0).unwrap()).unwrap()
    }

    #[test]
    fn cubic_weights_reproduce_cubics() {
        for x in [0.5, 1.5, 2.5, 0.25] {
            let w = cubic_weights(x);
            let p = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - 0.25 * t * t * t;
            let v: f64 = (0..4).map(|i| w[i] * p(i as f64)).sum();
            assert!((v - p(x)).abs() < 1e-13);
        }
    }

    #[test]
    fn exponential_growth() {
        let g = HistoryGrid::new(1.0, 64).unwrap();
        let v0 = HState::constant(g, &[1.0]).unwrap();
        let traj = evolve(&growth_model(), &v0, 0.0, 1.0, 1.0 / 64.0).unwrap();
        let s = traj.state_at(1.0).unwrap();
        assert!((s.head()[0] - E).abs() < 1e-8);
        assert_eq!(s.seg_row(0)[0], 1.0);
    }

    #[test]
    fn cosine_is_reproduced() {
        let g = HistoryGrid::new(FRAC_PI_2, 64).unwrap();
        let traj = evolve_fn(&cos_model(), g, |t| vec![t.cos()], 0.0, 2.0 * PI, FRAC_PI_2 / 64.0).unwrap();
        let err = traj.times().iter().zip(traj.heads()).map(|(t, x)| (x - t.cos()).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err}");
    }

    #[test]
    fn state_at_start_returns_initial_state() {
        let g = HistoryGrid::new(1.0, 16).unwrap();
        let v0 = HState::new(g, vec![2.0], (0..17).map(|i| i as f64 * 0.1).collect()).unwrap();
        let traj = evolve(&growth_model(), &v0, 3.0, 0.5, 1.0 / 32.0).unwrap();
        assert_eq!(traj.state_at(3.0).unwrap(), v0);
        let s = traj.state_at(3.25).unwrap();
        assert_eq!(s.seg_row(16), s.head());
        assert!(s.is_embedded());
        assert!(matches!(traj.state_at(3.01), Err(Error::Domain(_))));
        assert!(matches!(traj.state_at(4.0), Err(Error::Domain(_))));
    }

    #[test]
    fn step_must_divide_delay() {
        let g = HistoryGrid::new(1.0, 64).unwrap();
        let v0 = HState::constant(g, &[1.0]).unwrap();
        assert!(matches!(evolve(&growth_model(), &v0, 0.0, 1.0, 0.3), Err(Error::Config(_))));
        assert!(matches!(evolve(&growth_model(), &v0, 0.0, 1.0, 1.0 / 32.0), Err(Error::Config(_))));
    }

    #[test]
    fn divergence_reports_time() {
        let m = DelayModel::linear(1.0, LinearFunctional::new(1, 1).with_scalar_mass(0.0, 50.0).unwrap()).unwrap();
        let g = HistoryGrid::new(1.0, 8).unwrap();
        let v0 = HState::constant(g, &[1.0]).unwrap();
        match evolve(&m, &v0, 0.0, 10.0, 1.0 / 64.0) {
            Err(Error::Divergence { t }) => assert!(t > 0.3 && t < 0.5, "t = {t}"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn ulip_for_pure_growth() {
        let g = HistoryGrid::new(1.0, 64).unwrap();
        let v1 = HState::new(g, vec![1.0], vec![0.0; 65]).unwrap();
        let v2 = HState::zeros(g, 1);
        // head-only difference: |phi^t| includes the L2 tail of e^s on [0, t]
        let rep = check_ulip(&growth_model(), &v1, &v2, 1.0, 1.0 / 64.0).unwrap();
        let t = 1.0;
        let exact = (E * E + (E * E - 1.0) / 2.0).sqrt();
        assert!((rep.ratios.last().unwrap() - exact).abs() < 1e-4 * exact);
        assert!(rep.ratios.iter().zip(&rep.times).all(|(r, s)| *r >= (s / t * 0.0 + s).exp() - 1e-6));
        assert!(matches!(check_ulip(&growth_model(), &v1, &v1, 1.0, 1.0 / 64.0), Err(Error::DegeneratePair)));
    }
}
