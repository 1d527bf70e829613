//! Linearized flow along a computed trajectory.
//!
//! The tangent scheme is the exact derivative of the discrete one-step map of
//! [`crate::integrator`]: it reuses the same stage layout, the same delayed
//! value reconstruction and the Jacobians of `F` at the base stage values.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hilbert::{HState, HistoryGrid};
use crate::integrator::{finite_check, state_from_nodes, NodeHistory, Stage, Trajectory};

/// Diagonal of the Gram matrix of the `H` inner product in coordinates
/// `[head, seg rows]`.
pub fn coord_weights(grid: HistoryGrid, n: usize) -> DVector<f64> {
    let w = grid.weights();
    let mut d = DVector::zeros(n * (grid.intervals() + 2));
    for i in 0..n {
        d[i] = 1.0;
    }
    for (r, wr) in w.iter().enumerate() {
        for i in 0..n {
            d[n + r * n + i] = *wr;
        }
    }
    d
}

/// The linearization of the flow around one base trajectory.
#[derive(Debug, Clone)]
pub struct TangentFlow<'a> {
    base: &'a Trajectory,
    jac: Arc<Vec<DMatrix<f64>>>,
}

/// Tangent vectors `L(t0 + k h) z0`, `k = 0..=steps`.
#[derive(Debug, Clone)]
pub struct TangentTrajectory {
    grid: HistoryGrid,
    n: usize,
    stride: usize,
    h: f64,
    t0: f64,
    steps: usize,
    z0: HState,
    nodes: NodeHistory,
}

impl<'a> TangentFlow<'a> {
    pub fn new(base: &'a Trajectory) -> Self {
        Self { base, jac: base.stage_jacobians() }
    }

    pub fn base(&self) -> &Trajectory {
        self.base
    }

    /// Evolves `z0` over the first `steps` steps of the base trajectory.
    pub fn evolve(&self, z0: &HState, steps: usize) -> Result<TangentTrajectory> {
        let mut st = self.start(z0, steps)?;
        for k in 0..steps {
            self.step(&mut st, k)?;
        }
        let sc = self.base.scheme();
        Ok(TangentTrajectory {
            grid: self.base.grid(),
            n: sc.n,
            stride: sc.stride,
            h: sc.h,
            t0: self.base.t0(),
            steps,
            z0: z0.clone(),
            nodes: st,
        })
    }

    pub(crate) fn start(&self, z0: &HState, steps: usize) -> Result<NodeHistory> {
        if z0.grid() != self.base.grid() || z0.n() != self.base.model().n() {
            return Err(Error::Shape("tangent vector does not conform to the base trajectory".into()));
        }
        if steps > self.base.steps() {
            return Err(Error::Domain(format!(
                "requested {steps} steps but the base trajectory has {}",
                self.base.steps()
            )));
        }
        Ok(self.base.scheme().history_from_state(z0, steps))
    }

    /// Advances `hist` from position `k` to `k + 1`.
    pub(crate) fn step(&self, hist: &mut NodeHistory, k: usize) -> Result<()> {
        let sc = self.base.scheme();
        let n = sc.n;
        let h = sc.h;
        let r = sc.c.out;
        let z = hist.node(k as isize).to_vec();
        let mut ks = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut y = vec![0.0; n];
        let mut a_out = DVector::zeros(n);
        let mut c_out = DVector::zeros(r);
        for (si, stage) in Stage::RK4.iter().enumerate() {
            let coef = match si {
                0 => 0.0,
                1 | 2 => 0.5 * h,
                _ => h,
            };
            for i in 0..n {
                y[i] = if si == 0 { z[i] } else { z[i] + coef * ks[si - 1][i] };
            }
            sc.a.eval(|back, buf| hist.stage_value(k, *stage, back, &y, buf), &mut a_out);
            sc.c.eval(|back, buf| hist.stage_value(k, *stage, back, &y, buf), &mut c_out);
            let jy = &self.jac[4 * k + si] * &c_out;
            let by = &sc.b * jy;
            for i in 0..n {
                ks[si][i] = a_out[i] + by[i];
            }
        }
        let next: Vec<f64> =
            (0..n).map(|i| z[i] + h / 6.0 * (ks[0][i] + 2.0 * ks[1][i] + 2.0 * ks[2][i] + ks[3][i])).collect();
        finite_check(&next, self.base.time_at_step(k + 1))?;
        hist.push(&next);
        Ok(())
    }

    pub(crate) fn snapshot(&self, hist: &NodeHistory, k: usize, z0: &HState) -> HState {
        if k == 0 {
            return z0.clone();
        }
        let sc = self.base.scheme();
        state_from_nodes(hist, self.base.grid(), sc.stride, sc.n, k)
    }
}

impl TangentTrajectory {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time_at_step(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.h
    }

    pub fn state_at_step(&self, k: usize) -> HState {
        assert!(k <= self.steps);
        if k == 0 {
            return self.z0.clone();
        }
        state_from_nodes(&self.nodes, self.grid, self.stride, self.n, k)
    }

    /// Tangent head values `z(t0 + k h)` (first component), `k = 0..=steps`.
    pub fn heads(&self) -> Vec<f64> {
        (0..=self.steps as isize).map(|k| self.nodes.node(k)[0]).collect()
    }
}

/// Tangent vectors evolved in lockstep along one base trajectory.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub t: f64,
    pub vectors: Vec<HState>,
}

impl TangentFrame {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }
}

/// `L(t) xi` for each `xi` in `xi0`, where `t` is a node time of `base`.
pub fn evolve_tangent(base: &Trajectory, xi0: &[HState], t: f64) -> Result<TangentFrame> {
    if xi0.is_empty() {
        return Err(Error::Domain("a tangent frame needs at least one vector".into()));
    }
    let k = base.step_index(t)?;
    let flow = TangentFlow::new(base);
    let vectors = xi0.par_iter().map(|z| Ok(flow.evolve(z, k)?.state_at_step(k))).collect::<Result<Vec<_>>>()?;
    Ok(TangentFrame { t: base.time_at_step(k), vectors })
}

/// Matrix of the linearized flow `L(t)` in coordinates `[head, seg rows]`.
#[derive(Debug, Clone)]
pub struct QuasiDifferential {
    pub grid: HistoryGrid,
    pub n: usize,
    pub t: f64,
    /// Initial state of the base trajectory.
    pub v0: HState,
    pub matrix: DMatrix<f64>,
}

impl QuasiDifferential {
    pub fn apply(&self, z: &HState) -> Result<HState> {
        if z.grid() != self.grid || z.n() != self.n {
            return Err(Error::Shape("vector does not conform to the quasi-differential".into()));
        }
        let out = &self.matrix * z.coords();
        HState::from_coords(self.grid, self.n, out.as_slice())
    }

    /// The same operator in a basis orthonormal for the `H` inner product.
    pub fn weighted(&self) -> DMatrix<f64> {
        weighted_operator(&self.matrix, &coord_weights(self.grid, self.n))
    }
}

/// `R M R^{-1}` with `R = diag(sqrt(w))`.
pub(crate) fn weighted_operator(m: &DMatrix<f64>, w: &DVector<f64>) -> DMatrix<f64> {
    let s = w.map(f64::sqrt);
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| s[i] * m[(i, j)] / s[j])
}

/// Evolves every coordinate unit vector in parallel; returns the coordinate
/// matrices at each step listed in `at`.
pub(crate) fn basis_evolution(base: &Trajectory, at: &[usize]) -> Result<Vec<DMatrix<f64>>> {
    let grid = base.grid();
    let n = base.model().n();
    let dim = n * (grid.intervals() + 2);
    let last = at.iter().copied().max().unwrap_or(0);
    let flow = TangentFlow::new(base);
    let cols: Vec<Vec<DVector<f64>>> = (0..dim)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            let z0 = HState::from_coords(grid, n, &e)?;
            let tr = flow.evolve(&z0, last)?;
            Ok(at.iter().map(|&k| tr.state_at_step(k).coords()).collect())
        })
        .collect::<Result<_>>()?;
    Ok((0..at.len()).map(|i| DMatrix::from_fn(dim, dim, |r, c| cols[c][i][r])).collect())
}

pub fn quasi_differential(base: &Trajectory, t: f64) -> Result<QuasiDifferential> {
    let k = base.step_index(t)?;
    let matrix = basis_evolution(base, &[k])?.pop().expect("one matrix requested");
    Ok(QuasiDifferential {
        grid: base.grid(),
        n: base.model().n(),
        t: base.time_at_step(k),
        v0: base.initial_state().clone(),
        matrix,
    })
}

/// Empirical bound `|G(t)|_H <= M e^{kappa t}` for the linear part of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct SemigroupBound {
    pub m: f64,
    pub kappa: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
}

/// Estimates `(M_A, kappa0)` from `|G(t)|_H` at `samples` equally spaced
/// node times in `(0, horizon]`. `kappa0` is the least-squares growth rate
/// and `M_A` the smallest prefactor that makes the bound hold at all samples.
pub fn linear_semigroup_bound(base: &Trajectory, horizon: f64, samples: usize) -> Result<SemigroupBound> {
    if samples == 0 {
        return Err(Error::Config("at least one sample time is needed".into()));
    }
    let last = base.step_index(base.t0() + horizon)?;
    let at: Vec<usize> = (1..=samples).map(|i| (i * last / samples).max(1)).collect();
    let w = coord_weights(base.grid(), base.model().n());
    let mats = basis_evolution(base, &at)?;
    let norms: Vec<f64> = mats.iter().map(|m| weighted_operator(m, &w).singular_values().max()).collect();
    let times: Vec<f64> = at.iter().map(|&k| base.time_at_step(k) - base.t0()).collect();
    let (kappa, _) = crate::integrator::fit_log_linear(&times, &norms);
    let m = times.iter().zip(&norms).map(|(t, nrm)| nrm * (-kappa * t).exp()).fold(1.0, f64::max);
    Ok(SemigroupBound { m, kappa, times, norms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{h_inner, DelayModel, LinearFunctional};
    use crate::integrator::evolve;
    use std::sync::Arc;

    fn cubic_model(alpha: f64, tau: f64) -> DelayModel {
        let a = LinearFunctional::new(1, 1).with_scalar_mass(0.0, 1.0).unwrap().with_scalar_mass(-tau, -alpha).unwrap();
        let c = LinearFunctional::delta(1, 0.0).unwrap();
        DelayModel::new(
            tau,
            a,
            DMatrix::from_element(1, 1, 1.0),
            c,
            Arc::new(|_, y: &[f64]| vec![-y[0].powi(3)]),
            Arc::new(|_, y: &[f64]| DMatrix::from_element(1, 1, -3.0 * y[0] * y[0])),
            100.0,
        )
        .unwrap()
    }

    fn setup() -> (DelayModel, HState, HState) {
        let g = HistoryGrid::new(1.0, 16).unwrap();
        let v0 = HState::from_scalar_fn(g, |t| 0.6 + 0.3 * (2.0 * t).sin()).unwrap();
        let z0 = HState::from_scalar_fn(g, |t| (3.0 * t).cos() - 0.2 * t).unwrap();
        (cubic_model(0.5, 1.0), v0, z0)
    }

    #[test]
    fn finite_difference_converges_quadratically() {
        let (model, v0, z0) = setup();
        let h = 1.0 / 16.0;
        let base = evolve(&model, &v0, 0.0, 2.0, h).unwrap();
        let lz = evolve_tangent(&base, std::slice::from_ref(&z0), 2.0).unwrap().vectors.remove(0);
        let pt = base.state_at(2.0).unwrap();
        let errs: Vec<f64> = [1e-2, 5e-3]
            .iter()
            .map(|eps| {
                let vp = v0.combine(1.0, *eps, &z0).unwrap();
                let tp = evolve(&model, &vp, 0.0, 2.0, h).unwrap().state_at(2.0).unwrap();
                let d = tp.combine(1.0, -1.0, &pt).unwrap().combine(1.0, -eps, &lz).unwrap();
                h_inner(&d, &d).unwrap().sqrt()
            })
            .collect();
        let order = (errs[0] / errs[1]).log2();
        assert!((order - 2.0).abs() < 0.05, "order {order}");
    }

    #[test]
    fn tangent_is_linear() {
        let (model, v0, z0) = setup();
        let base = evolve(&model, &v0, 0.0, 1.5, 1.0 / 16.0).unwrap();
        let z1 = HState::from_scalar_fn(v0.grid(), |t| t * t).unwrap();
        let fr = evolve_tangent(&base, &[z0.combine(2.0, -3.0, &z1).unwrap(), z0, z1], 1.5).unwrap();
        let lhs = &fr.vectors[0];
        let rhs = fr.vectors[1].combine(2.0, -3.0, &fr.vectors[2]).unwrap();
        let d = lhs.combine(1.0, -1.0, &rhs).unwrap();
        assert!(h_inner(&d, &d).unwrap().sqrt() < 1e-12);
    }

    #[test]
    fn quasi_differential_matches_tangent_evolution() {
        let (model, v0, z0) = setup();
        let base = evolve(&model, &v0, 0.0, 1.0, 1.0 / 16.0).unwrap();
        let qd = quasi_differential(&base, 1.0).unwrap();
        let a = qd.apply(&z0).unwrap();
        let b = evolve_tangent(&base, &[z0], 1.0).unwrap();
        let d = a.combine(1.0, -1.0, &b.vectors[0]).unwrap();
        assert!(d.norm() < 1e-12);
    }

    #[test]
    fn smoothing_after_one_delay() {
        // past one delay the operator is compact: its singular values decay
        let (model, v0, _) = setup();
        let base = evolve(&model, &v0, 0.0, 2.0, 1.0 / 16.0).unwrap();
        let early = quasi_differential(&base, 0.25).unwrap().weighted().singular_values();
        let late = quasi_differential(&base, 2.0).unwrap().weighted().singular_values();
        let tail = |s: &DVector<f64>| {
            let mut v: Vec<f64> = s.iter().copied().collect();
            v.sort_by(|a, b| b.total_cmp(a));
            v[8] / v[0]
        };
        assert!(tail(&late) < 1e-2 * tail(&early), "{} vs {}", tail(&late), tail(&early));
    }

    #[test]
    fn semigroup_bound_for_decay() {
        let g = HistoryGrid::new(1.0, 16).unwrap();
        let m = DelayModel::linear(1.0, LinearFunctional::new(1, 1).with_scalar_mass(0.0, -1.0).unwrap()).unwrap();
        let base = evolve(&m, &HState::zeros(g, 1), 0.0, 4.0, 1.0 / 16.0).unwrap();
        let b = linear_semigroup_bound(&base, 4.0, 8).unwrap();
        for (t, nrm) in b.times.iter().zip(&b.norms) {
            assert!(*nrm <= b.m * (b.kappa * t).exp() * (1.0 + 1e-12));
        }
        assert!(b.kappa < 0.0);
    }
}
