//! States of the delay equation in `H = R^n x L2(-tau, 0; R^n)`.
//!
//! A history segment is stored by its samples on a uniform grid of `[-tau, 0]`;
//! the `L2` part of the inner product is evaluated with composite trapezoid
//! weights. Linear functionals (the operators acting on history segments) are
//! sums of point masses at grid lags plus an optional sampled kernel.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether a lag sits on a grid node.
pub(crate) const LAG_TOL: f64 = 1e-12;

/// Uniform grid `theta_i = -tau + i * tau / m`, `i = 0..=m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryGrid {
    tau: f64,
    m: usize,
}

impl HistoryGrid {
    pub const MIN_INTERVALS: usize = 8;
    pub const DEFAULT_INTERVALS: usize = 64;

    pub fn new(tau: f64, m: usize) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Config(format!("delay horizon must be positive, got {tau}")));
        }
        if m < Self::MIN_INTERVALS {
            return Err(Error::Config(format!(
                "history grid needs at least {} intervals, got {m}",
                Self::MIN_INTERVALS
            )));
        }
        Ok(Self { tau, m })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn intervals(&self) -> usize {
        self.m
    }

    pub fn spacing(&self) -> f64 {
        self.tau / self.m as f64
    }

    /// Node `theta_i`; the last node is exactly zero and the first exactly `-tau`.
    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i <= self.m);
        if i == self.m {
            0.0
        } else if i == 0 {
            -self.tau
        } else {
            -self.tau + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.m).map(|i| self.node(i)).collect()
    }

    /// Composite trapezoid weights on the nodes.
    pub fn weights(&self) -> Vec<f64> {
        let h = self.spacing();
        let mut w = vec![h; self.m + 1];
        w[0] = 0.5 * h;
        w[self.m] = 0.5 * h;
        w
    }

    /// Index of the node at `theta`, if `theta` is a node.
    pub fn node_index(&self, theta: f64) -> Option<usize> {
        if !(theta <= 0.0 && theta >= -self.tau * (1.0 + LAG_TOL)) {
            return None;
        }
        let x = (theta + self.tau) / self.spacing();
        let i = x.round();
        if (x - i).abs() <= LAG_TOL * (self.m as f64).max(1.0) {
            Some(i as usize)
        } else {
            None
        }
    }
}

/// A point `(x, phi)` of `H` with `phi` sampled on a [`HistoryGrid`].
///
/// A state is *embedded* when `phi(0) == x` bitwise, i.e. it is the image of a
/// continuous history under `phi -> (phi(0), phi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HState {
    grid: HistoryGrid,
    n: usize,
    head: Vec<f64>,
    /// Row-major `(m + 1) x n`.
    seg: Vec<f64>,
    embedded: bool,
}

impl HState {
    pub fn new(grid: HistoryGrid, head: Vec<f64>, seg: Vec<f64>) -> Result<Self> {
        let n = head.len();
        if n == 0 {
            return Err(Error::Shape("state dimension must be positive".into()));
        }
        if seg.len() != (grid.intervals() + 1) * n {
            return Err(Error::Shape(format!(
                "segment has {} entries, expected {}",
                seg.len(),
                (grid.intervals() + 1) * n
            )));
        }
        if head.iter().chain(seg.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("state entries must be finite".into()));
        }
        let embedded = seg[grid.intervals() * n..] == head[..];
        Ok(Self { grid, n, head, seg, embedded })
    }

    /// Samples a continuous history `f` on the grid; the result is embedded.
    pub fn from_fn<F>(grid: HistoryGrid, n: usize, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64>,
    {
        let mut seg = Vec::with_capacity((grid.intervals() + 1) * n);
        for i in 0..=grid.intervals() {
            let v = f(grid.node(i));
            if v.len() != n {
                return Err(Error::Shape(format!("history returned {} values, expected {n}", v.len())));
            }
            seg.extend_from_slice(&v);
        }
        let head = seg[grid.intervals() * n..].to_vec();
        Self::new(grid, head, seg)
    }

    /// Scalar convenience wrapper around [`HState::from_fn`].
    pub fn from_scalar_fn<F>(grid: HistoryGrid, f: F) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        Self::from_fn(grid, 1, |t| vec![f(t)])
    }

    pub fn constant(grid: HistoryGrid, value: &[f64]) -> Result<Self> {
        Self::from_fn(grid, value.len(), |_| value.to_vec())
    }

    pub fn zeros(grid: HistoryGrid, n: usize) -> Self {
        Self { grid, n, head: vec![0.0; n], seg: vec![0.0; (grid.intervals() + 1) * n], embedded: true }
    }

    /// Builds a state from the flat coordinate vector `[head, seg_0, .., seg_m]`.
    pub fn from_coords(grid: HistoryGrid, n: usize, coords: &[f64]) -> Result<Self> {
        if coords.len() != coord_dim(grid, n) {
            return Err(Error::Shape(format!(
                "coordinate vector has length {}, expected {}",
                coords.len(),
                coord_dim(grid, n)
            )));
        }
        Self::new(grid, coords[..n].to_vec(), coords[n..].to_vec())
    }

    pub fn coords(&self) -> DVector<f64> {
        let mut v = DVector::zeros(self.dim());
        v.as_mut_slice()[..self.n].copy_from_slice(&self.head);
        v.as_mut_slice()[self.n..].copy_from_slice(&self.seg);
        v
    }

    pub fn grid(&self) -> HistoryGrid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid coordinates, `n * (m + 2)`.
    pub fn dim(&self) -> usize {
        coord_dim(self.grid, self.n)
    }

    pub fn head(&self) -> &[f64] {
        &self.head
    }

    pub fn seg(&self) -> &[f64] {
        &self.seg
    }

    pub fn seg_row(&self, i: usize) -> &[f64] {
        &self.seg[i * self.n..(i + 1) * self.n]
    }

    pub fn is_embedded(&self) -> bool {
        self.embedded
    }

    fn check_conforms(&self, other: &HState) -> Result<()> {
        if self.n != other.n || self.grid != other.grid {
            return Err(Error::Shape(format!(
                "states differ in shape (n = {} vs {}, m = {} vs {}, tau = {} vs {})",
                self.n,
                other.n,
                self.grid.intervals(),
                other.grid.intervals(),
                self.grid.tau(),
                other.grid.tau()
            )));
        }
        Ok(())
    }

    /// `a * self + b * other`.
    pub fn combine(&self, a: f64, b: f64, other: &HState) -> Result<HState> {
        self.check_conforms(other)?;
        let head = self.head.iter().zip(&other.head).map(|(x, y)| a * x + b * y).collect();
        let seg = self.seg.iter().zip(&other.seg).map(|(x, y)| a * x + b * y).collect();
        HState::new(self.grid, head, seg)
    }

    pub fn scaled(&self, a: f64) -> HState {
        let head: Vec<f64> = self.head.iter().map(|x| a * x).collect();
        let seg: Vec<f64> = self.seg.iter().map(|x| a * x).collect();
        let embedded = seg[self.grid.intervals() * self.n..] == head[..];
        HState { grid: self.grid, n: self.n, head, seg, embedded }
    }

    pub fn norm(&self) -> f64 {
        h_inner(self, self).map(f64::sqrt).unwrap_or(f64::NAN)
    }
}

pub(crate) fn coord_dim(grid: HistoryGrid, n: usize) -> usize {
    n * (grid.intervals() + 2)
}

/// Inner product of `H`: `<x, y> + int <phi, psi> d theta` (trapezoid rule).
pub fn h_inner(a: &HState, b: &HState) -> Result<f64> {
    a.check_conforms(b)?;
    let head: f64 = a.head.iter().zip(&b.head).map(|(x, y)| x * y).sum();
    let w = a.grid.weights();
    let n = a.n;
    let seg: f64 = w
        .iter()
        .enumerate()
        .map(|(i, wi)| {
            let ra = &a.seg[i * n..(i + 1) * n];
            let rb = &b.seg[i * n..(i + 1) * n];
            wi * ra.iter().zip(rb).map(|(x, y)| x * y).sum::<f64>()
        })
        .sum();
    Ok(head + seg)
}

/// Sup-norm of the continuous history of an embedded state.
pub fn e_norm(a: &HState) -> Result<f64> {
    if !a.embedded {
        return Err(Error::Domain("sup-norm requires a state embedded from C([-tau,0])".into()));
    }
    Ok((0..=a.grid.intervals()).map(|i| a.seg_row(i).iter().map(|v| v * v).sum::<f64>().sqrt()).fold(0.0, f64::max))
}

/// A point mass `M * phi(lag)` of a [`LinearFunctional`].
#[derive(Debug, Clone, PartialEq)]
pub struct PointMass {
    pub lag: f64,
    pub matrix: DMatrix<f64>,
}

/// Bounded linear map `C([-tau,0]; R^n) -> R^out`: point masses at grid lags
/// plus an optional kernel `K(theta)` integrated against the history.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFunctional {
    n: usize,
    out: usize,
    point_masses: Vec<PointMass>,
    /// `(m + 1)` samples of an `out x n` kernel, tied to `kernel_intervals`.
    kernel: Option<Vec<DMatrix<f64>>>,
}

impl LinearFunctional {
    pub fn new(n: usize, out: usize) -> Self {
        Self { n, out, point_masses: Vec::new(), kernel: None }
    }

    /// `phi -> phi(lag)` in `R^n`.
    pub fn delta(n: usize, lag: f64) -> Result<Self> {
        Self::new(n, n).with_point_mass(lag, DMatrix::identity(n, n))
    }

    pub fn with_point_mass(mut self, lag: f64, matrix: DMatrix<f64>) -> Result<Self> {
        if !(lag.is_finite() && lag <= 0.0) {
            return Err(Error::Config(format!("lag must lie in [-tau, 0], got {lag}")));
        }
        if matrix.shape() != (self.out, self.n) {
            return Err(Error::Shape(format!(
                "point-mass matrix is {:?}, expected ({}, {})",
                matrix.shape(),
                self.out,
                self.n
            )));
        }
        self.point_masses.push(PointMass { lag, matrix });
        Ok(self)
    }

    /// Scalar shorthand for `c * phi(lag)` when `n = out = 1`.
    pub fn with_scalar_mass(self, lag: f64, c: f64) -> Result<Self> {
        self.with_point_mass(lag, DMatrix::from_element(1, 1, c))
    }

    pub fn with_kernel(mut self, samples: Vec<DMatrix<f64>>) -> Result<Self> {
        if samples.len() < HistoryGrid::MIN_INTERVALS + 1 {
            return Err(Error::Shape("kernel needs at least 9 samples".into()));
        }
        if samples.iter().any(|k| k.shape() != (self.out, self.n)) {
            return Err(Error::Shape("kernel samples must be out x n".into()));
        }
        self.kernel = Some(samples);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn out(&self) -> usize {
        self.out
    }

    pub fn point_masses(&self) -> &[PointMass] {
        &self.point_masses
    }

    pub fn kernel(&self) -> Option<&[DMatrix<f64>]> {
        self.kernel.as_deref()
    }

    /// Intervals of the grid the kernel was sampled on.
    pub fn kernel_intervals(&self) -> Option<usize> {
        self.kernel.as_ref().map(|k| k.len() - 1)
    }

    /// Largest lag magnitude (0 for a kernel-free functional without masses).
    pub fn max_lag(&self) -> f64 {
        self.point_masses.iter().map(|p| -p.lag).fold(0.0, f64::max)
    }

    /// Operator norm bound on `C([-tau,0])`: `sum |M_k| + int |K|`.
    pub fn sup_norm_bound(&self, tau: f64) -> f64 {
        let masses: f64 = self.point_masses.iter().map(|p| p.matrix.norm()).sum();
        let kernel = self.kernel.as_ref().map_or(0.0, |k| {
            let m = k.len() - 1;
            let grid = HistoryGrid { tau, m };
            grid.weights().iter().zip(k).map(|(w, km)| w * km.norm()).sum()
        });
        masses + kernel
    }

    /// Resolves every lag to a grid node index of `grid`.
    pub(crate) fn resolve(&self, grid: HistoryGrid) -> Result<ResolvedFunctional> {
        let mut masses = Vec::with_capacity(self.point_masses.len());
        for pm in &self.point_masses {
            let idx = grid.node_index(pm.lag).ok_or_else(|| {
                Error::Config(format!(
                    "lag {} is not a node of the history grid (tau = {}, m = {}); refusing to interpolate",
                    pm.lag,
                    grid.tau(),
                    grid.intervals()
                ))
            })?;
            masses.push((grid.intervals() - idx, pm.matrix.clone()));
        }
        let kernel = match &self.kernel {
            None => Vec::new(),
            Some(samples) => {
                let km = samples.len() - 1;
                if !grid.intervals().is_multiple_of(km) {
                    return Err(Error::Config(format!(
                        "kernel sampled on {km} intervals is incompatible with a grid of {}",
                        grid.intervals()
                    )));
                }
                let stride = grid.intervals() / km;
                let kgrid = HistoryGrid { tau: grid.tau(), m: km };
                kgrid
                    .weights()
                    .into_iter()
                    .zip(samples)
                    .enumerate()
                    .map(|(i, (w, k))| ((km - i) * stride, k * w))
                    .collect()
            }
        };
        Ok(ResolvedFunctional { n: self.n, out: self.out, masses, kernel })
    }

    /// Evaluates the functional on the history segment of `a`.
    pub fn apply(&self, a: &HState) -> Result<DVector<f64>> {
        if a.n() != self.n {
            return Err(Error::Shape(format!("functional expects n = {}, state has {}", self.n, a.n())));
        }
        let grid = a.grid();
        let resolved = self.resolve(grid)?;
        let m = grid.intervals();
        let mut out = DVector::zeros(self.out);
        resolved.eval(|back, buf| buf.copy_from_slice(a.seg_row(m - back)), &mut out);
        Ok(out)
    }
}

/// Functional with lags expressed as node counts back from `theta = 0`.
#[derive(Debug, Clone)]
pub(crate) struct ResolvedFunctional {
    pub n: usize,
    pub out: usize,
    /// `(nodes back, matrix)`.
    pub masses: Vec<(usize, DMatrix<f64>)>,
    /// `(nodes back, weight * kernel)`.
    pub kernel: Vec<(usize, DMatrix<f64>)>,
}

impl ResolvedFunctional {
    /// Re-expresses node counts in units of a finer step (`stride` steps per node).
    pub fn rescaled(&self, stride: usize) -> Self {
        Self {
            n: self.n,
            out: self.out,
            masses: self.masses.iter().map(|(b, m)| (b * stride, m.clone())).collect(),
            kernel: self.kernel.iter().map(|(b, m)| (b * stride, m.clone())).collect(),
        }
    }

    /// `value(back, buf)` writes the history value `back` nodes before the
    /// current time into `buf`.
    pub fn eval<V>(&self, mut value: V, out: &mut DVector<f64>)
    where
        V: FnMut(usize, &mut [f64]),
    {
        out.fill(0.0);
        let mut buf = vec![0.0; self.n];
        for (back, mat) in self.masses.iter().chain(&self.kernel) {
            value(*back, &mut buf);
            for r in 0..self.out {
                let mut acc = 0.0;
                for c in 0..self.n {
                    acc += mat[(r, c)] * buf[c];
                }
                out[r] += acc;
            }
        }
    }
}

/// `apply_functional` in free-function form.
pub fn apply_functional(l: &LinearFunctional, a: &HState) -> Result<DVector<f64>> {
    l.apply(a)
}

pub type Nonlinearity = Arc<dyn Fn(f64, &[f64]) -> Vec<f64> + Send + Sync>;
pub type NonlinearityJacobian = Arc<dyn Fn(f64, &[f64]) -> DMatrix<f64> + Send + Sync>;

/// `x'(t) = A~ x_t + B~ F(t, C~ x_t)` with Lipschitz bound `Lambda` on `F`.
#[derive(Clone)]
pub struct DelayModel {
    n: usize,
    m_in: usize,
    r: usize,
    tau: f64,
    a_tilde: LinearFunctional,
    b_tilde: DMatrix<f64>,
    c_tilde: LinearFunctional,
    f: Nonlinearity,
    df: NonlinearityJacobian,
    lambda: f64,
    autonomous: bool,
}

impl std::fmt::Debug for DelayModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DelayModel")
            .field("n", &self.n)
            .field("m_in", &self.m_in)
            .field("r", &self.r)
            .field("tau", &self.tau)
            .field("lambda", &self.lambda)
            .finish_non_exhaustive()
    }
}

impl DelayModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        tau: f64,
        a_tilde: LinearFunctional,
        b_tilde: DMatrix<f64>,
        c_tilde: LinearFunctional,
        f: Nonlinearity,
        df: NonlinearityJacobian,
        lambda: f64,
    ) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::Config(format!("delay must be positive, got {tau}")));
        }
        let n = a_tilde.n();
        if a_tilde.out() != n {
            return Err(Error::Shape("A~ must map into R^n".into()));
        }
        if c_tilde.n() != n {
            return Err(Error::Shape("C~ must act on R^n-valued histories".into()));
        }
        if b_tilde.nrows() != n {
            return Err(Error::Shape("B~ must have n rows".into()));
        }
        for pm in a_tilde.point_masses().iter().chain(c_tilde.point_masses()) {
            if pm.lag < -tau * (1.0 + LAG_TOL) {
                return Err(Error::Config(format!("lag {} exceeds the delay horizon {tau}", pm.lag)));
            }
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::Config("Lipschitz bound must be finite and nonnegative".into()));
        }
        Ok(Self {
            n,
            m_in: b_tilde.ncols(),
            r: c_tilde.out(),
            tau,
            a_tilde,
            b_tilde,
            c_tilde,
            f,
            df,
            lambda,
            autonomous: true,
        })
    }

    /// Linear model `x' = A~ x_t` (`F = 0`).
    pub fn linear(tau: f64, a_tilde: LinearFunctional) -> Result<Self> {
        let n = a_tilde.n();
        Self::new(
            tau,
            a_tilde,
            DMatrix::zeros(n, 1),
            LinearFunctional::new(n, 1),
            Arc::new(|_, _| vec![0.0]),
            Arc::new(|_, y| DMatrix::zeros(1, y.len())),
            0.0,
        )
    }

    /// Marks `F` as depending on time.
    pub fn non_autonomous(mut self) -> Self {
        self.autonomous = false;
        self
    }

    pub fn is_autonomous(&self) -> bool {
        self.autonomous
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn input_dim(&self) -> usize {
        self.m_in
    }

    pub fn output_dim(&self) -> usize {
        self.r
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn a_tilde(&self) -> &LinearFunctional {
        &self.a_tilde
    }

    pub fn b_tilde(&self) -> &DMatrix<f64> {
        &self.b_tilde
    }

    pub fn c_tilde(&self) -> &LinearFunctional {
        &self.c_tilde
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn f(&self, t: f64, y: &[f64]) -> Vec<f64> {
        (self.f)(t, y)
    }

    pub fn df(&self, t: f64, y: &[f64]) -> DMatrix<f64> {
        (self.df)(t, y)
    }

    /// The linear part alone (`F` dropped).
    pub fn linear_part(&self) -> Result<Self> {
        Self::linear(self.tau, self.a_tilde.clone())
    }

    /// Largest relative mismatch between `dF` and central differences of `F`
    /// at `samples` random points of `[-radius, radius]^r`.
    pub fn check_jacobian<R: Rng>(&self, rng: &mut R, samples: usize, radius: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let t = rng.gen_range(-1.0..1.0);
            let y: Vec<f64> = (0..self.r).map(|_| rng.gen_range(-radius..radius)).collect();
            let jac = self.df(t, &y);
            let scale = jac.norm().max(1.0);
            for c in 0..self.r {
                let eps = 1e-6 * y[c].abs().max(1.0);
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[c] += eps;
                ym[c] -= eps;
                let fp = self.f(t, &yp);
                let fm = self.f(t, &ym);
                for row in 0..self.m_in {
                    let fd = (fp[row] - fm[row]) / (2.0 * eps);
                    worst = worst.max((fd - jac[(row, c)]).abs() / scale);
                }
            }
        }
        worst
    }

    /// Largest observed `|F(y1) - F(y2)| / |y1 - y2|` over random pairs.
    pub fn observed_lipschitz<R: Rng>(&self, rng: &mut R, pairs: usize, radius: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let t = rng.gen_range(-1.0..1.0);
            let y1: Vec<f64> = (0..self.r).map(|_| rng.gen_range(-radius..radius)).collect();
            let y2: Vec<f64> = (0..self.r).map(|_| rng.gen_range(-radius..radius)).collect();
            let dy = y1.iter().zip(&y2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if dy == 0.0 {
                continue;
            }
            let f1 = self.f(t, &y1);
            let f2 = self.f(t, &y2);
            let df = f1.iter().zip(&f2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            worst = worst.max(df / dy);
        }
        worst
    }
}

/// Both sides of the (MES) inequality along a sampled trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MesReport {
    /// `int_0^T |C v(t)|^p dt`.
    pub lhs: f64,
    /// `|v(0)|^p + int_0^T |v(t)|^p dt`.
    pub rhs: f64,
    /// `lhs / rhs` (0 when both vanish).
    pub ratio: f64,
}

/// Evaluates the (MES) / (MES*) quantities for states sampled every `h`.
pub fn check_mes(trajectory: &[HState], h: f64, p: u32, c: &LinearFunctional) -> Result<MesReport> {
    let first = trajectory.first().ok_or_else(|| Error::Domain("empty trajectory".into()))?;
    if !(p == 1 || p == 2) {
        return Err(Error::Domain(format!("only p = 1 and p = 2 are supported, got {p}")));
    }
    if !(h.is_finite() && h > 0.0) {
        return Err(Error::Domain("sampling step must be positive".into()));
    }
    let pf = p as f64;
    let mut c_vals = Vec::with_capacity(trajectory.len());
    let mut norms = Vec::with_capacity(trajectory.len());
    for s in trajectory {
        first.check_conforms(s)?;
        c_vals.push(c.apply(s)?.norm().powf(pf));
        norms.push(s.norm().powf(pf));
    }
    let trap = |v: &[f64]| -> f64 {
        if v.len() < 2 {
            return 0.0;
        }
        h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]))
    };
    let lhs = trap(&c_vals);
    let rhs = norms[0] + trap(&norms);
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(MesReport { lhs, rhs, ratio })
}

/// The explicit (MES) constant `1 + sqrt(tau)` for `C~ phi = phi(-tau)`.
pub fn mes_constant_delta(tau: f64) -> f64 {
    1.0 + tau.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(tau: f64, m: usize) -> HistoryGrid {
        HistoryGrid::new(tau, m).unwrap()
    }

    #[test]
    fn grid_nodes_are_exact_at_ends() {
        let g = grid(std::f64::consts::FRAC_PI_2, 64);
        assert_eq!(g.node(0), -std::f64::consts::FRAC_PI_2);
        assert_eq!(g.node(64), 0.0);
        assert!(g.nodes().windows(2).all(|w| w[1] > w[0]));
        assert!((g.spacing() * 64.0 - g.tau()).abs() <= 4.0 * f64::EPSILON);
        assert!(HistoryGrid::new(1.0, 4).is_err());
        assert!(HistoryGrid::new(-1.0, 64).is_err());
    }

    #[test]
    fn inner_product_examples() {
        let g = grid(1.0, 64);
        let a = HState::new(g, vec![1.0], vec![0.0; 65]).unwrap();
        assert_eq!(h_inner(&a, &a).unwrap(), 1.0);

        let g2 = grid(2.0, 64);
        let b = HState::new(g2, vec![0.0], vec![1.0; 65]).unwrap();
        assert!((h_inner(&b, &b).unwrap() - 2.0).abs() < 1e-14);

        let lin = HState::new(g, vec![0.0], g.nodes()).unwrap();
        let one = HState::new(g, vec![0.0], vec![1.0; 65]).unwrap();
        assert!((h_inner(&lin, &one).unwrap() + 0.5).abs() < 1e-6);
    }

    #[test]
    fn inner_product_rejects_mismatched_shapes() {
        let a = HState::zeros(grid(1.0, 64), 1);
        let b = HState::zeros(grid(1.0, 32), 1);
        assert!(matches!(h_inner(&a, &b), Err(Error::Shape(_))));
    }

    #[test]
    fn e_norm_examples() {
        let g = grid(1.0, 64);
        assert_eq!(e_norm(&HState::zeros(g, 1)).unwrap(), 0.0);
        let abs = HState::from_scalar_fn(g, f64::abs).unwrap();
        assert_eq!(e_norm(&abs).unwrap(), 1.0);

        let g8 = grid(1.0, 8);
        let mut seg = vec![0.0; 9];
        seg[2] = 1.0;
        seg[4] = -3.0;
        seg[6] = 2.0;
        let s = HState::new(g8, vec![0.0], seg).unwrap();
        assert_eq!(e_norm(&s).unwrap(), 3.0);

        let jump = HState::new(g8, vec![1.0], vec![0.0; 9]).unwrap();
        assert!(matches!(e_norm(&jump), Err(Error::Domain(_))));
    }

    #[test]
    fn functional_examples() {
        let g = grid(3.0, 64);
        let s = HState::from_scalar_fn(g, |t| 5.0 + t).unwrap();
        let d0 = LinearFunctional::delta(1, 0.0).unwrap();
        assert_eq!(d0.apply(&s).unwrap()[0], 5.0);

        let dm = LinearFunctional::new(1, 1).with_scalar_mass(-3.0, -1.0).unwrap();
        assert_eq!(dm.apply(&s).unwrap()[0], -2.0);

        let c = 0.7;
        let k = LinearFunctional::new(1, 1).with_kernel(vec![DMatrix::from_element(1, 1, 1.0); 65]).unwrap();
        let cs = HState::constant(g, &[c]).unwrap();
        assert!((k.apply(&cs).unwrap()[0] - 3.0 * c).abs() < 1e-13);
    }

    #[test]
    fn off_grid_lag_is_refused() {
        let g = grid(1.0, 64);
        let s = HState::zeros(g, 1);
        let l = LinearFunctional::new(1, 1).with_scalar_mass(-0.3337, 1.0).unwrap();
        assert!(matches!(l.apply(&s), Err(Error::Config(_))));
    }

    #[test]
    fn mes_constant_example() {
        // x == 1, tau = 1, T = 2, C = delta(-tau)
        let g = grid(1.0, 64);
        let h = g.spacing();
        let traj: Vec<HState> = (0..=128).map(|_| HState::constant(g, &[1.0]).unwrap()).collect();
        let c = LinearFunctional::delta(1, -1.0).unwrap();
        let rep = check_mes(&traj, h, 1, &c).unwrap();
        assert!((rep.lhs - 2.0).abs() < 1e-12);
        assert!(rep.lhs <= mes_constant_delta(1.0) * rep.rhs);

        let zero: Vec<HState> = (0..10).map(|_| HState::zeros(g, 1)).collect();
        let rep = check_mes(&zero, h, 1, &c).unwrap();
        assert_eq!((rep.lhs, rep.rhs, rep.ratio), (0.0, 0.0, 0.0));
        assert!(matches!(check_mes(&[], h, 1, &c), Err(Error::Domain(_))));
    }
}
