//! Volumes, traces and dimension estimates in the `H` metric.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{DelayModel, HState, HistoryGrid, ResolvedFunctional};
use crate::integrator::{evolve, NodeHistory, Trajectory};
use crate::variational::{coord_weights, quasi_differential, weighted_operator, QuasiDifferential, TangentFlow};

/// Steps between re-orthonormalizations of an evolving frame.
pub const REORTHONORMALIZE_EVERY: usize = 50;

/// Gram matrix `W` of the `H` inner product in grid coordinates. `W` is
/// diagonal, so its symmetric factor is `diag(sqrt(w))`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGram {
    grid: HistoryGrid,
    n: usize,
    diag: DVector<f64>,
    sqrt: DVector<f64>,
}

impl WeightedGram {
    pub fn new(grid: HistoryGrid, n: usize) -> Self {
        let diag = coord_weights(grid, n);
        let sqrt = diag.map(f64::sqrt);
        Self { grid, n, diag, sqrt }
    }

    pub fn grid(&self) -> HistoryGrid {
        self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &DVector<f64> {
        &self.diag
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.diag)
    }

    /// `max |R^T R - W|` for the stored factor.
    pub fn factorization_residual(&self) -> f64 {
        self.sqrt.iter().zip(self.diag.iter()).map(|(s, w)| (s * s - w).abs()).fold(0.0, f64::max)
    }

    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        a.iter().zip(b.iter()).zip(self.diag.iter()).map(|((x, y), w)| x * y * w).sum()
    }

    /// `R V` for coordinate columns `V`.
    pub fn lift(&self, v: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(v.nrows(), v.ncols(), |i, j| self.sqrt[i] * v[(i, j)])
    }

    fn unlift(&self, q: &DMatrix<f64>) -> DMatrix<f64> {
        DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] / self.sqrt[i])
    }

    fn check(&self, v: &HState) -> Result<()> {
        if v.grid() != self.grid || v.n() != self.n {
            return Err(Error::Shape("state does not conform to the Gram metric".into()));
        }
        Ok(())
    }

    fn columns(&self, frame: &[HState]) -> Result<DMatrix<f64>> {
        for v in frame {
            self.check(v)?;
        }
        let cols: Vec<DVector<f64>> = frame.iter().map(HState::coords).collect();
        Ok(DMatrix::from_columns(&cols))
    }
}

/// Upper triangle of the QR factorization of `R V`; `|det|` of it is the volume.
fn frame_r(w: &WeightedGram, v: &DMatrix<f64>) -> DMatrix<f64> {
    w.lift(v).qr().r()
}

/// `sqrt(det Gram)` of a frame in the `H` metric.
pub fn volume_k(frame: &[HState], w: &WeightedGram) -> Result<f64> {
    if frame.is_empty() {
        return Err(Error::Domain("empty frame".into()));
    }
    if frame.len() > w.dim() {
        return Err(Error::Domain(format!("{} vectors exceed the ambient dimension {}", frame.len(), w.dim())));
    }
    let r = frame_r(w, &w.columns(frame)?);
    Ok(r.diagonal().iter().map(|x| x.abs()).product())
}

/// `H`-orthonormal basis of the span of coordinate columns `v`, with the
/// triangular factor `R` such that `v = E R`.
pub fn w_orthonormalize(v: &DMatrix<f64>, w: &WeightedGram) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if v.ncols() == 0 || v.ncols() > v.nrows() {
        return Err(Error::DegenerateFrame(format!("{} vectors in dimension {}", v.ncols(), v.nrows())));
    }
    let qr = w.lift(v).qr();
    let r = qr.r();
    let scale = r.diagonal().iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if r.diagonal().iter().any(|x| !(x.abs() > 1e-12 * scale)) {
        return Err(Error::DegenerateFrame("frame vectors are linearly dependent".into()));
    }
    Ok((w.unlift(&qr.q()), r))
}

/// Finite-difference approximation of `d/dtheta` on the history grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Derivative {
    /// Central differences inside, one-sided first order at both ends. With
    /// trapezoid weights it satisfies `<D phi, phi> = (phi(0)^2 - phi(-tau)^2) / 2`
    /// exactly, so the quadratic form of the generator has no spurious terms.
    SummationByParts,
    /// Fourth-order central differences inside with fourth-order one-sided
    /// closures at both ends.
    Central4,
}

/// Matrix of the discrete generator `A_h + B~ dF C~_h` linearized at `base`
/// in coordinates `[head, seg rows]`.
///
/// The head rows apply the delay functionals with the head standing in for
/// the value at `theta = 0`; the segment rows apply `deriv`, with the head as
/// the last node.
pub fn discrete_generator(model: &DelayModel, base: &HState, t: f64, deriv: Derivative) -> Result<DMatrix<f64>> {
    let grid = base.grid();
    if base.n() != model.n() {
        return Err(Error::Shape("base state does not match the model".into()));
    }
    let n = model.n();
    let m = grid.intervals();
    let dim = n * (m + 2);
    let col = |back: usize| if back == 0 { 0 } else { n + (m - back) * n };
    let a = model.a_tilde().resolve(grid)?;
    let c = model.c_tilde().resolve(grid)?;

    let mut cy = DVector::zeros(c.out);
    c.eval(|back, buf| buf.copy_from_slice(if back == 0 { base.head() } else { base.seg_row(m - back) }), &mut cy);
    let bj = model.b_tilde() * model.df(t, cy.as_slice());

    let mut gen = DMatrix::zeros(dim, dim);
    let mut add_functional = |f: &ResolvedFunctional, pre: Option<&DMatrix<f64>>| {
        for (back, mat) in f.masses.iter().chain(&f.kernel) {
            let blk = match pre {
                Some(p) => p * mat,
                None => mat.clone(),
            };
            let c0 = col(*back);
            for i in 0..n {
                for j in 0..n {
                    gen[(i, c0 + j)] += blk[(i, j)];
                }
            }
        }
    };
    add_functional(&a, None);
    add_functional(&c, Some(&bj));

    let hg = grid.spacing();
    let node_col = |i: usize| if i == m { 0 } else { n + i * n };
    for r in 0..=m {
        let row = n + r * n;
        let stencil: Vec<(usize, f64)> = match deriv {
            Derivative::SummationByParts => match r {
                0 => vec![(0, -1.0 / hg), (1, 1.0 / hg)],
                _ if r == m => vec![(m - 1, -1.0 / hg), (m, 1.0 / hg)],
                _ => vec![(r - 1, -0.5 / hg), (r + 1, 0.5 / hg)],
            },
            Derivative::Central4 => {
                let c = 1.0 / (12.0 * hg);
                let fwd0 = [-25.0, 48.0, -36.0, 16.0, -3.0];
                let fwd1 = [-3.0, -10.0, 18.0, -6.0, 1.0];
                match r {
                    0 => (0..5).map(|i| (i, c * fwd0[i])).collect(),
                    1 => (0..5).map(|i| (i, c * fwd1[i])).collect(),
                    _ if r == m => (0..5).map(|i| (m - i, -c * fwd0[i])).collect(),
                    _ if r == m - 1 => (0..5).map(|i| (m - i, -c * fwd1[i])).collect(),
                    _ => vec![(r - 2, c), (r - 1, -8.0 * c), (r + 1, 8.0 * c), (r + 2, -c)],
                }
            }
        };
        for (node, coef) in stencil {
            for i in 0..n {
                gen[(row + i, node_col(node) + i)] += coef;
            }
        }
    }
    Ok(gen)
}

/// `sum_i <G e_i, e_i>_H` over an `H`-orthonormal basis of a coordinate frame.
fn trace_coords(gen: &DMatrix<f64>, e: &DMatrix<f64>, w: &WeightedGram) -> f64 {
    let ae = gen * e;
    (0..e.ncols()).map(|j| w.inner(&ae.column(j).into_owned(), &e.column(j).into_owned())).sum()
}

/// Trace of the linearized generator at `base_state` restricted to the span of `frame`.
pub fn trace_on_span(model: &DelayModel, base_state: &HState, frame: &[HState], w: &WeightedGram) -> Result<f64> {
    trace_on_span_at(model, base_state, 0.0, frame, w)
}

pub fn trace_on_span_at(
    model: &DelayModel,
    base_state: &HState,
    t: f64,
    frame: &[HState],
    w: &WeightedGram,
) -> Result<f64> {
    w.check(base_state)?;
    let (e, _) = w_orthonormalize(&w.columns(frame)?, w)?;
    let gen = discrete_generator(model, base_state, t, Derivative::Central4)?;
    Ok(trace_coords(&gen, &e, w))
}

/// `k` smooth states compatible with the generator domain at `base`:
/// `cos(j pi theta / tau)` profiles corrected by `c * theta e^{8 theta / tau}`
/// so that the right derivative at `theta = 0` equals the linearized right-hand side.
pub fn compatible_frame(model: &DelayModel, base: &HState, k: usize) -> Result<Vec<HState>> {
    let grid = base.grid();
    let n = model.n();
    let tau = grid.tau();
    let m = grid.intervals();
    let a = model.a_tilde().resolve(grid)?;
    let c = model.c_tilde().resolve(grid)?;
    let mut cy = DVector::zeros(c.out);
    c.eval(|back, buf| buf.copy_from_slice(if back == 0 { base.head() } else { base.seg_row(m - back) }), &mut cy);
    let bj = model.b_tilde() * model.df(0.0, cy.as_slice());
    let rhs = |v: &HState| -> DVector<f64> {
        let val =
            |back: usize, buf: &mut [f64]| buf.copy_from_slice(if back == 0 { v.head() } else { v.seg_row(m - back) });
        let mut ao = DVector::zeros(n);
        a.eval(val, &mut ao);
        let mut co = DVector::zeros(c.out);
        c.eval(val, &mut co);
        ao + &bj * co
    };
    let eta = |th: f64| th * (8.0 * th / tau).exp();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        let e = HState::from_fn(grid, n, |th| {
            let mut v = vec![0.0; n];
            v[i] = eta(th);
            v
        })?;
        g.set_column(i, &rhs(&e));
    }
    let lhs = DMatrix::identity(n, n) - g;
    let lu = lhs.lu();
    (0..k)
        .map(|j| {
            let comp = j % n;
            let freq = (j / n) as f64 * std::f64::consts::PI / tau;
            let psi = HState::from_fn(grid, n, |th| {
                let mut v = vec![0.0; n];
                v[comp] = (freq * th).cos();
                v
            })?;
            let corr = lu
                .solve(&rhs(&psi))
                .ok_or_else(|| Error::DegenerateFrame("compatibility correction is singular".into()))?;
            HState::from_fn(grid, n, |th| {
                let mut v: Vec<f64> = corr.iter().map(|ci| ci * eta(th)).collect();
                v[comp] += (freq * th).cos();
                v
            })
        })
        .collect()
}

/// Log-volume growth of an evolved frame against the integrated trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceCheck {
    pub max_deviation: f64,
    /// Node times at which both sides are compared.
    pub times: Vec<f64>,
    pub log_volume_change: Vec<f64>,
    pub trace_integral: Vec<f64>,
}

/// Trace-formula check from `v0` with the default compatible `k`-frame.
pub fn check_trace_formula(model: &DelayModel, v0: &HState, k: usize, horizon: f64, h: f64) -> Result<TraceCheck> {
    let frame = compatible_frame(model, v0, k)?;
    check_trace_formula_with_frame(model, v0, &frame, horizon, h)
}

/// Evolves `frame` along the orbit of `v0` and returns
/// `max |dlogvol(t) - int_0^t trace| / (1 + |dlogvol(t)|)` over even nodes.
pub fn check_trace_formula_with_frame(
    model: &DelayModel,
    v0: &HState,
    frame: &[HState],
    horizon: f64,
    h: f64,
) -> Result<TraceCheck> {
    if frame.is_empty() {
        return Err(Error::Domain("empty frame".into()));
    }
    let w = WeightedGram::new(v0.grid(), model.n());
    let base = evolve(model, v0, 0.0, horizon, h)?;
    let steps = base.steps();
    let flow = TangentFlow::new(&base);
    let mut hists: Vec<NodeHistory> = frame.iter().map(|z| flow.start(z, steps)).collect::<Result<_>>()?;
    let window = base.steps_per_delay() as isize;

    let mut acc_log = 0.0;
    let mut logvol = Vec::with_capacity(steps + 1);
    let mut traces = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let states: Vec<HState> = hists.iter().zip(frame).map(|(hs, z0)| flow.snapshot(hs, k, z0)).collect();
        let v = w.columns(&states)?;
        let (e, r) = w_orthonormalize(&v, &w).map_err(|_| Error::Underflow { t: base.time_at_step(k) })?;
        let ld: f64 = r.diagonal().iter().map(|x| x.abs().ln()).sum();
        if !ld.is_finite() {
            return Err(Error::Underflow { t: base.time_at_step(k) });
        }
        logvol.push(acc_log + ld);
        let gen = discrete_generator(model, &base.state_at_step(k), base.time_at_step(k), Derivative::Central4)?;
        traces.push(trace_coords(&gen, &e, &w));
        if k == steps {
            break;
        }
        if k > 0 && k % REORTHONORMALIZE_EVERY == 0 {
            let rinv = r.clone().try_inverse().ok_or_else(|| Error::Underflow { t: base.time_at_step(k) })?;
            recombine(&mut hists, k as isize - window, k as isize, &rinv);
            acc_log += ld;
        }
        hists.par_iter_mut().try_for_each(|hs| flow.step(hs, k))?;
    }

    let mut times = Vec::new();
    let mut dlv = Vec::new();
    let mut integ = Vec::new();
    let mut acc = 0.0;
    let mut max_dev: f64 = 0.0;
    for k in (2..=steps).step_by(2) {
        acc += h / 3.0 * (traces[k - 2] + 4.0 * traces[k - 1] + traces[k]);
        let d = logvol[k] - logvol[0];
        max_dev = max_dev.max((d - acc).abs() / (1.0 + d.abs()));
        times.push(base.time_at_step(k));
        dlv.push(d);
        integ.push(acc);
    }
    Ok(TraceCheck { max_deviation: max_dev, times, log_volume_change: dlv, trace_integral: integ })
}

/// Replaces histories `z_j` by `sum_i z_i c_ij` on positions `from..=to`.
fn recombine(hists: &mut [NodeHistory], from: isize, to: isize, c: &DMatrix<f64>) {
    for p in from..=to {
        let old: Vec<Vec<f64>> = hists.iter().map(|hs| hs.node(p).to_vec()).collect();
        for (j, hs) in hists.iter_mut().enumerate() {
            let dst = hs.node_mut(p);
            dst.fill(0.0);
            for (i, oi) in old.iter().enumerate() {
                let cij = c[(i, j)];
                for (d, o) in dst.iter_mut().zip(oi) {
                    *d += cij * o;
                }
            }
        }
    }
}

/// One row of a refinement study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementRow {
    pub m: usize,
    pub h: f64,
    pub deviation: f64,
    /// `log2` of the deviation ratio against the previous (coarser) row.
    pub observed_order: Option<f64>,
}

/// Repeats the trace check at each grid size with `h = tau / m`; `v0_for`
/// supplies the initial state on each grid.
pub fn trace_refinement<F>(
    model: &DelayModel,
    v0_for: F,
    k: usize,
    horizon: f64,
    ms: &[usize],
) -> Result<Vec<RefinementRow>>
where
    F: Fn(HistoryGrid) -> Result<HState>,
{
    let mut rows: Vec<RefinementRow> = Vec::with_capacity(ms.len());
    for &m in ms {
        let grid = HistoryGrid::new(model.tau(), m)?;
        let h = model.tau() / m as f64;
        let dev = check_trace_formula(model, &v0_for(grid)?, k, horizon, h)?.max_deviation;
        let observed_order = rows.last().map(|p| (p.deviation / dev).log2());
        rows.push(RefinementRow { m, h, deviation: dev, observed_order });
    }
    Ok(rows)
}

/// Singular values of a quasi-differential in the `H` metric, non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularSpectrum {
    pub sigmas: Vec<f64>,
    pub t: f64,
}

pub fn singular_spectrum(qd: &QuasiDifferential, w: &WeightedGram) -> Result<SingularSpectrum> {
    if qd.grid != w.grid() || qd.n != w.n() {
        return Err(Error::Shape("quasi-differential does not conform to the Gram metric".into()));
    }
    Ok(SingularSpectrum { sigmas: sorted_singular_values(&weighted_operator(&qd.matrix, w.diag())), t: qd.t })
}

pub(crate) fn sorted_singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().map(|x| x.max(0.0)).collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `sigma_1 ... sigma_k sigma_{k+1}^s` for `d = k + s`, `s` in `(0, 1]`.
pub fn omega_from_sigmas(sigmas: &[f64], d: f64) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::Domain(format!("dimension must be positive, got {d}")));
    }
    if d > sigmas.len() as f64 + 1e-12 {
        return Err(Error::Domain(format!("d = {d} exceeds the dimension {}", sigmas.len())));
    }
    let k = (d.ceil() as usize).max(1) - 1;
    let s = d - k as f64;
    let head: f64 = sigmas[..k].iter().product();
    let last = sigmas[k];
    Ok(if last == 0.0 { 0.0 } else { head * last.powf(s) })
}

pub fn omega_d(qd: &QuasiDifferential, w: &WeightedGram, d: f64) -> Result<f64> {
    omega_from_sigmas(&singular_spectrum(qd, w)?.sigmas, d)
}

/// Result of the squeezing test on an orbit sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SqueezingReport {
    pub d: f64,
    pub t: f64,
    pub omegas: Vec<f64>,
    pub sup_omega: f64,
    pub verdict: bool,
    /// Least `d` on the grid `0.05, 0.10, ...` with `sup omega_d < 1`.
    pub minimal_d: Option<f64>,
    pub spectra: Vec<Vec<f64>>,
}

/// Step of the `d` grid searched by [`squeezing_test`].
pub const SQUEEZING_D_STEP: f64 = 0.05;

pub fn squeezing_test(model: &DelayModel, sample: &[HState], t: f64, d: f64, h: f64) -> Result<SqueezingReport> {
    if sample.is_empty() {
        return Err(Error::Domain("empty orbit sample".into()));
    }
    if !(t >= 2.0 * model.tau() * (1.0 - 1e-12)) {
        return Err(Error::Domain(format!("squeezing time {t} is below two delays ({})", 2.0 * model.tau())));
    }
    let spectra: Vec<Vec<f64>> = sample
        .par_iter()
        .map(|v| {
            let w = WeightedGram::new(v.grid(), v.n());
            let base = evolve(model, v, 0.0, t, h)?;
            let qd = quasi_differential(&base, base.t_end())?;
            Ok(singular_spectrum(&qd, &w)?.sigmas)
        })
        .collect::<Result<_>>()?;
    let omegas: Vec<f64> = spectra.iter().map(|s| omega_from_sigmas(s, d)).collect::<Result<_>>()?;
    let sup_omega = omegas.iter().copied().fold(0.0, f64::max);
    let dim = spectra[0].len();
    let mut minimal_d = None;
    for j in 1..=(dim as f64 / SQUEEZING_D_STEP).floor() as usize {
        let dj = j as f64 * SQUEEZING_D_STEP;
        let sup = spectra
            .iter()
            .map(|s| omega_from_sigmas(s, dj))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if sup < 1.0 {
            minimal_d = Some(dj);
            break;
        }
    }
    Ok(SqueezingReport { d, t, omegas, sup_omega, verdict: sup_omega < 1.0, minimal_d, spectra })
}

/// Quadratic form of the linear generator on domain states.
///
/// States are parameterized by their segment samples with the head tied to
/// the last sample; `gram` is the (diagonal) `H` Gram matrix in these
/// coordinates and `form` the symmetric part of `<A_h v, v>_H`.
#[derive(Debug, Clone)]
pub struct DomainForm {
    pub gram: DVector<f64>,
    pub form: DMatrix<f64>,
}

pub fn domain_form(model: &DelayModel, grid: HistoryGrid) -> Result<DomainForm> {
    let lin = model.linear_part()?;
    let n = lin.n();
    let m = grid.intervals();
    let full = n * (m + 2);
    let red = n * (m + 1);
    let mut p = DMatrix::zeros(full, red);
    for i in 0..n {
        p[(i, m * n + i)] = 1.0;
    }
    for j in 0..red {
        p[(n + j, j)] = 1.0;
    }
    let gen = discrete_generator(&lin, &HState::zeros(grid, n), 0.0, Derivative::SummationByParts)?;
    let w = coord_weights(grid, n);
    let wd = DMatrix::from_diagonal(&w);
    let q = p.transpose() * &wd * gen * &p;
    let form = (&q + q.transpose()) * 0.5;
    let gram = (p.transpose() * wd * &p).diagonal();
    Ok(DomainForm { gram, form })
}

/// Estimated trace numbers with diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaReport {
    pub betas: Vec<f64>,
    /// Best achieved `sup Tr` over `k`-dimensional subspaces, `k = 1..`.
    pub sums: Vec<f64>,
    /// Max minus min of the final value across restarts, per `k`.
    pub spread: Vec<f64>,
    /// Best-so-far value after each restart, per `k`.
    pub best_so_far: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Restart spread beyond which the supremum is flagged as unstable.
pub const BETA_SPREAD_WARNING: f64 = 1e-2;

/// Estimates `beta_1 .. beta_kmax` of the model's linear generator on a grid
/// with `m` intervals by projected-gradient ascent of `Tr` over orthonormal
/// `k`-frames of domain states, `restarts` random starts per `k`.
pub fn beta_numbers(model: &DelayModel, m: usize, k_max: usize, restarts: usize, seed: u64) -> Result<BetaReport> {
    if k_max == 0 || restarts == 0 {
        return Err(Error::Config("k_max and restarts must be positive".into()));
    }
    let grid = HistoryGrid::new(model.tau(), m)?;
    let df = domain_form(model, grid)?;
    let s = df.gram.map(|g| 1.0 / g.sqrt());
    let dim = df.form.nrows();
    let shat = SymSparse::from_dense(&DMatrix::from_fn(dim, dim, |i, j| s[i] * df.form[(i, j)] * s[j]));
    if k_max > dim {
        return Err(Error::Domain(format!("k_max = {k_max} exceeds the dimension {dim}")));
    }

    let mut sums = Vec::with_capacity(k_max);
    let mut spread = Vec::with_capacity(k_max);
    let mut best_so_far = Vec::with_capacity(k_max);
    let mut warnings = Vec::new();
    for k in 1..=k_max {
        let finals: Vec<f64> = (0..restarts)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((k as u64) << 32) ^ r as u64);
                let y0 = DMatrix::from_fn(dim, k, |_, _| rng.gen_range(-1.0..1.0));
                trace_ascent(&shat, y0)
            })
            .collect();
        let mut best = f64::NEG_INFINITY;
        let trail: Vec<f64> = finals
            .iter()
            .map(|v| {
                best = best.max(*v);
                best
            })
            .collect();
        let lo = finals.iter().copied().fold(f64::INFINITY, f64::min);
        let sp = best - lo;
        if sp > BETA_SPREAD_WARNING {
            warnings.push(format!("unstable supremum for k = {k}: restart spread {sp:.3e}"));
        }
        sums.push(best);
        spread.push(sp);
        best_so_far.push(trail);
    }
    let betas = (0..k_max).map(|i| if i == 0 { sums[0] } else { sums[i] - sums[i - 1] }).collect();
    Ok(BetaReport { betas, sums, spread, best_so_far, warnings })
}

fn orthonormal(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Nonzero entries of a square matrix.
struct SymSparse {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
    norm: f64,
}

impl SymSparse {
    fn from_dense(a: &DMatrix<f64>) -> Self {
        let mut entries = Vec::new();
        for j in 0..a.ncols() {
            for i in 0..a.nrows() {
                if a[(i, j)] != 0.0 {
                    entries.push((i, j, a[(i, j)]));
                }
            }
        }
        Self { dim: a.nrows(), entries, norm: a.norm() }
    }

    fn mul(&self, y: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.dim, y.ncols());
        for &(i, j, v) in &self.entries {
            for c in 0..y.ncols() {
                out[(i, c)] += v * y[(j, c)];
            }
        }
        out
    }
}

/// Maximizes `Tr(Y^T S Y)` over `Y^T Y = I` from `y0` by gradient steps on the
/// Stiefel manifold with Armijo backtracking; returns the best value.
fn trace_ascent(s: &SymSparse, y0: DMatrix<f64>) -> f64 {
    let f = |y: &DMatrix<f64>| y.component_mul(&s.mul(y)).sum();
    let mut y = orthonormal(y0);
    let mut val = f(&y);
    let mut eta = 1.0 / s.norm.max(1e-300);
    let mut stalled = 0;
    for _ in 0..50_000 {
        let sy = s.mul(&y);
        let grad = (&sy - &y * (y.transpose() * &sy)) * 2.0;
        let g2 = grad.norm_squared();
        if g2 <= 1e-24 * (1.0 + val * val) {
            break;
        }
        let mut accepted = false;
        for _ in 0..60 {
            let cand = orthonormal(&y + &grad * eta);
            let fc = f(&cand);
            if fc >= val + 1e-4 * eta * g2 {
                stalled = if fc - val <= 1e-15 * (1.0 + val.abs()) { stalled + 1 } else { 0 };
                y = cand;
                val = fc;
                eta *= 1.5;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted || stalled >= 20 {
            break;
        }
    }
    val
}

/// `sup` of `vol_k(L e_1 .. e_k)` over `H`-orthonormal `k`-frames, estimated
/// from random frames each refined by orthogonal iteration on `L^* L`.
pub fn random_frame_volume_sup<R: Rng>(
    qd: &QuasiDifferential,
    w: &WeightedGram,
    k: usize,
    frames: usize,
    refine: usize,
    rng: &mut R,
) -> Result<f64> {
    let dim = w.dim();
    if k == 0 || k > dim {
        return Err(Error::Domain(format!("k = {k} outside 1..={dim}")));
    }
    let mut best: f64 = 0.0;
    for _ in 0..frames {
        let v = DMatrix::from_fn(dim, k, |_, _| rng.gen_range(-1.0..1.0));
        let (mut e, _) = w_orthonormalize(&v, w)?;
        for _ in 0..refine {
            let le = &qd.matrix * &e;
            // H-adjoint of L is W^{-1} L^T W
            let wl = DMatrix::from_fn(le.nrows(), le.ncols(), |i, j| w.diag()[i] * le[(i, j)]);
            let back = qd.matrix.transpose() * wl;
            let next = DMatrix::from_fn(back.nrows(), back.ncols(), |i, j| back[(i, j)] / w.diag()[i]);
            match w_orthonormalize(&next, w) {
                Ok((en, _)) => e = en,
                Err(_) => break,
            }
        }
        let le = &qd.matrix * &e;
        let gram = DMatrix::from_fn(k, k, |i, j| w.inner(&le.column(i).into_owned(), &le.column(j).into_owned()));
        best = best.max(gram.determinant().max(0.0).sqrt());
    }
    Ok(best)
}

/// Base trajectory of a quasi-differential at time `t` from `v0`.
pub fn quasi_differential_from(
    model: &DelayModel,
    v0: &HState,
    t: f64,
    h: f64,
) -> Result<(Trajectory, QuasiDifferential)> {
    let base = evolve(model, v0, 0.0, t, h)?;
    let qd = quasi_differential(&base, base.t_end())?;
    Ok((base, qd))
}
