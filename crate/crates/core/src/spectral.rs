//! Characteristic roots, transfer function and the frequency-domain test for
//! `Delta(p) = 1 - alpha e^{-tau p} - p`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};

/// Scalar characteristic function of a linear delay equation.
pub trait CharFunction: Sync {
    fn eval(&self, p: Complex64) -> Complex64;
    fn deriv(&self, p: Complex64) -> Complex64;
    /// Radius containing every root with `Re p >= -nu`.
    fn root_modulus_bound(&self, nu: f64) -> f64;
    /// The longest delay, which sets the oscillation scale along vertical lines.
    fn delay(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SuarezChar {
    pub alpha: f64,
    pub tau: f64,
}

impl SuarezChar {
    pub fn new(alpha: f64, tau: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha >= 0.0 && tau.is_finite() && tau > 0.0) {
            return Err(Error::Domain(format!("need alpha >= 0 and tau > 0, got alpha = {alpha}, tau = {tau}")));
        }
        Ok(Self { alpha, tau })
    }

    fn real(&self, p: f64) -> f64 {
        1.0 - self.alpha * (-self.tau * p).exp() - p
    }

    /// `W(p) = 1 / Delta(p)`.
    pub fn transfer(&self, p: Complex64) -> Complex64 {
        self.eval(p).inv()
    }
}

impl CharFunction for SuarezChar {
    fn eval(&self, p: Complex64) -> Complex64 {
        Complex64::new(1.0, 0.0) - self.alpha * (-self.tau * p).exp() - p
    }

    fn deriv(&self, p: Complex64) -> Complex64 {
        self.alpha * self.tau * (-self.tau * p).exp() - 1.0
    }

    // p = 1 - alpha e^{-tau p} gives |p| <= 1 + alpha e^{-tau Re p} <= 1 + alpha e^{tau nu}
    fn root_modulus_bound(&self, nu: f64) -> f64 {
        1.0 + self.alpha * (self.tau * nu).exp()
    }

    fn delay(&self) -> f64 {
        self.tau
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let flo = f(lo);
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if f(lo).abs() <= f(hi).abs() {
        lo
    } else {
        hi
    }
}

/// The positive and the negative real root, `lambda1 > 0 > lambda2`.
///
/// `Delta` is concave on the real line with `Delta(0) = 1 - alpha > 0`, so it
/// has exactly one root on each side of zero.
pub fn real_roots(cf: &SuarezChar) -> Result<(f64, f64)> {
    if !(cf.alpha > 0.0 && cf.alpha < 1.0) {
        return Err(Error::Domain(format!("real root pair needs alpha in (0, 1), got {}", cf.alpha)));
    }
    let f = |p: f64| cf.real(p);
    if !(f(1.0) < 0.0) {
        return Err(Error::Internal("no sign change of Delta on (0, 1]".into()));
    }
    let l1 = bisect(f, 0.0, 1.0);
    let mut lo = -1.0;
    while f(lo) >= 0.0 {
        lo *= 2.0;
        if lo < -1e12 {
            return Err(Error::Internal("negative real root not bracketed".into()));
        }
    }
    let l2 = bisect(f, lo, 0.0);
    for r in [l1, l2] {
        let scale = 1.0 + r.abs();
        if f(r).abs() > 1e-12 * scale {
            return Err(Error::Internal(format!("real root residual {} at {r}", f(r).abs())));
        }
    }
    Ok((l1, l2))
}

struct Quad<'a, C: CharFunction + ?Sized> {
    cf: &'a C,
    min_abs: f64,
    evals: usize,
}

impl<C: CharFunction + ?Sized> Quad<'_, C> {
    fn g(&mut self, z: Complex64) -> Complex64 {
        let d = self.cf.eval(z);
        self.min_abs = self.min_abs.min(d.norm());
        self.evals += 1;
        self.cf.deriv(z) / d
    }

    #[allow(clippy::too_many_arguments)]
    fn simpson(
        &mut self,
        z0: Complex64,
        dz: Complex64,
        a: f64,
        b: f64,
        fa: Complex64,
        fm: Complex64,
        fb: Complex64,
        whole: Complex64,
        tol: f64,
        depth: u32,
    ) -> Complex64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = self.g(z0 + dz * lm);
        let frm = self.g(z0 + dz * rm);
        let left = (fa + 4.0 * flm + fm) * ((m - a) / 6.0) * dz;
        let right = (fm + 4.0 * frm + fb) * ((b - m) / 6.0) * dz;
        let err = left + right - whole;
        if depth == 0 || err.norm() <= 15.0 * tol {
            return left + right + err / 15.0;
        }
        self.simpson(z0, dz, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + self.simpson(z0, dz, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }

    /// `int Delta'/Delta dz` along the straight segment `z0 -> z1`.
    fn segment(&mut self, z0: Complex64, z1: Complex64, panel: f64, tol: f64) -> Complex64 {
        let dz = z1 - z0;
        let panels = ((dz.norm() / panel).ceil() as usize).max(1);
        let ptol = tol / panels as f64;
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..panels {
            let a = i as f64 / panels as f64;
            let b = (i + 1) as f64 / panels as f64;
            let fa = self.g(z0 + dz * a);
            let fb = self.g(z0 + dz * b);
            let fm = self.g(z0 + dz * (0.5 * (a + b)));
            let whole = (fa + 4.0 * fm + fb) * ((b - a) / 6.0) * dz;
            total += self.simpson(z0, dz, a, b, fa, fm, fb, whole, ptol, 40);
        }
        total
    }
}

/// Minimum of `|Delta|` sampled along `Re p = -nu`, `|Im p| <= omega`.
fn line_min_abs<C: CharFunction + ?Sized>(cf: &C, nu: f64, omega: f64, samples: usize) -> f64 {
    (0..=samples)
        .map(|i| cf.eval(Complex64::new(-nu, omega * i as f64 / samples as f64)).norm())
        .fold(f64::INFINITY, f64::min)
}

fn line_samples(delay: f64, omega: f64) -> usize {
    (64.0 * omega * delay / (2.0 * PI)).ceil().max(4000.0) as usize
}

/// Number of roots (with multiplicity) with `Re p > -nu`, by the argument
/// principle on the box `Re p in [-nu, R]`, `|Im p| <= R`, `R = 1 + bound(nu)`.
pub fn count_roots_right_of<C: CharFunction + ?Sized>(cf: &C, nu: f64) -> Result<usize> {
    count_roots_in_box(cf, nu, 1.0 + cf.root_modulus_bound(nu))
}

/// Same count on the box `Re p in [-nu, r]`, `|Im p| <= r`; `r` must cover
/// the root modulus bound.
pub fn count_roots_in_box<C: CharFunction + ?Sized>(cf: &C, nu: f64, r: f64) -> Result<usize> {
    if !(r.is_finite() && r > cf.root_modulus_bound(nu)) {
        return Err(Error::Domain(format!("box radius {r} does not cover the root bound")));
    }
    if !(r > -nu) {
        return Err(Error::Domain(format!("empty root box for nu = {nu}")));
    }
    let min_line = line_min_abs(cf, nu, r, line_samples(cf.delay(), r));
    if min_line <= 1e-8 {
        return Err(Error::BoundaryRoot { line: -nu, min_abs: min_line });
    }
    let corners = [Complex64::new(-nu, -r), Complex64::new(r, -r), Complex64::new(r, r), Complex64::new(-nu, r)];
    let base_panel = 1.0f64.min(PI / (4.0 * cf.delay()));
    let mut last = f64::NAN;
    for (panel, tol) in [(base_panel, 2.0 * PI * 1e-3), (0.25 * base_panel, 2.0 * PI * 1e-6)] {
        let mut q = Quad { cf, min_abs: f64::INFINITY, evals: 0 };
        let mut total = Complex64::new(0.0, 0.0);
        for e in 0..4 {
            total += q.segment(corners[e], corners[(e + 1) % 4], panel, tol / 4.0);
        }
        if q.min_abs <= 1e-8 {
            return Err(Error::BoundaryRoot { line: -nu, min_abs: q.min_abs });
        }
        let raw = total.im / (2.0 * PI);
        last = raw;
        let rounded = raw.round();
        if (raw - rounded).abs() < 0.1 && total.re.abs() < 0.1 * 2.0 * PI && rounded >= 0.0 {
            return Ok(rounded as usize);
        }
    }
    Err(Error::ContourResolution { raw: last })
}

/// Result of the transfer-function sweep along `p = i omega - nu`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferMargin {
    /// `min_omega (1 / Lambda - |W(i omega - nu)|)`.
    pub margin: f64,
    pub omega_at_min: f64,
    pub sup_w: f64,
    /// Bound on `|W|` beyond the sweep range.
    pub tail_bound: f64,
}

pub fn transfer_margin(cf: &SuarezChar, nu: f64, lambda: f64) -> Result<TransferMargin> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::Domain(format!("Lipschitz constant must be positive, got {lambda}")));
    }
    let growth = cf.alpha * (cf.tau * nu).exp();
    let omega_max = 10.0 * (1.0 + nu.abs() + growth);
    let samples = line_samples(cf.tau, omega_max);
    let absw = |om: f64| cf.transfer(Complex64::new(-nu, om)).norm();
    let mut best_i = 0;
    let mut best = 0.0f64;
    let mut min_delta = f64::INFINITY;
    for i in 0..=samples {
        let om = omega_max * i as f64 / samples as f64;
        let d = cf.eval(Complex64::new(-nu, om)).norm();
        min_delta = min_delta.min(d);
        if 1.0 / d > best {
            best = 1.0 / d;
            best_i = i;
        }
    }
    if min_delta <= 1e-8 {
        return Err(Error::BoundaryRoot { line: -nu, min_abs: min_delta });
    }
    // golden-section refinement of the largest |W| around the best sample
    let step = omega_max / samples as f64;
    let mut a = (best_i as f64 - 1.0).max(0.0) * step;
    let mut b = ((best_i + 1) as f64 * step).min(omega_max);
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - gr * (b - a);
    let mut d = a + gr * (b - a);
    let (mut fc, mut fd) = (absw(c), absw(d));
    for _ in 0..80 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = absw(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = absw(d);
        }
    }
    let (mut om_best, mut sup_w) = (best_i as f64 * step, best);
    for (om, v) in [(c, fc), (d, fd)] {
        if v > sup_w {
            sup_w = v;
            om_best = om;
        }
    }
    // |Delta(i w - nu)| >= |1 + nu - i w| - alpha e^{tau nu} >= w - 1 - |nu| - alpha e^{tau nu}
    let tail_bound = 1.0 / (omega_max - 1.0 - nu.abs() - growth);
    let sup_all = sup_w.max(tail_bound);
    Ok(TransferMargin { margin: 1.0 / lambda - sup_all, omega_at_min: om_best, sup_w, tail_bound })
}

fn newton<C: CharFunction + ?Sized>(cf: &C, mut p: Complex64) -> Option<Complex64> {
    for _ in 0..100 {
        let f = cf.eval(p);
        let d = cf.deriv(p);
        if d.norm() == 0.0 || !f.is_finite() {
            return None;
        }
        let step = f / d;
        p -= step;
        if !p.is_finite() {
            return None;
        }
        if step.norm() <= 1e-15 * (1.0 + p.norm()) {
            break;
        }
    }
    // rounding in e^{-tau p} grows with |p|, so the residual floor does too
    let res = cf.eval(p).norm();
    (res <= 1e-10 * (1.0 + p.norm())).then_some(p)
}

fn push_unique(roots: &mut Vec<Complex64>, r: Complex64) {
    let r = if r.im.abs() <= 1e-10 * (1.0 + r.norm()) { Complex64::new(r.re, 0.0) } else { r };
    if !roots.iter().any(|q| (q - r).norm() <= 1e-8 * (1.0 + r.norm())) {
        roots.push(r);
    }
}

/// Seeds near the asymptotic root chains of `alpha e^{-tau p} = 1 - p`.
fn branch_seed(cf: &SuarezChar, k: usize) -> Complex64 {
    let tau = cf.tau;
    let mut b = (2.0 * PI * k as f64 + PI / 2.0) / tau;
    let mut a = 0.0;
    for _ in 0..20 {
        let one_minus = Complex64::new(1.0 - a, -b);
        a = -(one_minus.norm() / cf.alpha.max(1e-300)).ln() / tau;
        b = (2.0 * PI * k as f64 + b.atan2(1.0 - a)) / tau;
    }
    Complex64::new(a, b)
}

/// Roots with `Re p > -nu` found by Newton polishing from branch and grid
/// seeds in the a-priori box; conjugates are listed explicitly, sorted by
/// decreasing real part.
pub fn enumerate_roots(cf: &SuarezChar, nu: f64) -> Result<Vec<Complex64>> {
    let r = 1.0 + cf.root_modulus_bound(nu);
    let mut found = Vec::new();
    if cf.alpha > 0.0 && cf.alpha < 1.0 {
        let (l1, l2) = real_roots(cf)?;
        push_unique(&mut found, Complex64::new(l1, 0.0));
        push_unique(&mut found, Complex64::new(l2, 0.0));
    }
    let kmax = (r * cf.tau / (2.0 * PI)).ceil() as usize + 2;
    let mut seeds: Vec<Complex64> = (0..=kmax).map(|k| branch_seed(cf, k)).collect();
    let nx = 48usize;
    let ny = ((r * cf.tau / (PI / 8.0)).ceil() as usize).clamp(48, 4000);
    for i in 0..=nx {
        for j in 0..=ny {
            seeds.push(Complex64::new(-nu + (r + nu) * i as f64 / nx as f64, r * j as f64 / ny as f64));
        }
    }
    let polished: Vec<Option<Complex64>> = seeds.par_iter().map(|s| newton(cf, *s)).collect();
    for p in polished.into_iter().flatten() {
        push_unique(&mut found, p);
    }
    let mut roots = Vec::new();
    for p in found {
        if p.re > -nu && p.norm() <= r {
            push_unique(&mut roots, p);
            if p.im != 0.0 {
                push_unique(&mut roots, p.conj());
            }
        }
    }
    roots.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
    Ok(roots)
}

/// Rightmost non-real root (upper half plane), by Newton from branch seeds.
fn leading_complex_root(cf: &SuarezChar) -> Option<Complex64> {
    let mut best: Option<Complex64> = None;
    for k in 0..8 {
        for scale in [1.0, 0.5, 2.0] {
            let s = branch_seed(cf, k);
            let seed = Complex64::new(s.re, s.im * scale);
            if let Some(p) = newton(cf, seed) {
                if p.im.abs() > 1e-8 {
                    let p = Complex64::new(p.re, p.im.abs());
                    if best.is_none_or(|b| p.re > b.re) {
                        best = Some(p);
                    }
                }
            }
        }
    }
    best
}

/// Everything computed for one `(tau, alpha, nu)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralScan {
    pub alpha: f64,
    pub tau: f64,
    pub nu: f64,
    /// `(re, im)` pairs of the roots with `Re p > -nu`.
    pub roots: Vec<(f64, f64)>,
    pub j: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda: f64,
    pub freq_margin: f64,
}

pub fn spectral_scan(cf: &SuarezChar, nu: f64, lambda: f64) -> Result<SpectralScan> {
    let (lambda1, lambda2) = real_roots(cf)?;
    let roots = enumerate_roots(cf, nu)?;
    let j = count_roots_right_of(cf, nu)?;
    let freq_margin = transfer_margin(cf, nu, lambda)?.margin;
    Ok(SpectralScan {
        alpha: cf.alpha,
        tau: cf.tau,
        nu,
        roots: roots.iter().map(|r| (r.re, r.im)).collect(),
        j,
        lambda1,
        lambda2,
        lambda,
        freq_margin,
    })
}

/// Lipschitz constant of the Suarez-Schopf nonlinearity on the attractor range.
pub fn suarez_lambda(alpha: f64) -> f64 {
    3.0 + 3.0 * alpha
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    J1,
    J2,
    None,
    Error,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::J1 => "j1",
            Verdict::J2 => "j2",
            Verdict::None => "none",
            Verdict::Error => "error",
        }
    }

    pub fn is_manifold(self) -> bool {
        matches!(self, Verdict::J1 | Verdict::J2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImVerdict {
    pub verdict: Verdict,
    pub nu: Option<f64>,
    pub margin: Option<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Sign of `lambda1 + lambda2` (`-1`, `0` or `1`).
    pub lambda_sum_sign: i8,
}

/// Candidate shifts inside `(lo, hi)`: the midpoint first, then interior points.
fn gap_candidates(lo: f64, hi: f64) -> Vec<f64> {
    let mut v = vec![0.5 * (lo + hi)];
    v.extend((1..=16).filter(|&i| i != 8).map(|i| lo + (hi - lo) * i as f64 / 16.0));
    v
}

/// Searches a shift `nu > 0` with exactly `j` roots right of `-nu` and a
/// positive frequency margin, for `j = 1` and then `j = 2`.
pub fn im_verdict(alpha: f64, tau: f64) -> Result<ImVerdict> {
    let cf = SuarezChar::new(alpha, tau)?;
    let (lambda1, lambda2) = real_roots(&cf)?;
    let s = lambda1 + lambda2;
    let lambda_sum_sign = if s > 0.0 {
        1
    } else if s < 0.0 {
        -1
    } else {
        0
    };
    let lam = suarez_lambda(alpha);

    let mut re: Vec<f64> = vec![lambda1, lambda2];
    if let Some(c) = leading_complex_root(&cf) {
        re.push(c.re);
        re.push(c.re);
    }
    re.sort_by(|a, b| b.total_cmp(a));

    for j in 1..=2usize {
        if re.len() <= j {
            break;
        }
        let lo = (-re[j - 1]).max(0.0);
        let hi = -re[j];
        if !(hi > lo) {
            continue;
        }
        for nu in gap_candidates(lo, hi) {
            if nu <= 0.0 {
                continue;
            }
            let tm = match transfer_margin(&cf, nu, lam) {
                Ok(tm) => tm,
                Err(Error::BoundaryRoot { .. }) => continue,
                Err(e) => return Err(e),
            };
            if tm.margin > 0.0 {
                match count_roots_right_of(&cf, nu) {
                    Ok(c) if c == j => {
                        let verdict = if j == 1 { Verdict::J1 } else { Verdict::J2 };
                        return Ok(ImVerdict {
                            verdict,
                            nu: Some(nu),
                            margin: Some(tm.margin),
                            lambda1,
                            lambda2,
                            lambda_sum_sign,
                        });
                    }
                    Ok(_) | Err(Error::BoundaryRoot { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    Ok(ImVerdict { verdict: Verdict::None, nu: None, margin: None, lambda1, lambda2, lambda_sum_sign })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionCell {
    pub row: usize,
    pub col: usize,
    pub tau: f64,
    pub alpha: f64,
    pub verdict: Verdict,
    pub lambda_sum_sign: i8,
    pub nu: Option<f64>,
    pub margin: Option<f64>,
    pub error: Option<String>,
}

/// Verdicts on cell centers of a `(tau, alpha)` lattice; rows index `tau`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionGrid {
    pub tau_range: (f64, f64),
    pub alpha_range: (f64, f64),
    pub taus: Vec<f64>,
    pub alphas: Vec<f64>,
    pub cells: Vec<RegionCell>,
}

impl RegionGrid {
    pub fn cell(&self, row: usize, col: usize) -> &RegionCell {
        &self.cells[row * self.alphas.len() + col]
    }

    /// Cells with a manifold verdict but `lambda1 + lambda2 >= 0`.
    pub fn containment_violations(&self) -> Vec<&RegionCell> {
        self.cells.iter().filter(|c| c.verdict.is_manifold() && c.lambda_sum_sign >= 0).collect()
    }

    pub fn count(&self, v: Verdict) -> usize {
        self.cells.iter().filter(|c| c.verdict == v).count()
    }

    /// `(alpha, tau_before, tau_after)` where increasing `tau` turns `none` back into `j1`.
    pub fn monotonicity_counterexamples(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for (col, &a) in self.alphas.iter().enumerate() {
            let mut seen_none: Option<f64> = None;
            for row in 0..self.taus.len() {
                let c = self.cell(row, col);
                match c.verdict {
                    Verdict::None => seen_none = Some(c.tau),
                    Verdict::J1 => {
                        if let Some(t0) = seen_none {
                            out.push((a, t0, c.tau));
                        }
                    }
                    _ => {}
                }
            }
        }
        out
    }
}

pub const DEFAULT_TAU_RANGE: (f64, f64) = (0.0, 3.0);
pub const DEFAULT_ALPHA_RANGE: (f64, f64) = (0.0, 1.0);
pub const DEFAULT_RESOLUTION: usize = 60;

fn centers(range: (f64, f64), k: usize) -> Vec<f64> {
    (0..k).map(|i| range.0 + (i as f64 + 0.5) * (range.1 - range.0) / k as f64).collect()
}

/// Runs [`im_verdict`] on the cell centers of an `n_tau x n_alpha` lattice.
pub fn region_sweep(
    tau_range: (f64, f64),
    alpha_range: (f64, f64),
    n_tau: usize,
    n_alpha: usize,
) -> Result<RegionGrid> {
    if !(tau_range.0 >= 0.0 && tau_range.1 > tau_range.0) || !(alpha_range.0 >= 0.0 && alpha_range.1 > alpha_range.0) {
        return Err(Error::Config("ranges must be increasing and nonnegative".into()));
    }
    if alpha_range.1 > 1.0 {
        return Err(Error::Config("alpha range must lie in (0, 1)".into()));
    }
    if n_tau < 2 || n_alpha < 2 {
        return Err(Error::Config("resolution must be at least 2".into()));
    }
    let taus = centers(tau_range, n_tau);
    let alphas = centers(alpha_range, n_alpha);
    let cells = (0..n_tau * n_alpha)
        .into_par_iter()
        .map(|idx| {
            let (row, col) = (idx / n_alpha, idx % n_alpha);
            let (tau, alpha) = (taus[row], alphas[col]);
            match im_verdict(alpha, tau) {
                Ok(v) => RegionCell {
                    row,
                    col,
                    tau,
                    alpha,
                    verdict: v.verdict,
                    lambda_sum_sign: v.lambda_sum_sign,
                    nu: v.nu,
                    margin: v.margin,
                    error: None,
                },
                Err(e) => RegionCell {
                    row,
                    col,
                    tau,
                    alpha,
                    verdict: Verdict::Error,
                    lambda_sum_sign: 0,
                    nu: None,
                    margin: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    Ok(RegionGrid { tau_range, alpha_range, taus, alphas, cells })
}
