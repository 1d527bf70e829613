use std::f64::consts::{FRAC_PI_2, PI};

use ddim_core::dimension::{domain_form, quasi_differential_from, random_frame_volume_sup, SQUEEZING_D_STEP};
use ddim_core::*;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn attractor_state(sm: &SuarezModel, m: usize, phase: f64) -> HState {
    let g = HistoryGrid::new(sm.tau, m).unwrap();
    let h = sm.tau / m as f64;
    evolve_fn(sm.model(), g, |t| vec![0.3 + 0.5 * (3.0 * t + phase).sin()], 0.0, 10.0 * sm.tau, h)
        .unwrap()
        .state_at(10.0 * sm.tau)
        .unwrap()
}

#[test]
fn trace_formula_for_scalar_growth() {
    // x' = a x with a negligible delay; e^{a theta} spans an invariant line
    let a = 0.8;
    let tau = 0.01;
    let g = HistoryGrid::new(tau, 32).unwrap();
    let model = DelayModel::linear(tau, LinearFunctional::new(1, 1).with_scalar_mass(0.0, a).unwrap()).unwrap();
    let eig = HState::from_scalar_fn(g, |th| (a * th).exp()).unwrap();
    let rep = check_trace_formula_with_frame(&model, &HState::zeros(g, 1), &[eig], 1.0, tau / 32.0).unwrap();
    assert!(rep.max_deviation <= 1e-8, "deviation {}", rep.max_deviation);
    let t = *rep.times.last().unwrap();
    assert!((rep.log_volume_change.last().unwrap() - a * t).abs() <= 1e-8);
}

#[test]
fn trace_formula_for_pure_delay() {
    let model =
        DelayModel::linear(FRAC_PI_2, LinearFunctional::new(1, 1).with_scalar_mass(-FRAC_PI_2, -1.0).unwrap()).unwrap();
    let rows = trace_refinement(&model, |g| Ok(HState::zeros(g, 1)), 1, PI, &[32, 64, 128]).unwrap();
    assert!(rows[1].deviation <= 1e-4, "m = 64 deviation {}", rows[1].deviation);
    assert!(rows[2].deviation < rows[1].deviation && rows[1].deviation < rows[0].deviation);
}

#[test]
fn trace_formula_on_the_suarez_attractor() {
    let sm = SuarezModel::new(0.5, 1.0).unwrap();
    let rows =
        trace_refinement(sm.model(), |g| Ok(attractor_state(&sm, g.intervals(), 0.0)), 3, 2.0, &[32, 64, 128]).unwrap();
    assert!(rows[1].deviation <= 1e-3, "m = 64 deviation {}", rows[1].deviation);
    for r in &rows[1..] {
        let p = r.observed_order.unwrap();
        assert!(p >= 2.0, "observed order {p} at m = {}", r.m);
    }
}

#[test]
fn trace_at_zero_state_matches_initial_volume_rate() {
    let sm = SuarezModel::new(0.5, 1.0).unwrap();
    let m = 256;
    let g = HistoryGrid::new(1.0, m).unwrap();
    let zero = HState::zeros(g, 1);
    let frame = compatible_frame(sm.model(), &zero, 2).unwrap();
    let w = WeightedGram::new(g, 1);
    let tr0 = trace_on_span(sm.model(), &zero, &frame, &w).unwrap();
    let h = 1.0 / m as f64;
    let rep = check_trace_formula_with_frame(sm.model(), &zero, &frame, 8.0 * h, h).unwrap();
    // forward difference over two steps and its second-order correction
    let d1 = rep.log_volume_change[0] / (2.0 * h);
    let d2 = rep.log_volume_change[1] / (4.0 * h);
    let rate = 2.0 * d1 - d2;
    assert!((rate - tr0).abs() <= 1e-3 * (1.0 + tr0.abs()), "rate {rate} vs trace {tr0}");
}

#[test]
fn trace_is_basis_independent() {
    let sm = SuarezModel::new(0.5, 1.0).unwrap();
    let v = attractor_state(&sm, 64, 1.0);
    let w = WeightedGram::new(v.grid(), 1);
    let fr = compatible_frame(sm.model(), &v, 3).unwrap();
    let mixed = vec![
        fr[0].combine(2.0, -1.0, &fr[1]).unwrap(),
        fr[1].combine(0.5, 3.0, &fr[2]).unwrap(),
        fr[2].combine(-1.0, 0.25, &fr[0]).unwrap(),
    ];
    let a = trace_on_span(sm.model(), &v, &fr, &w).unwrap();
    let b = trace_on_span(sm.model(), &v, &mixed, &w).unwrap();
    assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
    let one = trace_on_span(sm.model(), &v, &fr[..1], &w).unwrap();
    let one_scaled = trace_on_span(sm.model(), &v, &[fr[0].scaled(-7.0)], &w).unwrap();
    assert!((one - one_scaled).abs() <= 1e-12 * (1.0 + one.abs()));
}

#[test]
fn omega_matches_brute_force_volume_sup() {
    let sm = SuarezModel::new(0.5, 1.0).unwrap();
    let v = attractor_state(&sm, 32, 0.0);
    let (_, qd) = quasi_differential_from(sm.model(), &v, 2.0, 1.0 / 32.0).unwrap();
    let w = WeightedGram::new(v.grid(), 1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for k in 1..=3 {
        let om = omega_d(&qd, &w, k as f64).unwrap();
        let sup = random_frame_volume_sup(&qd, &w, k, 200, 10, &mut rng).unwrap();
        assert!(sup <= om * (1.0 + 1e-9), "k = {k}: volume {sup} above omega {om}");
        assert!(sup >= 0.98 * om, "k = {k}: volume {sup} vs omega {om}");
    }
}

#[test]
fn omega_of_identity_is_one() {
    let g = HistoryGrid::new(1.0, 8).unwrap();
    let sm = SuarezModel::new(0.5, 1.0).unwrap();
    let base = evolve(sm.model(), &HState::zeros(g, 1), 0.0, 1.0, 0.125).unwrap();
    let qd = quasi_differential(&base, 0.0).unwrap();
    let w = WeightedGram::new(g, 1);
    for d in [0.3, 1.0, 2.7, 10.0] {
        assert!((omega_d(&qd, &w, d).unwrap() - 1.0).abs() <= 1e-12);
    }
}

fn sigmas(m: &DMatrix<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

#[test]
fn horn_inequality_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..50 {
        let n = 6;
        let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let d = rng.gen_range(0.1..6.0);
        let ab = omega_from_sigmas(&sigmas(&(&a * &b)), d).unwrap();
        let pa = omega_from_sigmas(&sigmas(&a), d).unwrap();
        let pb = omega_from_sigmas(&sigmas(&b), d).unwrap();
        assert!(ab <= pa * pb * (1.0 + 1e-10), "d = {d}: {ab} > {pa} * {pb}");
    }
}

#[test]
fn log_omega_is_piecewise_linear_and_monotone_below_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..20 {
        let a = DMatrix::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let s = sigmas(&a);
        for k in 0..4 {
            let lo = if k == 0 { 0.0 } else { omega_from_sigmas(&s, k as f64).unwrap().ln() };
            let hi = omega_from_sigmas(&s, (k + 1) as f64).unwrap().ln();
            for frac in [0.25, 0.5, 0.75] {
                let mid = omega_from_sigmas(&s, k as f64 + frac).unwrap().ln();
                assert!((mid - ((1.0 - frac) * lo + frac * hi)).abs() <= 1e-10);
            }
        }
        // with every singular value at most one, omega_d cannot grow with d
        let top = s[0];
        let shrunk: Vec<f64> = s.iter().map(|x| x / top).collect();
        let mut prev = f64::INFINITY;
        for i in 1..=50 {
            let o = omega_from_sigmas(&shrunk, i as f64 * 0.1).unwrap();
            assert!(o <= prev * (1.0 + 1e-12));
            prev = o;
        }
    }
}

/// Characteristic function of `x' = a x + b x(t - tau)`.
struct ScalarDelay {
    a: f64,
    b: f64,
    tau: f64,
}

impl CharFunction for ScalarDelay {
    fn eval(&self, p: Complex64) -> Complex64 {
        Complex64::new(self.a, 0.0) + self.b * (-self.tau * p).exp() - p
    }
    fn deriv(&self, p: Complex64) -> Complex64 {
        -self.b * self.tau * (-self.tau * p).exp() - 1.0
    }
    fn root_modulus_bound(&self, nu: f64) -> f64 {
        self.a.abs() + self.b.abs() * (self.tau * nu).exp()
    }
    fn delay(&self) -> f64 {
        self.tau
    }
}

#[test]
fn squeezing_for_a_contractive_linear_model() {
    let (a, b, tau) = (-2.0, 0.5, 1.0);
    // no roots in the closed right half plane, and none to the right of -0.5
    assert_eq!(count_roots_right_of(&ScalarDelay { a, b, tau }, 0.5).unwrap(), 0);
    let model = DelayModel::linear(
        tau,
        LinearFunctional::new(1, 1).with_scalar_mass(0.0, a).unwrap().with_scalar_mass(-tau, b).unwrap(),
    )
    .unwrap();
    let g = HistoryGrid::new(tau, 32).unwrap();
    let sample = vec![HState::zeros(g, 1)];
    let rep = squeezing_test(&model, &sample, 2.0 * tau, 0.5, tau / 32.0).unwrap();
    assert!(rep.verdict && rep.sup_omega < 1.0, "sup {}", rep.sup_omega);
    assert_eq!(rep.minimal_d, Some(SQUEEZING_D_STEP));
}

#[test]
fn squeezing_guards() {
    let sm = SuarezModel::new(0.5, 1.0).unwrap();
    let g = HistoryGrid::new(1.0, 16).unwrap();
    let s = vec![HState::zeros(g, 1)];
    assert!(matches!(squeezing_test(sm.model(), &s, 1.0, 1.0, 1.0 / 16.0), Err(Error::Domain(_))));
    assert!(matches!(squeezing_test(sm.model(), &s, 0.0, 1.0, 1.0 / 16.0), Err(Error::Domain(_))));
    assert!(matches!(squeezing_test(sm.model(), &[], 2.0, 1.0, 1.0 / 16.0), Err(Error::Domain(_))));
}

#[test]
fn suarez_dimension_bound_is_finite() {
    let sm = SuarezModel::new(0.5, 1.0).unwrap();
    let sample: Vec<HState> = (0..6).map(|i| attractor_state(&sm, 32, i as f64)).collect();
    let rep = squeezing_test(sm.model(), &sample, 2.0, 1.0, 1.0 / 32.0).unwrap();
    let d = rep.minimal_d.expect("a finite dimension bound");
    assert!(d > 0.0 && d <= 34.0);
    for s in &rep.spectra {
        assert!(s.windows(2).all(|w| w[0] >= w[1]) && s.iter().all(|x| *x >= 0.0));
    }
}

/// Sum of the top `k` eigenvalues of `G^{-1/2} S G^{-1/2}`: the supremum of
/// the trace over `k`-dimensional subspaces of the discrete domain.
fn ky_fan_sums(model: &DelayModel, m: usize, k_max: usize) -> Vec<f64> {
    let df = domain_form(model, HistoryGrid::new(model.tau(), m).unwrap()).unwrap();
    let gi: Vec<f64> = df.gram.iter().map(|g| 1.0 / g.sqrt()).collect();
    let s = DMatrix::from_fn(df.form.nrows(), df.form.ncols(), |i, j| gi[i] * df.form[(i, j)] * gi[j]);
    let mut ev: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev.iter()
        .take(k_max)
        .scan(0.0, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

#[test]
fn beta_ascent_reaches_the_eigenvalue_oracle() {
    let sm = SuarezModel::new(0.5, 1.0).unwrap();
    let rep = beta_numbers(sm.model(), 32, 3, 8, 1).unwrap();
    let oracle = ky_fan_sums(sm.model(), 32, 3);
    for (s, o) in rep.sums.iter().zip(&oracle) {
        assert!((s - o).abs() <= 1e-6 * (1.0 + o.abs()), "ascent {s} vs oracle {o}");
    }
}

#[test]
fn beta_numbers_approach_the_closed_form() {
    for alpha in [0.0, 0.5] {
        let sm = SuarezModel::new(alpha, 1.0).unwrap();
        let rep = beta_numbers(sm.model(), 128, 2, 16, 7).unwrap();
        let b1 = beta1_closed_form(alpha);
        assert!((rep.betas[0] - b1).abs() <= 0.05, "alpha = {alpha}: beta_1 {} vs {b1}", rep.betas[0]);
        assert!(rep.betas[1].abs() <= 0.05, "alpha = {alpha}: beta_2 {}", rep.betas[1]);
        for bsf in &rep.best_so_far {
            assert!(bsf.windows(2).all(|w| w[1] >= w[0]));
        }
    }
    assert_eq!(beta1_closed_form(0.0), 1.5);
    assert_eq!(beta1_closed_form(0.5), 1.625);
}
