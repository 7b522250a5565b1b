use std::collections::BTreeMap;

use proptest::prelude::*;
use terrace_core::experiment::{NonlinearitySpec, RunConfig};
use terrace_core::ode::{flow, poincare, IntegratorSettings};
use terrace_core::pde::{heaviside_ic, Grid1D, GridProfile, LeftBoundary, RightBoundary, WindowPolicy};
use terrace_core::signs::{is_subword, lattice_difference, sgn_word, zero_number, SignWord};
use terrace_core::terrace::level_position;
use terrace_core::{build_preset, lipschitz_bound, PeriodicNonlinearity, Solver, SolverConfig};

fn preset(name: &str, kv: &[(&str, f64)]) -> PeriodicNonlinearity {
    let p: BTreeMap<String, f64> = kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    build_preset(name, &p).unwrap()
}

fn neumann(h: f64) -> SolverConfig {
    SolverConfig {
        h,
        left_bc: LeftBoundary::Neumann,
        right_bc: RightBoundary::Neumann,
        window: WindowPolicy::disabled(),
        ..Default::default()
    }
}

fn evolve(f: &PeriodicNonlinearity, cfg: &SolverConfig, ic: GridProfile, periods: usize) -> Vec<GridProfile> {
    let mut s = Solver::new(f, cfg.clone(), ic, 1.0, &IntegratorSettings::default()).unwrap();
    let mut out = vec![s.state().clone()];
    for _ in 0..periods {
        s.advance_period(0).unwrap();
        out.push(s.state().clone());
    }
    out
}

fn word() -> impl Strategy<Value = SignWord> {
    (any::<bool>(), 0usize..7).prop_map(|(plus, len)| {
        let s: Vec<&str> = (0..len)
            .map(|i| if (i % 2 == 0) == plus { "+" } else { "-" })
            .collect();
        SignWord::parse(&format!("[{}]", s.join(" "))).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn word_length_tracks_zero_number(v in prop::collection::vec(-3.0f64..3.0, 0..40), tol in 0.0f64..0.5) {
        let z = zero_number(&v, tol);
        let w = sgn_word(&v, tol);
        if z >= 0 {
            prop_assert_eq!(w.len() as i64, z + 1);
        } else {
            prop_assert!(w.is_empty());
        }
    }

    #[test]
    fn subword_is_reflexive_and_transitive(a in word(), b in word(), c in word()) {
        prop_assert!(is_subword(&a, &a));
        if is_subword(&a, &b) && is_subword(&b, &c) {
            prop_assert!(is_subword(&a, &c));
        }
    }

    #[test]
    fn zero_number_is_lower_semicontinuous(
        v in prop::collection::vec(-1.0f64..1.0, 2..30),
        noise in prop::collection::vec(-1.0f64..1.0, 30),
    ) {
        // perturbations below the smallest |v_i| cannot remove sign changes
        let m = v.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
        prop_assume!(m > 1e-6);
        let z = zero_number(&v, 0.0);
        for n in 1..6 {
            let eps = 0.99 * m / n as f64;
            let vn: Vec<f64> = v.iter().zip(&noise).map(|(x, e)| x + eps * e).collect();
            prop_assert!(z <= zero_number(&vn, 0.0));
        }
    }

    #[test]
    fn config_round_trips(
        h in 0.01f64..0.2,
        theta in 0.05f64..0.45,
        horizon in 2u64..500,
        grid in 16usize..5000,
        lambda_grid in 4usize..200,
        pack in any::<bool>(),
    ) {
        let mut c = RunConfig::new("p", NonlinearitySpec::preset("bistable_cubic", &[("theta", theta)]));
        c.horizon = horizon;
        c.solver.h = h;
        c.ladder.grid = grid;
        c.measure.terrace.lambda_grid = lambda_grid;
        c.output.pack = pack;
        let text = c.to_toml().unwrap();
        let back = RunConfig::parse(&text).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn lipschitz_bound_grows_under_refinement(theta in 0.05f64..0.95, amp in 0.0f64..0.9, cap in 0.5f64..2.0) {
        let f = preset("bistable_cubic", &[("theta", theta), ("amplitude", amp)]);
        let k1 = lipschitz_bound(&f, cap, 9, 17).unwrap();
        let k2 = lipschitz_bound(&f, cap, 17, 33).unwrap();
        let k3 = lipschitz_bound(&f, cap, 33, 65).unwrap();
        prop_assert!(k1 <= k2 && k2 <= k3);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn heaviside_solutions_stay_ordered_and_monotone(a1 in -3.0f64..3.0, gap in 0.1f64..3.0, amp in 0.0f64..0.8) {
        let f = preset("bistable_cubic", &[("theta", 0.3), ("amplitude", amp)]);
        let grid = Grid1D::covering(-15.0, 25.0, 0.1, 0.0).unwrap();
        let cfg = neumann(0.1);
        let lo = evolve(&f, &cfg, heaviside_ic(grid, a1, 1.0).unwrap(), 4);
        let hi = evolve(&f, &cfg, heaviside_ic(grid, a1 + gap, 1.0).unwrap(), 4);
        for (p, q) in lo.iter().zip(&hi) {
            prop_assert!(p.monotonicity_violation() <= 1e-9);
            for (u, v) in p.values.iter().zip(&q.values) {
                prop_assert!(*u <= v + 1e-8);
            }
        }
    }

    #[test]
    fn zero_number_never_increases(seed in prop::collection::vec(-1.0f64..1.0, 6)) {
        let f = preset("bistable_cubic", &[("theta", 0.3), ("amplitude", 0.5)]);
        let grid = Grid1D::covering(-15.0, 15.0, 0.1, 0.0).unwrap();
        let bump = |c: &[f64]| -> GridProfile {
            let vals = (0..grid.n)
                .map(|i| {
                    let x = grid.x(i);
                    0.5 + 0.4 * (c[0] * (0.3 * x).sin() + c[1] * (0.7 * x).cos() + c[2] * (-x * x / 20.0).exp()).tanh()
                })
                .collect();
            GridProfile::new(grid, 0.0, vals).unwrap()
        };
        let cfg = neumann(0.1);
        let u = evolve(&f, &cfg, bump(&seed[..3]), 3);
        let v = evolve(&f, &cfg, bump(&seed[3..]), 3);
        let mut prev: Option<(i64, SignWord)> = None;
        for (p, q) in u.iter().zip(&v) {
            let d = lattice_difference(p, q).unwrap();
            let (z, w) = (zero_number(&d, 1e-9), sgn_word(&d, 1e-9));
            if let Some((z0, w0)) = &prev {
                prop_assert!(z <= *z0);
                prop_assert!(is_subword(&w, w0));
            }
            prev = Some((z, w));
        }
    }

    #[test]
    fn flat_data_follows_the_ode(beta in 0.05f64..0.95, amp in 0.0f64..0.9) {
        let f = preset("bistable_cubic", &[("theta", 0.4), ("amplitude", amp)]);
        let grid = Grid1D::covering(-5.0, 5.0, 0.1, 0.0).unwrap();
        let u = evolve(&f, &neumann(0.1), GridProfile::constant(grid, 0.0, beta), 3);
        let ctrl = IntegratorSettings::default();
        let mut w = beta;
        for p in &u[1..] {
            w = poincare(&f, w, &ctrl).unwrap();
            for v in &p.values {
                prop_assert!((v - w).abs() <= 1e-6, "{} vs {}", v, w);
            }
        }
        let direct = flow(&f, beta, 0.0, 3.0, &ctrl, 0).unwrap().endpoint;
        prop_assert!((direct - w).abs() <= 1e-7);
    }

    #[test]
    fn level_positions_decrease_in_lambda(a in -2.0f64..2.0) {
        let f = preset("bistable_cubic", &[("theta", 0.3), ("amplitude", 0.5)]);
        let grid = Grid1D::covering(-15.0, 25.0, 0.1, 0.0).unwrap();
        let u = evolve(&f, &neumann(0.1), heaviside_ic(grid, a, 1.0).unwrap(), 3);
        for p in &u[1..] {
            let ells: Vec<f64> = (1..32).map(|i| level_position(p, i as f64 / 32.0).unwrap()).collect();
            for w in ells.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
        }
    }
}
