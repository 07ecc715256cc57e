use gramor::benchmark::random_stable_system;
use gramor::bounds::BoundContext;
use gramor::linalg::{fro, min_sym_eigenvalue, symmetrize, unvec, vec};
use gramor::lyapunov::{
    solve_generalized_lyapunov, solve_standard_lyapunov, LyapunovOptions, MethodChoice,
};
use gramor::parallel::Execution;
use gramor::reduction::{
    balanced_truncation_reduce, galerkin_reduce, observability_gramian, reachability_gramian,
    reduced_gramian, spectral_factorize, GramianOptions,
};
use gramor::simulate::{euler_maruyama_paired, SimulationConfig};
use gramor::stability::{kron_matrix, kron_operator_action};
use gramor::{input_l2_norm, GalerkinRom, InputSignal, Mat, Signal, StochasticLinearSystem};
use proptest::prelude::*;

fn system(n: usize, q: usize, m: usize, seed: u64) -> StochasticLinearSystem {
    random_stable_system(n, q, m, 0.9, 0.2, seed).unwrap()
}

fn config() -> ProptestConfig {
    ProptestConfig {
        cases: 24,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn gramian_is_symmetric_psd(n in 2usize..14, q in 0usize..4, seed in any::<u64>()) {
        let sys = system(n, q, 2, seed);
        let p = reachability_gramian(&sys, &GramianOptions::default()).unwrap().x;
        let scale = fro(&p);
        prop_assert!(fro(&(&p - p.transpose())) <= 1e-12 * scale);
        prop_assert!(min_sym_eigenvalue(&symmetrize(&p)).unwrap() >= -1e-10 * scale);
    }

    #[test]
    fn splitting_agrees_with_kron(n in 2usize..16, q in 1usize..4, seed in any::<u64>()) {
        let sys = system(n, q, 1, seed);
        let c = &sys.b * sys.b.transpose();
        let split = solve_generalized_lyapunov(&sys.a, &sys.n, &c, &LyapunovOptions::with_method(MethodChoice::SplittingIteration)).unwrap();
        let kron = solve_generalized_lyapunov(&sys.a, &sys.n, &c, &LyapunovOptions::with_method(MethodChoice::DirectKron)).unwrap();
        prop_assert!(fro(&(&split.x - &kron.x)) <= 1e-8 * fro(&kron.x));
    }

    // The fixed-point map X ↦ L⁻¹(−C − Σ NᵢXNᵢᵀ) is order preserving, so its
    // iterates from zero increase monotonically to P.
    #[test]
    fn splitting_iterates_increase(n in 2usize..9, q in 1usize..3, seed in any::<u64>()) {
        let sys = system(n, q, 1, seed);
        let c = &sys.b * sys.b.transpose();
        let p = solve_generalized_lyapunov(&sys.a, &sys.n, &c, &LyapunovOptions::default()).unwrap().x;
        let mut x = Mat::zeros(n, n);
        for _ in 0..40 {
            let mut rhs = c.clone();
            for ni in &sys.n {
                rhs += ni * &x * ni.transpose();
            }
            let next = solve_standard_lyapunov(&sys.a, &rhs).unwrap().x;
            prop_assert!(min_sym_eigenvalue(&symmetrize(&(&next - &x))).unwrap() >= -1e-10 * fro(&p));
            prop_assert!(min_sym_eigenvalue(&symmetrize(&(&p - &next))).unwrap() >= -1e-9 * fro(&p));
            x = next;
        }
    }

    #[test]
    fn operator_action_matches_kron_matrix(n in 1usize..13, q in 0usize..3, seed in any::<u64>()) {
        let sys = system(n, q, 1, seed);
        let x = system(n, 0, n, seed ^ 0x5eed).b;
        let k = kron_matrix(&sys.a, &sys.n);
        let via_matrix = unvec(&(&k * vec(&x)), n, n);
        let direct = kron_operator_action(&sys.a, &sys.n, &x);
        prop_assert!(fro(&(via_matrix - &direct)) <= 1e-12 * (1.0 + fro(&direct)));
    }

    #[test]
    fn input_norm_is_homogeneous(c in -5.0f64..5.0, w in 0.5f64..20.0, horizon in 0.1f64..4.0) {
        let u = InputSignal::new(vec![Signal::custom(move |t| (w * t).sin() + 0.3), Signal::Constant { value: 1.5 }], horizon).unwrap();
        let base = input_l2_norm(&u).unwrap();
        let scaled = input_l2_norm(&u.scaled(c)).unwrap();
        prop_assert!((scaled - c.abs() * base).abs() <= 1e-7 * (1.0 + scaled));
    }

    #[test]
    fn reduced_trace_below_retained_eigenvalues(n in 3usize..12, q in 0usize..3, seed in any::<u64>(), frac in 0.0f64..1.0) {
        let sys = system(n, q, 2, seed);
        let opts = GramianOptions::default();
        let p = reachability_gramian(&sys, &opts).unwrap().x;
        let spec = spectral_factorize(&p).unwrap();
        let r = 1 + ((n - 1) as f64 * frac) as usize;
        let rom = galerkin_reduce(&sys, &spec, r).unwrap();
        let p_hat = reduced_gramian(&rom, &opts).unwrap().p_hat;
        let retained: f64 = spec.eigenvalues[..r].iter().sum();
        prop_assert!(p_hat.trace() <= retained * (1.0 + 1e-9));
    }

    #[test]
    fn balanced_bases_are_biorthogonal(n in 3usize..14, q in 0usize..3, seed in any::<u64>(), frac in 0.0f64..1.0) {
        let sys = system(n, q, 2, seed);
        let opts = GramianOptions::default();
        let p = reachability_gramian(&sys, &opts).unwrap().x;
        let qg = observability_gramian(&sys, &opts).unwrap().x;
        let r = 1 + ((n - 1) as f64 * frac) as usize;
        let rom = balanced_truncation_reduce(&sys, &p, &qg, r).unwrap();
        prop_assert!(fro(&(rom.w.transpose() * &rom.v - Mat::identity(r, r))) <= 1e-10);
        prop_assert!(rom.projection_defect(&sys.a, &sys.n, &sys.b) <= 1e-12 * (1.0 + fro(&sys.a)));
    }

    #[test]
    fn general_and_weighted_bounds_agree(n in 3usize..16, q in 0usize..3, m in 1usize..3, seed in any::<u64>(), frac in 0.0f64..1.0) {
        let sys = system(n, q, m, seed);
        let mut ctx = BoundContext::new(&sys, &GramianOptions::default()).unwrap();
        let r = 1 + ((n - 1) as f64 * frac) as usize;
        let rom = galerkin_reduce(&sys, &ctx.spectrum().unwrap().clone(), r).unwrap();
        let g = ctx.factor(&rom).unwrap().0;
        let w = ctx.weighted_factor(&rom).unwrap().0;
        prop_assert!((g - w).abs() <= 1e-8 * g.max(w), "general {g:e}, weighted {w:e}");
    }

    #[test]
    fn bound_is_linear_in_the_input(n in 3usize..10, seed in any::<u64>(), c in 0.1f64..10.0) {
        let sys = system(n, 1, 1, seed);
        let opts = GramianOptions::default();
        let mut ctx = BoundContext::new(&sys, &opts).unwrap();
        let rom = galerkin_reduce(&sys, &ctx.spectrum().unwrap().clone(), n / 2).unwrap();
        let u = InputSignal::tied(Signal::named("damped-sine").unwrap(), 1, 1.0).unwrap();
        let b1 = ctx.general(&rom, input_l2_norm(&u).unwrap()).unwrap().bound;
        let b2 = ctx.general(&rom, input_l2_norm(&u.scaled(c)).unwrap()).unwrap().bound;
        prop_assert!((b2 - c * b1).abs() <= 1e-7 * b2);
    }
}

fn short_config(samples: usize, seed: u64, execution: Execution) -> SimulationConfig {
    SimulationConfig {
        step_size: 1.0 / 64.0,
        horizon: 1.0,
        samples,
        seed,
        execution,
        ..SimulationConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn identity_projection_has_zero_error(n in 2usize..10, q in 0usize..3, seed in any::<u64>()) {
        let sys = system(n, q, 1, seed);
        let rom = GalerkinRom::orthogonal(&sys, Mat::identity(n, n)).unwrap();
        let u = InputSignal::tied(Signal::named("damped-sine").unwrap(), 1, 1.0).unwrap();
        let curve = euler_maruyama_paired(&sys, &rom, &u, &short_config(130, seed, Execution::Parallel)).unwrap();
        prop_assert!(curve.mean_error.iter().all(|&e| e == 0.0));
        prop_assert_eq!(curve.sup_value, 0.0);
    }

    #[test]
    fn monte_carlo_is_schedule_independent(n in 4usize..10, seed in any::<u64>()) {
        let sys = system(n, 2, 1, seed);
        let p = reachability_gramian(&sys, &GramianOptions::default()).unwrap().x;
        let rom = galerkin_reduce(&sys, &spectral_factorize(&p).unwrap(), 2).unwrap();
        let u = InputSignal::tied(Signal::named("unit").unwrap(), 1, 1.0).unwrap();
        let par = euler_maruyama_paired(&sys, &rom, &u, &short_config(200, seed, Execution::Parallel)).unwrap();
        let seq = euler_maruyama_paired(&sys, &rom, &u, &short_config(200, seed, Execution::Sequential)).unwrap();
        prop_assert_eq!(par.mean_error, seq.mean_error);
        prop_assert_eq!(par.stderr, seq.stderr);
    }
}
