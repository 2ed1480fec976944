use proptest::prelude::*;

use spinbath::dynamics::{evolve_full, random_density, EvolveOptions, InitialState};
use spinbath::linalg::{eig_general, kron, partial_trace, DenseMatrix, C64};
use spinbath::liouvillian::{assemble_from_rates, assemble_liouvillian};
use spinbath::measures::von_neumann_entropy;
use spinbath::model::{alpha_at, equilibrium_magnetization, AlphaMatrix, Beta, ModelSpec, RateSet};

fn complex_matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), rows * cols).prop_map(move |v| {
        let data = v.into_iter().map(|(re, im)| C64::new(re, im)).collect();
        DenseMatrix::from_column_major(rows, cols, data).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn correlation_decays_with_distance_and_grows_with_length(
        r in 0.0..10.0f64, dr in 1e-3..5.0f64, xi in 1e-2..50.0f64, dxi in 1e-3..50.0f64,
    ) {
        let a = alpha_at(r, xi);
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(alpha_at(r + dr, xi) <= a);
        prop_assert!(alpha_at(r, xi + dxi) >= a);
    }

    #[test]
    fn rates_obey_detailed_balance(beta in 0.01..20.0f64, omega0 in 0.1..3.0f64, r1 in 0.1..5.0f64) {
        let m0 = equilibrium_magnetization(Beta::Finite(beta), omega0);
        let rates = RateSet::from_magnetization(r1, m0, AlphaMatrix::uniform(1, 1.0));
        let (a, b) = (rates.a(0, 0), rates.b(0, 0));
        prop_assert!((a + b - r1).abs() < 1e-12 * r1);
        prop_assert!((a / b - (-beta * omega0).exp()).abs() < 1e-10);
    }

    #[test]
    fn kron_is_associative(
        a in complex_matrix(2, 3), b in complex_matrix(3, 2), c in complex_matrix(2, 2),
    ) {
        let left = kron(&kron(&a, &b).unwrap(), &c).unwrap();
        let right = kron(&a, &kron(&b, &c).unwrap()).unwrap();
        prop_assert!((&left - &right).norm_max() < 1e-14);
    }

    #[test]
    fn partial_trace_keeps_the_trace(seed in any::<u64>(), keep in prop::sample::subsequence(vec![0usize, 1, 2], 1..3)) {
        let rho = random_density(8, seed);
        let reduced = partial_trace(&rho, &keep, &[2, 2, 2]).unwrap();
        prop_assert_eq!(reduced.rows(), 1 << keep.len());
        prop_assert!((reduced.trace() - rho.trace()).norm() < 1e-13);
    }

    #[test]
    fn liouvillian_spectrum_is_closed_under_conjugation(m0 in 0.0..0.99f64, alpha in 0.0..=1.0f64) {
        let bundle = assemble_liouvillian(&ModelSpec::with_alpha(2, 1.0, m0, alpha)).unwrap();
        let l = bundle.dense_superop();
        let ev = eig_general(&l, false).unwrap().values;
        for z in &ev {
            let nearest = ev.iter().map(|w| (w - z.conj()).norm()).fold(f64::INFINITY, f64::min);
            prop_assert!(nearest < 1e-8, "no partner for {z}");
            prop_assert!(z.re <= 1e-10, "growing mode {z}");
        }
        let sum: C64 = ev.iter().sum();
        prop_assert!((sum - l.trace()).norm() < 1e-9 * l.norm_one());
    }

    #[test]
    fn random_states_stay_physical(seed in any::<u64>(), m0 in 0.0..0.95f64, alpha in 0.0..=1.0f64) {
        let bundle = assemble_liouvillian(&ModelSpec::with_alpha(2, 1.0, m0, alpha)).unwrap();
        let rho0 = random_density(4, seed);
        let tr = evolve_full(&bundle, &rho0, &[0.5, 2.0, 10.0], EvolveOptions::default()).unwrap();
        prop_assert!(tr.diagnostics.max_trace_defect < 1e-12);
        prop_assert!(tr.diagnostics.min_eigenvalue > -1e-10);
    }
}

/// With a common bath the all-up state relaxes inside the symmetric sector,
/// where the Dicke level with `k` flipped spins carries weight `∝ (a0/b0)^k`.
#[test]
fn common_bath_entropy_matches_dicke_populations() {
    for m0 in [0.2, 0.6, 0.9] {
        for n in 1..=4 {
            let rates = RateSet::from_magnetization(1.0, m0, AlphaMatrix::uniform(n, 1.0));
            let bundle = assemble_from_rates(rates, 0.0, 0.0).unwrap();
            let rho0 = InitialState::AllUp.density(n, m0).unwrap();
            let tr = evolve_full(&bundle, &rho0, &[60.0], EvolveOptions::default()).unwrap();
            let ratio = (1.0 - m0) / (1.0 + m0);
            let weights: Vec<f64> = (0..=n).map(|k| ratio.powi(k as i32)).collect();
            let z: f64 = weights.iter().sum();
            let expected: f64 = weights.iter().map(|w| w / z).map(|p| -p * p.ln()).sum();
            let got = von_neumann_entropy(&tr.states[0]).unwrap();
            assert!((got - expected).abs() < 1e-8, "m0 = {m0}, n = {n}: {got} vs {expected}");
        }
    }
}
