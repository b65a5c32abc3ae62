//! Invariants shared by the property suite and the acceptance gate.

use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::Rng;

use pfg_core::analysis::{partial_trace, peak_element, state_fidelity};
use pfg_core::gradient::{
    coherence_order, continuous_coeff, decompose, discrete_coeff, ensemble_evolve, phase_sum, EnsembleConfig, EvolveOptions,
};
use pfg_core::linalg::{self, hermitian_deviation, kron, max_abs, min_eigenvalue, trace, unitarity_deviation};
use pfg_core::optimizer::{pps_objective, ObjectiveConfig};
use pfg_core::propagator::{matrix_exp_hermitian, propagate, PropagationStrategy};
use pfg_core::random::{haar_density, haar_state, haar_unitary, rng};
use pfg_core::sequence::{
    parse_sequence, serialize_sequence, GradientShape, Rotation, Sample, Schedule, Sequence, SequenceElement, ShapeKind, Targets,
};
use pfg_core::spinsys::{build_ht, Operator, SpinMask, SpinSystem, GAMMA_13C};
use pfg_core::{CMat, C64};

use super::{brute_phase_sum, expm_taylor, partial_trace_loops, pure_overlap};

pub type Property = fn(&mut TestRunner) -> Result<(), String>;

pub const ALL: &[(&str, Property)] = &[
    ("hamiltonians_are_hermitian", hamiltonians_are_hermitian),
    ("propagators_are_unitary", propagators_are_unitary),
    ("matrix_exp_matches_taylor", matrix_exp_matches_taylor),
    ("haar_unitaries_are_unitary", haar_unitaries_are_unitary),
    ("ensemble_evolution_keeps_states_physical", ensemble_evolution_keeps_states_physical),
    ("fidelity_axioms", fidelity_axioms),
    ("partial_trace_matches_loops", partial_trace_matches_loops),
    ("partial_trace_of_products_and_mixtures", partial_trace_of_products_and_mixtures),
    ("parser_round_trip", parser_round_trip),
    ("dephasing_coefficients_bounded_and_conjugate", dephasing_coefficients_bounded_and_conjugate),
    ("phase_sum_matches_brute_force", phase_sum_matches_brute_force),
    ("coherence_orders_antisymmetric_and_recompose", coherence_orders_antisymmetric_and_recompose),
    ("objective_ignores_scan_order", objective_ignores_scan_order),
];

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(Config { cases, failure_persistence: None, ..Config::default() }, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn systems(max_q: usize) -> impl Strategy<Value = SpinSystem> {
    (1..=max_q).prop_flat_map(|q| {
        (prop::collection::vec(-20e3..20e3f64, q), prop::collection::vec(-100.0..100.0f64, q * (q - 1) / 2), prop::bool::ANY).prop_map(
            move |(off, j, hetero)| {
                let mut jm = vec![vec![0.0; q]; q];
                let mut it = j.iter();
                for k in 0..q {
                    for n in k + 1..q {
                        let v = *it.next().unwrap();
                        jm[k][n] = v;
                        jm[n][k] = v;
                    }
                }
                let mut gammas = vec![GAMMA_13C; q];
                if hetero {
                    gammas[q - 1] = 2.675e8;
                }
                SpinSystem::new("prop", off.iter().map(|f| TAU * f).collect(), jm, gammas).unwrap()
            },
        )
    })
}

/// Rank-`1..=4` mixture of Haar states.
pub fn mixed_state(q: usize, seed: u64) -> CMat {
    let mut r = rng(seed, 0);
    let d = linalg::dim_of(q);
    let rank = 1 + (seed % 4) as usize;
    let weights: Vec<f64> = (0..rank).map(|_| r.random::<f64>() + 1e-3).collect();
    let total: f64 = weights.iter().sum();
    let mut rho = CMat::zeros(d, d);
    for w in weights {
        rho += haar_density(d, &mut r) * C64::from(w / total);
    }
    rho
}

fn hamiltonians_are_hermitian(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (systems(4), 0.0..1e5f64, -10.0..10.0f64, any::<u64>(), -0.5..0.5f64, 0.0..0.05f64);
    runner
        .run(&strat, |(sys, omega, phi, bits, g, z)| {
            let mask = SpinMask((bits & ((1u64 << sys.qubits()) - 1)) as _);
            let h = build_ht(&sys, omega, phi, mask, g, z).to_dense();
            let scale = max_abs(&h).max(1.0);
            check(hermitian_deviation(&h) <= 1e-12 * scale, || format!("deviation {}", hermitian_deviation(&h)))
        })
        .map_err(|e| e.to_string())
}

fn schedules(q: usize) -> impl Strategy<Value = Schedule> {
    prop::collection::vec((1e-7..5e-6f64, 0.0..3e5f64, -PI..PI, any::<u64>(), -0.2..0.2f64), 1..6).prop_map(move |v| Schedule {
        samples: v
            .into_iter()
            .map(|(dt, omega, phi, bits, g)| Sample { dt, omega, phi, g, mask: SpinMask((bits & ((1u64 << q) - 1)) as _), is_static: false })
            .collect(),
    })
}

fn propagators_are_unitary(runner: &mut TestRunner) -> Result<(), String> {
    let strat = systems(3).prop_flat_map(|sys| {
        let q = sys.qubits();
        (Just(sys), schedules(q), 0.0..0.05f64)
    });
    runner
        .run(&strat, |(sys, sch, z)| {
            for s in [PropagationStrategy::Exact, PropagationStrategy::BholeJones] {
                let u = propagate(&sys, &sch, z, s).map_err(|e| TestCaseError::fail(e.to_string()))?.to_dense();
                check(unitarity_deviation(&u) < 1e-10, || format!("{}: {}", s.name(), unitarity_deviation(&u)))?;
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn hermitian(q: usize, seed: u64, scale: f64) -> CMat {
    let mut r = rng(seed, 1);
    let d = linalg::dim_of(q);
    let a = CMat::from_fn(d, d, |_, _| C64::new(r.random::<f64>() - 0.5, r.random::<f64>() - 0.5));
    (&a + a.adjoint()) * C64::from(scale)
}

fn matrix_exp_matches_taylor(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (1usize..=3, any::<u64>(), 0.1..50.0f64, -1.0..1.0f64);
    runner
        .run(&strat, |(q, seed, scale, t)| {
            let h = hermitian(q, seed, scale);
            let u = matrix_exp_hermitian(&Operator::Dense(h.clone()), t).map_err(|e| TestCaseError::fail(e.to_string()))?.to_dense();
            let err = max_abs(&(u - expm_taylor(&h, t)));
            check(err < 1e-10, || format!("error {err}"))
        })
        .map_err(|e| e.to_string())
}

fn haar_unitaries_are_unitary(runner: &mut TestRunner) -> Result<(), String> {
    runner
        .run(&(1usize..=5, any::<u64>()), |(q, seed)| {
            let u = haar_unitary(linalg::dim_of(q), &mut rng(seed, 0));
            check(unitarity_deviation(&u) < 1e-10, || format!("deviation {}", unitarity_deviation(&u)))
        })
        .map_err(|e| e.to_string())
}

fn elements(q: usize) -> impl Strategy<Value = Vec<SequenceElement>> {
    let el = prop_oneof![
        (-PI..PI, -PI..PI, 0usize..4, prop::bool::ANY).prop_map(move |(a, p, t, ideal)| {
            let targets = match t {
                0 => Targets::All,
                1 => Targets::Odd,
                2 => Targets::Even,
                _ => Targets::Spins(vec![q]),
            };
            let mut r = Rotation::ideal(a, p, targets);
            if !ideal {
                r.duration = 20e-6;
            }
            SequenceElement::Rotation(r)
        }),
        (0.0..2e-3f64).prop_map(SequenceElement::Delay),
        (0.0..0.05f64, 50e-6..400e-6f64).prop_map(|(amp, tau)| SequenceElement::Gradient(
            GradientShape::with_guard(ShapeKind::Const, amp, tau, 20e-6).unwrap()
        )),
    ];
    prop::collection::vec(el, 1..5)
}

fn ensemble_evolution_keeps_states_physical(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (1usize..=3).prop_flat_map(|q| (Just(q), elements(q), any::<u64>(), 1usize..8));
    runner.run(&strat, |(q, els, seed, n)| {
        let sys = super::system(&[1200.0, -700.0, 300.0][..q], &[55.0, 4.0, 30.0]);
        let rho0 = mixed_state(q, seed);
        let seq = Sequence::single(els).unwrap();
        let cfg = EnsembleConfig::for_system(&sys, n).unwrap();
        let rho = ensemble_evolve(&rho0, &sys, &seq, &cfg, &EvolveOptions::default()).map_err(|e| TestCaseError::fail(e.to_string()))?;
        check(hermitian_deviation(&rho) < 1e-10, || "not Hermitian".into())?;
        check((trace(&rho) - C64::new(1.0, 0.0)).norm() < 1e-10, || format!("trace {}", trace(&rho)))?;
        check(min_eigenvalue(&rho) > -1e-10, || format!("min eigenvalue {}", min_eigenvalue(&rho)))
    })
    .map_err(|e| e.to_string())
}

fn fidelity_axioms(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (1usize..=3, any::<u64>(), any::<u64>());
    runner
        .run(&strat, |(q, a, b)| {
            let fail = |e: pfg_core::Error| TestCaseError::fail(e.to_string());
            let rho = mixed_state(q, a);
            let sigma = mixed_state(q, b);
            let f = state_fidelity(&rho, &sigma).map_err(fail)?;
            check((-1e-12..=1.0 + 1e-10).contains(&f), || format!("out of range {f}"))?;
            let g = state_fidelity(&sigma, &rho).map_err(fail)?;
            check((f - g).abs() < 1e-9, || format!("asymmetric {f} vs {g}"))?;
            let s = state_fidelity(&rho, &rho).map_err(fail)?;
            check((s - 1.0).abs() < 1e-9, || format!("self fidelity {s}"))?;
            let u = haar_unitary(linalg::dim_of(q), &mut rng(a ^ b, 3));
            let h = state_fidelity(&linalg::conjugate(&u, &rho), &linalg::conjugate(&u, &sigma)).map_err(fail)?;
            check((f - h).abs() < 1e-10, || format!("not unitarily invariant {f} vs {h}"))?;
            let psi = haar_state(linalg::dim_of(q), &mut rng(a, 4));
            let phi = haar_state(linalg::dim_of(q), &mut rng(b, 4));
            let p = state_fidelity(&(&psi * psi.adjoint()), &(&phi * phi.adjoint())).map_err(fail)?;
            check((p - pure_overlap(&psi, &phi)).abs() < 1e-9, || format!("pure states {p} vs {}", pure_overlap(&psi, &phi)))
        })
        .map_err(|e| e.to_string())
}

fn subsets(q: usize) -> impl Strategy<Value = Vec<usize>> {
    (1u64..(1 << q)).prop_map(move |bits| (0..q).filter(|k| bits >> k & 1 == 1).collect())
}

fn partial_trace_matches_loops(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (1usize..=4).prop_flat_map(|q| (Just(q), subsets(q), any::<u64>()));
    runner
        .run(&strat, |(q, keep, seed)| {
            let rho = mixed_state(q, seed);
            let r = partial_trace(&rho, &keep, q).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let err = max_abs(&(&r - partial_trace_loops(&rho, &keep, q)));
            check(err < 1e-12, || format!("error {err}"))?;
            check((trace(&r) - C64::new(1.0, 0.0)).norm() < 1e-12, || "trace not preserved".into())
        })
        .map_err(|e| e.to_string())
}

fn partial_trace_of_products_and_mixtures(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (1usize..=2, 1usize..=2, any::<u64>(), any::<u64>(), 0.0..1.0f64);
    runner
        .run(&strat, |(qa, qb, a, b, w)| {
            let fail = |e: pfg_core::Error| TestCaseError::fail(e.to_string());
            let ra = mixed_state(qa, a);
            let rb = mixed_state(qb, b);
            let q = qa + qb;
            let keep_a: Vec<usize> = (0..qa).collect();
            let keep_b: Vec<usize> = (qa..q).collect();
            let prod = kron(&ra, &rb);
            check(max_abs(&(partial_trace(&prod, &keep_a, q).map_err(fail)? - &ra)) < 1e-12, || "first factor".into())?;
            check(max_abs(&(partial_trace(&prod, &keep_b, q).map_err(fail)? - &rb)) < 1e-12, || "second factor".into())?;
            let x = mixed_state(q, a ^ 0x55);
            let y = mixed_state(q, b ^ 0xaa);
            let mix = &x * C64::from(w) + &y * C64::from(1.0 - w);
            let lhs = partial_trace(&mix, &keep_b, q).map_err(fail)?;
            let rhs = partial_trace(&x, &keep_b, q).map_err(fail)? * C64::from(w) + partial_trace(&y, &keep_b, q).map_err(fail)? * C64::from(1.0 - w);
            check(max_abs(&(lhs - rhs)) < 1e-12, || "mixture".into())
        })
        .map_err(|e| e.to_string())
}

fn shape_kinds() -> impl Strategy<Value = ShapeKind> {
    prop_oneof![Just(ShapeKind::Const), Just(ShapeKind::HalfSine), prop::collection::vec(0.0..=1.0f64, 1..6).prop_map(ShapeKind::Sampled),]
}

fn shapes() -> impl Strategy<Value = GradientShape> {
    (shape_kinds(), 0.0..=1.0f64, 1e-6..1e-2f64, 0.0..1e-3f64).prop_map(|(k, amp, tau, guard)| GradientShape::with_guard(k, amp, tau, guard).unwrap())
}

fn targets() -> impl Strategy<Value = Targets> {
    prop_oneof![
        Just(Targets::All),
        Just(Targets::Odd),
        Just(Targets::Even),
        prop::collection::btree_set(1usize..=8, 1..4).prop_map(|s| Targets::Spins(s.into_iter().collect())),
    ]
}

fn rotations() -> impl Strategy<Value = Rotation> {
    (-20.0..20.0f64, -20.0..20.0f64, targets(), prop_oneof![Just(0.0), 1e-7..1e-3f64])
        .prop_map(|(angle, phase, targets, duration)| Rotation { angle, phase, targets, duration })
}

fn any_element() -> impl Strategy<Value = SequenceElement> {
    prop_oneof![
        rotations().prop_map(SequenceElement::Rotation),
        (0.0..1.0f64).prop_map(SequenceElement::Delay),
        shapes().prop_map(SequenceElement::Gradient),
        (rotations(), shapes()).prop_map(|(rotation, shape)| {
            // the pulse spans the active gradient window
            let rotation = Rotation { duration: shape.tau, ..rotation };
            SequenceElement::PulseWithGradient { rotation, shape }
        }),
    ]
}

/// Copy of `e` with the same layout and different numbers.
fn vary(e: &SequenceElement, s: usize) -> SequenceElement {
    let k = s as f64;
    match e {
        SequenceElement::Rotation(r) => SequenceElement::Rotation(Rotation { angle: r.angle + k, ..r.clone() }),
        SequenceElement::Delay(t) => SequenceElement::Delay(t / (1.0 + k)),
        SequenceElement::Gradient(g) => SequenceElement::Gradient(GradientShape { amp: g.amp / (1.0 + k), ..g.clone() }),
        SequenceElement::PulseWithGradient { rotation, shape } => {
            SequenceElement::PulseWithGradient { rotation: Rotation { phase: rotation.phase - k, ..rotation.clone() }, shape: shape.clone() }
        }
    }
}

fn parser_round_trip(runner: &mut TestRunner) -> Result<(), String> {
    let strat = (prop::collection::vec(any_element(), 1..=50), 1usize..=3);
    runner
        .run(&strat, |(els, scans)| {
            let seq = Sequence::multi((0..scans).map(|s| els.iter().map(|e| vary(e, s)).collect()).collect()).unwrap();
            let text = serialize_sequence(&seq);
            let back = parse_sequence(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            check(back == seq, || format!("round trip changed the sequence:\n{text}"))
        })
        .map_err(|e| e.to_string())
}

fn dephasing_coefficients_bounded_and_conjugate(runner: &mut TestRunner) -> Result<(), String> {
    runner
        .run(&(-60.0..60.0f64, 1usize..300), |(theta, n)| {
            let d = discrete_coeff(theta, n);
            let c = continuous_coeff(theta);
            check(d.norm() <= 1.0 + 1e-12, || format!("|discrete| = {}", d.norm()))?;
            check(c.norm() <= 1.0 + 1e-12, || format!("|continuous| = {}", c.norm()))?;
            check((discrete_coeff(-theta, n) - d.conj()).norm() < 1e-12, || "discrete not conjugate-symmetric".into())?;
            check((continuous_coeff(-theta) - c.conj()).norm() < 1e-12, || "continuous not conjugate-symmetric".into())
        })
        .map_err(|e| e.to_string())
}

fn phase_sum_matches_brute_force(runner: &mut TestRunner) -> Result<(), String> {
    runner
        .run(&(-5.0..5.0f64, -3.0..3.0f64, -5.0..5.0f64, 1usize..200), |(p0, d, x, m)| {
            let err = (phase_sum(p0, d, x, m) - brute_phase_sum(p0, d, x, m)).norm();
            check(err < 1e-9 * m as f64, || format!("error {err}"))
        })
        .map_err(|e| e.to_string())
}

fn coherence_orders_antisymmetric_and_recompose(runner: &mut TestRunner) -> Result<(), String> {
    runner
        .run(&(1usize..=4, any::<u64>()), |(q, seed)| {
            let d = linalg::dim_of(q);
            for v in 0..d {
                for w in 0..d {
                    let c = coherence_order(v, w, q);
                    check(c == -coherence_order(w, v, q) && c.unsigned_abs() as usize <= q, || format!("order of ({v},{w})"))?;
                }
            }
            let rho = mixed_state(q, seed);
            let dec = decompose(&rho, q).map_err(|e| TestCaseError::fail(e.to_string()))?;
            check(dec.recompose() == rho, || "recomposition differs".into())
        })
        .map_err(|e| e.to_string())
}

fn objective_ignores_scan_order(runner: &mut TestRunner) -> Result<(), String> {
    use pfg_core::gradient::Ensemble;
    use pfg_core::optimizer::{multiscan_state, PpsAnsatz, BLOCK_PARAMS};
    let sys = super::system(&[800.0, -350.0], &[60.0]);
    let ansatz = PpsAnsatz::new(&sys, 2, 3).unwrap();
    let cfg = ObjectiveConfig::new(2, 0.3, 1, 0).unwrap();
    let ens = Ensemble::Discrete(EnsembleConfig::for_system(&sys, 4).unwrap());
    let half = 3 * BLOCK_PARAMS;
    runner
        .run(&any::<u64>(), |seed| {
            let p = ansatz.random_point(&mut rng(seed, 0));
            let mut swapped = p[half..].to_vec();
            swapped.extend_from_slice(&p[..half]);
            let a = multiscan_state(&ansatz, &p, &sys, &ens).unwrap();
            let b = multiscan_state(&ansatz, &swapped, &sys, &ens).unwrap();
            let (oa, ob) = (pps_objective(&a, &cfg).unwrap(), pps_objective(&b, &cfg).unwrap());
            check((oa - ob).abs() < 1e-12, || format!("{oa} vs {ob}"))?;
            check(peak_element(&a) <= 1.0 + 1e-9, || format!("peak {} above Q/2", peak_element(&a)))
        })
        .map_err(|e| e.to_string())
}
