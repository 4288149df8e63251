use num_complex::Complex64 as C64;
use proptest::prelude::*;
use relfacts::facts::interference_witness;
use relfacts::perspectives::*;
use relfacts::qstate::*;
use relfacts::rng::{derive_seed, SplitMix64};
use relfacts::tensor::{kron, CMatrix, CVector};
use relfacts::Error;

const A: f64 = 0.6;
const B: f64 = 0.8;

fn lab_registry() -> SystemRegistry {
    SystemRegistry::from_pairs(&[("s", 2), ("O", 3)]).unwrap()
}

fn lab_state(a: f64, b: f64) -> State {
    product_state(&lab_registry(), &[CVector::from_real(&[a, b]).unwrap(), CVector::basis(3, 0)]).unwrap()
}

fn ket(dim: usize, entries: &[(usize, f64)]) -> CVector {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    for &(i, x) in entries {
        v[i] = C64::new(x, 0.0);
    }
    CVector::new(v).unwrap()
}

fn sz() -> Observable {
    Observable::spin_z("Sz", "s")
}

fn spin_ledger(observer: &str, a: f64, b: f64, seed: u64) -> PerspectiveLedger {
    let reg = SystemRegistry::from_pairs(&[("s", 2)]).unwrap();
    PerspectiveLedger::new(observer, State::pure(reg, CVector::from_real(&[a, b]).unwrap()).unwrap(), seed).unwrap()
}

#[test]
fn premeasure_writes_pointer_branches() {
    let out = premeasure(&lab_state(A, B), "s", "O", &sz(), 0).unwrap();
    // |s,O⟩ has index 3s+O; ↑ is s=0 and lands on Φ1, ↓ on Φ2
    let expected = ket(6, &[(1, A), (5, B)]);
    assert!(out.ket().unwrap().max_abs_diff(&expected) < 1e-15);
    assert!(out.invariant_error() <= 1e-10);

    let eigen = premeasure(&lab_state(1.0, 0.0), "s", "O", &sz(), 0).unwrap();
    assert!(eigen.ket().unwrap().max_abs_diff(&ket(6, &[(1, 1.0)])) < 1e-15);
}

#[test]
fn premeasure_preconditions() {
    let busy = product_state(&lab_registry(), &[CVector::from_real(&[A, B]).unwrap(), CVector::basis(3, 1)]).unwrap();
    assert!(matches!(premeasure(&busy, "s", "O", &sz(), 0), Err(Error::Precondition(_))));
    let small = SystemRegistry::from_pairs(&[("s", 2), ("O", 2)]).unwrap();
    let st = product_state(&small, &[CVector::from_real(&[A, B]).unwrap(), CVector::basis(2, 0)]).unwrap();
    assert!(matches!(premeasure(&st, "s", "O", &sz(), 0), Err(Error::Sizing(_))));
}

#[test]
fn pointer_mapping_skips_ready() {
    assert_eq!(pointer_indices(2, 3, 0).unwrap(), vec![2, 1]);
    assert_eq!(pointer_indices(2, 3, 2).unwrap(), vec![1, 0]);
    assert_eq!(pointer_indices(3, 4, 1).unwrap(), vec![3, 2, 0]);
}

#[test]
fn measure_examples() {
    let up = spin_ledger("O", 1.0, 0.0, 0);
    let (l, f) = measure(&up, &sz(), &mut SplitMix64::new(1)).unwrap();
    assert_eq!(f.outcome, "↑");
    assert_eq!(f.probability, 1.0);
    assert_eq!(l.state().ket().unwrap(), &CVector::basis(2, 0));

    // ↓ occupies [0, 0.64) and ↑ [0.64, 1) in ascending-eigenvalue order
    let psi = spin_ledger("O", A, B, 0);
    let (l, f) = measure_with_draw(&psi, &sz(), 0.9).unwrap();
    assert_eq!(f.outcome, "↑");
    assert!((f.probability - A * A).abs() < 1e-15);
    assert!(l.state().ket().unwrap().max_abs_diff(&CVector::basis(2, 0)) < 1e-15);
    let (l2, f2) = measure_with_draw(&l, &sz(), 0.1).unwrap();
    assert_eq!(f2.outcome, "↑");
    assert_eq!(f2.probability, 1.0);
    assert_eq!((f.step, f2.step), (0, 1));
    assert_eq!(l2.facts().len(), 2);

    let (_, down) = measure_with_draw(&psi, &sz(), 0.1).unwrap();
    assert_eq!(down.outcome, "↓");
    assert!((down.probability - B * B).abs() < 1e-15);
}

#[test]
fn measure_on_mixed_state() {
    let reg = SystemRegistry::from_pairs(&[("s", 2)]).unwrap();
    let rho = CMatrix::from_real(2, 2, &[0.25, 0.1, 0.1, 0.75]).unwrap();
    let l = PerspectiveLedger::new("O", State::mixed(reg, rho).unwrap(), 0).unwrap();
    let (next, f) = measure_with_draw(&l, &sz(), 0.5).unwrap();
    assert_eq!(f.outcome, "↓");
    assert!((f.probability - 0.75).abs() < 1e-15);
    assert!(
        next.state().density_matrix().max_abs_diff(&CMatrix::from_real(2, 2, &[0.0, 0.0, 0.0, 1.0]).unwrap()) < 1e-15
    );
}

#[test]
fn observer_never_describes_itself() {
    assert!(matches!(PerspectiveLedger::new("O", lab_state(A, B), 0), Err(Error::Usage(_))));
}

#[test]
fn unitary_view_examples() {
    let w = PerspectiveLedger::new("W", lab_state(A, B), 0).unwrap();
    let step = EvolutionStep::Premeasure { system: "s".into(), apparatus: "O".into(), observable: sz(), ready: 0 };
    let viewed = unitary_view(&w, std::slice::from_ref(&step)).unwrap();
    assert!(viewed.facts().is_empty());
    assert!(viewed.state().ket().unwrap().max_abs_diff(&ket(6, &[(1, A), (5, B)])) < 1e-15);

    let identity = EvolutionStep::Unitary { targets: vec!["O".into()], matrix: CMatrix::identity(3) };
    assert_eq!(unitary_view(&w, &[identity]).unwrap().state(), w.state());
    assert_eq!(unitary_view(&w, &[]).unwrap(), w);

    let not_unitary =
        EvolutionStep::Unitary { targets: vec!["s".into()], matrix: CMatrix::identity(2).scale(C64::new(2.0, 0.0)) };
    assert!(matches!(unitary_view(&w, &[not_unitary]), Err(Error::Contract(_))));
    let unknown = EvolutionStep::Unitary { targets: vec!["E".into()], matrix: CMatrix::identity(2) };
    assert!(matches!(unitary_view(&w, &[unknown]), Err(Error::Usage(_))));

    let (measured, _) = measure_with_draw(&w, &sz(), 0.5).unwrap();
    assert!(matches!(unitary_view(&measured, &[step]), Err(Error::Precondition(_))));
}

#[test]
fn two_premeasurements_match_matrix_product() {
    let reg = SystemRegistry::from_pairs(&[("s", 2), ("O", 3), ("P", 3)]).unwrap();
    let spin = CVector::from_real(&[A, B]).unwrap();
    let psi = product_state(&reg, &[spin, CVector::basis(3, 0), CVector::basis(3, 0)]).unwrap();
    let w = PerspectiveLedger::new("W", psi.clone(), 0).unwrap();
    let steps = [
        EvolutionStep::Premeasure { system: "s".into(), apparatus: "O".into(), observable: sz(), ready: 0 },
        EvolutionStep::Premeasure { system: "s".into(), apparatus: "P".into(), observable: sz(), ready: 0 },
    ];
    let out = unitary_view(&w, &steps).unwrap();

    // oracle: explicit isometries built from kron, composed by matrix product
    let p_up = CMatrix::from_real(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
    let p_down = CMatrix::from_real(2, 2, &[0.0, 0.0, 0.0, 1.0]).unwrap();
    let shift = |to: usize| CMatrix::outer(&CVector::basis(3, to), &CVector::basis(3, 0));
    let id3 = CMatrix::identity(3);
    let u1 = kron(&kron(&p_up, &shift(1)).unwrap(), &id3)
        .unwrap()
        .add(&kron(&kron(&p_down, &shift(2)).unwrap(), &id3).unwrap())
        .unwrap();
    let u2 = kron(&kron(&p_up, &id3).unwrap(), &shift(1))
        .unwrap()
        .add(&kron(&kron(&p_down, &id3).unwrap(), &shift(2)).unwrap())
        .unwrap();
    let expected = u2.matmul(&u1).unwrap().apply(psi.ket().unwrap()).unwrap();
    assert!(out.state().ket().unwrap().max_abs_diff(&expected) < 1e-15);
    // a|↑,Φ1,Φ1⟩ + b|↓,Φ2,Φ2⟩
    assert!(expected.max_abs_diff(&ket(18, &[(4, A), (9 + 8, B)])) < 1e-15);
}

#[test]
fn perspectives_diverge_on_wigner_scenario() {
    let friend = spin_ledger("O", A, B, derive_seed(42, 0));
    let (friend, fact) = measure(&friend, &sz(), &mut SplitMix64::new(friend.rng_seed())).unwrap();
    let post = friend.state().ket().unwrap();
    let label_index = if fact.outcome == "↑" { 0 } else { 1 };
    assert!(post.max_abs_diff(&CVector::basis(2, label_index)) < 1e-15);

    let w = PerspectiveLedger::new("W", lab_state(A, B), derive_seed(42, 1)).unwrap();
    let step = EvolutionStep::Premeasure { system: "s".into(), apparatus: "O".into(), observable: sz(), ready: 0 };
    let w = unitary_view(&w, &[step]).unwrap();
    let pointer = Observable::pointer("L", "O", 3);
    let witness = interference_witness(w.state(), &pointer.embedded_projectors(w.state().registry()).unwrap()).unwrap();
    assert!(witness > 0.5, "witness {witness}");
}

fn wigner_trial(seed: u64) -> (FactRecord, CrossCheck, f64) {
    let friend = spin_ledger("O", A, B, derive_seed(seed, 0));
    let (_, fact) = measure(&friend, &sz(), &mut SplitMix64::new(friend.rng_seed())).unwrap();
    let w = PerspectiveLedger::new("W", lab_state(A, B), derive_seed(seed, 1)).unwrap();
    let step = EvolutionStep::Premeasure { system: "s".into(), apparatus: "O".into(), observable: sz(), ready: 0 };
    let w = unitary_view(&w, &[step]).unwrap();
    let pointer = pointer_observable("O.pointer", &Subsystem::new("O", 3), 0, &sz()).unwrap();
    let corr = correlation_probability(w.state(), &pointer, &sz()).unwrap();
    let (_, check) = cross_check(&w, &fact, &pointer, Some(&sz()), &mut SplitMix64::new(w.rng_seed())).unwrap();
    (fact, check, corr)
}

#[test]
fn thousand_seeded_cross_checks() {
    let trials = 1000;
    let mut agree = 0;
    let mut ups = 0;
    for seed in 0..trials {
        let (fact, check, corr) = wigner_trial(seed);
        assert!((corr - 1.0).abs() <= 1e-12);
        agree += usize::from(check.agreement());
        ups += usize::from(fact.outcome == "↑");
    }
    assert_eq!(agree, trials as usize);
    let freq = ups as f64 / trials as f64;
    let sigma = (A * A * B * B / trials as f64).sqrt();
    assert!((freq - A * A).abs() <= 3.0 * sigma, "frequency {freq}");
}

#[test]
fn cross_check_requires_matching_labels() {
    let (fact, _, _) = wigner_trial(1);
    let w = PerspectiveLedger::new("W", lab_state(A, B), 0).unwrap();
    let plain = Observable::pointer("L", "O", 3);
    let err = cross_check(&w, &fact, &plain, None, &mut SplitMix64::new(0)).unwrap_err();
    assert!(matches!(err, Error::Configuration(_)));
}

#[test]
fn cross_check_conditioned_on_friend_branch() {
    // W reads the pointer on the ↑ branch, then s reads ↑ with certainty
    let w = PerspectiveLedger::new("W", lab_state(A, B), 0).unwrap();
    let step = EvolutionStep::Premeasure { system: "s".into(), apparatus: "O".into(), observable: sz(), ready: 0 };
    let w = unitary_view(&w, &[step]).unwrap();
    let friend = spin_ledger("O", A, B, 0);
    let (_, fact) = measure_with_draw(&friend, &sz(), 0.95).unwrap();
    assert_eq!(fact.outcome, "↑");
    let pointer = pointer_observable("O.pointer", &Subsystem::new("O", 3), 0, &sz()).unwrap();
    let (_, check) = cross_check(&w, &fact, &pointer, Some(&sz()), &mut SplitMix64::new(3)).unwrap();
    let sys = check.system_fact.unwrap();
    assert_eq!(sys.outcome, "↑");
    assert_eq!(sys.probability, 1.0);
    assert_eq!(check.status, CrossCheckStatus::Agree);
}

#[test]
fn degenerate_state_is_rejected() {
    let reg = SystemRegistry::from_pairs(&[("s", 2)]).unwrap();
    let l = PerspectiveLedger::new("O", State::pure(reg, CVector::basis(2, 0)).unwrap(), 0).unwrap();
    let zero = Observable::new("Z", vec![Subsystem::new("s", 2)], CMatrix::identity(2), None).unwrap();
    assert!(measure(&l, &zero, &mut SplitMix64::new(0)).is_ok());
    assert!(matches!(measure_with_draw(&l, &sz(), 1.0), Err(Error::Usage(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn collapse_is_idempotent(seed in any::<u64>(), theta in 0.0f64..std::f64::consts::PI) {
        let l = spin_ledger("O", theta.cos(), theta.sin(), seed);
        let mut r = SplitMix64::new(seed);
        if let Ok((l1, f1)) = measure(&l, &sz(), &mut r) {
            let (l2, f2) = measure(&l1, &sz(), &mut r).unwrap();
            prop_assert_eq!(&f1.outcome, &f2.outcome);
            prop_assert!((f2.probability - 1.0).abs() <= 1e-12);
            prop_assert!(l2.state().invariant_error() <= 1e-10);
        }
    }

    #[test]
    fn seeded_runs_are_identical(seed in any::<u64>()) {
        prop_assert_eq!(wigner_trial(seed), wigner_trial(seed));
    }
}
