//! End-to-end checks of the translation on small worked terms: exact
//! two-step distribution evolution of a pair of internal choices, exact
//! emulation of recursion unfolding, the strong-versus-weak boundary on a
//! communication, and divergence behaviour of a self-calling constant.

use std::cell::RefCell;
use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use poc_core::encode::Encoder;
use poc_core::pccs::{DefEnv, PccsGuard, PccsProcess};
use poc_core::poc::{
    check_divergence_reflection, check_strong_poc, check_weak_poc, src_multistep,
    tgt_multistep, theorem_instance_check, PocFlavor, TargetRel,
};
use poc_core::ppi::{ppi_dist_congruent, ppi_reduce, StepClass};
use poc_core::prob::{Distribution, ExplorationBudget, Prob, SelectorMode};
use poc_core::rel::Status;

fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// An inert, barb-free leaf distinct per identifier.
fn stub(n: &str) -> PccsProcess {
    let chan = format!("stub_{n}");
    PccsProcess::restrict(
        PccsProcess::choice(
            PccsGuard::In(chan.clone()),
            vec![(Prob::one(), PccsProcess::Inert)],
        )
        .unwrap(),
        [chan].into_iter().collect(),
    )
}

fn tau_choice(branches: Vec<(i64, i64, PccsProcess)>) -> PccsProcess {
    PccsProcess::choice(
        PccsGuard::Tau,
        branches
            .into_iter()
            .map(|(n, d, p)| (Prob::new(n, d).unwrap(), p))
            .collect(),
    )
    .unwrap()
}

/// tau.(1/8: P + 7/8: Q) | tau.(3/5: R + 2/5: S1)
fn two_internal_choices() -> PccsProcess {
    PccsProcess::par(
        tau_choice(vec![(1, 8, stub("P")), (7, 8, stub("Q"))]),
        tau_choice(vec![(3, 5, stub("R")), (2, 5, stub("S1"))]),
    )
}

fn weights<T: Ord + Clone>(d: &Distribution<T>) -> Vec<BigRational> {
    let mut w: Vec<BigRational> = d.iter().map(|(_, p)| p.clone()).collect();
    w.sort();
    w
}

#[test]
fn two_internal_choices_evolve_to_the_exact_product_distribution() {
    let s = two_internal_choices();
    let env = DefEnv::new();
    let budget = ExplorationBudget {
        depth: 2,
        mode: SelectorMode::Eager,
        ..Default::default()
    };
    let ms = src_multistep(&s, &env, &budget);
    assert!(ms.complete, "two bounded choices must be fully explorable");

    let half_step = vec![r(1, 8), r(7, 8)];
    let full_step = {
        let mut w = vec![r(3, 40), r(2, 40), r(21, 40), r(14, 40)];
        w.sort();
        w
    };
    assert!(
        ms.dists.iter().any(|d| weights(d) == half_step),
        "after firing the left choice the weights must be exactly 1/8 and 7/8"
    );
    assert!(
        ms.dists.iter().any(|d| weights(d) == full_step),
        "after both choices fire the weights must be the exact products over 40ths"
    );
}

#[test]
fn translation_emulates_both_internal_steps_with_silent_step_classes() {
    let s = two_internal_choices();
    let env = DefEnv::new();
    let enc = Encoder::new();
    let budget = ExplorationBudget {
        depth: 2,
        mode: SelectorMode::Eager,
        ..Default::default()
    };

    let src_ms = src_multistep(&s, &env, &budget);
    let final_src = src_ms
        .dists
        .iter()
        .find(|d| d.len() == 4)
        .expect("the four-point product distribution is reachable");
    let translated = enc.encode_dist(final_src, &env);

    let classes = RefCell::new(BTreeSet::new());
    let tgt_ms = tgt_multistep(&enc.encode_outer(&s, &env), &budget, Some(&classes));
    assert!(
        tgt_ms
            .dists
            .iter()
            .any(|d| ppi_dist_congruent(d, &translated)),
        "the translation must reach a distribution congruent to the translated product"
    );
    assert_eq!(
        classes.into_inner(),
        [StepClass::Tau].into(),
        "every emulating step of a pair of internal choices is silent"
    );
}

#[test]
fn recursive_call_unfolds_in_one_replication_step_with_exact_distributions() {
    let mut env = DefEnv::new();
    env.define("C".into(), vec![], PccsProcess::Success).unwrap();
    let s = PccsProcess::Call("C".into(), vec![]);
    let enc = Encoder::new();

    let t0 = enc.encode_outer(&s, &env);
    let steps = ppi_reduce(&t0);
    assert_eq!(steps.len(), 1, "the translated call has exactly one step");
    let (delta_t, class) = &steps[0];
    assert_eq!(*class, StepClass::Rep);
    assert!(
        delta_t
            .support()
            .all(|p| ppi_reduce(p).is_empty()),
        "the unfolded body is terminal, so the maximal sequence has length one"
    );

    // The source steps to the point distribution on success; its translation
    // must equal the target distribution on the nose, not merely up to
    // structural congruence.
    let report = check_weak_poc(
        &s,
        &env,
        &enc,
        TargetRel::Identity,
        &ExplorationBudget::with_depth(2),
    )
    .unwrap();
    assert_eq!(report.verdict().status, Status::Holds, "{:?}", report.verdict());
    assert_eq!(report.step_classes, vec!["REP".to_string()]);
}

#[test]
fn communication_needs_two_target_steps_so_only_weak_correspondence_holds() {
    let s = PccsProcess::par(
        PccsProcess::choice(
            PccsGuard::In("a".into()),
            vec![(Prob::one(), PccsProcess::Success)],
        )
        .unwrap(),
        PccsProcess::choice(
            PccsGuard::Out("a".into()),
            vec![
                (Prob::new(1, 3).unwrap(), PccsProcess::Success),
                (Prob::new(2, 3).unwrap(), PccsProcess::Inert),
            ],
        )
        .unwrap(),
    );
    let env = DefEnv::new();
    let enc = Encoder::new();

    let strong = check_strong_poc(&s, &env, &enc, TargetRel::Congruence).unwrap();
    assert_eq!(
        strong.verdict().status,
        Status::Fails,
        "a single source communication step cannot be matched by one target step"
    );

    let weak = check_weak_poc(
        &s,
        &env,
        &enc,
        TargetRel::Congruence,
        &ExplorationBudget::with_depth(4),
    )
    .unwrap();
    assert_eq!(weak.verdict().status, Status::Holds, "{:?}", weak.verdict());
}

#[test]
fn self_calling_constant_diverges_on_both_sides() {
    let mut env = DefEnv::new();
    env.define("C".into(), vec![], PccsProcess::Call("C".into(), vec![]))
        .unwrap();
    let s = PccsProcess::Call("C".into(), vec![]);
    let v = check_divergence_reflection(&s, &env, &Encoder::new(), &ExplorationBudget::with_depth(6))
        .unwrap();
    assert_eq!(
        v.status,
        Status::Holds,
        "a diverging translation of a diverging source is faithful: {v:?}"
    );
    assert!(
        v.witness
            .as_deref()
            .is_some_and(|w| w.contains("both sides")),
        "expected an explicit both-sides-diverge witness, got {v:?}"
    );
}

#[test]
fn induced_relation_passes_the_weak_correspondence_battery() {
    let env = DefEnv::new();
    let entries = vec![
        tau_choice(vec![(1, 2, PccsProcess::Success), (1, 2, PccsProcess::Inert)]),
        PccsProcess::par(
            PccsProcess::choice(
                PccsGuard::In("a".into()),
                vec![(Prob::one(), PccsProcess::Success)],
            )
            .unwrap(),
            PccsProcess::choice(
                PccsGuard::Out("a".into()),
                vec![(Prob::one(), PccsProcess::Inert)],
            )
            .unwrap(),
        ),
    ];
    let v = theorem_instance_check(
        &entries,
        &env,
        &Encoder::new(),
        PocFlavor::Weak,
        &ExplorationBudget::with_depth(4),
    )
    .unwrap();
    assert_ne!(v.status, Status::Fails, "{v:?}");
}
