//! Grammar round-trips: pretty-printing then re-parsing yields the original
//! term, on handwritten examples and on randomly generated syntax trees.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use poc_cli::corpus::load_corpus;
use poc_cli::parse::{parse_pccs, parse_ppi, stub_leaf};
use poc_cli::pretty::{pretty_pccs, pretty_ppi, pretty_program};
use poc_core::pccs::{PccsGuard, PccsProcess, RenamingFn};
use poc_core::ppi::PpiProcess;
use poc_core::prob::Prob;
use proptest::prelude::*;

// ---------------------------------------------------------------------------
// Handwritten cases
// ---------------------------------------------------------------------------

#[test]
fn parses_the_two_choice_example_with_stub_leaves() {
    let (term, env) = parse_pccs("tau.(1/8: P + 7/8: Q) | tau.(3/5: R + 2/5: S1)").unwrap();
    assert!(env.is_empty());
    let expected = PccsProcess::par(
        PccsProcess::choice(
            PccsGuard::Tau,
            vec![
                (Prob::new(1, 8).unwrap(), stub_leaf("P")),
                (Prob::new(7, 8).unwrap(), stub_leaf("Q")),
            ],
        )
        .unwrap(),
        PccsProcess::choice(
            PccsGuard::Tau,
            vec![
                (Prob::new(3, 5).unwrap(), stub_leaf("R")),
                (Prob::new(2, 5).unwrap(), stub_leaf("S1")),
            ],
        )
        .unwrap(),
    );
    assert_eq!(term, expected);
    assert_eq!(pretty_pccs(&term), "tau.(1/8: P + 7/8: Q) | tau.(3/5: R + 2/5: S1)");
}

#[test]
fn parses_a_definition_followed_by_a_call() {
    let (term, env) = parse_pccs("def C() = ok  C<>").unwrap();
    assert_eq!(term, PccsProcess::Call("C".into(), vec![]));
    assert_eq!(env.lookup("C"), Some(&(vec![], PccsProcess::Success)));
    assert_eq!(pretty_program(&term, &env), "def C() = ok\nC<>");
}

#[test]
fn rejects_probabilities_that_do_not_sum_to_one() {
    let err = parse_pccs("a.(1/2: ok + 1/3: 0)").unwrap_err();
    assert_eq!((err.line, err.col), (1, 1));
    assert!(err.msg.contains("sum"), "unexpected message: {}", err.msg);

    let err = parse_ppi("x!{1/2 1(): 0}").unwrap_err();
    assert!(err.msg.contains("1/2"), "unexpected message: {}", err.msg);
}

#[test]
fn reports_line_and_column_of_syntax_errors() {
    let err = parse_pccs("tau.(1: ok) |\n tau.(1: ok").unwrap_err();
    assert_eq!(err.line, 2);
    assert!(err.col > 1);
}

#[test]
fn source_names_cannot_use_the_reserved_prefix() {
    assert!(parse_pccs("#i0.(1: 0)").is_err());
    // The target grammar does accept machine-generated names.
    parse_ppi("new #i0. (#i0!{1 1(): ok} | #i0?{1(): 0})").unwrap();
}

#[test]
fn parses_the_selection_skeleton_with_a_plain_partner() {
    let p = parse_ppi("new t.( t!{1/8 1(): P, 7/8 2(): Q} | t?{1(): done} )").unwrap();
    let printed = pretty_ppi(&p);
    assert_eq!(parse_ppi(&printed).unwrap(), p);
}

#[test]
fn corpus_loader_rejects_malformed_files() {
    assert!(load_corpus("").is_err());
    assert!(load_corpus("stray text\n=== a\n0\n").is_err());
    assert!(load_corpus("=== a\n0\n=== a\nok\n").is_err());
    assert!(load_corpus("=== open-def\ndef C(x) = 'y.(1: 0)\nC<a>\n").is_err());
    let entries = load_corpus("=== a\n0\n\n=== b\ndef C() = ok\nC<>\n").unwrap();
    assert_eq!(entries.len(), 2);
}

#[test]
fn translated_output_reparses() {
    let (term, env) = parse_pccs("a.(1: ok) | 'a.(1/3: ok + 2/3: 0)").unwrap();
    let enc = poc_core::encode::Encoder::new();
    let t = enc.encode_outer(&term, &env);
    assert_eq!(parse_ppi(&pretty_ppi(&t)).unwrap(), t);
}

// ---------------------------------------------------------------------------
// Generated cases
// ---------------------------------------------------------------------------

fn arb_prob_weights(n: usize) -> impl Strategy<Value = Vec<Prob>> {
    prop::collection::vec(1u32..5, n).prop_map(|ws| {
        let total: u32 = ws.iter().sum();
        ws.into_iter()
            .map(|w| {
                Prob::from_ratio(BigRational::new(BigInt::from(w), BigInt::from(total))).unwrap()
            })
            .collect()
    })
}

fn arb_lname() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "c", "ch1", "x_y"]).prop_map(String::from)
}

fn arb_pccs() -> impl Strategy<Value = PccsProcess> {
    let leaf = prop_oneof![
        Just(PccsProcess::Inert),
        Just(PccsProcess::Success),
        prop::sample::select(vec!["P", "Q", "R2"]).prop_map(stub_leaf),
        (
            prop::sample::select(vec!["C", "D1"]),
            prop::collection::vec(arb_lname(), 0..3)
        )
            .prop_map(|(c, args)| PccsProcess::Call(c.into(), args)),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        let guard = prop_oneof![
            Just(PccsGuard::Tau),
            arb_lname().prop_map(PccsGuard::In),
            arb_lname().prop_map(PccsGuard::Out),
        ];
        prop_oneof![
            (guard, prop::collection::vec(inner.clone(), 1..4)).prop_flat_map(|(g, bodies)| {
                let n = bodies.len();
                arb_prob_weights(n).prop_map(move |ws| {
                    PccsProcess::Choice(
                        g.clone(),
                        ws.into_iter().zip(bodies.clone()).collect(),
                    )
                })
            }),
            (inner.clone(), inner.clone()).prop_map(|(l, r)| PccsProcess::par(l, r)),
            (inner.clone(), prop::collection::btree_set(arb_lname(), 1..3))
                .prop_map(|(p, names)| PccsProcess::restrict(p, names)),
            (inner, prop::collection::btree_map(arb_lname(), arb_lname(), 1..3))
                .prop_map(|(p, map)| PccsProcess::relabel(p, RenamingFn::new(map))),
        ]
    })
}

fn arb_tname() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["x", "y", "s_a", "#i0", "#t1", "#C_C"]).prop_map(String::from)
}

fn arb_ppi() -> impl Strategy<Value = PpiProcess> {
    let leaf = prop_oneof![
        Just(PpiProcess::Nil),
        Just(PpiProcess::Success),
        prop::sample::select(vec!["done", "P"])
            .prop_map(|n| poc_cli::parse::ppi_stub_leaf(n)),
    ];
    leaf.prop_recursive(3, 24, 4, |inner| {
        prop_oneof![
            // Branching input with distinct indices.
            (
                arb_tname(),
                prop::collection::btree_map(
                    1u32..4,
                    (prop::collection::vec(arb_tname(), 0..2), inner.clone()),
                    1..3
                )
            )
                .prop_map(|(x, brs)| PpiProcess::BranchIn(x, brs)),
            // Selecting output with weights summing to one.
            (
                arb_tname(),
                prop::collection::btree_map(
                    1u32..4,
                    prop::collection::vec(arb_tname(), 0..2).prop_flat_map({
                        let inner = inner.clone();
                        move |args| (Just(args), inner.clone())
                    }),
                    1..3
                )
            )
                .prop_flat_map(|(x, brs)| {
                    let n = brs.len();
                    arb_prob_weights(n).prop_map(move |ws| {
                        let branches: BTreeMap<_, _> = brs
                            .clone()
                            .into_iter()
                            .zip(ws)
                            .map(|((i, (args, body)), w)| (i, (w, args, body)))
                            .collect();
                        PpiProcess::SelectOut(x.clone(), branches)
                    })
                }),
            (arb_tname(), prop::collection::vec(arb_tname(), 0..2), inner.clone())
                .prop_map(|(x, params, body)| PpiProcess::rep_in(x, params, body)),
            (arb_tname(), prop::collection::vec(arb_tname(), 0..2), inner.clone())
                .prop_map(|(x, args, body)| PpiProcess::out_prefix(x, args, body)),
            (arb_tname(), inner.clone()).prop_map(|(x, body)| PpiProcess::restrict(x, body)),
            (inner.clone(), inner).prop_map(|(l, r)| PpiProcess::par(l, r)),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn source_terms_round_trip(t in arb_pccs()) {
        let printed = pretty_pccs(&t);
        let (reparsed, env) = parse_pccs(&printed)
            .unwrap_or_else(|e| panic!("cannot reparse '{printed}': {e}"));
        prop_assert!(env.is_empty());
        prop_assert_eq!(reparsed, t);
    }

    #[test]
    fn target_terms_round_trip(t in arb_ppi()) {
        let printed = pretty_ppi(&t);
        let reparsed = parse_ppi(&printed)
            .unwrap_or_else(|e| panic!("cannot reparse '{printed}': {e}"));
        prop_assert_eq!(reparsed, t);
    }
}
