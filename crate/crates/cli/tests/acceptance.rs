//! The acceptance battery: ten criteria, each reported as a single PASS or
//! FAIL line (run with `--nocapture` to see the lines).

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::process::Command;
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_rational::BigRational;
use poc_cli::corpus::{load_corpus, CorpusEntry};
use poc_cli::parse::parse_pccs;
use poc_core::encode::{Encoder, EncoderMutation};
use poc_core::pccs::{pccs_reduce, DefEnv, PccsProcess};
use poc_core::poc::{
    check_divergence_reflection, check_strong_poc, check_success_sensitiveness, check_weak_poc,
    src_multistep, tgt_multistep, theorem_instance_check, PocFlavor, TargetRel,
};
use poc_core::ppi::{ppi_dist_congruent, ppi_reduce, StepClass};
use poc_core::prob::{
    lift_check, lift_check_bruteforce, Distribution, ExplorationBudget, SelectorMode,
};
use poc_core::rel::{Relation, Status};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const TWO_CHOICES: &str = "tau.(1/8: P + 7/8: Q) | tau.(3/5: R + 2/5: S1)";
const COMMUNICATION: &str = "a.(1: ok) | 'a.(1/3: ok + 2/3: 0)";

fn corpus_path() -> String {
    format!("{}/../../corpus/standard.corpus", env!("CARGO_MANIFEST_DIR"))
}

fn corpus() -> Vec<CorpusEntry> {
    let text = std::fs::read_to_string(corpus_path()).expect("corpus file readable");
    load_corpus(&text).expect("corpus parses")
}

fn criterion(n: u32, desc: &str, ok: bool, detail: String) {
    if ok {
        println!("PASS criterion {n}: {desc}");
    } else {
        println!("FAIL criterion {n}: {desc} — {detail}");
        panic!("criterion {n} failed: {detail}");
    }
}

fn rational(s: &str) -> BigRational {
    s.parse().expect("rational literal")
}

fn weight_multiset(values: &[&str]) -> Vec<BigRational> {
    let mut w: Vec<BigRational> = values.iter().map(|s| rational(s)).collect();
    w.sort();
    w
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_01_two_choice_source_distributions() {
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_pocwb"))
        .args(["steps", "--depth", "2", "--format", "records", TWO_CHOICES])
        .output()
        .expect("binary runs");
    let elapsed = start.elapsed();
    let stdout = String::from_utf8(out.stdout).expect("utf-8 output");

    let mut by_depth: Vec<(u64, Vec<BigRational>)> = Vec::new();
    for line in stdout.lines() {
        let v: serde_json::Value = serde_json::from_str(line).expect("record is JSON");
        let depth = v["depth"].as_u64().expect("depth field");
        let mut ws: Vec<BigRational> = v["dist"]
            .as_array()
            .expect("dist field")
            .iter()
            .map(|pair| rational(pair[0].as_str().expect("weight string")))
            .collect();
        ws.sort();
        by_depth.push((depth, ws));
    }

    let first = weight_multiset(&["1/8", "7/8"]);
    let second = weight_multiset(&["3/40", "2/40", "21/40", "14/40"]);
    let has_first = by_depth.iter().any(|(d, w)| *d == 1 && *w == first);
    let depth2: Vec<&Vec<BigRational>> =
        by_depth.iter().filter(|(d, _)| *d == 2).map(|(_, w)| w).collect();
    let ok = out.status.code() == Some(0)
        && has_first
        && depth2.len() == 1
        && *depth2[0] == second
        && elapsed < Duration::from_secs(1);
    criterion(
        1,
        "two parallel internal choices step through the exact half-way and product distributions",
        ok,
        format!("exit={:?} elapsed={elapsed:?} output:\n{stdout}", out.status.code()),
    );
}

#[test]
fn criterion_02_two_choice_target_emulation_is_silent() {
    let start = Instant::now();
    let (s, env) = parse_pccs(TWO_CHOICES).expect("example parses");
    let enc = Encoder::new();
    let budget = ExplorationBudget {
        depth: 2,
        mode: SelectorMode::Eager,
        ..Default::default()
    };
    let src_ms = src_multistep(&s, &env, &budget);
    let final_src = src_ms.dists.iter().find(|d| d.len() == 4);
    let classes = RefCell::new(BTreeSet::new());
    let tgt_ms = tgt_multistep(&enc.encode_outer(&s, &env), &budget, Some(&classes));
    let matched = final_src.is_some_and(|d| {
        let translated = enc.encode_dist(d, &env);
        tgt_ms.dists.iter().any(|t| ppi_dist_congruent(t, &translated))
    });
    let all_tau = classes.into_inner() == [StepClass::Tau].into();
    let elapsed = start.elapsed();
    criterion(
        2,
        "the translation reaches the translated product distribution in silent-classified steps",
        matched && all_tau && elapsed < Duration::from_secs(1),
        format!("matched={matched} all_tau={all_tau} elapsed={elapsed:?}"),
    );
}

#[test]
fn criterion_03_recursion_unfolds_in_one_exact_replication_step() {
    let start = Instant::now();
    let (s, env) = parse_pccs("def C() = ok  C<>").expect("example parses");
    let enc = Encoder::new();
    let t0 = enc.encode_outer(&s, &env);
    let steps = ppi_reduce(&t0);
    let one_maximal = steps.len() == 1
        && steps
            .first()
            .is_some_and(|(d, _)| d.support().all(|p| ppi_reduce(p).is_empty()));
    let rep_classified = steps.first().is_some_and(|(_, c)| *c == StepClass::Rep);
    let exact = {
        let src_dists = pccs_reduce(&s, &env).expect("source reduces");
        src_dists.len() == 1
            && steps
                .first()
                .is_some_and(|(d, _)| *d == enc.encode_dist(&src_dists[0], &env))
    };
    let elapsed = start.elapsed();
    criterion(
        3,
        "the translated constant call has one maximal run, one replication step, and an exactly equal distribution",
        one_maximal && rep_classified && exact && elapsed < Duration::from_secs(1),
        format!("one_maximal={one_maximal} rep={rep_classified} exact={exact} elapsed={elapsed:?}"),
    );
}

#[test]
fn criterion_04_suite_holds_on_the_corpus() {
    let entries = corpus();
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_pocwb"))
        .args(["suite", &corpus_path(), "--depth", "4", "--format", "records"])
        .output()
        .expect("binary runs");
    let elapsed = start.elapsed();
    let stdout = String::from_utf8(out.stdout).expect("utf-8 output");
    let statuses: Vec<String> = stdout
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).expect("record is JSON");
            v["status"].as_str().expect("status field").to_string()
        })
        .collect();
    let ok = out.status.code() == Some(0)
        && entries.len() >= 20
        && !statuses.is_empty()
        && statuses.iter().all(|s| s == "holds")
        && elapsed < Duration::from_secs(60);
    criterion(
        4,
        "the full property battery holds on a corpus of at least twenty terms",
        ok,
        format!(
            "exit={:?} entries={} verdicts={} elapsed={elapsed:?}",
            out.status.code(),
            entries.len(),
            statuses.len()
        ),
    );
}

#[test]
fn criterion_05_strong_fails_but_weak_holds_on_communication() {
    let (s, env) = parse_pccs(COMMUNICATION).expect("fixture parses");
    let enc = Encoder::new();
    let strong = check_strong_poc(&s, &env, &enc, TargetRel::Congruence)
        .expect("fixture validates")
        .verdict();
    let weak = check_weak_poc(
        &s,
        &env,
        &enc,
        TargetRel::Congruence,
        &ExplorationBudget::with_depth(4),
    )
    .expect("fixture validates")
    .verdict();
    criterion(
        5,
        "a communication fails the single-step correspondence but passes the multi-step one",
        strong.status == Status::Fails && weak.status == Status::Holds,
        format!("strong={:?} weak={:?}", strong.status, weak.status),
    );
}

// Random (relation, distribution, distribution) instances shared by the two
// lifting criteria.
const UNIVERSE: u32 = 5;

fn random_dist(rng: &mut ChaCha8Rng, max_support: usize, max_den: u64) -> Distribution<u32> {
    let support = rng.gen_range(1..=max_support);
    let den = rng.gen_range(support as u64..=max_den.max(support as u64));
    let mut cuts: BTreeSet<u64> = BTreeSet::new();
    while cuts.len() < support - 1 {
        cuts.insert(rng.gen_range(1..den));
    }
    let mut bounds: Vec<u64> = Vec::with_capacity(support + 1);
    bounds.push(0);
    bounds.extend(cuts);
    bounds.push(den);
    let parts = bounds
        .windows(2)
        .map(|w| {
            let point = rng.gen_range(0..UNIVERSE);
            let weight = BigRational::new(BigInt::from(w[1] - w[0]), BigInt::from(den));
            (point, weight)
        })
        .collect::<Vec<_>>();
    Distribution::from_parts(parts).expect("weights sum to 1 by construction")
}

fn random_relation(rng: &mut ChaCha8Rng, density: f64) -> Relation<u32> {
    let mut r = Relation::new();
    for a in 0..UNIVERSE {
        for b in 0..UNIVERSE {
            if rng.gen_bool(density) {
                r.insert(a, b);
            }
        }
    }
    r
}

#[test]
fn criterion_06_lifting_agrees_with_the_bruteforce_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x11F7);
    let mut disagreements = 0usize;
    for _ in 0..500 {
        let r = random_relation(&mut rng, 0.4);
        let delta = random_dist(&mut rng, 5, 12);
        let theta = random_dist(&mut rng, 5, 12);
        let related = |a: &u32, b: &u32| r.contains(a, b);
        let fast = lift_check(related, &delta, &theta).is_some();
        let slow = lift_check_bruteforce(related, &delta, &theta);
        if fast != slow {
            disagreements += 1;
        }
    }
    let elapsed = start.elapsed();
    criterion(
        6,
        "the flow-based lifting decision agrees with brute-force decomposition on 500 random instances",
        disagreements == 0 && elapsed < Duration::from_secs(30),
        format!("disagreements={disagreements} elapsed={elapsed:?}"),
    );
}

#[test]
fn criterion_07_lifting_preserves_reflexivity_and_transitivity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x11F8);
    let universe: BTreeSet<u32> = (0..UNIVERSE).collect();
    let mut violations = 0usize;
    let mut chained = 0usize;
    for _ in 0..200 {
        let r = random_relation(&mut rng, 0.3).refl_trans_closure(&universe);
        let related = |a: &u32, b: &u32| r.contains(a, b);
        let delta = random_dist(&mut rng, 4, 10);
        if lift_check(related, &delta, &delta).is_none() {
            violations += 1;
        }
        let theta = random_dist(&mut rng, 4, 10);
        let xi = random_dist(&mut rng, 4, 10);
        if lift_check(related, &delta, &theta).is_some()
            && lift_check(related, &theta, &xi).is_some()
        {
            chained += 1;
            if lift_check(related, &delta, &xi).is_none() {
                violations += 1;
            }
        }
    }
    criterion(
        7,
        "the lifting of 200 random preorders passes reflexivity and transitivity spot-checks",
        violations == 0 && chained > 10,
        format!("violations={violations} chained={chained}"),
    );
}

#[test]
fn criterion_08_induced_relation_passes_the_weak_battery_on_the_corpus() {
    let entries = corpus();
    let mut env = DefEnv::new();
    for e in &entries {
        env.merge(&e.env).expect("corpus definitions are disjoint or identical");
    }
    let terms: Vec<PccsProcess> = entries.iter().map(|e| e.term.clone()).collect();
    let v = theorem_instance_check(
        &terms,
        &env,
        &Encoder::new(),
        PocFlavor::Weak,
        &ExplorationBudget::with_depth(4),
    )
    .expect("corpus validates");
    criterion(
        8,
        "the translation-induced relation passes the membership, restriction, preorder, and correspondence-simulation conjuncts",
        v.status == Status::Holds,
        format!("{v:?}"),
    );
}

#[test]
fn criterion_09_each_translation_defect_is_detected() {
    let entries = corpus();
    let budget = ExplorationBudget::with_depth(4);
    let mut undetected = Vec::new();
    for mutation in [
        EncoderMutation::DropCoordInput,
        EncoderMutation::SwapSelectProbs,
        EncoderMutation::OmitDefinitions,
    ] {
        let enc = Encoder::mutated(mutation);
        let mut caught = false;
        for e in &entries {
            let poc = check_weak_poc(&e.term, &e.env, &enc, TargetRel::Congruence, &budget)
                .expect("corpus validates");
            let success = check_success_sensitiveness(&e.term, &e.env, &enc, &budget)
                .expect("corpus validates");
            let divergence = check_divergence_reflection(&e.term, &e.env, &enc, &budget)
                .expect("corpus validates");
            if poc.verdict().status == Status::Fails
                || success.status == Status::Fails
                || divergence.status == Status::Fails
            {
                caught = true;
                break;
            }
        }
        if !caught {
            undetected.push(format!("{mutation:?}"));
        }
    }
    criterion(
        9,
        "every deliberate translation defect makes at least one checker fail on the corpus",
        undetected.is_empty(),
        format!("undetected mutations: {undetected:?}"),
    );
}

#[test]
fn criterion_10_divergence_matches_on_both_sides() {
    let (diverging, env) = parse_pccs("def C() = C<>  C<>").expect("fixture parses");
    let v = check_divergence_reflection(
        &diverging,
        &env,
        &Encoder::new(),
        &ExplorationBudget::with_depth(6),
    )
    .expect("fixture validates");
    let both_cycle = v.status == Status::Holds
        && v.witness.as_deref().is_some_and(|w| w.contains("both sides"));

    let budget = ExplorationBudget::with_depth(6);
    let enc = Encoder::new();
    let mut cycling_entries = Vec::new();
    for e in corpus() {
        let v = check_divergence_reflection(&e.term, &e.env, &enc, &budget)
            .expect("corpus validates");
        // A plain hold with no witness means neither side has a cycle.
        if !(v.status == Status::Holds && v.witness.is_none()) {
            cycling_entries.push(e.name.clone());
        }
    }
    criterion(
        10,
        "the self-calling constant diverges on both sides while the corpus diverges on neither",
        both_cycle && cycling_entries.is_empty(),
        format!("both_cycle={both_cycle} cycling_entries={cycling_entries:?}"),
    );
}
