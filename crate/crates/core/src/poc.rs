//! The correspondence criteria between a source term and its translation:
//! completeness/soundness of reduction emulation in weak, intermediate and
//! strong variants, their non-probabilistic counterparts, sensitiveness to
//! success and to barbs, divergence reflection, compositionality, invariance
//! under renamings of free channels, and an instance check that builds the
//! induced relation and verifies it is a correspondence simulation (or
//! bisimulation) preorder.

use crate::encode::Encoder;
use crate::pccs::{
    pccs_free_names, pccs_reach_barb, pccs_reduce, pccs_subst, pccs_validate, pccs_canonical,
    DefEnv, Name, Obs, PccsError, PccsProcess,
};
use crate::ppi::{
    ppi_dist_canonical, ppi_normal_form, ppi_reach_barb, ppi_reduce, ppi_reduce_dists,
    ppi_struct_congruent, ppi_subst, PpiProcess, StepClass,
};
use crate::prob::{
    dist_multistep, dist_step, Distribution, ExplorationBudget, Multistep, SelectorMode,
};
use crate::rel::{
    build_induced_relation, check_preorder, check_prob_bisimulation,
    check_prob_correspondence_sim, check_strong_prob_bisimulation, Explorer, Relation, System,
    Verdict,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

/// A state of either transition system, so that a single relation can pair
/// source terms with target terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    Src(PccsProcess),
    Tgt(PpiProcess),
}

impl Term {
    pub fn canonical(&self) -> Term {
        match self {
            Term::Src(p) => Term::Src(pccs_canonical(p)),
            Term::Tgt(p) => Term::Tgt(ppi_normal_form(p)),
        }
    }

    pub fn is_target(&self) -> bool {
        matches!(self, Term::Tgt(_))
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Src(p) => write!(f, "src {p}"),
            Term::Tgt(p) => write!(f, "tgt {p}"),
        }
    }
}

/// How reached target distributions are compared against translated source
/// distributions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetRel {
    /// Up to structural congruence (pointwise normal forms, weights merged).
    Congruence,
    /// Raw syntactic equality of distributions.
    Identity,
}

impl TargetRel {
    fn dist_canon(&self, d: &Distribution<PpiProcess>) -> Distribution<PpiProcess> {
        match self {
            TargetRel::Congruence => ppi_dist_canonical(d),
            TargetRel::Identity => d.clone(),
        }
    }

    fn term_match(&self, a: &PpiProcess, b: &PpiProcess) -> bool {
        match self {
            TargetRel::Congruence => ppi_struct_congruent(a, b),
            TargetRel::Identity => a == b,
        }
    }
}

/// Emulation report: completeness (every source distribution is emulated)
/// and soundness (every target distribution belongs to some emulation), plus
/// the step classes observed on the target side.
#[derive(Clone, Debug, Serialize)]
pub struct PocReport {
    pub completeness: Verdict,
    pub soundness: Verdict,
    pub step_classes: Vec<String>,
}

impl PocReport {
    pub fn verdict(&self) -> Verdict {
        Verdict::all([self.completeness.clone(), self.soundness.clone()])
    }
}

/// Bounded distribution reachability of a source term under its definitions.
pub fn src_multistep(
    s: &PccsProcess,
    env: &DefEnv,
    budget: &ExplorationBudget,
) -> Multistep<PccsProcess> {
    let mut step = |t: &PccsProcess| pccs_reduce(t, env).expect("validated source term");
    dist_multistep(&Distribution::point(s.clone()), &mut step, budget, &|d| {
        d.map_terms(pccs_canonical)
    })
}

/// Bounded distribution reachability of a target term, optionally recording
/// the classes of the reduction steps taken.
pub fn tgt_multistep(
    t: &PpiProcess,
    budget: &ExplorationBudget,
    classes: Option<&RefCell<BTreeSet<StepClass>>>,
) -> Multistep<PpiProcess> {
    let mut step = |p: &PpiProcess| {
        let steps = ppi_reduce(p);
        if let Some(cell) = classes {
            cell.borrow_mut().extend(steps.iter().map(|(_, c)| c.clone()));
        }
        steps.into_iter().map(|(d, _)| d).collect()
    };
    dist_multistep(
        &Distribution::point(t.clone()),
        &mut step,
        budget,
        &ppi_dist_canonical,
    )
}

/// Distributions reachable by instance-selection steps only, used to
/// complete a half-finished emulation on the target side.
fn b_multistep(theta: &Distribution<PpiProcess>, budget: &ExplorationBudget) -> Multistep<PpiProcess> {
    let mut step = |p: &PpiProcess| {
        ppi_reduce(p)
            .into_iter()
            .filter(|(_, c)| *c == StepClass::B)
            .map(|(d, _)| d)
            .collect()
    };
    let mut eager = budget.clone();
    eager.mode = SelectorMode::Eager;
    dist_multistep(theta, &mut step, &eager, &ppi_dist_canonical)
}

fn full_multistep(
    theta: &Distribution<PpiProcess>,
    budget: &ExplorationBudget,
) -> Multistep<PpiProcess> {
    let step = ppi_reduce_dists;
    let mut step_fn = |p: &PpiProcess| step(p);
    dist_multistep(theta, &mut step_fn, budget, &ppi_dist_canonical)
}

fn class_names(classes: BTreeSet<StepClass>) -> Vec<String> {
    classes.into_iter().map(|c| c.to_string()).collect()
}

/// Weak operational correspondence: every reachable source distribution is
/// emulated by a reachable target distribution, and every reachable target
/// distribution can be completed by instance-selection steps (or, failing
/// that, arbitrary further steps) into an emulation of some reachable source
/// distribution.
pub fn check_weak_poc(
    s: &PccsProcess,
    env: &DefEnv,
    enc: &Encoder,
    rel: TargetRel,
    budget: &ExplorationBudget,
) -> Result<PocReport, PccsError> {
    pccs_validate(s, env)?;
    let src_ms = src_multistep(s, env, budget);
    let classes = RefCell::new(BTreeSet::new());
    let t0 = enc.encode_outer(s, env);
    let tgt_ms = tgt_multistep(&t0, budget, Some(&classes));

    // Canonical images of the translated source distributions.
    let matchers: Vec<Distribution<PpiProcess>> = src_ms
        .dists
        .iter()
        .map(|d| rel.dist_canon(&enc.encode_dist(d, env)))
        .collect();
    let tgt_canon: Vec<Distribution<PpiProcess>> =
        tgt_ms.dists.iter().map(|d| rel.dist_canon(d)).collect();

    let mut completeness = if src_ms.complete {
        Verdict::holds()
    } else {
        Verdict::holds_with("source reachability truncated at budget".into())
    };
    for (delta, image) in src_ms.dists.iter().zip(&matchers) {
        if !tgt_canon.iter().any(|th| th == image) {
            completeness = if tgt_ms.complete {
                Verdict::fails(format!(
                    "source reaches {delta} but no reachable target distribution emulates it"
                ))
            } else {
                Verdict::inconclusive(format!("no emulation of {delta} within budget"))
            };
            break;
        }
    }

    let mut soundness = if tgt_ms.complete {
        Verdict::holds()
    } else {
        Verdict::holds_with("target reachability truncated at budget".into())
    };
    for theta in &tgt_ms.dists {
        let completions = b_multistep(theta, budget);
        let mut found = completions
            .dists
            .iter()
            .any(|th| matchers.contains(&rel.dist_canon(th)));
        let mut definite = src_ms.complete && completions.complete;
        if !found {
            let escape = full_multistep(theta, budget);
            found = escape
                .dists
                .iter()
                .any(|th| matchers.contains(&rel.dist_canon(th)));
            definite = src_ms.complete && escape.complete;
        }
        if !found {
            soundness = if definite {
                Verdict::fails(format!(
                    "target reaches {theta} which cannot be completed to emulate any source distribution"
                ))
            } else {
                Verdict::inconclusive(format!("no completion of {theta} matches within budget"))
            };
            break;
        }
    }

    Ok(PocReport {
        completeness,
        soundness,
        step_classes: class_names(classes.into_inner()),
    })
}

/// Intermediate variant: as the weak one, but reached target distributions
/// must directly emulate a reachable source distribution, with no completion.
pub fn check_mid_poc(
    s: &PccsProcess,
    env: &DefEnv,
    enc: &Encoder,
    rel: TargetRel,
    budget: &ExplorationBudget,
) -> Result<PocReport, PccsError> {
    pccs_validate(s, env)?;
    let src_ms = src_multistep(s, env, budget);
    let classes = RefCell::new(BTreeSet::new());
    let tgt_ms = tgt_multistep(&enc.encode_outer(s, env), budget, Some(&classes));
    let matchers: Vec<Distribution<PpiProcess>> = src_ms
        .dists
        .iter()
        .map(|d| rel.dist_canon(&enc.encode_dist(d, env)))
        .collect();
    let tgt_canon: Vec<Distribution<PpiProcess>> =
        tgt_ms.dists.iter().map(|d| rel.dist_canon(d)).collect();

    let mut completeness = if src_ms.complete {
        Verdict::holds()
    } else {
        Verdict::holds_with("source reachability truncated at budget".into())
    };
    for (delta, image) in src_ms.dists.iter().zip(&matchers) {
        if !tgt_canon.iter().any(|th| th == image) {
            completeness = if tgt_ms.complete {
                Verdict::fails(format!(
                    "source reaches {delta} but no reachable target distribution emulates it"
                ))
            } else {
                Verdict::inconclusive(format!("no emulation of {delta} within budget"))
            };
            break;
        }
    }

    let mut soundness = if tgt_ms.complete {
        Verdict::holds()
    } else {
        Verdict::holds_with("target reachability truncated at budget".into())
    };
    for (theta, image) in tgt_ms.dists.iter().zip(&tgt_canon) {
        if !matchers.contains(image) {
            soundness = if src_ms.complete {
                Verdict::fails(format!(
                    "target reaches {theta} which emulates no reachable source distribution"
                ))
            } else {
                Verdict::inconclusive(format!("no source match for {theta} within budget"))
            };
            break;
        }
    }

    Ok(PocReport {
        completeness,
        soundness,
        step_classes: class_names(classes.into_inner()),
    })
}

/// Strong variant: single source reductions against single target
/// reductions, both directions, no search.
pub fn check_strong_poc(
    s: &PccsProcess,
    env: &DefEnv,
    enc: &Encoder,
    rel: TargetRel,
) -> Result<PocReport, PccsError> {
    pccs_validate(s, env)?;
    let t0 = enc.encode_outer(s, env);
    let tgt_steps = ppi_reduce(&t0);
    let classes: BTreeSet<StepClass> = tgt_steps.iter().map(|(_, c)| c.clone()).collect();
    let matchers: Vec<Distribution<PpiProcess>> = pccs_reduce(s, env)?
        .iter()
        .map(|d| rel.dist_canon(&enc.encode_dist(d, env)))
        .collect();
    let tgt_canon: Vec<Distribution<PpiProcess>> = tgt_steps
        .iter()
        .map(|(d, _)| rel.dist_canon(d))
        .collect();

    let completeness = match matchers.iter().find(|image| !tgt_canon.contains(image)) {
        None => Verdict::holds(),
        Some(image) => Verdict::fails(format!(
            "a source reduction has no single-step target emulation of {image}"
        )),
    };
    let soundness = match tgt_steps
        .iter()
        .zip(&tgt_canon)
        .find(|(_, image)| !matchers.contains(image))
    {
        None => Verdict::holds(),
        Some(((theta, _), _)) => Verdict::fails(format!(
            "target step to {theta} emulates no single source reduction"
        )),
    };
    Ok(PocReport {
        completeness,
        soundness,
        step_classes: class_names(classes),
    })
}

/// Non-probabilistic operational correspondence over the support-point
/// graphs, ignoring probabilities.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OcVariant {
    Strong,
    Plain,
    Weak,
}

/// Terms reachable from `s` through supports of its reductions (canonical
/// representatives), with a completeness flag.
pub fn src_term_reach(
    s: &PccsProcess,
    env: &DefEnv,
    budget: &ExplorationBudget,
) -> (BTreeSet<PccsProcess>, bool) {
    let mut seen = BTreeSet::from([pccs_canonical(s)]);
    let mut frontier: Vec<PccsProcess> = seen.iter().cloned().collect();
    let mut complete = true;
    for _ in 0..budget.depth {
        let mut next = Vec::new();
        for p in &frontier {
            for d in pccs_reduce(p, env).expect("validated source term") {
                for q in d.support() {
                    if seen.len() >= budget.state_cap {
                        complete = false;
                        break;
                    }
                    let c = pccs_canonical(q);
                    if seen.insert(c.clone()) {
                        next.push(c);
                    }
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    if !frontier.is_empty() {
        complete = false;
    }
    (seen, complete)
}

/// Terms reachable from `t` through supports of its reductions (normal
/// forms), with a completeness flag.
pub fn tgt_term_reach(
    t: &PpiProcess,
    budget: &ExplorationBudget,
) -> (BTreeSet<PpiProcess>, bool) {
    let mut seen = BTreeSet::from([ppi_normal_form(t)]);
    let mut frontier: Vec<PpiProcess> = seen.iter().cloned().collect();
    let mut complete = true;
    for _ in 0..budget.depth {
        let mut next = Vec::new();
        for p in &frontier {
            for d in ppi_reduce_dists(p) {
                for q in d.support() {
                    if seen.len() >= budget.state_cap {
                        complete = false;
                        break;
                    }
                    let c = ppi_normal_form(q);
                    if seen.insert(c.clone()) {
                        next.push(c);
                    }
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    if !frontier.is_empty() {
        complete = false;
    }
    (seen, complete)
}

pub fn check_nonprob_oc(
    s: &PccsProcess,
    env: &DefEnv,
    enc: &Encoder,
    rel: TargetRel,
    budget: &ExplorationBudget,
    variant: OcVariant,
) -> Result<Verdict, PccsError> {
    pccs_validate(s, env)?;
    let t0 = enc.encode_outer(s, env);
    let image = |p: &PccsProcess| ppi_normal_form(&enc.encode_outer(p, env));

    if variant == OcVariant::Strong {
        let src1: BTreeSet<PccsProcess> = pccs_reduce(s, env)?
            .iter()
            .flat_map(|d| d.support().map(pccs_canonical))
            .collect();
        let tgt1: BTreeSet<PpiProcess> = ppi_reduce_dists(&t0)
            .iter()
            .flat_map(|d| d.support().map(ppi_normal_form))
            .collect();
        for p in &src1 {
            let img = image(p);
            if !tgt1.iter().any(|t| rel.term_match(&img, t)) {
                return Ok(Verdict::fails(format!(
                    "source step to {p} has no single-step target counterpart"
                )));
            }
        }
        for t in &tgt1 {
            if !src1.iter().any(|p| rel.term_match(&image(p), t)) {
                return Ok(Verdict::fails(format!(
                    "target step to {t} mirrors no single source step"
                )));
            }
        }
        return Ok(Verdict::holds());
    }

    let (src_reach, src_complete) = src_term_reach(s, env, budget);
    let (tgt_reach, tgt_complete) = tgt_term_reach(&t0, budget);
    let mut incomplete = !src_complete || !tgt_complete;

    for p in &src_reach {
        let img = image(p);
        if !tgt_reach.iter().any(|t| rel.term_match(&img, t)) {
            if tgt_complete {
                return Ok(Verdict::fails(format!(
                    "source reaches {p} but the target never reaches its translation"
                )));
            }
            return Ok(Verdict::inconclusive(format!(
                "translation of {p} not reached within budget"
            )));
        }
    }
    for t in &tgt_reach {
        let direct = src_reach.iter().any(|p| rel.term_match(&image(p), t));
        let matched = if direct {
            true
        } else if variant == OcVariant::Weak {
            let (onward, onward_complete) = tgt_term_reach(t, budget);
            incomplete |= !onward_complete;
            let hit = onward
                .iter()
                .any(|t2| src_reach.iter().any(|p| rel.term_match(&image(p), t2)));
            if !hit && (!src_complete || !onward_complete) {
                return Ok(Verdict::inconclusive(format!(
                    "no onward match for target state {t} within budget"
                )));
            }
            hit
        } else {
            if !src_complete {
                return Ok(Verdict::inconclusive(format!(
                    "no source counterpart for target state {t} within budget"
                )));
            }
            false
        };
        if !matched {
            return Ok(Verdict::fails(format!(
                "target reaches {t} which corresponds to no reachable source state"
            )));
        }
    }
    if incomplete {
        Ok(Verdict::holds_with("reachability truncated at budget".into()))
    } else {
        Ok(Verdict::holds())
    }
}

fn barb_agreement(
    what: &str,
    src: (bool, bool),
    tgt: (bool, bool),
) -> Verdict {
    let (src_found, src_complete) = src;
    let (tgt_found, tgt_complete) = tgt;
    match (src_found, tgt_found) {
        (true, true) => Verdict::holds(),
        (false, false) => {
            if src_complete && tgt_complete {
                Verdict::holds()
            } else {
                Verdict::inconclusive(format!(
                    "neither side reached {what} within budget"
                ))
            }
        }
        (true, false) => {
            if tgt_complete {
                Verdict::fails(format!("source reaches {what} but the target cannot"))
            } else {
                Verdict::inconclusive(format!("target search for {what} truncated"))
            }
        }
        (false, true) => {
            if src_complete {
                Verdict::fails(format!("target reaches {what} but the source cannot"))
            } else {
                Verdict::inconclusive(format!("source search for {what} truncated"))
            }
        }
    }
}

/// Both sides agree on reachability of the success observable.
pub fn check_success_sensitiveness(
    s: &PccsProcess,
    env: &DefEnv,
    enc: &Encoder,
    budget: &ExplorationBudget,
) -> Result<Verdict, PccsError> {
    let src = pccs_reach_barb(s, env, &Obs::Success, budget)?;
    let tgt = ppi_reach_barb(&enc.encode_outer(s, env), &Obs::Success, budget);
    Ok(barb_agreement("success", src, tgt))
}

/// Both sides agree on reachability of every input and output barb on the
/// free channels of the source term (translated on the target side).
pub fn check_barb_sensitiveness(
    s: &PccsProcess,
    env: &DefEnv,
    enc: &Encoder,
    budget: &ExplorationBudget,
) -> Result<Verdict, PccsError> {
    pccs_validate(s, env)?;
    let t0 = enc.encode_outer(s, env);
    let mut verdicts = Vec::new();
    for n in pccs_free_names(s) {
        let translated = enc.policy.source_name(&n);
        for (src_obs, tgt_obs, what) in [
            (Obs::In(n.clone()), Obs::In(translated.clone()), format!("an input barb on {n}")),
            (Obs::Out(n.clone()), Obs::Out(translated.clone()), format!("an output barb on {n}")),
        ] {
            let src = pccs_reach_barb(s, env, &src_obs, budget)?;
            let tgt = ppi_reach_barb(&t0, &tgt_obs, budget);
            verdicts.push(barb_agreement(&what, src, tgt));
        }
    }
    Ok(Verdict::all(verdicts))
}

struct CycleState<'k, T: Ord> {
    gray: BTreeSet<Distribution<T>>,
    done: BTreeSet<Distribution<T>>,
    complete: bool,
    visited: usize,
    key: &'k dyn Fn(&Distribution<T>) -> Distribution<T>,
}

fn cycle_dfs<T: Ord + Clone>(
    d: &Distribution<T>,
    depth: usize,
    st: &mut CycleState<'_, T>,
    step: &mut dyn FnMut(&T) -> Vec<Distribution<T>>,
    budget: &ExplorationBudget,
) -> bool {
    let k = (st.key)(d);
    if st.gray.contains(&k) {
        return true;
    }
    if st.done.contains(&k) {
        return false;
    }
    st.visited += 1;
    if st.visited > budget.state_cap {
        st.complete = false;
        return false;
    }
    let out = dist_step(d, step, budget.combo_cap, budget.mode);
    if out.truncated {
        st.complete = false;
    }
    if depth == 0 {
        if !out.dists.is_empty() {
            st.complete = false;
        }
        st.done.insert(k);
        return false;
    }
    st.gray.insert(k.clone());
    for succ in &out.dists {
        if cycle_dfs(succ, depth - 1, st, step, budget) {
            return true;
        }
    }
    st.gray.remove(&k);
    st.done.insert(k);
    false
}

/// Depth-first search for a revisited canonical distribution, the witness of
/// an infinite run. Returns (cycle found, search exhaustive).
fn find_cycle<T: Ord + Clone>(
    start: &Distribution<T>,
    step: &mut dyn FnMut(&T) -> Vec<Distribution<T>>,
    key: &dyn Fn(&Distribution<T>) -> Distribution<T>,
    budget: &ExplorationBudget,
) -> (bool, bool) {
    let mut st = CycleState {
        gray: BTreeSet::new(),
        done: BTreeSet::new(),
        complete: true,
        visited: 0,
        key,
    };
    let cycle = cycle_dfs(start, budget.depth, &mut st, step, budget);
    (cycle, st.complete)
}

/// The translation must not introduce divergence: an infinite target run is
/// only acceptable when the source admits one too. A truncated search never
/// claims divergence.
pub fn check_divergence_reflection(
    s: &PccsProcess,
    env: &DefEnv,
    enc: &Encoder,
    budget: &ExplorationBudget,
) -> Result<Verdict, PccsError> {
    pccs_validate(s, env)?;
    let mut src_step = |t: &PccsProcess| pccs_reduce(t, env).expect("validated source term");
    let (src_cycle, src_complete) = find_cycle(
        &Distribution::point(s.clone()),
        &mut src_step,
        &|d| d.map_terms(pccs_canonical),
        budget,
    );
    let mut tgt_step = |t: &PpiProcess| ppi_reduce_dists(t);
    let (tgt_cycle, tgt_complete) = find_cycle(
        &Distribution::point(enc.encode_outer(s, env)),
        &mut tgt_step,
        &ppi_dist_canonical,
        budget,
    );
    Ok(if tgt_cycle {
        if src_cycle {
            Verdict::holds_with("both sides admit an infinite run".into())
        } else if src_complete {
            Verdict::fails(
                "the target admits an infinite run but source reachability is finite and acyclic"
                    .into(),
            )
        } else {
            Verdict::inconclusive("target run cycles; source search truncated".into())
        }
    } else if !tgt_complete {
        Verdict::holds_with("no divergence detected; target search truncated".into())
    } else {
        Verdict::holds()
    })
}

/// The translation of every operator must be a fixed context filled with the
/// translations of the children.
pub fn check_weak_compositionality(s: &PccsProcess, enc: &Encoder) -> Verdict {
    match enc.compositional_defect(s) {
        None => Verdict::holds(),
        Some(node) => Verdict::fails(format!(
            "translation is not compositional at {node}"
        )),
    }
}

/// Translating a renamed term must coincide with renaming the translated
/// term, for randomly sampled (possibly non-injective) renamings of the free
/// channels.
pub fn check_name_invariance(
    s: &PccsProcess,
    env: &DefEnv,
    enc: &Encoder,
    samples: usize,
    seed: u64,
) -> Result<Verdict, PccsError> {
    pccs_validate(s, env)?;
    let names: Vec<Name> = pccs_free_names(s).into_iter().collect();
    if names.is_empty() {
        return Ok(Verdict::holds());
    }
    // Include names outside the term so renamings need not be surjective.
    let mut pool = names.clone();
    for base in ["u", "v"] {
        let mut candidate = base.to_string();
        while pool.contains(&candidate) {
            candidate.push('\'');
        }
        pool.push(candidate);
    }
    let reference = enc.encode_outer(s, env);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for k in 0..samples {
        let sigma: BTreeMap<Name, Name> = names
            .iter()
            .map(|n| (n.clone(), pool[rng.gen_range(0..pool.len())].clone()))
            .collect();
        let lhs = enc.encode_outer(&pccs_subst(s, &sigma), env);
        let translated_sigma: BTreeMap<Name, Name> = sigma
            .iter()
            .map(|(a, b)| (enc.policy.source_name(a), enc.policy.source_name(b)))
            .collect();
        let rhs = ppi_subst(&reference, &translated_sigma);
        if ppi_normal_form(&lhs) != ppi_normal_form(&rhs) {
            let shown: Vec<String> =
                sigma.iter().map(|(a, b)| format!("{a}->{b}")).collect();
            return Ok(Verdict::fails(format!(
                "renaming sample {k} [{}] does not commute with the translation",
                shown.join(", ")
            )));
        }
    }
    Ok(Verdict::holds())
}

/// Which behavioural relation the induced relation must be.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PocFlavor {
    Weak,
    Mid,
    Strong,
}

/// Mixed transition system over source and target terms, each side stepping
/// by its own reduction semantics with canonical successor supports.
pub fn mixed_system(env: &DefEnv) -> System<'_, Term> {
    System::new(move |t: &Term| match t {
        Term::Src(p) => {
            let dists: BTreeSet<Distribution<Term>> = pccs_reduce(p, env)
                .expect("validated source term")
                .iter()
                .map(|d| d.map_terms(|q| Term::Src(pccs_canonical(q))))
                .collect();
            dists.into_iter().collect()
        }
        Term::Tgt(p) => {
            let dists: BTreeSet<Distribution<Term>> = ppi_reduce_dists(p)
                .iter()
                .map(|d| d.map_terms(|q| Term::Tgt(ppi_normal_form(q))))
                .collect();
            dists.into_iter().collect()
        }
    })
}

/// Builds the relation induced by the translation over all states reachable
/// from the given source terms and their translations, and checks that it
/// is: (a) inhabited by every translation pair, (b) no larger than identity
/// on the target side, (c) a preorder, and (d) a correspondence simulation /
/// bisimulation / strong bisimulation according to the flavor.
pub fn theorem_instance_check(
    entries: &[PccsProcess],
    env: &DefEnv,
    enc: &Encoder,
    flavor: PocFlavor,
    budget: &ExplorationBudget,
) -> Result<Verdict, PccsError> {
    for s in entries {
        pccs_validate(s, env)?;
    }
    let mut src_terms: BTreeSet<PccsProcess> = BTreeSet::new();
    let mut tgt_terms: BTreeSet<PpiProcess> = BTreeSet::new();
    for s in entries {
        let (reach, _) = src_term_reach(s, env, budget);
        src_terms.extend(reach);
        let (reach, _) = tgt_term_reach(&enc.encode_outer(s, env), budget);
        tgt_terms.extend(reach);
    }
    let translations: BTreeMap<PccsProcess, PpiProcess> = src_terms
        .iter()
        .map(|p| (p.clone(), ppi_normal_form(&enc.encode_outer(p, env))))
        .collect();
    tgt_terms.extend(translations.values().cloned());

    let universe: BTreeSet<Term> = src_terms
        .iter()
        .cloned()
        .map(Term::Src)
        .chain(tgt_terms.iter().cloned().map(Term::Tgt))
        .collect();
    let r_t = Relation::from_pairs(
        tgt_terms
            .iter()
            .map(|t| (Term::Tgt(t.clone()), Term::Tgt(t.clone()))),
    );
    let r_enc = build_induced_relation(
        translations
            .iter()
            .map(|(p, t)| (Term::Src(p.clone()), Term::Tgt(t.clone()))),
        &r_t,
        &universe,
    );

    let mut verdicts = Vec::new();
    for (p, t) in &translations {
        if !r_enc.contains(&Term::Src(p.clone()), &Term::Tgt(t.clone())) {
            verdicts.push(Verdict::fails(format!(
                "induced relation misses the translation pair for {p}"
            )));
        }
    }
    let restricted = r_enc.restrict(Term::is_target);
    if restricted != r_t {
        verdicts.push(Verdict::fails(
            "induced relation relates distinct target terms".into(),
        ));
    }
    verdicts.push(check_preorder(&r_enc, &universe));

    let mut ex = Explorer::new(mixed_system(env));
    verdicts.push(match flavor {
        PocFlavor::Weak => check_prob_correspondence_sim(&r_enc, &mut ex, budget),
        PocFlavor::Mid => {
            check_prob_bisimulation(&r_enc.symmetric_closure(), &mut ex, budget)
        }
        PocFlavor::Strong => check_strong_prob_bisimulation(&r_enc.symmetric_closure(), &mut ex),
    });
    Ok(Verdict::all(verdicts))
}
