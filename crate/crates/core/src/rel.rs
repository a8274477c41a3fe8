//! Finite relations on process terms and the bounded checkers for the
//! behavioural relations used by the correspondence criteria: preorders,
//! probabilistic correspondence simulation, probabilistic bisimulation (weak
//! and strong) and a greatest-fixpoint refiner.

use crate::prob::{
    lift_check, dist_multistep, Distribution, ExplorationBudget, Multistep,
};
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Holds,
    Fails,
    Inconclusive,
}

/// Outcome of a bounded check. A failure always carries a concrete
/// counterexample; an inconclusive verdict only reports that a cap was hit.
#[derive(Clone, Debug, Serialize)]
pub struct Verdict {
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<String>,
}

impl Verdict {
    pub fn holds() -> Verdict {
        Verdict {
            status: Status::Holds,
            witness: None,
            counterexample: None,
        }
    }

    pub fn holds_with(witness: String) -> Verdict {
        Verdict {
            status: Status::Holds,
            witness: Some(witness),
            counterexample: None,
        }
    }

    pub fn fails(counterexample: String) -> Verdict {
        Verdict {
            status: Status::Fails,
            witness: None,
            counterexample: Some(counterexample),
        }
    }

    pub fn inconclusive(reason: String) -> Verdict {
        Verdict {
            status: Status::Inconclusive,
            witness: Some(reason),
            counterexample: None,
        }
    }

    /// Conjunction: any failure dominates, else any inconclusive, else holds.
    pub fn all(verdicts: impl IntoIterator<Item = Verdict>) -> Verdict {
        let mut inconclusive = None;
        for v in verdicts {
            match v.status {
                Status::Fails => return v,
                Status::Inconclusive => inconclusive = Some(v),
                Status::Holds => {}
            }
        }
        inconclusive.unwrap_or_else(Verdict::holds)
    }
}

/// A finite binary relation on terms.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Relation<T: Ord>(BTreeSet<(T, T)>);

impl<T: Ord + Clone> Relation<T> {
    pub fn new() -> Relation<T> {
        Relation(BTreeSet::new())
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (T, T)>) -> Relation<T> {
        Relation(pairs.into_iter().collect())
    }

    pub fn insert(&mut self, l: T, r: T) {
        self.0.insert((l, r));
    }

    pub fn contains(&self, l: &T, r: &T) -> bool {
        self.0.contains(&(l.clone(), r.clone()))
    }

    pub fn pairs(&self) -> impl Iterator<Item = &(T, T)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        self.0
            .iter()
            .all(|(l, r)| self.0.contains(&(r.clone(), l.clone())))
    }

    pub fn symmetric_closure(&self) -> Relation<T> {
        let mut out = self.0.clone();
        out.extend(self.0.iter().map(|(l, r)| (r.clone(), l.clone())));
        Relation(out)
    }

    /// Restriction to pairs whose both sides satisfy the predicate.
    pub fn restrict(&self, keep: impl Fn(&T) -> bool) -> Relation<T> {
        Relation(
            self.0
                .iter()
                .filter(|(l, r)| keep(l) && keep(r))
                .cloned()
                .collect(),
        )
    }

    /// Reflexive-transitive closure over a universe of terms.
    pub fn refl_trans_closure(&self, universe: &BTreeSet<T>) -> Relation<T> {
        let mut pairs = self.0.clone();
        for t in universe {
            pairs.insert((t.clone(), t.clone()));
        }
        loop {
            let mut added = Vec::new();
            for (a, b) in &pairs {
                for (b2, c) in &pairs {
                    if b == b2 && !pairs.contains(&(a.clone(), c.clone())) {
                        added.push((a.clone(), c.clone()));
                    }
                }
            }
            if added.is_empty() {
                break;
            }
            pairs.extend(added);
        }
        Relation(pairs)
    }
}

/// Checks that the relation is reflexive on the universe and transitive.
pub fn check_preorder<T: Ord + Clone + fmt::Display>(
    r: &Relation<T>,
    universe: &BTreeSet<T>,
) -> Verdict {
    for t in universe {
        if !r.contains(t, t) {
            return Verdict::fails(format!("not reflexive at {t}"));
        }
    }
    for (a, b) in r.pairs() {
        for (b2, c) in r.pairs() {
            if b == b2 && !r.contains(a, c) {
                return Verdict::fails(format!("not transitive: {a} ~ {b} ~ {c}"));
            }
        }
    }
    Verdict::holds()
}

/// A transition system over canonical terms: `step` must return successor
/// distributions whose support points are canonical.
pub struct System<'a, T: Ord> {
    step: Box<dyn FnMut(&T) -> Vec<Distribution<T>> + 'a>,
}

impl<'a, T: Ord> System<'a, T> {
    pub fn new(step: impl FnMut(&T) -> Vec<Distribution<T>> + 'a) -> System<'a, T> {
        System {
            step: Box::new(step),
        }
    }

    pub fn step(&mut self, t: &T) -> Vec<Distribution<T>> {
        (self.step)(t)
    }
}

/// Memoizing wrapper for bounded distribution reachability.
pub struct Explorer<'a, T: Ord + Clone> {
    sys: System<'a, T>,
    cache: BTreeMap<Distribution<T>, Rc<Multistep<T>>>,
}

impl<'a, T: Ord + Clone> Explorer<'a, T> {
    pub fn new(sys: System<'a, T>) -> Explorer<'a, T> {
        Explorer {
            sys,
            cache: BTreeMap::new(),
        }
    }

    pub fn step(&mut self, t: &T) -> Vec<Distribution<T>> {
        self.sys.step(t)
    }

    pub fn multistep(
        &mut self,
        d: &Distribution<T>,
        budget: &ExplorationBudget,
    ) -> Rc<Multistep<T>> {
        if let Some(ms) = self.cache.get(d) {
            return Rc::clone(ms);
        }
        let step = &mut self.sys.step;
        let ms = Rc::new(dist_multistep(
            d,
            &mut |t| (step)(t),
            budget,
            &|d| d.clone(),
        ));
        self.cache.insert(d.clone(), Rc::clone(&ms));
        ms
    }

    pub fn multistep_term(&mut self, t: &T, budget: &ExplorationBudget) -> Rc<Multistep<T>> {
        self.multistep(&Distribution::point(t.clone()), budget)
    }
}

fn lifted<T: Ord + Clone>(
    r: &Relation<T>,
    delta: &Distribution<T>,
    theta: &Distribution<T>,
) -> bool {
    // Fast path: the identity coupling works whenever the distributions are
    // equal and every support point is self-related.
    if delta == theta && delta.support().all(|t| r.contains(t, t)) {
        return true;
    }
    lift_check(|l: &T, rr: &T| r.contains(l, rr), delta, theta).is_some()
}

/// One simulation obligation: every `Delta` reachable from the left term
/// must be matched by some `Theta` reachable from the right with the lifted
/// relation. Returns per-obligation verdicts.
fn simulation_clause<T: Ord + Clone + fmt::Display>(
    r: &Relation<T>,
    ex: &mut Explorer<'_, T>,
    p: &T,
    q: &T,
    budget: &ExplorationBudget,
) -> Verdict {
    let ms_p = ex.multistep_term(p, budget);
    let ms_q = ex.multistep_term(q, budget);
    for delta in &ms_p.dists {
        let matched = ms_q.dists.iter().any(|theta| lifted(r, delta, theta));
        if !matched {
            if ms_q.complete {
                return Verdict::fails(format!(
                    "{p} reaches {delta} but {q} has no matching distribution"
                ));
            }
            return Verdict::inconclusive(format!(
                "no match for {delta} from {p} within budget"
            ));
        }
    }
    if ms_p.complete {
        Verdict::holds()
    } else {
        Verdict::holds_with("left reachability truncated at budget".into())
    }
}

/// The correspondence variant of the converse clause: a reachable `Theta`
/// may first be completed by further steps before it must relate to some
/// `Delta'` of the left side.
fn correspondence_clause<T: Ord + Clone + fmt::Display>(
    r: &Relation<T>,
    ex: &mut Explorer<'_, T>,
    p: &T,
    q: &T,
    budget: &ExplorationBudget,
) -> Verdict {
    let ms_p = ex.multistep_term(p, budget);
    let ms_q = ex.multistep_term(q, budget);
    let mut incomplete = !ms_p.complete || !ms_q.complete;
    let thetas = ms_q.dists.clone();
    for theta in &thetas {
        let ms_theta = ex.multistep(theta, budget);
        incomplete |= !ms_theta.complete;
        let matched = ms_theta.dists.iter().any(|theta2| {
            ms_p.dists.iter().any(|delta| lifted(r, delta, theta2))
        });
        if !matched {
            if ms_p.complete && ms_theta.complete {
                return Verdict::fails(format!(
                    "{q} reaches {theta} which cannot be completed to match any distribution of {p}"
                ));
            }
            return Verdict::inconclusive(format!(
                "no completion match for {theta} from {q} within budget"
            ));
        }
    }
    if incomplete {
        Verdict::holds_with("reachability truncated at budget".into())
    } else {
        Verdict::holds()
    }
}

/// Checks that the relation is a probabilistic correspondence simulation:
/// reachable distributions of the left side are matched by the right, and
/// reachable distributions of the right side can be completed to match the
/// left, both modulo the lifted relation.
pub fn check_prob_correspondence_sim<T: Ord + Clone + fmt::Display>(
    r: &Relation<T>,
    ex: &mut Explorer<'_, T>,
    budget: &ExplorationBudget,
) -> Verdict {
    let mut verdicts = Vec::new();
    for (p, q) in r.pairs().cloned().collect::<Vec<_>>() {
        verdicts.push(simulation_clause(r, ex, &p, &q, budget));
        verdicts.push(correspondence_clause(r, ex, &p, &q, budget));
    }
    Verdict::all(verdicts)
}

/// Checks that the (symmetric) relation is a weak probabilistic
/// bisimulation: the simulation clause in both directions without a
/// completion escape.
pub fn check_prob_bisimulation<T: Ord + Clone + fmt::Display>(
    r: &Relation<T>,
    ex: &mut Explorer<'_, T>,
    budget: &ExplorationBudget,
) -> Verdict {
    if !r.is_symmetric() {
        return Verdict::fails("relation is not symmetric".into());
    }
    let mut verdicts = Vec::new();
    for (p, q) in r.pairs().cloned().collect::<Vec<_>>() {
        verdicts.push(simulation_clause(r, ex, &p, &q, budget));
    }
    Verdict::all(verdicts)
}

/// Strong variant: single reductions must be matched by single reductions.
pub fn check_strong_prob_bisimulation<T: Ord + Clone + fmt::Display>(
    r: &Relation<T>,
    ex: &mut Explorer<'_, T>,
) -> Verdict {
    if !r.is_symmetric() {
        return Verdict::fails("relation is not symmetric".into());
    }
    for (p, q) in r.pairs().cloned().collect::<Vec<_>>() {
        let qs = ex.step(&q);
        for delta in ex.step(&p) {
            if !qs.iter().any(|theta| lifted(r, &delta, theta)) {
                return Verdict::fails(format!(
                    "{p} steps to {delta} but {q} has no matching single step"
                ));
            }
        }
    }
    Verdict::holds()
}

/// Greatest-fixpoint refinement: starting from all pairs over the states,
/// repeatedly removes pairs that provably violate the chosen bisimulation
/// clauses with respect to the current relation.
pub fn greatest_fixpoint_bisim<T: Ord + Clone + fmt::Display>(
    states: &BTreeSet<T>,
    ex: &mut Explorer<'_, T>,
    budget: &ExplorationBudget,
    strong: bool,
) -> Relation<T> {
    let mut rel = Relation::from_pairs(
        states
            .iter()
            .flat_map(|p| states.iter().map(move |q| (p.clone(), q.clone()))),
    );
    loop {
        let mut next = Relation::new();
        for (p, q) in rel.pairs() {
            let ok = if strong {
                let qs = ex.step(q);
                let ps = ex.step(p);
                ps.iter()
                    .all(|delta| qs.iter().any(|theta| lifted(&rel, delta, theta)))
                    && qs
                        .iter()
                        .all(|theta| ps.iter().any(|delta| lifted(&rel, theta, delta)))
            } else {
                simulation_clause(&rel, ex, p, q, budget).status != Status::Fails
                    && simulation_clause(&rel, ex, q, p, budget).status != Status::Fails
            };
            if ok {
                next.insert(p.clone(), q.clone());
            }
        }
        if next == rel {
            return rel;
        }
        rel = next;
    }
}

/// The canonical relation induced by a translation: the reflexive-transitive
/// closure of the target relation extended with every pair of a source term
/// and its translation.
pub fn build_induced_relation<T: Ord + Clone>(
    enc_pairs: impl IntoIterator<Item = (T, T)>,
    r_t: &Relation<T>,
    universe: &BTreeSet<T>,
) -> Relation<T> {
    let mut pairs: BTreeSet<(T, T)> = r_t.0.clone();
    pairs.extend(enc_pairs);
    Relation(pairs).refl_trans_closure(universe)
}
