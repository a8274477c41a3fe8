//! The probabilistic pi-calculus target: branching input, probabilistic
//! selecting output, replicated input, plain output prefix, restriction and
//! parallel composition. Step bundles, reduction with step classification,
//! structural congruence via a canonical normal form, barbs.

use crate::markers::marker_category;
use crate::prob::{Distribution, ExplorationBudget, Prob, dist_multistep};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

pub type Name = String;

/// Placeholder prefix used for input parameters inside pending step bundles;
/// never occurs in a stored term.
const PLACEHOLDER_PREFIX: &str = "?";

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PpiProcess {
    /// `x?{i1(y..): P1, ...}` - offers one branch per index, received names
    /// bind in the branch body.
    BranchIn(Name, BTreeMap<u32, (Vec<Name>, PpiProcess)>),
    /// `x!{p1 i1(y..): P1, ...}` - probabilistically selects a branch and
    /// emits its index with the transmitted names; probabilities sum to 1.
    SelectOut(Name, BTreeMap<u32, (Prob, Vec<Name>, PpiProcess)>),
    /// `!x(y..).P` - replicated input, retained on communication.
    RepIn(Name, Vec<Name>, Box<PpiProcess>),
    /// `x!<y..>.P` - plain output prefix.
    OutPrefix(Name, Vec<Name>, Box<PpiProcess>),
    Restrict(Name, Box<PpiProcess>),
    Par(Box<PpiProcess>, Box<PpiProcess>),
    Nil,
    Success,
}

impl PpiProcess {
    pub fn par(l: PpiProcess, r: PpiProcess) -> PpiProcess {
        PpiProcess::Par(Box::new(l), Box::new(r))
    }

    pub fn restrict(x: impl Into<Name>, p: PpiProcess) -> PpiProcess {
        PpiProcess::Restrict(x.into(), Box::new(p))
    }

    pub fn rep_in(x: impl Into<Name>, params: Vec<Name>, body: PpiProcess) -> PpiProcess {
        PpiProcess::RepIn(x.into(), params, Box::new(body))
    }

    pub fn out_prefix(x: impl Into<Name>, args: Vec<Name>, cont: PpiProcess) -> PpiProcess {
        PpiProcess::OutPrefix(x.into(), args, Box::new(cont))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PpiLabel {
    /// Input committing to branch index `i`.
    SelectIn(Name, u32, Vec<Name>),
    /// Output selecting branch index `i`.
    SelectOut(Name, u32, Vec<Name>),
    PlainIn(Name, Vec<Name>),
    PlainOut(Name, Vec<Name>),
    Tau,
}

impl PpiLabel {
    pub fn subject(&self) -> Option<&Name> {
        match self {
            PpiLabel::SelectIn(x, _, _)
            | PpiLabel::SelectOut(x, _, _)
            | PpiLabel::PlainIn(x, _)
            | PpiLabel::PlainOut(x, _) => Some(x),
            PpiLabel::Tau => None,
        }
    }

    pub fn objects(&self) -> &[Name] {
        match self {
            PpiLabel::SelectIn(_, _, o)
            | PpiLabel::SelectOut(_, _, o)
            | PpiLabel::PlainIn(_, o)
            | PpiLabel::PlainOut(_, o) => o,
            PpiLabel::Tau => &[],
        }
    }

    pub fn is_input(&self) -> bool {
        matches!(self, PpiLabel::SelectIn(..) | PpiLabel::PlainIn(..))
    }

    pub fn is_output(&self) -> bool {
        matches!(self, PpiLabel::SelectOut(..) | PpiLabel::PlainOut(..))
    }
}

/// Why a tau bundle fired: the communication subject and whether the input
/// side was a replicated input.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct ComEvidence {
    pub subject: Name,
    pub rep: bool,
}

/// One rule instance: a set of probabilistic alternatives fired together.
/// Inputs and plain outputs give singleton bundles; a selecting output
/// contributes one bundle holding all its branches; a communication turns a
/// whole bundle into tau alternatives at once.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct StepBundle {
    pub alternatives: Vec<(PpiLabel, Prob, PpiProcess)>,
    pub com: Option<ComEvidence>,
    /// True when this bundle consumes a replicated input.
    pub from_rep: bool,
}

/// Classification of a target reduction relative to the translation's
/// reserved-name markers.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StepClass {
    /// Communication on a translated source name.
    A,
    /// Communication on a reserved coordination channel.
    B,
    /// Communication on a reserved internal-tau channel.
    Tau,
    /// Step consuming a replicated input.
    Rep,
    /// Communication on an unclassified channel.
    Other(Name),
}

impl fmt::Display for StepClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepClass::A => write!(f, "A"),
            StepClass::B => write!(f, "B"),
            StepClass::Tau => write!(f, "TAU"),
            StepClass::Rep => write!(f, "REP"),
            StepClass::Other(n) => write!(f, "other({n})"),
        }
    }
}

pub fn classify_step(evidence: &ComEvidence) -> StepClass {
    if evidence.rep {
        return StepClass::Rep;
    }
    match marker_category(&evidence.subject) {
        crate::markers::SOURCE_PREFIX => StepClass::A,
        crate::markers::COORD_PREFIX => StepClass::B,
        crate::markers::TAU_PREFIX => StepClass::Tau,
        _ => StepClass::Other(evidence.subject.clone()),
    }
}

pub fn ppi_free_names(p: &PpiProcess) -> BTreeSet<Name> {
    match p {
        PpiProcess::BranchIn(x, brs) => {
            let mut s = BTreeSet::new();
            s.insert(x.clone());
            for (params, cont) in brs.values() {
                let mut inner = ppi_free_names(cont);
                for y in params {
                    inner.remove(y);
                }
                s.extend(inner);
            }
            s
        }
        PpiProcess::SelectOut(x, brs) => {
            let mut s = BTreeSet::new();
            s.insert(x.clone());
            for (_, args, cont) in brs.values() {
                s.extend(args.iter().cloned());
                s.extend(ppi_free_names(cont));
            }
            s
        }
        PpiProcess::RepIn(x, params, body) => {
            let mut s = BTreeSet::new();
            s.insert(x.clone());
            let mut inner = ppi_free_names(body);
            for y in params {
                inner.remove(y);
            }
            s.extend(inner);
            s
        }
        PpiProcess::OutPrefix(x, args, cont) => {
            let mut s = BTreeSet::new();
            s.insert(x.clone());
            s.extend(args.iter().cloned());
            s.extend(ppi_free_names(cont));
            s
        }
        PpiProcess::Restrict(x, b) => {
            let mut s = ppi_free_names(b);
            s.remove(x);
            s
        }
        PpiProcess::Par(l, r) => {
            let mut s = ppi_free_names(l);
            s.extend(ppi_free_names(r));
            s
        }
        PpiProcess::Nil | PpiProcess::Success => BTreeSet::new(),
    }
}

fn fresh_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    // Appending primes keeps the marker prefix of reserved names intact.
    let mut candidate = format!("{base}'");
    while avoid.contains(&candidate) {
        candidate.push('\'');
    }
    candidate
}

fn subst_binder(
    params: &[Name],
    body: &PpiProcess,
    sigma: &BTreeMap<Name, Name>,
) -> (Vec<Name>, PpiProcess) {
    let inner: BTreeMap<Name, Name> = sigma
        .iter()
        .filter(|(k, _)| !params.contains(*k))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let free = ppi_free_names(body);
    let incoming: BTreeSet<Name> = free
        .iter()
        .filter(|n| !params.contains(*n))
        .filter_map(|n| inner.get(n).cloned())
        .collect();
    if params.iter().any(|p| incoming.contains(p)) {
        let mut avoid: BTreeSet<Name> = free;
        avoid.extend(incoming.iter().cloned());
        avoid.extend(params.iter().cloned());
        let mut rename = BTreeMap::new();
        let mut new_params = Vec::new();
        for p in params {
            if incoming.contains(p) {
                let p2 = fresh_name(p, &avoid);
                avoid.insert(p2.clone());
                rename.insert(p.clone(), p2.clone());
                new_params.push(p2);
            } else {
                new_params.push(p.clone());
            }
        }
        let renamed = ppi_subst(body, &rename);
        (new_params, ppi_subst(&renamed, &inner))
    } else {
        (params.to_vec(), ppi_subst(body, &inner))
    }
}

/// Capture-avoiding simultaneous substitution of free names.
pub fn ppi_subst(p: &PpiProcess, sigma: &BTreeMap<Name, Name>) -> PpiProcess {
    if sigma.is_empty() {
        return p.clone();
    }
    let apply = |n: &Name| sigma.get(n).cloned().unwrap_or_else(|| n.clone());
    match p {
        PpiProcess::BranchIn(x, brs) => PpiProcess::BranchIn(
            apply(x),
            brs.iter()
                .map(|(i, (params, cont))| {
                    let (params, cont) = subst_binder(params, cont, sigma);
                    (*i, (params, cont))
                })
                .collect(),
        ),
        PpiProcess::SelectOut(x, brs) => PpiProcess::SelectOut(
            apply(x),
            brs.iter()
                .map(|(i, (pr, args, cont))| {
                    (
                        *i,
                        (
                            pr.clone(),
                            args.iter().map(apply).collect(),
                            ppi_subst(cont, sigma),
                        ),
                    )
                })
                .collect(),
        ),
        PpiProcess::RepIn(x, params, body) => {
            let (params, body) = subst_binder(params, body, sigma);
            PpiProcess::RepIn(apply(x), params, Box::new(body))
        }
        PpiProcess::OutPrefix(x, args, cont) => PpiProcess::out_prefix(
            apply(x),
            args.iter().map(apply).collect(),
            ppi_subst(cont, sigma),
        ),
        PpiProcess::Restrict(x, b) => {
            let inner: BTreeMap<Name, Name> = sigma
                .iter()
                .filter(|(k, _)| *k != x)
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            let free = ppi_free_names(b);
            let captures = free
                .iter()
                .filter(|n| *n != x)
                .filter_map(|n| inner.get(n))
                .any(|v| v == x);
            if captures {
                let mut avoid: BTreeSet<Name> = free;
                avoid.extend(inner.values().cloned());
                let x2 = fresh_name(x, &avoid);
                let renamed = ppi_subst(b, &[(x.clone(), x2.clone())].into());
                PpiProcess::restrict(x2, ppi_subst(&renamed, &inner))
            } else {
                PpiProcess::restrict(x.clone(), ppi_subst(b, &inner))
            }
        }
        PpiProcess::Par(l, r) => {
            PpiProcess::par(ppi_subst(l, sigma), ppi_subst(r, sigma))
        }
        PpiProcess::Nil => PpiProcess::Nil,
        PpiProcess::Success => PpiProcess::Success,
    }
}

fn placeholders(params: &[Name]) -> Vec<Name> {
    (0..params.len())
        .map(|k| format!("{PLACEHOLDER_PREFIX}{k}"))
        .collect()
}

fn with_placeholders(params: &[Name], cont: &PpiProcess) -> (Vec<Name>, PpiProcess) {
    let ph = placeholders(params);
    let sigma: BTreeMap<Name, Name> = params
        .iter()
        .cloned()
        .zip(ph.iter().cloned())
        .collect();
    (ph, ppi_subst(cont, &sigma))
}

/// Parallel composition that drops inert sides, used for communication
/// successors.
fn par_clean(l: PpiProcess, r: PpiProcess) -> PpiProcess {
    match (l, r) {
        (PpiProcess::Nil, PpiProcess::Nil) => PpiProcess::Nil,
        (PpiProcess::Nil, r) => r,
        (l, PpiProcess::Nil) => l,
        (l, r) => PpiProcess::par(l, r),
    }
}

fn com_matches(a: &PpiLabel, b: &PpiLabel) -> bool {
    match (a, b) {
        (PpiLabel::SelectOut(x, i, args), PpiLabel::SelectIn(y, j, params))
        | (PpiLabel::SelectIn(y, j, params), PpiLabel::SelectOut(x, i, args)) => {
            x == y && i == j && args.len() == params.len()
        }
        (PpiLabel::PlainOut(x, args), PpiLabel::PlainIn(y, params))
        | (PpiLabel::PlainIn(y, params), PpiLabel::PlainOut(x, args)) => {
            x == y && args.len() == params.len()
        }
        // A plain input absorbs whichever alternative a selecting output
        // commits to.
        (PpiLabel::SelectOut(x, _, args), PpiLabel::PlainIn(y, params))
        | (PpiLabel::PlainIn(y, params), PpiLabel::SelectOut(x, _, args)) => {
            x == y && args.len() == params.len()
        }
        _ => false,
    }
}

/// Instantiates an input-side successor (whose label objects are binder
/// placeholders) with the transmitted names.
fn instantiate(input_label: &PpiLabel, input_succ: &PpiProcess, args: &[Name]) -> PpiProcess {
    let sigma: BTreeMap<Name, Name> = input_label
        .objects()
        .iter()
        .cloned()
        .zip(args.iter().cloned())
        .collect();
    ppi_subst(input_succ, &sigma)
}

const COM_PAIRING_CAP: usize = 4096;

fn com_bundles(
    bundle: &StepBundle,
    units: &[&StepBundle],
    bundle_on_left: bool,
    out: &mut Vec<StepBundle>,
) {
    if bundle
        .alternatives
        .iter()
        .any(|(lab, _, _)| *lab == PpiLabel::Tau)
    {
        return;
    }
    // Candidate partners per alternative; every alternative needs one.
    let candidates: Vec<Vec<&StepBundle>> = bundle
        .alternatives
        .iter()
        .map(|(lab, _, _)| {
            units
                .iter()
                .copied()
                .filter(|u| {
                    u.alternatives.len() == 1
                        && u.alternatives[0].1.is_one()
                        && com_matches(lab, &u.alternatives[0].0)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    if candidates.iter().any(|c| c.is_empty()) {
        return;
    }
    let mut odometer = vec![0usize; candidates.len()];
    let mut emitted = 0usize;
    'outer: loop {
        let mut alts = Vec::new();
        let mut rep = bundle.from_rep;
        let mut subject = None;
        for (k, (lab, pr, succ)) in bundle.alternatives.iter().enumerate() {
            let partner = candidates[k][odometer[k]];
            let (plab, _, psucc) = &partner.alternatives[0];
            rep = rep || partner.from_rep;
            subject = lab.subject().cloned();
            let (my_succ, their_succ);
            if lab.is_output() {
                my_succ = succ.clone();
                their_succ = instantiate(plab, psucc, lab.objects());
            } else {
                my_succ = instantiate(lab, succ, plab.objects());
                their_succ = psucc.clone();
            }
            let combined = if bundle_on_left {
                par_clean(my_succ, their_succ)
            } else {
                par_clean(their_succ, my_succ)
            };
            alts.push((PpiLabel::Tau, pr.clone(), combined));
        }
        out.push(StepBundle {
            alternatives: alts,
            com: Some(ComEvidence {
                subject: subject.expect("communication label has a subject"),
                rep,
            }),
            from_rep: false,
        });
        emitted += 1;
        if emitted >= COM_PAIRING_CAP {
            break;
        }
        for pos in 0..candidates.len() {
            odometer[pos] += 1;
            if odometer[pos] < candidates[pos].len() {
                continue 'outer;
            }
            odometer[pos] = 0;
        }
        break;
    }
}

/// All rule instances available to a process. Input bundle labels carry
/// binder placeholders as objects; they are instantiated on communication.
pub fn ppi_step_bundles(p: &PpiProcess) -> Vec<StepBundle> {
    match p {
        PpiProcess::Nil | PpiProcess::Success => Vec::new(),
        PpiProcess::BranchIn(x, brs) => brs
            .iter()
            .map(|(i, (params, cont))| {
                let (ph, cont) = with_placeholders(params, cont);
                // A single-branch input is a plain input: it accepts any
                // selection alternative of a partner.
                let label = if brs.len() == 1 {
                    PpiLabel::PlainIn(x.clone(), ph)
                } else {
                    PpiLabel::SelectIn(x.clone(), *i, ph)
                };
                StepBundle {
                    alternatives: vec![(label, Prob::one(), cont)],
                    com: None,
                    from_rep: false,
                }
            })
            .collect(),
        PpiProcess::SelectOut(x, brs) => vec![StepBundle {
            alternatives: brs
                .iter()
                .map(|(i, (pr, args, cont))| {
                    (
                        PpiLabel::SelectOut(x.clone(), *i, args.clone()),
                        pr.clone(),
                        cont.clone(),
                    )
                })
                .collect(),
            com: None,
            from_rep: false,
        }],
        PpiProcess::RepIn(x, params, body) => {
            let (ph, cont) = with_placeholders(params, body);
            vec![StepBundle {
                alternatives: vec![(
                    PpiLabel::PlainIn(x.clone(), ph),
                    Prob::one(),
                    PpiProcess::par(cont, p.clone()),
                )],
                com: None,
                from_rep: true,
            }]
        }
        PpiProcess::OutPrefix(x, args, cont) => vec![StepBundle {
            alternatives: vec![(
                PpiLabel::PlainOut(x.clone(), args.clone()),
                Prob::one(),
                (**cont).clone(),
            )],
            com: None,
            from_rep: false,
        }],
        PpiProcess::Restrict(x, b) => ppi_step_bundles(b)
            .into_iter()
            .filter(|bundle| {
                bundle.alternatives.iter().all(|(lab, _, _)| {
                    // No scope extrusion: a restricted name can neither be a
                    // subject nor be transmitted outwards.
                    lab.subject() != Some(x)
                        && !(lab.is_output() && lab.objects().contains(x))
                })
            })
            .map(|bundle| StepBundle {
                alternatives: bundle
                    .alternatives
                    .into_iter()
                    .map(|(lab, pr, succ)| (lab, pr, PpiProcess::restrict(x.clone(), succ)))
                    .collect(),
                ..bundle
            })
            .collect(),
        PpiProcess::Par(l, r) => {
            let lb = ppi_step_bundles(l);
            let rb = ppi_step_bundles(r);
            let mut out = Vec::new();
            for bundle in &lb {
                out.push(StepBundle {
                    alternatives: bundle
                        .alternatives
                        .iter()
                        .map(|(lab, pr, succ)| {
                            (lab.clone(), pr.clone(), PpiProcess::par(succ.clone(), (**r).clone()))
                        })
                        .collect(),
                    com: bundle.com.clone(),
                    from_rep: bundle.from_rep,
                });
            }
            for bundle in &rb {
                out.push(StepBundle {
                    alternatives: bundle
                        .alternatives
                        .iter()
                        .map(|(lab, pr, succ)| {
                            (lab.clone(), pr.clone(), PpiProcess::par((**l).clone(), succ.clone()))
                        })
                        .collect(),
                    com: bundle.com.clone(),
                    from_rep: bundle.from_rep,
                });
            }
            let r_units: Vec<&StepBundle> = rb.iter().collect();
            let l_units: Vec<&StepBundle> = lb.iter().collect();
            for bundle in &lb {
                com_bundles(bundle, &r_units, true, &mut out);
            }
            for bundle in &rb {
                com_bundles(bundle, &l_units, false, &mut out);
            }
            out
        }
    }
}

/// Reduction: every tau bundle collapsed to a distribution over successors
/// (equal successors merged), tagged with its step class.
pub fn ppi_reduce(p: &PpiProcess) -> Vec<(Distribution<PpiProcess>, StepClass)> {
    let mut out: BTreeSet<(Distribution<PpiProcess>, StepClass)> = BTreeSet::new();
    for bundle in ppi_step_bundles(p) {
        if bundle
            .alternatives
            .iter()
            .all(|(lab, _, _)| *lab == PpiLabel::Tau)
            && !bundle.alternatives.is_empty()
        {
            let dist = Distribution::from_parts(
                bundle
                    .alternatives
                    .iter()
                    .map(|(_, pr, succ)| (succ.clone(), pr.ratio().clone())),
            )
            .expect("bundle probabilities sum to 1");
            let class = bundle
                .com
                .as_ref()
                .map(classify_step)
                .unwrap_or(StepClass::Other("?".into()));
            out.insert((dist, class));
        }
    }
    out.into_iter().collect()
}

/// Reduction without classification, for distribution-level exploration.
pub fn ppi_reduce_dists(p: &PpiProcess) -> Vec<Distribution<PpiProcess>> {
    let mut seen = BTreeSet::new();
    ppi_reduce(p)
        .into_iter()
        .filter_map(|(d, _)| if seen.insert(d.clone()) { Some(d) } else { None })
        .collect()
}

fn flatten_par(p: PpiProcess, out: &mut Vec<PpiProcess>) {
    match p {
        PpiProcess::Par(l, r) => {
            flatten_par(*l, out);
            flatten_par(*r, out);
        }
        PpiProcess::Nil => {}
        other => out.push(other),
    }
}

fn par_of(mut comps: Vec<PpiProcess>) -> PpiProcess {
    match comps.len() {
        0 => PpiProcess::Nil,
        1 => comps.pop().unwrap(),
        _ => {
            let mut it = comps.into_iter().rev();
            let mut acc = it.next().unwrap();
            for c in it {
                acc = PpiProcess::par(c, acc);
            }
            acc
        }
    }
}

/// Pushes a restriction inward to the smallest parallel group mentioning the
/// name, dropping it when the name is unused.
fn push_res(x: Name, t: PpiProcess) -> PpiProcess {
    if !ppi_free_names(&t).contains(&x) {
        return t;
    }
    match t {
        PpiProcess::Par(..) => {
            let mut comps = Vec::new();
            flatten_par(t, &mut comps);
            let (with, without): (Vec<_>, Vec<_>) = comps
                .into_iter()
                .partition(|c| ppi_free_names(c).contains(&x));
            if without.is_empty() && with.len() > 1 {
                PpiProcess::restrict(x, par_of(with))
            } else {
                let mut comps = without;
                comps.push(push_res(x, par_of(with)));
                par_of(comps)
            }
        }
        PpiProcess::Restrict(y, u) => PpiProcess::restrict(y, push_res(x, *u)),
        other => PpiProcess::restrict(x, other),
    }
}

/// Structural simplification: parallel groups flattened with inert units
/// removed, unused restrictions dropped, restrictions pushed inward. Applies
/// congruently, including under prefixes.
fn simp(p: &PpiProcess) -> PpiProcess {
    match p {
        PpiProcess::Par(..) => {
            let mut comps = Vec::new();
            flatten_par(p.clone(), &mut comps);
            let comps: Vec<PpiProcess> = comps
                .iter()
                .map(simp)
                .flat_map(|c| {
                    let mut v = Vec::new();
                    flatten_par(c, &mut v);
                    v
                })
                .collect();
            par_of(comps)
        }
        PpiProcess::Restrict(x, b) => push_res(x.clone(), simp(b)),
        PpiProcess::BranchIn(x, brs) => PpiProcess::BranchIn(
            x.clone(),
            brs.iter()
                .map(|(i, (params, cont))| (*i, (params.clone(), simp(cont))))
                .collect(),
        ),
        PpiProcess::SelectOut(x, brs) => PpiProcess::SelectOut(
            x.clone(),
            brs.iter()
                .map(|(i, (pr, args, cont))| (*i, (pr.clone(), args.clone(), simp(cont))))
                .collect(),
        ),
        PpiProcess::RepIn(x, params, body) => {
            PpiProcess::rep_in(x.clone(), params.clone(), simp(body))
        }
        PpiProcess::OutPrefix(x, args, cont) => {
            PpiProcess::out_prefix(x.clone(), args.clone(), simp(cont))
        }
        PpiProcess::Nil => PpiProcess::Nil,
        PpiProcess::Success => PpiProcess::Success,
    }
}

fn canon_name(original: &str, index: usize) -> Name {
    format!("{}%{}", marker_category(original), index)
}

const PERMUTATION_CAP: usize = 6;

fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, head) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

fn canon(p: &PpiProcess, rho: &BTreeMap<Name, Name>, next: usize) -> PpiProcess {
    let apply = |n: &Name| rho.get(n).cloned().unwrap_or_else(|| n.clone());
    match p {
        PpiProcess::Nil => PpiProcess::Nil,
        PpiProcess::Success => PpiProcess::Success,
        PpiProcess::Par(..) => {
            let mut comps = Vec::new();
            flatten_par(p.clone(), &mut comps);
            let mut canon_comps: Vec<PpiProcess> =
                comps.iter().map(|c| canon(c, rho, next)).collect();
            canon_comps.sort();
            par_of(canon_comps)
        }
        PpiProcess::Restrict(..) => {
            // Collect the maximal restriction chain and canonicalize its
            // order: adjacent restrictions commute, so pick the least result.
            let mut names = Vec::new();
            let mut body = p;
            while let PpiProcess::Restrict(x, b) = body {
                names.push(x.clone());
                body = b;
            }
            let orders = if names.len() <= PERMUTATION_CAP {
                permutations(&names)
            } else {
                let mut sorted = names.clone();
                sorted.sort();
                vec![sorted]
            };
            orders
                .into_iter()
                .map(|order| {
                    let mut inner = rho.clone();
                    let mut canon_names = Vec::new();
                    for (k, n) in order.iter().enumerate() {
                        let cn = canon_name(n, next + k);
                        inner.insert(n.clone(), cn.clone());
                        canon_names.push(cn);
                    }
                    let mut acc = canon(body, &inner, next + order.len());
                    for cn in canon_names.into_iter().rev() {
                        acc = PpiProcess::restrict(cn, acc);
                    }
                    acc
                })
                .min()
                .unwrap()
        }
        PpiProcess::BranchIn(x, brs) => PpiProcess::BranchIn(
            apply(x),
            brs.iter()
                .map(|(i, (params, cont))| {
                    let mut inner = rho.clone();
                    let mut canon_params = Vec::new();
                    for (k, n) in params.iter().enumerate() {
                        let cn = canon_name(n, next + k);
                        inner.insert(n.clone(), cn.clone());
                        canon_params.push(cn);
                    }
                    (*i, (canon_params, canon(cont, &inner, next + params.len())))
                })
                .collect(),
        ),
        PpiProcess::SelectOut(x, brs) => PpiProcess::SelectOut(
            apply(x),
            brs.iter()
                .map(|(i, (pr, args, cont))| {
                    (
                        *i,
                        (
                            pr.clone(),
                            args.iter().map(apply).collect(),
                            canon(cont, rho, next),
                        ),
                    )
                })
                .collect(),
        ),
        PpiProcess::RepIn(x, params, body) => {
            let mut inner = rho.clone();
            let mut canon_params = Vec::new();
            for (k, n) in params.iter().enumerate() {
                let cn = canon_name(n, next + k);
                inner.insert(n.clone(), cn.clone());
                canon_params.push(cn);
            }
            PpiProcess::RepIn(
                apply(x),
                canon_params,
                Box::new(canon(body, &inner, next + params.len())),
            )
        }
        PpiProcess::OutPrefix(x, args, cont) => PpiProcess::out_prefix(
            apply(x),
            args.iter().map(apply).collect(),
            canon(cont, rho, next),
        ),
    }
}

/// The canonical form deciding structural congruence: two processes are
/// congruent (modulo alpha-conversion, inert units, commutativity and
/// associativity of parallel, unused restriction, restriction exchange and
/// scope of restriction over parallel) exactly when their normal forms are
/// identical.
pub fn ppi_normal_form(p: &PpiProcess) -> PpiProcess {
    canon(&simp(p), &BTreeMap::new(), 0)
}

pub fn ppi_struct_congruent(a: &PpiProcess, b: &PpiProcess) -> bool {
    ppi_normal_form(a) == ppi_normal_form(b)
}

/// Structural congruence lifted to distributions: equal canonical supports
/// with equal weights.
pub fn ppi_dist_canonical(d: &Distribution<PpiProcess>) -> Distribution<PpiProcess> {
    d.map_terms(ppi_normal_form)
}

pub fn ppi_dist_congruent(a: &Distribution<PpiProcess>, b: &Distribution<PpiProcess>) -> bool {
    ppi_dist_canonical(a) == ppi_dist_canonical(b)
}

fn alpha_rec(
    a: &PpiProcess,
    b: &PpiProcess,
    la: &BTreeMap<Name, usize>,
    lb: &BTreeMap<Name, usize>,
    next: usize,
) -> bool {
    let same_name = |x: &Name, y: &Name| match (la.get(x), lb.get(y)) {
        (Some(i), Some(j)) => i == j,
        (None, None) => x == y,
        _ => false,
    };
    let bind = |names_a: &[Name],
                names_b: &[Name],
                la: &BTreeMap<Name, usize>,
                lb: &BTreeMap<Name, usize>| {
        let mut la = la.clone();
        let mut lb = lb.clone();
        for (k, (x, y)) in names_a.iter().zip(names_b.iter()).enumerate() {
            la.insert(x.clone(), next + k);
            lb.insert(y.clone(), next + k);
        }
        (la, lb)
    };
    match (a, b) {
        (PpiProcess::Nil, PpiProcess::Nil) | (PpiProcess::Success, PpiProcess::Success) => true,
        (PpiProcess::Par(al, ar), PpiProcess::Par(bl, br)) => {
            alpha_rec(al, bl, la, lb, next) && alpha_rec(ar, br, la, lb, next)
        }
        (PpiProcess::Restrict(x, ab), PpiProcess::Restrict(y, bb)) => {
            let (la2, lb2) = bind(&[x.clone()], &[y.clone()], la, lb);
            alpha_rec(ab, bb, &la2, &lb2, next + 1)
        }
        (PpiProcess::BranchIn(x, abrs), PpiProcess::BranchIn(y, bbrs)) => {
            same_name(x, y)
                && abrs.len() == bbrs.len()
                && abrs.iter().zip(bbrs.iter()).all(|((i, (ap, ac)), (j, (bp, bc)))| {
                    if i != j || ap.len() != bp.len() {
                        return false;
                    }
                    let (la2, lb2) = bind(ap, bp, la, lb);
                    alpha_rec(ac, bc, &la2, &lb2, next + ap.len())
                })
        }
        (PpiProcess::SelectOut(x, abrs), PpiProcess::SelectOut(y, bbrs)) => {
            same_name(x, y)
                && abrs.len() == bbrs.len()
                && abrs
                    .iter()
                    .zip(bbrs.iter())
                    .all(|((i, (apr, aa, ac)), (j, (bpr, ba, bc)))| {
                        i == j
                            && apr == bpr
                            && aa.len() == ba.len()
                            && aa.iter().zip(ba.iter()).all(|(m, n)| same_name(m, n))
                            && alpha_rec(ac, bc, la, lb, next)
                    })
        }
        (PpiProcess::RepIn(x, ap, ab), PpiProcess::RepIn(y, bp, bb)) => {
            same_name(x, y) && ap.len() == bp.len() && {
                let (la2, lb2) = bind(ap, bp, la, lb);
                alpha_rec(ab, bb, &la2, &lb2, next + ap.len())
            }
        }
        (PpiProcess::OutPrefix(x, aa, ac), PpiProcess::OutPrefix(y, ba, bc)) => {
            same_name(x, y)
                && aa.len() == ba.len()
                && aa.iter().zip(ba.iter()).all(|(m, n)| same_name(m, n))
                && alpha_rec(ac, bc, la, lb, next)
        }
        _ => false,
    }
}

pub fn ppi_alpha_equiv(a: &PpiProcess, b: &PpiProcess) -> bool {
    alpha_rec(a, b, &BTreeMap::new(), &BTreeMap::new(), 0)
}

fn has_unguarded_success(p: &PpiProcess) -> bool {
    match p {
        PpiProcess::Success => true,
        PpiProcess::Par(l, r) => has_unguarded_success(l) || has_unguarded_success(r),
        PpiProcess::Restrict(_, b) => has_unguarded_success(b),
        _ => false,
    }
}

/// Immediate barb: unguarded success, or an unrestricted input/output
/// capability on the observed name.
pub fn ppi_has_barb(p: &PpiProcess, obs: &crate::pccs::Obs) -> bool {
    match obs {
        crate::pccs::Obs::Success => has_unguarded_success(p),
        crate::pccs::Obs::In(n) => ppi_step_bundles(p).iter().any(|b| {
            b.alternatives
                .iter()
                .any(|(lab, _, _)| lab.is_input() && lab.subject() == Some(n))
        }),
        crate::pccs::Obs::Out(n) => ppi_step_bundles(p).iter().any(|b| {
            b.alternatives
                .iter()
                .any(|(lab, _, _)| lab.is_output() && lab.subject() == Some(n))
        }),
    }
}

/// Reachable barb with a completeness flag for the bounded search.
pub fn ppi_reach_barb(
    p: &PpiProcess,
    obs: &crate::pccs::Obs,
    budget: &ExplorationBudget,
) -> (bool, bool) {
    let step = ppi_reduce_dists;
    let mut step_fn = |t: &PpiProcess| step(t);
    let ms = dist_multistep(
        &Distribution::point(p.clone()),
        &mut step_fn,
        budget,
        &ppi_dist_canonical,
    );
    for d in &ms.dists {
        for t in d.support() {
            if ppi_has_barb(t, obs) {
                return (true, ms.complete);
            }
        }
    }
    (false, ms.complete)
}

impl fmt::Display for PpiProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cont = |p: &PpiProcess, f: &mut fmt::Formatter<'_>| match p {
            PpiProcess::Par(..) => write!(f, "({p})"),
            _ => write!(f, "{p}"),
        };
        match self {
            PpiProcess::BranchIn(x, brs) => {
                write!(f, "{x}?{{")?;
                for (k, (i, (params, body))) in brs.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{i}({}): {body}", params.join(","))?;
                }
                write!(f, "}}")
            }
            PpiProcess::SelectOut(x, brs) => {
                write!(f, "{x}!{{")?;
                for (k, (i, (pr, args, body))) in brs.iter().enumerate() {
                    if k > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{pr} {i}({}): {body}", args.join(","))?;
                }
                write!(f, "}}")
            }
            PpiProcess::RepIn(x, params, body) => {
                write!(f, "!{x}({}).", params.join(","))?;
                cont(body, f)
            }
            PpiProcess::OutPrefix(x, args, body) => {
                write!(f, "{x}!<{}>.", args.join(","))?;
                cont(body, f)
            }
            PpiProcess::Restrict(x, b) => {
                write!(f, "new {x}. ")?;
                cont(b, f)
            }
            PpiProcess::Par(l, r) => {
                let wrap = |p: &PpiProcess, f: &mut fmt::Formatter<'_>| match p {
                    PpiProcess::Par(..) | PpiProcess::Restrict(..) => write!(f, "({p})"),
                    _ => write!(f, "{p}"),
                };
                wrap(l, f)?;
                write!(f, " | ")?;
                wrap(r, f)
            }
            PpiProcess::Nil => write!(f, "0"),
            PpiProcess::Success => write!(f, "ok"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn branch_in(x: &str, brs: Vec<(u32, Vec<&str>, PpiProcess)>) -> PpiProcess {
        PpiProcess::BranchIn(
            x.into(),
            brs.into_iter()
                .map(|(i, ps, c)| (i, (ps.into_iter().map(String::from).collect(), c)))
                .collect(),
        )
    }

    fn select_out(x: &str, brs: Vec<(u32, (i64, i64), Vec<&str>, PpiProcess)>) -> PpiProcess {
        PpiProcess::SelectOut(
            x.into(),
            brs.into_iter()
                .map(|(i, (n, d), args, c)| {
                    (
                        i,
                        (
                            Prob::new(n, d).unwrap(),
                            args.into_iter().map(String::from).collect(),
                            c,
                        ),
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn branch_input_offers_one_unit_bundle_per_branch() {
        let p = branch_in(
            "x",
            vec![
                (1, vec!["y"], PpiProcess::Success),
                (2, vec![], PpiProcess::Nil),
            ],
        );
        let bundles = ppi_step_bundles(&p);
        assert_eq!(bundles.len(), 2);
        assert!(bundles.iter().all(|b| b.alternatives.len() == 1));
    }

    #[test]
    fn select_output_is_one_probabilistic_bundle() {
        let p = select_out(
            "x",
            vec![
                (1, (1, 8), vec![], PpiProcess::Success),
                (2, (7, 8), vec![], PpiProcess::Nil),
            ],
        );
        let bundles = ppi_step_bundles(&p);
        assert_eq!(bundles.len(), 1);
        assert_eq!(bundles[0].alternatives.len(), 2);
    }

    #[test]
    fn replicated_input_is_retained() {
        let rep = PpiProcess::rep_in("x", vec![], PpiProcess::Success);
        let out = PpiProcess::out_prefix("x", vec![], PpiProcess::Nil);
        let p = PpiProcess::par(out, rep.clone());
        let steps = ppi_reduce(&p);
        assert_eq!(steps.len(), 1);
        let (d, class) = &steps[0];
        assert_eq!(*class, StepClass::Rep);
        assert!(d
            .prob(&PpiProcess::par(PpiProcess::Success, rep))
            .is_integer());
    }

    #[test]
    fn communication_substitutes_transmitted_names() {
        // x!<a>.0 | x?{1(y): y!<>.0} reduces to a!<>.0.
        let recv = branch_in(
            "x",
            vec![(1, vec!["y"], PpiProcess::out_prefix("y", vec![], PpiProcess::Nil))],
        );
        let send = PpiProcess::out_prefix("x", vec!["a".into()], PpiProcess::Nil);
        let p = PpiProcess::par(send.clone(), recv);
        let steps = ppi_reduce(&p);
        assert_eq!(steps.len(), 1);
        let expect = PpiProcess::out_prefix("a", vec![], PpiProcess::Nil);
        assert!(steps[0].0.prob(&expect).is_integer());
        // An arity mismatch silently produces no step.
        let q = PpiProcess::par(send, branch_in("x", vec![(1, vec![], PpiProcess::Nil)]));
        assert!(ppi_reduce(&q).is_empty());
    }

    #[test]
    fn probabilistic_communication_collapses_equal_successors() {
        let recv = branch_in(
            "x",
            vec![(1, vec![], PpiProcess::Nil), (2, vec![], PpiProcess::Nil)],
        );
        let send = select_out(
            "x",
            vec![
                (1, (1, 3), vec![], PpiProcess::Success),
                (2, (2, 3), vec![], PpiProcess::Success),
            ],
        );
        let p = PpiProcess::par(send, recv);
        let steps = ppi_reduce(&p);
        assert_eq!(steps.len(), 1);
        // Both branches lead to ok, so the distribution is a point.
        assert_eq!(steps[0].0.len(), 1);
        assert!(steps[0].0.prob(&PpiProcess::Success).is_integer());
    }

    #[test]
    fn restriction_blocks_subject_and_transmission() {
        let send = PpiProcess::out_prefix("x", vec![], PpiProcess::Nil);
        let p = PpiProcess::restrict("x", send.clone());
        assert!(ppi_step_bundles(&p).is_empty());
        let leak = PpiProcess::restrict(
            "a",
            PpiProcess::out_prefix("x", vec!["a".into()], PpiProcess::Nil),
        );
        assert!(ppi_step_bundles(&leak).is_empty());
        // Unrelated restrictions pass through.
        let fine = PpiProcess::restrict("z", send);
        assert_eq!(ppi_step_bundles(&fine).len(), 1);
    }

    #[test]
    fn communication_under_restriction() {
        let recv = branch_in("x", vec![(1, vec![], PpiProcess::Success)]);
        let send = select_out("x", vec![(1, (1, 1), vec![], PpiProcess::Nil)]);
        let p = PpiProcess::restrict("x", PpiProcess::par(send, recv));
        let steps = ppi_reduce(&p);
        assert_eq!(steps.len(), 1);
        let expect = PpiProcess::restrict("x", PpiProcess::Success);
        assert!(steps[0].0.prob(&expect).is_integer());
    }

    #[test]
    fn step_classes_follow_markers() {
        let mk = |chan: &str| {
            PpiProcess::par(
                select_out(chan, vec![(1, (1, 1), vec![], PpiProcess::Nil)]),
                branch_in(chan, vec![(1, vec![], PpiProcess::Nil)]),
            )
        };
        assert_eq!(ppi_reduce(&mk("s_a"))[0].1, StepClass::A);
        assert_eq!(ppi_reduce(&mk("#i0"))[0].1, StepClass::B);
        assert_eq!(ppi_reduce(&mk("#t0"))[0].1, StepClass::Tau);
        assert_eq!(ppi_reduce(&mk("plain"))[0].1, StepClass::Other("plain".into()));
    }

    #[test]
    fn normal_form_identifies_congruent_processes() {
        let a = PpiProcess::out_prefix("a", vec![], PpiProcess::Nil);
        let b = PpiProcess::out_prefix("b", vec![], PpiProcess::Nil);
        // P|0 = P
        assert!(ppi_struct_congruent(
            &PpiProcess::par(a.clone(), PpiProcess::Nil),
            &a
        ));
        // commutativity and associativity
        assert!(ppi_struct_congruent(
            &PpiProcess::par(a.clone(), b.clone()),
            &PpiProcess::par(b.clone(), a.clone())
        ));
        let c = PpiProcess::Success;
        assert!(ppi_struct_congruent(
            &PpiProcess::par(PpiProcess::par(a.clone(), b.clone()), c.clone()),
            &PpiProcess::par(a.clone(), PpiProcess::par(b.clone(), c.clone()))
        ));
        // unused restriction
        assert!(ppi_struct_congruent(
            &PpiProcess::restrict("z", a.clone()),
            &a
        ));
        assert!(ppi_struct_congruent(
            &PpiProcess::restrict("z", PpiProcess::Nil),
            &PpiProcess::Nil
        ));
        // exchange of restrictions
        let two = |x: &str, y: &str| {
            PpiProcess::restrict(
                x,
                PpiProcess::restrict(
                    y,
                    PpiProcess::par(
                        PpiProcess::out_prefix("x", vec![], PpiProcess::Nil),
                        PpiProcess::out_prefix("y", vec![], PpiProcess::Nil),
                    ),
                ),
            )
        };
        assert!(ppi_struct_congruent(&two("x", "y"), &two("y", "x")));
        // scope of restriction over parallel
        let scoped = PpiProcess::restrict("a", PpiProcess::par(a.clone(), b.clone()));
        let pushed = PpiProcess::par(PpiProcess::restrict("a", a.clone()), b.clone());
        assert!(ppi_struct_congruent(&scoped, &pushed));
        // alpha-conversion
        let v = |n: &str| {
            PpiProcess::restrict(n, PpiProcess::out_prefix(n, vec![], PpiProcess::Nil))
        };
        assert!(ppi_struct_congruent(&v("x"), &v("y")));
        // distinct processes stay distinct
        assert!(!ppi_struct_congruent(&a, &b));
        assert!(!ppi_struct_congruent(&a, &PpiProcess::par(a.clone(), a.clone())));
    }

    #[test]
    fn normal_form_preserves_marker_categories() {
        let p = PpiProcess::restrict(
            "#i3",
            PpiProcess::out_prefix("#i3", vec![], PpiProcess::Nil),
        );
        let nf = ppi_normal_form(&p);
        if let PpiProcess::Restrict(x, _) = &nf {
            assert!(x.starts_with("#i"));
        } else {
            panic!("expected a restriction, got {nf}");
        }
    }

    #[test]
    fn reduction_commutes_with_normal_form() {
        let recv = branch_in("x", vec![(1, vec![], PpiProcess::Success)]);
        let send = select_out("x", vec![(1, (1, 1), vec![], PpiProcess::Nil)]);
        let p = PpiProcess::par(
            PpiProcess::par(send, PpiProcess::Nil),
            PpiProcess::restrict("dead", recv),
        );
        let direct: BTreeSet<_> = ppi_reduce_dists(&p)
            .iter()
            .map(ppi_dist_canonical)
            .collect();
        let via_nf: BTreeSet<_> = ppi_reduce_dists(&ppi_normal_form(&p))
            .iter()
            .map(ppi_dist_canonical)
            .collect();
        assert_eq!(direct, via_nf);
    }

    #[test]
    fn alpha_equivalence() {
        let v = |n: &str| {
            PpiProcess::restrict(n, PpiProcess::out_prefix(n, vec![], PpiProcess::Nil))
        };
        assert!(ppi_alpha_equiv(&v("x"), &v("y")));
        let free = |n: &str| PpiProcess::out_prefix(n, vec![], PpiProcess::Nil);
        assert!(!ppi_alpha_equiv(&free("x"), &free("y")));
        // Parallel order matters for plain alpha-equivalence.
        let p = PpiProcess::par(free("a"), free("b"));
        let q = PpiProcess::par(free("b"), free("a"));
        assert!(!ppi_alpha_equiv(&p, &q));
    }

    #[test]
    fn barbs_respect_restriction() {
        use crate::pccs::Obs;
        let send = PpiProcess::out_prefix("x", vec![], PpiProcess::Nil);
        assert!(ppi_has_barb(&send, &Obs::Out("x".into())));
        assert!(!ppi_has_barb(&send, &Obs::In("x".into())));
        let hidden = PpiProcess::restrict("x", send);
        assert!(!ppi_has_barb(&hidden, &Obs::Out("x".into())));
        assert!(ppi_has_barb(&PpiProcess::Success, &Obs::Success));
    }

    #[test]
    fn reach_barb_through_reduction() {
        use crate::pccs::Obs;
        let recv = branch_in(
            "x",
            vec![(1, vec![], PpiProcess::out_prefix("y", vec![], PpiProcess::Nil))],
        );
        let send = select_out("x", vec![(1, (1, 1), vec![], PpiProcess::Nil)]);
        let p = PpiProcess::restrict("x", PpiProcess::par(send, recv));
        assert!(!ppi_has_barb(&p, &Obs::Out("y".into())));
        let (found, complete) =
            ppi_reach_barb(&p, &Obs::Out("y".into()), &ExplorationBudget::with_depth(3));
        assert!(found && complete);
    }

    #[test]
    fn substitution_avoids_capture() {
        // (new b. x!<a>.b!<>.0){a -> b} must not capture the incoming b.
        let p = PpiProcess::restrict(
            "b",
            PpiProcess::out_prefix(
                "x",
                vec!["a".into()],
                PpiProcess::out_prefix("b", vec![], PpiProcess::Nil),
            ),
        );
        let q = ppi_subst(&p, &[("a".to_string(), "b".to_string())].into());
        assert!(ppi_free_names(&q).contains("b"));
        if let PpiProcess::Restrict(x, _) = &q {
            assert_ne!(x, "b");
        } else {
            panic!("expected restriction");
        }
    }

    #[test]
    fn product_probabilities_remain_exact() {
        let left = select_out(
            "u",
            vec![
                (1, (1, 8), vec![], PpiProcess::Success),
                (2, (7, 8), vec![], PpiProcess::Nil),
            ],
        );
        let bundles = ppi_step_bundles(&left);
        assert_eq!(bundles[0].alternatives[0].1.ratio(), &r(1, 8));
        assert_eq!(bundles[0].alternatives[1].1.ratio(), &r(7, 8));
    }
}
