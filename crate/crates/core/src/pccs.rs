//! The probabilistic source calculus: guarded probabilistic choice, parallel
//! composition, restriction, relabelling and recursion via process
//! constants. Labelled semantics over distributions, reduction, barbs.

use crate::prob::{Distribution, ExplorationBudget, Prob, dist_multistep};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

pub type Name = String;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PccsError {
    #[error("unknown process constant {0}")]
    UnknownConstant(String),
    #[error("constant {name} expects {expected} arguments, got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("branch probabilities of a choice must sum to 1")]
    BadChoiceSum,
    #[error("duplicate definition of constant {0}")]
    DuplicateDefinition(String),
    #[error("duplicate parameter in definition of {0}")]
    DuplicateParameter(String),
    #[error("definition body of {0} mentions names outside its parameters")]
    OpenDefinition(String),
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PccsGuard {
    In(Name),
    Out(Name),
    Tau,
}

/// A finite-support renaming of channel names; identity entries are never
/// stored.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RenamingFn(BTreeMap<Name, Name>);

impl RenamingFn {
    pub fn new(map: BTreeMap<Name, Name>) -> RenamingFn {
        RenamingFn(map.into_iter().filter(|(k, v)| k != v).collect())
    }

    pub fn apply(&self, n: &str) -> Name {
        self.0.get(n).cloned().unwrap_or_else(|| n.to_string())
    }

    pub fn entries(&self) -> impl Iterator<Item = (&Name, &Name)> {
        self.0.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &Name> {
        self.0.keys()
    }

    /// The renaming `n -> after(self(n))`.
    pub fn then(&self, after: &BTreeMap<Name, Name>) -> RenamingFn {
        let mut map = BTreeMap::new();
        for (k, v) in &self.0 {
            let w = after.get(v).cloned().unwrap_or_else(|| v.clone());
            map.insert(k.clone(), w);
        }
        for (k, v) in after {
            if !self.0.contains_key(k) {
                map.insert(k.clone(), v.clone());
            }
        }
        RenamingFn::new(map)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PccsProcess {
    /// `u.(p1: P1 + ... + pn: Pn)` with the probabilities summing to 1.
    Choice(PccsGuard, Vec<(Prob, PccsProcess)>),
    Par(Box<PccsProcess>, Box<PccsProcess>),
    /// Restriction of a set of names (the set is kept sorted).
    Restrict(Box<PccsProcess>, BTreeSet<Name>),
    Relabel(Box<PccsProcess>, RenamingFn),
    /// Instantiation of a process constant.
    Call(String, Vec<Name>),
    Success,
    Inert,
}

impl PccsProcess {
    pub fn choice(
        guard: PccsGuard,
        branches: Vec<(Prob, PccsProcess)>,
    ) -> Result<PccsProcess, PccsError> {
        let sum: num_rational::BigRational =
            branches.iter().map(|(p, _)| p.ratio().clone()).sum();
        if !num_traits::One::is_one(&sum) {
            return Err(PccsError::BadChoiceSum);
        }
        Ok(PccsProcess::Choice(guard, branches))
    }

    pub fn par(l: PccsProcess, r: PccsProcess) -> PccsProcess {
        PccsProcess::Par(Box::new(l), Box::new(r))
    }

    pub fn restrict(p: PccsProcess, names: BTreeSet<Name>) -> PccsProcess {
        PccsProcess::Restrict(Box::new(p), names)
    }

    pub fn relabel(p: PccsProcess, f: RenamingFn) -> PccsProcess {
        PccsProcess::Relabel(Box::new(p), f)
    }
}

/// Process-constant definitions `C(x1..xk) = P`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DefEnv {
    defs: BTreeMap<String, (Vec<Name>, PccsProcess)>,
}

impl DefEnv {
    pub fn new() -> DefEnv {
        DefEnv::default()
    }

    pub fn define(
        &mut self,
        name: &str,
        params: Vec<Name>,
        body: PccsProcess,
    ) -> Result<(), PccsError> {
        let distinct: BTreeSet<&Name> = params.iter().collect();
        if distinct.len() != params.len() {
            return Err(PccsError::DuplicateParameter(name.to_string()));
        }
        if self
            .defs
            .insert(name.to_string(), (params, body))
            .is_some()
        {
            return Err(PccsError::DuplicateDefinition(name.to_string()));
        }
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<&(Vec<Name>, PccsProcess)> {
        self.defs.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &(Vec<Name>, PccsProcess))> {
        self.defs.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    /// Merges another environment; identical redefinitions are tolerated.
    pub fn merge(&mut self, other: &DefEnv) -> Result<(), PccsError> {
        for (name, def) in &other.defs {
            match self.defs.get(name) {
                None => {
                    self.defs.insert(name.clone(), def.clone());
                }
                Some(existing) if existing == def => {}
                Some(_) => return Err(PccsError::DuplicateDefinition(name.clone())),
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PccsLabel {
    In(Name),
    Out(Name),
    Tau,
}

/// An observable: an input or output capability on a name, or success.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Obs {
    In(Name),
    Out(Name),
    Success,
}

pub fn pccs_free_names(p: &PccsProcess) -> BTreeSet<Name> {
    match p {
        PccsProcess::Choice(g, brs) => {
            let mut s: BTreeSet<Name> = brs.iter().flat_map(|(_, q)| pccs_free_names(q)).collect();
            match g {
                PccsGuard::In(n) | PccsGuard::Out(n) => {
                    s.insert(n.clone());
                }
                PccsGuard::Tau => {}
            }
            s
        }
        PccsProcess::Par(l, r) => {
            let mut s = pccs_free_names(l);
            s.extend(pccs_free_names(r));
            s
        }
        PccsProcess::Restrict(b, a) => pccs_free_names(b).difference(a).cloned().collect(),
        PccsProcess::Relabel(b, f) => {
            pccs_free_names(b).iter().map(|n| f.apply(n)).collect()
        }
        PccsProcess::Call(_, args) => args.iter().cloned().collect(),
        PccsProcess::Success | PccsProcess::Inert => BTreeSet::new(),
    }
}

fn fresh_name(base: &str, avoid: &BTreeSet<Name>) -> Name {
    let mut candidate = format!("{base}'");
    while avoid.contains(&candidate) {
        candidate.push('\'');
    }
    candidate
}

/// Capture-avoiding simultaneous substitution of free names. A relabelled
/// process absorbs the substitution into its renaming function.
pub fn pccs_subst(p: &PccsProcess, sigma: &BTreeMap<Name, Name>) -> PccsProcess {
    let apply = |n: &Name| sigma.get(n).cloned().unwrap_or_else(|| n.clone());
    match p {
        PccsProcess::Choice(g, brs) => {
            let g = match g {
                PccsGuard::In(n) => PccsGuard::In(apply(n)),
                PccsGuard::Out(n) => PccsGuard::Out(apply(n)),
                PccsGuard::Tau => PccsGuard::Tau,
            };
            PccsProcess::Choice(
                g,
                brs.iter()
                    .map(|(pr, q)| (pr.clone(), pccs_subst(q, sigma)))
                    .collect(),
            )
        }
        PccsProcess::Par(l, r) => {
            PccsProcess::par(pccs_subst(l, sigma), pccs_subst(r, sigma))
        }
        PccsProcess::Restrict(b, a) => {
            let inner: BTreeMap<Name, Name> = sigma
                .iter()
                .filter(|(k, _)| !a.contains(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            let free = pccs_free_names(b);
            let incoming: BTreeSet<Name> = free
                .iter()
                .filter(|n| !a.contains(*n))
                .filter_map(|n| inner.get(n).cloned())
                .collect();
            let clashing: Vec<Name> = a.iter().filter(|n| incoming.contains(*n)).cloned().collect();
            if clashing.is_empty() {
                PccsProcess::restrict(pccs_subst(b, &inner), a.clone())
            } else {
                let mut avoid: BTreeSet<Name> = free;
                avoid.extend(incoming.iter().cloned());
                avoid.extend(a.iter().cloned());
                let mut rename = BTreeMap::new();
                let mut new_set = BTreeSet::new();
                for n in a {
                    if clashing.contains(n) {
                        let n2 = fresh_name(n, &avoid);
                        avoid.insert(n2.clone());
                        rename.insert(n.clone(), n2.clone());
                        new_set.insert(n2);
                    } else {
                        new_set.insert(n.clone());
                    }
                }
                let renamed = pccs_subst(b, &rename);
                PccsProcess::restrict(pccs_subst(&renamed, &inner), new_set)
            }
        }
        PccsProcess::Relabel(b, f) => PccsProcess::relabel((**b).clone(), f.then(sigma)),
        PccsProcess::Call(c, args) => {
            PccsProcess::Call(c.clone(), args.iter().map(apply).collect())
        }
        PccsProcess::Success => PccsProcess::Success,
        PccsProcess::Inert => PccsProcess::Inert,
    }
}

/// Records, in traversal order, the first free occurrence of each target
/// name. Names only reachable through a non-identity relabelling entry do
/// not count as occurrences of the ambient name.
fn occurrence_order(
    p: &PccsProcess,
    targets: &BTreeSet<Name>,
    shadowed: &BTreeSet<Name>,
    out: &mut Vec<Name>,
) {
    let record = |n: &Name, shadowed: &BTreeSet<Name>, out: &mut Vec<Name>| {
        if targets.contains(n) && !shadowed.contains(n) && !out.contains(n) {
            out.push(n.clone());
        }
    };
    match p {
        PccsProcess::Choice(g, brs) => {
            if let PccsGuard::In(n) | PccsGuard::Out(n) = g {
                record(n, shadowed, out);
            }
            for (_, q) in brs {
                occurrence_order(q, targets, shadowed, out);
            }
        }
        PccsProcess::Par(l, r) => {
            occurrence_order(l, targets, shadowed, out);
            occurrence_order(r, targets, shadowed, out);
        }
        PccsProcess::Restrict(b, a) => {
            let mut sh = shadowed.clone();
            sh.extend(a.iter().cloned());
            occurrence_order(b, targets, &sh, out);
        }
        PccsProcess::Relabel(b, f) => {
            for (_, v) in f.entries() {
                record(v, shadowed, out);
            }
            let mut sh = shadowed.clone();
            sh.extend(f.support().cloned());
            occurrence_order(b, targets, &sh, out);
        }
        PccsProcess::Call(_, args) => {
            for n in args {
                record(n, shadowed, out);
            }
        }
        PccsProcess::Success | PccsProcess::Inert => {}
    }
}

fn canon_rec(p: &PccsProcess, rho: &BTreeMap<Name, Name>, next: &mut usize) -> PccsProcess {
    let apply = |n: &Name| rho.get(n).cloned().unwrap_or_else(|| n.clone());
    match p {
        PccsProcess::Choice(g, brs) => {
            let g = match g {
                PccsGuard::In(n) => PccsGuard::In(apply(n)),
                PccsGuard::Out(n) => PccsGuard::Out(apply(n)),
                PccsGuard::Tau => PccsGuard::Tau,
            };
            PccsProcess::Choice(
                g,
                brs.iter()
                    .map(|(pr, q)| (pr.clone(), canon_rec(q, rho, next)))
                    .collect(),
            )
        }
        PccsProcess::Par(l, r) => {
            PccsProcess::par(canon_rec(l, rho, next), canon_rec(r, rho, next))
        }
        PccsProcess::Restrict(b, a) => {
            let mut order = Vec::new();
            occurrence_order(b, a, &BTreeSet::new(), &mut order);
            for n in a {
                if !order.contains(n) {
                    order.push(n.clone());
                }
            }
            let mut inner = rho.clone();
            let mut new_set = BTreeSet::new();
            for n in order {
                let canon = format!("%{next}");
                *next += 1;
                inner.insert(n, canon.clone());
                new_set.insert(canon);
            }
            PccsProcess::restrict(canon_rec(b, &inner, next), new_set)
        }
        PccsProcess::Relabel(b, f) => {
            let mapped = RenamingFn::new(
                f.entries()
                    .map(|(k, v)| (k.clone(), apply(v)))
                    .collect(),
            );
            let inner: BTreeMap<Name, Name> = rho
                .iter()
                .filter(|(k, _)| !f.0.contains_key(*k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect();
            PccsProcess::relabel(canon_rec(b, &inner, next), mapped)
        }
        PccsProcess::Call(c, args) => {
            PccsProcess::Call(c.clone(), args.iter().map(apply).collect())
        }
        PccsProcess::Success => PccsProcess::Success,
        PccsProcess::Inert => PccsProcess::Inert,
    }
}

/// Alpha-normalization: bound names (restriction sets) are renamed to
/// canonical numbered names in traversal order; restriction sets stay
/// sorted. Alpha-equivalent terms get identical canonical forms.
pub fn pccs_canonical(p: &PccsProcess) -> PccsProcess {
    let mut next = 0;
    canon_rec(p, &BTreeMap::new(), &mut next)
}

fn par_dist(
    d1: &Distribution<PccsProcess>,
    d2: &Distribution<PccsProcess>,
) -> Distribution<PccsProcess> {
    let parts: Vec<(PccsProcess, num_rational::BigRational)> = d1
        .iter()
        .flat_map(|(p1, w1)| {
            d2.iter()
                .map(move |(p2, w2)| (PccsProcess::par(p1.clone(), p2.clone()), w1 * w2))
        })
        .collect();
    Distribution::from_parts(parts).expect("product of distributions sums to 1")
}

/// Validates that every constant reachable from `p` (and every definition
/// body) resolves with the right arity and that all choices sum to 1.
pub fn pccs_validate(p: &PccsProcess, env: &DefEnv) -> Result<(), PccsError> {
    fn go(p: &PccsProcess, env: &DefEnv) -> Result<(), PccsError> {
        match p {
            PccsProcess::Choice(_, brs) => {
                let sum: num_rational::BigRational =
                    brs.iter().map(|(pr, _)| pr.ratio().clone()).sum();
                if !num_traits::One::is_one(&sum) {
                    return Err(PccsError::BadChoiceSum);
                }
                for (_, q) in brs {
                    go(q, env)?;
                }
                Ok(())
            }
            PccsProcess::Par(l, r) => {
                go(l, env)?;
                go(r, env)
            }
            PccsProcess::Restrict(b, _) | PccsProcess::Relabel(b, _) => go(b, env),
            PccsProcess::Call(c, args) => match env.lookup(c) {
                None => Err(PccsError::UnknownConstant(c.clone())),
                Some((params, _)) if params.len() != args.len() => {
                    Err(PccsError::ArityMismatch {
                        name: c.clone(),
                        expected: params.len(),
                        got: args.len(),
                    })
                }
                Some(_) => Ok(()),
            },
            PccsProcess::Success | PccsProcess::Inert => Ok(()),
        }
    }
    go(p, env)?;
    for (name, (params, body)) in env.iter() {
        go(body, env)?;
        let bound: BTreeSet<&Name> = params.iter().collect();
        if pccs_free_names(body).iter().any(|n| !bound.contains(n)) {
            return Err(PccsError::OpenDefinition(name.clone()));
        }
    }
    Ok(())
}

/// Unfolds a constant instantiation to its definition body with the
/// arguments substituted for the parameters.
pub fn pccs_unfold(
    name: &str,
    args: &[Name],
    env: &DefEnv,
) -> Result<PccsProcess, PccsError> {
    let (params, body) = env
        .lookup(name)
        .ok_or_else(|| PccsError::UnknownConstant(name.to_string()))?;
    if params.len() != args.len() {
        return Err(PccsError::ArityMismatch {
            name: name.to_string(),
            expected: params.len(),
            got: args.len(),
        });
    }
    let sigma: BTreeMap<Name, Name> = params
        .iter()
        .cloned()
        .zip(args.iter().cloned())
        .collect();
    Ok(pccs_subst(body, &sigma))
}

/// All labelled steps `P -u-> Delta`. A guarded choice steps with its guard
/// to the mixture of its branches; parallel components interleave and
/// communicate (input meeting output yields tau); restriction filters
/// subjects; relabelling maps labels; constant instantiation unfolds with a
/// tau step.
pub fn pccs_labelled_steps(
    p: &PccsProcess,
    env: &DefEnv,
) -> Result<Vec<(PccsLabel, Distribution<PccsProcess>)>, PccsError> {
    let mut out: BTreeSet<(PccsLabel, Distribution<PccsProcess>)> = BTreeSet::new();
    match p {
        PccsProcess::Choice(g, brs) => {
            let label = match g {
                PccsGuard::In(n) => PccsLabel::In(n.clone()),
                PccsGuard::Out(n) => PccsLabel::Out(n.clone()),
                PccsGuard::Tau => PccsLabel::Tau,
            };
            let dist = Distribution::from_parts(
                brs.iter().map(|(pr, q)| (q.clone(), pr.ratio().clone())),
            )
            .expect("choice branches sum to 1");
            out.insert((label, dist));
        }
        PccsProcess::Par(l, r) => {
            let ls = pccs_labelled_steps(l, env)?;
            let rs = pccs_labelled_steps(r, env)?;
            for (lab, d) in &ls {
                out.insert((lab.clone(), par_dist(d, &Distribution::point((**r).clone()))));
            }
            for (lab, d) in &rs {
                out.insert((lab.clone(), par_dist(&Distribution::point((**l).clone()), d)));
            }
            for (lab1, d1) in &ls {
                for (lab2, d2) in &rs {
                    let com = matches!(
                        (lab1, lab2),
                        (PccsLabel::In(a), PccsLabel::Out(b)) if a == b
                    ) || matches!(
                        (lab1, lab2),
                        (PccsLabel::Out(a), PccsLabel::In(b)) if a == b
                    );
                    if com {
                        out.insert((PccsLabel::Tau, par_dist(d1, d2)));
                    }
                }
            }
        }
        PccsProcess::Restrict(b, a) => {
            for (lab, d) in pccs_labelled_steps(b, env)? {
                let keep = match &lab {
                    PccsLabel::In(n) | PccsLabel::Out(n) => !a.contains(n),
                    PccsLabel::Tau => true,
                };
                if keep {
                    out.insert((
                        lab,
                        d.map_terms(|q| PccsProcess::restrict(q.clone(), a.clone())),
                    ));
                }
            }
        }
        PccsProcess::Relabel(b, f) => {
            for (lab, d) in pccs_labelled_steps(b, env)? {
                let lab = match lab {
                    PccsLabel::In(n) => PccsLabel::In(f.apply(&n)),
                    PccsLabel::Out(n) => PccsLabel::Out(f.apply(&n)),
                    PccsLabel::Tau => PccsLabel::Tau,
                };
                out.insert((
                    lab,
                    d.map_terms(|q| PccsProcess::relabel(q.clone(), f.clone())),
                ));
            }
        }
        PccsProcess::Call(c, args) => {
            let unfolded = pccs_unfold(c, args, env)?;
            out.insert((PccsLabel::Tau, Distribution::point(unfolded)));
        }
        PccsProcess::Success | PccsProcess::Inert => {}
    }
    Ok(out.into_iter().collect())
}

/// Reduction: the tau-labelled steps.
pub fn pccs_reduce(
    p: &PccsProcess,
    env: &DefEnv,
) -> Result<Vec<Distribution<PccsProcess>>, PccsError> {
    Ok(pccs_labelled_steps(p, env)?
        .into_iter()
        .filter(|(lab, _)| *lab == PccsLabel::Tau)
        .map(|(_, d)| d)
        .collect())
}

fn has_unguarded_success(p: &PccsProcess) -> bool {
    match p {
        PccsProcess::Success => true,
        PccsProcess::Par(l, r) => has_unguarded_success(l) || has_unguarded_success(r),
        PccsProcess::Restrict(b, _) | PccsProcess::Relabel(b, _) => has_unguarded_success(b),
        _ => false,
    }
}

/// Immediate barb: an unguarded success, or a labelled step whose label is
/// the observed capability.
pub fn pccs_has_barb(p: &PccsProcess, env: &DefEnv, obs: &Obs) -> Result<bool, PccsError> {
    match obs {
        Obs::Success => Ok(has_unguarded_success(p)),
        Obs::In(n) => Ok(pccs_labelled_steps(p, env)?
            .iter()
            .any(|(lab, _)| *lab == PccsLabel::In(n.clone()))),
        Obs::Out(n) => Ok(pccs_labelled_steps(p, env)?
            .iter()
            .any(|(lab, _)| *lab == PccsLabel::Out(n.clone()))),
    }
}

/// Reachable barb: some reduction sequence leads to a distribution with a
/// support point exhibiting the barb. Returns the finding together with a
/// completeness flag for the bounded search.
pub fn pccs_reach_barb(
    p: &PccsProcess,
    env: &DefEnv,
    obs: &Obs,
    budget: &ExplorationBudget,
) -> Result<(bool, bool), PccsError> {
    pccs_validate(p, env)?;
    let mut step = |t: &PccsProcess| pccs_reduce(t, env).expect("validated term steps");
    let ms = dist_multistep(
        &Distribution::point(p.clone()),
        &mut step,
        budget,
        &|d| d.map_terms(pccs_canonical),
    );
    for d in &ms.dists {
        for t in d.support() {
            if pccs_has_barb(t, env, obs)? {
                return Ok((true, ms.complete));
            }
        }
    }
    Ok((false, ms.complete))
}

impl fmt::Display for PccsProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PccsProcess::Choice(g, brs) => {
                match g {
                    PccsGuard::In(n) => write!(f, "{n}")?,
                    PccsGuard::Out(n) => write!(f, "'{n}")?,
                    PccsGuard::Tau => write!(f, "tau")?,
                }
                write!(f, ".(")?;
                for (i, (p, q)) in brs.iter().enumerate() {
                    if i > 0 {
                        write!(f, " + ")?;
                    }
                    write!(f, "{p}: {q}")?;
                }
                write!(f, ")")
            }
            PccsProcess::Par(l, r) => {
                let wrap = |p: &PccsProcess, f: &mut fmt::Formatter<'_>| match p {
                    PccsProcess::Par(..) => write!(f, "({p})"),
                    _ => write!(f, "{p}"),
                };
                wrap(l, f)?;
                write!(f, " | ")?;
                wrap(r, f)
            }
            PccsProcess::Restrict(b, a) => {
                write!(f, "({b})\\{{")?;
                for (i, n) in a.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{n}")?;
                }
                write!(f, "}}")
            }
            PccsProcess::Relabel(b, r) => {
                write!(f, "({b})[")?;
                for (i, (k, v)) in r.entries().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}->{v}")?;
                }
                write!(f, "]")
            }
            PccsProcess::Call(c, args) => {
                write!(f, "{c}<")?;
                for (i, n) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{n}")?;
                }
                write!(f, ">")
            }
            PccsProcess::Success => write!(f, "ok"),
            PccsProcess::Inert => write!(f, "0"),
        }
    }
}
