//! Exact probabilities, finite distributions and the coupling-based lifting
//! of a relation to distributions.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProbError {
    #[error("probability must satisfy 0 < p <= 1, got {0}")]
    OutOfRange(String),
    #[error("weights must sum to exactly 1, got {0}")]
    BadSum(String),
    #[error("zero denominator")]
    ZeroDenominator,
}

/// A probability: an exact rational in (0, 1].
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prob(BigRational);

impl Prob {
    pub fn new(num: i64, den: i64) -> Result<Prob, ProbError> {
        if den == 0 {
            return Err(ProbError::ZeroDenominator);
        }
        Prob::from_ratio(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_ratio(r: BigRational) -> Result<Prob, ProbError> {
        if r.is_positive() && r <= BigRational::one() {
            Ok(Prob(r))
        } else {
            Err(ProbError::OutOfRange(r.to_string()))
        }
    }

    pub fn one() -> Prob {
        Prob(BigRational::one())
    }

    pub fn is_one(&self) -> bool {
        self.0.is_one()
    }

    pub fn ratio(&self) -> &BigRational {
        &self.0
    }

    pub fn into_ratio(self) -> BigRational {
        self.0
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Debug for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finitely supported probability distribution with exact rational weights.
///
/// Weights are strictly positive and sum to exactly 1; equal support points
/// are always merged.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Distribution<T: Ord>(BTreeMap<T, BigRational>);

impl<T: Ord + Clone> Distribution<T> {
    /// The point (Dirac) distribution.
    pub fn point(t: T) -> Distribution<T> {
        let mut m = BTreeMap::new();
        m.insert(t, BigRational::one());
        Distribution(m)
    }

    /// Builds a distribution from weighted points, merging duplicates.
    pub fn from_parts<I>(parts: I) -> Result<Distribution<T>, ProbError>
    where
        I: IntoIterator<Item = (T, BigRational)>,
    {
        let mut m: BTreeMap<T, BigRational> = BTreeMap::new();
        let mut sum = BigRational::zero();
        for (t, w) in parts {
            if !w.is_positive() {
                return Err(ProbError::OutOfRange(w.to_string()));
            }
            sum += &w;
            *m.entry(t).or_insert_with(BigRational::zero) += w;
        }
        if !sum.is_one() {
            return Err(ProbError::BadSum(sum.to_string()));
        }
        Ok(Distribution(m))
    }

    /// Convex combination of distributions, merging equal support points.
    pub fn mix<I>(parts: I) -> Result<Distribution<T>, ProbError>
    where
        I: IntoIterator<Item = (Prob, Distribution<T>)>,
    {
        let mut flat: Vec<(T, BigRational)> = Vec::new();
        for (p, d) in parts {
            for (t, w) in d.0 {
                flat.push((t, p.ratio() * w));
            }
        }
        Distribution::from_parts(flat)
    }

    pub fn support(&self) -> impl Iterator<Item = &T> {
        self.0.keys()
    }

    pub fn prob(&self, t: &T) -> BigRational {
        self.0.get(t).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, &BigRational)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_point(&self) -> bool {
        self.0.len() == 1
    }

    /// Pushes the distribution through a function, merging collisions.
    pub fn map_terms<U: Ord + Clone>(&self, f: impl Fn(&T) -> U) -> Distribution<U> {
        let mut m: BTreeMap<U, BigRational> = BTreeMap::new();
        for (t, w) in &self.0 {
            *m.entry(f(t)).or_insert_with(BigRational::zero) += w;
        }
        Distribution(m)
    }

    /// Pushes the distribution through a fallible function.
    pub fn try_map_terms<U: Ord + Clone, E>(
        &self,
        mut f: impl FnMut(&T) -> Result<U, E>,
    ) -> Result<Distribution<U>, E> {
        let mut m: BTreeMap<U, BigRational> = BTreeMap::new();
        for (t, w) in &self.0 {
            *m.entry(f(t)?).or_insert_with(BigRational::zero) += w;
        }
        Ok(Distribution(m))
    }
}

impl<T: Ord + fmt::Display> fmt::Display for Distribution<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, (t, w)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{} {}", w, t)?;
        }
        write!(f, "}}")
    }
}

impl<T: Ord + fmt::Display> fmt::Debug for Distribution<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A joint distribution witnessing that two distributions decompose over a
/// common index set with pointwise related components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Coupling<T: Ord> {
    pub weights: BTreeMap<(T, T), BigRational>,
}

impl<T: Ord + Clone> Coupling<T> {
    /// Checks that the weights are positive, supported on `related` pairs,
    /// and have `delta` and `theta` as left and right marginals.
    pub fn validate(
        &self,
        related: impl Fn(&T, &T) -> bool,
        delta: &Distribution<T>,
        theta: &Distribution<T>,
    ) -> bool {
        let mut left: BTreeMap<T, BigRational> = BTreeMap::new();
        let mut right: BTreeMap<T, BigRational> = BTreeMap::new();
        for ((l, r), w) in &self.weights {
            if !w.is_positive() || !related(l, r) {
                return false;
            }
            *left.entry(l.clone()).or_insert_with(BigRational::zero) += w;
            *right.entry(r.clone()).or_insert_with(BigRational::zero) += w;
        }
        left == delta.0 && right == theta.0
    }
}

/// Decides whether `delta` and `theta` are related by the lifting of
/// `related` to distributions, returning a coupling witness when they are.
///
/// The lifting asks for a common finite index decomposition of the two
/// distributions with pointwise related components; that is exactly a
/// transportation plan, so feasibility is decided by an exact-rational
/// max-flow on the bipartite support graph.
pub fn lift_check<T: Ord + Clone>(
    related: impl Fn(&T, &T) -> bool,
    delta: &Distribution<T>,
    theta: &Distribution<T>,
) -> Option<Coupling<T>> {
    let left: Vec<(&T, &BigRational)> = delta.0.iter().collect();
    let right: Vec<(&T, &BigRational)> = theta.0.iter().collect();
    let n = left.len();
    let m = right.len();

    // Node ids: 0 = source, 1..=n lefts, n+1..=n+m rights, n+m+1 = sink.
    let source = 0usize;
    let sink = n + m + 1;
    let total = n + m + 2;

    // Residual capacities; the infinite middle capacity is modelled by 2
    // (any value > 1 works since total demand is 1).
    let mut cap: Vec<BTreeMap<usize, BigRational>> = vec![BTreeMap::new(); total];
    for (i, (_, w)) in left.iter().enumerate() {
        cap[source].insert(1 + i, (*w).clone());
        cap[1 + i].insert(source, BigRational::zero());
    }
    for (j, (_, w)) in right.iter().enumerate() {
        cap[1 + n + j].insert(sink, (*w).clone());
        cap[sink].insert(1 + n + j, BigRational::zero());
    }
    let mut any_edge = false;
    for (i, (l, _)) in left.iter().enumerate() {
        for (j, (r, _)) in right.iter().enumerate() {
            if related(l, r) {
                cap[1 + i].insert(1 + n + j, BigRational::from(BigInt::from(2)));
                cap[1 + n + j].insert(1 + i, BigRational::zero());
                any_edge = true;
            }
        }
    }
    if !any_edge {
        return None;
    }

    // Edmonds-Karp.
    let mut flow = BigRational::zero();
    loop {
        let mut parent: Vec<Option<usize>> = vec![None; total];
        parent[source] = Some(source);
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(source);
        while let Some(u) = queue.pop_front() {
            if u == sink {
                break;
            }
            for (&v, c) in &cap[u] {
                if parent[v].is_none() && c.is_positive() {
                    parent[v] = Some(u);
                    queue.push_back(v);
                }
            }
        }
        if parent[sink].is_none() {
            break;
        }
        // Bottleneck along the path.
        let mut path = Vec::new();
        let mut v = sink;
        while v != source {
            let u = parent[v].unwrap();
            path.push((u, v));
            v = u;
        }
        let bottleneck = path
            .iter()
            .map(|(u, v)| cap[*u][v].clone())
            .min()
            .unwrap();
        for (u, v) in path {
            let c = cap[u].get_mut(&v).unwrap();
            *c -= &bottleneck;
            let c = cap[v].get_mut(&u).unwrap();
            *c += &bottleneck;
        }
        flow += bottleneck;
    }

    if !flow.is_one() {
        return None;
    }
    let mut weights = BTreeMap::new();
    for (i, (l, _)) in left.iter().enumerate() {
        for (j, (r, _)) in right.iter().enumerate() {
            if let Some(c) = cap[1 + i].get(&(1 + n + j)) {
                let sent = BigRational::from(BigInt::from(2)) - c;
                if sent.is_positive() {
                    weights.insert(((*l).clone(), (*r).clone()), sent);
                }
            }
        }
    }
    let coupling = Coupling { weights };
    debug_assert!(coupling.validate(&related, delta, theta));
    Some(coupling)
}

/// Reference decision procedure for the lifting: enumerates integer
/// transportation plans over a common denominator. Exponential; kept as an
/// independent oracle for testing `lift_check`.
pub fn lift_check_bruteforce<T: Ord + Clone>(
    related: impl Fn(&T, &T) -> bool,
    delta: &Distribution<T>,
    theta: &Distribution<T>,
) -> bool {
    let left: Vec<(&T, &BigRational)> = delta.0.iter().collect();
    let right: Vec<(&T, &BigRational)> = theta.0.iter().collect();
    let mut den = BigInt::one();
    for (_, w) in left.iter().chain(right.iter()) {
        den = den.lcm(w.denom());
    }
    let to_int = |w: &BigRational| (w * BigRational::from(den.clone())).to_integer();
    let rows: Vec<BigInt> = left.iter().map(|(_, w)| to_int(w)).collect();
    let cols: Vec<BigInt> = right.iter().map(|(_, w)| to_int(w)).collect();
    let allowed: Vec<Vec<bool>> = left
        .iter()
        .map(|(l, _)| right.iter().map(|(r, _)| related(l, r)).collect())
        .collect();

    fn search(
        rows: &mut Vec<BigInt>,
        cols: &mut Vec<BigInt>,
        allowed: &[Vec<bool>],
        i: usize,
        j: usize,
    ) -> bool {
        let n = rows.len();
        let m = cols.len();
        if i == n {
            return cols.iter().all(|c| c.is_zero());
        }
        if j == m {
            if !rows[i].is_zero() {
                return false;
            }
            return search(rows, cols, allowed, i + 1, 0);
        }
        let max = if allowed[i][j] {
            rows[i].clone().min(cols[j].clone())
        } else {
            BigInt::zero()
        };
        let mut w = BigInt::zero();
        loop {
            rows[i] -= &w;
            cols[j] -= &w;
            let ok = search(rows, cols, allowed, i, j + 1);
            rows[i] += &w;
            cols[j] += &w;
            if ok {
                return true;
            }
            if w == max {
                return false;
            }
            w += 1;
        }
    }

    let mut rows = rows;
    let mut cols = cols;
    search(&mut rows, &mut cols, &allowed, 0, 0)
}

/// Selector behaviour for a distribution step: either every combination of
/// "step or stay" per support point, or the eager variant where every point
/// that can step does step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectorMode {
    All,
    Eager,
}

/// Exploration limits shared by the bounded searches.
#[derive(Clone, Debug)]
pub struct ExplorationBudget {
    /// Maximum number of distribution-step iterations.
    pub depth: usize,
    /// Maximum number of distinct distributions visited per search.
    pub state_cap: usize,
    /// Maximum number of selector combinations per distribution step.
    pub combo_cap: usize,
    pub mode: SelectorMode,
}

impl Default for ExplorationBudget {
    fn default() -> Self {
        ExplorationBudget {
            depth: 4,
            state_cap: 2000,
            combo_cap: 10_000,
            mode: SelectorMode::All,
        }
    }
}

impl ExplorationBudget {
    pub fn with_depth(depth: usize) -> Self {
        ExplorationBudget {
            depth,
            ..Default::default()
        }
    }
}

/// Result of a single distribution step: the successor distributions, plus a
/// truncation flag when the selector enumeration hit the combination cap.
pub struct StepOutcome<T: Ord> {
    pub dists: Vec<Distribution<T>>,
    pub truncated: bool,
}

/// One reduction step of a distribution: each support point independently
/// either performs one of its reductions or stays put, with at least one
/// point stepping; the successor is the weighted mixture of the choices.
pub fn dist_step<T: Ord + Clone>(
    delta: &Distribution<T>,
    step_fn: &mut dyn FnMut(&T) -> Vec<Distribution<T>>,
    combo_cap: usize,
    mode: SelectorMode,
) -> StepOutcome<T> {
    let points: Vec<(&T, &BigRational)> = delta.0.iter().collect();
    // Per point: None = stay, Some(theta) = step to theta.
    let options: Vec<Vec<Option<Distribution<T>>>> = points
        .iter()
        .map(|(t, _)| {
            let succs = step_fn(t);
            match mode {
                SelectorMode::All => {
                    let mut opts: Vec<Option<Distribution<T>>> = vec![None];
                    opts.extend(succs.into_iter().map(Some));
                    opts
                }
                SelectorMode::Eager => {
                    if succs.is_empty() {
                        vec![None]
                    } else {
                        succs.into_iter().map(Some).collect()
                    }
                }
            }
        })
        .collect();

    let mut out: std::collections::BTreeSet<Distribution<T>> = Default::default();
    let mut truncated = false;
    let mut odometer = vec![0usize; options.len()];
    let mut combos = 0usize;
    'outer: loop {
        let any_step = odometer
            .iter()
            .zip(&options)
            .any(|(&k, opts)| opts[k].is_some());
        if any_step {
            combos += 1;
            if combos > combo_cap {
                truncated = true;
                break;
            }
            let parts: Vec<(T, BigRational)> = points
                .iter()
                .zip(&odometer)
                .zip(&options)
                .flat_map(|(((t, w), &k), opts)| match &opts[k] {
                    None => vec![((*t).clone(), (*w).clone())],
                    Some(theta) => theta
                        .iter()
                        .map(|(u, v)| (u.clone(), *w * v))
                        .collect(),
                })
                .collect();
            let mixed = Distribution::from_parts(parts)
                .expect("per-point selector mixture must renormalize to 1");
            out.insert(mixed);
        }
        // Advance odometer.
        for pos in 0..options.len() {
            odometer[pos] += 1;
            if odometer[pos] < options[pos].len() {
                continue 'outer;
            }
            odometer[pos] = 0;
        }
        break;
    }
    StepOutcome {
        dists: out.into_iter().collect(),
        truncated,
    }
}

/// A bounded multi-step reachability set over distributions.
#[derive(Clone)]
pub struct Multistep<T: Ord> {
    /// Reachable distributions in breadth-first order, starting with the
    /// initial one (the reflexive case).
    pub dists: Vec<Distribution<T>>,
    /// True when the search closed without hitting any cap, so the set is
    /// exhaustive rather than a prefix.
    pub complete: bool,
}

/// All distributions reachable from `delta` in at most `depth` distribution
/// steps. Deduplication uses `key_fn` (canonical projection of the support).
pub fn dist_multistep<T: Ord + Clone>(
    delta: &Distribution<T>,
    step_fn: &mut dyn FnMut(&T) -> Vec<Distribution<T>>,
    budget: &ExplorationBudget,
    key_fn: &dyn Fn(&Distribution<T>) -> Distribution<T>,
) -> Multistep<T> {
    let mut seen: std::collections::BTreeSet<Distribution<T>> = Default::default();
    let mut order: Vec<Distribution<T>> = Vec::new();
    let mut complete = true;
    seen.insert(key_fn(delta));
    order.push(delta.clone());
    let mut frontier = vec![delta.clone()];
    for _ in 0..budget.depth {
        let mut next = Vec::new();
        for d in &frontier {
            let out = dist_step(d, step_fn, budget.combo_cap, budget.mode);
            if out.truncated {
                complete = false;
            }
            for succ in out.dists {
                if order.len() >= budget.state_cap {
                    complete = false;
                    break;
                }
                if seen.insert(key_fn(&succ)) {
                    order.push(succ.clone());
                    next.push(succ);
                }
            }
        }
        frontier = next;
        if frontier.is_empty() {
            break;
        }
    }
    if !frontier.is_empty() {
        // Depth exhausted with work left: the frontier might still grow.
        let mut grew = false;
        for d in &frontier {
            let out = dist_step(d, step_fn, budget.combo_cap, budget.mode);
            if out.truncated {
                complete = false;
            }
            for succ in out.dists {
                if !seen.contains(&key_fn(&succ)) {
                    grew = true;
                }
            }
        }
        if grew {
            complete = false;
        }
    }
    Multistep {
        dists: order,
        complete,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn prob_rejects_out_of_range() {
        assert!(Prob::new(0, 1).is_err());
        assert!(Prob::new(-1, 2).is_err());
        assert!(Prob::new(3, 2).is_err());
        assert!(Prob::new(1, 0).is_err());
        assert!(Prob::new(1, 1).unwrap().is_one());
    }

    #[test]
    fn from_parts_merges_and_checks_sum() {
        let d = Distribution::from_parts(vec![("a", r(1, 2)), ("a", r(1, 4)), ("b", r(1, 4))])
            .unwrap();
        assert_eq!(d.prob(&"a"), r(3, 4));
        assert_eq!(d.len(), 2);
        assert!(Distribution::from_parts(vec![("a", r(1, 2))]).is_err());
    }

    #[test]
    fn mix_weights_points() {
        let d1 = Distribution::point("p");
        let d2 = Distribution::point("q");
        let m = Distribution::mix(vec![
            (Prob::new(1, 8).unwrap(), d1),
            (Prob::new(7, 8).unwrap(), d2),
        ])
        .unwrap();
        assert_eq!(m.prob(&"p"), r(1, 8));
        assert_eq!(m.prob(&"q"), r(7, 8));
    }

    #[test]
    fn lift_check_finds_split_coupling() {
        // {1/3 A, 2/3 B} vs {1/2 X, 1/2 Y} with A~X, B~X, B~Y.
        let delta = Distribution::from_parts(vec![("A", r(1, 3)), ("B", r(2, 3))]).unwrap();
        let theta = Distribution::from_parts(vec![("X", r(1, 2)), ("Y", r(1, 2))]).unwrap();
        let rel = |l: &&str, r: &&str| matches!((*l, *r), ("A", "X") | ("B", "X") | ("B", "Y"));
        let c = lift_check(rel, &delta, &theta).expect("feasible");
        assert_eq!(c.weights[&("A", "X")], r(1, 3));
        assert_eq!(c.weights[&("B", "X")], r(1, 6));
        assert_eq!(c.weights[&("B", "Y")], r(1, 2));
        assert!(c.validate(rel, &delta, &theta));
    }

    #[test]
    fn lift_check_rejects_infeasible() {
        let delta = Distribution::from_parts(vec![("A", r(1, 2)), ("B", r(1, 2))]).unwrap();
        let theta = Distribution::from_parts(vec![("X", r(1, 3)), ("Y", r(2, 3))]).unwrap();
        // A only matches X, but A carries 1/2 > 1/3.
        let rel = |l: &&str, r: &&str| matches!((*l, *r), ("A", "X") | ("B", "Y"));
        assert!(lift_check(rel, &delta, &theta).is_none());
        assert!(!lift_check_bruteforce(rel, &delta, &theta));
    }

    #[test]
    fn bruteforce_agrees_on_split() {
        let delta = Distribution::from_parts(vec![("A", r(1, 3)), ("B", r(2, 3))]).unwrap();
        let theta = Distribution::from_parts(vec![("X", r(1, 2)), ("Y", r(1, 2))]).unwrap();
        let rel = |l: &&str, r: &&str| matches!((*l, *r), ("A", "X") | ("B", "X") | ("B", "Y"));
        assert!(lift_check_bruteforce(rel, &delta, &theta));
    }

    #[test]
    fn dist_step_enumerates_selectors() {
        // a can step to point(b); c cannot step.
        let delta = Distribution::from_parts(vec![("a", r(1, 2)), ("c", r(1, 2))]).unwrap();
        let mut step = |t: &&str| {
            if *t == "a" {
                vec![Distribution::point("b")]
            } else {
                vec![]
            }
        };
        let out = dist_step(&delta, &mut step, 100, SelectorMode::All);
        assert!(!out.truncated);
        assert_eq!(out.dists.len(), 1);
        assert_eq!(out.dists[0].prob(&"b"), r(1, 2));
        assert_eq!(out.dists[0].prob(&"c"), r(1, 2));
    }

    #[test]
    fn dist_step_all_vs_eager() {
        let delta = Distribution::from_parts(vec![("a", r(1, 2)), ("b", r(1, 2))]).unwrap();
        let mut step = |t: &&str| match *t {
            "a" => vec![Distribution::point("a'")],
            "b" => vec![Distribution::point("b'")],
            _ => vec![],
        };
        let all = dist_step(&delta, &mut step, 100, SelectorMode::All);
        // a steps; b steps; both step.
        assert_eq!(all.dists.len(), 3);
        let eager = dist_step(&delta, &mut step, 100, SelectorMode::Eager);
        assert_eq!(eager.dists.len(), 1);
        assert_eq!(eager.dists[0].prob(&"a'"), r(1, 2));
    }

    #[test]
    fn multistep_reaches_fixpoint() {
        let delta = Distribution::point(0u32);
        let mut step = |t: &u32| {
            if *t < 2 {
                vec![Distribution::point(t + 1)]
            } else {
                vec![]
            }
        };
        let budget = ExplorationBudget::with_depth(10);
        let ms = dist_multistep(&delta, &mut step, &budget, &|d| d.clone());
        assert!(ms.complete);
        assert_eq!(ms.dists.len(), 3);
    }

    #[test]
    fn multistep_flags_depth_truncation() {
        let delta = Distribution::point(0u64);
        let mut step = |t: &u64| vec![Distribution::point(t + 1)];
        let budget = ExplorationBudget::with_depth(3);
        let ms = dist_multistep(&delta, &mut step, &budget, &|d| d.clone());
        assert!(!ms.complete);
        assert_eq!(ms.dists.len(), 4);
    }
}
