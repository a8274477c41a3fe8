//! Translation from the source calculus into the target pi-calculus.
//!
//! Guarded choices become branching inputs / selecting outputs; an input
//! choice defers its probabilistic selection to a private coordination
//! channel so that the choice is only resolved after the communication
//! commits; internal choices select on a private channel with a dangling
//! partner; restriction, parallel and success are homomorphic; relabelling
//! becomes a name substitution; a constant instantiation signals its
//! definition over a dedicated channel served by a replicated input.

use crate::markers::{CONST_PREFIX, COORD_PREFIX, SOURCE_PREFIX, TAU_PREFIX};
use crate::pccs::{DefEnv, PccsGuard, PccsProcess};
use crate::ppi::PpiProcess;
use crate::prob::{Distribution, Prob};
use std::collections::BTreeMap;

/// The concrete renaming policy: translated source names get the `s_`
/// prefix, which is injective, keeps reserved instances disjoint from every
/// translated name, and is length-preserving up to the fixed prefix.
#[derive(Clone, Copy, Debug, Default)]
pub struct RenamingPolicy;

impl RenamingPolicy {
    pub fn source_name(&self, n: &str) -> String {
        format!("{SOURCE_PREFIX}{n}")
    }

    pub fn const_channel(&self, c: &str) -> String {
        format!("{CONST_PREFIX}{c}")
    }

    pub fn coord_instance(&self, k: usize) -> String {
        format!("{COORD_PREFIX}{k}")
    }

    pub fn tau_instance(&self, k: usize) -> String {
        format!("{TAU_PREFIX}{k}")
    }
}

/// Deliberate encoder defects used to demonstrate that the correspondence
/// checkers catch broken translations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EncoderMutation {
    /// Omit the dangling input partner of an input choice's coordination
    /// channel, so the deferred selection can never commit.
    DropCoordInput,
    /// Swap the probabilities of the first two branches of every selecting
    /// output with distinct probabilities.
    SwapSelectProbs,
    /// Encode only the main term, omitting the replicated definition servers.
    OmitDefinitions,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Encoder {
    pub policy: RenamingPolicy,
    pub mutation: Option<EncoderMutation>,
}

impl Encoder {
    pub fn new() -> Encoder {
        Encoder::default()
    }

    pub fn mutated(mutation: EncoderMutation) -> Encoder {
        Encoder {
            policy: RenamingPolicy,
            mutation: Some(mutation),
        }
    }

    fn select_encoded(&self, subject: &str, parts: Vec<(Prob, PpiProcess)>) -> PpiProcess {
        let mut probs: Vec<Prob> = parts.iter().map(|(p, _)| p.clone()).collect();
        if self.mutation == Some(EncoderMutation::SwapSelectProbs)
            && probs.len() >= 2
            && probs[0] != probs[1]
        {
            probs.swap(0, 1);
        }
        PpiProcess::SelectOut(
            subject.to_string(),
            parts
                .into_iter()
                .zip(probs)
                .enumerate()
                .map(|(k, ((_, cont), p))| (k as u32 + 1, (p, Vec::new(), cont)))
                .collect(),
        )
    }

    fn select_branches(
        &self,
        subject: &str,
        branches: &[(Prob, PccsProcess)],
        fresh: &mut Fresh,
    ) -> PpiProcess {
        let parts = branches
            .iter()
            .map(|(p, cont)| (p.clone(), self.inner_rec(cont, fresh)))
            .collect();
        self.select_encoded(subject, parts)
    }

    fn inner_rec(&self, p: &PccsProcess, fresh: &mut Fresh) -> PpiProcess {
        match p {
            PccsProcess::Choice(PccsGuard::In(x), brs) => {
                let coord = self.policy.coord_instance(fresh.next_coord());
                let select = self.select_branches(&coord, brs, fresh);
                let body = if self.mutation == Some(EncoderMutation::DropCoordInput) {
                    select
                } else {
                    PpiProcess::par(select, dangling_input(&coord))
                };
                PpiProcess::BranchIn(
                    self.policy.source_name(x),
                    [(1u32, (Vec::new(), PpiProcess::restrict(coord, body)))].into(),
                )
            }
            PccsProcess::Choice(PccsGuard::Out(x), brs) => {
                self.select_branches(&self.policy.source_name(x), brs, fresh)
            }
            PccsProcess::Choice(PccsGuard::Tau, brs) => {
                let chan = self.policy.tau_instance(fresh.next_tau());
                let select = self.select_branches(&chan, brs, fresh);
                PpiProcess::restrict(
                    chan.clone(),
                    PpiProcess::par(select, dangling_input(&chan)),
                )
            }
            PccsProcess::Par(l, r) => {
                PpiProcess::par(self.inner_rec(l, fresh), self.inner_rec(r, fresh))
            }
            PccsProcess::Restrict(b, a) => {
                let mut acc = self.inner_rec(b, fresh);
                for n in a.iter().rev() {
                    acc = PpiProcess::restrict(self.policy.source_name(n), acc);
                }
                acc
            }
            PccsProcess::Relabel(b, f) => {
                let sigma: BTreeMap<String, String> = f
                    .entries()
                    .map(|(k, v)| (self.policy.source_name(k), self.policy.source_name(v)))
                    .collect();
                crate::ppi::ppi_subst(&self.inner_rec(b, fresh), &sigma)
            }
            PccsProcess::Call(c, args) => PpiProcess::out_prefix(
                self.policy.const_channel(c),
                args.iter().map(|n| self.policy.source_name(n)).collect(),
                PpiProcess::Nil,
            ),
            PccsProcess::Success => PpiProcess::Success,
            PccsProcess::Inert => PpiProcess::Nil,
        }
    }

    /// Translation of a term alone, without definition servers.
    pub fn encode_inner(&self, p: &PccsProcess) -> PpiProcess {
        self.inner_rec(p, &mut Fresh::default())
    }

    /// Translation of a term in a definition environment: the constant
    /// channels are restricted around the translated term composed with one
    /// replicated server per definition, in identifier order.
    pub fn encode_outer(&self, p: &PccsProcess, env: &DefEnv) -> PpiProcess {
        let mut fresh = Fresh::default();
        let main = self.inner_rec(p, &mut fresh);
        if env.is_empty() || self.mutation == Some(EncoderMutation::OmitDefinitions) {
            return main;
        }
        let mut acc = main;
        for (name, (params, body)) in env.iter() {
            let server = PpiProcess::rep_in(
                self.policy.const_channel(name),
                params.iter().map(|n| self.policy.source_name(n)).collect(),
                self.inner_rec(body, &mut fresh),
            );
            acc = PpiProcess::par(acc, server);
        }
        for (name, _) in env.iter().collect::<Vec<_>>().into_iter().rev() {
            acc = PpiProcess::restrict(self.policy.const_channel(name), acc);
        }
        acc
    }

    /// Checks that the translation of every subterm of `p` coincides, up to
    /// renaming of bound names, with the translation clause of its top
    /// operator applied to the translations of its children. Returns the
    /// offending subterm if compositionality breaks.
    pub fn compositional_defect(&self, p: &PccsProcess) -> Option<String> {
        let mut stack = vec![p];
        while let Some(node) = stack.pop() {
            let whole = self.encode_inner(node);
            let composed = match node {
                PccsProcess::Choice(PccsGuard::In(x), brs) => {
                    let coord = self.policy.coord_instance(0);
                    let parts = brs
                        .iter()
                        .map(|(pr, c)| (pr.clone(), self.encode_inner(c)))
                        .collect();
                    let select = self.select_encoded(&coord, parts);
                    let body = if self.mutation == Some(EncoderMutation::DropCoordInput) {
                        select
                    } else {
                        PpiProcess::par(select, dangling_input(&coord))
                    };
                    PpiProcess::BranchIn(
                        self.policy.source_name(x),
                        [(1u32, (Vec::new(), PpiProcess::restrict(coord, body)))].into(),
                    )
                }
                PccsProcess::Choice(PccsGuard::Out(x), brs) => {
                    let parts = brs
                        .iter()
                        .map(|(pr, c)| (pr.clone(), self.encode_inner(c)))
                        .collect();
                    self.select_encoded(&self.policy.source_name(x), parts)
                }
                PccsProcess::Choice(PccsGuard::Tau, brs) => {
                    let chan = self.policy.tau_instance(0);
                    let parts = brs
                        .iter()
                        .map(|(pr, c)| (pr.clone(), self.encode_inner(c)))
                        .collect();
                    let select = self.select_encoded(&chan, parts);
                    PpiProcess::restrict(
                        chan.clone(),
                        PpiProcess::par(select, dangling_input(&chan)),
                    )
                }
                PccsProcess::Par(l, r) => {
                    PpiProcess::par(self.encode_inner(l), self.encode_inner(r))
                }
                PccsProcess::Restrict(b, a) => {
                    let mut acc = self.encode_inner(b);
                    for n in a.iter().rev() {
                        acc = PpiProcess::restrict(self.policy.source_name(n), acc);
                    }
                    acc
                }
                PccsProcess::Relabel(b, f) => {
                    let sigma: BTreeMap<String, String> = f
                        .entries()
                        .map(|(k, v)| {
                            (self.policy.source_name(k), self.policy.source_name(v))
                        })
                        .collect();
                    crate::ppi::ppi_subst(&self.encode_inner(b), &sigma)
                }
                leaf @ (PccsProcess::Call(..)
                | PccsProcess::Success
                | PccsProcess::Inert) => self.encode_inner(leaf),
            };
            if !crate::ppi::ppi_alpha_equiv(&whole, &composed) {
                return Some(node.to_string());
            }
            match node {
                PccsProcess::Choice(_, brs) => stack.extend(brs.iter().map(|(_, c)| c)),
                PccsProcess::Par(l, r) => {
                    stack.push(l);
                    stack.push(r);
                }
                PccsProcess::Restrict(b, _) | PccsProcess::Relabel(b, _) => stack.push(b),
                PccsProcess::Call(..) | PccsProcess::Success | PccsProcess::Inert => {}
            }
        }
        None
    }

    /// Pointwise translation of a distribution over source terms.
    pub fn encode_dist(
        &self,
        d: &Distribution<PccsProcess>,
        env: &DefEnv,
    ) -> Distribution<PpiProcess> {
        d.map_terms(|p| self.encode_outer(p, env))
    }
}

fn dangling_input(chan: &str) -> PpiProcess {
    PpiProcess::BranchIn(chan.to_string(), [(1u32, (Vec::new(), PpiProcess::Nil))].into())
}

#[derive(Default)]
struct Fresh {
    coord: usize,
    tau: usize,
}

impl Fresh {
    fn next_coord(&mut self) -> usize {
        let k = self.coord;
        self.coord += 1;
        k
    }

    fn next_tau(&mut self) -> usize {
        let k = self.tau;
        self.tau += 1;
        k
    }
}
