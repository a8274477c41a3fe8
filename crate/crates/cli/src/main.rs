//! `pocwb`: a workbench for a probabilistic CCS, a probabilistic
//! pi-calculus, the translation between them, and bounded-depth checkers
//! for operational-correspondence and bisimulation properties.

use std::cell::RefCell;
use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use poc_cli::corpus::{load_corpus, CorpusEntry};
use poc_cli::parse::parse_pccs;
use poc_cli::pretty::{pretty_pccs, pretty_ppi};
use poc_cli::report::{exit_code, print_records, OutputFormat, Record};
use poc_core::encode::{Encoder, EncoderMutation};
use poc_core::pccs::{pccs_canonical, pccs_reduce, pccs_validate, DefEnv, PccsError, PccsProcess};
use poc_core::poc::{
    check_barb_sensitiveness, check_divergence_reflection, check_mid_poc, check_name_invariance,
    check_nonprob_oc, check_strong_poc, check_success_sensitiveness, check_weak_compositionality,
    check_weak_poc, theorem_instance_check, OcVariant, PocFlavor, PocReport, TargetRel,
};
use poc_core::ppi::{ppi_normal_form, ppi_reduce, PpiProcess, StepClass};
use poc_core::prob::{dist_step, Distribution, ExplorationBudget, SelectorMode};
use poc_core::rel::Verdict;
use rayon::prelude::*;
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "pocwb",
    about = "Probabilistic process-calculus translation workbench",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,

    /// Maximum number of distribution steps explored.
    #[arg(long, global = true, default_value_t = 4)]
    depth: usize,

    /// Maximum number of distinct distributions per bounded search.
    #[arg(long = "state-cap", global = true, default_value_t = 2000)]
    state_cap: usize,

    /// Maximum number of scheduler combinations per distribution step.
    #[arg(long = "combo-cap", global = true, default_value_t = 10_000)]
    combo_cap: usize,

    /// Relation used to compare reached target distributions with
    /// translated source distributions.
    #[arg(long, global = true, value_enum, default_value_t = RelationArg::Congruence)]
    relation: RelationArg,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,

    /// Random substitutions sampled per term by the name-invariance check.
    #[arg(long, global = true, default_value_t = 10)]
    samples: usize,

    /// Seed for the randomized checks.
    #[arg(long, global = true, default_value_t = 0xC0FFEE)]
    seed: u64,

    /// Deliberately defective translation, for checker calibration.
    #[arg(long, global = true, hide = true, value_enum)]
    mutate: Option<MutateArg>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RelationArg {
    Congruence,
    Identity,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Text,
    Records,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MutateArg {
    DropCoordInput,
    SwapSelectProbs,
    OmitDefinitions,
}

#[derive(Args)]
struct InputArgs {
    /// Corpus file to read terms from.
    #[arg(long)]
    file: Option<PathBuf>,

    /// Restrict a corpus file to one entry.
    #[arg(long, requires = "file")]
    entry: Option<String>,

    /// A literal source program (definitions followed by a term).
    #[arg(conflicts_with = "file")]
    term: Option<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Enumerate the distributions reachable from a term, level by level.
    Steps {
        #[command(flatten)]
        input: InputArgs,
        /// Explore the translated term instead of the source term.
        #[arg(long)]
        target: bool,
    },
    /// Translate a source term and print the target text.
    Encode {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Show the source evolution next to its target emulation, with step
    /// classes.
    Trace {
        #[command(flatten)]
        input: InputArgs,
    },
    /// Run one named checker.
    Check {
        /// weak-poc | mid-poc | strong-poc | oc-weak | oc-plain | oc-strong
        /// | success | barbs | divergence | compositionality |
        /// name-invariance | theorem-weak | theorem-mid | theorem-strong
        name: String,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Run the full property battery over a corpus.
    Suite {
        corpus: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("{e}");
            return ExitCode::from(3);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn budget(cli: &Cli) -> ExplorationBudget {
    ExplorationBudget {
        depth: cli.depth,
        state_cap: cli.state_cap,
        combo_cap: cli.combo_cap,
        mode: SelectorMode::All,
    }
}

fn encoder(cli: &Cli) -> Encoder {
    match cli.mutate {
        None => Encoder::new(),
        Some(MutateArg::DropCoordInput) => Encoder::mutated(EncoderMutation::DropCoordInput),
        Some(MutateArg::SwapSelectProbs) => Encoder::mutated(EncoderMutation::SwapSelectProbs),
        Some(MutateArg::OmitDefinitions) => Encoder::mutated(EncoderMutation::OmitDefinitions),
    }
}

fn target_rel(cli: &Cli) -> TargetRel {
    match cli.relation {
        RelationArg::Congruence => TargetRel::Congruence,
        RelationArg::Identity => TargetRel::Identity,
    }
}

fn format(cli: &Cli) -> OutputFormat {
    match cli.format {
        FormatArg::Text => OutputFormat::Text,
        FormatArg::Records => OutputFormat::Records,
    }
}

/// Loads the selected inputs as named corpus entries.
fn resolve_inputs(input: &InputArgs) -> Result<Vec<CorpusEntry>, String> {
    match (&input.file, &input.term) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            let entries = load_corpus(&text)?;
            match &input.entry {
                None => Ok(entries),
                Some(name) => {
                    let entry = entries
                        .into_iter()
                        .find(|e| &e.name == name)
                        .ok_or_else(|| format!("no corpus entry named '{name}'"))?;
                    Ok(vec![entry])
                }
            }
        }
        (None, Some(text)) => {
            let (term, env) = parse_pccs(text).map_err(|e| e.to_string())?;
            pccs_validate(&term, &env).map_err(|e| e.to_string())?;
            Ok(vec![CorpusEntry {
                name: pretty_pccs(&term),
                term,
                env,
            }])
        }
        (None, None) => Err("provide a term or --file".into()),
    }
}

fn run(cli: &Cli) -> Result<i32, String> {
    match &cli.cmd {
        Cmd::Steps { input, target } => cmd_steps(cli, input, *target),
        Cmd::Encode { input } => cmd_encode(cli, input),
        Cmd::Trace { input } => cmd_trace(cli, input),
        Cmd::Check { name, input } => cmd_check(cli, name, input),
        Cmd::Suite { corpus } => cmd_suite(cli, corpus),
    }
}

// ---------------------------------------------------------------------------
// steps
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct StepRecord {
    term: String,
    depth: usize,
    dist: Vec<(String, String)>,
}

/// Frontier of new distributions at each depth level, deduplicated by a
/// canonical key but reported verbatim. Every point that can step does step,
/// so each level is one scheduling round.
fn levels<T: Ord + Clone>(
    start: T,
    step_fn: &mut dyn FnMut(&T) -> Vec<Distribution<T>>,
    key_fn: &dyn Fn(&Distribution<T>) -> Distribution<T>,
    depth: usize,
    combo_cap: usize,
) -> Vec<Vec<Distribution<T>>> {
    let d0 = Distribution::point(start);
    let mut seen: BTreeSet<Distribution<T>> = [key_fn(&d0)].into();
    let mut out = vec![vec![d0]];
    for _ in 0..depth {
        let mut level = Vec::new();
        for d in out.last().unwrap() {
            for succ in dist_step(d, step_fn, combo_cap, SelectorMode::Eager).dists {
                if seen.insert(key_fn(&succ)) {
                    level.push(succ);
                }
            }
        }
        if level.is_empty() {
            break;
        }
        out.push(level);
    }
    out
}

fn dist_lines<T: Ord + Clone>(d: &Distribution<T>, show: &dyn Fn(&T) -> String) -> Vec<(String, String)> {
    d.iter().map(|(t, p)| (p.to_string(), show(t))).collect()
}

fn emit_levels<T: Ord + Clone>(
    name: &str,
    lv: &[Vec<Distribution<T>>],
    show: &dyn Fn(&T) -> String,
    fmt: OutputFormat,
) {
    match fmt {
        OutputFormat::Text => {
            println!("=== {name}");
            for (depth, dists) in lv.iter().enumerate() {
                println!("depth {depth}:");
                for d in dists {
                    let body = dist_lines(d, show)
                        .into_iter()
                        .map(|(p, t)| format!("{p} {t}"))
                        .collect::<Vec<_>>()
                        .join(", ");
                    println!("  {{ {body} }}");
                }
            }
        }
        OutputFormat::Records => {
            for (depth, dists) in lv.iter().enumerate() {
                for d in dists {
                    let rec = StepRecord {
                        term: name.to_string(),
                        depth,
                        dist: dist_lines(d, show),
                    };
                    println!("{}", serde_json::to_string(&rec).expect("records serialize"));
                }
            }
        }
    }
}

fn cmd_steps(cli: &Cli, input: &InputArgs, target: bool) -> Result<i32, String> {
    let enc = encoder(cli);
    for e in resolve_inputs(input)? {
        if target {
            let t0 = enc.encode_outer(&e.term, &e.env);
            let mut step = |p: &PpiProcess| ppi_reduce(p).into_iter().map(|(d, _)| d).collect();
            let lv = levels(
                t0,
                &mut step,
                &|d| d.map_terms(ppi_normal_form),
                cli.depth,
                cli.combo_cap,
            );
            emit_levels(&e.name, &lv, &|p| pretty_ppi(p), format(cli));
        } else {
            let env = e.env.clone();
            let mut step =
                |p: &PccsProcess| pccs_reduce(p, &env).expect("corpus entries are validated");
            let lv = levels(
                e.term.clone(),
                &mut step,
                &|d| d.map_terms(pccs_canonical),
                cli.depth,
                cli.combo_cap,
            );
            emit_levels(&e.name, &lv, &|p| pretty_pccs(p), format(cli));
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// encode
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct EncodeRecord {
    term: String,
    target: String,
}

fn cmd_encode(cli: &Cli, input: &InputArgs) -> Result<i32, String> {
    let enc = encoder(cli);
    for e in resolve_inputs(input)? {
        let text = pretty_ppi(&enc.encode_outer(&e.term, &e.env));
        match format(cli) {
            OutputFormat::Text => {
                println!("=== {}", e.name);
                println!("{text}");
            }
            OutputFormat::Records => {
                let rec = EncodeRecord {
                    term: e.name.clone(),
                    target: text,
                };
                println!("{}", serde_json::to_string(&rec).expect("records serialize"));
            }
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------------------
// trace
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct TraceRecord {
    term: String,
    depth: usize,
    side: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    classes: Vec<String>,
    dist: Vec<(String, String)>,
}

fn cmd_trace(cli: &Cli, input: &InputArgs) -> Result<i32, String> {
    let enc = encoder(cli);
    for e in resolve_inputs(input)? {
        let env = e.env.clone();
        let mut src_step =
            |p: &PccsProcess| pccs_reduce(p, &env).expect("corpus entries are validated");
        let src_levels = levels(
            e.term.clone(),
            &mut src_step,
            &|d| d.map_terms(pccs_canonical),
            cli.depth,
            cli.combo_cap,
        );

        // Target side: record the step classes encountered at each level.
        let classes: RefCell<BTreeSet<StepClass>> = RefCell::new(BTreeSet::new());
        let mut tgt_step = |p: &PpiProcess| {
            let steps = ppi_reduce(p);
            classes
                .borrow_mut()
                .extend(steps.iter().map(|(_, c)| c.clone()));
            steps.into_iter().map(|(d, _)| d).collect()
        };
        let t0 = enc.encode_outer(&e.term, &e.env);
        let d0 = Distribution::point(t0);
        let mut seen: BTreeSet<Distribution<PpiProcess>> =
            [d0.map_terms(ppi_normal_form)].into();
        let mut tgt_levels: Vec<(Vec<Distribution<PpiProcess>>, Vec<String>)> =
            vec![(vec![d0], Vec::new())];
        for _ in 0..cli.depth {
            classes.borrow_mut().clear();
            let mut level = Vec::new();
            for d in &tgt_levels.last().unwrap().0 {
                for succ in dist_step(d, &mut tgt_step, cli.combo_cap, SelectorMode::Eager).dists {
                    if seen.insert(succ.map_terms(ppi_normal_form)) {
                        level.push(succ);
                    }
                }
            }
            if level.is_empty() {
                break;
            }
            let tags = classes.borrow().iter().map(|c| c.to_string()).collect();
            tgt_levels.push((level, tags));
        }

        let fmt = format(cli);
        if fmt == OutputFormat::Text {
            println!("=== {}", e.name);
        }
        let max_depth = src_levels.len().max(tgt_levels.len());
        for depth in 0..max_depth {
            if let Some(dists) = src_levels.get(depth) {
                emit_trace_side(&e.name, depth, "src", &[], dists, &|p| pretty_pccs(p), fmt);
            }
            if let Some((dists, tags)) = tgt_levels.get(depth) {
                emit_trace_side(&e.name, depth, "tgt", tags, dists, &|p| pretty_ppi(p), fmt);
            }
        }
    }
    Ok(0)
}

fn emit_trace_side<T: Ord + Clone>(
    name: &str,
    depth: usize,
    side: &str,
    classes: &[String],
    dists: &[Distribution<T>],
    show: &dyn Fn(&T) -> String,
    fmt: OutputFormat,
) {
    match fmt {
        OutputFormat::Text => {
            let tag = if classes.is_empty() {
                String::new()
            } else {
                format!(" [{}]", classes.join(","))
            };
            println!("depth {depth} {side}{tag}:");
            for d in dists {
                let body = dist_lines(d, show)
                    .into_iter()
                    .map(|(p, t)| format!("{p} {t}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                println!("  {{ {body} }}");
            }
        }
        OutputFormat::Records => {
            for d in dists {
                let rec = TraceRecord {
                    term: name.to_string(),
                    depth,
                    side: side.to_string(),
                    classes: classes.to_vec(),
                    dist: dist_lines(d, show),
                };
                println!("{}", serde_json::to_string(&rec).expect("records serialize"));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// check and suite
// ---------------------------------------------------------------------------

fn poc_records(entry: &str, check: &str, report: PocReport) -> Vec<Record> {
    let classes = report.step_classes.clone();
    vec![
        Record::from_verdict(entry, check, Some("completeness"), report.completeness)
            .with_classes(classes),
        Record::from_verdict(entry, check, Some("soundness"), report.soundness),
    ]
}

fn verdict_record(entry: &str, check: &str, v: Result<Verdict, PccsError>) -> Result<Vec<Record>, String> {
    let v = v.map_err(|e| e.to_string())?;
    Ok(vec![Record::from_verdict(entry, check, None, v)])
}

fn cmd_check(cli: &Cli, name: &str, input: &InputArgs) -> Result<i32, String> {
    let enc = encoder(cli);
    let rel = target_rel(cli);
    let b = budget(cli);
    let entries = resolve_inputs(input)?;

    // The theorem-level checks take the whole selection at once.
    if let Some(flavor) = match name {
        "theorem-weak" => Some(PocFlavor::Weak),
        "theorem-mid" => Some(PocFlavor::Mid),
        "theorem-strong" => Some(PocFlavor::Strong),
        _ => None,
    } {
        let mut env = DefEnv::new();
        for e in &entries {
            env.merge(&e.env).map_err(|e| e.to_string())?;
        }
        let terms: Vec<PccsProcess> = entries.iter().map(|e| e.term.clone()).collect();
        let v = theorem_instance_check(&terms, &env, &enc, flavor, &b).map_err(|e| e.to_string())?;
        let records = vec![Record::from_verdict("corpus", name, None, v)];
        print_records(&records, format(cli));
        return Ok(exit_code(&records));
    }

    let mut records = Vec::new();
    for e in &entries {
        let recs = match name {
            "weak-poc" => poc_records(
                &e.name,
                name,
                check_weak_poc(&e.term, &e.env, &enc, rel, &b).map_err(|e| e.to_string())?,
            ),
            "mid-poc" => poc_records(
                &e.name,
                name,
                check_mid_poc(&e.term, &e.env, &enc, rel, &b).map_err(|e| e.to_string())?,
            ),
            "strong-poc" => poc_records(
                &e.name,
                name,
                check_strong_poc(&e.term, &e.env, &enc, rel).map_err(|e| e.to_string())?,
            ),
            "oc-strong" | "oc-plain" | "oc-weak" => {
                let variant = match name {
                    "oc-strong" => OcVariant::Strong,
                    "oc-plain" => OcVariant::Plain,
                    _ => OcVariant::Weak,
                };
                verdict_record(
                    &e.name,
                    name,
                    check_nonprob_oc(&e.term, &e.env, &enc, rel, &b, variant),
                )?
            }
            "success" => verdict_record(
                &e.name,
                name,
                check_success_sensitiveness(&e.term, &e.env, &enc, &b),
            )?,
            "barbs" => verdict_record(
                &e.name,
                name,
                check_barb_sensitiveness(&e.term, &e.env, &enc, &b),
            )?,
            "divergence" => verdict_record(
                &e.name,
                name,
                check_divergence_reflection(&e.term, &e.env, &enc, &b),
            )?,
            "compositionality" => vec![Record::from_verdict(
                &e.name,
                name,
                None,
                check_weak_compositionality(&e.term, &enc),
            )],
            "name-invariance" => verdict_record(
                &e.name,
                name,
                check_name_invariance(&e.term, &e.env, &enc, cli.samples, cli.seed),
            )?,
            other => return Err(format!("unknown check '{other}'")),
        };
        records.extend(recs);
    }
    print_records(&records, format(cli));
    Ok(exit_code(&records))
}

fn entry_battery(e: &CorpusEntry, enc: &Encoder, rel: TargetRel, b: &ExplorationBudget, samples: usize, seed: u64) -> Vec<Record> {
    let mut records = Vec::new();
    records.push(Record::from_verdict(
        &e.name,
        "compositionality",
        None,
        check_weak_compositionality(&e.term, enc),
    ));
    records.push(Record::from_verdict(
        &e.name,
        "name-invariance",
        None,
        check_name_invariance(&e.term, &e.env, enc, samples, seed)
            .expect("corpus entries are validated"),
    ));
    let poc = check_weak_poc(&e.term, &e.env, enc, rel, b).expect("corpus entries are validated");
    records.extend(poc_records(&e.name, "weak-poc", poc));
    records.push(Record::from_verdict(
        &e.name,
        "divergence",
        None,
        check_divergence_reflection(&e.term, &e.env, enc, b)
            .expect("corpus entries are validated"),
    ));
    records.push(Record::from_verdict(
        &e.name,
        "success",
        None,
        check_success_sensitiveness(&e.term, &e.env, enc, b)
            .expect("corpus entries are validated"),
    ));
    records
}

fn cmd_suite(cli: &Cli, corpus: &PathBuf) -> Result<i32, String> {
    let text = std::fs::read_to_string(corpus)
        .map_err(|e| format!("cannot read {}: {e}", corpus.display()))?;
    let entries = load_corpus(&text)?;
    let enc = encoder(cli);
    let rel = target_rel(cli);
    let b = budget(cli);
    let records: Vec<Record> = entries
        .par_iter()
        .map(|e| entry_battery(e, &enc, rel, &b, cli.samples, cli.seed))
        .reduce(Vec::new, |mut acc, mut recs| {
            acc.append(&mut recs);
            acc
        });
    print_records(&records, format(cli));
    Ok(exit_code(&records))
}
