//! Corpus files: UTF-8 text with entries separated by `=== name` header
//! lines; each entry body holds optional definitions followed by one term.

use std::collections::BTreeSet;

use poc_core::pccs::{pccs_validate, DefEnv, PccsProcess};

use crate::parse::parse_pccs;

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub term: PccsProcess,
    pub env: DefEnv,
}

/// Parses a corpus file, requiring unique entry names and well-formed
/// entries (including closed definitions and resolvable constants).
pub fn load_corpus(text: &str) -> Result<Vec<CorpusEntry>, String> {
    let mut entries: Vec<(String, usize, String)> = Vec::new();
    let mut seen: BTreeSet<String> = BTreeSet::new();
    for (lineno, line) in text.lines().enumerate() {
        if let Some(rest) = line.strip_prefix("===") {
            let name = rest.trim().to_string();
            if name.is_empty() {
                return Err(format!("line {}: entry header without a name", lineno + 1));
            }
            if !seen.insert(name.clone()) {
                return Err(format!("line {}: duplicate entry name '{name}'", lineno + 1));
            }
            entries.push((name, lineno + 1, String::new()));
        } else if let Some((_, _, body)) = entries.last_mut() {
            body.push_str(line);
            body.push('\n');
        } else if !line.trim().is_empty() {
            return Err(format!("line {}: text before the first '===' header", lineno + 1));
        }
    }
    if entries.is_empty() {
        return Err("corpus has no entries".into());
    }
    entries
        .into_iter()
        .map(|(name, header_line, body)| {
            let (term, env) = parse_pccs(&body).map_err(|e| {
                format!(
                    "entry '{name}' (header line {header_line}), body line {}, column {}: {}",
                    e.line, e.col, e.msg
                )
            })?;
            pccs_validate(&term, &env)
                .map_err(|e| format!("entry '{name}': {e}"))?;
            Ok(CorpusEntry { name, term, env })
        })
        .collect()
}
