//! Recursive-descent parsers for the two process languages.
//!
//! Source grammar (lowest precedence first):
//!   program  := def* term
//!   def      := "def" UIDENT "(" [ident ("," ident)*] ")" "=" term
//!   term     := postfix ("|" postfix)*
//!   postfix  := atom ( "\" "{" names "}" | "[" renamings "]" )*
//!   atom     := "(" term ")" | "0" | "ok" | guard "." "(" branches ")"
//!             | UIDENT "<" [names] ">" | UIDENT
//!   guard    := "tau" | "'" lident | lident
//!   branches := prob ":" term ("+" prob ":" term)*
//!
//! A bare upper-case identifier is a named stub leaf: an inert, barb-free
//! process distinct per name, so example terms can use placeholder processes.
//!
//! Target grammar:
//!   term   := factor ("|" factor)*
//!   factor := "new" name "." factor | "!" name "(" params ")" "." factor
//!           | name "?" "{" inbranches "}" | name "!" "{" selbranches "}"
//!           | name "!" "<" args ">" "." factor
//!           | "(" term ")" | "0" | "ok" | ident   (stub leaf)
//!
//! Target names may carry the reserved "#" prefix; source names cannot.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use poc_core::pccs::{DefEnv, PccsGuard, PccsProcess, RenamingFn};
use poc_core::ppi::PpiProcess;
use poc_core::prob::Prob;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}: {}", self.line, self.col, self.msg)
    }
}

impl std::error::Error for ParseError {}

/// Prefix for the hidden channel backing a named stub leaf.
pub const STUB_PREFIX: &str = "stub_";

/// The inert, barb-free process a bare upper-case identifier denotes.
pub fn stub_leaf(name: &str) -> PccsProcess {
    let chan = format!("{STUB_PREFIX}{name}");
    PccsProcess::restrict(
        PccsProcess::Choice(
            PccsGuard::In(chan.clone()),
            vec![(Prob::one(), PccsProcess::Inert)],
        ),
        [chan].into_iter().collect(),
    )
}

/// The target-side analogue of a stub leaf.
pub fn ppi_stub_leaf(name: &str) -> PpiProcess {
    let chan = format!("{STUB_PREFIX}{name}");
    PpiProcess::restrict(
        chan.clone(),
        PpiProcess::BranchIn(chan, [(1u32, (Vec::new(), PpiProcess::Nil))].into()),
    )
}

struct Scanner<'a> {
    src: &'a [u8],
    pos: usize,
    line: usize,
    col: usize,
}

impl<'a> Scanner<'a> {
    fn new(text: &'a str) -> Scanner<'a> {
        Scanner {
            src: text.as_bytes(),
            pos: 0,
            line: 1,
            col: 1,
        }
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        ParseError {
            line: self.line,
            col: self.col,
            msg: msg.into(),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.src.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek()?;
        self.pos += 1;
        if c == b'\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            self.bump();
        }
    }

    /// Consumes `c` if it is next (after whitespace).
    fn eat(&mut self, c: u8) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.err(format!(
                "expected '{}'{}",
                c as char,
                match self.peek() {
                    Some(d) => format!(", found '{}'", d as char),
                    None => ", found end of input".into(),
                }
            )))
        }
    }

    fn is_ident_start(c: u8) -> bool {
        c.is_ascii_alphabetic() || c == b'_'
    }

    fn is_ident_char(c: u8) -> bool {
        c.is_ascii_alphanumeric() || c == b'_'
    }

    /// Reads an identifier; `allow_reserved` additionally accepts a leading
    /// '#' (the marker prefix of machine-generated target names).
    fn ident(&mut self, allow_reserved: bool) -> Result<String, ParseError> {
        self.skip_ws();
        let mut s = String::new();
        if allow_reserved && self.peek() == Some(b'#') {
            self.bump();
            s.push('#');
        }
        match self.peek() {
            Some(c) if Self::is_ident_start(c) => {}
            _ => return Err(self.err("expected a name")),
        }
        while let Some(c) = self.peek() {
            if Self::is_ident_char(c) {
                s.push(self.bump().unwrap() as char);
            } else {
                break;
            }
        }
        Ok(s)
    }

    /// Peeks whether an identifier equal to `kw` is next, without consuming.
    fn at_keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        let bytes = kw.as_bytes();
        if self.src.len() < self.pos + bytes.len() {
            return false;
        }
        if &self.src[self.pos..self.pos + bytes.len()] != bytes {
            return false;
        }
        !matches!(self.src.get(self.pos + bytes.len()), Some(&c) if Self::is_ident_char(c))
    }

    fn uint(&mut self) -> Result<BigInt, ParseError> {
        self.skip_ws();
        let mut digits = String::new();
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                digits.push(self.bump().unwrap() as char);
            } else {
                break;
            }
        }
        if digits.is_empty() {
            return Err(self.err("expected a number"));
        }
        Ok(digits.parse().expect("digits form an integer"))
    }

    /// A probability literal `n` or `n/d`, as an exact rational in (0, 1].
    fn prob(&mut self) -> Result<Prob, ParseError> {
        self.skip_ws();
        let (line, col) = (self.line, self.col);
        let num = self.uint()?;
        let den = if self.eat(b'/') {
            self.uint()?
        } else {
            BigInt::one()
        };
        if den == BigInt::from(0) {
            return Err(ParseError {
                line,
                col,
                msg: "probability has denominator zero".into(),
            });
        }
        Prob::from_ratio(BigRational::new(num, den)).map_err(|e| ParseError {
            line,
            col,
            msg: e.to_string(),
        })
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.src.len()
    }
}

// ---------------------------------------------------------------------------
// Source language
// ---------------------------------------------------------------------------

/// Parses a source program: zero or more definitions followed by one term.
pub fn parse_pccs(text: &str) -> Result<(PccsProcess, DefEnv), ParseError> {
    let mut sc = Scanner::new(text);
    let mut env = DefEnv::new();
    while sc.at_keyword("def") {
        let (line, col) = (sc.line, sc.col);
        sc.ident(false)?; // the keyword itself
        let name = sc.ident(false)?;
        if !name.starts_with(|c: char| c.is_ascii_uppercase()) {
            return Err(ParseError {
                line,
                col,
                msg: format!("constant '{name}' must start with an upper-case letter"),
            });
        }
        sc.expect(b'(')?;
        let params = name_list(&mut sc, b')', false)?;
        sc.expect(b')')?;
        sc.expect(b'=')?;
        let body = pccs_term(&mut sc)?;
        env.define(&name, params, body).map_err(|e| ParseError {
            line,
            col,
            msg: e.to_string(),
        })?;
    }
    let term = pccs_term(&mut sc)?;
    if !sc.at_end() {
        return Err(sc.err("unexpected trailing input"));
    }
    Ok((term, env))
}

fn name_list(sc: &mut Scanner, close: u8, allow_reserved: bool) -> Result<Vec<String>, ParseError> {
    let mut names = Vec::new();
    sc.skip_ws();
    if sc.peek() == Some(close) {
        return Ok(names);
    }
    loop {
        names.push(sc.ident(allow_reserved)?);
        if !sc.eat(b',') {
            return Ok(names);
        }
    }
}

fn pccs_term(sc: &mut Scanner) -> Result<PccsProcess, ParseError> {
    let mut p = pccs_postfix(sc)?;
    while sc.eat(b'|') {
        let q = pccs_postfix(sc)?;
        p = PccsProcess::par(p, q);
    }
    Ok(p)
}

fn pccs_postfix(sc: &mut Scanner) -> Result<PccsProcess, ParseError> {
    let mut p = pccs_atom(sc)?;
    loop {
        sc.skip_ws();
        match sc.peek() {
            Some(b'\\') => {
                sc.bump();
                sc.expect(b'{')?;
                let names: BTreeSet<String> = name_list(sc, b'}', false)?.into_iter().collect();
                sc.expect(b'}')?;
                p = PccsProcess::restrict(p, names);
            }
            Some(b'[') => {
                sc.bump();
                let mut map = BTreeMap::new();
                sc.skip_ws();
                if sc.peek() != Some(b']') {
                    loop {
                        let from = sc.ident(false)?;
                        sc.expect(b'-')?;
                        sc.expect(b'>')?;
                        let to = sc.ident(false)?;
                        map.insert(from, to);
                        if !sc.eat(b',') {
                            break;
                        }
                    }
                }
                sc.expect(b']')?;
                p = PccsProcess::relabel(p, RenamingFn::new(map));
            }
            _ => return Ok(p),
        }
    }
}

fn pccs_atom(sc: &mut Scanner) -> Result<PccsProcess, ParseError> {
    sc.skip_ws();
    let (line, col) = (sc.line, sc.col);
    match sc.peek() {
        Some(b'(') => {
            sc.bump();
            let p = pccs_term(sc)?;
            sc.expect(b')')?;
            Ok(p)
        }
        Some(b'0') => {
            sc.bump();
            Ok(PccsProcess::Inert)
        }
        Some(b'\'') => {
            sc.bump();
            let chan = sc.ident(false)?;
            sc.expect(b'.')?;
            pccs_choice(sc, PccsGuard::Out(chan), line, col)
        }
        Some(c) if Scanner::is_ident_start(c) => {
            if sc.at_keyword("ok") {
                sc.ident(false)?;
                return Ok(PccsProcess::Success);
            }
            if sc.at_keyword("tau") {
                sc.ident(false)?;
                sc.expect(b'.')?;
                return pccs_choice(sc, PccsGuard::Tau, line, col);
            }
            let name = sc.ident(false)?;
            if name.starts_with(|c: char| c.is_ascii_uppercase()) {
                if sc.eat(b'<') {
                    let args = name_list(sc, b'>', false)?;
                    sc.expect(b'>')?;
                    Ok(PccsProcess::Call(name, args))
                } else {
                    Ok(stub_leaf(&name))
                }
            } else {
                sc.expect(b'.')?;
                pccs_choice(sc, PccsGuard::In(name), line, col)
            }
        }
        _ => Err(sc.err("expected a process")),
    }
}

fn pccs_choice(
    sc: &mut Scanner,
    guard: PccsGuard,
    line: usize,
    col: usize,
) -> Result<PccsProcess, ParseError> {
    sc.expect(b'(')?;
    let mut branches = Vec::new();
    loop {
        let p = sc.prob()?;
        sc.expect(b':')?;
        let body = pccs_term(sc)?;
        branches.push((p, body));
        if !sc.eat(b'+') {
            break;
        }
    }
    sc.expect(b')')?;
    PccsProcess::choice(guard, branches).map_err(|e| ParseError {
        line,
        col,
        msg: e.to_string(),
    })
}

// ---------------------------------------------------------------------------
// Target language
// ---------------------------------------------------------------------------

pub fn parse_ppi(text: &str) -> Result<PpiProcess, ParseError> {
    let mut sc = Scanner::new(text);
    let p = ppi_term(&mut sc)?;
    if !sc.at_end() {
        return Err(sc.err("unexpected trailing input"));
    }
    Ok(p)
}

fn ppi_term(sc: &mut Scanner) -> Result<PpiProcess, ParseError> {
    let mut p = ppi_factor(sc)?;
    while sc.eat(b'|') {
        let q = ppi_factor(sc)?;
        p = PpiProcess::par(p, q);
    }
    Ok(p)
}

fn ppi_factor(sc: &mut Scanner) -> Result<PpiProcess, ParseError> {
    sc.skip_ws();
    let (line, col) = (sc.line, sc.col);
    match sc.peek() {
        Some(b'(') => {
            sc.bump();
            let p = ppi_term(sc)?;
            sc.expect(b')')?;
            Ok(p)
        }
        Some(b'0') => {
            sc.bump();
            Ok(PpiProcess::Nil)
        }
        Some(b'!') => {
            sc.bump();
            let chan = sc.ident(true)?;
            sc.expect(b'(')?;
            let params = name_list(sc, b')', true)?;
            sc.expect(b')')?;
            sc.expect(b'.')?;
            let body = ppi_factor(sc)?;
            Ok(PpiProcess::rep_in(chan, params, body))
        }
        Some(c) if c == b'#' || Scanner::is_ident_start(c) => {
            if sc.at_keyword("ok") {
                sc.ident(false)?;
                return Ok(PpiProcess::Success);
            }
            if sc.at_keyword("new") {
                sc.ident(false)?;
                let chan = sc.ident(true)?;
                sc.expect(b'.')?;
                let body = ppi_factor(sc)?;
                return Ok(PpiProcess::restrict(chan, body));
            }
            let name = sc.ident(true)?;
            sc.skip_ws();
            match sc.peek() {
                Some(b'?') => {
                    sc.bump();
                    sc.expect(b'{')?;
                    let mut branches = BTreeMap::new();
                    loop {
                        let idx = branch_index(sc)?;
                        sc.expect(b'(')?;
                        let params = name_list(sc, b')', true)?;
                        sc.expect(b')')?;
                        sc.expect(b':')?;
                        let body = ppi_term(sc)?;
                        if branches.insert(idx, (params, body)).is_some() {
                            return Err(sc.err(format!("duplicate branch index {idx}")));
                        }
                        if !sc.eat(b',') {
                            break;
                        }
                    }
                    sc.expect(b'}')?;
                    Ok(PpiProcess::BranchIn(name, branches))
                }
                Some(b'!') => {
                    sc.bump();
                    sc.skip_ws();
                    if sc.peek() == Some(b'<') {
                        sc.bump();
                        let args = name_list(sc, b'>', true)?;
                        sc.expect(b'>')?;
                        sc.expect(b'.')?;
                        let body = ppi_factor(sc)?;
                        return Ok(PpiProcess::out_prefix(name, args, body));
                    }
                    sc.expect(b'{')?;
                    let mut branches = BTreeMap::new();
                    let mut sum = BigRational::from(BigInt::from(0));
                    loop {
                        let pr = sc.prob()?;
                        let idx = branch_index(sc)?;
                        sc.expect(b'(')?;
                        let args = name_list(sc, b')', true)?;
                        sc.expect(b')')?;
                        sc.expect(b':')?;
                        let body = ppi_term(sc)?;
                        sum += pr.ratio();
                        if branches.insert(idx, (pr, args, body)).is_some() {
                            return Err(sc.err(format!("duplicate branch index {idx}")));
                        }
                        if !sc.eat(b',') {
                            break;
                        }
                    }
                    sc.expect(b'}')?;
                    if !sum.is_one() {
                        return Err(ParseError {
                            line,
                            col,
                            msg: format!("branch probabilities sum to {sum}, not 1"),
                        });
                    }
                    Ok(PpiProcess::SelectOut(name, branches))
                }
                _ => {
                    if name.starts_with('#') {
                        Err(sc.err(format!("reserved name {name} cannot stand alone")))
                    } else {
                        Ok(ppi_stub_leaf(&name))
                    }
                }
            }
        }
        _ => Err(sc.err("expected a process")),
    }
}

fn branch_index(sc: &mut Scanner) -> Result<u32, ParseError> {
    let n = sc.uint()?;
    u32::try_from(&n).map_err(|_| sc.err(format!("branch index {n} out of range")))
}
