//! Deterministic pretty-printers for both languages. Output re-parses to an
//! alpha-equivalent term; named stub leaves are printed back as their bare
//! identifiers.

use poc_core::pccs::{DefEnv, PccsGuard, PccsProcess};
use poc_core::ppi::PpiProcess;

use crate::parse::STUB_PREFIX;

/// The stub identifier a source subterm sugars to, if any.
fn pccs_stub_name(p: &PccsProcess) -> Option<&str> {
    if let PccsProcess::Restrict(body, names) = p {
        if let PccsProcess::Choice(PccsGuard::In(chan), branches) = body.as_ref() {
            let stub = chan.strip_prefix(STUB_PREFIX)?;
            if names.len() == 1
                && names.contains(chan)
                && branches.len() == 1
                && branches[0].0.is_one()
                && branches[0].1 == PccsProcess::Inert
            {
                return Some(stub);
            }
        }
    }
    None
}

fn ppi_stub_name(p: &PpiProcess) -> Option<&str> {
    if let PpiProcess::Restrict(chan, body) = p {
        let stub = chan.strip_prefix(STUB_PREFIX)?;
        if let PpiProcess::BranchIn(x, branches) = body.as_ref() {
            if x == chan && branches.len() == 1 {
                if let Some((params, cont)) = branches.get(&1) {
                    if params.is_empty() && *cont == PpiProcess::Nil {
                        return Some(stub);
                    }
                }
            }
        }
    }
    None
}

pub fn pretty_pccs(p: &PccsProcess) -> String {
    let mut out = String::new();
    write_pccs(p, &mut out);
    out
}

fn write_pccs(p: &PccsProcess, out: &mut String) {
    if let Some(stub) = pccs_stub_name(p) {
        out.push_str(stub);
        return;
    }
    match p {
        PccsProcess::Choice(g, branches) => {
            match g {
                PccsGuard::In(n) => out.push_str(n),
                PccsGuard::Out(n) => {
                    out.push('\'');
                    out.push_str(n);
                }
                PccsGuard::Tau => out.push_str("tau"),
            }
            out.push_str(".(");
            for (i, (pr, q)) in branches.iter().enumerate() {
                if i > 0 {
                    out.push_str(" + ");
                }
                out.push_str(&format!("{pr}: "));
                write_pccs(q, out);
            }
            out.push(')');
        }
        PccsProcess::Par(l, r) => {
            let wrap = |p: &PccsProcess, out: &mut String| {
                if matches!(p, PccsProcess::Par(..)) && pccs_stub_name(p).is_none() {
                    out.push('(');
                    write_pccs(p, out);
                    out.push(')');
                } else {
                    write_pccs(p, out);
                }
            };
            wrap(l, out);
            out.push_str(" | ");
            wrap(r, out);
        }
        PccsProcess::Restrict(body, names) => {
            out.push('(');
            write_pccs(body, out);
            out.push_str(")\\{");
            for (i, n) in names.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(n);
            }
            out.push('}');
        }
        PccsProcess::Relabel(body, f) => {
            out.push('(');
            write_pccs(body, out);
            out.push_str(")[");
            for (i, (from, to)) in f.entries().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(&format!("{from}->{to}"));
            }
            out.push(']');
        }
        PccsProcess::Call(c, args) => {
            out.push_str(c);
            out.push('<');
            out.push_str(&args.join(","));
            out.push('>');
        }
        PccsProcess::Success => out.push_str("ok"),
        PccsProcess::Inert => out.push('0'),
    }
}

/// Prints the definitions followed by the main term, one definition per line.
pub fn pretty_program(term: &PccsProcess, env: &DefEnv) -> String {
    let mut out = String::new();
    for (name, (params, body)) in env.iter() {
        out.push_str(&format!("def {name}({}) = {}\n", params.join(","), pretty_pccs(body)));
    }
    out.push_str(&pretty_pccs(term));
    out
}

pub fn pretty_ppi(p: &PpiProcess) -> String {
    let mut out = String::new();
    write_ppi(p, &mut out);
    out
}

fn write_ppi(p: &PpiProcess, out: &mut String) {
    if let Some(stub) = ppi_stub_name(p) {
        out.push_str(stub);
        return;
    }
    // A continuation after '.' binds tighter than parallel composition.
    let cont = |p: &PpiProcess, out: &mut String| {
        if matches!(p, PpiProcess::Par(..)) && ppi_stub_name(p).is_none() {
            out.push('(');
            write_ppi(p, out);
            out.push(')');
        } else {
            write_ppi(p, out);
        }
    };
    match p {
        PpiProcess::BranchIn(x, branches) => {
            out.push_str(x);
            out.push_str("?{");
            for (k, (i, (params, body))) in branches.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                out.push_str(&format!("{i}({}): ", params.join(",")));
                write_ppi(body, out);
            }
            out.push('}');
        }
        PpiProcess::SelectOut(x, branches) => {
            out.push_str(x);
            out.push_str("!{");
            for (k, (i, (pr, args, body))) in branches.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                out.push_str(&format!("{pr} {i}({}): ", args.join(",")));
                write_ppi(body, out);
            }
            out.push('}');
        }
        PpiProcess::RepIn(x, params, body) => {
            out.push('!');
            out.push_str(x);
            out.push_str(&format!("({}).", params.join(",")));
            cont(body, out);
        }
        PpiProcess::OutPrefix(x, args, body) => {
            out.push_str(x);
            out.push_str(&format!("!<{}>.", args.join(",")));
            cont(body, out);
        }
        PpiProcess::Restrict(x, body) => {
            out.push_str("new ");
            out.push_str(x);
            out.push_str(". ");
            cont(body, out);
        }
        PpiProcess::Par(l, r) => {
            let wrap = |p: &PpiProcess, out: &mut String| {
                if matches!(p, PpiProcess::Par(..) | PpiProcess::Restrict(..))
                    && ppi_stub_name(p).is_none()
                {
                    out.push('(');
                    write_ppi(p, out);
                    out.push(')');
                } else {
                    write_ppi(p, out);
                }
            };
            wrap(l, out);
            out.push_str(" | ");
            wrap(r, out);
        }
        PpiProcess::Nil => out.push('0'),
        PpiProcess::Success => out.push_str("ok"),
    }
}
