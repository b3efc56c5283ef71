//! Line-oriented protocol DSL.
//!
//! ```text
//! # comment
//! protocol <name>
//!   op <op_type> [in r1,r2] [out r3] [dur 20s|1.5min|2h] [param key=value]*
//! end
//! ```
//!
//! Clauses may appear in any order; `in`, `out` and `dur` at most once per
//! line. Durations are normalized to seconds. Only straight-line programs
//! are accepted; loops and parallel blocks have no syntax yet.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Diagnostic, DslError, FileDiagnostics};
use crate::protocol::{Corpus, CorpusRole, OpId, Operation, ParamValue, Protocol};

pub const FILE_EXTENSION: &str = ".proto.dsl";

const KEYWORDS: [&str; 7] = ["protocol", "end", "op", "in", "out", "dur", "param"];

#[derive(Debug, Clone, Copy)]
struct Token<'a> {
    text: &'a str,
    column: usize,
}

/// Splits a line into whitespace-separated tokens with 1-based char columns,
/// dropping everything from `#` onward.
fn tokenize(line: &str) -> (Vec<Token<'_>>, usize) {
    let code = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut tokens = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    let mut col = 0;
    for (byte, ch) in code.char_indices() {
        col += 1;
        if ch.is_whitespace() {
            if let Some((b, c)) = start.take() {
                tokens.push(Token { text: &code[b..byte], column: c });
            }
        } else if start.is_none() {
            start = Some((byte, col));
        }
    }
    if let Some((b, c)) = start {
        tokens.push(Token { text: &code[b..], column: c });
    }
    (tokens, col + 1)
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

fn is_resource(s: &str) -> bool {
    !s.is_empty() && !KEYWORDS.contains(&s) && !s.contains([',', '=', '#'])
}

fn parse_duration(raw: &str) -> Result<f64, String> {
    let split = raw
        .char_indices()
        .find(|(_, c)| !(c.is_ascii_digit() || matches!(c, '.' | '+' | '-')))
        .map(|(i, _)| i)
        .unwrap_or(raw.len());
    let (num, unit) = raw.split_at(split);
    let value: f64 = num
        .parse()
        .map_err(|_| format!("expected duration value, found `{raw}`"))?;
    let factor = match unit {
        "s" => 1.0,
        "min" => 60.0,
        "h" => 3600.0,
        "" => return Err(format!("missing duration unit in `{raw}`")),
        other => return Err(format!("unknown duration unit `{other}`")),
    };
    let seconds = value * factor;
    if !(seconds > 0.0 && seconds.is_finite()) {
        return Err(format!("duration must be positive, found `{raw}`"));
    }
    Ok(seconds)
}

struct LineParser<'a> {
    line: usize,
    tokens: Vec<Token<'a>>,
    eol: usize,
    pos: usize,
}

impl<'a> LineParser<'a> {
    fn diag(&self, column: usize, message: impl Into<String>) -> Diagnostic {
        Diagnostic { line: self.line, column, message: message.into() }
    }

    fn next(&mut self) -> Option<Token<'a>> {
        let t = self.tokens.get(self.pos).copied();
        self.pos += 1;
        t
    }

    fn resource_list(&mut self) -> Result<BTreeSet<String>, Diagnostic> {
        let mut out = BTreeSet::new();
        loop {
            let tok = match self.next() {
                Some(t) if !KEYWORDS.contains(&t.text) => t,
                Some(t) => return Err(self.diag(t.column, "expected resource identifier")),
                None => return Err(self.diag(self.eol, "expected resource identifier")),
            };
            let continues = tok.text.ends_with(',');
            let body = tok.text.strip_suffix(',').unwrap_or(tok.text);
            let mut offset = 0;
            for part in body.split(',') {
                let column = tok.column + body[..offset].chars().count();
                if !is_resource(part) {
                    return Err(self.diag(column, "expected resource identifier"));
                }
                if !out.insert(part.to_string()) {
                    return Err(self.diag(column, format!("duplicate resource `{part}`")));
                }
                offset += part.len() + 1;
            }
            if !continues {
                return Ok(out);
            }
        }
    }

    fn operation(&mut self, id: u32) -> Result<Operation, Diagnostic> {
        let op_type = match self.next() {
            Some(t) if is_ident(t.text) && !KEYWORDS.contains(&t.text) => t.text,
            Some(t) => return Err(self.diag(t.column, "expected operation type")),
            None => return Err(self.diag(self.eol, "expected operation type")),
        };
        let mut op = Operation::new(id, op_type);
        let (mut seen_in, mut seen_out, mut seen_dur) = (false, false, false);
        let line = self.line;
        while let Some(tok) = self.next() {
            let once = |flag: &mut bool| {
                if std::mem::replace(flag, true) {
                    Err(Diagnostic {
                        line,
                        column: tok.column,
                        message: format!("duplicate `{}` clause", tok.text),
                    })
                } else {
                    Ok(())
                }
            };
            match tok.text {
                "in" => {
                    once(&mut seen_in)?;
                    op.preconditions = self.resource_list()?;
                }
                "out" => {
                    once(&mut seen_out)?;
                    op.postconditions = self.resource_list()?;
                }
                "dur" => {
                    once(&mut seen_dur)?;
                    let t = self
                        .next()
                        .ok_or_else(|| self.diag(self.eol, "expected duration"))?;
                    op.duration = Some(parse_duration(t.text).map_err(|m| self.diag(t.column, m))?);
                }
                "param" => {
                    let t = self
                        .next()
                        .ok_or_else(|| self.diag(self.eol, "expected key=value"))?;
                    let (k, v) = t
                        .text
                        .split_once('=')
                        .filter(|(k, v)| is_ident(k) && !v.is_empty())
                        .ok_or_else(|| self.diag(t.column, "expected key=value"))?;
                    if op.parameters.insert(k.to_string(), ParamValue::parse(v)).is_some() {
                        return Err(self.diag(t.column, format!("duplicate parameter `{k}`")));
                    }
                }
                other => {
                    return Err(self.diag(tok.column, format!("unexpected token `{other}`")));
                }
            }
        }
        Ok(op)
    }
}

/// Parses every `protocol … end` block in `text`, in source order.
pub fn parse_protocols(text: &str) -> Result<Vec<Protocol>, DslError> {
    let mut diagnostics = Vec::new();
    let mut protocols: Vec<Protocol> = Vec::new();
    let mut current: Option<(Protocol, usize)> = None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let (tokens, eol) = tokenize(raw);
        let Some(head) = tokens.first().copied() else {
            continue;
        };
        let mut lp = LineParser { line, tokens, eol, pos: 1 };
        match (head.text, current.as_mut()) {
            ("protocol", None) => match lp.next() {
                Some(t) if is_ident(t.text) && !KEYWORDS.contains(&t.text) => {
                    if let Some(extra) = lp.next() {
                        diagnostics.push(lp.diag(extra.column, "expected end of line"));
                    }
                    current = Some((Protocol::new(t.text, Vec::new()), line));
                }
                Some(t) => diagnostics.push(lp.diag(t.column, "expected protocol name")),
                None => diagnostics.push(lp.diag(eol, "expected protocol name")),
            },
            ("protocol", Some((p, _))) => {
                diagnostics.push(lp.diag(head.column, format!("protocol `{}` is missing `end`", p.name)));
            }
            ("op", Some((p, _))) => {
                let id = p.operations.len() as u32;
                match lp.operation(id) {
                    Ok(op) => p.operations.push(op),
                    Err(d) => diagnostics.push(d),
                }
            }
            ("end", Some(_)) => {
                if let Some(extra) = lp.next() {
                    diagnostics.push(lp.diag(extra.column, "expected end of line"));
                }
                let (p, at) = current.take().expect("open block");
                if protocols.iter().any(|q| q.name == p.name) {
                    diagnostics.push(Diagnostic {
                        line: at,
                        column: 1,
                        message: format!("duplicate protocol name `{}`", p.name),
                    });
                } else {
                    protocols.push(p);
                }
            }
            (other, None) => {
                diagnostics.push(lp.diag(head.column, format!("expected `protocol`, found `{other}`")));
            }
            (other, Some(_)) => {
                diagnostics.push(lp.diag(head.column, format!("expected `op` or `end`, found `{other}`")));
            }
        }
    }
    if let Some((p, at)) = current {
        diagnostics.push(Diagnostic {
            line: last_line.max(at),
            column: 1,
            message: format!("protocol `{}` is missing `end`", p.name),
        });
    }
    if diagnostics.is_empty() {
        Ok(protocols)
    } else {
        Err(DslError::Syntax(diagnostics))
    }
}

/// Parses exactly one protocol block.
pub fn parse_protocol(text: &str) -> Result<Protocol, DslError> {
    let mut ps = parse_protocols(text)?;
    match ps.len() {
        1 => Ok(ps.remove(0)),
        n => Err(DslError::Syntax(vec![Diagnostic {
            line: 1,
            column: 1,
            message: format!("expected exactly one protocol block, found {n}"),
        }])),
    }
}

fn read(path: &Path) -> Result<String, DslError> {
    fs::read_to_string(path).map_err(|source| DslError::Io { path: path.to_path_buf(), source })
}

/// Lists protocol files in a directory, ordered by file name.
pub fn protocol_files(dir: &Path) -> Result<Vec<PathBuf>, DslError> {
    let entries = fs::read_dir(dir).map_err(|source| DslError::Io { path: dir.to_path_buf(), source })?;
    let mut files = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| DslError::Io { path: dir.to_path_buf(), source })?;
        let path = entry.path();
        let is_dsl = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.ends_with(FILE_EXTENSION));
        if is_dsl && path.is_file() {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));
    Ok(files)
}

/// Loads a corpus from a single DSL file or a directory of them. Any
/// malformed file aborts the load; diagnostics from all files are returned.
pub fn parse_corpus(path: &Path, role: CorpusRole) -> Result<Corpus, DslError> {
    let files = if path.is_dir() { protocol_files(path)? } else { vec![path.to_path_buf()] };
    let mut failures = Vec::new();
    let mut protocols = Vec::new();
    for file in files {
        match parse_protocols(&read(&file)?) {
            Ok(ps) => protocols.extend(ps),
            Err(DslError::Syntax(diagnostics)) => failures.push(FileDiagnostics { path: file, diagnostics }),
            Err(e) => return Err(e),
        }
    }
    if !failures.is_empty() {
        return Err(DslError::Corpus(failures));
    }
    Corpus::new(role, protocols)
}

fn join(set: &BTreeSet<String>) -> String {
    set.iter().map(String::as_str).collect::<Vec<_>>().join(",")
}

/// Renders a protocol in DSL syntax. Operation ids are positional, so ids
/// that are not `0..n` in order do not survive a reparse.
pub fn to_dsl(p: &Protocol) -> String {
    let mut out = format!("protocol {}\n", p.name);
    for op in &p.operations {
        out.push_str("  op ");
        out.push_str(&op.op_type);
        if !op.preconditions.is_empty() {
            out.push_str(" in ");
            out.push_str(&join(&op.preconditions));
        }
        if !op.postconditions.is_empty() {
            out.push_str(" out ");
            out.push_str(&join(&op.postconditions));
        }
        if let Some(d) = op.duration {
            out.push_str(&format!(" dur {d}s"));
        }
        for (k, v) in &op.parameters {
            out.push_str(&format!(" param {k}={}", v.to_token()));
        }
        out.push('\n');
    }
    out.push_str("end\n");
    out
}

/// Writes one `<name>.proto.dsl` file per protocol into `dir`.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<Vec<PathBuf>, DslError> {
    fs::create_dir_all(dir).map_err(|source| DslError::Io { path: dir.to_path_buf(), source })?;
    corpus
        .protocols
        .iter()
        .map(|p| {
            let path = dir.join(format!("{}{FILE_EXTENSION}", p.name));
            fs::write(&path, to_dsl(p)).map_err(|source| DslError::Io { path: path.clone(), source })?;
            Ok(path)
        })
        .collect()
}

/// Operation ids in a parsed protocol are dense and ordered.
pub fn has_positional_ids(p: &Protocol) -> bool {
    p.operations.iter().enumerate().all(|(i, op)| op.id == OpId(i as u32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn syntax(err: DslError) -> Vec<Diagnostic> {
        match err {
            DslError::Syntax(d) => d,
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn parses_two_operation_protocol() {
        let p = parse_protocol("protocol p\n op A out r1\n op B in r1 out r2 dur 20s\nend").unwrap();
        let expected = Protocol::from_steps(
            "p",
            &[("A", &[], &["r1"], None), ("B", &["r1"], &["r2"], Some(20.0))],
        );
        assert_eq!(p, expected);
    }

    #[test]
    fn empty_body_is_empty_protocol() {
        assert_eq!(parse_protocol("protocol p\nend").unwrap(), Protocol::new("p", vec![]));
    }

    #[test]
    fn missing_resource_after_in() {
        let d = syntax(parse_protocol("protocol p\n op B in\nend").unwrap_err());
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].line, 2);
        assert_eq!(d[0].column, 9);
        assert_eq!(d[0].message, "expected resource identifier");
    }

    #[test]
    fn durations_normalize_to_seconds() {
        let p = parse_protocol("protocol p\n op A dur 1.5min\n op B dur 2h\n op C dur 3s\nend").unwrap();
        let durs: Vec<_> = p.operations.iter().map(|o| o.duration.unwrap()).collect();
        assert_eq!(durs, vec![90.0, 7200.0, 3.0]);
    }

    #[test]
    fn unknown_duration_unit() {
        let d = syntax(parse_protocol("protocol p\n op A dur 3days\nend").unwrap_err());
        assert!(d[0].message.contains("unknown duration unit `days`"), "{:?}", d);
        assert_eq!((d[0].line, d[0].column), (2, 11));
    }

    #[test]
    fn zero_duration_rejected() {
        let d = syntax(parse_protocol("protocol p\n op A dur 0s\nend").unwrap_err());
        assert!(d[0].message.contains("positive"));
    }

    #[test]
    fn duplicate_protocol_name_in_file() {
        let d = syntax(parse_protocols("protocol p\nend\nprotocol p\nend\n").unwrap_err());
        assert_eq!(d[0].line, 3);
        assert!(d[0].message.contains("duplicate protocol name"));
    }

    #[test]
    fn lists_with_spaces_comments_and_params() {
        let src = "# header\nprotocol mix # trailing\n  op stir in a, b out c param rpm=300 param temp=37C\nend\n";
        let p = parse_protocol(src).unwrap();
        let op = &p.operations[0];
        assert_eq!(op.preconditions.iter().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(op.parameters["temp"], ParamValue { value: "37".into(), unit: Some("C".into()) });
    }

    #[test]
    fn duplicate_resource_and_clause_errors() {
        let d = syntax(parse_protocol("protocol p\n op A in a,a\nend").unwrap_err());
        assert!(d[0].message.contains("duplicate resource"));
        let d = syntax(parse_protocol("protocol p\n op A in a in b\nend").unwrap_err());
        assert!(d[0].message.contains("duplicate `in` clause"));
    }

    #[test]
    fn missing_end_is_reported() {
        let d = syntax(parse_protocol("protocol p\n op A\n").unwrap_err());
        assert!(d[0].message.contains("missing `end`"));
    }

    #[test]
    fn every_diagnostic_has_a_location() {
        let src = "op A\nprotocol\nprotocol q\n op\n op A dur x\n op A in ,\n bogus\n";
        let d = syntax(parse_protocols(src).unwrap_err());
        assert!(d.len() >= 5);
        assert!(d.iter().all(|d| d.line >= 1 && d.column >= 1));
    }

    #[test]
    fn corpus_from_directory() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("b.proto.dsl"), "protocol q\n op A\nend\n").unwrap();
        fs::write(dir.path().join("a.proto.dsl"), "protocol p\n op A\nend\n").unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let c = parse_corpus(dir.path(), CorpusRole::Target).unwrap();
        let names: Vec<_> = c.protocols.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["p", "q"]);
    }

    #[test]
    fn empty_directory_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        assert!(parse_corpus(dir.path(), CorpusRole::Target).unwrap().is_empty());
    }

    #[test]
    fn malformed_file_aborts_with_aggregated_diagnostics() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.proto.dsl"), "protocol p\n op A\nend\n").unwrap();
        fs::write(dir.path().join("b.proto.dsl"), "protocol q\n op B in\nend\n").unwrap();
        fs::write(dir.path().join("c.proto.dsl"), "protocol r\n op C dur 1y\nend\n").unwrap();
        match parse_corpus(dir.path(), CorpusRole::Target).unwrap_err() {
            DslError::Corpus(files) => {
                assert_eq!(files.len(), 2);
                assert!(files[0].path.ends_with("b.proto.dsl"));
                assert!(files[1].path.ends_with("c.proto.dsl"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_name_across_files() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.proto.dsl"), "protocol p\nend\n").unwrap();
        fs::write(dir.path().join("b.proto.dsl"), "protocol p\nend\n").unwrap();
        assert!(matches!(
            parse_corpus(dir.path(), CorpusRole::Target),
            Err(DslError::DuplicateProtocol(_))
        ));
    }

    #[test]
    fn writer_output_reparses() {
        let p = Protocol::new(
            "w",
            vec![
                Operation::new(0, "A").with_outputs(["r1"]).with_duration(0.25),
                Operation::new(1, "B").with_inputs(["r1", "s0"]).with_param("temp", "37C"),
            ],
        );
        assert_eq!(parse_protocol(&to_dsl(&p)).unwrap(), p);
    }
}
