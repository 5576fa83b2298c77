//! Concrete syntax.
//!
//! ```text
//! file    := header* body
//! header  := ("input" | "output") name ("," name)* ";"
//! body    := par
//! par     := seq ("||" seq)*                  (left-associative)
//! seq     := atom (";" atom)*                 (left-associative, binds tighter)
//! atom    := "nothing"
//!          | "emit" name
//!          | "present" name "then" par "else" par "end"
//!          | "signal" name "in" par "end"
//!          | "(" par ")"
//! ```
//!
//! `--` starts a comment running to the end of the line.  Signal names start
//! with a letter or `_` and may continue with letters, digits, `_`, `$`, or
//! `'`.  Any name not declared in an `input`/`output` header is a local
//! signal.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use super::{Program, SignalEnv, SignalId, SignalKind};
use crate::error::Error;
use crate::Result;

/// Parses a source file into its program and signal environment.
///
/// Beyond grammar, this enforces the signal discipline: a name may be
/// declared at most once, may not be both input and output, inputs may not
/// be emitted, and a `signal` binder may not shadow a declared input or
/// output.
pub fn parse(source: &str) -> Result<(Program, SignalEnv)> {
    let tokens = tokenize(source)?;
    Parser {
        tokens,
        pos: 0,
        declared: BTreeMap::new(),
        locals: BTreeSet::new(),
    }
    .file()
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Name(String),
    Nothing,
    Emit,
    Present,
    Then,
    Else,
    End,
    Signal,
    In,
    Input,
    Output,
    Semi,
    Comma,
    Parallel,
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Name(n) => format!("`{n}`"),
            Tok::Nothing => "`nothing`".into(),
            Tok::Emit => "`emit`".into(),
            Tok::Present => "`present`".into(),
            Tok::Then => "`then`".into(),
            Tok::Else => "`else`".into(),
            Tok::End => "`end`".into(),
            Tok::Signal => "`signal`".into(),
            Tok::In => "`in`".into(),
            Tok::Input => "`input`".into(),
            Tok::Output => "`output`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Parallel => "`||`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    col: usize,
}

fn tokenize(source: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = source.chars().peekable();
    loop {
        let (start_line, start_col) = (line, col);
        let Some(c) = chars.next() else { break };
        col += 1;
        match c {
            '\n' => {
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {}
            ';' => out.push(Spanned {
                tok: Tok::Semi,
                line: start_line,
                col: start_col,
            }),
            ',' => out.push(Spanned {
                tok: Tok::Comma,
                line: start_line,
                col: start_col,
            }),
            '(' => out.push(Spanned {
                tok: Tok::LParen,
                line: start_line,
                col: start_col,
            }),
            ')' => out.push(Spanned {
                tok: Tok::RParen,
                line: start_line,
                col: start_col,
            }),
            '|' => {
                if chars.peek() == Some(&'|') {
                    chars.next();
                    col += 1;
                    out.push(Spanned {
                        tok: Tok::Parallel,
                        line: start_line,
                        col: start_col,
                    });
                } else {
                    return Err(Error::parse(
                        start_line,
                        start_col,
                        "lone `|` (parallel composition is written `||`)",
                    ));
                }
            }
            '-' => {
                if chars.peek() == Some(&'-') {
                    // Comment: skip to end of line.
                    for c in chars.by_ref() {
                        if c == '\n' {
                            line += 1;
                            col = 1;
                            break;
                        }
                    }
                } else {
                    return Err(Error::parse(start_line, start_col, "unexpected character `-`"));
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut word = String::from(c);
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '\'') {
                        word.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let tok = match word.as_str() {
                    "nothing" => Tok::Nothing,
                    "emit" => Tok::Emit,
                    "present" => Tok::Present,
                    "then" => Tok::Then,
                    "else" => Tok::Else,
                    "end" => Tok::End,
                    "signal" => Tok::Signal,
                    "in" => Tok::In,
                    "input" => Tok::Input,
                    "output" => Tok::Output,
                    _ => Tok::Name(word),
                };
                out.push(Spanned {
                    tok,
                    line: start_line,
                    col: start_col,
                });
            }
            other => {
                return Err(Error::parse(
                    start_line,
                    start_col,
                    format!("unexpected character `{other}`"),
                ));
            }
        }
    }
    out.push(Spanned {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    /// Signals declared in `input`/`output` headers.
    declared: BTreeMap<String, SignalKind>,
    /// Every name used with local role (undeclared uses and `signal` binders).
    locals: BTreeSet<String>,
}

impl Parser {
    fn file(mut self) -> Result<(Program, SignalEnv)> {
        while matches!(self.peek().tok, Tok::Input | Tok::Output) {
            self.header()?;
        }
        let body = self.par()?;
        let at = self.peek().clone();
        if at.tok != Tok::Eof {
            return Err(Error::parse(
                at.line,
                at.col,
                format!("expected end of input after the program, found {}", at.tok.describe()),
            ));
        }
        let inputs = self
            .declared
            .iter()
            .filter(|(_, k)| **k == SignalKind::Input)
            .map(|(n, _)| SignalId::input(n.clone()));
        let outputs = self
            .declared
            .iter()
            .filter(|(_, k)| **k == SignalKind::Output)
            .map(|(n, _)| SignalId::output(n.clone()));
        let locals = self.locals.iter().map(|n| SignalId::local(n.clone()));
        let env = SignalEnv::new(inputs, outputs, locals)?;
        Ok((body, env))
    }

    fn header(&mut self) -> Result<()> {
        let kw = self.advance();
        let kind = match kw.tok {
            Tok::Input => SignalKind::Input,
            Tok::Output => SignalKind::Output,
            _ => unreachable!("header called on a non-header keyword"),
        };
        loop {
            let (name, line, col) = self.name("a signal name")?;
            if self.declared.insert(name.clone(), kind).is_some() {
                return Err(Error::semantic(
                    line,
                    col,
                    format!("signal `{name}` is declared twice"),
                ));
            }
            match self.peek().tok {
                Tok::Comma => {
                    self.advance();
                }
                Tok::Semi => {
                    self.advance();
                    return Ok(());
                }
                _ => {
                    let at = self.peek().clone();
                    return Err(Error::parse(
                        at.line,
                        at.col,
                        format!(
                            "expected `,` or `;` in the declaration, found {}",
                            at.tok.describe()
                        ),
                    ));
                }
            }
        }
    }

    fn par(&mut self) -> Result<Program> {
        let mut left = self.seq()?;
        while self.peek().tok == Tok::Parallel {
            self.advance();
            let right = self.seq()?;
            left = Program::par(left, right);
        }
        Ok(left)
    }

    fn seq(&mut self) -> Result<Program> {
        let mut left = self.atom()?;
        while self.peek().tok == Tok::Semi {
            self.advance();
            let right = self.atom()?;
            left = Program::seq(left, right);
        }
        Ok(left)
    }

    fn atom(&mut self) -> Result<Program> {
        let at = self.peek().clone();
        match at.tok {
            Tok::Nothing => {
                self.advance();
                Ok(Program::Nil)
            }
            Tok::Emit => {
                self.advance();
                let (name, line, col) = self.name("a signal to emit")?;
                let signal = self.resolve(&name);
                if signal.kind() == SignalKind::Input {
                    return Err(Error::semantic(
                        line,
                        col,
                        format!("input signal `{name}` cannot be emitted"),
                    ));
                }
                Ok(Program::Emit(signal))
            }
            Tok::Present => {
                self.advance();
                let (name, _, _) = self.name("a condition signal")?;
                let cond = self.resolve(&name);
                self.expect(Tok::Then)?;
                let then_branch = self.par()?;
                self.expect(Tok::Else)?;
                let else_branch = self.par()?;
                self.expect(Tok::End)?;
                Ok(Program::present(cond, then_branch, else_branch))
            }
            Tok::Signal => {
                self.advance();
                let (name, line, col) = self.name("a signal to declare")?;
                if let Some(kind) = self.declared.get(&name) {
                    return Err(Error::semantic(
                        line,
                        col,
                        format!("`signal {name}` would shadow the declared {kind} signal `{name}`"),
                    ));
                }
                self.locals.insert(name.clone());
                self.expect(Tok::In)?;
                let body = self.par()?;
                self.expect(Tok::End)?;
                Ok(Program::local(SignalId::local(name), body))
            }
            Tok::LParen => {
                self.advance();
                let inner = self.par()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            other => Err(Error::parse(
                at.line,
                at.col,
                format!("expected a program, found {}", other.describe()),
            )),
        }
    }

    /// Looks a name up in the headers; anything undeclared is local.
    fn resolve(&mut self, name: &str) -> SignalId {
        match self.declared.get(name) {
            Some(SignalKind::Input) => SignalId::input(name),
            Some(SignalKind::Output) => SignalId::output(name),
            Some(SignalKind::Local) | None => {
                self.locals.insert(name.to_owned());
                SignalId::local(name)
            }
        }
    }

    fn name(&mut self, what: &str) -> Result<(String, usize, usize)> {
        let at = self.advance();
        match at.tok {
            Tok::Name(n) => Ok((n, at.line, at.col)),
            other => Err(Error::parse(
                at.line,
                at.col,
                format!("expected {what}, found {}", other.describe()),
            )),
        }
    }

    fn expect(&mut self, tok: Tok) -> Result<()> {
        let at = self.advance();
        if at.tok == tok {
            Ok(())
        } else {
            Err(Error::parse(
                at.line,
                at.col,
                format!("expected {}, found {}", tok.describe(), at.tok.describe()),
            ))
        }
    }

    fn peek(&self) -> &Spanned {
        &self.tokens[self.pos]
    }

    fn advance(&mut self) -> Spanned {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_two_present_sequence_with_headers() {
        let source = "\
-- two dependent presence tests
input i;
output o;
present i then emit s else nothing end ;
present s then nothing else emit o end
";
        let (program, env) = parse(source).unwrap();
        let i = SignalId::input("i");
        let o = SignalId::output("o");
        let s = SignalId::local("s");
        let first = Program::present(i.clone(), Program::emit(s.clone()), Program::Nil);
        let second = Program::present(s.clone(), Program::Nil, Program::emit(o.clone()));
        assert_eq!(program, Program::seq(first, second));
        assert_eq!(env.inputs().iter().collect::<Vec<_>>(), vec![&i]);
        assert_eq!(env.outputs().iter().collect::<Vec<_>>(), vec![&o]);
        assert_eq!(env.locals().iter().collect::<Vec<_>>(), vec![&s]);
    }

    #[test]
    fn sequence_and_parallel_associate_left_with_sequence_tighter() {
        let (program, _) = parse("emit a ; emit b || emit c ; emit d").unwrap();
        let e = |n: &str| Program::emit(SignalId::local(n));
        assert_eq!(
            program,
            Program::par(Program::seq(e("a"), e("b")), Program::seq(e("c"), e("d")))
        );
    }

    #[test]
    fn parentheses_override_precedence() {
        let (program, _) = parse("(emit a || emit b) ; emit c").unwrap();
        let e = |n: &str| Program::emit(SignalId::local(n));
        assert_eq!(
            program,
            Program::seq(Program::par(e("a"), e("b")), e("c"))
        );
    }

    #[test]
    fn declared_signals_keep_their_roles_even_when_unused() {
        let (_, env) = parse("input i, j; output o;\nnothing").unwrap();
        assert_eq!(env.inputs().len(), 2);
        assert_eq!(env.outputs().len(), 1);
        assert!(env.locals().is_empty());
    }

    #[test]
    fn emitting_an_input_is_a_semantic_error() {
        let err = parse("input i;\nemit i").unwrap_err();
        assert!(matches!(err, Error::Semantic { line: 2, col: 6, .. }), "{err}");
    }

    #[test]
    fn duplicate_declaration_is_rejected() {
        let err = parse("input i; output i;\nnothing").unwrap_err();
        assert!(matches!(err, Error::Semantic { .. }), "{err}");
        let err = parse("input i, i;\nnothing").unwrap_err();
        assert!(matches!(err, Error::Semantic { .. }), "{err}");
    }

    #[test]
    fn local_binder_cannot_shadow_declared_signals() {
        let err = parse("output o;\nsignal o in emit o end").unwrap_err();
        assert!(matches!(err, Error::Semantic { .. }), "{err}");
    }

    #[test]
    fn reports_position_of_grammar_errors() {
        let err = parse("present s then emit s else nothing").unwrap_err();
        match err {
            Error::Parse { line, col, msg } => {
                assert_eq!((line, col), (1, 35));
                assert!(msg.contains("`end`"), "{msg}");
            }
            other => panic!("expected a parse error, got {other}"),
        }
        let err = parse("emit s ; ; emit t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, col: 10, .. }), "{err}");
        let err = parse("").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
        let err = parse("emit s emit t").unwrap_err();
        assert!(matches!(err, Error::Parse { .. }), "{err}");
    }

    #[test]
    fn lexer_flags_stray_characters() {
        assert!(matches!(parse("emit s | emit t"), Err(Error::Parse { .. })));
        assert!(matches!(parse("emit s - emit t"), Err(Error::Parse { .. })));
        assert!(matches!(parse("emit 0"), Err(Error::Parse { .. })));
    }

    #[test]
    fn comments_extend_to_end_of_line() {
        let (program, _) = parse("emit s -- trailing commentary ; emit t\n; nothing").unwrap();
        assert_eq!(
            program,
            Program::seq(Program::emit(SignalId::local("s")), Program::Nil)
        );
    }

    #[test]
    fn names_may_use_primes_dollars_and_digits() {
        let (program, _) = parse("emit s'0 ; emit s$1").unwrap();
        assert_eq!(
            program,
            Program::seq(
                Program::emit(SignalId::local("s'0")),
                Program::emit(SignalId::local("s$1"))
            )
        );
    }
}
