//! Clause grammar.
//!
//! ```text
//! formula := body "=>" disj | disj
//! body    := lit ("^" lit)*
//! disj    := lit ("|" lit)*
//! lit     := "!"? NAME "(" term ("," term)* ")"
//! term    := "?" NAME | NAME | '"' any text without quotes '"'
//! NAME    := [A-Za-z0-9_.+-]+
//! ```
//!
//! `a ^ b => c | d` becomes the clause `!a | !b | c | d`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::{Literal, MlnError, Term};

pub(crate) fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '+' | '-')
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: &str) -> MlnError {
        MlnError::Parse {
            at: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, s: &str) -> bool {
        self.skip_ws();
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), MlnError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(&alloc::format!("expected `{s}`")))
        }
    }

    fn name(&mut self) -> Result<String, MlnError> {
        self.skip_ws();
        let start = self.pos;
        while let Some(c) = self.peek() {
            if is_ident_char(c) {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        if self.pos == start {
            return Err(self.err("expected a name"));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    fn term(&mut self) -> Result<Term, MlnError> {
        self.skip_ws();
        match self.peek() {
            Some('?') => {
                self.pos += 1;
                Ok(Term::Var(self.name()?))
            }
            Some('"') => {
                self.pos += 1;
                let start = self.pos;
                let end = self.src[start..]
                    .find('"')
                    .ok_or_else(|| self.err("unterminated string"))?;
                self.pos = start + end + 1;
                Ok(Term::Const(self.src[start..start + end].to_string()))
            }
            _ => Ok(Term::Const(self.name()?)),
        }
    }

    fn literal(&mut self) -> Result<Literal, MlnError> {
        let negated = self.eat("!");
        let predicate = self.name()?;
        self.expect("(")?;
        let mut args = alloc::vec![self.term()?];
        while self.eat(",") {
            args.push(self.term()?);
        }
        self.expect(")")?;
        Ok(Literal {
            negated,
            predicate,
            args,
        })
    }

    fn list(&mut self, sep: &str) -> Result<Vec<Literal>, MlnError> {
        let mut out = alloc::vec![self.literal()?];
        while self.eat(sep) {
            out.push(self.literal()?);
        }
        Ok(out)
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos == self.src.len()
    }
}

/// Parses a clause or an implication into clausal form.
pub fn parse_clause(src: &str) -> Result<Vec<Literal>, MlnError> {
    let mut p = Parser { src, pos: 0 };
    let mut clause = alloc::vec![p.literal()?];
    let mut conjunction = false;
    while p.eat("^") {
        clause.push(p.literal()?);
        conjunction = true;
    }
    if p.eat("=>") {
        for l in &mut clause {
            l.negated = !l.negated;
        }
        clause.extend(p.list("|")?);
    } else if conjunction {
        return Err(p.err("a conjunction must be followed by `=>`"));
    } else {
        while p.eat("|") {
            clause.push(p.literal()?);
        }
    }
    if !p.at_end() {
        return Err(p.err("unexpected trailing input"));
    }
    Ok(clause)
}

/// Parses a ground atom such as `hasShape(O,cubic)`.
pub fn parse_atom(src: &str) -> Result<(String, Vec<String>), MlnError> {
    let mut p = Parser { src, pos: 0 };
    let lit = p.literal()?;
    if !p.at_end() {
        return Err(p.err("unexpected trailing input"));
    }
    if lit.negated {
        return Err(MlnError::Parse {
            at: 0,
            message: "ground atoms cannot be negated".to_string(),
        });
    }
    let args = lit
        .args
        .into_iter()
        .map(|t| match t {
            Term::Const(c) => Ok(c),
            Term::Var(_) => Err(MlnError::Parse {
                at: 0,
                message: "ground atoms cannot contain variables".to_string(),
            }),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((lit.predicate, args))
}
