//! Concrete syntax for $FLTL.
//!
//! ```text
//! f := "true" | "false" | "$" | IDENT | "~" f | "(" f ")"
//!    | f "&" f | f "|" f | f "->" f | "X" f | f "U" f | "G" f
//!    | "X^" INT f | "F<=" INT f | "A<=" INT f
//! ```
//!
//! Unary operators bind tightest, then `U` (right associative), `&`, `|` and
//! finally `->` (right associative). The parser returns the negation normal
//! form of the input with all sugar expanded.

use crate::error::{Error, Result};
use crate::formula::{Formula, PropositionTable};

/// Default bound on syntactic nesting.
pub const DEFAULT_MAX_DEPTH: usize = 10_000;

#[derive(Debug, Clone, Copy)]
pub struct ParseOptions {
    pub max_depth: usize,
    /// Append unknown identifiers to the table instead of failing.
    pub extend_table: bool,
}

impl Default for ParseOptions {
    fn default() -> Self {
        ParseOptions {
            max_depth: DEFAULT_MAX_DEPTH,
            extend_table: true,
        }
    }
}

/// Parses `text`, interning new proposition names into `table`.
pub fn parse(text: &str, table: &mut PropositionTable) -> Result<Formula> {
    parse_with(text, table, ParseOptions::default())
}

/// Parses `text` against a fixed table; unknown names are an error.
pub fn parse_closed(text: &str, table: &PropositionTable) -> Result<Formula> {
    let mut t = table.clone();
    parse_with(
        text,
        &mut t,
        ParseOptions {
            extend_table: false,
            ..ParseOptions::default()
        },
    )
}

pub fn parse_with(text: &str, table: &mut PropositionTable, opts: ParseOptions) -> Result<Formula> {
    let tokens = lex(text)?;
    // Nesting is bounded by the token count; long inputs get a worker thread
    // with a stack large enough for `max_depth` levels.
    if tokens.len() > INLINE_TOKENS {
        let levels = tokens.len().min(opts.max_depth);
        let stack = (1 << 20) + levels * STACK_PER_LEVEL;
        return std::thread::scope(|scope| {
            std::thread::Builder::new()
                .stack_size(stack)
                .spawn_scoped(scope, || parse_tokens(text, tokens, table, opts))
                .map_err(|e| Error::Io(e.to_string()))?
                .join()
                .unwrap_or_else(|panic| std::panic::resume_unwind(panic))
        });
    }
    parse_tokens(text, tokens, table, opts)
}

const INLINE_TOKENS: usize = 256;
const STACK_PER_LEVEL: usize = 16 << 10;

fn parse_tokens(
    text: &str,
    tokens: Vec<(Token, usize)>,
    table: &mut PropositionTable,
    opts: ParseOptions,
) -> Result<Formula> {
    let mut p = Parser {
        tokens,
        pos: 0,
        depth: 0,
        opts,
        table,
        end: text.len(),
    };
    let expr = p.implication()?;
    if let Some((tok, off)) = p.tokens.get(p.pos) {
        return Err(Error::Syntax {
            offset: *off,
            message: format!("unexpected {tok:?}"),
        });
    }
    to_nnf(&expr, false)
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    True,
    False,
    Dollar,
    Ident(String),
    Not,
    LParen,
    RParen,
    And,
    Or,
    Implies,
    Next,
    NextPow(usize),
    Within(usize),
    AllWithin(usize),
    Always,
    Until,
}

fn lex(text: &str) -> Result<Vec<(Token, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let syntax = |offset: usize, message: &str| Error::Syntax {
        offset,
        message: message.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i];
        let start = i;
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'$' => {
                out.push((Token::Dollar, start));
                i += 1;
            }
            b'~' => {
                out.push((Token::Not, start));
                i += 1;
            }
            b'(' => {
                out.push((Token::LParen, start));
                i += 1;
            }
            b')' => {
                out.push((Token::RParen, start));
                i += 1;
            }
            b'&' => {
                out.push((Token::And, start));
                i += 1;
            }
            b'|' => {
                out.push((Token::Or, start));
                i += 1;
            }
            b'-' if bytes.get(i + 1) == Some(&b'>') => {
                out.push((Token::Implies, start));
                i += 2;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                let word = &text[start..i];
                let bounded = |i: &mut usize, prefix: &[u8]| -> Result<Option<usize>> {
                    if !bytes[*i..].starts_with(prefix) {
                        return Ok(None);
                    }
                    *i += prefix.len();
                    let digits = *i;
                    while *i < bytes.len() && bytes[*i].is_ascii_digit() {
                        *i += 1;
                    }
                    text[digits..*i]
                        .parse::<usize>()
                        .map(Some)
                        .map_err(|_| syntax(digits, "expected an integer bound"))
                };
                let tok = match word {
                    "true" => Token::True,
                    "false" => Token::False,
                    "G" => Token::Always,
                    "U" => Token::Until,
                    "X" => match bounded(&mut i, b"^")? {
                        Some(k) => Token::NextPow(k),
                        None => Token::Next,
                    },
                    "F" => match bounded(&mut i, b"<=")? {
                        Some(k) => Token::Within(k),
                        None => Token::Ident(word.to_string()),
                    },
                    "A" => match bounded(&mut i, b"<=")? {
                        Some(k) => Token::AllWithin(k),
                        None => Token::Ident(word.to_string()),
                    },
                    _ => Token::Ident(word.to_string()),
                };
                out.push((tok, start));
            }
            _ => return Err(syntax(start, &format!("unexpected character `{}`", c as char))),
        }
    }
    Ok(out)
}

/// Surface syntax tree, before negation is pushed to the atoms.
#[derive(Debug)]
enum Expr {
    Lit(Formula),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Implies(Box<Expr>, Box<Expr>),
    Next(usize, Box<Expr>),
    Within(usize, Box<Expr>),
    AllWithin(usize, Box<Expr>),
    Always(Box<Expr>),
    Until(Box<Expr>, Box<Expr>),
}

struct Parser<'t> {
    tokens: Vec<(Token, usize)>,
    pos: usize,
    depth: usize,
    opts: ParseOptions,
    table: &'t mut PropositionTable,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(t, _)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(_, o)| *o)
    }

    fn eat(&mut self, tok: &Token) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn enter(&mut self) -> Result<()> {
        self.depth += 1;
        if self.depth > self.opts.max_depth {
            return Err(Error::Syntax {
                offset: self.offset(),
                message: format!("nesting deeper than {}", self.opts.max_depth),
            });
        }
        Ok(())
    }

    fn implication(&mut self) -> Result<Expr> {
        self.enter()?;
        let lhs = self.disjunction()?;
        let e = if self.eat(&Token::Implies) {
            Expr::Implies(Box::new(lhs), Box::new(self.implication()?))
        } else {
            lhs
        };
        self.depth -= 1;
        Ok(e)
    }

    fn disjunction(&mut self) -> Result<Expr> {
        let mut ops = vec![self.conjunction()?];
        while self.eat(&Token::Or) {
            ops.push(self.conjunction()?);
        }
        Ok(if ops.len() == 1 { ops.pop().unwrap() } else { Expr::Or(ops) })
    }

    fn conjunction(&mut self) -> Result<Expr> {
        let mut ops = vec![self.until()?];
        while self.eat(&Token::And) {
            ops.push(self.until()?);
        }
        Ok(if ops.len() == 1 { ops.pop().unwrap() } else { Expr::And(ops) })
    }

    fn until(&mut self) -> Result<Expr> {
        let lhs = self.unary()?;
        if self.eat(&Token::Until) {
            self.enter()?;
            let rhs = self.until()?;
            self.depth -= 1;
            Ok(Expr::Until(Box::new(lhs), Box::new(rhs)))
        } else {
            Ok(lhs)
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        let tok = match self.peek() {
            Some(
                t @ (Token::Not
                | Token::Next
                | Token::Always
                | Token::NextPow(_)
                | Token::Within(_)
                | Token::AllWithin(_)),
            ) => t.clone(),
            _ => return self.primary(),
        };
        self.pos += 1;
        self.enter()?;
        let inner = Box::new(self.unary()?);
        self.depth -= 1;
        Ok(match tok {
            Token::Not => Expr::Not(inner),
            Token::Next => Expr::Next(1, inner),
            Token::Always => Expr::Always(inner),
            Token::NextPow(k) => Expr::Next(k, inner),
            Token::Within(k) => Expr::Within(k, inner),
            Token::AllWithin(k) => Expr::AllWithin(k, inner),
            _ => unreachable!("filtered above"),
        })
    }

    fn primary(&mut self) -> Result<Expr> {
        let offset = self.offset();
        let Some((tok, _)) = self.tokens.get(self.pos).cloned() else {
            return Err(Error::Syntax {
                offset,
                message: "unexpected end of input".into(),
            });
        };
        self.pos += 1;
        Ok(match tok {
            Token::True => Expr::Lit(Formula::True),
            Token::False => Expr::Lit(Formula::False),
            Token::Dollar => Expr::Lit(Formula::Dollar),
            Token::Ident(name) => {
                let id = match self.table.id(&name) {
                    Some(id) => id,
                    None if self.opts.extend_table => self.table.intern(&name),
                    None => return Err(Error::UnknownProposition(name)),
                };
                Expr::Lit(Formula::Atom(id))
            }
            Token::LParen => {
                let e = self.implication()?;
                if !self.eat(&Token::RParen) {
                    return Err(Error::Syntax {
                        offset: self.offset(),
                        message: "expected `)`".into(),
                    });
                }
                e
            }
            other => {
                return Err(Error::Syntax {
                    offset,
                    message: format!("unexpected {other:?}"),
                })
            }
        })
    }
}

/// Expands sugar and pushes negation inward. `negated` is the polarity of
/// the current subterm.
fn to_nnf(e: &Expr, negated: bool) -> Result<Formula> {
    let all = |ops: &[Expr], neg: bool| ops.iter().map(|o| to_nnf(o, neg)).collect::<Result<Vec<_>>>();
    Ok(match e {
        Expr::Lit(f) if negated => f.negate()?,
        Expr::Lit(f) => f.clone(),
        Expr::Not(inner) => to_nnf(inner, !negated)?,
        Expr::And(ops) if negated => Formula::Or(all(ops, true)?),
        Expr::And(ops) => Formula::And(all(ops, false)?),
        Expr::Or(ops) if negated => Formula::And(all(ops, true)?),
        Expr::Or(ops) => Formula::Or(all(ops, false)?),
        Expr::Implies(a, b) if negated => Formula::And(vec![to_nnf(a, false)?, to_nnf(b, true)?]),
        Expr::Implies(a, b) => Formula::Or(vec![to_nnf(a, true)?, to_nnf(b, false)?]),
        Expr::Next(0, inner) => to_nnf(inner, negated)?,
        Expr::Next(_, _) | Expr::Within(1.., _) | Expr::AllWithin(1.., _) if negated => {
            return Err(Error::Nnf { construct: "X" })
        }
        Expr::Always(_) | Expr::Until(..) if negated => return Err(Error::Nnf { construct: "U" }),
        Expr::Next(k, inner) => Formula::next_n(*k, to_nnf(inner, false)?),
        Expr::Within(k, inner) => {
            let f = to_nnf(inner, false)?;
            let ops = (1..=*k).map(|i| Formula::next_n(i, f.clone())).collect();
            // F<=0 is the empty disjunction.
            if negated { Formula::True } else { Formula::or(ops) }
        }
        Expr::AllWithin(k, inner) => {
            let f = to_nnf(inner, false)?;
            let ops = (1..=*k).map(|i| Formula::next_n(i, f.clone())).collect();
            if negated { Formula::False } else { Formula::and(ops) }
        }
        Expr::Always(inner) => Formula::always(to_nnf(inner, false)?),
        Expr::Until(a, b) => Formula::until(to_nnf(a, false)?, to_nnf(b, false)?),
    })
}
