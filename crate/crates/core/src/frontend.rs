//! Text formats for formulas, types, values, LTSs and Turing machines.
//!
//! Formulas and types use a parenthesized prefix syntax:
//!
//! ```text
//! F := tt | ff | (prop p X) | (act a X Y) | (app X Y1 ... Yn)
//!    | (not F) | (or F G) | (and F G) | (imp F G)
//!    | (exists ((X T) ...) F) | (forall ((X T) ...) F)
//!    | (pfp (X T) F (Y1 ... Yn))
//! T := o | (tuple T ...) | (set T)
//! ```
//!
//! LTS and machine descriptions are line based (`key: values`). In every
//! format `;` starts a comment that runs to the end of the line.

use std::fmt;

use thiserror::Error;

use crate::domains::Value;
use crate::logic::{Formula, Type};
use crate::lts::{Lts, LtsError, ORDER_ACTION};
use crate::machine::{MachineError, Move, TmBuilder, TmSpec};

/// A region of the input: byte offsets plus the 1-based line and column of `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SourceSpan {
    pub start: usize,
    pub end: usize,
    pub line: usize,
    pub col: usize,
}

impl SourceSpan {
    fn at(text: &str, start: usize, end: usize) -> SourceSpan {
        let before = &text[..start];
        let line = before.matches('\n').count() + 1;
        let col = before
            .rfind('\n')
            .map_or(before.chars().count(), |i| before[i + 1..].chars().count())
            + 1;
        SourceSpan {
            start,
            end,
            line,
            col,
        }
    }
}

impl fmt::Display for SourceSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    /// Well-formed text describing an invalid object.
    Validation,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{span}: {message}")]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub message: String,
    pub span: SourceSpan,
}

impl ParseError {
    fn syntax(message: impl Into<String>, span: SourceSpan) -> ParseError {
        ParseError {
            kind: ParseErrorKind::Syntax,
            message: message.into(),
            span,
        }
    }

    fn validation(message: impl Into<String>, span: SourceSpan) -> ParseError {
        ParseError {
            kind: ParseErrorKind::Validation,
            message: message.into(),
            span,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Delim {
    Paren,
    Brace,
}

#[derive(Debug, Clone)]
enum Sexp {
    Atom(String, SourceSpan),
    List(Delim, Vec<Sexp>, SourceSpan),
}

impl Sexp {
    fn span(&self) -> SourceSpan {
        match self {
            Sexp::Atom(_, s) | Sexp::List(_, _, s) => *s,
        }
    }
}

struct Reader<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Reader<'a> {
        Reader { text, pos: 0 }
    }

    fn span(&self, start: usize, end: usize) -> SourceSpan {
        SourceSpan::at(self.text, start, end)
    }

    fn skip_trivia(&mut self) {
        let bytes = self.text.as_bytes();
        while self.pos < bytes.len() {
            match bytes[self.pos] {
                b';' => {
                    while self.pos < bytes.len() && bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn read(&mut self) -> Result<Sexp, ParseError> {
        self.skip_trivia();
        let start = self.pos;
        let Some(c) = self.text[self.pos..].chars().next() else {
            return Err(ParseError::syntax(
                "unexpected end of input",
                self.span(start, start),
            ));
        };
        match c {
            '(' | '{' => {
                let (delim, close) = if c == '(' {
                    (Delim::Paren, ')')
                } else {
                    (Delim::Brace, '}')
                };
                self.pos += 1;
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.text[self.pos..].chars().next() {
                        None => {
                            return Err(ParseError::syntax(
                                format!("missing `{close}`"),
                                self.span(start, self.pos),
                            ))
                        }
                        Some(d) if d == close => {
                            self.pos += 1;
                            return Ok(Sexp::List(delim, items, self.span(start, self.pos)));
                        }
                        Some(d @ (')' | '}')) => {
                            return Err(ParseError::syntax(
                                format!("expected `{close}`, found `{d}`"),
                                self.span(self.pos, self.pos + 1),
                            ))
                        }
                        Some(_) => items.push(self.read()?),
                    }
                }
            }
            ')' | '}' => Err(ParseError::syntax(
                format!("unexpected `{c}`"),
                self.span(start, start + 1),
            )),
            _ => {
                let end = self.text[start..]
                    .find(|ch: char| ch.is_whitespace() || "(){};".contains(ch))
                    .map_or(self.text.len(), |i| start + i);
                self.pos = end;
                Ok(Sexp::Atom(
                    self.text[start..end].to_string(),
                    self.span(start, end),
                ))
            }
        }
    }

    /// Reads exactly one expression followed only by trivia.
    fn read_all(text: &'a str) -> Result<Sexp, ParseError> {
        let mut r = Reader::new(text);
        let e = r.read()?;
        r.skip_trivia();
        if r.pos < text.len() {
            return Err(ParseError::syntax(
                "trailing input after expression",
                r.span(r.pos, text.len()),
            ));
        }
        Ok(e)
    }
}

const KEYWORDS: &[&str] = &[
    "tt", "ff", "prop", "act", "app", "not", "or", "and", "imp", "exists", "forall", "pfp",
];

fn name(e: &Sexp, what: &str) -> Result<String, ParseError> {
    match e {
        Sexp::Atom(a, _) => Ok(a.clone()),
        other => Err(ParseError::syntax(
            format!("expected {what}, found a list"),
            other.span(),
        )),
    }
}

fn paren_list<'e>(e: &'e Sexp, what: &str) -> Result<&'e [Sexp], ParseError> {
    match e {
        Sexp::List(Delim::Paren, items, _) => Ok(items),
        other => Err(ParseError::syntax(format!("expected {what}"), other.span())),
    }
}

fn arity(
    items: &[Sexp],
    span: SourceSpan,
    head: &str,
    expected: &str,
    ok: bool,
) -> Result<(), ParseError> {
    if ok {
        Ok(())
    } else {
        Err(ParseError::syntax(
            format!(
                "`{head}` takes {expected}, got {} argument(s)",
                items.len() - 1
            ),
            span,
        ))
    }
}

fn to_type(e: &Sexp) -> Result<Type, ParseError> {
    match e {
        Sexp::Atom(a, _) if a == "o" => Ok(Type::Ground),
        Sexp::Atom(a, s) => Err(ParseError::syntax(format!("unknown type `{a}`"), *s)),
        Sexp::List(Delim::Paren, items, s) => match items.first() {
            Some(Sexp::Atom(h, _)) if h == "tuple" => {
                arity(
                    items,
                    *s,
                    "tuple",
                    "at least one component",
                    items.len() >= 2,
                )?;
                Ok(Type::Compound(
                    items[1..].iter().map(to_type).collect::<Result<_, _>>()?,
                ))
            }
            Some(Sexp::Atom(h, _)) if h == "set" => {
                arity(items, *s, "set", "one element type", items.len() == 2)?;
                Ok(Type::SetOf(Box::new(to_type(&items[1])?)))
            }
            _ => Err(ParseError::syntax(
                "expected `o`, `(tuple ...)` or `(set ...)`",
                *s,
            )),
        },
        Sexp::List(_, _, s) => Err(ParseError::syntax("expected a type", *s)),
    }
}

fn variable(e: &Sexp) -> Result<String, ParseError> {
    let v = name(e, "a variable")?;
    if KEYWORDS.contains(&v.as_str()) {
        return Err(ParseError::syntax(
            format!("`{v}` is reserved and cannot name a variable"),
            e.span(),
        ));
    }
    Ok(v)
}

fn binder(e: &Sexp) -> Result<(String, Type), ParseError> {
    let items = paren_list(e, "a binder `(X T)`")?;
    if items.len() != 2 {
        return Err(ParseError::syntax(
            "a binder has the form `(X T)`",
            e.span(),
        ));
    }
    Ok((variable(&items[0])?, to_type(&items[1])?))
}

fn to_formula(e: &Sexp) -> Result<Formula, ParseError> {
    let (items, span) = match e {
        Sexp::Atom(a, _) if a == "tt" => return Ok(Formula::True),
        Sexp::Atom(a, _) if a == "ff" => return Ok(Formula::False),
        Sexp::Atom(a, s) => {
            return Err(ParseError::syntax(
                format!("expected a formula, found `{a}`"),
                *s,
            ))
        }
        Sexp::List(Delim::Paren, items, s) => (items, *s),
        Sexp::List(_, _, s) => return Err(ParseError::syntax("expected a formula", *s)),
    };
    let Some(Sexp::Atom(head, _)) = items.first() else {
        return Err(ParseError::syntax("expected a connective", span));
    };
    let n = items.len() - 1;
    match head.as_str() {
        "prop" => {
            arity(items, span, "prop", "a proposition and a variable", n == 2)?;
            Ok(Formula::prop(
                name(&items[1], "a proposition")?,
                variable(&items[2])?,
            ))
        }
        "act" => {
            arity(items, span, "act", "an action and two variables", n == 3)?;
            Ok(Formula::act(
                name(&items[1], "an action")?,
                variable(&items[2])?,
                variable(&items[3])?,
            ))
        }
        "app" => {
            arity(
                items,
                span,
                "app",
                "a relation and at least one argument",
                n >= 2,
            )?;
            Ok(Formula::apply(
                variable(&items[1])?,
                items[2..]
                    .iter()
                    .map(variable)
                    .collect::<Result<Vec<_>, _>>()?,
            ))
        }
        "not" => {
            arity(items, span, "not", "one formula", n == 1)?;
            Ok(Formula::not(to_formula(&items[1])?))
        }
        "or" | "and" | "imp" => {
            arity(items, span, head, "two formulas", n == 2)?;
            let (f, g) = (to_formula(&items[1])?, to_formula(&items[2])?);
            Ok(match head.as_str() {
                "or" => Formula::or(f, g),
                "and" => Formula::and(f, g),
                _ => Formula::implies(f, g),
            })
        }
        "exists" | "forall" => {
            arity(items, span, head, "a binder list and a formula", n == 2)?;
            let binders = paren_list(&items[1], "a binder list `((X T) ...)`")?;
            if binders.is_empty() {
                return Err(ParseError::syntax("empty binder list", items[1].span()));
            }
            let binders = binders.iter().map(binder).collect::<Result<Vec<_>, _>>()?;
            let body = to_formula(&items[2])?;
            Ok(if head == "exists" {
                Formula::exists_many(&binders, body)
            } else {
                Formula::forall_many(&binders, body)
            })
        }
        "pfp" => {
            arity(
                items,
                span,
                "pfp",
                "a binder, a body and an argument list",
                n == 3,
            )?;
            let (x, ty) = binder(&items[1])?;
            let body = to_formula(&items[2])?;
            let args = paren_list(&items[3], "an argument list `(Y1 ... Yn)`")?;
            if args.is_empty() {
                return Err(ParseError::syntax("empty argument list", items[3].span()));
            }
            let args = args.iter().map(variable).collect::<Result<Vec<_>, _>>()?;
            Ok(Formula::pfp(x, ty, body, args))
        }
        other => Err(ParseError::syntax(
            format!("unknown connective `{other}`"),
            items[0].span(),
        )),
    }
}

pub fn parse_formula(text: &str) -> Result<Formula, ParseError> {
    to_formula(&Reader::read_all(text)?)
}

pub fn parse_type(text: &str) -> Result<Type, ParseError> {
    to_type(&Reader::read_all(text)?)
}

/// Canonical single-line text; quantifiers print one binder each.
pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    write_formula(f, &mut out);
    out
}

fn write_formula(f: &Formula, out: &mut String) {
    use std::fmt::Write;
    match f {
        Formula::True => out.push_str("tt"),
        Formula::False => out.push_str("ff"),
        Formula::Prop { prop, var } => {
            let _ = write!(out, "(prop {prop} {var})");
        }
        Formula::Act { action, from, to } => {
            let _ = write!(out, "(act {action} {from} {to})");
        }
        Formula::Apply { set, args } => {
            let _ = write!(out, "(app {set} {})", args.join(" "));
        }
        Formula::Not(g) => {
            out.push_str("(not ");
            write_formula(g, out);
            out.push(')');
        }
        Formula::Or(g, h) | Formula::And(g, h) | Formula::Implies(g, h) => {
            out.push_str(match f {
                Formula::Or(..) => "(or ",
                Formula::And(..) => "(and ",
                _ => "(imp ",
            });
            write_formula(g, out);
            out.push(' ');
            write_formula(h, out);
            out.push(')');
        }
        Formula::Exists { var, ty, body } | Formula::Forall { var, ty, body } => {
            let q = if matches!(f, Formula::Exists { .. }) {
                "exists"
            } else {
                "forall"
            };
            let _ = write!(out, "({q} (({var} {ty})) ");
            write_formula(body, out);
            out.push(')');
        }
        Formula::Pfp {
            var,
            ty,
            body,
            args,
        } => {
            let _ = write!(out, "(pfp ({var} {ty}) ");
            write_formula(body, out);
            let _ = write!(out, " ({}))", args.join(" "));
        }
    }
}

/// Parses a value literal against its type: a state name, `(v1 ... vn)` for
/// tuples and `{v1 ... vn}` for sets.
pub fn parse_value(text: &str, ty: &Type, lts: &Lts) -> Result<Value, ParseError> {
    to_value(&Reader::read_all(text)?, ty, lts)
}

fn to_value(e: &Sexp, ty: &Type, lts: &Lts) -> Result<Value, ParseError> {
    match (ty, e) {
        (Type::Ground, Sexp::Atom(a, s)) => lts
            .state_index(a)
            .map(Value::State)
            .ok_or_else(|| ParseError::validation(format!("unknown state `{a}`"), *s)),
        (Type::Compound(ts), Sexp::List(Delim::Paren, items, s)) => {
            if items.len() != ts.len() {
                return Err(ParseError::syntax(
                    format!("expected a {}-tuple", ts.len()),
                    *s,
                ));
            }
            Ok(Value::Tuple(
                items
                    .iter()
                    .zip(ts)
                    .map(|(i, t)| to_value(i, t, lts))
                    .collect::<Result<_, _>>()?,
            ))
        }
        (Type::SetOf(t), Sexp::List(Delim::Brace, items, _)) => Ok(Value::set(
            items
                .iter()
                .map(|i| to_value(i, t, lts))
                .collect::<Result<_, _>>()?,
        )),
        (t, other) => Err(ParseError::syntax(
            format!("expected a value of type {t}"),
            other.span(),
        )),
    }
}

/// Prints a value with state names taken from `lts`.
pub fn print_value(v: &Value, lts: &Lts) -> String {
    let join = |items: &[Value]| {
        items
            .iter()
            .map(|i| print_value(i, lts))
            .collect::<Vec<_>>()
            .join(" ")
    };
    match v {
        Value::State(i) => lts
            .states()
            .get(*i)
            .cloned()
            .unwrap_or_else(|| format!("#{i}")),
        Value::Tuple(items) => format!("({})", join(items)),
        Value::Set(items) => format!("{{{}}}", join(items)),
    }
}

/// A non-empty line split into `key:` and whitespace-separated words with spans.
struct Line<'a> {
    key: &'a str,
    key_span: SourceSpan,
    words: Vec<(&'a str, SourceSpan)>,
    span: SourceSpan,
}

fn lines(text: &str) -> impl Iterator<Item = Line<'_>> {
    let mut offset = 0;
    text.split_inclusive('\n').filter_map(move |raw| {
        let start = offset;
        offset += raw.len();
        let content = raw.split(';').next().unwrap_or("");
        let mut words = Vec::new();
        let mut pos = 0;
        for w in content.split_whitespace() {
            let at = content[pos..].find(w).expect("word of content") + pos;
            pos = at + w.len();
            words.push((w, SourceSpan::at(text, start + at, start + pos)));
        }
        let (first, first_span) = *words.first()?;
        let span = SourceSpan::at(text, first_span.start, words.last()?.1.end);
        let (key, rest) = match first.find(':') {
            Some(i) => {
                let key = &first[..i];
                let tail = &first[i + 1..];
                let mut rest: Vec<_> = words[1..].to_vec();
                if !tail.is_empty() {
                    let tail_start = first_span.start + i + 1;
                    rest.insert(0, (tail, SourceSpan::at(text, tail_start, first_span.end)));
                }
                (key, rest)
            }
            None => (first, words[1..].to_vec()),
        };
        let key_span = first_span;
        Some(Line {
            key,
            key_span,
            words: rest,
            span,
        })
    })
}

fn expect_words(line: &Line<'_>, n: usize, form: &str) -> Result<(), ParseError> {
    if line.words.len() == n {
        Ok(())
    } else {
        Err(ParseError::syntax(format!("expected `{form}`"), line.span))
    }
}

/// Parses the line format
///
/// ```text
/// states: s0 s1 s2
/// actions: < a
/// props: p
/// ordered            ; adds s_i < s_j for i < j
/// edge: s0 a s1
/// label: s2 p
/// ```
///
/// Names must be declared before use. When `ordered` is present or `<` has
/// edges, `<` must be a strict total order.
pub fn parse_lts(text: &str) -> Result<Lts, ParseError> {
    let mut lts: Option<Lts> = None;
    let mut ordered = false;
    let mut order_span = None;
    let whole = SourceSpan::at(text, 0, text.len());
    let lts_err = |e: LtsError, span: SourceSpan| ParseError::syntax(e.to_string(), span);
    for line in lines(text) {
        if line.key != "states" && line.key != "ordered" && lts.is_none() {
            return Err(ParseError::syntax(
                "`states:` must come first",
                line.key_span,
            ));
        }
        match line.key {
            "states" => {
                if lts.is_some() {
                    return Err(ParseError::syntax("states declared twice", line.key_span));
                }
                if line.words.is_empty() {
                    return Err(ParseError::syntax(
                        "an LTS needs at least one state",
                        line.span,
                    ));
                }
                lts = Some(
                    Lts::new(line.words.iter().map(|(w, _)| *w))
                        .map_err(|e| lts_err(e, line.span))?,
                );
            }
            "actions" | "props" => {
                let t = lts.as_mut().expect("checked");
                for (w, s) in &line.words {
                    let r = if line.key == "actions" {
                        t.add_action(*w)
                    } else {
                        t.add_prop(*w)
                    };
                    r.map_err(|e| lts_err(e, *s))?;
                }
            }
            "edge" => {
                expect_words(&line, 3, "edge: from action to")?;
                let t = lts.as_mut().expect("checked");
                let [(f, fs), (a, as_), (to, ts)] = [line.words[0], line.words[1], line.words[2]];
                let span_of = |e: &LtsError| match e {
                    LtsError::UnknownAction(_) => as_,
                    LtsError::UnknownState(s) if s == f => fs,
                    _ => ts,
                };
                if *a == *ORDER_ACTION {
                    order_span.get_or_insert(line.span);
                }
                t.add_edge(f, a, to).map_err(|e| {
                    let s = span_of(&e);
                    lts_err(e, s)
                })?;
            }
            "label" => {
                expect_words(&line, 2, "label: state prop")?;
                let t = lts.as_mut().expect("checked");
                let [(st, ss), (p, ps)] = [line.words[0], line.words[1]];
                t.add_label(st, p).map_err(|e| {
                    let s = if matches!(e, LtsError::UnknownProp(_)) {
                        ps
                    } else {
                        ss
                    };
                    lts_err(e, s)
                })?;
            }
            "ordered" => {
                if !line.words.is_empty() {
                    return Err(ParseError::syntax(
                        "`ordered` takes no arguments",
                        line.span,
                    ));
                }
                ordered = true;
                order_span = Some(line.span);
            }
            other => {
                return Err(ParseError::syntax(
                    format!("unknown directive `{other}`"),
                    line.key_span,
                ))
            }
        }
    }
    let mut lts = lts.ok_or_else(|| ParseError::syntax("missing `states:`", whole))?;
    if ordered {
        lts.order_by_declaration();
    }
    if let Some(span) = order_span {
        if !lts.is_totally_ordered() {
            return Err(ParseError::validation(
                "`<` is not a strict total order on the states",
                span,
            ));
        }
    }
    Ok(lts)
}

/// Canonical text of an LTS; `<` edges are listed explicitly.
pub fn print_lts(t: &Lts) -> String {
    let mut out = format!("states: {}\n", t.states().join(" "));
    if !t.actions().is_empty() {
        out += &format!("actions: {}\n", t.actions().join(" "));
    }
    if !t.props().is_empty() {
        out += &format!("props: {}\n", t.props().join(" "));
    }
    for (from, a, to) in t.edges() {
        out += &format!(
            "edge: {} {} {}\n",
            t.states()[from],
            t.actions()[a],
            t.states()[to]
        );
    }
    for (p, name) in t.props().iter().enumerate() {
        for (s, state) in t.states().iter().enumerate() {
            if t.has_label(p, s) {
                out += &format!("label: {state} {name}\n");
            }
        }
    }
    out
}

fn single<'a>(line: &Line<'a>, form: &str) -> Result<(&'a str, SourceSpan), ParseError> {
    expect_words(line, 1, form)?;
    Ok(line.words[0])
}

fn symbol(word: &str, span: SourceSpan) -> Result<char, ParseError> {
    let mut chars = word.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => Ok(c),
        _ => Err(ParseError::syntax(
            format!("tape symbols are single characters, found `{word}`"),
            span,
        )),
    }
}

fn direction(word: &str, span: SourceSpan) -> Result<Move, ParseError> {
    match word {
        "L" => Ok(Move::L),
        "N" => Ok(Move::N),
        "R" => Ok(Move::R),
        _ => Err(ParseError::syntax(
            format!("expected a move L, N or R, found `{word}`"),
            span,
        )),
    }
}

/// Parses the machine format
///
/// ```text
/// states: q0 qa qr
/// input: 0 1
/// tape: 0 1 _
/// blank: _
/// init: q0
/// accept: qa
/// reject: qr
/// delta: q0 1 -> qa 1 N
/// ```
///
/// with one `delta:` line per non-halting `(q, γ)`. Halting states get
/// self-loops; any other missing entry is an error naming the pair.
pub fn parse_tm(text: &str) -> Result<TmSpec, ParseError> {
    #[derive(Default)]
    struct Header<'a> {
        states: Option<(Vec<&'a str>, SourceSpan)>,
        input: Option<(Vec<char>, SourceSpan)>,
        tape: Option<(Vec<char>, SourceSpan)>,
        blank: Option<(char, SourceSpan)>,
        init: Option<(&'a str, SourceSpan)>,
        accept: Option<(&'a str, SourceSpan)>,
        reject: Option<(&'a str, SourceSpan)>,
    }
    let mut h = Header::default();
    let mut rules = Vec::new();
    let whole = SourceSpan::at(text, 0, text.len());
    let dup = |key: &str, span| ParseError::syntax(format!("`{key}:` given twice"), span);
    for line in lines(text) {
        let symbols = |line: &Line<'_>| {
            line.words
                .iter()
                .map(|(w, s)| symbol(w, *s))
                .collect::<Result<Vec<_>, _>>()
        };
        match line.key {
            "states" => {
                if h.states.is_some() {
                    return Err(dup("states", line.key_span));
                }
                h.states = Some((line.words.iter().map(|(w, _)| *w).collect(), line.span));
            }
            "input" | "tape" => {
                let slot = if line.key == "input" {
                    &mut h.input
                } else {
                    &mut h.tape
                };
                if slot.is_some() {
                    return Err(dup(line.key, line.key_span));
                }
                *slot = Some((symbols(&line)?, line.span));
            }
            "blank" => {
                if h.blank.is_some() {
                    return Err(dup("blank", line.key_span));
                }
                let (w, s) = single(&line, "blank: symbol")?;
                h.blank = Some((symbol(w, s)?, line.span));
            }
            "init" | "accept" | "reject" => {
                let slot = match line.key {
                    "init" => &mut h.init,
                    "accept" => &mut h.accept,
                    _ => &mut h.reject,
                };
                if slot.is_some() {
                    return Err(dup(line.key, line.key_span));
                }
                *slot = Some(single(&line, &format!("{}: state", line.key))?);
            }
            "delta" => {
                expect_words(&line, 6, "delta: q γ -> q' γ' D")?;
                let w = &line.words;
                if w[2].0 != "->" {
                    return Err(ParseError::syntax("expected `->`", w[2].1));
                }
                rules.push((
                    w[0],
                    (symbol(w[1].0, w[1].1)?, w[1].1),
                    w[3],
                    (symbol(w[4].0, w[4].1)?, w[4].1),
                    direction(w[5].0, w[5].1)?,
                    line.span,
                ));
            }
            other => {
                return Err(ParseError::syntax(
                    format!("unknown directive `{other}`"),
                    line.key_span,
                ))
            }
        }
    }
    let missing = |key: &str| ParseError::syntax(format!("missing `{key}:`"), whole);
    let (states, states_span) = h.states.ok_or_else(|| missing("states"))?;
    let (input, input_span) = h.input.ok_or_else(|| missing("input"))?;
    let (tape, tape_span) = h.tape.ok_or_else(|| missing("tape"))?;
    let (blank, blank_span) = h.blank.ok_or_else(|| missing("blank"))?;
    let (init, _) = h.init.ok_or_else(|| missing("init"))?;
    let (accept, accept_span) = h.accept.ok_or_else(|| missing("accept"))?;
    let (reject, _) = h.reject.ok_or_else(|| missing("reject"))?;
    for (q, s) in [h.init, Some((accept, accept_span)), h.reject]
        .into_iter()
        .flatten()
    {
        if !states.contains(&q) {
            return Err(ParseError::validation(format!("unknown state `{q}`"), s));
        }
    }
    let mut b = TmBuilder::new(
        states.iter().copied(),
        &input.iter().collect::<String>(),
        &tape.iter().collect::<String>(),
        blank,
    )
    .init(init)
    .accept(accept)
    .reject(reject);
    let mut seen = std::collections::HashMap::new();
    for ((q, qs), (g, gs), (q2, q2s), (g2, g2s), dir, span) in rules {
        for (name, s) in [(q, qs), (q2, q2s)] {
            if !states.contains(&name) {
                return Err(ParseError::validation(format!("unknown state `{name}`"), s));
            }
        }
        for (c, s) in [(g, gs), (g2, g2s)] {
            if !tape.contains(&c) {
                return Err(ParseError::validation(
                    format!("symbol `{c}` is not in the tape alphabet"),
                    s,
                ));
            }
        }
        if seen.insert((q, g), span).is_some() {
            return Err(ParseError::validation(
                format!("duplicate transition for ({q}, {g})"),
                span,
            ));
        }
        b.add_rule(q, g, q2, g2, dir);
    }
    b.build().map_err(|e| {
        let span = match &e {
            MachineError::Blank(_) => blank_span,
            MachineError::InputNotOnTape(_) => input_span,
            MachineError::Duplicate {
                kind: "tape symbol",
                ..
            } => tape_span,
            MachineError::HaltingStatesEqual => accept_span,
            _ => states_span,
        };
        ParseError::validation(e.to_string(), span)
    })
}

/// Canonical text of a machine, listing every entry of `δ` including the
/// halting self-loops.
pub fn print_tm(m: &TmSpec) -> String {
    let spaced = |cs: &[char]| cs.iter().map(char::to_string).collect::<Vec<_>>().join(" ");
    let mut out = format!(
        "states: {}\ninput: {}\ntape: {}\nblank: {}\ninit: {}\naccept: {}\nreject: {}\n",
        m.states().join(" "),
        spaced(m.input_alphabet()),
        spaced(m.tape_alphabet()),
        m.blank_char(),
        m.states()[m.init()],
        m.states()[m.accept()],
        m.states()[m.reject()],
    );
    for ((q, g), a) in m.transitions() {
        out += &format!(
            "delta: {} {} -> {} {} {}\n",
            m.states()[q],
            m.tape_alphabet()[g],
            m.states()[a.state],
            m.tape_alphabet()[a.symbol],
            a.dir
        );
    }
    out
}
