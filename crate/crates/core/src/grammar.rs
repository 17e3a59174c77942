//! Parser for the specification language.
//!
//! ```text
//! system   := equation+
//! equation := IDENT '=' expr
//! expr     := term ('+' term)*
//! term     := factor ('*' factor)*
//! factor   := IDENT | 'atom' '(' [IDENT ':' INT (',' IDENT ':' INT)*] ')'
//!           | 'Seq' '(' expr ')' | '(' expr ')'
//! ```
//!
//! A name defined by some equation is a class reference. Any other single
//! lowercase letter is an implicit atom of size one in the variable of the
//! same name. `atom` and `Seq` are keywords matched case-insensitively.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::system::ClassSystem;

/// Where an equation came from.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Origin {
    pub file: Option<String>,
    pub line: u32,
}

/// One equation of a specification, e.g. `B = z + (z * B * B)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquationSource {
    pub text: String,
    pub origin: Origin,
}

impl EquationSource {
    pub fn new(text: impl Into<String>, line: u32) -> Self {
        EquationSource { text: text.into(), origin: Origin { file: None, line } }
    }
}

/// Splits a spec file into equations: one per line, `#` comments and blank
/// lines dropped.
pub fn spec_file_sources(text: &str, file: Option<&str>) -> Vec<EquationSource> {
    text.lines()
        .enumerate()
        .filter_map(|(i, line)| {
            let code = line.split('#').next().unwrap_or("");
            if code.trim().is_empty() {
                return None;
            }
            Some(EquationSource {
                text: code.to_string(),
                origin: Origin { file: file.map(ToString::to_string), line: i as u32 + 1 },
            })
        })
        .collect()
}

/// Parses a whole spec text (file format) into a class system.
pub fn parse_str(text: &str) -> Result<ClassSystem, ParseError> {
    parse(&spec_file_sources(text, None))
}

/// Line/column of a diagnostic, 1-based.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Position {
    pub file: Option<String>,
    pub line: u32,
    pub column: u32,
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.file {
            Some(file) => write!(f, "{file}:{}:{}", self.line, self.column),
            None => write!(f, "{}:{}", self.line, self.column),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("{at}: syntax error: {message}")]
    Syntax { at: Position, message: String },
    #[error("{at}: empty alternative")]
    EmptyAlternative { at: Position },
    #[error("{at}: class `{name}` is already defined at {first}")]
    DuplicateDefinition { name: String, at: Position, first: Position },
    #[error("{at}: `{name}` is a reserved word and cannot name a class")]
    ReservedName { name: String, at: Position },
    #[error("specification contains no equations")]
    NoEquations,
}

impl ParseError {
    pub fn position(&self) -> Option<&Position> {
        match self {
            ParseError::Syntax { at, .. }
            | ParseError::EmptyAlternative { at }
            | ParseError::DuplicateDefinition { at, .. }
            | ParseError::ReservedName { at, .. } => Some(at),
            ParseError::NoEquations => None,
        }
    }
}

/// An atom: a single object of fixed multivariate size.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomDecl {
    /// Name handed to builders: the variable for implicit atoms, the class
    /// name for `c = atom(..)`, otherwise the declaration text.
    pub key: String,
    pub size: BTreeMap<String, u64>,
    pub implicit: bool,
}

/// Abstract specification tree of one equation body.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpecNode {
    Atom(AtomDecl),
    ClassRef(String),
    Union(Vec<SpecNode>),
    Product(Vec<SpecNode>),
    Seq(Box<SpecNode>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub name: String,
    pub body: SpecNode,
    pub origin: Origin,
}

fn is_reserved(name: &str) -> bool {
    name.eq_ignore_ascii_case("atom") || name.eq_ignore_ascii_case("seq")
}

fn atom_text(size: &BTreeMap<String, u64>) -> String {
    let parts: Vec<String> = size.iter().map(|(v, n)| alloc::format!("{v}: {n}")).collect();
    alloc::format!("atom({})", parts.join(", "))
}

/// Parses equations into a class system. Identifier resolution happens after
/// all equations are read, so classes may be used before their definition.
pub fn parse(sources: &[EquationSource]) -> Result<ClassSystem, ParseError> {
    let mut raw = Vec::with_capacity(sources.len());
    for src in sources {
        raw.push(Parser::new(src).equation()?);
    }
    if raw.is_empty() {
        return Err(ParseError::NoEquations);
    }
    let mut defined: BTreeMap<String, Position> = BTreeMap::new();
    for eq in &raw {
        if is_reserved(&eq.name) {
            return Err(ParseError::ReservedName { name: eq.name.clone(), at: eq.name_at.clone() });
        }
        if let Some(first) = defined.get(&eq.name) {
            return Err(ParseError::DuplicateDefinition {
                name: eq.name.clone(),
                at: eq.name_at.clone(),
                first: first.clone(),
            });
        }
        defined.insert(eq.name.clone(), eq.name_at.clone());
    }
    let equations = raw
        .into_iter()
        .map(|eq| {
            let body = match eq.body {
                // `c = atom(z: 1)` names the atom after its class.
                Raw::Atom(size) => SpecNode::Atom(AtomDecl { key: eq.name.clone(), size, implicit: false }),
                other => resolve(other, &defined),
            };
            Equation { name: eq.name, body, origin: eq.origin }
        })
        .collect();
    Ok(ClassSystem::from_equations(equations))
}

fn resolve(raw: Raw, defined: &BTreeMap<String, Position>) -> SpecNode {
    match raw {
        Raw::Ident(name) => {
            let implicit_atom = !defined.contains_key(&name)
                && name.len() == 1
                && name.as_bytes()[0].is_ascii_lowercase();
            if implicit_atom {
                let mut size = BTreeMap::new();
                size.insert(name.clone(), 1);
                SpecNode::Atom(AtomDecl { key: name, size, implicit: true })
            } else {
                SpecNode::ClassRef(name)
            }
        }
        Raw::Atom(size) => SpecNode::Atom(AtomDecl { key: atom_text(&size), size, implicit: false }),
        Raw::Union(children) => SpecNode::Union(children.into_iter().map(|c| resolve(c, defined)).collect()),
        Raw::Product(children) => SpecNode::Product(children.into_iter().map(|c| resolve(c, defined)).collect()),
        Raw::Seq(child) => SpecNode::Seq(Box::new(resolve(*child, defined))),
    }
}

enum Raw {
    Ident(String),
    Atom(BTreeMap<String, u64>),
    Union(Vec<Raw>),
    Product(Vec<Raw>),
    Seq(Box<Raw>),
}

struct RawEquation {
    name: String,
    name_at: Position,
    body: Raw,
    origin: Origin,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Eq,
    Plus,
    Star,
    LParen,
    RParen,
    Comma,
    Colon,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "identifier `{s}`"),
            Tok::Int(n) => write!(f, "number `{n}`"),
            Tok::Eq => f.write_str("`=`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Star => f.write_str("`*`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::End => f.write_str("end of equation"),
        }
    }
}

struct Parser<'a> {
    src: &'a EquationSource,
    toks: Vec<(Tok, u32)>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(src: &'a EquationSource) -> Self {
        Parser { src, toks: Vec::new(), pos: 0 }
    }

    fn at(&self, column: u32) -> Position {
        Position { file: self.src.origin.file.clone(), line: self.src.origin.line, column }
    }

    fn syntax(&self, column: u32, message: impl Into<String>) -> ParseError {
        ParseError::Syntax { at: self.at(column), message: message.into() }
    }

    fn lex(&mut self) -> Result<(), ParseError> {
        let text = self.src.text.as_str();
        let bytes = text.as_bytes();
        let mut i = 0;
        let mut col = 1u32;
        while i < bytes.len() {
            let c = bytes[i];
            let start = col;
            if !c.is_ascii() {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(self.syntax(start, alloc::format!("non-ASCII character `{ch}`")));
            }
            match c {
                b'#' => break,
                b' ' | b'\t' | b'\r' | b'\n' => {
                    i += 1;
                    col += 1;
                    continue;
                }
                b'=' => self.toks.push((Tok::Eq, start)),
                b'+' => self.toks.push((Tok::Plus, start)),
                b'*' => self.toks.push((Tok::Star, start)),
                b'(' => self.toks.push((Tok::LParen, start)),
                b')' => self.toks.push((Tok::RParen, start)),
                b',' => self.toks.push((Tok::Comma, start)),
                b':' => self.toks.push((Tok::Colon, start)),
                b'0'..=b'9' => {
                    let j = i + bytes[i..].iter().take_while(|b| b.is_ascii_digit()).count();
                    let n = text[i..j].parse::<u64>().map_err(|_| self.syntax(start, "number too large"))?;
                    self.toks.push((Tok::Int(n), start));
                    col += (j - i) as u32;
                    i = j;
                    continue;
                }
                c if c.is_ascii_alphabetic() => {
                    let j = i + bytes[i..]
                        .iter()
                        .take_while(|b| b.is_ascii_alphanumeric() || **b == b'_')
                        .count();
                    self.toks.push((Tok::Ident(text[i..j].to_string()), start));
                    col += (j - i) as u32;
                    i = j;
                    continue;
                }
                other => {
                    return Err(self.syntax(start, alloc::format!("unexpected character `{}`", other as char)));
                }
            }
            i += 1;
            col += 1;
        }
        self.toks.push((Tok::End, col));
        Ok(())
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn column(&self) -> u32 {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, u32) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<u32, ParseError> {
        let (tok, col) = self.bump();
        if tok == want {
            Ok(col)
        } else {
            Err(self.syntax(col, alloc::format!("expected {want}, found {tok}")))
        }
    }

    fn equation(mut self) -> Result<RawEquation, ParseError> {
        if self.src.text.trim().is_empty() {
            return Err(self.syntax(1, "empty equation"));
        }
        self.lex()?;
        let (tok, col) = self.bump();
        let name = match tok {
            Tok::Ident(name) => name,
            other => return Err(self.syntax(col, alloc::format!("expected class name, found {other}"))),
        };
        let name_at = self.at(col);
        self.expect(Tok::Eq)?;
        let body = self.expr()?;
        if *self.peek() != Tok::End {
            let col = self.column();
            let tok = self.peek().clone();
            return Err(self.syntax(col, alloc::format!("unexpected {tok}")));
        }
        Ok(RawEquation { name, name_at, body, origin: self.src.origin.clone() })
    }

    fn expr(&mut self) -> Result<Raw, ParseError> {
        let mut terms = alloc::vec![self.term()?];
        while *self.peek() == Tok::Plus {
            self.bump();
            terms.push(self.term()?);
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Raw::Union(terms) })
    }

    fn term(&mut self) -> Result<Raw, ParseError> {
        let mut factors = alloc::vec![self.factor()?];
        while *self.peek() == Tok::Star {
            self.bump();
            factors.push(self.factor()?);
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { Raw::Product(factors) })
    }

    fn factor(&mut self) -> Result<Raw, ParseError> {
        let col = self.column();
        match self.peek().clone() {
            Tok::Plus | Tok::RParen | Tok::End => Err(ParseError::EmptyAlternative { at: self.at(col) }),
            Tok::LParen => {
                self.bump();
                let inner = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.bump();
                if name.eq_ignore_ascii_case("seq") {
                    self.expect(Tok::LParen)?;
                    let inner = self.expr()?;
                    self.expect(Tok::RParen)?;
                    Ok(Raw::Seq(Box::new(inner)))
                } else if name.eq_ignore_ascii_case("atom") {
                    self.expect(Tok::LParen)?;
                    self.atom_decl(col)
                } else {
                    Ok(Raw::Ident(name))
                }
            }
            other => Err(self.syntax(col, alloc::format!("expected an expression, found {other}"))),
        }
    }

    /// After `atom(`.
    fn atom_decl(&mut self, start: u32) -> Result<Raw, ParseError> {
        let mut size = BTreeMap::new();
        if *self.peek() != Tok::RParen {
            loop {
                let (tok, col) = self.bump();
                let var = match tok {
                    Tok::Ident(v) if !is_reserved(&v) => v,
                    other => return Err(self.syntax(col, alloc::format!("expected variable name, found {other}"))),
                };
                self.expect(Tok::Colon)?;
                let (tok, ncol) = self.bump();
                let n = match tok {
                    Tok::Int(n) => n,
                    other => return Err(self.syntax(ncol, alloc::format!("expected atom size, found {other}"))),
                };
                if size.insert(var.clone(), n).is_some() {
                    return Err(self.syntax(col, alloc::format!("variable `{var}` repeated in atom")));
                }
                if *self.peek() == Tok::Comma {
                    self.bump();
                } else {
                    break;
                }
            }
        }
        self.expect(Tok::RParen)?;
        size.retain(|_, n| *n > 0);
        if size.is_empty() {
            return Err(self.syntax(start, "atom must have positive size in some variable"));
        }
        Ok(Raw::Atom(size))
    }
}

impl fmt::Display for SpecNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecNode::Atom(a) if a.implicit => f.write_str(&a.key),
            SpecNode::Atom(a) => f.write_str(&atom_text(&a.size)),
            SpecNode::ClassRef(name) => f.write_str(name),
            SpecNode::Union(children) => {
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" + ")?;
                    }
                    match c {
                        SpecNode::Union(_) => write!(f, "({c})")?,
                        _ => write!(f, "{c}")?,
                    }
                }
                Ok(())
            }
            SpecNode::Product(children) => {
                for (i, c) in children.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" * ")?;
                    }
                    match c {
                        SpecNode::Union(_) | SpecNode::Product(_) => write!(f, "({c})")?,
                        _ => write!(f, "{c}")?,
                    }
                }
                Ok(())
            }
            SpecNode::Seq(child) => write!(f, "Seq({child})"),
        }
    }
}

impl fmt::Display for Equation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.name, self.body)
    }
}
