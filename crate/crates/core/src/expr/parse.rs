use std::fmt;

use super::ast::{BinaryOp, Expression, Node, NodeKind, Span, UnaryOp, Var};

/// Maximum depth of the produced tree. Keeps evaluation and `Drop` off the
/// end of the stack for adversarial input such as ten thousand `(`.
const MAX_DEPTH: usize = 200;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedToken {
        found: String,
        expected: Vec<&'static str>,
    },
    UnknownFunction(String),
    ArityMismatch {
        name: String,
        expected: usize,
        found: usize,
    },
    InvalidNumber(String),
    TooDeep,
    InvalidUtf8,
}

/// A parse failure at a 0-based byte offset.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub offset: usize,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at byte {}: ", self.offset)?;
        match &self.kind {
            ParseErrorKind::UnexpectedToken { found, expected } => {
                write!(
                    f,
                    "syntax error: found {found}, expected one of: {}",
                    expected.join(", ")
                )
            }
            ParseErrorKind::UnknownFunction(name) => write!(f, "unknown function `{name}`"),
            ParseErrorKind::ArityMismatch {
                name,
                expected,
                found,
            } => write!(f, "`{name}` takes {expected} argument(s), got {found}"),
            ParseErrorKind::InvalidNumber(text) => write!(f, "invalid number literal `{text}`"),
            ParseErrorKind::TooDeep => write!(f, "expression nested deeper than {MAX_DEPTH}"),
            ParseErrorKind::InvalidUtf8 => write!(f, "input is not valid UTF-8"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Number(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Number(v) => format!("number {v}"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::End => "end of input".into(),
        }
    }
}

const EXPECT_OPERAND: &[&str] = &["number", "identifier", "`(`", "`-`"];
const EXPECT_OPERATOR: &[&str] = &["`+`", "`-`", "`*`", "`/`", "`^`", "end of input"];

fn lex(src: &str) -> Result<Vec<(Tok, Span)>, ParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = match c {
            b'+' => Tok::Plus,
            b'-' => Tok::Minus,
            b'*' => Tok::Star,
            b'/' => Tok::Slash,
            b'^' => Tok::Caret,
            b'(' => Tok::LParen,
            b')' => Tok::RParen,
            b',' => Tok::Comma,
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                // An exponent only counts when digits follow, so `2e` stays `2` then `e`.
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut j = i + 1;
                    if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                        j += 1;
                    }
                    if j < bytes.len() && bytes[j].is_ascii_digit() {
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                        i = j;
                    }
                }
                let text = &src[start..i];
                match text.parse::<f64>() {
                    Ok(v) if v.is_finite() => {
                        out.push((Tok::Number(v), Span::new(start, i)));
                        continue;
                    }
                    _ => {
                        return Err(ParseError {
                            offset: start,
                            kind: ParseErrorKind::InvalidNumber(text.to_string()),
                        })
                    }
                }
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), Span::new(start, i)));
                continue;
            }
            _ => {
                let ch = src[start..].chars().next().unwrap_or('?');
                return Err(ParseError {
                    offset: start,
                    kind: ParseErrorKind::UnexpectedToken {
                        found: format!("character {ch:?}"),
                        expected: vec!["number", "identifier", "operator", "`(`", "`)`", "`,`"],
                    },
                });
            }
        };
        i += 1;
        out.push((tok, Span::new(start, i)));
    }
    out.push((Tok::End, Span::new(src.len(), src.len())));
    Ok(out)
}

struct Parser {
    tokens: Vec<(Tok, Span)>,
    pos: usize,
    nesting: usize,
}

type Parsed = (Node, usize);

impl Parser {
    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].0
    }

    fn span(&self) -> Span {
        self.tokens[self.pos].1
    }

    fn bump(&mut self) -> (Tok, Span) {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, expected: &[&'static str]) -> ParseError {
        ParseError {
            offset: self.span().start,
            kind: ParseErrorKind::UnexpectedToken {
                found: self.peek().describe(),
                expected: expected.to_vec(),
            },
        }
    }

    fn too_deep(&self) -> ParseError {
        ParseError {
            offset: self.span().start,
            kind: ParseErrorKind::TooDeep,
        }
    }

    fn combine(&self, op: BinaryOp, lhs: Parsed, rhs: Parsed) -> Result<Parsed, ParseError> {
        let depth = lhs.1.max(rhs.1) + 1;
        if depth > MAX_DEPTH {
            return Err(self.too_deep());
        }
        Ok((Node::binary(op, lhs.0, rhs.0), depth))
    }

    fn enter(&mut self) -> Result<(), ParseError> {
        self.nesting += 1;
        if self.nesting > MAX_DEPTH {
            return Err(self.too_deep());
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Parsed, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = self.combine(op, lhs, rhs)?;
        }
    }

    fn term(&mut self) -> Result<Parsed, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = self.combine(op, lhs, rhs)?;
        }
    }

    fn unary(&mut self) -> Result<Parsed, ParseError> {
        if *self.peek() == Tok::Minus {
            let (_, span) = self.bump();
            self.enter()?;
            let (arg, depth) = self.unary()?;
            self.nesting -= 1;
            let span = span.join(arg.span);
            return Ok((
                Node::new(NodeKind::Unary(UnaryOp::Neg, Box::new(arg)), span),
                depth + 1,
            ));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Parsed, ParseError> {
        let base = self.primary()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            self.enter()?;
            let exponent = self.unary()?;
            self.nesting -= 1;
            return self.combine(BinaryOp::Pow, base, exponent);
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Parsed, ParseError> {
        match self.peek().clone() {
            Tok::Number(v) => {
                let (_, span) = self.bump();
                Ok((Node::new(NodeKind::Constant(v), span), 1))
            }
            Tok::LParen => {
                let (_, open) = self.bump();
                self.enter()?;
                let (mut inner, depth) = self.expr()?;
                self.nesting -= 1;
                if *self.peek() != Tok::RParen {
                    return Err(self.unexpected(&["`)`", "`+`", "`-`", "`*`", "`/`", "`^`"]));
                }
                let (_, close) = self.bump();
                inner.span = open.join(close);
                Ok((inner, depth))
            }
            Tok::Ident(name) => {
                let (_, span) = self.bump();
                if *self.peek() == Tok::LParen {
                    return self.call(name, span);
                }
                let kind = match name.as_str() {
                    "t" | "n" => NodeKind::Variable(Var::T),
                    "x" => NodeKind::Variable(Var::X),
                    "pi" => NodeKind::Constant(std::f64::consts::PI),
                    "e" => NodeKind::Constant(std::f64::consts::E),
                    _ if UnaryOp::from_name(&name).is_some()
                        || BinaryOp::function_from_name(&name).is_some() =>
                    {
                        return Err(self.unexpected(&["`(`"]));
                    }
                    _ => NodeKind::Parameter(name),
                };
                Ok((Node::new(kind, span), 1))
            }
            _ => Err(self.unexpected(EXPECT_OPERAND)),
        }
    }

    fn call(&mut self, name: String, name_span: Span) -> Result<Parsed, ParseError> {
        let arity = if UnaryOp::from_name(&name).is_some() {
            1
        } else if BinaryOp::function_from_name(&name).is_some() {
            2
        } else {
            return Err(ParseError {
                offset: name_span.start,
                kind: ParseErrorKind::UnknownFunction(name),
            });
        };
        self.bump(); // (
        self.enter()?;
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.nesting -= 1;
        if *self.peek() != Tok::RParen {
            return Err(self.unexpected(&["`)`", "`,`", "`+`", "`-`", "`*`", "`/`", "`^`"]));
        }
        let (_, close) = self.bump();
        if args.len() != arity {
            return Err(ParseError {
                offset: name_span.start,
                kind: ParseErrorKind::ArityMismatch {
                    name,
                    expected: arity,
                    found: args.len(),
                },
            });
        }
        let span = name_span.join(close);
        let depth = args.iter().map(|a| a.1).max().unwrap_or(0) + 1;
        if depth > MAX_DEPTH {
            return Err(self.too_deep());
        }
        let mut it = args.into_iter().map(|a| Box::new(a.0));
        let first = it.next().expect("arity checked");
        let kind = match (
            UnaryOp::from_name(&name),
            BinaryOp::function_from_name(&name),
        ) {
            (Some(op), _) => NodeKind::Unary(op, first),
            (None, Some(op)) => NodeKind::Binary(op, first, it.next().expect("arity checked")),
            (None, None) => unreachable!("function table checked above"),
        };
        Ok((Node::new(kind, span), depth))
    }
}

/// Parses an expression. Whitespace is insignificant; there is no implicit
/// multiplication.
pub fn parse(source: &str) -> Result<Expression, ParseError> {
    let tokens = lex(source)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        nesting: 0,
    };
    let (root, _) = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected(EXPECT_OPERATOR));
    }
    Ok(Expression::new(root))
}

/// Parses raw bytes, reporting invalid UTF-8 as a structured error.
pub fn parse_bytes(source: &[u8]) -> Result<Expression, ParseError> {
    match std::str::from_utf8(source) {
        Ok(s) => parse(s),
        Err(e) => Err(ParseError {
            offset: e.valid_up_to(),
            kind: ParseErrorKind::InvalidUtf8,
        }),
    }
}

impl std::str::FromStr for Expression {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expression {
        parse(s).unwrap_or_else(|e| panic!("{s}: {e}"))
    }

    #[test]
    fn precedence() {
        assert_eq!(p("a+b*c"), p("a+(b*c)"));
        assert_eq!(p("a-b-c"), p("(a-b)-c"));
        assert_eq!(p("a/b*c"), p("(a/b)*c"));
        assert_eq!(p("2^3^2"), p("2^(3^2)"));
        assert_eq!(p("-x^2"), p("-(x^2)"));
        assert_eq!(p("2^-x"), p("2^(-x)"));
        assert_eq!(p("- - x"), p("-(-x)"));
    }

    #[test]
    fn whitespace_insensitive() {
        assert_eq!(p(" sin ( t ) *\n2 "), p("sin(t)*2"));
    }

    #[test]
    fn names() {
        assert!(matches!(p("x").root.kind, NodeKind::Variable(Var::X)));
        assert!(matches!(p("n").root.kind, NodeKind::Variable(Var::T)));
        assert!(matches!(p("x0").root.kind, NodeKind::Parameter(ref s) if s == "x0"));
        assert!(matches!(p("pi").root.kind, NodeKind::Constant(v) if v == std::f64::consts::PI));
    }

    #[test]
    fn number_forms() {
        for (s, v) in [
            ("1e-3", 1e-3),
            ("2.5", 2.5),
            (".5", 0.5),
            ("3.", 3.0),
            ("1E+2", 100.0),
        ] {
            assert!(
                matches!(p(s).root.kind, NodeKind::Constant(c) if c == v),
                "{s}"
            );
        }
    }

    #[test]
    fn implicit_multiplication_rejected() {
        let err = parse("2t").unwrap_err();
        assert_eq!(err.offset, 1);
        assert!(matches!(err.kind, ParseErrorKind::UnexpectedToken { .. }));
        assert!(parse("2 x").is_err());
        assert!(parse("(t)(x)").is_err());
    }

    #[test]
    fn error_offsets_and_kinds() {
        let err = parse("1 + ").unwrap_err();
        assert_eq!(err.offset, 4);
        match err.kind {
            ParseErrorKind::UnexpectedToken { found, expected } => {
                assert_eq!(found, "end of input");
                assert!(expected.contains(&"number"));
            }
            k => panic!("{k:?}"),
        }
        let err = parse("t + foo(x)").unwrap_err();
        assert_eq!(
            err,
            ParseError {
                offset: 4,
                kind: ParseErrorKind::UnknownFunction("foo".into())
            }
        );
        let err = parse("sin(t, x)").unwrap_err();
        assert!(matches!(
            err.kind,
            ParseErrorKind::ArityMismatch {
                expected: 1,
                found: 2,
                ..
            }
        ));
        let err = parse("max(t)").unwrap_err();
        assert!(matches!(
            err.kind,
            ParseErrorKind::ArityMismatch {
                expected: 2,
                found: 1,
                ..
            }
        ));
        assert_eq!(parse("x # 2").unwrap_err().offset, 2);
        assert!(matches!(
            parse("1e999").unwrap_err().kind,
            ParseErrorKind::InvalidNumber(_)
        ));
        assert!(parse("sin + 1").is_err());
        assert!(parse("(1").is_err());
        assert!(parse("1)").is_err());
        assert!(parse("").is_err());
    }

    #[test]
    fn deep_input_is_an_error_not_a_crash() {
        let nested = "(".repeat(100_000);
        assert_eq!(parse(&nested).unwrap_err().kind, ParseErrorKind::TooDeep);
        let chain = vec!["1"; 100_000].join("+");
        assert_eq!(parse(&chain).unwrap_err().kind, ParseErrorKind::TooDeep);
        let negs = "-".repeat(100_000) + "x";
        assert_eq!(parse(&negs).unwrap_err().kind, ParseErrorKind::TooDeep);
    }

    #[test]
    fn invalid_utf8() {
        let err = parse_bytes(b"t+\xff").unwrap_err();
        assert_eq!(
            err,
            ParseError {
                offset: 2,
                kind: ParseErrorKind::InvalidUtf8
            }
        );
    }

    #[test]
    fn spans_cover_source() {
        let e = p("1 + sin(t)");
        assert_eq!(e.root.span, Span::new(0, 10));
        if let NodeKind::Binary(_, _, rhs) = &e.root.kind {
            assert_eq!(rhs.span, Span::new(4, 10));
        } else {
            panic!()
        }
    }
}
