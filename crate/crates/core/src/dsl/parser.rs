use std::collections::HashMap;

use super::ast::{BinOp, Builtin, Expr, FormProgram, FunctionKind, Statement};
use super::lexer::{Keyword, Punct, Span, Token, TokenKind};
use super::DslError;
use crate::elements::{Family, FiniteElement, ReferenceCell, ValueShape};

/// Identifiers of the full upstream language that this subset rejects.
const UNSUPPORTED: &[&str] = &[
    "dS",
    "ds",
    "jump",
    "avg",
    "FacetNormal",
    "MeshSize",
    "TestFunctions",
    "TrialFunctions",
    "MixedElement",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NameKind {
    Element,
    Function,
    Value,
    Macro(usize),
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    names: HashMap<String, NameKind>,
    /// Parameters of the `def` currently being parsed.
    locals: Vec<String>,
    /// Set when a `dx` primary was consumed in the current statement.
    measure_at: Option<Span>,
}

pub fn parse(tokens: &[Token]) -> Result<FormProgram, DslError> {
    let mut p = Parser {
        tokens,
        pos: 0,
        names: HashMap::new(),
        locals: Vec::new(),
        measure_at: None,
    };
    let mut program = FormProgram::default();
    let mut last_end = Span::default();
    while p.skip_newlines() {
        let stmt = p.statement()?;
        if let Statement::Form { .. } = stmt {
            if program.integrand().is_some() {
                let span = p.prev_span();
                return Err(DslError::SyntaxError {
                    line: span.line,
                    column: span.column,
                    expected: "a single form statement".into(),
                    found: "a second `*dx` statement".into(),
                });
            }
        }
        program.statements.push(stmt);
        last_end = p.prev_span();
    }
    if program.integrand().is_none() {
        return Err(DslError::SyntaxError {
            line: last_end.line.max(1),
            column: last_end.column + last_end.len,
            expected: "a form statement ending in `*dx`".into(),
            found: "end of input".into(),
        });
    }
    Ok(program)
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_kind(&self) -> Option<&'a TokenKind> {
        self.peek().map(|t| &t.kind)
    }

    fn prev_span(&self) -> Span {
        self.pos
            .checked_sub(1)
            .and_then(|i| self.tokens.get(i))
            .map(|t| t.span)
            .unwrap_or_default()
    }

    /// Skips blank lines; returns whether any token remains.
    fn skip_newlines(&mut self) -> bool {
        while let Some(TokenKind::Newline) = self.peek_kind() {
            self.pos += 1;
        }
        self.pos < self.tokens.len()
    }

    fn error_here(&self, expected: impl Into<String>) -> DslError {
        match self.peek() {
            Some(t) => DslError::SyntaxError {
                line: t.span.line,
                column: t.span.column,
                expected: expected.into(),
                found: t.kind.to_string(),
            },
            None => {
                let s = self.prev_span();
                DslError::SyntaxError {
                    line: s.line.max(1),
                    column: s.column + s.len,
                    expected: expected.into(),
                    found: "end of input".into(),
                }
            }
        }
    }

    fn expect_punct(&mut self, p: Punct) -> Result<Span, DslError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Punct(q),
                span,
            }) if *q == p => {
                self.pos += 1;
                Ok(*span)
            }
            _ => Err(self.error_here(format!("`{}`", p.as_str()))),
        }
    }

    fn eat_punct(&mut self, p: Punct) -> bool {
        if matches!(self.peek_kind(), Some(TokenKind::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn end_of_statement(&mut self) -> Result<(), DslError> {
        match self.peek_kind() {
            None => Ok(()),
            Some(TokenKind::Newline) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.error_here("end of line")),
        }
    }

    fn identifier(&mut self, what: &str) -> Result<(String, Span), DslError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Identifier(s),
                span,
            }) => {
                self.check_supported(s, *span)?;
                self.pos += 1;
                Ok((s.clone(), *span))
            }
            _ => Err(self.error_here(what)),
        }
    }

    fn check_supported(&self, name: &str, span: Span) -> Result<(), DslError> {
        if UNSUPPORTED.contains(&name) {
            return Err(DslError::UnsupportedConstruct {
                name: name.to_string(),
                line: span.line,
                column: span.column,
            });
        }
        Ok(())
    }

    fn declare(&mut self, name: &str, span: Span, kind: NameKind) -> Result<(), DslError> {
        if self.names.contains_key(name) {
            return Err(DslError::DuplicateName {
                name: name.to_string(),
                line: span.line,
                column: span.column,
            });
        }
        self.names.insert(name.to_string(), kind);
        Ok(())
    }

    fn statement(&mut self) -> Result<Statement, DslError> {
        if let Some(TokenKind::Keyword(Keyword::Def)) = self.peek_kind() {
            return self.def();
        }
        let (name, name_span) = self.identifier("a statement (`name = ...` or `def`)")?;
        self.expect_punct(Punct::Assign)?;
        let stmt = match self.peek_kind() {
            Some(TokenKind::Keyword(k @ (Keyword::FiniteElement | Keyword::VectorElement))) => {
                let vector = *k == Keyword::VectorElement;
                self.pos += 1;
                let element = self.element_args(vector)?;
                self.declare(&name, name_span, NameKind::Element)?;
                Statement::Element { name, element }
            }
            Some(TokenKind::Keyword(k @ (Keyword::TestFunction | Keyword::TrialFunction | Keyword::Function))) => {
                let kind = match k {
                    Keyword::TestFunction => FunctionKind::Test,
                    Keyword::TrialFunction => FunctionKind::Trial,
                    _ => FunctionKind::Coefficient,
                };
                self.pos += 1;
                self.expect_punct(Punct::LParen)?;
                let (element, el_span) = self.identifier("an element name")?;
                match self.names.get(&element) {
                    Some(NameKind::Element) => {}
                    Some(_) => {
                        return Err(DslError::SyntaxError {
                            line: el_span.line,
                            column: el_span.column,
                            expected: "an element name".into(),
                            found: format!("`{element}`"),
                        })
                    }
                    None => {
                        return Err(DslError::UnknownName {
                            name: element,
                            line: el_span.line,
                            column: el_span.column,
                        })
                    }
                }
                self.expect_punct(Punct::RParen)?;
                self.declare(&name, name_span, NameKind::Function)?;
                Statement::Function {
                    name,
                    kind,
                    element,
                }
            }
            _ => {
                self.measure_at = None;
                let value = self.sum()?;
                match (self.measure_at, value) {
                    (None, value) => {
                        self.declare(&name, name_span, NameKind::Value)?;
                        Statement::Let { name, value }
                    }
                    (Some(_), Expr::Binary(BinOp::Mul, integrand, measure))
                        if is_measure(&measure) && !contains_measure(&integrand) =>
                    {
                        self.declare(&name, name_span, NameKind::Value)?;
                        Statement::Form {
                            name,
                            integrand: *integrand,
                        }
                    }
                    (Some(span), _) => return Err(misplaced_measure(span)),
                }
            }
        };
        self.end_of_statement()?;
        Ok(stmt)
    }

    fn element_args(&mut self, vector: bool) -> Result<FiniteElement, DslError> {
        self.expect_punct(Punct::LParen)?;
        let (family_name, fspan) = self.string("an element family string")?;
        self.expect_punct(Punct::Comma)?;
        let (cell_name, cspan) = self.string("a cell name string")?;
        self.expect_punct(Punct::Comma)?;
        let (degree, dspan) = match self.peek() {
            Some(Token {
                kind: TokenKind::Number(v),
                span,
            }) if v.fract() == 0.0 && *v >= 0.0 => {
                self.pos += 1;
                (*v as usize, *span)
            }
            _ => return Err(self.error_here("a non-negative integer degree")),
        };
        self.expect_punct(Punct::RParen)?;
        let family = Family::from_name(&family_name).ok_or_else(|| DslError::InvalidElement {
            line: fspan.line,
            column: fspan.column,
            reason: format!("unsupported element family \"{family_name}\""),
        })?;
        let cell = ReferenceCell::from_name(&cell_name).ok_or_else(|| DslError::InvalidElement {
            line: cspan.line,
            column: cspan.column,
            reason: format!("unsupported cell \"{cell_name}\""),
        })?;
        let shape = if vector {
            ValueShape::Vector(cell.dim())
        } else {
            ValueShape::Scalar
        };
        FiniteElement::new(family, cell, degree, shape).map_err(|e| DslError::InvalidElement {
            line: dspan.line,
            column: dspan.column,
            reason: e.to_string(),
        })
    }

    fn string(&mut self, what: &str) -> Result<(String, Span), DslError> {
        match self.peek() {
            Some(Token {
                kind: TokenKind::Str(s),
                span,
            }) => {
                self.pos += 1;
                Ok((s.clone(), *span))
            }
            _ => Err(self.error_here(what)),
        }
    }

    fn def(&mut self) -> Result<Statement, DslError> {
        self.pos += 1;
        let (name, name_span) = self.identifier("a macro name")?;
        self.expect_punct(Punct::LParen)?;
        let mut params = Vec::new();
        if !self.eat_punct(Punct::RParen) {
            loop {
                let (p, span) = self.identifier("a parameter name")?;
                if params.contains(&p) {
                    return Err(DslError::DuplicateName {
                        name: p,
                        line: span.line,
                        column: span.column,
                    });
                }
                params.push(p);
                if self.eat_punct(Punct::RParen) {
                    break;
                }
                self.expect_punct(Punct::Comma)?;
            }
        }
        self.expect_punct(Punct::Colon)?;
        if let Some(TokenKind::Newline) = self.peek_kind() {
            self.pos += 1;
        }
        match self.peek_kind() {
            Some(TokenKind::Keyword(Keyword::Return)) => self.pos += 1,
            _ => return Err(self.error_here("`return`")),
        }
        self.locals = params.clone();
        self.measure_at = None;
        let body = self.sum();
        self.locals.clear();
        let body = body?;
        if let Some(span) = self.measure_at {
            return Err(misplaced_measure(span));
        }
        self.declare(&name, name_span, NameKind::Macro(params.len()))?;
        self.end_of_statement()?;
        Ok(Statement::Def { name, params, body })
    }

    fn sum(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.product()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Punct(Punct::Plus)) => BinOp::Add,
                Some(TokenKind::Punct(Punct::Minus)) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.product()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn product(&mut self) -> Result<Expr, DslError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek_kind() {
                Some(TokenKind::Punct(Punct::Star)) => BinOp::Mul,
                Some(TokenKind::Punct(Punct::Slash)) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Expr::binary(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<Expr, DslError> {
        if self.eat_punct(Punct::Minus) {
            let operand = self.unary()?;
            return Ok(Expr::binary(BinOp::Sub, Expr::Number(0.0), operand));
        }
        if self.eat_punct(Punct::Plus) {
            return self.unary();
        }
        self.primary()
    }

    fn call_args(&mut self) -> Result<Vec<Expr>, DslError> {
        self.expect_punct(Punct::LParen)?;
        let mut args = Vec::new();
        if self.eat_punct(Punct::RParen) {
            return Ok(args);
        }
        loop {
            args.push(self.sum()?);
            if self.eat_punct(Punct::RParen) {
                return Ok(args);
            }
            self.expect_punct(Punct::Comma)?;
        }
    }

    fn primary(&mut self) -> Result<Expr, DslError> {
        let Some(tok) = self.peek() else {
            return Err(self.error_here("an expression"));
        };
        let span = tok.span;
        match &tok.kind {
            TokenKind::Number(v) => {
                self.pos += 1;
                Ok(Expr::Number(*v))
            }
            TokenKind::Punct(Punct::LParen) => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect_punct(Punct::RParen)?;
                Ok(e)
            }
            TokenKind::Keyword(k) => {
                let builtin = match k {
                    Keyword::Grad => Builtin::Grad,
                    Keyword::Div => Builtin::Div,
                    Keyword::Dot => Builtin::Dot,
                    Keyword::Transp => Builtin::Transp,
                    Keyword::Mult => Builtin::Mult,
                    Keyword::Dx => {
                        self.pos += 1;
                        if self.measure_at.is_none() {
                            self.measure_at = Some(span);
                        }
                        return Ok(Expr::Name(MEASURE.into()));
                    }
                    _ => return Err(self.error_here("an expression")),
                };
                self.pos += 1;
                let args = self.call_args()?;
                if args.len() != builtin.arity() {
                    return Err(DslError::SyntaxError {
                        line: span.line,
                        column: span.column,
                        expected: format!("{} argument(s) to `{}`", builtin.arity(), builtin.name()),
                        found: format!("{} argument(s)", args.len()),
                    });
                }
                Ok(Expr::Builtin(builtin, args))
            }
            TokenKind::Identifier(name) => {
                self.check_supported(name, span)?;
                self.pos += 1;
                let is_call = matches!(self.peek_kind(), Some(TokenKind::Punct(Punct::LParen)));
                let local = self.locals.contains(name);
                match (self.names.get(name).copied(), local) {
                    (_, true) if !is_call => Ok(Expr::Name(name.clone())),
                    (Some(NameKind::Macro(n)), false) if is_call => {
                        let args = self.call_args()?;
                        if args.len() != n {
                            return Err(DslError::SyntaxError {
                                line: span.line,
                                column: span.column,
                                expected: format!("{n} argument(s) to `{name}`"),
                                found: format!("{} argument(s)", args.len()),
                            });
                        }
                        Ok(Expr::Call(name.clone(), args))
                    }
                    (Some(NameKind::Function | NameKind::Value), false) if !is_call => {
                        Ok(Expr::Name(name.clone()))
                    }
                    (None, false) => Err(DslError::UnknownName {
                        name: name.clone(),
                        line: span.line,
                        column: span.column,
                    }),
                    _ => Err(DslError::SyntaxError {
                        line: span.line,
                        column: span.column,
                        expected: "a function, value or macro call".into(),
                        found: format!("`{name}`"),
                    }),
                }
            }
            _ => Err(self.error_here("an expression")),
        }
    }
}

/// Placeholder name for the `dx` keyword while parsing; never user-visible
/// because `dx` cannot be declared.
const MEASURE: &str = "dx";

fn is_measure(e: &Expr) -> bool {
    matches!(e, Expr::Name(n) if n == MEASURE)
}

fn contains_measure(e: &Expr) -> bool {
    match e {
        Expr::Name(_) => is_measure(e),
        Expr::Number(_) => false,
        Expr::Builtin(_, args) | Expr::Call(_, args) => args.iter().any(contains_measure),
        Expr::Binary(_, l, r) => contains_measure(l) || contains_measure(r),
    }
}

fn misplaced_measure(span: Span) -> DslError {
    DslError::SyntaxError {
        line: span.line,
        column: span.column,
        expected: "`dx` only as the final factor of a form statement".into(),
        found: "`dx`".into(),
    }
}
