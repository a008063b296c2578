//! Recursive-descent parser.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := factor (('*' | '/') factor)*
//! factor  := '-' factor | power
//! power   := primary ('^' factor)?
//! primary := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! Lines are 1-based, columns are 0-based character offsets within the line.

use super::{BinaryOp, Expr, UnaryFn};
use crate::error::ExprError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Comma => "`,`".into(),
        Tok::Plus => "`+`".into(),
        Tok::Minus => "`-`".into(),
        Tok::Star => "`*`".into(),
        Tok::Slash => "`/`".into(),
        Tok::Caret => "`^`".into(),
        Tok::End => "end of input".into(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut line_start) = (0, 1, 0);
    while i < chars.len() {
        let c = chars[i];
        let column = i - line_start;
        if c == '\n' {
            line += 1;
            i += 1;
            line_start = i;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            _ => None,
        };
        if let Some(tok) = single {
            out.push(Token { tok, line, column });
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse::<f64>().map_err(|_| ExprError::Syntax {
                line,
                column,
                message: format!("malformed number `{text}`"),
            })?;
            out.push(Token {
                tok: Tok::Num(v),
                line,
                column,
            });
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line,
                column,
            });
        } else {
            return Err(ExprError::Syntax {
                line,
                column,
                message: format!("unexpected character `{c}`"),
            });
        }
    }
    let column = chars.len() - line_start;
    out.push(Token {
        tok: Tok::End,
        line,
        column,
    });
    Ok(out)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    dims: Option<(usize, usize)>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.tokens[self.pos].clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(t: &Token) -> ExprError {
        ExprError::Syntax {
            line: t.line,
            column: t.column,
            message: format!("unexpected {}", describe(&t.tok)),
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ExprError> {
        let t = self.next();
        if t.tok == want {
            Ok(())
        } else {
            Err(ExprError::Syntax {
                line: t.line,
                column: t.column,
                message: format!("expected {}, found {}", describe(&want), describe(&t.tok)),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek().tok {
                Tok::Plus => BinaryOp::Add,
                Tok::Minus => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.term()?));
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek().tok {
                Tok::Star => BinaryOp::Mul,
                Tok::Slash => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.next();
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(self.factor()?));
        }
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        if self.peek().tok == Tok::Minus {
            self.next();
            return Ok(Expr::Neg(Box::new(self.factor()?)));
        }
        let base = self.primary()?;
        if self.peek().tok == Tok::Caret {
            self.next();
            let exponent = self.factor()?;
            return Ok(Expr::Binary(BinaryOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let t = self.next();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(ref name) => {
                if self.peek().tok == Tok::LParen {
                    self.next();
                    let args = self.args()?;
                    self.call(name, args, &t)
                } else {
                    self.variable(name, &t)
                }
            }
            _ => Err(Self::unexpected(&t)),
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, ExprError> {
        let mut args = vec![self.expr()?];
        loop {
            let t = self.next();
            match t.tok {
                Tok::Comma => args.push(self.expr()?),
                Tok::RParen => return Ok(args),
                _ => return Err(Self::unexpected(&t)),
            }
        }
    }

    fn call(&self, name: &str, mut args: Vec<Expr>, at: &Token) -> Result<Expr, ExprError> {
        let arity = |expected: &str| ExprError::Arity {
            name: name.to_string(),
            expected: expected.to_string(),
            found: args.len(),
        };
        if let Some(f) = UnaryFn::from_name(name) {
            if args.len() != 1 {
                return Err(arity("1"));
            }
            return Ok(Expr::Unary(f, Box::new(args.remove(0))));
        }
        match name {
            "min" => Ok(Expr::Min(args)),
            "max" => Ok(Expr::Max(args)),
            "pow" => {
                if args.len() != 2 {
                    return Err(arity("2"));
                }
                let e = args.pop().unwrap();
                let b = args.pop().unwrap();
                Ok(Expr::Binary(BinaryOp::Pow, Box::new(b), Box::new(e)))
            }
            _ => Err(ExprError::UnknownIdentifier {
                name: name.to_string(),
                line: at.line,
                column: at.column,
            }),
        }
    }

    fn variable(&self, name: &str, at: &Token) -> Result<Expr, ExprError> {
        let unknown = || ExprError::UnknownIdentifier {
            name: name.to_string(),
            line: at.line,
            column: at.column,
        };
        if name == "t" {
            return Ok(Expr::Time);
        }
        let (prefix, digits) = name.split_at(1);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(unknown());
        }
        let index: usize = digits.parse().map_err(|_| unknown())?;
        if index == 0 {
            return Err(unknown());
        }
        let (expr, bound) = match prefix {
            "x" => (Expr::State(index - 1), self.dims.map(|d| d.0)),
            "p" => (Expr::Input(index - 1), self.dims.map(|d| d.1)),
            _ => return Err(unknown()),
        };
        match bound {
            Some(b) if index > b => Err(unknown()),
            _ => Ok(expr),
        }
    }
}

pub(super) fn parse(src: &str, dims: Option<(usize, usize)>) -> Result<Expr, ExprError> {
    let mut p = Parser {
        tokens: lex(src)?,
        pos: 0,
        dims,
    };
    let e = p.expr()?;
    let t = p.next();
    if t.tok != Tok::End {
        return Err(Parser::unexpected(&t));
    }
    Ok(e)
}
