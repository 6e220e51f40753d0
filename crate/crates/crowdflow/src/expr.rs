//! A small arithmetic expression grammar for coefficient and initial
//! fields: +, -, *, /, ^, sin, cos, exp, max, numeric literals, the
//! coordinates x and y, and the constant pi. Keeps configs reproducible
//! without code.

use crate::error::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Number(f64),
    CoordX,
    CoordY,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    Exp(Box<Expr>),
    Max(Box<Expr>, Box<Expr>),
}

impl Expr {
    pub fn parse(text: &str) -> Result<Expr, Error> {
        let tokens = tokenize(text)?;
        let mut parser = Parser { tokens, pos: 0 };
        let expr = parser.expression()?;
        if parser.pos != parser.tokens.len() {
            return Err(Error::Config(format!(
                "trailing input in expression at token {:?}",
                parser.tokens[parser.pos]
            )));
        }
        Ok(expr)
    }

    pub fn eval(&self, p: [f64; 2]) -> f64 {
        match self {
            Expr::Number(v) => *v,
            Expr::CoordX => p[0],
            Expr::CoordY => p[1],
            Expr::Neg(a) => -a.eval(p),
            Expr::Add(a, b) => a.eval(p) + b.eval(p),
            Expr::Sub(a, b) => a.eval(p) - b.eval(p),
            Expr::Mul(a, b) => a.eval(p) * b.eval(p),
            Expr::Div(a, b) => a.eval(p) / b.eval(p),
            Expr::Pow(a, b) => a.eval(p).powf(b.eval(p)),
            Expr::Sin(a) => a.eval(p).sin(),
            Expr::Cos(a) => a.eval(p).cos(),
            Expr::Exp(a) => a.eval(p).exp(),
            Expr::Max(a, b) => a.eval(p).max(b.eval(p)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
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
}

fn tokenize(text: &str) -> Result<Vec<Token>, Error> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '/' => {
                tokens.push(Token::Slash);
                i += 1;
            }
            '^' => {
                tokens.push(Token::Caret);
                i += 1;
            }
            '(' => {
                tokens.push(Token::LParen);
                i += 1;
            }
            ')' => {
                tokens.push(Token::RParen);
                i += 1;
            }
            ',' => {
                tokens.push(Token::Comma);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len()
                    && (chars[i].is_ascii_digit()
                        || chars[i] == '.'
                        || chars[i] == 'e'
                        || chars[i] == 'E'
                        || ((chars[i] == '+' || chars[i] == '-')
                            && i > start
                            && (chars[i - 1] == 'e' || chars[i - 1] == 'E')))
                {
                    i += 1;
                }
                let lit: String = chars[start..i].iter().collect();
                let v = lit
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad numeric literal '{lit}'")))?;
                tokens.push(Token::Number(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                tokens.push(Token::Ident(chars[start..i].iter().collect()));
            }
            other => {
                return Err(Error::Config(format!("unexpected character '{other}' in expression")))
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn eat(&mut self, token: &Token) -> Result<(), Error> {
        if self.peek() == Some(token) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Config(format!(
                "expected {token:?}, found {:?}",
                self.peek().cloned()
            )))
        }
    }

    fn expression(&mut self) -> Result<Expr, Error> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, Error> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, Error> {
        match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.unary()?)))
            }
            Some(Token::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, Error> {
        let base = self.atom()?;
        if self.peek() == Some(&Token::Caret) {
            self.pos += 1;
            // right-associative, unary binds tighter on the exponent
            let exponent = self.unary()?;
            Ok(Expr::Pow(Box::new(base), Box::new(exponent)))
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<Expr, Error> {
        match self.peek().cloned() {
            Some(Token::Number(v)) => {
                self.pos += 1;
                Ok(Expr::Number(v))
            }
            Some(Token::LParen) => {
                self.pos += 1;
                let inner = self.expression()?;
                self.eat(&Token::RParen)?;
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                self.pos += 1;
                match name.as_str() {
                    "x" => Ok(Expr::CoordX),
                    "y" => Ok(Expr::CoordY),
                    "pi" => Ok(Expr::Number(std::f64::consts::PI)),
                    "sin" | "cos" | "exp" => {
                        self.eat(&Token::LParen)?;
                        let arg = self.expression()?;
                        self.eat(&Token::RParen)?;
                        Ok(match name.as_str() {
                            "sin" => Expr::Sin(Box::new(arg)),
                            "cos" => Expr::Cos(Box::new(arg)),
                            _ => Expr::Exp(Box::new(arg)),
                        })
                    }
                    "max" => {
                        self.eat(&Token::LParen)?;
                        let a = self.expression()?;
                        self.eat(&Token::Comma)?;
                        let b = self.expression()?;
                        self.eat(&Token::RParen)?;
                        Ok(Expr::Max(Box::new(a), Box::new(b)))
                    }
                    other => Err(Error::Config(format!("unknown identifier '{other}'"))),
                }
            }
            other => Err(Error::Config(format!("unexpected token {other:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(text: &str, x: f64, y: f64) -> f64 {
        Expr::parse(text).unwrap().eval([x, y])
    }

    #[test]
    fn arithmetic_and_precedence() {
        assert_eq!(eval("1 + 2 * 3", 0.0, 0.0), 7.0);
        assert_eq!(eval("(1 + 2) * 3", 0.0, 0.0), 9.0);
        assert_eq!(eval("2 ^ 3 ^ 1", 0.0, 0.0), 8.0);
        assert_eq!(eval("-x^2", 2.0, 0.0), -4.0);
        assert_eq!(eval("10 / 4", 0.0, 0.0), 2.5);
        assert_eq!(eval("1 - 2 - 3", 0.0, 0.0), -4.0);
    }

    #[test]
    fn functions_and_constants() {
        assert!((eval("sin(pi / 2)", 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((eval("cos(0)", 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!((eval("exp(1)", 0.0, 0.0) - std::f64::consts::E).abs() < 1e-15);
        assert_eq!(eval("max(1 - x, 0)", 2.0, 0.0), 0.0);
        assert_eq!(eval("max(x, y)", 0.3, 0.7), 0.7);
    }

    #[test]
    fn coordinates_and_scientific_literals() {
        assert_eq!(eval("x * y", 3.0, 4.0), 12.0);
        assert_eq!(eval("1.5e-2", 0.0, 0.0), 0.015);
        assert_eq!(eval("2.5E2 + 1e+1", 0.0, 0.0), 260.0);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(2)").is_err());
        assert!(Expr::parse("max(1)").is_err());
        assert!(Expr::parse("(1 + 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("x $ y").is_err());
    }
}
