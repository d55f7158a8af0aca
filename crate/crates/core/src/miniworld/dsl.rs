//! The action DSL: a tiny call language the agent uses to touch the world.
//!
//! Grammar:
//!
//! ```text
//! action   := assign | call | final
//! assign   := IDENT '=' call
//! call     := IDENT '.' IDENT '(' args? ')'
//! final    := 'final' '(' 'answer' '=' value ')'
//! args     := arg (',' arg)*
//! arg      := IDENT '=' value
//! value    := STRING | INTEGER | BOOL | varref
//! varref   := IDENT ('.' IDENT)*
//! ```
//!
//! Strings are double-quoted with `\"` and `\\` escapes; integers are signed
//! decimal; `true`/`false` are booleans; anything else identifier-shaped is a
//! variable reference with optional dotted field access.

use std::fmt;

/// A value position in an action: literal or variable reference.
#[derive(Debug, Clone, PartialEq)]
pub enum ValueExpr {
    Str(String),
    Int(i64),
    Bool(bool),
    /// `name.field.field...` — resolved against run bindings at execution.
    Ref(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Call {
        /// `IDENT =` prefix, when present.
        binding: Option<String>,
        app: String,
        method: String,
        args: Vec<(String, ValueExpr)>,
    },
    Final {
        answer: ValueExpr,
    },
}

impl Action {
    /// True for the terminal `final(...)` form.
    pub fn is_final(&self) -> bool {
        matches!(self, Action::Final { .. })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("syntax error at {position}: {message}")]
pub struct DslError {
    pub position: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Ident(String),
    Str(String),
    Int(i64),
    Eq,
    Dot,
    LParen,
    RParen,
    Comma,
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Ident(s) => write!(f, "identifier '{s}'"),
            Token::Str(_) => write!(f, "string literal"),
            Token::Int(n) => write!(f, "integer {n}"),
            Token::Eq => write!(f, "'='"),
            Token::Dot => write!(f, "'.'"),
            Token::LParen => write!(f, "'('"),
            Token::RParen => write!(f, "')'"),
            Token::Comma => write!(f, "','"),
        }
    }
}

fn lex(input: &str) -> Result<Vec<(usize, Token)>, DslError> {
    let mut tokens = Vec::new();
    let chars: Vec<char> = input.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '=' => {
                tokens.push((i, Token::Eq));
                i += 1;
            }
            '.' => {
                tokens.push((i, Token::Dot));
                i += 1;
            }
            '(' => {
                tokens.push((i, Token::LParen));
                i += 1;
            }
            ')' => {
                tokens.push((i, Token::RParen));
                i += 1;
            }
            ',' => {
                tokens.push((i, Token::Comma));
                i += 1;
            }
            '"' => {
                let start = i;
                i += 1;
                let mut value = String::new();
                loop {
                    if i >= chars.len() {
                        return Err(DslError {
                            position: start,
                            message: "unterminated string literal".into(),
                        });
                    }
                    match chars[i] {
                        '"' => {
                            i += 1;
                            break;
                        }
                        '\\' => {
                            i += 1;
                            match chars.get(i) {
                                Some('"') => value.push('"'),
                                Some('\\') => value.push('\\'),
                                other => {
                                    return Err(DslError {
                                        position: i,
                                        message: format!(
                                            "unsupported escape {:?}",
                                            other.copied().unwrap_or(' ')
                                        ),
                                    })
                                }
                            }
                            i += 1;
                        }
                        ch => {
                            value.push(ch);
                            i += 1;
                        }
                    }
                }
                tokens.push((start, Token::Str(value)));
            }
            '-' | '0'..='9' => {
                let start = i;
                let mut text = String::new();
                if c == '-' {
                    text.push('-');
                    i += 1;
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    text.push(chars[i]);
                    i += 1;
                }
                if text == "-" || text.is_empty() {
                    return Err(DslError {
                        position: start,
                        message: "expected digits after '-'".into(),
                    });
                }
                let value = text.parse::<i64>().map_err(|e| DslError {
                    position: start,
                    message: format!("integer out of range: {e}"),
                })?;
                tokens.push((start, Token::Int(value)));
            }
            c if c.is_alphanumeric() || c == '_' => {
                let start = i;
                let mut text = String::new();
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    text.push(chars[i]);
                    i += 1;
                }
                tokens.push((start, Token::Ident(text)));
            }
            other => {
                return Err(DslError {
                    position: i,
                    message: format!("unexpected character {other:?}"),
                })
            }
        }
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    input_len: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn position(&self) -> usize {
        self.tokens
            .get(self.pos)
            .map(|(p, _)| *p)
            .unwrap_or(self.input_len)
    }

    fn next(&mut self) -> Option<Token> {
        let token = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        token
    }

    fn expect(&mut self, want: &Token) -> Result<(), DslError> {
        let position = self.position();
        match self.next() {
            Some(token) if &token == want => Ok(()),
            Some(token) => Err(DslError {
                position,
                message: format!("expected {want}, found {token}"),
            }),
            None => Err(DslError {
                position,
                message: format!("expected {want}, found end of input"),
            }),
        }
    }

    fn ident(&mut self) -> Result<String, DslError> {
        let position = self.position();
        match self.next() {
            Some(Token::Ident(s)) => Ok(s),
            Some(token) => Err(DslError {
                position,
                message: format!("expected identifier, found {token}"),
            }),
            None => Err(DslError {
                position,
                message: "expected identifier, found end of input".into(),
            }),
        }
    }

    fn value(&mut self) -> Result<ValueExpr, DslError> {
        let position = self.position();
        match self.next() {
            Some(Token::Str(s)) => Ok(ValueExpr::Str(s)),
            Some(Token::Int(n)) => Ok(ValueExpr::Int(n)),
            Some(Token::Ident(first)) => match first.as_str() {
                "true" => Ok(ValueExpr::Bool(true)),
                "false" => Ok(ValueExpr::Bool(false)),
                _ => {
                    let mut path = vec![first];
                    while self.peek() == Some(&Token::Dot) {
                        self.next();
                        path.push(self.ident()?);
                    }
                    Ok(ValueExpr::Ref(path))
                }
            },
            Some(token) => Err(DslError {
                position,
                message: format!("expected a value, found {token}"),
            }),
            None => Err(DslError {
                position,
                message: "expected a value, found end of input".into(),
            }),
        }
    }

    fn args(&mut self) -> Result<Vec<(String, ValueExpr)>, DslError> {
        self.expect(&Token::LParen)?;
        let mut args = Vec::new();
        if self.peek() == Some(&Token::RParen) {
            self.next();
            return Ok(args);
        }
        loop {
            let name = self.ident()?;
            self.expect(&Token::Eq)?;
            let value = self.value()?;
            args.push((name, value));
            match self.next() {
                Some(Token::Comma) => continue,
                Some(Token::RParen) => break,
                Some(token) => {
                    return Err(DslError {
                        position: self.position(),
                        message: format!("expected ',' or ')', found {token}"),
                    })
                }
                None => {
                    return Err(DslError {
                        position: self.input_len,
                        message: "unclosed argument list".into(),
                    })
                }
            }
        }
        Ok(args)
    }
}

/// Parses one action. Never panics; every malformed input is a [`DslError`].
pub fn parse_action(input: &str) -> Result<Action, DslError> {
    let tokens = lex(input)?;
    if tokens.is_empty() {
        return Err(DslError {
            position: 0,
            message: "empty action".into(),
        });
    }
    let mut parser = Parser {
        tokens,
        pos: 0,
        input_len: input.len(),
    };
    let first = parser.ident()?;
    let action = match parser.peek() {
        // `final(answer=...)`
        Some(Token::LParen) if first == "final" => {
            let mut args = parser.args()?;
            if args.len() != 1 || args[0].0 != "answer" {
                return Err(DslError {
                    position: 0,
                    message: "final takes exactly one argument: answer".into(),
                });
            }
            Action::Final {
                answer: args.remove(0).1,
            }
        }
        // `app.method(...)`
        Some(Token::Dot) => {
            parser.next();
            let method = parser.ident()?;
            let args = parser.args()?;
            Action::Call {
                binding: None,
                app: first,
                method,
                args,
            }
        }
        // `name = app.method(...)`
        Some(Token::Eq) => {
            parser.next();
            let app = parser.ident()?;
            parser.expect(&Token::Dot)?;
            let method = parser.ident()?;
            let args = parser.args()?;
            Action::Call {
                binding: Some(first),
                app,
                method,
                args,
            }
        }
        _ => {
            return Err(DslError {
                position: parser.position(),
                message: "expected '.', '=', or 'final(...)'".into(),
            })
        }
    };
    if parser.peek().is_some() {
        return Err(DslError {
            position: parser.position(),
            message: "trailing input after action".into(),
        });
    }
    Ok(action)
}
