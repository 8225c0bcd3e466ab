//! S-expression reader: turns source text into [`Datum`] trees with spans.

use super::{Datum, DatumKind, SourceSpan, SyntaxError};

struct Reader<'a> {
    file: &'a str,
    chars: Vec<char>,
    pos: usize,
    line: u32,
    column: u32,
}

impl<'a> Reader<'a> {
    fn new(file: &'a str, text: &str) -> Self {
        Reader {
            file,
            chars: text.chars().collect(),
            pos: 0,
            line: 1,
            column: 1,
        }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn here(&self, length: u32) -> SourceSpan {
        SourceSpan::new(self.file, self.line, self.column, length)
    }

    fn skip_trivia(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == ';' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn read_datum(&mut self) -> Result<Datum, SyntaxError> {
        self.skip_trivia();
        let span = self.here(1);
        match self.peek() {
            None => Err(SyntaxError::UnbalancedParens { span }),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_trivia();
                    match self.peek() {
                        None => return Err(SyntaxError::UnbalancedParens { span }),
                        Some(')') => {
                            self.bump();
                            return Ok(Datum {
                                kind: DatumKind::List(items),
                                span,
                            });
                        }
                        Some(_) => items.push(self.read_datum()?),
                    }
                }
            }
            Some(')') => Err(SyntaxError::UnbalancedParens { span }),
            Some('"') => self.read_string(span),
            Some('#') => self.read_hash(span),
            Some(_) => self.read_atom(span),
        }
    }

    fn read_string(&mut self, span: SourceSpan) -> Result<Datum, SyntaxError> {
        self.bump(); // opening quote
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err(SyntaxError::UnterminatedString { span }),
                Some('"') => {
                    return Ok(Datum {
                        kind: DatumKind::Str(out),
                        span,
                    })
                }
                Some('\\') => match self.bump() {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some('\\') => out.push('\\'),
                    Some('"') => out.push('"'),
                    Some(c) => out.push(c),
                    None => return Err(SyntaxError::UnterminatedString { span }),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn read_hash(&mut self, span: SourceSpan) -> Result<Datum, SyntaxError> {
        self.bump(); // '#'
        match self.bump() {
            Some('t') => Ok(Datum {
                kind: DatumKind::Bool(true),
                span,
            }),
            Some('f') => Ok(Datum {
                kind: DatumKind::Bool(false),
                span,
            }),
            _ => Err(SyntaxError::InvalidNumber {
                span,
                text: "#".to_string(),
            }),
        }
    }

    fn read_atom(&mut self, span: SourceSpan) -> Result<Datum, SyntaxError> {
        let mut text = String::new();
        while let Some(c) = self.peek() {
            if c.is_whitespace() || c == '(' || c == ')' || c == ';' || c == '"' {
                break;
            }
            text.push(c);
            self.bump();
        }
        let span = SourceSpan {
            length: text.chars().count() as u32,
            ..span
        };
        if looks_numeric(&text) {
            if let Ok(i) = text.parse::<i64>() {
                return Ok(Datum {
                    kind: DatumKind::Int(i),
                    span,
                });
            }
            if let Ok(f) = text.parse::<f64>() {
                return Ok(Datum {
                    kind: DatumKind::Float(f),
                    span,
                });
            }
            return Err(SyntaxError::InvalidNumber { span, text });
        }
        Ok(Datum {
            kind: DatumKind::Symbol(text),
            span,
        })
    }
}

/// An atom starting with a digit, or a sign/dot followed by a digit, must
/// parse as a number. Everything else is a symbol (`-`, `even?`, `<=`, ...).
fn looks_numeric(text: &str) -> bool {
    let mut chars = text.chars();
    match chars.next() {
        Some(c) if c.is_ascii_digit() => true,
        Some('+') | Some('-') | Some('.') => matches!(chars.next(), Some(c) if c.is_ascii_digit()),
        _ => false,
    }
}

/// Read every top-level datum from `text`. Line comments (`;` to end of line)
/// are stripped.
pub fn read_data(file: &str, text: &str) -> Result<Vec<Datum>, SyntaxError> {
    let mut reader = Reader::new(file, text);
    let mut data = Vec::new();
    loop {
        reader.skip_trivia();
        if reader.peek().is_none() {
            return Ok(data);
        }
        data.push(reader.read_datum()?);
    }
}
