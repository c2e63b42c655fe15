//! Naive recursive-descent evaluator over the same expression grammar,
//! kept independent of the library's precedence-climbing implementation so
//! the two can cross-check each other.

#![allow(dead_code)]

#[derive(Debug, PartialEq, Eq)]
pub enum RefError {
    Parse,
    DivByZero,
    Overflow,
}

pub struct Scanner {
    chars: Vec<char>,
    pos: usize,
}

impl Scanner {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn number(&mut self) -> Result<f64, RefError> {
        self.skip_ws();
        if self.peek() == Some('$') {
            self.pos += 1;
            match self.chars.get(self.pos) {
                Some(c) if c.is_ascii_digit() || *c == '.' => {}
                _ => return Err(RefError::Parse),
            }
        }
        let mut digits = String::new();
        let mut seen_dot = false;
        let start = self.pos;
        while let Some(&c) = self.chars.get(self.pos) {
            if c.is_ascii_digit() {
                digits.push(c);
                self.pos += 1;
            } else if c == ',' && !seen_dot {
                let prev = self.pos > start && self.chars[self.pos - 1].is_ascii_digit();
                let next = self
                    .chars
                    .get(self.pos + 1)
                    .is_some_and(|n| n.is_ascii_digit());
                if prev && next {
                    self.pos += 1;
                } else {
                    break;
                }
            } else if c == '.' && !seen_dot {
                seen_dot = true;
                digits.push(c);
                self.pos += 1;
            } else {
                break;
            }
        }
        let mut value: f64 = digits.parse().map_err(|_| RefError::Parse)?;
        if self.chars.get(self.pos) == Some(&'%') {
            value *= 0.01;
            self.pos += 1;
        }
        Ok(value)
    }
}

fn finite(v: f64) -> Result<f64, RefError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(RefError::Overflow)
    }
}

// expr := term (('+'|'-') term)*
fn expr(s: &mut Scanner) -> Result<f64, RefError> {
    let mut acc = term(s)?;
    loop {
        match s.peek() {
            Some('+') => {
                s.bump();
                acc = finite(acc + term(s)?)?;
            }
            Some('-') | Some('−') => {
                s.bump();
                acc = finite(acc - term(s)?)?;
            }
            _ => break,
        }
    }
    Ok(acc)
}

// term := unary (('*'|'/') unary)*
fn term(s: &mut Scanner) -> Result<f64, RefError> {
    let mut acc = unary(s)?;
    loop {
        match s.peek() {
            Some('*') | Some('x') | Some('X') | Some('×') => {
                s.bump();
                acc = finite(acc * unary(s)?)?;
            }
            Some('/') | Some('÷') => {
                s.bump();
                let rhs = unary(s)?;
                if rhs == 0.0 {
                    return Err(RefError::DivByZero);
                }
                acc = finite(acc / rhs)?;
            }
            _ => break,
        }
    }
    Ok(acc)
}

// unary := '-' unary | power
fn unary(s: &mut Scanner) -> Result<f64, RefError> {
    if matches!(s.peek(), Some('-') | Some('−')) {
        s.bump();
        return Ok(-unary(s)?);
    }
    power(s)
}

// power := atom ('^' ('-')* power)?   (right-associative)
fn power(s: &mut Scanner) -> Result<f64, RefError> {
    let base = atom(s)?;
    if s.peek() == Some('^') {
        s.bump();
        let mut negations = 0;
        while matches!(s.peek(), Some('-') | Some('−')) {
            s.bump();
            negations += 1;
        }
        let mut exponent = power(s)?;
        if negations % 2 == 1 {
            exponent = -exponent;
        }
        return finite(base.powf(exponent));
    }
    Ok(base)
}

fn atom(s: &mut Scanner) -> Result<f64, RefError> {
    match s.peek() {
        Some('(') => {
            s.bump();
            let inner = expr(s)?;
            if s.bump() != Some(')') {
                return Err(RefError::Parse);
            }
            Ok(inner)
        }
        Some(c) if c.is_ascii_digit() || c == '.' || c == '$' => s.number(),
        _ => Err(RefError::Parse),
    }
}

pub fn eval(input: &str) -> Result<f64, RefError> {
    let mut scanner = Scanner {
        chars: input.chars().collect(),
        pos: 0,
    };
    let value = expr(&mut scanner)?;
    scanner.skip_ws();
    if scanner.pos != scanner.chars.len() {
        return Err(RefError::Parse);
    }
    finite(value)
}
