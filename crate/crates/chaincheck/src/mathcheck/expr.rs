//! Arithmetic expression evaluation by precedence climbing.
//!
//! Grammar: numbers (optional leading `$`, embedded thousands commas,
//! optional trailing `%` meaning x0.01, decimals), binary `+ - * / ^` with
//! the aliases `x`, `×` for `*` and `÷` for `/`, unary minus, and
//! parentheses. `^` is right-associative and binds tightest, then unary
//! minus, then `* /`, then `+ -`. No implicit multiplication.

use super::MathError;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Token {
    Number(f64),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(expr: &str) -> Result<Vec<Token>, MathError> {
    let chars: Vec<char> = expr.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ch if ch.is_whitespace() => i += 1,
            '+' => {
                tokens.push(Token::Plus);
                i += 1;
            }
            '-' | '−' => {
                tokens.push(Token::Minus);
                i += 1;
            }
            '*' | 'x' | 'X' | '×' => {
                tokens.push(Token::Star);
                i += 1;
            }
            '/' | '÷' => {
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
            '$' => {
                // Currency marker: must introduce a number.
                match chars.get(i + 1) {
                    Some(n) if n.is_ascii_digit() || *n == '.' => i += 1,
                    _ => {
                        return Err(MathError::Parse(format!(
                            "'$' not followed by a number at offset {i} in {expr:?}"
                        )))
                    }
                }
            }
            ch if ch.is_ascii_digit() || ch == '.' => {
                let (value, next) = lex_number(&chars, i, expr)?;
                tokens.push(Token::Number(value));
                i = next;
            }
            other => {
                return Err(MathError::Parse(format!(
                    "unexpected character {other:?} at offset {i} in {expr:?}"
                )))
            }
        }
    }
    Ok(tokens)
}

fn lex_number(chars: &[char], start: usize, expr: &str) -> Result<(f64, usize), MathError> {
    let mut i = start;
    let mut digits = String::new();
    let mut seen_dot = false;
    while i < chars.len() {
        let c = chars[i];
        if c.is_ascii_digit() {
            digits.push(c);
            i += 1;
        } else if c == ',' && !seen_dot {
            // Thousands separator: only valid between digits.
            let prev_digit = i > start && chars[i - 1].is_ascii_digit();
            let next_digit = chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
            if prev_digit && next_digit {
                i += 1;
            } else {
                break;
            }
        } else if c == '.' && !seen_dot {
            seen_dot = true;
            digits.push(c);
            i += 1;
        } else {
            break;
        }
    }
    let mut value: f64 = digits
        .parse()
        .map_err(|_| MathError::Parse(format!("bad number {digits:?} in {expr:?}")))?;
    if chars.get(i) == Some(&'%') {
        value *= 0.01;
        i += 1;
    }
    Ok((value, i))
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

// Binding powers; right-associativity falls out of re-entering with a
// lower minimum than the operator's own left power.
const ADD_BP: (u8, u8) = (10, 11);
const MUL_BP: (u8, u8) = (20, 21);
const UNARY_BP: u8 = 26;
const POW_BP: (u8, u8) = (31, 30);

impl Parser {
    fn peek(&self) -> Option<Token> {
        self.tokens.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<Token> {
        let t = self.peek();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn parse_expr(&mut self, min_bp: u8) -> Result<f64, MathError> {
        let mut lhs = match self.bump() {
            Some(Token::Number(n)) => n,
            Some(Token::Minus) => -self.parse_expr(UNARY_BP)?,
            Some(Token::LParen) => {
                let inner = self.parse_expr(0)?;
                match self.bump() {
                    Some(Token::RParen) => inner,
                    _ => return Err(MathError::Parse("missing closing parenthesis".into())),
                }
            }
            other => return Err(MathError::Parse(format!("expected a value, got {other:?}"))),
        };
        loop {
            let (l_bp, r_bp, op) = match self.peek() {
                Some(Token::Plus) => (ADD_BP.0, ADD_BP.1, Token::Plus),
                Some(Token::Minus) => (ADD_BP.0, ADD_BP.1, Token::Minus),
                Some(Token::Star) => (MUL_BP.0, MUL_BP.1, Token::Star),
                Some(Token::Slash) => (MUL_BP.0, MUL_BP.1, Token::Slash),
                Some(Token::Caret) => (POW_BP.0, POW_BP.1, Token::Caret),
                Some(Token::RParen) | None => break,
                Some(other) => return Err(MathError::Parse(format!("unexpected token {other:?}"))),
            };
            if l_bp < min_bp {
                break;
            }
            self.bump();
            let rhs = self.parse_expr(r_bp)?;
            lhs = apply(op, lhs, rhs)?;
        }
        Ok(lhs)
    }
}

fn apply(op: Token, lhs: f64, rhs: f64) -> Result<f64, MathError> {
    let value = match op {
        Token::Plus => lhs + rhs,
        Token::Minus => lhs - rhs,
        Token::Star => lhs * rhs,
        Token::Slash => {
            if rhs == 0.0 {
                return Err(MathError::DivisionByZero);
            }
            lhs / rhs
        }
        Token::Caret => lhs.powf(rhs),
        _ => unreachable!("apply called with non-operator"),
    };
    if !value.is_finite() {
        return Err(MathError::Overflow);
    }
    Ok(value)
}

/// Evaluate an arithmetic expression string to a double.
pub fn eval_expr(expr: &str) -> Result<f64, MathError> {
    let tokens = tokenize(expr)?;
    if tokens.is_empty() {
        return Err(MathError::Parse(format!("empty expression {expr:?}")));
    }
    let mut parser = Parser { tokens, pos: 0 };
    let value = parser.parse_expr(0)?;
    if parser.pos != parser.tokens.len() {
        return Err(MathError::Parse(format!(
            "trailing input after expression in {expr:?}"
        )));
    }
    if !value.is_finite() {
        return Err(MathError::Overflow);
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_subtraction() {
        assert_eq!(eval_expr("87-32").unwrap(), 55.0);
    }

    #[test]
    fn figure_total() {
        assert_eq!(eval_expr("12*40-(12-10)*40*0.05").unwrap(), 476.0);
    }

    #[test]
    fn currency_and_commas() {
        assert_eq!(eval_expr("$1,200/4").unwrap(), 300.0);
        assert_eq!(eval_expr("1,200,000").unwrap(), 1_200_000.0);
    }

    #[test]
    fn percent_binds_to_preceding_number() {
        assert_eq!(eval_expr("50%").unwrap(), 0.5);
        assert_eq!(eval_expr("200*5%").unwrap(), 10.0);
    }

    #[test]
    fn multiplication_aliases() {
        assert_eq!(eval_expr("6x7").unwrap(), 42.0);
        assert_eq!(eval_expr("6×7").unwrap(), 42.0);
        assert_eq!(eval_expr("84÷2").unwrap(), 42.0);
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(eval_expr("2+3*4").unwrap(), 14.0);
        assert_eq!(eval_expr("2^3^2").unwrap(), 512.0); // right-assoc
        assert_eq!(eval_expr("8-3-2").unwrap(), 3.0); // left-assoc
        assert_eq!(eval_expr("-2^2").unwrap(), -4.0); // ^ above unary minus
        assert_eq!(eval_expr("2^-1").unwrap(), 0.5);
        assert_eq!(eval_expr("(2+3)*4").unwrap(), 20.0);
        assert_eq!(eval_expr("--3").unwrap(), 3.0);
    }

    #[test]
    fn division_by_zero() {
        assert!(matches!(eval_expr("1/0"), Err(MathError::DivisionByZero)));
        assert!(matches!(
            eval_expr("1/(2-2)"),
            Err(MathError::DivisionByZero)
        ));
    }

    #[test]
    fn overflow_is_error() {
        assert!(matches!(eval_expr("10^10^10"), Err(MathError::Overflow)));
    }

    #[test]
    fn no_implicit_multiplication() {
        assert!(matches!(eval_expr("2(3+4)"), Err(MathError::Parse(_))));
    }

    #[test]
    fn rejects_garbage() {
        assert!(eval_expr("").is_err());
        assert!(eval_expr("1+").is_err());
        assert!(eval_expr("(1").is_err());
        assert!(eval_expr("a dozen").is_err());
        assert!(eval_expr("$ hello").is_err());
    }
}
