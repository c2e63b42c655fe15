//! Deterministic extraction, parsing and checking of arithmetic claims
//! found in reasoning steps.

mod expr;

pub use expr::eval_expr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MathError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite result")]
    Overflow,
    #[error("formula json: {0}")]
    JsonParse(String),
    #[error("unknown comparison operator {0:?}")]
    UnknownOperator(String),
}

/// Comparison operator of an extracted formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "!=")]
    Ne,
}

impl CompareOp {
    pub fn parse(s: &str) -> Result<Self, MathError> {
        Ok(match s.trim() {
            "=" | "==" => CompareOp::Eq,
            "<" => CompareOp::Lt,
            ">" => CompareOp::Gt,
            "<=" => CompareOp::Le,
            ">=" => CompareOp::Ge,
            "!=" => CompareOp::Ne,
            other => return Err(MathError::UnknownOperator(other.to_string())),
        })
    }

    pub fn symbol(&self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Lt => "<",
            CompareOp::Gt => ">",
            CompareOp::Le => "<=",
            CompareOp::Ge => ">=",
            CompareOp::Ne => "!=",
        }
    }

    /// The operator satisfying `a op b == b mirror(op) a`.
    pub fn mirror(&self) -> CompareOp {
        match self {
            CompareOp::Eq => CompareOp::Eq,
            CompareOp::Ne => CompareOp::Ne,
            CompareOp::Lt => CompareOp::Gt,
            CompareOp::Gt => CompareOp::Lt,
            CompareOp::Le => CompareOp::Ge,
            CompareOp::Ge => CompareOp::Le,
        }
    }
}

/// Where a formula came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaOrigin {
    Marker,
    LlmJson,
}

/// One arithmetic claim: `lhs op rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Formula {
    pub lhs: String,
    pub op: CompareOp,
    pub rhs: String,
    pub origin: FormulaOrigin,
}

/// Comparison slack for formula checking. Values within tolerance count as
/// equal; the relative part scales with the larger operand magnitude so
/// mirrored comparisons agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        ToleranceSpec {
            abs_tol: 0.005,
            rel_tol: 1e-4,
        }
    }
}

impl ToleranceSpec {
    pub fn new(abs_tol: f64, rel_tol: f64) -> Result<Self, MathError> {
        if abs_tol < 0.0 || rel_tol < 0.0 || (abs_tol == 0.0 && rel_tol == 0.0) {
            return Err(MathError::Parse(
                "tolerances must be non-negative and not both zero".into(),
            ));
        }
        Ok(ToleranceSpec { abs_tol, rel_tol })
    }

    fn equal(&self, lhs: f64, rhs: f64) -> bool {
        let scale = 1f64.max(lhs.abs()).max(rhs.abs());
        (lhs - rhs).abs() <= self.abs_tol.max(self.rel_tol * scale)
    }
}

/// Result of scanning a text for `<<...>>` formula markers.
#[derive(Debug, Clone, Default)]
pub struct MarkerScan {
    pub formulas: Vec<Formula>,
    /// Marker spans without a comparison operator, skipped.
    pub skipped: Vec<String>,
}

// Longest operators first so "<=" wins over "<".
const OPERATORS: [&str; 6] = ["<=", ">=", "!=", "=", "<", ">"];

fn split_on_operator(body: &str) -> Option<(String, CompareOp, String)> {
    let bytes = body.as_bytes();
    for i in 0..bytes.len() {
        if !body.is_char_boundary(i) {
            continue;
        }
        for op in OPERATORS {
            if body[i..].starts_with(op) {
                let lhs = body[..i].trim();
                let rhs = body[i + op.len()..].trim();
                if lhs.is_empty() || rhs.is_empty() {
                    return None;
                }
                return Some((lhs.to_string(), CompareOp::parse(op).ok()?, rhs.to_string()));
            }
        }
    }
    None
}

/// Interpret a whole line as a single `lhs op rhs` claim, if it carries a
/// comparison operator.
pub fn parse_inline_formula(line: &str) -> Option<Formula> {
    split_on_operator(line.trim()).map(|(lhs, op, rhs)| Formula {
        lhs,
        op,
        rhs,
        origin: FormulaOrigin::Marker,
    })
}

/// Find every `<<...>>` span and split it into a formula on its comparison
/// operator. Malformed spans are recorded in `skipped`, never an error.
pub fn extract_marked_formulas(text: &str) -> MarkerScan {
    let mut scan = MarkerScan::default();
    let mut rest = text;
    while let Some(start) = rest.find("<<") {
        let after = &rest[start + 2..];
        let Some(end) = after.find(">>") else { break };
        let body = &after[..end];
        match split_on_operator(body) {
            Some((lhs, op, rhs)) => scan.formulas.push(Formula {
                lhs,
                op,
                rhs,
                origin: FormulaOrigin::Marker,
            }),
            None => scan.skipped.push(body.to_string()),
        }
        rest = &after[end + 2..];
    }
    scan
}

#[derive(Deserialize)]
struct RawFormula {
    lhs: String,
    op: String,
    rhs: String,
}

fn strip_code_fences(raw: &str) -> &str {
    let mut s = raw.trim();
    if let Some(body) = s.strip_prefix("```") {
        // Drop an optional language tag on the fence line.
        let body = body.strip_prefix("json").unwrap_or(body);
        s = body.trim_start();
    }
    if let Some(body) = s.strip_suffix("```") {
        s = body.trim_end();
    }
    s.trim()
}

/// Parse the extraction model's output into formulas. Accepts a bare JSON
/// array of {lhs, op, rhs} objects or the brace-wrapped variant `{[...]}`
/// that the shipped extraction exemplar uses.
pub fn parse_formula_json(raw: &str) -> Result<Vec<Formula>, MathError> {
    let mut s = strip_code_fences(raw);
    if s.starts_with("{[") && s.ends_with("]}") {
        s = s[1..s.len() - 1].trim();
    }
    let raw_formulas: Vec<RawFormula> =
        serde_json::from_str(s).map_err(|e| MathError::JsonParse(e.to_string()))?;
    raw_formulas
        .into_iter()
        .map(|r| {
            Ok(Formula {
                lhs: r.lhs,
                op: CompareOp::parse(&r.op)?,
                rhs: r.rhs,
                origin: FormulaOrigin::LlmJson,
            })
        })
        .collect()
}

/// Outcome of checking one formula. An unevaluable side yields
/// `holds = false` with the failure recorded in `error`.
#[derive(Debug, Clone, Serialize)]
pub struct FormulaCheck {
    pub formula: Formula,
    pub holds: bool,
    pub lhs_value: Option<f64>,
    pub rhs_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Evaluate both sides of a formula and compare them under `tol`.
pub fn check_formula(formula: &Formula, tol: &ToleranceSpec) -> FormulaCheck {
    let lhs = eval_expr(&formula.lhs);
    let rhs = eval_expr(&formula.rhs);
    match (lhs, rhs) {
        (Ok(l), Ok(r)) => {
            let eq = tol.equal(l, r);
            let holds = match formula.op {
                CompareOp::Eq => eq,
                CompareOp::Ne => !eq,
                CompareOp::Lt => !eq && l < r,
                CompareOp::Gt => !eq && l > r,
                CompareOp::Le => eq || l < r,
                CompareOp::Ge => eq || l > r,
            };
            FormulaCheck {
                formula: formula.clone(),
                holds,
                lhs_value: Some(l),
                rhs_value: Some(r),
                error: None,
            }
        }
        (lhs, rhs) => {
            let msg = match (&lhs, &rhs) {
                (Err(e), _) => format!("lhs: {e}"),
                (_, Err(e)) => format!("rhs: {e}"),
                _ => unreachable!(),
            };
            FormulaCheck {
                formula: formula.clone(),
                holds: false,
                lhs_value: lhs.ok(),
                rhs_value: rhs.ok(),
                error: Some(msg),
            }
        }
    }
}
