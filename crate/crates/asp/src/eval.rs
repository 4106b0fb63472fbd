//! Ground evaluation of terms and comparisons.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::syntax::{ArithOp, CompOp, Comparison, Term};
use crate::value::Value;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("type error: {0}")]
    TypeError(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("integer overflow")]
    Overflow,
    #[error("variable `{0}` is unbound")]
    Unbound(String),
}

/// Variable assignment used during evaluation.
pub type Binding = BTreeMap<String, Value>;

/// Anything that can answer "what is this variable bound to".
pub trait VarLookup {
    fn lookup(&self, var: &str) -> Option<&Value>;
}

impl VarLookup for Binding {
    fn lookup(&self, var: &str) -> Option<&Value> {
        self.get(var)
    }
}

pub fn evaluate_term(t: &Term, b: &impl VarLookup) -> Result<Value, EvalError> {
    match t {
        Term::Int(i) => Ok(Value::Int(*i)),
        Term::Str(s) => Ok(Value::str(s)),
        Term::Var(v) => b
            .lookup(v)
            .cloned()
            .ok_or_else(|| EvalError::Unbound(v.clone())),
        Term::Abs(inner) => {
            let v = int_operand(evaluate_term(inner, b)?, "|...|")?;
            v.checked_abs().map(Value::Int).ok_or(EvalError::Overflow)
        }
        Term::Arith(op, l, r) => {
            let x = int_operand(evaluate_term(l, b)?, op.symbol())?;
            let y = int_operand(evaluate_term(r, b)?, op.symbol())?;
            let out = match op {
                ArithOp::Add => x.checked_add(y),
                ArithOp::Sub => x.checked_sub(y),
                ArithOp::Mul => x.checked_mul(y),
                ArithOp::Div | ArithOp::Rem if y == 0 => return Err(EvalError::DivisionByZero),
                // i64 division already truncates toward zero and the
                // remainder takes the dividend's sign
                ArithOp::Div => x.checked_div(y),
                ArithOp::Rem => x.checked_rem(y),
            };
            out.map(Value::Int).ok_or(EvalError::Overflow)
        }
        Term::Tuple(_) => Err(EvalError::TypeError(
            "a tuple has no value outside a comparison".into(),
        )),
    }
}

fn int_operand(v: Value, op: &str) -> Result<i64, EvalError> {
    match v {
        Value::Int(i) => Ok(i),
        Value::Str(s) => Err(EvalError::TypeError(format!(
            "arithmetic `{op}` applied to string \"{s}\""
        ))),
    }
}

pub fn evaluate_comparison(c: &Comparison, b: &impl VarLookup) -> Result<bool, EvalError> {
    match (&c.lhs, &c.rhs) {
        (Term::Tuple(ls), Term::Tuple(rs)) => {
            if ls.len() != rs.len() {
                return Err(EvalError::TypeError(format!(
                    "tuples of length {} and {} compared",
                    ls.len(),
                    rs.len()
                )));
            }
            let equal_op = match c.op {
                CompOp::Eq => true,
                CompOp::Ne => false,
                op => {
                    return Err(EvalError::TypeError(format!(
                        "tuples cannot be ordered with `{}`",
                        op.symbol()
                    )))
                }
            };
            // componentwise; every component is evaluated so type errors surface
            let mut all_equal = true;
            for (l, r) in ls.iter().zip(rs) {
                let l = evaluate_term(l, b)?;
                let r = evaluate_term(r, b)?;
                all_equal &= values_equal(&l, &r)?;
            }
            Ok(all_equal == equal_op)
        }
        (Term::Tuple(_), _) | (_, Term::Tuple(_)) => Err(EvalError::TypeError(
            "a tuple can only be compared with a tuple".into(),
        )),
        (l, r) => {
            let l = evaluate_term(l, b)?;
            let r = evaluate_term(r, b)?;
            compare_values(&l, c.op, &r)
        }
    }
}

fn values_equal(l: &Value, r: &Value) -> Result<bool, EvalError> {
    match (l, r) {
        (Value::Int(x), Value::Int(y)) => Ok(x == y),
        (Value::Str(x), Value::Str(y)) => Ok(x == y),
        _ => Err(EvalError::TypeError(format!(
            "cannot compare {} {l} with {} {r}",
            l.sort_name(),
            r.sort_name()
        ))),
    }
}

fn compare_values(l: &Value, op: CompOp, r: &Value) -> Result<bool, EvalError> {
    match op {
        CompOp::Eq => values_equal(l, r),
        CompOp::Ne => values_equal(l, r).map(|e| !e),
        _ => match (l, r) {
            (Value::Int(x), Value::Int(y)) => Ok(match op {
                CompOp::Lt => x < y,
                CompOp::Gt => x > y,
                CompOp::Le => x <= y,
                CompOp::Ge => x >= y,
                CompOp::Eq | CompOp::Ne => unreachable!(),
            }),
            _ => Err(EvalError::TypeError(format!(
                "`{}` is only defined on integers, got {l} and {r}",
                op.symbol()
            ))),
        },
    }
}
