use std::fmt;

use super::ast::{BinaryOp, Expression, Node, NodeKind, Span, UnaryOp, Var};

/// Variable values and parameter bindings for one evaluation.
#[derive(Debug, Clone, Copy)]
pub struct EvalContext<'a> {
    pub t: f64,
    pub x: f64,
    pub params: &'a [(&'a str, f64)],
}

impl<'a> EvalContext<'a> {
    pub fn new(t: f64, x: f64) -> Self {
        EvalContext { t, x, params: &[] }
    }

    pub fn with_params(mut self, params: &'a [(&'a str, f64)]) -> Self {
        self.params = params;
        self
    }

    fn param(&self, name: &str) -> Option<f64> {
        self.params
            .iter()
            .find(|(n, _)| *n == name)
            .map(|&(_, v)| v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EvalErrorKind {
    UnboundParameter(String),
    DivisionByZero,
    LogOfNonPositive(f64),
    SqrtOfNegative(f64),
    ZeroToNegativePower(f64),
    FractionalPowerOfNegative { base: f64, exponent: f64 },
    NonFinite,
}

/// An evaluation failure, located by the offending node's source span.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub struct EvalError {
    pub span: Span,
    pub kind: EvalErrorKind,
}

impl fmt::Display for EvalError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "domain error at bytes {}..{}: ",
            self.span.start, self.span.end
        )?;
        match &self.kind {
            EvalErrorKind::UnboundParameter(p) => write!(f, "parameter `{p}` is not bound"),
            EvalErrorKind::DivisionByZero => f.write_str("division by zero"),
            EvalErrorKind::LogOfNonPositive(v) => write!(f, "ln of non-positive value {v}"),
            EvalErrorKind::SqrtOfNegative(v) => write!(f, "sqrt of negative value {v}"),
            EvalErrorKind::ZeroToNegativePower(p) => write!(f, "0 raised to negative power {p}"),
            EvalErrorKind::FractionalPowerOfNegative { base, exponent } => {
                write!(
                    f,
                    "negative base {base} raised to non-integer power {exponent}"
                )
            }
            EvalErrorKind::NonFinite => f.write_str("result is not finite"),
        }
    }
}

impl Expression {
    /// Evaluates in IEEE double precision. Pure and deterministic.
    pub fn eval(&self, ctx: &EvalContext<'_>) -> Result<f64, EvalError> {
        eval_node(&self.root, ctx)
    }
}

fn fail(node: &Node, kind: EvalErrorKind) -> EvalError {
    EvalError {
        span: node.span,
        kind,
    }
}

fn eval_node(node: &Node, ctx: &EvalContext<'_>) -> Result<f64, EvalError> {
    let value = match &node.kind {
        NodeKind::Constant(c) => return Ok(*c),
        NodeKind::Variable(Var::T) => return Ok(ctx.t),
        NodeKind::Variable(Var::X) => return Ok(ctx.x),
        NodeKind::Parameter(name) => {
            return ctx
                .param(name)
                .ok_or_else(|| fail(node, EvalErrorKind::UnboundParameter(name.clone())))
        }
        NodeKind::Unary(op, arg) => {
            let a = eval_node(arg, ctx)?;
            match op {
                UnaryOp::Neg => -a,
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Abs => a.abs(),
                UnaryOp::Ln if a <= 0.0 => {
                    return Err(fail(node, EvalErrorKind::LogOfNonPositive(a)))
                }
                UnaryOp::Ln => a.ln(),
                UnaryOp::Exp => a.exp(),
                UnaryOp::Sqrt if a < 0.0 => {
                    return Err(fail(node, EvalErrorKind::SqrtOfNegative(a)))
                }
                UnaryOp::Sqrt => a.sqrt(),
                UnaryOp::Floor => a.floor(),
            }
        }
        NodeKind::Binary(op, lhs, rhs) => {
            let a = eval_node(lhs, ctx)?;
            let b = eval_node(rhs, ctx)?;
            match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div if b == 0.0 => return Err(fail(node, EvalErrorKind::DivisionByZero)),
                BinaryOp::Div => a / b,
                BinaryOp::Pow => power(node, a, b)?,
                BinaryOp::Min => a.min(b),
                BinaryOp::Max => a.max(b),
            }
        }
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(fail(node, EvalErrorKind::NonFinite))
    }
}

fn power(node: &Node, base: f64, exponent: f64) -> Result<f64, EvalError> {
    if base == 0.0 && exponent < 0.0 {
        return Err(fail(node, EvalErrorKind::ZeroToNegativePower(exponent)));
    }
    if base < 0.0 && exponent.fract() != 0.0 {
        return Err(fail(
            node,
            EvalErrorKind::FractionalPowerOfNegative { base, exponent },
        ));
    }
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        return Ok(base.powi(exponent as i32));
    }
    Ok(base.powf(exponent))
}
