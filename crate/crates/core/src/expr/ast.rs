use std::collections::BTreeSet;
use std::fmt;

/// Half-open byte range `[start, end)` into the parsed source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub(crate) fn join(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    X,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Abs,
    Ln,
    Exp,
    Sqrt,
    Floor,
}

impl UnaryOp {
    pub(crate) fn from_name(name: &str) -> Option<UnaryOp> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "abs" => UnaryOp::Abs,
            "ln" => UnaryOp::Ln,
            "exp" => UnaryOp::Exp,
            "sqrt" => UnaryOp::Sqrt,
            "floor" => UnaryOp::Floor,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "-",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Abs => "abs",
            UnaryOp::Ln => "ln",
            UnaryOp::Exp => "exp",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Floor => "floor",
        }
    }
}

/// Infix operators and the two-argument functions `min`/`max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Min,
    Max,
}

impl BinaryOp {
    pub(crate) fn function_from_name(name: &str) -> Option<BinaryOp> {
        match name {
            "min" => Some(BinaryOp::Min),
            "max" => Some(BinaryOp::Max),
            _ => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => "+",
            BinaryOp::Sub => "-",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
            BinaryOp::Min => "min",
            BinaryOp::Max => "max",
        }
    }

    fn is_function(self) -> bool {
        matches!(self, BinaryOp::Min | BinaryOp::Max)
    }
}

#[derive(Debug, Clone)]
pub enum NodeKind {
    Constant(f64),
    Variable(Var),
    Parameter(String),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

/// An AST node. Equality is structural and ignores source spans.
#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub span: Span,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        match (&self.kind, &other.kind) {
            (NodeKind::Constant(a), NodeKind::Constant(b)) => a.to_bits() == b.to_bits(),
            (NodeKind::Variable(a), NodeKind::Variable(b)) => a == b,
            (NodeKind::Parameter(a), NodeKind::Parameter(b)) => a == b,
            (NodeKind::Unary(op_a, a), NodeKind::Unary(op_b, b)) => op_a == op_b && a == b,
            (NodeKind::Binary(op_a, la, ra), NodeKind::Binary(op_b, lb, rb)) => {
                op_a == op_b && la == lb && ra == rb
            }
            _ => false,
        }
    }
}

impl Node {
    pub fn new(kind: NodeKind, span: Span) -> Self {
        Node { kind, span }
    }

    pub fn constant(value: f64) -> Self {
        Node::new(NodeKind::Constant(value), Span::default())
    }

    pub fn var(var: Var) -> Self {
        Node::new(NodeKind::Variable(var), Span::default())
    }

    pub fn param(name: impl Into<String>) -> Self {
        Node::new(NodeKind::Parameter(name.into()), Span::default())
    }

    pub fn unary(op: UnaryOp, arg: Node) -> Self {
        let span = arg.span;
        Node::new(NodeKind::Unary(op, Box::new(arg)), span)
    }

    pub fn binary(op: BinaryOp, lhs: Node, rhs: Node) -> Self {
        let span = lhs.span.join(rhs.span);
        Node::new(NodeKind::Binary(op, Box::new(lhs), Box::new(rhs)), span)
    }

    fn map(&self, f: &impl Fn(&Node) -> Option<Node>) -> Node {
        if let Some(replacement) = f(self) {
            return replacement;
        }
        let kind = match &self.kind {
            NodeKind::Unary(op, a) => NodeKind::Unary(*op, Box::new(a.map(f))),
            NodeKind::Binary(op, a, b) => {
                NodeKind::Binary(*op, Box::new(a.map(f)), Box::new(b.map(f)))
            }
            leaf => leaf.clone(),
        };
        Node::new(kind, self.span)
    }

    fn visit(&self, f: &mut impl FnMut(&Node)) {
        f(self);
        match &self.kind {
            NodeKind::Unary(_, a) => a.visit(f),
            NodeKind::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            NodeKind::Constant(c) if *c < 0.0 => write!(f, "(-{:?})", -c),
            NodeKind::Constant(c) => write!(f, "{c:?}"),
            NodeKind::Variable(Var::T) => f.write_str("t"),
            NodeKind::Variable(Var::X) => f.write_str("x"),
            NodeKind::Parameter(name) => f.write_str(name),
            NodeKind::Unary(UnaryOp::Neg, a) => write!(f, "(-{a})"),
            NodeKind::Unary(op, a) => write!(f, "{}({a})", op.name()),
            NodeKind::Binary(op, a, b) if op.is_function() => {
                write!(f, "{}({a}, {b})", op.symbol())
            }
            NodeKind::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}

/// A parsed expression. Immutable once built; transformations return new
/// expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    pub root: Node,
}

impl Expression {
    pub fn new(root: Node) -> Self {
        Expression { root }
    }

    /// Names of all free parameters, sorted.
    pub fn parameters(&self) -> BTreeSet<String> {
        let mut names = BTreeSet::new();
        self.root.visit(&mut |n| {
            if let NodeKind::Parameter(p) = &n.kind {
                names.insert(p.clone());
            }
        });
        names
    }

    pub fn uses(&self, var: Var) -> bool {
        let mut found = false;
        self.root.visit(&mut |n| {
            if matches!(n.kind, NodeKind::Variable(v) if v == var) {
                found = true;
            }
        });
        found
    }

    /// Replaces every parameter found in `bindings` by a constant, keeping the
    /// parameter's span for error reporting.
    pub fn bind(&self, bindings: &[(&str, f64)]) -> Expression {
        Expression::new(self.root.map(&|n| {
            match &n.kind {
                NodeKind::Parameter(p) => bindings
                    .iter()
                    .find(|(name, _)| name == p)
                    .map(|&(_, v)| Node::new(NodeKind::Constant(v), n.span)),
                _ => None,
            }
        }))
    }

    /// Substitutes `replacement` for the time variable.
    pub fn substitute_time(&self, replacement: &Node) -> Expression {
        Expression::new(self.root.map(&|n| match n.kind {
            NodeKind::Variable(Var::T) => {
                let mut r = replacement.clone();
                r.span = n.span;
                Some(r)
            }
            _ => None,
        }))
    }

    /// `f(t + h, x)`.
    pub fn shift_time(&self, h: f64) -> Expression {
        if h == 0.0 {
            return self.clone();
        }
        let shifted = if h > 0.0 {
            Node::binary(BinaryOp::Add, Node::var(Var::T), Node::constant(h))
        } else {
            Node::binary(BinaryOp::Sub, Node::var(Var::T), Node::constant(-h))
        };
        self.substitute_time(&shifted)
    }

    /// `c * self`.
    pub fn scaled(&self, c: f64) -> Expression {
        Expression::new(Node::binary(
            BinaryOp::Mul,
            Node::constant(c),
            self.root.clone(),
        ))
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}
