use std::fmt;

/// Binary operators of the symbol grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Named functions callable from a symbol expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sinh,
    Cosh,
    Tanh,
    Pow,
}

impl Func {
    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sinh" => Func::Sinh,
            "cosh" => Func::Cosh,
            "tanh" => Func::Tanh,
            "pow" => Func::Pow,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sinh => "sinh",
            Func::Cosh => "cosh",
            Func::Tanh => "tanh",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Pow => 2,
            _ => 1,
        }
    }
}

/// Parsed closed-form symbol in the single variable `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Expr {
        Expr::Binary(op, Box::new(lhs), Box::new(rhs))
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, vec![arg])
    }

    /// `1 / self`.
    pub fn reciprocal(&self) -> Expr {
        Expr::binary(BinOp::Div, Expr::Num(1.0), self.clone())
    }

    /// `log(self)`.
    pub fn ln(&self) -> Expr {
        Expr::call(Func::Log, self.clone())
    }

    /// `c * self`.
    pub fn scaled(&self, c: f64) -> Expr {
        Expr::binary(BinOp::Mul, Expr::Num(c), self.clone())
    }

    /// Number of nodes in the tree.
    pub fn size(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var => 1,
            Expr::Neg(a) => 1 + a.size(),
            Expr::Binary(_, a, b) => 1 + a.size() + b.size(),
            Expr::Call(_, args) => 1 + args.iter().map(Expr::size).sum::<usize>(),
        }
    }

    /// Integer value of a literal exponent (`3`, `-2`), if the node is one.
    pub(crate) fn integer_literal(&self) -> Option<i32> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Neg(inner) => match **inner {
                Expr::Num(v) => -v,
                _ => return None,
            },
            _ => return None,
        };
        if v.fract() == 0.0 && v.abs() <= 1024.0 {
            Some(v as i32)
        } else {
            None
        }
    }
}

// Printing levels follow the grammar: expr < term < factor < power/atom.
const LEVEL_EXPR: u8 = 0;
const LEVEL_TERM: u8 = 1;
const LEVEL_FACTOR: u8 = 2;
const LEVEL_ATOM: u8 = 3;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Num(v) if *v < 0.0 => LEVEL_EXPR,
        Expr::Num(_) | Expr::Var | Expr::Call(..) => LEVEL_ATOM,
        Expr::Neg(_) => LEVEL_FACTOR,
        Expr::Binary(BinOp::Pow, ..) => LEVEL_FACTOR,
        Expr::Binary(BinOp::Mul | BinOp::Div, ..) => LEVEL_TERM,
        Expr::Binary(BinOp::Add | BinOp::Sub, ..) => LEVEL_EXPR,
    }
}

fn write_at(f: &mut fmt::Formatter<'_>, e: &Expr, min_level: u8) -> fmt::Result {
    if level(e) < min_level {
        write!(f, "(")?;
        write_expr(f, e)?;
        write!(f, ")")
    } else {
        write_expr(f, e)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expr) -> fmt::Result {
    match e {
        Expr::Num(v) => write!(f, "{v}"),
        Expr::Var => write!(f, "x"),
        Expr::Neg(a) => {
            write!(f, "-")?;
            // the operand of unary minus is a `power`, so a nested minus needs parentheses
            match **a {
                Expr::Neg(_) => {
                    write!(f, "(")?;
                    write_expr(f, a)?;
                    write!(f, ")")
                }
                _ => write_at(f, a, LEVEL_FACTOR),
            }
        }
        Expr::Binary(op, a, b) => match op {
            BinOp::Add | BinOp::Sub => {
                write_at(f, a, LEVEL_EXPR)?;
                write!(f, " {} ", if *op == BinOp::Add { "+" } else { "-" })?;
                write_at(f, b, LEVEL_TERM)
            }
            BinOp::Mul | BinOp::Div => {
                write_at(f, a, LEVEL_TERM)?;
                write!(f, "{}", if *op == BinOp::Mul { "*" } else { "/" })?;
                write_at(f, b, LEVEL_FACTOR)
            }
            BinOp::Pow => {
                write_at(f, a, LEVEL_ATOM)?;
                write!(f, "^")?;
                write_at(f, b, LEVEL_FACTOR)
            }
        },
        Expr::Call(func, args) => {
            write!(f, "{}(", func.name())?;
            for (i, arg) in args.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write_expr(f, arg)?;
            }
            write!(f, ")")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}
