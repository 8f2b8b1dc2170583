//! Closed-form scalar profiles in `(x1, x2)`.
//!
//! Metric presets are written as small expression trees so that every partial
//! derivative is available analytically: evaluation on jet inputs yields the
//! full truncated Taylor expansion, and evaluation on a composed jet (for
//! instance a change of normal variable) yields the expansion of the
//! composition.

use std::ops;
use std::sync::Arc;

use crate::error::Result;
use crate::jet::Jet2;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Const(f64),
    X1,
    X2,
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Exp(Expr),
    Ln(Expr),
    Pow(Expr, f64),
    Cos(Expr),
    Sin(Expr),
}

/// Immutable, cheaply clonable expression.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    fn node(n: Node) -> Self {
        Expr(Arc::new(n))
    }

    pub fn constant(v: f64) -> Self {
        Self::node(Node::Const(v))
    }

    pub fn x1() -> Self {
        Self::node(Node::X1)
    }

    pub fn x2() -> Self {
        Self::node(Node::X2)
    }

    pub fn exp(&self) -> Self {
        Self::node(Node::Exp(self.clone()))
    }

    pub fn ln(&self) -> Self {
        Self::node(Node::Ln(self.clone()))
    }

    pub fn powf(&self, p: f64) -> Self {
        Self::node(Node::Pow(self.clone(), p))
    }

    pub fn sqrt(&self) -> Self {
        self.powf(0.5)
    }

    pub fn cos(&self) -> Self {
        Self::node(Node::Cos(self.clone()))
    }

    pub fn sin(&self) -> Self {
        Self::node(Node::Sin(self.clone()))
    }

    pub fn as_constant(&self) -> Option<f64> {
        match *self.0 {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn depends_on_x1(&self) -> bool {
        match &*self.0 {
            Node::Const(_) | Node::X2 => false,
            Node::X1 => true,
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.depends_on_x1() || b.depends_on_x1()
            }
            Node::Neg(a) | Node::Exp(a) | Node::Ln(a) | Node::Pow(a, _) | Node::Cos(a) | Node::Sin(a) => {
                a.depends_on_x1()
            }
        }
    }

    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        match &*self.0 {
            Node::Const(v) => *v,
            Node::X1 => x1,
            Node::X2 => x2,
            Node::Add(a, b) => a.eval(x1, x2) + b.eval(x1, x2),
            Node::Sub(a, b) => a.eval(x1, x2) - b.eval(x1, x2),
            Node::Mul(a, b) => a.eval(x1, x2) * b.eval(x1, x2),
            Node::Div(a, b) => a.eval(x1, x2) / b.eval(x1, x2),
            Node::Neg(a) => -a.eval(x1, x2),
            Node::Exp(a) => a.eval(x1, x2).exp(),
            Node::Ln(a) => a.eval(x1, x2).ln(),
            Node::Pow(a, p) => a.eval(x1, x2).powf(*p),
            Node::Cos(a) => a.eval(x1, x2).cos(),
            Node::Sin(a) => a.eval(x1, x2).sin(),
        }
    }

    /// Evaluate with jet-valued arguments.
    pub fn eval_jet(&self, x1: &Jet2, x2: &Jet2) -> Result<Jet2> {
        let order = x1.order().min(x2.order());
        Ok(match &*self.0 {
            Node::Const(v) => Jet2::constant(*v, order),
            Node::X1 => x1.clone(),
            Node::X2 => x2.clone(),
            Node::Add(a, b) => &a.eval_jet(x1, x2)? + &b.eval_jet(x1, x2)?,
            Node::Sub(a, b) => &a.eval_jet(x1, x2)? - &b.eval_jet(x1, x2)?,
            Node::Mul(a, b) => &a.eval_jet(x1, x2)? * &b.eval_jet(x1, x2)?,
            Node::Div(a, b) => &a.eval_jet(x1, x2)? * &b.eval_jet(x1, x2)?.recip()?,
            Node::Neg(a) => -&a.eval_jet(x1, x2)?,
            Node::Exp(a) => a.eval_jet(x1, x2)?.exp()?,
            Node::Ln(a) => a.eval_jet(x1, x2)?.ln()?,
            Node::Pow(a, p) => {
                let base = a.eval_jet(x1, x2)?;
                if p.fract() == 0.0 && *p >= 0.0 {
                    let mut acc = Jet2::constant(1.0, base.order());
                    for _ in 0..(*p as u32) {
                        acc = &acc * &base;
                    }
                    acc
                } else {
                    base.powf(*p)?
                }
            }
            Node::Cos(a) => a.eval_jet(x1, x2)?.cos_sin()?.0,
            Node::Sin(a) => a.eval_jet(x1, x2)?.cos_sin()?.1,
        })
    }

    /// Taylor jet of the expression at a point.
    pub fn jet_at(&self, x1: f64, x2: f64, order: i32) -> Result<Jet2> {
        self.eval_jet(&Jet2::var1(x1, order), &Jet2::var2(x2, order))
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $node:ident) => {
        impl ops::$tr for Expr {
            type Output = Expr;
            fn $f(self, rhs: Expr) -> Expr {
                Expr::node(Node::$node(self, rhs))
            }
        }
        impl ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $f(self, rhs: f64) -> Expr {
                Expr::node(Node::$node(self, Expr::constant(rhs)))
            }
        }
        impl ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $f(self, rhs: Expr) -> Expr {
                Expr::node(Node::$node(Expr::constant(self), rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::node(Node::Neg(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn jets_match_centered_differences() {
        let z = Expr::x2();
        let th = Expr::x1();
        let f = (1.0 + 0.3 * th.cos()) * (-2.0 * z.clone()).exp() * (1.0 + z.clone() * (-z).exp());
        let (x, y) = (0.7, 0.4);
        let j = f.jet_at(x, y, 3).unwrap();
        let h = 1e-4;
        let fd1 = (f.eval(x + h, y) - f.eval(x - h, y)) / (2.0 * h);
        let fd2 = (f.eval(x, y + h) - 2.0 * f.eval(x, y) + f.eval(x, y - h)) / (h * h);
        assert_relative_eq!(j.partial(1, 0).unwrap(), fd1, max_relative = 1e-7);
        assert_relative_eq!(j.partial(0, 2).unwrap(), fd2, max_relative = 1e-6);
        assert_relative_eq!(j.value().unwrap(), f.eval(x, y), max_relative = 1e-15);
    }

    #[test]
    fn x1_dependence_is_structural() {
        assert!(!(Expr::x2().exp() * 2.0).depends_on_x1());
        assert!((Expr::x2() + Expr::x1().sin()).depends_on_x1());
    }
}
