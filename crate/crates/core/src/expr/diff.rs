use super::{Expr, Func};

fn c(v: f64) -> Expr {
    Expr::Const(v)
}

fn b(e: Expr) -> Box<Expr> {
    Box::new(e)
}

// Simplifying constructors: fold constants and drop neutral elements so that
// repeated differentiation does not blow up the tree.

pub(super) fn add(x: Expr, y: Expr) -> Expr {
    match (x.is_const(), y.is_const()) {
        (Some(a), Some(bv)) => c(a + bv),
        (Some(a), _) if a == 0.0 => y,
        (_, Some(bv)) if bv == 0.0 => x,
        _ => Expr::Add(b(x), b(y)),
    }
}

pub(super) fn sub(x: Expr, y: Expr) -> Expr {
    match (x.is_const(), y.is_const()) {
        (Some(a), Some(bv)) => c(a - bv),
        (Some(a), _) if a == 0.0 => neg(y),
        (_, Some(bv)) if bv == 0.0 => x,
        _ => Expr::Sub(b(x), b(y)),
    }
}

pub(super) fn neg(x: Expr) -> Expr {
    match x {
        Expr::Const(a) => c(-a),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(b(other)),
    }
}

pub(super) fn mul(x: Expr, y: Expr) -> Expr {
    match (x.is_const(), y.is_const()) {
        (Some(a), Some(bv)) => c(a * bv),
        (Some(a), _) if a == 0.0 => c(0.0),
        (_, Some(bv)) if bv == 0.0 => c(0.0),
        (Some(a), _) if a == 1.0 => y,
        (_, Some(bv)) if bv == 1.0 => x,
        (Some(a), _) if a == -1.0 => neg(y),
        (_, Some(bv)) if bv == -1.0 => neg(x),
        _ => Expr::Mul(b(x), b(y)),
    }
}

pub(super) fn div(x: Expr, y: Expr) -> Expr {
    match (x.is_const(), y.is_const()) {
        (Some(a), _) if a == 0.0 => c(0.0),
        (Some(a), Some(bv)) => c(a / bv),
        (_, Some(bv)) if bv == 1.0 => x,
        _ => Expr::Div(b(x), b(y)),
    }
}

pub(super) fn pow(x: Expr, y: Expr) -> Expr {
    match (x.is_const(), y.is_const()) {
        (_, Some(e)) if e == 0.0 => c(1.0),
        (_, Some(e)) if e == 1.0 => x,
        (Some(a), Some(e)) => c(a.powf(e)),
        _ => Expr::Pow(b(x), b(y)),
    }
}

fn call(f: Func, x: Expr) -> Expr {
    Expr::Call(f, b(x))
}

pub(super) fn derivative(e: &Expr, var: usize) -> Expr {
    if !e.depends_on(var) {
        return c(0.0);
    }
    match e {
        Expr::Const(_) => c(0.0),
        Expr::Var(i) => c(if *i == var { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(derivative(a, var)),
        Expr::Add(a, bb) => add(derivative(a, var), derivative(bb, var)),
        Expr::Sub(a, bb) => sub(derivative(a, var), derivative(bb, var)),
        Expr::Mul(a, bb) => add(
            mul(derivative(a, var), (**bb).clone()),
            mul((**a).clone(), derivative(bb, var)),
        ),
        Expr::Div(a, bb) => {
            // (a'b − ab')/b²
            let num = sub(
                mul(derivative(a, var), (**bb).clone()),
                mul((**a).clone(), derivative(bb, var)),
            );
            div(num, pow((**bb).clone(), c(2.0)))
        }
        Expr::Pow(a, bb) => {
            if let Some(k) = bb.is_const() {
                // k·a^(k−1)·a'
                return mul(mul(c(k), pow((**a).clone(), c(k - 1.0))), derivative(a, var));
            }
            // a^b·(b'·ln a + b·a'/a)
            let term1 = mul(derivative(bb, var), call(Func::Log, (**a).clone()));
            let term2 = div(mul((**bb).clone(), derivative(a, var)), (**a).clone());
            mul(e.clone(), add(term1, term2))
        }
        Expr::Call(f, a) => {
            let u = (**a).clone();
            let du = derivative(a, var);
            let outer = match f {
                Func::Sin => call(Func::Cos, u),
                Func::Cos => neg(call(Func::Sin, u)),
                Func::Tan => add(c(1.0), pow(call(Func::Tan, u), c(2.0))),
                Func::Sinh => call(Func::Cosh, u),
                Func::Cosh => call(Func::Sinh, u),
                Func::Tanh => sub(c(1.0), pow(call(Func::Tanh, u), c(2.0))),
                Func::Exp => call(Func::Exp, u),
                Func::Log => div(c(1.0), u),
                Func::Sqrt => div(c(0.5), call(Func::Sqrt, u)),
                Func::Asin => div(c(1.0), call(Func::Sqrt, sub(c(1.0), pow(u, c(2.0))))),
                Func::Atan => div(c(1.0), add(c(1.0), pow(u, c(2.0)))),
                Func::Abs => div(u.clone(), call(Func::Abs, u)),
            };
            mul(outer, du)
        }
    }
}
