use super::Expr;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Add(..) | Expr::Sub(..) => 1,
        Expr::Mul(..) | Expr::Div(..) => 2,
        Expr::Neg(_) => 3,
        Expr::Pow(..) => 4,
        Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => 3,
        Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => 5,
    }
}

pub(super) fn render(e: &Expr, names: &[&str]) -> String {
    let mut out = String::new();
    write(e, names, &mut out);
    out
}

fn child(e: &Expr, min: u8, names: &[&str], out: &mut String) {
    if prec(e) < min {
        out.push('(');
        write(e, names, out);
        out.push(')');
    } else {
        write(e, names, out);
    }
}

fn write(e: &Expr, names: &[&str], out: &mut String) {
    match e {
        Expr::Const(c) => {
            if c.is_sign_negative() {
                out.push_str(&format!("-{}", -c));
            } else {
                out.push_str(&format!("{c}"));
            }
        }
        Expr::Var(i) => out.push_str(names.get(*i).copied().unwrap_or("?")),
        Expr::Neg(a) => {
            out.push('-');
            child(a, 3, names, out);
        }
        Expr::Add(a, b) => {
            child(a, 1, names, out);
            out.push_str(" + ");
            child(b, 2, names, out);
        }
        Expr::Sub(a, b) => {
            child(a, 1, names, out);
            out.push_str(" - ");
            child(b, 2, names, out);
        }
        Expr::Mul(a, b) => {
            child(a, 2, names, out);
            out.push('*');
            child(b, 3, names, out);
        }
        Expr::Div(a, b) => {
            child(a, 2, names, out);
            out.push('/');
            child(b, 3, names, out);
        }
        Expr::Pow(a, b) => {
            child(a, 5, names, out);
            out.push('^');
            child(b, 3, names, out);
        }
        Expr::Call(f, a) => {
            out.push_str(f.name());
            out.push('(');
            write(a, names, out);
            out.push(')');
        }
    }
}
