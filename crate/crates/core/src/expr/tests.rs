use super::*;
use proptest::prelude::*;

const VARS: [&str; 3] = ["x", "y", "z"];

/// Independent evaluator: computes the value while scanning the text, never
/// building a tree.
struct Reference<'a> {
    s: &'a [u8],
    pos: usize,
    x: [f64; 3],
}

impl<'a> Reference<'a> {
    fn eval(text: &'a str, x: [f64; 3]) -> f64 {
        let mut r = Reference { s: text.as_bytes(), pos: 0, x };
        let v = r.sum();
        r.ws();
        assert_eq!(r.pos, r.s.len(), "reference evaluator stopped early on {text}");
        v
    }
    fn ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }
    fn at(&mut self, c: u8) -> bool {
        self.ws();
        if self.pos < self.s.len() && self.s[self.pos] == c {
            self.pos += 1;
            true
        } else {
            false
        }
    }
    fn sum(&mut self) -> f64 {
        let mut v = self.product();
        loop {
            if self.at(b'+') {
                v += self.product();
            } else if self.at(b'-') {
                v -= self.product();
            } else {
                return v;
            }
        }
    }
    fn product(&mut self) -> f64 {
        let mut v = self.signed();
        loop {
            if self.at(b'*') {
                v *= self.signed();
            } else if self.at(b'/') {
                v /= self.signed();
            } else {
                return v;
            }
        }
    }
    fn signed(&mut self) -> f64 {
        if self.at(b'-') {
            return -self.signed();
        }
        let base = self.primary();
        if self.at(b'^') {
            let e = self.signed();
            if e.fract() == 0.0 && e.abs() < 64.0 {
                return base.powi(e as i32);
            }
            return base.powf(e);
        }
        base
    }
    fn primary(&mut self) -> f64 {
        self.ws();
        if self.at(b'(') {
            let v = self.sum();
            assert!(self.at(b')'));
            return v;
        }
        let start = self.pos;
        if self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.' {
            while self.pos < self.s.len()
                && (self.s[self.pos].is_ascii_digit() || self.s[self.pos] == b'.')
            {
                self.pos += 1;
            }
            if self.pos < self.s.len() && (self.s[self.pos] == b'e' || self.s[self.pos] == b'E') {
                let save = self.pos;
                self.pos += 1;
                if self.pos < self.s.len() && (self.s[self.pos] == b'-' || self.s[self.pos] == b'+') {
                    self.pos += 1;
                }
                let ds = self.pos;
                while self.pos < self.s.len() && self.s[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if self.pos == ds {
                    self.pos = save;
                }
            }
            return std::str::from_utf8(&self.s[start..self.pos]).unwrap().parse().unwrap();
        }
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.s[start..self.pos]).unwrap();
        if self.at(b'(') {
            let a = self.sum();
            assert!(self.at(b')'));
            return match name {
                "sin" => a.sin(),
                "cos" => a.cos(),
                "tan" => a.tan(),
                "sinh" => a.sinh(),
                "cosh" => a.cosh(),
                "tanh" => a.tanh(),
                "exp" => a.exp(),
                "log" => a.ln(),
                "sqrt" => a.sqrt(),
                "asin" => a.asin(),
                "atan" => a.atan(),
                "abs" => a.abs(),
                other => panic!("unknown function {other}"),
            };
        }
        match name {
            "x" => self.x[0],
            "y" => self.x[1],
            "z" => self.x[2],
            "pi" => std::f64::consts::PI,
            "e" => std::f64::consts::E,
            other => panic!("unknown name {other}"),
        }
    }
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

#[test]
fn evaluates_simple_polynomial() {
    let e = parse("x^2 + y^2 + 1", &["x", "y"]).unwrap();
    assert_eq!(e.eval(&[1.0, 0.0]), 2.0);
}

#[test]
fn derivative_of_torus_profile_vanishes_at_zero() {
    let e = parse("(3+cos(2*pi*x))", &["x"]).unwrap();
    let d = e.derivative(0);
    assert_eq!(d.eval(&[0.0]), 0.0);
    let expected = -2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * 0.3_f64).sin();
    assert!((d.eval(&[0.3]) - expected).abs() < 1e-14);
}

#[test]
fn unterminated_call_reports_offset() {
    match parse("sin(x", &["x"]) {
        Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 5),
        other => panic!("expected syntax error, got {other:?}"),
    }
}

#[test]
fn unknown_identifier_and_arity() {
    assert!(matches!(
        parse("x + w", &["x"]),
        Err(ExprError::UnknownIdentifier { ref name, offset: 4 }) if name == "w"
    ));
    assert!(matches!(parse("foo(x)", &["x"]), Err(ExprError::UnknownIdentifier { .. })));
    assert!(matches!(parse("sin(x, x)", &["x"]), Err(ExprError::Arity { got: 2, .. })));
    assert!(matches!(parse("sin", &["x"]), Err(ExprError::Arity { got: 0, .. })));
}

#[test]
fn precedence_rules() {
    let v = |s: &str| parse(s, &VARS).unwrap().eval(&[2.0, 3.0, 0.5]);
    assert_eq!(v("-x^2"), -4.0);
    assert_eq!(v("2^3^2"), 512.0);
    assert_eq!(v("x - y - 1"), -2.0);
    assert_eq!(v("x / y * 3"), 2.0);
    assert_eq!(v("2^-1"), 0.5);
    assert_eq!(v("-x*-y"), 6.0);
    assert_eq!(v("1e-2*100"), 1.0);
}

#[test]
fn variables_shadow_constants() {
    let e = parse("e + pi", &["e"]).unwrap();
    assert_eq!(e.eval(&[1.0]), 1.0 + std::f64::consts::PI);
}

#[test]
fn unicode_identifiers_use_byte_offsets() {
    let e = parse("sin(θ)^2", &["θ"]).unwrap();
    assert!((e.eval(&[0.5]) - 0.5_f64.sin().powi(2)).abs() < 1e-15);
    match parse("θ + ?", &["θ"]) {
        Err(ExprError::Syntax { offset, .. }) => assert_eq!(offset, 5),
        other => panic!("{other:?}"),
    }
}

const CORPUS: &[&str] = &[
    "x", "1", "0.5", "pi", "e", "x+y", "x-y", "x*y", "x/y", "x^2", "-x", "--x", "-x^2", "(-x)^2",
    "x^y^z", "(x^y)^z", "x-(y-z)", "x/(y/z)", "x*(y+z)", "(x+y)*z", "sin(x)", "cos(x*y)",
    "tan(x/4)", "sinh(y)", "cosh(z)", "tanh(x-y)", "exp(-x^2)", "log(1+x^2)", "sqrt(2+y)",
    "asin(z/2)", "atan(x*y)", "abs(x-y)", "x^2+y^2+1", "(x^2+y^2+1)*(x-1)", "3+cos(2*pi*x)",
    "1/(3+cos(2*pi*y))", "sqrt(3+cos(2*pi*x))", "(3+cos(2*pi*x)) - 1/(3+cos(2*pi*y))",
    "x^2+0.25*y^2+1", "1 - tanh(y)", "2*(1-tanh(x))*(1+tanh(x))", "x*y*z", "x/y/z", "x-y+z",
    "-(x+y)", "2^-x", "x^-2", "exp(sin(x))*cos(y)", "log(exp(x))", "sqrt(x^2+y^2+z^2+1)",
    "1.5e1*x", "2.5E-1+y", "((x))", "-(-(-x))", "x*-y", "x/-y", "x^(y+1)", "(x+1)^(y/2)",
    "sin(x)^2+cos(x)^2", "atan(y/(x+3))", "abs(y)+1", "z^3-2*z+1", "exp(x)/(1+exp(x))",
    "cosh(x)^2-sinh(x)^2", "0.125*x^4", "x^2*y^2", "(x-y)*(x+y)", "1/(1+x^2)", "tan(z)^2",
    "log(2+sin(x*y))", "sqrt(abs(x)+1)", "-1", "-2.5", "10*x-3*y+z/7", "x^0.5^2",
];

#[test]
fn handwritten_corpus_matches_reference_and_roundtrips() {
    let pts = [[0.3, 0.7, 1.1], [1.2, 0.4, -0.6], [0.9, 1.5, 0.2]];
    for text in CORPUS {
        let e = parse(text, &VARS).unwrap_or_else(|err| panic!("{text}: {err}"));
        for p in &pts {
            let a = e.eval(p);
            let b = Reference::eval(text, *p);
            assert!(close(a, b, 1e-12) || (a.is_nan() && b.is_nan()), "{text} at {p:?}: {a} vs {b}");
        }
        let printed = e.to_text(&VARS);
        assert_eq!(parse(&printed, &VARS).unwrap(), e, "{text} -> {printed}");
    }
}

fn arb_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x".to_string()),
        Just("y".to_string()),
        Just("z".to_string()),
        Just("pi".to_string()),
        (1u32..40).prop_map(|k| format!("{}", k as f64 / 8.0)),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        let funcs = prop::sample::select(vec![
            "sin", "cos", "tanh", "atan", "exp", "sinh", "cosh", "sqrt", "log", "abs",
        ]);
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} + {b}")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("{a} - ({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})*({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a})/(2 + ({b})^2)")),
            inner.clone().prop_map(|a| format!("-({a})")),
            (inner.clone(), 1u32..4).prop_map(|(a, k)| format!("({a})^{k}")),
            (funcs, inner.clone()).prop_map(|(f, a)| match f {
                "sqrt" | "log" => format!("{f}(1 + ({a})^2)"),
                "exp" | "sinh" | "cosh" => format!("{f}(tanh({a}))"),
                _ => format!("{f}({a})"),
            }),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(160))]

    #[test]
    fn generated_corpus_matches_reference(text in arb_expr(), x in -1.5..1.5f64, y in -1.5..1.5f64, z in -1.5..1.5f64) {
        let e = parse(&text, &VARS).unwrap();
        let a = e.eval(&[x, y, z]);
        let b = Reference::eval(&text, [x, y, z]);
        prop_assert!(close(a, b, 1e-12), "{} : {} vs {}", text, a, b);
        let printed = e.to_text(&VARS);
        prop_assert_eq!(parse(&printed, &VARS).unwrap(), e);
    }

    #[test]
    fn symbolic_derivative_matches_central_differences(text in arb_expr(), x in -1.0..1.0f64, y in -1.0..1.0f64, z in -1.0..1.0f64) {
        let e = parse(&text, &VARS).unwrap();
        let p = [x, y, z];
        prop_assume!(e.abs_arguments().iter().all(|a| a.eval(&p).abs() > 1e-3));
        for var in 0..3 {
            let d = e.derivative(var).eval(&p);
            let h = 1e-5 * (1.0 + p[var].abs());
            let mut pp = p; pp[var] += h;
            let mut pm = p; pm[var] -= h;
            let fd = (e.eval(&pp) - e.eval(&pm)) / (2.0 * h);
            prop_assert!((d - fd).abs() <= 1e-6 * (1.0 + d.abs()), "{} d/d{}: {} vs {}", text, var, d, fd);
            // symbolic and forward-mode must agree to rounding
            let jet = e.eval_jet(&crate::jet::Jet::vars(&p, crate::jet::Order::First));
            prop_assert!((jet.d(var) - d).abs() <= 1e-10 * (1.0 + d.abs()));
        }
    }
}
