use crate::error::{Error, Result};
use crate::model::expr::{Expr, Func};

/// Recursive-descent parser for the model language.
///
/// ```text
/// expr   := term (('+' | '-') term)*
/// term   := factor (('*' | '/') factor)*
/// factor := '-' factor | atom
/// atom   := number | 'pi' | name | name '(' expr ')' | '(' expr ')'
/// ```
///
/// Names of the shape `beta<digits>` and `b<digits>` are effect labels;
/// `f(...)` is the unknown curve; anything else is a covariate reference.
pub fn parse_model(text: &str) -> Result<Expr> {
    let mut p = Parser { bytes: text.as_bytes(), pos: 0, spline_seen: false };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.bytes.len() {
        return Err(p.err("end of input"));
    }
    Ok(e)
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    spline_seen: bool,
}

impl<'a> Parser<'a> {
    fn err(&self, expected: &str) -> Error {
        Error::SyntaxError { offset: self.pos, expected: expected.to_string() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            self.skip_ws();
            if self.eat(b'+') {
                let rhs = self.term()?;
                lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'-') {
                let rhs = self.term()?;
                lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        loop {
            self.skip_ws();
            if self.eat(b'*') {
                let rhs = self.factor()?;
                lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
            } else if self.eat(b'/') {
                let rhs = self.factor()?;
                lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr> {
        self.skip_ws();
        if self.eat(b'-') {
            let inner = self.factor()?;
            return Ok(Expr::Neg(Box::new(inner)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.skip_ws();
                if !self.eat(b')') {
                    return Err(self.err("closing parenthesis"));
                }
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.name(),
            _ => Err(self.err("number, name, or parenthesized expression")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() || c == b'.' {
                self.pos += 1;
            } else if (c == b'e' || c == b'E')
                && self
                    .bytes
                    .get(self.pos + 1)
                    .is_some_and(|&n| n.is_ascii_digit() || n == b'+' || n == b'-')
            {
                self.pos += 2;
            } else {
                break;
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        match text.parse::<f64>() {
            Ok(v) => Ok(Expr::Const(v)),
            Err(_) => {
                self.pos = start;
                Err(self.err("numeric literal"))
            }
        }
    }

    fn name(&mut self) -> Result<Expr> {
        let start = self.pos;
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == b'_' {
                self.pos += 1;
            } else {
                break;
            }
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap().to_string();
        self.skip_ws();
        if self.peek() == Some(b'(') {
            // Function application.
            let func = match name.as_str() {
                "exp" => Some(Func::Exp),
                "log" => Some(Func::Log),
                "sin" => Some(Func::Sin),
                "cos" => Some(Func::Cos),
                "ilogit" => Some(Func::InvLogit),
                "f" => None,
                _ => {
                    return Err(Error::UnknownFunction { name, offset: start });
                }
            };
            self.pos += 1;
            let arg = self.expr()?;
            self.skip_ws();
            if !self.eat(b')') {
                return Err(self.err("closing parenthesis"));
            }
            return match func {
                Some(fun) => Ok(Expr::Call(fun, Box::new(arg))),
                None => {
                    if self.spline_seen {
                        return Err(Error::MultipleSplineNodes);
                    }
                    self.spline_seen = true;
                    Ok(Expr::Spline(Box::new(arg)))
                }
            };
        }
        if name == "pi" {
            return Ok(Expr::Const(std::f64::consts::PI));
        }
        if let Some(rest) = name.strip_prefix("beta") {
            if !rest.is_empty() && rest.bytes().all(|c| c.is_ascii_digit()) {
                return Ok(Expr::Beta(rest.parse().unwrap()));
            }
        }
        if let Some(rest) = name.strip_prefix('b') {
            if !rest.is_empty() && rest.bytes().all(|c| c.is_ascii_digit()) {
                return Ok(Expr::RandEff(rest.parse().unwrap()));
            }
        }
        Ok(Expr::Cov(name))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ad::Scalar;
    use crate::model::CompiledModel;

    #[test]
    fn round_trip_display() {
        for text in [
            "beta0 + b1 + exp(b2) * f(t - ilogit(b3))",
            "beta0 + beta1 * sex + b1 + exp(beta2 * sex) * f(age + beta3 * ga + b3)",
            "1 + b1 + f(t)",
            "sin(2 * pi * (t - 0.5)) / (1 + t)",
            "-t + f(t) - (a - c)",
        ] {
            let e = parse_model(text).unwrap();
            assert_eq!(e.to_string(), text, "round trip of {text}");
            // Reparsing the printed form is the identity.
            let e2 = parse_model(&e.to_string()).unwrap();
            assert_eq!(e, e2);
        }
    }

    #[test]
    fn precedence_and_associativity() {
        let e = parse_model("a + b_cov * c").unwrap();
        assert_eq!(e.to_string(), "a + b_cov * c");
        let e = parse_model("(a + b_cov) * c").unwrap();
        assert_eq!(e.to_string(), "(a + b_cov) * c");
        let e = parse_model("a - b_cov - c").unwrap();
        assert_eq!(e.to_string(), "a - b_cov - c");
        let e = parse_model("a - (b_cov - c)").unwrap();
        assert_eq!(e.to_string(), "a - (b_cov - c)");
        let e = parse_model("a / (b_cov * c)").unwrap();
        assert_eq!(e.to_string(), "a / (b_cov * c)");
    }

    #[test]
    fn syntax_error_carries_offset() {
        match parse_model("beta0 + + b1") {
            Err(Error::SyntaxError { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("expected SyntaxError, got {other:?}"),
        }
        match parse_model("beta0 + (b1") {
            Err(Error::SyntaxError { offset, .. }) => assert_eq!(offset, 11),
            other => panic!("expected SyntaxError, got {other:?}"),
        }
    }

    #[test]
    fn unknown_function_and_duplicate_spline() {
        match parse_model("beta0 + smooth(t)") {
            Err(Error::UnknownFunction { name, offset }) => {
                assert_eq!(name, "smooth");
                assert_eq!(offset, 8);
            }
            other => panic!("expected UnknownFunction, got {other:?}"),
        }
        assert!(matches!(parse_model("f(t) + f(t)"), Err(Error::MultipleSplineNodes)));
    }

    #[test]
    fn numeric_literals() {
        assert_eq!(parse_model("f(t) + 2.5e-3").unwrap().to_string(), "f(t) + 0.0025");
        let e = parse_model("pi * f(t)").unwrap();
        match &e {
            Expr::Mul(a, _) => assert_eq!(**a, Expr::Const(std::f64::consts::PI)),
            _ => panic!(),
        }
    }

    #[test]
    fn label_compaction_to_slots() {
        let e = parse_model("beta0 + beta3 * x + b1 + b4 + f(t)").unwrap();
        let m = CompiledModel::compile(e, 2, 2, &["x".into(), "t".into()]).unwrap();
        assert_eq!(m.beta_labels, vec![0, 3]);
        assert_eq!(m.b_labels, vec![1, 4]);
        // Slot order follows label order: beta3 reads slot 1, b4 reads slot 1.
        let spline = |u: f64| Ok(u);
        let v = m.eval::<f64>(&[10.0, 100.0], &[1.0, 2.0], &[0.5, 7.0], &spline).unwrap();
        assert_eq!(v, 10.0 + 100.0 * 0.5 + 1.0 + 2.0 + 7.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let e = parse_model("beta0 + b1 + f(t)").unwrap();
        assert!(CompiledModel::compile(e.clone(), 2, 1, &["t".into()]).is_err());
        assert!(CompiledModel::compile(e.clone(), 1, 2, &["t".into()]).is_err());
        assert!(CompiledModel::compile(e, 1, 1, &["t".into()]).is_ok());
    }

    #[test]
    fn unbound_covariate_rejected() {
        let e = parse_model("beta0 + f(t) + weight").unwrap();
        match CompiledModel::compile(e, 1, 0, &["t".into()]) {
            Err(Error::UnboundName(n)) => assert_eq!(n, "weight"),
            other => panic!("expected UnboundName, got {other:?}"),
        }
    }

    #[test]
    fn missing_spline_rejected() {
        let e = parse_model("beta0 + b1").unwrap();
        assert!(matches!(
            CompiledModel::compile(e, 1, 1, &[]),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn eval_matches_closed_form() {
        let e = parse_model("beta0 + b1 + exp(b2) * f(t - ilogit(b3))").unwrap();
        let m = CompiledModel::compile(e, 1, 3, &["t".into()]).unwrap();
        assert_eq!(m.b_in_spline, vec![2]); // b3 occupies slot 2
        let spline = |u: f64| Ok((2.0 * std::f64::consts::PI * u).sin());
        let (beta, b, t) = ([1.0], [0.3, -0.2, 0.9], 0.42);
        let got = m.eval::<f64>(&beta, &b, &[t], &spline).unwrap();
        let ilogit = |x: f64| 1.0 / (1.0 + (-x).exp());
        let want = 1.0 + 0.3 + (-0.2f64).exp()
            * (2.0 * std::f64::consts::PI * (t - ilogit(0.9))).sin();
        assert!((got - want).abs() < 1e-14);
        // The curve argument in isolation.
        let arg = m.eval_spline_arg::<f64>(&beta, &b, &[t]).unwrap();
        assert!((arg - (t - ilogit(0.9))).abs() < 1e-14);
    }

    #[test]
    fn eval_carries_derivatives_through_the_tape() {
        use crate::ad::{grad, ScalarFn};
        let e = parse_model("beta0 + b1 + exp(b2) * f(t)").unwrap();
        let m = CompiledModel::compile(e, 1, 2, &["t".into()]).unwrap();
        struct F<'a>(&'a CompiledModel);
        impl ScalarFn for F<'_> {
            fn eval<T: Scalar>(&self, x: &[T]) -> crate::error::Result<T> {
                // x = [beta0, b1, b2]; curve fixed at u -> u * u.
                let spline = |u: T| Ok(u * u);
                self.0.eval(&x[..1], &x[1..], &[3.0], &spline)
            }
        }
        let g = grad(&F(&m), &[0.5, 0.1, -0.4]).unwrap();
        assert!((g[0] - 1.0).abs() < 1e-14);
        assert!((g[1] - 1.0).abs() < 1e-14);
        assert!((g[2] - (-0.4f64).exp() * 9.0).abs() < 1e-12);
    }
}
