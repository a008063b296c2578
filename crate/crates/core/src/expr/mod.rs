//! Arithmetic expressions over time, state and input variables, evaluable
//! over reals and over intervals (natural interval extension).

mod parse;
mod spec;

use std::fmt;

use crate::error::ExprError;
use crate::interval::{integral_exponent, Interval};

pub use spec::{jacobian_bounds, VectorFieldSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryFn {
    Exp,
    Log,
    Sin,
    Cos,
    Sqrt,
    Abs,
    /// Unit step: 1 for arguments >= 0, else 0. Used to write Jacobians of
    /// `min`/`max` fields piecewise.
    Step,
}

impl UnaryFn {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Self::Exp,
            "log" | "ln" => Self::Log,
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "sqrt" => Self::Sqrt,
            "abs" => Self::Abs,
            "step" => Self::Step,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Sqrt => "sqrt",
            Self::Abs => "abs",
            Self::Step => "step",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

/// Expression tree. State and input indices are 0-based; the textual form
/// uses 1-based names `x1`, `p1`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Time,
    State(usize),
    Input(usize),
    Neg(Box<Expr>),
    Unary(UnaryFn, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
    Min(Vec<Expr>),
    Max(Vec<Expr>),
}

impl Expr {
    /// Parses without checking variable indices against any dimensions.
    pub fn parse(src: &str) -> Result<Expr, ExprError> {
        parse::parse(src, None)
    }

    /// Parses and rejects `x<i>` with `i > n_x` and `p<k>` with `k > n_p`.
    pub fn parse_with_dims(src: &str, n_x: usize, n_p: usize) -> Result<Expr, ExprError> {
        parse::parse(src, Some((n_x, n_p)))
    }

    /// Largest state and input index referenced (as counts, i.e. 1-based).
    pub fn variable_extent(&self) -> (usize, usize) {
        let mut ext = (0, 0);
        self.visit(&mut |e| match *e {
            Expr::State(i) => ext.0 = ext.0.max(i + 1),
            Expr::Input(k) => ext.1 = ext.1.max(k + 1),
            _ => {}
        });
        ext
    }

    pub fn check_dims(&self, n_x: usize, n_p: usize) -> Result<(), ExprError> {
        let (nx, np) = self.variable_extent();
        if nx > n_x {
            return Err(ExprError::VariableOutOfRange(format!("x{nx}")));
        }
        if np > n_p {
            return Err(ExprError::VariableOutOfRange(format!("p{np}")));
        }
        Ok(())
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Neg(a) | Expr::Unary(_, a) => a.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
            Expr::Min(args) | Expr::Max(args) => args.iter().for_each(|a| a.visit(f)),
            _ => {}
        }
    }

    /// Whether the expression is the literal zero (used to skip work on
    /// structurally sparse Jacobians).
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(v) if *v == 0.0)
    }

    pub fn eval(&self, t: f64, x: &[f64], p: &[f64]) -> Result<f64, ExprError> {
        Ok(match self {
            Expr::Const(v) => *v,
            Expr::Time => t,
            Expr::State(i) => *x
                .get(*i)
                .ok_or_else(|| ExprError::VariableOutOfRange(format!("x{}", i + 1)))?,
            Expr::Input(k) => *p
                .get(*k)
                .ok_or_else(|| ExprError::VariableOutOfRange(format!("p{}", k + 1)))?,
            Expr::Neg(a) => -a.eval(t, x, p)?,
            Expr::Unary(f, a) => real_unary(*f, a.eval(t, x, p)?)?,
            Expr::Binary(op, a, b) => real_binary(*op, a.eval(t, x, p)?, b.eval(t, x, p)?)?,
            Expr::Min(args) => fold_real(args, t, x, p, f64::min)?,
            Expr::Max(args) => fold_real(args, t, x, p, f64::max)?,
        })
    }

    /// Natural interval extension.
    pub fn eval_interval(&self, t: Interval, x: &[Interval], p: &[Interval]) -> Result<Interval, ExprError> {
        Ok(match self {
            Expr::Const(v) => Interval::point(*v),
            Expr::Time => t,
            Expr::State(i) => *x
                .get(*i)
                .ok_or_else(|| ExprError::VariableOutOfRange(format!("x{}", i + 1)))?,
            Expr::Input(k) => *p
                .get(*k)
                .ok_or_else(|| ExprError::VariableOutOfRange(format!("p{}", k + 1)))?,
            Expr::Neg(a) => -a.eval_interval(t, x, p)?,
            Expr::Unary(f, a) => interval_unary(*f, a.eval_interval(t, x, p)?)?,
            Expr::Binary(op, a, b) => {
                let (a, b) = (a.eval_interval(t, x, p)?, b.eval_interval(t, x, p)?);
                match op {
                    BinaryOp::Add => a + b,
                    BinaryOp::Sub => a - b,
                    BinaryOp::Mul => a * b,
                    BinaryOp::Div => a.div(b)?,
                    BinaryOp::Pow => a.pow(b)?,
                }
            }
            Expr::Min(args) => fold_interval(args, t, x, p, Interval::min)?,
            Expr::Max(args) => fold_interval(args, t, x, p, Interval::max)?,
        })
    }
}

fn fold_real(args: &[Expr], t: f64, x: &[f64], p: &[f64], f: fn(f64, f64) -> f64) -> Result<f64, ExprError> {
    let mut acc = args[0].eval(t, x, p)?;
    for a in &args[1..] {
        acc = f(acc, a.eval(t, x, p)?);
    }
    Ok(acc)
}

fn fold_interval(
    args: &[Expr],
    t: Interval,
    x: &[Interval],
    p: &[Interval],
    f: fn(Interval, Interval) -> Interval,
) -> Result<Interval, ExprError> {
    let mut acc = args[0].eval_interval(t, x, p)?;
    for a in &args[1..] {
        acc = f(acc, a.eval_interval(t, x, p)?);
    }
    Ok(acc)
}

fn real_unary(f: UnaryFn, v: f64) -> Result<f64, ExprError> {
    Ok(match f {
        UnaryFn::Exp => v.exp(),
        UnaryFn::Log => {
            if v <= 0.0 {
                return Err(ExprError::Domain(format!("log of non-positive value {v}")));
            }
            v.ln()
        }
        UnaryFn::Sin => v.sin(),
        UnaryFn::Cos => v.cos(),
        UnaryFn::Sqrt => {
            if v < 0.0 {
                return Err(ExprError::Domain(format!("sqrt of negative value {v}")));
            }
            v.sqrt()
        }
        UnaryFn::Abs => v.abs(),
        UnaryFn::Step => {
            if v >= 0.0 {
                1.0
            } else {
                0.0
            }
        }
    })
}

fn real_binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, ExprError> {
    Ok(match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err(ExprError::Domain(format!("division of {a} by zero")));
            }
            a / b
        }
        BinaryOp::Pow => {
            if let Some(n) = integral_exponent(b) {
                if a == 0.0 && n < 0 {
                    return Err(ExprError::Domain("negative power of zero".into()));
                }
                a.powi(n)
            } else if a > 0.0 || (a == 0.0 && b > 0.0) {
                a.powf(b)
            } else {
                return Err(ExprError::Domain(format!("{a} raised to non-integral power {b}")));
            }
        }
    })
}

fn interval_unary(f: UnaryFn, v: Interval) -> Result<Interval, ExprError> {
    Ok(match f {
        UnaryFn::Exp => v.exp(),
        UnaryFn::Log => v.ln()?,
        UnaryFn::Sin => v.sin(),
        UnaryFn::Cos => v.cos(),
        UnaryFn::Sqrt => v.sqrt()?,
        UnaryFn::Abs => v.abs(),
        UnaryFn::Step => v.step(),
    })
}

/// Fully parenthesized form; reparses to an identical tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) if v.is_sign_negative() => write!(f, "(-{})", -v),
            Expr::Const(v) => write!(f, "{v}"),
            Expr::Time => write!(f, "t"),
            Expr::State(i) => write!(f, "x{}", i + 1),
            Expr::Input(k) => write!(f, "p{}", k + 1),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Unary(u, a) => write!(f, "{}({a})", u.name()),
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => "+",
                    BinaryOp::Sub => "-",
                    BinaryOp::Mul => "*",
                    BinaryOp::Div => "/",
                    BinaryOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Min(args) | Expr::Max(args) => {
                write!(f, "{}(", if matches!(self, Expr::Min(_)) { "min" } else { "max" })?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{a}")?;
                }
                write!(f, ")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    fn bx(v: &[(f64, f64)]) -> Vec<Interval> {
        v.iter().map(|&(l, h)| Interval::new(l, h)).collect()
    }

    #[test]
    fn precedence() {
        assert_eq!(
            p("x1 + 2*p1"),
            Expr::Binary(
                BinaryOp::Add,
                Box::new(Expr::State(0)),
                Box::new(Expr::Binary(BinaryOp::Mul, Box::new(Expr::Const(2.0)), Box::new(Expr::Input(0))))
            )
        );
        // power binds tighter than unary minus
        assert_eq!(p("-x1^2"), Expr::Neg(Box::new(p("x1^2"))));
        assert_eq!(p("2^-1").eval(0.0, &[], &[]).unwrap(), 0.5);
        assert_eq!(p("2^3^2").eval(0.0, &[], &[]).unwrap(), 512.0);
        assert_eq!(p("8/4/2").eval(0.0, &[], &[]).unwrap(), 1.0);
        assert_eq!(p("1.5e2 - 2E-1").eval(0.0, &[], &[]).unwrap(), 149.8);
    }

    #[test]
    fn n_ary_min() {
        match p("min(40, 0.5*x1, (320 - x2)/6)") {
            Expr::Min(args) => assert_eq!(args.len(), 3),
            other => panic!("expected min node, got {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        assert_eq!(
            Expr::parse("x1 +* 2").unwrap_err(),
            ExprError::Syntax {
                line: 1,
                column: 4,
                message: "unexpected `*`".into()
            }
        );
        assert!(matches!(
            Expr::parse("x1 +\n  (2").unwrap_err(),
            ExprError::Syntax { line: 2, column: 4, .. }
        ));
        assert!(matches!(Expr::parse("x1 x2"), Err(ExprError::Syntax { column: 3, .. })));
        assert!(matches!(Expr::parse("3 # 4"), Err(ExprError::Syntax { column: 2, .. })));
    }

    #[test]
    fn identifier_and_arity_errors() {
        assert!(matches!(Expr::parse("y1 + 1"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(Expr::parse("foo(x1)"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(Expr::parse("x0"), Err(ExprError::UnknownIdentifier { .. })));
        assert!(matches!(Expr::parse("exp(x1, x2)"), Err(ExprError::Arity { found: 2, .. })));
        assert!(matches!(Expr::parse("pow(x1)"), Err(ExprError::Arity { found: 1, .. })));
        assert!(matches!(
            Expr::parse_with_dims("x3 + p1", 2, 1),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(Expr::parse_with_dims("x2 + p1", 2, 1).is_ok());
    }

    #[test]
    fn real_evaluation() {
        assert_eq!(p("x1*x2").eval(0.0, &[2.0, 3.0], &[]).unwrap(), 6.0);
        assert_eq!(p("abs(x1)").eval(0.0, &[-4.0], &[]).unwrap(), 4.0);
        assert_eq!(p("t*2").eval(1.5, &[], &[]).unwrap(), 3.0);
        assert_eq!(p("step(x1)").eval(0.0, &[0.0], &[]).unwrap(), 1.0);
        assert_eq!(p("step(x1)").eval(0.0, &[-1e-12], &[]).unwrap(), 0.0);
    }

    #[test]
    fn traffic_link_one_by_hand() {
        // -min(40, 0.5*100, 2*(1/6)*220, 2*(1/6)*220)/30 + p1 at p1 = 2
        let f1 = p("-min(40, 0.5*x1, 2*(1/6)*(320 - x2), 2*(1/6)*(320 - x3))/30 + p1");
        let v = f1.eval(0.0, &[100.0, 100.0, 100.0], &[2.0]).unwrap();
        assert!((v - (-40.0 / 30.0 + 2.0)).abs() < 1e-12);
        assert!((v - 0.6667).abs() < 1e-4);
    }

    #[test]
    fn domain_errors_are_reported() {
        assert!(matches!(p("log(x1)").eval(0.0, &[0.0], &[]), Err(ExprError::Domain(_))));
        assert!(matches!(p("1/x1").eval(0.0, &[0.0], &[]), Err(ExprError::Domain(_))));
        assert!(matches!(p("sqrt(x1)").eval(0.0, &[-1.0], &[]), Err(ExprError::Domain(_))));
        assert!(matches!(p("x1^0.5").eval(0.0, &[-1.0], &[]), Err(ExprError::Domain(_))));
        let t = Interval::point(0.0);
        assert!(matches!(
            p("1/x1").eval_interval(t, &bx(&[(-1.0, 1.0)]), &[]),
            Err(ExprError::Domain(_))
        ));
        assert!(matches!(
            p("log(x1)").eval_interval(t, &bx(&[(0.0, 1.0)]), &[]),
            Err(ExprError::Domain(_))
        ));
    }

    #[test]
    fn interval_evaluation() {
        let t = Interval::point(0.0);
        assert_eq!(
            p("x1 - x1").eval_interval(t, &bx(&[(0.0, 1.0)]), &[]).unwrap(),
            Interval::new(-1.0, 1.0)
        );
        assert_eq!(
            p("min(2, x1)").eval_interval(t, &bx(&[(1.0, 3.0)]), &[]).unwrap(),
            Interval::new(1.0, 2.0)
        );
        assert_eq!(
            p("5").eval_interval(t, &bx(&[(-9.0, 9.0)]), &[]).unwrap(),
            Interval::point(5.0)
        );
    }

    #[test]
    fn printing_round_trips() {
        for s in [
            "x1 + 2*p1",
            "-x1^2 + min(40, 0.5*x1, (320 - x2)/6)",
            "exp(-t) * sin(x1) / (1 + abs(x2))",
            "max(x1, -3.25e-3) - step(x2 - 1)",
            "pow(x1, 3) - -2",
        ] {
            let e = p(s);
            let printed = e.to_string();
            let again = p(&printed);
            assert_eq!(again, e, "{s} -> {printed}");
            assert_eq!(again.to_string(), printed);
        }
        // constants built programmatically print as negations
        assert_eq!(Expr::Const(-2.0).to_string(), "(-2)");
        assert_eq!(p(&Expr::Const(-2.0).to_string()).to_string(), "(-2)");
    }

    /// Small random expression trees over x1, x2, p1 that stay away from
    /// domain singularities.
    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (-3.0..3.0f64).prop_map(Expr::Const),
            Just(Expr::State(0)),
            Just(Expr::State(1)),
            Just(Expr::Input(0)),
            Just(Expr::Time),
        ];
        leaf.prop_recursive(4, 24, 3, |inner| {
            prop_oneof![
                inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
                (inner.clone(), prop_oneof![
                    Just(UnaryFn::Exp),
                    Just(UnaryFn::Sin),
                    Just(UnaryFn::Cos),
                    Just(UnaryFn::Abs),
                    Just(UnaryFn::Step)
                ])
                    .prop_map(|(a, f)| Expr::Unary(f, Box::new(a))),
                (inner.clone(), inner.clone(), prop_oneof![
                    Just(BinaryOp::Add),
                    Just(BinaryOp::Sub),
                    Just(BinaryOp::Mul)
                ])
                    .prop_map(|(a, b, op)| Expr::Binary(op, Box::new(a), Box::new(b))),
                inner.clone().prop_map(|a| Expr::Binary(
                    BinaryOp::Pow,
                    Box::new(a),
                    Box::new(Expr::Const(2.0))
                )),
                inner.clone().prop_map(|a| Expr::Binary(
                    BinaryOp::Div,
                    Box::new(a),
                    Box::new(Expr::Binary(
                        BinaryOp::Add,
                        Box::new(Expr::Const(2.0)),
                        Box::new(Expr::Unary(UnaryFn::Sin, Box::new(Expr::State(0))))
                    ))
                )),
                proptest::collection::vec(inner.clone(), 1..4).prop_map(Expr::Min),
                proptest::collection::vec(inner, 1..4).prop_map(Expr::Max),
            ]
        })
    }

    fn arb_box() -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((-2.0..2.0f64, 0.0..1.5f64).prop_map(|(l, w)| (l, l + w)), 4)
    }

    proptest! {
        #[test]
        fn interval_extension_is_sound(e in arb_expr(), b in arb_box(), picks in proptest::collection::vec(0.0..=1.0f64, 4)) {
            let iv = bx(&b);
            let enclosure = e.eval_interval(iv[3], &iv[..2], &iv[2..3]).unwrap();
            let pt: Vec<f64> = iv.iter().zip(&picks).map(|(i, s)| (i.lo + s * i.width()).min(i.hi)).collect();
            let v = e.eval(pt[3], &pt[..2], &pt[2..3]).unwrap();
            let tol = 1e-9 * (1.0 + v.abs());
            prop_assert!(enclosure.lo - tol <= v && v <= enclosure.hi + tol, "{} not in {} for {}", v, enclosure, e);
        }

        #[test]
        fn interval_extension_is_isotone(e in arb_expr(), b in arb_box(), shrink in proptest::collection::vec((0.0..0.5f64, 0.0..0.5f64), 4)) {
            let outer = bx(&b);
            let inner: Vec<Interval> = outer.iter().zip(&shrink).map(|(i, (a, c))| {
                Interval::new(i.lo + a * i.width(), i.hi - c * i.width())
            }).collect();
            let big = e.eval_interval(outer[3], &outer[..2], &outer[2..3]).unwrap();
            let small = e.eval_interval(inner[3], &inner[..2], &inner[2..3]).unwrap();
            let tol = 1e-9 * (1.0 + big.mag());
            prop_assert!(big.lo - tol <= small.lo && small.hi <= big.hi + tol);
        }

        #[test]
        fn print_parse_print_is_stable(e in arb_expr()) {
            let printed = e.to_string();
            let reparsed = Expr::parse(&printed).unwrap();
            prop_assert_eq!(reparsed.to_string(), printed);
        }
    }
}
