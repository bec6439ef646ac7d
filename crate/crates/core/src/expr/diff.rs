use super::{add, call, div, mul, neg, pow, sub, Expr, Func, Var};

/// Symbolic partial derivative of `e` with respect to `wrt`.
///
/// Variables absent from `e` differentiate to the zero expression.
pub fn diff(e: &Expr, wrt: &Var) -> Expr {
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(v) => Expr::Const(if v == wrt { 1.0 } else { 0.0 }),
        Expr::Neg(a) => neg(diff(a, wrt)),
        Expr::Add(a, b) => add(diff(a, wrt), diff(b, wrt)),
        Expr::Sub(a, b) => sub(diff(a, wrt), diff(b, wrt)),
        Expr::Mul(a, b) => add(
            mul(diff(a, wrt), (**b).clone()),
            mul((**a).clone(), diff(b, wrt)),
        ),
        Expr::Div(a, b) => {
            // (a/b)' = a'/b - (a/b)·(b'/b); avoids dividing by b².
            let (da, db) = (diff(a, wrt), diff(b, wrt));
            sub(
                div(da, (**b).clone()),
                mul(div((**a).clone(), (**b).clone()), div(db, (**b).clone())),
            )
        }
        Expr::Pow(a, n) => mul(
            mul(Expr::Const(*n as f64), pow((**a).clone(), n - 1)),
            diff(a, wrt),
        ),
        Expr::Call(f, a) => {
            let inner = (**a).clone();
            let outer = match f {
                Func::Sin => call(Func::Cos, inner),
                Func::Cos => neg(call(Func::Sin, inner)),
                Func::Exp => call(Func::Exp, inner),
                Func::Tanh => sub(Expr::Const(1.0), pow(call(Func::Tanh, inner), 2)),
            };
            mul(outer, diff(a, wrt))
        }
        Expr::AbsSmooth(a, _) => mul(div((**a).clone(), e.clone()), diff(a, wrt)),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{parse, parse_with, Env};
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    #[test]
    fn linear_rule() {
        let params = HashMap::from([("a".to_string(), 2.0)]);
        let e = parse_with("-a*y1_1", &params).unwrap();
        assert_eq!(diff(&e, &Var::Current(0)), Expr::Const(-2.0));
        assert_eq!(diff(&e, &Var::Current(0)).to_string(), "-2");
    }

    #[test]
    fn chain_rule_tanh() {
        let e = parse("0.5+0.4*tanh(x0_1)").unwrap();
        assert_eq!(diff(&e, &Var::SegZero(0)).to_string(), "0.4*(1 - tanh(x0_1)^2)");
    }

    #[test]
    fn absent_variable_gives_zero() {
        let params = HashMap::from([("b".to_string(), 0.3)]);
        let e = parse_with("-b*y2_1", &params).unwrap();
        assert_eq!(diff(&e, &Var::Current(0)), Expr::Const(0.0));
    }

    /// Expressions covering every node type; shared with the model presets.
    const CORPUS: &[&str] = &[
        "-y1_1 - 0.25*y2_1",
        "-(2 + sin(th1))*y1_1 + cos(th2)*y2_1",
        "-(y1_1 - 1.2)*(y1_1 + 1.2)*y1_1",
        "y1_1*y2_2 - exp(-y2_1^2)/(1 + y1_2^2)",
        "tanh(y1_1*y2_1) + abs_smooth(y1_1 - y2_1; 0.1)",
        "0.5*(1 + tanh(x0_1))",
        "0.5 + 0.3*tanh(x0_1*xm_1@-0.5) + 0.1*sin(th1)*cos(x0_2)",
        "y1_1^3 - 2*y1_1^-1 + y2_1/abs_smooth(y1_2; 0.5)",
    ];

    type RandomEnv = (Vec<f64>, Vec<f64>, Vec<f64>, Vec<(f64, Vec<f64>)>);

    fn random_env(rng: &mut ChaCha8Rng) -> RandomEnv {
        let mut v = || (0..2).map(|_| rng.gen_range(-1.5..1.5)).collect::<Vec<f64>>();
        let (a, c, d) = (v(), v(), v());
        let pts = vec![(0.0, v()), (-0.5, v())];
        (a, c, d, pts)
    }

    #[test]
    fn symbolic_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-5;
        let wrts = [
            Var::Current(0),
            Var::Current(1),
            Var::Delayed(0),
            Var::Delayed(1),
            Var::SegZero(0),
            Var::SegZero(1),
            Var::SegLag(0, -0.5),
        ];
        for src in CORPUS {
            let e = parse(src).unwrap();
            for wrt in &wrts {
                let d = diff(&e, wrt);
                for _ in 0..200 {
                    let (angles, cur, del, pts) = random_env(&mut rng);
                    let env_at = |shift: f64| {
                        let (mut c, mut dl, mut p) = (cur.clone(), del.clone(), pts.clone());
                        match *wrt {
                            Var::Current(i) => c[i] += shift,
                            Var::Delayed(i) => dl[i] += shift,
                            Var::SegZero(i) => p[0].1[i] += shift,
                            Var::SegLag(i, _) => p[1].1[i] += shift,
                            _ => unreachable!(),
                        }
                        let env = Env {
                            angles: &angles,
                            current: &c,
                            delayed: &dl,
                            seg_points: &p,
                            s: None,
                        };
                        e.eval(&env).unwrap()
                    };
                    let env = Env {
                        angles: &angles,
                        current: &cur,
                        delayed: &del,
                        seg_points: &pts,
                        s: None,
                    };
                    let sym = d.eval(&env).unwrap();
                    let fd = (env_at(h) - env_at(-h)) / 2.0;
                    let err = (sym * h - fd).abs() / sym.abs().max(1.0);
                    assert!(err < 1e-6, "{src} d/d{}: sym {sym}, fd {}", wrt.name(), fd / h);
                }
            }
        }
    }
}
