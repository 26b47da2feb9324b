use proptest::prelude::*;

use super::*;

fn std(text: &str) -> FormulaAst {
    parse_formula(text, ParseMode::Standard).unwrap()
}

fn rhs(text: &str) -> RhsSpec {
    std(text).terms().unwrap().clone()
}

fn vars(names: &[&str]) -> FixedTerm {
    FixedTerm {
        vars: names.iter().map(|s| s.to_string()).collect(),
    }
}

#[test]
fn fish_population_terms() {
    let ast = std("count ~ persons + child + camper");
    assert_eq!(ast.lhs_names(), ["count"]);
    let r = ast.terms().unwrap();
    assert!(r.intercept);
    assert_eq!(
        r.fixed_terms,
        vec![vars(&["persons"]), vars(&["child"]), vars(&["camper"])]
    );
    assert!(r.group_terms.is_empty());
}

#[test]
fn multi_membership_without_weights() {
    let r = rhs("y ~ 1 + (1 | mm(s1, s2))");
    assert_eq!(r.group_terms.len(), 1);
    assert_eq!(
        r.group_terms[0].group,
        GroupExpr::Mm {
            members: vec!["s1".into(), "s2".into()],
            weights: None
        }
    );
}

#[test]
fn multi_membership_with_weights() {
    let r = rhs("y ~ 1 + (1 | mm(s1, s2, weights = cbind(w1, w2)))");
    assert_eq!(
        r.group_terms[0].group,
        GroupExpr::Mm {
            members: vec!["s1".into(), "s2".into()],
            weights: Some(vec!["w1".into(), "w2".into()])
        }
    );
}

#[test]
fn intercept_markers() {
    assert!(!rhs("y ~ 0 + x").intercept);
    assert_eq!(rhs("y ~ 0 + x").fixed_terms, vec![vars(&["x"])]);
    assert!(!rhs("y ~ x - 1").intercept);
    assert!(!rhs("y ~ -1 + x").intercept);
    assert!(rhs("y ~ 1").intercept);
    assert!(rhs("y ~ x").intercept);
}

#[test]
fn smooth_and_id_term() {
    let r = rhs("rentsqm ~ s(area) + (1|ID1|district)");
    assert_eq!(r.special_terms.len(), 1);
    assert_eq!(r.special_terms[0].fun, SpecialFun::S);
    assert_eq!(r.special_terms[0].variables(), ["area"]);
    assert_eq!(r.group_terms.len(), 1);
    assert_eq!(r.group_terms[0].id.as_deref(), Some("ID1"));
    assert_eq!(r.group_terms[0].bar, Bar::Correlated);
    assert_eq!(r.group_terms[0].group, GroupExpr::Var("district".into()));
    assert!(r.fixed_terms.is_empty());
}

#[test]
fn star_expands_to_main_effects_and_interaction() {
    let r = rhs("y ~ a * b");
    assert_eq!(
        r.fixed_terms,
        vec![vars(&["a"]), vars(&["b"]), vars(&["a", "b"])]
    );
    let r = rhs("y ~ a*b*c");
    assert_eq!(r.fixed_terms.len(), 7);
    assert_eq!(r.fixed_terms[6], vars(&["a", "b", "c"]));
}

#[test]
fn aterms_on_the_response() {
    let ast = std("y | weights(w) ~ x");
    let resp = ast.response.unwrap();
    assert_eq!(resp.variables, ["y"]);
    assert_eq!(resp.aterms.len(), 1);
    assert_eq!(resp.aterms[0].fun, "weights");
    let ast = std("y | se(s) + weights(w) ~ x");
    assert_eq!(ast.response.unwrap().aterms.len(), 2);
}

#[test]
fn combined_lhs() {
    let ast = std("ult + omega + theta ~ 1 + (1|ID1|AY)");
    assert_eq!(ast.lhs_names(), ["ult", "omega", "theta"]);
}

#[test]
fn group_expression_precedence() {
    let r = rhs("y ~ (1 | g1/g2:g3 + h)");
    let g = &r.group_terms[0].group;
    assert_eq!(g.to_string(), "g1/g2:g3 + h");
    match g {
        GroupExpr::Plus(l, _) => assert!(matches!(**l, GroupExpr::Slash(..))),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn uncorrelated_bar() {
    let r = rhs("y ~ (x || g)");
    assert_eq!(r.group_terms[0].bar, Bar::Uncorrelated);
    assert_eq!(r.group_terms[0].inner.fixed_terms, vec![vars(&["x"])]);
    assert!(r.group_terms[0].inner.intercept);
}

#[test]
fn nonlinear_growth_curve() {
    let e = parse_nl_expression("ult * (1 - exp(-(dev / theta)^omega))").unwrap();
    assert_eq!(e.identifiers(), ["ult", "dev", "theta", "omega"]);
    let ast = parse_formula(
        "cum ~ ult * (1 - exp(-(dev / theta)^omega))",
        ParseMode::Nonlinear,
    )
    .unwrap();
    assert_eq!(ast.nl_expr().unwrap(), &e);
}

#[test]
fn nl_single_identifier() {
    assert_eq!(parse_nl_expression("x").unwrap(), NlExpr::Ident("x".into()));
}

#[test]
fn unary_minus_binds_looser_than_power() {
    let e = parse_nl_expression("-(2)^2").unwrap();
    assert_eq!(
        e,
        NlExpr::Neg(Box::new(NlExpr::Pow(
            Box::new(NlExpr::Literal(2.0)),
            Box::new(NlExpr::Literal(2.0))
        )))
    );
    assert_eq!(e.eval_with(&|_| 0.0), -4.0);
    // right associative
    let e = parse_nl_expression("2^3^2").unwrap();
    assert_eq!(e.eval_with(&|_| 0.0), 512.0);
    let e = parse_nl_expression("2^-1").unwrap();
    assert_eq!(e.eval_with(&|_| 0.0), 0.5);
    let e = parse_nl_expression("1 - 2 - 3").unwrap();
    assert_eq!(e.eval_with(&|_| 0.0), -4.0);
    let e = parse_nl_expression("8 / 2 / 2").unwrap();
    assert_eq!(e.eval_with(&|_| 0.0), 2.0);
}

#[test]
fn nl_errors() {
    let err = parse_nl_expression("sqrt(x)").unwrap_err();
    assert!(err.message.contains("unknown function"));
    let err = parse_nl_expression("exp(x, y)").unwrap_err();
    assert!(err.message.contains("exactly one argument"));
    let err = parse_nl_expression("exp()").unwrap_err();
    assert!(err.message.contains("exactly one argument"));
    assert!(parse_nl_expression("a | b").is_err());
    assert!(parse_nl_expression("a ~ b").is_err());
    assert!(parse_nl_expression("(a + b").is_err());
}

#[test]
fn syntax_errors_carry_positions() {
    let err = parse_formula("y ~", ParseMode::Standard).unwrap_err();
    assert_eq!(err.span, Span::new(3, 3));
    let err = parse_formula("y ~ (1 || ID| g)", ParseMode::Standard).unwrap_err();
    assert!(err.message.contains("`|ID|` cannot be combined with `||`"));
    let err = parse_formula("y ~ (1 | mm(s1))", ParseMode::Standard).unwrap_err();
    assert!(err.message.contains("at least two"));
    let err = parse_formula(
        "y ~ (1 | mm(s1, s2, weights = cbind(w1)))",
        ParseMode::Standard,
    )
    .unwrap_err();
    assert!(err.message.contains("weight columns"));
    let err = parse_formula("y ~ x + 2", ParseMode::Standard).unwrap_err();
    assert!(err.message.contains("intercept marker"));
    let err = parse_formula("y ~ log(x)", ParseMode::Standard).unwrap_err();
    assert!(err.message.contains("not supported"));
    let err = parse_formula("y | foo(w) ~ x", ParseMode::Standard).unwrap_err();
    assert!(err.message.contains("unknown addition term"));
    let err = parse_formula("y ~ x - z", ParseMode::Standard).unwrap_err();
    assert!(err.message.contains("removing terms"));
    assert!(parse_formula("y ~ x ~ z", ParseMode::Standard).is_err());
    assert!(parse_formula("y x", ParseMode::Standard).is_err());
    assert!(parse_formula("y ~ (1 | g", ParseMode::Standard).is_err());
    assert!(parse_formula("y ~ ((1 | g) | h)", ParseMode::Standard).is_err());
}

#[test]
fn special_terms_parse_even_if_unsupported_later() {
    let r = rhs("y ~ t2(area, yearc) + mo(x) + cs(z) + me(x, sdx) + gp(t) + s(x, k = 5)");
    assert_eq!(r.special_terms.len(), 6);
    assert_eq!(r.special_terms[5].named_number("k"), Some(5.0));
    assert_eq!(r.special_terms[0].label(), "t2areayearc");
}

#[test]
fn error_render_points_at_span() {
    let text = "y ~ x $";
    let err = parse_formula(text, ParseMode::Standard).unwrap_err();
    let rendered = err.render(text);
    assert!(rendered.ends_with("      ^"), "{rendered}");
}

#[test]
fn printing_reparses() {
    for text in [
        "count ~ persons + child + camper",
        "y ~ 0 + x + (0 + x || g) + (1 |ID1| g1:g2)",
        "y | weights(w) ~ s(x, k = 5) + (1 | mm(s1, s2, weights = cbind(w1, w2)))",
        "y ~ (1 | gr(g1/(g2 + g3)))",
    ] {
        let a = std(text);
        let b = std(&a.to_string());
        assert!(a.same_structure(&b), "{text} -> {a}");
    }
}

// ---------- property tests ----------

fn ident() -> impl Strategy<Value = String> {
    prop::sample::select(vec!["a", "b", "x1", "g", "h.2", "dev", "theta", "w_1"])
        .prop_map(str::to_string)
}

fn nl_expr() -> impl Strategy<Value = NlExpr> {
    let leaf = prop_oneof![
        (0u32..1000).prop_map(|v| NlExpr::Literal(v as f64 / 8.0)),
        ident().prop_map(NlExpr::Ident),
    ];
    leaf.prop_recursive(5, 40, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| NlExpr::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| NlExpr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| NlExpr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| NlExpr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| NlExpr::Div(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| NlExpr::Pow(Box::new(a), Box::new(b))),
            inner
                .clone()
                .prop_map(|a| NlExpr::Call(NlFun::Exp, Box::new(a))),
            inner.prop_map(|a| NlExpr::Call(NlFun::Log, Box::new(a))),
        ]
    })
}

fn group_expr() -> impl Strategy<Value = GroupExpr> {
    let leaf = ident().prop_map(GroupExpr::Var);
    let tree = leaf.prop_recursive(3, 12, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| GroupExpr::Colon(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| GroupExpr::Slash(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| GroupExpr::Plus(Box::new(a), Box::new(b))),
            inner.prop_map(|a| GroupExpr::Gr(Box::new(a))),
        ]
    });
    prop_oneof![
        4 => tree,
        1 => (prop::collection::vec(ident(), 2..4), any::<bool>()).prop_map(|(m, w)| {
            let weights = w.then(|| (0..m.len()).map(|i| format!("w{i}")).collect());
            GroupExpr::Mm { members: m, weights }
        }),
    ]
}

fn fixed_terms() -> impl Strategy<Value = Vec<FixedTerm>> {
    prop::collection::vec(prop::collection::vec(ident(), 1..3), 0..4).prop_map(|ts| {
        let mut out: Vec<FixedTerm> = Vec::new();
        for t in ts {
            let mut vars: Vec<String> = Vec::new();
            for v in t {
                if !vars.contains(&v) {
                    vars.push(v);
                }
            }
            let term = FixedTerm { vars };
            if !out.contains(&term) {
                out.push(term);
            }
        }
        out
    })
}

fn rhs_spec() -> impl Strategy<Value = RhsSpec> {
    let group = (
        any::<bool>(),
        fixed_terms(),
        0u8..3,
        prop::option::of(prop::sample::select(vec!["ID1", "p", "7"])),
        group_expr(),
    )
        .prop_map(|(intercept, fixed_terms, bar, id, group)| {
            let bar = if bar == 0 {
                Bar::Uncorrelated
            } else {
                Bar::Correlated
            };
            GroupTermRaw {
                inner: RhsSpec {
                    intercept,
                    fixed_terms,
                    ..RhsSpec::default()
                },
                id: if bar == Bar::Correlated {
                    id.map(str::to_string)
                } else {
                    None
                },
                bar,
                group,
            }
        });
    let special = (
        prop::sample::select(vec!["s", "t2", "gp"]),
        ident(),
        prop::option::of(4u32..12),
    )
        .prop_map(|(f, v, k)| {
            let mut args = vec![Arg {
                name: None,
                value: ArgValue::Ident(v),
            }];
            if let Some(k) = k {
                args.push(Arg {
                    name: Some("k".into()),
                    value: ArgValue::Number(k as f64),
                });
            }
            SpecialTerm {
                fun: SpecialFun::from_name(f).unwrap(),
                args,
            }
        });
    (
        any::<bool>(),
        fixed_terms(),
        prop::collection::vec(group, 0..3),
        prop::collection::vec(special, 0..2),
    )
        .prop_map(
            |(intercept, fixed_terms, group_terms, special_terms)| RhsSpec {
                intercept,
                fixed_terms,
                group_terms,
                special_terms,
            },
        )
}

fn reformat_whitespace(text: &str, seed: u64) -> String {
    let tokens = tokenize(text).unwrap();
    let mut out = String::new();
    let mut state = seed;
    for t in tokens {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        match (state >> 33) % 3 {
            0 => {}
            1 => out.push(' '),
            _ => out.push_str("  \t"),
        }
        out.push_str(t.kind.text());
    }
    out
}

proptest! {
    #[test]
    fn nl_print_parse_round_trip(e in nl_expr()) {
        let text = e.to_string();
        let back = parse_nl_expression(&text).unwrap();
        prop_assert_eq!(back, e, "{}", text);
    }

    #[test]
    fn standard_print_parse_round_trip(r in rhs_spec()) {
        let ast = FormulaAst {
            response: Some(ResponseSpec { variables: vec!["y".into()], aterms: vec![] }),
            rhs: Rhs::Terms(r),
            raw_text: String::new(),
        };
        let text = ast.to_string();
        let back = parse_formula(&text, ParseMode::Standard).unwrap();
        prop_assert!(ast.same_structure(&back), "{}\n{:?}\n{:?}", text, ast, back);
    }

    #[test]
    fn whitespace_does_not_matter(r in rhs_spec(), seed in any::<u64>()) {
        let text = format!("y ~ {r}");
        let a = parse_formula(&text, ParseMode::Standard).unwrap();
        let b = parse_formula(&reformat_whitespace(&text, seed), ParseMode::Standard).unwrap();
        prop_assert!(a.same_structure(&b));
    }

    #[test]
    fn error_spans_lie_within_input(text in "[ a-z0-9~+*/:|()^,=.-]{0,24}") {
        for mode in [ParseMode::Standard, ParseMode::Nonlinear] {
            if let Err(e) = parse_formula(&text, mode) {
                prop_assert!(e.span.start <= e.span.end && e.span.end <= text.len());
            }
        }
        if let Err(e) = parse_nl_expression(&text) {
            prop_assert!(e.span.end <= text.len());
        }
    }
}
