use approx::assert_relative_eq;
use indexmap::IndexMap;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use statrs::distribution::{Discrete, Poisson};

use super::*;
use crate::design::assemble;
use crate::formula::{parse_nl_expression, NlExpr};
use crate::modelspec::{validate, Family, ModelSpec, PriorDensity, PriorSpec};
use crate::tabular::{Column, Dataset};

fn posterior(
    main: &str,
    extra: &[&str],
    family: Family,
    nl: bool,
    priors: &[&str],
    d: &Dataset,
) -> Posterior {
    let priors: Vec<PriorSpec> = priors.iter().map(|p| p.parse().unwrap()).collect();
    let s = ModelSpec::from_strings(main, extra, family, nl, priors).unwrap();
    let c = validate(&s, d).unwrap();
    let ds = assemble(&c, d).unwrap();
    Posterior::new(ds, &s.priors).unwrap()
}

fn labels(rng: &mut ChaCha8Rng, n: usize, pool: &[&str]) -> Column {
    let v: Vec<&str> = (0..n)
        .map(|i| {
            if i < pool.len() {
                pool[i]
            } else {
                pool[rng.random_range(0..pool.len())]
            }
        })
        .collect();
    Column::factor_from_strings(&v)
}

/// Small synthetic data set covering every column kind the models use.
fn synthetic(seed: u64, n: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut unif =
        |lo: f64, hi: f64| -> Vec<f64> { (0..n).map(|_| rng.random_range(lo..hi)).collect() };
    let x = unif(-1.0, 1.0);
    let z = unif(-1.0, 1.0);
    let t = unif(0.5, 3.0);
    let w = unif(0.2, 2.0);
    let m1 = unif(0.1, 0.9);
    let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| 1.0 + a - 0.5 * b).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let cnt: Vec<i64> = (0..n)
        .map(|i| {
            if i % 3 == 0 {
                0
            } else {
                rng.random_range(0..6)
            }
        })
        .collect();
    let y: Vec<f64> = y
        .iter()
        .map(|v| v + 0.3 * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let f = labels(&mut rng, n, &["p", "q", "r"]);
    let g = labels(&mut rng, n, &["a", "b", "c", "d", "e"]);
    let h = labels(&mut rng, n, &["b", "c", "d", "e", "f"]);
    let m2: Vec<f64> = m1.iter().map(|v| 1.0 - v).collect();
    Dataset::new(vec![
        ("y".into(), Column::Numeric(y)),
        ("cnt".into(), Column::Integer(cnt)),
        ("x".into(), Column::Numeric(x)),
        ("z".into(), Column::Numeric(z)),
        ("t".into(), Column::Numeric(t)),
        ("w".into(), Column::Numeric(w)),
        ("m1".into(), Column::Numeric(m1)),
        ("m2".into(), Column::Numeric(m2)),
        ("f".into(), f),
        ("g".into(), g),
        ("h".into(), h),
    ])
    .unwrap()
}

struct Combo {
    name: &'static str,
    main: &'static str,
    extra: &'static [&'static str],
    family: Family,
    nl: bool,
}

const fn combo(
    name: &'static str,
    main: &'static str,
    extra: &'static [&'static str],
    family: Family,
    nl: bool,
) -> Combo {
    Combo {
        name,
        main,
        extra,
        family,
        nl,
    }
}

const COMBOS: &[Combo] = &[
    combo("gaussian-fixed", "y ~ x + f", &[], Family::Gaussian, false),
    combo(
        "gaussian-intercept-block",
        "y ~ x + (1 | g)",
        &[],
        Family::Gaussian,
        false,
    ),
    combo(
        "gaussian-correlated",
        "y ~ x + (1 + x | g)",
        &[],
        Family::Gaussian,
        false,
    ),
    combo(
        "gaussian-correlated-q3",
        "y ~ x + (1 + x + z | g)",
        &[],
        Family::Gaussian,
        false,
    ),
    combo(
        "gaussian-uncorrelated",
        "y ~ x + (1 + x || g)",
        &[],
        Family::Gaussian,
        false,
    ),
    combo(
        "gaussian-mm-weighted",
        "y ~ 1 + (1 | mm(g, h, weights = cbind(m1, m2)))",
        &[],
        Family::Gaussian,
        false,
    ),
    combo(
        "gaussian-smooth",
        "y ~ s(x, k = 6)",
        &[],
        Family::Gaussian,
        false,
    ),
    combo(
        "gaussian-sigma-id",
        "y ~ x + (1 | ID | g)",
        &["sigma ~ z + (1 | ID | g)"],
        Family::Gaussian,
        false,
    ),
    combo(
        "gaussian-sigma-smooth",
        "y ~ x",
        &["sigma ~ s(z, k = 5)"],
        Family::Gaussian,
        false,
    ),
    combo(
        "gaussian-weights-nested",
        "y | weights(w) ~ x + (1 | g / f)",
        &[],
        Family::Gaussian,
        false,
    ),
    combo(
        "gaussian-nonlinear",
        "y ~ a * (1 - exp(-(t / exp(b))^c)) + d * x",
        &["a ~ 1 + (1 | g)", "b ~ 1", "c ~ 1", "d ~ 0 + f"],
        Family::Gaussian,
        true,
    ),
    combo("poisson-fixed", "cnt ~ x + f", &[], Family::Poisson, false),
    combo(
        "poisson-correlated",
        "cnt ~ x + (1 + x | g)",
        &[],
        Family::Poisson,
        false,
    ),
    combo(
        "poisson-mm",
        "cnt ~ x + (1 | mm(g, h))",
        &[],
        Family::Poisson,
        false,
    ),
    combo(
        "poisson-smooth",
        "cnt ~ s(t, k = 5) + (1 | f)",
        &[],
        Family::Poisson,
        false,
    ),
    combo(
        "poisson-nonlinear",
        "cnt ~ a + b * log(t)",
        &["a ~ 1 + (1 | g)", "b ~ 1 + x"],
        Family::Poisson,
        true,
    ),
    combo(
        "zip-constant",
        "cnt ~ x + f",
        &[],
        Family::ZeroInflatedPoisson,
        false,
    ),
    combo(
        "zip-zi-formula",
        "cnt ~ x + f",
        &["zi ~ z + (1 | g)"],
        Family::ZeroInflatedPoisson,
        false,
    ),
    combo(
        "zip-id",
        "cnt ~ x + (1 + x | ID | g)",
        &["zi ~ (1 | ID | g)"],
        Family::ZeroInflatedPoisson,
        false,
    ),
    combo(
        "zip-mm-smooth",
        "cnt ~ s(t, k = 5) + (1 | mm(g, h))",
        &[],
        Family::ZeroInflatedPoisson,
        false,
    ),
];

fn build(c: &Combo, d: &Dataset) -> Posterior {
    posterior(c.main, c.extra, c.family, c.nl, &[], d)
}

/// Largest `|analytic - numeric| / max(1, |numeric|)` over all coordinates,
/// numeric derivatives by central differences with step `1e-6`.
fn max_fd_error(post: &Posterior, x: &[f64]) -> f64 {
    let (lp, g) = post.log_posterior_grad(x);
    assert!(lp.is_finite());
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut xp = x.to_vec();
    for k in 0..x.len() {
        xp[k] = x[k] + h;
        let up = post.log_density(&xp);
        xp[k] = x[k] - h;
        let down = post.log_density(&xp);
        xp[k] = x[k];
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((g[k] - fd).abs() / fd.abs().max(1.0));
    }
    worst
}

#[test]
fn combos_cover_enough_cases() {
    assert!(COMBOS.len() >= 12);
    let d = synthetic(1, 40);
    for c in COMBOS {
        let p = build(c, &d);
        assert!(p.dim() > 0, "{}", c.name);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn gradients_match_finite_differences(seed in any::<u64>()) {
        let d = synthetic(7, 40);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in COMBOS {
            let post = build(c, &d);
            let x: Vec<f64> = (0..post.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let err = max_fd_error(&post, &x);
            prop_assert!(err < 1e-6, "{}: relative error {}", c.name, err);
        }
    }

    #[test]
    fn log_density_is_permutation_invariant(seed in any::<u64>()) {
        let d = synthetic(seed, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..d.n_rows()).collect();
        for i in (1..order.len()).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let shuffled = d.select_rows(&order);
        for c in [&COMBOS[1], &COMBOS[5], &COMBOS[17]] {
            let a = build(c, &d);
            let b = build(c, &shuffled);
            prop_assert_eq!(a.dim(), b.dim());
            let x: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (la, lb) = (a.log_density(&x), b.log_density(&x));
            prop_assert!((la - lb).abs() < 1e-9 * la.abs().max(1.0), "{}: {} vs {}", c.name, la, lb);
        }
    }

    #[test]
    fn constrained_round_trip(seed in any::<u64>()) {
        let d = synthetic(3, 30);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for c in COMBOS {
            let post = build(c, &d);
            let space = post.space();
            let x: Vec<f64> = (0..post.dim()).map(|_| rng.random_range(-2.0..2.0)).collect();
            let view = space.constrain(&x).unwrap();
            for l in &view.chol {
                for i in 0..l.nrows() {
                    prop_assert!((l.row(i).norm() - 1.0).abs() < 1e-12);
                    prop_assert!(l[(i, i)] > 0.0);
                    for j in i + 1..l.ncols() {
                        prop_assert_eq!(l[(i, j)], 0.0);
                    }
                }
            }
            let back = space.unconstrain(&view);
            for (a, b) in x.iter().zip(&back) {
                prop_assert!((a - b).abs() < 1e-8, "{}: {} vs {}", c.name, a, b);
            }
            let row = space.flatten(&view);
            prop_assert_eq!(row.len(), space.draw_names().len());
            let again = space.view_from_draw(&row).unwrap();
            prop_assert_eq!(space.flatten(&again).len(), row.len());
            for (a, b) in row.iter().zip(space.flatten(&again)) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            let ll: f64 = post.pointwise_loglik(post.design(), &view).unwrap().iter().sum();
            let direct = post.log_likelihood(&x);
            prop_assert!((ll - direct).abs() < 1e-8 * direct.abs().max(1.0), "{}: {} vs {}", c.name, ll, direct);
        }
    }
}

#[test]
fn link_inverse_examples() {
    assert_eq!(link_inverse(Link::Logit, &[0.0]), [0.5]);
    assert_eq!(link_inverse(Link::Log, &[0.0]), [1.0]);
    assert_relative_eq!(
        link_inverse(Link::Logit, &[-0.95])[0],
        0.278_884_821_977_136_9,
        max_relative = 1e-14
    );
    assert_eq!(link_inverse(Link::Identity, &[-3.5, 2.0]), [-3.5, 2.0]);
}

#[test]
fn zip_examples() {
    assert_eq!(zip_log_pmf(0, 0.0, 0.5).unwrap(), 0.0);
    assert_relative_eq!(
        zip_log_pmf(0, 2.0, 0.41).unwrap(),
        -0.713_660_513_443_935,
        max_relative = 1e-13
    );
    let total: f64 = (0..=200)
        .map(|y| zip_log_pmf(y, 5.0, 0.3).unwrap().exp())
        .sum();
    assert!((total - 1.0).abs() < 1e-10);
    assert!(matches!(
        zip_log_pmf(1, -0.1, 0.5),
        Err(DensityError::Rate(_))
    ));
    assert!(matches!(
        zip_log_pmf(1, 1.0, 1.5),
        Err(DensityError::Probability(_))
    ));
    assert_eq!(zip_log_pmf(3, 0.0, 0.2).unwrap(), f64::NEG_INFINITY);
}

#[test]
fn zip_normalizes_on_grid() {
    for lambda in [0.1, 1.0, 5.0, 20.0] {
        for zi in [0.0, 0.3, 0.9] {
            let upper = (lambda + 40.0 * f64::sqrt(lambda) + 50.0).ceil() as u64;
            let total: f64 = (0..=upper)
                .map(|y| zip_log_pmf(y, lambda, zi).unwrap().exp())
                .sum();
            assert!(
                total >= 1.0 - 1e-10 && total <= 1.0 + 1e-10,
                "{lambda} {zi}: {total}"
            );
        }
    }
}

#[test]
fn zip_without_inflation_is_poisson() {
    for lambda in [0.1, 1.0, 5.0, 20.0] {
        let oracle = Poisson::new(lambda).unwrap();
        for y in 0..60u64 {
            let a = zip_log_pmf(y, lambda, 0.0).unwrap();
            let b = oracle.ln_pmf(y);
            assert!(
                (a - b).abs() < 1e-12 * b.abs().max(1.0),
                "{lambda} {y}: {a} vs {b}"
            );
        }
    }
}

fn growth() -> NlExpr {
    parse_nl_expression("ult * (1 - exp(-(dev / theta)^omega))").unwrap()
}

fn cols(pairs: &[(&str, Vec<f64>)]) -> IndexMap<String, Vec<f64>> {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

#[test]
fn growth_curve_values() {
    let e = growth();
    let covs = cols(&[("dev", vec![46.07, 1e-12, 6.0])]);
    let pars = cols(&[
        ("ult", vec![5273.70; 3]),
        ("theta", vec![46.07; 3]),
        ("omega", vec![1.34; 3]),
    ]);
    let v = eval_nl(&e, &covs, &pars).unwrap();
    assert_relative_eq!(
        v[0],
        5273.70 * (1.0 - (-1.0f64).exp()),
        max_relative = 1e-14
    );
    assert!(v[1].abs() < 1e-9);
    assert_relative_eq!(v[2], 332.500_956_879_658_05, max_relative = 1e-12);
}

#[test]
fn nl_domain_errors_report_the_row() {
    let e = growth();
    let covs = cols(&[("dev", vec![6.0, 18.0, 30.0])]);
    let pars = cols(&[
        ("ult", vec![1.0; 3]),
        ("theta", vec![40.0, -3.0, 40.0]),
        ("omega", vec![1.5; 3]),
    ]);
    match eval_nl(&e, &covs, &pars) {
        Err(DensityError::Domain { row, .. }) => assert_eq!(row, 2),
        other => panic!("expected a domain error, got {other:?}"),
    }
    let ok = cols(&[
        ("ult", vec![1.0; 3]),
        ("theta", vec![-3.0; 3]),
        ("omega", vec![2.0; 3]),
    ]);
    assert!(eval_nl(&e, &covs, &ok).is_ok());
    let div = parse_nl_expression("a / b").unwrap();
    let r = eval_nl(
        &div,
        &cols(&[("b", vec![1.0, 0.0])]),
        &cols(&[("a", vec![1.0, 1.0])]),
    );
    assert!(matches!(r, Err(DensityError::Domain { row: 2, .. })));
    assert!(matches!(
        eval_nl(&div, &cols(&[]), &cols(&[("a", vec![1.0])])),
        Err(DensityError::Unbound(_))
    ));
}

#[test]
fn tape_derivatives_match_differences() {
    let e = growth();
    let tape = NlTape::compile(&e);
    assert_eq!(tape.slots(), ["ult", "dev", "theta", "omega"]);
    let x = [5000.0, 30.0, 46.0, 1.3];
    let mut vals = vec![0.0; tape.len()];
    let mut adj = vec![0.0; tape.len()];
    let mut d = vec![0.0; 4];
    tape.forward(&x, &mut vals).unwrap();
    tape.backward(&vals, 1.0, &mut adj, &mut d);
    for k in 0..4 {
        let h = 1e-6 * x[k].abs().max(1.0);
        let mut up = x;
        up[k] += h;
        let mut down = x;
        down[k] -= h;
        let fd = (tape.forward(&up, &mut vals).unwrap() - tape.forward(&down, &mut vals).unwrap())
            / (2.0 * h);
        assert_relative_eq!(d[k], fd, max_relative = 1e-6);
    }
}

#[test]
fn prior_normal_at_its_mean() {
    let (v, g) = lpdf(
        &PriorDensity::Normal {
            mu: 5000.0,
            sd: 1000.0,
        },
        5000.0,
    );
    assert_relative_eq!(v, -7.826_693_812_186_81, max_relative = 1e-14);
    assert_eq!(g, 0.0);
}

#[test]
fn lkj_one_is_uniform_on_two_by_two() {
    for r in [-0.9, -0.2, 0.0, 0.5, 0.99] {
        let l = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, r, f64::sqrt(1.0 - r * r)]);
        assert_relative_eq!(lkj_corr_lpdf(&l, 1.0).exp(), 0.5, max_relative = 1e-12);
    }
    assert_relative_eq!(
        lkj_log_constant(3, 1.0),
        -1.596_312_591_138_855,
        max_relative = 1e-12
    );
}

#[test]
fn correlation_jacobian_integrates_to_one() {
    // density of the single unconstrained value of a 2 × 2 block under lkj(2)
    let eta = 2.0;
    let coef = 2.0 + 2.0 * eta - 1.0;
    let c = lkj_log_constant(2, eta);
    let step = 1e-3;
    let total: f64 = (-40_000..40_000)
        .map(|k| {
            let v = k as f64 * step;
            (c - 0.5 * coef * (1.0 + v * v).ln()).exp() * step
        })
        .sum();
    assert!((total - 1.0).abs() < 1e-3, "{total}");
}

#[test]
fn log_scale_jacobian_matches_prior_samples() {
    // sd ~ half_student_t(3, 0, 10); the density of log(sd) is p(e^s) e^s
    let dens = PriorDensity::HalfStudentT { df: 3.0, sd: 10.0 };
    let t = StudentT::new(3.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 200_000;
    let (lo, hi, bins) = (-2.0, 6.0, 16);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for _ in 0..n {
        let s = (10.0 * t.sample(&mut rng) as f64).abs().ln();
        if (lo..hi).contains(&s) {
            counts[((s - lo) / width) as usize] += 1;
        }
    }
    for (b, &cnt) in counts.iter().enumerate() {
        let mid = lo + (b as f64 + 0.5) * width;
        let analytic: f64 = (0..200)
            .map(|k| {
                let s = lo + b as f64 * width + (k as f64 + 0.5) * width / 200.0;
                (lpdf_positive(&dens, s.exp()).0 + s).exp() * width / 200.0
            })
            .sum();
        let observed = cnt as f64 / n as f64;
        let se = (analytic * (1.0 - analytic) / n as f64).sqrt();
        assert!(
            (observed - analytic).abs() < 5.0 * se + 1e-4,
            "bin at {mid}: {observed} vs {analytic}"
        );
    }
}

#[test]
fn gaussian_intercept_stationary_at_zero() {
    let d = Dataset::new(vec![("y".into(), Column::Numeric(vec![0.0, 0.0]))]).unwrap();
    let post = posterior("y ~ 1", &[], Family::Gaussian, false, &[], &d);
    assert_eq!(post.space().names(), ["b_Intercept", "log_sigma"]);
    for ls in [-1.0, 0.0, 2.0] {
        let (_, g) = post.log_posterior_grad(&[0.0, ls]);
        assert_eq!(g[0], 0.0);
    }
}

#[test]
fn poisson_likelihood_stationary_at_log_mean() {
    let d = Dataset::new(vec![("y".into(), Column::Integer(vec![1, 2, 3]))]).unwrap();
    let post = posterior("y ~ 1", &[], Family::Poisson, false, &[], &d);
    let (_, g) = post.log_likelihood_grad(&[2f64.ln()]);
    assert!(g[0].abs() < 1e-12, "{}", g[0]);
}

#[test]
fn weights_scale_the_likelihood_only() {
    let d = synthetic(5, 20);
    let doubled = d.with_column("w", Column::Numeric(vec![2.0; 20])).unwrap();
    let ones = d.with_column("w", Column::Numeric(vec![1.0; 20])).unwrap();
    let a = posterior(
        "y | weights(w) ~ x + (1 | g)",
        &[],
        Family::Gaussian,
        false,
        &[],
        &doubled,
    );
    let b = posterior(
        "y | weights(w) ~ x + (1 | g)",
        &[],
        Family::Gaussian,
        false,
        &[],
        &ones,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..a.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    assert_relative_eq!(
        a.log_likelihood(&x),
        2.0 * b.log_likelihood(&x),
        max_relative = 1e-12
    );
    assert_relative_eq!(a.log_prior(&x), b.log_prior(&x), max_relative = 1e-12);
}

#[test]
fn scale_and_correlate_identity_and_covariance() {
    let z: Vec<f64> = (0..12).map(|i| i as f64 * 0.3 - 1.0).collect();
    let u = scale_and_correlate(&z, 4, &[1.0, 1.0, 1.0], &DMatrix::identity(3, 3));
    for g in 0..4 {
        for c in 0..3 {
            assert_eq!(u[(g, c)], z[g * 3 + c]);
        }
    }
    let l = chol_from_raw(2, &[0.8]);
    let sd = [2.0, 0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 100_000;
    let z: Vec<f64> = (0..2 * n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let u = scale_and_correlate(&z, n, &sd, &l);
    let cov = (u.transpose() * &u) / n as f64;
    let sdm = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&sd));
    let truth = &sdm * &l * l.transpose() * &sdm;
    for i in 0..2 {
        for j in 0..2 {
            let se = 5.0 * (truth[(i, i)] * truth[(j, j)] / n as f64).sqrt();
            assert!(
                (cov[(i, j)] - truth[(i, j)]).abs() < se,
                "{i}{j}: {} vs {}",
                cov[(i, j)],
                truth[(i, j)]
            );
        }
    }
}

#[test]
fn fish_style_names_and_program_names() {
    let d = synthetic(4, 30);
    let post = posterior(
        "cnt ~ x + z + f",
        &["zi ~ x"],
        Family::ZeroInflatedPoisson,
        false,
        &[],
        &d,
    );
    assert_eq!(
        post.space().names(),
        [
            "b_Intercept",
            "b_x",
            "b_z",
            "b_fq",
            "b_fr",
            "b_zi_Intercept",
            "b_zi_x"
        ]
    );
    let (params, derived) = post.space().program_names();
    assert_eq!(params, ["b", "b_zi"]);
    assert!(derived.is_empty());

    let post = posterior(
        "y ~ s(x, k = 6) + (1 + x | g)",
        &[],
        Family::Gaussian,
        false,
        &[],
        &d,
    );
    assert_eq!(
        post.space().program_names(),
        (
            vec![
                "b".into(),
                "sds_sx_1".into(),
                "zs_sx_1".into(),
                "z_1".into(),
                "sd_1".into(),
                "L_1".into(),
                "sigma".into()
            ],
            vec!["s_sx_1".into(), "r_1".into()]
        )
    );
    let draws = post.space().draw_names();
    assert_eq!(&draws[..3], ["b_Intercept", "bs_sx_1", "sds_sx_1"]);
    assert!(draws.contains(&"sd_g__x".to_string()));
    assert!(draws.contains(&"cor_g__Intercept__x".to_string()));
    assert!(draws.contains(&"r_g[c,x]".to_string()));
    assert_eq!(draws.last().unwrap(), "sigma");
}

#[test]
fn priors_resolve_by_specificity() {
    let d = Dataset::new(vec![
        ("cum".into(), Column::Numeric(vec![1.0, 2.0, 3.0, 4.0])),
        ("dev".into(), Column::Numeric(vec![6.0, 18.0, 6.0, 18.0])),
        ("AY".into(), Column::Integer(vec![1, 1, 2, 2])),
    ])
    .unwrap();
    let post = posterior(
        "cum ~ ult * (1 - exp(-(dev / theta)^omega))",
        &["ult ~ 1 + (1 | AY)", "omega ~ 1", "theta ~ 1"],
        Family::Gaussian,
        true,
        &[
            "normal(5000, 1000), nlpar = ult",
            "normal(1, 2), nlpar = omega",
            "normal(45, 10), nlpar = theta",
        ],
        &d,
    );
    let table = post.priors().table(post.space());
    let find = |n: &str| {
        table
            .iter()
            .find(|(k, _)| k == n)
            .map(|(_, v)| v.clone())
            .unwrap()
    };
    assert_eq!(find("b_ult_Intercept"), "normal(5000, 1000)");
    assert_eq!(find("b_omega_Intercept"), "normal(1, 2)");
    assert_eq!(find("b_theta_Intercept"), "normal(45, 10)");
    assert_eq!(find("sd_AY__ult_Intercept"), "half_student_t(3, 0, 10)");
    assert_eq!(find("sigma"), "half_student_t(3, 0, 10)");

    let d = synthetic(2, 20);
    let post = posterior(
        "y ~ x + z",
        &[],
        Family::Gaussian,
        false,
        &[
            "normal(0, 5)",
            "normal(1, 1), coef = z",
            "student_t(5, 2, 3), class = Intercept",
            "normal(0, 2), class = sigma",
        ],
        &d,
    );
    let table = post.priors().table(post.space());
    let got: Vec<&str> = table.iter().map(|(_, v)| v.as_str()).collect();
    assert_eq!(
        got,
        [
            "student_t(5, 2, 3)",
            "normal(0, 5)",
            "normal(1, 1)",
            "normal(0, 2)"
        ]
    );
}
