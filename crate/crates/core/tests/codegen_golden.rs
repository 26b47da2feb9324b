mod common;

/// Compares against the stored programs; set `UPDATE_GOLDEN=1` to rewrite them.
#[test]
fn programs_match_golden_files() {
    for (file, spec, data) in common::codegen_cases() {
        let text = common::program(&spec, &data);
        let path = common::golden_path(file);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::write(&path, &text).unwrap();
        }
        let want =
            std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(text, want, "program for {file} changed");
    }
}

#[test]
fn zip_program_has_mixture_likelihood_and_logit_zi() {
    let text = common::program(&common::zinb2_spec(), &common::fish_layout());
    assert!(text.contains(
        "log_sum_exp(log_inv_logit(zi[n]), log1m_inv_logit(zi[n]) + poisson_log_lpmf(0 | mu[n]))"
    ));
    assert!(text.contains("vector[N] zi = X_zi * b_zi;"));
}

#[test]
fn loss_program_keeps_the_growth_curve() {
    let text = common::program(&common::loss1_spec(), &common::loss_data());
    assert!(text.contains("ult * (1 - exp(-(dev / theta)^omega))"));
}

#[test]
fn intercept_only_program_has_four_sections() {
    let data = common::loss_data();
    let spec = hierform::modelspec::ModelSpec::from_strings(
        "cum ~ 1",
        &[],
        hierform::modelspec::Family::Gaussian,
        false,
        vec![],
    )
    .unwrap();
    let text = common::program(&spec, &data);
    for section in [
        "data {",
        "parameters {",
        "transformed parameters {",
        "model {",
    ] {
        assert_eq!(
            text.matches(&format!("\n{section}\n")).count()
                + usize::from(text.starts_with(section)),
            1
        );
    }
    let path = common::golden_path("intercept.stan");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &text).unwrap();
    }
    assert_eq!(text, std::fs::read_to_string(path).unwrap());
}
