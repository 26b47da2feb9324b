use nalgebra::{DMatrix, SymmetricEigen};

use super::DesignError;
use crate::modelspec::{coef_prefix, SmoothSpec};
use crate::tabular::Dataset;

const DEGREE: usize = 3;

/// Type-7 quantile of sorted data.
fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Full knot vector for `k` cubic basis functions: boundary knots repeated
/// four times, interior knots at quantiles of the distinct values.
pub fn quantile_knots(x: &[f64], k: usize) -> Result<Vec<f64>, String> {
    if k < DEGREE + 1 {
        return Err(format!("k = {k} is below the minimum of {}", DEGREE + 1));
    }
    let mut u: Vec<f64> = x.to_vec();
    u.sort_by(f64::total_cmp);
    u.dedup();
    if u.len() < k {
        return Err(format!(
            "{} distinct values are too few for {k} basis functions",
            u.len()
        ));
    }
    let (lo, hi) = (u[0], u[u.len() - 1]);
    let n_interior = k - DEGREE - 1;
    let mut knots = vec![lo; DEGREE + 1];
    for j in 1..=n_interior {
        knots.push(quantile_sorted(&u, j as f64 / (n_interior + 1) as f64));
    }
    knots.extend(std::iter::repeat_n(hi, DEGREE + 1));
    Ok(knots)
}

/// Values of all cubic B-spline basis functions at `x` (clamped to the
/// boundary knots).
pub fn bspline_basis(x: f64, knots: &[f64]) -> Vec<f64> {
    let k = knots.len() - DEGREE - 1;
    let lo = knots[DEGREE];
    let hi = knots[k];
    let x = x.clamp(lo, hi);
    // span index i with knots[i] <= x < knots[i+1], last non-empty span at the right end
    let mut span = DEGREE;
    while span < k - 1 && x >= knots[span + 1] {
        span += 1;
    }
    let mut n = vec![0.0; DEGREE + 1];
    let mut left = [0.0; DEGREE + 1];
    let mut right = [0.0; DEGREE + 1];
    n[0] = 1.0;
    for j in 1..=DEGREE {
        left[j] = x - knots[span + 1 - j];
        right[j] = knots[span + j] - x;
        let mut saved = 0.0;
        for r in 0..j {
            let denom = right[r + 1] + left[j - r];
            let temp = if denom == 0.0 { 0.0 } else { n[r] / denom };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    let mut out = vec![0.0; k];
    for (r, v) in n.into_iter().enumerate() {
        out[span - DEGREE + r] = v;
    }
    out
}

pub fn basis_matrix(x: &[f64], knots: &[f64]) -> DMatrix<f64> {
    let k = knots.len() - DEGREE - 1;
    let mut b = DMatrix::zeros(x.len(), k);
    for (i, &xi) in x.iter().enumerate() {
        for (j, v) in bspline_basis(xi, knots).into_iter().enumerate() {
            b[(i, j)] = v;
        }
    }
    b
}

/// Second-order difference penalty `DᵀD` for `k` coefficients.
pub fn difference_penalty(k: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(k - 2, k);
    for r in 0..k - 2 {
        d[(r, r)] = 1.0;
        d[(r, r + 1)] = -2.0;
        d[(r, r + 2)] = 1.0;
    }
    d.transpose() * d
}

/// A penalized spline in mixed-model form: `B β = 1·c + Xs βs + Zs us`
/// with `βᵀ S β = usᵀ us`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothBlock {
    pub owner: String,
    pub covariate: String,
    /// Term label such as `sarea`.
    pub label: String,
    pub k: usize,
    pub knots: Vec<f64>,
    pub xs: DMatrix<f64>,
    pub zs: DMatrix<f64>,
    /// Unit-norm linear direction of the penalty null space, `k × 1`.
    pub null_linear: DMatrix<f64>,
    /// Maps `us` to basis coefficients: `k × (k - 2)`.
    pub z_map: DMatrix<f64>,
}

impl SmoothBlock {
    /// Name of the unpenalized coefficient, e.g. `sarea_1` or `sigma_sarea_1`.
    pub fn fixed_name(&self) -> String {
        format!("{}{}_1", coef_prefix(&self.owner), self.label)
    }

    pub fn sds_name(&self) -> String {
        format!("sds({})", self.fixed_name())
    }

    pub fn n_penalized(&self) -> usize {
        self.zs.ncols()
    }

    /// `(Xs, Zs)` at new covariate values with the training basis.
    pub fn evaluate(&self, x: &[f64]) -> (DMatrix<f64>, DMatrix<f64>) {
        let b = basis_matrix(x, &self.knots);
        (&b * &self.null_linear, &b * &self.z_map)
    }
}

pub fn build_smooth(
    owner: &str,
    spec: &SmoothSpec,
    d: &Dataset,
) -> Result<SmoothBlock, DesignError> {
    let col = d
        .get(&spec.var)
        .ok_or_else(|| DesignError::MissingColumn(spec.var.clone()))?;
    let x = col
        .as_f64()
        .ok_or_else(|| DesignError::KindChanged(spec.var.clone()))?;
    let err = |reason: String| DesignError::Smooth {
        var: spec.var.clone(),
        reason,
    };
    let knots = quantile_knots(&x, spec.k).map_err(err)?;
    let k = spec.k;
    let s = difference_penalty(k);
    let eig = SymmetricEigen::new(s);
    let max_ev = eig.eigenvalues.max();
    let mut pos: Vec<usize> = (0..k)
        .filter(|&i| eig.eigenvalues[i] > 1e-9 * max_ev)
        .collect();
    if pos.len() != k - 2 {
        return Err(err(format!(
            "penalty has rank {} instead of {}",
            pos.len(),
            k - 2
        )));
    }
    pos.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut z_map = DMatrix::zeros(k, k - 2);
    for (c, &i) in pos.iter().enumerate() {
        let mut v = eig.eigenvectors.column(i).clone_owned();
        // fix the sign so the construction is reproducible
        let pivot = v
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        if pivot < 0.0 {
            v.neg_mut();
        }
        z_map.set_column(c, &(v / eig.eigenvalues[i].sqrt()));
    }
    let mid = (k - 1) as f64 / 2.0;
    let mut null_linear = DMatrix::from_fn(k, 1, |j, _| j as f64 - mid);
    null_linear.normalize_mut();
    let b = basis_matrix(&x, &knots);
    Ok(SmoothBlock {
        owner: owner.to_string(),
        covariate: spec.var.clone(),
        label: spec.label.clone(),
        k,
        xs: &b * &null_linear,
        zs: &b * &z_map,
        knots,
        null_linear,
        z_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::Column;
    use nalgebra::DVector;

    fn sm(x: Vec<f64>, k: usize) -> Result<SmoothBlock, DesignError> {
        let d = Dataset::new(vec![("x".into(), Column::Numeric(x))]).unwrap();
        build_smooth(
            "mu",
            &SmoothSpec {
                var: "x".into(),
                k,
                label: "sx".into(),
            },
            &d,
        )
    }

    #[test]
    fn partition_of_unity() {
        let x: Vec<f64> = (0..57)
            .map(|i| (i as f64 * 0.37).sin() * 3.0 + i as f64 * 0.1)
            .collect();
        let knots = quantile_knots(&x, 10).unwrap();
        for xi in x.iter().chain([-100.0, 100.0].iter()) {
            let s: f64 = bspline_basis(*xi, &knots).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "{xi}: {s}");
            assert!(bspline_basis(*xi, &knots).iter().all(|v| *v >= -1e-15));
        }
    }

    #[test]
    fn column_counts_on_1_to_100() {
        let x: Vec<f64> = (1..=100).map(f64::from).collect();
        let s = sm(x, 10).unwrap();
        assert_eq!(s.zs.ncols(), 8);
        assert_eq!(s.xs.ncols(), 1);
        assert_eq!(s.fixed_name(), "sx_1");
        assert_eq!(s.sds_name(), "sds(sx_1)");
    }

    #[test]
    fn penalty_null_space_is_constant_and_linear() {
        for k in [4, 6, 10, 15] {
            let s = difference_penalty(k);
            let svd = s.clone().svd(false, false);
            let rank = svd.singular_values.iter().filter(|v| **v > 1e-9).count();
            assert_eq!(rank, k - 2);
            let ones = DVector::from_element(k, 1.0);
            let lin = DVector::from_fn(k, |j, _| j as f64);
            assert!((&s * ones).norm() < 1e-12);
            assert!((&s * lin).norm() < 1e-12);
        }
    }

    #[test]
    fn reparameterization_is_a_bijection() {
        let x: Vec<f64> = (0..40).map(|i| (i as f64).powf(1.3)).collect();
        let s = sm(x.clone(), 8).unwrap();
        let knots = &s.knots;
        let b = basis_matrix(&x, knots);
        // [1/sqrt(k), l, Zmap] spans the coefficient space
        let k = s.k;
        let mut t = DMatrix::zeros(k, k);
        t.column_mut(0).fill(1.0 / (k as f64).sqrt());
        t.set_column(1, &s.null_linear.column(0));
        for c in 0..k - 2 {
            t.set_column(c + 2, &s.z_map.column(c));
        }
        assert!(t.clone().try_inverse().is_some());
        let beta = DVector::from_fn(k, |j, _| ((j * 7) % 5) as f64 - 1.5);
        let theta = t.clone().try_inverse().unwrap() * &beta;
        let direct = &b * &beta;
        let rebuilt = DVector::from_element(x.len(), theta[0] / (k as f64).sqrt())
            + &s.xs * theta[1]
            + &s.zs * theta.rows(2, k - 2);
        assert!((direct - rebuilt).amax() < 1e-10);
        // penalty becomes the identity on us
        let pen = difference_penalty(k);
        let zt = s.z_map.transpose() * &pen * &s.z_map;
        assert!((zt - DMatrix::identity(k - 2, k - 2)).amax() < 1e-10);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            sm((0..20).map(f64::from).collect(), 3),
            Err(DesignError::Smooth { .. })
        ));
        assert!(matches!(
            sm(vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0], 5),
            Err(DesignError::Smooth { .. })
        ));
    }

    #[test]
    fn new_data_is_clamped() {
        let x: Vec<f64> = (1..=30).map(f64::from).collect();
        let s = sm(x, 6).unwrap();
        let (xs, zs) = s.evaluate(&[1.0, -5.0, 30.0, 99.0]);
        assert_eq!(xs.row(0), xs.row(1));
        assert_eq!(zs.row(2), zs.row(3));
        let (xs_train, _) = s.evaluate(&[1.0]);
        assert!((xs_train[(0, 0)] - s.xs[(0, 0)]).abs() < 1e-15);
    }
}
