//! B-spline basis on a clamped knot vector, difference penalties, and the
//! eigendecomposition that splits penalized coefficients into a fixed null
//! part and an i.i.d. penalized part.
//!
//! Rows evaluate generically over [`Scalar`] so the spline argument can carry
//! derivative information through knot rescaling; knot positions themselves
//! are always plain `f64` constants.

use crate::ad::Scalar;
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, Matrix};

#[derive(Clone, Debug)]
pub struct BasisSpec {
    degree: usize,
    /// Clamped knot vector: boundary knots repeated degree + 1 times.
    knots: Vec<f64>,
    k: usize,
    domain: (f64, f64),
}

impl BasisSpec {
    /// Clamped basis with equally spaced interior knots on [a, b].
    pub fn uniform(degree: usize, interior: usize, a: f64, b: f64) -> Result<Self> {
        if degree < 1 {
            return Err(Error::InvalidConfig("spline degree must be at least 1".into()));
        }
        if !(b > a) || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "knot range [{a}, {b}] is not an increasing finite interval"
            )));
        }
        let k = interior + degree + 1;
        let mut knots = Vec::with_capacity(k + degree + 1);
        for _ in 0..=degree {
            knots.push(a);
        }
        for i in 1..=interior {
            knots.push(a + (b - a) * i as f64 / (interior + 1) as f64);
        }
        for _ in 0..=degree {
            knots.push(b);
        }
        Ok(BasisSpec { degree, knots, k, domain: (a, b) })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_basis(&self) -> usize {
        self.k
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Greville abscissae; coefficients equal to these reproduce the identity.
    pub fn greville(&self) -> Vec<f64> {
        (0..self.k)
            .map(|i| {
                self.knots[i + 1..=i + self.degree].iter().sum::<f64>() / self.degree as f64
            })
            .collect()
    }

    fn find_span(&self, uv: f64) -> usize {
        let p = self.degree;
        let last = self.knots.len() - p - 2;
        if uv >= self.knots[last + 1] {
            return last;
        }
        let mut lo = p;
        let mut hi = last + 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if uv < self.knots[mid] {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        lo
    }

    /// De Boor recurrence: values of the q + 1 basis functions of degree `q`
    /// that are nonzero on the span `s`. Knot differences enter as constants,
    /// so derivative information flows only through `u`.
    fn nonzero_basis<T: Scalar>(&self, u: T, q: usize, s: usize) -> Vec<T> {
        let zero = T::constant(0.0);
        let mut n = vec![zero; q + 1];
        n[0] = T::constant(1.0);
        let mut left = vec![zero; q + 1];
        let mut right = vec![zero; q + 1];
        for j in 1..=q {
            left[j] = u - T::constant(self.knots[s + 1 - j]);
            right[j] = T::constant(self.knots[s + j]) - u;
            let mut saved = zero;
            for r in 0..j {
                let denom = self.knots[s + r + 1] - self.knots[s + 1 - j + r];
                let temp = n[r] * T::constant(1.0 / denom);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }
        n
    }

    fn row_inside<T: Scalar>(&self, u: T, deriv: usize) -> Vec<T> {
        let zero = T::constant(0.0);
        if deriv > self.degree {
            return vec![zero; self.k];
        }
        let s = self.find_span(u.value());
        let q = self.degree - deriv;
        let base = self.nonzero_basis(u, q, s);
        // Degree-q functions number k + deriv on this knot vector.
        let mut cur = vec![zero; self.k + deriv];
        for (i, v) in base.into_iter().enumerate() {
            cur[s - q + i] = v;
        }
        // Each pass raises the represented degree by one while differentiating.
        for step in 1..=deriv {
            let pj = q + step;
            let len_out = self.k + deriv - step;
            let mut next = vec![zero; len_out];
            for k in 0..len_out {
                let d1 = self.knots[k + pj] - self.knots[k];
                let d2 = self.knots[k + pj + 1] - self.knots[k + 1];
                let mut v = zero;
                if d1 > 0.0 {
                    v = v + cur[k] * T::constant(pj as f64 / d1);
                }
                if d2 > 0.0 {
                    v = v - cur[k + 1] * T::constant(pj as f64 / d2);
                }
                next[k] = v;
            }
            cur = next;
        }
        cur
    }

    fn row_f64(&self, u: f64, deriv: usize) -> Vec<f64> {
        self.row_inside::<f64>(u, deriv)
    }

    /// Values (or `deriv`-th derivatives) of all K basis functions at `u`.
    /// Outside the knot range, either errors or continues linearly (constant
    /// first derivative, zero curvature) from the nearest boundary.
    pub fn eval_row<T: Scalar>(&self, u: T, deriv: usize, extrapolate: bool) -> Result<Vec<T>> {
        let uv = u.value();
        if !uv.is_finite() {
            return Err(Error::DomainError("nonfinite spline argument".into()));
        }
        let (a, b) = self.domain;
        if uv < a || uv > b {
            if !extrapolate {
                return Err(Error::OutOfDomain { value: uv, lo: a, hi: b });
            }
            let x0 = if uv < a { a } else { b };
            return Ok(match deriv {
                0 => {
                    let v0 = self.row_f64(x0, 0);
                    let v1 = self.row_f64(x0, 1);
                    let dx = u - T::constant(x0);
                    v0.iter()
                        .zip(&v1)
                        .map(|(&c0, &c1)| T::constant(c0) + T::constant(c1) * dx)
                        .collect()
                }
                1 => self.row_f64(x0, 1).into_iter().map(T::constant).collect(),
                _ => vec![T::constant(0.0); self.k],
            });
        }
        Ok(self.row_inside(u, deriv))
    }

    /// Stacked `eval_row` over a slice of plain points.
    pub fn basis_matrix(&self, us: &[f64], deriv: usize, extrapolate: bool) -> Result<Matrix> {
        let mut m = Matrix::zeros(us.len(), self.k);
        for (i, &u) in us.iter().enumerate() {
            let row = self.eval_row::<f64>(u, deriv, extrapolate)?;
            m.row_mut(i).copy_from_slice(&row);
        }
        Ok(m)
    }
}

/// S = D^T D for the order-th forward difference matrix D acting on the K
/// coefficients. Positive semidefinite with rank K - order.
pub fn difference_penalty(k: usize, order: usize) -> Result<Matrix> {
    if order == 0 || order >= k {
        return Err(Error::InvalidOrder { order, k });
    }
    // Alternating binomial coefficients of the order-th difference.
    let mut coef = vec![0.0; order + 1];
    coef[0] = 1.0;
    for row in 1..=order {
        for j in (1..=row).rev() {
            coef[j] -= coef[j - 1];
        }
    }
    let rows = k - order;
    let mut d = Matrix::zeros(rows, k);
    for i in 0..rows {
        for (j, &c) in coef.iter().enumerate() {
            d[(i, i + j)] = c;
        }
    }
    Ok(d.transpose().matmul(&d))
}

/// Eigendecomposition S = U diag(d) U^T split at the relative threshold
/// 1e-10 * max eigenvalue: penalized directions keep their eigenvalues,
/// the rest form the unpenalized null space. In the whitened coordinates
/// theta = U_F theta_F + U_R diag(d_+^{-1/2}) omega the quadratic penalty
/// theta^T S theta collapses to |omega|^2.
pub struct PenaltyDecomposition {
    u_null: Matrix,
    u_pen: Matrix,
    d_plus: Vec<f64>,
}

impl PenaltyDecomposition {
    pub fn new(s: &Matrix) -> Result<Self> {
        let k = s.rows();
        let eig = sym_eigen(s)?;
        let lambda_max = eig.values.first().copied().unwrap_or(0.0).max(0.0);
        let tau = 1e-10 * lambda_max;
        let mut pen_idx = Vec::new();
        let mut null_idx = Vec::new();
        for (i, &v) in eig.values.iter().enumerate() {
            if v > tau {
                pen_idx.push(i);
            } else {
                null_idx.push(i);
            }
        }
        let mut u_pen = Matrix::zeros(k, pen_idx.len());
        let mut u_null = Matrix::zeros(k, null_idx.len());
        for (c, &i) in pen_idx.iter().enumerate() {
            for r in 0..k {
                u_pen[(r, c)] = eig.vectors[(r, i)];
            }
        }
        for (c, &i) in null_idx.iter().enumerate() {
            for r in 0..k {
                u_null[(r, c)] = eig.vectors[(r, i)];
            }
        }
        let d_plus: Vec<f64> = pen_idx.iter().map(|&i| eig.values[i]).collect();
        Ok(PenaltyDecomposition { u_null, u_pen, d_plus })
    }

    /// Number of penalized (random) directions.
    pub fn rank(&self) -> usize {
        self.d_plus.len()
    }

    pub fn null_dim(&self) -> usize {
        self.u_null.cols()
    }

    pub fn dim(&self) -> usize {
        self.u_null.rows()
    }

    /// X_F = X U_F.
    pub fn design_null(&self, x: &Matrix) -> Matrix {
        x.matmul(&self.u_null)
    }

    /// X_R = X U_R diag(d_+^{-1/2}).
    pub fn design_pen(&self, x: &Matrix) -> Matrix {
        let mut m = x.matmul(&self.u_pen);
        for i in 0..m.rows() {
            let row = m.row_mut(i);
            for (j, &d) in self.d_plus.iter().enumerate() {
                row[j] /= d.sqrt();
            }
        }
        m
    }

    /// theta = U_F theta_F + U_R diag(d_+^{-1/2}) omega.
    pub fn coefficients<T: Scalar>(&self, theta_f: &[T], omega: &[T]) -> Vec<T> {
        let k = self.dim();
        assert_eq!(theta_f.len(), self.null_dim());
        assert_eq!(omega.len(), self.rank());
        let mut out = vec![T::constant(0.0); k];
        for r in 0..k {
            let mut acc = T::constant(0.0);
            for (j, &tf) in theta_f.iter().enumerate() {
                acc = acc + T::constant(self.u_null[(r, j)]) * tf;
            }
            for (j, &w) in omega.iter().enumerate() {
                acc = acc + T::constant(self.u_pen[(r, j)] / self.d_plus[j].sqrt()) * w;
            }
            out[r] = acc;
        }
        out
    }

    /// Inverse of `coefficients`: theta_F = U_F^T theta,
    /// omega = diag(d_+^{1/2}) U_R^T theta.
    pub fn project(&self, theta: &[f64]) -> (Vec<f64>, Vec<f64>) {
        assert_eq!(theta.len(), self.dim());
        let theta_f = self.u_null.tr_matvec(theta);
        let mut omega = self.u_pen.tr_matvec(theta);
        for (w, &d) in omega.iter_mut().zip(&self.d_plus) {
            *w *= d.sqrt();
        }
        (theta_f, omega)
    }
}

/// Orthonormal basis Z of the null space of one linear constraint c^T theta
/// = 0; curves built from theta = Z v satisfy the constraint exactly.
pub struct ConstraintTransform {
    z: Matrix,
    c: Vec<f64>,
}

impl ConstraintTransform {
    pub fn z(&self) -> &Matrix {
        &self.z
    }

    pub fn constraint(&self) -> &[f64] {
        &self.c
    }

    /// theta_full = Z v, generic over the scalar type.
    pub fn expand<T: Scalar>(&self, v: &[T]) -> Vec<T> {
        let k = self.z.rows();
        assert_eq!(v.len(), self.z.cols());
        let mut out = vec![T::constant(0.0); k];
        for r in 0..k {
            let mut acc = T::constant(0.0);
            for (j, &vj) in v.iter().enumerate() {
                acc = acc + T::constant(self.z[(r, j)]) * vj;
            }
            out[r] = acc;
        }
        out
    }

    /// Least-squares coordinates of theta in the constrained space: Z^T theta.
    pub fn reduce(&self, theta: &[f64]) -> Vec<f64> {
        self.z.tr_matvec(theta)
    }
}

/// Constraint c_k = mean of basis function k over a fine uniform grid, so
/// the fitted curve averages to zero over the knot range. The null-space
/// basis comes from a single Householder reflection carrying c to an axis.
pub fn sum_to_zero_transform(spec: &BasisSpec, grid_points: usize) -> Result<ConstraintTransform> {
    let k = spec.num_basis();
    let (a, b) = spec.domain();
    let n = grid_points.max(2);
    let mut c = vec![0.0; k];
    for g in 0..n {
        let u = a + (b - a) * g as f64 / (n - 1) as f64;
        let row = spec.eval_row::<f64>(u, 0, false)?;
        for (ck, rk) in c.iter_mut().zip(&row) {
            *ck += rk;
        }
    }
    for ck in &mut c {
        *ck /= n as f64;
    }
    let norm = crate::linalg::norm2(&c);
    if norm < 1e-12 {
        return Err(Error::DegenerateRange { span: norm });
    }
    // Householder vector v = c + sign(c_0) |c| e_0; columns 1..K of the
    // reflector I - 2 v v^T / (v^T v) span the orthogonal complement of c.
    let mut v = c.clone();
    v[0] += c[0].signum() * norm;
    let vtv: f64 = v.iter().map(|x| x * x).sum();
    let mut z = Matrix::zeros(k, k - 1);
    for col in 1..k {
        for row in 0..k {
            let h = if row == col { 1.0 } else { 0.0 };
            z[(row, col - 1)] = h - 2.0 * v[row] * v[col] / vtv;
        }
    }
    Ok(ConstraintTransform { z, c })
}

/// Affine map of the spline argument onto [0, 1] with variance-inflated
/// bounds: lo = t_min - c * sigma_shift, hi = t_max + c * sigma_shift.
/// `sigma_shift` may carry derivatives; the data bounds are constants.
pub fn scaled_argument<T: Scalar>(
    gamma: T,
    t_min: f64,
    t_max: f64,
    sigma_shift: T,
    c: f64,
) -> Result<T> {
    let lo = T::constant(t_min) - T::constant(c) * sigma_shift;
    let hi = T::constant(t_max) + T::constant(c) * sigma_shift;
    let span = (hi - lo).value();
    if !(span > 1e-12) {
        return Err(Error::DegenerateRange { span });
    }
    Ok((gamma - lo) / (hi - lo))
}

/// Equally spaced grid of `n` points covering [a, b] inclusive.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::rel_diff;
    use proptest::prelude::*;

    fn cubic() -> BasisSpec {
        BasisSpec::uniform(3, 5, 0.0, 1.0).unwrap()
    }

    #[test]
    fn degree_one_hat_values() {
        // Degree 1, one interior knot at 0.5: three hat functions.
        let s = BasisSpec::uniform(1, 1, 0.0, 1.0).unwrap();
        assert_eq!(s.num_basis(), 3);
        let r = s.eval_row::<f64>(0.25, 0, false).unwrap();
        assert!((r[0] - 0.5).abs() < 1e-15);
        assert!((r[1] - 0.5).abs() < 1e-15);
        assert_eq!(r[2], 0.0);
        let r = s.eval_row::<f64>(0.5, 0, false).unwrap();
        assert_eq!(r, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn clamped_end_is_one_hot() {
        let s = cubic();
        let r = s.eval_row::<f64>(1.0, 0, false).unwrap();
        let k = s.num_basis();
        assert!((r[k - 1] - 1.0).abs() < 1e-14);
        for v in &r[..k - 1] {
            assert!(v.abs() < 1e-14);
        }
        let r = s.eval_row::<f64>(0.0, 0, false).unwrap();
        assert!((r[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn out_of_domain_errors_without_extrapolation() {
        let s = cubic();
        match s.eval_row::<f64>(1.2, 0, false) {
            Err(Error::OutOfDomain { value, lo, hi }) => {
                assert_eq!(value, 1.2);
                assert_eq!((lo, hi), (0.0, 1.0));
            }
            other => panic!("expected OutOfDomain, got {other:?}"),
        }
    }

    #[test]
    fn extrapolation_is_linear_continuation() {
        let s = cubic();
        let at_b = s.eval_row::<f64>(1.0, 0, false).unwrap();
        let slope_b = s.eval_row::<f64>(1.0, 1, false).unwrap();
        let d = 0.3;
        let ext = s.eval_row::<f64>(1.0 + d, 0, true).unwrap();
        for i in 0..s.num_basis() {
            assert!(rel_diff(ext[i], at_b[i] + d * slope_b[i]) < 1e-12);
        }
        let ext1 = s.eval_row::<f64>(1.0 + d, 1, true).unwrap();
        assert_eq!(ext1, slope_b);
        let ext2 = s.eval_row::<f64>(-0.5, 2, true).unwrap();
        assert!(ext2.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn difference_penalty_small_case() {
        // K = 5, order 2: D has rows [1 -2 1 0 0] shifted; compare S = D^T D
        // against that explicit product.
        let d = Matrix::from_rows(&[
            vec![1.0, -2.0, 1.0, 0.0, 0.0],
            vec![0.0, 1.0, -2.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0, -2.0, 1.0],
        ]);
        let want = d.transpose().matmul(&d);
        let s = difference_penalty(5, 2).unwrap();
        assert!(s.sub(&want).max_abs() < 1e-14);
        assert!(matches!(
            difference_penalty(3, 3),
            Err(Error::InvalidOrder { .. })
        ));
        assert!(matches!(
            difference_penalty(3, 0),
            Err(Error::InvalidOrder { .. })
        ));
    }

    #[test]
    fn penalty_rank_and_null_space() {
        let s = difference_penalty(9, 2).unwrap();
        let dec = PenaltyDecomposition::new(&s).unwrap();
        assert_eq!(dec.rank(), 7);
        assert_eq!(dec.null_dim(), 2);
        // Constant coefficient vectors are unpenalized.
        let theta = vec![2.5; 9];
        let q: f64 = theta.iter().enumerate().map(|(i, &ti)| {
            (0..9).map(|j| ti * s[(i, j)] * theta[j]).sum::<f64>()
        }).sum();
        assert!(q.abs() < 1e-12);
    }

    #[test]
    fn decomposition_round_trip_and_penalty_identity() {
        use rand::Rng;
        use rand::SeedableRng;
        let s = difference_penalty(8, 2).unwrap();
        let dec = PenaltyDecomposition::new(&s).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let theta: Vec<f64> = (0..8).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (tf, om) = dec.project(&theta);
            let back = dec.coefficients::<f64>(&tf, &om);
            for (a, b) in theta.iter().zip(&back) {
                assert!((a - b).abs() < 1e-10);
            }
            // theta^T S theta = |omega|^2
            let st = s.matvec(&theta);
            let quad = crate::linalg::dot(&theta, &st);
            let w2 = crate::linalg::dot(&om, &om);
            assert!(rel_diff(quad, w2) < 1e-10, "{quad} vs {w2}");
        }
    }

    #[test]
    fn sum_to_zero_transform_properties() {
        let spec = cubic();
        let tr = sum_to_zero_transform(&spec, 400).unwrap();
        let z = tr.z();
        let k = spec.num_basis();
        assert_eq!((z.rows(), z.cols()), (k, k - 1));
        // Orthonormal columns.
        let ztz = z.transpose().matmul(z);
        assert!(ztz.sub(&Matrix::identity(k - 1)).max_abs() < 1e-12);
        // c^T Z = 0.
        let ctz = z.tr_matvec(tr.constraint());
        assert!(crate::linalg::norm_inf(&ctz) < 1e-12);
        // Any constrained curve has (near) zero mean over the grid.
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let v: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let theta = tr.expand::<f64>(&v);
        let grid = uniform_grid(0.0, 1.0, 400);
        let mean: f64 = grid
            .iter()
            .map(|&u| {
                let row = spec.eval_row::<f64>(u, 0, false).unwrap();
                crate::linalg::dot(&row, &theta)
            })
            .sum::<f64>()
            / grid.len() as f64;
        assert!(mean.abs() < 1e-10);
    }

    #[test]
    fn scaled_argument_maps_bounds_to_unit_interval() {
        let u = scaled_argument::<f64>(2.0, 2.0, 6.0, 0.0, 3.0).unwrap();
        assert_eq!(u, 0.0);
        let u = scaled_argument::<f64>(6.0, 2.0, 6.0, 0.0, 3.0).unwrap();
        assert_eq!(u, 1.0);
        // With sigma = 1 and c = 3 the window widens to [-1, 9].
        let u = scaled_argument::<f64>(-1.0, 2.0, 6.0, 1.0, 3.0).unwrap();
        assert_eq!(u, 0.0);
        assert!(matches!(
            scaled_argument::<f64>(0.0, 1.0, 1.0, 0.0, 3.0),
            Err(Error::DegenerateRange { .. })
        ));
    }

    #[test]
    fn scaled_argument_carries_derivatives() {
        use crate::ad::{grad, ScalarFn};
        // d u*/d sigma at gamma fixed: u* = (g - tmin + c s) / (tmax - tmin + 2 c s)
        struct G;
        impl ScalarFn for G {
            fn eval<T: Scalar>(&self, x: &[T]) -> crate::error::Result<T> {
                scaled_argument(T::constant(3.0), 2.0, 6.0, x[0], 3.0)
            }
        }
        let s0 = 0.7;
        let g = grad(&G, &[s0]).unwrap();
        let num = 3.0 - 2.0 + 3.0 * s0;
        let den = 4.0 + 6.0 * s0;
        let want = (3.0 * den - num * 6.0) / (den * den);
        assert!(rel_diff(g[0], want) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn prop_partition_of_unity_and_nonnegative(
            u in 0.0f64..=1.0,
            degree in 1usize..=4,
            interior in 0usize..=8,
        ) {
            let s = BasisSpec::uniform(degree, interior, 0.0, 1.0).unwrap();
            let row = s.eval_row::<f64>(u, 0, false).unwrap();
            let sum: f64 = row.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(row.iter().all(|v| *v >= -1e-14));
        }

        #[test]
        fn prop_derivative_rows_sum_to_zero(
            u in 0.01f64..=0.99,
            interior in 0usize..=6,
        ) {
            let s = BasisSpec::uniform(3, interior, 0.0, 1.0).unwrap();
            for deriv in 1..=2 {
                let row = s.eval_row::<f64>(u, deriv, false).unwrap();
                let sum: f64 = row.iter().sum();
                prop_assert!(sum.abs() < 1e-9);
            }
        }

        #[test]
        fn prop_linear_reproduction_via_greville(
            u in 0.0f64..=1.0,
            degree in 1usize..=4,
            interior in 0usize..=6,
        ) {
            let s = BasisSpec::uniform(degree, interior, 0.0, 1.0).unwrap();
            let xi = s.greville();
            let row = s.eval_row::<f64>(u, 0, false).unwrap();
            let val: f64 = row.iter().zip(&xi).map(|(r, x)| r * x).sum();
            prop_assert!((val - u).abs() < 1e-12);
            // Derivative of the identity is 1.
            let row1 = s.eval_row::<f64>(u, 1, false).unwrap();
            let d: f64 = row1.iter().zip(&xi).map(|(r, x)| r * x).sum();
            prop_assert!((d - 1.0).abs() < 1e-9);
        }

        #[test]
        fn prop_derivative_matches_finite_difference(
            u in 0.05f64..=0.95,
            interior in 0usize..=6,
        ) {
            let s = BasisSpec::uniform(3, interior, 0.0, 1.0).unwrap();
            let h = 1e-6;
            let up = s.eval_row::<f64>(u + h, 0, false).unwrap();
            let dn = s.eval_row::<f64>(u - h, 0, false).unwrap();
            let d1 = s.eval_row::<f64>(u, 1, false).unwrap();
            for i in 0..s.num_basis() {
                let fd = (up[i] - dn[i]) / (2.0 * h);
                prop_assert!(rel_diff(d1[i], fd) < 1e-5, "i={} an={} fd={}", i, d1[i], fd);
            }
            let up = s.eval_row::<f64>(u + h, 1, false).unwrap();
            let dn = s.eval_row::<f64>(u - h, 1, false).unwrap();
            let d2 = s.eval_row::<f64>(u, 2, false).unwrap();
            for i in 0..s.num_basis() {
                let fd = (up[i] - dn[i]) / (2.0 * h);
                prop_assert!(rel_diff(d2[i], fd) < 1e-4, "i={} an={} fd={}", i, d2[i], fd);
            }
        }

        #[test]
        fn prop_continuity_across_interior_knots(knot_idx in 1usize..=5) {
            let s = BasisSpec::uniform(3, 5, 0.0, 1.0).unwrap();
            let t = knot_idx as f64 / 6.0;
            let eps = 1e-9;
            let lo = s.eval_row::<f64>(t - eps, 0, false).unwrap();
            let hi = s.eval_row::<f64>(t + eps, 0, false).unwrap();
            for i in 0..s.num_basis() {
                prop_assert!((lo[i] - hi[i]).abs() < 1e-7);
            }
        }

        #[test]
        fn prop_penalty_is_positive_semidefinite(k in 4usize..=16, order in 1usize..=3) {
            prop_assume!(order < k);
            let s = difference_penalty(k, order).unwrap();
            let eig = sym_eigen(&s).unwrap();
            let max = eig.values[0].max(1.0);
            prop_assert!(eig.values.iter().all(|v| *v > -1e-12 * max));
            // Rank equals K - order.
            let pos = eig.values.iter().filter(|v| **v > 1e-10 * max).count();
            prop_assert_eq!(pos, k - order);
        }
    }
}
