//! Truncated SVD and Hermitian matrix exponentials on top of faer.

use faer::diag::Diag;
use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::evd::{self_adjoint_evd, self_adjoint_evd_scratch, ComputeEigenvectors};
use faer::linalg::svd::{svd, svd_scratch, ComputeSvdVectors};
use faer::{Mat, Par};

use crate::error::{Error, Result};
use crate::tensor::{ComplexTensor, C64, ZERO};

/// Truncation policy for every SVD split in the engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    pub bond_max: usize,
    /// A singular value λ is dropped when λ²/Σλ² falls below this threshold.
    pub cutoff: f64,
    /// Rescale the kept values so that Σλ² matches the pre-truncation total.
    pub renormalize: bool,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            bond_max: usize::MAX,
            cutoff: 1e-12,
            renormalize: true,
        }
    }
}

impl Truncation {
    pub fn new(bond_max: usize, cutoff: f64) -> Self {
        Self {
            bond_max,
            cutoff,
            ..Self::default()
        }
    }

    /// Keeps every singular value.
    pub fn exact() -> Self {
        Self {
            bond_max: usize::MAX,
            cutoff: 0.0,
            renormalize: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.bond_max == 0 {
            return Err(Error::InvalidParams("bond_max must be at least 1".into()));
        }
        if !(self.cutoff >= 0.0) {
            return Err(Error::InvalidParams(format!(
                "cutoff {} must be nonnegative",
                self.cutoff
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SvdResult {
    /// m×r with orthonormal columns.
    pub left: ComplexTensor,
    pub singular_values: Vec<f64>,
    /// r×n with orthonormal rows.
    pub right: ComplexTensor,
    /// Sum of squared dropped singular values (before any rescaling).
    pub discarded_weight: f64,
}

impl SvdResult {
    pub fn rank(&self) -> usize {
        self.singular_values.len()
    }

    /// left · diag(λ) · right.
    pub fn reconstruct(&self) -> ComplexTensor {
        let (m, r) = (self.left.shape()[0], self.rank());
        let n = self.right.shape()[1];
        let mut us = self.left.clone();
        for i in 0..m {
            for (j, &s) in self.singular_values.iter().enumerate() {
                us.data_mut()[i * r + j] *= s;
            }
        }
        ComplexTensor::from_raw(
            vec![m, n],
            crate::tensor::gemm(us.data(), self.right.data(), m, r, n),
        )
    }
}

fn to_mat(t: &ComplexTensor) -> Mat<C64> {
    let (m, n) = (t.shape()[0], t.shape()[1]);
    let d = t.data();
    Mat::from_fn(m, n, |i, j| d[i * n + j])
}

/// Truncated SVD without rescaling of the kept values.
pub fn svd_truncate(m: &ComplexTensor, bond_max: usize, cutoff: f64) -> Result<SvdResult> {
    svd_truncate_with(
        m,
        &Truncation {
            bond_max,
            cutoff,
            renormalize: false,
        },
    )
}

/// Truncated SVD under an explicit policy.
pub fn svd_truncate_with(m: &ComplexTensor, trunc: &Truncation) -> Result<SvdResult> {
    trunc.validate()?;
    m.expect_rank2("svd_truncate")?;
    if !m.is_finite() {
        return Err(Error::Numeric(
            "svd_truncate input contains NaN or Inf".into(),
        ));
    }
    let (rows, cols) = (m.shape()[0], m.shape()[1]);
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!(
            "cannot decompose an empty {rows}×{cols} matrix"
        )));
    }

    let a = to_mat(m);
    let size = rows.min(cols);
    let mut u = Mat::<C64>::zeros(rows, size);
    let mut v = Mat::<C64>::zeros(cols, size);
    let mut sv = Diag::<C64>::zeros(size);
    let scratch = svd_scratch::<C64>(
        rows,
        cols,
        ComputeSvdVectors::Thin,
        ComputeSvdVectors::Thin,
        Par::Seq,
        Default::default(),
    );
    svd(
        a.as_ref(),
        sv.as_mut(),
        Some(u.as_mut()),
        Some(v.as_mut()),
        Par::Seq,
        MemStack::new(&mut MemBuffer::new(scratch)),
        Default::default(),
    )
    .map_err(|_| Error::Numeric(format!("SVD of {rows}×{cols} matrix did not converge")))?;
    let sv = sv.column_vector();

    // Already nonincreasing; sort defensively anyway.
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by(|&a, &b| sv[b].re.total_cmp(&sv[a].re));
    let sorted: Vec<f64> = order.iter().map(|&i| sv[i].re.max(0.0)).collect();

    let total: f64 = sorted.iter().map(|s| s * s).sum();
    let mut keep = sorted.len().min(trunc.bond_max);
    if total > 0.0 {
        while keep > 1 && sorted[keep - 1] * sorted[keep - 1] / total < trunc.cutoff {
            keep -= 1;
        }
    }
    keep = keep.max(1);

    let mut values = sorted[..keep].to_vec();
    let kept: f64 = values.iter().map(|s| s * s).sum();
    let discarded_weight = sorted[keep..].iter().map(|s| s * s).sum::<f64>();
    if trunc.renormalize && kept > 0.0 && discarded_weight > 0.0 {
        let scale = (total / kept).sqrt();
        values.iter_mut().for_each(|s| *s *= scale);
    }

    let mut left = Vec::with_capacity(rows * keep);
    for i in 0..rows {
        for &k in &order[..keep] {
            left.push(u[(i, k)]);
        }
    }
    let mut right = Vec::with_capacity(keep * cols);
    for &k in &order[..keep] {
        for j in 0..cols {
            right.push(v[(j, k)].conj());
        }
    }
    let left = ComplexTensor::from_raw(vec![rows, keep], left);
    let right = ComplexTensor::from_raw(vec![keep, cols], right);
    if !left.is_finite() || !right.is_finite() {
        return Err(Error::Numeric(format!(
            "SVD of {rows}×{cols} matrix produced non-finite factors"
        )));
    }
    Ok(SvdResult {
        left,
        singular_values: values,
        right,
        discarded_weight,
    })
}

/// ‖h − h†‖_F.
pub fn hermiticity_error(h: &ComplexTensor) -> Result<f64> {
    h.expect_square("hermiticity_error")?;
    let n = h.shape()[0];
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (h.at(i, j) - h.at(j, i).conj()).norm_sqr();
        }
    }
    Ok(acc.sqrt())
}

/// ‖U†U − I‖_F.
pub fn unitarity_error(u: &ComplexTensor) -> Result<f64> {
    u.expect_square("unitarity_error")?;
    let n = u.shape()[0];
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            let mut s = ZERO;
            for k in 0..n {
                s += u.at(k, i).conj() * u.at(k, j);
            }
            if i == j {
                s -= 1.0;
            }
            acc += s.norm_sqr();
        }
    }
    Ok(acc.sqrt())
}

const HERMITICITY_TOL: f64 = 1e-10;

/// exp(−i·h) for Hermitian `h`, through its eigendecomposition.
pub fn matrix_exponential_unitary(h: &ComplexTensor) -> Result<ComplexTensor> {
    h.expect_square("matrix_exponential_unitary")?;
    if !h.is_finite() {
        return Err(Error::Numeric("generator contains NaN or Inf".into()));
    }
    let err = hermiticity_error(h)?;
    let scale = h.frobenius_norm().max(f64::MIN_POSITIVE);
    if err > HERMITICITY_TOL * scale.max(1.0) {
        return Err(Error::Contract(format!(
            "generator is not Hermitian: ‖h − h†‖ = {err:.3e}"
        )));
    }
    let n = h.shape()[0];
    let sym = Mat::from_fn(n, n, |i, j| (h.at(i, j) + h.at(j, i).conj()) * 0.5);
    let mut v = Mat::<C64>::zeros(n, n);
    let mut w = Diag::<C64>::zeros(n);
    let scratch =
        self_adjoint_evd_scratch::<C64>(n, ComputeEigenvectors::Yes, Par::Seq, Default::default());
    self_adjoint_evd(
        sym.as_ref(),
        w.as_mut(),
        Some(v.as_mut()),
        Par::Seq,
        MemStack::new(&mut MemBuffer::new(scratch)),
        Default::default(),
    )
    .map_err(|_| {
        Error::Numeric(format!(
            "eigendecomposition of {n}×{n} generator did not converge"
        ))
    })?;
    let phases: Vec<C64> = w
        .column_vector()
        .iter()
        .map(|d| C64::new(0.0, -d.re).exp())
        .collect();
    let mut data = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            let mut s = ZERO;
            for (k, p) in phases.iter().enumerate() {
                s += v[(i, k)] * p * v[(j, k)].conj();
            }
            data[i * n + j] = s;
        }
    }
    Ok(ComplexTensor::from_raw(vec![n, n], data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn diag_one_zero() {
        let m = ComplexTensor::from_real_rows(&[&[1.0, 0.0], &[0.0, 0.0]]).unwrap();
        let r = svd_truncate(&m, 2, 0.0).unwrap();
        assert_eq!(r.singular_values.len(), 2);
        assert_abs_diff_eq!(r.singular_values[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.singular_values[1], 0.0, epsilon = 1e-15);
        assert_eq!(r.discarded_weight, 0.0);
    }

    #[test]
    fn permutation_matrix() {
        let m = ComplexTensor::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        let r = svd_truncate(&m, 2, 0.0).unwrap();
        assert_abs_diff_eq!(r.singular_values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.singular_values[1], 1.0, epsilon = 1e-14);
    }

    #[test]
    fn cutoff_drops_relative_small_values() {
        let m = ComplexTensor::diagonal(&[C64::new(1.0, 0.0), C64::new(1e-7, 0.0)]);
        let r = svd_truncate(&m, 2, 1e-12).unwrap();
        assert_eq!(r.rank(), 1);
        assert_abs_diff_eq!(r.discarded_weight, 1e-14, epsilon = 1e-20);
    }

    #[test]
    fn renormalized_mode_preserves_weight() {
        let m = ComplexTensor::diagonal(&[C64::new(0.8, 0.0), C64::new(0.6, 0.0)]);
        let t = Truncation {
            bond_max: 1,
            cutoff: 0.0,
            renormalize: true,
        };
        let r = svd_truncate_with(&m, &t).unwrap();
        assert_abs_diff_eq!(r.singular_values[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.discarded_weight, 0.36, epsilon = 1e-14);
    }

    #[test]
    fn non_finite_and_bad_bond_rejected() {
        let m = ComplexTensor::identity(2);
        assert!(matches!(
            svd_truncate(&m, 0, 0.0),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn zero_generator_gives_identity() {
        let u = matrix_exponential_unitary(&ComplexTensor::zeros(vec![2, 2])).unwrap();
        assert_eq!(u, ComplexTensor::identity(2));
    }

    #[test]
    fn half_pi_sigma_x() {
        let h = ComplexTensor::from_real_rows(&[
            &[0.0, std::f64::consts::FRAC_PI_2],
            &[std::f64::consts::FRAC_PI_2, 0.0],
        ])
        .unwrap();
        let u = matrix_exponential_unitary(&h).unwrap();
        // cos(π/2)·I − i sin(π/2)·σx
        let expected = [ZERO, C64::new(0.0, -1.0), C64::new(0.0, -1.0), ZERO];
        for (a, b) in u.data().iter().zip(expected) {
            assert!((a - b).norm() < 1e-14, "{a} vs {b}");
        }
    }

    #[test]
    fn non_hermitian_rejected() {
        let h = ComplexTensor::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(
            matrix_exponential_unitary(&h),
            Err(Error::Contract(_))
        ));
    }
}
