//! Hermitian operators on a finite truncation of the Hilbert space.
//!
//! Entries are stored split into real and imaginary parts. Real operators
//! (the common case) skip the imaginary block entirely; complex spectra are
//! computed through the real symmetric embedding `[[A, -B], [B, A]]`, whose
//! eigenvalues are those of `A + iB`, each repeated twice.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension handled by a dense eigensolve; larger operators use
/// shifted power iteration.
pub const DENSE_LIMIT: usize = 512;
/// Relative asymmetry accepted by [`HermitianOp::checked`].
pub const HERMITIAN_TOLERANCE: f64 = 1e-12;

const POWER_TOLERANCE: f64 = 1e-12;
const POWER_MAX_ITERATIONS: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOp {
    re: DMatrix<f64>,
    im: Option<DMatrix<f64>>,
    asymmetry: f64,
}

impl HermitianOp {
    /// Symmetrizes `(H + H*)/2` and records the relative asymmetry removed.
    ///
    /// Panics if `re` is not square or `im` has a different shape.
    pub fn new(re: DMatrix<f64>, im: Option<DMatrix<f64>>) -> Self {
        assert!(re.is_square(), "operator must be square");
        if let Some(im) = &im {
            assert_eq!(im.shape(), re.shape(), "real and imaginary parts differ in shape");
        }
        let scale = re.amax().max(im.as_ref().map_or(0.0, |m| m.amax()));
        let mut violation = 0.0f64;
        let re_t = re.transpose();
        let re_sym = (&re + &re_t) * 0.5;
        violation = violation.max((&re - &re_t).amax());
        let im_sym = im.map(|im| {
            let im_t = im.transpose();
            violation = violation.max((&im + &im_t).amax());
            (&im - &im_t) * 0.5
        });
        let im_sym = im_sym.filter(|m| m.iter().any(|&x| x != 0.0));
        let asymmetry = if scale > 0.0 { violation / scale } else { 0.0 };
        HermitianOp { re: re_sym, im: im_sym, asymmetry }
    }

    /// Like [`HermitianOp::new`] but rejects non-finite entries and
    /// asymmetry above [`HERMITIAN_TOLERANCE`].
    pub fn checked(re: DMatrix<f64>, im: Option<DMatrix<f64>>) -> Result<Self> {
        if !re.is_square() {
            return Err(Error::DimensionMismatch { expected: re.nrows(), found: re.ncols() });
        }
        if let Some(im) = &im {
            if im.shape() != re.shape() {
                return Err(Error::DimensionMismatch { expected: re.nrows(), found: im.nrows() });
            }
        }
        if re.iter().chain(im.iter().flat_map(|m| m.iter())).any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteEntry);
        }
        let op = HermitianOp::new(re, im);
        if op.asymmetry > HERMITIAN_TOLERANCE {
            return Err(Error::NonHermitianInput {
                violation: op.asymmetry,
                tolerance: HERMITIAN_TOLERANCE,
            });
        }
        Ok(op)
    }

    pub fn real(re: DMatrix<f64>) -> Self {
        HermitianOp::new(re, None)
    }

    pub fn zeros(d: usize) -> Self {
        HermitianOp { re: DMatrix::zeros(d, d), im: None, asymmetry: 0.0 }
    }

    pub fn identity(d: usize) -> Self {
        HermitianOp { re: DMatrix::identity(d, d), im: None, asymmetry: 0.0 }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        HermitianOp {
            re: DMatrix::from_diagonal(&DVector::from_column_slice(diag)),
            im: None,
            asymmetry: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.re.nrows()
    }

    pub fn re(&self) -> &DMatrix<f64> {
        &self.re
    }

    pub fn im(&self) -> Option<&DMatrix<f64>> {
        self.im.as_ref()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_none()
    }

    /// Relative asymmetry removed at construction.
    pub fn asymmetry(&self) -> f64 {
        self.asymmetry
    }

    pub fn diagonal(&self) -> Vec<f64> {
        self.re.diagonal().iter().copied().collect()
    }

    pub fn trace(&self) -> f64 {
        self.re.trace()
    }

    pub fn is_zero(&self) -> bool {
        self.re.iter().all(|&x| x == 0.0) && self.im.is_none()
    }

    fn check_dim(&self, other: &HermitianOp) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    /// `self + a * other`.
    pub fn add_scaled(&self, a: f64, other: &HermitianOp) -> Result<HermitianOp> {
        self.check_dim(other)?;
        let re = &self.re + &other.re * a;
        let im = match (&self.im, &other.im) {
            (None, None) => None,
            (Some(x), None) => Some(x.clone()),
            (None, Some(y)) => Some(y * a),
            (Some(x), Some(y)) => Some(x + y * a),
        };
        let im = im.filter(|m| m.iter().any(|&x| x != 0.0));
        Ok(HermitianOp { re, im, asymmetry: self.asymmetry.max(other.asymmetry) })
    }

    pub fn add(&self, other: &HermitianOp) -> Result<HermitianOp> {
        self.add_scaled(1.0, other)
    }

    pub fn sub(&self, other: &HermitianOp) -> Result<HermitianOp> {
        self.add_scaled(-1.0, other)
    }

    pub fn scale(&self, a: f64) -> HermitianOp {
        HermitianOp {
            re: &self.re * a,
            im: self.im.as_ref().map(|m| m * a).filter(|m| m.iter().any(|&x| x != 0.0)),
            asymmetry: self.asymmetry,
        }
    }

    fn embedding(&self) -> DMatrix<f64> {
        let d = self.dim();
        let mut big = DMatrix::zeros(2 * d, 2 * d);
        big.view_mut((0, 0), (d, d)).copy_from(&self.re);
        big.view_mut((d, d), (d, d)).copy_from(&self.re);
        if let Some(im) = &self.im {
            big.view_mut((d, 0), (d, d)).copy_from(im);
            big.view_mut((0, d), (d, d)).copy_from(&(-im));
        }
        big
    }

    /// All eigenvalues in ascending order (dense eigensolve).
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim() == 0 {
            return Vec::new();
        }
        let mut values: Vec<f64> = match &self.im {
            None => self.re.clone().symmetric_eigenvalues().iter().copied().collect(),
            Some(_) => self.embedding().symmetric_eigenvalues().iter().copied().collect(),
        };
        values.sort_by(f64::total_cmp);
        if self.im.is_some() {
            values = values.into_iter().step_by(2).collect();
        }
        values
    }

    /// `(smallest, largest)` eigenvalue.
    pub fn extreme_eigenvalues(&self) -> (f64, f64) {
        if self.dim() == 0 {
            return (0.0, 0.0);
        }
        if self.is_zero() {
            return (0.0, 0.0);
        }
        if self.dim() <= DENSE_LIMIT {
            let ev = self.eigenvalues();
            (ev[0], ev[ev.len() - 1])
        } else {
            let (lo, hi) = self.power_extremes();
            (lo, hi)
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.extreme_eigenvalues().0
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.extreme_eigenvalues().1
    }

    /// Spectral norm `max |λ|`.
    pub fn operator_norm(&self) -> f64 {
        let (lo, hi) = self.extreme_eigenvalues();
        lo.abs().max(hi.abs())
    }

    /// `⟨H f, f⟩` for a complex vector given as separate real and imaginary parts.
    pub fn quadratic_form(&self, f_re: &[f64], f_im: &[f64]) -> f64 {
        let x = DVector::from_column_slice(f_re);
        let y = DVector::from_column_slice(f_im);
        // (x - iy)^T (A + iB) (x + iy), real part.
        let mut value = x.dot(&(&self.re * &x)) + y.dot(&(&self.re * &y));
        if let Some(b) = &self.im {
            value += 2.0 * y.dot(&(b * &x));
        }
        value
    }

    fn embedded_matvec(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.im {
            None => &self.re * v,
            Some(b) => {
                let d = self.dim();
                let x = v.rows(0, d);
                let y = v.rows(d, d);
                let mut out = DVector::zeros(2 * d);
                out.rows_mut(0, d).copy_from(&(&self.re * x - b * y));
                out.rows_mut(d, d).copy_from(&(b * x + &self.re * y));
                out
            }
        }
    }

    /// Extreme eigenvalues by power iteration on `H + sI` and `sI - H`, where
    /// `s` is a Gershgorin bound making both shifted operators PSD.
    fn power_extremes(&self) -> (f64, f64) {
        let n = if self.im.is_some() { 2 * self.dim() } else { self.dim() };
        let mut shift = 0.0f64;
        for i in 0..self.dim() {
            let mut row: f64 = self.re.row(i).iter().map(|x| x.abs()).sum();
            if let Some(b) = &self.im {
                row += b.row(i).iter().map(|x| x.abs()).sum::<f64>();
            }
            shift = shift.max(row);
        }
        if shift == 0.0 {
            return (0.0, 0.0);
        }
        let top = self.power_dominant(n, shift, 1.0) - shift;
        let bottom = shift - self.power_dominant(n, shift, -1.0);
        (bottom.min(top), top.max(bottom))
    }

    /// Dominant eigenvalue of `sign * H + shift * I`.
    fn power_dominant(&self, n: usize, shift: f64, sign: f64) -> f64 {
        let mut v = DVector::from_fn(n, |i, _| 1.0 + ((i * 7919) % 104_729) as f64 / 104_729.0);
        v /= v.norm();
        let mut lambda = 0.0;
        for _ in 0..POWER_MAX_ITERATIONS {
            let mut w = self.embedded_matvec(&v) * sign;
            w.axpy(shift, &v, 1.0);
            let next = v.dot(&w);
            let norm = w.norm();
            if norm == 0.0 {
                return 0.0;
            }
            v = w / norm;
            if (next - lambda).abs() <= POWER_TOLERANCE * next.abs().max(f64::MIN_POSITIVE) {
                return next;
            }
            lambda = next;
        }
        lambda
    }

    /// Nested `[[re, im], ...]` rows.
    pub fn to_json(&self) -> serde_json::Value {
        let d = self.dim();
        let rows: Vec<Vec<[f64; 2]>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| [self.re[(i, j)], self.im.as_ref().map_or(0.0, |m| m[(i, j)])])
                    .collect()
            })
            .collect();
        serde_json::to_value(rows).expect("matrix serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let rows: Vec<Vec<[f64; 2]>> = serde_json::from_value(value.clone())?;
        let d = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.len() });
        }
        let re = DMatrix::from_fn(d, d, |i, j| rows[i][j][0]);
        let im = DMatrix::from_fn(d, d, |i, j| rows[i][j][1]);
        let im = if im.iter().any(|&x| x != 0.0) { Some(im) } else { None };
        HermitianOp::checked(re, im)
    }
}

/// `left ⪯ right` up to `tol`: the smallest eigenvalue of `right - left` is `≥ -tol`.
pub fn loewner_leq(left: &HermitianOp, right: &HermitianOp, tol: f64) -> Result<bool> {
    let diff = right.sub(left)?;
    Ok(diff.min_eigenvalue() >= -tol)
}

/// Serializable spectrum row for CSV export.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub eigenvalue: f64,
}

pub fn spectrum_rows(op: &HermitianOp) -> Vec<SpectrumRow> {
    op.eigenvalues()
        .into_iter()
        .enumerate()
        .map(|(index, eigenvalue)| SpectrumRow { index, eigenvalue })
        .collect()
}
