//! Piecewise-constant Bessel families and weights.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure_space::{CellId, Interval, IntervalLayout, MeasureSpace};
use crate::operator::HermitianOp;
use crate::selection::{resolve, Selection};
use crate::util::gauss_legendre;

pub type Complex64 = Complex<f64>;

#[derive(Clone, Debug, PartialEq)]
pub struct FrameVector(pub Vec<Complex64>);

impl FrameVector {
    pub fn real(entries: &[f64]) -> Self {
        FrameVector(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(d: usize) -> Self {
        FrameVector(vec![Complex64::new(0.0, 0.0); d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_real(&self) -> bool {
        self.0.iter().all(|z| z.im == 0.0)
    }

    pub fn scaled(&self, a: f64) -> Self {
        FrameVector(self.0.iter().map(|z| z * a).collect())
    }

    /// `‖self − other‖`.
    pub fn distance(&self, other: &FrameVector) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }
}

/// Weighted sum of rank-one operators `Σ_n w_n v_n v_n*` over the rows of
/// `re + i·im` (one vector per row).
///
/// Computed as `(W·A)ᵀ A`; scaling every weight by a power of two scales the
/// result exactly.
pub fn weighted_gram(re: &DMatrix<f64>, im: Option<&DMatrix<f64>>, weights: &[f64]) -> HermitianOp {
    assert_eq!(re.nrows(), weights.len());
    let d = re.ncols();
    if weights.iter().all(|&w| w == 0.0) {
        return HermitianOp::zeros(d);
    }
    let scale_rows = |m: &DMatrix<f64>| {
        let mut out = m.clone();
        for (i, &w) in weights.iter().enumerate() {
            out.row_mut(i).scale_mut(w);
        }
        out.transpose()
    };
    let wa_t = scale_rows(re);
    let mut out_re = &wa_t * re;
    let out_im = im.map(|b| {
        let wb_t = scale_rows(b);
        out_re += &wb_t * b;
        &wb_t * re - &wa_t * b
    });
    HermitianOp::new(out_re, out_im)
}

/// A weight `τ: X → [0, 1]`.
#[derive(Clone)]
pub enum WeightFn {
    Constant(f64),
    /// Per-cell values; cells inherit the value of their nearest listed ancestor.
    PerCell(HashMap<CellId, f64>),
    /// Step function in layout coordinates: `values[k]` on
    /// `[breaks[k-1], breaks[k])`, with `values.len() == breaks.len() + 1`.
    Steps { breaks: Vec<f64>, values: Vec<f64> },
    /// `τ(t) = t / length`.
    Linear { length: f64 },
    /// Arbitrary pointwise weight in layout coordinates.
    Point(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for WeightFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightFn::Constant(c) => write!(f, "Constant({c})"),
            WeightFn::PerCell(m) => write!(f, "PerCell({} cells)", m.len()),
            WeightFn::Steps { breaks, values } => write!(f, "Steps({breaks:?}, {values:?})"),
            WeightFn::Linear { length } => write!(f, "Linear({length})"),
            WeightFn::Point(_) => write!(f, "Point(..)"),
        }
    }
}

fn check_weight(id: Option<&CellId>, value: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::WeightOutOfRange { id: id.cloned(), value });
    }
    Ok(value)
}

const POINT_RULE: usize = 8;

impl WeightFn {
    pub fn constant(value: f64) -> Result<Self> {
        check_weight(None, value).map(WeightFn::Constant)
    }

    pub fn per_cell(values: HashMap<CellId, f64>) -> Result<Self> {
        for (id, &v) in &values {
            check_weight(Some(id), v)?;
        }
        Ok(WeightFn::PerCell(values))
    }

    /// One value per cell of `space`, in space order.
    pub fn from_cell_values(space: &MeasureSpace, values: &[f64]) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::LengthMismatch { what: "weights", left: values.len(), right: space.len() });
        }
        WeightFn::per_cell(space.cells().iter().map(|c| c.id.clone()).zip(values.iter().copied()).collect())
    }

    pub fn steps(breaks: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breaks.len() + 1 {
            return Err(Error::LengthMismatch { what: "step values vs breaks + 1", left: values.len(), right: breaks.len() + 1 });
        }
        if breaks.windows(2).any(|w| !(w[0] <= w[1])) || breaks.iter().any(|b| !b.is_finite()) {
            return Err(Error::Parse("step breaks must be finite and nondecreasing".into()));
        }
        for &v in &values {
            check_weight(None, v)?;
        }
        Ok(WeightFn::Steps { breaks, values })
    }

    /// Indicator of a union of intervals in layout coordinates.
    pub fn indicator(intervals: &[Interval]) -> Result<Self> {
        let merged = crate::measure_space::merge_intervals(intervals.to_vec());
        let mut breaks = Vec::with_capacity(2 * merged.len());
        let mut values = vec![0.0];
        for iv in merged {
            breaks.push(iv.start);
            values.push(1.0);
            breaks.push(iv.end);
            values.push(0.0);
        }
        WeightFn::steps(breaks, values)
    }

    pub fn linear(length: f64) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidBound(length));
        }
        Ok(WeightFn::Linear { length })
    }

    pub fn point(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        WeightFn::Point(Arc::new(f))
    }

    /// Value at layout coordinate `t`. `PerCell` weights need the layout.
    pub fn value_at(&self, t: f64, layout: Option<&IntervalLayout>) -> Result<f64> {
        let v = match self {
            WeightFn::Constant(c) => *c,
            WeightFn::PerCell(map) => {
                let layout = layout.ok_or_else(|| {
                    Error::UnsupportedWeight("per-cell weight evaluated without a layout".into())
                })?;
                let entries = layout.entries();
                let k = entries.partition_point(|e| e.end <= t).min(entries.len().saturating_sub(1));
                let entry = entries.get(k).ok_or_else(|| Error::UnsupportedWeight("empty layout".into()))?;
                lookup(map, &entry.id)?
            }
            WeightFn::Steps { breaks, values } => values[breaks.partition_point(|&b| b <= t)],
            WeightFn::Linear { length } => (t / length).clamp(0.0, 1.0),
            WeightFn::Point(f) => f(t),
        };
        check_weight(None, v)
    }

    /// Points strictly inside `(a, b)` where the weight may be discontinuous
    /// or change polynomial degree.
    pub fn breakpoints(&self, a: f64, b: f64, layout: Option<&IntervalLayout>) -> Vec<f64> {
        match self {
            WeightFn::Steps { breaks, .. } => breaks.iter().copied().filter(|&x| a < x && x < b).collect(),
            WeightFn::PerCell(_) => layout
                .map(|l| l.entries().iter().map(|e| e.end).filter(|&x| a < x && x < b).collect())
                .unwrap_or_default(),
            WeightFn::Linear { length } if a < *length && *length < b => vec![*length],
            _ => Vec::new(),
        }
    }

    /// Polynomial degree on each smooth piece, or `None` when not polynomial.
    pub fn degree(&self) -> Option<usize> {
        match self {
            WeightFn::Linear { .. } => Some(1),
            WeightFn::Point(_) => None,
            _ => Some(0),
        }
    }

    /// Mean of the weight over a cell occupying `interval`.
    pub fn cell_mean(&self, id: &CellId, interval: Interval) -> Result<f64> {
        let v = match self {
            WeightFn::Constant(c) => *c,
            WeightFn::PerCell(map) => lookup(map, id)?,
            WeightFn::Steps { breaks, values } => {
                let len = interval.length();
                if len <= 0.0 {
                    values[breaks.partition_point(|&b| b <= interval.start)]
                } else {
                    let mut acc = 0.0;
                    let mut left = interval.start;
                    let mut k = breaks.partition_point(|&b| b <= left);
                    while left < interval.end {
                        let right = breaks.get(k).copied().unwrap_or(f64::INFINITY).min(interval.end);
                        acc += values[k] * (right - left);
                        left = right;
                        k += 1;
                    }
                    (acc / len).clamp(0.0, 1.0)
                }
            }
            WeightFn::Linear { length } => {
                let lo = interval.start.min(*length);
                let hi = interval.end.min(*length);
                let ramp = (hi * hi - lo * lo) / (2.0 * length);
                let flat = (interval.end - hi).max(0.0);
                ((ramp + flat) / interval.length()).clamp(0.0, 1.0)
            }
            WeightFn::Point(f) => {
                let (x, w) = gauss_legendre(POINT_RULE);
                let mid = interval.midpoint();
                let half = 0.5 * interval.length();
                x.iter().zip(&w).map(|(x, w)| 0.5 * w * f(mid + half * x)).sum()
            }
        };
        check_weight(Some(id), v)
    }

    /// Cell means for every cell of `space`, in order.
    pub fn cell_values(&self, space: &MeasureSpace) -> Result<Vec<f64>> {
        let layout = space.canonicalize_to_interval();
        layout
            .entries()
            .iter()
            .map(|e| self.cell_mean(&e.id, e.interval()))
            .collect()
    }

    /// `∫ τ dμ` for a piecewise-constant interpretation on `space`.
    pub fn integral(&self, space: &MeasureSpace) -> Result<f64> {
        let values = self.cell_values(space)?;
        Ok(crate::util::compensated_sum(
            space.cells().iter().zip(values).map(|(c, v)| c.measure * v),
        ))
    }
}

fn lookup(map: &HashMap<CellId, f64>, id: &CellId) -> Result<f64> {
    id.lineage()
        .find_map(|a| map.get(&a).copied())
        .ok_or_else(|| Error::UnknownCell(id.clone()))
}

/// Piecewise-constant Bessel family: one vector `ψ_n` per cell `X_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct PCFrame {
    space: MeasureSpace,
    re: DMatrix<f64>,
    im: Option<DMatrix<f64>>,
}

impl PCFrame {
    pub fn new(space: MeasureSpace, vectors: Vec<FrameVector>) -> Result<Self> {
        if vectors.len() != space.len() {
            return Err(Error::LengthMismatch { what: "frame vectors vs cells", left: vectors.len(), right: space.len() });
        }
        let d = vectors.first().map_or(0, FrameVector::dim);
        if let Some(bad) = vectors.iter().find(|v| v.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, found: bad.dim() });
        }
        if vectors.iter().flat_map(|v| &v.0).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFiniteEntry);
        }
        let n = vectors.len();
        let re = DMatrix::from_fn(n, d, |i, j| vectors[i].0[j].re);
        let im = if vectors.iter().all(FrameVector::is_real) {
            None
        } else {
            Some(DMatrix::from_fn(n, d, |i, j| vectors[i].0[j].im))
        };
        Ok(PCFrame { space, re, im })
    }

    /// Real vectors given as the rows of `rows` (one row per cell).
    pub fn from_real_rows(space: MeasureSpace, rows: DMatrix<f64>) -> Result<Self> {
        if rows.nrows() != space.len() {
            return Err(Error::LengthMismatch { what: "frame vectors vs cells", left: rows.nrows(), right: space.len() });
        }
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteEntry);
        }
        Ok(PCFrame { space, re: rows, im: None })
    }

    pub(crate) fn from_parts(space: MeasureSpace, re: DMatrix<f64>, im: Option<DMatrix<f64>>) -> Self {
        debug_assert_eq!(re.nrows(), space.len());
        PCFrame { space, re, im }
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.re.ncols()
    }

    pub fn len(&self) -> usize {
        self.re.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.re.nrows() == 0
    }

    pub fn rows_re(&self) -> &DMatrix<f64> {
        &self.re
    }

    pub fn rows_im(&self) -> Option<&DMatrix<f64>> {
        self.im.as_ref()
    }

    pub fn vector(&self, i: usize) -> FrameVector {
        FrameVector(
            (0..self.dim())
                .map(|j| Complex64::new(self.re[(i, j)], self.im.as_ref().map_or(0.0, |m| m[(i, j)])))
                .collect(),
        )
    }

    pub fn vectors(&self) -> Vec<FrameVector> {
        (0..self.len()).map(|i| self.vector(i)).collect()
    }

    pub fn norms(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let mut s = self.re.row(i).norm_squared();
                if let Some(im) = &self.im {
                    s += im.row(i).norm_squared();
                }
                s.sqrt()
            })
            .collect()
    }

    /// `Σ_n w_n ψ_n ψ_n*` for absolute per-cell weights `w_n` (measure units).
    pub fn operator_with_weights(&self, weights: &[f64]) -> HermitianOp {
        weighted_gram(&self.re, self.im.as_ref(), weights)
    }

    /// Partial frame operator `S_{ψ,E}`.
    pub fn frame_operator(&self, selection: &Selection) -> Result<HermitianOp> {
        Ok(self.operator_with_weights(&selection.kept_per_cell(&self.space)?))
    }

    /// Frame operator `S = S_{ψ,X}`.
    pub fn full_operator(&self) -> HermitianOp {
        self.operator_with_weights(&self.space.measures())
    }

    /// `S_{√τψ,X} = Σ_n τ_n μ(X_n) ψ_n ψ_n*`, with `τ_n` the cell mean of `τ`.
    pub fn weighted_frame_operator(&self, tau: &WeightFn) -> Result<HermitianOp> {
        let tau = tau.cell_values(&self.space)?;
        let w: Vec<f64> = self.space.cells().iter().zip(&tau).map(|(c, t)| c.measure * t).collect();
        Ok(self.operator_with_weights(&w))
    }

    /// Optimal frame bounds `(A, B)`: the extreme eigenvalues of `S`.
    pub fn frame_bounds(&self) -> (f64, f64) {
        let (a, b) = self.full_operator().extreme_eigenvalues();
        (a.max(0.0), b.max(a.max(0.0)))
    }

    /// Discrete sequence `√μ(X_n)·ψ_n` with the same frame operator.
    pub fn to_discrete_sequence(&self) -> Vec<FrameVector> {
        self.space
            .cells()
            .iter()
            .enumerate()
            .map(|(i, c)| self.vector(i).scaled(c.measure.sqrt()))
            .collect()
    }

    /// Re-expresses the frame on a refinement of its space: each cell of
    /// `space` takes the value of its nearest ancestor.
    pub fn pullback(&self, space: MeasureSpace) -> Result<PCFrame> {
        let rows: Vec<usize> = space
            .cells()
            .iter()
            .map(|c| resolve(&self.space, &c.id))
            .collect::<Result<_>>()?;
        let re = self.re.select_rows(rows.iter());
        let im = self.im.as_ref().map(|m| m.select_rows(rows.iter()));
        Ok(PCFrame { space, re, im })
    }

    pub fn split_cell(&self, id: &CellId, fraction: f64) -> Result<PCFrame> {
        let (space, _, _) = self.space.split_cell(id, fraction)?;
        self.pullback(space)
    }

    /// The frame restricted to the cells at `positions` (sorted, deduplicated).
    pub fn restrict(&self, positions: &[usize]) -> Result<PCFrame> {
        let mut rows = positions.to_vec();
        rows.sort_unstable();
        rows.dedup();
        let space = self.space.restrict(&rows)?;
        let re = self.re.select_rows(rows.iter());
        let im = self.im.as_ref().map(|m| m.select_rows(rows.iter()));
        Ok(PCFrame { space, re, im })
    }

    /// `{dimension, cells: [{id, measure, vector: [[re, im], ...]}]}`
    pub fn to_json(&self) -> serde_json::Value {
        let cells: Vec<WireCell> = self
            .space
            .cells()
            .iter()
            .enumerate()
            .map(|(i, c)| WireCell {
                id: c.id.clone(),
                measure: c.measure,
                splittable: c.splittable,
                vector: self.vector(i).0.iter().map(|z| [z.re, z.im]).collect(),
            })
            .collect();
        serde_json::to_value(WireFrame { dimension: self.dim(), cells }).expect("frame serializes")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let wire: WireFrame = serde_json::from_value(value.clone())?;
        let cells = wire
            .cells
            .iter()
            .map(|c| crate::measure_space::Cell { id: c.id.clone(), measure: c.measure, splittable: c.splittable })
            .collect();
        let space = MeasureSpace::new(cells)?;
        let vectors: Vec<FrameVector> = wire
            .cells
            .into_iter()
            .map(|c| FrameVector(c.vector.into_iter().map(|[re, im]| Complex64::new(re, im)).collect()))
            .collect();
        if let Some(bad) = vectors.iter().find(|v| v.dim() != wire.dimension) {
            return Err(Error::DimensionMismatch { expected: wire.dimension, found: bad.dim() });
        }
        PCFrame::new(space, vectors)
    }
}

#[derive(Serialize, Deserialize)]
struct WireFrame {
    dimension: usize,
    cells: Vec<WireCell>,
}

#[derive(Serialize, Deserialize)]
struct WireCell {
    id: CellId,
    measure: f64,
    #[serde(default = "yes")]
    splittable: bool,
    vector: Vec<[f64; 2]>,
}

fn yes() -> bool {
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::operator::loewner_leq;

    fn max_abs_diff(a: &HermitianOp, b: &HermitianOp) -> f64 {
        a.sub(b).unwrap().re().amax()
    }

    #[test]
    fn f1_partial_operators() {
        let f1 = fixtures::f1();
        let first = Selection::cells(f1.space(), &[0]);
        assert_eq!(f1.frame_operator(&first).unwrap(), HermitianOp::from_diagonal(&[1.0, 0.0]));
        assert!(f1.frame_operator(&Selection::empty()).unwrap().is_zero());
        assert_eq!(f1.frame_operator(&Selection::full(f1.space())).unwrap(), HermitianOp::identity(2));
    }

    #[test]
    fn f1_weighted_operators() {
        let f1 = fixtures::f1();
        assert_eq!(
            f1.weighted_frame_operator(&WeightFn::Constant(1.0)).unwrap(),
            HermitianOp::identity(2)
        );
        let tau = WeightFn::from_cell_values(f1.space(), &[0.25, 0.75]).unwrap();
        assert_eq!(f1.weighted_frame_operator(&tau).unwrap(), HermitianOp::from_diagonal(&[0.25, 0.75]));
        let chi = WeightFn::from_cell_values(f1.space(), &[1.0, 0.0]).unwrap();
        assert_eq!(
            f1.weighted_frame_operator(&chi).unwrap(),
            f1.frame_operator(&Selection::cells(f1.space(), &[0])).unwrap()
        );
        assert!(matches!(
            WeightFn::from_cell_values(f1.space(), &[1.5, 0.0]),
            Err(Error::WeightOutOfRange { .. })
        ));
    }

    #[test]
    fn bounds_of_f1_variants() {
        assert_eq!(fixtures::f1().frame_bounds(), (1.0, 1.0));
        let stretched = PCFrame::new(
            MeasureSpace::from_measures(&[1.0, 1.0]).unwrap(),
            vec![FrameVector::real(&[1.0, 0.0]), FrameVector::real(&[0.0, 2.0])],
        )
        .unwrap();
        let (a, b) = stretched.frame_bounds();
        assert!((a - 1.0).abs() < 1e-14 && (b - 4.0).abs() < 1e-14);
    }

    #[test]
    fn discrete_sequence_scaling() {
        let f1 = fixtures::f1();
        assert_eq!(
            f1.to_discrete_sequence(),
            vec![FrameVector::real(&[1.0, 0.0]), FrameVector::real(&[0.0, 1.0])]
        );
        let big = PCFrame::new(MeasureSpace::from_measures(&[4.0]).unwrap(), vec![FrameVector::real(&[1.0, 0.0])]).unwrap();
        assert_eq!(big.to_discrete_sequence(), vec![FrameVector::real(&[2.0, 0.0])]);
    }

    #[test]
    fn discrete_sequence_reproduces_operator() {
        let frame = fixtures::random_pcframe(4, 16, true, 11);
        let seq = frame.to_discrete_sequence();
        let d = frame.dim();
        let mut re = DMatrix::zeros(d, d);
        let mut im = DMatrix::zeros(d, d);
        for v in &seq {
            for j in 0..d {
                for k in 0..d {
                    let z = v.0[j] * v.0[k].conj();
                    re[(j, k)] += z.re;
                    im[(j, k)] += z.im;
                }
            }
        }
        let direct = HermitianOp::new(re, Some(im));
        let s = frame.full_operator();
        let diff = direct.sub(&s).unwrap();
        assert!(diff.operator_norm() <= 1e-12 * s.operator_norm());
    }

    #[test]
    fn layout_relabeling_is_bit_identical() {
        let frame = fixtures::random_pcframe(3, 16, false, 5);
        let relabeled_space = frame.space().canonicalize_to_interval().to_space().unwrap();
        let relabeled = PCFrame::from_real_rows(relabeled_space, frame.rows_re().clone()).unwrap();
        assert_eq!(relabeled.full_operator(), frame.full_operator());
    }

    #[test]
    fn split_then_select_both_children_is_parent() {
        let frame = fixtures::random_pcframe(3, 5, true, 2);
        let id = frame.space().cells()[2].id.clone();
        let split = frame.split_cell(&id, 0.3).unwrap();
        let s0 = frame.full_operator();
        let s1 = split.full_operator();
        assert!(max_abs_diff(&s0, &s1) <= 1e-12 * s0.re().amax());
        let parent = Selection::cells(frame.space(), &[2]);
        let children = Selection::cells(split.space(), &[2, 3]);
        let a = frame.frame_operator(&parent).unwrap();
        let b = split.frame_operator(&children).unwrap();
        assert!(max_abs_diff(&a, &b) <= 1e-12 * a.re().amax());
    }

    #[test]
    fn additivity_and_monotonicity() {
        let frame = fixtures::random_pcframe(4, 10, true, 3);
        let e1 = Selection::cells(frame.space(), &[0, 3, 4]);
        let e2 = Selection::cells(frame.space(), &[1, 7]);
        let union = Selection::cells(frame.space(), &[0, 1, 3, 4, 7]);
        let s1 = frame.frame_operator(&e1).unwrap();
        let s2 = frame.frame_operator(&e2).unwrap();
        let su = frame.frame_operator(&union).unwrap();
        let diff = su.sub(&s1.add(&s2).unwrap()).unwrap();
        assert!(diff.operator_norm() <= 1e-12 * su.operator_norm());
        let b = frame.frame_bounds().1;
        assert!(loewner_leq(&s1, &su, 1e-10 * b).unwrap());
    }

    #[test]
    fn weight_cell_means() {
        let iv = Interval::new(0.0, 0.5);
        let id = CellId::indexed(0);
        assert!((WeightFn::Linear { length: 1.0 }.cell_mean(&id, iv).unwrap() - 0.25).abs() < 1e-15);
        let steps = WeightFn::steps(vec![0.25], vec![1.0, 0.0]).unwrap();
        assert!((steps.cell_mean(&id, iv).unwrap() - 0.5).abs() < 1e-15);
        let point = WeightFn::point(|t| t * t);
        assert!((point.cell_mean(&id, Interval::new(0.0, 1.0)).unwrap() - 1.0 / 3.0).abs() < 1e-14);
        let ind = WeightFn::indicator(&[Interval::new(0.5, 0.75), Interval::new(0.0, 0.25)]).unwrap();
        assert_eq!(ind.value_at(0.1, None).unwrap(), 1.0);
        assert_eq!(ind.value_at(0.3, None).unwrap(), 0.0);
        assert_eq!(ind.value_at(0.75, None).unwrap(), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let frame = fixtures::random_pcframe(3, 4, true, 9);
        let back = PCFrame::from_json(&frame.to_json()).unwrap();
        assert_eq!(back, frame);
    }
}
