//! Generator-backed frames `t ↦ φ_t` on the interval layout of a measure space.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::frame::{weighted_gram, Complex64, FrameVector, PCFrame, WeightFn};
use crate::measure_space::{merge_intervals, Interval, IntervalLayout, MeasureSpace};
use crate::operator::HermitianOp;
use crate::util::gauss_legendre;

/// Samples per cell used by the variation estimator.
pub const VARIATION_SAMPLES: usize = 33;

/// Fallback Gauss–Legendre order for generators that are not piecewise polynomial.
const SMOOTH_RULE: usize = 8;
/// Rows assembled per block during quadrature.
const CHUNK_ROWS: usize = 4096;

/// A map `t ↦ φ_t ∈ ℂ^d` on layout coordinates.
///
/// Implementations must be safe to call concurrently.
pub trait Generator: Send + Sync {
    fn dimension(&self) -> usize;

    /// Writes `φ_t` into `out` (length `dimension()`).
    fn eval_into(&self, t: f64, out: &mut [Complex64]);

    fn is_real(&self) -> bool {
        true
    }

    /// An upper bound on `sup ‖φ_s − φ_t‖` over `s, t ∈ [a, b)`, if known analytically.
    fn variation_bound(&self, _a: f64, _b: f64) -> Option<f64> {
        None
    }

    /// Points in `(a, b)` where `φ` is not smooth.
    fn breakpoints(&self, _a: f64, _b: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Polynomial degree of `φ` between breakpoints, if piecewise polynomial.
    fn polynomial_degree(&self) -> Option<usize> {
        None
    }

    /// Longest subinterval integrated by a single quadrature panel.
    fn max_quadrature_step(&self) -> Option<f64> {
        None
    }

    fn name(&self) -> String {
        "custom".to_string()
    }
}

impl dyn Generator {
    pub fn eval(&self, t: f64) -> FrameVector {
        let mut out = vec![Complex64::new(0.0, 0.0); self.dimension()];
        self.eval_into(t, &mut out);
        FrameVector(out)
    }

    /// Analytic bound when available, otherwise twice the largest distance of
    /// 33 evenly spaced interior samples from the midpoint sample.
    pub fn variation(&self, a: f64, b: f64) -> f64 {
        if let Some(v) = self.variation_bound(a, b) {
            return v;
        }
        estimate_variation(|t| self.eval(t), a, b)
    }
}

pub(crate) fn estimate_variation<V, F>(eval: F, a: f64, b: f64) -> f64
where
    F: Fn(f64) -> V,
    V: Distance,
{
    let n = VARIATION_SAMPLES;
    let at = |i: usize| a + (b - a) * (i as f64 + 0.5) / n as f64;
    let mid = eval(at(n / 2));
    let spread = (0..n)
        .filter(|&i| i != n / 2)
        .map(|i| eval(at(i)).distance_to(&mid))
        .fold(0.0, f64::max);
    2.0 * spread
}

pub(crate) trait Distance {
    fn distance_to(&self, other: &Self) -> f64;
}

impl Distance for FrameVector {
    fn distance_to(&self, other: &Self) -> f64 {
        self.distance(other)
    }
}

impl Distance for HermitianOp {
    fn distance_to(&self, other: &Self) -> f64 {
        self.sub(other).map(|d| d.operator_norm()).unwrap_or(f64::INFINITY)
    }
}

/// `φ_t = χ_{[0,t]}` expanded in the orthonormal step basis `√d·χ_{[j/d,(j+1)/d)}`.
/// Its frame operator on `[0, 1]` is the kernel `min(1 − s, 1 − u)`.
#[derive(Clone, Copy, Debug)]
pub struct MovingAverage {
    pub d: usize,
}

impl Generator for MovingAverage {
    fn dimension(&self) -> usize {
        self.d
    }

    fn eval_into(&self, t: f64, out: &mut [Complex64]) {
        let d = self.d as f64;
        let h = 1.0 / d;
        let s = d.sqrt();
        for (j, z) in out.iter_mut().enumerate() {
            *z = Complex64::new(s * (t - j as f64 * h).clamp(0.0, h), 0.0);
        }
    }

    /// Entries are nondecreasing in `t`, so the supremum is attained at the ends.
    fn variation_bound(&self, a: f64, b: f64) -> Option<f64> {
        let d = self.d as f64;
        let h = 1.0 / d;
        let lo = (a.max(0.0) * d).floor() as usize;
        let hi = ((b.min(1.0) * d).ceil() as usize).min(self.d);
        let sq: f64 = (lo..hi)
            .map(|j| {
                let left = j as f64 * h;
                let diff = (b - left).clamp(0.0, h) - (a - left).clamp(0.0, h);
                d * diff * diff
            })
            .sum();
        Some(sq.sqrt())
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        let d = self.d as f64;
        let first = (a * d).floor() as i64 + 1;
        let last = (b * d).ceil() as i64 - 1;
        (first.max(1)..=last.min(self.d as i64 - 1))
            .map(|j| j as f64 / d)
            .filter(|&x| a < x && x < b)
            .collect()
    }

    fn polynomial_degree(&self) -> Option<usize> {
        Some(1)
    }

    fn name(&self) -> String {
        "moving-average".into()
    }
}

/// Truncated characters `φ_t = (e^{2πikt})_{k<d}`; Parseval on `[0, 1)`.
#[derive(Clone, Copy, Debug)]
pub struct Fourier {
    pub d: usize,
}

impl Generator for Fourier {
    fn dimension(&self) -> usize {
        self.d
    }

    fn eval_into(&self, t: f64, out: &mut [Complex64]) {
        for (k, z) in out.iter_mut().enumerate() {
            let phase = 2.0 * PI * k as f64 * t;
            *z = Complex64::new(phase.cos(), phase.sin());
        }
    }

    fn is_real(&self) -> bool {
        self.d <= 1
    }

    fn variation_bound(&self, a: f64, b: f64) -> Option<f64> {
        let k2: f64 = (0..self.d).map(|k| (k * k) as f64).sum();
        Some((2.0 * PI * (b - a).abs() * k2.sqrt()).min(2.0 * (self.d as f64).sqrt()))
    }

    fn max_quadrature_step(&self) -> Option<f64> {
        Some(0.5 / self.d.max(1) as f64)
    }

    fn name(&self) -> String {
        "fourier".into()
    }
}

#[derive(Clone, Debug)]
pub struct ConstantGenerator {
    pub value: FrameVector,
}

impl Generator for ConstantGenerator {
    fn dimension(&self) -> usize {
        self.value.dim()
    }

    fn eval_into(&self, _t: f64, out: &mut [Complex64]) {
        out.copy_from_slice(&self.value.0);
    }

    fn is_real(&self) -> bool {
        self.value.is_real()
    }

    fn variation_bound(&self, _a: f64, _b: f64) -> Option<f64> {
        Some(0.0)
    }

    fn polynomial_degree(&self) -> Option<usize> {
        Some(0)
    }

    fn name(&self) -> String {
        "constant".into()
    }
}

/// Piecewise-constant generator: `values[k]` on `[ends[k-1], ends[k])`.
#[derive(Clone, Debug)]
pub struct StepGenerator {
    ends: Vec<f64>,
    values: Vec<FrameVector>,
}

impl StepGenerator {
    pub fn from_pcframe(frame: &PCFrame) -> Self {
        let layout = frame.space().canonicalize_to_interval();
        StepGenerator {
            ends: layout.entries().iter().map(|e| e.end).collect(),
            values: frame.vectors(),
        }
    }

    fn index(&self, t: f64) -> usize {
        self.ends.partition_point(|&e| e <= t).min(self.values.len().saturating_sub(1))
    }
}

impl Generator for StepGenerator {
    fn dimension(&self) -> usize {
        self.values.first().map_or(0, FrameVector::dim)
    }

    fn eval_into(&self, t: f64, out: &mut [Complex64]) {
        out.copy_from_slice(&self.values[self.index(t)].0);
    }

    fn is_real(&self) -> bool {
        self.values.iter().all(FrameVector::is_real)
    }

    fn variation_bound(&self, a: f64, b: f64) -> Option<f64> {
        let lo = self.index(a);
        let hi = self.ends.partition_point(|&e| e < b).min(self.values.len().saturating_sub(1));
        let mut v = 0.0f64;
        for i in lo..=hi {
            for j in i + 1..=hi {
                v = v.max(self.values[i].distance(&self.values[j]));
            }
        }
        Some(v)
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        self.ends.iter().copied().filter(|&x| a < x && x < b).collect()
    }

    fn polynomial_degree(&self) -> Option<usize> {
        Some(0)
    }

    fn name(&self) -> String {
        "steps".into()
    }
}

type EvalFn = dyn Fn(f64, &mut [Complex64]) + Send + Sync;

/// Generator from a closure; variation is estimated by sampling.
#[derive(Clone)]
pub struct FnGenerator {
    d: usize,
    real: bool,
    f: Arc<EvalFn>,
}

impl FnGenerator {
    pub fn new(d: usize, real: bool, f: impl Fn(f64, &mut [Complex64]) + Send + Sync + 'static) -> Self {
        FnGenerator { d, real, f: Arc::new(f) }
    }
}

impl fmt::Debug for FnGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnGenerator(d = {})", self.d)
    }
}

impl Generator for FnGenerator {
    fn dimension(&self) -> usize {
        self.d
    }

    fn eval_into(&self, t: f64, out: &mut [Complex64]) {
        (self.f)(t, out)
    }

    fn is_real(&self) -> bool {
        self.real
    }
}

/// A generator frame over the canonical interval layout of `space`, with
/// per-cell variation bounds.
#[derive(Clone)]
pub struct GenFrame {
    space: MeasureSpace,
    layout: IntervalLayout,
    generator: Arc<dyn Generator>,
    variation: Vec<f64>,
}

impl fmt::Debug for GenFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenFrame")
            .field("cells", &self.space.len())
            .field("dimension", &self.dim())
            .field("generator", &self.generator.name())
            .finish()
    }
}

impl GenFrame {
    /// Variation bounds come from the generator or the sampling estimator.
    pub fn new(space: MeasureSpace, generator: Arc<dyn Generator>) -> Result<Self> {
        let layout = space.canonicalize_to_interval();
        let variation = layout
            .entries()
            .iter()
            .map(|e| generator.variation(e.start, e.end))
            .collect();
        GenFrame::with_variation(space, generator, variation)
    }

    /// Caller-supplied per-cell variation bounds.
    pub fn with_variation(space: MeasureSpace, generator: Arc<dyn Generator>, variation: Vec<f64>) -> Result<Self> {
        if variation.len() != space.len() {
            return Err(Error::LengthMismatch { what: "variation bounds vs cells", left: variation.len(), right: space.len() });
        }
        if let Some(&bad) = variation.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidBound(bad));
        }
        let layout = space.canonicalize_to_interval();
        Ok(GenFrame { space, layout, generator, variation })
    }

    /// The generator on `[0, 1)` as a single cell.
    pub fn unit(generator: Arc<dyn Generator>) -> Result<Self> {
        GenFrame::new(MeasureSpace::from_measures(&[1.0])?, generator)
    }

    pub fn from_pcframe(frame: &PCFrame) -> Result<Self> {
        GenFrame::new(frame.space().clone(), Arc::new(StepGenerator::from_pcframe(frame)))
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn layout(&self) -> &IntervalLayout {
        &self.layout
    }

    pub fn generator(&self) -> &Arc<dyn Generator> {
        &self.generator
    }

    pub fn variation(&self) -> &[f64] {
        &self.variation
    }

    pub fn dim(&self) -> usize {
        self.generator.dimension()
    }

    pub fn eval(&self, t: f64) -> FrameVector {
        self.generator.eval(t)
    }

    /// The whole layout `[0, μ(X))` as one interval list.
    pub fn domain(&self) -> Vec<Interval> {
        merge_intervals(self.layout.entries().iter().map(|e| e.interval()).collect())
    }

    /// `∫_E τ(t) φ_t φ_t* dt` over a union of intervals, by Gauss–Legendre
    /// panels split at generator and weight breakpoints. Exact for piecewise
    /// polynomial generators and weights.
    pub fn operator_on(&self, intervals: &[Interval], tau: Option<&WeightFn>) -> Result<HermitianOp> {
        let mut acc = QuadratureAccumulator::new(self.dim(), self.generator.is_real());
        let rule = self.rule(tau);
        let step = self.generator.max_quadrature_step();
        for iv in intervals {
            if iv.end <= iv.start {
                continue;
            }
            let mut cuts = self.generator.breakpoints(iv.start, iv.end);
            if let Some(tau) = tau {
                cuts.extend(tau.breakpoints(iv.start, iv.end, Some(&self.layout)));
            }
            cuts.push(iv.start);
            cuts.push(iv.end);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let panels = step.map_or(1, |h| ((b - a) / h).ceil().max(1.0) as usize);
                for p in 0..panels {
                    let pa = a + (b - a) * p as f64 / panels as f64;
                    let pb = if p + 1 == panels { b } else { a + (b - a) * (p + 1) as f64 / panels as f64 };
                    let mid = 0.5 * (pa + pb);
                    let half = 0.5 * (pb - pa);
                    for (x, wt) in rule.0.iter().zip(&rule.1) {
                        let t = mid + half * x;
                        let weight = match tau {
                            Some(tau) => tau.value_at(t, Some(&self.layout))?,
                            None => 1.0,
                        };
                        if weight != 0.0 {
                            acc.push(&*self.generator, t, half * wt * weight);
                        }
                    }
                }
            }
        }
        Ok(acc.finish())
    }

    fn rule(&self, tau: Option<&WeightFn>) -> (Vec<f64>, Vec<f64>) {
        let weight_degree = tau.map_or(Some(0), WeightFn::degree);
        let points = match (self.generator.polynomial_degree(), weight_degree) {
            (Some(p), Some(k)) => (2 * p + k + 2).div_ceil(2).max(1),
            _ => SMOOTH_RULE,
        };
        gauss_legendre(points)
    }

    /// Frame operator `S = ∫_X φφ* dμ`.
    pub fn full_operator(&self) -> Result<HermitianOp> {
        self.operator_on(&self.domain(), None)
    }

    /// `S_{√τφ,X}`.
    pub fn weighted_operator(&self, tau: &WeightFn) -> Result<HermitianOp> {
        self.operator_on(&self.domain(), Some(tau))
    }
}

/// Streams weighted rank-one terms into a Gram sum in fixed-size blocks.
pub(crate) struct QuadratureAccumulator {
    d: usize,
    real: bool,
    rows: usize,
    block_re: DMatrix<f64>,
    block_im: DMatrix<f64>,
    weights: Vec<f64>,
    buffer: Vec<Complex64>,
    sum: Option<HermitianOp>,
}

impl QuadratureAccumulator {
    pub(crate) fn new(d: usize, real: bool) -> Self {
        QuadratureAccumulator {
            d,
            real,
            rows: 0,
            block_re: DMatrix::zeros(CHUNK_ROWS, d),
            block_im: if real { DMatrix::zeros(0, 0) } else { DMatrix::zeros(CHUNK_ROWS, d) },
            weights: vec![0.0; CHUNK_ROWS],
            buffer: vec![Complex64::new(0.0, 0.0); d],
            sum: None,
        }
    }

    pub(crate) fn push(&mut self, generator: &dyn Generator, t: f64, weight: f64) {
        generator.eval_into(t, &mut self.buffer);
        for (j, z) in self.buffer.iter().enumerate() {
            self.block_re[(self.rows, j)] = z.re;
            if !self.real {
                self.block_im[(self.rows, j)] = z.im;
            }
        }
        self.weights[self.rows] = weight;
        self.rows += 1;
        if self.rows == CHUNK_ROWS {
            self.flush();
        }
    }

    fn flush(&mut self) {
        if self.rows == 0 {
            return;
        }
        let n = self.rows;
        let re = self.block_re.rows(0, n).into_owned();
        let im = if self.real { None } else { Some(self.block_im.rows(0, n).into_owned()) };
        let part = weighted_gram(&re, im.as_ref(), &self.weights[..n]);
        self.sum = Some(match self.sum.take() {
            None => part,
            Some(s) => s.add(&part).expect("same dimension"),
        });
        self.rows = 0;
    }

    pub(crate) fn finish(mut self) -> HermitianOp {
        self.flush();
        self.sum.unwrap_or_else(|| HermitianOp::zeros(self.d))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn moving_average_entries() {
        let g: Arc<dyn Generator> = Arc::new(MovingAverage { d: 4 });
        let v = g.eval(0.3);
        let expect = [0.25, 0.05, 0.0, 0.0].map(|x| 2.0 * x);
        for (z, e) in v.0.iter().zip(expect) {
            assert!((z.re - e).abs() < 1e-15);
        }
        assert!((g.eval(1.0).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn moving_average_variation_is_endpoint_distance() {
        let g: Arc<dyn Generator> = Arc::new(MovingAverage { d: 8 });
        let (a, b) = (0.1, 0.37);
        let exact = g.variation_bound(a, b).unwrap();
        assert!((exact - g.eval(b).distance(&g.eval(a))).abs() < 1e-14);
        let est = estimate_variation(|t| g.eval(t), a, b);
        assert!(est >= exact * 0.9, "{est} vs {exact}");
    }

    #[test]
    fn moving_average_operator_is_brownian_kernel() {
        let d = 8;
        let frame = GenFrame::unit(Arc::new(MovingAverage { d })).unwrap();
        let s = frame.full_operator().unwrap();
        // Entry (j, k) of the kernel 1 − max(s, u) averaged over the step basis.
        let h = 1.0 / d as f64;
        for j in 0..d {
            for k in 0..d {
                let expect = if j == k {
                    d as f64 * (h * h * (1.0 - (j as f64 + 1.0) * h) + h * h * h / 3.0)
                } else {
                    let m = j.max(k) as f64;
                    d as f64 * h * h * (1.0 - (m + 0.5) * h)
                };
                assert!((s.re()[(j, k)] - expect).abs() < 1e-14, "{j},{k}: {} vs {expect}", s.re()[(j, k)]);
            }
        }
    }

    #[test]
    fn fourier_is_parseval() {
        let frame = GenFrame::unit(Arc::new(Fourier { d: 5 })).unwrap();
        let s = frame.full_operator().unwrap();
        let diff = s.sub(&HermitianOp::identity(5)).unwrap();
        assert!(diff.operator_norm() < 1e-12, "{}", diff.operator_norm());
    }

    #[test]
    fn linear_weight_quadrature_is_exact() {
        let frame = GenFrame::unit(Arc::new(ConstantGenerator { value: FrameVector::real(&[1.0, 1.0]) })).unwrap();
        let s = frame.weighted_operator(&WeightFn::Linear { length: 1.0 }).unwrap();
        assert!((s.re()[(0, 1)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn step_generator_reproduces_pcframe() {
        let pc = fixtures::random_pcframe(3, 6, true, 1);
        let gen = GenFrame::from_pcframe(&pc).unwrap();
        assert!(gen.variation().iter().all(|&v| v == 0.0));
        let diff = gen.full_operator().unwrap().sub(&pc.full_operator()).unwrap();
        assert!(diff.operator_norm() < 1e-12);
    }
}
