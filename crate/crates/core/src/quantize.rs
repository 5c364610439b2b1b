//! Countably-valued approximation of generator frames.
//!
//! The layered rule splits the domain into pieces `P_m` of measure at most
//! one and the values into layers `‖φ_t‖ < 2ⁿ`, then bisects cells until the
//! variation on each is at most `ε'/(4ⁿ2ᵐ)` with `ε' = min(ε/6, 1)`. The
//! midpoint value `ψ` of a cell then satisfies
//! `‖S_{√τφ} − S_{√τψ}‖ ≤ Σ μ·dev·(2‖ψ‖ + dev) ≤ ε` for every weight `τ`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::PCFrame;
use crate::generator::GenFrame;
use crate::measure_space::{Cell, CellId, Interval, MeasureSpace};
use crate::util::compensated_sum;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuantizeOptions {
    /// Bisections allowed below a top-level piece.
    pub max_depth: usize,
    pub max_cells: usize,
}

impl Default for QuantizeOptions {
    fn default() -> Self {
        QuantizeOptions { max_depth: 48, max_cells: 1 << 20 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerCount {
    pub layer: u32,
    pub cells: usize,
    pub measure: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantizeCertificate {
    pub requested_eps: f64,
    pub internal_eps: f64,
    pub cell_count: usize,
    pub pieces: usize,
    pub max_depth: usize,
    pub layers: Vec<LayerCount>,
    /// Variation bound achieved on each output cell, in cell order.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
    /// `Σ μ·dev·(2‖ψ‖ + dev)`, an upper bound on the operator error for every weight.
    pub integrated_bound: f64,
}

/// A cell of the refined partition.
#[derive(Clone, Debug)]
pub(crate) struct RefinedCell {
    pub id: CellId,
    pub interval: Interval,
    pub measure: f64,
    pub norm: f64,
    pub deviation: f64,
    pub layer: u32,
    pub depth: usize,
}

/// A starting cell for refinement.
#[derive(Clone, Debug)]
pub(crate) struct Piece {
    pub id: CellId,
    pub interval: Interval,
    pub measure: f64,
}

impl Piece {
    fn halves(&self) -> (Piece, Piece) {
        let (l, r) = self.interval.split_at_fraction(0.5);
        let m = 0.5 * self.measure;
        (
            Piece { id: self.id.child(false), interval: l, measure: m },
            Piece { id: self.id.child(true), interval: r, measure: self.measure - m },
        )
    }
}

/// Halves each piece until its measure is at most one, then groups
/// consecutive pieces into runs of total measure at most one.
/// Returns the pieces with their group index `m ≥ 1`.
pub(crate) fn unit_pieces(pieces: Vec<Piece>) -> Vec<(Piece, u32)> {
    let mut small = Vec::with_capacity(pieces.len());
    let mut stack: Vec<Piece> = Vec::new();
    for p in pieces.into_iter().rev() {
        stack.push(p);
    }
    while let Some(p) = stack.pop() {
        if p.measure <= 1.0 {
            small.push(p);
        } else {
            let (l, r) = p.halves();
            stack.push(r);
            stack.push(l);
        }
    }
    let mut out = Vec::with_capacity(small.len());
    let mut m = 1u32;
    let mut run = 0.0;
    for p in small {
        if run > 0.0 && run + p.measure > 1.0 {
            m += 1;
            run = 0.0;
        }
        run += p.measure;
        out.push((p, m));
    }
    out
}

/// Smallest `n ≥ 0` with `x < 2ⁿ`.
pub(crate) fn layer_of(x: f64) -> u32 {
    let mut n = 0u32;
    while x >= 2f64.powi(n as i32) && n < 1023 {
        n += 1;
    }
    n
}

/// Bisects every piece until `variation ≤ tolerance(norm, variation, m)`.
///
/// `tolerance` returns the tolerance and the layer index. Output is in
/// domain order.
pub(crate) fn refine_layered<N, V, T>(
    pieces: Vec<(Piece, u32)>,
    norm_at: N,
    variation: V,
    tolerance: T,
    opts: QuantizeOptions,
) -> Result<Vec<RefinedCell>>
where
    N: Fn(f64) -> f64,
    V: Fn(f64, f64) -> f64,
    T: Fn(f64, f64, u32) -> (f64, u32),
{
    let mut out = Vec::new();
    let mut stack: Vec<(Piece, u32, usize)> = pieces.into_iter().rev().map(|(p, m)| (p, m, 0)).collect();
    while let Some((p, m, depth)) = stack.pop() {
        let norm = norm_at(p.interval.midpoint());
        let dev = variation(p.interval.start, p.interval.end);
        let (tol, layer) = tolerance(norm, dev, m);
        if dev <= tol {
            out.push(RefinedCell {
                id: p.id,
                interval: p.interval,
                measure: p.measure,
                norm,
                deviation: dev,
                layer,
                depth,
            });
            continue;
        }
        if depth >= opts.max_depth || !(p.interval.length() > 0.0) {
            return Err(Error::VariationUnboundedOnCell { id: p.id, variation: dev, tolerance: tol, depth });
        }
        if out.len() + stack.len() + 2 > opts.max_cells {
            return Err(Error::RefinementBudgetExceeded { max_cells: opts.max_cells });
        }
        let (l, r) = p.halves();
        stack.push((r, m, depth + 1));
        stack.push((l, m, depth + 1));
    }
    Ok(out)
}

fn cell_contribution(c: &RefinedCell, factor: f64) -> f64 {
    factor * c.measure * c.deviation * (2.0 * c.norm + c.deviation)
}

/// Bisects the cell with the largest contribution `factor·μ·dev·(2‖ψ‖+dev)`
/// until the total is below `target`. Output is in input order.
pub(crate) fn refine_integrated<N, V>(
    pieces: Vec<Piece>,
    norm_at: N,
    variation: V,
    target: f64,
    factor: f64,
    opts: QuantizeOptions,
) -> Result<Vec<RefinedCell>>
where
    N: Fn(f64) -> f64,
    V: Fn(f64, f64) -> f64,
{
    use std::cmp::Ordering;
    use std::collections::BinaryHeap;

    struct Entry {
        key: f64,
        root: usize,
        seq: usize,
        cell: RefinedCell,
    }
    impl PartialEq for Entry {
        fn eq(&self, o: &Self) -> bool {
            self.cmp(o) == Ordering::Equal
        }
    }
    impl Eq for Entry {}
    impl PartialOrd for Entry {
        fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
            Some(self.cmp(o))
        }
    }
    impl Ord for Entry {
        fn cmp(&self, o: &Self) -> Ordering {
            self.key.total_cmp(&o.key).then_with(|| o.seq.cmp(&self.seq))
        }
    }

    let make = |p: Piece, depth: usize| {
        let norm = norm_at(p.interval.midpoint());
        let deviation = variation(p.interval.start, p.interval.end);
        RefinedCell { id: p.id, interval: p.interval, measure: p.measure, norm, deviation, layer: 0, depth }
    };
    let mut heap = BinaryHeap::new();
    let mut seq = 0usize;
    for (root, p) in pieces.into_iter().enumerate() {
        let cell = make(p, 0);
        let key = cell_contribution(&cell, factor);
        heap.push(Entry { key, root, seq, cell });
        seq += 1;
    }
    let mut total = compensated_sum(heap.iter().map(|e| e.key));
    let mut steps = 0usize;
    while total >= target {
        let Some(top) = heap.pop() else { break };
        let c = top.cell;
        if c.depth >= opts.max_depth || !(c.interval.length() > 0.0) {
            return Err(Error::VariationUnboundedOnCell {
                id: c.id,
                variation: c.deviation,
                tolerance: target,
                depth: c.depth,
            });
        }
        if heap.len() + 2 > opts.max_cells {
            return Err(Error::RefinementBudgetExceeded { max_cells: opts.max_cells });
        }
        let (l, r) = Piece { id: c.id, interval: c.interval, measure: c.measure }.halves();
        let mut children = 0.0;
        for p in [l, r] {
            let cell = make(p, c.depth + 1);
            let key = cell_contribution(&cell, factor);
            children += key;
            heap.push(Entry { key, root: top.root, seq, cell });
            seq += 1;
        }
        steps += 1;
        total = if steps % 512 == 0 {
            compensated_sum(heap.iter().map(|e| e.key))
        } else {
            total - top.key + children
        };
    }
    let mut cells = heap.into_vec();
    cells.sort_by(|a, b| a.root.cmp(&b.root).then(a.cell.interval.start.total_cmp(&b.cell.interval.start)));
    Ok(cells.into_iter().map(|e| e.cell).collect())
}

/// Pieces covering the layout of a generator frame, one per cell.
pub(crate) fn layout_pieces(frame: &GenFrame) -> Vec<Piece> {
    frame
        .layout()
        .entries()
        .iter()
        .map(|e| Piece { id: e.id.clone(), interval: e.interval(), measure: e.measure })
        .collect()
}

/// Evaluates the generator at each cell midpoint.
pub(crate) fn midpoint_frame(frame: &GenFrame, cells: &[RefinedCell]) -> Result<PCFrame> {
    let space = MeasureSpace::new(cells.iter().map(|c| Cell::new(c.id.clone(), c.measure)).collect())?;
    let d = frame.dim();
    let n = cells.len();
    let mut re = DMatrix::zeros(n, d);
    let mut im = if frame.generator().is_real() { None } else { Some(DMatrix::zeros(n, d)) };
    for (i, c) in cells.iter().enumerate() {
        let v = frame.eval(c.interval.midpoint());
        for (j, z) in v.0.iter().enumerate() {
            re[(i, j)] = z.re;
            if let Some(im) = im.as_mut() {
                im[(i, j)] = z.im;
            }
        }
    }
    Ok(PCFrame::from_parts(space, re, im))
}

pub(crate) fn integrated_bound(cells: &[RefinedCell]) -> f64 {
    compensated_sum(cells.iter().map(|c| cell_contribution(c, 1.0)))
}

/// Countably-valued approximation `ψ` of a generator frame with
/// `‖S_{√τφ} − S_{√τψ}‖ ≤ ε` for every weight `τ`.
pub fn quantize(frame: &GenFrame, eps: f64) -> Result<(PCFrame, QuantizeCertificate)> {
    quantize_with(frame, eps, QuantizeOptions::default())
}

pub fn quantize_with(frame: &GenFrame, eps: f64, opts: QuantizeOptions) -> Result<(PCFrame, QuantizeCertificate)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::EpsilonNonpositive(eps));
    }
    frame.space().require_non_atomic()?;
    let internal = (eps / 6.0).min(1.0);
    let pieces = unit_pieces(layout_pieces(frame));
    let piece_count = pieces.last().map_or(0, |(_, m)| *m as usize);
    let generator = frame.generator();
    let cells = refine_layered(
        pieces,
        |t| generator.eval(t).norm(),
        |a, b| generator.variation(a, b),
        |norm, dev, m| {
            let n = layer_of(norm + dev);
            (internal / (4f64.powi(n as i32) * 2f64.powi(m as i32)), n)
        },
        opts,
    )?;
    let bound = integrated_bound(&cells);
    if bound > eps {
        return Err(Error::GuaranteeViolated { what: "quantization bound".into(), value: bound, bound: eps });
    }
    let mut layers: Vec<LayerCount> = Vec::new();
    for c in &cells {
        match layers.iter_mut().find(|l| l.layer == c.layer) {
            Some(l) => {
                l.cells += 1;
                l.measure += c.measure;
            }
            None => layers.push(LayerCount { layer: c.layer, cells: 1, measure: c.measure }),
        }
    }
    layers.sort_by_key(|l| l.layer);
    let deviations: Vec<f64> = cells.iter().map(|c| c.deviation).collect();
    let certificate = QuantizeCertificate {
        requested_eps: eps,
        internal_eps: internal,
        cell_count: cells.len(),
        pieces: piece_count,
        max_depth: cells.iter().map(|c| c.depth).max().unwrap_or(0),
        layers,
        max_deviation: deviations.iter().copied().fold(0.0, f64::max),
        deviations,
        integrated_bound: bound,
    };
    Ok((midpoint_frame(frame, &cells)?, certificate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{FrameVector, WeightFn};
    use crate::generator::{ConstantGenerator, FnGenerator, Fourier, Generator, MovingAverage};
    use crate::fixtures;
    use std::sync::Arc;

    #[test]
    fn layers() {
        assert_eq!(layer_of(0.0), 0);
        assert_eq!(layer_of(0.99), 0);
        assert_eq!(layer_of(1.0), 1);
        assert_eq!(layer_of(3.9), 2);
        assert_eq!(layer_of(4.0), 3);
    }

    #[test]
    fn unit_pieces_group_runs() {
        let pieces = vec![
            Piece { id: CellId::indexed(0), interval: Interval::new(0.0, 2.5), measure: 2.5 },
            Piece { id: CellId::indexed(1), interval: Interval::new(2.5, 2.75), measure: 0.25 },
        ];
        let out = unit_pieces(pieces);
        assert!(out.iter().all(|(p, _)| p.measure <= 1.0));
        let total: f64 = out.iter().map(|(p, _)| p.measure).sum();
        assert_eq!(total, 2.75);
        for m in 1..=out.last().unwrap().1 {
            let run: f64 = out.iter().filter(|(_, k)| *k == m).map(|(p, _)| p.measure).sum();
            assert!(run <= 1.0);
        }
    }

    #[test]
    fn constant_generator_is_a_fixed_point() {
        let v = FrameVector::real(&[0.3, -0.4]);
        let frame = GenFrame::unit(Arc::new(ConstantGenerator { value: v.clone() })).unwrap();
        let (pc, cert) = quantize(&frame, 0.01).unwrap();
        assert_eq!(pc.len(), 1);
        assert_eq!(pc.vector(0), v);
        assert_eq!(cert.max_deviation, 0.0);
    }

    #[test]
    fn piecewise_constant_input_is_unchanged() {
        let pc = fixtures::random_pcframe(3, 6, true, 4);
        let frame = GenFrame::from_pcframe(&pc).unwrap();
        let (out, cert) = quantize(&frame, 0.05).unwrap();
        assert_eq!(cert.max_deviation, 0.0);
        assert_eq!(out.vectors(), pc.vectors());
        assert_eq!(out.space().measures(), pc.space().measures());
    }

    #[test]
    fn rejects_bad_epsilon_and_atoms() {
        let frame = GenFrame::unit(Arc::new(MovingAverage { d: 4 })).unwrap();
        assert_eq!(quantize(&frame, 0.0).unwrap_err(), Error::EpsilonNonpositive(0.0));
        let atom = MeasureSpace::new(vec![Cell::atom(CellId::indexed(0), 1.0)]).unwrap();
        let frame = GenFrame::new(atom, Arc::new(MovingAverage { d: 4 })).unwrap();
        assert!(matches!(quantize(&frame, 0.1), Err(Error::AtomNotSplittable(_))));
    }

    #[test]
    fn discontinuous_generator_is_reported() {
        let jump = FnGenerator::new(1, true, |t, out| {
            out[0] = crate::frame::Complex64::new(if t < 1.0 / 3.0 { 0.0 } else { 1.0 }, 0.0);
        });
        let frame = GenFrame::with_variation(
            MeasureSpace::from_measures(&[1.0]).unwrap(),
            Arc::new(jump),
            vec![1.0],
        )
        .unwrap();
        let opts = QuantizeOptions { max_depth: 20, ..QuantizeOptions::default() };
        assert!(matches!(quantize_with(&frame, 0.1, opts), Err(Error::VariationUnboundedOnCell { .. })));
        let opts = QuantizeOptions { max_depth: 60, max_cells: 16 };
        assert!(matches!(quantize_with(&frame, 0.1, opts), Err(Error::RefinementBudgetExceeded { .. })));
    }

    #[test]
    fn guarantee_holds_on_sampled_weights() {
        for (gen, eps) in [
            (Arc::new(MovingAverage { d: 16 }) as Arc<dyn Generator>, 0.05),
            (Arc::new(Fourier { d: 3 }) as Arc<dyn Generator>, 0.1),
        ] {
            let frame = GenFrame::unit(gen).unwrap();
            let (pc, cert) = quantize(&frame, eps).unwrap();
            assert!(cert.integrated_bound <= eps);
            let mut rng = fixtures::rng(3);
            for _ in 0..10 {
                let tau = fixtures::random_steps(&mut rng, 1.0, 8);
                let exact = frame.weighted_operator(&tau).unwrap();
                let approx = pc.weighted_frame_operator(&tau).unwrap();
                let err = exact.sub(&approx).unwrap().operator_norm();
                assert!(err <= eps, "{err}");
            }
            let exact = frame.weighted_operator(&WeightFn::Linear { length: 1.0 }).unwrap();
            let approx = pc.weighted_frame_operator(&WeightFn::Linear { length: 1.0 }).unwrap();
            assert!(exact.sub(&approx).unwrap().operator_norm() <= eps);
        }
    }
}
