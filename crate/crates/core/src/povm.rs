//! Positive operator-valued measures `Φ(E) = ∫_E T_t dμ` from PSD densities.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures;
use crate::frame::{weighted_gram, PCFrame, WeightFn};
use crate::generator::{estimate_variation, Generator};
use crate::measure_space::{merge_intervals, CellId, Interval, IntervalLayout, MeasureSpace};
use crate::operator::HermitianOp;
use crate::quantize::{self, LayerCount, Piece, QuantizeCertificate, QuantizeOptions};
use crate::select::{split_layout, SelectionReport};
use crate::selection::Selection;
use crate::util::gauss_legendre;

/// Relative slack on the PSD check.
pub const PSD_TOLERANCE: f64 = 1e-10;
const QUADRATURE_POINTS: usize = 8;

/// `t ↦ T_t`, PSD for every `t`.
pub trait DensityGenerator: Send + Sync {
    fn dimension(&self) -> usize;
    fn eval(&self, t: f64) -> HermitianOp;

    /// Upper bound on `sup ‖T_s − T_t‖` over `s, t ∈ [a, b)`.
    fn variation(&self, a: f64, b: f64) -> f64 {
        estimate_variation(|t| self.eval(t), a, b)
    }

    /// Points in `(a, b)` where `T` may jump.
    fn breakpoints(&self, _a: f64, _b: f64) -> Vec<f64> {
        Vec::new()
    }

    /// Longest quadrature panel.
    fn max_quadrature_step(&self) -> f64 {
        1.0 / 64.0
    }

    fn name(&self) -> String;
}

/// `T_t = diag(t, 1 − t)` on `[0, 1]`.
#[derive(Clone, Copy, Debug, Default)]
pub struct DiagLinear;

impl DensityGenerator for DiagLinear {
    fn dimension(&self) -> usize {
        2
    }

    fn eval(&self, t: f64) -> HermitianOp {
        HermitianOp::from_diagonal(&[t, 1.0 - t])
    }

    fn variation(&self, a: f64, b: f64) -> f64 {
        (b - a).abs()
    }

    fn max_quadrature_step(&self) -> f64 {
        1.0
    }

    fn name(&self) -> String {
        "diag-linear".into()
    }
}

/// `T_t = φ_t φ_t*` for a vector generator.
#[derive(Clone)]
pub struct RankOne(pub Arc<dyn Generator>);

impl DensityGenerator for RankOne {
    fn dimension(&self) -> usize {
        self.0.dimension()
    }

    fn eval(&self, t: f64) -> HermitianOp {
        rank_one(&self.0.as_ref().eval(t).0)
    }

    /// `‖φφ* − ψψ*‖ ≤ (‖φ‖ + ‖ψ‖)‖φ − ψ‖`.
    fn variation(&self, a: f64, b: f64) -> f64 {
        let g = self.0.as_ref();
        let v = g.variation(a, b);
        let n = g.eval(0.5 * (a + b)).norm();
        v * (2.0 * n + v)
    }

    fn breakpoints(&self, a: f64, b: f64) -> Vec<f64> {
        self.0.breakpoints(a, b)
    }

    fn max_quadrature_step(&self) -> f64 {
        self.0.max_quadrature_step().unwrap_or(1.0 / 64.0)
    }

    fn name(&self) -> String {
        format!("rank-one({})", self.0.name())
    }
}

fn rank_one(v: &[crate::Complex64]) -> HermitianOp {
    let d = v.len();
    let re = nalgebra::DMatrix::from_row_slice(1, d, &v.iter().map(|z| z.re).collect::<Vec<_>>());
    let im = v.iter().any(|z| z.im != 0.0).then(|| {
        nalgebra::DMatrix::from_row_slice(1, d, &v.iter().map(|z| z.im).collect::<Vec<_>>())
    });
    weighted_gram(&re, im.as_ref(), &[1.0])
}

/// Compact operator-valued Bessel family, piecewise constant on cells or
/// backed by a generator.
#[derive(Clone)]
pub struct OperatorDensity {
    space: MeasureSpace,
    layout: IntervalLayout,
    values: Vec<HermitianOp>,
    generator: Option<Arc<dyn DensityGenerator>>,
}

impl std::fmt::Debug for OperatorDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorDensity")
            .field("cells", &self.space.len())
            .field("dimension", &self.dim())
            .field("generator", &self.generator.as_ref().map(|g| g.name()))
            .finish()
    }
}

fn check_psd(id: &CellId, op: &HermitianOp) -> Result<()> {
    let (lo, hi) = op.extreme_eigenvalues();
    let scale = lo.abs().max(hi.abs());
    if lo < -PSD_TOLERANCE * scale {
        return Err(Error::NotPositiveSemidefinite { id: id.clone(), min_eigenvalue: lo });
    }
    Ok(())
}

impl OperatorDensity {
    /// One PSD value per cell, in cell order.
    pub fn new(space: MeasureSpace, values: Vec<HermitianOp>) -> Result<Self> {
        if values.len() != space.len() {
            return Err(Error::LengthMismatch { what: "cells and density values", left: space.len(), right: values.len() });
        }
        let d = values.first().map_or(0, HermitianOp::dim);
        for (c, v) in space.cells().iter().zip(&values) {
            if v.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: v.dim() });
            }
            if v.re().iter().chain(v.im().into_iter().flatten()).any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteEntry);
            }
            check_psd(&c.id, v)?;
        }
        let layout = space.canonicalize_to_interval();
        Ok(OperatorDensity { space, layout, values, generator: None })
    }

    pub fn from_map(space: MeasureSpace, mut values: HashMap<CellId, HermitianOp>) -> Result<Self> {
        let ordered = space
            .cells()
            .iter()
            .map(|c| values.remove(&c.id).ok_or_else(|| Error::UnknownCell(c.id.clone())))
            .collect::<Result<Vec<_>>>()?;
        if let Some(id) = values.into_keys().next() {
            return Err(Error::UnknownCell(id));
        }
        Self::new(space, ordered)
    }

    /// Generator-backed density over the interval layout of `space`. Cell
    /// values hold the midpoint samples.
    pub fn with_generator(space: MeasureSpace, generator: Arc<dyn DensityGenerator>) -> Result<Self> {
        let layout = space.canonicalize_to_interval();
        let values: Vec<HermitianOp> = layout.entries().iter().map(|e| generator.eval(e.interval().midpoint())).collect();
        let mut density = Self::new(space, values)?;
        density.generator = Some(generator);
        Ok(density)
    }

    /// `T_t` on `[0, 1)`.
    pub fn unit(generator: Arc<dyn DensityGenerator>) -> Result<Self> {
        Self::with_generator(MeasureSpace::uniform(1, 1.0)?, generator)
    }

    /// `T_n = ψ_n ψ_n*`.
    pub fn rank_one(frame: &PCFrame) -> Self {
        let values = frame.vectors().iter().map(|v| rank_one(&v.0)).collect();
        OperatorDensity { space: frame.space().clone(), layout: frame.space().canonicalize_to_interval(), values, generator: None }
    }

    pub fn space(&self) -> &MeasureSpace {
        &self.space
    }

    pub fn layout(&self) -> &IntervalLayout {
        &self.layout
    }

    pub fn values(&self) -> &[HermitianOp] {
        &self.values
    }

    pub fn generator(&self) -> Option<&Arc<dyn DensityGenerator>> {
        self.generator.as_ref()
    }

    pub fn dim(&self) -> usize {
        match &self.generator {
            Some(g) => g.dimension(),
            None => self.values.first().map_or(0, HermitianOp::dim),
        }
    }

    pub fn domain(&self) -> Vec<Interval> {
        merge_intervals(self.layout.entries().iter().map(|e| e.interval()).collect())
    }

    /// `Σ_n w_n T_n`.
    fn cell_sum(&self, weights: &[f64]) -> Result<HermitianOp> {
        let mut acc = HermitianOp::zeros(self.dim());
        for (w, t) in weights.iter().zip(&self.values) {
            if *w != 0.0 {
                acc = acc.add_scaled(*w, t)?;
            }
        }
        Ok(acc)
    }

    /// `∫_{∪ intervals} τ(t) T_t dt` by Gauss–Legendre panels.
    fn integrate(&self, generator: &dyn DensityGenerator, intervals: &[Interval], tau: Option<&WeightFn>) -> Result<HermitianOp> {
        let (nodes, weights) = gauss_legendre(QUADRATURE_POINTS);
        let step = generator.max_quadrature_step();
        let mut acc = HermitianOp::zeros(generator.dimension());
        for iv in intervals {
            if iv.length() <= 0.0 {
                continue;
            }
            let mut cuts = vec![iv.start];
            cuts.extend(generator.breakpoints(iv.start, iv.end));
            if let Some(t) = tau {
                cuts.extend(t.breakpoints(iv.start, iv.end, Some(&self.layout)));
            }
            cuts.push(iv.end);
            cuts.sort_by(f64::total_cmp);
            cuts.dedup();
            for w in cuts.windows(2) {
                let (a, b) = (w[0], w[1]);
                let panels = ((b - a) / step).ceil().max(1.0) as usize;
                let h = (b - a) / panels as f64;
                for p in 0..panels {
                    let lo = a + h * p as f64;
                    for (x, wt) in nodes.iter().zip(&weights) {
                        let t = lo + 0.5 * h * (x + 1.0);
                        let tau_t = match tau {
                            Some(f) => f.value_at(t, Some(&self.layout))?,
                            None => 1.0,
                        };
                        if tau_t != 0.0 {
                            acc = acc.add_scaled(0.5 * h * wt * tau_t, &generator.eval(t))?;
                        }
                    }
                }
            }
        }
        Ok(acc)
    }

    /// `‖Φ(X)‖`.
    pub fn bessel_bound(&self) -> Result<f64> {
        Ok(povm_evaluate(self, &Selection::full(&self.space))?.operator_norm())
    }

    /// JSON `{dimension, cells: [{id, measure, matrix}]}` of the cell values.
    pub fn to_json(&self) -> serde_json::Value {
        let cells: Vec<serde_json::Value> = self
            .space
            .cells()
            .iter()
            .zip(&self.values)
            .map(|(c, v)| serde_json::json!({"id": c.id, "measure": c.measure, "matrix": v.to_json()}))
            .collect();
        serde_json::json!({"dimension": self.dim(), "cells": cells})
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        #[derive(Deserialize)]
        struct Wire {
            dimension: usize,
            cells: Vec<WireCell>,
        }
        #[derive(Deserialize)]
        struct WireCell {
            id: CellId,
            measure: f64,
            #[serde(default = "yes")]
            splittable: bool,
            matrix: serde_json::Value,
        }
        fn yes() -> bool {
            true
        }
        let wire: Wire = serde_json::from_value(value.clone())?;
        let mut cells = Vec::with_capacity(wire.cells.len());
        let mut values = Vec::with_capacity(wire.cells.len());
        for c in wire.cells {
            let op = HermitianOp::from_json(&c.matrix)?;
            if op.dim() != wire.dimension {
                return Err(Error::DimensionMismatch { expected: wire.dimension, found: op.dim() });
            }
            values.push(op);
            cells.push(crate::measure_space::Cell { id: c.id, measure: c.measure, splittable: c.splittable });
        }
        Self::new(MeasureSpace::new(cells)?, values)
    }
}

/// `Φ(E) = ∫_E T_t dμ`.
pub fn povm_evaluate(density: &OperatorDensity, selection: &Selection) -> Result<HermitianOp> {
    match &density.generator {
        None => density.cell_sum(&selection.kept_per_cell(&density.space)?),
        Some(g) => {
            let intervals = merge_intervals(selection.prefix_intervals(&density.space)?);
            density.integrate(g.as_ref(), &intervals, None)
        }
    }
}

/// `Φ(E)` for a selection on a refinement of the density's space.
fn evaluate_on(density: &OperatorDensity, space: &MeasureSpace, selection: &Selection) -> Result<HermitianOp> {
    match &density.generator {
        Some(g) => {
            let intervals = merge_intervals(selection.prefix_intervals(space)?);
            density.integrate(g.as_ref(), &intervals, None)
        }
        None if space == &density.space => povm_evaluate(density, selection),
        None => {
            let mut weights = vec![0.0; density.space.len()];
            for (c, k) in space.cells().iter().zip(selection.kept_per_cell(space)?) {
                let pos = crate::selection::resolve(&density.space, &c.id)?;
                weights[pos] += k;
            }
            density.cell_sum(&weights)
        }
    }
}

/// `S_{τT} = ∫ τ(t) T_t dμ`.
pub fn weighted_density_operator(density: &OperatorDensity, tau: &WeightFn) -> Result<HermitianOp> {
    match &density.generator {
        None => {
            let values = tau.cell_values(&density.space)?;
            let w: Vec<f64> = density.space.cells().iter().zip(values).map(|(c, t)| t * c.measure).collect();
            density.cell_sum(&w)
        }
        Some(g) => density.integrate(g.as_ref(), &density.domain(), Some(tau)),
    }
}

/// Countably-valued density `R` with `‖S_{τT} − S_{τR}‖ ≤ ε` for every `τ`:
/// unit-measure pieces `P_m` are refined until `sup ‖T_t − T_mid‖ ≤ ε/2^m`.
pub fn density_quantize(density: &OperatorDensity, eps: f64) -> Result<(OperatorDensity, QuantizeCertificate)> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::EpsilonNonpositive(eps));
    }
    density.space.require_non_atomic()?;
    let Some(generator) = density.generator.clone() else {
        let certificate = QuantizeCertificate {
            requested_eps: eps,
            internal_eps: eps,
            cell_count: density.space.len(),
            pieces: 0,
            max_depth: 0,
            layers: vec![LayerCount { layer: 0, cells: density.space.len(), measure: density.space.total_measure() }],
            deviations: vec![0.0; density.space.len()],
            max_deviation: 0.0,
            integrated_bound: 0.0,
        };
        return Ok((density.clone(), certificate));
    };
    let pieces: Vec<Piece> = density
        .layout
        .entries()
        .iter()
        .map(|e| Piece { id: e.id.clone(), interval: e.interval(), measure: e.measure })
        .collect();
    let pieces = quantize::unit_pieces(pieces);
    let piece_count = pieces.last().map_or(0, |(_, m)| *m as usize);
    let cells = quantize::refine_layered(
        pieces,
        |t| generator.eval(t).operator_norm(),
        |a, b| generator.variation(a, b),
        |_, _, m| (eps / 2f64.powi(m as i32), 0),
        QuantizeOptions::default(),
    )?;
    let bound = crate::util::compensated_sum(cells.iter().map(|c| c.measure * c.deviation));
    if bound > eps {
        return Err(Error::GuaranteeViolated { what: "density quantization bound".into(), value: bound, bound: eps });
    }
    let space = MeasureSpace::new(cells.iter().map(|c| crate::measure_space::Cell::new(c.id.clone(), c.measure)).collect())?;
    let values = cells.iter().map(|c| generator.eval(c.interval.midpoint())).collect();
    let quantized = OperatorDensity::new(space, values)?;
    let deviations: Vec<f64> = cells.iter().map(|c| c.deviation).collect();
    let certificate = QuantizeCertificate {
        requested_eps: eps,
        internal_eps: eps,
        cell_count: cells.len(),
        pieces: piece_count,
        max_depth: cells.iter().map(|c| c.depth).max().unwrap_or(0),
        layers: vec![LayerCount { layer: 0, cells: cells.len(), measure: quantized.space.total_measure() }],
        max_deviation: deviations.iter().copied().fold(0.0, f64::max),
        deviations,
        integrated_bound: bound,
    };
    Ok((quantized, certificate))
}

/// Recomputes `‖Φ(E) − target‖` and `μ(E)` from a selection.
pub fn povm_recheck(
    density: &OperatorDensity,
    space: &MeasureSpace,
    selection: &Selection,
    target: &HermitianOp,
) -> Result<crate::select::Recheck> {
    let phi = evaluate_on(density, space, selection)?;
    Ok(crate::select::Recheck {
        error: phi.sub(target)?.operator_norm(),
        measure: crate::util::compensated_sum(selection.kept_per_cell(space)?),
    })
}

/// A set `E` with `Φ(E)` close to `S_{τT}`: exact for piecewise-constant
/// densities, within `2ε` for generator densities.
pub fn povm_select(density: &OperatorDensity, tau: &WeightFn, eps: f64) -> Result<SelectionReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::EpsilonNonpositive(eps));
    }
    density.space.require_non_atomic()?;
    let target = weighted_density_operator(density, tau)?;
    let (space, selection, quantization) = match &density.generator {
        None => {
            let values = tau.cell_values(&density.space)?;
            let kept: Vec<f64> = density.space.cells().iter().zip(values).map(|(c, t)| t * c.measure).collect();
            (density.space.clone(), Selection::from_kept(&density.space, &kept)?, None)
        }
        Some(_) => {
            let (q, certificate) = density_quantize(density, eps)?;
            let mut intervals = Vec::with_capacity(q.layout.len());
            for e in q.layout.entries() {
                let t = tau.cell_mean(&e.id, e.interval())?;
                if t > 0.0 {
                    let end = if t >= 1.0 { e.end } else { (e.start + t * e.measure).min(e.end) };
                    intervals.push(Interval::new(e.start, end));
                }
            }
            let (space, selection) = split_layout(&density.layout, &intervals)?;
            (space, selection, Some(certificate))
        }
    };
    let check = povm_recheck(density, &space, &selection, &target)?;
    let intervals = merge_intervals(selection.prefix_intervals(&space)?);
    let bound = if density.generator.is_some() { 2.0 * eps } else { 1e-10 * (1.0 + target.operator_norm()) };
    if !(check.error <= bound) {
        return Err(Error::GuaranteeViolated { what: "povm_select error".into(), value: check.error, bound });
    }
    Ok(SelectionReport {
        selection,
        space,
        achieved_error: check.error,
        target,
        measure: check.measure,
        budget: None,
        intervals,
        nodes: Vec::new(),
        quantization,
    })
}

/// `r_n(t) = sgn sin(2^{n+1} π t)` averaged over cell `j` of `2^level` uniform cells.
pub fn rademacher_cell_average(n: u32, level: u32, j: usize) -> f64 {
    if n + 1 <= level {
        if (j >> (level - n - 1)) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    } else {
        0.0
    }
}

/// `∫_0^x r_n(t) dt`, a triangle wave of period `2^{−n}`.
pub fn rademacher_antiderivative(n: u32, x: f64) -> f64 {
    let p = 0.5f64.powi(n as i32);
    let u = x.rem_euclid(p);
    if u <= 0.5 * p {
        u
    } else {
        p - u
    }
}

fn check_resolution(d: usize, resolution: usize) -> Result<u32> {
    if resolution == 0 || !resolution.is_power_of_two() {
        return Err(Error::ResolutionNotPowerOfTwo(resolution));
    }
    if resolution < 2 * d {
        return Err(Error::DimensionTooLargeForResolution { d, resolution });
    }
    Ok(resolution.trailing_zeros())
}

/// Cell averages of `T_t = diag(r_n(t) + 1)_{n=1..d}` on `resolution` uniform
/// cells of `[0, 1)`. Exact for every dyadic-cell union.
pub fn rademacher_density(d: usize, resolution: usize) -> Result<OperatorDensity> {
    let level = check_resolution(d, resolution)?;
    let space = MeasureSpace::uniform(resolution, 1.0)?;
    let values = (0..resolution)
        .map(|j| {
            let diag: Vec<f64> = (1..=d as u32).map(|n| rademacher_cell_average(n, level, j) + 1.0).collect();
            HermitianOp::from_diagonal(&diag)
        })
        .collect();
    OperatorDensity::new(space, values)
}

/// `diag(⟨r_n, χ_E⟩ + λ(E))` for a union of intervals.
pub fn rademacher_formula(d: usize, intervals: &[Interval]) -> HermitianOp {
    let lambda: f64 = intervals.iter().map(Interval::length).sum();
    let diag: Vec<f64> = (1..=d as u32)
        .map(|n| {
            let inner: f64 = intervals
                .iter()
                .map(|iv| rademacher_antiderivative(n, iv.end) - rademacher_antiderivative(n, iv.start))
                .sum();
            inner + lambda
        })
        .collect();
    HermitianOp::from_diagonal(&diag)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeRow {
    pub set: String,
    pub measure: f64,
    /// `‖Φ(E) − ½Φ(X)‖`.
    pub error: f64,
    /// `‖Φ(E) − diag(⟨r_n, χ_E⟩ + λ(E))‖`.
    pub formula_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub d: usize,
    pub resolution: usize,
    /// `‖Φ(X) − I‖`.
    pub full_identity_deviation: f64,
    pub rows: Vec<ProbeRow>,
    pub best_set: String,
    pub best_error: f64,
    pub max_formula_deviation: f64,
}

/// Evaluates `Φ` on a fixed family of dyadic-cell unions plus `search_budget`
/// seeded random unions and reports the distance to `½Φ(X)` for each.
pub fn rademacher_probe(d: usize, resolution: usize, search_budget: usize, seed: u64) -> Result<ProbeReport> {
    let level = check_resolution(d, resolution)?;
    let density = rademacher_density(d, resolution)?;
    let full = povm_evaluate(&density, &Selection::full(&density.space))?;
    let half = full.scale(0.5);
    let cell = 1.0 / resolution as f64;
    let interval_of = |j: usize| Interval::new(j as f64 * cell, (j + 1) as f64 * cell);

    let mut sets: Vec<(String, Vec<usize>)> = vec![
        ("full".into(), (0..resolution).collect()),
        ("empty".into(), Vec::new()),
        ("[0,1/2)".into(), (0..resolution / 2).collect()),
        ("[1/2,1)".into(), (resolution / 2..resolution).collect()),
    ];
    for k in 1..=(d as u32).min(level - 1) {
        let cells = (0..resolution).filter(|&j| rademacher_cell_average(k, level, j) > 0.0).collect();
        sets.push((format!("r_{k}>0"), cells));
    }
    let mut rng = fixtures::rng(seed);
    for i in 0..search_budget {
        let blocks_level = rng.random_range(1..=level);
        let blocks = 1usize << blocks_level;
        let width = resolution / blocks;
        let cells = (0..blocks)
            .filter(|_| rng.random_bool(0.5))
            .flat_map(|b| b * width..(b + 1) * width)
            .collect();
        sets.push((format!("random#{i}"), cells));
    }

    let mut rows = Vec::with_capacity(sets.len());
    for (name, cells) in sets {
        let selection = Selection::cells(&density.space, &cells);
        let phi = povm_evaluate(&density, &selection)?;
        let intervals = merge_intervals(cells.iter().map(|&j| interval_of(j)).collect());
        let formula = rademacher_formula(d, &intervals);
        rows.push(ProbeRow {
            set: name,
            measure: selection.measure(),
            error: phi.sub(&half)?.operator_norm(),
            formula_deviation: phi.sub(&formula)?.operator_norm(),
        });
    }
    let best = rows
        .iter()
        .min_by(|a, b| a.error.total_cmp(&b.error))
        .expect("fixed sets present");
    Ok(ProbeReport {
        d,
        resolution,
        full_identity_deviation: full.sub(&HermitianOp::identity(d))?.operator_norm(),
        best_set: best.set.clone(),
        best_error: best.error,
        max_formula_deviation: rows.iter().map(|r| r.formula_deviation).fold(0.0, f64::max),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::select::lyapunov_select;

    fn psd_density(seed: u64, cells: usize, d: usize) -> OperatorDensity {
        let mut rng = fixtures::rng(seed);
        let space = MeasureSpace::from_measures(&(0..cells).map(|_| rng.random_range(0.1..1.0)).collect::<Vec<_>>()).unwrap();
        let values = (0..cells).map(|_| fixtures::random_psd(&mut rng, d, 2, true)).collect();
        OperatorDensity::new(space, values).unwrap()
    }

    #[test]
    fn rank_one_matches_frame_operator() {
        let f = fixtures::random_pcframe(4, 20, true, 3);
        let density = OperatorDensity::rank_one(&f);
        let sel = Selection::cells(f.space(), &[0, 3, 7, 19]);
        let a = povm_evaluate(&density, &sel).unwrap();
        let b = f.frame_operator(&sel).unwrap();
        assert!(a.sub(&b).unwrap().operator_norm() <= 1e-12);
        let tau = fixtures::random_cell_weight(&mut fixtures::rng(1), f.space());
        let r = povm_select(&density, &tau, 0.01).unwrap();
        let l = lyapunov_select(&f, &tau, 0.01).unwrap();
        assert_eq!(r.selection, l.selection);
        assert!(r.target.sub(&l.target).unwrap().operator_norm() <= 1e-12);
    }

    #[test]
    fn empty_selection_is_zero() {
        let density = psd_density(1, 5, 3);
        assert!(povm_evaluate(&density, &Selection::empty()).unwrap().is_zero());
    }

    #[test]
    fn rejects_indefinite_values() {
        let space = MeasureSpace::uniform(1, 1.0).unwrap();
        let bad = HermitianOp::from_diagonal(&[1.0, -0.1]);
        assert!(matches!(OperatorDensity::new(space, vec![bad]), Err(Error::NotPositiveSemidefinite { .. })));
    }

    #[test]
    fn indicator_weight_matches_evaluation() {
        let density = psd_density(2, 12, 3);
        let cells = [1usize, 4, 5, 9];
        let sel = Selection::cells(density.space(), &cells);
        let mut values = vec![0.0; 12];
        for &c in &cells {
            values[c] = 1.0;
        }
        let tau = WeightFn::from_cell_values(density.space(), &values).unwrap();
        let a = weighted_density_operator(&density, &tau).unwrap();
        let b = povm_evaluate(&density, &sel).unwrap();
        assert!(a.sub(&b).unwrap().operator_norm() <= 1e-14);
    }

    #[test]
    fn additivity_and_monotonicity() {
        let density = psd_density(3, 10, 4);
        let a = Selection::cells(density.space(), &[0, 2, 4]);
        let b = Selection::cells(density.space(), &[1, 5]);
        let ab = Selection::cells(density.space(), &[0, 1, 2, 4, 5]);
        let (pa, pb, pab) = (
            povm_evaluate(&density, &a).unwrap(),
            povm_evaluate(&density, &b).unwrap(),
            povm_evaluate(&density, &ab).unwrap(),
        );
        assert!(pa.add(&pb).unwrap().sub(&pab).unwrap().operator_norm() <= 1e-12 * pab.operator_norm());
        assert!(crate::loewner_leq(&pa, &pab, 1e-12).unwrap());
    }

    #[test]
    fn diag_linear_quantization_and_selection() {
        let density = OperatorDensity::unit(Arc::new(DiagLinear)).unwrap();
        let phi = povm_evaluate(&density, &Selection::full(density.space())).unwrap();
        assert!(phi.sub(&HermitianOp::from_diagonal(&[0.5, 0.5])).unwrap().operator_norm() < 1e-15);
        let (q, cert) = density_quantize(&density, 0.05).unwrap();
        assert!(cert.integrated_bound <= 0.05);
        let mut rng = fixtures::rng(5);
        for _ in 0..10 {
            let tau = fixtures::random_steps(&mut rng, 1.0, 6);
            let exact = weighted_density_operator(&density, &tau).unwrap();
            let approx = q
                .values()
                .iter()
                .zip(q.layout().entries())
                .try_fold(HermitianOp::zeros(2), |acc, (v, e)| {
                    acc.add_scaled(tau.cell_mean(&e.id, e.interval()).unwrap() * e.measure, v)
                })
                .unwrap();
            assert!(exact.sub(&approx).unwrap().operator_norm() <= 0.05);
        }
        let r = povm_select(&density, &WeightFn::constant(0.5).unwrap(), 0.01).unwrap();
        assert!(r.achieved_error <= 0.02);
        let c = povm_recheck(&density, &r.space, &r.selection, &r.target).unwrap();
        assert!((c.error - r.achieved_error).abs() < 1e-12);
    }

    #[test]
    fn piecewise_constant_density_is_unchanged_by_quantization() {
        let density = psd_density(4, 6, 2);
        let (q, cert) = density_quantize(&density, 0.1).unwrap();
        assert_eq!(q.values(), density.values());
        assert_eq!(cert.max_deviation, 0.0);
    }

    #[test]
    fn rademacher_cells() {
        assert_eq!(rademacher_cell_average(1, 3, 0), 1.0);
        assert_eq!(rademacher_cell_average(1, 3, 2), -1.0);
        assert_eq!(rademacher_cell_average(3, 3, 0), 0.0);
        assert!(matches!(rademacher_density(4, 12), Err(Error::ResolutionNotPowerOfTwo(12))));
        assert!(matches!(rademacher_density(16, 16), Err(Error::DimensionTooLargeForResolution { .. })));
    }

    #[test]
    fn rademacher_probe_consistency() {
        let p = rademacher_probe(16, 1024, 8, 0).unwrap();
        assert!(p.full_identity_deviation <= 1e-12);
        assert!(p.max_formula_deviation <= 1e-12);
        let row = |name: &str| p.rows.iter().find(|r| r.set == name).unwrap().clone();
        assert!((row("full").error - 0.5).abs() < 1e-12);
        assert!((row("empty").error - 0.5).abs() < 1e-12);
        assert!(row("[0,1/2)").error < 1e-12);
    }

    #[test]
    fn density_json_round_trip() {
        let density = psd_density(6, 3, 2);
        let back = OperatorDensity::from_json(&density.to_json()).unwrap();
        assert_eq!(back.values(), density.values());
        assert_eq!(back.space(), density.space());
    }
}
