//! Set selection: sets `E` with `S_{φ,E}` close to a weighted frame operator.

pub mod discrete;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{PCFrame, WeightFn};
use crate::generator::GenFrame;
use crate::measure_space::{merge_intervals, Cell, CellId, Interval, IntervalLayout, MeasureSpace};
use crate::operator::HermitianOp;
use crate::quantize::{self, Piece, QuantizeCertificate, QuantizeOptions};
use crate::selection::Selection;
use crate::util::compensated_sum;

/// Slack on measure budgets that accounts for summation rounding.
pub const MEASURE_SLACK: f64 = 1e-12;
/// Deepest binary expansion used by [`dyadic_bisect`].
pub const MAX_EXPANSION_DEPTH: u32 = 60;

/// Either kind of frame accepted by the selection routines.
#[derive(Clone, Copy, Debug)]
pub enum FrameRef<'a> {
    Pc(&'a PCFrame),
    Gen(&'a GenFrame),
}

impl<'a> From<&'a PCFrame> for FrameRef<'a> {
    fn from(f: &'a PCFrame) -> Self {
        FrameRef::Pc(f)
    }
}

impl<'a> From<&'a GenFrame> for FrameRef<'a> {
    fn from(f: &'a GenFrame) -> Self {
        FrameRef::Gen(f)
    }
}

impl FrameRef<'_> {
    pub fn space(&self) -> &MeasureSpace {
        match self {
            FrameRef::Pc(f) => f.space(),
            FrameRef::Gen(f) => f.space(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FrameRef::Pc(f) => f.dim(),
            FrameRef::Gen(f) => f.dim(),
        }
    }

    pub fn full_operator(&self) -> Result<HermitianOp> {
        match self {
            FrameRef::Pc(f) => Ok(f.full_operator()),
            FrameRef::Gen(f) => f.full_operator(),
        }
    }

    pub fn weighted_operator(&self, tau: &WeightFn) -> Result<HermitianOp> {
        match self {
            FrameRef::Pc(f) => f.weighted_frame_operator(tau),
            FrameRef::Gen(f) => f.weighted_operator(tau),
        }
    }

    /// `S_{φ,E}` for a selection expressed on `space` (the frame's own space
    /// for piecewise-constant frames, any refinement of the layout otherwise).
    pub fn selection_operator(&self, space: &MeasureSpace, selection: &Selection) -> Result<HermitianOp> {
        match self {
            FrameRef::Pc(f) => {
                if space == f.space() {
                    f.frame_operator(selection)
                } else {
                    f.pullback(space.clone())?.frame_operator(selection)
                }
            }
            FrameRef::Gen(f) => {
                let intervals = merge_intervals(selection.prefix_intervals(space)?);
                f.operator_on(&intervals, None)
            }
        }
    }
}

/// Certificate for one node `E_σ` of the bisection tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeCertificate {
    /// Binary word `σ`; empty for the root.
    pub word: String,
    pub depth: u32,
    pub measure: f64,
    /// `‖S_{E_σ} − 2^{−n} S‖`.
    pub telescoped: f64,
    /// `2^{−n} ε_tree`.
    pub telescoped_bound: f64,
    /// `‖S_{E_σ0} − ½ S_{E_σ}‖` when the node was split.
    pub split_residual: Option<f64>,
    /// `4^{−n−1} ε_tree` when the node was split.
    pub split_budget: Option<f64>,
}

impl NodeCertificate {
    /// Both inequalities hold strictly (the root's telescoped value is zero).
    pub fn holds(&self) -> bool {
        let tele = if self.depth == 0 { self.telescoped == 0.0 } else { self.telescoped < self.telescoped_bound };
        let split = match (self.split_residual, self.split_budget) {
            (Some(r), Some(b)) => r < b,
            _ => true,
        };
        tele && split
    }
}

#[derive(Clone, Debug)]
pub struct SelectionReport {
    pub selection: Selection,
    /// Space the selection refers to.
    pub space: MeasureSpace,
    /// `‖S_{φ,E} − target‖`, recomputed from `selection`.
    pub achieved_error: f64,
    pub target: HermitianOp,
    pub measure: f64,
    pub budget: Option<f64>,
    /// Canonical layout of `E` as merged `[start, end)` intervals.
    pub intervals: Vec<Interval>,
    pub nodes: Vec<NodeCertificate>,
    pub quantization: Option<QuantizeCertificate>,
}

/// Independent recomputation of a report's error and measure.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recheck {
    pub error: f64,
    pub measure: f64,
}

/// Recomputes `‖S_{φ,E} − target‖` and `μ(E)` from a selection alone.
pub fn recheck<'a>(
    frame: impl Into<FrameRef<'a>>,
    space: &MeasureSpace,
    selection: &Selection,
    target: &HermitianOp,
) -> Result<Recheck> {
    let frame = frame.into();
    let s_e = frame.selection_operator(space, selection)?;
    let kept = selection.kept_per_cell(space)?;
    Ok(Recheck { error: s_e.sub(target)?.operator_norm(), measure: compensated_sum(kept) })
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::EpsilonNonpositive(eps));
    }
    Ok(())
}

fn check_total(space: &MeasureSpace) -> Result<()> {
    if !space.total_measure().is_finite() {
        return Err(Error::InfiniteTotalMeasure(space.total_measure()));
    }
    Ok(())
}

fn guarantee(what: &str, value: f64, bound: f64) -> Result<()> {
    if !(value <= bound) {
        return Err(Error::GuaranteeViolated { what: what.into(), value, bound });
    }
    Ok(())
}

fn pc_report(
    frame: &PCFrame,
    kept: &[f64],
    target: HermitianOp,
    budget: Option<f64>,
    nodes: Vec<NodeCertificate>,
) -> Result<SelectionReport> {
    let selection = Selection::from_kept(frame.space(), kept)?;
    let s_e = frame.operator_with_weights(&selection.kept_per_cell(frame.space())?);
    let achieved_error = s_e.sub(&target)?.operator_norm();
    let intervals = merge_intervals(selection.prefix_intervals(frame.space())?);
    Ok(SelectionReport {
        measure: selection.measure(),
        selection,
        space: frame.space().clone(),
        achieved_error,
        target,
        budget,
        intervals,
        nodes,
        quantization: None,
    })
}

/// Splits the layout of `frame` at every endpoint of `intervals` and selects
/// the resulting cells lying inside them.
pub fn space_from_intervals(frame: &GenFrame, intervals: &[Interval]) -> Result<(MeasureSpace, Selection)> {
    split_layout(frame.layout(), intervals)
}

/// [`space_from_intervals`] for a bare interval layout.
pub fn split_layout(layout: &IntervalLayout, intervals: &[Interval]) -> Result<(MeasureSpace, Selection)> {
    let merged = merge_intervals(intervals.to_vec());
    let mut cuts: Vec<f64> = merged.iter().flat_map(|iv| [iv.start, iv.end]).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut cells = Vec::new();
    for e in layout.entries() {
        let lo = cuts.partition_point(|&c| c <= e.start);
        let hi = cuts.partition_point(|&c| c < e.end);
        let interior: Vec<f64> = cuts[lo..hi].iter().copied().filter(|&c| c > e.start && c < e.end).collect();
        split_cell(&mut cells, e.id.clone(), e.start, e.end, e.measure, &interior);
    }
    let space = MeasureSpace::new(cells)?;
    let layout = space.canonicalize_to_interval();
    let inside: Vec<usize> = layout
        .entries()
        .iter()
        .enumerate()
        .filter(|(_, e)| {
            let m = e.interval().midpoint();
            let k = merged.partition_point(|iv| iv.end <= m);
            merged.get(k).is_some_and(|iv| iv.contains(m))
        })
        .map(|(i, _)| i)
        .collect();
    let selection = Selection::cells(&space, &inside);
    Ok((space, selection))
}

/// Splits a cell at sorted interior `cuts`, halving the cut list at each
/// level so ids stay logarithmically deep.
fn split_cell(out: &mut Vec<Cell>, id: CellId, start: f64, end: f64, measure: f64, cuts: &[f64]) {
    if cuts.is_empty() {
        out.push(Cell::new(id, measure));
        return;
    }
    let k = cuts.len() / 2;
    let c = cuts[k];
    let left = measure * ((c - start) / (end - start));
    split_cell(out, id.child(false), start, c, left, &cuts[..k]);
    split_cell(out, id.child(true), c, end, measure - left, &cuts[k + 1..]);
}

fn gen_report(
    frame: &GenFrame,
    intervals: Vec<Interval>,
    target: HermitianOp,
    budget: Option<f64>,
    nodes: Vec<NodeCertificate>,
    quantization: Option<QuantizeCertificate>,
) -> Result<SelectionReport> {
    let (space, selection) = space_from_intervals(frame, &intervals)?;
    let check = recheck(frame, &space, &selection, &target)?;
    Ok(SelectionReport {
        measure: check.measure,
        selection,
        space,
        achieved_error: check.error,
        target,
        budget,
        intervals: merge_intervals(intervals),
        nodes,
        quantization,
    })
}

/// Keeps `τ_n·μ(X_n)` of every cell. Exact for piecewise-constant frames.
pub fn proportional_select(frame: &PCFrame, tau: &WeightFn) -> Result<SelectionReport> {
    frame.space().require_non_atomic()?;
    let values = tau.cell_values(frame.space())?;
    let kept: Vec<f64> = frame.space().cells().iter().zip(&values).map(|(c, t)| c.measure * t).collect();
    let target = frame.operator_with_weights(&kept);
    pc_report(frame, &kept, target, None, Vec::new())
}

/// A set `E` with `‖S_{φ,E} − S_{√τφ,X}‖ ≤ 2ε` (exact up to rounding for
/// piecewise-constant frames): quantize, then keep `τ`-proportional prefixes.
pub fn lyapunov_select<'a>(frame: impl Into<FrameRef<'a>>, tau: &WeightFn, eps: f64) -> Result<SelectionReport> {
    check_eps(eps)?;
    match frame.into() {
        FrameRef::Pc(f) => proportional_select(f, tau),
        FrameRef::Gen(f) => {
            f.space().require_non_atomic()?;
            let (pc, certificate) = quantize::quantize(f, eps)?;
            let layout = pc.space().canonicalize_to_interval();
            let mut intervals = Vec::with_capacity(layout.len());
            for e in layout.entries() {
                let t = tau.cell_mean(&e.id, e.interval())?;
                if t <= 0.0 {
                    continue;
                }
                let end = if t >= 1.0 { e.end } else { (e.start + t * e.measure).min(e.end) };
                intervals.push(Interval::new(e.start, end));
            }
            let target = f.weighted_operator(tau)?;
            let report = gen_report(f, intervals, target, None, Vec::new(), Some(certificate))?;
            guarantee("lyapunov_select error", report.achieved_error, 2.0 * eps)?;
            Ok(report)
        }
    }
}

/// Depth of the truncated binary expansion: `max(1, ⌈log₂(4‖S‖/ε)⌉)`.
pub fn expansion_depth(norm_s: f64, eps: f64) -> u32 {
    if norm_s <= 0.0 {
        return 1;
    }
    let n = (4.0 * norm_s / eps).log2().ceil();
    if n.is_nan() || n < 1.0 {
        1
    } else {
        (n as u32).min(MAX_EXPANSION_DEPTH)
    }
}

/// First `n` binary digits of `x ∈ (0, 1)`, terminating expansions padded with zeros.
pub fn binary_digits(x: f64, n: u32) -> Vec<bool> {
    let mut r = x;
    (0..n)
        .map(|_| {
            r *= 2.0;
            let bit = r >= 1.0;
            if bit {
                r -= 1.0;
            }
            bit
        })
        .collect()
}

/// One step of the bisection tree: a node and how to split it.
trait Bisection {
    type Node: Clone;
    fn measure(&self, node: &Self::Node) -> f64;
    fn operator(&self, node: &Self::Node) -> Result<HermitianOp>;
    /// Returns `(E_σ0, E_σ1, S_{E_σ0})` with `‖S_{E_σ0} − ½S_σ‖ < budget`.
    fn halve(&self, node: &Self::Node, s_node: &HermitianOp, budget: f64) -> Result<(Self::Node, Self::Node, HermitianOp)>;
    fn union(&self, nodes: &[Self::Node]) -> Self::Node;
}

struct BisectOutcome<N> {
    chosen: Vec<N>,
    nodes: Vec<NodeCertificate>,
    q: f64,
}

fn run_bisection<B: Bisection>(b: &B, root: B::Node, s: &HermitianOp, tau0: f64, eps: f64) -> Result<BisectOutcome<B::Node>> {
    let eps_tree = 0.75 * eps;
    let depth = expansion_depth(s.operator_norm(), eps);
    let bits = binary_digits(tau0, depth);
    let mut nodes = vec![NodeCertificate {
        word: String::new(),
        depth: 0,
        measure: b.measure(&root),
        telescoped: 0.0,
        telescoped_bound: eps_tree,
        split_residual: None,
        split_budget: None,
    }];
    let mut chosen = Vec::new();
    let mut current = root;
    let mut s_current = s.clone();
    let mut word = String::new();
    let mut q = 0.0;
    for (n, &bit) in bits.iter().enumerate() {
        let budget = 0.25f64.powi(n as i32 + 1) * eps_tree;
        let (mut c0, mut c1, mut s0) = b.halve(&current, &s_current, budget)?;
        let mut s1 = s_current.sub(&s0)?;
        if b.measure(&c0) > b.measure(&c1) {
            std::mem::swap(&mut c0, &mut c1);
            std::mem::swap(&mut s0, &mut s1);
        }
        let residual = s0.sub(&s_current.scale(0.5))?.operator_norm();
        let parent = nodes.last_mut().expect("root present");
        parent.split_residual = Some(residual);
        parent.split_budget = Some(budget);
        if !(residual < budget) {
            return Err(Error::GuaranteeViolated { what: "bisection split residual".into(), value: residual, bound: budget });
        }
        let scale = 0.5f64.powi(n as i32 + 1);
        let bound = scale * eps_tree;
        let level = s.scale(scale);
        let mut certs = Vec::with_capacity(2);
        for (digit, node, op) in [('0', &c0, &s0), ('1', &c1, &s1)] {
            let mut w = word.clone();
            w.push(digit);
            certs.push(NodeCertificate {
                word: w,
                depth: n as u32 + 1,
                measure: b.measure(node),
                telescoped: op.sub(&level)?.operator_norm(),
                telescoped_bound: bound,
                split_residual: None,
                split_budget: None,
            });
        }
        // The sibling off the path goes first so the path node stays last.
        let (off, on) = if bit { (0, 1) } else { (1, 0) };
        let on_cert = certs[on].clone();
        nodes.push(certs[off].clone());
        nodes.push(on_cert);
        if bit {
            chosen.push(c0);
            q += scale;
            current = c1;
            s_current = s1;
            word.push('1');
        } else {
            current = c0;
            s_current = s0;
            word.push('0');
        }
    }
    Ok(BisectOutcome { chosen, nodes, q })
}

struct PcBisection<'a> {
    frame: &'a PCFrame,
}

impl Bisection for PcBisection<'_> {
    type Node = Vec<f64>;

    fn measure(&self, node: &Vec<f64>) -> f64 {
        compensated_sum(node.iter().copied())
    }

    fn operator(&self, node: &Vec<f64>) -> Result<HermitianOp> {
        Ok(self.frame.operator_with_weights(node))
    }

    /// Keeps half of every cell. Halving the weights halves the Gram sum
    /// bitwise, so `S_{E_σ0} = ½S_σ` without another product.
    fn halve(&self, node: &Vec<f64>, s: &HermitianOp, _budget: f64) -> Result<(Vec<f64>, Vec<f64>, HermitianOp)> {
        let left: Vec<f64> = node.iter().map(|w| 0.5 * w).collect();
        let right: Vec<f64> = node.iter().zip(&left).map(|(w, l)| w - l).collect();
        Ok((left, right, s.scale(0.5)))
    }

    fn union(&self, nodes: &[Vec<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.frame.len()];
        for node in nodes {
            for (o, w) in out.iter_mut().zip(node) {
                *o += w;
            }
        }
        out
    }
}

/// Retries allowed when a generator's variation estimate undershoots.
const HALVING_RETRIES: usize = 6;

struct GenBisection<'a> {
    frame: &'a GenFrame,
    opts: QuantizeOptions,
}

impl Bisection for GenBisection<'_> {
    type Node = Vec<Interval>;

    fn measure(&self, node: &Vec<Interval>) -> f64 {
        compensated_sum(node.iter().map(Interval::length))
    }

    fn operator(&self, node: &Vec<Interval>) -> Result<HermitianOp> {
        self.frame.operator_on(node, None)
    }

    /// Refines `E_σ` until `1.5·Σ μ·dev·(2‖ψ‖ + dev)` is below the budget,
    /// then keeps the left half of every piece.
    fn halve(&self, node: &Vec<Interval>, s: &HermitianOp, budget: f64) -> Result<(Vec<Interval>, Vec<Interval>, HermitianOp)> {
        let generator = self.frame.generator();
        let mut target = budget;
        let mut last = f64::INFINITY;
        for _ in 0..HALVING_RETRIES {
            let pieces: Vec<Piece> = node
                .iter()
                .enumerate()
                .map(|(i, iv)| Piece { id: CellId::indexed(i), interval: *iv, measure: iv.length() })
                .collect();
            let cells = quantize::refine_integrated(
                pieces,
                |t| generator.eval(t).norm(),
                |a, b| generator.variation(a, b),
                target,
                1.5,
                self.opts,
            )?;
            let mut left = Vec::with_capacity(cells.len());
            let mut right = Vec::with_capacity(cells.len());
            for c in &cells {
                let (l, r) = c.interval.split_at_fraction(0.5);
                left.push(l);
                right.push(r);
            }
            let s_left = self.operator(&left)?;
            last = s_left.sub(&s.scale(0.5))?.operator_norm();
            if last < budget {
                return Ok((left, right, s_left));
            }
            target *= 0.25;
        }
        Err(Error::GuaranteeViolated { what: "bisection split residual".into(), value: last, bound: budget })
    }

    fn union(&self, nodes: &[Vec<Interval>]) -> Vec<Interval> {
        merge_intervals(nodes.iter().flatten().copied().collect())
    }
}

fn check_tau0(tau0: f64) -> Result<()> {
    if !(tau0 > 0.0 && tau0 < 1.0) {
        return Err(Error::TauOutOfOpenInterval(tau0));
    }
    Ok(())
}

/// A set `E` with `‖S_{φ,E} − τ₀S‖ ≤ ε` and `μ(E) ≤ τ₀μ(X)`, built from a
/// bisection tree and the binary expansion of `τ₀`.
pub fn dyadic_bisect<'a>(frame: impl Into<FrameRef<'a>>, tau0: f64, eps: f64) -> Result<SelectionReport> {
    check_tau0(tau0)?;
    check_eps(eps)?;
    let frame = frame.into();
    frame.space().require_non_atomic()?;
    check_total(frame.space())?;
    let report = match frame {
        FrameRef::Pc(f) => {
            let b = PcBisection { frame: f };
            let s = f.full_operator();
            let out = run_bisection(&b, f.space().measures(), &s, tau0, eps)?;
            let kept = b.union(&out.chosen);
            debug_assert!(out.q <= tau0);
            pc_report(f, &kept, s.scale(tau0), Some(tau0 * f.space().total_measure()), out.nodes)?
        }
        FrameRef::Gen(f) => {
            let root = f.domain();
            let b = GenBisection { frame: f, opts: QuantizeOptions::default() };
            let s = b.operator(&root)?;
            let out = run_bisection(&b, root, &s, tau0, eps)?;
            let intervals = b.union(&out.chosen);
            gen_report(f, intervals, s.scale(tau0), Some(tau0 * f.space().total_measure()), out.nodes, None)?
        }
    };
    guarantee("dyadic_bisect error", report.achieved_error, eps)?;
    guarantee("dyadic_bisect measure", report.measure, report.budget.unwrap_or(f64::INFINITY) + MEASURE_SLACK)?;
    Ok(report)
}

/// Dyadic bisection of a sub-frame given by a set of intervals (generator
/// frames) or cells (piecewise-constant frames). Returns the chosen part.
fn bisect_level_pc(frame: &PCFrame, positions: &[usize], tau0: f64, eps: f64) -> Result<(Vec<f64>, Vec<NodeCertificate>)> {
    let sub = frame.restrict(positions)?;
    let b = PcBisection { frame: &sub };
    let s = sub.full_operator();
    let out = run_bisection(&b, sub.space().measures(), &s, tau0, eps)?;
    Ok((b.union(&out.chosen), out.nodes))
}

fn bisect_level_gen(frame: &GenFrame, root: Vec<Interval>, tau0: f64, eps: f64) -> Result<(Vec<Interval>, Vec<NodeCertificate>)> {
    let b = GenBisection { frame, opts: QuantizeOptions::default() };
    let s = b.operator(&root)?;
    let out = run_bisection(&b, root, &s, tau0, eps)?;
    Ok((b.union(&out.chosen), out.nodes))
}

/// Level sets `(value, cell positions)` of a per-cell weight, by increasing value.
fn cell_levels(values: &[f64]) -> Vec<(f64, Vec<usize>)> {
    let mut distinct: Vec<f64> = values.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    distinct
        .into_iter()
        .map(|v| (v, values.iter().enumerate().filter(|(_, &x)| x == v).map(|(i, _)| i).collect()))
        .collect()
}

/// Level sets of a weight on a generator frame, as interval unions. `Linear`
/// weights are rounded down to multiples of `1/k`. Also returns the rounding
/// error bound `‖S_{√τφ} − S_{√τ'φ}‖ ≤ ‖S‖/k` (zero when no rounding happens).
fn interval_levels(frame: &GenFrame, tau: &WeightFn, norm_s: f64, eps: f64) -> Result<(Vec<(f64, Vec<Interval>)>, f64)> {
    let domain = frame.domain();
    let total = frame.layout().total();
    let clip = |iv: Interval| -> Vec<Interval> {
        domain
            .iter()
            .filter_map(|d| {
                let s = iv.start.max(d.start);
                let e = iv.end.min(d.end);
                (e > s).then(|| Interval::new(s, e))
            })
            .collect()
    };
    let mut groups: Vec<(f64, Vec<Interval>)> = Vec::new();
    let add = |value: f64, iv: Interval, groups: &mut Vec<(f64, Vec<Interval>)>| {
        match groups.iter_mut().find(|(v, _)| *v == value) {
            Some((_, ivs)) => ivs.push(iv),
            None => groups.push((value, vec![iv])),
        }
    };
    let mut rounding = 0.0;
    match tau {
        WeightFn::Constant(c) => {
            for iv in &domain {
                add(*c, *iv, &mut groups);
            }
        }
        WeightFn::PerCell(_) => {
            for e in frame.layout().entries() {
                add(tau.cell_mean(&e.id, e.interval())?, e.interval(), &mut groups);
            }
        }
        WeightFn::Steps { breaks, values } => {
            let mut edges = vec![f64::NEG_INFINITY];
            edges.extend(breaks.iter().copied());
            edges.push(f64::INFINITY);
            for (k, v) in values.iter().enumerate() {
                let iv = Interval::new(edges[k].max(0.0), edges[k + 1].min(total));
                if iv.end > iv.start {
                    for piece in clip(iv) {
                        add(*v, piece, &mut groups);
                    }
                }
            }
        }
        WeightFn::Linear { length } => {
            let k = ((2.0 * norm_s / eps).ceil() as usize).max(1);
            rounding = if norm_s > 0.0 { norm_s / k as f64 } else { 0.0 };
            for j in 0..k {
                let iv = Interval::new(length * j as f64 / k as f64, length * (j + 1) as f64 / k as f64);
                for piece in clip(iv) {
                    add(j as f64 / k as f64, piece, &mut groups);
                }
            }
            let tail = Interval::new(*length, total);
            if tail.end > tail.start {
                for piece in clip(tail) {
                    add(1.0, piece, &mut groups);
                }
            }
        }
        WeightFn::Point(_) => {
            return Err(Error::UnsupportedWeight(
                "budget selection on generator frames needs a step, per-cell or linear weight".into(),
            ))
        }
    }
    for (_, ivs) in &mut groups {
        *ivs = merge_intervals(std::mem::take(ivs));
    }
    groups.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok((groups, rounding))
}

/// A set `E` with `‖S_{φ,E} − S_{√τφ,X}‖ ≤ ε` and `μ(E) ≤ ∫τ dμ`: dyadic
/// bisection on every level set of `τ` with tolerance `ε/n`.
pub fn budget_select<'a>(frame: impl Into<FrameRef<'a>>, tau: &WeightFn, eps: f64) -> Result<SelectionReport> {
    check_eps(eps)?;
    let frame = frame.into();
    check_total(frame.space())?;
    frame.space().require_non_atomic()?;
    let report = match frame {
        FrameRef::Pc(f) => {
            let values = tau.cell_values(f.space())?;
            let levels = cell_levels(&values);
            let per_level = eps / levels.len().max(1) as f64;
            let mut kept = vec![0.0; f.len()];
            let mut nodes = Vec::new();
            for (value, positions) in &levels {
                if *value <= 0.0 {
                    continue;
                }
                if *value >= 1.0 {
                    for &i in positions {
                        kept[i] = f.space().cells()[i].measure;
                    }
                    continue;
                }
                let (part, certs) = bisect_level_pc(f, positions, *value, per_level)?;
                for (&i, k) in positions.iter().zip(part) {
                    kept[i] = k;
                }
                nodes.extend(certs);
            }
            let budget = compensated_sum(f.space().cells().iter().zip(&values).map(|(c, v)| c.measure * v));
            let w: Vec<f64> = f.space().cells().iter().zip(&values).map(|(c, v)| c.measure * v).collect();
            pc_report(f, &kept, f.operator_with_weights(&w), Some(budget), nodes)?
        }
        FrameRef::Gen(f) => {
            let s = f.full_operator()?;
            let norm_s = s.operator_norm();
            let snap_eps = if matches!(tau, WeightFn::Linear { .. }) { 0.5 * eps } else { eps };
            let (levels, _rounding) = interval_levels(f, tau, norm_s, snap_eps)?;
            let remaining = eps - if matches!(tau, WeightFn::Linear { .. }) { 0.5 * eps } else { 0.0 };
            let per_level = remaining / levels.len().max(1) as f64;
            let mut chosen = Vec::new();
            let mut nodes = Vec::new();
            for (value, ivs) in levels {
                if value <= 0.0 {
                    continue;
                }
                if value >= 1.0 {
                    chosen.extend(ivs);
                    continue;
                }
                let (part, certs) = bisect_level_gen(f, ivs, value, per_level)?;
                chosen.extend(part);
                nodes.extend(certs);
            }
            let target = f.weighted_operator(tau)?;
            let budget = weight_integral(f, tau)?;
            gen_report(f, chosen, target, Some(budget), nodes, None)?
        }
    };
    guarantee("budget_select error", report.achieved_error, eps)?;
    guarantee("budget_select measure", report.measure, report.budget.unwrap_or(f64::INFINITY) + 1e-9)?;
    Ok(report)
}

/// `∫ τ dμ` over the layout of a generator frame.
pub fn weight_integral(frame: &GenFrame, tau: &WeightFn) -> Result<f64> {
    let layout = frame.layout();
    let mut parts = Vec::with_capacity(layout.len());
    for e in layout.entries() {
        parts.push(tau.cell_mean(&e.id, e.interval())? * e.measure);
    }
    Ok(compensated_sum(parts))
}

#[cfg(test)]
mod tests;
