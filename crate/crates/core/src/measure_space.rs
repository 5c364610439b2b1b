//! Finite, refinable cell partitions of a σ-finite measure space.
//!
//! A [`MeasureSpace`] is an ordered list of cells with positive finite
//! measure. A cell is non-atomic when it may be split at any fraction; the
//! selection algorithms only ever need subsets of prescribed measure, so this
//! is the whole content of non-atomicity in the finite model.
//!
//! Cell order is fixed at creation and children inherit their parent's
//! position, which makes the prefix-sum [`IntervalLayout`] deterministic.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::util::NeumaierSum;

const CHILD_SEPARATOR: char = '#';

/// Identifier of a cell. Children of `c` are `c#0` (left) and `c#1` (right),
/// grandchildren append further bits (`c#01`).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CellId(String);

impl CellId {
    /// A root id. Root ids must be non-empty and may not contain `#`.
    pub fn root(name: impl Into<String>) -> Result<Self> {
        let name = name.into();
        if name.is_empty() || name.contains(CHILD_SEPARATOR) {
            return Err(Error::InvalidCellId(name));
        }
        Ok(CellId(name))
    }

    /// Root id `"{index}"`.
    pub fn indexed(index: usize) -> Self {
        CellId(index.to_string())
    }

    /// Accepts both root ids and derived ids (`root#bits`).
    pub fn parse(text: &str) -> Result<Self> {
        match text.split_once(CHILD_SEPARATOR) {
            None if !text.is_empty() => Ok(CellId(text.to_string())),
            Some((root, bits))
                if !root.is_empty() && !bits.is_empty() && bits.chars().all(|c| c == '0' || c == '1') =>
            {
                Ok(CellId(text.to_string()))
            }
            _ => Err(Error::InvalidCellId(text.to_string())),
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn child(&self, right: bool) -> CellId {
        let bit = if right { '1' } else { '0' };
        let mut id = self.0.clone();
        if !id.contains(CHILD_SEPARATOR) {
            id.push(CHILD_SEPARATOR);
        }
        id.push(bit);
        CellId(id)
    }

    pub fn parent(&self) -> Option<CellId> {
        let (root, bits) = self.0.split_once(CHILD_SEPARATOR)?;
        if bits.len() == 1 {
            Some(CellId(root.to_string()))
        } else {
            Some(CellId(self.0[..self.0.len() - 1].to_string()))
        }
    }

    /// The id itself followed by its parent, grandparent, ... up to the root.
    pub fn lineage(&self) -> impl Iterator<Item = CellId> {
        std::iter::successors(Some(self.clone()), |id| id.parent())
    }

    /// Number of splits separating this cell from its root.
    pub fn depth(&self) -> usize {
        self.0.split_once(CHILD_SEPARATOR).map_or(0, |(_, bits)| bits.len())
    }
}

impl fmt::Display for CellId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub id: CellId,
    pub measure: f64,
    /// `false` models an atom.
    #[serde(default = "default_splittable")]
    pub splittable: bool,
}

fn default_splittable() -> bool {
    true
}

impl Cell {
    pub fn new(id: CellId, measure: f64) -> Self {
        Cell { id, measure, splittable: true }
    }

    pub fn atom(id: CellId, measure: f64) -> Self {
        Cell { id, measure, splittable: false }
    }
}

/// Ordered finite partition of a measure space. Immutable; every mutating
/// operation returns a new space.
#[derive(Clone, Debug)]
pub struct MeasureSpace {
    cells: Vec<Cell>,
    total: f64,
    index: HashMap<CellId, usize>,
}

impl PartialEq for MeasureSpace {
    fn eq(&self, other: &Self) -> bool {
        self.cells == other.cells
    }
}

impl MeasureSpace {
    pub fn new(cells: Vec<Cell>) -> Result<Self> {
        let mut index = HashMap::with_capacity(cells.len());
        for (i, cell) in cells.iter().enumerate() {
            CellId::parse(cell.id.as_str())?;
            if !(cell.measure.is_finite() && cell.measure > 0.0) {
                return Err(Error::InvalidMeasure { id: cell.id.clone(), measure: cell.measure });
            }
            if index.insert(cell.id.clone(), i).is_some() {
                return Err(Error::DuplicateCellId(cell.id.clone()));
            }
        }
        let total = cells.iter().map(|c| c.measure).collect::<NeumaierSum>().value();
        Ok(MeasureSpace { cells, total, index })
    }

    pub fn empty() -> Self {
        MeasureSpace { cells: Vec::new(), total: 0.0, index: HashMap::new() }
    }

    /// `n` splittable cells of measure `total / n` with ids `0..n`.
    pub fn uniform(n: usize, total: f64) -> Result<Self> {
        let measure = total / n as f64;
        Self::new((0..n).map(|i| Cell::new(CellId::indexed(i), measure)).collect())
    }

    /// Splittable cells with the given measures and ids `0..n`.
    pub fn from_measures(measures: &[f64]) -> Result<Self> {
        Self::new(
            measures
                .iter()
                .enumerate()
                .map(|(i, &m)| Cell::new(CellId::indexed(i), m))
                .collect(),
        )
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn total_measure(&self) -> f64 {
        self.total
    }

    pub fn measures(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.measure).collect()
    }

    pub fn is_non_atomic(&self) -> bool {
        self.cells.iter().all(|c| c.splittable)
    }

    /// Fails with [`Error::AtomNotSplittable`] naming the first atom.
    pub fn require_non_atomic(&self) -> Result<()> {
        match self.cells.iter().find(|c| !c.splittable) {
            Some(atom) => Err(Error::AtomNotSplittable(atom.id.clone())),
            None => Ok(()),
        }
    }

    pub fn position(&self, id: &CellId) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn cell(&self, id: &CellId) -> Result<&Cell> {
        self.position(id)
            .map(|i| &self.cells[i])
            .ok_or_else(|| Error::UnknownCell(id.clone()))
    }

    pub fn split_cell(&self, id: &CellId, fraction: f64) -> Result<(MeasureSpace, CellId, CellId)> {
        let pos = self.position(id).ok_or_else(|| Error::UnknownCell(id.clone()))?;
        let cell = &self.cells[pos];
        if !cell.splittable {
            return Err(Error::AtomNotSplittable(id.clone()));
        }
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::FractionOutOfRange(fraction));
        }
        let (left, right) = split_pair(cell, fraction);
        let (left_id, right_id) = (left.id.clone(), right.id.clone());
        let mut cells = Vec::with_capacity(self.cells.len() + 1);
        cells.extend_from_slice(&self.cells[..pos]);
        cells.push(left);
        cells.push(right);
        cells.extend_from_slice(&self.cells[pos + 1..]);
        Ok((MeasureSpace::new(cells)?, left_id, right_id))
    }

    /// Halves cells until every cell measure is at most `max_cell_measure`.
    pub fn refine_uniform(&self, max_cell_measure: f64) -> Result<MeasureSpace> {
        if !(max_cell_measure.is_finite() && max_cell_measure > 0.0) {
            return Err(Error::InvalidBound(max_cell_measure));
        }
        self.require_non_atomic()?;
        if self.cells.iter().all(|c| c.measure <= max_cell_measure) {
            return Ok(self.clone());
        }
        let mut out = Vec::with_capacity(self.cells.len());
        for cell in &self.cells {
            halve_until(cell.clone(), max_cell_measure, &mut out);
        }
        MeasureSpace::new(out)
    }

    /// Subspace made of the cells at `positions` (kept in space order).
    pub fn restrict(&self, positions: &[usize]) -> Result<MeasureSpace> {
        let mut sorted = positions.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        MeasureSpace::new(sorted.into_iter().map(|i| self.cells[i].clone()).collect())
    }

    /// Splits several cells at once. `splits` maps cell positions to fractions
    /// in (0, 1); untouched cells are copied. Order is preserved.
    pub fn split_many(&self, splits: &[(usize, f64)]) -> Result<MeasureSpace> {
        let mut fractions: Vec<Option<f64>> = vec![None; self.cells.len()];
        for &(pos, fraction) in splits {
            let cell = self
                .cells
                .get(pos)
                .ok_or_else(|| Error::UnknownCell(CellId::indexed(pos)))?;
            if !cell.splittable {
                return Err(Error::AtomNotSplittable(cell.id.clone()));
            }
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::FractionOutOfRange(fraction));
            }
            fractions[pos] = Some(fraction);
        }
        let mut out = Vec::with_capacity(self.cells.len() + splits.len());
        for (cell, fraction) in self.cells.iter().zip(fractions) {
            match fraction {
                Some(f) => {
                    let (l, r) = split_pair(cell, f);
                    out.push(l);
                    out.push(r);
                }
                None => out.push(cell.clone()),
            }
        }
        MeasureSpace::new(out)
    }

    /// Prefix-sum layout of the cells on `[0, total_measure)`.
    pub fn canonicalize_to_interval(&self) -> IntervalLayout {
        let mut acc = NeumaierSum::default();
        let entries = self
            .cells
            .iter()
            .map(|c| {
                let start = acc.value();
                acc.add(c.measure);
                LayoutEntry { id: c.id.clone(), start, end: acc.value(), measure: c.measure }
            })
            .collect();
        IntervalLayout { entries, total: self.total }
    }

    /// Serializable description: `[{id, measure, splittable}, ...]`.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.cells).expect("cells serialize")
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        let cells: Vec<Cell> = serde_json::from_value(value.clone())?;
        MeasureSpace::new(cells)
    }
}

fn split_pair(cell: &Cell, fraction: f64) -> (Cell, Cell) {
    let left = fraction * cell.measure;
    let right = cell.measure - left;
    (
        Cell { id: cell.id.child(false), measure: left, splittable: cell.splittable },
        Cell { id: cell.id.child(true), measure: right, splittable: cell.splittable },
    )
}

fn halve_until(cell: Cell, bound: f64, out: &mut Vec<Cell>) {
    if cell.measure <= bound {
        out.push(cell);
        return;
    }
    let (l, r) = split_pair(&cell, 0.5);
    halve_until(l, bound, out);
    halve_until(r, bound, out);
}

/// Half-open interval `[start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Interval { start, end }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.start + self.end)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn split_at_fraction(&self, fraction: f64) -> (Interval, Interval) {
        let cut = self.start + fraction * (self.end - self.start);
        (Interval::new(self.start, cut), Interval::new(cut, self.end))
    }
}

/// Sorts intervals and merges those that touch or overlap. Empty intervals are dropped.
pub fn merge_intervals(mut intervals: Vec<Interval>) -> Vec<Interval> {
    intervals.retain(|i| i.end > i.start);
    intervals.sort_by(|a, b| a.start.total_cmp(&b.start));
    let mut merged: Vec<Interval> = Vec::with_capacity(intervals.len());
    for iv in intervals {
        match merged.last_mut() {
            Some(last) if iv.start <= last.end => last.end = last.end.max(iv.end),
            _ => merged.push(iv),
        }
    }
    merged
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayoutEntry {
    pub id: CellId,
    pub start: f64,
    pub end: f64,
    /// Cell measure as stored in the space; `end - start` equals it up to rounding.
    #[serde(skip)]
    pub measure: f64,
}

impl LayoutEntry {
    pub fn interval(&self) -> Interval {
        Interval::new(self.start, self.end)
    }
}

/// Map from cells to disjoint half-open subintervals covering `[0, total)`.
#[derive(Clone, Debug, PartialEq)]
pub struct IntervalLayout {
    entries: Vec<LayoutEntry>,
    total: f64,
}

impl IntervalLayout {
    pub fn entries(&self) -> &[LayoutEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn interval_of(&self, id: &CellId) -> Option<Interval> {
        self.entries.iter().find(|e| &e.id == id).map(LayoutEntry::interval)
    }

    /// Relabels the layout as a measure space whose cells are the intervals,
    /// in layout order, carrying the original cell measures.
    pub fn to_space(&self) -> Result<MeasureSpace> {
        MeasureSpace::new(
            self.entries
                .iter()
                .map(|e| Cell::new(e.id.clone(), e.measure))
                .collect(),
        )
    }

    /// `[{id, start, end}, ...]`
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.entries).expect("layout serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn approx(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn child_ids_follow_parent() {
        let root = CellId::indexed(3);
        let left = root.child(false);
        let lr = left.child(true);
        assert_eq!(left.as_str(), "3#0");
        assert_eq!(lr.as_str(), "3#01");
        assert_eq!(lr.parent(), Some(left.clone()));
        assert_eq!(left.parent(), Some(root.clone()));
        assert_eq!(root.parent(), None);
        assert_eq!(lr.depth(), 2);
        assert_eq!(lr.lineage().count(), 3);
        assert!(CellId::root("a#b").is_err());
        assert!(CellId::parse("a#012").is_err());
        assert!(CellId::parse("a#0110").is_ok());
    }

    #[test]
    fn split_halves() {
        let space = MeasureSpace::from_measures(&[1.0]).unwrap();
        let (s, l, r) = space.split_cell(&CellId::indexed(0), 0.5).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.cell(&l).unwrap().measure, 0.5);
        assert_eq!(s.cell(&r).unwrap().measure, 0.5);
        assert_eq!(s.total_measure(), 1.0);
    }

    #[test]
    fn split_thirds() {
        let space = MeasureSpace::from_measures(&[0.3]).unwrap();
        let (s, l, r) = space.split_cell(&CellId::indexed(0), 1.0 / 3.0).unwrap();
        assert!(approx(s.cell(&l).unwrap().measure, 0.1));
        assert!(approx(s.cell(&r).unwrap().measure, 0.2));
        assert!(approx(s.total_measure(), 0.3));
    }

    #[test]
    fn split_preserves_order() {
        let space = MeasureSpace::from_measures(&[1.0, 2.0, 3.0]).unwrap();
        let (s, l, r) = space.split_cell(&CellId::indexed(1), 0.25).unwrap();
        let ids: Vec<_> = s.cells().iter().map(|c| c.id.clone()).collect();
        assert_eq!(ids, vec![CellId::indexed(0), l, r, CellId::indexed(2)]);
    }

    #[test]
    fn split_errors() {
        let space = MeasureSpace::new(vec![
            Cell::new(CellId::indexed(0), 1.0),
            Cell::atom(CellId::indexed(1), 1.0),
        ])
        .unwrap();
        assert_eq!(
            space.split_cell(&CellId::indexed(0), 1.0).unwrap_err(),
            Error::FractionOutOfRange(1.0)
        );
        assert_eq!(
            space.split_cell(&CellId::indexed(0), 0.0).unwrap_err(),
            Error::FractionOutOfRange(0.0)
        );
        assert_eq!(
            space.split_cell(&CellId::indexed(1), 0.5).unwrap_err(),
            Error::AtomNotSplittable(CellId::indexed(1))
        );
        assert_eq!(
            space.split_cell(&CellId::indexed(7), 0.5).unwrap_err(),
            Error::UnknownCell(CellId::indexed(7))
        );
    }

    #[test]
    fn construction_validates() {
        assert!(matches!(MeasureSpace::from_measures(&[1.0, 0.0]), Err(Error::InvalidMeasure { .. })));
        assert!(matches!(MeasureSpace::from_measures(&[f64::NAN]), Err(Error::InvalidMeasure { .. })));
        let dup = vec![Cell::new(CellId::indexed(0), 1.0), Cell::new(CellId::indexed(0), 1.0)];
        assert!(matches!(MeasureSpace::new(dup), Err(Error::DuplicateCellId(_))));
    }

    #[test]
    fn layout_is_prefix_sum() {
        let space = MeasureSpace::from_measures(&[0.5, 0.25, 0.25]).unwrap();
        let layout = space.canonicalize_to_interval();
        let spans: Vec<(f64, f64)> = layout.entries().iter().map(|e| (e.start, e.end)).collect();
        assert_eq!(spans, vec![(0.0, 0.5), (0.5, 0.75), (0.75, 1.0)]);
        assert_eq!(layout.total(), 1.0);
    }

    #[test]
    fn empty_layout() {
        let layout = MeasureSpace::empty().canonicalize_to_interval();
        assert!(layout.is_empty());
        assert_eq!(layout.total(), 0.0);
    }

    #[test]
    fn refine_single_cell() {
        let space = MeasureSpace::from_measures(&[1.0]).unwrap();
        let fine = space.refine_uniform(0.25).unwrap();
        assert_eq!(fine.len(), 4);
        assert!(fine.cells().iter().all(|c| c.measure <= 0.25));
        assert_eq!(fine.total_measure(), 1.0);
    }

    #[test]
    fn refine_noop() {
        let space = MeasureSpace::from_measures(&[0.2, 0.3]).unwrap();
        assert_eq!(space.refine_uniform(0.3).unwrap(), space);
        assert_eq!(space.refine_uniform(5.0).unwrap(), space);
    }

    #[test]
    fn refine_mixed() {
        let space = MeasureSpace::from_measures(&[0.9, 0.1]).unwrap();
        let fine = space.refine_uniform(0.5).unwrap();
        assert!(fine.len() > 2);
        assert!(fine.cells().iter().all(|c| c.measure <= 0.5));
        let sum: f64 = fine.cells().iter().map(|c| c.measure).sum();
        assert!(approx(sum, 1.0));
        assert_eq!(fine.cells().last().unwrap().id, CellId::indexed(1));
    }

    #[test]
    fn refine_rejects_atoms_and_bad_bounds() {
        let space = MeasureSpace::new(vec![Cell::atom(CellId::indexed(0), 0.1)]).unwrap();
        assert!(matches!(space.refine_uniform(1.0), Err(Error::AtomNotSplittable(_))));
        let space = MeasureSpace::from_measures(&[1.0]).unwrap();
        assert!(matches!(space.refine_uniform(0.0), Err(Error::InvalidBound(_))));
    }

    #[test]
    fn json_round_trip() {
        let space = MeasureSpace::new(vec![
            Cell::new(CellId::indexed(0), 0.5),
            Cell::atom(CellId::parse("x#01").unwrap(), 0.25),
        ])
        .unwrap();
        let json = space.to_json();
        assert_eq!(json[1]["id"], "x#01");
        assert_eq!(json[1]["splittable"], false);
        assert_eq!(MeasureSpace::from_json(&json).unwrap(), space);
        let layout = space.canonicalize_to_interval().to_json();
        assert_eq!(layout[1]["start"], 0.5);
        assert_eq!(layout[1]["end"], 0.75);
    }

    #[test]
    fn merge_touching_intervals() {
        let merged = merge_intervals(vec![
            Interval::new(0.5, 0.75),
            Interval::new(0.0, 0.25),
            Interval::new(0.25, 0.5),
            Interval::new(0.9, 0.9),
            Interval::new(0.8, 1.0),
        ]);
        assert_eq!(merged, vec![Interval::new(0.0, 0.75), Interval::new(0.8, 1.0)]);
    }
}
