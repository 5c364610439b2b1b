//! Measurable sets represented as kept measure per cell.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measure_space::{CellId, Interval, MeasureSpace};
use crate::util::compensated_sum;

/// Relative slack allowed when a kept measure is compared to its cell measure.
const KEPT_SLACK: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Kept {
    pub id: CellId,
    pub measure: f64,
}

/// A set `E` given by how much of each cell it contains.
///
/// Ids may name cells of the space the selection is applied to or any of
/// their descendants; kept measure on descendants is credited to the ancestor.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub kept: Vec<Kept>,
    /// Every listed cell is kept entirely.
    #[serde(default)]
    pub realized: bool,
}

impl Selection {
    pub fn empty() -> Self {
        Selection { kept: Vec::new(), realized: true }
    }

    pub fn full(space: &MeasureSpace) -> Self {
        Selection {
            kept: space
                .cells()
                .iter()
                .map(|c| Kept { id: c.id.clone(), measure: c.measure })
                .collect(),
            realized: true,
        }
    }

    /// Whole cells at the given positions.
    pub fn cells(space: &MeasureSpace, positions: &[usize]) -> Self {
        let mut positions = positions.to_vec();
        positions.sort_unstable();
        positions.dedup();
        Selection {
            kept: positions
                .into_iter()
                .map(|i| {
                    let c = &space.cells()[i];
                    Kept { id: c.id.clone(), measure: c.measure }
                })
                .collect(),
            realized: true,
        }
    }

    /// One kept measure per cell, in space order. Zero entries are dropped.
    pub fn from_kept(space: &MeasureSpace, kept: &[f64]) -> Result<Self> {
        if kept.len() != space.len() {
            return Err(Error::LengthMismatch { what: "kept measures", left: kept.len(), right: space.len() });
        }
        let mut out = Vec::new();
        let mut realized = true;
        for (cell, &k) in space.cells().iter().zip(kept) {
            check_kept(&cell.id, k, cell.measure)?;
            if k > 0.0 {
                realized &= k == cell.measure;
                out.push(Kept { id: cell.id.clone(), measure: k });
            }
        }
        Ok(Selection { kept: out, realized })
    }

    pub fn measure(&self) -> f64 {
        compensated_sum(self.kept.iter().map(|k| k.measure))
    }

    pub fn is_empty(&self) -> bool {
        self.kept.iter().all(|k| k.measure == 0.0)
    }

    /// Kept measure per cell of `space`, in space order.
    pub fn kept_per_cell(&self, space: &MeasureSpace) -> Result<Vec<f64>> {
        let mut out = vec![0.0; space.len()];
        for k in &self.kept {
            let pos = resolve(space, &k.id)?;
            let cell = &space.cells()[pos];
            check_kept(&k.id, k.measure, cell.measure)?;
            out[pos] += k.measure;
        }
        for (cell, &k) in space.cells().iter().zip(&out) {
            check_kept(&cell.id, k, cell.measure)?;
        }
        Ok(out)
    }

    /// Canonical intervals `[start, start + kept)` inside each cell's layout interval.
    pub fn prefix_intervals(&self, space: &MeasureSpace) -> Result<Vec<Interval>> {
        let kept = self.kept_per_cell(space)?;
        let layout = space.canonicalize_to_interval();
        Ok(layout
            .entries()
            .iter()
            .zip(kept)
            .filter(|(_, k)| *k > 0.0)
            .map(|(e, k)| {
                let end = if k >= e.measure { e.end } else { (e.start + k).min(e.end) };
                Interval::new(e.start, end)
            })
            .collect())
    }

    /// Realizes the selection by splitting every partially kept cell at its
    /// kept fraction. Returns the refined space and a selection of whole cells.
    pub fn realize(&self, space: &MeasureSpace) -> Result<(MeasureSpace, Selection)> {
        let kept = self.kept_per_cell(space)?;
        let splits: Vec<(usize, f64)> = space
            .cells()
            .iter()
            .zip(&kept)
            .enumerate()
            .filter(|(_, (c, &k))| k > 0.0 && k < c.measure)
            .map(|(i, (c, &k))| (i, k / c.measure))
            .collect();
        for &(i, _) in &splits {
            if !space.cells()[i].splittable {
                return Err(Error::AtomNotSplittable(space.cells()[i].id.clone()));
            }
        }
        let refined = space.split_many(&splits)?;
        let split_set: HashSet<usize> = splits.iter().map(|&(i, _)| i).collect();
        let mut out = Vec::new();
        for (i, (cell, &k)) in space.cells().iter().zip(&kept).enumerate() {
            if k <= 0.0 {
                continue;
            }
            let id = if split_set.contains(&i) { cell.id.child(false) } else { cell.id.clone() };
            let measure = refined.cell(&id)?.measure;
            out.push(Kept { id, measure });
        }
        Ok((refined, Selection { kept: out, realized: true }))
    }
}

fn check_kept(id: &CellId, kept: f64, measure: f64) -> Result<()> {
    if !(kept.is_finite() && kept >= 0.0 && kept <= measure * (1.0 + KEPT_SLACK)) {
        return Err(Error::KeptMeasureOutOfRange { id: id.clone(), kept, measure });
    }
    Ok(())
}

/// Position of `id` or of its nearest ancestor in `space`.
pub(crate) fn resolve(space: &MeasureSpace, id: &CellId) -> Result<usize> {
    id.lineage()
        .find_map(|a| space.position(&a))
        .ok_or_else(|| Error::UnknownCell(id.clone()))
}
