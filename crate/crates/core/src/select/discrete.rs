//! Finite subset problems: exhaustive minimization of `‖Σ_{I} φφ* − Σ τφφ*‖`,
//! heuristics, and the halving-gap probe.

use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixtures;
use crate::frame::{weighted_gram, Complex64, FrameVector, PCFrame};
use crate::generator::GenFrame;
use crate::operator::HermitianOp;

/// Hard limit on exhaustive enumeration (`2^24` subsets).
pub const MAX_EXHAUSTIVE: usize = 24;
/// Exhaustive candidates within this distance of the incremental minimum are
/// re-evaluated from scratch.
const TIE_WINDOW: f64 = 1e-9;
const MAX_CANDIDATES: usize = 4096;
const CHUNK_BITS: usize = 12;
const ROUNDING_TRIALS: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsetResult {
    /// Chosen indices, increasing.
    pub subset: Vec<usize>,
    pub error: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    LocalSearch,
    RandomizedRounding,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Greedy, Strategy::LocalSearch, Strategy::RandomizedRounding];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::LocalSearch => "local_search",
            Strategy::RandomizedRounding => "randomized_rounding",
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "greedy" => Ok(Strategy::Greedy),
            "local_search" => Ok(Strategy::LocalSearch),
            "randomized_rounding" => Ok(Strategy::RandomizedRounding),
            _ => Err(Error::UnknownStrategy(s.into())),
        }
    }
}

/// Validated instance: rows of `vectors` plus weights.
struct Instance {
    re: DMatrix<f64>,
    im: Option<DMatrix<f64>>,
    tau: Vec<f64>,
}

impl Instance {
    fn new(vectors: &[FrameVector], tau: &[f64]) -> Result<Self> {
        if vectors.len() != tau.len() {
            return Err(Error::LengthMismatch { what: "vectors and weights", left: vectors.len(), right: tau.len() });
        }
        for &t in tau {
            if !(0.0..=1.0).contains(&t) {
                return Err(Error::WeightOutOfRange { id: None, value: t });
            }
        }
        let d = vectors.first().map_or(0, FrameVector::dim);
        let n = vectors.len();
        let mut re = DMatrix::zeros(n, d);
        let mut im = DMatrix::zeros(n, d);
        let mut complex = false;
        for (i, v) in vectors.iter().enumerate() {
            if v.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: v.dim() });
            }
            for (j, z) in v.0.iter().enumerate() {
                if !(z.re.is_finite() && z.im.is_finite()) {
                    return Err(Error::NonFiniteEntry);
                }
                re[(i, j)] = z.re;
                im[(i, j)] = z.im;
                complex |= z.im != 0.0;
            }
        }
        Ok(Instance { re, im: complex.then_some(im), tau: tau.to_vec() })
    }

    fn len(&self) -> usize {
        self.tau.len()
    }

    fn dim(&self) -> usize {
        self.re.ncols()
    }

    /// `‖Σ_i (χ_I(i) − τ_i) φ_i φ_i*‖` from scratch in the full basis.
    fn discrepancy(&self, chosen: &[bool]) -> f64 {
        let w: Vec<f64> = chosen.iter().zip(&self.tau).map(|(&c, t)| if c { 1.0 - t } else { -t }).collect();
        weighted_gram(&self.re, self.im.as_ref(), &w).operator_norm()
    }

    fn result(&self, chosen: &[bool]) -> SubsetResult {
        SubsetResult {
            subset: chosen.iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| i).collect(),
            error: self.discrepancy(chosen),
        }
    }

    /// Rank-one terms `φ_iφ_i*` in a basis of the span of the vectors
    /// (columns of `R` from `V = QR` when `N < d`).
    fn reduced_terms(&self) -> (usize, Vec<(DMatrix<f64>, Option<DMatrix<f64>>)>) {
        let (n, d) = (self.len(), self.dim());
        let columns: Vec<Vec<Complex64>> = if n < d {
            let v = DMatrix::from_fn(d, n, |j, i| {
                Complex64::new(self.re[(i, j)], self.im.as_ref().map_or(0.0, |m| m[(i, j)]))
            });
            let r = v.qr().r();
            (0..n).map(|i| r.column(i).iter().copied().collect()).collect()
        } else {
            (0..n)
                .map(|i| {
                    (0..d)
                        .map(|j| Complex64::new(self.re[(i, j)], self.im.as_ref().map_or(0.0, |m| m[(i, j)])))
                        .collect()
                })
                .collect()
        };
        let k = n.min(d);
        let complex = columns.iter().flatten().any(|z| z.im != 0.0);
        let terms = columns
            .iter()
            .map(|a| {
                let re = DMatrix::from_fn(k, k, |p, q| a[p].re * a[q].re + a[p].im * a[q].im);
                let im = complex.then(|| DMatrix::from_fn(k, k, |p, q| a[p].im * a[q].re - a[p].re * a[q].im));
                (re, im)
            })
            .collect();
        (k, terms)
    }
}

fn norm_of(re: &DMatrix<f64>, im: Option<&DMatrix<f64>>) -> f64 {
    HermitianOp::new(re.clone(), im.cloned()).operator_norm()
}

fn gray(i: u64) -> u64 {
    i ^ (i >> 1)
}

/// Minimizes the discrepancy over all `2^N` subsets by Gray-code enumeration.
fn exhaustive(inst: &Instance) -> SubsetResult {
    let n = inst.len();
    if n == 0 {
        return inst.result(&[]);
    }
    let (k, terms) = inst.reduced_terms();
    let complex = terms.first().is_some_and(|t| t.1.is_some());
    let total: u64 = 1 << n;
    let chunk: u64 = 1 << CHUNK_BITS.min(n);
    let chunks: Vec<u64> = (0..total / chunk).collect();
    let per_chunk: Vec<Vec<(f64, u64)>> = chunks
        .par_iter()
        .map(|&c| {
            let first = c * chunk;
            let mask0 = gray(first);
            let mut re = DMatrix::zeros(k, k);
            let mut im = if complex { Some(DMatrix::zeros(k, k)) } else { None };
            for (i, (tr, ti)) in terms.iter().enumerate() {
                let coef = if mask0 >> i & 1 == 1 { 1.0 - inst.tau[i] } else { -inst.tau[i] };
                re += tr * coef;
                if let (Some(m), Some(t)) = (im.as_mut(), ti) {
                    *m += t * coef;
                }
            }
            let mut found = vec![(norm_of(&re, im.as_ref()), mask0)];
            let mut mask = mask0;
            for step in first + 1..first + chunk {
                let bit = step.trailing_zeros() as usize;
                mask ^= 1 << bit;
                let sign = if mask >> bit & 1 == 1 { 1.0 } else { -1.0 };
                let (tr, ti) = &terms[bit];
                re += tr * sign;
                if let (Some(m), Some(t)) = (im.as_mut(), ti) {
                    *m += t * sign;
                }
                found.push((norm_of(&re, im.as_ref()), mask));
            }
            let best = found.iter().map(|f| f.0).fold(f64::INFINITY, f64::min);
            found.retain(|f| f.0 <= best + TIE_WINDOW);
            found.sort_by_key(|f| f.1);
            found.truncate(MAX_CANDIDATES);
            found
        })
        .collect();
    let best = per_chunk.iter().flatten().map(|f| f.0).fold(f64::INFINITY, f64::min);
    let mut candidates: Vec<u64> =
        per_chunk.into_iter().flatten().filter(|f| f.0 <= best + TIE_WINDOW).map(|f| f.1).collect();
    candidates.sort_unstable();
    candidates.truncate(MAX_CANDIDATES);
    let mut winner: Option<SubsetResult> = None;
    for mask in candidates {
        let chosen: Vec<bool> = (0..n).map(|i| mask >> i & 1 == 1).collect();
        let r = inst.result(&chosen);
        if winner.as_ref().is_none_or(|w| r.error < w.error) {
            winner = Some(r);
        }
    }
    winner.expect("at least one candidate")
}

/// Exact minimizer of `‖Σ_{i∈I} φ_iφ_i* − Σ_i τ_iφ_iφ_i*‖` over all subsets `I`.
/// Ties go to the subset with the smallest bitmask.
pub fn aw_subset_exhaustive(vectors: &[FrameVector], tau: &[f64], max_vectors: usize) -> Result<SubsetResult> {
    let max = max_vectors.min(MAX_EXHAUSTIVE);
    if vectors.len() > max {
        return Err(Error::TooManyVectors { found: vectors.len(), max });
    }
    Ok(exhaustive(&Instance::new(vectors, tau)?))
}

/// Smallest `‖S_E − ½S‖` over whole-cell subsets `E` of a piecewise-constant frame.
pub fn halving_gap_exhaustive(frame: &PCFrame, max_cells: usize) -> Result<SubsetResult> {
    let max = max_cells.min(MAX_EXHAUSTIVE);
    if frame.len() > max {
        return Err(Error::TooManyCells { found: frame.len(), max });
    }
    let vectors: Vec<FrameVector> = frame
        .vectors()
        .iter()
        .zip(frame.space().cells())
        .map(|(v, c)| v.scaled(c.measure.sqrt()))
        .collect();
    Ok(exhaustive(&Instance::new(&vectors, &vec![0.5; vectors.len()])?))
}

/// Incrementally maintained discrepancy in the full basis.
struct Running<'a> {
    inst: &'a Instance,
    re: DMatrix<f64>,
    im: Option<DMatrix<f64>>,
}

impl<'a> Running<'a> {
    fn zero(inst: &'a Instance) -> Self {
        let d = inst.dim();
        Running { inst, re: DMatrix::zeros(d, d), im: inst.im.as_ref().map(|_| DMatrix::zeros(d, d)) }
    }

    fn from_choice(inst: &'a Instance, chosen: &[bool]) -> Self {
        let w: Vec<f64> = chosen.iter().zip(&inst.tau).map(|(&c, t)| if c { 1.0 - t } else { -t }).collect();
        let op = weighted_gram(&inst.re, inst.im.as_ref(), &w);
        let d = inst.dim();
        let im = inst.im.as_ref().map(|_| op.im().cloned().unwrap_or_else(|| DMatrix::zeros(d, d)));
        Running { inst, re: op.re().clone(), im }
    }

    /// Adds `c·φ_iφ_i*`.
    fn add(&mut self, i: usize, c: f64) {
        let d = self.inst.dim();
        for p in 0..d {
            let (ar_p, ai_p) = (self.inst.re[(i, p)], self.inst.im.as_ref().map_or(0.0, |m| m[(i, p)]));
            for q in 0..d {
                let (ar_q, ai_q) = (self.inst.re[(i, q)], self.inst.im.as_ref().map_or(0.0, |m| m[(i, q)]));
                self.re[(p, q)] += c * (ar_p * ar_q + ai_p * ai_q);
                if let Some(m) = self.im.as_mut() {
                    m[(p, q)] += c * (ai_p * ar_q - ar_p * ai_q);
                }
            }
        }
    }

    fn norm(&self) -> f64 {
        norm_of(&self.re, self.im.as_ref())
    }

    fn norm_with(&mut self, i: usize, c: f64) -> f64 {
        self.add(i, c);
        let n = self.norm();
        self.add(i, -c);
        n
    }
}

/// Decreasing `‖φ_i‖²`; each vector is added when that keeps the running
/// discrepancy `Σ_{processed} (χ_I − τ)φφ*` smaller.
fn greedy(inst: &Instance) -> Vec<bool> {
    let n = inst.len();
    let norms: Vec<f64> = (0..n)
        .map(|i| {
            let r = inst.re.row(i).norm_squared();
            r + inst.im.as_ref().map_or(0.0, |m| m.row(i).norm_squared())
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    let mut run = Running::zero(inst);
    let mut chosen = vec![false; n];
    for i in order {
        let t = inst.tau[i];
        let with = run.norm_with(i, 1.0 - t);
        let without = run.norm_with(i, -t);
        let add = with < without || (with == without && t >= 0.5);
        chosen[i] = add;
        run.add(i, if add { 1.0 - t } else { -t });
    }
    chosen
}

/// First-improvement single flips from the greedy start, at most `50·N` flips.
fn local_search(inst: &Instance) -> Vec<bool> {
    let n = inst.len();
    let mut chosen = greedy(inst);
    if n == 0 {
        return chosen;
    }
    let mut run = Running::from_choice(inst, &chosen);
    let mut current = run.norm();
    let mut flips = 0;
    let mut since_improvement = 0;
    let mut i = 0;
    while flips < 50 * n && since_improvement < n {
        let delta = if chosen[i] { -1.0 } else { 1.0 };
        let candidate = run.norm_with(i, delta);
        if candidate < current * (1.0 - 1e-12) {
            run.add(i, delta);
            chosen[i] = !chosen[i];
            current = candidate;
            flips += 1;
            since_improvement = 0;
        } else {
            since_improvement += 1;
        }
        i = (i + 1) % n;
    }
    chosen
}

/// Best of independent roundings `P(i ∈ I) = τ_i`.
fn randomized_rounding(inst: &Instance, seed: u64) -> Vec<bool> {
    let mut rng = fixtures::rng(seed);
    let mut best: Option<(f64, Vec<bool>)> = None;
    for _ in 0..ROUNDING_TRIALS {
        let chosen: Vec<bool> = inst.tau.iter().map(|&t| rng.random::<f64>() < t).collect();
        let e = inst.discrepancy(&chosen);
        if best.as_ref().is_none_or(|b| e < b.0) {
            best = Some((e, chosen));
        }
    }
    best.map(|b| b.1).unwrap_or_default()
}

/// Constructive surrogate for the subset theorem. Deterministic given the inputs,
/// strategy and seed; the error is recomputed from scratch.
pub fn aw_subset_heuristic(vectors: &[FrameVector], tau: &[f64], strategy: Strategy, seed: u64) -> Result<SubsetResult> {
    let inst = Instance::new(vectors, tau)?;
    let chosen = match strategy {
        Strategy::Greedy => greedy(&inst),
        Strategy::LocalSearch => local_search(&inst),
        Strategy::RandomizedRounding => randomized_rounding(&inst, seed),
    };
    Ok(inst.result(&chosen))
}

/// `‖S_{φ,E} − ½S_{φ,X}‖` with `E` the even cells of a uniform partition of the layout.
pub fn interleaved_error(frame: &GenFrame, cells: usize) -> Result<f64> {
    let half = frame.full_operator()?.scale(0.5);
    interleaved_against(frame, cells, &half)
}

fn interleaved_against(frame: &GenFrame, cells: usize, half: &HermitianOp) -> Result<f64> {
    let e = fixtures::interleaved_intervals(frame.layout().total(), cells);
    Ok(frame.operator_on(&e, None)?.sub(half)?.operator_norm())
}

/// [`interleaved_error`] at `2^k` cells for each `k`.
pub fn interleaved_errors(frame: &GenFrame, exponents: impl IntoIterator<Item = u32>) -> Result<Vec<(usize, f64)>> {
    let half = frame.full_operator()?.scale(0.5);
    exponents
        .into_iter()
        .map(|k| {
            let cells = 1usize << k;
            Ok((cells, interleaved_against(frame, cells, &half)?))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub max_norm_sq: f64,
    /// Mean over seeds of `max ‖φ_i‖²` after Bessel normalization.
    pub effective_max_norm_sq: f64,
    /// Best heuristic error per seed.
    pub errors: Vec<f64>,
    pub mean_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSweep {
    pub n: usize,
    pub d: usize,
    pub points: Vec<SweepPoint>,
    /// Least-squares slope of `ln(mean error)` against `ln(max ‖φ_i‖²)`.
    pub exponent: f64,
    pub monotone: bool,
}

/// Best heuristic error on random Bessel-normalized instances for each
/// `max ‖φ_i‖²`, over seeds `0..seeds`.
pub fn aw_epsilon_sweep(levels: &[f64], n: usize, d: usize, seeds: u64) -> Result<EpsilonSweep> {
    let mut points = Vec::with_capacity(levels.len());
    for &level in levels {
        if !(level > 0.0 && level.is_finite()) {
            return Err(Error::EpsilonNonpositive(level));
        }
        let runs: Vec<(f64, f64)> = (0..seeds)
            .into_par_iter()
            .map(|seed| {
                let (vectors, tau) = fixtures::random_bessel_instance(n, d, level, seed);
                let mut best = f64::INFINITY;
                for s in Strategy::ALL {
                    best = best.min(aw_subset_heuristic(&vectors, &tau, s, seed)?.error);
                }
                let max_sq = vectors.iter().map(|v| v.norm().powi(2)).fold(0.0, f64::max);
                Ok((best, max_sq))
            })
            .collect::<Result<_>>()?;
        let count = runs.len().max(1) as f64;
        let errors: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let mean_error = errors.iter().sum::<f64>() / count;
        let effective_max_norm_sq = runs.iter().map(|r| r.1).sum::<f64>() / count;
        points.push(SweepPoint { max_norm_sq: level, effective_max_norm_sq, errors, mean_error });
    }
    let mut by_level: Vec<&SweepPoint> = points.iter().collect();
    by_level.sort_by(|a, b| a.max_norm_sq.total_cmp(&b.max_norm_sq));
    let monotone = by_level.windows(2).all(|w| w[0].mean_error <= w[1].mean_error);
    let exponent = log_log_slope(&points);
    Ok(EpsilonSweep { n, d, points, exponent, monotone })
}

fn log_log_slope(points: &[SweepPoint]) -> f64 {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.mean_error > 0.0)
        .map(|p| (p.max_norm_sq.ln(), p.mean_error.ln()))
        .collect();
    if xy.len() < 2 {
        return f64::NAN;
    }
    let m = xy.len() as f64;
    let (sx, sy) = xy.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0, a.1 + p.1));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = xy.iter().fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    fn basis2() -> Vec<FrameVector> {
        vec![FrameVector::real(&[1.0, 0.0]), FrameVector::real(&[0.0, 1.0])]
    }

    /// Plain loop over masks with the from-scratch discrepancy.
    fn brute(vectors: &[FrameVector], tau: &[f64]) -> f64 {
        let inst = Instance::new(vectors, tau).unwrap();
        let n = vectors.len();
        (0..1u64 << n)
            .map(|m| inst.discrepancy(&(0..n).map(|i| m >> i & 1 == 1).collect::<Vec<_>>()))
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn symmetric_pair_has_half_everywhere() {
        let r = aw_subset_exhaustive(&basis2(), &[0.5, 0.5], 24).unwrap();
        assert!((r.error - 0.5).abs() < 1e-15);
        assert!(r.subset.is_empty());
        let inst = Instance::new(&basis2(), &[0.5, 0.5]).unwrap();
        for m in 0..4u64 {
            let e = inst.discrepancy(&[m & 1 == 1, m & 2 == 2]);
            assert!((e - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn integral_weights_are_solved_exactly() {
        let (vectors, _) = fixtures::random_bessel_instance(10, 3, 0.1, 3);
        let tau: Vec<f64> = (0..10).map(|i| (i % 3 == 0) as u8 as f64).collect();
        let want: Vec<usize> = (0..10).filter(|i| i % 3 == 0).collect();
        let r = aw_subset_exhaustive(&vectors, &tau, 24).unwrap();
        assert_eq!(r.subset, want);
        assert!(r.error < 1e-15);
        for s in Strategy::ALL {
            let h = aw_subset_heuristic(&vectors, &tau, s, 1).unwrap();
            assert_eq!(h.subset, want, "{s:?}");
            assert!(h.error < 1e-15);
        }
    }

    #[test]
    fn exhaustive_matches_brute_force() {
        for seed in 0..4 {
            let (vectors, tau) = fixtures::random_bessel_instance(9, 3, 0.3, seed);
            let r = aw_subset_exhaustive(&vectors, &tau, 24).unwrap();
            assert_eq!(r.error, brute(&vectors, &tau));
        }
    }

    #[test]
    fn reduced_dimension_matches_brute_force() {
        let (vectors, tau) = fixtures::random_bessel_instance(5, 12, 0.5, 9);
        let r = aw_subset_exhaustive(&vectors, &tau, 24).unwrap();
        assert_eq!(r.error, brute(&vectors, &tau));
    }

    #[test]
    fn complex_instance_matches_brute_force() {
        let frame = fixtures::random_pcframe(3, 8, true, 5);
        let tau: Vec<f64> = (0..8).map(|i| i as f64 / 8.0).collect();
        let r = aw_subset_exhaustive(&frame.vectors(), &tau, 24).unwrap();
        assert_eq!(r.error, brute(&frame.vectors(), &tau));
    }

    #[test]
    fn heuristics_never_beat_exhaustive() {
        for seed in 0..5 {
            let (vectors, tau) = fixtures::random_bessel_instance(12, 3, 0.1, seed);
            let oracle = aw_subset_exhaustive(&vectors, &tau, 24).unwrap();
            for s in Strategy::ALL {
                let h = aw_subset_heuristic(&vectors, &tau, s, seed).unwrap();
                assert!(h.error >= oracle.error, "{s:?}");
            }
        }
    }

    #[test]
    fn heuristics_are_deterministic() {
        let (vectors, tau) = fixtures::random_bessel_instance(30, 4, 0.1, 2);
        for s in Strategy::ALL {
            assert_eq!(
                aw_subset_heuristic(&vectors, &tau, s, 11).unwrap(),
                aw_subset_heuristic(&vectors, &tau, s, 11).unwrap()
            );
        }
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("local-search".parse::<Strategy>().unwrap(), Strategy::LocalSearch);
        assert_eq!("greedy".parse::<Strategy>().unwrap(), Strategy::Greedy);
        assert!(matches!("anneal".parse::<Strategy>(), Err(Error::UnknownStrategy(_))));
    }

    #[test]
    fn limits_are_enforced() {
        let (vectors, tau) = fixtures::random_bessel_instance(13, 2, 0.1, 0);
        assert!(matches!(aw_subset_exhaustive(&vectors, &tau, 12), Err(Error::TooManyVectors { found: 13, max: 12 })));
        let frame = fixtures::random_pcframe(2, 30, false, 0);
        assert!(matches!(halving_gap_exhaustive(&frame, 64), Err(Error::TooManyCells { found: 30, max: 24 })));
        assert!(matches!(
            aw_subset_exhaustive(&vectors, &tau[..3], 24),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn halving_gap_on_basis() {
        let r = halving_gap_exhaustive(&fixtures::f1(), 24).unwrap();
        assert!((r.error - 0.5).abs() < 1e-15);
    }

    #[test]
    fn interleaving_shrinks_the_gap() {
        let frame = fixtures::moving_average_genframe(16);
        let errs = interleaved_errors(&frame, 2..=5).unwrap();
        assert!(errs.windows(2).all(|w| w[1].1 < w[0].1), "{errs:?}");
    }
}
