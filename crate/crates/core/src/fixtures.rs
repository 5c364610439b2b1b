//! Reference frames, densities and random instances used by tests, the
//! acceptance suite and the CLI.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::frame::{Complex64, FrameVector, PCFrame, WeightFn};
use crate::generator::{GenFrame, Generator, MovingAverage};
use crate::measure_space::{CellId, Interval, MeasureSpace};
use crate::operator::HermitianOp;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two unit cells carrying the standard basis of ℂ²; a Parseval frame.
pub fn f1() -> PCFrame {
    PCFrame::new(
        MeasureSpace::from_measures(&[1.0, 1.0]).expect("valid"),
        vec![FrameVector::real(&[1.0, 0.0]), FrameVector::real(&[0.0, 1.0])],
    )
    .expect("valid")
}

/// Moving-average generator `χ_{[0,t]}` on `[0, 1)` in dimension `d`.
pub fn moving_average_genframe(d: usize) -> GenFrame {
    GenFrame::unit(Arc::new(MovingAverage { d })).expect("valid")
}

/// Moving-average generator sampled at the midpoints of `cells` uniform cells.
pub fn moving_average_frame(d: usize, cells: usize) -> PCFrame {
    let g = MovingAverage { d };
    let space = MeasureSpace::uniform(cells, 1.0).expect("valid");
    let layout = space.canonicalize_to_interval();
    let mut rows = DMatrix::zeros(cells, d);
    let mut buf = vec![Complex64::new(0.0, 0.0); d];
    for (i, e) in layout.entries().iter().enumerate() {
        g.eval_into(e.interval().midpoint(), &mut buf);
        for (j, z) in buf.iter().enumerate() {
            rows[(i, j)] = z.re;
        }
    }
    PCFrame::from_real_rows(space, rows).expect("valid")
}

/// Random piecewise-constant frame with Gaussian vectors and measures in `[0.1, 1)`.
pub fn random_pcframe(d: usize, cells: usize, complex: bool, seed: u64) -> PCFrame {
    let mut rng = rng(seed);
    let measures: Vec<f64> = (0..cells).map(|_| rng.random_range(0.1..1.0)).collect();
    let scale = 1.0 / (d as f64).sqrt();
    let vectors = (0..cells)
        .map(|_| {
            FrameVector(
                (0..d)
                    .map(|_| {
                        let re: f64 = rng.sample(StandardNormal);
                        let im: f64 = if complex { rng.sample(StandardNormal) } else { 0.0 };
                        Complex64::new(re * scale, im * scale)
                    })
                    .collect(),
            )
        })
        .collect();
    PCFrame::new(MeasureSpace::from_measures(&measures).expect("valid"), vectors).expect("valid")
}

/// Random step weight on `[0, length)` with `pieces` steps and uniform values.
pub fn random_steps(rng: &mut impl Rng, length: f64, pieces: usize) -> WeightFn {
    let mut breaks: Vec<f64> = (1..pieces.max(1)).map(|_| rng.random_range(0.0..length)).collect();
    breaks.sort_by(f64::total_cmp);
    let values = (0..breaks.len() + 1).map(|_| rng.random_range(0.0..=1.0)).collect();
    WeightFn::steps(breaks, values).expect("valid")
}

/// Uniform random per-cell weight.
pub fn random_cell_weight(rng: &mut impl Rng, space: &MeasureSpace) -> WeightFn {
    let values: Vec<f64> = (0..space.len()).map(|_| rng.random_range(0.0..=1.0)).collect();
    WeightFn::from_cell_values(space, &values).expect("valid")
}

/// Per-cell weight drawing each cell's value from `levels` random values.
/// `0` and `1` are included among the levels when `levels ≥ 3`.
pub fn random_level_weight(rng: &mut impl Rng, space: &MeasureSpace, levels: usize) -> WeightFn {
    let mut pool: Vec<f64> = (0..levels).map(|_| rng.random_range(0.0..1.0)).collect();
    if levels >= 3 {
        pool[0] = 0.0;
        pool[1] = 1.0;
    }
    let values: Vec<f64> = (0..space.len()).map(|_| pool[rng.random_range(0..pool.len())]).collect();
    WeightFn::from_cell_values(space, &values).expect("valid")
}

/// Random set of whole cells, each included with probability ½.
pub fn random_cell_set(rng: &mut impl Rng, cells: usize) -> Vec<usize> {
    (0..cells).filter(|_| rng.random_bool(0.5)).collect()
}

/// `Σ_i c_i χ_{E_i}` as a per-cell weight, for whole-cell sets `E_i`.
pub fn combination_weight(space: &MeasureSpace, terms: &[(f64, &[usize])]) -> WeightFn {
    let mut values = vec![0.0; space.len()];
    for (c, set) in terms {
        for &i in set.iter() {
            values[i] += c;
        }
    }
    for v in &mut values {
        *v = v.clamp(0.0, 1.0);
    }
    WeightFn::from_cell_values(space, &values).expect("valid")
}

/// Random PSD operator `G G* / d` with Gaussian `G` of rank `rank`.
pub fn random_psd(rng: &mut impl Rng, d: usize, rank: usize, complex: bool) -> HermitianOp {
    let g_re = DMatrix::from_fn(d, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    let g_im = DMatrix::from_fn(d, rank, |_, _| if complex { rng.sample::<f64, _>(StandardNormal) } else { 0.0 });
    let s = 1.0 / (d * rank.max(1)) as f64;
    let re = (&g_re * g_re.transpose() + &g_im * g_im.transpose()) * s;
    let im = (&g_im * g_re.transpose() - &g_re * g_im.transpose()) * s;
    HermitianOp::new(re, complex.then_some(im))
}

/// Random instance for the discrete subset problem: `n` Gaussian directions in
/// `ℝ^d` with `‖φ_i‖² = max_norm_sq · U[¼, 1]`, rescaled so the Bessel bound
/// is at most one, plus uniform weights.
pub fn random_bessel_instance(n: usize, d: usize, max_norm_sq: f64, seed: u64) -> (Vec<FrameVector>, Vec<f64>) {
    let mut rng = rng(seed);
    let mut rows = DMatrix::zeros(n, d);
    for i in 0..n {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
        let target = (max_norm_sq * rng.random_range(0.25..=1.0)).sqrt();
        for x in &mut v {
            *x *= target / norm;
        }
        for (j, x) in v.into_iter().enumerate() {
            rows[(i, j)] = x;
        }
    }
    let bessel = crate::frame::weighted_gram(&rows, None, &vec![1.0; n]).max_eigenvalue();
    if bessel > 1.0 {
        rows /= bessel.sqrt();
    }
    let tau = (0..n).map(|_| rng.random_range(0.0..=1.0)).collect();
    let vectors = (0..n)
        .map(|i| FrameVector::real(&rows.row(i).iter().copied().collect::<Vec<_>>()))
        .collect();
    (vectors, tau)
}

/// Even-indexed cells of a uniform partition of `[0, length)` into `cells` pieces.
pub fn interleaved_intervals(length: f64, cells: usize) -> Vec<Interval> {
    (0..cells)
        .step_by(2)
        .map(|i| Interval::new(length * i as f64 / cells as f64, length * (i + 1) as f64 / cells as f64))
        .collect()
}

/// `CellId`s `0..n`.
pub fn ids(n: usize) -> Vec<CellId> {
    (0..n).map(CellId::indexed).collect()
}
