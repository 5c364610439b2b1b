//! Subcommand implementations. Each returns a JSON body and an optional CSV table.

use std::sync::Arc;

use frame_lyapunov::fixtures;
use frame_lyapunov::generator::Fourier;
use frame_lyapunov::operator::spectrum_rows;
use frame_lyapunov::povm::{
    povm_evaluate, povm_recheck, povm_select, rademacher_density, rademacher_probe, weighted_density_operator,
    DiagLinear, OperatorDensity, ProbeReport,
};
use frame_lyapunov::select::discrete::{
    aw_epsilon_sweep, aw_subset_exhaustive, aw_subset_heuristic, halving_gap_exhaustive, interleaved_errors, Strategy,
};
use frame_lyapunov::select::{budget_select, dyadic_bisect, lyapunov_select, split_layout, SelectionReport};
use frame_lyapunov::{quantize, GenFrame, HermitianOp, Interval, MeasureSpace, PCFrame, Selection, WeightFn};
use rand::Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::Config;
use crate::{tau, CliError};

/// Agreement required between a report and its recheck.
const RECHECK_TOLERANCE: f64 = 1e-10;
const SWEEP_TAU0: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];
const SWEEP_NORMS: [f64; 4] = [0.2, 0.1, 0.05, 0.025];
const SWEEP_SEEDS: u64 = 20;

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

pub struct Output {
    pub body: Value,
    pub table: Option<Table>,
}

enum Frame {
    Pc(PCFrame),
    Gen(GenFrame),
}

impl Frame {
    fn space(&self) -> &MeasureSpace {
        match self {
            Frame::Pc(f) => f.space(),
            Frame::Gen(f) => f.space(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Frame::Pc(f) => f.dim(),
            Frame::Gen(f) => f.dim(),
        }
    }

    fn full_operator(&self) -> Result<HermitianOp, CliError> {
        Ok(match self {
            Frame::Pc(f) => f.full_operator(),
            Frame::Gen(f) => f.full_operator()?,
        })
    }

    fn weighted_operator(&self, tau: &WeightFn) -> Result<HermitianOp, CliError> {
        Ok(match self {
            Frame::Pc(f) => f.weighted_frame_operator(tau)?,
            Frame::Gen(f) => f.weighted_operator(tau)?,
        })
    }

    fn describe(&self, source: &str) -> Value {
        json!({
            "source": source,
            "kind": match self { Frame::Pc(_) => "piecewise-constant", Frame::Gen(_) => "generator" },
            "cells": self.space().len(),
            "dimension": self.dim(),
            "total_measure": self.space().total_measure(),
        })
    }
}

fn load_frame(cfg: &Config) -> Result<(Frame, String), CliError> {
    if let Some(path) = &cfg.frame {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::validation(format!("cannot read frame {}: {e}", path.display())))?;
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::validation(format!("invalid frame {}: {e}", path.display())))?;
        return Ok((Frame::Pc(PCFrame::from_json(&value)?), path.display().to_string()));
    }
    let fixture = cfg.fixture.clone().unwrap_or_else(|| "moving-average".into());
    let generator = Config::flag(cfg.generator);
    let frame = match fixture.as_str() {
        "moving-average" => {
            let d = Config::positive(cfg.d, 512, "d")?;
            if generator {
                Frame::Gen(fixtures::moving_average_genframe(d))
            } else {
                Frame::Pc(fixtures::moving_average_frame(d, Config::positive(cfg.cells, d, "cells")?))
            }
        }
        "fourier" => {
            let d = Config::positive(cfg.d, 8, "d")?;
            Frame::Gen(GenFrame::unit(Arc::new(Fourier { d }))?)
        }
        "f1" => Frame::Pc(fixtures::f1()),
        "random" => Frame::Pc(fixtures::random_pcframe(
            Config::positive(cfg.d, 4, "d")?,
            Config::positive(cfg.cells, 32, "cells")?,
            false,
            cfg.seed.unwrap_or(0),
        )),
        other => {
            return Err(CliError::validation(format!(
                "unknown frame fixture '{other}' (expected moving-average, fourier, f1 or random)"
            )))
        }
    };
    Ok((frame, fixture))
}

fn require_no_csv(cfg: &Config, command: &str) -> Result<(), CliError> {
    if cfg.csv.is_some() {
        return Err(CliError::validation(format!("--csv is not supported by {command} without a table")));
    }
    Ok(())
}

fn intervals_json(intervals: &[Interval]) -> Value {
    Value::Array(intervals.iter().map(|iv| json!([iv.start, iv.end])).collect())
}

/// `{kept, realized, error, measure, budget, intervals}`.
fn report_json(r: &SelectionReport) -> Value {
    json!({
        "kept": r.selection.kept,
        "realized": r.selection.realized,
        "error": r.achieved_error,
        "measure": r.measure,
        "budget": r.budget,
        "intervals": intervals_json(&r.intervals),
    })
}

fn parse_intervals(value: &Value) -> Result<Vec<Interval>, CliError> {
    let pairs: Vec<[f64; 2]> = serde_json::from_value(value["intervals"].clone())
        .map_err(|e| CliError::guarantee(format!("serialized intervals unreadable: {e}")))?;
    Ok(pairs.into_iter().map(|[a, b]| Interval::new(a, b)).collect())
}

fn parse_selection(value: &Value) -> Result<Selection, CliError> {
    serde_json::from_value(json!({"kept": value["kept"], "realized": value["realized"]}))
        .map_err(|e| CliError::guarantee(format!("serialized selection unreadable: {e}")))
}

/// Recomputes error and measure from the serialized report against an
/// independently computed target.
fn recheck(frame: &Frame, serialized: &Value, target: &HermitianOp) -> Result<Value, CliError> {
    let reported = serialized["error"].as_f64().unwrap_or(f64::NAN);
    let (operator, measure, source) = match frame {
        Frame::Pc(f) => {
            let sel = parse_selection(serialized)?;
            (f.frame_operator(&sel)?, sel.measure(), "selection")
        }
        Frame::Gen(f) => {
            let ivs = parse_intervals(serialized)?;
            (f.operator_on(&ivs, None)?, ivs.iter().map(Interval::length).sum(), "intervals")
        }
    };
    let error = operator.sub(target)?.operator_norm();
    let agrees = (error - reported).abs() <= RECHECK_TOLERANCE;
    if !agrees {
        return Err(CliError::guarantee(format!("recheck error {error} disagrees with reported {reported}")));
    }
    Ok(json!({"error": error, "measure": measure, "from": source, "agrees": agrees}))
}

fn check_bound(what: &str, value: f64, bound: f64) -> Result<(), CliError> {
    if !(value <= bound) {
        return Err(CliError::guarantee(format!("{what} {value} exceeds {bound}")));
    }
    Ok(())
}

fn select(cfg: &Config) -> Result<Output, CliError> {
    require_no_csv(cfg, "select")?;
    let eps = cfg.eps_or(0.01)?;
    let (frame, source) = load_frame(cfg)?;
    let spec = cfg.tau.clone().unwrap_or_else(|| "one".into());
    let tau = tau::parse(&spec, frame.space())?;
    let report = match &frame {
        Frame::Pc(f) => lyapunov_select(f, &tau, eps)?,
        Frame::Gen(f) => lyapunov_select(f, &tau, eps)?,
    };
    let serialized = report_json(&report);
    let target = frame.weighted_operator(&tau)?;
    let check = recheck(&frame, &serialized, &target)?;
    let bound = match frame {
        Frame::Pc(_) => 1e-10 * (1.0 + target.operator_norm()),
        Frame::Gen(_) => 2.0 * eps,
    };
    check_bound("select error", check["error"].as_f64().unwrap_or(f64::NAN), bound)?;
    Ok(Output {
        body: json!({
            "frame": frame.describe(&source),
            "params": {"tau": spec, "eps": eps},
            "error_bound": bound,
            "report": serialized,
            "recheck": check,
            "quantization": report.quantization,
        }),
        table: None,
    })
}

fn bisect_one(frame: &Frame, tau0: f64, eps: f64, full: &HermitianOp) -> Result<(SelectionReport, Value, Value), CliError> {
    let report = match frame {
        Frame::Pc(f) => dyadic_bisect(f, tau0, eps)?,
        Frame::Gen(f) => dyadic_bisect(f, tau0, eps)?,
    };
    let serialized = report_json(&report);
    let check = recheck(frame, &serialized, &full.scale(tau0))?;
    check_bound("bisect error", check["error"].as_f64().unwrap_or(f64::NAN), eps)?;
    check_bound(
        "bisect measure",
        check["measure"].as_f64().unwrap_or(f64::NAN),
        tau0 * frame.space().total_measure() + 1e-12,
    )?;
    if let Some(n) = report.nodes.iter().find(|n| !n.holds()) {
        return Err(CliError::guarantee(format!("node certificate '{}' does not hold", n.word)));
    }
    Ok((report, serialized, check))
}

fn bisect(cfg: &Config) -> Result<Output, CliError> {
    let eps = cfg.eps_or(0.01)?;
    let sweep = Config::flag(cfg.sweep);
    let tau0 = if sweep { None } else { Some(cfg.tau0()?) };
    if !sweep {
        require_no_csv(cfg, "bisect")?;
    }
    let (frame, source) = load_frame(cfg)?;
    let full = frame.full_operator()?;
    if let Some(tau0) = tau0 {
        let (report, serialized, check) = bisect_one(&frame, tau0, eps, &full)?;
        return Ok(Output {
            body: json!({
                "frame": frame.describe(&source),
                "params": {"tau0": tau0, "eps": eps},
                "report": serialized,
                "recheck": check,
                "nodes": report.nodes,
            }),
            table: None,
        });
    }
    let runs: Vec<(f64, SelectionReport, Value, Value)> = SWEEP_TAU0
        .par_iter()
        .map(|&t| bisect_one(&frame, t, eps, &full).map(|(r, s, c)| (t, r, s, c)))
        .collect::<Result<_, _>>()?;
    let rows = runs
        .iter()
        .map(|(t, r, _, _)| vec![t.to_string(), eps.to_string(), r.achieved_error.to_string(), r.measure.to_string()])
        .collect();
    let entries: Vec<Value> = runs
        .iter()
        .map(|(t, r, s, c)| json!({"tau0": t, "report": s, "recheck": c, "node_count": r.nodes.len()}))
        .collect();
    Ok(Output {
        body: json!({"frame": frame.describe(&source), "params": {"eps": eps, "sweep": SWEEP_TAU0}, "runs": entries}),
        table: Some(Table { header: vec!["tau0", "eps", "error", "measure"], rows }),
    })
}

fn budget(cfg: &Config) -> Result<Output, CliError> {
    require_no_csv(cfg, "budget")?;
    let eps = cfg.eps_or(0.05)?;
    let (frame, source) = load_frame(cfg)?;
    let spec = cfg.tau.clone().ok_or_else(|| CliError::validation("--tau is required"))?;
    let tau = tau::parse(&spec, frame.space())?;
    let report = match &frame {
        Frame::Pc(f) => budget_select(f, &tau, eps)?,
        Frame::Gen(f) => budget_select(f, &tau, eps)?,
    };
    let serialized = report_json(&report);
    let check = recheck(&frame, &serialized, &frame.weighted_operator(&tau)?)?;
    let allowance = report.budget.unwrap_or(f64::INFINITY) + 1e-9;
    check_bound("budget error", check["error"].as_f64().unwrap_or(f64::NAN), eps)?;
    check_bound("budget measure", check["measure"].as_f64().unwrap_or(f64::NAN), allowance)?;
    Ok(Output {
        body: json!({
            "frame": frame.describe(&source),
            "params": {"tau": spec, "eps": eps},
            "report": serialized,
            "recheck": check,
            "node_count": report.nodes.len(),
        }),
        table: None,
    })
}

fn quantize_cmd(cfg: &Config) -> Result<Output, CliError> {
    let eps = cfg.eps_or(0.05)?;
    let samples = cfg.n.unwrap_or(4);
    let (frame, source) = load_frame(cfg)?;
    let gen = match &frame {
        Frame::Gen(g) => g.clone(),
        Frame::Pc(f) => GenFrame::from_pcframe(f)?,
    };
    let (pc, cert) = quantize(&gen, eps)?;
    let mut rng = fixtures::rng(cfg.seed.unwrap_or(0));
    let mut sampled = Vec::with_capacity(samples);
    for _ in 0..samples {
        let tau = fixtures::random_steps(&mut rng, gen.layout().total(), 8);
        let err = gen.weighted_operator(&tau)?.sub(&pc.weighted_frame_operator(&tau)?)?.operator_norm();
        check_bound("sampled quantization error", err, eps)?;
        sampled.push(err);
    }
    let rows = cert
        .layers
        .iter()
        .map(|l| vec![l.layer.to_string(), l.cells.to_string(), l.measure.to_string()])
        .collect();
    Ok(Output {
        body: json!({
            "frame": frame.describe(&source),
            "params": {"eps": eps, "samples": samples},
            "cells": pc.len(),
            "certificate": {
                "requested_eps": cert.requested_eps,
                "internal_eps": cert.internal_eps,
                "cell_count": cert.cell_count,
                "pieces": cert.pieces,
                "max_depth": cert.max_depth,
                "layers": cert.layers,
                "max_deviation": cert.max_deviation,
                "integrated_bound": cert.integrated_bound,
            },
            "sampled_errors": sampled,
        }),
        table: Some(Table { header: vec!["layer", "cells", "measure"], rows }),
    })
}

fn bounds(cfg: &Config) -> Result<Output, CliError> {
    let (frame, source) = load_frame(cfg)?;
    let s = frame.full_operator()?;
    let (lower, upper) = s.extreme_eigenvalues();
    let table = if cfg.csv.is_some() {
        let rows = spectrum_rows(&s).into_iter().map(|r| vec![r.index.to_string(), r.eigenvalue.to_string()]).collect();
        Some(Table { header: vec!["index", "eigenvalue"], rows })
    } else {
        None
    };
    Ok(Output { body: json!({"frame": frame.describe(&source), "lower": lower, "upper": upper}), table })
}

fn halving_gap(cfg: &Config) -> Result<Output, CliError> {
    let d = Config::positive(cfg.d, 512, "d")?;
    let (frame, source) = if cfg.frame.is_some() || cfg.fixture.as_deref().is_some_and(|f| f != "moving-average") {
        load_frame(cfg)?
    } else {
        let cells = Config::positive(cfg.cells, 12, "cells")?;
        (Frame::Pc(fixtures::moving_average_frame(d, cells)), "moving-average".to_string())
    };
    let Frame::Pc(pc) = &frame else {
        return Err(CliError::validation("halving-gap needs a piecewise-constant frame"));
    };
    let gap = halving_gap_exhaustive(pc, 24)?;
    let interleaved = if source == "moving-average" {
        interleaved_errors(&fixtures::moving_average_genframe(d), 4..=9)?
    } else {
        Vec::new()
    };
    let decreasing = interleaved.windows(2).all(|w| w[1].1 < w[0].1);
    let rows = interleaved.iter().map(|(n, e)| vec![n.to_string(), e.to_string()]).collect();
    Ok(Output {
        body: json!({
            "frame": frame.describe(&source),
            "min_error": gap.error,
            "argmin": gap.subset,
            "interleaved": interleaved.iter().map(|(n, e)| json!({"cells": n, "error": e})).collect::<Vec<_>>(),
            "interleaved_strictly_decreasing": decreasing,
        }),
        table: Some(Table { header: vec!["cells", "error"], rows }),
    })
}

fn aw(cfg: &Config) -> Result<Output, CliError> {
    if Config::flag(cfg.sweep) {
        let n = Config::positive(cfg.n, 100, "n")?;
        let d = Config::positive(cfg.d, 8, "d")?;
        let sweep = aw_epsilon_sweep(&SWEEP_NORMS, n, d, SWEEP_SEEDS)?;
        let rows = sweep
            .points
            .iter()
            .map(|p| vec![p.max_norm_sq.to_string(), p.effective_max_norm_sq.to_string(), p.mean_error.to_string()])
            .collect();
        return Ok(Output {
            body: json!({"params": {"n": n, "d": d, "seeds": SWEEP_SEEDS}, "sweep": sweep}),
            table: Some(Table { header: vec!["max_norm_sq", "effective_max_norm_sq", "mean_error"], rows }),
        });
    }
    require_no_csv(cfg, "aw")?;
    let n = Config::positive(cfg.n, 12, "n")?;
    let d = Config::positive(cfg.d, 3, "d")?;
    let max_norm_sq = cfg.max_norm_sq.unwrap_or(0.1);
    if !(max_norm_sq > 0.0 && max_norm_sq.is_finite()) {
        return Err(CliError::validation(format!("--max-norm-sq must be positive, got {max_norm_sq}")));
    }
    let seed = cfg.seed.unwrap_or(0);
    let strategy: Strategy = cfg.strategy.as_deref().unwrap_or("greedy").parse()?;
    let oracle = Config::flag(cfg.oracle);
    if oracle && n > 24 {
        return Err(CliError::validation(format!("--oracle enumerates 2^n subsets and needs n ≤ 24, got {n}")));
    }
    let (vectors, weights) = fixtures::random_bessel_instance(n, d, max_norm_sq, seed);
    let h = aw_subset_heuristic(&vectors, &weights, strategy, seed)?;
    let mut body = json!({
        "params": {"n": n, "d": d, "max_norm_sq": max_norm_sq, "seed": seed, "strategy": strategy.name()},
        "heuristic": {"strategy": strategy.name(), "error": h.error, "subset": h.subset},
        "heuristic_error": h.error,
    });
    body[format!("{}_error", strategy.name())] = json!(h.error);
    if oracle {
        let o = aw_subset_exhaustive(&vectors, &weights, 24)?;
        if h.error < o.error {
            return Err(CliError::guarantee(format!("heuristic error {} below exhaustive minimum {}", h.error, o.error)));
        }
        body["oracle"] = json!({"error": o.error, "subset": o.subset});
        body["oracle_error"] = json!(o.error);
        body["gap"] = json!(h.error - o.error);
    }
    Ok(Output { body, table: None })
}

fn load_density(cfg: &Config) -> Result<(OperatorDensity, String), CliError> {
    let fixture = cfg.fixture.clone().unwrap_or_else(|| "diag-linear".into());
    let density = match fixture.as_str() {
        "diag-linear" => OperatorDensity::unit(Arc::new(DiagLinear))?,
        "rademacher" => rademacher_density(Config::positive(cfg.d, 16, "d")?, cfg.resolution.unwrap_or(1024))?,
        "random" => {
            let cells = Config::positive(cfg.cells, 16, "cells")?;
            let d = Config::positive(cfg.d, 3, "d")?;
            let mut rng = fixtures::rng(cfg.seed.unwrap_or(0));
            let measures: Vec<f64> = (0..cells).map(|_| rng.random_range(0.1..1.0)).collect();
            let values = (0..cells).map(|_| fixtures::random_psd(&mut rng, d, 2, false)).collect();
            OperatorDensity::new(MeasureSpace::from_measures(&measures)?, values)?
        }
        "rank-one" => {
            let d = Config::positive(cfg.d, 16, "d")?;
            OperatorDensity::rank_one(&fixtures::moving_average_frame(d, Config::positive(cfg.cells, d, "cells")?))
        }
        other => {
            return Err(CliError::validation(format!(
                "unknown density fixture '{other}' (expected diag-linear, rademacher, random or rank-one)"
            )))
        }
    };
    Ok((density, fixture))
}

fn povm_select_cmd(cfg: &Config) -> Result<Output, CliError> {
    require_no_csv(cfg, "povm-select")?;
    let eps = cfg.eps_or(0.01)?;
    let (density, source) = load_density(cfg)?;
    let spec = cfg.tau.clone().unwrap_or_else(|| "const:0.5".into());
    let tau = tau::parse(&spec, density.space())?;
    let report = povm_select(&density, &tau, eps)?;
    let serialized = report_json(&report);
    let target = weighted_density_operator(&density, &tau)?;
    let check = if density.generator().is_some() {
        let (space, sel) = split_layout(density.layout(), &parse_intervals(&serialized)?)?;
        povm_recheck(&density, &space, &sel, &target)?
    } else {
        let sel = parse_selection(&serialized)?;
        povm_recheck(&density, density.space(), &sel, &target)?
    };
    if (check.error - report.achieved_error).abs() > RECHECK_TOLERANCE {
        return Err(CliError::guarantee(format!(
            "recheck error {} disagrees with reported {}",
            check.error, report.achieved_error
        )));
    }
    let bound = if density.generator().is_some() { 2.0 * eps } else { 1e-10 * (1.0 + target.operator_norm()) };
    check_bound("povm-select error", check.error, bound)?;
    let bessel = povm_evaluate(&density, &Selection::full(density.space()))?.operator_norm();
    Ok(Output {
        body: json!({
            "density": {"source": source, "cells": density.space().len(), "dimension": density.dim(), "bessel_bound": bessel},
            "params": {"tau": spec, "eps": eps},
            "error_bound": bound,
            "report": serialized,
            "recheck": {"error": check.error, "measure": check.measure, "agrees": true},
        }),
        table: None,
    })
}

fn probe_table(p: &ProbeReport) -> Table {
    Table {
        header: vec!["set", "measure", "error"],
        rows: p.rows.iter().map(|r| vec![r.set.clone(), r.measure.to_string(), r.error.to_string()]).collect(),
    }
}

fn rademacher(cfg: &Config) -> Result<Output, CliError> {
    let d = Config::positive(cfg.d, 16, "d")?;
    let resolution = cfg.resolution.unwrap_or(1024);
    let p = rademacher_probe(d, resolution, cfg.search_budget.unwrap_or(32), cfg.seed.unwrap_or(0))?;
    check_bound("‖Φ(X) − I‖", p.full_identity_deviation, 1e-12)?;
    check_bound("deviation from the exact formula", p.max_formula_deviation, 1e-12)?;
    let table = probe_table(&p);
    Ok(Output { body: json!({"probe": p}), table: Some(table) })
}

fn gallery(cfg: &Config) -> Result<Output, CliError> {
    require_no_csv(cfg, "gallery")?;
    let d = Config::positive(cfg.d, 512, "d")?;
    let f2 = Frame::Pc(fixtures::moving_average_frame(d, d));
    let full = f2.full_operator()?;
    let (lower, upper) = full.extreme_eigenvalues();
    let analytic = 4.0 / std::f64::consts::PI.powi(2);
    let (report, serialized, check) = bisect_one(&f2, 1.0 / 3.0, 0.01, &full)?;
    let coarse = fixtures::moving_average_frame(d, 12);
    let gap = halving_gap_exhaustive(&coarse, 24)?;
    let interleaved = interleaved_errors(&fixtures::moving_average_genframe(d), 4..=9)?;
    let probe = rademacher_probe(16, 1024, cfg.search_budget.unwrap_or(32), cfg.seed.unwrap_or(0))?;
    Ok(Output {
        body: json!({
            "moving_average": {
                "dimension": d,
                "bounds": {"lower": lower, "upper": upper, "analytic_upper": analytic},
                "bisect": {"tau0": 1.0 / 3.0, "eps": 0.01, "report": serialized, "recheck": check, "node_count": report.nodes.len()},
                "halving_gap": {"cells": 12, "min_error": gap.error, "argmin": gap.subset},
                "interleaved": interleaved.iter().map(|(n, e)| json!({"cells": n, "error": e})).collect::<Vec<_>>(),
            },
            "rademacher": {
                "full_identity_deviation": probe.full_identity_deviation,
                "max_formula_deviation": probe.max_formula_deviation,
                "best_set": probe.best_set,
                "best_error": probe.best_error,
                "sets": probe.rows.len(),
            },
        }),
        table: None,
    })
}

pub fn dispatch(name: &str, cfg: &Config) -> Result<Output, CliError> {
    match name {
        "select" => select(cfg),
        "bisect" => bisect(cfg),
        "budget" => budget(cfg),
        "quantize" => quantize_cmd(cfg),
        "bounds" => bounds(cfg),
        "halving-gap" => halving_gap(cfg),
        "aw" => aw(cfg),
        "povm-select" => povm_select_cmd(cfg),
        "rademacher" => rademacher(cfg),
        "gallery" => gallery(cfg),
        other => Err(CliError::validation(format!("unknown command {other}"))),
    }
}

/// Writes the JSON report (stdout or `--out`) and the CSV table (`--csv`).
pub fn emit(name: &str, cfg: &Config, output: Output) -> Result<(), CliError> {
    let mut doc = serde_json::Map::new();
    doc.insert("schema".into(), json!(1));
    doc.insert("command".into(), json!(name));
    if !Config::flag(cfg.deterministic) {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        doc.insert("timestamp".into(), json!(now));
    }
    if let Value::Object(body) = output.body {
        doc.extend(body);
    }
    let text = serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON values serialize") + "\n";
    match &cfg.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?,
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
                if e.kind() != std::io::ErrorKind::BrokenPipe {
                    return Err(CliError::validation(format!("cannot write to stdout: {e}")));
                }
            }
        }
    }
    if let (Some(path), Some(table)) = (&cfg.csv, output.table) {
        let io = |e: csv::Error| CliError::validation(format!("cannot write {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&table.header).map_err(io)?;
        for row in table.rows {
            w.write_record(&row).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::validation(format!("cannot write {}: {e}", path.display())))?;
    }
    Ok(())
}
