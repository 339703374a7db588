use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::npcfr::{Checkpoint, GameDistribution, PredictorParams};
use crate::regret::{cfr_solve, Algorithm, RegretPredictor, SolveConfig};
use crate::rng::{self, Stream};

use super::{ExperimentConfig, HarnessError};

/// One evaluated checkpoint of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: Algorithm,
    /// Index of the game within its seed's sample.
    pub game: usize,
    /// `eta` or `beta`; empty for point-mass distributions.
    pub game_param: Option<f64>,
    pub seed: u64,
    pub step: usize,
    pub nash_gap: f64,
    pub cce_gap: f64,
    pub efm: f64,
    /// Wall time of the whole trajectory. Kept out of `results.csv` so that
    /// file stays byte-identical across reruns.
    #[serde(skip)]
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub algorithm: Algorithm,
    pub game: usize,
    pub seed: u64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct EvalOutput {
    pub rows: Vec<ResultRow>,
    pub timings: Vec<CellTiming>,
}

/// Reads a checkpoint into a shareable predictor.
pub fn load_predictor(path: &Path) -> Result<Arc<PredictorParams>, HarnessError> {
    Ok(Arc::new(Checkpoint::load(path)?.params))
}

/// Runs one trajectory and returns its rows at `1, 2, 4, ..., steps`.
pub fn solve_one(
    dist: &GameDistribution,
    param: Option<f64>,
    algorithm: Algorithm,
    steps: usize,
    predictor: Option<Arc<PredictorParams>>,
) -> Result<Vec<ResultRow>, HarnessError> {
    let game = dist.instantiate(param)?;
    let mut cfg = SolveConfig::new(algorithm, steps).with_power_of_two_checkpoints();
    if algorithm.is_neural() {
        let p = predictor.ok_or_else(|| HarnessError::MissingCheckpoint(algorithm.to_string()))?;
        cfg = cfg.with_predictor(p as Arc<dyn RegretPredictor>);
    }
    let start = Instant::now();
    let trace = cfr_solve(&game, &cfg)?;
    let wall_time = start.elapsed().as_secs_f64();
    Ok(trace
        .evaluations()
        .iter()
        .map(|e| ResultRow {
            algorithm,
            game: 0,
            game_param: param,
            seed: 0,
            step: e.step,
            nash_gap: e.nash_gap,
            cce_gap: e.cce_gap,
            efm: e.efm,
            wall_time,
        })
        .collect())
}

/// Evaluates every algorithm on `samples` fresh games per seed.
///
/// Games come from the evaluation stream, so they never coincide with the
/// games a predictor was trained on under the same seed. Cells run in
/// parallel; rows come back in (algorithm, seed, game, step) order.
pub fn run_eval(cfg: &ExperimentConfig, predictor: Option<Arc<PredictorParams>>) -> Result<EvalOutput, HarnessError> {
    cfg.validate()?;
    let predictor = match predictor {
        Some(p) => Some(p),
        None => match &cfg.checkpoint {
            Some(path) if cfg.algorithms.iter().any(|a| a.is_neural()) => Some(load_predictor(path)?),
            _ => None,
        },
    };
    if let Some(a) = cfg.algorithms.iter().find(|a| a.is_neural()) {
        if predictor.is_none() {
            return Err(HarnessError::MissingCheckpoint(a.to_string()));
        }
    }
    let samples = cfg.samples();
    let steps = cfg.steps();
    let params: Vec<Vec<Option<f64>>> = cfg
        .seeds
        .iter()
        .map(|&seed| {
            let mut rng = rng::stream(seed, Stream::Evaluation);
            (0..samples).map(|_| cfg.distribution.sample_param(&mut rng)).collect()
        })
        .collect();
    let cells: Vec<(Algorithm, usize, u64, usize, Option<f64>)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| {
            cfg.seeds.iter().enumerate().flat_map({
                let params = &params;
                move |(si, &seed)| (0..samples).map(move |g| (a, si, seed, g, params[si][g]))
            })
        })
        .collect();

    let pool = rng::thread_pool();
    let results: Vec<Result<Vec<ResultRow>, HarnessError>> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(a, _, seed, g, p)| {
                let mut rows = solve_one(&cfg.distribution, p, a, steps, predictor.clone())?;
                for r in &mut rows {
                    r.seed = seed;
                    r.game = g;
                }
                Ok(rows)
            })
            .collect()
    });

    let mut out = EvalOutput::default();
    for (cell, rows) in cells.iter().zip(results) {
        let rows = rows?;
        out.timings.push(CellTiming {
            algorithm: cell.0,
            game: cell.3,
            seed: cell.2,
            seconds: rows.first().map_or(0.0, |r| r.wall_time),
        });
        out.rows.extend(rows);
    }
    Ok(out)
}

/// Best and final NashGap of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryMin {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub game: usize,
    pub game_param: Option<f64>,
    pub min_nash_gap: f64,
    pub final_nash_gap: f64,
}

/// Groups rows into trajectories by (algorithm, seed, game) and records
/// each trajectory's lowest and last NashGap, in first-appearance order.
pub fn trajectory_minima(rows: &[ResultRow]) -> Vec<TrajectoryMin> {
    let mut out: Vec<TrajectoryMin> = Vec::new();
    let mut index = std::collections::HashMap::new();
    for r in rows {
        let key = (r.algorithm, r.seed, r.game);
        match index.get(&key) {
            Some(&i) => {
                let t: &mut TrajectoryMin = &mut out[i];
                t.min_nash_gap = t.min_nash_gap.min(r.nash_gap);
                t.final_nash_gap = r.nash_gap;
            }
            None => {
                index.insert(key, out.len());
                out.push(TrajectoryMin {
                    algorithm: r.algorithm,
                    seed: r.seed,
                    game: r.game,
                    game_param: r.game_param,
                    min_nash_gap: r.nash_gap,
                    final_nash_gap: r.nash_gap,
                });
            }
        }
    }
    out
}
