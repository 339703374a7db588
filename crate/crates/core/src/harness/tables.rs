use serde::Serialize;

use crate::regret::Algorithm;

use super::eval::{trajectory_minima, ResultRow, TrajectoryMin};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdRow {
    pub algorithm: Algorithm,
    pub games: usize,
    /// Fraction of trajectories whose minimum NashGap is at most each threshold.
    pub fractions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdTable {
    pub thresholds: Vec<f64>,
    pub rows: Vec<ThresholdRow>,
}

impl ThresholdTable {
    pub fn fraction(&self, algorithm: Algorithm, threshold: f64) -> Option<f64> {
        let col = self.thresholds.iter().position(|&t| t == threshold)?;
        self.rows.iter().find(|r| r.algorithm == algorithm).map(|r| r.fractions[col])
    }
}

/// Per-algorithm summary for point-mass experiments.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BestRow {
    pub algorithm: Algorithm,
    pub games: usize,
    pub best_nash_gap: f64,
    pub median_min_nash_gap: f64,
    pub median_final_nash_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tables {
    pub threshold: ThresholdTable,
    pub best: Vec<BestRow>,
}

impl Tables {
    pub fn build(rows: &[ResultRow], thresholds: &[f64]) -> Self {
        Tables {
            threshold: build_threshold_table(rows, thresholds),
            best: build_best_table(rows),
        }
    }
}

fn by_algorithm(minima: &[TrajectoryMin]) -> Vec<(Algorithm, Vec<&TrajectoryMin>)> {
    let mut groups: Vec<(Algorithm, Vec<&TrajectoryMin>)> = Vec::new();
    for m in minima {
        match groups.iter_mut().find(|(a, _)| *a == m.algorithm) {
            Some((_, g)) => g.push(m),
            None => groups.push((m.algorithm, vec![m])),
        }
    }
    groups
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn build_threshold_table(rows: &[ResultRow], thresholds: &[f64]) -> ThresholdTable {
    let minima = trajectory_minima(rows);
    let rows = by_algorithm(&minima)
        .into_iter()
        .map(|(algorithm, group)| ThresholdRow {
            algorithm,
            games: group.len(),
            fractions: thresholds
                .iter()
                .map(|&t| group.iter().filter(|m| m.min_nash_gap <= t).count() as f64 / group.len() as f64)
                .collect(),
        })
        .collect();
    ThresholdTable {
        thresholds: thresholds.to_vec(),
        rows,
    }
}

pub fn build_best_table(rows: &[ResultRow]) -> Vec<BestRow> {
    let minima = trajectory_minima(rows);
    by_algorithm(&minima)
        .into_iter()
        .map(|(algorithm, group)| BestRow {
            algorithm,
            games: group.len(),
            best_nash_gap: group.iter().map(|m| m.min_nash_gap).fold(f64::INFINITY, f64::min),
            median_min_nash_gap: median(group.iter().map(|m| m.min_nash_gap).collect()),
            median_final_nash_gap: median(group.iter().map(|m| m.final_nash_gap).collect()),
        })
        .collect()
}
