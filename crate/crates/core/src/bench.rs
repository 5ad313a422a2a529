//! Complexity benchmark: honest elections with n ballots and |L| = n,
//! recording canonical operation counts and wall time per backend.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::protocol::{generate_scenario, Backend, ElectionConfig, ScenarioSpec};
use crate::tally::tally;

pub const CSV_HEADER: &str = "backend,n,roll,pet_count,hash_eval_count,wall_time_ms,seed";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub backend: Backend,
    pub n: usize,
    pub roll: usize,
    pub pet_count: u64,
    pub hash_eval_count: u64,
    pub wall_time_ms: u64,
    pub seed: u64,
}

impl BenchRow {
    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.backend, self.n, self.roll, self.pet_count, self.hash_eval_count, self.wall_time_ms, self.seed
        )
    }

    /// The count that grows with the backend's weeding work.
    pub fn work(&self) -> u64 {
        match self.backend {
            Backend::Quadratic => self.pet_count,
            Backend::Linear | Backend::SmithWeber => self.hash_eval_count,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub backends: Vec<Backend>,
    pub seed: u64,
    pub group_bits: u64,
    pub threshold: usize,
    pub talliers: usize,
    pub canonical: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![50, 100, 200, 400],
            backends: vec![Backend::Quadratic, Backend::Linear],
            seed: 0,
            group_bits: 64,
            threshold: 2,
            talliers: 3,
            canonical: true,
        }
    }
}

/// One benchmark cell: `n` honest ballots against a roll of `n`.
pub fn bench_cell(config: &BenchConfig, backend: Backend, n: usize) -> Result<BenchRow> {
    let mut election = ElectionConfig::new(format!("bench-{backend}-{n}"), &["a", "b"], backend, config.seed);
    election.group_bits = config.group_bits;
    election.threshold = config.threshold;
    election.talliers = config.talliers;
    election.canonical = config.canonical;
    let mut scenario = generate_scenario(&election, ScenarioSpec::new(n, 0, 0, 0))?;
    let start = Instant::now();
    let outcome = tally(&mut scenario.election)?;
    let wall_time_ms = start.elapsed().as_millis() as u64;
    Ok(BenchRow {
        backend,
        n,
        roll: n,
        pet_count: outcome.result.counters.pet_count,
        hash_eval_count: outcome.result.counters.hash_eval_count,
        wall_time_ms,
        seed: config.seed,
    })
}

/// Runs every (backend, n) cell sequentially, calling `on_row` as rows
/// complete.
pub fn run_bench(config: &BenchConfig, mut on_row: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &backend in &config.backends {
        for &n in &config.sizes {
            let row = bench_cell(config, backend, n)?;
            on_row(&row);
            rows.push(row);
        }
    }
    Ok(rows)
}

pub fn write_csv(rows: &[BenchRow], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(out, "{}", r.csv())?;
    }
    Ok(())
}

/// Least-squares slope of ln(y) against ln(x), skipping non-positive
/// points. `None` with fewer than two usable points.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Work-count slope per backend over `rows`.
pub fn slopes(rows: &[BenchRow]) -> Vec<(Backend, Option<f64>)> {
    let mut backends: Vec<Backend> = rows.iter().map(|r| r.backend).collect();
    backends.dedup();
    backends
        .into_iter()
        .map(|b| {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.backend == b)
                .map(|r| (r.n as f64, r.work() as f64))
                .collect();
            (b, loglog_slope(&pts))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_laws() {
        let sq: Vec<(f64, f64)> = [1.0, 2.0, 4.0, 8.0].iter().map(|&x| (x, 3.0 * x * x)).collect();
        assert!((loglog_slope(&sq).unwrap() - 2.0).abs() < 1e-12);
        let lin: Vec<(f64, f64)> = [5.0, 10.0, 20.0].iter().map(|&x| (x, 3.0 * x)).collect();
        assert!((loglog_slope(&lin).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(loglog_slope(&[(1.0, 1.0)]), None);
        assert_eq!(loglog_slope(&[(0.0, 0.0), (1.0, 1.0)]), None);
    }

    #[test]
    fn small_cells_follow_formulas() {
        let config = BenchConfig {
            sizes: vec![0, 4, 8],
            ..BenchConfig::default()
        };
        let rows = run_bench(&config, |_| {}).unwrap();
        for r in &rows {
            let n = r.n as u64;
            match r.backend {
                Backend::Quadratic => assert_eq!(r.pet_count, n * n.saturating_sub(1) / 2 + n * n),
                _ => assert_eq!(r.hash_eval_count, 3 * n),
            }
        }
        let mut csv = Vec::new();
        write_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with(CSV_HEADER));
        assert!(text.contains("quadratic,0,0,0,0,"));
    }
}
