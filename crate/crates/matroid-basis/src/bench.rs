//! Experiment harness: load or generate instances, run selected algorithms
//! over a size grid and seed list, persist ledgers/records/traces, and fit
//! the round-growth slope per (family, algorithm).

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{greedy_basis, run_algorithm, verify_basis, Algo, RunResult, StopReason};
use crate::config::AlgorithmConfig;
use crate::error::{Error, Result};
use crate::oracle::generate::GenSpec;
use crate::oracle::{MatroidInstance, MatroidSpec, MatroidView};
use crate::scheduler::RoundLedger;

/// Where an instance comes from: a `gen:` string, inline JSON, or a JSON file.
pub fn load_matroid(source: &str, n: usize, instance_seed: u64) -> Result<(String, MatroidInstance)> {
    if source.starts_with("gen:") {
        let g = GenSpec::parse(source)?;
        let m = g.build(n, mix(instance_seed, n as u64))?;
        return Ok((g.family.clone(), m));
    }
    let text = if source.trim_start().starts_with('{') {
        source.to_string()
    } else {
        std::fs::read_to_string(source)?
    };
    let spec = MatroidSpec::from_json(&text)?;
    let m = spec.build()?;
    let family = match &spec {
        MatroidSpec::Uniform { .. } => "uniform",
        MatroidSpec::Partition { .. } => "partition",
        MatroidSpec::Graphic { .. } => "graphic",
        MatroidSpec::Linear { .. } => "linear",
        MatroidSpec::DirectSum { .. } => "direct_sum",
    };
    Ok((family.to_string(), m))
}

fn mix(seed: u64, salt: u64) -> u64 {
    let mut h = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    h ^= h >> 30;
    h = h.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    h ^= h >> 27;
    h
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    /// `gen:` string, inline JSON object, or a path to a spec file.
    pub matroid: String,
    /// Ground-size grid for generators; an explicit instance runs once.
    pub sizes: Vec<usize>,
    pub algos: Vec<Algo>,
    pub seeds: Vec<u64>,
    pub instance_seed: u64,
    pub config: AlgorithmConfig,
    pub out: Option<PathBuf>,
    pub trace: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            matroid: "gen:uniform:r=n/4".into(),
            sizes: vec![256],
            algos: vec![Algo::Kuw, Algo::Main37],
            seeds: vec![0],
            instance_seed: 0,
            config: AlgorithmConfig::default(),
            out: None,
            trace: false,
        }
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<ExperimentSpec> {
        let spec: ExperimentSpec =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("experiment spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sizes.is_empty() {
            return Err(Error::Parse("size grid must be nonempty".into()));
        }
        if self.algos.is_empty() {
            return Err(Error::Parse("at least one algorithm required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Parse("at least one seed required".into()));
        }
        Ok(())
    }
}

/// One persisted run. Only valid runs are ever persisted; an invalid basis
/// aborts the experiment instead.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultRecord {
    pub family: String,
    pub n: usize,
    pub algo: String,
    pub seed: u64,
    pub rounds: u64,
    pub queries: u64,
    pub basis_size: usize,
    pub wall_ms: u64,
    pub stop_contract: usize,
    pub stop_delete: usize,
    pub stop_exhaust: usize,
    pub valid: bool,
    pub ledger: RoundLedger,
}

pub const CSV_HEADER: &str =
    "family,n,algo,seed,rounds,queries,basis_size,wall_ms,stop_contract,stop_delete,stop_exhaust";

impl ResultRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.family,
            self.n,
            self.algo,
            self.seed,
            self.rounds,
            self.queries,
            self.basis_size,
            self.wall_ms,
            self.stop_contract,
            self.stop_delete,
            self.stop_exhaust
        )
    }
}

/// Run one algorithm on one instance, oracle-check the output, and fold the
/// run into a record. Errors if the basis fails validation.
pub fn run_and_validate(
    family: &str,
    n: usize,
    algo: Algo,
    view: &MatroidView,
    cfg: &AlgorithmConfig,
    seed: u64,
) -> Result<(ResultRecord, RunResult)> {
    let started = Instant::now();
    let run = run_algorithm(algo, view, cfg, seed)?;
    let wall_ms = started.elapsed().as_millis() as u64;
    let valid = verify_basis(view, &run.basis) && run.basis.len() == greedy_basis(view).len();
    if !valid {
        return Err(Error::InvalidView(format!(
            "{algo:?} produced an invalid basis on {family} n={n} seed={seed}"
        )));
    }
    let count = |r: StopReason| run.stop_reasons.iter().filter(|&&x| x == r).count();
    let record = ResultRecord {
        family: family.to_string(),
        n,
        algo: algo.name().to_string(),
        seed,
        rounds: run.ledger.rounds,
        queries: run.ledger.total_queries,
        basis_size: run.basis.len(),
        wall_ms,
        stop_contract: count(StopReason::ContractReturn),
        stop_delete: count(StopReason::DeleteReturn),
        stop_exhaust: count(StopReason::Exhausted),
        valid,
        ledger: run.ledger.clone(),
    };
    Ok((record, run))
}

/// Run the whole grid. Grid cells execute concurrently with independent
/// ledgers; outputs are written by this single thread afterwards.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ResultRecord>> {
    spec.validate()?;
    let explicit_instance = !spec.matroid.starts_with("gen:");
    let sizes: Vec<usize> =
        if explicit_instance { vec![0] } else { spec.sizes.clone() };

    let mut instances = Vec::new();
    for &n in &sizes {
        let (family, m) = load_matroid(&spec.matroid, n, spec.instance_seed)?;
        let n_actual = m.ground_size();
        instances.push((family, n_actual, MatroidView::of(m)));
    }

    let mut cells = Vec::new();
    for (family, n, view) in &instances {
        for &algo in &spec.algos {
            for &seed in &spec.seeds {
                cells.push((family.clone(), *n, view.clone(), algo, seed));
            }
        }
    }

    let results: Result<Vec<(ResultRecord, RunResult)>> = cells
        .par_iter()
        .map(|(family, n, view, algo, seed)| {
            run_and_validate(family, *n, *algo, view, &spec.config, *seed)
        })
        .collect();
    let results = results?;

    if let Some(out) = &spec.out {
        std::fs::create_dir_all(out)?;
        write_records_csv(&out.join("records.csv"), results.iter().map(|(r, _)| r))?;
        write_records_jsonl(&out.join("records.jsonl"), results.iter().map(|(r, _)| r))?;
        if spec.trace {
            let traces = out.join("traces");
            std::fs::create_dir_all(&traces)?;
            for (rec, run) in &results {
                if run.peel_trace.is_empty() {
                    continue;
                }
                let name = format!("{}-n{}-{}-s{}.jsonl", rec.family, rec.n, rec.algo, rec.seed);
                let mut f = std::fs::File::create(traces.join(name))?;
                for p in &run.peel_trace {
                    writeln!(f, "{}", serde_json::to_string(p)?)?;
                }
            }
        }
    }
    Ok(results.into_iter().map(|(r, _)| r).collect())
}

pub fn write_records_csv<'a>(
    path: &Path,
    records: impl Iterator<Item = &'a ResultRecord>,
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{CSV_HEADER}")?;
    for r in records {
        writeln!(f, "{}", r.csv_line())?;
    }
    Ok(())
}

pub fn write_records_jsonl<'a>(
    path: &Path,
    records: impl Iterator<Item = &'a ResultRecord>,
) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for r in records {
        writeln!(f, "{}", serde_json::to_string(r)?)?;
    }
    Ok(())
}

pub fn read_records_jsonl(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        out.push(serde_json::from_str(line)?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Summaries
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SummaryRow {
    pub family: String,
    pub algo: String,
    /// (n, mean rounds) sorted by n.
    pub points: Vec<(usize, f64)>,
    /// Least-squares slope of log rounds vs log n; None below two sizes.
    pub slope: Option<f64>,
}

/// Group records by (family, algorithm), average rounds per size, and fit the
/// log-log slope.
pub fn summarize(records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(String, String), BTreeMap<usize, (f64, usize)>> = BTreeMap::new();
    for r in records {
        let cell = groups
            .entry((r.family.clone(), r.algo.clone()))
            .or_default()
            .entry(r.n)
            .or_insert((0.0, 0));
        cell.0 += r.rounds as f64;
        cell.1 += 1;
    }
    groups
        .into_iter()
        .map(|((family, algo), by_n)| {
            let points: Vec<(usize, f64)> =
                by_n.into_iter().map(|(n, (sum, c))| (n, sum / c as f64)).collect();
            let slope = log_log_slope(&points);
            SummaryRow { family, algo, points, slope }
        })
        .collect()
}

pub fn log_log_slope(points: &[(usize, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(n, r)| *n > 0 && *r > 0.0)
        .map(|(n, r)| ((*n as f64).ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|(x, _)| x).sum();
    let sy: f64 = pts.iter().map(|(_, y)| y).sum();
    let sxx: f64 = pts.iter().map(|(x, _)| x * x).sum();
    let sxy: f64 = pts.iter().map(|(x, y)| x * y).sum();
    let denom = m * sxx - sx * sx;
    if denom.abs() < 1e-12 {
        return None;
    }
    Some((m * sxy - sx * sy) / denom)
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("family,algo,n,mean_rounds,slope\n");
    for row in rows {
        for (n, rounds) in &row.points {
            let slope = row.slope.map_or(String::new(), |s| format!("{s:.4}"));
            out.push_str(&format!("{},{},{},{:.2},{}\n", row.family, row.algo, n, rounds, slope));
        }
    }
    out
}

/// Plot-ready JSON: one series per (family, algorithm).
pub fn summary_plot_json(rows: &[SummaryRow]) -> serde_json::Value {
    serde_json::json!({
        "series": rows.iter().map(|r| serde_json::json!({
            "family": r.family,
            "algo": r.algo,
            "points": r.points,
            "slope": r.slope,
        })).collect::<Vec<_>>()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_produces_one_record_per_cell() {
        let spec = ExperimentSpec {
            matroid: "gen:uniform:r=n/4".into(),
            sizes: vec![32, 64],
            algos: vec![Algo::Kuw, Algo::Main37],
            seeds: vec![1, 2, 3],
            ..Default::default()
        };
        let records = run_experiment(&spec).unwrap();
        assert_eq!(records.len(), 12);
        assert!(records.iter().all(|r| r.valid));
    }

    #[test]
    fn unknown_family_fails_with_name() {
        let spec =
            ExperimentSpec { matroid: "gen:gammoid:n=4".into(), ..Default::default() };
        let err = run_experiment(&spec).unwrap_err();
        assert!(format!("{err}").contains("gammoid"));
    }

    #[test]
    fn summary_round_trips_through_jsonl() {
        let spec = ExperimentSpec {
            matroid: "gen:partition:block_size=4,cap=1".into(),
            sizes: vec![32, 128],
            algos: vec![Algo::Kuw],
            seeds: vec![1, 2],
            ..Default::default()
        };
        let records = run_experiment(&spec).unwrap();
        let dir = std::env::temp_dir().join(format!("mb-bench-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("records.jsonl");
        write_records_jsonl(&path, records.iter()).unwrap();
        let back = read_records_jsonl(&path).unwrap();
        assert_eq!(summarize(&records), summarize(&back));
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn slope_requires_two_sizes() {
        let points = vec![(64usize, 16.0)];
        assert!(log_log_slope(&points).is_none());
        let two = vec![(16usize, 8.0), (256, 32.0)];
        let s = log_log_slope(&two).unwrap();
        assert!((s - 0.5).abs() < 1e-9);
    }

    #[test]
    fn empty_records_summarize_to_empty() {
        assert!(summarize(&[]).is_empty());
    }

    #[test]
    fn inline_instance_source() {
        let (family, m) =
            load_matroid(r#"{"family":"uniform","n":6,"r":2}"#, 0, 0).unwrap();
        assert_eq!(family, "uniform");
        assert_eq!(m.ground_size(), 6);
    }
}
