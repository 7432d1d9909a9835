//! Benchmark runs over scenario sets and their CSV reports.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{leader_follower_plan, product_oracle_plan};
use crate::dual::DualRoadmap;
use crate::error::{Error, Result};
use crate::format::{hash_compatibility, Compatibility};
use crate::kinematics::RobotModel;
use crate::planner::{plan, PlanFailure, PlanOptions, PlanRequest, Trajectory};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlannerKind {
    Dual,
    LeaderFollower,
    ProductOracle,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::Dual, PlannerKind::LeaderFollower, PlannerKind::ProductOracle];

    pub fn name(self) -> &'static str {
        match self {
            PlannerKind::Dual => "dual",
            PlannerKind::LeaderFollower => "leader-follower",
            PlannerKind::ProductOracle => "product-oracle",
        }
    }

    /// Caveat printed next to the planner in reports.
    pub fn note(self) -> &'static str {
        match self {
            PlannerKind::Dual => "",
            PlannerKind::LeaderFollower => "baseline; follower is a discrete neighbor-descent stand-in for a local QP follower",
            PlannerKind::ProductOracle => "oracle; materializes the product graph",
        }
    }

    pub fn run(self, dual: &DualRoadmap, model: &RobotModel, req: &PlanRequest) -> std::result::Result<Trajectory, PlanFailure> {
        match self {
            PlannerKind::Dual => plan(dual, model, req),
            PlannerKind::LeaderFollower => leader_follower_plan(dual, model, req),
            PlannerKind::ProductOracle => product_oracle_plan(dual, model, req),
        }
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PlannerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Input(format!("unknown planner {s:?} (expected dual, leader-follower or product-oracle)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryRow {
    pub scenario: String,
    pub planner: PlannerKind,
    pub success: bool,
    pub time_s: f64,
    pub cost: Option<f64>,
    pub pairs_expanded: u64,
    pub fallback_used: u32,
    pub failure: Option<String>,
}

/// Timing columns cover successful plans only.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub planner: PlannerKind,
    pub queries: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_s: Option<f64>,
    pub median_s: Option<f64>,
    pub p10_s: Option<f64>,
    pub p90_s: Option<f64>,
    pub mean_cost: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramRow {
    pub planner: PlannerKind,
    pub bin_lo_s: f64,
    pub bin_hi_s: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub queries: Vec<QueryRow>,
    pub aggregates: Vec<AggregateRow>,
    pub histogram: Vec<HistogramRow>,
}

/// Linear-interpolated percentile of sorted data, `q` in [0, 1].
pub fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    let last = sorted.len().checked_sub(1)?;
    let pos = q.clamp(0.0, 1.0) * last as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Histogram edges: 0, then four bins per decade from 0.1 ms to 100 s.
pub fn histogram_edges() -> Vec<f64> {
    let mut e = vec![0.0];
    e.extend((0..=24).map(|k| 10f64.powf(-4.0 + k as f64 / 4.0)));
    e
}

fn aggregate(planner: PlannerKind, rows: &[&QueryRow]) -> AggregateRow {
    let mut times: Vec<f64> = rows.iter().filter(|r| r.success).map(|r| r.time_s).collect();
    times.sort_by(f64::total_cmp);
    let costs: Vec<f64> = rows.iter().filter_map(|r| r.cost).collect();
    let successes = times.len();
    AggregateRow {
        planner,
        queries: rows.len(),
        successes,
        success_rate: if rows.is_empty() { 0.0 } else { successes as f64 / rows.len() as f64 },
        mean_s: mean(&times),
        median_s: percentile(&times, 0.5),
        p10_s: percentile(&times, 0.1),
        p90_s: percentile(&times, 0.9),
        mean_cost: mean(&costs),
    }
}

fn run_one(dual: &DualRoadmap, model: &RobotModel, s: &Scenario, planner: PlannerKind, options: &PlanOptions) -> QueryRow {
    let mut row = QueryRow {
        scenario: s.name.clone(),
        planner,
        success: false,
        time_s: 0.0,
        cost: None,
        pairs_expanded: 0,
        fallback_used: 0,
        failure: None,
    };
    if let Compatibility::Mismatch { field, .. } = hash_compatibility(&dual.compat_meta(), &s.compat_meta()) {
        row.failure = Some(format!("Incompatible({field})"));
        return row;
    }
    let occupancy = match s.occupancy() {
        Ok(o) => o,
        Err(e) => {
            row.failure = Some(format!("InvalidScenario({e})"));
            return row;
        }
    };
    let req = PlanRequest {
        start: s.start.clone(),
        target: s.target.clone(),
        occupancy,
        options: options.clone(),
    };
    let t = Instant::now();
    let res = planner.run(dual, model, &req);
    row.time_s = t.elapsed().as_secs_f64();
    match res {
        Ok(traj) => {
            row.success = true;
            row.cost = Some(traj.cost);
            row.pairs_expanded = traj.stats.search.pairs_expanded;
            row.fallback_used = traj.stats.search.fallback_used;
        }
        Err(f) => {
            row.pairs_expanded = f.stats.search.pairs_expanded;
            row.fallback_used = f.stats.search.fallback_used;
            row.failure = Some(f.kind.name().to_string());
        }
    }
    row
}

/// Runs every planner on every scenario. Queries fan out over the rayon
/// pool; rows come back ordered by scenario name, then planner. With
/// `deterministic`, wall-clock columns are zeroed and any time budget is
/// dropped so reruns are byte-identical.
pub fn run_bench(
    dual: &DualRoadmap,
    model: &RobotModel,
    scenarios: &[Scenario],
    planners: &[PlannerKind],
    options: &PlanOptions,
    deterministic: bool,
) -> Result<BenchReport> {
    if scenarios.is_empty() {
        return Err(Error::Input("benchmark needs at least one scenario".into()));
    }
    let mut options = options.clone();
    if deterministic {
        options.time_budget = None;
    }
    let options = &options;
    let mut planners = planners.to_vec();
    planners.sort();
    planners.dedup();
    let jobs: Vec<(&Scenario, PlannerKind)> =
        scenarios.iter().flat_map(|s| planners.iter().map(move |&p| (s, p))).collect();
    let mut queries: Vec<QueryRow> = jobs.par_iter().map(|&(s, p)| run_one(dual, model, s, p, options)).collect();
    if deterministic {
        for r in &mut queries {
            r.time_s = 0.0;
        }
    }
    queries.sort_by(|a, b| a.scenario.cmp(&b.scenario).then(a.planner.cmp(&b.planner)));

    let edges = histogram_edges();
    let mut aggregates = Vec::new();
    let mut histogram = Vec::new();
    for &p in &planners {
        let rows: Vec<&QueryRow> = queries.iter().filter(|r| r.planner == p).collect();
        aggregates.push(aggregate(p, &rows));
        for w in edges.windows(2) {
            let last = w[1] == *edges.last().unwrap();
            let count = rows
                .iter()
                .filter(|r| r.success && r.time_s >= w[0] && (r.time_s < w[1] || (last && r.time_s >= w[1])))
                .count();
            histogram.push(HistogramRow {
                planner: p,
                bin_lo_s: w[0],
                bin_hi_s: w[1],
                count,
            });
        }
    }
    Ok(BenchReport {
        queries,
        aggregates,
        histogram,
    })
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Input(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_default()
}

impl BenchReport {
    pub fn aggregate(&self, planner: PlannerKind) -> Option<&AggregateRow> {
        self.aggregates.iter().find(|a| a.planner == planner)
    }

    /// Per-query block, a blank line, then the aggregate block.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Input(format!("csv: {e}"));
        w.write_record(["scenario", "planner", "success", "time_s", "cost", "pairs_expanded", "fallback_used", "failure"])
            .map_err(csv_err)?;
        for r in &self.queries {
            w.write_record([
                r.scenario.clone(),
                r.planner.to_string(),
                r.success.to_string(),
                format!("{:.6}", r.time_s),
                opt(r.cost),
                r.pairs_expanded.to_string(),
                r.fallback_used.to_string(),
                r.failure.clone().unwrap_or_default(),
            ])
            .map_err(csv_err)?;
        }
        let mut out = into_string(w)?;
        out.push('\n');
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "planner",
            "queries",
            "successes",
            "success_rate",
            "mean_s",
            "median_s",
            "p10_s",
            "p90_s",
            "mean_cost",
            "note",
        ])
        .map_err(csv_err)?;
        for a in &self.aggregates {
            w.write_record([
                a.planner.to_string(),
                a.queries.to_string(),
                a.successes.to_string(),
                format!("{:.6}", a.success_rate),
                opt(a.mean_s),
                opt(a.median_s),
                opt(a.p10_s),
                opt(a.p90_s),
                opt(a.mean_cost),
                a.planner.note().to_string(),
            ])
            .map_err(csv_err)?;
        }
        out += &into_string(w)?;
        Ok(out)
    }

    pub fn histogram_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Input(format!("csv: {e}"));
        w.write_record(["planner", "bin_lo_s", "bin_hi_s", "count"]).map_err(csv_err)?;
        for h in &self.histogram {
            w.write_record([h.planner.to_string(), format!("{:e}", h.bin_lo_s), format!("{:e}", h.bin_hi_s), h.count.to_string()])
                .map_err(csv_err)?;
        }
        into_string(w)
    }

    pub fn write(&self, csv_path: &Path, histogram_path: &Path) -> Result<()> {
        std::fs::write(csv_path, self.to_csv()?).map_err(|e| Error::io(csv_path, e))?;
        std::fs::write(histogram_path, self.histogram_csv()?).map_err(|e| Error::io(histogram_path, e))
    }

    /// Fixed-width summary of the aggregate rows.
    pub fn summary(&self) -> String {
        let ms = |x: Option<f64>| x.map(|v| format!("{:.1}", v * 1e3)).unwrap_or_else(|| "-".into());
        let mut out = format!(
            "{:<16} {:>7} {:>9} {:>9} {:>9} {:>9} {:>9}\n",
            "planner", "queries", "success%", "mean ms", "p10 ms", "median ms", "p90 ms"
        );
        for a in &self.aggregates {
            out += &format!(
                "{:<16} {:>7} {:>9.1} {:>9} {:>9} {:>9} {:>9}\n",
                a.planner.name(),
                a.queries,
                100.0 * a.success_rate,
                ms(a.mean_s),
                ms(a.p10_s),
                ms(a.median_s),
                ms(a.p90_s)
            );
        }
        out
    }
}
