//! Seeded replications, aggregation and result files.
//!
//! Replication `i` of a scenario runs with seed `base + i`. With `parallel`
//! set the replications run on the rayon pool; results are always merged in
//! index order so the files do not depend on scheduling.
//!
//! Files written per scenario into the output directory:
//!
//! * `<name>_reps.csv`: one row per protocol and replication;
//! * `<name>_flows.csv`: one row per protocol, replication and flow;
//! * `<name>_summary.csv`: per protocol, one row per flow plus an `all` row;
//! * `<name>_summary.json`: the same summary with the oracle solutions.
//!
//! Summary numbers are means and sample standard deviations over the rows
//! of `<name>_reps.csv` and `<name>_flows.csv`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::engine::{self, FlowStats, SimResult};
use crate::error::{Result, SimError};
use crate::metrics::{self, mean, std_dev};
use crate::oracle::{self, PfSolution, RateModel};
use crate::protocol::{make_macs, Protocol};
use crate::topology::Topology;

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub reps: usize,
    /// Replaces the scenario's seed base.
    pub seed: Option<u64>,
    pub duration_s: Option<f64>,
    /// Protocols to compare; empty means the scenario's own protocol.
    pub protocols: Vec<Protocol>,
    pub parallel: bool,
    /// Also write `<name>_<protocol>_rep<i>.log` event logs.
    pub event_logs: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            reps: crate::config::DEFAULT_REPLICATIONS,
            seed: None,
            duration_s: None,
            protocols: Vec::new(),
            parallel: false,
            event_logs: false,
        }
    }
}

/// Runs `reps` replications of one protocol with seeds `base_seed + i`.
pub fn run_replications(
    cfg: &ScenarioConfig,
    topology: &Topology,
    protocol: Protocol,
    reps: usize,
    base_seed: u64,
    parallel: bool,
    event_log: bool,
) -> Vec<SimResult> {
    let params = cfg.protocol_params();
    let one = |i: usize| {
        let mut ec = cfg.engine_config(topology, base_seed.wrapping_add(i as u64));
        ec.event_log = event_log;
        let macs = make_macs(protocol, topology, &params, &ec.timing);
        engine::run(topology, macs, &ec)
    };
    if parallel {
        (0..reps).into_par_iter().map(one).collect()
    } else {
        (0..reps).map(one).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepRecord {
    pub rep: usize,
    pub seed: u64,
    pub goodputs_bps: Vec<f64>,
    pub aggregate_bps: f64,
    pub jain: f64,
    pub sum_log: f64,
    pub starved_flows: usize,
    /// Smallest per-flow goodput over the overhead-discounted optimum.
    pub min_ratio_to_opt: Option<f64>,
    pub short_term_fairness: f64,
    #[serde(skip)]
    pub flows: Vec<FlowStats>,
    #[serde(skip)]
    pub event_log: Option<String>,
}

impl RepRecord {
    pub fn from_result(rep: usize, seed: u64, r: SimResult, optimum: Option<&[f64]>) -> Self {
        let goodputs = r.goodputs_bps();
        let sl = metrics::sum_log(&goodputs);
        let min_ratio = optimum.map(|opt| {
            goodputs
                .iter()
                .zip(opt)
                .filter(|(_, &o)| o > 0.0)
                .map(|(g, o)| g / o)
                .fold(f64::INFINITY, f64::min)
        });
        let gaps: Vec<f64> = r.flows.iter().map(|f| f.max_delivery_gap_s).collect();
        Self {
            rep,
            seed,
            aggregate_bps: goodputs.iter().sum(),
            jain: metrics::jain_index(&goodputs),
            sum_log: sl.value,
            starved_flows: sl.starved_flows,
            min_ratio_to_opt: min_ratio,
            short_term_fairness: metrics::short_term_fairness(&gaps),
            goodputs_bps: goodputs,
            flows: r.flows,
            event_log: r.event_log,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSummary {
    pub flow: usize,
    pub label: String,
    pub capacity_mbps: f64,
    pub goodput_mean_bps: f64,
    pub goodput_std_bps: f64,
    pub oracle_bps: Option<f64>,
    pub ratio_to_opt: Option<f64>,
    pub airtime_share: f64,
    pub mean_cw: f64,
    pub collision_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProtocolSummary {
    pub protocol: Protocol,
    pub flows: Vec<FlowSummary>,
    pub aggregate_mean_bps: f64,
    pub aggregate_std_bps: f64,
    pub jain_mean: f64,
    pub jain_std: f64,
    pub sum_log_mean: f64,
    pub sum_log_std: f64,
    pub short_term_fairness_mean: f64,
    #[serde(skip)]
    pub reps: Vec<RepRecord>,
}

impl ProtocolSummary {
    pub fn goodputs_bps(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.goodput_mean_bps).collect()
    }

    pub fn mean_cw(&self) -> Vec<f64> {
        self.flows.iter().map(|f| f.mean_cw).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioReport {
    pub name: String,
    pub duration_s: f64,
    pub reps: usize,
    pub seed_base: u64,
    pub rts_cts: bool,
    pub capacities_mbps: Vec<f64>,
    pub oracle_raw: Option<PfSolution>,
    pub oracle_discounted: Option<PfSolution>,
    pub oracle_error: Option<String>,
    pub protocols: Vec<ProtocolSummary>,
}

impl ScenarioReport {
    pub fn protocol(&self, p: Protocol) -> Option<&ProtocolSummary> {
        self.protocols.iter().find(|s| s.protocol == p)
    }
}

fn summarize(
    protocol: Protocol,
    topology: &Topology,
    reps: Vec<RepRecord>,
    optimum: Option<&[f64]>,
) -> ProtocolSummary {
    let n = topology.len();
    let caps = topology.capacities();
    let per_flow = |f: usize| -> Vec<f64> { reps.iter().map(|r| r.goodputs_bps[f]).collect() };
    let means: Vec<f64> = (0..n).map(|f| mean(&per_flow(f))).collect();
    let shares = metrics::airtime_shares(&means, &caps);
    let flows = (0..n)
        .map(|f| {
            let g = per_flow(f);
            let oracle = optimum.map(|o| o[f]);
            let cw_sum: u64 = reps.iter().map(|r| r.flows[f].cw_sum).sum();
            let cw_count: u64 = reps.iter().map(|r| r.flows[f].cw_count).sum();
            let acc: u64 = reps.iter().map(|r| r.flows[f].accesses).sum();
            let fail: u64 = reps.iter().map(|r| r.flows[f].access_failures).sum();
            FlowSummary {
                flow: f,
                label: topology.links()[f].label.clone(),
                capacity_mbps: caps[f],
                goodput_mean_bps: means[f],
                goodput_std_bps: std_dev(&g),
                oracle_bps: oracle,
                ratio_to_opt: oracle.filter(|&o| o > 0.0).map(|o| means[f] / o),
                airtime_share: shares[f],
                mean_cw: if cw_count == 0 {
                    0.0
                } else {
                    cw_sum as f64 / cw_count as f64
                },
                collision_ratio: if acc == 0 { 0.0 } else { fail as f64 / acc as f64 },
            }
        })
        .collect();
    let col = |get: fn(&RepRecord) -> f64| -> Vec<f64> { reps.iter().map(get).collect() };
    let agg = col(|r| r.aggregate_bps);
    let jain = col(|r| r.jain);
    let sl = col(|r| r.sum_log);
    let stf = col(|r| r.short_term_fairness);
    ProtocolSummary {
        protocol,
        flows,
        aggregate_mean_bps: mean(&agg),
        aggregate_std_bps: std_dev(&agg),
        jain_mean: mean(&jain),
        jain_std: std_dev(&jain),
        sum_log_mean: mean(&sl),
        sum_log_std: if sl.iter().all(|v| v.is_finite()) {
            std_dev(&sl)
        } else {
            0.0
        },
        short_term_fairness_mean: mean(&stf),
        reps,
    }
}

/// Runs every requested protocol over the scenario.
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<ScenarioReport> {
    if opts.reps == 0 {
        return Err(SimError::Config("replications must be >= 1".into()));
    }
    let mut cfg = cfg.clone();
    if let Some(d) = opts.duration_s {
        cfg.duration_s = d;
    }
    cfg.validate()?;
    let topology = cfg.build_topology()?;
    let timing = cfg.timing();
    let seed_base = opts.seed.unwrap_or(cfg.seed);
    let protocols = if opts.protocols.is_empty() {
        vec![cfg.protocol]
    } else {
        opts.protocols.clone()
    };

    let (oracle_raw, oracle_discounted, oracle_error) =
        match (
            oracle::solve_pf(&topology, RateModel::Raw, &timing),
            oracle::solve_pf(&topology, RateModel::OverheadDiscounted, &timing),
        ) {
            (Ok(a), Ok(b)) => (Some(a), Some(b), None),
            (Err(e), _) | (_, Err(e)) => (None, None, Some(e.to_string())),
        };
    let optimum = oracle_discounted.as_ref().map(|s| s.rates_bps.as_slice());

    let summaries = protocols
        .iter()
        .map(|&p| {
            let results = run_replications(
                &cfg,
                &topology,
                p,
                opts.reps,
                seed_base,
                opts.parallel,
                opts.event_logs,
            );
            let reps = results
                .into_iter()
                .enumerate()
                .map(|(i, r)| {
                    RepRecord::from_result(i, seed_base.wrapping_add(i as u64), r, optimum)
                })
                .collect();
            summarize(p, &topology, reps, optimum)
        })
        .collect();

    Ok(ScenarioReport {
        name: cfg.name.clone(),
        duration_s: cfg.duration_s,
        reps: opts.reps,
        seed_base,
        rts_cts: cfg.engine_config(&topology, seed_base).rts_cts,
        capacities_mbps: topology.capacities(),
        oracle_raw,
        oracle_discounted,
        oracle_error,
        protocols: summaries,
    })
}

#[derive(Serialize)]
struct RepRow<'a> {
    protocol: &'a str,
    rep: usize,
    seed: u64,
    aggregate_bps: f64,
    jain: f64,
    sum_log: f64,
    starved_flows: usize,
    min_ratio_to_opt: Option<f64>,
    short_term_fairness: f64,
}

#[derive(Serialize)]
struct FlowRow<'a> {
    protocol: &'a str,
    rep: usize,
    seed: u64,
    flow: usize,
    label: &'a str,
    capacity_mbps: f64,
    goodput_bps: f64,
    ratio_to_opt: Option<f64>,
    accesses: u64,
    access_failures: u64,
    data_sent: u64,
    data_lost: u64,
    dropped: u64,
    mean_cw: f64,
    mean_burst: f64,
    payload_airtime_s: f64,
    max_gap_s: f64,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    protocol: &'a str,
    flow: String,
    label: &'a str,
    capacity_mbps: Option<f64>,
    goodput_mean_bps: f64,
    goodput_std_bps: f64,
    oracle_bps: Option<f64>,
    ratio_to_opt: Option<f64>,
    airtime_share: Option<f64>,
    mean_cw: Option<f64>,
    jain_mean: Option<f64>,
    jain_std: Option<f64>,
    sum_log_mean: Option<f64>,
    sum_log_std: Option<f64>,
}

fn csv_err(e: csv::Error) -> SimError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => SimError::Io(io),
        other => SimError::Config(format!("csv: {other:?}")),
    }
}

fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the four result files (and event logs, if recorded); returns the
/// paths written.
pub fn write_report(report: &ScenarioReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let stem = |suffix: &str| out_dir.join(format!("{}_{suffix}", report.name));
    let mut written = Vec::new();

    let path = stem("reps.csv");
    write_csv(
        &path,
        report.protocols.iter().flat_map(|p| {
            p.reps.iter().map(move |r| RepRow {
                protocol: p.protocol.as_str(),
                rep: r.rep,
                seed: r.seed,
                aggregate_bps: r.aggregate_bps,
                jain: r.jain,
                sum_log: r.sum_log,
                starved_flows: r.starved_flows,
                min_ratio_to_opt: r.min_ratio_to_opt,
                short_term_fairness: r.short_term_fairness,
            })
        }),
    )?;
    written.push(path);

    let opt = report.oracle_discounted.as_ref();
    let path = stem("flows.csv");
    write_csv(
        &path,
        report.protocols.iter().flat_map(|p| {
            p.reps.iter().flat_map(move |r| {
                r.flows.iter().enumerate().map(move |(f, st)| FlowRow {
                    protocol: p.protocol.as_str(),
                    rep: r.rep,
                    seed: r.seed,
                    flow: f,
                    label: &p.flows[f].label,
                    capacity_mbps: report.capacities_mbps[f],
                    goodput_bps: r.goodputs_bps[f],
                    ratio_to_opt: opt
                        .map(|o| o.rates_bps[f])
                        .filter(|&o| o > 0.0)
                        .map(|o| r.goodputs_bps[f] / o),
                    accesses: st.accesses,
                    access_failures: st.access_failures,
                    data_sent: st.data_sent,
                    data_lost: st.data_lost,
                    dropped: st.dropped_packets,
                    mean_cw: st.mean_cw(),
                    mean_burst: st.mean_burst(),
                    payload_airtime_s: st.payload_airtime_s,
                    max_gap_s: st.max_delivery_gap_s,
                })
            })
        }),
    )?;
    written.push(path);

    let path = stem("summary.csv");
    let mut rows = Vec::new();
    for p in &report.protocols {
        for f in &p.flows {
            rows.push(SummaryRow {
                protocol: p.protocol.as_str(),
                flow: f.flow.to_string(),
                label: &f.label,
                capacity_mbps: Some(f.capacity_mbps),
                goodput_mean_bps: f.goodput_mean_bps,
                goodput_std_bps: f.goodput_std_bps,
                oracle_bps: f.oracle_bps,
                ratio_to_opt: f.ratio_to_opt,
                airtime_share: Some(f.airtime_share),
                mean_cw: Some(f.mean_cw),
                jain_mean: None,
                jain_std: None,
                sum_log_mean: None,
                sum_log_std: None,
            });
        }
        let oracle_total = opt.map(|o| o.rates_bps.iter().sum::<f64>());
        rows.push(SummaryRow {
            protocol: p.protocol.as_str(),
            flow: "all".into(),
            label: "",
            capacity_mbps: None,
            goodput_mean_bps: p.aggregate_mean_bps,
            goodput_std_bps: p.aggregate_std_bps,
            oracle_bps: oracle_total,
            ratio_to_opt: oracle_total.map(|o| p.aggregate_mean_bps / o),
            airtime_share: None,
            mean_cw: None,
            jain_mean: Some(p.jain_mean),
            jain_std: Some(p.jain_std),
            sum_log_mean: Some(p.sum_log_mean),
            sum_log_std: Some(p.sum_log_std),
        });
    }
    write_csv(&path, rows)?;
    written.push(path);

    let path = stem("summary.json");
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| SimError::Config(format!("summary serialization: {e}")))?;
    fs::write(&path, json + "\n")?;
    written.push(path);

    for p in &report.protocols {
        for r in &p.reps {
            if let Some(log) = &r.event_log {
                let path = stem(&format!("{}_rep{}.log", p.protocol, r.rep));
                fs::write(&path, format!("slot,link,event,detail\n{log}"))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
