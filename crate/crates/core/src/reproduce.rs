//! Canned scenarios with pass/fail checks against the expected behaviour.
//!
//! Each case fixes its topology, the protocols it compares and the O-DCF
//! dequeue constant `V` it runs with; replication count, seed base, duration
//! and parallelism come from the caller's [`RunOptions`].

use std::fmt;

use rayon::prelude::*;
use serde_json::json;

use crate::config::{Generator, ScenarioConfig, TraceEntry};
use crate::error::{Result, SimError};
use crate::harness::{run_replications, run_scenario, ProtocolSummary, RunOptions, ScenarioReport};
use crate::metrics::{self, mean};
use crate::protocol::Protocol;
use crate::topology::FIM_CENTER;

/// A named scenario and the dequeue constant it runs with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Case {
    pub name: &'static str,
    pub v: f64,
    pub about: &'static str,
}

pub const CASES: [Case; 13] = [
    Case { name: "fc_table", v: 400.0, about: "12 fully connected flows at 6 Mb/s, aggregate ordering" },
    Case { name: "fim2", v: 900.0, about: "flow in the middle with 2 outer flows, 2:1:2 split" },
    Case { name: "fim3", v: 900.0, about: "flow in the middle with 3 outer flows, centre ratio trend" },
    Case { name: "fim4", v: 900.0, about: "flow in the middle with 4 outer flows, centre ratio trend" },
    Case { name: "mixed_a", v: 400.0, about: "6-flow clique whose last flow centres a 3-outer FIM" },
    Case { name: "mixed_b", v: 400.0, about: "6-flow clique acting as the centre of a 4-outer FIM" },
    Case { name: "ht", v: 400.0, about: "hidden terminals with RTS/CTS" },
    Case { name: "ia", v: 600.0, about: "information asymmetry with RTS/CTS" },
    Case { name: "ht_capture", v: 400.0, about: "hidden terminals where one receiver captures" },
    Case { name: "hetero_static", v: 800.0, about: "3 contending flows at 6, 18 and 48 Mb/s" },
    Case { name: "hetero_mobile", v: 800.0, about: "as hetero_static, the 18 Mb/s flow drops to 6 Mb/s at 60%" },
    Case { name: "grid", v: 400.0, about: "4x4 grid, 6 random single-hop flows, 10 draws" },
    Case { name: "random", v: 400.0, about: "30 random nodes, 12 single-hop flows, 10 draws" },
];

/// Topology draws per geometric case; draw `i` uses topology seed `i`.
pub const GEOMETRIC_DRAWS: u64 = 10;

pub fn case(name: &str) -> Result<Case> {
    CASES.iter().copied().find(|c| c.name == name).ok_or_else(|| {
        let names: Vec<&str> = CASES.iter().map(|c| c.name).collect();
        SimError::InvalidArgument(format!(
            "unknown scenario `{name}` (expected one of {})",
            names.join(", ")
        ))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub measured: f64,
    pub expected: String,
    pub pass: bool,
}

impl Check {
    fn above(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            expected: format!("> {bound:.4}"),
            pass: measured > bound,
        }
    }

    fn at_least(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            expected: format!(">= {bound:.4}"),
            pass: measured >= bound,
        }
    }

    fn below(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            expected: format!("< {bound:.4}"),
            pass: measured < bound,
        }
    }

    fn within(label: impl Into<String>, measured: f64, lo: f64, hi: f64) -> Self {
        Self {
            label: label.into(),
            measured,
            expected: format!("in [{lo:.4}, {hi:.4}]"),
            pass: (lo..=hi).contains(&measured),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.4} (expected {})",
            if self.pass { "PASS" } else { "FAIL" },
            self.label,
            self.measured,
            self.expected
        )
    }
}

#[derive(Debug, Clone)]
pub struct CaseReport {
    pub name: String,
    pub v: f64,
    pub checks: Vec<Check>,
    pub reports: Vec<ScenarioReport>,
}

impl CaseReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

impl fmt::Display for CaseReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{} {} (V = {})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            self.v
        )?;
        for c in &self.checks {
            writeln!(f, "  {c}")?;
        }
        Ok(())
    }
}

/// The scenario config of a case with its `V` applied.
pub fn case_config(case: &Case, generator: Generator, params: serde_json::Value) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(case.name, generator, params);
    let mut odcf = cfg.overrides.odcf.clone().unwrap_or_default();
    odcf.queue.v = case.v;
    cfg.overrides.odcf = Some(odcf);
    cfg
}

fn run(cfg: &ScenarioConfig, opts: &RunOptions, protocols: &[Protocol]) -> Result<ScenarioReport> {
    let opts = RunOptions {
        protocols: protocols.to_vec(),
        ..opts.clone()
    };
    run_scenario(cfg, &opts)
}

fn summary(report: &ScenarioReport, p: Protocol) -> &ProtocolSummary {
    report
        .protocol(p)
        .expect("every case reads only the protocols it ran")
}

fn ratios(report: &ScenarioReport, p: Protocol) -> Vec<f64> {
    summary(report, p)
        .flows
        .iter()
        .map(|f| f.ratio_to_opt.unwrap_or(0.0))
        .collect()
}

fn goodputs(report: &ScenarioReport, p: Protocol) -> Vec<f64> {
    summary(report, p).goodputs_bps()
}

/// Runs the named case and evaluates its checks.
pub fn reproduce(name: &str, opts: &RunOptions) -> Result<CaseReport> {
    let case = case(name)?;
    let (checks, reports) = match case.name {
        "fc_table" => fc_table(&case, opts)?,
        "fim2" => fim2(&case, opts)?,
        "fim3" => fim_trend(&case, 3, opts)?,
        "fim4" => fim_trend(&case, 4, opts)?,
        "mixed_a" => mixed(&case, Generator::MixedFimFc, &[5], &[6, 7, 8], opts)?,
        "mixed_b" => mixed(&case, Generator::FcInFim, &[0, 1, 2, 3, 4, 5], &[6, 7, 8, 9], opts)?,
        "ht" => two_flow(&case, Generator::Ht, false, opts)?,
        "ia" => two_flow(&case, Generator::Ia, true, opts)?,
        "ht_capture" => ht_capture(&case, opts)?,
        "hetero_static" => hetero_static(&case, opts)?,
        "hetero_mobile" => hetero_mobile(&case, opts)?,
        "grid" => geometric(&case, Generator::Grid, opts)?,
        "random" => geometric(&case, Generator::Random, opts)?,
        other => unreachable!("case table and dispatch disagree on {other}"),
    };
    Ok(CaseReport {
        name: case.name.to_string(),
        v: case.v,
        checks,
        reports,
    })
}

type Outcome = (Vec<Check>, Vec<ScenarioReport>);

fn fc_table(case: &Case, opts: &RunOptions) -> Result<Outcome> {
    let cfg = case_config(case, Generator::Fc, json!({ "n": 12 }));
    let report = run(&cfg, opts, &Protocol::ALL)?;
    let agg = |p| summary(&report, p).aggregate_mean_bps / 1e3;
    let target = 4501.0;
    let checks = vec![
        Check::above("odcf aggregate kb/s over dcf", agg(Protocol::Odcf), agg(Protocol::Dcf)),
        Check::above("ocsma_mu aggregate kb/s over dcf", agg(Protocol::OcsmaMu), agg(Protocol::Dcf)),
        Check::above("dcf aggregate kb/s over diffq", agg(Protocol::Dcf), agg(Protocol::Diffq)),
        Check::above("diffq aggregate kb/s over ocsma_cw", agg(Protocol::Diffq), agg(Protocol::OcsmaCw)),
        Check::within("odcf aggregate kb/s", agg(Protocol::Odcf), 0.85 * target, 1.15 * target),
    ];
    Ok((checks, vec![report]))
}

fn fim2(case: &Case, opts: &RunOptions) -> Result<Outcome> {
    let cfg = case_config(case, Generator::Fim, json!({ "outer": 2 }));
    let report = run(&cfg, opts, &[Protocol::Odcf, Protocol::Dcf])?;
    let mut checks: Vec<Check> = ratios(&report, Protocol::Odcf)
        .into_iter()
        .enumerate()
        .map(|(f, r)| Check::within(format!("odcf flow {f} ratio to optimum"), r, 0.9, 1.1))
        .collect();
    checks.push(Check::below(
        "dcf centre ratio to optimum",
        ratios(&report, Protocol::Dcf)[FIM_CENTER],
        0.15,
    ));
    Ok((checks, vec![report]))
}

fn fim_trend(case: &Case, outer: usize, opts: &RunOptions) -> Result<Outcome> {
    let mut smaller = case_config(case, Generator::Fim, json!({ "outer": outer - 1 }));
    smaller.name = format!("{}_outer{}", case.name, outer - 1);
    let larger = case_config(case, Generator::Fim, json!({ "outer": outer }));
    let before = run(&smaller, opts, &[Protocol::OcsmaMu])?;
    let after = run(&larger, opts, &[Protocol::Odcf, Protocol::OcsmaMu])?;
    let checks = vec![
        Check::below(
            format!("ocsma_mu centre ratio with {outer} outer flows vs {}", outer - 1),
            ratios(&after, Protocol::OcsmaMu)[FIM_CENTER],
            ratios(&before, Protocol::OcsmaMu)[FIM_CENTER],
        ),
        Check::within(
            "odcf centre ratio to optimum",
            ratios(&after, Protocol::Odcf)[FIM_CENTER],
            0.85,
            1.15,
        ),
    ];
    Ok((checks, vec![before, after]))
}

fn mixed(
    case: &Case,
    generator: Generator,
    centre: &[usize],
    outer: &[usize],
    opts: &RunOptions,
) -> Result<Outcome> {
    let cfg = case_config(case, generator, serde_json::Value::Null);
    let report = run(&cfg, opts, &[Protocol::Odcf, Protocol::Dcf, Protocol::OcsmaMu])?;
    let jain = |p| summary(&report, p).jain_mean;
    let min_ratio = ratios(&report, Protocol::Odcf)
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let cw = summary(&report, Protocol::Odcf).mean_cw();
    let avg = |ids: &[usize]| mean(&ids.iter().map(|&i| cw[i]).collect::<Vec<_>>());
    let checks = vec![
        Check::at_least("odcf minimum ratio to optimum", min_ratio, 0.7),
        Check::above("odcf Jain over dcf", jain(Protocol::Odcf), jain(Protocol::Dcf)),
        Check::above("odcf Jain over ocsma_mu", jain(Protocol::Odcf), jain(Protocol::OcsmaMu)),
        Check::below("odcf centre mean CW vs outer", avg(centre), avg(outer)),
    ];
    Ok((checks, vec![report]))
}

fn two_flow(case: &Case, generator: Generator, asymmetric: bool, opts: &RunOptions) -> Result<Outcome> {
    let cfg = case_config(case, generator, serde_json::Value::Null);
    let report = run(&cfg, opts, &[Protocol::Odcf, Protocol::Dcf, Protocol::OcsmaMu])?;
    let mut checks = vec![Check::above(
        "odcf Jain",
        summary(&report, Protocol::Odcf).jain_mean,
        0.9,
    )];
    for (f, r) in ratios(&report, Protocol::Odcf).into_iter().enumerate() {
        checks.push(Check::within(format!("odcf flow {f} ratio to optimum"), r, 0.8, 1.2));
    }
    if asymmetric {
        for p in [Protocol::OcsmaMu, Protocol::Dcf] {
            let g = goodputs(&report, p);
            checks.push(Check::below(
                format!("{p} disadvantaged over advantaged goodput"),
                g[1] / g[0],
                0.5,
            ));
        }
    }
    Ok((checks, vec![report]))
}

fn ht_capture(case: &Case, opts: &RunOptions) -> Result<Outcome> {
    let cfg = case_config(case, Generator::HtCapture, serde_json::Value::Null);
    let report = run(&cfg, opts, &[Protocol::Odcf, Protocol::Dcf])?;
    let weak = |p| {
        let g = goodputs(&report, p);
        g[1] / g[0]
    };
    let checks = vec![
        Check::at_least("odcf weak over strong goodput", weak(Protocol::Odcf), 0.6),
        Check::below("dcf weak over strong goodput", weak(Protocol::Dcf), 0.25),
    ];
    Ok((checks, vec![report]))
}

const HETERO_MBPS: [f64; 3] = [6.0, 18.0, 48.0];

fn hetero_config(case: &Case) -> ScenarioConfig {
    let mut cfg = case_config(case, Generator::Fc, json!({ "n": 3 }));
    cfg.overrides.capacities_mbps = Some(HETERO_MBPS.to_vec());
    cfg
}

fn equal_share_checks(prefix: &str, shares: &[f64]) -> Vec<Check> {
    let fair = 1.0 / shares.len() as f64;
    shares
        .iter()
        .enumerate()
        .map(|(f, &s)| {
            Check::within(
                format!("{prefix}flow {f} airtime share"),
                s,
                0.9 * fair,
                1.1 * fair,
            )
        })
        .collect()
}

fn hetero_static(case: &Case, opts: &RunOptions) -> Result<Outcome> {
    let cfg = hetero_config(case);
    let report = run(&cfg, opts, &Protocol::ALL)?;
    let shares: Vec<f64> = summary(&report, Protocol::Odcf)
        .flows
        .iter()
        .map(|f| f.airtime_share)
        .collect();
    let mut checks = equal_share_checks("odcf ", &shares);
    for p in Protocol::ALL.into_iter().filter(|&p| p != Protocol::Odcf) {
        let g = goodputs(&report, p);
        checks.push(Check::below(format!("{p} fastest over slowest goodput"), g[2] / g[0], 2.0));
    }
    Ok((checks, vec![report]))
}

fn hetero_mobile(case: &Case, opts: &RunOptions) -> Result<Outcome> {
    let mut cfg = hetero_config(case);
    if let Some(d) = opts.duration_s {
        cfg.duration_s = d;
    }
    let d = cfg.duration_s;
    let moved = 1;
    let after_mbps = 6.0;
    cfg.capacity_trace = vec![TraceEntry {
        link: moved,
        steps: vec![(0.6 * d, after_mbps)],
    }];
    let report = run(&cfg, opts, &[Protocol::Odcf])?;

    let topology = cfg.build_topology()?;
    let seed = opts.seed.unwrap_or(cfg.seed);
    let results = run_replications(&cfg, &topology, Protocol::Odcf, opts.reps, seed, opts.parallel, false);
    let second = |x: f64| (x * d).round() as usize;
    let window_shares = |from: f64, to: f64, caps: &[f64]| {
        let per_rep: Vec<Vec<f64>> = results
            .iter()
            .map(|r| r.window_goodputs_bps(second(from), second(to)))
            .collect();
        let means: Vec<f64> = (0..caps.len())
            .map(|f| mean(&per_rep.iter().map(|g| g[f]).collect::<Vec<_>>()))
            .collect();
        metrics::airtime_shares(&means, caps)
    };
    let mut after = HETERO_MBPS;
    after[moved] = after_mbps;
    let mut checks = equal_share_checks("odcf before move, ", &window_shares(0.1, 0.6, &HETERO_MBPS));
    checks.extend(equal_share_checks("odcf after move, ", &window_shares(0.7, 1.0, &after)));
    Ok((checks, vec![report]))
}

fn geometric(case: &Case, generator: Generator, opts: &RunOptions) -> Result<Outcome> {
    let draw = |i: u64| {
        let mut cfg = case_config(case, generator, json!({ "seed": i }));
        cfg.name = format!("{}_d{i}", case.name);
        run(&cfg, opts, &Protocol::ALL)
    };
    let reports: Vec<ScenarioReport> = if opts.parallel {
        (0..GEOMETRIC_DRAWS).into_par_iter().map(draw).collect::<Result<_>>()?
    } else {
        (0..GEOMETRIC_DRAWS).map(draw).collect::<Result<_>>()?
    };
    let over_draws = |p: Protocol, get: fn(&ProtocolSummary) -> f64| {
        mean(&reports.iter().map(|r| get(summary(r, p))).collect::<Vec<_>>())
    };
    let jain = |p| over_draws(p, |s| s.jain_mean);
    let utility = |p| over_draws(p, |s| s.sum_log_mean);
    let mut checks = vec![
        Check::at_least("odcf mean Jain over dcf", jain(Protocol::Odcf) / jain(Protocol::Dcf), 1.2),
        Check::at_least(
            "odcf mean Jain over diffq",
            jain(Protocol::Odcf) / jain(Protocol::Diffq),
            1.08,
        ),
    ];
    for p in Protocol::ALL.into_iter().filter(|&p| p != Protocol::Odcf) {
        checks.push(Check::at_least(
            format!("odcf mean sum-log utility vs {p}"),
            utility(Protocol::Odcf),
            utility(p),
        ));
    }
    Ok((checks, reports))
}
