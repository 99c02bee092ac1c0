//! Acceptance suite: one pass/fail line per criterion, followed by the
//! individual checks behind it. Exits non-zero when any criterion fails.

use std::fs;
use std::path::Path;
use std::process::ExitCode;

use odcf_sim::config::ScenarioConfig;
use odcf_sim::harness::{run_scenario, write_report, RunOptions};
use odcf_sim::mac::{Maq, QueueParams};
use odcf_sim::odcf::{burst_slots, estimate_success_p, initial_cw, sigmoid_access};
use odcf_sim::oracle::{maximal_independent_sets, solve_pf, RateModel};
use odcf_sim::reproduce::{self, Check};
use odcf_sim::timing::{TimingParams, CW_SET};
use odcf_sim::topology::{make_fc, make_fim, make_ht, make_ia};
use odcf_sim::{Protocol, Topology};

struct Outcome {
    lines: Vec<String>,
    pass: bool,
}

impl Outcome {
    fn from_checks(checks: impl IntoIterator<Item = (String, bool)>) -> Self {
        let mut lines = Vec::new();
        let mut pass = true;
        for (line, ok) in checks {
            pass &= ok;
            lines.push(line);
        }
        Self { lines, pass }
    }
}

fn check(label: &str, ok: bool, detail: String) -> (String, bool) {
    (
        format!("{} {label}: {detail}", if ok { "PASS" } else { "FAIL" }),
        ok,
    )
}

fn cases(names: &[&str]) -> Outcome {
    let opts = RunOptions {
        parallel: true,
        ..RunOptions::default()
    };
    let mut lines = Vec::new();
    let mut pass = true;
    for name in names {
        match reproduce::reproduce(name, &opts) {
            Ok(report) => {
                pass &= report.passed();
                lines.push(format!("{name} (V = {})", report.v));
                lines.extend(report.checks.iter().map(Check::to_string));
            }
            Err(e) => {
                pass = false;
                lines.push(format!("FAIL {name}: {e}"));
            }
        }
    }
    Outcome { lines, pass }
}

fn equation_units() -> Outcome {
    let c = 500.0;
    let mut checks = vec![
        check(
            "initial CW at q = 0.01",
            initial_cw(0.01, c) == 1023,
            format!("{}", initial_cw(0.01, c)),
        ),
        check(
            "initial CW at q = 5",
            initial_cw(5.0, c) == 7,
            format!("{}", initial_cw(5.0, c)),
        ),
    ];

    let zero_pc = CW_SET
        .iter()
        .map(|&cw| (estimate_success_p(cw, 0.0, 4) - 2.0 / (cw as f64 + 2.0)).abs())
        .fold(0.0, f64::max);
    checks.push(check(
        "success probability at zero collisions is 2/(CW+2)",
        zero_pc < 1e-12,
        format!("max error {zero_pc:.2e}"),
    ));

    let mu_max = TimingParams::default().mu_max_slots();
    let mut product = 0.0f64;
    for q in [0.01, 0.5, 1.0, 2.0, 3.0, 4.0] {
        let p = estimate_success_p(initial_cw(q, c), 0.0, 4);
        let mu = burst_slots(q, p, mu_max);
        assert!(mu < mu_max, "sample q = {q} hits the length cap");
        product = product.max((p * mu / f64::exp(q) - 1.0).abs());
    }
    checks.push(check(
        "uncapped access probability times length equals exp(q)",
        product < 1e-12,
        format!("max relative error {product:.2e}"),
    ));

    let queue = QueueParams::default();
    let mut seen: Vec<u32> = (queue.q_min..=queue.q_max)
        .map(|big_q| initial_cw(queue.b * big_q as f64, c))
        .collect();
    seen.sort_unstable();
    seen.dedup();
    checks.push(check(
        "initial CW spans the hardware set over the queue range",
        seen == CW_SET,
        format!("{seen:?}"),
    ));
    let top = sigmoid_access(queue.b * queue.q_max as f64, c);
    checks.push(check(
        "access probability stays below one at the queue cap",
        top < 1.0,
        format!("{top:.6}"),
    ));

    let mut maq = Maq::new(queue.clone());
    maq.update(0, 50);
    let floor = maq.len();
    let floor_rate = maq.dequeue_rate();
    maq.update(5000, 0);
    let cap = maq.len();
    checks.push(check(
        "queue clamps to [Q_min, Q_max]",
        floor == queue.q_min && cap == queue.q_max,
        format!("{floor}..{cap}"),
    ));
    let expected_rate = queue.v / (queue.b * queue.q_min as f64);
    checks.push(check(
        "dequeue rate at Q_min is V / (b Q_min)",
        (floor_rate - expected_rate).abs() < 1e-9,
        format!("{floor_rate} packets/s"),
    ));
    Outcome::from_checks(checks)
}

/// `max_s Σ_{l∈s} c_l / γ_l − n` over maximal independent sets; zero at the
/// proportional-fair optimum.
fn certificate_residual(topology: &Topology, model: RateModel) -> f64 {
    let timing = TimingParams::default();
    let sol = solve_pf(topology, model, &timing).expect("oracle converges");
    let rates = odcf_sim::oracle::link_rates_mbps(topology, model, &timing);
    let n = topology.len() as f64;
    maximal_independent_sets(topology)
        .unwrap()
        .iter()
        .map(|s| {
            s.iter()
                .map(|&l| rates[l] * 1e6 / sol.rates_bps[l])
                .sum::<f64>()
                - n
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Best sum-log rate vector over time shares of the maximal independent
/// sets, on a lattice of `steps` per unit time. 240 divides evenly by 2, 3
/// and 4, so the even splits of the small topologies are on the lattice.
fn grid_search(topology: &Topology, steps: usize) -> Vec<f64> {
    let sets = maximal_independent_sets(topology).unwrap();
    let caps = topology.capacities();
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut alloc = vec![0usize; sets.len()];
    fn walk(
        i: usize,
        left: usize,
        alloc: &mut [usize],
        ctx: (&[Vec<usize>], &[f64], usize),
        best: &mut (f64, Vec<f64>),
    ) {
        let (sets, caps, steps) = ctx;
        if i + 1 == alloc.len() {
            alloc[i] = left;
            let mut gamma = vec![0.0; caps.len()];
            for (s, &a) in sets.iter().zip(alloc.iter()) {
                for &l in s {
                    gamma[l] += caps[l] * 1e6 * a as f64 / steps as f64;
                }
            }
            let obj: f64 = gamma.iter().map(|g| g.ln()).sum();
            if obj > best.0 {
                *best = (obj, gamma);
            }
            return;
        }
        for a in 0..=left {
            alloc[i] = a;
            walk(i + 1, left - a, alloc, ctx, best);
        }
    }
    walk(0, steps, &mut alloc, (&sets, &caps, steps), &mut best);
    best.1
}

fn oracle_certificate() -> Outcome {
    let mut named: Vec<(String, Topology)> = Vec::new();
    for n in 2..=6 {
        named.push((format!("FC({n})"), make_fc(n).unwrap()));
    }
    for k in 2..=4 {
        named.push((format!("FIM({k})"), make_fim(k).unwrap()));
    }
    named.push(("HT".into(), make_ht()));
    named.push(("IA".into(), make_ia()));

    let mut checks = Vec::new();
    for (name, topo) in &named {
        let worst = [RateModel::Raw, RateModel::OverheadDiscounted]
            .into_iter()
            .map(|m| certificate_residual(topo, m))
            .fold(f64::NEG_INFINITY, f64::max);
        checks.push(check(
            &format!("{name} certificate residual"),
            worst <= 1e-5,
            format!("{worst:.2e} (expected <= 1e-5)"),
        ));
        if topo.len() <= 4 {
            let sol = solve_pf(topo, RateModel::Raw, &TimingParams::default()).unwrap();
            let brute = grid_search(topo, 240);
            let err = sol
                .rates_bps
                .iter()
                .zip(&brute)
                .map(|(a, b)| (a - b).abs() / b)
                .fold(0.0, f64::max);
            checks.push(check(
                &format!("{name} agrees with grid search"),
                err <= 0.01,
                format!("max per-flow deviation {:.3}% (expected <= 1%)", err * 100.0),
            ));
        }
    }
    Outcome::from_checks(checks)
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let cfg = ScenarioConfig::from_json(
        r#"{
            "name": "det",
            "generator": "mixed_fim_fc",
            "duration_s": 20,
            "seed": 7,
            "capacity_trace": [{ "link": 0, "steps": [[10.0, 18.0]] }]
        }"#,
    )
    .unwrap();
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, parallel) in dirs.iter().zip([false, true]) {
        let opts = RunOptions {
            reps: 3,
            protocols: Protocol::ALL.to_vec(),
            parallel,
            event_logs: true,
            ..RunOptions::default()
        };
        let report = run_scenario(&cfg, &opts).unwrap();
        write_report(&report, dir.path()).unwrap();
    }
    let a = read_dir_bytes(dirs[0].path());
    let b = read_dir_bytes(dirs[1].path());
    let logs = a.iter().filter(|(n, _)| n.ends_with(".log")).count();
    let identical = a == b;
    Outcome::from_checks([
        check(
            "serial and parallel runs write identical files",
            identical && !a.is_empty(),
            format!("{} files", a.len()),
        ),
        check(
            "event logs written for every protocol and replication",
            logs == Protocol::ALL.len() * 3,
            format!("{logs} logs"),
        ),
    ])
}

fn main() -> ExitCode {
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("fully connected aggregate ordering", Box::new(|| cases(&["fc_table"]))),
        ("FIM(2) proportional split and DCF starvation", Box::new(|| cases(&["fim2"]))),
        ("FIM(3)/FIM(4) centre ratio trend", Box::new(|| cases(&["fim3", "fim4"]))),
        ("hidden terminal and information asymmetry", Box::new(|| cases(&["ht", "ia"]))),
        ("hidden terminal with capture", Box::new(|| cases(&["ht_capture"]))),
        ("heterogeneous rates: time fairness and anomaly", Box::new(|| cases(&["hetero_static"]))),
        ("mixed topologies", Box::new(|| cases(&["mixed_a", "mixed_b"]))),
        ("grid and random topologies", Box::new(|| cases(&["grid", "random"]))),
        ("equation unit checks", Box::new(equation_units)),
        ("oracle certificate", Box::new(oracle_certificate)),
        ("determinism", Box::new(determinism)),
    ];
    let only: Option<usize> = std::env::var("ACCEPTANCE_ONLY").ok().and_then(|s| s.parse().ok());

    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = i + 1;
        if only.is_some_and(|o| o != id) {
            continue;
        }
        let start = std::time::Instant::now();
        let outcome = run();
        println!(
            "criterion {id:>2} {}: {name} ({:.1} s)",
            if outcome.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        for line in &outcome.lines {
            println!("    {line}");
        }
        if !outcome.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
