//! Property tests of engine, generator and MAC invariants over generated
//! topologies, seeds and protocols.

use odcf_sim::mac::Fate;
use odcf_sim::timing::{TimingParams, CW_SET};
use odcf_sim::topology::{make_fc, make_fim, make_grid, make_random, GridParams, RandomParams, FIM_CENTER};
use odcf_sim::{make_macs, run, EngineConfig, Protocol, ProtocolParams, SimResult, Topology};
use proptest::prelude::*;

fn protocol() -> impl Strategy<Value = Protocol> {
    (0..Protocol::ALL.len()).prop_map(|i| Protocol::ALL[i])
}

fn simulate(topo: &Topology, p: Protocol, seed: u64, rts_cts: bool, duration_s: f64) -> SimResult {
    let mut cfg = EngineConfig::new(duration_s, seed);
    cfg.rts_cts = rts_cts;
    cfg.event_log = true;
    let macs = make_macs(p, topo, &ProtocolParams::default(), &cfg.timing);
    run(topo, macs, &cfg)
}

/// `(link, start, end)` of every access whose first frame got through, from
/// its `access` line to its `burst_end` line.
fn clean_exchanges(log: &str, links: usize) -> Vec<(usize, u64, u64)> {
    let mut open: Vec<Option<u64>> = vec![None; links];
    let mut out = Vec::new();
    for line in log.lines() {
        let mut f = line.split(',');
        let slot: u64 = f.next().unwrap().parse().unwrap();
        let link: usize = f.next().unwrap().parse().unwrap();
        match f.next().unwrap() {
            "access" => open[link] = Some(slot),
            "burst_end" => {
                if let Some(start) = open[link].take() {
                    out.push((link, start, slot));
                }
            }
            "rts_fail" | "data_fail" => open[link] = None,
            _ => {}
        }
    }
    out
}

fn access_starts(log: &str) -> Vec<(usize, u64)> {
    log.lines()
        .filter(|l| l.contains(",access,"))
        .map(|l| {
            let mut f = l.split(',');
            let slot = f.next().unwrap().parse().unwrap();
            (f.next().unwrap().parse().unwrap(), slot)
        })
        .collect()
}

fn check_run(topo: &Topology, r: &SimResult) -> Result<(), TestCaseError> {
    for f in &r.flows {
        prop_assert!(f.delivered_packets <= f.data_sent);
        let settled = f.delivered_packets + f.data_lost;
        prop_assert!(settled <= f.data_sent && f.data_sent - settled <= 1);
        prop_assert!(f.dropped_packets <= f.access_failures);
    }
    let log = r.event_log.as_deref().unwrap();
    let exchanges = clean_exchanges(log, topo.len());
    for (a, t) in access_starts(log) {
        for &(b, start, end) in &exchanges {
            if a != b && topo.senses(a, b) {
                prop_assert!(
                    !(start < t && t <= end),
                    "link {a} accessed at {t} inside {b}'s exchange {start}..{end}"
                );
            }
        }
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_topologies_keep_carrier_sense_and_conservation(
        topo_seed in 0u64..10_000,
        flows in 2usize..7,
        p in protocol(),
        seed in any::<u64>(),
        rts_cts in any::<bool>(),
    ) {
        let params = RandomParams { nodes: 16, area_m: 600.0, flows, seed: topo_seed, ..RandomParams::default() };
        let topo = make_random(&params);
        prop_assume!(topo.is_ok());
        let topo = topo.unwrap();
        let a = simulate(&topo, p, seed, rts_cts, 3.0);
        check_run(&topo, &a)?;
        let b = simulate(&topo, p, seed, rts_cts, 3.0);
        prop_assert_eq!(a, b);
    }

    #[test]
    fn clique_airtime_fits_in_the_run(n in 2usize..7, p in protocol(), seed in any::<u64>(), rts_cts in any::<bool>()) {
        let topo = make_fc(n).unwrap();
        let r = simulate(&topo, p, seed, rts_cts, 3.0);
        check_run(&topo, &r)?;
        let busy: u64 = clean_exchanges(r.event_log.as_deref().unwrap(), n)
            .iter()
            .map(|&(_, s, e)| e - s)
            .sum();
        prop_assert!(busy <= r.slots, "{busy} > {}", r.slots);
    }

    #[test]
    fn generators_are_deterministic_and_valid(seed in 0u64..10_000, flows in 1usize..9) {
        let g = GridParams { flows, seed, ..GridParams::default() };
        if let Ok(t) = make_grid(&g) {
            prop_assert_eq!(&t, &make_grid(&g).unwrap());
            prop_assert!(t.validate().is_ok());
        }
        let r = RandomParams { flows, seed, ..RandomParams::default() };
        if let Ok(t) = make_random(&r) {
            prop_assert_eq!(&t, &make_random(&r).unwrap());
            prop_assert!(t.validate().is_ok());
        }
    }

    #[test]
    fn macs_draw_windows_from_the_hardware_set(
        p in protocol(),
        outcomes in prop::collection::vec(any::<bool>(), 1..200),
    ) {
        let topo = make_fc(2).unwrap();
        let timing = TimingParams::default();
        let mut mac = make_macs(p, &topo, &ProtocolParams::default(), &timing).pop().unwrap();
        let mut retries = 0;
        for (i, ok) in outcomes.into_iter().enumerate() {
            let now = i as f64 * 0.01;
            prop_assert!(CW_SET.contains(&mac.next_access(now).cw));
            let burst = mac.on_access_won(now);
            prop_assert!(burst >= 1);
            if matches!(p, Protocol::Dcf | Protocol::OcsmaCw | Protocol::Diffq) {
                prop_assert_eq!(burst, 1);
            }
            if ok {
                mac.on_delivered(now);
                retries = 0;
            } else if mac.on_failed(now) == Fate::Dropped {
                prop_assert_eq!(retries, timing.retry_limit);
                retries = 0;
            } else {
                retries += 1;
                prop_assert!(retries <= timing.retry_limit);
            }
        }
    }
}

#[test]
fn fc_senses_completely_and_fim_is_a_star() {
    for n in 2..8 {
        let t = make_fc(n).unwrap();
        for a in 0..n {
            for b in 0..n {
                assert_eq!(t.senses(a, b), a != b);
            }
        }
    }
    for k in 2..6 {
        let t = make_fim(k).unwrap();
        for a in 0..t.len() {
            for b in 0..t.len() {
                let star = a != b && (a == FIM_CENTER || b == FIM_CENTER);
                assert_eq!(t.conflicts(a, b), star, "{a} {b}");
            }
        }
    }
}
