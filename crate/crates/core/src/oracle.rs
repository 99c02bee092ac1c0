//! Proportional-fair rate oracle.
//!
//! Feasible schedules are time shares over the independent sets of the
//! conflict graph (links related by sensing or interference in either
//! direction). The oracle maximizes `Σ log γ_l` over those shares with
//! pairwise Frank-Wolfe and reports the duality gap as a certificate.

use serde::Serialize;

use crate::error::{Result, SimError};
use crate::timing::TimingParams;
use crate::topology::{LinkId, Topology};

/// Above this many links full enumeration of independent sets is refused.
pub const MAX_ENUMERATED_LINKS: usize = 25;

/// Solver stops once `max_s g_s - n` drops below this.
pub const GAP_TOLERANCE: f64 = 1e-9;

const MAX_ITERATIONS: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// Each scheduled link runs at its PHY rate.
    Raw,
    /// PHY rate times the payload fraction of a long burst.
    OverheadDiscounted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PfSolution {
    pub model: RateModel,
    /// Optimal goodput per link in b/s; excluded links get 0.
    pub rates_bps: Vec<f64>,
    /// Maximal independent sets, each sorted ascending.
    pub sets: Vec<Vec<LinkId>>,
    /// Time share of each set; sums to one.
    pub shares: Vec<f64>,
    /// Fraction of time each link is scheduled.
    pub airtime: Vec<f64>,
    pub sum_log: f64,
    pub gap: f64,
    pub iterations: usize,
    /// Links no set can serve.
    pub excluded: Vec<LinkId>,
}

fn conflict_masks(topology: &Topology) -> Result<Vec<u64>> {
    let n = topology.len();
    if n > 64 {
        return Err(SimError::Oracle(format!("{n} links exceed the 64-link limit")));
    }
    Ok((0..n)
        .map(|a| {
            (0..n)
                .filter(|&b| topology.conflicts(a, b))
                .fold(0u64, |m, b| m | 1 << b)
        })
        .collect())
}

fn mask_to_links(mask: u64) -> Vec<LinkId> {
    (0..64).filter(|&b| mask >> b & 1 == 1).collect()
}

/// Every independent set of the conflict graph, the empty set included.
pub fn independent_sets(topology: &Topology) -> Result<Vec<Vec<LinkId>>> {
    if topology.len() > MAX_ENUMERATED_LINKS {
        return Err(SimError::Oracle(format!(
            "{} links exceed the enumeration limit of {MAX_ENUMERATED_LINKS}",
            topology.len()
        )));
    }
    let conflicts = conflict_masks(topology)?;
    let mut out = Vec::new();
    fn extend(i: usize, chosen: u64, conflicts: &[u64], out: &mut Vec<u64>) {
        if i == conflicts.len() {
            out.push(chosen);
            return;
        }
        extend(i + 1, chosen, conflicts, out);
        if conflicts[i] & chosen == 0 {
            extend(i + 1, chosen | 1 << i, conflicts, out);
        }
    }
    extend(0, 0, &conflicts, &mut out);
    out.sort_unstable();
    Ok(out.into_iter().map(mask_to_links).collect())
}

/// Maximal independent sets (Bron–Kerbosch with pivoting on the complement).
pub fn maximal_independent_sets(topology: &Topology) -> Result<Vec<Vec<LinkId>>> {
    let n = topology.len();
    let conflicts = conflict_masks(topology)?;
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let compat: Vec<u64> = (0..n).map(|a| all & !conflicts[a] & !(1 << a)).collect();
    let mut out = Vec::new();
    fn bk(r: u64, mut p: u64, mut x: u64, compat: &[u64], out: &mut Vec<u64>) {
        if p == 0 && x == 0 {
            out.push(r);
            return;
        }
        let pivot = (p | x).trailing_zeros() as usize;
        let mut cand = p & !compat[pivot];
        while cand != 0 {
            let v = cand.trailing_zeros() as usize;
            cand &= cand - 1;
            bk(r | 1 << v, p & compat[v], x & compat[v], compat, out);
            p &= !(1 << v);
            x |= 1 << v;
        }
    }
    if n > 0 {
        bk(0, all, 0, &compat, &mut out);
    }
    out.sort_unstable();
    Ok(out.into_iter().map(mask_to_links).collect())
}

/// Per-link rate in Mb/s when scheduled, under `model`.
pub fn link_rates_mbps(topology: &Topology, model: RateModel, timing: &TimingParams) -> Vec<f64> {
    topology
        .capacities()
        .into_iter()
        .map(|c| match model {
            RateModel::Raw => c,
            RateModel::OverheadDiscounted => c * timing.burst_efficiency(c),
        })
        .collect()
}

/// Largest `t` in `[0, t_max]` maximizing `Σ log(γ + t d)`.
fn line_search(gamma: &[f64], d: &[f64], t_max: f64) -> f64 {
    let slope = |t: f64| -> f64 {
        gamma
            .iter()
            .zip(d)
            .filter(|(_, &dl)| dl != 0.0)
            .map(|(&g, &dl)| dl / (g + t * dl))
            .sum()
    };
    // Stay strictly inside the domain where every γ remains positive.
    let boundary = gamma
        .iter()
        .zip(d)
        .filter(|(_, &dl)| dl < 0.0)
        .map(|(&g, &dl)| g / -dl)
        .fold(f64::INFINITY, f64::min);
    if boundary > t_max && slope(t_max) >= 0.0 {
        return t_max;
    }
    let t_max = t_max.min(boundary);
    if slope(0.0) <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * t_max {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Solves the proportional-fair schedule for `topology`.
pub fn solve_pf(topology: &Topology, model: RateModel, timing: &TimingParams) -> Result<PfSolution> {
    let n = topology.len();
    if n == 0 {
        return Err(SimError::Oracle("empty topology".into()));
    }
    let rates = link_rates_mbps(topology, model, timing);
    let sets = maximal_independent_sets(topology)?;
    let served: Vec<bool> = (0..n)
        .map(|l| rates[l] > 0.0 && sets.iter().any(|s| s.contains(&l)))
        .collect();
    let excluded: Vec<LinkId> = (0..n).filter(|&l| !served[l]).collect();
    let active_links: Vec<LinkId> = (0..n).filter(|&l| served[l]).collect();
    if active_links.is_empty() {
        return Err(SimError::Oracle("no link can be served".into()));
    }

    // Rate vectors restricted to served links.
    let set_rates: Vec<Vec<f64>> = sets
        .iter()
        .map(|s| {
            active_links
                .iter()
                .map(|&l| if s.contains(&l) { rates[l] } else { 0.0 })
                .collect()
        })
        .collect();
    let m = sets.len();
    let k = active_links.len();
    let mut shares = vec![1.0 / m as f64; m];
    let mut gamma = vec![0.0; k];
    for (s, r) in set_rates.iter().enumerate() {
        for i in 0..k {
            gamma[i] += shares[s] * r[i];
        }
    }

    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    let mut d = vec![0.0; k];
    while iterations < MAX_ITERATIONS {
        let grad: Vec<f64> = set_rates
            .iter()
            .map(|r| r.iter().zip(&gamma).map(|(a, g)| a / g).sum())
            .collect();
        let (toward, g_max) = grad
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, g)| if g > b.1 { (i, g) } else { b });
        gap = g_max - k as f64;
        if gap < GAP_TOLERANCE {
            break;
        }
        let away = (0..m)
            .filter(|&s| shares[s] > 0.0)
            .min_by(|&a, &b| grad[a].total_cmp(&grad[b]))
            .expect("shares sum to one");
        if away == toward {
            break;
        }
        for i in 0..k {
            d[i] = set_rates[toward][i] - set_rates[away][i];
        }
        let t = line_search(&gamma, &d, shares[away]);
        if t <= 0.0 {
            break;
        }
        shares[toward] += t;
        if t >= shares[away] {
            shares[away] = 0.0;
        } else {
            shares[away] -= t;
        }
        for i in 0..k {
            gamma[i] += t * d[i];
        }
        iterations += 1;
        // Periodic refresh keeps accumulated rounding out of γ.
        if iterations % 1000 == 0 {
            gamma.iter_mut().for_each(|g| *g = 0.0);
            for (s, r) in set_rates.iter().enumerate() {
                for i in 0..k {
                    gamma[i] += shares[s] * r[i];
                }
            }
        }
    }
    if gap > 1e-6 {
        return Err(SimError::Oracle(format!(
            "no convergence after {iterations} iterations (gap {gap:e})"
        )));
    }

    let mut rates_bps = vec![0.0; n];
    for (i, &l) in active_links.iter().enumerate() {
        rates_bps[l] = gamma[i] * 1e6;
    }
    let airtime = (0..n)
        .map(|l| {
            sets.iter()
                .zip(&shares)
                .filter(|(s, _)| s.contains(&l))
                .map(|(_, p)| p)
                .sum()
        })
        .collect();
    let sum_log = active_links.iter().map(|&l| rates_bps[l].ln()).sum();
    Ok(PfSolution {
        model,
        rates_bps,
        sets,
        shares,
        airtime,
        sum_log,
        gap: gap.max(0.0),
        iterations,
        excluded,
    })
}
