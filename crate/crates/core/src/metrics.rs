//! Fairness and efficiency scores of a throughput vector.

use serde::Serialize;

/// Jain's index `(Σγ)² / (n Σγ²)`; 1 for an empty or all-zero vector.
pub fn jain_index(rates: &[f64]) -> f64 {
    let sum: f64 = rates.iter().sum();
    let sq: f64 = rates.iter().map(|r| r * r).sum();
    if rates.is_empty() || sq == 0.0 {
        return 1.0;
    }
    sum * sum / (rates.len() as f64 * sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SumLog {
    /// `Σ ln(γ_l)` with γ in b/s; `-inf` when some flow starved.
    pub value: f64,
    pub starved_flows: usize,
}

impl SumLog {
    pub fn is_finite(&self) -> bool {
        self.starved_flows == 0
    }
}

pub fn sum_log(rates_bps: &[f64]) -> SumLog {
    let starved_flows = rates_bps.iter().filter(|&&r| r <= 0.0).count();
    let value = if starved_flows > 0 {
        f64::NEG_INFINITY
    } else {
        rates_bps.iter().map(|r| r.ln()).sum()
    };
    SumLog {
        value,
        starved_flows,
    }
}

/// Measured over optimal sum-log utility, as `exp((U - U*) / n)`: the
/// geometric-mean throughput relative to the optimum.
pub fn utility_ratio(measured: &SumLog, optimum: f64, flows: usize) -> f64 {
    if !measured.is_finite() || flows == 0 {
        return 0.0;
    }
    ((measured.value - optimum) / flows as f64).exp()
}

/// Worst flow's reciprocal of its longest delivery gap, in 1/s.
pub fn short_term_fairness(max_gaps_s: &[f64]) -> f64 {
    max_gaps_s
        .iter()
        .map(|&g| if g > 0.0 { 1.0 / g } else { f64::INFINITY })
        .fold(f64::INFINITY, f64::min)
}

/// Share of payload airtime `(γ_l / c_l) / Σ_k (γ_k / c_k)`.
pub fn airtime_shares(rates_bps: &[f64], capacities_mbps: &[f64]) -> Vec<f64> {
    let air: Vec<f64> = rates_bps
        .iter()
        .zip(capacities_mbps)
        .map(|(r, c)| r / (c * 1e6))
        .collect();
    let total: f64 = air.iter().sum();
    air.iter()
        .map(|a| if total > 0.0 { a / total } else { 0.0 })
        .collect()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
