//! O-DCF: queue-driven initial contention window, BEB on top of it, and a
//! transmission length chosen so that (success access probability) ×
//! (length) tracks `exp(c · q)`.
//!
//! Per link the protocol keeps a media access queue (see [`Maq`]) whose
//! scaled length `q` drives three things:
//!
//! * the initial CW, a quantized sigmoid of `c · q` ([`initial_cw`]);
//! * the transmission length `min(exp(c · q) / p̃, μ̄)` in slots
//!   ([`burst_slots`]), where `p̃` estimates the access probability at which
//!   BEB ends up succeeding ([`estimate_success_p`]);
//! * the CQ→MAQ dequeue rate `V / q`.
//!
//! `c` is the link rate relative to the reference rate, smoothed once per
//! second. Slot lengths become bytes at the link's rate, so the queue weight
//! buys airtime rather than bytes.

use serde::{Deserialize, Serialize};

use crate::mac::{
    AccessParams, Backoff, CollisionMeter, Fate, Mac, MacSnapshot, Maq, QueueParams, SecondEma,
};
use crate::timing::{quantize_cw, TimingParams, CW_MAX};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OdcfParams {
    pub queue: QueueParams,
    /// Sigmoid constant.
    pub c: f64,
    /// Lower bound on `p̃` when the measured collision ratio reaches one.
    pub p_tilde_floor: f64,
    /// Scale the queue by the relative link rate.
    pub capacity_scaling: bool,
}

impl Default for OdcfParams {
    fn default() -> Self {
        Self {
            queue: QueueParams::default(),
            c: 500.0,
            p_tilde_floor: 1e-4,
            capacity_scaling: true,
        }
    }
}

impl OdcfParams {
    pub fn validate(&self) -> Result<(), String> {
        self.queue.validate()?;
        if !(self.c > 0.0) {
            return Err(format!("c must be > 0, got {}", self.c));
        }
        if !(self.p_tilde_floor > 0.0 && self.p_tilde_floor <= 1.0) {
            return Err("p_tilde_floor must be in (0, 1]".into());
        }
        Ok(())
    }
}

/// Sigmoid access probability `e^x / (e^x + C)`.
pub fn sigmoid_access(x: f64, c: f64) -> f64 {
    1.0 / (1.0 + c * (-x).exp())
}

/// Unquantized initial window `2(e^x + C)/e^x − 1`, i.e. `2/p − 1` for the
/// sigmoid access probability.
pub fn cw_raw(x: f64, c: f64) -> f64 {
    1.0 + 2.0 * c * (-x).exp()
}

/// Initial CW for weight `x = c_rel · q_M`, snapped to the hardware set.
pub fn initial_cw(x: f64, c: f64) -> u32 {
    quantize_cw(cw_raw(x, c))
}

/// Success access probability after BEB, given the initial window, the
/// collision ratio `pc` and the retry limit `m`.
///
/// The classic expression divides by `1 − 2pc`; it is evaluated here through
/// the identity `(1 − (2pc)^{m+1}) / (1 − 2pc) = Σ_{i=0}^{m} (2pc)^i`, which
/// is exact for `pc < 1/2`, continuous at `pc = 1/2` and extends the formula
/// to the whole of `[0, 1]`. At `pc = 1` the value is zero; callers floor it.
pub fn estimate_success_p(cw: u32, pc: f64, m: u32) -> f64 {
    let pc = pc.clamp(0.0, 1.0);
    let tail = 1.0 - pc.powi(m as i32 + 1);
    let geometric: f64 = (0..=m).map(|i| (2.0 * pc).powi(i as i32)).sum();
    let denom = (cw as f64 + 1.0) * geometric * (1.0 - pc) + tail;
    if denom <= 0.0 {
        return 0.0;
    }
    2.0 * tail / denom
}

/// Transmission length in slots: `min(e^x / p̃, μ̄)`.
pub fn burst_slots(x: f64, p_tilde: f64, mu_max_slots: f64) -> f64 {
    (x.exp() / p_tilde).min(mu_max_slots)
}

/// Index of the largest MAQ; ties go to the lowest index. `None` when every
/// queue is empty.
pub fn schedule_next_maq(lengths: &[u32]) -> Option<usize> {
    let mut best: Option<(usize, u32)> = None;
    for (i, &len) in lengths.iter().enumerate() {
        if len == 0 {
            continue;
        }
        match best {
            Some((_, b)) if b >= len => {}
            _ => best = Some((i, len)),
        }
    }
    best.map(|(i, _)| i)
}

/// Splits a byte grant into whole packets, carrying the remainder.
///
/// `balance` holds granted-minus-packetized bytes. At least one packet is
/// always sent; a shortfall shows up as a negative balance and is paid back
/// from the next grant.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DeficitCounter {
    balance: f64,
    granted: f64,
    packetized: f64,
}

impl DeficitCounter {
    pub fn grant(&mut self, bytes: f64, packet_bytes: u32) -> u32 {
        let pb = packet_bytes as f64;
        self.granted += bytes;
        self.balance += bytes;
        let packets = ((self.balance / pb).floor() as i64).max(1) as u32;
        self.balance -= packets as f64 * pb;
        self.packetized += packets as f64 * pb;
        packets
    }

    /// Unused surplus carried to the next grant.
    pub fn deficit_bytes(&self) -> f64 {
        self.balance.max(0.0)
    }

    /// Bytes borrowed by the at-least-one-packet rule.
    pub fn debt_bytes(&self) -> f64 {
        (-self.balance).max(0.0)
    }

    pub fn balance(&self) -> f64 {
        self.balance
    }

    pub fn granted_bytes(&self) -> f64 {
        self.granted
    }

    pub fn packetized_bytes(&self) -> f64 {
        self.packetized
    }
}

/// Observable per-link O-DCF state.
#[derive(Debug, Clone, PartialEq)]
pub struct OdcfLinkState {
    pub maq: Maq,
    pub backoff: Backoff,
    pub meter: CollisionMeter,
    pub p_tilde: f64,
    pub deficit: DeficitCounter,
    /// Smoothed link rate in Mb/s.
    pub capacity: SecondEma,
    pub last_mu_slots: f64,
    pub last_burst: u32,
}

pub struct OdcfMac {
    params: OdcfParams,
    timing: TimingParams,
    state: OdcfLinkState,
}

impl OdcfMac {
    pub fn new(params: OdcfParams, timing: TimingParams, capacity_mbps: f64) -> Self {
        let maq = Maq::new(params.queue.clone());
        let x = if params.capacity_scaling {
            capacity_mbps / timing.reference_capacity_mbps * maq.scaled()
        } else {
            maq.scaled()
        };
        let cw = initial_cw(x, params.c);
        let state = OdcfLinkState {
            maq,
            backoff: Backoff::new(cw, timing.retry_limit),
            meter: CollisionMeter::default(),
            p_tilde: estimate_success_p(cw, 0.0, timing.retry_limit),
            deficit: DeficitCounter::default(),
            capacity: SecondEma::new(capacity_mbps),
            last_mu_slots: 0.0,
            last_burst: 0,
        };
        Self {
            params,
            timing,
            state,
        }
    }

    pub fn state(&self) -> &OdcfLinkState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut OdcfLinkState {
        &mut self.state
    }

    /// Relative link capacity `c_l`.
    pub fn c_rel(&self) -> f64 {
        if self.params.capacity_scaling {
            self.state.capacity.value() / self.timing.reference_capacity_mbps
        } else {
            1.0
        }
    }

    /// Queue weight fed to the sigmoid and the length rule.
    pub fn weight(&self) -> f64 {
        self.c_rel() * self.state.maq.scaled()
    }

    pub fn update_capacity(&mut self, capacity_mbps: f64) {
        self.state.capacity.push(capacity_mbps);
    }

    /// Picks the burst for a won access and returns its packet count.
    pub fn select_burst(&mut self) -> u32 {
        let p_tilde = estimate_success_p(
            self.state.backoff.base_cw(),
            self.state.meter.estimate(),
            self.timing.retry_limit,
        )
        .max(self.params.p_tilde_floor);
        self.state.p_tilde = p_tilde;
        let mu = burst_slots(self.weight(), p_tilde, self.timing.mu_max_slots());
        let bytes = self.timing.slots_to_bytes(mu, self.state.capacity.value());
        let packets = self.state.deficit.grant(bytes, self.timing.packet_bytes);
        self.state.last_mu_slots = mu;
        self.state.last_burst = packets;
        packets
    }
}

impl Mac for OdcfMac {
    fn name(&self) -> &'static str {
        "odcf"
    }

    fn next_access(&mut self, now_s: f64) -> AccessParams {
        self.state.maq.advance(now_s);
        if self.state.backoff.is_fresh() {
            let cw = initial_cw(self.weight(), self.params.c);
            self.state.backoff.restart(cw, CW_MAX);
        }
        AccessParams {
            cw: self.state.backoff.current_cw(),
            aifs_slots: self.timing.difs_slots,
        }
    }

    fn on_access_won(&mut self, now_s: f64) -> u32 {
        self.state.maq.advance(now_s);
        let packets = self.select_burst();
        self.state.maq.dispatch();
        packets
    }

    fn on_access_result(&mut self, _now_s: f64, success: bool) {
        self.state.meter.record(success);
    }

    fn on_next_packet(&mut self, now_s: f64) {
        self.state.maq.advance(now_s);
        self.state.maq.dispatch();
    }

    fn on_delivered(&mut self, _now_s: f64) {
        self.state.maq.release();
        self.state.backoff.on_success();
    }

    fn on_failed(&mut self, _now_s: f64) -> Fate {
        let fate = self.state.backoff.on_collision();
        if fate == Fate::Dropped {
            self.state.maq.release();
        }
        fate
    }

    fn on_second(&mut self, now_s: f64, capacity_mbps: f64) {
        self.state.maq.advance(now_s);
        self.state.meter.roll();
        self.update_capacity(capacity_mbps);
    }

    fn refresh_access(&mut self, now_s: f64) -> Option<AccessParams> {
        if self.state.backoff.is_fresh() {
            Some(self.next_access(now_s))
        } else {
            None
        }
    }

    fn snapshot(&self) -> MacSnapshot {
        MacSnapshot {
            cw: self.state.backoff.current_cw(),
            q_m: Some(self.state.maq.len()),
            p_tilde: Some(self.state.p_tilde),
            mu_slots: Some(self.state.last_mu_slots),
            burst: self.state.last_burst,
        }
    }
}
