//! Comparison MACs: plain 802.11 DCF, the two practical optimal-CSMA
//! variants (access-probability adaptation with a fixed length, and length
//! adaptation on top of DCF's window) and a DiffQ-style queue-priority
//! heuristic.
//!
//! None of them know the link rate: lengths are converted to packets at the
//! reference rate.

use serde::{Deserialize, Serialize};

use crate::mac::{AccessParams, Backoff, Fate, Mac, MacSnapshot, Maq, QueueParams};
use crate::odcf::{sigmoid_access, DeficitCounter};
use crate::timing::{quantize_cw, TimingParams, CW_MAX, CW_SET};

/// One DiffQ priority band: queues in `[q_from, next band's q_from)` use
/// these EDCA-style parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiffqLevel {
    pub q_from: u32,
    pub cw_min: u32,
    pub cw_max: u32,
    /// Idle slots after SIFS before the backoff counter may run.
    pub aifsn: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineParams {
    pub dcf_cwmin: u32,
    pub dcf_cwmax: u32,
    /// Fixed length used inside the CW-adaptation product law.
    pub ocsma_fixed_mu_slots: f64,
    /// Ascending in `q_from`, first band starting at 0.
    pub diffq_levels: Vec<DiffqLevel>,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            dcf_cwmin: 15,
            dcf_cwmax: 1023,
            ocsma_fixed_mu_slots: 150.0,
            diffq_levels: vec![
                DiffqLevel { q_from: 0, cw_min: 255, cw_max: 1023, aifsn: 7 },
                DiffqLevel { q_from: 40, cw_min: 63, cw_max: 255, aifsn: 5 },
                DiffqLevel { q_from: 80, cw_min: 31, cw_max: 127, aifsn: 3 },
                DiffqLevel { q_from: 120, cw_min: 15, cw_max: 31, aifsn: 2 },
            ],
        }
    }
}

impl BaselineParams {
    pub fn validate(&self, q_max: u32) -> Result<(), String> {
        for cw in [self.dcf_cwmin, self.dcf_cwmax] {
            if !CW_SET.contains(&cw) {
                return Err(format!("DCF window {cw} is not a hardware CW"));
            }
        }
        if self.dcf_cwmin > self.dcf_cwmax {
            return Err("dcf_cwmin exceeds dcf_cwmax".into());
        }
        if !(self.ocsma_fixed_mu_slots > 0.0) {
            return Err("ocsma_fixed_mu_slots must be positive".into());
        }
        let levels = &self.diffq_levels;
        if levels.first().map(|l| l.q_from) != Some(0) {
            return Err("the first DiffQ band must start at queue 0".into());
        }
        for w in levels.windows(2) {
            if w[1].q_from <= w[0].q_from {
                return Err("DiffQ bands must be strictly ascending".into());
            }
            if w[1].cw_min > w[0].cw_min {
                return Err("a higher DiffQ band may not use a larger CW".into());
            }
        }
        if levels.last().map(|l| l.q_from).unwrap_or(0) > q_max {
            return Err("DiffQ bands extend beyond q_max".into());
        }
        for l in levels {
            if !CW_SET.contains(&l.cw_min) || !CW_SET.contains(&l.cw_max) || l.cw_min > l.cw_max {
                return Err(format!("invalid DiffQ windows {}..{}", l.cw_min, l.cw_max));
            }
        }
        Ok(())
    }

    pub fn diffq_level(&self, q_m: u32) -> DiffqLevel {
        *self
            .diffq_levels
            .iter()
            .rev()
            .find(|l| q_m >= l.q_from)
            .unwrap_or(&self.diffq_levels[0])
    }
}

/// Largest access probability; the sigmoid's value at the top of the queue
/// range.
pub fn p_bar(c: f64, q_max_scaled: f64) -> f64 {
    sigmoid_access(q_max_scaled, c)
}

/// CW-adaptation rule: `p = min(p̄, e^q / μ)`, window `2/p − 1` snapped to
/// the hardware set.
pub fn ocsma_cw_window(q: f64, mu_slots: f64, p_bar: f64) -> (f64, u32) {
    let p = (q.exp() / mu_slots).min(p_bar);
    (p, quantize_cw(2.0 / p - 1.0))
}

/// μ-adaptation rule: `μ = min(e^q / p, μ̄)` with `p = 2/(CW + 1)`.
pub fn ocsma_mu_slots(q: f64, cw: u32, mu_max_slots: f64) -> f64 {
    let p = 2.0 / (cw as f64 + 1.0);
    (q.exp() / p).min(mu_max_slots)
}

pub struct DcfMac {
    timing: TimingParams,
    backoff: Backoff,
    cwmin: u32,
    cwmax: u32,
}

impl DcfMac {
    pub fn new(params: &BaselineParams, timing: TimingParams) -> Self {
        Self {
            backoff: Backoff::with_cap(params.dcf_cwmin, params.dcf_cwmax, timing.retry_limit),
            timing,
            cwmin: params.dcf_cwmin,
            cwmax: params.dcf_cwmax,
        }
    }
}

impl Mac for DcfMac {
    fn name(&self) -> &'static str {
        "dcf"
    }

    fn next_access(&mut self, _now_s: f64) -> AccessParams {
        if self.backoff.is_fresh() {
            self.backoff.restart(self.cwmin, self.cwmax);
        }
        AccessParams {
            cw: self.backoff.current_cw(),
            aifs_slots: self.timing.difs_slots,
        }
    }

    fn on_access_won(&mut self, _now_s: f64) -> u32 {
        1
    }

    fn on_delivered(&mut self, _now_s: f64) {
        self.backoff.on_success();
    }

    fn on_failed(&mut self, _now_s: f64) -> Fate {
        self.backoff.on_collision()
    }

    fn snapshot(&self) -> MacSnapshot {
        MacSnapshot {
            cw: self.backoff.current_cw(),
            burst: 1,
            ..MacSnapshot::default()
        }
    }
}

pub struct OcsmaCwMac {
    timing: TimingParams,
    maq: Maq,
    backoff: Backoff,
    mu_slots: f64,
    p_bar: f64,
    last_p: f64,
}

impl OcsmaCwMac {
    pub fn new(queue: QueueParams, c: f64, params: &BaselineParams, timing: TimingParams) -> Self {
        let p_bar = p_bar(c, queue.b * queue.q_max as f64);
        let maq = Maq::new(queue);
        let (p, cw) = ocsma_cw_window(maq.scaled(), params.ocsma_fixed_mu_slots, p_bar);
        Self {
            backoff: Backoff::new(cw, timing.retry_limit),
            timing,
            maq,
            mu_slots: params.ocsma_fixed_mu_slots,
            p_bar,
            last_p: p,
        }
    }

    pub fn maq_mut(&mut self) -> &mut Maq {
        &mut self.maq
    }
}

impl Mac for OcsmaCwMac {
    fn name(&self) -> &'static str {
        "ocsma_cw"
    }

    fn next_access(&mut self, now_s: f64) -> AccessParams {
        self.maq.advance(now_s);
        if self.backoff.is_fresh() {
            let (p, cw) = ocsma_cw_window(self.maq.scaled(), self.mu_slots, self.p_bar);
            self.last_p = p;
            self.backoff.restart(cw, CW_MAX);
        }
        AccessParams {
            cw: self.backoff.current_cw(),
            aifs_slots: self.timing.difs_slots,
        }
    }

    fn on_access_won(&mut self, now_s: f64) -> u32 {
        self.maq.advance(now_s);
        self.maq.dispatch();
        1
    }

    fn on_delivered(&mut self, _now_s: f64) {
        self.maq.release();
        self.backoff.on_success();
    }

    fn on_failed(&mut self, _now_s: f64) -> Fate {
        let fate = self.backoff.on_collision();
        if fate == Fate::Dropped {
            self.maq.release();
        }
        fate
    }

    fn on_second(&mut self, now_s: f64, _capacity_mbps: f64) {
        self.maq.advance(now_s);
    }

    fn refresh_access(&mut self, now_s: f64) -> Option<AccessParams> {
        if self.backoff.is_fresh() {
            Some(self.next_access(now_s))
        } else {
            None
        }
    }

    fn snapshot(&self) -> MacSnapshot {
        MacSnapshot {
            cw: self.backoff.current_cw(),
            q_m: Some(self.maq.len()),
            p_tilde: Some(self.last_p),
            mu_slots: Some(self.mu_slots),
            burst: 1,
        }
    }
}

pub struct OcsmaMuMac {
    timing: TimingParams,
    maq: Maq,
    backoff: Backoff,
    cwmin: u32,
    cwmax: u32,
    deficit: DeficitCounter,
    last_mu: f64,
    last_burst: u32,
}

impl OcsmaMuMac {
    pub fn new(queue: QueueParams, params: &BaselineParams, timing: TimingParams) -> Self {
        Self {
            backoff: Backoff::with_cap(params.dcf_cwmin, params.dcf_cwmax, timing.retry_limit),
            timing,
            maq: Maq::new(queue),
            cwmin: params.dcf_cwmin,
            cwmax: params.dcf_cwmax,
            deficit: DeficitCounter::default(),
            last_mu: 0.0,
            last_burst: 0,
        }
    }

    pub fn maq_mut(&mut self) -> &mut Maq {
        &mut self.maq
    }
}

impl Mac for OcsmaMuMac {
    fn name(&self) -> &'static str {
        "ocsma_mu"
    }

    fn next_access(&mut self, now_s: f64) -> AccessParams {
        self.maq.advance(now_s);
        if self.backoff.is_fresh() {
            self.backoff.restart(self.cwmin, self.cwmax);
        }
        AccessParams {
            cw: self.backoff.current_cw(),
            aifs_slots: self.timing.difs_slots,
        }
    }

    fn on_access_won(&mut self, now_s: f64) -> u32 {
        self.maq.advance(now_s);
        let mu = ocsma_mu_slots(
            self.maq.scaled(),
            self.backoff.current_cw(),
            self.timing.mu_max_slots(),
        );
        let bytes = self
            .timing
            .slots_to_bytes(mu, self.timing.reference_capacity_mbps);
        let packets = self.deficit.grant(bytes, self.timing.packet_bytes);
        self.last_mu = mu;
        self.last_burst = packets;
        self.maq.dispatch();
        packets
    }

    fn on_next_packet(&mut self, now_s: f64) {
        self.maq.advance(now_s);
        self.maq.dispatch();
    }

    fn on_delivered(&mut self, _now_s: f64) {
        self.maq.release();
        self.backoff.on_success();
    }

    fn on_failed(&mut self, _now_s: f64) -> Fate {
        let fate = self.backoff.on_collision();
        if fate == Fate::Dropped {
            self.maq.release();
        }
        fate
    }

    fn on_second(&mut self, now_s: f64, _capacity_mbps: f64) {
        self.maq.advance(now_s);
    }

    fn snapshot(&self) -> MacSnapshot {
        MacSnapshot {
            cw: self.backoff.current_cw(),
            q_m: Some(self.maq.len()),
            p_tilde: None,
            mu_slots: Some(self.last_mu),
            burst: self.last_burst,
        }
    }
}

pub struct DiffqMac {
    timing: TimingParams,
    params: BaselineParams,
    maq: Maq,
    backoff: Backoff,
    level: DiffqLevel,
}

impl DiffqMac {
    pub fn new(queue: QueueParams, params: BaselineParams, timing: TimingParams) -> Self {
        let maq = Maq::new(queue);
        let level = params.diffq_level(maq.len());
        Self {
            backoff: Backoff::with_cap(level.cw_min, level.cw_max, timing.retry_limit),
            timing,
            params,
            maq,
            level,
        }
    }

    pub fn maq_mut(&mut self) -> &mut Maq {
        &mut self.maq
    }

    pub fn level(&self) -> DiffqLevel {
        self.level
    }
}

impl Mac for DiffqMac {
    fn name(&self) -> &'static str {
        "diffq"
    }

    fn next_access(&mut self, now_s: f64) -> AccessParams {
        self.maq.advance(now_s);
        if self.backoff.is_fresh() {
            self.level = self.params.diffq_level(self.maq.len());
            self.backoff.restart(self.level.cw_min, self.level.cw_max);
        }
        AccessParams {
            cw: self.backoff.current_cw(),
            aifs_slots: self.timing.sifs_slots + self.level.aifsn,
        }
    }

    fn on_access_won(&mut self, now_s: f64) -> u32 {
        self.maq.advance(now_s);
        self.maq.dispatch();
        1
    }

    fn on_delivered(&mut self, _now_s: f64) {
        self.maq.release();
        self.backoff.on_success();
    }

    fn on_failed(&mut self, _now_s: f64) -> Fate {
        let fate = self.backoff.on_collision();
        if fate == Fate::Dropped {
            self.maq.release();
        }
        fate
    }

    fn on_second(&mut self, now_s: f64, _capacity_mbps: f64) {
        self.maq.advance(now_s);
    }

    fn refresh_access(&mut self, now_s: f64) -> Option<AccessParams> {
        if self.backoff.is_fresh() {
            Some(self.next_access(now_s))
        } else {
            None
        }
    }

    fn snapshot(&self) -> MacSnapshot {
        MacSnapshot {
            cw: self.backoff.current_cw(),
            q_m: Some(self.maq.len()),
            burst: 1,
            ..MacSnapshot::default()
        }
    }
}
