//! The engine-facing MAC interface and the pieces the protocols share:
//! backoff bookkeeping, the virtual MAC queue with its dequeue process, and
//! the trailing collision-ratio meter.

use serde::{Deserialize, Serialize};

use crate::timing::{double_cw, CW_MAX};

/// Backoff parameters for one contention round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AccessParams {
    pub cw: u32,
    /// Idle slots required before the backoff counter runs (DIFS or AIFS).
    pub aifs_slots: u32,
}

/// What happened to a frame that went unacknowledged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fate {
    Retry,
    Dropped,
}

/// Values logged with each channel access.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct MacSnapshot {
    pub cw: u32,
    pub q_m: Option<u32>,
    pub p_tilde: Option<f64>,
    pub mu_slots: Option<f64>,
    pub burst: u32,
}

/// Per-link MAC state machine driven by the engine.
///
/// Call order for one access: [`Mac::next_access`] when the link (re)enters
/// contention, [`Mac::on_access_won`] when its counter expires, exactly one
/// [`Mac::on_access_result`] for the first frame of the access (RTS or first
/// data frame), then per packet [`Mac::on_delivered`] or [`Mac::on_failed`],
/// [`Mac::on_next_packet`] before each further packet of the burst and
/// finally [`Mac::on_burst_end`].
pub trait Mac: Send {
    fn name(&self) -> &'static str;
    fn next_access(&mut self, now_s: f64) -> AccessParams;
    /// Returns the number of packets (at least one) to send back-to-back.
    fn on_access_won(&mut self, now_s: f64) -> u32;
    fn on_access_result(&mut self, _now_s: f64, _success: bool) {}
    fn on_next_packet(&mut self, _now_s: f64) {}
    fn on_delivered(&mut self, now_s: f64);
    fn on_failed(&mut self, now_s: f64) -> Fate;
    fn on_burst_end(&mut self, _now_s: f64) {}
    /// Once per simulated second with the link's current PHY rate.
    fn on_second(&mut self, _now_s: f64, _capacity_mbps: f64) {}
    /// Re-reads the contention parameters of a pending first attempt. MACs
    /// whose window follows a queue return the window they would pick now;
    /// `None` keeps the current countdown.
    fn refresh_access(&mut self, _now_s: f64) -> Option<AccessParams> {
        None
    }
    fn snapshot(&self) -> MacSnapshot;
}

/// Binary exponential backoff over the hardware CW set with a retry limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Backoff {
    base_cw: u32,
    cw_max: u32,
    stage: u32,
    retries: u32,
    retry_limit: u32,
}

impl Backoff {
    pub fn new(base_cw: u32, retry_limit: u32) -> Self {
        Self::with_cap(base_cw, CW_MAX, retry_limit)
    }

    pub fn with_cap(base_cw: u32, cw_max: u32, retry_limit: u32) -> Self {
        Self {
            base_cw,
            cw_max: cw_max.max(base_cw),
            stage: 0,
            retries: 0,
            retry_limit,
        }
    }

    pub fn stage(&self) -> u32 {
        self.stage
    }

    pub fn retries(&self) -> u32 {
        self.retries
    }

    pub fn base_cw(&self) -> u32 {
        self.base_cw
    }

    /// True while the head-of-line packet has not collided yet.
    pub fn is_fresh(&self) -> bool {
        self.stage == 0
    }

    /// Starts a new backoff sequence from `base_cw`.
    pub fn restart(&mut self, base_cw: u32, cw_max: u32) {
        self.base_cw = base_cw;
        self.cw_max = cw_max.max(base_cw);
        self.stage = 0;
        self.retries = 0;
    }

    pub fn current_cw(&self) -> u32 {
        let mut cw = self.base_cw;
        for _ in 0..self.stage {
            cw = double_cw(cw);
        }
        cw.min(self.cw_max)
    }

    pub fn on_success(&mut self) {
        self.stage = 0;
        self.retries = 0;
    }

    pub fn on_collision(&mut self) -> Fate {
        self.retries += 1;
        if self.retries > self.retry_limit {
            self.stage = 0;
            self.retries = 0;
            Fate::Dropped
        } else {
            if self.current_cw() < self.cw_max {
                self.stage += 1;
            }
            Fate::Retry
        }
    }
}

/// Shared knobs of the queue-driven protocols.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QueueParams {
    /// Queue scaling: `q = b * Q`.
    pub b: f64,
    /// Dequeue-rate constant; CQ→MAQ transfers run at `v / q` packets/s.
    pub v: f64,
    pub q_min: u32,
    pub q_max: u32,
}

impl Default for QueueParams {
    fn default() -> Self {
        Self {
            b: 0.01,
            v: DEFAULT_V,
            q_min: 1,
            q_max: 1000,
        }
    }
}

/// Default dequeue constant. See the README for how it was chosen.
pub const DEFAULT_V: f64 = 400.0;

impl QueueParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.b > 0.0) {
            return Err(format!("b must be > 0, got {}", self.b));
        }
        if !(self.v > 0.0) {
            return Err(format!("v must be > 0, got {}", self.v));
        }
        if self.q_min < 1 || self.q_min >= self.q_max {
            return Err(format!(
                "need 1 <= q_min < q_max, got {}..{}",
                self.q_min, self.q_max
            ));
        }
        Ok(())
    }
}

/// Media access queue fed by a saturated control queue.
///
/// `Q_M` only ever moves through [`Maq::update`], which applies the
/// `[Q_min, Q_max]` clamp. Arrivals from the control queue are generated at
/// `V / q_M` packets per second.
#[derive(Debug, Clone, PartialEq)]
pub struct Maq {
    params: QueueParams,
    len: u32,
    next_arrival_s: f64,
    arrivals: u64,
    services: u64,
    /// The head-of-line packet already left the MAQ and awaits (re)transmission.
    hol_in_iq: bool,
}

impl Maq {
    pub fn new(params: QueueParams) -> Self {
        let len = params.q_min;
        let mut m = Self {
            params,
            len,
            next_arrival_s: 0.0,
            arrivals: 0,
            services: 0,
            hol_in_iq: false,
        };
        m.next_arrival_s = 1.0 / m.dequeue_rate();
        m
    }

    pub fn params(&self) -> &QueueParams {
        &self.params
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Scaled queue `q_M = b * Q_M`.
    pub fn scaled(&self) -> f64 {
        self.params.b * self.len as f64
    }

    /// Sets `Q_M` directly (clamped); for tests and warm starts.
    pub fn set_len(&mut self, len: u32) {
        self.len = len.clamp(self.params.q_min, self.params.q_max);
    }

    /// `Q_M ← clamp(Q_M + arrivals − services, Q_min, Q_max)`.
    pub fn update(&mut self, arrivals: u32, services: u32) {
        let next = self.len as i64 + arrivals as i64 - services as i64;
        self.len = next.clamp(self.params.q_min as i64, self.params.q_max as i64) as u32;
    }

    /// CQ→MAQ transfer rate in packets per second.
    pub fn dequeue_rate(&self) -> f64 {
        self.params.v / self.scaled()
    }

    /// Runs the CQ→MAQ transfer process up to `now_s`.
    pub fn advance(&mut self, now_s: f64) {
        while self.next_arrival_s <= now_s {
            if self.len == self.params.q_max {
                // Arrivals are clamped away; skip them in bulk.
                let dt = 1.0 / self.dequeue_rate();
                let skipped = ((now_s - self.next_arrival_s) / dt).floor() + 1.0;
                self.arrivals += skipped as u64;
                self.next_arrival_s += skipped * dt;
                continue;
            }
            self.update(1, 0);
            self.arrivals += 1;
            self.next_arrival_s += 1.0 / self.dequeue_rate();
        }
    }

    /// Moves the next packet to the interface queue unless the head-of-line
    /// packet is still there from an earlier failed attempt.
    pub fn dispatch(&mut self) {
        if !self.hol_in_iq {
            self.update(0, 1);
            self.services += 1;
            self.hol_in_iq = true;
        }
    }

    /// The head-of-line packet left the interface queue (acked or dropped).
    pub fn release(&mut self) {
        self.hol_in_iq = false;
    }

    pub fn arrivals(&self) -> u64 {
        self.arrivals
    }

    pub fn services(&self) -> u64 {
        self.services
    }
}

/// Exponential moving average updated once per second with a one-second
/// time constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondEma {
    value: f64,
}

pub const EMA_ALPHA: f64 = 0.632_120_558_828_557_7; // 1 - e^-1

impl SecondEma {
    pub fn new(initial: f64) -> Self {
        Self { value: initial }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn push(&mut self, sample: f64) -> f64 {
        self.value += EMA_ALPHA * (sample - self.value);
        self.value
    }
}

/// Measures the fraction of unacknowledged accesses over the last window and
/// smooths it with [`SecondEma`].
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionMeter {
    sent: u32,
    unacked: u32,
    ema: SecondEma,
}

impl Default for CollisionMeter {
    fn default() -> Self {
        Self {
            sent: 0,
            unacked: 0,
            ema: SecondEma::new(0.0),
        }
    }
}

impl CollisionMeter {
    pub fn record(&mut self, success: bool) {
        self.sent += 1;
        if !success {
            self.unacked += 1;
        }
    }

    /// Closes the current window.
    pub fn roll(&mut self) {
        if self.sent > 0 {
            let ratio = self.unacked as f64 / self.sent as f64;
            self.ema.push(ratio);
        }
        self.sent = 0;
        self.unacked = 0;
    }

    pub fn estimate(&self) -> f64 {
        self.ema.value().clamp(0.0, 1.0)
    }
}
