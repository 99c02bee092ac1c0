//! Mini-slot timing of the 802.11a PHY as seen by the engine.

use serde::{Deserialize, Serialize};

/// Contention windows the hardware accepts: `2^n - 1` for `n = 1..=10`.
pub const CW_SET: [u32; 10] = [1, 3, 7, 15, 31, 63, 127, 255, 511, 1023];

pub const CW_MAX: u32 = 1023;

/// Control-frame durations are 802.11a values at the 6 Mb/s basic rate,
/// rounded up to whole 9 μs slots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingParams {
    pub slot_us: f64,
    /// 16 μs.
    pub sifs_slots: u32,
    /// SIFS + 2 slots = 34 μs.
    pub difs_slots: u32,
    /// 14-byte ACK: 44 μs.
    pub ack_slots: u32,
    /// 20-byte RTS: 52 μs.
    pub rts_slots: u32,
    /// 14-byte CTS: 44 μs.
    pub cts_slots: u32,
    /// PLCP preamble and SIGNAL field.
    pub preamble_us: f64,
    /// OFDM symbol duration.
    pub symbol_us: f64,
    /// SERVICE and tail bits added to every PSDU.
    pub plcp_bits: u32,
    /// Bytes carried on top of the application payload: MAC header and
    /// FCS (28), LLC/SNAP (8), IP and UDP (28).
    pub header_bytes: u32,
    /// Spacing between back-to-back packets of one burst.
    pub burst_gap_slots: u32,
    pub retry_limit: u32,
    pub max_burst_packets: u32,
    pub packet_bytes: u32,
    pub reference_capacity_mbps: f64,
}

impl Default for TimingParams {
    fn default() -> Self {
        Self {
            slot_us: 9.0,
            sifs_slots: 2,
            difs_slots: 4,
            ack_slots: 5,
            rts_slots: 6,
            cts_slots: 5,
            preamble_us: 20.0,
            symbol_us: 4.0,
            plcp_bits: 22,
            header_bytes: 64,
            burst_gap_slots: 2,
            retry_limit: 4,
            max_burst_packets: 64,
            packet_bytes: 1000,
            reference_capacity_mbps: 6.0,
        }
    }
}

impl TimingParams {
    pub fn validate(&self) -> Result<(), String> {
        let durations = [
            ("sifs_slots", self.sifs_slots),
            ("difs_slots", self.difs_slots),
            ("ack_slots", self.ack_slots),
            ("rts_slots", self.rts_slots),
            ("cts_slots", self.cts_slots),
            ("burst_gap_slots", self.burst_gap_slots),
            ("packet_bytes", self.packet_bytes),
            ("max_burst_packets", self.max_burst_packets),
        ];
        for (name, v) in durations {
            if v == 0 {
                return Err(format!("{name} must be >= 1"));
            }
        }
        if !(self.slot_us > 0.0
            && self.symbol_us > 0.0
            && self.reference_capacity_mbps > 0.0
            && self.preamble_us >= 0.0)
        {
            return Err("slot_us, symbol_us and reference_capacity_mbps must be positive".into());
        }
        Ok(())
    }

    /// Airtime of the payload bits alone, in (fractional) slots.
    pub fn payload_slots(&self, capacity_mbps: f64) -> f64 {
        self.packet_bytes as f64 * 8.0 / capacity_mbps / self.slot_us
    }

    /// Whole-slot duration of one data frame: preamble plus the PSDU padded
    /// to whole OFDM symbols.
    pub fn data_slots(&self, capacity_mbps: f64) -> u32 {
        let bits = (self.packet_bytes + self.header_bytes) as f64 * 8.0 + self.plcp_bits as f64;
        let bits_per_symbol = capacity_mbps * self.symbol_us;
        let symbols = (bits / bits_per_symbol - 1e-9).ceil();
        let us = self.preamble_us + symbols * self.symbol_us;
        ((us / self.slot_us - 1e-9).ceil() as u32).max(1)
    }

    /// Slots one packet occupies inside a burst: data, SIFS, ACK and the
    /// inter-packet gap.
    pub fn packet_cycle_slots(&self, capacity_mbps: f64) -> u32 {
        self.data_slots(capacity_mbps) + self.sifs_slots + self.ack_slots + self.burst_gap_slots
    }

    /// Slots of `packets` back-to-back packets (no trailing gap).
    pub fn burst_slots(&self, packets: u32, capacity_mbps: f64) -> u64 {
        let p = packets.max(1) as u64;
        p * self.packet_cycle_slots(capacity_mbps) as u64 - self.burst_gap_slots as u64
    }

    /// Cap on the transmission length: `max_burst_packets` worth of payload
    /// airtime at the reference capacity.
    pub fn mu_max_slots(&self) -> f64 {
        self.max_burst_packets as f64 * self.payload_slots(self.reference_capacity_mbps)
    }

    /// Converts a transmission length in slots into bytes at the given rate.
    pub fn slots_to_bytes(&self, slots: f64, capacity_mbps: f64) -> f64 {
        slots * capacity_mbps * self.slot_us / 8.0
    }

    pub fn slots_per_second(&self) -> f64 {
        1e6 / self.slot_us
    }

    pub fn slot_at(&self, seconds: f64) -> u64 {
        (seconds * self.slots_per_second()).round() as u64
    }

    pub fn seconds(&self, slot: u64) -> f64 {
        slot as f64 * self.slot_us * 1e-6
    }

    /// Payload fraction of a long back-to-back burst: the share of channel
    /// time that carries payload bits once contention overhead is removed.
    pub fn burst_efficiency(&self, capacity_mbps: f64) -> f64 {
        self.payload_slots(capacity_mbps) / self.packet_cycle_slots(capacity_mbps) as f64
    }

    /// Payload fraction of a lone single-packet DCF exchange with mean backoff
    /// `cw / 2`.
    pub fn dcf_efficiency(&self, capacity_mbps: f64, cw: u32) -> f64 {
        let cycle = self.difs_slots as f64
            + cw as f64 / 2.0
            + self.data_slots(capacity_mbps) as f64
            + self.sifs_slots as f64
            + self.ack_slots as f64;
        self.payload_slots(capacity_mbps) / cycle
    }
}

/// Member of [`CW_SET`] closest to `raw`; ties go to the smaller window.
pub fn quantize_cw(raw: f64) -> u32 {
    if raw.is_nan() {
        return CW_MAX;
    }
    let mut best = CW_SET[0];
    let mut best_d = (raw - best as f64).abs();
    for &cw in &CW_SET[1..] {
        let d = (raw - cw as f64).abs();
        if d < best_d {
            best = cw;
            best_d = d;
        }
    }
    best
}

/// One binary-exponential-backoff doubling, capped at [`CW_MAX`].
pub fn double_cw(cw: u32) -> u32 {
    (cw.saturating_mul(2) + 1).min(CW_MAX)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_packet_at_six_mbps_is_about_148_slots() {
        let t = TimingParams::default();
        assert!((t.payload_slots(6.0) - 148.148).abs() < 1e-2);
        assert_eq!(t.data_slots(6.0), 161);
        // 1064-byte PSDU at 48 Mb/s: 45 symbols.
        assert_eq!(t.data_slots(48.0), 23);
        assert!(t.validate().is_ok());
    }

    #[test]
    fn quantize_picks_nearest_and_breaks_ties_low() {
        assert_eq!(quantize_cw(991.2), 1023);
        assert_eq!(quantize_cw(7.738), 7);
        assert_eq!(quantize_cw(296.0), 255);
        assert_eq!(quantize_cw(11.0), 7);
        assert_eq!(quantize_cw(0.2), 1);
        assert_eq!(quantize_cw(1e9), 1023);
    }

    #[test]
    fn doubling_stays_in_set() {
        let mut cw = 15;
        for _ in 0..2 {
            cw = double_cw(cw);
        }
        assert_eq!(cw, 63);
        assert_eq!(double_cw(1023), 1023);
        for &c in &CW_SET {
            assert!(CW_SET.contains(&double_cw(c)));
        }
    }

    #[test]
    fn slot_byte_conversion() {
        let t = TimingParams::default();
        let bytes = t.slots_to_bytes(t.payload_slots(6.0), 6.0);
        assert!((bytes - 1000.0).abs() < 1e-9);
        assert_eq!(t.slot_at(1.0), 111_111);
    }
}
