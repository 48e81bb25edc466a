//! Synthetic RSSI samples and signal-level classification.
//!
//! Signal strength falls off linearly with the Chebyshev (L∞) distance to
//! an AP. Under that metric every point of a region is within one region
//! width of each of the region's corner APs and strictly farther from every
//! other AP, so with the default range the region threshold sits exactly on
//! the region boundary.

use std::cmp::Ordering;

use rand::Rng;
use thiserror::Error;

use crate::grid::{ApId, GridTopology};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RssiError {
    #[error("RSSI_Max must lie in 1..=255, got {0}")]
    BadScale(u16),
    #[error("invalid RSSI configuration: {0}")]
    BadConfig(&'static str),
    #[error("duplicate AP {0} in sample")]
    DuplicateAp(ApId),
    #[error("reading {value} exceeds RSSI_Max {max}")]
    OutOfRange { value: u8, max: u8 },
}

/// A NIC vendor's RSSI_Max.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VendorScale {
    rssi_max: u8,
}

impl VendorScale {
    pub const CISCO: VendorScale = VendorScale { rssi_max: 100 };
    pub const SYMBOL: VendorScale = VendorScale { rssi_max: 31 };
    pub const ATHEROS: VendorScale = VendorScale { rssi_max: 60 };

    pub fn new(rssi_max: u16) -> Result<Self, RssiError> {
        match u8::try_from(rssi_max) {
            Ok(m) if m >= 1 => Ok(Self { rssi_max: m }),
            _ => Err(RssiError::BadScale(rssi_max)),
        }
    }

    pub fn rssi_max(&self) -> u8 {
        self.rssi_max
    }
}

impl Default for VendorScale {
    fn default() -> Self {
        Self::CISCO
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SignalLevel {
    Low,
    Medium,
    High,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssiConfig {
    /// Error factor Δe: readings within this many units are "similar".
    pub delta_e: u8,
    /// Sampling interval Δt in ticks.
    pub delta_t: u32,
    pub region_threshold: u8,
    pub lv_mv_bound: u8,
    pub mv_hv_bound: u8,
    pub noise_amplitude: u8,
    /// Distance (region widths) at which the synthesized signal reaches zero.
    pub range: f64,
}

impl RssiConfig {
    /// Tertile thresholds of the vendor scale, Δe = 5, Δt = 1 tick, region
    /// threshold equal to the LV/MV bound and a range that puts the region
    /// threshold half a unit below the reading one region width away.
    pub fn for_scale(scale: VendorScale) -> Self {
        let m = scale.rssi_max() as u32;
        let lv = m.div_ceil(3) as u8;
        let hv = (2 * m).div_ceil(3) as u8;
        Self {
            delta_e: 5,
            delta_t: 1,
            region_threshold: lv,
            lv_mv_bound: lv,
            mv_hv_bound: hv,
            noise_amplitude: 0,
            range: Self::range_for_threshold(scale, lv),
        }
    }

    /// Range placing `M·(1 − 1/range) = threshold − ½`.
    pub fn range_for_threshold(scale: VendorScale, threshold: u8) -> f64 {
        let m = scale.rssi_max() as f64;
        let drop = m - threshold as f64 + 0.5;
        if drop > 0.0 {
            m / drop
        } else {
            f64::INFINITY
        }
    }

    pub fn validate(&self, scale: VendorScale) -> Result<(), RssiError> {
        if self.lv_mv_bound >= self.mv_hv_bound {
            return Err(RssiError::BadConfig("lv_mv_bound must be below mv_hv_bound"));
        }
        if self.mv_hv_bound > scale.rssi_max() {
            return Err(RssiError::BadConfig("mv_hv_bound exceeds RSSI_Max"));
        }
        if self.region_threshold > scale.rssi_max() {
            return Err(RssiError::BadConfig("region_threshold exceeds RSSI_Max"));
        }
        if self.noise_amplitude > self.delta_e {
            return Err(RssiError::BadConfig("noise_amplitude must not exceed delta_e"));
        }
        if self.delta_t == 0 {
            return Err(RssiError::BadConfig("delta_t must be at least one tick"));
        }
        if self.range.is_nan() || self.range <= 0.0 {
            return Err(RssiError::BadConfig("range must be positive"));
        }
        Ok(())
    }
}

impl Default for RssiConfig {
    fn default() -> Self {
        Self::for_scale(VendorScale::default())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Reading {
    pub ap: ApId,
    pub rssi: u8,
}

impl Reading {
    pub fn new(ap: u16, rssi: u8) -> Self {
        Self { ap: ApId(ap), rssi }
    }
}

/// Strongest-first comparison; equal readings order by AP id.
fn strongest_first(a: &Reading, b: &Reading) -> Ordering {
    b.rssi.cmp(&a.rssi).then(a.ap.cmp(&b.ap))
}

/// Up to four readings, strongest first, with distinct APs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct RssiSample {
    readings: Vec<Reading>,
    pub tick: u64,
}

impl RssiSample {
    pub const MAX_READINGS: usize = 4;

    /// Sorts, rejects duplicates and keeps the four strongest readings.
    pub fn new(mut readings: Vec<Reading>, tick: u64) -> Result<Self, RssiError> {
        readings.sort_by(strongest_first);
        for (i, r) in readings.iter().enumerate() {
            if readings[..i].iter().any(|o| o.ap == r.ap) {
                return Err(RssiError::DuplicateAp(r.ap));
            }
        }
        readings.truncate(Self::MAX_READINGS);
        Ok(Self { readings, tick })
    }

    pub fn from_pairs(pairs: &[(u16, u8)], tick: u64) -> Result<Self, RssiError> {
        Self::new(pairs.iter().map(|&(ap, rssi)| Reading::new(ap, rssi)).collect(), tick)
    }

    pub fn readings(&self) -> &[Reading] {
        &self.readings
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }

    pub fn get(&self, ap: ApId) -> Option<u8> {
        self.readings.iter().find(|r| r.ap == ap).map(|r| r.rssi)
    }

    pub fn strongest(&self) -> Option<Reading> {
        self.readings.first().copied()
    }

    pub fn check_scale(&self, scale: VendorScale) -> Result<(), RssiError> {
        match self.readings.iter().find(|r| r.rssi > scale.rssi_max()) {
            Some(r) => Err(RssiError::OutOfRange { value: r.rssi, max: scale.rssi_max() }),
            None => Ok(()),
        }
    }
}

/// Noise-free reading of `ap` from `pos`.
pub fn ideal_rssi(pos: (f64, f64), ap_pos: (f64, f64), scale: VendorScale, cfg: &RssiConfig) -> f64 {
    let d = (pos.0 - ap_pos.0).abs().max((pos.1 - ap_pos.1).abs());
    scale.rssi_max() as f64 * (1.0 - d / cfg.range).max(0.0)
}

/// Samples every AP from `pos`, adds uniform integer noise, clamps and
/// keeps the four strongest readings.
pub fn synthesize_sample<R: Rng + ?Sized>(
    pos: (f64, f64),
    grid: &GridTopology,
    scale: VendorScale,
    cfg: &RssiConfig,
    tick: u64,
    rng: &mut R,
) -> RssiSample {
    let noise = cfg.noise_amplitude as i32;
    let max = scale.rssi_max() as i32;
    let readings = grid
        .aps()
        .map(|ap| {
            let ap_pos = grid.ap_position(ap).expect("AP in bounds");
            let base = ideal_rssi(pos, ap_pos, scale, cfg).round() as i32;
            let jitter = if noise > 0 { rng.gen_range(-noise..=noise) } else { 0 };
            Reading { ap, rssi: (base + jitter).clamp(0, max) as u8 }
        })
        .collect();
    RssiSample::new(readings, tick).expect("grid APs are distinct")
}

pub fn classify_level(value: u8, cfg: &RssiConfig) -> SignalLevel {
    if value < cfg.lv_mv_bound {
        SignalLevel::Low
    } else if value >= cfg.mv_hv_bound {
        SignalLevel::High
    } else {
        SignalLevel::Medium
    }
}

/// Readings within Δe of each other. Reflexive and symmetric, not transitive.
pub fn similar(a: u8, b: u8, cfg: &RssiConfig) -> bool {
    a.abs_diff(b) <= cfg.delta_e
}
