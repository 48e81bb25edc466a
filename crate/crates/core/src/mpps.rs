//! Mobile path prediction server: turns RSSI reports into reservation and
//! handoff directives and commits finished paths to the miner.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rand::Rng;
use thiserror::Error;

use crate::grid::{ApId, GridError, GridTopology, RegionId};
use crate::miner::{predict_next_ap, MinerError, PatternDatabase, ScoringConfig};
use crate::mobility::{MobilePath, PathStep};
use crate::rssi::{similar, synthesize_sample, Reading, RssiConfig, RssiError, RssiSample, VendorScale};
use crate::security::{MsgType, SecurityError, ServerEndpoint, Verdict};
use crate::tracker::{
    detect_motion, infer_direction, locate_region, predict_region, should_handoff, Motion, TrackState,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MppsError {
    #[error(transparent)]
    Rssi(#[from] RssiError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Miner(#[from] MinerError),
    #[error(transparent)]
    Security(#[from] SecurityError),
    #[error("malformed report: {0}")]
    Report(String),
    #[error("malformed directive: {0}")]
    Directive(String),
    #[error("stage-2 reservation at AP {ap} for node {mn_id} without a stage-1 reservation")]
    Stage2WithoutStage1 { mn_id: u16, ap: ApId },
    #[error("node {mn_id} already holds a reservation at AP {ap}")]
    DuplicateReservation { mn_id: u16, ap: ApId },
    #[error("path of {0} visit(s) is too short to commit")]
    PathTooShort(usize),
    #[error("unknown mobile node {0}")]
    UnknownNode(u16),
    #[error("history sink: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub enum TrafficClass {
    #[default]
    Data,
    Voice,
    Video,
}

impl TrafficClass {
    /// Buffer units reserved for the class.
    pub fn units(self) -> u32 {
        match self {
            TrafficClass::Data => 1,
            TrafficClass::Voice => 4,
            TrafficClass::Video => 8,
        }
    }

    fn code(self) -> u8 {
        self as u8
    }

    fn from_code(b: u8) -> Option<Self> {
        [TrafficClass::Data, TrafficClass::Voice, TrafficClass::Video].get(b as usize).copied()
    }
}

impl std::str::FromStr for TrafficClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "data" => Ok(TrafficClass::Data),
            "voice" => Ok(TrafficClass::Voice),
            "video" => Ok(TrafficClass::Video),
            other => Err(format!("unknown traffic class `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DirectiveKind {
    ReserveStage1,
    ReserveStage2,
    Handoff,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Directive {
    pub mn_id: u16,
    pub tick: u64,
    pub kind: DirectiveKind,
    pub target_ap: ApId,
    pub traffic_class: TrafficClass,
    pub buffer_units: u32,
}

impl Directive {
    pub const WIRE_LEN: usize = 4;

    /// `[kind][target_ap][traffic_class][buffer_units]`, one byte each.
    pub fn encode(&self) -> [u8; 4] {
        let kind = match self.kind {
            DirectiveKind::None => 0,
            DirectiveKind::ReserveStage1 => 1,
            DirectiveKind::ReserveStage2 => 2,
            DirectiveKind::Handoff => 3,
        };
        [kind, self.target_ap.0 as u8, self.traffic_class.code(), self.buffer_units.min(255) as u8]
    }

    pub fn decode(bytes: &[u8], mn_id: u16, tick: u64) -> Result<Self, MppsError> {
        let [kind, ap, class, units] = bytes else {
            return Err(MppsError::Directive(format!("expected 4 bytes, got {}", bytes.len())));
        };
        let kind = match kind {
            0 => DirectiveKind::None,
            1 => DirectiveKind::ReserveStage1,
            2 => DirectiveKind::ReserveStage2,
            3 => DirectiveKind::Handoff,
            other => return Err(MppsError::Directive(format!("unknown kind {other}"))),
        };
        let traffic_class =
            TrafficClass::from_code(*class).ok_or_else(|| MppsError::Directive(format!("unknown class {class}")))?;
        Ok(Self { mn_id, tick, kind, target_ap: ApId(*ap as u16), traffic_class, buffer_units: *units as u32 })
    }
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t={} mn={} {:?}", self.tick, self.mn_id, self.kind)?;
        if self.kind != DirectiveKind::None {
            write!(f, " AP{} {:?} {}u", self.target_ap.0, self.traffic_class, self.buffer_units)?;
        }
        Ok(())
    }
}

/// One node-to-server sample: the associated AP and up to four others.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RssiReport {
    pub mn_id: u16,
    pub current_ap: ApId,
    pub current_rssi: u8,
    pub neighbors: Vec<(ApId, u8)>,
    pub tick: u64,
}

impl RssiReport {
    pub const MAX_NEIGHBORS: usize = 4;

    pub fn new(mn_id: u16, current: (u16, u8), neighbors: &[(u16, u8)], tick: u64) -> Result<Self, MppsError> {
        let report = Self {
            mn_id,
            current_ap: ApId(current.0),
            current_rssi: current.1,
            neighbors: neighbors.iter().map(|&(a, r)| (ApId(a), r)).collect(),
            tick,
        };
        report.check()?;
        Ok(report)
    }

    /// Builds the report a node associated with `current` sends for `sample`.
    pub fn from_sample(mn_id: u16, current: ApId, sample: &RssiSample) -> Self {
        let neighbors = sample
            .readings()
            .iter()
            .filter(|r| r.ap != current)
            .take(Self::MAX_NEIGHBORS)
            .map(|r| (r.ap, r.rssi))
            .collect();
        Self {
            mn_id,
            current_ap: current,
            current_rssi: sample.get(current).unwrap_or(0),
            neighbors,
            tick: sample.tick,
        }
    }

    fn check(&self) -> Result<(), MppsError> {
        if self.neighbors.len() > Self::MAX_NEIGHBORS {
            return Err(MppsError::Report(format!("{} neighbours, at most 4 allowed", self.neighbors.len())));
        }
        for (i, (ap, _)) in self.neighbors.iter().enumerate() {
            if *ap == self.current_ap || self.neighbors[..i].iter().any(|(a, _)| a == ap) {
                return Err(MppsError::Report(format!("AP {ap} reported twice")));
            }
        }
        Ok(())
    }

    pub fn check_scale(&self, scale: VendorScale) -> Result<(), MppsError> {
        let max = scale.rssi_max();
        let worst = std::iter::once(self.current_rssi).chain(self.neighbors.iter().map(|n| n.1)).max().unwrap_or(0);
        if worst > max {
            return Err(RssiError::OutOfRange { value: worst, max }.into());
        }
        Ok(())
    }

    /// The four strongest readings, the current AP included.
    pub fn sample(&self) -> Result<RssiSample, MppsError> {
        let readings = std::iter::once(Reading { ap: self.current_ap, rssi: self.current_rssi })
            .chain(self.neighbors.iter().map(|&(ap, rssi)| Reading { ap, rssi }))
            .collect();
        Ok(RssiSample::new(readings, self.tick)?)
    }

    /// `[current_ap][current_rssi][n][(ap, rssi) × n]`.
    pub fn encode_payload(&self) -> Vec<u8> {
        let mut out = vec![self.current_ap.0 as u8, self.current_rssi, self.neighbors.len() as u8];
        for (ap, rssi) in &self.neighbors {
            out.push(ap.0 as u8);
            out.push(*rssi);
        }
        out
    }

    pub fn decode_payload(bytes: &[u8], mn_id: u16, tick: u64) -> Result<Self, MppsError> {
        let [ap, rssi, n, rest @ ..] = bytes else {
            return Err(MppsError::Report(format!("payload of {} bytes is truncated", bytes.len())));
        };
        if rest.len() != 2 * *n as usize {
            return Err(MppsError::Report(format!(
                "{n} neighbours need {} bytes, got {}",
                2 * *n as usize,
                rest.len()
            )));
        }
        let neighbors: Vec<(u16, u8)> = rest.chunks(2).map(|c| (c[0] as u16, c[1])).collect();
        Self::new(mn_id, (*ap as u16, *rssi), &neighbors, tick)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reservation {
    pub stage: Stage,
    pub traffic_class: TrafficClass,
    pub buffer_units: u32,
    /// Tick of the latest stage change.
    pub since: u64,
}

/// Active reservations keyed by `(ap, mn)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReservationLedger {
    entries: BTreeMap<(ApId, u16), Reservation>,
    timeout: u64,
}

impl Default for ReservationLedger {
    fn default() -> Self {
        Self::new(Self::DEFAULT_TIMEOUT)
    }
}

impl ReservationLedger {
    pub const DEFAULT_TIMEOUT: u64 = 5;

    pub fn new(timeout: u64) -> Self {
        Self { entries: BTreeMap::new(), timeout }
    }

    /// Stage 1 opens a reservation, stage 2 upgrades it to the node's
    /// traffic class. Returns the units now held.
    pub fn reserve(
        &mut self,
        mn_id: u16,
        ap: ApId,
        stage: Stage,
        class: TrafficClass,
        tick: u64,
    ) -> Result<u32, MppsError> {
        let key = (ap, mn_id);
        match (stage, self.entries.get_mut(&key)) {
            (Stage::One, Some(_)) => Err(MppsError::DuplicateReservation { mn_id, ap }),
            (Stage::One, None) => {
                let r = Reservation { stage, traffic_class: class, buffer_units: class.units(), since: tick };
                self.entries.insert(key, r);
                Ok(r.buffer_units)
            }
            (Stage::Two, Some(r)) if r.stage == Stage::One => {
                *r = Reservation { stage, traffic_class: class, buffer_units: class.units(), since: tick };
                Ok(r.buffer_units)
            }
            (Stage::Two, Some(_)) => Err(MppsError::DuplicateReservation { mn_id, ap }),
            (Stage::Two, None) => Err(MppsError::Stage2WithoutStage1 { mn_id, ap }),
        }
    }

    pub fn release(&mut self, mn_id: u16, ap: ApId) -> Option<Reservation> {
        self.entries.remove(&(ap, mn_id))
    }

    /// Drops reservations idle for at least the timeout.
    pub fn expire(&mut self, now: u64) -> Vec<(ApId, u16, Reservation)> {
        let timeout = self.timeout;
        let stale: Vec<(ApId, u16)> =
            self.entries.iter().filter(|(_, r)| now.saturating_sub(r.since) >= timeout).map(|(k, _)| *k).collect();
        stale.into_iter().map(|k| (k.0, k.1, self.entries.remove(&k).expect("key just listed"))).collect()
    }

    pub fn get(&self, mn_id: u16, ap: ApId) -> Option<&Reservation> {
        self.entries.get(&(ap, mn_id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ApId, u16, &Reservation)> {
        self.entries.iter().map(|(k, r)| (k.0, k.1, r))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_units(&self) -> u32 {
        self.entries.values().map(|r| r.buffer_units).sum()
    }

    pub fn units_at(&self, ap: ApId) -> u32 {
        self.entries.range((ap, 0)..=(ap, u16::MAX)).map(|(_, r)| r.buffer_units).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Tracking,
    Mining,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub next_region: RegionId,
    pub candidates: Vec<ApId>,
    pub ap: ApId,
    /// Position of `ap` in the miner's ranking.
    pub rank: usize,
    pub method: Method,
    /// The miner's own pick, computed even when tracking decides.
    pub mined_ap: ApId,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Registered { mn_id: u16, tick: u64, ap: ApId, region: RegionId },
    Unidentified { mn_id: u16, tick: u64, above_threshold: Vec<ApId> },
    Predicted { mn_id: u16, tick: u64, result: PredictionResult },
    PredictionFailed { mn_id: u16, tick: u64, from: ApId, next_region: RegionId },
    Expired { mn_id: u16, tick: u64, ap: ApId, units: u32 },
    HandedOff { mn_id: u16, tick: u64, from: ApId, to: ApId, backup: bool },
    Committed { mn_id: u16, path: MobilePath },
    Discarded { mn_id: u16, visits: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MppsConfig {
    pub scale: VendorScale,
    pub rssi: RssiConfig,
    pub scoring: ScoringConfig,
    pub reservation_timeout: u64,
    /// Consecutive ticks below Δe on the current AP that force a handoff.
    pub backup_ticks: u32,
    pub default_class: TrafficClass,
}

impl Default for MppsConfig {
    fn default() -> Self {
        let scale = VendorScale::default();
        Self {
            scale,
            rssi: RssiConfig::for_scale(scale),
            scoring: ScoringConfig::default(),
            reservation_timeout: ReservationLedger::DEFAULT_TIMEOUT,
            backup_ticks: 2,
            default_class: TrafficClass::Data,
        }
    }
}

#[derive(Debug, Clone)]
struct Target {
    ap: ApId,
    stage: Stage,
}

#[derive(Debug, Clone)]
struct Node {
    track: TrackState,
    visits: Vec<PathStep>,
    target: Option<Target>,
    weak_ticks: u32,
    class: TrafficClass,
}

/// Single-threaded server state. Reports must arrive in tick order per node.
pub struct Mpps {
    grid: GridTopology,
    cfg: MppsConfig,
    db: PatternDatabase,
    ledger: ReservationLedger,
    nodes: BTreeMap<u16, Node>,
    events: Vec<Event>,
    sink: Option<Box<dyn Write + Send>>,
    prediction_failures: u64,
}

impl fmt::Debug for Mpps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Mpps")
            .field("nodes", &self.nodes.len())
            .field("paths", &self.db.path_count())
            .field("reservations", &self.ledger.len())
            .finish()
    }
}

impl Mpps {
    pub fn new(grid: GridTopology, cfg: MppsConfig, db: PatternDatabase) -> Self {
        Self {
            grid,
            cfg,
            db,
            ledger: ReservationLedger::new(cfg.reservation_timeout),
            nodes: BTreeMap::new(),
            events: Vec::new(),
            sink: None,
            prediction_failures: 0,
        }
    }

    /// Committed paths are also appended to `sink`, one per line.
    pub fn with_history_sink(mut self, sink: Box<dyn Write + Send>) -> Self {
        self.sink = Some(sink);
        self
    }

    pub fn grid(&self) -> &GridTopology {
        &self.grid
    }

    pub fn config(&self) -> &MppsConfig {
        &self.cfg
    }

    pub fn database(&self) -> &PatternDatabase {
        &self.db
    }

    pub fn ledger(&self) -> &ReservationLedger {
        &self.ledger
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn prediction_failures(&self) -> u64 {
        self.prediction_failures
    }

    pub fn set_traffic_class(&mut self, mn_id: u16, class: TrafficClass) -> Result<(), MppsError> {
        self.nodes.get_mut(&mn_id).ok_or(MppsError::UnknownNode(mn_id))?.class = class;
        Ok(())
    }

    /// The AP and region the server believes the node is at.
    pub fn node_position(&self, mn_id: u16) -> Option<(ApId, RegionId)> {
        self.nodes.get(&mn_id).map(|n| (n.track.current_ap, n.track.current_region))
    }

    pub fn visits(&self, mn_id: u16) -> Option<&[PathStep]> {
        self.nodes.get(&mn_id).map(|n| n.visits.as_slice())
    }

    fn none_directive(&self, mn_id: u16, tick: u64, ap: ApId) -> Directive {
        Directive {
            mn_id,
            tick,
            kind: DirectiveKind::None,
            target_ap: ap,
            traffic_class: self.cfg.default_class,
            buffer_units: 0,
        }
    }

    fn expire(&mut self, tick: u64) {
        for (ap, mn_id, r) in self.ledger.expire(tick) {
            log::debug!("reservation of node {mn_id} at AP {ap} timed out");
            self.events.push(Event::Expired { mn_id, tick, ap, units: r.buffer_units });
            if let Some(node) = self.nodes.get_mut(&mn_id) {
                if node.target.as_ref().is_some_and(|t| t.ap == ap) {
                    node.target = None;
                }
            }
        }
    }

    fn register(&mut self, report: &RssiReport, sample: RssiSample) -> Result<Vec<Directive>, MppsError> {
        let (mn_id, tick) = (report.mn_id, report.tick);
        let region = match locate_region(&sample, &self.grid, &self.cfg.rssi) {
            Ok((region, _)) if self.grid.region_contains(region, report.current_ap)? => region,
            _ => {
                let above = above_threshold(&sample, &self.cfg.rssi);
                self.events.push(Event::Unidentified { mn_id, tick, above_threshold: above });
                return Ok(vec![self.none_directive(mn_id, tick, report.current_ap)]);
            }
        };
        let track = TrackState::new(mn_id, report.current_ap, region, sample, &self.grid)
            .expect("region checked to contain the AP");
        self.nodes.insert(
            mn_id,
            Node {
                track,
                visits: vec![PathStep { ap: report.current_ap, region }],
                target: None,
                weak_ticks: 0,
                class: self.cfg.default_class,
            },
        );
        self.events.push(Event::Registered { mn_id, tick, ap: report.current_ap, region });
        Ok(Vec::new())
    }

    /// Processes one report and returns the directives it triggers.
    ///
    /// The first report registers the node. Later ones locate the node,
    /// detect motion, predict the next region from a region change or the
    /// direction pattern and pick the next AP from the candidate set:
    /// a single candidate or a decisive RSSI lead settles it by tracking,
    /// anything else falls to the miner. Stage-1 goes out when a target is
    /// chosen, stage-2 once the target reaches the region threshold and a
    /// handoff when the trigger fires. Two ticks with the current AP below
    /// Δe force a backup handoff.
    pub fn handle_report(&mut self, report: &RssiReport) -> Result<Vec<Directive>, MppsError> {
        report.check()?;
        report.check_scale(self.cfg.scale)?;
        let (mn_id, tick) = (report.mn_id, report.tick);
        self.expire(tick);
        let sample = report.sample()?;
        let Some(node) = self.nodes.get(&mn_id) else {
            return self.register(report, sample);
        };
        let rssi = self.cfg.rssi;
        let current_ap = node.track.current_ap;

        let region = match locate_region(&sample, &self.grid, &rssi) {
            Ok((region, _)) => region,
            Err(_) => {
                let above = above_threshold(&sample, &rssi);
                self.events.push(Event::Unidentified { mn_id, tick, above_threshold: above });
                return Ok(vec![self.none_directive(mn_id, tick, current_ap)]);
            }
        };

        if detect_motion(&node.track.last_sample, &sample, &rssi) == Motion::Stationary {
            let node = self.nodes.get_mut(&mn_id).expect("node present");
            node.track.motion = Motion::Stationary;
            node.track.sample_streak += 1;
            node.track.last_sample = sample;
            node.weak_ticks = 0;
            return Ok(Vec::new());
        }

        let next_region = if region != node.track.current_region {
            Some(region)
        } else {
            predict_region(&node.track, &infer_direction(&sample, &rssi), &self.grid).ok()
        };
        let class = node.class;
        let prediction = match next_region {
            Some(next) => self.predict(mn_id, tick, current_ap, next, &sample)?,
            None => None,
        };

        let mut out = Vec::new();
        let directive =
            |kind, ap, units| Directive { mn_id, tick, kind, target_ap: ap, traffic_class: class, buffer_units: units };

        // retarget when the prediction moved
        if let Some(p) = &prediction {
            let node = self.nodes.get_mut(&mn_id).expect("node present");
            if node.target.as_ref().map(|t| t.ap) != Some(p.ap) {
                if let Some(old) = node.target.take() {
                    self.ledger.release(mn_id, old.ap);
                }
                let units = self.ledger.reserve(mn_id, p.ap, Stage::One, class, tick)?;
                node.target = Some(Target { ap: p.ap, stage: Stage::One });
                out.push(directive(DirectiveKind::ReserveStage1, p.ap, units));
            }
        }

        let node = self.nodes.get_mut(&mn_id).expect("node present");
        let mut handoff_to = None;
        if let Some(target) = node.target.clone() {
            let mut decision = should_handoff(&node.track, &sample, target.ap, &rssi);
            let mut target_ap = target.ap;
            if decision.handoff && decision.mining_fallback {
                if let Some(p) = prediction.as_ref().filter(|p| p.candidates.len() >= 2) {
                    if p.mined_ap != target.ap {
                        self.ledger.release(mn_id, target.ap);
                        let units = self.ledger.reserve(mn_id, p.mined_ap, Stage::One, class, tick)?;
                        out.push(directive(DirectiveKind::ReserveStage1, p.mined_ap, units));
                        node.target = Some(Target { ap: p.mined_ap, stage: Stage::One });
                        target_ap = p.mined_ap;
                    }
                } else {
                    // no candidate set to mine over
                    decision.handoff = false;
                }
            }
            let stage = node.target.as_ref().map(|t| t.stage).unwrap_or(Stage::One);
            let strong = sample.get(target_ap).unwrap_or(0) >= rssi.region_threshold;
            if stage == Stage::One && (strong || decision.handoff) {
                let units = self.ledger.reserve(mn_id, target_ap, Stage::Two, class, tick)?;
                out.push(directive(DirectiveKind::ReserveStage2, target_ap, units));
                if let Some(t) = node.target.as_mut() {
                    t.stage = Stage::Two;
                }
            }
            if decision.handoff {
                handoff_to = Some((target_ap, false));
            }
        }

        let current_now = sample.get(current_ap).unwrap_or(0);
        node.weak_ticks = if current_now < rssi.delta_e { node.weak_ticks + 1 } else { 0 };
        if handoff_to.is_none() && node.weak_ticks >= self.cfg.backup_ticks {
            let fallback = node.target.as_ref().map(|t| t.ap).or_else(|| {
                sample
                    .readings()
                    .iter()
                    .find(|r| r.ap != current_ap && self.grid.aps_adjacent(current_ap, r.ap).unwrap_or(false))
                    .map(|r| r.ap)
            });
            handoff_to = fallback.map(|ap| (ap, true));
        }

        if let Some((to, backup)) = handoff_to {
            let units = self.ledger.release(mn_id, to).map_or(0, |r| r.buffer_units);
            out.push(directive(DirectiveKind::Handoff, to, units));
            self.hand_off(mn_id, tick, to, region, next_region, backup)?;
        }

        let node = self.nodes.get_mut(&mn_id).expect("node present");
        if handoff_to.is_none()
            && region != node.track.current_region
            && self.grid.region_contains(region, current_ap)?
        {
            node.track.current_region = region;
        }
        node.track.last_sample = sample;
        node.track.motion = Motion::Moving;
        node.track.sample_streak = 0;
        Ok(out)
    }

    fn predict(
        &mut self,
        mn_id: u16,
        tick: u64,
        from: ApId,
        next_region: RegionId,
        sample: &RssiSample,
    ) -> Result<Option<PredictionResult>, MppsError> {
        let candidates = self.grid.candidate_next_aps(from, next_region)?;
        if candidates.is_empty() {
            self.prediction_failures += 1;
            self.events.push(Event::PredictionFailed { mn_id, tick, from, next_region });
            return Ok(None);
        }
        let mined = predict_next_ap(&self.db, from, &candidates, &self.cfg.scoring)?;
        let tracked = if candidates.len() == 1 {
            Some(candidates[0])
        } else {
            decisive_lead(&candidates, sample, &self.cfg.rssi)
        };
        let (ap, method) = match tracked {
            Some(ap) => (ap, Method::Tracking),
            None => (mined.ap, Method::Mining),
        };
        let result = PredictionResult {
            next_region,
            rank: mined.rank_of(ap).expect("choice is a candidate"),
            candidates,
            ap,
            method,
            mined_ap: mined.ap,
        };
        self.events.push(Event::Predicted { mn_id, tick, result: result.clone() });
        Ok(Some(result))
    }

    fn hand_off(
        &mut self,
        mn_id: u16,
        tick: u64,
        to: ApId,
        region: RegionId,
        next_region: Option<RegionId>,
        backup: bool,
    ) -> Result<(), MppsError> {
        let grid = &self.grid;
        let node = self.nodes.get_mut(&mn_id).expect("node present");
        let from = node.track.current_ap;
        let mut new_region = None;
        for r in std::iter::once(region).chain(next_region).chain(Some(node.track.current_region)) {
            if grid.region_contains(r, to)? {
                new_region = Some(r);
                break;
            }
        }
        let new_region = match new_region {
            Some(r) => r,
            None => grid.regions_of_ap(to)?[0],
        };
        node.track.current_ap = to;
        node.track.current_region = new_region;
        node.visits.push(PathStep { ap: to, region: new_region });
        node.target = None;
        node.weak_ticks = 0;
        self.events.push(Event::HandedOff { mn_id, tick, from, to, backup });
        Ok(())
    }

    /// Stores the node's visits as a path and starts a new one at its
    /// current position. Paths with fewer than two visits are dropped.
    pub fn commit_path(&mut self, mn_id: u16) -> Result<MobilePath, MppsError> {
        let node = self.nodes.get_mut(&mn_id).ok_or(MppsError::UnknownNode(mn_id))?;
        let last = *node.visits.last().expect("visits start with the registration step");
        let visits = std::mem::replace(&mut node.visits, vec![last]);
        if visits.len() < 2 {
            log::warn!("discarding {}-visit path of node {mn_id}", visits.len());
            self.events.push(Event::Discarded { mn_id, visits: visits.len() });
            return Err(MppsError::PathTooShort(visits.len()));
        }
        let path = MobilePath::new(visits);
        self.db.record_path(&path, &self.grid)?;
        if let Some(sink) = self.sink.as_mut() {
            writeln!(sink, "{path}").map_err(|e| MppsError::Io(e.to_string()))?;
        }
        self.events.push(Event::Committed { mn_id, path: path.clone() });
        Ok(path)
    }

    pub fn flush(&mut self) -> Result<(), MppsError> {
        if let Some(sink) = self.sink.as_mut() {
            sink.flush().map_err(|e| MppsError::Io(e.to_string()))?;
        }
        Ok(())
    }
}

fn above_threshold(sample: &RssiSample, cfg: &RssiConfig) -> Vec<ApId> {
    sample.readings().iter().filter(|r| r.rssi >= cfg.region_threshold).map(|r| r.ap).collect()
}

/// The strongest candidate when it beats the runner-up by more than Δe.
fn decisive_lead(candidates: &[ApId], sample: &RssiSample, cfg: &RssiConfig) -> Option<ApId> {
    let mut readings: Vec<(u8, ApId)> = candidates.iter().map(|&ap| (sample.get(ap).unwrap_or(0), ap)).collect();
    readings.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    match readings.as_slice() {
        [(top, ap), (second, _), ..] if *top > 0 && !similar(*top, *second, cfg) => Some(*ap),
        _ => None,
    }
}

/// Moves a node through `positions`, one report per tick starting at
/// `start_tick`, following the server's handoffs. Returns every directive.
pub fn drive_node<R: Rng + ?Sized>(
    server: &mut Mpps,
    mn_id: u16,
    positions: &[(f64, f64)],
    start_tick: u64,
    rng: &mut R,
) -> Result<Vec<Directive>, MppsError> {
    let mut out = Vec::new();
    for (k, pos) in positions.iter().enumerate() {
        let tick = start_tick + k as u64;
        let sample = synthesize_sample(*pos, &server.grid, server.cfg.scale, &server.cfg.rssi, tick, rng);
        let current = match server.node_position(mn_id) {
            Some((ap, _)) => ap,
            None => match sample.strongest() {
                Some(r) => r.ap,
                None => continue,
            },
        };
        let report = RssiReport::from_sample(mn_id, current, &sample);
        out.extend(server.handle_report(&report)?);
    }
    Ok(out)
}

/// What the packet front end did with one inbound packet.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketOutcome {
    pub verdict: Verdict,
    pub directives: Vec<Directive>,
    /// The ACK followed by one server message per directive.
    pub replies: Vec<Vec<u8>>,
}

/// Wire front end: verifies report packets, feeds them to the server and
/// answers with an ACK plus a copy of every directive.
pub struct PacketServer<R> {
    pub mpps: Mpps,
    endpoint: ServerEndpoint<R>,
}

impl<R: Rng> PacketServer<R> {
    pub fn new(mpps: Mpps, endpoint: ServerEndpoint<R>) -> Self {
        Self { mpps, endpoint }
    }

    pub fn endpoint_mut(&mut self) -> &mut ServerEndpoint<R> {
        &mut self.endpoint
    }

    pub fn handle_packet(&mut self, bytes: &[u8], tick: u64) -> Result<PacketOutcome, MppsError> {
        let inbound = self.endpoint.receive(bytes);
        let rejected = PacketOutcome { verdict: inbound.verdict, directives: Vec::new(), replies: Vec::new() };
        let Some(packet) = inbound.packet else {
            return Ok(rejected);
        };
        if packet.msg_type != MsgType::Report {
            return Ok(rejected);
        }
        let report = RssiReport::decode_payload(&packet.payload, packet.mn_id, tick)?;
        let directives = self.mpps.handle_report(&report)?;
        let mut replies = vec![self.endpoint.ack(packet.mn_id)?.encode()];
        for d in directives.iter().filter(|d| d.kind != DirectiveKind::None) {
            replies.push(self.endpoint.send(packet.mn_id, &d.encode())?.encode());
        }
        Ok(PacketOutcome { verdict: inbound.verdict, directives, replies })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(mn: u16, cur: (u16, u8), others: &[(u16, u8)], tick: u64) -> RssiReport {
        RssiReport::new(mn, cur, others, tick).unwrap()
    }

    #[test]
    fn class_units() {
        let mut ledger = ReservationLedger::default();
        assert_eq!(ledger.reserve(1, ApId(8), Stage::One, TrafficClass::Data, 0).unwrap(), 1);
        assert_eq!(ledger.reserve(1, ApId(8), Stage::Two, TrafficClass::Video, 1).unwrap(), 8);
        assert_eq!(ledger.total_units(), 8);
        assert_eq!(
            ledger.reserve(2, ApId(8), Stage::Two, TrafficClass::Voice, 1),
            Err(MppsError::Stage2WithoutStage1 { mn_id: 2, ap: ApId(8) })
        );
        assert!(ledger.reserve(1, ApId(8), Stage::One, TrafficClass::Data, 2).is_err());
        assert_eq!(TrafficClass::Voice.units(), 4);
    }

    #[test]
    fn ledger_expiry_and_release() {
        let mut ledger = ReservationLedger::new(5);
        ledger.reserve(1, ApId(3), Stage::One, TrafficClass::Voice, 10).unwrap();
        ledger.reserve(2, ApId(3), Stage::One, TrafficClass::Data, 12).unwrap();
        assert_eq!(ledger.units_at(ApId(3)), 5);
        assert!(ledger.expire(14).is_empty());
        let gone = ledger.expire(15);
        assert_eq!(gone.len(), 1);
        assert_eq!((gone[0].0, gone[0].1), (ApId(3), 1));
        assert_eq!(ledger.release(2, ApId(3)).unwrap().buffer_units, 1);
        assert!(ledger.is_empty());
    }

    #[test]
    fn report_payload_round_trip() {
        let r = report(9, (1, 38), &[(0, 5), (5, 15), (6, 25)], 3);
        let bytes = r.encode_payload();
        assert_eq!(bytes, vec![1, 38, 3, 0, 5, 5, 15, 6, 25]);
        assert_eq!(RssiReport::decode_payload(&bytes, 9, 3).unwrap(), r);
        assert!(RssiReport::decode_payload(&bytes[..8], 9, 3).is_err());
        assert!(RssiReport::new(1, (1, 5), &[(1, 4)], 0).is_err());
        assert!(RssiReport::new(1, (1, 5), &[(2, 1), (3, 1), (4, 1), (5, 1), (6, 1)], 0).is_err());
    }

    #[test]
    fn directive_round_trip() {
        let d = Directive {
            mn_id: 4,
            tick: 2,
            kind: DirectiveKind::ReserveStage2,
            target_ap: ApId(13),
            traffic_class: TrafficClass::Voice,
            buffer_units: 4,
        };
        assert_eq!(Directive::decode(&d.encode(), 4, 2).unwrap(), d);
        assert!(Directive::decode(&[9, 0, 0, 0], 4, 2).is_err());
    }

    fn low_threshold() -> MppsConfig {
        let mut cfg = MppsConfig::default();
        cfg.rssi.region_threshold = 5;
        cfg
    }

    #[test]
    fn crossing_into_r8_hands_off_to_ap7() {
        let mut s = Mpps::new(GridTopology::default(), low_threshold(), PatternDatabase::new());
        assert!(s.handle_report(&report(1, (1, 38), &[(0, 5), (5, 15), (6, 25)], 0)).unwrap().is_empty());
        assert_eq!(s.node_position(1), Some((ApId(1), RegionId(7))));
        let out = s.handle_report(&report(1, (1, 5), &[(2, 10), (6, 20), (7, 35)], 1)).unwrap();
        let kinds: Vec<DirectiveKind> = out.iter().map(|d| d.kind).collect();
        assert_eq!(kinds, [DirectiveKind::ReserveStage1, DirectiveKind::ReserveStage2, DirectiveKind::Handoff]);
        assert!(out.iter().all(|d| d.target_ap == ApId(7)));
        assert!(s.ledger().is_empty());
        assert_eq!(s.commit_path(1).unwrap().to_string(), "1(7),7(8)");
        assert_eq!(s.database().direct_count(ApId(1), ApId(7)), 1);
    }

    #[test]
    fn stationary_node_gets_nothing() {
        let mut s = Mpps::new(GridTopology::default(), low_threshold(), PatternDatabase::new());
        for t in 0..5 {
            let jitter = (t % 2) as u8;
            let r = report(2, (1, 38 + jitter), &[(0, 5), (5, 15), (6, 25 - jitter)], t);
            assert!(s.handle_report(&r).unwrap().is_empty());
        }
        assert!(matches!(s.commit_path(2), Err(MppsError::PathTooShort(1))));
    }

    #[test]
    fn unidentified_region_yields_none_directive() {
        let mut s = Mpps::new(GridTopology::default(), MppsConfig::default(), PatternDatabase::new());
        let out = s.handle_report(&report(3, (1, 20), &[(7, 20)], 0)).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].kind, DirectiveKind::None);
        assert!(matches!(s.events()[0], Event::Unidentified { .. }));
    }

    #[test]
    fn tied_readings_defer_to_the_miner() {
        let mut cfg = MppsConfig::default();
        cfg.rssi.region_threshold = 10;
        cfg.rssi.lv_mv_bound = 15;
        cfg.rssi.mv_hv_bound = 30;
        let mut db = PatternDatabase::new();
        db.set_direct(ApId(1), ApId(6), 3);
        db.set_direct(ApId(1), ApId(7), 9);
        let mut s = Mpps::new(GridTopology::default(), cfg, db);
        s.handle_report(&report(4, (1, 40), &[(2, 20), (6, 20), (7, 20)], 0)).unwrap();
        assert_eq!(s.node_position(4), Some((ApId(1), RegionId(8))));
        let out = s.handle_report(&report(4, (1, 10), &[(2, 12), (6, 30), (7, 30)], 1)).unwrap();
        assert_eq!(out[0].kind, DirectiveKind::ReserveStage1);
        assert_eq!(out[0].target_ap, ApId(7));
        let predicted = s.events().iter().find_map(|e| match e {
            Event::Predicted { result, .. } => Some(result.clone()),
            _ => None,
        });
        let p = predicted.unwrap();
        assert_eq!(p.candidates, vec![ApId(6), ApId(7)]);
        assert_eq!(p.method, Method::Mining);
    }
}
