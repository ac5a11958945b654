//! Frames and the full-duplex point-to-point link model.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::dataflow::Message;
use crate::sim::SimTime;

/// Preamble + start delimiter (8 B) and the minimum inter-frame gap (12 B).
pub const FRAMING_OVERHEAD_BYTES: u32 = 20;
pub const MIN_FRAME_BYTES: u32 = 64;
pub const MAX_FRAME_BYTES: u32 = 1518;

pub const FE_BPS: u64 = 100_000_000;
pub const GE_BPS: u64 = 1_000_000_000;
pub const TEN_GE_BPS: u64 = 10_000_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EtherError {
    #[error("frame size {0} outside 64..=1518 bytes")]
    FrameSize(u32),
    #[error("link speed must be positive")]
    ZeroSpeed,
    #[error("invalid MAC address `{0}`")]
    BadMac(String),
    #[error("VLAN id {0} outside 1..=4094")]
    VlanId(u16),
    #[error("priority {0} outside 0..=7")]
    Priority(u8),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LinkError {
    #[error("link direction is still serializing a frame until {0}")]
    Busy(SimTime),
    #[error("data frame offered to a paused direction")]
    Paused,
    #[error(transparent)]
    Frame(#[from] EtherError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct MacAddress(pub [u8; 6]);

impl MacAddress {
    pub const BROADCAST: MacAddress = MacAddress([0xff; 6]);

    /// Big-endian interpretation of the 48-bit address.
    pub fn from_u64(v: u64) -> Self {
        let b = v.to_be_bytes();
        MacAddress([b[2], b[3], b[4], b[5], b[6], b[7]])
    }

    pub fn to_u64(self) -> u64 {
        let o = self.0;
        u64::from_be_bytes([0, 0, o[0], o[1], o[2], o[3], o[4], o[5]])
    }

    pub fn is_multicast(self) -> bool {
        self.0[0] & 0x01 != 0
    }

    pub fn is_broadcast(self) -> bool {
        self == Self::BROADCAST
    }

    pub fn octets(self) -> [u8; 6] {
        self.0
    }
}

impl fmt::Display for MacAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let o = self.0;
        write!(f, "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}", o[0], o[1], o[2], o[3], o[4], o[5])
    }
}

impl FromStr for MacAddress {
    type Err = EtherError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 6];
        let mut parts = s.split([':', '-']);
        for slot in out.iter_mut() {
            let p = parts.next().ok_or_else(|| EtherError::BadMac(s.to_string()))?;
            if p.len() != 2 {
                return Err(EtherError::BadMac(s.to_string()));
            }
            *slot = u8::from_str_radix(p, 16).map_err(|_| EtherError::BadMac(s.to_string()))?;
        }
        if parts.next().is_some() {
            return Err(EtherError::BadMac(s.to_string()));
        }
        Ok(MacAddress(out))
    }
}

impl Serialize for MacAddress {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for MacAddress {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// 802.1Q tag: VLAN id and priority (7 is highest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct VlanTag {
    vlan_id: u16,
    priority: u8,
}

impl VlanTag {
    pub fn new(vlan_id: u16, priority: u8) -> Result<Self, EtherError> {
        if !(1..=4094).contains(&vlan_id) {
            return Err(EtherError::VlanId(vlan_id));
        }
        if priority > 7 {
            return Err(EtherError::Priority(priority));
        }
        Ok(VlanTag { vlan_id, priority })
    }

    pub fn vlan_id(self) -> u16 {
        self.vlan_id
    }

    pub fn priority(self) -> u8 {
        self.priority
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Data,
    Pause,
    Resume,
    Protocol,
}

/// Fragment of an application message carried by a protocol frame.
#[derive(Debug, Clone)]
pub struct AppFragment {
    pub msg: Arc<Message>,
    pub index: u16,
    pub count: u16,
}

#[derive(Debug, Clone)]
pub struct Frame {
    pub src: MacAddress,
    pub dst: MacAddress,
    pub tag: Option<VlanTag>,
    pub size_bytes: u32,
    pub kind: FrameKind,
    pub flow_id: u32,
    /// Per-connection sequence number used for reorder detection.
    pub seq: u64,
    pub injected_at: SimTime,
    pub socket: u16,
    pub app: Option<AppFragment>,
}

impl Frame {
    pub fn data(src: MacAddress, dst: MacAddress, size_bytes: u32) -> Result<Self, EtherError> {
        check_size(size_bytes)?;
        Ok(Frame {
            src,
            dst,
            tag: None,
            size_bytes,
            kind: FrameKind::Data,
            flow_id: 0,
            seq: 0,
            injected_at: SimTime::ZERO,
            socket: 0,
            app: None,
        })
    }

    /// PAUSE / RESUME control frames are untagged and minimum size.
    pub fn control(src: MacAddress, on: bool) -> Self {
        Frame {
            src,
            dst: MacAddress([0x01, 0x80, 0xc2, 0x00, 0x00, 0x01]),
            tag: None,
            size_bytes: MIN_FRAME_BYTES,
            kind: if on { FrameKind::Pause } else { FrameKind::Resume },
            flow_id: u32::MAX,
            seq: 0,
            injected_at: SimTime::ZERO,
            socket: 0,
            app: None,
        }
    }

    pub fn is_control(&self) -> bool {
        matches!(self.kind, FrameKind::Pause | FrameKind::Resume)
    }

    pub fn priority(&self) -> u8 {
        self.tag.map_or(0, |t| t.priority())
    }

    pub fn with_tag(mut self, tag: Option<VlanTag>) -> Self {
        self.tag = tag;
        self
    }
}

fn check_size(size_bytes: u32) -> Result<(), EtherError> {
    if !(MIN_FRAME_BYTES..=MAX_FRAME_BYTES).contains(&size_bytes) {
        return Err(EtherError::FrameSize(size_bytes));
    }
    Ok(())
}

/// Wire time of one frame including preamble and inter-frame gap, rounded
/// to the nearest nanosecond.
pub fn serialization_delay(size_bytes: u32, speed_bps: u64) -> Result<SimTime, EtherError> {
    check_size(size_bytes)?;
    wire_time(size_bytes, speed_bps)
}

/// Like [`serialization_delay`] but without the frame size bounds; used for
/// internal rate servers that are not Ethernet lines.
pub fn wire_time(size_bytes: u32, speed_bps: u64) -> Result<SimTime, EtherError> {
    if speed_bps == 0 {
        return Err(EtherError::ZeroSpeed);
    }
    let bits = (size_bytes as u128 + FRAMING_OVERHEAD_BYTES as u128) * 8;
    let speed = speed_bps as u128;
    let ns = (bits * 1_000_000_000 + speed / 2) / speed;
    Ok(SimTime::from_nanos(ns as u64))
}

/// Index of a link direction: `AtoB` carries frames from endpoint `a` to `b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dir {
    AtoB = 0,
    BtoA = 1,
}

impl Dir {
    pub fn reverse(self) -> Dir {
        match self {
            Dir::AtoB => Dir::BtoA,
            Dir::BtoA => Dir::AtoB,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Default)]
pub struct DirectionState {
    pub busy_until: SimTime,
    pub paused: bool,
    paused_since: Option<SimTime>,
    pub pause_time: SimTime,
    pub frames_sent: u64,
    pub bytes_sent: u64,
    pub frames_delivered: u64,
    pub pause_signals: u64,
    pub ignored_pauses: u64,
}

impl DirectionState {
    pub fn is_busy(&self, now: SimTime) -> bool {
        self.busy_until > now
    }
}

/// Times produced by a successful transmission.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delivery {
    /// Line is free again.
    pub tx_done_at: SimTime,
    /// Last bit reaches the receiver.
    pub arrive_at: SimTime,
}

/// Full-duplex point-to-point link. Each direction serializes one frame at a
/// time; a paused direction refuses data frames but still carries control.
#[derive(Debug, Clone)]
pub struct Link {
    pub speed_bps: u64,
    pub propagation: SimTime,
    /// Time between the receiver deciding to pause and the pause frame
    /// leaving its transmitter.
    pub reaction_latency: SimTime,
    pub fc_enabled: bool,
    dirs: [DirectionState; 2],
}

impl Link {
    pub fn new(speed_bps: u64, propagation: SimTime, fc_enabled: bool) -> Result<Self, EtherError> {
        let reaction_latency = serialization_delay(MAX_FRAME_BYTES, speed_bps)?;
        Ok(Link {
            speed_bps,
            propagation,
            reaction_latency,
            fc_enabled,
            dirs: Default::default(),
        })
    }

    pub fn with_reaction_latency(mut self, latency: SimTime) -> Self {
        self.reaction_latency = latency;
        self
    }

    pub fn direction(&self, dir: Dir) -> &DirectionState {
        &self.dirs[dir.index()]
    }

    pub fn can_transmit(&self, dir: Dir, now: SimTime) -> bool {
        let d = &self.dirs[dir.index()];
        !d.is_busy(now) && !d.paused
    }

    /// Starts serializing `frame` in `dir`. The caller schedules the arrival
    /// and line-free events from the returned times.
    pub fn transmit(&mut self, dir: Dir, frame: &Frame, now: SimTime) -> Result<Delivery, LinkError> {
        let ser = serialization_delay(frame.size_bytes, self.speed_bps)?;
        let d = &mut self.dirs[dir.index()];
        if d.is_busy(now) {
            return Err(LinkError::Busy(d.busy_until));
        }
        if d.paused && !frame.is_control() {
            return Err(LinkError::Paused);
        }
        d.busy_until = now + ser;
        d.frames_sent += 1;
        d.bytes_sent += frame.size_bytes as u64;
        Ok(Delivery {
            tx_done_at: now + ser,
            arrive_at: now + ser + self.propagation,
        })
    }

    pub fn record_delivery(&mut self, dir: Dir) {
        self.dirs[dir.index()].frames_delivered += 1;
    }

    /// Latency between the receiver's decision and the flag change at the
    /// transmitter: reaction, one minimum frame on the wire, propagation.
    pub fn pause_delivery_latency(&self) -> SimTime {
        let ctrl = serialization_delay(MIN_FRAME_BYTES, self.speed_bps).expect("valid size");
        self.reaction_latency + ctrl + self.propagation
    }

    /// Receiver of `data_dir` asks its peer to stop (`on`) or restart.
    /// Returns when the peer's flag flips, or `None` when flow control is
    /// disabled on this link (the request is counted and ignored).
    pub fn request_pause(&mut self, data_dir: Dir, on: bool, now: SimTime) -> Option<SimTime> {
        let d = &mut self.dirs[data_dir.index()];
        if !self.fc_enabled {
            if on {
                d.ignored_pauses += 1;
            }
            return None;
        }
        d.pause_signals += 1;
        Some(now + self.pause_delivery_latency())
    }

    /// Applies a delivered PAUSE (`on`) or RESUME to the transmitter of `data_dir`.
    pub fn apply_pause(&mut self, data_dir: Dir, on: bool, now: SimTime) {
        let d = &mut self.dirs[data_dir.index()];
        if on && !d.paused {
            d.paused = true;
            d.paused_since = Some(now);
        } else if !on && d.paused {
            d.paused = false;
            if let Some(since) = d.paused_since.take() {
                d.pause_time += now - since;
            }
        }
    }

    /// Total paused time of `dir` up to `now`, including an open interval.
    pub fn pause_time(&self, dir: Dir, now: SimTime) -> SimTime {
        let d = &self.dirs[dir.index()];
        d.pause_time + d.paused_since.map_or(SimTime::ZERO, |s| now.saturating_sub(s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serialization_delay_reference_values() {
        // (size + 20) * 8 bits at 1 ns/bit (GE) or 10 ns/bit (FE).
        assert_eq!(serialization_delay(1518, GE_BPS).unwrap().as_nanos(), 1538 * 8);
        assert_eq!(serialization_delay(1518, GE_BPS).unwrap().as_nanos(), 12_304);
        assert_eq!(serialization_delay(64, GE_BPS).unwrap().as_nanos(), 672);
        assert_eq!(serialization_delay(1518, FE_BPS).unwrap().as_nanos(), 123_040);
        assert_eq!(serialization_delay(1000, FE_BPS).unwrap().as_nanos(), 81_600);
    }

    #[test]
    fn serialization_delay_rounds_to_nearest() {
        // 84 B * 8 = 672 bits at 10 Gb/s = 67.2 ns.
        assert_eq!(serialization_delay(64, TEN_GE_BPS).unwrap().as_nanos(), 67);
        // 1538*8 / 10 = 1230.4 ns.
        assert_eq!(serialization_delay(1518, TEN_GE_BPS).unwrap().as_nanos(), 1230);
    }

    #[test]
    fn serialization_delay_rejects_bad_sizes() {
        assert_eq!(serialization_delay(63, GE_BPS), Err(EtherError::FrameSize(63)));
        assert_eq!(serialization_delay(1519, GE_BPS), Err(EtherError::FrameSize(1519)));
        assert_eq!(serialization_delay(100, 0), Err(EtherError::ZeroSpeed));
    }

    #[test]
    fn mac_address_classes() {
        assert!(MacAddress::BROADCAST.is_broadcast());
        assert!(MacAddress::BROADCAST.is_multicast());
        let m: MacAddress = "01:00:5e:00:00:01".parse().unwrap();
        assert!(m.is_multicast() && !m.is_broadcast());
        let u: MacAddress = "00:11:22:33:44:55".parse().unwrap();
        assert!(!u.is_multicast());
        assert_eq!(u.to_string(), "00:11:22:33:44:55");
        assert_eq!(MacAddress::from_u64(u.to_u64()), u);
        assert!("00:11:22:33:44".parse::<MacAddress>().is_err());
        assert!("00:11:22:33:44:55:66".parse::<MacAddress>().is_err());
        assert!("zz:11:22:33:44:55".parse::<MacAddress>().is_err());
    }

    #[test]
    fn vlan_tag_ranges() {
        assert!(VlanTag::new(0, 0).is_err());
        assert!(VlanTag::new(4095, 0).is_err());
        assert!(VlanTag::new(10, 8).is_err());
        let t = VlanTag::new(4094, 7).unwrap();
        assert_eq!((t.vlan_id(), t.priority()), (4094, 7));
    }

    #[test]
    fn control_frames_are_untagged_minimum_size() {
        let p = Frame::control(MacAddress::default(), true);
        assert_eq!(p.kind, FrameKind::Pause);
        assert_eq!(p.size_bytes, 64);
        assert!(p.tag.is_none());
        assert_eq!(Frame::control(MacAddress::default(), false).kind, FrameKind::Resume);
    }

    fn frame(size: u32) -> Frame {
        Frame::data(MacAddress::from_u64(1), MacAddress::from_u64(2), size).unwrap()
    }

    #[test]
    fn idle_link_delivers_after_serialization_and_propagation() {
        let mut l = Link::new(GE_BPS, SimTime::ZERO, true).unwrap();
        let d = l.transmit(Dir::AtoB, &frame(1518), SimTime::from_nanos(100)).unwrap();
        assert_eq!(d.arrive_at.as_nanos(), 100 + 12_304);
        let mut l = Link::new(GE_BPS, SimTime::from_nanos(500), true).unwrap();
        let d = l.transmit(Dir::BtoA, &frame(64), SimTime::ZERO).unwrap();
        assert_eq!((d.tx_done_at.as_nanos(), d.arrive_at.as_nanos()), (672, 1172));
    }

    #[test]
    fn busy_direction_refuses_second_frame_but_other_direction_is_free() {
        let mut l = Link::new(GE_BPS, SimTime::ZERO, true).unwrap();
        l.transmit(Dir::AtoB, &frame(1518), SimTime::ZERO).unwrap();
        let err = l.transmit(Dir::AtoB, &frame(64), SimTime::from_nanos(10)).unwrap_err();
        assert_eq!(err, LinkError::Busy(SimTime::from_nanos(12_304)));
        assert!(l.transmit(Dir::BtoA, &frame(64), SimTime::from_nanos(10)).is_ok());
        assert!(l.transmit(Dir::AtoB, &frame(64), SimTime::from_nanos(12_304)).is_ok());
    }

    #[test]
    fn paused_direction_blocks_data_but_not_control() {
        let mut l = Link::new(GE_BPS, SimTime::ZERO, true).unwrap();
        let at = l.request_pause(Dir::AtoB, true, SimTime::ZERO).unwrap();
        assert_eq!(at, l.pause_delivery_latency());
        l.apply_pause(Dir::AtoB, true, at);
        assert_eq!(l.transmit(Dir::AtoB, &frame(100), at), Err(LinkError::Paused));
        assert!(l.transmit(Dir::AtoB, &Frame::control(MacAddress::default(), false), at).is_ok());
        let later = at + SimTime::from_micros(10);
        l.apply_pause(Dir::AtoB, false, later);
        assert_eq!(l.pause_time(Dir::AtoB, later), SimTime::from_micros(10));
    }

    #[test]
    fn pause_is_ignored_when_flow_control_disabled() {
        let mut l = Link::new(GE_BPS, SimTime::ZERO, false).unwrap();
        assert_eq!(l.request_pause(Dir::AtoB, true, SimTime::ZERO), None);
        assert_eq!(l.direction(Dir::AtoB).ignored_pauses, 1);
        assert!(!l.direction(Dir::AtoB).paused);
    }

    #[test]
    fn default_reaction_latency_is_one_max_frame() {
        let l = Link::new(FE_BPS, SimTime::ZERO, true).unwrap();
        assert_eq!(l.reaction_latency.as_nanos(), 123_040);
    }
}
