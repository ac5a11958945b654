//! Declarative configuration of switches, hosts, links, VLANs, traffic
//! sources and the dataflow population. These are the sections of a
//! scenario document.

use serde::{Deserialize, Serialize};

use crate::ether::MacAddress;

fn is_default<T: Default + PartialEq>(v: &T) -> bool {
    *v == T::default()
}

fn yes() -> bool {
    true
}

fn is_true(v: &bool) -> bool {
    *v
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub duration_ms: f64,
    #[serde(default = "RunConfig::default_warmup")]
    pub warmup_fraction: f64,
    #[serde(default = "RunConfig::default_window")]
    pub series_window_us: u64,
    /// Multiplies every source's offered load.
    #[serde(default = "RunConfig::default_scale")]
    pub load_scale: f64,
}

impl RunConfig {
    fn default_warmup() -> f64 {
        0.1
    }
    fn default_window() -> u64 {
        1000
    }
    fn default_scale() -> f64 {
        1.0
    }

    pub fn new(duration_ms: f64) -> Self {
        RunConfig {
            duration_ms,
            warmup_fraction: Self::default_warmup(),
            series_window_us: Self::default_window(),
            load_scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MacTableMode {
    #[default]
    Ideal,
    HashBucket,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacTableConfig {
    #[serde(default)]
    pub mode: MacTableMode,
    /// Dynamic entry limit in ideal mode.
    #[serde(default = "MacTableConfig::default_capacity")]
    pub capacity: usize,
    /// Octet indices (0 = first on the wire) hashed in bucket mode.
    #[serde(default = "MacTableConfig::default_key_bytes")]
    pub key_bytes: Vec<usize>,
    #[serde(default = "MacTableConfig::default_bucket_count")]
    pub bucket_count: usize,
    #[serde(default = "MacTableConfig::default_bucket_depth")]
    pub bucket_depth: usize,
    #[serde(default = "MacTableConfig::default_aging")]
    pub aging_time_ms: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan_interval_ms: Option<f64>,
}

impl MacTableConfig {
    fn default_capacity() -> usize {
        16384
    }
    fn default_key_bytes() -> Vec<usize> {
        vec![4, 5]
    }
    fn default_bucket_count() -> usize {
        256
    }
    fn default_bucket_depth() -> usize {
        70
    }
    fn default_aging() -> f64 {
        300_000.0
    }

    pub fn ideal(capacity: usize) -> Self {
        MacTableConfig {
            capacity,
            ..Default::default()
        }
    }

    pub fn hash_bucket(key_bytes: Vec<usize>, bucket_count: usize, bucket_depth: usize) -> Self {
        MacTableConfig {
            mode: MacTableMode::HashBucket,
            key_bytes,
            bucket_count,
            bucket_depth,
            ..Default::default()
        }
    }
}

impl Default for MacTableConfig {
    fn default() -> Self {
        MacTableConfig {
            mode: MacTableMode::Ideal,
            capacity: Self::default_capacity(),
            key_bytes: Self::default_key_bytes(),
            bucket_count: Self::default_bucket_count(),
            bucket_depth: Self::default_bucket_depth(),
            aging_time_ms: Self::default_aging(),
            scan_interval_ms: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SchedulerKind {
    #[default]
    Fifo,
    Strict,
    Wrr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IngressMode {
    #[default]
    Voq,
    SharedFifo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticEntryConfig {
    pub mac: MacAddress,
    pub port: u16,
    #[serde(default = "default_vlan")]
    pub vlan: u16,
}

fn default_vlan() -> u16 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SwitchConfig {
    pub name: String,
    pub ports: u16,
    #[serde(default, skip_serializing_if = "is_default")]
    pub mac_table: MacTableConfig,
    #[serde(default, skip_serializing_if = "is_default")]
    pub scheduler: SchedulerKind,
    /// One weight per traffic class, used by the WRR scheduler.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub wrr_weights: Vec<u32>,
    #[serde(default = "SwitchConfig::default_classes")]
    pub priority_classes: u8,
    #[serde(default, skip_serializing_if = "is_default")]
    pub ingress_mode: IngressMode,
    /// Ports send and honor PAUSE frames.
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub fc_enabled: bool,
    /// Egress congestion is pushed back to the ingress ports feeding it.
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub fc_propagation: bool,
    #[serde(default = "SwitchConfig::default_fraction")]
    pub fabric_capacity_fraction: f64,
    #[serde(default = "SwitchConfig::default_fabric_buffer")]
    pub fabric_buffer_bytes: u64,
    #[serde(default = "SwitchConfig::default_port_buffer")]
    pub egress_buffer_bytes: u64,
    #[serde(default = "SwitchConfig::default_port_buffer")]
    pub ingress_buffer_bytes: u64,
    #[serde(default = "SwitchConfig::default_xoff")]
    pub xoff_fraction: f64,
    #[serde(default = "SwitchConfig::default_xon")]
    pub xon_fraction: f64,
    #[serde(default = "SwitchConfig::default_latency")]
    pub forwarding_latency_ns: u64,
    /// Flooded and multicast frames per second; absent means unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multicast_rate_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trunks: Vec<Vec<u16>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub static_entries: Vec<StaticEntryConfig>,
}

impl SwitchConfig {
    fn default_classes() -> u8 {
        4
    }
    fn default_fraction() -> f64 {
        1.0
    }
    fn default_fabric_buffer() -> u64 {
        2 * 1024 * 1024
    }
    fn default_port_buffer() -> u64 {
        128 * 1024
    }
    fn default_xoff() -> f64 {
        0.8
    }
    fn default_xon() -> f64 {
        0.5
    }
    fn default_latency() -> u64 {
        5_000
    }

    pub fn new(name: impl Into<String>, ports: u16) -> Self {
        SwitchConfig {
            name: name.into(),
            ports,
            mac_table: MacTableConfig::default(),
            scheduler: SchedulerKind::Fifo,
            wrr_weights: vec![],
            priority_classes: Self::default_classes(),
            ingress_mode: IngressMode::Voq,
            fc_enabled: true,
            fc_propagation: true,
            fabric_capacity_fraction: Self::default_fraction(),
            fabric_buffer_bytes: Self::default_fabric_buffer(),
            egress_buffer_bytes: Self::default_port_buffer(),
            ingress_buffer_bytes: Self::default_port_buffer(),
            xoff_fraction: Self::default_xoff(),
            xon_fraction: Self::default_xon(),
            forwarding_latency_ns: Self::default_latency(),
            multicast_rate_cap: None,
            trunks: vec![],
            static_entries: vec![],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum HostRole {
    /// Traffic generator and/or measuring sink.
    #[default]
    Tester,
    /// Promiscuous responder that answers with the request's destination as
    /// its own source address; emulates any number of nodes.
    Reflector,
    Rob,
    Prob,
    L2sv,
    L2pu,
    Dfm,
    Sfi,
}

impl HostRole {
    pub fn is_dataflow(self) -> bool {
        !matches!(self, HostRole::Tester | HostRole::Reflector)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Emulation {
    #[default]
    Normal,
    /// Never drains its receive queue and keeps PAUSE asserted.
    Dead,
    /// Each received frame costs `service_ns` before the next is taken.
    Slowed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac: Option<MacAddress>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub role: HostRole,
    /// Network stage (selects the VLAN pair) for L2PU and SFI roles.
    #[serde(default, skip_serializing_if = "is_default")]
    pub stage: u8,
    #[serde(default, skip_serializing_if = "is_default")]
    pub promiscuous: bool,
    #[serde(default, skip_serializing_if = "is_default")]
    pub emulation: Emulation,
    #[serde(default, skip_serializing_if = "is_default")]
    pub service_ns: u64,
    #[serde(default = "yes", skip_serializing_if = "is_true")]
    pub fc_enabled: bool,
    #[serde(default = "HostConfig::default_queue")]
    pub nic_tx_bytes: u64,
    #[serde(default = "HostConfig::default_queue")]
    pub nic_rx_bytes: u64,
    /// Kernel receive ceiling; absent means line rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel_rate_mbytes: Option<f64>,
    #[serde(default = "HostConfig::default_socket")]
    pub socket_bytes: u64,
    #[serde(default = "HostConfig::default_sockets")]
    pub sockets: u16,
    /// Sockets whose application never reads.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lazy_sockets: Vec<u16>,
    #[serde(default = "HostConfig::default_backoff")]
    pub send_retry_backoff_ns: u64,
}

impl HostConfig {
    fn default_queue() -> u64 {
        64 * 1024
    }
    fn default_socket() -> u64 {
        256 * 1024
    }
    fn default_sockets() -> u16 {
        1
    }
    fn default_backoff() -> u64 {
        10_000
    }

    pub fn new(name: impl Into<String>) -> Self {
        HostConfig {
            name: name.into(),
            mac: None,
            role: HostRole::Tester,
            stage: 0,
            promiscuous: false,
            emulation: Emulation::Normal,
            service_ns: 0,
            fc_enabled: true,
            nic_tx_bytes: Self::default_queue(),
            nic_rx_bytes: Self::default_queue(),
            kernel_rate_mbytes: None,
            socket_bytes: Self::default_socket(),
            sockets: 1,
            lazy_sockets: vec![],
            send_retry_backoff_ns: Self::default_backoff(),
        }
    }

    pub fn with_role(mut self, role: HostRole) -> Self {
        self.role = role;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    /// Host name or `switch:port`.
    pub a: String,
    pub b: String,
    #[serde(default = "LinkConfig::default_speed")]
    pub speed_mbps: u64,
    #[serde(default, skip_serializing_if = "is_default")]
    pub propagation_ns: u64,
    /// Flow-control reaction latency; absent means one maximum frame time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reaction_ns: Option<u64>,
}

impl LinkConfig {
    fn default_speed() -> u64 {
        1000
    }

    pub fn new(a: impl Into<String>, b: impl Into<String>, speed_mbps: u64) -> Self {
        LinkConfig {
            a: a.into(),
            b: b.into(),
            speed_mbps,
            propagation_ns: 0,
            reaction_ns: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VlanConfig {
    pub id: u16,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// `switch:port` members whose frames leave untagged; such a port's
    /// default VLAN becomes this one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub untagged: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tagged: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TrafficPattern {
    #[default]
    Cbr,
    Poisson,
}

/// Address families used to probe MAC table capacity. `linear` octets
/// count up together as one big-endian number; `random` octets are drawn
/// without repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Hash)]
#[serde(rename_all = "snake_case")]
pub enum AddressPattern {
    /// `00:xx:yy:zz:LL:LL`
    LinearOctets45,
    /// `00:xx:yy:LL:LL:zz`
    LinearOctets34,
    /// `00:xx:LL:LL:yy:zz`
    LinearOctets23,
    /// `00:xx:yy:RR:RR:RR`
    RandomOctets345,
    /// Half of each of the previous linear-low and random-low families.
    Mixed,
}

impl AddressPattern {
    pub const ALL: [AddressPattern; 5] = [
        AddressPattern::LinearOctets45,
        AddressPattern::LinearOctets34,
        AddressPattern::LinearOctets23,
        AddressPattern::RandomOctets345,
        AddressPattern::Mixed,
    ];

    pub fn label(self) -> &'static str {
        match self {
            AddressPattern::LinearOctets45 => "linear_octets_45",
            AddressPattern::LinearOctets34 => "linear_octets_34",
            AddressPattern::LinearOctets23 => "linear_octets_23",
            AddressPattern::RandomOctets345 => "random_octets_345",
            AddressPattern::Mixed => "mixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DestinationConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub host: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac: Option<MacAddress>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<AddressPattern>,
    /// Number of pattern addresses.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
}

impl DestinationConfig {
    pub fn host(name: impl Into<String>) -> Self {
        DestinationConfig {
            host: Some(name.into()),
            mac: None,
            pattern: None,
            count: None,
            weight: None,
        }
    }

    pub fn mac(mac: MacAddress) -> Self {
        DestinationConfig {
            host: None,
            mac: Some(mac),
            pattern: None,
            count: None,
            weight: None,
        }
    }

    pub fn pattern(pattern: AddressPattern, count: usize) -> Self {
        DestinationConfig {
            host: None,
            mac: None,
            pattern: Some(pattern),
            count: Some(count),
            weight: None,
        }
    }

    pub fn weighted(mut self, w: f64) -> Self {
        self.weight = Some(w);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    pub name: String,
    pub host: String,
    #[serde(default)]
    pub pattern: TrafficPattern,
    /// Fraction of the host's line rate, in (0, 1].
    pub load: f64,
    #[serde(default = "SourceConfig::default_frame")]
    pub frame_bytes: u32,
    pub destinations: Vec<DestinationConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vlan: Option<u16>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub priority: u8,
    #[serde(default, skip_serializing_if = "is_default")]
    pub start_us: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_frames: Option<u64>,
    #[serde(default, skip_serializing_if = "is_default")]
    pub socket: u16,
}

impl SourceConfig {
    fn default_frame() -> u32 {
        1518
    }

    pub fn new(name: impl Into<String>, host: impl Into<String>, load: f64, destinations: Vec<DestinationConfig>) -> Self {
        SourceConfig {
            name: name.into(),
            host: host.into(),
            pattern: TrafficPattern::Cbr,
            load,
            frame_bytes: Self::default_frame(),
            destinations,
            vlan: None,
            priority: 0,
            start_us: 0.0,
            stop_us: None,
            max_frames: None,
            socket: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageVlans {
    pub lvl2_vlan: u16,
    pub eb_vlan: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataflowConfig {
    #[serde(default = "DataflowConfig::default_rate")]
    pub lvl1_rate_hz: f64,
    #[serde(default = "DataflowConfig::default_pattern")]
    pub lvl1_pattern: TrafficPattern,
    /// LVL1 triggers stop after this time; absent means the whole run
    /// minus `drain_ms`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lvl1_stop_ms: Option<f64>,
    #[serde(default = "DataflowConfig::default_drain")]
    pub drain_ms: f64,
    #[serde(default = "DataflowConfig::default_accept")]
    pub accept_fraction: f64,
    #[serde(default = "DataflowConfig::default_roi_min")]
    pub roi_min_robs: usize,
    #[serde(default = "DataflowConfig::default_roi_max")]
    pub roi_max_robs: usize,
    #[serde(default = "DataflowConfig::default_rounds")]
    pub roi_max_rounds: usize,
    #[serde(default = "DataflowConfig::default_fragment")]
    pub fragment_bytes: u32,
    #[serde(default = "DataflowConfig::default_fragment")]
    pub detail_record_bytes: u32,
    #[serde(default = "DataflowConfig::default_small")]
    pub request_bytes: u32,
    #[serde(default = "DataflowConfig::default_decision_ns")]
    pub l2pu_decision_ns: u64,
    #[serde(default = "DataflowConfig::default_rob_ns")]
    pub rob_service_ns: u64,
    #[serde(default = "DataflowConfig::default_max_events")]
    pub l2pu_max_events: usize,
    #[serde(default = "DataflowConfig::default_max_events")]
    pub sfi_max_events: usize,
    #[serde(default = "DataflowConfig::default_credits")]
    pub l2pu_credits: usize,
    #[serde(default = "DataflowConfig::default_credits")]
    pub sfi_credits: usize,
    #[serde(default = "DataflowConfig::default_batch")]
    pub clear_batch_size: usize,
    /// Flush period of the clear batch; its inverse is the target flush rate.
    #[serde(default = "DataflowConfig::default_clear_timeout")]
    pub clear_timeout_us: f64,
    #[serde(default = "DataflowConfig::default_timeout")]
    pub request_timeout_us: f64,
    #[serde(default = "DataflowConfig::default_retries")]
    pub max_retries: u32,
    #[serde(default = "DataflowConfig::default_stages")]
    pub stages: Vec<StageVlans>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clear_vlan: Option<u16>,
    #[serde(default = "DataflowConfig::default_group")]
    pub clear_group: MacAddress,
    /// Priority of control messages (assignments, decisions, clears).
    #[serde(default, skip_serializing_if = "is_default")]
    pub control_priority: u8,
}

impl DataflowConfig {
    fn default_rate() -> f64 {
        1000.0
    }
    fn default_pattern() -> TrafficPattern {
        TrafficPattern::Poisson
    }
    fn default_drain() -> f64 {
        100.0
    }
    fn default_accept() -> f64 {
        2.0 / 75.0
    }
    fn default_roi_min() -> usize {
        2
    }
    fn default_roi_max() -> usize {
        8
    }
    fn default_rounds() -> usize {
        2
    }
    fn default_fragment() -> u32 {
        1000
    }
    fn default_small() -> u32 {
        64
    }
    fn default_decision_ns() -> u64 {
        10_000
    }
    fn default_rob_ns() -> u64 {
        2_000
    }
    fn default_max_events() -> usize {
        4
    }
    fn default_credits() -> usize {
        4
    }
    fn default_batch() -> usize {
        64
    }
    fn default_clear_timeout() -> f64 {
        1e6 / 300.0
    }
    fn default_timeout() -> f64 {
        10_000.0
    }
    fn default_retries() -> u32 {
        3
    }
    fn default_stages() -> Vec<StageVlans> {
        vec![StageVlans { lvl2_vlan: 2, eb_vlan: 3 }]
    }
    fn default_group() -> MacAddress {
        MacAddress([0x01, 0x00, 0x5e, 0x7f, 0x00, 0x01])
    }
}

impl Default for DataflowConfig {
    fn default() -> Self {
        DataflowConfig {
            lvl1_rate_hz: Self::default_rate(),
            lvl1_pattern: Self::default_pattern(),
            lvl1_stop_ms: None,
            drain_ms: Self::default_drain(),
            accept_fraction: Self::default_accept(),
            roi_min_robs: Self::default_roi_min(),
            roi_max_robs: Self::default_roi_max(),
            roi_max_rounds: Self::default_rounds(),
            fragment_bytes: Self::default_fragment(),
            detail_record_bytes: Self::default_fragment(),
            request_bytes: Self::default_small(),
            l2pu_decision_ns: Self::default_decision_ns(),
            rob_service_ns: Self::default_rob_ns(),
            l2pu_max_events: Self::default_max_events(),
            sfi_max_events: Self::default_max_events(),
            l2pu_credits: Self::default_credits(),
            sfi_credits: Self::default_credits(),
            clear_batch_size: Self::default_batch(),
            clear_timeout_us: Self::default_clear_timeout(),
            request_timeout_us: Self::default_timeout(),
            max_retries: Self::default_retries(),
            stages: Self::default_stages(),
            clear_vlan: None,
            clear_group: Self::default_group(),
            control_priority: 0,
        }
    }
}

/// Parses `switch:port` endpoint references.
pub fn split_port_ref(s: &str) -> Option<(&str, u16)> {
    let (sw, port) = s.rsplit_once(':')?;
    Some((sw, port.parse().ok()?))
}
