//! Packet-capture ingestion: reads libpcap files, reconstructs per-session
//! HTTP flows keyed by the oriented 4-tuple, and extracts request metadata.

mod coords;
mod http;
mod pcap;

use std::collections::HashMap;
use std::fmt;
use std::net::IpAddr;

use serde::{Deserialize, Serialize};

pub use coords::{detect_coordinates, detect_coordinates_with, CoordinateKeys, Coordinates};
pub use http::{parse_http, HttpRequest, UplinkSegment};
pub use pcap::{read_pcap, read_pcap_bytes, CaptureDiagnostics, LINKTYPE_ETHERNET, LINKTYPE_RAW};

/// Packet direction relative to the monitored device.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Uplink,
    Downlink,
}

/// (source IP, source port, destination IP, destination port) of one TCP
/// conversation, as transmitted on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FourTuple {
    pub src_ip: IpAddr,
    pub src_port: u16,
    pub dst_ip: IpAddr,
    pub dst_port: u16,
}

impl FourTuple {
    pub fn new(src_ip: IpAddr, src_port: u16, dst_ip: IpAddr, dst_port: u16) -> Self {
        Self {
            src_ip,
            src_port,
            dst_ip,
            dst_port,
        }
    }

    /// The same conversation seen from the other side.
    pub fn reversed(&self) -> FourTuple {
        FourTuple {
            src_ip: self.dst_ip,
            src_port: self.dst_port,
            dst_ip: self.src_ip,
            dst_port: self.src_port,
        }
    }

    /// Orientation-independent form, used to look up a conversation no matter
    /// which side sent the packet.
    fn unordered(&self) -> FourTuple {
        let a = (self.src_ip, self.src_port);
        let b = (self.dst_ip, self.dst_port);
        if a <= b {
            *self
        } else {
            self.reversed()
        }
    }
}

impl fmt::Display for FourTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}->{}:{}",
            self.src_ip, self.src_port, self.dst_ip, self.dst_port
        )
    }
}

/// Metadata of one captured TCP packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketMeta {
    /// Capture timestamp in seconds (microsecond resolution).
    pub timestamp: f64,
    pub direction: Direction,
    /// TCP payload length in bytes, from the IP/TCP headers.
    pub tcp_payload_len: u32,
    /// On-the-wire frame length in bytes.
    pub total_len: u32,
    /// True when the payload starts with an HTTP request or status line.
    pub has_http_layer: bool,
    /// Source/destination as transmitted; uplink packets match the flow key
    /// directly, downlink packets match the reversed key.
    pub four_tuple: FourTuple,
}

impl PacketMeta {
    /// The canonical (uplink-oriented) flow key this packet belongs to.
    pub fn flow_key(&self) -> FourTuple {
        match self.direction {
            Direction::Uplink => self.four_tuple,
            Direction::Downlink => self.four_tuple.reversed(),
        }
    }
}

/// A packet as read from a capture: metadata plus the raw TCP payload.
#[derive(Debug, Clone)]
pub struct CapturedPacket {
    pub meta: PacketMeta,
    pub payload: Vec<u8>,
}

/// A sessionized TCP conversation with its extracted HTTP requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpFlow {
    pub id: String,
    /// Canonical (device -> server) 4-tuple.
    pub key: FourTuple,
    /// Packets in timestamp order.
    pub packets: Vec<PacketMeta>,
    /// HTTP requests in packet order; empty for HTTPS or binary flows.
    pub requests: Vec<HttpRequest>,
    /// Running-instance id from the sidecar metadata, if any.
    pub source_instance_id: Option<String>,
    /// Externally supplied taint verdict, if any.
    pub taint_location: Option<bool>,
}

impl HttpFlow {
    pub fn first_timestamp(&self) -> f64 {
        self.packets.first().map(|p| p.timestamp).unwrap_or(0.0)
    }
}

impl Default for HttpFlow {
    fn default() -> Self {
        let unspecified = IpAddr::V4(std::net::Ipv4Addr::UNSPECIFIED);
        HttpFlow {
            id: String::new(),
            key: FourTuple::new(unspecified, 0, unspecified, 0),
            packets: Vec::new(),
            requests: Vec::new(),
            source_instance_id: None,
            taint_location: None,
        }
    }
}

struct OpenSession {
    key: FourTuple,
    arrival: usize,
    packets: Vec<PacketMeta>,
    uplink: Vec<UplinkSegment>,
    last_ts: f64,
}

impl OpenSession {
    fn close(self, seq: usize) -> HttpFlow {
        let requests = parse_http(self.key, &self.uplink);
        HttpFlow {
            id: format!("flow-{seq:06}"),
            key: self.key,
            packets: self.packets,
            requests,
            source_instance_id: None,
            taint_location: None,
        }
    }
}

/// Group packets into per-session flows.
///
/// Packets must arrive in nondecreasing timestamp order. Packets sharing one
/// normalized 4-tuple form a session until the inter-packet gap exceeds
/// `idle_timeout_secs`; the next packet on that key then starts a new
/// session. Flows are emitted (and numbered) in order of first-packet
/// timestamp.
pub fn sessionize(
    packets: impl IntoIterator<Item = CapturedPacket>,
    idle_timeout_secs: f64,
) -> Vec<HttpFlow> {
    let mut open: HashMap<FourTuple, OpenSession> = HashMap::new();
    let mut closed: Vec<OpenSession> = Vec::new();

    for (arrival, packet) in packets.into_iter().enumerate() {
        let key = packet.meta.flow_key();
        let ts = packet.meta.timestamp;

        if let Some(session) = open.get_mut(&key) {
            if ts - session.last_ts > idle_timeout_secs {
                let expired = open.remove(&key).expect("session present");
                closed.push(expired);
            }
        }

        let session = open.entry(key).or_insert_with(|| OpenSession {
            key,
            arrival,
            packets: Vec::new(),
            uplink: Vec::new(),
            last_ts: ts,
        });
        session.last_ts = ts;
        if packet.meta.direction == Direction::Uplink {
            session.uplink.push(UplinkSegment {
                payload: packet.payload,
            });
        }
        session.packets.push(packet.meta);
    }

    closed.extend(open.into_values());
    // First-packet timestamp order; arrival index breaks ties deterministically.
    closed.sort_by(|a, b| {
        let ta = a.packets.first().map(|p| p.timestamp).unwrap_or(0.0);
        let tb = b.packets.first().map(|p| p.timestamp).unwrap_or(0.0);
        ta.partial_cmp(&tb)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.arrival.cmp(&b.arrival))
    });

    closed
        .into_iter()
        .enumerate()
        .map(|(seq, s)| s.close(seq))
        .collect()
}
