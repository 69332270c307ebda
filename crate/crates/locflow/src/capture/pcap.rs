use std::collections::HashMap;
use std::net::{IpAddr, Ipv4Addr};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::http::looks_like_http;
use super::{CapturedPacket, Direction, FourTuple, PacketMeta};
use crate::error::{Error, Result};

const MAGIC_MICROS: u32 = 0xa1b2_c3d4;
pub const LINKTYPE_ETHERNET: u32 = 1;
pub const LINKTYPE_RAW: u32 = 101;

const TCP_SYN: u8 = 0x02;
const TCP_ACK: u8 = 0x10;

/// Per-file tally of records that could not contribute a TCP packet.
/// Malformed input never aborts the read.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptureDiagnostics {
    pub total_records: u64,
    pub malformed_records: u64,
    pub non_ip: u64,
    pub non_tcp: u64,
}

/// Read a classic libpcap file (magic 0xa1b2c3d4, either endianness) into
/// TCP packet records with uplink/downlink orientation assigned.
pub fn read_pcap(path: impl AsRef<Path>) -> Result<(Vec<CapturedPacket>, CaptureDiagnostics)> {
    let bytes = std::fs::read(path)?;
    read_pcap_bytes(&bytes)
}

pub fn read_pcap_bytes(bytes: &[u8]) -> Result<(Vec<CapturedPacket>, CaptureDiagnostics)> {
    if bytes.len() < 24 {
        return Err(Error::Capture("file shorter than a pcap header".into()));
    }
    let le = match u32::from_le_bytes([bytes[0], bytes[1], bytes[2], bytes[3]]) {
        MAGIC_MICROS => true,
        m if m == MAGIC_MICROS.swap_bytes() => false,
        other => {
            return Err(Error::Capture(format!(
                "unrecognized capture magic 0x{other:08x} (expected classic libpcap 0xa1b2c3d4)"
            )))
        }
    };
    let read_u32 = |buf: &[u8], at: usize| -> u32 {
        let b = [buf[at], buf[at + 1], buf[at + 2], buf[at + 3]];
        if le {
            u32::from_le_bytes(b)
        } else {
            u32::from_be_bytes(b)
        }
    };
    let linktype = read_u32(bytes, 20);
    if linktype != LINKTYPE_ETHERNET && linktype != LINKTYPE_RAW {
        return Err(Error::Capture(format!(
            "unsupported link type {linktype} (expected Ethernet or raw IP)"
        )));
    }

    let mut packets = Vec::new();
    let mut diagnostics = CaptureDiagnostics::default();
    let mut orientation = OrientationTracker::default();
    let mut offset = 24usize;
    while offset < bytes.len() {
        if offset + 16 > bytes.len() {
            diagnostics.malformed_records += 1;
            break;
        }
        let ts_sec = read_u32(bytes, offset);
        let ts_usec = read_u32(bytes, offset + 4);
        let incl_len = read_u32(bytes, offset + 8) as usize;
        let orig_len = read_u32(bytes, offset + 12);
        offset += 16;
        diagnostics.total_records += 1;
        if offset + incl_len > bytes.len() {
            diagnostics.malformed_records += 1;
            break;
        }
        let frame = &bytes[offset..offset + incl_len];
        offset += incl_len;

        let timestamp = ts_sec as f64 + ts_usec as f64 * 1e-6;
        match parse_frame(frame, linktype, timestamp, orig_len, &mut orientation) {
            Ok(packet) => packets.push(packet),
            Err(SkipReason::NonIp) => diagnostics.non_ip += 1,
            Err(SkipReason::NonTcp) => diagnostics.non_tcp += 1,
            Err(SkipReason::Malformed) => diagnostics.malformed_records += 1,
        }
    }
    Ok((packets, diagnostics))
}

enum SkipReason {
    NonIp,
    NonTcp,
    Malformed,
}

/// Remembers which side of each conversation is the device. The first packet
/// seen on a tuple fixes the orientation (a SYN-ACK marks its sender as the
/// server); later sessions on the same tuple keep it.
#[derive(Default)]
struct OrientationTracker {
    canonical: HashMap<FourTuple, FourTuple>,
}

impl OrientationTracker {
    fn direction(&mut self, wire: FourTuple, flags: u8) -> Direction {
        let lookup = wire.unordered();
        let canonical = *self.canonical.entry(lookup).or_insert_with(|| {
            if flags & TCP_SYN != 0 && flags & TCP_ACK != 0 {
                wire.reversed()
            } else {
                wire
            }
        });
        if wire == canonical {
            Direction::Uplink
        } else {
            Direction::Downlink
        }
    }
}

fn parse_frame(
    frame: &[u8],
    linktype: u32,
    timestamp: f64,
    orig_len: u32,
    orientation: &mut OrientationTracker,
) -> std::result::Result<CapturedPacket, SkipReason> {
    let ip = match linktype {
        LINKTYPE_ETHERNET => {
            if frame.len() < 14 {
                return Err(SkipReason::Malformed);
            }
            let ethertype = u16::from_be_bytes([frame[12], frame[13]]);
            if ethertype != 0x0800 {
                return Err(SkipReason::NonIp);
            }
            &frame[14..]
        }
        _ => frame,
    };

    if ip.len() < 20 || ip[0] >> 4 != 4 {
        return Err(SkipReason::NonIp);
    }
    let ihl = usize::from(ip[0] & 0x0f) * 4;
    if ihl < 20 || ip.len() < ihl {
        return Err(SkipReason::Malformed);
    }
    let ip_total = usize::from(u16::from_be_bytes([ip[2], ip[3]]));
    if ip[9] != 6 {
        return Err(SkipReason::NonTcp);
    }
    let src_ip = IpAddr::V4(Ipv4Addr::new(ip[12], ip[13], ip[14], ip[15]));
    let dst_ip = IpAddr::V4(Ipv4Addr::new(ip[16], ip[17], ip[18], ip[19]));

    let tcp = &ip[ihl..];
    if tcp.len() < 20 {
        return Err(SkipReason::Malformed);
    }
    let src_port = u16::from_be_bytes([tcp[0], tcp[1]]);
    let dst_port = u16::from_be_bytes([tcp[2], tcp[3]]);
    let data_off = usize::from(tcp[12] >> 4) * 4;
    if data_off < 20 || tcp.len() < data_off {
        return Err(SkipReason::Malformed);
    }
    let flags = tcp[13];

    // True payload length from the IP header; the captured bytes may be a
    // truncated prefix when snaplen clipped the record.
    let declared = ip_total.saturating_sub(ihl).saturating_sub(data_off);
    let available = tcp.len() - data_off;
    let payload = &tcp[data_off..data_off + available.min(declared)];

    let wire = FourTuple::new(src_ip, src_port, dst_ip, dst_port);
    let direction = orientation.direction(wire, flags);
    Ok(CapturedPacket {
        meta: PacketMeta {
            timestamp,
            direction,
            tcp_payload_len: declared as u32,
            total_len: orig_len,
            has_http_layer: looks_like_http(payload),
            four_tuple: wire,
        },
        payload: payload.to_vec(),
    })
}
