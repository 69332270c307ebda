use std::net::Ipv4Addr;

pub const TCP_SYN: u8 = 0x02;
pub const TCP_ACK: u8 = 0x10;
pub const TCP_PSH: u8 = 0x08;
pub const TCP_FIN: u8 = 0x01;

const MAGIC: u32 = 0xa1b2_c3d4;

/// Assembles classic libpcap files byte by byte for reader tests.
/// Defaults to little-endian headers and the Ethernet link type.
pub struct PcapBuilder {
    big_endian: bool,
    linktype: u32,
    snaplen: u32,
    records: Vec<(u32, u32, u32, Vec<u8>)>,
}

impl Default for PcapBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl PcapBuilder {
    pub fn new() -> Self {
        PcapBuilder {
            big_endian: false,
            linktype: 1,
            snaplen: 65_535,
            records: Vec::new(),
        }
    }

    pub fn big_endian(mut self) -> Self {
        self.big_endian = true;
        self
    }

    pub fn linktype(mut self, linktype: u32) -> Self {
        self.linktype = linktype;
        self
    }

    /// Append an Ethernet/IPv4/TCP packet. `ts` is seconds since the epoch
    /// with microsecond precision.
    pub fn tcp_packet(
        &mut self,
        ts: f64,
        src: (Ipv4Addr, u16),
        dst: (Ipv4Addr, u16),
        flags: u8,
        payload: &[u8],
    ) -> &mut Self {
        let frame = ethernet_tcp_frame(src, dst, flags, payload);
        let len = frame.len() as u32;
        self.frame(ts, frame, len)
    }

    /// Append an arbitrary frame, e.g. truncated or non-IP garbage.
    pub fn frame(&mut self, ts: f64, frame: Vec<u8>, orig_len: u32) -> &mut Self {
        let ts_sec = ts.floor() as u32;
        let ts_usec = ((ts - ts.floor()) * 1e6).round() as u32;
        self.records.push((ts_sec, ts_usec, orig_len, frame));
        self
    }

    pub fn build(&self) -> Vec<u8> {
        let put32 = |out: &mut Vec<u8>, v: u32| {
            if self.big_endian {
                out.extend_from_slice(&v.to_be_bytes());
            } else {
                out.extend_from_slice(&v.to_le_bytes());
            }
        };
        let put16 = |out: &mut Vec<u8>, v: u16| {
            if self.big_endian {
                out.extend_from_slice(&v.to_be_bytes());
            } else {
                out.extend_from_slice(&v.to_le_bytes());
            }
        };
        let mut out = Vec::new();
        put32(&mut out, MAGIC);
        put16(&mut out, 2);
        put16(&mut out, 4);
        put32(&mut out, 0); // thiszone
        put32(&mut out, 0); // sigfigs
        put32(&mut out, self.snaplen);
        put32(&mut out, self.linktype);
        for (ts_sec, ts_usec, orig_len, frame) in &self.records {
            put32(&mut out, *ts_sec);
            put32(&mut out, *ts_usec);
            put32(&mut out, frame.len() as u32);
            put32(&mut out, *orig_len);
            out.extend_from_slice(frame);
        }
        out
    }
}

/// Build one Ethernet II frame carrying IPv4/TCP with the given payload.
pub fn ethernet_tcp_frame(
    src: (Ipv4Addr, u16),
    dst: (Ipv4Addr, u16),
    flags: u8,
    payload: &[u8],
) -> Vec<u8> {
    let mut frame = Vec::with_capacity(54 + payload.len());
    frame.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x01]); // dst MAC
    frame.extend_from_slice(&[0x02, 0, 0, 0, 0, 0x02]); // src MAC
    frame.extend_from_slice(&0x0800u16.to_be_bytes());

    let ip_total = 40 + payload.len() as u16;
    frame.push(0x45); // version 4, IHL 5
    frame.push(0);
    frame.extend_from_slice(&ip_total.to_be_bytes());
    frame.extend_from_slice(&[0, 0, 0x40, 0]); // id, flags DF
    frame.push(64); // TTL
    frame.push(6); // TCP
    frame.extend_from_slice(&[0, 0]); // checksum unset
    frame.extend_from_slice(&src.0.octets());
    frame.extend_from_slice(&dst.0.octets());

    frame.extend_from_slice(&src.1.to_be_bytes());
    frame.extend_from_slice(&dst.1.to_be_bytes());
    frame.extend_from_slice(&[0, 0, 0, 1]); // seq
    frame.extend_from_slice(&[0, 0, 0, 0]); // ack
    frame.push(0x50); // data offset 5
    frame.push(flags);
    frame.extend_from_slice(&0xffffu16.to_be_bytes()); // window
    frame.extend_from_slice(&[0, 0, 0, 0]); // checksum, urgent
    frame.extend_from_slice(payload);
    frame
}
