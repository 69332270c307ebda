//! Reader versus an independently written pcap encoder: the builder in the
//! testkit assembles capture bytes from scratch, so agreement here means the
//! header layout, endianness handling, and payload slicing are right.

use std::net::Ipv4Addr;

use locflow::capture::{read_pcap_bytes, sessionize, Direction, LINKTYPE_RAW};
use locflow_testkit::{PcapBuilder, TCP_ACK, TCP_PSH, TCP_SYN};

const CLIENT: (Ipv4Addr, u16) = (Ipv4Addr::new(10, 0, 0, 2), 51000);
const SERVER: (Ipv4Addr, u16) = (Ipv4Addr::new(93, 184, 216, 34), 80);

fn handshake_and_get(builder: &mut PcapBuilder) {
    builder.tcp_packet(1.0, CLIENT, SERVER, TCP_SYN, b"");
    builder.tcp_packet(1.01, SERVER, CLIENT, TCP_SYN | TCP_ACK, b"");
    builder.tcp_packet(1.02, CLIENT, SERVER, TCP_ACK, b"");
    builder.tcp_packet(
        1.05,
        CLIENT,
        SERVER,
        TCP_PSH | TCP_ACK,
        b"GET /w?lat=38.5382&lon=-121.7617 HTTP/1.1\r\nHost: api.example\r\n\r\n",
    );
    builder.tcp_packet(
        1.30,
        SERVER,
        CLIENT,
        TCP_PSH | TCP_ACK,
        b"HTTP/1.1 200 OK\r\nContent-Length: 2\r\n\r\nok",
    );
}

#[test]
fn little_endian_capture_round_trips() {
    let mut builder = PcapBuilder::new();
    handshake_and_get(&mut builder);
    let (packets, diag) = read_pcap_bytes(&builder.build()).unwrap();

    assert_eq!(packets.len(), 5);
    assert_eq!(diag.total_records, 5);
    assert_eq!(diag.malformed_records, 0);

    let directions: Vec<Direction> = packets.iter().map(|p| p.meta.direction).collect();
    assert_eq!(
        directions,
        vec![
            Direction::Uplink,
            Direction::Downlink,
            Direction::Uplink,
            Direction::Uplink,
            Direction::Downlink,
        ]
    );
    // Payload slicing: the GET line survives byte for byte.
    assert!(packets[3].payload.starts_with(b"GET /w?lat="));
    assert!(packets[3].meta.has_http_layer);
    assert!(packets[4].meta.has_http_layer);
    assert!(!packets[0].meta.has_http_layer);
    // Frame length: 14 Ethernet + 20 IP + 20 TCP + payload.
    assert_eq!(packets[0].meta.total_len, 54);
    assert_eq!(
        packets[3].meta.tcp_payload_len,
        packets[3].payload.len() as u32
    );
    // Timestamps keep microsecond precision.
    assert!((packets[1].meta.timestamp - 1.01).abs() < 1e-6);
}

#[test]
fn big_endian_capture_parses_identically() {
    let mut le = PcapBuilder::new();
    handshake_and_get(&mut le);
    let mut be = PcapBuilder::new().big_endian();
    handshake_and_get(&mut be);

    let (packets_le, diag_le) = read_pcap_bytes(&le.build()).unwrap();
    let (packets_be, diag_be) = read_pcap_bytes(&be.build()).unwrap();
    assert_eq!(diag_le, diag_be);
    assert_eq!(packets_le.len(), packets_be.len());
    for (a, b) in packets_le.iter().zip(&packets_be) {
        assert_eq!(a.meta, b.meta);
        assert_eq!(a.payload, b.payload);
    }
}

#[test]
fn raw_ip_linktype_drops_the_ethernet_header() {
    let mut ethernet = PcapBuilder::new();
    ethernet.tcp_packet(2.0, CLIENT, SERVER, TCP_PSH | TCP_ACK, b"hello");
    let mut raw = PcapBuilder::new().linktype(LINKTYPE_RAW);
    let full = locflow_testkit::ethernet_tcp_frame(CLIENT, SERVER, TCP_PSH | TCP_ACK, b"hello");
    let ip_only = full[14..].to_vec();
    let len = ip_only.len() as u32;
    raw.frame(2.0, ip_only, len);

    let (from_ethernet, _) = read_pcap_bytes(&ethernet.build()).unwrap();
    let (from_raw, _) = read_pcap_bytes(&raw.build()).unwrap();
    assert_eq!(from_raw.len(), 1);
    assert_eq!(from_raw[0].payload, b"hello");
    assert_eq!(
        from_raw[0].meta.four_tuple,
        from_ethernet[0].meta.four_tuple
    );
    // total_len reflects what was on the wire for each link type.
    assert_eq!(from_raw[0].meta.total_len, 45);
    assert_eq!(from_ethernet[0].meta.total_len, 59);
}

#[test]
fn snaplen_truncation_keeps_declared_length() {
    let payload = vec![b'x'; 400];
    let full = locflow_testkit::ethernet_tcp_frame(CLIENT, SERVER, TCP_PSH | TCP_ACK, &payload);
    let full_len = full.len() as u32;
    let mut builder = PcapBuilder::new();
    // Only 74 bytes captured: headers plus 20 payload bytes.
    builder.frame(3.0, full[..74].to_vec(), full_len);
    let (packets, diag) = read_pcap_bytes(&builder.build()).unwrap();
    assert_eq!(diag.malformed_records, 0);
    assert_eq!(packets.len(), 1);
    assert_eq!(packets[0].meta.tcp_payload_len, 400);
    assert_eq!(packets[0].payload.len(), 20);
    assert_eq!(packets[0].meta.total_len, full_len);
}

#[test]
fn truncated_trailing_record_stops_without_losing_earlier_packets() {
    let mut builder = PcapBuilder::new();
    builder.tcp_packet(1.0, CLIENT, SERVER, TCP_ACK, b"first");
    let mut bytes = builder.build();
    // Append a record header that promises more bytes than exist.
    bytes.extend_from_slice(&5u32.to_le_bytes());
    bytes.extend_from_slice(&0u32.to_le_bytes());
    bytes.extend_from_slice(&1000u32.to_le_bytes());
    bytes.extend_from_slice(&1000u32.to_le_bytes());
    bytes.extend_from_slice(b"short");

    let (packets, diag) = read_pcap_bytes(&bytes).unwrap();
    assert_eq!(packets.len(), 1);
    assert_eq!(packets[0].payload, b"first");
    assert_eq!(diag.malformed_records, 1);
    assert_eq!(diag.total_records, 2);
}

#[test]
fn non_ip_and_non_tcp_records_are_tallied_not_fatal() {
    let mut builder = PcapBuilder::new();
    builder.tcp_packet(1.0, CLIENT, SERVER, TCP_ACK, b"keep");

    let mut arp = locflow_testkit::ethernet_tcp_frame(CLIENT, SERVER, TCP_ACK, b"");
    arp[12] = 0x08;
    arp[13] = 0x06;
    let arp_len = arp.len() as u32;
    builder.frame(1.1, arp, arp_len);

    let mut udp = locflow_testkit::ethernet_tcp_frame(CLIENT, SERVER, TCP_ACK, b"");
    udp[14 + 9] = 17;
    let udp_len = udp.len() as u32;
    builder.frame(1.2, udp, udp_len);

    builder.tcp_packet(1.3, CLIENT, SERVER, TCP_ACK, b"also-keep");

    let (packets, diag) = read_pcap_bytes(&builder.build()).unwrap();
    assert_eq!(packets.len(), 2);
    assert_eq!(diag.non_ip, 1);
    assert_eq!(diag.non_tcp, 1);
    assert_eq!(diag.total_records, 4);
}

#[test]
fn syn_ack_first_capture_still_orients_the_server_side_down() {
    // Capture begins mid-handshake: the SYN-ACK arrives first. Its sender
    // must be recorded as the server, so the reply direction is downlink.
    let mut builder = PcapBuilder::new();
    builder.tcp_packet(1.0, SERVER, CLIENT, TCP_SYN | TCP_ACK, b"");
    builder.tcp_packet(1.1, CLIENT, SERVER, TCP_ACK, b"");
    let (packets, _) = read_pcap_bytes(&builder.build()).unwrap();
    assert_eq!(packets[0].meta.direction, Direction::Downlink);
    assert_eq!(packets[1].meta.direction, Direction::Uplink);
}

#[test]
fn orientation_persists_across_sessions_on_the_same_tuple() {
    let mut builder = PcapBuilder::new();
    builder.tcp_packet(1.0, CLIENT, SERVER, TCP_SYN, b"");
    builder.tcp_packet(1.1, SERVER, CLIENT, TCP_SYN | TCP_ACK, b"");
    // Long idle, then the server speaks first on the same 4-tuple. The
    // remembered orientation still marks it downlink.
    builder.tcp_packet(200.0, SERVER, CLIENT, TCP_PSH | TCP_ACK, b"late");
    let (packets, _) = read_pcap_bytes(&builder.build()).unwrap();
    assert_eq!(packets[2].meta.direction, Direction::Downlink);

    let flows = sessionize(packets, 60.0);
    assert_eq!(flows.len(), 2);
    // Both sessions share the canonical client-to-server key.
    assert_eq!(flows[0].key, flows[1].key);
}

#[test]
fn full_pipe_from_bytes_to_parsed_request() {
    let mut builder = PcapBuilder::new();
    handshake_and_get(&mut builder);
    let (packets, _) = read_pcap_bytes(&builder.build()).unwrap();
    let flows = sessionize(packets, 60.0);
    assert_eq!(flows.len(), 1);
    let flow = &flows[0];
    assert_eq!(flow.id, "flow-000000");
    assert_eq!(flow.requests.len(), 1);
    assert_eq!(flow.requests[0].host, "api.example");
    assert_eq!(
        flow.requests[0].full_url,
        "api.example/w?lat=38.5382&lon=-121.7617"
    );
    assert_eq!(flow.packets.len(), 5);
}
