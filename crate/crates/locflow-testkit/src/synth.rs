use std::net::{IpAddr, Ipv4Addr};

use locflow::capture::{Direction, FourTuple, HttpFlow, HttpRequest, PacketMeta};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Ground-truth class of a generated flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SynthClass {
    LegalLoc,
    IllegalLoc,
    NonLoc,
}

impl SynthClass {
    pub const ALL: [SynthClass; 3] = [
        SynthClass::LegalLoc,
        SynthClass::IllegalLoc,
        SynthClass::NonLoc,
    ];

    pub fn as_label(self) -> &'static str {
        match self {
            SynthClass::LegalLoc => "legal-loc",
            SynthClass::IllegalLoc => "illegal-loc",
            SynthClass::NonLoc => "non-loc",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SynthConfig {
    pub flows_per_class: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            flows_per_class: 120,
            seed: 7,
        }
    }
}

/// Generate a labeled 3-class corpus with noisy, overlapping class trends:
/// non-location flows carry far more TCP packets, illegal location flows
/// receive larger maximum downlink packets on tighter timing, and legal
/// location flows idle longer between packets. Request URLs carry
/// class-correlated vocabulary (with a shared generic host appearing in
/// every class), and coordinates appear only in the location classes. The
/// distributions overlap on purpose so learners face genuinely ambiguous
/// flows.
pub fn synth_corpus(config: &SynthConfig) -> Vec<(HttpFlow, SynthClass)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut out = Vec::with_capacity(config.flows_per_class * 3);
    for class in SynthClass::ALL {
        for i in 0..config.flows_per_class {
            out.push((synth_flow(class, i, &mut rng), class));
        }
    }
    // Interleave classes by first timestamp so downstream ordering is not
    // an accidental class signal.
    out.sort_by(|a, b| a.0.first_timestamp().total_cmp(&b.0.first_timestamp()));
    for (seq, (flow, _)) in out.iter_mut().enumerate() {
        flow.id = format!("flow-{seq:06}");
    }
    out
}

fn synth_flow(class: SynthClass, index: usize, rng: &mut ChaCha8Rng) -> HttpFlow {
    let key = random_key(rng);
    let base_ts = rng.gen_range(0.0..10_000.0);

    // Per-flow centers are drawn from overlapping class distributions, so a
    // real fraction of flows is ambiguous on any single statistic.
    let (n_packets, gap_center_ms): (usize, f64) = match class {
        SynthClass::LegalLoc => (rng.gen_range(8..=40), rng.gen_range(50.0..200.0)),
        SynthClass::IllegalLoc => (rng.gen_range(8..=40), rng.gen_range(10.0..90.0)),
        SynthClass::NonLoc => {
            // A short-flow tail keeps the count trend from being a clean cut.
            let n = if rng.gen_bool(0.2) {
                rng.gen_range(16..=48)
            } else {
                rng.gen_range(40..=140)
            };
            (n, rng.gen_range(8.0..70.0))
        }
    };

    let mut packets = Vec::with_capacity(n_packets);
    let mut ts = base_ts;
    for p in 0..n_packets {
        let direction = if p == 0 || rng.gen_bool(0.45) {
            Direction::Uplink
        } else {
            Direction::Downlink
        };
        let total_len: u32 = match (class, direction) {
            (_, Direction::Uplink) => rng.gen_range(60..=600),
            (SynthClass::LegalLoc, Direction::Downlink) => rng.gen_range(200..=1100),
            (SynthClass::IllegalLoc, Direction::Downlink) => {
                // MTU-scale ad payloads lift the typical max above the legal
                // class, but not every illegal flow gets one.
                if rng.gen_bool(0.18) {
                    rng.gen_range(1050..=1500)
                } else {
                    rng.gen_range(250..=950)
                }
            }
            (SynthClass::NonLoc, Direction::Downlink) => rng.gen_range(100..=1400),
        };
        packets.push(PacketMeta {
            timestamp: ts,
            direction,
            tcp_payload_len: total_len.saturating_sub(54),
            total_len,
            has_http_layer: p == 0 || rng.gen_bool(0.2),
            four_tuple: if direction == Direction::Uplink {
                key
            } else {
                key.reversed()
            },
        });
        ts += rng.gen_range(0.5 * gap_center_ms..1.5 * gap_center_ms) / 1000.0;
    }

    let requests = synth_requests(class, index, rng);
    HttpFlow {
        id: String::new(),
        key,
        packets,
        requests,
        source_instance_id: None,
        taint_location: None,
    }
}

fn synth_requests(class: SynthClass, index: usize, rng: &mut ChaCha8Rng) -> Vec<HttpRequest> {
    let lat = rng.gen_range(30.0..50.0);
    let lon = rng.gen_range(-125.0..-70.0);
    // A generic shared host shows up in every class so URL vocabulary alone
    // cannot fully separate the corpus.
    let shared = rng.gen_bool(0.12);
    let (host, path) = match class {
        SynthClass::LegalLoc => {
            // Shared-host location flows use one path template in both
            // location classes, so their URLs are lexically identical.
            if shared {
                let host = "api.cloudsync.example".to_string();
                let path = format!("/v2/push?aid={index}&lat={lat:.5}&lon={lon:.5}");
                (host, path)
            } else {
                let host = *[
                    "api.weatherhub.example",
                    "geo.mapview.example",
                    "forecast.skycast.example",
                ]
                .choose(rng)
                .unwrap();
                let path = match rng.gen_range(0..3) {
                    0 => format!("/forecast?lat={lat:.5}&lon={lon:.5}&units=c"),
                    1 => format!("/geo/radar?latitude={lat:.5}&longitude={lon:.5}"),
                    _ => format!("/tiles/city?lat={lat:.5}&lng={lon:.5}&zoom=11"),
                };
                (host.to_string(), path)
            }
        }
        SynthClass::IllegalLoc => {
            if shared {
                let host = "api.cloudsync.example".to_string();
                let path = format!("/v2/push?aid={index}&lat={lat:.5}&lon={lon:.5}");
                (host, path)
            } else {
                let host = *[
                    "ads.clickpath.example",
                    "banner.admix.example",
                    "track.pixelads.example",
                ]
                .choose(rng)
                .unwrap();
                let path = match rng.gen_range(0..3) {
                    0 => format!("/ad?adid={index}&tlat={lat:.5}&tlon={lon:.5}&sdk=2"),
                    1 => format!("/imp?lat={lat:.5}&lng={lon:.5}&bundle=app{index}"),
                    _ => format!("/pixel?campaign=c{index}&lat={lat:.5}&lon={lon:.5}"),
                };
                (host.to_string(), path)
            }
        }
        SynthClass::NonLoc => {
            let host = if shared {
                "api.cloudsync.example"
            } else {
                *[
                    "cdn.imgfarm.example",
                    "api.socialfeed.example",
                    "sync.chatrelay.example",
                ]
                .choose(rng)
                .unwrap()
            };
            let path = match rng.gen_range(0..3) {
                0 => format!("/v1/feed?page={}&cursor=ab{index}", rng.gen_range(1..9)),
                1 => format!("/img/banner{}.jpg", rng.gen_range(1..40)),
                _ => "/sync?device=android&ver=9".to_string(),
            };
            (host.to_string(), path)
        }
    };
    let full_url = format!("{host}{path}");
    vec![HttpRequest {
        method: "GET".into(),
        host,
        path,
        full_url,
    }]
}

fn random_key(rng: &mut ChaCha8Rng) -> FourTuple {
    FourTuple::new(
        IpAddr::V4(Ipv4Addr::new(
            10,
            0,
            rng.gen_range(0..4),
            rng.gen_range(2..250),
        )),
        rng.gen_range(30_000..60_000),
        IpAddr::V4(Ipv4Addr::new(203, 0, 113, rng.gen_range(1..250))),
        80,
    )
}

/// A structurally random flow (no class signal) for featurizer oracle tests:
/// random packet counts, directions, sizes, gaps (including zero gaps), and
/// occasional single-packet or single-direction flows.
pub fn random_flow(rng: &mut ChaCha8Rng, seq: usize) -> HttpFlow {
    let key = random_key(rng);
    let n_packets = match rng.gen_range(0..10) {
        0 => 1,
        1 => 2,
        _ => rng.gen_range(3..=40),
    };
    let force_direction = match rng.gen_range(0..6) {
        0 => Some(Direction::Uplink),
        1 => Some(Direction::Downlink),
        _ => None,
    };
    let mut ts = rng.gen_range(0.0..1000.0);
    let mut packets = Vec::with_capacity(n_packets);
    for _ in 0..n_packets {
        let direction = force_direction.unwrap_or_else(|| {
            if rng.gen_bool(0.5) {
                Direction::Uplink
            } else {
                Direction::Downlink
            }
        });
        let total_len: u32 = rng.gen_range(40..=1514);
        packets.push(PacketMeta {
            timestamp: ts,
            direction,
            tcp_payload_len: total_len.saturating_sub(54),
            total_len,
            has_http_layer: rng.gen_bool(0.3),
            four_tuple: if direction == Direction::Uplink {
                key
            } else {
                key.reversed()
            },
        });
        if !rng.gen_bool(0.1) {
            ts += rng.gen_range(0.0001..0.8);
        }
    }
    HttpFlow {
        id: format!("flow-{seq:06}"),
        key,
        packets,
        requests: Vec::new(),
        source_instance_id: None,
        taint_location: None,
    }
}
