//! Test-only helpers shared by the locflow crates: a standalone pcap encoder,
//! synthetic flow and corpus generators, and small config fixtures.
//!
//! The pcap encoder is written against the file format documentation, not
//! against the reader in `locflow`, so round-trip tests exercise both sides
//! independently.

mod fixtures;
mod pcap;
mod synth;

pub use fixtures::{sample_contexts, sample_hostlist, sample_topics_toml};
pub use pcap::{ethernet_tcp_frame, PcapBuilder, TCP_ACK, TCP_FIN, TCP_PSH, TCP_SYN};
pub use synth::{random_flow, synth_corpus, SynthClass, SynthConfig};
