use serde::{Deserialize, Serialize};

use super::FourTuple;

/// One parsed HTTP request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HttpRequest {
    pub method: String,
    pub host: String,
    pub path: String,
    /// `host` + `path`, no scheme prefix.
    pub full_url: String,
}

/// One uplink packet payload, in capture order.
#[derive(Debug, Clone, Default)]
pub struct UplinkSegment {
    pub payload: Vec<u8>,
}

const METHODS: [&str; 9] = [
    "GET", "POST", "PUT", "DELETE", "HEAD", "OPTIONS", "PATCH", "TRACE", "CONNECT",
];

/// True when the payload starts with an HTTP request or status line.
pub(crate) fn looks_like_http(payload: &[u8]) -> bool {
    starts_with_method(payload) || payload.starts_with(b"HTTP/")
}

fn starts_with_method(bytes: &[u8]) -> bool {
    METHODS
        .iter()
        .any(|m| bytes.len() > m.len() && bytes.starts_with(m.as_bytes()) && bytes[m.len()] == b' ')
}

/// Extract HTTP requests from a flow's uplink payload stream.
///
/// Uplink payloads are concatenated in order. A request begins wherever a
/// recognized method token opens a packet payload (or directly follows the
/// previous request's header block, for pipelined requests). The host comes
/// from the Host header when present and falls back to the flow's
/// destination IP rendered as text.
pub fn parse_http(key: FourTuple, segments: &[UplinkSegment]) -> Vec<HttpRequest> {
    let mut buffer = Vec::new();
    let mut starts = Vec::with_capacity(segments.len());
    for segment in segments {
        starts.push(buffer.len());
        buffer.extend_from_slice(&segment.payload);
    }

    let mut requests = Vec::new();
    let mut pos = 0usize;
    while pos < buffer.len() {
        if !starts_with_method(&buffer[pos..]) {
            match starts.iter().copied().find(|&s| s > pos) {
                Some(next) => pos = next,
                None => break,
            }
            continue;
        }
        let (request, end) = match parse_one(&buffer, pos, key) {
            Some(parsed) => parsed,
            None => {
                // Method token without a usable request line; skip this start.
                match starts.iter().copied().find(|&s| s > pos) {
                    Some(next) => {
                        pos = next;
                        continue;
                    }
                    None => break,
                }
            }
        };
        requests.push(request);
        // Pipelined follow-up right after the header block, otherwise resume
        // at the next packet boundary.
        if starts_with_method(&buffer[end..]) {
            pos = end;
        } else {
            match starts.iter().copied().find(|&s| s > end) {
                Some(next) => pos = next,
                None => break,
            }
        }
    }
    requests
}

/// Parse one request starting at `pos`. Returns the request and the offset
/// just past its header block.
fn parse_one(buffer: &[u8], pos: usize, key: FourTuple) -> Option<(HttpRequest, usize)> {
    let text_end = buffer.len();
    let line_end = find_line_end(buffer, pos)?;
    let line = String::from_utf8_lossy(&buffer[pos..line_end]);
    let mut parts = line.split(' ').filter(|p| !p.is_empty());
    let method = parts.next()?.to_string();
    let target = parts.next()?.to_string();

    // Headers run until the first empty line or the end of the stream.
    let mut host: Option<String> = None;
    let mut cursor = skip_line_break(buffer, line_end);
    let header_block_end;
    loop {
        if cursor >= text_end {
            header_block_end = text_end;
            break;
        }
        let end = match find_line_end(buffer, cursor) {
            Some(e) => e,
            None => {
                header_block_end = text_end;
                break;
            }
        };
        if end == cursor {
            header_block_end = skip_line_break(buffer, end);
            break;
        }
        let header = String::from_utf8_lossy(&buffer[cursor..end]);
        if let Some((name, value)) = header.split_once(':') {
            if name.trim().eq_ignore_ascii_case("host") {
                let value = value.trim();
                if !value.is_empty() && host.is_none() {
                    host = Some(value.to_string());
                }
            }
        }
        cursor = skip_line_break(buffer, end);
    }

    // Absolute-form targets carry the host inside the URL.
    let (target_host, path) = split_target(&target);
    let host = host
        .or(target_host)
        .unwrap_or_else(|| key.dst_ip.to_string());
    let full_url = format!("{host}{path}");
    Some((
        HttpRequest {
            method,
            host,
            path,
            full_url,
        },
        header_block_end,
    ))
}

fn split_target(target: &str) -> (Option<String>, String) {
    for scheme in ["http://", "https://"] {
        if let Some(rest) = target.strip_prefix(scheme) {
            return match rest.find('/') {
                Some(idx) => (Some(rest[..idx].to_string()), rest[idx..].to_string()),
                None => (Some(rest.to_string()), "/".to_string()),
            };
        }
    }
    (None, target.to_string())
}

/// Offset of the next CR or LF at/after `from`, i.e. the end of this line.
fn find_line_end(buffer: &[u8], from: usize) -> Option<usize> {
    buffer[from..]
        .iter()
        .position(|&b| b == b'\r' || b == b'\n')
        .map(|i| from + i)
}

fn skip_line_break(buffer: &[u8], at: usize) -> usize {
    if at < buffer.len() && buffer[at] == b'\r' {
        if at + 1 < buffer.len() && buffer[at + 1] == b'\n' {
            at + 2
        } else {
            at + 1
        }
    } else if at < buffer.len() && buffer[at] == b'\n' {
        at + 1
    } else {
        at
    }
}
