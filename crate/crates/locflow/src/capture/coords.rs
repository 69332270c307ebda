use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

/// A plaintext latitude/longitude pair found in a URL.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coordinates {
    pub lat: f64,
    pub lon: f64,
}

impl Coordinates {
    /// Build a pair, rejecting out-of-range values.
    pub fn new(lat: f64, lon: f64) -> Option<Coordinates> {
        if (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon) {
            Some(Coordinates { lat, lon })
        } else {
            None
        }
    }
}

/// Query keys treated as latitude/longitude bindings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordinateKeys {
    pub lat_keys: Vec<String>,
    pub lon_keys: Vec<String>,
    /// Also match two signed decimals with >= 4 fractional digits separated
    /// by a non-alphanumeric run (covers path-embedded coordinates).
    pub bare_number_fallback: bool,
}

impl Default for CoordinateKeys {
    fn default() -> Self {
        CoordinateKeys {
            lat_keys: vec!["lat".into(), "latitude".into(), "tlat".into()],
            lon_keys: vec![
                "lng".into(),
                "lon".into(),
                "longitude".into(),
                "tlon".into(),
            ],
            bare_number_fallback: true,
        }
    }
}

impl CoordinateKeys {
    fn is_lat(&self, key: &str) -> bool {
        self.lat_keys.iter().any(|k| k.eq_ignore_ascii_case(key))
    }

    fn is_lon(&self, key: &str) -> bool {
        self.lon_keys.iter().any(|k| k.eq_ignore_ascii_case(key))
    }
}

static KEY_VALUE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"([A-Za-z_][A-Za-z0-9_]*)=(-?[0-9]+(?:\.[0-9]+)?)").expect("static regex")
});

static BARE_PAIR: LazyLock<Regex> = LazyLock::new(|| {
    // Lazy separator so a sign belonging to the second number is not
    // swallowed by the non-alphanumeric run.
    Regex::new(r"(-?[0-9]+\.[0-9]{4,})[^A-Za-z0-9]+?(-?[0-9]+\.[0-9]{4,})").expect("static regex")
});

/// Find plaintext coordinates in a URL using the default key set.
pub fn detect_coordinates(url: &str) -> Option<Coordinates> {
    detect_coordinates_with(url, &CoordinateKeys::default())
}

/// Find the first latitude-like and longitude-like numeric bindings that
/// satisfy the range invariants; falls back to a bare signed-decimal pair
/// when enabled. Absence is a valid result.
pub fn detect_coordinates_with(url: &str, keys: &CoordinateKeys) -> Option<Coordinates> {
    let mut lat: Option<f64> = None;
    let mut lon: Option<f64> = None;
    for capture in KEY_VALUE.captures_iter(url) {
        let key = &capture[1];
        let value: f64 = match capture[2].parse() {
            Ok(v) => v,
            Err(_) => continue,
        };
        if lat.is_none() && keys.is_lat(key) && (-90.0..=90.0).contains(&value) {
            lat = Some(value);
        } else if lon.is_none() && keys.is_lon(key) && (-180.0..=180.0).contains(&value) {
            lon = Some(value);
        }
        if let (Some(lat), Some(lon)) = (lat, lon) {
            return Coordinates::new(lat, lon);
        }
    }

    if keys.bare_number_fallback {
        for capture in BARE_PAIR.captures_iter(url) {
            let lat: f64 = capture[1].parse().ok()?;
            let lon: f64 = capture[2].parse().ok()?;
            if let Some(coords) = Coordinates::new(lat, lon) {
                return Some(coords);
            }
        }
    }
    None
}
