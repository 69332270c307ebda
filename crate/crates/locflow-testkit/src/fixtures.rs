use locflow::context::AppContext;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// A topic config usable across tests: weather/travel/game topics, a small
/// city gazetteer, and a name wordlist covering the generated app names.
pub fn sample_topics_toml() -> &'static str {
    r#"schema = "topics.v1"
city_names = ["davis", "sacramento", "berkeley", "fresno"]
name_wordlist = [
    "local", "weather", "radar", "forecast", "map", "city", "travel",
    "super", "led", "light", "clock", "alarm", "brick", "smash", "puzzle",
    "solitaire", "note", "scan", "torch", "compass",
]

[topics]
"weather and stars" = ["weather", "forecast", "temperatur", "locat", "radar", "sunni", "rain"]
travel = ["travel", "citi", "map", "hotel", "flight", "navig", "rout"]
games = ["game", "puzzl", "brick", "level", "score", "solitair", "arcad"]
tools = ["flashlight", "torch", "clean", "scan", "clock", "alarm", "note"]
"#
}

/// Ad/analytics hostname suffixes matching the illegal-class hosts emitted
/// by the corpus generator, plus unrelated entries.
pub fn sample_hostlist() -> &'static str {
    "# ad and analytics servers\n\
     clickpath.example\n\
     admix.example\n\
     pixelads.example\n\
     metrics.example\n"
}

/// Generate app contexts in two intent groups. `expected` instances look
/// like weather/travel apps whose windows plausibly use location;
/// `unexpected` instances look like games and flashlights that have no
/// business sharing it. Returns (context, is_expected) pairs.
pub fn sample_contexts(per_group: usize, seed: u64) -> Vec<(AppContext, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(per_group * 2);
    for i in 0..per_group {
        out.push((expected_context(i, &mut rng), true));
        out.push((unexpected_context(i, &mut rng), false));
    }
    out
}

fn expected_context(i: usize, rng: &mut ChaCha8Rng) -> AppContext {
    let names = ["LocalWeather", "CityRadar", "TravelMap", "WeatherClock"];
    let descriptions = [
        "Accurate weather forecast with radar and temperature alerts for your city",
        "Plan travel routes with offline city maps and hotel finders",
        "Hourly forecast, rain radar and severe weather warnings where you are",
    ];
    let ui = [
        vec!["Forecast for Davis".to_string(), "Humidity 40%".to_string()],
        vec![
            "Route to Sacramento".to_string(),
            "Nearby hotels".to_string(),
        ],
    ];
    AppContext {
        instance_id: format!("exp-{i:04}"),
        app_name: names[rng.gen_range(0..names.len())].to_string(),
        description: descriptions[rng.gen_range(0..descriptions.len())].to_string(),
        market_category: "weather".into(),
        ui_texts: ui[rng.gen_range(0..ui.len())].clone(),
        clickable_labels: vec!["Davis".into(), "Refresh".into()],
    }
}

fn unexpected_context(i: usize, rng: &mut ChaCha8Rng) -> AppContext {
    let names = ["BrickSmash", "SuperLed", "PuzzleBox", "NoteScan"];
    let descriptions = [
        "Smash bricks across 200 arcade levels and chase the high score",
        "The brightest LED flashlight with a simple torch button",
        "Relaxing puzzle game with daily solitaire challenges",
    ];
    let ui = [
        vec!["Level 3".to_string(), "Score 1200".to_string()],
        vec!["Torch on".to_string()],
    ];
    AppContext {
        instance_id: format!("unexp-{i:04}"),
        app_name: names[rng.gen_range(0..names.len())].to_string(),
        description: descriptions[rng.gen_range(0..descriptions.len())].to_string(),
        market_category: "games".into(),
        ui_texts: ui[rng.gen_range(0..ui.len())].clone(),
        clickable_labels: vec!["Play".into(), "OK".into()],
    }
}
