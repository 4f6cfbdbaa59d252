//! Plain-text scenario files.
//!
//! ```text
//! # comment
//! [scenario]
//! name = jodel
//! user_count = 750
//! area = 1000, 1000          # width_m, height_m
//! horizon_s = 86400
//! seed = 1
//!
//! [users]
//! reactions = ignore, comment/vote, save
//! base = 0.9, 0.095, 0.005
//! base_mode = fixed          # fixed | lognormal
//! base_sigma = 0.5           # lognormal only
//! vocabulary =               # comma-separated keywords
//! interests_per_user = 0     # n or min-max
//!
//! [messages]
//! rate_per_user_per_day = 5
//! popularity = 0:0.7, 10-20:0.29, 50:0.01
//! keywords_per_message = 0
//! place_policy = none        # none | city-center | uniform
//! time_policy = none         # none | evening-weekend | uniform
//! place_center_weight = 0.8
//! time_evening_weight = 0.7
//! visit_probability = 0.5
//! danger_radius_m = none     # none | meters
//! single_emergency = false
//!
//! [mobility]
//! speed_mps = 1.4
//! flee_speed_mps = 3
//! alpha = 0.7
//! cell_size_m = 100
//! wait_min_s = 60
//! wait_max_s = 1800
//! wait_slope = 1.5
//! flee_margin = 0.1
//! flee_policy = radial       # radial | swim-outside
//!
//! [contact]
//! radius_m = 30
//! scan_interval_s = 10
//! ```
//!
//! Everything in `[scenario]` plus `users.reactions`, `users.base`,
//! `messages.rate_per_user_per_day` and `messages.popularity` is required;
//! other keys fall back to the defaults shown. Unknown sections and keys are
//! rejected. Values are parsed here; range and consistency checks happen in
//! [`crate::model::validate_scenario`].

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::mobility::{FleePolicy, MobilityParams};
use crate::model::{
    Area, BaseMode, BaseSpec, IntRange, PlacePolicy, PopularityBin, PopularityDistribution,
    ReactionSet, ScenarioConfig, TimePolicy,
};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{path}: {message}")]
    Value { path: String, message: String },
    #[error("missing required key `{0}`")]
    Missing(String),
}

const KEYS: &[(&str, &[&str])] = &[
    (
        "scenario",
        &["name", "user_count", "area", "horizon_s", "seed"],
    ),
    (
        "users",
        &[
            "reactions",
            "base",
            "base_mode",
            "base_sigma",
            "vocabulary",
            "interests_per_user",
        ],
    ),
    (
        "messages",
        &[
            "rate_per_user_per_day",
            "popularity",
            "keywords_per_message",
            "place_policy",
            "time_policy",
            "place_center_weight",
            "time_evening_weight",
            "visit_probability",
            "danger_radius_m",
            "single_emergency",
        ],
    ),
    (
        "mobility",
        &[
            "speed_mps",
            "flee_speed_mps",
            "alpha",
            "cell_size_m",
            "wait_min_s",
            "wait_max_s",
            "wait_slope",
            "flee_margin",
            "flee_policy",
        ],
    ),
    ("contact", &["radius_m", "scan_interval_s"]),
];

struct Entries(BTreeMap<String, (usize, String)>);

impl Entries {
    fn take(&mut self, path: &str) -> Option<String> {
        self.0.remove(path).map(|(_, v)| v)
    }

    fn required(&mut self, path: &str) -> Result<String, ParseError> {
        self.take(path)
            .ok_or_else(|| ParseError::Missing(path.into()))
    }

    fn parsed<T: FromStr>(&mut self, path: &str, default: Option<T>) -> Result<T, ParseError> {
        match self.take(path) {
            Some(v) => v
                .parse()
                .map_err(|_| bad(path, format!("cannot parse `{v}`"))),
            None => default.ok_or_else(|| ParseError::Missing(path.into())),
        }
    }
}

fn bad(path: &str, message: String) -> ParseError {
    ParseError::Value {
        path: path.into(),
        message,
    }
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_floats(path: &str, v: &str) -> Result<Vec<f64>, ParseError> {
    split_list(v)
        .iter()
        .map(|s| {
            s.parse()
                .map_err(|_| bad(path, format!("`{s}` is not a number")))
        })
        .collect()
}

fn parse_range(path: &str, v: &str) -> Result<IntRange, ParseError> {
    let err = || bad(path, format!("expected `n` or `min-max`, got `{v}`"));
    match v.split_once('-') {
        Some((a, b)) => Ok(IntRange::new(
            a.trim().parse().map_err(|_| err())?,
            b.trim().parse().map_err(|_| err())?,
        )),
        None => Ok(IntRange::fixed(v.trim().parse().map_err(|_| err())?)),
    }
}

fn parse_popularity(path: &str, v: &str) -> Result<PopularityDistribution, ParseError> {
    let bins = split_list(v)
        .iter()
        .map(|item| {
            let (value, prob) = item
                .split_once(':')
                .ok_or_else(|| bad(path, format!("expected `value:prob`, got `{item}`")))?;
            let range = parse_range(path, value)?;
            let to_u8 = |x: u32| {
                u8::try_from(x).map_err(|_| bad(path, format!("popularity {x} exceeds 255")))
            };
            Ok(PopularityBin {
                lo: to_u8(range.min)?,
                hi: to_u8(range.max)?,
                prob: prob
                    .trim()
                    .parse()
                    .map_err(|_| bad(path, format!("`{prob}` is not a probability")))?,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(PopularityDistribution { bins })
}

fn parse_bool(path: &str, v: &str) -> Result<bool, ParseError> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(bad(path, format!("expected true/false, got `{v}`"))),
    }
}

fn place_name(p: PlacePolicy) -> &'static str {
    match p {
        PlacePolicy::None => "none",
        PlacePolicy::CityCenter => "city-center",
        PlacePolicy::Uniform => "uniform",
    }
}

fn time_name(p: TimePolicy) -> &'static str {
    match p {
        TimePolicy::None => "none",
        TimePolicy::EveningWeekend => "evening-weekend",
        TimePolicy::Uniform => "uniform",
    }
}

fn flee_name(p: FleePolicy) -> &'static str {
    match p {
        FleePolicy::Radial => "radial",
        FleePolicy::SwimOutside => "swim-outside",
    }
}

fn lex(text: &str) -> Result<Entries, ParseError> {
    let mut section: Option<&str> = None;
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |message: String| ParseError::Syntax {
            line: line_no,
            message,
        };
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            let known = KEYS
                .iter()
                .find(|(s, _)| *s == name)
                .ok_or_else(|| syntax(format!("unknown section [{name}]")))?;
            section = Some(known.0);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| syntax(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let sec = section.ok_or_else(|| syntax("key outside of any section".into()))?;
        let allowed = KEYS
            .iter()
            .find(|(s, _)| *s == sec)
            .map(|k| k.1)
            .unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(syntax(format!("unknown key `{key}` in [{sec}]")));
        }
        let path = format!("{sec}.{key}");
        if out
            .insert(path.clone(), (line_no, value.trim().to_string()))
            .is_some()
        {
            return Err(syntax(format!("duplicate key `{path}`")));
        }
    }
    Ok(Entries(out))
}

/// Parses a scenario file. Semantic checks are left to `validate_scenario`.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ParseError> {
    let mut e = lex(text)?;
    let defaults = MobilityParams::default();

    let name = e.required("scenario.name")?;
    let user_count = e.parsed("scenario.user_count", None)?;
    let area = parse_floats("scenario.area", &e.required("scenario.area")?)?;
    let [width, height] = area[..] else {
        return Err(bad("scenario.area", "expected `width, height`".into()));
    };
    let run_horizon = e.parsed("scenario.horizon_s", None)?;
    let master_seed = e.parsed("scenario.seed", None)?;

    let labels = split_list(&e.required("users.reactions")?);
    let reaction_set =
        ReactionSet::new(labels).map_err(|err| bad("users.reactions", err.to_string()))?;
    let vector = parse_floats("users.base", &e.required("users.base")?)?;
    let mode = match e.take("users.base_mode").as_deref().unwrap_or("fixed") {
        "fixed" => {
            e.take("users.base_sigma");
            BaseMode::Fixed
        }
        "lognormal" => BaseMode::LogNormal {
            sigma: e.parsed("users.base_sigma", Some(0.5))?,
        },
        other => return Err(bad("users.base_mode", format!("unknown mode `{other}`"))),
    };
    let keyword_vocabulary = split_list(&e.take("users.vocabulary").unwrap_or_default());
    let interests_per_user = match e.take("users.interests_per_user") {
        Some(v) => parse_range("users.interests_per_user", &v)?,
        None => IntRange::fixed(0),
    };

    let message_rate_per_user_per_day = e.parsed("messages.rate_per_user_per_day", None)?;
    let popularity = parse_popularity("messages.popularity", &e.required("messages.popularity")?)?;
    let keywords_per_message = match e.take("messages.keywords_per_message") {
        Some(v) => parse_range("messages.keywords_per_message", &v)?,
        None => IntRange::fixed(0),
    };
    let event_place_policy = match e.take("messages.place_policy").as_deref().unwrap_or("none") {
        "none" => PlacePolicy::None,
        "city-center" => PlacePolicy::CityCenter,
        "uniform" => PlacePolicy::Uniform,
        other => {
            return Err(bad(
                "messages.place_policy",
                format!("unknown policy `{other}`"),
            ))
        }
    };
    let event_time_policy = match e.take("messages.time_policy").as_deref().unwrap_or("none") {
        "none" => TimePolicy::None,
        "evening-weekend" => TimePolicy::EveningWeekend,
        "uniform" => TimePolicy::Uniform,
        other => {
            return Err(bad(
                "messages.time_policy",
                format!("unknown policy `{other}`"),
            ))
        }
    };
    let place_center_weight = e.parsed("messages.place_center_weight", Some(0.8))?;
    let time_evening_weight = e.parsed("messages.time_evening_weight", Some(0.7))?;
    let visit_probability = e.parsed("messages.visit_probability", Some(0.5))?;
    let danger_radius_m = match e.take("messages.danger_radius_m").as_deref() {
        None | Some("none") => None,
        Some(v) => Some(
            v.parse()
                .map_err(|_| bad("messages.danger_radius_m", format!("cannot parse `{v}`")))?,
        ),
    };
    let single_emergency = match e.take("messages.single_emergency") {
        Some(v) => parse_bool("messages.single_emergency", &v)?,
        None => false,
    };

    let mobility = MobilityParams {
        speed_mps: e.parsed("mobility.speed_mps", Some(defaults.speed_mps))?,
        flee_speed_mps: e.parsed("mobility.flee_speed_mps", Some(defaults.flee_speed_mps))?,
        alpha: e.parsed("mobility.alpha", Some(defaults.alpha))?,
        cell_size_m: e.parsed("mobility.cell_size_m", Some(defaults.cell_size_m))?,
        wait_min_s: e.parsed("mobility.wait_min_s", Some(defaults.wait_min_s))?,
        wait_max_s: e.parsed("mobility.wait_max_s", Some(defaults.wait_max_s))?,
        wait_slope: e.parsed("mobility.wait_slope", Some(defaults.wait_slope))?,
        flee_margin: e.parsed("mobility.flee_margin", Some(defaults.flee_margin))?,
        flee_policy: match e.take("mobility.flee_policy").as_deref() {
            None => defaults.flee_policy,
            Some("radial") => FleePolicy::Radial,
            Some("swim-outside") => FleePolicy::SwimOutside,
            Some(other) => {
                return Err(bad(
                    "mobility.flee_policy",
                    format!("unknown policy `{other}`"),
                ))
            }
        },
    };
    let contact_radius_m = e.parsed("contact.radius_m", Some(30.0))?;
    let contact_scan_interval_s = e.parsed("contact.scan_interval_s", Some(10.0))?;

    Ok(ScenarioConfig {
        name,
        user_count,
        area: Area { width, height },
        run_horizon,
        master_seed,
        reaction_set,
        base: BaseSpec { vector, mode },
        keyword_vocabulary,
        interests_per_user,
        message_rate_per_user_per_day,
        popularity,
        keywords_per_message,
        event_place_policy,
        event_time_policy,
        place_center_weight,
        time_evening_weight,
        visit_probability,
        danger_radius_m,
        single_emergency,
        mobility,
        contact_radius_m,
        contact_scan_interval_s,
    })
}

fn join<T: ToString>(items: &[T]) -> String {
    items
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(", ")
}

fn range(r: IntRange) -> String {
    if r.min == r.max {
        r.min.to_string()
    } else {
        format!("{}-{}", r.min, r.max)
    }
}

/// Serializes a scenario; `parse_scenario(&scenario_to_text(c)) == Ok(c)`.
pub fn scenario_to_text(cfg: &ScenarioConfig) -> String {
    let mut s = String::new();
    let m = &cfg.mobility;
    let pop: Vec<String> = cfg
        .popularity
        .bins
        .iter()
        .map(|b| {
            let v = if b.lo == b.hi {
                b.lo.to_string()
            } else {
                format!("{}-{}", b.lo, b.hi)
            };
            format!("{v}:{:?}", b.prob)
        })
        .collect();
    let _ = writeln!(s, "[scenario]");
    let _ = writeln!(s, "name = {}", cfg.name);
    let _ = writeln!(s, "user_count = {}", cfg.user_count);
    let _ = writeln!(s, "area = {}, {}", cfg.area.width, cfg.area.height);
    let _ = writeln!(s, "horizon_s = {}", cfg.run_horizon);
    let _ = writeln!(s, "seed = {}", cfg.master_seed);
    let _ = writeln!(s, "\n[users]");
    let _ = writeln!(s, "reactions = {}", cfg.reaction_set.labels().join(", "));
    let _ = writeln!(s, "base = {}", join(&cfg.base.vector));
    match cfg.base.mode {
        BaseMode::Fixed => {
            let _ = writeln!(s, "base_mode = fixed");
        }
        BaseMode::LogNormal { sigma } => {
            let _ = writeln!(s, "base_mode = lognormal");
            let _ = writeln!(s, "base_sigma = {sigma}");
        }
    }
    let _ = writeln!(s, "vocabulary = {}", cfg.keyword_vocabulary.join(", "));
    let _ = writeln!(s, "interests_per_user = {}", range(cfg.interests_per_user));
    let _ = writeln!(s, "\n[messages]");
    let _ = writeln!(
        s,
        "rate_per_user_per_day = {}",
        cfg.message_rate_per_user_per_day
    );
    let _ = writeln!(s, "popularity = {}", pop.join(", "));
    let _ = writeln!(
        s,
        "keywords_per_message = {}",
        range(cfg.keywords_per_message)
    );
    let _ = writeln!(s, "place_policy = {}", place_name(cfg.event_place_policy));
    let _ = writeln!(s, "time_policy = {}", time_name(cfg.event_time_policy));
    let _ = writeln!(s, "place_center_weight = {}", cfg.place_center_weight);
    let _ = writeln!(s, "time_evening_weight = {}", cfg.time_evening_weight);
    let _ = writeln!(s, "visit_probability = {}", cfg.visit_probability);
    match cfg.danger_radius_m {
        Some(r) => {
            let _ = writeln!(s, "danger_radius_m = {r}");
        }
        None => {
            let _ = writeln!(s, "danger_radius_m = none");
        }
    }
    let _ = writeln!(s, "single_emergency = {}", cfg.single_emergency);
    let _ = writeln!(s, "\n[mobility]");
    let _ = writeln!(s, "speed_mps = {}", m.speed_mps);
    let _ = writeln!(s, "flee_speed_mps = {}", m.flee_speed_mps);
    let _ = writeln!(s, "alpha = {}", m.alpha);
    let _ = writeln!(s, "cell_size_m = {}", m.cell_size_m);
    let _ = writeln!(s, "wait_min_s = {}", m.wait_min_s);
    let _ = writeln!(s, "wait_max_s = {}", m.wait_max_s);
    let _ = writeln!(s, "wait_slope = {}", m.wait_slope);
    let _ = writeln!(s, "flee_margin = {}", m.flee_margin);
    let _ = writeln!(s, "flee_policy = {}", flee_name(m.flee_policy));
    let _ = writeln!(s, "\n[contact]");
    let _ = writeln!(s, "radius_m = {}", cfg.contact_radius_m);
    let _ = writeln!(s, "scan_interval_s = {}", cfg.contact_scan_interval_s);
    s
}
