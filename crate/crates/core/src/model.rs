//! Users, messages, reaction sets, and scenario configuration.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::SimTime;
use crate::mobility::MobilityParams;

pub type UserId = usize;
pub type MsgId = usize;

/// Planar position in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Rectangular simulation area anchored at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub width: f64,
    pub height: f64,
}

impl Area {
    pub const fn new(width: f64, height: f64) -> Self {
        Area { width, height }
    }

    pub fn contains(&self, p: &Position) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }

    pub fn clamp(&self, p: Position) -> Position {
        Position::new(p.x.clamp(0.0, self.width), p.y.clamp(0.0, self.height))
    }

    pub fn center(&self) -> Position {
        Position::new(self.width / 2.0, self.height / 2.0)
    }

    pub fn min_dim(&self) -> f64 {
        self.width.min(self.height)
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.height)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("reaction set must not be empty")]
    EmptyReactionSet,
    #[error("duplicate reaction label `{0}`")]
    DuplicateReaction(String),
    #[error("base has {base} entries but the reaction set has {reactions}")]
    BaseLengthMismatch { base: usize, reactions: usize },
    #[error("base probabilities must be non-negative and sum to 1 (sum = {0})")]
    InvalidBase(f64),
    #[error("popularity {0} outside [0, 100]")]
    PopularityOutOfRange(u8),
    #[error("event start {start} is not before event end {end}")]
    EventWindowInverted { start: f64, end: f64 },
    #[error("danger radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("message carries no keywords, no popularity field and no event")]
    MeaninglessMessage,
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

/// Ordered reactions, weakest (index 0, the ignore class) to strongest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionSet {
    labels: Vec<String>,
}

impl ReactionSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, ModelError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.is_empty() {
            return Err(ModelError::EmptyReactionSet);
        }
        let mut seen = BTreeSet::new();
        for l in &labels {
            if !seen.insert(l.as_str()) {
                return Err(ModelError::DuplicateReaction(l.clone()));
            }
        }
        Ok(ReactionSet { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn strongest(&self) -> usize {
        self.labels.len() - 1
    }
}

pub(crate) const PROBABILITY_TOLERANCE: f64 = 1e-9;

fn check_base(base: &[f64], reactions: &ReactionSet) -> Result<(), ModelError> {
    if base.len() != reactions.len() {
        return Err(ModelError::BaseLengthMismatch {
            base: base.len(),
            reactions: reactions.len(),
        });
    }
    let sum: f64 = base.iter().sum();
    if base.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(ModelError::InvalidBase(sum));
    }
    Ok(())
}

/// Lower-cased, trimmed keyword; matching is case-insensitive exact equality.
pub fn normalize_keyword(k: &str) -> String {
    k.trim().to_lowercase()
}

/// A simulated user: interests, possible reactions and base reaction probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct UserProfile {
    user_id: UserId,
    interests: BTreeSet<String>,
    reactions: ReactionSet,
    base: Vec<f64>,
}

impl UserProfile {
    pub fn new<S: AsRef<str>>(
        user_id: UserId,
        interests: impl IntoIterator<Item = S>,
        reactions: ReactionSet,
        base: Vec<f64>,
    ) -> Result<Self, ModelError> {
        check_base(&base, &reactions)?;
        Ok(UserProfile {
            user_id,
            interests: interests
                .into_iter()
                .map(|s| normalize_keyword(s.as_ref()))
                .collect(),
            reactions,
            base,
        })
    }

    pub fn user_id(&self) -> UserId {
        self.user_id
    }

    pub fn interests(&self) -> &BTreeSet<String> {
        &self.interests
    }

    pub fn reactions(&self) -> &ReactionSet {
        &self.reactions
    }

    pub fn base(&self) -> &[f64] {
        &self.base
    }
}

/// Time and place of an announced event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventWindow {
    pub start: SimTime,
    pub end: SimTime,
    pub addr: Position,
}

/// Danger area of an emergency message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DangerZone {
    pub center: Position,
    pub radius: f64,
}

impl DangerZone {
    pub fn contains(&self, p: &Position) -> bool {
        self.center.distance(p) <= self.radius
    }
}

/// Unvalidated message fields; turn into a [`Message`] with [`Message::new`].
#[derive(Debug, Clone, Default)]
pub struct MessageDraft {
    pub msg_id: MsgId,
    pub keywords: Vec<String>,
    /// `None` when the message carries no popularity field at all.
    pub popularity: Option<u8>,
    pub event: Option<EventWindow>,
    pub danger: Option<DangerZone>,
    pub injection_time: SimTime,
    pub origin_node: UserId,
}

/// A disseminated message. Event messages carry an [`EventWindow`]; emergency
/// messages carry a [`DangerZone`] whose center doubles as the message address.
#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    msg_id: MsgId,
    keywords: BTreeSet<String>,
    popularity: Option<u8>,
    event: Option<EventWindow>,
    danger: Option<DangerZone>,
    injection_time: SimTime,
    origin_node: UserId,
}

impl Message {
    pub fn new(draft: MessageDraft) -> Result<Self, ModelError> {
        if let Some(pop) = draft.popularity.filter(|p| *p > 100) {
            return Err(ModelError::PopularityOutOfRange(pop));
        }
        if let Some(ev) = &draft.event {
            if ev.start >= ev.end {
                return Err(ModelError::EventWindowInverted {
                    start: ev.start.secs(),
                    end: ev.end.secs(),
                });
            }
        }
        if let Some(d) = &draft.danger {
            if !(d.radius > 0.0) {
                return Err(ModelError::InvalidRadius(d.radius));
            }
        }
        let keywords: BTreeSet<String> = draft
            .keywords
            .iter()
            .map(|k| normalize_keyword(k))
            .filter(|k| !k.is_empty())
            .collect();
        if keywords.is_empty() && draft.popularity.is_none() && draft.event.is_none() {
            return Err(ModelError::MeaninglessMessage);
        }
        Ok(Message {
            msg_id: draft.msg_id,
            keywords,
            popularity: draft.popularity,
            event: draft.event,
            danger: draft.danger,
            injection_time: draft.injection_time,
            origin_node: draft.origin_node,
        })
    }

    pub fn msg_id(&self) -> MsgId {
        self.msg_id
    }

    pub fn keywords(&self) -> &BTreeSet<String> {
        &self.keywords
    }

    /// Popularity in `[0, 100]`; an absent field reads as 0.
    pub fn popularity(&self) -> u8 {
        self.popularity.unwrap_or(0)
    }

    pub fn has_popularity(&self) -> bool {
        self.popularity.is_some()
    }

    pub fn event(&self) -> Option<&EventWindow> {
        self.event.as_ref()
    }

    pub fn danger(&self) -> Option<&DangerZone> {
        self.danger.as_ref()
    }

    pub fn is_emergency(&self) -> bool {
        self.danger.is_some()
    }

    pub fn event_start(&self) -> Option<SimTime> {
        self.event.map(|e| e.start)
    }

    pub fn event_end(&self) -> Option<SimTime> {
        self.event.map(|e| e.end)
    }

    /// Event address, or the danger center for emergencies.
    pub fn event_addr(&self) -> Option<Position> {
        self.event
            .map(|e| e.addr)
            .or_else(|| self.danger.map(|d| d.center))
    }

    pub fn danger_radius(&self) -> Option<f64> {
        self.danger.map(|d| d.radius)
    }

    pub fn injection_time(&self) -> SimTime {
        self.injection_time
    }

    pub fn origin_node(&self) -> UserId {
        self.origin_node
    }
}

/// Number of message keywords that are also interests of the user.
pub fn matching_keywords(user: &UserProfile, msg: &Message) -> usize {
    user.interests().intersection(msg.keywords()).count()
}

/// Inclusive integer range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: u32,
    pub max: u32,
}

impl IntRange {
    pub const fn new(min: u32, max: u32) -> Self {
        IntRange { min, max }
    }

    pub const fn fixed(v: u32) -> Self {
        IntRange { min: v, max: v }
    }
}

/// Probability mass assigned to a popularity value or to a uniform integer range of values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PopularityBin {
    pub lo: u8,
    pub hi: u8,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopularityDistribution {
    pub bins: Vec<PopularityBin>,
}

impl PopularityDistribution {
    pub fn total(&self) -> f64 {
        self.bins.iter().map(|b| b.prob).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaseMode {
    /// Every user gets the configured vector.
    Fixed,
    /// Non-ignore mass scaled by a per-user log-normal factor, then renormalized.
    LogNormal { sigma: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseSpec {
    pub vector: Vec<f64>,
    pub mode: BaseMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlacePolicy {
    None,
    CityCenter,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimePolicy {
    None,
    EveningWeekend,
    Uniform,
}

/// Full parameterization of one application scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub user_count: usize,
    pub area: Area,
    pub run_horizon: f64,
    pub master_seed: u64,
    pub reaction_set: ReactionSet,
    pub base: BaseSpec,
    pub keyword_vocabulary: Vec<String>,
    pub interests_per_user: IntRange,
    pub message_rate_per_user_per_day: f64,
    pub popularity: PopularityDistribution,
    pub keywords_per_message: IntRange,
    pub event_place_policy: PlacePolicy,
    pub event_time_policy: TimePolicy,
    /// Share of event places drawn around the area center.
    pub place_center_weight: f64,
    /// Share of event starts drawn from evening slots.
    pub time_evening_weight: f64,
    pub visit_probability: f64,
    pub danger_radius_m: Option<f64>,
    pub single_emergency: bool,
    pub mobility: MobilityParams,
    pub contact_radius_m: f64,
    pub contact_scan_interval_s: f64,
}

impl ScenarioConfig {
    pub fn horizon(&self) -> SimTime {
        SimTime::from_secs(self.run_horizon)
    }
}

/// One failed scenario check, addressed by `section.key`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn short(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

/// Checks every scenario invariant; an empty result means the scenario is valid.
pub fn validate_scenario(cfg: &ScenarioConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut fail = |path: &str, message: String| {
        out.push(Violation {
            path: path.to_string(),
            message,
        })
    };

    if cfg.user_count < 1 {
        fail("scenario.user_count", "user_count >= 1 required".into());
    }
    if !(cfg.area.width > 0.0 && cfg.area.height > 0.0) {
        fail("scenario.area", "width and height must be positive".into());
    }
    if !(cfg.run_horizon > 0.0 && cfg.run_horizon.is_finite()) {
        fail(
            "scenario.horizon_s",
            "horizon must be positive and finite".into(),
        );
    }

    let base = &cfg.base.vector;
    if base.len() != cfg.reaction_set.len() {
        fail(
            "users.base",
            format!(
                "{} probabilities for {} reactions",
                base.len(),
                cfg.reaction_set.len()
            ),
        );
    }
    if base.iter().any(|p| !(*p >= 0.0)) {
        fail("users.base", "probabilities must be non-negative".into());
    }
    let base_sum: f64 = base.iter().sum();
    if (base_sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        fail("users.base", format!("sums to {}", short(base_sum)));
    }
    if let BaseMode::LogNormal { sigma } = cfg.base.mode {
        if !(sigma > 0.0) {
            fail("users.base_sigma", "sigma must be positive".into());
        }
    }

    let vocab: BTreeSet<String> = cfg
        .keyword_vocabulary
        .iter()
        .map(|k| normalize_keyword(k))
        .collect();
    if vocab.len() != cfg.keyword_vocabulary.len() {
        fail("users.vocabulary", "keywords must be unique".into());
    }
    for (path, range) in [
        ("users.interests_per_user", cfg.interests_per_user),
        ("messages.keywords_per_message", cfg.keywords_per_message),
    ] {
        if range.min > range.max {
            fail(path, format!("min {} exceeds max {}", range.min, range.max));
        }
        if range.max as usize > vocab.len() {
            fail(
                path,
                format!("max {} exceeds vocabulary size {}", range.max, vocab.len()),
            );
        }
    }

    if !(cfg.message_rate_per_user_per_day > 0.0 && cfg.message_rate_per_user_per_day.is_finite()) {
        fail(
            "messages.rate_per_user_per_day",
            "rate must be positive".into(),
        );
    }
    if cfg.popularity.bins.is_empty() {
        fail("messages.popularity", "distribution is empty".into());
    }
    for b in &cfg.popularity.bins {
        if b.lo > b.hi || b.hi > 100 {
            fail(
                "messages.popularity",
                format!("bin {}-{} outside [0, 100] or inverted", b.lo, b.hi),
            );
        }
        if !(b.prob >= 0.0) {
            fail(
                "messages.popularity",
                "probabilities must be non-negative".into(),
            );
        }
    }
    let pop_sum = cfg.popularity.total();
    if (pop_sum - 1.0).abs() > PROBABILITY_TOLERANCE {
        fail("messages.popularity", format!("sums to {}", short(pop_sum)));
    }

    let emergency = cfg.danger_radius_m.is_some();
    if let Some(r) = cfg.danger_radius_m {
        if !(r > 0.0) {
            fail("messages.danger_radius_m", "radius must be positive".into());
        }
        if cfg.event_place_policy == PlacePolicy::None {
            fail(
                "messages.place_policy",
                "emergency messages need a place policy for the danger center".into(),
            );
        }
        if cfg.event_time_policy != TimePolicy::None {
            fail(
                "messages.time_policy",
                "emergency messages carry no event window".into(),
            );
        }
    } else {
        let has_place = cfg.event_place_policy != PlacePolicy::None;
        let has_time = cfg.event_time_policy != TimePolicy::None;
        if has_place != has_time {
            fail(
                "messages.time_policy",
                "place_policy and time_policy must both be set or both be none".into(),
            );
        }
    }
    if cfg.single_emergency && !emergency {
        fail(
            "messages.single_emergency",
            "requires danger_radius_m".into(),
        );
    }
    for (path, p) in [
        ("messages.visit_probability", cfg.visit_probability),
        ("messages.place_center_weight", cfg.place_center_weight),
        ("messages.time_evening_weight", cfg.time_evening_weight),
    ] {
        if !(0.0..=1.0).contains(&p) {
            fail(path, format!("{} outside [0, 1]", p));
        }
    }

    let m = &cfg.mobility;
    if !(m.speed_mps > 0.0) {
        fail("mobility.speed_mps", "must be positive".into());
    }
    if !(m.flee_speed_mps > 0.0) {
        fail("mobility.flee_speed_mps", "must be positive".into());
    }
    if !(0.0..=1.0).contains(&m.alpha) {
        fail("mobility.alpha", "must lie in [0, 1]".into());
    }
    if !(m.cell_size_m > 0.0) {
        fail("mobility.cell_size_m", "must be positive".into());
    }
    if !(m.wait_min_s > 0.0 && m.wait_min_s < m.wait_max_s) {
        fail(
            "mobility.wait_min_s",
            "0 < wait_min_s < wait_max_s required".into(),
        );
    }
    if !(m.wait_slope > 1.0) {
        fail("mobility.wait_slope", "must exceed 1".into());
    }
    if !(m.flee_margin > 0.0) {
        fail("mobility.flee_margin", "must be positive".into());
    }

    if !(cfg.contact_radius_m > 0.0) {
        fail("contact.radius_m", "must be positive".into());
    }
    if !(cfg.contact_scan_interval_s > 0.0) {
        fail("contact.scan_interval_s", "must be positive".into());
    }
    out
}

/// Names of the built-in application presets.
pub const PRESET_NAMES: [&str; 3] = ["jodel", "city-events", "emergency"];

pub const CITY_VOCABULARY: [&str; 9] = [
    "sale",
    "concert",
    "exhibition",
    "outdoor",
    "food",
    "happy hour",
    "market",
    "sports",
    "demonstration",
];

fn bin(lo: u8, hi: u8, prob: f64) -> PopularityBin {
    PopularityBin { lo, hi, prob }
}

/// Built-in application presets.
pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig, ModelError> {
    let reactions = |labels: &[&str]| ReactionSet::new(labels.iter().copied()).expect("preset");
    let base_cfg = ScenarioConfig {
        name: name.to_string(),
        user_count: 750,
        area: Area {
            width: 1000.0,
            height: 1000.0,
        },
        run_horizon: 86_400.0,
        master_seed: 1,
        reaction_set: reactions(&["ignore", "comment/vote", "save"]),
        base: BaseSpec {
            vector: vec![0.90, 0.095, 0.005],
            mode: BaseMode::Fixed,
        },
        keyword_vocabulary: Vec::new(),
        interests_per_user: IntRange::fixed(0),
        message_rate_per_user_per_day: 5.0,
        popularity: PopularityDistribution {
            bins: vec![bin(0, 0, 0.70), bin(10, 20, 0.29), bin(50, 50, 0.01)],
        },
        keywords_per_message: IntRange::fixed(0),
        event_place_policy: PlacePolicy::None,
        event_time_policy: TimePolicy::None,
        place_center_weight: 0.8,
        time_evening_weight: 0.7,
        visit_probability: 0.5,
        danger_radius_m: None,
        single_emergency: false,
        mobility: MobilityParams::default(),
        contact_radius_m: 30.0,
        contact_scan_interval_s: 10.0,
    };
    match name {
        "jodel" => Ok(base_cfg),
        "city-events" => Ok(ScenarioConfig {
            user_count: 2000,
            area: Area {
                width: 3000.0,
                height: 3000.0,
            },
            run_horizon: 7.0 * 86_400.0,
            reaction_set: reactions(&["ignore", "like", "save", "save&go"]),
            base: BaseSpec {
                vector: vec![0.80, 0.15, 0.045, 0.005],
                mode: BaseMode::Fixed,
            },
            keyword_vocabulary: CITY_VOCABULARY.iter().map(|s| s.to_string()).collect(),
            interests_per_user: IntRange::new(2, 5),
            message_rate_per_user_per_day: 0.1,
            popularity: PopularityDistribution {
                bins: vec![bin(0, 0, 0.70), bin(1, 5, 0.29), bin(10, 10, 0.01)],
            },
            keywords_per_message: IntRange::new(2, 5),
            event_place_policy: PlacePolicy::CityCenter,
            event_time_policy: TimePolicy::EveningWeekend,
            ..base_cfg
        }),
        "emergency" => Ok(ScenarioConfig {
            user_count: 2000,
            reaction_set: reactions(&["read", "read&run"]),
            base: BaseSpec {
                vector: vec![0.0, 1.0],
                mode: BaseMode::Fixed,
            },
            message_rate_per_user_per_day: 0.1,
            popularity: PopularityDistribution {
                bins: vec![bin(100, 100, 1.0)],
            },
            event_place_policy: PlacePolicy::Uniform,
            event_time_policy: TimePolicy::None,
            danger_radius_m: Some(300.0),
            ..base_cfg
        }),
        other => Err(ModelError::UnknownScenario(other.to_string())),
    }
}
