//! Population and message schedule generation.
//!
//! The full injection schedule is drawn before the run starts so that every
//! user's reaction to every message can be fixed up front.

use std::io::{self, Write};

use rand_distr::{Distribution, Exp, LogNormal, Normal};

use crate::kernel::{RngStream, SimTime, SECONDS_PER_DAY};
use crate::model::{
    Area, BaseMode, DangerZone, EventWindow, IntRange, Message, MessageDraft, PlacePolicy,
    Position, ScenarioConfig, TimePolicy, UserProfile,
};

const HOUR: f64 = 3600.0;
const EVENING_START: f64 = 18.0 * HOUR;
const EVENING_END: f64 = 23.0 * HOUR;
const MIN_EVENT: f64 = HOUR;
const MAX_EVENT: f64 = 4.0 * HOUR;

/// Messages in injection order; message ids are dense and follow that order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct InjectionSchedule {
    entries: Vec<Message>,
}

impl InjectionSchedule {
    /// Sorts `messages` by injection time (ties by origin).
    pub fn from_messages(mut messages: Vec<Message>) -> Self {
        messages.sort_by(|a, b| {
            a.injection_time()
                .secs()
                .total_cmp(&b.injection_time().secs())
                .then(a.origin_node().cmp(&b.origin_node()))
        });
        InjectionSchedule { entries: messages }
    }

    pub fn messages(&self) -> &[Message] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// CSV dump: `injection_time,msg_id,origin,popularity,keywords,start,end,addr_x,addr_y,radius`.
    /// Keywords are `;`-separated; absent fields are empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(
            w,
            "injection_time,msg_id,origin,popularity,keywords,start,end,addr_x,addr_y,radius"
        )?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for m in &self.entries {
            let keywords: Vec<&str> = m.keywords().iter().map(String::as_str).collect();
            let addr = m.event_addr();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{}",
                m.injection_time(),
                m.msg_id(),
                m.origin_node(),
                if m.has_popularity() {
                    m.popularity().to_string()
                } else {
                    String::new()
                },
                keywords.join(";"),
                opt(m.event_start().map(SimTime::secs)),
                opt(m.event_end().map(SimTime::secs)),
                opt(addr.map(|a| a.x)),
                opt(addr.map(|a| a.y)),
                opt(m.danger_radius()),
            )?;
        }
        Ok(())
    }
}

fn pick_distinct(vocab: &[String], range: IntRange, rng: &mut RngStream) -> Vec<String> {
    let count = (rng.int_inclusive(range.min, range.max) as usize).min(vocab.len());
    let mut pool: Vec<usize> = (0..vocab.len()).collect();
    for i in 0..count {
        let j = i + rng.index(pool.len() - i);
        pool.swap(i, j);
    }
    pool[..count].iter().map(|&i| vocab[i].clone()).collect()
}

/// Per-user base vector. In log-normal mode the non-ignore mass is scaled by
/// `exp(N(0, sigma))`, capped at 1, and the ignore share takes the rest.
pub fn user_base(cfg: &ScenarioConfig, rng: &mut RngStream) -> Vec<f64> {
    let base = &cfg.base.vector;
    match cfg.base.mode {
        BaseMode::Fixed => base.clone(),
        BaseMode::LogNormal { sigma } => {
            let factor = LogNormal::new(0.0, sigma)
                .expect("sigma validated")
                .sample(rng.rng_mut());
            let mass: f64 = base[1..].iter().sum();
            if mass <= 0.0 {
                return base.clone();
            }
            let scaled = (mass * factor).min(1.0);
            let mut out: Vec<f64> = base.iter().map(|p| p * scaled / mass).collect();
            out[0] = (1.0 - out[1..].iter().sum::<f64>()).max(0.0);
            out
        }
    }
}

/// Draws interests and base probabilities for every user.
pub fn build_population(cfg: &ScenarioConfig, rng: &mut RngStream) -> Vec<UserProfile> {
    (0..cfg.user_count)
        .map(|id| {
            let interests = pick_distinct(&cfg.keyword_vocabulary, cfg.interests_per_user, rng);
            let base = user_base(cfg, rng);
            UserProfile::new(id, interests, cfg.reaction_set.clone(), base)
                .expect("validated scenario yields valid users")
        })
        .collect()
}

/// Event address for the given policy.
pub fn sample_event_place(
    policy: PlacePolicy,
    area: &Area,
    center_weight: f64,
    rng: &mut RngStream,
) -> Position {
    let uniform = |rng: &mut RngStream| {
        Position::new(
            rng.uniform(0.0, area.width).expect("positive width"),
            rng.uniform(0.0, area.height).expect("positive height"),
        )
    };
    match policy {
        PlacePolicy::CityCenter if rng.bernoulli(center_weight) => {
            let c = area.center();
            let normal = Normal::new(0.0, 0.1 * area.min_dim()).expect("positive sigma");
            loop {
                let p = Position::new(
                    c.x + normal.sample(rng.rng_mut()),
                    c.y + normal.sample(rng.rng_mut()),
                );
                if area.contains(&p) {
                    return p;
                }
            }
        }
        _ => uniform(rng),
    }
}

/// `(start, end)` of an event announced at `not_before`, within `horizon`.
/// Durations are uniform on 1-4 h and truncated at the horizon.
pub fn sample_event_time(
    policy: TimePolicy,
    not_before: f64,
    horizon: f64,
    evening_weight: f64,
    rng: &mut RngStream,
) -> (SimTime, SimTime) {
    let latest = if horizon - not_before > MIN_EVENT {
        horizon - MIN_EVENT
    } else {
        not_before + (horizon - not_before) / 2.0
    };
    let uniform = |rng: &mut RngStream| rng.uniform(not_before, latest).expect("ordered window");
    let start = match policy {
        TimePolicy::EveningWeekend if rng.bernoulli(evening_weight) => {
            evening_start(not_before, latest, rng).unwrap_or_else(|| uniform(rng))
        }
        _ => uniform(rng),
    };
    let duration = rng
        .uniform(MIN_EVENT, MAX_EVENT)
        .expect("ordered durations");
    let end = (start + duration).min(horizon);
    (SimTime::from_secs(start), SimTime::from_secs(end))
}

// Start inside an 18:00-23:00 slot; day indices 5 and 6 of every week weigh double.
fn evening_start(lo: f64, hi: f64, rng: &mut RngStream) -> Option<f64> {
    let first = (lo / SECONDS_PER_DAY).floor() as u64;
    let last = (hi / SECONDS_PER_DAY).floor() as u64;
    let slots: Vec<(f64, f64, f64)> = (first..=last)
        .filter_map(|d| {
            let day = d as f64 * SECONDS_PER_DAY;
            let (a, b) = ((day + EVENING_START).max(lo), (day + EVENING_END).min(hi));
            let weight = if d % 7 >= 5 { 2.0 } else { 1.0 };
            (b > a).then_some((a, b, (b - a) * weight))
        })
        .collect();
    let total: f64 = slots.iter().map(|s| s.2).sum();
    if total <= 0.0 {
        return None;
    }
    let mut target = rng.unit() * total;
    for &(a, b, w) in &slots {
        if target < w {
            return Some(rng.uniform(a, b).expect("ordered slot"));
        }
        target -= w;
    }
    slots
        .last()
        .map(|&(a, b, _)| rng.uniform(a, b).expect("ordered slot"))
}

fn sample_popularity(cfg: &ScenarioConfig, rng: &mut RngStream) -> u8 {
    let bins = &cfg.popularity.bins;
    let mut target = rng.unit() * cfg.popularity.total();
    let chosen = bins
        .iter()
        .find(|b| {
            if target < b.prob {
                true
            } else {
                target -= b.prob;
                false
            }
        })
        .or_else(|| bins.iter().rev().find(|b| b.prob > 0.0))
        .expect("non-empty popularity distribution");
    rng.int_inclusive(u32::from(chosen.lo), u32::from(chosen.hi)) as u8
}

/// Homogeneous Poisson arrival times on `[0, horizon)` for one user.
pub fn poisson_arrivals(rate_per_s: f64, horizon: f64, rng: &mut RngStream) -> Vec<f64> {
    let exp = Exp::new(rate_per_s).expect("positive rate");
    let mut out = Vec::new();
    let mut t = exp.sample(rng.rng_mut());
    while t < horizon {
        out.push(t);
        t += exp.sample(rng.rng_mut());
    }
    out
}

/// Draws the complete message schedule for a validated scenario.
pub fn build_schedule(cfg: &ScenarioConfig, rng: &mut RngStream) -> InjectionSchedule {
    let horizon = cfg.run_horizon;
    let mut arrivals: Vec<(f64, usize)> = if cfg.single_emergency {
        let t = rng.uniform(0.0, horizon / 2.0).expect("positive horizon");
        vec![(t, rng.index(cfg.user_count))]
    } else {
        let rate = cfg.message_rate_per_user_per_day / SECONDS_PER_DAY;
        (0..cfg.user_count)
            .flat_map(|u| {
                poisson_arrivals(rate, horizon, rng)
                    .into_iter()
                    .map(move |t| (t, u))
            })
            .collect()
    };
    arrivals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let messages = arrivals
        .into_iter()
        .enumerate()
        .map(|(msg_id, (t, origin))| {
            let keywords = pick_distinct(&cfg.keyword_vocabulary, cfg.keywords_per_message, rng);
            let popularity = sample_popularity(cfg, rng);
            let mut draft = MessageDraft {
                msg_id,
                keywords,
                popularity: Some(popularity),
                event: None,
                danger: None,
                injection_time: SimTime::from_secs(t),
                origin_node: origin,
            };
            if let Some(radius) = cfg.danger_radius_m {
                let center = sample_event_place(
                    cfg.event_place_policy,
                    &cfg.area,
                    cfg.place_center_weight,
                    rng,
                );
                draft.danger = Some(DangerZone { center, radius });
            } else if cfg.event_time_policy != TimePolicy::None {
                let addr = sample_event_place(
                    cfg.event_place_policy,
                    &cfg.area,
                    cfg.place_center_weight,
                    rng,
                );
                let (start, end) = sample_event_time(
                    cfg.event_time_policy,
                    t,
                    horizon,
                    cfg.time_evening_weight,
                    rng,
                );
                draft.event = Some(EventWindow { start, end, addr });
            }
            Message::new(draft).expect("generated message is valid")
        })
        .collect();
    InjectionSchedule { entries: messages }
}
