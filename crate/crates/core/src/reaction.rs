//! Reaction draws and the per-reception behavior flow.
//!
//! The `[0, 100]` line is split into consecutive intervals, one per reaction,
//! with widths `100 * base[i]`, weakest on the left. A reaction is chosen by
//! a uniform draw on `[lb, 100]`: popularity and matching keywords raise the
//! lower bound `lb`, which removes weak reactions from the admissible range.

use std::collections::HashMap;
use std::io::{self, Write};

use thiserror::Error;

use crate::kernel::{RngStream, SimTime};
use crate::model::{
    matching_keywords, DangerZone, EventWindow, Message, MsgId, Position, UserId, UserProfile,
};

#[derive(Debug, Error, PartialEq)]
pub enum ReactionError {
    #[error("no precomputed reaction for user {user} and message {msg}")]
    UnknownPair { user: UserId, msg: MsgId },
}

/// `pop + 100 * k / l`, clamped to 100; the keyword term is 0 when `l == 0`.
pub fn bound_from_counts(popularity: f64, matching: usize, keywords: usize) -> f64 {
    let keyword_term = if keywords == 0 {
        0.0
    } else {
        100.0 * matching as f64 / keywords as f64
    };
    (popularity + keyword_term).min(100.0)
}

/// Lower bound of the reaction draw for `user` receiving `msg`.
pub fn lower_bound(msg: &Message, user: &UserProfile) -> f64 {
    bound_from_counts(
        msg.popularity() as f64,
        matching_keywords(user, msg),
        msg.keywords().len(),
    )
}

/// Right edges of the reaction intervals on `[0, 100]`; the last edge is exactly 100.
pub fn interval_edges(base: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut edges: Vec<f64> = base
        .iter()
        .map(|p| {
            acc += p;
            100.0 * acc
        })
        .collect();
    if let Some(last) = edges.last_mut() {
        *last = 100.0;
    }
    edges
}

/// Index of the interval containing `u`. Intervals are right-open except the last.
pub fn reaction_at(edges: &[f64], u: f64) -> usize {
    edges
        .iter()
        .position(|hi| u < *hi)
        .unwrap_or(edges.len() - 1)
}

/// Draws a reaction index from `base` with the admissible range cut to `[lb, 100]`.
pub fn draw_reaction(base: &[f64], lb: f64, rng: &mut RngStream) -> usize {
    let lb = lb.clamp(0.0, 100.0);
    let u = rng.uniform(lb, 100.0).expect("lb <= 100");
    reaction_at(&interval_edges(base), u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PrecomputedReaction {
    pub user_id: UserId,
    pub msg_id: MsgId,
    pub reaction_index: usize,
    /// Only drawn for event messages whose reaction is the strongest one.
    pub will_visit: Option<bool>,
}

const VISIT_UNSET: u8 = 2;

/// Reactions of every user to every message, fixed before the run starts.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionTable {
    user_count: usize,
    msg_ids: Vec<MsgId>,
    column: HashMap<MsgId, usize>,
    reactions: Vec<u8>,
    visits: Vec<u8>,
}

impl ReactionTable {
    pub fn user_count(&self) -> usize {
        self.user_count
    }

    pub fn message_count(&self) -> usize {
        self.msg_ids.len()
    }

    pub fn len(&self) -> usize {
        self.reactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reactions.is_empty()
    }

    pub fn get(&self, user: UserId, msg: MsgId) -> Option<PrecomputedReaction> {
        if user >= self.user_count {
            return None;
        }
        let col = *self.column.get(&msg)?;
        let i = col * self.user_count + user;
        Some(PrecomputedReaction {
            user_id: user,
            msg_id: msg,
            reaction_index: self.reactions[i] as usize,
            will_visit: match self.visits[i] {
                VISIT_UNSET => None,
                v => Some(v == 1),
            },
        })
    }

    /// All entries, message-major.
    pub fn iter(&self) -> impl Iterator<Item = PrecomputedReaction> + '_ {
        self.msg_ids.iter().flat_map(move |&m| {
            (0..self.user_count).map(move |u| self.get(u, m).expect("in range"))
        })
    }

    /// CSV dump: `user_id,msg_id,reaction_index,will_visit` (will_visit empty when undrawn).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "user_id,msg_id,reaction_index,will_visit")?;
        for r in self.iter() {
            let visit = match r.will_visit {
                None => "",
                Some(true) => "1",
                Some(false) => "0",
            };
            writeln!(
                w,
                "{},{},{},{}",
                r.user_id, r.msg_id, r.reaction_index, visit
            )?;
        }
        Ok(())
    }
}

/// Draws every user's reaction to every message. `users[i]` must have id `i`.
pub fn precompute_all(
    users: &[UserProfile],
    messages: &[Message],
    visit_probability: f64,
    rng: &mut RngStream,
) -> ReactionTable {
    let n = users.len();
    let mut reactions = Vec::with_capacity(n * messages.len());
    let mut visits = Vec::with_capacity(n * messages.len());
    for msg in messages {
        for (i, user) in users.iter().enumerate() {
            debug_assert_eq!(user.user_id(), i);
            let idx = draw_reaction(user.base(), lower_bound(msg, user), rng);
            let visit = if msg.event().is_some() && idx == user.reactions().strongest() {
                u8::from(rng.bernoulli(visit_probability))
            } else {
                VISIT_UNSET
            };
            reactions.push(u8::try_from(idx).expect("fewer than 256 reactions"));
            visits.push(visit);
        }
    }
    let msg_ids: Vec<MsgId> = messages.iter().map(Message::msg_id).collect();
    let column = msg_ids.iter().enumerate().map(|(c, m)| (*m, c)).collect();
    ReactionTable {
        user_count: n,
        msg_ids,
        column,
        reactions,
        visits,
    }
}

/// What the mobility layer is told to do after a reception.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Directive {
    None,
    Flee(DangerZone),
    Visit(EventWindow),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReactionOutcome {
    pub user_id: UserId,
    pub msg_id: MsgId,
    pub reception_time: SimTime,
    pub reaction_index: usize,
    /// Received after the event it announces had ended.
    pub angry: bool,
    pub directive: Directive,
}

/// Reaction to the first reception of `msg` by `user` at `now`, standing at `position`.
pub fn on_receive(
    user: &UserProfile,
    msg: &Message,
    now: SimTime,
    position: Position,
    table: &ReactionTable,
) -> Result<ReactionOutcome, ReactionError> {
    let pre = table
        .get(user.user_id(), msg.msg_id())
        .ok_or(ReactionError::UnknownPair {
            user: user.user_id(),
            msg: msg.msg_id(),
        })?;
    let mut outcome = ReactionOutcome {
        user_id: user.user_id(),
        msg_id: msg.msg_id(),
        reception_time: now,
        reaction_index: pre.reaction_index,
        angry: false,
        directive: Directive::None,
    };
    if msg.event_end().is_some_and(|end| now > end) {
        outcome.angry = true;
        outcome.reaction_index = 0;
        return Ok(outcome);
    }
    if let Some(zone) = msg.danger() {
        if zone.contains(&position) {
            outcome.directive = Directive::Flee(*zone);
        }
        return Ok(outcome);
    }
    if let Some(event) = msg.event() {
        if pre.reaction_index == user.reactions().strongest() && pre.will_visit == Some(true) {
            outcome.directive = Directive::Visit(*event);
        }
    }
    Ok(outcome)
}
