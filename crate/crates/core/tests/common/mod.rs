#![allow(dead_code)]

use oppsim::generator::InjectionSchedule;
use oppsim::kernel::{RngStream, SimTime, StreamId};
use oppsim::mobility::{MobilityContext, MobilityState};
use oppsim::model::{
    builtin_scenario, Area, EventWindow, Message, MessageDraft, Position, ScenarioConfig,
    UserProfile,
};
use oppsim::reaction::precompute_all;
use oppsim::sim::{run_with_nodes, RunOptions, RunOutput};

pub fn t(s: f64) -> SimTime {
    SimTime::from_secs(s)
}

pub fn event_message(
    id: usize,
    origin: usize,
    inject: f64,
    window: (f64, f64),
    addr: Position,
    popularity: u8,
) -> Message {
    Message::new(MessageDraft {
        msg_id: id,
        keywords: Vec::new(),
        popularity: Some(popularity),
        event: Some(EventWindow {
            start: t(window.0),
            end: t(window.1),
            addr,
        }),
        danger: None,
        injection_time: t(inject),
        origin_node: origin,
    })
    .unwrap()
}

pub fn users(n: usize, cfg: &ScenarioConfig) -> Vec<UserProfile> {
    (0..n)
        .map(|i| {
            UserProfile::new(
                i,
                Vec::<String>::new(),
                cfg.reaction_set.clone(),
                cfg.base.vector.clone(),
            )
            .unwrap()
        })
        .collect()
}

/// A small event scenario on `area` with the city-event reactions.
pub fn small_scenario(n: usize, area: Area, horizon: f64) -> ScenarioConfig {
    let mut cfg = builtin_scenario("city-events").unwrap();
    cfg.user_count = n;
    cfg.area = area;
    cfg.run_horizon = horizon;
    cfg
}

pub struct Node {
    pub home: Position,
    /// `Some(t)` parks the node until `t`; `None` lets it roam.
    pub hold: Option<f64>,
}

/// Runs a hand-built scenario: explicit node placement and message list.
pub fn run_constructed(
    cfg: &ScenarioConfig,
    nodes: &[Node],
    messages: Vec<Message>,
    setup: impl Fn(usize, &mut MobilityState),
    opts: RunOptions,
) -> RunOutput {
    let users = users(nodes.len(), cfg);
    let schedule = InjectionSchedule::from_messages(messages);
    let table = precompute_all(
        &users,
        schedule.messages(),
        cfg.visit_probability,
        &mut RngStream::new(cfg.master_seed, StreamId::Precompute),
    );
    let ctx = MobilityContext::new(cfg.area, cfg.mobility);
    let mut rngs: Vec<RngStream> = (0..nodes.len())
        .map(|i| RngStream::new(cfg.master_seed, StreamId::Mobility(i)))
        .collect();
    let states = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| {
            let mut s = MobilityState::new(i, n.home, &ctx.grid);
            match n.hold {
                Some(until) => s.hold_until(until),
                None => s.start(&ctx, &mut rngs[i]),
            }
            setup(i, &mut s);
            s
        })
        .collect();
    run_with_nodes(cfg, users, schedule, table, states, rngs, opts)
}
