//! One simulation run: population, schedule, reaction table, then the event loop.

use std::io::{self, Write};

use crate::dissemination::{scan_contacts, scan_contacts_brute, Delivery, Dissemination};
use crate::generator::{build_population, build_schedule, InjectionSchedule};
use crate::kernel::{EventQueue, RngStream, ScheduledEvent, SimTime, StreamId};
use crate::metrics::{MetricsCollector, MetricsOptions, SummaryReport};
use crate::mobility::{
    advance, command_flee, command_visit, learn_danger, MobilityContext, MobilityState, Mode,
    TracePoint,
};
use crate::model::{
    validate_scenario, Message, MsgId, Position, ScenarioConfig, UserId, UserProfile, Violation,
};
use crate::reaction::{on_receive, precompute_all, Directive, ReactionOutcome, ReactionTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Event {
    Injection(usize),
    ContactScan(u64),
    Waypoint { node: UserId, epoch: u64 },
    VisitDeparture { node: UserId, epoch: u64 },
    MetricsFlush,
}

impl Event {
    pub fn kind(&self) -> &'static str {
        match self {
            Event::Injection(_) => "injection",
            Event::ContactScan(_) => "contact-scan",
            Event::Waypoint { .. } => "mobility-waypoint",
            Event::VisitDeparture { .. } => "scheduled-visit-departure",
            Event::MetricsFlush => "metrics-flush",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchRecord {
    pub time: f64,
    pub sequence: u64,
    pub event: Event,
}

/// A visit directive and whether mobility accepted it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisitDecision {
    pub user_id: UserId,
    pub msg_id: MsgId,
    pub time: f64,
    pub addr: Position,
    pub start: f64,
    pub end: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub record_trace: bool,
    pub record_dispatch: bool,
    /// Compare the indexed contact scan with brute force on every tick.
    pub check_contacts: bool,
    pub metrics: MetricsOptions,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ContactCheck {
    pub ticks: u64,
    pub mismatches: u64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub seed: u64,
    pub users: Vec<UserProfile>,
    pub schedule: InjectionSchedule,
    pub table: ReactionTable,
    pub deliveries: Vec<Delivery>,
    pub outcomes: Vec<ReactionOutcome>,
    pub visits: Vec<VisitDecision>,
    pub trace: Vec<TracePoint>,
    pub dispatch_log: Vec<DispatchRecord>,
    pub final_positions: Vec<Position>,
    pub final_modes: Vec<Mode>,
    pub contact_check: ContactCheck,
    pub dispatched: u64,
    pub summary: SummaryReport,
}

impl RunOutput {
    /// Reception log CSV: `time,msg_id,to_node,from_node,was_duplicate`.
    pub fn write_events_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,msg_id,to_node,from_node,was_duplicate")?;
        for d in &self.deliveries {
            writeln!(
                w,
                "{},{},{},{},{}",
                d.time,
                d.msg_id,
                d.to_node,
                d.from_node,
                u8::from(d.was_duplicate)
            )?;
        }
        Ok(())
    }

    /// Waypoint trace CSV: `time,node_id,x,y,mode`.
    pub fn write_trace_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,node_id,x,y,mode")?;
        for p in &self.trace {
            writeln!(
                w,
                "{},{},{},{},{}",
                p.time, p.node_id, p.position.x, p.position.y, p.mode
            )?;
        }
        Ok(())
    }

    pub fn message(&self, msg: MsgId) -> &Message {
        &self.schedule.messages()[msg]
    }
}

struct World<'a> {
    cfg: &'a ScenarioConfig,
    opts: RunOptions,
    ctx: MobilityContext,
    users: Vec<UserProfile>,
    schedule: InjectionSchedule,
    table: ReactionTable,
    nodes: Vec<MobilityState>,
    rngs: Vec<RngStream>,
    epochs: Vec<u64>,
    net: Dissemination,
    collector: MetricsCollector,
    deliveries: Vec<Delivery>,
    outcomes: Vec<ReactionOutcome>,
    visits: Vec<VisitDecision>,
    trace: Vec<TracePoint>,
    dispatch_log: Vec<DispatchRecord>,
    contact_check: ContactCheck,
    horizon: SimTime,
}

impl World<'_> {
    fn sync_node(&mut self, node: UserId, now: f64) {
        // dt == 0 still settles transitions that fall due exactly now.
        let dt = (now - self.nodes[node].clock()).max(0.0);
        advance(&mut self.nodes[node], dt, &self.ctx, &mut self.rngs[node]);
        self.drain_trace(node);
    }

    fn drain_trace(&mut self, node: UserId) {
        let points = self.nodes[node].take_trace();
        if self.opts.record_trace {
            self.trace.extend(points);
        }
    }

    fn reschedule(&mut self, queue: &mut EventQueue<Event>, node: UserId) {
        self.epochs[node] += 1;
        let epoch = self.epochs[node];
        let state = &self.nodes[node];
        let t = state
            .next_transition_time(&self.ctx.params)
            .max(queue.now().secs());
        if t > self.horizon.secs() {
            return;
        }
        let departing = state
            .next_departure(&self.ctx.params)
            .is_some_and(|d| d <= t);
        let event = if departing {
            Event::VisitDeparture { node, epoch }
        } else {
            Event::Waypoint { node, epoch }
        };
        queue
            .schedule(SimTime::from_secs(t), event)
            .expect("transition lies in the future");
    }

    fn record_delivery(&mut self, d: Delivery) {
        self.collector.on_delivery(&d);
        self.deliveries.push(d);
    }

    // First reception: react, then hand any directive to mobility.
    fn react(&mut self, queue: &mut EventQueue<Event>, user: UserId, msg: MsgId, now: SimTime) {
        let message = &self.schedule.messages()[msg];
        let position = self.nodes[user].position;
        let outcome = on_receive(&self.users[user], message, now, position, &self.table)
            .expect("table covers all pairs");
        self.collector.on_outcome(&outcome);
        self.outcomes.push(outcome);
        let t = now.secs();
        match outcome.directive {
            Directive::Flee(zone) => {
                command_flee(
                    &mut self.nodes[user],
                    zone,
                    t,
                    &self.ctx,
                    &mut self.rngs[user],
                );
            }
            Directive::Visit(ev) => {
                let accepted = command_visit(
                    &mut self.nodes[user],
                    ev.addr,
                    ev.start.secs(),
                    ev.end.secs(),
                    t,
                    &self.ctx.params,
                );
                self.visits.push(VisitDecision {
                    user_id: user,
                    msg_id: msg,
                    time: t,
                    addr: ev.addr,
                    start: ev.start.secs(),
                    end: ev.end.secs(),
                    accepted,
                });
            }
            Directive::None => {
                if let Some(zone) = message.danger() {
                    learn_danger(
                        &mut self.nodes[user],
                        *zone,
                        &self.ctx,
                        &mut self.rngs[user],
                    );
                }
            }
        }
        self.drain_trace(user);
        self.reschedule(queue, user);
    }

    fn handle(&mut self, queue: &mut EventQueue<Event>, ev: ScheduledEvent<Event>) {
        let now = ev.fire_time;
        if self.opts.record_dispatch {
            self.dispatch_log.push(DispatchRecord {
                time: now.secs(),
                sequence: ev.sequence,
                event: ev.payload,
            });
        }
        match ev.payload {
            Event::Injection(i) => {
                let (msg_id, origin) = {
                    let m = &self.schedule.messages()[i];
                    (m.msg_id(), m.origin_node())
                };
                self.sync_node(origin, now.secs());
                let d = self
                    .net
                    .inject(msg_id, origin, now)
                    .expect("each message is injected once");
                self.record_delivery(d);
                self.react(queue, origin, msg_id, now);
            }
            Event::ContactScan(k) => {
                for n in 0..self.nodes.len() {
                    self.sync_node(n, now.secs());
                }
                let positions: Vec<Position> = self.nodes.iter().map(|n| n.position).collect();
                let pairs = scan_contacts(&positions, self.cfg.contact_radius_m, &self.cfg.area);
                if self.opts.check_contacts {
                    self.contact_check.ticks += 1;
                    if pairs != scan_contacts_brute(&positions, self.cfg.contact_radius_m) {
                        self.contact_check.mismatches += 1;
                    }
                }
                let mut degree = vec![0usize; self.nodes.len()];
                for &(a, b) in &pairs {
                    degree[a] += 1;
                    degree[b] += 1;
                }
                for (n, d) in degree.into_iter().enumerate() {
                    self.nodes[n].observe_neighbors(&self.ctx.grid, d);
                }
                for d in self.net.tick(&pairs, now) {
                    self.record_delivery(d);
                    if !d.was_duplicate {
                        self.react(queue, d.to_node, d.msg_id, now);
                    }
                }
                let next = (k + 1) as f64 * self.cfg.contact_scan_interval_s;
                if next <= self.horizon.secs() {
                    queue
                        .schedule(SimTime::from_secs(next), Event::ContactScan(k + 1))
                        .expect("next scan is in the future");
                }
            }
            Event::Waypoint { node, epoch } | Event::VisitDeparture { node, epoch } => {
                if epoch == self.epochs[node] {
                    self.sync_node(node, now.secs());
                    self.reschedule(queue, node);
                }
            }
            Event::MetricsFlush => {
                for n in 0..self.nodes.len() {
                    self.sync_node(n, now.secs());
                }
            }
        }
    }
}

/// Runs `cfg` with `cfg.master_seed`. Fails only on scenario validation.
pub fn run(cfg: &ScenarioConfig, opts: RunOptions) -> Result<RunOutput, Vec<Violation>> {
    let violations = validate_scenario(cfg);
    if !violations.is_empty() {
        return Err(violations);
    }
    let seed = cfg.master_seed;
    let users = build_population(cfg, &mut RngStream::new(seed, StreamId::Population));
    let schedule = build_schedule(cfg, &mut RngStream::new(seed, StreamId::Generator));
    Ok(run_prepared(cfg, users, schedule, opts))
}

/// Runs a validated scenario with an explicit population and schedule.
pub fn run_prepared(
    cfg: &ScenarioConfig,
    users: Vec<UserProfile>,
    schedule: InjectionSchedule,
    opts: RunOptions,
) -> RunOutput {
    let seed = cfg.master_seed;
    let n = users.len();
    let table = precompute_all(
        &users,
        schedule.messages(),
        cfg.visit_probability,
        &mut RngStream::new(seed, StreamId::Precompute),
    );
    let ctx = MobilityContext::new(cfg.area, cfg.mobility);
    let mut rngs: Vec<RngStream> = (0..n)
        .map(|i| RngStream::new(seed, StreamId::Mobility(i)))
        .collect();
    let nodes: Vec<MobilityState> = rngs
        .iter_mut()
        .enumerate()
        .map(|(i, rng)| {
            let home = Position::new(
                rng.uniform(0.0, cfg.area.width).expect("positive width"),
                rng.uniform(0.0, cfg.area.height).expect("positive height"),
            );
            let mut s = MobilityState::new(i, home, &ctx.grid);
            s.start(&ctx, rng);
            s
        })
        .collect();
    run_with_nodes(cfg, users, schedule, table, nodes, rngs, opts)
}

/// Lowest-level entry: every input supplied, including initial mobility states.
pub fn run_with_nodes(
    cfg: &ScenarioConfig,
    users: Vec<UserProfile>,
    schedule: InjectionSchedule,
    table: ReactionTable,
    nodes: Vec<MobilityState>,
    rngs: Vec<RngStream>,
    opts: RunOptions,
) -> RunOutput {
    let n = users.len();
    assert_eq!(nodes.len(), n);
    assert_eq!(rngs.len(), n);
    let horizon = cfg.horizon();
    let mut world = World {
        cfg,
        opts,
        ctx: MobilityContext::new(cfg.area, cfg.mobility),
        users,
        schedule,
        table,
        nodes,
        rngs,
        epochs: vec![0; n],
        net: Dissemination::new(n),
        collector: MetricsCollector::new(n),
        deliveries: Vec::new(),
        outcomes: Vec::new(),
        visits: Vec::new(),
        trace: Vec::new(),
        dispatch_log: Vec::new(),
        contact_check: ContactCheck::default(),
        horizon,
    };

    let mut queue = EventQueue::new();
    for (i, m) in world.schedule.messages().iter().enumerate() {
        if m.injection_time() <= horizon {
            queue
                .schedule(m.injection_time(), Event::Injection(i))
                .expect("injections are non-negative");
        }
    }
    queue
        .schedule(SimTime::ZERO, Event::ContactScan(0))
        .expect("t=0");
    for node in 0..n {
        world.drain_trace(node);
        world.reschedule(&mut queue, node);
    }
    queue
        .schedule(horizon, Event::MetricsFlush)
        .expect("horizon is non-negative");

    let dispatched = queue.run_until(horizon, |q, ev| world.handle(q, ev));

    let summary = world
        .collector
        .summarize(&world.schedule, &world.table, opts.metrics);
    RunOutput {
        seed: cfg.master_seed,
        final_positions: world.nodes.iter().map(|s| s.position).collect(),
        final_modes: world.nodes.iter().map(|s| s.mode).collect(),
        users: world.users,
        schedule: world.schedule,
        table: world.table,
        deliveries: world.deliveries,
        outcomes: world.outcomes,
        visits: world.visits,
        trace: world.trace,
        dispatch_log: world.dispatch_log,
        contact_check: world.contact_check,
        dispatched,
        summary,
    }
}
