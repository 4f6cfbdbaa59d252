//! SWIM destination choice with reactive overrides.
//!
//! Nodes move piecewise-linearly between waypoints. In normal operation a
//! node walks to a SWIM-chosen destination, waits for a truncated power-law
//! time and picks the next one. The behavior layer can override this with
//! an immediate flee out of a danger zone or a scheduled trip to an event.

use std::collections::VecDeque;
use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kernel::RngStream;
use crate::model::{Area, DangerZone, Position, UserId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FleePolicy {
    /// Straight out along the ray from the danger center.
    Radial,
    /// Resample SWIM destinations until one lies outside the zone.
    SwimOutside,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilityParams {
    pub speed_mps: f64,
    pub flee_speed_mps: f64,
    /// Weight of distance-from-home against location popularity.
    pub alpha: f64,
    pub cell_size_m: f64,
    pub wait_min_s: f64,
    pub wait_max_s: f64,
    pub wait_slope: f64,
    /// Fractional overshoot beyond the danger radius when fleeing.
    pub flee_margin: f64,
    pub flee_policy: FleePolicy,
}

impl Default for MobilityParams {
    fn default() -> Self {
        MobilityParams {
            speed_mps: 1.4,
            flee_speed_mps: 3.0,
            alpha: 0.7,
            cell_size_m: 100.0,
            wait_min_s: 60.0,
            wait_max_s: 1800.0,
            wait_slope: 1.5,
            flee_margin: 0.1,
            flee_policy: FleePolicy::Radial,
        }
    }
}

/// Square cells tiling the area; cells on the far edges may be truncated.
#[derive(Debug, Clone, PartialEq)]
pub struct CellGrid {
    area: Area,
    cell: f64,
    nx: usize,
    ny: usize,
}

impl CellGrid {
    pub fn new(area: Area, cell: f64) -> Self {
        let nx = ((area.width / cell).ceil() as usize).max(1);
        let ny = ((area.height / cell).ceil() as usize).max(1);
        CellGrid { area, cell, nx, ny }
    }

    pub fn area(&self) -> Area {
        self.area
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_of(&self, p: &Position) -> usize {
        let cx = ((p.x / self.cell).floor().max(0.0) as usize).min(self.nx - 1);
        let cy = ((p.y / self.cell).floor().max(0.0) as usize).min(self.ny - 1);
        cy * self.nx + cx
    }

    /// `(x0, y0, x1, y1)` of a cell, clipped to the area.
    pub fn bounds(&self, cell: usize) -> (f64, f64, f64, f64) {
        let (cx, cy) = (cell % self.nx, cell / self.nx);
        let x0 = cx as f64 * self.cell;
        let y0 = cy as f64 * self.cell;
        (
            x0,
            y0,
            (x0 + self.cell).min(self.area.width),
            (y0 + self.cell).min(self.area.height),
        )
    }

    pub fn center(&self, cell: usize) -> Position {
        let (x0, y0, x1, y1) = self.bounds(cell);
        Position::new((x0 + x1) / 2.0, (y0 + y1) / 2.0)
    }
}

/// Grid and parameters shared by all nodes of a run.
#[derive(Debug, Clone)]
pub struct MobilityContext {
    pub grid: CellGrid,
    pub params: MobilityParams,
}

impl MobilityContext {
    pub fn new(area: Area, params: MobilityParams) -> Self {
        MobilityContext {
            grid: CellGrid::new(area, params.cell_size_m),
            params,
        }
    }

    pub fn area(&self) -> Area {
        self.grid.area
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Normal,
    Waiting,
    Fleeing,
    TravelingToEvent,
    AtEvent,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Normal => "normal",
            Mode::Waiting => "waiting",
            Mode::Fleeing => "fleeing",
            Mode::TravelingToEvent => "traveling_to_event",
            Mode::AtEvent => "at_event",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledVisit {
    pub addr: Position,
    pub start: f64,
    pub end: f64,
    /// Planned from the position at command time; the node actually leaves
    /// at [`MobilityState::next_departure`].
    pub departure: f64,
}

impl ScheduledVisit {
    fn overlaps(&self, start: f64, end: f64) -> bool {
        self.start < end && start < self.end
    }
}

/// One waypoint or mode change, as written to the trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub time: f64,
    pub node_id: UserId,
    pub position: Position,
    pub mode: Mode,
}

#[derive(Debug, Clone)]
pub struct MobilityState {
    pub node_id: UserId,
    pub position: Position,
    pub mode: Mode,
    pub home: Position,
    /// Per-cell visitation popularity.
    pub seen_counts: Vec<f64>,
    /// Sorted by departure time.
    pub visit_queue: Vec<ScheduledVisit>,
    clock: f64,
    target: Position,
    wait_until: f64,
    flee_path: VecDeque<Position>,
    active_visit: Option<ScheduledVisit>,
    known_dangers: Vec<DangerZone>,
    trace: Vec<TracePoint>,
}

impl MobilityState {
    /// A node at `home`, idle until [`MobilityState::start`] picks its first destination.
    pub fn new(node_id: UserId, home: Position, grid: &CellGrid) -> Self {
        MobilityState {
            node_id,
            position: home,
            mode: Mode::Waiting,
            home,
            seen_counts: vec![0.0; grid.len()],
            visit_queue: Vec::new(),
            clock: 0.0,
            target: home,
            wait_until: 0.0,
            flee_path: VecDeque::new(),
            active_visit: None,
            known_dangers: Vec::new(),
            trace: Vec::new(),
        }
    }

    pub fn start(&mut self, ctx: &MobilityContext, rng: &mut RngStream) {
        self.record();
        self.begin_swim_leg(ctx, rng);
    }

    /// Parks the node where it stands until `t`; scheduled visits still depart on time.
    pub fn hold_until(&mut self, t: f64) {
        self.mode = Mode::Waiting;
        self.target = self.position;
        self.wait_until = t;
    }

    /// Time up to which the position is current.
    pub fn clock(&self) -> f64 {
        self.clock
    }

    pub fn target(&self) -> Position {
        self.target
    }

    pub fn active_visit(&self) -> Option<&ScheduledVisit> {
        self.active_visit.as_ref()
    }

    pub fn known_dangers(&self) -> &[DangerZone] {
        &self.known_dangers
    }

    /// Drains the trace points recorded since the last call.
    pub fn take_trace(&mut self) -> Vec<TracePoint> {
        std::mem::take(&mut self.trace)
    }

    fn record(&mut self) {
        self.trace.push(TracePoint {
            time: self.clock,
            node_id: self.node_id,
            position: self.position,
            mode: self.mode,
        });
    }

    /// Credits the current cell with `neighbors` observed contacts.
    pub fn observe_neighbors(&mut self, grid: &CellGrid, neighbors: usize) {
        if neighbors > 0 {
            let c = grid.cell_of(&self.position);
            self.seen_counts[c] += neighbors as f64;
        }
    }

    fn speed(&self, params: &MobilityParams) -> f64 {
        match self.mode {
            Mode::Fleeing => params.flee_speed_mps,
            _ => params.speed_mps,
        }
    }

    /// When the first queued visit must leave: the latest time from which the
    /// node, continuing its current activity until then, still reaches the
    /// address by the visit start. Never earlier than the clock.
    pub fn next_departure(&self, params: &MobilityParams) -> Option<f64> {
        if !matches!(self.mode, Mode::Normal | Mode::Waiting) {
            return None;
        }
        let visit = self.visit_queue.first()?;
        let v = params.speed_mps;
        let (wx, wy) = (
            self.position.x - visit.addr.x,
            self.position.y - visit.addr.y,
        );
        let w = wx.hypot(wy);
        let budget = (visit.start - self.clock) * v;
        if budget <= w {
            return Some(self.clock);
        }
        let leg = self.position.distance(&self.target);
        if self.mode == Mode::Waiting || leg == 0.0 {
            return Some(self.clock + (budget - w) / v);
        }
        // Walked distance s along the leg where s + |w + s*u| equals the budget.
        let (ux, uy) = (
            (self.target.x - self.position.x) / leg,
            (self.target.y - self.position.y) / leg,
        );
        let wu = wx * ux + wy * uy;
        let s = (budget * budget - w * w) / (2.0 * (budget + wu));
        // Past the end of the leg the arrival transition re-evaluates.
        (s <= leg).then(|| self.clock + s / v)
    }

    /// Absolute time of the next waypoint arrival, wait expiry or departure.
    pub fn next_transition_time(&self, params: &MobilityParams) -> f64 {
        let own = match self.mode {
            Mode::Normal | Mode::Fleeing | Mode::TravelingToEvent => {
                self.clock + self.position.distance(&self.target) / self.speed(params)
            }
            Mode::Waiting | Mode::AtEvent => self.wait_until,
        };
        match self.next_departure(params) {
            Some(d) => own.min(d.max(self.clock)),
            None => own,
        }
    }

    fn begin_swim_leg(&mut self, ctx: &MobilityContext, rng: &mut RngStream) {
        let (_, dest) = self.avoiding_destination(ctx, rng);
        self.target = dest;
        self.mode = Mode::Normal;
    }

    // SWIM pick that keeps clear of known danger zones; stays put if none is found.
    fn avoiding_destination(
        &self,
        ctx: &MobilityContext,
        rng: &mut RngStream,
    ) -> (usize, Position) {
        const TRIES: usize = 64;
        let mut pick = next_destination(self, ctx, rng);
        if self.known_dangers.is_empty() {
            return pick;
        }
        for _ in 0..TRIES {
            let clear = self
                .known_dangers
                .iter()
                .all(|z| segment_distance(&z.center, &self.position, &pick.1) > z.radius);
            if clear {
                return pick;
            }
            pick = next_destination(self, ctx, rng);
        }
        (ctx.grid.cell_of(&self.position), self.position)
    }

    fn start_due_visit(&mut self, params: &MobilityParams) -> bool {
        let due = self.next_departure(params).is_some_and(|d| d <= self.clock);
        if !due {
            return false;
        }
        let visit = self.visit_queue.remove(0);
        if self.clock >= visit.end {
            return true;
        }
        self.active_visit = Some(visit);
        self.target = visit.addr;
        self.mode = Mode::TravelingToEvent;
        self.record();
        true
    }

    fn on_arrival(&mut self, ctx: &MobilityContext, rng: &mut RngStream) {
        match self.mode {
            Mode::Normal => {
                self.mode = Mode::Waiting;
                self.wait_until = self.clock + sample_wait(&ctx.params, rng);
            }
            Mode::Fleeing => {
                if let Some(next) = self.flee_path.pop_front() {
                    self.target = next;
                    self.record();
                    return;
                }
                self.begin_swim_leg(ctx, rng);
            }
            Mode::TravelingToEvent => match self.active_visit {
                Some(v) if self.clock < v.end => {
                    self.mode = Mode::AtEvent;
                    self.wait_until = v.end;
                }
                _ => {
                    self.active_visit = None;
                    self.begin_swim_leg(ctx, rng);
                }
            },
            Mode::Waiting | Mode::AtEvent => {}
        }
        self.record();
    }
}

/// Draws a SWIM destination: a cell with probability proportional to
/// `alpha * (1 / (1 + d / cell_size))^2 + (1 - alpha) * seen_share`, where `d`
/// is the distance from home to the cell center, then a uniform point in it.
pub fn next_destination(
    state: &MobilityState,
    ctx: &MobilityContext,
    rng: &mut RngStream,
) -> (usize, Position) {
    let weights = swim_weights(state, ctx);
    let total: f64 = weights.iter().sum();
    let cell = if total > 0.0 {
        let target = rng.unit() * total;
        let mut acc = 0.0;
        let mut chosen = weights.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            acc += w;
            if target < acc {
                chosen = i;
                break;
            }
        }
        chosen
    } else {
        rng.index(weights.len())
    };
    let (x0, y0, x1, y1) = ctx.grid.bounds(cell);
    let x = rng.uniform(x0, x1).expect("cell bounds ordered");
    let y = rng.uniform(y0, y1).expect("cell bounds ordered");
    (cell, Position::new(x, y))
}

/// Unnormalized per-cell SWIM weights for `state`.
pub fn swim_weights(state: &MobilityState, ctx: &MobilityContext) -> Vec<f64> {
    let alpha = ctx.params.alpha;
    let d0 = ctx.grid.cell_size();
    let seen_total: f64 = state.seen_counts.iter().sum();
    (0..ctx.grid.len())
        .map(|c| {
            let d = state.home.distance(&ctx.grid.center(c));
            let near = (1.0 / (1.0 + d / d0)).powi(2);
            let seen = if seen_total > 0.0 {
                state.seen_counts[c] / seen_total
            } else {
                0.0
            };
            alpha * near + (1.0 - alpha) * seen
        })
        .collect()
}

/// Truncated power-law wait on `[wait_min_s, wait_max_s]` with density ∝ t^-slope.
pub fn sample_wait(params: &MobilityParams, rng: &mut RngStream) -> f64 {
    let (a, b, s) = (params.wait_min_s, params.wait_max_s, params.wait_slope);
    let e = 1.0 - s;
    let u = rng.unit();
    let v = a.powf(e) - u * (a.powf(e) - b.powf(e));
    v.powf(1.0 / e).clamp(a, b)
}

/// Distance from `p` to the segment `a`-`b`.
pub fn segment_distance(p: &Position, a: &Position, b: &Position) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(&Position::new(a.x + t * dx, a.y + t * dy))
}

/// Moves the node forward by `dt` seconds, processing every waypoint arrival,
/// wait expiry and visit departure inside the interval.
pub fn advance(
    state: &mut MobilityState,
    dt: f64,
    ctx: &MobilityContext,
    rng: &mut RngStream,
) -> Position {
    let end = state.clock + dt.max(0.0);
    // Bounded: each pass either consumes time or performs a transition.
    for _ in 0..1_000_000 {
        if state.start_due_visit(&ctx.params) {
            continue;
        }
        let departure = state.next_departure(&ctx.params);
        let limit = departure.map_or(end, |d| d.min(end));
        match state.mode {
            Mode::Normal | Mode::Fleeing | Mode::TravelingToEvent => {
                let dist = state.position.distance(&state.target);
                let arrival = state.clock + dist / state.speed(&ctx.params);
                if arrival <= limit {
                    state.position = state.target;
                    state.clock = arrival;
                    state.on_arrival(ctx, rng);
                    continue;
                }
                let step = (limit - state.clock) * state.speed(&ctx.params);
                if step > 0.0 && dist > 0.0 {
                    let f = step / dist;
                    let p = Position::new(
                        state.position.x + (state.target.x - state.position.x) * f,
                        state.position.y + (state.target.y - state.position.y) * f,
                    );
                    state.position = ctx.area().clamp(p);
                }
                state.clock = limit;
            }
            Mode::Waiting | Mode::AtEvent => {
                if state.wait_until <= limit {
                    state.clock = state.clock.max(state.wait_until);
                    if state.mode == Mode::AtEvent {
                        state.active_visit = None;
                    }
                    state.begin_swim_leg(ctx, rng);
                    state.record();
                    continue;
                }
                state.clock = limit;
            }
        }
        if state.clock >= end {
            break;
        }
    }
    state.clock = end;
    state.position
}

/// Waypoints of a radial escape: out along the ray from the danger center
/// through `pos` to `radius * (1 + margin)`. If the area boundary cuts the ray
/// short inside the zone, the path continues along the boundary until it is
/// clear of the margin (or at least of the radius).
pub fn radial_escape(
    pos: Position,
    zone: &DangerZone,
    margin: f64,
    area: &Area,
    rng: &mut RngStream,
) -> Vec<Position> {
    let goal = zone.radius * (1.0 + margin);
    let (mut dx, mut dy) = (pos.x - zone.center.x, pos.y - zone.center.y);
    let r = dx.hypot(dy);
    if r < 1e-9 {
        let theta = rng.unit() * TAU;
        dx = theta.cos();
        dy = theta.sin();
    } else {
        dx /= r;
        dy /= r;
    }
    let wanted = (goal - r.min(goal)).max(0.0);
    let exit = ray_exit(&pos, dx, dy, area);
    let first = area.clamp(Position::new(
        pos.x + dx * wanted.min(exit),
        pos.y + dy * wanted.min(exit),
    ));
    if first.distance(&zone.center) > zone.radius {
        return vec![first];
    }
    let mut path = vec![first];
    path.extend(boundary_walk(first, zone, goal, area));
    path
}

// Distance along (dx, dy) from `p` to the area boundary.
fn ray_exit(p: &Position, dx: f64, dy: f64, area: &Area) -> f64 {
    let mut t = f64::INFINITY;
    if dx > 0.0 {
        t = t.min((area.width - p.x) / dx);
    } else if dx < 0.0 {
        t = t.min(-p.x / dx);
    }
    if dy > 0.0 {
        t = t.min((area.height - p.y) / dy);
    } else if dy < 0.0 {
        t = t.min(-p.y / dy);
    }
    t.max(0.0)
}

fn perimeter(area: &Area) -> f64 {
    2.0 * (area.width + area.height)
}

fn perimeter_point(s: f64, area: &Area) -> Position {
    let (w, h) = (area.width, area.height);
    let s = s.rem_euclid(perimeter(area));
    if s < w {
        Position::new(s, 0.0)
    } else if s < w + h {
        Position::new(w, s - w)
    } else if s < 2.0 * w + h {
        Position::new(w - (s - w - h), h)
    } else {
        Position::new(0.0, h - (s - 2.0 * w - h))
    }
}

fn perimeter_param(p: &Position, area: &Area) -> f64 {
    let (w, h) = (area.width, area.height);
    let candidates = [
        (p.y, p.x),
        (w - p.x, w + p.y),
        (h - p.y, w + h + (w - p.x)),
        (p.x, 2.0 * w + h + (h - p.y)),
    ];
    candidates
        .iter()
        .min_by(|a, b| a.0.abs().total_cmp(&b.0.abs()))
        .map(|c| c.1)
        .unwrap_or(0.0)
}

// Walks the boundary both ways from `from` in 1 m steps and returns the
// corners plus the first point at distance >= goal on the shorter side.
fn boundary_walk(from: Position, zone: &DangerZone, goal: f64, area: &Area) -> Vec<Position> {
    let per = perimeter(area);
    let s0 = perimeter_param(&from, area);
    let steps = per.ceil() as usize;
    let corners = [
        0.0,
        area.width,
        area.width + area.height,
        2.0 * area.width + area.height,
    ];

    let find = |threshold: f64| -> Option<(f64, f64)> {
        for k in 1..=steps {
            for dir in [1.0, -1.0] {
                let s = s0 + dir * k as f64;
                if perimeter_point(s, area).distance(&zone.center) >= threshold {
                    return Some((dir, k as f64));
                }
            }
        }
        None
    };
    let (dir, dist) = find(goal)
        .or_else(|| find(zone.radius + 1e-6))
        .unwrap_or_else(|| {
            // Zone covers the whole boundary: head for the farthest corner.
            let far = corners
                .iter()
                .copied()
                .max_by(|a, b| {
                    perimeter_point(*a, area)
                        .distance(&zone.center)
                        .total_cmp(&perimeter_point(*b, area).distance(&zone.center))
                })
                .unwrap_or(0.0);
            let fwd = (far - s0).rem_euclid(per);
            if fwd <= per / 2.0 {
                (1.0, fwd)
            } else {
                (-1.0, per - fwd)
            }
        });

    let mut out = Vec::new();
    let mut crossed: Vec<f64> = corners
        .iter()
        .map(|c| {
            if dir > 0.0 {
                (c - s0).rem_euclid(per)
            } else {
                (s0 - c).rem_euclid(per)
            }
        })
        .filter(|off| *off > 1e-9 && *off < dist)
        .collect();
    crossed.sort_by(|a, b| a.total_cmp(b));
    for off in crossed {
        out.push(perimeter_point(s0 + dir * off, area));
    }
    out.push(perimeter_point(s0 + dir * dist, area));
    out
}

/// Overrides the node's movement with an escape from `zone`. The node must
/// already be advanced to `now`. Any active event visit is abandoned and
/// queued visits to places inside the zone are dropped.
pub fn command_flee(
    state: &mut MobilityState,
    zone: DangerZone,
    now: f64,
    ctx: &MobilityContext,
    rng: &mut RngStream,
) {
    debug_assert!((state.clock - now).abs() < 1e-6);
    state.clock = now;
    state.active_visit = None;
    state.visit_queue.retain(|v| !zone.contains(&v.addr));
    if !state.known_dangers.contains(&zone) {
        state.known_dangers.push(zone);
    }
    let params = &ctx.params;
    let mut path: VecDeque<Position> = match params.flee_policy {
        FleePolicy::Radial => {
            radial_escape(state.position, &zone, params.flee_margin, &ctx.area(), rng).into()
        }
        FleePolicy::SwimOutside => {
            let mut found = None;
            for _ in 0..256 {
                let (_, p) = next_destination(state, ctx, rng);
                if p.distance(&zone.center) > zone.radius {
                    found = Some(p);
                    break;
                }
            }
            match found {
                Some(p) => VecDeque::from([p]),
                None => radial_escape(state.position, &zone, params.flee_margin, &ctx.area(), rng)
                    .into(),
            }
        }
    };
    state.target = path.pop_front().unwrap_or(state.position);
    state.flee_path = path;
    state.mode = Mode::Fleeing;
    state.record();
}

/// Makes a node aware of a danger zone it is not inside: it stops heading
/// through the zone and drops planned visits to places inside it.
pub fn learn_danger(
    state: &mut MobilityState,
    zone: DangerZone,
    ctx: &MobilityContext,
    rng: &mut RngStream,
) {
    if state.known_dangers.contains(&zone) {
        return;
    }
    state.known_dangers.push(zone);
    state.visit_queue.retain(|v| !zone.contains(&v.addr));
    if state.mode == Mode::Normal
        && segment_distance(&zone.center, &state.position, &state.target) <= zone.radius
    {
        state.begin_swim_leg(ctx, rng);
        state.record();
    }
}

/// Queues a trip to `addr` for the event window `[start, end]`. Departure is
/// planned from the current position; the visit is rejected when even an
/// immediate departure would arrive after `end`, or when it overlaps a visit
/// that is already accepted.
pub fn command_visit(
    state: &mut MobilityState,
    addr: Position,
    start: f64,
    end: f64,
    now: f64,
    params: &MobilityParams,
) -> bool {
    if !(start < end) {
        return false;
    }
    let travel = state.position.distance(&addr) / params.speed_mps;
    let departure = (start - travel).max(now);
    if departure + travel > end {
        return false;
    }
    let conflict = state
        .visit_queue
        .iter()
        .chain(state.active_visit.iter())
        .any(|v| v.overlaps(start, end));
    if conflict {
        return false;
    }
    let visit = ScheduledVisit {
        addr,
        start,
        end,
        departure,
    };
    let at = state
        .visit_queue
        .partition_point(|v| v.departure <= departure);
    state.visit_queue.insert(at, visit);
    true
}
