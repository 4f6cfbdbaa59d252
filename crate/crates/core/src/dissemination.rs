//! Epidemic anti-entropy exchange over proximity contacts.
//!
//! At the start of each contact tick every node advertises a summary vector
//! of the messages it holds. Each contact pair is then processed in ascending
//! `(min_id, max_id)` order, and each side sends everything it currently holds
//! that the peer did not advertise. With a single tick, a message can therefore
//! ride a relay chain, and a node with several holding neighbors receives
//! duplicates.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::kernel::SimTime;
use crate::model::{Area, MsgId, Position, UserId};

#[derive(Debug, Error, PartialEq)]
pub enum DisseminationError {
    #[error("message {msg} already injected at node {node}")]
    DuplicateInjection { msg: MsgId, node: UserId },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reception {
    pub msg_id: MsgId,
    pub time: SimTime,
    pub from_node: UserId,
    pub was_duplicate: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeBuffer {
    pub node_id: UserId,
    held: BTreeSet<MsgId>,
    log: Vec<Reception>,
}

impl NodeBuffer {
    pub fn new(node_id: UserId) -> Self {
        NodeBuffer {
            node_id,
            ..Default::default()
        }
    }

    pub fn held(&self) -> &BTreeSet<MsgId> {
        &self.held
    }

    pub fn holds(&self, msg: MsgId) -> bool {
        self.held.contains(&msg)
    }

    pub fn reception_log(&self) -> &[Reception] {
        &self.log
    }

    /// Logs a reception and returns whether it was new.
    fn receive(&mut self, msg: MsgId, from: UserId, now: SimTime) -> bool {
        let fresh = self.held.insert(msg);
        self.log.push(Reception {
            msg_id: msg,
            time: now,
            from_node: from,
            was_duplicate: !fresh,
        });
        fresh
    }
}

/// One transfer between two nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery {
    pub time: SimTime,
    pub msg_id: MsgId,
    pub to_node: UserId,
    pub from_node: UserId,
    pub was_duplicate: bool,
}

fn in_range(a: &Position, b: &Position, r2: f64) -> bool {
    let (dx, dy) = (a.x - b.x, a.y - b.y);
    dx * dx + dy * dy <= r2
}

/// All unordered pairs within `radius`, by exhaustive comparison. Sorted ascending.
pub fn scan_contacts_brute(positions: &[Position], radius: f64) -> Vec<(UserId, UserId)> {
    let r2 = radius * radius;
    let mut out = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            if in_range(&positions[i], &positions[j], r2) {
                out.push((i, j));
            }
        }
    }
    out
}

/// All unordered pairs within `radius`, via a uniform grid with cell size
/// `radius`. Output is identical to [`scan_contacts_brute`].
pub fn scan_contacts(positions: &[Position], radius: f64, area: &Area) -> Vec<(UserId, UserId)> {
    if positions.len() < 2 {
        return Vec::new();
    }
    let cell = radius.max(1e-9);
    let nx = (area.width / cell).floor() as usize + 1;
    let ny = (area.height / cell).floor() as usize + 1;
    let key = |p: &Position| {
        let cx = ((p.x / cell).floor().max(0.0) as usize).min(nx - 1);
        let cy = ((p.y / cell).floor().max(0.0) as usize).min(ny - 1);
        (cx, cy)
    };
    let mut buckets: Vec<Vec<UserId>> = vec![Vec::new(); nx * ny];
    for (i, p) in positions.iter().enumerate() {
        let (cx, cy) = key(p);
        buckets[cy * nx + cx].push(i);
    }
    let r2 = radius * radius;
    let mut out = Vec::new();
    for (i, p) in positions.iter().enumerate() {
        let (cx, cy) = key(p);
        for gy in cy.saturating_sub(1)..=(cy + 1).min(ny - 1) {
            for gx in cx.saturating_sub(1)..=(cx + 1).min(nx - 1) {
                for &j in &buckets[gy * nx + gx] {
                    if j > i && in_range(p, &positions[j], r2) {
                        out.push((i, j));
                    }
                }
            }
        }
    }
    out.sort_unstable();
    out
}

fn transfer(
    offers: &[MsgId],
    to: &mut NodeBuffer,
    from: UserId,
    now: SimTime,
    out: &mut Vec<Delivery>,
) {
    for &m in offers {
        let fresh = to.receive(m, from, now);
        out.push(Delivery {
            time: now,
            msg_id: m,
            to_node: to.node_id,
            from_node: from,
            was_duplicate: !fresh,
        });
    }
}

fn offers(holder: &NodeBuffer, advertised: &BTreeSet<MsgId>) -> Vec<MsgId> {
    holder.held.difference(advertised).copied().collect()
}

/// Anti-entropy between two buffers using their current holdings as summary vectors.
pub fn exchange(a: &mut NodeBuffer, b: &mut NodeBuffer, now: SimTime) -> Vec<Delivery> {
    let to_b = offers(a, &b.held);
    let to_a = offers(b, &a.held);
    let mut out = Vec::new();
    transfer(&to_b, b, a.node_id, now, &mut out);
    transfer(&to_a, a, b.node_id, now, &mut out);
    out
}

/// Buffers of every node plus the summary vectors advertised this tick.
#[derive(Debug, Clone)]
pub struct Dissemination {
    buffers: Vec<NodeBuffer>,
    advertised: Vec<BTreeSet<MsgId>>,
}

impl Dissemination {
    pub fn new(node_count: usize) -> Self {
        Dissemination {
            buffers: (0..node_count).map(NodeBuffer::new).collect(),
            advertised: vec![BTreeSet::new(); node_count],
        }
    }

    pub fn buffers(&self) -> &[NodeBuffer] {
        &self.buffers
    }

    pub fn buffer(&self, node: UserId) -> &NodeBuffer {
        &self.buffers[node]
    }

    /// Places a new message in its origin's buffer; the origin logs it as received from itself.
    pub fn inject(
        &mut self,
        msg: MsgId,
        origin: UserId,
        now: SimTime,
    ) -> Result<Delivery, DisseminationError> {
        if self.buffers.iter().any(|b| b.holds(msg)) {
            return Err(DisseminationError::DuplicateInjection { msg, node: origin });
        }
        self.buffers[origin].receive(msg, origin, now);
        Ok(Delivery {
            time: now,
            msg_id: msg,
            to_node: origin,
            from_node: origin,
            was_duplicate: false,
        })
    }

    /// Snapshots every node's summary vector for the coming tick.
    pub fn begin_tick(&mut self) {
        for (adv, buf) in self.advertised.iter_mut().zip(&self.buffers) {
            adv.clone_from(&buf.held);
        }
    }

    /// Exchange between `a` and `b` (`a != b`) against this tick's summary vectors.
    pub fn exchange_pair(&mut self, a: UserId, b: UserId, now: SimTime) -> Vec<Delivery> {
        assert_ne!(a, b, "a node cannot contact itself");
        let to_b = offers(&self.buffers[a], &self.advertised[b]);
        let to_a = offers(&self.buffers[b], &self.advertised[a]);
        let mut out = Vec::new();
        transfer(&to_b, &mut self.buffers[b], a, now, &mut out);
        transfer(&to_a, &mut self.buffers[a], b, now, &mut out);
        out
    }

    /// Runs one full contact tick over `pairs` (sorted ascending).
    pub fn tick(&mut self, pairs: &[(UserId, UserId)], now: SimTime) -> Vec<Delivery> {
        self.begin_tick();
        pairs
            .iter()
            .flat_map(|&(a, b)| self.exchange_pair(a, b, now))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn t(s: f64) -> SimTime {
        SimTime::from_secs(s)
    }

    fn area() -> Area {
        Area {
            width: 1000.0,
            height: 1000.0,
        }
    }

    #[test]
    fn contact_boundary() {
        let near = [Position::new(0.0, 0.0), Position::new(10.0, 0.0)];
        assert_eq!(scan_contacts(&near, 30.0, &area()), vec![(0, 1)]);
        let far = [Position::new(0.0, 0.0), Position::new(31.0, 0.0)];
        assert!(scan_contacts(&far, 30.0, &area()).is_empty());
        let exact = [Position::new(0.0, 0.0), Position::new(30.0, 0.0)];
        assert_eq!(scan_contacts(&exact, 30.0, &area()), vec![(0, 1)]);
    }

    #[test]
    fn grid_matches_brute_force() {
        let positions: Vec<Position> = (0..100)
            .map(|i| Position::new((i % 10) as f64 * 25.0, (i / 10) as f64 * 25.0))
            .collect();
        assert_eq!(
            scan_contacts(&positions, 30.0, &area()),
            scan_contacts_brute(&positions, 30.0)
        );
    }

    #[test]
    fn set_difference_exchange() {
        let mut a = NodeBuffer::new(0);
        let mut b = NodeBuffer::new(1);
        for m in [1, 2] {
            a.receive(m, 0, t(0.0));
        }
        for m in [2, 3] {
            b.receive(m, 1, t(0.0));
        }
        let d = exchange(&mut a, &mut b, t(5.0));
        assert_eq!(d.len(), 2);
        assert!(a.holds(3) && b.holds(1));
        assert!(d.iter().all(|x| !x.was_duplicate));
        assert!(exchange(&mut a, &mut b, t(6.0)).is_empty());
    }

    #[test]
    fn relay_chain_in_one_tick() {
        let mut net = Dissemination::new(3);
        net.inject(9, 0, t(0.0)).unwrap();
        let d = net.tick(&[(0, 1), (1, 2)], t(10.0));
        assert_eq!(d.len(), 2);
        let log = net.buffer(2).reception_log();
        assert_eq!(log.len(), 1);
        assert_eq!(log[0].from_node, 1);
        assert_eq!(log[0].time, t(10.0));
        assert!(!log[0].was_duplicate);
    }

    #[test]
    fn two_holders_produce_a_duplicate() {
        let mut net = Dissemination::new(3);
        net.inject(4, 0, t(0.0)).unwrap();
        net.tick(&[(0, 1)], t(1.0));
        let d = net.tick(&[(0, 2), (1, 2)], t(2.0));
        assert_eq!(d.iter().filter(|x| x.was_duplicate).count(), 1);
        assert_eq!(net.buffer(2).held().len(), 1);
    }

    #[test]
    fn inject_rules() {
        let mut net = Dissemination::new(2);
        net.inject(7, 0, t(100.0)).unwrap();
        assert_eq!(
            net.buffer(0).reception_log(),
            &[Reception {
                msg_id: 7,
                time: t(100.0),
                from_node: 0,
                was_duplicate: false
            }]
        );
        assert_eq!(
            net.inject(7, 0, t(100.0)),
            Err(DisseminationError::DuplicateInjection { msg: 7, node: 0 })
        );
        net.tick(&[(0, 1)], t(110.0));
        assert!(net.buffer(1).holds(7));
    }

    proptest! {
        #[test]
        fn indexed_scan_equals_brute_force(
            pts in proptest::collection::vec((0.0f64..=300.0, 0.0f64..=300.0), 0..120),
            r in 1.0f64..80.0,
        ) {
            let positions: Vec<Position> = pts.iter().map(|&(x, y)| Position::new(x, y)).collect();
            let area = Area { width: 300.0, height: 300.0 };
            prop_assert_eq!(scan_contacts(&positions, r, &area), scan_contacts_brute(&positions, r));
        }

        #[test]
        fn no_node_receives_a_message_twice_as_new(
            links in proptest::collection::vec((0usize..8, 0usize..8), 1..40),
        ) {
            let mut net = Dissemination::new(8);
            net.inject(0, 0, t(0.0)).unwrap();
            let mut pairs: Vec<(usize, usize)> = links
                .into_iter()
                .filter(|(a, b)| a != b)
                .map(|(a, b)| (a.min(b), a.max(b)))
                .collect();
            pairs.sort_unstable();
            pairs.dedup();
            for k in 1..4 {
                net.tick(&pairs, t(k as f64));
            }
            for b in net.buffers() {
                let fresh = b.reception_log().iter().filter(|r| !r.was_duplicate).count();
                prop_assert_eq!(fresh, b.held().len());
            }
        }
    }
}
