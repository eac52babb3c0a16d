//! Lockstep scheduler for a synchronous unidirectional ring.
//!
//! Position `p` sends to `p + 1 mod n`. A run has exactly `n` rounds; in each
//! round every position first emits its message and only then does every position
//! receive its predecessor's. A behavior therefore cannot see anything sent in
//! round `r` before it has committed its own round-`r` message.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bit::Bit;
use crate::error::{Error, Result};
use crate::protocol::{Decision, Detection, IdEntry, NodeState, Triplet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Honest,
    Coalition,
}

/// Ring layout: ids in ring order and who is honest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawRingConfig", into = "RawRingConfig")]
pub struct RingConfig {
    node_ids: Arc<[u64]>,
    roles: Arc<[Role]>,
}

#[derive(Serialize, Deserialize)]
struct RawRingConfig {
    node_ids: Vec<u64>,
    roles: Vec<Role>,
}

impl From<RingConfig> for RawRingConfig {
    fn from(c: RingConfig) -> Self {
        RawRingConfig { node_ids: c.node_ids.to_vec(), roles: c.roles.to_vec() }
    }
}

impl TryFrom<RawRingConfig> for RingConfig {
    type Error = Error;
    fn try_from(raw: RawRingConfig) -> Result<Self> {
        RingConfig::new(raw.node_ids, raw.roles)
    }
}

impl RingConfig {
    pub fn new(node_ids: Vec<u64>, roles: Vec<Role>) -> Result<Self> {
        let n = node_ids.len();
        if n < 2 {
            return Err(Error::RingTooSmall(n));
        }
        if roles.len() != n {
            return Err(Error::LengthMismatch { expected: n, actual: roles.len() });
        }
        let mut seen = HashSet::with_capacity(n);
        for &id in &node_ids {
            if !seen.insert(id) {
                return Err(Error::DuplicateId(id));
            }
        }
        Ok(RingConfig { node_ids: node_ids.into(), roles: roles.into() })
    }

    /// `n` honest nodes with ids `1..=n`.
    pub fn all_honest(n: usize) -> Result<Self> {
        Self::with_honest(n, &(0..n).collect::<Vec<_>>())
    }

    /// Ids `1..=n`; the listed positions are honest, every other one is in the coalition.
    pub fn with_honest(n: usize, honest: &[usize]) -> Result<Self> {
        let mut roles = vec![Role::Coalition; n];
        for &p in honest {
            if p >= n {
                return Err(Error::PositionOutOfRange { position: p, n });
            }
            roles[p] = Role::Honest;
        }
        Self::new((1..=n as u64).collect(), roles)
    }

    pub fn n(&self) -> usize {
        self.node_ids.len()
    }

    pub fn node_ids(&self) -> &[u64] {
        &self.node_ids
    }

    pub fn roles(&self) -> &[Role] {
        &self.roles
    }

    pub fn id(&self, position: usize) -> u64 {
        self.node_ids[position]
    }

    pub fn role(&self, position: usize) -> Role {
        self.roles[position]
    }

    pub fn is_honest(&self, position: usize) -> bool {
        self.roles[position] == Role::Honest
    }

    pub fn honest_positions(&self) -> Vec<usize> {
        (0..self.n()).filter(|&p| self.is_honest(p)).collect()
    }

    pub fn coalition_positions(&self) -> Vec<usize> {
        (0..self.n()).filter(|&p| !self.is_honest(p)).collect()
    }

    pub fn upstream(&self, position: usize) -> usize {
        (position + self.n() - 1) % self.n()
    }

    pub fn downstream(&self, position: usize) -> usize {
        (position + 1) % self.n()
    }

    /// Position whose initial triplet reaches `receiver` in `round` when everybody relays.
    pub fn originator(&self, receiver: usize, round: usize) -> usize {
        let n = self.n();
        (receiver + n - round % n) % n
    }

    pub fn check_position(&self, position: usize) -> Result<()> {
        if position < self.n() {
            Ok(())
        } else {
            Err(Error::PositionOutOfRange { position, n: self.n() })
        }
    }
}

/// A node's message policy.
///
/// `send(r)` is always called before `receive(r, _)`, so a round-`r` message can
/// only depend on what arrived in rounds `1..r`. After round `n` the scheduler
/// calls `decide` once.
pub trait Behavior {
    fn send(&mut self, round: usize) -> Option<Triplet>;
    fn receive(&mut self, round: usize, message: Option<Triplet>);
    fn decide(&mut self) -> Decision;
    /// Leader elected by the protocol, for behaviors that run it.
    fn leader(&self) -> Option<IdEntry> {
        None
    }
}

impl<B: Behavior + ?Sized> Behavior for Box<B> {
    fn send(&mut self, round: usize) -> Option<Triplet> {
        (**self).send(round)
    }
    fn receive(&mut self, round: usize, message: Option<Triplet>) {
        (**self).receive(round, message)
    }
    fn decide(&mut self) -> Decision {
        (**self).decide()
    }
    fn leader(&self) -> Option<IdEntry> {
        (**self).leader()
    }
}

/// Algorithm-compliant node. Goes silent after detecting a cheater.
#[derive(Clone, Debug)]
pub struct HonestBehavior {
    state: NodeState,
    own: Triplet,
    pending: Option<Triplet>,
    detected: Option<Detection>,
}

/// Wrap the protocol state machine for node `id` with the given input and random.
pub fn honest_behavior(n: usize, id: u64, input: Bit, rand_value: u64) -> Result<HonestBehavior> {
    let (state, own) = NodeState::init(n, id, input.as_u32(), rand_value)?;
    Ok(HonestBehavior { state, own, pending: None, detected: None })
}

impl HonestBehavior {
    pub fn state(&self) -> &NodeState {
        &self.state
    }

    pub fn detection(&self) -> Option<Detection> {
        self.detected
    }
}

impl Behavior for HonestBehavior {
    fn send(&mut self, round: usize) -> Option<Triplet> {
        if self.detected.is_some() {
            return None;
        }
        if round == 1 {
            Some(self.own)
        } else {
            self.pending.take()
        }
    }

    fn receive(&mut self, round: usize, message: Option<Triplet>) {
        if self.detected.is_some() {
            return;
        }
        let n = self.state.n();
        let result = if round < n {
            self.state.relay_step(message).map(|t| self.pending = Some(t))
        } else {
            self.state.verify_own_return(message)
        };
        if let Err(d) = result {
            self.detected = Some(d);
        }
    }

    fn decide(&mut self) -> Decision {
        match self.detected {
            Some(d) => Decision::CheaterDetected(d),
            None => self.state.finalize(),
        }
    }

    fn leader(&self) -> Option<IdEntry> {
        self.state.leader()
    }
}

/// Complete record of one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    n: usize,
    node_ids: Arc<[u64]>,
    roles: Arc<[Role]>,
    sent: Vec<Option<Triplet>>,
    decisions: Vec<Decision>,
    leaders: Vec<Option<IdEntry>>,
}

impl Trace {
    pub(crate) fn blank(config: &RingConfig) -> Self {
        let n = config.n();
        Trace {
            n,
            node_ids: Arc::clone(&config.node_ids),
            roles: Arc::clone(&config.roles),
            sent: vec![None; n * n],
            decisions: vec![Decision::Decided(Bit::ZERO); n],
            leaders: vec![None; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Message sent by `position` in `round` (1-based).
    pub fn sent(&self, position: usize, round: usize) -> Option<Triplet> {
        self.sent[self.slot(position, round)]
    }

    /// Message received by `position` in `round` (1-based).
    pub fn received(&self, position: usize, round: usize) -> Option<Triplet> {
        self.sent[self.slot((position + self.n - 1) % self.n, round)]
    }

    pub fn decision(&self, position: usize) -> Decision {
        self.decisions[position]
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn leader(&self, position: usize) -> Option<IdEntry> {
        self.leaders[position]
    }

    pub fn role(&self, position: usize) -> Role {
        self.roles[position]
    }

    pub fn cheater_reported(&self, position: usize) -> bool {
        self.roles[position] == Role::Honest && self.decisions[position].is_detection()
    }

    fn slot(&self, position: usize, round: usize) -> usize {
        assert!((1..=self.n).contains(&round), "round {round} outside 1..={}", self.n);
        position * self.n + round - 1
    }

    pub fn to_json(&self) -> serde_json::Value {
        #[derive(Serialize)]
        struct Event {
            round: usize,
            position: usize,
            sent: Option<Triplet>,
            received: Option<Triplet>,
        }
        #[derive(Serialize)]
        struct Node {
            position: usize,
            id: u64,
            role: Role,
            decision: Decision,
            cheater_reported: bool,
            leader: Option<IdEntry>,
        }
        let mut events = Vec::with_capacity(self.n * self.n);
        for round in 1..=self.n {
            for position in 0..self.n {
                events.push(Event {
                    round,
                    position,
                    sent: self.sent(position, round),
                    received: self.received(position, round),
                });
            }
        }
        let nodes: Vec<Node> = (0..self.n)
            .map(|p| Node {
                position: p,
                id: self.node_ids[p],
                role: self.roles[p],
                decision: self.decisions[p],
                cheater_reported: self.cheater_reported(p),
                leader: self.leaders[p],
            })
            .collect();
        serde_json::json!({ "n": self.n, "rounds": events, "nodes": nodes })
    }
}

/// Execute `n` lockstep rounds with one behavior per position.
pub fn run_ring<B: Behavior>(config: &RingConfig, behaviors: &mut [B]) -> Result<Trace> {
    let mut trace = Trace::blank(config);
    run_ring_into(config, behaviors, &mut trace)?;
    Ok(trace)
}

/// [`run_ring`] into a trace whose buffers are reused.
pub(crate) fn run_ring_into<B: Behavior>(config: &RingConfig, behaviors: &mut [B], trace: &mut Trace) -> Result<()> {
    let n = config.n();
    if behaviors.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: behaviors.len() });
    }
    if trace.n != n || !Arc::ptr_eq(&trace.node_ids, &config.node_ids) || !Arc::ptr_eq(&trace.roles, &config.roles) {
        *trace = Trace::blank(config);
    }
    let sent = &mut trace.sent;
    for round in 1..=n {
        for (p, b) in behaviors.iter_mut().enumerate() {
            sent[p * n + round - 1] = b.send(round);
        }
        for (p, b) in behaviors.iter_mut().enumerate() {
            let from = if p == 0 { n - 1 } else { p - 1 };
            b.receive(round, sent[from * n + round - 1]);
        }
    }
    for (p, b) in behaviors.iter_mut().enumerate() {
        trace.decisions[p] = b.decide();
        trace.leaders[p] = b.leader();
    }
    Ok(())
}

/// Honest behaviors for every position with the given inputs and randoms.
pub fn honest_ring(config: &RingConfig, inputs: &[Bit], randoms: &[u64]) -> Result<Vec<HonestBehavior>> {
    let n = config.n();
    for len in [inputs.len(), randoms.len()] {
        if len != n {
            return Err(Error::LengthMismatch { expected: n, actual: len });
        }
    }
    (0..n).map(|p| honest_behavior(n, config.id(p), inputs[p], randoms[p])).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(v: &[u32]) -> Vec<Bit> {
        v.iter().map(|&b| Bit::from_u32(b).unwrap()).collect()
    }

    #[test]
    fn config_validation() {
        assert_eq!(RingConfig::new(vec![1], vec![Role::Honest]).unwrap_err(), Error::RingTooSmall(1));
        assert_eq!(RingConfig::new(vec![1, 1], vec![Role::Honest; 2]).unwrap_err(), Error::DuplicateId(1));
        assert!(matches!(RingConfig::new(vec![1, 2], vec![Role::Honest]), Err(Error::LengthMismatch { .. })));
        let json = r#"{"node_ids":[4,4],"roles":["honest","honest"]}"#;
        assert!(serde_json::from_str::<RingConfig>(json).is_err());
    }

    #[test]
    fn originator_follows_the_ring() {
        let c = RingConfig::all_honest(4).unwrap();
        assert_eq!(c.originator(1, 1), 0);
        assert_eq!(c.originator(1, 2), 3);
        assert_eq!(c.originator(1, 4), 1);
    }

    #[test]
    fn two_node_example() {
        let c = RingConfig::all_honest(2).unwrap();
        let mut b = honest_ring(&c, &bits(&[0, 1]), &[0, 1]).unwrap();
        let t = run_ring(&c, &mut b).unwrap();
        assert_eq!(t.decisions(), &[Decision::Decided(Bit::ZERO); 2]);
    }

    #[test]
    fn all_zero_decides_zero() {
        let c = RingConfig::all_honest(4).unwrap();
        let mut b = honest_ring(&c, &bits(&[0, 0, 0, 0]), &[3, 1, 0, 2]).unwrap();
        let t = run_ring(&c, &mut b).unwrap();
        assert!(t.decisions().iter().all(|d| *d == Decision::Decided(Bit::ZERO)));
    }

    #[test]
    fn honest_round_structure() {
        let c = RingConfig::all_honest(4).unwrap();
        let mut b = honest_ring(&c, &bits(&[1, 0, 1, 0]), &[0, 1, 2, 3]).unwrap();
        let t = run_ring(&c, &mut b).unwrap();
        for p in 0..4 {
            assert_eq!(t.sent(p, 1), Some(Triplet::new(p as u64 + 1, [1, 0, 1, 0][p], p as u64)));
            for r in 2..=4 {
                assert_eq!(t.sent(p, r), t.received(p, r - 1));
            }
            for r in 1..=4 {
                assert_eq!(t.received(p, r), t.sent(c.upstream(p), r));
            }
            assert_eq!(t.received(p, 4), t.sent(p, 1));
        }
    }

    struct Liar {
        own: Triplet,
        forged_round: usize,
        pending: Option<Triplet>,
    }

    impl Behavior for Liar {
        fn send(&mut self, round: usize) -> Option<Triplet> {
            let out = if round == 1 { Some(self.own) } else { self.pending.take() };
            if round == self.forged_round {
                out.map(|t| Triplet { input: 7, ..t })
            } else {
                out
            }
        }
        fn receive(&mut self, _round: usize, message: Option<Triplet>) {
            self.pending = message;
        }
        fn decide(&mut self) -> Decision {
            Decision::Decided(Bit::ONE)
        }
    }

    #[test]
    fn invalid_input_is_detected_and_silences_downstream() {
        let c = RingConfig::with_honest(4, &[1, 2, 3]).unwrap();
        let mut behaviors: Vec<Box<dyn Behavior>> =
            vec![Box::new(Liar { own: Triplet::new(1, 0, 0), forged_round: 2, pending: None })];
        for p in 1..4 {
            behaviors.push(Box::new(honest_behavior(4, c.id(p), Bit::ZERO, 0).unwrap()));
        }
        let t = run_ring(&c, &mut behaviors).unwrap();
        assert_eq!(t.decision(1), Decision::CheaterDetected(Detection::InvalidInput { round: 2, input: 7 }));
        assert!(t.cheater_reported(1));
        assert_eq!(t.sent(1, 3), None);
        assert_eq!(t.decision(2), Decision::CheaterDetected(Detection::NullMessage { round: 3 }));
        assert!(t.cheater_reported(3));
        assert!(!t.cheater_reported(0));
    }

    #[test]
    fn behavior_count_checked() {
        let c = RingConfig::all_honest(3).unwrap();
        let mut b = honest_ring(&RingConfig::all_honest(2).unwrap(), &bits(&[0, 0]), &[0, 0]).unwrap();
        assert!(matches!(run_ring(&c, &mut b), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn json_shape() {
        let c = RingConfig::all_honest(2).unwrap();
        let mut b = honest_ring(&c, &bits(&[0, 1]), &[0, 1]).unwrap();
        let j = run_ring(&c, &mut b).unwrap().to_json();
        assert_eq!(j["rounds"].as_array().unwrap().len(), 4);
        let e = &j["rounds"][0];
        for key in ["round", "position", "sent", "received"] {
            assert!(e.get(key).is_some(), "missing {key}");
        }
        assert_eq!(j["nodes"][0]["decision"], serde_json::json!({"decided": 0}));
    }
}
