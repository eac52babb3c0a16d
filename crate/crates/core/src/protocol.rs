//! The parity-leader consensus protocol, one node at a time.
//!
//! Every node starts with an `⟨id, input, random⟩` triplet, sends it downstream and
//! then relays whatever arrives for `n − 1` rounds, accumulating the inputs and
//! randoms it sees. In round `n` its own triplet must come back unchanged. The node
//! then sorts the collected `(id, input)` pairs by id, elects the entry at index
//! `rand_sum mod n` as leader, adds the leader's input to the input sum a second
//! time and decides the parity of the result.
//!
//! The functions here are pure state transitions. Scheduling lives in
//! [`ring`](crate::ring).

use serde::{Deserialize, Serialize};

use crate::bit::Bit;
use crate::error::{Error, Result};

/// The record that circulates on the ring.
///
/// `input` is deliberately wider than a bit so that a forged out-of-range value is
/// representable and has to be rejected by the receiver.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triplet {
    pub id: u64,
    pub input: u32,
    pub random: u64,
}

impl Triplet {
    pub const fn new(id: u64, input: u32, random: u64) -> Self {
        Triplet { id, input, random }
    }
}

/// One `(id, input)` entry of a node's id array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IdEntry {
    pub id: u64,
    pub input: u32,
}

/// Why a node reported a cheater.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason")]
pub enum Detection {
    /// Nothing arrived in a round where a message was due.
    NullMessage { round: usize },
    /// A relayed triplet carried an input outside `{0, 1}`.
    InvalidInput { round: usize, input: u32 },
    /// The node's own triplet came back altered.
    ReturnMismatch,
    /// The same id was collected more than once.
    DuplicateId { id: u64 },
}

/// Final output of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Decided(Bit),
    CheaterDetected(Detection),
}

impl Decision {
    pub fn bit(self) -> Option<Bit> {
        match self {
            Decision::Decided(b) => Some(b),
            Decision::CheaterDetected(_) => None,
        }
    }

    pub fn is_detection(self) -> bool {
        matches!(self, Decision::CheaterDetected(_))
    }
}

/// Per-node protocol state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NodeState {
    n: usize,
    id: u64,
    input: Bit,
    my_rand: u64,
    ids_array: Vec<IdEntry>,
    rand_sum: u128,
    input_sum: u64,
    round: usize,
    leader: Option<IdEntry>,
}

impl NodeState {
    /// Set up the sums and produce the round-1 message.
    pub fn init(n: usize, id: u64, input: u32, rand_value: u64) -> Result<(NodeState, Triplet)> {
        if n < 2 {
            return Err(Error::RingTooSmall(n));
        }
        let bit = Bit::from_u32(input).ok_or(Error::InvalidInput(input))?;
        if rand_value >= n as u64 {
            return Err(Error::RandomOutOfRange { random: rand_value, n });
        }
        let mut ids_array = Vec::with_capacity(n);
        ids_array.push(IdEntry { id, input });
        let state = NodeState {
            n,
            id,
            input: bit,
            my_rand: rand_value,
            ids_array,
            rand_sum: rand_value.into(),
            input_sum: input.into(),
            round: 0,
            leader: None,
        };
        Ok((state, Triplet::new(id, input, rand_value)))
    }

    /// The triplet this node was initialised with.
    pub fn own_triplet(&self) -> Triplet {
        Triplet::new(self.id, self.input.as_u32(), self.my_rand)
    }

    /// Absorb one relayed triplet and return it for forwarding.
    ///
    /// # Panics
    ///
    /// If called after all `n − 1` relays have been absorbed.
    pub fn relay_step(&mut self, incoming: Option<Triplet>) -> Result<Triplet, Detection> {
        assert!(self.round + 1 < self.n, "relay_step called after the last relay round");
        let round = self.round + 1;
        let tmp = incoming.ok_or(Detection::NullMessage { round })?;
        if tmp.input > 1 {
            return Err(Detection::InvalidInput { round, input: tmp.input });
        }
        self.ids_array.push(IdEntry { id: tmp.id, input: tmp.input });
        self.rand_sum += u128::from(tmp.random);
        self.input_sum += u64::from(tmp.input);
        self.round = round;
        Ok(tmp)
    }

    /// The node's own triplet must return unchanged.
    ///
    /// # Panics
    ///
    /// If called before all relays are done or twice.
    pub fn verify_own_return(&mut self, incoming: Option<Triplet>) -> Result<(), Detection> {
        assert_eq!(self.round + 1, self.n, "verify_own_return out of schedule");
        let tmp = incoming.ok_or(Detection::NullMessage { round: self.n })?;
        if tmp != self.own_triplet() {
            return Err(Detection::ReturnMismatch);
        }
        self.round = self.n;
        Ok(())
    }

    /// Sort, check for duplicates, elect the leader and decide.
    ///
    /// # Panics
    ///
    /// If the own-return check has not passed yet.
    pub fn finalize(&mut self) -> Decision {
        assert_eq!(self.round, self.n, "finalize before the own triplet returned");
        debug_assert_eq!(self.ids_array.len(), self.n);
        self.ids_array.sort_by_key(|e| e.id);
        if let Some(w) = self.ids_array.windows(2).find(|w| w[0].id == w[1].id) {
            return Decision::CheaterDetected(Detection::DuplicateId { id: w[0].id });
        }
        let index = (self.rand_sum % self.n as u128) as usize;
        let leader = self.ids_array[index];
        self.leader = Some(leader);
        let total = self.input_sum + u64::from(leader.input);
        Decision::Decided(Bit::parity(total))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn input(&self) -> Bit {
        self.input
    }

    pub fn my_rand(&self) -> u64 {
        self.my_rand
    }

    /// Collected entries: arrival order until [`finalize`](Self::finalize), sorted by id after.
    pub fn ids_array(&self) -> &[IdEntry] {
        &self.ids_array
    }

    pub fn rand_sum(&self) -> u128 {
        self.rand_sum
    }

    /// Sum of collected inputs, without the leader's second contribution.
    pub fn input_sum(&self) -> u64 {
        self.input_sum
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// The elected leader, once [`finalize`](Self::finalize) has succeeded.
    pub fn leader(&self) -> Option<IdEntry> {
        self.leader
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state_with(n: usize, entries: &[(u64, u32, u64)]) -> NodeState {
        let (first, rest) = entries.split_first().unwrap();
        let (mut s, _) = NodeState::init(n, first.0, first.1, first.2).unwrap();
        for &(id, input, random) in rest {
            s.relay_step(Some(Triplet::new(id, input, random))).unwrap();
        }
        let own = s.own_triplet();
        s.verify_own_return(Some(own)).unwrap();
        s
    }

    #[test]
    fn init_seeds_sums_and_message() {
        let (s, t) = NodeState::init(4, 3, 1, 2).unwrap();
        assert_eq!(s.ids_array(), &[IdEntry { id: 3, input: 1 }]);
        assert_eq!(s.rand_sum(), 2);
        assert_eq!(s.input_sum(), 1);
        assert_eq!(s.round(), 0);
        assert_eq!(t, Triplet::new(3, 1, 2));

        let (s, t) = NodeState::init(4, 0, 0, 0).unwrap();
        assert_eq!((s.rand_sum(), s.input_sum()), (0, 0));
        assert_eq!(t, Triplet::new(0, 0, 0));
    }

    #[test]
    fn init_rejects_bad_configuration() {
        assert_eq!(NodeState::init(4, 1, 2, 0).unwrap_err(), Error::InvalidInput(2));
        assert_eq!(NodeState::init(4, 1, 0, 4).unwrap_err(), Error::RandomOutOfRange { random: 4, n: 4 });
        assert_eq!(NodeState::init(1, 1, 0, 0).unwrap_err(), Error::RingTooSmall(1));
    }

    #[test]
    fn relay_accumulates() {
        let (mut s, _) = NodeState::init(4, 3, 1, 2).unwrap();
        let out = s.relay_step(Some(Triplet::new(7, 1, 3))).unwrap();
        assert_eq!(out, Triplet::new(7, 1, 3));
        assert_eq!(s.rand_sum(), 5);
        assert_eq!(s.input_sum(), 2);
        assert_eq!(s.ids_array().last(), Some(&IdEntry { id: 7, input: 1 }));
        assert_eq!(s.round(), 1);
    }

    #[test]
    fn relay_detects_bad_input_and_silence() {
        let (mut s, _) = NodeState::init(4, 3, 1, 2).unwrap();
        assert_eq!(s.relay_step(Some(Triplet::new(7, 5, 0))), Err(Detection::InvalidInput { round: 1, input: 5 }));
        assert_eq!(s.relay_step(None), Err(Detection::NullMessage { round: 1 }));
    }

    #[test]
    fn own_return_must_match() {
        let mk = || {
            let (mut s, _) = NodeState::init(2, 3, 1, 0).unwrap();
            s.relay_step(Some(Triplet::new(9, 0, 1))).unwrap();
            s
        };
        let mut s = mk();
        assert_eq!(s.verify_own_return(Some(Triplet::new(3, 1, 0))), Ok(()));
        assert_eq!(s.round(), 2);
        assert_eq!(mk().verify_own_return(Some(Triplet::new(3, 1, 1))), Err(Detection::ReturnMismatch));
        assert_eq!(mk().verify_own_return(Some(Triplet::new(4, 1, 0))), Err(Detection::ReturnMismatch));
        assert_eq!(mk().verify_own_return(Some(Triplet::new(3, 0, 0))), Err(Detection::ReturnMismatch));
        assert_eq!(mk().verify_own_return(None), Err(Detection::NullMessage { round: 2 }));
    }

    #[test]
    fn finalize_counts_leader_twice() {
        // n = 2, entries (1,0),(2,1), rand_sum = 1: leader (2,1), 1 + 1 = 2.
        let mut s = state_with(2, &[(1, 0, 0), (2, 1, 1)]);
        assert_eq!(s.finalize(), Decision::Decided(Bit::ZERO));
        assert_eq!(s.leader(), Some(IdEntry { id: 2, input: 1 }));

        // rand_sum = 0 elects (1,0) instead: 1 + 0 = 1.
        let mut s = state_with(2, &[(1, 0, 0), (2, 1, 0)]);
        assert_eq!(s.finalize(), Decision::Decided(Bit::ONE));
    }

    #[test]
    fn all_ones_even_ring_decides_one() {
        for r in 0..4 {
            let mut s = state_with(4, &[(1, 1, r), (2, 1, 0), (3, 1, 0), (4, 1, 0)]);
            assert_eq!(s.finalize(), Decision::Decided(Bit::ONE));
        }
    }

    #[test]
    fn finalize_sorts_by_id() {
        let mut s = state_with(4, &[(30, 0, 1), (10, 1, 0), (40, 0, 0), (20, 0, 0)]);
        // sorted: 10,20,30,40; index 1 -> id 20.
        s.finalize();
        assert_eq!(s.leader().unwrap().id, 20);
        let ids: Vec<u64> = s.ids_array().iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![10, 20, 30, 40]);
    }

    #[test]
    fn duplicate_id_detected() {
        let mut s = state_with(4, &[(5, 0, 0), (5, 1, 0), (6, 0, 0), (7, 0, 0)]);
        assert_eq!(s.finalize(), Decision::CheaterDetected(Detection::DuplicateId { id: 5 }));
        assert_eq!(s.leader(), None);
    }

    #[test]
    #[should_panic(expected = "after the last relay")]
    fn relay_past_schedule_panics() {
        let (mut s, _) = NodeState::init(2, 1, 0, 0).unwrap();
        s.relay_step(Some(Triplet::new(2, 0, 0))).unwrap();
        let _ = s.relay_step(Some(Triplet::new(3, 0, 0)));
    }
}
