//! Coalition strategies and the Lie/Truth split of an honest node's view.
//!
//! For an honest node `u`, let `v` be the closest coalition member upstream of it
//! and `m` the number of positions from `v` (exclusive) to `u` (inclusive). The
//! `m − 1` triplets that reach `u` in rounds `1..m` come from the honest arc
//! between `v` and `u`, and together with `u`'s own triplet they form the *truth*
//! set. The `n − m` triplets that arrive in rounds `m..n` pass through `v` and can
//! be replaced by the coalition: the *lie* set.
//!
//! Coalition members share what they learn, but information travels no faster
//! than the ring itself: something first received by member `f` at the end of
//! round `k` is usable by member `c` from round `k + dist(f, c) + 1` on. The
//! [`Escrow`] enforces this for every relayed honest triplet.

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt;
use std::rc::Rc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::bit::Bit;
use crate::error::{Error, Result};
use crate::protocol::{Decision, Triplet};
use crate::ring::{honest_behavior, Behavior, RingConfig, Trace};

/// Forged ids are drawn from here up, away from any honest id used in practice.
pub const FRESH_ID_BASE: u64 = 1 << 40;

/// The Lie/Truth split of one honest node's received triplets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ViewPartition {
    pub target: usize,
    /// Closest coalition member upstream of the target.
    pub upstream_member: usize,
    pub m: usize,
    pub truth: Vec<Triplet>,
    pub lie: Vec<Triplet>,
    pub input_t: u64,
    pub input_l: u64,
    pub random_t: u128,
    pub random_l: u128,
}

/// Split `u`'s view in `trace` into truth and lie sets.
pub fn compute_view_partition(trace: &Trace, config: &RingConfig, u: usize) -> Result<ViewPartition> {
    config.check_position(u)?;
    if !config.is_honest(u) {
        return Err(Error::NotHonest(u));
    }
    let n = config.n();
    let m = (1..n).find(|&d| !config.is_honest((u + n - d) % n)).ok_or(Error::EmptyCoalition)?;
    let upstream_member = (u + n - m) % n;

    let own = trace.sent(u, 1).ok_or(Error::IncompleteView(u))?;
    let mut truth = Vec::with_capacity(m);
    let mut lie = Vec::with_capacity(n - m);
    for round in 1..n {
        let t = trace.received(u, round).ok_or(Error::IncompleteView(u))?;
        if round < m {
            truth.push(t);
        } else {
            lie.push(t);
        }
    }
    truth.push(own);
    let input_sum = |s: &[Triplet]| s.iter().map(|t| u64::from(t.input)).sum();
    let random_sum = |s: &[Triplet]| s.iter().map(|t| u128::from(t.random)).sum();
    Ok(ViewPartition {
        target: u,
        upstream_member,
        m,
        input_t: input_sum(&truth),
        input_l: input_sum(&lie),
        random_t: random_sum(&truth),
        random_l: random_sum(&lie),
        truth,
        lie,
    })
}

/// What a coalition member sends into one slot of its honest successor's view.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotPlan {
    /// A triplet fixed before the run.
    Forge(Triplet),
    /// The slot's originator's genuine triplet, as an honest relay would deliver it.
    Relay,
    /// The genuine triplet with its input replaced.
    RelayWithInput(u32),
    /// The genuine triplet with its input bit flipped.
    RelayFlipped,
}

impl SlotPlan {
    pub fn is_relay(self) -> bool {
        !matches!(self, SlotPlan::Forge(_))
    }
}

/// Per-target plans for receive rounds `1..n`; the round-`n` own-return is always genuine.
///
/// Only honest nodes whose upstream neighbour is a coalition member can be targeted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ForgeScript {
    pub targets: BTreeMap<usize, Vec<SlotPlan>>,
}

impl ForgeScript {
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("script serializes");
        Sha256::digest(&json)[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("script serializes")
    }
}

/// How forged ids are chosen across targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdPattern {
    /// Fresh ids, distinct for every (target, slot).
    Fresh,
    /// Fresh ids, identical slot by slot across targets.
    Mirrored,
    /// Each slot carries the true id of the node whose triplet honestly occupies it.
    Echo,
}

impl IdPattern {
    pub const ALL: [IdPattern; 3] = [IdPattern::Fresh, IdPattern::Mirrored, IdPattern::Echo];

    fn id_for(self, config: &RingConfig, target_index: usize, target: usize, round: usize) -> u64 {
        match self {
            IdPattern::Fresh => FRESH_ID_BASE + ((target_index + 1) * config.n() + round) as u64,
            IdPattern::Mirrored => FRESH_ID_BASE + round as u64,
            IdPattern::Echo => config.id(config.originator(target, round)),
        }
    }
}

impl fmt::Display for IdPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdPattern::Fresh => "fresh",
            IdPattern::Mirrored => "mirrored",
            IdPattern::Echo => "echo",
        })
    }
}

/// Honest nodes whose upstream neighbour belongs to the coalition.
pub fn forge_targets(config: &RingConfig) -> Vec<usize> {
    config.honest_positions().into_iter().filter(|&u| !config.is_honest(config.upstream(u))).collect()
}

/// True when slot `round` of `target` carries a triplet that must reach its honest
/// originator again through honest nodes only, so forging it means certain detection.
pub fn must_relay(config: &RingConfig, target: usize, round: usize) -> bool {
    let n = config.n();
    let origin = config.originator(target, round);
    if !config.is_honest(origin) {
        return false;
    }
    let mut p = config.downstream(target);
    while p != origin {
        if !config.is_honest(p) {
            return false;
        }
        p = (p + 1) % n;
    }
    true
}

/// Position `steps` hops upstream of `from`, for `steps ≤ n`.
fn back(from: usize, steps: usize, n: usize) -> usize {
    if steps <= from {
        from - steps
    } else {
        from + n - steps
    }
}

fn ring_distance(n: usize, from: usize, to: usize) -> usize {
    (to + n - from) % n
}

/// Genuine honest triplets as the coalition learns them, with ring-speed visibility.
#[derive(Debug)]
pub struct Escrow {
    n: usize,
    /// Per originator: (triplet, member that received it, round it arrived).
    known: Vec<Option<(Triplet, usize, usize)>>,
}

impl Escrow {
    fn new(n: usize) -> Self {
        Escrow { n, known: vec![None; n] }
    }

    fn deposit(&mut self, origin: usize, triplet: Triplet, member: usize, round: usize) {
        if self.known[origin].is_none() {
            self.known[origin] = Some((triplet, member, round));
        }
    }

    /// The genuine triplet of `origin`, if `member` may know it when sending in `round`.
    fn lookup(&self, origin: usize, member: usize, round: usize) -> Option<Triplet> {
        let (t, at, arrived) = self.known[origin]?;
        (arrived + ring_distance(self.n, at, member) < round).then_some(t)
    }
}

/// Coalition member driven by a [`ForgeScript`].
///
/// With no plan for its successor it relays genuinely, like an honest node would.
pub struct ScriptedMember<'a> {
    config: &'a RingConfig,
    position: usize,
    plan: Option<&'a [SlotPlan]>,
    member_triplets: &'a [Triplet],
    escrow: Rc<RefCell<Escrow>>,
    claim: Bit,
}

impl ScriptedMember<'_> {
    fn genuine(&self, origin: usize, round: usize) -> Option<Triplet> {
        if self.config.is_honest(origin) {
            self.escrow.borrow().lookup(origin, self.position, round)
        } else {
            Some(self.member_triplets[origin])
        }
    }
}

impl Behavior for ScriptedMember<'_> {
    fn send(&mut self, round: usize) -> Option<Triplet> {
        let n = self.config.n();
        // The successor's round-`round` message started `round − 1` hops above us.
        let origin = back(self.position, round - 1, n);
        let plan = match self.plan {
            Some(slots) if round < n => slots[round - 1],
            _ => SlotPlan::Relay,
        };
        match plan {
            SlotPlan::Forge(t) => Some(t),
            SlotPlan::Relay => self.genuine(origin, round),
            SlotPlan::RelayWithInput(input) => self.genuine(origin, round).map(|t| Triplet { input, ..t }),
            SlotPlan::RelayFlipped => self
                .genuine(origin, round)
                .map(|t| Triplet { input: if t.input <= 1 { 1 - t.input } else { t.input }, ..t }),
        }
    }

    fn receive(&mut self, round: usize, message: Option<Triplet>) {
        let Some(t) = message else { return };
        let n = self.config.n();
        let origin = back(self.position, round, n);
        // Genuine only if it crossed honest nodes exclusively on its way here.
        let untouched = (1..round).all(|d| self.config.is_honest(back(self.position, d, n)));
        if self.config.is_honest(origin) && untouched {
            self.escrow.borrow_mut().deposit(origin, t, self.position, round);
        }
    }

    fn decide(&mut self) -> Decision {
        Decision::Decided(self.claim)
    }
}

/// Builds coalition behaviors for one run.
///
/// Implementations are immutable plans; `members` is called once per run and must
/// return fresh behaviors for exactly the coalition positions, in position order.
pub trait CoalitionStrategy: Sync {
    fn members<'a>(&'a self, config: &'a RingConfig) -> Result<Vec<(usize, Box<dyn Behavior + 'a>)>>;
}

/// No deviation: every coalition member runs the protocol with its true input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truthful {
    /// Per coalition position, in position order.
    pub inputs: Vec<Bit>,
    pub randoms: Vec<u64>,
}

impl Truthful {
    pub fn zeros(config: &RingConfig) -> Self {
        let k = config.coalition_positions().len();
        Truthful { inputs: vec![Bit::ZERO; k], randoms: vec![0; k] }
    }
}

/// Input cheaters: protocol-compliant members that declare fabricated input bits.
pub type InputCheaters = Truthful;

/// A coalition member that runs the protocol but declares `declared` as its input.
pub fn input_cheater(n: usize, id: u64, declared: Bit, rand_value: u64) -> Result<impl Behavior> {
    honest_behavior(n, id, declared, rand_value)
}

impl CoalitionStrategy for Truthful {
    fn members<'a>(&'a self, config: &'a RingConfig) -> Result<Vec<(usize, Box<dyn Behavior + 'a>)>> {
        let members = config.coalition_positions();
        for len in [self.inputs.len(), self.randoms.len()] {
            if len != members.len() {
                return Err(Error::LengthMismatch { expected: members.len(), actual: len });
            }
        }
        members
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let b = input_cheater(config.n(), config.id(p), self.inputs[i], self.randoms[i])?;
                Ok((p, Box::new(b) as Box<dyn Behavior>))
            })
            .collect()
    }
}

/// A [`ForgeScript`] plus what the members claim and the triplets they inject themselves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScriptedCoalition {
    pub script: ForgeScript,
    /// Indexed by position; only coalition entries are used.
    pub member_triplets: Vec<Triplet>,
    pub claim: Bit,
}

/// Check a script against the ring and wrap it as a coalition strategy.
///
/// Members inject `⟨own id, 0, 0⟩` on slots they relay genuinely.
pub fn fixed_stream_forger(config: &RingConfig, script: ForgeScript) -> Result<ScriptedCoalition> {
    let n = config.n();
    for (&target, slots) in &script.targets {
        config.check_position(target)?;
        if !config.is_honest(target) {
            return Err(Error::NotHonest(target));
        }
        if config.is_honest(config.upstream(target)) {
            return Err(Error::NotCoalition(config.upstream(target)));
        }
        if slots.len() != n - 1 {
            return Err(Error::LengthMismatch { expected: n - 1, actual: slots.len() });
        }
    }
    let member_triplets = (0..n).map(|p| Triplet::new(config.id(p), 0, 0)).collect();
    Ok(ScriptedCoalition { script, member_triplets, claim: Bit::ZERO })
}

impl CoalitionStrategy for ScriptedCoalition {
    fn members<'a>(&'a self, config: &'a RingConfig) -> Result<Vec<(usize, Box<dyn Behavior + 'a>)>> {
        if self.member_triplets.len() != config.n() {
            return Err(Error::LengthMismatch { expected: config.n(), actual: self.member_triplets.len() });
        }
        let escrow = Rc::new(RefCell::new(Escrow::new(config.n())));
        Ok((0..config.n())
            .filter(|&p| !config.is_honest(p))
            .map(|p| {
                let member = ScriptedMember {
                    config,
                    position: p,
                    plan: self.script.targets.get(&config.downstream(p)).map(Vec::as_slice),
                    member_triplets: &self.member_triplets,
                    escrow: Rc::clone(&escrow),
                    claim: self.claim,
                };
                (p, Box::new(member) as Box<dyn Behavior + 'a>)
            })
            .collect())
    }
}

/// Forge every forgeable slot so the forged inputs of each target sum to `preferred`.
///
/// A target that elects itself then decides `preferred` whenever its whole lie set
/// is forged. Ids follow `pattern`; every forged random is `forged_random`.
pub fn parity_rigger(
    config: &RingConfig,
    preferred: Bit,
    pattern: IdPattern,
    forged_random: u64,
) -> Result<ScriptedCoalition> {
    let targets = forge_targets(config);
    if targets.is_empty() {
        return Err(Error::NoRiggableTarget);
    }
    let n = config.n();
    let mut script = ForgeScript::default();
    for (ti, &u) in targets.iter().enumerate() {
        let mut first = true;
        let slots = (1..n)
            .map(|round| {
                if must_relay(config, u, round) {
                    return SlotPlan::Relay;
                }
                let input = if first { preferred.as_u32() } else { 0 };
                first = false;
                SlotPlan::Forge(Triplet::new(pattern.id_for(config, ti, u, round), input, forged_random))
            })
            .collect();
        script.targets.insert(u, slots);
    }
    let mut coalition = fixed_stream_forger(config, script)?;
    coalition.claim = preferred;
    Ok(coalition)
}

/// Relay honest triplets with genuine ids and randoms but scripted inputs, and give
/// every target the same coalition ids and randoms.
///
/// All targets then share one id array and one random sum, hence one leader, while
/// the inputs they see differ.
pub fn mirrored_relay_rigger(config: &RingConfig, preferred: Bit) -> Result<ScriptedCoalition> {
    let targets = forge_targets(config);
    if targets.is_empty() {
        return Err(Error::NoRiggableTarget);
    }
    let n = config.n();
    let mut script = ForgeScript::default();
    for &u in &targets {
        let slots = (1..n)
            .map(|round| {
                let origin = config.originator(u, round);
                let input = if round == 1 { preferred.as_u32() } else { 0 };
                if must_relay(config, u, round) {
                    SlotPlan::Relay
                } else if config.is_honest(origin) {
                    SlotPlan::RelayWithInput(input)
                } else {
                    SlotPlan::Forge(Triplet::new(config.id(origin), input, 0))
                }
            })
            .collect();
        script.targets.insert(u, slots);
    }
    let mut coalition = fixed_stream_forger(config, script)?;
    coalition.claim = preferred;
    Ok(coalition)
}

/// A finite family of scripts, indexable without materialising it.
///
/// Each family fixes, per target and per slot, a list of admissible plans; the
/// family's scripts are the Cartesian product.
#[derive(Clone, Debug)]
pub struct ScriptSpace {
    targets: Vec<usize>,
    families: Vec<Vec<Vec<Vec<SlotPlan>>>>,
    sizes: Vec<u128>,
}

impl ScriptSpace {
    fn from_families(targets: Vec<usize>, families: Vec<Vec<Vec<Vec<SlotPlan>>>>) -> Self {
        let sizes = families.iter().map(|f| f.iter().flatten().map(|opts| opts.len() as u128).product()).collect();
        ScriptSpace { targets, families, sizes }
    }

    pub fn len(&self) -> u128 {
        if self.targets.is_empty() {
            0
        } else {
            self.sizes.iter().sum()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn get(&self, index: u128) -> Option<ForgeScript> {
        if index >= self.len() {
            return None;
        }
        let mut rest = index;
        let mut family = 0;
        while rest >= self.sizes[family] {
            rest -= self.sizes[family];
            family += 1;
        }
        let mut script = ForgeScript::default();
        for (ti, &u) in self.targets.iter().enumerate() {
            let slots = self.families[family][ti]
                .iter()
                .map(|opts| {
                    let k = opts.len() as u128;
                    let choice = opts[(rest % k) as usize];
                    rest /= k;
                    choice
                })
                .collect();
            script.targets.insert(u, slots);
        }
        Some(script)
    }

    pub fn iter(&self) -> impl Iterator<Item = ForgeScript> + '_ {
        (0..self.len()).map(move |i| self.get(i).expect("index in range"))
    }
}

/// Every constant lie stream: for each id pattern, every input bit and every
/// random in `Z_n` on every forgeable slot of every target. Slots that must carry a
/// genuine triplet are relayed.
pub fn enumerate_fixed_strategies(config: &RingConfig, patterns: &[IdPattern]) -> ScriptSpace {
    let n = config.n();
    let targets = forge_targets(config);
    let families = patterns
        .iter()
        .map(|&pattern| {
            targets
                .iter()
                .enumerate()
                .map(|(ti, &u)| {
                    (1..n)
                        .map(|round| {
                            if must_relay(config, u, round) {
                                return vec![SlotPlan::Relay];
                            }
                            let id = pattern.id_for(config, ti, u, round);
                            (0..2u32)
                                .flat_map(|input| {
                                    (0..n as u64).map(move |r| SlotPlan::Forge(Triplet::new(id, input, r)))
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    ScriptSpace::from_families(targets, families)
}

/// A bounded family of history-reading policies.
///
/// Slots that honestly carry an honest node's triplet may relay it, flip its
/// input, overwrite its input, or replace it by a constant with that node's id and
/// any input and random. Slots carrying a coalition triplet take the member's id
/// with any input and a random from `coalition_randoms`.
pub fn enumerate_adaptive_strategies(config: &RingConfig, coalition_randoms: &[u64]) -> ScriptSpace {
    let n = config.n();
    let targets = forge_targets(config);
    let family = targets
        .iter()
        .map(|&u| {
            (1..n)
                .map(|round| {
                    if must_relay(config, u, round) {
                        return vec![SlotPlan::Relay];
                    }
                    let origin = config.originator(u, round);
                    let id = config.id(origin);
                    if config.is_honest(origin) {
                        let mut opts = vec![
                            SlotPlan::Relay,
                            SlotPlan::RelayFlipped,
                            SlotPlan::RelayWithInput(0),
                            SlotPlan::RelayWithInput(1),
                        ];
                        for input in 0..2 {
                            for r in 0..n as u64 {
                                opts.push(SlotPlan::Forge(Triplet::new(id, input, r)));
                            }
                        }
                        opts
                    } else {
                        (0..2u32)
                            .flat_map(|input| {
                                coalition_randoms.iter().map(move |&r| SlotPlan::Forge(Triplet::new(id, input, r)))
                            })
                            .collect()
                    }
                })
                .collect()
        })
        .collect();
    ScriptSpace::from_families(targets, vec![family])
}
