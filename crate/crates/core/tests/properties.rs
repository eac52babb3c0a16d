use proptest::prelude::*;
use rrl_core::adversary::{
    compute_view_partition, enumerate_adaptive_strategies, enumerate_fixed_strategies, fixed_stream_forger,
    forge_targets, mirrored_relay_rigger, parity_rigger, CoalitionStrategy, ForgeScript, IdPattern, Truthful,
};
use rrl_core::analysis::{
    best_response_search, evaluate_script, exact_distribution, monte_carlo, run_assignment, strategy_utility,
    Assignment, Limits, Universe, UtilityModel,
};
use rrl_core::impossibility::{
    equilibrium_functions_bruteforce, is_input_cheater_equilibrium, satisfies_constancy, ConsensusFunction,
};
use rrl_core::protocol::{Decision, Triplet};
use rrl_core::ring::{honest_ring, run_ring, RingConfig, Trace};
use rrl_core::{Bit, Prob};

fn nonadjacent() -> RingConfig {
    RingConfig::with_honest(4, &[1, 3]).unwrap()
}

fn bits(v: &[bool]) -> Vec<Bit> {
    v.iter().copied().map(Bit::new).collect()
}

fn run_honest(n: usize, inputs: &[bool], randoms: &[u64]) -> (RingConfig, Trace, Vec<rrl_core::ring::HonestBehavior>) {
    let c = RingConfig::all_honest(n).unwrap();
    let mut b = honest_ring(&c, &bits(inputs), randoms).unwrap();
    let t = run_ring(&c, &mut b).unwrap();
    (c, t, b)
}

/// Recompute a node's decision from its view alone.
fn check_view_identity(trace: &Trace, config: &RingConfig, u: usize) {
    let Some(bit) = trace.decision(u).bit() else { return };
    let view = compute_view_partition(trace, config, u).unwrap();
    let mut ids: Vec<&Triplet> = view.truth.iter().chain(&view.lie).collect();
    ids.sort_by_key(|t| t.id);
    let n = config.n() as u128;
    let leader = ids[((view.random_t + view.random_l) % n) as usize];
    assert_eq!(trace.leader(u).map(|l| l.id), Some(leader.id));
    assert_eq!(bit, Bit::parity(view.input_t + view.input_l + u64::from(leader.input)));
}

#[test]
fn replay_is_deterministic() {
    let c = nonadjacent();
    let s = parity_rigger(&c, Bit::ONE, IdPattern::Fresh, 0).unwrap();
    let a = Assignment { inputs: bits(&[true, false]), randoms: vec![2, 3] };
    let x = run_assignment(&c, &s, &a).unwrap();
    let y = run_assignment(&c, &s, &a).unwrap();
    assert_eq!(x, y);
    assert_eq!(x.to_json(), y.to_json());
    assert_eq!(s.script.digest(), s.script.clone().digest());
    assert_eq!(s.script.digest().len(), 16);
}

#[test]
fn honest_rings_agree_and_are_valid_exhaustively() {
    for n in 2..=5usize {
        let c = RingConfig::all_honest(n).unwrap();
        let points = (2 * n).pow(n as u32);
        for index in 0..points as u128 {
            let a = Universe::new(&c).get(index);
            let t = run_assignment(&c, &Truthful::zeros(&c), &a).unwrap();
            let d0 = t.decision(0).bit().expect("honest rings never detect");
            assert!(t.decisions().iter().all(|&d| d == Decision::Decided(d0)));
            // Unanimity fixes the decision only on even rings; odd ones flip it.
            if n % 2 == 0 && a.inputs.iter().all(|&b| b == a.inputs[0]) {
                assert_eq!(d0, a.inputs[0]);
            }
        }
    }
}

#[test]
fn every_triplet_reaches_every_node_once() {
    let inputs = [true, false, true, true, false];
    let randoms = [4, 0, 2, 2, 1];
    let (c, t, b) = run_honest(5, &inputs, &randoms);
    let n = c.n();
    let total: u64 = inputs.iter().map(|&x| u64::from(x)).sum();
    for (p, node) in b.iter().enumerate() {
        let mut seen: Vec<u64> = (1..n).map(|r| t.received(p, r).unwrap().id).collect();
        seen.sort_unstable();
        let others: Vec<u64> = (0..n).filter(|&q| q != p).map(|q| c.id(q)).collect();
        assert_eq!(seen, others);
        assert_eq!(t.received(p, n), t.sent(p, 1));
        assert_eq!(node.state().input_sum(), total);
    }
}

fn causality_holds(config: &RingConfig, strategy: &dyn CoalitionStrategy, base: &Assignment) {
    let n = config.n();
    let honest = config.honest_positions();
    let reference = run_assignment(config, strategy, base).unwrap();
    for (slot, &u) in honest.iter().enumerate() {
        for change in 0..n as u64 {
            let mut a = base.clone();
            a.inputs[slot] = !a.inputs[slot];
            a.randoms[slot] = change;
            let t = run_assignment(config, strategy, &a).unwrap();
            for p in 0..n {
                let dist = (p + n - u) % n;
                for r in 1..=dist.min(n) {
                    assert_eq!(t.sent(p, r), reference.sent(p, r), "u={u} p={p} r={r}");
                }
            }
        }
    }
}

#[test]
fn nothing_travels_faster_than_the_ring() {
    let c = RingConfig::all_honest(5).unwrap();
    let base = Assignment { inputs: bits(&[true, false, false, true, true]), randoms: vec![1, 2, 3, 4, 0] };
    causality_holds(&c, &Truthful::zeros(&c), &base);
    let c = nonadjacent();
    let space = enumerate_adaptive_strategies(&c, &[0, 1]);
    let base = Assignment { inputs: bits(&[true, false]), randoms: vec![1, 2] };
    for index in (0..space.len()).step_by(997) {
        let s = fixed_stream_forger(&c, space.get(index).unwrap()).unwrap();
        causality_holds(&c, &s, &base);
    }
}

#[test]
fn view_identity_holds_under_forgery() {
    let c = nonadjacent();
    let space = enumerate_fixed_strategies(&c, &IdPattern::ALL);
    let universe = Universe::new(&c);
    for index in (0..space.len()).step_by(7919) {
        let s = fixed_stream_forger(&c, space.get(index).unwrap()).unwrap();
        for a in universe.iter() {
            let t = run_assignment(&c, &s, &a).unwrap();
            for u in [1, 3] {
                check_view_identity(&t, &c, u);
            }
        }
    }
}

#[test]
fn larger_coalitions_never_do_worse() {
    let c = RingConfig::all_honest(4).unwrap();
    let empty = exact_distribution(&c, &Truthful::zeros(&c), &Limits::default()).unwrap();
    let mut last = rrl_core::analysis::coalition_utility(&empty, &UtilityModel { preferred: Bit::ONE });
    assert_eq!(last, Prob::new(1, 2));
    for honest in [&[1, 2, 3][..], &[1, 3], &[1]] {
        let c = RingConfig::with_honest(4, honest).unwrap();
        let space = enumerate_adaptive_strategies(&c, &[0, 1]);
        let best = best_response_search(&c, Bit::ONE, &space, &Limits::default()).unwrap().best_utility;
        assert!(best >= last, "honest {honest:?}: {best} < {last}");
        last = best;
    }
}

#[test]
fn mirrored_rigger_shares_one_leader() {
    let c = nonadjacent();
    let s = mirrored_relay_rigger(&c, Bit::ONE).unwrap();
    let universe = Universe::new(&c);
    let (mut u1, mut u3, mut other) = (0u64, 0u64, 0u64);
    for a in universe.iter() {
        let t = run_assignment(&c, &s, &a).unwrap();
        let l = t.leader(1).unwrap().id;
        assert_eq!(Some(l), t.leader(3).map(|x| x.id));
        match l {
            _ if l == c.id(1) => u1 += 1,
            _ if l == c.id(3) => u3 += 1,
            _ => other += 1,
        }
    }
    let total = universe.len() as u64;
    assert_eq!(Prob::new(u1, total), Prob::new(1, 4));
    assert_eq!(Prob::new(u3, total), Prob::new(1, 4));
    assert_eq!(Prob::new(other, total), Prob::new(1, 2));
}

#[test]
fn eight_node_rigger_exact() {
    let c = RingConfig::with_honest(8, &[1, 5]).unwrap();
    let s = parity_rigger(&c, Bit::ONE, IdPattern::Fresh, 0).unwrap();
    let e = evaluate_script(&c, &s, Bit::ONE, &Limits::default()).unwrap();
    assert_eq!(e.utility, Prob::new(81, 256));
    assert!(e.nodes.iter().all(|n| n.unconditional == Prob::new(9, 16)));
    assert_eq!(e.full_control_violations, 0);
}

#[test]
fn sampling_agrees_with_exact_values() {
    let c = nonadjacent();
    let adjacent = RingConfig::with_honest(4, &[2, 3]).unwrap();
    let cases: Vec<(&RingConfig, Box<dyn CoalitionStrategy>)> = vec![
        (&c, Box::new(parity_rigger(&c, Bit::ONE, IdPattern::Fresh, 0).unwrap())),
        (&c, Box::new(mirrored_relay_rigger(&c, Bit::ONE).unwrap())),
        (&adjacent, Box::new(parity_rigger(&adjacent, Bit::ONE, IdPattern::Echo, 1).unwrap())),
    ];
    let model = UtilityModel { preferred: Bit::ONE };
    for (config, strategy) in &cases {
        let exact = strategy_utility(config, strategy.as_ref(), Bit::ONE, &Limits::default()).unwrap();
        let exact = *exact.numer() as f64 / *exact.denom() as f64;
        let within = (0..100)
            .filter(|&seed| monte_carlo(config, strategy.as_ref(), &model, 2000, seed).unwrap().z_score(exact) <= 4.0)
            .count();
        assert!(within >= 99, "{within}/100 within 4 SE of {exact}");
    }
}

#[test]
fn definitional_check_matches_constancy() {
    for n in 2..=4usize {
        let entries = 1u32 << n;
        for bits in 0..(1u64 << entries) {
            let f = ConsensusFunction::from_bits(n, bits);
            assert_eq!(is_input_cheater_equilibrium(&f), satisfies_constancy(&f), "n={n} hex={}", f.to_hex());
        }
    }
    assert_eq!(equilibrium_functions_bruteforce(3).unwrap(), vec![ConsensusFunction::xor(3)]);
}

#[test]
fn xor_survives_exactly_on_odd_rings() {
    for n in 2..=10 {
        let f = ConsensusFunction::xor(n);
        assert_eq!(f.is_valid(), n % 2 == 1);
        assert_eq!(satisfies_constancy(&f), f.is_valid());
        assert_eq!(is_input_cheater_equilibrium(&f), f.is_valid());
    }
}

fn ring_case() -> impl Strategy<Value = (Vec<bool>, Vec<u64>)> {
    (2usize..=7).prop_flat_map(|n| (prop::collection::vec(any::<bool>(), n), prop::collection::vec(0..n as u64, n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn honest_decision_is_parity_with_leader((inputs, randoms) in ring_case()) {
        let (c, t, _) = run_honest(inputs.len(), &inputs, &randoms);
        let n = c.n();
        let leader = ((randoms.iter().sum::<u64>()) % n as u64) as usize;
        let total: u64 = inputs.iter().map(|&x| u64::from(x)).sum();
        let expected = Bit::parity(total + u64::from(inputs[leader]));
        for p in 0..n {
            prop_assert_eq!(t.decision(p), Decision::Decided(expected));
            prop_assert_eq!(t.leader(p).map(|l| l.id), Some(c.id(leader)));
        }
    }

    #[test]
    fn forged_self_election_follows_the_lie_set(index in any::<u128>(), point in 0u128..64) {
        let c = nonadjacent();
        let space = enumerate_fixed_strategies(&c, &IdPattern::ALL);
        let s = fixed_stream_forger(&c, space.get(index % space.len()).unwrap()).unwrap();
        let t = run_assignment(&c, &s, &Universe::new(&c).get(point)).unwrap();
        for u in forge_targets(&c) {
            check_view_identity(&t, &c, u);
            if t.leader(u).is_some_and(|l| l.id == c.id(u)) {
                let view = compute_view_partition(&t, &c, u).unwrap();
                prop_assert_eq!(t.decision(u), Decision::Decided(Bit::parity(view.input_l)));
            }
        }
    }

    #[test]
    fn scripts_round_trip_through_json(index in any::<u128>()) {
        let c = nonadjacent();
        let space = enumerate_adaptive_strategies(&c, &[0, 1]);
        let script = space.get(index % space.len()).unwrap();
        let back: ForgeScript = serde_json::from_str(&script.to_json()).unwrap();
        prop_assert_eq!(back.digest(), script.digest());
        prop_assert_eq!(back, script);
    }

    #[test]
    fn functions_round_trip(n in 1usize..=4, bits in any::<u64>()) {
        let f = ConsensusFunction::from_bits(n, bits);
        prop_assert_eq!(ConsensusFunction::from_hex(n, &f.to_hex()).unwrap(), f.clone());
        let json = serde_json::to_string(&f).unwrap();
        prop_assert_eq!(serde_json::from_str::<ConsensusFunction>(&json).unwrap(), f);
    }
}
