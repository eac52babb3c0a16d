//! Which consensus functions survive an `n − 1` coalition of input cheaters.
//!
//! A consensus function maps the vector of declared inputs to the common output.
//! Fix an excluded node `v` whose input is uniform on `{0,1}`. The coalition, all
//! other nodes, may declare any inputs it likes, and it prefers some bit `b`. A
//! function is an equilibrium when no declaration earns the coalition a higher
//! chance of `b` than declaring its true inputs would.
//!
//! Validity pins the all-ones and all-zeros entries. Backwards induction on the
//! number of ones the coalition declares then forces every other entry, and the
//! forced value at the all-zeros profile disagrees with validity exactly when `n`
//! is even. For odd `n` the forced table is total parity.
//!
//! ```
//! use rrl_core::impossibility::{derive_constraints, ConsensusFunction, Derivation};
//!
//! assert!(matches!(derive_constraints(4), Derivation::Contradiction { .. }));
//! match derive_constraints(3) {
//!     Derivation::UniqueFunction(f) => assert_eq!(f, ConsensusFunction::xor(3)),
//!     other => panic!("{other:?}"),
//! }
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bit::Bit;
use crate::error::{Error, Result};

/// Largest arity for which [`ConsensusFunction`] tables are materialized.
pub const MAX_ARITY: usize = 20;

/// Largest arity [`equilibrium_functions_bruteforce`] accepts.
pub const BRUTEFORCE_MAX_N: usize = 4;

/// A truth table over `{0,1}^n`; bit `i` of an index is the input of node `i`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ConsensusFunction {
    n: usize,
    table: Vec<bool>,
}

impl ConsensusFunction {
    pub fn new(n: usize, table: Vec<bool>) -> Result<Self> {
        if n == 0 || n > MAX_ARITY {
            return Err(Error::Unsupported(format!("arity {n} is outside 1..={MAX_ARITY}")));
        }
        if table.len() != 1 << n {
            return Err(Error::LengthMismatch { expected: 1 << n, actual: table.len() });
        }
        Ok(ConsensusFunction { n, table })
    }

    pub fn from_fn(n: usize, f: impl Fn(usize) -> bool) -> Self {
        assert!((1..=MAX_ARITY).contains(&n), "arity out of range");
        ConsensusFunction { n, table: (0..1usize << n).map(f).collect() }
    }

    /// Table whose bit `i` is entry `i`. Needs `n ≤ 6`.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        assert!(n <= 6, "a u64 holds at most 64 entries");
        Self::from_fn(n, |x| (bits >> x) & 1 == 1)
    }

    pub fn xor(n: usize) -> Self {
        Self::from_fn(n, |x| x.count_ones() % 2 == 1)
    }

    pub fn constant(n: usize, value: Bit) -> Self {
        Self::from_fn(n, |_| value.is_one())
    }

    pub fn majority(n: usize) -> Self {
        Self::from_fn(n, |x| 2 * x.count_ones() as usize > n)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn table(&self) -> &[bool] {
        &self.table
    }

    pub fn eval(&self, x: usize) -> Bit {
        Bit::new(self.table[x])
    }

    /// `f(0…0) = 0` and `f(1…1) = 1`.
    pub fn is_valid(&self) -> bool {
        !self.table[0] && self.table[(1 << self.n) - 1]
    }

    /// Hex digits, most significant first, where bit `i` of the number is entry `i`.
    pub fn to_hex(&self) -> String {
        let digits = (self.table.len() / 4).max(1);
        (0..digits)
            .rev()
            .map(|d| {
                let nibble = (0..4)
                    .filter(|&k| self.table.get(4 * d + k).copied().unwrap_or(false))
                    .fold(0u32, |acc, k| acc | 1 << k);
                char::from_digit(nibble, 16).expect("nibble")
            })
            .collect()
    }

    pub fn from_hex(n: usize, hex: &str) -> Result<Self> {
        if n == 0 || n > MAX_ARITY {
            return Err(Error::Unsupported(format!("arity {n} is outside 1..={MAX_ARITY}")));
        }
        let size = 1usize << n;
        let digits: Vec<u32> = hex
            .chars()
            .rev()
            .map(|c| c.to_digit(16).ok_or_else(|| Error::Unsupported(format!("bad hex digit {c:?}"))))
            .collect::<Result<_>>()?;
        if digits.len() != (size / 4).max(1) || (size < 4 && digits[0] >> size != 0) {
            return Err(Error::Unsupported(format!("{hex:?} is not a table of {size} entries")));
        }
        Ok(Self::from_fn(n, |x| (digits[x / 4] >> (x % 4)) & 1 == 1))
    }

    /// A recognizable name, if the table is one of the usual suspects.
    pub fn name(&self) -> Option<String> {
        let n = self.n;
        if *self == Self::xor(n) {
            Some("xor".into())
        } else if self.table.iter().zip(Self::xor(n).table).all(|(&a, b)| a != b) {
            Some("xnor".into())
        } else if self.table.iter().all(|&b| !b) {
            Some("constant_0".into())
        } else if self.table.iter().all(|&b| b) {
            Some("constant_1".into())
        } else if n % 2 == 1 && *self == Self::majority(n) {
            Some("majority".into())
        } else {
            (0..n)
                .find(|&i| self.table.iter().enumerate().all(|(x, &b)| b == ((x >> i) & 1 == 1)))
                .map(|i| format!("dictator_{i}"))
        }
    }

    fn with(&self, z: usize, v: usize, bit: bool) -> bool {
        // `z` holds the other n − 1 inputs in position order with `v` removed.
        let low = z & ((1 << v) - 1);
        let high = (z >> v) << (v + 1);
        self.table[high | low | (usize::from(bit) << v)]
    }
}

impl fmt::Debug for ConsensusFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ConsensusFunction({}, 0x{})", self.n, self.to_hex())
    }
}

impl Serialize for ConsensusFunction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            n: usize,
            hex: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            name: Option<String>,
        }
        Repr { n: self.n, hex: self.to_hex(), name: self.name() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConsensusFunction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            n: usize,
            hex: String,
        }
        let r = Repr::deserialize(d)?;
        ConsensusFunction::from_hex(r.n, &r.hex).map_err(serde::de::Error::custom)
    }
}

/// What the excluded node `v` holds and what the coalition declares.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclarationProfile {
    pub v_input: Bit,
    pub coalition_decls: Vec<Bit>,
    pub ones: usize,
    pub alpha: Bit,
}

impl DeclarationProfile {
    pub fn new(v_input: Bit, coalition_decls: Vec<Bit>) -> Self {
        let ones = coalition_decls.iter().filter(|b| b.is_one()).count();
        DeclarationProfile { v_input, coalition_decls, ones, alpha: Bit::parity(ones as u64) }
    }
}

/// The decision the induction forces on `v` when the coalition declares `ones_j` ones:
/// `¬(I(v) ⊕ α)` for even `n`, `I(v) ⊕ α` for odd `n`.
pub fn forced_decision(v_input: Bit, ones_j: usize, n: usize) -> Bit {
    debug_assert!(ones_j < n, "the coalition has n − 1 members");
    let d = v_input ^ Bit::parity(ones_j as u64);
    if n.is_multiple_of(2) {
        !d
    } else {
        d
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "result")]
pub enum Derivation {
    /// The induction forces `forced` where validity requires `required`.
    Contradiction {
        witness: DeclarationProfile,
        forced: Bit,
        required: Bit,
    },
    UniqueFunction(ConsensusFunction),
}

/// Replay the backwards induction on the number of ones declared by the coalition.
///
/// `D(i, k)` is the decision when `v` holds `i` and the coalition declares `k` ones.
/// Seeds: `D(1, n − 1) = 1` by validity. Steps, for `k` from `n − 1` down to 1:
/// `D(0, k) = ¬D(1, k)`, since flipping `v` must flip the outcome or the coalition
/// gains by declaring the profile where it does not; and `D(1, k − 1) = D(0, k)`,
/// since both describe a vector with `k` ones and agreement carries the value
/// between the two choices of excluded node. Finally `D(0, 0) = ¬D(1, 0)` is
/// compared with the validity value 0.
///
/// # Panics
///
/// For odd `n ≤ MAX_ARITY`, if the assembled table is not total parity. Larger odd
/// `n` get no table and panic too; callers stay well below.
pub fn derive_constraints(n: usize) -> Derivation {
    assert!(n >= 2, "a ring needs two nodes");
    let mut d = vec![[None::<Bit>; 2]; n];
    d[n - 1][1] = Some(Bit::ONE);
    for k in (0..n).rev() {
        let one = d[k][1].expect("seeded or derived from k + 1");
        d[k][0] = Some(!one);
        if k > 0 {
            d[k - 1][1] = d[k][0];
        }
    }
    for (k, row) in d.iter().enumerate() {
        debug_assert_eq!(row[0], Some(forced_decision(Bit::ZERO, k, n)));
        debug_assert_eq!(row[1], Some(forced_decision(Bit::ONE, k, n)));
    }

    let forced = d[0][0].expect("derived");
    if forced != Bit::ZERO {
        return Derivation::Contradiction {
            witness: DeclarationProfile::new(Bit::ZERO, vec![Bit::ZERO; n - 1]),
            forced,
            required: Bit::ZERO,
        };
    }
    // Every node sees the same vector; each reading must give the same table.
    let table = ConsensusFunction::from_fn(n, |x| {
        let ones = x.count_ones() as usize;
        let mut value = None;
        for v in 0..n {
            let own = (x >> v) & 1;
            let got = d[ones - own][own].expect("derived").is_one();
            assert!(value.is_none_or(|b| b == got), "readings disagree at {x:#b}");
            value = Some(got);
        }
        value.expect("n ≥ 2")
    });
    assert_eq!(table, ConsensusFunction::xor(n), "the surviving table must be parity");
    Derivation::UniqueFunction(table)
}

/// `U_b(z)` doubled: how many of `v`'s two inputs lead to `b` given the others declare `z`.
fn twice_utility(f: &ConsensusFunction, v: usize, z: usize, b: bool) -> u8 {
    u8::from(f.with(z, v, false) == b) + u8::from(f.with(z, v, true) == b)
}

/// The deviation inequality checked literally: for every excluded node, preferred
/// bit, true coalition inputs `x` and declaration `y`, `U_b(y) ≤ U_b(x)`.
pub fn is_input_cheater_equilibrium(f: &ConsensusFunction) -> bool {
    if !f.is_valid() {
        return false;
    }
    let others = 1usize << (f.n - 1);
    for v in 0..f.n {
        for b in [false, true] {
            for x in 0..others {
                let honest = twice_utility(f, v, x, b);
                if (0..others).any(|y| twice_utility(f, v, y, b) > honest) {
                    return false;
                }
            }
        }
    }
    true
}

/// Equivalent form: valid, and for every `v` the count `f(z, v←0) + f(z, v←1)`
/// does not depend on `z`.
pub fn satisfies_constancy(f: &ConsensusFunction) -> bool {
    f.is_valid()
        && (0..f.n).all(|v| {
            let first = twice_utility(f, v, 0, true);
            (1..1usize << (f.n - 1)).all(|z| twice_utility(f, v, z, true) == first)
        })
}

/// Every table on `n ≤ 4` inputs that passes [`is_input_cheater_equilibrium`], in table order.
pub fn equilibrium_functions_bruteforce(n: usize) -> Result<Vec<ConsensusFunction>> {
    if n < 2 {
        return Err(Error::RingTooSmall(n));
    }
    if n > BRUTEFORCE_MAX_N {
        let required = 1u128.checked_shl(1 << n).unwrap_or(u128::MAX);
        return Err(Error::Capacity { required, bound: 1 << (1 << BRUTEFORCE_MAX_N) });
    }
    Ok((0..1u64 << (1 << n))
        .map(|bits| ConsensusFunction::from_bits(n, bits))
        .filter(is_input_cheater_equilibrium)
        .collect())
}
