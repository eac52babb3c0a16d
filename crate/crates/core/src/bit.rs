use std::fmt;
use std::ops::{BitXor, Not};

use serde::{Deserialize, Serialize};

/// A single binary value: a node's input or a consensus decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Bit(bool);

impl Bit {
    pub const ZERO: Bit = Bit(false);
    pub const ONE: Bit = Bit(true);

    pub const fn new(value: bool) -> Self {
        Bit(value)
    }

    /// Accepts only 0 and 1.
    pub fn from_u32(value: u32) -> Option<Self> {
        match value {
            0 => Some(Bit::ZERO),
            1 => Some(Bit::ONE),
            _ => None,
        }
    }

    /// Low bit of `value`.
    pub const fn parity(value: u64) -> Self {
        Bit(value % 2 == 1)
    }

    pub const fn is_one(self) -> bool {
        self.0
    }

    pub const fn as_u32(self) -> u32 {
        self.0 as u32
    }

    pub const fn as_u64(self) -> u64 {
        self.0 as u64
    }
}

impl Not for Bit {
    type Output = Bit;
    fn not(self) -> Bit {
        Bit(!self.0)
    }
}

impl BitXor for Bit {
    type Output = Bit;
    fn bitxor(self, rhs: Bit) -> Bit {
        Bit(self.0 ^ rhs.0)
    }
}

impl From<bool> for Bit {
    fn from(value: bool) -> Self {
        Bit(value)
    }
}

impl From<Bit> for u8 {
    fn from(bit: Bit) -> u8 {
        bit.0 as u8
    }
}

impl TryFrom<u8> for Bit {
    type Error = String;
    fn try_from(value: u8) -> Result<Self, Self::Error> {
        Bit::from_u32(value.into()).ok_or_else(|| format!("expected 0 or 1, got {value}"))
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u32())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn domain() {
        assert_eq!(Bit::from_u32(0), Some(Bit::ZERO));
        assert_eq!(Bit::from_u32(1), Some(Bit::ONE));
        assert_eq!(Bit::from_u32(2), None);
        assert!(Bit::try_from(7u8).is_err());
    }

    #[test]
    fn algebra() {
        assert_eq!(!Bit::ZERO, Bit::ONE);
        assert_eq!(Bit::ONE ^ Bit::ONE, Bit::ZERO);
        assert_eq!(Bit::parity(5), Bit::ONE);
        assert_eq!(Bit::parity(4), Bit::ZERO);
    }

    #[test]
    fn serde_as_integer() {
        assert_eq!(serde_json::to_string(&Bit::ONE).unwrap(), "1");
        let b: Bit = serde_json::from_str("0").unwrap();
        assert_eq!(b, Bit::ZERO);
        assert!(serde_json::from_str::<Bit>("2").is_err());
    }
}
