use std::fmt;
use std::ops::Neg;

/// A ±1 opinion or Ising spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Spin {
    Plus,
    Minus,
}

impl Spin {
    #[inline]
    pub fn value(self) -> i32 {
        match self {
            Spin::Plus => 1,
            Spin::Minus => -1,
        }
    }

    /// Sign of a non-zero integer.
    #[inline]
    pub fn from_sign(x: i32) -> Spin {
        debug_assert!(x != 0);
        if x > 0 {
            Spin::Plus
        } else {
            Spin::Minus
        }
    }
}

impl Neg for Spin {
    type Output = Spin;

    fn neg(self) -> Spin {
        match self {
            Spin::Plus => Spin::Minus,
            Spin::Minus => Spin::Plus,
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spin::Plus => "+",
            Spin::Minus => "-",
        })
    }
}
