//! Sylvester Hadamard matrices, queried entry by entry.
//!
//! `H[i][j] = (-1)^popcount(i & j)`, which is the same matrix the block
//! recursion `H_{r+1} = [[H_r, H_r], [H_r, -H_r]]` produces. Nothing here
//! materializes a matrix; the domain can be large enough that `order` is in
//! the tens of thousands.

use crate::error::{Error, Result};

/// A Hadamard matrix of order `2^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct HadamardOrder {
    exponent: u32,
}

impl HadamardOrder {
    /// Largest supported exponent. Packed reports hold `2r+1 <= 63` bits.
    pub const MAX_EXPONENT: u32 = 31;

    pub fn new(exponent: u32) -> Result<Self> {
        if exponent == 0 || exponent > Self::MAX_EXPONENT {
            return Err(Error::InvalidParameter(format!(
                "hadamard exponent must be in 1..={}, got {exponent}",
                Self::MAX_EXPONENT
            )));
        }
        Ok(Self { exponent })
    }

    /// Smallest order that fits `domain_size` items next to the reserved row 0.
    pub fn for_domain(domain_size: u64) -> Result<Self> {
        if domain_size == 0 {
            return Err(Error::InvalidParameter("domain size must be at least 1".into()));
        }
        let needed = domain_size + 1;
        let exponent = 64 - (needed - 1).leading_zeros();
        Self::new(exponent.max(1))
    }

    /// Wraps an order that must be a power of two.
    pub fn from_order(order: u64) -> Result<Self> {
        if !order.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "hadamard order must be a power of two, got {order}"
            )));
        }
        Self::new(order.trailing_zeros())
    }

    pub fn exponent(self) -> u32 {
        self.exponent
    }

    pub fn order(self) -> u64 {
        1u64 << self.exponent
    }

    /// Number of items this order can encode (all rows except row 0).
    pub fn capacity(self) -> u64 {
        self.order() - 1
    }

    fn check(self, index: u64) -> Result<()> {
        if index >= self.order() {
            return Err(Error::IndexOutOfBounds {
                index,
                order: self.order(),
            });
        }
        Ok(())
    }

    fn check_row(self, row: u64) -> Result<()> {
        self.check(row)?;
        if row == 0 {
            return Err(Error::ReservedRow);
        }
        Ok(())
    }
}

/// Row assigned to `item`. Row 0 is all ones and carries no information.
pub fn row_of_item(item: u32, order: HadamardOrder) -> Result<u64> {
    let row = item as u64 + 1;
    if row >= order.order() {
        return Err(Error::DomainOverflow {
            item: item as u64,
            domain: order.capacity(),
        });
    }
    Ok(row)
}

/// `true` when `H[row][col] == -1`. No bounds checks.
#[inline]
pub fn is_negative(row: u64, col: u64) -> bool {
    (row & col).count_ones() & 1 == 1
}

/// `H[row][col]` as `+1` or `-1`.
#[inline]
pub fn sign(row: u64, col: u64) -> i8 {
    if is_negative(row, col) {
        -1
    } else {
        1
    }
}

pub fn entry(row: u64, col: u64, order: HadamardOrder) -> Result<i8> {
    order.check(row)?;
    order.check(col)?;
    Ok(sign(row, col))
}

pub fn row_vector(row: u64, order: HadamardOrder) -> Result<Vec<i8>> {
    order.check_row(row)?;
    Ok((0..order.order()).map(|col| sign(row, col)).collect())
}

/// Columns where row `row` equals `target` (which must be `1` or `-1`).
pub fn positions_of_sign(row: u64, order: HadamardOrder, target: i8) -> Result<Vec<u64>> {
    order.check_row(row)?;
    if target != 1 && target != -1 {
        return Err(Error::InvalidParameter(format!("sign must be +1 or -1, got {target}")));
    }
    Ok((0..order.order())
        .filter(|&col| sign(row, col) == target)
        .collect())
}

/// Maps a uniformly drawn column onto a uniform column of the requested sign.
///
/// XOR with the lowest set bit of `row` flips the sign and is a bijection
/// between the `+1` and `-1` halves of the row.
#[inline]
pub(crate) fn fold_to_sign(row: u64, col: u64, negative: bool) -> u64 {
    if is_negative(row, col) == negative {
        col
    } else {
        col ^ (row & row.wrapping_neg())
    }
}
