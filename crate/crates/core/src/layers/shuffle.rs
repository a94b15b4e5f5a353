//! Channel shuffle-and-split: the deterministic two-group interleave used
//! ahead of the dual-path blocks.

use crate::error::{Error, Result};
use crate::tensor::ops::select_channels;
use crate::tensor::{Tape, Tensor};

/// Interleaves channels with the fixed two-group transpose pattern (group `g`
/// takes original channels `2i + g`) and splits the result into halves. The
/// combined mapping is a channel permutation; its backward applies the
/// inverse.
pub fn channel_shuffle_split(tape: &Tape, x: &Tensor) -> Result<(Tensor, Tensor)> {
    let (_, c, _, _) = x.dims4("channel_shuffle_split")?;
    if c % 2 != 0 {
        return Err(Error::shape("channel_shuffle_split", format!("channel count {} must be even", c)));
    }
    let evens: Vec<usize> = (0..c / 2).map(|i| 2 * i).collect();
    let odds: Vec<usize> = (0..c / 2).map(|i| 2 * i + 1).collect();
    let a = select_channels(tape, x, evens)?;
    let b = select_channels(tape, x, odds)?;
    Ok((a, b))
}

/// Inverse of [`channel_shuffle_split`] composed with channel concatenation:
/// restores the original channel order from the concatenated groups.
pub fn channel_unshuffle(tape: &Tape, x: &Tensor) -> Result<Tensor> {
    let (_, c, _, _) = x.dims4("channel_unshuffle")?;
    if c % 2 != 0 {
        return Err(Error::shape("channel_unshuffle", format!("channel count {} must be even", c)));
    }
    let half = c / 2;
    let mut indices = Vec::with_capacity(c);
    for i in 0..half {
        indices.push(i);
        indices.push(half + i);
    }
    select_channels(tape, x, indices)
}
