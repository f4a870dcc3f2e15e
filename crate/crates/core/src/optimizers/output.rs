use crate::error::{Error, Result};
use crate::oracle::SampleStream;
use crate::vecmath::DenseVector;

/// Uniform index in `0..len`.
pub fn select_index(len: usize, stream: &mut SampleStream) -> Result<usize> {
    if len == 0 {
        return Err(Error::invalid("cannot select an output from an empty trajectory"));
    }
    Ok(stream.uniform_index(len))
}

/// Picks `x̄_T` uniformly from `x_1, …, x_T`. Returns the 0-based position
/// alongside the iterate.
pub fn select_output<'a>(
    trajectory: &'a [DenseVector],
    stream: &mut SampleStream,
) -> Result<(usize, &'a DenseVector)> {
    let i = select_index(trajectory.len(), stream)?;
    Ok((i, &trajectory[i]))
}
