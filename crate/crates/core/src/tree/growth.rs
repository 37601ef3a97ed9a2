use super::TreeError;
use crate::numeric::ln;

/// Polynomial growth over the upper half of the materialised generations.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PgrEstimate {
    pub value: f64,
    /// Some generation in the window is empty.
    pub died: bool,
}

pub(crate) fn pgr_from_log_sizes(depth_cap: u32, log_size: impl Fn(u32) -> f64) -> Result<PgrEstimate, TreeError> {
    if depth_cap < 16 {
        return Err(TreeError::TooShallow(depth_cap));
    }
    let mut value = f64::INFINITY;
    for n in depth_cap / 2..=depth_cap {
        let s = log_size(n);
        if s == f64::NEG_INFINITY {
            return Ok(PgrEstimate { value: 0.0, died: true });
        }
        value = value.min(s / ln(f64::from(n)));
    }
    Ok(PgrEstimate { value, died: false })
}
