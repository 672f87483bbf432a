//! Self-evaluation of tracking quality: a recurrent binary classifier over
//! the last K similarity maps that predicts whether the current prediction
//! is correct. Its verdict gates model updates and feeds the absence rule.

mod io;
mod net;
mod train;

pub use io::{load_model, save_model};
pub use net::{Arch, Layout, SelfEvalNet};
pub use train::{
    accuracy, backward, loss, synthetic_separable_dataset, train, EpochMetrics, EvalSample,
    TrainConfig, TrainOutcome,
};

use crate::search::TrackerState;
use crate::Result;

/// Approval gate over the tracker's map history: true iff the history holds
/// exactly K maps and the classifier output is at least 0.5. Shorter
/// histories are rejected outright (conservative cold start).
pub fn approve(net: &SelfEvalNet, state: &TrackerState) -> Result<bool> {
    let history = state.map_history();
    if history.len() < net.arch().k {
        return Ok(false);
    }
    let start = history.len() - net.arch().k;
    let g = net.forward(&history[start..])?;
    Ok(g >= 0.5)
}
