//! Context windows for generating streams longer than the training window.
//!
//! Up to `⌈0.4 W⌉` tokens the model sees the whole prefix. From then on it
//! sees only the most recent `⌊0.3 W⌋` tokens.

use serde::{Deserialize, Serialize};

use super::MdpoError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowStep {
    pub context_start: usize,
    pub context_end: usize,
    pub emit_position: usize,
}

/// First position that uses a sliding context: `⌈0.4 W⌉`.
pub fn slide_start(train_window: usize) -> usize {
    (4 * train_window).div_ceil(10)
}

/// Context length once sliding: `⌊0.3 W⌋`.
pub fn retained_tokens(train_window: usize) -> usize {
    3 * train_window / 10
}

pub fn sliding_window_schedule(
    train_window: usize,
    stream_length: usize,
) -> Result<Vec<WindowStep>, MdpoError> {
    if train_window < 10 || stream_length == 0 {
        return Err(MdpoError::InvalidSchedule {
            window: train_window,
            length: stream_length,
        });
    }
    let start = slide_start(train_window);
    let keep = retained_tokens(train_window);
    Ok((0..stream_length)
        .map(|pos| WindowStep {
            context_start: if pos < start { 0 } else { pos - keep },
            context_end: pos,
            emit_position: pos,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_token_window() {
        let s = sliding_window_schedule(100, 50).unwrap();
        assert_eq!((s[39].context_start, s[39].context_end), (0, 39));
        assert_eq!((s[40].context_start, s[40].context_end), (10, 40));
    }

    #[test]
    fn short_stream_never_slides() {
        let s = sliding_window_schedule(100, 40).unwrap();
        assert!(s.iter().all(|w| w.context_start == 0));
    }

    #[test]
    fn small_window_keeps_three() {
        let s = sliding_window_schedule(10, 1001).unwrap();
        assert_eq!(s[1000].context_end - s[1000].context_start, 3);
        assert_eq!(slide_start(10), 4);
        assert_eq!(slide_start(15), 6);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(sliding_window_schedule(9, 5).is_err());
        assert!(sliding_window_schedule(10, 0).is_err());
    }
}
