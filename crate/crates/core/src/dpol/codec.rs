use crate::action::{max_delta, NUM_MODES};
use crate::Action;

/// Width of an encoded action.
pub const ACTION_DIM: usize = 2;

const MODE_MID: f64 = (NUM_MODES - 1) as f64 / 2.0;

/// Maps an action to the diffusion model's `[-1, 1]^2` box.
pub fn encode_action(a: &Action) -> [f64; ACTION_DIM] {
    [(a.mode as f64 - MODE_MID) / MODE_MID, 2.0 * a.delta / max_delta::<f64>() - 1.0]
}

/// Inverse of [`encode_action`] for arbitrary inputs: the mode is rounded
/// to the nearest index and both components are clamped into range.
pub fn decode_action(code: &[f64; ACTION_DIM]) -> Action {
    let m = (MODE_MID * code[0] + MODE_MID).round();
    let mode = if m.is_nan() { 0.0 } else { m.clamp(0.0, (NUM_MODES - 1) as f64) };
    let frac = ((code[1] + 1.0) / 2.0).clamp(0.0, 1.0);
    let frac = if frac.is_nan() { 0.0 } else { frac };
    Action::new(mode as u8, frac * max_delta::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_of_the_box() {
        assert_eq!(encode_action(&Action::new(5, max_delta())), [1.0, 1.0]);
        assert_eq!(encode_action(&Action::new(0, 0.0)), [-1.0, -1.0]);
        assert_eq!(decode_action(&[3.0, -7.0]), Action::new(5, 0.0));
        assert_eq!(decode_action(&[-0.21, 0.0]).mode, 2);
    }

    #[test]
    fn round_trip_is_exact_for_every_mode() {
        for m in 0..6u8 {
            let a = Action::new(m, 0.123);
            let b = decode_action(&encode_action(&a));
            assert_eq!(a.mode, b.mode);
            assert!((a.delta - b.delta).abs() < 1e-15);
        }
    }
}
