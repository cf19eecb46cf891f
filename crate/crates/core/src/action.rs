//! Hybrid discrete/continuous action shared by the simulator, the RL agent
//! and the diffusion policy.

use serde::{Deserialize, Serialize};

use crate::error::ActionError;
use crate::geometry::{FrictionMode, Side};
use crate::Real;

/// Largest finger increment per action, degrees.
pub const MAX_DELTA_DEG: f64 = 18.9;

/// Largest finger increment per action, radians.
pub fn max_delta<T: Real>() -> T {
    T::lit(MAX_DELTA_DEG.to_radians())
}

/// Number of discrete operating modes.
pub const NUM_MODES: usize = 6;

/// Discrete operating modes.
///
/// | mode | name              | left   | right  |
/// |------|-------------------|--------|--------|
/// | 0    | slide up right    | PC, HF | TC, LF |
/// | 1    | slide down right  | TC, HF | PC, LF |
/// | 2    | slide up left     | TC, LF | PC, HF |
/// | 3    | slide down left   | PC, LF | TC, HF |
/// | 4    | rotate clockwise  | TC, HF | PC, HF |
/// | 5    | rotate anticlock. | PC, HF | TC, HF |
///
/// PC = position controlled, TC = torque controlled, HF/LF = high/low
/// friction. The continuous delta always *opens* the position-controlled
/// finger (`q_pc -= delta`); the torque-controlled finger follows. With the
/// hand frame of [`crate::geometry::HandParams`] this moves the object away
/// from the palm in modes 0 and 2 and towards it in modes 1 and 3. Mode 4
/// turns the object towards +theta and mode 5 towards -theta in that frame,
/// i.e. the rotation senses in the names are those seen when looking at the
/// palm from the fingertip side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ActionMode {
    SlideUpRight = 0,
    SlideDownRight = 1,
    SlideUpLeft = 2,
    SlideDownLeft = 3,
    RotateCw = 4,
    RotateCcw = 5,
}

impl ActionMode {
    pub const ALL: [ActionMode; NUM_MODES] = [
        ActionMode::SlideUpRight,
        ActionMode::SlideDownRight,
        ActionMode::SlideUpLeft,
        ActionMode::SlideDownLeft,
        ActionMode::RotateCw,
        ActionMode::RotateCcw,
    ];

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Finger under position control.
    pub fn position_controlled(self) -> Side {
        match self {
            ActionMode::SlideUpRight | ActionMode::SlideDownLeft | ActionMode::RotateCcw => Side::Left,
            ActionMode::SlideDownRight | ActionMode::SlideUpLeft | ActionMode::RotateCw => Side::Right,
        }
    }

    /// Friction of (left, right).
    pub fn frictions(self) -> [FrictionMode; 2] {
        use FrictionMode::*;
        match self {
            ActionMode::SlideUpRight | ActionMode::SlideDownRight => [High, Low],
            ActionMode::SlideUpLeft | ActionMode::SlideDownLeft => [Low, High],
            ActionMode::RotateCw | ActionMode::RotateCcw => [High, High],
        }
    }

    pub fn is_slide(self) -> bool {
        self.index() < 4
    }
}

/// Discrete mode plus a non-negative finger increment in radians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridAction<T> {
    pub mode: u8,
    pub delta: T,
}

impl<T: Real> HybridAction<T> {
    pub fn new(mode: u8, delta: T) -> Self {
        Self { mode, delta }
    }

    pub fn from_degrees(mode: u8, delta_deg: f64) -> Self {
        Self { mode, delta: T::lit(delta_deg.to_radians()) }
    }

    pub fn validate(&self) -> Result<ActionMode, ActionError> {
        let mode = ActionMode::from_index(self.mode as usize).ok_or(ActionError::InvalidMode(self.mode))?;
        if !(self.delta >= T::zero() && self.delta <= max_delta::<T>()) {
            return Err(ActionError::DeltaOutOfRange(self.delta.to_f64().unwrap_or(f64::NAN).to_degrees()));
        }
        Ok(mode)
    }

    pub fn action_mode(&self) -> Option<ActionMode> {
        ActionMode::from_index(self.mode as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_rows() {
        use FrictionMode::*;
        assert_eq!(ActionMode::RotateCw.frictions(), [High, High]);
        assert_eq!(ActionMode::RotateCw.position_controlled(), Side::Right);
        assert_eq!(ActionMode::SlideUpLeft.frictions(), [Low, High]);
        assert_eq!(ActionMode::SlideUpLeft.position_controlled(), Side::Right);
        assert_eq!(ActionMode::SlideUpRight.frictions(), [High, Low]);
        assert_eq!(ActionMode::SlideUpRight.position_controlled(), Side::Left);
        assert_eq!(ActionMode::SlideDownRight.position_controlled(), Side::Right);
        assert_eq!(ActionMode::SlideDownLeft.frictions(), [Low, High]);
        assert_eq!(ActionMode::RotateCcw.position_controlled(), Side::Left);
    }

    #[test]
    fn delta_bounds() {
        assert!(HybridAction::<f64>::from_degrees(0, 18.9).validate().is_ok());
        assert!(HybridAction::<f64>::from_degrees(0, 0.0).validate().is_ok());
        assert!(matches!(
            HybridAction::<f64>::from_degrees(0, 20.0).validate(),
            Err(ActionError::DeltaOutOfRange(_))
        ));
        assert!(HybridAction::<f64>::new(0, -1e-9).validate().is_err());
        assert!(matches!(HybridAction::<f64>::new(6, 0.1).validate(), Err(ActionError::InvalidMode(6))));
    }
}
