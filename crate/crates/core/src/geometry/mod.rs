//! Planar geometry and the quasi-static two-finger simulator.

mod contact;
mod hand;
mod pose;
mod shape;
mod sim;
mod vec2;

pub use contact::{detect_contact, signed_clearance, ContactFeature, ContactQuery, ObjectFeature, FACE_ALIGN_DEG, MERGE_TOL};
pub use hand::{finger_segment, FingerSegment, FrictionMode, HandParams, Side};
pub use pose::{wrap_angle, Pose2};
pub use shape::{
    builtin_shape, cube_cylinder, generate_builtin_catalog, load_catalog, parse_catalog, regular_polygon, star,
    three_cylinder, write_catalog, Shape2, ShapeRecord, ARC_SEGMENTS, BUILTIN_CATALOG, SHAPE_NAMES,
};
pub use sim::{
    apply_action, apply_action_traced, close_finger, object_in_workspace, step_pivot, step_slide, SimState, StepOutcome, StepStatus, Substep,
    HOLD_TOL, ROOT_MAX_ITER, ROOT_TOL,
};
pub use vec2::Vec2;
