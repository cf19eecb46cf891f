//! Quasi-static stepping of the two-finger hand.
//!
//! Low-friction contacts slide without friction, high-friction contacts
//! stick, inertia is ignored. A slide keeps the object rigidly attached to
//! the high-friction finger while the torque-controlled finger is re-solved
//! to stay in contact; a pivot keeps both contact points fixed on the object
//! and on the fingers.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::contact::{detect_contact, signed_clearance, ContactFeature, ContactQuery};
use super::{FrictionMode, HandParams, Pose2, Shape2, Side, Vec2};
use crate::action::{ActionMode, HybridAction};
use crate::error::{ActionError, GeometryError};
use crate::Real;

/// Root-finder tolerance on the torque-controlled joint angle (rad).
pub const ROOT_TOL: f64 = 1e-9;
/// Root-finder iteration cap.
pub const ROOT_MAX_ITER: usize = 100;
/// Both fingers must be within this clearance (m) for the object to be held.
pub const HOLD_TOL: f64 = 1e-6;
/// Penetration accepted for a sticking pivot candidate (m).
const PIVOT_PEN_TOL: f64 = 1e-9;
/// Feature transitions allowed inside a single pivot substep.
const MAX_TRANSITIONS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StepStatus {
    Ok,
    LostContact,
    OutOfRange,
    JointLimit,
    Jammed,
}

impl StepStatus {
    pub fn is_ok(self) -> bool {
        self == StepStatus::Ok
    }

    pub fn code(self) -> u8 {
        match self {
            StepStatus::Ok => 0,
            StepStatus::LostContact => 1,
            StepStatus::OutOfRange => 2,
            StepStatus::JointLimit => 3,
            StepStatus::Jammed => 4,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => StepStatus::Ok,
            1 => StepStatus::LostContact,
            2 => StepStatus::OutOfRange,
            3 => StepStatus::JointLimit,
            4 => StepStatus::Jammed,
            _ => return None,
        })
    }
}

/// Full simulator state.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T> {
    /// Joint angles indexed by [`Side::index`].
    pub q: [T; 2],
    pub friction: [FrictionMode; 2],
    pub object_pose: Pose2<T>,
    pub contacts: [ContactFeature<T>; 2],
    pub shape: Arc<Shape2<T>>,
    pub params: HandParams<T>,
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome<T> {
    pub new_state: SimState<T>,
    pub status: StepStatus,
}

impl<T: Real> SimState<T> {
    /// Places the object at `pose` and closes each finger from its open limit
    /// until it first touches the object.
    pub fn held(shape: Arc<Shape2<T>>, params: HandParams<T>, pose: Pose2<T>) -> Result<Self, GeometryError> {
        params.validate()?;
        if !object_in_workspace(&params, &shape, &pose) {
            return Err(GeometryError::NotHeld);
        }
        let mut q = [T::zero(); 2];
        for side in Side::BOTH {
            q[side.index()] = close_finger(&params, side, &shape, &pose).ok_or(GeometryError::NotHeld)?;
        }
        let contacts = detect_both(&params, &shape, &pose, q).ok_or(GeometryError::NotHeld)?;
        Ok(Self {
            q,
            friction: [FrictionMode::High; 2],
            object_pose: pose,
            contacts,
            shape,
            params,
            steps: 0,
        })
    }

    pub fn q_left(&self) -> T {
        self.q[0]
    }

    pub fn q_right(&self) -> T {
        self.q[1]
    }

    pub fn segment(&self, side: Side) -> super::FingerSegment<T> {
        self.params.segment_unchecked(side, self.q[side.index()])
    }

    pub fn clearance(&self, side: Side) -> T {
        signed_clearance(&self.segment(side), &self.shape, &self.object_pose)
    }

    /// Both fingers touch the object within [`HOLD_TOL`].
    pub fn is_held(&self) -> bool {
        let tol = T::lit(HOLD_TOL);
        Side::BOTH.iter().all(|&s| self.clearance(s).abs() < tol)
    }

    /// Contact point seen from the finger and from the object.
    pub fn contact_points(&self, side: Side) -> (Vec2<T>, Vec2<T>) {
        let c = &self.contacts[side.index()];
        let finger = self.segment(side).point_at(c.s);
        let object = self.object_pose.transform(c.body_point(&self.shape));
        (finger, object)
    }
}

/// Centroid inside the workspace box and no vertex below the palm line.
pub fn object_in_workspace<T: Real>(params: &HandParams<T>, shape: &Shape2<T>, pose: &Pose2<T>) -> bool {
    let (lo, hi) = (params.workspace_min, params.workspace_max);
    if !(pose.x >= lo.x && pose.x <= hi.x && pose.y >= lo.y && pose.y <= hi.y) {
        return false;
    }
    let palm = params.base_left.y.min(params.base_right.y);
    shape.vertices.iter().all(|&v| pose.transform(v).y >= palm)
}

/// Joint angle at which a finger closing from `joint_low` first touches the
/// object, if it does so before `joint_high` with the contact on the finger.
pub fn close_finger<T: Real>(params: &HandParams<T>, side: Side, shape: &Shape2<T>, pose: &Pose2<T>) -> Option<T> {
    let g = |q: T| signed_clearance(&params.segment_unchecked(side, q), shape, pose);
    let step = T::lit(0.5f64.to_radians());
    let mut qa = params.joint_low;
    let mut ga = g(qa);
    if ga <= T::zero() {
        return None;
    }
    loop {
        let qb = (qa + step).min(params.joint_high);
        let gb = g(qb);
        if gb <= T::zero() {
            return refine_root(&g, qa, ga, qb, gb).ok();
        }
        if qb >= params.joint_high {
            return None;
        }
        qa = qb;
        ga = gb;
    }
}

fn detect_both<T: Real>(
    params: &HandParams<T>,
    shape: &Shape2<T>,
    pose: &Pose2<T>,
    q: [T; 2],
) -> Option<[ContactFeature<T>; 2]> {
    let mut out = [None, None];
    for side in Side::BOTH {
        let seg = params.segment_unchecked(side, q[side.index()]);
        let c = detect_contact(&seg, shape, pose)?;
        if c.clearance.abs() >= T::lit(HOLD_TOL) || c.feature.s >= seg.length - T::lit(ROOT_TOL) {
            return None;
        }
        out[side.index()] = Some(c.feature);
    }
    Some([out[0]?, out[1]?])
}

/// Bracketed root refinement: secant steps kept inside the bracket, with a
/// bisection whenever the bracket fails to halve.
fn refine_root<T: Real>(g: &impl Fn(T) -> T, mut a: T, mut fa: T, mut b: T, mut fb: T) -> Result<T, StepStatus> {
    let tol = T::lit(ROOT_TOL);
    let half = T::lit(0.5);
    let mut last_width = (b - a).abs();
    for _ in 0..ROOT_MAX_ITER {
        let width = (b - a).abs();
        if width < tol || fa == T::zero() || fb == T::zero() {
            return Ok(if fa.abs() <= fb.abs() { a } else { b });
        }
        let mid = (a + b) * half;
        let secant = b - fb * (b - a) / (fb - fa);
        let lo = a.min(b);
        let hi = a.max(b);
        let x = if secant > lo && secant < hi && width <= last_width * half * T::lit(1.5) {
            secant
        } else {
            mid
        };
        last_width = width;
        let fx = g(x);
        if (fx <= T::zero()) == (fa <= T::zero()) {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
    }
    Err(StepStatus::Jammed)
}

/// Finds the torque-controlled joint angle with zero clearance near `q0`.
/// `g` must decrease as the torque-controlled finger closes.
fn solve_follower<T: Real>(g: impl Fn(T) -> T, q0: T, lo: T, hi: T) -> Result<T, StepStatus> {
    let g0 = g(q0);
    if g0.abs() <= T::lit(1e-14) {
        return Ok(q0);
    }
    let dir = if g0 > T::zero() { T::one() } else { -T::one() };
    let mut step = T::lit(0.1f64.to_radians());
    let (mut qa, mut ga) = (q0, g0);
    loop {
        let qb = (qa + dir * step).max(lo).min(hi);
        let gb = g(qb);
        if (gb <= T::zero()) != (ga <= T::zero()) {
            return refine_root(&g, qa, ga, qb, gb);
        }
        if qb == lo || qb == hi {
            return Err(if gb > T::zero() { StepStatus::LostContact } else { StepStatus::JointLimit });
        }
        qa = qb;
        ga = gb;
        step *= T::lit(1.6);
    }
}

fn substeps<T: Real>(delta: T, max_substep: T) -> usize {
    (delta / max_substep).ceil().to_usize().unwrap_or(1).max(1)
}

fn outcome<T>(new_state: SimState<T>, status: StepStatus) -> StepOutcome<T> {
    StepOutcome { new_state, status }
}

/// Rotation by `angle` about the point `c`.
fn rotation_about<T: Real>(c: Vec2<T>, angle: T) -> Pose2<T> {
    Pose2::from_parts(c - c.rotate(angle), angle)
}

/// An accepted substep, as reported to [`apply_action_traced`].
#[derive(Debug, Clone, PartialEq)]
pub enum Substep<T> {
    /// Object pose in the frame of the high-friction `carrier` finger before
    /// and after the substep.
    Slide { carrier: Side, before: Pose2<T>, after: Pose2<T> },
    /// Sticking contacts used by the substep (body point, arc length), by
    /// side, and the resulting joint angles and pose.
    Pivot { anchors: [(Vec2<T>, T); 2], q: [T; 2], pose: Pose2<T> },
}

/// Sliding primitive (modes 0-3).
pub fn step_slide<T: Real>(state: &SimState<T>, action: &HybridAction<T>) -> Result<StepOutcome<T>, ActionError> {
    slide_impl(state, action, &mut |_| {})
}

fn slide_impl<T: Real>(
    state: &SimState<T>,
    action: &HybridAction<T>,
    trace: &mut dyn FnMut(Substep<T>),
) -> Result<StepOutcome<T>, ActionError> {
    let mode = action.validate()?;
    if !mode.is_slide() {
        return Err(ActionError::WrongPrimitive { mode: action.mode, primitive: "slide" });
    }
    if state.friction != mode.frictions() {
        return Err(ActionError::FrictionMismatch(action.mode));
    }
    let mut cur = state.clone();
    cur.steps += 1;
    if action.delta == T::zero() {
        return Ok(outcome(cur, StepStatus::Ok));
    }

    let params = state.params;
    let shape = state.shape.clone();
    let pc = mode.position_controlled();
    let tc = pc.other();
    let hf = if state.friction[0] == FrictionMode::High { Side::Left } else { Side::Right };
    let lf = hf.other();
    let q_pc0 = state.q[pc.index()];
    let n = substeps(action.delta, params.max_substep);
    let n_t = T::from_usize(n).unwrap();

    for k in 1..=n {
        let target = q_pc0 - action.delta * T::from_usize(k).unwrap() / n_t;
        if !params.within_limits(target) {
            return Ok(outcome(cur, StepStatus::JointLimit));
        }
        let frame = params.finger_frame(hf, cur.q[hf.index()]);
        let mut rel = frame.inverse().compose(&cur.object_pose);
        let rel_before = rel;

        if params.slide_drift != T::zero() {
            // the object lags the carrying finger, pivoting about its
            // sticking contact
            let dphi = (HandParams::finger_dir(pc, target).angle() - HandParams::finger_dir(pc, cur.q[pc.index()]).angle())
                .sin()
                .asin();
            let rho = -params.slide_drift * dphi;
            let seg_hf = cur.segment(hf);
            if let Some(query) = detect_contact(&seg_hf, &shape, &cur.object_pose) {
                for (body, _) in &query.pivots {
                    let c = rel.transform(*body);
                    let cand = rotation_about(c, rho).compose(&rel);
                    let pose = frame.compose(&cand);
                    if signed_clearance(&seg_hf, &shape, &pose) >= -T::lit(PIVOT_PEN_TOL) {
                        rel = cand;
                        break;
                    }
                }
            }
        }

        let config = |q_tc: T| {
            let mut q = cur.q;
            q[pc.index()] = target;
            q[tc.index()] = q_tc;
            q
        };
        let pose_of = |q: &[T; 2]| params.finger_frame(hf, q[hf.index()]).compose(&rel);
        let g = |q_tc: T| {
            let q = config(q_tc);
            signed_clearance(&params.segment_unchecked(lf, q[lf.index()]), &shape, &pose_of(&q))
        };
        let q_tc = match solve_follower(g, cur.q[tc.index()], params.joint_low, params.joint_high) {
            Ok(v) => v,
            Err(status) => return Ok(outcome(cur, status)),
        };
        let q = config(q_tc);
        let pose = pose_of(&q);
        let Some(contacts) = detect_both(&params, &shape, &pose, q) else {
            return Ok(outcome(cur, StepStatus::LostContact));
        };
        let next = SimState { q, object_pose: pose, contacts, ..cur.clone() };
        let after = params.finger_frame(hf, q[hf.index()]).inverse().compose(&pose);
        trace(Substep::Slide { carrier: hf, before: rel_before, after });
        if !object_in_workspace(&params, &shape, &pose) {
            return Ok(outcome(next, StepStatus::OutOfRange));
        }
        cur = next;
    }
    Ok(outcome(cur, StepStatus::Ok))
}

enum PivotAttempt<T> {
    Valid(SimState<T>, [(Vec2<T>, T); 2]),
    Penetrates,
    NoIntersection,
}

/// Joint angles placing the finger-surface point at arc length `s` on the
/// circle of radius `d` around `p1`, closest first to `q_prev`.
fn circle_solutions<T: Real>(params: &HandParams<T>, side: Side, s: T, p1: Vec2<T>, d: T, q_prev: T) -> Vec<T> {
    let base = params.base(side);
    let pad = params.default_push_clearance;
    let rho = s.hypot(pad);
    let dist = (p1 - base).norm();
    if dist <= T::zero() || dist > rho + d || dist < (rho - d).abs() {
        return Vec::new();
    }
    let along = (rho * rho - d * d + dist * dist) / (T::lit(2.0) * dist);
    let h = (rho * rho - along * along).max(T::zero()).sqrt();
    let e = (p1 - base) * (T::one() / dist);
    let mid = base + e * along;
    let v0 = HandParams::finger_dir(side, T::zero()) * s + HandParams::inner_normal(side, T::zero()) * pad;
    let mut sols: Vec<(T, T, T)> = [mid + e.perp() * h, mid - e.perp() * h]
        .iter()
        .map(|&p2| {
            let a = (p2 - base).angle();
            let q = match side {
                Side::Left => super::wrap_angle(v0.angle() - a),
                Side::Right => super::wrap_angle(a - v0.angle()),
            };
            (q, (q - q_prev).abs(), p2.y)
        })
        .collect();
    // closest to the previous angle; ties go towards the palm
    sols.sort_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then(x.2.partial_cmp(&y.2).unwrap()));
    sols.into_iter().map(|(q, _, _)| q).collect()
}

fn pivot_attempt<T: Real>(
    cur: &SimState<T>,
    pc: Side,
    q_pc: T,
    pivots: &[Vec<(Vec2<T>, T)>; 2],
) -> PivotAttempt<T> {
    let params = &cur.params;
    let shape = &cur.shape;
    let tc = pc.other();
    let q_tc_prev = cur.q[tc.index()];
    let tol = -T::lit(PIVOT_PEN_TOL);
    let mut best: Option<(T, SimState<T>, [(Vec2<T>, T); 2])> = None;
    let mut any_intersection = false;
    for &(b_pc, s_pc) in &pivots[pc.index()] {
        let p1 = params.surface_point(pc, q_pc, s_pc);
        for &(b_tc, s_tc) in &pivots[tc.index()] {
            let chord = b_tc - b_pc;
            let d = chord.norm();
            if d <= T::lit(1e-12) {
                continue;
            }
            let sols = circle_solutions(params, tc, s_tc, p1, d, q_tc_prev);
            let Some(&q_tc) = sols.first() else { continue };
            any_intersection = true;
            if !params.within_limits(q_tc) {
                continue;
            }
            let p2 = params.surface_point(tc, q_tc, s_tc);
            let theta = (p2 - p1).angle() - chord.angle();
            let rot = Pose2::new(T::zero(), T::zero(), theta);
            let pos = p1 - rot.transform(b_pc);
            let pose = Pose2::from_parts(pos, theta);
            let mut q = cur.q;
            q[pc.index()] = q_pc;
            q[tc.index()] = q_tc;
            let ok = Side::BOTH
                .iter()
                .all(|&s| signed_clearance(&params.segment_unchecked(s, q[s.index()]), shape, &pose) >= tol);
            if !ok {
                continue;
            }
            let score = (q_tc - q_tc_prev).abs();
            if best.as_ref().is_none_or(|(bs, _, _)| score < *bs) {
                let Some(contacts) = detect_both(params, shape, &pose, q) else { continue };
                let mut anchors = [(b_pc, s_pc); 2];
                anchors[tc.index()] = (b_tc, s_tc);
                best = Some((score, SimState { q, object_pose: pose, contacts, ..cur.clone() }, anchors));
            }
        }
    }
    match best {
        Some((_, s, anchors)) => PivotAttempt::Valid(s, anchors),
        None if any_intersection => PivotAttempt::Penetrates,
        None => PivotAttempt::NoIntersection,
    }
}

fn pivot_candidates<T: Real>(state: &SimState<T>) -> Option<[Vec<(Vec2<T>, T)>; 2]> {
    let mut out: [Vec<(Vec2<T>, T)>; 2] = [Vec::new(), Vec::new()];
    for side in Side::BOTH {
        let q: ContactQuery<T> = detect_contact(&state.segment(side), &state.shape, &state.object_pose)?;
        out[side.index()] = q.pivots;
    }
    Some(out)
}

/// Pivoting primitive (modes 4-5): both contacts stick.
pub fn step_pivot<T: Real>(state: &SimState<T>, action: &HybridAction<T>) -> Result<StepOutcome<T>, ActionError> {
    pivot_impl(state, action, &mut |_| {})
}

fn pivot_impl<T: Real>(
    state: &SimState<T>,
    action: &HybridAction<T>,
    trace: &mut dyn FnMut(Substep<T>),
) -> Result<StepOutcome<T>, ActionError> {
    let mode = action.validate()?;
    if mode.is_slide() {
        return Err(ActionError::WrongPrimitive { mode: action.mode, primitive: "pivot" });
    }
    if state.friction != [FrictionMode::High; 2] {
        return Err(ActionError::FrictionMismatch(action.mode));
    }
    let mut cur = state.clone();
    cur.steps += 1;
    if action.delta == T::zero() {
        return Ok(outcome(cur, StepStatus::Ok));
    }
    let params = state.params;
    let pc = mode.position_controlled();
    let q_pc0 = state.q[pc.index()];
    let n = substeps(action.delta, params.max_substep);
    let n_t = T::from_usize(n).unwrap();

    for k in 1..=n {
        let target = q_pc0 - action.delta * T::from_usize(k).unwrap() / n_t;
        if !params.within_limits(target) {
            return Ok(outcome(cur, StepStatus::JointLimit));
        }
        let mut transitions = 0;
        loop {
            let Some(pivots) = pivot_candidates(&cur) else {
                return Ok(outcome(cur, StepStatus::LostContact));
            };
            let from = cur.q[pc.index()];
            match pivot_attempt(&cur, pc, target, &pivots) {
                PivotAttempt::Valid(next, anchors) => {
                    trace(Substep::Pivot { anchors, q: next.q, pose: next.object_pose });
                    cur = next;
                    break;
                }
                PivotAttempt::NoIntersection => return Ok(outcome(cur, StepStatus::LostContact)),
                PivotAttempt::Penetrates => {
                    // advance to the feature transition (e.g. a face coming
                    // flush with the finger) and re-detect
                    transitions += 1;
                    if transitions > MAX_TRANSITIONS {
                        return Ok(outcome(cur, StepStatus::Jammed));
                    }
                    let (mut lo, mut hi) = (T::zero(), T::one());
                    let mut best: Option<(SimState<T>, [(Vec2<T>, T); 2])> = None;
                    for _ in 0..60 {
                        let mid = (lo + hi) * T::lit(0.5);
                        match pivot_attempt(&cur, pc, from + (target - from) * mid, &pivots) {
                            PivotAttempt::Valid(s, anchors) => {
                                lo = mid;
                                best = Some((s, anchors));
                            }
                            _ => hi = mid,
                        }
                    }
                    match best {
                        Some((s, anchors)) => {
                            trace(Substep::Pivot { anchors, q: s.q, pose: s.object_pose });
                            cur = s;
                        }
                        None => return Ok(outcome(cur, StepStatus::Jammed)),
                    }
                }
            }
        }
        if !object_in_workspace(&params, &cur.shape, &cur.object_pose) {
            return Ok(outcome(cur, StepStatus::OutOfRange));
        }
    }
    Ok(outcome(cur, StepStatus::Ok))
}

/// Executes one hybrid action: sets friction states and control roles, then
/// runs the sliding or pivoting primitive.
pub fn apply_action<T: Real>(state: &SimState<T>, action: &HybridAction<T>) -> Result<StepOutcome<T>, ActionError> {
    apply_action_traced(state, action, &mut |_| {})
}

/// [`apply_action`] reporting every accepted substep to `trace`.
pub fn apply_action_traced<T: Real>(
    state: &SimState<T>,
    action: &HybridAction<T>,
    trace: &mut dyn FnMut(Substep<T>),
) -> Result<StepOutcome<T>, ActionError> {
    let mode = action.validate()?;
    let mut settled = state.clone();
    settled.friction = mode.frictions();
    match mode {
        ActionMode::RotateCw | ActionMode::RotateCcw => pivot_impl(&settled, action, trace),
        _ => slide_impl(&settled, action, trace),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{builtin_shape, ObjectFeature};
    use super::*;

    fn cube_at(pose: Pose2<f64>) -> SimState<f64> {
        SimState::held(Arc::new(builtin_shape("cube").unwrap()), HandParams::default(), pose).unwrap()
    }

    fn deg(d: f64) -> HybridAction<f64> {
        HybridAction::from_degrees(0, d)
    }

    #[test]
    fn zero_delta_is_identity_for_every_mode() {
        let s = cube_at(Pose2::new(0.0, 0.05, 0.0));
        for m in 0..6u8 {
            let mut settled = s.clone();
            settled.friction = ActionMode::from_index(m as usize).unwrap().frictions();
            let o = apply_action(&s, &HybridAction::new(m, 0.0)).unwrap();
            assert_eq!(o.status, StepStatus::Ok);
            assert_eq!(o.new_state.steps, 1);
            settled.steps = 1;
            assert_eq!(o.new_state, settled);
        }
    }

    #[test]
    fn slide_up_sticks_to_left_finger_and_slides_on_right() {
        let s = cube_at(Pose2::new(0.0, 0.05, 0.0));
        let rel0 = s.params.finger_frame(Side::Left, s.q[0]).inverse().compose(&s.object_pose);
        let o = apply_action(&s, &deg(5.0)).unwrap();
        assert_eq!(o.status, StepStatus::Ok);
        let n = &o.new_state;
        let rel1 = n.params.finger_frame(Side::Left, n.q[0]).inverse().compose(&n.object_pose);
        assert!((rel0.position() - rel1.position()).norm() < 1e-9);
        assert!(rel0.angle_error(&rel1).abs() < 1e-9);
        assert!(n.contacts[1].s > s.contacts[1].s);

        // oracle: the same update at 0.01 degree substeps
        let mut fine = s.clone();
        fine.params.max_substep = 0.01f64.to_radians();
        let f = apply_action(&fine, &deg(5.0)).unwrap().new_state;
        assert!((f.object_pose.position() - n.object_pose.position()).norm() < 1e-7);
        assert!(f.object_pose.angle_error(&n.object_pose).abs() < 1e-7);
        assert!((f.q[1] - n.q[1]).abs() < 1e-7);
    }

    #[test]
    fn slide_down_at_bottom_edge_leaves_the_workspace() {
        // the workspace floor sits just below the object
        let mut s = cube_at(Pose2::new(0.0, 0.05, 0.0));
        s.params.workspace_min.y = 0.048;
        let o = apply_action(&s, &HybridAction::from_degrees(1, 5.0)).unwrap();
        assert_eq!(o.status, StepStatus::OutOfRange);
        assert!(!object_in_workspace(&o.new_state.params, &o.new_state.shape, &o.new_state.object_pose));
    }

    #[test]
    fn joint_limit_is_reported() {
        let mut s = cube_at(Pose2::new(0.0, 0.05, 0.0));
        s.params.joint_low = s.q[0] - 0.01;
        let o = apply_action(&s, &deg(5.0)).unwrap();
        assert_eq!(o.status, StepStatus::JointLimit);
        assert!(o.new_state.params.within_limits(o.new_state.q[0]));
    }

    #[test]
    fn rotation_directions_and_frictions() {
        let s = cube_at(Pose2::new(0.0, 0.05, 0.0));
        let cw = apply_action(&s, &HybridAction::from_degrees(4, 8.0)).unwrap();
        assert_eq!(cw.new_state.friction, [FrictionMode::High, FrictionMode::High]);
        assert!(cw.new_state.q[1] < s.q[1]);
        assert!(cw.new_state.object_pose.theta > 0.0);
        let ccw = apply_action(&s, &HybridAction::from_degrees(5, 8.0)).unwrap();
        assert!(ccw.new_state.object_pose.theta < 0.0);
        let up = apply_action(&s, &HybridAction::from_degrees(2, 8.0)).unwrap();
        assert_eq!(up.new_state.friction, [FrictionMode::Low, FrictionMode::High]);
        assert!(up.new_state.object_pose.y > s.object_pose.y);
        assert!(matches!(apply_action(&s, &HybridAction::from_degrees(4, 20.0)), Err(ActionError::DeltaOutOfRange(_))));
    }

    #[test]
    fn pivot_preserves_the_chord_at_every_substep() {
        let s = cube_at(Pose2::new(0.005, 0.06, 0.2));
        let mut subs = Vec::new();
        let o = apply_action_traced(&s, &HybridAction::from_degrees(5, 12.0), &mut |x| subs.push(x)).unwrap();
        assert_eq!(o.status, StepStatus::Ok);
        assert_eq!(subs.len(), 24);
        for sub in subs {
            let Substep::Pivot { anchors, q, pose } = sub else { panic!("slide substep in a pivot") };
            let p: Vec<_> = Side::BOTH.iter().map(|&sd| s.params.surface_point(sd, q[sd.index()], anchors[sd.index()].1)).collect();
            let chord = (anchors[0].0 - anchors[1].0).norm();
            assert!(((p[0] - p[1]).norm() - chord).abs() < 1e-9);
            for sd in Side::BOTH {
                assert!((p[sd.index()] - pose.transform(anchors[sd.index()].0)).norm() < 1e-9);
            }
        }
    }

    /// Rolling a square about a vertex: the contact becomes a face contact
    /// when a cube face is parallel to the finger. The left finger direction
    /// is at angle `pi/2 - q_L` and the right at `pi/2 + q_R`, the faces at
    /// `theta + k pi/2`, so flush means `theta + q_L = 0` or `theta - q_R = 0`
    /// modulo `pi/2`. Afterwards the cube keeps rolling about the far vertex
    /// of that face.
    #[test]
    fn pivoted_cube_rolls_onto_a_face() {
        let s0 = cube_at(Pose2::new(0.0, 0.05, 0.0));
        assert!(!s0.contacts[0].is_edge() && !s0.contacts[1].is_edge());
        let mut subs = Vec::new();
        let out = apply_action_traced(&s0, &HybridAction::from_degrees(4, 18.9), &mut |x| subs.push(x)).unwrap();
        assert_eq!(out.status, StepStatus::Ok);
        let quarter = std::f64::consts::FRAC_PI_2;
        let flush_off = |x: f64| (x - quarter * (x / quarter).round()).abs();
        let mut rolled = None;
        for sub in &subs {
            let Substep::Pivot { q, pose, .. } = sub else { unreachable!() };
            let contacts = detect_both(&s0.params, &s0.shape, pose, *q).unwrap();
            if let Some(side) = Side::BOTH.into_iter().find(|&sd| contacts[sd.index()].is_edge()) {
                let off = match side {
                    Side::Left => flush_off(pose.theta + q[0]),
                    Side::Right => flush_off(pose.theta - q[1]),
                };
                assert!(off < FACE_ALIGN_TOL_RAD, "face misaligned by {off}");
                rolled = Some((side, contacts[side.index()]));
                break;
            }
        }
        let (side, contact) = rolled.expect("cube never came flush with a finger");
        let ObjectFeature::Edge { index, .. } = contact.object_feature else { unreachable!() };
        let start = match s0.contacts[side.index()].object_feature {
            ObjectFeature::Vertex(v) => v,
            _ => unreachable!(),
        };
        // the flush face is one of the two faces adjacent to the start vertex
        assert!(index == start || (index + 1) % 4 == start);
        let ObjectFeature::Vertex(end) = out.new_state.contacts[side.index()].object_feature else {
            panic!("still flush at the end of the action")
        };
        assert_ne!(end, start, "cube did not roll over to the next vertex");
    }

    const FACE_ALIGN_TOL_RAD: f64 = 0.5 * std::f64::consts::PI / 180.0;

    #[test]
    fn identical_inputs_give_identical_outcomes() {
        let s = cube_at(Pose2::new(-0.01, 0.06, 0.4));
        for m in 0..6u8 {
            let a = HybridAction::from_degrees(m, 11.3);
            assert_eq!(apply_action(&s, &a).unwrap(), apply_action(&s, &a).unwrap());
        }
    }
}
