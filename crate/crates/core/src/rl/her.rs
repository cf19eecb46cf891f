use rand::Rng;

use super::Transition;
use crate::task::{is_success, reward, Goal, TaskConfig};

/// Adds `k` relabelled copies of every transition, each with the goal
/// replaced by the achieved pose of a uniformly drawn later (or the same)
/// step of the episode. Rewards and terminal flags are recomputed under the
/// new goal; only the goal and goal-delta observation slots change.
pub fn her_relabel(episode: &[Transition], k: usize, rng: &mut impl Rng, task: &TaskConfig) -> Vec<Transition> {
    let mut out = episode.to_vec();
    if k == 0 {
        return out;
    }
    let n = episode.len();
    for (i, t) in episode.iter().enumerate() {
        for _ in 0..k {
            let j = rng.random_range(i..n);
            out.push(relabel(t, Goal::new(episode[j].achieved), task));
        }
    }
    out
}

pub(crate) fn relabel(t: &Transition, goal: Goal, task: &TaskConfig) -> Transition {
    let mut r = *t;
    r.goal = goal;
    r.obs.set_goal(&t.obs_pose, &goal);
    r.next_obs.set_goal(&t.next_obs_pose, &goal);
    r.reward = reward(&t.achieved, t.status, &goal, &task.hand, &task.reward);
    r.done = !t.status.is_ok() || is_success(&t.achieved, &goal, &task.reward);
    r
}
