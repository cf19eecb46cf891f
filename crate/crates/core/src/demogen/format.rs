//! `VFD1` layout (all little-endian):
//!
//! ```text
//! magic "VFD1" | version u32 | count u32 | domain u8 | config_hash u64
//! | shape (u32 len + utf8) | generator (u32 len + utf8)
//! count x record:
//!   seed u64 | episode u64 | n u32 | goal 3 x f64
//!   | (n+1) x 25 f64 observations | (n+1) x 3 f64 tracked | (n+1) x 3 f64 truth
//!   | n x (mode u8, delta f64) | n x status u8
//! crc32 u32 over everything before it
//! ```

use super::{DatasetMeta, DemoDataset, DemoTrajectory, DomainTag};
use crate::binio::{Reader, Writer};
use crate::error::{DataError, FormatError};
use crate::geometry::StepStatus;
use crate::task::{Goal, Observation, OBS_DIM};
use crate::{Action, Pose};

pub const DATASET_MAGIC: [u8; 4] = *b"VFD1";
pub const DATASET_VERSION: u32 = 1;
/// Header bytes before the two strings.
pub const HEADER_FIXED_SIZE: usize = 4 + 4 + 4 + 1 + 8;

/// Bytes taken by a record with `n` actions.
pub fn record_size(n: usize) -> usize {
    8 + 8 + 4 + 3 * 8 + (n + 1) * (OBS_DIM + 6) * 8 + n * (1 + 8) + n
}

fn pose(w: &mut Writer, p: &Pose) {
    w.f64s(&[p.x, p.y, p.theta]);
}

fn read_pose(r: &mut Reader) -> Result<Pose, FormatError> {
    let v = r.f64s(3)?;
    Ok(Pose::new(v[0], v[1], v[2]))
}

pub(super) fn serialize(ds: &DemoDataset) -> Vec<u8> {
    let mut w = Writer::new(&DATASET_MAGIC, DATASET_VERSION);
    w.u32(ds.trajectories.len() as u32);
    w.u8(ds.meta.domain.code());
    w.u64(ds.meta.config_hash);
    w.str(&ds.meta.shape);
    w.str(&ds.meta.generator);
    for t in &ds.trajectories {
        w.u64(t.seed);
        w.u64(t.episode);
        w.u32(t.actions.len() as u32);
        pose(&mut w, &t.goal.pose);
        for o in &t.observations {
            w.f64s(&o.0);
        }
        t.tracked.iter().for_each(|p| pose(&mut w, p));
        t.poses.iter().for_each(|p| pose(&mut w, p));
        for a in &t.actions {
            w.u8(a.mode);
            w.f64(a.delta);
        }
        for s in &t.statuses {
            w.u8(s.code());
        }
    }
    w.finish()
}

pub(super) fn deserialize(bytes: &[u8]) -> Result<DemoDataset, DataError> {
    let mut r = Reader::open(bytes, &DATASET_MAGIC, DATASET_VERSION)?;
    let count = r.u32()? as usize;
    let domain = DomainTag::from_code(r.u8()?).ok_or_else(|| FormatError::Invalid("unknown domain tag".into()))?;
    let config_hash = r.u64()?;
    let shape = r.str()?;
    let generator = r.str()?;
    let mut trajectories = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let seed = r.u64()?;
        let episode = r.u64()?;
        let n = r.u32()? as usize;
        let goal = Goal::new(read_pose(&mut r)?);
        let observations = (0..=n)
            .map(|_| r.f64s(OBS_DIM).map(|v| Observation(v.try_into().unwrap())))
            .collect::<Result<Vec<_>, _>>()?;
        let tracked = (0..=n).map(|_| read_pose(&mut r)).collect::<Result<Vec<_>, _>>()?;
        let poses = (0..=n).map(|_| read_pose(&mut r)).collect::<Result<Vec<_>, _>>()?;
        let actions = (0..n)
            .map(|_| Ok(Action::new(r.u8()?, r.f64()?)))
            .collect::<Result<Vec<_>, FormatError>>()?;
        let statuses = (0..n)
            .map(|_| StepStatus::from_code(r.u8()?).ok_or_else(|| FormatError::Invalid("unknown step status".into())))
            .collect::<Result<Vec<_>, _>>()?;
        trajectories.push(DemoTrajectory {
            shape: shape.clone(),
            domain,
            seed,
            episode,
            goal,
            observations,
            actions,
            statuses,
            tracked,
            poses,
        });
    }
    r.finish()?;
    DemoDataset::new(DatasetMeta { shape, domain, generator, config_hash }, trajectories)
}
