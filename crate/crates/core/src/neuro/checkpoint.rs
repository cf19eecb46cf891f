use std::path::Path;

use super::{Activation, Mlp, MlpSpec};
use crate::binio::{Reader, Writer};
use crate::error::{FormatError, NeuroError};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"VFCK";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Named networks and named `f64` arrays plus a free-form JSON metadata
/// string.
///
/// Layout (little endian): magic, version u32, kind string, metadata string,
/// net count u32, per net {name, layer count u32, widths u32..., hidden and
/// output activation codes u8..., parameter count u64, parameters f64...},
/// blob count u32, per blob {name, length u64, values f64...}, CRC32 of all
/// preceding bytes. Strings are a u32 byte length followed by UTF-8.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub kind: String,
    pub meta: String,
    pub nets: Vec<(String, Mlp<f64>)>,
    pub blobs: Vec<(String, Vec<f64>)>,
}

impl Checkpoint {
    pub fn new(kind: impl Into<String>) -> Self {
        Self { kind: kind.into(), ..Default::default() }
    }

    pub fn with_net(mut self, name: &str, net: &Mlp<f64>) -> Self {
        self.nets.push((name.into(), net.clone()));
        self
    }

    pub fn with_blob(mut self, name: &str, values: Vec<f64>) -> Self {
        self.blobs.push((name.into(), values));
        self
    }

    pub fn net(&self, name: &str) -> Result<&Mlp<f64>, NeuroError> {
        self.nets
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, m)| m)
            .ok_or_else(|| NeuroError::Checkpoint(format!("missing network {name:?}")))
    }

    pub fn blob(&self, name: &str) -> Result<&[f64], NeuroError> {
        self.blobs
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, b)| b.as_slice())
            .ok_or_else(|| NeuroError::Checkpoint(format!("missing array {name:?}")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(&CHECKPOINT_MAGIC, CHECKPOINT_VERSION);
        w.str(&self.kind);
        w.str(&self.meta);
        w.u32(self.nets.len() as u32);
        for (name, net) in &self.nets {
            let spec = net.spec();
            w.str(name);
            w.u32(spec.widths.len() as u32);
            for &x in &spec.widths {
                w.u32(x as u32);
            }
            for a in &spec.hidden {
                w.u8(a.code());
            }
            w.u8(spec.output.code());
            w.u64(net.params().len() as u64);
            w.f64s(net.params());
        }
        w.u32(self.blobs.len() as u32);
        for (name, b) in &self.blobs {
            w.str(name);
            w.u64(b.len() as u64);
            w.f64s(b);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NeuroError> {
        let mut r = Reader::open(bytes, &CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
        let kind = r.str()?;
        let meta = r.str()?;
        let n_nets = r.u32()?;
        let mut nets = Vec::new();
        for _ in 0..n_nets {
            let name = r.str()?;
            let n_widths = r.u32()? as usize;
            if n_widths < 3 || n_widths > 64 {
                return Err(FormatError::Invalid(format!("{n_widths} layer widths")).into());
            }
            let widths = (0..n_widths).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>, _>>()?;
            let act = |c: u8| Activation::from_code(c).ok_or_else(|| FormatError::Invalid(format!("activation {c}")));
            let hidden = (0..n_widths - 2).map(|_| act(r.u8()?)).collect::<Result<Vec<_>, _>>()?;
            let output = act(r.u8()?)?;
            let n = r.u64()? as usize;
            let params = r.f64s(n)?;
            nets.push((name, Mlp::from_params(MlpSpec { widths, hidden, output }, params)?));
        }
        let n_blobs = r.u32()?;
        let mut blobs = Vec::new();
        for _ in 0..n_blobs {
            let name = r.str()?;
            let n = r.u64()? as usize;
            blobs.push((name, r.f64s(n)?));
        }
        r.finish()?;
        Ok(Self { kind, meta, nets, blobs })
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuroError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NeuroError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}
