//! Versioned binary checkpoint: model parameters, window sizes,
//! normalization state and the resolved run configuration.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic "MWADCKPT" | version u32
//! n u32 | w1 u32 | w2 u32 | hidden u32 | seed u64 | leaky_slope f64
//! activation u8 | mode u8
//! columns: count u32, then (len u32, utf8) each
//! normalization: count u32, mins f64×count, maxs f64×count
//! config: len u32, utf8
//! tensors: count u32, then (name len u32, utf8, rows u32, cols u32, f64×rows·cols) each
//! end marker "END\0"
//! ```

use std::path::Path;

use crate::dataset::{write_atomic, NormalizationState};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, MultiWindowModel, WindowMode, PARAM_NAMES};
use crate::numeric::Tensor;
use crate::wgat::Activation;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MWADCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;
const END_MARKER: &[u8; 4] = b"END\0";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: MultiWindowModel,
    pub normalization: NormalizationState,
    pub column_names: Vec<String>,
    pub seed: u64,
    /// Resolved run configuration, as text.
    pub config: String,
}

impl Checkpoint {
    pub fn new(
        model: MultiWindowModel,
        normalization: NormalizationState,
        column_names: Vec<String>,
        seed: u64,
        config: String,
    ) -> Result<Self> {
        let ck = Self {
            model,
            normalization,
            column_names,
            seed,
            config,
        };
        ck.check_consistent()?;
        Ok(ck)
    }

    fn check_consistent(&self) -> Result<()> {
        self.model.validate()?;
        let n = self.model.feature_count();
        if self.normalization.feature_count() != n || self.normalization.maxs.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: self.normalization.feature_count(),
            });
        }
        if self.column_names.len() != n {
            return Err(Error::Dimension {
                expected: n,
                found: self.column_names.len(),
            });
        }
        Ok(())
    }

    /// Fails with a dimension error unless `columns` matches the trained features.
    pub fn check_columns(&self, columns: &[String]) -> Result<()> {
        if columns.len() != self.column_names.len() {
            return Err(Error::Dimension {
                expected: self.column_names.len(),
                found: columns.len(),
            });
        }
        if let Some((want, got)) = self.column_names.iter().zip(columns).find(|(a, b)| a != b) {
            return Err(Error::Validation(format!(
                "feature column `{got}` does not match trained column `{want}`"
            )));
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let spec = self.model.spec();
        let mut out = Vec::new();
        out.extend_from_slice(CHECKPOINT_MAGIC);
        put_u32(&mut out, CHECKPOINT_VERSION);
        for v in [spec.n, spec.w1, spec.w2, spec.hidden] {
            put_u32(&mut out, v as u32);
        }
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&spec.leaky_slope.to_le_bytes());
        out.push(match spec.activation {
            Activation::Sigmoid => 0,
            Activation::Identity => 1,
        });
        out.push(match spec.mode {
            WindowMode::Adaptive => 0,
            WindowMode::Manual => 1,
            WindowMode::None => 2,
        });
        put_u32(&mut out, self.column_names.len() as u32);
        for name in &self.column_names {
            put_str(&mut out, name);
        }
        put_u32(&mut out, self.normalization.mins.len() as u32);
        for v in self.normalization.mins.iter().chain(&self.normalization.maxs) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        put_str(&mut out, &self.config);
        put_u32(&mut out, PARAM_NAMES.len() as u32);
        for name in PARAM_NAMES {
            let t = self.model.param(name).expect("canonical parameter name");
            put_str(&mut out, name);
            put_u32(&mut out, t.rows() as u32);
            put_u32(&mut out, t.cols() as u32);
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(END_MARKER);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a checkpoint file (bad magic)".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Incompatible {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let n = r.u32()? as usize;
        let w1 = r.u32()? as usize;
        let w2 = r.u32()? as usize;
        let hidden = r.u32()? as usize;
        let seed = r.u64()?;
        let leaky_slope = r.f64()?;
        let activation = match r.u8()? {
            0 => Activation::Sigmoid,
            1 => Activation::Identity,
            b => return Err(Error::Format(format!("unknown activation tag {b}"))),
        };
        let mode = match r.u8()? {
            0 => WindowMode::Adaptive,
            1 => WindowMode::Manual,
            2 => WindowMode::None,
            b => return Err(Error::Format(format!("unknown window mode tag {b}"))),
        };
        let ncols = r.u32()? as usize;
        let column_names = (0..ncols).map(|_| r.string()).collect::<Result<Vec<_>>>()?;
        let nnorm = r.u32()? as usize;
        let mins = (0..nnorm).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let maxs = (0..nnorm).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let config = r.string()?;

        let spec = ModelSpec {
            n,
            w1,
            w2,
            hidden,
            leaky_slope,
            activation,
            mode,
        };
        let mut model = MultiWindowModel::init(&spec, 0)?;
        let ntensors = r.u32()? as usize;
        let mut seen = Vec::with_capacity(ntensors);
        for _ in 0..ntensors {
            let name = r.string()?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Format(format!("tensor `{name}` is too large")))?;
            if len > r.remaining() / 8 {
                return Err(Error::Format("checkpoint is truncated".into()));
            }
            let data = (0..len).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let slot = model
                .param_mut(&name)
                .ok_or_else(|| Error::Format(format!("unknown tensor `{name}`")))?;
            if slot.shape() != (rows, cols) {
                return Err(Error::Format(format!(
                    "tensor `{name}` is {rows}x{cols}, expected {}x{}",
                    slot.rows(),
                    slot.cols()
                )));
            }
            *slot = Tensor::from_vec(rows, cols, data)?;
            seen.push(name);
        }
        if let Some(missing) = PARAM_NAMES.iter().find(|p| !seen.iter().any(|s| s == *p)) {
            return Err(Error::Format(format!("checkpoint lacks tensor `{missing}`")));
        }
        if r.take(4)? != END_MARKER {
            return Err(Error::Format("checkpoint end marker missing".into()));
        }
        if r.remaining() != 0 {
            return Err(Error::Format("trailing bytes after checkpoint".into()));
        }
        let ck = Self {
            model,
            normalization: NormalizationState { mins, maxs },
            column_names,
            seed,
            config,
        };
        ck.check_consistent()
            .map_err(|e| Error::Format(format!("inconsistent checkpoint: {e}")))?;
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        if self.remaining() < k {
            return Err(Error::Format("checkpoint is truncated".into()));
        }
        let s = &self.bytes[self.pos..self.pos + k];
        self.pos += k;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Format("checkpoint string is not utf-8".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut spec = ModelSpec::new(3);
        spec.w1 = 4;
        spec.w2 = 3;
        spec.hidden = 5;
        let model = MultiWindowModel::init(&spec, 9).unwrap();
        Checkpoint::new(
            model,
            NormalizationState {
                mins: vec![0.0, -1.0, 2.0],
                maxs: vec![1.0, 1.0, 2.0],
            },
            vec!["a".into(), "b".into(), "c".into()],
            9,
            "lr=0.01\n".into(),
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let ck = sample();
        let bytes = ck.to_bytes();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn version_bump_is_incompatible() {
        let mut bytes = sample().to_bytes();
        bytes[8] += 1;
        assert!(matches!(
            Checkpoint::from_bytes(&bytes),
            Err(Error::Incompatible { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn every_truncation_is_a_format_error() {
        let bytes = sample().to_bytes();
        for cut in 0..bytes.len() {
            match Checkpoint::from_bytes(&bytes[..cut]) {
                Err(Error::Format(_)) => {}
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn column_mismatch_is_dimension_error() {
        let ck = sample();
        let cols: Vec<String> = vec!["a".into(), "b".into()];
        assert!(matches!(ck.check_columns(&cols), Err(Error::Dimension { expected: 3, found: 2 })));
    }
}
