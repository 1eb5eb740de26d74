//! Binary demonstration files.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! "BARM"  u16 version  u32 len  config text (key=value lines, incl. task=)
//! u32 episode count
//! per episode:     u32 transition count
//! per transition:  f32[obs²] heightmap  f32[in_hand²] in-hand  u8 holding
//!                  f32[5] action  f32 reward  u8 done
//! ```
//!
//! ```
//! use armbench::demo_file::{DemoReader, DemoWriter};
//!
//! let mut buf = Vec::new();
//! let mut w = DemoWriter::new(&mut buf, "task=block_stacking\nobs_size=2\nin_hand_size=1\n", 2, 1, 0).unwrap();
//! w.finish().unwrap();
//! let r = DemoReader::new(buf.as_slice()).unwrap();
//! assert_eq!(r.header().episodes, 0);
//! ```

use crate::config::EnvConfig;
use crate::env::{Observation, Transition};
use crate::render::DepthImage;
use std::io::{self, Read, Write};
use thiserror::Error;

pub const MAGIC: &[u8; 4] = b"BARM";
pub const VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("byte {offset}: {source}")]
    Io { offset: u64, source: io::Error },
    #[error("byte {offset}: {reason}")]
    Format { offset: u64, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoHeader {
    pub config_text: String,
    pub obs_size: usize,
    pub in_hand_size: usize,
    pub episodes: u32,
}

impl DemoHeader {
    /// Value of `key` in the embedded config text.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.config_text.lines().find_map(|l| l.split_once('=').filter(|(k, _)| k.trim() == key).map(|(_, v)| v.trim()))
    }
}

/// Streaming writer. The episode count is fixed up front; [`finish`]
/// checks that exactly that many episodes were written.
///
/// [`finish`]: DemoWriter::finish
pub struct DemoWriter<W: Write> {
    out: W,
    offset: u64,
    obs_size: usize,
    in_hand_size: usize,
    expected: u32,
    written: u32,
}

impl<W: Write> DemoWriter<W> {
    pub fn new(
        out: W,
        config_text: &str,
        obs_size: usize,
        in_hand_size: usize,
        episodes: u32,
    ) -> Result<Self, DemoError> {
        let mut w = DemoWriter { out, offset: 0, obs_size, in_hand_size, expected: episodes, written: 0 };
        w.put(MAGIC)?;
        w.put(&VERSION.to_le_bytes())?;
        w.put(&(config_text.len() as u32).to_le_bytes())?;
        w.put(config_text.as_bytes())?;
        w.put(&episodes.to_le_bytes())?;
        Ok(w)
    }

    fn put(&mut self, bytes: &[u8]) -> Result<(), DemoError> {
        self.out.write_all(bytes).map_err(|source| DemoError::Io { offset: self.offset, source })?;
        self.offset += bytes.len() as u64;
        Ok(())
    }

    fn put_f32s(&mut self, v: &[f32]) -> Result<(), DemoError> {
        let bytes: Vec<u8> = v.iter().flat_map(|f| f.to_le_bytes()).collect();
        self.put(&bytes)
    }

    pub fn write_episode(&mut self, transitions: &[Transition]) -> Result<(), DemoError> {
        if self.written == self.expected {
            return Err(DemoError::Format { offset: self.offset, reason: "more episodes than declared".into() });
        }
        self.put(&(transitions.len() as u32).to_le_bytes())?;
        for t in transitions {
            if t.obs.heightmap.size() != self.obs_size || t.obs.in_hand.size() != self.in_hand_size {
                return Err(DemoError::Format { offset: self.offset, reason: "observation size mismatch".into() });
            }
            self.put_f32s(t.obs.heightmap.as_slice())?;
            self.put_f32s(t.obs.in_hand.as_slice())?;
            self.put(&[u8::from(t.obs.holding)])?;
            self.put_f32s(&t.action)?;
            self.put_f32s(&[t.reward])?;
            self.put(&[u8::from(t.done)])?;
        }
        self.written += 1;
        Ok(())
    }

    /// Flush and return the sink.
    pub fn finish(mut self) -> Result<W, DemoError> {
        if self.written != self.expected {
            return Err(DemoError::Format {
                offset: self.offset,
                reason: format!("declared {} episodes, wrote {}", self.expected, self.written),
            });
        }
        self.out.flush().map_err(|source| DemoError::Io { offset: self.offset, source })?;
        Ok(self.out)
    }
}

/// Header text for demos of `task` recorded under `config`.
pub fn header_text(task: &str, config: &EnvConfig) -> String {
    format!("task={task}\n{}", config.to_text())
}

/// Write `episodes` as a complete demo file.
pub fn write_demos<W: Write>(
    out: W,
    task: &str,
    config: &EnvConfig,
    episodes: &[Vec<Transition>],
) -> Result<W, DemoError> {
    let mut w =
        DemoWriter::new(out, &header_text(task, config), config.obs_size, config.in_hand_size, episodes.len() as u32)?;
    for ep in episodes {
        w.write_episode(ep)?;
    }
    w.finish()
}

/// Streaming reader; iterate with [`DemoReader::next_episode`].
pub struct DemoReader<R: Read> {
    input: R,
    offset: u64,
    header: DemoHeader,
    read: u32,
}

impl<R: Read> DemoReader<R> {
    pub fn new(input: R) -> Result<Self, DemoError> {
        let mut r = DemoReader {
            input,
            offset: 0,
            header: DemoHeader { config_text: String::new(), obs_size: 0, in_hand_size: 0, episodes: 0 },
            read: 0,
        };
        let magic = r.take(4)?;
        if magic != MAGIC {
            return Err(DemoError::Format { offset: 0, reason: "not a demo file (bad magic)".into() });
        }
        let version = u16::from_le_bytes(r.take(2)?.try_into().expect("2 bytes"));
        if version != VERSION {
            return Err(DemoError::Format { offset: 4, reason: format!("unsupported version {version}") });
        }
        let len = r.u32()? as usize;
        let at = r.offset;
        let text = String::from_utf8(r.take(len)?)
            .map_err(|_| DemoError::Format { offset: at, reason: "config text is not UTF-8".into() })?;
        r.header.config_text = text;
        let size = |key: &str| -> Result<usize, DemoError> {
            r.header
                .get(key)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| DemoError::Format { offset: at, reason: format!("config text lacks a valid {key}") })
        };
        let (obs, inh) = (size("obs_size")?, size("in_hand_size")?);
        r.header.obs_size = obs;
        r.header.in_hand_size = inh;
        r.header.episodes = r.u32()?;
        Ok(r)
    }

    pub fn header(&self) -> &DemoHeader {
        &self.header
    }

    fn take(&mut self, n: usize) -> Result<Vec<u8>, DemoError> {
        let mut buf = vec![0; n];
        self.input.read_exact(&mut buf).map_err(|source| DemoError::Io { offset: self.offset, source })?;
        self.offset += n as u64;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32, DemoError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f32s(&mut self, n: usize) -> Result<Vec<f32>, DemoError> {
        Ok(self.take(4 * n)?.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect())
    }

    fn flag(&mut self) -> Result<bool, DemoError> {
        let at = self.offset;
        match self.take(1)?[0] {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(DemoError::Format { offset: at, reason: format!("flag byte {b}") }),
        }
    }

    /// Next episode, or `None` after the declared count.
    pub fn next_episode(&mut self) -> Result<Option<Vec<Transition>>, DemoError> {
        if self.read == self.header.episodes {
            return Ok(None);
        }
        let (obs, inh) = (self.header.obs_size, self.header.in_hand_size);
        let count = self.u32()?;
        let mut out = Vec::with_capacity(count.min(4096) as usize);
        for _ in 0..count {
            let heightmap = DepthImage::from_vec(obs, self.f32s(obs * obs)?).expect("sized read");
            let in_hand = DepthImage::from_vec(inh, self.f32s(inh * inh)?).expect("sized read");
            let holding = self.flag()?;
            let action: [f32; 5] = self.f32s(5)?.try_into().expect("5 floats");
            let reward = self.f32s(1)?[0];
            let done = self.flag()?;
            out.push(Transition { obs: Observation { heightmap, in_hand, holding }, action, reward, done });
        }
        self.read += 1;
        Ok(Some(out))
    }

    /// Read every remaining episode and check the input ends there.
    pub fn read_all(mut self) -> Result<(DemoHeader, Vec<Vec<Transition>>), DemoError> {
        let mut eps = Vec::new();
        while let Some(ep) = self.next_episode()? {
            eps.push(ep);
        }
        let mut probe = [0u8; 1];
        match self.input.read(&mut probe) {
            Ok(0) => Ok((self.header, eps)),
            Ok(_) => Err(DemoError::Format { offset: self.offset, reason: "trailing bytes".into() }),
            Err(source) => Err(DemoError::Io { offset: self.offset, source }),
        }
    }
}
