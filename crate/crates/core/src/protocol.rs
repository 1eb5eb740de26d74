//! Length-prefixed binary protocol between a client and an environment
//! server.
//!
//! A frame is a little-endian `u32` length, a `u8` message type and a payload
//! of `length - 1` bytes. Requests:
//!
//! | type | name   | payload                                              |
//! |------|--------|------------------------------------------------------|
//! | 0x01 | CONFIG | `u16 n`, `u16 len` + task name, `u32 len` + config   |
//! | 0x02 | RESET  | empty                                                |
//! | 0x03 | STEP   | `n × f32[5]` actions                                 |
//! | 0x04 | EXPERT | empty                                                |
//! | 0x05 | CLOSE  | empty                                                |
//!
//! Replies:
//!
//! | type | name    | payload                                                  |
//! |------|---------|----------------------------------------------------------|
//! | 0x80 | ACK     | `u16 n`, `u32 obs_size`, `u32 in_hand_size`              |
//! | 0x81 | OBS     | per env: heightmap, in-hand, `u8` holding, `f32` reward, `u8` done |
//! | 0x82 | ACTIONS | `n × f32[5]`                                             |
//! | 0xFF | ERROR   | `u16` code, UTF-8 message                                |

use crate::env::{Observation, RawAction};
use crate::render::DepthImage;
use std::io::{self, Read, Write};
use thiserror::Error;

/// Largest accepted frame length.
pub const MAX_FRAME: u32 = 64 << 20;
pub const DEFAULT_PORT: u16 = 9147;

pub mod msg {
    pub const CONFIG: u8 = 0x01;
    pub const RESET: u8 = 0x02;
    pub const STEP: u8 = 0x03;
    pub const EXPERT: u8 = 0x04;
    pub const CLOSE: u8 = 0x05;
    pub const ACK: u8 = 0x80;
    pub const OBS: u8 = 0x81;
    pub const ACTIONS: u8 = 0x82;
    pub const ERROR: u8 = 0xFF;
}

/// Codes carried by ERROR replies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u16)]
pub enum ErrorCode {
    /// Request not valid in the current session state.
    State = 1,
    /// Undecodable frame or payload; the server closes the connection.
    Malformed = 2,
    /// Wrong number of actions.
    Arity = 3,
    UnknownType = 4,
    /// Rejected configuration or task.
    Config = 5,
}

impl ErrorCode {
    pub fn from_u16(v: u16) -> Option<Self> {
        Some(match v {
            1 => ErrorCode::State,
            2 => ErrorCode::Malformed,
            3 => ErrorCode::Arity,
            4 => ErrorCode::UnknownType,
            5 => ErrorCode::Config,
            _ => return None,
        })
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("frame length {0} exceeds the limit")]
    FrameTooLarge(u32),
    #[error("malformed payload: {0}")]
    Malformed(String),
    #[error("unexpected message type {0:#04x}")]
    Unexpected(u8),
    #[error("server error {code}: {message}")]
    Remote { code: u16, message: String },
}

/// Read one frame. `Ok(None)` on a clean end of stream before the length.
pub fn read_frame(r: &mut impl Read) -> Result<Option<(u8, Vec<u8>)>, ProtocolError> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::Error::from(io::ErrorKind::UnexpectedEof).into()),
            Ok(k) => got += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    let len = u32::from_le_bytes(len);
    if len > MAX_FRAME {
        return Err(ProtocolError::FrameTooLarge(len));
    }
    if len == 0 {
        return Err(ProtocolError::Malformed("empty frame".into()));
    }
    let mut body = vec![0u8; len as usize];
    r.read_exact(&mut body)?;
    let kind = body.remove(0);
    Ok(Some((kind, body)))
}

pub fn write_frame(w: &mut impl Write, kind: u8, payload: &[u8]) -> Result<(), ProtocolError> {
    let len = payload.len() as u64 + 1;
    if len > MAX_FRAME as u64 {
        return Err(ProtocolError::FrameTooLarge(len.min(u32::MAX as u64) as u32));
    }
    let mut buf = Vec::with_capacity(len as usize + 4);
    buf.extend_from_slice(&(len as u32).to_le_bytes());
    buf.push(kind);
    buf.extend_from_slice(payload);
    w.write_all(&buf)?;
    w.flush()?;
    Ok(())
}

/// Cursor over a payload.
pub struct Payload<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Payload<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Payload { data, pos: 0 }
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or_else(|| {
            ProtocolError::Malformed(format!(
                "need {n} bytes at offset {}, have {}",
                self.pos,
                self.data.len() - self.pos
            ))
        })?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.bytes(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, ProtocolError> {
        Ok(u16::from_le_bytes(self.bytes(2)?.try_into().expect("2 bytes")))
    }

    pub fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_le_bytes(self.bytes(4)?.try_into().expect("4 bytes")))
    }

    pub fn f32(&mut self) -> Result<f32, ProtocolError> {
        Ok(f32::from_le_bytes(self.bytes(4)?.try_into().expect("4 bytes")))
    }

    pub fn string(&mut self, n: usize) -> Result<String, ProtocolError> {
        String::from_utf8(self.bytes(n)?.to_vec()).map_err(|_| ProtocolError::Malformed("invalid UTF-8".into()))
    }

    pub fn finish(&self) -> Result<(), ProtocolError> {
        if self.pos == self.data.len() {
            Ok(())
        } else {
            Err(ProtocolError::Malformed(format!("{} trailing bytes", self.data.len() - self.pos)))
        }
    }
}

pub fn encode_config(n: u16, task: &str, config_text: &str) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + task.len() + config_text.len());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&(task.len() as u16).to_le_bytes());
    out.extend_from_slice(task.as_bytes());
    out.extend_from_slice(&(config_text.len() as u32).to_le_bytes());
    out.extend_from_slice(config_text.as_bytes());
    out
}

pub fn decode_config(payload: &[u8]) -> Result<(u16, String, String), ProtocolError> {
    let mut p = Payload::new(payload);
    let n = p.u16()?;
    let len = p.u16()? as usize;
    let task = p.string(len)?;
    let len = p.u32()? as usize;
    let text = p.string(len)?;
    p.finish()?;
    Ok((n, task, text))
}

pub fn encode_ack(n: u16, obs_size: u32, in_hand_size: u32) -> Vec<u8> {
    let mut out = n.to_le_bytes().to_vec();
    out.extend_from_slice(&obs_size.to_le_bytes());
    out.extend_from_slice(&in_hand_size.to_le_bytes());
    out
}

pub fn decode_ack(payload: &[u8]) -> Result<(u16, u32, u32), ProtocolError> {
    let mut p = Payload::new(payload);
    let v = (p.u16()?, p.u32()?, p.u32()?);
    p.finish()?;
    Ok(v)
}

pub fn encode_actions(actions: &[RawAction]) -> Vec<u8> {
    actions.iter().flatten().flat_map(|f| f.to_le_bytes()).collect()
}

/// Actions from a STEP or ACTIONS payload.
pub fn decode_actions(payload: &[u8]) -> Result<Vec<RawAction>, ProtocolError> {
    if !payload.len().is_multiple_of(20) {
        return Err(ProtocolError::Malformed(format!("{} bytes is not a whole number of actions", payload.len())));
    }
    Ok(payload
        .chunks_exact(20)
        .map(|c| std::array::from_fn(|i| f32::from_le_bytes(c[4 * i..4 * i + 4].try_into().expect("4 bytes"))))
        .collect())
}

/// One environment's entry in an OBS reply.
#[derive(Clone, Debug, PartialEq)]
pub struct ObsRecord {
    pub obs: Observation,
    pub reward: f32,
    pub done: bool,
}

pub fn encode_obs(records: &[ObsRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        for f in r.obs.heightmap.as_slice().iter().chain(r.obs.in_hand.as_slice()) {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out.push(u8::from(r.obs.holding));
        out.extend_from_slice(&r.reward.to_le_bytes());
        out.push(u8::from(r.done));
    }
    out
}

pub fn decode_obs(payload: &[u8], obs_size: usize, in_hand_size: usize) -> Result<Vec<ObsRecord>, ProtocolError> {
    let mut p = Payload::new(payload);
    let mut out = Vec::new();
    let flag = |b: u8| match b {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(ProtocolError::Malformed(format!("flag byte {b}"))),
    };
    while p.pos < payload.len() {
        let mut image = |size: usize| -> Result<DepthImage, ProtocolError> {
            let v = (0..size * size).map(|_| p.f32()).collect::<Result<Vec<_>, _>>()?;
            Ok(DepthImage::from_vec(size, v).expect("sized"))
        };
        let heightmap = image(obs_size)?;
        let in_hand = image(in_hand_size)?;
        let holding = flag(p.u8()?)?;
        let reward = p.f32()?;
        let done = flag(p.u8()?)?;
        out.push(ObsRecord { obs: Observation { heightmap, in_hand, holding }, reward, done });
    }
    Ok(out)
}

pub fn encode_error(code: ErrorCode, message: &str) -> Vec<u8> {
    let mut out = (code as u16).to_le_bytes().to_vec();
    out.extend_from_slice(message.as_bytes());
    out
}

pub fn decode_error(payload: &[u8]) -> Result<(u16, String), ProtocolError> {
    let mut p = Payload::new(payload);
    let code = p.u16()?;
    let msg = String::from_utf8_lossy(&payload[2..]).into_owned();
    Ok((code, msg))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_round_trip() {
        let mut buf = Vec::new();
        write_frame(&mut buf, msg::RESET, &[]).unwrap();
        write_frame(&mut buf, msg::STEP, &encode_actions(&[[0.0, 0.4, 0.1, f32::NAN, 1.0]])).unwrap();
        let mut r = buf.as_slice();
        assert_eq!(read_frame(&mut r).unwrap(), Some((msg::RESET, vec![])));
        let (k, p) = read_frame(&mut r).unwrap().unwrap();
        assert_eq!(k, msg::STEP);
        let a = decode_actions(&p).unwrap();
        assert_eq!(a[0][1], 0.4);
        assert!(a[0][3].is_nan());
        assert!(read_frame(&mut r).unwrap().is_none());
    }

    #[test]
    fn oversized_frame_is_rejected() {
        let mut buf = (MAX_FRAME + 1).to_le_bytes().to_vec();
        buf.push(msg::RESET);
        assert!(matches!(read_frame(&mut buf.as_slice()), Err(ProtocolError::FrameTooLarge(_))));
    }

    #[test]
    fn config_round_trip() {
        let p = encode_config(3, "bin_packing", "seed=4\n");
        assert_eq!(decode_config(&p).unwrap(), (3, "bin_packing".to_string(), "seed=4\n".to_string()));
        assert!(decode_config(&p[..p.len() - 1]).is_err());
    }
}
