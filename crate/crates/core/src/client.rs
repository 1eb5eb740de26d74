//! Blocking client for the environment server.

use crate::env::RawAction;
use crate::protocol::{self, msg, ObsRecord, ProtocolError};
use std::io::{Read, Write};
use std::net::{TcpStream, ToSocketAddrs};

pub struct Client<S: Read + Write> {
    stream: S,
    sizes: Option<(usize, usize)>,
}

impl Client<TcpStream> {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, ProtocolError> {
        let stream = TcpStream::connect(addr)?;
        stream.set_nodelay(true)?;
        Ok(Client::new(stream))
    }
}

impl<S: Read + Write> Client<S> {
    pub fn new(stream: S) -> Self {
        Client { stream, sizes: None }
    }

    /// Send one frame and return the reply frame. ERROR replies become
    /// [`ProtocolError::Remote`].
    pub fn request(&mut self, kind: u8, payload: &[u8]) -> Result<(u8, Vec<u8>), ProtocolError> {
        protocol::write_frame(&mut self.stream, kind, payload)?;
        let (k, body) = protocol::read_frame(&mut self.stream)?
            .ok_or_else(|| ProtocolError::Io(std::io::ErrorKind::UnexpectedEof.into()))?;
        if k == msg::ERROR {
            let (code, message) = protocol::decode_error(&body)?;
            return Err(ProtocolError::Remote { code, message });
        }
        Ok((k, body))
    }

    fn expect(&mut self, kind: u8, payload: &[u8], want: u8) -> Result<Vec<u8>, ProtocolError> {
        let (k, body) = self.request(kind, payload)?;
        if k != want {
            return Err(ProtocolError::Unexpected(k));
        }
        Ok(body)
    }

    /// Open a session with `n` environments. Returns `(obs_size, in_hand_size)`.
    pub fn configure(&mut self, n: u16, task: &str, config_text: &str) -> Result<(usize, usize), ProtocolError> {
        let body = self.expect(msg::CONFIG, &protocol::encode_config(n, task, config_text), msg::ACK)?;
        let (_, obs, inh) = protocol::decode_ack(&body)?;
        self.sizes = Some((obs as usize, inh as usize));
        Ok((obs as usize, inh as usize))
    }

    fn obs(&mut self, body: &[u8]) -> Result<Vec<ObsRecord>, ProtocolError> {
        let (obs, inh) = self.sizes.ok_or_else(|| ProtocolError::Malformed("OBS before ACK".into()))?;
        protocol::decode_obs(body, obs, inh)
    }

    pub fn reset(&mut self) -> Result<Vec<ObsRecord>, ProtocolError> {
        let body = self.reset_raw()?;
        self.obs(&body)
    }

    /// RESET returning the raw OBS payload.
    pub fn reset_raw(&mut self) -> Result<Vec<u8>, ProtocolError> {
        self.expect(msg::RESET, &[], msg::OBS)
    }

    pub fn step(&mut self, actions: &[RawAction]) -> Result<Vec<ObsRecord>, ProtocolError> {
        let body = self.step_raw(actions)?;
        self.obs(&body)
    }

    /// STEP returning the raw OBS payload.
    pub fn step_raw(&mut self, actions: &[RawAction]) -> Result<Vec<u8>, ProtocolError> {
        self.expect(msg::STEP, &protocol::encode_actions(actions), msg::OBS)
    }

    pub fn expert(&mut self) -> Result<Vec<RawAction>, ProtocolError> {
        let body = self.expect(msg::EXPERT, &[], msg::ACTIONS)?;
        protocol::decode_actions(&body)
    }

    pub fn close(mut self) -> Result<(), ProtocolError> {
        protocol::write_frame(&mut self.stream, msg::CLOSE, &[])
    }
}
