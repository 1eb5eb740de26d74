//! Environment server: one session per connection, one thread per
//! connection.

use crate::config::EnvConfig;
use crate::env::EnvError;
use crate::protocol::{self, msg, ErrorCode, ObsRecord, ProtocolError};
use crate::runner::VectorEnv;
use crate::tasks::Registry;
use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::Arc;

/// Largest vector size a client may request.
pub const MAX_ENVS: u16 = 256;

#[derive(Clone)]
pub struct Server {
    registry: Arc<Registry>,
    workers: usize,
}

struct Session {
    envs: VectorEnv,
    reset: bool,
}

enum Reply {
    Frame(u8, Vec<u8>),
    Error(ErrorCode, String),
}

impl Server {
    pub fn new(registry: Registry, workers: usize) -> Self {
        Server { registry: Arc::new(registry), workers: workers.max(1) }
    }

    /// Accept connections until the listener fails.
    pub fn serve(&self, listener: TcpListener) -> std::io::Result<()> {
        for stream in listener.incoming() {
            let stream = stream?;
            let server = self.clone();
            std::thread::spawn(move || {
                let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
                if let Err(e) = server.handle_tcp(stream) {
                    log::warn!("connection {peer}: {e}");
                }
            });
        }
        Ok(())
    }

    fn handle_tcp(&self, stream: TcpStream) -> Result<(), ProtocolError> {
        stream.set_nodelay(true)?;
        let reader = stream.try_clone()?;
        self.handle(reader, stream)
    }

    /// Run one session over a byte stream until CLOSE, end of input or a
    /// malformed frame.
    pub fn handle(&self, mut input: impl Read, mut output: impl Write) -> Result<(), ProtocolError> {
        let mut session: Option<Session> = None;
        loop {
            let (kind, payload) = match protocol::read_frame(&mut input) {
                Ok(Some(f)) => f,
                Ok(None) => return Ok(()),
                Err(ProtocolError::Io(e)) => return Err(e.into()),
                Err(e) => {
                    let body = protocol::encode_error(ErrorCode::Malformed, &e.to_string());
                    protocol::write_frame(&mut output, msg::ERROR, &body)?;
                    return Err(e);
                }
            };
            if kind == msg::CLOSE {
                return Ok(());
            }
            match self.dispatch(&mut session, kind, &payload) {
                Reply::Frame(k, body) => protocol::write_frame(&mut output, k, &body)?,
                Reply::Error(code, message) => {
                    protocol::write_frame(&mut output, msg::ERROR, &protocol::encode_error(code, &message))?;
                    if code == ErrorCode::Malformed {
                        return Err(ProtocolError::Malformed(message));
                    }
                }
            }
        }
    }

    fn dispatch(&self, session: &mut Option<Session>, kind: u8, payload: &[u8]) -> Reply {
        match kind {
            msg::CONFIG => match self.configure(payload) {
                Ok((s, ack)) => {
                    *session = Some(s);
                    Reply::Frame(msg::ACK, ack)
                }
                Err(e) => e,
            },
            msg::RESET | msg::STEP | msg::EXPERT => {
                let Some(s) = session.as_mut() else {
                    return Reply::Error(ErrorCode::State, "no CONFIG yet".into());
                };
                if kind != msg::STEP && !payload.is_empty() {
                    return Reply::Error(ErrorCode::Malformed, "RESET and EXPERT take no payload".into());
                }
                if kind == msg::RESET {
                    return match s.envs.reset() {
                        Ok(obs) => {
                            s.reset = true;
                            let recs: Vec<ObsRecord> =
                                obs.into_iter().map(|obs| ObsRecord { obs, reward: 0.0, done: false }).collect();
                            Reply::Frame(msg::OBS, protocol::encode_obs(&recs))
                        }
                        Err(e) => env_error(e),
                    };
                }
                if !s.reset {
                    return Reply::Error(ErrorCode::State, "no RESET yet".into());
                }
                if kind == msg::EXPERT {
                    return match s.envs.expert_actions() {
                        Ok(a) => Reply::Frame(msg::ACTIONS, protocol::encode_actions(&a)),
                        Err(e) => env_error(e),
                    };
                }
                let actions = match protocol::decode_actions(payload) {
                    Ok(a) => a,
                    Err(e) => return Reply::Error(ErrorCode::Malformed, e.to_string()),
                };
                if actions.len() != s.envs.len() {
                    return Reply::Error(
                        ErrorCode::Arity,
                        format!("expected {} actions, got {}", s.envs.len(), actions.len()),
                    );
                }
                match s.envs.step(&actions) {
                    Ok(results) => {
                        let recs: Vec<ObsRecord> = results
                            .into_iter()
                            .map(|r| ObsRecord { obs: r.obs, reward: r.reward, done: r.done })
                            .collect();
                        Reply::Frame(msg::OBS, protocol::encode_obs(&recs))
                    }
                    Err(e) => env_error(e),
                }
            }
            other => Reply::Error(ErrorCode::UnknownType, format!("unknown message type {other:#04x}")),
        }
    }

    fn configure(&self, payload: &[u8]) -> Result<(Session, Vec<u8>), Reply> {
        let (n, task, text) =
            protocol::decode_config(payload).map_err(|e| Reply::Error(ErrorCode::Malformed, e.to_string()))?;
        if n == 0 || n > MAX_ENVS {
            return Err(Reply::Error(ErrorCode::Config, format!("n must be in 1..={MAX_ENVS}, got {n}")));
        }
        let config = EnvConfig::parse(&text).map_err(|e| Reply::Error(ErrorCode::Config, e.to_string()))?;
        config.validate().map_err(|e| Reply::Error(ErrorCode::Config, e.to_string()))?;
        let task = self.registry.get(&task).map_err(|e| Reply::Error(ErrorCode::Config, e.to_string()))?;
        let envs = VectorEnv::new(task, &config, n as usize, self.workers)
            .map_err(|e| Reply::Error(ErrorCode::Config, e.to_string()))?;
        let ack = protocol::encode_ack(n, config.obs_size as u32, config.in_hand_size as u32);
        Ok((Session { envs, reset: false }, ack))
    }
}

fn env_error(e: EnvError) -> Reply {
    match e {
        EnvError::NotReset => Reply::Error(ErrorCode::State, e.to_string()),
        EnvError::ActionFormat(_) => Reply::Error(ErrorCode::Malformed, e.to_string()),
        other => Reply::Error(ErrorCode::State, other.to_string()),
    }
}
