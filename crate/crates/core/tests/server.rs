use armbench::config::EnvConfig;
use armbench::protocol::{self, msg, ErrorCode};
use armbench::server::Server;
use armbench::tasks::Registry;

fn frame(kind: u8, payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    protocol::write_frame(&mut out, kind, payload).unwrap();
    out
}

/// Run a session over `input` and return the reply frames.
fn session(input: Vec<u8>) -> Vec<(u8, Vec<u8>)> {
    let mut output = Vec::new();
    let _ = Server::new(Registry::builtin(), 1).handle(input.as_slice(), &mut output);
    let mut replies = Vec::new();
    let mut r = output.as_slice();
    while let Some(f) = protocol::read_frame(&mut r).unwrap() {
        replies.push(f);
    }
    replies
}

fn error_code(reply: &(u8, Vec<u8>)) -> ErrorCode {
    assert_eq!(reply.0, msg::ERROR);
    ErrorCode::from_u16(protocol::decode_error(&reply.1).unwrap().0).unwrap()
}

fn config(n: u16, task: &str) -> Vec<u8> {
    frame(msg::CONFIG, &protocol::encode_config(n, task, &EnvConfig::default().to_text()))
}

#[test]
fn requests_before_setup_are_state_errors() {
    let input = [frame(msg::STEP, &[]), config(1, "block_stacking"), frame(msg::EXPERT, &[])].concat();
    let replies = session(input);
    assert_eq!(replies.len(), 3);
    assert_eq!(error_code(&replies[0]), ErrorCode::State);
    assert_eq!(replies[1].0, msg::ACK);
    assert_eq!(error_code(&replies[2]), ErrorCode::State);
}

#[test]
fn wrong_action_count_is_an_arity_error() {
    let two = protocol::encode_actions(&[[0.0, 0.4, 0.0, f32::NAN, 0.0]; 2]);
    let input = [config(3, "block_stacking"), frame(msg::RESET, &[]), frame(msg::STEP, &two)].concat();
    let replies = session(input);
    assert_eq!(replies[1].0, msg::OBS);
    assert_eq!(error_code(&replies[2]), ErrorCode::Arity);
}

#[test]
fn unknown_types_and_bad_configs_keep_the_session_open() {
    let bad_key = frame(msg::CONFIG, &protocol::encode_config(1, "block_stacking", "bogus=1\n"));
    let input =
        [frame(0x42, &[]), config(1, "no_such_task"), bad_key, config(0, "block_stacking"), config(1, "covid_test")]
            .concat();
    let replies = session(input);
    assert_eq!(error_code(&replies[0]), ErrorCode::UnknownType);
    assert_eq!(error_code(&replies[1]), ErrorCode::Config);
    assert_eq!(error_code(&replies[2]), ErrorCode::Config);
    assert_eq!(error_code(&replies[3]), ErrorCode::Config);
    assert_eq!(replies[4].0, msg::ACK);
}

#[test]
fn malformed_frames_close_the_connection() {
    let ragged = frame(msg::STEP, &[0u8; 19]);
    let input = [config(1, "block_stacking"), frame(msg::RESET, &[]), ragged, frame(msg::EXPERT, &[])].concat();
    let replies = session(input);
    assert_eq!(replies.len(), 3);
    assert_eq!(error_code(&replies[2]), ErrorCode::Malformed);

    let oversized = (protocol::MAX_FRAME + 1).to_le_bytes().to_vec();
    let replies = session([oversized, frame(msg::EXPERT, &[])].concat());
    assert_eq!(replies.len(), 1);
    assert_eq!(error_code(&replies[0]), ErrorCode::Malformed);
}

#[test]
fn non_finite_coordinates_are_malformed() {
    let nan = protocol::encode_actions(&[[0.0, f32::NAN, 0.0, f32::NAN, 0.0]]);
    let input = [config(1, "block_stacking"), frame(msg::RESET, &[]), frame(msg::STEP, &nan)].concat();
    assert_eq!(error_code(&session(input)[2]), ErrorCode::Malformed);
}

#[test]
fn close_ends_the_session_silently() {
    let input = [config(1, "block_stacking"), frame(msg::CLOSE, &[]), frame(msg::RESET, &[])].concat();
    let replies = session(input);
    assert_eq!(replies.len(), 1);
    let (n, obs, inh) = protocol::decode_ack(&replies[0].1).unwrap();
    let c = EnvConfig::default();
    assert_eq!((n as usize, obs as usize, inh as usize), (1, c.obs_size, c.in_hand_size));
}

#[test]
fn expert_actions_solve_through_the_server() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::spawn(move || Server::new(Registry::builtin(), 1).serve(listener));
    let mut client = armbench::client::Client::connect(addr).unwrap();
    client.configure(2, "house_building_2", &EnvConfig::default().to_text()).unwrap();
    client.reset().unwrap();
    let mut rewards = [0.0f32; 2];
    for _ in 0..4 {
        let actions = client.expert().unwrap();
        for (i, rec) in client.step(&actions).unwrap().iter().enumerate() {
            rewards[i] += rec.reward;
        }
    }
    assert_eq!(rewards, [1.0, 1.0]);
    client.close().unwrap();
}
