//! Networked control loop: a framed wire protocol, a latency-injecting
//! gateway, a plant server, and the cyclic controller that streams
//! setpoints and logs measurements.
//!
//! The pieces compose as a *local loop* (controller ⇄ plant) or a *remote
//! loop* (controller ⇄ gateway ⇄ plant), over TCP or over in-memory pipes,
//! in real time or in a deterministic simulated-time mode where the virtual
//! clock travels inside the frames themselves.

pub mod controller;
pub mod frame;
pub mod gateway;
pub mod harness;
pub mod log;
pub mod plant_server;
pub mod transport;

pub use controller::{run_controller, run_controller_tcp, ControllerConfig};
pub use frame::{decode_frame, encode_frame, read_frame, write_frame, Frame, FrameError};
pub use gateway::{run_gateway, GatewayConfig, TimeMode};
pub use harness::{run_simulated_loop, SimLoopSpec};
pub use log::{LogError, LoopLog, LoopRecord};
pub use plant_server::{serve_plant, serve_plant_tcp};
pub use transport::{duplex_pair, DuplexStream, SplitStream};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("frame error: {0}")]
    Frame(#[from] frame::FrameError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("protocol violation: {0}")]
    Protocol(String),
    #[error("robot hash mismatch: ours {local:#014x}, peer sent {remote:#014x}")]
    HashMismatch { local: u64, remote: u64 },
    #[error("peer reported error code {0}")]
    Remote(u32),
    #[error("invalid loop config: {0}")]
    Config(String),
    #[error("plant failed: {0}")]
    Plant(#[from] crate::plant::PlantError),
    #[error("trajectory: {0}")]
    Trajectory(#[from] crate::trajectory::TrajectoryError),
    #[error("log: {0}")]
    Log(#[from] log::LogError),
    #[error("connection lost mid-session")]
    ConnectionLost,
    #[error("timed out waiting for the peer")]
    Timeout,
    #[error("{0}")]
    Internal(String),
}

pub fn error_code_name(code: u32) -> &'static str {
    match code {
        1 => "protocol violation",
        2 => "robot hash mismatch",
        3 => "bad config",
        4 => "plant failure",
        _ => "unknown",
    }
}

pub(crate) fn remote_err(f: &frame::Frame) -> NetError {
    NetError::Remote(f.payload.first().copied().unwrap_or(0.0) as u32)
}
