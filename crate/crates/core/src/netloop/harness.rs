//! One-call composition of a full simulated-time experiment — controller,
//! optional gateway, and plant server wired over in-memory pipes on
//! threads. Used by the test suite and by the CLI's `run-loop` command.

use std::path::Path;
use std::thread;

use crate::model::RobotDescription;
use crate::plant::PlantConfig;
use crate::trajectory::TrajectoryPlan;

use super::controller::{run_controller, ControllerConfig};
use super::gateway::{run_gateway, GatewayConfig, TimeMode};
use super::log::LoopLog;
use super::plant_server::serve_plant;
use super::transport::duplex_pair;
use super::NetError;

#[derive(Debug, Clone)]
pub struct SimLoopSpec {
    pub cycle_s: f64,
    pub plant: PlantConfig,
    /// `(base delay ms, jitter ms, seed)`; `None` for a direct connection.
    pub gateway: Option<(f64, f64, u64)>,
}

impl Default for SimLoopSpec {
    fn default() -> Self {
        SimLoopSpec {
            cycle_s: 0.01,
            plant: PlantConfig::default(),
            gateway: None,
        }
    }
}

/// Runs one complete experiment in simulated time and returns the log.
/// Deterministic: identical inputs (including the gateway seed) produce an
/// identical log.
pub fn run_simulated_loop(
    desc: &RobotDescription,
    plan: &TrajectoryPlan,
    spec: &SimLoopSpec,
    log_path: Option<&Path>,
) -> Result<LoopLog, NetError> {
    let (ctrl_end, facing_ctrl) = duplex_pair();
    let plant_cfg = spec.plant;
    let d = desc.clone();
    let mut gw_handle = None;
    let plant_handle = match spec.gateway {
        Some((base, jitter, seed)) => {
            let (facing_plant, plant_end) = duplex_pair();
            let gcfg = GatewayConfig {
                base_delay_ms: base,
                jitter_ms: jitter,
                seed,
                mode: TimeMode::Simulated,
            };
            gw_handle = Some(
                thread::Builder::new()
                    .name("gateway".into())
                    .spawn(move || run_gateway(facing_ctrl, facing_plant, &gcfg))
                    .expect("spawn gateway"),
            );
            thread::Builder::new()
                .name("plant".into())
                .spawn(move || serve_plant(&d, &plant_cfg, plant_end))
                .expect("spawn plant")
        }
        None => thread::Builder::new()
            .name("plant".into())
            .spawn(move || serve_plant(&d, &plant_cfg, facing_ctrl))
            .expect("spawn plant"),
    };
    let ccfg = ControllerConfig {
        cycle_s: spec.cycle_s,
        mode: TimeMode::Simulated,
    };
    let result = run_controller(desc, plan, &ccfg, ctrl_end, log_path);
    let plant_res = plant_handle
        .join()
        .unwrap_or_else(|_| Err(NetError::Internal("plant thread panicked".into())));
    let gw_res = gw_handle.map(|h| {
        h.join()
            .unwrap_or_else(|_| Err(NetError::Internal("gateway thread panicked".into())))
    });
    match result {
        Ok(log) => {
            if !log.truncated {
                // a clean controller exit should mean clean peers too
                plant_res?;
                if let Some(g) = gw_res {
                    g?;
                }
            }
            Ok(log)
        }
        Err(e) => Err(e),
    }
}
