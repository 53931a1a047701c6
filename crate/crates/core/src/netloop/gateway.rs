//! Latency-injecting gateway: forwards frames in both directions, adding a
//! seeded uniform delay per frame. Stands between the controller and the
//! plant to emulate a non-deterministic transport chain.
//!
//! Delays are monotonized per direction so a frame never overtakes its
//! predecessor. In simulated-time mode the delay is applied by rewriting
//! `t_send_us` to the frame's virtual arrival time (the wire stays as fast
//! as the pipe); in real-time mode the gateway actually sleeps.

use std::io::{Read, Write};
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::frame::{read_frame, write_frame, FrameError};
use super::transport::SplitStream;
use super::NetError;

/// Salt XORed into the seed for the plant→controller direction so the two
/// directions draw independent jitter streams from one configured seed.
pub const DOWNSTREAM_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeMode {
    /// Virtual clocks carried by the frames themselves; runs as fast as the
    /// transport allows and is fully deterministic.
    Simulated,
    /// Wall clocks and real sleeps.
    Realtime,
}

#[derive(Debug, Clone)]
pub struct GatewayConfig {
    pub base_delay_ms: f64,
    pub jitter_ms: f64,
    pub seed: u64,
    pub mode: TimeMode,
}

impl GatewayConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.base_delay_ms.is_finite() && self.base_delay_ms >= 0.0) {
            return Err(NetError::Config("base delay must be ≥ 0".into()));
        }
        if !(self.jitter_ms.is_finite() && self.jitter_ms >= 0.0) {
            return Err(NetError::Config("jitter must be ≥ 0".into()));
        }
        Ok(())
    }
}

fn draw_delay_us(cfg: &GatewayConfig, rng: &mut ChaCha8Rng) -> u64 {
    let jitter = if cfg.jitter_ms > 0.0 {
        rng.random_range(-cfg.jitter_ms..=cfg.jitter_ms)
    } else {
        0.0
    };
    ((cfg.base_delay_ms + jitter).max(0.0) * 1000.0).round() as u64
}

fn elapsed_us(since: Instant) -> u64 {
    since.elapsed().as_micros() as u64
}

/// Forwards one direction until the source closes. Returns Ok on a clean
/// close of either side.
fn pump(
    mut r: impl Read,
    mut w: impl Write,
    cfg: &GatewayConfig,
    mut rng: ChaCha8Rng,
) -> Result<(), NetError> {
    let epoch = Instant::now();
    let mut last_stamp: u64 = 0;
    let mut last_deadline_us: u64 = 0;
    loop {
        let mut f = match read_frame(&mut r) {
            Ok(f) => f,
            Err(FrameError::Closed) => return Ok(()),
            Err(e) => return Err(e.into()),
        };
        let delay_us = draw_delay_us(cfg, &mut rng);
        match cfg.mode {
            TimeMode::Simulated => {
                let arrival = f.t_send_us.saturating_add(delay_us).max(last_stamp);
                f.t_send_us = arrival;
                last_stamp = arrival;
            }
            TimeMode::Realtime => {
                let due = (elapsed_us(epoch) + delay_us).max(last_deadline_us);
                last_deadline_us = due;
                let now = elapsed_us(epoch);
                if due > now {
                    thread::sleep(Duration::from_micros(due - now));
                }
            }
        }
        if write_frame(&mut w, &f).is_err() {
            // destination hung up; drain side is done too
            return Ok(());
        }
    }
}

/// Runs the gateway over two established connections until both directions
/// close. Each direction draws an independent seeded jitter stream.
pub fn run_gateway<C: SplitStream, P: SplitStream>(
    client: C,
    plant: P,
    cfg: &GatewayConfig,
) -> Result<(), NetError> {
    cfg.validate()?;
    let (cr, cw) = client.into_split()?;
    let (pr, pw) = plant.into_split()?;
    let up_cfg = cfg.clone();
    let down_cfg = cfg.clone();
    let up_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let down_rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ DOWNSTREAM_SEED_SALT);
    let up = thread::Builder::new()
        .name("gw-up".into())
        .spawn(move || pump(cr, pw, &up_cfg, up_rng))
        .expect("spawn gateway thread");
    let down = thread::Builder::new()
        .name("gw-down".into())
        .spawn(move || pump(pr, cw, &down_cfg, down_rng))
        .expect("spawn gateway thread");
    let ru = up
        .join()
        .unwrap_or_else(|_| Err(NetError::Internal("gateway up-pump panicked".into())));
    let rd = down
        .join()
        .unwrap_or_else(|_| Err(NetError::Internal("gateway down-pump panicked".into())));
    ru.and(rd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netloop::frame::{encode_frame, Frame, FrameSender, MSG_SETPOINT, MSG_STATE};
    use crate::netloop::transport::duplex_pair;

    /// Pushes `n` frames spaced `spacing_us` apart through a gateway and
    /// returns (sent stamp, forwarded stamp) pairs.
    fn run_sim(cfg: &GatewayConfig, n: u32, spacing_us: u64) -> Vec<(u64, u64)> {
        let (mut client, gw_client) = duplex_pair();
        let (gw_plant, mut plant) = duplex_pair();
        let gcfg = cfg.clone();
        let gw = thread::spawn(move || run_gateway(gw_client, gw_plant, &gcfg));
        let mut sent = Vec::new();
        {
            let mut tx = FrameSender::new(&mut client);
            for k in 0..n {
                let t = k as u64 * spacing_us;
                tx.send(MSG_SETPOINT, t, vec![f64::from(k)]).unwrap();
                sent.push(t);
            }
        }
        drop(client);
        let mut out = Vec::new();
        for (k, &t) in sent.iter().enumerate() {
            let f = read_frame(&mut plant).unwrap();
            assert_eq!(f.seq, k as u32 + 1);
            assert_eq!(f.payload, vec![k as f64]);
            out.push((t, f.t_send_us));
        }
        assert!(matches!(read_frame(&mut plant), Err(FrameError::Closed)));
        drop(plant);
        gw.join().unwrap().unwrap();
        out
    }

    #[test]
    fn sim_delay_stats_match_configuration() {
        let cfg = GatewayConfig {
            base_delay_ms: 120.0,
            jitter_ms: 10.0,
            seed: 42,
            mode: TimeMode::Simulated,
        };
        let pairs = run_sim(&cfg, 1000, 10_000);
        let mut sum = 0.0;
        let mut last = 0u64;
        for (i, (sent, got)) in pairs.iter().enumerate() {
            let added_ms = (got - sent) as f64 / 1000.0;
            assert!(
                (110.0..=130.001).contains(&added_ms),
                "frame {i}: added delay {added_ms} ms out of range"
            );
            if i > 0 {
                assert!(*got >= last, "forwarded stamps must stay monotonic");
            }
            last = *got;
            sum += added_ms;
        }
        let mean = sum / pairs.len() as f64;
        assert!((mean - 120.0).abs() < 2.0, "mean added delay {mean} ms");
    }

    #[test]
    fn sim_delay_is_deterministic_per_seed() {
        let cfg = GatewayConfig {
            base_delay_ms: 20.0,
            jitter_ms: 5.0,
            seed: 7,
            mode: TimeMode::Simulated,
        };
        let a = run_sim(&cfg, 200, 10_000);
        let b = run_sim(&cfg, 200, 10_000);
        assert_eq!(a, b);
        let other = run_sim(
            &GatewayConfig {
                seed: 8,
                ..cfg.clone()
            },
            200,
            10_000,
        );
        assert_ne!(a, other);
    }

    #[test]
    fn zero_delay_passthrough_is_byte_identical() {
        let (mut client, gw_client) = duplex_pair();
        let (gw_plant, mut plant) = duplex_pair();
        let cfg = GatewayConfig {
            base_delay_ms: 0.0,
            jitter_ms: 0.0,
            seed: 1,
            mode: TimeMode::Simulated,
        };
        let gw = thread::spawn(move || run_gateway(gw_client, gw_plant, &cfg));
        // includes a msg_type the gateway does not know: forwarded untouched
        let frames = vec![
            Frame::new(MSG_STATE, 1, 5, vec![1.0, 2.0]),
            Frame::new(0x55, 2, 6, vec![f64::NAN]),
            Frame::new(MSG_SETPOINT, 3, 1000, vec![]),
        ];
        let mut wire_in = Vec::new();
        for f in &frames {
            let bytes = encode_frame(f);
            use std::io::Write as _;
            client.write_all(&bytes).unwrap();
            wire_in.extend(bytes);
        }
        drop(client);
        let mut wire_out = Vec::new();
        use std::io::Read as _;
        plant.read_to_end(&mut wire_out).unwrap();
        assert_eq!(wire_in, wire_out);
        drop(plant);
        gw.join().unwrap().unwrap();
    }

    #[test]
    fn realtime_mode_actually_delays() {
        let (mut client, gw_client) = duplex_pair();
        let (gw_plant, mut plant) = duplex_pair();
        let cfg = GatewayConfig {
            base_delay_ms: 20.0,
            jitter_ms: 0.0,
            seed: 1,
            mode: TimeMode::Realtime,
        };
        let gw = thread::spawn(move || run_gateway(gw_client, gw_plant, &cfg));
        let t0 = Instant::now();
        write_frame(&mut client, &Frame::new(MSG_STATE, 1, 0, vec![])).unwrap();
        let f = read_frame(&mut plant).unwrap();
        let waited = t0.elapsed();
        assert_eq!(f.seq, 1);
        assert!(waited >= Duration::from_millis(19), "waited {waited:?}");
        assert!(waited < Duration::from_millis(500), "waited {waited:?}");
        drop(client);
        drop(plant);
        gw.join().unwrap().unwrap();
    }

    #[test]
    fn negative_config_is_rejected() {
        let cfg = GatewayConfig {
            base_delay_ms: -1.0,
            jitter_ms: 0.0,
            seed: 0,
            mode: TimeMode::Simulated,
        };
        let (a, b) = duplex_pair();
        assert!(matches!(
            run_gateway(a, b, &cfg),
            Err(NetError::Config(_))
        ));
    }
}
