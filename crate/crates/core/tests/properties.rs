//! Randomized property tests for the invariants the module tests only probe
//! at fixed points: codec round-trips, kinematic identities, statics
//! symmetries, plant unilaterality, delay-shift recovery and gateway
//! ordering.

use cdpr_core::analysis::estimate_delay_detailed;
use cdpr_core::kinematics::{cable_lengths, fk_closed};
use cdpr_core::model::{reference_robot, Vec2};
use cdpr_core::netloop::{
    decode_frame, duplex_pair, encode_frame, read_frame, run_gateway, write_frame, Frame,
    FrameError, GatewayConfig, TimeMode,
};
use cdpr_core::plant::{init_state, step, PlantConfig};
use cdpr_core::statics::{is_feasible, solve_tensions, structure_matrix};
use proptest::prelude::*;

// Dyadic coordinates (multiples of 1/16, well under 2^53) make every
// translation below exact in floating point, so "covariant" can be asserted
// bitwise instead of within a tolerance.
fn dyadic(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    let (a, b) = ((lo * 16.0) as i32, (hi * 16.0) as i32);
    (a..=b).prop_map(|v| f64::from(v) / 16.0)
}

fn arb_frame() -> impl Strategy<Value = Frame> {
    (
        any::<u8>(),
        any::<u16>(),
        any::<u32>(),
        any::<u64>(),
        prop::collection::vec(any::<u64>(), 0..32),
    )
        .prop_map(|(msg_type, flags, seq, t_send_us, bits)| Frame {
            msg_type,
            flags,
            seq,
            t_send_us,
            payload: bits.into_iter().map(f64::from_bits).collect(),
        })
}

proptest! {
    #[test]
    fn codec_round_trip_is_bit_exact(frame in arb_frame()) {
        let decoded = decode_frame(&encode_frame(&frame)).unwrap();
        prop_assert_eq!(decoded.msg_type, frame.msg_type);
        prop_assert_eq!(decoded.flags, frame.flags);
        prop_assert_eq!(decoded.seq, frame.seq);
        prop_assert_eq!(decoded.t_send_us, frame.t_send_us);
        prop_assert_eq!(decoded.payload.len(), frame.payload.len());
        for (a, b) in decoded.payload.iter().zip(&frame.payload) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn ik_is_translation_covariant(
        px in dyadic(100.0, 1400.0),
        py in dyadic(100.0, 1300.0),
        dx in dyadic(-1000.0, 1000.0),
        dy in dyadic(-1000.0, 1000.0),
    ) {
        let r = reference_robot();
        let d = Vec2::new(dx, dy);
        let mut moved = r.clone();
        for a in &mut moved.anchors {
            *a = *a + d;
        }
        let p = Vec2::new(px, py);
        let base = cable_lengths(&r, p);
        let translated = cable_lengths(&moved, p + d);
        for (a, b) in base.iter().zip(&translated) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn fk_inverts_ik_inside_the_workspace(
        px in 100.0f64..1400.0,
        py in 100.0f64..1300.0,
    ) {
        let r = reference_robot();
        let p = Vec2::new(px, py);
        let back = fk_closed(&r, &cable_lengths(&r, p)).unwrap();
        prop_assert!((back - p).norm() < 1e-9);
    }

    #[test]
    fn cable_length_gradient_is_minus_the_force_column(
        px in 100.0f64..1400.0,
        py in 100.0f64..1300.0,
    ) {
        let r = reference_robot();
        let p = Vec2::new(px, py);
        let a = structure_matrix(&r, p).unwrap();
        let h = 1e-3;
        for i in 0..2 {
            let ddx = (cable_lengths(&r, Vec2::new(px + h, py))[i]
                - cable_lengths(&r, Vec2::new(px - h, py))[i])
                / (2.0 * h);
            let ddy = (cable_lengths(&r, Vec2::new(px, py + h))[i]
                - cable_lengths(&r, Vec2::new(px, py - h))[i])
                / (2.0 * h);
            prop_assert!((ddx + a[(0, i)]).abs() < 1e-6);
            prop_assert!((ddy + a[(1, i)]).abs() < 1e-6);
        }
    }

    #[test]
    fn tensions_swap_under_mirror_symmetry(
        px in 100.0f64..1400.0,
        py in 100.0f64..1300.0,
    ) {
        let r = reference_robot();
        let t = solve_tensions(&r, Vec2::new(px, py));
        let m = solve_tensions(&r, Vec2::new(1500.0 - px, py));
        prop_assume!(t.is_ok() && m.is_ok());
        let (t, m) = (t.unwrap(), m.unwrap());
        prop_assert!((t[0] - m[1]).abs() < 1e-9);
        prop_assert!((t[1] - m[0]).abs() < 1e-9);
    }

    #[test]
    fn doubling_the_mass_doubles_every_tension(
        px in 100.0f64..1400.0,
        py in 100.0f64..1300.0,
    ) {
        let r = reference_robot();
        let p = Vec2::new(px, py);
        let (ok, t) = is_feasible(&r, p);
        prop_assume!(ok);
        let t = t.unwrap();
        let mut heavy = r.clone();
        heavy.ee_mass_kg *= 2.0;
        let t2 = solve_tensions(&heavy, p).unwrap();
        for i in 0..2 {
            prop_assert!((t2[i] - 2.0 * t[i]).abs() <= 1e-12 * t2[i].abs());
        }
    }

    #[test]
    fn slack_cables_never_carry_tension(
        deltas in prop::collection::vec((-150.0f64..150.0, -150.0f64..150.0), 1..50),
    ) {
        let r = reference_robot();
        let cfg = PlantConfig::default();
        let centre = Vec2::new(750.0, 750.0);
        let base = cable_lengths(&r, centre);
        let mut s = init_state(&r, centre).unwrap();
        for (d0, d1) in deltas {
            let cmd = vec![base[0] + d0, base[1] + d1];
            // stretch is evaluated at the incoming pose against the freshly
            // moved axes; test the invariant at that same instant
            let dist = cable_lengths(&r, s.p);
            let next = step(&r, &cfg, &s, &cmd).unwrap();
            for (i, d) in dist.iter().enumerate() {
                prop_assert!(next.tensions[i] >= 0.0);
                if d - next.axis[i] <= 0.0 {
                    prop_assert_eq!(next.tensions[i], 0.0);
                }
            }
            s = next;
        }
    }

    #[test]
    fn integer_shifts_are_recovered_exactly(
        increments in prop::collection::vec(-5.0f64..5.0, 210),
        k in 0usize..=70,
    ) {
        // a random walk delayed by k whole samples: the integer peak must
        // land on k itself (n = 140, so lags up to n/2 = 70 are in range)
        let n = 140;
        let mut base = Vec::with_capacity(increments.len());
        let mut acc = 0.0;
        for d in &increments {
            acc += d;
            base.push(acc);
        }
        let target = &base[k..k + n];
        let measured = &base[..n];
        let var = |s: &[f64]| {
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            s.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        };
        prop_assume!(var(&target[..n / 2]) > 1e-9);
        let fit = estimate_delay_detailed(target, measured, 0.01).unwrap();
        prop_assert_eq!(fit.lag, k);
    }
}

proptest! {
    // each case spawns a gateway thread; keep the count modest
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn gateway_preserves_frame_order(
        seed in any::<u64>(),
        base_delay_ms in 0.0f64..200.0,
        jitter_ms in 0.0f64..50.0,
    ) {
        let cfg = GatewayConfig {
            base_delay_ms,
            jitter_ms,
            seed,
            mode: TimeMode::Simulated,
        };
        let (mut client, gw_client) = duplex_pair();
        let (gw_plant, mut plant) = duplex_pair();
        let gw = std::thread::spawn(move || run_gateway(gw_client, gw_plant, &cfg));
        for k in 0..40u32 {
            let f = Frame {
                msg_type: 0x04,
                flags: 0,
                seq: k + 1,
                t_send_us: u64::from(k) * 10_000,
                payload: vec![f64::from(k)],
            };
            write_frame(&mut client, &f).unwrap();
        }
        drop(client);
        for k in 0..40u32 {
            let f = read_frame(&mut plant).unwrap();
            prop_assert_eq!(f.seq, k + 1);
        }
        prop_assert!(matches!(read_frame(&mut plant), Err(FrameError::Closed)));
        drop(plant);
        gw.join().unwrap().unwrap();
    }
}
