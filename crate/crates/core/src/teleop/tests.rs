use std::time::Instant;

use super::wire::{decode, encode};
use super::*;
use crate::shaper::network::Architecture;
use crate::shaper::N_FILTERS;

fn ma_only_shaper() -> Network {
    let mut net = Network::new(Architecture::reference(), 1).unwrap();
    for h in 0..2 {
        for f in 0..N_FILTERS {
            let (w, n, b) = net.output_row(h, f);
            net.params_mut()[w..w + n].fill(0.0);
            net.params_mut()[b] = if f < 32 { 0.0 } else { -1e3 };
        }
    }
    net
}

fn assets() -> SessionAssets {
    SessionAssets::new(ma_only_shaper())
}

#[test]
fn pose_examples() {
    let start = RobotPose { x: 0.3, y: -0.2, yaw: 0.4 };
    assert_eq!(integrate_pose(start, 0.0, 0.7, 0.5, 0.3), start);

    let p = integrate_pose(start, 1.0, 0.0, 1.0, 0.3);
    assert!((p.x - (0.3 + 0.6 * 0.4f64.cos())).abs() < 1e-12);
    assert!((p.y - (-0.2 + 0.6 * 0.4f64.sin())).abs() < 1e-12);
    assert_eq!(p.yaw, 0.4);

    // a stick past the rate limit turns at exactly 2π/3
    let p = integrate_pose(RobotPose::default(), 1.0, 1.2, 1.5, 0.3);
    let radius = 0.6 / OMEGA_MAX;
    assert!(wrap_angle(p.yaw - PI).abs() < 1e-9);
    assert!(p.x.abs() < 1e-9 && (p.y - 2.0 * radius).abs() < 1e-9);
}

#[test]
fn arcs_compose() {
    let mut fine = RobotPose::default();
    for _ in 0..300 {
        fine = integrate_pose(fine, 0.8, -0.45, 0.005, 0.3);
    }
    let coarse = integrate_pose(RobotPose::default(), 0.8, -0.45, 1.5, 0.3);
    assert!((fine.x - coarse.x).abs() < 1e-9 && (fine.y - coarse.y).abs() < 1e-9);
    assert!(wrap_angle(fine.yaw - coarse.yaw).abs() < 1e-9);
}

#[test]
fn yaw_wraps() {
    assert_eq!(wrap_angle(PI), PI);
    assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
    assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
}

#[test]
fn constant_stick_converges() {
    let mut s = Session::new(assets(), Mode::Shaped);
    let mut last = Vec::new();
    for k in 0..=100 {
        last = s.on_stick(k as f64 * 0.02, 0.7, -0.3);
    }
    match &last[0] {
        WireMessage::StateUpdate { raw, shaped, .. } => {
            assert!((shaped[0] - raw[0]).abs() < 0.01 && (shaped[1] - raw[1]).abs() < 0.01);
        }
        m => panic!("{m:?}"),
    }
}

#[test]
fn raw_mode_drives_with_raw_command() {
    let mut s = Session::new(assets(), Mode::Raw);
    let mut expected = RobotPose::default();
    for k in 0..400 {
        let (v, r) = ((k as f64 * 0.01).sin().abs(), (k as f64 * 0.03).cos());
        s.on_stick(k as f64 / SAMPLE_RATE, v, r);
        assert_eq!(s.pose(), expected);
        expected = integrate_pose(expected, v, r, 1.0 / SAMPLE_RATE, 0.3);
    }
}

#[test]
fn zero_order_hold_to_model_rate() {
    let mut s = Session::new(assets(), Mode::Shaped);
    s.on_stick(0.0, 0.1, 0.0);
    s.on_stick(0.02, 0.2, 0.0);
    s.on_stick(0.04, 0.3, 0.0);
    let w = s.window().samples();
    let tail: Vec<f64> = w[WINDOW_LEN - 9..].iter().map(|x| x[0]).collect();
    assert_eq!(tail, [0.1, 0.1, 0.1, 0.1, 0.2, 0.2, 0.2, 0.2, 0.3]);
    assert_eq!(w[WINDOW_LEN - 10], [0.0, 0.0]);
}

use crate::shaper::WINDOW_LEN;

#[test]
fn bad_inputs() {
    let mut s = Session::new(assets(), Mode::Shaped);
    s.on_stick(1.0, 0.0, 0.0);
    let stale = s.on_stick(0.5, 0.2, 0.2);
    assert!(matches!(stale.as_slice(), [WireMessage::Error { .. }]));
    let clamped = s.on_stick(1.1, 1.7, -3.0);
    assert!(matches!(clamped[0], WireMessage::Error { .. }));
    match &clamped[1] {
        WireMessage::StateUpdate { raw, .. } => assert_eq!(*raw, [1.0, -1.0]),
        m => panic!("{m:?}"),
    }
    let echo = s.handle(WireMessage::Error { text: "x".into() });
    assert!(matches!(echo[0], WireMessage::Error { .. }));
}

#[test]
fn long_gaps_are_bridged() {
    let mut s = Session::new(assets(), Mode::Raw);
    s.on_stick(0.0, 1.0, 0.0);
    s.on_stick(10.0, 1.0, 0.0);
    assert!((s.pose().x - 0.6 * 10.0).abs() < 1e-9);
}

#[test]
fn poses_move_continuously() {
    let mut s = Session::new(assets(), Mode::Shaped);
    let mut prev = s.pose();
    for k in 0..600 {
        let t = k as f64 * 0.02;
        s.on_stick(t, if k % 50 < 25 { 1.0 } else { -0.2 }, if k % 80 < 40 { 1.0 } else { -1.0 });
        let p = s.pose();
        let step = ((p.x - prev.x).powi(2) + (p.y - prev.y).powi(2)).sqrt();
        assert!(step <= V_MAX * 0.02 + 1e-9);
        prev = p;
    }
}

#[test]
fn wire_roundtrip() {
    let msgs = [
        WireMessage::StickInput { t: 0.25, v: 0.5, r: -1.0 },
        WireMessage::ModeSet { mode: Mode::Raw },
        WireMessage::Error { text: "oops".into() },
        WireMessage::StateUpdate {
            t: 1.0,
            raw: [0.1, 0.2],
            shaped: [0.05, 0.1],
            pose: RobotPose { x: 1.0, y: 2.0, yaw: 0.5 },
            top_filters: TopFilters { v: vec![3, 1, 2], r: vec![0, 5, 9] },
        },
    ];
    for m in &msgs {
        let line = encode(m);
        assert!(line.contains("\"version\":1") && !line.contains('\n'));
        assert_eq!(&decode(&line).unwrap(), m);
    }
    assert!(decode(r#"{"type":"mode_set","mode":"raw"}"#).is_err());
    assert!(decode(r#"{"version":2,"type":"mode_set","mode":"raw"}"#).is_err());
    assert!(decode(r#"{"version":1,"type":"mode_set","mode":"fast"}"#).is_err());
    assert!(decode(r#"{"version":1,"type":"stick_input","t":0,"v":0}"#).is_err());
    let update = encode(&msgs[3]);
    assert!(update.contains(r#""raw":{"v":0.1,"r":0.2}"#), "{update}");
}

#[test]
fn session_over_a_stream() {
    let input = [
        encode(&WireMessage::ModeSet { mode: Mode::Raw }),
        encode(&WireMessage::StickInput { t: 0.0, v: 0.5, r: 0.0 }),
        "not json".to_string(),
        encode(&WireMessage::StickInput { t: 0.02, v: 0.5, r: 0.0 }),
    ]
    .join("\n");
    let mut out = Vec::new();
    server::run_session(input.as_bytes(), &mut out, Session::new(assets(), Mode::Shaped)).unwrap();
    let replies: Vec<WireMessage> = String::from_utf8(out).unwrap().lines().map(|l| decode(l).unwrap()).collect();
    assert_eq!(replies.len(), 4);
    assert!(matches!(replies[2], WireMessage::Error { .. }));
    match &replies[3] {
        WireMessage::StateUpdate { t, pose, .. } => {
            assert_eq!(*t, 0.02);
            assert!((pose.x - 0.3 * 0.02).abs() < 1e-12);
        }
        m => panic!("{m:?}"),
    }
}

#[test]
fn replay_is_deterministic() {
    let series: Vec<[f64; 2]> = (0..300).map(|k| [(k as f64 / 50.0).sin().abs(), if k < 150 { -1.0 } else { 1.0 }]).collect();
    let a = replay(&series, &assets(), Mode::Shaped);
    let b = replay(&series, &assets(), Mode::Shaped);
    assert_eq!(a, b);
    assert_eq!(a.len(), 300);
    let text = replay_to_text(&a, "# test\n");
    assert_eq!(text.lines().count(), 302);
}

#[test]
fn stick_handling_is_fast() {
    let assets = SessionAssets::new(Network::new(Architecture::reference(), 3).unwrap());
    let mut s = Session::new(assets, Mode::Shaped);
    let n = 100;
    let start = Instant::now();
    for k in 0..n {
        s.on_stick(k as f64 * 0.02, 0.5, 0.1);
    }
    let per = start.elapsed().as_secs_f64() / n as f64;
    assert!(per < 5e-3, "{:.2} ms per sample", per * 1e3);
}
