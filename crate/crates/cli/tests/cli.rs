use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Child, Command, Output, Stdio};
use std::thread::sleep;
use std::time::{Duration, Instant};

use quadshape::teleop::wire::decode;
use quadshape::WireMessage;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_quadshape"));
    c.env_remove("QUADSHAPE_CONFIG").env("RUST_LOG", "warn");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = run(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn data_rows(text: &str) -> Vec<Vec<&str>> {
    text.lines().filter(|l| !l.starts_with('#')).map(|l| l.split_whitespace().collect()).collect()
}

#[test]
fn straight_trajectory_reports_step_length() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["gen-traj", "--v", "0.4", "--straight"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# quadshape-trajectory 1\n# invocation: quadshape gen-traj --v 0.4 --straight\n"));
    let rows = data_rows(&text);
    assert_eq!(rows.len(), 400);
    for r in &rows {
        let sl: f64 = r[8].parse().unwrap();
        assert!((sl - 0.4).abs() < 1e-9);
        assert_eq!(r[9].parse::<f64>().unwrap(), 0.0);
    }
}

#[test]
fn turning_trajectory_splits_step_lengths() {
    let dir = TempDir::new().unwrap();
    let out = ok(dir.path(), &["gen-traj", "--v", "0.3", "--r", "-0.5", "--samples", "10"]);
    let text = String::from_utf8(out.stdout).unwrap();
    let sl = |leg: &str| -> f64 { data_rows(&text).iter().find(|r| r[0] == leg).unwrap()[8].parse().unwrap() };
    assert!((sl("fl") + sl("fr") - 0.6).abs() < 1e-12);
    assert!((sl("fl") - 0.3 * (0.5 + 0.06) / 0.5).abs() < 1e-12);
}

#[test]
fn bad_arguments_exit_2() {
    let dir = TempDir::new().unwrap();
    for args in [
        &["train-gaits", "--grid", "3y3", "-o", "x.bin"][..],
        &["gen-traj", "--v", "0.2", "--straight", "--r", "0.5"],
        &["gen-traj", "--v", "0.2"],
        &["synth-demos", "--bogus"],
        &["eval", "--compare", "gaits"],
        &[],
    ] {
        assert_eq!(run(dir.path(), args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn data_errors_exit_3() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("junk.txt"), "not demos\n").unwrap();
    for args in [
        &["augment", "-i", "missing.txt", "-o", "out.txt"][..],
        &["augment", "-i", "junk.txt", "-o", "out.txt"],
        &["gen-traj", "--v", "0.4", "--r", "0.1"],
        &["gen-traj", "--v", "0.6", "--straight"],
    ] {
        let out = run(dir.path(), args);
        assert_eq!(out.status.code(), Some(3), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    std::fs::write(dir.path().join("bad.toml"), "[links]\nl_prox = -1\n").unwrap();
    let out = bin().current_dir(dir.path()).env("QUADSHAPE_CONFIG", "bad.toml").args(["gen-traj", "--v", "0.1", "--straight"]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn config_from_environment() {
    let dir = TempDir::new().unwrap();
    std::fs::write(dir.path().join("wide.toml"), "[chassis]\nwidth = 0.2\n").unwrap();
    let args = ["gen-traj", "--v", "0.3", "--r", "-0.5", "--samples", "1"];
    let default = String::from_utf8(ok(dir.path(), &args).stdout).unwrap();
    let wide = bin().current_dir(dir.path()).env("QUADSHAPE_CONFIG", "wide.toml").args(args).output().unwrap();
    let wide = String::from_utf8(wide.stdout).unwrap();
    let sl = |t: &str| -> f64 { data_rows(t)[0][8].parse().unwrap() };
    assert!((sl(&default) - 0.3 * 0.56 / 0.5).abs() < 1e-12);
    assert!((sl(&wide) - 0.3 * 0.6 / 0.5).abs() < 1e-12);
}

#[test]
fn train_gaits_is_deterministic() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = ["train-gaits", "--grid", "3x3", "--seed", "7", "--iters", "10", "-o", "lib.bin"];
    ok(a.path(), &args);
    ok(b.path(), &args);
    let x = std::fs::read(a.path().join("lib.bin")).unwrap();
    let y = std::fs::read(b.path().join("lib.bin")).unwrap();
    assert_eq!(x, y);
    let inv = "quadshape train-gaits --grid 3x3 --seed 7 --iters 10 -o lib.bin";
    assert!(x.windows(inv.len()).any(|w| w == inv.as_bytes()));

    let out = ok(a.path(), &["eval", "--compare", "gaits", "--library", "lib.bin"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("# quadshape-eval-gaits 1\n"));
    assert_eq!(data_rows(&text).len(), 9);
}

#[test]
fn divergence_exits_4() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["synth-demos", "--no-mirror", "-o", "demos.txt"]);
    std::fs::write(d.join("diverge.toml"), "[shaper]\ndivergence = 1e-12\n").unwrap();
    let out = run(d, &["--config", "diverge.toml", "train-shaper", "--demos", "demos.txt", "--train", "2", "-o", "m.qsnn"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!d.join("m.qsnn").exists());
}

#[test]
fn shaper_pipeline() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    ok(d, &["synth-demos", "-o", "demos.txt"]);
    let demos = std::fs::read_to_string(d.join("demos.txt")).unwrap();
    assert!(demos.starts_with("# quadshape-demos 1\n# invocation: quadshape synth-demos -o demos.txt\n"));
    assert_eq!(demos.matches("# demo ").count(), 6);

    ok(d, &["augment", "-i", "demos.txt", "--count", "12", "--seed", "3", "-o", "aug.txt"]);
    let aug = std::fs::read_to_string(d.join("aug.txt")).unwrap();
    assert_eq!(aug.matches("# demo ").count(), 12);

    let train = ["train-shaper", "--demos", "aug.txt", "--train", "3", "--epochs", "1", "-o", "m.qsnn", "--curve", "curve.txt"];
    ok(d, &train);
    let first = std::fs::read(d.join("m.qsnn")).unwrap();
    ok(d, &train);
    assert_eq!(std::fs::read(d.join("m.qsnn")).unwrap(), first);
    let curve = std::fs::read_to_string(d.join("curve.txt")).unwrap();
    assert!(curve.starts_with("# quadshape-curve 1\n"));
    assert!(data_rows(&curve).len() >= 1);

    let out = ok(d, &["eval", "--compare", "filters", "--model", "m.qsnn"]);
    let table = String::from_utf8(out.stdout).unwrap();
    let rows = data_rows(&table);
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), ["flip", "flip-mirrored"]);

    ok(d, &["replay", "--model", "m.qsnn", "--demos", "demos.txt", "--demo", "flip", "-o", "trace.txt"]);
    let trace = std::fs::read_to_string(d.join("trace.txt")).unwrap();
    assert!(trace.contains("# demo: flip\n"));
    assert_eq!(data_rows(&trace).len(), 800);
    assert_eq!(run(d, &["replay", "--model", "m.qsnn", "--demos", "demos.txt", "--demo", "nope"]).status.code(), Some(3));

    ok(d, &["train-baselines", "--demos", "aug.txt", "--train", "3", "--epochs", "1", "--kind", "dense", "--out-dir", "base"]);
    assert!(d.join("base/dense.qsnn").exists() && d.join("base/dense_curve.txt").exists());
}

struct Server(Child);

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn start_server(dir: &Path, extra: &[&str]) -> (Server, u16) {
    ok(dir, &["synth-demos", "--no-mirror", "-o", "demos.txt"]);
    ok(dir, &["train-shaper", "--demos", "demos.txt", "--train", "2", "--epochs", "1", "-o", "m.qsnn"]);
    let port = free_port();
    let child = bin()
        .current_dir(dir)
        .args(["serve", "--port", &port.to_string(), "--model", "m.qsnn"])
        .args(extra)
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let server = Server(child);
    let start = Instant::now();
    while TcpStream::connect(("127.0.0.1", port)).is_err() {
        assert!(start.elapsed() < Duration::from_secs(20), "server did not start");
        sleep(Duration::from_millis(50));
    }
    (server, port)
}

#[test]
fn serve_speaks_line_protocol() {
    let dir = TempDir::new().unwrap();
    let (_server, port) = start_server(dir.path(), &["--mode", "raw"]);
    let mut stream = TcpStream::connect(("127.0.0.1", port)).unwrap();
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    for (k, t) in [0.0, 0.02].iter().enumerate() {
        writeln!(stream, r#"{{"version":1,"type":"stick_input","t":{t},"v":1.0,"r":0.0}}"#).unwrap();
        line.clear();
        reader.read_line(&mut line).unwrap();
        match decode(line.trim()).unwrap() {
            WireMessage::StateUpdate { pose, .. } => assert!((pose.x - 0.6 * 0.02 * k as f64).abs() < 1e-12),
            m => panic!("{m:?}"),
        }
    }
    writeln!(stream, r#"{{"type":"stick_input"}}"#).unwrap();
    line.clear();
    reader.read_line(&mut line).unwrap();
    assert!(line.contains(r#""type":"error""#));
}

#[test]
fn serve_speaks_websocket() {
    let dir = TempDir::new().unwrap();
    let (_server, port) = start_server(dir.path(), &["--websocket"]);
    let (mut ws, _) = tungstenite::connect(format!("ws://127.0.0.1:{port}")).unwrap();
    ws.send(tungstenite::Message::text(r#"{"version":1,"type":"mode_set","mode":"raw"}"#)).unwrap();
    let reply = ws.read().unwrap().into_text().unwrap();
    assert!(reply.contains(r#""type":"state_update""#), "{reply}");
    ws.send(tungstenite::Message::text(r#"{"version":1,"type":"stick_input","t":0.5,"v":2.0,"r":0.0}"#)).unwrap();
    let notice = ws.read().unwrap().into_text().unwrap();
    assert!(notice.contains("clamped"), "{notice}");
    let update = ws.read().unwrap().into_text().unwrap();
    assert!(update.contains(r#""raw":{"v":1.0,"r":0.0}"#), "{update}");
}
