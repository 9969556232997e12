use std::io::{Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use chromaflow::job::write_job;
use chromaflow::{io, synth, RgbImage};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_chromaflow"))
}

fn scratch() -> TempDir {
    tempfile::tempdir().unwrap()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn assert_single_error_line(out: &Output) {
    let err = stderr(out);
    let lines: Vec<&str> = err.lines().filter(|l| l.starts_with("error:")).collect();
    assert_eq!(lines.len(), 1, "{err}");
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn max_abs_diff(a: &RgbImage, b: &RgbImage) -> u8 {
    a.pixels()
        .iter()
        .zip(b.pixels())
        .flat_map(|(p, q)| (0..3).map(move |c| p[c].abs_diff(q[c])))
        .max()
        .unwrap()
}

#[test]
fn transfer_identity_job() {
    let tmp = scratch();
    let dir = tmp.path();
    let job = synth::identity_job(48, 40, 1);
    write_job(&job, dir).unwrap();
    let out_png = dir.join("o.png");
    let out = run(&["transfer", "--job", p(&dir.join("job.json")), "--out", p(&out_png)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 1);
    let status: serde_json::Value = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(status["status"], "ok");
    assert!(status["timings"]["total_ms"].is_number());
    assert!(status["landmarks"].as_u64().unwrap() > 0);
    let result = io::read_rgb(&out_png).unwrap();
    assert!(max_abs_diff(&result, &job.source) <= 1);
}

#[test]
fn missing_out_is_exit_2() {
    let tmp = scratch();
    let dir = tmp.path();
    write_job(&synth::identity_job(16, 16, 1), dir).unwrap();
    let out = run(&["transfer", "--job", p(&dir.join("job.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr(&out).trim(), "error: missing --out");
}

#[test]
fn usage_errors_are_one_line() {
    for args in [
        &["transfer", "--bogus"][..],
        &["inspect", "--job", "x.json", "--dump", "histogram", "--out", "x"],
        &["frobnicate"],
        &[],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert_single_error_line(&out);
        assert_eq!(stderr(&out).lines().count(), 1, "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn validation_errors_name_the_culprit() {
    let tmp = scratch();
    let dir = tmp.path();
    let job = synth::two_patch_job(32, 32, 1);
    let spec = write_job(&job, dir).unwrap();
    // A keep mask of the wrong size.
    let bad = dir.join("small-keep.png");
    io::write_mask(&chromaflow::RegionMask::rect(8, 8, 0, 0, 4, 4), &bad).unwrap();
    let out = run(&["transfer", "--job", p(&dir.join("job.json")), "--keep", p(&bad), "--out", p(&dir.join("o.png"))]);
    assert_eq!(out.status.code(), Some(2));
    assert_single_error_line(&out);
    assert!(stderr(&out).contains("small-keep.png"), "{}", stderr(&out));

    let out = run(&["transfer", "--source", p(&spec.source), "--pair", "only-two:parts", "--out", "x.png"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--pair"));

    let out = run(&["transfer", "--job", p(&dir.join("job.json")), "--beta", "0", "--out", p(&dir.join("o.png"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("beta"));

    let out = run(&["transfer", "--job", p(&dir.join("missing.json")), "--out", "x.png"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing.json"));
}

#[test]
fn inline_flags_match_job_file() {
    let tmp = scratch();
    let dir = tmp.path();
    let job = synth::two_patch_job(40, 32, 2);
    let mut spec = write_job(&job, dir).unwrap();
    spec.rebase(dir);
    let from_job = dir.join("a.png");
    let from_flags = dir.join("b.png");
    let out = run(&["transfer", "--job", p(&dir.join("job.json")), "--out", p(&from_job)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));

    let mut args: Vec<String> = vec!["transfer".into(), "--source".into(), p(&spec.source).into()];
    for (id, path) in &spec.targets {
        args.extend(["--target".into(), format!("{id}={}", path.display())]);
    }
    for c in &spec.correspondences {
        args.extend([
            "--pair".into(),
            format!("{}:{}:{}", c.source_mask.display(), c.target, c.target_mask.display()),
        ]);
    }
    for k in &spec.keep_masks {
        args.extend(["--keep".into(), k.display().to_string()]);
    }
    args.extend(["--out".into(), p(&from_flags).into()]);
    let out = bin().args(&args).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(std::fs::read(&from_job).unwrap(), std::fs::read(&from_flags).unwrap());
}

#[test]
fn same_seed_same_bytes() {
    let tmp = scratch();
    let dir = tmp.path();
    write_job(&synth::two_patch_job(48, 48, 4), dir).unwrap();
    let job = dir.join("job.json");
    let a = dir.join("a.png");
    let b = dir.join("b.png");
    assert!(run(&["transfer", "--job", p(&job), "--out", p(&a)]).status.success());
    let out = bin()
        .args(["transfer", "--job", p(&job), "--out", p(&b)])
        .env("CHROMAFLOW_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    let out = bin()
        .args(["transfer", "--job", p(&job), "--out", p(&b)])
        .env("CHROMAFLOW_THREADS", "lots")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("CHROMAFLOW_THREADS"));
}

#[test]
fn nonconvergence_is_exit_3() {
    let tmp = scratch();
    let dir = tmp.path();
    write_job(&synth::two_patch_job(48, 48, 4), dir).unwrap();
    let job = dir.join("job.json");
    let o = dir.join("o.png");
    let strict = ["transfer", "--job", p(&job), "--max-iter", "1", "--tol", "1e-14", "--out", p(&o)];
    let out = run(&strict);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    assert_single_error_line(&out);
    let status: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(status["status"], "nonconverged");

    let mut lenient = strict.to_vec();
    lenient.push("--allow-nonconverged");
    assert_eq!(run(&lenient).status.code(), Some(0));
}

#[test]
fn preview_writes_small_image() {
    let tmp = scratch();
    let dir = tmp.path();
    write_job(&synth::identity_job(200, 100, 3), dir).unwrap();
    let o = dir.join("o.png");
    let out = run(&["preview", "--job", p(&dir.join("job.json")), "--max-dim", "64", "--out", p(&o)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(io::read_rgb(&o).unwrap().dims(), (64, 32));
}

#[test]
fn dump_landmarks_of_four_colors() {
    let tmp = scratch();
    let dir = tmp.path();
    let src = dir.join("four.png");
    let img = RgbImage::new(2, 2, vec![[250, 10, 10], [10, 240, 20], [20, 30, 230], [240, 230, 200]]).unwrap();
    io::write_png(&img, &src).unwrap();
    let csv = dir.join("l.csv");
    let out = run(&["inspect", "--source", p(&src), "--beta", "1", "--dump", "landmarks", "--out", p(&csv)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("pixel_index,l,alpha,beta"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 4);
    let mut pixels: Vec<usize> = rows.iter().map(|r| r.split(',').next().unwrap().parse().unwrap()).collect();
    pixels.sort_unstable();
    assert_eq!(pixels, vec![0, 1, 2, 3]);
}

#[test]
fn dump_weights_rows_sum_to_one() {
    let tmp = scratch();
    let dir = tmp.path();
    write_job(&synth::two_patch_job(40, 40, 5), dir).unwrap();
    let coo = dir.join("w.txt");
    let out = run(&["inspect", "--job", p(&dir.join("job.json")), "--dump", "weights", "--out", p(&coo)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let mut sums = std::collections::BTreeMap::<usize, f64>::new();
    for line in std::fs::read_to_string(&coo).unwrap().lines() {
        let f: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(f.len(), 3);
        *sums.entry(f[0].parse().unwrap()).or_default() += f[2].parse::<f64>().unwrap();
    }
    assert!(!sums.is_empty());
    for (row, s) in sums {
        assert!((s - 1.0).abs() < 1e-8, "row {row} sums to {s}");
    }
}

#[test]
fn dump_constraints_covers_the_masks() {
    let tmp = scratch();
    let dir = tmp.path();
    let job = synth::two_patch_job(48, 40, 6);
    write_job(&job, dir).unwrap();
    let png = dir.join("c.png");
    let out = run(&["inspect", "--job", p(&dir.join("job.json")), "--dump", "constraints", "--out", p(&png)]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let masked: usize = job.set.correspondences.iter().map(|c| c.source_region.count()).sum::<usize>()
        + job.set.keep_regions.iter().map(|m| m.count()).sum::<usize>();
    let decoded = image::open(&png).unwrap().to_rgba8();
    let opaque = decoded.pixels().filter(|px| px[3] > 0).count();
    assert_eq!(opaque, masked);
}

fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

fn http_get(port: u16, path: &str) -> Option<String> {
    let mut stream = TcpStream::connect(("127.0.0.1", port)).ok()?;
    stream.set_read_timeout(Some(Duration::from_secs(5))).ok()?;
    write!(stream, "GET {path} HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").ok()?;
    let mut text = String::new();
    stream.read_to_string(&mut text).ok()?;
    Some(text)
}

#[test]
fn serve_answers_http() {
    let tmp = scratch();
    let dir = tmp.path();
    std::fs::write(dir.join("index.html"), "<p>hello</p>").unwrap();
    let port = free_port();
    let mut child = bin()
        .args(["serve", "--port", &port.to_string(), "--static", p(dir)])
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let deadline = Instant::now() + Duration::from_secs(20);
    let api = loop {
        if let Some(text) = http_get(port, "/api/nothing") {
            break text;
        }
        assert!(Instant::now() < deadline, "server never came up");
        std::thread::sleep(Duration::from_millis(50));
    };
    let page = http_get(port, "/").unwrap();
    child.kill().ok();
    child.wait().ok();
    assert!(api.starts_with("HTTP/1.1 404"), "{api}");
    assert!(api.contains("\"error\""));
    assert!(page.starts_with("HTTP/1.1 200") && page.contains("hello"), "{page}");
}

#[test]
fn serve_rejects_missing_static_dir() {
    let out = run(&["serve", "--port", "0", "--static", "/definitely/not/here"]);
    assert_eq!(out.status.code(), Some(2));
    assert_single_error_line(&out);
}
