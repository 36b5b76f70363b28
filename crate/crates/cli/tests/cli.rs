use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_omega-pricer");

fn run(args: &[&str], out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .arg("--quiet")
        .env_remove("OMEGA_PRICER_THREADS")
        .output()
        .unwrap()
}

fn result(dir: &Path, key: &str) -> f64 {
    let summary = std::fs::read_to_string(dir.join("summary.ini")).unwrap();
    summary
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no {key} in summary"))
        .parse()
        .unwrap()
}

fn curve(dir: &Path) -> Vec<[f64; 3]> {
    let text = std::fs::read_to_string(dir.join("curve.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("s,value,payoff"));
    lines
        .map(|l| {
            let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
            [v[0], v[1], v[2]]
        })
        .collect()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.ini");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

const BS_PUT: &str = "[model]\nr = 0.05\nsigma = 0.2\n[discount]\nkind = constant\nr = 0.05\n[contract]\nstrike = 20\n";

#[test]
fn rational_preset_prices_two_boundaries() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--preset", "bs_negative_rational"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (l, u) = (result(dir.path(), "l_star"), result(dir.path(), "u_star"));
    assert!(0.0 < l && l < u && u < 20.0, "l {l} u {u}");
    let c = curve(dir.path());
    assert_eq!(c.len(), 512);
    assert!((c[511][0] - 40.0).abs() < 1e-9);
    for [s, v, payoff] in &c {
        assert!(*v >= payoff - 1e-9, "s {s}: {v} < {payoff}");
    }
    // Below l the holder waits: the value sits above the payoff.
    let below: Vec<_> = c.iter().filter(|p| p[0] < 0.5 * l).collect();
    assert!(below.iter().all(|p| p[1] > p[2]));
}

#[test]
fn crash_preset_stops_everywhere_below_u() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--preset", "crash_linear"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(result(dir.path(), "l_star"), 0.0);
    let u = result(dir.path(), "u_star");
    let c = curve(dir.path());
    assert!(c[0][1].is_finite());
    for [s, v, payoff] in &c {
        if *s <= u {
            assert!((v - payoff).abs() < 1e-9);
        } else {
            assert!(v > payoff);
        }
    }
}

#[test]
fn gold_loan_preset_runs() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--preset", "gold_loan"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn resolved_config_reproduces_the_outputs() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run(&["--preset", "crash_linear", "--seed", "7"], a.path()).status.success());
    let resolved = a.path().join("resolved.ini");
    assert!(run(&["--config", resolved.to_str().unwrap()], b.path()).status.success());
    for name in ["curve.csv", "summary.ini", "resolved.ini"] {
        let x = std::fs::read(a.path().join(name)).unwrap();
        let y = std::fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs");
    }
    assert!(std::fs::read_to_string(resolved).unwrap().contains("seed = 7"));
}

#[test]
fn invalid_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        format!("{BS_PUT}[model]\nvolatility = 0.3\n"),
        format!("{BS_PUT}[task]\nkind = hedge\n"),
        BS_PUT.replace("strike = 20", "strike = -1"),
        BS_PUT.replace("sigma = 0.2", "sigma = -0.2"),
    ] {
        let cfg = write_config(dir.path(), &text);
        let out = run(&["--config", &cfg], &dir.path().join("o"));
        assert_eq!(out.status.code(), Some(2), "{text}");
        assert!(!out.stderr.is_empty());
    }
    assert_eq!(run(&["--preset", "nonesuch"], dir.path()).status.code(), Some(2));
    let threads = Command::new(BIN)
        .args(["--preset", "crash_linear", "--quiet", "--out-dir"])
        .arg(dir.path())
        .env("OMEGA_PRICER_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn thread_cap_leaves_monte_carlo_unchanged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{BS_PUT}[task]\nkind = mc-check\nspots = 22\n[numerics]\nn_paths = 2000\n"),
    );
    let mut outputs = Vec::new();
    for threads in ["1", "3"] {
        let o = dir.path().join(threads);
        let status = Command::new(BIN)
            .args(["--config", &cfg, "--quiet", "--out-dir"])
            .arg(&o)
            .env("OMEGA_PRICER_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(o.join("mc.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn mc_check_agrees_with_the_classical_put() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{BS_PUT}[task]\nkind = mc-check\nspots = 18, 25\n[numerics]\nn_paths = 20000\n"),
    );
    let out = run(&["--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(result(dir.path(), "max_abs_z") < 4.0);
    let u = result(dir.path(), "u_star");
    assert!((u - 20.0 * 2.5 / 3.5).abs() < 1e-3 * u);
    let mc = std::fs::read_to_string(dir.path().join("mc.csv")).unwrap();
    assert_eq!(mc.lines().count(), 3);
}

#[test]
fn scale_task_writes_the_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{BS_PUT}[task]\nkind = scale\n[numerics]\nscale_x_max = 1\n"));
    let out = run(&["--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("scale.csv")).unwrap();
    assert_eq!(text.lines().count() as f64 - 1.0, result(dir.path(), "grid_n"));
}

#[test]
fn bermudan_stays_below_the_perpetual_put() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!("{BS_PUT}[task]\nkind = bermudan\nspots = 15, 20, 25\nxi = 4\n[numerics]\ndp_step = 0.01\n"),
    );
    let out = run(&["--config", &cfg], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("bermudan.csv")).unwrap();
    for line in text.lines().skip(1) {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        // Interpolating between nodes undershoots the payoff, concave in log-price, by O(h²).
        assert!(v[1] <= v[2] + 1e-3 && v[1] >= (20.0 - v[0]).max(0.0) - 1e-3, "{line}");
    }
}

#[test]
fn put_only_tasks_reject_calls() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &BS_PUT.replace("strike = 20", "payoff = call\nstrike = 20"));
    assert_eq!(run(&["--config", &cfg], dir.path()).status.code(), Some(2));
}
