use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_iiot-netsim"));
    cmd.env_remove("IIOT_NETSIM_SEED");
    cmd
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs")).join(name)
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Exactly one stderr line, prefixed `error:`.
fn assert_error_line(o: &Output, code: i32, needle: &str) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(o));
    let err = stderr(o);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with("error: "), "{err}");
    assert!(lines[0].contains(needle), "{err}");
}

fn simulate(cfg: &Path, out: &Path, extra: &[&str]) -> Output {
    run(bin()
        .arg("simulate")
        .arg("--config")
        .arg(cfg)
        .arg("--out")
        .arg(out)
        .args(extra))
}

fn write_json(dir: &Path, name: &str, edit: impl FnOnce(&mut serde_json::Value)) -> PathBuf {
    let mut v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(config(name)).unwrap()).unwrap();
    edit(&mut v);
    let path = dir.join(name);
    fs::write(&path, v.to_string()).unwrap();
    path
}

#[test]
fn simulate_writes_three_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = simulate(&config("default.json"), &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let intervals = fs::read_to_string(out.join("intervals.csv")).unwrap();
    assert!(intervals.starts_with(
        "window_start_s,window_len_s,sent,delivered,lost,throughput_bps,avg_latency_ms,min_latency_ms,max_latency_ms\n"
    ));
    assert_eq!(intervals.lines().count(), 3);
    let summary = fs::read_to_string(out.join("rtt_summary.csv")).unwrap();
    assert!(summary.starts_with("min_ms,max_ms,avg_ms,count\n"));
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
    assert!(manifest["wall_clock_s"].as_f64().unwrap() >= 0.0);
    let leftovers: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .ends_with(".tmp")
        })
        .collect();
    assert!(leftovers.is_empty());
    assert!(stdout(&o).contains("avg_ms"));
}

#[test]
fn manifest_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(simulate(
        &config("default.json"),
        &a,
        &["--seed", "42", "--window", "2"]
    )
    .status
    .success());
    assert!(simulate(&a.join("manifest.json"), &b, &["--window", "2"])
        .status
        .success());
    for f in ["intervals.csv", "rtt_summary.csv"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let seed_of = |out: &Path| -> u64 {
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
        m["seed"].as_u64().unwrap()
    };
    let env_only = dir.path().join("env");
    let o = run(bin()
        .env("IIOT_NETSIM_SEED", "9")
        .args(["simulate", "--config"])
        .arg(config("default.json"))
        .arg("--out")
        .arg(&env_only));
    assert!(o.status.success());
    assert_eq!(seed_of(&env_only), 9);
    let both = dir.path().join("both");
    let o = run(bin()
        .env("IIOT_NETSIM_SEED", "9")
        .args(["simulate", "--seed", "5", "--config"])
        .arg(config("default.json"))
        .arg("--out")
        .arg(&both));
    assert!(o.status.success());
    assert_eq!(seed_of(&both), 5);
}

#[test]
fn overloaded_server_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_json(dir.path(), "default.json", |v| {
        v["server"]["background_rate_pps"] = 50_000.0.into();
    });
    let o = simulate(&cfg, &dir.path().join("out"), &[]);
    assert_error_line(&o, 3, "instability");
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_json(dir.path(), "default.json", |v| {
        v["node_cuont"] = 3.into();
    });
    assert_error_line(
        &simulate(&cfg, &dir.path().join("out"), &[]),
        2,
        "node_cuont",
    );
}

#[test]
fn invalid_field_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_json(dir.path(), "default.json", |v| {
        v["duration_s"] = (-1.0).into();
    });
    assert_error_line(
        &simulate(&cfg, &dir.path().join("out"), &[]),
        2,
        "duration_s",
    );
}

#[test]
fn compare_fading_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin()
        .args(["compare-fading", "--config"])
        .arg(config("compare_fading.json"))
        .arg("--out")
        .arg(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(dir.path().join("fading_table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "time_s,none_ms,rayleigh_ms,rician_ms,awgn_ms");
    assert_eq!(lines.len(), 6);
    assert!(lines[1].starts_with("2,"));
}

#[test]
fn compare_fading_guards() {
    let dir = tempfile::tempdir().unwrap();
    let single = write_json(dir.path(), "compare_fading.json", |v| {
        v["kinds"].as_array_mut().unwrap().truncate(1);
    });
    let o = run(bin()
        .args(["compare-fading", "--config"])
        .arg(&single)
        .arg("--out")
        .arg(dir.path()));
    assert_error_line(&o, 2, "2 fading kinds");
    let late = write_json(dir.path(), "compare_fading.json", |v| {
        v["sample_times_s"] = serde_json::json!([2, 40]);
    });
    let o = run(bin()
        .args(["compare-fading", "--config"])
        .arg(&late)
        .arg("--out")
        .arg(dir.path()));
    assert_error_line(&o, 2, "sample_times_s");
}

#[test]
fn validate_channel_rayleigh_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(bin()
        .args([
            "validate-channel",
            "--kind",
            "rayleigh",
            "--sigma",
            "1",
            "--samples",
            "100000",
            "--out",
        ])
        .arg(dir.path()));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("pass"));
    let csv = fs::read_to_string(dir.path().join("channel_rayleigh.csv")).unwrap();
    assert!(csv.starts_with("r,pdf_analytic,pdf_empirical\n"));
    assert_eq!(csv.lines().count(), 51);
}

#[test]
fn validate_channel_rician_without_los_matches_rayleigh() {
    let o = run(bin().args(["validate-channel", "--kind", "rician", "--amplitude", "0"]));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("ks_two_sample_rayleigh"));
}

#[test]
fn validate_channel_awgn_passes() {
    let o = run(bin().args([
        "validate-channel",
        "--kind",
        "awgn",
        "--n0",
        "2",
        "--samples",
        "200000",
    ]));
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn mismatched_reference_exits_4() {
    let o = run(bin().args([
        "validate-channel",
        "--kind",
        "rayleigh",
        "--analytic-sigma",
        "1.2",
    ]));
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).lines().last().unwrap().starts_with("error: "));
}

fn qos(args: &[&str]) -> Output {
    run(bin().arg("qos-reliability").args(args))
}

#[test]
fn qos_reliability_perfect_legs() {
    let o = qos(&[
        "--alpha", "1", "--beta", "1", "--gamma", "1", "--delta", "1", "--runs", "1000",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "alpha,beta,gamma,delta,R_closed_form,R_monte_carlo,n_runs"
    );
    assert_eq!(lines[1], "1,1,1,1,1,1,1000");
}

#[test]
fn qos_reliability_monte_carlo_within_three_se() {
    let o = qos(&[
        "--alpha", "0.9", "--beta", "0.9", "--gamma", "0.9", "--delta", "0.9",
    ]);
    assert!(o.status.success());
    let text = stdout(&o);
    let row: Vec<f64> = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!((row[4] - 0.6561 / 0.9999).abs() <= 1e-15);
    let n = row[6];
    let se = (row[4] * (1.0 - row[4]) / n).sqrt();
    assert!((row[5] - row[4]).abs() <= 3.0 * se, "{row:?}");
}

#[test]
fn qos_reliability_rejects_out_of_range() {
    for flag in ["--alpha", "--beta", "--gamma", "--delta"] {
        let mut args = vec![
            "--alpha", "0.5", "--beta", "0.5", "--gamma", "0.5", "--delta", "0.5", "--runs", "10",
        ];
        let i = args.iter().position(|a| *a == flag).unwrap();
        args[i + 1] = "1.5";
        assert_error_line(&qos(&args), 2, "1.5");
    }
}

const HOP_HEADER: &str = "distance_m,propagation_speed_mps,packet_length_bits,link_rate_bps,hop_weight,processing_delay_ms,arrival_rate_pps,service_rate_pps,loss_prob,retx_base_ms";

fn rtt_with(body: &str) -> Output {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("hops.csv");
    fs::write(&path, body).unwrap();
    run(bin().args(["rtt", "--hops"]).arg(&path))
}

fn total_ms(o: &Output) -> f64 {
    let text = stdout(o);
    let last = text.lines().last().unwrap().to_string();
    assert!(last.starts_with("total,"));
    last.rsplit(',').next().unwrap().parse().unwrap()
}

#[test]
fn rtt_single_hop_example() {
    let o = rtt_with(&format!(
        "{HOP_HEADER}\n300,3e8,1000,1e6,1,0,500,1000,0,1\n"
    ));
    assert!(o.status.success(), "{}", stderr(&o));
    assert!((total_ms(&o) / 7.002 - 1.0).abs() <= 1e-12);
}

#[test]
fn rtt_empty_file_totals_zero() {
    for body in ["", &format!("{HOP_HEADER}\n")] {
        let o = rtt_with(body);
        assert!(o.status.success());
        assert_eq!(total_ms(&o), 0.0);
    }
}

#[test]
fn rtt_errors() {
    assert_error_line(
        &rtt_with(&format!(
            "{HOP_HEADER}\n300,3e8,1000,1e6,1,0,1000,1000,0,1\n"
        )),
        3,
        "unstable",
    );
    assert_error_line(
        &rtt_with(&format!("{HOP_HEADER}\n300,fast,1000,1e6,1,0,1,1000,0,1\n")),
        2,
        "hops file",
    );
    assert_error_line(&rtt_with("distance_m,bogus\n1,2\n"), 2, "bogus");
    let o = run(bin().args(["rtt", "--hops", "/nonexistent/hops.csv"]));
    assert_error_line(&o, 2, "cannot read");
}

#[test]
fn queue_prints_erlang_c() {
    let o = run(bin().args(["queue", "--lambda", "1.5", "--mu", "1", "--servers", "2"]));
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,mu,c,erlang_c,Wq"));
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    // offered load a = 1.5: C = (a^2/2)/(1 - a/2) / (1 + a + (a^2/2)/(1 - a/2)) = 4.5/7
    assert!((row[3] - 9.0 / 14.0).abs() <= 1e-12, "{row:?}");
    assert!((row[4] - (9.0 / 14.0) / 0.5).abs() <= 1e-12);
}

#[test]
fn queue_instability_exits_3() {
    let o = run(bin().args(["queue", "--lambda", "2", "--mu", "1", "--servers", "2"]));
    assert_error_line(&o, 3, "instability");
    let o = run(bin().args(["queue", "--lambda", "-1", "--mu", "1"]));
    assert_error_line(&o, 2, "lambda");
}

#[test]
fn bad_flags_exit_2_with_one_line() {
    assert_error_line(&run(bin().arg("frobnicate")), 2, "frobnicate");
    assert_error_line(
        &run(bin().args(["queue", "--lambda", "x", "--mu", "1"])),
        2,
        "--lambda",
    );
    assert_error_line(
        &run(bin().args(["simulate", "--config", "nope.json"])),
        2,
        "--out",
    );
}

#[test]
fn help_lists_every_flag() {
    let cases: [(&str, &[&str]); 6] = [
        ("simulate", &["--config", "--out", "--seed", "--window"]),
        ("compare-fading", &["--config", "--out", "--seed"]),
        (
            "validate-channel",
            &[
                "--kind",
                "--sigma",
                "--amplitude",
                "--phase",
                "--n0",
                "--samples",
                "--analytic-sigma",
                "--bins",
                "--out",
                "--seed",
            ],
        ),
        (
            "qos-reliability",
            &[
                "--alpha",
                "--beta",
                "--gamma",
                "--delta",
                "--runs",
                "--max-retries",
                "--seed",
            ],
        ),
        ("rtt", &["--hops"]),
        ("queue", &["--lambda", "--mu", "--servers"]),
    ];
    for (sub, flags) in cases {
        let o = run(bin().args([sub, "--help"]));
        assert!(o.status.success());
        let help = stdout(&o);
        for f in flags {
            assert!(help.contains(f), "{sub} --help misses {f}");
        }
    }
}
