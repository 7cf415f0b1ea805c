use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use iiot_netsim::channel::{
    rayleigh_cdf, rayleigh_pdf, rician_pdf, rician_support_end, sample_awgn, sample_rayleigh_gain,
    sample_rician_gain, AwgnParams, RayleighParams, RicianCdfTable, RicianParams,
};
use iiot_netsim::qos::{reliability, simulate_handshake, QosChainParams};
use iiot_netsim::queueing::{erlang_c_probability, mean_wait_in_queue, QueueParams};
use iiot_netsim::report::{
    render_intervals, render_rtt_summary, windowed_series_over, write_intervals_csv,
    write_rtt_summary_csv,
};
use iiot_netsim::rng::RngStream;
use iiot_netsim::rtt::{compute_rtt, HopConfig, HopSpec};
use iiot_netsim::sim::{compare_fading, run_simulation, CompareConfig, SimulationConfig};
use iiot_netsim::stats::{density_histogram, ks_one_sample, ks_two_sample, mean_var, KsResult};

use crate::args::{ChannelKind, Command};
use crate::output::{create_dir, read_config_text, write_atomic, write_manifest, RunManifest};
use crate::CliError;

const KS_SIGNIFICANCE: f64 = 0.01;

pub fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Simulate {
            config,
            out,
            seed,
            window,
        } => simulate(&config, &out, seed, window),
        Command::CompareFading { config, out, seed } => compare(&config, &out, seed),
        Command::ValidateChannel {
            kind,
            sigma,
            amplitude,
            phase,
            n0,
            samples,
            analytic_sigma,
            bins,
            out,
            seed,
        } => {
            let req = ChannelCheck {
                kind,
                sigma,
                amplitude,
                phase,
                n0,
                samples,
                analytic_sigma,
                bins,
                seed,
            };
            validate_channel(&req, out.as_deref())
        }
        Command::QosReliability {
            alpha,
            beta,
            gamma,
            delta,
            runs,
            max_retries,
            seed,
        } => qos_reliability([alpha, beta, gamma, delta], runs, max_retries, seed),
        Command::Rtt { hops } => rtt(&hops),
        Command::Queue {
            lambda,
            mu,
            servers,
        } => queue(lambda, mu, servers),
    }
}

fn simulate(config: &Path, out: &Path, seed: Option<u64>, window: f64) -> Result<(), CliError> {
    let started = Instant::now();
    if !(window.is_finite() && window > 0.0) {
        return Err(CliError::Invalid(format!(
            "invalid --window {window}: must be positive"
        )));
    }
    let mut cfg = SimulationConfig::from_json(&read_config_text(config)?)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let run = run_simulation(&cfg)?;
    let windows = windowed_series_over(
        &run.records,
        window,
        cfg.base_hop.packet_length_bits,
        cfg.duration_s,
    );

    let mut intervals = Vec::new();
    write_intervals_csv(&mut intervals, &windows)?;
    let mut summary = Vec::new();
    write_rtt_summary_csv(&mut summary, &run.summary.rtt)?;

    create_dir(out)?;
    let outputs = vec![
        write_atomic(out, "intervals.csv", &intervals)?,
        write_atomic(out, "rtt_summary.csv", &summary)?,
    ];
    let snapshot = serde_json::to_value(&cfg).expect("config serializes");
    let manifest = RunManifest::new("simulate", cfg.seed, snapshot, outputs, started.elapsed());
    write_manifest(out, &manifest)?;

    print!("{}", render_intervals(&windows));
    println!();
    print!("{}", render_rtt_summary(&run.summary.rtt));
    println!(
        "sent {} delivered {} lost {}; wrote {}",
        run.summary.sent,
        run.summary.delivered,
        run.summary.lost,
        out.display()
    );
    Ok(())
}

fn compare(config: &Path, out: &Path, seed: Option<u64>) -> Result<(), CliError> {
    let started = Instant::now();
    let mut cfg = CompareConfig::from_json(&read_config_text(config)?)?;
    if let Some(s) = seed {
        cfg.base.seed = s;
    }
    let table = compare_fading(&cfg)?;
    let mut csv = Vec::new();
    table.write_csv(&mut csv)?;
    create_dir(out)?;
    let outputs = vec![write_atomic(out, "fading_table.csv", &csv)?];
    let snapshot = serde_json::to_value(&cfg).expect("config serializes");
    write_manifest(
        out,
        &RunManifest::new(
            "compare-fading",
            cfg.base.seed,
            snapshot,
            outputs,
            started.elapsed(),
        ),
    )?;
    print!("{}", table.render());
    Ok(())
}

struct ChannelCheck {
    kind: ChannelKind,
    sigma: f64,
    amplitude: f64,
    phase: f64,
    n0: f64,
    samples: usize,
    analytic_sigma: Option<f64>,
    bins: usize,
    seed: u64,
}

struct CheckLine {
    name: &'static str,
    detail: String,
    passed: bool,
}

impl CheckLine {
    fn ks(name: &'static str, r: KsResult) -> Self {
        CheckLine {
            name,
            detail: format!("statistic={:.6} p_value={:.4}", r.statistic, r.p_value),
            passed: r.passes(KS_SIGNIFICANCE),
        }
    }
}

fn invalid<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Invalid(e.to_string())
}

fn validate_channel(req: &ChannelCheck, out: Option<&Path>) -> Result<(), CliError> {
    if req.samples < 2 {
        return Err(CliError::Invalid("--samples must be at least 2".into()));
    }
    if req.bins == 0 {
        return Err(CliError::Invalid("--bins must be positive".into()));
    }
    let n = req.samples;
    let mut rng = RngStream::new(req.seed, 0);
    let mut checks = Vec::new();
    let magnitudes: Vec<f64>;
    let pdf: Box<dyn Fn(f64) -> f64>;
    let hi: f64;

    match req.kind {
        ChannelKind::Rayleigh => {
            let p = RayleighParams {
                sigma: req.sigma,
                ..Default::default()
            };
            let reference = req.analytic_sigma.unwrap_or(req.sigma);
            rayleigh_pdf(0.0, reference).map_err(invalid)?;
            magnitudes = (0..n)
                .map(|_| sample_rayleigh_gain(&p, &mut rng).map(|h| h.norm()))
                .collect::<Result<_, _>>()
                .map_err(invalid)?;
            checks.push(CheckLine::ks(
                "ks_rayleigh",
                ks_one_sample(&magnitudes, |x| rayleigh_cdf(x, reference).unwrap_or(0.0)),
            ));
            pdf = Box::new(move |r| rayleigh_pdf(r, reference).unwrap_or(0.0));
            hi = 8.0 * reference.max(req.sigma);
        }
        ChannelKind::Rician => {
            let p = RicianParams {
                amplitude: req.amplitude,
                phase: req.phase,
                sigma: req.sigma,
                ..Default::default()
            };
            let reference = RicianParams {
                sigma: req.analytic_sigma.unwrap_or(req.sigma),
                ..p
            };
            let table = RicianCdfTable::new(&reference).map_err(invalid)?;
            magnitudes = (0..n)
                .map(|_| sample_rician_gain(&p, &mut rng).map(|h| h.norm()))
                .collect::<Result<_, _>>()
                .map_err(invalid)?;
            checks.push(CheckLine::ks(
                "ks_rician",
                ks_one_sample(&magnitudes, |x| table.eval(x)),
            ));
            if req.amplitude == 0.0 {
                let ray = RayleighParams {
                    sigma: req.sigma,
                    ..Default::default()
                };
                let mut other = RngStream::new(req.seed, 1);
                let control: Vec<f64> = (0..n)
                    .map(|_| sample_rayleigh_gain(&ray, &mut other).map(|h| h.norm()))
                    .collect::<Result<_, _>>()
                    .map_err(invalid)?;
                checks.push(CheckLine::ks(
                    "ks_two_sample_rayleigh",
                    ks_two_sample(&magnitudes, &control),
                ));
            }
            pdf = Box::new(move |r| rician_pdf(r, &reference).unwrap_or(0.0));
            hi = rician_support_end(&p).max(rician_support_end(&reference));
        }
        ChannelKind::Awgn => {
            let p = AwgnParams { n0: req.n0 };
            let noise: Vec<_> = (0..n)
                .map(|_| sample_awgn(&p, &mut rng))
                .collect::<Result<_, _>>()
                .map_err(invalid)?;
            let half = req.n0 / 2.0;
            // standard error of a Gaussian sample variance
            let se = half * (2.0 / (n as f64 - 1.0)).sqrt();
            for (name, part) in [
                (
                    "variance_re",
                    noise.iter().map(|s| s.re).collect::<Vec<_>>(),
                ),
                ("variance_im", noise.iter().map(|s| s.im).collect()),
            ] {
                let (_, var) = mean_var(&part);
                checks.push(CheckLine {
                    name,
                    detail: format!(
                        "value={var:.6} expected={half:.6} tolerance={:.6}",
                        4.0 * se
                    ),
                    passed: (var - half).abs() <= 4.0 * se,
                });
            }
            // the noise magnitude is Rayleigh with sigma^2 = n0 / 2
            let reference = req.analytic_sigma.unwrap_or(half.sqrt());
            rayleigh_pdf(0.0, reference).map_err(invalid)?;
            magnitudes = noise.iter().map(|s| s.norm()).collect();
            checks.push(CheckLine::ks(
                "ks_magnitude",
                ks_one_sample(&magnitudes, |x| rayleigh_cdf(x, reference).unwrap_or(0.0)),
            ));
            pdf = Box::new(move |r| rayleigh_pdf(r, reference).unwrap_or(0.0));
            hi = 8.0 * reference.max(half.sqrt());
        }
    }

    let (centers, density) = density_histogram(&magnitudes, 0.0, hi, req.bins);
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record(["r", "pdf_analytic", "pdf_empirical"])
        .map_err(io)?;
    for (r, d) in centers.iter().zip(&density) {
        w.write_record([r.to_string(), pdf(*r).to_string(), d.to_string()])
            .map_err(io)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let mut report = String::new();
    for c in &checks {
        let verdict = if c.passed { "pass" } else { "fail" };
        let _ = writeln!(report, "{} {} {verdict}", c.name, c.detail);
    }
    match out {
        Some(dir) => {
            create_dir(dir)?;
            let path = write_atomic(dir, &format!("channel_{}.csv", req.kind.name()), &bytes)?;
            print!("{report}");
            println!("wrote {}", path.display());
        }
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            eprint!("{report}");
        }
    }
    let failed: Vec<&str> = checks
        .iter()
        .filter(|c| !c.passed)
        .map(|c| c.name)
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "{} channel check failed: {}",
            req.kind.name(),
            failed.join(", ")
        )))
    }
}

fn qos_reliability(legs: [f64; 4], runs: u64, max_retries: u32, seed: u64) -> Result<(), CliError> {
    if runs == 0 {
        return Err(CliError::Invalid("--runs must be positive".into()));
    }
    let [a, b, g, d] = legs;
    let params = QosChainParams::new(a, b, g, d)?;
    let closed = reliability(&params)?;
    let mut rng = RngStream::new(seed, 0);
    let delivered = (0..runs)
        .filter(|_| simulate_handshake(&params, max_retries, &mut rng).delivered)
        .count();
    let mc = delivered as f64 / runs as f64;
    let se = (mc * (1.0 - mc) / runs as f64).sqrt();
    println!("alpha,beta,gamma,delta,R_closed_form,R_monte_carlo,n_runs");
    println!("{a},{b},{g},{d},{closed},{mc},{runs}");
    eprintln!("monte_carlo_std_error={se}");
    Ok(())
}

fn read_hops(path: &Path) -> Result<Vec<HopConfig>, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Invalid(format!("cannot read hops file {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    reader
        .deserialize::<HopSpec>()
        .map(|row| {
            row.map(HopConfig::from)
                .map_err(|e| CliError::Invalid(format!("hops file {}: {e}", path.display())))
        })
        .collect()
}

fn rtt(path: &Path) -> Result<(), CliError> {
    let hops = read_hops(path)?;
    let breakdown = compute_rtt(&hops)?;
    let ms = |s: f64| (s * 1e3).to_string();
    let mut w = csv::Writer::from_writer(std::io::stdout().lock());
    let io = |e: csv::Error| CliError::Runtime(e.to_string());
    w.write_record([
        "hop",
        "propagation_ms",
        "transmission_ms",
        "processing_ms",
        "queueing_ms",
        "retransmission_ms",
        "rtt_ms",
    ])
    .map_err(io)?;
    for (i, t) in breakdown.hops.iter().enumerate() {
        w.write_record([
            i.to_string(),
            ms(t.propagation),
            ms(t.transmission),
            ms(t.processing),
            ms(t.queueing),
            ms(t.retransmission),
            ms(2.0 * t.one_way() + t.retransmission),
        ])
        .map_err(io)?;
    }
    w.write_record(["total", "", "", "", "", "", &ms(breakdown.total)])
        .map_err(io)?;
    w.flush().map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

fn queue(lambda: f64, mu: f64, servers: u32) -> Result<(), CliError> {
    let params = QueueParams::new(lambda, mu, servers);
    let c = erlang_c_probability(&params)?;
    let wq = mean_wait_in_queue(&params)?;
    println!("lambda,mu,c,erlang_c,Wq");
    println!("{lambda},{mu},{servers},{c},{wq}");
    Ok(())
}
