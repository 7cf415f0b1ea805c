use iiot_netsim::report::{
    read_intervals_csv, windowed_series_over, write_intervals_csv, IntervalReport,
};
use iiot_netsim::sim::PacketRecord;
use proptest::prelude::*;

fn record(tick: u64, latency_ms: Option<f64>) -> PacketRecord {
    PacketRecord {
        node: 0,
        tick,
        seq: 0,
        tick_start_s: tick as f64,
        send_time_s: tick as f64 + 0.5,
        attempts: 4,
        latency_legs: 4,
        retries: 0,
        delivered: latency_ms.is_some(),
        latency_s: latency_ms.map(|ms| ms * 1e-3),
    }
}

fn records() -> impl Strategy<Value = Vec<PacketRecord>> {
    prop::collection::vec((0u64..20, prop::option::of(0.1f64..100.0)), 0..200)
        .prop_map(|v| v.into_iter().map(|(t, l)| record(t, l)).collect())
}

proptest! {
    #[test]
    fn windows_partition_the_records(recs in records()) {
        let windows = windowed_series_over(&recs, 5.0, 1024.0, 20.0);
        prop_assert_eq!(windows.len(), 4);
        prop_assert_eq!(windows.iter().map(|w| w.sent).sum::<u64>(), recs.len() as u64);
        let delivered = recs.iter().filter(|r| r.delivered).count() as u64;
        prop_assert_eq!(windows.iter().map(|w| w.delivered).sum::<u64>(), delivered);
        for w in &windows {
            prop_assert_eq!(w.sent, w.delivered + w.lost);
        }
    }

    #[test]
    fn two_short_windows_make_a_long_one(recs in records()) {
        let short = windowed_series_over(&recs, 5.0, 1024.0, 20.0);
        let long = windowed_series_over(&recs, 10.0, 1024.0, 20.0);
        for (i, l) in long.iter().enumerate() {
            let (a, b) = (&short[2 * i], &short[2 * i + 1]);
            prop_assert_eq!(l.sent, a.sent + b.sent);
            prop_assert_eq!(l.delivered, a.delivered + b.delivered);
            let lo = [a.min_latency_ms, b.min_latency_ms].into_iter().flatten().reduce(f64::min);
            let hi = [a.max_latency_ms, b.max_latency_ms].into_iter().flatten().reduce(f64::max);
            prop_assert_eq!(l.min_latency_ms, lo);
            prop_assert_eq!(l.max_latency_ms, hi);
            prop_assert!((l.throughput_bps - (a.throughput_bps + b.throughput_bps) / 2.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn csv_round_trips(recs in records()) {
        let windows: Vec<IntervalReport> = windowed_series_over(&recs, 3.0, 1000.0, 21.0);
        let mut buf = Vec::new();
        write_intervals_csv(&mut buf, &windows).unwrap();
        prop_assert_eq!(read_intervals_csv(buf.as_slice()).unwrap(), windows);
    }
}

#[test]
fn malformed_csv_names_the_column() {
    let text = "window_start_s,window_len_s,sent,delivered,lost,throughput_bps,avg_latency_ms,min_latency_ms,max_latency_ms\n0,5,x,0,0,0,,,\n";
    let err = read_intervals_csv(text.as_bytes()).unwrap_err().to_string();
    assert!(err.contains("sent"), "{err}");
}
