//! Aggregation of packet records into interval series, RTT summaries and
//! the fading comparison table, with their CSV and plain-text renderings.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::Serialize;
use thiserror::Error;

use crate::sim::PacketRecord;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: bad value {value:?} in column {column}")]
    Parse {
        line: u64,
        column: &'static str,
        value: String,
    },
}

pub type Result<T> = std::result::Result<T, ReportError>;

pub const INTERVALS_HEADER: [&str; 9] = [
    "window_start_s",
    "window_len_s",
    "sent",
    "delivered",
    "lost",
    "throughput_bps",
    "avg_latency_ms",
    "min_latency_ms",
    "max_latency_ms",
];

pub const RTT_SUMMARY_HEADER: [&str; 4] = ["min_ms", "max_ms", "avg_ms", "count"];

/// Running count, sum, min and max of latencies in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LatencyStats {
    count: u64,
    sum: f64,
    min: f64,
    max: f64,
}

impl LatencyStats {
    pub fn push(&mut self, ms: f64) {
        if self.count == 0 {
            self.min = ms;
            self.max = ms;
        } else {
            self.min = self.min.min(ms);
            self.max = self.max.max(ms);
        }
        self.count += 1;
        self.sum += ms;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }

    pub fn min(&self) -> Option<f64> {
        (self.count > 0).then_some(self.min)
    }

    pub fn max(&self) -> Option<f64> {
        (self.count > 0).then_some(self.max)
    }

    pub fn summary(&self) -> RttSummary {
        RttSummary {
            min_ms: self.min(),
            max_ms: self.max(),
            avg_ms: self.mean(),
            count: self.count,
        }
    }
}

impl FromIterator<f64> for LatencyStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = LatencyStats::default();
        for ms in iter {
            s.push(ms);
        }
        s
    }
}

/// Latency extremes and mean over delivered packets. All statistics are
/// `None` when nothing was delivered.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RttSummary {
    pub min_ms: Option<f64>,
    pub max_ms: Option<f64>,
    pub avg_ms: Option<f64>,
    pub count: u64,
}

impl RttSummary {
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }
}

pub fn summarize_rtt<'a, I>(records: I) -> RttSummary
where
    I: IntoIterator<Item = &'a PacketRecord>,
{
    records
        .into_iter()
        .filter_map(PacketRecord::latency_ms)
        .collect::<LatencyStats>()
        .summary()
}

/// Counts and latency statistics for one reporting window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntervalReport {
    pub window_start_s: f64,
    pub window_len_s: f64,
    pub sent: u64,
    pub delivered: u64,
    pub lost: u64,
    pub throughput_bps: f64,
    pub avg_latency_ms: Option<f64>,
    pub min_latency_ms: Option<f64>,
    pub max_latency_ms: Option<f64>,
}

impl IntervalReport {
    pub fn from_records<'a, I>(
        window_start_s: f64,
        window_len_s: f64,
        bits_per_packet: f64,
        records: I,
    ) -> Self
    where
        I: IntoIterator<Item = &'a PacketRecord>,
    {
        let mut sent = 0;
        let mut stats = LatencyStats::default();
        for r in records {
            sent += 1;
            if let Some(ms) = r.latency_ms() {
                stats.push(ms);
            }
        }
        let delivered = stats.count();
        IntervalReport {
            window_start_s,
            window_len_s,
            sent,
            delivered,
            lost: sent - delivered,
            throughput_bps: delivered as f64 * bits_per_packet / window_len_s,
            avg_latency_ms: stats.mean(),
            min_latency_ms: stats.min(),
            max_latency_ms: stats.max(),
        }
    }
}

/// Splits records into consecutive windows of `window_s` seconds by the
/// start of the tick they were sent in, covering `[0, horizon_s)`.
pub fn windowed_series_over(
    records: &[PacketRecord],
    window_s: f64,
    bits_per_packet: f64,
    horizon_s: f64,
) -> Vec<IntervalReport> {
    assert!(window_s > 0.0, "window must be positive");
    let windows = (horizon_s / window_s - 1e-9).ceil().max(0.0) as usize;
    let mut buckets: Vec<Vec<&PacketRecord>> = vec![Vec::new(); windows];
    for r in records {
        let idx = (r.tick_start_s / window_s + 1e-9).floor() as usize;
        if idx >= buckets.len() {
            buckets.resize_with(idx + 1, Vec::new);
        }
        buckets[idx].push(r);
    }
    buckets
        .into_iter()
        .enumerate()
        .map(|(i, b)| {
            IntervalReport::from_records(i as f64 * window_s, window_s, bits_per_packet, b)
        })
        .collect()
}

/// Like [`windowed_series_over`] with the horizon set by the last record.
pub fn windowed_series(
    records: &[PacketRecord],
    window_s: f64,
    bits_per_packet: f64,
) -> Vec<IntervalReport> {
    windowed_series_over(records, window_s, bits_per_packet, 0.0)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_intervals_csv<W: Write>(out: W, reports: &[IntervalReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(INTERVALS_HEADER)?;
    for r in reports {
        w.write_record([
            r.window_start_s.to_string(),
            r.window_len_s.to_string(),
            r.sent.to_string(),
            r.delivered.to_string(),
            r.lost.to_string(),
            r.throughput_bps.to_string(),
            opt(r.avg_latency_ms),
            opt(r.min_latency_ms),
            opt(r.max_latency_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize) -> Result<T> {
    let raw = rec.get(i).unwrap_or("");
    raw.parse().map_err(|_| ReportError::Parse {
        line: rec.position().map_or(0, |p| p.line()),
        column: INTERVALS_HEADER[i],
        value: raw.to_string(),
    })
}

fn opt_field(rec: &csv::StringRecord, i: usize) -> Result<Option<f64>> {
    match rec.get(i) {
        Some("") | None => Ok(None),
        Some(_) => field(rec, i).map(Some),
    }
}

pub fn read_intervals_csv<R: Read>(input: R) -> Result<Vec<IntervalReport>> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(INTERVALS_HEADER) {
        return Err(ReportError::ShapeMismatch(format!(
            "expected header {}",
            INTERVALS_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push(IntervalReport {
            window_start_s: field(&rec, 0)?,
            window_len_s: field(&rec, 1)?,
            sent: field(&rec, 2)?,
            delivered: field(&rec, 3)?,
            lost: field(&rec, 4)?,
            throughput_bps: field(&rec, 5)?,
            avg_latency_ms: opt_field(&rec, 6)?,
            min_latency_ms: opt_field(&rec, 7)?,
            max_latency_ms: opt_field(&rec, 8)?,
        });
    }
    Ok(out)
}

pub fn write_rtt_summary_csv<W: Write>(out: W, summary: &RttSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RTT_SUMMARY_HEADER)?;
    w.write_record([
        opt(summary.min_ms),
        opt(summary.max_ms),
        opt(summary.avg_ms),
        summary.count.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

/// Average latency per sample time (rows) and fading kind (columns), ms.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FadingTable {
    pub times_s: Vec<f64>,
    pub labels: Vec<String>,
    pub values_ms: Vec<Vec<Option<f64>>>,
}

/// Checks that `values_ms` has one row per time and one column per label.
pub fn fading_comparison_table(
    times_s: Vec<f64>,
    labels: Vec<String>,
    values_ms: Vec<Vec<Option<f64>>>,
) -> Result<FadingTable> {
    if times_s.is_empty() || labels.is_empty() {
        return Err(ReportError::ShapeMismatch("table must be nonempty".into()));
    }
    if values_ms.len() != times_s.len() {
        return Err(ReportError::ShapeMismatch(format!(
            "{} rows for {} sample times",
            values_ms.len(),
            times_s.len()
        )));
    }
    if let Some((i, row)) = values_ms
        .iter()
        .enumerate()
        .find(|(_, r)| r.len() != labels.len())
    {
        return Err(ReportError::ShapeMismatch(format!(
            "row {i} has {} cells, expected {}",
            row.len(),
            labels.len()
        )));
    }
    Ok(FadingTable {
        times_s,
        labels,
        values_ms,
    })
}

fn one_decimal(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.1}")).unwrap_or_default()
}

impl FadingTable {
    pub fn header(&self) -> Vec<String> {
        std::iter::once("time_s".to_string())
            .chain(self.labels.iter().map(|l| format!("{l}_ms")))
            .collect()
    }

    fn rows(&self) -> impl Iterator<Item = Vec<String>> + '_ {
        self.times_s.iter().zip(&self.values_ms).map(|(t, row)| {
            std::iter::once(t.to_string())
                .chain(row.iter().map(|v| one_decimal(*v)))
                .collect()
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for row in self.rows() {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn render(&self) -> String {
        let rows: Vec<Vec<String>> = self.rows().collect();
        render_table(&self.header(), &rows)
    }
}

/// Right-aligned plain-text table.
pub fn render_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect();
        let _ = writeln!(out, "{}", parts.join("  "));
    };
    line(header);
    for row in rows {
        line(row);
    }
    out
}

pub fn render_intervals(reports: &[IntervalReport]) -> String {
    let header: Vec<String> = INTERVALS_HEADER.iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                format!("{:.1}", r.window_start_s),
                format!("{:.1}", r.window_len_s),
                r.sent.to_string(),
                r.delivered.to_string(),
                r.lost.to_string(),
                format!("{:.1}", r.throughput_bps),
                one_decimal(r.avg_latency_ms),
                one_decimal(r.min_latency_ms),
                one_decimal(r.max_latency_ms),
            ]
        })
        .collect();
    render_table(&header, &rows)
}

pub fn render_rtt_summary(s: &RttSummary) -> String {
    let header: Vec<String> = RTT_SUMMARY_HEADER.iter().map(|s| s.to_string()).collect();
    let row = vec![
        one_decimal(s.min_ms),
        one_decimal(s.max_ms),
        one_decimal(s.avg_ms),
        s.count.to_string(),
    ];
    render_table(&header, &[row])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(tick_start_s: f64, latency_ms: Option<f64>) -> PacketRecord {
        PacketRecord {
            node: 0,
            tick: tick_start_s as u64,
            seq: 0,
            tick_start_s,
            send_time_s: tick_start_s,
            attempts: 4,
            latency_legs: 4,
            retries: 0,
            delivered: latency_ms.is_some(),
            latency_s: latency_ms.map(|ms| ms * 1e-3),
        }
    }

    #[test]
    fn summary_examples() {
        let s: RttSummary = [3.0, 12.0, 72.0]
            .into_iter()
            .collect::<LatencyStats>()
            .summary();
        assert_eq!(s.min_ms, Some(3.0));
        assert_eq!(s.max_ms, Some(72.0));
        assert_eq!(s.avg_ms, Some(29.0));
        let one = [4.25].into_iter().collect::<LatencyStats>().summary();
        assert_eq!(
            (one.min_ms, one.max_ms, one.avg_ms),
            (Some(4.25), Some(4.25), Some(4.25))
        );
        let empty = summarize_rtt(&[]);
        assert!(empty.is_empty());
        assert_eq!(empty.avg_ms, None);
    }

    #[test]
    fn summary_skips_lost_packets() {
        let recs = [
            record(0.0, Some(5.0)),
            record(0.0, None),
            record(1.0, Some(7.0)),
        ];
        let s = summarize_rtt(&recs);
        assert_eq!(s.count, 2);
        assert!((s.avg_ms.unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn throughput_example() {
        let recs: Vec<PacketRecord> = (0..10).map(|_| record(2.0, Some(1.0))).collect();
        let w = windowed_series(&recs, 5.0, 1000.0);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].throughput_bps, 2000.0);
        assert_eq!(w[0].sent, 10);
    }

    #[test]
    fn empty_series() {
        assert!(windowed_series(&[], 5.0, 1000.0).is_empty());
        let w = windowed_series_over(&[], 5.0, 1000.0, 60.0);
        assert_eq!(w.len(), 12);
        assert!(w.iter().all(|r| r.sent == 0 && r.avg_latency_ms.is_none()));
    }

    #[test]
    fn empty_window_latency_is_blank_in_csv() {
        let recs = [record(0.0, Some(2.5)), record(10.0, None)];
        let w = windowed_series(&recs, 5.0, 8.0);
        assert_eq!(w.len(), 3);
        let mut buf = Vec::new();
        write_intervals_csv(&mut buf, &w).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], INTERVALS_HEADER.join(","));
        assert_eq!(lines[2], "5,5,0,0,0,0,,,");
        assert_eq!(lines[3], "10,5,1,0,1,0,,,");
        assert_eq!(read_intervals_csv(text.as_bytes()).unwrap(), w);
    }

    #[test]
    fn rtt_summary_csv() {
        let mut buf = Vec::new();
        let s = [3.0, 12.0, 72.0]
            .into_iter()
            .collect::<LatencyStats>()
            .summary();
        write_rtt_summary_csv(&mut buf, &s).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "min_ms,max_ms,avg_ms,count\n3,72,29,3\n"
        );
    }

    #[test]
    fn fading_table_shapes() {
        let t = fading_comparison_table(
            vec![2.0, 4.0, 6.0, 8.0, 10.0],
            ["none", "rayleigh", "rician", "awgn"]
                .map(String::from)
                .to_vec(),
            vec![vec![Some(9.5), Some(11.04), Some(11.5), Some(12.5)]; 5],
        )
        .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0], "time_s,none_ms,rayleigh_ms,rician_ms,awgn_ms");
        assert_eq!(lines[1], "2,9.5,11.0,11.5,12.5");
        assert_eq!(t.render().lines().count(), 6);

        let single =
            fading_comparison_table(vec![1.0], vec!["x".into()], vec![vec![Some(3.0)]]).unwrap();
        assert_eq!(single.render().lines().count(), 2);

        let ragged = fading_comparison_table(
            vec![1.0, 2.0],
            vec!["a".into(), "b".into()],
            vec![vec![Some(1.0), Some(2.0)], vec![Some(1.0)]],
        );
        assert!(matches!(ragged, Err(ReportError::ShapeMismatch(_))));
    }
}
