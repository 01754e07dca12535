//! Run directories, CSV outputs, JSON manifests and text tables.
//!
//! Every CSV header row ends with a column named after its schema, e.g.
//! `erw-trace/1`; that column is empty in data rows. Reals are written in
//! shortest round-trip decimal form.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coupling::CoupledTrace;
use crate::diagnostics::{ProbeReport, TestReport};
use crate::engine::{StepEvent, StepObserver, WalkTrace};
use crate::error::{Error, Result};
use crate::montecarlo::{PiEstimate, ReplicaSummary};
use crate::observables::{ObservableSeries, RescaledPath};

pub const TRACE_SCHEMA: &str = "erw-trace/1";
pub const OBSERVABLES_SCHEMA: &str = "erw-observables/1";
pub const COUPLED_SCHEMA: &str = "erw-coupled/1";
pub const RESCALED_SCHEMA: &str = "erw-rescaled-path/1";
pub const SUMMARY_SCHEMA: &str = "erw-replica-summary/1";
pub const CHECKPOINT_SCHEMA: &str = "erw-replica-checkpoints/1";
pub const PI_SCHEMA: &str = "erw-pi-ladder/1";
pub const PROBE_SCHEMA: &str = "erw-probe-range/1";
pub const MANIFEST_SCHEMA: &str = "erw-manifest/1";

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Resource(format!("csv: {other:?}")),
    }
}

/// CSV writer that appends the empty schema column to every row.
pub struct CsvSink<W: Write> {
    inner: csv::Writer<W>,
    row: Vec<String>,
}

impl CsvSink<BufWriter<File>> {
    pub fn create(path: &Path, schema: &str, columns: &[String]) -> Result<Self> {
        CsvSink::new(BufWriter::new(File::create(path)?), schema, columns)
    }
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W, schema: &str, columns: &[String]) -> Result<Self> {
        let mut inner = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let header: Vec<&str> = columns.iter().map(String::as_str).chain([schema]).collect();
        inner.write_record(&header).map_err(csv_err)?;
        Ok(CsvSink { inner, row: Vec::new() })
    }

    pub fn field(&mut self, value: impl ToString) -> &mut Self {
        self.row.push(value.to_string());
        self
    }

    pub fn fields<T: ToString>(&mut self, values: impl IntoIterator<Item = T>) -> &mut Self {
        self.row.extend(values.into_iter().map(|v| v.to_string()));
        self
    }

    pub fn end_row(&mut self) -> Result<()> {
        self.row.push(String::new());
        self.inner.write_record(&self.row).map_err(csv_err)?;
        self.row.clear();
        Ok(())
    }

    pub fn finish(self) -> Result<W> {
        self.inner.into_inner().map_err(|e| Error::Io(e.into_error()))
    }
}

fn axis_columns(prefix: &str, dim: usize) -> Vec<String> {
    (1..=dim).map(|j| format!("{prefix}_{j}")).collect()
}

fn flag(b: bool) -> u8 {
    b as u8
}

pub fn trace_columns(dim: usize) -> Vec<String> {
    let mut c = vec!["time".to_string()];
    c.extend(axis_columns("x", dim));
    c.extend(["first_visit".into(), "excited".into()]);
    c
}

/// Streams `time, x_1..x_d, first_visit, excited` while a walk runs.
///
/// The row for time 0 is written on creation. The first write error is kept
/// and returned by [`TraceStream::finish`].
pub struct TraceStream<W: Write> {
    sink: CsvSink<W>,
    error: Option<Error>,
}

impl TraceStream<BufWriter<File>> {
    pub fn create(path: &Path, dim: usize) -> Result<Self> {
        TraceStream::new(BufWriter::new(File::create(path)?), dim)
    }
}

impl<W: Write> TraceStream<W> {
    pub fn new(out: W, dim: usize) -> Result<Self> {
        let mut sink = CsvSink::new(out, TRACE_SCHEMA, &trace_columns(dim))?;
        sink.field(0).fields(vec![0; dim]).field(1).field(0).end_row()?;
        Ok(TraceStream { sink, error: None })
    }

    pub fn finish(self) -> Result<W> {
        match self.error {
            Some(e) => Err(e),
            None => self.sink.finish(),
        }
    }
}

impl<W: Write> StepObserver for TraceStream<W> {
    fn observe(&mut self, event: &StepEvent<'_>) {
        if self.error.is_some() {
            return;
        }
        let result = self
            .sink
            .field(event.time)
            .fields(event.position.iter())
            .field(flag(event.new_site))
            .field(flag(event.excited()))
            .end_row();
        if let Err(e) = result {
            self.error = Some(e);
        }
    }
}

pub fn write_trace<W: Write>(out: W, trace: &WalkTrace) -> Result<W> {
    let mut sink = CsvSink::new(out, TRACE_SCHEMA, &trace_columns(trace.dim()))?;
    for (i, x) in trace.positions().enumerate() {
        sink.field(i)
            .fields(x.iter())
            .field(flag(trace.first_visit[i]))
            .field(flag(trace.excited[i]))
            .end_row()?;
    }
    sink.finish()
}

/// `time, range, k_count, d_sup` at the recorded checkpoints.
pub fn write_observables<W: Write>(out: W, series: &ObservableSeries) -> Result<W> {
    let columns: Vec<String> = ["time", "range", "k_count", "d_sup"].map(String::from).to_vec();
    let mut sink = CsvSink::new(out, OBSERVABLES_SCHEMA, &columns)?;
    for i in 0..series.range_size.len() {
        sink.field(series.checkpoints[i])
            .field(series.range_size[i])
            .field(series.k_count[i])
            .field(series.d_sup[i])
            .end_row()?;
    }
    sink.finish()
}

pub fn write_coupled<W: Write>(out: W, coupled: &CoupledTrace) -> Result<W> {
    let dim = coupled.subset.dim();
    let mut columns = vec!["time".to_string()];
    columns.extend(axis_columns("x", dim));
    columns.push("x_new_site".into());
    columns.extend(axis_columns("y", dim));
    columns.push("y_new_site".into());
    let mut sink = CsvSink::new(out, COUPLED_SCHEMA, &columns)?;
    for row in coupled.rows() {
        sink.field(row.time)
            .fields(row.x.iter())
            .field(flag(row.x_new_site))
            .fields(row.y.iter())
            .field(flag(row.y_new_site))
            .end_row()?;
    }
    sink.finish()
}

pub fn write_rescaled<W: Write>(out: W, path: &RescaledPath) -> Result<W> {
    let dim = path.samples.first().map_or(0, |s| s.1.len());
    let mut columns = vec!["t".to_string()];
    columns.extend(axis_columns("b", dim));
    let mut sink = CsvSink::new(out, RESCALED_SCHEMA, &columns)?;
    for (t, b) in &path.samples {
        sink.field(t).fields(b.iter()).end_row()?;
    }
    sink.finish()
}

pub fn write_summaries<W: Write>(out: W, dim: usize, summaries: &[ReplicaSummary]) -> Result<W> {
    let mut columns: Vec<String> = ["replica", "range", "excitations"].map(String::from).to_vec();
    columns.extend(axis_columns("x", dim));
    let mut sink = CsvSink::new(out, SUMMARY_SCHEMA, &columns)?;
    for s in summaries {
        sink.field(s.replica)
            .field(s.range)
            .field(s.excitations)
            .fields(s.final_position.iter())
            .end_row()?;
    }
    sink.finish()
}

pub fn write_checkpoints<W: Write>(out: W, dim: usize, summaries: &[ReplicaSummary]) -> Result<W> {
    let mut columns: Vec<String> = ["replica", "time"].map(String::from).to_vec();
    columns.extend(axis_columns("x", dim));
    columns.extend(["range", "k_count", "d_sup"].map(String::from));
    let mut sink = CsvSink::new(out, CHECKPOINT_SCHEMA, &columns)?;
    for s in summaries {
        for c in &s.checkpoints {
            sink.field(s.replica)
                .field(c.time)
                .fields(c.position.iter())
                .field(c.range)
                .field(c.k_count)
                .field(c.d_sup)
                .end_row()?;
        }
    }
    sink.finish()
}

pub fn write_pi_ladder<W: Write>(out: W, est: &PiEstimate) -> Result<W> {
    let columns: Vec<String> = ["horizon", "survival_fraction", "ci_halfwidth"].map(String::from).to_vec();
    let mut sink = CsvSink::new(out, PI_SCHEMA, &columns)?;
    for i in 0..est.horizons.len() {
        sink.field(est.horizons[i])
            .field(est.survival_fraction[i])
            .field(est.ci_halfwidth[i])
            .end_row()?;
    }
    sink.finish()
}

pub fn write_probe<W: Write>(out: W, probe: &ProbeReport) -> Result<W> {
    let columns: Vec<String> = ["n", "mean_range_ratio", "ci_halfwidth"].map(String::from).to_vec();
    let mut sink = CsvSink::new(out, PROBE_SCHEMA, &columns)?;
    for r in &probe.ladder {
        sink.field(r.n).field(r.mean_ratio).field(r.ci_halfwidth).end_row()?;
    }
    sink.finish()
}

/// A fresh output directory; fails if `path` already exists.
#[derive(Debug)]
pub struct RunDir {
    path: PathBuf,
    outputs: Vec<PathBuf>,
}

impl RunDir {
    pub fn create(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        fs::create_dir(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::AlreadyExists => Error::Config(format!(
                "run directory {} already exists; runs are never overwritten",
                path.display()
            )),
            _ => Error::Io(e),
        })?;
        Ok(RunDir {
            path: path.to_path_buf(),
            outputs: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Path for a new output file, recorded for the manifest.
    pub fn file(&mut self, name: &str) -> PathBuf {
        self.outputs.push(PathBuf::from(name));
        self.path.join(name)
    }

    /// A buffered writer for a new output file.
    pub fn create_file(&mut self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.file(name))?))
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.file(name);
        fs::write(p, bytes)?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Writes `manifest.json` listing every output with its SHA-256.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<Manifest> {
        self.outputs.sort();
        self.outputs.dedup();
        manifest.outputs = self
            .outputs
            .iter()
            .map(|name| {
                let bytes = fs::read(self.path.join(name))?;
                Ok(OutputEntry {
                    file: name.to_string_lossy().into_owned(),
                    sha256: hex::encode(Sha256::digest(&bytes)),
                    bytes: bytes.len() as u64,
                })
            })
            .collect::<Result<_>>()?;
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::write(self.path.join("manifest.json"), bytes)?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub package: String,
    pub csv_schemas: Vec<String>,
}

impl Default for Versions {
    fn default() -> Self {
        Versions {
            package: concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION")).to_string(),
            csv_schemas: [
                TRACE_SCHEMA,
                OBSERVABLES_SCHEMA,
                COUPLED_SCHEMA,
                RESCALED_SCHEMA,
                SUMMARY_SCHEMA,
                CHECKPOINT_SCHEMA,
                PI_SCHEMA,
                PROBE_SCHEMA,
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

/// Everything needed to reproduce a run. `wall_time_seconds` is the only
/// field that differs between two runs of the same config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub command: String,
    pub seed: u64,
    pub parallelism: usize,
    /// The validated config with defaults filled in.
    pub config: String,
    pub config_sha256: String,
    pub versions: Versions,
    /// Manifest hashes of escape estimates the run consumed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<String>,
    pub outputs: Vec<OutputEntry>,
    pub wall_time_seconds: f64,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, parallelism: usize, config_text: &str) -> Self {
        Manifest {
            schema: MANIFEST_SCHEMA.to_string(),
            command: command.to_string(),
            seed,
            parallelism,
            config: config_text.to_string(),
            config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
            versions: Versions::default(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_time_seconds: 0.0,
        }
    }

    /// The manifest with run-dependent fields cleared, for comparing runs.
    pub fn reproducible_part(&self) -> Manifest {
        Manifest {
            wall_time_seconds: 0.0,
            parallelism: 0,
            ..self.clone()
        }
    }
}

/// Left-aligned text table; columns are as wide as their widest cell.
pub fn text_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (i, (cell, w)) in cells.zip(&widths).enumerate() {
            if i > 0 {
                s.push_str("  ");
            }
            let _ = write!(s, "{cell:<w$}");
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(&mut header.iter().copied());
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&mut rule.iter().map(String::as_str));
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
    out
}

fn bound(b: Option<f64>) -> String {
    b.map_or_else(|| "-".to_string(), |v| format!("{v:.6}"))
}

/// Human-readable rendering of a report.
pub fn report_table(report: &TestReport) -> String {
    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| {
            vec![
                c.label.clone(),
                format!("{:.6}", c.value),
                bound(c.lower),
                bound(c.upper),
                match (c.gating, c.pass) {
                    (false, _) => "info".into(),
                    (true, true) => "pass".into(),
                    (true, false) => "FAIL".into(),
                },
            ]
        })
        .collect();
    let mut out = format!(
        "{}: {} (statistic {:.6}, threshold {:.6}, {} replicas, seed {})\n",
        report.name,
        if report.pass { "PASS" } else { "FAIL" },
        report.statistic,
        report.threshold,
        report.replicas,
        report.seed
    );
    out.push_str(&text_table(&["check", "value", "lower", "upper", "verdict"], &rows));
    for n in &report.notes {
        out.push_str("note: ");
        out.push_str(n);
        out.push('\n');
    }
    out
}

pub fn probe_table(probe: &ProbeReport) -> String {
    let rows: Vec<Vec<String>> = probe
        .ladder
        .iter()
        .map(|r| vec![r.n.to_string(), format!("{:.6}", r.mean_ratio), format!("{:.6}", r.ci_halfwidth)])
        .collect();
    let mut out = format!("{} ({} replicas, seed {})\n", probe.name, probe.replicas, probe.seed);
    out.push_str(&text_table(&["n", "mean |R_n|/n", "95% half-width"], &rows));
    if let Some((p, hw)) = probe.pi_hat {
        let _ = writeln!(out, "escape estimate: {p:.6} ± {hw:.6}");
    }
    out
}

pub fn pi_table(est: &PiEstimate) -> String {
    let rows: Vec<Vec<String>> = (0..est.horizons.len())
        .map(|i| {
            vec![
                est.horizons[i].to_string(),
                format!("{:.6}", est.survival_fraction[i]),
                format!("{:.6}", est.ci_halfwidth[i]),
            ]
        })
        .collect();
    let mut out = format!("escape ladder ({} replicas, seed {}, hash {})\n", est.replicas, est.seed, est.manifest_hash);
    out.push_str(&text_table(&["horizon", "survival", "95% half-width"], &rows));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run_walk, WalkConfig, Walker};
    use crate::excitation::{make_example_gamma, make_example_xi, ExcitationSchedule};
    use crate::lattice::Direction;

    fn config(horizon: u64) -> WalkConfig {
        WalkConfig::new(
            ExcitationSchedule::new(1.0, 0.5).unwrap(),
            make_example_xi(2).unwrap(),
            make_example_gamma(2, 0.75).unwrap(),
            Direction::axis(2, 0).unwrap(),
            horizon,
            5,
        )
        .unwrap()
    }

    #[test]
    fn streamed_trace_matches_recorded_trace() {
        let c = config(500);
        let recorded = write_trace(Vec::new(), &run_walk(&c).unwrap()).unwrap();
        let mut stream = TraceStream::new(Vec::new(), 2).unwrap();
        Walker::for_replica(&c, 0).run(500, &mut stream);
        assert_eq!(stream.finish().unwrap(), recorded);
        let text = String::from_utf8(recorded).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("time,x_1,x_2,first_visit,excited,erw-trace/1"));
        assert_eq!(lines.next(), Some("0,0,0,1,0,"));
        assert_eq!(text.lines().count(), 502);
    }

    #[test]
    fn reals_round_trip_through_csv() {
        let path = RescaledPath {
            n: 3,
            samples: vec![(0.1, vec![1.0 / 3.0, -2.0f64.sqrt()])],
        };
        let text = String::from_utf8(write_rescaled(Vec::new(), &path).unwrap()).unwrap();
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(reader.headers().unwrap().iter().last(), Some(RESCALED_SCHEMA));
        let row = reader.records().next().unwrap().unwrap();
        let b1: f64 = row[1].parse().unwrap();
        let b2: f64 = row[2].parse().unwrap();
        assert_eq!(b1.to_bits(), (1.0f64 / 3.0).to_bits());
        assert_eq!(b2.to_bits(), (-2.0f64.sqrt()).to_bits());
    }

    #[test]
    fn run_dir_is_never_reused() {
        let tmp = tempfile::tempdir().unwrap();
        let path = tmp.path().join("nested/run1");
        let mut dir = RunDir::create(&path).unwrap();
        dir.write_bytes("a.csv", b"x\n").unwrap();
        let m = dir.finish(Manifest::new("simulate", 1, 1, "cfg")).unwrap();
        assert_eq!(m.outputs.len(), 1);
        assert_eq!(m.outputs[0].sha256, hex::encode(Sha256::digest(b"x\n")));
        assert!(matches!(RunDir::create(&path), Err(Error::Config(_))));
        let back: Manifest = serde_json::from_slice(&fs::read(path.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn table_alignment() {
        let t = text_table(&["a", "bbb"], &[vec!["long".into(), "1".into()], vec!["x".into(), "22".into()]]);
        assert_eq!(t, "a     bbb\n----  ---\nlong  1\nx     22\n");
    }
}
