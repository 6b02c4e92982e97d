//! Artifact emission: CSV tables, JSON summaries, and the run record.
//!
//! Determinism contract: every float in a CSV or JSON artifact is written
//! with 17 significant digits (`{:.16e}`), struct fields serialize in
//! declaration order, and all collections are emitted in a canonical order,
//! so identical configurations produce bit-identical artifacts. The run
//! record is the single exception: it carries wall-clock timings, and it
//! lists the SHA-256 of every other artifact so a re-run can be checked
//! against it.

use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter, Serializer};
use sha2::{Digest, Sha256};

/// Format one float for an artifact: 17 significant digits, dot decimal.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// A JSON formatter that pretty-prints but pins floats to 17 significant
/// digits, matching the CSV convention.
struct SigDigitFormatter<'a> {
    inner: PrettyFormatter<'a>,
}

impl<'a> SigDigitFormatter<'a> {
    fn new() -> Self {
        SigDigitFormatter { inner: PrettyFormatter::new() }
    }
}

impl<'a> Formatter for SigDigitFormatter<'a> {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            writer.write_all(fmt_float(value).as_bytes())
        } else {
            // Summaries never contain non-finite values by construction;
            // JSON has no literal for them, so degrade to null defensively.
            writer.write_all(b"null")
        }
    }

    fn begin_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_array(writer)
    }

    fn end_array<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array(writer)
    }

    fn begin_array_value<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_array_value(writer, first)
    }

    fn end_array_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_array_value(writer)
    }

    fn begin_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object(writer)
    }

    fn end_object<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object(writer)
    }

    fn begin_object_key<W: ?Sized + io::Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.inner.begin_object_key(writer, first)
    }

    fn begin_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(writer)
    }

    fn end_object_value<W: ?Sized + io::Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.inner.end_object_value(writer)
    }
}

/// Serialize a value to pretty JSON with pinned float formatting.
pub fn to_json_bytes<T: Serialize>(value: &T) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    let mut ser = Serializer::with_formatter(&mut out, SigDigitFormatter::new());
    value
        .serialize(&mut ser)
        .map_err(|e| io::Error::other(format!("JSON serialization failed: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

/// One emitted file, as recorded in the run record.
#[derive(Debug, Clone, Serialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Wall-clock phases of one command, in milliseconds.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Timings {
    pub solve_ms: u64,
    pub emit_ms: u64,
    pub total_ms: u64,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    schema: &'static str,
    command: &'a str,
    version: &'static str,
    config_text: &'a str,
    artifacts: &'a [ArtifactRecord],
    timings_ms: Timings,
}

/// Writes artifacts into one output directory, recording path, size, and
/// SHA-256 of each; `finish` emits `run_record.json` listing them all.
pub struct ArtifactSink {
    dir: PathBuf,
    records: Vec<ArtifactRecord>,
}

impl ArtifactSink {
    pub fn new(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(ArtifactSink { dir: dir.to_path_buf(), records: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Write one file and record it.
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> io::Result<()> {
        let path = self.dir.join(name);
        let mut file = fs::File::create(&path)?;
        file.write_all(bytes)?;
        let digest = Sha256::digest(bytes);
        self.records.push(ArtifactRecord {
            path: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: format!("{digest:x}"),
        });
        Ok(())
    }

    /// Write a CSV artifact: a `# schema=<name>/1` comment line, a header
    /// row, then the pre-formatted data rows.
    pub fn write_csv(
        &mut self,
        name: &str,
        schema: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> io::Result<()> {
        let mut text = String::new();
        text.push_str(&format!("# schema={schema}/1\n"));
        text.push_str(&header.join(","));
        text.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), header.len(), "CSV row width mismatch in {name}");
            text.push_str(&row.join(","));
            text.push('\n');
        }
        self.write_bytes(name, text.as_bytes())
    }

    /// Write a JSON artifact with pinned float formatting.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<()> {
        let bytes = to_json_bytes(value)?;
        self.write_bytes(name, &bytes)
    }

    /// Emit `run_record.json` and consume the sink. The record lists every
    /// artifact written so far, sorted by path.
    pub fn finish(mut self, command: &str, config_text: &str, timings: Timings) -> io::Result<()> {
        self.records.sort_by(|a, b| a.path.cmp(&b.path));
        let record = RunRecord {
            schema: "run_record/1",
            command,
            version: env!("CARGO_PKG_VERSION"),
            config_text,
            artifacts: &self.records,
            timings_ms: timings,
        };
        let bytes = to_json_bytes(&record)?;
        fs::write(self.dir.join("run_record.json"), bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_is_17_significant_digits() {
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
        assert_eq!(fmt_float(-0.25), "-2.5000000000000000e-1");
        assert_eq!(fmt_float(1.4525), "1.4524999999999999e0");
        assert_eq!(fmt_float(1.4525).parse::<f64>().unwrap(), 1.4525);
    }

    #[test]
    fn json_floats_use_pinned_formatting() {
        #[derive(Serialize)]
        struct Demo {
            x: f64,
            xs: Vec<f64>,
        }
        let bytes = to_json_bytes(&Demo { x: 0.1, xs: vec![1.0, 2.5] }).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.contains("1.0000000000000001e-1"), "{text}");
        assert!(text.contains("2.5000000000000000e0"), "{text}");
    }

    #[test]
    fn sink_records_hashes_and_writes_run_record() {
        let dir = std::env::temp_dir().join(format!("nldirac-report-test-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        let mut sink = ArtifactSink::new(&dir).unwrap();
        sink.write_csv("t.csv", "t", &["a", "b"], &[vec!["1".into(), "2".into()]])
            .unwrap();
        sink.finish("nls", "# cfg\n", Timings { solve_ms: 1, emit_ms: 2, total_ms: 3 })
            .unwrap();

        let csv = fs::read_to_string(dir.join("t.csv")).unwrap();
        assert_eq!(csv, "# schema=t/1\na,b\n1,2\n");
        let record: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("run_record.json")).unwrap())
                .unwrap();
        assert_eq!(record["schema"], "run_record/1");
        assert_eq!(record["artifacts"][0]["path"], "t.csv");
        assert_eq!(record["artifacts"][0]["bytes"], 21);
        let _ = fs::remove_dir_all(&dir);
    }
}
