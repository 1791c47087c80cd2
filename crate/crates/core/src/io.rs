//! Bit-exact file formats: the binary time-tag stream, CSV tables for
//! histograms, traces, and scan maps, and structured-text reports. Every
//! write goes through a temp-file-then-rename so readers never observe a
//! partial file.

use crate::analysis::CorrelationHistogram;
use crate::error::{Error, Result};
use crate::noise::RfTrace;
use crate::sim::{TagRecord, TimeTagStream};
use crate::tuning::{ScanPoint, ScanResult};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub const TAG_MAGIC: [u8; 4] = *b"PTTG";
pub const TAG_VERSION: u16 = 1;
const TAG_HEADER_LEN: usize = 16;
const TAG_RECORD_LEN: usize = 9;

/// Write `bytes` to `path` atomically (temp file in the same directory,
/// then rename), creating parent directories as needed.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::config("path", "output path has no file name"))?
        .to_string_lossy()
        .into_owned();
    let tmp = dir.join(format!(".{}.{}.tmp", name, std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

/// Serialize a detector-click stream to the binary tag format:
/// a 16-byte header (magic `PTTG`, version u16 LE, channel count u8,
/// 9 reserved zero bytes) followed by 9-byte records of channel u8 and
/// timestamp u64 LE, sorted by timestamp.
pub fn write_tag_file(path: &Path, stream: &TimeTagStream) -> Result<()> {
    stream.validate()?;
    let mut bytes = Vec::with_capacity(TAG_HEADER_LEN + TAG_RECORD_LEN * stream.records.len());
    bytes.extend_from_slice(&TAG_MAGIC);
    bytes.extend_from_slice(&TAG_VERSION.to_le_bytes());
    bytes.push(2); // detector channels
    bytes.extend_from_slice(&[0u8; 9]);
    let mut last = 0u64;
    for r in &stream.records {
        if r.timestamp_ps < last {
            return Err(Error::domain("tag records must be sorted by timestamp"));
        }
        last = r.timestamp_ps;
        bytes.push(r.channel);
        bytes.extend_from_slice(&r.timestamp_ps.to_le_bytes());
    }
    write_atomic(path, &bytes)
}

/// Read a binary tag file back into a stream. The reconstructed duration
/// is one past the last timestamp; the producing seed is not stored.
pub fn read_tag_file(path: &Path) -> Result<TimeTagStream> {
    let bytes = fs::read(path)?;
    if bytes.len() < TAG_HEADER_LEN {
        return Err(Error::format(0, format!(
            "file is {} bytes, shorter than the {TAG_HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if bytes[..4] != TAG_MAGIC {
        return Err(Error::format(0, "bad magic; not a time-tag file"));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != TAG_VERSION {
        return Err(Error::format(4, format!(
            "unsupported format version {version}; this reader handles version {TAG_VERSION}"
        )));
    }
    let channels = bytes[6];
    if channels == 0 {
        return Err(Error::format(6, "channel count must be at least 1"));
    }
    let body = &bytes[TAG_HEADER_LEN..];
    let whole = body.len() / TAG_RECORD_LEN * TAG_RECORD_LEN;
    if whole != body.len() {
        return Err(Error::format(
            (TAG_HEADER_LEN + whole) as u64,
            format!("truncated record: {} trailing bytes", body.len() - whole),
        ));
    }
    let mut records = Vec::with_capacity(body.len() / TAG_RECORD_LEN);
    let mut last = 0u64;
    for (i, chunk) in body.chunks_exact(TAG_RECORD_LEN).enumerate() {
        let offset = (TAG_HEADER_LEN + i * TAG_RECORD_LEN) as u64;
        let channel = chunk[0];
        if channel >= channels {
            return Err(Error::format(offset, format!(
                "record {i}: channel {channel} exceeds the declared count {channels}"
            )));
        }
        let timestamp_ps = u64::from_le_bytes(chunk[1..9].try_into().expect("9-byte record"));
        if timestamp_ps < last {
            return Err(Error::format(
                offset,
                format!("record {i}: timestamps must be non-decreasing"),
            ));
        }
        last = timestamp_ps;
        records.push(TagRecord { channel, timestamp_ps });
    }
    let duration_ps = records.last().map_or(0, |r| r.timestamp_ps + 1);
    Ok(TimeTagStream { records, duration_ps, seed: 0 })
}

/// Histogram CSV: one metadata comment line carrying the geometry, a
/// header row, then `delay_ps,counts` rows at the bin centres. Floats use
/// the shortest representation that parses back to the identical value, so
/// a re-import reproduces the histogram bit-exactly.
pub fn write_histogram_csv(path: &Path, h: &CorrelationHistogram) -> Result<()> {
    let mut s = String::with_capacity(32 * h.counts.len() + 128);
    let _ = writeln!(
        s,
        "# bin_ps={},range_ps={},period_ps={},label={}",
        h.bin_ps, h.range_ps, h.period_ps, h.label
    );
    s.push_str("delay_ps,counts\n");
    for (i, &c) in h.counts.iter().enumerate() {
        let _ = writeln!(s, "{},{c}", h.bin_center(i));
    }
    write_atomic(path, s.as_bytes())
}

/// Split a `key=value` metadata comment written by this module; `label`
/// must come last because it may contain any character but a newline.
fn meta_field<'a>(meta: &'a str, key: &str, offset: u64) -> Result<&'a str> {
    let tag = format!("{key}=");
    let start = meta
        .find(&tag)
        .ok_or_else(|| Error::format(offset, format!("metadata line is missing `{key}=`")))?
        + tag.len();
    let rest = &meta[start..];
    Ok(if key == "label" { rest } else { rest.split(',').next().unwrap_or(rest) })
}

fn parse_num<T: std::str::FromStr>(text: &str, what: &str, offset: u64) -> Result<T> {
    text.trim()
        .parse()
        .map_err(|_| Error::format(offset, format!("cannot parse {what} from `{text}`")))
}

pub fn read_histogram_csv(path: &Path) -> Result<CorrelationHistogram> {
    let text = fs::read_to_string(path)?;
    let mut offset = 0u64;
    let mut lines = text.lines();
    let meta = lines
        .next()
        .filter(|l| l.starts_with("# "))
        .ok_or_else(|| Error::format(0, "expected a `# key=value` metadata comment line"))?;
    let bin_ps: u32 = parse_num(meta_field(meta, "bin_ps", 0)?, "bin_ps", 0)?;
    let range_ps: i64 = parse_num(meta_field(meta, "range_ps", 0)?, "range_ps", 0)?;
    let period_ps: f64 = parse_num(meta_field(meta, "period_ps", 0)?, "period_ps", 0)?;
    let label = meta_field(meta, "label", 0)?.to_string();
    offset += meta.len() as u64 + 1;
    let header = lines
        .next()
        .ok_or_else(|| Error::format(offset, "missing `delay_ps,counts` header row"))?;
    if header != "delay_ps,counts" {
        return Err(Error::format(offset, format!("unexpected header row `{header}`")));
    }
    offset += header.len() as u64 + 1;
    if bin_ps == 0 || range_ps <= 0 || range_ps % bin_ps as i64 != 0 {
        return Err(Error::format(0, "metadata describes an impossible histogram geometry"));
    }
    let n_bins = (2 * range_ps / bin_ps as i64) as usize;
    let mut h = CorrelationHistogram {
        bin_ps,
        range_ps,
        period_ps,
        label,
        counts: Vec::with_capacity(n_bins),
    };
    for line in lines {
        let i = h.counts.len();
        let (delay, count) = line
            .split_once(',')
            .ok_or_else(|| Error::format(offset, format!("row {i}: expected two columns")))?;
        let delay: f64 = parse_num(delay, "delay_ps", offset)?;
        if i >= n_bins {
            return Err(Error::format(offset, "more rows than the declared geometry holds"));
        }
        if delay != h.bin_center(i) {
            return Err(Error::format(offset, format!(
                "row {i}: delay {delay} does not match the bin centre {}",
                h.bin_center(i)
            )));
        }
        h.counts.push(parse_num(count, "counts", offset)?);
        offset += line.len() as u64 + 1;
    }
    if h.counts.len() != n_bins {
        return Err(Error::format(
            offset,
            format!("{} rows but the geometry declares {n_bins} bins", h.counts.len()),
        ));
    }
    Ok(h)
}

/// RF intensity-trace CSV: metadata comment, `bin_us,counts` header, then
/// one row per bin with its start time.
pub fn write_rf_trace_csv(path: &Path, trace: &RfTrace) -> Result<()> {
    let mut s = String::with_capacity(16 * trace.counts.len() + 64);
    let _ = writeln!(s, "# bin_us={},mean_rate={}", trace.bin_us, trace.mean_rate);
    s.push_str("bin_us,counts\n");
    for (i, &c) in trace.counts.iter().enumerate() {
        let _ = writeln!(s, "{},{c}", i as f64 * trace.bin_us);
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_rf_trace_csv(path: &Path) -> Result<RfTrace> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let meta = lines
        .next()
        .filter(|l| l.starts_with("# "))
        .ok_or_else(|| Error::format(0, "expected a `# key=value` metadata comment line"))?;
    let bin_us: f64 = parse_num(meta_field(meta, "bin_us", 0)?, "bin_us", 0)?;
    let mean_rate: f64 = parse_num(meta_field(meta, "mean_rate", 0)?, "mean_rate", 0)?;
    let mut offset = meta.len() as u64 + 1;
    let header = lines.next().ok_or_else(|| Error::format(offset, "missing header row"))?;
    if header != "bin_us,counts" {
        return Err(Error::format(offset, format!("unexpected header row `{header}`")));
    }
    offset += header.len() as u64 + 1;
    let mut counts = Vec::new();
    for line in lines {
        let (_, count) = line.split_once(',').ok_or_else(|| {
            Error::format(offset, format!("row {}: expected two columns", counts.len()))
        })?;
        counts.push(parse_num(count, "counts", offset)?);
        offset += line.len() as u64 + 1;
    }
    Ok(RfTrace { bin_us, counts, mean_rate })
}

/// Write any serializable report as pretty-printed structured text.
pub fn write_toml<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string_pretty(value)
        .map_err(|e| Error::config("report", e.to_string()))?;
    write_atomic(path, text.as_bytes())
}

pub fn read_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::config("report", e.to_string()))
}

fn scan_matrix_csv(scan: &ScanResult, pick: impl Fn(&ScanPoint) -> Option<f64>) -> String {
    let mut s = String::new();
    s.push_str("v1_mv/v2_mv");
    for v2 in &scan.v2_mv {
        let _ = write!(s, ",{v2}");
    }
    s.push('\n');
    for (i, v1) in scan.v1_mv.iter().enumerate() {
        let _ = write!(s, "{v1}");
        for j in 0..scan.v2_mv.len() {
            match pick(&scan.points[i][j]) {
                Some(v) => {
                    let _ = write!(s, ",{v}");
                }
                None => s.push(','), // flagged-inactive cell stays empty
            }
        }
        s.push('\n');
    }
    s
}

/// Export a scan as one CSV matrix per quantity (`v_rem`, `a_par`,
/// `a_perp`), rows over V1 and columns over V2. Returns the written paths.
pub fn write_scan_matrices(dir: &Path, scan: &ScanResult) -> Result<Vec<PathBuf>> {
    let quantities: [(&str, fn(&ScanPoint) -> Option<f64>); 3] = [
        ("v_rem", |p| p.v_rem),
        ("a_par", |p| p.a_par),
        ("a_perp", |p| p.a_perp),
    ];
    let mut written = Vec::new();
    for (name, pick) in quantities {
        let path = dir.join(format!("scan_{name}.csv"));
        write_atomic(&path, scan_matrix_csv(scan, pick).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
