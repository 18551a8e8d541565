//! Versioned plain-text formats for instances, certificates, and experiment
//! suites, plus the JSON run report. Floats are printed with Rust's shortest
//! round-trip representation, so emit-then-parse is exact and deterministic.

use serde::{Deserialize, Serialize};
use socfeas::dense::Mat;
use socfeas::ipm::SolveReport;
use socfeas::lorentz::{ConeStructure, StructureError};
use std::fmt::Write as _;
use thiserror::Error;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported format version {0}")]
    Version(u32),
    #[error("matrix has {found} entries, expected m x N = {want}")]
    EntryCount { found: usize, want: usize },
    #[error(transparent)]
    Structure(#[from] StructureError),
}

fn parse_err(line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Parse { line, msg: msg.into() }
}

fn parse_floats(line_no: usize, s: &str) -> Result<Vec<f64>, FormatError> {
    s.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| parse_err(line_no, format!("bad number `{t}`"))))
        .collect()
}

fn fmt_floats(vals: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v}").unwrap();
    }
    out
}

/// Split a `key: value` header line.
fn header<'a>(line: &'a str) -> Option<(&'a str, &'a str)> {
    let (k, v) = line.split_once(':')?;
    Some((k.trim(), v.trim()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Primal,
    Dual,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Primal => "primal",
            Side::Dual => "dual",
        }
    }
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "primal" => Some(Side::Primal),
            "dual" => Some(Side::Dual),
            _ => None,
        }
    }
}

/// A feasibility instance: the matrix, the cone, the generator parameters that
/// produced it, and an optional witness for the declared side.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceFile {
    pub tail_dims: Vec<usize>,
    pub a: Mat,
    pub kind: Option<Side>,
    pub margin: Option<f64>,
    pub seed: Option<u64>,
    pub certificate: Option<Vec<f64>>,
}

impl InstanceFile {
    pub fn cone(&self) -> Result<ConeStructure, StructureError> {
        ConeStructure::new(self.tail_dims.clone())
    }

    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut version = None;
        let mut m = None;
        let mut blocks: Option<Vec<usize>> = None;
        let mut kind = None;
        let mut margin = None;
        let mut seed = None;
        let mut entries: Vec<f64> = Vec::new();
        let mut certificate: Option<Vec<f64>> = None;
        #[derive(PartialEq)]
        enum Section {
            Header,
            Matrix,
            Certificate,
        }
        let mut section = Section::Header;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match section {
                Section::Header => {
                    let (k, v) =
                        header(line).ok_or_else(|| parse_err(line_no, "expected `key: value`"))?;
                    match k {
                        "version" => {
                            version = Some(
                                v.parse::<u32>()
                                    .map_err(|_| parse_err(line_no, "bad version"))?,
                            )
                        }
                        "m" => {
                            m = Some(v.parse::<usize>().map_err(|_| parse_err(line_no, "bad m"))?)
                        }
                        "blocks" => {
                            let dims = v
                                .split_whitespace()
                                .map(|t| t.parse::<usize>())
                                .collect::<Result<Vec<_>, _>>()
                                .map_err(|_| parse_err(line_no, "bad block dims"))?;
                            blocks = Some(dims);
                        }
                        "kind" => {
                            kind = Some(
                                Side::parse(v)
                                    .ok_or_else(|| parse_err(line_no, "kind must be primal|dual"))?,
                            )
                        }
                        "margin" => {
                            margin = Some(
                                v.parse::<f64>().map_err(|_| parse_err(line_no, "bad margin"))?,
                            )
                        }
                        "seed" => {
                            seed =
                                Some(v.parse::<u64>().map_err(|_| parse_err(line_no, "bad seed"))?)
                        }
                        "matrix" => section = Section::Matrix,
                        other => return Err(parse_err(line_no, format!("unknown key `{other}`"))),
                    }
                }
                Section::Matrix => {
                    if line == "certificate:" {
                        section = Section::Certificate;
                    } else {
                        entries.extend(parse_floats(line_no, line)?);
                    }
                }
                Section::Certificate => {
                    certificate
                        .get_or_insert_with(Vec::new)
                        .extend(parse_floats(line_no, line)?);
                }
            }
        }
        let version = version.ok_or_else(|| parse_err(0, "missing `version:`"))?;
        if version != FORMAT_VERSION {
            return Err(FormatError::Version(version));
        }
        let m = m.ok_or_else(|| parse_err(0, "missing `m:`"))?;
        let tail_dims = blocks.ok_or_else(|| parse_err(0, "missing `blocks:`"))?;
        let cone = ConeStructure::new(tail_dims.clone())?;
        let n = cone.ambient_dim();
        if entries.len() != m * n {
            return Err(FormatError::EntryCount { found: entries.len(), want: m * n });
        }
        let a = Mat::from_rows(m, n, entries);
        Ok(Self { tail_dims, a, kind, margin, seed, certificate })
    }

    pub fn emit(&self) -> String {
        let mut out = String::new();
        writeln!(out, "version: {FORMAT_VERSION}").unwrap();
        if let Some(kind) = self.kind {
            writeln!(out, "kind: {}", kind.as_str()).unwrap();
        }
        writeln!(out, "m: {}", self.a.rows()).unwrap();
        writeln!(
            out,
            "blocks: {}",
            self.tail_dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(" ")
        )
        .unwrap();
        if let Some(margin) = self.margin {
            writeln!(out, "margin: {margin}").unwrap();
        }
        if let Some(seed) = self.seed {
            writeln!(out, "seed: {seed}").unwrap();
        }
        writeln!(out, "matrix:").unwrap();
        for i in 0..self.a.rows() {
            writeln!(out, "{}", fmt_floats(self.a.row(i))).unwrap();
        }
        if let Some(cert) = &self.certificate {
            writeln!(out, "certificate:").unwrap();
            writeln!(out, "{}", fmt_floats(cert)).unwrap();
        }
        out
    }
}

/// A certificate detached from its instance: the side it claims, the forward
/// accuracy it was produced under (primal only), and the witness vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateFile {
    pub kind: Side,
    pub gamma: Option<f64>,
    pub values: Vec<f64>,
}

impl CertificateFile {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut version = None;
        let mut kind = None;
        let mut gamma = None;
        let mut values: Option<Vec<f64>> = None;
        let mut in_values = false;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if in_values {
                values.get_or_insert_with(Vec::new).extend(parse_floats(line_no, line)?);
                continue;
            }
            let (k, v) = header(line).ok_or_else(|| parse_err(line_no, "expected `key: value`"))?;
            match k {
                "version" => {
                    version =
                        Some(v.parse::<u32>().map_err(|_| parse_err(line_no, "bad version"))?)
                }
                "kind" => {
                    kind = Some(
                        Side::parse(v).ok_or_else(|| parse_err(line_no, "kind must be primal|dual"))?,
                    )
                }
                "gamma" => {
                    gamma = Some(v.parse::<f64>().map_err(|_| parse_err(line_no, "bad gamma"))?)
                }
                "values" => in_values = true,
                other => return Err(parse_err(line_no, format!("unknown key `{other}`"))),
            }
        }
        let version = version.ok_or_else(|| parse_err(0, "missing `version:`"))?;
        if version != FORMAT_VERSION {
            return Err(FormatError::Version(version));
        }
        let kind = kind.ok_or_else(|| parse_err(0, "missing `kind:`"))?;
        let values = values.ok_or_else(|| parse_err(0, "missing `values:`"))?;
        Ok(Self { kind, gamma, values })
    }

    pub fn emit(&self) -> String {
        let mut out = String::new();
        writeln!(out, "version: {FORMAT_VERSION}").unwrap();
        writeln!(out, "kind: {}", self.kind.as_str()).unwrap();
        if let Some(g) = self.gamma {
            writeln!(out, "gamma: {g}").unwrap();
        }
        writeln!(out, "values:").unwrap();
        writeln!(out, "{}", fmt_floats(&self.values)).unwrap();
        out
    }
}

/// One line of an experiment suite: a generator call fanned out over seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SuiteEntry {
    pub kind: Side,
    pub m: usize,
    pub tail_dims: Vec<usize>,
    pub margin: f64,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    pub gamma: f64,
    pub entries: Vec<SuiteEntry>,
}

impl SuiteSpec {
    /// Format: headers `version:` and `gamma:`, then one entry per line:
    /// `kind m blocks margin seeds` with comma-separated blocks and seeds.
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        let mut version = None;
        let mut gamma = None;
        let mut entries = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((k, v)) = header(line) {
                match k {
                    "version" => {
                        version =
                            Some(v.parse::<u32>().map_err(|_| parse_err(line_no, "bad version"))?)
                    }
                    "gamma" => {
                        gamma =
                            Some(v.parse::<f64>().map_err(|_| parse_err(line_no, "bad gamma"))?)
                    }
                    other => return Err(parse_err(line_no, format!("unknown key `{other}`"))),
                }
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(parse_err(line_no, "expected `kind m blocks margin seeds`"));
            }
            let kind = Side::parse(fields[0])
                .ok_or_else(|| parse_err(line_no, "kind must be primal|dual"))?;
            let m = fields[1].parse().map_err(|_| parse_err(line_no, "bad m"))?;
            let tail_dims = fields[2]
                .split(',')
                .map(|t| t.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| parse_err(line_no, "bad block dims"))?;
            let margin = fields[3].parse().map_err(|_| parse_err(line_no, "bad margin"))?;
            let seeds = fields[4]
                .split(',')
                .map(|t| t.parse::<u64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| parse_err(line_no, "bad seeds"))?;
            entries.push(SuiteEntry { kind, m, tail_dims, margin, seeds });
        }
        let version = version.ok_or_else(|| parse_err(0, "missing `version:`"))?;
        if version != FORMAT_VERSION {
            return Err(FormatError::Version(version));
        }
        let gamma = gamma.ok_or_else(|| parse_err(0, "missing `gamma:`"))?;
        Ok(Self { gamma, entries })
    }
}

/// Condition measurements attached to a run on request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub rho_primal: f64,
    pub rho_dual: f64,
    pub matrix_norm: f64,
    pub condition: f64,
}

/// The JSON document `solve` prints: config echo, optional condition bracket
/// and timing, then the full solver report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub version: u32,
    pub instance: String,
    pub gamma: f64,
    pub schedule_constant: f64,
    pub max_iterations: usize,
    pub fixed_precision_bits: Option<u32>,
    pub condition: Option<ConditionSummary>,
    pub wall_clock_seconds: Option<f64>,
    #[serde(flatten)]
    pub solve: SolveReport,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_instance() -> InstanceFile {
        InstanceFile {
            tail_dims: vec![1, 2],
            a: Mat::from_rows(2, 5, vec![0.5, -1.25, 3.0, 0.1, -0.7, 2.0, 0.0, 1.0 / 3.0, -9.5, 4.0]),
            kind: Some(Side::Primal),
            margin: Some(0.45),
            seed: Some(17),
            certificate: Some(vec![1.5, 0.25, 2.0, 1.0, -0.5]),
        }
    }

    #[test]
    fn instance_round_trip_is_exact() {
        let inst = sample_instance();
        let text = inst.emit();
        let back = InstanceFile::parse(&text).unwrap();
        assert_eq!(inst, back);
        // Emitting again yields identical bytes.
        assert_eq!(text, back.emit());
    }

    #[test]
    fn instance_entry_count_is_enforced() {
        let mut inst = sample_instance();
        inst.a = Mat::from_rows(2, 5, vec![0.0; 10]);
        let mut text = inst.emit();
        text = text.replace("matrix:\n0 0 0 0 0\n", "matrix:\n0 0 0 0\n");
        match InstanceFile::parse(&text) {
            Err(FormatError::EntryCount { found: 9, want: 10 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn unknown_version_is_rejected() {
        let text = sample_instance().emit().replace("version: 1", "version: 9");
        assert!(matches!(InstanceFile::parse(&text), Err(FormatError::Version(9))));
    }

    #[test]
    fn certificate_round_trip() {
        let cert = CertificateFile {
            kind: Side::Dual,
            gamma: None,
            values: vec![0.1, -0.2, 1e-17],
        };
        let text = cert.emit();
        assert_eq!(CertificateFile::parse(&text).unwrap(), cert);
    }

    #[test]
    fn suite_parses_entries_and_headers() {
        let text = "version: 1\ngamma: 0.1\n# comment\nprimal 3 2,2 0.5 1,2,3\ndual 2 3 0.4 7\n";
        let suite = SuiteSpec::parse(text).unwrap();
        assert_eq!(suite.gamma, 0.1);
        assert_eq!(suite.entries.len(), 2);
        assert_eq!(suite.entries[0].seeds, vec![1, 2, 3]);
        assert_eq!(suite.entries[1].tail_dims, vec![3]);
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let mut text = String::from("# generated\n\n");
        text.push_str(&sample_instance().emit());
        assert_eq!(InstanceFile::parse(&text).unwrap(), sample_instance());
    }
}
