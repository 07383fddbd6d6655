use std::fmt;
use std::hash::Hasher;

use fnv::FnvHasher;

/// One trace line: `time node kind ptype name face extra`, tab-separated.
/// Empty fields print as `-`; `extra` is `key=value` pairs joined by commas.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub time: u64,
    pub node: String,
    pub kind: &'static str,
    pub ptype: &'static str,
    pub name: String,
    pub face: Option<String>,
    pub extra: Vec<(String, String)>,
}

impl TraceRecord {
    pub fn new(time: u64, node: impl Into<String>, kind: &'static str) -> Self {
        TraceRecord {
            time,
            node: node.into(),
            kind,
            ptype: "",
            name: String::new(),
            face: None,
            extra: Vec::new(),
        }
    }

    pub fn packet(mut self, ptype: &'static str, name: impl Into<String>) -> Self {
        self.ptype = ptype;
        self.name = name.into();
        self
    }

    pub fn face(mut self, face: impl fmt::Display) -> Self {
        self.face = Some(face.to_string());
        self
    }

    pub fn with(mut self, key: &str, value: impl fmt::Display) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.extra
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Parses a line produced by `Display`.
    pub fn parse_line(line: &str) -> Option<ParsedRecord> {
        let fields: Vec<&str> = line.split('\t').collect();
        let [time, node, kind, ptype, name, face, extra] = fields.as_slice() else {
            return None;
        };
        let opt = |s: &str| (s != "-").then(|| s.to_string());
        Some(ParsedRecord {
            time: time.parse().ok()?,
            node: node.to_string(),
            kind: kind.to_string(),
            ptype: opt(ptype),
            name: opt(name),
            face: opt(face),
            extra: if *extra == "-" {
                Vec::new()
            } else {
                extra
                    .split(',')
                    .map(|kv| kv.split_once('=').map(|(k, v)| (k.to_string(), v.to_string())))
                    .collect::<Option<_>>()?
            },
        })
    }
}

/// Owned form of a parsed trace line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedRecord {
    pub time: u64,
    pub node: String,
    pub kind: String,
    pub ptype: Option<String>,
    pub name: Option<String>,
    pub face: Option<String>,
    pub extra: Vec<(String, String)>,
}

fn dash(s: &str) -> &str {
    if s.is_empty() {
        "-"
    } else {
        s
    }
}

impl fmt::Display for TraceRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let extra = self
            .extra
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",");
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.time,
            dash(&self.node),
            dash(self.kind),
            dash(self.ptype),
            dash(&self.name),
            dash(self.face.as_deref().unwrap_or("")),
            dash(&extra)
        )
    }
}

/// Renders the trace, one record per line with a trailing newline.
pub fn render(trace: &[TraceRecord]) -> String {
    let mut out = String::new();
    for record in trace {
        out.push_str(&record.to_string());
        out.push('\n');
    }
    out
}

/// 64-bit FNV-1a digest of the rendered trace.
pub fn trace_digest(trace: &[TraceRecord]) -> u64 {
    let mut hasher = FnvHasher::default();
    for record in trace {
        hasher.write(record.to_string().as_bytes());
        hasher.write(b"\n");
    }
    hasher.finish()
}
