//! Artifact emission: CSV, JSON, and a sha256 manifest.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use fraclat_core::counterexamples::Certificate;
use fraclat_core::lattice::{LatticeFunction, Shape, TorusFunction};

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Comma separated table with a mandatory header and `\n` line endings.
#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for r in &self.rows {
            out.push_str(&r.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn ints(xs: &[i64]) -> Vec<String> {
    xs.iter().map(|x| x.to_string()).collect()
}

/// Pretty JSON with a trailing newline. Map keys are sorted.
pub fn render_json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("artifact serializes");
    s.push('\n');
    s
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub name: String,
    pub sha256: String,
    pub bytes: usize,
}

pub const MANIFEST: &str = "manifest.sha256";

/// Writes files into one directory and remembers their hashes.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    written: Vec<Artifact>,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> io::Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.written.retain(|a| a.name != name);
        self.written.push(Artifact {
            name: name.to_string(),
            sha256: sha256_hex(contents.as_bytes()),
            bytes: contents.len(),
        });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Csv) -> io::Result<()> {
        self.write(name, &table.render())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, v: &T) -> io::Result<()> {
        self.write(name, &render_json(v))
    }

    pub fn names(&self) -> Vec<String> {
        self.written.iter().map(|a| a.name.clone()).collect()
    }

    /// Write `manifest.sha256` (`sha256sum` format, one line per file).
    pub fn finish(self) -> io::Result<Vec<Artifact>> {
        let mut text = String::new();
        for a in &self.written {
            text.push_str(&format!("{}  {}\n", a.sha256, a.name));
        }
        fs::write(self.dir.join(MANIFEST), text)?;
        Ok(self.written)
    }
}

/// Parse a manifest back into `(hash, name)` pairs.
pub fn read_manifest(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once("  ").map(|(h, n)| (h.to_string(), n.to_string())))
        .collect()
}

pub fn torus_json(v: &TorusFunction) -> Value {
    json!({
        "d": v.d(),
        "N": v.n_half(),
        "h": v.h(),
        "values": v.values(),
    })
}

fn support_rows<'a>(map: impl IntoIterator<Item = (&'a Vec<i64>, &'a f64)>) -> Vec<Value> {
    map.into_iter()
        .map(|(j, v)| {
            let mut row: Vec<Value> = j.iter().map(|x| json!(x)).collect();
            row.push(json!(v));
            Value::Array(row)
        })
        .collect()
}

pub fn lattice_json(u: &LatticeFunction) -> Value {
    let p = u.params();
    let (support, profile) = match u.shape() {
        Shape::FinitelySupported(m) => (support_rows(m), Value::Null),
        Shape::StepProfile {
            axis,
            cutoff,
            left,
            right,
            perturbation,
        } => (
            support_rows(perturbation),
            json!({"axis": axis + 1, "cutoff": cutoff, "left_value": left, "right_value": right}),
        ),
    };
    json!({"d": p.d(), "h": p.h(), "support": support, "profile": profile})
}

pub fn certificate_json(c: &Certificate, claim: &str) -> Value {
    let sets: serde_json::Map<String, Value> = c.sets.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
    let checks: Vec<Value> = c.checks.iter().map(|(p, v)| json!({"point": p, "value": v})).collect();
    json!({
        "residual_sup": c.residual_sup,
        "u_norm": c.u_norm,
        "potential_bound": c.potential_bound,
        "tolerance": c.tolerance,
        "params": {"s": c.params.s(), "h": c.params.h(), "d": c.params.d()},
        "sets": sets,
        "checks": checks,
        "accepted": c.accepted,
        "notes": c.notes,
        "claim": claim,
    })
}
