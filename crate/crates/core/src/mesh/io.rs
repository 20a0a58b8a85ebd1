//! Plain-text mesh interchange format.
//!
//! ```text
//! # comment lines and blank lines are ignored
//! tmc-mesh 1
//! nodes <count>
//! <id> <x> <y> <z>                      one line per node, ids 0..count in order
//! elements <count>
//! <id> <tag> 20 <n0> ... <n19>          tag is S<body> or M<region>
//! node_set <name> <count>
//! <id> ...                              whitespace separated, may span lines
//! side_set <name> <count>
//! <element> <face> ...                  pairs, may span lines
//! end
//! ```
//!
//! Node ordering inside an element record is the canonical Q2S order of
//! [`crate::shape`]. Any keyword other than the ones above is rejected.

use std::fmt::Write as _;
use std::path::Path;

use super::{validate_mesh, DomainTag, Hex20Element, Mesh, Node, Side};
use crate::error::MeshError;

pub const MAGIC: &str = "tmc-mesh";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFormat {
    #[default]
    #[serde(alias = "tmc", alias = "tmc-mesh")]
    Text,
}

impl std::str::FromStr for MeshFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "tmc" | "tmc-mesh" => Ok(MeshFormat::Text),
            other => Err(format!("unknown mesh format `{other}`")),
        }
    }
}

/// Serializes a mesh. Floats use the shortest representation that parses
/// back to the identical value.
pub fn write_mesh(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{MAGIC} {VERSION}");
    let _ = writeln!(s, "nodes {}", mesh.nodes.len());
    for n in &mesh.nodes {
        let _ = writeln!(s, "{} {:?} {:?} {:?}", n.id, n.x[0], n.x[1], n.x[2]);
    }
    let _ = writeln!(s, "elements {}", mesh.elements.len());
    for e in &mesh.elements {
        let _ = write!(s, "{} {} 20", e.id, e.tag);
        for n in &e.nodes {
            let _ = write!(s, " {n}");
        }
        s.push('\n');
    }
    for (name, ids) in &mesh.node_sets {
        let _ = writeln!(s, "node_set {name} {}", ids.len());
        for chunk in ids.chunks(16) {
            let line: Vec<String> = chunk.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
    }
    for (name, sides) in &mesh.side_sets {
        let _ = writeln!(s, "side_set {name} {}", sides.len());
        for chunk in sides.chunks(8) {
            let line: Vec<String> = chunk.iter().map(|sd| format!("{} {}", sd.element, sd.face)).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
    }
    s.push_str("end\n");
    s
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    /// Next non-empty, non-comment line split into tokens.
    fn next_record(&mut self) -> Option<Vec<&'a str>> {
        for (i, raw) in self.inner.by_ref() {
            let content = raw.split('#').next().unwrap_or("").trim();
            if !content.is_empty() {
                self.line = i + 1;
                return Some(content.split_whitespace().collect());
            }
        }
        None
    }

    fn err(&self, message: impl Into<String>) -> MeshError {
        MeshError::Parse {
            line: self.line,
            message: message.into(),
        }
    }

    fn expect_record(&mut self, what: &str) -> Result<Vec<&'a str>, MeshError> {
        self.next_record()
            .ok_or_else(|| self.err(format!("unexpected end of file, expected {what}")))
    }

    /// Reads `count` tokens, possibly spanning several lines.
    fn tokens(&mut self, count: usize, what: &str) -> Result<Vec<&'a str>, MeshError> {
        let mut out = Vec::with_capacity(count);
        while out.len() < count {
            let rec = self.expect_record(what)?;
            if out.len() + rec.len() > count {
                return Err(self.err(format!("too many values in {what}")));
            }
            out.extend(rec);
        }
        Ok(out)
    }
}

fn parse_num<T: std::str::FromStr>(lines: &Lines, tok: &str, what: &str) -> Result<T, MeshError> {
    tok.parse().map_err(|_| lines.err(format!("invalid {what} `{tok}`")))
}

/// Parses the text format and validates the result.
pub fn parse_mesh(text: &str) -> Result<Mesh, MeshError> {
    let mut lines = Lines::new(text);
    let header = lines.expect_record("header")?;
    if header.len() != 2 || header[0] != MAGIC {
        return Err(lines.err(format!("expected `{MAGIC} {VERSION}` header")));
    }
    let version: u32 = parse_num(&lines, header[1], "version")?;
    if version != VERSION {
        return Err(lines.err(format!("unsupported format version {version}")));
    }

    let mut mesh = Mesh::default();
    let mut seen_end = false;
    while let Some(rec) = lines.next_record() {
        match rec[0] {
            "nodes" => {
                if rec.len() != 2 {
                    return Err(lines.err("expected `nodes <count>`"));
                }
                let count: usize = parse_num(&lines, rec[1], "node count")?;
                for _ in 0..count {
                    let r = lines.expect_record("node record")?;
                    if r.len() != 4 {
                        return Err(lines.err(format!("node record needs 4 fields, found {}", r.len())));
                    }
                    let id: usize = parse_num(&lines, r[0], "node id")?;
                    if id != mesh.nodes.len() {
                        return Err(lines.err(format!("node ids must be dense and ordered: expected {}, found {id}", mesh.nodes.len())));
                    }
                    let mut x = [0.0; 3];
                    for k in 0..3 {
                        x[k] = parse_num(&lines, r[k + 1], "coordinate")?;
                    }
                    mesh.nodes.push(Node { id, x });
                }
            }
            "elements" => {
                if rec.len() != 2 {
                    return Err(lines.err("expected `elements <count>`"));
                }
                let count: usize = parse_num(&lines, rec[1], "element count")?;
                for _ in 0..count {
                    let r = lines.expect_record("element record")?;
                    if r.len() < 3 {
                        return Err(lines.err("element record needs `id tag count nodes...`"));
                    }
                    let id: usize = parse_num(&lines, r[0], "element id")?;
                    if id != mesh.elements.len() {
                        return Err(lines.err(format!("element ids must be dense and ordered: expected {}, found {id}", mesh.elements.len())));
                    }
                    let tag: DomainTag = r[1].parse().map_err(|e: String| lines.err(e))?;
                    let n: usize = parse_num(&lines, r[2], "node count")?;
                    if n != 20 {
                        return Err(MeshError::UnsupportedElementType { line: lines.line, nodes: n });
                    }
                    if r.len() != 3 + n {
                        return Err(lines.err(format!("element record declares {n} nodes but lists {}", r.len() - 3)));
                    }
                    let mut nodes = [0usize; 20];
                    for (slot, tok) in nodes.iter_mut().zip(&r[3..]) {
                        *slot = parse_num(&lines, tok, "node id")?;
                    }
                    mesh.elements.push(Hex20Element { id, nodes, tag });
                }
            }
            "node_set" => {
                if rec.len() != 3 {
                    return Err(lines.err("expected `node_set <name> <count>`"));
                }
                let count: usize = parse_num(&lines, rec[2], "set size")?;
                let name = rec[1].to_string();
                let toks = lines.tokens(count, "node set")?;
                let ids = toks
                    .iter()
                    .map(|t| parse_num(&lines, t, "node id"))
                    .collect::<Result<Vec<usize>, _>>()?;
                mesh.node_sets.insert(name, ids);
            }
            "side_set" => {
                if rec.len() != 3 {
                    return Err(lines.err("expected `side_set <name> <count>`"));
                }
                let count: usize = parse_num(&lines, rec[2], "set size")?;
                let name = rec[1].to_string();
                let toks = lines.tokens(2 * count, "side set")?;
                let mut sides = Vec::with_capacity(count);
                for pair in toks.chunks(2) {
                    sides.push(Side {
                        element: parse_num(&lines, pair[0], "element id")?,
                        face: parse_num(&lines, pair[1], "face index")?,
                    });
                }
                mesh.side_sets.insert(name, sides);
            }
            "end" => {
                seen_end = true;
                break;
            }
            other => return Err(lines.err(format!("unknown field `{other}`"))),
        }
    }
    if !seen_end {
        return Err(lines.err("missing `end`"));
    }
    if lines.next_record().is_some() {
        return Err(lines.err("content after `end`"));
    }

    let report = validate_mesh(&mesh);
    if !report.is_valid() {
        return Err(MeshError::Invalid(report.failures.join("; ")));
    }
    Ok(mesh)
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<Mesh, MeshError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    match format {
        MeshFormat::Text => parse_mesh(&text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_box_self_contact, BoxSelfContactSpec};

    #[test]
    fn round_trip_scenario() {
        let spec = BoxSelfContactSpec {
            nx: 4,
            ..Default::default()
        };
        let mesh = build_box_self_contact(&spec).unwrap();
        let back = parse_mesh(&write_mesh(&mesh)).unwrap();
        assert_eq!(mesh, back);
    }

    #[test]
    fn rejects_21_node_records() {
        let spec = BoxSelfContactSpec {
            nx: 1,
            ny: 1,
            ..Default::default()
        };
        let text = write_mesh(&build_box_self_contact(&spec).unwrap());
        let bad = text.replacen(" S0 20 ", " S0 21 ", 1);
        let err = parse_mesh(&bad).unwrap_err();
        assert!(err.to_string().contains("unsupported element type"), "{err}");
    }

    #[test]
    fn rejects_unknown_fields() {
        let text = "tmc-mesh 1\nnodes 0\nelements 0\nmaterials 3\nend\n";
        let err = parse_mesh(text).unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 4, .. }), "{err}");
    }

    #[test]
    fn reports_line_numbers() {
        let text = "tmc-mesh 1\n# nodes follow\nnodes 1\n0 0.0 zero 0.0\nend\n";
        match parse_mesh(text).unwrap_err() {
            MeshError::Parse { line, message } => {
                assert_eq!(line, 4);
                assert!(message.contains("coordinate"));
            }
            other => panic!("{other}"),
        }
    }
}
