//! Line-oriented JSON interchange format.
//!
//! ```text
//! {"type":"header","format":"agraph","version":1}
//! {"type":"node","id":"bert","labels":["Model"],"props":{"name":"BERT"}}
//! {"type":"edge","id":"e1","src":"a","dst":"b","label":"next","props":{}}
//! ```
//!
//! Export writes nodes by id, then edges by id, so output bytes depend only
//! on graph content.

use std::collections::BTreeSet;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{EdgeRecord, KnowledgeGraph, Mutation, NodeRecord, Props};

pub const FORMAT_NAME: &str = "agraph";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum InterchangeError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {message}")]
    Integrity { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Line {
    Header {
        format: String,
        version: u32,
    },
    Node {
        id: String,
        labels: Vec<String>,
        #[serde(default)]
        props: Props,
    },
    Edge {
        id: String,
        src: String,
        dst: String,
        label: String,
        #[serde(default)]
        props: Props,
    },
}

pub fn export<W: Write>(graph: &KnowledgeGraph, mut sink: W) -> io::Result<()> {
    let header = Line::Header {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
    };
    writeln!(sink, "{}", serde_json::to_string(&header)?)?;
    for n in graph.nodes() {
        let line = Line::Node {
            id: n.id.clone(),
            labels: n.labels.clone(),
            props: n.props.clone(),
        };
        writeln!(sink, "{}", serde_json::to_string(&line)?)?;
    }
    for e in graph.edges() {
        let line = Line::Edge {
            id: e.id.clone(),
            src: e.src.clone(),
            dst: e.dst.clone(),
            label: e.label.clone(),
            props: e.props.clone(),
        };
        writeln!(sink, "{}", serde_json::to_string(&line)?)?;
    }
    sink.flush()
}

pub fn export_to_string(graph: &KnowledgeGraph) -> String {
    let mut buf = Vec::new();
    export(graph, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn import<R: BufRead>(source: R) -> Result<KnowledgeGraph, InterchangeError> {
    let mut saw_header = false;
    let mut nodes: Vec<(usize, NodeRecord)> = Vec::new();
    let mut edges: Vec<(usize, EdgeRecord)> = Vec::new();
    let mut node_ids = BTreeSet::new();
    let mut edge_ids = BTreeSet::new();

    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Line = serde_json::from_str(&line).map_err(|e| InterchangeError::Parse {
            line: lineno,
            message: e.to_string(),
        })?;
        match parsed {
            Line::Header { format, version } => {
                if saw_header {
                    return Err(parse_err(lineno, "duplicate header line"));
                }
                if format != FORMAT_NAME || version != FORMAT_VERSION {
                    return Err(parse_err(lineno, &format!("unsupported format {format} v{version}")));
                }
                saw_header = true;
            }
            _ if !saw_header => return Err(parse_err(lineno, "missing header line")),
            Line::Node { id, labels, props } => {
                if !node_ids.insert(id.clone()) {
                    return Err(parse_err(lineno, &format!("duplicate node id '{id}'")));
                }
                nodes.push((lineno, NodeRecord { id, labels, props }));
            }
            Line::Edge {
                id,
                src,
                dst,
                label,
                props,
            } => {
                if !edge_ids.insert(id.clone()) {
                    return Err(parse_err(lineno, &format!("duplicate edge id '{id}'")));
                }
                edges.push((
                    lineno,
                    EdgeRecord {
                        id,
                        src,
                        dst,
                        label,
                        props,
                    },
                ));
            }
        }
    }
    if !saw_header {
        return Err(parse_err(1, "missing header line"));
    }
    for (lineno, e) in &edges {
        for end in [&e.src, &e.dst] {
            if !node_ids.contains(end) {
                return Err(InterchangeError::Integrity {
                    line: *lineno,
                    message: format!("edge '{}' references missing node '{end}'", e.id),
                });
            }
        }
    }

    let mut graph = KnowledgeGraph::new();
    let mut batch: Vec<Mutation> = Vec::with_capacity(nodes.len() + edges.len());
    let line_of: Vec<usize> = nodes
        .iter()
        .map(|(l, _)| *l)
        .chain(edges.iter().map(|(l, _)| *l))
        .collect();
    batch.extend(nodes.into_iter().map(|(_, n)| Mutation::CreateNode(n)));
    batch.extend(edges.into_iter().map(|(_, e)| Mutation::CreateEdge(e)));
    // Validation failures (empty ids, bad props) surface with their line.
    for (i, m) in batch.iter().enumerate() {
        if let Err(e) = graph.mutate(std::slice::from_ref(m)) {
            return Err(parse_err(line_of[i], &e.to_string()));
        }
    }
    graph.version = 0;
    Ok(graph)
}

pub fn import_str(text: &str) -> Result<KnowledgeGraph, InterchangeError> {
    import(text.as_bytes())
}

fn parse_err(line: usize, message: &str) -> InterchangeError {
    InterchangeError::Parse {
        line,
        message: message.to_string(),
    }
}
