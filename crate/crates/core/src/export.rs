//! File formats for networks: edge-list CSV, centrality CSV and GraphML.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("unknown graph format `{0}` (expected edges-csv, centrality-csv or graphml)")]
    UnknownFormat(String),
    #[error("invalid GraphML: {0}")]
    GraphMl(String),
    #[error(transparent)]
    Xml(#[from] quick_xml::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFormat {
    /// `source,target,weight`
    EdgesCsv,
    /// `node,degree,closeness`, with a `mode` column for two-mode graphs
    CentralityCsv,
    GraphMl,
}

impl FromStr for GraphFormat {
    type Err = ExportError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "edges-csv" | "edges" | "csv" => Ok(GraphFormat::EdgesCsv),
            "centrality-csv" | "centrality" => Ok(GraphFormat::CentralityCsv),
            "graphml" | "xml" => Ok(GraphFormat::GraphMl),
            _ => Err(ExportError::UnknownFormat(s.to_string())),
        }
    }
}

impl fmt::Display for GraphFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GraphFormat::EdgesCsv => "edges-csv",
            GraphFormat::CentralityCsv => "centrality-csv",
            GraphFormat::GraphMl => "graphml",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportNode {
    pub label: String,
    /// `topic` or `term` in two-mode networks.
    pub mode: Option<String>,
    pub degree: Option<f64>,
    pub closeness: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportEdge {
    pub source: usize,
    pub target: usize,
    pub weight: f64,
}

/// Format-neutral view of a network with centrality node attributes.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkExport {
    pub nodes: Vec<ExportNode>,
    pub edges: Vec<ExportEdge>,
}

impl NetworkExport {
    pub fn write<W: Write>(&self, format: GraphFormat, out: W) -> Result<(), ExportError> {
        match format {
            GraphFormat::EdgesCsv => self.write_edges_csv(out),
            GraphFormat::CentralityCsv => self.write_centrality_csv(out),
            GraphFormat::GraphMl => self.write_graphml(out),
        }
    }

    pub fn to_string(&self, format: GraphFormat) -> Result<String, ExportError> {
        let mut buf = Vec::new();
        self.write(format, &mut buf)?;
        Ok(String::from_utf8(buf).expect("writers emit UTF-8"))
    }

    fn two_mode(&self) -> bool {
        self.nodes.iter().any(|n| n.mode.is_some())
    }

    fn write_edges_csv<W: Write>(&self, out: W) -> Result<(), ExportError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["source", "target", "weight"])?;
        for e in &self.edges {
            w.write_record([
                self.nodes[e.source].label.as_str(),
                self.nodes[e.target].label.as_str(),
                &e.weight.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    fn write_centrality_csv<W: Write>(&self, out: W) -> Result<(), ExportError> {
        let mut w = csv::Writer::from_writer(out);
        let two_mode = self.two_mode();
        if two_mode {
            w.write_record(["node", "mode", "degree", "closeness"])?;
        } else {
            w.write_record(["node", "degree", "closeness"])?;
        }
        let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for n in &self.nodes {
            if two_mode {
                w.write_record([
                    n.label.clone(),
                    n.mode.clone().unwrap_or_default(),
                    num(n.degree),
                    num(n.closeness),
                ])?;
            } else {
                w.write_record([n.label.clone(), num(n.degree), num(n.closeness)])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    fn write_graphml<W: Write>(&self, mut out: W) -> Result<(), ExportError> {
        writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#)?;
        writeln!(out, r#"<graphml xmlns="http://graphml.graphdrawing.org/xmlns">"#)?;
        writeln!(
            out,
            r#"  <key id="label" for="node" attr.name="label" attr.type="string"/>"#
        )?;
        writeln!(
            out,
            r#"  <key id="mode" for="node" attr.name="mode" attr.type="string"/>"#
        )?;
        writeln!(
            out,
            r#"  <key id="degree" for="node" attr.name="degree" attr.type="double"/>"#
        )?;
        writeln!(
            out,
            r#"  <key id="closeness" for="node" attr.name="closeness" attr.type="double"/>"#
        )?;
        writeln!(
            out,
            r#"  <key id="weight" for="edge" attr.name="weight" attr.type="double"/>"#
        )?;
        writeln!(out, r#"  <graph id="G" edgedefault="undirected">"#)?;
        for (i, n) in self.nodes.iter().enumerate() {
            write!(
                out,
                r#"    <node id="n{i}"><data key="label">{}</data>"#,
                escape(&n.label)
            )?;
            if let Some(mode) = &n.mode {
                write!(out, r#"<data key="mode">{}</data>"#, escape(mode))?;
            }
            if let Some(d) = n.degree {
                write!(out, r#"<data key="degree">{d}</data>"#)?;
            }
            if let Some(c) = n.closeness {
                write!(out, r#"<data key="closeness">{c}</data>"#)?;
            }
            writeln!(out, "</node>")?;
        }
        for e in &self.edges {
            writeln!(
                out,
                r#"    <edge source="n{}" target="n{}"><data key="weight">{}</data></edge>"#,
                e.source, e.target, e.weight
            )?;
        }
        writeln!(out, "  </graph>")?;
        writeln!(out, "</graphml>")?;
        Ok(())
    }

    /// Parse GraphML produced by [`NetworkExport::write`].
    pub fn read_graphml<R: BufRead>(input: R) -> Result<Self, ExportError> {
        let mut reader = Reader::from_reader(input);
        let mut buf = Vec::new();
        let mut net = NetworkExport::default();
        let mut ids: HashMap<String, usize> = HashMap::new();
        let mut in_edge = false;
        let mut current_key: Option<String> = None;
        let mut in_node = false;

        loop {
            match reader.read_event_into(&mut buf)? {
                Event::Eof => break,
                Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"node" => {
                    ids.insert(attr(&e, "id")?, net.nodes.len());
                    net.nodes.push(ExportNode {
                        label: String::new(),
                        mode: None,
                        degree: None,
                        closeness: None,
                    });
                    in_node = true;
                }
                Event::End(e) if e.name().as_ref() == b"node" => in_node = false,
                Event::Start(e) | Event::Empty(e) if e.name().as_ref() == b"edge" => {
                    net.edges.push(ExportEdge {
                        source: position(&ids, &attr(&e, "source")?)?,
                        target: position(&ids, &attr(&e, "target")?)?,
                        weight: 1.0,
                    });
                    in_edge = true;
                }
                Event::End(e) if e.name().as_ref() == b"edge" => in_edge = false,
                Event::Start(e) if e.name().as_ref() == b"data" => current_key = Some(attr(&e, "key")?),
                Event::End(e) if e.name().as_ref() == b"data" => current_key = None,
                Event::Text(t) => {
                    let Some(key) = current_key.as_deref() else {
                        continue;
                    };
                    let text = t.unescape()?.into_owned();
                    if in_node {
                        let node = net.nodes.last_mut().expect("inside node");
                        match key {
                            "label" => node.label = text,
                            "mode" => node.mode = Some(text),
                            "degree" => node.degree = Some(parse_f64(&text)?),
                            "closeness" => node.closeness = Some(parse_f64(&text)?),
                            _ => {}
                        }
                    } else if in_edge && key == "weight" {
                        net.edges.last_mut().expect("inside edge").weight = parse_f64(&text)?;
                    }
                }
                _ => {}
            }
            buf.clear();
        }
        Ok(net)
    }
}

/// Parse an edge-list CSV back into `(source, target, weight)` triples.
pub fn read_edges_csv<R: std::io::Read>(input: R) -> Result<Vec<(String, String, f64)>, ExportError> {
    let mut r = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let weight = parse_f64(rec.get(2).unwrap_or_default())?;
        out.push((
            rec.get(0).unwrap_or_default().to_string(),
            rec.get(1).unwrap_or_default().to_string(),
            weight,
        ));
    }
    Ok(out)
}

fn escape(s: &str) -> String {
    quick_xml::escape::escape(s).into_owned()
}

fn attr(e: &BytesStart<'_>, name: &str) -> Result<String, ExportError> {
    let a = e
        .try_get_attribute(name)
        .map_err(|err| ExportError::GraphMl(err.to_string()))?
        .ok_or_else(|| ExportError::GraphMl(format!("missing attribute `{name}`")))?;
    Ok(a.unescape_value()?.into_owned())
}

fn position(ids: &HashMap<String, usize>, id: &str) -> Result<usize, ExportError> {
    ids.get(id)
        .copied()
        .ok_or_else(|| ExportError::GraphMl(format!("edge references unknown node `{id}`")))
}

fn parse_f64(s: &str) -> Result<f64, ExportError> {
    s.trim()
        .parse()
        .map_err(|_| ExportError::GraphMl(format!("not a number: `{s}`")))
}
