//! Instance file formats.
//!
//! Text format (UTF-8, `#`-comments and blank lines ignored):
//!
//! ```text
//! n m [bipartite U_size]
//! u v w                  (m edge lines)
//! cap v b_v              (optional capacity lines, unlisted vertices get 1)
//! cut S: ids / T: ids    (optional terminal line)
//! ```
//!
//! A JSON mirror with identical field names is accepted and produced for
//! `.json` paths (or content starting with `{`).

use crate::error::{Error, Result};
use crate::graph::{CutInstance, WeightedGraph};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Parsed instance file: a graph plus optional terminal sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    pub n: usize,
    pub m: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bipartite_u_size: Option<usize>,
    /// Edge rows `[u, v, w]` in canonical order.
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub caps: Option<Vec<(usize, u64)>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut: Option<CutBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutBlock {
    pub s: Vec<usize>,
    pub t: Vec<usize>,
}

impl InstanceFile {
    pub fn from_graph(g: &WeightedGraph, cut: Option<(&[usize], &[usize])>) -> Self {
        let edges = g
            .edges()
            .iter()
            .zip(g.weights())
            .map(|(&(u, v), &w)| (u, v, w))
            .collect();
        let caps = g.capacities().map(|caps| {
            caps.iter()
                .enumerate()
                .filter(|(_, &b)| b != 1)
                .map(|(v, &b)| (v, b))
                .collect::<Vec<_>>()
        });
        InstanceFile {
            n: g.n(),
            m: g.m(),
            bipartite_u_size: g.bipartite_u_size(),
            edges,
            caps: caps.filter(|c: &Vec<_>| !c.is_empty()),
            cut: cut.map(|(s, t)| CutBlock {
                s: s.to_vec(),
                t: t.to_vec(),
            }),
        }
    }

    pub fn to_graph(&self) -> Result<WeightedGraph> {
        let (edges, weights): (Vec<_>, Vec<_>) =
            self.edges.iter().map(|&(u, v, w)| ((u, v), w)).unzip();
        let capacities = self.caps.as_ref().map(|caps| {
            let mut full = vec![1u64; self.n];
            for &(v, b) in caps {
                if v < self.n {
                    full[v] = b;
                }
            }
            full
        });
        WeightedGraph::with_structure(self.n, edges, weights, self.bipartite_u_size, capacities)
    }

    pub fn to_cut_instance(&self) -> Result<CutInstance> {
        let g = self.to_graph()?;
        let cut = self.cut.as_ref().ok_or_else(|| {
            Error::InvalidParameter("instance file has no `cut` block".into())
        })?;
        CutInstance::new(g, cut.s.clone(), cut.t.clone())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match self.bipartite_u_size {
            Some(us) => out.push_str(&format!("{} {} bipartite {}\n", self.n, self.m, us)),
            None => out.push_str(&format!("{} {}\n", self.n, self.m)),
        }
        for &(u, v, w) in &self.edges {
            out.push_str(&format!("{u} {v} {w:?}\n"));
        }
        if let Some(caps) = &self.caps {
            for &(v, b) in caps {
                out.push_str(&format!("cap {v} {b}\n"));
            }
        }
        if let Some(cut) = &self.cut {
            let s: Vec<String> = cut.s.iter().map(|v| v.to_string()).collect();
            let t: Vec<String> = cut.t.iter().map(|v| v.to_string()).collect();
            out.push_str(&format!("cut S: {} / T: {}\n", s.join(" "), t.join(" ")));
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut header: Option<(usize, usize, Option<usize>)> = None;
        let mut edges = Vec::new();
        let mut caps: Vec<(usize, u64)> = Vec::new();
        let mut cut: Option<CutBlock> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let parse_usize = |tok: &str| -> Result<usize> {
                tok.parse().map_err(|_| Error::Parse {
                    line,
                    msg: format!("expected integer, got `{tok}`"),
                })
            };
            if header.is_none() {
                let toks: Vec<&str> = s.split_whitespace().collect();
                if toks.len() != 2 && !(toks.len() == 4 && toks[2] == "bipartite") {
                    return Err(Error::Parse {
                        line,
                        msg: "header must be `n m` or `n m bipartite U_size`".into(),
                    });
                }
                let n = parse_usize(toks[0])?;
                let m = parse_usize(toks[1])?;
                let us = if toks.len() == 4 {
                    Some(parse_usize(toks[3])?)
                } else {
                    None
                };
                header = Some((n, m, us));
            } else if let Some(rest) = s.strip_prefix("cap ") {
                let toks: Vec<&str> = rest.split_whitespace().collect();
                if toks.len() != 2 {
                    return Err(Error::Parse {
                        line,
                        msg: "capacity line must be `cap v b`".into(),
                    });
                }
                let v = parse_usize(toks[0])?;
                let b = toks[1].parse::<u64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad capacity `{}`", toks[1]),
                })?;
                caps.push((v, b));
            } else if let Some(rest) = s.strip_prefix("cut ") {
                let parts: Vec<&str> = rest.split('/').collect();
                if parts.len() != 2 {
                    return Err(Error::Parse {
                        line,
                        msg: "cut line must be `cut S: ids / T: ids`".into(),
                    });
                }
                let parse_side = |part: &str, tag: &str| -> Result<Vec<usize>> {
                    let body = part.trim().strip_prefix(tag).ok_or_else(|| Error::Parse {
                        line,
                        msg: format!("cut side must start with `{tag}`"),
                    })?;
                    body.split_whitespace().map(parse_usize).collect()
                };
                cut = Some(CutBlock {
                    s: parse_side(parts[0], "S:")?,
                    t: parse_side(parts[1], "T:")?,
                });
            } else {
                let toks: Vec<&str> = s.split_whitespace().collect();
                if toks.len() != 3 {
                    return Err(Error::Parse {
                        line,
                        msg: format!("edge line must be `u v w`, got `{s}`"),
                    });
                }
                let u = parse_usize(toks[0])?;
                let v = parse_usize(toks[1])?;
                let w = toks[2].parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    msg: format!("bad weight `{}`", toks[2]),
                })?;
                edges.push((u, v, w));
            }
        }
        let (n, m, bipartite_u_size) = header.ok_or(Error::Parse {
            line: 0,
            msg: "empty instance file".into(),
        })?;
        if edges.len() != m {
            return Err(Error::Parse {
                line: 0,
                msg: format!("header says m = {m} but found {} edge lines", edges.len()),
            });
        }
        let file = InstanceFile {
            n,
            m,
            bipartite_u_size,
            edges,
            caps: if caps.is_empty() { None } else { Some(caps) },
            cut,
        };
        // Validate through the graph constructor so malformed instances are
        // rejected here rather than downstream.
        file.to_graph()?;
        Ok(file)
    }
}

/// Read an instance from disk; `.json` paths (or `{`-leading content) use the
/// JSON mirror, everything else the text format.
pub fn read_instance<P: AsRef<Path>>(path: P) -> Result<InstanceFile> {
    let text = std::fs::read_to_string(&path)?;
    parse_instance_str(&text, looks_like_json(path.as_ref(), &text))
}

pub fn parse_instance_str(text: &str, json: bool) -> Result<InstanceFile> {
    if json {
        let file: InstanceFile = serde_json::from_str(text)?;
        file.to_graph()?;
        Ok(file)
    } else {
        InstanceFile::parse_text(text)
    }
}

fn looks_like_json(path: &Path, text: &str) -> bool {
    path.extension().map(|e| e == "json").unwrap_or(false)
        || text.trim_start().starts_with('{')
}

/// Write an instance to disk, format chosen by extension as in
/// [`read_instance`].
pub fn write_instance<P: AsRef<Path>>(
    path: P,
    g: &WeightedGraph,
    cut: Option<(&[usize], &[usize])>,
) -> Result<()> {
    let file = InstanceFile::from_graph(g, cut);
    let body = if path.as_ref().extension().map(|e| e == "json").unwrap_or(false) {
        serde_json::to_string_pretty(&file)? + "\n"
    } else {
        file.to_text()
    };
    std::fs::write(path, body)?;
    Ok(())
}
