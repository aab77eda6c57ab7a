//! Text formats.
//!
//! * `.bmg` instances: `bmg 1`, then `g <ads> <consumers> <edges>`, optional
//!   `ba <ad> <cap>` / `bc <consumer> <cap>` overrides of the default
//!   capacities, then one `e <ad> <consumer> <weight>` line per edge.
//! * `.piv` predictions: `<ad> <weight>` per line.
//! * `.thr` thresholds: `<ad> <weight> <tie_ad> <tie_consumer>` per ad, with
//!   `<ad> -inf -1 -1` for an ad that poured everything.
//! * `.match` matchings: `m <ad> <consumer>` per matched edge.
//!
//! All formats are LF-terminated and accept `#` comment lines (after the
//! first line for `.bmg`). Weights are written in Rust's shortest
//! round-trip decimal form.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::graph::{BipartiteInstance, CapacityRule, EdgeKey, GraphError, Matching, RawEdge};
use crate::state::{Threshold, ThresholdVector};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: malformed line `{content}`")]
    MalformedLine { line: usize, content: String },
    #[error("header declares {declared} edges but {found} edge lines were found")]
    CountMismatch { declared: usize, found: usize },
    #[error("line {line}: {source}")]
    Graph {
        line: usize,
        #[source]
        source: GraphError,
    },
    #[error("{0}")]
    Instance(#[from] GraphError),
    #[error("threshold file has no entry for ads {0:?}")]
    MissingAds(Vec<usize>),
}

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
}

fn read_text(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn with_path<T>(path: &Path, r: Result<T, FormatError>) -> Result<T, IoError> {
    r.map_err(|source| IoError::Format {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-empty, non-comment lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn malformed(line: usize, content: &str) -> FormatError {
    FormatError::MalformedLine {
        line,
        content: content.to_string(),
    }
}

fn parse_fields<const N: usize>(line: usize, content: &str) -> Result<[&str; N], FormatError> {
    let mut out = [""; N];
    let mut it = content.split_whitespace();
    for slot in out.iter_mut() {
        *slot = it.next().ok_or_else(|| malformed(line, content))?;
    }
    if it.next().is_some() {
        return Err(malformed(line, content));
    }
    Ok(out)
}

fn num<T: std::str::FromStr>(line: usize, content: &str, s: &str) -> Result<T, FormatError> {
    s.parse().map_err(|_| malformed(line, content))
}

pub fn parse_instance(text: &str) -> Result<BipartiteInstance, FormatError> {
    let mut lines = text.lines();
    match lines.next().map(str::trim) {
        Some("bmg 1") => {}
        other => {
            return Err(FormatError::MalformedHeader {
                line: 1,
                reason: format!("expected `bmg 1`, found `{}`", other.unwrap_or("")),
            })
        }
    }
    let mut header: Option<(usize, usize, usize)> = None;
    let mut ad_caps: Vec<(usize, usize, usize)> = Vec::new();
    let mut con_caps: Vec<(usize, usize, usize)> = Vec::new();
    let mut edges: Vec<RawEdge> = Vec::new();
    let mut edge_lines: Vec<usize> = Vec::new();

    for (line, content) in content_lines(text).skip_while(|(l, _)| *l == 1) {
        let tag = content.split_whitespace().next().unwrap_or("");
        match (tag, header) {
            ("g", None) => {
                let [_, a, c, e] =
                    parse_fields::<4>(line, content).map_err(|_| FormatError::MalformedHeader {
                        line,
                        reason: "expected `g <ads> <consumers> <edges>`".into(),
                    })?;
                let parse = |s: &str| {
                    s.parse::<usize>()
                        .map_err(|_| FormatError::MalformedHeader {
                            line,
                            reason: format!("bad count `{s}`"),
                        })
                };
                header = Some((parse(a)?, parse(c)?, parse(e)?));
                edges.reserve(header.map_or(0, |h| h.2));
            }
            (_, None) => {
                return Err(FormatError::MalformedHeader {
                    line,
                    reason: "`g` line must precede all other records".into(),
                })
            }
            ("g", Some(_)) => {
                return Err(FormatError::MalformedHeader {
                    line,
                    reason: "repeated `g` line".into(),
                })
            }
            ("ba", Some(_)) | ("bc", Some(_)) => {
                let [_, id, cap] = parse_fields::<3>(line, content)?;
                let entry = (line, num(line, content, id)?, num(line, content, cap)?);
                if tag == "ba" {
                    ad_caps.push(entry);
                } else {
                    con_caps.push(entry);
                }
            }
            ("e", Some(_)) => {
                let [_, a, c, w] = parse_fields::<4>(line, content)?;
                edges.push(RawEdge::new(
                    num(line, content, a)?,
                    num(line, content, c)?,
                    num(line, content, w)?,
                ));
                edge_lines.push(line);
            }
            _ => return Err(malformed(line, content)),
        }
    }

    let (num_ads, num_consumers, num_edges) = header.ok_or(FormatError::MalformedHeader {
        line: 2,
        reason: "missing `g` line".into(),
    })?;
    if edges.len() != num_edges {
        return Err(FormatError::CountMismatch {
            declared: num_edges,
            found: edges.len(),
        });
    }
    let instance =
        BipartiteInstance::build(num_ads, num_consumers, &edges, CapacityRule::HalfDegree)
            .map_err(|e| locate_graph_error(e, &edges, &edge_lines))?;
    if ad_caps.is_empty() && con_caps.is_empty() {
        return Ok(instance);
    }
    let (mut ads, mut consumers) = instance.half_degree_capacities();
    for (line, id, cap) in ad_caps {
        *ads.get_mut(id).ok_or(FormatError::Graph {
            line,
            source: GraphError::IdOutOfRange {
                ad: id,
                consumer: 0,
                num_ads,
                num_consumers,
            },
        })? = cap;
    }
    for (line, id, cap) in con_caps {
        *consumers.get_mut(id).ok_or(FormatError::Graph {
            line,
            source: GraphError::IdOutOfRange {
                ad: 0,
                consumer: id,
                num_ads,
                num_consumers,
            },
        })? = cap;
    }
    Ok(instance.with_capacities(ads, consumers)?)
}

fn locate_graph_error(e: GraphError, edges: &[RawEdge], lines: &[usize]) -> FormatError {
    let pos = match &e {
        GraphError::DuplicateEdge { ad, consumer } => edges
            .iter()
            .rposition(|x| x.ad == *ad && x.consumer == *consumer),
        GraphError::NonPositiveWeight { ad, consumer, .. }
        | GraphError::NonFiniteWeight { ad, consumer }
        | GraphError::IdOutOfRange { ad, consumer, .. } => edges
            .iter()
            .position(|x| x.ad == *ad && x.consumer == *consumer),
        _ => None,
    };
    match pos {
        Some(p) => FormatError::Graph {
            line: lines[p],
            source: e,
        },
        None => FormatError::Instance(e),
    }
}

/// Serializes `instance`. Capacities equal to the default rule are omitted.
pub fn format_instance(instance: &BipartiteInstance) -> String {
    let mut out = String::with_capacity(32 + instance.num_edges() * 16);
    out.push_str("bmg 1\n");
    let _ = writeln!(
        out,
        "g {} {} {}",
        instance.num_ads(),
        instance.num_consumers(),
        instance.num_edges()
    );
    let (ads, consumers) = instance.half_degree_capacities();
    for (a, (&cap, &def)) in instance.ad_capacities().iter().zip(&ads).enumerate() {
        if cap != def {
            let _ = writeln!(out, "ba {a} {cap}");
        }
    }
    for (c, (&cap, &def)) in instance
        .consumer_capacities()
        .iter()
        .zip(&consumers)
        .enumerate()
    {
        if cap != def {
            let _ = writeln!(out, "bc {c} {cap}");
        }
    }
    for e in instance.edges() {
        let _ = writeln!(out, "e {} {} {}", e.ad, e.consumer, e.weight);
    }
    out
}

pub fn read_instance(path: &Path) -> Result<BipartiteInstance, IoError> {
    let text = read_text(path)?;
    with_path(path, parse_instance(&text))
}

pub fn write_instance(instance: &BipartiteInstance, path: &Path) -> Result<(), IoError> {
    write_text(path, &format_instance(instance))
}

/// SHA-256 of the canonical `.bmg` serialization, hex encoded.
pub fn instance_digest(instance: &BipartiteInstance) -> String {
    hex::encode(Sha256::digest(format_instance(instance).as_bytes()))
}

/// `(line, ad, weight)` entries of a `.piv` file.
pub fn parse_pivots(text: &str) -> Result<Vec<(usize, usize, f64)>, FormatError> {
    content_lines(text)
        .map(|(line, content)| {
            let [ad, w] = parse_fields::<2>(line, content)?;
            Ok((line, num(line, content, ad)?, num(line, content, w)?))
        })
        .collect()
}

pub fn format_pivots(entries: &[(usize, f64)]) -> String {
    let mut out = String::new();
    for (ad, w) in entries {
        let _ = writeln!(out, "{ad} {w}");
    }
    out
}

pub fn format_thresholds(thresholds: &ThresholdVector) -> String {
    let mut out = String::new();
    for (a, t) in thresholds.iter().enumerate() {
        let _ = match t {
            Threshold::Key(k) => writeln!(out, "{a} {} {} {}", k.weight, k.ad, k.consumer),
            Threshold::BelowAll => writeln!(out, "{a} -inf -1 -1"),
        };
    }
    out
}

pub fn parse_thresholds(text: &str) -> Result<ThresholdVector, FormatError> {
    let mut entries: Vec<Option<Threshold>> = Vec::new();
    for (line, content) in content_lines(text) {
        let [ad, w, ta, tc] = parse_fields::<4>(line, content)?;
        let ad: usize = num(line, content, ad)?;
        let t = if ta == "-1" && tc == "-1" {
            Threshold::BelowAll
        } else {
            let w: f64 = num(line, content, w)?;
            if !(w.is_finite() && w > 0.0) {
                return Err(malformed(line, content));
            }
            Threshold::Key(EdgeKey::new(
                w,
                num(line, content, ta)?,
                num(line, content, tc)?,
            ))
        };
        if entries.len() <= ad {
            entries.resize(ad + 1, None);
        }
        entries[ad] = Some(t);
    }
    let missing: Vec<usize> = entries
        .iter()
        .enumerate()
        .filter_map(|(a, t)| t.is_none().then_some(a))
        .collect();
    if !missing.is_empty() {
        return Err(FormatError::MissingAds(missing));
    }
    Ok(ThresholdVector(entries.into_iter().flatten().collect()))
}

pub fn read_thresholds(path: &Path) -> Result<ThresholdVector, IoError> {
    let text = read_text(path)?;
    with_path(path, parse_thresholds(&text))
}

pub fn write_thresholds(thresholds: &ThresholdVector, path: &Path) -> Result<(), IoError> {
    write_text(path, &format_thresholds(thresholds))
}

pub fn format_matching(matching: &Matching) -> String {
    let mut out = String::with_capacity(matching.len() * 12);
    for (a, c) in matching.pairs() {
        let _ = writeln!(out, "m {a} {c}");
    }
    out
}

pub fn parse_matching(text: &str, instance: &BipartiteInstance) -> Result<Matching, FormatError> {
    let mut pairs = Vec::new();
    for (line, content) in content_lines(text) {
        let [tag, a, c] = parse_fields::<3>(line, content)?;
        if tag != "m" {
            return Err(malformed(line, content));
        }
        let pair: (usize, usize) = (num(line, content, a)?, num(line, content, c)?);
        if instance.weight(pair.0, pair.1).is_none() {
            return Err(FormatError::Graph {
                line,
                source: GraphError::UnknownEdge {
                    ad: pair.0,
                    consumer: pair.1,
                },
            });
        }
        pairs.push((line, pair));
    }
    pairs.sort_unstable_by_key(|&(_, p)| p);
    if let Some(w) = pairs.windows(2).find(|w| w[0].1 == w[1].1) {
        let (ad, consumer) = w[1].1;
        return Err(FormatError::Graph {
            line: w[1].0.max(w[0].0),
            source: GraphError::DuplicateEdge { ad, consumer },
        });
    }
    Ok(Matching::from_pairs(
        instance,
        pairs.into_iter().map(|(_, p)| p).collect(),
    )?)
}

pub fn read_matching(path: &Path, instance: &BipartiteInstance) -> Result<Matching, IoError> {
    let text = read_text(path)?;
    with_path(path, parse_matching(&text, instance))
}

pub fn write_matching(matching: &Matching, path: &Path) -> Result<(), IoError> {
    write_text(path, &format_matching(matching))
}
