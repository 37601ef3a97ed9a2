//! Text tree files.
//!
//! ```text
//! branchruin-tree v1
//! # depth_cap 3
//! 0 -1
//! 1 0 1 2.5
//! 2 1 1 2.5
//! ```
//!
//! One line per vertex in ascending index order: `index parent` with
//! parent `-1` for the root, optionally followed by `w delta` for the
//! incoming edge. Blank lines and `#` comments are skipped; a
//! `# depth_cap N` comment restores a cap deeper than the deepest vertex.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use branchruin_core::tree::{Tree, TreeError};
use branchruin_core::weights::WeightScheme;

pub const HEADER: &str = "branchruin-tree v1";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("{0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Tree(#[from] TreeError),
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse { line, message: message.into() }
}

/// A tree plus the optional per-edge weight columns (slot 0 unused).
#[derive(Clone, Debug, PartialEq)]
pub struct TreeFile {
    pub tree: Tree,
    pub weights: Option<(Vec<f64>, Vec<f64>)>,
}

impl TreeFile {
    pub fn scheme(&self) -> Option<WeightScheme> {
        self.weights.as_ref().map(|(w, d)| WeightScheme::Explicit { w: w.clone(), delta: d.clone() })
    }
}

pub fn parse_tree<R: BufRead>(reader: R) -> Result<TreeFile, FormatError> {
    let mut parents: Vec<Option<usize>> = Vec::new();
    let mut w = Vec::new();
    let mut delta = Vec::new();
    let mut columns: Option<usize> = None;
    let mut depth_cap: Option<u32> = None;
    let mut seen_header = false;
    let mut last_line = 0;

    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if !seen_header && !text.starts_with('#') {
            if text != HEADER {
                return Err(parse_err(lineno, format!("expected header `{HEADER}`")));
            }
            seen_header = true;
            continue;
        }
        if let Some(comment) = text.strip_prefix('#') {
            let mut it = comment.split_whitespace();
            if it.next() == Some("depth_cap") {
                let v = it.next().and_then(|s| s.parse().ok());
                depth_cap = Some(v.ok_or_else(|| parse_err(lineno, "bad depth_cap"))?);
            }
            continue;
        }
        let fields: Vec<&str> = text.split_whitespace().collect();
        let index = parents.len();
        let is_root = index == 0;
        match fields.len() {
            2 if is_root => {}
            2 | 4 => {
                if !is_root && *columns.get_or_insert(fields.len()) != fields.len() {
                    return Err(parse_err(lineno, "weight columns must appear on every edge line or none"));
                }
            }
            n => return Err(parse_err(lineno, format!("expected 2 or 4 fields, found {n}"))),
        }
        let got: usize = fields[0].parse().map_err(|_| parse_err(lineno, "bad vertex index"))?;
        if got != index {
            return Err(parse_err(lineno, format!("expected vertex index {index}, found {got}")));
        }
        let parent: i64 = fields[1].parse().map_err(|_| parse_err(lineno, "bad parent index"))?;
        if is_root {
            if parent != -1 {
                return Err(parse_err(lineno, "vertex 0 must be the root (parent -1)"));
            }
            parents.push(None);
        } else {
            if parent < 0 {
                return Err(parse_err(lineno, "only vertex 0 may be a root"));
            }
            if parent as usize >= index {
                return Err(parse_err(lineno, format!("parent {parent} does not precede vertex {index}")));
            }
            parents.push(Some(parent as usize));
        }
        if fields.len() == 4 {
            let parse_weight = |s: &str| -> Result<f64, FormatError> {
                s.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| parse_err(lineno, format!("bad weight `{s}`")))
            };
            let (a, b) = (parse_weight(fields[2])?, parse_weight(fields[3])?);
            if !is_root {
                w.push(a);
                delta.push(b);
            }
        }
    }
    if !seen_header {
        return Err(parse_err(last_line.max(1), format!("missing header `{HEADER}`")));
    }
    if parents.is_empty() {
        return Err(parse_err(last_line.max(1), "no vertices"));
    }
    let mut tree = Tree::from_parents(&parents)?;
    if let Some(cap) = depth_cap {
        if cap < tree.depth_cap() {
            return Err(parse_err(1, format!("depth_cap {cap} is below the deepest vertex")));
        }
        tree = tree.with_depth_cap(cap);
    }
    let weights = (columns == Some(4)).then(|| {
        let mut wf = vec![1.0];
        wf.extend(w);
        let mut df = vec![1.0];
        df.extend(delta);
        (wf, df)
    });
    Ok(TreeFile { tree, weights })
}

pub fn write_tree<W: Write>(mut out: W, tree: &Tree, weights: Option<(&[f64], &[f64])>) -> io::Result<()> {
    writeln!(out, "{HEADER}")?;
    let deepest = (0..tree.len()).map(|v| tree.generation(v)).max().unwrap_or(0);
    if tree.depth_cap() != deepest {
        writeln!(out, "# depth_cap {}", tree.depth_cap())?;
    }
    writeln!(out, "0 -1")?;
    for v in tree.edges() {
        let p = tree.parent(v).expect("non-root vertex has a parent");
        match weights {
            Some((w, d)) => writeln!(out, "{v} {p} {} {}", w[v], d[v])?,
            None => writeln!(out, "{v} {p}")?,
        }
    }
    out.flush()
}

pub fn read_tree_file(path: &Path) -> Result<TreeFile, FormatError> {
    parse_tree(BufReader::new(File::open(path)?))
}

pub fn write_tree_file(path: &Path, tree: &Tree, weights: Option<(&[f64], &[f64])>) -> io::Result<()> {
    write_tree(BufWriter::new(File::create(path)?), tree, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use branchruin_core::tree::SphericalTree;

    fn parse(s: &str) -> Result<TreeFile, FormatError> {
        parse_tree(s.as_bytes())
    }

    fn line_of(e: FormatError) -> usize {
        match e {
            FormatError::Parse { line, .. } => line,
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn round_trip() {
        let t = SphericalTree::zd_like(2, 8).materialize(1000).unwrap();
        let mut buf = Vec::new();
        write_tree(&mut buf, &t, None).unwrap();
        let back = parse_tree(buf.as_slice()).unwrap();
        assert_eq!(back.tree.parents(), t.parents());
        assert!(back.weights.is_none());

        let w: Vec<f64> = (0..t.len()).map(|v| 1.0 + v as f64 / 7.0).collect();
        let d: Vec<f64> = (0..t.len()).map(|v| 0.1 * (v % 5 + 1) as f64).collect();
        let mut buf = Vec::new();
        write_tree(&mut buf, &t, Some((&w, &d))).unwrap();
        let back = parse_tree(buf.as_slice()).unwrap();
        let (bw, bd) = back.weights.clone().unwrap();
        assert_eq!(bw[1..], w[1..]);
        assert_eq!(bd[1..], d[1..]);
        assert!(matches!(back.scheme(), Some(WeightScheme::Explicit { .. })));
    }

    #[test]
    fn depth_cap_survives() {
        let t = Tree::path(3).with_depth_cap(5);
        let mut buf = Vec::new();
        write_tree(&mut buf, &t, None).unwrap();
        assert_eq!(parse_tree(buf.as_slice()).unwrap().tree, t);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert_eq!(line_of(parse("branchruin-tree v1\n0 -1\n1 0\n2 3\n3 1\n").unwrap_err()), 4);
        assert_eq!(line_of(parse("wrong\n0 -1\n").unwrap_err()), 1);
        assert_eq!(line_of(parse("branchruin-tree v1\n0 -1\n2 0\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("branchruin-tree v1\n0 -1\n1 0 1\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("branchruin-tree v1\n0 -1\n1 0 1 1\n2 0\n").unwrap_err()), 4);
        assert_eq!(line_of(parse("branchruin-tree v1\n0 -1\n1 0 x 1\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("branchruin-tree v1\n\n0 0\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("").unwrap_err()), 1);
    }

    #[test]
    fn comments_and_root_weights() {
        let f = parse("# lead\nbranchruin-tree v1\n# note\n0 -1 9 9\n\n1 0 2 3\n").unwrap();
        assert_eq!(f.tree.len(), 2);
        assert_eq!(f.weights, Some((vec![1.0, 2.0], vec![1.0, 3.0])));
    }
}
