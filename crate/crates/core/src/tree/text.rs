//! Line-oriented tree format:
//!
//! ```text
//! tree draw=<index> nodes=<count>
//! <id> split <feature> <threshold> <left> <right>
//! <id> leaf <value>
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so parsing a written
//! tree gives back identical bits.

use super::{Node, RegressionTree, TreeError};

impl RegressionTree {
    pub fn write_text(&self, out: &mut String) {
        out.push_str(&format!("tree draw={} nodes={}\n", self.draw_index, self.nodes.len()));
        for (id, node) in self.nodes.iter().enumerate() {
            match node {
                Node::Split { feature, threshold, left, right } => {
                    out.push_str(&format!("{id} split {feature} {threshold:?} {left} {right}\n"))
                }
                Node::Leaf { value } => out.push_str(&format!("{id} leaf {value:?}\n")),
            }
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        self.write_text(&mut s);
        s
    }

    /// Parse one tree from `lines`, which start at the `tree` header.
    /// `first_line` is the 1-based line number of the header, for errors.
    pub fn parse_lines<'a, I>(lines: &mut I, first_line: usize) -> Result<Self, TreeError>
    where
        I: Iterator<Item = &'a str>,
    {
        let err = |offset: usize, msg: String| TreeError::Parse { line: first_line + offset, msg };
        let header = lines.next().ok_or_else(|| err(0, "missing tree header".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("tree") {
            return Err(err(0, format!("expected tree header, got {header:?}")));
        }
        let mut draw = None;
        let mut count = None;
        for kv in parts {
            match kv.split_once('=') {
                Some(("draw", v)) => draw = v.parse::<u64>().ok(),
                Some(("nodes", v)) => count = v.parse::<usize>().ok(),
                _ => return Err(err(0, format!("unexpected header field {kv:?}"))),
            }
        }
        let (Some(draw), Some(count)) = (draw, count) else {
            return Err(err(0, "header needs draw= and nodes=".into()));
        };
        if count == 0 {
            return Err(err(0, "tree has no nodes".into()));
        }
        let mut nodes = Vec::with_capacity(count);
        for k in 0..count {
            let line = lines.next().ok_or_else(|| err(k + 1, "truncated tree".into()))?;
            let t: Vec<&str> = line.split_whitespace().collect();
            let bad = || err(k + 1, format!("malformed node line {line:?}"));
            if t.first().and_then(|s| s.parse::<usize>().ok()) != Some(k) {
                return Err(err(k + 1, format!("expected node id {k}")));
            }
            let node = match t.get(1).copied() {
                Some("leaf") if t.len() == 3 => Node::Leaf { value: t[2].parse().map_err(|_| bad())? },
                Some("split") if t.len() == 6 => {
                    let left: u32 = t[4].parse().map_err(|_| bad())?;
                    let right: u32 = t[5].parse().map_err(|_| bad())?;
                    if left as usize >= count || right as usize >= count || left as usize <= k || right as usize <= k {
                        return Err(err(k + 1, "child id out of range".into()));
                    }
                    Node::Split {
                        feature: t[2].parse().map_err(|_| bad())?,
                        threshold: t[3].parse().map_err(|_| bad())?,
                        left,
                        right,
                    }
                }
                _ => return Err(bad()),
            };
            nodes.push(node);
        }
        Ok(RegressionTree::from_nodes(nodes, draw))
    }

    pub fn from_text(text: &str) -> Result<Self, TreeError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        Self::parse_lines(&mut lines, 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_format() {
        let t = RegressionTree::from_nodes(
            vec![
                Node::Split { feature: 3, threshold: 0.25, left: 1, right: 2 },
                Node::Leaf { value: -1.5 },
                Node::Leaf { value: 0.1 },
            ],
            7,
        );
        assert_eq!(t.to_text(), "tree draw=7 nodes=3\n0 split 3 0.25 1 2\n1 leaf -1.5\n2 leaf 0.1\n");
        assert_eq!(RegressionTree::from_text(&t.to_text()).unwrap(), t);
    }

    #[test]
    fn round_trip_preserves_bits() {
        let v = 1.0 / 3.0;
        let t = RegressionTree { nodes: vec![Node::Leaf { value: v }], draw_index: 0 };
        match RegressionTree::from_text(&t.to_text()).unwrap().nodes()[0] {
            Node::Leaf { value } => assert_eq!(value.to_bits(), v.to_bits()),
            _ => panic!(),
        }
    }

    #[test]
    fn rejects_malformed() {
        assert!(RegressionTree::from_text("").is_err());
        assert!(RegressionTree::from_text("tree draw=0 nodes=2\n0 leaf 1\n").is_err());
        assert!(RegressionTree::from_text("tree draw=0 nodes=1\n0 leaf x\n").is_err());
        assert!(RegressionTree::from_text("tree draw=0 nodes=3\n0 split 0 1 0 2\n1 leaf 1\n2 leaf 1\n").is_err());
        assert!(RegressionTree::from_text("tree nodes=1\n0 leaf 1\n").is_err());
    }
}
