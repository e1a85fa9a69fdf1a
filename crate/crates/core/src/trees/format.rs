//! Bracket strings and JSON for trees.
//!
//! Grammar (whitespace separates children):
//!
//! ```text
//! node  := [ "X(" k1 "," k2 ")" ] [ "z" digit ] [ "[" edge* "]" ]
//! edge  := "I" [ "(" n1 "," n2 ")" ] [ "^" p ] "[" node "]"
//! ```
//!
//! A node with no label is `z4`. Printing omits `(0,0)` and `^0` on edges
//! but always writes the label.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{Edge, Label, MultiIndex2, Tree};
use crate::{Error, Result};

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if !self.poly().is_zero() {
            write!(f, "X{}", self.poly())?;
        }
        write!(f, "z{}", self.label().index())?;
        if !self.children().is_empty() {
            f.write_str("[")?;
            for (i, e) in self.children().iter().enumerate() {
                if i > 0 {
                    f.write_str(" ")?;
                }
                f.write_str("I")?;
                if !e.n.is_zero() {
                    write!(f, "{}", e.n)?;
                }
                if e.p > 0 {
                    write!(f, "^{}", e.p)?;
                }
                write!(f, "[{}]", e.child)?;
            }
            f.write_str("]")?;
        }
        Ok(())
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { pos: self.pos, msg: msg.into() })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{}'", c as char))
        }
    }

    fn number(&mut self) -> Result<u32> {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return self.err("expected a number");
        }
        std::str::from_utf8(&self.s[start..self.pos])
            .unwrap()
            .parse()
            .or_else(|_| self.err("number out of range"))
    }

    fn pair(&mut self) -> Result<MultiIndex2> {
        self.expect(b'(')?;
        let a = self.number()?;
        self.skip_ws();
        self.expect(b',')?;
        let b = self.number()?;
        self.skip_ws();
        self.expect(b')')?;
        Ok(MultiIndex2::new(a, b))
    }

    fn node(&mut self) -> Result<Tree> {
        self.skip_ws();
        let mut poly = MultiIndex2::ZERO;
        let mut seen = false;
        if self.eat(b'X') {
            poly = self.pair()?;
            seen = true;
        }
        let mut label = Label::Z4;
        if self.eat(b'z') {
            let d = self.number()?;
            label = match Label::from_index(d.min(255) as u8) {
                Some(l) => l,
                None => return self.err(format!("unknown label z{d}")),
            };
            seen = true;
        }
        if !seen {
            return self.err("expected a node");
        }
        let mut children = Vec::new();
        if self.eat(b'[') {
            loop {
                self.skip_ws();
                if self.eat(b']') {
                    break;
                }
                if !self.eat(b'I') {
                    return self.err("expected 'I' or ']'");
                }
                let n = if self.peek() == Some(b'(') { self.pair()? } else { MultiIndex2::ZERO };
                let p = if self.eat(b'^') { self.number()? } else { 0 };
                self.expect(b'[')?;
                let child = self.node()?;
                self.skip_ws();
                self.expect(b']')?;
                children.push(Edge::new(n, p, child));
            }
        }
        Ok(Tree::new(poly, label, children))
    }
}

#[derive(Serialize, Deserialize)]
struct JsonNode {
    id: usize,
    poly: [u32; 2],
    label: u8,
}

#[derive(Serialize, Deserialize)]
struct JsonEdge {
    parent: usize,
    child: usize,
    n: [u32; 2],
    p: u32,
}

#[derive(Serialize, Deserialize)]
struct JsonTree {
    nodes: Vec<JsonNode>,
    edges: Vec<JsonEdge>,
}

fn flatten(t: &Tree, out: &mut JsonTree) -> usize {
    let id = out.nodes.len();
    out.nodes.push(JsonNode {
        id,
        poly: [t.poly().k1, t.poly().k2],
        label: t.label().index(),
    });
    for e in t.children() {
        let c = flatten(&e.child, out);
        out.edges.push(JsonEdge { parent: id, child: c, n: [e.n.k1, e.n.k2], p: e.p });
    }
    id
}

impl Tree {
    pub fn parse(s: &str) -> Result<Tree> {
        let mut p = Parser { s: s.as_bytes(), pos: 0 };
        let t = p.node()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return p.err("trailing input");
        }
        Ok(t)
    }

    /// Node/edge list with node 0 as the root.
    pub fn to_json(&self) -> Result<String> {
        let mut j = JsonTree { nodes: vec![], edges: vec![] };
        flatten(self, &mut j);
        Ok(serde_json::to_string(&j)?)
    }

    pub fn from_json(s: &str) -> Result<Tree> {
        let j: JsonTree = serde_json::from_str(s)?;
        let n = j.nodes.len();
        if n == 0 {
            return Err(Error::InvalidTree("no nodes".into()));
        }
        let mut kids: Vec<Vec<&JsonEdge>> = vec![vec![]; n];
        let mut has_parent = vec![false; n];
        for e in &j.edges {
            if e.parent >= n || e.child >= n || has_parent[e.child] {
                return Err(Error::InvalidTree("bad edge list".into()));
            }
            has_parent[e.child] = true;
            kids[e.parent].push(e);
        }
        let by_id: std::collections::HashMap<usize, &JsonNode> =
            j.nodes.iter().map(|x| (x.id, x)).collect();
        if by_id.len() != n || (0..n).any(|i| !by_id.contains_key(&i)) {
            return Err(Error::InvalidTree("node ids must be 0..n".into()));
        }
        fn build(
            i: usize,
            by_id: &std::collections::HashMap<usize, &JsonNode>,
            kids: &[Vec<&JsonEdge>],
            depth: usize,
        ) -> Result<Tree> {
            if depth > kids.len() {
                return Err(Error::InvalidTree("cycle".into()));
            }
            let nd = by_id[&i];
            let label = Label::from_index(nd.label)
                .ok_or_else(|| Error::InvalidTree(format!("label {}", nd.label)))?;
            let mut ch = Vec::new();
            for e in &kids[i] {
                ch.push(Edge::new(
                    MultiIndex2::new(e.n[0], e.n[1]),
                    e.p,
                    build(e.child, by_id, kids, depth + 1)?,
                ));
            }
            Ok(Tree::new(MultiIndex2::new(nd.poly[0], nd.poly[1]), label, ch))
        }
        if has_parent[0] {
            return Err(Error::InvalidTree("node 0 must be the root".into()));
        }
        build(0, &by_id, &kids, 0)
    }
}
