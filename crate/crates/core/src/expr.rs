//! Kernel-combination expression trees.
//!
//! Text form is prefix notation with 1-based kernel names:
//! `(+ (* K1 K1) K5)` is `K1*K1 + K5`.

use std::borrow::Cow;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::kernel::{GramMatrix, KernelBank};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Op {
    Add,
    Mul,
}

impl Op {
    pub fn symbol(self) -> char {
        match self {
            Op::Add => '+',
            Op::Mul => '*',
        }
    }

    pub fn flipped(self) -> Op {
        match self {
            Op::Add => Op::Mul,
            Op::Mul => Op::Add,
        }
    }

    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            Op::Add => a + b,
            Op::Mul => a * b,
        }
    }
}

/// A chromosome: leaves are base-kernel indices (0-based), internal nodes
/// are entrywise `+` or `*`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum KernelExpr {
    Leaf(usize),
    Node(Op, Box<KernelExpr>, Box<KernelExpr>),
}

impl KernelExpr {
    pub fn leaf(i: usize) -> Self {
        KernelExpr::Leaf(i)
    }

    pub fn add(a: KernelExpr, b: KernelExpr) -> Self {
        KernelExpr::Node(Op::Add, Box::new(a), Box::new(b))
    }

    pub fn mul(a: KernelExpr, b: KernelExpr) -> Self {
        KernelExpr::Node(Op::Mul, Box::new(a), Box::new(b))
    }

    /// Left-deep sum `(+ (+ K1 K2) K3) ...` over the first `n` kernels.
    pub fn sum_of_leaves(n: usize) -> Self {
        assert!(n >= 1, "sum_of_leaves needs at least one kernel");
        (1..n).fold(KernelExpr::Leaf(0), |acc, i| {
            KernelExpr::add(acc, KernelExpr::Leaf(i))
        })
    }

    /// Leaf-only trees have depth 1.
    pub fn depth(&self) -> usize {
        match self {
            KernelExpr::Leaf(_) => 1,
            KernelExpr::Node(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            KernelExpr::Leaf(_) => 1,
            KernelExpr::Node(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, KernelExpr::Leaf(_))
    }

    /// Kernel indices in left-to-right order.
    pub fn leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<usize>) {
        match self {
            KernelExpr::Leaf(i) => out.push(*i),
            KernelExpr::Node(_, a, b) => {
                a.collect_leaves(out);
                b.collect_leaves(out);
            }
        }
    }

    pub fn max_leaf(&self) -> usize {
        match self {
            KernelExpr::Leaf(i) => *i,
            KernelExpr::Node(_, a, b) => a.max_leaf().max(b.max_leaf()),
        }
    }

    /// Prefix text in the tree's own child order.
    pub fn to_prefix(&self) -> String {
        let mut s = String::new();
        self.write_prefix(&mut s);
        s
    }

    fn write_prefix(&self, s: &mut String) {
        match self {
            KernelExpr::Leaf(i) => {
                s.push('K');
                s.push_str(&(i + 1).to_string());
            }
            KernelExpr::Node(op, a, b) => {
                s.push('(');
                s.push(op.symbol());
                s.push(' ');
                a.write_prefix(s);
                s.push(' ');
                b.write_prefix(s);
                s.push(')');
            }
        }
    }

    /// Equivalent tree with the children of every node in lexicographic
    /// order of their canonical text.
    pub fn canonicalize(&self) -> KernelExpr {
        self.canonical_parts().0
    }

    fn canonical_parts(&self) -> (KernelExpr, String) {
        match self {
            KernelExpr::Leaf(i) => (KernelExpr::Leaf(*i), format!("K{}", i + 1)),
            KernelExpr::Node(op, a, b) => {
                let (mut ea, mut sa) = a.canonical_parts();
                let (mut eb, mut sb) = b.canonical_parts();
                if sb < sa {
                    std::mem::swap(&mut ea, &mut eb);
                    std::mem::swap(&mut sa, &mut sb);
                }
                let text = format!("({} {sa} {sb})", op.symbol());
                (KernelExpr::Node(*op, Box::new(ea), Box::new(eb)), text)
            }
        }
    }

    /// Order-independent text form; two trees that differ only in the order
    /// of commutative children share it.
    pub fn canonical_string(&self) -> String {
        self.canonical_parts().1
    }

    /// Parses prefix text such as `(+ K2 (* K1 K1))`, keeping child order.
    pub fn parse(text: &str) -> Result<KernelExpr> {
        let mut p = Parser { src: text, pos: 0 };
        let expr = p.expr()?;
        p.skip_ws();
        if p.pos != text.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(expr)
    }

    /// Fails if any leaf refers past the end of a bank of `n` kernels.
    pub fn validate(&self, n: usize) -> Result<()> {
        let max = self.max_leaf();
        if max >= n {
            return Err(Error::Expression(format!(
                "K{} referenced but the bank has {n} kernels",
                max + 1
            )));
        }
        Ok(())
    }

    /// Folds the tree over the bank with entrywise `+` and `*`.
    pub fn evaluate(&self, bank: &KernelBank) -> Result<GramMatrix> {
        self.validate(bank.len())?;
        let matrix = self.eval_matrix(bank)?.into_owned();
        GramMatrix::new(matrix, self.canonical_string())
    }

    fn eval_matrix<'a>(&self, bank: &'a KernelBank) -> Result<Cow<'a, Matrix>> {
        match self {
            KernelExpr::Leaf(i) => Ok(Cow::Borrowed(bank.kernels()[*i].as_matrix())),
            KernelExpr::Node(op, a, b) => {
                let ma = a.eval_matrix(bank)?;
                let mb = b.eval_matrix(bank)?;
                let op = *op;
                Ok(Cow::Owned(ma.zip_with(&mb, |x, y| op.apply(x, y))?))
            }
        }
    }

    // Preorder node addressing, used by the variation operators.

    /// Subtree at preorder position `idx` (root is 0).
    pub fn subtree(&self, idx: usize) -> Option<&KernelExpr> {
        let mut counter = idx;
        self.find(&mut counter)
    }

    fn find(&self, counter: &mut usize) -> Option<&KernelExpr> {
        if *counter == 0 {
            return Some(self);
        }
        *counter -= 1;
        match self {
            KernelExpr::Leaf(_) => None,
            KernelExpr::Node(_, a, b) => a.find(counter).or_else(|| b.find(counter)),
        }
    }

    /// Depth at which preorder node `idx` sits (root is at depth 1).
    pub fn depth_of(&self, idx: usize) -> Option<usize> {
        fn go(e: &KernelExpr, counter: &mut usize, level: usize) -> Option<usize> {
            if *counter == 0 {
                return Some(level);
            }
            *counter -= 1;
            match e {
                KernelExpr::Leaf(_) => None,
                KernelExpr::Node(_, a, b) => {
                    go(a, counter, level + 1).or_else(|| go(b, counter, level + 1))
                }
            }
        }
        let mut counter = idx;
        go(self, &mut counter, 1)
    }

    /// Copy of the tree with preorder node `idx` replaced by `with`.
    pub fn replace(&self, idx: usize, with: &KernelExpr) -> KernelExpr {
        fn go(e: &KernelExpr, counter: &mut Option<usize>, with: &KernelExpr) -> KernelExpr {
            match counter {
                Some(0) => {
                    *counter = None;
                    return with.clone();
                }
                Some(c) => *c -= 1,
                None => return e.clone(),
            }
            match e {
                KernelExpr::Leaf(i) => KernelExpr::Leaf(*i),
                KernelExpr::Node(op, a, b) => {
                    let a = go(a, counter, with);
                    let b = go(b, counter, with);
                    KernelExpr::Node(*op, Box::new(a), Box::new(b))
                }
            }
        }
        let mut counter = Some(idx);
        go(self, &mut counter, with)
    }

    /// Preorder positions of leaves (`true`) or internal nodes (`false`).
    pub fn positions(&self, leaves: bool) -> Vec<usize> {
        fn go(e: &KernelExpr, next: &mut usize, leaves: bool, out: &mut Vec<usize>) {
            let here = *next;
            *next += 1;
            if e.is_leaf() == leaves {
                out.push(here);
            }
            if let KernelExpr::Node(_, a, b) = e {
                go(a, next, leaves, out);
                go(b, next, leaves, out);
            }
        }
        let mut out = Vec::new();
        go(self, &mut 0, leaves, &mut out);
        out
    }
}

impl fmt::Display for KernelExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_prefix())
    }
}

impl std::str::FromStr for KernelExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KernelExpr::parse(s)
    }
}

impl Serialize for KernelExpr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_prefix())
    }
}

impl<'de> Deserialize<'de> for KernelExpr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        KernelExpr::parse(&text).map_err(serde::de::Error::custom)
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Parse {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if !c.is_whitespace() {
                break;
            }
            self.pos += c.len_utf8();
        }
    }

    fn expr(&mut self) -> Result<KernelExpr> {
        self.skip_ws();
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                self.skip_ws();
                let op = match self.peek() {
                    Some('+') => Op::Add,
                    Some('*') => Op::Mul,
                    _ => return Err(self.error("expected '+' or '*'")),
                };
                self.pos += 1;
                let a = self.expr()?;
                let b = self.expr()?;
                self.skip_ws();
                if self.peek() != Some(')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(KernelExpr::Node(op, Box::new(a), Box::new(b)))
            }
            Some('K') => {
                let start = self.pos;
                self.pos += 1;
                let digits = self.src[self.pos..]
                    .bytes()
                    .take_while(u8::is_ascii_digit)
                    .count();
                if digits == 0 {
                    return Err(self.error("expected kernel number after 'K'"));
                }
                let number: usize = self.src[self.pos..self.pos + digits]
                    .parse()
                    .map_err(|_| self.error("kernel number too large"))?;
                if number == 0 {
                    self.pos = start;
                    return Err(self.error("kernel names are 1-based; K0 is invalid"));
                }
                self.pos += digits;
                Ok(KernelExpr::Leaf(number - 1))
            }
            Some(_) => Err(self.error("expected '(' or kernel name")),
            None => Err(self.error("unexpected end of input")),
        }
    }
}
