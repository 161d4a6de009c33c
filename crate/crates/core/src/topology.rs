//! Directed communication topology.
//!
//! Agents are numbered `1..=n`. An edge `(j, i)` means agent `i` sends to
//! agent `j`, so `j` is an out-neighbor of `i` and `i` is an in-neighbor of `j`.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DigraphRepr", into = "DigraphRepr")]
pub struct Digraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    in_nbrs: Vec<Vec<usize>>,
    out_nbrs: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct DigraphRepr {
    n: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<DigraphRepr> for Digraph {
    type Error = Error;

    fn try_from(r: DigraphRepr) -> Result<Self> {
        Digraph::new(r.n, r.edges)
    }
}

impl From<Digraph> for DigraphRepr {
    fn from(g: Digraph) -> Self {
        DigraphRepr {
            n: g.n,
            edges: g.edges.into_iter().collect(),
        }
    }
}

impl Digraph {
    /// Builds a digraph from `(receiver, sender)` pairs. Duplicates collapse.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("digraph needs at least one agent"));
        }
        let mut set = BTreeSet::new();
        for (j, i) in edges {
            if j == 0 || i == 0 || j > n || i > n {
                return Err(invalid(format!("edge ({j}, {i}) outside agents 1..={n}")));
            }
            if i == j {
                return Err(invalid(format!("self-loop ({i}, {i}) is not allowed")));
            }
            set.insert((j, i));
        }
        let mut in_nbrs = vec![Vec::new(); n];
        let mut out_nbrs = vec![Vec::new(); n];
        for &(j, i) in &set {
            in_nbrs[j - 1].push(i);
            out_nbrs[i - 1].push(j);
        }
        for v in in_nbrs.iter_mut().chain(out_nbrs.iter_mut()) {
            v.sort_unstable();
        }
        Ok(Digraph {
            n,
            edges: set,
            in_nbrs,
            out_nbrs,
        })
    }

    pub fn from_edge_list(n: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        Self::new(n, pairs.iter().copied())
    }

    /// Directed ring `1 -> 2 -> ... -> n -> 1`.
    pub fn ring(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(invalid("ring needs n >= 2"));
        }
        Self::new(n, (1..=n).map(|i| (i % n + 1, i)))
    }

    /// Random digraph that always contains a hidden Hamiltonian cycle, plus
    /// every other ordered pair independently with probability `edge_probability`.
    pub fn random_strongly_connected(n: usize, edge_probability: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(invalid("random digraph needs n >= 2"));
        }
        if !(0.0..=1.0).contains(&edge_probability) {
            return Err(invalid(format!(
                "edge probability {edge_probability} outside [0, 1]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (1..=n).collect();
        order.shuffle(&mut rng);
        let mut edges: Vec<(usize, usize)> =
            (0..n).map(|t| (order[(t + 1) % n], order[t])).collect();
        for j in 1..=n {
            for i in 1..=n {
                if i != j && rng.gen_bool(edge_probability) {
                    edges.push((j, i));
                }
            }
        }
        let g = Self::new(n, edges)?;
        if !g.is_strongly_connected() {
            return Err(Error::GenerationFailure(format!(
                "n={n} p={edge_probability} seed={seed} produced a disconnected digraph"
            )));
        }
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(receiver, sender)` pairs in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, receiver: usize, sender: usize) -> bool {
        self.edges.contains(&(receiver, sender))
    }

    fn check(&self, i: usize) -> Result<()> {
        if i == 0 || i > self.n {
            Err(invalid(format!("agent {i} outside 1..={}", self.n)))
        } else {
            Ok(())
        }
    }

    /// Agents that send to `i`, sorted.
    pub fn in_neighbors(&self, i: usize) -> Result<&[usize]> {
        self.check(i)?;
        Ok(&self.in_nbrs[i - 1])
    }

    /// Agents that `i` sends to, sorted.
    pub fn out_neighbors(&self, i: usize) -> Result<&[usize]> {
        self.check(i)?;
        Ok(&self.out_nbrs[i - 1])
    }

    // Unchecked variants for hot loops; callers iterate over 1..=n.
    pub(crate) fn ins(&self, i: usize) -> &[usize] {
        &self.in_nbrs[i - 1]
    }

    pub(crate) fn outs(&self, i: usize) -> &[usize] {
        &self.out_nbrs[i - 1]
    }

    /// All neighbors of `i` in either direction, sorted and deduplicated.
    pub fn neighbors(&self, i: usize) -> Result<BTreeSet<usize>> {
        self.check(i)?;
        Ok(self.ins(i).iter().chain(self.outs(i)).copied().collect())
    }

    pub fn max_degree(&self) -> usize {
        (1..=self.n)
            .map(|i| self.ins(i).len().max(self.outs(i).len()))
            .max()
            .unwrap_or(0)
    }

    pub fn is_strongly_connected(&self) -> bool {
        let reach = |adj: &Vec<Vec<usize>>| {
            let mut seen = vec![false; self.n];
            let mut queue = VecDeque::from([1usize]);
            seen[0] = true;
            let mut count = 1;
            while let Some(u) = queue.pop_front() {
                for &w in &adj[u - 1] {
                    if !seen[w - 1] {
                        seen[w - 1] = true;
                        count += 1;
                        queue.push_back(w);
                    }
                }
            }
            count == self.n
        };
        reach(&self.out_nbrs) && reach(&self.in_nbrs)
    }

    /// Edge-list text: header `digraph n=<n>` then one `j i` pair per line.
    pub fn to_edge_list_text(&self) -> String {
        let mut s = format!("digraph n={}\n", self.n);
        for (j, i) in self.edges() {
            let _ = writeln!(s, "{j} {i}");
        }
        s
    }

    pub fn parse_edge_list_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| invalid("empty edge list"))?;
        let n: usize = header
            .strip_prefix("digraph n=")
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| invalid(format!("bad header {header:?}, expected `digraph n=<n>`")))?;
        let mut edges = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let mut parts = line.split_whitespace();
            let parsed = (|| {
                let j: usize = parts.next()?.parse().ok()?;
                let i: usize = parts.next()?.parse().ok()?;
                parts.next().is_none().then_some((j, i))
            })();
            edges.push(parsed.ok_or_else(|| {
                invalid(format!("edge line {}: {line:?} is not `j i`", lineno + 2))
            })?);
        }
        Self::new(n, edges)
    }
}
