use std::collections::BTreeSet;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Corner `index ∈ {0..3}` of vertex `vertex`, both 0-based, in the cyclic
/// order of the star product.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Corner {
    pub vertex: usize,
    pub index: usize,
}

impl Corner {
    pub fn new(vertex: usize, index: usize) -> Self {
        Self { vertex, index }
    }
}

/// A graph of quartic vertices: lines pair internal corners, the remaining
/// corners are external legs (amputated, at fixed positions).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeynmanGraph {
    n: usize,
    lines: Vec<(Corner, Corner)>,
    external: Vec<Corner>,
}

impl FeynmanGraph {
    pub fn new(n: usize, lines: Vec<(Corner, Corner)>, external: Vec<Corner>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Graph("a graph needs at least one vertex".into()));
        }
        let mut seen = BTreeSet::new();
        let mut claim = |c: Corner| -> Result<()> {
            if c.vertex >= n || c.index >= 4 {
                return Err(Error::Graph(format!(
                    "corner [{}, {}] out of range for {} vertices",
                    c.vertex, c.index, n
                )));
            }
            if !seen.insert(c) {
                return Err(Error::Graph(format!("corner [{}, {}] used twice", c.vertex, c.index)));
            }
            Ok(())
        };
        for &(a, b) in &lines {
            if a == b {
                return Err(Error::Graph(format!(
                    "line joins corner [{}, {}] to itself",
                    a.vertex, a.index
                )));
            }
            claim(a)?;
            claim(b)?;
        }
        for &e in &external {
            claim(e)?;
        }
        if seen.len() != 4 * n {
            return Err(Error::Graph(format!(
                "{} of {} corners are neither internal nor external",
                4 * n - seen.len(),
                4 * n
            )));
        }
        Ok(Self { n, lines, external })
    }

    /// One vertex with all four corners external.
    pub fn tree_vertex() -> Self {
        Self::new(1, vec![], (0..4).map(|i| Corner::new(0, i)).collect()).expect("valid graph")
    }

    /// One vertex, a line between the two middle corners, external legs on
    /// the outer corners.
    pub fn planar_tadpole() -> Self {
        Self::new(
            1,
            vec![(Corner::new(0, 1), Corner::new(0, 2))],
            vec![Corner::new(0, 0), Corner::new(0, 3)],
        )
        .expect("valid graph")
    }

    /// One vertex, a line between the second and fourth corners.
    pub fn non_planar_tadpole() -> Self {
        Self::new(
            1,
            vec![(Corner::new(0, 1), Corner::new(0, 3))],
            vec![Corner::new(0, 0), Corner::new(0, 2)],
        )
        .expect("valid graph")
    }

    /// Two vertices joined by two lines (`[0,1]–[1,1]`, `[0,2]–[1,2]`), four
    /// external legs.
    pub fn two_vertex_bubble() -> Self {
        Self::new(
            2,
            vec![
                (Corner::new(0, 1), Corner::new(1, 1)),
                (Corner::new(0, 2), Corner::new(1, 2)),
            ],
            vec![
                Corner::new(0, 0),
                Corner::new(0, 3),
                Corner::new(1, 0),
                Corner::new(1, 3),
            ],
        )
        .expect("valid graph")
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_lines(&self) -> usize {
        self.lines.len()
    }

    pub fn num_external(&self) -> usize {
        self.external.len()
    }

    pub fn lines(&self) -> &[(Corner, Corner)] {
        &self.lines
    }

    pub fn external(&self) -> &[Corner] {
        &self.external
    }

    pub fn is_internal(&self, c: Corner) -> bool {
        self.lines.iter().any(|&(a, b)| a == c || b == c)
    }

    /// Parses the JSON graph format; positions are optional.
    pub fn from_json(text: &str) -> Result<(Self, Option<Vec<DVector<f64>>>)> {
        let file: GraphFile =
            serde_json::from_str(text).map_err(|e| Error::Graph(format!("malformed graph file: {e}")))?;
        file.into_graph()
    }

    pub fn to_json(&self, positions: Option<&[DVector<f64>]>) -> String {
        let file = GraphFile {
            n: self.n,
            lines: self
                .lines
                .iter()
                .map(|(a, b)| [[a.vertex, a.index], [b.vertex, b.index]])
                .collect(),
            external: self.external.iter().map(|c| [c.vertex, c.index]).collect(),
            positions: positions.map(|p| p.iter().map(|x| x.iter().copied().collect()).collect()),
        };
        serde_json::to_string(&file).expect("graph serializes")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GraphFile {
    n: usize,
    lines: Vec<[[usize; 2]; 2]>,
    external: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    positions: Option<Vec<Vec<f64>>>,
}

impl GraphFile {
    fn into_graph(self) -> Result<(FeynmanGraph, Option<Vec<DVector<f64>>>)> {
        let corner = |c: [usize; 2]| Corner::new(c[0], c[1]);
        let graph = FeynmanGraph::new(
            self.n,
            self.lines.iter().map(|l| (corner(l[0]), corner(l[1]))).collect(),
            self.external.iter().copied().map(corner).collect(),
        )?;
        let positions = match self.positions {
            None => None,
            Some(p) => {
                if p.len() != graph.num_external() {
                    return Err(Error::Graph(format!(
                        "{} positions for {} external corners",
                        p.len(),
                        graph.num_external()
                    )));
                }
                Some(p.into_iter().map(DVector::from_vec).collect())
            }
        };
        Ok((graph, positions))
    }
}
