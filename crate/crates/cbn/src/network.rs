//! Branching network graphs and the degeneracy classification of initial
//! points.
//!
//! A catalytic branching network is a directed graph on vertices `1..=d`
//! where an edge `(i, j)` means vertex `i` catalyses the branching of
//! vertex `j`.  For an initial point `x0` the vertices split into three
//! groups: reactants all of whose catalysts vanish (`N_R`), those vanishing
//! catalysts (`N_C`), and everything else (`N_2`).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Directed catalyst -> reactant graph on vertices `1..=d`.
///
/// Immutable after construction; derived sets are precomputed with a
/// deterministic (sorted) ordering.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchingNetwork {
    d: usize,
    /// Sorted edge list, each edge an ordered pair (catalyst, reactant).
    edges: Vec<(usize, usize)>,
    /// `catalysts[j-1]` is C_j, the catalysts of vertex j (sorted).
    catalysts: Vec<Vec<usize>>,
    /// `reactants[i-1]` is R_i, the reactants of vertex i (sorted).
    reactants: Vec<Vec<usize>>,
}

impl BranchingNetwork {
    /// Build a network from a vertex count and edge list.
    ///
    /// Rejects self-loops and out-of-range endpoints.  Duplicate edges are
    /// collapsed.
    pub fn new(d: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        assert!(d >= 1, "vertex count must be at least 1");
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            for v in [i, j] {
                if v < 1 || v > d {
                    return Err(Error::OutOfRange(v, d));
                }
            }
            set.insert((i, j));
        }
        let mut catalysts = vec![Vec::new(); d];
        let mut reactants = vec![Vec::new(); d];
        for &(i, j) in &set {
            catalysts[j - 1].push(i);
            reactants[i - 1].push(j);
        }
        for v in catalysts.iter_mut().chain(reactants.iter_mut()) {
            v.sort_unstable();
        }
        Ok(Self {
            d,
            edges: set.into_iter().collect(),
            catalysts,
            reactants,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// C_j: the catalysts feeding vertex `j`.  Empty iff `j` is not a reactant.
    pub fn catalysts_of(&self, j: usize) -> &[usize] {
        &self.catalysts[j - 1]
    }

    /// R_i: the reactants fed by vertex `i`.  Empty iff `i` is not a catalyst.
    pub fn reactants_of(&self, i: usize) -> &[usize] {
        &self.reactants[i - 1]
    }

    pub fn is_reactant(&self, j: usize) -> bool {
        !self.catalysts[j - 1].is_empty()
    }

    pub fn is_catalyst(&self, i: usize) -> bool {
        !self.reactants[i - 1].is_empty()
    }

    /// C: all vertices that catalyse something.
    pub fn catalyst_set(&self) -> Vec<usize> {
        (1..=self.d).filter(|&i| self.is_catalyst(i)).collect()
    }

    /// R: all vertices with at least one catalyst.
    pub fn reactant_set(&self) -> Vec<usize> {
        (1..=self.d).filter(|&j| self.is_reactant(j)).collect()
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Catalyst mass feeding `j`: sum of `x_i` over `i` in C_j.
    pub fn catalyst_sum(&self, j: usize, x: &[f64]) -> f64 {
        self.catalysts_of(j).iter().map(|&i| x[i - 1]).sum()
    }

    /// Membership in the state space S: for every reactant j,
    /// catalyst mass plus own mass must be strictly positive.
    ///
    /// Exact comparison, no tolerance; inputs are exact user data.
    pub fn in_state_space(&self, x: &[f64]) -> Result<bool> {
        self.check_dim(x)?;
        Ok((1..=self.d)
            .filter(|&j| self.is_reactant(j))
            .all(|j| self.catalyst_sum(j, x) + x[j - 1] > 0.0))
    }

    /// Classify an initial point into the degeneracy structure N_R / N_C / N_2.
    pub fn classify_initial(&self, x0: &[f64]) -> Result<InitialClassification> {
        self.check_dim(x0)?;
        let n_r: Vec<usize> = (1..=self.d)
            .filter(|&j| self.is_reactant(j) && self.catalyst_sum(j, x0) == 0.0)
            .collect();
        let n_c_set: BTreeSet<usize> = n_r
            .iter()
            .flat_map(|&j| self.catalysts_of(j).iter().copied())
            .collect();
        let n_c: Vec<usize> = n_c_set.iter().copied().collect();
        let n_2: Vec<usize> = (1..=self.d)
            .filter(|v| !n_r.contains(v) && !n_c_set.contains(v))
            .collect();
        let rbar: Vec<Vec<usize>> = (1..=self.d)
            .map(|i| {
                self.reactants_of(i)
                    .iter()
                    .copied()
                    .filter(|j| n_r.contains(j))
                    .collect()
            })
            .collect();
        let zero: Vec<usize> = (1..=self.d).filter(|&i| x0[i - 1] == 0.0).collect();
        let in_s = self.in_state_space(x0)?;
        Ok(InitialClassification {
            x0: x0.to_vec(),
            n_r,
            n_c,
            n_2,
            rbar,
            zero,
            in_s,
        })
    }
}

/// Degeneracy structure of an initial point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialClassification {
    pub x0: Vec<f64>,
    /// Reactants whose catalyst mass vanishes at x0.
    pub n_r: Vec<usize>,
    /// The catalysts of the N_R vertices (all zero at x0).
    pub n_c: Vec<usize>,
    /// Everything else.
    pub n_2: Vec<usize>,
    /// `rbar[i-1]` is R_i intersected with N_R.
    pub rbar: Vec<Vec<usize>>,
    /// Z: coordinates vanishing at x0.
    pub zero: Vec<usize>,
    pub in_s: bool,
}

impl InitialClassification {
    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn in_n_r(&self, j: usize) -> bool {
        self.n_r.contains(&j)
    }

    /// N_C2 = N_C union N_2, the nonnegative coordinates of S0.
    pub fn n_c2(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.n_c.iter().chain(self.n_2.iter()).copied().collect();
        v.sort_unstable();
        v
    }

    pub fn rbar_of(&self, i: usize) -> &[usize] {
        &self.rbar[i - 1]
    }

    /// Membership in S0: coordinates outside N_R must be nonnegative;
    /// N_R coordinates are unconstrained.
    pub fn in_s0(&self, x: &[f64]) -> Result<bool> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok((1..=self.dim()).all(|i| self.in_n_r(i) || x[i - 1] >= 0.0))
    }
}
