//! The constraint-variable bipartite multigraph: girth, degrees and greedy
//! pruning of short cycles. A variable repeated inside one constraint is a
//! pair of parallel edges, i.e. a cycle of length 2.

use std::collections::VecDeque;

use serde::Serialize;

use crate::relax::CspInstance;

/// Nodes `0..n` are variables, `n..n+m` are constraints; one edge per
/// constraint position.
#[derive(Clone, Debug)]
pub struct ConstraintGraph {
    pub n: usize,
    pub m: usize,
    adj: Vec<Vec<(usize, usize)>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GraphStats {
    pub max_variable_degree: usize,
    pub mean_variable_degree: f64,
    /// `None` when the graph is a forest.
    pub girth: Option<usize>,
}

impl ConstraintGraph {
    pub fn new(phi: &CspInstance) -> Self {
        Self::from_constraints(phi.n, phi.constraints.iter().map(|c| c.vars.as_slice()))
    }

    pub fn from_constraints<'a>(n: usize, cons: impl Iterator<Item = &'a [usize]>) -> Self {
        let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        let mut edge = 0;
        let mut m = 0;
        for vars in cons {
            let c = n + m;
            adj.push(Vec::new());
            for &v in vars {
                adj[v].push((c, edge));
                adj[c].push((v, edge));
                edge += 1;
            }
            m += 1;
        }
        Self { n, m, adj }
    }

    pub fn neighbors(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.adj[node].iter().map(|&(w, _)| w)
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adj[node].len()
    }

    pub fn max_variable_degree(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    pub fn stats(&self) -> GraphStats {
        let total: usize = (0..self.n).map(|v| self.degree(v)).sum();
        GraphStats {
            max_variable_degree: self.max_variable_degree(),
            mean_variable_degree: if self.n == 0 { 0.0 } else { total as f64 / self.n as f64 },
            girth: self.shortest_cycle(usize::MAX).map(|(len, _)| len),
        }
    }

    /// Shortest cycle of length at most `limit`, with the constraint indices
    /// on it. The minimum over BFS roots of `dist(u) + dist(w) + 1` across
    /// non-tree edges is the girth.
    pub fn shortest_cycle(&self, limit: usize) -> Option<(usize, Vec<usize>)> {
        let total = self.adj.len();
        let mut best: Option<(usize, Vec<usize>)> = None;
        let mut dist = vec![usize::MAX; total];
        let mut parent = vec![(usize::MAX, usize::MAX); total];
        for root in 0..total {
            let mut cap = best.as_ref().map_or(limit, |b| b.0.saturating_sub(1).min(limit));
            if cap < 2 {
                break;
            }
            let mut touched = vec![root];
            dist[root] = 0;
            let mut queue = VecDeque::from([root]);
            let mut found: Option<(usize, usize, usize)> = None;
            while let Some(u) = queue.pop_front() {
                // Any cycle closed from depth dist[u] has length at least 2 dist[u].
                if 2 * dist[u] > cap {
                    break;
                }
                for &(w, e) in &self.adj[u] {
                    if e == parent[u].1 {
                        continue;
                    }
                    if dist[w] == usize::MAX {
                        dist[w] = dist[u] + 1;
                        parent[w] = (u, e);
                        touched.push(w);
                        queue.push_back(w);
                    } else {
                        let len = dist[u] + dist[w] + 1;
                        if len <= cap {
                            found = Some((len, u, w));
                            cap = len - 1;
                        }
                    }
                }
            }
            if let Some((len, u, w)) = found {
                if best.as_ref().is_none_or(|b| len < b.0) {
                    // Read the two tree paths back to the root before resetting.
                    let mut cons = Vec::new();
                    for mut x in [u, w] {
                        loop {
                            if x >= self.n {
                                cons.push(x - self.n);
                            }
                            if x == root {
                                break;
                            }
                            x = parent[x].0;
                        }
                    }
                    cons.sort_unstable();
                    cons.dedup();
                    best = Some((len, cons));
                }
            }
            for &t in &touched {
                dist[t] = usize::MAX;
                parent[t] = (usize::MAX, usize::MAX);
            }
        }
        best
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PruneReport {
    /// Indices (into the input) of removed constraints, in removal order.
    pub removed: Vec<usize>,
    pub removed_fraction: f64,
    pub girth_after: Option<usize>,
}

/// Repeatedly finds a shortest cycle of length `<= g_target` and removes the
/// highest-index constraint on it, until the girth exceeds `g_target`.
pub fn prune_girth(phi: &CspInstance, g_target: usize) -> (CspInstance, PruneReport) {
    let mut keep: Vec<usize> = (0..phi.m()).collect();
    let mut removed = Vec::new();
    loop {
        let g = ConstraintGraph::from_constraints(phi.n, keep.iter().map(|&i| phi.constraints[i].vars.as_slice()));
        let Some((_, cons)) = g.shortest_cycle(g_target) else {
            let out = CspInstance {
                f: phi.f.clone(),
                n: phi.n,
                constraints: keep.iter().map(|&i| phi.constraints[i].clone()).collect(),
            };
            let report = PruneReport {
                removed_fraction: if phi.m() == 0 { 0.0 } else { removed.len() as f64 / phi.m() as f64 },
                removed,
                girth_after: g.shortest_cycle(usize::MAX).map(|(l, _)| l),
            };
            return (out, report);
        };
        let victim = *cons.iter().max().expect("a cycle passes through a constraint");
        removed.push(keep.remove(victim));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predicate::Predicate;
    use crate::relax::Constraint;

    fn inst(n: usize, cons: &[&[usize]]) -> CspInstance {
        let k = cons[0].len();
        let f = Predicate::parity(k);
        let cs = cons.iter().map(|v| Constraint { vars: v.to_vec(), signs: vec![1; k] }).collect();
        CspInstance::new(f, n, cs).unwrap()
    }

    #[test]
    fn four_cycle_removes_one() {
        let phi = inst(4, &[&[0, 1, 2], &[0, 1, 3]]);
        assert_eq!(ConstraintGraph::new(&phi).stats().girth, Some(4));
        let (out, rep) = prune_girth(&phi, 4);
        assert_eq!(out.m(), 1);
        assert_eq!(rep.removed, vec![1]);
        assert_eq!(rep.girth_after, None);
    }

    #[test]
    fn tree_needs_no_removal() {
        let phi = inst(7, &[&[0, 1, 2], &[2, 3, 4], &[4, 5, 6]]);
        let (out, rep) = prune_girth(&phi, 100);
        assert_eq!(out, phi);
        assert!(rep.removed.is_empty());
    }

    #[test]
    fn repeated_variable_is_a_two_cycle() {
        let phi = inst(3, &[&[0, 0, 1], &[1, 2, 2]]);
        assert_eq!(ConstraintGraph::new(&phi).stats().girth, Some(2));
        let (out, rep) = prune_girth(&phi, 2);
        assert_eq!(out.m(), 0);
        assert_eq!(rep.removed.len(), 2);
    }

    #[test]
    fn six_cycle_girth() {
        let phi = inst(6, &[&[0, 1, 3], &[1, 2, 4], &[2, 0, 5]]);
        assert_eq!(ConstraintGraph::new(&phi).stats().girth, Some(6));
        let (out, _) = prune_girth(&phi, 5);
        assert_eq!(out.m(), 3);
        let (out, _) = prune_girth(&phi, 6);
        assert_eq!(out.m(), 2);
    }
}
