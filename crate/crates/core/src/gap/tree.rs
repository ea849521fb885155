//! Local distributions `m_S` from radius-`d` balls of a high-girth instance.
//!
//! When the ball `B(S)` is a forest, each component carries the tree measure
//! `prod_C U_C(beta|_C) / prod_x p_x(beta_x)^(deg(x) - 1)`, which is what the
//! breadth-first sampling process produces from any start and any traversal
//! order. `m_S` is its marginal on `S`, computed exactly by clamped
//! leaf-to-root elimination.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use num_traits::{One, Zero};
use rand::Rng as _;

use super::girth::ConstraintGraph;
use crate::rational::{to_f64, Q};
use crate::relax::{CspInstance, LocalDistributionFamily};
use crate::rng::Rng;
use crate::{Error, Result};

/// Instance plus smoothed per-constraint distributions and per-variable biases.
#[derive(Clone, Debug)]
pub struct TreeContext {
    pub phi: CspInstance,
    pub graph: ConstraintGraph,
    /// `U_C` over `S_C` (sorted support), dense.
    pub u: Vec<Vec<Q>>,
    pub supports: Vec<Vec<usize>>,
    /// `P(x_v = +1)` for every variable.
    pub p_plus: Vec<Q>,
    pub d_ball: usize,
    /// Enforce `|S| < girth / D^d` in addition to the forest check.
    pub strict_size: bool,
}

/// Variables and constraints of `B^(d)(S)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Ball {
    pub vars: BTreeSet<usize>,
    pub constraints: BTreeSet<usize>,
}

impl TreeContext {
    pub fn new(phi: CspInstance, u: Vec<Vec<Q>>, p_plus: Vec<Q>, d_ball: usize) -> Result<Self> {
        if d_ball % 2 != 0 {
            return Err(Error::Invalid(format!("ball radius {d_ball} must be even")));
        }
        if u.len() != phi.m() || p_plus.len() != phi.n {
            return Err(Error::Dimension("tree context sizes differ from the instance".into()));
        }
        let supports: Vec<Vec<usize>> = phi.constraints.iter().map(|c| c.support()).collect();
        for (i, (s, d)) in supports.iter().zip(&u).enumerate() {
            if d.len() != 1 << s.len() {
                return Err(Error::Dimension(format!("U_C for constraint {i} has the wrong size")));
            }
        }
        let graph = ConstraintGraph::new(&phi);
        Ok(Self { phi, graph, u, supports, p_plus, d_ball, strict_size: false })
    }

    fn p(&self, v: usize, a: usize) -> Q {
        if a == 0 {
            self.p_plus[v].clone()
        } else {
            Q::one() - &self.p_plus[v]
        }
    }

    pub fn ball(&self, s: &[usize]) -> Ball {
        let n = self.phi.n;
        let mut dist: BTreeMap<usize, usize> = s.iter().map(|&v| (v, 0)).collect();
        let mut queue: VecDeque<usize> = s.iter().copied().collect();
        while let Some(x) = queue.pop_front() {
            let dx = dist[&x];
            if dx == self.d_ball {
                continue;
            }
            for w in self.graph.neighbors(x) {
                if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(w) {
                    e.insert(dx + 1);
                    queue.push_back(w);
                }
            }
        }
        let vars = dist.keys().copied().filter(|&x| x < n).collect();
        let constraints = dist.keys().copied().filter(|&x| x >= n).map(|x| x - n).collect();
        Ball { vars, constraints }
    }

    /// Checks that `B(S)` is a forest (edges = vertices - components) and,
    /// when strict, the size condition `|S| < g / D^d`.
    pub fn check_ball(&self, s: &[usize], ball: &Ball) -> Result<()> {
        let edges: usize = ball.constraints.iter().map(|&c| self.phi.constraints[c].vars.len()).sum();
        let vertices = ball.vars.len() + ball.constraints.len();
        let comps = self.components(ball).len();
        if edges + comps != vertices {
            return Err(Error::NotForest { subset: s.to_vec() });
        }
        if self.strict_size {
            let stats = self.graph.stats();
            let degree = stats.max_variable_degree.max(1);
            let girth = stats.girth.unwrap_or(usize::MAX);
            let bound = girth as f64 / (degree as f64).powi(self.d_ball as i32);
            if s.len() as f64 >= bound {
                return Err(Error::SubsetTooLarge { subset: s.to_vec(), girth, degree });
            }
        }
        Ok(())
    }

    /// Connected components of the ball, as node lists (variables `< n`).
    fn components(&self, ball: &Ball) -> Vec<Vec<usize>> {
        let n = self.phi.n;
        let inside = |x: usize| if x < n { ball.vars.contains(&x) } else { ball.constraints.contains(&(x - n)) };
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        let nodes = ball.vars.iter().copied().chain(ball.constraints.iter().map(|c| c + n));
        for start in nodes {
            if !seen.insert(start) {
                continue;
            }
            let mut comp = vec![start];
            let mut stack = vec![start];
            while let Some(x) = stack.pop() {
                for w in self.graph.neighbors(x) {
                    if inside(w) && seen.insert(w) {
                        comp.push(w);
                        stack.push(w);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    /// `m_S` with the default variable order.
    pub fn local_distribution(&self, s: &[usize]) -> Result<Vec<Q>> {
        let order: Vec<usize> = (0..self.phi.n).collect();
        self.local_distribution_ordered(s, &order)
    }

    /// `m_S` where `order[v]` ranks variable `v`: each component is rooted at
    /// its least `S`-variable and children are visited in rank order.
    pub fn local_distribution_ordered(&self, s: &[usize], order: &[usize]) -> Result<Vec<Q>> {
        if s.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(format!("subset {s:?} is not sorted and distinct")));
        }
        if let Some(&v) = s.iter().find(|&&v| v >= self.phi.n) {
            return Err(Error::OutOfRange(format!("variable {v}")));
        }
        let ball = self.ball(s);
        self.check_ball(s, &ball)?;
        let n = self.phi.n;
        let mut out = vec![Q::one(); 1 << s.len()];
        for comp in self.components(&ball) {
            let in_s: Vec<usize> = {
                let mut v: Vec<usize> = comp.iter().copied().filter(|&x| x < n && s.binary_search(&x).is_ok()).collect();
                v.sort_by_key(|&x| order[x]);
                v
            };
            if in_s.is_empty() {
                continue;
            }
            let tree = RootedTree::build(self, &ball, in_s[0], order);
            let pos: Vec<usize> = in_s.iter().map(|v| s.binary_search(v).unwrap()).collect();
            for beta in 0..1usize << in_s.len() {
                let clamp: BTreeMap<usize, usize> = in_s.iter().enumerate().map(|(i, &v)| (v, (beta >> i) & 1)).collect();
                let z = tree.partition(self, &clamp);
                for (alpha, slot) in out.iter_mut().enumerate() {
                    let matches = pos.iter().enumerate().all(|(i, &p)| (alpha >> p) & 1 == (beta >> i) & 1);
                    if matches {
                        *slot *= &z;
                    }
                }
            }
        }
        Ok(out)
    }

    /// One draw of the breadth-first process restricted to `S`.
    pub fn sample_bfs(&self, s: &[usize], rng: &mut Rng) -> Result<usize> {
        let ball = self.ball(s);
        self.check_ball(s, &ball)?;
        let n = self.phi.n;
        let mut value: BTreeMap<usize, usize> = BTreeMap::new();
        for comp in self.components(&ball) {
            let Some(&root) = comp.iter().filter(|&&x| x < n && s.binary_search(&x).is_ok()).min() else {
                continue;
            };
            let pr = to_f64(&self.p_plus[root]);
            value.insert(root, usize::from(rng.random::<f64>() >= pr));
            let mut queue = VecDeque::from([root]);
            let mut visited: BTreeSet<usize> = BTreeSet::from([root]);
            while let Some(x) = queue.pop_front() {
                let mut next: Vec<usize> =
                    self.graph.neighbors(x).filter(|&w| w >= n && ball.constraints.contains(&(w - n))).collect();
                next.sort_unstable();
                next.dedup();
                for cnode in next {
                    if !visited.insert(cnode) {
                        continue;
                    }
                    let c = cnode - n;
                    let sc = &self.supports[c];
                    let px = sc.binary_search(&x).unwrap();
                    let a = value[&x];
                    let cond: Vec<(usize, f64)> = self.u[c]
                        .iter()
                        .enumerate()
                        .filter(|(alpha, _)| (alpha >> px) & 1 == a)
                        .map(|(alpha, p)| (alpha, to_f64(p)))
                        .collect();
                    let total: f64 = cond.iter().map(|t| t.1).sum();
                    let mut r = rng.random::<f64>() * total;
                    let mut pick = cond.last().unwrap().0;
                    for (alpha, p) in &cond {
                        if r < *p {
                            pick = *alpha;
                            break;
                        }
                        r -= p;
                    }
                    for (i, &v) in sc.iter().enumerate() {
                        if v != x && visited.insert(v) {
                            value.insert(v, (pick >> i) & 1);
                            queue.push_back(v);
                        }
                    }
                }
            }
        }
        Ok(s.iter().enumerate().fold(0, |acc, (i, v)| acc | value.get(v).copied().unwrap_or(0) << i))
    }
}

struct RootedTree {
    root: usize,
    /// Constraint children of each variable node.
    var_children: BTreeMap<usize, Vec<usize>>,
    /// For each constraint: its parent variable and child variables.
    con: BTreeMap<usize, (usize, Vec<usize>)>,
}

impl RootedTree {
    fn build(ctx: &TreeContext, ball: &Ball, root: usize, order: &[usize]) -> Self {
        let n = ctx.phi.n;
        let mut var_children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        let mut con = BTreeMap::new();
        let mut seen_c = BTreeSet::new();
        let mut seen_v = BTreeSet::from([root]);
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            let mut cs: Vec<usize> = ctx
                .graph
                .neighbors(x)
                .filter(|&w| w >= n && ball.constraints.contains(&(w - n)))
                .map(|w| w - n)
                .filter(|c| !seen_c.contains(c))
                .collect();
            cs.sort_by_key(|&c| ctx.supports[c].iter().map(|&v| order[v]).min());
            cs.dedup();
            for &c in &cs {
                seen_c.insert(c);
                let mut kids: Vec<usize> = ctx.supports[c].iter().copied().filter(|&v| v != x).collect();
                kids.sort_by_key(|&v| order[v]);
                for &v in &kids {
                    seen_v.insert(v);
                    queue.push_back(v);
                }
                con.insert(c, (x, kids));
            }
            var_children.insert(x, cs);
        }
        Self { root, var_children, con }
    }

    fn var_message(&self, ctx: &TreeContext, v: usize, clamp: &BTreeMap<usize, usize>) -> [Q; 2] {
        let mut msg = [Q::one(), Q::one()];
        if let Some(&a) = clamp.get(&v) {
            msg[1 - a] = Q::zero();
        }
        for &c in self.var_children.get(&v).map(Vec::as_slice).unwrap_or(&[]) {
            let m = self.con_message(ctx, c, clamp);
            for a in 0..2 {
                if !msg[a].is_zero() {
                    msg[a] *= &m[a];
                }
            }
        }
        msg
    }

    /// `sum over the rest of C of U_C(alpha | parent = a) * prod child messages`.
    fn con_message(&self, ctx: &TreeContext, c: usize, clamp: &BTreeMap<usize, usize>) -> [Q; 2] {
        let (parent, kids) = &self.con[&c];
        let sc = &ctx.supports[c];
        let pp = sc.binary_search(parent).unwrap();
        let kid_msgs: Vec<(usize, [Q; 2])> =
            kids.iter().map(|&v| (sc.binary_search(&v).unwrap(), self.var_message(ctx, v, clamp))).collect();
        let mut out = [Q::zero(), Q::zero()];
        for (alpha, p) in ctx.u[c].iter().enumerate() {
            if p.is_zero() {
                continue;
            }
            let mut term = p.clone();
            for (pos, m) in &kid_msgs {
                term *= &m[(alpha >> pos) & 1];
                if term.is_zero() {
                    break;
                }
            }
            out[(alpha >> pp) & 1] += term;
        }
        for (a, o) in out.iter_mut().enumerate() {
            let pa = ctx.p(*parent, a);
            if !o.is_zero() {
                *o /= pa;
            }
        }
        out
    }

    fn partition(&self, ctx: &TreeContext, clamp: &BTreeMap<usize, usize>) -> Q {
        let msg = self.var_message(ctx, self.root, clamp);
        ctx.p(self.root, 0) * &msg[0] + ctx.p(self.root, 1) * &msg[1]
    }
}

/// `m_S` for every requested subset, collected into a family.
pub fn assemble_family(ctx: &TreeContext, subsets: &[Vec<usize>], r: usize) -> Result<LocalDistributionFamily> {
    use rayon::prelude::*;
    let dists: Vec<(Vec<usize>, Vec<Q>)> = subsets
        .par_iter()
        .map(|s| Ok((s.clone(), ctx.local_distribution(s)?)))
        .collect::<Result<_>>()?;
    let mut fam = LocalDistributionFamily::new(r);
    for (s, d) in dists {
        fam.insert(s, d)?;
    }
    Ok(fam)
}
