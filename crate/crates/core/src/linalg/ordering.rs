//! Nested-dissection orderings producing a separator tree.
//!
//! Grid-structured matrices (with coordinates) are split geometrically along
//! grid lines; general graphs fall back to level-structure bisection. In both
//! cases every vertex adjacent to a subtree lies in that subtree or in one of
//! its ancestors, which is what the multifrontal factorization relies on.

use std::collections::VecDeque;

/// Fronts at or below this many variables are eliminated as one dense block.
const LEAF_SIZE: usize = 48;

#[derive(Clone, Debug)]
pub struct Supernode {
    /// Original variable indices, in elimination order.
    pub vars: Vec<usize>,
    pub children: Vec<usize>,
    pub parent: Option<usize>,
}

/// Separator tree in postorder (children before parents) together with the
/// induced permutation.
#[derive(Clone, Debug)]
pub struct SeparatorTree {
    pub nodes: Vec<Supernode>,
    /// `perm[position] = original index`
    pub perm: Vec<usize>,
    /// `iperm[original index] = position`
    pub iperm: Vec<usize>,
    /// Elimination position of each node's first variable.
    pub first: Vec<usize>,
}

impl SeparatorTree {
    fn from_nodes(nodes: Vec<Supernode>, dim: usize) -> Self {
        let mut perm = Vec::with_capacity(dim);
        let mut first = Vec::with_capacity(nodes.len());
        for node in &nodes {
            first.push(perm.len());
            perm.extend_from_slice(&node.vars);
        }
        assert_eq!(perm.len(), dim, "ordering must cover every variable exactly once");
        let mut iperm = vec![usize::MAX; dim];
        for (p, &v) in perm.iter().enumerate() {
            debug_assert_eq!(iperm[v], usize::MAX);
            iperm[v] = p;
        }
        Self { nodes, perm, iperm, first }
    }
}

fn push_node(nodes: &mut Vec<Supernode>, vars: Vec<usize>, children: Vec<usize>) -> usize {
    let id = nodes.len();
    for &c in &children {
        nodes[c].parent = Some(id);
    }
    nodes.push(Supernode { vars, children, parent: None });
    id
}

/// Geometric nested dissection for variables living on integer grid points.
pub fn grid_nested_dissection(coords: &[[i32; 2]]) -> SeparatorTree {
    let dim = coords.len();
    if dim == 0 {
        return SeparatorTree::from_nodes(Vec::new(), 0);
    }
    let (mut i0, mut j0, mut i1, mut j1) = (i32::MAX, i32::MAX, i32::MIN, i32::MIN);
    for c in coords {
        i0 = i0.min(c[0]);
        i1 = i1.max(c[0]);
        j0 = j0.min(c[1]);
        j1 = j1.max(c[1]);
    }
    let w = (i1 - i0 + 1) as usize;
    let h = (j1 - j0 + 1) as usize;
    let mut cell = vec![usize::MAX; w * h];
    for (v, c) in coords.iter().enumerate() {
        let idx = (c[0] - i0) as usize + w * (c[1] - j0) as usize;
        assert_eq!(cell[idx], usize::MAX, "duplicate grid coordinate");
        cell[idx] = v;
    }
    // Summed-area table of occupancy for O(1) counts per rectangle.
    let mut sat = vec![0usize; (w + 1) * (h + 1)];
    for j in 0..h {
        for i in 0..w {
            let occ = usize::from(cell[i + w * j] != usize::MAX);
            sat[(i + 1) + (w + 1) * (j + 1)] =
                occ + sat[i + (w + 1) * (j + 1)] + sat[(i + 1) + (w + 1) * j] - sat[i + (w + 1) * j];
        }
    }
    let grid = Grid { w, cell, sat };
    let mut nodes = Vec::new();
    grid.dissect(0, w, 0, h, &mut nodes);
    SeparatorTree::from_nodes(nodes, dim)
}

struct Grid {
    w: usize,
    cell: Vec<usize>,
    sat: Vec<usize>,
}

impl Grid {
    fn count(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> usize {
        let s = |i: usize, j: usize| self.sat[i + (self.w + 1) * j];
        s(i1, j1) + s(i0, j0) - s(i0, j1) - s(i1, j0)
    }

    fn collect(&self, i0: usize, i1: usize, j0: usize, j1: usize) -> Vec<usize> {
        let mut out = Vec::new();
        for j in j0..j1 {
            for i in i0..i1 {
                let v = self.cell[i + self.w * j];
                if v != usize::MAX {
                    out.push(v);
                }
            }
        }
        out
    }

    /// Returns the roots of the forest built for the rectangle `[i0,i1) x [j0,j1)`.
    fn dissect(&self, i0: usize, i1: usize, j0: usize, j1: usize, nodes: &mut Vec<Supernode>) -> Vec<usize> {
        let n = self.count(i0, i1, j0, j1);
        if n == 0 {
            return Vec::new();
        }
        let (wd, ht) = (i1 - i0, j1 - j0);
        if n <= LEAF_SIZE || (wd < 3 && ht < 3) {
            let vars = self.collect(i0, i1, j0, j1);
            return vec![push_node(nodes, vars, Vec::new())];
        }
        let (a, b, sep) = if wd >= ht {
            let mid = i0 + wd / 2;
            (
                self.dissect(i0, mid, j0, j1, nodes),
                self.dissect(mid + 1, i1, j0, j1, nodes),
                self.collect(mid, mid + 1, j0, j1),
            )
        } else {
            let mid = j0 + ht / 2;
            (
                self.dissect(i0, i1, j0, mid, nodes),
                self.dissect(i0, i1, mid + 1, j1, nodes),
                self.collect(i0, i1, mid, mid + 1),
            )
        };
        let mut children = a;
        children.extend(b);
        if sep.is_empty() {
            children
        } else {
            vec![push_node(nodes, sep, children)]
        }
    }
}

/// Level-structure nested dissection for a general symmetric pattern in
/// CSR form (`row_ptr`, `col_idx`), diagonal excluded.
pub fn graph_nested_dissection(row_ptr: &[usize], col_idx: &[usize]) -> SeparatorTree {
    let dim = row_ptr.len().saturating_sub(1);
    let mut nodes = Vec::new();
    let mut ctx = GraphCtx { row_ptr, col_idx, owner: vec![0; dim], next_tag: 1, level: vec![usize::MAX; dim] };
    ctx.dissect((0..dim).collect(), &mut nodes);
    SeparatorTree::from_nodes(nodes, dim)
}

struct GraphCtx<'a> {
    row_ptr: &'a [usize],
    col_idx: &'a [usize],
    owner: Vec<usize>,
    next_tag: usize,
    level: Vec<usize>,
}

impl GraphCtx<'_> {
    fn tag(&mut self, set: &[usize]) -> usize {
        let t = self.next_tag;
        self.next_tag += 1;
        for &v in set {
            self.owner[v] = t;
        }
        t
    }

    /// BFS inside the tagged set; returns vertices grouped by level.
    fn levels_from(&mut self, start: usize, tag: usize) -> Vec<Vec<usize>> {
        let mut levels: Vec<Vec<usize>> = Vec::new();
        let mut queue = VecDeque::new();
        let mut seen = Vec::new();
        self.level[start] = 0;
        seen.push(start);
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            let l = self.level[v];
            if levels.len() <= l {
                levels.push(Vec::new());
            }
            levels[l].push(v);
            for &u in &self.col_idx[self.row_ptr[v]..self.row_ptr[v + 1]] {
                if self.owner[u] == tag && self.level[u] == usize::MAX {
                    self.level[u] = l + 1;
                    seen.push(u);
                    queue.push_back(u);
                }
            }
        }
        for v in seen {
            self.level[v] = usize::MAX;
        }
        levels
    }

    fn dissect(&mut self, set: Vec<usize>, nodes: &mut Vec<Supernode>) -> Vec<usize> {
        if set.is_empty() {
            return Vec::new();
        }
        if set.len() <= LEAF_SIZE {
            return vec![push_node(nodes, set, Vec::new())];
        }
        let tag = self.tag(&set);
        let levels = self.levels_from(set[0], tag);
        let reached: usize = levels.iter().map(Vec::len).sum();
        if reached < set.len() {
            // Disconnected: split off the component containing set[0].
            let comp: Vec<usize> = levels.concat();
            let comp_tag = self.tag(&comp);
            let rest: Vec<usize> = set.iter().copied().filter(|&v| self.owner[v] != comp_tag).collect();
            let mut roots = self.dissect(comp, nodes);
            roots.extend(self.dissect(rest, nodes));
            return roots;
        }
        // Pseudo-peripheral start: restart from a vertex in the last level.
        let far = *levels.last().unwrap().first().unwrap();
        let levels = self.levels_from(far, tag);
        if levels.len() < 3 {
            return vec![push_node(nodes, set, Vec::new())];
        }
        let mid = levels.len() / 2;
        let before: Vec<usize> = levels[..mid].concat();
        let after: Vec<usize> = levels[mid + 1..].concat();
        let sep = levels[mid].clone();
        let mut children = self.dissect(before, nodes);
        children.extend(self.dissect(after, nodes));
        vec![push_node(nodes, sep, children)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_separation(tree: &SeparatorTree, adj: &[Vec<usize>]) {
        // Every neighbour of a node's variable is either in the same node or
        // eliminated later in an ancestor, or earlier in a descendant.
        let mut node_of = vec![0usize; tree.perm.len()];
        for (id, n) in tree.nodes.iter().enumerate() {
            for &v in &n.vars {
                node_of[v] = id;
            }
        }
        let is_ancestor = |a: usize, mut b: usize| loop {
            if a == b {
                return true;
            }
            match tree.nodes[b].parent {
                Some(p) => b = p,
                None => return false,
            }
        };
        for (v, ns) in adj.iter().enumerate() {
            for &u in ns {
                let (a, b) = (node_of[v], node_of[u]);
                assert!(is_ancestor(a, b) || is_ancestor(b, a), "edge {v}-{u} crosses subtrees");
            }
        }
        for (id, n) in tree.nodes.iter().enumerate() {
            for &c in &n.children {
                assert!(c < id, "children must precede parents");
            }
        }
    }

    fn grid_adj(w: i32, h: i32, keep: impl Fn(i32, i32) -> bool) -> (Vec<[i32; 2]>, Vec<Vec<usize>>) {
        let mut coords = Vec::new();
        let mut index = std::collections::HashMap::new();
        for j in 0..h {
            for i in 0..w {
                if keep(i, j) {
                    index.insert((i, j), coords.len());
                    coords.push([i, j]);
                }
            }
        }
        let adj = coords
            .iter()
            .map(|c| {
                [(1, 0), (-1, 0), (0, 1), (0, -1)]
                    .iter()
                    .filter_map(|d| index.get(&(c[0] + d.0, c[1] + d.1)).copied())
                    .collect()
            })
            .collect();
        (coords, adj)
    }

    #[test]
    fn grid_dissection_separates_subtrees() {
        let (coords, adj) = grid_adj(37, 29, |_, _| true);
        let tree = grid_nested_dissection(&coords);
        assert_eq!(tree.perm.len(), 37 * 29);
        check_separation(&tree, &adj);
    }

    #[test]
    fn masked_grid_dissection_separates_subtrees() {
        let (coords, adj) = grid_adj(40, 40, |i, j| (i - 20) * (i - 20) + (j - 20) * (j - 20) > 36 && (i + j) % 7 != 0);
        let tree = grid_nested_dissection(&coords);
        check_separation(&tree, &adj);
    }

    #[test]
    fn graph_dissection_separates_subtrees() {
        let (_, adj) = grid_adj(30, 25, |i, j| !(i == 10 && j < 20));
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        for ns in &adj {
            col_idx.extend_from_slice(ns);
            row_ptr.push(col_idx.len());
        }
        let tree = graph_nested_dissection(&row_ptr, &col_idx);
        check_separation(&tree, &adj);
        assert_eq!(tree.perm.len(), adj.len());
    }
}
