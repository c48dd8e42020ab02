use super::space::CoverSpace;
use super::tree::IndexTree;
use super::{TessellateError, Tessellation};
use crate::scalar::Scalar;

/// `table[c]`: least total measure of a cover using exactly `c` tiles.
type Table<M> = Vec<Option<M>>;

fn merge<M: Scalar>(a: &Table<M>, b: &Table<M>, k: usize) -> Table<M> {
    let mut out = vec![None; k + 1];
    for (i, x) in a.iter().enumerate() {
        let Some(x) = x else { continue };
        for (j, y) in b.iter().enumerate().take(k + 1 - i) {
            if let Some(y) = y {
                let v = *x + *y;
                if out[i + j].is_none_or(|o: M| v < o) {
                    out[i + j] = Some(v);
                }
            }
        }
    }
    out
}

struct Solver<'a, T, M> {
    tree: &'a IndexTree<T, M>,
    k: usize,
    best: Vec<Table<M>>,
    /// Whether the node itself is the best single-tile choice.
    take_self: Vec<bool>,
}

impl<T: Copy + Ord, M: Scalar> Solver<'_, T, M> {
    fn combine(&self, ids: &[usize]) -> Vec<Table<M>> {
        let mut prefix = Vec::with_capacity(ids.len() + 1);
        let mut acc: Table<M> = vec![None; self.k + 1];
        acc[0] = Some(M::zero());
        prefix.push(acc.clone());
        for &c in ids {
            acc = merge(&acc, &self.best[c], self.k);
            prefix.push(acc.clone());
        }
        prefix
    }

    fn solve(&mut self) {
        for id in (0..self.tree.nodes().len()).rev() {
            let n = self.tree.node(id);
            let mut table = if n.children.is_empty() {
                vec![None; self.k + 1]
            } else {
                self.combine(&n.children).pop().expect("non-empty prefix")
            };
            let own = n.measure;
            let take = table[1].is_none_or(|v| own <= v);
            if take {
                table[1] = Some(own);
            }
            self.take_self[id] = take;
            self.best[id] = table;
        }
    }

    fn pick(&self, ids: &[usize], count: usize, out: &mut Vec<T>) {
        let prefix = self.combine(ids);
        let mut c = count;
        for j in (0..ids.len()).rev() {
            let target = prefix[j + 1][c].expect("reachable count");
            let child = ids[j];
            let cj = (1..=c)
                .find(|&cj| match (prefix[j][c - cj], self.best[child][cj]) {
                    (Some(a), Some(b)) => a + b == target,
                    _ => false,
                })
                .expect("backtrack finds the split");
            self.expand(child, cj, out);
            c -= cj;
        }
    }

    fn expand(&self, id: usize, count: usize, out: &mut Vec<T>) {
        let n = self.tree.node(id);
        if count == 1 && self.take_self[id] {
            out.push(n.tile);
        } else {
            self.pick(&n.children, count, out);
        }
    }
}

/// Optimal disjoint cover with at most `k` tiles, by exact dynamic
/// programming over every tile that intersects the query. Instances whose
/// candidate tree exceeds `bound` nodes are rejected.
pub fn brute_force<C: CoverSpace>(
    space: &C,
    k: usize,
    bound: usize,
) -> Result<Tessellation<C::Tile, C::M>, TessellateError> {
    let tree = IndexTree::full_bounded(space, bound).ok_or(TessellateError::TooLarge { bound })?;
    let roots = tree.roots().to_vec();
    if roots.len() > k {
        return Ok(super::greedy::constrained(space, k));
    }
    let mut solver = Solver {
        tree: &tree,
        k,
        best: vec![Vec::new(); tree.nodes().len()],
        take_self: vec![false; tree.nodes().len()],
    };
    solver.solve();
    let all = solver.combine(&roots).pop().expect("non-empty prefix");
    let (count, total) = all
        .iter()
        .enumerate()
        .filter_map(|(c, v)| v.map(|v| (c, v)))
        .min_by(|a, b| a.1.partial_cmp(&b.1).expect("finite measures").then(a.0.cmp(&b.0)))
        .ok_or(TessellateError::TooLarge { bound })?;
    let mut tiles = Vec::with_capacity(count);
    solver.pick(&roots, count, &mut tiles);
    tiles.sort();
    Ok(Tessellation { tiles, stretch: total / tree.query_measure(), constraint_respected: true })
}

/// Number of distinct disjoint covers with at most `k` tiles.
pub fn count_covers<C: CoverSpace>(space: &C, k: usize, bound: usize) -> Result<u128, TessellateError> {
    let tree = IndexTree::full_bounded(space, bound).ok_or(TessellateError::TooLarge { bound })?;
    let conv = |a: &[u128], b: &[u128]| {
        let mut out = vec![0u128; k + 1];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate().take(k + 1 - i) {
                out[i + j] = out[i + j].saturating_add(x.saturating_mul(*y));
            }
        }
        out
    };
    let unit = {
        let mut u = vec![0u128; k + 1];
        u[0] = 1;
        u
    };
    let mut ways: Vec<Vec<u128>> = vec![Vec::new(); tree.nodes().len()];
    for id in (0..tree.nodes().len()).rev() {
        let n = tree.node(id);
        let mut w = if n.children.is_empty() {
            vec![0u128; k + 1]
        } else {
            n.children.iter().fold(unit.clone(), |acc, &c| conv(&acc, &ways[c]))
        };
        if k >= 1 {
            w[1] += 1;
        }
        ways[id] = w;
    }
    let total = tree.roots().iter().fold(unit.clone(), |acc, &r| conv(&acc, &ways[r]));
    Ok(total[1..].iter().sum())
}
