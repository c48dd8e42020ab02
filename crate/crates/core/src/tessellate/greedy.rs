use std::collections::BTreeSet;

use super::space::CoverSpace;
use super::tree::{IndexTree, NodeState};
use super::Tessellation;
use crate::name::Name;
use crate::scalar::Scalar;

/// Tile-stretch quantized on a log scale, so that mathematically equal
/// stretches computed along different float paths still tie.
fn stretch_key<M: Scalar>(s: M) -> i64 {
    (s.as_f64().ln() * 1e9).round() as i64
}

type Candidate = (i64, Name, usize);

/// Greedy constrained tessellation over `space` with at most `k` tiles.
///
/// Starts from the minimum-stretch-and-tiles cover and repeatedly inserts
/// the cheapest internal tile at the shallowest level where one is
/// necessary, until the leaf count fits. Falls back to the level-0 cover
/// when even that exceeds `k`.
pub fn constrained<C: CoverSpace>(space: &C, k: usize) -> Tessellation<C::Tile, C::M> {
    let tree = IndexTree::reduced(space);
    let roots = tree.roots().len();
    if roots > k {
        return fallback(&tree);
    }
    reduce_to(tree, k, space).into_tessellation(true)
}

fn fallback<T: Copy + Ord, M: Scalar>(tree: &IndexTree<T, M>) -> Tessellation<T, M> {
    let mut tiles: Vec<T> = tree.roots().iter().map(|&r| tree.node(r).tile).collect();
    tiles.sort();
    let total = tree.roots().iter().fold(M::zero(), |a, &r| a + tree.node(r).measure);
    Tessellation { tiles, stretch: total / tree.query_measure(), constraint_respected: false }
}

/// Runs the greedy insertion on a tree whose root count is at most `k`.
pub fn reduce_to<C: CoverSpace>(
    mut tree: IndexTree<C::Tile, C::M>,
    k: usize,
    space: &C,
) -> IndexTree<C::Tile, C::M> {
    let levels = tree.levels() as usize;
    let mut leaves_at = vec![0usize; levels];
    let mut internal_at = vec![0usize; levels];
    let mut candidates: Vec<BTreeSet<Candidate>> = vec![BTreeSet::new(); levels];
    let key_of = |tree: &IndexTree<C::Tile, C::M>, id: usize| -> Candidate {
        let n = tree.node(id);
        (stretch_key(n.tile_stretch()), space.tie_key(&n.tile), id)
    };
    for (id, n) in tree.nodes().iter().enumerate() {
        let l = n.level as usize;
        match n.state {
            NodeState::Leaf => leaves_at[l] += 1,
            NodeState::Internal => {
                internal_at[l] += 1;
                candidates[l].insert(key_of(&tree, id));
            }
            NodeState::Removed => {}
        }
    }

    while leaves_at.iter().sum::<usize>() > k {
        let mut progressed = false;
        for i in 0..levels.saturating_sub(1) {
            let necessary = leaves_at[..=i + 1].iter().sum::<usize>() + internal_at[i + 1];
            if necessary <= k {
                continue;
            }
            let Some(best) = candidates[i].pop_first() else {
                continue;
            };
            let id = best.2;
            for (gone, before) in tree.collapse(id) {
                let l = tree.node(gone).level as usize;
                match before {
                    NodeState::Leaf => leaves_at[l] -= 1,
                    NodeState::Internal => {
                        internal_at[l] -= 1;
                        candidates[l].remove(&key_of(&tree, gone));
                    }
                    NodeState::Removed => {}
                }
            }
            internal_at[i] -= 1;
            leaves_at[i] += 1;
            progressed = true;
            break;
        }
        if !progressed {
            break;
        }
    }
    tree
}
