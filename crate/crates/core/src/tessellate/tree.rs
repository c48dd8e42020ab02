use super::space::CoverSpace;
use super::Tessellation;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeState {
    Leaf,
    Internal,
    Removed,
}

#[derive(Debug, Clone)]
pub struct Node<T, M> {
    pub tile: T,
    pub level: u8,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub measure: M,
    pub overlap: M,
    pub state: NodeState,
}

impl<T, M: Scalar> Node<T, M> {
    /// Tile measure over its overlap with the query.
    pub fn tile_stretch(&self) -> M {
        self.measure / self.overlap
    }
}

/// Arena tree of candidate tiles. Leaves form the current tessellation.
#[derive(Debug, Clone)]
pub struct IndexTree<T, M> {
    nodes: Vec<Node<T, M>>,
    roots: Vec<usize>,
    levels: u8,
    fanout: usize,
    query_measure: M,
}

impl<T: Copy + Ord, M: Scalar> IndexTree<T, M> {
    fn build<C>(space: &C, stop_at_filled: bool, limit: usize) -> Option<Self>
    where
        C: CoverSpace<Tile = T, M = M>,
    {
        let mut tree = IndexTree {
            nodes: Vec::new(),
            roots: Vec::new(),
            levels: space.levels(),
            fanout: space.fanout(),
            query_measure: space.query_measure(),
        };
        // breadth-first, so descendants always follow their ancestors
        let mut frontier: Vec<usize> = Vec::new();
        for t in space.roots() {
            let id = tree.push(space, t, None);
            tree.roots.push(id);
            frontier.push(id);
        }
        while !frontier.is_empty() {
            let mut next = Vec::new();
            for id in frontier {
                let tile = tree.nodes[id].tile;
                if stop_at_filled && space.filled(&tile) {
                    continue;
                }
                let kids = space.children(&tile);
                if kids.is_empty() {
                    continue;
                }
                tree.nodes[id].state = NodeState::Internal;
                if tree.nodes.len() + kids.len() > limit {
                    return None;
                }
                for k in kids {
                    let c = tree.push(space, k, Some(id));
                    tree.nodes[id].children.push(c);
                    next.push(c);
                }
            }
            frontier = next;
        }
        Some(tree)
    }

    fn push<C>(&mut self, space: &C, tile: T, parent: Option<usize>) -> usize
    where
        C: CoverSpace<Tile = T, M = M>,
    {
        self.nodes.push(Node {
            tile,
            level: space.level(&tile),
            parent,
            children: Vec::new(),
            measure: space.measure(&tile),
            overlap: space.overlap(&tile),
            state: NodeState::Leaf,
        });
        self.nodes.len() - 1
    }

    /// Every intersecting tile at every level; leaves are finest-level tiles.
    pub fn full<C: CoverSpace<Tile = T, M = M>>(space: &C) -> Self {
        Self::build(space, false, usize::MAX).expect("unbounded")
    }

    /// [`IndexTree::full`], or `None` once more than `limit` nodes would be needed.
    pub fn full_bounded<C: CoverSpace<Tile = T, M = M>>(space: &C, limit: usize) -> Option<Self> {
        Self::build(space, false, limit)
    }

    /// Tree of the minimum-stretch-and-tiles cover, built top-down by not
    /// descending into filled tiles.
    pub fn reduced<C: CoverSpace<Tile = T, M = M>>(space: &C) -> Self {
        Self::build(space, true, usize::MAX).expect("unbounded")
    }

    pub fn nodes(&self) -> &[Node<T, M>] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node<T, M> {
        &self.nodes[id]
    }

    pub fn roots(&self) -> &[usize] {
        &self.roots
    }

    pub fn levels(&self) -> u8 {
        self.levels
    }

    pub fn query_measure(&self) -> M {
        self.query_measure
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node<T, M>> {
        self.nodes.iter().filter(|n| n.state == NodeState::Leaf)
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Union measure of the leaves over the query measure.
    pub fn stretch(&self) -> M {
        let total = self.leaves().fold(M::zero(), |acc, n| acc + n.measure);
        total / self.query_measure
    }

    /// Marks `id` a leaf and removes everything below it. Returns the
    /// removed nodes with the state they had.
    pub fn collapse(&mut self, id: usize) -> Vec<(usize, NodeState)> {
        let mut removed = Vec::new();
        let mut stack: Vec<usize> = self.nodes[id].children.clone();
        while let Some(n) = stack.pop() {
            let before = self.nodes[n].state;
            if before == NodeState::Removed {
                continue;
            }
            self.nodes[n].state = NodeState::Removed;
            removed.push((n, before));
            stack.extend(self.nodes[n].children.iter().copied());
        }
        self.nodes[id].state = NodeState::Leaf;
        removed
    }

    /// Replaces every complete set of leaf siblings by their parent, bottom-up.
    pub fn mst_reduce(mut self) -> Self {
        for id in (0..self.nodes.len()).rev() {
            let n = &self.nodes[id];
            if n.state != NodeState::Internal || n.children.len() != self.fanout {
                continue;
            }
            if n.children.iter().all(|&c| self.nodes[c].state == NodeState::Leaf) {
                self.collapse(id);
            }
        }
        self
    }

    pub fn into_tessellation(self, constraint_respected: bool) -> Tessellation<T, M> {
        let stretch = self.stretch();
        let mut tiles: Vec<T> = self.leaves().map(|n| n.tile).collect();
        tiles.sort();
        Tessellation { tiles, stretch, constraint_respected }
    }
}
