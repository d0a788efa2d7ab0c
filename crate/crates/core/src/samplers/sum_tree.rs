/// Binary sum tree over nonnegative leaf priorities for O(log n)
/// proportional sampling.
///
/// Stored as an implicit heap: node 1 is the root, node `j` has children
/// `2j` and `2j + 1`, and leaf `i` lives at `leaves + i`. Parents are
/// recomputed from their children on every update, so each internal node is
/// exactly the floating-point sum of its two children.
#[derive(Clone, Debug)]
pub struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    /// A tree with at least `min_leaves` leaves (rounded up to a power of two).
    pub fn new(min_leaves: usize) -> Self {
        let leaves = min_leaves.max(1).next_power_of_two();
        Self { leaves, nodes: vec![0.0; 2 * leaves] }
    }

    pub fn capacity(&self) -> usize {
        self.leaves
    }

    pub fn total(&self) -> f64 {
        self.nodes[1]
    }

    pub fn get(&self, leaf: usize) -> f64 {
        self.nodes[self.leaves + leaf]
    }

    /// # Panics
    /// If `leaf` is outside the tree or `priority` is negative or NaN.
    pub fn update(&mut self, leaf: usize, priority: f64) {
        assert!(leaf < self.leaves, "leaf {leaf} out of range for {} leaves", self.leaves);
        assert!(priority >= 0.0, "priority must be nonnegative, got {priority}");
        let mut j = self.leaves + leaf;
        self.nodes[j] = priority;
        while j > 1 {
            j /= 2;
            self.nodes[j] = self.nodes[2 * j] + self.nodes[2 * j + 1];
        }
    }

    /// Leaf whose cumulative-priority interval contains `mass`. Never lands
    /// on a zero-priority leaf while the total is positive.
    pub fn find(&self, mass: f64) -> usize {
        let mut mass = mass.max(0.0);
        let mut j = 1;
        while j < self.leaves {
            let left = 2 * j;
            if mass >= self.nodes[left] && self.nodes[left + 1] > 0.0 {
                mass -= self.nodes[left];
                j = left + 1;
            } else {
                j = left;
            }
        }
        j - self.leaves
    }

    /// Every internal node equals the sum of its children.
    pub fn is_consistent(&self) -> bool {
        (1..self.leaves).all(|j| self.nodes[j] == self.nodes[2 * j] + self.nodes[2 * j + 1])
    }

    pub fn leaf_priorities(&self) -> &[f64] {
        &self.nodes[self.leaves..]
    }
}
