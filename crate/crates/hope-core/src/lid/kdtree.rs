//! Exact two-nearest-neighbor queries over a point cloud.
//!
//! A classic KD-tree over the cloud's full coordinate vector: nodes split
//! on the axis with the widest extent at the median, leaves hold a small
//! bucket that is scanned directly. Queries prune a branch only when the
//! splitting plane is provably no closer than the current second-best
//! distance, so the two distances returned are exactly the two smallest
//! in the cloud; no approximation is involved. Distances are computed by
//! the same [`sq_dist`] used by the brute-force reference, which keeps
//! the two paths bit-identical.

use super::PointCloud;

const LEAF_SIZE: usize = 24;

enum Node {
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        start: usize,
        end: usize,
    },
}

pub(crate) struct KdTree<'a> {
    cloud: &'a PointCloud,
    order: Vec<u32>,
    nodes: Vec<Node>,
    root: usize,
}

/// Squared Euclidean distance over the full coordinate vector.
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        let d = x - y;
        acc += d * d;
    }
    acc
}

impl<'a> KdTree<'a> {
    pub(crate) fn build(cloud: &'a PointCloud) -> Self {
        let mut order: Vec<u32> = (0..cloud.len() as u32).collect();
        let mut nodes = Vec::new();
        let root = Self::build_node(cloud, &mut order, 0, cloud.len(), &mut nodes);
        Self {
            cloud,
            order,
            nodes,
            root,
        }
    }

    fn build_node(
        cloud: &PointCloud,
        order: &mut [u32],
        start: usize,
        end: usize,
        nodes: &mut Vec<Node>,
    ) -> usize {
        let count = end - start;
        if count <= LEAF_SIZE {
            nodes.push(Node::Leaf { start, end });
            return nodes.len() - 1;
        }
        // Split on the widest axis; if every axis has zero extent the
        // bucket is all duplicates and becomes a leaf.
        let dim = cloud.dim();
        let mut best_axis = 0;
        let mut best_extent = -1.0;
        for axis in 0..dim {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &i in &order[start..end] {
                let v = cloud.point(i as usize)[axis];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            let extent = hi - lo;
            if extent > best_extent {
                best_extent = extent;
                best_axis = axis;
            }
        }
        if best_extent <= 0.0 {
            nodes.push(Node::Leaf { start, end });
            return nodes.len() - 1;
        }
        let mid = count / 2;
        order[start..end].select_nth_unstable_by(mid, |&a, &b| {
            cloud.point(a as usize)[best_axis].total_cmp(&cloud.point(b as usize)[best_axis])
        });
        let value = cloud.point(order[start + mid] as usize)[best_axis];
        let left = Self::build_node(cloud, order, start, start + mid, nodes);
        let right = Self::build_node(cloud, order, start + mid, end, nodes);
        nodes.push(Node::Split {
            axis: best_axis,
            value,
            left,
            right,
        });
        nodes.len() - 1
    }

    /// The two smallest squared distances from point `query` to any other
    /// point in the cloud, in ascending order.
    pub(crate) fn two_nearest_sq(&self, query: usize) -> (f64, f64) {
        let q = self.cloud.point(query);
        let mut best = (f64::INFINITY, f64::INFINITY);
        self.search(self.root, q, query, &mut best);
        best
    }

    fn search(&self, node: usize, q: &[f64], skip: usize, best: &mut (f64, f64)) {
        match &self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[*start..*end] {
                    let i = i as usize;
                    if i == skip {
                        continue;
                    }
                    let d = sq_dist(q, self.cloud.point(i));
                    if d < best.0 {
                        best.1 = best.0;
                        best.0 = d;
                    } else if d < best.1 {
                        best.1 = d;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let delta = q[*axis] - value;
                let (near, far) = if delta < 0.0 {
                    (*left, *right)
                } else {
                    (*right, *left)
                };
                self.search(near, q, skip, best);
                if delta * delta < best.1 {
                    self.search(far, q, skip, best);
                }
            }
        }
    }
}
