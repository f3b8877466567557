//! Static 3-D k-d tree for exact nearest-neighbour distance queries.

/// Ranges at or below this size are scanned linearly.
const LEAF_SIZE: usize = 8;

/// Squared Euclidean distance.
#[inline]
pub fn squared_distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Balanced tree stored implicitly: every range `[lo, hi)` larger than a
/// leaf has its splitting point at `mid = (lo + hi) / 2`, with smaller
/// coordinates on the left along `split_axis[mid]`.
pub struct KdTree {
    points: Vec<[f64; 3]>,
    split_axis: Vec<u8>,
}

impl KdTree {
    pub fn new(points: &[[f64; 3]]) -> Self {
        let mut points = points.to_vec();
        let mut split_axis = vec![0u8; points.len()];
        build(&mut points, &mut split_axis, 0);
        Self { points, split_axis }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Squared distance from `query` to its nearest stored point, or `None`
    /// when the tree is empty.
    pub fn nearest_squared(&self, query: &[f64; 3]) -> Option<f64> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        self.search(0, self.points.len(), query, &mut best);
        Some(best)
    }

    pub fn nearest_distance(&self, query: &[f64; 3]) -> Option<f64> {
        self.nearest_squared(query).map(f64::sqrt)
    }

    fn search(&self, lo: usize, hi: usize, q: &[f64; 3], best: &mut f64) {
        if hi - lo <= LEAF_SIZE {
            for p in &self.points[lo..hi] {
                let d = squared_distance(p, q);
                if d < *best {
                    *best = d;
                }
            }
            return;
        }
        let mid = (lo + hi) / 2;
        let axis = self.split_axis[mid] as usize;
        let pivot = &self.points[mid];
        let d = squared_distance(pivot, q);
        if d < *best {
            *best = d;
        }
        let delta = q[axis] - pivot[axis];
        let (near, far) = if delta < 0.0 { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(near.0, near.1, q, best);
        if delta * delta <= *best {
            self.search(far.0, far.1, q, best);
        }
    }
}

fn build(points: &mut [[f64; 3]], axes: &mut [u8], depth: usize) {
    let n = points.len();
    if n <= LEAF_SIZE {
        return;
    }
    let axis = widest_axis(points).unwrap_or(depth % 3);
    let mid = n / 2;
    points.select_nth_unstable_by(mid, |a, b| a[axis].total_cmp(&b[axis]));
    axes[mid] = axis as u8;
    let (left, rest) = points.split_at_mut(mid);
    let (left_axes, rest_axes) = axes.split_at_mut(mid);
    build(left, left_axes, depth + 1);
    build(&mut rest[1..], &mut rest_axes[1..], depth + 1);
}

fn widest_axis(points: &[[f64; 3]]) -> Option<usize> {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (0..3).max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
}
