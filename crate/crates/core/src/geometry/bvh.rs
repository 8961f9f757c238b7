use super::{closest_point_on_triangle, intersect_triangle, Aabb, Triangle, Vec3};

const LEAF_SIZE: usize = 4;
const SAH_BINS: usize = 12;

#[derive(Debug, Clone)]
struct Node {
    bounds: Aabb,
    /// Leaf: first index into `order`; interior: index of the right child.
    start_or_right: u32,
    /// Triangle count for leaves, 0 for interior nodes.
    count: u32,
}

/// Bounding-volume hierarchy over a triangle slice (binned SAH build).
#[derive(Debug, Clone, Default)]
pub struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(tris: &[Triangle]) -> Self {
        if tris.is_empty() {
            return Self::default();
        }
        let bounds: Vec<Aabb> = tris.iter().map(|t| Aabb::from_points(t.v.iter())).collect();
        let centroids: Vec<Vec3> = bounds.iter().map(Aabb::centroid).collect();
        let mut order: Vec<u32> = (0..tris.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1);
        build_node(&mut nodes, &mut order, 0, tris.len(), &bounds, &centroids);
        Self { nodes, order }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn bounds(&self) -> Option<Aabb> {
        self.nodes.first().map(|n| n.bounds)
    }

    /// Nearest hit as `(t, local index)`. Equal distances resolve to the lower index.
    pub fn intersect(&self, tris: &[Triangle], origin: &Vec3, dir: &Vec3, t_min: f64, t_max: f64) -> Option<(f64, u32)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(f64, u32)> = None;
        let mut stack: Vec<u32> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            let limit = best.map_or(t_max, |b| b.0);
            let Some(entry) = node.bounds.ray_entry(origin, &inv, t_min, limit) else {
                continue;
            };
            if best.is_some_and(|b| entry > b.0) {
                continue;
            }
            if node.count > 0 {
                let s = node.start_or_right as usize;
                for &ti in &self.order[s..s + node.count as usize] {
                    let t = &tris[ti as usize];
                    if let Some(th) = intersect_triangle(origin, dir, &t.v[0], &t.e1, &t.e2, t_min, t_max) {
                        let better = match best {
                            None => true,
                            Some((bt, bi)) => th < bt || (th == bt && ti < bi),
                        };
                        if better {
                            best = Some((th, ti));
                        }
                    }
                }
            } else {
                stack.push(node.start_or_right);
                stack.push(ni + 1);
            }
        }
        best
    }

    /// Closest surface point within `sqrt(max_d2)` of `p`: `(d2, point, local index)`.
    pub fn nearest_point(&self, tris: &[Triangle], p: &Vec3, max_d2: f64) -> Option<(f64, Vec3, u32)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(f64, Vec3, u32)> = None;
        let mut bound = max_d2;
        let mut stack: Vec<u32> = vec![0];
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni as usize];
            if node.bounds.distance_squared(p) > bound {
                continue;
            }
            if node.count > 0 {
                let s = node.start_or_right as usize;
                for &ti in &self.order[s..s + node.count as usize] {
                    let t = &tris[ti as usize];
                    let q = closest_point_on_triangle(p, &t.v[0], &t.v[1], &t.v[2]);
                    let d2 = (q - p).norm_squared();
                    let better = match best {
                        None => d2 <= bound,
                        Some((bd, _, bi)) => d2 < bd || (d2 == bd && ti < bi),
                    };
                    if better {
                        best = Some((d2, q, ti));
                        bound = d2;
                    }
                }
            } else {
                let l = ni + 1;
                let r = node.start_or_right;
                let dl = self.nodes[l as usize].bounds.distance_squared(p);
                let dr = self.nodes[r as usize].bounds.distance_squared(p);
                // visit the nearer child first
                if dl <= dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best
    }
}

fn build_node(nodes: &mut Vec<Node>, order: &mut [u32], start: usize, end: usize, bounds: &[Aabb], centroids: &[Vec3]) -> u32 {
    let idx = nodes.len() as u32;
    let mut nb = Aabb::empty();
    let mut cb = Aabb::empty();
    for &i in &order[start..end] {
        nb = nb.union(&bounds[i as usize]);
        cb.grow(&centroids[i as usize]);
    }
    nodes.push(Node { bounds: nb, start_or_right: start as u32, count: (end - start) as u32 });
    let n = end - start;
    if n <= LEAF_SIZE {
        return idx;
    }
    let extent = cb.max - cb.min;
    let axis = if extent.x >= extent.y && extent.x >= extent.z {
        0
    } else if extent.y >= extent.z {
        1
    } else {
        2
    };
    if extent[axis] <= 0.0 {
        return idx;
    }

    // binned SAH along the widest centroid axis
    let mut bin_bounds = [Aabb::empty(); SAH_BINS];
    let mut bin_counts = [0usize; SAH_BINS];
    let scale = SAH_BINS as f64 / extent[axis];
    let bin_of = |c: &Vec3| (((c[axis] - cb.min[axis]) * scale) as usize).min(SAH_BINS - 1);
    for &i in &order[start..end] {
        let b = bin_of(&centroids[i as usize]);
        bin_counts[b] += 1;
        bin_bounds[b] = bin_bounds[b].union(&bounds[i as usize]);
    }
    let mut best_cost = f64::INFINITY;
    let mut best_split = SAH_BINS / 2;
    for split in 1..SAH_BINS {
        let (mut lb, mut rb) = (Aabb::empty(), Aabb::empty());
        let (mut lc, mut rc) = (0, 0);
        for b in 0..split {
            lb = lb.union(&bin_bounds[b]);
            lc += bin_counts[b];
        }
        for b in split..SAH_BINS {
            rb = rb.union(&bin_bounds[b]);
            rc += bin_counts[b];
        }
        if lc == 0 || rc == 0 {
            continue;
        }
        let cost = lc as f64 * lb.surface_area() + rc as f64 * rb.surface_area();
        if cost < best_cost {
            best_cost = cost;
            best_split = split;
        }
    }

    let slice = &mut order[start..end];
    let mut mid = partition(slice, |&i| bin_of(&centroids[i as usize]) < best_split);
    if mid == 0 || mid == n {
        slice.sort_by(|a, b| centroids[*a as usize][axis].total_cmp(&centroids[*b as usize][axis]).then(a.cmp(b)));
        mid = n / 2;
    }
    build_node(nodes, order, start, start + mid, bounds, centroids);
    let right = build_node(nodes, order, start + mid, end, bounds, centroids);
    let node = &mut nodes[idx as usize];
    node.start_or_right = right;
    node.count = 0;
    idx
}

fn partition(slice: &mut [u32], pred: impl Fn(&u32) -> bool) -> usize {
    let mut i = 0;
    for j in 0..slice.len() {
        if pred(&slice[j]) {
            slice.swap(i, j);
            i += 1;
        }
    }
    i
}
