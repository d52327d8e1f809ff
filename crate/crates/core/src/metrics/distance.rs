//! Nearest-neighbour distances between point sets.
//!
//! Queries go through a static kd-tree. Pruning compares squared distances
//! computed with the same arithmetic as [`crate::mesh::distance`], so every
//! result is bitwise identical to a brute-force scan.

use rayon::prelude::*;

use super::{MetricError, SampledSurface};
use crate::mesh::Point3;

#[inline]
fn squared(a: Point3, b: Point3) -> f64 {
    let d = [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Static kd-tree over a borrowed point set.
pub struct PointIndex<'a> {
    points: &'a [Point3],
    /// Point indices in tree order: each subrange `[lo, hi)` stores its
    /// splitting point at the midpoint.
    order: Vec<usize>,
}

impl<'a> PointIndex<'a> {
    pub fn new(points: &'a [Point3]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(points, &mut order, 0);
        Self { points, order }
    }

    /// Distance from `query` to the closest indexed point, or `None` when
    /// the index is empty.
    pub fn nearest(&self, query: Point3) -> Option<f64> {
        if self.order.is_empty() {
            return None;
        }
        let mut best = f64::INFINITY;
        self.search(query, 0, self.order.len(), 0, &mut best);
        Some(best.sqrt())
    }

    fn search(&self, q: Point3, lo: usize, hi: usize, depth: usize, best: &mut f64) {
        if lo >= hi {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let p = self.points[self.order[mid]];
        let d = squared(q, p);
        if d < *best {
            *best = d;
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        self.search(q, near.0, near.1, depth + 1, best);
        if diff * diff <= *best {
            self.search(q, far.0, far.1, depth + 1, best);
        }
    }
}

fn build(points: &[Point3], order: &mut [usize], depth: usize) {
    if order.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| points[a][axis].total_cmp(&points[b][axis]));
    let (left, rest) = order.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut rest[1..], depth + 1);
}

/// For each point of `from`, the distance to its nearest point in `to`.
/// `to` must be nonempty.
pub fn nearest_distances(from: &[Point3], to: &[Point3]) -> Vec<f64> {
    let index = PointIndex::new(to);
    from.par_iter()
        .map(|&p| index.nearest(p).expect("nonempty target set"))
        .collect()
}

fn check_nonempty(a: &SampledSurface, b: &SampledSurface) -> Result<(), MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::Undefined("distance to an empty point set"));
    }
    Ok(())
}

/// `max_{p in a} min_{q in b} |p - q|`.
pub fn directed_hausdorff(a: &SampledSurface, b: &SampledSurface) -> Result<f64, MetricError> {
    check_nonempty(a, b)?;
    Ok(nearest_distances(&a.points, &b.points)
        .into_iter()
        .fold(0.0, f64::max))
}

/// `mean_{p in a} min_{q in b} |p - q|`.
pub fn directed_mean(a: &SampledSurface, b: &SampledSurface) -> Result<f64, MetricError> {
    check_nonempty(a, b)?;
    let d = nearest_distances(&a.points, &b.points);
    Ok(d.iter().sum::<f64>() / d.len() as f64)
}

/// Symmetric Hausdorff distance.
pub fn hausdorff(a: &SampledSurface, b: &SampledSurface) -> Result<f64, MetricError> {
    Ok(directed_hausdorff(a, b)?.max(directed_hausdorff(b, a)?))
}

/// Mean of the two directed mean nearest-neighbour distances.
pub fn chamfer(a: &SampledSurface, b: &SampledSurface) -> Result<f64, MetricError> {
    Ok(0.5 * (directed_mean(a, b)? + directed_mean(b, a)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::distance;
    use proptest::prelude::*;

    fn cloud(points: Vec<Point3>) -> SampledSurface {
        SampledSurface::from_points(points)
    }

    fn brute_nearest(p: Point3, set: &[Point3]) -> f64 {
        set.iter().map(|&q| distance(p, q)).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn trivial_examples() {
        let a = cloud(vec![[0.0, 0.0, 0.0]]);
        let b = cloud(vec![[1.0, 0.0, 0.0]]);
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
        assert_eq!(hausdorff(&a, &b).unwrap(), 1.0);
        assert_eq!(chamfer(&a, &b).unwrap(), 1.0);
    }

    #[test]
    fn empty_sets_are_undefined() {
        let a = cloud(vec![[0.0, 0.0, 0.0]]);
        let e = cloud(vec![]);
        assert!(hausdorff(&a, &e).is_err());
        assert!(chamfer(&e, &a).is_err());
    }

    #[test]
    fn duplicate_points_and_ties() {
        let pts = vec![[0.5, 0.5, 0.5]; 10];
        let index = PointIndex::new(&pts);
        assert_eq!(index.nearest([0.5, 0.5, 1.5]), Some(1.0));
    }

    proptest! {
        #[test]
        fn kd_tree_matches_brute_force_bitwise(
            set in prop::collection::vec(prop::array::uniform3(-1.0f64..1.0), 1..64),
            queries in prop::collection::vec(prop::array::uniform3(-1.5f64..1.5), 1..64),
        ) {
            let index = PointIndex::new(&set);
            for q in queries {
                let fast = index.nearest(q).unwrap();
                prop_assert_eq!(fast.to_bits(), brute_nearest(q, &set).to_bits());
            }
        }

        #[test]
        fn symmetric_and_ordered(
            a in prop::collection::vec(prop::array::uniform3(0.0f64..1.0), 1..40),
            b in prop::collection::vec(prop::array::uniform3(0.0f64..1.0), 1..40),
        ) {
            let (a, b) = (cloud(a), cloud(b));
            let hd = hausdorff(&a, &b).unwrap();
            let cd = chamfer(&a, &b).unwrap();
            prop_assert_eq!(hd, hausdorff(&b, &a).unwrap());
            prop_assert_eq!(cd, chamfer(&b, &a).unwrap());
            prop_assert!(hd >= cd);
        }

        #[test]
        fn invariant_under_shared_translation(
            a in prop::collection::vec(prop::array::uniform3(0.0f64..1.0), 1..30),
            b in prop::collection::vec(prop::array::uniform3(0.0f64..1.0), 1..30),
            shift in prop::array::uniform3(-0.5f64..0.5),
        ) {
            let moved = |s: &[Point3]| cloud(s.iter().map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]).collect());
            let hd0 = hausdorff(&cloud(a.clone()), &cloud(b.clone())).unwrap();
            let hd1 = hausdorff(&moved(&a), &moved(&b)).unwrap();
            prop_assert!((hd0 - hd1).abs() < 1e-12);
        }
    }
}
