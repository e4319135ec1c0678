use super::{PointCloud, SpatialIndex, Vec3};
use crate::error::{MorphError, Result};

/// Collapses overlapping points.
///
/// Clusters grow greedily in ascending input order: the earliest unassigned
/// cluster absorbs every later cluster whose centroid lies closer than
/// `epsilon` to its own. Passes repeat on the resulting centroids until no
/// two are closer than `epsilon`, so the output is a fixed point of the
/// operation. Each output point is the centroid of all input points merged
/// into it and keeps the view tag of its earliest member.
pub fn merge_vertices(cloud: &PointCloud, epsilon: f64) -> Result<PointCloud> {
    if !(epsilon > 0.0) {
        return Err(MorphError::Parameter(format!(
            "merge epsilon must be positive, got {epsilon}"
        )));
    }
    // (sum, count, first member)
    let mut clusters: Vec<(Vec3, usize, usize)> = cloud.points().iter().enumerate().map(|(i, p)| (*p, 1, i)).collect();

    loop {
        let centroids: Vec<Vec3> = clusters.iter().map(|c| c.0 / c.1 as f64).collect();
        let index = SpatialIndex::new(&centroids);
        let mut owner = vec![usize::MAX; clusters.len()];
        let mut merged = Vec::with_capacity(clusters.len());
        for seed in 0..clusters.len() {
            if owner[seed] != usize::MAX {
                continue;
            }
            let slot = merged.len();
            let mut acc = clusters[seed];
            owner[seed] = slot;
            for j in index.within_radius(&centroids[seed], epsilon) {
                if j > seed && owner[j] == usize::MAX && (centroids[j] - centroids[seed]).norm() < epsilon {
                    owner[j] = slot;
                    acc.0 += clusters[j].0;
                    acc.1 += clusters[j].1;
                }
            }
            merged.push(acc);
        }
        let done = merged.len() == clusters.len();
        clusters = merged;
        if done {
            break;
        }
    }

    let points = clusters.iter().map(|c| c.0 / c.1 as f64).collect();
    let out = PointCloud::new(points);
    match cloud.views() {
        Some(tags) => out.with_views(clusters.iter().map(|c| tags[c.2]).collect()),
        None => Ok(out),
    }
}

/// Keeps exactly the points with at least `min_neighbors` other points
/// within `radius`.
pub fn remove_isolated(cloud: &PointCloud, radius: f64, min_neighbors: usize) -> Result<PointCloud> {
    if !(radius > 0.0) {
        return Err(MorphError::Parameter(format!(
            "isolation radius must be positive, got {radius}"
        )));
    }
    if min_neighbors == 0 {
        return Err(MorphError::Parameter("min_neighbors must be at least 1".into()));
    }
    let index = SpatialIndex::new(cloud.points());
    let keep: Vec<usize> = (0..cloud.len())
        .filter(|&i| index.within_radius(&cloud.points()[i], radius).len() > min_neighbors)
        .collect();
    Ok(cloud.select(&keep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::ViewTag;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn union_find_clusters(points: &[Vec3], eps: f64) -> usize {
        let mut parent: Vec<usize> = (0..points.len()).collect();
        fn find(parent: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while parent[r] != r {
                r = parent[r];
            }
            parent[i] = r;
            r
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if (points[i] - points[j]).norm() < eps {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        (0..points.len()).filter(|&i| find(&mut parent, i) == i).count()
    }

    #[test]
    fn duplicate_points_collapse() {
        let p = Vec3::new(0.3, -1.0, 2.0);
        let out = merge_vertices(&PointCloud::new(vec![p, p]), 1e-3).unwrap();
        assert_eq!(out.points(), &[p]);
    }

    #[test]
    fn points_two_epsilon_apart_survive() {
        let cloud = PointCloud::new(vec![Vec3::zeros(), Vec3::new(2e-3, 0.0, 0.0)]);
        assert_eq!(merge_vertices(&cloud, 1e-3).unwrap().len(), 2);
    }

    #[test]
    fn non_positive_epsilon_rejected() {
        assert!(merge_vertices(&PointCloud::new(vec![]), 0.0).is_err());
        assert!(merge_vertices(&PointCloud::new(vec![]), -1.0).is_err());
    }

    #[test]
    fn jittered_grid_matches_union_find() {
        let eps = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                let base = Vec3::new(i as f64, j as f64, 0.0) * 0.1;
                pts.push(base);
                // partner within eps/10 of its grid point
                let dir = Vec3::new(rng.random(), rng.random(), rng.random()).normalize();
                if (i + j) % 3 != 0 {
                    pts.push(base + dir * eps / 10.0);
                }
            }
        }
        let expected = union_find_clusters(&pts, eps);
        assert_eq!(expected, 100);
        let out = merge_vertices(&PointCloud::new(pts), eps).unwrap();
        assert_eq!(out.len(), expected);
    }

    #[test]
    fn merged_point_is_cluster_centroid_and_keeps_first_tag() {
        let cloud = PointCloud::new(vec![
            Vec3::zeros(),
            Vec3::new(10.0, 0.0, 0.0),
            Vec3::new(0.0, 0.002, 0.0),
        ])
        .with_views(vec![ViewTag::Left, ViewTag::Middle, ViewTag::Right])
        .unwrap();
        let out = merge_vertices(&cloud, 0.01).unwrap();
        assert_eq!(out.len(), 2);
        assert!((out.points()[0] - Vec3::new(0.0, 0.001, 0.0)).norm() < 1e-15);
        assert_eq!(out.views().unwrap(), &[ViewTag::Left, ViewTag::Middle]);
    }

    #[test]
    fn single_point_is_isolated() {
        let out = remove_isolated(&PointCloud::new(vec![Vec3::zeros()]), 1.0, 1).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn cluster_kept_outlier_dropped() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut pts: Vec<Vec3> = (0..10)
            .map(|_| Vec3::new(rng.random(), rng.random(), rng.random()) * 0.05)
            .collect();
        pts.push(Vec3::new(5.0, 5.0, 5.0));
        let radius = 0.1;
        let out = remove_isolated(&PointCloud::new(pts.clone()), radius, 2).unwrap();
        let oracle: Vec<Vec3> = pts
            .iter()
            .enumerate()
            .filter(|(i, p)| {
                pts.iter()
                    .enumerate()
                    .filter(|(j, q)| j != i && (*p - *q).norm() <= radius)
                    .count()
                    >= 2
            })
            .map(|(_, p)| *p)
            .collect();
        assert_eq!(out.points(), &oracle[..]);
        assert_eq!(out.len(), 10);
    }

    fn cloud_strategy() -> impl Strategy<Value = Vec<Vec3>> {
        prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64), 0..200)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn merge_is_idempotent_and_separated(pts in cloud_strategy(), eps in 0.01..0.5f64) {
            let once = merge_vertices(&PointCloud::new(pts), eps).unwrap();
            for (i, a) in once.points().iter().enumerate() {
                for b in &once.points()[i + 1..] {
                    prop_assert!((a - b).norm() >= eps);
                }
            }
            let twice = merge_vertices(&once, eps).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn isolated_removal_returns_subset(pts in cloud_strategy(), r in 0.05..0.5f64, k in 1usize..4) {
            let out = remove_isolated(&PointCloud::new(pts.clone()), r, k).unwrap();
            for p in out.points() {
                prop_assert!(pts.contains(p));
            }
        }
    }
}
