//! Symmetric chamfer distance between point sets.
//!
//! `chamfer_distance` accelerates nearest-neighbor lookups with a uniform
//! grid; `chamfer_distance_brute_force` is the O(|P|·|Q|) reference used to
//! cross-check it.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Mean nearest-neighbor distance from each set to the other, halved:
/// `(mean_p min_q |p-q| + mean_q min_p |q-p|) / 2`.
pub fn chamfer_distance(p: &[Vector3<f64>], q: &[Vector3<f64>]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let p_to_q = mean_nn(p, &GridIndex::build(q));
    let q_to_p = mean_nn(q, &GridIndex::build(p));
    Ok(0.5 * (p_to_q + q_to_p))
}

/// Reference implementation: full pairwise scan.
pub fn chamfer_distance_brute_force(p: &[Vector3<f64>], q: &[Vector3<f64>]) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::EmptyPointSet);
    }
    let dir = |a: &[Vector3<f64>], b: &[Vector3<f64>]| -> f64 {
        a.iter()
            .map(|pa| {
                b.iter()
                    .map(|pb| (pa - pb).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / a.len() as f64
    };
    Ok(0.5 * (dir(p, q) + dir(q, p)))
}

struct GridIndex {
    cell: f64,
    origin: Vector3<f64>,
    dims: [usize; 3],
    /// point indices per cell, flattened
    buckets: Vec<Vec<usize>>,
    points: Vec<Vector3<f64>>,
}

impl GridIndex {
    fn build(points: &[Vector3<f64>]) -> Self {
        let mut lo = points[0];
        let mut hi = points[0];
        for p in points {
            for k in 0..3 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let extent = (hi - lo).amax().max(1e-9);
        // aim for a few points per cell
        let target = (points.len() as f64).cbrt().ceil().max(1.0);
        let cell = (extent / target).max(1e-9);
        let dims = [
            ((hi[0] - lo[0]) / cell) as usize + 1,
            ((hi[1] - lo[1]) / cell) as usize + 1,
            ((hi[2] - lo[2]) / cell) as usize + 1,
        ];
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        for (i, p) in points.iter().enumerate() {
            let c = Self::cell_of(p, &lo, cell, &dims);
            buckets[c].push(i);
        }
        GridIndex {
            cell,
            origin: lo,
            dims,
            buckets,
            points: points.to_vec(),
        }
    }

    fn cell_of(p: &Vector3<f64>, origin: &Vector3<f64>, cell: f64, dims: &[usize; 3]) -> usize {
        let ix = (((p[0] - origin[0]) / cell) as usize).min(dims[0] - 1);
        let iy = (((p[1] - origin[1]) / cell) as usize).min(dims[1] - 1);
        let iz = (((p[2] - origin[2]) / cell) as usize).min(dims[2] - 1);
        (iz * dims[1] + iy) * dims[0] + ix
    }

    fn coords_of(&self, p: &Vector3<f64>) -> [i64; 3] {
        [
            ((p[0] - self.origin[0]) / self.cell).floor() as i64,
            ((p[1] - self.origin[1]) / self.cell).floor() as i64,
            ((p[2] - self.origin[2]) / self.cell).floor() as i64,
        ]
    }

    /// Exact nearest-neighbor distance via expanding shell search. Queries
    /// outside the grid fall back to a full scan.
    fn nearest(&self, p: &Vector3<f64>) -> f64 {
        let c = self.coords_of(p);
        if (0..3).any(|k| c[k] < 0 || c[k] >= self.dims[k] as i64) {
            return self
                .points
                .iter()
                .map(|q| (q - p).norm())
                .fold(f64::INFINITY, f64::min);
        }
        let max_dim = *self.dims.iter().max().unwrap() as i64;
        let mut best = f64::INFINITY;
        let mut shell: i64 = 0;
        loop {
            let mut scanned_any = false;
            for dx in -shell..=shell {
                for dy in -shell..=shell {
                    for dz in -shell..=shell {
                        // only the outer shell; inner cells were already scanned
                        if dx.abs().max(dy.abs()).max(dz.abs()) != shell {
                            continue;
                        }
                        let (ix, iy, iz) = (c[0] + dx, c[1] + dy, c[2] + dz);
                        if ix < 0
                            || iy < 0
                            || iz < 0
                            || ix >= self.dims[0] as i64
                            || iy >= self.dims[1] as i64
                            || iz >= self.dims[2] as i64
                        {
                            continue;
                        }
                        scanned_any = true;
                        let bucket = &self.buckets
                            [(iz as usize * self.dims[1] + iy as usize) * self.dims[0]
                                + ix as usize];
                        for &i in bucket {
                            let d = (self.points[i] - p).norm();
                            if d < best {
                                best = d;
                            }
                        }
                    }
                }
            }
            // cells in shell s+1 are at least s*cell away from the query cell
            if best.is_finite() && best <= shell as f64 * self.cell {
                return best;
            }
            if !scanned_any && shell > max_dim + 2 {
                return best;
            }
            shell += 1;
        }
    }
}

fn mean_nn(queries: &[Vector3<f64>], index: &GridIndex) -> f64 {
    let total: f64 = if queries.len() >= 2048 {
        let dists: Vec<f64> = queries.par_iter().map(|p| index.nearest(p)).collect();
        dists.iter().sum()
    } else {
        queries.iter().map(|p| index.nearest(p)).sum()
    };
    total / queries.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn random_cloud(n: usize, seed: u64) -> Vec<Vector3<f64>> {
        let mut r = rng::derive(seed, &[0]);
        (0..n)
            .map(|_| Vector3::new(r.random::<f64>(), r.random::<f64>(), r.random::<f64>()))
            .collect()
    }

    #[test]
    fn identical_sets_have_zero_distance() {
        let p = random_cloud(40, 1);
        assert_eq!(chamfer_distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn single_pair_distance() {
        let p = vec![Vector3::new(0.0, 0.0, 0.0)];
        let q = vec![Vector3::new(1.0, 0.0, 0.0)];
        assert_eq!(chamfer_distance(&p, &q).unwrap(), 1.0);
    }

    #[test]
    fn empty_set_is_an_error() {
        let p = random_cloud(3, 2);
        assert!(matches!(
            chamfer_distance(&p, &[]),
            Err(Error::EmptyPointSet)
        ));
        assert!(matches!(
            chamfer_distance(&[], &p),
            Err(Error::EmptyPointSet)
        ));
    }

    #[test]
    fn grid_matches_brute_force_on_random_clouds() {
        for seed in 0..30 {
            let p = random_cloud(50, seed);
            let q = random_cloud(50, seed + 1000);
            let fast = chamfer_distance(&p, &q).unwrap();
            let slow = chamfer_distance_brute_force(&p, &q).unwrap();
            assert!(
                (fast - slow).abs() < 1e-12,
                "seed {seed}: {fast} vs {slow}"
            );
        }
    }

    #[test]
    fn symmetric_in_arguments() {
        let p = random_cloud(20, 7);
        let q = random_cloud(35, 8);
        let a = chamfer_distance(&p, &q).unwrap();
        let b = chamfer_distance(&q, &p).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn degenerate_coincident_points_work() {
        let p = vec![Vector3::new(0.5, 0.5, 0.5); 10];
        let q = vec![Vector3::new(0.5, 0.5, 0.5); 3];
        assert_eq!(chamfer_distance(&p, &q).unwrap(), 0.0);
    }
}
