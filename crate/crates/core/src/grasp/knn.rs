use std::collections::HashMap;

use nalgebra::Vector3;

/// Uniform hash grid for exact k-nearest-neighbor queries over a static point set.
pub(crate) struct GridIndex<'a> {
    points: &'a [Vector3<f64>],
    cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl<'a> GridIndex<'a> {
    /// `per_cell` sets the cell size so that an average occupied cell holds about that many points.
    pub fn build(points: &'a [Vector3<f64>], per_cell: usize) -> Self {
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for p in points {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let extent = if points.is_empty() { Vector3::zeros() } else { hi - lo };
        // surfaces fill two dimensions of the box, so size cells by area rather than volume
        let mut sides = [extent.x, extent.y, extent.z];
        sides.sort_by(f64::total_cmp);
        let area = (sides[1] * sides[2]).max(sides[2] * sides[2] * 1e-4);
        let n = points.len().max(1) as f64;
        let mut cell = (area * per_cell as f64 / n).sqrt();
        if !(cell.is_finite() && cell > 1e-9) {
            cell = 1e-3;
        }
        let mut cells: HashMap<_, Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::key_for(p, cell)).or_default().push(i);
        }
        Self { points, cell, cells }
    }

    fn key_for(p: &Vector3<f64>, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    /// The `k` points nearest to `query`, ordered by (distance, index).
    pub fn nearest(&self, query: &Vector3<f64>, k: usize) -> Vec<usize> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let (cx, cy, cz) = Self::key_for(query, self.cell);
        let mut found: Vec<(f64, usize)> = Vec::new();
        let mut shell = 0i64;
        loop {
            for dx in -shell..=shell {
                for dy in -shell..=shell {
                    for dz in -shell..=shell {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != shell {
                            continue;
                        }
                        if let Some(ids) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                            found.extend(ids.iter().map(|i| ((self.points[*i] - query).norm_squared(), *i)));
                        }
                    }
                }
            }
            if found.len() >= k {
                found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let covered = shell as f64 * self.cell;
                if found[k - 1].0 <= covered * covered || found.len() == self.points.len() {
                    found.truncate(k);
                    return found.into_iter().map(|(_, i)| i).collect();
                }
            }
            shell += 1;
        }
    }
}
