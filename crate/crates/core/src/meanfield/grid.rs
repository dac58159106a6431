//! Composition grid on the probability simplex and piecewise-linear
//! interpolation over its Freudenthal (Kuhn) triangulation.
//!
//! Interpolation works in cumulative coordinates `s_j = r * (z_1 + ... + z_j)`
//! for `j = 1..dim-1`, which map the simplex onto the ordered region
//! `0 <= s_1 <= ... <= s_{dim-1} <= r`. Grid nodes become the integer points
//! of that region, and the Kuhn triangulation of the unit-cube lattice
//! restricted to it triangulates the simplex. The containing cell is found
//! by sorting the fractional parts of `s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{MeanField, Prescription};

/// Default cap on grid size; override with `MFCORR_GRID_CAP`.
pub const DEFAULT_GRID_CAP: usize = 5_000_000;

/// Cumulative coordinates this close to an integer are snapped to it so that
/// evaluation at a node returns the stored value exactly.
const SNAP_TOL: f64 = 1e-9;

pub fn grid_cap_from_env() -> usize {
    std::env::var("MFCORR_GRID_CAP")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(DEFAULT_GRID_CAP)
}

/// `C(n, k)` in `u128`, saturating on overflow.
pub fn binomial(n: u64, k: u64) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of grid nodes for a given dimension and resolution.
pub fn node_count(dim: usize, resolution: usize) -> u128 {
    binomial((resolution + dim - 1) as u64, (dim - 1) as u64)
}

/// Recommended resolution for a mean-field dimension.
pub fn default_resolution(dim: usize) -> usize {
    if dim <= 4 {
        10
    } else {
        5
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridMeta {
    pub dim: usize,
    pub resolution: usize,
    pub n_nodes: usize,
}

#[derive(Debug, Clone)]
pub struct SimplexGrid {
    dim: usize,
    resolution: usize,
    compositions: Vec<Vec<u32>>,
    nodes: Vec<MeanField>,
    /// `binom[m][p]` = number of compositions of `m` into `p + 1` parts.
    counts: Vec<Vec<u64>>,
}

/// Interpolation stencil: grid node indices with barycentric weights.
pub type Stencil = Vec<(usize, f64)>;

pub fn build_simplex_grid(dim: usize, resolution: usize) -> Result<SimplexGrid> {
    SimplexGrid::with_cap(dim, resolution, grid_cap_from_env())
}

impl SimplexGrid {
    pub fn with_cap(dim: usize, resolution: usize, cap: usize) -> Result<Self> {
        if dim == 0 || resolution == 0 {
            return Err(Error::BadShape("grid needs dim >= 1 and resolution >= 1".into()));
        }
        let count = node_count(dim, resolution);
        if count > cap as u128 {
            return Err(Error::GridTooLarge { nodes: count, cap });
        }
        let mut compositions = Vec::with_capacity(count as usize);
        let mut cur = vec![0u32; dim];
        fill(&mut compositions, &mut cur, 0, resolution as u32);
        debug_assert_eq!(compositions.len() as u128, count);
        let r = resolution as f64;
        let nodes = compositions
            .iter()
            .map(|k| MeanField::from_update(k.iter().map(|&v| v as f64 / r).collect()))
            .collect();
        let counts = (0..=resolution)
            .map(|m| (0..dim).map(|p| binomial((m + p) as u64, p as u64) as u64).collect())
            .collect();
        Ok(Self { dim, resolution, compositions, nodes, counts })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[MeanField] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &MeanField {
        &self.nodes[i]
    }

    pub fn composition(&self, i: usize) -> &[u32] {
        &self.compositions[i]
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta { dim: self.dim, resolution: self.resolution, n_nodes: self.len() }
    }

    /// Lexicographic rank of a composition of `resolution` into `dim` parts.
    pub fn rank(&self, comp: &[u32]) -> usize {
        let mut rank = 0u64;
        let mut remaining = self.resolution;
        for (i, &k) in comp.iter().enumerate().take(self.dim - 1) {
            let parts_after = self.dim - i - 1;
            for j in 0..k as usize {
                rank += self.counts[remaining - j][parts_after - 1];
            }
            remaining -= k as usize;
        }
        rank as usize
    }

    /// Index of the node equal to `z`, if `z` lies on the grid (up to the
    /// snapping tolerance).
    pub fn node_index(&self, z: &MeanField) -> Option<usize> {
        let st = self.stencil(z);
        match st.as_slice() {
            [(i, w)] if *w == 1.0 => Some(*i),
            _ => None,
        }
    }

    /// Barycentric stencil of `z` in its containing Kuhn simplex. Only
    /// vertices with positive weight are returned; weights sum to one.
    pub fn stencil(&self, z: &MeanField) -> Stencil {
        let d = self.dim;
        if d == 1 {
            return vec![(0, 1.0)];
        }
        let r = self.resolution as f64;
        let m = d - 1;
        let mut s = Vec::with_capacity(m);
        let mut acc = 0.0;
        for &p in &z.probs()[..m] {
            acc += p;
            s.push(acc * r);
        }
        // clamp to the ordered region and snap near-integers
        let mut prev = 0.0;
        for v in s.iter_mut() {
            let mut c = v.clamp(prev, r);
            let rounded = c.round();
            if (c - rounded).abs() < SNAP_TOL {
                c = rounded;
            }
            *v = c.max(prev);
            prev = *v;
        }
        let base: Vec<i64> = s.iter().map(|v| v.floor() as i64).collect();
        let frac: Vec<f64> = s.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
        // descending fractional part; ties go to the later coordinate so the
        // walk never leaves the ordered region
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&i, &j| frac[j].total_cmp(&frac[i]).then(j.cmp(&i)));

        let mut stencil = Vec::with_capacity(d);
        let mut vertex = base.clone();
        let first = 1.0 - frac[order[0]];
        if first > 0.0 {
            stencil.push((self.cumulative_to_index(&vertex), first));
        }
        for k in 0..m {
            vertex[order[k]] += 1;
            let w = if k + 1 < m { frac[order[k]] - frac[order[k + 1]] } else { frac[order[k]] };
            if w > 0.0 {
                stencil.push((self.cumulative_to_index(&vertex), w));
            }
        }
        stencil
    }

    fn cumulative_to_index(&self, cum: &[i64]) -> usize {
        let mut comp = Vec::with_capacity(self.dim);
        let mut prev = 0i64;
        for &c in cum {
            comp.push((c - prev) as u32);
            prev = c;
        }
        comp.push((self.resolution as i64 - prev) as u32);
        self.rank(&comp)
    }
}

fn fill(out: &mut Vec<Vec<u32>>, cur: &mut Vec<u32>, pos: usize, remaining: u32) {
    if pos == cur.len() - 1 {
        cur[pos] = remaining;
        out.push(cur.clone());
        return;
    }
    for k in 0..=remaining {
        cur[pos] = k;
        fill(out, cur, pos + 1, remaining - k);
    }
}

/// Piecewise-linear interpolation of a node table at `z`.
pub fn interpolate_value(grid: &SimplexGrid, values: &[f64], z: &MeanField) -> f64 {
    grid.stencil(z).iter().map(|&(i, w)| w * values[i]).sum()
}

/// Interpolates a node table of vectors (e.g. `V(z, x)` over `x`).
pub fn interpolate_vector(grid: &SimplexGrid, values: &[Vec<f64>], z: &MeanField) -> Vec<f64> {
    let st = grid.stencil(z);
    if let [(i, _)] = st.as_slice() {
        return values[*i].clone();
    }
    let len = values[st[0].0].len();
    let mut out = vec![0.0; len];
    for &(i, w) in &st {
        for (o, v) in out.iter_mut().zip(&values[i]) {
            *o += w * v;
        }
    }
    out
}

/// Barycentric blend of node prescriptions followed by row renormalization.
pub fn interpolate_prescription(
    grid: &SimplexGrid,
    policies: &[Prescription],
    z: &MeanField,
) -> Prescription {
    let st = grid.stencil(z);
    if let [(i, _)] = st.as_slice() {
        return policies[*i].clone();
    }
    let first = &policies[st[0].0];
    let mut table = vec![0.0; first.flat().len()];
    for &(i, w) in &st {
        for (t, p) in table.iter_mut().zip(policies[i].flat()) {
            *t += w * p;
        }
    }
    Prescription::from_flat_normalized(table, first.n_actions())
}
