use super::OccupancyGrid;

/// Set of integer translations of an object grid inside a scene grid, stored
/// as one z bitmask per (x, y) translation.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet {
    /// Number of admissible translations per axis (object box inside scene box).
    range: [usize; 3],
    words: usize,
    masks: Vec<u64>,
}

impl FeasibleSet {
    fn empty() -> Self {
        Self {
            range: [0; 3],
            words: 0,
            masks: Vec::new(),
        }
    }

    pub fn range(&self) -> [usize; 3] {
        self.range
    }

    pub fn z_mask(&self, tx: usize, ty: usize) -> &[u64] {
        let c = (tx * self.range[1] + ty) * self.words;
        &self.masks[c..c + self.words]
    }

    pub fn contains(&self, t: [usize; 3]) -> bool {
        if t[0] >= self.range[0] || t[1] >= self.range[1] || t[2] >= self.range[2] {
            return false;
        }
        self.z_mask(t[0], t[1])[t[2] / 64] >> (t[2] % 64) & 1 == 1
    }

    pub fn len(&self) -> usize {
        self.masks.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.iter().all(|&w| w == 0)
    }

    /// Offsets in lexicographic (x, y, z) order.
    pub fn iter(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        let [rx, ry, rz] = self.range;
        (0..rx).flat_map(move |tx| {
            (0..ry).flat_map(move |ty| {
                let m = self.z_mask(tx, ty);
                (0..rz)
                    .filter(move |&tz| m[tz / 64] >> (tz % 64) & 1 == 1)
                    .map(move |tz| [tx, ty, tz])
            })
        })
    }
}

/// `acc |= src >> shift` over multi-word little-endian bit vectors.
fn or_shifted_right(acc: &mut [u64], src: &[u64], shift: usize) {
    let (wshift, bshift) = (shift / 64, shift % 64);
    for i in 0..acc.len() {
        let lo = i + wshift;
        if lo >= src.len() {
            break;
        }
        let mut v = src[lo] >> bshift;
        if bshift > 0 && lo + 1 < src.len() {
            v |= src[lo + 1] << (64 - bshift);
        }
        acc[i] |= v;
    }
}

/// All translations `t` such that the object grid shifted by `t` lies inside
/// the scene grid and shares no occupied voxel with it.
///
/// This is a binary cross-correlation evaluated with bitwise column
/// operations: for a fixed (x, y) translation, the z shifts that collide are
/// the union over object voxels `k` of the scene column shifted down by `k`.
pub fn feasible_offsets(scene: &OccupancyGrid, object: &OccupancyGrid) -> FeasibleSet {
    assert!(
        (scene.resolution() - object.resolution()).abs() <= 1e-12 * scene.resolution(),
        "scene and object grids must share a resolution"
    );
    let [sx, sy, sz] = scene.dims();
    let [ox, oy, oz] = object.dims();
    if ox > sx || oy > sy || oz > sz {
        return FeasibleSet::empty();
    }
    let range = [sx - ox + 1, sy - oy + 1, sz - oz + 1];
    let words = range[2].div_ceil(64);
    let mut masks = vec![0u64; range[0] * range[1] * words];

    // Object voxels grouped per column; the per-column bit lists are reused for every translation.
    let columns: Vec<(usize, usize, Vec<usize>)> = (0..ox)
        .flat_map(|a| (0..oy).map(move |b| (a, b)))
        .filter_map(|(a, b)| {
            let ks: Vec<usize> = (0..oz).filter(|&k| object.get(a, b, k)).collect();
            (!ks.is_empty()).then_some((a, b, ks))
        })
        .collect();

    let mut acc = vec![0u64; scene.words()];
    for tx in 0..range[0] {
        for ty in 0..range[1] {
            acc.iter_mut().for_each(|w| *w = 0);
            for (a, b, ks) in &columns {
                let col = scene.column(tx + a, ty + b);
                if col.iter().all(|&w| w == 0) {
                    continue;
                }
                for &k in ks {
                    or_shifted_right(&mut acc, col, k);
                }
            }
            let out = &mut masks[(tx * range[1] + ty) * words..][..words];
            for (n, w) in out.iter_mut().enumerate() {
                let blocked = acc.get(n).copied().unwrap_or(0);
                let valid_bits = if (n + 1) * 64 <= range[2] {
                    u64::MAX
                } else {
                    (1u64 << (range[2] - n * 64)) - 1
                };
                *w = !blocked & valid_bits;
            }
        }
    }
    FeasibleSet {
        range,
        words,
        masks,
    }
}
