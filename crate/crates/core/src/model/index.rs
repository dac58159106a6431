/// Row-major encoding of `N`-tuples over an alphabet of size `base`:
/// `idx(v_1, ..., v_N) = sum_i v_i * base^(N - i)`.
#[derive(Debug, Clone)]
pub struct JointIndexer {
    base: usize,
    slots: usize,
    size: usize,
    digits: Vec<Vec<usize>>,
}

impl JointIndexer {
    pub fn new(base: usize, slots: usize) -> Self {
        let size = base.pow(slots as u32);
        let digits = (0..size).map(|i| decode(i, base, slots)).collect();
        Self { base, slots, size, digits }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn slots(&self) -> usize {
        self.slots
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn encode(&self, digits: &[usize]) -> usize {
        encode(digits, self.base)
    }

    pub fn digits(&self, index: usize) -> &[usize] {
        &self.digits[index]
    }

    /// Index of the tuple with slots rearranged so that slot `i` of the
    /// result holds slot `perm[i]` of the input.
    pub fn permute(&self, index: usize, perm: &[usize]) -> usize {
        let d = &self.digits[index];
        perm.iter().fold(0, |acc, &p| acc * self.base + d[p])
    }
}

pub fn encode(digits: &[usize], base: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * base + d)
}

pub fn decode(mut index: usize, base: usize, slots: usize) -> Vec<usize> {
    let mut out = vec![0; slots];
    for s in (0..slots).rev() {
        out[s] = index % base;
        index /= base;
    }
    out
}

/// All permutations of `0..n` in lexicographic order, identity first.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        // next lexicographic permutation
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            break;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}
