//! Pointwise exterior algebra on Λ(Rⁿ).
//!
//! Multi-indices are bitmasks over `0..n`; each degree lists its masks in
//! lexicographic order of the sorted index tuple, which is the coefficient
//! order used by every backend.

use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub struct Ext {
    n: usize,
    masks: Vec<Vec<u32>>,
    position: Vec<usize>,
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn members(mask: u32) -> impl Iterator<Item = usize> {
    (0..32).filter(move |b| mask >> b & 1 == 1)
}

/// Sign of dx^A ∧ dx^B relative to dx^{A∪B}, or `None` when they overlap.
pub fn wedge_sign(a: u32, b: u32) -> Option<f64> {
    if a & b != 0 {
        return None;
    }
    let mut inversions = 0u32;
    for i in members(b) {
        inversions += (a >> (i + 1)).count_ones();
    }
    Some(if inversions % 2 == 0 { 1.0 } else { -1.0 })
}

impl Ext {
    pub fn new(n: usize) -> Self {
        assert!(n <= 16, "exterior algebra limited to n <= 16");
        let mut masks = vec![Vec::new(); n + 1];
        let mut tuples: Vec<Vec<usize>> = (0u32..1 << n)
            .map(|m| members(m).collect())
            .collect();
        tuples.sort();
        for t in tuples {
            let m = t.iter().fold(0u32, |acc, &i| acc | 1 << i);
            masks[t.len()].push(m);
        }
        let mut position = vec![0; 1 << n];
        for list in &masks {
            for (i, &m) in list.iter().enumerate() {
                position[m as usize] = i;
            }
        }
        Ext { n, masks, position }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self, k: usize) -> usize {
        if k > self.n {
            0
        } else {
            self.masks[k].len()
        }
    }

    pub fn masks(&self, k: usize) -> &[u32] {
        &self.masks[k]
    }

    pub fn index_of(&self, mask: u32) -> usize {
        self.position[mask as usize]
    }

    pub fn full_mask(&self) -> u32 {
        (1u32 << self.n) - 1
    }

    /// Sparse table of α∧β entries: (index of A in degree ka, index of B in
    /// degree kb, index of A∪B, sign).
    pub fn wedge_table(&self, ka: usize, kb: usize) -> Vec<(usize, usize, usize, f64)> {
        let mut out = Vec::new();
        if ka + kb > self.n {
            return out;
        }
        for (i, &a) in self.masks[ka].iter().enumerate() {
            for (j, &b) in self.masks[kb].iter().enumerate() {
                if let Some(s) = wedge_sign(a, b) {
                    out.push((i, j, self.index_of(a | b), s));
                }
            }
        }
        out
    }

    pub fn wedge(&self, ka: usize, a: &[f64], kb: usize, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.count(ka + kb)];
        for (i, j, r, s) in self.wedge_table(ka, kb) {
            out[r] += s * a[i] * b[j];
        }
        out
    }

    /// Entries of the interior product with the coordinate vector e_a:
    /// (index of J in degree k, index of J∖a in degree k−1, sign).
    pub fn interior_table(&self, k: usize, axis: usize) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        if k == 0 {
            return out;
        }
        for (i, &m) in self.masks[k].iter().enumerate() {
            if m >> axis & 1 == 1 {
                let before = (m & ((1 << axis) - 1)).count_ones();
                let s = if before % 2 == 0 { 1.0 } else { -1.0 };
                out.push((i, self.index_of(m & !(1 << axis)), s));
            }
        }
        out
    }

    pub fn interior(&self, x: &[f64], k: usize, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.count(k.saturating_sub(1))];
        for (a, &xa) in x.iter().enumerate() {
            for (i, r, s) in self.interior_table(k, a) {
                out[r] += s * xa * w[i];
            }
        }
        out
    }

    /// Λ^k of a linear map: the matrix of k×k minors.
    pub fn compound(&self, k: usize, g: &DMatrix<f64>) -> DMatrix<f64> {
        let c = self.count(k);
        let mut out = DMatrix::zeros(c, c);
        for (i, &a) in self.masks[k].iter().enumerate() {
            let rows: Vec<usize> = members(a).collect();
            for (j, &b) in self.masks[k].iter().enumerate() {
                let cols: Vec<usize> = members(b).collect();
                let sub = DMatrix::from_fn(k, k, |r, s| g[(rows[r], cols[s])]);
                out[(i, j)] = if k == 0 { 1.0 } else { sub.determinant() };
            }
        }
        out
    }

    /// Hodge star Λ^k → Λ^{n−k} for metric `g` at one point.
    pub fn star(&self, k: usize, g: &DMatrix<f64>) -> DMatrix<f64> {
        let ginv = g.clone().try_inverse().expect("metric must be invertible");
        let raise = self.compound(k, &ginv);
        let vol = g.determinant().sqrt();
        let full = self.full_mask();
        let mut perm = DMatrix::zeros(self.count(self.n - k), self.count(k));
        for (i, &m) in self.masks[k].iter().enumerate() {
            let c = full & !m;
            perm[(self.index_of(c), i)] = wedge_sign(m, c).unwrap() * vol;
        }
        perm * raise
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_order() {
        let e = Ext::new(3);
        assert_eq!((0..4).map(|k| e.count(k)).collect::<Vec<_>>(), vec![1, 3, 3, 1]);
        // {0,1} < {0,2} < {1,2}
        assert_eq!(e.masks(2), &[0b011, 0b101, 0b110]);
        assert_eq!(binomial(5, 2), 10);
    }

    #[test]
    fn wedge_signs() {
        assert_eq!(wedge_sign(0b001, 0b010), Some(1.0));
        assert_eq!(wedge_sign(0b010, 0b001), Some(-1.0));
        assert_eq!(wedge_sign(0b001, 0b001), None);
        // dz ∧ dx∧dy = dx∧dy∧dz
        assert_eq!(wedge_sign(0b100, 0b011), Some(1.0));
        assert_eq!(wedge_sign(0b010, 0b101), Some(-1.0));
    }

    #[test]
    fn interior_of_area_form() {
        let e = Ext::new(2);
        // i_{∂x}(dx∧dy) = dy, i_{∂y}(dx∧dy) = −dx
        assert_eq!(e.interior(&[1.0, 0.0], 2, &[1.0]), vec![0.0, 1.0]);
        assert_eq!(e.interior(&[0.0, 1.0], 2, &[1.0]), vec![-1.0, 0.0]);
    }

    #[test]
    fn star_squares_to_sign() {
        let e = Ext::new(3);
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]);
        for k in 0..=3 {
            let s = e.star(3 - k, &g) * e.star(k, &g);
            let sign = if (k * (3 - k)) % 2 == 0 { 1.0 } else { -1.0 };
            let err = (s - DMatrix::identity(e.count(k), e.count(k)) * sign).abs().max();
            assert!(err < 1e-12, "k={} err={}", k, err);
        }
    }

    #[test]
    fn compound_is_multiplicative() {
        let e = Ext::new(4);
        let a = DMatrix::from_fn(4, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 1.5);
        let b = DMatrix::from_fn(4, 4, |i, j| ((i * 2 + j * 5) % 7) as f64 * 0.3);
        for k in 0..=4 {
            let lhs = e.compound(k, &(&a * &b));
            let rhs = e.compound(k, &a) * e.compound(k, &b);
            assert!((lhs - rhs).abs().max() < 1e-9);
        }
    }
}
