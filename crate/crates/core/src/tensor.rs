//! Dense derivative tensors and the chain rule for flow jets.
//!
//! A level-`ℓ` tensor in dimension `d` holds `d^{ℓ+1}` entries indexed as
//! `[a; i_1, ..., i_ℓ]` (output component first, row-major).

/// Spatial jet of a vector field: `levels[ℓ]` is `∇^ℓ f` as a level-`ℓ` tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    pub dim: usize,
    pub levels: Vec<Vec<f64>>,
}

impl Jet {
    pub fn zeros(dim: usize, order: usize) -> Self {
        Self {
            dim,
            levels: (0..=order).map(|l| vec![0.0; level_len(dim, l)]).collect(),
        }
    }

    pub fn order(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn value(&self) -> &[f64] {
        &self.levels[0]
    }

    /// `self += c · other`, level by level.
    pub fn axpy(&mut self, c: f64, other: &Jet) {
        for (a, b) in self.levels.iter_mut().zip(&other.levels) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
        }
    }
}

pub fn level_len(dim: usize, level: usize) -> usize {
    dim.pow(level as u32 + 1)
}

/// All set partitions of `{0, ..., n-1}`, each as a list of blocks.
pub fn set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out = Vec::new();
    let mut current: Vec<Vec<usize>> = Vec::new();
    fn rec(i: usize, n: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            out.push(cur.clone());
            return;
        }
        for b in 0..cur.len() {
            cur[b].push(i);
            rec(i + 1, n, cur, out);
            cur[b].pop();
        }
        cur.push(vec![i]);
        rec(i + 1, n, cur, out);
        cur.pop();
    }
    if n > 0 {
        rec(0, n, &mut current, &mut out);
    }
    out
}

/// Chain rule for the level-`ℓ` component of the augmented field.
///
/// Given the jet of `Y` at `z⁰` (`field.levels[j] = ∇^j Y`) and the flow
/// derivatives `z[i] = ∇^i y` for `i = 1..=ℓ`, returns
/// `Σ_π ∇^{|π|} Y (z^{|B_1|}, ..., z^{|B_j|})` summed over set partitions `π`
/// of the `ℓ` derivative slots. This is the exact `ℓ`-th derivative of
/// `x ↦ Y(y(x))`; it is affine in `z^ℓ` (only the one-block partition
/// touches it).
pub fn chain_rule_level(field: &Jet, z: &[&[f64]], level: usize) -> Vec<f64> {
    let d = field.dim;
    assert!(level >= 1 && field.order() >= level && z.len() >= level);
    let mut out = vec![0.0; level_len(d, level)];
    let inner = d.pow(level as u32);
    let mut idx = vec![0usize; level];
    for partition in set_partitions(level) {
        let j = partition.len();
        let grad = &field.levels[j];
        let nb = d.pow(j as u32);
        let mut bidx = vec![0usize; j];
        for a in 0..d {
            for flat in 0..inner {
                decode(flat, d, &mut idx);
                let mut acc = 0.0;
                for bflat in 0..nb {
                    decode(bflat, d, &mut bidx);
                    let g = grad[a * nb + bflat];
                    if g == 0.0 {
                        continue;
                    }
                    let mut prod = g;
                    for (block, &b) in partition.iter().zip(&bidx) {
                        let zl = z[block.len() - 1];
                        let sub = d.pow(block.len() as u32);
                        let off = block.iter().fold(0, |acc, &p| acc * d + idx[p]);
                        prod *= zl[b * sub + off];
                        if prod == 0.0 {
                            break;
                        }
                    }
                    acc += prod;
                }
                out[a * inner + flat] += acc;
            }
        }
    }
    out
}

fn decode(mut flat: usize, d: usize, idx: &mut [usize]) {
    for slot in idx.iter_mut().rev() {
        *slot = flat % d;
        flat /= d;
    }
}

/// Symmetrise the derivative slots of a level-`ℓ` tensor in place.
/// Returns the largest absolute change (the asymmetry residual).
pub fn symmetrize(t: &mut [f64], dim: usize, level: usize) -> f64 {
    if level < 2 || dim == 1 {
        return 0.0;
    }
    let inner = dim.pow(level as u32);
    let perms = permutations(level);
    let mut idx = vec![0usize; level];
    let mut pidx = vec![0usize; level];
    let mut residual: f64 = 0.0;
    let orig = t.to_vec();
    for a in 0..dim {
        for flat in 0..inner {
            decode(flat, dim, &mut idx);
            let mut s = 0.0;
            for p in &perms {
                for (k, &src) in p.iter().enumerate() {
                    pidx[k] = idx[src];
                }
                let f = pidx.iter().fold(0, |acc, &v| acc * dim + v);
                s += orig[a * inner + f];
            }
            let v = s / perms.len() as f64;
            residual = residual.max((v - orig[a * inner + flat]).abs());
            t[a * inner + flat] = v;
        }
    }
    residual
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Identity matrix as a level-1 tensor.
pub fn identity(dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim * dim];
    for i in 0..dim {
        m[i * dim + i] = 1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_numbers() {
        let counts: Vec<usize> = (1..=5).map(|n| set_partitions(n).len()).collect();
        assert_eq!(counts, vec![1, 2, 5, 15, 52]);
    }

    #[test]
    fn scalar_chain_rule_third_order() {
        // Y(y) with Y' = 2, Y'' = 3, Y''' = 5; y' = 7, y'' = 11, y''' = 13.
        let field = Jet { dim: 1, levels: vec![vec![0.0], vec![2.0], vec![3.0], vec![5.0]] };
        let z1 = [7.0];
        let z2 = [11.0];
        let z3 = [13.0];
        let zs: [&[f64]; 3] = [&z1, &z2, &z3];
        assert_eq!(chain_rule_level(&field, &zs, 1), vec![14.0]);
        assert_eq!(chain_rule_level(&field, &zs, 2), vec![3.0 * 49.0 + 2.0 * 11.0]);
        // Faà di Bruno: Y''' y'^3 + 3 Y'' y' y'' + Y' y'''.
        let expect = 5.0 * 343.0 + 3.0 * 3.0 * 7.0 * 11.0 + 2.0 * 13.0;
        assert_eq!(chain_rule_level(&field, &zs, 3), vec![expect]);
    }

    #[test]
    fn symmetrize_averages_mixed_partials() {
        let mut t = vec![1.0, 2.0, 4.0, 3.0, 0.0, 0.0, 0.0, 0.0];
        let r = symmetrize(&mut t, 2, 2);
        assert_eq!(&t[..4], &[1.0, 3.0, 3.0, 3.0]);
        assert_eq!(r, 1.0);
    }
}
