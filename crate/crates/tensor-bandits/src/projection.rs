//! Change of basis that concentrates a low-multilinear-rank system tensor
//! into a few leading coordinates. Given per-mode bases Û_n, every tensor is
//! rotated by [Û_n, Û_{n,⊥}]ᵀ along each mode and flattened with the
//! coordinates ordered by how many of their indices fall in a complement
//! ("tail") range. The leading q(ρ) coordinates then carry almost all of the
//! system tensor's mass, which is what the bandit phase exploits.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::tensor::DenseTensor;
use crate::tucker::complement_basis;

/// Binomial coefficient; the arguments here stay tiny (N ≤ 8 or so).
pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as usize
}

/// Number of modes of a multi-index whose entry lands in the complement
/// range, i.e. `idx[n] >= r` with 0-based indices.
pub fn tail_count(idx: &[usize], r: usize) -> usize {
    idx.iter().filter(|&&i| i >= r).count()
}

/// Count of coordinates whose tail count is strictly below `k` in a cubical
/// (d,..,d) order-N tensor with leading range r:
/// Σ_{i=0}^{k−1} C(N,i) · r^(N−i) · (d−r)^i.
pub fn q_of(k: usize, d: usize, r: usize, n_modes: usize) -> usize {
    assert!(r <= d);
    assert!(k <= n_modes + 1);
    let mut total = 0usize;
    for i in 0..k {
        total += binomial(n_modes, i) * r.pow((n_modes - i) as u32) * (d - r).pow(i as u32);
    }
    total
}

/// Per-mode bases, their complements, and the tail-ordered flattening.
#[derive(Debug, Clone)]
pub struct ProjectionMap {
    pub factors: Vec<Matrix>,
    pub complements: Vec<Matrix>,
    /// [Û_n | Û_{n,⊥}], one square orthogonal matrix per mode.
    pub basis: Vec<Matrix>,
    pub rho: usize,
    /// Flat-index permutation: position k of a projected vector holds
    /// coordinate `perm[k]` of the row-major flattening.
    pub perm: Vec<usize>,
    pub q_rho: usize,
    d: usize,
    r: usize,
    /// Half-open coordinate ranges of the permuted vector, one per tail
    /// count 0..=N.
    block_ranges: Vec<(usize, usize)>,
}

impl ProjectionMap {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn r(&self) -> usize {
        self.r
    }

    pub fn n_modes(&self) -> usize {
        self.factors.len()
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Coordinate range of the permuted vector holding tail count `k`.
    pub fn block_range(&self, k: usize) -> (usize, usize) {
        self.block_ranges[k]
    }
}

/// Build the projection for shared-shape orthonormal factors (each d×r).
pub fn build_projection(factors: &[Matrix], rho: usize) -> Result<ProjectionMap> {
    if factors.is_empty() {
        return Err(Error::Invalid("at least one factor required".into()));
    }
    let n_modes = factors.len();
    if rho == 0 || rho > n_modes {
        return Err(Error::Invalid(format!(
            "rho must lie in 1..={n_modes}, got {rho}"
        )));
    }
    let d = factors[0].rows;
    let r = factors[0].cols;
    for (n, f) in factors.iter().enumerate() {
        if f.rows != d || f.cols != r {
            return Err(Error::Shape(format!(
                "factor {n} is {}x{}, expected {d}x{r}",
                f.rows, f.cols
            )));
        }
    }
    let mut complements = Vec::with_capacity(n_modes);
    let mut basis = Vec::with_capacity(n_modes);
    for f in factors {
        let c = complement_basis(f)?;
        basis.push(f.hcat(&c));
        complements.push(c);
    }
    let dim = d.pow(n_modes as u32);
    let mut tails = vec![0u8; dim];
    {
        let mut idx = vec![0usize; n_modes];
        for (flat, t) in tails.iter_mut().enumerate() {
            *t = tail_count(&idx, r) as u8;
            // advance the row-major multi-index
            for n in (0..n_modes).rev() {
                idx[n] += 1;
                if idx[n] < d {
                    break;
                }
                idx[n] = 0;
                let _ = flat;
            }
        }
    }
    // Row-major flat order coincides with lexicographic order of the index
    // tuples, so a stable sort on tail count gives the required order.
    let mut perm: Vec<usize> = (0..dim).collect();
    perm.sort_by_key(|&f| tails[f]);
    let mut block_ranges = Vec::with_capacity(n_modes + 1);
    for k in 0..=n_modes {
        block_ranges.push((q_of(k, d, r, n_modes), q_of(k + 1, d, r, n_modes)));
    }
    let q_rho = q_of(rho, d, r, n_modes);
    Ok(ProjectionMap {
        factors: factors.to_vec(),
        complements,
        basis,
        rho,
        perm,
        q_rho,
        d,
        r,
        block_ranges,
    })
}

fn project(map: &ProjectionMap, t: &DenseTensor) -> Result<Vec<f64>> {
    let want = vec![map.d; map.n_modes()];
    if t.shape() != want.as_slice() {
        return Err(Error::Shape(format!(
            "tensor shape {:?} does not match projection shape {want:?}",
            t.shape()
        )));
    }
    let mut out = t.clone();
    for (n, b) in map.basis.iter().enumerate() {
        out = out.mode_n_product(&b.transpose(), n)?;
    }
    out.vectorize_perm(&map.perm)
}

/// Rotate an action tensor into the projection's coordinates and flatten it
/// tail-ordered. The Euclidean norm equals the tensor's Frobenius norm.
pub fn project_action(map: &ProjectionMap, a: &DenseTensor) -> Result<Vec<f64>> {
    project(map, a)
}

/// Same rotation applied to a system tensor (diagnostics and tests; the
/// learner never observes this).
pub fn project_system(map: &ProjectionMap, x: &DenseTensor) -> Result<Vec<f64>> {
    project(map, x)
}

/// Euclidean mass of the coordinates with tail count exactly `k`, over all
/// C(N,k) blocks with that many tails.
pub fn block_norm(map: &ProjectionMap, x: &DenseTensor, k: usize) -> Result<f64> {
    if k > map.n_modes() {
        return Err(Error::Invalid(format!(
            "tail count {k} exceeds order {}",
            map.n_modes()
        )));
    }
    let y = project_system(map, x)?;
    let (lo, hi) = map.block_range(k);
    Ok(y[lo..hi].iter().map(|v| v * v).sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::random_orthonormal;
    use crate::testutil::{assert_close, random_tensor, tensor_with_spectrum};
    use crate::tucker::hosvd;
    use rand::SeedableRng;

    #[test]
    fn tail_count_and_census_match_closed_form() {
        assert_eq!(tail_count(&[0, 0, 0], 2), 0);
        assert_eq!(tail_count(&[2, 0, 4], 2), 2);

        // exhaustive histogram over all (5,5,5) indices with r=2
        let (d, r, n) = (5usize, 2usize, 3usize);
        let mut below3 = 0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    if tail_count(&[i, j, k], r) < 3 {
                        below3 += 1;
                    }
                }
            }
        }
        assert_eq!(below3, 98);
        assert_eq!(q_of(3, d, r, n), 98);
        assert_eq!(q_of(3, d, r, n), d.pow(3) - (d - r).pow(3));
    }

    #[test]
    fn q_of_matches_brute_force_census_on_grid() {
        for n_modes in [3usize, 4] {
            for d in 3..=6usize {
                for r in 1..=d {
                    let dim = d.pow(n_modes as u32);
                    let mut census = vec![0usize; n_modes + 1];
                    let mut idx = vec![0usize; n_modes];
                    for _ in 0..dim {
                        census[tail_count(&idx, r)] += 1;
                        for m in (0..n_modes).rev() {
                            idx[m] += 1;
                            if idx[m] < d {
                                break;
                            }
                            idx[m] = 0;
                        }
                    }
                    let mut cum = 0;
                    for k in 0..=n_modes + 1 {
                        assert_eq!(q_of(k, d, r, n_modes), cum, "d={d} r={r} k={k}");
                        if k <= n_modes {
                            cum += census[k];
                        }
                    }
                    assert_eq!(q_of(1, d, r, n_modes), r.pow(n_modes as u32));
                    assert_eq!(q_of(n_modes + 1, d, r, n_modes), dim);
                }
            }
        }
    }

    #[test]
    fn build_projection_invariants() {
        let mut rng = crate::Rng::seed_from_u64(30);
        let (d, r, n_modes) = (5usize, 2usize, 3usize);
        let factors: Vec<Matrix> = (0..n_modes)
            .map(|_| random_orthonormal(d, r, &mut rng))
            .collect();
        let map = build_projection(&factors, 3).unwrap();
        assert_eq!(map.q_rho, 98);
        assert_eq!(map.dim(), 125);
        for b in &map.basis {
            let g = b.tr_matmul(b);
            for i in 0..d {
                for j in 0..d {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((g.get(i, j) - want).abs() <= 1e-10);
                }
            }
        }
        // perm round-trips as a bijection
        let mut seen = vec![false; map.dim()];
        for &p in &map.perm {
            assert!(!seen[p]);
            seen[p] = true;
        }
        // tail counts are non-decreasing along the permuted order
        let mut last = 0;
        for &p in &map.perm {
            let mut idx = Vec::new();
            let mut f = p;
            for _ in 0..n_modes {
                idx.push(f % d);
                f /= d;
            }
            idx.reverse();
            let t = tail_count(&idx, r);
            assert!(t >= last);
            last = t;
        }

        // full-rank factors: no complement, q equals the whole dimension
        let full: Vec<Matrix> = (0..3).map(|_| random_orthonormal(3, 3, &mut rng)).collect();
        let map_full = build_projection(&full, 2).unwrap();
        assert_eq!(map_full.q_rho, 27);
        assert_eq!(map_full.perm, (0..27).collect::<Vec<_>>());

        assert!(build_projection(&factors, 0).is_err());
        assert!(build_projection(&factors, 4).is_err());
    }

    #[test]
    fn projection_preserves_norms_and_reindexes_under_identity() {
        let mut rng = crate::Rng::seed_from_u64(31);
        let (d, r, n_modes) = (4usize, 2usize, 3usize);
        let eye = Matrix::identity(d);
        let id_factors: Vec<Matrix> = (0..n_modes).map(|_| eye.col_block(0, r)).collect();
        let map = build_projection(&id_factors, 2).unwrap();
        let a = random_tensor(&[d, d, d], &mut rng);
        let out = project_action(&map, &a).unwrap();
        assert_eq!(out, a.vectorize_perm(&map.perm).unwrap());

        let zero = DenseTensor::zeros(vec![d, d, d]);
        assert!(project_action(&map, &zero).unwrap().iter().all(|&v| v == 0.0));

        let factors: Vec<Matrix> = (0..n_modes)
            .map(|_| random_orthonormal(d, r, &mut rng))
            .collect();
        let map2 = build_projection(&factors, 3).unwrap();
        let norm_out = project_action(&map2, &a)
            .unwrap()
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        assert_close(norm_out, a.frob_norm(), 1e-10);

        assert!(project_action(&map2, &DenseTensor::zeros(vec![d, d])).is_err());
    }

    #[test]
    fn rotated_inner_products_match_raw_inner_products() {
        let mut rng = crate::Rng::seed_from_u64(32);
        let (d, r, n_modes) = (4usize, 2usize, 3usize);
        for _ in 0..50 {
            let factors: Vec<Matrix> = (0..n_modes)
                .map(|_| random_orthonormal(d, r, &mut rng))
                .collect();
            let map = build_projection(&factors, 3).unwrap();
            let a = random_tensor(&[d, d, d], &mut rng);
            let x = random_tensor(&[d, d, d], &mut rng);
            let b = project_action(&map, &a).unwrap();
            let y = project_system(&map, &x).unwrap();
            let got: f64 = b.iter().zip(&y).map(|(p, q)| p * q).sum();
            let want = a.inner(&x).unwrap();
            assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn exact_factors_kill_every_tail_coordinate() {
        let mut rng = crate::Rng::seed_from_u64(33);
        let (d, r, n_modes) = (5usize, 2usize, 3usize);
        let x = tensor_with_spectrum(d, n_modes, &[1.0, 0.7], &mut rng);
        let dec = hosvd(&x, &[r, r, r]).unwrap();
        let map = build_projection(&dec.factors, 3).unwrap();
        let y = project_system(&map, &x).unwrap();
        let q1 = q_of(1, d, r, n_modes);
        for &v in &y[q1..] {
            assert!(v.abs() <= 1e-10);
        }
        for k in 1..=n_modes {
            assert!(block_norm(&map, &x, k).unwrap() <= 1e-10);
        }
        let zero = DenseTensor::zeros(vec![d, d, d]);
        assert!(project_system(&map, &zero).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn block_masses_partition_the_norm() {
        let mut rng = crate::Rng::seed_from_u64(34);
        let (d, r, n_modes) = (4usize, 2usize, 3usize);
        let factors: Vec<Matrix> = (0..n_modes)
            .map(|_| random_orthonormal(d, r, &mut rng))
            .collect();
        let map = build_projection(&factors, 2).unwrap();
        let x = random_tensor(&[d, d, d], &mut rng);
        let total: f64 = (0..=n_modes)
            .map(|k| block_norm(&map, &x, k).unwrap().powi(2))
            .sum();
        assert_close(total, x.frob_norm().powi(2), 1e-12);
        assert!(block_norm(&map, &x, n_modes + 1).is_err());
    }

    /// Tail-mass decay: with bases estimated from a perturbed tensor, the
    /// k-tail mass of the clean tensor decays geometrically in the relative
    /// error, uniformly over its C(N,k) blocks.
    #[test]
    fn tail_block_mass_decays_geometrically() {
        let mut rng = crate::Rng::seed_from_u64(35);
        let (d, r, n_modes) = (5usize, 2usize, 3usize);
        for trial in 0..200 {
            let x = tensor_with_spectrum(d, n_modes, &[0.9, 0.6], &mut rng);
            let c = x.frob_norm();
            let omega = 0.6;
            let eps = 0.002 + 0.01 * (trial % 10) as f64;
            let noise = random_tensor(&[d, d, d], &mut rng);
            let noisy = DenseTensor::new(
                x.shape().to_vec(),
                x.data()
                    .iter()
                    .zip(noise.data())
                    .map(|(a, b)| a + eps * b)
                    .collect(),
            )
            .unwrap();
            let dec_hat = hosvd(&noisy, &[r, r, r]).unwrap();
            let eta = dec_hat.reconstruct().sub(&x).unwrap().frob_norm();
            let map = build_projection(&dec_hat.factors, 3).unwrap();
            for k in 0..=n_modes {
                let mass = block_norm(&map, &x, k).unwrap();
                let bound =
                    (binomial(n_modes, k) as f64).sqrt() * c * (eta / omega).powi(k as i32);
                assert!(
                    mass <= bound + 1e-9,
                    "trial {trial} k={k}: {mass} > {bound} (eta {eta})"
                );
            }
        }
    }
}
