//! Dense tensor fundamentals: construction, indexing, mode-n unfolding,
//! mode-n products with orthonormal maps, inner products, and the plain-text
//! round trip used by the import/export CLI commands.
//!
//! Run with: cargo run --example tensor_basics

use rand::SeedableRng as _;
use tensor_bandits::error::Result;
use tensor_bandits::linalg::random_orthonormal;
use tensor_bandits::tensor::DenseTensor;
use tensor_bandits::Rng;

fn main() -> Result<()> {
    let mut rng = Rng::seed_from_u64(7);

    // A 2 x 3 x 4 tensor whose entry at (i, j, k) is i + 10j + 100k, so each
    // unfolding is easy to eyeball.
    let shape = vec![2usize, 3, 4];
    let mut x = DenseTensor::zeros(shape.clone());
    for flat in 0..x.len() {
        let idx = x.multi_index(flat);
        x.set(&idx, idx[0] as f64 + 10.0 * idx[1] as f64 + 100.0 * idx[2] as f64);
    }
    println!("shape {:?}, {} entries", x.shape(), x.len());
    println!("x[1,2,3] = {}", x.get(&[1, 2, 3]));

    // Mode-n matricization: mode n becomes the rows, the remaining modes are
    // flattened into columns with the lower-numbered mode varying fastest.
    for mode in 0..x.order() {
        let m = x.matricize(mode);
        println!("mode-{mode} unfolding is {} x {}", m.rows, m.cols);
    }
    let m0 = x.matricize(0);
    println!("first row of the mode-0 unfolding starts {} {} {}",
        m0.get(0, 0), m0.get(0, 1), m0.get(0, 2));

    // Mode products with orthonormal maps preserve the Frobenius norm; a
    // square orthonormal map is invertible by its transpose.
    let q = random_orthonormal(3, 3, &mut rng);
    let rotated = x.mode_n_product(&q, 1)?;
    println!(
        "norm before/after a mode-1 rotation: {:.12} / {:.12}",
        x.frob_norm(),
        rotated.frob_norm()
    );
    let back = rotated.mode_n_product(&q.transpose(), 1)?;
    let round_trip_err = back.sub(&x)?.frob_norm();
    println!("rotate-then-undo error: {round_trip_err:.3e}");

    // Inner products agree with the vectorized dot product.
    let y = DenseTensor::new(shape, (0..24).map(|v| v as f64).collect())?;
    let direct: f64 = x
        .vectorize()
        .iter()
        .zip(y.vectorize().iter())
        .map(|(a, b)| a * b)
        .sum();
    println!("<x, y> = {} (vectorized check: {})", x.inner(&y)?, direct);

    // Plain-text serialization round trip (the on-disk instance format).
    let text = x.to_text();
    let parsed = DenseTensor::from_text(&text)?;
    println!(
        "text round trip: {} lines, reparse error {:.1e}",
        text.lines().count(),
        parsed.sub(&x)?.frob_norm()
    );
    Ok(())
}
