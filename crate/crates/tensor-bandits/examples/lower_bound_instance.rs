//! The worst-case family behind the regret floor: a corner-supported
//! low-rank tensor whose per-coordinate gap is calibrated so that no policy
//! can beat sqrt(r^N T) regret in expectation over the family. This example
//! builds one instance and checks the advertised facts about it.
//!
//! Run with: cargo run --example lower_bound_instance

use rand::SeedableRng as _;
use tensor_bandits::env::{gen_lower_bound_instance, lower_bound_delta};
use tensor_bandits::error::Result;
use tensor_bandits::projection::tail_count;
use tensor_bandits::tucker::{multilinear_rank, RANK_TOL};
use tensor_bandits::Rng;

fn main() -> Result<()> {
    let mut rng = Rng::seed_from_u64(42);
    let (d, n_modes, r, t_horizon) = (4usize, 3usize, 2usize, 1536usize);

    let x = gen_lower_bound_instance(d, n_modes, r, t_horizon, &mut rng)?;
    let delta = lower_bound_delta(r, n_modes, t_horizon);
    println!(
        "instance: shape {:?}, horizon {t_horizon}, entry gap delta = {delta:.6} (= 1/192 here)",
        x.shape()
    );

    // Every nonzero entry lives in the leading r x r x r corner and equals
    // +delta or -delta; the signs are the random part of the family.
    let mut corner = 0usize;
    let mut outside = 0usize;
    for flat in 0..x.len() {
        let idx = x.multi_index(flat);
        let v = x.get(&idx);
        if tail_count(&idx, r) == 0 {
            corner += 1;
            assert!((v.abs() - delta).abs() < 1e-15, "corner entries are +/-delta");
        } else {
            outside += 1;
            assert_eq!(v, 0.0, "support must stay in the corner");
        }
    }
    println!("support: {corner} corner entries at +/-delta, {outside} zeros elsewhere");

    // The squared norm and the multilinear rank are pinned by construction.
    let nf2 = x.frob_norm().powi(2);
    let want = (r as f64).powi(2 * n_modes as i32) / (192.0 * t_horizon as f64);
    println!("squared norm {nf2:.6e} (closed form {want:.6e})");
    println!("multilinear rank {:?} (at most ({r},{r},{r}))", multilinear_rank(&x, RANK_TOL));

    // The gap shrinks like 1/sqrt(T): doubling the horizon scales the
    // per-entry gap by 1/sqrt(2), which is what makes the family hard at
    // every horizon.
    println!();
    println!("{:>8} {:>12}", "horizon", "gap");
    for t in [r.pow(n_modes as u32) / 2, 384, 1536, 6144, 24576] {
        println!("{t:>8} {:>12.6}", lower_bound_delta(r, n_modes, t));
    }

    // The construction needs r^N <= 2T so the gap stays a valid reward.
    let err = gen_lower_bound_instance(d, n_modes, r, 3, &mut rng).unwrap_err();
    println!();
    println!("degenerate horizon is rejected: {err}");
    Ok(())
}
