//! Full decomposition vs. Lanczos extremal pairs on a random symmetric matrix.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rckl::linalg::{
    full_eigendecomposition, largest_eigenpair, smallest_eigenpair, top_k_eigenpairs,
    DEFAULT_EIG_TOL,
};
use rckl::SymMatrix;

fn main() -> rckl::Result<()> {
    let n = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let m = SymMatrix::from_fn(n, |_, _| rng.random_range(-1.0..1.0));

    let full = full_eigendecomposition(&m)?;
    let lo = smallest_eigenpair(&m, DEFAULT_EIG_TOL)?;
    let hi = largest_eigenpair(&m, DEFAULT_EIG_TOL)?;
    println!("smallest: full {:+.10}  lanczos {:+.10}  residual {:.2e}", full.min_value(), lo.value, lo.residual(&m));
    println!("largest:  full {:+.10}  lanczos {:+.10}  residual {:.2e}", full.max_value(), hi.value, hi.residual(&m));

    let recon = full.reconstruct();
    println!("reconstruction error (max abs): {:.2e}", recon.max_abs_diff(&m));

    for pair in top_k_eigenpairs(&m, 3, DEFAULT_EIG_TOL)? {
        println!("top-3 pair: {:+.6}", pair.value);
    }
    Ok(())
}
