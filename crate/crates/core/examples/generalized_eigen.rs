//! Symmetric-definite generalized eigenproblems `M q = λ N q`.
//!
//!     cargo run --example generalized_eigen

use crp::kronlin::{
    d_normalize, solve_gen_eig, solve_largest_gen_eig, Jitter, Matrix, SymmetricProblem,
};

fn main() -> crp::error::Result<()> {
    let m = Matrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 0.5, 0.0, 0.5, 1.0]);
    let n = Matrix::from_row_slice(3, 3, &[2.0, 0.2, 0.0, 0.2, 1.0, 0.0, 0.0, 0.0, 0.5]);
    let problem = SymmetricProblem::new(m, n.clone())?;

    for (i, pair) in solve_gen_eig(&problem, 3, Jitter::Never)?
        .iter()
        .enumerate()
    {
        println!(
            "λ{} = {:.6}  q = {:?}  Rayleigh quotient = {:.6}",
            i + 1,
            pair.value,
            pair.vector.as_slice(),
            problem.rayleigh(&pair.vector)
        );
    }

    // Rescale the dominant vector so that qᵀ N q = 1.
    let top = solve_largest_gen_eig(&problem)?;
    let q = d_normalize(&top.vector, &n)?;
    println!("after N-normalization: qᵀNq = {:.12}", q.dot(&(&n * &q)));
    Ok(())
}
