//! Kronecker products, column-stacking, and a numerical check of the
//! identities the solver is built on.
//!
//!     cargo run --example kron_identities

use crp::kronlin::{kron, unvec, vec, Matrix};
use crp::lemmas::check_lemmas;

fn main() -> crp::error::Result<()> {
    let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
    let b = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
    println!("A ⊗ B ={}", kron(&a, &b));

    // vec stacks columns
    let x = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    let v = vec(&x);
    println!("vec(X) = {:?}", v.as_slice());
    assert_eq!(unvec(v.as_slice(), 2, 3)?, x);

    // vec(AXB) = (Bᵀ ⊗ A) vec(X)
    let bb = Matrix::from_row_slice(3, 2, &[1.0, 0.0, 0.5, 1.0, 0.0, 2.0]);
    let lhs = vec(&(&a * &x * &bb));
    let rhs = kron(&bb.transpose(), &a) * vec(&x);
    println!(
        "vec(AXB) - (Bᵀ⊗A)vec(X) has norm {:.1e}",
        (lhs - rhs).norm()
    );

    print!("{}", check_lemmas(200, 0)?);
    Ok(())
}
