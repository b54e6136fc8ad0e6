//! Fixed instances shared by the benchmarks.

use nalgebra::{DMatrix, DVector};

use ratiodual::io::{generate, GenOptions};
use ratiodual::{FractionalProgram, ProgramData};

/// One-dimensional instance whose `mu` interval is `[1, 2]`.
pub fn instance_a() -> FractionalProgram {
    FractionalProgram::validate(ProgramData {
        q: DMatrix::from_element(1, 1, 2.0),
        f: DVector::from_element(1, 0.0),
        b_op: DMatrix::from_element(1, 1, 1.0),
        lambda: 1.0,
        h: DMatrix::from_element(1, 1, -2.0),
        b: DVector::from_element(1, -2.0),
        delta: 0.5,
    })
    .expect("valid instance")
}

/// Generated instance with `m = n` rows.
pub fn generated(n: usize, seed: u64) -> FractionalProgram {
    let data = generate(&GenOptions {
        n,
        m: n,
        seed,
        conditioning: 1.0,
    })
    .expect("generator succeeds");
    FractionalProgram::validate(data).expect("generated instances are valid")
}
