//! Shared fixtures for the integration tests: the structured reference
//! forward operator, matrix text rendering matching the CLI formats, and a
//! runner for the `twr` binary.

#![allow(dead_code)]

use std::path::Path;
use std::process::Command;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use twr_core::Matrix;

/// Builds a deterministic well-conditioned forward operator in which every
/// even-indexed dipole is resolved by its own orthogonal sensor direction
/// and every odd-indexed dipole leaks weakly onto two neighbouring
/// directions.
///
/// With `n` sensors and `p_dip = 2n` dipoles (three orientation columns
/// each), a seeded random orthogonal basis `Q` (QR of a standard normal
/// draw, sign-normalized) assigns sensor direction `k` to even dipole
/// `d = 2k` with a seeded random unit moment `w_d`; odd dipole `d = 2k + 1`
/// couples with weight `leak / sqrt(2)` to directions `k` and
/// `(k + 1) mod n`. The result is `n x 3 p_dip` with condition number close
/// to one: the problem stays severely underdetermined (`p = 6n`) while no
/// dipole is near-invisible to the sensors.
///
/// Returns the operator and the per-dipole unit moments `w_d` (useful for
/// placing sources whose direction the sensors can actually see).
pub fn resolved_operator(
    n_sensors: usize,
    n_dipoles: usize,
    leak: f64,
    seed: u64,
) -> (Matrix, Vec<[f64; 3]>) {
    assert_eq!(
        n_dipoles,
        2 * n_sensors,
        "resolved operator pairs two dipoles per sensor direction"
    );
    let n = n_sensors;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            raw[(i, j)] = rng.sample::<f64, _>(StandardNormal);
        }
    }
    let qr = raw.qr();
    let r = qr.r();
    let mut q = qr.q();
    // Fix the QR sign ambiguity so the basis is a canonical function of the
    // seed: make the diagonal of R nonnegative.
    for c in 0..n {
        if r[(c, c)] < 0.0 {
            for i in 0..n {
                q[(i, c)] = -q[(i, c)];
            }
        }
    }

    let mut wt = Matrix::zeros(n, 3 * n_dipoles);
    let mut moments = Vec::with_capacity(n_dipoles);
    let half = leak * std::f64::consts::FRAC_1_SQRT_2;
    for d in 0..n_dipoles {
        let mut w = [0.0f64; 3];
        for c in &mut w {
            *c = rng.sample::<f64, _>(StandardNormal);
        }
        let norm = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
        for c in &mut w {
            *c /= norm;
        }
        if d % 2 == 0 {
            let k = d / 2;
            for c in 0..3 {
                wt[(k, 3 * d + c)] = w[c];
            }
        } else {
            let k = (d - 1) / 2;
            let k2 = (k + 1) % n;
            for c in 0..3 {
                wt[(k, 3 * d + c)] = half * w[c];
                wt[(k2, 3 * d + c)] = half * w[c];
            }
        }
        moments.push(w);
    }
    (&q * &wt, moments)
}

/// Renders a matrix in the CLI text format (`rows cols` header, one
/// comma-separated line per row, shortest round-trip decimals).
pub fn matrix_to_text(m: &Matrix) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

/// Parses the CLI matrix text format.
pub fn matrix_from_text(text: &str) -> Matrix {
    let mut lines = text.lines();
    let header: Vec<usize> = lines
        .next()
        .expect("header line")
        .split_whitespace()
        .map(|t| t.parse().expect("header number"))
        .collect();
    let cells: Vec<f64> = lines
        .flat_map(|l| l.split(',').map(|c| c.trim().parse().expect("cell")))
        .collect();
    assert_eq!(cells.len(), header[0] * header[1], "cell count");
    Matrix::from_row_iterator(header[0], header[1], cells)
}

/// Ratio of the largest to the smallest singular value.
pub fn condition_number(x: &Matrix) -> f64 {
    let d = &twr_core::stage1::thin_svd(x).expect("svd").d;
    d[0] / d[d.len() - 1]
}

/// Runs the `twr` binary in `dir`, returning `(exit code, stdout, stderr)`.
pub fn run_twr(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_twr"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs");
    (
        output.status.code().expect("exit code"),
        String::from_utf8(output.stdout).expect("utf8 stdout"),
        String::from_utf8(output.stderr).expect("utf8 stderr"),
    )
}
