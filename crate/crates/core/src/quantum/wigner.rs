use std::f64::consts::PI;

use num_complex::Complex64;

use crate::classical::phase::{PhaseField, PhaseGrid};

use super::grid::{DensityMatrixGrid, PositionGrid, Spectral};

/// The phase grid on which the discrete Wigner transform is exact: nodes of
/// the position grid and `n` momenta spaced by `pi hbar / (n dx)`.
pub fn wigner_phase_grid(grid: &PositionGrid, hbar: f64) -> PhaseGrid {
    let n = grid.n;
    let dx = grid.dx();
    let dp = PI * hbar / (n as f64 * dx);
    PhaseGrid {
        nx: n,
        np: n,
        x_min: grid.x_min - 0.5 * dx,
        x_max: grid.x_max - 0.5 * dx,
        p_min: -(n as f64 / 2.0 + 0.5) * dp,
        p_max: (n as f64 / 2.0 - 0.5) * dp,
    }
}

/// `W(x, p) = (2 pi hbar)^{-1} int dy e^{-i p y / hbar} rho(x + y/2, x - y/2)`
/// sampled at the nodes of [`wigner_phase_grid`].
pub fn wigner_transform_grid(rho: &DensityMatrixGrid) -> PhaseField {
    let n = rho.grid.n;
    let pg = wigner_phase_grid(&rho.grid, rho.hbar);
    let spectral = Spectral::new(n);
    let mut values = vec![0.0; n * n];
    let mut g = vec![Complex64::new(0.0, 0.0); n];
    let half = n as i64 / 2;
    let norm = 1.0 / (PI * rho.hbar);
    for j in 0..n {
        g.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for k in -half..half {
            let (a, b) = (j as i64 + k, j as i64 - k);
            if a < 0 || b < 0 || a >= n as i64 || b >= n as i64 {
                continue;
            }
            g[k.rem_euclid(n as i64) as usize] = rho.rho[(a as usize, b as usize)];
        }
        spectral.forward_vec(&mut g);
        for m in 0..n {
            let idx = (m as i64 - half).rem_euclid(n as i64) as usize;
            values[j * n + m] = g[idx].re * norm;
        }
    }
    PhaseField { grid: pg, values, time: rho.time }
}
