use crate::error::{Error, Result};

use super::grid::DensityMatrixGrid;

/// Sum of absolute eigenvalues of `rho1 - rho2`.
pub fn trace_distance(rho1: &DensityMatrixGrid, rho2: &DensityMatrixGrid) -> Result<f64> {
    if rho1.grid != rho2.grid || rho1.hbar != rho2.hbar {
        return Err(Error::GridMismatch);
    }
    let diff = &rho1.rho - &rho2.rho;
    Ok(diff.symmetric_eigenvalues().iter().map(|v| v.abs()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::GaussianState;
    use crate::quantum::grid::{gaussian_to_grid, PositionGrid};
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use num_complex::Complex64;

    fn coherent(x: f64, p: f64, grid: &PositionGrid) -> DensityMatrixGrid {
        let st = GaussianState::new(DVector::from_vec(vec![x, p]), DMatrix::identity(2, 2) * 0.5, 1.0).unwrap();
        gaussian_to_grid(&st, grid, 1.0).unwrap()
    }

    #[test]
    fn identical_and_orthogonal() {
        let grid = PositionGrid::new(128, -15.0, 15.0).unwrap();
        let a = coherent(0.0, 0.0, &grid);
        assert!(trace_distance(&a, &a).unwrap() < 1e-12);
        let far = coherent(9.0, 0.0, &grid);
        assert_relative_eq!(trace_distance(&a, &far).unwrap(), 2.0, epsilon = 1e-8);
    }

    #[test]
    fn coherent_overlap_formula() {
        let grid = PositionGrid::new(128, -12.0, 12.0).unwrap();
        let a = coherent(0.3, -0.2, &grid);
        let b = coherent(1.1, 0.5, &grid);
        let d2 = (0.8f64).powi(2) + (0.7f64).powi(2);
        let overlap = (-d2 / 2.0).exp();
        let expected = 2.0 * (1.0 - overlap).sqrt();
        assert_relative_eq!(trace_distance(&a, &b).unwrap(), expected, epsilon = 1e-8);
    }

    #[test]
    fn triangle_unitary_invariance_and_projectors() {
        let grid = PositionGrid::new(64, -8.0, 8.0).unwrap();
        let a = coherent(0.0, 0.0, &grid);
        let b = coherent(0.5, 0.3, &grid);
        let c = coherent(-0.4, 1.0, &grid);
        let ab = trace_distance(&a, &b).unwrap();
        let bc = trace_distance(&b, &c).unwrap();
        let ac = trace_distance(&a, &c).unwrap();
        assert!(ac <= ab + bc + 1e-12);

        // Conjugation by a diagonal phase is unitary.
        let n = grid.n;
        let u = DMatrix::from_fn(n, n, |j, k| if j == k { Complex64::from_polar(1.0, 0.37 * j as f64) } else { Complex64::from(0.0) });
        let rot = |r: &DensityMatrixGrid| DensityMatrixGrid { rho: &u * &r.rho * u.adjoint(), ..r.clone() };
        assert_relative_eq!(trace_distance(&rot(&a), &rot(&b)).unwrap(), ab, epsilon = 1e-10);

        // Projectors onto position windows distinguish no better than the norm.
        for (lo, hi) in [(0, 20), (10, 40), (30, 64)] {
            let q = |r: &DensityMatrixGrid| (lo..hi).map(|j| r.rho[(j, j)].re).sum::<f64>();
            assert!((q(&a) - q(&b)).abs() <= ab + 1e-12);
        }
    }
}
