//! Interleaved `(a_j, a*_j)` basis helpers.
//!
//! Slot `2p` holds `a` and slot `2p + 1` holds `a*` for the mode at grid
//! position `p`. The particle-hole swap `Σx` exchanges the two slots of
//! every mode.

use nalgebra::DMatrix;

use crate::Complex;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Component {
    /// Annihilation amplitude `a_j`.
    A,
    /// Conjugate amplitude `a*_j`.
    Conj,
}

impl Component {
    fn offset(self) -> usize {
        match self {
            Component::A => 0,
            Component::Conj => 1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Component::A => "a",
            Component::Conj => "a*",
        }
    }
}

/// Row/column of a mode component for a grid position.
pub fn slot(position: usize, component: Component) -> usize {
    2 * position + component.offset()
}

/// `Σx conj(m) Σx`: conjugate and swap each mode's `(a, a*)` pair on both sides.
pub fn particle_hole_mirror(m: &DMatrix<Complex>) -> DMatrix<Complex> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r ^ 1, c ^ 1)].conj())
}

/// Largest `|m − Σx conj(m) Σx|` entry.
pub fn particle_hole_defect(m: &DMatrix<Complex>) -> f64 {
    let mut worst = 0.0f64;
    for c in 0..m.ncols() {
        for r in 0..m.nrows() {
            let d = (m[(r, c)] - m[(r ^ 1, c ^ 1)].conj()).norm();
            worst = worst.max(d);
        }
    }
    worst
}

/// Reduce a `2n×2n` slot matrix to `n×n` by the maximum over each 2×2 mode block.
pub fn reduce_to_modes(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows() / 2;
    DMatrix::from_fn(n, m.ncols() / 2, |i, j| {
        let r = 2 * i;
        let c = 2 * j;
        m[(r, c)]
            .max(m[(r + 1, c)])
            .max(m[(r, c + 1)])
            .max(m[(r + 1, c + 1)])
    })
}

/// Slot label such as `a_-3` or `a*_12`.
pub fn slot_label(index: i64, component: Component) -> String {
    format!("{}_{}", component.label(), index)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slots_interleave() {
        assert_eq!(slot(0, Component::A), 0);
        assert_eq!(slot(0, Component::Conj), 1);
        assert_eq!(slot(3, Component::Conj), 7);
    }

    #[test]
    fn mirror_is_an_involution() {
        let m = DMatrix::from_fn(4, 4, |r, c| Complex::new(r as f64, c as f64 * 0.5 - 1.0));
        let back = particle_hole_mirror(&particle_hole_mirror(&m));
        assert_eq!(back, m);
    }

    #[test]
    fn defect_zero_for_structured_matrix() {
        let a = Complex::new(0.3, -1.2);
        let b = Complex::new(-0.7, 0.1);
        let m = DMatrix::from_row_slice(2, 2, &[a, b, b.conj(), a.conj()]);
        assert_eq!(particle_hole_defect(&m), 0.0);
        let broken = DMatrix::from_row_slice(2, 2, &[a, b, b, a.conj()]);
        assert!(particle_hole_defect(&broken) > 0.1);
    }

    #[test]
    fn reduction_takes_block_maximum() {
        let m = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.0, -5.0, -9.0, -3.0, //
                -1.0, 0.0, -8.0, -7.0, //
                -2.0, -4.0, 0.0, -1.0, //
                -6.0, -4.5, -2.0, 0.0,
            ],
        );
        let r = reduce_to_modes(&m);
        assert_eq!(r[(0, 1)], -3.0);
        assert_eq!(r[(1, 0)], -2.0);
        assert_eq!(r[(0, 0)], 0.0);
    }
}
