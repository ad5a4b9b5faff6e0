//! Gaussian elimination over exact rationals.

use crate::expr::Coeff;
use num_traits::{One, Zero};

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    /// One value per unknown; free unknowns are set to zero.
    pub values: Vec<Coeff>,
    pub free: Vec<usize>,
}

/// Solves `rows · c = rhs`; `None` when the system is inconsistent.
pub fn solve(rows: &[Vec<Coeff>], rhs: &[Coeff], unknowns: usize) -> Option<Solution> {
    let mut m: Vec<Vec<Coeff>> = rows
        .iter()
        .zip(rhs)
        .map(|(r, b)| {
            let mut row = r.clone();
            row.resize(unknowns, Coeff::zero());
            row.push(b.clone());
            row
        })
        .collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..unknowns {
        let Some(p) = (r..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][col].recip();
        for v in m[r].iter_mut() {
            *v = &*v * &inv;
        }
        for i in 0..m.len() {
            if i != r && !m[i][col].is_zero() {
                let f = m[i][col].clone();
                for j in col..=unknowns {
                    let d = &f * &m[r][j];
                    m[i][j] -= d;
                }
            }
        }
        pivots.push(col);
        r += 1;
    }
    if m[r..].iter().any(|row| !row[unknowns].is_zero()) {
        return None;
    }
    let mut values = vec![Coeff::zero(); unknowns];
    for (i, &col) in pivots.iter().enumerate() {
        debug_assert!(m[i][col].is_one());
        values[col] = m[i][unknowns].clone();
    }
    let free = (0..unknowns).filter(|c| !pivots.contains(c)).collect();
    Some(Solution { values, free })
}
