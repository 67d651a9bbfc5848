//! Vertex enumeration of the three-user region.

use std::collections::BTreeSet;

use itertools::Itertools;
use num_traits::{One, Signed, Zero};

use super::permutation_rows;
use crate::dof::{DofVector, Rational};

/// Largest `N` accepted by [`vertices_k3`].
pub const MAX_VERTEX_ANTENNAS: usize = 100;

const DIM: usize = 6;

/// Solves a square system exactly; `None` if singular.
fn solve(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x /= &p;
        }
        b[col] /= &p;
        for r in (0..n).filter(|&r| r != col) {
            let f = a[r][col].clone();
            if f.is_zero() {
                continue;
            }
            let pivot_row = a[col].clone();
            for (x, y) in a[r].iter_mut().zip(&pivot_row) {
                *x -= &f * y;
            }
            let bc = b[col].clone();
            b[r] -= f * bc;
        }
    }
    Some(b)
}

/// Vertices of the `K = 3` region for `N` relay antennas, sorted by their
/// message-order coordinates. `N` is clamped to at least 1 and at most
/// [`MAX_VERTEX_ANTENNAS`].
pub fn vertices_k3(relay_antennas: usize) -> Vec<DofVector> {
    let n = Rational::from_integer(relay_antennas.clamp(1, MAX_VERTEX_ANTENNAS).into());
    // rows `a.x <= b`: six orderings, then `-x_i <= 0`
    let mut rows: Vec<(Vec<Rational>, Rational)> = permutation_rows(3)
        .into_iter()
        .map(|(_, r)| (r.iter().map(|&on| if on { Rational::one() } else { Rational::zero() }).collect(), n.clone()))
        .collect();
    for i in 0..DIM {
        let mut r = vec![Rational::zero(); DIM];
        r[i] = -Rational::one();
        rows.push((r, Rational::zero()));
    }

    let mut found = BTreeSet::new();
    for subset in (0..rows.len()).combinations(DIM) {
        let a = subset.iter().map(|&i| rows[i].0.clone()).collect();
        let b = subset.iter().map(|&i| rows[i].1.clone()).collect();
        let Some(x) = solve(a, b) else { continue };
        let feasible = rows.iter().all(|(r, bound)| {
            let lhs: Rational = r.iter().zip(&x).map(|(p, q)| p * q).sum();
            !(lhs - bound).is_positive()
        });
        if feasible {
            found.insert(x);
        }
    }
    found
        .into_iter()
        .map(|x| DofVector::from_entries(3, x).expect("feasible points are nonnegative"))
        .collect()
}
