//! Finite chain complexes over `Z/2` and their homology.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Generators per degree and boundary maps `d_k : C_k -> C_{k-1}`.
///
/// `boundary[k][i][j]` is the coefficient of generator `i` of degree `k - 1`
/// in the boundary of generator `j` of degree `k`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Z2ChainComplex {
    pub generators: BTreeMap<i32, usize>,
    pub boundary: BTreeMap<i32, Vec<Vec<bool>>>,
}

impl Z2ChainComplex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_generators(&mut self, degree: i32, count: usize) {
        self.generators.insert(degree, count);
    }

    pub fn dim(&self, degree: i32) -> usize {
        self.generators.get(&degree).copied().unwrap_or(0)
    }

    /// Sets `d_k`; the matrix must be `dim C_{k-1}` by `dim C_k`.
    pub fn set_boundary(&mut self, degree: i32, matrix: Vec<Vec<bool>>) -> Result<()> {
        let (rows, cols) = (self.dim(degree - 1), self.dim(degree));
        if matrix.len() != rows || matrix.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension(format!(
                "boundary from degree {degree} must be {rows} x {cols}"
            )));
        }
        self.boundary.insert(degree, matrix);
        Ok(())
    }

    fn matrix(&self, degree: i32) -> Vec<Vec<bool>> {
        self.boundary
            .get(&degree)
            .cloned()
            .unwrap_or_else(|| vec![vec![false; self.dim(degree)]; self.dim(degree - 1)])
    }

    pub fn boundary_rank(&self, degree: i32) -> usize {
        rank(&self.matrix(degree))
    }

    /// Checks `d_{k-1} d_k = 0` for every `k`.
    pub fn check(&self) -> Result<()> {
        for &k in self.generators.keys() {
            let (outer, inner) = (self.matrix(k - 1), self.matrix(k));
            for row in &outer {
                for j in 0..self.dim(k) {
                    let entry = row
                        .iter()
                        .zip(&inner)
                        .fold(false, |acc, (&a, col)| acc ^ (a & col[j]));
                    if entry {
                        return Err(Error::BoundarySquare(k));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.generators
            .iter()
            .map(|(&k, &n)| {
                if k.rem_euclid(2) == 0 {
                    n as i64
                } else {
                    -(n as i64)
                }
            })
            .sum()
    }
}

/// Rank over `GF(2)` by elimination on packed rows.
pub fn rank(matrix: &[Vec<bool>]) -> usize {
    let cols = matrix.first().map_or(0, Vec::len);
    let words = cols.div_ceil(64);
    let mut rows: Vec<Vec<u64>> = matrix
        .iter()
        .map(|r| {
            let mut w = vec![0u64; words];
            for (j, &bit) in r.iter().enumerate() {
                if bit {
                    w[j / 64] |= 1 << (j % 64);
                }
            }
            w
        })
        .collect();
    let mut rank = 0;
    for col in 0..cols {
        let (word, bit) = (col / 64, 1u64 << (col % 64));
        let Some(pivot) = (rank..rows.len()).find(|&i| rows[i][word] & bit != 0) else {
            continue;
        };
        rows.swap(rank, pivot);
        let pivot_row = rows[rank].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && row[word] & bit != 0 {
                row.iter_mut().zip(&pivot_row).for_each(|(a, b)| *a ^= b);
            }
        }
        rank += 1;
    }
    rank
}

/// `(degree, rank H_k)` for each degree with generators.
pub fn z2_homology(complex: &Z2ChainComplex) -> Result<Vec<(i32, usize)>> {
    complex.check()?;
    Ok(complex
        .generators
        .iter()
        .map(|(&k, &n)| {
            (
                k,
                n - complex.boundary_rank(k) - complex.boundary_rank(k + 1),
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_differential() {
        let mut c = Z2ChainComplex::new();
        c.set_generators(0, 2);
        c.set_generators(1, 3);
        assert_eq!(z2_homology(&c).unwrap(), vec![(0, 2), (1, 3)]);
    }

    #[test]
    fn identity_boundary_kills_everything() {
        let mut c = Z2ChainComplex::new();
        c.set_generators(0, 1);
        c.set_generators(1, 1);
        c.set_boundary(1, vec![vec![true]]).unwrap();
        assert_eq!(z2_homology(&c).unwrap(), vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn rejects_nonzero_square() {
        let mut c = Z2ChainComplex::new();
        for k in 0..3 {
            c.set_generators(k, 1);
        }
        c.set_boundary(1, vec![vec![true]]).unwrap();
        c.set_boundary(2, vec![vec![true]]).unwrap();
        assert!(matches!(z2_homology(&c), Err(Error::BoundarySquare(2))));
    }

    #[test]
    fn rank_examples() {
        let m = vec![
            vec![true, true, false],
            vec![false, true, true],
            vec![true, false, true],
        ];
        assert_eq!(rank(&m), 2);
        assert_eq!(rank(&[]), 0);
    }
}
