//! Sparse symmetric matrices over RN DOFs and the constrained linear solve.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{QcError, Result};

/// Compressed sparse column matrix with sorted, unique row indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    pub n: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds an `n × n` matrix, summing duplicates in input order.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut col_ptr = vec![0; n + 1];
        let mut row_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..n {
            col_ptr[c + 1] += col_ptr[c];
        }
        SparseMatrix {
            n,
            col_ptr,
            row_idx,
            values,
        }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn column(&self, c: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        self.row_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.col_ptr[c]..self.col_ptr[c + 1];
        match self.row_idx[range.clone()].binary_search(&r) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for c in 0..self.n {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for (r, v) in self.column(c) {
                y[r] += v * xc;
            }
        }
        y
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `‖K − Kᵀ‖_F / ‖K‖_F`.
    pub fn asymmetry(&self) -> f64 {
        let mut diff = 0.0;
        for c in 0..self.n {
            for (r, v) in self.column(c) {
                let d = v - self.get(c, r);
                diff += d * d;
            }
        }
        let norm = self.norm();
        if norm == 0.0 {
            0.0
        } else {
            diff.sqrt() / norm
        }
    }

    /// Dense copy, for tests and small problems.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for c in 0..self.n {
            for (r, v) in self.column(c) {
                d[r][c] = v;
            }
        }
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverOptions {
    /// Maximum accepted relative residual `‖K u − f‖ / ‖f‖`.
    pub tolerance: f64,
    /// Diagonal shift added to the free block, relative to its mean diagonal.
    pub regularization: f64,
    /// Iterative refinement sweeps when the residual is above tolerance.
    pub refinement_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tolerance: 1e-10,
            regularization: 0.0,
            refinement_steps: 3,
        }
    }
}

/// Output of a constrained solve over RN DOFs.
#[derive(Clone, Debug)]
pub struct LinearSolution {
    pub u: Vec<f64>,
    /// `(dof, reaction)` for every constrained DOF, in constraint order.
    pub reactions: Vec<(usize, f64)>,
    pub residual: f64,
}

enum Factor {
    Llt(faer::sparse::linalg::solvers::Llt<usize, f64>),
    Lu(faer::sparse::linalg::solvers::Lu<usize, f64>),
}

impl Factor {
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut b = Mat::<f64>::from_fn(rhs.len(), 1, |i, _| rhs[i]);
        match self {
            Factor::Llt(f) => f.solve_in_place(b.as_mut()),
            Factor::Lu(f) => f.solve_in_place(b.as_mut()),
        }
        (0..rhs.len()).map(|i| b[(i, 0)]).collect()
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Solves `K u = f` with `u_c` prescribed on the constrained DOFs by
/// eliminating them: `K_ff u_f = f_f − K_fc u_c`.
pub fn solve_constrained(
    k: &SparseMatrix,
    f: &[f64],
    constraints: &[(usize, f64)],
    options: &SolverOptions,
) -> Result<LinearSolution> {
    let n = k.n;
    if f.len() != n {
        return Err(QcError::Mismatch(format!(
            "load vector has {} entries for {n} DOFs",
            f.len()
        )));
    }
    let mut u = vec![0.0; n];
    let mut fixed = vec![false; n];
    for &(dof, value) in constraints {
        if dof >= n {
            return Err(QcError::BoundaryCondition(format!("DOF {dof} out of range")));
        }
        if fixed[dof] && u[dof] != value {
            return Err(QcError::BoundaryCondition(format!(
                "DOF {dof} prescribed twice with different values"
            )));
        }
        fixed[dof] = true;
        u[dof] = value;
    }
    let free: Vec<usize> = (0..n).filter(|&d| !fixed[d]).collect();
    let mut free_pos = vec![usize::MAX; n];
    for (k, &d) in free.iter().enumerate() {
        free_pos[d] = k;
    }

    // rhs = f_f − K_fc u_c
    let ku_c = k.mul_vec(&u);
    let rhs: Vec<f64> = free.iter().map(|&d| f[d] - ku_c[d]).collect();

    let mut residual = 0.0;
    if !free.is_empty() {
        let mut triplets = Vec::new();
        let mut diag_sum = 0.0;
        for (fc, &c) in free.iter().enumerate() {
            for (r, v) in k.column(c) {
                let fr = free_pos[r];
                if fr != usize::MAX {
                    triplets.push((fr, fc, v));
                    if fr == fc {
                        diag_sum += v;
                    }
                }
            }
        }
        let shift = options.regularization * diag_sum / free.len() as f64;
        if shift != 0.0 {
            for i in 0..free.len() {
                triplets.push((i, i, shift));
            }
        }
        let kff = SparseMatrix::from_triplets(free.len(), triplets);
        let factor = factorize(&kff)?;
        let rhs_norm = norm(&rhs);
        let mut x = factor.solve(&rhs);
        let mut r = residual_vec(&kff, &x, &rhs);
        residual = if rhs_norm > 0.0 { norm(&r) / rhs_norm } else { norm(&r) };
        let mut sweeps = 0;
        while residual > options.tolerance && sweeps < options.refinement_steps {
            let dx = factor.solve(&r);
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            r = residual_vec(&kff, &x, &rhs);
            residual = if rhs_norm > 0.0 { norm(&r) / rhs_norm } else { norm(&r) };
            sweeps += 1;
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(QcError::SingularSystem(
                "solution contains non-finite values".into(),
            ));
        }
        if residual > options.tolerance {
            return Err(QcError::NotConverged {
                residual,
                tolerance: options.tolerance,
            });
        }
        for (i, &d) in free.iter().enumerate() {
            u[d] = x[i];
        }
    }

    let ku = k.mul_vec(&u);
    let reactions = constraints
        .iter()
        .map(|&(d, _)| (d, ku[d] - f[d]))
        .collect();
    Ok(LinearSolution {
        u,
        reactions,
        residual,
    })
}

fn residual_vec(k: &SparseMatrix, x: &[f64], rhs: &[f64]) -> Vec<f64> {
    let kx = k.mul_vec(x);
    rhs.iter().zip(&kx).map(|(b, a)| b - a).collect()
}

fn factorize(k: &SparseMatrix) -> Result<Factor> {
    let triplets: Vec<Triplet<usize, usize, f64>> = (0..k.n)
        .flat_map(|c| k.column(c).map(move |(r, v)| Triplet::new(r, c, v)))
        .collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(k.n, k.n, &triplets)
        .map_err(|e| QcError::SingularSystem(format!("sparse matrix construction: {e:?}")))?;
    match mat.sp_cholesky(Side::Lower) {
        Ok(llt) => Ok(Factor::Llt(llt)),
        Err(e) => {
            debug!("Cholesky failed ({e:?}); falling back to LU");
            let lu = mat.sp_lu().map_err(|e| {
                QcError::SingularSystem(format!("LU factorization failed: {e:?}"))
            })?;
            warn!("stiffness is not positive definite; solved with sparse LU");
            Ok(Factor::Lu(lu))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn triplets_merge() {
        let k = SparseMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0), (1, 1, 5.0)]);
        assert_eq!(k.nnz(), 3);
        assert_eq!(k.get(0, 0), 4.0);
        assert_eq!(k.get(0, 1), 0.0);
        assert_eq!(k.mul_vec(&[1.0, 1.0]), vec![4.0, 7.0]);
    }

    #[test]
    fn elimination_by_hand() {
        // [[2,-1],[-1,2]] with u_1 = 1 prescribed: 2 u_0 = 0 + 1 → u_0 = 0.5
        let k = SparseMatrix::from_triplets(
            2,
            vec![(0, 0, 2.0), (0, 1, -1.0), (1, 0, -1.0), (1, 1, 2.0)],
        );
        let s = solve_constrained(&k, &[0.0, 0.0], &[(1, 1.0)], &SolverOptions::default()).unwrap();
        assert_relative_eq!(s.u[0], 0.5, epsilon = 1e-14);
        assert_relative_eq!(s.reactions[0].1, 1.5, epsilon = 1e-14);
    }

    #[test]
    fn all_fixed_and_none_fixed() {
        let k = SparseMatrix::from_triplets(1, vec![(0, 0, 4.0)]);
        let s = solve_constrained(&k, &[2.0], &[], &SolverOptions::default()).unwrap();
        assert_relative_eq!(s.u[0], 0.5, epsilon = 1e-14);
        let s = solve_constrained(&k, &[2.0], &[(0, 3.0)], &SolverOptions::default()).unwrap();
        assert_eq!(s.u, vec![3.0]);
        assert_relative_eq!(s.reactions[0].1, 10.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_block_is_reported() {
        let k = SparseMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 1, 0.0)]);
        assert!(solve_constrained(&k, &[1.0, 1.0], &[], &SolverOptions::default()).is_err());
    }
}
