//! Dense reference computations for tests: assemble `∇f` and `∇²f`
//! explicitly and solve with nalgebra.

use nalgebra::{DMatrix, DVector};

use super::Dataset;
use crate::error::{DiscoError, Result};
use crate::linalg::DenseVec;
use crate::loss::Objective;
use crate::solver::SolverConfig;

/// Largest `d` for which the dense oracle will assemble `d × d` matrices.
pub const ORACLE_MAX_DIM: usize = 500;

fn guard(d: usize) -> Result<()> {
    if d > ORACLE_MAX_DIM {
        return Err(DiscoError::OracleTooLarge {
            d,
            limit: ORACLE_MAX_DIM,
        });
    }
    Ok(())
}

fn dense_x(data: &Dataset) -> DMatrix<f64> {
    DMatrix::from_row_slice(data.d, data.n, &data.x.to_dense())
}

fn margins(x: &DMatrix<f64>, w: &DenseVec) -> DVector<f64> {
    x.transpose() * DVector::from_column_slice(w.as_slice())
}

fn objective(data: &Dataset, config: &SolverConfig) -> Result<Objective> {
    Objective::new(config.loss, config.lambda, data.n, data.d)
}

pub fn dense_gradient(data: &Dataset, config: &SolverConfig, w: &DenseVec) -> Result<DVector<f64>> {
    guard(data.d)?;
    let obj = objective(data, config)?;
    let x = dense_x(data);
    let c = obj.loss.grad_coeffs(margins(&x, w).as_slice(), data.y.as_slice())?;
    let c = DVector::from_vec(c);
    Ok(x * c / data.n as f64 + DVector::from_column_slice(w.as_slice()) * config.lambda)
}

/// `(1/n) Σ hᵢ xᵢ xᵢᵀ + λI` at `w`.
pub fn dense_hessian(data: &Dataset, config: &SolverConfig, w: &DenseVec) -> Result<DMatrix<f64>> {
    guard(data.d)?;
    let obj = objective(data, config)?;
    let x = dense_x(data);
    let h = obj.loss.hess_coeffs(margins(&x, w).as_slice(), data.y.as_slice())?;
    let mut xh = x.clone();
    for (j, hj) in h.iter().enumerate() {
        xh.column_mut(j).scale_mut(*hj);
    }
    Ok(&xh * x.transpose() / data.n as f64 + DMatrix::identity(data.d, data.d) * config.lambda)
}

fn spd_solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = a.cholesky().ok_or(DiscoError::NotPositiveDefinite {
        row: 0,
        pivot: f64::NAN,
    })?;
    Ok(chol.solve(b))
}

/// Exact Newton direction `∇²f(w)⁻¹ ∇f(w)`.
pub fn newton_direction(data: &Dataset, config: &SolverConfig, w: &DenseVec) -> Result<DenseVec> {
    let g = dense_gradient(data, config, w)?;
    let v = spd_solve(dense_hessian(data, config, w)?, &g)?;
    Ok(DenseVec::from_vec(v.as_slice().to_vec()))
}

/// Closed-form minimizer of the square-loss objective:
/// `((2/n) XXᵀ + λI) w = (2/n) X y`.
pub fn ridge_solution(data: &Dataset, lambda: f64) -> Result<DenseVec> {
    guard(data.d)?;
    let x = dense_x(data);
    let s = 2.0 / data.n as f64;
    let a = &x * x.transpose() * s + DMatrix::identity(data.d, data.d) * lambda;
    let b = &x * DVector::from_column_slice(data.y.as_slice()) * s;
    let w = spd_solve(a, &b)?;
    Ok(DenseVec::from_vec(w.as_slice().to_vec()))
}

#[derive(Debug, Clone)]
pub struct OracleRun {
    /// Final iterate; for the square loss after one step, the global minimizer.
    pub w: DenseVec,
    pub iterates: Vec<DenseVec>,
    /// Exact Newton direction at each iterate that took a step.
    pub directions: Vec<DenseVec>,
    pub deltas: Vec<f64>,
    pub grad_norms: Vec<f64>,
}

/// Damped Newton with exact directions, from `w = 0`, using the same stopping
/// rule as the distributed solver.
pub fn dense_newton_oracle(data: &Dataset, config: &SolverConfig) -> Result<OracleRun> {
    guard(data.d)?;
    let mut w = DenseVec::zeros(data.d);
    let mut run = OracleRun {
        w: w.clone(),
        iterates: Vec::new(),
        directions: Vec::new(),
        deltas: Vec::new(),
        grad_norms: Vec::new(),
    };
    for k in 0.. {
        let g = dense_gradient(data, config, &w)?;
        let gn = g.norm();
        run.iterates.push(w.clone());
        run.grad_norms.push(gn);
        if gn <= config.outer_tol || k >= config.max_outer {
            break;
        }
        let h = dense_hessian(data, config, &w)?;
        let v = spd_solve(h.clone(), &g)?;
        let delta = v.dot(&(&h * &v)).sqrt();
        for (wi, vi) in w.iter_mut().zip(v.iter()) {
            *wi -= vi / (1.0 + delta);
        }
        run.directions.push(DenseVec::from_vec(v.as_slice().to_vec()));
        run.deltas.push(delta);
    }
    run.w = w;
    Ok(run)
}
