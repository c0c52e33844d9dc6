//! Matrix-free measurement operators.
//!
//! Two kinds are provided: a dense column-major matrix (typically Gaussian)
//! and a partial DCT that applies the orthonormal DCT-II and keeps a sorted
//! subset of its rows. Operators are immutable once built; every application
//! is recorded in a caller-owned [`MatvecLedger`].

use std::fmt;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustdct::{DctPlanner, TransformType2And3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops::{dot, norm2};

/// Counts applications of `A` and `A^T`.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatvecLedger {
    pub n_forward: u64,
    pub n_adjoint: u64,
}

impl MatvecLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// `N_A`, the total number of operator applications.
    pub fn total(&self) -> u64 {
        self.n_forward + self.n_adjoint
    }

    pub fn absorb(&mut self, other: &MatvecLedger) {
        self.n_forward += other.n_forward;
        self.n_adjoint += other.n_adjoint;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OperatorKind {
    #[serde(rename = "gaussian")]
    Dense,
    #[serde(rename = "pdct")]
    PartialDct,
}

impl OperatorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OperatorKind::Dense => "gaussian",
            OperatorKind::PartialDct => "pdct",
        }
    }
}

impl std::str::FromStr for OperatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" | "dense" => Ok(OperatorKind::Dense),
            "pdct" => Ok(OperatorKind::PartialDct),
            other => Err(Error::Domain(format!("unknown operator kind '{other}'"))),
        }
    }
}

#[derive(Clone)]
enum Payload {
    /// Column-major `rows x cols` entries.
    Dense(Vec<f64>),
    PartialDct {
        rows: Vec<u32>,
        plan: Arc<dyn TransformType2And3<f64>>,
    },
}

#[derive(Clone)]
pub struct LinearOperator {
    rows: usize,
    cols: usize,
    seed: u64,
    column_energy: f64,
    payload: Payload,
}

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LinearOperator")
            .field("kind", &self.kind())
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("seed", &self.seed)
            .finish()
    }
}

impl LinearOperator {
    /// Wraps an explicit column-major matrix.
    pub fn from_dense(rows: usize, cols: usize, column_major: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimension(format!("{rows}x{cols} operator")));
        }
        if column_major.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                got: column_major.len(),
            });
        }
        if column_major.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("dense payload has non-finite entries".into()));
        }
        let column_energy = column_major.iter().map(|v| v * v).sum::<f64>() / cols as f64;
        Ok(Self {
            rows,
            cols,
            seed: 0,
            column_energy,
            payload: Payload::Dense(column_major),
        })
    }

    /// Builds a matrix from row-major nested rows; convenient for small tests.
    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        let mut data = vec![0.0; m * n];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, v) in row.iter().enumerate() {
                data[j * m + i] = *v;
            }
        }
        Self::from_dense(m, n, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::from_dense(n, n, data)
    }

    /// Partial DCT from an explicit list of kept rows.
    pub fn from_dct_rows(n: usize, mut rows: Vec<u32>) -> Result<Self> {
        if n == 0 || rows.is_empty() {
            return Err(Error::InvalidDimension(format!(
                "partial DCT with n = {n}, m = {}",
                rows.len()
            )));
        }
        if !n.is_power_of_two() {
            return Err(Error::InvalidDimension(format!(
                "partial DCT length {n} is not a power of two"
            )));
        }
        if rows.len() > n {
            return Err(Error::InvalidDimension(format!(
                "partial DCT keeps {} rows of {n}",
                rows.len()
            )));
        }
        rows.sort_unstable();
        if rows.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Domain("partial DCT row list has duplicates".into()));
        }
        if rows.last().is_some_and(|&r| r as usize >= n) {
            return Err(Error::Domain(format!(
                "partial DCT row index out of range [0, {n})"
            )));
        }
        let plan = DctPlanner::new().plan_dct2(n);
        Ok(Self {
            rows: rows.len(),
            cols: n,
            seed: 0,
            // orthonormal rows: ||A||_F^2 = m
            column_energy: rows.len() as f64 / n as f64,
            payload: Payload::PartialDct { rows, plan },
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Mean squared column norm `||A||_F^2 / n`, i.e. `E ||A x||^2 / ||x||^2`
    /// for random sparse `x`.
    pub fn column_energy(&self) -> f64 {
        self.column_energy
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn kind(&self) -> OperatorKind {
        match self.payload {
            Payload::Dense(_) => OperatorKind::Dense,
            Payload::PartialDct { .. } => OperatorKind::PartialDct,
        }
    }

    /// Column-major dense entries, if this is a dense operator.
    pub fn dense_payload(&self) -> Option<&[f64]> {
        match &self.payload {
            Payload::Dense(d) => Some(d),
            Payload::PartialDct { .. } => None,
        }
    }

    /// Sorted kept rows, if this is a partial DCT.
    pub fn dct_rows(&self) -> Option<&[u32]> {
        match &self.payload {
            Payload::Dense(_) => None,
            Payload::PartialDct { rows, .. } => Some(rows),
        }
    }

    /// `Ax`, counted as one forward application.
    pub fn apply(&self, x: &[f64], ledger: &mut MatvecLedger) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.rows];
        self.apply_into(x, &mut out, ledger)?;
        Ok(out)
    }

    /// `A^T y`, counted as one adjoint application.
    pub fn apply_adjoint(&self, y: &[f64], ledger: &mut MatvecLedger) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.cols];
        self.apply_adjoint_into(y, &mut out, ledger)?;
        Ok(out)
    }

    pub fn apply_into(&self, x: &[f64], out: &mut [f64], ledger: &mut MatvecLedger) -> Result<()> {
        check_len(self.cols, x.len())?;
        check_len(self.rows, out.len())?;
        match &self.payload {
            Payload::Dense(a) => {
                out.fill(0.0);
                for (col, &xj) in a.chunks_exact(self.rows).zip(x) {
                    if xj != 0.0 {
                        for (o, v) in out.iter_mut().zip(col) {
                            *o += xj * v;
                        }
                    }
                }
            }
            Payload::PartialDct { rows, plan } => {
                let mut buf = x.to_vec();
                plan.process_dct2(&mut buf);
                let (s0, sk) = dct_scales(self.cols);
                for (o, &r) in out.iter_mut().zip(rows) {
                    let r = r as usize;
                    *o = buf[r] * if r == 0 { s0 } else { sk };
                }
            }
        }
        ledger.n_forward += 1;
        Ok(())
    }

    pub fn apply_adjoint_into(
        &self,
        y: &[f64],
        out: &mut [f64],
        ledger: &mut MatvecLedger,
    ) -> Result<()> {
        check_len(self.rows, y.len())?;
        check_len(self.cols, out.len())?;
        match &self.payload {
            Payload::Dense(a) => {
                for (o, col) in out.iter_mut().zip(a.chunks_exact(self.rows)) {
                    *o = dot(col, y);
                }
            }
            Payload::PartialDct { rows, plan } => {
                // DCT-III computes X_0 / 2 + sum_k X_k cos(..), hence the doubled DC scale.
                let (s0, sk) = dct_scales(self.cols);
                out.fill(0.0);
                for (&v, &r) in y.iter().zip(rows) {
                    let r = r as usize;
                    out[r] = v * if r == 0 { 2.0 * s0 } else { sk };
                }
                plan.process_dct3(out);
            }
        }
        ledger.n_adjoint += 1;
        Ok(())
    }
}

fn dct_scales(n: usize) -> (f64, f64) {
    let n = n as f64;
    ((1.0 / n).sqrt(), (2.0 / n).sqrt())
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

fn check_dims(m: usize, n: usize) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidDimension(format!("m = {m}, n = {n}")));
    }
    if m > n {
        return Err(Error::InvalidDimension(format!(
            "m = {m} exceeds n = {n} (operators are underdetermined)"
        )));
    }
    Ok(())
}

/// Gaussian matrix with i.i.d. `N(0, 1/m)` entries, optionally with unit-norm columns.
pub fn make_dense_gaussian(
    m: usize,
    n: usize,
    seed: u64,
    normalize_columns: bool,
) -> Result<LinearOperator> {
    check_dims(m, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1.0 / (m as f64).sqrt();
    let mut data: Vec<f64> = (0..m * n)
        .map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            v * scale
        })
        .collect();
    if normalize_columns {
        for col in data.chunks_exact_mut(m) {
            let nrm = norm2(col);
            if nrm > 0.0 {
                col.iter_mut().for_each(|v| *v /= nrm);
            }
        }
    }
    Ok(LinearOperator::from_dense(m, n, data)?.with_seed(seed))
}

/// Orthonormal DCT-II of length `n` restricted to `m` rows drawn uniformly
/// without replacement.
pub fn make_partial_dct(m: usize, n: usize, seed: u64) -> Result<LinearOperator> {
    check_dims(m, n)?;
    if !n.is_power_of_two() {
        return Err(Error::InvalidDimension(format!(
            "partial DCT length {n} is not a power of two"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<u32> = rand::seq::index::sample(&mut rng, n, m)
        .into_iter()
        .map(|i| i as u32)
        .collect();
    Ok(LinearOperator::from_dct_rows(n, rows)?.with_seed(seed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    /// Estimate of `||A||_2^2`.
    pub value: f64,
    pub iterations: usize,
    /// False when `max_iters` ran out before the relative change fell below `tol`.
    pub converged: bool,
    /// Setup cost; kept apart from any solve ledger.
    pub ledger: MatvecLedger,
}

/// Power iteration on `A^T A`.
///
/// The start vector is drawn from `seed + 1` where `seed` is the operator's
/// construction seed, so the estimate is reproducible.
pub fn estimate_lipschitz(op: &LinearOperator, tol: f64, max_iters: usize) -> LipschitzEstimate {
    let mut ledger = MatvecLedger::new();
    let mut rng = ChaCha8Rng::seed_from_u64(op.seed().wrapping_add(1));
    let mut v: Vec<f64> = (0..op.cols())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut av = vec![0.0; op.rows()];
    let mut estimate = 0.0;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters.max(1) {
        iterations += 1;
        // dimensions are consistent by construction
        op.apply_into(&v, &mut av, &mut ledger).expect("dims");
        let rayleigh = dot(&av, &av);
        op.apply_adjoint_into(&av, &mut v, &mut ledger)
            .expect("dims");
        let nrm = norm2(&v);
        if nrm == 0.0 {
            // v in the null space; A is zero along every direction tried
            estimate = 0.0;
            converged = true;
            break;
        }
        v.iter_mut().for_each(|x| *x /= nrm);
        let change = (rayleigh - estimate).abs();
        estimate = rayleigh;
        if change <= tol * rayleigh {
            converged = true;
            break;
        }
    }
    LipschitzEstimate {
        value: estimate,
        iterations,
        converged,
        ledger,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive_dct_matrix(n: usize) -> Vec<Vec<f64>> {
        let nf = n as f64;
        (0..n)
            .map(|k| {
                let s = if k == 0 {
                    (1.0 / nf).sqrt()
                } else {
                    (2.0 / nf).sqrt()
                };
                (0..n)
                    .map(|j| {
                        s * (std::f64::consts::PI * k as f64 * (2 * j + 1) as f64 / (2.0 * nf))
                            .cos()
                    })
                    .collect()
            })
            .collect()
    }

    fn random_vec(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn identity_apply() {
        let op = LinearOperator::from_rows(&[&[1.0, 0.0], &[0.0, 1.0]]).unwrap();
        let mut ledger = MatvecLedger {
            n_forward: 5,
            n_adjoint: 2,
        };
        assert_eq!(op.apply(&[3.0, 4.0], &mut ledger).unwrap(), vec![3.0, 4.0]);
        assert_eq!(
            ledger,
            MatvecLedger {
                n_forward: 6,
                n_adjoint: 2
            }
        );
    }

    #[test]
    fn dense_adjoint_by_hand() {
        let op = LinearOperator::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
        let mut ledger = MatvecLedger::new();
        assert_eq!(
            op.apply_adjoint(&[1.0, 1.0], &mut ledger).unwrap(),
            vec![4.0, 6.0]
        );
        assert_eq!(ledger.n_adjoint, 1);
    }

    #[test]
    fn zero_input_gives_zero() {
        let mut ledger = MatvecLedger::new();
        for op in [
            make_dense_gaussian(8, 16, 3, false).unwrap(),
            make_partial_dct(8, 16, 3).unwrap(),
        ] {
            let y = op.apply(&[0.0; 16], &mut ledger).unwrap();
            assert!(y.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let op = make_dense_gaussian(4, 8, 1, false).unwrap();
        let mut ledger = MatvecLedger::new();
        assert!(matches!(
            op.apply(&[1.0; 7], &mut ledger),
            Err(Error::DimensionMismatch {
                expected: 8,
                got: 7
            })
        ));
        assert!(op.apply_adjoint(&[1.0; 8], &mut ledger).is_err());
        assert_eq!(ledger.total(), 0);
    }

    #[test]
    fn invalid_dimensions() {
        assert!(matches!(
            make_dense_gaussian(0, 4, 1, true),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(
            make_dense_gaussian(4, 0, 1, true),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(
            make_partial_dct(9, 8, 1),
            Err(Error::InvalidDimension(_))
        ));
        assert!(matches!(
            make_partial_dct(4, 12, 1),
            Err(Error::InvalidDimension(_))
        ));
        assert!(LinearOperator::from_dct_rows(8, vec![1, 1]).is_err());
        assert!(LinearOperator::from_dct_rows(8, vec![8]).is_err());
    }

    #[test]
    fn normalized_columns_have_unit_norm() {
        let op = make_dense_gaussian(2, 2, 7, true).unwrap();
        for col in op.dense_payload().unwrap().chunks(2) {
            assert!((norm2(col) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn construction_is_deterministic() {
        let a = make_dense_gaussian(100, 256, 11, false).unwrap();
        let b = make_dense_gaussian(100, 256, 11, false).unwrap();
        assert_eq!(a.dense_payload().unwrap(), b.dense_payload().unwrap());
        let c = make_partial_dct(64, 256, 11).unwrap();
        let d = make_partial_dct(64, 256, 11).unwrap();
        assert_eq!(c.dct_rows().unwrap(), d.dct_rows().unwrap());
    }

    #[test]
    fn pdct_matches_naive_rows() {
        let op = make_partial_dct(4, 8, 5).unwrap();
        let full = naive_dct_matrix(8);
        let mut ledger = MatvecLedger::new();
        for j in 0..8 {
            let mut e = vec![0.0; 8];
            e[j] = 1.0;
            let col = op.apply(&e, &mut ledger).unwrap();
            for (i, &r) in op.dct_rows().unwrap().iter().enumerate() {
                assert!((col[i] - full[r as usize][j]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn full_pdct_is_an_isometry() {
        let op = make_partial_dct(64, 64, 2).unwrap();
        let mut ledger = MatvecLedger::new();
        let x = random_vec(64, 9);
        let y = op.apply(&x, &mut ledger).unwrap();
        assert!((norm2(&y) - norm2(&x)).abs() <= 1e-10 * norm2(&x));
        for j in [0, 5, 63] {
            let mut e = vec![0.0; 64];
            e[j] = 1.0;
            let back = op
                .apply_adjoint(&op.apply(&e, &mut ledger).unwrap(), &mut ledger)
                .unwrap();
            for (i, v) in back.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn pdct_adjoint_is_isometric() {
        let op = make_partial_dct(100, 512, 4).unwrap();
        let mut ledger = MatvecLedger::new();
        for seed in 0..10 {
            let y = random_vec(100, seed);
            let x = op.apply_adjoint(&y, &mut ledger).unwrap();
            assert!((norm2(&x) - norm2(&y)).abs() <= 1e-10 * norm2(&y));
        }
    }

    #[test]
    fn column_energy() {
        assert_eq!(LinearOperator::identity(4).unwrap().column_energy(), 1.0);
        assert_eq!(make_partial_dct(16, 128, 3).unwrap().column_energy(), 0.125);
        let a = make_dense_gaussian(20, 50, 3, true).unwrap();
        assert!((a.column_energy() - 1.0).abs() <= 1e-12);
        let m = LinearOperator::from_rows(&[&[3.0, 0.0], &[4.0, 1.0]]).unwrap();
        assert_eq!(m.column_energy(), 13.0);
    }

    #[test]
    fn lipschitz_of_simple_operators() {
        let tol = 1e-8;
        let est = estimate_lipschitz(&LinearOperator::identity(5).unwrap(), tol, 100);
        assert!((est.value - 1.0).abs() <= tol);
        let est = estimate_lipschitz(&make_partial_dct(32, 128, 1).unwrap(), tol, 100);
        assert!((est.value - 1.0).abs() <= tol);
        assert!(est.converged);
        let diag = LinearOperator::from_rows(&[&[2.0, 0.0], &[0.0, 1.0]]).unwrap();
        let est = estimate_lipschitz(&diag, 1e-12, 1000);
        assert!((est.value - 4.0).abs() <= 1e-8 * 4.0);
    }
}
