//! Analytic tile-query cost model and least-squares fitting of its constants.
//!
//! `TQ = C1 + C2·Ni` is the processing time of one tile-query returning `Ni`
//! items; a batch of `Nq` tile-queries over `Ndb` engines with cache hit
//! probability `H` lasts
//! `TB = C3 + Nq·((1−H)·Pdb/Ndb + Pqh)·TQ + Nq·Ni·Ds/Bw`.
//! Times are in milliseconds, `Ds` in bytes and `Bw` in bits per second.

use nalgebra::{DMatrix, DVector, RealField};
use num_traits::Float;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("invalid model parameter: {0}")]
    Invalid(&'static str),
    #[error("need at least 3 distinct configurations, got {0}")]
    TooFewConfigurations(usize),
    #[error("design matrix is rank deficient (rank {rank} of {cols})")]
    RankDeficient { rank: usize, cols: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<S> {
    pub c1: S,
    pub c2: S,
    pub c3: S,
    pub p_db: S,
    pub p_qh: S,
    pub d_s: S,
    pub b_w: S,
    pub h: S,
    pub n_db: S,
    pub n_q: S,
    pub n_i: S,
}

impl<S: Scalar> ModelParams<S> {
    /// Constants measured on the reference deployment, for a batch of one
    /// tile-query with one 55-byte item on one engine and no cache.
    pub fn reference() -> Self {
        ModelParams {
            c1: S::lit(3.0),
            c2: S::lit(0.008),
            c3: S::lit(20.0),
            p_db: S::lit(0.85),
            p_qh: S::lit(0.15),
            d_s: S::lit(55.0),
            b_w: S::lit(200e6),
            h: S::zero(),
            n_db: S::one(),
            n_q: S::one(),
            n_i: S::one(),
        }
    }

    pub fn with_workload(mut self, n_q: S, n_i: S, n_db: S, h: S) -> Self {
        self.n_q = n_q;
        self.n_i = n_i;
        self.n_db = n_db;
        self.h = h;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [self.c1, self.c2, self.c3, self.p_db, self.p_qh, self.d_s, self.n_q, self.n_i, self.h];
        if fields.iter().any(|v| !v.is_finite() || *v < S::zero()) {
            return Err(ModelError::Invalid("values must be finite and nonnegative"));
        }
        if (self.p_db + self.p_qh - S::one()).abs() > S::lit(1e-6) {
            return Err(ModelError::Invalid("P_db + P_qh must equal 1"));
        }
        if self.h > S::one() {
            return Err(ModelError::Invalid("H must not exceed 1"));
        }
        if self.n_db <= S::zero() || self.b_w <= S::zero() {
            return Err(ModelError::Invalid("N_db and B_w must be positive"));
        }
        Ok(())
    }

    /// Transmission time of the batch payload, in ms.
    pub fn transmission_ms(&self) -> S {
        self.n_q * self.n_i * self.d_s * S::lit(8.0) / self.b_w * S::lit(1000.0)
    }
}

pub fn model_tq<S: Scalar>(p: &ModelParams<S>) -> S {
    p.c1 + p.c2 * p.n_i
}

pub fn model_tb<S: Scalar>(p: &ModelParams<S>) -> S {
    let share = (S::one() - p.h) * p.p_db / p.n_db + p.p_qh;
    p.c3 + p.n_q * share * model_tq(p) + p.transmission_ms()
}

/// One measured batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement<S> {
    pub n_q: S,
    pub n_i: S,
    pub n_db: S,
    pub h: S,
    /// Item size in bytes and application throughput in bits/s, used to
    /// remove the transmission term.
    pub d_s: S,
    pub b_w: S,
    pub tb_ms: S,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fit<S> {
    /// Fitted C1, C2, C3, P_db, P_qh; workload fields are left at their
    /// reference values.
    pub params: ModelParams<S>,
    pub r_squared: S,
    pub rmse: S,
}

impl<S: Scalar> Measurement<S> {
    fn transmission_ms(&self) -> S {
        self.n_q * self.n_i * self.d_s * S::lit(8.0) / self.b_w * S::lit(1000.0)
    }

    /// `(u, v)` with `u = Nq(1−H)/Ndb`, `v = Nq`.
    fn uv(&self) -> (S, S) {
        (self.n_q * (S::one() - self.h) / self.n_db, self.n_q)
    }
}

fn predict<S: Scalar>(theta: &[S; 4], m: &Measurement<S>) -> S {
    let [c1, c2, c3, p] = *theta;
    let (u, v) = m.uv();
    c3 + (v + (u - v) * p) * (c1 + c2 * m.n_i) + m.transmission_ms()
}

fn sse<S: Scalar>(theta: &[S; 4], data: &[Measurement<S>]) -> S {
    data.iter().fold(S::zero(), |acc, m| {
        let r = m.tb_ms - predict(theta, m);
        acc + r * r
    })
}

/// Least-squares fit of C1, C2, C3 and P_db (with P_qh = 1 − P_db).
///
/// A linear fit on the expanded product terms gives the starting point;
/// Gauss-Newton then refines the four constants on the original residuals.
pub fn fit_constants<S: Scalar + RealField>(data: &[Measurement<S>]) -> Result<Fit<S>, ModelError> {
    let mut configs: Vec<[S; 4]> = data.iter().map(|m| [m.n_q, m.n_i, m.n_db, m.h]).collect();
    configs.sort_by(|a, b| a.partial_cmp(b).expect("finite configuration"));
    configs.dedup();
    if configs.len() < 3 {
        return Err(ModelError::TooFewConfigurations(configs.len()));
    }

    let rows = data.len();
    let x = DMatrix::from_fn(rows, 5, |r, c| {
        let m = &data[r];
        let (u, v) = m.uv();
        match c {
            0 => S::one(),
            1 => v,
            2 => v * m.n_i,
            3 => u - v,
            _ => (u - v) * m.n_i,
        }
    });
    let y = DVector::from_fn(rows, |r, _| data[r].tb_ms - data[r].transmission_ms());
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * S::lit(1e-10) * S::from_index(rows.max(5) as i64);
    let rank = svd.singular_values.iter().filter(|s| **s > tol).count();
    if rank < 5 {
        return Err(ModelError::RankDeficient { rank, cols: 5 });
    }
    let beta = svd.solve(&y, tol).map_err(|_| ModelError::RankDeficient { rank, cols: 5 })?;
    let (c3, c1, c2) = (beta[0], beta[1], beta[2]);
    // P_db from whichever product term carries more signal
    let p = if Float::abs(c1) * S::lit(100.0) >= Float::abs(c2) { beta[3] / c1 } else { beta[4] / c2 };
    let mut theta = [c1, c2, c3, Float::min(Float::max(p, S::zero()), S::one())];

    let mut cur = sse(&theta, data);
    for _ in 0..100 {
        let j = DMatrix::from_fn(rows, 4, |r, c| {
            let m = &data[r];
            let (u, v) = m.uv();
            let w = v + (u - v) * theta[3];
            match c {
                0 => w,
                1 => w * m.n_i,
                2 => S::one(),
                _ => (u - v) * (theta[0] + theta[1] * m.n_i),
            }
        });
        let r = DVector::from_fn(rows, |i, _| data[i].tb_ms - predict(&theta, &data[i]));
        let jsvd = j.svd(true, true);
        let jtol = jsvd.singular_values.max() * S::lit(1e-12);
        let Ok(step) = jsvd.solve(&r, jtol) else { break };
        let mut scale = S::one();
        let mut improved = false;
        for _ in 0..30 {
            let cand = [
                theta[0] + scale * step[0],
                theta[1] + scale * step[1],
                theta[2] + scale * step[2],
                theta[3] + scale * step[3],
            ];
            let s = sse(&cand, data);
            if s <= cur {
                let gain = cur - s;
                theta = cand;
                cur = s;
                improved = gain > cur * S::lit(1e-14);
                break;
            }
            scale *= S::lit(0.5);
        }
        if !improved {
            break;
        }
    }

    let mean = data.iter().fold(S::zero(), |a, m| a + m.tb_ms) / S::from_index(rows as i64);
    let sst = data.iter().fold(S::zero(), |a, m| a + (m.tb_ms - mean) * (m.tb_ms - mean));
    let r_squared = if sst > S::zero() { S::one() - cur / sst } else { S::one() };
    let [c1, c2, c3, p_db] = theta;
    let params = ModelParams { c1, c2, c3, p_db, p_qh: S::one() - p_db, ..ModelParams::reference() };
    Ok(Fit { params, r_squared, rmse: Float::sqrt(cur / S::from_index(rows as i64)) })
}
