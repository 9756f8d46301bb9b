//! Dense linear-algebra oracle for absorption-time moments of a finite
//! birth/death chain.

use nalgebra::{DMatrix, DVector};

use super::convolve_moments;
use super::moments::MomentTable;
use crate::error::{Error, Result};
use crate::params::ModelParams;

/// Largest number of transient levels the dense solver accepts.
pub const MAX_ORACLE_SPAN: usize = 1000;

/// Raw moments of the time to leave `lo..=hi` downward, for a chain with
/// births `birth(n)` and deaths `death(n)`. Births at `hi` are ignored
/// (reflecting top). Row `n - lo` holds `[1, E tau, ..., E tau^k_max]`.
///
/// Solves `(-Q) m_k = k m_{k-1}` with one LU factorisation.
pub fn absorption_moments<B, D>(
    lo: usize,
    hi: usize,
    birth: B,
    death: D,
    k_max: usize,
) -> Result<Vec<Vec<f64>>>
where
    B: Fn(usize) -> f64,
    D: Fn(usize) -> f64,
{
    if hi < lo {
        return Err(Error::Config(format!("empty level range {lo}..={hi}")));
    }
    let s = hi - lo + 1;
    if s > MAX_ORACLE_SPAN {
        return Err(Error::Config(format!(
            "oracle span {s} exceeds {MAX_ORACLE_SPAN}"
        )));
    }
    let mut a = DMatrix::<f64>::zeros(s, s);
    for i in 0..s {
        let n = lo + i;
        let mu = death(n);
        let lambda = if n < hi { birth(n) } else { 0.0 };
        a[(i, i)] = mu + lambda;
        if i > 0 {
            a[(i, i - 1)] = -mu;
        }
        if n < hi {
            a[(i, i + 1)] = -lambda;
        }
    }
    let lu = a.lu();
    let mut rows = vec![vec![1.0; k_max + 1]; s];
    let mut prev = DVector::<f64>::from_element(s, 1.0);
    for k in 1..=k_max {
        let rhs = &prev * k as f64;
        let m = lu.solve(&rhs).ok_or_else(|| {
            Error::Singular(format!("generator on {lo}..={hi} is not invertible"))
        })?;
        if m.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::Singular(format!(
                "non-positive moment on {lo}..={hi}"
            )));
        }
        for i in 0..s {
            rows[i][k] = m[i];
        }
        prev = m;
    }
    Ok(rows)
}

/// Moments of `T_{n,m-1}` (time for the block-counting chain to go from
/// `n` to `m-1`) for every `n` in `m..=n_max`, births switched off at
/// `n_max`.
pub fn absorption_moment_oracle(
    params: &ModelParams,
    m: usize,
    n_max: usize,
    k_max: usize,
) -> Result<Vec<Vec<f64>>> {
    if m == 0 || params.death_rate(m) == 0.0 {
        return Err(Error::AbsorbingLevel { level: m });
    }
    absorption_moments(
        m,
        n_max,
        |n| params.birth_rate(n),
        |n| params.death_rate(n),
        k_max,
    )
}

/// Same quantities as [`absorption_moment_oracle`] assembled from a step
/// moment table by convolving independent one-step passages.
pub fn passage_moments_from_steps(table: &MomentTable, m: usize) -> Result<Vec<Vec<f64>>> {
    if m < table.n_min {
        return Err(Error::AbsorbingLevel { level: m });
    }
    let mut out = Vec::with_capacity(table.n_max - m + 1);
    let mut acc = table.row(m).expect("in range");
    out.push(acc.clone());
    for n in m + 1..=table.n_max {
        acc = convolve_moments(&acc, &table.row(n).expect("in range"));
        out.push(acc.clone());
    }
    Ok(out)
}
