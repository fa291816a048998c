//! Exchangeable partition probability functions for the two levels of the
//! hierarchy, evaluated in log space.
//!
//! A kernel knows how to score a multiset of block frequencies
//! `(n_1, ..., n_K)` and, for the urn computations, the log-ratio
//! produced by adding one element to an existing block or to a new one.
//! Dirichlet and normalized-stable kernels use closed forms; a
//! [`GenericEppf`] is scored by its evaluator only.

use std::fmt;
use std::sync::Arc;

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EppfError {
    #[error("frequency list is empty")]
    EmptyFrequencies,
    #[error("frequency at position {0} is zero")]
    ZeroFrequency(usize),
    #[error("cluster {index} does not exist (only {len} clusters)")]
    NoSuchCluster { index: usize, len: usize },
    #[error("Dirichlet concentration must be > 0, got {0}")]
    InvalidTheta(f64),
    #[error("stable discount must lie in (0, 1), got {0}")]
    InvalidSigma(f64),
    #[error("generic EPPF `{name}` failed validation at n = {n}: {reason}")]
    InvalidGeneric {
        name: String,
        n: usize,
        reason: String,
    },
}

/// Log of the ascending factorial `[x]_n = x (x+1) ... (x+n-1)`.
///
/// Short products are multiplied out in chunks, which keeps the result
/// accurate to a few ulps; long ones use log-gamma.
pub fn ln_rising(x: f64, n: usize) -> f64 {
    if n > 256 {
        return ln_gamma(x + n as f64) - ln_gamma(x);
    }
    let mut out = 0.0;
    let mut prod = 1.0f64;
    for i in 0..n {
        prod *= x + i as f64;
        if prod > 1e250 {
            out += prod.ln();
            prod = 1.0;
        }
    }
    out + prod.ln()
}

/// `ln((n-1)!)` for `n >= 1`.
fn ln_factorial_minus_one(n: usize) -> f64 {
    ln_rising(1.0, n - 1)
}

type LogEppfFn = dyn Fn(&[usize]) -> f64 + Send + Sync;

/// A user-supplied log-EPPF evaluator.
///
/// The evaluator receives strictly positive frequencies and returns
/// `log Φ^(n)_K(n_1, ..., n_K)`. It must be symmetric in its arguments and
/// satisfy the addition rule; [`GenericEppf::new`] checks both, together
/// with normalization, on every `n <= 6`.
#[derive(Clone)]
pub struct GenericEppf {
    name: String,
    eval: Arc<LogEppfFn>,
}

impl GenericEppf {
    pub const VALIDATION_MAX_N: usize = 6;
    const VALIDATION_TOL: f64 = 1e-9;

    pub fn new<F>(name: impl Into<String>, eval: F) -> Result<Self, EppfError>
    where
        F: Fn(&[usize]) -> f64 + Send + Sync + 'static,
    {
        let out = Self::new_unchecked(name, eval);
        out.validate(Self::VALIDATION_MAX_N)?;
        Ok(out)
    }

    /// Wraps an evaluator without running [`GenericEppf::validate`].
    pub fn new_unchecked<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(&[usize]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    fn call(&self, freqs: &[usize]) -> f64 {
        (self.eval)(freqs)
    }

    /// Checks normalization and the addition rule for every `n <= max_n`.
    pub fn validate(&self, max_n: usize) -> Result<(), EppfError> {
        let fail = |n: usize, reason: String| EppfError::InvalidGeneric {
            name: self.name.clone(),
            n,
            reason,
        };
        for n in 1..=max_n {
            let mut total = 0.0;
            for freqs in integer_partitions(n) {
                let lp = self.call(&freqs);
                if !lp.is_finite() && lp != f64::NEG_INFINITY {
                    return Err(fail(n, format!("non-finite value for {freqs:?}")));
                }
                total += set_partition_count(&freqs) * lp.exp();

                let mut reversed = freqs.clone();
                reversed.reverse();
                if (self.call(&reversed) - lp).abs() > Self::VALIDATION_TOL {
                    return Err(fail(n, format!("not symmetric at {freqs:?}")));
                }

                if n < max_n {
                    let mut next = 0.0;
                    let mut grown = freqs.clone();
                    for k in 0..freqs.len() {
                        grown[k] += 1;
                        next += self.call(&grown).exp();
                        grown[k] -= 1;
                    }
                    grown.push(1);
                    next += self.call(&grown).exp();
                    if (next - lp.exp()).abs() > Self::VALIDATION_TOL {
                        return Err(fail(n, format!("addition rule violated at {freqs:?}")));
                    }
                }
            }
            if (total - 1.0).abs() > Self::VALIDATION_TOL {
                return Err(fail(n, format!("masses sum to {total}")));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for GenericEppf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericEppf").field("name", &self.name).finish()
    }
}

/// One level of the hierarchy: the law of an exchangeable random partition.
#[derive(Clone, Debug)]
pub enum EppfKernel {
    /// Dirichlet process with concentration `theta > 0`.
    Dirichlet { theta: f64 },
    /// Normalized stable process with discount `sigma` in `(0, 1)`.
    Stable { sigma: f64 },
    Generic(GenericEppf),
}

/// How a frequency vector grows by one element.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Change {
    Increment(usize),
    NewCluster,
}

impl EppfKernel {
    pub fn dirichlet(theta: f64) -> Result<Self, EppfError> {
        if theta > 0.0 && theta.is_finite() {
            Ok(Self::Dirichlet { theta })
        } else {
            Err(EppfError::InvalidTheta(theta))
        }
    }

    pub fn stable(sigma: f64) -> Result<Self, EppfError> {
        if sigma > 0.0 && sigma < 1.0 {
            Ok(Self::Stable { sigma })
        } else {
            Err(EppfError::InvalidSigma(sigma))
        }
    }

    /// The same law as `self`, but routed through the generic evaluator so
    /// every probability is computed from explicit `log_phi` calls.
    pub fn as_generic(&self) -> Self {
        match self {
            Self::Generic(_) => self.clone(),
            closed => {
                let inner = closed.clone();
                let name = match closed {
                    Self::Dirichlet { theta } => format!("dirichlet({theta})"),
                    Self::Stable { sigma } => format!("stable({sigma})"),
                    Self::Generic(_) => unreachable!(),
                };
                Self::Generic(GenericEppf::new_unchecked(name, move |f| {
                    inner.log_phi_unchecked(f)
                }))
            }
        }
    }

    pub fn has_closed_form(&self) -> bool {
        !matches!(self, Self::Generic(_))
    }

    /// `log Φ^(n)_K(n_1, ..., n_K)`.
    pub fn log_phi(&self, freqs: &[usize]) -> Result<f64, EppfError> {
        if freqs.is_empty() {
            return Err(EppfError::EmptyFrequencies);
        }
        if let Some(i) = freqs.iter().position(|&f| f == 0) {
            return Err(EppfError::ZeroFrequency(i));
        }
        Ok(self.log_phi_unchecked(freqs))
    }

    /// As [`EppfKernel::log_phi`], with `log Φ^(0) = 0` for the empty
    /// partition and no argument checks.
    pub(crate) fn log_phi_unchecked(&self, freqs: &[usize]) -> f64 {
        if freqs.is_empty() {
            return 0.0;
        }
        let n: usize = freqs.iter().sum();
        let k = freqs.len();
        match self {
            Self::Dirichlet { theta } => {
                let mut out = k as f64 * theta.ln() - ln_rising(*theta, n);
                for &f in freqs {
                    out += ln_factorial_minus_one(f);
                }
                out
            }
            Self::Stable { sigma } => {
                let mut out = ln_factorial_minus_one(k) + (k - 1) as f64 * sigma.ln()
                    - ln_factorial_minus_one(n);
                for &f in freqs {
                    out += ln_rising(1.0 - sigma, f - 1);
                }
                out
            }
            Self::Generic(g) => g.call(freqs),
        }
    }

    /// `log Φ(after) - log Φ(before)` for a one-element change.
    pub fn log_ratio_add(&self, freqs: &[usize], change: Change) -> Result<f64, EppfError> {
        if let Change::Increment(index) = change {
            if index >= freqs.len() {
                return Err(EppfError::NoSuchCluster {
                    index,
                    len: freqs.len(),
                });
            }
        }
        let n: usize = freqs.iter().sum();
        let k = freqs.len();
        Ok(match (self, change) {
            (Self::Generic(_), change) => {
                let mut after = freqs.to_vec();
                match change {
                    Change::Increment(i) => after[i] += 1,
                    Change::NewCluster => after.push(1),
                }
                self.log_phi_unchecked(&after) - self.log_phi_unchecked(freqs)
            }
            (closed, Change::Increment(i)) => closed.ln_existing_ratio(freqs[i], n),
            (closed, Change::NewCluster) => closed.ln_new_ratio(k, n),
        })
    }

    /// Closed-form log-ratio for joining a block of size `size` when the
    /// partition holds `n` elements. Generic kernels return `NaN`.
    #[inline]
    pub(crate) fn ln_existing_ratio(&self, size: usize, n: usize) -> f64 {
        match self {
            Self::Dirichlet { theta } => (size as f64).ln() - (theta + n as f64).ln(),
            Self::Stable { sigma } => (size as f64 - sigma).ln() - (n as f64).ln(),
            Self::Generic(_) => f64::NAN,
        }
    }

    /// Closed-form log-ratio for opening block `k + 1` when the partition
    /// holds `n` elements in `k` blocks. Generic kernels return `NaN`.
    #[inline]
    pub(crate) fn ln_new_ratio(&self, k: usize, n: usize) -> f64 {
        if n == 0 {
            return 0.0;
        }
        match self {
            Self::Dirichlet { theta } => theta.ln() - (theta + n as f64).ln(),
            Self::Stable { sigma } => (k as f64 * sigma).ln() - (n as f64).ln(),
            Self::Generic(_) => f64::NAN,
        }
    }
}

/// All integer partitions of `n` as non-increasing vectors.
pub fn integer_partitions(n: usize) -> Vec<Vec<usize>> {
    fn rec(rem: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rem == 0 {
            out.push(cur.clone());
            return;
        }
        for part in (1..=rem.min(max)).rev() {
            cur.push(part);
            rec(rem - part, part, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, n, &mut Vec::new(), &mut out);
    }
    out
}

/// Number of set partitions of `[n]` whose block sizes are `freqs`:
/// `n! / (prod n_k! * prod m_r!)` with `m_r` the multiplicity of size `r`.
pub fn set_partition_count(freqs: &[usize]) -> f64 {
    let n: usize = freqs.iter().sum();
    let mut ln = ln_rising(1.0, n);
    for &f in freqs {
        ln -= ln_rising(1.0, f);
    }
    let mut sorted = freqs.to_vec();
    sorted.sort_unstable();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        ln -= ln_rising(1.0, j - i);
        i = j;
    }
    ln.exp().round()
}
