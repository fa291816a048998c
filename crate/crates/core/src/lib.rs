//! Partially exchangeable stochastic block models for node-colored
//! multilayer networks.
//!
//! The crate covers the hierarchical partition prior ([`franchise`], built
//! on the kernels in [`eppf`]), the collapsed network likelihood
//! ([`likelihood`]), a collapsed Gibbs sampler ([`sampler`]), posterior
//! summaries ([`posterior`]), prediction for unseen nodes ([`predict`]) and
//! synthetic data ([`simulate`]). [`pipeline`] and [`check`] drive these from
//! files and back the `pexsbm` command-line tool.

pub mod check;
pub mod eppf;
pub mod franchise;
pub mod likelihood;
pub mod network;
pub mod pipeline;
pub mod posterior;
pub mod predict;
pub mod sampler;
pub mod simulate;

/// `log Σ exp(x_i)`, or `-∞` for an empty input.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.into_iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
