//! Statistics over engine output.

mod density;
mod quadrature;
mod rational;
mod series;

pub use density::{
    density_distance, max_push_forward_step, push_forward, stationary_cdf, stationary_density,
    stationary_moments_by_quadrature, DensityHistogram, DEFAULT_HISTOGRAM_BINS,
};
pub use quadrature::{gauss_legendre_rule, integrate};
pub use rational::{rational_bin_occupancy, transfer_fixed_point, RationalBins};
pub use series::{
    fit_decay_exponent, fluctuation_envelope, MeanSeries, MeanSeriesRecorder, SeriesPoint, DEFAULT_SAMPLES_PER_DECADE,
};

use crate::engine::ClassTable;
use crate::error::{Error, Result};
use crate::measure::{LogSumExp, SplitParameter};

/// Count-weighted mean of `M(t)` over all sub-branches in `table`.
pub fn mean_measure(table: &ClassTable, t: f64) -> Result<f64> {
    if table.is_empty() {
        return Err(Error::Domain("empty class table".into()));
    }
    let mut num = LogSumExp::new();
    let mut den = LogSumExp::new();
    for (k, n) in table.iter() {
        let ln_n = n.ln();
        num.add(ln_n + table.ln_threshold_quantity(*k, t));
        den.add(ln_n);
    }
    Ok((num.value() - den.value()).exp())
}

/// `Z ln(1/Z) + (1-Z) ln(1/(1-Z))`, the long-time mean of `M`.
pub fn limiting_mean(sp: &SplitParameter) -> f64 {
    let z = sp.z();
    -(z * sp.ln_z() + (1.0 - z) * sp.ln_one_minus_z())
}
