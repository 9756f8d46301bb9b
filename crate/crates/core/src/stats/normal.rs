/// CDF of `Normal(mean, sd^2)` at `x`, via the complementary error function
/// so that both tails keep full relative precision.
pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * libm::erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        // Phi(1), Phi(-3), Phi(0) from high-precision tables
        assert!((normal_cdf(1.0, 0.0, 1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
        assert!((normal_cdf(-3.0, 0.0, 1.0) - 0.001_349_898_031_630_094_6).abs() < 1e-17);
        assert_eq!(normal_cdf(0.0, 0.0, 1.0), 0.5);
        assert!((normal_cdf(2.0, 1.0, 2.0) - normal_cdf(0.5, 0.0, 1.0)).abs() < 1e-16);
    }
}
