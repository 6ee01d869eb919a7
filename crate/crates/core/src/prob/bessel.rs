/// Modified Bessel function of the first kind, order zero.
///
/// Evaluated from `I₀(κ) = (1/2π) ∫ exp(κ cos t) dt` with the periodic
/// trapezoid rule, which converges geometrically once the node count exceeds
/// κ. Overflows to infinity beyond κ ≈ 710; use [`log_bessel_i0`] there.
pub fn bessel_i0(kappa: f64) -> f64 {
    log_bessel_i0(kappa).exp()
}

/// `ln I₀(κ)`, finite for all finite κ.
pub fn log_bessel_i0(kappa: f64) -> f64 {
    let k = kappa.abs();
    if k == 0.0 {
        return 0.0;
    }
    // node count well past the point where I_n(κ)/I_0(κ) drops below 1e-16
    let n = (2.0 * k + 64.0).ceil() as usize;
    let step = std::f64::consts::TAU / n as f64;
    let mut acc = 0.0;
    for j in 0..n {
        acc += (k * ((j as f64 * step).cos() - 1.0)).exp();
    }
    k + (acc / n as f64).ln()
}
