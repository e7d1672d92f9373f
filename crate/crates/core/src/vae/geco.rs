//! GECO constraint controller.
//!
//! Instead of a fixed KL weight, the reconstruction constraint
//! `E[err] ≤ κ²` is enforced through a Lagrange multiplier λ that grows
//! while the smoothed constraint violation is positive and decays once the
//! error drops below tolerance. The training loss is
//! `kl_term + λ · recon_term`.

/// Multiplier clamp range.
pub const MULTIPLIER_MIN: f64 = 1e-6;
pub const MULTIPLIER_MAX: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GecoState {
    /// Lagrange multiplier λ on the reconstruction term.
    pub multiplier: f64,
    /// Exponential moving average of the constraint `recon_err − κ²`.
    pub moving_avg: f64,
    /// Tolerance κ² (per-element squared error).
    pub tolerance: f64,
    /// Proportional step η on the multiplier exponent.
    pub step_size: f64,
    /// EMA smoothing α.
    pub smoothing: f64,
}

impl Default for GecoState {
    /// κ² = 0.0025 (pixel RMSE 0.05), η = 0.01, α = 0.99, λ₀ = 1.
    fn default() -> Self {
        GecoState {
            multiplier: 1.0,
            moving_avg: 0.0,
            tolerance: 0.0025,
            step_size: 0.01,
            smoothing: 0.99,
        }
    }
}

/// One controller update from the latest batch reconstruction error.
pub fn geco_step(state: &GecoState, recon_err: f64) -> GecoState {
    debug_assert!(recon_err.is_finite());
    let constraint = recon_err - state.tolerance;
    let moving_avg = state.smoothing * state.moving_avg + (1.0 - state.smoothing) * constraint;
    let multiplier = (state.multiplier * (state.step_size * moving_avg).exp())
        .clamp(MULTIPLIER_MIN, MULTIPLIER_MAX);
    GecoState {
        multiplier,
        moving_avg,
        ..*state
    }
}
