//! Losses, image metrics, AdamW and the multi-view fitting loop.

mod adamw;
mod fitting;
mod losses;

pub use adamw::{adamw_step, adamw_step_scaled, AdamState, AdamWConfig, StepOutcome};
pub use fitting::{
    fit_map, fit_subject, render_raw, view_objective, EvalMetrics, FitConfig, FitReport, IterationRecord, LrMultipliers,
    ObjectiveValue,
};
pub use losses::{loss_kl, loss_l1, loss_ssim, mse, psnr, psnr_from_mse, ssim, KlLoss, Loss, SSIM_SIGMA, SSIM_WINDOW};
