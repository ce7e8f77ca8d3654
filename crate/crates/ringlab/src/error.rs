//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Structural problem in a netlist (bad wiring, duplicate drivers, ...).
    #[error("netlist error: {0}")]
    Netlist(String),

    /// Parse failure in a netlist or config text file.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// The assembled linear system is singular at a frequency.
    #[error("singular system at omega = {omega_rad_s:.6e} rad/s (f = {:.6e} Hz)", omega_rad_s / (2.0 * std::f64::consts::PI))]
    Singular { omega_rad_s: f64 },

    /// A parameter is outside its valid domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A response sample has (near-)zero magnitude, so delay is undefined there.
    #[error("zero-magnitude response at omega = {omega_rad_s:.6e} rad/s; group delay undefined")]
    ZeroResponse { omega_rad_s: f64 },

    /// Adjacent-sample phase step too close to pi for reliable unwrapping.
    #[error("phase step {step_rad:.3} rad at sample {index} is too large; refine the frequency grid")]
    PhaseStep { index: usize, step_rad: f64 },

    /// The delay band cannot be resolved inside the scan window.
    #[error("widen scan window: {0}")]
    WidenScanWindow(String),

    /// Invalid or inconsistent run configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// Grid oracle refused: the requested grid is too large.
    #[error("grid too large: {points} points requested (limit {limit})")]
    GridTooLarge { points: u64, limit: u64 },

    /// Rank-deficient normal equations with kappa = 0.
    #[error("rank-deficient system: {0}")]
    RankDeficient(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
