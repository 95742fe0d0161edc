//! Configuration files, binary snapshots and CSV diagnostics.

pub mod config;
pub mod csv;
pub mod snapshot;

pub use config::RunConfig;
pub use snapshot::Snapshot;

/// Shortest decimal text that parses back to the same `f64`.
///
/// ```
/// use vpgrav::io::format_real;
/// assert_eq!(format_real(0.1), "0.1");
/// assert_eq!(format_real(1e-300), "1e-300");
/// assert_eq!(format_real(-2.0), "-2");
/// ```
pub fn format_real(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
