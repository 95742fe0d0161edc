//! Fixed-header CSV tables. Reals use [`format_real`].

use std::io::Write;

use crate::dynamic::TimeSample;
use crate::error::Result;
use crate::io::format_real;
use crate::steady::IterateSummary;

pub const TIME_SERIES_HEADER: &str =
    "t,norm_rho_inf,norm_f_weighted,decay_lhs,decay_rhs,bootstrap_ok";

pub const CONVERGENCE_HEADER: &str = "iteration,difference,ratio,bound_margin,grad_phi_sup";

/// `norm_f_weighted` is `‖e^{β/2(|v|²+g x3)} f‖∞`.
pub fn write_time_series<W: Write>(mut w: W, samples: &[TimeSample]) -> Result<()> {
    writeln!(w, "{TIME_SERIES_HEADER}")?;
    for s in samples {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            format_real(s.t),
            format_real(s.norms.rho_sup),
            format_real(s.norms.f_half_weighted),
            format_real(s.decay_lhs),
            format_real(s.decay_rhs),
            s.bootstrap_ok
        )?;
    }
    Ok(())
}

/// `ratio` is empty until two differences exist.
pub fn write_convergence<W: Write>(mut w: W, history: &[IterateSummary]) -> Result<()> {
    writeln!(w, "{CONVERGENCE_HEADER}")?;
    for h in history {
        writeln!(
            w,
            "{},{},{},{},{}",
            h.index,
            format_real(h.difference),
            h.ratio.map(format_real).unwrap_or_default(),
            format_real(h.bounds.worst_margin()),
            format_real(h.gradient_sup)
        )?;
    }
    Ok(())
}
