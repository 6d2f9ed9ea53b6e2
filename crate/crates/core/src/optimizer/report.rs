use std::io::{self, Write};

use super::SolveReport;

pub fn write_text_report<W: Write>(report: &SolveReport, mut out: W) -> io::Result<()> {
    writeln!(out, "status: {}", report.status)?;
    writeln!(out, "theta_start_deg: {}", report.theta_start)?;
    writeln!(out, "theta_star_deg: {}", report.theta_star)?;
    writeln!(out, "kkt_residual: {:e}", report.kkt_residual)?;
    writeln!(out, "iterations: {}", report.total_iterations())?;
    writeln!(out)?;
    writeln!(out, "{:<6} {:>14} {:>14}", "link", "start_mm", "optimum_mm")?;
    for i in 0..6 {
        writeln!(
            out,
            "l{:<5} {:>14.6} {:>14.6}",
            i + 1,
            report.x_start.0[i],
            report.x_star.0[i]
        )?;
    }
    writeln!(out)?;
    writeln!(out, "{:<14} {:>12} {:>16} {:>7}", "constraint", "category", "value", "active")?;
    for c in &report.constraints {
        writeln!(
            out,
            "{:<14} {:>12} {:>16.9e} {:>7}",
            c.label,
            c.category.to_string(),
            c.value,
            if c.active { "yes" } else { "" }
        )?;
    }
    writeln!(out)?;
    writeln!(out, "{:<6} {:>10} {:>6} {:>14} {:>12} {}", "stage", "mu", "iters", "theta_deg", "kkt", "end")?;
    for (k, s) in report.stages.iter().enumerate() {
        writeln!(
            out,
            "{:<6} {:>10.1e} {:>6} {:>14.9} {:>12.3e} {:?}",
            k, s.mu, s.iterations, s.theta_deg, s.kkt_residual, s.end
        )?;
    }
    Ok(())
}

/// `constraint_label,value,active_flag`
pub fn write_constraint_csv<W: Write>(report: &SolveReport, mut out: W) -> io::Result<()> {
    writeln!(out, "constraint_label,value,active_flag")?;
    for c in &report.constraints {
        writeln!(out, "{},{},{}", c.label, c.value, u8::from(c.active))?;
    }
    Ok(())
}

/// `stage,mu,theta_deg,kkt_residual`
pub fn write_trace_csv<W: Write>(report: &SolveReport, mut out: W) -> io::Result<()> {
    writeln!(out, "stage,mu,theta_deg,kkt_residual")?;
    for (k, s) in report.stages.iter().enumerate() {
        writeln!(out, "{},{},{},{}", k, s.mu, s.theta_deg, s.kkt_residual)?;
    }
    Ok(())
}
