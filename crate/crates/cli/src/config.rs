//! Run configuration: one flat key namespace shared by every subcommand.

use std::path::PathBuf;

use kneelink::config::KeyValues;
use kneelink::optimizer::{BarrierParams, Derivatives};
use kneelink::problem::ProblemConfig;
use kneelink::{Error, LinkSet, Result, BASELINE_DESIGN, REFERENCE_OPTIMUM};

/// Keys understood besides the problem keys (`d_min_mm`, `lb.lN`, `ub.lN`):
///
/// ```text
/// solver.mu0 solver.mu_shrink solver.mu_min solver.inner_tol solver.max_inner
/// solver.armijo_c solver.backtrack solver.fd_step_rel
/// solver.derivatives            forward | central
/// start.l1 .. start.l6          optimizer start (baseline design)
/// links.l1 .. links.l6          links for angle/sweep/simulate/validate/gait
/// out_dir                       output directory (kneelink-out)
/// sweep.d_lo sweep.d_hi sweep.n      d range defaults to d_min .. end of the ROM
/// simulate.frames simulate.d_hi
/// validate.d_mm validate.step
/// gait.human gait.exo gait.n gait.zero_tol
/// ```
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub solver: BarrierParams,
    pub start: [f64; 6],
    pub links: LinkSet,
    pub out_dir: PathBuf,
    pub sweep_d_lo: Option<f64>,
    pub sweep_d_hi: Option<f64>,
    pub sweep_n: usize,
    pub simulate_frames: usize,
    pub simulate_d_hi: Option<f64>,
    pub validate_d_mm: f64,
    pub validate_step: f64,
    pub gait_human: Option<PathBuf>,
    pub gait_exo: Option<PathBuf>,
    pub gait_n: usize,
    pub gait_zero_tol: f64,
}

fn take_sextuple(kv: &mut KeyValues, prefix: &str, default: [f64; 6]) -> Result<[f64; 6]> {
    let mut out = default;
    for (i, slot) in out.iter_mut().enumerate() {
        if let Some(v) = kv.take::<f64>(&format!("{prefix}.l{}", i + 1))? {
            *slot = v;
        }
    }
    Ok(out)
}

fn positive_count(key: &str, n: usize, min: usize) -> Result<usize> {
    if n < min {
        return Err(Error::Config {
            path: "config".into(),
            line: 0,
            reason: format!("`{key}` must be at least {min}, got {n}"),
        });
    }
    Ok(n)
}

impl RunConfig {
    pub fn from_key_values(mut kv: KeyValues) -> Result<Self> {
        let problem = ProblemConfig::from_key_values(&mut kv)?;
        problem.validate()?;

        let d = BarrierParams::default();
        let derivatives = match kv.take_string("solver.derivatives").as_deref() {
            None | Some("forward") => Derivatives::Forward,
            Some("central") => Derivatives::CentralDifference,
            Some(other) => {
                return Err(Error::Config {
                    path: "config".into(),
                    line: 0,
                    reason: format!("`solver.derivatives` must be forward or central, got `{other}`"),
                })
            }
        };
        let solver = BarrierParams {
            mu0: kv.take("solver.mu0")?.unwrap_or(d.mu0),
            mu_shrink: kv.take("solver.mu_shrink")?.unwrap_or(d.mu_shrink),
            mu_min: kv.take("solver.mu_min")?.unwrap_or(d.mu_min),
            inner_tol: kv.take("solver.inner_tol")?.unwrap_or(d.inner_tol),
            max_inner: kv.take("solver.max_inner")?.unwrap_or(d.max_inner),
            armijo_c: kv.take("solver.armijo_c")?.unwrap_or(d.armijo_c),
            backtrack: kv.take("solver.backtrack")?.unwrap_or(d.backtrack),
            fd_step_rel: kv.take("solver.fd_step_rel")?.unwrap_or(d.fd_step_rel),
            derivatives,
        };
        solver.validate().map_err(|e| Error::Config {
            path: "config".into(),
            line: 0,
            reason: e.to_string(),
        })?;

        let start = take_sextuple(&mut kv, "start", BASELINE_DESIGN)?;
        let links = LinkSet::from_array(take_sextuple(&mut kv, "links", REFERENCE_OPTIMUM)?)
            .map_err(|e| Error::Config {
                path: "config".into(),
                line: 0,
                reason: e.to_string(),
            })?;

        let cfg = RunConfig {
            problem,
            solver,
            start,
            links,
            out_dir: kv
                .take_string("out_dir")
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("kneelink-out")),
            sweep_d_lo: kv.take("sweep.d_lo")?,
            sweep_d_hi: kv.take("sweep.d_hi")?,
            sweep_n: positive_count("sweep.n", kv.take("sweep.n")?.unwrap_or(500), 2)?,
            simulate_frames: positive_count("simulate.frames", kv.take("simulate.frames")?.unwrap_or(4), 2)?,
            simulate_d_hi: kv.take("simulate.d_hi")?,
            validate_d_mm: kv.take("validate.d_mm")?.unwrap_or(252.0),
            validate_step: kv.take("validate.step")?.unwrap_or(0.5),
            gait_human: kv.take_string("gait.human").map(PathBuf::from),
            gait_exo: kv.take_string("gait.exo").map(PathBuf::from),
            gait_n: positive_count("gait.n", kv.take("gait.n")?.unwrap_or(101), 2)?,
            gait_zero_tol: kv.take("gait.zero_tol")?.unwrap_or(1e-9),
        };
        kv.finish()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_without_keys() {
        let c = RunConfig::from_key_values(KeyValues::new()).unwrap();
        assert_eq!(c.start, BASELINE_DESIGN);
        assert_eq!(c.links.as_array(), REFERENCE_OPTIMUM);
        assert_eq!(c.solver, BarrierParams::default());
        assert_eq!(c.validate_d_mm, 252.0);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let kv = KeyValues::parse("solver.mu = 1\n", "cfg").unwrap();
        let err = RunConfig::from_key_values(kv).unwrap_err().to_string();
        assert!(err.contains("solver.mu"), "{err}");
    }

    #[test]
    fn crossed_bounds_name_the_key() {
        let kv = KeyValues::parse("lb.l1 = 90\nub.l1 = 80\n", "cfg").unwrap();
        let err = RunConfig::from_key_values(kv).unwrap_err().to_string();
        assert!(err.contains("l1"), "{err}");
    }
}
