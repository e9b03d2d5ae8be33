//! Experiment configuration files and report emission.
//!
//! Configs are TOML (schema documented in `docs/config.md`); series go to CSV
//! and run metadata to `manifest.json`. CSV bytes are deterministic for a
//! fixed config and seed; wall-clock timestamps live only in the manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{self, Mode, SystemSpec};
use crate::density::{PdfSpec, DEFAULT_TAIL_MASS};
use crate::error::{Error, Result};
use crate::mrsq;
use crate::quantizer::{self, DEFAULT_MAX_ITER, DEFAULT_TOL};
use crate::silent;
use crate::sim::{self, CostReport, ExperimentConfig, Policy, RateModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub plant: PlantSection,
    pub cost: CostSection,
    pub rates: RatesSection,
    pub policy: PolicySection,
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    pub a: f64,
    pub horizon: usize,
    pub disturbance: PdfSpec,
    #[serde(default = "default_mode")]
    pub mode: Mode,
}

fn default_mode() -> Mode {
    Mode::Iid
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSection {
    #[serde(default = "one")]
    pub state_weight: f64,
    #[serde(default)]
    pub control_weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesSection {
    pub model: String,
    #[serde(default)]
    pub rate: Option<u32>,
    #[serde(default)]
    pub schedule: Option<Vec<u32>>,
    #[serde(default)]
    pub p_drop: Option<f64>,
}

impl RatesSection {
    fn to_model(&self) -> Result<RateModel> {
        match self.model.as_str() {
            "fixed" => Ok(RateModel::Fixed {
                rate: self.rate.ok_or_else(|| Error::Config("rates.rate is required for model = \"fixed\"".into()))?,
            }),
            "schedule" => Ok(RateModel::Schedule {
                schedule: self
                    .schedule
                    .clone()
                    .ok_or_else(|| Error::Config("rates.schedule is required for model = \"schedule\"".into()))?,
            }),
            "erasure" => Ok(RateModel::IidErasure {
                p_drop: self
                    .p_drop
                    .ok_or_else(|| Error::Config("rates.p_drop is required for model = \"erasure\"".into()))?,
                rate: self.rate.ok_or_else(|| Error::Config("rates.rate is required for model = \"erasure\"".into()))?,
            }),
            other => Err(Error::Config(format!(
                "rates.model: unknown value `{other}` (expected fixed | schedule | erasure)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySection {
    /// greedy | event | lqr-exact | bennett
    pub kind: String,
    #[serde(default)]
    pub average_rate: Option<f64>,
    /// Event-policy sweep: one costs CSV per average rate.
    #[serde(default)]
    pub average_rates: Option<Vec<f64>>,
    /// Also run the fixed-rate greedy comparator alongside an event sweep.
    #[serde(default)]
    pub include_time_triggered: bool,
    /// Rates evaluated by the bennett policy.
    #[serde(default)]
    pub rates_list: Option<Vec<u32>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_grid")]
    pub grid_points: usize,
    #[serde(default = "default_tail")]
    pub tail_mass: f64,
    /// Depth of the exact per-history conditional-MSE emission (0 disables).
    #[serde(default)]
    pub subcell_depth: usize,
}

fn default_trials() -> usize {
    10_000
}

fn default_grid() -> usize {
    512
}

fn default_tail() -> f64 {
    DEFAULT_TAIL_MASS
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    fn experiment(&self, policy: Policy) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            a: self.plant.a,
            horizon: self.plant.horizon,
            state_weight: self.cost.state_weight,
            control_weight: self.cost.control_weight,
            disturbance: self.plant.disturbance.clone(),
            policy,
            rate_model: self.rates.to_model()?,
            trials: self.run.trials,
            seed: self.run.seed,
            grid_points: self.run.grid_points,
            tail_mass: self.run.tail_mass,
        })
    }

    fn lqr_spec(&self) -> Result<SystemSpec> {
        let d = self
            .plant
            .disturbance
            .to_density(self.run.tail_mass, self.run.grid_points)?;
        let steps = self.plant.horizon.saturating_sub(1);
        let rates = match self.rates.to_model()? {
            RateModel::Fixed { rate } => vec![rate; steps],
            RateModel::Schedule { schedule } => schedule,
            RateModel::IidErasure { .. } => {
                return Err(Error::Config("lqr-exact does not take an erasure model".into()))
            }
        };
        SystemSpec::new(
            self.plant.a,
            self.plant.horizon,
            vec![self.cost.state_weight; self.plant.horizon],
            vec![self.cost.control_weight; steps],
            rates,
            d,
            Mode::Lqr,
        )
    }
}

/// One produced file plus a short machine-readable summary.
#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: String,
    pub kind: String,
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub started_utc: String,
    pub finished_utc: String,
    pub seed: u64,
    pub config: RunConfig,
    pub outputs: Vec<OutputFile>,
}

fn fmt_f(x: f64) -> String {
    format!("{x:.12e}")
}

fn write_costs_csv(path: &Path, report: &CostReport) -> Result<()> {
    let mut s = String::from("t,J_t,stderr,LB_t,UB_t,cum_avg\n");
    for st in &report.steps {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            st.t,
            fmt_f(st.mean_cost),
            fmt_f(st.stderr),
            fmt_f(st.lower_bound),
            fmt_f(st.upper_bound),
            fmt_f(st.cum_avg)
        )
        .unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn write_rates_csv(path: &Path, report: &CostReport) -> Result<()> {
    let mut s = String::from("t,mean_rate,silence_freq\n");
    for st in &report.steps {
        writeln!(s, "{},{},{}", st.t, fmt_f(st.mean_rate), fmt_f(st.silence_freq)).unwrap();
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn report_summary(report: &CostReport) -> serde_json::Value {
    serde_json::json!({
        "steady_state_cost": report.steady_state_cost,
        "realized_avg_rate": report.realized_avg_rate,
        "trials": report.trials,
    })
}

/// Runs a config file end to end and writes every output under `out_dir`.
pub fn cmd_simulate(config_path: &Path, out_dir: &Path) -> Result<Manifest> {
    let config = RunConfig::from_path(config_path)?;
    std::fs::create_dir_all(out_dir)?;
    let started = chrono::Utc::now().to_rfc3339();
    let mut outputs = Vec::new();

    match config.policy.kind.as_str() {
        "greedy" => {
            let exp = config.experiment(Policy::Greedy)?;
            let report = sim::run_monte_carlo(&exp)?;
            let path = out_dir.join("costs.csv");
            write_costs_csv(&path, &report)?;
            outputs.push(OutputFile {
                path: rel(&path, out_dir),
                kind: "costs".into(),
                summary: report_summary(&report),
            });
            if matches!(exp.rate_model, RateModel::IidErasure { .. }) {
                let rp = out_dir.join("rates.csv");
                write_rates_csv(&rp, &report)?;
                outputs.push(OutputFile {
                    path: rel(&rp, out_dir),
                    kind: "rates".into(),
                    summary: serde_json::json!({}),
                });
            }
            if config.run.subcell_depth > 0 {
                let spec = exp.system_spec()?;
                let gains = control::riccati(&spec);
                let rows = sim::conditional_mse_tree(&spec, &gains, config.run.subcell_depth)?;
                let mut s = String::from("t,path,prob,mse\n");
                for r in &rows {
                    writeln!(s, "{},{},{},{}", r.t, r.path, fmt_f(r.prob), fmt_f(r.mse)).unwrap();
                }
                let sp = out_dir.join("subcells.csv");
                std::fs::write(&sp, s)?;
                outputs.push(OutputFile {
                    path: rel(&sp, out_dir),
                    kind: "subcells".into(),
                    summary: serde_json::json!({ "rows": rows.len() }),
                });
            }
        }
        "event" => {
            let mut sweep: Vec<f64> = match (&config.policy.average_rates, config.policy.average_rate) {
                (Some(list), _) => list.clone(),
                (None, Some(r)) => vec![r],
                (None, None) => {
                    return Err(Error::Config(
                        "policy.average_rate or policy.average_rates is required for kind = \"event\"".into(),
                    ))
                }
            };
            sweep.retain(|r| r.is_finite());
            for rbar in &sweep {
                let exp = config.experiment(Policy::Event { average_rate: *rbar })?;
                let report = sim::run_monte_carlo(&exp)?;
                let tag = format!("{rbar:.2}").replace('.', "p");
                let path = out_dir.join(format!("costs_rbar{tag}.csv"));
                write_costs_csv(&path, &report)?;
                let rp = out_dir.join(format!("rates_rbar{tag}.csv"));
                write_rates_csv(&rp, &report)?;
                outputs.push(OutputFile {
                    path: rel(&path, out_dir),
                    kind: "costs".into(),
                    summary: report_summary(&report),
                });
                outputs.push(OutputFile {
                    path: rel(&rp, out_dir),
                    kind: "rates".into(),
                    summary: serde_json::json!({ "average_rate": rbar }),
                });
            }
            if config.policy.include_time_triggered {
                let exp = config.experiment(Policy::Greedy)?;
                let report = sim::run_monte_carlo(&exp)?;
                let path = out_dir.join("costs_time_triggered.csv");
                write_costs_csv(&path, &report)?;
                outputs.push(OutputFile {
                    path: rel(&path, out_dir),
                    kind: "costs".into(),
                    summary: report_summary(&report),
                });
            }
        }
        "lqr-exact" => {
            let spec = config.lqr_spec()?;
            let rows = sim::run_lqr_exact(&spec)?;
            let mut s = String::from("t,greedy_cum,optimal_cum\n");
            for r in &rows {
                writeln!(s, "{},{},{}", r.t, fmt_f(r.greedy_cum), fmt_f(r.optimal_cum)).unwrap();
            }
            let path = out_dir.join("lqr_costs.csv");
            std::fs::write(&path, s)?;
            let last = rows.last().unwrap();
            outputs.push(OutputFile {
                path: rel(&path, out_dir),
                kind: "lqr-costs".into(),
                summary: serde_json::json!({
                    "greedy_final": last.greedy_cum,
                    "optimal_final": last.optimal_cum,
                    "gap_percent": 100.0 * (last.greedy_cum - last.optimal_cum) / last.optimal_cum,
                }),
            });
        }
        "bennett" => {
            let rates = config
                .policy
                .rates_list
                .clone()
                .unwrap_or_else(|| vec![1, 2, 3, 4, 5, 6, 7]);
            let d = config
                .plant
                .disturbance
                .to_density(config.run.tail_mass, config.run.grid_points.max(1 << 14))?;
            let mut s = String::from("rate,lloyd_max_D,bennett_D,ratio\n");
            for r in &rates {
                let fit = quantizer::lloyd_max_cells(&d, 1usize << r, DEFAULT_TOL, 100_000)?;
                let b = sim::bennett_distortion(&d, *r as f64);
                writeln!(s, "{},{},{},{}", r, fmt_f(fit.distortion), fmt_f(b), fmt_f(fit.distortion / b))
                    .unwrap();
            }
            let path = out_dir.join("bennett.csv");
            std::fs::write(&path, s)?;
            outputs.push(OutputFile {
                path: rel(&path, out_dir),
                kind: "bennett".into(),
                summary: serde_json::json!({ "rates": rates }),
            });
        }
        other => {
            return Err(Error::Config(format!(
                "policy.kind: unknown value `{other}` (expected greedy | event | lqr-exact | bennett)"
            )))
        }
    }

    let manifest = Manifest {
        tool: "qfc".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        started_utc: started,
        finished_utc: chrono::Utc::now().to_rfc3339(),
        seed: config.run.seed,
        config,
        outputs,
    };
    let mpath = out_dir.join("manifest.json");
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest).unwrap())?;
    Ok(manifest)
}

fn rel(path: &Path, base: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).display().to_string()
}

/// `quantize` subcommand body: plain Lloyd-Max, silent-cell design, or MRSQ.
pub fn cmd_quantize(
    pdf: &PdfSpec,
    rate: u32,
    delta: Option<f64>,
    mrsq_rates: Option<&[u32]>,
    weights: Option<&[f64]>,
    tail_mass: f64,
    grid_points: usize,
) -> Result<String> {
    let d = pdf.to_density(tail_mass, grid_points)?;
    let mut out = String::new();
    match (delta, mrsq_rates) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("--delta and --mrsq are mutually exclusive".into()))
        }
        (Some(delta), None) => {
            let s = silent::min_cell_prob_quantizer(&d, delta, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            writeln!(out, "silent_cell\t{}", s.silent_index).unwrap();
            writeln!(out, "delta\t{}", fmt_f(delta)).unwrap();
            writeln!(out, "silent_mass\t{}", fmt_f(s.silent_mass(&d))).unwrap();
            emit_quantizer(&mut out, &s.quantizer, &d);
        }
        (None, Some(stage_rates)) => {
            let w = weights.ok_or_else(|| Error::Config("--weights is required with --mrsq".into()))?;
            let glm = mrsq::generalized_lloyd_max(&d, stage_rates, w, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            writeln!(out, "weighted_distortion\t{}", fmt_f(glm.weighted_distortion)).unwrap();
            for (t, dt) in glm.stage_distortions.iter().enumerate() {
                writeln!(out, "stage_{}_distortion\t{}", t + 1, fmt_f(*dt)).unwrap();
            }
            let levels: Vec<String> = glm.mrsq.finest_levels().iter().map(|x| fmt_f(*x)).collect();
            writeln!(out, "finest_levels\t{}", levels.join("\t")).unwrap();
            for t in 0..glm.mrsq.stages() {
                let pts: Vec<String> = glm.mrsq.stage_points(t).iter().map(|x| fmt_f(*x)).collect();
                writeln!(out, "stage_{}_points\t{}", t + 1, pts.join("\t")).unwrap();
            }
        }
        (None, None) => {
            let q = quantizer::lloyd_max(&d, rate, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
            emit_quantizer(&mut out, &q, &d);
        }
    }
    Ok(out)
}

fn emit_quantizer(out: &mut String, q: &crate::quantizer::ScalarQuantizer, d: &crate::GriddedDensity) {
    let levels: Vec<String> = q.levels().iter().map(|x| fmt_f(*x)).collect();
    let points: Vec<String> = q.points().iter().map(|x| fmt_f(*x)).collect();
    writeln!(out, "levels\t{}", levels.join("\t")).unwrap();
    writeln!(out, "points\t{}", points.join("\t")).unwrap();
    writeln!(out, "distortion\t{}", fmt_f(q.distortion(d))).unwrap();
}

/// `bounds` subcommand body: tab-separated Prop-4 sequences.
pub fn cmd_bounds(a: f64, rate: f64, sigma2: f64, horizon: usize) -> String {
    let (lb, ub) = control::prop4_bounds(a, rate, sigma2, horizon);
    let (lb_fp, ub_fp) = control::prop4_fixed_points(a, rate, sigma2);
    let mut out = String::from("t\tLB\tUB\n");
    for t in 1..=horizon {
        writeln!(out, "{t}\t{}\t{}", fmt_f(lb[t - 1]), fmt_f(ub[t - 1])).unwrap();
    }
    writeln!(
        out,
        "fixed_point\t{}\t{}",
        lb_fp.map_or("divergent".into(), fmt_f),
        ub_fp.map_or("divergent".into(), fmt_f)
    )
    .unwrap();
    out
}

/// `bennett` subcommand body.
pub fn cmd_bennett(pdf: &PdfSpec, rate: f64, tail_mass: f64, grid_points: usize) -> Result<String> {
    let d = pdf.to_density(tail_mass, grid_points)?;
    let nu = sim::bennett_point_density(&d)?;
    let mut out = String::new();
    writeln!(out, "bennett_distortion\t{}", fmt_f(sim::bennett_distortion(&d, rate))).unwrap();
    writeln!(out, "point_density_mean\t{}", fmt_f(nu.mean())).unwrap();
    writeln!(out, "point_density_variance\t{}", fmt_f(nu.variance())).unwrap();
    Ok(out)
}

/// Locates a preset shipped in the repository's `presets/` directory.
pub fn preset_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../presets")
        .join(format!("{name}.toml"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let text = r#"
            [plant]
            a = 1.2
            horizon = 10
            disturbance = "gaussian:0,1"

            [cost]

            [rates]
            model = "fixed"
            rate = 1

            [policy]
            kind = "greedy"

            [run]
            trials = 100
            seed = 3
        "#;
        let cfg: RunConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.plant.horizon, 10);
        assert_eq!(cfg.cost.state_weight, 1.0);
        let exp = cfg.experiment(Policy::Greedy).unwrap();
        assert_eq!(exp.grid_points, 512);
    }

    #[test]
    fn rejects_unknown_fields_with_path() {
        let text = r#"
            [plant]
            a = 1.2
            horizon = 10
            disturbance = "gaussian:0,1"
            typo_field = 1

            [cost]
            [rates]
            model = "fixed"
            rate = 1
            [policy]
            kind = "greedy"
            [run]
        "#;
        let err = toml::from_str::<RunConfig>(text).unwrap_err();
        assert!(err.to_string().contains("typo_field"));
    }

    #[test]
    fn rejects_bad_rate_model() {
        let sec = RatesSection { model: "warble".into(), rate: None, schedule: None, p_drop: None };
        assert!(sec.to_model().is_err());
        let sec = RatesSection { model: "fixed".into(), rate: None, schedule: None, p_drop: None };
        assert!(matches!(sec.to_model(), Err(Error::Config(m)) if m.contains("rates.rate")));
    }

    #[test]
    fn quantize_command_formats() {
        let pdf: PdfSpec = "uniform:0,1".parse().unwrap();
        let out = cmd_quantize(&pdf, 1, None, None, None, 1e-12, 4096).unwrap();
        assert!(out.contains("levels"));
        assert!(out.contains("distortion"));
        let out = cmd_quantize(&pdf, 1, Some(0.5), None, None, 1e-12, 4096).unwrap();
        assert!(out.contains("silent_cell\t1"));
        let out = cmd_quantize(&pdf, 2, None, Some(&[1, 1]), Some(&[1.0, 1.0]), 1e-12, 4096).unwrap();
        assert!(out.contains("stage_2_distortion"));
    }

    #[test]
    fn bounds_command_formats() {
        let out = cmd_bounds(1.2, 1.0, 1.0, 3);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines[0], "t\tLB\tUB");
        assert!(lines[1].starts_with("1\t1.0"));
        assert!(out.contains("fixed_point"));
    }
}
