//! One experiment: build the model named in a config, compute its ratio
//! table and diagnostics.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Deserialize;

use crate::cli::config::{ExperimentConfig, ModelKind, XMax};
use crate::dist::{total_variation, ExactDistribution};
use crate::error::{Error, Result};
use crate::models::antivoter::{self, AntiVoterChain};
use crate::models::binarycode::{self, CodeInstance, CodeSystem};
use crate::models::combinatorial::CombArray;
use crate::models::curieweiss::{CwParams, Sign};
use crate::models::independent::ComponentList;
use crate::models::{linear_grid, BandReport};
use crate::stein::{
    check_mgf_bound, fit_tail_integral_constant, pair_antisymmetry_check, AntisymmetricFn, DiagnosticsReport,
    RatioTable, SteinBudget,
};

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: DiagnosticsReport,
    pub table: RatioTable,
    /// The law the table was computed from.
    pub law: ExactDistribution,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CombParams {
    #[serde(default)]
    array: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    array_csv: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SizeParams {
    n: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CodeParams {
    n: u64,
    #[serde(default)]
    system: CodeSystem,
    /// Test hook: shifts the kernel drift to force an integrity failure.
    #[serde(default)]
    perturbation: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CwConfig {
    n: usize,
    beta: f64,
    #[serde(default)]
    h: f64,
    #[serde(default)]
    sign: Option<Sign>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct IndependentParams {
    #[serde(default)]
    components: Option<PathBuf>,
    #[serde(default)]
    rademacher: Option<usize>,
    #[serde(default)]
    cap: Option<f64>,
}

/// Parameters of the sampling step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sampling {
    pub seed: u64,
    pub samples: usize,
    pub burnin: usize,
    pub workers: usize,
}

const T_GRID_POINTS: usize = 400;
const T_GRID_STEP: f64 = 0.025;

fn t_grid() -> Vec<f64> {
    (0..T_GRID_POINTS).map(|i| 1e-3 + T_GRID_STEP * i as f64).collect()
}

fn resolve_grid(x_max: XMax, points: usize, cap: f64) -> Result<Vec<f64>> {
    let top = match x_max {
        XMax::Value(v) => v,
        XMax::Auto if cap.is_finite() && cap > 0.0 => cap,
        XMax::Auto => {
            return Err(Error::domain(format!(
                "x_max = \"auto\" needs a finite range cap, model gives {cap}"
            )))
        }
    };
    Ok(linear_grid(top, points))
}

/// Fitted constants of the MGF bound and the weighted tail integral, when
/// the budget admits them.
pub fn lemma_constants(law: &ExactDistribution, budget: &SteinBudget) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    let grid = t_grid();
    if let Ok(m) = check_mgf_bound(law, budget, &grid) {
        out.insert("mgf_c1".into(), m.fitted_c1);
        out.insert("mgf_c1_raw".into(), m.raw_max);
    }
    if let Ok(c2) = fit_tail_integral_constant(law, budget, &[1, 2, 3], &grid) {
        out.insert("tail_c2".into(), c2);
    }
    out
}

fn antisymmetry(kernel: &[(f64, f64, f64)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for f in AntisymmetricFn::ALL {
        worst = worst.max(pair_antisymmetry_check(kernel, f)?);
    }
    Ok(worst)
}

struct Parts {
    n: u64,
    band: BandReport,
    law: ExactDistribution,
    budget: SteinBudget,
    residuals: Vec<(&'static str, f64, f64)>,
    extras: BTreeMap<String, f64>,
}

/// Runs the experiment described by `cfg`; `sampling` adds a Monte Carlo
/// comparison against the exact law.
pub fn evaluate(cfg: &ExperimentConfig, sampling: Option<Sampling>) -> Result<Outcome> {
    let parts = match cfg.model {
        ModelKind::Combinatorial => combinatorial(cfg, sampling)?,
        ModelKind::Antivoter => antivoter_parts(cfg, sampling)?,
        ModelKind::Binarycode => binarycode_parts(cfg, sampling)?,
        ModelKind::Curieweiss => curieweiss_parts(cfg, sampling)?,
        ModelKind::Independent => independent_parts(cfg, sampling)?,
    };
    let mut extras = parts.extras;
    extras.extend(lemma_constants(&parts.law, &parts.budget));
    extras.insert("rate".into(), parts.band.rate);
    if parts.band.cap.is_finite() {
        extras.insert("range_cap".into(), parts.band.cap);
    }
    let mut pass = parts.band.fitted_constant.is_finite();
    let mut identity_residuals = BTreeMap::new();
    for (name, value, tol) in parts.residuals {
        pass &= value <= tol;
        identity_residuals.insert(name.to_string(), value);
    }
    let report = DiagnosticsReport {
        model: cfg.model.name().to_string(),
        n: parts.n,
        budget: parts.budget,
        fitted_constant: parts.band.fitted_constant,
        identity_residuals,
        pass,
        extras,
    };
    Ok(Outcome {
        report,
        table: parts.band.table,
        law: parts.law,
    })
}

/// The law a run would tabulate, without the diagnostics.
pub fn model_law(cfg: &ExperimentConfig) -> Result<ExactDistribution> {
    match cfg.model {
        ModelKind::Combinatorial => comb_array(cfg)?.exact_law(),
        ModelKind::Antivoter => {
            let p: SizeParams = cfg.params()?;
            AntiVoterChain::transition_rates(p.n)?.stationary_law()
        }
        ModelKind::Binarycode => {
            let p: CodeParams = cfg.params()?;
            CodeInstance::new(p.n, p.system)?.standardized_law()
        }
        ModelKind::Curieweiss => {
            let p: CwConfig = cfg.params()?;
            Ok(CwParams::new(p.n, p.beta, p.h)?
                .conditional_standardized_law(p.sign)?
                .law)
        }
        ModelKind::Independent => {
            let (list, _) = components(cfg)?;
            list.sum_law(crate::dist::DEFAULT_CONVOLUTION_CAP)
        }
    }
}

fn comb_array(cfg: &ExperimentConfig) -> Result<CombArray> {
    let p: CombParams = cfg.params()?;
    match (p.array, p.array_csv) {
        (Some(rows), None) => CombArray::validate_and_sigma(&rows),
        (None, Some(path)) => {
            let path = cfg.resolve(&path);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::domain(format!("cannot read array {}: {e}", path.display())))?;
            CombArray::from_csv(&text)
        }
        _ => Err(Error::domain("combinatorial needs exactly one of array, array_csv")),
    }
}

fn empirical_tv<T: Copy>(samples: &[T], to_x: impl Fn(T) -> f64, exact: &ExactDistribution) -> Result<f64> {
    let xs: Vec<f64> = samples.iter().map(|&s| to_x(s)).collect();
    Ok(total_variation(&ExactDistribution::empirical(&xs)?, exact))
}

fn combinatorial(cfg: &ExperimentConfig, sampling: Option<Sampling>) -> Result<Parts> {
    let arr = comb_array(cfg)?;
    let law = arr.exact_law()?;
    let cap = arr.budget().range_cap();
    let grid = resolve_grid(cfg.grid.x_max, cfg.grid.points, cap)?;
    let band = arr.band_report(&grid)?;
    let m = law.moments();
    let mut extras = BTreeMap::new();
    extras.insert("c0".into(), arr.c0());
    extras.insert("sigma".into(), arr.sigma());
    if let Some(s) = sampling {
        let draws = arr.sample(s.seed, s.samples, s.workers);
        extras.insert("mc_tv".into(), empirical_tv(&draws, |w| w, &law)?);
    }
    Ok(Parts {
        n: arr.n() as u64,
        band,
        budget: arr.budget(),
        residuals: vec![
            ("mean", m.mean.abs(), 1e-12),
            ("variance", (m.variance - 1.0).abs(), 1e-10),
        ],
        law,
        extras,
    })
}

fn antivoter_parts(cfg: &ExperimentConfig, sampling: Option<Sampling>) -> Result<Parts> {
    let p: SizeParams = cfg.params()?;
    let chain = AntiVoterChain::transition_rates(p.n)?;
    let ids = chain.exact_pair_identities()?;
    let nf = p.n as f64;
    let grid = resolve_grid(cfg.grid.x_max, cfg.grid.points, nf.powf(1.0 / 6.0))?;
    let band = antivoter::band_report(p.n, &grid)?;
    let law = chain.stationary_law()?;
    let mut extras = BTreeMap::new();
    if let Some(s) = sampling {
        let draws = chain.sample(s.seed, s.burnin, p.n, s.samples, s.workers);
        extras.insert("mc_tv".into(), empirical_tv(&draws, |t| chain.w(t), &law)?);
    }
    Ok(Parts {
        n: p.n as u64,
        band,
        budget: ids.budget,
        residuals: vec![
            ("drift", ids.drift_residual, 1e-12),
            ("d_closed_form", ids.d_residual, 1e-12),
            ("mean_d", ids.mean_d_residual, 1e-12),
            ("stationarity", chain.stationarity_residual(), 1e-12),
            ("antisymmetry", antisymmetry(&chain.pair_kernel())?, 1e-10),
        ],
        law,
        extras,
    })
}

fn binarycode_parts(cfg: &ExperimentConfig, sampling: Option<Sampling>) -> Result<Parts> {
    let p: CodeParams = cfg.params()?;
    let inst = CodeInstance::new(p.n, p.system)?;
    let k = inst.k as f64;
    let grid = resolve_grid(cfg.grid.x_max, cfg.grid.points, k.powf(1.0 / 6.0))?;
    let band = binarycode::band_report(p.n, p.system, &grid)?;
    let law = inst.standardized_law()?;
    let mut residuals = Vec::new();
    let mut extras = BTreeMap::new();
    let budget = if p.n <= 1 << 22 {
        let ids = binarycode::pair_identities_report_perturbed(p.n, p.perturbation)?;
        residuals.push(("drift", ids.drift_residual, 1e-10));
        residuals.push(("d_closed_form", ids.d_residual, 1e-10));
        extras.insert("lemma_q_constant".into(), ids.lemma_constant);
        ids.budget
    } else {
        // Identities are checked up to 2^22; beyond it the band uses the
        // step-size budget alone.
        SteinBudget::zero_bias(2.0 / k.sqrt())?
    };
    if p.n <= 1 << 16 {
        residuals.push(("antisymmetry", antisymmetry(&binarycode::pair_kernel(p.n)?)?, 1e-10));
    }
    if let Some(s) = sampling {
        let draws = inst.sample(s.seed, s.samples, s.workers);
        extras.insert("mc_tv".into(), empirical_tv(&draws, |v| inst.w(v as f64), &law)?);
    }
    Ok(Parts {
        n: p.n,
        band,
        law,
        budget,
        residuals,
        extras,
    })
}

fn curieweiss_parts(cfg: &ExperimentConfig, sampling: Option<Sampling>) -> Result<Parts> {
    let p: CwConfig = cfg.params()?;
    let params = CwParams::new(p.n, p.beta, p.h)?;
    let cl = params.conditional_standardized_law(p.sign)?;
    let nf = p.n as f64;
    let grid = resolve_grid(cfg.grid.x_max, cfg.grid.points, nf.powf(1.0 / 6.0))?;
    let band = BandReport::from_rate(&cl.law, &grid, 1.0 / nf.sqrt(), nf.powf(1.0 / 6.0))?;
    let fixed_point = params
        .roots
        .iter()
        .map(|&m| (m - (p.beta * (m + p.h)).tanh()).abs())
        .fold(0.0, f64::max);
    let (c_sum, c_diff) = params.kernel_constants(p.sign)?;
    let mut extras = BTreeMap::new();
    extras.insert("m".into(), cl.m);
    extras.insert("sigma".into(), cl.sigma);
    extras.insert("window_c1".into(), cl.c1);
    extras.insert("basin_delta2".into(), cl.basin_delta2);
    extras.insert("truncated_mass".into(), cl.truncated_mass);
    if cl.decay_rate.is_finite() {
        extras.insert("decay_rate".into(), cl.decay_rate);
    }
    extras.insert("zero_atom_mass".into(), cl.zero_atom_mass);
    extras.insert("kernel_sum_c".into(), c_sum);
    extras.insert("kernel_diff_c".into(), c_diff);
    if let Some(s) = sampling {
        let draws = params.glauber_sampler(s.seed, s.burnin, p.n, s.samples, s.workers)?;
        let exact = params.exact_spin_sum_law()?;
        extras.insert("mc_tv".into(), empirical_tv(&draws, |v| v as f64, &exact)?);
    }
    Ok(Parts {
        n: p.n as u64,
        band,
        budget: cl.budget,
        residuals: vec![
            ("fixed_point", fixed_point, 1e-13),
            ("stationarity", params.stationarity_residual(), 1e-10),
        ],
        law: cl.law,
        extras,
    })
}

fn components(cfg: &ExperimentConfig) -> Result<(ComponentList, Option<f64>)> {
    let p: IndependentParams = cfg.params()?;
    let list = match (p.components, p.rademacher) {
        (Some(path), None) => {
            let path = cfg.resolve(&path);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| Error::domain(format!("cannot read components {}: {e}", path.display())))?;
            ComponentList::from_json(&text)?
        }
        (None, Some(n)) => ComponentList::rademacher(n)?,
        _ => return Err(Error::domain("independent needs exactly one of components, rademacher")),
    };
    Ok((list, p.cap))
}

fn independent_parts(cfg: &ExperimentConfig, sampling: Option<Sampling>) -> Result<Parts> {
    if sampling.is_some() {
        return Err(Error::domain(
            "independent sums are computed exactly; drop the [mc] table",
        ));
    }
    let (list, cap) = components(cfg)?;
    let n = list.len();
    let cap = cap.unwrap_or((n as f64).powf(1.0 / 6.0));
    let grid = resolve_grid(cfg.grid.x_max, cfg.grid.points, cap)?;
    let band = list.band_report(&grid, cap)?;
    let law = list.sum_law(crate::dist::DEFAULT_CONVOLUTION_CAP)?;
    let reach = list
        .components()
        .iter()
        .flat_map(|c| c.support().iter().map(|v| v.abs()))
        .fold(0.0, f64::max);
    let mut extras = BTreeMap::new();
    extras.insert("gamma0".into(), list.gamma(0.0)?);
    Ok(Parts {
        n: n as u64,
        band,
        budget: SteinBudget::zero_bias(2.0 * reach)?,
        residuals: vec![("variance_sum", (list.sum_variance() - 1.0).abs(), 1e-10)],
        law,
        extras,
    })
}
