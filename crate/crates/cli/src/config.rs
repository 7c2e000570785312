//! Run configuration: TOML file, environment overrides (`NEMSLAB_*`), and
//! command-line overrides, folded into one validated structure.

use std::path::Path;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use serde::Deserialize;
use sha2::{Digest, Sha256};

use nemslab_core::domain::{extrude, make_domain, power_law_datum, BoundaryDatum, Domain2D, DomainKind, Grid3D};
use nemslab_core::params::{linear_schedule, ScalingParams};
use nemslab_core::solver::SolveOptions;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub domain: DomainSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub boundary: BoundarySection,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub solve: SolveSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub renormalized: RenormalizedSection,
    #[serde(default)]
    pub core: CoreSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub kind: String,
    pub radius: Option<f64>,
    pub width: Option<f64>,
    pub height: Option<f64>,
    pub r_in: Option<f64>,
    pub r_out: Option<f64>,
    pub nx: usize,
    pub ny: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub n_layers: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n_layers: 8 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub degree: i32,
}

impl Default for BoundarySection {
    fn default() -> Self {
        Self { degree: 1 }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub eps: Option<f64>,
    pub eta: Option<f64>,
    pub h: Option<f64>,
    pub lambda: Option<f64>,
    pub k: Option<f64>,
    pub eps_list: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveSection {
    pub max_iters: usize,
    pub tol_residual: f64,
    pub step_init: f64,
    pub step_shrink: f64,
    pub seed: u64,
    pub progress_every: usize,
    pub stall_tol: f64,
}

impl Default for SolveSection {
    fn default() -> Self {
        let d = SolveOptions::default();
        Self {
            max_iters: d.max_iters,
            tol_residual: d.tol_residual,
            step_init: d.step_init,
            step_shrink: d.step_shrink,
            seed: d.seed,
            progress_every: d.progress_every,
            stall_tol: d.stall_tol,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub warm_start: bool,
    pub recovery_init: bool,
    pub core_threshold: f64,
    /// sigma/eps ratios of the core-constant ladder.
    pub core_ladder: Vec<f64>,
    pub core_base_eps: f64,
    pub core_cells_per_eps: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            warm_start: true,
            recovery_init: true,
            core_threshold: 0.5,
            core_ladder: vec![4.0, 8.0, 16.0],
            core_base_eps: 0.25,
            core_cells_per_eps: 6.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenormalizedSection {
    pub n_defects: usize,
    pub seeds: Vec<u64>,
    /// Landscape scan stride in nodes; 0 disables the scan.
    pub scan_stride: usize,
}

impl Default for RenormalizedSection {
    fn default() -> Self {
        Self { n_defects: 1, seeds: vec![0, 1], scan_stride: 0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoreSection {
    pub k: f64,
    pub sigma_list: Vec<f64>,
    pub eps: f64,
    pub n_layers: usize,
    pub cells_per_eps: f64,
    /// Explicit per-entry resolutions; derived from `cells_per_eps` if empty.
    pub nx_list: Vec<usize>,
}

impl Default for CoreSection {
    fn default() -> Self {
        Self {
            k: std::f64::consts::FRAC_1_SQRT_2,
            sigma_list: vec![0.2, 0.4, 0.8],
            eps: 0.05,
            n_layers: 8,
            cells_per_eps: 6.0,
            nx_list: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<String>,
}

/// One fully validated run configuration.
pub struct RunConfig {
    pub raw: RawConfig,
    pub domain: Arc<Domain2D>,
    pub grid: Arc<Grid3D>,
    pub datum: BoundaryDatum,
    pub parameterization: Parameterization,
    pub solve: SolveOptions,
    pub out_dir: std::path::PathBuf,
    /// Truncated SHA-256 of the effective (post-override) configuration.
    pub hash: String,
}

pub enum Parameterization {
    Single(ScalingParams),
    Schedule { k: f64, entries: Vec<ScalingParams> },
}

impl Parameterization {
    pub fn triple_label(&self) -> String {
        match self {
            Parameterization::Single(p) => format!("eps={} eta={} k={}", p.eps(), p.eta(), p.eta() / p.eps()),
            Parameterization::Schedule { k, entries } => {
                let eps: Vec<String> = entries.iter().map(|p| p.eps().to_string()).collect();
                let eta: Vec<String> = entries.iter().map(|p| p.eta().to_string()).collect();
                format!("eps={} eta={} k={}", eps.join(";"), eta.join(";"), k)
            }
        }
    }
}

/// Apply `NEMSLAB_<SECTION>_<KEY>=value` environment overrides onto the
/// parsed TOML document before deserialization.
fn apply_env_overrides(doc: &mut toml::Table) -> Result<()> {
    for (key, value) in std::env::vars() {
        let Some(rest) = key.strip_prefix("NEMSLAB_") else { continue };
        let Some((section, field)) = rest.split_once('_') else { continue };
        let section = section.to_ascii_lowercase();
        let field = field.to_ascii_lowercase();
        let parsed: toml::Value = match value.parse::<i64>() {
            Ok(v) => toml::Value::Integer(v),
            Err(_) => match value.parse::<f64>() {
                Ok(v) => toml::Value::Float(v),
                Err(_) => match value.parse::<bool>() {
                    Ok(v) => toml::Value::Boolean(v),
                    Err(_) => toml::Value::String(value.clone()),
                },
            },
        };
        doc.entry(section)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| anyhow!("override {key} targets a non-table section"))?
            .insert(field, parsed);
    }
    Ok(())
}

pub struct CliOverrides {
    pub out: Option<String>,
    pub seed: Option<u64>,
}

pub fn load_config(path: &Path, overrides: &CliOverrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let mut doc: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| anyhow!("config parse error in {}: {e}", path.display()))?;
    apply_env_overrides(&mut doc)?;
    let effective = toml::to_string(&doc).unwrap_or_default();
    let raw: RawConfig = doc
        .try_into()
        .map_err(|e: toml::de::Error| anyhow!("config error in {}: {e}", path.display()))?;

    let kind = match raw.domain.kind.as_str() {
        "disk" => DomainKind::Disk {
            radius: raw.domain.radius.ok_or_else(|| anyhow!("domain.radius required for disk"))?,
        },
        "rectangle" => DomainKind::Rectangle {
            width: raw.domain.width.ok_or_else(|| anyhow!("domain.width required for rectangle"))?,
            height: raw.domain.height.ok_or_else(|| anyhow!("domain.height required for rectangle"))?,
        },
        "annulus" => DomainKind::Annulus {
            r_in: raw.domain.r_in.ok_or_else(|| anyhow!("domain.r_in required for annulus"))?,
            r_out: raw.domain.r_out.ok_or_else(|| anyhow!("domain.r_out required for annulus"))?,
        },
        other => bail!("unknown domain.kind {other:?} (expected disk, rectangle, or annulus)"),
    };
    let domain = make_domain(kind, raw.domain.nx, raw.domain.ny)?;
    let grid = Arc::new(extrude(&domain, raw.grid.n_layers)?);
    let datum = power_law_datum(&domain, raw.boundary.degree);

    let p = &raw.params;
    let given = [
        p.eps.is_some() || p.eta.is_some(),
        p.h.is_some() || p.lambda.is_some(),
        p.k.is_some() || p.eps_list.is_some(),
    ];
    let n_given = given.iter().filter(|&&b| b).count();
    if n_given != 1 {
        bail!(
            "params must use exactly one parameterization: (eps, eta) or (h, lambda) or (k, eps_list); {n_given} given"
        );
    }
    let parameterization = if given[0] {
        let eps = p.eps.ok_or_else(|| anyhow!("params.eps required with params.eta"))?;
        let eta = p.eta.ok_or_else(|| anyhow!("params.eta required with params.eps"))?;
        Parameterization::Single(ScalingParams::new(eps, eta)?)
    } else if given[1] {
        let h = p.h.ok_or_else(|| anyhow!("params.h required with params.lambda"))?;
        let lambda = p.lambda.ok_or_else(|| anyhow!("params.lambda required with params.h"))?;
        Parameterization::Single(ScalingParams::from_physical(h, lambda)?)
    } else {
        let k = p.k.ok_or_else(|| anyhow!("params.k required with params.eps_list"))?;
        let eps_list = p.eps_list.clone().ok_or_else(|| anyhow!("params.eps_list required with params.k"))?;
        Parameterization::Schedule { k, entries: linear_schedule(k, &eps_list)? }
    };

    let mut solve = SolveOptions {
        max_iters: raw.solve.max_iters,
        tol_residual: raw.solve.tol_residual,
        step_init: raw.solve.step_init,
        step_shrink: raw.solve.step_shrink,
        seed: raw.solve.seed,
        progress_every: raw.solve.progress_every,
        stall_tol: raw.solve.stall_tol,
    };
    if let Some(seed) = overrides.seed {
        solve.seed = seed;
    }

    let out_dir = overrides
        .out
        .clone()
        .or_else(|| raw.output.dir.clone())
        .unwrap_or_else(|| "runs/out".to_string());

    let mut hasher = Sha256::new();
    hasher.update(effective.as_bytes());
    hasher.update(solve.seed.to_le_bytes());
    let hash = hasher
        .finalize()
        .iter()
        .take(6)
        .map(|b| format!("{b:02x}"))
        .collect::<String>();

    Ok(RunConfig {
        raw,
        domain,
        grid,
        datum,
        parameterization,
        solve,
        out_dir: out_dir.into(),
        hash,
    })
}

/// Standard CSV preamble: schema version, config hash, parameter triple.
pub fn csv_header(cfg: &RunConfig) -> String {
    format!("# nemslab-csv v1 config={} {}\n", cfg.hash, cfg.parameterization.triple_label())
}
