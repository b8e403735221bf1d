//! JSON experiment configurations: one experiment per file, dispatched on
//! the `kind` field.

use serde::Deserialize;

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentConfig {
    DualNormTable(DualNormConfig),
    DecayDemo(DecayConfig),
    Convergence(ConvergenceConfig),
    PatchStudy(PatchStudyConfig),
    Wave(WaveConfig),
    MeshInfo(MeshInfoConfig),
}

impl ExperimentConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            ExperimentConfig::DualNormTable(_) => "dual_norm_table",
            ExperimentConfig::DecayDemo(_) => "decay_demo",
            ExperimentConfig::Convergence(_) => "convergence",
            ExperimentConfig::PatchStudy(_) => "patch_study",
            ExperimentConfig::Wave(_) => "wave",
            ExperimentConfig::MeshInfo(_) => "mesh_info",
        }
    }

    /// Shrinks mesh resolutions by an integer factor for fast runs.
    ///
    /// Resolutions never drop below what the experiment geometry needs:
    /// the five-interface studies keep their alignment resolution, and
    /// structured coarse meshes stay at four cells or more.
    pub fn apply_scale(&mut self, scale: u32) {
        if scale <= 1 {
            return;
        }
        let s = scale as usize;
        match self {
            ExperimentConfig::DualNormTable(_) => {}
            ExperimentConfig::DecayDemo(c) => {
                // Keep the coarse mesh even so the interface stays
                // edge-aligned and the center node exists.
                c.coarse_cells = ((c.coarse_cells / s).max(4) + 1) & !1;
                c.fine_cells = (c.fine_cells / s).max(2 * c.coarse_cells);
                c.coefficient_cells = (c.coefficient_cells / s).clamp(1, c.fine_cells);
            }
            ExperimentConfig::Convergence(c) => {
                c.refinements = c.refinements.saturating_sub(s.ilog2() as usize).max(2);
                c.k_per_level.truncate(c.refinements);
                c.coefficient_cells = (c.coefficient_cells / s).max(1);
            }
            ExperimentConfig::PatchStudy(c) => {
                // The built-in network is aligned at `alignment_cells`;
                // the fine mesh cannot shrink below it.
                c.fine_cells = (c.fine_cells / s).max(c.alignment_cells);
                c.coarse_cells = (c.coarse_cells / s).max(4);
                c.coefficient_cells = (c.coefficient_cells / s).clamp(1, c.fine_cells);
            }
            ExperimentConfig::Wave(c) => {
                c.fine_cells = (c.fine_cells / s).max(64);
                c.coefficient_cells = (c.coefficient_cells / s).clamp(1, c.fine_cells);
                for cells in &mut c.coarse_cells {
                    *cells = (*cells / s).max(4);
                }
                c.coarse_cells.dedup();
                c.ks.truncate(c.coarse_cells.len());
            }
            ExperimentConfig::MeshInfo(c) => {
                c.refinements = c.refinements.min(8);
            }
        }
    }
}

/// Mesh and fracture inputs: builtin geometry name, or file paths.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum MeshSource {
    Builtin(String),
    Files {
        mesh_file: String,
        fracture_file: String,
    },
}

fn default_shapes() -> Vec<usize> {
    vec![1, 2]
}

fn default_a_values() -> Vec<f64> {
    vec![2.0, 20.0, 200.0, 2000.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualNormConfig {
    #[serde(default = "default_shapes")]
    pub shapes: Vec<usize>,
    #[serde(default = "default_a_values")]
    pub a_values: Vec<f64>,
}

fn d_16() -> usize {
    16
}
fn d_64() -> usize {
    64
}
fn d_128() -> usize {
    128
}
fn d_lo() -> f64 {
    0.1
}
fn d_hi() -> f64 {
    0.9
}
fn d_seed() -> u64 {
    7
}
fn d_sigma() -> f64 {
    500.0
}
fn d_layers() -> usize {
    8
}
fn d_variants() -> Vec<VariantName> {
    vec![VariantName::FractureAware, VariantName::ElementBased]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    FractureAware,
    ElementBased,
}

impl VariantName {
    pub fn to_variant(self) -> fraclod::interp::Variant {
        match self {
            VariantName::FractureAware => fraclod::interp::Variant::FractureAware,
            VariantName::ElementBased => fraclod::interp::Variant::ElementBased,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            VariantName::FractureAware => "fracture_aware",
            VariantName::ElementBased => "element_based",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayConfig {
    #[serde(default = "d_16")]
    pub coarse_cells: usize,
    #[serde(default = "d_64")]
    pub fine_cells: usize,
    #[serde(default = "d_64")]
    pub coefficient_cells: usize,
    #[serde(default = "d_lo")]
    pub lo: f64,
    #[serde(default = "d_hi")]
    pub hi: f64,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_conductivity_5")]
    pub interface_conductivity: f64,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
    #[serde(default = "d_layers")]
    pub layers: usize,
    #[serde(default = "d_variants")]
    pub variants: Vec<VariantName>,
}

fn d_conductivity_5() -> f64 {
    5.0
}
fn d_conductivity_2() -> f64 {
    2.0
}

fn d_mesh_builtin() -> MeshSource {
    MeshSource::Builtin("two_layer_unstructured".into())
}
fn d_refinements() -> usize {
    4
}
fn d_seeds() -> Vec<u64> {
    vec![101, 202, 303]
}
fn d_k_per_level() -> Vec<usize> {
    vec![2, 2, 3, 3]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceConfig {
    #[serde(default = "d_mesh_builtin")]
    pub mesh: MeshSource,
    #[serde(default = "d_refinements")]
    pub refinements: usize,
    #[serde(default = "d_64")]
    pub coefficient_cells: usize,
    #[serde(default = "d_lo")]
    pub lo: f64,
    #[serde(default = "d_hi")]
    pub hi: f64,
    #[serde(default = "d_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "d_conductivity_2")]
    pub interface_conductivity: f64,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
    #[serde(default = "d_k_per_level")]
    pub k_per_level: Vec<usize>,
}

fn d_sigmas() -> Vec<f64> {
    vec![10.0, 500.0]
}
fn d_ks() -> Vec<usize> {
    vec![1, 2, 3]
}
fn d_bulk_source_2() -> f64 {
    2.0
}
fn d_iface_source_10() -> f64 {
    10.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatchStudyConfig {
    #[serde(default = "d_16")]
    pub coarse_cells: usize,
    #[serde(default = "d_128")]
    pub fine_cells: usize,
    #[serde(default = "d_64")]
    pub alignment_cells: usize,
    #[serde(default = "d_64")]
    pub coefficient_cells: usize,
    #[serde(default = "d_lo")]
    pub lo: f64,
    #[serde(default = "d_hi")]
    pub hi: f64,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_conductivity_2")]
    pub interface_conductivity: f64,
    #[serde(default = "d_bulk_source_2")]
    pub bulk_source: f64,
    #[serde(default = "d_iface_source_10")]
    pub interface_source: f64,
    #[serde(default = "d_sigmas")]
    pub sigmas: Vec<f64>,
    #[serde(default = "d_ks")]
    pub ks: Vec<usize>,
    #[serde(default = "d_variants")]
    pub variants: Vec<VariantName>,
}

fn d_wave_coarse() -> Vec<usize> {
    vec![8, 16, 32]
}
fn d_wave_ks() -> Vec<usize> {
    vec![2, 2, 3]
}
fn d_tau() -> f64 {
    5e-3
}
fn d_t_end() -> f64 {
    0.1
}
fn d_samples() -> Vec<f64> {
    vec![0.1]
}
fn d_one() -> f64 {
    1.0
}
fn d_tenth() -> f64 {
    0.1
}
fn d_box() -> [f64; 2] {
    [0.375, 0.625]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveConfig {
    #[serde(default = "d_128")]
    pub fine_cells: usize,
    #[serde(default = "d_wave_coarse")]
    pub coarse_cells: Vec<usize>,
    #[serde(default = "d_wave_ks")]
    pub ks: Vec<usize>,
    #[serde(default = "d_64")]
    pub coefficient_cells: usize,
    #[serde(default = "d_lo")]
    pub lo: f64,
    #[serde(default = "d_hi")]
    pub hi: f64,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default = "d_conductivity_2")]
    pub interface_conductivity: f64,
    #[serde(default = "d_one")]
    pub bulk_density: f64,
    #[serde(default = "d_tenth")]
    pub interface_density: f64,
    #[serde(default = "d_box")]
    pub source_box: [f64; 2],
    #[serde(default = "d_one")]
    pub bulk_source_value: f64,
    #[serde(default = "d_one")]
    pub interface_source_value: f64,
    #[serde(default = "d_tau")]
    pub tau: f64,
    #[serde(default = "d_t_end")]
    pub t_end: f64,
    #[serde(default = "d_samples")]
    pub sample_times: Vec<f64>,
    #[serde(default)]
    pub switch_off: Option<f64>,
    #[serde(default = "d_sigma")]
    pub sigma: f64,
}

fn d_zero() -> usize {
    0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshInfoConfig {
    pub mesh: MeshSource,
    #[serde(default = "d_zero")]
    pub refinements: usize,
}

/// Reads and parses a config file.
pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, crate::CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| crate::CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| crate::CliError::Config(format!("invalid config {}: {e}", path.display())))
}
