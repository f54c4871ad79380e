//! Run configuration and the fine / coarse / comparison pipelines behind the
//! command-line tool.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_system, coarse_cell_sources, roller_constraints, AssembledSystem};
use crate::coefficients::MaterialParams;
use crate::error::{Error, Result};
use crate::geometry::fractures::{clip_segment, lerp};
use crate::geometry::{embed_fractures, CoarseGrid, FineMesh, FractureSet, Polyline};
use crate::io;
use crate::nlmc::{assemble_projection, build_bases, upscale, CoarseLayout, CoarseSystem, ProjectionOperator};
use crate::solver::{coarse_average, error_metrics, reconstruct, ErrorMetrics, Stepper};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub nx: usize,
    pub ny: usize,
    pub width: f64,
    pub height: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        Self { nx: 120, ny: 120, width: 1.0, height: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoarseConfig {
    pub nx: usize,
    pub ny: usize,
    /// Oversampling layers; `compare` runs one coarse model per entry.
    pub layers: Vec<usize>,
    /// Close the coarse flow block so constant pressures carry no flux.
    pub conservative: bool,
}

impl CoarseConfig {
    /// Largest configured layer count; `basis` and `coarse` use this one.
    pub fn max_layers(&self) -> usize {
        self.layers.iter().copied().max().unwrap_or(0)
    }
}

impl Default for CoarseConfig {
    fn default() -> Self {
        Self { nx: 20, ny: 20, layers: vec![1, 2, 3, 4], conservative: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FractureConfig {
    /// Geometry file; `None` (written as an empty string) runs without fractures.
    #[serde(serialize_with = "write_file", deserialize_with = "read_file")]
    pub file: Option<PathBuf>,
}

fn write_file<S: serde::Serializer>(file: &Option<PathBuf>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match file {
        Some(p) => p.serialize(s),
        None => s.serialize_str(""),
    }
}

fn read_file<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<PathBuf>, D::Error> {
    let p = PathBuf::deserialize(d)?;
    Ok((!p.as_os_str().is_empty()).then_some(p))
}

impl Default for FractureConfig {
    fn default() -> Self {
        Self { file: Some(PathBuf::from("data/fractures_30.txt")) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    /// Coarse cells receiving the source. Defaults to the cells a quarter
    /// and three quarters of the way along the diagonal.
    pub cells: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub snapshots: Vec<usize>,
    pub dump_blocks: bool,
    pub write_vtk: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            snapshots: vec![5, 15, 50],
            dump_blocks: false,
            write_vtk: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GenerateConfig {
    pub seed: u64,
    pub count: usize,
    pub min_length: f64,
    pub max_length: f64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self { seed: 7, count: 30, min_length: 0.075, max_length: 0.225 }
    }
}

/// Everything a run needs. Every default reproduces the reference setup:
/// 120×120 fine grid, 20×20 coarse grid, four oversampling layers, 50 steps
/// over ten years.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub mesh: MeshConfig,
    pub coarse: CoarseConfig,
    pub material: MaterialParams,
    pub fractures: FractureConfig,
    pub sources: SourceConfig,
    pub output: OutputConfig,
    pub generate: GenerateConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Loads a TOML file; a relative fracture path is taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let (Some(f), Some(dir)) = (&cfg.fractures.file, path.parent()) {
            // relative paths resolve against the config file when possible
            if f.is_relative() && dir.join(f).exists() {
                cfg.fractures.file = Some(dir.join(f));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything that can be checked before assembling anything.
    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        let m = &self.mesh;
        if m.nx == 0 || m.ny == 0 || !(m.width > 0.0) || !(m.height > 0.0) {
            return cfg("mesh sizes must be positive".into());
        }
        let c = &self.coarse;
        if c.nx == 0 || c.ny == 0 || m.nx % c.nx != 0 || m.ny % c.ny != 0 {
            return cfg(format!("fine grid {}x{} does not conform to coarse grid {}x{}", m.nx, m.ny, c.nx, c.ny));
        }
        if c.layers.is_empty() {
            return cfg("at least one oversampling layer count is required".into());
        }
        self.material.validate().map_err(|e| Error::Config(e.to_string()))?;
        if let Some(f) = &self.fractures.file {
            if !f.is_file() {
                return cfg(format!("fracture file {} not found", f.display()));
            }
        }
        if let Some(cells) = &self.sources.cells {
            if let Some(k) = cells.iter().find(|&&k| k >= c.nx * c.ny) {
                return cfg(format!("source cell {k} outside the coarse grid"));
            }
        }
        if let Some(n) = self.output.snapshots.iter().find(|&&n| n == 0 || n > self.material.n_steps) {
            return cfg(format!("snapshot step {n} outside 1..={}", self.material.n_steps));
        }
        let g = &self.generate;
        if !(g.min_length > 0.0 && g.min_length <= g.max_length) {
            return cfg("fracture lengths need 0 < min_length <= max_length".into());
        }
        Ok(())
    }

    pub fn source_cells(&self) -> Vec<usize> {
        self.sources
            .cells
            .clone()
            .unwrap_or_else(|| default_source_cells(self.coarse.nx, self.coarse.ny))
    }
}

/// Coarse cells at 25% and 75% along the diagonal.
pub fn default_source_cells(nx: usize, ny: usize) -> Vec<usize> {
    let at = |f: usize| (f * ny / 4).min(ny - 1) * nx + (f * nx / 4).min(nx - 1);
    vec![at(1), at(3)]
}

/// Uniformly placed straight fractures: center uniform in the domain, angle
/// uniform in `[0, π)`, length uniform in `lengths`, clipped to the domain.
/// Lines are drawn in sequence, so a larger count with the same seed extends
/// a smaller set.
pub fn generate_fractures(seed: u64, count: usize, lengths: (f64, f64), domain: (f64, f64)) -> Vec<Polyline> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = domain;
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let c = [rng.random_range(0.0..w), rng.random_range(0.0..h)];
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let len = if lengths.1 > lengths.0 { rng.random_range(lengths.0..lengths.1) } else { lengths.0 };
        let d = [0.5 * len * theta.cos(), 0.5 * len * theta.sin()];
        let p = [c[0] - d[0], c[1] - d[1]];
        let q = [c[0] + d[0], c[1] + d[1]];
        if let Some((t0, t1)) = clip_segment(p, q, w, h) {
            if t1 > t0 {
                out.push(vec![lerp(p, q, t0), lerp(p, q, t1)]);
            }
        }
    }
    out
}

/// Geometry, coarse grid and the assembled fine system of one configuration.
#[derive(Debug)]
pub struct Problem {
    pub config: RunConfig,
    pub mesh: FineMesh,
    pub fractures: FractureSet,
    pub coarse: CoarseGrid,
    pub system: AssembledSystem,
}

impl Problem {
    pub fn build(config: &RunConfig) -> Result<Self> {
        config.validate()?;
        let polylines = match &config.fractures.file {
            Some(f) => io::read_fractures(f)?,
            None => Vec::new(),
        };
        Self::with_fractures(config, &polylines)
    }

    pub fn with_fractures(config: &RunConfig, polylines: &[Polyline]) -> Result<Self> {
        let m = &config.mesh;
        let mesh = FineMesh::structured(m.nx, m.ny, m.width, m.height)?;
        let fractures = embed_fractures(&mesh, polylines)?;
        for w in &fractures.warnings {
            log::warn!("{w}");
        }
        let coarse = CoarseGrid::build(&mesh, &fractures, config.coarse.nx, config.coarse.ny)?;
        let mp = &config.material;
        let sources = coarse_cell_sources(&mesh, &coarse, &config.source_cells(), mp.q)?;
        let system = assemble_system(&mesh, &fractures, mp, mp.tau(), &sources, &roller_constraints(&mesh))?;
        Ok(Self {
            config: config.clone(),
            mesh,
            fractures,
            coarse,
            system,
        })
    }

    pub fn fine_dofs(&self) -> usize {
        self.system.layout.total()
    }

    pub fn coarse_dofs(&self) -> usize {
        self.coarse.coarse_dofs()
    }

    pub fn coarse_layout(&self) -> CoarseLayout {
        CoarseLayout::of(&self.coarse)
    }

    fn averages(&self, y: &[f64]) -> Result<Vec<f64>> {
        coarse_average(&self.mesh, &self.fractures, &self.coarse, y)
    }
}

/// Fine reference trajectory. States are increments from the initial
/// equilibrium (`p = p0`, `u = 0`).
#[derive(Debug, Clone)]
pub struct FineRun {
    pub snapshots: Vec<(usize, Vec<f64>)>,
    /// Coarse-layout averages after every step.
    pub averages: Vec<Vec<f64>>,
    pub final_state: Vec<f64>,
    pub wall_time_s: f64,
}

pub fn run_fine(problem: &Problem) -> Result<FineRun> {
    let start = Instant::now();
    let stepper = Stepper::conservative(&problem.system.step, problem.system.layout.n_flow())?;
    let snaps = &problem.config.output.snapshots;
    let mut snapshots = Vec::new();
    let mut averages = Vec::new();
    let y0 = vec![0.0; problem.fine_dofs()];
    let final_state = stepper.run_with(&y0, problem.config.material.n_steps, |n, y| {
        averages.push(problem.averages(y)?);
        if snaps.contains(&n) {
            snapshots.push((n, y.to_vec()));
        }
        Ok(())
    })?;
    Ok(FineRun {
        snapshots,
        averages,
        final_state,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Bases, projection and upscaled operator for one oversampling size.
#[derive(Debug, Clone)]
pub struct CoarseModel {
    pub layers: usize,
    pub projection: ProjectionOperator,
    pub system: CoarseSystem,
    pub basis_time_s: f64,
    pub upscale_time_s: f64,
}

pub fn build_coarse_model(problem: &Problem, layers: usize) -> Result<CoarseModel> {
    let t0 = Instant::now();
    let bases = build_bases(&problem.mesh, &problem.fractures, &problem.coarse, &problem.system.blocks, layers)?;
    let projection = assemble_projection(&problem.coarse, problem.system.layout, layers, &bases)?;
    drop(bases);
    let basis_time_s = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let system = upscale(
        &problem.system,
        &projection,
        &problem.coarse,
        &problem.config.material,
        problem.config.coarse.conservative,
    )?;
    Ok(CoarseModel {
        layers,
        projection,
        system,
        basis_time_s,
        upscale_time_s: t1.elapsed().as_secs_f64(),
    })
}

#[derive(Debug, Clone)]
pub struct CoarseRun {
    /// Coarse state after every step.
    pub states: Vec<Vec<f64>>,
    pub wall_time_s: f64,
}

pub fn run_coarse(problem: &Problem, model: &CoarseModel) -> Result<CoarseRun> {
    let start = Instant::now();
    let stepper = if problem.config.coarse.conservative {
        Stepper::conservative(&model.system.step, model.system.layout.n_flow())?
    } else {
        Stepper::new(&model.system.step)?
    };
    let mut states = Vec::new();
    let y0 = vec![0.0; model.system.layout.total()];
    stepper.run_with(&y0, problem.config.material.n_steps, |_, y| {
        states.push(y.to_vec());
        Ok(())
    })?;
    Ok(CoarseRun {
        states,
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// Error metrics at every step.
pub fn compare_runs(problem: &Problem, fine: &FineRun, coarse: &CoarseRun) -> Result<Vec<ErrorMetrics>> {
    let layout = problem.coarse_layout();
    fine.averages
        .iter()
        .zip(&coarse.states)
        .map(|(f, c)| error_metrics(&layout, f, c))
        .collect()
}

/// One row of the comparison table.
#[derive(Debug, Clone)]
pub struct ComparisonRow {
    pub layers: usize,
    pub final_errors: ErrorMetrics,
    pub per_step: Vec<ErrorMetrics>,
    pub dof_f: usize,
    pub dof_c: usize,
    pub basis_time_s: f64,
    pub upscale_time_s: f64,
    pub coarse_time_s: f64,
}

pub fn compare_layers(problem: &Problem, fine: &FineRun, layers: usize) -> Result<ComparisonRow> {
    let model = build_coarse_model(problem, layers)?;
    let run = run_coarse(problem, &model)?;
    let per_step = compare_runs(problem, fine, &run)?;
    Ok(ComparisonRow {
        layers,
        final_errors: *per_step.last().expect("at least one step"),
        per_step,
        dof_f: problem.fine_dofs(),
        dof_c: problem.coarse_dofs(),
        basis_time_s: model.basis_time_s,
        upscale_time_s: model.upscale_time_s,
        coarse_time_s: run.wall_time_s,
    })
}

pub const TABLE_HEADER: &str = "s,e_p,e_ux,e_uy,DOF_f,DOF_c,wall_time_s";

/// `wall_time_s` is the coarse time-stepping time (bases excluded).
pub fn table_csv(rows: &[ComparisonRow]) -> String {
    let mut s = String::from(TABLE_HEADER);
    s.push('\n');
    for r in rows {
        let e = r.final_errors;
        let _ = writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{},{},{:.3}",
            r.layers, e.e_p, e.e_ux, e.e_uy, r.dof_f, r.dof_c, r.coarse_time_s
        );
    }
    s
}

pub fn per_step_csv(rows: &[ComparisonRow], tau: f64) -> String {
    let mut s = String::from("s,step,time_s,e_p,e_ux,e_uy\n");
    for r in rows {
        for (n, e) in r.per_step.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{:.6e},{:.6},{:.6},{:.6}",
                r.layers,
                n + 1,
                (n + 1) as f64 * tau,
                e.e_p,
                e.e_ux,
                e.e_uy
            );
        }
    }
    s
}

/// Splits a full increment state into `(p*_m, p*_f, u_x, u_y)` with
/// `p* = (p - p0)/p0`.
pub fn split_fields(problem: &Problem, y: &[f64]) -> [Vec<f64>; 4] {
    let l = problem.system.layout;
    let p0 = problem.config.material.p0;
    let scale = |r: std::ops::Range<usize>| y[r].iter().map(|v| v / p0).collect::<Vec<f64>>();
    [scale(l.p_m()), scale(l.p_f()), y[l.u_x()].to_vec(), y[l.u_y()].to_vec()]
}

pub fn write_state_vtk(problem: &Problem, y: &[f64], dir: &Path, stem: &str) -> Result<()> {
    let [pm, pf, ux, uy] = split_fields(problem, y);
    let mesh = io::mesh_vtk(&problem.mesh, &[("p_star", &pm)], &[("u_x", &ux), ("u_y", &uy)])?;
    io::write_atomic(&dir.join(format!("{stem}.vtk")), mesh.as_bytes())?;
    if problem.fractures.n_segments() > 0 {
        let frac = io::fractures_vtk(&problem.fractures, &[("p_star", &pf)])?;
        io::write_atomic(&dir.join(format!("{stem}_fractures.vtk")), frac.as_bytes())?;
    }
    Ok(())
}

fn summary(lines: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in lines {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

fn prepare(config: &RunConfig) -> Result<Problem> {
    let problem = Problem::build(config)?;
    let out = &config.output.dir;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    if config.output.dump_blocks {
        problem.system.blocks.dump(&out.join("blocks"))?;
    }
    Ok(problem)
}

/// Fine simulation with snapshots and a summary file.
pub fn cmd_fine(config: &RunConfig) -> Result<FineRun> {
    let problem = prepare(config)?;
    let out = &config.output.dir;
    let run = run_fine(&problem)?;
    if config.output.write_vtk {
        for (n, y) in &run.snapshots {
            write_state_vtk(&problem, y, out, &format!("fine_step{n:03}"))?;
        }
    }
    let l = problem.system.layout;
    let text = summary(&[
        ("cells", l.n_m.to_string()),
        ("segments", l.n_f.to_string()),
        ("vertices", l.n_v.to_string()),
        ("DOF_f", l.total().to_string()),
        ("wall_time_s", format!("{:.3}", run.wall_time_s)),
    ]);
    io::write_atomic(&out.join("fine_summary.txt"), text.as_bytes())?;
    log::info!("fine run: DOF_f = {}, {:.2} s", l.total(), run.wall_time_s);
    Ok(run)
}

/// Builds the bases for the first layer count and exports those of `cell`.
pub fn cmd_basis(config: &RunConfig, cell: usize) -> Result<CoarseModel> {
    let problem = prepare(config)?;
    if cell >= problem.coarse.n_cells() {
        return Err(Error::Config(format!("coarse cell {cell} out of range")));
    }
    let out = &config.output.dir;
    let layers = config.coarse.max_layers();
    let model = build_coarse_model(&problem, layers)?;
    let layout = model.projection.layout;
    let mut rows = vec![("matrix".to_string(), layout.matrix(cell))];
    for &c in problem.coarse.cell_continua(cell) {
        rows.push((format!("fracture{c}"), layout.fracture(c)));
    }
    rows.push(("x".into(), layout.ux(cell)));
    rows.push(("y".into(), layout.uy(cell)));
    if config.output.write_vtk {
        for (name, row) in rows {
            let mut coarse = vec![0.0; layout.total()];
            coarse[row] = 1.0;
            let fine = reconstruct(&model.projection, &coarse)?;
            // basis values are written unscaled
            let mut y = fine;
            let l = problem.system.layout;
            let p0 = config.material.p0;
            for v in &mut y[..l.n_flow()] {
                *v *= p0;
            }
            write_state_vtk(&problem, &y, out, &format!("basis_cell{cell}_{name}"))?;
        }
    }
    let text = summary(&[
        ("layers", layers.to_string()),
        ("DOF_c", problem.coarse_dofs().to_string()),
        ("continua", problem.coarse.continua().len().to_string()),
        ("R_nnz", model.projection.r.nnz().to_string()),
        ("basis_time_s", format!("{:.3}", model.basis_time_s)),
        ("upscale_time_s", format!("{:.3}", model.upscale_time_s)),
    ]);
    io::write_atomic(&out.join("basis_summary.txt"), text.as_bytes())?;
    Ok(model)
}

/// Coarse simulation for the first layer count, with reconstructed snapshots.
pub fn cmd_coarse(config: &RunConfig) -> Result<CoarseRun> {
    let problem = prepare(config)?;
    let out = &config.output.dir;
    let model = build_coarse_model(&problem, config.coarse.max_layers())?;
    let run = run_coarse(&problem, &model)?;
    if config.output.write_vtk {
        for &n in &config.output.snapshots {
            let fine = reconstruct(&model.projection, &run.states[n - 1])?;
            write_state_vtk(&problem, &fine, out, &format!("coarse_step{n:03}"))?;
        }
    }
    let text = summary(&[
        ("layers", model.layers.to_string()),
        ("DOF_f", problem.fine_dofs().to_string()),
        ("DOF_c", problem.coarse_dofs().to_string()),
        ("basis_time_s", format!("{:.3}", model.basis_time_s)),
        ("upscale_time_s", format!("{:.3}", model.upscale_time_s)),
        ("wall_time_s", format!("{:.3}", run.wall_time_s)),
    ]);
    io::write_atomic(&out.join("coarse_summary.txt"), text.as_bytes())?;
    Ok(run)
}

/// Fine reference plus one coarse model per layer count; writes
/// `errors.csv` and `errors_by_step.csv`.
pub fn cmd_compare(config: &RunConfig) -> Result<Vec<ComparisonRow>> {
    let problem = prepare(config)?;
    let out = &config.output.dir;
    let fine = run_fine(&problem)?;
    log::info!("fine reference: DOF_f = {}, {:.2} s", problem.fine_dofs(), fine.wall_time_s);
    let mut rows = Vec::new();
    for &s in &config.coarse.layers {
        let row = compare_layers(&problem, &fine, s)?;
        let e = row.final_errors;
        log::info!(
            "s = {s}: e_p = {:.4}%, e_ux = {:.4}%, e_uy = {:.4}% (bases {:.1} s, upscale {:.1} s, solve {:.2} s)",
            e.e_p,
            e.e_ux,
            e.e_uy,
            row.basis_time_s,
            row.upscale_time_s,
            row.coarse_time_s
        );
        rows.push(row);
    }
    io::write_atomic(&out.join("errors.csv"), table_csv(&rows).as_bytes())?;
    io::write_atomic(&out.join("errors_by_step.csv"), per_step_csv(&rows, config.material.tau()).as_bytes())?;
    let text = summary(&[
        ("DOF_f", problem.fine_dofs().to_string()),
        ("DOF_c", problem.coarse_dofs().to_string()),
        ("fine_wall_time_s", format!("{:.3}", fine.wall_time_s)),
    ]);
    io::write_atomic(&out.join("compare_summary.txt"), text.as_bytes())?;
    Ok(rows)
}

/// Writes a generated geometry file.
pub fn cmd_genfrac(config: &RunConfig, output: &Path) -> Result<Vec<Polyline>> {
    let g = &config.generate;
    if !(g.min_length > 0.0 && g.min_length <= g.max_length) {
        return Err(Error::Config("fracture lengths need 0 < min_length <= max_length".into()));
    }
    let lines = generate_fractures(g.seed, g.count, (g.min_length, g.max_length), (config.mesh.width, config.mesh.height));
    let header = format!(
        "{} straight fractures, seed {}, lengths [{}, {}], domain {} x {}\nx1 y1 x2 y2",
        g.count, g.seed, g.min_length, g.max_length, config.mesh.width, config.mesh.height
    );
    io::write_fractures(output, &lines, &header)?;
    Ok(lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let mut cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(RunConfig::from_toml("").unwrap(), cfg);
        cfg.fractures.file = None;
        assert!(cfg.to_toml().contains("file = \"\""));
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = RunConfig::from_toml("[mesh]\nnx = 24\n[material]\nbiot = 0.5\n").unwrap();
        assert_eq!(cfg.mesh.nx, 24);
        assert_eq!(cfg.mesh.ny, 120);
        assert_eq!(cfg.material.biot, 0.5);
        assert_eq!(cfg.material.young, 1e10);
        assert!(matches!(RunConfig::from_toml("[mesh]\nnz = 3\n"), Err(Error::Config(_))));
    }

    #[test]
    fn validation_catches_bad_inputs() {
        let mut cfg = RunConfig::default();
        cfg.fractures.file = Some(PathBuf::from("/nonexistent/fractures.txt"));
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let mut cfg = RunConfig { fractures: FractureConfig { file: None }, ..Default::default() };
        cfg.validate().unwrap();
        cfg.coarse.nx = 7;
        assert!(cfg.validate().is_err());
        let mut cfg = RunConfig { fractures: FractureConfig { file: None }, ..Default::default() };
        cfg.output.snapshots = vec![51];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn source_cells_on_the_diagonal() {
        assert_eq!(default_source_cells(20, 20), vec![5 * 20 + 5, 15 * 20 + 15]);
        assert_eq!(default_source_cells(4, 4), vec![5, 15]);
    }

    #[test]
    fn generator_is_deterministic_and_nested() {
        let a = generate_fractures(7, 30, (0.1, 0.3), (1.0, 1.0));
        let b = generate_fractures(7, 30, (0.1, 0.3), (1.0, 1.0));
        let c = generate_fractures(7, 60, (0.1, 0.3), (1.0, 1.0));
        assert_eq!(a, b);
        assert_eq!(a.len(), 30);
        assert_eq!(&c[..30], &a[..]);
        assert!(generate_fractures(7, 0, (0.1, 0.3), (1.0, 1.0)).is_empty());
        for pl in &c {
            for p in pl {
                assert!((0.0..=1.0).contains(&p[0]) && (0.0..=1.0).contains(&p[1]));
            }
            let len = ((pl[1][0] - pl[0][0]).powi(2) + (pl[1][1] - pl[0][1]).powi(2)).sqrt();
            assert!(len <= 0.3 + 1e-12);
        }
    }

    #[test]
    fn small_comparison_runs_end_to_end() {
        let mut cfg = RunConfig::default();
        cfg.mesh = MeshConfig { nx: 16, ny: 16, ..Default::default() };
        cfg.coarse = CoarseConfig { nx: 4, ny: 4, layers: vec![1, 3], conservative: true };
        cfg.material.n_steps = 5;
        cfg.output.snapshots = vec![5];
        let lines = generate_fractures(3, 4, (0.2, 0.4), (1.0, 1.0));
        let problem = Problem::with_fractures(&cfg, &lines).unwrap();
        let fine = run_fine(&problem).unwrap();
        assert_eq!(fine.averages.len(), 5);
        let row = compare_layers(&problem, &fine, 3).unwrap();
        assert_eq!(row.dof_c, problem.coarse.coarse_dofs());
        assert!(row.final_errors.e_p.is_finite());
        let csv = table_csv(&[row]);
        assert!(csv.starts_with(TABLE_HEADER));
        assert_eq!(csv.lines().count(), 2);
    }
}
