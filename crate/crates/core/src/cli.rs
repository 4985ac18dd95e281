//! Experiment harness behind the `coarse-roe` binary: configuration,
//! seeded generators, the five pipeline commands and their report files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{greedy_decompose, verify_exotic_cartan};
use crate::band_ops::Operator;
use crate::coarse_space::{metric_entourage, CoarseGenerators, Entourage, EntourageJson, FiniteSpace};
use crate::error::{Error, Result};
use crate::linalg::C64;
use crate::matching::{hall_matching, BipartiteGraph, HallOutcome};
use crate::reconstruction::{reconstruct_structure, roundtrip_check, CartanData, ReconstructionReport};
use crate::rigidity::{
    default_scales, onl_witness, recover_bijection, uniform_band_profile, RecoveryOptions, SubsetFamily,
};

/// Identifier of the random stream, recorded in every report.
pub const RNG_NAME: &str = "chacha8";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    Interval { size: usize },
    Cycle { size: usize },
    Grid { width: usize, height: usize },
    Squares { size: usize },
    Union { parts: Vec<SpaceSpec>, gap: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UnitaryPlan {
    /// Bound on `d(x, σ(x))` for the planted permutation.
    pub displacement: f64,
    /// Largest distance between the two coordinates of a plane rotation.
    pub rotation_radius: f64,
    /// Rotation angles are uniform in `[-angle, angle]`.
    pub rotation_angle: f64,
    /// Number of rotation factors; `None` means one per point.
    pub rotations: Option<usize>,
    /// Multiply by a diagonal of uniformly random phases.
    pub phases: bool,
}

impl Default for UnitaryPlan {
    fn default() -> Self {
        UnitaryPlan {
            displacement: 0.0,
            rotation_radius: 0.0,
            rotation_angle: 0.0,
            rotations: None,
            phases: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigiditySettings {
    /// δ grid; empty means `2^-1 ... 2^-20`.
    pub grid: Vec<f64>,
    /// Profile scales; empty means `0` and doubling steps up to the diameter.
    pub s_values: Vec<f64>,
    /// Random subsets added to the band-profile family.
    pub family_random: usize,
    /// Tolerances at which `s(ε)` is reported.
    pub eps: Vec<f64>,
    pub onl_eps: f64,
    /// Propagation of the band operator probed for a norming vector.
    pub onl_scale: f64,
}

impl Default for RigiditySettings {
    fn default() -> Self {
        RigiditySettings {
            grid: Vec::new(),
            s_values: Vec::new(),
            family_random: 8,
            eps: vec![0.1, 0.01, 0.001],
            onl_eps: 0.1,
            onl_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub space: SpaceSpec,
    #[serde(default)]
    pub unitary: UnitaryPlan,
    #[serde(default)]
    pub rigidity: RigiditySettings,
    /// Blocks of the exotic frame for `verify-cartan`.
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    /// Generator radii for `reconstruct`; the first is used by `decompose`.
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    /// JSON `{"pairs": [[x, y], ...]}` replacing the metric entourages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entourage_path: Option<PathBuf>,
    /// JSON operator replacing the generated unitary.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator_path: Option<PathBuf>,
}

fn default_blocks() -> usize {
    4
}

fn default_radii() -> Vec<f64> {
    vec![1.0]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

pub fn generate_space(spec: &SpaceSpec) -> Result<FiniteSpace> {
    let need = |size: usize| {
        if size == 0 {
            Err(Error::Argument("space size must be at least 1".into()))
        } else {
            Ok(size)
        }
    };
    match spec {
        SpaceSpec::Interval { size } => FiniteSpace::interval(need(*size)?),
        SpaceSpec::Cycle { size } => FiniteSpace::cycle(need(*size)?),
        SpaceSpec::Grid { width, height } => FiniteSpace::grid(need(*width)?, need(*height)?),
        SpaceSpec::Squares { size } => FiniteSpace::squares(need(*size)?),
        SpaceSpec::Union { parts, gap } => {
            if parts.is_empty() {
                return Err(Error::Argument("union needs at least one part".into()));
            }
            let parts = parts.iter().map(generate_space).collect::<Result<Vec<_>>>()?;
            FiniteSpace::union(&parts, *gap)
        }
    }
}

/// A permutation with `d(x, σ(x)) <= bound`: candidates are ranked by a
/// random relabelling of both sides and a perfect matching of the
/// displacement graph is found in that order.
pub fn sample_permutation(space: &FiniteSpace, bound: f64, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    if !(bound >= 0.0) {
        return Err(Error::Argument(format!("displacement bound {bound} must be nonnegative")));
    }
    let n = space.len();
    let mut left: Vec<usize> = (0..n).collect();
    let mut right: Vec<usize> = (0..n).collect();
    left.shuffle(rng);
    right.shuffle(rng);
    let mut right_inv = vec![0; n];
    for (label, &y) in right.iter().enumerate() {
        right_inv[y] = label;
    }
    let edges = (0..n).flat_map(|i| {
        let x = left[i];
        space.ball(x, bound).into_iter().map(move |y| (i, y))
    });
    let graph = BipartiteGraph::new(n, n, edges.map(|(i, y)| (i, right_inv[y])).collect::<Vec<_>>())?;
    match hall_matching(&graph) {
        HallOutcome::Matched(m) => {
            let labels = m.to_map().expect("saturating");
            let mut sigma = vec![0; n];
            for (i, label) in labels.into_iter().enumerate() {
                sigma[left[i]] = right[label];
            }
            Ok(sigma)
        }
        HallOutcome::Deficient(d) => Err(Error::Infeasible(format!(
            "no permutation within displacement {bound}: {} points reach only {}",
            d.set.len(),
            d.neighborhood.len()
        ))),
    }
}

/// `v = P_σ · R_1 ⋯ R_k · diag(phases)` with `(P_σ)_{x,σ(x)} = 1`, so that the
/// recovered bijection of `v` is `σ` when the rotations are small.
pub fn generate_unitary(plan: &UnitaryPlan, space: &Arc<FiniteSpace>, seed: u64) -> Result<(Operator, Vec<usize>)> {
    if !(plan.rotation_angle >= 0.0) || !(plan.rotation_radius >= 0.0) {
        return Err(Error::Argument("rotation radius and angle must be nonnegative".into()));
    }
    let n = space.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = sample_permutation(space, plan.displacement, &mut rng)?;

    let mut g = DMatrix::<C64>::identity(n, n);
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| space.d(i, j) <= plan.rotation_radius)
        .collect();
    let count = plan.rotations.unwrap_or(n);
    if !pairs.is_empty() && plan.rotation_angle > 0.0 {
        for _ in 0..count {
            let (i, j) = pairs[rng.random_range(0..pairs.len())];
            let theta = rng.random_range(-plan.rotation_angle..=plan.rotation_angle);
            let (s, c) = theta.sin_cos();
            for r in 0..n {
                let (a, b) = (g[(r, i)], g[(r, j)]);
                g[(r, i)] = a * c + b * s;
                g[(r, j)] = b * c - a * s;
            }
        }
    }
    let phases: Vec<C64> = (0..n)
        .map(|_| {
            if plan.phases {
                C64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))
            } else {
                C64::new(1.0, 0.0)
            }
        })
        .collect();
    let v = DMatrix::from_fn(n, n, |x, y| g[(sigma[x], y)] * phases[y]);
    let v = Operator::square(space, v)?;
    v.require_unitary(1e-10)?;
    Ok((v, sigma))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    VerifyCartan,
    Reconstruct,
    Decompose,
    Recover,
    Profile,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::VerifyCartan => "verify-cartan",
            Command::Reconstruct => "reconstruct",
            Command::Decompose => "decompose",
            Command::Recover => "recover",
            Command::Profile => "profile",
        }
    }
}

/// Whether the command produced its object or a meaningful negative result.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Success,
    Negative,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Negative => 2,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Status::Success => "ok",
            Status::Negative => "negative",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub status: Status,
    pub files: Vec<PathBuf>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    command: &'static str,
    status: &'static str,
    rng: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
    result: T,
}

/// Writes through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::Argument(format!("{} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(contents)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

struct Writer<'a> {
    out: &'a Path,
    command: Command,
    config: &'a ExperimentConfig,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn report<T: Serialize>(&mut self, status: Status, result: T) -> Result<()> {
        let envelope = Envelope {
            command: self.command.name(),
            status: status.label(),
            rng: RNG_NAME,
            seed: self.config.seed,
            config: self.config,
            result,
        };
        let mut text = serde_json::to_string_pretty(&envelope)?;
        text.push('\n');
        self.file("report.json", text.as_bytes())
    }

    fn csv(&mut self, name: &str, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
        let mut text = String::from(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        self.file(name, text.as_bytes())
    }

    fn file(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.out.join(name);
        write_atomic(&path, contents)?;
        self.files.push(path);
        Ok(())
    }
}

fn load_entourages(config: &ExperimentConfig, space: &FiniteSpace) -> Result<Vec<Entourage>> {
    match &config.entourage_path {
        Some(path) => {
            let raw: EntourageJson = serde_json::from_str(&fs::read_to_string(path)?)?;
            Ok(vec![raw.into_entourage(space.len())?])
        }
        None => {
            if config.radii.is_empty() {
                return Err(Error::Argument("no generator radii given".into()));
            }
            config.radii.iter().map(|&r| metric_entourage(space, r)).collect()
        }
    }
}

/// The operator under study and, when generated, the planted permutation.
fn load_unitary(config: &ExperimentConfig) -> Result<(Operator, Option<Vec<usize>>)> {
    match &config.operator_path {
        Some(path) => {
            let op: Operator = serde_json::from_str(&fs::read_to_string(path)?)?;
            Ok((op, None))
        }
        None => {
            let space = Arc::new(generate_space(&config.space)?);
            let (v, sigma) = generate_unitary(&config.unitary, &space, config.seed)?;
            Ok((v, Some(sigma)))
        }
    }
}

#[derive(Serialize)]
struct DecomposeResult {
    slice_bound: usize,
    count: usize,
    parts: Vec<Entourage>,
}

#[derive(Serialize)]
struct FailureResult {
    reason: String,
}

#[derive(Serialize)]
struct RecoverResult<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    planted: Option<&'a [usize]>,
    #[serde(flatten)]
    report: &'a crate::rigidity::RecoveryReport,
}

#[derive(Serialize)]
struct ProfileResult {
    band: crate::rigidity::BandProfile,
    onl: Option<crate::rigidity::OnlWitness>,
}

/// Runs `command` and writes `report.json` (plus a CSV table where the
/// command has one) into `out`.
pub fn run(command: Command, config: &ExperimentConfig, out: &Path) -> Result<Outcome> {
    fs::create_dir_all(out)?;
    let mut w = Writer {
        out,
        command,
        config,
        files: Vec::new(),
    };
    let status = match command {
        Command::VerifyCartan => {
            let report = verify_exotic_cartan(config.blocks)?;
            let status = if report.all_ok() { Status::Success } else { Status::Negative };
            w.report(status, report)?;
            status
        }
        Command::Reconstruct => {
            let space = Arc::new(generate_space(&config.space)?);
            let gens = CoarseGenerators::new(space.clone(), load_entourages(config, &space)?)?;
            let roundtrip = roundtrip_check(&space, &gens)?;
            let data = CartanData::new(
                crate::algebra::MasaFrame::standard(&space),
                crate::reconstruction::canonical_normalizers(&gens)?,
                vec![crate::reconstruction::ROUNDTRIP_EPS],
            )?;
            let rebuilt = reconstruct_structure(&data)?;
            let status = if roundtrip { Status::Success } else { Status::Negative };
            w.report(
                status,
                ReconstructionReport {
                    generators: rebuilt.generators().to_vec(),
                    roundtrip,
                },
            )?;
            status
        }
        Command::Decompose => {
            let space = generate_space(&config.space)?;
            let e = load_entourages(config, &space)?.swap_remove(0);
            let parts = greedy_decompose(&e);
            let rows: Vec<String> = parts
                .iter()
                .enumerate()
                .flat_map(|(i, p)| p.pairs().iter().map(move |&(x, y)| format!("{i},{x},{y}")))
                .collect();
            w.report(
                Status::Success,
                DecomposeResult {
                    slice_bound: e.slice_bound(),
                    count: parts.len(),
                    parts,
                },
            )?;
            w.csv("parts.csv", "part,x,y", rows)?;
            Status::Success
        }
        Command::Recover => {
            let (v, planted) = load_unitary(config)?;
            let options = RecoveryOptions {
                grid: config.rigidity.grid.clone(),
                s_values: config.rigidity.s_values.clone(),
                planted: planted.clone(),
            };
            let (x, y) = (v.codomain().clone(), v.domain().clone());
            match recover_bijection(&v, &x, &y, &options) {
                Ok(rec) => {
                    let rows: Vec<String> = rec
                        .report
                        .ql
                        .0
                        .iter()
                        .map(|(s, [lo, up])| format!("{s},{up},{lo},{up}"))
                        .collect();
                    w.report(
                        Status::Success,
                        RecoverResult {
                            planted: planted.as_deref(),
                            report: &rec.report,
                        },
                    )?;
                    w.csv("profile.csv", "s,band_error,ql_lower,ql_upper", rows)?;
                    Status::Success
                }
                Err(Error::Infeasible(reason)) => {
                    w.report(Status::Negative, FailureResult { reason })?;
                    Status::Negative
                }
                Err(e) => return Err(e),
            }
        }
        Command::Profile => {
            let (v, _) = load_unitary(config)?;
            let s_values = if config.rigidity.s_values.is_empty() {
                default_scales(v.codomain())
            } else {
                config.rigidity.s_values.clone()
            };
            let family = SubsetFamily::standard(v.ncols(), config.rigidity.family_random, config.seed);
            let band = uniform_band_profile(&v, &s_values, &family, &config.rigidity.eps)?;
            let banded = if v.codomain().same_as(v.domain()) {
                Some(v.band_truncate(config.rigidity.onl_scale)?)
            } else {
                None
            };
            let onl = match banded {
                Some(a) if a.max_abs() > 0.0 => Some(onl_witness(&a, config.rigidity.onl_eps)?),
                _ => None,
            };
            let rows: Vec<String> = band.estimate.0.iter().map(|(s, e)| format!("{s},{e}")).collect();
            w.report(Status::Success, ProfileResult { band, onl })?;
            w.csv("profile.csv", "s,estimate", rows)?;
            Status::Success
        }
    };
    Ok(Outcome { status, files: w.files })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn space_examples() {
        let z5 = generate_space(&SpaceSpec::Interval { size: 5 }).unwrap();
        assert!(z5.same_as(&FiniteSpace::interval(5).unwrap()));
        let sq = generate_space(&SpaceSpec::Squares { size: 4 }).unwrap();
        assert_eq!(sq.labels().unwrap(), ["1", "4", "9", "16"]);
        assert_eq!(sq.d(0, 3), 15.0);
        let u = generate_space(&SpaceSpec::Union {
            parts: vec![SpaceSpec::Interval { size: 2 }, SpaceSpec::Interval { size: 2 }],
            gap: 10.0,
        })
        .unwrap();
        assert_eq!((u.d(0, 1), u.d(1, 2), u.d(0, 3)), (1.0, 10.0, 10.0));
        assert!(generate_space(&SpaceSpec::Cycle { size: 0 }).is_err());
    }

    #[test]
    fn config_parses_with_defaults() {
        let c = ExperimentConfig::from_json(r#"{"seed": 3, "space": {"kind": "cycle", "size": 6}}"#).unwrap();
        assert_eq!(c.blocks, 4);
        assert_eq!(c.radii, vec![1.0]);
        assert_eq!(c.unitary, UnitaryPlan::default());
        assert!(ExperimentConfig::from_json(r#"{"seed": 3, "space": {"kind": "cycle", "size": 6}, "extra": 1}"#).is_err());
    }

    #[test]
    fn unitary_examples() {
        let space = Arc::new(FiniteSpace::interval(12).unwrap());
        let plan = UnitaryPlan {
            displacement: 2.0,
            ..Default::default()
        };
        let (v, sigma) = generate_unitary(&plan, &space, 11).unwrap();
        for x in 0..12 {
            assert!(space.d(x, sigma[x]) <= 2.0);
            for y in 0..12 {
                let expected = if y == sigma[x] { 1.0 } else { 0.0 };
                assert_eq!(v.entry(x, y), C64::new(expected, 0.0));
            }
        }

        let plan = UnitaryPlan {
            displacement: 3.0,
            rotation_radius: 2.0,
            rotation_angle: 0.0,
            phases: true,
            ..Default::default()
        };
        let (v, _) = generate_unitary(&plan, &space, 5).unwrap();
        assert!(v.entries().iter().all(|z| z.norm() == 0.0 || (z.norm() - 1.0).abs() < 1e-15));

        let plan = UnitaryPlan {
            displacement: 1.0,
            rotation_radius: 2.0,
            rotation_angle: 0.2,
            phases: true,
            rotations: Some(30),
        };
        let (a, sa) = generate_unitary(&plan, &space, 9).unwrap();
        let (b, sb) = generate_unitary(&plan, &space, 9).unwrap();
        assert_eq!(sa, sb);
        assert_eq!(a.max_diff(&b), 0.0);
        assert!(a.unitarity_defect() < 1e-12);
    }

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = std::env::temp_dir().join(format!("coarse-roe-write-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("x.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read(&path).unwrap(), b"two");
        assert!(!dir.join(".x.json.tmp").exists());
        fs::remove_dir_all(&dir).unwrap();
    }
}
