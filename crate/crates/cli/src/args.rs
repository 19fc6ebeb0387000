use std::net::SocketAddr;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Part-constrained grasp planning: detect an object, segment the named part, pick a
/// grasp on that part.
#[derive(Debug, Parser)]
#[command(name = "partgrasp", version)]
pub struct Cli {
    /// Worker threads for rendering and evaluation [default: logical cores].
    #[arg(long, global = true)]
    pub jobs: Option<usize>,

    /// Run everything but write no files; print what would be written.
    #[arg(long, global = true)]
    pub dry_run: bool,

    /// Pipeline config file (TOML). PARTGRASP_* variables and flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Backends {
    /// Ground-truth detector and segmenter, analytic grasp generator.
    Oracle,
    /// HTTP stage servers named in the config's [endpoints].
    Remote,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Plan a grasp for an (object, part) prompt on stored RGB-D inputs.
    Grasp(GraspArgs),
    /// Run a seeded campaign of simulated trials and write the trial report.
    Simulate(SimulateArgs),
    /// Score detector + segmenter masks against a labelled manifest.
    EvalSeg(EvalSegArgs),
    /// Aggregate a trial log CSV into outcome percentages and Sankey graphs.
    TrialsReport(TrialsReportArgs),
    /// Render seeded scenes into a labelled dataset directory.
    GenScenes(GenScenesArgs),
    /// Serve oracle stages over HTTP until interrupted.
    ServeMock(ServeMockArgs),
}

#[derive(Debug, Args)]
pub struct GraspArgs {
    #[arg(long)]
    pub rgb: PathBuf,
    /// 16-bit PNG, millimeters.
    #[arg(long)]
    pub depth: PathBuf,
    #[arg(long)]
    pub intrinsics: PathBuf,
    #[arg(long)]
    pub object: String,
    #[arg(long)]
    pub part: String,
    #[arg(long, value_enum)]
    pub backends: Option<Backends>,
    /// Scene file holding the ground truth oracle backends need; also supplies the camera pose.
    #[arg(long)]
    pub scene: Option<PathBuf>,
    /// Plan document (JSON). The part mask goes next to it as `<stem>_mask.png`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scenes: usize,
    #[arg(long, default_value_t = 1)]
    pub objects: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// e.g. `wrong_object:0.1; mask_shift(0,-120)`.
    #[arg(long, default_value = "")]
    pub faults: String,
    /// Distractors share the target part name.
    #[arg(long)]
    pub shared_part: bool,
    /// Every distractor's copy of the target part faces the camera unoccluded.
    #[arg(long)]
    pub all_parts_visible: bool,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalSegArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "oracle")]
    pub backends: Backends,
    /// Score every sample under the six flip/rotation variants.
    #[arg(long)]
    pub augment: bool,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrialsReportArgs {
    #[arg(long)]
    pub log: PathBuf,
    #[arg(long)]
    pub report: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenScenesArgs {
    #[arg(long)]
    pub scenes: usize,
    #[arg(long, default_value_t = 1)]
    pub objects: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeMockArgs {
    #[arg(long, default_value = "127.0.0.1:8700")]
    pub listen: SocketAddr,
    /// Scene files to serve ground truth for.
    #[arg(long = "scene")]
    pub scenes: Vec<PathBuf>,
    /// Directory whose `*.toml` scene files are all served (e.g. a gen-scenes `scenes/`).
    #[arg(long)]
    pub scenes_dir: Option<PathBuf>,
    /// Stall before every stage reply.
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,
}
