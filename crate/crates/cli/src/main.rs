//! `gdlab`: batch front-end for sampling, GD computation and iteration.

mod cache;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Map, Value};

use gdlab::acceptance::{run_criterion, CRITERIA, SLOW};
use gdlab::conealg::{
    carried_planes, cone_dim, decompose_by_local_dimension, finite_plane_union_test, split_b0_bplus, split_by_planes,
    SPLIT_MIN_PLANES,
};
use gdlab::dircone::{direction_set_origin, gd_origin, sample_bundle, TangentSource};
use gdlab::gditer::{iterate_to_stabilization, GdConfig};
use gdlab::oracle::oracle_table;
use gdlab::report::{canonical_json, envelope, stabilization_value, to_value};
use gdlab::sampler::PointCloud;
use gdlab::setdesc::{catalog_names, parse_set_description, SetDescription};
use gdlab::sphere::DirectionSet;
use gdlab::{GdError, Result};

use cache::{load_or_sample, write_atomic};

const EXIT_USAGE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_STARVATION: u8 = 3;
const EXIT_ACCEPTANCE: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "gdlab", version, about = "Direction sets and geometric directional bundles of germs at the origin")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a multiscale cloud and store it in the cache.
    Sample(Common),
    /// Compute GD(A) at the origin; writes gd.net.
    Gd(Common),
    /// Iterate GD until the chain stabilizes.
    Iterate {
        #[command(flatten)]
        common: Common,
        /// Last degree computed (default n + 1).
        #[arg(long)]
        max_degree: Option<usize>,
    },
    /// Partition the cloud by local dimension.
    Decompose(Common),
    /// Test whether a direction set lies in finitely many m-planes.
    Planes {
        #[command(flatten)]
        common: Common,
        /// Plane dimension.
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 16)]
        max_planes: usize,
        /// Angular tolerance in degrees (default theta_net).
        #[arg(long)]
        tol: Option<f64>,
        /// Directions tested: GD(A) or the secant directions D(A).
        #[arg(long, value_enum, default_value_t = Source::Gd)]
        of: Source,
    },
    /// Split GD(A) of a union of k-planes into B0 and B+; writes b0.net and bplus.net.
    Split {
        #[command(flatten)]
        common: Common,
        /// Plane dimension (default m0 of the decomposition).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, value_enum, default_value_t = SplitMethod::Planes)]
        method: SplitMethod,
        /// Reach beyond the nearest plane in degrees (default theta_net / 2).
        #[arg(long)]
        tol: Option<f64>,
        /// Planes closer than this many degrees count once (default theta_net / 16).
        #[arg(long)]
        sep: Option<f64>,
    },
    /// Run the acceptance criteria; exit 4 on any failure.
    Verify {
        /// `core` skips the slow criteria, `full` runs all of them.
        #[arg(long, value_enum, default_value_t = Suite::Core)]
        suite: Suite,
        #[arg(long)]
        seed: u64,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export CSV files of the cloud, secant directions, GD(A) and the bundle sample.
    Plotdata {
        #[command(flatten)]
        common: Common,
    },
    /// Print the oracle table and catalog names.
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Source {
    Gd,
    Secants,
}

#[derive(Clone, Copy, ValueEnum)]
enum SplitMethod {
    /// Count the carried tangent planes through each direction.
    Planes,
    /// Local dimension of the direction set.
    Dims,
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Core,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tangents {
    Auto,
    Analytic,
    Estimated,
}

#[derive(Args)]
struct Common {
    /// Set description, inline or the path of a file holding one.
    #[arg(long)]
    set: String,
    #[arg(long)]
    seed: u64,
    /// Output directory for report and data files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Neither read nor write the cloud cache.
    #[arg(long)]
    no_cache: bool,
    /// Include wall-clock timings in the report.
    #[arg(long)]
    timings: bool,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Args)]
struct Overrides {
    /// Outer radius of the coarsest band.
    #[arg(long)]
    r0: Option<f64>,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    per_band: Option<usize>,
    /// Net resolution in degrees; theta_lim and theta_eq follow unless given.
    #[arg(long)]
    theta_net: Option<f64>,
    #[arg(long)]
    theta_lim: Option<f64>,
    #[arg(long)]
    theta_eq: Option<f64>,
    /// Neighbor radius as a fraction of the basepoint norm.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    limit_bands: Option<usize>,
    #[arg(long)]
    max_basepoints: Option<usize>,
    #[arg(long)]
    candidates_per_band: Option<usize>,
    #[arg(long)]
    k_neighbors: Option<usize>,
    #[arg(long)]
    pca_gap: Option<f64>,
    #[arg(long, value_enum)]
    tangents: Option<Tangents>,
}

impl Overrides {
    fn apply(&self, n: usize) -> Result<GdConfig> {
        let mut c = GdConfig::default_for(n);
        let s = &mut c.schedule;
        s.r0 = self.r0.unwrap_or(s.r0);
        s.band_count = self.bands.unwrap_or(s.band_count);
        s.per_band = self.per_band.unwrap_or(s.per_band);
        let d = &mut c.dir;
        if let Some(t) = self.theta_net {
            d.theta_net = t;
            d.theta_lim = 2.0 * t;
        }
        d.theta_lim = self.theta_lim.unwrap_or(d.theta_lim);
        c.theta_eq = self.theta_eq.unwrap_or(2.0 * d.theta_lim);
        d.rho = self.rho.unwrap_or(d.rho);
        d.max_basepoints = self.max_basepoints.unwrap_or(d.max_basepoints);
        d.candidates_per_band = self.candidates_per_band.unwrap_or(d.candidates_per_band);
        if let Some(b) = self.limit_bands {
            d.limit_bands = b;
            c.dim.limit_bands = b;
        }
        c.dim.k_neighbors = self.k_neighbors.unwrap_or(c.dim.k_neighbors);
        if let Some(g) = self.pca_gap {
            d.pca_gap = g;
            c.dim.pca_gap = g;
        }
        if let Some(t) = self.tangents {
            let t = match t {
                Tangents::Auto => TangentSource::Auto,
                Tangents::Analytic => TangentSource::Analytic,
                Tangents::Estimated => TangentSource::Estimated,
            };
            d.tangent_source = t;
            c.dim.tangent_source = t;
        }
        c.validate(n)?;
        Ok(c)
    }
}

/// Everything a subcommand needs from the common flags.
struct Run {
    desc: SetDescription,
    input: String,
    config: GdConfig,
    seed: u64,
    out: Option<PathBuf>,
    use_cache: bool,
    timings: bool,
    clock: Vec<(String, f64)>,
}

impl Run {
    fn new(c: &Common) -> Result<Run> {
        let text = if Path::new(&c.set).is_file() { std::fs::read_to_string(&c.set)? } else { c.set.clone() };
        let desc = parse_set_description(&text)?;
        let config = c.overrides.apply(desc.ambient_dim)?;
        Ok(Run {
            input: desc.to_string(),
            desc,
            config,
            seed: c.seed,
            out: c.out.clone(),
            use_cache: !c.no_cache,
            timings: c.timings,
            clock: Vec::new(),
        })
    }

    fn n(&self) -> usize {
        self.desc.ambient_dim
    }

    fn timed<T>(&mut self, label: &str, f: impl FnOnce(&Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let v = f(self)?;
        self.clock.push((label.into(), start.elapsed().as_secs_f64() * 1e3));
        Ok(v)
    }

    /// Cloud of the input; `None` for the point germ.
    fn cloud(&mut self) -> Result<Option<PointCloud>> {
        if self.desc.is_point_germ() {
            return Ok(None);
        }
        let (cloud, hit) = self.timed("sample", |r| load_or_sample(&r.desc, &r.config.schedule, r.seed, r.use_cache))?;
        if hit {
            self.clock.last_mut().expect("just pushed").0 = "sample (cached)".into();
        }
        Ok(Some(cloud))
    }

    fn gd(&mut self, cloud: Option<&PointCloud>) -> Result<DirectionSet> {
        match cloud {
            None => Ok(DirectionSet::empty(self.n(), self.config.dir.theta_net)),
            Some(c) => self.timed("gd", |r| gd_origin(c, &r.config.dir)),
        }
    }

    fn header(&self, command: &str) -> Result<Map<String, Value>> {
        let mut m = envelope(command, &self.input, self.n(), self.seed);
        m.insert("params".into(), to_value(&self.config)?);
        Ok(m)
    }

    fn finish(&self, name: &str, mut m: Map<String, Value>) -> Result<()> {
        let t = if self.timings {
            Value::Object(self.clock.iter().map(|(k, v)| (k.clone(), json!(v))).collect())
        } else {
            Value::Null
        };
        m.insert("timings_ms".into(), t);
        emit(self.out.as_deref(), name, &Value::Object(m))
    }

    fn write_net(&self, name: &str, d: &DirectionSet) -> Result<()> {
        match &self.out {
            Some(dir) => write_atomic(&dir.join(name), |w| d.write_net(w)),
            None => Ok(()),
        }
    }
}

/// Prints the report and stores it under `out` when given.
fn emit(out: Option<&Path>, name: &str, v: &Value) -> Result<()> {
    let text = canonical_json(v);
    if let Some(dir) = out {
        write_atomic(&dir.join(name), |w| Ok(std::io::Write::write_all(w, text.as_bytes())?))?;
    }
    print!("{text}");
    Ok(())
}

fn net_summary(d: &DirectionSet, config: &GdConfig) -> Value {
    json!({
        "net_size": d.len(),
        "theta_net": d.theta_net(),
        "cone_dim": cone_dim(d, &config.dim),
    })
}

fn cmd_sample(c: &Common) -> Result<()> {
    let mut run = Run::new(c)?;
    let cloud = run.cloud()?;
    let mut m = run.header("sample")?;
    let bands: Vec<Value> = cloud
        .iter()
        .flat_map(|cl| cl.bands.iter())
        .map(|b| json!({"scale": b.scale, "points": b.points.len()}))
        .collect();
    m.insert("points".into(), json!(cloud.as_ref().map_or(0, |cl| cl.len())));
    m.insert("bands".into(), Value::Array(bands));
    m.insert("tangents".into(), json!(cloud.as_ref().is_some_and(|cl| cl.has_tangents())));
    if let (Some(dir), Some(cl)) = (&run.out, &cloud) {
        write_atomic(&dir.join("cloud.gdcl"), |w| cl.write_cache(w))?;
    }
    run.finish("sample.json", m)
}

fn cmd_gd(c: &Common) -> Result<()> {
    let mut run = Run::new(c)?;
    let cloud = run.cloud()?;
    let d = run.gd(cloud.as_ref())?;
    run.write_net("gd.net", &d)?;
    let mut m = run.header("gd")?;
    m.insert("gd".into(), net_summary(&d, &run.config));
    run.finish("gd.json", m)
}

fn cmd_iterate(c: &Common, max_degree: Option<usize>) -> Result<()> {
    let run = Run::new(c)?;
    let max_degree = max_degree.unwrap_or(run.n() + 1);
    let report = iterate_to_stabilization(&run.desc, max_degree, &run.config, run.seed)?;
    if let Some(dir) = &run.out {
        for (m, cone) in report.cones.iter().enumerate() {
            write_atomic(&dir.join(format!("c{m}.net")), |w| cone.base.write_net(w))?;
        }
    }
    let v = stabilization_value(&report, &run.input, run.timings)?;
    emit(run.out.as_deref(), "report.json", &v)
}

fn cmd_decompose(c: &Common) -> Result<()> {
    let mut run = Run::new(c)?;
    let cloud = run.cloud()?;
    let mut m = run.header("decompose")?;
    match cloud {
        None => {
            m.insert("classes".into(), json!({}));
            m.insert("lambda0".into(), json!([]));
            m.insert("m0".into(), json!(0));
            m.insert("undetermined".into(), json!(0));
        }
        Some(cl) => {
            let dec = run.timed("decompose", |r| decompose_by_local_dimension(&cl, &r.config.dim))?;
            let classes: Map<String, Value> =
                dec.classes.iter().map(|(k, sub)| (k.to_string(), json!(sub.len()))).collect();
            m.insert("classes".into(), Value::Object(classes));
            m.insert("lambda0".into(), json!(dec.lambda0));
            m.insert("m0".into(), json!(dec.m0));
            m.insert("undetermined".into(), json!(dec.undetermined));
        }
    }
    run.finish("decompose.json", m)
}

fn cmd_planes(c: &Common, m_dim: usize, max_planes: usize, tol: Option<f64>, of: Source) -> Result<()> {
    let mut run = Run::new(c)?;
    let cloud = run.cloud()?;
    let d = match (of, cloud.as_ref()) {
        (Source::Gd, cl) => run.gd(cl)?,
        (Source::Secants, None) => DirectionSet::empty(run.n(), run.config.dir.theta_net),
        (Source::Secants, Some(cl)) => run.timed("secants", |r| direction_set_origin(cl, &r.config.dir))?,
    };
    let tol = tol.unwrap_or(run.config.dir.theta_net);
    let decision = run.timed("planes", |r| finite_plane_union_test(&d, m_dim, max_planes, tol, r.seed))?;
    let mut m = run.header("planes")?;
    m.insert("source".into(), json!(if matches!(of, Source::Gd) { "gd" } else { "secants" }));
    m.insert("angular_tol".into(), json!(tol));
    m.insert("directions".into(), json!(d.len()));
    m.insert("decision".into(), to_value(&decision)?);
    run.finish("planes.json", m)
}

fn cmd_split(c: &Common, k: Option<usize>, method: SplitMethod, tol: Option<f64>, sep: Option<f64>) -> Result<()> {
    let mut run = Run::new(c)?;
    let cloud = run.cloud()?;
    let d = run.gd(cloud.as_ref())?;
    let k = match (k, cloud.as_ref()) {
        (Some(k), _) => k,
        (None, Some(cl)) => run.timed("decompose", |r| decompose_by_local_dimension(cl, &r.config.dim))?.m0,
        (None, None) => 0,
    };
    if cloud.is_some() && (k == 0 || k >= run.n()) {
        return Err(GdError::InvalidParameter(format!("plane dimension {k} must lie in 1..{}", run.n())));
    }
    let theta = run.config.dir.theta_net;
    let (tol, sep) = (tol.unwrap_or(theta / 2.0), sep.unwrap_or(theta / 16.0));
    let (b0, bplus) = match (method, cloud.as_ref()) {
        (_, None) => (d.clone(), d.clone()),
        (SplitMethod::Planes, Some(cl)) => run.timed("split", |r| {
            let planes = carried_planes(cl, k, r.config.dir.limit_bands);
            Ok(split_by_planes(&d, &planes, k, tol, sep, SPLIT_MIN_PLANES))
        })?,
        (SplitMethod::Dims, Some(_)) => run.timed("split", |r| Ok(split_b0_bplus(&d, k, &r.config.dim)))?,
    };
    run.write_net("b0.net", &b0)?;
    run.write_net("bplus.net", &bplus)?;
    let mut m = run.header("split")?;
    m.insert("k".into(), json!(k));
    m.insert("method".into(), json!(if matches!(method, SplitMethod::Planes) { "planes" } else { "dims" }));
    if matches!(method, SplitMethod::Planes) {
        m.insert("tol".into(), json!(tol));
        m.insert("sep".into(), json!(sep));
    }
    m.insert("gd".into(), net_summary(&d, &run.config));
    m.insert("b0".into(), net_summary(&b0, &run.config));
    m.insert("bplus".into(), net_summary(&bplus, &run.config));
    run.finish("split.json", m)
}

fn cmd_plotdata(c: &Common) -> Result<()> {
    let mut run = Run::new(c)?;
    let Some(dir) = run.out.clone() else {
        return Err(GdError::InvalidParameter("plotdata needs --out".into()));
    };
    let cloud = run.cloud()?;
    let mut files = vec!["gd.csv"];
    let d = run.gd(cloud.as_ref())?;
    write_atomic(&dir.join("gd.csv"), |w| d.write_csv(w))?;
    if let Some(cl) = &cloud {
        write_atomic(&dir.join("cloud.csv"), |w| cl.write_csv(w))?;
        let secants = run.timed("secants", |r| direction_set_origin(cl, &r.config.dir))?;
        write_atomic(&dir.join("secants.csv"), |w| secants.write_csv(w))?;
        let bundle = run.timed("bundle", |r| sample_bundle(cl, &r.config.dir))?;
        write_atomic(&dir.join("bundle.csv"), |w| bundle.write_csv(w))?;
        files.extend(["cloud.csv", "secants.csv", "bundle.csv"]);
    }
    files.sort();
    let mut m = run.header("plotdata")?;
    m.insert("files".into(), json!(files));
    run.finish("plotdata.json", m)
}

/// Returns whether every selected criterion passed.
fn cmd_verify(suite: Suite, seed: u64, only: &[usize], out: Option<&Path>) -> Result<bool> {
    if let Some(bad) = only.iter().find(|id| !CRITERIA.iter().any(|c| c.0 == **id)) {
        return Err(GdError::InvalidParameter(format!("no criterion {bad}")));
    }
    let ids: Vec<usize> = CRITERIA
        .iter()
        .map(|c| c.0)
        .filter(|id| if only.is_empty() { matches!(suite, Suite::Full) || !SLOW.contains(id) } else { only.contains(id) })
        .collect();
    let mut rows = Vec::new();
    let mut all = true;
    for id in ids {
        let r = run_criterion(id, seed);
        eprintln!("{r}");
        all &= r.pass;
        rows.push(json!({"id": r.id, "name": r.name, "pass": r.pass, "detail": r.detail}));
    }
    let mut m = envelope("verify", if matches!(suite, Suite::Full) { "full" } else { "core" }, 0, seed);
    m.remove("n");
    m.insert("criteria".into(), Value::Array(rows));
    m.insert("pass".into(), json!(all));
    emit(out, "verify.json", &Value::Object(m))?;
    Ok(all)
}

fn cmd_table() -> Result<()> {
    let mut m = Map::new();
    m.insert("schema".into(), json!(gdlab::report::SCHEMA));
    m.insert("command".into(), json!("table"));
    m.insert("oracle".into(), to_value(&oracle_table())?);
    m.insert("catalog".into(), json!(catalog_names()));
    emit(None, "table.json", &Value::Object(m))
}

fn exit_code(e: &GdError) -> u8 {
    match e {
        GdError::Syntax { .. }
        | GdError::DimensionMismatch(_)
        | GdError::SqrtInImplicit
        | GdError::Validation(_)
        | GdError::UnknownCatalog(_)
        | GdError::InadmissibleDimension { .. }
        | GdError::Format(_) => EXIT_PARSE,
        GdError::Starvation { .. } | GdError::NotEnoughBands { .. } => EXIT_STARVATION,
        GdError::Io(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Sample(c) => cmd_sample(c),
        Command::Gd(c) => cmd_gd(c),
        Command::Iterate { common, max_degree } => cmd_iterate(common, *max_degree),
        Command::Decompose(c) => cmd_decompose(c),
        Command::Planes { common, m, max_planes, tol, of } => cmd_planes(common, *m, *max_planes, *tol, *of),
        Command::Split { common, k, method, tol, sep } => cmd_split(common, *k, *method, *tol, *sep),
        Command::Plotdata { common } => cmd_plotdata(common),
        Command::Table => cmd_table(),
        Command::Verify { suite, seed, only, out } => match cmd_verify(*suite, *seed, only, out.as_deref()) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(EXIT_ACCEPTANCE),
            Err(e) => Err(e),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gdlab: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
