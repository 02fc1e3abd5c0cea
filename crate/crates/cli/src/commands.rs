use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::anyhow;
use edt_core::algebra::{restricted_image_size, text, verify_decomposition, GeneratorSet, Verification};
use edt_core::edt::{
    law_report, learned_maps, read_augmenters, read_predictor, train_augmenters, train_predictor, write_augmenters, write_predictor, AugSource, AugmenterSet,
    ImageOracle, LogRecord,
};
use edt_core::eval::{ablation, evaluate, AblationConfig, Arm, Side};
use edt_core::splits::SplitMask;
use edt_core::{Dataset, FactorTuple, RenderParams, Renderer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Cli, Command, Overrides};

pub const EXIT_LAW: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_MISSING: u8 = 4;

pub const DATASET: &str = "dataset.edt1";
pub const SPLIT: &str = "split.txt";
pub const AUGMENTERS: &str = "augmenters.edta";
pub const PREDICTOR: &str = "predictor.edtp";

#[derive(Debug)]
pub enum Failure {
    Law(String),
    Config(anyhow::Error),
    Missing(PathBuf),
    Other(anyhow::Error),
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Law(msg) => write!(f, "law violation: {msg}"),
            Failure::Config(e) => write!(f, "config: {e:#}"),
            Failure::Missing(p) => write!(f, "missing artifact {}", p.display()),
            Failure::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Other(e.into())
    }
}

type Outcome = Result<(), Failure>;

/// Output record stamped with the producing config.
#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_digest: &'a str,
    #[serde(flatten)]
    inner: T,
}

struct Ctx {
    cfg: RunConfig,
    digest: String,
    out: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn existing(&self, name: &str) -> Result<PathBuf, Failure> {
        let p = self.path(name);
        if p.is_file() {
            Ok(p)
        } else {
            Err(Failure::Missing(p))
        }
    }

    /// Writes `<command>.config.txt` next to the outputs.
    fn echo(&self, command: &str) -> Outcome {
        fs::write(self.path(&format!("{command}.config.txt")), format!("# digest {}\n{}", self.digest, self.cfg))?;
        Ok(())
    }

    fn jsonl<T: Serialize>(&self, name: &str, rows: impl IntoIterator<Item = T>) -> Outcome {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        for r in rows {
            serde_json::to_writer(&mut w, &Stamped { config_digest: &self.digest, inner: r })?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    fn renderer(&self) -> Result<Renderer, Failure> {
        Renderer::new(self.cfg.roster.clone(), RenderParams::default()).map_err(|e| Failure::Config(e.into()))
    }

    /// The dataset from `gen`, checked against the configured roster.
    fn dataset(&self) -> Result<Dataset, Failure> {
        let ds = Dataset::read_from(BufReader::new(File::open(self.existing(DATASET)?)?))?;
        if *ds.space() != self.cfg.roster {
            return Err(Failure::Config(anyhow!("dataset roster {} differs from configured roster {}", ds.space(), self.cfg.roster)));
        }
        Ok(ds)
    }

    fn build_split(&self) -> Result<SplitMask, Failure> {
        let mask = SplitMask::build(&self.cfg.roster, &self.cfg.split, self.cfg.seed).map_err(|e| Failure::Config(e.into()))?;
        fs::write(self.path(SPLIT), mask.to_text())?;
        Ok(mask)
    }

    fn read_split(&self) -> Result<SplitMask, Failure> {
        let text = fs::read_to_string(self.existing(SPLIT)?)?;
        Ok(SplitMask::from_text(&text, &self.cfg.roster)?)
    }
}

fn apply(cfg: &mut RunConfig, o: &Overrides) -> Result<(), Failure> {
    let mut set = |k: &str, v: String| cfg.set(k, &v).map_err(Failure::Config);
    if let Some(s) = &o.split {
        set("split", s.clone())?;
    }
    for (k, v) in [("lambda0", o.l0), ("lambda1", o.l1), ("lambda2", o.l2), ("lambda3", o.l3)] {
        if let Some(v) = v {
            set(k, v.to_string())?;
        }
    }
    cfg.check().map_err(Failure::Config)
}

pub fn run(cli: Cli) -> Outcome {
    let mut cfg = match &cli.config {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|_| Failure::Missing(p.clone()))?;
            RunConfig::parse_text(&text).map_err(Failure::Config)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    match &cli.command {
        Command::TrainAug { overrides } | Command::TrainPred { overrides, .. } | Command::Ablate { overrides, .. } => apply(&mut cfg, overrides)?,
        _ => {}
    }
    if let Command::Ablate { arms, seeds, .. } = &cli.command {
        if let Some(a) = arms {
            cfg.arms = a.clone();
        }
        if let Some(n) = seeds {
            cfg.seeds = *n;
        }
        cfg.check().map_err(Failure::Config)?;
    }
    fs::create_dir_all(&cli.out)?;
    let ctx = Ctx { digest: cfg.digest(), cfg, out: cli.out.clone() };
    match cli.command {
        Command::Gen => gen(&ctx),
        Command::VerifyAlgebra { algebra } => verify_algebra(&ctx, algebra.as_deref()),
        Command::TrainAug { .. } => train_aug(&ctx),
        Command::TrainPred { arm, no_aug, augmenters, .. } => train_pred(&ctx, arm, no_aug, augmenters),
        Command::Eval { side } => eval(&ctx, side),
        Command::Ablate { .. } => ablate(&ctx),
        Command::LawReport { augmenters } => laws(&ctx, augmenters),
    }
}

fn gen(ctx: &Ctx) -> Outcome {
    ctx.echo("gen")?;
    let renderer = ctx.renderer()?;
    let check = renderer.injectivity_check();
    if let Some((a, b)) = check.witness {
        return Err(Failure::Law(format!("labels {:?} and {:?} render to the same image", a.0, b.0)));
    }
    let ds = Dataset::generate(&renderer);
    let mut w = BufWriter::new(File::create(ctx.path(DATASET))?);
    ds.write_to(&mut w)?;
    w.flush()?;
    println!("wrote {} instances ({} factors), rendering is injective", ds.len(), ds.space().num_factors());
    Ok(())
}

fn verify_algebra(ctx: &Ctx, file: Option<&Path>) -> Outcome {
    ctx.echo("verify-algebra")?;
    let mut report = Verification::default();
    let mut lines = Vec::new();
    if let Some(path) = file {
        let text = fs::read_to_string(path).map_err(|_| Failure::Missing(path.to_path_buf()))?;
        let doc = text::parse(&text).map_err(|e| Failure::Config(e.into()))?;
        report.extend(doc.monoid.verify().scoped("monoid"));
        if let Some(act) = &doc.action {
            report.extend(act.verify().scoped("action"));
        }
    } else {
        let space = &ctx.cfg.roster;
        for f in space.factors() {
            report.extend(f.monoid().verify().scoped(f.name()));
            let gens = GeneratorSet::new(f.monoid(), f.generators())?;
            if !gens.is_generating() {
                lines.push(format!("{}: generators {:?} do not generate the monoid", f.name(), f.generators()));
                report.extend(
                    Verification::new(vec![{
                        let mut r = edt_core::LawReport::new("generator closure");
                        r.record(f.generators());
                        r
                    }])
                    .scoped(f.name()),
                );
            }
        }
        report.extend(space.verify());
        let fs = space.factors();
        for i in 0..fs.len() {
            for j in i + 1..fs.len() {
                let (a, b) = (&fs[i], &fs[j]);
                let product = a.action().product(b.action());
                let scope = format!("{}x{}", a.name(), b.name());
                report.extend(product.verify().scoped(&scope));
                report.extend(verify_decomposition(&product, a.monoid(), b.monoid())?.scoped(&scope));
                let restricted = restricted_image_size(&product, a.monoid(), b.monoid());
                lines.push(format!(
                    "{scope}: restricted image {restricted} <= |A1|+|A2| = {}, full product image {}",
                    a.monoid().len() + b.monoid().len(),
                    product.properties().image_size
                ));
            }
        }
        let renderer = ctx.renderer()?;
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed);
        let tuples: Vec<FactorTuple> = (0..ctx.cfg.law_tuples).map(|_| space.decode(rng.gen_range(0..space.grid_size()))).collect();
        report.extend(renderer.verify_oracle_laws(&tuples)?.scoped("images"));
    }
    let mut w = BufWriter::new(File::create(ctx.path("algebra.txt"))?);
    writeln!(w, "# seed {} digest {}", ctx.cfg.seed, ctx.digest)?;
    writeln!(w, "{report}")?;
    for l in &lines {
        writeln!(w, "{l}")?;
    }
    w.flush()?;
    println!("{report}");
    for l in &lines {
        println!("{l}");
    }
    if report.is_exact() {
        Ok(())
    } else {
        Err(Failure::Law(format!("{} violation(s)", report.total_violations())))
    }
}

fn oracle(ctx: &Ctx) -> Result<(Dataset, ImageOracle), Failure> {
    let ds = ctx.dataset()?;
    Ok((ds, ImageOracle::new(ctx.renderer()?)))
}

fn train_aug(ctx: &Ctx) -> Outcome {
    ctx.echo("train-aug")?;
    let (_, oracle) = oracle(ctx)?;
    let mask = ctx.build_split()?;
    let trained = train_augmenters(&oracle, &mask, &ctx.cfg.edt_for(ctx.cfg.seed))?;
    let mut w = BufWriter::new(File::create(ctx.path(AUGMENTERS))?);
    write_augmenters(&mut w, &trained.set, Some(&trained.adam))?;
    w.flush()?;
    ctx.jsonl("train-aug.log.jsonl", trained.log.iter())?;
    print_last("augmenters", &trained.log);
    Ok(())
}

fn print_last(what: &str, log: &[LogRecord]) {
    match log.last() {
        Some(r) => println!("{what}: {}", serde_json::to_string(r).unwrap_or_default()),
        None => println!("{what}: trained"),
    }
}

fn load_augmenters(ctx: &Ctx, path: Option<PathBuf>) -> Result<AugmenterSet, Failure> {
    let p = match path {
        Some(p) if p.is_file() => p,
        Some(p) => return Err(Failure::Missing(p)),
        None => ctx.existing(AUGMENTERS)?,
    };
    Ok(read_augmenters(BufReader::new(File::open(p)?))?.0)
}

fn train_pred(ctx: &Ctx, arm: Arm, no_aug: bool, augmenters: Option<PathBuf>) -> Outcome {
    ctx.echo("train-pred")?;
    let (_, oracle) = oracle(ctx)?;
    let mask = ctx.build_split()?;
    let set;
    let source = match arm {
        _ if no_aug => AugSource::None,
        Arm::Erm => AugSource::None,
        Arm::EdtOracle => AugSource::Oracle,
        Arm::EdtFull | Arm::EdtL0L3 => {
            set = load_augmenters(ctx, augmenters)?;
            AugSource::Learned(&set)
        }
    };
    let trained = train_predictor(&oracle, &mask, source, &ctx.cfg.edt_for(ctx.cfg.seed))?;
    let mut w = BufWriter::new(File::create(ctx.path(PREDICTOR))?);
    write_predictor(&mut w, &trained.predictor)?;
    w.flush()?;
    ctx.jsonl("train-pred.log.jsonl", trained.log.iter())?;
    print_last("predictor", &trained.log);
    Ok(())
}

fn eval(ctx: &Ctx, side: Option<Side>) -> Outcome {
    ctx.echo("eval")?;
    let ds = ctx.dataset()?;
    let mask = ctx.read_split()?;
    let predictor = read_predictor(BufReader::new(File::open(ctx.existing(PREDICTOR)?)?))?;
    let sides = side.map_or(vec![Side::Train, Side::Test], |s| vec![s]);
    let mut records = Vec::new();
    for s in sides {
        let rec = evaluate(&predictor, &ds, &mask, s)?;
        println!("{s:>5}: {}", rec.scores.iter().map(|x| format!("{} {:.2}", x.factor, x.value)).collect::<Vec<_>>().join(", "));
        records.push(rec);
    }
    ctx.jsonl("metrics.jsonl", records)
}

/// An ablation table with its ordering and oracle-bound checks.
#[derive(Serialize)]
struct Checks<'a> {
    table: &'a edt_core::eval::AblationTable,
    orderings: Vec<edt_core::eval::Ordering>,
    oracle_bound: Vec<(String, bool)>,
}

fn ablate(ctx: &Ctx) -> Outcome {
    ctx.echo("ablate")?;
    let (ds, oracle) = oracle(ctx)?;
    let cfg = &ctx.cfg;
    let config = AblationConfig {
        scheme: cfg.split.clone(),
        seeds: (0..cfg.seeds as u64).map(|k| cfg.seed + k).collect(),
        arms: cfg.arms.clone(),
        edt: cfg.edt.clone(),
        law_images: cfg.law_images,
    };
    let result = ablation(&oracle, &ds, &config);
    ctx.jsonl("runs.jsonl", result.runs.iter())?;
    let ordinal: Vec<String> = cfg.roster.factors().iter().filter(|f| !f.kind().is_classification()).map(|f| f.name().to_string()).collect();
    let checks = Checks {
        table: &result.table,
        orderings: result.table.columns.iter().filter_map(|c| result.table.ordering(c)).collect(),
        oracle_bound: result.table.columns.iter().filter_map(|c| Some((c.clone(), result.table.oracle_bound(c)?))).collect(),
    };
    let mut text = format!("# split {} seeds {:?} digest {}\n", cfg.split, config.seeds, ctx.digest);
    text.push_str(&format!("# error % for classification factors, mse x100 for ordinal factors ({})\n", ordinal.join(", ")));
    text.push_str(&result.table.to_string());
    for o in &checks.orderings {
        text.push_str(&format!("ordering {}: full {:.2} < l0l3 {:.2} < erm {:.2}: {}\n", o.column, o.full, o.l0l3, o.erm, o.holds));
    }
    for (c, ok) in &checks.oracle_bound {
        text.push_str(&format!("oracle bound {c}: {ok}\n"));
    }
    fs::write(ctx.path("table.txt"), &text)?;
    let summary = Stamped { config_digest: &ctx.digest, inner: &checks };
    fs::write(ctx.path("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    print!("{text}");
    Ok(())
}

#[derive(Serialize)]
struct SeedLaws<'a> {
    seed: u64,
    laws: &'a edt_core::edt::LawResiduals,
}

fn laws(ctx: &Ctx, augmenters: Option<PathBuf>) -> Outcome {
    ctx.echo("law-report")?;
    let (_, oracle) = oracle(ctx)?;
    let mask = ctx.read_split()?;
    let set = load_augmenters(ctx, augmenters)?;
    let mut ids: Vec<usize> = mask.train().iter().copied().collect();
    rand::seq::SliceRandom::shuffle(&mut ids[..], &mut ChaCha8Rng::seed_from_u64(ctx.cfg.seed ^ 0x5eed));
    ids.truncate(ctx.cfg.law_images.max(1));
    let report = law_report(&set.context(None), &learned_maps(&set), &oracle, &ids)?;
    fs::write(
        ctx.path("laws.json"),
        serde_json::to_string_pretty(&Stamped { config_digest: &ctx.digest, inner: SeedLaws { seed: ctx.cfg.seed, laws: &report } })?,
    )?;
    fs::write(ctx.path("laws.txt"), format!("# seed {} digest {}\n{report}\n", ctx.cfg.seed, ctx.digest))?;
    println!("{report}");
    Ok(())
}
