use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use overlapix::bundle::{self, AnalysisConfig, DEFAULT_REPORT_TOP_K};
use overlapix::enumerate::{
    enumerate_potentials, overlap_free_b2, select_best, Criterion, EnumerationConfig,
};
use overlapix::io::{self, InputFormat, MissingPolicy};
use overlapix::model::{encode_synthesis, EncodedSynthesis, Synthesis};
use overlapix::oracle::{self, GenerationConfig, SweepConfig, SyntheticSynthesis};
use overlapix::potential::{pairwise_matrix, potential};
use overlapix::ratio::{fraction_decimal, fraction_string};
use overlapix::{plot, BitSet, Budget, Error, Fraction, Result};

const BUDGET_ENV: &str = "OVERLAPIX_TIME_BUDGET_SECS";
const DEFAULT_BUDGET_SECS: f64 = 300.0;

#[derive(Parser)]
#[command(name = "overlapix", version, about = "Sample-overlap analysis from study-level envelopes")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Partition scheme: singleton, width=N or file=PATH
    #[arg(long, global = true, default_value = "singleton")]
    partition: String,
    /// Policy for characteristics a study does not report: error or full-range
    #[arg(long, global = true, default_value = "error")]
    missing: String,
    /// Input format (json or csv); defaults to the file extension
    #[arg(long, global = true)]
    format: Option<String>,
    /// Directory for output artifacts
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for synthetic data
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (results do not depend on this)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Args, Clone)]
struct EnumerateArgs {
    /// Keep only the best K combinations
    #[arg(long)]
    top_k: Option<usize>,
    /// Report only combinations with potential strictly above this (e.g. 1/4 or 0.25)
    #[arg(long, default_value = "0")]
    min_potential: String,
    /// Largest combination size to consider
    #[arg(long)]
    max_size: Option<usize>,
}

#[derive(Args, Clone)]
struct CriterionArg {
    /// pooled-size, study-count, inverse-variance, or a comma-separated chain
    #[arg(long, default_value = "pooled-size")]
    criterion: String,
}

#[derive(Subcommand)]
enum Command {
    /// Check an envelope file
    Validate { input: PathBuf },
    /// Print the binary coverage encoding
    Encode { input: PathBuf },
    /// Pairwise potential matrix and heat map
    Pairs { input: PathBuf },
    /// Combinations ranked by potential, and the grid plot
    Potentials {
        input: PathBuf,
        #[command(flatten)]
        enumerate: EnumerateArgs,
    },
    /// Maximal overlap-free combinations and the selected one
    OverlapFree {
        input: PathBuf,
        #[command(flatten)]
        criterion: CriterionArg,
    },
    /// Naive pooled size and the pairwise lower-bound proxy
    Bound { input: PathBuf },
    /// Full result bundle
    Report {
        input: PathBuf,
        #[command(flatten)]
        enumerate: EnumerateArgs,
        #[command(flatten)]
        criterion: CriterionArg,
    },
    /// Synthetic data with known memberships
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Draw a synthetic synthesis (fixture plus envelopes)
    Generate {
        #[arg(long, default_value_t = 6)]
        studies: usize,
        #[arg(long, default_value_t = 0.3)]
        intensity: f64,
        #[arg(long, default_value_t = 0.2)]
        padding: f64,
        #[arg(long, default_value_t = 0.0)]
        distortion: f64,
    },
    /// True overlap summaries for every subset of a fixture
    Overlap { fixture: PathBuf },
    /// Potential against true overlap for every subset of a fixture
    Check { fixture: PathBuf },
    /// Exclusion soundness over many seeded instances
    Sweep {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 6)]
        studies: usize,
        #[arg(long)]
        max_size: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        distortion: f64,
    },
}

struct Ctx<'a> {
    global: &'a Global,
    budget: Budget,
}

impl Ctx<'_> {
    fn missing(&self) -> Result<MissingPolicy> {
        MissingPolicy::parse(&self.global.missing)
    }

    fn load(&self, input: &Path) -> Result<Synthesis> {
        let format = self.global.format.as_deref().map(InputFormat::parse).transpose()?;
        io::ingest(input, format, self.missing()?)
    }

    /// Loads, checks there are at least two studies, and encodes.
    fn encoded(&self, input: &Path) -> Result<(Synthesis, EncodedSynthesis)> {
        let s = self.load(input)?;
        need_two(&s)?;
        let scheme = io::partition_scheme(&self.global.partition)?;
        let (_, e) = encode_synthesis(&s, &scheme)?;
        Ok((s, e))
    }

    fn write(&self, name: &str, text: &str) -> Result<()> {
        if let Some(dir) = &self.global.out {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    fn out_path(&self, name: &str) -> Option<PathBuf> {
        self.global.out.as_ref().map(|d| d.join(name))
    }
}

fn need_two(s: &Synthesis) -> Result<()> {
    if s.n_studies() < 2 {
        return Err(Error::TooFewStudies {
            needed: 2,
            got: s.n_studies(),
        });
    }
    Ok(())
}

fn parse_fraction(s: &str) -> Result<Fraction> {
    let bad = || Error::Config(format!("`{s}` is not a fraction or decimal in [0, 1]"));
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n: u64 = n.trim().parse().map_err(|_| bad())?;
        let d: u64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(Fraction::new(n, d));
    }
    // Decimals are read exactly: "0.25" is 25/100.
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if int.is_empty() && frac.is_empty() || frac.len() > 18 {
        return Err(bad());
    }
    let digits = |t: &str| t.is_empty() || t.bytes().all(|b| b.is_ascii_digit());
    if !digits(int) || !digits(frac) {
        return Err(bad());
    }
    let den = 10u64.pow(frac.len() as u32);
    let int: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let frac: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
    if int > 1 {
        return Err(bad());
    }
    Ok(Fraction::new(int * den + frac, den))
}

fn enumeration_config(a: &EnumerateArgs, default_top_k: Option<usize>) -> Result<EnumerationConfig> {
    let c = EnumerationConfig {
        min_potential: parse_fraction(&a.min_potential)?,
        top_k: a.top_k.or(default_top_k),
        max_subset_size: a.max_size,
    };
    c.validate()?;
    Ok(c)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s
}

fn run(cli: &Cli) -> Result<String> {
    let budget = match std::env::var(BUDGET_ENV) {
        Ok(v) => Budget::from_secs(
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|s| s.is_finite() && *s >= 0.0)
                .ok_or_else(|| Error::Config(format!("{BUDGET_ENV}=`{v}` is not a number of seconds")))?,
        ),
        Err(_) => Budget::from_secs(DEFAULT_BUDGET_SECS),
    };
    let ctx = Ctx {
        global: &cli.global,
        budget,
    };
    match &cli.command {
        Command::Validate { input } => {
            let s = ctx.load(input)?;
            let total: u64 = s.studies.iter().map(|x| x.sample_size).sum();
            Ok(format!(
                "valid: {} studies, {} characteristics, naive pooled size {total}\n",
                s.n_studies(),
                s.characteristics.len()
            ))
        }
        Command::Encode { input } => {
            let (_, e) = ctx.encoded(input)?;
            let mut text = e.to_json();
            text.push('\n');
            ctx.write("encoding.json", &text)?;
            Ok(text)
        }
        Command::Pairs { input } => {
            let (_, e) = ctx.encoded(input)?;
            let m = pairwise_matrix(&e);
            let text = pretty(&bundle::matrix_value(&m));
            ctx.write("pairs.json", &text)?;
            if let Some(p) = ctx.out_path("heatmap.svg") {
                plot::emit_heatmap(&m, &p)?;
            }
            Ok(text)
        }
        Command::Potentials { input, enumerate } => {
            let (_, e) = ctx.encoded(input)?;
            let config = enumeration_config(enumerate, None)?;
            let en = enumerate_potentials(&e, &config, &ctx.budget)?;
            let text = pretty(&bundle::enumeration_value(&e, &en));
            ctx.write("potentials.json", &text)?;
            if let Some(p) = ctx.out_path("gridplot.svg") {
                plot::emit_gridplot(&e.study_ids, &en.reports, config.top_k, en.truncated, &p)?;
            }
            Ok(text)
        }
        Command::OverlapFree { input, criterion } => {
            let (s, e) = ctx.encoded(input)?;
            let criterion = Criterion::parse(&criterion.criterion)?;
            let family = overlap_free_b2(&e, &ctx.budget)?;
            let selection = select_best(&family, &s.studies, &criterion)?;
            let text = pretty(&json!({
                "overlap_free": bundle::family_value(&e, &family),
                "selection": bundle::selection_value(&e, &selection),
                "naive_pooled_size": e.sample_sizes.iter().sum::<u64>(),
            }));
            ctx.write("overlap_free.json", &text)?;
            Ok(text)
        }
        Command::Bound { input } => {
            let (_, e) = ctx.encoded(input)?;
            let b = overlapix::bound::lower_bound_proxy(&e, &pairwise_matrix(&e));
            let text = pretty(&bundle::bound_value(&e, &b));
            ctx.write("bound.json", &text)?;
            Ok(text)
        }
        Command::Report {
            input,
            enumerate,
            criterion,
        } => {
            let s = ctx.load(input)?;
            need_two(&s)?;
            let config = AnalysisConfig {
                partition: io::partition_scheme(&cli.global.partition)?,
                missing: ctx.missing()?,
                enumeration: enumeration_config(enumerate, Some(DEFAULT_REPORT_TOP_K))?,
                criterion: Criterion::parse(&criterion.criterion)?,
            };
            let b = bundle::analyze(&s, &config, &ctx.budget)?;
            let text = b.to_json();
            ctx.write("bundle.json", &text)?;
            if let Some(p) = ctx.out_path("heatmap.svg") {
                plot::emit_heatmap(&b.matrix, &p)?;
            }
            if let Some(p) = ctx.out_path("gridplot.svg") {
                plot::emit_gridplot(
                    &b.encoded.study_ids,
                    &b.enumeration.reports,
                    config.enumeration.top_k,
                    b.enumeration.truncated,
                    &p,
                )?;
            }
            Ok(text)
        }
        Command::Oracle(cmd) => run_oracle(&ctx, cmd),
    }
}

fn load_fixture(path: &Path) -> Result<SyntheticSynthesis> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    SyntheticSynthesis::from_json(&text)
}

fn study_names(s: &SyntheticSynthesis, members: &[usize]) -> Vec<String> {
    members.iter().map(|&i| s.studies[i].study_id.clone()).collect()
}

fn run_oracle(ctx: &Ctx, cmd: &OracleCommand) -> Result<String> {
    match cmd {
        OracleCommand::Generate {
            studies,
            intensity,
            padding,
            distortion,
        } => {
            let mut config = GenerationConfig::standard(*studies, ctx.global.seed);
            config.overlap_intensity = *intensity;
            config.padding = *padding;
            config.distortion = *distortion;
            let s = oracle::generate(&config)?;
            let mut text = s.to_json();
            text.push('\n');
            ctx.write("fixture.json", &text)?;
            ctx.write("envelopes.json", &io::to_json(&s.envelope_synthesis()?))?;
            Ok(text)
        }
        OracleCommand::Overlap { fixture } => {
            let s = load_fixture(fixture)?;
            check_exhaustive(&s)?;
            let rows: Vec<Value> = oracle::overlap_table(&s)
                .into_iter()
                .map(|(members, o)| {
                    json!({
                        "subset": study_names(&s, &members),
                        "overlap": s.event_names(&o.overlap),
                        "union_size": o.union_size,
                        "f1": o.f1,
                        "f2": o.f2,
                        "f3": fraction_string(&o.f3),
                        "f4": o.f4,
                    })
                })
                .collect();
            let text = pretty(&json!({ "subsets": rows }));
            ctx.write("overlap.json", &text)?;
            Ok(text)
        }
        OracleCommand::Check { fixture } => {
            let s = load_fixture(fixture)?;
            check_exhaustive(&s)?;
            let scheme = io::partition_scheme(&ctx.global.partition)?;
            let (_, e) = encode_synthesis(&s.envelope_synthesis()?, &scheme)?;
            let n = s.n_studies();
            let rows: Vec<Value> = oracle::overlap_table(&s)
                .into_iter()
                .filter(|(m, _)| m.len() >= 2)
                .map(|(members, o)| {
                    let est = potential(&e, &BitSet::from_indices(n, members.iter().copied())).overall;
                    json!({
                        "subset": study_names(&s, &members),
                        "potential": fraction_string(&est),
                        "potential_decimal": fraction_decimal(&est, 4),
                        "pi": fraction_string(&o.f3),
                        "overlap": s.event_names(&o.overlap),
                        "excluded": est == Fraction::from_integer(0),
                    })
                })
                .collect();
            let check = oracle::check_instance(&s, &scheme, None)?;
            let ie = oracle::inclusion_exclusion_check(&s)?;
            let all: Vec<usize> = (0..n).collect();
            let text = pretty(&json!({
                "subsets": rows,
                "soundness_violations": check.violations.iter().map(|v| study_names(&s, v)).collect::<Vec<_>>(),
                "false_alarms": check.false_alarms,
                "non_bound_events": check.non_bound_events,
                "union_size": oracle::union_size(&s.memberships(), &BitSet::from_indices(n, all)),
                "inclusion_exclusion_holds": ie.identity_holds(),
                "pairwise_bounds_hold": ie.bounds_hold(),
            }));
            ctx.write("check.json", &text)?;
            if !check.violations.is_empty() {
                return Err(Error::Schema(format!(
                    "{} subsets have zero potential but shared members\n{text}",
                    check.violations.len()
                )));
            }
            Ok(text)
        }
        OracleCommand::Sweep {
            instances,
            studies,
            max_size,
            distortion,
        } => {
            let mut base = GenerationConfig::standard(*studies, ctx.global.seed);
            base.distortion = *distortion;
            let report = oracle::soundness_sweep(&SweepConfig {
                base,
                instances: *instances,
                max_subset_size: *max_size,
            })?;
            let text = pretty(&json!({
                "instances": report.instances,
                "subsets_checked": report.subsets_checked,
                "violations": report.violations.len(),
                "false_alarms": report.false_alarms,
                "false_alarm_rate": report.false_alarm_rate(),
                "non_bound_events": report.non_bound_events,
                "non_bound_rate": report.non_bound_rate(),
                "overlap_not_realized": report.overlap_not_realized,
            }));
            ctx.write("sweep.json", &text)?;
            for (i, v) in report.violations.iter().enumerate() {
                ctx.write(&format!("violation-{i}-seed-{}.json", v.seed), &v.fixture)?;
            }
            if let Some(v) = report.violations.first() {
                return Err(Error::Schema(format!(
                    "{} soundness violations; first at seed {} on subset {:?}\n{text}",
                    report.violations.len(),
                    v.seed,
                    v.subset
                )));
            }
            Ok(text)
        }
    }
}

fn check_exhaustive(s: &SyntheticSynthesis) -> Result<()> {
    if s.n_studies() > oracle::MAX_EXHAUSTIVE_STUDIES {
        return Err(Error::Capacity(format!(
            "fixture has {} studies; exhaustive checks stop at {}",
            s.n_studies(),
            oracle::MAX_EXHAUSTIVE_STUDIES
        )));
    }
    Ok(())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::TimeBudgetExceeded { .. } => 3,
        e if e.is_validation() => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    ExitCode::SUCCESS
                }
                _ => ExitCode::from(1),
            };
        }
    };
    if let Some(dir) = &cli.global.out {
        if let Err(e) = std::fs::create_dir_all(dir) {
            eprintln!("error: {}: {e}", dir.display());
            return ExitCode::from(2);
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.global.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions() {
        assert_eq!(parse_fraction("1/4").unwrap(), Fraction::new(1, 4));
        assert_eq!(parse_fraction("0.25").unwrap(), Fraction::new(1, 4));
        assert_eq!(parse_fraction("1").unwrap(), Fraction::from_integer(1));
        assert_eq!(parse_fraction(".5").unwrap(), Fraction::new(1, 2));
        for bad in ["", ".", "x", "1/0", "-0.1", "2", "0.1.2"] {
            assert!(parse_fraction(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn cli_definition() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
