//! One function per subcommand. Each returns the text meant for stdout.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use feedlab_core::engine::{read_log, recover as recover_log, ExperimentConfig, LogSnapshot};
use feedlab_core::fixtures;
use feedlab_core::interventions::mock::FixedLengthClient;
use feedlab_core::interventions::{
    build_personalized_prompt, build_zero_shot_prompt, CompletionClient, ExplanationGenerator,
    GeneratedIntervention, PromptRequest,
};
use feedlab_core::lingua::{
    group_comparison, parse_group_list, FormalityScorer, GroupComparison, HeylighenDewaele,
    LinguaError, ProcessScorer,
};
use feedlab_core::simusers::{run_cohort, AgentPolicy, Cohort, CohortSummary, PolicyMix};
use feedlab_core::stats::{
    accuracy, alignment_regression, helpfulness_by_alignment, parse_subset, subset_report,
    AccuracyOptions, AnalysisFrame, BootstrapConfig, ExperimentReport, PreSelection, StatsError,
    UncertainMode,
};
use feedlab_core::{AttributeSet, ClaimFormat, Dataset, InterventionArm, Phase};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cli::*;
use crate::client::HttpApi;
use crate::error::{CliError, Result};
use crate::openai::OpenAiClient;
use crate::server;
use crate::workspace::{log_has_data, read, write_new, ExperimentWorkspace, ProviderMode};

pub fn run(cli: Cli) -> Result<String> {
    let root = cli.workspace.as_path();
    match cli.command {
        Command::Init(a) => init(root, &a),
        Command::Ingest(a) => ingest(&ExperimentWorkspace::open(root)?, &a),
        Command::Generate(a) => generate(&ExperimentWorkspace::open(root)?, &a),
        Command::Serve(a) => serve(&ExperimentWorkspace::open(root)?, &a).map(|_| String::new()),
        Command::Simulate(a) => simulate(&ExperimentWorkspace::open(root)?, &a),
        Command::Analyze(a) => analyze(&ExperimentWorkspace::open(root)?, &a),
        Command::Lingua(LinguaCommand::Compare(a)) => lingua_compare(&a),
        Command::Report(a) => report(&ExperimentWorkspace::open(root)?, &a).map(|r| r.to_string()),
        Command::Recover(a) => recover(root, &a),
    }
}

pub fn init(workspace: &Path, args: &InitArgs) -> Result<String> {
    let root = args.dir.as_deref().unwrap_or(workspace);
    let mut config = ExperimentConfig {
        seed: args.seed,
        ..ExperimentConfig::default()
    };
    if args.demo {
        config.files.reference_table = Some("reference_table.json".into());
        config.arms.insert(InterventionArm::Control, 1.0);
        config.arms.insert(InterventionArm::LlmPersonalized, 1.0);
    }
    let ws = ExperimentWorkspace::init(root, &config, args.force)?;
    let mut out = format!("initialized {}\n", root.display());
    if args.demo {
        let claims = fixtures::synthetic_dataset(60, 60);
        write_new(&ws.claims_path(), &claims.to_jsonl(), args.force)?;
        let table = serde_json::to_string_pretty(&fixtures::synthetic_reference_file())
            .expect("table serializes");
        write_new(&ws.path("reference_table.json"), &table, args.force)?;
        writeln!(out, "demo data: {}", claims.summary()).unwrap();
    }
    Ok(out)
}

fn summary_text(dataset: &Dataset) -> String {
    let summary = dataset.summary();
    let mut out = format!("{summary}\n");
    for (topic, n) in &summary.by_topic {
        writeln!(out, "  {topic}: {n}").unwrap();
    }
    out
}

pub fn ingest(ws: &ExperimentWorkspace, args: &IngestArgs) -> Result<String> {
    let format = match args.format {
        Some(InputFormat::Jsonl) => ClaimFormat::JsonLines,
        Some(InputFormat::Csv) => ClaimFormat::Csv,
        None => ClaimFormat::from_path(&args.input)?,
    };
    let dataset = Dataset::load(&args.input, format)?;
    let mut out = summary_text(&dataset);
    if !args.dry_run {
        let target = ws.claims_path();
        if ClaimFormat::from_path(&target).ok() != Some(ClaimFormat::JsonLines) {
            return Err(CliError::Usage(format!(
                "files.claims must name a .jsonl file, got {}",
                target.display()
            )));
        }
        write_new(&target, &dataset.to_jsonl(), args.force)?;
        writeln!(out, "wrote {}", target.display()).unwrap();
    }
    Ok(out)
}

fn run_generation<C: CompletionClient>(
    client: C,
    ws: &ExperimentWorkspace,
    args: &GenerateArgs,
    prompts: &[PromptRequest],
) -> (Vec<GeneratedIntervention>, Vec<String>, usize) {
    let mut config = ws.generation_config();
    if let Some(p) = args.parallelism {
        config.parallelism = p;
    }
    let generator = ExplanationGenerator::new(client, config);
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for (req, result) in prompts.iter().zip(generator.generate_batch(prompts)) {
        match result {
            Ok(text) => ok.push(GeneratedIntervention::from_text(&text, Some(req.filled_prompt.clone()))),
            Err(e) => failed.push(format!("{}: {e}", req.claim_id)),
        }
    }
    (ok, failed, generator.provider_calls())
}

pub fn generate(ws: &ExperimentWorkspace, args: &GenerateArgs) -> Result<String> {
    let target = ws.interventions_path();
    if target.exists() && !args.force {
        return Err(CliError::Exists(target));
    }
    let dataset = ws.dataset()?;
    let groups: Vec<AttributeSet> = if args.zero_shot_only {
        Vec::new()
    } else if !args.attrs.is_empty() {
        args.attrs
            .iter()
            .map(|a| AttributeSet::parse(a).map_err(|e| CliError::Usage(format!("--attrs {a}: {e}"))))
            .collect::<Result<_>>()?
    } else {
        ws.reference()?.map(|t| t.groups().to_vec()).unwrap_or_default()
    };
    let model = &ws.config.generation.model_id;
    let mut prompts = Vec::new();
    for claim in dataset.claims() {
        prompts.push(build_zero_shot_prompt(claim, claim.veracity, model));
        for attrs in &groups {
            prompts.push(
                build_personalized_prompt(claim, claim.veracity, attrs, model)
                    .map_err(|e| CliError::Usage(e.to_string()))?,
            );
        }
    }
    let (records, failed, calls) = match args.mock {
        Some(words) => run_generation(FixedLengthClient::new(words), ws, args, &prompts),
        None => run_generation(OpenAiClient::from_env(&ws.config.generation)?, ws, args, &prompts),
    };
    let mut body = String::new();
    for r in &records {
        body.push_str(&serde_json::to_string(r).expect("record serializes"));
        body.push('\n');
    }
    write_new(&target, &body, true)?;
    let over = records.iter().filter(|r| r.over_limit).count();
    let personalized = records.iter().filter(|r| r.generation_attrs.is_some()).count();
    let out = format!(
        "wrote {} explanations to {} ({} zero-shot, {} personalized, {} over the word limit, {} provider calls)\n",
        records.len(),
        target.display(),
        records.len() - personalized,
        personalized,
        over,
        calls
    );
    if let Some(first) = failed.first() {
        print!("{out}");
        return Err(CliError::Generation {
            failed: failed.len(),
            total: prompts.len(),
            first: first.clone(),
        });
    }
    Ok(out)
}

fn provider_mode(mock: Option<usize>) -> ProviderMode {
    match mock {
        Some(words) => ProviderMode::Mock { words },
        None => ProviderMode::Auto,
    }
}

pub fn serve(ws: &ExperimentWorkspace, args: &ServeArgs) -> Result<()> {
    let listener = server::bind(&args.bind)?;
    let log_dir = args.log.clone().unwrap_or_else(|| ws.log_dir());
    let engine = Arc::new(ws.open_engine_now(&log_dir, &provider_mode(args.mock))?);
    tracing::info!(sessions = engine.session_count(), log = %log_dir.display(), "log replayed");
    server::run(engine, listener, |addr| {
        println!("listening on http://{addr}");
        let _ = std::io::stdout().flush();
    })
}

/// A policy file holds either a [`PolicyMix`] or one [`AgentPolicy`] for every arm.
pub fn load_policy(path: &Path) -> Result<PolicyMix> {
    let text = read(path)?;
    if let Ok(mix) = serde_json::from_str::<PolicyMix>(&text) {
        return Ok(mix);
    }
    serde_json::from_str::<AgentPolicy>(&text)
        .map(PolicyMix::uniform)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn cohort_text(s: &CohortSummary) -> String {
    let mut out = format!(
        "{} agents, {} sessions: {} completed, {} failed the attention check, {} abandoned; {} events\n",
        s.agents, s.sessions, s.completed, s.failed_attention, s.abandoned, s.events
    );
    for (arm, n) in &s.per_arm {
        writeln!(out, "  {:<20} {n}", arm.display_name()).unwrap();
    }
    out
}

pub fn simulate(ws: &ExperimentWorkspace, args: &SimulateArgs) -> Result<String> {
    let dataset = ws.dataset()?;
    let reference = ws.reference()?;
    let mix = match &args.policy {
        Some(p) => load_policy(p)?,
        None => PolicyMix::default(),
    };
    let cohort = Cohort::new(&dataset, args.seed.unwrap_or(ws.config.seed))
        .with_reference(reference.as_ref())
        .with_parallelism(args.parallelism)
        .with_user_prefix(&args.user_prefix);
    let summary = match &args.url {
        Some(url) => run_cohort(&HttpApi::new(url)?, args.agents, &mix, &cohort)?,
        None => {
            let dir = args.out.clone().unwrap_or_else(|| ws.log_dir());
            if log_has_data(&dir) && !args.force {
                return Err(CliError::Usage(format!(
                    "{} already holds a log; pass --force to add sessions to it",
                    dir.display()
                )));
            }
            let engine = ws.open_engine_now(&dir, &provider_mode(args.mock))?;
            let summary = run_cohort(&engine, args.agents, &mix, &cohort)?;
            engine.sync()?;
            summary
        }
    };
    Ok(cohort_text(&summary))
}

pub fn accuracy_options(config: &ExperimentConfig, opts: &AnalysisOpts) -> AccuracyOptions {
    AccuracyOptions {
        uncertain: match opts.uncertain {
            Some(UncertainArg::Incorrect) => UncertainMode::Incorrect,
            Some(UncertainArg::Exclude) => UncertainMode::Exclude,
            None => config.analysis.uncertain,
        },
        pre_selection: match opts.before {
            BeforeArg::All => PreSelection::All,
            BeforeArg::Revealed => PreSelection::Revealed,
        },
        bootstrap: BootstrapConfig {
            resamples: opts.resamples.unwrap_or(config.analysis.bootstrap_resamples),
            confidence: config.analysis.confidence,
            seed: opts.seed,
        },
    }
}

struct Loaded {
    dataset: Dataset,
    snapshot: LogSnapshot,
    frame: AnalysisFrame,
}

fn load_frame(ws: &ExperimentWorkspace, opts: &AnalysisOpts) -> Result<Loaded> {
    let dataset = ws.dataset()?;
    let dir = opts.log.clone().unwrap_or_else(|| ws.log_dir());
    let snapshot = read_log(&dir)?;
    let frame = AnalysisFrame::build(&snapshot, &dataset, &ws.config);
    Ok(Loaded {
        dataset,
        snapshot,
        frame,
    })
}

fn experiment_report(
    loaded: &Loaded,
    opts: &AnalysisOpts,
    acc: &AccuracyOptions,
) -> Result<ExperimentReport> {
    let report = match &opts.subset {
        Some(expr) => subset_report(&loaded.frame, &loaded.dataset, expr, parse_subset(expr)?, acc)?,
        None => ExperimentReport::build(&loaded.frame, acc)?,
    };
    if let Some(w) = report.warning() {
        eprintln!("warning: {w}");
    }
    Ok(report)
}

fn parse_arm(name: &str) -> Result<InterventionArm> {
    name.parse()
        .map_err(|e: feedlab_core::DomainError| CliError::Usage(e.to_string()))
}

#[derive(Serialize)]
struct PhaseAccuracy {
    arm: InterventionArm,
    phase: Phase,
    point: f64,
    lo: f64,
    hi: f64,
    n: usize,
}

pub fn analyze(ws: &ExperimentWorkspace, args: &AnalyzeArgs) -> Result<String> {
    let acc = accuracy_options(&ws.config, &args.opts);
    let loaded = load_frame(ws, &args.opts)?;
    let arm = args.arm.as_deref().map(parse_arm).transpose()?;
    if let (Some(arm), Some(phase)) = (arm, args.phase) {
        let phase = match phase {
            PhaseArg::Pre => Phase::Pre,
            PhaseArg::Post => Phase::Post,
        };
        let frame = match &args.opts.subset {
            Some(expr) => {
                let pred = parse_subset(expr)?;
                loaded.frame.restrict(&loaded.dataset, pred)
            }
            None => loaded.frame.clone(),
        };
        let e = accuracy(&frame, arm, phase, &acc)?;
        return Ok(match args.format {
            OutputFormat::Json => {
                let row = PhaseAccuracy { arm, phase, point: e.point, lo: e.lo, hi: e.hi, n: e.n };
                serde_json::to_string_pretty(&row).expect("serializes") + "\n"
            }
            OutputFormat::Table => format!("{} {phase}: {e} (n={})\n", arm.display_name(), e.n),
        });
    }
    let mut report = experiment_report(&loaded, &args.opts, &acc)?;
    if let Some(arm) = arm {
        report.arms.retain(|a| a.arm == arm);
        if report.arms.is_empty() {
            return Err(StatsError::EmptySelection(format!("no completed sessions in arm {arm}")).into());
        }
    }
    Ok(match args.format {
        OutputFormat::Json => report.to_json() + "\n",
        OutputFormat::Table => report.to_table(),
    })
}

#[derive(Deserialize)]
struct GroupText {
    group: String,
    text: String,
}

fn scorer_from(cmd: Option<&str>) -> Result<Box<dyn FormalityScorer>> {
    match cmd {
        None => Ok(Box::new(HeylighenDewaele)),
        Some(cmd) => {
            let mut parts = cmd.split_whitespace();
            let program = parts
                .next()
                .ok_or_else(|| CliError::Usage("--scorer-cmd is empty".into()))?;
            Ok(Box::new(ProcessScorer::new(program, parts)))
        }
    }
}

/// Order and filter `(group, texts)` by an explicit group list, or keep
/// first-appearance order.
pub fn select_groups(
    texts: Vec<(String, String)>,
    order: Option<&[String]>,
) -> Result<Vec<(String, Vec<String>)>> {
    let mut by_group: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut seen = Vec::new();
    for (g, t) in texts {
        if !by_group.contains_key(&g) {
            seen.push(g.clone());
        }
        by_group.entry(g).or_default().push(t);
    }
    let order: Vec<String> = order.map(<[String]>::to_vec).unwrap_or(seen);
    order
        .into_iter()
        .map(|g| match by_group.remove(&g) {
            Some(t) => Ok((g, t)),
            None => Err(LinguaError::UnknownGroup(g).into()),
        })
        .collect()
}

pub fn lingua_compare(args: &LinguaCompareArgs) -> Result<String> {
    let text = read(&args.input)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let r: GroupText = serde_json::from_str(line).map_err(|e| {
            CliError::Usage(format!("{} line {}: {e}", args.input.display(), i + 1))
        })?;
        rows.push((r.group, r.text));
    }
    let order = args.groups.as_deref().map(parse_group_list);
    let groups = select_groups(rows, order.as_deref())?;
    let reference = groups
        .first()
        .map(|(g, _)| g.clone())
        .ok_or_else(|| CliError::Usage("no texts in input".into()))?;
    let scorer = scorer_from(args.scorer_cmd.as_deref())?;
    let cmp = group_comparison(&groups, &reference, scorer.as_ref())?;
    Ok(match args.format {
        OutputFormat::Json => serde_json::to_string_pretty(&cmp).expect("serializes") + "\n",
        OutputFormat::Table => cmp.to_table(),
    })
}

pub const ARM_REPORT: &str = "arm_report";
pub const ALIGNMENT: &str = "alignment";
pub const ALIGNMENT_PLOT: &str = "alignment_plot.csv";
pub const HELPFULNESS: &str = "helpfulness_alignment";
pub const LINGUISTICS: &str = "linguistics";

/// Files written by `report`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub dir: PathBuf,
    pub files: Vec<PathBuf>,
}

impl std::fmt::Display for ReportFiles {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "wrote {} files to {}", self.files.len(), self.dir.display())?;
        for p in &self.files {
            writeln!(f, "  {}", p.file_name().unwrap_or_default().to_string_lossy())?;
        }
        Ok(())
    }
}

/// Explanation texts per linguistic group: `control` holds zero-shot
/// explanations, `g1`.. the personalized ones per audience, ordered by
/// audience key. Returns the groups and the audience of each `gk`.
pub fn explanation_groups(
    records: &[GeneratedIntervention],
) -> (Vec<(String, Vec<String>)>, Vec<(String, String)>) {
    let mut seen = BTreeSet::new();
    let mut zero = Vec::new();
    let mut personalized: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in records {
        let key = r.generation_attrs.as_ref().map(AttributeSet::key);
        if !seen.insert((r.claim_id.clone(), r.arm, key.clone())) {
            continue;
        }
        match (r.arm, key) {
            (InterventionArm::LlmZeroShot, _) => zero.push(r.explanation.clone()),
            (InterventionArm::LlmPersonalized, Some(k)) => {
                personalized.entry(k).or_default().push(r.explanation.clone())
            }
            _ => {}
        }
    }
    let mut groups = Vec::new();
    let mut legend = Vec::new();
    for (i, (key, texts)) in personalized.into_iter().enumerate() {
        let name = format!("g{}", i + 1);
        legend.push((name.clone(), key));
        groups.push((name, texts));
    }
    if !zero.is_empty() {
        groups.push(("control".to_string(), zero));
    }
    (groups, legend)
}

fn logged_explanations(snapshot: &LogSnapshot) -> Vec<GeneratedIntervention> {
    snapshot
        .session_index()
        .iter()
        .flat_map(|s| s.interventions.values())
        .filter(|t| t.arm.is_llm())
        .map(|t| GeneratedIntervention::from_text(t, None))
        .collect()
}

#[derive(Serialize)]
struct Linguistics {
    legend: Vec<(String, String)>,
    skipped: Vec<(String, usize)>,
    comparison: Option<GroupComparison>,
}

fn linguistics(ws: &ExperimentWorkspace, snapshot: &LogSnapshot) -> Result<(String, String)> {
    let records = match ws.pregenerated_records()? {
        Some(r) => r,
        None => logged_explanations(snapshot),
    };
    let (groups, legend) = explanation_groups(&records);
    let (usable, small): (Vec<_>, Vec<_>) = groups.into_iter().partition(|(_, t)| t.len() >= 2);
    let skipped: Vec<(String, usize)> = small.into_iter().map(|(g, t)| (g, t.len())).collect();
    let comparison = match usable.first() {
        Some((reference, _)) => Some(group_comparison(&usable, &reference.clone(), &HeylighenDewaele)?),
        None => None,
    };
    let mut text = match &comparison {
        Some(c) => c.to_table(),
        None => "no LLM explanations to compare\n".to_string(),
    };
    for (g, key) in &legend {
        writeln!(text, "{g} = {key}").unwrap();
    }
    if comparison.iter().any(|c| c.row("control").is_some()) {
        writeln!(text, "control = zero-shot explanations").unwrap();
    }
    for (g, n) in &skipped {
        writeln!(text, "{g} skipped: {n} text(s), need at least 2").unwrap();
    }
    let json = serde_json::to_string_pretty(&Linguistics { legend, skipped, comparison })
        .expect("serializes");
    Ok((json, text))
}

pub fn report(ws: &ExperimentWorkspace, args: &ReportArgs) -> Result<ReportFiles> {
    let dir = args.out.clone().unwrap_or_else(|| ws.report_dir());
    let arm_stem = match &args.opts.subset {
        Some(expr) => format!("{ARM_REPORT}_{}", expr.replace(['=', ' ', '/'], "-")),
        None => ARM_REPORT.to_string(),
    };
    let names: Vec<String> = vec![
        format!("{arm_stem}.json"),
        format!("{arm_stem}.txt"),
        format!("{ALIGNMENT}.json"),
        format!("{ALIGNMENT}.txt"),
        ALIGNMENT_PLOT.to_string(),
        format!("{HELPFULNESS}.json"),
        format!("{HELPFULNESS}.txt"),
        format!("{LINGUISTICS}.json"),
        format!("{LINGUISTICS}.txt"),
    ];
    let paths: Vec<PathBuf> = names.iter().map(|n| dir.join(n)).collect();
    if !args.force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(CliError::Exists(p.clone()));
        }
    }

    let acc = accuracy_options(&ws.config, &args.opts);
    let loaded = load_frame(ws, &args.opts)?;
    let table = experiment_report(&loaded, &args.opts, &acc)?;
    let threshold = ws.config.alignment_threshold;

    let (align_json, align_txt, plot) = match alignment_regression(&loaded.frame, threshold, acc.uncertain) {
        Ok(a) => (
            serde_json::to_string_pretty(&a).expect("serializes"),
            a.summary(),
            a.plot_csv(20),
        ),
        Err(e) => (
            serde_json::to_string_pretty(&json!({"error": e.to_string()})).expect("serializes"),
            format!("alignment regression not available: {e}\n"),
            "series,user_id,x,y,lo,hi\n".to_string(),
        ),
    };
    let help = helpfulness_by_alignment(&loaded.frame, threshold);
    let (ling_json, ling_txt) = linguistics(ws, &loaded.snapshot)?;

    let mut table_txt = table.to_table();
    if let Some(w) = table.warning() {
        writeln!(table_txt, "warning: {w}").unwrap();
    }
    let contents = [
        table.to_json(),
        table_txt,
        align_json,
        align_txt,
        plot,
        serde_json::to_string_pretty(&help).expect("serializes"),
        help.to_table(),
        ling_json,
        ling_txt,
    ];
    for (path, body) in paths.iter().zip(contents) {
        write_new(path, &body, true)?;
    }
    Ok(ReportFiles { dir, files: paths })
}

pub fn recover(workspace: &Path, args: &RecoverArgs) -> Result<String> {
    let dir = args
        .log
        .clone()
        .unwrap_or_else(|| workspace.join(crate::workspace::LOG_DIR));
    let r = recover_log(&dir)?;
    Ok(format!(
        "{}: kept {} lines, set aside {} ({} torn tails); rejected lines are in *.rejected\n",
        dir.display(),
        r.kept,
        r.set_aside,
        r.torn_tails
    ))
}
