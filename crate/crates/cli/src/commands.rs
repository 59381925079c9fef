use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use cnc_core::attrition::{next_year_participation, ActivityKind};
use cnc_core::classify::{classify_per_challenge, ClassifyConfig, FeatureTransform, UserClass};
use cnc_core::data::{load_challenges, load_records, merge, ChallengeKey, Dataset, LoadMode};
use cnc_core::geo::{greenspace_fraction, load_layer, BBox, PolygonLayer};
use cnc_core::ingest::{fetch_all, FetchLimits, FetchOptions, HttpTransport, IngestQuery, ResponseCache, SystemClock};
use cnc_core::network::PowerOptions;
use cnc_core::report::{self, fmt_f64, CsvTable, OutputTree, ReportOptions, REFERENCE_TARGETS};
use cnc_core::synth::{generate, SynthParams};
use serde::Serialize;

use crate::config::RunConfig;
use crate::manifest::Manifest;
use crate::{
    AttritionArgs, ClassifyArgs, Cli, CliError, Command, DataArgs, GeoArgs, IngestArgs, KChoice, NetworkArgs, SynthArgs,
};

struct Ctx {
    cfg: RunConfig,
    seed: Option<u64>,
    out_dir: PathBuf,
    verbose: bool,
    record_timing: bool,
    started: Instant,
}

impl Ctx {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("cnc: {}", msg.as_ref());
        }
    }

    fn open_output(&self) -> Result<OutputTree, CliError> {
        OutputTree::create(&self.out_dir)
            .map_err(|e| CliError::Usage(format!("output directory {}: {e}", self.out_dir.display())))
    }

    /// Writes the manifest last so it can hash every other output.
    fn finish(&self, mut manifest: Manifest, out: &OutputTree) -> Result<(), CliError> {
        for w in &out.warnings {
            self.log(format!("warning: {w}"));
        }
        manifest.add_outputs(out.root(), out.files())?;
        if self.record_timing {
            manifest.wall_time_s = Some(self.started.elapsed().as_secs_f64());
        }
        manifest.write(out.root())?;
        println!("wrote {} files to {}", out.files().len() + 1, out.root().display());
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let out_dir = match (&cli.output_dir, &cfg.output_dir) {
        (Some(d), _) => d.clone(),
        (None, Some(d)) => cfg.resolve(d),
        (None, None) => PathBuf::from("cnc-out"),
    };
    let ctx = Ctx {
        seed: cli.seed.or(cfg.seed),
        cfg,
        out_dir,
        verbose: cli.verbose,
        record_timing: cli.record_timing,
        started: Instant::now(),
    };
    match cli.command {
        Command::Ingest(args) => ingest(&ctx, &args),
        Command::Validate { data } => validate(&ctx, &data),
        Command::Stats { data } => analysis(&ctx, "stats", &data, |ds, _, out| {
            report::stats_stage(ds, out)?;
            Ok(())
        }),
        Command::Classify { data, classify } => {
            let config = classify_config(&ctx, &classify);
            analysis(&ctx, "classify", &data, |ds, _, out| {
                report::classify_stage(ds, &config, out)?;
                Ok(())
            })
        }
        Command::Attrition { data, attrition } => {
            let (horizon, kind) = attrition_options(&ctx, &attrition);
            analysis(&ctx, "attrition", &data, |ds, _, out| Ok(report::attrition_stage(ds, horizon, kind, out)?))
        }
        Command::Geo { data, geo } => {
            let grid = grid_options(&ctx, &geo);
            analysis(&ctx, "geo", &data, |ds, layer, out| Ok(report::geo_stage(ds, &grid, layer.as_ref(), out)?))
        }
        Command::Network { data, classify, network } => {
            let opts = ReportOptions { classify: classify_config(&ctx, &classify), ..network_options(&ctx, &network)? };
            analysis(&ctx, "network", &data, |ds, _, out| {
                ctx.log("classifying users for the class columns");
                let run = classify_per_challenge(ds, &opts.classify);
                Ok(report::network_stage(ds, &opts, &report::class_maps(&run), out)?)
            })
        }
        Command::Synth(args) => synth(&ctx, &args),
        Command::Report { data, classify, attrition, geo, network, svg } => {
            let opts = report_options(&ctx, &classify, &attrition, &geo, &network, svg)?;
            analysis(&ctx, "report", &data, |ds, layer, out| {
                let opts = ReportOptions { layer, ..opts.clone() };
                report::run_report(ds, &opts, out)?;
                Ok(())
            })
        }
        Command::Replicate { data, classify } => {
            let defaults = AttritionArgs::default();
            let opts = report_options(&ctx, &classify, &defaults, &GeoArgs::default(), &NetworkArgs::default(), false)?;
            analysis(&ctx, "replicate", &data, |ds, layer, out| replicate(ds, layer, &opts, out))
        }
    }
}

fn classify_config(ctx: &Ctx, args: &ClassifyArgs) -> ClassifyConfig {
    let mut c = ctx.cfg.classify.clone();
    if let Some(seed) = ctx.seed {
        c.seed = seed;
    }
    match args.k {
        Some(KChoice::Auto) => c.k = None,
        Some(KChoice::Fixed(k)) => c.k = Some(k),
        None => {}
    }
    if let Some(r) = args.restarts {
        c.restarts = r;
    }
    if args.raw_features {
        c.transform = FeatureTransform::Raw;
    }
    c
}

fn attrition_options(ctx: &Ctx, args: &AttritionArgs) -> (usize, ActivityKind) {
    let horizon = args.horizon.unwrap_or(ctx.cfg.attrition.horizon);
    let kind = if args.observations_only { ActivityKind::ObservationsOnly } else { ctx.cfg.attrition.activity };
    (horizon, kind)
}

fn grid_options(ctx: &Ctx, args: &GeoArgs) -> report::GridOptions {
    let mut g = ctx.cfg.geo.clone();
    g.nx = args.grid_nx.unwrap_or(g.nx);
    g.ny = args.grid_ny.unwrap_or(g.ny);
    g
}

fn parse_challenge_key(s: &str) -> Result<ChallengeKey, CliError> {
    let bad = || CliError::Usage(format!("graph challenge {s:?}: expected CITY/YEAR"));
    let (city, year) = s.rsplit_once('/').ok_or_else(bad)?;
    Ok(ChallengeKey::new(city, year.parse().map_err(|_| bad())?))
}

fn network_options(ctx: &Ctx, args: &NetworkArgs) -> Result<ReportOptions, CliError> {
    let n = &ctx.cfg.network;
    let tol = args.tol.unwrap_or(n.tol);
    if !(tol.is_finite() && tol > 0.0) {
        return Err(CliError::Usage(format!("tolerance must be positive, got {tol}")));
    }
    let graph_challenge = match args.graph_challenge.as_ref().or(n.graph_challenge.as_ref()) {
        Some(s) => Some(parse_challenge_key(s)?),
        None => None,
    };
    Ok(ReportOptions {
        include_isolated: args.include_isolated || n.include_isolated,
        unweighted_degree: args.unweighted_degree || n.unweighted_degree,
        power: PowerOptions { tol, max_iter: args.max_iter.unwrap_or(n.max_iter) },
        graph_challenge,
        ..ReportOptions::default()
    })
}

fn report_options(
    ctx: &Ctx,
    classify: &ClassifyArgs,
    attrition: &AttritionArgs,
    geo: &GeoArgs,
    network: &NetworkArgs,
    svg: bool,
) -> Result<ReportOptions, CliError> {
    let (horizon, activity) = attrition_options(ctx, attrition);
    Ok(ReportOptions {
        classify: classify_config(ctx, classify),
        horizon,
        activity,
        grid: grid_options(ctx, geo),
        svg: svg || ctx.cfg.report.svg,
        ..network_options(ctx, network)?
    })
}

/// An input path as configured, plus where it lives on disk.
struct Input {
    label: PathBuf,
    path: PathBuf,
}

impl Input {
    fn from_cli(p: &Path) -> Self {
        Input { label: p.to_path_buf(), path: p.to_path_buf() }
    }

    fn from_config(ctx: &Ctx, p: &Path) -> Self {
        Input { label: p.to_path_buf(), path: ctx.cfg.resolve(p) }
    }

    fn checked(self) -> Result<Self, CliError> {
        if !self.path.is_file() {
            return Err(CliError::Usage(format!("input {} does not exist", self.path.display())));
        }
        Ok(self)
    }
}

struct Loaded {
    dataset: Dataset,
    layer: Option<PolygonLayer>,
}

fn load_inputs(ctx: &Ctx, args: &DataArgs, manifest: &mut Manifest) -> Result<Loaded, CliError> {
    let data = &ctx.cfg.data;
    let mode = if args.lenient { LoadMode::Lenient } else { data.mode };
    let mut sources = Vec::new();
    if args.records.is_empty() {
        for r in &data.records {
            sources.push((Input::from_config(ctx, &r.path).checked()?, r.format()?));
        }
    } else {
        for p in &args.records {
            let src = crate::config::RecordSource { path: p.clone(), format: None };
            sources.push((Input::from_cli(p).checked()?, src.format()?));
        }
    }
    if sources.is_empty() {
        return Err(CliError::Usage("no record files given (--records or [data].records)".into()));
    }
    let mut fragments = Vec::new();
    for (input, format) in &sources {
        ctx.log(format!("loading {}", input.path.display()));
        manifest.add_input(&input.label, &input.path)?;
        let frag = load_records(&input.path, *format, mode).map_err(|e| CliError::Data(e.to_string()))?;
        for issue in &frag.skipped {
            ctx.log(format!("{}:{}: skipped: {}", input.label.display(), issue.line, issue.reason));
        }
        fragments.push(frag);
    }
    let mut dataset = merge(&fragments);

    let challenges = match (&args.challenges, &data.challenges) {
        (Some(p), _) => Some(Input::from_cli(p).checked()?),
        (None, Some(p)) => Some(Input::from_config(ctx, p).checked()?),
        (None, None) => None,
    };
    if let Some(input) = challenges {
        manifest.add_input(&input.label, &input.path)?;
        for region in region_files(&input.path)? {
            let label = input.label.parent().unwrap_or(Path::new("")).join(&region);
            let path = input.path.parent().unwrap_or(Path::new("")).join(&region);
            manifest.add_input(&label, &Input { label: label.clone(), path }.checked()?.path)?;
        }
        let windows = load_challenges(&input.path).map_err(|e| CliError::Usage(e.to_string()))?;
        dataset = dataset.with_challenges(windows).map_err(|e| CliError::Usage(e.to_string()))?;
    }

    let layer = match (&args.layer, &data.layer) {
        (Some(p), _) => Some(Input::from_cli(p).checked()?),
        (None, Some(p)) => Some(Input::from_config(ctx, p).checked()?),
        (None, None) => None,
    };
    let layer = match layer {
        Some(input) => {
            manifest.add_input(&input.label, &input.path)?;
            Some(load_layer(&input.path).map_err(|e| CliError::Data(e.to_string()))?)
        }
        None => None,
    };
    Ok(Loaded { dataset, layer })
}

/// Region paths named in the fifth column of a challenge listing.
fn region_files(listing: &Path) -> Result<Vec<String>, CliError> {
    let text = fs::read_to_string(listing).map_err(|e| CliError::Usage(format!("{}: {e}", listing.display())))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split(',').nth(4).map(|r| r.trim().to_string()))
        .filter(|r| !r.is_empty())
        .collect())
}

fn analysis<F>(ctx: &Ctx, name: &str, args: &DataArgs, f: F) -> Result<(), CliError>
where
    F: FnOnce(&Dataset, Option<PolygonLayer>, &mut OutputTree) -> Result<(), CliError>,
{
    let seed = match name {
        "classify" | "network" | "report" | "replicate" => Some(ctx.seed.unwrap_or(ctx.cfg.classify.seed)),
        _ => ctx.seed,
    };
    let mut manifest = Manifest::new(name, seed);
    let loaded = load_inputs(ctx, args, &mut manifest)?;
    if loaded.dataset.challenges().is_empty() {
        return Err(CliError::Usage("no challenge windows given (--challenges or [data].challenges)".into()));
    }
    let mut out = ctx.open_output()?;
    ctx.log(format!("running {name}"));
    f(&loaded.dataset, loaded.layer, &mut out)?;
    ctx.finish(manifest, &out)
}

#[derive(Serialize)]
struct ValidationReport {
    observations: usize,
    identifications: usize,
    orphan_identifications: usize,
    duplicate_observations: usize,
    duplicate_identifications: usize,
    skipped_rows: usize,
    challenges: usize,
    violations: Vec<String>,
}

fn validate(ctx: &Ctx, args: &DataArgs) -> Result<(), CliError> {
    let mut manifest = Manifest::new("validate", ctx.seed);
    let loaded = load_inputs(ctx, args, &mut manifest)?;
    let ds = &loaded.dataset;
    let merge = ds.merge_report();
    let result = ValidationReport {
        observations: ds.observations().len(),
        identifications: ds.identifications().len(),
        orphan_identifications: ds.orphan_identifications().len(),
        duplicate_observations: merge.duplicate_observations,
        duplicate_identifications: merge.duplicate_identifications,
        skipped_rows: merge.skipped_rows,
        challenges: ds.challenges().len(),
        violations: ds.validate(),
    };
    let mut out = ctx.open_output()?;
    let mut text = serde_json::to_string_pretty(&result).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    out.write("validation.json", text.as_bytes())?;
    println!(
        "{} observations, {} identifications, {} orphaned, {} violations",
        result.observations,
        result.identifications,
        result.orphan_identifications,
        result.violations.len()
    );
    ctx.finish(manifest, &out)?;
    match result.violations.first() {
        Some(v) => Err(CliError::Data(format!("{} violations, first: {v}", result.violations.len()))),
        None => Ok(()),
    }
}

fn parse_date(s: &str, end_of_day: bool) -> Result<DateTime<Utc>, CliError> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Ok(t.with_timezone(&Utc));
    }
    let d = NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|_| CliError::Usage(format!("date {s:?}: expected RFC 3339 or YYYY-MM-DD")))?;
    let d = if end_of_day { d.succ_opt().expect("date in range") } else { d };
    Ok(Utc.from_utc_datetime(&d.and_hms_opt(0, 0, 0).expect("midnight")))
}

fn parse_bbox(s: &str) -> Result<BBox, CliError> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(format!("bbox {s:?}: {e}")))?;
    match v[..] {
        [a, b, c, d] => BBox::new(a, b, c, d).map_err(|e| CliError::Usage(format!("bbox {s:?}: {e}"))),
        _ => Err(CliError::Usage(format!("bbox {s:?}: expected min_lat,min_lon,max_lat,max_lon"))),
    }
}

fn ingest(ctx: &Ctx, args: &IngestArgs) -> Result<(), CliError> {
    let cfg = ctx.cfg.ingest.clone();
    let pick = |cli: &Option<String>, conf: Option<&String>, name: &str| {
        cli.clone().or_else(|| conf.cloned()).ok_or_else(|| CliError::Usage(format!("ingest needs --{name}")))
    };
    let endpoint = pick(&args.endpoint, cfg.as_ref().map(|c| &c.endpoint), "endpoint")?;
    let from = parse_date(&pick(&args.date_from, cfg.as_ref().map(|c| &c.date_from), "from")?, false)?;
    let to = parse_date(&pick(&args.date_to, cfg.as_ref().map(|c| &c.date_to), "to")?, true)?;
    let bbox = match args.bbox.as_ref().or(cfg.as_ref().and_then(|c| c.bbox.as_ref())) {
        Some(s) => Some(parse_bbox(s)?),
        None => None,
    };
    let query = IngestQuery {
        endpoint_base: endpoint,
        bbox,
        place_id: args.place_id.clone().or_else(|| cfg.as_ref().and_then(|c| c.place_id.clone())),
        date_from: from,
        date_to: to,
        page_size: args.page_size.or(cfg.as_ref().map(|c| c.page_size)).unwrap_or(200),
    };
    query.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let cache_dir = match (&args.cache_dir, cfg.as_ref().and_then(|c| c.cache_dir.as_ref())) {
        (Some(d), _) => Some(d.clone()),
        (None, Some(d)) => Some(ctx.cfg.resolve(d)),
        (None, None) => None,
    };
    let offline = args.offline || cfg.as_ref().is_some_and(|c| c.offline);
    if offline && cache_dir.is_none() {
        return Err(CliError::Usage("--offline needs a cache directory".into()));
    }
    let limits = FetchLimits {
        max_requests_per_minute: args.rate.or(cfg.as_ref().map(|c| c.max_requests_per_minute)).unwrap_or(60),
        max_retries: cfg.as_ref().map_or(5, |c| c.max_retries),
        ..FetchLimits::default()
    };
    let max_age = args.cache_max_age.or(cfg.as_ref().and_then(|c| c.cache_max_age_hours));
    let cache = cache_dir.map(|d| match max_age {
        Some(h) => ResponseCache::new(d).with_max_age(chrono::Duration::hours(h as i64)),
        None => ResponseCache::new(d),
    });
    let options = FetchOptions { limits, cache, offline };
    let mut transport = HttpTransport::new(Duration::from_secs(30)).map_err(|e| CliError::Internal(e.to_string()))?;
    let outcome = fetch_all(&query, &options, &mut transport, &mut SystemClock::default()).map_err(|e| match e {
        cnc_core::ingest::IngestError::InvalidQuery(_) | cnc_core::ingest::IngestError::CacheMiss(_) => {
            CliError::Usage(e.to_string())
        }
        _ => CliError::Data(e.to_string()),
    })?;
    let s = outcome.stats;
    ctx.log(format!("{} pages, {} requests, {} retries, {} cache hits", s.pages, s.requests, s.retries, s.cache_hits));
    let mut out = ctx.open_output()?;
    let mut bytes = Vec::new();
    outcome.fragment.write_jsonl(&mut bytes).map_err(|e| CliError::Internal(e.to_string()))?;
    out.write("fetched.jsonl", &bytes)?;
    let mut skipped = CsvTable::new(&["ordinal", "reason"]);
    for issue in &outcome.fragment.skipped {
        skipped.row([issue.line.to_string(), issue.reason.clone()]);
    }
    out.write("fetch_skipped.csv", &skipped.into_bytes()?)?;
    println!(
        "{} observations, {} identifications, {} skipped",
        outcome.fragment.observations.len(),
        outcome.fragment.identifications.len(),
        outcome.fragment.skipped.len()
    );
    ctx.finish(Manifest::new("ingest", None), &out)
}

fn synth(ctx: &Ctx, args: &SynthArgs) -> Result<(), CliError> {
    let mut manifest = Manifest::new("synth", None);
    let params_path = match (&args.params, &ctx.cfg.synth.params) {
        (Some(p), _) => Some(Input::from_cli(p).checked()?),
        (None, Some(p)) => Some(Input::from_config(ctx, p).checked()?),
        (None, None) => None,
    };
    let mut params = match &params_path {
        Some(input) => {
            manifest.add_input(&input.label, &input.path)?;
            SynthParams::load(&input.path).map_err(|e| CliError::Usage(e.to_string()))?
        }
        None => SynthParams::standard(42, 10_000),
    };
    if let Some(seed) = ctx.seed {
        params.seed = seed;
    }
    if let Some(n) = args.n_users.or(ctx.cfg.synth.n_users) {
        params.n_users = n;
    }
    manifest.seed = Some(params.seed);
    ctx.log(format!("generating {} users, seed {}", params.n_users, params.seed));
    let (dataset, truth) = generate(&params).map_err(|e| match e {
        cnc_core::synth::SynthError::Internal(_) => CliError::Internal(e.to_string()),
        _ => CliError::Usage(e.to_string()),
    })?;

    let mut out = ctx.open_output()?;
    let internal = |e: std::io::Error| CliError::Internal(e.to_string());
    let mut records = Vec::new();
    dataset.write_jsonl(&mut records).map_err(internal)?;
    out.write("records.jsonl", &records)?;
    out.write("challenges.csv", cnc_core::data::format_challenges(dataset.challenges()).as_bytes())?;
    let mut layer = serde_json::to_string_pretty(&params.greenspace_layer().to_geojson())
        .map_err(|e| CliError::Internal(e.to_string()))?;
    layer.push('\n');
    out.write("greenspace.geojson", layer.as_bytes())?;
    out.write("synth_params.toml", params.to_toml_string().as_bytes())?;

    let mut users = CsvTable::new(&[
        "user_id",
        "class",
        "join_kind",
        "joined_at",
        "dropout_month",
        "spatial",
        "window_observations",
        "window_identifications",
    ]);
    for u in &truth.users {
        users.row([
            u.user_id.clone(),
            u.class.as_str().to_string(),
            json_word(&u.join_kind)?,
            u.joined_at.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true),
            u.dropout_month.to_string(),
            json_word(&u.spatial)?,
            u.window_observations.to_string(),
            u.window_identifications.to_string(),
        ]);
    }
    out.write("truth_users.csv", &users.into_bytes()?)?;
    let mut edges = CsvTable::new(&["user_a", "user_b", "weight"]);
    for ((a, b), w) in &truth.edges {
        edges.row([a.clone(), b.clone(), w.to_string()]);
    }
    out.write("truth_edges.csv", &edges.into_bytes()?)?;
    let run = format!(
        "seed = {}\n\n[data]\nrecords = [{{ path = \"records.jsonl\" }}]\nchallenges = \"challenges.csv\"\nlayer = \"greenspace.geojson\"\n",
        params.seed
    );
    out.write("run.toml", run.as_bytes())?;
    ctx.finish(manifest, &out)
}

fn json_word<T: Serialize>(v: &T) -> Result<String, CliError> {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => Ok(s),
        other => Err(CliError::Internal(format!("unexpected enum encoding {other:?}"))),
    }
}

fn replicate(
    dataset: &Dataset,
    layer: Option<PolygonLayer>,
    opts: &ReportOptions,
    out: &mut OutputTree,
) -> Result<(), CliError> {
    let opts = ReportOptions { layer: layer.clone(), ..opts.clone() };
    let outcome = report::run_report(dataset, &opts, out)?;
    let mut observed: BTreeMap<&str, f64> = BTreeMap::new();
    observed.insert("share_users_one_observation", outcome.stats.share_one);
    observed.insert("share_users_one_to_five_observations", outcome.stats.share_one_to_five);
    for (label, share) in &outcome.stats.top_shares {
        let key = match label.as_str() {
            "50%" => "top_50pct_share",
            "20%" => "top_20pct_share",
            "10%" => "top_10pct_share",
            "1%" => "top_1pct_share",
            _ => continue,
        };
        observed.insert(key, *share);
    }
    let mut counts = [0usize; 4];
    for c in &outcome.classes.results {
        for row in 0..c.activities.len() {
            if let Some(cl) = c.class_of(row) {
                counts[cl as usize] += 1;
            }
        }
    }
    let total: usize = counts.iter().sum();
    if total > 0 {
        for cl in UserClass::ALL {
            let key = match cl {
                UserClass::LowActivity => "class_low_activity",
                UserClass::Observer => "class_observer",
                UserClass::Identifier => "class_identifier",
                UserClass::HighActivity => "class_high_activity",
            };
            observed.insert(key, counts[cl as usize] as f64 / total as f64);
        }
    }
    let windows = dataset.sorted_challenges();
    let returns: Vec<f64> = windows
        .iter()
        .filter_map(|a| {
            let b = windows.iter().find(|b| b.city == a.city && b.year == a.year + 1)?;
            next_year_participation(dataset, a, b).ok()
        })
        .collect();
    if let (Some(lo), Some(hi)) = (returns.iter().copied().reduce(f64::min), returns.iter().copied().reduce(f64::max)) {
        observed.insert("next_year_return_min", lo);
        observed.insert("next_year_return_max", hi);
    }
    if let (Some(layer), Some(w)) = (&layer, dataset.challenge(&ChallengeKey::new("london", 2020))) {
        if let Ok(g) = greenspace_fraction(dataset, layer, w) {
            observed.insert("london_2020_non_green", 1.0 - g.fraction);
        }
    }
    let mut table = CsvTable::new(&["measure", "reference", "observed", "difference"]);
    for &(name, reference) in REFERENCE_TARGETS {
        let (obs, diff) = match observed.get(name) {
            Some(&v) => (fmt_f64(v), fmt_f64(v - reference)),
            None => (String::new(), String::new()),
        };
        println!("{name:<40} reference {reference:>6.3}  observed {}", if obs.is_empty() { "-" } else { &obs });
        table.row([name.to_string(), fmt_f64(reference), obs, diff]);
    }
    out.write("replication.csv", &table.into_bytes()?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dates_accept_days_and_instants() {
        assert_eq!(parse_date("2020-04-24", false).unwrap(), Utc.with_ymd_and_hms(2020, 4, 24, 0, 0, 0).unwrap());
        assert_eq!(parse_date("2020-04-27", true).unwrap(), Utc.with_ymd_and_hms(2020, 4, 28, 0, 0, 0).unwrap());
        assert_eq!(
            parse_date("2020-04-24T10:00:00+02:00", false).unwrap(),
            Utc.with_ymd_and_hms(2020, 4, 24, 8, 0, 0).unwrap()
        );
        assert!(parse_date("24/04/2020", false).is_err());
    }

    #[test]
    fn bbox_and_challenge_key_parsing() {
        let b = parse_bbox("51.2, -0.6, 51.7, 0.3").unwrap();
        assert_eq!((b.min_lat, b.max_lon), (51.2, 0.3));
        assert!(parse_bbox("1,2,3").is_err());
        assert_eq!(parse_challenge_key("los angeles/2019").unwrap(), ChallengeKey::new("los angeles", 2019));
        assert!(parse_challenge_key("london").is_err());
    }
}
