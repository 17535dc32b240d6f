use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::Serialize;
use skillrecall_core::fm::GibbsConfig;
use skillrecall_core::synth::{self, GeneratorParams, SyntheticConfig};
use skillrecall_core::*;

use crate::args::*;
use crate::output::{sidecar_path, write_atomic, write_json_atomic, ManifestBuilder};

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn flags<T: Serialize>(args: &T) -> serde_json::Value {
    serde_json::to_value(args).unwrap_or(serde_json::Value::Null)
}

/// A `.json` path is a prepared dataset; anything else is a raw log.
fn load_dataset(input: &InputArgs) -> Result<Dataset> {
    if input.input.extension().is_some_and(|e| e == "json") {
        return Dataset::read_json(BufReader::new(File::open(&input.input)?));
    }
    let format: DatasetFormat = input.format.parse()?;
    load_interactions(&input.input, format)
}

fn windows(args: &WindowArgs) -> Result<WindowSet> {
    args.windows.parse()
}

fn train_config(fit: &FitArgs, seed: u64) -> TrainConfig {
    TrainConfig {
        logistic: LogisticConfig {
            l2_strength: fit.l2,
            seed,
            ..LogisticConfig::default()
        },
        gibbs: GibbsConfig::with_iterations(fit.iters, seed),
        mode: if fit.point_estimate {
            PredictionMode::PointEstimate
        } else {
            PredictionMode::ChainAverage
        },
    }
}

fn read_model(path: &Path) -> Result<TrainedModel> {
    TrainedModel::read_json(BufReader::new(File::open(path)?))
}

pub fn prepare(args: &PrepareArgs, seed: u64) -> Result<()> {
    let mut manifest = ManifestBuilder::new("prepare", flags(args), seed);
    manifest.input(&args.input.input)?;
    let mut raw = load_dataset(&args.input)?;
    if let Some(path) = &args.qmatrix {
        manifest.input(path)?;
        let pairs = read_qmatrix_pairs(BufReader::new(File::open(path)?))?;
        raw.apply_qmatrix(pairs.iter().map(|(i, k)| (i.as_str(), k.as_str())));
    }
    let dataset = preprocess(&raw, args.min_interactions)?;
    let stats = dataset_stats(&dataset);
    info!(
        "kept {} of {} interactions from {} students",
        stats.interactions,
        raw.interaction_count(),
        stats.users
    );
    write_atomic(&args.out, |w| dataset.write_json(w))?;
    write_json_atomic(&sidecar_path(&args.out, "stats.json"), &stats)?;
    manifest.finish(&args.out, false)
}

pub fn stats(args: &StatsArgs, seed: u64) -> Result<()> {
    let dataset = load_dataset(&args.input)?;
    let report = dataset_stats(&dataset);
    if let Some(w) = &report.warning {
        warn!("{w}");
    }
    match &args.out {
        Some(out) => {
            let mut manifest = ManifestBuilder::new("stats", flags(args), seed);
            manifest.input(&args.input.input)?;
            write_json_atomic(out, &report)?;
            manifest.finish(out, false)
        }
        None => {
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}

pub fn encode(args: &EncodeArgs, seed: u64) -> Result<()> {
    let mut manifest = ManifestBuilder::new("encode", flags(args), seed);
    manifest.input(&args.input.input)?;
    let dataset = load_dataset(&args.input)?;
    let spec = ModelSpec::promoted(args.model.parse()?, args.dim, windows(&args.windows)?)?;
    let design = encode_dataset(&dataset, &spec)?;
    info!("{} rows, {} features", design.len(), design.n_features());
    write_atomic(&args.out, |w| design.write_sparse(w))?;
    let sidecar = EncodedSidecar {
        spec,
        layout: design.layout.clone(),
        vocabulary: Vocabulary::from(&dataset),
        rows: design.len(),
    };
    write_json_atomic(&sidecar_path(&args.out, "json"), &sidecar)?;
    manifest.finish(&args.out, false)
}

pub fn train_cmd(args: &TrainArgs, seed: u64) -> Result<()> {
    let mut manifest = ManifestBuilder::new("train", flags(args), seed);
    let sidecar_file = sidecar_path(&args.encoded, "json");
    manifest.input(&args.encoded)?;
    manifest.input(&sidecar_file)?;
    let sidecar: EncodedSidecar = serde_json::from_reader(BufReader::new(File::open(&sidecar_file)?))?;
    let dim = args.dim.unwrap_or(sidecar.spec.dim);
    let spec = ModelSpec::promoted(sidecar.spec.family, dim, sidecar.spec.windows.clone())?;
    let layout = feature_layout(&spec, sidecar.vocabulary.dims())?;
    if layout.n_features != sidecar.layout.n_features {
        return Err(Error::Dimension("sidecar layout does not match its vocabulary".into()));
    }
    let rows = read_sparse(BufReader::new(File::open(&args.encoded)?), layout.n_features)?;
    if rows.len() != sidecar.rows {
        return Err(Error::Dimension(format!(
            "sidecar announces {} rows, file has {}",
            sidecar.rows,
            rows.len()
        )));
    }
    let design = DesignMatrix { spec, layout, rows };
    let model = train(&design, &sidecar.vocabulary, &train_config(&args.fit, seed))?;
    if !model.training.converged {
        warn!("optimizer stopped at the iteration cap");
    }
    write_atomic(&args.out, |w| model.write_json(w))?;
    manifest.finish(&args.out, false)
}

pub fn cv(args: &CvArgs, seed: u64) -> Result<()> {
    let mut manifest = ManifestBuilder::new("cv", flags(args), seed);
    manifest.input(&args.input.input)?;
    let dataset = load_dataset(&args.input)?;
    let windows = windows(&args.windows)?;
    let mut specs = Vec::new();
    for name in &args.models {
        let family: ModelFamily = name.parse()?;
        for &dim in &args.dims {
            let spec = ModelSpec::promoted(family, dim, windows.clone())?;
            if !specs.contains(&spec) {
                specs.push(spec);
            }
        }
    }
    let config = CvConfig {
        folds: args.folds,
        seed,
        train: train_config(&args.fit, seed),
        keep_linear_models: true,
    };
    let run = cross_validate(&dataset, &specs, &config)?;
    for r in &run.table.results {
        for w in &r.warnings {
            warn!("{} d={}: {w}", r.family, r.dim);
        }
    }

    std::fs::create_dir_all(&args.out)?;
    write_json_atomic(&args.out.join("metrics.json"), &run.table)?;
    let text = run.table.to_text();
    write_atomic(&args.out.join("metrics.txt"), |w| Ok(w.write_all(text.as_bytes())?))?;
    let model_dir = args.out.join("models");
    for (spec, folds) in &run.models {
        for fm in folds {
            let path = model_dir.join(format!("{}-d{}-fold{}.json", spec.family, spec.dim, fm.fold));
            write_atomic(&path, |w| fm.model.write_json(w))?;
        }
    }
    print!("{text}");
    manifest.finish(&args.out, true)
}

pub fn ablate(args: &AblateArgs, seed: u64) -> Result<()> {
    let dataset = load_dataset(&args.input)?;
    let name = args.name.clone().unwrap_or_else(|| {
        args.input
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let config = CvConfig {
        folds: args.folds,
        seed,
        train: TrainConfig {
            logistic: LogisticConfig {
                l2_strength: args.l2,
                seed,
                ..LogisticConfig::default()
            },
            ..TrainConfig::default()
        },
        keep_linear_models: false,
    };
    let report = ablation_suite(&dataset, &name, &windows(&args.windows)?, &config)?;
    for c in &report.comparisons {
        match &c.delta {
            Some(d) => eprintln!("{}: {} - {} = {:+.4} ± {:.4}", c.name, c.baseline, c.variant, d.mean, d.std),
            None => eprintln!("{}: undefined", c.name),
        }
    }
    let csv = report.to_csv();
    match &args.out {
        Some(out) => {
            let mut manifest = ManifestBuilder::new("ablate", flags(args), seed);
            manifest.input(&args.input.input)?;
            write_atomic(out, |w| Ok(w.write_all(csv.as_bytes())?))?;
            manifest.finish(out, false)
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn model_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let nested = dir.join("models");
    let dir = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    files.sort();
    Ok(files)
}

pub fn slopes(args: &SlopesArgs, seed: u64) -> Result<()> {
    let mut manifest = ManifestBuilder::new("analyze slopes", flags(args), seed);
    let pairing: SlopePairing = args.pairing.parse()?;
    let mut models = Vec::new();
    for path in model_files(&args.model_dir)? {
        let Ok(model) = read_model(&path) else { continue };
        if model.spec.family == ModelFamily::Das3h && model.spec.dim == 0 {
            manifest.input(&path)?;
            models.push(model);
        }
    }
    if models.is_empty() {
        return Err(config_err(format!(
            "no d = 0 das3h models under {}",
            args.model_dir.display()
        )));
    }
    let report = forgetting_slopes(&models, pairing)?;
    for e in &report.entries {
        if let Some(w) = &e.warning {
            warn!("skill {}: {w}", e.skill);
        }
    }
    if args.out.extension().is_some_and(|e| e == "json") {
        write_json_atomic(&args.out, &report)?;
    } else {
        let csv = report.to_csv();
        write_atomic(&args.out, |w| Ok(w.write_all(csv.as_bytes())?))?;
    }
    manifest.finish(&args.out, false)
}

fn read_history(path: &Path, vocabulary: &Vocabulary) -> Result<Vec<HistoryEvent>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| config_err("history file is empty"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| config_err(format!("history needs column `{name}`")))
    };
    let (ci, cd, cc) = (find("item")?, find("day")?, find("correct")?);
    let mut events = Vec::new();
    for (n, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |c: usize| {
            fields
                .get(c)
                .copied()
                .ok_or_else(|| Error::Parse { line: n + 1, message: "missing field".into() })
        };
        let item = vocabulary.item_index(get(ci)?).ok_or_else(|| Error::Parse {
            line: n + 1,
            message: format!("unknown item `{}`", fields[ci]),
        })?;
        let timestamp: f64 = get(cd)?.parse().map_err(|_| Error::Parse {
            line: n + 1,
            message: format!("bad day `{}`", fields[cd]),
        })?;
        let correct = match get(cc)? {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("correct must be 0 or 1, got `{other}`"),
                })
            }
        };
        events.push(HistoryEvent { item, timestamp, correct });
    }
    events.sort_by(|a, b| a.timestamp.total_cmp(&b.timestamp));
    Ok(events)
}

#[derive(Serialize)]
struct RecallAnswer<'a> {
    student: Option<&'a str>,
    skills: &'a [String],
    item: Option<&'a str>,
    day: f64,
    probability: f64,
}

pub fn recall(args: &RecallArgs) -> Result<()> {
    let model = read_model(&args.model)?;
    let vocab = &model.vocabulary;
    let skills = args
        .skills
        .iter()
        .map(|s| vocab.skill_index(s).ok_or_else(|| config_err(format!("unknown skill `{s}`"))))
        .collect::<Result<Vec<_>>>()?;
    let student = args
        .student
        .as_deref()
        .map(|s| vocab.student_index(s).ok_or_else(|| config_err(format!("unknown student `{s}`"))))
        .transpose()?;
    let item = args
        .item
        .as_deref()
        .map(|j| vocab.item_index(j).ok_or_else(|| config_err(format!("unknown item `{j}`"))))
        .transpose()?;
    let history = match &args.history {
        Some(path) => read_history(path, vocab)?,
        None => Vec::new(),
    };
    let probability = recall_probability(&model, student, &history, &skills, item, args.at_day)?;
    let answer = RecallAnswer {
        student: args.student.as_deref(),
        skills: &args.skills,
        item: args.item.as_deref(),
        day: args.at_day,
        probability,
    };
    println!("{}", serde_json::to_string(&answer)?);
    Ok(())
}

pub fn schedule_sim(args: &ScheduleSimArgs, seed: u64) -> Result<()> {
    let mut manifest = ManifestBuilder::new("schedule-sim", flags(args), seed);
    manifest.input(&args.model)?;
    let model = read_model(&args.model)?;
    let policies = match args.policy.as_str() {
        "both" => vec![Policy::Threshold, Policy::Random],
        other => vec![other.parse()?],
    };
    let scheduler = SchedulerConfig::for_model(&model, args.threshold)?;
    let mut csv = String::from("seed,policy,skill,recall\n");
    let mut means: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for i in 0..args.seeds {
        let sim = SimulationConfig {
            horizon_days: args.horizon,
            session_interval_days: args.session_interval,
            items_per_session: args.items_per_session,
            students: args.students,
            seed: seed.wrapping_add(i),
            ..SimulationConfig::default()
        };
        for &policy in &policies {
            let report = simulate_policy(&model, policy, &scheduler, &sim)?;
            for (skill, r) in &report.per_skill {
                csv.push_str(&format!("{},{policy},{skill},{r:.6}\n", sim.seed));
            }
            means.entry(policy.to_string()).or_default().push(report.mean_recall);
        }
    }
    for (policy, values) in &means {
        let s = Summary::of(values).expect("at least one seed");
        println!("{policy:<10} mean end-of-horizon recall {:.4} ± {:.4} over {} seeds", s.mean, s.std, s.count);
    }
    if let (Some(t), Some(r)) = (means.get("threshold"), means.get("random")) {
        let wins = t.iter().zip(r).filter(|(a, b)| a > b).count();
        println!("threshold ahead on {wins} of {} seeds", t.len());
    }
    write_atomic(&args.out, |w| Ok(w.write_all(csv.as_bytes())?))?;
    manifest.finish(&args.out, false)
}

pub fn generate(args: &GenerateArgs, seed: u64) -> Result<()> {
    let manifest = ManifestBuilder::new("generate", flags(args), seed);
    let config = if args.fixture {
        SyntheticConfig::fixture()
    } else {
        SyntheticConfig {
            students: args.students,
            skills: args.skills,
            items_per_skill: args.items_per_skill,
            multi_skill_items: args.multi_skill_items,
            interactions_per_student: args.interactions,
            forgetting: !args.no_forgetting,
            seed,
            ..SyntheticConfig::default()
        }
    };
    let params = GeneratorParams::sample(&config)?;
    let dataset = synth::simulate_dataset(&params, &config)?;
    write_atomic(&args.out, |w| write_generic(&dataset, w))?;
    if let Some(path) = &args.generator_out {
        let model = params.to_model()?;
        write_atomic(path, |w| model.write_json(w))?;
    }
    manifest.finish(&args.out, false)
}
