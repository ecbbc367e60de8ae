use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use busched::baselines::{greedy_schedule, lns_improve, LnsConfig};
use busched::generator::{derive_instance, generate_instance, GeneratorConfig};
use busched::gantt::render_gantt;
use busched::io::{
    curve_csv, load_instance, load_scenario, load_schedule, reports_csv, save_instance,
    save_schedule, write_text,
};
use busched::model::{compute_objectives, validate_schedule};
use busched::online::{simulate_online, train_online, DecisionRecord, OnlineSource, TimeWindowConfig};
use busched::ppo::{
    config_hash, evaluate, load_params, save_params, train, Architecture, Objective, PolicyNet,
    SimSource, TrainConfig, TrainOutcome,
};
use busched::reward::RewardMode;
use busched::screening::ScreeningMode;
use busched::sim::{SimConfig, World};
use busched::{Mode, ObjectiveReport, ProblemInstance, Schedule, TravelOverride};

use crate::config::{Algorithm, ExperimentConfig};
use crate::{
    AblateArgs, Arms, Command, DeriveArgs, EvalArgs, ExperimentArgs, GenArgs, PlotArgs,
    RewardArg, SimulateOnlineArgs, Switch, TrainOnlineArgs, ValidateArgs,
};

pub fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Gen(a) => gen(a),
        Command::Derive(a) => derive(a),
        Command::Train(a) => train_offline(a),
        Command::TrainOnline(a) => train_online_cmd(a),
        Command::Eval(a) => eval(a),
        Command::SimulateOnline(a) => simulate(a),
        Command::Ablate(a) => ablate(a),
        Command::Plot(a) => plot(a),
        Command::Validate(a) => validate(a),
    }?;
    Ok(ExitCode::SUCCESS)
}

fn merged(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load_or_default(args.config.as_deref())?;
    if let Some(p) = &args.instance {
        cfg.instance = Some(p.clone());
    }
    if let Some(a) = args.algorithm {
        cfg.algorithm = a;
    }
    if let Some(r) = args.reward {
        cfg.reward_mode = match r {
            RewardArg::Combined => RewardMode::Combined,
            RewardArg::FinalOnly => RewardMode::FinalOnly,
        };
    }
    if let Some(s) = args.screening {
        cfg.screening = screening(s);
    }
    if let Some(e) = args.episodes {
        cfg.episodes = e;
    }
    if !args.seeds.is_empty() {
        cfg.seeds = args.seeds.clone();
    }
    if let Some(d) = &args.out_dir {
        cfg.output_dir = Some(d.clone());
    }
    Ok(cfg)
}

fn screening(s: Switch) -> ScreeningMode {
    match s {
        Switch::On => ScreeningMode::On,
        Switch::Off => ScreeningMode::Off,
    }
}

fn instance_of(cfg: &ExperimentConfig) -> Result<Arc<ProblemInstance>> {
    let path = cfg.instance()?;
    Ok(Arc::new(load_instance(path)?))
}

fn sim_config(cfg: &ExperimentConfig) -> SimConfig {
    let mut sc = SimConfig::offline();
    sc.reward.mode = cfg.reward_mode;
    sc.screening = cfg.screening;
    sc
}

fn train_config(cfg: &ExperimentConfig, seed: u64) -> TrainConfig {
    TrainConfig {
        episodes: cfg.episodes,
        seed,
        objective: match cfg.algorithm {
            Algorithm::Reinforce => Objective::Reinforce,
            _ => Objective::Ppo,
        },
        ..TrainConfig::default()
    }
}

fn print_table(rows: &[(String, ObjectiveReport)]) {
    let width = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0).max(5);
    println!("{:<width$}  {:>5}  {:>6}  {:>5}", "label", "N_u", "T_d", "N_d");
    for (label, r) in rows {
        println!(
            "{label:<width$}  {:>5}  {:>6}  {:>5}",
            r.n_used, r.deadhead_total, r.n_uncovered
        );
    }
}

fn seed_dir(out: &Path, seeds: &[u64], seed: u64) -> PathBuf {
    if seeds.len() == 1 {
        out.to_path_buf()
    } else {
        out.join(format!("seed-{seed}"))
    }
}

/// Writes model, curve and evaluated schedule for one training run.
fn write_training(dir: &Path, out: &TrainOutcome, hash: &str, schedule: &Schedule) -> Result<()> {
    save_params(&out.net, hash, &dir.join("model.json"))?;
    write_text(&dir.join("curve.csv"), &curve_csv(&out.curve))?;
    save_schedule(schedule, &dir.join("schedule.json"))?;
    Ok(())
}

fn gen(a: GenArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<GeneratorConfig>(&text)
                .with_context(|| format!("parsing generator config {}", p.display()))?
        }
        None => GeneratorConfig::default(),
    };
    if let Some(v) = a.lines {
        cfg.n_lines = v;
    }
    if let Some(v) = a.departures {
        cfg.departures_per_cp = v;
    }
    if let Some(v) = a.fleet {
        cfg.fleet_size = Some(v);
    }
    if let Some(v) = a.margin {
        cfg.fleet_margin = v;
    }
    if let Some(v) = a.deletion {
        cfg.deletion_fraction = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    let inst = generate_instance(&cfg)?;
    save_instance(&inst, &a.out)?;
    println!(
        "{}: {} control points, {} departures, fleet {}",
        a.out.display(),
        inst.n_cps(),
        inst.total_departures(),
        inst.fleet_size()
    );
    Ok(())
}

fn derive(a: DeriveArgs) -> Result<()> {
    let base = load_instance(&a.instance)?;
    let inst = derive_instance(&base, a.fraction, a.seed)?;
    save_instance(&inst, &a.out)?;
    println!(
        "{}: {} of {} departures kept",
        a.out.display(),
        inst.total_departures(),
        base.total_departures()
    );
    Ok(())
}

fn train_offline(a: ExperimentArgs) -> Result<()> {
    let cfg = merged(&a)?;
    cfg.validate()?;
    if !cfg.algorithm.learns() {
        bail!("train needs --algo ppo or reinforce; use eval for baselines");
    }
    if cfg.mode == Mode::Online {
        bail!("use train-online for the online controller");
    }
    let inst = instance_of(&cfg)?;
    let out = cfg.output_dir();
    let sc = sim_config(&cfg);
    let source = SimSource { world: World::new(inst), config: sc };
    let arch = Architecture::new(source.world.state_dim(sc.screening), source.world.n_slots(sc.screening));
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let tc = train_config(&cfg, seed);
        let outcome = train(&source, arch, &tc)?;
        let (episode, _) = evaluate(&source, &outcome.net)?;
        let dir = seed_dir(&out, &cfg.seeds, seed);
        write_training(&dir, &outcome, &config_hash(&(sc, tc)), &episode.schedule)?;
        rows.push((format!("seed-{seed}"), compute_objectives(&episode.schedule)));
    }
    write_text(&out.join("report.csv"), &reports_csv(&rows))?;
    print_table(&rows);
    Ok(())
}

fn load_offline_net(path: &Path, world: &World) -> Result<PolicyNet> {
    let loaded = load_params(
        path,
        world.state_dim(ScreeningMode::On),
        world.n_slots(ScreeningMode::On),
        None,
    )?;
    Ok(loaded.net)
}

fn train_online_cmd(a: TrainOnlineArgs) -> Result<()> {
    let mut cfg = merged(&a.common)?;
    cfg.mode = Mode::Online;
    cfg.algorithm = Algorithm::Ppo;
    if let Some(p) = a.offline_model {
        cfg.offline_model = Some(p);
    }
    if let Some(w) = a.window {
        cfg.window_minutes = w;
    }
    cfg.validate()?;
    let inst = instance_of(&cfg)?;
    let offline_path = cfg.offline_model.clone().context("train-online needs --offline-model")?;
    let offline = Arc::new(load_offline_net(&offline_path, &World::new(inst.clone()))?);
    let window = TimeWindowConfig { window_minutes: cfg.window_minutes };
    window.validate(&inst)?;
    let mut source = OnlineSource::new(inst, offline, window);
    source.config.reward.mode = cfg.reward_mode;
    let out = cfg.output_dir();
    let mut rows = Vec::new();
    for &seed in &cfg.seeds {
        let tc = train_config(&cfg, seed);
        let outcome = train_online(&source, &tc)?;
        let (episode, _) = evaluate(&source, &outcome.net)?;
        let dir = seed_dir(&out, &cfg.seeds, seed);
        write_training(&dir, &outcome, &config_hash(&(source.config, window, tc)), &episode.schedule)?;
        rows.push((format!("seed-{seed}"), compute_objectives(&episode.schedule)));
    }
    write_text(&out.join("report.csv"), &reports_csv(&rows))?;
    print_table(&rows);
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let cfg = merged(&a.common)?;
    cfg.validate()?;
    let inst = instance_of(&cfg)?;
    let out = cfg.output_dir();
    let algo = cfg.algorithm;
    let mut runs: Vec<(String, Schedule)> = Vec::new();
    match algo {
        Algorithm::Greedy => runs.push(("greedy".into(), greedy_schedule(inst.clone())?)),
        Algorithm::Lns => {
            let initial = greedy_schedule(inst.clone())?;
            for &seed in &cfg.seeds {
                let lc = LnsConfig { iterations: cfg.lns_iterations, seed, ..LnsConfig::default() };
                runs.push((format!("lns/seed-{seed}"), lns_improve(inst.clone(), &initial, &lc)?));
            }
        }
        Algorithm::Ppo | Algorithm::Reinforce => {
            let path = a.model.as_deref().context("eval with a learned policy needs --model")?;
            let sc = sim_config(&cfg);
            let world = World::new(inst.clone());
            let net = load_params(path, world.state_dim(sc.screening), world.n_slots(sc.screening), None)?.net;
            let (episode, _) = evaluate(&SimSource { world, config: sc }, &net)?;
            runs.push((format!("{algo:?}").to_lowercase(), episode.schedule));
        }
    }
    // objectives always come from the exported schedule
    let rows: Vec<_> = runs.iter().map(|(l, s)| (l.clone(), compute_objectives(s))).collect();
    let best = runs
        .iter()
        .zip(&rows)
        .min_by_key(|(_, (_, r))| r.lex_key())
        .map(|((_, s), _)| s)
        .expect("at least one run");
    save_schedule(best, &out.join("schedule.json"))?;
    write_text(&out.join("report.csv"), &reports_csv(&rows))?;
    print_table(&rows);
    Ok(())
}

fn orders_csv(log: &[DecisionRecord]) -> String {
    let mut s = String::from(
        "entry_index,issued_minute,bus_id,from_cp,to_cp,dispatch_minute,deadhead_minutes,trigger_minute\n",
    );
    for (i, o) in log.iter().flat_map(|d| d.orders.iter().map(move |o| (d.entry_index, o))) {
        let _ = writeln!(
            s,
            "{i},{},{},{},{},{},{},{}",
            o.issued_minute, o.bus_id, o.from_cp, o.to_cp, o.dispatch_minute, o.deadhead_minutes, o.trigger_minute
        );
    }
    s
}

fn simulate(a: SimulateOnlineArgs) -> Result<()> {
    let inst = Arc::new(load_instance(&a.instance)?);
    let world = World::new(inst.clone());
    let online = load_offline_net(&a.model, &world)?;
    let offline = match &a.offline_model {
        Some(p) => Arc::new(load_offline_net(p, &world)?),
        None => Arc::new(online.clone()),
    };
    let window = TimeWindowConfig { window_minutes: a.window };
    window.validate(&inst)?;
    let overrides: Vec<TravelOverride> = match (&a.scenario, a.disrupt_start) {
        (Some(p), _) => load_scenario(p)?,
        (None, Some(start)) => {
            if a.disrupt_length <= 0 || a.extra <= 0 {
                bail!("disruption length and extra minutes must be positive");
            }
            vec![TravelOverride { line_id: None, start, end: start + a.disrupt_length, extra_minutes: a.extra }]
        }
        (None, None) => Vec::new(),
    };
    let base = simulate_online(inst.clone(), &online, offline.clone(), window)?;
    let mut rows = vec![("undisrupted".to_string(), compute_objectives(&base.schedule))];
    let out = a.out_dir.clone().or_else(|| std::env::var_os("BUSCHED_OUT").map(PathBuf::from)).unwrap_or_else(|| "out".into());
    let last = if overrides.is_empty() {
        base
    } else {
        let disrupted = Arc::new(inst.with_overrides(overrides)?);
        let run = simulate_online(disrupted, &online, offline, window)?;
        rows.push(("disrupted".to_string(), compute_objectives(&run.schedule)));
        run
    };
    save_schedule(&last.schedule, &out.join("schedule.json"))?;
    write_text(&out.join("orders.csv"), &orders_csv(&last.log))?;
    write_text(&out.join("report.csv"), &reports_csv(&rows))?;
    print_table(&rows);
    Ok(())
}

fn ablate(a: AblateArgs) -> Result<()> {
    let base = merged(&a.common)?;
    if !base.algorithm.learns() {
        bail!("ablations compare learning runs; use --algo ppo or reinforce");
    }
    let arms: Vec<(&str, ExperimentConfig)> = match a.arms {
        Arms::Reward => vec![
            ("combined", ExperimentConfig { reward_mode: RewardMode::Combined, ..base.clone() }),
            ("final_only", ExperimentConfig { reward_mode: RewardMode::FinalOnly, ..base.clone() }),
        ],
        Arms::Screening => vec![
            ("screening_on", ExperimentConfig { screening: ScreeningMode::On, ..base.clone() }),
            ("screening_off", ExperimentConfig { screening: ScreeningMode::Off, ..base.clone() }),
        ],
    };
    let inst = instance_of(&base)?;
    let out = base.output_dir();
    let mut rows = Vec::new();
    for (name, cfg) in &arms {
        cfg.validate()?;
        let sc = sim_config(cfg);
        let source = SimSource { world: World::new(inst.clone()), config: sc };
        let dim = source.world.state_dim(sc.screening);
        let arch = Architecture::new(dim, source.world.n_slots(sc.screening));
        for &seed in &cfg.seeds {
            let tc = train_config(cfg, seed);
            let started = Instant::now();
            let outcome = train(&source, arch, &tc)?;
            let per_episode = started.elapsed().as_secs_f64() / tc.episodes as f64;
            let file = if cfg.seeds.len() == 1 {
                format!("curve_{name}.csv")
            } else {
                format!("curve_{name}_seed-{seed}.csv")
            };
            write_text(&out.join(file), &curve_csv(&outcome.curve))?;
            // wall-clock stays out of the CSVs so reruns are byte-identical
            println!("{name} seed {seed}: state dim {dim}, {:.2} ms/episode", per_episode * 1e3);
            rows.push((format!("{name}/seed-{seed}"), outcome.evaluation.report));
        }
    }
    write_text(&out.join("report.csv"), &reports_csv(&rows))?;
    print_table(&rows);
    Ok(())
}

fn plot(a: PlotArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let doc = load_schedule(&a.schedule)?;
    let svg = render_gantt(&doc.schedule, &inst)?;
    write_text(&a.out, &svg)?;
    println!("{}", a.out.display());
    Ok(())
}

fn validate(a: ValidateArgs) -> Result<()> {
    let inst = load_instance(&a.instance)?;
    let doc = load_schedule(&a.schedule)?;
    let violations = validate_schedule(&inst, &doc.schedule);
    if violations.is_empty() {
        println!("ok: {}", compute_objectives(&doc.schedule));
        return Ok(());
    }
    for v in &violations {
        println!("{v}");
    }
    bail!("{} violation(s) in {}", violations.len(), a.schedule.display())
}
