use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Duration;

use serde_json::{json, Value};
use surprisal_split::analysis::synth::{synthesize_amplitudes, SynthSpec};
use surprisal_split::analysis::{amplitudes_csv, fit_table, load_amplitudes, FitOptions};
use surprisal_split::experiment::{
    check_sweep_trend, decompose_all, lambda_grid, load_decomposition_report, load_stimuli,
    run_condition_experiment, run_lambda_sweep, surprisal_comparison, DecompositionReport,
    Stimulus,
};
use surprisal_split::noisy_channel::NoiseParams;
use surprisal_split::report::{emit_report, Provenance, Report};
use surprisal_split::scorer::{NgramScorer, RemoteConfig, RemoteScorer, Scorer};

use crate::args::{
    Command, CompareArgs, DecomposeArgs, EffectsArgs, FitArgs, NoiseArgs, OutputArgs,
    ScorerArgs, ScorerChoice, SweepArgs, SynthArgs,
};
use crate::error::CliError;

pub fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Decompose(args) => decompose(args),
        Command::Sweep(args) => sweep(args),
        Command::Effects(args) => effects(args),
        Command::Compare(args) => compare(args),
        Command::Fit(args) => fit(args),
        Command::SynthAmplitudes(args) => synth(args),
    }
}

fn check_scorer_args(args: &ScorerArgs) -> Result<(), CliError> {
    match args.scorer {
        ScorerChoice::Ngram => {
            if args.corpus.is_none() {
                return Err(CliError::Config("--scorer ngram needs --corpus".into()));
            }
            if args.order == 0 {
                return Err(CliError::Config("--order must be at least 1".into()));
            }
            if !(args.alpha.is_finite() && args.alpha > 0.0) {
                return Err(CliError::Config(format!("--alpha must be positive, got {}", args.alpha)));
            }
        }
        ScorerChoice::Remote => {
            if args.endpoint.is_none() {
                return Err(CliError::Config(
                    "--scorer remote needs --endpoint or SURPRISAL_SPLIT_LM_URL".into(),
                ));
            }
            if args.max_in_flight == 0 || args.timeout_secs == 0 || args.veridical_search_k == 0 {
                return Err(CliError::Config(
                    "--max-in-flight, --timeout-secs and --veridical-search-k must be positive".into(),
                ));
            }
        }
    }
    Ok(())
}

fn check_jobs(jobs: usize) -> Result<(), CliError> {
    if jobs == 0 {
        return Err(CliError::Config("--jobs must be at least 1".into()));
    }
    Ok(())
}

fn check_params(params: &NoiseParams) -> Result<(), CliError> {
    params.validate().map_err(|e| CliError::Config(e.to_string()))
}

fn build_scorer(args: &ScorerArgs) -> Result<Box<dyn Scorer>, CliError> {
    Ok(match args.scorer {
        ScorerChoice::Ngram => {
            let corpus = args.corpus.as_deref().expect("checked before");
            let scorer = NgramScorer::from_corpus_file(corpus, args.order, args.alpha)?;
            log::info!("trained {}-gram scorer on {} types", args.order, scorer.vocabulary_size());
            Box::new(scorer)
        }
        ScorerChoice::Remote => {
            let mut config = RemoteConfig::new(args.endpoint.clone().expect("checked before"));
            config.max_in_flight = args.max_in_flight;
            config.timeout = Duration::from_secs(args.timeout_secs);
            config.veridical_search_k = args.veridical_search_k;
            Box::new(RemoteScorer::connect(config)?)
        }
    })
}

/// Everything that determines a report's contents. Worker count and output
/// location are left out: they do not change the numbers.
fn scorer_echo(args: &ScorerArgs) -> Value {
    match args.scorer {
        ScorerChoice::Ngram => json!({
            "kind": "ngram",
            "corpus": args.corpus.as_ref().map(|p| p.display().to_string()),
            "order": args.order,
            "alpha": args.alpha,
        }),
        ScorerChoice::Remote => json!({
            "kind": "remote",
            "endpoint": args.endpoint,
            "veridical_search_k": args.veridical_search_k,
        }),
    }
}

fn noise_echo(noise: &NoiseArgs) -> Value {
    let params = noise.params(0.0);
    json!({
        "top_k": params.top_k,
        "distance_mode": params.distance_mode,
        "force_include_veridical": params.force_include_veridical,
    })
}

fn load(path: &Path) -> Result<Vec<Stimulus>, CliError> {
    let stimuli = load_stimuli(path)?;
    log::info!("loaded {} stimuli from {}", stimuli.len(), path.display());
    Ok(stimuli)
}

fn write_output(contents: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(path) => fs::write(path, contents)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::Io(format!("cannot write to standard output: {e}"))),
    }
}

fn emit(report: &dyn Report, output: &OutputArgs) -> Result<(), CliError> {
    let format = output.format();
    match &output.output {
        Some(path) => Ok(emit_report(report, format, path)?),
        None => write_output(&report.render(format), None),
    }
}

fn decompose(args: DecomposeArgs) -> Result<(), CliError> {
    let params = args.noise.params(args.lambda);
    check_params(&params)?;
    check_jobs(args.jobs)?;
    check_scorer_args(&args.scorer)?;

    let stimuli = load(&args.stimuli)?;
    let scorer = build_scorer(&args.scorer)?;
    let rows = decompose_all(&stimuli, scorer.as_ref(), &params, args.jobs)?;
    let echo = json!({
        "command": "decompose",
        "stimuli": args.stimuli.display().to_string(),
        "scorer": scorer_echo(&args.scorer),
        "noise": noise_echo(&args.noise),
        "lambda": args.lambda,
    });
    let report = DecompositionReport {
        provenance: Provenance::new(Some(scorer.descriptor()), echo),
        rows,
    };
    emit(&report, &args.output)
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    let grid = lambda_grid(&args.lambdas, args.with_endpoints);
    for &lambda in &grid {
        check_params(&args.noise.params(lambda))?;
    }
    check_jobs(args.jobs)?;
    check_scorer_args(&args.scorer)?;

    let stimuli = load(&args.stimuli)?;
    let scorer = build_scorer(&args.scorer)?;
    let mut report = run_lambda_sweep(&stimuli, scorer.as_ref(), &grid, &args.noise.params(0.0), args.jobs)?;
    report.provenance.config = json!({
        "command": "sweep",
        "stimuli": args.stimuli.display().to_string(),
        "scorer": scorer_echo(&args.scorer),
        "noise": noise_echo(&args.noise),
        "lambdas": grid,
    });
    emit(&report, &args.output)?;

    if grid.len() > 1 {
        let checks = check_sweep_trend(&report, args.trend_tolerance, args.max_reversals);
        for check in &checks {
            let quantity = serde_json::to_value(check.quantity).expect("quantity serializes");
            eprintln!(
                "trend {} {}: {} ({} reversal(s), largest {:.3e} nats)",
                check.condition,
                quantity.as_str().unwrap_or("?"),
                if check.pass { "PASS" } else { "FAIL" },
                check.reversals,
                check.largest_reversal,
            );
        }
    }
    Ok(())
}

fn effects(args: EffectsArgs) -> Result<(), CliError> {
    let params = args.noise.params(args.lambda);
    check_params(&params)?;
    check_jobs(args.jobs)?;
    check_scorer_args(&args.scorer)?;

    let stimuli = load(&args.stimuli)?;
    let scorer = build_scorer(&args.scorer)?;
    let mut report = run_condition_experiment(&stimuli, scorer.as_ref(), &params, args.jobs)?;
    report.provenance.config = json!({
        "command": "effects",
        "stimuli": args.stimuli.display().to_string(),
        "scorer": scorer_echo(&args.scorer),
        "noise": noise_echo(&args.noise),
        "lambda": args.lambda,
    });
    emit(&report, &args.output)
}

fn compare(args: CompareArgs) -> Result<(), CliError> {
    check_jobs(args.jobs)?;
    check_scorer_args(&args.scorer)?;

    let stimuli = load(&args.stimuli)?;
    let scorer = build_scorer(&args.scorer)?;
    let mut report = surprisal_comparison(&stimuli, scorer.as_ref(), args.jobs)?;
    report.provenance.config = json!({
        "command": "compare",
        "stimuli": args.stimuli.display().to_string(),
        "scorer": scorer_echo(&args.scorer),
    });
    emit(&report, &args.output)
}

fn fit(args: FitArgs) -> Result<(), CliError> {
    let decompositions = load_decomposition_report(&args.decompositions)?;
    let amplitudes = load_amplitudes(&args.amplitudes)?;
    let options = FitOptions {
        standardize: !args.no_standardize,
        item_means: args.item_means,
    };
    let provenance = Provenance::new(
        decompositions.provenance.scorer.clone(),
        json!({
            "command": "fit",
            "decompositions": args.decompositions.display().to_string(),
            "amplitudes": args.amplitudes.display().to_string(),
            "standardize": options.standardize,
            "item_means": options.item_means,
            "decomposition_config": decompositions.provenance.config,
        }),
    );
    let report = fit_table(&decompositions.rows, &amplitudes, options, provenance)?;
    emit(&report, &args.output)
}

fn synth(args: SynthArgs) -> Result<(), CliError> {
    let spec = SynthSpec {
        subjects: args.subjects,
        n400_intercept: args.n400_intercept,
        n400_slope: args.n400_slope,
        p600_intercept: args.p600_intercept,
        p600_slope: args.p600_slope,
        noise_sd: args.noise_sd,
        seed: args.seed,
    };
    let decompositions = load_decomposition_report(&args.decompositions)?;
    let records = synthesize_amplitudes(&decompositions.rows, &spec)?;
    write_output(&amplitudes_csv(&records), args.output.as_deref())
}
