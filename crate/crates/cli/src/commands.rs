use conformal::batch::{bartels_rvn, compose_p_variable};
use conformal::betting::{BettingMartingale, MartingaleState};
use conformal::changedetect::{DetectorState, Procedure};
use conformal::datasets::{
    load_absenteeism, load_usps, load_values, permute, synth_stream, SyntheticSpec,
};
use conformal::evidence::{jeffreys_category_log10, EvidenceCategory};
use conformal::nonconformity::{
    Euclidean, IdentityScore, KnnDifference, KnnRatio, MedianScore, NonconformityMeasure,
};
use conformal::pvalues::{
    ConformalTransducer, IncrementalIdentity, IncrementalKnn, KnnMode, OnlineScorer, Rescoring,
};
use conformal::randomness::derive_seed;
use conformal::upperprob::{
    stirling_checks, ucp_bracket, uep_prob, uiid_prob, verify_prop1, verify_prop2, EventSet,
};
use conformal::Observation;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{BatchArgs, DetectArgs, DistanceKind, Format, MartingaleArgs, Ncm, OracleArgs, OracleOp, StreamArgs};
use crate::output::{log10_capital, print_json, write_csv, write_jsonl, Capital, RunRecord};
use crate::Failure;

type CliResult<T> = Result<T, Failure>;

fn load_stream(a: &StreamArgs, seed: u64) -> CliResult<Vec<Observation>> {
    if a.format != Format::Synthetic && a.change_point.is_some() {
        return Err(Failure::config("--change-point only applies to --format synthetic"));
    }
    let input = || {
        a.input.as_deref().ok_or_else(|| {
            Failure::config(format!("--input is required for --format {:?}", a.format).to_lowercase())
        })
    };
    let stream = match a.format {
        Format::Usps => load_usps(input()?)?,
        Format::Absenteeism => load_absenteeism(input()?, false)?,
        Format::AbsenteeismExtended => load_absenteeism(input()?, true)?,
        Format::Values => load_values(input()?)?,
        Format::Synthetic => synth_stream(&SyntheticSpec {
            pre: a.generator.clone(),
            post: a.post_generator.clone().unwrap_or_else(|| a.generator.clone()),
            change_point: a.change_point,
            length: a.length,
            seed: derive_seed(seed, 1),
        })
        .map_err(|e| Failure::config(format!("--generator: {e}")))?,
    };
    if stream.is_empty() {
        return Err(Failure::data("input contains no observations"));
    }
    Ok(stream)
}

fn check_ncm(ncm: Ncm, first: &Observation) -> CliResult<()> {
    match ncm {
        Ncm::KnnRatio | Ncm::KnnDiff if first.label.is_none() => Err(Failure::config(
            "--ncm knn-ratio/knn-diff needs labelled observations",
        )),
        Ncm::Identity | Ncm::Median if first.dim() != 1 => Err(Failure::config(
            "--ncm identity/median needs scalar observations",
        )),
        _ => Ok(()),
    }
}

fn online_scorer(ncm: Ncm, distance: DistanceKind) -> Box<dyn OnlineScorer> {
    let DistanceKind::Euclidean = distance;
    match ncm {
        Ncm::KnnRatio => Box::new(IncrementalKnn::new(Euclidean, KnnMode::Ratio)),
        Ncm::KnnDiff => Box::new(IncrementalKnn::new(Euclidean, KnnMode::Difference)),
        Ncm::Identity => Box::new(IncrementalIdentity::new()),
        Ncm::Median => Box::new(Rescoring::new(MedianScore)),
    }
}

fn batch_measure(ncm: Ncm, distance: DistanceKind) -> Box<dyn NonconformityMeasure> {
    let DistanceKind::Euclidean = distance;
    match ncm {
        Ncm::KnnRatio => Box::new(KnnRatio(Euclidean)),
        Ncm::KnnDiff => Box::new(KnnDifference(Euclidean)),
        Ncm::Identity => Box::new(IdentityScore),
        Ncm::Median => Box::new(MedianScore),
    }
}

#[derive(Debug, Serialize)]
struct Summary {
    seed: u64,
    n: usize,
    #[serde(rename = "S")]
    s: Capital,
    #[serde(rename = "log10_S")]
    log10_s: Option<f64>,
    jeffreys_category: Option<EvidenceCategory>,
    #[serde(skip_serializing_if = "Option::is_none")]
    detector: Option<DetectorSummary>,
}

#[derive(Debug, Serialize)]
struct DetectorSummary {
    procedure: Procedure,
    threshold: f64,
    alarms: Vec<usize>,
    alarm_frequency: f64,
}

fn run_once(
    a: &MartingaleArgs,
    detector: Option<(Procedure, f64)>,
    stream: Vec<Observation>,
    seed: u64,
    records: Option<&mut Vec<RunRecord>>,
) -> CliResult<Summary> {
    check_ncm(a.ncm, &stream[0])?;
    let mut transducer = ConformalTransducer::new(online_scorer(a.ncm, a.distance), seed);
    let mut martingale = BettingMartingale::new(a.strategy.build()?);
    let mut det = detector.map(|(p, c)| DetectorState::new(p, c)).transpose()?;
    let mut records = records;
    let n = stream.len();
    for z in stream {
        let p = transducer.step(z)?;
        let (state, ln_ratio) = martingale.feed(p)?;
        let (stat, alarm) = match det.as_mut() {
            Some(d) => {
                let alarm = d.step_ln_ratio(ln_ratio)?;
                (Some(d.peak()), alarm)
            }
            None => (None, false),
        };
        if let Some(out) = records.as_deref_mut() {
            out.push(RunRecord {
                n: state.step,
                p,
                s: Capital::of(&state),
                log10_s: log10_capital(&state),
                r_or_w: stat,
                alarm,
            });
        }
    }
    let state: MartingaleState = martingale.state();
    let log10_s = log10_capital(&state);
    Ok(Summary {
        seed,
        n,
        s: Capital::of(&state),
        log10_s,
        jeffreys_category: log10_s.map(jeffreys_category_log10).transpose()?,
        detector: det.map(|d| DetectorSummary {
            procedure: d.procedure(),
            threshold: d.threshold(),
            alarm_frequency: d.alarm_frequency().unwrap_or(0.0),
            alarms: d.alarms().to_vec(),
        }),
    })
}

#[derive(Debug, Serialize)]
struct MonteCarloSummary {
    runs: usize,
    #[serde(rename = "mean_log10_S")]
    mean_log10_s: f64,
    #[serde(rename = "fraction_S_above_1")]
    fraction_s_above_1: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pooled_alarm_frequency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    runs_with_alarm_after_change: Option<usize>,
    results: Vec<Summary>,
}

pub fn martingale(a: &MartingaleArgs, detector: Option<(Procedure, f64)>) -> CliResult<()> {
    if let Some(k) = a.monte_carlo {
        return monte_carlo(a, detector, k);
    }
    let mut stream = load_stream(&a.stream, a.seed)?;
    if let Some(ps) = a.stream.permute_seed {
        stream = permute(&stream, ps);
    }
    let mut records = Vec::new();
    let summary = run_once(a, detector, stream, a.seed, Some(&mut records))?;
    if let Some(path) = &a.out {
        write_jsonl(path, &records)?;
    }
    if let Some(path) = &a.csv {
        write_csv(path, &records)?;
    }
    if a.out.as_deref().is_some_and(|p| p.as_os_str() == "-") {
        eprintln!("{}", serde_json::to_string_pretty(&summary).expect("serializable summary"));
    } else {
        print_json(&summary);
    }
    Ok(())
}

fn monte_carlo(a: &MartingaleArgs, detector: Option<(Procedure, f64)>, runs: usize) -> CliResult<()> {
    if runs == 0 {
        return Err(Failure::config("--monte-carlo must be positive"));
    }
    if a.out.is_some() || a.csv.is_some() {
        return Err(Failure::config("--out and --csv cannot be combined with --monte-carlo"));
    }
    let file_stream = match a.stream.format {
        Format::Synthetic => None,
        _ => Some(load_stream(&a.stream, a.seed)?),
    };
    let results = (0..runs as u64)
        .into_par_iter()
        .map(|i| {
            let seed = derive_seed(a.seed, i);
            let mut stream = match &file_stream {
                Some(s) => s.clone(),
                None => load_stream(&a.stream, seed)?,
            };
            if let Some(ps) = a.stream.permute_seed {
                stream = permute(&stream, derive_seed(ps, i));
            }
            run_once(a, detector, stream, seed, None)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let logs: Vec<f64> = results.iter().map(|r| r.log10_s.unwrap_or(f64::NEG_INFINITY)).collect();
    let detector_runs: Vec<&DetectorSummary> = results.iter().filter_map(|r| r.detector.as_ref()).collect();
    let pooled = (!detector_runs.is_empty()).then(|| {
        let alarms: usize = detector_runs.iter().map(|d| d.alarms.len()).sum();
        let steps: usize = results.iter().map(|r| r.n).sum();
        alarms as f64 / steps as f64
    });
    let after_change = match (a.stream.change_point, pooled) {
        (Some(t), Some(_)) => {
            Some(detector_runs.iter().filter(|d| d.alarms.iter().any(|&n| n > t)).count())
        }
        _ => None,
    };
    print_json(&MonteCarloSummary {
        runs,
        mean_log10_s: logs.iter().sum::<f64>() / runs as f64,
        fraction_s_above_1: logs.iter().filter(|&&l| l > 0.0).count() as f64 / runs as f64,
        pooled_alarm_frequency: pooled,
        runs_with_alarm_after_change: after_change,
        results,
    });
    Ok(())
}

pub fn detect(a: &DetectArgs) -> CliResult<()> {
    if !(a.threshold > 1.0) || a.threshold.is_infinite() {
        return Err(Failure::config(format!(
            "--threshold must be a finite number greater than 1, got {}",
            a.threshold
        )));
    }
    martingale(&a.run, Some((a.procedure, a.threshold)))
}

pub fn batch(a: &BatchArgs) -> CliResult<()> {
    let mut stream = load_stream(&a.stream, a.seed)?;
    if let Some(ps) = a.stream.permute_seed {
        stream = permute(&stream, ps);
    }
    check_ncm(a.ncm, &stream[0])?;
    let measure = batch_measure(a.ncm, a.distance);
    let mut result = None;
    compose_p_variable(
        |scores: &[f64]| {
            let r = bartels_rvn(scores, a.sided)?;
            result = Some(r);
            Ok(r.p_value)
        },
        measure.as_ref(),
        &stream,
    )
    .map_err(|e| match e {
        conformal::Error::Domain(m) => Failure::data(m),
        other => other.into(),
    })?;
    print_json(&result.expect("test ran"));
    Ok(())
}

fn load_event(a: &OracleArgs) -> CliResult<EventSet> {
    let path = a
        .event
        .as_deref()
        .ok_or_else(|| Failure::config(format!("--event is required for --op {:?}", a.op).to_lowercase()))?;
    let event = EventSet::load(path)?;
    if let Some(n) = a.n {
        if n != event.horizon() {
            return Err(Failure::config(format!(
                "--N {n} does not match the event file horizon {}",
                event.horizon()
            )));
        }
    }
    Ok(event)
}

fn require_n(a: &OracleArgs) -> CliResult<usize> {
    a.n.ok_or_else(|| Failure::config(format!("--N is required for --op {:?}", a.op).to_lowercase()))
}

#[derive(Serialize)]
struct ValueReport {
    op: &'static str,
    #[serde(rename = "N")]
    n: usize,
    value: f64,
}

#[derive(Serialize)]
struct BracketReport {
    op: &'static str,
    #[serde(rename = "N")]
    n: usize,
    lower: f64,
    upper: f64,
}

pub fn oracle(a: &OracleArgs) -> CliResult<()> {
    match a.op {
        OracleOp::Uiid => {
            let e = load_event(a)?;
            print_json(&ValueReport { op: "uiid", n: e.horizon(), value: uiid_prob(&e) });
        }
        OracleOp::Uep => {
            let e = load_event(a)?;
            print_json(&ValueReport { op: "uep", n: e.horizon(), value: uep_prob(&e) });
        }
        OracleOp::Ucp => {
            let e = load_event(a)?;
            let b = ucp_bracket(&e);
            print_json(&BracketReport { op: "ucp", n: e.horizon(), lower: b.lower, upper: b.upper });
        }
        OracleOp::Prop1 => print_json(&verify_prop1(require_n(a)?, a.trials, a.seed)?),
        OracleOp::Prop2 => print_json(&verify_prop2(require_n(a)?, a.theta_runs, a.trials, a.seed)?),
        OracleOp::Stirling => print_json(&stirling_checks(a.n.unwrap_or(1000))),
    }
    Ok(())
}
