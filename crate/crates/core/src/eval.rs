//! Accuracy experiments: history generation, the three predictors over a
//! fresh test set, per-path accuracy, frequency ranks and CSV reports.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::baselines::{build_tm, ip_predict, tm_ranking, TransitionMatrix};
use crate::grid::{ApId, GridError, GridTopology};
use crate::miner::{predict_next_ap, MinerError, PatternDatabase, ScoringConfig};
use crate::mobility::{gen_region_path, MobilePath, MobilityError, RegionPathParams};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("path has no transitions to score")]
    EmptyPrediction,
    #[error("cannot parse predicted path `{text}`: {reason}")]
    Parse { text: String, reason: String },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Miner(#[from] MinerError),
    #[error(transparent)]
    Mobility(#[from] MobilityError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Ltdps,
    Tm,
    Ip,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Ltdps, Scheme::Tm, Scheme::Ip];
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Ltdps => "LTDPS",
            Scheme::Tm => "TM",
            Scheme::Ip => "IP",
        })
    }
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "LTDPS" => Ok(Scheme::Ltdps),
            "TM" => Ok(Scheme::Tm),
            "IP" => Ok(Scheme::Ip),
            other => Err(format!("unknown scheme `{other}` (expected LTDPS, TM or IP)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub history_size: usize,
    pub test_paths: usize,
    pub path: RegionPathParams,
    pub schemes: Vec<Scheme>,
    pub grid: GridTopology,
    pub scoring: ScoringConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            history_size: 10_000,
            test_paths: 10,
            path: RegionPathParams::default(),
            schemes: Scheme::ALL.to_vec(),
            grid: GridTopology::default(),
            scoring: ScoringConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.history_size == 0 {
            return Err(EvalError::Config("history_size must be at least 1".into()));
        }
        if self.test_paths == 0 {
            return Err(EvalError::Config("test_paths must be at least 1".into()));
        }
        if self.schemes.is_empty() {
            return Err(EvalError::Config("at least one scheme is required".into()));
        }
        self.path.validate()?;
        Ok(())
    }
}

/// One scored transition. `rank` is the position of the actual AP in the
/// scheme's ordering; 1 means the prediction was right.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub predicted: ApId,
    pub actual: ApId,
    pub rank: usize,
}

impl Transition {
    pub fn correct(&self) -> bool {
        self.predicted == self.actual
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub original: MobilePath,
    pub predicted: Vec<Transition>,
}

impl PathResult {
    pub fn correct(&self) -> usize {
        self.predicted.iter().filter(|t| t.correct()).count()
    }

    pub fn errors(&self) -> usize {
        self.predicted.len() - self.correct()
    }

    /// Worst rank over the path; 1 iff every prediction was right.
    pub fn max_freq_deviation(&self) -> usize {
        self.predicted.iter().map(|t| t.rank).max().unwrap_or(1)
    }

    /// Predicted path in `7→1(2, 2)→6→0(1, 2)` notation: a wrong guess
    /// shows as `predicted(actual, rank)` and the walk continues from the
    /// actual AP.
    pub fn predicted_path(&self) -> String {
        let mut out = self.original.steps().first().map(|s| s.ap.to_string()).unwrap_or_default();
        for t in &self.predicted {
            out.push('→');
            if t.correct() {
                out.push_str(&t.actual.to_string());
            } else {
                out.push_str(&format!("{}({}, {})", t.predicted, t.actual, t.rank));
            }
        }
        out
    }
}

/// Fraction of correct transitions.
pub fn path_accuracy(result: &PathResult) -> Result<f64, EvalError> {
    if result.predicted.is_empty() {
        return Err(EvalError::EmptyPrediction);
    }
    Ok(result.correct() as f64 / result.predicted.len() as f64)
}

/// Whole-percent display value.
pub fn accuracy_percent(accuracy: f64) -> u32 {
    (accuracy * 100.0).round() as u32
}

/// Parses the predicted-path notation back into the original AP sequence
/// and its transitions. Accepts `→` or `->` as separators.
pub fn parse_predicted_path(text: &str) -> Result<(Vec<ApId>, Vec<Transition>), EvalError> {
    let fail = |reason: &str| EvalError::Parse { text: text.to_string(), reason: reason.to_string() };
    let ap = |s: &str| s.trim().parse::<u16>().map(ApId).map_err(|_| fail("AP ids must be integers"));
    let normalized = text.replace("->", "→");
    let mut tokens = normalized.split('→');
    let first = tokens.next().filter(|t| !t.trim().is_empty()).ok_or_else(|| fail("empty"))?;
    let mut aps = vec![ap(first)?];
    let mut transitions = Vec::new();
    for token in tokens {
        let token = token.trim();
        let t = match token.split_once('(') {
            None => {
                let a = ap(token)?;
                Transition { predicted: a, actual: a, rank: 1 }
            }
            Some((pred, rest)) => {
                let inner = rest.strip_suffix(')').ok_or_else(|| fail("unclosed parenthesis"))?;
                let (actual, rank) = inner.split_once(',').ok_or_else(|| fail("expected `(actual, rank)`"))?;
                let rank = rank.trim().parse::<usize>().map_err(|_| fail("rank must be an integer"))?;
                Transition { predicted: ap(pred)?, actual: ap(actual)?, rank }
            }
        };
        aps.push(t.actual);
        transitions.push(t);
    }
    Ok((aps, transitions))
}

/// What the predictors learn from the history.
#[derive(Debug, Clone)]
pub struct Databases {
    pub patterns: PatternDatabase,
    pub tm: TransitionMatrix,
}

impl Databases {
    pub fn build(history: &[MobilePath], grid: &GridTopology) -> Result<Self, EvalError> {
        Ok(Self { patterns: PatternDatabase::from_paths(history, grid)?, tm: build_tm(history, grid)? })
    }
}

/// Scores `scheme` on every transition of every test path, always
/// predicting from the actual previous AP.
///
/// LTDPS ranks the candidate set of the actual next region, TM ranks its
/// transition-matrix row (an AP absent from the row gets rank
/// `ap_count`), IP guesses uniformly and ranks 1 when right, otherwise the
/// neighbour count.
pub fn evaluate_scheme(
    scheme: Scheme,
    dbs: &Databases,
    test_set: &[MobilePath],
    grid: &GridTopology,
    scoring: &ScoringConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PathResult>, EvalError> {
    let mut results = Vec::with_capacity(test_set.len());
    for path in test_set {
        let mut predicted = Vec::with_capacity(path.len().saturating_sub(1));
        for w in path.steps().windows(2) {
            let (from, to) = (w[0], w[1]);
            let t = match scheme {
                Scheme::Ltdps => {
                    let candidates = grid.candidate_next_aps(from.ap, to.region)?;
                    let p = predict_next_ap(&dbs.patterns, from.ap, &candidates, scoring)?;
                    Transition {
                        predicted: p.ap,
                        actual: to.ap,
                        rank: p.rank_of(to.ap).unwrap_or(candidates.len() + 1),
                    }
                }
                Scheme::Tm => {
                    let ranking = tm_ranking(&dbs.tm, grid, from.ap)?;
                    let rank = ranking.iter().position(|a| *a == to.ap).map_or(grid.ap_count(), |i| i + 1);
                    Transition { predicted: ranking[0], actual: to.ap, rank }
                }
                Scheme::Ip => {
                    let guess = ip_predict(grid, from.ap, rng)?;
                    let rank = if guess == to.ap { 1 } else { grid.ap_neighbors(from.ap)?.len() };
                    Transition { predicted: guess, actual: to.ap, rank }
                }
            };
            predicted.push(t);
        }
        results.push(PathResult { original: path.clone(), predicted });
    }
    Ok(results)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchemeReport {
    pub scheme: Scheme,
    pub results: Vec<PathResult>,
}

impl SchemeReport {
    /// Mean of the per-path accuracies.
    pub fn mean_accuracy(&self) -> f64 {
        let sum: f64 = self.results.iter().filter_map(|r| path_accuracy(r).ok()).sum();
        sum / self.results.len().max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub seed: u64,
    pub history_size: usize,
    pub test_set: Vec<MobilePath>,
    pub schemes: Vec<SchemeReport>,
}

const HISTORY_STREAM: u64 = 0;
const TEST_STREAM: u64 = 1;
const IP_STREAM: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Generates `count` paths from stream `id` of `seed`.
pub fn generate_paths(
    grid: &GridTopology,
    params: &RegionPathParams,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<MobilePath>, EvalError> {
    (0..count).map(|_| gen_region_path(grid, params, rng).map_err(EvalError::from)).collect()
}

/// The paths `run_experiment` uses as history for this configuration.
pub fn history_for(cfg: &ExperimentConfig) -> Result<Vec<MobilePath>, EvalError> {
    generate_paths(&cfg.grid, &cfg.path, cfg.history_size, &mut stream(cfg.seed, HISTORY_STREAM))
}

/// History, test set and the IP guesses come from separate streams of the
/// seed, so adding a scheme or resizing one set leaves the others intact.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, EvalError> {
    cfg.validate()?;
    let history = history_for(cfg)?;
    let test_set = generate_paths(&cfg.grid, &cfg.path, cfg.test_paths, &mut stream(cfg.seed, TEST_STREAM))?;
    let dbs = Databases::build(&history, &cfg.grid)?;
    let mut ip_rng = stream(cfg.seed, IP_STREAM);
    let mut schemes = Vec::with_capacity(cfg.schemes.len());
    for &scheme in &cfg.schemes {
        let results = evaluate_scheme(scheme, &dbs, &test_set, &cfg.grid, &cfg.scoring, &mut ip_rng)?;
        schemes.push(SchemeReport { scheme, results });
    }
    Ok(ExperimentReport { seed: cfg.seed, history_size: history.len(), test_set, schemes })
}

/// Runs one experiment per seed on up to `threads` worker threads; results
/// come back in seed order.
pub fn run_many(base: &ExperimentConfig, seeds: &[u64], threads: usize) -> Vec<Result<ExperimentReport, EvalError>> {
    let threads = threads.clamp(1, seeds.len().max(1));
    let chunk = seeds.len().div_ceil(threads).max(1);
    std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                scope.spawn(move || {
                    part.iter()
                        .map(|&seed| run_experiment(&ExperimentConfig { seed, ..base.clone() }))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("experiment thread panicked")).collect()
    })
}

const REPORT_NOTE: &str = "# rank = position of the actual AP in the scheme's ordering; \
IP ranks 1 when correct, otherwise the neighbour count; TM ranks an unseen AP at the AP count";

impl ExperimentReport {
    pub fn scheme(&self, scheme: Scheme) -> Option<&SchemeReport> {
        self.schemes.iter().find(|s| s.scheme == scheme)
    }

    /// One row per scheme and test path, preceded by a `#` note line.
    pub fn write_report_csv<W: Write>(&self, mut out: W) -> Result<(), EvalError> {
        writeln!(out, "{REPORT_NOTE}")?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scheme", "path_index", "original_path", "predicted_path", "accuracy_pct", "error_count"])?;
        for s in &self.schemes {
            for (i, r) in s.results.iter().enumerate() {
                let pct = path_accuracy(r).map(accuracy_percent)?;
                w.write_record([
                    s.scheme.to_string(),
                    (i + 1).to_string(),
                    r.original.arrow_string(),
                    r.predicted_path(),
                    pct.to_string(),
                    r.errors().to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// One row per scheme; list columns are `;`-separated.
    pub fn write_summary_csv<W: Write>(&self, out: W) -> Result<(), EvalError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["scheme", "mean_accuracy", "accuracy_per_path", "max_freq_deviation"])?;
        for s in &self.schemes {
            let per_path: Vec<String> = s
                .results
                .iter()
                .map(|r| path_accuracy(r).map(|a| accuracy_percent(a).to_string()))
                .collect::<Result<_, _>>()?;
            let deviation: Vec<String> = s.results.iter().map(|r| r.max_freq_deviation().to_string()).collect();
            w.write_record([
                s.scheme.to_string(),
                format!("{:.1}", 100.0 * s.mean_accuracy()),
                per_path.join(";"),
                deviation.join(";"),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}
