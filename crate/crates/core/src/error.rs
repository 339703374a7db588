use thiserror::Error;

/// Errors raised while building or querying a [`GameTree`](crate::efg::GameTree).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum GameError {
    #[error("game must have at least one player")]
    NoPlayers,
    #[error("chance node has invalid outcome probabilities (sum {sum})")]
    InvalidChance { sum: f64 },
    #[error("terminal carries {got} utilities, expected {expected}")]
    UtilityArity { got: usize, expected: usize },
    #[error("decision node for player {player} out of range")]
    UnknownPlayer { player: usize },
    #[error("decision node with no actions in infostate `{key}`")]
    NoActions { key: String },
    #[error("nodes of infostate `{key}` expose different action lists")]
    InconsistentActions { key: String },
    #[error("nodes of infostate `{key}` have different histories for their owner (imperfect recall)")]
    ImperfectRecall { key: String },
    #[error("profile does not cover infostate `{key}` of player {player}")]
    MissingInfostate { player: usize, key: String },
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid game configuration: {0}")]
    Config(String),
    #[error("normal-form conversion needs {required} pure profiles, cap is {cap} (per-player counts {counts:?})")]
    TooLarge {
        required: f64,
        cap: usize,
        counts: Vec<f64>,
    },
    #[error("analytic formula undefined for eta = {eta}")]
    Domain { eta: f64 },
}

/// Errors from the regret-minimization kernel and solver.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("reward vector has length {got}, expected {expected}")]
    RewardLength { got: usize, expected: usize },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("unknown algorithm tag `{0}`")]
    UnknownAlgorithm(String),
}

/// Errors from the marginalizability metrics.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error("trace is empty")]
    EmptyTrace,
    #[error("numeric degeneracy at terminal {terminal}: d = {d}, mu = {mu}")]
    Degenerate { terminal: usize, d: f64, mu: f64 },
    #[error("size mismatch: {0}")]
    Size(String),
    #[error(
        "bound certificate failed: nash_gap {nash_gap} > cce_gap {cce_gap} + 2*{max_utility}*sqrt(2*{efm}) (slack {slack})"
    )]
    Certificate {
        nash_gap: f64,
        cce_gap: f64,
        efm: f64,
        max_utility: f64,
        slack: f64,
    },
}

/// Errors from the differentiation tape.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TapeError {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("logarithm of negative value {value}")]
    Domain { value: f64 },
    #[error("backward needs a scalar loss, got {rows}x{cols}")]
    NonScalar { rows: usize, cols: usize },
}

/// Errors from meta-training the regret predictor.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Tape(#[from] TapeError),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("training diverged at epoch {epoch}: loss {loss}, {floored_logs} floored logarithms, {nonfinite_grads} non-finite gradient entries")]
    Divergence {
        epoch: usize,
        loss: f64,
        floored_logs: usize,
        nonfinite_grads: usize,
    },
}

/// Errors from reading or writing predictor checkpoints.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CheckpointError {
    #[error("i/o error on `{path}`: {detail}")]
    Io { path: String, detail: String },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint format version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("corrupt checkpoint payload: {0}")]
    Corrupt(String),
}
