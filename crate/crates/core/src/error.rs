use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Format(String),

    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown metric `{name}`; valid metrics: {valid}")]
    UnknownMetric { name: String, valid: String },

    #[error("duplicate system id `{0}`")]
    DuplicateSystem(String),

    #[error("campaign has no runs")]
    EmptyCampaign,

    #[error("unknown topic `{0}`")]
    UnknownTopic(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("document `{doc}` on topic `{topic}` was not retrieved by any system")]
    UnretrievedDocument { topic: String, doc: String },

    #[error("no judged topics to evaluate")]
    NoJudgedTopics,

    #[error("{0}")]
    Undefined(String),
}

impl Error {
    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Error {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
