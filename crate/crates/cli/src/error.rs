use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("unknown item '{item}'; closest ids: {}", suggestions.join(", "))]
    Lookup { item: String, suggestions: Vec<String> },

    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: kf_core::Error,
    },

    #[error(transparent)]
    Core(#[from] kf_core::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Config => 2,
            ErrorKind::Data => 3,
            ErrorKind::Numerical => 4,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ErrorKind::Config => "config",
            ErrorKind::Data => "data",
            ErrorKind::Numerical => "numerical",
        }
    }
}

fn core_kind(e: &kf_core::Error) -> ErrorKind {
    use kf_core::Error as E;
    match e {
        E::Parameter(_) | E::Expression(_) => ErrorKind::Config,
        E::Numerical(_) | E::DegenerateKernel(_) => ErrorKind::Numerical,
        E::Repeat { source, .. } => core_kind(source),
        _ => ErrorKind::Data,
    }
}

impl CliError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            CliError::Config(_) => ErrorKind::Config,
            CliError::Lookup { .. } | CliError::Io(_) | CliError::Json(_) => ErrorKind::Data,
            CliError::Data { source, .. } => core_kind(source),
            CliError::Core(e) => core_kind(e),
        }
    }

    /// Single-line JSON written to stderr on failure.
    pub fn to_json(&self) -> String {
        let kind = self.kind();
        let mut body = json!({
            "error": {
                "kind": kind.name(),
                "code": kind.exit_code(),
                "message": self.to_string(),
            }
        });
        if let CliError::Lookup { suggestions, .. } = self {
            body["error"]["suggestions"] = json!(suggestions);
        }
        body.to_string()
    }
}

impl CliError {
    pub fn data(context: impl Into<String>) -> impl FnOnce(kf_core::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Data { context, source }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).kind().exit_code(), 2);
        let data = CliError::Core(kf_core::Error::Format("bad".into()));
        assert_eq!(data.kind().exit_code(), 3);
        let nested = CliError::Core(kf_core::Error::Repeat {
            index: 2,
            source: Box::new(kf_core::Error::Numerical("nan".into())),
        });
        assert_eq!(nested.kind().exit_code(), 4);
        let v: serde_json::Value = serde_json::from_str(&nested.to_json()).unwrap();
        assert_eq!(v["error"]["kind"], "numerical");
    }
}
