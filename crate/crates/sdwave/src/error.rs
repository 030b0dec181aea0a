use thiserror::Error;

/// Failures surfaced by the command-line front end.
#[derive(Debug, Error)]
pub enum AppError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Core(#[from] sdwave_core::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl AppError {
    /// 3 for numerical failures, 2 for everything rejected up front.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            AppError::Config(_) => "config",
            AppError::Io(_) => "io",
            AppError::Core(e) => e.kind(),
            AppError::Csv(_) => "csv",
            AppError::Json(_) => "json",
        }
    }

    /// Single-line JSON diagnostic.
    pub fn diagnostic(&self) -> String {
        serde_json::json!({
            "exit": self.exit_code(),
            "kind": self.kind(),
            "message": self.to_string(),
        })
        .to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_follow_error_class() {
        assert_eq!(AppError::Config("x".into()).exit_code(), 2);
        let e = AppError::from(sdwave_core::Error::NewtonBudget("none".into()));
        assert_eq!(e.exit_code(), 3);
        let line = e.diagnostic();
        assert!(!line.contains('\n'));
        assert!(line.contains("\"kind\":\"newton_budget\""));
        assert_eq!(
            AppError::from(sdwave_core::Error::InvalidArgument("x".into())).exit_code(),
            2
        );
    }
}
