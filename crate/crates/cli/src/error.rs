use std::fmt;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Usage = 2,
    Input = 3,
    Numerical = 4,
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub source: anyhow::Error,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // sources already spelled out by their parent are skipped
        let mut msg = self.source.to_string();
        for cause in self.source.chain().skip(1) {
            let c = cause.to_string();
            if !msg.contains(&c) {
                msg = format!("{msg}: {c}");
            }
        }
        f.write_str(&msg)
    }
}

impl CliError {
    pub fn new(kind: Kind, source: impl Into<anyhow::Error>) -> Self {
        Self {
            kind,
            source: source.into(),
        }
    }

    pub fn code(&self) -> i32 {
        self.kind as i32
    }

    pub fn label(&self) -> &'static str {
        match self.kind {
            Kind::Usage => "usage",
            Kind::Input => "input",
            Kind::Numerical => "numerical",
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl fmt::Display) -> CliError {
    CliError::new(Kind::Usage, anyhow::anyhow!("{msg}"))
}

pub fn numerical(msg: impl fmt::Display) -> CliError {
    CliError::new(Kind::Numerical, anyhow::anyhow!("{msg}"))
}

/// Tag an error with its exit class.
pub trait Classify<T> {
    fn input(self) -> CliResult<T>;
    fn usage(self) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> CliResult<T> {
        self.map_err(|e| CliError::new(Kind::Input, e))
    }

    fn usage(self) -> CliResult<T> {
        self.map_err(|e| CliError::new(Kind::Usage, e))
    }
}

/// Class of a simulation error: bad operators and ill-conditioned
/// calibrations are numerical failures, everything else is bad input.
pub fn sim(e: qee_core::simulator::SimError) -> CliError {
    use qee_core::simulator::SimError;
    match e {
        SimError::NonHermitian(_) | SimError::Mitigation(_) => CliError::new(Kind::Numerical, e),
        _ => CliError::new(Kind::Input, e),
    }
}

pub fn vqe(e: qee_core::vqe::VqeError) -> CliError {
    match e {
        qee_core::vqe::VqeError::Sim(s) => sim(s),
        other => CliError::new(Kind::Input, other),
    }
}

pub fn mitigation(e: qee_core::mitigation::MitigationError) -> CliError {
    use qee_core::mitigation::MitigationError;
    match e {
        MitigationError::Sim(s) => sim(*s),
        MitigationError::Vqe(v) => vqe(*v),
        MitigationError::TooFewRepeats | MitigationError::Dimension { .. } => CliError::new(Kind::Input, e),
        other => CliError::new(Kind::Numerical, other),
    }
}

pub fn encode(e: qee_core::encoder::EncodeError) -> CliError {
    match e {
        qee_core::encoder::EncodeError::ImaginaryResidue(_) => CliError::new(Kind::Numerical, e),
        other => CliError::new(Kind::Input, other),
    }
}
