//! Failures and their process exit codes. The table is part of the public
//! interface; codes are never reused.

use std::fmt;

use loopshift::codec::CodecError;
use loopshift::loopgraph::LoopGraphError;
use loopshift::shiftspec::SpecError;
use loopshift::spectral::SpectralError;
use loopshift::transform::TransformError;

pub const OK: i32 = 0;
pub const INTERNAL: i32 = 1;
pub const USAGE: i32 = 2;
pub const IO: i32 = 3;
pub const SPEC: i32 = 4;
pub const VERIFICATION: i32 = 60;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, kind: &'static str, message: impl Into<String>) -> Self {
        Failure {
            code,
            kind,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new(USAGE, "Usage", message)
    }

    pub fn verification(message: impl Into<String>) -> Self {
        Self::new(VERIFICATION, "VerificationFailed", message)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::new(IO, "Io", e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::new(INTERNAL, "Internal", e.to_string())
    }
}

impl From<SpecError> for Failure {
    fn from(e: SpecError) -> Self {
        match e {
            SpecError::LoopGraph(inner) => inner.into(),
            SpecError::Parse { .. } => Failure::new(SPEC, "ParseError", e.to_string()),
            _ => Failure::new(SPEC, "InvalidSpec", e.to_string()),
        }
    }
}

impl From<SpectralError> for Failure {
    fn from(e: SpectralError) -> Self {
        let (code, kind) = match e {
            SpectralError::ZeroSeries => (30, "ZeroSeries"),
            SpectralError::EntropyAtOrBelowZero => (31, "EntropyAtOrBelowZero"),
            SpectralError::Inconclusive { .. } => (32, "Inconclusive"),
            SpectralError::PeriodMismatch(_) => (33, "SpectralPeriodMismatch"),
            SpectralError::InvalidTolerance => (34, "InvalidTolerance"),
        };
        Failure::new(code, kind, e.to_string())
    }
}

impl From<CodecError> for Failure {
    fn from(e: CodecError) -> Self {
        let (code, kind) = match e {
            CodecError::UnknownSymbol(_) => (40, "UnknownSymbol"),
            CodecError::NoMagicWord => (41, "NoMagicWord"),
            CodecError::AmbiguousParse(_) => (42, "AmbiguousParse"),
            CodecError::NotInImage(_) => (43, "NotInImage"),
            CodecError::NotRecurrent { .. } => (44, "NotRecurrent"),
        };
        Failure::new(code, kind, e.to_string())
    }
}

impl From<LoopGraphError> for Failure {
    fn from(e: LoopGraphError) -> Self {
        let (code, kind) = match e {
            LoopGraphError::LoopNotFound => (50, "LoopNotFound"),
            LoopGraphError::BudgetExceedsDegree { .. } => (51, "BudgetExceedsDegree"),
            LoopGraphError::TooManyLoops(_) => (52, "TooManyLoops"),
            LoopGraphError::NotIrreducible(_) => (53, "NotIrreducible"),
            LoopGraphError::BadMatrix => (54, "BadMatrix"),
        };
        Failure::new(code, kind, e.to_string())
    }
}

impl From<TransformError> for Failure {
    fn from(e: TransformError) -> Self {
        let (code, kind) = match &e {
            TransformError::Spectral(inner) => return inner.clone().into(),
            TransformError::EntropyMismatch { .. } => (10, "EntropyMismatch"),
            TransformError::PeriodMismatch { .. } => (11, "PeriodMismatch"),
            TransformError::NotSpr(_) => (12, "NotSpr"),
            TransformError::NoValidBeta { .. } => (13, "NoValidBeta"),
            TransformError::CommonSeriesMismatch(_) => (14, "CommonSeriesMismatch"),
            TransformError::NoValidN(_) => (15, "NoValidN"),
            TransformError::NegativeCoefficient(_) => (16, "NegativeCoefficient"),
            TransformError::PositivityViolated(_) => (17, "PositivityViolated"),
            TransformError::MagicWordUnavailable(_) => (18, "MagicWordUnavailable"),
            TransformError::BudgetExceeded(_) => (19, "BudgetExceeded"),
            TransformError::Degenerate => (20, "Degenerate"),
            TransformError::SplitMismatch(_) => (21, "SplitMismatch"),
        };
        Failure::new(code, kind, e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeSet;

    use super::*;
    use loopshift::transform::Side;

    #[test]
    fn every_variant_has_its_own_code() {
        let transform = [
            TransformError::EntropyMismatch { f_lo: 1.0, f_hi: 1.0, g_lo: 2.0, g_hi: 2.0 },
            TransformError::PeriodMismatch { f: 1, g: 2 },
            TransformError::NotSpr(Side::F),
            TransformError::NoValidBeta { gamma: 1.0, lambda: 1.0 },
            TransformError::CommonSeriesMismatch(1),
            TransformError::NoValidN(1),
            TransformError::NegativeCoefficient(1),
            TransformError::PositivityViolated(1),
            TransformError::MagicWordUnavailable(String::new()),
            TransformError::BudgetExceeded(String::new()),
            TransformError::Degenerate,
            TransformError::SplitMismatch(1),
        ];
        let spectral = [
            SpectralError::ZeroSeries,
            SpectralError::EntropyAtOrBelowZero,
            SpectralError::Inconclusive { lo: 1.0, hi: 2.0 },
            SpectralError::PeriodMismatch(1),
            SpectralError::InvalidTolerance,
        ];
        let codec = [
            CodecError::UnknownSymbol(String::new()),
            CodecError::NoMagicWord,
            CodecError::AmbiguousParse(0),
            CodecError::NotInImage(0),
            CodecError::NotRecurrent { mass: String::new() },
        ];
        let graph = [
            LoopGraphError::LoopNotFound,
            LoopGraphError::BudgetExceedsDegree { budget: 2, degree: 1 },
            LoopGraphError::TooManyLoops(1),
            LoopGraphError::NotIrreducible(1),
            LoopGraphError::BadMatrix,
        ];
        let mut codes: Vec<i32> = transform.into_iter().map(|e| Failure::from(e).code).collect();
        codes.extend(spectral.iter().cloned().map(|e| Failure::from(e).code));
        codes.extend(codec.into_iter().map(|e| Failure::from(e).code));
        codes.extend(graph.into_iter().map(|e| Failure::from(e).code));
        codes.extend([OK, INTERNAL, USAGE, IO, SPEC, VERIFICATION]);
        let distinct: BTreeSet<i32> = codes.iter().copied().collect();
        assert_eq!(distinct.len(), codes.len(), "{codes:?}");
        assert!(codes.iter().all(|&c| (0..=255).contains(&c)));
        for e in spectral {
            let direct = Failure::from(e.clone()).code;
            assert_eq!(Failure::from(TransformError::Spectral(e)).code, direct);
        }
    }
}
