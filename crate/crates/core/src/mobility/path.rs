//! Discrete mobile paths and the path-history file.
//!
//! A history file holds one path per line as comma-separated `ap(region)`
//! tokens, e.g. `19(22),13(15),8(9)`. UTF-8, LF line endings.

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::grid::{ApId, GridError, GridTopology, RegionId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PathStep {
    pub ap: ApId,
    pub region: RegionId,
}

impl PathStep {
    pub fn new(ap: u16, region: u16) -> Self {
        Self { ap: ApId(ap), region: RegionId(region) }
    }
}

impl fmt::Display for PathStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({})", self.ap.0, self.region.0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PathError {
    #[error("malformed path token {0:?}")]
    BadToken(String),
    #[error("path is empty")]
    Empty,
    #[error("path has {0} step(s); at least 2 are required")]
    TooShort(usize),
    #[error("step {index}: AP {ap} is not a corner of region {region}")]
    InconsistentStep { index: usize, ap: ApId, region: RegionId },
    #[error("step {index}: AP {from} -> {to} is not a grid-adjacent move")]
    NotAdjacent { index: usize, from: ApId, to: ApId },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Ordered `(AP, region)` visits of one mobile node.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct MobilePath {
    steps: Vec<PathStep>,
}

impl MobilePath {
    pub fn new(steps: Vec<PathStep>) -> Self {
        Self { steps }
    }

    /// Builds a path and checks it against `grid`.
    pub fn validated(steps: Vec<PathStep>, grid: &GridTopology) -> Result<Self, PathError> {
        let path = Self { steps };
        path.validate(grid)?;
        Ok(path)
    }

    pub fn steps(&self) -> &[PathStep] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn aps(&self) -> impl Iterator<Item = ApId> + '_ {
        self.steps.iter().map(|s| s.ap)
    }

    pub fn push(&mut self, step: PathStep) {
        self.steps.push(step);
    }

    /// Every AP is a corner of its region and consecutive APs are
    /// Moore-adjacent. Does not enforce a minimum length.
    pub fn validate(&self, grid: &GridTopology) -> Result<(), PathError> {
        if self.steps.is_empty() {
            return Err(PathError::Empty);
        }
        for (index, step) in self.steps.iter().enumerate() {
            if !grid.region_contains(step.region, step.ap)? {
                return Err(PathError::InconsistentStep { index, ap: step.ap, region: step.region });
            }
            if index > 0 {
                let prev = self.steps[index - 1].ap;
                if !grid.aps_adjacent(prev, step.ap)? {
                    return Err(PathError::NotAdjacent { index, from: prev, to: step.ap });
                }
            }
        }
        Ok(())
    }

    /// [`validate`](Self::validate) plus the two-step minimum needed for history.
    pub fn validate_history(&self, grid: &GridTopology) -> Result<(), PathError> {
        self.validate(grid)?;
        if self.steps.len() < 2 {
            return Err(PathError::TooShort(self.steps.len()));
        }
        Ok(())
    }

    /// `19→13→8` style rendering used by reports.
    pub fn arrow_string(&self) -> String {
        let parts: Vec<String> = self.aps().map(|a| a.0.to_string()).collect();
        parts.join("→")
    }
}

impl fmt::Display for MobilePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, step) in self.steps.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{step}")?;
        }
        Ok(())
    }
}

impl FromStr for PathStep {
    type Err = PathError;

    fn from_str(token: &str) -> Result<Self, Self::Err> {
        let bad = || PathError::BadToken(token.to_string());
        let token = token.trim();
        let (ap, rest) = token.split_once('(').ok_or_else(bad)?;
        let region = rest.strip_suffix(')').ok_or_else(bad)?;
        let ap = ap.trim().parse::<u16>().map_err(|_| bad())?;
        let region = region.trim().parse::<u16>().map_err(|_| bad())?;
        Ok(PathStep::new(ap, region))
    }
}

impl FromStr for MobilePath {
    type Err = PathError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let line = line.trim();
        if line.is_empty() {
            return Err(PathError::Empty);
        }
        let steps = line.split(',').map(str::parse).collect::<Result<Vec<_>, _>>()?;
        Ok(MobilePath { steps })
    }
}

#[derive(Debug, Error)]
pub enum HistoryError {
    #[error("history line {line}: {source}")]
    Line { line: usize, source: PathError },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads a history file, validating each path against `grid`. Blank lines
/// are skipped; line numbers in errors are 1-based.
pub fn read_history<R: BufRead>(reader: R, grid: &GridTopology) -> Result<Vec<MobilePath>, HistoryError> {
    let mut paths = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let path = line
            .parse::<MobilePath>()
            .and_then(|p| p.validate_history(grid).map(|_| p))
            .map_err(|source| HistoryError::Line { line: idx + 1, source })?;
        paths.push(path);
    }
    Ok(paths)
}

pub fn write_history<'a, W, I>(mut writer: W, paths: I) -> io::Result<usize>
where
    W: Write,
    I: IntoIterator<Item = &'a MobilePath>,
{
    let mut n = 0;
    for path in paths {
        writeln!(writer, "{path}")?;
        n += 1;
    }
    writer.flush()?;
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_arrow_notation() {
        let p: MobilePath = "19(22),13(15),8(9),9(10),4(4),3(3)".parse().unwrap();
        assert_eq!(p.len(), 6);
        assert_eq!(p.steps()[1], PathStep::new(13, 15));
        p.validate_history(&GridTopology::default()).unwrap();
        assert_eq!(p.to_string(), "19(22),13(15),8(9),9(10),4(4),3(3)");
        assert_eq!(p.arrow_string(), "19→13→8→9→4→3");
    }

    #[test]
    fn rejects_bad_tokens() {
        assert!(matches!("19(22),13".parse::<MobilePath>(), Err(PathError::BadToken(_))));
        assert!(matches!("x(1)".parse::<MobilePath>(), Err(PathError::BadToken(_))));
        assert!(matches!("".parse::<MobilePath>(), Err(PathError::Empty)));
    }

    #[test]
    fn validation_errors() {
        let g = GridTopology::default();
        let p: MobilePath = "19(21)".parse().unwrap();
        assert!(matches!(p.validate(&g), Err(PathError::InconsistentStep { .. })));
        let p: MobilePath = "0(0),2(2)".parse().unwrap();
        assert!(matches!(p.validate(&g), Err(PathError::NotAdjacent { index: 1, .. })));
        let p: MobilePath = "0(0)".parse().unwrap();
        assert!(p.validate(&g).is_ok());
        assert!(matches!(p.validate_history(&g), Err(PathError::TooShort(1))));
        let p: MobilePath = "30(0)".parse().unwrap();
        assert!(matches!(p.validate(&g), Err(PathError::Grid(_))));
    }

    #[test]
    fn history_reports_line_numbers() {
        let g = GridTopology::default();
        let text = "1(7),7(8)\n\n0(0),2(2)\n";
        match read_history(text.as_bytes(), &g) {
            Err(HistoryError::Line { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let paths = read_history("1(7),7(8)\n13(15),8(9)\n".as_bytes(), &g).unwrap();
        let mut out = Vec::new();
        assert_eq!(write_history(&mut out, &paths).unwrap(), 2);
        assert_eq!(String::from_utf8(out).unwrap(), "1(7),7(8)\n13(15),8(9)\n");
    }
}
