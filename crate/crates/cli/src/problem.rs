//! Problem-file format: a flat key-value text file with `[section]`
//! headers, `#` comment lines, and comma/semicolon-separated lists. The
//! exact grammar is documented in the repository README.

use std::fmt;

#[derive(Debug)]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ParseError {}

fn err(line: usize, message: impl Into<String>) -> ParseError {
    ParseError {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct ProblemSection {
    pub dim: usize,
    pub lagrangian: String,
    pub params: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct EngineSection {
    pub max_generations: Option<u32>,
    pub trials: Option<u32>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default)]
pub struct TransformationSection {
    pub map: Vec<String>,
    pub constraints: Vec<String>,
    pub constraints2: Option<Vec<String>>,
    pub omega2: Option<Vec<Vec<String>>>,
    pub valence: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct PresymplecticSection {
    pub vars: Vec<String>,
    pub omega: Vec<Vec<String>>,
    pub alpha: Vec<String>,
}

/// Parsed problem file. Exactly one of `problem` / `presymplectic` is set.
#[derive(Debug, Clone, Default)]
pub struct ProblemFile {
    pub problem: Option<ProblemSection>,
    pub engine: EngineSection,
    pub transformation: Option<TransformationSection>,
    pub presymplectic: Option<PresymplecticSection>,
}

fn split_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

fn split_matrix(value: &str) -> Vec<Vec<String>> {
    value
        .split(';')
        .map(split_list)
        .filter(|row| !row.is_empty())
        .collect()
}

pub fn parse_problem_file(text: &str) -> Result<ProblemFile, ParseError> {
    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        Problem,
        Engine,
        Transformation,
        Presymplectic,
    }

    let mut file = ProblemFile::default();
    let mut current = Section::None;
    let mut seen: Vec<(Section, String)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(err(lineno, "unterminated section header"));
            };
            current = match name.trim() {
                "problem" => {
                    if file.problem.is_some() {
                        return Err(err(lineno, "duplicate [problem] section"));
                    }
                    file.problem = Some(ProblemSection::default());
                    Section::Problem
                }
                "engine" => Section::Engine,
                "transformation" => {
                    if file.transformation.is_some() {
                        return Err(err(lineno, "duplicate [transformation] section"));
                    }
                    file.transformation = Some(TransformationSection::default());
                    Section::Transformation
                }
                "presymplectic" => {
                    if file.presymplectic.is_some() {
                        return Err(err(lineno, "duplicate [presymplectic] section"));
                    }
                    file.presymplectic = Some(PresymplecticSection::default());
                    Section::Presymplectic
                }
                other => return Err(err(lineno, format!("unknown section [{other}]"))),
            };
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(lineno, format!("expected 'key = value', got '{line}'")));
        };
        let key = key.trim();
        let value = value.trim();
        if seen.iter().any(|(s, k)| *s == current && k == key) {
            return Err(err(lineno, format!("duplicate key '{key}'")));
        }
        seen.push((current, key.to_owned()));

        match current {
            Section::None => {
                return Err(err(lineno, "key outside of any [section]"));
            }
            Section::Problem => {
                let p = file.problem.as_mut().expect("section was opened");
                match key {
                    "dim" => {
                        p.dim = value.parse().map_err(|_| {
                            err(lineno, format!("dim must be a positive integer, got '{value}'"))
                        })?;
                        if p.dim == 0 {
                            return Err(err(lineno, "dim must be at least 1"));
                        }
                    }
                    "lagrangian" => p.lagrangian = value.to_owned(),
                    "params" => p.params = split_list(value),
                    other => {
                        return Err(err(lineno, format!("unknown key '{other}' in [problem]")))
                    }
                }
            }
            Section::Engine => match key {
                "max_generations" => {
                    file.engine.max_generations = Some(value.parse().map_err(|_| {
                        err(lineno, format!("max_generations must be an integer, got '{value}'"))
                    })?)
                }
                "trials" => {
                    file.engine.trials = Some(value.parse().map_err(|_| {
                        err(lineno, format!("trials must be an integer, got '{value}'"))
                    })?)
                }
                "seed" => {
                    file.engine.seed = Some(value.parse().map_err(|_| {
                        err(lineno, format!("seed must be an integer, got '{value}'"))
                    })?)
                }
                other => return Err(err(lineno, format!("unknown key '{other}' in [engine]"))),
            },
            Section::Transformation => {
                let t = file.transformation.as_mut().expect("section was opened");
                match key {
                    "map" => t.map = split_list(value),
                    "constraints" => t.constraints = split_list(value),
                    "constraints2" => t.constraints2 = Some(split_list(value)),
                    "omega2" => t.omega2 = Some(split_matrix(value)),
                    "valence" => t.valence = Some(value.to_owned()),
                    other => {
                        return Err(err(
                            lineno,
                            format!("unknown key '{other}' in [transformation]"),
                        ))
                    }
                }
            }
            Section::Presymplectic => {
                let p = file.presymplectic.as_mut().expect("section was opened");
                match key {
                    "vars" => p.vars = split_list(value),
                    "omega" => p.omega = split_matrix(value),
                    "alpha" => p.alpha = split_list(value),
                    other => {
                        return Err(err(
                            lineno,
                            format!("unknown key '{other}' in [presymplectic]"),
                        ))
                    }
                }
            }
        }
    }

    // Cross-section checks.
    match (&file.problem, &file.presymplectic) {
        (None, None) => {
            return Err(err(0, "file needs a [problem] or a [presymplectic] section"))
        }
        (Some(_), Some(_)) => {
            return Err(err(
                0,
                "[problem] and [presymplectic] cannot appear in the same file",
            ))
        }
        _ => {}
    }
    if let Some(p) = &file.problem {
        if p.dim == 0 {
            return Err(err(0, "[problem] is missing 'dim'"));
        }
        if p.lagrangian.is_empty() {
            return Err(err(0, "[problem] is missing 'lagrangian'"));
        }
    }
    if let Some(t) = &file.transformation {
        if file.problem.is_none() {
            return Err(err(0, "[transformation] requires a [problem] section"));
        }
        if t.map.is_empty() {
            return Err(err(0, "[transformation] is missing 'map'"));
        }
    }
    if let Some(p) = &file.presymplectic {
        if p.vars.is_empty() {
            return Err(err(0, "[presymplectic] is missing 'vars'"));
        }
        if p.omega.is_empty() {
            return Err(err(0, "[presymplectic] is missing 'omega'"));
        }
        if p.alpha.is_empty() {
            return Err(err(0, "[presymplectic] is missing 'alpha'"));
        }
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_file() {
        let text = "\
# demo
[problem]
dim = 2
lagrangian = (1/2)*(v1 - v2)^2

[engine]
seed = 7

[transformation]
map = q1, q2, 2*p1, 2*p2
constraints = p1 + p2
valence = 2
";
        let f = parse_problem_file(text).unwrap();
        let p = f.problem.unwrap();
        assert_eq!(p.dim, 2);
        assert_eq!(p.lagrangian, "(1/2)*(v1 - v2)^2");
        assert_eq!(f.engine.seed, Some(7));
        let t = f.transformation.unwrap();
        assert_eq!(t.map.len(), 4);
        assert_eq!(t.constraints, vec!["p1 + p2"]);
        assert_eq!(t.valence.as_deref(), Some("2"));
    }

    #[test]
    fn parses_a_presymplectic_file() {
        let text = "\
[presymplectic]
vars = x, y, z
omega = 0, 1, 0; -1, 0, 0; 0, 0, 0
alpha = 0, 0, 1
";
        let f = parse_problem_file(text).unwrap();
        let p = f.presymplectic.unwrap();
        assert_eq!(p.vars, vec!["x", "y", "z"]);
        assert_eq!(p.omega.len(), 3);
        assert_eq!(p.omega[1], vec!["-1", "0", "0"]);
        assert_eq!(p.alpha, vec!["0", "0", "1"]);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse_problem_file("").is_err());
        assert!(parse_problem_file("dim = 2").is_err());
        assert!(parse_problem_file("[problem]\ndim = 2").is_err());
        assert!(parse_problem_file("[nonsense]\na = b").is_err());
        assert!(parse_problem_file("[problem]\ndim = 2\ndim = 3\nlagrangian = v1").is_err());
        assert!(
            parse_problem_file("[problem]\ndim = two\nlagrangian = v1^2").is_err()
        );
        assert!(parse_problem_file("[transformation]\nmap = q1").is_err());
    }
}
