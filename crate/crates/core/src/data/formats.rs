use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{tokenize, SentencePairRecord};
use crate::error::{PwiError, Result};

/// Published column layouts, all mapped onto [`SentencePairRecord`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DataFormat {
    /// `label<TAB>sentence1<TAB>sentence2`
    Canonical,
    /// `Quality<TAB>#1 ID<TAB>#2 ID<TAB>#1 String<TAB>#2 String`, header line first.
    Msrp,
    /// `topic_id<TAB>topic<TAB>sentence1<TAB>sentence2<TAB>label[<TAB>…]` with
    /// `(yes,no)` vote labels, or a single 0–5 score.
    Pit,
    /// `sentence1<TAB>sentence2<TAB>(yes,6)[<TAB>url]`
    TwitterUrl,
}

impl DataFormat {
    pub fn name(self) -> &'static str {
        match self {
            DataFormat::Canonical => "canonical",
            DataFormat::Msrp => "msrp",
            DataFormat::Pit => "pit",
            DataFormat::TwitterUrl => "twitter-url",
        }
    }
}

impl fmt::Display for DataFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DataFormat {
    type Err = PwiError;

    fn from_str(s: &str) -> Result<Self> {
        [DataFormat::Canonical, DataFormat::Msrp, DataFormat::Pit, DataFormat::TwitterUrl]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| PwiError::invalid(format!("unknown data format `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub format: DataFormat,
    /// Drop pairs whose crowd vote is debatable instead of calling them negative.
    pub strict: bool,
    pub lowercase: bool,
}

impl LoadOptions {
    pub fn new(format: DataFormat) -> Self {
        LoadOptions {
            format,
            strict: false,
            lowercase: false,
        }
    }
}

/// Records plus the bookkeeping of what was skipped.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadReport {
    pub records: Vec<SentencePairRecord>,
    /// Data lines seen (blank lines and headers excluded).
    pub lines: usize,
    /// Unparseable lines, with their line number and reason.
    pub malformed: Vec<(usize, String)>,
    /// Well-formed pairs dropped as debatable under strict mode.
    pub debatable: usize,
}

/// Largest share of malformed lines tolerated before loading fails.
pub const MAX_MALFORMED_FRACTION: f64 = 0.10;

enum Line {
    Pair(SentencePairRecord),
    Debatable,
}

pub fn load_pairs(path: &Path, options: LoadOptions) -> Result<LoadReport> {
    let f = File::open(path).map_err(|e| PwiError::io(path, e))?;
    parse_pairs(BufReader::new(f), path, options)
}

pub fn parse_pairs<B: BufRead>(reader: B, path: &Path, options: LoadOptions) -> Result<LoadReport> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut report = LoadReport {
        records: Vec::new(),
        lines: 0,
        malformed: Vec::new(),
        debatable: 0,
    };
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| PwiError::io(path, e))?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        if options.format == DataFormat::Msrp && lineno == 1 && line.starts_with("Quality") {
            continue;
        }
        report.lines += 1;
        match parse_line(line, options, &format!("{name}:{lineno}")) {
            Ok(Line::Pair(r)) => report.records.push(r),
            Ok(Line::Debatable) => report.debatable += 1,
            Err(msg) => report.malformed.push((lineno, msg)),
        }
    }
    let bad = report.malformed.len();
    if report.lines > 0 && bad as f64 > MAX_MALFORMED_FRACTION * report.lines as f64 {
        let (first_line, first_msg) = &report.malformed[0];
        return Err(PwiError::Data(format!(
            "{}: {bad} of {} lines malformed (limit {:.0}%); first at line {first_line}: {first_msg}",
            path.display(),
            report.lines,
            MAX_MALFORMED_FRACTION * 100.0
        )));
    }
    for (lineno, msg) in &report.malformed {
        log::warn!("{}:{lineno}: skipped: {msg}", path.display());
    }
    if report.records.is_empty() {
        return Err(PwiError::Data(format!("{}: no usable sentence pairs", path.display())));
    }
    Ok(report)
}

fn parse_line(line: &str, options: LoadOptions, source: &str) -> std::result::Result<Line, String> {
    let cols: Vec<&str> = line.split('\t').collect();
    let need = |n: usize| {
        if cols.len() < n {
            Err(format!("expected at least {n} tab-separated columns, found {}", cols.len()))
        } else {
            Ok(())
        }
    };
    let (s1, s2, label) = match options.format {
        DataFormat::Canonical => {
            need(3)?;
            (cols[1], cols[2], Some(binary_label(cols[0])?))
        }
        DataFormat::Msrp => {
            need(5)?;
            (cols[3], cols[4], Some(binary_label(cols[0])?))
        }
        DataFormat::Pit => {
            need(5)?;
            (cols[2], cols[3], pit_label(cols[4], options.strict)?)
        }
        DataFormat::TwitterUrl => {
            need(3)?;
            (cols[0], cols[1], twitter_url_label(cols[2], options.strict)?)
        }
    };
    let Some(label) = label else {
        return Ok(Line::Debatable);
    };
    let prep = |s: &str| {
        let t = tokenize(s);
        if options.lowercase {
            super::lowercase_tokens(&t)
        } else {
            t
        }
    };
    let (t1, t2) = (prep(s1), prep(s2));
    if t1.is_empty() || t2.is_empty() {
        return Err("empty sentence".into());
    }
    SentencePairRecord::new(t1, t2, label, source)
        .map(Line::Pair)
        .map_err(|e| e.to_string())
}

fn binary_label(s: &str) -> std::result::Result<u8, String> {
    match s.trim() {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(format!("bad label `{other}`")),
    }
}

/// `(yes,no)` vote pair.
fn votes(s: &str) -> Option<(u32, u32)> {
    let inner = s.trim().strip_prefix('(')?.strip_suffix(')')?;
    let (a, b) = inner.split_once(',')?;
    Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
}

/// Five crowd votes: three or more "yes" is a paraphrase, one or none is not,
/// two is debatable. A single number is an expert 0–5 score: 4–5 paraphrase,
/// 0–2 not, 3 debatable. Debatable pairs are negatives unless `strict`.
fn pit_label(s: &str, strict: bool) -> std::result::Result<Option<u8>, String> {
    if let Some((yes, no)) = votes(s) {
        if yes + no != 5 {
            return Err(format!("vote label `{s}` does not sum to 5"));
        }
        return Ok(match yes {
            3.. => Some(1),
            2 if strict => None,
            _ => Some(0),
        });
    }
    match s.trim().parse::<u32>() {
        Ok(score @ 0..=5) => Ok(match score {
            4.. => Some(1),
            3 if strict => None,
            _ => Some(0),
        }),
        _ => Err(format!("bad label `{s}`")),
    }
}

/// Six crowd votes: four or more "yes" is a paraphrase, one or none is not,
/// two or three is debatable.
fn twitter_url_label(s: &str, strict: bool) -> std::result::Result<Option<u8>, String> {
    let (yes, total) = votes(s).ok_or_else(|| format!("bad label `{s}`"))?;
    if total != 6 || yes > 6 {
        return Err(format!("vote label `{s}` is not out of 6"));
    }
    Ok(match yes {
        4.. => Some(1),
        2 | 3 if strict => None,
        _ => Some(0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, options: LoadOptions) -> Result<LoadReport> {
        parse_pairs(text.as_bytes(), Path::new("t.tsv"), options)
    }

    #[test]
    fn canonical_three_lines() {
        let r = parse("1\ta b\ta c\n0\tx\ty\n1\tp q.\tp q\n", LoadOptions::new(DataFormat::Canonical)).unwrap();
        assert_eq!(r.records.len(), 3);
        assert_eq!(r.records[2].sentence1, ["p", "q", "."]);
        assert_eq!(r.records[0].source, "t.tsv:1");
    }

    #[test]
    fn empty_sentence_skipped_and_counted() {
        let mut text = String::from("1\t \tb\n");
        for _ in 0..10 {
            text.push_str("0\ta\tb\n");
        }
        let r = parse(&text, LoadOptions::new(DataFormat::Canonical)).unwrap();
        assert_eq!(r.records.len(), 10);
        assert_eq!(r.malformed.len(), 1);
        assert_eq!(r.malformed[0].0, 1);
    }

    #[test]
    fn too_many_malformed_is_fatal() {
        let text = "1\ta\tb\nbad line\n0\tc\td\n";
        assert!(matches!(parse(text, LoadOptions::new(DataFormat::Canonical)), Err(PwiError::Data(_))));
    }

    #[test]
    fn pit_votes() {
        let text = "4\tt\ta b\ta c\t(3,2)\tx\ty\n4\tt\ta b\tz c\t(2,3)\tx\ty\n4\tt\td\te\t(0,5)\n4\tt\td\te\t(5,0)\n";
        let lax = parse(text, LoadOptions::new(DataFormat::Pit)).unwrap();
        let labels: Vec<u8> = lax.records.iter().map(|r| r.label).collect();
        assert_eq!(labels, [1, 0, 0, 1]);
        let strict = parse(text, LoadOptions { strict: true, ..LoadOptions::new(DataFormat::Pit) }).unwrap();
        assert_eq!(strict.records.len(), 3);
        assert_eq!(strict.debatable, 1);
    }

    #[test]
    fn pit_expert_scores() {
        assert_eq!(pit_label("4", false).unwrap(), Some(1));
        assert_eq!(pit_label("3", true).unwrap(), None);
        assert_eq!(pit_label("2", false).unwrap(), Some(0));
        assert!(pit_label("(4,4)", false).is_err());
    }

    #[test]
    fn msrp_header_skipped() {
        let text = "Quality\t#1 ID\t#2 ID\t#1 String\t#2 String\n1\t1\t2\tHe said.\tHe stated.\n";
        let r = parse(text, LoadOptions::new(DataFormat::Msrp)).unwrap();
        assert_eq!(r.lines, 1);
        assert_eq!(r.records[0].sentence2, ["He", "stated", "."]);
    }

    #[test]
    fn twitter_url_votes() {
        let text = "a b\ta c\t(4,6)\thttp://x\nd\te\t(1,6)\nd\te\t(3,6)\n";
        let r = parse(text, LoadOptions::new(DataFormat::TwitterUrl)).unwrap();
        assert_eq!(r.records.iter().map(|r| r.label).collect::<Vec<_>>(), [1, 0, 0]);
    }
}
